//! `streetbase` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use streetbase_core::collab::{DONE, HEX_GRID, TODO};
use streetbase_core::engine::Engine;
use streetbase_core::project::save_project;
use streetbase_core::{demo, Config, EngineError};

use crate::api::{router, AppState};

#[derive(Debug, Parser)]
#[command(name = "streetbase", version, about = "Reactive street layer engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP API and the change feed for a project.
    Serve {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// JSON configuration replacing the one stored in the project.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seconds between automatic saves of changed state.
        #[arg(long, default_value_t = 5)]
        save_every: u64,
    },
    /// Regenerate the whole street model and save the project.
    Generate {
        #[arg(long)]
        project: PathBuf,
    },
    /// Run every store-wide invariant sweep.
    Check {
        #[arg(long)]
        project: PathBuf,
    },
    /// Hex-grid todo/done counts and cumulated edit time.
    Stats {
        #[arg(long)]
        project: PathBuf,
    },
    /// Write the bundled demo project.
    Demo {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

/// Runs one command; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, CliError::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Serve { project, port, host, config, save_every } => {
            let config = config.map(|p| read_config_file(&p)).transpose()?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::Usage(format!("bad address {host}:{port}: {e}")))?;
            let engine = Arc::new(Engine::load(&project, config)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(engine, addr, project, Duration::from_secs(save_every.max(1))))?;
            Ok(0)
        }
        Command::Generate { project } => {
            let engine = Engine::load(&project, None)?;
            let changed = engine.generate()?;
            engine.save(&project)?;
            writeln!(out, "regenerated: {changed} changed features")?;
            Ok(0)
        }
        Command::Check { project } => {
            let engine = Engine::load(&project, None)?;
            let problems = engine.check();
            for p in &problems {
                writeln!(out, "{p}")?;
            }
            if problems.is_empty() {
                writeln!(out, "ok")?;
                Ok(0)
            } else {
                writeln!(out, "{} violations", problems.len())?;
                Ok(1)
            }
        }
        Command::Stats { project } => {
            let engine = Engine::load(&project, None)?;
            write_stats(&engine, out)?;
            Ok(0)
        }
        Command::Demo { project, force } => {
            if project.join("manifest.json").exists() && !force {
                return Err(CliError::Usage(format!(
                    "{} already holds a project; pass --force to overwrite",
                    project.display()
                )));
            }
            let store = demo::build(Config::default())?;
            save_project(&store, &project)?;
            writeln!(out, "demo project written to {}", project.display())?;
            Ok(0)
        }
    }
}

fn read_config_file(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)?;
    Config::from_json(&text).map_err(|e| {
        CliError::Engine(EngineError::Parse {
            file: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })
}

#[derive(Default)]
struct AreaStats {
    cells: usize,
    todo: usize,
    done: usize,
    cumulated_ms: i64,
}

pub fn write_stats(engine: &Engine, out: &mut dyn Write) -> std::io::Result<()> {
    let mut areas: BTreeMap<u64, AreaStats> = BTreeMap::new();
    engine.read(|s| {
        if let Ok(grid) = s.layer(HEX_GRID) {
            for c in grid.features() {
                let a = areas.entry(c.fid("area_id").unwrap_or(0)).or_default();
                a.cells += 1;
                match c.text("status") {
                    Some(DONE) => a.done += 1,
                    Some(TODO) => a.todo += 1,
                    _ => {}
                }
                a.cumulated_ms += c.int("cumulated_ms").unwrap_or(0);
            }
        }
    });
    writeln!(out, "{:>8} {:>8} {:>8} {:>8} {:>14}", "area", "cells", "todo", "done", "cumulated_ms")?;
    for (id, a) in areas {
        writeln!(out, "{id:>8} {:>8} {:>8} {:>8} {:>14}", a.cells, a.todo, a.done, a.cumulated_ms)?;
    }
    Ok(())
}

/// Serves until interrupted. Changed state is saved periodically and on
/// shutdown.
pub async fn serve(engine: Arc<Engine>, addr: SocketAddr, project: PathBuf, save_every: Duration) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    let app = router(AppState::new(engine.clone()));
    let saver = {
        let (engine, project) = (engine.clone(), project.clone());
        tokio::spawn(async move {
            let mut saved = engine.read(|s| (s.last_seq(), s.last_set()));
            let mut tick = tokio::time::interval(save_every);
            loop {
                tick.tick().await;
                let now = engine.read(|s| (s.last_seq(), s.last_set()));
                if now != saved {
                    match engine.save(&project) {
                        Ok(()) => saved = now,
                        Err(e) => eprintln!("autosave failed: {e}"),
                    }
                }
            }
        })
    };
    axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    saver.abort();
    engine.save(&project).map_err(std::io::Error::other)
}
