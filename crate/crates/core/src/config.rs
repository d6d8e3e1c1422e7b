use serde::{Deserialize, Serialize};

/// Which side vehicles drive on; decides default lane directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    #[default]
    Right,
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub snap_tolerance_m: f64,
    pub trigger_depth_limit: usize,
    pub default_width_m: f64,
    pub default_radius_m: f64,
    pub default_lane_count: i64,
    pub conflict_window_ms: i64,
    pub hex_size_m: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    pub traffic: Handedness,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            snap_tolerance_m: 0.5,
            trigger_depth_limit: 16,
            default_width_m: 8.0,
            default_radius_m: 5.0,
            default_lane_count: 2,
            conflict_window_ms: 300_000,
            hex_size_m: 25.0,
            min_scale: 100.0,
            max_scale: 5000.0,
            traffic: Handedness::Right,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn scale_in_band(&self, scale: f64) -> bool {
        scale >= self.min_scale && scale <= self.max_scale
    }
}
