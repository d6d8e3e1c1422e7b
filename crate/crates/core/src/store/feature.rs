use std::collections::BTreeMap;

use serde_json::{json, Map, Value as Json};
use streetbase_geom::{segment_intersection, Point, Polygon, Polyline, Rect};

use super::schema::GeometryKind;
use super::value::Value;

/// Store-assigned feature id, unique within a layer. Zero means unassigned.
pub type FeatureId = u64;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Point),
    Polyline(Polyline),
    Polygon(Polygon),
}

impl Geometry {
    pub fn kind(&self) -> GeometryKind {
        match self {
            Geometry::Point(_) => GeometryKind::Point,
            Geometry::Polyline(_) => GeometryKind::Polyline,
            Geometry::Polygon(_) => GeometryKind::Polygon,
        }
    }

    pub fn bbox(&self) -> Rect {
        match self {
            Geometry::Point(p) => Rect::new(p.x, p.y, p.x, p.y),
            Geometry::Polyline(l) => l.bbox(),
            Geometry::Polygon(p) => p.bbox(),
        }
    }

    pub fn as_point(&self) -> Option<&Point> {
        match self {
            Geometry::Point(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_polyline(&self) -> Option<&Polyline> {
        match self {
            Geometry::Polyline(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_polygon(&self) -> Option<&Polygon> {
        match self {
            Geometry::Polygon(p) => Some(p),
            _ => None,
        }
    }

    /// Exact intersection test against a closed rectangle.
    pub fn intersects_rect(&self, rect: &Rect) -> bool {
        if !self.bbox().intersects(rect) {
            return false;
        }
        let corners = [
            Point::new(rect.min_x, rect.min_y),
            Point::new(rect.max_x, rect.min_y),
            Point::new(rect.max_x, rect.max_y),
            Point::new(rect.min_x, rect.max_y),
        ];
        let crosses_rect = |verts: &[Point]| {
            verts.iter().any(|v| rect.contains(v))
                || verts.windows(2).any(|w| {
                    (0..4).any(|k| segment_intersection(w[0], w[1], corners[k], corners[(k + 1) % 4]).is_some())
                })
        };
        match self {
            Geometry::Point(p) => rect.contains(p),
            Geometry::Polyline(l) => crosses_rect(l.vertices()),
            Geometry::Polygon(poly) => {
                crosses_rect(poly.exterior())
                    || poly.holes().iter().any(|h| crosses_rect(h))
                    || corners.iter().any(|c| poly.contains_point(c))
            }
        }
    }

    /// Largest coordinate difference, or infinity when shapes differ.
    pub fn max_deviation(&self, other: &Geometry) -> f64 {
        fn pts(a: &[Point], b: &[Point]) -> f64 {
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            a.iter()
                .zip(b)
                .map(|(p, q)| {
                    let dz = match (p.z, q.z) {
                        (Some(x), Some(y)) => (x - y).abs(),
                        (None, None) => 0.0,
                        _ => f64::INFINITY,
                    };
                    (p.x - q.x).abs().max((p.y - q.y).abs()).max(dz)
                })
                .fold(0.0, f64::max)
        }
        match (self, other) {
            (Geometry::Point(a), Geometry::Point(b)) => pts(&[*a], &[*b]),
            (Geometry::Polyline(a), Geometry::Polyline(b)) => pts(a.vertices(), b.vertices()),
            (Geometry::Polygon(a), Geometry::Polygon(b)) => {
                if a.holes().len() != b.holes().len() {
                    return f64::INFINITY;
                }
                a.holes()
                    .iter()
                    .zip(b.holes())
                    .map(|(x, y)| pts(x, y))
                    .fold(pts(a.exterior(), b.exterior()), f64::max)
            }
            _ => f64::INFINITY,
        }
    }

    pub fn to_geojson(&self) -> Json {
        match self {
            Geometry::Point(p) => json!({"type": "Point", "coordinates": coord(p)}),
            Geometry::Polyline(l) => json!({
                "type": "LineString",
                "coordinates": l.vertices().iter().map(coord).collect::<Vec<_>>()
            }),
            Geometry::Polygon(p) => {
                let mut rings = vec![p.exterior().iter().map(coord).collect::<Vec<_>>()];
                rings.extend(p.holes().iter().map(|h| h.iter().map(coord).collect::<Vec<_>>()));
                json!({"type": "Polygon", "coordinates": rings})
            }
        }
    }

    pub fn from_geojson(v: &Json) -> Result<Geometry, String> {
        let ty = v.get("type").and_then(Json::as_str).ok_or("geometry without type")?;
        let coords = v.get("coordinates").ok_or("geometry without coordinates")?;
        match ty {
            "Point" => Ok(Geometry::Point(parse_coord(coords)?)),
            "LineString" => {
                let pts = parse_coords(coords)?;
                Ok(Geometry::Polyline(Polyline::new(pts).map_err(|e| e.to_string())?))
            }
            "Polygon" => {
                let rings = coords.as_array().ok_or("polygon coordinates must be an array")?;
                let mut rings = rings.iter().map(parse_coords).collect::<Result<Vec<_>, _>>()?;
                if rings.is_empty() {
                    return Err("polygon without rings".into());
                }
                let exterior = rings.remove(0);
                Ok(Geometry::Polygon(
                    Polygon::new(exterior, rings).map_err(|e| e.to_string())?,
                ))
            }
            other => Err(format!("unsupported geometry type {other}")),
        }
    }
}

fn coord(p: &Point) -> Json {
    match p.z {
        Some(z) => json!([p.x, p.y, z]),
        None => json!([p.x, p.y]),
    }
}

fn parse_coord(v: &Json) -> Result<Point, String> {
    let a = v.as_array().ok_or("coordinate must be an array")?;
    let num = |i: usize| -> Result<f64, String> {
        a.get(i)
            .and_then(Json::as_f64)
            .ok_or_else(|| "coordinate must hold numbers".to_string())
    };
    let p = match a.len() {
        2 => Point::new(num(0)?, num(1)?),
        3 => Point::with_z(num(0)?, num(1)?, num(2)?),
        _ => return Err("coordinate must have 2 or 3 numbers".into()),
    };
    if !p.is_finite() {
        return Err("non-finite coordinate".into());
    }
    Ok(p)
}

fn parse_coords(v: &Json) -> Result<Vec<Point>, String> {
    v.as_array()
        .ok_or("coordinates must be an array")?
        .iter()
        .map(parse_coord)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Feature {
    pub id: FeatureId,
    pub geometry: Option<Geometry>,
    pub attributes: BTreeMap<String, Value>,
}

impl Feature {
    pub fn new(geometry: Option<Geometry>) -> Self {
        Feature {
            id: 0,
            geometry,
            attributes: BTreeMap::new(),
        }
    }

    pub fn point(p: Point) -> Self {
        Feature::new(Some(Geometry::Point(p)))
    }

    pub fn polyline(l: Polyline) -> Self {
        Feature::new(Some(Geometry::Polyline(l)))
    }

    pub fn polygon(p: Polygon) -> Self {
        Feature::new(Some(Geometry::Polygon(p)))
    }

    pub fn with(mut self, name: &str, v: impl Into<Value>) -> Self {
        self.attributes.insert(name.to_string(), v.into());
        self
    }

    pub fn with_id(mut self, id: FeatureId) -> Self {
        self.id = id;
        self
    }

    pub fn set(&mut self, name: &str, v: impl Into<Value>) {
        self.attributes.insert(name.to_string(), v.into());
    }

    pub fn get(&self, name: &str) -> &Value {
        static NULL: Value = Value::Null;
        self.attributes.get(name).unwrap_or(&NULL)
    }

    pub fn real(&self, name: &str) -> Option<f64> {
        self.get(name).as_f64()
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        self.get(name).as_i64()
    }

    /// Integer attribute read as a feature id.
    pub fn fid(&self, name: &str) -> Option<FeatureId> {
        self.int(name).filter(|v| *v > 0).map(|v| v as FeatureId)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.get(name).as_str()
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.get(name).as_bool()
    }

    pub fn point_geometry(&self) -> Option<&Point> {
        self.geometry.as_ref()?.as_point()
    }

    pub fn polyline_geometry(&self) -> Option<&Polyline> {
        self.geometry.as_ref()?.as_polyline()
    }

    pub fn polygon_geometry(&self) -> Option<&Polygon> {
        self.geometry.as_ref()?.as_polygon()
    }

    /// Equality up to `tol` on coordinates and real attributes.
    pub fn approx_eq(&self, other: &Feature, tol: f64) -> bool {
        let geom_ok = match (&self.geometry, &other.geometry) {
            (None, None) => true,
            (Some(a), Some(b)) => a.max_deviation(b) <= tol,
            _ => false,
        };
        geom_ok
            && self.attributes.len() == other.attributes.len()
            && self.attributes.iter().all(|(k, v)| match (v, other.attributes.get(k)) {
                (Value::Real(a), Some(Value::Real(b))) => (a - b).abs() <= tol,
                (a, Some(b)) => a == b,
                (_, None) => false,
            })
    }

    pub fn to_geojson(&self) -> Json {
        let props: Map<String, Json> = self
            .attributes
            .iter()
            .map(|(k, v)| (k.clone(), v.to_json()))
            .collect();
        json!({
            "type": "Feature",
            "id": self.id,
            "geometry": self.geometry.as_ref().map_or(Json::Null, Geometry::to_geojson),
            "properties": props,
        })
    }

    /// Parses a GeoJSON Feature. A missing id reads as unassigned.
    pub fn from_geojson(v: &Json) -> Result<Feature, String> {
        if v.get("type").and_then(Json::as_str) != Some("Feature") {
            return Err("expected a GeoJSON Feature".into());
        }
        let id = match v.get("id") {
            None | Some(Json::Null) => 0,
            Some(id) => id.as_u64().ok_or("feature id must be a non-negative integer")?,
        };
        let geometry = match v.get("geometry") {
            None | Some(Json::Null) => None,
            Some(g) => Some(Geometry::from_geojson(g)?),
        };
        let mut attributes = BTreeMap::new();
        match v.get("properties") {
            None | Some(Json::Null) => {}
            Some(Json::Object(m)) => {
                for (k, val) in m {
                    let val = Value::from_json(val).ok_or_else(|| format!("property {k} must be a scalar"))?;
                    attributes.insert(k.clone(), val);
                }
            }
            Some(_) => return Err("properties must be an object".into()),
        }
        Ok(Feature {
            id,
            geometry,
            attributes,
        })
    }
}
