//! GeoJSON subset: a `FeatureCollection` of single-ring `Polygon` features.
//! Each feature carries its polygon id in the feature-level `id` member and
//! numeric-only `properties`. Coordinates follow GeoJSON `[lon, lat]` order.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::CensusPolygon;
use crate::error::{Error, Result};

fn bad(id: &str, msg: impl Into<String>) -> Error {
    Error::Geometry {
        polygon_id: id.to_string(),
        message: msg.into(),
    }
}

pub fn parse_polygons(text: &str) -> Result<Vec<CensusPolygon>> {
    let root: Value = serde_json::from_str(text)?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::input("polygons: top-level object must be a FeatureCollection"));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::input("polygons: missing features array"))?;
    if features.is_empty() {
        log::warn!("polygons: empty FeatureCollection");
    }
    let mut out = Vec::with_capacity(features.len());
    for (i, feat) in features.iter().enumerate() {
        let id = match feat.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(bad(&format!("#{i}"), "feature has no string or numeric id")),
        };
        let geom = feat
            .get("geometry")
            .ok_or_else(|| bad(&id, "missing geometry"))?;
        if geom.get("type").and_then(Value::as_str) != Some("Polygon") {
            return Err(bad(&id, "geometry type must be Polygon"));
        }
        let rings = geom
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| bad(&id, "missing coordinates"))?;
        if rings.len() != 1 {
            return Err(bad(&id, format!("expected one ring, found {}", rings.len())));
        }
        let mut ring = Vec::new();
        for pos in rings[0]
            .as_array()
            .ok_or_else(|| bad(&id, "ring is not an array"))?
        {
            let pair = pos.as_array().filter(|p| p.len() >= 2);
            let (lon, lat) = match pair.map(|p| (p[0].as_f64(), p[1].as_f64())) {
                Some((Some(lon), Some(lat))) => (lon, lat),
                _ => return Err(bad(&id, "position must be [lon, lat]")),
            };
            ring.push((lat, lon));
        }
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        let mut attributes = BTreeMap::new();
        if let Some(props) = feat.get("properties") {
            let props = props
                .as_object()
                .ok_or_else(|| bad(&id, "properties must be an object"))?;
            for (k, v) in props {
                let x = v
                    .as_f64()
                    .ok_or_else(|| bad(&id, format!("property {k:?} is not numeric")))?;
                attributes.insert(k.clone(), x);
            }
        }
        out.push(CensusPolygon::new(id, ring, attributes)?);
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in &out {
        if !seen.insert(p.polygon_id.as_str()) {
            return Err(bad(&p.polygon_id, "duplicate polygon id"));
        }
    }
    out.sort_by(|a, b| a.polygon_id.cmp(&b.polygon_id));
    Ok(out)
}

pub fn load_polygons(path: impl AsRef<Path>) -> Result<Vec<CensusPolygon>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_polygons(&text)
}

pub fn polygons_to_geojson(polygons: &[CensusPolygon]) -> Value {
    let features: Vec<Value> = polygons
        .iter()
        .map(|p| {
            let mut coords: Vec<Value> = p.ring.iter().map(|&(lat, lon)| json!([lon, lat])).collect();
            if let Some(first) = coords.first().cloned() {
                coords.push(first);
            }
            let props: Map<String, Value> = p
                .attributes
                .iter()
                .map(|(k, v)| (k.clone(), json!(v)))
                .collect();
            json!({
                "type": "Feature",
                "id": p.polygon_id,
                "properties": props,
                "geometry": {"type": "Polygon", "coordinates": [coords]},
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn write_polygons<W: Write>(mut out: W, polygons: &[CensusPolygon]) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &polygons_to_geojson(polygons))?;
    out.write_all(b"\n")
        .map_err(|e| Error::io("<polygons writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collection(ring: &str, props: &str) -> String {
        format!(
            r#"{{"type":"FeatureCollection","features":[{{"type":"Feature","id":"P1",
            "properties":{props},"geometry":{{"type":"Polygon","coordinates":[{ring}]}}}}]}}"#
        )
    }

    #[test]
    fn unit_square_loads() {
        let text = collection("[[0,0],[1,0],[1,1],[0,1],[0,0]]", r#"{"income":100}"#);
        let polys = parse_polygons(&text).unwrap();
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].ring.len(), 4);
        assert_eq!(polys[0].attributes["income"], 100.0);
        // lon/lat swapped into (lat, lon)
        assert_eq!(polys[0].ring[1], (0.0, 1.0));
    }

    #[test]
    fn bowtie_rejected_with_id() {
        let text = collection("[[0,0],[1,1],[1,0],[0,1],[0,0]]", "{}");
        let err = parse_polygons(&text).unwrap_err().to_string();
        assert!(err.starts_with("polygon P1"), "{err}");
    }

    #[test]
    fn too_few_vertices_rejected() {
        let text = collection("[[0,0],[1,0],[0,0]]", "{}");
        assert!(parse_polygons(&text).is_err());
    }

    #[test]
    fn non_numeric_property_rejected() {
        let text = collection("[[0,0],[1,0],[1,1],[0,1]]", r#"{"name":"x"}"#);
        assert!(parse_polygons(&text).is_err());
    }

    #[test]
    fn empty_collection_is_empty() {
        let polys = parse_polygons(r#"{"type":"FeatureCollection","features":[]}"#).unwrap();
        assert!(polys.is_empty());
    }

    #[test]
    fn write_then_parse_round_trips() {
        let text = collection("[[0,0],[1,0],[1,1],[0,1]]", r#"{"income":100.5,"pop":3}"#);
        let polys = parse_polygons(&text).unwrap();
        let mut buf = Vec::new();
        write_polygons(&mut buf, &polys).unwrap();
        let again = parse_polygons(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(polys, again);
    }
}
