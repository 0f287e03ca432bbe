//! Spatial enrichment: census attributes from the containing (or nearest)
//! polygon, and competitor counts within a fixed radius.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::matrix::{FeatureDescriptor, FeatureFamily, FeatureMatrix};
use crate::error::Result;
use crate::geometry::{haversine_m, ring_contains, ring_distance};
use crate::ingest::{CensusPolygon, ClientRecord, CompetitorSite};

pub const COMPETITION_RADIUS_M: f64 = 300.0;
pub const DENSITY_COMPETITION_300M: &str = "DENSITY_COMPETITION_300M";

pub fn census_feature_name(attribute: &str) -> String {
    let clean: String = attribute
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    format!("CENSUS_{clean}")
}

/// Index of the polygon assigned to a point: the lowest-id polygon that
/// contains it, else the polygon with the smallest boundary distance (ties
/// to the lowest id). `polygons` must be sorted by id.
pub fn assign_polygon(point: (f64, f64), polygons: &[CensusPolygon]) -> Option<usize> {
    if let Some(i) = polygons.iter().position(|p| ring_contains(point, &p.ring)) {
        return Some(i);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in polygons.iter().enumerate() {
        let d = ring_distance(point, &p.ring);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Number of competitor sites within `radius_m` meters (great-circle).
pub fn competitors_within(point: (f64, f64), sites: &[CompetitorSite], radius_m: f64) -> usize {
    // one degree of latitude is ~111 km; skip sites clearly out of range
    let lat_margin = radius_m / 100_000.0;
    sites
        .iter()
        .filter(|s| (s.latitude - point.0).abs() <= lat_margin)
        .filter(|s| haversine_m(point, (s.latitude, s.longitude)) <= radius_m)
        .count()
}

/// One `CENSUS_<ATTR>` column per attribute seen on any polygon, plus
/// `DENSITY_COMPETITION_300M` when competitor sites are supplied.
pub fn census_join(
    clients: &[ClientRecord],
    polygons: &[CensusPolygon],
    competitors: Option<&[CompetitorSite]>,
) -> Result<FeatureMatrix> {
    let mut polygons: Vec<CensusPolygon> = polygons.to_vec();
    polygons.sort_by(|a, b| a.polygon_id.cmp(&b.polygon_id));
    if polygons.is_empty() {
        log::warn!("census join: no polygons supplied, census features are absent");
    }
    let attributes: BTreeSet<&str> = polygons
        .iter()
        .flat_map(|p| p.attributes.keys().map(String::as_str))
        .collect();
    let mut names: Vec<String> = attributes.iter().map(|a| census_feature_name(a)).collect();
    let mut provenance: BTreeMap<String, FeatureDescriptor> = attributes
        .iter()
        .map(|a| {
            (
                census_feature_name(a),
                FeatureDescriptor {
                    family: FeatureFamily::Census,
                    window: None,
                    statistic: "value".into(),
                    grouping: "polygon".into(),
                    measure: Some(a.to_string()),
                },
            )
        })
        .collect();
    if competitors.is_some() {
        names.push(DENSITY_COMPETITION_300M.into());
        provenance.insert(
            DENSITY_COMPETITION_300M.into(),
            FeatureDescriptor {
                family: FeatureFamily::Competition,
                window: None,
                statistic: "count".into(),
                grouping: "radius_300m".into(),
                measure: None,
            },
        );
    }
    let mut clients: Vec<&ClientRecord> = clients.iter().collect();
    clients.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    let rows: Vec<Vec<f64>> = clients
        .par_iter()
        .map(|c| {
            let point = (c.latitude, c.longitude);
            let assigned = assign_polygon(point, &polygons).map(|i| &polygons[i]);
            let mut row: Vec<f64> = attributes
                .iter()
                .map(|a| {
                    assigned
                        .and_then(|p| p.attributes.get(*a).copied())
                        .unwrap_or(f64::NAN)
                })
                .collect();
            if let Some(sites) = competitors {
                row.push(competitors_within(point, sites, COMPETITION_RADIUS_M) as f64);
            }
            row
        })
        .collect();
    FeatureMatrix::new(
        clients.iter().map(|c| c.client_id.clone()).collect(),
        names,
        rows.concat(),
        provenance,
    )
}
