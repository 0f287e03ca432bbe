//! Point-in-polygon census enrichment with nearest-polygon fallback and
//! competitor density within 300 m.

use std::collections::BTreeMap;

use growth_target::features::census_join;
use growth_target::ingest::{CensusPolygon, ClientRecord, CompetitorSite, Month};

fn main() -> growth_target::Result<()> {
    let square = |id: &str, lat: f64, lon: f64, income: f64| {
        CensusPolygon::new(
            id,
            vec![(lat, lon), (lat + 0.01, lon), (lat + 0.01, lon + 0.01), (lat, lon + 0.01)],
            BTreeMap::from([("INCOME".to_string(), income)]),
        )
    };
    let polygons = vec![square("north", 4.61, -74.08, 3.2)?, square("south", 4.59, -74.08, 1.4)?];
    let client = |id: &str, lat: f64, lon: f64| ClientRecord {
        client_id: id.into(),
        install_month: Month::new(2023, 1).unwrap(),
        latitude: lat,
        longitude: lon,
    };
    let clients = vec![
        client("inside_north", 4.615, -74.075),
        client("between", 4.605, -74.075),
        client("far_south", 4.55, -74.075),
    ];
    let competitors = vec![
        CompetitorSite { site_id: "k1".into(), latitude: 4.6152, longitude: -74.0752 },
        CompetitorSite { site_id: "k2".into(), latitude: 4.6400, longitude: -74.0750 },
    ];
    let m = census_join(&clients, &polygons, Some(&competitors))?;
    for r in 0..m.n_rows() {
        let cells: Vec<String> = m
            .feature_names()
            .iter()
            .enumerate()
            .map(|(c, n)| format!("{n}={:?}", m.get(r, c)))
            .collect();
        println!("{}: {}", m.client_ids()[r], cells.join(", "));
    }
    Ok(())
}
