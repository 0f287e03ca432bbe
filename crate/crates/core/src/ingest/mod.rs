//! Canonical data model and file formats.
//!
//! Volumes are hectoliters everywhere; the `volume_hl` column name in
//! `transactions.csv` carries the unit.

mod geojson;
mod tables;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use self::geojson::{load_polygons, parse_polygons, polygons_to_geojson, write_polygons};
pub use self::tables::{
    load_clients, load_competitors, load_transactions, read_clients, read_competitors,
    read_transactions, write_clients, write_competitors, write_transactions, CLIENTS_HEADER,
    COMPETITORS_HEADER, TRANSACTIONS_HEADER,
};
pub use self::validate::{validate_bundle, MonthCoverage, ValidationReport};

use crate::error::{Error, Result};

/// A calendar month, stored as a month count since year 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month(i32);

impl Month {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        if !(1..=12).contains(&month) || !(0..=9999).contains(&year) {
            return None;
        }
        Some(Month(year * 12 + month as i32 - 1))
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    pub fn month(self) -> u32 {
        (self.0.rem_euclid(12) + 1) as u32
    }

    /// Shift by a signed number of months.
    pub fn offset(self, months: i32) -> Month {
        Month(self.0 + months)
    }

    /// Signed month difference `self - other`.
    pub fn since(self, other: Month) -> i32 {
        self.0 - other.0
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

impl FromStr for Month {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let b = s.as_bytes();
        let well_formed = b.len() == 7
            && b[4] == b'-'
            && b[..4].iter().all(u8::is_ascii_digit)
            && b[5..].iter().all(u8::is_ascii_digit);
        if !well_formed {
            return Err(format!("expected YYYY-MM, got {s:?}"));
        }
        let year: i32 = s[..4].parse().map_err(|_| format!("bad year in {s:?}"))?;
        let month: u32 = s[5..].parse().map_err(|_| format!("bad month in {s:?}"))?;
        Month::new(year, month).ok_or_else(|| format!("month out of range in {s:?}"))
    }
}

impl Serialize for Month {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One client-month-product sales line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub client_id: String,
    pub month: Month,
    pub product_line: String,
    pub brand: String,
    pub volume_hl: f64,
    pub revenue: f64,
    pub discount: f64,
    pub order_days: u32,
}

impl TransactionRecord {
    fn key(&self) -> (&str, Month, &str, &str) {
        (&self.client_id, self.month, &self.product_line, &self.brand)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRecord {
    pub client_id: String,
    pub install_month: Month,
    pub latitude: f64,
    pub longitude: f64,
}

/// A single-ring census polygon with numeric attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusPolygon {
    pub polygon_id: String,
    /// `(lat, lon)` vertices; closure is implied.
    pub ring: Vec<(f64, f64)>,
    pub attributes: BTreeMap<String, f64>,
}

impl CensusPolygon {
    pub fn new(
        polygon_id: impl Into<String>,
        ring: Vec<(f64, f64)>,
        attributes: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let polygon_id = polygon_id.into();
        if let Some(message) = crate::geometry::ring_defect(&ring) {
            return Err(Error::Geometry {
                polygon_id,
                message,
            });
        }
        Ok(CensusPolygon {
            polygon_id,
            ring,
            attributes,
        })
    }
}

/// A competitor point of sale used for proximity counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorSite {
    pub site_id: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetBundle {
    pub transactions: Vec<TransactionRecord>,
    pub clients: Vec<ClientRecord>,
    pub polygons: Vec<CensusPolygon>,
    pub competitors: Vec<CompetitorSite>,
}

impl DatasetBundle {
    /// Sorts every table by its key so two bundles built from permuted inputs
    /// compare equal.
    pub fn canonicalize(&mut self) {
        self.transactions = canonicalize_transactions(std::mem::take(&mut self.transactions));
        self.clients.sort_by(|a, b| a.client_id.cmp(&b.client_id));
        self.polygons.sort_by(|a, b| a.polygon_id.cmp(&b.polygon_id));
        self.competitors.sort_by(|a, b| a.site_id.cmp(&b.site_id));
    }

    /// Transactions grouped per client, in canonical order.
    pub fn transactions_by_client(&self) -> BTreeMap<&str, Vec<&TransactionRecord>> {
        let mut out: BTreeMap<&str, Vec<&TransactionRecord>> = BTreeMap::new();
        for t in &self.transactions {
            out.entry(t.client_id.as_str()).or_default().push(t);
        }
        out
    }
}

/// Sorts by `(client_id, month, product_line, brand)` and sums duplicates.
/// Summed `order_days` saturate at 31.
pub fn canonicalize_transactions(mut rows: Vec<TransactionRecord>) -> Vec<TransactionRecord> {
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
    let mut out: Vec<TransactionRecord> = Vec::with_capacity(rows.len());
    for row in rows {
        match out.last_mut() {
            Some(last) if last.key() == row.key() => {
                last.volume_hl += row.volume_hl;
                last.revenue += row.revenue;
                last.discount += row.discount;
                last.order_days = (last.order_days + row.order_days).min(31);
            }
            _ => out.push(row),
        }
    }
    out
}

pub const TRANSACTIONS_FILE: &str = "transactions.csv";
pub const CLIENTS_FILE: &str = "clients.csv";
pub const POLYGONS_FILE: &str = "polygons.geojson";
pub const COMPETITORS_FILE: &str = "competitors.csv";

/// Loads a bundle from a directory holding `transactions.csv` and
/// `clients.csv`, plus the optional `polygons.geojson` and `competitors.csv`.
pub fn load_bundle(dir: impl AsRef<std::path::Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    let polygons_path = dir.join(POLYGONS_FILE);
    let competitors_path = dir.join(COMPETITORS_FILE);
    let mut bundle = DatasetBundle {
        transactions: load_transactions(dir.join(TRANSACTIONS_FILE))?,
        clients: load_clients(dir.join(CLIENTS_FILE))?,
        polygons: if polygons_path.exists() {
            load_polygons(&polygons_path)?
        } else {
            Vec::new()
        },
        competitors: if competitors_path.exists() {
            load_competitors(&competitors_path)?
        } else {
            Vec::new()
        },
    };
    bundle.canonicalize();
    Ok(bundle)
}

/// Writes the bundle in the formats [`load_bundle`] reads.
pub fn write_bundle(dir: impl AsRef<std::path::Path>, bundle: &DatasetBundle) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::io(p, e))
    };
    write_transactions(create(TRANSACTIONS_FILE)?, &bundle.transactions)?;
    write_clients(create(CLIENTS_FILE)?, &bundle.clients)?;
    write_polygons(create(POLYGONS_FILE)?, &bundle.polygons)?;
    write_competitors(create(COMPETITORS_FILE)?, &bundle.competitors)?;
    Ok(())
}
