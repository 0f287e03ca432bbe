use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::StringRecord;

use super::{canonicalize_transactions, ClientRecord, CompetitorSite, Month, TransactionRecord};
use crate::error::{Error, Result};

pub const TRANSACTIONS_HEADER: [&str; 8] = [
    "client_id",
    "month",
    "product_line",
    "brand",
    "volume_hl",
    "revenue",
    "discount",
    "order_days",
];
pub const CLIENTS_HEADER: [&str; 4] = ["client_id", "install_month", "latitude", "longitude"];
pub const COMPETITORS_HEADER: [&str; 3] = ["site_id", "latitude", "longitude"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

struct Rows<'a> {
    context: &'a str,
}

impl Rows<'_> {
    fn err(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Parse {
            context: self.context.to_string(),
            line,
            message: message.into(),
        }
    }

    fn check_header(&self, headers: &StringRecord, expected: &[&str]) -> Result<()> {
        let got: Vec<&str> = headers.iter().map(str::trim).collect();
        if got != expected {
            return Err(self.err(
                1,
                format!("header {:?} does not match {:?}", got, expected),
            ));
        }
        Ok(())
    }

    fn text(&self, rec: &StringRecord, line: u64, idx: usize, name: &str) -> Result<String> {
        let v = rec.get(idx).map(str::trim).unwrap_or("");
        if v.is_empty() {
            return Err(self.err(line, format!("empty {name}")));
        }
        Ok(v.to_string())
    }

    fn real(&self, rec: &StringRecord, line: u64, idx: usize, name: &str) -> Result<f64> {
        let raw = rec.get(idx).map(str::trim).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| self.err(line, format!("non-numeric {name} {raw:?}")))?;
        if !v.is_finite() {
            return Err(self.err(line, format!("non-finite {name}")));
        }
        Ok(v)
    }

    fn non_negative(&self, rec: &StringRecord, line: u64, idx: usize, name: &str) -> Result<f64> {
        let v = self.real(rec, line, idx, name)?;
        if v < 0.0 {
            return Err(self.err(line, format!("negative {name} {v}")));
        }
        Ok(v)
    }

    fn month(&self, rec: &StringRecord, line: u64, idx: usize) -> Result<Month> {
        let raw = rec.get(idx).map(str::trim).unwrap_or("");
        raw.parse().map_err(|_| Error::InvalidMonth {
            line,
            value: raw.to_string(),
        })
    }
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(r)
}

/// Parses `transactions.csv` content. Duplicate keys are summed and the
/// result is in canonical order.
pub fn read_transactions<R: Read>(input: R, context: &str) -> Result<Vec<TransactionRecord>> {
    let rows = Rows { context };
    let mut rdr = reader(input);
    rows.check_header(rdr.headers()?, &TRANSACTIONS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let order_days_raw = rec.get(7).map(str::trim).unwrap_or("");
        let order_days: u32 = order_days_raw
            .parse()
            .map_err(|_| rows.err(line, format!("invalid order_days {order_days_raw:?}")))?;
        if order_days > 31 {
            return Err(rows.err(line, format!("order_days {order_days} exceeds 31")));
        }
        out.push(TransactionRecord {
            client_id: rows.text(&rec, line, 0, "client_id")?,
            month: rows.month(&rec, line, 1)?,
            product_line: rows.text(&rec, line, 2, "product_line")?,
            brand: rows.text(&rec, line, 3, "brand")?,
            volume_hl: rows.non_negative(&rec, line, 4, "volume_hl")?,
            revenue: rows.non_negative(&rec, line, 5, "revenue")?,
            discount: rows.non_negative(&rec, line, 6, "discount")?,
            order_days,
        });
    }
    let n_raw = out.len();
    let out = canonicalize_transactions(out);
    log::info!(
        "{context}: {n_raw} rows read, {} records after merging duplicates",
        out.len()
    );
    Ok(out)
}

pub fn load_transactions(path: impl AsRef<Path>) -> Result<Vec<TransactionRecord>> {
    let path = path.as_ref();
    read_transactions(open(path)?, &path.display().to_string())
}

pub fn write_transactions<W: Write>(out: W, rows: &[TransactionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRANSACTIONS_HEADER)?;
    for t in rows {
        w.write_record([
            t.client_id.clone(),
            t.month.to_string(),
            t.product_line.clone(),
            t.brand.clone(),
            t.volume_hl.to_string(),
            t.revenue.to_string(),
            t.discount.to_string(),
            t.order_days.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<transactions writer>", e))?;
    Ok(())
}

pub fn read_clients<R: Read>(input: R, context: &str) -> Result<Vec<ClientRecord>> {
    let rows = Rows { context };
    let mut rdr = reader(input);
    rows.check_header(rdr.headers()?, &CLIENTS_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let client_id = rows.text(&rec, line, 0, "client_id")?;
        let latitude = rows.real(&rec, line, 2, "latitude")?;
        let longitude = rows.real(&rec, line, 3, "longitude")?;
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(rows.err(line, format!("latitude {latitude} out of range")));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(rows.err(line, format!("longitude {longitude} out of range")));
        }
        if !seen.insert(client_id.clone()) {
            return Err(rows.err(line, format!("duplicate client_id {client_id}")));
        }
        out.push(ClientRecord {
            client_id,
            install_month: rows.month(&rec, line, 1)?,
            latitude,
            longitude,
        });
    }
    out.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    Ok(out)
}

pub fn load_clients(path: impl AsRef<Path>) -> Result<Vec<ClientRecord>> {
    let path = path.as_ref();
    read_clients(open(path)?, &path.display().to_string())
}

pub fn write_clients<W: Write>(out: W, rows: &[ClientRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CLIENTS_HEADER)?;
    for c in rows {
        w.write_record([
            c.client_id.clone(),
            c.install_month.to_string(),
            c.latitude.to_string(),
            c.longitude.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<clients writer>", e))?;
    Ok(())
}

pub fn read_competitors<R: Read>(input: R, context: &str) -> Result<Vec<CompetitorSite>> {
    let rows = Rows { context };
    let mut rdr = reader(input);
    rows.check_header(rdr.headers()?, &COMPETITORS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        out.push(CompetitorSite {
            site_id: rows.text(&rec, line, 0, "site_id")?,
            latitude: rows.real(&rec, line, 1, "latitude")?,
            longitude: rows.real(&rec, line, 2, "longitude")?,
        });
    }
    out.sort_by(|a, b| a.site_id.cmp(&b.site_id));
    Ok(out)
}

pub fn load_competitors(path: impl AsRef<Path>) -> Result<Vec<CompetitorSite>> {
    let path = path.as_ref();
    read_competitors(open(path)?, &path.display().to_string())
}

pub fn write_competitors<W: Write>(out: W, rows: &[CompetitorSite]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPETITORS_HEADER)?;
    for s in rows {
        w.write_record([
            s.site_id.clone(),
            s.latitude.to_string(),
            s.longitude.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<competitors writer>", e))?;
    Ok(())
}
