//! Pre/post installation volumes and multi-threshold growth labels.
//!
//! A client is positive at threshold `tau` when
//! `(v_post - v_pre) / v_pre >= tau`, where both volumes are 12-month sums
//! on either side of the installation month (which belongs to neither
//! window).

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ClientRecord, DatasetBundle, TransactionRecord};

/// Window length on each side of the installation month.
pub const WINDOW_MONTHS: i32 = 12;

/// Clients whose pre-window volume is below this many hectoliters are
/// ineligible: their growth ratio is undefined or explosive.
pub const MIN_PRE_VOLUME_HL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthThresholds {
    taus: Vec<f64>,
}

impl GrowthThresholds {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::config("at least one growth threshold is required"));
        }
        if taus.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::config("growth thresholds must be positive"));
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("growth thresholds must be strictly increasing"));
        }
        Ok(GrowthThresholds { taus })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn index_of(&self, tau: f64) -> Option<usize> {
        self.taus.iter().position(|t| (t - tau).abs() < 1e-9)
    }
}

impl Default for GrowthThresholds {
    fn default() -> Self {
        GrowthThresholds {
            taus: vec![0.10, 0.30, 0.50],
        }
    }
}

/// Column name used for a threshold, e.g. `label_30` for 0.30.
pub fn label_column(tau: f64) -> String {
    format!("label_{}", (tau * 100.0).round() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledClient {
    pub client_id: String,
    pub v_pre: f64,
    pub v_post: f64,
    /// Growth fraction; NaN when the client is ineligible.
    pub growth: f64,
    /// One 0/1 label per threshold, aligned with `GrowthThresholds::taus`.
    pub labels: Vec<u8>,
    pub eligible: bool,
}

/// Sums `volume_hl` over `[install-12, install-1]` and `[install+1, install+12]`.
/// The transactions may include other clients; they are ignored.
pub fn window_volumes<'a, I>(transactions: I, client: &ClientRecord) -> (f64, f64)
where
    I: IntoIterator<Item = &'a TransactionRecord>,
{
    let mut pre = 0.0;
    let mut post = 0.0;
    for t in transactions {
        if t.client_id != client.client_id {
            continue;
        }
        let offset = t.month.since(client.install_month);
        if (-WINDOW_MONTHS..=-1).contains(&offset) {
            pre += t.volume_hl;
        } else if (1..=WINDOW_MONTHS).contains(&offset) {
            post += t.volume_hl;
        }
    }
    (pre, post)
}

/// Applies the threshold rule to already computed window volumes.
pub fn label_volumes(
    client_id: &str,
    v_pre: f64,
    v_post: f64,
    thresholds: &GrowthThresholds,
) -> LabeledClient {
    if v_pre < MIN_PRE_VOLUME_HL {
        return LabeledClient {
            client_id: client_id.to_string(),
            v_pre,
            v_post,
            growth: f64::NAN,
            labels: vec![0; thresholds.taus.len()],
            eligible: false,
        };
    }
    let growth = (v_post - v_pre) / v_pre;
    LabeledClient {
        client_id: client_id.to_string(),
        v_pre,
        v_post,
        growth,
        labels: thresholds
            .taus
            .iter()
            .map(|&tau| u8::from(growth >= tau))
            .collect(),
        eligible: true,
    }
}

/// Labels every registered client, in client-id order. Ineligible clients are
/// kept in the output with `eligible = false`.
pub fn label_clients(bundle: &DatasetBundle, thresholds: &GrowthThresholds) -> Vec<LabeledClient> {
    let by_client = bundle.transactions_by_client();
    let mut clients: Vec<&ClientRecord> = bundle.clients.iter().collect();
    clients.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    let out: Vec<LabeledClient> = clients
        .into_iter()
        .map(|c| {
            let txs = by_client
                .get(c.client_id.as_str())
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            let (pre, post) = window_volumes(txs.iter().copied(), c);
            label_volumes(&c.client_id, pre, post, thresholds)
        })
        .collect();
    let ineligible = out.iter().filter(|c| !c.eligible).count();
    if ineligible > 0 {
        log::info!("{ineligible} clients ineligible (pre-window volume below {MIN_PRE_VOLUME_HL} hl)");
    }
    out
}

/// Shares of class 0 and class 1 among eligible clients at threshold index `k`.
pub fn class_balance(labeled: &[LabeledClient], k: usize) -> Result<(f64, f64)> {
    let eligible: Vec<&LabeledClient> = labeled.iter().filter(|c| c.eligible).collect();
    if eligible.is_empty() {
        return Err(Error::input("class balance needs at least one eligible client"));
    }
    let pos = eligible.iter().filter(|c| c.labels[k] == 1).count();
    let n = eligible.len() as f64;
    let share1 = pos as f64 / n;
    Ok((1.0 - share1, share1))
}

/// Writes `labels.csv`: `client_id,v_pre,v_post,growth,label_10,...,eligible`.
pub fn write_labels<W: Write>(
    out: W,
    labeled: &[LabeledClient],
    thresholds: &GrowthThresholds,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["client_id".to_string(), "v_pre".into(), "v_post".into(), "growth".into()];
    header.extend(thresholds.taus.iter().map(|&t| label_column(t)));
    header.push("eligible".into());
    w.write_record(&header)?;
    for c in labeled {
        let mut row = vec![
            c.client_id.clone(),
            c.v_pre.to_string(),
            c.v_post.to_string(),
            if c.eligible { c.growth.to_string() } else { String::new() },
        ];
        row.extend(c.labels.iter().map(u8::to_string));
        row.push(u8::from(c.eligible).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<labels writer>", e))?;
    Ok(())
}

/// Reads `labels.csv` back, recovering the thresholds from the header.
pub fn read_labels<R: std::io::Read>(input: R) -> Result<(GrowthThresholds, Vec<LabeledClient>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let n = headers.len();
    let fixed = ["client_id", "v_pre", "v_post", "growth"];
    if n < 6 || headers.iter().take(4).ne(fixed) || &headers[n - 1] != "eligible" {
        return Err(Error::input("labels.csv header does not match the documented layout"));
    }
    let mut taus = Vec::new();
    for h in headers.iter().take(n - 1).skip(4) {
        let pct: f64 = h
            .strip_prefix("label_")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::input(format!("bad label column {h:?}")))?;
        taus.push(pct / 100.0);
    }
    let thresholds = GrowthThresholds::new(taus)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Parse {
                context: "labels.csv".into(),
                line,
                message: format!("bad number {:?}", &rec[i]),
            })
        };
        let eligible = &rec[n - 1] == "1";
        let labels = (4..n - 1)
            .map(|i| u8::from(&rec[i] == "1"))
            .collect::<Vec<_>>();
        out.push(LabeledClient {
            client_id: rec[0].to_string(),
            v_pre: num(1)?,
            v_post: num(2)?,
            growth: if eligible { num(3)? } else { f64::NAN },
            labels,
            eligible,
        });
    }
    Ok((thresholds, out))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassBalanceRow {
    pub tau: f64,
    pub share0: f64,
    pub share1: f64,
    pub n_eligible: usize,
}

pub fn class_balance_table(
    labeled: &[LabeledClient],
    thresholds: &GrowthThresholds,
) -> Result<Vec<ClassBalanceRow>> {
    let n_eligible = labeled.iter().filter(|c| c.eligible).count();
    thresholds
        .taus()
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let (share0, share1) = class_balance(labeled, k)?;
            Ok(ClassBalanceRow {
                tau,
                share0,
                share1,
                n_eligible,
            })
        })
        .collect()
}

/// Label lookup keyed by client id, for joining with feature rows.
pub fn labels_by_client(labeled: &[LabeledClient]) -> BTreeMap<&str, &LabeledClient> {
    labeled.iter().map(|c| (c.client_id.as_str(), c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Month;

    fn client(install: &str) -> ClientRecord {
        ClientRecord {
            client_id: "C".into(),
            install_month: install.parse().unwrap(),
            latitude: 0.0,
            longitude: 0.0,
        }
    }

    fn tx(month: Month, v: f64) -> TransactionRecord {
        TransactionRecord {
            client_id: "C".into(),
            month,
            product_line: "BEER".into(),
            brand: "B".into(),
            volume_hl: v,
            revenue: 0.0,
            discount: 0.0,
            order_days: 1,
        }
    }

    #[test]
    fn constant_series_gives_twelve_each_side() {
        let c = client("2023-06");
        let txs: Vec<_> = (-12..=12).map(|o| tx(c.install_month.offset(o), 1.0)).collect();
        assert_eq!(window_volumes(&txs, &c), (12.0, 12.0));
    }

    #[test]
    fn installation_month_is_excluded() {
        let c = client("2023-06");
        let txs = vec![tx(c.install_month, 50.0), tx(c.install_month.offset(13), 5.0)];
        assert_eq!(window_volumes(&txs, &c), (0.0, 0.0));
    }

    #[test]
    fn threshold_arithmetic() {
        let th = GrowthThresholds::default();
        let l = label_volumes("a", 10.0, 14.0, &th);
        assert!((l.growth - 0.4).abs() < 1e-12);
        assert_eq!(l.labels, vec![1, 1, 0]);
        assert_eq!(label_volumes("a", 10.0, 10.0, &th).labels, vec![0, 0, 0]);
        // inclusive at the boundary
        let l = label_volumes("a", 10.0, 13.0, &th);
        assert_eq!(l.growth, 0.3);
        assert_eq!(l.labels, vec![1, 1, 0]);
    }

    #[test]
    fn tiny_pre_volume_is_ineligible() {
        let l = label_volumes("a", 0.0, 5.0, &GrowthThresholds::default());
        assert!(!l.eligible);
        assert!(l.growth.is_nan());
    }

    #[test]
    fn symmetric_balance() {
        let th = GrowthThresholds::new(vec![0.3]).unwrap();
        let l = vec![
            label_volumes("a", 10.0, 20.0, &th),
            label_volumes("b", 10.0, 20.0, &th),
            label_volumes("c", 10.0, 9.0, &th),
            label_volumes("d", 10.0, 9.0, &th),
        ];
        assert_eq!(class_balance(&l, 0).unwrap(), (0.5, 0.5));
        assert!(class_balance(&[label_volumes("x", 0.0, 0.0, &th)], 0).is_err());
    }

    #[test]
    fn threshold_validation() {
        assert!(GrowthThresholds::new(vec![0.3, 0.1]).is_err());
        assert!(GrowthThresholds::new(vec![0.0]).is_err());
        assert!(GrowthThresholds::new(vec![]).is_err());
    }

    #[test]
    fn labels_csv_round_trip() {
        let th = GrowthThresholds::default();
        let l = vec![
            label_volumes("a", 10.0, 14.0, &th),
            label_volumes("b", 0.0, 3.0, &th),
        ];
        let mut buf = Vec::new();
        write_labels(&mut buf, &l, &th).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("client_id,v_pre,v_post,growth,label_10,label_30,label_50,eligible\n"));
        let (th2, back) = read_labels(buf.as_slice()).unwrap();
        assert_eq!(th2, th);
        assert_eq!(back[0], l[0]);
        assert!(!back[1].eligible);
    }
}
