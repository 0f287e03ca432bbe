//! Trailing-window statistics over the months before installation.
//!
//! Every window ends at `install - 1`. Inside a window the monthly series has
//! an explicit zero for months without purchases, but a group (the whole
//! client, one product line, or one brand) with no transaction anywhere in
//! the window yields missing values rather than zeros.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{FeatureDescriptor, FeatureFamily, FeatureMatrix};
use crate::error::Result;
use crate::ingest::{ClientRecord, TransactionRecord};
use crate::stats;

/// Longest supported trailing window.
pub const MAX_WINDOW: usize = 12;

pub const MONTHS_WITH_TRANSACTION: &str = "MONTHS_WITH_TRANSACTION";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Global,
    ProductLine,
    Brand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub windows: Vec<u32>,
    pub groupings: Vec<Grouping>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            windows: vec![3, 6, 12],
            groupings: vec![Grouping::Global, Grouping::ProductLine, Grouping::Brand],
        }
    }
}

impl WindowConfig {
    fn checked_windows(&self) -> Vec<usize> {
        self.windows
            .iter()
            .map(|&w| (w as usize).clamp(1, MAX_WINDOW))
            .collect()
    }
}

/// Column prefix for a group value.
pub fn group_prefix(grouping: Grouping, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    match grouping {
        Grouping::Global => "ALL".to_string(),
        Grouping::ProductLine => format!("PL_{clean}"),
        Grouping::Brand => format!("BR_{clean}"),
    }
}

pub const MEASURES: [&str; 3] = ["VOLUME", "REVENUE", "DISCOUNT"];
pub const STATS: [&str; 5] = ["SUM", "MEAN", "MAX", "MIN", "STD"];

pub fn rolling_name(prefix: &str, measure: &str, stat: &str, window: usize) -> String {
    format!("{prefix}_{measure}_{stat}_L{window}M")
}

/// Per-group monthly aggregates over the 12 months before installation.
/// Index 0 is `install - 12`, index 11 is `install - 1`.
#[derive(Debug, Clone, Default)]
struct MonthlyGrid {
    present: [bool; MAX_WINDOW],
    volume: [f64; MAX_WINDOW],
    revenue: [f64; MAX_WINDOW],
    discount: [f64; MAX_WINDOW],
    /// Purchase days per month. Distinct-day counts from different product
    /// rows cannot be unioned, so a group's month takes the maximum.
    order_days: [f64; MAX_WINDOW],
}

impl MonthlyGrid {
    fn add(&mut self, idx: usize, t: &TransactionRecord) {
        self.present[idx] = true;
        self.volume[idx] += t.volume_hl;
        self.revenue[idx] += t.revenue;
        self.discount[idx] += t.discount;
        self.order_days[idx] = self.order_days[idx].max(f64::from(t.order_days));
    }

    fn measure(&self, m: usize) -> &[f64; MAX_WINDOW] {
        match m {
            0 => &self.volume,
            1 => &self.revenue,
            _ => &self.discount,
        }
    }
}

/// The groups a client can be aggregated over, in column order.
#[derive(Debug, Clone)]
struct GroupUniverse {
    keys: Vec<(Grouping, String)>,
}

impl GroupUniverse {
    fn new(transactions: &[TransactionRecord], groupings: &[Grouping]) -> Self {
        let lines: BTreeSet<&str> = transactions.iter().map(|t| t.product_line.as_str()).collect();
        let brands: BTreeSet<&str> = transactions.iter().map(|t| t.brand.as_str()).collect();
        let mut keys = Vec::new();
        for g in [Grouping::Global, Grouping::ProductLine, Grouping::Brand] {
            if !groupings.contains(&g) {
                continue;
            }
            match g {
                Grouping::Global => keys.push((g, String::new())),
                Grouping::ProductLine => keys.extend(lines.iter().map(|l| (g, l.to_string()))),
                Grouping::Brand => keys.extend(brands.iter().map(|b| (g, b.to_string()))),
            }
        }
        GroupUniverse { keys }
    }

    fn grids(&self, client: &ClientRecord, txs: &[&TransactionRecord]) -> Vec<MonthlyGrid> {
        let mut grids = vec![MonthlyGrid::default(); self.keys.len()];
        for t in txs {
            let offset = t.month.since(client.install_month);
            if !(-(MAX_WINDOW as i32)..=-1).contains(&offset) {
                continue;
            }
            let idx = (offset + MAX_WINDOW as i32) as usize;
            for (k, (g, value)) in self.keys.iter().enumerate() {
                let hit = match g {
                    Grouping::Global => true,
                    Grouping::ProductLine => &t.product_line == value,
                    Grouping::Brand => &t.brand == value,
                };
                if hit {
                    grids[k].add(idx, t);
                }
            }
        }
        grids
    }
}

fn group_transactions(
    transactions: &[TransactionRecord],
) -> BTreeMap<&str, Vec<&TransactionRecord>> {
    let mut out: BTreeMap<&str, Vec<&TransactionRecord>> = BTreeMap::new();
    for t in transactions {
        out.entry(t.client_id.as_str()).or_default().push(t);
    }
    out
}

fn series_stats(series: &[f64]) -> [f64; 5] {
    let sum: f64 = series.iter().sum();
    let mean = sum / series.len() as f64;
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let std = stats::population_std(series).unwrap_or(0.0);
    [sum, mean, max, min, std]
}

fn sorted_clients(clients: &[ClientRecord]) -> Vec<&ClientRecord> {
    let mut v: Vec<&ClientRecord> = clients.iter().collect();
    v.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    v
}

/// Sum/mean/max/min/std of volume, revenue and discount per window and group.
pub fn rolling_stats(
    transactions: &[TransactionRecord],
    clients: &[ClientRecord],
    config: &WindowConfig,
) -> Result<FeatureMatrix> {
    let universe = GroupUniverse::new(transactions, &config.groupings);
    let windows = config.checked_windows();
    let mut names = Vec::new();
    let mut provenance = BTreeMap::new();
    for (g, value) in &universe.keys {
        let prefix = group_prefix(*g, value);
        for &w in &windows {
            for measure in MEASURES {
                for stat in STATS {
                    let name = rolling_name(&prefix, measure, stat, w);
                    provenance.insert(
                        name.clone(),
                        FeatureDescriptor {
                            family: FeatureFamily::Rolling,
                            window: Some(w as u32),
                            statistic: stat.to_lowercase(),
                            grouping: prefix.clone(),
                            measure: Some(measure.to_lowercase()),
                        },
                    );
                    names.push(name);
                }
            }
        }
    }
    let by_client = group_transactions(transactions);
    let clients = sorted_clients(clients);
    let rows: Vec<Vec<f64>> = clients
        .par_iter()
        .map(|c| {
            let txs = by_client.get(c.client_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            let grids = universe.grids(c, txs);
            let mut row = Vec::with_capacity(names.len());
            for grid in &grids {
                for &w in &windows {
                    let span = MAX_WINDOW - w..MAX_WINDOW;
                    let active = grid.present[span.clone()].iter().any(|&p| p);
                    for m in 0..MEASURES.len() {
                        if active {
                            row.extend(series_stats(&grid.measure(m)[span.clone()]));
                        } else {
                            row.extend([f64::NAN; 5]);
                        }
                    }
                }
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

pub const RFM_STATS: [&str; 5] = [
    "FREQUENCY_MEAN",
    "FREQUENCY_STD",
    "RECENCY_AVG",
    "RECENCY_MAX",
    "RECENCY_LAST",
];

/// Gaps in months between consecutive purchase months inside the window.
pub fn month_gaps(present: &[bool]) -> Vec<usize> {
    let idx: Vec<usize> = present
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| p.then_some(i))
        .collect();
    idx.windows(2).map(|w| w[1] - w[0]).collect()
}

fn rfm_values(grid: &MonthlyGrid, w: usize) -> [f64; 5] {
    let span = MAX_WINDOW - w..MAX_WINDOW;
    let present = &grid.present[span.clone()];
    if !present.iter().any(|&p| p) {
        return [f64::NAN; 5];
    }
    let days = &grid.order_days[span];
    let freq_mean = stats::mean(days).unwrap_or(f64::NAN);
    let freq_std = stats::population_std(days).unwrap_or(f64::NAN);
    let gaps = month_gaps(present);
    let (avg_gap, max_gap) = if gaps.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let g: Vec<f64> = gaps.iter().map(|&g| g as f64).collect();
        (
            stats::mean(&g).unwrap_or(f64::NAN),
            g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let last = present.iter().rposition(|&p| p).unwrap_or(0);
    let months_since_last = (w - last) as f64;
    [freq_mean, freq_std, avg_gap, max_gap, months_since_last]
}

/// Frequency (purchase days per month) and recency (month gaps between
/// purchases, months since the last purchase) per window and group, plus
/// the count of months with any purchase in the last 12 months.
///
/// Recency is measured in months: the data are monthly aggregates, so gaps
/// between purchase days are only visible at month resolution.
pub fn rfm_stats(
    transactions: &[TransactionRecord],
    clients: &[ClientRecord],
    config: &WindowConfig,
) -> Result<FeatureMatrix> {
    let universe = GroupUniverse::new(transactions, &config.groupings);
    let windows = config.checked_windows();
    let mut names = vec![MONTHS_WITH_TRANSACTION.to_string()];
    let mut provenance = BTreeMap::new();
    provenance.insert(
        MONTHS_WITH_TRANSACTION.to_string(),
        FeatureDescriptor {
            family: FeatureFamily::Activity,
            window: Some(MAX_WINDOW as u32),
            statistic: "count".into(),
            grouping: "ALL".into(),
            measure: None,
        },
    );
    for (g, value) in &universe.keys {
        let prefix = group_prefix(*g, value);
        for &w in &windows {
            for stat in RFM_STATS {
                let name = format!("{prefix}_{stat}_L{w}M");
                let (family, statistic) = stat.split_once('_').unwrap();
                provenance.insert(
                    name.clone(),
                    FeatureDescriptor {
                        family: if family == "FREQUENCY" {
                            FeatureFamily::Frequency
                        } else {
                            FeatureFamily::Recency
                        },
                        window: Some(w as u32),
                        statistic: statistic.to_lowercase(),
                        grouping: prefix.clone(),
                        measure: None,
                    },
                );
                names.push(name);
            }
        }
    }
    let by_client = group_transactions(transactions);
    let clients = sorted_clients(clients);
    let all_groups = GroupUniverse::new(transactions, &[Grouping::Global]);
    let rows: Vec<Vec<f64>> = clients
        .par_iter()
        .map(|c| {
            let txs = by_client.get(c.client_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            let global = &all_groups.grids(c, txs)[0];
            let mut row = Vec::with_capacity(names.len());
            row.push(global.present.iter().filter(|&&p| p).count() as f64);
            for grid in universe.grids(c, txs) {
                for &w in &windows {
                    row.extend(rfm_values(&grid, w));
                }
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
