//! Synthetic data with a known growth mechanism.
//!
//! The transactional generator writes the same tables ingest reads. Each
//! client's post-installation growth is `h(L)` with latent
//! `L = s + Logistic(0, 1)`, where `s` is a weighted sum of standardized
//! analogs of engineered features (months with purchases, peak beer volume,
//! nearby competitors, census income and education). The increasing map `h`
//! sends `-alpha_k` to `tau_k`, so the true probability of reaching
//! threshold `tau_k` is exactly `sigmoid(alpha_k + s)`, and `alpha_k` is
//! calibrated so the population mean hits the target positive rate.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::auc;
use crate::features::{
    assign_polygon, census_feature_name, competitors_within, FeatureMatrix, COMPETITION_RADIUS_M,
    DENSITY_COMPETITION_300M, MONTHS_WITH_TRANSACTION,
};
use crate::ingest::{
    CensusPolygon, ClientRecord, CompetitorSite, DatasetBundle, Month, TransactionRecord,
};
use crate::labeling::{GrowthThresholds, WINDOW_MONTHS};
use crate::stats::{mean, population_std, sigmoid};

pub const BEER_VOLUME_MAX_L12M: &str = "PL_BEER_VOLUME_MAX_L12M";
pub const CENSUS_INCOME: &str = "CENSUS_INCOME";
pub const CENSUS_EDUCATION: &str = "CENSUS_EDUCATION";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Features the generator knows how to plant.
pub const PLANTABLE: [&str; 5] = [
    MONTHS_WITH_TRANSACTION,
    BEER_VOLUME_MAX_L12M,
    DENSITY_COMPETITION_300M,
    CENSUS_INCOME,
    CENSUS_EDUCATION,
];

const PRODUCT_LINES: [&str; 6] = ["BEER", "SODA", "WATER", "JUICE", "SPIRITS", "SNACKS"];
const LAT_RANGE: (f64, f64) = (4.55, 4.75);
const LON_RANGE: (f64, f64) = (-74.15, -73.95);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFeature {
    pub feature: String,
    /// Log-odds change per standard deviation of the feature.
    pub effect: f64,
}

impl SignalFeature {
    pub fn new(feature: &str, effect: f64) -> Self {
        SignalFeature {
            feature: feature.to_string(),
            effect,
        }
    }
}

/// Effects used unless configured otherwise.
pub fn default_signal() -> Vec<SignalFeature> {
    vec![
        SignalFeature::new(MONTHS_WITH_TRANSACTION, 0.6),
        SignalFeature::new(BEER_VOLUME_MAX_L12M, 0.4),
        SignalFeature::new(DENSITY_COMPETITION_300M, -0.4),
        SignalFeature::new(CENSUS_INCOME, 0.5),
        SignalFeature::new(CENSUS_EDUCATION, 0.3),
    ]
}

/// Effects on census and competition analogs only, which the generator
/// draws independently of purchase volume.
pub fn volume_independent_signal() -> Vec<SignalFeature> {
    vec![
        SignalFeature::new(DENSITY_COMPETITION_300M, -0.6),
        SignalFeature::new(CENSUS_INCOME, 0.9),
        SignalFeature::new(CENSUS_EDUCATION, 0.7),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_clients: usize,
    pub n_product_lines: usize,
    pub n_brands: usize,
    /// Months of history from `start_month`; at least 26.
    pub months_span: usize,
    pub start_month: Month,
    pub seed: u64,
    pub signal_spec: Vec<SignalFeature>,
    /// Extra pure-noise census attributes (`NOISE_1`, ...).
    pub noise_feature_count: usize,
    pub taus: Vec<f64>,
    /// Target share of growing clients, aligned with `taus`.
    pub target_positive_rate: Vec<f64>,
    /// Census polygons per side of the square grid.
    pub census_grid: usize,
    pub n_competitors: usize,
    /// Chance each polygon attribute is left out.
    pub census_missing_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_clients: 3119,
            n_product_lines: 3,
            n_brands: 6,
            months_span: 39,
            start_month: Month::new(2022, 1).unwrap(),
            seed: 0,
            signal_spec: default_signal(),
            noise_feature_count: 2,
            taus: vec![0.10, 0.30, 0.50],
            target_positive_rate: vec![0.46, 0.4184, 0.3795],
            census_grid: 8,
            n_competitors: 3119,
            census_missing_rate: 0.05,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let min_span = 2 * WINDOW_MONTHS as usize + 2;
        if self.months_span < min_span {
            return Err(Error::config(format!("months_span must be at least {min_span}")));
        }
        if self.n_clients < 1 || self.n_product_lines < 1 || self.census_grid < 1 {
            return Err(Error::config("client, product line and grid counts must be positive"));
        }
        if self.n_brands < self.n_product_lines {
            return Err(Error::config("need at least one brand per product line"));
        }
        GrowthThresholds::new(self.taus.clone())?;
        if self.taus.len() != self.target_positive_rate.len() {
            return Err(Error::config("one target rate is needed per threshold"));
        }
        for (k, &r) in self.target_positive_rate.iter().enumerate() {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Infeasible(format!("target rate {r} is outside (0, 1)")));
            }
            if k > 0 && r >= self.target_positive_rate[k - 1] {
                return Err(Error::Infeasible(
                    "target rates must strictly decrease as the threshold rises".into(),
                ));
            }
        }
        for s in &self.signal_spec {
            if !PLANTABLE.contains(&s.feature.as_str()) {
                return Err(Error::config(format!("cannot plant signal on {:?}", s.feature)));
            }
            if !s.effect.is_finite() {
                return Err(Error::config("signal effects must be finite"));
            }
        }
        if !(0.0..1.0).contains(&self.census_missing_rate) {
            return Err(Error::config("census_missing_rate must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientTruth {
    pub client_id: String,
    /// Planted linear predictor `s`.
    pub signal: f64,
    pub latent: f64,
    pub growth: f64,
    /// True probability of growth at or above each threshold.
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStandardization {
    pub feature: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub taus: Vec<f64>,
    pub alphas: Vec<f64>,
    pub signal_spec: Vec<SignalFeature>,
    pub standardization: Vec<FeatureStandardization>,
    pub clients: Vec<ClientTruth>,
}

impl GroundTruth {
    /// Engineered features that carry signal.
    pub fn informative_features(&self) -> Vec<String> {
        self.signal_spec
            .iter()
            .filter(|s| s.effect != 0.0)
            .map(|s| s.feature.clone())
            .collect()
    }

    /// True probabilities at threshold index `k`, keyed by client.
    pub fn probabilities(&self, k: usize) -> BTreeMap<String, f64> {
        self.clients
            .iter()
            .map(|c| (c.client_id.clone(), c.probabilities[k]))
            .collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<GroundTruth> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// AUC of the true probabilities against realized labels: the ceiling any
/// scorer can reach in expectation on the same clients.
pub fn bayes_auc(probabilities: &[f64], labels: &[u8]) -> Result<f64> {
    auc(probabilities, labels)
}

/// Finds `alpha` with `mean(sigmoid(alpha + s)) = rate`.
pub fn calibrate_intercept(signal: &[f64], rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate < 1.0) || signal.is_empty() {
        return Err(Error::Infeasible(format!("cannot calibrate to rate {rate}")));
    }
    let avg = |a: f64| signal.iter().map(|&s| sigmoid(a + s)).sum::<f64>() / signal.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    if avg(lo) > rate || avg(hi) < rate {
        return Err(Error::Infeasible(format!("rate {rate} unreachable")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if avg(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Increasing map from latent to growth with `h(knots[k]) = taus[k]`.
fn growth_map(latent: f64, knots: &[f64], taus: &[f64]) -> f64 {
    let n = knots.len();
    if latent <= knots[0] {
        // approaches -1 (total loss) in the far lower tail
        return -1.0 + (1.0 + taus[0]) * (latent - knots[0]).exp();
    }
    for k in 1..n {
        if latent <= knots[k] {
            let t = (latent - knots[k - 1]) / (knots[k] - knots[k - 1]);
            return taus[k - 1] + t * (taus[k] - taus[k - 1]);
        }
    }
    let slope = if n >= 2 {
        (taus[n - 1] - taus[n - 2]) / (knots[n - 1] - knots[n - 2])
    } else {
        0.5
    };
    taus[n - 1] + slope * (latent - knots[n - 1])
}

struct Profile {
    activity: f64,
    base: f64,
    lines: Vec<(usize, f64, Vec<usize>)>,
}

/// Generates a bundle and its ground truth.
pub fn generate(config: &GeneratorConfig) -> Result<(DatasetBundle, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal: Normal<f64> = Normal::new(0.0, 1.0).unwrap();
    let uniform_in = |rng: &mut ChaCha8Rng, r: (f64, f64)| rng.random_range(r.0..r.1);

    // census grid
    let g = config.census_grid;
    let dlat = (LAT_RANGE.1 - LAT_RANGE.0) / g as f64;
    let dlon = (LON_RANGE.1 - LON_RANGE.0) / g as f64;
    let income = LogNormal::new(1500f64.ln(), 0.5).unwrap();
    let mut polygons = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let lat0 = LAT_RANGE.0 + i as f64 * dlat;
            let lon0 = LON_RANGE.0 + j as f64 * dlon;
            let ring = vec![
                (lat0, lon0),
                (lat0, lon0 + dlon),
                (lat0 + dlat, lon0 + dlon),
                (lat0 + dlat, lon0),
            ];
            let mut attrs = BTreeMap::new();
            let mut values = vec![
                ("INCOME".to_string(), income.sample(&mut rng)),
                ("EDUCATION".to_string(), (11.0 + 2.5 * std_normal.sample(&mut rng)).clamp(0.0, 20.0)),
                ("POPULATION_DENSITY".to_string(), (8.0 + 0.6 * std_normal.sample(&mut rng)).exp()),
            ];
            for k in 1..=config.noise_feature_count {
                values.push((format!("NOISE_{k}"), std_normal.sample(&mut rng)));
            }
            for (name, v) in values {
                if rng.random::<f64>() >= config.census_missing_rate {
                    attrs.insert(name, v);
                }
            }
            polygons.push(CensusPolygon::new(format!("P{i:02}{j:02}"), ring, attrs)?);
        }
    }

    let competitors: Vec<CompetitorSite> = (0..config.n_competitors)
        .map(|i| CompetitorSite {
            site_id: format!("S{:05}", i + 1),
            latitude: uniform_in(&mut rng, LAT_RANGE),
            longitude: uniform_in(&mut rng, LON_RANGE),
        })
        .collect();

    let lines: Vec<String> = (0..config.n_product_lines)
        .map(|i| {
            PRODUCT_LINES
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("LINE{}", i + 1))
        })
        .collect();
    let brands_of_line: Vec<Vec<usize>> = (0..config.n_product_lines)
        .map(|l| (0..config.n_brands).filter(|b| b % config.n_product_lines == l).collect())
        .collect();
    let prices: Vec<f64> = (0..config.n_product_lines)
        .map(|_| rng.random_range(80.0..200.0))
        .collect();

    let span = config.months_span as i32;
    let base_dist: LogNormal<f64> = LogNormal::new(0.5, 0.8).unwrap();
    let noise = LogNormal::new(0.0, 0.3).unwrap();
    let mut clients = Vec::with_capacity(config.n_clients);
    let mut rows_by_client: Vec<Vec<TransactionRecord>> = Vec::with_capacity(config.n_clients);
    for i in 0..config.n_clients {
        let client = ClientRecord {
            client_id: format!("C{:05}", i + 1),
            install_month: config
                .start_month
                .offset(rng.random_range(WINDOW_MONTHS..span - WINDOW_MONTHS)),
            latitude: uniform_in(&mut rng, (LAT_RANGE.0 + 1e-4, LAT_RANGE.1 - 1e-4)),
            longitude: uniform_in(&mut rng, (LON_RANGE.0 + 1e-4, LON_RANGE.1 - 1e-4)),
        };
        let mut carried = Vec::new();
        for (l, brands) in brands_of_line.iter().enumerate() {
            if l == 0 || rng.random::<f64>() < 0.6 {
                let mut own = brands.clone();
                own.shuffle(&mut rng);
                own.truncate(rng.random_range(1..=own.len().min(2)));
                own.sort_unstable();
                carried.push((l, rng.random_range(0.2..1.0), own));
            }
        }
        let profile = Profile {
            activity: rng.random_range(0.3..1.0),
            base: base_dist.sample(&mut rng).max(0.2),
            lines: carried,
        };
        let install = client.install_month.since(config.start_month);
        let mut rows = Vec::new();
        let mut pre_active = false;
        let mut post_active = false;
        for m in 0..span {
            let offset = m - install;
            let active = rng.random::<f64>() < profile.activity;
            let forced = (offset == -1 && !pre_active) || (offset == WINDOW_MONTHS && !post_active);
            if !(active || forced) {
                continue;
            }
            if (-WINDOW_MONTHS..0).contains(&offset) {
                pre_active = true;
            }
            if (1..=WINDOW_MONTHS).contains(&offset) {
                post_active = true;
            }
            let month = config.start_month.offset(m);
            let season = 1.0 + 0.15 * (2.0 * std::f64::consts::PI * month.month() as f64 / 12.0).sin();
            for (l, share, own) in &profile.lines {
                let brand = own[rng.random_range(0..own.len())];
                let volume = profile.base * share * season * noise.sample(&mut rng);
                let gross = volume * prices[*l];
                let disc_rate = rng.random_range(0.0..0.1);
                rows.push(TransactionRecord {
                    client_id: client.client_id.clone(),
                    month,
                    product_line: lines[*l].clone(),
                    brand: format!("BRAND{:02}", brand + 1),
                    volume_hl: volume,
                    revenue: gross * (1.0 - disc_rate),
                    discount: gross * disc_rate,
                    order_days: rng.random_range(1..=8),
                });
            }
        }
        clients.push(client);
        rows_by_client.push(rows);
    }

    // engineered-feature analogs from the generated pre-period
    let mut analogs: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (client, rows) in clients.iter().zip(&rows_by_client) {
        let mut months = [false; WINDOW_MONTHS as usize];
        let mut beer = [0.0; WINDOW_MONTHS as usize];
        for t in rows {
            let offset = t.month.since(client.install_month);
            if (-WINDOW_MONTHS..0).contains(&offset) {
                let idx = (offset + WINDOW_MONTHS) as usize;
                months[idx] = true;
                if t.product_line == lines[0] {
                    beer[idx] += t.volume_hl;
                }
            }
        }
        let point = (client.latitude, client.longitude);
        let attrs = assign_polygon(point, &polygons).map(|p| &polygons[p].attributes);
        let attr = |name: &str| attrs.and_then(|a| a.get(name)).copied().unwrap_or(f64::NAN);
        let values = [
            (MONTHS_WITH_TRANSACTION, months.iter().filter(|&&b| b).count() as f64),
            (BEER_VOLUME_MAX_L12M, beer.iter().copied().fold(0.0, f64::max)),
            (
                DENSITY_COMPETITION_300M,
                competitors_within(point, &competitors, COMPETITION_RADIUS_M) as f64,
            ),
            (CENSUS_INCOME, attr("INCOME")),
            (CENSUS_EDUCATION, attr("EDUCATION")),
        ];
        for (name, v) in values {
            analogs.entry(name).or_default().push(v);
        }
    }
    debug_assert_eq!(census_feature_name("INCOME"), CENSUS_INCOME);

    let n = clients.len();
    let mut signal = vec![0.0; n];
    let mut standardization = Vec::new();
    for spec in &config.signal_spec {
        let values = &analogs[spec.feature.as_str()];
        let present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        let mu = mean(&present).unwrap_or(0.0);
        let sd = population_std(&present).unwrap_or(0.0);
        standardization.push(FeatureStandardization {
            feature: spec.feature.clone(),
            mean: mu,
            std: sd,
        });
        if sd == 0.0 {
            continue;
        }
        for (s, &v) in signal.iter_mut().zip(values) {
            // a missing value sits at the mean
            if !v.is_nan() {
                *s += spec.effect * (v - mu) / sd;
            }
        }
    }

    let alphas = config
        .target_positive_rate
        .iter()
        .map(|&r| calibrate_intercept(&signal, r))
        .collect::<Result<Vec<_>>>()?;
    let knots: Vec<f64> = alphas.iter().map(|a| -a).collect();
    if knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Infeasible("calibrated intercepts are not strictly ordered".into()));
    }

    let mut truth = Vec::with_capacity(n);
    let mut transactions = Vec::new();
    for ((client, mut rows), &s) in clients.iter().zip(rows_by_client).zip(&signal) {
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        let latent = s + (u / (1.0 - u)).ln();
        let growth = growth_map(latent, &knots, &config.taus);
        let offset = |t: &TransactionRecord| t.month.since(client.install_month);
        let pre: f64 = rows
            .iter()
            .filter(|t| (-WINDOW_MONTHS..0).contains(&offset(t)))
            .map(|t| t.volume_hl)
            .sum();
        let raw_post: f64 = rows
            .iter()
            .filter(|t| (1..=WINDOW_MONTHS).contains(&offset(t)))
            .map(|t| t.volume_hl)
            .sum();
        let factor = pre * (1.0 + growth) / raw_post;
        for t in rows.iter_mut() {
            let o = offset(t);
            let f = if (1..=WINDOW_MONTHS).contains(&o) {
                factor
            } else if o > WINDOW_MONTHS {
                1.0 + growth
            } else {
                continue;
            };
            t.volume_hl *= f;
            t.revenue *= f;
            t.discount *= f;
        }
        truth.push(ClientTruth {
            client_id: client.client_id.clone(),
            signal: s,
            latent,
            growth,
            probabilities: alphas.iter().map(|a| sigmoid(a + s)).collect(),
        });
        transactions.extend(rows);
    }

    let mut bundle = DatasetBundle {
        transactions,
        clients,
        polygons,
        competitors,
    };
    bundle.canonicalize();
    Ok((
        bundle,
        GroundTruth {
            taus: config.taus.clone(),
            alphas,
            signal_spec: config.signal_spec.clone(),
            standardization,
            clients: truth,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedMatrixConfig {
    pub n_rows: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    /// Effects fall linearly from `max_effect` to `min_effect`.
    pub max_effect: f64,
    pub min_effect: f64,
    pub prevalence: f64,
    pub seed: u64,
}

impl Default for PlantedMatrixConfig {
    fn default() -> Self {
        PlantedMatrixConfig {
            n_rows: 3000,
            n_informative: 10,
            n_noise: 90,
            max_effect: 0.8,
            min_effect: 0.4,
            prevalence: 0.4,
            seed: 0,
        }
    }
}

/// A feature matrix whose labels follow a known logistic model.
#[derive(Debug, Clone)]
pub struct PlantedMatrix {
    pub matrix: FeatureMatrix,
    pub labels: Vec<u8>,
    pub probabilities: Vec<f64>,
    pub informative: Vec<String>,
    pub effects: BTreeMap<String, f64>,
}

/// Standard normal features, `n_informative` of which (`INF_*`) drive a
/// logistic label; the rest (`NOISE_*`) are independent. Columns appear in a
/// seeded random order.
pub fn planted_matrix(config: &PlantedMatrixConfig) -> Result<PlantedMatrix> {
    let m = config.n_informative + config.n_noise;
    if config.n_rows < 2 || m == 0 {
        return Err(Error::config("planted matrix needs rows and columns"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut names: Vec<String> = (1..=config.n_informative)
        .map(|i| format!("INF_{i:02}"))
        .chain((1..=config.n_noise).map(|i| format!("NOISE_{i:03}")))
        .collect();
    let effects: BTreeMap<String, f64> = (0..config.n_informative)
        .map(|i| {
            let t = if config.n_informative > 1 {
                i as f64 / (config.n_informative - 1) as f64
            } else {
                0.0
            };
            (names[i].clone(), config.max_effect + t * (config.min_effect - config.max_effect))
        })
        .collect();
    names.shuffle(&mut rng);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let values: Vec<f64> = (0..config.n_rows * m).map(|_| normal.sample(&mut rng)).collect();
    let eta: Vec<f64> = (0..config.n_rows)
        .map(|r| {
            names
                .iter()
                .enumerate()
                .map(|(c, name)| effects.get(name).map_or(0.0, |b| b * values[r * m + c]))
                .sum()
        })
        .collect();
    let b0 = calibrate_intercept(&eta, config.prevalence)?;
    let probabilities: Vec<f64> = eta.iter().map(|e| sigmoid(b0 + e)).collect();
    let labels: Vec<u8> = probabilities
        .iter()
        .map(|&p| u8::from(rng.random::<f64>() < p))
        .collect();
    let matrix = FeatureMatrix::from_rows(
        (1..=config.n_rows).map(|i| format!("R{i:05}")).collect(),
        names,
        values,
    )?;
    Ok(PlantedMatrix {
        matrix,
        labels,
        probabilities,
        informative: effects.keys().cloned().collect(),
        effects,
    })
}
