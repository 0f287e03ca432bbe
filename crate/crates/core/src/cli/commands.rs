use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::artifacts::{open, read_json, Run};
use super::{report, Cli, CliError, Command, RunConfig};
use crate::allocsim::{compare_policies, ClientOutcome, EconomicsConfig, GrowthSource};
use crate::error::Error;
use crate::eval::{metric_report, threshold_metrics, MetricReport, ThresholdMetrics};
use crate::explain::{mean_abs_importance, shap_values_rows, summary_export};
use crate::features::{apply_caps, build_features, CapSet, FeatureMatrix, FeatureMeta};
use crate::gbdt::TreeEnsemble;
use crate::ingest::{load_bundle, write_bundle, DatasetBundle, CLIENTS_FILE, COMPETITORS_FILE,
    POLYGONS_FILE, TRANSACTIONS_FILE};
use crate::labeling::{
    class_balance_table, label_clients, read_labels, write_labels, GrowthThresholds,
    LabeledClient,
};
use crate::pipeline::{run_on_matrix, SplitInfo};
use crate::syndata::{generate, GROUND_TRUTH_FILE};

pub const LABELS_FILE: &str = "labels.csv";
pub const CLASS_BALANCE_FILE: &str = "class_balance.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const FEATURE_META_FILE: &str = "feature_meta.json";
pub const MODEL_FILE: &str = "model.json";
pub const CAPS_FILE: &str = "caps.json";
pub const SPLIT_FILE: &str = "split.json";
pub const PIPELINE_RESULT_FILE: &str = "pipeline_result.json";
pub const ELIMINATION_FILE: &str = "elimination_history.csv";
pub const SHAP_SUMMARY_FILE: &str = "shap_summary.json";
pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const ALLOCATION_FILE: &str = "allocation_report.json";
pub const REPORT_FILE: &str = "report.md";

pub(super) fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let config = RunConfig::load(g.config.as_deref())?;
    let name = super::command_name(&cli.command);
    let uses_tau = !matches!(
        cli.command,
        Command::Generate { .. } | Command::Label | Command::Featurize | Command::Report
    );
    let mut run = Run::start(
        name,
        &g.input_dir,
        &g.out_dir(),
        g.config.as_deref(),
        g.seed,
        uses_tau.then_some(g.tau),
    )?;
    if let Some(path) = &g.config {
        run.record_external_input(path)?;
    }
    match &cli.command {
        Command::Generate { n_clients } => cmd_generate(&mut run, config, g.seed, *n_clients)?,
        Command::Label => cmd_label(&mut run, &config)?,
        Command::Featurize => cmd_featurize(&mut run, &config)?,
        Command::Train => cmd_train(&mut run, config, g.tau, g.seed)?,
        Command::Explain { top_k } => cmd_explain(&mut run, g.tau, *top_k)?,
        Command::Evaluate => cmd_evaluate(&mut run, &config, g.tau)?,
        Command::Simulate => cmd_simulate(&mut run, &config, g.tau, g.budget)?,
        Command::Report => report::render(&mut run)?,
    }
    let manifest = run.finish()?;
    log::info!("{} wrote {} artifacts", manifest.command, manifest.outputs.len());
    Ok(())
}

fn cmd_generate(
    run: &mut Run,
    mut config: RunConfig,
    seed: Option<u64>,
    n_clients: Option<usize>,
) -> Result<(), CliError> {
    if let Some(s) = seed {
        config.generator.seed = s;
    }
    if let Some(n) = n_clients {
        config.generator.n_clients = n;
    }
    let (bundle, truth) = generate(&config.generator)?;
    write_bundle(run.out_path(""), &bundle)?;
    for f in [TRANSACTIONS_FILE, CLIENTS_FILE, POLYGONS_FILE, COMPETITORS_FILE] {
        run.record_output(f)?;
    }
    run.write_json(GROUND_TRUTH_FILE, &truth)?;
    run.write_json("generator_config.json", &config.generator)?;
    Ok(())
}

fn load_bundle_inputs(run: &mut Run) -> Result<DatasetBundle, CliError> {
    let tx = run.input(TRANSACTIONS_FILE, "transactions")?;
    run.input(CLIENTS_FILE, "client registry")?;
    run.optional_input(POLYGONS_FILE, "census polygons")?;
    run.optional_input(COMPETITORS_FILE, "competitor sites")?;
    Ok(load_bundle(tx.parent().unwrap())?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassBalanceReport {
    pub rows: Vec<crate::labeling::ClassBalanceRow>,
    pub n_clients: usize,
    pub n_ineligible: usize,
}

fn cmd_label(run: &mut Run, config: &RunConfig) -> Result<(), CliError> {
    let bundle = load_bundle_inputs(run)?;
    let thresholds = GrowthThresholds::new(config.taus())?;
    let labeled = label_clients(&bundle, &thresholds);
    let n_ineligible = labeled.iter().filter(|c| !c.eligible).count();
    if n_ineligible > 0 {
        log::warn!("{n_ineligible} clients lack pre-period volume and are left unlabeled");
    }
    run.write_with(LABELS_FILE, |buf| write_labels(buf, &labeled, &thresholds))?;
    let report = ClassBalanceReport {
        rows: class_balance_table(&labeled, &thresholds)?,
        n_clients: labeled.len(),
        n_ineligible,
    };
    run.write_json(CLASS_BALANCE_FILE, &report)?;
    Ok(())
}

fn cmd_featurize(run: &mut Run, config: &RunConfig) -> Result<(), CliError> {
    let bundle = load_bundle_inputs(run)?;
    let matrix = build_features(&bundle, &config.windows)?;
    run.write_with(FEATURES_FILE, |buf| matrix.write_csv(buf))?;
    run.write_json(FEATURE_META_FILE, &FeatureMetaFile { features: matrix.meta() })?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatureMetaFile {
    features: Vec<FeatureMeta>,
}

fn load_features(run: &mut Run) -> Result<FeatureMatrix, CliError> {
    let path = run.input(FEATURES_FILE, "feature matrix")?;
    let meta_path = run.input(FEATURE_META_FILE, "feature metadata")?;
    let meta: FeatureMetaFile = read_json(&meta_path)?;
    Ok(FeatureMatrix::read_csv(
        std::io::BufReader::new(open(&path)?),
        Some(&meta.features),
    )?)
}

/// Eligible labeled clients and the index of `tau` among their labels.
fn load_labels(run: &mut Run, tau: f64) -> Result<(Vec<LabeledClient>, usize), CliError> {
    let path = run.input(LABELS_FILE, "labels")?;
    let (thresholds, labeled) = read_labels(std::io::BufReader::new(open(&path)?))?;
    let k = thresholds.index_of(tau).ok_or_else(|| {
        Error::config(format!(
            "tau {tau} is not among the labeled thresholds {:?}",
            thresholds.taus()
        ))
    })?;
    Ok((labeled.into_iter().filter(|c| c.eligible).collect(), k))
}

fn cmd_train(
    run: &mut Run,
    config: RunConfig,
    tau: f64,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let features = load_features(run)?;
    let (labeled, k) = load_labels(run, tau)?;
    let ids: Vec<String> = labeled.iter().map(|c| c.client_id.clone()).collect();
    let rows = features.rows_for_clients(&ids)?;
    let matrix = features.select_rows(&rows);
    let labels: Vec<u8> = labeled.iter().map(|c| c.labels[k]).collect();
    let mut pipeline = config.pipeline;
    if let Some(s) = seed {
        pipeline = pipeline.with_seed(s);
    }
    let result = run_on_matrix(&matrix, &labels, &pipeline)?;

    let model: serde_json::Value =
        serde_json::from_slice(&result.final_model.to_json()?).map_err(Error::from)?;
    run.write_json_value(MODEL_FILE, model)?;
    run.write_json(CAPS_FILE, &result.caps)?;
    run.write_json(SPLIT_FILE, &result.split)?;
    run.write_with(ELIMINATION_FILE, |buf| result.write_elimination_csv(buf))?;
    run.write_json(PIPELINE_RESULT_FILE, &result)?;
    Ok(())
}

/// Holdout clients with capped features, labels and realized outcomes.
struct Holdout {
    model: TreeEnsemble,
    matrix: FeatureMatrix,
    labels: Vec<u8>,
    outcomes: Vec<ClientOutcome>,
}

fn load_model(run: &mut Run) -> Result<TreeEnsemble, CliError> {
    let path = run.input(MODEL_FILE, "model")?;
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(TreeEnsemble::from_json(&bytes)?)
}

fn load_holdout(run: &mut Run, tau: f64) -> Result<Holdout, CliError> {
    let model = load_model(run)?;
    let split: SplitInfo = read_json(&run.input(SPLIT_FILE, "train/test split")?)?;
    let caps: CapSet = read_json(&run.input(CAPS_FILE, "fitted caps")?)?;
    let features = load_features(run)?;
    let (labeled, k) = load_labels(run, tau)?;
    let by_id: BTreeMap<&str, &LabeledClient> =
        labeled.iter().map(|c| (c.client_id.as_str(), c)).collect();
    let mut labels = Vec::new();
    let mut outcomes = Vec::new();
    for id in &split.test_clients {
        let c = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::input(format!("holdout client {id} has no eligible label")))?;
        labels.push(c.labels[k]);
        outcomes.push(ClientOutcome::from(*c));
    }
    let rows = features.rows_for_clients(&split.test_clients)?;
    let matrix = apply_caps(&features.select_rows(&rows), &caps);
    Ok(Holdout {
        model,
        matrix,
        labels,
        outcomes,
    })
}

fn cmd_explain(run: &mut Run, tau: f64, top_k: usize) -> Result<(), CliError> {
    let h = load_holdout(run, tau)?;
    let rows: Vec<usize> = (0..h.matrix.n_rows()).collect();
    let expl = shap_values_rows(&h.model, &h.matrix, &rows)?;
    let names = &h.model.feature_names;
    let ranking = mean_abs_importance(names, &expl)?;
    let summary = summary_export(names, &expl, &h.matrix, top_k)?;
    run.write_json(SHAP_SUMMARY_FILE, &summary)?;
    run.write_with(IMPORTANCE_FILE, |buf| ranking.write_csv(buf))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub tau: f64,
    pub n_holdout: usize,
    pub model_hash: String,
    pub holdout: MetricReport,
    pub at_half: ThresholdMetrics,
}

fn cmd_evaluate(run: &mut Run, config: &RunConfig, tau: f64) -> Result<(), CliError> {
    let h = load_holdout(run, tau)?;
    let scores = h.model.predict_proba(&h.matrix)?;
    let report = metric_report(&scores, &h.labels, h.matrix.client_ids(), &config.pipeline.ks)?;
    let artifact = MetricsArtifact {
        tau,
        n_holdout: h.labels.len(),
        model_hash: h.model.content_hash()?,
        holdout: report,
        at_half: threshold_metrics(&scores, &h.labels, 0.5)?,
    };
    run.write_json(METRICS_FILE, &artifact)?;
    Ok(())
}

fn cmd_simulate(
    run: &mut Run,
    config: &RunConfig,
    tau: f64,
    budget: Option<usize>,
) -> Result<(), CliError> {
    let margin = config.economics.margin_per_hl.ok_or_else(|| {
        Error::config("simulate needs economics.margin_per_hl in the --config file")
    })?;
    let econ = EconomicsConfig {
        cooler_cost: config.economics.cooler_cost,
        margin_per_hl: margin,
        budget_coolers: budget.unwrap_or(config.economics.budget_coolers),
    };
    econ.validate()?;
    let h = load_holdout(run, tau)?;
    let scores = h.model.predict_proba(&h.matrix)?;
    let cmp = compare_policies(&scores, &h.outcomes, &econ, tau, GrowthSource::HoldoutLabels)?;
    run.write_json(ALLOCATION_FILE, &cmp)?;
    Ok(())
}
