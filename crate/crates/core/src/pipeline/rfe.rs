use serde::{Deserialize, Serialize};

use super::cv::CvContext;
use crate::error::{Error, Result};
use crate::gbdt::GbdtConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfeSettings {
    /// Share of the current features removed per round (at least one).
    pub drop_fraction: f64,
    /// Minimum AUC gain over the best so far that counts as improvement.
    pub epsilon: f64,
    /// Consecutive non-improving rounds tolerated before stopping.
    pub patience: usize,
}

impl Default for RfeSettings {
    fn default() -> Self {
        RfeSettings {
            drop_fraction: 0.10,
            epsilon: 1e-4,
            patience: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationRound {
    pub outer_round: usize,
    pub round: usize,
    pub n_features: usize,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// Features removed after this round was scored; empty for the last.
    pub removed: Vec<String>,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    pub rounds: Vec<EliminationRound>,
    pub best_round: usize,
    pub best_features: Vec<String>,
    pub best_auc: f64,
}

/// Iterative elimination of the lowest mean-|SHAP| features.
///
/// Each round scores the current set by CV, then drops
/// `max(1, floor(drop_fraction * |F|))` of the least important features. The
/// loop stops after `patience` rounds whose AUC fails to beat the best so far
/// (initially 0) by `epsilon`, or when fewer than two features remain. The
/// result is the first round with the highest mean AUC.
pub fn shap_rfe(
    ctx: &CvContext,
    config: &GbdtConfig,
    features: &[String],
    settings: &RfeSettings,
    outer_round: usize,
) -> Result<RfeResult> {
    if features.len() < 2 {
        return Err(Error::input("elimination needs at least two features"));
    }
    if !(settings.drop_fraction > 0.0 && settings.drop_fraction < 1.0) {
        return Err(Error::config("drop_fraction must lie in (0, 1)"));
    }
    let mut current = features.to_vec();
    let mut rounds: Vec<EliminationRound> = Vec::new();
    let mut reference = 0.0;
    let mut stale = 0;
    loop {
        let (report, ranking) = ctx.evaluate_with_shap(config, &current, "shap_rfe")?;
        log::info!(
            "elimination round {}: {} features, mean CV AUC {:.4}",
            rounds.len(),
            current.len(),
            report.mean_auc
        );
        rounds.push(EliminationRound {
            outer_round,
            round: rounds.len(),
            n_features: current.len(),
            mean_auc: report.mean_auc,
            std_auc: report.std_auc,
            removed: Vec::new(),
            features: current.clone(),
        });
        if report.mean_auc >= reference + settings.epsilon {
            stale = 0;
        } else {
            stale += 1;
        }
        reference = f64::max(reference, report.mean_auc);
        if stale >= settings.patience || current.len() < 2 {
            break;
        }
        let n_drop = ((settings.drop_fraction * current.len() as f64).floor() as usize)
            .max(1)
            .min(current.len() - 1);
        let ranked = ranking.features();
        let removed: Vec<String> = ranked[ranked.len() - n_drop..].to_vec();
        current.retain(|f| !removed.contains(f));
        rounds.last_mut().unwrap().removed = removed;
    }
    let mut best = 0;
    for (i, r) in rounds.iter().enumerate() {
        if r.mean_auc > rounds[best].mean_auc {
            best = i;
        }
    }
    Ok(RfeResult {
        best_round: best,
        best_features: rounds[best].features.clone(),
        best_auc: rounds[best].mean_auc,
        rounds,
    })
}
