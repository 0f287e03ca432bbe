//! Cooler allocation policies and their return on investment.
//!
//! A policy picks `budget` clients. Its return counts the margin on volume
//! growth among picked clients plus the coolers it avoided placing in clients
//! the volume baseline would have picked but that did not grow.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::rank_by_score;
use crate::labeling::LabeledClient;

pub const DEFAULT_COOLER_COST: f64 = 974.0;

pub const ASSOCIATIONAL_DISCLAIMER: &str = "Growth is measured around the installation month \
and is associational: these figures do not show that a cooler caused the volume change.";

pub const MODEL_POLICY: &str = "model_score";
pub const BASELINE_POLICY: &str = "volume_baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicsConfig {
    pub cooler_cost: f64,
    /// Margin earned per hectoliter of volume growth. No default exists.
    pub margin_per_hl: f64,
    pub budget_coolers: usize,
}

impl EconomicsConfig {
    pub fn new(margin_per_hl: f64, budget_coolers: usize) -> Self {
        EconomicsConfig {
            cooler_cost: DEFAULT_COOLER_COST,
            margin_per_hl,
            budget_coolers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cooler_cost > 0.0 && self.cooler_cost.is_finite()) {
            return Err(Error::config("cooler_cost must be positive"));
        }
        if !(self.margin_per_hl > 0.0 && self.margin_per_hl.is_finite()) {
            return Err(Error::config("margin_per_hl must be positive"));
        }
        if self.budget_coolers < 1 {
            return Err(Error::config("budget_coolers must be at least 1"));
        }
        Ok(())
    }
}

/// Realized outcome for one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientOutcome {
    pub client_id: String,
    pub v_pre: f64,
    pub v_post: f64,
}

impl ClientOutcome {
    pub fn growth(&self) -> f64 {
        (self.v_post - self.v_pre) / self.v_pre
    }
}

impl From<&LabeledClient> for ClientOutcome {
    fn from(c: &LabeledClient) -> Self {
        ClientOutcome {
            client_id: c.client_id.clone(),
            v_pre: c.v_pre,
            v_post: c.v_post,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthSource {
    HoldoutLabels,
    GeneratorTruth,
}

/// Indices of the `budget` highest values, ties by ascending client id.
/// A budget above the population is clamped with a warning.
pub fn allocate(values: &[f64], client_ids: &[String], budget: usize) -> Result<Vec<usize>> {
    if values.len() != client_ids.len() {
        return Err(Error::input("values and client ids differ in length"));
    }
    if budget < 1 {
        return Err(Error::input("budget must be at least 1"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::input("allocation values contain NaN"));
    }
    let take = if budget > values.len() {
        log::warn!("budget {budget} exceeds population {}; clamping", values.len());
        values.len()
    } else {
        budget
    };
    let mut order = rank_by_score(values, client_ids);
    order.truncate(take);
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub policy_name: String,
    /// Picked clients, best first.
    pub selected_clients: Vec<String>,
    pub realized_growth_source: GrowthSource,
    pub tau: f64,
    pub budget: usize,
    pub incremental_margin: f64,
    pub cost_savings: f64,
    pub total_investment: f64,
    pub roi: f64,
    /// Picked clients whose realized growth reached `tau`.
    pub n_selected_growing: usize,
    /// Baseline picks this policy skipped that did not reach `tau`.
    pub avoided_failures: Vec<String>,
    pub disclaimer: String,
}

/// Scores a selection against realized outcomes. `baseline_selected` is the
/// volume baseline's pick at the same budget.
pub fn evaluate_plan(
    policy_name: &str,
    selected: &[String],
    baseline_selected: &[String],
    outcomes: &BTreeMap<String, ClientOutcome>,
    econ: &EconomicsConfig,
    tau: f64,
    source: GrowthSource,
) -> Result<AllocationPlan> {
    econ.validate()?;
    if selected.is_empty() {
        return Err(Error::input("empty selection"));
    }
    let lookup = |id: &String| {
        outcomes
            .get(id)
            .ok_or_else(|| Error::input(format!("no realized outcome for client {id}")))
    };
    // Sum in id order so equal sets give bit-identical totals.
    let picked: BTreeSet<&String> = selected.iter().collect();
    let mut growth_hl = 0.0;
    let mut n_growing = 0;
    for id in &picked {
        let o = lookup(id)?;
        growth_hl += (o.v_post - o.v_pre).max(0.0);
        if o.growth() >= tau {
            n_growing += 1;
        }
    }
    let baseline: BTreeSet<&String> = baseline_selected.iter().collect();
    let mut avoided = Vec::new();
    for id in baseline.difference(&picked) {
        if lookup(id)?.growth() < tau {
            avoided.push((*id).clone());
        }
    }
    let incremental_margin = econ.margin_per_hl * growth_hl;
    let cost_savings = econ.cooler_cost * avoided.len() as f64;
    let total_investment = econ.cooler_cost * selected.len() as f64;
    Ok(AllocationPlan {
        policy_name: policy_name.to_string(),
        selected_clients: selected.to_vec(),
        realized_growth_source: source,
        tau,
        budget: econ.budget_coolers,
        incremental_margin,
        cost_savings,
        total_investment,
        roi: (incremental_margin + cost_savings) / total_investment,
        n_selected_growing: n_growing,
        avoided_failures: avoided,
        disclaimer: ASSOCIATIONAL_DISCLAIMER.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationComparison {
    pub model: AllocationPlan,
    pub baseline: AllocationPlan,
    pub disclaimer: String,
}

/// Model-score policy against the pre-volume baseline on one population.
/// `scores[i]` belongs to `outcomes[i]`.
pub fn compare_policies(
    scores: &[f64],
    outcomes: &[ClientOutcome],
    econ: &EconomicsConfig,
    tau: f64,
    source: GrowthSource,
) -> Result<AllocationComparison> {
    if scores.len() != outcomes.len() {
        return Err(Error::input("scores and outcomes differ in length"));
    }
    let ids: Vec<String> = outcomes.iter().map(|o| o.client_id.clone()).collect();
    let volumes: Vec<f64> = outcomes.iter().map(|o| o.v_pre).collect();
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| ids[i].clone()).collect::<Vec<_>>();
    let model_sel = pick(allocate(scores, &ids, econ.budget_coolers)?);
    let base_sel = pick(allocate(&volumes, &ids, econ.budget_coolers)?);
    let by_id: BTreeMap<String, ClientOutcome> =
        outcomes.iter().map(|o| (o.client_id.clone(), o.clone())).collect();
    if by_id.len() != outcomes.len() {
        return Err(Error::input("duplicate client ids in outcomes"));
    }
    Ok(AllocationComparison {
        model: evaluate_plan(MODEL_POLICY, &model_sel, &base_sel, &by_id, econ, tau, source)?,
        baseline: evaluate_plan(BASELINE_POLICY, &base_sel, &base_sel, &by_id, econ, tau, source)?,
        disclaimer: ASSOCIATIONAL_DISCLAIMER.to_string(),
    })
}
