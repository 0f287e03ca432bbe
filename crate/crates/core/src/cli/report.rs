//! Markdown report assembled from whichever artifacts are present.

use std::fmt::Write as _;
use std::path::Path;

use super::artifacts::{open, read_json, Run};
use super::commands::{
    ClassBalanceReport, MetricsArtifact, ALLOCATION_FILE, CLASS_BALANCE_FILE, IMPORTANCE_FILE,
    METRICS_FILE, REPORT_FILE,
};
use super::CliError;
use crate::allocsim::{AllocationComparison, AllocationPlan};
use crate::error::Error;

/// Section headings in render order.
pub const REPORT_SECTIONS: [&str; 4] = [
    "Class balance",
    "Holdout metrics",
    "Top SHAP importances",
    "Allocation comparison",
];

const TOP_FEATURES: usize = 20;

pub(super) fn render(run: &mut Run) -> Result<(), CliError> {
    let mut md = String::from("# Growth-target report\n");
    let mut gaps = Vec::new();

    let mut section = |md: &mut String, title: &str, file: &str, body: Option<String>| {
        let _ = write!(md, "\n## {title}\n\n");
        match body {
            Some(b) => md.push_str(&b),
            None => {
                let _ = writeln!(md, "> **GAP:** `{file}` not found; section skipped.");
                gaps.push(file.to_string());
            }
        }
    };

    let body = run
        .optional_input(CLASS_BALANCE_FILE, "class balance")?
        .map(|p| class_balance_md(&p))
        .transpose()?;
    section(&mut md, REPORT_SECTIONS[0], CLASS_BALANCE_FILE, body);

    let body = run
        .optional_input(METRICS_FILE, "metrics")?
        .map(|p| metrics_md(&p))
        .transpose()?;
    section(&mut md, REPORT_SECTIONS[1], METRICS_FILE, body);

    let body = run
        .optional_input(IMPORTANCE_FILE, "importances")?
        .map(|p| importance_md(&p))
        .transpose()?;
    section(&mut md, REPORT_SECTIONS[2], IMPORTANCE_FILE, body);

    let body = run
        .optional_input(ALLOCATION_FILE, "allocation report")?
        .map(|p| allocation_md(&p))
        .transpose()?;
    section(&mut md, REPORT_SECTIONS[3], ALLOCATION_FILE, body);

    if !gaps.is_empty() {
        log::warn!("report is missing {}", gaps.join(", "));
        let _ = write!(md, "\n## Gaps\n\n");
        for g in &gaps {
            let _ = writeln!(md, "- `{g}`");
        }
    }
    let _ = write!(md, "\n---\nproduced_by: {}\n", run.produced_by());
    run.write_bytes(REPORT_FILE, md.as_bytes())
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn class_balance_md(path: &Path) -> Result<String, CliError> {
    let r: ClassBalanceReport = read_json(path)?;
    let mut s = String::from("| tau | class 0 | class 1 | eligible clients |\n|---|---|---|---|\n");
    for row in &r.rows {
        let _ = writeln!(
            s,
            "| {:.2} | {} | {} | {} |",
            row.tau,
            pct(row.share0),
            pct(row.share1),
            row.n_eligible
        );
    }
    let _ = writeln!(
        s,
        "\n{} clients in the registry, {} without pre-period volume (not labeled).",
        r.n_clients, r.n_ineligible
    );
    Ok(s)
}

fn metrics_md(path: &Path) -> Result<String, CliError> {
    let m: MetricsArtifact = read_json(path)?;
    let h = &m.holdout;
    let mut s = format!(
        "Threshold tau = {:.2}, {} holdout clients ({} positive, {} negative).\n\n",
        m.tau, m.n_holdout, h.n_pos, h.n_neg
    );
    s.push_str("| metric | value |\n|---|---|\n");
    let _ = writeln!(s, "| AUC | {:.4} |", h.auc);
    let _ = writeln!(s, "| precision @ 0.5 | {} |", opt(h.precision_at_half));
    let _ = writeln!(s, "| recall @ 0.5 | {} |", opt(h.recall_at_half));
    let _ = writeln!(s, "| F1 @ 0.5 | {:.4} |", h.f1);
    for (k, p) in &h.precision_at_k {
        let _ = writeln!(s, "| precision @ top {k} | {p:.4} |");
    }
    let _ = writeln!(s, "\nModel hash `{}`.", m.model_hash);
    Ok(s)
}

fn importance_md(path: &Path) -> Result<String, CliError> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut s = String::from("| rank | feature | mean abs SHAP |\n|---|---|---|\n");
    for (i, rec) in rdr.records().take(TOP_FEATURES).enumerate() {
        let rec = rec.map_err(Error::from)?;
        let _ = writeln!(s, "| {} | {} | {} |", i + 1, &rec[0], &rec[1]);
    }
    Ok(s)
}

fn plan_row(p: &AllocationPlan) -> String {
    format!(
        "| {} | {} | {} | {:.2} | {:.2} | {:.2} | {:.4} |",
        p.policy_name,
        p.selected_clients.len(),
        p.n_selected_growing,
        p.incremental_margin,
        p.cost_savings,
        p.total_investment,
        p.roi
    )
}

fn allocation_md(path: &Path) -> Result<String, CliError> {
    let c: AllocationComparison = read_json(path)?;
    let mut s = format!(
        "Budget {} coolers, tau = {:.2}.\n\n",
        c.model.budget, c.model.tau
    );
    s.push_str(
        "| policy | selected | reached tau | incremental margin | cost savings | investment | ROI |\n\
         |---|---|---|---|---|---|---|\n",
    );
    let _ = writeln!(s, "{}", plan_row(&c.model));
    let _ = writeln!(s, "{}", plan_row(&c.baseline));
    let _ = writeln!(s, "\n_{}_", c.disclaimer);
    Ok(s)
}
