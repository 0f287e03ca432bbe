//! AUC with tied scores, thresholded precision/recall and precision@K.

use growth_target::eval::{auc, metric_report, precision_at_k};

fn main() -> growth_target::Result<()> {
    let scores = [0.9, 0.8, 0.8, 0.6, 0.4, 0.4, 0.2, 0.1];
    let labels = [1, 1, 0, 1, 0, 1, 0, 0];
    let ids: Vec<String> = ["h", "b", "a", "d", "f", "c", "e", "g"].iter().map(|s| s.to_string()).collect();
    println!("AUC (ties count 1/2): {:.4}", auc(&scores, &labels)?);
    for k in [1, 3, 5, 20] {
        // ties at the cut go to the smaller client id; K beyond n is clamped
        println!("precision@{k}: {:.3}", precision_at_k(&scores, &labels, &ids, k)?);
    }
    let report = metric_report(&scores, &labels, &ids, &[2, 4])?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}
