//! Quantile binning of training columns.
//!
//! Cut points are order statistics of the training values (never
//! interpolated), so a strictly increasing transform of a column maps its cuts
//! onto the transformed cuts and leaves every bin assignment unchanged.

/// Bin id reserved for missing cells.
pub const MISSING_BIN: u16 = u16::MAX;

#[derive(Debug, Clone)]
pub struct BinnedColumn {
    /// Ascending cut values. Bin `b` holds `cuts[b-1] < x <= cuts[b]`; the
    /// last bin holds values above every cut.
    pub cuts: Vec<f64>,
    pub bins: Vec<u16>,
}

impl BinnedColumn {
    /// Number of non-missing bins.
    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }
}

pub fn compute_cuts(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let max = *sorted.last().unwrap();
    let mut unique = sorted.clone();
    unique.dedup();
    let mut cuts: Vec<f64> = if unique.len() <= max_bins {
        unique
    } else {
        let n = sorted.len();
        (1..max_bins).map(|k| sorted[(k * n / max_bins).min(n - 1)]).collect()
    };
    cuts.dedup();
    // a cut at the maximum would leave the right side empty
    cuts.retain(|&c| c < max);
    cuts
}

pub fn bin_value(cuts: &[f64], x: f64) -> u16 {
    if x.is_nan() {
        MISSING_BIN
    } else {
        cuts.partition_point(|&c| c < x) as u16
    }
}

pub fn bin_column(values: &[f64], max_bins: usize) -> BinnedColumn {
    let cuts = compute_cuts(values, max_bins);
    let bins = values.iter().map(|&x| bin_value(&cuts, x)).collect();
    BinnedColumn { cuts, bins }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn few_unique_values_get_exact_cuts() {
        let c = bin_column(&[3.0, 1.0, 2.0, 2.0, f64::NAN], 64);
        assert_eq!(c.cuts, vec![1.0, 2.0]);
        assert_eq!(c.bins, vec![2, 0, 1, 1, MISSING_BIN]);
    }

    #[test]
    fn bin_order_matches_threshold_rule() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 1000) as f64 / 7.0).collect();
        let c = bin_column(&xs, 16);
        assert!(c.cuts.len() <= 15);
        for (&x, &b) in xs.iter().zip(&c.bins) {
            for (k, &cut) in c.cuts.iter().enumerate() {
                assert_eq!(x <= cut, (b as usize) <= k);
            }
        }
    }

    #[test]
    fn monotone_transform_preserves_bins() {
        let xs: Vec<f64> = (0..500).map(|i| ((i * 7919) % 500) as f64 / 50.0 - 3.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        assert_eq!(bin_column(&xs, 32).bins, bin_column(&ys, 32).bins);
    }

    #[test]
    fn all_missing_has_no_cuts() {
        let c = bin_column(&[f64::NAN, f64::NAN], 8);
        assert!(c.cuts.is_empty());
        assert_eq!(c.n_bins(), 1);
    }
}
