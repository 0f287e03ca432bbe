use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DatasetBundle, Month};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthCoverage {
    pub first: Month,
    pub last: Month,
    pub distinct_months: usize,
}

/// Consistency report over a bundle. Never fails; callers decide what to do
/// with the findings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Client ids that appear in transactions but not in the registry.
    pub orphans: Vec<String>,
    pub zero_transaction_clients: Vec<String>,
    pub coverage: BTreeMap<String, MonthCoverage>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.orphans.is_empty() && self.zero_transaction_clients.is_empty()
    }
}

pub fn validate_bundle(bundle: &DatasetBundle) -> ValidationReport {
    let registry: BTreeSet<&str> = bundle.clients.iter().map(|c| c.client_id.as_str()).collect();
    let mut months: BTreeMap<&str, BTreeSet<Month>> = BTreeMap::new();
    for t in &bundle.transactions {
        months.entry(t.client_id.as_str()).or_default().insert(t.month);
    }
    let orphans = months
        .keys()
        .filter(|id| !registry.contains(*id))
        .map(|s| s.to_string())
        .collect();
    let zero_transaction_clients = registry
        .iter()
        .filter(|id| !months.contains_key(*id))
        .map(|s| s.to_string())
        .collect();
    let coverage = months
        .iter()
        .filter(|(id, _)| registry.contains(*id))
        .map(|(id, set)| {
            (
                id.to_string(),
                MonthCoverage {
                    first: *set.iter().next().unwrap(),
                    last: *set.iter().next_back().unwrap(),
                    distinct_months: set.len(),
                },
            )
        })
        .collect();
    ValidationReport {
        orphans,
        zero_transaction_clients,
        coverage,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ClientRecord, TransactionRecord};

    fn client(id: &str) -> ClientRecord {
        ClientRecord {
            client_id: id.into(),
            install_month: "2023-01".parse().unwrap(),
            latitude: 0.0,
            longitude: 0.0,
        }
    }

    fn tx(id: &str, month: &str) -> TransactionRecord {
        TransactionRecord {
            client_id: id.into(),
            month: month.parse().unwrap(),
            product_line: "BEER".into(),
            brand: "B1".into(),
            volume_hl: 1.0,
            revenue: 1.0,
            discount: 0.0,
            order_days: 1,
        }
    }

    #[test]
    fn consistent_bundle_is_clean() {
        let b = DatasetBundle {
            transactions: vec![tx("A", "2022-05"), tx("A", "2022-09")],
            clients: vec![client("A")],
            ..Default::default()
        };
        let r = validate_bundle(&b);
        assert!(r.is_clean());
        assert_eq!(r.coverage["A"].distinct_months, 2);
        assert_eq!(r.coverage["A"].first.to_string(), "2022-05");
    }

    #[test]
    fn orphan_and_idle_clients_reported() {
        let b = DatasetBundle {
            transactions: vec![tx("A", "2022-05"), tx("Z", "2022-05")],
            clients: vec![client("A"), client("B")],
            ..Default::default()
        };
        let r = validate_bundle(&b);
        assert_eq!(r.orphans, vec!["Z".to_string()]);
        assert_eq!(r.zero_transaction_clients, vec!["B".to_string()]);
    }
}
