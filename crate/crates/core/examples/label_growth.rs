//! Pre/post installation volumes and multi-threshold growth labels.

use growth_target::ingest::{ClientRecord, DatasetBundle, Month, TransactionRecord};
use growth_target::labeling::{class_balance_table, label_clients, write_labels, GrowthThresholds};

fn tx(client: &str, month: Month, volume: f64) -> TransactionRecord {
    TransactionRecord {
        client_id: client.into(),
        month,
        product_line: "BEER".into(),
        brand: "B1".into(),
        volume_hl: volume,
        revenue: 100.0 * volume,
        discount: 0.0,
        order_days: 4,
    }
}

fn main() -> growth_target::Result<()> {
    let install = Month::new(2023, 6).unwrap();
    let mut transactions = Vec::new();
    // "flat" buys 1 hl every month; "grower" doubles after the install month.
    for offset in -12..=12 {
        let m = install.offset(offset);
        transactions.push(tx("flat", m, 1.0));
        transactions.push(tx("grower", m, if offset > 0 { 2.0 } else { 1.0 }));
    }
    let client = |id: &str| ClientRecord {
        client_id: id.into(),
        install_month: install,
        latitude: 4.6,
        longitude: -74.1,
    };
    let bundle = DatasetBundle {
        transactions,
        clients: vec![client("flat"), client("grower")],
        ..Default::default()
    };
    let thresholds = GrowthThresholds::new(vec![0.10, 0.30, 0.50])?;
    let labeled = label_clients(&bundle, &thresholds);
    write_labels(std::io::stdout(), &labeled, &thresholds)?;
    for row in class_balance_table(&labeled, &thresholds)? {
        println!("tau {:.2}: {:.0}% growing", row.tau, 100.0 * row.share1);
    }
    Ok(())
}
