use std::collections::BTreeSet;

use refactor_effort::pipeline::{mine, snapshot_from_dir, MineConfig};
use refactor_effort::synthetic::{build_large_corpus, build_small_corpus};

#[test]
fn small_corpus_is_recovered_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = build_small_corpus(dir.path()).unwrap();
    assert_eq!(corpus.planted.len(), 20);
    assert_eq!(corpus.commit_ids.len(), 1 + 16 + 30);
    assert_eq!(corpus.refactoring_commits, 16);

    let out = mine(&corpus.path, &MineConfig::default()).unwrap();
    let found: BTreeSet<_> = out
        .ops
        .iter()
        .map(|o| (o.commit_id.clone(), o.kind, o.before_fqn.clone(), o.after_fqn.clone()))
        .collect();
    let planted: BTreeSet<_> = corpus
        .planted
        .iter()
        .map(|p| (p.commit_id.clone(), p.kind, p.before_fqn.clone(), p.after_fqn.clone()))
        .collect();
    assert_eq!(found, planted);
    assert_eq!(out.diagnostics.imputed_rows, 0);
    assert_eq!(out.dataset.len(), 20);
    assert!(out.dataset.rows.iter().all(|r| r.target_hours > 0.0));
    for t in &out.targets {
        assert!(t.rtt_hours <= t.tct_hours + 1e-12);
    }

    let snapshot = snapshot_from_dir(&corpus.path).unwrap();
    let by_package = |pkg: &str| -> Vec<String> {
        let mut v: Vec<String> = snapshot
            .classes()
            .iter()
            .filter(|c| c.package == pkg)
            .map(|c| c.simple_name().to_string())
            .collect();
        v.sort();
        v
    };
    assert_eq!(by_package("shop.core"), ["Cart", "Checkout", "CheckoutAudit", "Stock", "TaxRules"]);
    assert_eq!(by_package("shop.util"), ["Clock", "Money", "Text"]);
    assert_eq!(
        by_package("shop.api"),
        ["Catalog", "CatalogSearch", "Gateway", "OrderHistory", "OrderService", "ReportFilters", "Shipping", "ShippingQuote"]
    );
    assert_eq!(
        by_package("shop.model"),
        ["Client", "Discount", "Invoice", "InvoiceLines", "PaymentTerms", "PostalAddress", "Product"]
    );
    assert_eq!(by_package("shop.report"), ["Forecast", "Formatter", "Ledger", "LedgerEntries", "SalesReport"]);
}

#[test]
fn large_corpus_yields_enough_samples() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = build_large_corpus(dir.path(), 320, 7).unwrap();
    assert!(corpus.commit_ids.len() >= 300);
    let out = mine(&corpus.path, &MineConfig::default()).unwrap();
    let found: BTreeSet<_> = out
        .ops
        .iter()
        .map(|o| (o.commit_id.clone(), o.kind, o.before_fqn.clone(), o.after_fqn.clone()))
        .collect();
    let planted: BTreeSet<_> = corpus
        .planted
        .iter()
        .map(|p| (p.commit_id.clone(), p.kind, p.before_fqn.clone(), p.after_fqn.clone()))
        .collect();
    let hits = found.intersection(&planted).count();
    eprintln!("planted {} found {} hits {} samples {}", planted.len(), found.len(), hits, out.dataset.len());
    assert!(out.dataset.len() >= 30);
    assert_eq!(hits, planted.len());
    assert_eq!(found.len(), planted.len());
}
