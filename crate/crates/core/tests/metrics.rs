mod common;

use common::oracles;
use fdsc::metrics::{self, ContingencyTable, MetricsReport};
use proptest::prelude::*;

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

fn pair() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..40, 1usize..6, 1usize..6).prop_flat_map(|(n, kp, kt)| (labels(n, kp), labels(n, kt)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn agrees_with_direct_formulas((p, t) in pair()) {
        let r = MetricsReport::compute(&p, &t).unwrap();
        prop_assert!((r.ari / 100.0 - oracles::ari(&p, &t)).abs() <= 1e-12);
        prop_assert!((r.nmi / 100.0 - oracles::nmi(&p, &t)).abs() <= 1e-12);
    }

    #[test]
    fn accuracy_matches_exhaustive_search((p, t) in (1usize..12, 1usize..5, 1usize..5)
        .prop_flat_map(|(n, kp, kt)| (labels(n, kp), labels(n, kt))))
    {
        prop_assert_eq!(metrics::accuracy(&p, &t).unwrap(), oracles::accuracy(&p, &t));
    }

    #[test]
    fn invariant_under_cluster_renaming((p, t) in pair(), shift in 1usize..50) {
        let renamed: Vec<usize> = p.iter().map(|&c| (c * 7 + shift) % 1000).collect();
        prop_assert_eq!(MetricsReport::compute(&p, &t).unwrap(), MetricsReport::compute(&renamed, &t).unwrap());
    }

    #[test]
    fn symmetric_indices((p, t) in pair()) {
        let a = MetricsReport::compute(&p, &t).unwrap();
        let b = MetricsReport::compute(&t, &p).unwrap();
        prop_assert!((a.nmi - b.nmi).abs() < 1e-9);
        prop_assert!((a.ami - b.ami).abs() < 1e-9);
        prop_assert!((a.ari - b.ari).abs() < 1e-9);
    }

    #[test]
    fn ranges((p, t) in pair()) {
        let r = MetricsReport::compute(&p, &t).unwrap();
        prop_assert!(r.acc > 0.0 && r.acc <= 100.0);
        prop_assert!((0.0..=100.0 + 1e-9).contains(&r.nmi));
        prop_assert!(r.ari <= 100.0 + 1e-9);
        prop_assert!(r.ami <= 100.0 + 1e-9);
    }

    #[test]
    fn self_agreement_is_perfect(t in labels(12, 4)) {
        let r = MetricsReport::compute(&t, &t).unwrap();
        prop_assert_eq!(r.acc, 100.0);
        prop_assert!((r.nmi - 100.0).abs() < 1e-9);
        prop_assert!((r.ari - 100.0).abs() < 1e-9);
        prop_assert!((r.ami - 100.0).abs() < 1e-9);
    }

    #[test]
    fn expected_mi_bounded_by_entropies((p, t) in pair()) {
        let tab = ContingencyTable::new(&p, &t).unwrap();
        let emi = metrics::expected_mutual_information(&tab);
        prop_assert!(emi >= -1e-12);
        // H(U) = I(U; U).
        let h = oracles::mutual_information(&p, &p).min(oracles::mutual_information(&t, &t));
        prop_assert!(emi <= h + 1e-12);
    }
}

#[test]
fn mean_of_reports_is_componentwise() {
    let a = MetricsReport { acc: 10.0, nmi: 20.0, ami: 30.0, ari: 40.0 };
    let b = MetricsReport { acc: 30.0, nmi: 0.0, ami: 10.0, ari: -20.0 };
    assert_eq!(MetricsReport::mean(&[a, b]), MetricsReport { acc: 20.0, nmi: 10.0, ami: 20.0, ari: 10.0 });
}
