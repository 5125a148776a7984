use rootcause_core::extraction::oracle::oracle_eel;
use rootcause_core::extraction::{direct_lingam, eel, extract_errors, replay, EelConfig};
use rootcause_core::linalg::Matrix;
use rootcause_core::sem::{confounded_pair, ErrorDist, SemModel};
use rootcause_core::stats::{standardize, IndependenceBackend};
use rootcause_core::synth::sample_dataset;
use rootcause_core::Error;

/// `O1 -> O2 -> O3` plus `O1 -> O3`, with skewed and flat errors.
fn chain() -> SemModel {
    let beta = Matrix::from_rows(&[
        vec![0.0, 0.8, -0.5],
        vec![0.0, 0.0, 0.7],
        vec![0.0, 0.0, 0.0],
    ])
    .unwrap();
    SemModel::new(
        beta,
        Matrix::zeros(0, 3),
        vec![
            ErrorDist::ChiSquared { df: 3.0 },
            ErrorDist::Uniform {
                low: -1.0,
                high: 1.0,
            },
            ErrorDist::ChiSquared { df: 3.0 },
        ],
        vec![0.5, 0.0, 1.0],
        0.0,
        vec!["O1".into(), "O2".into(), "O3".into()],
    )
    .unwrap()
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn chain_data(n: usize) -> (Matrix, Matrix) {
    let data = sample_dataset(&chain(), n, 8).unwrap();
    let z = standardize(&data.observed).unwrap().data;
    (z, data.hidden_t.unwrap())
}

#[test]
fn all_three_methods_recover_chain_errors() {
    let (z, hidden) = chain_data(20_000);
    let results = [
        ("eel", eel(&z, &EelConfig::default()).unwrap()),
        ("ee", extract_errors(&z, &EelConfig::default()).unwrap()),
        ("dl", direct_lingam(&z).unwrap()),
    ];
    for (name, result) in results {
        for j in 0..3 {
            let c = corr(result.estar.col(j), hidden.col(j)).abs();
            assert!(c > 0.99, "{name} column {j}: corr {c}");
        }
        assert_eq!(result.dep_graph.edge_count(), 0, "{name}");
        assert_eq!(
            replay(&z, &result.partial_log).unwrap(),
            result.estar,
            "{name}"
        );
    }
}

#[test]
fn distance_backend_also_recovers_the_chain() {
    let (z, hidden) = chain_data(1500);
    let cfg = EelConfig {
        backend: IndependenceBackend::DistanceCorrelation {
            permutations: 99,
            seed: 4,
        },
        ..EelConfig::default()
    };
    let result = eel(&z, &cfg).unwrap();
    assert_eq!(result, eel(&z, &cfg).unwrap());
    assert!(corr(result.estar.col(0), hidden.col(0)).abs() > 0.99);
    let (big, _) = chain_data(4001);
    assert!(matches!(eel(&big, &cfg), Err(Error::TooLarge { .. })));
}

#[test]
fn budget_stops_the_search() {
    let (z, _) = chain_data(2000);
    let result = eel(
        &z,
        &EelConfig {
            budget: 1,
            ..EelConfig::default()
        },
    )
    .unwrap();
    assert!(result.budget_exceeded);
    assert_eq!(result.candidates, 1);
    let capped = eel(
        &z,
        &EelConfig {
            max_cond: Some(1),
            ..EelConfig::default()
        },
    )
    .unwrap();
    assert!(capped.max_cond_reached <= 1);
}

#[test]
fn bad_inputs_are_rejected() {
    let (mut z, _) = chain_data(500);
    let zero_cap = EelConfig {
        max_cond: Some(0),
        ..EelConfig::default()
    };
    assert!(eel(&z, &zero_cap).is_err());
    z.set(3, 1, f64::NAN);
    assert!(eel(&z, &EelConfig::default()).is_err());
    assert!(extract_errors(&z, &EelConfig::default()).is_err());
    assert!(direct_lingam(&Matrix::zeros(1, 2)).is_err());
}

#[test]
fn oracle_keeps_the_confounded_edge() {
    let result = oracle_eel(&confounded_pair(1.0, -0.7, 0.6), None).unwrap();
    assert!(result.dep_graph.has_edge(0, 1));
    assert!(result.partial_log.is_empty());
}
