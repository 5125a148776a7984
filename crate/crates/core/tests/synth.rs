use rootcause_core::sem::{total_effects, SemModel};
use rootcause_core::synth::{generate_model, random_sem, sample_dataset, GenConfig};
use rootcause_core::Error;

fn edge_count(model: &SemModel) -> usize {
    let nonzero = |v: &f64| *v != 0.0;
    let beta = (0..model.q())
        .flat_map(|i| (0..model.q()).map(move |j| (i, j)))
        .filter(|&(i, j)| nonzero(&model.beta().get(i, j)))
        .count();
    let gamma = (0..model.m())
        .flat_map(|k| (0..model.q()).map(move |j| (k, j)))
        .filter(|&(k, j)| nonzero(&model.gamma().get(k, j)))
        .count();
    beta + gamma + model.target_weights().iter().filter(|w| nonzero(w)).count()
}

#[test]
fn mean_degree_matches_the_request() {
    let seeds = 400;
    let total: usize = (0..seeds)
        .map(|seed| {
            let model = generate_model(&GenConfig {
                seed,
                ..GenConfig::default()
            })
            .unwrap();
            assert_eq!(model.q() + model.m() + 1, 15);
            edge_count(&model)
        })
        .sum();
    let degree = 2.0 * total as f64 / (seeds as f64 * 15.0);
    assert!((1.9..=2.1).contains(&degree), "mean degree {degree}");
}

#[test]
fn latents_are_parentless_confounders_off_the_target() {
    let (mut promoted, mut full) = (0, 0);
    for seed in 0..200 {
        let model = generate_model(&GenConfig {
            latent_fraction: 0.2,
            seed,
            ..GenConfig::default()
        })
        .unwrap();
        assert!(model.m() <= 3);
        promoted += model.m();
        full += usize::from(model.m() == 3);
        for k in 0..model.m() {
            assert!(model.latent_children(k).len() >= 2, "seed {seed}");
        }
        assert!(model.target_weights().iter().any(|w| *w != 0.0));
        for w in model.beta().columns().flatten() {
            assert!(*w == 0.0 || (0.25..=1.0).contains(&w.abs()));
        }
    }
    // eligibility often caps the count below the requested three
    assert!(
        full > 0 && promoted > 200,
        "{promoted} latents, {full} full models"
    );
}

#[test]
fn generation_and_sampling_are_deterministic() {
    let cfg = GenConfig {
        latent_fraction: 0.1,
        seed: 77,
        ..GenConfig::default()
    };
    let a = generate_model(&cfg).unwrap();
    assert_eq!(a, generate_model(&cfg).unwrap());
    assert_ne!(a, generate_model(&GenConfig { seed: 78, ..cfg }).unwrap());
    let d1 = sample_dataset(&a, 500, 3).unwrap();
    assert_eq!(d1, sample_dataset(&a, 500, 3).unwrap());
    assert_ne!(d1.observed, sample_dataset(&a, 500, 4).unwrap().observed);
}

#[test]
fn sampled_terms_have_the_model_moments() {
    let model = random_sem(4, 1, 0.5, 12).unwrap();
    let n = 200_000;
    let data = sample_dataset(&model, n, 1).unwrap();
    let hidden = data.hidden_t.as_ref().unwrap();
    for (j, var) in model.term_variances().into_iter().enumerate() {
        let col = hidden.col(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let second = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "term {j} mean {mean}");
        assert!(
            (second / var - 1.0).abs() < 0.05,
            "term {j}: {second} vs {var}"
        );
    }
    // observed values are exactly the hidden terms pushed through theta
    let theta = total_effects(&model).unwrap();
    let row = theta.observe(&hidden.row(10)).unwrap();
    for (a, b) in row.iter().zip(data.observed.row(10)) {
        assert!((a - b).abs() < 1e-12);
    }
    let positives = data.target.iter().filter(|&&d| d == 1).count();
    assert!(positives > 0 && positives < n);
}

#[test]
fn invalid_settings_are_rejected() {
    for p in [random_sem(3, 0, 1.5, 0), random_sem(3, 0, -0.1, 0)] {
        assert!(matches!(p, Err(Error::InvalidArgument(_))));
    }
    assert!(random_sem(1, 1, 0.5, 0).is_err());
    let bad_degree = GenConfig {
        p: 5,
        expected_degree: 6.0,
        ..GenConfig::default()
    };
    assert!(generate_model(&bad_degree).is_err());
    let full = GenConfig {
        latent_fraction: 1.0,
        ..GenConfig::default()
    };
    assert!(full.validate().is_err());
}
