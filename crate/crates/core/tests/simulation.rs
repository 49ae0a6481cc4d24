use npgm::graph::EdgeMatrix;
use npgm::linalg::is_spd;
use npgm::pipeline::Method;
use npgm::simulation::{
    distort, generate_observations, generate_precision, run_experiment, score, ExperimentConfig, Family, GumbelOrientation,
    ModelKind, PrecisionModel,
};
use npgm::stats::seeded_rng;

#[test]
fn models_have_expected_edge_counts() {
    for p in [5, 12, 25] {
        let circle = generate_precision(&PrecisionModel { kind: ModelKind::Circle, p, seed: 0 }).unwrap();
        let ar2 = generate_precision(&PrecisionModel { kind: ModelKind::Ar2, p, seed: 0 }).unwrap();
        assert!(is_spd(&circle) && is_spd(&ar2));
        assert_eq!(EdgeMatrix::support(&circle).num_edges(), p);
        assert_eq!(EdgeMatrix::support(&ar2).num_edges(), 2 * p - 3);
    }
}

#[test]
fn percent_model_is_spd_and_reproducible() {
    let model = PrecisionModel { kind: ModelKind::Percent { level: 0.1 }, p: 25, seed: 3 };
    let a = generate_precision(&model).unwrap();
    assert!(is_spd(&a));
    assert_eq!(a, generate_precision(&model).unwrap());
}

#[test]
fn distortions_keep_column_ranks() {
    let omega = generate_precision(&PrecisionModel { kind: ModelKind::Ar2, p: 4, seed: 0 }).unwrap();
    let (y, _) = generate_observations(&omega, 200, &mut seeded_rng(1)).unwrap();
    let families = [Family::AsymmetricLaplace, Family::ExtremeValue { orientation: GumbelOrientation::Minimum }];
    for family in families {
        let d = distort(&y, &family).unwrap();
        for c in 0..4 {
            for i in 0..200 {
                for k in 0..200 {
                    if y[(i, c)] < y[(k, c)] {
                        assert!(d.x[(i, c)] <= d.x[(k, c)]);
                    }
                }
            }
        }
        assert!(d.x.iter().all(|v| *v > 0.0 && *v < 1.0));
    }
}

#[test]
fn truth_scores_perfectly() {
    let omega = generate_precision(&PrecisionModel { kind: ModelKind::Circle, p: 7, seed: 0 }).unwrap();
    let e = EdgeMatrix::support(&omega);
    let m = score(&e, &e, &omega, &omega).unwrap();
    assert_eq!((m.fp, m.fn_), (0, 0));
    assert_eq!(m.mcc, Some(1.0));
    assert_eq!(m.scaled_l1, 0.0);
}

#[test]
fn experiment_rows_are_reproducible() {
    let config = ExperimentConfig {
        model: ModelKind::Ar2,
        p: 5,
        n: 60,
        family: None,
        method: Method::Vb,
        transform: false,
        replications: 3,
        seed: 8,
        c_grid: None,
        n_burn: None,
        n_keep: None,
        epsilon: None,
    };
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.metrics, y.metrics);
    }
    assert!(a.windows(2).all(|w| w[0].seed != w[1].seed));
}
