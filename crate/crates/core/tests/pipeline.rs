use nalgebra::DMatrix;
use npgm::bernoulli_gaussian::GammaResidual;
use npgm::graph::EdgeMatrix;
use npgm::linalg::is_spd;
use npgm::pipeline::{fit, rescale_unit, tune, FitSettings, Method};
use npgm::simulation::{generate_observations, generate_precision, score, ModelKind, PrecisionModel};
use npgm::stats::seeded_rng;

fn ar2(p: usize, n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let omega = generate_precision(&PrecisionModel { kind: ModelKind::Ar2, p, seed }).unwrap();
    let (y, _) = generate_observations(&omega, n, &mut seeded_rng(seed)).unwrap();
    (y, omega)
}

fn quick(method: Method) -> FitSettings {
    FitSettings { method, transform: None, n_burn: 200, n_keep: 400, seed: 5, ..FitSettings::default() }
}

#[test]
fn every_engine_returns_a_consistent_fit() {
    let (y, _) = ar2(6, 150, 1);
    for method in [Method::Vb, Method::Horseshoe, Method::BernoulliGaussian] {
        let r = fit(&y, &quick(method)).unwrap();
        assert_eq!(r.method, method);
        assert!(is_spd(&r.omega_hat), "{method:?}");
        assert_eq!(r.omega_hat, r.omega_hat.transpose());
        assert!(r.inclusion.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(r.edges.num_edges(), r.edges.edges().len());
    }
}

#[test]
fn fits_are_seed_deterministic() {
    let (y, _) = ar2(5, 80, 2);
    for method in [Method::Vb, Method::BernoulliGaussian] {
        let a = fit(&y, &quick(method)).unwrap();
        let b = fit(&y, &quick(method)).unwrap();
        assert_eq!(a.omega_hat, b.omega_hat);
        assert_eq!(a.edges, b.edges);
    }
}

#[test]
fn bic_winner_has_smallest_score() {
    let (y, _) = ar2(5, 100, 3);
    let r = fit(&y, &quick(Method::Horseshoe)).unwrap();
    assert_eq!(r.bic_table.len(), 3);
    let best = r.bic_table.iter().map(|b| b.bic).fold(f64::INFINITY, f64::min);
    let chosen = r.bic_table.iter().find(|b| Some(b.c) == r.selected_c).unwrap();
    assert_eq!(chosen.bic, best);
}

#[test]
fn bernoulli_gaussian_finds_the_band() {
    let (y, omega) = ar2(8, 400, 4);
    let truth = EdgeMatrix::support(&omega);
    let full = fit(&y, &quick(Method::BernoulliGaussian)).unwrap();
    let m = score(&full.edges, &truth, &full.omega_hat, &omega).unwrap();
    assert!(m.mcc.unwrap() > 0.8, "{m:?}");

    // the later-only residual keeps spurious predictors
    let settings = FitSettings { gamma_residual: GammaResidual::LaterOnly, ..quick(Method::BernoulliGaussian) };
    let later = fit(&y, &settings).unwrap();
    assert!(later.edges.num_edges() >= full.edges.num_edges());
}

#[test]
fn transformed_fit_runs_on_unit_data() {
    let (y, _) = ar2(4, 60, 6);
    let x = rescale_unit(&y.map(|v| v.exp())).unwrap();
    let settings = FitSettings { n_burn: 30, n_keep: 60, ..quick(Method::Horseshoe) };
    let settings = FitSettings { transform: FitSettings::default().transform, ..settings };
    let r = fit(&x, &settings).unwrap();
    let thetas = r.theta_hat.unwrap();
    assert_eq!(thetas.len(), 4);
    assert!(r.z_mean.iter().all(|v| v.is_finite()));
}

#[test]
fn tuning_probabilities_lie_in_unit_interval() {
    let (y, _) = ar2(5, 50, 7);
    let t = tune(&y, &quick(Method::Vb)).unwrap();
    assert_eq!(t.rho_star.len(), 5);
    for (d, r) in t.rho_star.iter().enumerate() {
        assert_eq!(r.len(), 5 - d - 1);
        assert!(r.iter().all(|v| *v > 0.0 && *v < 1.0));
    }
}

#[test]
fn settings_round_trip_through_json() {
    let s = FitSettings { gamma_residual: GammaResidual::LaterOnly, seed: 99, ..FitSettings::default() };
    let text = serde_json::to_string(&s).unwrap();
    assert_eq!(serde_json::from_str::<FitSettings>(&text).unwrap(), s);
}
