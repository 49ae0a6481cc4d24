use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use npgm::bernoulli_gaussian::GammaResidual;
use npgm::error::{Error, Result};
use npgm::graph::EdgeMatrix;
use npgm::pipeline::{self, FitResult, FitSettings};
use npgm::simulation::{
    self, percent_target, ExperimentConfig, ExperimentRow, Family, GumbelOrientation, ModelKind, PrecisionModel, StableFit,
};
use npgm::spline::{SplinePrior, SplineSettings};
use npgm::stats::seeded_rng;
use serde_json::{json, Value};

use crate::io::{self, fmt};
use crate::{FamilyArg, FitArgs, GammaResidualArg, ModelArg, Outcome, ScoreArgs, SimulateArgs};

const MANIFEST_SCHEMA: &str = "npgm-manifest";
const MANIFEST_VERSION: u32 = 1;

fn manifest(command: &str, body: Value) -> Value {
    let mut m = json!({
        "schema": MANIFEST_SCHEMA,
        "version": MANIFEST_VERSION,
        "npgm_version": env!("CARGO_PKG_VERSION"),
        "command": command,
    });
    if let (Some(m), Value::Object(b)) = (m.as_object_mut(), body) {
        m.extend(b);
    }
    m
}

fn settings_from_flags(a: &FitArgs) -> Result<FitSettings> {
    let mut s = FitSettings {
        method: a.method.parse()?,
        n_burn: a.burnin,
        n_keep: a.samples,
        c_grid: a.c_grid.clone(),
        vb_samples: a.vb_samples,
        gamma_residual: match a.gamma_residual {
            GammaResidualArg::Full => GammaResidual::Full,
            GammaResidualArg::LaterOnly => GammaResidual::LaterOnly,
        },
        seed: a.seed,
        ..FitSettings::default()
    };
    s.transform = (!a.identity).then(|| SplineSettings {
        prior: SplinePrior { nu: a.nu, tau: a.tau, sigma2: a.sigma2 },
        ..SplineSettings::default()
    });
    s.vb.zeta2 = a.zeta2;
    s.vb.tau0 = a.tau0;
    s.vb.epsilon = a.epsilon;
    s.vb.max_iter = a.max_iter;
    Ok(s)
}

/// Settings and rescaling choice, from flags or from a saved manifest.
fn resolve(a: &FitArgs) -> Result<(FitSettings, bool)> {
    let Some(path) = &a.settings else {
        return Ok((settings_from_flags(a)?, !a.no_rescale));
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)?;
    let rescale = value.get("rescale").and_then(Value::as_bool).unwrap_or(!a.no_rescale);
    let settings = value.get("settings").cloned().unwrap_or(value);
    Ok((serde_json::from_value(settings)?, rescale))
}

fn load_input(a: &FitArgs, rescale: bool) -> Result<DMatrix<f64>> {
    let x = io::read_matrix(&a.input)?;
    if rescale {
        pipeline::rescale_unit(&x)
    } else {
        Ok(x)
    }
}

fn write_fit_outputs(dir: &Path, r: &FitResult) -> Result<Vec<&'static str>> {
    let mut written = vec!["edges.txt", "adjacency.csv", "omega.csv", "inclusion.csv"];
    io::write_edge_list(&dir.join("edges.txt"), &r.edges)?;
    io::write_adjacency(&dir.join("adjacency.csv"), &r.edges)?;
    io::write_matrix(&dir.join("omega.csv"), &r.omega_hat)?;
    io::write_matrix(&dir.join("inclusion.csv"), &r.inclusion)?;
    if !r.bic_table.is_empty() {
        let rows = r.bic_table.iter().map(|b| {
            let chosen = Some(b.c) == r.selected_c;
            vec![fmt(b.c), b.k.to_string(), fmt(b.minus_two_loglik), fmt(b.bic), u8::from(chosen).to_string()]
        });
        io::write_table(&dir.join("bic.csv"), &["c", "k", "minus_two_loglik", "bic", "selected"], rows)?;
        written.push("bic.csv");
    }
    if !r.vlb_trace.is_empty() {
        let rows = r.vlb_trace.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), fmt(*v)]);
        io::write_table(&dir.join("vlb_trace.csv"), &["iteration", "vlb"], rows)?;
        written.push("vlb_trace.csv");
    }
    if let Some(thetas) = &r.theta_hat {
        let rows = thetas
            .iter()
            .enumerate()
            .flat_map(|(d, t)| t.iter().enumerate().map(move |(j, v)| vec![(d + 1).to_string(), (j + 1).to_string(), fmt(*v)]));
        io::write_table(&dir.join("theta.csv"), &["variable", "index", "value"], rows)?;
        written.push("theta.csv");
    }
    Ok(written)
}

pub fn fit(a: &FitArgs) -> Result<Outcome> {
    let (settings, rescale) = resolve(a)?;
    let x = load_input(a, rescale)?;
    let result = pipeline::fit(&x, &settings)?;
    fs::create_dir_all(&a.output_dir)?;
    let outputs = write_fit_outputs(&a.output_dir, &result)?;
    let m = manifest(
        "fit",
        json!({
            "input": a.input.display().to_string(),
            "n": x.nrows(),
            "p": x.ncols(),
            "rescale": rescale,
            "settings": settings,
            "selected_c": result.selected_c,
            "converged": result.converged,
            "num_edges": result.edges.num_edges(),
            "outputs": outputs,
        }),
    );
    io::write_json(&a.output_dir.join("manifest.json"), &m)?;
    Ok(if result.converged == Some(false) { Outcome::NotConverged } else { Outcome::Done })
}

pub fn tune(a: &FitArgs) -> Result<Outcome> {
    let (settings, rescale) = resolve(a)?;
    let x = load_input(a, rescale)?;
    let tuned = pipeline::tune(&x, &settings)?;
    fs::create_dir_all(&a.output_dir)?;
    let rows = tuned.selected.iter().enumerate().map(|(d, (c, l))| vec![(d + 1).to_string(), fmt(*c), fmt(*l)]);
    io::write_table(&a.output_dir.join("tuning.csv"), &["variable", "c", "lambda"], rows)?;
    let rows = tuned.rho_star.iter().zip(&tuned.w).enumerate().flat_map(|(d, (rho, w))| {
        rho.iter()
            .zip(w.iter())
            .enumerate()
            .map(move |(j, (r, w))| vec![(d + 1).to_string(), (j + 1).to_string(), fmt(*r), fmt(*w)])
    });
    io::write_table(&a.output_dir.join("rho.csv"), &["row", "predictor", "rho", "w"], rows)?;
    let m = manifest(
        "tune",
        json!({
            "input": a.input.display().to_string(),
            "n": x.nrows(),
            "p": x.ncols(),
            "rescale": rescale,
            "settings": settings,
            "outputs": ["tuning.csv", "rho.csv"],
        }),
    );
    io::write_json(&a.output_dir.join("manifest.json"), &m)?;
    Ok(Outcome::Done)
}

fn family(a: &SimulateArgs) -> Option<Family> {
    match a.family {
        FamilyArg::None => None,
        FamilyArg::AsymmetricLaplace => Some(Family::AsymmetricLaplace),
        FamilyArg::Gumbel => Some(Family::ExtremeValue { orientation: GumbelOrientation::Maximum }),
        FamilyArg::GumbelMin => Some(Family::ExtremeValue { orientation: GumbelOrientation::Minimum }),
        FamilyArg::Stable => Some(Family::Stable {
            fit: match (a.stable_alpha, a.stable_beta) {
                (Some(alpha), Some(beta)) => StableFit::FixedShape { alpha, beta },
                _ => StableFit::default(),
            },
        }),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let kind = match a.model {
        ModelArg::Circle => ModelKind::Circle,
        ModelArg::Ar2 => ModelKind::Ar2,
        ModelArg::Percent => ModelKind::Percent {
            level: a
                .level
                .or_else(|| percent_target(a.p))
                .ok_or_else(|| Error::Config(format!("no default sparsity level for p = {}; pass --level", a.p)))?,
        },
    };
    let model = PrecisionModel { kind, p: a.p, seed: a.seed };
    let omega = simulation::generate_precision(&model)?;
    let mut rng = seeded_rng(a.seed);
    let (y, mu) = simulation::generate_observations(&omega, a.n, &mut rng)?;
    let family = family(a);
    let (x, fitted) = match &family {
        Some(f) => {
            let d = simulation::distort(&y, f)?;
            (d.x, Some(d.fitted))
        }
        None => (y.clone(), None),
    };
    let truth = EdgeMatrix::support(&omega);
    fs::create_dir_all(&a.output_dir)?;
    io::write_matrix(&a.output_dir.join("data.csv"), &x)?;
    io::write_matrix(&a.output_dir.join("latent.csv"), &y)?;
    io::write_matrix(&a.output_dir.join("omega_true.csv"), &omega)?;
    io::write_adjacency(&a.output_dir.join("adjacency_true.csv"), &truth)?;
    io::write_edge_list(&a.output_dir.join("edges_true.txt"), &truth)?;
    let m = manifest(
        "simulate",
        json!({
            "model": model,
            "n": a.n,
            "seed": a.seed,
            "mu": mu.as_slice(),
            "family": family,
            "fitted_distortions": fitted,
            "num_edges": truth.num_edges(),
            "outputs": ["data.csv", "latent.csv", "omega_true.csv", "adjacency_true.csv", "edges_true.txt"],
        }),
    );
    io::write_json(&a.output_dir.join("manifest.json"), &m)?;
    Ok(Outcome::Done)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_else(|| "NA".into())
}

pub fn score(a: &ScoreArgs) -> Result<Outcome> {
    let (est, _) = io::read_edges(&a.estimated)?;
    let (truth, _) = io::read_edges(&a.truth)?;
    let omegas = match (&a.omega_hat, &a.omega_true) {
        (Some(h), Some(t)) => Some((io::read_matrix(h)?, io::read_matrix(t)?)),
        _ => None,
    };
    let p = truth.dim();
    let zeros = DMatrix::zeros(p, p);
    let (oh, ot) = omegas.as_ref().map(|(h, t)| (h, t)).unwrap_or((&zeros, &zeros));
    let m = simulation::score(&est, &truth, oh, ot)?;
    let header = "tp,tn,fp,fn,sensitivity,specificity,mcc,scaled_l1";
    let row = [
        m.tp.to_string(),
        m.tn.to_string(),
        m.fp.to_string(),
        m.fn_.to_string(),
        opt(m.sensitivity),
        opt(m.specificity),
        opt(m.mcc),
        opt(omegas.is_some().then_some(m.scaled_l1)),
    ]
    .join(",");
    match &a.output {
        Some(path) => fs::write(path, format!("{header}\n{row}\n"))?,
        None => println!("{header}\n{row}"),
    }
    Ok(Outcome::Done)
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display()))),
        _ => Ok(serde_json::from_str(&text)?),
    }
}

const EXPERIMENT_HEADER: &str = "replication,seed,model,p,n,family,method,transform,tp,tn,fp,fn,sensitivity,specificity,mcc,scaled_l1,selected_c,converged,seconds";

fn experiment_row(r: &ExperimentRow) -> String {
    let m = &r.metrics;
    [
        r.replication.to_string(),
        r.seed.to_string(),
        r.model.clone(),
        r.p.to_string(),
        r.n.to_string(),
        // quoted: the family label is JSON
        format!("\"{}\"", r.family.replace('"', "\"\"")),
        r.method.clone(),
        r.transform.to_string(),
        m.tp.to_string(),
        m.tn.to_string(),
        m.fp.to_string(),
        m.fn_.to_string(),
        opt(m.sensitivity),
        opt(m.specificity),
        opt(m.mcc),
        fmt(m.scaled_l1),
        opt(r.selected_c),
        r.converged.map(|c| c.to_string()).unwrap_or_else(|| "NA".into()),
        format!("{:.3}", r.seconds),
    ]
    .join(",")
}

pub fn experiment(a: &crate::ExperimentArgs) -> Result<Outcome> {
    let config = load_config(&a.config)?;
    let rows = simulation::run_experiment(&config)?;
    let fresh = fs::metadata(&a.output).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(&a.output)?;
    if fresh {
        writeln!(f, "{EXPERIMENT_HEADER}")?;
    }
    for r in &rows {
        writeln!(f, "{}", experiment_row(r))?;
    }
    Ok(Outcome::Done)
}
