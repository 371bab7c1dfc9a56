//! Reproducible experiment pipelines behind the CLI: config parsing,
//! seeded dispatch to the analysis modules, and deterministic CSV/JSON
//! emission.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::capacity::{
    build_targets, capacity_score, relative_capacity, sample_inputs, CapacityCurve, DegreeScore,
    InputDistribution,
};
use crate::channels::parse_hamiltonian_token;
use crate::decodability::{decodability_scores, isolatable_features};
use crate::dynsys::{
    attractor_initial_conditions, fit_rescaling, forecast_horizon, integrate, parse_system_token,
    rescale, train_error, trajectory_sigma, DynSystem, Trajectory,
};
use crate::encoding::EncodingScheme;
use crate::model::{fit, readout_design, QelmModel};
use crate::pauli::PauliString;
use crate::readout::{
    effective_ptm, select_observables, spreading_profile, MultiplexPlan,
};
use crate::surrogate::{
    compare_flowmaps, learned_flowmap, taylor_transform, true_flowmap, TransformMethod,
};
use crate::{QelmError, Result};

/// Declarative experiment description; a config plus a seed reproduces all
/// outputs bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub encoding: String,
    pub hamiltonian: String,
    pub observables: String,
    /// Temporal multiplexing length L (schedule t_l = l).
    pub multiplex_steps: usize,
    pub include_t0: bool,
    /// Single evolution time for non-multiplexed experiments.
    pub time: f64,
    /// Time grid for spreading profiles.
    pub times: Vec<f64>,
    pub lambda: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    pub degrees: Vec<u32>,
    /// Cutoff for the relative capacity ratio.
    pub delta: f64,
    pub system: String,
    pub dt: f64,
    pub steps: usize,
    pub burn_in: f64,
    pub rescale_alpha: Option<Vec<f64>>,
    pub rescale_m: Option<Vec<f64>>,
    /// Map the attractor into [lo, hi] per coordinate instead of giving
    /// alpha/m explicitly.
    pub rescale_target: Option<(f64, f64)>,
    pub add_squares: bool,
    pub forecast_initial_conditions: usize,
    pub horizon_steps: usize,
    pub taylor_order: u32,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 3,
            encoding: "amp-sqrt".into(),
            hamiltonian: "tfim-zzx:J=1,h=1".into(),
            observables: "weight1".into(),
            multiplex_steps: 1,
            include_t0: false,
            time: 1.0,
            times: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            lambda: 1e-8,
            train_samples: 20_000,
            test_samples: 5_000,
            degrees: (1..=8).collect(),
            delta: 0.1,
            system: "lorenz63".into(),
            dt: 0.01,
            steps: 10_000,
            burn_in: 100.0,
            rescale_alpha: None,
            rescale_m: None,
            rescale_target: None,
            add_squares: false,
            forecast_initial_conditions: 10,
            horizon_steps: 2_000,
            taylor_order: 3,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config is serializable");
        let digest = Sha256::digest(text.as_bytes());
        format!("{digest:x}")[..16].to_string()
    }

    pub fn scheme(&self) -> Result<EncodingScheme> {
        EncodingScheme::parse(&self.encoding)
    }

    /// Per-component seed derived from the root seed.
    pub fn subseed(&self, component: &str) -> u64 {
        let digest = Sha256::digest(format!("{}:{component}", self.seed).as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    fn plan(&self) -> Result<MultiplexPlan> {
        MultiplexPlan::unit_schedule(self.multiplex_steps, self.include_t0)
    }
}

/// Writes a CSV table with a '#'-prefixed metadata header block.
pub fn write_csv(
    path: &Path,
    config: &ExperimentConfig,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "# config_hash: {}", config.hash())?;
    writeln!(out, "# seed: {}", config.seed)?;
    writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "{}", columns.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_summary(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Spreading diagnostics: per-observable weight-average and sector masses
/// over the time grid.
pub fn run_spreading(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let h = parse_hamiltonian_token(&config.hamiltonian, config.n)?;
    let s = select_observables(&config.observables, config.n)?;
    let mut columns = vec!["observable".to_string(), "t".to_string(), "nu_bar".to_string()];
    for w in 0..=config.n {
        columns.push(format!("sector_{w}"));
    }
    let column_refs: Vec<&str> = columns.iter().map(|c| c.as_str()).collect();
    let mut rows = Vec::new();
    for &k in &s.indices {
        let label = PauliString::from_index(config.n, k)?.to_string();
        for row in spreading_profile(&h, k, &config.times)? {
            let mut cells = vec![label.clone(), fmt(row.t), fmt(row.nu_bar)];
            cells.extend(row.sector_mass.iter().map(|&m| fmt(m)));
            rows.push(cells);
        }
    }
    let csv = out_dir.join("spreading.csv");
    write_csv(&csv, config, &column_refs, &rows)?;
    let summary = out_dir.join("spreading_summary.json");
    write_summary(
        &summary,
        &serde_json::json!({
            "hamiltonian": h.label,
            "observables": s.descriptor,
            "times": config.times,
        }),
    )?;
    Ok(vec![csv, summary])
}

/// Decodability sweep over multiplexing length plus a per-feature table at
/// the final length.
pub fn run_decodability(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let h = parse_hamiltonian_token(&config.hamiltonian, config.n)?;
    let s = select_observables(&config.observables, config.n)?;
    let dim = 1usize << (2 * config.n);
    let mut sweep_rows = Vec::new();
    let mut last_report = None;
    for l in 1..=config.multiplex_steps {
        let plan = MultiplexPlan::unit_schedule(l, config.include_t0)?;
        let r = effective_ptm(&h, &s, &plan)?;
        let report = decodability_scores(&r)?;
        let iso = isolatable_features(&r, 1e-8)?;
        let mut cells = vec![
            l.to_string(),
            report.rank.to_string(),
            fmt(report.rank as f64 / dim as f64),
            iso.iter().filter(|&&b| b).count().to_string(),
        ];
        cells.extend(report.sector_means.iter().map(|&m| fmt(m)));
        sweep_rows.push(cells);
        last_report = Some(report);
    }
    let mut columns = vec![
        "L".to_string(),
        "rank".to_string(),
        "rank_frac".to_string(),
        "isolatable".to_string(),
    ];
    for w in 0..=config.n {
        columns.push(format!("sector_mean_{w}"));
    }
    let column_refs: Vec<&str> = columns.iter().map(|c| c.as_str()).collect();
    let sweep_csv = out_dir.join("decodability_sweep.csv");
    write_csv(&sweep_csv, config, &column_refs, &sweep_rows)?;

    let report = last_report.expect("at least one multiplex step");
    let feature_rows: Vec<Vec<String>> = (0..dim)
        .map(|idx| {
            vec![
                PauliString::from_index(config.n, idx).unwrap().to_string(),
                fmt(report.scores[idx]),
                (report.threshold_mask[idx] as u8).to_string(),
            ]
        })
        .collect();
    let features_csv = out_dir.join("decodability_features.csv");
    write_csv(
        &features_csv,
        config,
        &["feature", "gamma2", "above_threshold"],
        &feature_rows,
    )?;
    let summary = out_dir.join("decodability_summary.json");
    write_summary(
        &summary,
        &serde_json::json!({
            "rank": report.rank,
            "rank_frac": report.rank as f64 / dim as f64,
            "sector_means": report.sector_means,
        }),
    )?;
    Ok(vec![sweep_csv, features_csv, summary])
}

fn distribution_for(scheme: EncodingScheme) -> InputDistribution {
    match scheme {
        EncodingScheme::AmplitudeSqrt | EncodingScheme::RotationalY => {
            InputDistribution::UniformUnit
        }
        EncodingScheme::AmplitudeSquare => InputDistribution::UniformSymmetric,
    }
}

fn capacity_curve(
    config: &ExperimentConfig,
    observables: &str,
) -> Result<CapacityCurve> {
    let scheme = config.scheme()?;
    let dist = distribution_for(scheme);
    let h = parse_hamiltonian_token(&config.hamiltonian, config.n)?;
    let s = select_observables(observables, config.n)?;
    let r = effective_ptm(&h, &s, &config.plan()?)?;
    let (train, test) = sample_inputs(
        dist,
        config.n,
        config.train_samples,
        config.test_samples,
        config.subseed("capacity"),
    );
    let f_train = readout_design(&r, scheme, config.add_squares, &train)?;
    let f_test = readout_design(&r, scheme, config.add_squares, &test)?;
    let scores: Vec<DegreeScore> = config
        .degrees
        .iter()
        .map(|&k| {
            let fam = build_targets(k, config.n, dist)?;
            capacity_score(&f_train, &train, &f_test, &test, &fam, config.lambda)
        })
        .collect::<Result<_>>()?;
    Ok(CapacityCurve {
        scores,
        samples: config.train_samples,
        lambda: config.lambda,
    })
}

/// Capacity curve for the configured observables, with the full-basis
/// reference and the relative ratio.
pub fn run_capacity(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let curve = capacity_curve(config, &config.observables)?;
    let reference = capacity_curve(config, "all")?;
    let relative = relative_capacity(&curve, &reference, config.delta)?;
    let rows: Vec<Vec<String>> = curve
        .scores
        .iter()
        .zip(&reference.scores)
        .zip(&relative)
        .map(|((score, all), rel)| {
            let mean = score.r2_mean;
            let std = (score
                .r2_per_target
                .iter()
                .map(|r| (r - mean).powi(2))
                .sum::<f64>()
                / score.r2_per_target.len() as f64)
                .sqrt();
            vec![
                score.degree.to_string(),
                fmt(mean),
                fmt(std),
                score.r2_per_target.len().to_string(),
                fmt(all.r2_mean),
                fmt(rel.1),
            ]
        })
        .collect();
    let csv = out_dir.join("capacity.csv");
    write_csv(
        &csv,
        config,
        &["degree", "r2_mean", "r2_std", "n_targets", "r2_all", "r2_relative"],
        &rows,
    )?;
    let summary = out_dir.join("capacity_summary.json");
    write_summary(
        &summary,
        &serde_json::json!({
            "integrated_capacity": curve.integrated(),
            "integrated_reference": reference.integrated(),
            "delta": config.delta,
        }),
    )?;
    Ok(vec![csv, summary])
}

/// A trained forecasting setup shared by the forecast and flow-map runs.
pub struct ForecastSetup {
    pub model: QelmModel,
    pub system: DynSystem,
    pub trajectory: Trajectory,
}

/// Builds the (possibly rescaled) system, integrates a training
/// trajectory, and trains the one-step predictor.
pub fn train_forecast_model(config: &ExperimentConfig) -> Result<ForecastSetup> {
    let scheme = config.scheme()?;
    let base = parse_system_token(&config.system)?;
    let seed = config.subseed("forecast-ic");
    let system = if let (Some(alpha), Some(m)) = (&config.rescale_alpha, &config.rescale_m) {
        rescale(&base, alpha, m)?
    } else if let Some((lo, hi)) = config.rescale_target {
        // probe the raw attractor, then map its bounds into [lo, hi]
        let probe_ic = attractor_initial_conditions(&base, 1, config.dt, config.burn_in, seed)?;
        let probe = integrate(&base, &probe_ic[0], config.dt, config.steps, 0)?;
        let (alpha, m) = fit_rescaling(&probe.bounds(), lo, hi, 0.05)?;
        rescale(&base, &alpha, &m)?
    } else {
        base
    };
    let ics = attractor_initial_conditions(&system, 1, config.dt, config.burn_in, seed)?;
    let trajectory = integrate(&system, &ics[0], config.dt, config.steps, 0)?;
    let inputs: Vec<Vec<f64>> = trajectory.states[..trajectory.len() - 1].to_vec();
    let targets = DMatrix::from_fn(inputs.len(), system.dim(), |i, j| {
        trajectory.states[i + 1][j]
    });
    let h = parse_hamiltonian_token(&config.hamiltonian, config.n)?;
    let s = select_observables(&config.observables, config.n)?;
    let r = effective_ptm(&h, &s, &config.plan()?)?;
    let provenance = format!(
        "{} | {} | {} | {}",
        system.name, config.hamiltonian, config.observables, config.encoding
    );
    let model = fit(
        r,
        scheme,
        config.add_squares,
        &inputs,
        &targets,
        config.lambda,
        &provenance,
    )?;
    Ok(ForecastSetup {
        model,
        system,
        trajectory,
    })
}

/// Trains on one trajectory and reports training error plus forecast
/// horizons over attractor-sampled initial conditions.
pub fn run_forecast(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let setup = train_forecast_model(config)?;
    let eps_train = train_error(&setup.model, &setup.trajectory)?;
    let sigma = trajectory_sigma(&setup.trajectory);
    let ics = attractor_initial_conditions(
        &setup.system,
        config.forecast_initial_conditions,
        config.dt,
        config.burn_in,
        config.subseed("forecast-eval"),
    )?;
    let mut rows = Vec::new();
    let mut horizons = Vec::new();
    for (i, ic) in ics.iter().enumerate() {
        let reference = integrate(&setup.system, ic, config.dt, config.horizon_steps, 0)?;
        let report = forecast_horizon(&setup.model, &reference, sigma, setup.system.lyapunov_max)?;
        horizons.push(report.horizon_lyapunov);
        rows.push(vec![
            i.to_string(),
            fmt(report.horizon_lyapunov),
            report.steps.to_string(),
            (report.censored as u8).to_string(),
            report.clamped_steps.to_string(),
        ]);
    }
    let csv = out_dir.join("forecast.csv");
    write_csv(
        &csv,
        config,
        &["ic", "horizon_lyapunov", "steps", "censored", "clamped_steps"],
        &rows,
    )?;
    let mean = horizons.iter().sum::<f64>() / horizons.len() as f64;
    let std = (horizons.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / horizons.len() as f64)
        .sqrt();
    let model_path = out_dir.join("model.json");
    setup.model.save_json(&model_path)?;
    let summary = out_dir.join("forecast_summary.json");
    write_summary(
        &summary,
        &serde_json::json!({
            "eps_train": eps_train,
            "horizon_mean": mean,
            "horizon_std": std,
            "sigma": sigma,
            "system": setup.system.name,
        }),
    )?;
    Ok(vec![csv, model_path, summary])
}

/// Extracts the learned flow map and compares it with the Lie-series truth.
pub fn run_flowmap(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if config.add_squares {
        return Err(QelmError::Contract(
            "flow-map extraction requires add_squares = false".into(),
        ));
    }
    let setup = train_forecast_model(config)?;
    let dim = setup.system.dim();
    // expand around the trajectory mean
    let p = setup.trajectory.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|j| setup.trajectory.states.iter().map(|s| s[j]).sum::<f64>() / p)
        .collect();
    let transform = taylor_transform(
        setup.model.scheme,
        &mean,
        config.taylor_order,
        TransformMethod::Analytic,
    )?;
    let learned = learned_flowmap(&setup.model, &transform, config.dt)?;
    let truth = true_flowmap(&setup.system, config.dt, 4, config.taylor_order)?;
    let table = compare_flowmaps(&learned, &truth)?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|row| {
            vec![
                row.output.to_string(),
                learned
                    .basis
                    .label(learned.basis.index_of(&row.exponents).unwrap()),
                row.degree.to_string(),
                fmt(row.learned),
                fmt(row.truth),
                fmt(row.abs_err),
            ]
        })
        .collect();
    let csv = out_dir.join("flowmap.csv");
    write_csv(
        &csv,
        config,
        &["output", "monomial", "degree", "learned", "true", "abs_err"],
        &rows,
    )?;
    let summary = out_dir.join("flowmap_summary.json");
    let max_low_order_rel = table
        .iter()
        .filter(|r| r.degree <= 1 && r.truth.abs() > 1e-6)
        .map(|r| r.rel_err)
        .fold(0.0f64, f64::max);
    write_summary(
        &summary,
        &serde_json::json!({
            "rank_k": transform.rank,
            "expansion_point": transform.point,
            "max_low_order_rel_err": max_low_order_rel,
        }),
    )?;
    Ok(vec![csv, summary])
}
