//! Benchmark chaotic systems, fixed-step high-order integration, dataset
//! generation, and forecasting metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::QelmModel;
use crate::poly::Poly;
use crate::{QelmError, Result};

/// State-space dimension of the built-in benchmarks.
pub const DIM: usize = 3;

/// Divergence guard on the state norm during integration.
const DIVERGENCE_BOUND: f64 = 1e6;

/// A polynomial autonomous system `du/dt = g(u)` with a reference maximal
/// Lyapunov exponent.
#[derive(Debug, Clone)]
pub struct DynSystem {
    pub name: String,
    pub field: Vec<Poly>,
    pub lyapunov_max: f64,
    /// A point inside the attractor's basin, used to seed burn-ins.
    /// Coordinate changes must map it along with the field.
    pub basin_point: Vec<f64>,
}

impl DynSystem {
    pub fn dim(&self) -> usize {
        self.field.len()
    }

    pub fn vector_field(&self, u: &[f64]) -> Vec<f64> {
        self.field.iter().map(|g| g.eval(u)).collect()
    }
}

/// Lorenz-63: `x' = sigma(y-x), y' = x(rho-z) - y, z' = xy - beta z`.
pub fn lorenz63(sigma: f64, rho: f64, beta: f64) -> DynSystem {
    let x = Poly::var(DIM, 0);
    let y = Poly::var(DIM, 1);
    let z = Poly::var(DIM, 2);
    DynSystem {
        name: format!("lorenz63(sigma={sigma},rho={rho},beta={beta})"),
        field: vec![
            y.add(&x.scale(-1.0)).scale(sigma),
            x.scale(rho).add(&x.mul(&z).scale(-1.0)).add(&y.scale(-1.0)),
            x.mul(&y).add(&z.scale(-beta)),
        ],
        lyapunov_max: 0.89,
        basin_point: vec![1.0; DIM],
    }
}

/// Halvorsen attractor with its cyclic-symmetric quadratic field.
pub fn halvorsen(a: f64) -> DynSystem {
    let u = |j| Poly::var(DIM, j);
    let eq = |i: usize, j: usize, k: usize| {
        u(i).scale(-a)
            .add(&u(j).scale(-4.0))
            .add(&u(k).scale(-4.0))
            .add(&u(j).mul(&u(j)).scale(-1.0))
    };
    DynSystem {
        name: format!("halvorsen(a={a})"),
        field: vec![eq(0, 1, 2), eq(1, 2, 0), eq(2, 0, 1)],
        lyapunov_max: 0.76,
        basin_point: vec![1.0; DIM],
    }
}

/// Parses system tokens "lorenz63" | "halvorsen" with default parameters.
pub fn parse_system_token(token: &str) -> Result<DynSystem> {
    match token {
        "lorenz63" => Ok(lorenz63(10.0, 28.0, 8.0 / 3.0)),
        "halvorsen" => Ok(halvorsen(1.4)),
        other => Err(QelmError::UnknownToken(format!("unknown system \"{other}\""))),
    }
}

/// Conjugated system under `u -> u' = alpha o (u - m)`: the rescaled field
/// is `g'(u') = alpha o g(u'/alpha + m)`, computed exactly on the
/// polynomial coefficients.
pub fn rescale(sys: &DynSystem, alpha: &[f64], m: &[f64]) -> Result<DynSystem> {
    if alpha.iter().any(|&a| a == 0.0) {
        return Err(QelmError::Contract("rescale alpha has a zero component".into()));
    }
    let inv_alpha: Vec<f64> = alpha.iter().map(|a| 1.0 / a).collect();
    let field = sys
        .field
        .iter()
        .zip(alpha)
        .map(|(g, &ai)| g.substitute_affine(&inv_alpha, m).scale(ai))
        .collect();
    Ok(DynSystem {
        name: format!("{} rescaled alpha={alpha:?} m={m:?}", sys.name),
        field,
        lyapunov_max: sys.lyapunov_max,
        basin_point: sys
            .basin_point
            .iter()
            .zip(alpha.iter().zip(m))
            .map(|(&u, (&a, &mi))| a * (u - mi))
            .collect(),
    })
}

/// Uniformly sampled trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub dt: f64,
    pub t0: f64,
    pub descriptor: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Componentwise (min, max) bounds over the trajectory.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let dim = self.states[0].len();
        (0..dim)
            .map(|j| {
                self.states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, s| {
                    (acc.0.min(s[j]), acc.1.max(s[j]))
                })
            })
            .collect()
    }
}

// Dormand-Prince 5th-order stage coefficients, fixed step.
const A: [[f64; 5]; 5] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];

fn dp5_step(sys: &DynSystem, u: &[f64], dt: f64) -> Vec<f64> {
    let dim = u.len();
    let mut k = Vec::with_capacity(6);
    k.push(sys.vector_field(u));
    for s in 0..5 {
        let mut stage = u.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..dim {
                    stage[i] += dt * a * kj[i];
                }
            }
        }
        k.push(sys.vector_field(&stage));
    }
    let mut next = u.to_vec();
    for (j, kj) in k.iter().enumerate() {
        for i in 0..dim {
            next[i] += dt * B[j] * kj[i];
        }
    }
    next
}

/// Fixed-step integration over `steps` steps, recording `steps + 1` states;
/// the first `discard` recorded states are dropped as transient.
pub fn integrate(
    sys: &DynSystem,
    u0: &[f64],
    dt: f64,
    steps: usize,
    discard: usize,
) -> Result<Trajectory> {
    if dt <= 0.0 {
        return Err(QelmError::Contract(format!("step size {dt} must be positive")));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut u = u0.to_vec();
    states.push(u.clone());
    for step in 0..steps {
        u = dp5_step(sys, &u, dt);
        if u.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return Err(QelmError::Divergence { step });
        }
        states.push(u.clone());
    }
    if discard >= states.len() {
        return Err(QelmError::Contract(format!(
            "transient discard {discard} consumes the whole trajectory"
        )));
    }
    Ok(Trajectory {
        states: states.split_off(discard),
        dt,
        t0: discard as f64 * dt,
        descriptor: sys.name.clone(),
    })
}

/// On-attractor initial conditions: burn in for `burn_in` time units from a
/// seeded perturbation of a standard point, then sample spaced states.
pub fn attractor_initial_conditions(
    sys: &DynSystem,
    count: usize,
    dt: f64,
    burn_in: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // jitter the basin point so distinct seeds decorrelate after burn-in
    // without leaving the basin of attraction
    let u0: Vec<f64> = sys
        .basin_point
        .iter()
        .map(|&b| b + (b.abs() + 0.1) * rng.gen_range(-0.1..0.1))
        .collect();
    // relax the (possibly off-attractor) starting point with fine steps for
    // one time unit so a stiff transient cannot destabilize the fixed grid
    let fine = dt / 100.0;
    let pre = integrate(sys, &u0, fine, (1.0 / fine).ceil() as usize, 0)?;
    let u0 = pre.states.last().expect("nonempty trajectory").clone();
    let burn_steps = (burn_in / dt).ceil() as usize;
    // space samples ~1 time unit apart so they decorrelate
    let spacing = (1.0 / dt).ceil() as usize;
    let total = burn_steps + count * spacing;
    let traj = integrate(sys, &u0, dt, total, burn_steps)?;
    Ok((1..=count).map(|i| traj.states[i * spacing].clone()).collect())
}

/// One-step RMS training error of the model on a trajectory:
/// RMS over t of `||u_{t+1} - f(u_t)||`.
pub fn train_error(model: &QelmModel, traj: &Trajectory) -> Result<f64> {
    let mut acc = 0.0;
    let pairs = traj.len() - 1;
    for t in 0..pairs {
        let pred = model.predict(&traj.states[t])?;
        let truth = &traj.states[t + 1];
        acc += truth
            .iter()
            .enumerate()
            .map(|(i, v)| (v - pred[i]).powi(2))
            .sum::<f64>();
    }
    Ok((acc / pairs as f64).sqrt())
}

/// Scale for the forecast-horizon threshold: the square root of the total
/// variance of the trajectory around its mean.
pub fn trajectory_sigma(traj: &Trajectory) -> f64 {
    let dim = traj.states[0].len();
    let p = traj.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|j| traj.states.iter().map(|s| s[j]).sum::<f64>() / p)
        .collect();
    let var: f64 = traj
        .states
        .iter()
        .map(|s| {
            s.iter()
                .zip(&mean)
                .map(|(v, m)| (v - m).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / p;
    var.sqrt()
}

/// Outcome of one autonomous forecast run.
#[derive(Debug, Clone)]
pub struct ForecastReport {
    /// First-exceedance time in Lyapunov units `t * lambda_max`.
    pub horizon_lyapunov: f64,
    pub steps: usize,
    /// True if the run reached the end of the reference without exceeding
    /// the threshold; the horizon is then a censored lower bound.
    pub censored: bool,
    /// Number of steps on which the prediction left the encoding domain
    /// and was clamped.
    pub clamped_steps: usize,
}

/// Iterates the model autonomously from the reference's first state and
/// reports the first time `||u_t - u_hat_t|| > sigma` in Lyapunov units.
/// Out-of-domain predictions are clamped to `domain` and counted.
pub fn forecast_horizon(
    model: &QelmModel,
    reference: &Trajectory,
    sigma: f64,
    lyapunov_max: f64,
) -> Result<ForecastReport> {
    let (lo, hi) = model.scheme.domain();
    let mut u_hat = reference.states[0].clone();
    let mut clamped_steps = 0usize;
    for (t, truth) in reference.states.iter().enumerate().skip(1) {
        let pred = model.predict(&u_hat)?;
        let mut clamped = false;
        u_hat = pred
            .iter()
            .map(|&v| {
                if v < lo || v > hi {
                    clamped = true;
                    v.clamp(lo, hi)
                } else {
                    v
                }
            })
            .collect();
        if clamped {
            clamped_steps += 1;
        }
        let err: f64 = truth
            .iter()
            .zip(&u_hat)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if err > sigma {
            return Ok(ForecastReport {
                horizon_lyapunov: t as f64 * reference.dt * lyapunov_max,
                steps: t,
                censored: false,
                clamped_steps,
            });
        }
    }
    let t = reference.len() - 1;
    Ok(ForecastReport {
        horizon_lyapunov: t as f64 * reference.dt * lyapunov_max,
        steps: t,
        censored: true,
        clamped_steps,
    })
}

/// Affine map parameters `(alpha, m)` sending the per-coordinate data
/// bounds into `[target_lo, target_hi]` with a small relative margin.
pub fn fit_rescaling(
    bounds: &[(f64, f64)],
    target_lo: f64,
    target_hi: f64,
    margin: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut alpha = Vec::with_capacity(bounds.len());
    let mut m = Vec::with_capacity(bounds.len());
    for &(lo, hi) in bounds {
        let span = hi - lo;
        if span <= 0.0 {
            return Err(QelmError::DegenerateVariance(span));
        }
        let pad = margin * span;
        let a = (target_hi - target_lo) / (span + 2.0 * pad);
        alpha.push(a);
        m.push(lo - pad - target_lo / a);
    }
    Ok((alpha, m))
}
