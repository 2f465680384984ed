//! Synthetic data generation, regularization-path runs, and the
//! error/outlier metrics used in the evaluation scripts.

use crate::model::{assemble_stacked, ModelError, ProblemSpec};
use crate::solver::{solve, Solution, SolverError, SolverOptions, SolverState};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    IidNormal,
    Equicorrelated { c: f64 },
}

/// Data formation: `y = X b_true + o + C e` with a diagonal `C` whose
/// entries are constant on each scale group.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub design: Design,
    /// per group: (1-based sample indices, noise scale)
    pub scale_groups: Vec<(Vec<usize>, f64)>,
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default)]
    pub outlier_scale: f64,
    pub b_true: Vec<f64>,
    pub seed: u64,
}

pub struct SyntheticData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub b_true: DVector<f64>,
    pub o_true: DVector<f64>,
    pub s_true: DVector<f64>,
}

/// Inverse-CDF standard normal draw, so that a fixed seed gives the
/// same stream on every platform.
fn std_normal(rng: &mut ChaCha20Rng, dist: &Normal) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return dist.inverse_cdf(u);
        }
    }
}

fn validate_synthetic(spec: &SyntheticSpec) -> Result<(), ExperimentError> {
    if spec.b_true.len() != spec.p {
        return Err(ExperimentError::BadSpec(format!(
            "b_true has length {}, p = {}",
            spec.b_true.len(),
            spec.p
        )));
    }
    if !(0.0..=1.0).contains(&spec.outlier_fraction) {
        return Err(ExperimentError::BadSpec("outlier_fraction outside [0,1]".into()));
    }
    let mut seen = vec![false; spec.n];
    for (g, scale) in &spec.scale_groups {
        if *scale < 0.0 {
            return Err(ExperimentError::BadSpec("negative noise scale".into()));
        }
        for &i in g {
            if i < 1 || i > spec.n {
                return Err(ExperimentError::BadSpec(format!("sample index {i} outside 1..{}", spec.n)));
            }
            if seen[i - 1] {
                return Err(ExperimentError::BadSpec(format!("sample index {i} in two groups")));
            }
            seen[i - 1] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(ExperimentError::BadSpec(format!("sample index {} not in any group", i + 1)));
    }
    match spec.design {
        Design::Equicorrelated { c } if !(0.0..1.0).contains(&c) => {
            Err(ExperimentError::BadSpec("equicorrelation c outside [0,1)".into()))
        }
        _ => Ok(()),
    }
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, ExperimentError> {
    validate_synthetic(spec)?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let dist = Normal::standard();
    let n = spec.n;
    let p = spec.p;

    // fill row-major so the draw order is independent of storage layout
    let mut x = DMatrix::zeros(n, p);
    match spec.design {
        Design::IidNormal => {
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = std_normal(&mut rng, &dist);
                }
            }
        }
        Design::Equicorrelated { c } => {
            for i in 0..n {
                let shared = std_normal(&mut rng, &dist);
                for j in 0..p {
                    let own = std_normal(&mut rng, &dist);
                    x[(i, j)] = c.sqrt() * shared + (1.0 - c).sqrt() * own;
                }
            }
        }
    }

    let e = DVector::from_fn(n, |_, _| std_normal(&mut rng, &dist));

    let mut s_diag = DVector::zeros(n);
    let mut s_true = DVector::zeros(spec.scale_groups.len());
    for (gi, (g, scale)) in spec.scale_groups.iter().enumerate() {
        s_true[gi] = *scale;
        for &i in g {
            s_diag[i - 1] = *scale;
        }
    }

    let mut o_true = DVector::zeros(n);
    let k = (spec.outlier_fraction * n as f64).ceil() as usize;
    if k > 0 {
        // sample k distinct positions
        let mut idx: Vec<usize> = (0..n).collect();
        for j in 0..k {
            let pick = j + rng.gen_range(0..n - j);
            idx.swap(j, pick);
        }
        let mut chosen = idx[..k].to_vec();
        chosen.sort_unstable();
        for &i in &chosen {
            o_true[i] = spec.outlier_scale * std_normal(&mut rng, &dist);
        }
    }

    let b_true = DVector::from_vec(spec.b_true.clone());
    let y = &x * &b_true + &o_true + s_diag.component_mul(&e);
    Ok(SyntheticData { x, y, b_true, o_true, s_true })
}

/// `k` values equally spaced on a log scale between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && k >= 1);
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

pub struct PathResult {
    pub alphas: Vec<f64>,
    pub solutions: Vec<Result<Solution, SolverError>>,
    pub maes: Vec<Option<f64>>,
    /// grid index achieving the smallest MAE, if any solve succeeded
    pub argmin: Option<usize>,
}

/// Solves the model at each grid value in ascending order, warm
/// starting each solve from the previous one. `target` is the
/// reference for the MAE (`X b_ref` or `y` depending on the setting).
/// Per-point failures are recorded and do not abort the grid.
pub fn run_path<F>(
    make_spec: F,
    alphas: &[f64],
    opts: &SolverOptions,
    x: &DMatrix<f64>,
    target: &DVector<f64>,
) -> Result<PathResult, ExperimentError>
where
    F: Fn(f64) -> Result<ProblemSpec, ModelError>,
{
    assert!(!alphas.is_empty());
    assert!(alphas.windows(2).all(|w| w[0] < w[1]), "grid must be strictly increasing");
    let mut solutions = Vec::with_capacity(alphas.len());
    let mut maes = Vec::with_capacity(alphas.len());
    let mut warm: Option<SolverState> = None;
    for &alpha in alphas {
        let spec = make_spec(alpha)?;
        let stacked = assemble_stacked(&spec)?;
        match solve(&spec, &stacked, opts, warm.take()) {
            Ok((sol, state)) => {
                let pred = x * &sol.b;
                maes.push(Some(mae(&pred, target).expect("shapes fixed by spec")));
                solutions.push(Ok(sol));
                warm = Some(state);
            }
            Err(e) => {
                maes.push(None);
                solutions.push(Err(e));
                warm = None;
            }
        }
    }
    let argmin = maes
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    Ok(PathResult { alphas: alphas.to_vec(), solutions, maes, argmin })
}

/// Mean absolute difference between two equal-length vectors.
pub fn mae(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64, ExperimentError> {
    if u.len() != v.len() {
        return Err(ExperimentError::Shape(format!("{} vs {}", u.len(), v.len())));
    }
    Ok((u - v).iter().map(|d| d.abs()).sum::<f64>() / u.len() as f64)
}

/// Flags sample `i` when `|r_i| > rho1 * sigma_hat_i`, i.e. the
/// residual falls outside the quadratic zone; the mean-shift estimate
/// soft-thresholds the residual at that radius.
pub fn extract_outliers(
    residuals: &DVector<f64>,
    rho1: f64,
    sigma_hat: &DVector<f64>,
) -> Result<(DVector<f64>, Vec<usize>), ExperimentError> {
    if residuals.len() != sigma_hat.len() {
        return Err(ExperimentError::Shape(format!(
            "{} residuals vs {} scales",
            residuals.len(),
            sigma_hat.len()
        )));
    }
    assert!(rho1 > 0.0);
    let mut o_hat = DVector::zeros(residuals.len());
    let mut flags = Vec::new();
    for i in 0..residuals.len() {
        let r = residuals[i];
        let radius = rho1 * sigma_hat[i];
        if r.abs() > radius {
            o_hat[i] = r.signum() * (r.abs() - radius);
            flags.push(i);
        }
    }
    Ok((o_hat, flags))
}
