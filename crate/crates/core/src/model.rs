//! Structured representation of the estimation problem, named model
//! builders, and assembly of the stacked operator used by the solver.

use crate::convex::{ScaleCoupling, SeparablePenalty};
use crate::persp::{AtomError, AtomKind, PerspectiveAtom};
use crate::solver::{factorize_gram, GramFactor};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown model id {0:?}")]
    UnknownModel(String),
    #[error("model {model} requires parameter {param}")]
    MissingParam { model: String, param: String },
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("group partition invalid: {0}")]
    Partition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Atom(#[from] AtomError),
}

/// One of the penalty operators `L_i`. The named sparse forms avoid
/// materializing matrices for the common coordinate and finite
/// difference penalties.
#[derive(Debug, Clone)]
pub enum PenaltyOp {
    Dense(DMatrix<f64>),
    /// selects coordinate `i` of `b`
    Coordinate(usize),
    /// `b -> b[i+1] - b[i]`
    Difference(usize),
}

impl PenaltyOp {
    pub fn rows(&self) -> usize {
        match self {
            PenaltyOp::Dense(m) => m.nrows(),
            PenaltyOp::Coordinate(_) | PenaltyOp::Difference(_) => 1,
        }
    }

    pub fn apply(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            PenaltyOp::Dense(m) => m * b,
            PenaltyOp::Coordinate(i) => DVector::from_element(1, b[*i]),
            PenaltyOp::Difference(i) => DVector::from_element(1, b[*i + 1] - b[*i]),
        }
    }

    fn write_rows(&self, a: &mut DMatrix<f64>, row0: usize) {
        match self {
            PenaltyOp::Dense(m) => {
                a.view_mut((row0, 0), (m.nrows(), m.ncols())).copy_from(m);
            }
            PenaltyOp::Coordinate(i) => a[(row0, *i)] = 1.0,
            PenaltyOp::Difference(i) => {
                a[(row0, *i)] = -1.0;
                a[(row0, *i + 1)] = 1.0;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataBlock {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub atom: PerspectiveAtom,
}

#[derive(Debug, Clone)]
pub struct PenaltyBlock {
    pub op: PenaltyOp,
    pub atom: PerspectiveAtom,
}

/// The full problem: data blocks, penalty blocks, the separable penalty
/// on `b`, and the couplings on the two scale vectors.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub p: usize,
    pub data_blocks: Vec<DataBlock>,
    pub penalty_blocks: Vec<PenaltyBlock>,
    pub theta: Option<SeparablePenalty>,
    pub sigma_coupling: ScaleCoupling,
    pub tau_coupling: ScaleCoupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Data(usize),
    Penalty(usize),
}

/// The stacked operator `A = [X_1; ..; X_N; L_1; ..; L_P]`, the offset
/// vector (data responses on top, zeros below), the row map, and the
/// factorization of `Id + A A^T`.
pub struct StackedProblem {
    pub a: DMatrix<f64>,
    pub w: DVector<f64>,
    /// per block: (first row, row count, kind), data blocks first
    pub row_map: Vec<(usize, usize, BlockKind)>,
    pub gram: GramFactor,
}

impl ProblemSpec {
    pub fn n(&self) -> usize {
        self.data_blocks.iter().map(|b| b.x.nrows()).sum()
    }

    pub fn n_blocks(&self) -> usize {
        self.data_blocks.len()
    }

    pub fn p_blocks(&self) -> usize {
        self.penalty_blocks.len()
    }

    pub fn total_rows(&self) -> usize {
        self.n() + self.penalty_blocks.iter().map(|b| b.op.rows()).sum::<usize>()
    }
}

/// Indicator couplings are checked within `tol`; smooth terms evaluate
/// exactly. Returns +inf when any term is infeasible.
pub fn evaluate_objective(
    spec: &ProblemSpec,
    s: &DVector<f64>,
    t: &DVector<f64>,
    b: &DVector<f64>,
    tol: f64,
) -> f64 {
    let mut total = spec.sigma_coupling.eval(s, tol);
    if spec.p_blocks() > 0 {
        total += spec.tau_coupling.eval(t, tol);
    }
    if let Some(theta) = &spec.theta {
        total += theta.eval(b);
    }
    // at a vanishing scale a residual below tol is treated as exactly
    // zero, so a solution that converged to the recession point (0,0)
    // reports a finite value
    let snapped = |sigma: f64, v: DVector<f64>| {
        if sigma <= tol && v.norm() <= tol {
            (sigma.max(0.0), DVector::zeros(v.len()))
        } else {
            (sigma, v)
        }
    };
    for (i, blk) in spec.data_blocks.iter().enumerate() {
        let (sigma, r) = snapped(s[i], &blk.x * b - &blk.y);
        total += blk.atom.eval(sigma, &r);
    }
    for (i, blk) in spec.penalty_blocks.iter().enumerate() {
        let (tau, z) = snapped(t[i], blk.op.apply(b));
        total += blk.atom.eval(tau, &z);
    }
    total
}

pub fn validate_spec(spec: &ProblemSpec) -> Vec<String> {
    let mut diags = Vec::new();
    if spec.data_blocks.is_empty() {
        diags.push("no data blocks (N must be at least 1)".into());
    }
    for (i, blk) in spec.data_blocks.iter().enumerate() {
        if blk.x.ncols() != spec.p {
            diags.push(format!(
                "data block {i}: X has {} columns, expected p = {}",
                blk.x.ncols(),
                spec.p
            ));
        }
        if blk.y.len() != blk.x.nrows() {
            diags.push(format!(
                "data block {i}: y has length {}, X has {} rows",
                blk.y.len(),
                blk.x.nrows()
            ));
        }
        if blk.atom.dim != blk.x.nrows() {
            diags.push(format!(
                "data block {i}: atom dimension {} does not match {} rows",
                blk.atom.dim,
                blk.x.nrows()
            ));
        }
    }
    for (i, blk) in spec.penalty_blocks.iter().enumerate() {
        let ok = match &blk.op {
            PenaltyOp::Dense(m) => m.ncols() == spec.p,
            PenaltyOp::Coordinate(j) => *j < spec.p,
            PenaltyOp::Difference(j) => *j + 1 < spec.p,
        };
        if !ok {
            diags.push(format!("penalty block {i}: operator incompatible with p = {}", spec.p));
        }
        if blk.atom.dim != blk.op.rows() {
            diags.push(format!(
                "penalty block {i}: atom dimension {} does not match {} rows",
                blk.atom.dim,
                blk.op.rows()
            ));
        }
    }
    if spec
        .sigma_coupling
        .check_arity(spec.data_blocks.len())
        .is_err()
    {
        diags.push("sigma coupling partition does not tile the data blocks".into());
    }
    if spec
        .tau_coupling
        .check_arity(spec.penalty_blocks.len())
        .is_err()
    {
        diags.push("tau coupling partition does not tile the penalty blocks".into());
    }
    if let Some(SeparablePenalty::WeightedL1 { alpha1, weights }) = &spec.theta {
        if *alpha1 < 0.0 || weights.iter().any(|w| *w < 0.0) {
            diags.push("theta: weighted l1 requires nonnegative weights".into());
        }
        if weights.len() != spec.p {
            diags.push(format!("theta: {} weights for p = {}", weights.len(), spec.p));
        }
    }
    match &spec.theta {
        Some(SeparablePenalty::L1 { alpha1 })
        | Some(SeparablePenalty::L2Norm { alpha1 })
        | Some(SeparablePenalty::L1PlusLinearShift { alpha1, .. })
            if *alpha1 < 0.0 =>
        {
            diags.push("theta: alpha1 is negative".into())
        }
        Some(SeparablePenalty::SqL2 { alpha2 }) if *alpha2 < 0.0 => {
            diags.push("theta: alpha2 is negative".into())
        }
        Some(SeparablePenalty::ElasticNet { alpha1, alpha2 })
            if *alpha1 < 0.0 || *alpha2 < 0.0 =>
        {
            diags.push("theta: elastic net weights are negative".into())
        }
        Some(SeparablePenalty::PowerR { alpha, r }) if *alpha < 0.0 || *r < 1.0 || *r > 2.0 => {
            diags.push("theta: power penalty needs alpha >= 0 and r in [1,2]".into())
        }
        _ => {}
    }
    diags
}

pub fn assemble_stacked(spec: &ProblemSpec) -> Result<StackedProblem, ModelError> {
    let diags = validate_spec(spec);
    if let Some(d) = diags.first() {
        return Err(ModelError::Dimension(d.clone()));
    }
    let m = spec.total_rows();
    let mut a = DMatrix::zeros(m, spec.p);
    let mut w = DVector::zeros(m);
    let mut row_map = Vec::with_capacity(spec.data_blocks.len() + spec.penalty_blocks.len());
    let mut row = 0usize;
    for (i, blk) in spec.data_blocks.iter().enumerate() {
        let r = blk.x.nrows();
        a.view_mut((row, 0), (r, spec.p)).copy_from(&blk.x);
        w.rows_mut(row, r).copy_from(&blk.y);
        row_map.push((row, r, BlockKind::Data(i)));
        row += r;
    }
    for (i, blk) in spec.penalty_blocks.iter().enumerate() {
        let r = blk.op.rows();
        blk.op.write_rows(&mut a, row);
        row_map.push((row, r, BlockKind::Penalty(i)));
        row += r;
    }
    let gram = factorize_gram(&a)
        .map_err(|_| ModelError::Dimension("factorization of Id + A A^T failed".into()))?;
    Ok(StackedProblem { a, w, row_map, gram })
}

/// Key-value parameters consumed by [`build_model`]. Group indices are
/// 0-based here; the JSON config layer converts from 1-based.
#[derive(Debug, Clone, Default)]
pub struct ModelParams {
    pub alpha: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub eps: Option<f64>,
    pub sigma_min: Option<f64>,
    pub groups: Option<Vec<Vec<usize>>>,
    pub weights: Option<Vec<f64>>,
}

fn req(model: &str, param: &str, v: Option<f64>) -> Result<f64, ModelError> {
    v.ok_or_else(|| ModelError::MissingParam { model: model.into(), param: param.into() })
}

fn check_partition(groups: &[Vec<usize>], n: usize) -> Result<(), ModelError> {
    let mut seen = vec![false; n];
    for g in groups {
        if g.is_empty() {
            return Err(ModelError::Partition("empty group".into()));
        }
        for &i in g {
            if i >= n {
                return Err(ModelError::Partition(format!("index {} out of range 0..{}", i + 1, n)));
            }
            if seen[i] {
                return Err(ModelError::Partition(format!("index {} appears twice", i + 1)));
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(ModelError::Partition(format!("index {} not covered", i + 1)));
    }
    Ok(())
}

fn scalar_row_blocks(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    atom_of: impl Fn() -> Result<PerspectiveAtom, AtomError>,
) -> Result<Vec<DataBlock>, ModelError> {
    (0..x.nrows())
        .map(|i| {
            Ok(DataBlock {
                x: DMatrix::from_rows(&[x.row(i)]),
                y: DVector::from_element(1, y[i]),
                atom: atom_of()?,
            })
        })
        .collect()
}

fn all_indices(n: usize) -> Vec<Vec<usize>> {
    vec![(0..n).collect()]
}

/// Builds the named model instantiations.
pub fn build_model(
    name: &str,
    params: &ModelParams,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<ProblemSpec, ModelError> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(ModelError::Dimension(format!(
            "y has length {}, X has {} rows",
            y.len(),
            n
        )));
    }
    let single = |atom: PerspectiveAtom| DataBlock { x: x.clone(), y: y.clone(), atom };
    let spec = match name {
        "lasso" | "ridge" | "elastic_net" | "lad_lasso" | "bridge" => {
            let theta = match name {
                "lasso" => SeparablePenalty::L1 { alpha1: req(name, "alpha1", params.alpha1)? },
                "ridge" => SeparablePenalty::SqL2 { alpha2: req(name, "alpha2", params.alpha2)? },
                "elastic_net" => SeparablePenalty::ElasticNet {
                    alpha1: req(name, "alpha1", params.alpha1)?,
                    alpha2: req(name, "alpha2", params.alpha2)?,
                },
                "lad_lasso" => SeparablePenalty::L1 { alpha1: req(name, "alpha1", params.alpha1)? },
                _ => SeparablePenalty::PowerR {
                    alpha: req(name, "alpha2", params.alpha2)?,
                    r: req(name, "r", params.r)?,
                },
            };
            let atom = if name == "lad_lasso" {
                PerspectiveAtom::new(AtomKind::L1 { weight: 1.0 }, n)?
            } else {
                PerspectiveAtom::new(AtomKind::PlainSqL2 { weight: 1.0 }, n)?
            };
            ProblemSpec {
                p,
                data_blocks: vec![single(atom)],
                penalty_blocks: vec![],
                theta: Some(theta),
                sigma_coupling: ScaleCoupling::Pinned(1.0),
                tau_coupling: ScaleCoupling::Free,
            }
        }
        "fused_lasso" | "smooth_lasso" => {
            let alpha1 = req(name, "alpha1", params.alpha1)?;
            let alpha2 = req(name, "alpha2", params.alpha2)?;
            if p < 2 {
                return Err(ModelError::Dimension("difference penalty needs p >= 2".into()));
            }
            let penalty_blocks = (0..p - 1)
                .map(|i| {
                    let kind = if name == "fused_lasso" {
                        AtomKind::L1 { weight: alpha2 }
                    } else {
                        AtomKind::PlainSqL2 { weight: alpha2 }
                    };
                    Ok(PenaltyBlock {
                        op: PenaltyOp::Difference(i),
                        atom: PerspectiveAtom::new(kind, 1)?,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            ProblemSpec {
                p,
                data_blocks: vec![single(PerspectiveAtom::new(AtomKind::PlainSqL2 { weight: 1.0 }, n)?)],
                penalty_blocks,
                theta: Some(SeparablePenalty::L1 { alpha1 }),
                sigma_coupling: ScaleCoupling::Pinned(1.0),
                tau_coupling: ScaleCoupling::Pinned(1.0),
            }
        }
        "owen" => {
            let rho1 = req(name, "rho1", params.rho1)?;
            let rho2 = req(name, "rho2", params.rho2)?;
            let alpha1 = req(name, "alpha1", params.alpha1)?;
            let delta1 = params.delta1.unwrap_or(n as f64);
            let delta2 = params.delta2.unwrap_or(p as f64);
            let data_blocks = scalar_row_blocks(x, y, || {
                PerspectiveAtom::new(AtomKind::Huber { alpha: delta1, rho: rho1, q: 2.0 }, 1)
            })?;
            let penalty_blocks = if alpha1 > 0.0 {
                (0..p)
                    .map(|i| {
                        Ok(PenaltyBlock {
                            op: PenaltyOp::Coordinate(i),
                            atom: PerspectiveAtom::new(
                                AtomKind::BerhuStd { alpha: delta2 / alpha1, rho: rho2 },
                                1,
                            )?
                            .with_scale(alpha1)?,
                        })
                    })
                    .collect::<Result<Vec<_>, ModelError>>()?
            } else {
                vec![]
            };
            let np = penalty_blocks.len();
            ProblemSpec {
                p,
                data_blocks,
                penalty_blocks,
                theta: None,
                sigma_coupling: ScaleCoupling::GroupAverage(all_indices(n)),
                tau_coupling: ScaleCoupling::GroupAverage(all_indices(np)),
            }
        }
        "adaptive_berhu" => {
            let alpha = req(name, "alpha", params.alpha)?;
            let rho1 = req(name, "rho1", params.rho1)?;
            let rho2 = req(name, "rho2", params.rho2)?;
            let weights = params.weights.clone().unwrap_or_else(|| vec![1.0; p]);
            if weights.len() != p {
                return Err(ModelError::BadParam(format!(
                    "{} weights for p = {p}",
                    weights.len()
                )));
            }
            let data_blocks = scalar_row_blocks(x, y, || {
                PerspectiveAtom::new(AtomKind::Huber { alpha: n as f64, rho: rho1, q: 2.0 }, 1)
            })?;
            let penalty_blocks = weights
                .iter()
                .enumerate()
                .map(|(i, &wi)| {
                    if !(wi > 0.0) {
                        return Err(ModelError::BadParam(format!("weight {} is not positive", wi)));
                    }
                    Ok(PenaltyBlock {
                        op: PenaltyOp::Coordinate(i),
                        atom: PerspectiveAtom::new(
                            AtomKind::BerhuStd { alpha: 1.0 / (wi * wi), rho: rho2 },
                            1,
                        )?
                        .with_scale(alpha * wi)?,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            ProblemSpec {
                p,
                data_blocks,
                penalty_blocks,
                theta: None,
                sigma_coupling: ScaleCoupling::GroupAverage(all_indices(n)),
                tau_coupling: ScaleCoupling::GroupAverage(all_indices(p)),
            }
        }
        "scaled_lasso" | "sqrt_elastic_net" => {
            let alpha1 = req(name, "alpha1", params.alpha1)?;
            let alpha2 = if name == "sqrt_elastic_net" {
                req(name, "alpha2", params.alpha2)?
            } else {
                0.0
            };
            let theta = if alpha2 > 0.0 {
                SeparablePenalty::ElasticNet { alpha1, alpha2 }
            } else {
                SeparablePenalty::L1 { alpha1 }
            };
            let atom = PerspectiveAtom::new(
                AtomKind::ScaledLasso { alpha: n as f64 / 2.0, kappa: 2.0, q: 2.0 },
                n,
            )?;
            let sigma_coupling = match params.sigma_min {
                Some(e) if e > 0.0 => ScaleCoupling::LowerBound(e),
                Some(e) => return Err(ModelError::BadParam(format!("sigma_min = {e} must be positive"))),
                None => ScaleCoupling::Free,
            };
            ProblemSpec {
                p,
                data_blocks: vec![single(atom)],
                penalty_blocks: vec![],
                theta: Some(theta),
                sigma_coupling,
                tau_coupling: ScaleCoupling::Free,
            }
        }
        "natural_lasso" => {
            let alpha = req(name, "alpha", params.alpha)?;
            let shift = x.transpose() * y / n as f64;
            let c = y.norm_squared() / (2.0 * n as f64);
            ProblemSpec {
                p,
                data_blocks: vec![single(PerspectiveAtom::new(AtomKind::PlainSqL2 { weight: 0.0 }, n)?)],
                penalty_blocks: vec![PenaltyBlock {
                    op: PenaltyOp::Dense(x.clone()),
                    atom: PerspectiveAtom::new(
                        AtomKind::PlainSqL2 { weight: 1.0 / (2.0 * n as f64) },
                        n,
                    )?,
                }],
                theta: Some(SeparablePenalty::L1PlusLinearShift { alpha1: alpha, shift }),
                sigma_coupling: ScaleCoupling::Free,
                tau_coupling: ScaleCoupling::NaturalLassoBarrier(c),
            }
        }
        "nu_svr" => {
            let alpha = req(name, "alpha", params.alpha)?;
            let eps = req(name, "eps", params.eps)?;
            let data_blocks =
                scalar_row_blocks(x, y, || PerspectiveAtom::new(AtomKind::Vapnik { alpha, eps }, 1))?;
            ProblemSpec {
                p,
                data_blocks,
                penalty_blocks: vec![],
                theta: Some(SeparablePenalty::SqL2 { alpha2: 0.5 }),
                sigma_coupling: ScaleCoupling::GroupAverage(all_indices(n)),
                tau_coupling: ScaleCoupling::Free,
            }
        }
        "het_scaled_lasso" => {
            let alpha1 = req(name, "alpha1", params.alpha1)?;
            let q = params.q.unwrap_or(2.0);
            let groups = params
                .groups
                .clone()
                .ok_or(ModelError::MissingParam { model: "het_scaled_lasso".into(), param: "groups".into() })?;
            check_partition(&groups, n)?;
            let data_blocks = groups
                .iter()
                .map(|g| {
                    let xi = DMatrix::from_rows(&g.iter().map(|&i| x.row(i)).collect::<Vec<_>>());
                    let yi = DVector::from_iterator(g.len(), g.iter().map(|&i| y[i]));
                    Ok(DataBlock {
                        x: xi,
                        y: yi,
                        atom: PerspectiveAtom::new(
                            AtomKind::ScaledLasso { alpha: 0.5, kappa: 1.0, q },
                            g.len(),
                        )?,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            let sigma_coupling = match params.sigma_min {
                Some(e) if e > 0.0 => ScaleCoupling::LowerBound(e),
                Some(e) => return Err(ModelError::BadParam(format!("sigma_min = {e} must be positive"))),
                None => ScaleCoupling::Free,
            };
            ProblemSpec {
                p,
                data_blocks,
                penalty_blocks: vec![],
                theta: Some(SeparablePenalty::L1 { alpha1 }),
                sigma_coupling,
                tau_coupling: ScaleCoupling::Free,
            }
        }
        "het_huber" => {
            let alpha1 = req(name, "alpha1", params.alpha1)?;
            let alpha2 = params.alpha2.unwrap_or(0.0);
            let rho1 = params.rho1.unwrap_or(1.345);
            let rho2 = params.rho2.unwrap_or(1.0);
            let q = params.q.unwrap_or(2.0);
            let delta = params.delta.unwrap_or(0.5);
            let groups = params
                .groups
                .clone()
                .ok_or(ModelError::MissingParam { model: "het_huber".into(), param: "groups".into() })?;
            check_partition(&groups, n)?;
            let data_blocks = scalar_row_blocks(x, y, || {
                PerspectiveAtom::new(AtomKind::Huber { alpha: delta, rho: rho1, q }, 1)
            })?;
            let penalty_blocks = if alpha2 > 0.0 {
                (0..p)
                    .map(|i| {
                        Ok(PenaltyBlock {
                            op: PenaltyOp::Coordinate(i),
                            atom: PerspectiveAtom::new(
                                AtomKind::BerhuStd { alpha: p as f64 / alpha2, rho: rho2 },
                                1,
                            )?
                            .with_scale(alpha2)?,
                        })
                    })
                    .collect::<Result<Vec<_>, ModelError>>()?
            } else {
                vec![]
            };
            let np = penalty_blocks.len();
            let tau_coupling = if np > 0 {
                ScaleCoupling::GroupAverage(all_indices(np))
            } else {
                ScaleCoupling::Free
            };
            ProblemSpec {
                p,
                data_blocks,
                penalty_blocks,
                theta: Some(SeparablePenalty::L1 { alpha1 }),
                sigma_coupling: ScaleCoupling::GroupAverage(groups),
                tau_coupling,
            }
        }
        other => return Err(ModelError::UnknownModel(other.to_string())),
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_xy(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        (x, y)
    }

    #[test]
    fn lasso_build() {
        let (x, y) = toy_xy(5, 3, 1);
        let params = ModelParams { alpha1: Some(1.0), ..Default::default() };
        let spec = build_model("lasso", &params, &x, &y).unwrap();
        assert_eq!(spec.n_blocks(), 1);
        assert_eq!(spec.p_blocks(), 0);
        assert!(matches!(spec.sigma_coupling, ScaleCoupling::Pinned(v) if v == 1.0));
        assert!(matches!(spec.theta, Some(SeparablePenalty::L1 { alpha1 }) if alpha1 == 1.0));
    }

    #[test]
    fn lasso_objective_reconstruction() {
        let (x, y) = toy_xy(6, 4, 2);
        let params = ModelParams { alpha1: Some(0.7), ..Default::default() };
        let spec = build_model("lasso", &params, &x, &y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let b = DVector::from_fn(4, |_, _| rng.gen_range(-2.0..2.0));
            let s = DVector::from_element(1, 1.0);
            let t = DVector::zeros(0);
            let got = evaluate_objective(&spec, &s, &t, &b, 1e-9);
            let want = (&x * &b - &y).norm_squared() + 0.7 * b.iter().map(|v| v.abs()).sum::<f64>();
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn het_scaled_lasso_build() {
        let (x, y) = toy_xy(18, 3, 4);
        let params = ModelParams {
            alpha1: Some(1.0),
            q: Some(2.0),
            groups: Some(vec![(0..9).collect(), (9..18).collect()]),
            ..Default::default()
        };
        let spec = build_model("het_scaled_lasso", &params, &x, &y).unwrap();
        assert_eq!(spec.n_blocks(), 2);
        for blk in &spec.data_blocks {
            assert_eq!(
                blk.atom.kind,
                AtomKind::ScaledLasso { alpha: 0.5, kappa: 1.0, q: 2.0 }
            );
        }
    }

    #[test]
    fn owen_build() {
        let (x, y) = toy_xy(5, 3, 5);
        let params = ModelParams {
            rho1: Some(1.345),
            rho2: Some(1.0),
            alpha1: Some(0.5),
            ..Default::default()
        };
        let spec = build_model("owen", &params, &x, &y).unwrap();
        assert_eq!(spec.n_blocks(), 5);
        assert_eq!(spec.p_blocks(), 3);
        assert_eq!(
            spec.data_blocks[0].atom.kind,
            AtomKind::Huber { alpha: 5.0, rho: 1.345, q: 2.0 }
        );
        assert_eq!(
            spec.penalty_blocks[0].atom.kind,
            AtomKind::BerhuStd { alpha: 3.0 / 0.5, rho: 1.0 }
        );
        assert_eq!(spec.penalty_blocks[0].atom.scale, 0.5);
        assert!(matches!(spec.sigma_coupling, ScaleCoupling::GroupAverage(_)));
    }

    #[test]
    fn owen_objective_matches_display() {
        // objective should equal
        // sum_i persp(h_rho1 + n)(sigma, x_i b - y_i)
        //   + alpha1 sum_i persp(b_rho2 + p/alpha1)(tau, beta_i)
        let (x, y) = toy_xy(4, 2, 6);
        let n = 4.0;
        let params = ModelParams {
            rho1: Some(1.0),
            rho2: Some(1.0),
            alpha1: Some(2.0),
            ..Default::default()
        };
        let spec = build_model("owen", &params, &x, &y).unwrap();
        let b = DVector::from_vec(vec![0.3, -0.2]);
        let sigma = 0.8;
        let tau = 0.5;
        let s = DVector::from_element(4, sigma);
        let t = DVector::from_element(2, tau);
        let got = evaluate_objective(&spec, &s, &t, &b, 1e-9);

        let huber = |xi: f64| if xi.abs() <= 1.0 { xi.abs().powi(2) / 2.0 } else { xi.abs() - 0.5 };
        let berhu = |xi: f64| if xi.abs() <= 1.0 { xi.abs() } else { (xi * xi + 1.0) / 2.0 };
        let mut want = 0.0;
        for i in 0..4 {
            let r = (x.row(i) * &b)[(0, 0)] - y[i];
            want += sigma * (huber(r / sigma) + n);
        }
        for i in 0..2 {
            // alpha1 * tau * (berhu(b_i/tau) + p/alpha1)
            want += 2.0 * tau * (berhu(b[i] / tau) + 2.0 / 2.0);
        }
        assert_abs_diff_eq!(got, want, epsilon = 1e-10);
    }

    #[test]
    fn fused_lasso_stacking() {
        let (x, y) = toy_xy(4, 3, 7);
        let params = ModelParams {
            alpha1: Some(0.5),
            alpha2: Some(0.5),
            ..Default::default()
        };
        let spec = build_model("fused_lasso", &params, &x, &y).unwrap();
        let stacked = assemble_stacked(&spec).unwrap();
        assert_eq!(stacked.a.nrows(), 4 + 2);
        assert_eq!(stacked.a.row(4).iter().cloned().collect::<Vec<_>>(), vec![-1.0, 1.0, 0.0]);
        assert_eq!(stacked.a.row(5).iter().cloned().collect::<Vec<_>>(), vec![0.0, -1.0, 1.0]);
        assert_eq!(stacked.w.rows(4, 2), DVector::zeros(2));
    }

    #[test]
    fn stacking_round_trip() {
        let (x, y) = toy_xy(6, 4, 8);
        let params = ModelParams {
            rho1: Some(1.0),
            rho2: Some(1.0),
            alpha1: Some(1.0),
            ..Default::default()
        };
        let spec = build_model("owen", &params, &x, &y).unwrap();
        let stacked = assemble_stacked(&spec).unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.25]);
        let ab = &stacked.a * &b;
        for &(row0, len, kind) in &stacked.row_map {
            let slice = ab.rows(row0, len).clone_owned();
            let direct = match kind {
                BlockKind::Data(i) => &spec.data_blocks[i].x * &b,
                BlockKind::Penalty(i) => spec.penalty_blocks[i].op.apply(&b),
            };
            assert_eq!(slice, direct);
        }
    }

    #[test]
    fn validate_catches_errors() {
        let (x, y) = toy_xy(5, 3, 9);
        let params = ModelParams { alpha1: Some(1.0), ..Default::default() };
        let mut spec = build_model("lasso", &params, &x, &y).unwrap();
        assert!(validate_spec(&spec).is_empty());

        spec.data_blocks[0].y = DVector::zeros(4);
        assert_eq!(validate_spec(&spec).len(), 1);

        let mut spec2 = build_model("lasso", &params, &x, &y).unwrap();
        spec2.theta = Some(SeparablePenalty::L1 { alpha1: -1.0 });
        assert_eq!(validate_spec(&spec2).len(), 1);
    }

    #[test]
    fn unknown_model_and_missing_params() {
        let (x, y) = toy_xy(3, 2, 10);
        assert!(matches!(
            build_model("nope", &ModelParams::default(), &x, &y),
            Err(ModelError::UnknownModel(_))
        ));
        assert!(matches!(
            build_model("lasso", &ModelParams::default(), &x, &y),
            Err(ModelError::MissingParam { .. })
        ));
        let bad = ModelParams {
            alpha1: Some(1.0),
            groups: Some(vec![vec![0, 1]]),
            ..Default::default()
        };
        assert!(matches!(
            build_model("het_scaled_lasso", &bad, &x, &y),
            Err(ModelError::Partition(_))
        ));
    }

    #[test]
    fn natural_lasso_build() {
        let (x, y) = toy_xy(5, 3, 11);
        let params = ModelParams { alpha: Some(0.4), ..Default::default() };
        let spec = build_model("natural_lasso", &params, &x, &y).unwrap();
        assert_eq!(spec.p_blocks(), 1);
        assert!(matches!(spec.tau_coupling, ScaleCoupling::NaturalLassoBarrier(_)));
        let stacked = assemble_stacked(&spec).unwrap();
        assert_eq!(stacked.a.nrows(), 10);
    }
}
