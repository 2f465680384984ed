//! Douglas-Rachford splitting for the stacked problem.

use crate::convex::ConvexError;
use crate::model::{evaluate_objective, BlockKind, ProblemSpec, StackedProblem};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("iterate became non-finite at iteration {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Atom(#[from] crate::persp::AtomError),
    #[error("gram factorization failed")]
    Factorization,
}

/// Cholesky factor of `Id + A A^T` together with `A`, supporting
/// application of `Q = A^T (Id + A A^T)^{-1}`.
pub struct GramFactor {
    a: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

pub fn factorize_gram(a: &DMatrix<f64>) -> Result<GramFactor, SolverError> {
    let m = a.nrows();
    let gram = DMatrix::identity(m, m) + a * a.transpose();
    let chol = Cholesky::new(gram).ok_or(SolverError::Factorization)?;
    Ok(GramFactor { a: a.clone(), chol })
}

impl GramFactor {
    /// `Q q = A^T (Id + A A^T)^{-1} q`
    pub fn apply_q(&self, q: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * self.chol.solve(q)
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub gamma: f64,
    pub mu: f64,
    pub eps_tol: f64,
    pub max_iter: usize,
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gamma: 1.0,
            mu: 1.9,
            eps_tol: 1e-4,
            max_iter: 100_000,
            record_history: false,
        }
    }
}

/// The auxiliary iterates, kept so a path run can warm-start from a
/// previous solve.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub xs: DVector<f64>,
    pub xt: DVector<f64>,
    pub xb: DVector<f64>,
    pub hs: DVector<f64>,
    pub ht: DVector<f64>,
    pub hb: DVector<f64>,
}

impl SolverState {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        SolverState {
            xs: DVector::zeros(spec.n_blocks()),
            xt: DVector::zeros(spec.p_blocks()),
            xb: DVector::zeros(spec.p),
            hs: DVector::zeros(spec.n_blocks()),
            ht: DVector::zeros(spec.p_blocks()),
            hb: DVector::zeros(spec.total_rows()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub b: DVector<f64>,
    pub s: DVector<f64>,
    pub t: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
}

/// The monitored primal triple produced by one iteration.
struct Primal {
    s: DVector<f64>,
    t: DVector<f64>,
    b: DVector<f64>,
}

fn dr_step(
    spec: &ProblemSpec,
    stacked: &StackedProblem,
    opts: &SolverOptions,
    st: &mut SolverState,
) -> Result<Primal, SolverError> {
    let gamma = opts.gamma;
    let mu = opts.mu;

    let qs = &st.xs - &st.hs;
    let qt = &st.xt - &st.ht;
    let qb = &stacked.a * &st.xb - &st.hb;

    let s = &st.xs - &qs / 2.0;
    let t = &st.xt - &qt / 2.0;
    let b = &st.xb - stacked.gram.apply_q(&qb);

    let zs = spec.sigma_coupling.prox(gamma, &(2.0 * &s - &st.xs))?;
    let zt = spec.tau_coupling.prox(gamma, &(2.0 * &t - &st.xt))?;
    let zb_arg = 2.0 * &b - &st.xb;
    let zb = match &spec.theta {
        Some(theta) => theta.prox(gamma, &zb_arg)?,
        None => zb_arg,
    };

    st.xs += mu * (&zs - &s);
    st.xt += mu * (&zt - &t);
    st.xb += mu * (&zb - &b);

    let mut cb = DVector::zeros(stacked.a.nrows());
    let mut db = DVector::zeros(stacked.a.nrows());
    let mut ds = DVector::zeros(spec.n_blocks());
    let mut dt = DVector::zeros(spec.p_blocks());
    for &(row0, len, kind) in &stacked.row_map {
        match kind {
            BlockKind::Data(i) => {
                let blk = &spec.data_blocks[i];
                let ci = &blk.x * &b;
                let arg = 2.0 * &ci - st.hb.rows(row0, len).clone_owned() - &blk.y;
                let pr = blk.atom.prox(gamma, 2.0 * s[i] - st.hs[i], &arg)?;
                ds[i] = pr.sigma;
                db.rows_mut(row0, len).copy_from(&(pr.x + &blk.y));
                cb.rows_mut(row0, len).copy_from(&ci);
            }
            BlockKind::Penalty(i) => {
                let blk = &spec.penalty_blocks[i];
                let ci = blk.op.apply(&b);
                let arg = 2.0 * &ci - st.hb.rows(row0, len).clone_owned();
                let pr = blk.atom.prox(gamma, 2.0 * t[i] - st.ht[i], &arg)?;
                dt[i] = pr.sigma;
                db.rows_mut(row0, len).copy_from(&pr.x);
                cb.rows_mut(row0, len).copy_from(&ci);
            }
        }
    }

    st.hs += mu * (&ds - &s);
    st.ht += mu * (&dt - &t);
    st.hb += mu * (&db - &cb);

    Ok(Primal { s, t, b })
}

/// Runs the iteration until the change in `b` drops below `eps_tol`
/// and the change in the scale vectors below ten times that, or
/// `max_iter` is reached. Indicator couplings are enforced exactly on
/// the returned scale vectors.
pub fn solve(
    spec: &ProblemSpec,
    stacked: &StackedProblem,
    opts: &SolverOptions,
    warm: Option<SolverState>,
) -> Result<(Solution, SolverState), SolverError> {
    let mut st = warm.unwrap_or_else(|| SolverState::zeros(spec));
    let mut history = Vec::new();
    let mut prev: Option<Primal> = None;
    let mut converged = false;
    let mut iters = 0;
    for k in 0..opts.max_iter {
        let cur = dr_step(spec, stacked, opts, &mut st)?;
        iters = k + 1;
        if cur.b.iter().chain(cur.s.iter()).chain(cur.t.iter()).any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite(iters));
        }
        if let Some(p) = &prev {
            let rb = (&cur.b - &p.b).norm();
            let rst = (&cur.s - &p.s).norm() + (&cur.t - &p.t).norm();
            if opts.record_history {
                history.push(rb);
            }
            if rb < opts.eps_tol && rst < 10.0 * opts.eps_tol {
                converged = true;
            }
        }
        prev = Some(cur);
        if converged {
            break;
        }
    }
    let cur = prev.expect("max_iter must be positive");
    let mut s = cur.s.clone();
    let mut t = cur.t.clone();
    if let Some(ps) = spec.sigma_coupling.project(&s) {
        s = ps;
    }
    if let Some(pt) = spec.tau_coupling.project(&t) {
        t = pt;
    }
    let objective = evaluate_objective(spec, &s, &t, &cur.b, 1e-6);
    Ok((
        Solution {
            b: cur.b,
            s,
            t,
            objective,
            iterations: iters,
            converged,
            residual_history: history,
        },
        st,
    ))
}
