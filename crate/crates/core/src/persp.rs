//! Perspective functions of the loss/penalty family and their proximity
//! operators in closed form, plus a generic radial fallback that reduces
//! the computation to a 2-D projection.
//!
//! Each atom is a convex function phi on a block together with the
//! machinery to evaluate its perspective
//! `(sigma, x) -> sigma * phi(x / sigma)` (extended by the recession
//! function at sigma = 0 and by +inf for sigma < 0) and to apply
//! `prox_{gamma * scale * persp(phi)}`.

use crate::convex::{project_epi_region_2d, solve_depressed_cubic, solve_monotone_root};
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AtomError {
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("prox root search failed: {0}")]
    Root(#[from] crate::convex::ConvexError),
}

/// The convex function underlying one perspective atom.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomKind {
    /// `alpha + ||x||^q / kappa`
    ScaledLasso { alpha: f64, kappa: f64, q: f64 },
    /// Huber-type: `alpha + ||x||^q/q` near zero, slope `rho` in the tails.
    Huber { alpha: f64, rho: f64, q: f64 },
    /// Berhu-type: `alpha + kappa ||x|| + d_C^q/(q rho^{q*-1})`, C = B(0;rho).
    Berhu { alpha: f64, rho: f64, kappa: f64, q: f64 },
    /// Berhu with `kappa = 1`, `q = 2` (cubic closed form).
    BerhuStd { alpha: f64, rho: f64 },
    /// `alpha + max(||x|| - eps, 0)`
    Vapnik { alpha: f64, eps: f64 },
    /// `weight * ||x||^2`; weight 0 is the zero function.
    PlainSqL2 { weight: f64 },
    /// `weight * ||x||_1`; positively homogeneous, so the perspective is
    /// the same function with a nonnegativity constraint on sigma.
    L1 { weight: f64 },
}

/// One perspective term of the objective: an outer multiplier times the
/// perspective of `kind`, acting on a block of dimension `dim`.
#[derive(Debug, Clone)]
pub struct PerspectiveAtom {
    pub kind: AtomKind,
    pub dim: usize,
    pub scale: f64,
}

/// Output of a perspective prox evaluation.
#[derive(Debug, Clone)]
pub struct ProxResult {
    pub sigma: f64,
    pub x: DVector<f64>,
    /// Which published case of the piecewise formula fired.
    pub case_id: u8,
    /// Residual of the inner scalar root equation, when one was solved.
    pub root_residual: Option<f64>,
}

const MAX_QSTAR: f64 = 10.0;

fn qstar_of(q: f64) -> f64 {
    q / (q - 1.0)
}

impl AtomKind {
    fn validate(&self) -> Result<(), AtomError> {
        let check_q = |q: f64| -> Result<(), AtomError> {
            if !(q > 1.0) {
                return Err(AtomError::Parameter(format!("q = {q} must exceed 1")));
            }
            let qs = qstar_of(q);
            if qs > MAX_QSTAR {
                return Err(AtomError::Parameter(format!(
                    "conjugate exponent q* = {qs} exceeds {MAX_QSTAR}"
                )));
            }
            Ok(())
        };
        let pos = |name: &str, v: f64| -> Result<(), AtomError> {
            if v > 0.0 {
                Ok(())
            } else {
                Err(AtomError::Parameter(format!("{name} = {v} must be positive")))
            }
        };
        match *self {
            AtomKind::ScaledLasso { alpha, kappa, q } => {
                if alpha < 0.0 {
                    return Err(AtomError::Parameter(format!("alpha = {alpha} is negative")));
                }
                pos("kappa", kappa)?;
                check_q(q)
            }
            AtomKind::Huber { alpha, rho, q } => {
                pos("alpha", alpha)?;
                pos("rho", rho)?;
                check_q(q)
            }
            AtomKind::Berhu { alpha, rho, kappa, q } => {
                pos("alpha", alpha)?;
                pos("rho", rho)?;
                pos("kappa", kappa)?;
                check_q(q)
            }
            AtomKind::BerhuStd { alpha, rho } => {
                pos("alpha", alpha)?;
                pos("rho", rho)
            }
            AtomKind::Vapnik { alpha, eps } => {
                pos("alpha", alpha)?;
                pos("eps", eps)
            }
            AtomKind::PlainSqL2 { weight } | AtomKind::L1 { weight } => {
                if weight < 0.0 {
                    Err(AtomError::Parameter(format!("weight = {weight} is negative")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl PerspectiveAtom {
    pub fn new(kind: AtomKind, dim: usize) -> Result<Self, AtomError> {
        kind.validate()?;
        Ok(Self { kind, dim, scale: 1.0 })
    }

    /// Multiplies the whole perspective term by `c > 0`.
    pub fn with_scale(mut self, c: f64) -> Result<Self, AtomError> {
        if !(c > 0.0) {
            return Err(AtomError::Parameter(format!("scale = {c} must be positive")));
        }
        self.scale = c;
        Ok(self)
    }

    pub fn qstar(&self) -> Option<f64> {
        match self.kind {
            AtomKind::ScaledLasso { q, .. }
            | AtomKind::Huber { q, .. }
            | AtomKind::Berhu { q, .. } => Some(qstar_of(q)),
            AtomKind::BerhuStd { .. } => Some(2.0),
            _ => None,
        }
    }

    /// Conjugate of the underlying even scalar profile, for radial atoms.
    pub fn phi_star_1d(&self, nu: f64) -> f64 {
        match self.kind {
            AtomKind::ScaledLasso { alpha, kappa, q } => {
                let qs = qstar_of(q);
                let rho = (kappa / q).powf(qs - 1.0);
                rho * nu.abs().powf(qs) / qs - alpha
            }
            AtomKind::Huber { alpha, rho, q } => {
                let qs = qstar_of(q);
                if nu.abs() > rho {
                    f64::INFINITY
                } else {
                    nu.abs().powf(qs) / qs - alpha
                }
            }
            AtomKind::Berhu { alpha, rho, kappa, q } => {
                let qs = qstar_of(q);
                let d = (nu.abs() - kappa).max(0.0);
                rho * (d + d.powf(qs) / qs) - alpha
            }
            AtomKind::BerhuStd { alpha, rho } => {
                let d = (nu.abs() - 1.0).max(0.0);
                rho * (d + d * d / 2.0) - alpha
            }
            AtomKind::Vapnik { alpha, eps } => {
                if nu.abs() > 1.0 {
                    f64::INFINITY
                } else {
                    eps * nu.abs() - alpha
                }
            }
            AtomKind::PlainSqL2 { weight } => {
                if weight == 0.0 {
                    if nu == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    nu * nu / (4.0 * weight)
                }
            }
            AtomKind::L1 { .. } => f64::NAN,
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, AtomKind::L1 { .. })
    }

    /// Perspective evaluation, including the outer multiplier.
    pub fn eval(&self, sigma: f64, x: &DVector<f64>) -> f64 {
        self.scale * self.eval_unit(sigma, x)
    }

    fn eval_unit(&self, sigma: f64, x: &DVector<f64>) -> f64 {
        if sigma < 0.0 {
            return f64::INFINITY;
        }
        let nx = x.norm();
        match self.kind {
            AtomKind::ScaledLasso { alpha, kappa, q } => {
                if sigma > 0.0 {
                    alpha * sigma + nx.powf(q) / (kappa * sigma.powf(q - 1.0))
                } else if nx == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            AtomKind::Huber { alpha, rho, q } => {
                let qs = qstar_of(q);
                if sigma > 0.0 {
                    if nx > sigma * rho.powf(qs / q) {
                        (alpha - rho.powf(qs) / qs) * sigma + rho * nx
                    } else {
                        alpha * sigma + nx.powf(q) / (q * sigma.powf(q - 1.0))
                    }
                } else {
                    rho * nx
                }
            }
            AtomKind::Berhu { alpha, rho, kappa, q } => {
                let qs = qstar_of(q);
                if sigma > 0.0 {
                    if nx > rho * sigma {
                        alpha * sigma
                            + kappa * nx
                            + sigma * (nx / sigma - rho).powf(q) / (q * rho.powf(qs - 1.0))
                    } else {
                        alpha * sigma + kappa * nx
                    }
                } else if nx == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            AtomKind::BerhuStd { alpha, rho } => {
                if sigma > 0.0 {
                    if nx > sigma * rho {
                        alpha * sigma + (nx * nx + sigma * sigma * rho * rho) / (2.0 * rho * sigma)
                    } else {
                        alpha * sigma + nx
                    }
                } else if nx == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            AtomKind::Vapnik { alpha, eps } => alpha * sigma + (nx - eps * sigma).max(0.0),
            AtomKind::PlainSqL2 { weight } => {
                if weight == 0.0 {
                    0.0
                } else if sigma > 0.0 {
                    weight * nx * nx / sigma
                } else if nx == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            AtomKind::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    /// `prox_{gamma * scale * persp(phi)}(sigma, x)`.
    pub fn prox(&self, gamma: f64, sigma: f64, x: &DVector<f64>) -> Result<ProxResult, AtomError> {
        debug_assert!(gamma > 0.0);
        let g = gamma * self.scale;
        match self.kind {
            AtomKind::ScaledLasso { alpha, kappa, q } => prox_scaled_lasso(alpha, kappa, q, g, sigma, x),
            AtomKind::Huber { alpha, rho, q } => prox_huber(alpha, rho, q, g, sigma, x),
            AtomKind::Berhu { alpha, rho, kappa, q } => prox_berhu(alpha, rho, kappa, q, g, sigma, x),
            AtomKind::BerhuStd { alpha, rho } => prox_berhu_std(alpha, rho, g, sigma, x),
            AtomKind::Vapnik { alpha, eps } => prox_vapnik(alpha, eps, g, sigma, x),
            AtomKind::PlainSqL2 { weight } => {
                if weight == 0.0 {
                    Ok(ProxResult {
                        sigma: sigma.max(0.0),
                        x: x.clone(),
                        case_id: 0,
                        root_residual: None,
                    })
                } else {
                    prox_scaled_lasso(0.0, 1.0 / weight, 2.0, g, sigma, x)
                }
            }
            AtomKind::L1 { weight } => {
                let thr = g * weight;
                Ok(ProxResult {
                    sigma: sigma.max(0.0),
                    x: x.map(|v| {
                        if v > thr {
                            v - thr
                        } else if v < -thr {
                            v + thr
                        } else {
                            0.0
                        }
                    }),
                    case_id: 0,
                    root_residual: None,
                })
            }
        }
    }

    /// Generic prox for radial atoms through the 2-D projection; used as
    /// the independent reference for the closed forms and as the runtime
    /// route for atoms without one.
    pub fn prox_radial_generic(
        &self,
        gamma: f64,
        sigma: f64,
        x: &DVector<f64>,
    ) -> Result<ProxResult, AtomError> {
        let g = gamma * self.scale;
        prox_radial_generic(|nu| self.phi_star_1d(nu), g, sigma, x)
    }
}

fn shrink(x: &DVector<f64>, factor_num: f64, nx: f64) -> DVector<f64> {
    // returns (1 - factor_num/||x||) x, assuming factor_num <= ||x||
    x * (1.0 - factor_num / nx)
}

fn prox_scaled_lasso(
    alpha: f64,
    kappa: f64,
    q: f64,
    g: f64,
    sigma: f64,
    x: &DVector<f64>,
) -> Result<ProxResult, AtomError> {
    let qs = qstar_of(q);
    let rho = (kappa / q).powf(qs - 1.0);
    let nx = x.norm();
    if qs * g.powf(qs - 1.0) * sigma + rho * nx.powf(qs) <= qs * g.powf(qs) * alpha {
        return Ok(ProxResult {
            sigma: 0.0,
            x: DVector::zeros(x.len()),
            case_id: 2,
            root_residual: None,
        });
    }
    if nx == 0.0 {
        // the root equation degenerates to t = 0
        return Ok(ProxResult {
            sigma: sigma - g * alpha,
            x: DVector::zeros(x.len()),
            case_id: 1,
            root_residual: None,
        });
    }
    let a = qs * (sigma - g * alpha) / (g * rho);
    let b = qs / (rho * rho);
    let c = qs * nx / (g * rho * rho);
    let t = if q == 2.0 {
        solve_depressed_cubic(a + b, -c)
    } else {
        solve_monotone_root(
            |t| t.powf(2.0 * qs - 1.0) + a * t.powf(qs - 1.0) + b * t - c,
            0.0,
            nx / g + 1.0,
            1e-12 * c.max(1.0),
        )?
    };
    let res = t.powf(2.0 * qs - 1.0) + a * t.powf(qs - 1.0) + b * t - c;
    Ok(ProxResult {
        sigma: sigma + g * (rho * t.powf(qs) / qs - alpha),
        x: shrink(x, g * t, nx),
        case_id: 1,
        root_residual: Some(res),
    })
}

fn prox_huber(
    alpha: f64,
    rho: f64,
    q: f64,
    g: f64,
    sigma: f64,
    x: &DVector<f64>,
) -> Result<ProxResult, AtomError> {
    let qs = qstar_of(q);
    let nx = x.norm();
    let zeros = || DVector::zeros(x.len());
    // (i)
    if nx <= g * rho && nx.powf(qs) <= g.powf(qs) * qs * (alpha - sigma / g) {
        return Ok(ProxResult { sigma: 0.0, x: zeros(), case_id: 1, root_residual: None });
    }
    if nx == 0.0 {
        // remaining x = 0 case: sigma > g * phi(0) = g * alpha
        return Ok(ProxResult {
            sigma: sigma - g * alpha,
            x: zeros(),
            case_id: 2,
            root_residual: None,
        });
    }
    // (ii)
    if sigma <= g * (alpha - rho.powf(qs) / qs) && nx > g * rho {
        return Ok(ProxResult {
            sigma: 0.0,
            x: shrink(x, g * rho, nx),
            case_id: 2,
            root_residual: None,
        });
    }
    // (iii)
    let ray = g * (rho + rho.powf(qs - 1.0) * (sigma / g - alpha) + rho.powf(2.0 * qs - 1.0) / qs);
    if sigma > g * (alpha - rho.powf(qs) / qs) && nx >= ray {
        return Ok(ProxResult {
            sigma: sigma + g * (rho.powf(qs) / qs - alpha),
            x: shrink(x, g * rho, nx),
            case_id: 3,
            root_residual: None,
        });
    }
    // (iv)
    if qs * g.powf(qs - 1.0) * sigma + nx.powf(qs) <= qs * g.powf(qs) * alpha {
        return Ok(ProxResult { sigma: 0.0, x: zeros(), case_id: 4, root_residual: None });
    }
    let t = if q == 2.0 {
        solve_depressed_cubic(2.0 * (sigma - g * alpha) / g + 2.0, -2.0 * nx / g)
    } else {
        let f = |t: f64| {
            g * t.powf(2.0 * qs - 1.0) + qs * (sigma - g * alpha) * t.powf(qs - 1.0) + g * qs * t
                - qs * nx
        };
        solve_monotone_root(f, 0.0, nx / g + 1.0, 1e-12 * (qs * nx).max(1.0))?
    };
    let res = g * t.powf(2.0 * qs - 1.0) + qs * (sigma - g * alpha) * t.powf(qs - 1.0)
        + g * qs * t
        - qs * nx;
    Ok(ProxResult {
        sigma: sigma + g * (t.powf(qs) / qs - alpha),
        x: shrink(x, g * t, nx),
        case_id: 4,
        root_residual: Some(res),
    })
}

fn berhu_delta(mu: f64, kappa: f64, qs: f64) -> f64 {
    let d = (mu.abs() - kappa).max(0.0);
    d + d.powf(qs) / qs
}

fn prox_berhu(
    alpha: f64,
    rho: f64,
    kappa: f64,
    q: f64,
    g: f64,
    sigma: f64,
    x: &DVector<f64>,
) -> Result<ProxResult, AtomError> {
    let qs = qstar_of(q);
    let nx = x.norm();
    let zeros = || DVector::zeros(x.len());
    // (i)
    if berhu_delta(nx / g, kappa, qs) <= (alpha - sigma / g) / rho {
        return Ok(ProxResult { sigma: 0.0, x: zeros(), case_id: 1, root_residual: None });
    }
    // root case
    if nx > g * kappa + rho * (sigma - g * alpha) {
        if nx == 0.0 {
            return Ok(ProxResult {
                sigma: sigma - g * alpha,
                x: zeros(),
                case_id: 2,
                root_residual: None,
            });
        }
        let f = |t: f64| {
            let d = t - kappa;
            rho * (sigma - g * alpha + g * rho * (d + d.powf(qs) / qs)) * (1.0 + d.powf(qs - 1.0))
                + g * t
                - nx
        };
        let t = solve_monotone_root(f, kappa, kappa + nx / g + 1.0, 1e-12 * nx.max(1.0))?;
        return Ok(ProxResult {
            sigma: sigma - g * alpha + g * rho * berhu_delta(t, kappa, qs),
            x: shrink(x, g * t, nx),
            case_id: 2,
            root_residual: Some(f(t)),
        });
    }
    // (iii)
    if g * kappa <= nx && nx <= g * kappa + rho * (sigma - g * alpha) {
        return Ok(ProxResult {
            sigma: sigma - g * alpha,
            x: shrink(x, g * kappa, nx),
            case_id: 3,
            root_residual: None,
        });
    }
    // (iv): sigma > g*alpha and ||x|| < g*kappa
    Ok(ProxResult {
        sigma: sigma - g * alpha,
        x: zeros(),
        case_id: 4,
        root_residual: None,
    })
}

fn prox_berhu_std(
    alpha: f64,
    rho: f64,
    g: f64,
    sigma: f64,
    x: &DVector<f64>,
) -> Result<ProxResult, AtomError> {
    let nx = x.norm();
    let zeros = || DVector::zeros(x.len());
    if (nx * nx - g * g).max(0.0) <= 2.0 * g * (g * alpha - sigma) / rho {
        return Ok(ProxResult { sigma: 0.0, x: zeros(), case_id: 1, root_residual: None });
    }
    if sigma > g * alpha && nx <= g {
        return Ok(ProxResult {
            sigma: sigma - g * alpha,
            x: zeros(),
            case_id: 2,
            root_residual: None,
        });
    }
    if sigma > g * alpha && g < nx && nx <= g + rho * (sigma - g * alpha) {
        return Ok(ProxResult {
            sigma: sigma - g * alpha,
            x: shrink(x, g, nx),
            case_id: 3,
            root_residual: None,
        });
    }
    let p = 2.0 * (g + rho * (sigma - g * alpha)) / (g * rho * rho) - 1.0;
    let c = 2.0 * nx / (g * rho * rho);
    let t = solve_depressed_cubic(p, -c);
    let res = t * t * t + p * t - c;
    Ok(ProxResult {
        sigma: sigma - g * alpha + g * rho * (t * t - 1.0) / 2.0,
        x: shrink(x, g * t, nx),
        case_id: 4,
        root_residual: Some(res),
    })
}

fn prox_vapnik(
    alpha: f64,
    eps: f64,
    g: f64,
    sigma: f64,
    x: &DVector<f64>,
) -> Result<ProxResult, AtomError> {
    let nx = x.norm();
    let zeros = || DVector::zeros(x.len());
    // (i)
    if sigma + eps * nx <= g * alpha && nx <= g {
        return Ok(ProxResult { sigma: 0.0, x: zeros(), case_id: 1, root_residual: None });
    }
    // (ii)
    if sigma <= g * (alpha - eps) && nx > g {
        return Ok(ProxResult {
            sigma: 0.0,
            x: shrink(x, g, nx),
            case_id: 2,
            root_residual: None,
        });
    }
    // (iii)
    if sigma > g * (alpha - eps) && nx >= eps * sigma + g * (1.0 + eps * (eps - alpha)) {
        return Ok(ProxResult {
            sigma: sigma + g * (eps - alpha),
            x: shrink(x, g, nx),
            case_id: 3,
            root_residual: None,
        });
    }
    // (v) before (iv) so that x = 0 never divides by the norm
    if sigma >= g * alpha && nx <= eps * (sigma - g * alpha) {
        return Ok(ProxResult {
            sigma: sigma - g * alpha,
            x: x.clone(),
            case_id: 5,
            root_residual: None,
        });
    }
    // (iv)
    let lam = (sigma + eps * nx - g * alpha) / (1.0 + eps * eps);
    Ok(ProxResult {
        sigma: lam,
        x: x * (lam * eps / nx),
        case_id: 4,
        root_residual: None,
    })
}

/// Prox of `gamma * persp(phi)` for `phi = phi_1d(|| . ||)` with an even
/// scalar profile supplied through its conjugate.
pub fn prox_radial_generic<F: Fn(f64) -> f64>(
    phi_star: F,
    g: f64,
    sigma: f64,
    x: &DVector<f64>,
) -> Result<ProxResult, AtomError> {
    let nx = x.norm();
    let v = phi_star(nx / g);
    if v.is_finite() && sigma + g * v <= 0.0 {
        return Ok(ProxResult {
            sigma: 0.0,
            x: DVector::zeros(x.len()),
            case_id: 1,
            root_residual: None,
        });
    }
    let phi0 = -phi_star(0.0);
    if nx == 0.0 {
        if sigma > g * phi0 {
            return Ok(ProxResult {
                sigma: sigma - g * phi0,
                x: DVector::zeros(x.len()),
                case_id: 2,
                root_residual: None,
            });
        }
        // sigma <= g*phi(0) = -g*phi*(0) means the threshold case applies
        return Ok(ProxResult {
            sigma: 0.0,
            x: DVector::zeros(x.len()),
            case_id: 1,
            root_residual: None,
        });
    }
    let (chi, nu) = project_epi_region_2d(&phi_star, sigma / g, nx / g)?;
    Ok(ProxResult {
        sigma: sigma - g * chi,
        x: x * (1.0 - g * nu / nx),
        case_id: 3,
        root_residual: None,
    })
}
