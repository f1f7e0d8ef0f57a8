//! Layer-to-layer correction: error bookkeeping and the bounded velocity
//! solver.
//!
//! The solver computes the next layer's torch speed profile by minimizing
//!
//! ```text
//!     F(v) = ||Δh_d - f(v)||² + β ||D v||²     s.t.  v_min ≤ v ≤ v_max
//! ```
//!
//! where `f` applies the power-law deposition model per segment and `D` is
//! the (N-1)×N adjacent-difference matrix, so the second term penalizes
//! speed jumps between neighboring motion segments. `f` is a power law, not
//! an affine map, so the problem is a box-constrained nonlinear least
//! squares. It is solved with a projected Newton-type iteration in the
//! Gauss-Newton mold: variables pinned at a bound by the gradient sign are
//! frozen, the system on the free variables is tridiagonal (the residual
//! couples segments only through β·DᵀD) and solved in O(N), and candidate
//! steps are backtracked along the projection arc under an Armijo test.
//! Convergence is declared on the projected-gradient infinity norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelCoefficients, ProcessBounds};

/// Torch speed profile for one layer, mm/s per motion segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    pub layer_index: usize,
    pub v_t: Vec<f64>,
}

/// Per-segment height error of one layer, mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerError {
    pub layer_index: usize,
    pub e: Vec<f64>,
}

/// `e = measured - desired`, element-wise.
pub fn layer_error(measured: &[f64], desired: &[f64], layer_index: usize) -> Result<LayerError> {
    if measured.len() != desired.len() {
        return Err(Error::Shape(format!(
            "measured has {} segments, desired has {}",
            measured.len(),
            desired.len()
        )));
    }
    let e: Vec<f64> = measured
        .iter()
        .zip(desired)
        .map(|(m, d)| m - d)
        .collect();
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("layer error contains non-finite values".into()));
    }
    Ok(LayerError { layer_index, e })
}

/// Next-layer deposition target: nominal deposition minus the previous
/// layer's error.
pub fn corrected_target(dh_nom: &[f64], prev_error: &LayerError) -> Result<Vec<f64>> {
    if dh_nom.len() != prev_error.e.len() {
        return Err(Error::Shape(format!(
            "nominal deposition has {} segments, error has {}",
            dh_nom.len(),
            prev_error.e.len()
        )));
    }
    Ok(dh_nom
        .iter()
        .zip(&prev_error.e)
        .map(|(d, e)| d - e)
        .collect())
}

/// Smoothing weight from the largest tolerated adjacent-segment speed
/// change: `β = 1 / Δv_max²`.
pub fn default_beta(dv_t_max: f64) -> Result<f64> {
    if !(dv_t_max > 0.0) || !dv_t_max.is_finite() {
        return Err(Error::Domain(format!(
            "maximum speed change must be positive, got {dv_t_max}"
        )));
    }
    Ok(1.0 / (dv_t_max * dv_t_max))
}

/// Solver parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Smoothing weight on `||D v||²`.
    pub beta: f64,
    /// Maximum tolerated adjacent-segment speed change, mm/s.
    pub dv_t_max: f64,
    /// Convergence threshold on the projected-gradient infinity norm.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let dv_t_max = 2.0;
        SolverConfig {
            beta: default_beta(dv_t_max).unwrap(),
            dv_t_max,
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.dv_t_max > 0.0) {
            return Err(Error::Config(format!(
                "dv_t_max must be > 0, got {}",
                self.dv_t_max
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Where each segment's speed sits relative to the box at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundStatus {
    Lower,
    Free,
    Upper,
}

/// Solve outcome metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Objective value at the returned profile.
    pub objective: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit or the line search stalled
    /// before reaching `tolerance`.
    pub converged: bool,
    pub projected_gradient_norm: f64,
    /// Objective after the initial point and each accepted step.
    pub objective_history: Vec<f64>,
    pub bound_mask: Vec<BoundStatus>,
}

struct Objective<'a> {
    target: &'a [f64],
    model: &'a ModelCoefficients,
    beta: f64,
}

impl Objective<'_> {
    /// `F(cand) - F(v)` and a bound on its own rounding error.
    ///
    /// Evaluated difference-first — each term uses
    /// `x² - y² = (y - x)(x + y)` — so a decrement far below one ulp of
    /// the absolute objective is still resolved; that is what lets
    /// large-residual problems reach a 1e-8 projected-gradient tolerance.
    /// The noise bound tells the caller when even this evaluation can no
    /// longer distinguish the step from zero.
    fn value_delta(&self, v: &[f64], cand: &[f64]) -> (f64, f64) {
        let mut delta = 0.0;
        let mut noise = 0.0;
        for k in 0..v.len() {
            let fv = (self.model.b + self.model.a * v[k].ln()).exp();
            let fc = (self.model.b + self.model.a * cand[k].ln()).exp();
            let sum_side = 2.0 * self.target[k] - fc - fv;
            delta += (fv - fc) * sum_side;
            noise += (fv + fc) * sum_side.abs()
                + (fv - fc).abs() * (2.0 * self.target[k].abs() + fc + fv);
        }
        for k in 0..v.len().saturating_sub(1) {
            let dv = v[k] - v[k + 1];
            let dc = cand[k] - cand[k + 1];
            delta += self.beta * (dc - dv) * (dc + dv);
            noise += self.beta * (dc.abs() + dv.abs()) * ((dc + dv).abs() + (dc - dv).abs());
        }
        (delta, f64::EPSILON * noise)
    }

    /// Objective, gradient, and the per-segment residual curvature, in
    /// one pass.
    ///
    /// `curv` receives the exact signed second derivative of the residual
    /// term, `f'² - f''·r`; `gn` receives the Gauss-Newton part `f'²`.
    /// The exact curvature keeps local convergence quadratic — a plain
    /// Gauss-Newton diagonal converges only linearly near the optimum and
    /// stalls above a tight gradient tolerance once per-step objective
    /// decrements fall under f64 resolution. Individual `curv` entries can
    /// be negative at a legitimate interior minimum (the smoothing
    /// Laplacian carries them), so the caller must guard the assembled
    /// system's definiteness.
    fn value_grad(&self, v: &[f64], grad: &mut [f64], curv: &mut [f64], gn: &mut [f64]) -> f64 {
        let n = v.len();
        let mut obj = 0.0;
        for k in 0..n {
            let (f, fp) = self.model.eval_with_derivative(v[k]);
            let r = self.target[k] - f;
            obj += r * r;
            grad[k] = -2.0 * fp * r;
            // f'' = a (a - 1) f / v², positive: f is convex decreasing.
            let fpp = self.model.a * (self.model.a - 1.0) * f / (v[k] * v[k]);
            gn[k] = fp * fp;
            curv[k] = fp * fp - fpp * r;
        }
        // beta * DtD v contribution: (DtD v)_k is the discrete Laplacian
        // with free boundaries.
        for k in 0..n.saturating_sub(1) {
            let d = v[k] - v[k + 1];
            obj += self.beta * d * d;
            grad[k] += 2.0 * self.beta * d;
            grad[k + 1] -= 2.0 * self.beta * d;
        }
        obj
    }
}

/// Objective `F(v) = ||dh_d - f(v)||² + β ||D v||²` and its analytic
/// gradient at `v`. Exposed for solver validation and tuning diagnostics.
pub fn objective_and_gradient(
    dh_d: &[f64],
    model: &ModelCoefficients,
    beta: f64,
    v: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if dh_d.len() != v.len() {
        return Err(Error::Shape(format!(
            "target has {} segments, speeds have {}",
            dh_d.len(),
            v.len()
        )));
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("speeds must be positive".into()));
    }
    let objective = Objective {
        target: dh_d,
        model,
        beta,
    };
    let mut grad = vec![0.0; v.len()];
    let mut curv = vec![0.0; v.len()];
    let mut gn = vec![0.0; v.len()];
    let obj = objective.value_grad(v, &mut grad, &mut curv, &mut gn);
    Ok((obj, grad))
}

fn projected_gradient_norm(v: &[f64], grad: &[f64], lo: f64, hi: f64) -> f64 {
    v.iter()
        .zip(grad)
        .map(|(&vk, &gk)| {
            if vk <= lo {
                gk.min(0.0).abs()
            } else if vk >= hi {
                gk.max(0.0)
            } else {
                gk.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Solves the symmetric tridiagonal system in place; `diag` and `rhs` are
/// overwritten, `off[k]` couples unknowns k and k+1. Thomas elimination
/// doubles as a definiteness probe: all pivots of a symmetric positive
/// definite tridiagonal are positive, so a non-positive pivot reports
/// failure instead of producing a garbage direction.
fn solve_tridiagonal(diag: &mut [f64], off: &mut [f64], rhs: &mut [f64]) -> bool {
    let n = diag.len();
    const PIVOT_MIN: f64 = 1e-14;
    for k in 1..n {
        if diag[k - 1] <= PIVOT_MIN {
            return false;
        }
        let w = off[k - 1] / diag[k - 1];
        diag[k] -= w * off[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    if diag[n - 1] <= PIVOT_MIN {
        return false;
    }
    rhs[n - 1] /= diag[n - 1];
    for k in (0..n - 1).rev() {
        rhs[k] = (rhs[k] - off[k] * rhs[k + 1]) / diag[k];
    }
    true
}

/// Solves for the torch speed profile tracking `dh_d` inside the speed box.
///
/// The returned profile satisfies the bounds exactly. `v_init` seeds the
/// iteration; by default the separable solution (per-segment model
/// inversion of the height-clamped target) projected into the box is used,
/// which is already optimal when `beta = 0` and no bound binds.
///
/// Non-positive targets need no special casing: the residual term simply
/// pushes those segments toward the fastest speed (smallest deposit). Only
/// the default initialization clamps the target into the height range so
/// its logarithm exists.
pub fn solve_velocity_profile(
    dh_d: &[f64],
    model: &ModelCoefficients,
    bounds: &ProcessBounds,
    cfg: &SolverConfig,
    v_init: Option<&[f64]>,
) -> Result<(VelocityProfile, SolveDiagnostics)> {
    let n = dh_d.len();
    if n == 0 {
        return Err(Error::Shape("target vector is empty".into()));
    }
    if dh_d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("target vector contains non-finite values".into()));
    }
    cfg.validate()?;
    let model_checked = model.clone().validated()?;
    let model = &model_checked;
    let (lo, hi) = (bounds.v_t_min, bounds.v_t_max);

    let mut v: Vec<f64> = match v_init {
        Some(init) => {
            if init.len() != n {
                return Err(Error::Shape(format!(
                    "v_init has {} segments, target has {}",
                    init.len(),
                    n
                )));
            }
            init.iter().map(|&x| x.clamp(lo, hi)).collect()
        }
        None => dh_d
            .iter()
            .map(|&t| {
                let t = bounds.clamp_height(t);
                model.invert(t).map(|vk| vk.clamp(lo, hi))
            })
            .collect::<Result<_>>()?,
    };

    let objective = Objective {
        target: dh_d,
        model,
        beta: cfg.beta,
    };

    let mut grad = vec![0.0; n];
    let mut curv = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut frozen = vec![false; n];
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut step = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut cand = vec![0.0; n];

    // Variables an ulp-scale distance inside a bound with the gradient
    // pushing outward belong on the bound exactly; the move is a descent
    // step too small for the line search to price. Snapping keeps the
    // active-set tests exact and stops iterates crawling at a bound.
    let snap_tol = 1e-12 * (hi - lo);
    let snap_to_bounds = |v: &mut [f64], grad: &[f64]| -> bool {
        let mut snapped = false;
        for k in 0..v.len() {
            if v[k] > lo && v[k] - lo <= snap_tol && grad[k] >= 0.0 {
                v[k] = lo;
                snapped = true;
            } else if v[k] < hi && hi - v[k] <= snap_tol && grad[k] <= 0.0 {
                v[k] = hi;
                snapped = true;
            }
        }
        snapped
    };

    let mut obj = objective.value_grad(&v, &mut grad, &mut curv, &mut gn);
    if snap_to_bounds(&mut v, &grad) {
        obj = objective.value_grad(&v, &mut grad, &mut curv, &mut gn);
    }
    let mut history = vec![obj];
    let mut pg_norm = projected_gradient_norm(&v, &grad, lo, hi);
    let mut iterations = 0;
    let mut converged = pg_norm <= cfg.tolerance;

    const ARMIJO_C1: f64 = 1e-4;
    const ALPHA_MIN: f64 = 1e-16;

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;

        // Variables held at a bound by the gradient sign stay put this
        // iteration; the Newton system is assembled on the rest with
        // frozen rows replaced by identity.
        for k in 0..n {
            frozen[k] = (v[k] <= lo && grad[k] >= 0.0) || (v[k] >= hi && grad[k] <= 0.0);
        }
        let assemble = |residual_diag: &dyn Fn(usize) -> f64,
                            diag: &mut [f64],
                            off: &mut [f64],
                            step: &mut [f64],
                            rhs: &[f64]| {
            for k in 0..n {
                if frozen[k] {
                    diag[k] = 1.0;
                    step[k] = 0.0;
                } else {
                    // Laplacian degree of beta * DtD with free boundaries.
                    let degree = (k > 0) as u8 + (k + 1 < n) as u8;
                    diag[k] = residual_diag(k) + cfg.beta * degree as f64;
                    step[k] = rhs[k];
                }
            }
            for k in 0..n.saturating_sub(1) {
                off[k] = if frozen[k] || frozen[k + 1] {
                    0.0
                } else {
                    -cfg.beta
                };
            }
        };
        for k in 0..n {
            rhs[k] = -0.5 * grad[k];
        }
        // Exact curvature first; if the free-variable system turns out
        // indefinite (possible far from the optimum), retry with each
        // entry floored at its Gauss-Newton value, which is always
        // positive definite.
        assemble(&|k| curv[k], &mut diag, &mut off, &mut step, &rhs);
        if !solve_tridiagonal(&mut diag, &mut off, &mut step) {
            assemble(
                &|k| curv[k].max(gn[k]),
                &mut diag,
                &mut off,
                &mut step,
                &rhs,
            );
            let ok = solve_tridiagonal(&mut diag, &mut off, &mut step);
            debug_assert!(ok, "safeguarded system must be positive definite");
        }

        // Backtracking line search along the projection arc.
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= ALPHA_MIN {
            for k in 0..n {
                cand[k] = (v[k] + alpha * step[k]).clamp(lo, hi);
            }
            let dir_deriv: f64 = grad
                .iter()
                .zip(cand.iter().zip(&v))
                .map(|(g, (c, x))| g * (c - x))
                .sum();
            if dir_deriv < 0.0 {
                let (delta, noise) = objective.value_delta(&v, &cand);
                // At full step length, descent-within-rounding is enough:
                // this is the undamped Newton endgame, where the true
                // decrement can sit below what any evaluation resolves.
                let slack = if alpha == 1.0 { noise } else { 0.0 };
                if delta <= ARMIJO_C1 * dir_deriv + slack {
                    v.copy_from_slice(&cand);
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Newton direction gave no descent; retry once along the
            // projected steepest descent before giving up.
            let curvature = gn
                .iter()
                .zip(&curv)
                .fold(1e-12f64, |m, (g, c)| m.max(g.max(*c) + 2.0 * cfg.beta));
            let mut alpha = 1.0 / curvature;
            while alpha >= ALPHA_MIN {
                for k in 0..n {
                    cand[k] = (v[k] - alpha * grad[k]).clamp(lo, hi);
                }
                let dir_deriv: f64 = grad
                    .iter()
                    .zip(cand.iter().zip(&v))
                    .map(|(g, (c, x))| g * (c - x))
                    .sum();
                if dir_deriv < 0.0 && objective.value_delta(&v, &cand).0 <= ARMIJO_C1 * dir_deriv
                {
                    v.copy_from_slice(&cand);
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }

        obj = objective.value_grad(&v, &mut grad, &mut curv, &mut gn);
        if accepted && snap_to_bounds(&mut v, &grad) {
            obj = objective.value_grad(&v, &mut grad, &mut curv, &mut gn);
        }
        pg_norm = projected_gradient_norm(&v, &grad, lo, hi);
        if accepted {
            history.push(obj);
        }
        converged = pg_norm <= cfg.tolerance;
        if !accepted {
            // Stalled at numerical precision; stop and report honestly.
            break;
        }
    }

    let bound_mask: Vec<BoundStatus> = v
        .iter()
        .map(|&vk| {
            if vk <= lo {
                BoundStatus::Lower
            } else if vk >= hi {
                BoundStatus::Upper
            } else {
                BoundStatus::Free
            }
        })
        .collect();

    Ok((
        VelocityProfile {
            layer_index: 0,
            v_t: v,
        },
        SolveDiagnostics {
            objective: obj,
            iterations,
            converged,
            projected_gradient_norm: pg_norm,
            objective_history: history,
            bound_mask,
        },
    ))
}
