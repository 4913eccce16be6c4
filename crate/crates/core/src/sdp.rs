//! Elliptope SDP solvers.
//!
//! [`solve_bm`] minimizes an [`ObjectiveSpec`] over `{X ⪰ 0, diag(X) = 1}`
//! through the factorization `X = VVᵀ` with unit-norm rows of `V`: the PSD
//! constraint is absorbed by the Gram form and the diagonal constraint by
//! row normalization, leaving projected gradient descent on a product of
//! spheres. This is exactly the MAXCUT-SDP structure and scales to a few
//! thousand units.
//!
//! [`solve_reference`] is a small-n oracle: projected gradient on the full
//! matrix with an alternating-projection (Dykstra-corrected) step onto the
//! elliptope. It shares no code path with the factorized solver beyond the
//! objective definition.
//!
//! The operator-norm term (`q = ∞`) is optimized through a log-sum-exp
//! smoothing of the eigenvalues; reported objectives always use the exact
//! norm. An optional constraint `1ᵀX1 = c` is handled by a quadratic
//! penalty with an escalating weight schedule; the final infeasibility is
//! reported on the solution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::objective::ObjectiveSpec;
use crate::rng::substream;
use crate::spectra::{schatten_from_eigvals, sym_eigen_sorted};

/// Step-size rule for the factorized solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    /// Armijo backtracking: shrink by `shrink` until
    /// `f(V') <= f(V) - armijo * t * ‖grad‖²`.
    Backtracking { shrink: f64, armijo: f64 },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Factor rank; `None` picks `⌈√(2n)⌉+1` for pure trace objectives and
    /// full rank when Schatten or quadratic terms are present (their optima
    /// are full-rank interior points).
    pub rank: Option<usize>,
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Stationarity tolerance on the Riemannian gradient norm, relative to
    /// `1 + |objective|`.
    pub grad_tol: f64,
    /// Escalating penalty weights for the optional sum constraint.
    pub penalty_schedule: Vec<f64>,
    /// Smoothing temperature for the operator-norm term; `None` uses
    /// `1e-3 · √n`.
    pub smoothing_eps: Option<f64>,
    /// Random restarts (best objective wins).
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rank: None,
            max_iters: 4000,
            step_rule: StepRule::Backtracking { shrink: 0.5, armijo: 1e-4 },
            grad_tol: 1e-9,
            penalty_schedule: vec![1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6],
            smoothing_eps: None,
            restarts: 3,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if let Some(r) = self.rank {
            if r == 0 {
                return Err(Error::invalid("rank must be >= 1"));
            }
        }
        if self.grad_tol <= 0.0 {
            return Err(Error::invalid("grad_tol must be > 0"));
        }
        if let StepRule::Fixed(t) = self.step_rule {
            if t <= 0.0 {
                return Err(Error::invalid("fixed step must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterCapped,
}

/// A feasible point of the elliptope with solver diagnostics. `diag(X) = 1`
/// holds exactly by construction and `X ⪰ 0` exactly as a Gram matrix.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Factor with unit-norm rows; `X = VVᵀ`.
    pub factor: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// Exact objective value at `x` (unsmoothed, penalty excluded).
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// `|1ᵀX1 - c|` when a sum constraint was requested.
    pub sum_residual: Option<f64>,
}

impl Solution {
    /// Write `X` as a dense CSV matrix.
    pub fn write_matrix_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        write_matrix_csv(&self.x, path)
    }

    /// JSON diagnostics sidecar.
    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::json!({
            "objective": self.objective,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "status": match self.status { SolveStatus::Converged => "converged", SolveStatus::IterCapped => "iter-capped" },
            "rank": self.factor.ncols(),
            "sum_residual": self.sum_residual,
        })
    }
}

/// Dense CSV matrix writer shared by solution and design artifacts.
pub fn write_matrix_csv(m: &DMatrix<f64>, path: impl AsRef<std::path::Path>) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path.as_ref())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        writeln!(file, "{}", row.join(","))?;
    }
    Ok(())
}

fn default_eps(n: usize) -> f64 {
    1e-3 * (n as f64).sqrt()
}

fn spec_needs_full_rank(spec: &ObjectiveSpec) -> bool {
    spec.schatten_terms.iter().any(|(w, _)| *w > 0.0) || spec.quad_term.is_some()
}

fn default_rank(spec: &ObjectiveSpec, n: usize) -> usize {
    if spec_needs_full_rank(spec) {
        n
    } else {
        (((2 * n) as f64).sqrt().ceil() as usize + 1).min(n)
    }
}

/// Objective value and Euclidean gradient in the factor `V` (rows need not
/// be normalized; the formulas are evaluated as written). The operator-norm
/// term uses log-sum-exp smoothing at temperature `smoothing_eps`, so the
/// value is the smoothed surrogate that the gradient differentiates.
pub fn objective_and_gradient(
    v: &DMatrix<f64>,
    spec: &ObjectiveSpec,
    smoothing_eps: f64,
) -> Result<(f64, DMatrix<f64>)> {
    let (value, grad) = eval_factor(v, spec, smoothing_eps, 0.0)?;
    if !value.is_finite() {
        return Err(Error::numerical("objective is not finite"));
    }
    Ok((value, grad))
}

// Factor-space evaluation; `penalty_weight` adds w·(1ᵀX1 - c)² when the spec
// carries a sum constraint. Schatten terms go through the r×r Gram VᵀV.
fn eval_factor(
    v: &DMatrix<f64>,
    spec: &ObjectiveSpec,
    eps: f64,
    penalty_weight: f64,
) -> Result<(f64, DMatrix<f64>)> {
    let n = v.nrows();
    let r = v.ncols();
    let mut value = 0.0;
    let mut grad = DMatrix::zeros(n, r);

    for (w, m) in &spec.trace_terms {
        let mv = m * v;
        value += *w * v.iter().zip(mv.iter()).map(|(a, b)| a * b).sum::<f64>();
        grad += mv * (2.0 * *w);
    }

    if !spec.schatten_terms.is_empty() {
        let gram = v.transpose() * v;
        let (sig, u) = sym_eigen_sorted(&gram)?;
        let sig: Vec<f64> = sig.iter().map(|&s| s.max(0.0)).collect();
        for &(w, q) in &spec.schatten_terms {
            if w == 0.0 {
                continue;
            }
            // c_k are the derivative weights d‖X‖/dσ_k; the V-gradient is
            // 2w · V · U diag(c) Uᵀ.
            let coeffs: Vec<f64>;
            if q.is_infinite() {
                let top = sig.iter().fold(0.0f64, |a, &b| a.max(b));
                let mut denom = (n - r) as f64 * (-top / eps).exp();
                let mut weights = vec![0.0; r];
                for k in 0..r {
                    weights[k] = ((sig[k] - top) / eps).exp();
                    denom += weights[k];
                }
                value += w * (top + eps * denom.ln());
                coeffs = weights.iter().map(|wk| wk / denom).collect();
            } else {
                let norm = schatten_from_eigvals(sig.iter().copied(), q);
                value += w * norm;
                if norm == 0.0 {
                    coeffs = vec![0.0; r];
                } else {
                    coeffs = sig.iter().map(|&s| norm.powf(1.0 - q) * s.powf(q - 1.0)).collect();
                }
            }
            let mut f_gram = DMatrix::zeros(r, r);
            for k in 0..r {
                if coeffs[k] != 0.0 {
                    let uk = u.column(k);
                    f_gram += uk * uk.transpose() * coeffs[k];
                }
            }
            grad += v * f_gram * (2.0 * w);
        }
    }

    if let Some((w, kernel)) = &spec.quad_term {
        let p = kernel * v;
        let t1: f64 = v.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
        let vtp = v.transpose() * &p;
        value += *w * (t1 * t1 + 2.0 * vtp.norm_squared());
        grad += &p * (4.0 * *w * t1);
        grad += p * vtp * (8.0 * *w);
    }

    if penalty_weight > 0.0 {
        if let Some(c) = spec.sum_constraint {
            let colsum = v.transpose() * DVector::from_element(n, 1.0);
            let s = colsum.norm_squared();
            value += penalty_weight * (s - c) * (s - c);
            let ones_tv = DVector::from_element(n, 1.0) * colsum.transpose();
            grad += ones_tv * (4.0 * penalty_weight * (s - c));
        }
    }

    Ok((value, grad))
}

/// Exact (unsmoothed, penalty-free) objective at a full matrix `X`.
pub fn exact_objective(x: &DMatrix<f64>, spec: &ObjectiveSpec) -> Result<f64> {
    let mut value = 0.0;
    for (w, m) in &spec.trace_terms {
        value += *w * m.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
    if !spec.schatten_terms.is_empty() {
        let (vals, _) = sym_eigen_sorted(x)?;
        for &(w, q) in &spec.schatten_terms {
            value += w * schatten_from_eigvals(vals.iter().copied(), q);
        }
    }
    if let Some((w, kernel)) = &spec.quad_term {
        value += *w * crate::objective::quad_form_second_moment(x, kernel);
    }
    Ok(value)
}

// X-space evaluation for the reference solver (smoothed operator norm,
// optional penalty).
fn eval_full(
    x: &DMatrix<f64>,
    spec: &ObjectiveSpec,
    eps: f64,
    penalty_weight: f64,
) -> Result<(f64, DMatrix<f64>)> {
    let n = x.nrows();
    let mut value = 0.0;
    let mut grad = DMatrix::zeros(n, n);
    for (w, m) in &spec.trace_terms {
        value += *w * m.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>();
        grad += m * *w;
    }
    if !spec.schatten_terms.is_empty() {
        let (vals, vecs) = sym_eigen_sorted(x)?;
        for &(w, q) in &spec.schatten_terms {
            if w == 0.0 {
                continue;
            }
            let coeffs: Vec<f64>;
            if q.is_infinite() {
                let top = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let weights: Vec<f64> = vals.iter().map(|&l| ((l - top) / eps).exp()).collect();
                let denom: f64 = weights.iter().sum();
                value += w * (top + eps * denom.ln());
                coeffs = weights.iter().map(|wk| wk / denom).collect();
            } else {
                let abs: Vec<f64> = vals.iter().map(|&l| l.abs()).collect();
                let norm = schatten_from_eigvals(abs.iter().copied(), q);
                value += w * norm;
                coeffs = if norm == 0.0 {
                    vec![0.0; n]
                } else {
                    vals.iter()
                        .map(|&l| norm.powf(1.0 - q) * l.abs().powf(q - 1.0) * l.signum())
                        .collect()
                };
            }
            for k in 0..n {
                if coeffs[k] != 0.0 {
                    let vk = vecs.column(k);
                    grad += vk * vk.transpose() * (w * coeffs[k]);
                }
            }
        }
    }
    if let Some((w, kernel)) = &spec.quad_term {
        let kx = kernel * x;
        let t1 = kx.trace();
        value += *w * (t1 * t1 + 2.0 * (&kx * &kx).trace());
        grad += kernel * (2.0 * *w * t1);
        grad += kernel * x * kernel * (4.0 * *w);
    }
    if penalty_weight > 0.0 {
        if let Some(c) = spec.sum_constraint {
            let s: f64 = x.iter().sum();
            value += penalty_weight * (s - c) * (s - c);
            grad += DMatrix::from_element(n, n, 2.0 * penalty_weight * (s - c));
        }
    }
    Ok((value, grad))
}

fn normalize_rows(v: &mut DMatrix<f64>) {
    for i in 0..v.nrows() {
        let norm = v.row(i).norm();
        if norm > 0.0 {
            let mut row = v.row_mut(i);
            row /= norm;
        } else {
            v[(i, 0)] = 1.0;
        }
    }
}

fn riemannian_grad(v: &DMatrix<f64>, grad: &DMatrix<f64>) -> DMatrix<f64> {
    // Remove per-row radial components: rows of V live on unit spheres.
    let mut out = grad.clone();
    for i in 0..v.nrows() {
        let dot = v.row(i).dot(&grad.row(i));
        let scaled = v.row(i) * dot;
        let mut row = out.row_mut(i);
        row -= scaled;
    }
    out
}

/// Minimize `spec` over the elliptope via the unit-row factorization.
pub fn solve_bm(spec: &ObjectiveSpec, n: usize, config: &SolverConfig) -> Result<Solution> {
    spec.validate(n)?;
    config.validate()?;
    let rank = config.rank.unwrap_or_else(|| default_rank(spec, n)).min(n).max(1);
    let eps = config.smoothing_eps.unwrap_or_else(|| default_eps(n));
    let stages: Vec<f64> = if spec.sum_constraint.is_some() {
        config.penalty_schedule.clone()
    } else {
        vec![0.0]
    };

    let mut best: Option<Solution> = None;
    for restart in 0..config.restarts.max(1) {
        let mut rng = substream(config.seed.wrapping_add(restart as u64), "bm-init");
        let mut v = DMatrix::from_fn(n, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
        normalize_rows(&mut v);

        let mut iterations = 0;
        let mut converged = false;
        let mut grad_norm = f64::INFINITY;
        let mut step = match config.step_rule {
            StepRule::Fixed(t) => t,
            StepRule::Backtracking { .. } => 1.0,
        };
        for &pen in &stages {
            let (mut f, mut g) = eval_factor(&v, spec, eps, pen)?;
            if !f.is_finite() {
                return Err(Error::numerical("objective diverged at initialization"));
            }
            converged = false;
            // Each penalty stage gets its own budget; warm starts keep the
            // later (stiffer) stages short in practice.
            for _ in 0..config.max_iters {
                iterations += 1;
                let rg = riemannian_grad(&v, &g);
                grad_norm = rg.norm();
                if grad_norm <= config.grad_tol * (1.0 + f.abs()) {
                    converged = true;
                    break;
                }
                match config.step_rule {
                    StepRule::Fixed(t) => {
                        let mut v_new = &v - &rg * t;
                        normalize_rows(&mut v_new);
                        let (f_new, g_new) = eval_factor(&v_new, spec, eps, pen)?;
                        if !f_new.is_finite() {
                            return Err(Error::numerical(format!(
                                "objective diverged at iteration {iterations}"
                            )));
                        }
                        v = v_new;
                        f = f_new;
                        g = g_new;
                    }
                    StepRule::Backtracking { shrink, armijo } => {
                        let gsq = grad_norm * grad_norm;
                        let mut accepted = false;
                        for _ in 0..60 {
                            let mut v_new = &v - &rg * step;
                            normalize_rows(&mut v_new);
                            let (f_new, g_new) = eval_factor(&v_new, spec, eps, pen)?;
                            if f_new.is_finite() && f_new <= f - armijo * step * gsq {
                                debug_assert!(f_new <= f + 1e-12 * (1.0 + f.abs()));
                                v = v_new;
                                f = f_new;
                                g = g_new;
                                accepted = true;
                                break;
                            }
                            step *= shrink;
                            if step < 1e-18 {
                                break;
                            }
                        }
                        if !accepted {
                            // No descent direction at line-search resolution.
                            converged = true;
                            break;
                        }
                        step = (step * 2.0).min(1e6);
                    }
                }
            }
        }

        let x = &v * v.transpose();
        let objective = exact_objective(&x, spec)?;
        let sum_residual = spec.sum_constraint.map(|c| (x.iter().sum::<f64>() - c).abs());
        let candidate = Solution {
            factor: v,
            x,
            objective,
            grad_norm,
            iterations,
            status: if converged { SolveStatus::Converged } else { SolveStatus::IterCapped },
            sum_residual,
        };
        let better = match &best {
            None => true,
            Some(b) => candidate.objective < b.objective,
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one restart"))
}

// Projection onto {X PSD} by eigenvalue clamping.
fn psd_project(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_sorted(x)?;
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        if vals[k] > 0.0 {
            let v = vecs.column(k);
            out += v * v.transpose() * vals[k];
        }
    }
    Ok(out)
}

/// Alternating projection onto `{X ⪰ 0} ∩ {diag(X) = 1}` with a Dykstra
/// correction on the PSD step, iterated until the two projections agree to
/// `tol` (relative). Errors if `cap` sweeps do not converge.
pub fn project_elliptope(x: &DMatrix<f64>, tol: f64, cap: usize) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let mut y = x.clone();
    let mut correction = DMatrix::zeros(n, n);
    for _ in 0..cap {
        let r = psd_project(&(&y + &correction))?;
        correction = &y + &correction - &r;
        let mut y_new = r.clone();
        for i in 0..n {
            y_new[(i, i)] = 1.0;
        }
        let gap = (&y_new - &r).norm();
        y = y_new;
        if gap <= tol * (n as f64).sqrt() {
            return Ok(y);
        }
    }
    Err(Error::numerical(format!("elliptope projection did not reach {tol} in {cap} sweeps")))
}

/// Dense projected-gradient reference solver for `n ≤ 40`. Deterministic:
/// the iteration starts from the identity and involves no randomness.
pub fn solve_reference(spec: &ObjectiveSpec, n: usize, config: &SolverConfig) -> Result<Solution> {
    spec.validate(n)?;
    config.validate()?;
    if n > 40 {
        return Err(Error::invalid("reference solver is dense-only: n must be <= 40"));
    }
    let eps = config.smoothing_eps.unwrap_or_else(|| default_eps(n));
    let stages: Vec<f64> = if spec.sum_constraint.is_some() {
        config.penalty_schedule.clone()
    } else {
        vec![0.0]
    };
    let proj_tol = 1e-9;

    let mut x = DMatrix::identity(n, n);
    let mut iterations = 0;
    let mut converged = false;
    let mut step = 1.0;
    for &pen in &stages {
        let (mut f, mut g) = eval_full(&x, spec, eps, pen)?;
        converged = false;
        let mut stalls = 0;
        for _ in 0..config.max_iters {
            iterations += 1;
            let x_try = project_elliptope(&(&x - &g * step), proj_tol, 2000)?;
            let (f_try, g_try) = eval_full(&x_try, spec, eps, pen)?;
            if !f_try.is_finite() {
                return Err(Error::numerical("reference objective diverged"));
            }
            if f_try < f - 1e-14 * (1.0 + f.abs()) {
                let moved = (&x_try - &x).norm();
                x = x_try;
                f = f_try;
                g = g_try;
                step = (step * 1.3).min(1e3);
                stalls = 0;
                if moved <= 1e-12 * (1.0 + x.norm()) {
                    converged = true;
                    break;
                }
            } else {
                step *= 0.5;
                stalls += 1;
                if step < 1e-15 || stalls > 120 {
                    converged = true;
                    break;
                }
            }
        }
    }

    // Report through the Gram factor of the projected iterate so the
    // feasibility guarantees match the factorized solver's.
    let x_feas = project_elliptope(&x, proj_tol, 2000)?;
    let (vals, vecs) = sym_eigen_sorted(&x_feas)?;
    let mut factor = DMatrix::zeros(n, n);
    for k in 0..n {
        if vals[k] > 0.0 {
            let col = vecs.column(k) * vals[k].sqrt();
            factor.set_column(k, &col);
        }
    }
    normalize_rows(&mut factor);
    let x_out = &factor * factor.transpose();
    let objective = exact_objective(&x_out, spec)?;
    let sum_residual = spec.sum_constraint.map(|c| (x_out.iter().sum::<f64>() - c).abs());
    Ok(Solution {
        factor,
        x: x_out,
        objective,
        grad_norm: f64::NAN,
        iterations,
        status: if converged { SolveStatus::Converged } else { SolveStatus::IterCapped },
        sum_residual,
    })
}
