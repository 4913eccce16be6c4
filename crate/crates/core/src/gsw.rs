//! Adapted Gram-Schmidt walk design.
//!
//! The walk balances the augmented columns `B_i = [√λ e_i ; ξ⁻¹√(1-λ) A_i]`:
//! starting from `z = 2p - 1`, it repeatedly picks a pivot, computes the
//! least-norm step direction with the pivot coordinate fixed at one, and
//! takes a maximal random step left or right with the martingale
//! probabilities, freezing every coordinate that reaches ±1. The returned
//! assignment has per-unit means exactly `2p_i - 1`, `Cov(x) ⪯ λ⁻¹I`, and
//! `Cov(Ax) ⪯ ξ²(1-λ)⁻¹I`.
//!
//! The step direction is the pivot column of the inverse of the active-set
//! Gram matrix `G = λI + (1-λ)ξ⁻²·AᵀA`, normalized to one at the pivot.
//! `G⁻¹` is maintained under unit freezes by Schur-complement downdates, so
//! a walk costs one small inversion up front plus `O(active²)` per phase.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::objective::{beta_coeffs, TradeoffParams};
use crate::rng::substream;
use crate::rounding::Assignment;
use crate::spectra::{KernelMatrix, SpectralBundle};

/// Inputs of one walk: covariate matrix, randomization parameter, per-unit
/// treatment probabilities, max column norm, seed.
#[derive(Debug, Clone)]
pub struct GswInputs {
    pub a: DMatrix<f64>,
    pub lambda: f64,
    pub p_vec: DVector<f64>,
    pub xi: f64,
    pub seed: u64,
}

impl GswInputs {
    /// `xi` is computed as the maximum column norm of `a`.
    pub fn new(a: DMatrix<f64>, lambda: f64, p_vec: DVector<f64>, seed: u64) -> Result<Self> {
        let n = a.ncols();
        if p_vec.len() != n {
            return Err(Error::dims("p_vec length must match the number of columns of A"));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::invalid(format!("lambda = {lambda} must be in (0,1]")));
        }
        if p_vec.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::invalid("treatment probabilities must be in (0,1)"));
        }
        let xi = (0..n).map(|j| a.column(j).norm()).fold(0.0f64, f64::max);
        Ok(GswInputs { a, lambda, p_vec, xi, seed })
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }
}

/// Which augmented-covariate construction [`build_a`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AForm {
    /// Symmetric PSD square root of the weighted sum (n×n).
    Sqrt,
    /// Vertical stack of the weighted block square roots (3n×n, or
    /// `(rows(C)+2n)×n` with extra covariates).
    Stacked,
}

/// Nonnegative weights of the balance objective `AᵀA = w_η L† + w_γ L +
/// w_Δ 11ᵀ` (or with `CᵀC` replacing `L†` when covariates substitute for
/// the homophily block).
#[derive(Debug, Clone, Copy)]
pub struct AWeights {
    pub eta_w: f64,
    pub gamma_w: f64,
    pub delta_w: f64,
}

impl AWeights {
    /// Weights induced by the trade-off parameters:
    /// `w_η = η(β1²+β2²)`, `w_γ = γβ1²`, `w_Δ = (aβ1+bβ2)² + β1²δ`.
    pub fn from_params(params: &TradeoffParams, n: usize) -> Result<Self> {
        params.validate()?;
        let (b1, b2) = beta_coeffs(params.p, n)?;
        Ok(AWeights {
            eta_w: params.eta * (b1 * b1 + b2 * b2),
            gamma_w: params.gamma * b1 * b1,
            delta_w: (params.a * b1 + params.b * b2).powi(2) + b1 * b1 * params.delta,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.eta_w < 0.0 || self.gamma_w < 0.0 || self.delta_w < 0.0 {
            return Err(Error::invalid("covariate weights must be >= 0"));
        }
        Ok(())
    }
}

/// Build the augmented covariate matrix. Both forms satisfy
/// `AᵀA = w_η L† + w_γ L + w_Δ 11ᵀ` (with `CᵀC` in place of `L†` when
/// `extra_covariates` is given).
pub fn build_a(
    bundle: &SpectralBundle,
    weights: &AWeights,
    form: AForm,
    extra_covariates: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    weights.validate()?;
    let n = bundle.n();
    if let Some(c) = extra_covariates {
        if c.ncols() != n {
            return Err(Error::dims("covariate matrix must have n columns"));
        }
    }
    match form {
        AForm::Sqrt => {
            let mut gram = bundle.laplacian() * weights.gamma_w
                + DMatrix::from_element(n, n, weights.delta_w);
            match extra_covariates {
                Some(c) => gram += c.transpose() * c * weights.eta_w,
                None => gram += bundle.lap_pinv() * weights.eta_w,
            }
            Ok(KernelMatrix::new(gram)?.psd_sqrt()?.matrix().clone())
        }
        AForm::Stacked => {
            let first_rows = extra_covariates.map(|c| c.nrows()).unwrap_or(n);
            let mut a = DMatrix::zeros(first_rows + 2 * n, n);
            let eta_s = weights.eta_w.sqrt();
            match extra_covariates {
                Some(c) => {
                    for i in 0..c.nrows() {
                        for j in 0..n {
                            a[(i, j)] = eta_s * c[(i, j)];
                        }
                    }
                }
                None => {
                    let block = bundle.lap_pinv_sqrt() * eta_s;
                    for i in 0..n {
                        for j in 0..n {
                            a[(i, j)] = block[(i, j)];
                        }
                    }
                }
            }
            let lap_block = bundle.lap_sqrt() * weights.gamma_w.sqrt();
            // (11ᵀ)^{1/2} = 11ᵀ/√n.
            let ones_val = weights.delta_w.sqrt() / (n as f64).sqrt();
            for i in 0..n {
                for j in 0..n {
                    a[(first_rows + i, j)] = lap_block[(i, j)];
                    a[(first_rows + n + i, j)] = ones_val;
                }
            }
            Ok(a)
        }
    }
}

/// Randomization parameter minimizing the worst-case bound:
/// `λ = √(κ̃·n^{1/q}) / (√(ξ²n) + √(κ̃·n^{1/q}))`.
pub fn lambda_opt(kappa_tilde: f64, xi: f64, n: usize, q: f64) -> Result<f64> {
    if kappa_tilde <= 0.0 || xi <= 0.0 || n == 0 || q < 1.0 {
        return Err(Error::invalid("lambda_opt needs positive kappa_tilde, xi, n and q >= 1"));
    }
    let nf = n as f64;
    let robust = (kappa_tilde * nf.powf(1.0 / q)).sqrt();
    let balance = (xi * xi * nf).sqrt();
    let denom = balance + robust;
    if denom == 0.0 {
        return Err(Error::invalid("zero denominator in lambda_opt"));
    }
    Ok(robust / denom)
}

/// The square-free variant `λ = κn^{1/q} / (ηξ²n + κn^{1/q})`, kept behind
/// this separate entry point; [`lambda_opt`] is the default.
pub fn lambda_algorithmic(kappa: f64, eta: f64, xi: f64, n: usize, q: f64) -> Result<f64> {
    if kappa <= 0.0 || eta < 0.0 || xi <= 0.0 || n == 0 || q < 1.0 {
        return Err(Error::invalid("lambda_algorithmic needs positive inputs"));
    }
    let nf = n as f64;
    let robust = kappa * nf.powf(1.0 / q);
    let denom = eta * xi * xi * nf + robust;
    if denom == 0.0 {
        return Err(Error::invalid("zero denominator in lambda_algorithmic"));
    }
    Ok(robust / denom)
}

/// Reusable walk state: the full-active inverse Gram is computed once and
/// copied per draw.
#[derive(Debug, Clone)]
pub struct GswSampler {
    inputs: GswInputs,
    inv_gram_full: DMatrix<f64>,
}

impl GswSampler {
    pub fn new(inputs: GswInputs) -> Result<Self> {
        let n = inputs.n();
        let mut gram = DMatrix::identity(n, n) * inputs.lambda;
        if inputs.xi > 0.0 && inputs.lambda < 1.0 {
            let scale = (1.0 - inputs.lambda) / (inputs.xi * inputs.xi);
            gram += inputs.a.transpose() * &inputs.a * scale;
        }
        let inv = invert_spd(&gram)?;
        Ok(GswSampler { inputs, inv_gram_full: inv })
    }

    pub fn inputs(&self) -> &GswInputs {
        &self.inputs
    }

    /// Run one walk. Deterministic per seed: pivot draws and step-sign draws
    /// come from a single substream in a fixed order.
    pub fn sample(&self, seed: u64) -> Result<Assignment> {
        let n = self.inputs.n();
        let mut rng = substream(seed, "gsw-walk");
        let mut z = DVector::from_fn(n, |i, _| 2.0 * self.inputs.p_vec[i] - 1.0);

        // alive[k] is the unit behind row/column k of the inverse Gram.
        let mut alive: Vec<usize> = (0..n).collect();
        let mut inv = self.inv_gram_full.clone();
        let mut pivot_pos = rng.random_range(0..alive.len());
        let mut steps = 0usize;

        while !alive.is_empty() {
            steps += 1;
            if steps > 2 * n + 4 {
                return Err(Error::numerical("walk failed to terminate within 2n phases"));
            }
            let m = alive.len();
            // Step direction u = H e_p / H_pp over the active set.
            let h_pp = inv[(pivot_pos, pivot_pos)];
            if !(h_pp.is_finite() && h_pp > 1e-13) {
                // Downdates degraded the inverse; rebuild from scratch.
                inv = self.rebuild_inverse(&alive)?;
                if inv[(pivot_pos, pivot_pos)] <= 1e-13 {
                    return Err(Error::numerical("singular active-set system"));
                }
            }
            let h_pp = inv[(pivot_pos, pivot_pos)];
            let u: Vec<f64> = (0..m).map(|k| inv[(k, pivot_pos)] / h_pp).collect();

            // Feasible step interval: z_k + δ u_k ∈ [-1, 1] for all k.
            let mut hi = f64::INFINITY;
            let mut lo = f64::NEG_INFINITY;
            for k in 0..m {
                let unit = alive[k];
                if u[k].abs() < 1e-15 {
                    continue;
                }
                let room_up = (1.0 - z[unit]) / u[k];
                let room_dn = (-1.0 - z[unit]) / u[k];
                let (lo_k, hi_k) = if u[k] > 0.0 { (room_dn, room_up) } else { (room_up, room_dn) };
                hi = hi.min(hi_k);
                lo = lo.max(lo_k);
            }
            if !hi.is_finite() || !lo.is_finite() {
                return Err(Error::numerical("unbounded step interval"));
            }
            let delta_plus = hi.abs();
            let delta_minus = lo.abs();
            let total = delta_plus + delta_minus;
            if total <= 0.0 {
                return Err(Error::numerical("degenerate step interval"));
            }
            let go_up = rng.random::<f64>() < delta_minus / total;
            let delta = if go_up { delta_plus } else { -delta_minus };
            for k in 0..m {
                z[alive[k]] += delta * u[k];
            }

            // Freeze everything at the boundary; by maximality at least one
            // coordinate lands there.
            let mut frozen_any = false;
            let mut k = 0;
            while k < alive.len() {
                let unit = alive[k];
                if z[unit].abs() >= 1.0 - 1e-10 {
                    z[unit] = z[unit].signum();
                    remove_index(&mut inv, &mut alive, k);
                    if k == pivot_pos {
                        pivot_pos = usize::MAX;
                    } else if pivot_pos != usize::MAX && k < pivot_pos {
                        pivot_pos -= 1;
                    }
                    frozen_any = true;
                } else {
                    k += 1;
                }
            }
            if !frozen_any {
                return Err(Error::numerical("maximal step froze no coordinate"));
            }
            if pivot_pos == usize::MAX && !alive.is_empty() {
                pivot_pos = rng.random_range(0..alive.len());
            }
        }

        let x = DVector::from_fn(n, |i, _| if z[i] > 0.0 { 1.0 } else { -1.0 });
        Assignment::new(x, "gsw", seed)
    }

    fn rebuild_inverse(&self, alive: &[usize]) -> Result<DMatrix<f64>> {
        let m = alive.len();
        let lam = self.inputs.lambda;
        let xi = self.inputs.xi;
        let mut gram = DMatrix::zeros(m, m);
        for (r, &i) in alive.iter().enumerate() {
            for (c, &j) in alive.iter().enumerate() {
                let mut v = if i == j { lam } else { 0.0 };
                if xi > 0.0 && lam < 1.0 {
                    v += (1.0 - lam) / (xi * xi) * self.inputs.a.column(i).dot(&self.inputs.a.column(j));
                }
                gram[(r, c)] = v;
            }
        }
        invert_spd(&gram)
    }
}

fn invert_spd(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = Cholesky::new(gram.clone()) {
        return Ok(chol.inverse());
    }
    // Ridge fallback for (numerically) singular systems.
    let n = gram.nrows();
    let ridge = 1e-12 * gram.trace().max(1.0);
    Cholesky::new(gram + DMatrix::identity(n, n) * ridge)
        .map(|c| c.inverse())
        .ok_or_else(|| Error::numerical("active-set Gram matrix is not positive definite"))
}

// Remove row/column k from an inverse via the Schur-complement identity:
// (G')⁻¹ = Hـ - h hᵀ / H_kk restricted off k.
fn remove_index(inv: &mut DMatrix<f64>, alive: &mut Vec<usize>, k: usize) {
    let m = alive.len();
    let hkk = inv[(k, k)];
    let col: DVector<f64> = DVector::from_fn(m, |r, _| inv[(r, k)]);
    let mut next = DMatrix::zeros(m - 1, m - 1);
    let mut rr = 0;
    for r in 0..m {
        if r == k {
            continue;
        }
        let mut cc = 0;
        for c in 0..m {
            if c == k {
                continue;
            }
            next[(rr, cc)] = inv[(r, c)] - col[r] * col[c] / hkk;
            cc += 1;
        }
        rr += 1;
    }
    *inv = next;
    alive.remove(k);
}

/// One-shot walk over fresh inputs.
pub fn gsw_assign(inputs: &GswInputs) -> Result<Assignment> {
    GswSampler::new(inputs.clone())?.sample(inputs.seed)
}

/// Flip surplus assignments on the larger side, in ascending order of
/// `diag(AᵀA)` (ties broken by lowest index), until exactly `target_n1`
/// units are treated.
pub fn cardinality_flip(x: &Assignment, a: &DMatrix<f64>, target_n1: usize) -> Result<Assignment> {
    let n = x.n();
    if target_n1 > n {
        return Err(Error::invalid(format!("target_n1 = {target_n1} exceeds n = {n}")));
    }
    if a.ncols() != n {
        return Err(Error::dims("covariate matrix must have n columns"));
    }
    let treated = x.treated_count();
    let mut out = x.x.clone();
    let (from_sign, surplus) = if treated > target_n1 {
        (1.0, treated - target_n1)
    } else {
        (-1.0, target_n1 - treated)
    };
    if surplus > 0 {
        let mut candidates: Vec<(f64, usize)> = (0..n)
            .filter(|&i| out[i] == from_sign)
            .map(|i| (a.column(i).norm_squared(), i))
            .collect();
        candidates.sort_by(|l, r| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1)));
        for &(_, i) in candidates.iter().take(surplus) {
            out[i] = -from_sign;
        }
    }
    Assignment::new(out, format!("{}+flip", x.design), x.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;
    use crate::spectra::{build_bundle, DEFAULT_ZERO_TOL};
    use approx::assert_abs_diff_eq;

    fn uniform_p(n: usize, p: f64) -> DVector<f64> {
        DVector::from_element(n, p)
    }

    #[test]
    fn lambda_opt_values() {
        // κ̃ n^{1/q} = ξ²n -> 1/2.
        assert_abs_diff_eq!(lambda_opt(4.0, 2.0, 4, 1.0).unwrap(), 0.5, epsilon = 1e-12);
        // κ̃ -> 0 -> λ -> 0.
        assert!(lambda_opt(1e-12, 1.0, 16, 2.0).unwrap() < 1e-5);
        // κ̃ = 100, ξ = 2, n = 16, q = 2: 20/28.
        assert_abs_diff_eq!(lambda_opt(100.0, 2.0, 16, 2.0).unwrap(), 5.0 / 7.0, epsilon = 1e-12);
        assert!(lambda_opt(0.0, 1.0, 4, 2.0).is_err());
    }

    #[test]
    fn lambda_algorithmic_form() {
        let v = lambda_algorithmic(100.0, 1.0, 2.0, 16, 2.0).unwrap();
        assert_abs_diff_eq!(v, 400.0 / (64.0 + 400.0), epsilon = 1e-12);
    }

    #[test]
    fn build_a_zero_weights() {
        let g = path_graph(6);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let w = AWeights { eta_w: 0.0, gamma_w: 0.0, delta_w: 0.0 };
        let a = build_a(&bundle, &w, AForm::Sqrt, None).unwrap();
        assert!(a.norm() < 1e-12);
    }

    #[test]
    fn build_a_ones_only() {
        let g = path_graph(5);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let w = AWeights { eta_w: 0.0, gamma_w: 0.0, delta_w: 1.0 };
        let a = build_a(&bundle, &w, AForm::Sqrt, None).unwrap();
        let gram = a.transpose() * &a;
        assert!((gram - DMatrix::from_element(5, 5, 1.0)).norm() < 1e-8);
        // Each column of 11ᵀ/√n has norm 1.
        for j in 0..5 {
            assert_abs_diff_eq!(a.column(j).norm(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn sqrt_and_stacked_agree_in_gram() {
        let g = crate::graph::generate_graph(&crate::graph::GraphModel::Er { p: 0.5 }, 8, 2).unwrap();
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let w = AWeights { eta_w: 0.7, gamma_w: 1.3, delta_w: 0.4 };
        let a1 = build_a(&bundle, &w, AForm::Sqrt, None).unwrap();
        let a2 = build_a(&bundle, &w, AForm::Stacked, None).unwrap();
        let g1 = a1.transpose() * &a1;
        let g2 = a2.transpose() * &a2;
        assert!((&g1 - &g2).norm() <= 1e-8 * (1.0 + g1.norm()));
    }

    #[test]
    fn covariate_block_substitutes_homophily() {
        let g = path_graph(6);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        // 2 groups, one-hot rows.
        let mut c = DMatrix::zeros(2, 6);
        for j in 0..6 {
            c[(j % 2, j)] = 1.0;
        }
        let w = AWeights { eta_w: 2.0, gamma_w: 0.5, delta_w: 1.0 };
        let a = build_a(&bundle, &w, AForm::Stacked, Some(&c)).unwrap();
        assert_eq!(a.nrows(), 2 + 12);
        let gram = a.transpose() * &a;
        let expect = c.transpose() * &c * 2.0
            + bundle.laplacian() * 0.5
            + DMatrix::from_element(6, 6, 1.0);
        assert!((gram - expect).norm() < 1e-8);
    }

    #[test]
    fn zero_covariates_reduce_to_independent_coins() {
        // A = 0, λ = 1: B has orthogonal columns, every pivot freezes only
        // itself, coordinates are independent fair coins.
        let n = 8;
        let inputs =
            GswInputs::new(DMatrix::zeros(1, n), 1.0, uniform_p(n, 0.5), 0).unwrap();
        let sampler = GswSampler::new(inputs).unwrap();
        let m = 20_000;
        let mut mean = DVector::zeros(n);
        let mut cross = 0.0;
        for t in 0..m {
            let a = sampler.sample(t as u64).unwrap();
            mean += &a.x;
            cross += a.x[0] * a.x[1];
        }
        mean /= m as f64;
        for i in 0..n {
            assert!(mean[i].abs() < 0.03, "unit {i} mean {}", mean[i]);
        }
        assert!((cross / m as f64).abs() < 0.03);
    }

    #[test]
    fn single_unit_martingale() {
        // n = 1, p = 0.7: +1 with probability exactly 0.7.
        let inputs = GswInputs::new(DMatrix::zeros(1, 1), 0.5, uniform_p(1, 0.7), 0).unwrap();
        let sampler = GswSampler::new(inputs).unwrap();
        let m = 100_000;
        let mut plus = 0usize;
        for t in 0..m {
            if sampler.sample(t as u64).unwrap().x[0] > 0.0 {
                plus += 1;
            }
        }
        let frac = plus as f64 / m as f64;
        let se = (0.7f64 * 0.3 / m as f64).sqrt();
        assert!((frac - 0.7).abs() <= 4.0 * se, "fraction {frac}");
    }

    #[test]
    fn walks_terminate_and_are_deterministic() {
        let g = crate::graph::generate_graph(&crate::graph::GraphModel::Er { p: 0.3 }, 30, 7).unwrap();
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let w = AWeights { eta_w: 1.0, gamma_w: 1.0, delta_w: 0.1 };
        let a = build_a(&bundle, &w, AForm::Sqrt, None).unwrap();
        let inputs = GswInputs::new(a, 0.5, uniform_p(30, 0.5), 3).unwrap();
        let sampler = GswSampler::new(inputs.clone()).unwrap();
        for t in 0..200 {
            let out = sampler.sample(t).unwrap();
            assert!(out.x.iter().all(|&v| v == 1.0 || v == -1.0));
        }
        let a1 = gsw_assign(&inputs).unwrap();
        let a2 = gsw_assign(&inputs).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn nonuniform_marginals_match() {
        let n = 12;
        let g = crate::graph::generate_graph(&crate::graph::GraphModel::Er { p: 0.4 }, n, 5).unwrap();
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let w = AWeights { eta_w: 0.5, gamma_w: 0.5, delta_w: 0.2 };
        let a = build_a(&bundle, &w, AForm::Sqrt, None).unwrap();
        let p_vec = DVector::from_fn(n, |i, _| 0.2 + 0.05 * i as f64);
        let inputs = GswInputs::new(a, 0.4, p_vec.clone(), 0).unwrap();
        let sampler = GswSampler::new(inputs).unwrap();
        let m = 20_000;
        let mut mean = DVector::zeros(n);
        for t in 0..m {
            mean += &sampler.sample(t as u64).unwrap().x;
        }
        mean /= m as f64;
        for i in 0..n {
            let expect = 2.0 * p_vec[i] - 1.0;
            let se = ((1.0 - expect * expect) / m as f64).sqrt();
            assert!(
                (mean[i] - expect).abs() <= 4.0 * se.max(1e-6),
                "unit {i}: {} vs {expect}",
                mean[i]
            );
        }
    }

    #[test]
    fn flip_reaches_exact_count() {
        let a = DMatrix::from_fn(3, 6, |i, j| ((i + j) % 3) as f64 * 0.3);
        let x = Assignment::new(DVector::from_element(6, 1.0), "t", 0).unwrap();
        let flipped = cardinality_flip(&x, &a, 3).unwrap();
        assert_eq!(flipped.treated_count(), 3);
        // Unchanged when already balanced.
        let again = cardinality_flip(&flipped, &a, 3).unwrap();
        assert_eq!(again.x, flipped.x);
    }

    #[test]
    fn flip_targets_smallest_diagonals_with_index_ties() {
        // Distinct diagonal values: exactly the smallest ones flip.
        let mut a = DMatrix::zeros(1, 4);
        for j in 0..4 {
            a[(0, j)] = (4 - j) as f64;
        }
        let x = Assignment::new(DVector::from_element(4, 1.0), "t", 0).unwrap();
        let flipped = cardinality_flip(&x, &a, 2).unwrap();
        // diag = [16, 9, 4, 1]: units 3 and 2 flip.
        assert_eq!(flipped.x[3], -1.0);
        assert_eq!(flipped.x[2], -1.0);
        assert_eq!(flipped.x[0], 1.0);

        // Ties broken by lowest index.
        let a_ties = DMatrix::from_element(1, 4, 1.0);
        let flipped = cardinality_flip(&x, &a_ties, 3).unwrap();
        assert_eq!(flipped.x[0], -1.0);
        assert_eq!(flipped.x[1], 1.0);
    }
}
