//! Worst-case MSE bounds and the matrices and weights consumed by the
//! solvers.
//!
//! Two bound conventions coexist. The symmetric bound (treatment probability
//! exactly 1/2) takes the raw second moment `E[xxᵀ]` and carries a `28/n²`
//! leading constant; the general bound takes the centered covariance and
//! carries a constant of 7. These are not consistent specializations of one
//! another; both are implemented verbatim and selected by [`BoundMode`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectra::{
    dual_exponent, schatten_from_eigvals, schatten_norm, sym_eigen_sorted, KernelMatrix,
    SpectralBundle,
};

/// Budgets of the worst-case outcome class plus estimator parameters.
///
/// * `eta` — homophily budget (Laplacian quadratic form on `h`),
/// * `gamma` — interference budget (pseudo-inverse quadratic form on `s(z)`),
/// * `kappa` — heterogeneous-variation budget (Schatten `q*` bound on `Σ`),
/// * `q` — Schatten exponent appearing in the bound, dual to `q*`,
/// * `delta` — bound on the squared interference center `⟨s(z), 1/n⟩²`,
/// * `a`, `b` — baseline and effect means,
/// * `p` — uniform treatment probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffParams {
    pub eta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub q: f64,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl Default for TradeoffParams {
    fn default() -> Self {
        TradeoffParams {
            eta: 1.0,
            gamma: 1.0,
            kappa: 1.0,
            q: 2.0,
            delta: 0.0,
            a: 0.0,
            b: 0.0,
            p: 0.5,
        }
    }
}

impl TradeoffParams {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.eta, "eta"),
            (self.gamma, "gamma"),
            (self.kappa, "kappa"),
            (self.delta, "delta"),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::invalid(format!("p = {} must be in (0,1)", self.p)));
        }
        if self.q < 1.0 {
            return Err(Error::invalid(format!("q = {} must be >= 1", self.q)));
        }
        Ok(())
    }

    /// Dual Schatten exponent `q*` with `1/q + 1/q* = 1`.
    pub fn q_dual(&self) -> f64 {
        dual_exponent(self.q)
    }
}

/// `β1 = 1/(2np(1-p))`, `β2 = 1/(2np)`.
pub fn beta_coeffs(p: f64, n: usize) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p = {p} must be in (0,1)")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    let nf = n as f64;
    Ok((1.0 / (2.0 * nf * p * (1.0 - p)), 1.0 / (2.0 * nf * p)))
}

/// How a [`DesignCovariance`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovMode {
    /// Closed form.
    Exact,
    /// Sample moments over `samples` draws; `max_se` is the largest
    /// entrywise Monte-Carlo standard error of the second moment.
    Empirical { samples: usize, max_se: f64 },
}

/// Second-moment summary of a ±1 assignment distribution: `E[xxᵀ]`, the mean
/// `μ = E[x]`, and the derived covariance `E[xxᵀ] - μμᵀ`.
#[derive(Debug, Clone)]
pub struct DesignCovariance {
    second_moment: DMatrix<f64>,
    mean: DVector<f64>,
    mode: CovMode,
}

impl DesignCovariance {
    pub fn new(second_moment: DMatrix<f64>, mean: DVector<f64>, mode: CovMode) -> Result<Self> {
        let n = second_moment.nrows();
        if second_moment.ncols() != n || mean.len() != n {
            return Err(Error::dims("second moment and mean sizes disagree"));
        }
        let tol = match mode {
            CovMode::Exact => 1e-8,
            CovMode::Empirical { samples, .. } => 1e-8 + 6.0 / (samples as f64).sqrt(),
        };
        for i in 0..n {
            if (second_moment[(i, i)] - 1.0).abs() > tol {
                return Err(Error::invalid(format!(
                    "diagonal entry {i} of a ±1 second moment is {}",
                    second_moment[(i, i)]
                )));
            }
        }
        Ok(DesignCovariance { second_moment, mean, mode })
    }

    /// Mean-zero design with the given second moment (equal to its
    /// covariance).
    pub fn symmetric(second_moment: DMatrix<f64>, mode: CovMode) -> Result<Self> {
        let n = second_moment.nrows();
        Self::new(second_moment, DVector::zeros(n), mode)
    }

    pub fn n(&self) -> usize {
        self.second_moment.nrows()
    }

    pub fn second_moment(&self) -> &DMatrix<f64> {
        &self.second_moment
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn mode(&self) -> CovMode {
        self.mode
    }

    /// Centered covariance `E[xxᵀ] - μμᵀ`.
    pub fn cov(&self) -> DMatrix<f64> {
        &self.second_moment - &self.mean * self.mean.transpose()
    }
}

/// Which bound convention [`mse_bound_ht`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// Requires `p = 1/2`; uses the raw second moment.
    Symmetric,
    /// Any `p ∈ (0,1)`; uses the centered covariance.
    General,
}

fn check_dims(x: &DesignCovariance, bundle: &SpectralBundle) -> Result<()> {
    if x.n() != bundle.n() {
        return Err(Error::dims(format!(
            "design covariance is {}x{} but graph has {} units",
            x.n(),
            x.n(),
            bundle.n()
        )));
    }
    Ok(())
}

fn trace_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // Tr(A B) for symmetric A, B without forming the product.
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn trace_ones(x: &DMatrix<f64>) -> f64 {
    x.iter().sum()
}

/// Worst-case MSE upper bound for the Horvitz-Thompson estimator.
///
/// Symmetric mode:
/// `28/n² { Δ·Tr(11ᵀX) + (5η/4)·Tr(L†X) + (5κ/4)·‖X‖_q + γ·Tr(LX) }`
/// with `Δ = (a + b/2)² + δ` and `X = E[xxᵀ]`.
///
/// General mode:
/// `7 { Tr((γβ1²L + η[β1²+β2²]L†)X) + κ[β1²+β2²]‖X‖_q
///      + ([aβ1+bβ2]² + β1²δ)·Tr(11ᵀX) }`
/// with `X = Cov(x)`.
pub fn mse_bound_ht(
    x: &DesignCovariance,
    params: &TradeoffParams,
    bundle: &SpectralBundle,
    mode: BoundMode,
) -> Result<f64> {
    params.validate()?;
    check_dims(x, bundle)?;
    let n = bundle.n() as f64;
    match mode {
        BoundMode::Symmetric => {
            if (params.p - 0.5).abs() > 1e-12 {
                return Err(Error::invalid("symmetric bound requires p = 1/2"));
            }
            let xm = x.second_moment();
            let delta_cap = (params.a + params.b / 2.0).powi(2) + params.delta;
            let val = delta_cap * trace_ones(xm)
                + 1.25 * params.eta * trace_prod(bundle.lap_pinv(), xm)
                + 1.25 * params.kappa * schatten_norm(xm, params.q)?
                + params.gamma * trace_prod(bundle.laplacian(), xm);
            Ok(28.0 / (n * n) * val)
        }
        BoundMode::General => {
            let xm = x.cov();
            let (b1, b2) = beta_coeffs(params.p, bundle.n())?;
            let bb = b1 * b1 + b2 * b2;
            let delta_cap = (params.a * b1 + params.b * b2).powi(2) + b1 * b1 * params.delta;
            let val = params.gamma * b1 * b1 * trace_prod(bundle.laplacian(), &xm)
                + params.eta * bb * trace_prod(bundle.lap_pinv(), &xm)
                + params.kappa * bb * schatten_norm(&xm, params.q)?
                + delta_cap * trace_ones(&xm);
            Ok(7.0 * val)
        }
    }
}

/// Worst-case MSE upper bound for the difference-in-means estimator with
/// fixed group sizes `n1 + n0 = n`:
/// `7 { Tr((γβ1²L + η[β1²+β2²]L†)X) + κ[β1²+β2²]‖X‖_q }`
/// with `β1 = n/(2 n1 n0)`, `β2 = 1/(2 n1)` and `X = E[xxᵀ]`.
///
/// The side condition `1ᵀ Cov(x) 1 = 0` is required and checked.
pub fn mse_bound_dim(
    x: &DesignCovariance,
    params: &TradeoffParams,
    bundle: &SpectralBundle,
    n1: usize,
) -> Result<f64> {
    params.validate()?;
    check_dims(x, bundle)?;
    let n = bundle.n();
    if n1 == 0 || n1 >= n {
        return Err(Error::invalid(format!("n1 = {n1} must satisfy 0 < n1 < n = {n}")));
    }
    let cov = x.cov();
    let sum_cov = trace_ones(&cov);
    let tol = match x.mode() {
        CovMode::Exact => 1e-8 * (n * n) as f64,
        CovMode::Empirical { samples, .. } => 6.0 * (n * n) as f64 / (samples as f64).sqrt(),
    };
    if sum_cov.abs() > tol {
        return Err(Error::invalid(format!(
            "1ᵀCov(x)1 = {sum_cov} violates the fixed-group-size side condition"
        )));
    }
    let n0 = n - n1;
    let b1 = n as f64 / (2.0 * n1 as f64 * n0 as f64);
    let b2 = 1.0 / (2.0 * n1 as f64);
    let bb = b1 * b1 + b2 * b2;
    let xm = x.second_moment();
    let val = params.gamma * b1 * b1 * trace_prod(bundle.laplacian(), xm)
        + params.eta * bb * trace_prod(bundle.lap_pinv(), xm)
        + params.kappa * bb * schatten_norm(xm, params.q)?;
    Ok(7.0 * val)
}

/// Worst-case MSE upper bound valid on disconnected graphs, where the
/// outcome components along `ker L` no longer cancel:
/// `6 { Tr((γβ1²L + η[β1²+β2²]L†)X) + κ[β1²+β2²]‖X‖_q
///      + ‖Π(β1α + β2φ)‖²·Tr(ΠX) }`
/// with `Π` the kernel projector and `X = Cov(x)`.
pub fn mse_bound_projection(
    x: &DesignCovariance,
    params: &TradeoffParams,
    bundle: &SpectralBundle,
    alpha: &DVector<f64>,
    phi: &DVector<f64>,
) -> Result<f64> {
    params.validate()?;
    check_dims(x, bundle)?;
    let n = bundle.n();
    if alpha.len() != n || phi.len() != n {
        return Err(Error::dims("outcome vectors must have length n"));
    }
    let (b1, b2) = beta_coeffs(params.p, n)?;
    let bb = b1 * b1 + b2 * b2;
    let cov = x.cov();
    let proj = bundle.kernel_proj();
    let mixed = proj * (alpha * b1 + phi * b2);
    let val = params.gamma * b1 * b1 * trace_prod(bundle.laplacian(), &cov)
        + params.eta * bb * trace_prod(bundle.lap_pinv(), &cov)
        + params.kappa * bb * schatten_norm(&cov, params.q)?
        + mixed.norm_squared() * trace_prod(proj, &cov);
    Ok(6.0 * val)
}

/// Which outcome component a general-kernel term attaches to; determines the
/// probability coefficient (`β1` for the baseline, `β2` for the effect).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeSide {
    Baseline,
    Effect,
}

/// A quadratic-form budget `hᵀ𝒦h ≤ η` on one outcome component.
#[derive(Debug, Clone)]
pub struct KernelTerm {
    pub budget: f64,
    pub kernel: KernelMatrix,
    pub side: OutcomeSide,
}

/// A Schatten budget `‖Σ‖_{q*} ≤ κ` on one outcome component; `q` is the
/// dual exponent that appears in the bound.
#[derive(Debug, Clone, Copy)]
pub struct SchattenTerm {
    pub budget: f64,
    pub q: f64,
    pub side: OutcomeSide,
}

/// Worst-case MSE upper bound under general similarity kernels:
/// `(N+1) { (aβ1 + bβ2)²·Tr(11ᵀX) + Σ_terms β_f² η_i Tr(𝒦_i† X)
///          + Σ_terms β_f² κ_i ‖X‖_{q_i} }`
/// where `N` counts all terms and `β_f` is `β1` or `β2` by term side.
pub fn mse_bound_kernels(
    x: &DesignCovariance,
    kernel_terms: &[KernelTerm],
    schatten_terms: &[SchattenTerm],
    means: (f64, f64),
    p: f64,
    zero_tol: f64,
) -> Result<f64> {
    let n = x.n();
    let (b1, b2) = beta_coeffs(p, n)?;
    let side_coeff = |side: OutcomeSide| match side {
        OutcomeSide::Baseline => b1 * b1,
        OutcomeSide::Effect => b2 * b2,
    };
    let cov = x.cov();
    let (a, b) = means;
    let mut val = (a * b1 + b * b2).powi(2) * trace_ones(&cov);
    for term in kernel_terms {
        if term.kernel.n() != n {
            return Err(Error::dims("kernel size mismatch"));
        }
        if term.budget < 0.0 {
            return Err(Error::invalid("kernel budget must be >= 0"));
        }
        let pinv = term.kernel.pinv(zero_tol);
        val += side_coeff(term.side) * term.budget * trace_prod(&pinv, &cov);
    }
    for term in schatten_terms {
        if term.budget < 0.0 {
            return Err(Error::invalid("Schatten budget must be >= 0"));
        }
        val += side_coeff(term.side) * term.budget * schatten_norm(&cov, term.q)?;
    }
    let count = (kernel_terms.len() + schatten_terms.len()) as f64;
    Ok((count + 1.0) * val)
}

/// Tight homophily contribution `η·λ_max(L^{†/2} X L^{†/2})`; always at most
/// the loose trace term `η·Tr(L†X)`.
pub fn homophily_term_tight(x: &DMatrix<f64>, bundle: &SpectralBundle, eta: f64) -> Result<f64> {
    let half = bundle.lap_pinv_sqrt();
    let inner = &half * x * &half;
    let (vals, _) = sym_eigen_sorted(&inner)?;
    Ok(eta * vals[vals.len() - 1].max(0.0))
}

/// The quadratic interference objective `Tr(KX)² + 2·Tr([KX]²)`, equal to
/// `E[(ξᵀKξ)²]` for `ξ ~ N(0, X)` by Isserlis' theorem. Convex in `X`.
pub fn quad_form_second_moment(x: &DMatrix<f64>, kernel: &DMatrix<f64>) -> f64 {
    let kx = kernel * x;
    let t = kx.trace();
    let sq = (&kx * &kx).trace();
    t * t + 2.0 * sq
}

/// [`quad_form_second_moment`] with the graph Laplacian as the kernel.
pub fn quad_interference_term(x: &DMatrix<f64>, bundle: &SpectralBundle) -> f64 {
    quad_form_second_moment(x, bundle.laplacian())
}

/// Maximizer of `Tr(XΣ)` over `‖Σ‖_{q*} ≤ κ` for PSD `X`.
///
/// Returns `(κ·‖X‖_q, Σ*)` where `q` is dual to `q*` and `Σ*` attains the
/// supremum: the top eigenvector projector for `q* = 1`, `κX/‖X‖_F` for
/// `q* = 2`, and the eigenvalue power family `λ_i^{q/q*}` in general.
pub fn schatten_dual_witness(x: &DMatrix<f64>, q_star: f64, kappa: f64) -> Result<(f64, DMatrix<f64>)> {
    if q_star < 1.0 {
        return Err(Error::invalid(format!("q* = {q_star} < 1")));
    }
    if kappa < 0.0 {
        return Err(Error::invalid("kappa must be >= 0"));
    }
    let q = dual_exponent(q_star);
    let (vals, vecs) = sym_eigen_sorted(x)?;
    let n = x.nrows();
    let clamped: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
    let norm_q = schatten_from_eigvals(clamped.iter().copied(), q);
    let value = kappa * norm_q;
    if norm_q == 0.0 || kappa == 0.0 {
        return Ok((value, DMatrix::zeros(n, n)));
    }
    let mut sigma = DMatrix::zeros(n, n);
    if q_star == 1.0 {
        // Top eigenvector projector, scaled to trace κ.
        let v = vecs.column(n - 1);
        sigma += v * v.transpose() * kappa;
    } else if q_star.is_infinite() {
        // q = 1: κ·P_range attains Tr(XΣ) = κ·Tr(X).
        for k in 0..n {
            if clamped[k] > 0.0 {
                let v = vecs.column(k);
                sigma += v * v.transpose() * kappa;
            }
        }
    } else {
        // Eigenvalue powers λ^{q/q*} normalized to ‖Σ‖_{q*} = κ.
        let exps: Vec<f64> = clamped.iter().map(|&l| l.powf(q / q_star)).collect();
        let denom = schatten_from_eigvals(exps.iter().copied(), q_star);
        for k in 0..n {
            if exps[k] > 0.0 {
                let v = vecs.column(k);
                sigma += v * v.transpose() * (kappa * exps[k] / denom);
            }
        }
    }
    Ok((value, sigma))
}

/// The objective minimized over the elliptope `{X ⪰ 0, diag(X) = 1}`:
/// a nonnegative combination of trace terms, Schatten norms, an optional
/// Isserlis quadratic term, and an optional sum constraint `1ᵀX1 = c`.
#[derive(Debug, Clone, Default)]
pub struct ObjectiveSpec {
    /// `(weight, M)` contributing `weight·Tr(M X)`.
    pub trace_terms: Vec<(f64, DMatrix<f64>)>,
    /// `(weight, q)` contributing `weight·‖X‖_q`.
    pub schatten_terms: Vec<(f64, f64)>,
    /// `(weight, K)` contributing `weight·(Tr(KX)² + 2Tr([KX]²))`.
    pub quad_term: Option<(f64, DMatrix<f64>)>,
    /// Target for `1ᵀX1`, enforced by penalty in the solvers.
    pub sum_constraint: Option<f64>,
}

impl ObjectiveSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        for (w, m) in &self.trace_terms {
            if *w < 0.0 {
                return Err(Error::invalid("trace weight must be >= 0"));
            }
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::dims("trace term size mismatch"));
            }
            if (m - m.transpose()).norm() > 1e-8 * (1.0 + m.norm()) {
                return Err(Error::invalid("trace term must be symmetric"));
            }
        }
        for (w, q) in &self.schatten_terms {
            if *w < 0.0 {
                return Err(Error::invalid("Schatten weight must be >= 0"));
            }
            if *q < 1.0 {
                return Err(Error::invalid("Schatten exponent must be >= 1"));
            }
        }
        if let Some((w, k)) = &self.quad_term {
            if *w < 0.0 {
                return Err(Error::invalid("quadratic weight must be >= 0"));
            }
            if k.nrows() != n || k.ncols() != n {
                return Err(Error::dims("quadratic kernel size mismatch"));
            }
        }
        Ok(())
    }

    /// The SDP weights for the general Horvitz-Thompson bound at `params`:
    /// trace terms on `L`, `L†` and `11ᵀ`, plus one Schatten term.
    pub fn for_ht_bound(params: &TradeoffParams, bundle: &SpectralBundle) -> Result<Self> {
        params.validate()?;
        let n = bundle.n();
        let (b1, b2) = beta_coeffs(params.p, n)?;
        let bb = b1 * b1 + b2 * b2;
        let delta_cap = (params.a * b1 + params.b * b2).powi(2) + b1 * b1 * params.delta;
        let mut trace_terms = Vec::new();
        if params.gamma > 0.0 {
            trace_terms.push((params.gamma * b1 * b1, bundle.laplacian().clone()));
        }
        if params.eta > 0.0 {
            trace_terms.push((params.eta * bb, bundle.lap_pinv().clone()));
        }
        if delta_cap > 0.0 {
            trace_terms.push((delta_cap, DMatrix::from_element(n, n, 1.0)));
        }
        let schatten_terms = if params.kappa > 0.0 {
            vec![(params.kappa * bb, params.q)]
        } else {
            Vec::new()
        };
        Ok(ObjectiveSpec { trace_terms, schatten_terms, quad_term: None, sum_constraint: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{path_graph, WeightedGraph};
    use crate::rng::substream;
    use crate::spectra::{build_bundle, DEFAULT_ZERO_TOL};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = substream(seed, "psd");
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose()
    }

    fn random_elliptope(n: usize, seed: u64) -> DMatrix<f64> {
        let mut m = random_psd(n, seed) + DMatrix::identity(n, n) * 0.1;
        let d: Vec<f64> = (0..n).map(|i| m[(i, i)].sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] /= d[i] * d[j];
            }
        }
        m
    }

    #[test]
    fn beta_values() {
        let (b1, b2) = beta_coeffs(0.5, 10).unwrap();
        assert_abs_diff_eq!(b1, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(b2, 0.1, epsilon = 1e-15);
        let (b1, b2) = beta_coeffs(0.25, 8).unwrap();
        assert_abs_diff_eq!(b1, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b2, 0.25, epsilon = 1e-15);
        for n in [1usize, 7, 100] {
            let (b1, b2) = beta_coeffs(0.5, n).unwrap();
            assert_abs_diff_eq!(b1, 2.0 / n as f64, epsilon = 1e-15);
            assert_abs_diff_eq!(b2, 1.0 / n as f64, epsilon = 1e-15);
        }
        assert!(beta_coeffs(0.0, 5).is_err());
        assert!(beta_coeffs(1.0, 5).is_err());
    }

    #[test]
    fn zero_budgets_give_zero_bound() {
        let g = path_graph(4);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let x = DesignCovariance::symmetric(random_elliptope(4, 1), CovMode::Exact).unwrap();
        let params = TradeoffParams { eta: 0.0, gamma: 0.0, kappa: 0.0, ..Default::default() };
        for mode in [BoundMode::Symmetric, BoundMode::General] {
            let v = mse_bound_ht(&x, &params, &bundle, mode).unwrap();
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn symmetric_bound_identity_closed_form() {
        let n = 6;
        let g = path_graph(n);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let x = DesignCovariance::symmetric(DMatrix::identity(n, n), CovMode::Exact).unwrap();
        let params = TradeoffParams {
            eta: 0.0,
            gamma: 0.0,
            kappa: 2.0,
            q: 3.0,
            delta: 0.5,
            a: 1.0,
            b: 2.0,
            ..Default::default()
        };
        let nf = n as f64;
        let delta_cap = (1.0 + 1.0f64).powi(2) + 0.5;
        let expect = 28.0 / (nf * nf) * (delta_cap * nf + 1.25 * 2.0 * nf.powf(1.0 / 3.0));
        let v = mse_bound_ht(&x, &params, &bundle, BoundMode::Symmetric).unwrap();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
    }

    #[test]
    fn general_bound_term_by_term_oracle() {
        // Straight-line recomputation of each term on a 4-node path with the
        // Bernoulli closed-form covariance.
        let n = 4;
        let g = path_graph(n);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let x = DesignCovariance::symmetric(DMatrix::identity(n, n), CovMode::Exact).unwrap();
        let params = TradeoffParams { eta: 1.0, gamma: 1.0, kappa: 1.0, q: 2.0, ..Default::default() };
        let (b1, b2) = beta_coeffs(0.5, n).unwrap();
        let bb = b1 * b1 + b2 * b2;
        let t_l = bundle.laplacian().trace();
        let t_ld = bundle.lap_pinv().trace();
        let frob = (n as f64).sqrt();
        let expect = 7.0 * (b1 * b1 * t_l + bb * t_ld + bb * frob);
        let v = mse_bound_ht(&x, &params, &bundle, BoundMode::General).unwrap();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
    }

    #[test]
    fn symmetric_mode_rejects_off_half_p() {
        let g = path_graph(3);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let x = DesignCovariance::symmetric(DMatrix::identity(3, 3), CovMode::Exact).unwrap();
        let params = TradeoffParams { p: 0.4, ..Default::default() };
        assert!(mse_bound_ht(&x, &params, &bundle, BoundMode::Symmetric).is_err());
        assert!(mse_bound_ht(&x, &params, &bundle, BoundMode::General).is_ok());
    }

    #[test]
    fn bounds_monotone_in_budgets() {
        let g = path_graph(5);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let x = DesignCovariance::symmetric(random_elliptope(5, 3), CovMode::Exact).unwrap();
        let base = TradeoffParams { a: 0.3, b: 0.4, ..Default::default() };
        let v0 = mse_bound_ht(&x, &base, &bundle, BoundMode::General).unwrap();
        assert!(v0 >= 0.0);
        for bump in [
            TradeoffParams { eta: 2.0, ..base },
            TradeoffParams { gamma: 2.0, ..base },
            TradeoffParams { kappa: 2.0, ..base },
            TradeoffParams { delta: 1.0, ..base },
        ] {
            let v = mse_bound_ht(&x, &bump, &bundle, BoundMode::General).unwrap();
            assert!(v >= v0 - 1e-12, "bound not monotone: {v} < {v0}");
        }
    }

    #[test]
    fn dim_bound_requires_side_condition() {
        let n = 6;
        let g = path_graph(n);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        // Bernoulli second moment: 1ᵀcov1 = n != 0.
        let bad = DesignCovariance::symmetric(DMatrix::identity(n, n), CovMode::Exact).unwrap();
        let params = TradeoffParams::default();
        assert!(mse_bound_dim(&bad, &params, &bundle, 3).is_err());
    }

    #[test]
    fn dim_bound_oracle_and_balanced_coefficients() {
        let n = 6usize;
        let g = path_graph(n);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        // Complete-randomization covariance at n1 = n/2.
        let nf = n as f64;
        let xm = DMatrix::identity(n, n) * (1.0 + 1.0 / (nf - 1.0))
            - DMatrix::from_element(n, n, 1.0 / (nf - 1.0));
        let x = DesignCovariance::symmetric(xm.clone(), CovMode::Exact).unwrap();
        let params = TradeoffParams { eta: 1.0, gamma: 1.0, kappa: 1.0, q: 2.0, ..Default::default() };
        let v = mse_bound_dim(&x, &params, &bundle, n / 2).unwrap();
        // Oracle: coefficients 4γ/n², 5η/n², 5κ/n² inside the braces.
        let expect = 7.0 / (nf * nf)
            * (4.0 * trace_prod(bundle.laplacian(), &xm)
                + 5.0 * trace_prod(bundle.lap_pinv(), &xm)
                + 5.0 * schatten_norm(&xm, 2.0).unwrap());
        assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
        // Zero budgets give zero.
        let zero = TradeoffParams { eta: 0.0, gamma: 0.0, kappa: 0.0, ..Default::default() };
        assert_abs_diff_eq!(mse_bound_dim(&x, &zero, &bundle, 3).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn projection_bound_reduces_on_connected_graphs() {
        let n = 5;
        let g = path_graph(n);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let x = DesignCovariance::symmetric(random_elliptope(n, 7), CovMode::Exact).unwrap();
        let params = TradeoffParams { a: 0.0, b: 0.0, ..Default::default() };
        let alpha = DVector::from_element(n, 2.0);
        let phi = DVector::from_element(n, 3.0);
        // Connected: Π = 11ᵀ/n, so the projection term is n(β1a + β2b)²Tr(ΠX).
        let (b1, b2) = beta_coeffs(0.5, n).unwrap();
        let cov = x.cov();
        let proj_term =
            n as f64 * (b1 * 2.0 + b2 * 3.0).powi(2) * trace_prod(bundle.kernel_proj(), &cov);
        let bb = b1 * b1 + b2 * b2;
        let expect = 6.0
            * (b1 * b1 * trace_prod(bundle.laplacian(), &cov)
                + bb * trace_prod(bundle.lap_pinv(), &cov)
                + bb * schatten_norm(&cov, 2.0).unwrap()
                + proj_term);
        let v = mse_bound_projection(&x, &params, &bundle, &alpha, &phi).unwrap();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
    }

    #[test]
    fn projection_bound_two_component_oracle() {
        let g =
            WeightedGraph::from_edges(6, &[(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0)]).unwrap();
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(bundle.component_count(), 2);
        let x = DesignCovariance::symmetric(random_elliptope(6, 9), CovMode::Exact).unwrap();
        let mut rng = substream(10, "proj");
        let alpha = DVector::from_fn(6, |_, _| rng.random::<f64>());
        let phi = DVector::from_fn(6, |_, _| rng.random::<f64>());
        let params = TradeoffParams { q: 2.0, ..Default::default() };
        let (b1, b2) = beta_coeffs(0.5, 6).unwrap();
        let bb = b1 * b1 + b2 * b2;
        let cov = x.cov();
        let proj = bundle.kernel_proj();
        let mixed = proj * (&alpha * b1 + &phi * b2);
        let expect = 6.0
            * (b1 * b1 * trace_prod(bundle.laplacian(), &cov)
                + bb * trace_prod(bundle.lap_pinv(), &cov)
                + bb * cov.norm()
                + mixed.norm_squared() * trace_prod(proj, &cov));
        let v = mse_bound_projection(&x, &params, &bundle, &alpha, &phi).unwrap();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
    }

    #[test]
    fn kernel_bound_reduces_to_general_ht() {
        // Homophily budget on both components with kernel L, interference on
        // the baseline with kernel L†, Schatten terms on both components:
        // matches the general bound up to the leading constants 6 vs 7.
        let n = 5;
        let g = path_graph(n);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        let x = DesignCovariance::symmetric(random_elliptope(n, 13), CovMode::Exact).unwrap();
        let params = TradeoffParams {
            eta: 0.7,
            gamma: 1.3,
            kappa: 0.9,
            q: 2.0,
            a: 0.2,
            b: 0.1,
            p: 0.35,
            ..Default::default()
        };
        let lap = KernelMatrix::new(bundle.laplacian().clone()).unwrap();
        let lap_pinv = KernelMatrix::new(bundle.lap_pinv().clone()).unwrap();
        let kernel_terms = vec![
            KernelTerm { budget: params.eta, kernel: lap.clone(), side: OutcomeSide::Baseline },
            KernelTerm { budget: params.eta, kernel: lap, side: OutcomeSide::Effect },
            KernelTerm { budget: params.gamma, kernel: lap_pinv, side: OutcomeSide::Baseline },
        ];
        let schatten_terms = vec![
            SchattenTerm { budget: params.kappa, q: 2.0, side: OutcomeSide::Baseline },
            SchattenTerm { budget: params.kappa, q: 2.0, side: OutcomeSide::Effect },
        ];
        let v_kernel = mse_bound_kernels(
            &x,
            &kernel_terms,
            &schatten_terms,
            (params.a, params.b),
            params.p,
            DEFAULT_ZERO_TOL,
        )
        .unwrap();
        let v_general = mse_bound_ht(&x, &params, &bundle, BoundMode::General).unwrap();
        // 5 terms -> constant 6; the general bound carries 7.
        assert_abs_diff_eq!(v_kernel / 6.0, v_general / 7.0, epsilon = 1e-9 * v_general.abs());
    }

    #[test]
    fn kernel_bound_empty_terms() {
        let n = 4;
        let x = DesignCovariance::symmetric(random_elliptope(n, 2), CovMode::Exact).unwrap();
        let (b1, b2) = beta_coeffs(0.5, n).unwrap();
        let cov = x.cov();
        let expect = (0.3 * b1 + 0.7 * b2).powi(2) * cov.iter().sum::<f64>();
        let v = mse_bound_kernels(&x, &[], &[], (0.3, 0.7), 0.5, DEFAULT_ZERO_TOL).unwrap();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
    }

    #[test]
    fn kernel_bound_two_random_kernels_oracle() {
        let n = 5;
        let x = DesignCovariance::symmetric(random_elliptope(n, 21), CovMode::Exact).unwrap();
        let k1 = KernelMatrix::new(random_psd(n, 22)).unwrap();
        let k2 = KernelMatrix::new(random_psd(n, 23)).unwrap();
        let terms = vec![
            KernelTerm { budget: 0.5, kernel: k1.clone(), side: OutcomeSide::Baseline },
            KernelTerm { budget: 1.5, kernel: k2.clone(), side: OutcomeSide::Effect },
        ];
        let (b1, b2) = beta_coeffs(0.5, n).unwrap();
        let cov = x.cov();
        let expect = 3.0
            * (0.5 * b1 * b1 * trace_prod(&k1.pinv(DEFAULT_ZERO_TOL), &cov)
                + 1.5 * b2 * b2 * trace_prod(&k2.pinv(DEFAULT_ZERO_TOL), &cov));
        let v = mse_bound_kernels(&x, &terms, &[], (0.0, 0.0), 0.5, DEFAULT_ZERO_TOL).unwrap();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
    }

    #[test]
    fn tight_homophily_term() {
        let n = 6;
        let g = path_graph(n);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        // X = I: the tight term is η λ_max(L†).
        let id = DMatrix::identity(n, n);
        let (vals, _) = sym_eigen_sorted(bundle.lap_pinv()).unwrap();
        let v = homophily_term_tight(&id, &bundle, 2.0).unwrap();
        assert_abs_diff_eq!(v, 2.0 * vals[n - 1], epsilon = 1e-9);
        // X = 11ᵀ: the ones vector sits in ker L†, so the term vanishes.
        let ones = DMatrix::from_element(n, n, 1.0);
        assert_abs_diff_eq!(homophily_term_tight(&ones, &bundle, 2.0).unwrap(), 0.0, epsilon = 1e-9);
        // Tight term never exceeds the trace term.
        let x = random_elliptope(n, 31);
        let tight = homophily_term_tight(&x, &bundle, 1.0).unwrap();
        let loose = trace_prod(bundle.lap_pinv(), &x);
        assert!(tight <= loose + 1e-10);
    }

    #[test]
    fn quad_term_closed_forms() {
        let n = 5;
        let g = path_graph(n);
        let bundle = build_bundle(&g, DEFAULT_ZERO_TOL).unwrap();
        assert_abs_diff_eq!(
            quad_interference_term(&DMatrix::zeros(n, n), &bundle),
            0.0,
            epsilon = 1e-14
        );
        // Formal K = I, X = I: n² + 2n.
        let id = DMatrix::identity(n, n);
        let v = quad_form_second_moment(&id, &id);
        assert_abs_diff_eq!(v, (n * n + 2 * n) as f64, epsilon = 1e-12);
    }

    #[test]
    fn dual_witness_identities() {
        let n = 6;
        // X = I, q* = 2 -> value κ√n, Σ* = κI/√n.
        let id = DMatrix::identity(n, n);
        let (v, sigma) = schatten_dual_witness(&id, 2.0, 1.5).unwrap();
        assert_abs_diff_eq!(v, 1.5 * (n as f64).sqrt(), epsilon = 1e-12);
        assert!((sigma - DMatrix::identity(n, n) * (1.5 / (n as f64).sqrt())).norm() < 1e-10);

        // Rank-1 X, q* = 1 -> value κ λ_max, Σ* with trace κ achieving it.
        let mut rng = substream(8, "witness");
        let u = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        let x1 = &u * u.transpose();
        let (v, sigma) = schatten_dual_witness(&x1, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(v, 2.0 * u.norm_squared(), epsilon = 1e-10);
        assert_abs_diff_eq!((&x1 * &sigma).trace(), v, epsilon = 1e-8);

        // Random PSD, q* = 2: Tr(XΣ*) = κ‖X‖_F.
        let x = random_psd(n, 9);
        let (v, sigma) = schatten_dual_witness(&x, 2.0, 3.0).unwrap();
        assert_abs_diff_eq!((&x * &sigma).trace(), 3.0 * x.norm(), epsilon = 1e-10);
        assert_abs_diff_eq!(v, 3.0 * x.norm(), epsilon = 1e-12);
        assert!(schatten_dual_witness(&x, 0.5, 1.0).is_err());
    }

    #[test]
    fn dual_witness_budget_is_tight() {
        let x = random_psd(7, 12);
        for q_star in [1.0, 2.0, 3.0, 1.5] {
            let kappa = 2.5;
            let (value, sigma) = schatten_dual_witness(&x, q_star, kappa).unwrap();
            let norm = schatten_norm(&sigma, q_star).unwrap();
            assert_abs_diff_eq!(norm, kappa, epsilon = 1e-8);
            assert_abs_diff_eq!((&x * &sigma).trace(), value, epsilon = 1e-8);
        }
    }

    #[test]
    fn cluster_second_moment_frobenius_identity() {
        // Block-ones second moment: Tr(X²) equals the sum of squared cluster
        // sizes.
        let sizes = [3usize, 2];
        let n: usize = sizes.iter().sum();
        let mut x = DMatrix::zeros(n, n);
        let mut start = 0;
        for &s in &sizes {
            for i in start..start + s {
                for j in start..start + s {
                    x[(i, j)] = 1.0;
                }
            }
            start += s;
        }
        let frob2 = schatten_norm(&x, 2.0).unwrap().powi(2);
        assert_abs_diff_eq!(frob2, 13.0, epsilon = 1e-10);
    }
}
