//! Worst-case potential-outcome generators.
//!
//! Each generator saturates its budget exactly: the homophily component
//! maximizes `hᵀXh` subject to `hᵀLh ≤ η`, the noise covariance attains
//! `Tr(XΣ) = κ‖X‖_q` at `‖Σ‖_{q*} = κ`, and the interference vector attains
//! the Cauchy-Schwarz equality `⟨x, s⟩² = γ·xᵀLx` subject to `sᵀL†s ≤ γ`.
//! Budgets are binding, not just respected, which is what makes Monte-Carlo
//! MSE under these outcomes a meaningful stress test of the bounds.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::baselines::Clustering;
use crate::error::{Error, Result};
use crate::objective::schatten_dual_witness;
use crate::spectra::{sym_eigen_sorted, KernelMatrix, SpectralBundle};

/// Subtract the mean from every entry.
pub fn center(v: &DVector<f64>) -> DVector<f64> {
    let mean = v.mean();
    v.map(|e| e - mean)
}

/// The interference term `s(z)` attached to a set of potential outcomes.
#[derive(Debug, Clone)]
pub enum Interference {
    None,
    /// A fixed vector, independent of `z` (valid when built adversarially
    /// for the realized assignment).
    Fixed(DVector<f64>),
    /// Linear neighborhood interference `s(z) = -(γ/√n)·L̃z`.
    Neighborhood { gamma: f64, lap_tilde: DMatrix<f64> },
}

impl Interference {
    /// Evaluate at a binary assignment.
    pub fn eval(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Interference::None => Ok(DVector::zeros(z.len())),
            Interference::Fixed(s) => {
                if s.len() != z.len() {
                    return Err(Error::dims("interference vector length mismatch"));
                }
                Ok(s.clone())
            }
            Interference::Neighborhood { gamma, lap_tilde } => {
                if lap_tilde.nrows() != z.len() {
                    return Err(Error::dims("interference operator size mismatch"));
                }
                let n = z.len() as f64;
                Ok(lap_tilde * z * (-gamma / n.sqrt()))
            }
        }
    }
}

/// Baseline and effect vectors with their decomposition into mean, centered
/// homophilous, and centered noise components, plus the interference term.
#[derive(Debug, Clone)]
pub struct PotentialOutcomes {
    pub alpha: DVector<f64>,
    pub phi: DVector<f64>,
    pub interference: Interference,
    pub a: f64,
    pub b: f64,
    pub h_alpha: DVector<f64>,
    pub eps_alpha: DVector<f64>,
    pub h_phi: DVector<f64>,
    pub eps_phi: DVector<f64>,
}

/// Re-center the components to means `a`, `b` and attach the interference
/// closure: `α = a·1 + center(h_α) + center(ε_α)` and likewise for `φ`.
pub fn assemble_outcomes(
    a: f64,
    b: f64,
    h_alpha: &DVector<f64>,
    eps_alpha: &DVector<f64>,
    h_phi: &DVector<f64>,
    eps_phi: &DVector<f64>,
    interference: Interference,
) -> Result<PotentialOutcomes> {
    let n = h_alpha.len();
    if [eps_alpha.len(), h_phi.len(), eps_phi.len()].iter().any(|&l| l != n) {
        return Err(Error::dims("outcome components must share one length"));
    }
    let h_alpha = center(h_alpha);
    let eps_alpha = center(eps_alpha);
    let h_phi = center(h_phi);
    let eps_phi = center(eps_phi);
    let ones = DVector::from_element(n, 1.0);
    let alpha = &ones * a + &h_alpha + &eps_alpha;
    let phi = &ones * b + &h_phi + &eps_phi;
    Ok(PotentialOutcomes { alpha, phi, interference, a, b, h_alpha, eps_alpha, h_phi, eps_phi })
}

/// Homophily component maximizing `hᵀXh` under `hᵀLh ≤ η`.
///
/// `raw = √η·L^{†/2}·v` with `v` the top eigenvector of `L^{†/2}XL^{†/2}`;
/// `h` is `raw` centered (the Laplacian quadratic form is unchanged by
/// centering).
#[derive(Debug, Clone)]
pub struct WorstHomophily {
    pub h: DVector<f64>,
    pub raw: DVector<f64>,
    /// The attained value `rawᵀX raw = η·λ_max(L^{†/2}XL^{†/2})`.
    pub attained: f64,
}

pub fn worst_homophily(bundle: &SpectralBundle, x: &DMatrix<f64>, eta: f64) -> Result<WorstHomophily> {
    if eta < 0.0 {
        return Err(Error::invalid("eta must be >= 0"));
    }
    let n = bundle.n();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::dims("X must be n×n"));
    }
    if eta == 0.0 {
        return Ok(WorstHomophily { h: DVector::zeros(n), raw: DVector::zeros(n), attained: 0.0 });
    }
    let half = bundle.lap_pinv_sqrt();
    let inner = &half * x * &half;
    let (vals, vecs) = sym_eigen_sorted(&inner)?;
    let v = vecs.column(n - 1);
    let raw = &half * v * eta.sqrt();
    let attained = (eta * vals[n - 1]).max(0.0);
    Ok(WorstHomophily { h: center(&raw), raw, attained })
}

/// Budget-tight noise model: `Σ` with `‖Σ‖_{q*} = κ` attaining
/// `Tr(XΣ) = κ‖X‖_q`, plus its symmetric square root for sampling
/// `ε = Σ^{1/2}g`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub sigma: DMatrix<f64>,
    sqrt: DMatrix<f64>,
}

impl NoiseModel {
    pub fn new(x: &DMatrix<f64>, kappa: f64, q_star: f64) -> Result<Self> {
        if kappa < 0.0 {
            return Err(Error::invalid("kappa must be >= 0"));
        }
        let (_, sigma) = schatten_dual_witness(x, q_star, kappa)?;
        let sqrt = if kappa == 0.0 {
            DMatrix::zeros(x.nrows(), x.ncols())
        } else {
            KernelMatrix::new_symmetric(sigma.clone())?.psd_sqrt()?.matrix().clone()
        };
        Ok(NoiseModel { sigma, sqrt })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> DVector<f64> {
        let n = self.sqrt.nrows();
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.sqrt * g
    }
}

/// One draw from the budget-tight noise model; returns `(Σ, ε)`.
pub fn worst_noise(
    x: &DMatrix<f64>,
    kappa: f64,
    q_star: f64,
    rng: &mut impl Rng,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let model = NoiseModel::new(x, kappa, q_star)?;
    let eps = model.sample(rng);
    Ok((model.sigma, eps))
}

/// Interference saturating `γ`-interference for the realized assignment:
/// `s = √γ·Lx/‖L^{1/2}x‖`, centered. Returns a flag when `x` is constant on
/// every component (`‖L^{1/2}x‖ = 0`), in which case `s = 0`.
pub struct WorstInterference {
    pub s: DVector<f64>,
    pub raw: DVector<f64>,
    pub degenerate: bool,
}

pub fn worst_interference(
    bundle: &SpectralBundle,
    x: &DVector<f64>,
    gamma: f64,
) -> Result<WorstInterference> {
    if gamma < 0.0 {
        return Err(Error::invalid("gamma must be >= 0"));
    }
    let n = bundle.n();
    if x.len() != n {
        return Err(Error::dims("assignment length mismatch"));
    }
    let lap = bundle.laplacian();
    let quad = (x.transpose() * lap * x)[(0, 0)];
    if gamma == 0.0 || quad <= 1e-14 {
        return Ok(WorstInterference {
            s: DVector::zeros(n),
            raw: DVector::zeros(n),
            degenerate: gamma > 0.0 && quad <= 1e-14,
        });
    }
    let raw = lap * x * (gamma.sqrt() / quad.sqrt());
    Ok(WorstInterference { s: center(&raw), raw, degenerate: false })
}

/// Linear neighborhood interference `s(z) = -(γ/√n)·L̃z`; vanishes at all-0
/// and all-1 assignments.
pub fn neighborhood_interference(bundle: &SpectralBundle, gamma: f64) -> Interference {
    Interference::Neighborhood { gamma, lap_tilde: bundle.lap_tilde().clone() }
}

/// Group-level random effects: `ν_j ~ N(μ_f, σ²)` per group and component,
/// broadcast to members. The implied homophily budgets `hᵀLh` are reported
/// per component.
#[derive(Debug, Clone)]
pub struct RandomEffects {
    pub h_alpha: DVector<f64>,
    pub h_phi: DVector<f64>,
    pub eta_alpha: f64,
    pub eta_phi: f64,
}

pub fn random_effects_outcomes(
    groups: &Clustering,
    bundle: &SpectralBundle,
    mu_alpha: f64,
    mu_phi: f64,
    sigma2: f64,
    rng: &mut impl Rng,
) -> Result<RandomEffects> {
    if sigma2 < 0.0 {
        return Err(Error::invalid("sigma2 must be >= 0"));
    }
    let n = groups.n();
    if bundle.n() != n {
        return Err(Error::dims("clustering and graph sizes disagree"));
    }
    let sd = sigma2.sqrt();
    let draw = |rng: &mut dyn rand::RngCore, mu: f64| -> Vec<f64> {
        (0..groups.k)
            .map(|_| {
                let z: f64 = rand_distr::Distribution::sample(&StandardNormal, rng);
                mu + sd * z
            })
            .collect()
    };
    let nu_alpha = draw(rng, mu_alpha);
    let nu_phi = draw(rng, mu_phi);
    let h_alpha = DVector::from_fn(n, |i, _| nu_alpha[groups.labels[i]]);
    let h_phi = DVector::from_fn(n, |i, _| nu_phi[groups.labels[i]]);
    let lap = bundle.laplacian();
    let quad = |h: &DVector<f64>| (h.transpose() * lap * h)[(0, 0)];
    Ok(RandomEffects { eta_alpha: quad(&h_alpha), eta_phi: quad(&h_phi), h_alpha, h_phi })
}

/// Covariate/group CSV (`unit,group-label`); the labels become a
/// [`Clustering`] usable as random-effects groups.
pub fn load_groups(path: impl AsRef<std::path::Path>, n: usize) -> Result<Clustering> {
    Clustering::read_csv(path, n)
}
