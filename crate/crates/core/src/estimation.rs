//! Outcome realization, estimators, and the Monte-Carlo MSE harness.
//!
//! The harness pairs every design with adversarial outcomes built from that
//! design's own covariance: the homophily and noise components target the
//! covariance directly, and the interference vector is rebuilt per trial
//! from the realized assignment. MSE is therefore a conditional-then-
//! averaged quantity, which is the convention the worst-case bound applies
//! to. Trials are keyed by `(seed, design, trial-index)` and merged in
//! index order, so runs are deterministic and trivially parallel.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::adversary::{
    assemble_outcomes, worst_homophily, worst_interference, Interference, NoiseModel,
    PotentialOutcomes,
};
use crate::baselines::{
    bernoulli_covariance, bernoulli_design, cluster_covariance, cluster_design, complete_covariance,
    complete_design, compute_clusters, Clustering, ClusterMethod,
};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::gsw::{build_a, lambda_opt, AForm, AWeights, GswInputs, GswSampler};
use crate::objective::{
    beta_coeffs, mse_bound_ht, BoundMode, DesignCovariance, ObjectiveSpec, TradeoffParams,
};
use crate::rng::{child_seed, substream_indexed};
use crate::rounding::{
    empirical_covariance, gaussian_rounding, quantile_rounding, rounded_design_covariance,
    Assignment,
};
use crate::sdp::{solve_bm, SolverConfig};
use crate::spectra::SpectralBundle;

/// `Y(z) = α + φ∘z + s(z)`.
pub fn realize_outcomes(po: &PotentialOutcomes, z: &DVector<f64>) -> Result<DVector<f64>> {
    let n = po.alpha.len();
    if z.len() != n {
        return Err(Error::dims("assignment length mismatch"));
    }
    if z.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("z must be binary"));
    }
    let s = po.interference.eval(z)?;
    Ok(&po.alpha + po.phi.component_mul(z) + s)
}

/// Horvitz-Thompson estimate `⟨Y, z/(pn) - (1-z)/((1-p)n)⟩`.
pub fn ht_estimate(y: &DVector<f64>, z: &DVector<f64>, p: f64) -> f64 {
    let n = y.len() as f64;
    let mut acc = 0.0;
    for i in 0..y.len() {
        let w = if z[i] > 0.5 { 1.0 / (p * n) } else { -1.0 / ((1.0 - p) * n) };
        acc += y[i] * w;
    }
    acc
}

/// Difference in means `⟨z,Y⟩/n₁ - ⟨1-z,Y⟩/n₀`; errors on all-treated or
/// all-control input.
pub fn dim_estimate(y: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
    let n1 = z.iter().filter(|&&v| v > 0.5).count();
    let n0 = z.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::invalid("difference in means needs both groups nonempty"));
    }
    let mut treated = 0.0;
    let mut control = 0.0;
    for i in 0..y.len() {
        if z[i] > 0.5 {
            treated += y[i];
        } else {
            control += y[i];
        }
    }
    Ok(treated / n1 as f64 - control / n0 as f64)
}

/// Global average treatment effect `⟨1, φ⟩/n`.
pub fn gate(po: &PotentialOutcomes) -> f64 {
    po.phi.mean()
}

/// One design to run through the harness.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignSpec {
    Bernoulli,
    Complete { n1: usize },
    Cluster { method: ClusterMethod },
    /// Solve the bound-weighted SDP, then Gaussian rounding.
    SdpGaussRound,
    /// Solve the bound-weighted SDP, then quantile rounding.
    SdpQuantRound,
    /// Adapted Gram-Schmidt walk at the minimizing λ.
    Gsw { form: AForm },
    /// A fixed assignment vector (degenerate design; its bound is not
    /// meaningful because the marginal-probability assumption fails).
    Fixed { x: Vec<f64> },
}

impl DesignSpec {
    pub fn name(&self) -> String {
        match self {
            DesignSpec::Bernoulli => "bernoulli".into(),
            DesignSpec::Complete { .. } => "complete".into(),
            DesignSpec::Cluster { method } => match method {
                ClusterMethod::Spectral { .. } => "cluster-spectral".into(),
                ClusterMethod::EpsilonNet { .. } => "cluster-epsilon-net".into(),
                ClusterMethod::GreedyModularity => "cluster-greedy-modularity".into(),
            },
            DesignSpec::SdpGaussRound => "sdp-gauss".into(),
            DesignSpec::SdpQuantRound => "sdp-quant".into(),
            DesignSpec::Gsw { .. } => "gsw".into(),
            DesignSpec::Fixed { .. } => "fixed".into(),
        }
    }
}

/// One harness run: a parameter point, a design list, trial and
/// covariance-draw counts, and the root seed.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub params: TradeoffParams,
    pub designs: Vec<DesignSpec>,
    pub trials: usize,
    /// Draws behind empirical design covariances (designs without a closed
    /// form).
    pub cov_draws: usize,
    pub solver: SolverConfig,
    pub zero_tol: f64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(params: TradeoffParams, designs: Vec<DesignSpec>, trials: usize, seed: u64) -> Self {
        ExperimentSpec {
            params,
            designs,
            trials,
            cov_draws: 1000,
            solver: SolverConfig::default(),
            zero_tol: crate::spectra::DEFAULT_ZERO_TOL,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials == 0 {
            return Err(Error::invalid("need at least one trial"));
        }
        if self.designs.is_empty() {
            return Err(Error::invalid("need at least one design"));
        }
        Ok(())
    }
}

/// One output row of the harness.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub design: String,
    pub eta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub p: f64,
    pub q: f64,
    pub bound: f64,
    pub mse: f64,
    pub se: f64,
    pub trials: usize,
    /// Wall time; informational only and excluded from serialized output so
    /// reruns stay byte-identical.
    pub runtime_s: f64,
}

impl ResultRow {
    pub const CSV_HEADER: &'static str = "design,eta,gamma,kappa,p,q,bound,mse,se,trials";

    /// Deterministic CSV row (runtime excluded).
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.design,
            self.eta,
            self.gamma,
            self.kappa,
            self.p,
            self.q,
            self.bound,
            self.mse,
            self.se,
            self.trials
        )
    }
}

/// Harness output: completed rows plus per-design failures (a failing
/// design aborts only its own row).
#[derive(Debug, Clone, Default)]
pub struct PointOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<(String, String)>,
}

enum PreparedSampler {
    Bernoulli { p: f64 },
    Complete { n1: usize },
    Cluster { clustering: Clustering, p: f64 },
    Rounding { factor: DMatrix<f64>, p: f64, quantile: bool },
    Gsw(GswSampler),
    Fixed(DVector<f64>),
}

impl PreparedSampler {
    fn draw(&self, n: usize, seed: u64) -> Result<Assignment> {
        match self {
            PreparedSampler::Bernoulli { p } => bernoulli_design(n, *p, seed),
            PreparedSampler::Complete { n1 } => complete_design(n, *n1, seed),
            PreparedSampler::Cluster { clustering, p } => cluster_design(clustering, *p, seed),
            PreparedSampler::Rounding { factor, p, quantile } => {
                if *quantile {
                    quantile_rounding(factor, *p, "sdp-quant", seed)
                } else {
                    gaussian_rounding(factor, *p, "sdp-gauss", seed)
                }
            }
            PreparedSampler::Gsw(sampler) => sampler.sample(seed),
            PreparedSampler::Fixed(x) => Assignment::new(x.clone(), "fixed", seed),
        }
    }
}

struct PreparedDesign {
    name: String,
    sampler: PreparedSampler,
    cov: DesignCovariance,
}

fn prepare_design(
    design: &DesignSpec,
    graph: &WeightedGraph,
    bundle: &SpectralBundle,
    spec: &ExperimentSpec,
    sdp_factor: &mut Option<DMatrix<f64>>,
    design_idx: usize,
) -> Result<PreparedDesign> {
    let n = graph.n();
    let p = spec.params.p;
    let name = design.name();
    match design {
        DesignSpec::Bernoulli => Ok(PreparedDesign {
            name,
            sampler: PreparedSampler::Bernoulli { p },
            cov: bernoulli_covariance(n, p)?,
        }),
        DesignSpec::Complete { n1 } => Ok(PreparedDesign {
            name,
            sampler: PreparedSampler::Complete { n1: *n1 },
            cov: complete_covariance(n, *n1)?,
        }),
        DesignSpec::Cluster { method } => {
            let clustering =
                compute_clusters(graph, bundle, *method, child_seed(spec.seed, "clusters"))?;
            let cov = cluster_covariance(&clustering, p)?;
            Ok(PreparedDesign { name, sampler: PreparedSampler::Cluster { clustering, p }, cov })
        }
        DesignSpec::SdpGaussRound | DesignSpec::SdpQuantRound => {
            if sdp_factor.is_none() {
                let objective = ObjectiveSpec::for_ht_bound(&spec.params, bundle)?;
                let cfg = SolverConfig {
                    seed: child_seed(spec.seed, "sdp"),
                    ..spec.solver.clone()
                };
                let solution = solve_bm(&objective, n, &cfg)?;
                *sdp_factor = Some(solution.factor);
            }
            let factor = sdp_factor.as_ref().expect("cached factor").clone();
            let quantile = matches!(design, DesignSpec::SdpQuantRound);
            let x = &factor * factor.transpose();
            let cov = if !quantile || (p - 0.5).abs() < 1e-12 {
                // The arcsin law is exact for sign rounding at any p and for
                // quantile rounding at p = 1/2.
                rounded_design_covariance(&x, p)?
            } else {
                let f = factor.clone();
                empirical_covariance(
                    |t| {
                        Ok(quantile_rounding(
                            &f,
                            p,
                            "cov",
                            child_seed(spec.seed, &format!("cov-{design_idx}")) ^ t,
                        )?
                        .x)
                    },
                    spec.cov_draws,
                )?
            };
            Ok(PreparedDesign {
                name,
                sampler: PreparedSampler::Rounding { factor, p, quantile },
                cov,
            })
        }
        DesignSpec::Gsw { form } => {
            let weights = AWeights::from_params(&spec.params, n)?;
            let a = build_a(bundle, &weights, *form, None)?;
            let (b1, b2) = beta_coeffs(p, n)?;
            let kappa_tilde = spec.params.kappa * (b1 * b1 + b2 * b2);
            let xi = (0..n).map(|j| a.column(j).norm()).fold(0.0f64, f64::max);
            let lambda = if kappa_tilde > 0.0 && xi > 0.0 {
                lambda_opt(kappa_tilde, xi, n, spec.params.q)?
            } else {
                0.5
            };
            let inputs = GswInputs::new(a, lambda, DVector::from_element(n, p), spec.seed)?;
            let sampler = GswSampler::new(inputs)?;
            let cov_seed = child_seed(spec.seed, &format!("cov-{design_idx}"));
            let cov =
                empirical_covariance(|t| Ok(sampler.sample(cov_seed ^ t)?.x), spec.cov_draws)?;
            Ok(PreparedDesign { name, sampler: PreparedSampler::Gsw(sampler), cov })
        }
        DesignSpec::Fixed { x } => {
            let xv = DVector::from_vec(x.clone());
            if xv.len() != n {
                return Err(Error::dims("fixed assignment length mismatch"));
            }
            let second = &xv * xv.transpose();
            let cov = DesignCovariance::new(second, xv.clone(), crate::objective::CovMode::Exact)?;
            Ok(PreparedDesign { name, sampler: PreparedSampler::Fixed(xv), cov })
        }
    }
}

/// Run every design of `spec` on `graph` at one parameter point.
pub fn mse_monte_carlo(graph: &WeightedGraph, spec: &ExperimentSpec) -> Result<PointOutcome> {
    spec.validate()?;
    let bundle = crate::spectra::build_bundle(graph, spec.zero_tol)?;
    let mut outcome = PointOutcome::default();
    let mut sdp_factor: Option<DMatrix<f64>> = None;
    for (idx, design) in spec.designs.iter().enumerate() {
        let started = std::time::Instant::now();
        match run_single_design(graph, &bundle, spec, design, idx, &mut sdp_factor) {
            Ok(mut row) => {
                row.runtime_s = started.elapsed().as_secs_f64();
                outcome.rows.push(row);
            }
            Err(e) => outcome.failures.push((design.name(), e.to_string())),
        }
    }
    Ok(outcome)
}

fn run_single_design(
    graph: &WeightedGraph,
    bundle: &SpectralBundle,
    spec: &ExperimentSpec,
    design: &DesignSpec,
    design_idx: usize,
    sdp_factor: &mut Option<DMatrix<f64>>,
) -> Result<ResultRow> {
    let n = graph.n();
    let params = &spec.params;
    let prepared = prepare_design(design, graph, bundle, spec, sdp_factor, design_idx)?;
    let x_adv = prepared.cov.cov();
    let homophily = worst_homophily(bundle, &x_adv, params.eta)?;
    let noise = NoiseModel::new(&x_adv, params.kappa, params.q_dual())?;
    let draw_seed = child_seed(spec.seed, &format!("draw-{design_idx}"));

    let sq_errors: Vec<f64> = (0..spec.trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let assignment = prepared.sampler.draw(n, draw_seed ^ t as u64)?;
            let z = assignment.z();
            let mut noise_rng = substream_indexed(spec.seed, &format!("noise-{design_idx}"), t as u64);
            let eps_alpha = noise.sample(&mut noise_rng);
            let eps_phi = noise.sample(&mut noise_rng);
            let s = worst_interference(bundle, &assignment.x, params.gamma)?;
            let po = assemble_outcomes(
                params.a,
                params.b,
                &homophily.h,
                &eps_alpha,
                &homophily.h,
                &eps_phi,
                Interference::Fixed(s.s),
            )?;
            let y = realize_outcomes(&po, &z)?;
            let estimate = ht_estimate(&y, &z, params.p);
            let truth = gate(&po);
            Ok((estimate - truth) * (estimate - truth))
        })
        .collect::<Result<Vec<f64>>>()?;

    let m = spec.trials as f64;
    let mse = sq_errors.iter().sum::<f64>() / m;
    let var = if spec.trials > 1 {
        sq_errors.iter().map(|e| (e - mse) * (e - mse)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let se = (var / m).sqrt();
    let bound = mse_bound_ht(&prepared.cov, params, bundle, BoundMode::General)?;
    Ok(ResultRow {
        design: prepared.name,
        eta: params.eta,
        gamma: params.gamma,
        kappa: params.kappa,
        p: params.p,
        q: params.q,
        bound,
        mse,
        se,
        trials: spec.trials,
        runtime_s: 0.0,
    })
}
