//! Random ±1 assignments from an elliptope matrix.
//!
//! Gaussian rounding samples `ξ = Vg` with standard normal `g`, takes
//! coordinate signs, and thins the positive side with Rademacher draws so
//! every marginal is exactly `p`. Its entrywise covariance law,
//! `Cov(ζ_i, ζ_j) = (8p²/π)·arcsin(X_ij)` off the diagonal and `4p(1-p)` on
//! it, is what the rounded design inherits from the solved matrix. Quantile
//! rounding instead thresholds each Gaussian coordinate at its own
//! `(1-p)`-quantile and coincides with sign rounding at `p = 1/2`.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::objective::{CovMode, DesignCovariance};

/// A realized assignment in `{-1,+1}^n` with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub x: DVector<f64>,
    /// Design identifier, free-form.
    pub design: String,
    pub seed: u64,
}

impl Assignment {
    pub fn new(x: DVector<f64>, design: impl Into<String>, seed: u64) -> Result<Self> {
        if x.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::invalid("assignment entries must be exactly ±1"));
        }
        Ok(Assignment { x, design: design.into(), seed })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Binary view `z = (x + 1)/2`.
    pub fn z(&self) -> DVector<f64> {
        self.x.map(|v| (v + 1.0) / 2.0)
    }

    pub fn treated_count(&self) -> usize {
        self.x.iter().filter(|&&v| v > 0.0).count()
    }

    /// CSV column of ±1 preceded by a `#`-prefixed JSON provenance header.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path.as_ref())?;
        let header = serde_json::json!({ "design": self.design, "seed": self.seed, "n": self.n() });
        writeln!(file, "# {header}")?;
        for v in self.x.iter() {
            writeln!(file, "{}", *v as i64)?;
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let reader = BufReader::new(file);
        let mut design = String::new();
        let mut seed = 0;
        let mut values = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let meta: serde_json::Value =
                    serde_json::from_str(rest.trim()).map_err(|e| Error::parse(e.to_string()))?;
                design = meta["design"].as_str().unwrap_or_default().to_string();
                seed = meta["seed"].as_u64().unwrap_or(0);
                continue;
            }
            let v: i64 = line.parse().map_err(|_| Error::parse(format!("bad entry '{line}'")))?;
            values.push(v as f64);
        }
        Assignment::new(DVector::from_vec(values), design, seed)
    }
}

fn check_factor(factor: &DMatrix<f64>) -> Result<()> {
    for i in 0..factor.nrows() {
        let d = factor.row(i).norm_squared();
        if (d - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("factor row {i} has squared norm {d}, want 1")));
        }
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p = {p} must be in (0,1)")));
    }
    Ok(())
}

// The Gaussian draw and the Rademacher thinning use independent child
// streams so either stage replays in isolation.
fn stage_rngs(rng: &mut impl Rng) -> (ChaCha8Rng, ChaCha8Rng) {
    let g = ChaCha8Rng::seed_from_u64(rng.random());
    let t = ChaCha8Rng::seed_from_u64(rng.random());
    (g, t)
}

/// Sign rounding with Rademacher thinning; marginals are exactly `p`.
///
/// `factor` is any `n×r` matrix with unit-norm rows whose Gram matrix is the
/// design matrix (`X = VVᵀ`); sampling through the factor avoids factorizing
/// a near-singular `X`. Probabilities above 1/2 are handled by rounding for
/// `1-p` and negating.
pub fn gaussian_rounding(
    factor: &DMatrix<f64>,
    p: f64,
    design: impl Into<String>,
    seed: u64,
) -> Result<Assignment> {
    check_p(p)?;
    check_factor(factor)?;
    let flip = p > 0.5;
    let pm = if flip { 1.0 - p } else { p };
    let mut root = crate::rng::substream(seed, "gauss-round");
    let (mut g_rng, mut t_rng) = stage_rngs(&mut root);
    let r = factor.ncols();
    let g = DVector::from_fn(r, |_, _| g_rng.sample::<f64, _>(StandardNormal));
    let xi = factor * g;
    let x = DVector::from_fn(factor.nrows(), |i, _| {
        let sign_up = xi[i] > 0.0;
        let up = if sign_up { t_rng.random::<f64>() < 2.0 * pm } else { false };
        let v: f64 = if up { 1.0 } else { -1.0 };
        if flip {
            -v
        } else {
            v
        }
    });
    Assignment::new(x, design, seed)
}

/// Per-coordinate quantile thresholding: `ζ_i = +1` iff
/// `ξ_i ≥ √(X_ii)·Φ^{-1}(1-p)`. Marginals are exactly `p` for any
/// `p ∈ (0,1)`; at `p = 1/2` this is sign rounding.
pub fn quantile_rounding(
    factor: &DMatrix<f64>,
    p: f64,
    design: impl Into<String>,
    seed: u64,
) -> Result<Assignment> {
    check_p(p)?;
    check_factor(factor)?;
    let mut root = crate::rng::substream(seed, "quant-round");
    let (mut g_rng, _) = stage_rngs(&mut root);
    let r = factor.ncols();
    let g = DVector::from_fn(r, |_, _| g_rng.sample::<f64, _>(StandardNormal));
    let xi = factor * g;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let x = DVector::from_fn(factor.nrows(), |i, _| {
        let t = factor.row(i).norm() * normal.inverse_cdf(1.0 - p);
        if xi[i] >= t {
            1.0
        } else {
            -1.0
        }
    });
    Assignment::new(x, design, seed)
}

/// Closed-form covariance of the Gaussian-rounded design:
/// `Ξ_ij = (8p²/π)·arcsin(X_ij)` for `i ≠ j`, `Ξ_ii = 4p(1-p)`.
/// For `p > 1/2` the negation symmetry applies the law at `1-p`.
pub fn theoretical_rounded_cov(x: &DMatrix<f64>, p: f64) -> Result<DMatrix<f64>> {
    check_p(p)?;
    let pm = p.min(1.0 - p);
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                out[(i, i)] = 4.0 * p * (1.0 - p);
            } else {
                let v = x[(i, j)];
                if v.abs() > 1.0 + 1e-9 {
                    return Err(Error::invalid(format!("|X_{i}{j}| = {v} exceeds 1")));
                }
                out[(i, j)] = 8.0 * pm * pm / PI * v.clamp(-1.0, 1.0).asin();
            }
        }
    }
    Ok(out)
}

/// Second-moment matrix of the rounded design (covariance plus `μμᵀ` with
/// `μ = (2p-1)·1`), packaged for bound evaluation.
pub fn rounded_design_covariance(x: &DMatrix<f64>, p: f64) -> Result<DesignCovariance> {
    let cov = theoretical_rounded_cov(x, p)?;
    let n = x.nrows();
    let mean = DVector::from_element(n, 2.0 * p - 1.0);
    let second = &cov + &mean * mean.transpose();
    DesignCovariance::new(second, mean, CovMode::Exact)
}

/// Sample mean and second moment over `draws` calls of `sampler` (indexed
/// for replicability). Reports the largest entrywise Monte-Carlo standard
/// error of the second moment.
pub fn empirical_covariance<F>(mut sampler: F, draws: usize) -> Result<DesignCovariance>
where
    F: FnMut(u64) -> Result<DVector<f64>>,
{
    if draws < 2 {
        return Err(Error::invalid("need at least 2 draws"));
    }
    let first = sampler(0)?;
    let n = first.len();
    let mut mean: DVector<f64> = DVector::zeros(n);
    let mut second: DMatrix<f64> = DMatrix::zeros(n, n);
    let mut second_sq: DMatrix<f64> = DMatrix::zeros(n, n);
    let mut accumulate = |x: &DVector<f64>| {
        mean += x;
        for i in 0..n {
            for j in 0..n {
                let prod = x[i] * x[j];
                second[(i, j)] += prod;
                second_sq[(i, j)] += prod * prod;
            }
        }
    };
    accumulate(&first);
    for t in 1..draws {
        let x = sampler(t as u64)?;
        if x.len() != n {
            return Err(Error::dims("sampler changed dimension"));
        }
        accumulate(&x);
    }
    let m = draws as f64;
    mean /= m;
    second /= m;
    let mut max_se = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let var = (second_sq[(i, j)] / m - second[(i, j)].powi(2)).max(0.0);
            max_se = max_se.max((var / m).sqrt());
        }
    }
    DesignCovariance::new(second, mean, CovMode::Empirical { samples: draws, max_se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;

    fn identity_factor(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    fn ones_factor(n: usize) -> DMatrix<f64> {
        // Rank-1 all-ones X.
        DMatrix::from_element(n, 1, 1.0)
    }

    #[test]
    fn provenance_round_trip() {
        let a = Assignment::new(DVector::from_vec(vec![1.0, -1.0, 1.0]), "unit", 7).unwrap();
        let mut path = std::env::temp_dir();
        path.push(format!("netdesign-assign-{}.csv", std::process::id()));
        a.write_csv(&path).unwrap();
        let b = Assignment::read_csv(&path).unwrap();
        assert_eq!(a, b);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn rejects_non_sign_entries() {
        assert!(Assignment::new(DVector::from_vec(vec![1.0, 0.5]), "bad", 0).is_err());
    }

    #[test]
    fn identity_cov_gives_independent_fair_signs() {
        let n = 6;
        let v = identity_factor(n);
        let draws = 100_000;
        let cov = empirical_covariance(|t| Ok(gaussian_rounding(&v, 0.5, "iid", t)?.x), draws).unwrap();
        let tol = 3.0 / (draws as f64).sqrt();
        for i in 0..n {
            assert_abs_diff_eq!(cov.second_moment()[(i, i)], 1.0, epsilon = 1e-12);
            for j in 0..n {
                if i != j {
                    assert!(cov.cov()[(i, j)].abs() <= tol * 3.0);
                }
            }
        }
    }

    #[test]
    fn rank_one_cov_gives_perfectly_correlated_draws() {
        let v = ones_factor(5);
        for t in 0..50 {
            let a = gaussian_rounding(&v, 0.5, "ones", t).unwrap();
            let first = a.x[0];
            assert!(a.x.iter().all(|&e| e == first));
        }
        // At any p, the quantile rounder is all-(+1) w.p. p else all-(-1).
        let mut plus = 0;
        let m = 20_000;
        for t in 0..m {
            let a = quantile_rounding(&v, 0.3, "ones", t).unwrap();
            let first = a.x[0];
            assert!(a.x.iter().all(|&e| e == first));
            if first > 0.0 {
                plus += 1;
            }
        }
        let frac = plus as f64 / m as f64;
        assert!((frac - 0.3).abs() < 0.02, "all-plus fraction {frac}");
    }

    #[test]
    fn grothendieck_pair_correlation() {
        // X_ij = 0.5 at p = 1/2: Cov -> (2/π)·arcsin(1/2) = 1/3.
        let mut v = DMatrix::zeros(2, 2);
        v[(0, 0)] = 1.0;
        v[(1, 0)] = 0.5;
        v[(1, 1)] = (1.0f64 - 0.25).sqrt();
        let draws = 200_000;
        let mut acc = 0.0;
        for t in 0..draws {
            let a = gaussian_rounding(&v, 0.5, "pair", t).unwrap();
            acc += a.x[0] * a.x[1];
        }
        let emp = acc / draws as f64;
        assert!((emp - 1.0 / 3.0).abs() < 0.01, "empirical covariance {emp}");
    }

    #[test]
    fn rounded_cov_closed_form_values() {
        let mut x = DMatrix::identity(2, 2);
        x[(0, 1)] = 1.0;
        x[(1, 0)] = 1.0;
        let xi = theoretical_rounded_cov(&x, 0.5).unwrap();
        assert_abs_diff_eq!(xi[(0, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xi[(0, 0)], 1.0, epsilon = 1e-12);

        x[(0, 1)] = 0.0;
        x[(1, 0)] = 0.0;
        let xi = theoretical_rounded_cov(&x, 0.5).unwrap();
        assert_abs_diff_eq!(xi[(0, 1)], 0.0, epsilon = 1e-12);

        x[(0, 1)] = 0.5;
        x[(1, 0)] = 0.5;
        let xi = theoretical_rounded_cov(&x, 0.25).unwrap();
        // (8·0.0625/π)(π/6) = 1/12.
        assert_abs_diff_eq!(xi[(0, 1)], 1.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xi[(0, 0)], 0.75, epsilon = 1e-12);

        x[(0, 1)] = 1.5;
        assert!(theoretical_rounded_cov(&x, 0.5).is_err());
    }

    #[test]
    fn thresholds_vanish_at_half() {
        // Quantile and Gaussian rounding agree in distribution at p = 1/2;
        // with the same seed they share the Gaussian but not the thinning
        // stream, so compare marginal means instead.
        let n = 4;
        let v = identity_factor(n);
        let m = 50_000;
        let (mut g_mean, mut q_mean) = (0.0, 0.0);
        for t in 0..m {
            g_mean += gaussian_rounding(&v, 0.5, "g", t).unwrap().x.sum();
            q_mean += quantile_rounding(&v, 0.5, "q", t).unwrap().x.sum();
        }
        let scale = m as f64 * n as f64;
        assert!((g_mean / scale).abs() < 0.02);
        assert!((q_mean / scale).abs() < 0.02);
    }

    #[test]
    fn marginals_are_exact_for_both_rounders() {
        let n = 5;
        let mut rng = substream(3, "factor");
        let mut v = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        for i in 0..n {
            let norm = v.row(i).norm();
            let mut row = v.row_mut(i);
            row /= norm;
        }
        let m = 40_000;
        for p in [0.25, 0.4, 0.5, 0.7] {
            let expect = 2.0 * p - 1.0;
            let se = ((1.0 - expect * expect) / m as f64).sqrt();
            let rounders: [(&str, Box<dyn Fn(u64) -> Assignment>); 2] = [
                ("gauss", Box::new(|t| gaussian_rounding(&v, p, "g", t).unwrap())),
                ("quant", Box::new(|t| quantile_rounding(&v, p, "q", t).unwrap())),
            ];
            for (name, round) in rounders {
                let mut mean: DVector<f64> = DVector::zeros(n);
                for t in 0..m {
                    mean += round(t as u64).x;
                }
                mean /= m as f64;
                for i in 0..n {
                    assert!(
                        (mean[i] - expect).abs() <= 4.0 * se.max(1e-9),
                        "{name} p={p} unit {i}: mean {} vs {expect}",
                        mean[i]
                    );
                }
            }
        }
    }

    #[test]
    fn empirical_covariance_of_constant_sampler() {
        let n = 4;
        let cov =
            empirical_covariance(|_| Ok(DVector::from_element(n, 1.0)), 100).unwrap();
        assert!((cov.second_moment() - DMatrix::from_element(n, n, 1.0)).norm() < 1e-12);
        assert!(cov.cov().norm() < 1e-12);
        assert!(empirical_covariance(|_| Ok(DVector::from_element(n, 1.0)), 1).is_err());
    }

    #[test]
    fn empirical_matches_arcsin_law() {
        let n = 8;
        let mut rng = substream(6, "law");
        let mut v = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        for i in 0..n {
            let norm = v.row(i).norm();
            let mut row = v.row_mut(i);
            row /= norm;
        }
        let x = &v * v.transpose();
        let p = 0.4;
        let draws = 100_000;
        let emp = empirical_covariance(|t| Ok(gaussian_rounding(&v, p, "law", t)?.x), draws).unwrap();
        let law = theoretical_rounded_cov(&x, p).unwrap();
        let diff = (emp.cov() - law).amax();
        assert!(diff <= 0.03, "max deviation {diff}");
    }
}
