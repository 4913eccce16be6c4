//! Laplacian family, pseudo-inverse, matrix square roots, Schatten norms,
//! effective resistance.
//!
//! Everything here is dense symmetric eigendecomposition; the target regime
//! is a few thousand units at most.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Default relative eigenvalue cutoff separating the Laplacian kernel from
/// its positive spectrum. Near-disconnected graphs are the failure mode, so
/// this is configurable in [`build_bundle`].
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

/// Symmetric eigendecomposition with eigenvalues sorted ascending and
/// eigenvector columns permuted to match.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims("eigendecomposition needs a square matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("non-finite entries in eigendecomposition input"));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((vals, vecs))
}

/// Spectral data for one graph: the Laplacian family, its eigendecomposition,
/// the pseudo-inverse, and the projector onto the Laplacian kernel.
#[derive(Debug, Clone)]
pub struct SpectralBundle {
    n: usize,
    laplacian: DMatrix<f64>,
    lap_sym: DMatrix<f64>,
    lap_tilde: DMatrix<f64>,
    lap_pinv: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
    kernel_proj: DMatrix<f64>,
    zero_tol: f64,
    zero_count: usize,
}

/// Eigendecompose the Laplacian of `g` and derive the bundle.
///
/// Eigenvalues at or below `zero_tol * λ_max` are treated as kernel:
/// they are zeroed in the pseudo-inverse and span the projector `Π`.
pub fn build_bundle(g: &WeightedGraph, zero_tol: f64) -> Result<SpectralBundle> {
    let n = g.n();
    let lap = g.laplacian();
    let deg = g.degree_vector();
    let (eigvals, eigvecs) = sym_eigen_sorted(&lap)?;
    let lambda_max = eigvals[n - 1].max(0.0);
    let cut = if lambda_max > 0.0 { zero_tol * lambda_max } else { 0.0 };

    let mut pinv = DMatrix::zeros(n, n);
    let mut proj = DMatrix::zeros(n, n);
    let mut zero_count = 0;
    for k in 0..n {
        let v = eigvecs.column(k);
        if eigvals[k] <= cut {
            proj += v * v.transpose();
            zero_count += 1;
        } else {
            pinv += v * v.transpose() / eigvals[k];
        }
    }

    // L_sym = I - D^{-1/2} W D^{-1/2}; isolated vertices get a zero row.
    let w = g.weights();
    let mut lap_sym = DMatrix::zeros(n, n);
    let mut lap_tilde = DMatrix::zeros(n, n);
    for i in 0..n {
        if deg[i] > 0.0 {
            lap_sym[(i, i)] = 1.0;
            for j in 0..n {
                if deg[j] > 0.0 && w[(i, j)] > 0.0 {
                    lap_sym[(i, j)] -= w[(i, j)] / (deg[i] * deg[j]).sqrt();
                }
                lap_tilde[(i, j)] = lap[(i, j)] / deg[i];
            }
        }
    }

    Ok(SpectralBundle {
        n,
        laplacian: lap,
        lap_sym,
        lap_tilde,
        lap_pinv: pinv,
        eigvals,
        eigvecs,
        kernel_proj: proj,
        zero_tol,
        zero_count,
    })
}

impl SpectralBundle {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// `L_sym = I - D^{-1/2} W D^{-1/2}`.
    pub fn lap_sym(&self) -> &DMatrix<f64> {
        &self.lap_sym
    }

    /// `L̃ = D^{-1} L`, the random-walk normalized Laplacian.
    pub fn lap_tilde(&self) -> &DMatrix<f64> {
        &self.lap_tilde
    }

    /// Moore–Penrose pseudo-inverse `L†`.
    pub fn lap_pinv(&self) -> &DMatrix<f64> {
        &self.lap_pinv
    }

    /// Laplacian eigenvalues, ascending.
    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// Eigenvectors as columns, matching [`SpectralBundle::eigvals`].
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// Orthogonal projector onto `ker L`; rank equals the number of
    /// connected components.
    pub fn kernel_proj(&self) -> &DMatrix<f64> {
        &self.kernel_proj
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    /// Number of (numerically) zero Laplacian eigenvalues.
    pub fn component_count(&self) -> usize {
        self.zero_count
    }

    fn spectral_power(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let lambda_max = self.eigvals[self.n - 1].max(0.0);
        let cut = self.zero_tol * lambda_max;
        let mut out = DMatrix::zeros(self.n, self.n);
        for k in 0..self.n {
            if self.eigvals[k] > cut {
                let v = self.eigvecs.column(k);
                out += v * v.transpose() * f(self.eigvals[k]);
            }
        }
        out
    }

    /// `L^{1/2}`.
    pub fn lap_sqrt(&self) -> DMatrix<f64> {
        self.spectral_power(|l| l.sqrt())
    }

    /// `L^{†/2}`.
    pub fn lap_pinv_sqrt(&self) -> DMatrix<f64> {
        self.spectral_power(|l| 1.0 / l.sqrt())
    }

    /// Pseudo-inverse of `L̃ = D^{-1}L`, computed as `L† D` (valid on the
    /// orthogonal complement of the kernel).
    pub fn lap_tilde_pinv(&self, deg: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.lap_pinv.clone();
        for j in 0..self.n {
            let d = deg[j];
            for i in 0..self.n {
                out[(i, j)] *= d;
            }
        }
        out
    }

    /// Effective resistance `R_ij = (e_i - e_j)ᵀ L† (e_i - e_j)`.
    pub fn effective_resistance(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::invalid("effective resistance needs i != j"));
        }
        if i >= self.n || j >= self.n {
            return Err(Error::invalid("index out of range"));
        }
        let p = &self.lap_pinv;
        Ok(p[(i, i)] + p[(j, j)] - 2.0 * p[(i, j)])
    }

    /// Full matrix of pairwise effective resistances (zero diagonal).
    pub fn resistance_matrix(&self) -> DMatrix<f64> {
        let p = &self.lap_pinv;
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i == j {
                0.0
            } else {
                p[(i, i)] + p[(j, j)] - 2.0 * p[(i, j)]
            }
        })
    }
}

/// A symmetric PSD matrix carrying its eigendecomposition, used for general
/// similarity kernels.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    matrix: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl KernelMatrix {
    /// Wrap a symmetric matrix. Eigenvalues below `-1e-10 * ‖M‖_op` are
    /// rejected; small negatives inside that tolerance are kept as-is and
    /// clamped by the operations that need nonnegativity.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::dims("kernel must be square"));
        }
        if (&matrix - matrix.transpose()).norm() > 1e-8 * (1.0 + matrix.norm()) {
            return Err(Error::invalid("kernel must be symmetric"));
        }
        let (eigvals, eigvecs) = sym_eigen_sorted(&matrix)?;
        let scale = eigvals.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
        if eigvals[0] < -1e-10 * scale.max(1.0) {
            return Err(Error::invalid(format!("kernel has eigenvalue {}", eigvals[0])));
        }
        Ok(KernelMatrix { matrix, eigvals, eigvecs })
    }

    /// Wrap without the PSD check (for merely-symmetric matrices).
    pub fn new_symmetric(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::dims("kernel must be square"));
        }
        if (&matrix - matrix.transpose()).norm() > 1e-8 * (1.0 + matrix.norm()) {
            return Err(Error::invalid("kernel must be symmetric"));
        }
        let (eigvals, eigvecs) = sym_eigen_sorted(&matrix)?;
        Ok(KernelMatrix { matrix, eigvals, eigvecs })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// Symmetric PSD square root. Errors if some eigenvalue is below
    /// `-1e-6 * ‖M‖_op`; negatives within tolerance are clamped to zero.
    pub fn psd_sqrt(&self) -> Result<KernelMatrix> {
        let scale = self.eigvals.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
        if self.eigvals[0] < -1e-6 * scale.max(1.0) {
            return Err(Error::invalid(format!(
                "matrix is not PSD: min eigenvalue {} at scale {}",
                self.eigvals[0], scale
            )));
        }
        let n = self.n();
        let mut s = DMatrix::zeros(n, n);
        for k in 0..n {
            let l = self.eigvals[k].max(0.0);
            if l > 0.0 {
                let v = self.eigvecs.column(k);
                s += v * v.transpose() * l.sqrt();
            }
        }
        KernelMatrix::new_symmetric(s)
    }

    /// Spectral pseudo-inverse, zeroing eigenvalues at or below
    /// `rel_tol * λ_max`.
    pub fn pinv(&self, rel_tol: f64) -> DMatrix<f64> {
        let n = self.n();
        let lambda_max = self.eigvals[n - 1].max(0.0);
        let cut = rel_tol * lambda_max;
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            if self.eigvals[k] > cut {
                let v = self.eigvecs.column(k);
                out += v * v.transpose() / self.eigvals[k];
            }
        }
        out
    }
}

/// Schatten q-norm of a symmetric matrix: the ℓ_q norm of its eigenvalues in
/// absolute value. `q = ∞` gives the operator norm, `q = 2` the Frobenius
/// norm. Errors for `q < 1`.
pub fn schatten_norm(m: &DMatrix<f64>, q: f64) -> Result<f64> {
    if q < 1.0 {
        return Err(Error::invalid(format!("Schatten exponent q = {q} < 1")));
    }
    let (vals, _) = sym_eigen_sorted(m)?;
    Ok(schatten_from_eigvals(vals.iter().copied(), q))
}

/// ℓ_q norm of a set of eigenvalues (absolute values), scaled for overflow
/// safety at large `q`.
pub fn schatten_from_eigvals(vals: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    let abs: Vec<f64> = vals.into_iter().map(f64::abs).collect();
    let top = abs.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return top;
    }
    let sum: f64 = abs.iter().map(|&l| (l / top).powf(q)).sum();
    top * sum.powf(1.0 / q)
}

/// Hölder dual exponent: `1/q + 1/q* = 1`.
pub fn dual_exponent(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else if q <= 1.0 {
        f64::INFINITY
    } else {
        q / (q - 1.0)
    }
}
