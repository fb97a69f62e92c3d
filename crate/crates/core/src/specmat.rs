//! Weighted discrete L² spaces, operators between them, singular values,
//! Schatten (quasi-)norms, regularized determinants and densities.

use crate::{invalid, LabError, Result, C64};
use faer::{Mat, MatRef, Side};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSpace {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl WeightedSpace {
    pub fn new(dim: usize, points: Vec<[f64; 3]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(LabError::Dimension(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return invalid(format!("weights must be positive and finite, found {w}"));
        }
        Ok(Self { dim, points, weights })
    }

    /// `n` abstract nodes with unit weights.
    pub fn unit(n: usize) -> Self {
        Self {
            dim: 1,
            points: (0..n).map(|i| [i as f64, 0.0, 0.0]).collect(),
            weights: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// ⟨f, g⟩ = Σ conj(f) g w.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), w)| a.conj() * b * *w)
            .sum()
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        self.inner(f, f).re.max(0.0).sqrt()
    }

    /// L^p norm of |f| with the space weights; `p = ∞` gives the max.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        }
        let s: f64 = f.iter().zip(&self.weights).map(|(v, w)| v.abs().powf(p) * w).sum();
        s.powf(1.0 / p)
    }

    pub fn lp_norm_c(&self, f: &[C64], p: f64) -> f64 {
        let a: Vec<f64> = f.iter().map(|z| z.norm()).collect();
        self.lp_norm(&a, p)
    }

    pub fn same_weights(&self, other: &WeightedSpace) -> bool {
        self.len() == other.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()))
    }
}

/// Kernel matrix in the node basis; `(Af)(x_i) = Σ_j K_ij f(y_j) w_j`.
#[derive(Clone, Debug)]
pub struct WeightedOperator {
    pub matrix: Mat<C64>,
    pub domain: Arc<WeightedSpace>,
    pub codomain: Arc<WeightedSpace>,
}

impl WeightedOperator {
    pub fn new(matrix: Mat<C64>, domain: Arc<WeightedSpace>, codomain: Arc<WeightedSpace>) -> Result<Self> {
        if matrix.nrows() != codomain.len() || matrix.ncols() != domain.len() {
            return Err(LabError::Dimension(format!(
                "matrix {}x{} vs codomain {} / domain {}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.len(),
                domain.len()
            )));
        }
        Ok(Self { matrix, domain, codomain })
    }

    pub fn zeros(domain: Arc<WeightedSpace>, codomain: Arc<WeightedSpace>) -> Self {
        let m = Mat::zeros(codomain.len(), domain.len());
        Self { matrix: m, domain, codomain }
    }

    pub fn identity(space: Arc<WeightedSpace>) -> Self {
        let n = space.len();
        let m = Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0 / space.weights[i], 0.0) } else { C64::new(0.0, 0.0) });
        Self { matrix: m, domain: space.clone(), codomain: space }
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        assert_eq!(f.len(), self.ncols());
        let wf: Vec<C64> = f.iter().zip(&self.domain.weights).map(|(a, w)| a * *w).collect();
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.matrix[(i, j)] * wf[j]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint().to_owned(),
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &WeightedOperator) -> Result<Self> {
        if !self.domain.same_weights(&inner.codomain) {
            return Err(LabError::Dimension("composition through mismatched spaces".into()));
        }
        let w = &self.domain.weights;
        let scaled = Mat::from_fn(inner.nrows(), inner.ncols(), |i, j| inner.matrix[(i, j)] * w[i]);
        Ok(Self {
            matrix: &self.matrix * &scaled,
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
        })
    }

    /// `W₁ · self · W₂` with W₁ on the codomain and W₂ on the domain.
    pub fn sandwich(&self, w1: &[C64], w2: &[C64]) -> Result<Self> {
        if w1.len() != self.nrows() || w2.len() != self.ncols() {
            return Err(LabError::Dimension("multiplier length".into()));
        }
        let m = Mat::from_fn(self.nrows(), self.ncols(), |i, j| w1[i] * self.matrix[(i, j)] * w2[j]);
        Ok(Self { matrix: m, domain: self.domain.clone(), codomain: self.codomain.clone() })
    }

    pub fn scale(&self, c: C64) -> Self {
        let m = Mat::from_fn(self.nrows(), self.ncols(), |i, j| self.matrix[(i, j)] * c);
        Self { matrix: m, domain: self.domain.clone(), codomain: self.codomain.clone() }
    }

    pub fn sub(&self, other: &WeightedOperator) -> Result<Self> {
        if self.nrows() != other.nrows() || self.ncols() != other.ncols() {
            return Err(LabError::Dimension("difference of operators".into()));
        }
        Ok(Self {
            matrix: &self.matrix - &other.matrix,
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
        })
    }

    pub fn unitarize(&self) -> Mat<C64> {
        unitarize(self)
    }
}

/// `D_c^{1/2} M D_d^{1/2}`.
pub fn unitarize(op: &WeightedOperator) -> Mat<C64> {
    let rc: Vec<f64> = op.codomain.weights.iter().map(|w| w.sqrt()).collect();
    let rd: Vec<f64> = op.domain.weights.iter().map(|w| w.sqrt()).collect();
    Mat::from_fn(op.nrows(), op.ncols(), |i, j| op.matrix[(i, j)] * (rc[i] * rd[j]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn schatten(&self, alpha: f64) -> Result<f64> {
        schatten_from_values(&self.values, alpha)
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

pub fn singular_values_mat(m: MatRef<'_, C64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut v = m.singular_values().map_err(|e| LabError::Linalg(format!("svd: {e:?}")))?;
    v.iter_mut().for_each(|s| *s = s.max(0.0));
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(v)
}

pub fn singular_values(op: &WeightedOperator) -> Result<SingularSpectrum> {
    Ok(SingularSpectrum { values: singular_values_mat(unitarize(op).as_ref())? })
}

/// (Σ σ^α)^{1/α}; α = ∞ is the largest value. α < 1 gives the quasi-norm.
pub fn schatten_from_values(values: &[f64], alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return invalid(format!("Schatten exponent must be positive, got {alpha}"));
    }
    let top = values.iter().fold(0.0f64, |m, v| m.max(*v));
    if alpha.is_infinite() || top == 0.0 {
        return Ok(top);
    }
    let s: f64 = values.iter().map(|v| (v / top).powf(alpha)).sum();
    Ok(top * s.powf(1.0 / alpha))
}

pub fn schatten_norm(op: &WeightedOperator, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return invalid(format!("Schatten exponent must be positive, got {alpha}"));
    }
    schatten_mat(unitarize(op).as_ref(), alpha)
}

/// Schatten norm of a plain matrix; α = 2 and α = 4 avoid the SVD (‖A‖⁴_{S⁴} = ‖A*A‖²_F).
pub fn schatten_mat(m: MatRef<'_, C64>, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return invalid(format!("Schatten exponent must be positive, got {alpha}"));
    }
    if alpha == 2.0 {
        return Ok(frobenius(m));
    }
    if alpha == 4.0 {
        let g = if m.nrows() <= m.ncols() { m * m.adjoint() } else { m.adjoint() * m };
        return Ok(frobenius(g.as_ref()).sqrt());
    }
    schatten_from_values(&singular_values_mat(m)?, alpha)
}

pub fn frobenius(m: MatRef<'_, C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn eigenvalues_mat(m: MatRef<'_, C64>) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.eigenvalues().map_err(|e| LabError::Linalg(format!("eigenvalues: {e:?}")))
}

/// Eigenvalues of a self-map; the weight similarity makes them those of the unitarized matrix.
pub fn eigenvalues(op: &WeightedOperator) -> Result<Vec<C64>> {
    require_self_map(op)?;
    eigenvalues_mat(unitarize(op).as_ref())
}

fn require_self_map(op: &WeightedOperator) -> Result<()> {
    if !op.domain.same_weights(&op.codomain) {
        return Err(LabError::Dimension("operator is not a self-map of one weighted space".into()));
    }
    Ok(())
}

pub fn regularized_det_from_eigs(eigs: &[C64], n: u32) -> C64 {
    let mut log_sum = C64::new(0.0, 0.0);
    let mut prod = C64::new(1.0, 0.0);
    for &l in eigs {
        prod *= C64::new(1.0, 0.0) + l;
        let mut p = C64::new(1.0, 0.0);
        for j in 1..n {
            p *= -l;
            log_sum += p / j as f64;
        }
    }
    if prod == C64::new(0.0, 0.0) {
        return prod;
    }
    prod * log_sum.exp()
}

/// Det_n(1 + A) from the eigenvalues of A.
pub fn regularized_det(op: &WeightedOperator, n: u32) -> Result<C64> {
    if n == 0 {
        return invalid("regularization order must be at least 1");
    }
    let eigs = eigenvalues(op)?;
    Ok(regularized_det_from_eigs(&eigs, n))
}

/// Same value as [`regularized_det`] via det(1+A)·exp(Σ_{j<n} (−1)^j tr(A^j)/j); one LU instead of an eigensolve.
pub fn regularized_det_lu(op: &WeightedOperator, n: u32) -> Result<C64> {
    if n == 0 {
        return invalid("regularization order must be at least 1");
    }
    require_self_map(op)?;
    let a = unitarize(op);
    Ok(regularized_det_lu_mat(a.as_ref(), n))
}

pub fn regularized_det_lu_mat(a: MatRef<'_, C64>, n: u32) -> C64 {
    let dim = a.nrows();
    let one_plus = Mat::from_fn(dim, dim, |i, j| if i == j { a[(i, j)] + 1.0 } else { a[(i, j)] });
    let det = one_plus.determinant();
    if n == 1 {
        return det;
    }
    let mut corr = C64::new(0.0, 0.0);
    let mut power: Option<Mat<C64>> = None;
    for j in 1..n {
        let tr = match j {
            1 => (0..dim).map(|i| a[(i, i)]).sum::<C64>(),
            2 => {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..dim {
                    for k in 0..dim {
                        s += a[(i, k)] * a[(k, i)];
                    }
                }
                s
            }
            _ => {
                let p = match power.take() {
                    None => a * a,
                    Some(p) => &p * a,
                };
                let pa = &p * a;
                let t = (0..dim).map(|i| pa[(i, i)]).sum::<C64>();
                power = Some(p);
                t
            }
        };
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        corr += tr * (sign / j as f64);
    }
    det * corr.exp()
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub op: WeightedOperator,
    pub hermitian: bool,
}

impl DensityMatrix {
    pub fn new(op: WeightedOperator, hermitian: bool) -> Result<Self> {
        require_self_map(&op)?;
        if hermitian {
            let u = unitarize(&op);
            let d = frobenius((&u - u.adjoint()).as_ref());
            let s = frobenius(u.as_ref());
            if d > 1e-10 * s.max(f64::MIN_POSITIVE) {
                return invalid(format!("operator flagged Hermitian but ‖M−M*‖/‖M‖ = {:e}", d / s));
            }
        }
        Ok(Self { op, hermitian })
    }

    /// γ = Σ ν_j |f_j⟩⟨f_j| with the f_j given as columns.
    pub fn from_system(space: Arc<WeightedSpace>, nu: &[C64], fs: &Mat<C64>) -> Result<Self> {
        if fs.nrows() != space.len() || fs.ncols() != nu.len() {
            return Err(LabError::Dimension("system shape".into()));
        }
        let n = space.len();
        let scaled = Mat::from_fn(n, nu.len(), |i, j| fs[(i, j)] * nu[j]);
        let m = &scaled * fs.adjoint();
        let herm = nu.iter().all(|v| v.im == 0.0);
        let op = WeightedOperator { matrix: m, domain: space.clone(), codomain: space };
        Ok(Self { op, hermitian: herm })
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.op.domain
    }

    pub fn trace(&self) -> C64 {
        (0..self.op.nrows()).map(|i| self.op.matrix[(i, i)] * self.op.domain.weights[i]).sum()
    }

    pub fn schatten(&self, alpha: f64) -> Result<f64> {
        if self.hermitian {
            let ev = self.hermitian_eigenvalues()?;
            let abs: Vec<f64> = ev.iter().map(|v| v.abs()).collect();
            return schatten_from_values(&abs, alpha);
        }
        schatten_norm(&self.op, alpha)
    }

    /// Ascending real eigenvalues (Hermitian case only).
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.hermitian {
            return invalid("hermitian_eigenvalues on a non-Hermitian density matrix");
        }
        let u = hermitian_part(&unitarize(&self.op));
        u.self_adjoint_eigenvalues(Side::Lower).map_err(|e| LabError::Linalg(format!("{e:?}")))
    }
}

pub fn hermitian_part(m: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// ρ(x_i) = kernel diagonal of AγA*; Σ ρ V w = tr(γ A* V A) for every multiplier V.
pub fn density_of(a: &WeightedOperator, gamma: &DensityMatrix) -> Result<Vec<C64>> {
    if !a.domain.same_weights(gamma.space()) {
        return Err(LabError::Dimension("γ does not act on the domain of A".into()));
    }
    let w = &a.domain.weights;
    let m = w.len();
    let g = &gamma.op.matrix;
    let gw = Mat::from_fn(m, m, |i, j| g[(i, j)] * (w[i] * w[j]));
    let b = &a.matrix * &gw;
    Ok((0..a.nrows())
        .map(|i| (0..m).map(|k| b[(i, k)] * a.matrix[(i, k)].conj()).sum())
        .collect())
}

/// Löwdin orthonormalization in the weighted inner product (two passes).
pub fn orthonormalize(columns: &Mat<C64>, space: &WeightedSpace) -> Result<Mat<C64>> {
    if columns.nrows() != space.len() {
        return Err(LabError::Dimension("columns vs space".into()));
    }
    let mut f = columns.clone();
    for _ in 0..2 {
        let g = gram(&f, space);
        let eig = g
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| LabError::Linalg(format!("{e:?}")))?;
        let s: Vec<f64> = eig.S().column_vector().iter().map(|v| v.re).collect();
        let top = s.iter().fold(0.0f64, |m, v| m.max(*v));
        let low = s.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if !(low > 1e-13 * top) {
            return invalid(format!("rank-deficient system: Gram eigenvalue ratio {:e}", low / top));
        }
        let u = eig.U();
        let k = s.len();
        let scaled = Mat::from_fn(k, k, |i, j| u[(i, j)] / s[j].sqrt());
        let inv_sqrt = &scaled * u.adjoint();
        f = &f * &inv_sqrt;
    }
    Ok(f)
}

/// G_jk = ⟨f_j, f_k⟩_w.
pub fn gram(f: &Mat<C64>, space: &WeightedSpace) -> Mat<C64> {
    let wf = Mat::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)] * space.weights[i]);
    f.adjoint() * &wf
}

pub fn gram_residual(f: &Mat<C64>, space: &WeightedSpace) -> f64 {
    let g = gram(f, space);
    let mut r = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let t = if i == j { g[(i, j)] - 1.0 } else { g[(i, j)] };
            r = r.max(t.norm());
        }
    }
    r
}
