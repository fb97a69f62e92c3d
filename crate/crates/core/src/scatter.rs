//! Scattering matrices: exact 1D transfer matrices and S(λ) on L²(S^{N−1}) through the
//! Birman–Schwinger factorization.

use crate::lab::{slope_fit, SlopeFit};
use crate::resolvent::{alpha_q, birman_schwinger_operator, BoundarySide, PotentialField, SpectralParameter};
use crate::specmat::{frobenius, schatten_mat, singular_values_mat, WeightedOperator, WeightedSpace};
use crate::surface::sphere_rule;
use crate::{invalid, LabError, Result, C64};
use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// 2×2 S-matrix of a 1D potential, ordered (outgoing right, outgoing left) × (incoming from left,
/// incoming from right): [[t, r'], [r, t']].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SMatrix1d {
    pub t: C64,
    pub r: C64,
    pub t_right: C64,
    pub r_right: C64,
}

impl SMatrix1d {
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[self.t, self.r_right], [self.r, self.t_right]]
    }

    pub fn determinant(&self) -> C64 {
        self.t * self.t_right - self.r * self.r_right
    }

    /// max |(S*S − 1)_{ij}|
    pub fn unitarity_residual(&self) -> f64 {
        let m = self.matrix();
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let s: C64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                let e = if i == j { s - 1.0 } else { s };
                worst = worst.max(e.norm());
            }
        }
        worst
    }
}

/// Cell transfer matrix for ψ'' = (V − k²)ψ over a length d with V constant.
fn cell_transfer(v: C64, k2: f64, d: f64) -> [[C64; 2]; 2] {
    let q2 = C64::new(k2, 0.0) - v;
    let q = q2.sqrt();
    let qd = q * d;
    let (c, s_over_q) = if qd.norm() < 1e-4 {
        // cos and sin(qd)/q by their series
        let x = q2 * d * d;
        (1.0 - x / 2.0 + x * x / 24.0, d * (1.0 - x / 6.0 + x * x / 120.0))
    } else {
        (qd.cos(), qd.sin() / q)
    };
    [[c, s_over_q], [-q2 * s_over_q, c]]
}

fn mul2(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

/// Exact S-matrix of the piecewise-constant potential taking value V_i on each cell of the 1D space.
pub fn smatrix_1d(v: &PotentialField, lambda: f64) -> Result<SMatrix1d> {
    if v.dim() != 1 {
        return invalid("smatrix_1d needs a one-dimensional potential");
    }
    if !(lambda > 0.0) {
        return invalid("λ must be positive");
    }
    let sp = &v.space;
    let m = sp.len();
    if m == 0 {
        return invalid("empty potential grid");
    }
    let k = lambda.sqrt();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| sp.points[*a][0].partial_cmp(&sp.points[*b][0]).unwrap());
    // cells [x_i − w_i/2, x_i + w_i/2] must tile an interval
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        let gap = (sp.points[b][0] - sp.weights[b] / 2.0) - (sp.points[a][0] + sp.weights[a] / 2.0);
        if gap.abs() > 1e-9 * sp.weights[a] {
            return invalid("1D cells must be contiguous");
        }
    }
    let xl = sp.points[order[0]][0] - sp.weights[order[0]] / 2.0;
    let xr = sp.points[order[m - 1]][0] + sp.weights[order[m - 1]] / 2.0;
    // total transfer (ψ, ψ')(x_r) = T (ψ, ψ')(x_l)
    let mut t = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
    for &i in &order {
        t = mul2(&cell_transfer(v.values[i], lambda, sp.weights[i]), &t);
    }
    let ik = C64::new(0.0, k);
    let plane = |x: f64, s: f64| [C64::from_polar(1.0, s * k * x), ik * s * C64::from_polar(1.0, s * k * x)];
    let apply = |m: &[[C64; 2]; 2], u: [C64; 2]| [m[0][0] * u[0] + m[0][1] * u[1], m[1][0] * u[0] + m[1][1] * u[1]];
    // amplitudes (a, b) of a e^{ikx} + b e^{−ikx} at x
    let split = |u: [C64; 2], x: f64| {
        let a = (u[0] + u[1] / ik) / 2.0 * C64::from_polar(1.0, -k * x);
        let b = (u[0] - u[1] / ik) / 2.0 * C64::from_polar(1.0, k * x);
        (a, b)
    };
    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
    let tinv = [[t[1][1] / det, -t[0][1] / det], [-t[1][0] / det, t[0][0] / det]];
    // from the left: ψ = t e^{ikx} beyond x_r
    let (a, b) = split(apply(&tinv, plane(xr, 1.0)), xl);
    let (t_l, r_l) = (a.inv(), b / a);
    // from the right: ψ = t' e^{−ikx} before x_l
    let (a2, b2) = split(apply(&t, plane(xl, -1.0)), xr);
    let (t_r, r_r) = (b2.inv(), a2 / b2);
    if !(t_l.norm().is_finite() && t_r.norm().is_finite()) {
        return Err(LabError::Singular("transfer matrix degenerate".into()));
    }
    Ok(SMatrix1d { t: t_l, r: r_l, t_right: t_r, r_right: r_r })
}

/// Closed-form transmission of V = −V₀·1_{[0,a]}.
pub fn square_well_transmission(v0: f64, a: f64, lambda: f64) -> C64 {
    let k = lambda.sqrt();
    let kp = (lambda + v0).sqrt();
    let i = C64::new(0.0, 1.0);
    (-i * k * a).exp() / (C64::new((kp * a).cos(), 0.0) - i * ((k * k + kp * kp) / (2.0 * k * kp)) * (kp * a).sin())
}

/// Unit sphere S^{N−1} as a weighted space.
pub fn sphere_space(n: usize, resolution: usize) -> Result<Arc<WeightedSpace>> {
    let (pts, w) = sphere_rule(n, resolution)?;
    Ok(Arc::new(WeightedSpace::new(n, pts, w)?))
}

/// Resolution giving ≥ 8 nodes per oscillation of e^{i√λ ω·x} for |x| ≤ radius.
pub fn sphere_resolution_for(n: usize, lambda: f64, radius: f64) -> usize {
    let osc = lambda.sqrt() * radius / PI;
    match n {
        2 => ((16.0 * osc).ceil() as usize).max(16),
        _ => ((4.0 * osc).ceil() as usize + 6).max(8),
    }
}

/// Γ₀(λ): ψ ↦ 2^{−1/2}λ^{(N−2)/4} ψ̂(√λ ω) with ψ̂ the unitary Fourier transform.
pub fn gamma0(lambda: f64, sphere: &Arc<WeightedSpace>, grid: &Arc<WeightedSpace>) -> Result<WeightedOperator> {
    if !(lambda > 0.0) {
        return invalid("λ must be positive");
    }
    let n = grid.dim;
    if !(n == 2 || n == 3) || sphere.dim != n {
        return invalid("Γ₀ needs N ∈ {2, 3} and a sphere of the same dimension");
    }
    let k = lambda.sqrt();
    let pre = 2f64.powf(-0.5) * lambda.powf((n as f64 - 2.0) / 4.0) * (2.0 * PI).powf(-(n as f64) / 2.0);
    let m = Mat::from_fn(sphere.len(), grid.len(), |a, j| {
        let o = &sphere.points[a];
        let x = &grid.points[j];
        C64::from_polar(pre, -k * (o[0] * x[0] + o[1] * x[1] + o[2] * x[2]))
    });
    WeightedOperator::new(m, grid.clone(), sphere.clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct SMatrixReport {
    pub lambda: f64,
    pub q: f64,
    pub alpha: f64,
    pub sphere_nodes: usize,
    /// ‖S(λ) − 1‖_{S^{α_q}}
    pub deficit: f64,
    /// ‖−2πi Γ₀VΓ₀*‖_{S^{α_q}}
    pub born_deficit: f64,
    /// ‖S*S − 1‖_{S^∞}
    pub unitarity_residual: f64,
    /// ‖A(λ+i0)‖_{S^∞}
    pub a_operator_norm: f64,
    #[serde(skip)]
    pub s: Mat<C64>,
}

fn check_q(n: usize, q: f64) -> Result<()> {
    let nf = n as f64;
    let ok = match n {
        2 => q > 1.0 && q <= 1.5,
        _ => q >= nf / 2.0 && q <= (nf + 1.0) / 2.0,
    };
    if ok {
        Ok(())
    } else {
        Err(LabError::Inadmissible(format!("q = {q} outside the scattering range for N = {n}")))
    }
}

/// S(λ) = 1 − 2πi Γ₀√|V|(1 + A(λ+i0))^{-1}√V Γ₀*, A = √V R₀ √|V|, in orthonormal sphere coordinates.
pub fn smatrix(v: &PotentialField, lambda: f64, q: f64) -> Result<SMatrixReport> {
    let radius = v.space.points.iter().map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).fold(0.0, f64::max);
    let res = sphere_resolution_for(v.dim(), lambda, radius);
    smatrix_on(v, lambda, q, &sphere_space(v.dim(), res)?)
}

pub fn smatrix_on(v: &PotentialField, lambda: f64, q: f64, sphere: &Arc<WeightedSpace>) -> Result<SMatrixReport> {
    let n = v.dim();
    if !(n == 2 || n == 3) {
        return invalid("S(λ) on the sphere needs N ∈ {2, 3}");
    }
    check_q(n, q)?;
    let alpha = alpha_q(n, q)?;
    let g = gamma0(lambda, sphere, &v.space)?.unitarize();
    let z = SpectralParameter::boundary(lambda, BoundarySide::Upper)?;
    let a = birman_schwinger_operator(v, &z)?.unitarize();
    let m = a.nrows();
    let one_plus = &a + Mat::<C64>::identity(m, m);
    let a_operator_norm = operator_norm_estimate(&a);
    let sa = v.sqrt_abs();
    let sv_ = v.sqrt_v();
    // right factor √V Γ₀*
    let right = Mat::from_fn(m, sphere.len(), |j, b| sv_[j] * g[(b, j)].conj());
    let solved = one_plus.partial_piv_lu().solve(&right);
    if solved.col_iter().any(|c| c.iter().any(|x| !x.re.is_finite() || !x.im.is_finite())) {
        return Err(LabError::Singular("1 + A(λ+i0) is numerically singular".into()));
    }
    let left = Mat::from_fn(sphere.len(), m, |b, j| g[(b, j)] * sa[j]);
    let coupling = C64::new(0.0, -2.0 * PI);
    let t = &left * &solved * faer::Scale(coupling);
    let gv = Mat::from_fn(sphere.len(), m, |b, j| g[(b, j)] * v.values[j]);
    let born = gv * g.adjoint() * faer::Scale(coupling);
    let k = sphere.len();
    let s = &t + Mat::<C64>::identity(k, k);
    let ss = s.adjoint() * &s - Mat::<C64>::identity(k, k);
    let unitarity_residual = singular_values_mat(ss.as_ref())?[0];
    Ok(SMatrixReport {
        lambda,
        q,
        alpha,
        sphere_nodes: k,
        deficit: schatten_mat(t.as_ref(), alpha)?,
        born_deficit: schatten_mat(born.as_ref(), alpha)?,
        unitarity_residual,
        a_operator_norm,
        s,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DeficitScaling {
    pub lambdas: Vec<f64>,
    pub deficits: Vec<f64>,
    pub fit: SlopeFit,
    pub expected_slope: f64,
    pub max_a_norm: f64,
}

/// Fitted exponent of ‖S(λ) − 1‖_{S^{α_q}} against λ; the bound scales as λ^{−1+N/(2q)}.
pub fn deficit_scaling(v: &PotentialField, lambdas: &[f64], q: f64) -> Result<DeficitScaling> {
    let reports: Vec<SMatrixReport> = lambdas.par_iter().map(|l| smatrix(v, *l, q)).collect::<Result<_>>()?;
    let deficits: Vec<f64> = reports.iter().map(|r| r.deficit).collect();
    let fit = slope_fit(lambdas, &deficits)?;
    Ok(DeficitScaling {
        lambdas: lambdas.to_vec(),
        deficits,
        fit,
        expected_slope: -1.0 + v.dim() as f64 / (2.0 * q),
        max_a_norm: reports.iter().map(|r| r.a_operator_norm).fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub lambdas: Vec<f64>,
    /// ‖S(λ_{i+1}) − S(λ_i)‖_{S^{α_q}}
    pub differences: Vec<f64>,
    /// slope of log difference against log Δλ when the steps vary
    pub fit: Option<SlopeFit>,
}

/// Differences of S(λ) − 1 along an increasing list, on one fixed sphere rule.
pub fn continuity_sweep(v: &PotentialField, lambdas: &[f64], q: f64) -> Result<ContinuityReport> {
    if lambdas.len() < 2 || lambdas.windows(2).any(|w| !(w[1] > w[0])) || !(lambdas[0] > 0.0) {
        return invalid("λ list must be positive and strictly increasing");
    }
    let radius = v.space.points.iter().map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).fold(0.0, f64::max);
    let res = sphere_resolution_for(v.dim(), lambdas[lambdas.len() - 1], radius);
    let sphere = sphere_space(v.dim(), res)?;
    let reports: Vec<SMatrixReport> = lambdas.par_iter().map(|l| smatrix_on(v, *l, q, &sphere)).collect::<Result<_>>()?;
    let alpha = reports[0].alpha;
    let differences: Vec<f64> = reports.windows(2).map(|w| schatten_mat((&w[1].s - &w[0].s).as_ref(), alpha)).collect::<Result<_>>()?;
    let steps: Vec<f64> = lambdas.windows(2).map(|w| w[1] - w[0]).collect();
    let varied = steps.iter().any(|s| (s - steps[0]).abs() > 1e-9 * steps[0]);
    let monotone_steps = steps.windows(2).all(|w| w[1] > w[0]) || steps.windows(2).all(|w| w[1] < w[0]);
    let fit = if varied && monotone_steps && steps.len() >= 3 && differences.iter().all(|d| *d > 0.0) {
        Some(slope_fit(&steps, &differences)?)
    } else {
        None
    };
    Ok(ContinuityReport { lambdas: lambdas.to_vec(), differences, fit })
}

/// ‖A‖_{S^∞} by power iteration on A*A (a lower estimate converging from below).
pub fn operator_norm_estimate(a: &Mat<C64>) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut x = Mat::<C64>::from_fn(n, 1, |i, _| C64::new(1.0 + (i as f64 * 0.618).fract(), 0.3 * (i as f64 * 0.414).fract()));
    let mut est = 0.0;
    for _ in 0..60 {
        let nx = frobenius(x.as_ref());
        if nx == 0.0 {
            return 0.0;
        }
        x = x * faer::Scale(C64::new(1.0 / nx, 0.0));
        let y = a * &x;
        let next = frobenius(y.as_ref());
        x = a.adjoint() * &y;
        if (next - est).abs() <= 1e-10 * next {
            return next;
        }
        est = next;
    }
    est
}

/// Hilbert–Schmidt distance of two matrices relative to the second.
pub fn relative_distance(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    frobenius((a - b).as_ref()) / frobenius(b.as_ref()).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::SpatialGrid;

    #[test]
    fn free_line_is_identity() {
        let g = SpatialGrid::new(1, 1.0, 10).unwrap();
        let v = PotentialField::from_fn(g.space(), |_| C64::new(0.0, 0.0));
        let s = smatrix_1d(&v, 2.0).unwrap();
        assert!((s.t - 1.0).norm() < 1e-13 && s.r.norm() < 1e-13);
        assert!((s.t_right - 1.0).norm() < 1e-13 && s.r_right.norm() < 1e-13);
    }

    #[test]
    fn square_well_closed_form() {
        // well on [0, 1.5] sampled as 30 cells of [−0.5, 2.0]
        let g = SpatialGrid::new(1, 1.25, 50).unwrap();
        let pts: Vec<[f64; 3]> = g.points().iter().map(|p| [p[0] + 0.75, 0.0, 0.0]).collect();
        let w = vec![g.spacing(); pts.len()];
        let space = Arc::new(WeightedSpace::new(1, pts, w).unwrap());
        let v = PotentialField::from_fn(space, |p| if p[0] > 0.0 && p[0] < 1.5 { C64::new(-3.0, 0.0) } else { C64::new(0.0, 0.0) });
        for lambda in [0.3, 1.0, 4.0] {
            let s = smatrix_1d(&v, lambda).unwrap();
            let t = square_well_transmission(3.0, 1.5, lambda);
            assert!((s.t - t).norm() < 1e-10, "{} vs {}", s.t, t);
            assert!((s.t_right - t).norm() < 1e-10);
            assert!(s.unitarity_residual() < 1e-12);
            assert!((s.determinant().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma0_adjoint_and_prefactor() {
        let sphere = sphere_space(2, 24).unwrap();
        let grid = SpatialGrid::new(2, 1.0, 6).unwrap().space();
        let g = gamma0(1.7, &sphere, &grid).unwrap();
        let ga = g.adjoint();
        let phi: Vec<C64> = (0..sphere.len()).map(|i| C64::new((i as f64).sin(), 0.3 * i as f64)).collect();
        let psi: Vec<C64> = (0..grid.len()).map(|i| C64::new(1.0 / (1.0 + i as f64), (i as f64).cos())).collect();
        let lhs = sphere.inner(&phi, &g.apply(&psi));
        let rhs = grid.inner(&ga.apply(&phi), &psi);
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
        assert!((g.matrix[(0, 0)].norm() - 2f64.powf(-0.5) / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn zero_potential_gives_identity() {
        let grid = SpatialGrid::new(3, 1.0, 4).unwrap().space();
        let v = PotentialField::from_fn(grid, |_| C64::new(0.0, 0.0));
        let r = smatrix(&v, 2.0, 2.0).unwrap();
        assert_eq!(r.deficit, 0.0);
        assert!(r.unitarity_residual < 1e-14);
    }
}
