//! Eigenvalues of −Δ + V with complex V: discretizations, clouds, single-eigenvalue and
//! Lieb–Thirring-type sums, the disk map, and determinant-based zero counting.

use crate::evolution::TorusGrid;
use crate::resolvent::{birman_schwinger_operator, PotentialField, SpectralParameter};
use crate::specmat::{eigenvalues_mat, regularized_det_lu_mat};
use crate::surface::SpatialGrid;
use crate::{invalid, LabError, Result, C64};
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Discretization {
    /// Fourier-spectral Laplacian on a torus
    Torus(TorusGrid),
    /// second-order differences on a box with Dirichlet walls
    Dirichlet(SpatialGrid),
}

impl Discretization {
    pub fn points(&self) -> Vec<[f64; 3]> {
        match self {
            Discretization::Torus(g) => g.points(),
            Discretization::Dirichlet(g) => g.points(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Discretization::Torus(g) => g.len(),
            Discretization::Dirichlet(g) => g.n.pow(g.dim as u32),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// −Δ + V with V sampled at the discretization points.
pub fn discretize_schrodinger(v: &[C64], disc: &Discretization) -> Result<Mat<C64>> {
    if v.len() != disc.len() {
        return Err(LabError::Dimension("potential samples vs discretization".into()));
    }
    let mut h = match disc {
        Discretization::Torus(g) => {
            if g.dim > 2 {
                return invalid("Schrödinger discretizations are limited to N ≤ 2");
            }
            let zero = SpectralParameter::new(C64::new(-1.0, 0.0))?;
            // (|k|² + 1)^{-1} inverted is cheaper to reason about than a separate multiplier path
            let r = crate::resolvent::torus_resolvent(g, &zero);
            let n = g.len();
            let inv = r.partial_piv_lu();
            use faer::linalg::solvers::Solve;
            let mut lap = inv.solve(Mat::<C64>::identity(n, n));
            for i in 0..n {
                lap[(i, i)] -= 1.0;
            }
            // the spectral Laplacian is real symmetric; drop round-off
            Mat::from_fn(n, n, |i, j| C64::new(0.5 * (lap[(i, j)].re + lap[(j, i)].re), 0.0))
        }
        Discretization::Dirichlet(g) => {
            if g.dim > 2 {
                return invalid("Schrödinger discretizations are limited to N ≤ 2");
            }
            let n = g.n;
            let s = 1.0 / (g.spacing() * g.spacing());
            let size = disc.len();
            let mut m = Mat::<C64>::zeros(size, size);
            for f in 0..size {
                let (i, j) = if g.dim == 1 { (f, 0) } else { (f / n, f % n) };
                m[(f, f)] = C64::new(2.0 * g.dim as f64 * s, 0.0);
                if i > 0 {
                    let o = if g.dim == 1 { f - 1 } else { f - n };
                    m[(f, o)] = C64::new(-s, 0.0);
                }
                if i + 1 < n {
                    let o = if g.dim == 1 { f + 1 } else { f + n };
                    m[(f, o)] = C64::new(-s, 0.0);
                }
                if g.dim == 2 {
                    if j > 0 {
                        m[(f, f - 1)] = C64::new(-s, 0.0);
                    }
                    if j + 1 < n {
                        m[(f, f + 1)] = C64::new(-s, 0.0);
                    }
                }
            }
            m
        }
    };
    for (i, vi) in v.iter().enumerate() {
        h[(i, i)] += vi;
    }
    Ok(h)
}

pub fn distance_to_half_line(l: C64) -> f64 {
    if l.re >= 0.0 {
        l.im.abs()
    } else {
        l.norm()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CloudEntry {
    pub lambda: C64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EigenvalueCloud {
    pub entries: Vec<CloudEntry>,
    pub grid_size: usize,
    pub filter_tol: f64,
    pub cluster_radius: f64,
}

impl EigenvalueCloud {
    pub fn count(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    pub fn count_in(&self, rect: &Rect) -> usize {
        self.entries.iter().filter(|e| rect.contains(e.lambda)).map(|e| e.multiplicity).sum()
    }
}

/// Drops eigenvalues within `filter_tol` of [0, ∞) and merges those closer than `cluster_radius`.
pub fn cloud_from_eigenvalues(eigs: &[C64], grid_size: usize, filter_tol: f64, cluster_radius: f64) -> EigenvalueCloud {
    let kept: Vec<C64> = eigs.iter().cloned().filter(|l| distance_to_half_line(*l) > filter_tol).collect();
    let n = kept.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (kept[i] - kept[j]).norm() <= cluster_radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<(usize, C64, usize)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => {
                g.1 += kept[i];
                g.2 += 1;
            }
            None => groups.push((r, kept[i], 1)),
        }
    }
    let mut entries: Vec<CloudEntry> =
        groups.into_iter().map(|(_, s, m)| CloudEntry { lambda: s / m as f64, multiplicity: m }).collect();
    entries.sort_by(|a, b| a.lambda.re.partial_cmp(&b.lambda.re).unwrap().then(a.lambda.im.partial_cmp(&b.lambda.im).unwrap()));
    EigenvalueCloud { entries, grid_size, filter_tol, cluster_radius }
}

pub fn eigen_cloud(h: &Mat<C64>, filter_tol: f64, cluster_radius: f64) -> Result<EigenvalueCloud> {
    let eigs = eigenvalues_mat(h.as_ref())?;
    Ok(cloud_from_eigenvalues(&eigs, h.nrows(), filter_tol, cluster_radius))
}

/// V on n consecutive points of the lattice hℤ (cell centres of [−R, R]), zero elsewhere. The
/// eigenvalue problem on ℓ²(hℤ) reduces exactly to the support with u_{−1} = μu₀, u_n = μu_{n−1},
/// λ = (2 − μ − 1/μ)/h², |μ| < 1.
#[derive(Clone, Debug)]
pub struct LatticeProblem {
    pub h: f64,
    pub v: Vec<C64>,
}

/// μ-region holding the physical eigenvalues: |μ| < ρ and Re μ > 0.1 (Re μ ≤ 0 is the lattice band top).
const MU_RE_MIN: f64 = 0.1;

impl LatticeProblem {
    pub fn from_fn(radius: f64, n: usize, v: impl Fn(f64) -> C64) -> Result<Self> {
        let g = SpatialGrid::new(1, radius, n)?;
        Ok(Self { h: g.spacing(), v: g.axis().into_iter().map(v).collect() })
    }

    pub fn lambda_of(&self, mu: C64) -> C64 {
        (2.0 - mu - mu.inv()) / (self.h * self.h)
    }

    pub fn mu_of(&self, lambda: C64) -> C64 {
        let b = C64::new(2.0, 0.0) - lambda * self.h * self.h;
        let d = (b * b - 4.0).sqrt();
        let m1 = (b + d) / 2.0;
        let m2 = (b - d) / 2.0;
        if m1.norm() < m2.norm() {
            m1
        } else {
            m2
        }
    }

    /// All eigenvalues in the physical μ-region from the 2n companion pencil in ν = 1/μ.
    pub fn eigenvalues_direct(&self) -> Result<Vec<C64>> {
        let n = self.v.len();
        let h2 = self.h * self.h;
        let mut c = Mat::<C64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            c[(i, n + i)] = C64::new(1.0, 0.0);
            if i > 0 && i + 1 < n {
                c[(n + i, i)] = C64::new(-1.0, 0.0);
            }
            c[(n + i, n + i)] = -self.v[i] * h2;
            if i > 0 {
                c[(n + i, n + i - 1)] = C64::new(1.0, 0.0);
            }
            if i + 1 < n {
                c[(n + i, n + i + 1)] = C64::new(1.0, 0.0);
            }
        }
        let nus = eigenvalues_mat(c.as_ref())?;
        Ok(nus
            .into_iter()
            .filter(|nu| nu.norm() > 1.0)
            .map(|nu| nu.inv())
            .filter(|mu| mu.re > MU_RE_MIN)
            .map(|mu| self.lambda_of(mu))
            .collect())
    }

    /// F(μ) = u_{−1} − μu₀ from the right-to-left recurrence, and F'(μ), up to a common positive factor.
    pub fn jost(&self, mu: C64) -> (C64, C64) {
        let n = self.v.len();
        let h2 = self.h * self.h;
        let s = mu + mu.inv();
        let ds = 1.0 - (mu * mu).inv();
        let (mut u_next, mut u) = (mu, C64::new(1.0, 0.0));
        let (mut d_next, mut d) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        for i in (0..n).rev() {
            let a = self.v[i] * h2 + s;
            let u_prev = a * u - u_next;
            let d_prev = ds * u + a * d - d_next;
            if i == 0 {
                return (u_prev - mu * u, d_prev - u - mu * d);
            }
            u_next = u;
            u = u_prev;
            d_next = d;
            d = d_prev;
            // F and F' share a positive scale; only arg F and F/F' are used
            let big = u.norm().max(u_next.norm());
            if big > 1e150 {
                let s = 1.0 / big;
                u *= s;
                u_next *= s;
                d *= s;
                d_next *= s;
            }
        }
        unreachable!("lattice problems have at least one point")
    }

    pub fn newton(&self, seed: C64) -> Option<C64> {
        let mut mu = seed;
        let mut small = 0;
        for _ in 0..60 {
            let (f, df) = self.jost(mu);
            if df.norm() == 0.0 || !df.norm().is_finite() {
                return None;
            }
            let step = f / df;
            mu -= step;
            if !(mu.norm() < 1.0) {
                return None;
            }
            // two polishing steps once the update is at round-off level
            if step.norm() < 1e-13 * mu.norm() {
                small += 1;
                if small == 2 {
                    return Some(mu);
                }
            }
        }
        if small > 0 {
            Some(mu)
        } else {
            None
        }
    }

    /// F(μ) alone, up to a positive factor.
    pub fn jost_value(&self, mu: C64) -> C64 {
        let h2 = self.h * self.h;
        let s = mu + mu.inv();
        let (mut u_next, mut u) = (mu, C64::new(1.0, 0.0));
        for (i, v) in self.v.iter().enumerate().rev() {
            let u_prev = (v * h2 + s) * u - u_next;
            if i == 0 {
                return u_prev - mu * u;
            }
            u_next = u;
            u = u_prev;
            let big = u.norm_sqr().max(u_next.norm_sqr());
            if big > 1e200 {
                let s = 1.0 / big.sqrt();
                u *= s;
                u_next *= s;
            }
        }
        unreachable!("lattice problems have at least one point")
    }

    /// Zeros of F in {|μ| < ρ, Re μ > 0.1} by the argument principle, with adaptive bisection of the path.
    pub fn zero_count(&self, rho: f64) -> Result<i64> {
        let n = self.v.len() as f64;
        let th0 = (MU_RE_MIN / rho).acos();
        // u grows like μ^{-n}, so arg F turns about n·|dμ|/|μ| per step
        let m = (4.0 * n * 2.0 * th0).ceil().max(256.0) as usize;
        let mut path: Vec<C64> = (0..=m).map(|k| C64::from_polar(rho, -th0 + 2.0 * th0 * k as f64 / m as f64)).collect();
        let top = (rho * rho - MU_RE_MIN * MU_RE_MIN).sqrt();
        let mut y = top;
        while y > -top {
            y -= (0.25 * (MU_RE_MIN * MU_RE_MIN + y * y).sqrt() / n).max(1e-9);
            path.push(C64::new(MU_RE_MIN, y.max(-top)));
        }
        let mut total = 0.0;
        let mut fa = self.jost_value(path[0]);
        for w in path.windows(2) {
            let fb = self.jost_value(w[1]);
            total += self.arg_increment(w[0], w[1], fa, fb, 0)?;
            fa = fb;
        }
        let wnd = total / (2.0 * PI);
        let r = wnd.round();
        if (wnd - r).abs() > 0.1 {
            return Err(LabError::NoConvergence(format!("winding number {wnd} is not near an integer")));
        }
        Ok(r as i64)
    }

    fn arg_increment(&self, a: C64, b: C64, fa: C64, fb: C64, depth: u32) -> Result<f64> {
        if fa.norm() == 0.0 || fb.norm() == 0.0 {
            return Err(LabError::Singular("zero on the counting contour".into()));
        }
        let d = (fb / fa).arg();
        if d.abs() < PI / 4.0 {
            return Ok(d);
        }
        if depth > 40 {
            return Err(LabError::NoConvergence("contour refinement exhausted".into()));
        }
        let mid = (a + b) / 2.0;
        let mid = if (a.norm() - b.norm()).abs() < 1e-15 { mid / mid.norm() * a.norm() } else { mid };
        let fm = self.jost_value(mid);
        Ok(self.arg_increment(a, mid, fa, fm, depth + 1)? + self.arg_increment(mid, b, fm, fb, depth + 1)?)
    }

    /// Radius ρ = exp(−h·b) with b = filter_tol/(2√Λ): every λ with d(λ,[0,∞)) > filter_tol and |λ| ≤ Λ
    /// has |μ| < ρ.
    pub fn certificate_radius(&self, filter_tol: f64, lambda_bound: f64) -> f64 {
        (-self.h * filter_tol / (2.0 * lambda_bound.sqrt())).exp()
    }

    /// ∫|V| on the lattice.
    pub fn l1(&self) -> f64 {
        self.v.iter().map(|v| v.norm()).sum::<f64>() * self.h
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationOutcome {
    pub cloud: EigenvalueCloud,
    pub certified: bool,
    pub winding_count: i64,
    pub continued_count: usize,
    pub used_direct_fallback: bool,
}

/// Eigenvalues of a refined lattice problem by Newton continuation from coarse seeds. The zero count
/// of the Jost function certifies that nothing was missed; on mismatch the direct solver is used.
pub fn continue_cloud(fine: &LatticeProblem, seeds: &[C64], filter_tol: f64, cluster_radius: f64) -> Result<ContinuationOutcome> {
    let lambda_bound = (fine.l1() / 2.0).powi(2) + 1.0;
    let rho = fine.certificate_radius(filter_tol, lambda_bound);
    let mut roots: Vec<C64> = Vec::new();
    for s in seeds {
        if let Some(mu) = fine.newton(fine.mu_of(*s)) {
            if mu.re > MU_RE_MIN && !roots.iter().any(|r| (r - mu).norm() < 1e-9) {
                roots.push(mu);
            }
        }
    }
    let inside = roots.iter().filter(|m| m.norm() < rho).count();
    let winding = fine.zero_count(rho)?;
    let lambdas: Vec<C64> = roots.iter().map(|m| fine.lambda_of(*m)).collect();
    if winding == inside as i64 {
        return Ok(ContinuationOutcome {
            cloud: cloud_from_eigenvalues(&lambdas, fine.v.len(), filter_tol, cluster_radius),
            certified: true,
            winding_count: winding,
            continued_count: inside,
            used_direct_fallback: false,
        });
    }
    let direct = fine.eigenvalues_direct()?;
    Ok(ContinuationOutcome {
        cloud: cloud_from_eigenvalues(&direct, fine.v.len(), filter_tol, cluster_radius),
        certified: false,
        winding_count: winding,
        continued_count: inside,
        used_direct_fallback: true,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SingleBoundReport {
    pub gamma: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// |λ|^γ / ∫|V|^{γ+N/2} per eigenvalue.
pub fn single_bound_check(cloud: &EigenvalueCloud, v: &PotentialField, gamma: f64) -> Result<SingleBoundReport> {
    if !(gamma > 0.0 && gamma <= 0.5) {
        return invalid("γ must lie in (0, 1/2]");
    }
    let e = gamma + v.dim() as f64 / 2.0;
    let integral = v.lq_norm(e).powf(e);
    let ratios: Vec<f64> = cloud.entries.iter().map(|c| c.lambda.norm().powf(gamma) / integral).collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(SingleBoundReport { gamma, ratios, max_ratio })
}

/// Admissible ε for the sum with exponent (N, q), or an error naming the violated case.
pub fn lt_epsilon_check(n: usize, q: f64, eps: f64) -> Result<()> {
    let nf = n as f64;
    let fail = |case: &str| Err(LabError::Inadmissible(format!("ε = {eps} not admissible: {case}")));
    match n {
        0 => invalid("N must be positive"),
        1 => {
            if (q - 1.0).abs() > 1e-12 {
                return fail("N = 1 requires q = 1");
            }
            if eps > 1.0 {
                Ok(())
            } else {
                fail("N = 1 requires ε > 1")
            }
        }
        _ => {
            let lo = if n == 2 { 1.0 } else { nf / 2.0 };
            if !(q > nf / 2.0 && q > lo - 1e-15 && q <= (nf + 1.0) / 2.0 + 1e-12) {
                return fail("need N/2 < q ≤ (N+1)/2 (q = N/2 belongs to the critical sum)");
            }
            let thr = nf * nf / (2.0 * nf - 1.0);
            if q < thr {
                if eps >= 0.0 {
                    Ok(())
                } else {
                    fail("N/2 < q < N²/(2N−1) requires ε ≥ 0")
                }
            } else {
                let e0 = ((2.0 * nf - 1.0) * q - nf * nf) / (nf - q);
                if eps > e0 {
                    Ok(())
                } else {
                    fail(&format!("N²/(2N−1) ≤ q ≤ (N+1)/2 requires ε > {e0}"))
                }
            }
        }
    }
}

/// Σ m·d(λ,[0,∞))/|λ|^{(1−ε)/2}.
pub fn lt_sum(cloud: &EigenvalueCloud, eps: f64, n: usize, q: f64) -> Result<f64> {
    lt_epsilon_check(n, q, eps)?;
    Ok(cloud
        .entries
        .iter()
        .map(|e| e.multiplicity as f64 * distance_to_half_line(e.lambda) / e.lambda.norm().powf((1.0 - eps) / 2.0))
        .sum())
}

/// ‖V‖_q^{(1+ε)q/(2q−N)}.
pub fn lt_rhs(v_norm_q: f64, eps: f64, n: usize, q: f64) -> f64 {
    v_norm_q.powf((1.0 + eps) * q / (2.0 * q - n as f64))
}

/// Σ m·Im√λ/(1+|λ|), Im√λ > 0.
pub fn lt_sum_critical(cloud: &EigenvalueCloud) -> f64 {
    cloud
        .entries
        .iter()
        .map(|e| {
            let mut s = e.lambda.sqrt();
            if s.im < 0.0 {
                s = -s;
            }
            e.multiplicity as f64 * s.im / (1.0 + e.lambda.norm())
        })
        .sum()
}

/// ψ(w) = a((1+w)/(1−w))².
pub fn conformal_map(a: f64, w: C64) -> Result<C64> {
    if !(a < 0.0) {
        return invalid("a must be negative");
    }
    if !(w.norm() < 1.0) {
        return invalid("w must lie in the open unit disk");
    }
    let s = (1.0 + w) / (1.0 - w);
    Ok(a * s * s)
}

/// ψ^{-1}(λ) = (s−1)/(s+1), s = √(−λ)/√(−a) with Re √(−λ) > 0.
pub fn inverse_map(a: f64, lambda: C64) -> Result<C64> {
    if !(a < 0.0) {
        return invalid("a must be negative");
    }
    if lambda.im == 0.0 && lambda.re >= 0.0 {
        return invalid("λ must lie off [0, ∞)");
    }
    let s = (-lambda).sqrt() / (-a).sqrt();
    Ok((s - 1.0) / (s + 1.0))
}

/// Σ m(1−|w|)|1+w|^{(α−1+δ)₊}.
pub fn bgk_sum(zeros: &[(C64, usize)], alpha: f64, delta: f64) -> Result<f64> {
    if !(alpha >= 0.0 && delta > 0.0) {
        return invalid("need α ≥ 0 and δ > 0");
    }
    if zeros.iter().any(|(w, _)| !(w.norm() < 1.0)) {
        return invalid("zeros must lie in the open unit disk");
    }
    let e = (alpha - 1.0 + delta).max(0.0);
    Ok(zeros.iter().map(|(w, m)| *m as f64 * (1.0 - w.norm()) * (1.0 + w).norm().powf(e)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn contains(&self, z: C64) -> bool {
        z.re > self.re_min && z.re < self.re_max && z.im > self.im_min && z.im < self.im_max
    }

    /// Distance from [0, ∞) to the boundary path.
    pub fn margin_from_half_line(&self) -> f64 {
        let crosses_axis = self.im_min <= 0.0 && self.im_max >= 0.0;
        if crosses_axis {
            if self.re_max >= 0.0 {
                0.0
            } else {
                -self.re_max
            }
        } else {
            let dy = self.im_min.abs().min(self.im_max.abs());
            if self.re_max < 0.0 {
                (dy * dy + self.re_max * self.re_max).sqrt()
            } else {
                dy
            }
        }
    }

    pub fn boundary_distance(&self, z: C64) -> f64 {
        let dx = (z.re - self.re_min).abs().min((z.re - self.re_max).abs());
        let dy = (z.im - self.im_min).abs().min((z.im - self.im_max).abs());
        let inside_x = z.re >= self.re_min && z.re <= self.re_max;
        let inside_y = z.im >= self.im_min && z.im <= self.im_max;
        match (inside_x, inside_y) {
            (true, true) => dx.min(dy),
            (true, false) => dy,
            (false, true) => dx,
            _ => (dx * dx + dy * dy).sqrt(),
        }
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroCount {
    pub count: i64,
    pub raw_winding: f64,
    pub arg_winding: f64,
    pub contour_nodes: usize,
    pub cloud_count: Option<usize>,
    pub refined: Vec<C64>,
}

/// h(z) = Det_n(1 + A(z)) with A the Birman–Schwinger operator of V.
pub fn bs_determinant(v: &PotentialField, z: C64, n_det: u32) -> Result<C64> {
    let sp = SpectralParameter::new(z)?;
    let a = match uniform_line_spacing(v) {
        Some(h) => toeplitz_bs_matrix(v, &sp, h),
        None => birman_schwinger_operator(v, &sp)?.unitarize(),
    };
    Ok(regularized_det_lu_mat(a.as_ref(), n_det))
}

/// Spacing h when the 1D space is an equispaced, equal-weight grid of cell width h.
fn uniform_line_spacing(v: &PotentialField) -> Option<f64> {
    let sp = &v.space;
    if sp.dim != 1 || sp.len() < 2 {
        return None;
    }
    let h = sp.points[1][0] - sp.points[0][0];
    let uniform = sp.weights.iter().all(|w| (w - h).abs() <= 1e-12 * h)
        && sp.points.iter().enumerate().all(|(i, p)| (p[0] - sp.points[0][0] - i as f64 * h).abs() <= 1e-9 * h);
    uniform.then_some(h)
}

/// Unitarized A(z) on an equispaced line: the kernel depends on |i − j| only, so one row of
/// exponentials (built by repeated multiplication) fills the matrix.
fn toeplitz_bs_matrix(v: &PotentialField, z: &SpectralParameter, h: f64) -> Mat<C64> {
    let n = v.space.len();
    let k = z.sqrt_z();
    let i = C64::new(0.0, 1.0);
    let step = (i * k * h).exp();
    let mut row = Vec::with_capacity(n);
    let mut e = -C64::new(1.0, 0.0) / (2.0 * i * k);
    for m in 0..n {
        // refresh every 32 steps to keep the rounding of the running product in check
        if m % 32 == 0 {
            e = -(i * k * (m as f64 * h)).exp() / (2.0 * i * k);
        }
        row.push(e * h);
        e *= step;
    }
    let sv = v.sqrt_v();
    let sa = v.sqrt_abs();
    Mat::from_fn(n, n, |a, b| sv[a] * row[a.abs_diff(b)] * sa[b])
}

struct ContourNode {
    z: C64,
    h: C64,
    /// h'(z)/h(z) by central differences
    log_deriv: C64,
}

/// Zeros of h inside `rect` by (1/2πi)∮h'/h dz: trapezoid with central-difference h' on a contour that
/// starts at `contour_m` nodes on the longest edge and is bisected wherever log h or h'/h varies too fast.
/// Cross-checked against `cloud` and refined by Newton from the cloud entries inside the rectangle.
pub fn det_zero_locator(
    v: &PotentialField,
    rect: &Rect,
    n_det: u32,
    contour_m: usize,
    cloud: Option<&EigenvalueCloud>,
) -> Result<ZeroCount> {
    if !(rect.re_max > rect.re_min && rect.im_max > rect.im_min) {
        return invalid("degenerate rectangle");
    }
    if !(rect.margin_from_half_line() > 0.0) {
        return invalid("rectangle boundary touches [0, ∞)");
    }
    if contour_m < 8 {
        return invalid("contour_m must be at least 8");
    }
    let longest = (rect.re_max - rect.re_min).max(rect.im_max - rect.im_min);
    let base = longest / contour_m as f64;
    let node = |z: C64, ds: f64| -> Result<ContourNode> {
        let h = bs_determinant(v, z, n_det)?;
        if h.norm() < 1e-12 {
            return Err(LabError::Singular(format!("zero on contour near {z}; perturb rect")));
        }
        let step = (ds / 16.0).min(1e-4 * z.norm().max(1.0));
        let hp = bs_determinant(v, z + step, n_det)?;
        let hm = bs_determinant(v, z - step, n_det)?;
        Ok(ContourNode { z, h, log_deriv: (hp - hm) / (2.0 * step) / h })
    };
    let corners = rect.corners();
    let mut integral = C64::new(0.0, 0.0);
    let mut arg_total = 0.0;
    let mut nodes = 0;
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        let len = (b - a).norm();
        let per = (len / base).ceil().max(4.0) as usize;
        let ds = len / per as f64;
        let mut prev = node(a, ds)?;
        nodes += 1;
        for k in 1..=per {
            let next = node(a + (b - a) * (k as f64 / per as f64), ds)?;
            let mut stack = vec![(prev, next, ds, 0u32)];
            let mut done: Vec<(ContourNode, ContourNode)> = Vec::new();
            while let Some((p, q, seg, depth)) = stack.pop() {
                let d = (q.h / p.h).ln();
                let bend = ((q.log_deriv - p.log_deriv) * (q.z - p.z)).norm();
                if d.norm() <= 0.2 && bend <= 0.05 {
                    done.push((p, q));
                    continue;
                }
                if depth > 30 {
                    return Err(LabError::NoConvergence("contour refinement exhausted; increase contour_m".into()));
                }
                let m = node((p.z + q.z) / 2.0, seg / 2.0)?;
                nodes += 1;
                let m2 = ContourNode { z: m.z, h: m.h, log_deriv: m.log_deriv };
                // right half first so the left half is processed next
                stack.push((m2, q, seg / 2.0, depth + 1));
                stack.push((p, m, seg / 2.0, depth + 1));
            }
            let mut last = None;
            for (p, q) in done {
                integral += (p.log_deriv + q.log_deriv) * (q.z - p.z) / 2.0;
                arg_total += (q.h / p.h).arg();
                last = Some(q);
            }
            prev = last.expect("at least one sub-segment");
            nodes += 1;
        }
    }
    let raw = integral / C64::new(0.0, 2.0 * PI);
    let count = raw.re.round();
    if (raw.re - count).abs() >= 0.1 || raw.im.abs() >= 0.1 {
        return Err(LabError::NoConvergence(format!("winding number {raw} is not near an integer")));
    }
    let arg_winding = arg_total / (2.0 * PI);
    if (arg_winding - count).abs() > 1e-6 {
        return Err(LabError::NoConvergence(format!("trapezoid count {count} disagrees with argument count {arg_winding}")));
    }
    let mut refined = Vec::new();
    let mut cloud_count = None;
    if let Some(c) = cloud {
        cloud_count = Some(c.count_in(rect));
        for e in c.entries.iter().filter(|e| rect.contains(e.lambda)) {
            let mut z = e.lambda;
            for _ in 0..30 {
                let dz = 1e-6 * z.norm().max(1.0);
                let h0 = bs_determinant(v, z, n_det)?;
                let d = (bs_determinant(v, z + dz, n_det)? - bs_determinant(v, z - dz, n_det)?) / (2.0 * dz);
                if d.norm() == 0.0 {
                    break;
                }
                let step = h0 / d;
                z -= step;
                if step.norm() < 1e-12 * z.norm().max(1.0) {
                    break;
                }
            }
            refined.push(z);
        }
    }
    Ok(ZeroCount { count: count as i64, raw_winding: raw.re, arg_winding, contour_nodes: nodes, cloud_count, refined })
}

/// Random attractive complex wells on [−2, 2]: three compact bumps with amplitude ≈ depth and
/// phase within one radian of π.
pub fn random_well<R: rand::Rng>(rng: &mut R, depth: f64) -> impl Fn(f64) -> C64 + Send + Sync + Clone {
    let bumps: Vec<(f64, f64, C64)> = (0..3)
        .map(|_| {
            let c = 2.0 * rng.random::<f64>() - 1.0;
            let w = 0.4 + 0.6 * rng.random::<f64>();
            let a = C64::from_polar(depth * (0.5 + rng.random::<f64>()), PI + (2.0 * rng.random::<f64>() - 1.0));
            (c, w, a)
        })
        .collect();
    move |x: f64| {
        bumps
            .iter()
            .map(|(c, w, a)| {
                let u = 1.0 - ((x - c) / w).powi(2);
                if u > 0.0 {
                    a * (u * u * u)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleMember {
    pub index: usize,
    pub l1_norm: f64,
    pub coarse: EigenvalueCloud,
    pub fine: EigenvalueCloud,
    pub certified: bool,
    pub lt_coarse: f64,
    pub lt_fine: f64,
    pub lt_rhs: f64,
    pub lt_change: f64,
    pub max_single_coarse: f64,
    pub max_single_fine: f64,
    /// largest distance from a fine eigenvalue to its nearest coarse partner
    pub max_shift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleReport {
    pub members: Vec<EnsembleMember>,
    pub eps: f64,
    pub max_lt_change: f64,
    pub max_lt_ratio: f64,
    pub single_max_coarse: f64,
    pub single_max_fine: f64,
    pub single_change: f64,
    pub all_certified: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub count: usize,
    pub depth: f64,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub eps: f64,
    pub filter_tol: f64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { count: 30, depth: 8.0, n_coarse: 512, n_fine: 1024, eps: 1.5, filter_tol: 1e-6, seed: 7 }
    }
}

const WELL_RADIUS: f64 = 2.0;

fn cluster_radius_for(h: f64) -> f64 {
    // 1e-7·‖H‖ with ‖H‖ ≈ 4/h²
    4e-7 / (h * h)
}

pub fn ensemble_member(cfg: &EnsembleConfig, index: usize) -> Result<EnsembleMember> {
    let mut rng = crate::lab::rng_for(cfg.seed, index as u64);
    let v = random_well(&mut rng, cfg.depth);
    let coarse_p = LatticeProblem::from_fn(WELL_RADIUS, cfg.n_coarse, v.clone())?;
    let fine_p = LatticeProblem::from_fn(WELL_RADIUS, cfg.n_fine, v.clone())?;
    let coarse_eigs = coarse_p.eigenvalues_direct()?;
    let coarse = cloud_from_eigenvalues(&coarse_eigs, cfg.n_coarse, cfg.filter_tol, cluster_radius_for(coarse_p.h));
    let seeds: Vec<C64> = coarse_eigs.clone();
    let out = continue_cloud(&fine_p, &seeds, cfg.filter_tol, cluster_radius_for(fine_p.h))?;
    let fine = out.cloud;
    let l1 = fine_p.l1();
    let lt_coarse = lt_sum(&coarse, cfg.eps, 1, 1.0)?;
    let lt_fine = lt_sum(&fine, cfg.eps, 1, 1.0)?;
    let rhs = lt_rhs(l1, cfg.eps, 1, 1.0);
    let single = |c: &EigenvalueCloud, l1: f64| c.entries.iter().map(|e| e.lambda.norm().sqrt() / l1).fold(0.0, f64::max);
    let max_shift = fine
        .entries
        .iter()
        .map(|f| coarse.entries.iter().map(|c| (c.lambda - f.lambda).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let lt_change = if lt_coarse == 0.0 && lt_fine == 0.0 { 0.0 } else { (lt_fine - lt_coarse).abs() / lt_coarse.abs().max(lt_fine.abs()) };
    Ok(EnsembleMember {
        index,
        l1_norm: l1,
        max_single_coarse: single(&coarse, coarse_p.l1()),
        max_single_fine: single(&fine, l1),
        coarse,
        fine,
        certified: out.certified,
        lt_coarse,
        lt_fine,
        lt_rhs: rhs,
        lt_change,
        max_shift,
    })
}

/// The LT sum (N = 1, q = 1) and the γ = 1/2 single-eigenvalue ratio on a random ensemble at two
/// resolutions.
pub fn eigen_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    use rayon::prelude::*;
    lt_epsilon_check(1, 1.0, cfg.eps)?;
    if cfg.count == 0 || cfg.n_fine <= cfg.n_coarse {
        return invalid("need a nonempty ensemble and n_fine > n_coarse");
    }
    let members: Vec<EnsembleMember> = (0..cfg.count).into_par_iter().map(|i| ensemble_member(cfg, i)).collect::<Result<_>>()?;
    let max_lt_change = members.iter().map(|m| m.lt_change).fold(0.0, f64::max);
    let max_lt_ratio = members.iter().map(|m| m.lt_fine / m.lt_rhs).fold(0.0, f64::max);
    let sc = members.iter().map(|m| m.max_single_coarse).fold(0.0, f64::max);
    let sf = members.iter().map(|m| m.max_single_fine).fold(0.0, f64::max);
    Ok(EnsembleReport {
        eps: cfg.eps,
        max_lt_change,
        max_lt_ratio,
        single_max_coarse: sc,
        single_max_fine: sf,
        single_change: (sf - sc).abs() / sc.max(sf),
        all_certified: members.iter().all(|m| m.certified),
        members,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaWellReport {
    pub width: f64,
    pub coupling: f64,
    pub lowest: f64,
    pub ratio: f64,
}

/// V = −(c/w)·1_{[0,w]} with Dirichlet differences on [−10, 10]; ratio |λ₀|^{1/2}/∫|V|.
pub fn delta_well(c: f64, w: f64, h: f64) -> Result<DeltaWellReport> {
    if !(c > 0.0 && w > 0.0 && h > 0.0 && h <= w) {
        return invalid("need c, w > 0 and 0 < h ≤ w");
    }
    let half = 10.0;
    let n = (2.0 * half / h).round() as usize;
    let g = SpatialGrid::new(1, half, n)?;
    let xs = g.axis();
    let hh = g.spacing();
    let v: Vec<C64> = xs
        .iter()
        .map(|&x| {
            // fraction of the cell [x − h/2, x + h/2] inside [0, w]
            let overlap = ((x + hh / 2.0).min(w) - (x - hh / 2.0).max(0.0)).max(0.0) / hh;
            C64::new(-(c / w) * overlap, 0.0)
        })
        .collect();
    let hm = discretize_schrodinger(&v, &Discretization::Dirichlet(g))?;
    let re = Mat::<f64>::from_fn(n, n, |i, j| hm[(i, j)].re);
    let ev = re.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|e| LabError::Linalg(format!("{e:?}")))?;
    let lowest = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let l1: f64 = v.iter().map(|x| x.norm()).sum::<f64>() * hh;
    Ok(DeltaWellReport { width: w, coupling: c, lowest, ratio: lowest.abs().sqrt() / l1 })
}

/// Three rectangles covering {|λ| ≤ Λ} minus a strip of half-width `gap` about [0, ∞).
pub fn covering_rects(lambda_max: f64, gap: f64) -> [Rect; 3] {
    let b = lambda_max + 1.0;
    [
        Rect { re_min: -b, re_max: -gap, im_min: -b, im_max: b },
        Rect { re_min: -gap, re_max: b, im_min: gap, im_max: b },
        Rect { re_min: -gap, re_max: b, im_min: -b, im_max: -gap },
    ]
}

/// `covering_rects` with the gap chosen so that no given point lies within `margin` of a boundary.
pub fn covering_rects_avoiding(points: &[C64], lambda_max: f64, gap: f64, margin: f64) -> Result<[Rect; 3]> {
    let outer = points.iter().map(|z| z.re.abs().max(z.im.abs())).fold(lambda_max, f64::max) + 2.0 * margin;
    for k in 0..40 {
        let g = gap * (1.0 + 0.05 * ((k + 1) / 2) as f64 * if k % 2 == 0 { 1.0 } else { -1.0 });
        let rects = covering_rects(outer, g);
        if points.iter().all(|z| rects.iter().all(|r| r.boundary_distance(*z) >= margin)) {
            return Ok(rects);
        }
    }
    Err(LabError::NoConvergence("no gap keeps the eigenvalues off the rectangle boundaries".into()))
}

#[derive(Clone, Debug, Serialize)]
pub struct LocatorRow {
    pub index: usize,
    pub rect: Rect,
    pub det_count: i64,
    pub cloud_count: usize,
    pub raw_winding: f64,
    pub contour_nodes: usize,
}

/// Determinant zero counts on the covering rectangles of ensemble members, next to the lattice cloud
/// counts. The determinant uses the continuum kernel on `n_det_points` support points.
pub fn locator_crosscheck(cfg: &EnsembleConfig, members: usize, n_det_points: usize, contour_m: usize) -> Result<Vec<LocatorRow>> {
    use rayon::prelude::*;
    let rows: Vec<Vec<LocatorRow>> = (0..members)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::lab::rng_for(cfg.seed, i as u64);
            let lattice = LatticeProblem::from_fn(WELL_RADIUS, cfg.n_coarse, random_well(&mut rng, cfg.depth))?;
            let eigs = lattice.eigenvalues_direct()?;
            let cloud = cloud_from_eigenvalues(&eigs, cfg.n_coarse, cfg.filter_tol, cluster_radius_for(lattice.h));
            locator_rows(cfg, i, &cloud, n_det_points, contour_m)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Locator rows for one member whose lattice cloud is already known.
pub fn locator_rows(cfg: &EnsembleConfig, index: usize, cloud: &EigenvalueCloud, n_det_points: usize, contour_m: usize) -> Result<Vec<LocatorRow>> {
    let mut rng = crate::lab::rng_for(cfg.seed, index as u64);
    let v = random_well(&mut rng, cfg.depth);
    let space = SpatialGrid::new(1, WELL_RADIUS, n_det_points)?.space();
    let field = PotentialField::from_fn(space, |p| v(p[0]));
    let l1 = field.lq_norm(1.0);
    let points: Vec<C64> = cloud.entries.iter().map(|e| e.lambda).collect();
    let rects = covering_rects_avoiding(&points, (l1 / 2.0).powi(2), 0.3, 0.15)?;
    rects
        .iter()
        .map(|r| {
            let z = det_zero_locator(&field, r, 2, contour_m, Some(cloud))?;
            Ok(LocatorRow {
                index,
                rect: *r,
                det_count: z.count,
                cloud_count: z.cloud_count.unwrap_or(0),
                raw_winding: z.raw_winding,
                contour_nodes: z.contour_nodes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_well_sharpness() {
        let r = delta_well(2.0, 0.05, 0.0125).unwrap();
        // even bound state of the continuum square well: k' tan(k'w/2) = κ, k'² = c/w − κ²
        let f = |k: f64| {
            let kp = (40.0 - k * k).sqrt();
            kp * (kp * 0.025).tan() - k
        };
        let (mut a, mut b) = (0.5, 1.5);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let exact = -a * a;
        assert!((r.lowest - exact).abs() < 5e-3 * exact.abs(), "{r:?} vs {exact}");
        assert!((r.ratio - 0.5).abs() < 0.025);
    }

    #[test]
    fn toeplitz_path_matches_general_kernel() {
        let space = SpatialGrid::new(1, 2.0, 40).unwrap().space();
        let v = PotentialField::from_fn(space, |p| C64::new(-3.0 * (1.0 - p[0] * p[0] / 4.0), 1.0));
        let z = SpectralParameter::new(C64::new(-0.7, 0.9)).unwrap();
        let fast = toeplitz_bs_matrix(&v, &z, uniform_line_spacing(&v).unwrap());
        let slow = birman_schwinger_operator(&v, &z).unwrap().unitarize();
        let d = crate::specmat::frobenius((&fast - &slow).as_ref()) / crate::specmat::frobenius(slow.as_ref());
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn free_determinant_has_no_zeros() {
        let space = SpatialGrid::new(1, 1.0, 16).unwrap().space();
        let v = PotentialField::from_fn(space, |_| C64::new(0.0, 0.0));
        let r = Rect { re_min: -3.0, re_max: -0.5, im_min: -1.0, im_max: 1.0 };
        let z = det_zero_locator(&v, &r, 2, 16, None).unwrap();
        assert_eq!(z.count, 0);
        assert!(z.raw_winding.abs() < 1e-12);
    }

    #[test]
    fn map_values() {
        assert!((conformal_map(-2.0, C64::new(0.0, 0.0)).unwrap() - C64::new(-2.0, 0.0)).norm() < 1e-15);
        let near = conformal_map(-2.0, C64::new(-1.0 + 1e-9, 0.0)).unwrap();
        assert!(near.norm() < 1e-15);
        let w = C64::new(0.3, -0.4);
        let l = conformal_map(-1.5, w).unwrap();
        assert!((inverse_map(-1.5, l).unwrap() - w).norm() < 1e-13);
    }

    #[test]
    fn small_sums() {
        assert_eq!(bgk_sum(&[], 1.0, 1.0).unwrap(), 0.0);
        assert!((bgk_sum(&[(C64::new(0.0, 0.0), 1)], 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((bgk_sum(&[(C64::new(-0.5, 0.0), 1)], 2.0, 0.5).unwrap() - 0.5 * 0.5f64.powf(1.5)).abs() < 1e-15);
        let c = cloud_from_eigenvalues(&[C64::new(0.0, 1.0)], 1, 1e-6, 1e-9);
        assert!((lt_sum_critical(&c) - (PI / 4.0).sin() / 2.0).abs() < 1e-15);
        let c = cloud_from_eigenvalues(&[C64::new(-1.0, 0.0)], 1, 1e-6, 1e-9);
        assert!((lt_sum(&c, 1.5, 1, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((lt_sum_critical(&c) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn epsilon_table() {
        assert!(lt_epsilon_check(1, 1.0, 1.0).is_err());
        assert!(lt_epsilon_check(1, 1.0, 1.01).is_ok());
        assert!(lt_epsilon_check(2, 1.2, 0.0).is_ok());
        // N = 2, q = 3/2: ε > (3·1.5 − 4)/(0.5) = 1
        assert!(lt_epsilon_check(2, 1.5, 1.0).is_err());
        assert!(lt_epsilon_check(2, 1.5, 1.1).is_ok());
        assert!(lt_epsilon_check(3, 1.5, 1.0).is_err());
        assert!(lt_epsilon_check(3, 1.7, 0.0).is_ok());
    }

    #[test]
    fn clustering_merges_and_filters() {
        let eigs = [C64::new(-1.0, 0.0), C64::new(-1.0, 1e-9), C64::new(2.0, 1e-8), C64::new(-3.0, 0.5)];
        let c = cloud_from_eigenvalues(&eigs, 4, 1e-6, 1e-7);
        assert_eq!(c.entries.len(), 2);
        assert_eq!(c.count(), 3);
    }

    #[test]
    fn lattice_routes_agree() {
        let p = LatticeProblem::from_fn(1.0, 64, |x| C64::new(-30.0 * (1.0 - x * x), 4.0 * x)).unwrap();
        let direct = p.eigenvalues_direct().unwrap();
        assert!(!direct.is_empty());
        for l in &direct {
            let mu = p.mu_of(*l);
            assert!(p.jost(mu).0.norm() < 1e-6 * p.jost(mu * 0.9).0.norm());
            let refined = p.newton(mu).unwrap();
            assert!((p.lambda_of(refined) - l).norm() < 1e-8 * l.norm());
        }
        let rho = p.certificate_radius(1e-6, (p.l1() / 2.0).powi(2) + 1.0);
        assert_eq!(p.zero_count(rho).unwrap(), direct.len() as i64);
    }

    #[test]
    fn free_dirichlet_spectrum() {
        let g = SpatialGrid::new(1, 1.0, 20).unwrap();
        let h = discretize_schrodinger(&vec![C64::new(0.0, 0.0); 20], &Discretization::Dirichlet(g)).unwrap();
        let mut ev: Vec<f64> = eigenvalues_mat(h.as_ref()).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s = g.spacing();
        let expect = (2.0 - 2.0 * (PI / 21.0).cos()) / (s * s);
        assert!((ev[0] - expect).abs() < 1e-9 * expect);
    }
}
