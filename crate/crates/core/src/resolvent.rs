//! Free resolvent kernels, sandwiched resolvents, multiplier bounds, Birman–Schwinger operators
//! and boundary values on the positive half-line.

use crate::evolution::{Propagator, Symbol, TorusGrid};
use crate::lab::rng_for;
use crate::restriction::{Envelope, Profile};
use crate::special::bessel_k01;
use crate::specmat::{frobenius, schatten_from_values, schatten_mat, singular_values_mat, WeightedOperator, WeightedSpace};
use crate::surface::{ts_operator, SpatialGrid, SurfaceGrid, SurfaceKind};
use crate::{invalid, LabError, Result, C64};
use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// z off [0, ∞) together with the branch √z, Im √z > 0. Every power of z goes through √z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralParameter {
    z: C64,
    sqrt_z: C64,
}

impl SpectralParameter {
    pub fn new(z: C64) -> Result<Self> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return invalid("spectral parameter must be finite");
        }
        if z.im == 0.0 && z.re >= 0.0 {
            return invalid(format!("z = {z} lies on the spectrum [0, ∞)"));
        }
        let mut k = z.sqrt();
        if k.im < 0.0 {
            k = -k;
        }
        Ok(Self { z, sqrt_z: k })
    }

    /// z = ρ e^{iθ}, θ ∈ (0, 2π), with √z = √ρ e^{iθ/2} exactly.
    pub fn polar(modulus: f64, arg: f64) -> Result<Self> {
        if !(modulus > 0.0) || !(arg > 0.0 && arg < 2.0 * PI) {
            return invalid(format!("need |z| > 0 and arg z in (0, 2π), got {modulus}, {arg}"));
        }
        let k = C64::from_polar(modulus.sqrt(), arg / 2.0);
        Ok(Self { z: k * k, sqrt_z: k })
    }

    pub fn from_sqrt(k: C64) -> Result<Self> {
        if !(k.im > 0.0) {
            return invalid(format!("√z must have positive imaginary part, got {k}"));
        }
        Ok(Self { z: k * k, sqrt_z: k })
    }

    /// Boundary value λ ± i0, λ > 0: √z = ±√λ. The kernels extend continuously to this limit.
    pub fn boundary(lambda: f64, side: BoundarySide) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return invalid("boundary values need λ > 0");
        }
        let k = match side {
            BoundarySide::Upper => lambda.sqrt(),
            BoundarySide::Lower => -lambda.sqrt(),
        };
        Ok(Self { z: C64::new(lambda, 0.0), sqrt_z: C64::new(k, 0.0) })
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    pub fn sqrt_z(&self) -> C64 {
        self.sqrt_z
    }

    pub fn modulus(&self) -> f64 {
        self.sqrt_z.norm_sqr()
    }

    /// |z|^a.
    pub fn modulus_power(&self, a: f64) -> f64 {
        self.sqrt_z.norm().powf(2.0 * a)
    }
}

/// V sampled on a weighted space, with √V := V/√|V| (zero where V vanishes).
#[derive(Clone, Debug)]
pub struct PotentialField {
    pub space: Arc<WeightedSpace>,
    pub values: Vec<C64>,
}

impl PotentialField {
    pub fn new(space: Arc<WeightedSpace>, values: Vec<C64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(LabError::Dimension("potential samples vs space".into()));
        }
        Ok(Self { space, values })
    }

    pub fn from_fn(space: Arc<WeightedSpace>, f: impl Fn(&[f64; 3]) -> C64) -> Self {
        let values = space.points.iter().map(&f).collect();
        Self { space, values }
    }

    pub fn lq_norm(&self, q: f64) -> f64 {
        self.space.lp_norm_c(&self.values, q)
    }

    pub fn sqrt_v(&self) -> Vec<C64> {
        self.values.iter().map(|v| if v.norm() == 0.0 { C64::new(0.0, 0.0) } else { v / v.norm().sqrt() }).collect()
    }

    pub fn sqrt_abs(&self) -> Vec<C64> {
        self.values.iter().map(|v| C64::new(v.norm().sqrt(), 0.0)).collect()
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }
}

/// (−Δ−z)^{-1}(x, y) as a function of r = |x−y|.
pub fn resolvent_kernel(n: usize, z: &SpectralParameter, r: f64) -> Result<C64> {
    let k = z.sqrt_z();
    let i = C64::new(0.0, 1.0);
    match n {
        1 => Ok(-(i * k * r.abs()).exp() / (2.0 * i * k)),
        2 | 3 => {
            if !(r > 0.0) {
                return invalid("the kernel is singular at r = 0 in N ≥ 2");
            }
            if n == 2 {
                Ok(bessel_k01(-i * k * r).0 / (2.0 * PI))
            } else {
                Ok((i * k * r).exp() / (4.0 * PI * r))
            }
        }
        _ => invalid(format!("resolvent kernels are implemented for N ≤ 3, got {n}")),
    }
}

/// Average of the kernel over a ball (disk) of the given measure centred at r = 0; N = 1 uses the point value.
pub fn kernel_cell_average(n: usize, z: &SpectralParameter, measure: f64) -> C64 {
    let k = z.sqrt_z();
    let i = C64::new(0.0, 1.0);
    match n {
        1 => -C64::new(1.0, 0.0) / (2.0 * i * k),
        2 => {
            let a = (measure / PI).sqrt();
            let c = -i * k;
            let ca = c * a;
            if ca.norm() < 1e-3 {
                // (1 − caK₁(ca))/c² ≈ (a²/2)(−ln(ca/2) − γ + 1/2)
                let g = 0.577_215_664_901_532_9;
                return (a * a / 2.0) * (-(ca / 2.0).ln() - g + 0.5) / (PI * a * a);
            }
            (1.0 - ca * bessel_k01(ca).1) / (c * c * PI * a * a)
        }
        _ => {
            let a = (3.0 * measure / (4.0 * PI)).cbrt();
            let ika = i * k * a;
            // ∫₀^a r e^{iκr} dr
            let integral = if ika.norm() < 0.5 {
                let mut s = C64::new(0.0, 0.0);
                let mut term = C64::new(1.0, 0.0);
                for m in 0..30 {
                    s += term / (m as f64 + 2.0);
                    term *= ika / (m as f64 + 1.0);
                }
                s * a * a
            } else {
                (ika.exp() * (ika - 1.0) + 1.0) / (i * k * i * k)
            };
            integral * 3.0 / (4.0 * PI * a * a * a)
        }
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Unitarized matrix of W₁ R₀(z) W₂ on a weighted space: √w_i W₁(x_i) G(x_i, x_j) W₂(x_j) √w_j,
/// the diagonal carrying the cell average.
pub fn sandwich_resolvent_matrix(w1: &[C64], w2: &[C64], z: &SpectralParameter, space: &WeightedSpace) -> Result<Mat<C64>> {
    let n = space.dim;
    let m = space.len();
    if w1.len() != m || w2.len() != m {
        return Err(LabError::Dimension("multipliers vs space".into()));
    }
    if !(1..=3).contains(&n) {
        return invalid("resolvent sandwiches need N ∈ {1, 2, 3}");
    }
    let sw: Vec<f64> = space.weights.iter().map(|w| w.sqrt()).collect();
    let rows: Vec<Vec<C64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let a = w1[i] * sw[i];
            (0..m)
                .map(|j| {
                    let g = if i == j {
                        kernel_cell_average(n, z, space.weights[i])
                    } else {
                        resolvent_kernel(n, z, dist(&space.points[i], &space.points[j])).expect("r > 0 off the diagonal")
                    };
                    a * g * w2[j] * sw[j]
                })
                .collect()
        })
        .collect();
    Ok(Mat::from_fn(m, m, |i, j| rows[i][j]))
}

/// R₀(z) as a kernel operator on the space.
pub fn resolvent_operator(space: &Arc<WeightedSpace>, z: &SpectralParameter) -> Result<WeightedOperator> {
    let one = vec![C64::new(1.0, 0.0); space.len()];
    let u = sandwich_resolvent_matrix(&one, &one, z, space)?;
    let sw: Vec<f64> = space.weights.iter().map(|w| w.sqrt()).collect();
    let k = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] / (sw[i] * sw[j]));
    Ok(WeightedOperator { matrix: k, domain: space.clone(), codomain: space.clone() })
}

/// ‖W₁(−Δ−z)^{-1}W₂‖_{S^α}.
pub fn sandwich_resolvent(w1: &[C64], w2: &[C64], z: &SpectralParameter, space: &WeightedSpace, alpha: f64) -> Result<f64> {
    schatten_mat(sandwich_resolvent_matrix(w1, w2, z, space)?.as_ref(), alpha)
}

/// Fourier-multiplier resolvent (|k|² − z)^{-1} on a torus, in orthonormal point coordinates.
pub fn torus_resolvent(grid: &TorusGrid, z: &SpectralParameter) -> Mat<C64> {
    let p = Propagator::new(*grid, Symbol::Schrodinger);
    let k2 = grid.k_squared();
    let n = grid.len();
    let mut m = Mat::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        let mut v = p.to_fourier(&e);
        v.iter_mut().zip(&k2).for_each(|(c, k)| *c /= C64::new(*k, 0.0) - z.z());
        p.transform(&mut v, true);
        for i in 0..n {
            m[(i, j)] = v[i];
        }
        e[j] = C64::new(0.0, 0.0);
    }
    m
}

/// Schatten exponent and |z| power of the uniform Sobolev bound for (N, q), and whether q lies in the
/// proven range (false: the run is reported without a verdict).
pub fn sobolev_exponents(n: usize, q: f64) -> Result<(f64, f64, bool)> {
    let nf = n as f64;
    let power = -1.0 + nf / (2.0 * q);
    match n {
        1 if (q - 1.0).abs() < 1e-12 => Ok((2.0, power, true)),
        2 if q > 1.0 && q <= 1.5 + 1e-12 => Ok((q / (2.0 - q), power, q >= 4.0 / 3.0 - 1e-12)),
        3 if (1.5 - 1e-12..=2.0 + 1e-12).contains(&q) => Ok((2.0 * q / (3.0 - q), power, true)),
        _ => Err(LabError::Inadmissible(format!(
            "q = {q} outside the range for N = {n} (N=1: q=1; N=2: 1<q≤3/2; N=3: 3/2≤q≤2)"
        ))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SobolevConfig {
    pub n: usize,
    pub q: f64,
    pub moduli: Vec<f64>,
    pub args: Vec<f64>,
    pub pairs: usize,
    /// points per axis of the box [−R, R]^N, one entry per refinement level
    pub levels: Vec<usize>,
    pub support_radius: f64,
    pub spread_factor: f64,
    pub refinement_tolerance: f64,
    pub seed: u64,
}

impl SobolevConfig {
    pub fn standard(n: usize, q: f64, seed: u64) -> Self {
        let levels = match n {
            1 => vec![200, 400],
            2 => vec![24, 36],
            _ => vec![10, 12],
        };
        Self {
            n,
            q,
            moduli: vec![0.25, 1.0, 4.0],
            args: (1..16).map(|k| k as f64 * PI / 8.0).collect(),
            pairs: 2,
            levels,
            support_radius: 1.5,
            spread_factor: 10.0,
            refinement_tolerance: 0.1,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SobolevPoint {
    pub level: usize,
    pub pair: usize,
    pub modulus: f64,
    pub arg: f64,
    pub norm: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SobolevReport {
    pub n: usize,
    pub q: f64,
    pub alpha: f64,
    pub z_power: f64,
    pub in_proven_range: bool,
    pub points: Vec<SobolevPoint>,
    /// max over pairs of max/min ratio over the z sweep, finest level
    pub spread: f64,
    pub level_max: Vec<f64>,
    pub refinement_changes: Vec<f64>,
    pub max_ratio: f64,
    pub pass: Option<bool>,
}

/// Random pair of compactly supported envelopes inside the ball of radius R.
pub fn envelope_pair(n: usize, radius: f64, seed: u64, index: u64) -> (Envelope, Envelope) {
    let mut rng = rng_for(seed, index);
    let spread = 0.45 * radius / (n as f64).sqrt();
    let e1 = Envelope::random(&mut rng, n, spread, (0.4 * radius, 0.55 * radius), 2, 1.5, Profile::Compact);
    let e2 = Envelope::random(&mut rng, n, spread, (0.4 * radius, 0.55 * radius), 2, 1.5, Profile::Compact);
    (e1, e2)
}

pub fn uniform_sobolev_sweep(cfg: &SobolevConfig) -> Result<SobolevReport> {
    let (alpha, power, proven) = sobolev_exponents(cfg.n, cfg.q)?;
    if cfg.levels.is_empty() || cfg.moduli.is_empty() || cfg.args.is_empty() || cfg.pairs == 0 {
        return invalid("sweep needs levels, moduli, args and at least one pair");
    }
    let r = cfg.support_radius;
    let mut points = Vec::new();
    for (li, &np) in cfg.levels.iter().enumerate() {
        let grid = SpatialGrid::new(cfg.n, r, np)?;
        let space = grid.space_where(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= r);
        for pair in 0..cfg.pairs {
            let (e1, e2) = envelope_pair(cfg.n, r, cfg.seed, pair as u64);
            let w1 = e1.sample(&space);
            let w2 = e2.sample(&space);
            let den = space.lp_norm_c(&w1, 2.0 * cfg.q) * space.lp_norm_c(&w2, 2.0 * cfg.q);
            let zs: Vec<(f64, f64)> = cfg.moduli.iter().flat_map(|m| cfg.args.iter().map(move |a| (*m, *a))).collect();
            for (m, a) in zs {
                let z = SpectralParameter::polar(m, a)?;
                let norm = sandwich_resolvent(&w1, &w2, &z, &space, alpha)?;
                points.push(SobolevPoint { level: li, pair, modulus: m, arg: a, norm, ratio: norm / (z.modulus_power(power) * den) });
            }
        }
    }
    let last = cfg.levels.len() - 1;
    let spread = (0..cfg.pairs)
        .map(|p| {
            let rs: Vec<f64> = points.iter().filter(|s| s.level == last && s.pair == p).map(|s| s.ratio).collect();
            rs.iter().cloned().fold(0.0, f64::max) / rs.iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let level_max: Vec<f64> = (0..cfg.levels.len())
        .map(|l| points.iter().filter(|s| s.level == l).map(|s| s.ratio).fold(0.0, f64::max))
        .collect();
    let changes: Vec<f64> = level_max.windows(2).map(|w| (w[1] - w[0]).abs() / w[0]).collect();
    let max_ratio = level_max[last];
    let pass = if proven {
        let mut ok = spread <= cfg.spread_factor && changes.iter().all(|c| *c < cfg.refinement_tolerance);
        if cfg.n == 1 {
            ok &= points.iter().all(|p| p.ratio <= 0.5 * (1.0 + 1e-9));
        }
        Some(ok)
    } else {
        None
    };
    Ok(SobolevReport {
        n: cfg.n,
        q: cfg.q,
        alpha,
        z_power: power,
        in_proven_range: proven,
        points,
        spread,
        level_max,
        refinement_changes: changes,
        max_ratio,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Uniform1dRow {
    pub modulus: f64,
    pub arg: f64,
    pub hs_norm: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Uniform1dReport {
    pub rows: Vec<Uniform1dRow>,
    pub violations: usize,
    pub max_ratio: f64,
}

/// ‖W₁R₀(z)W₂‖_{S²} in N = 1 against (1/2)|z|^{-1/2}‖W₁‖₂‖W₂‖₂. The midpoint rule on [−L, L] errs
/// at O(h²) because of the kink of |G|² on the diagonal, so squared norms from n and 2n cells are
/// Richardson-combined.
pub fn uniform_resolvent_1d(
    w1: impl Fn(f64) -> C64 + Sync,
    w2: impl Fn(f64) -> C64 + Sync,
    half_width: f64,
    n: usize,
    zs: &[SpectralParameter],
) -> Result<Uniform1dReport> {
    if n < 8 {
        return invalid("need at least 8 cells");
    }
    let coarse = SpatialGrid::new(1, half_width, n)?.space();
    let fine = SpatialGrid::new(1, half_width, 2 * n)?.space();
    let sample = |s: &WeightedSpace, f: &(dyn Fn(f64) -> C64 + Sync)| -> Vec<C64> { s.points.iter().map(|p| f(p[0])).collect() };
    let (a1, a2) = (sample(&coarse, &w1), sample(&coarse, &w2));
    let (b1, b2) = (sample(&fine, &w1), sample(&fine, &w2));
    let l2 = fine.lp_norm_c(&b1, 2.0) * fine.lp_norm_c(&b2, 2.0);
    let mut rows = Vec::with_capacity(zs.len());
    for z in zs {
        let hc = frobenius(sandwich_resolvent_matrix(&a1, &a2, z, &coarse)?.as_ref()).powi(2);
        let hf = frobenius(sandwich_resolvent_matrix(&b1, &b2, z, &fine)?.as_ref()).powi(2);
        let hs = ((4.0 * hf - hc) / 3.0).max(0.0).sqrt();
        rows.push(Uniform1dRow { modulus: z.modulus(), arg: 2.0 * z.sqrt_z().arg(), hs_norm: hs, bound: 0.5 * z.modulus_power(-0.5) * l2 });
    }
    let violations = rows.iter().filter(|r| r.hs_norm > r.bound * (1.0 + 1e-9)).count();
    let max_ratio = rows.iter().map(|r| r.hs_norm / r.bound).fold(0.0, f64::max);
    Ok(Uniform1dReport { rows, violations, max_ratio })
}

#[derive(Clone, Debug, Serialize)]
pub struct KssReport {
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

fn check_kss_p(p: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return invalid(format!("need 1 ≤ p ≤ 2, got {p}"));
    }
    Ok(if p == 2.0 { f64::INFINITY } else { 2.0 * p / (2.0 - p) })
}

/// ĝ(−i∇) on the torus in orthonormal point coordinates.
pub fn torus_multiplier(grid: &TorusGrid, g_hat: &[C64]) -> Mat<C64> {
    let p = Propagator::new(*grid, Symbol::Schrodinger);
    let n = grid.len();
    let mut m = Mat::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        let mut v = p.to_fourier(&e);
        v.iter_mut().zip(g_hat).for_each(|(c, g)| *c *= g);
        p.transform(&mut v, true);
        for i in 0..n {
            m[(i, j)] = v[i];
        }
        e[j] = C64::new(0.0, 0.0);
    }
    m
}

fn frequency_space(grid: &TorusGrid) -> WeightedSpace {
    let dk = (2.0 * PI / grid.length).powi(grid.dim as i32);
    WeightedSpace { dim: grid.dim, points: vec![[0.0; 3]; grid.len()], weights: vec![dk; grid.len()] }
}

/// ‖W|ĝ(−i∇)|²W̄‖_{S^{p/(2−p)}} against (2π)^{N(1−2/p)}‖W‖²_{2p/(2−p)}‖ĝ‖²_{2p/(2−p)}; ĝ is indexed
/// in FFT order with the frequency measure (2π/L)^N.
pub fn kss_multiplier_check(w: &[C64], g_hat: &[C64], p: f64, grid: &TorusGrid) -> Result<KssReport> {
    let r = check_kss_p(p)?;
    if w.len() != grid.len() || g_hat.len() != grid.len() {
        return Err(LabError::Dimension("W and ĝ must live on the torus grid".into()));
    }
    let g = torus_multiplier(grid, g_hat);
    let m = Mat::from_fn(g.nrows(), g.ncols(), |i, j| w[i] * g[(i, j)]);
    let lhs = schatten_from_values(&singular_values_mat(m.as_ref())?, r)?.powi(2);
    let nf = grid.dim as f64;
    let rhs = (2.0 * PI).powf(nf * (1.0 - 2.0 / p)) * grid.space().lp_norm_c(w, r).powi(2) * frequency_space(grid).lp_norm_c(g_hat, r).powi(2);
    Ok(KssReport { p, lhs, rhs, ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 } })
}

/// ‖Σν_j|g∗f_j|²‖_{L^{p'/2}} against (2π)^{2N/p'}‖ĝ‖²_{2p/(2−p)}(Σ|ν_j|^{p'/2})^{2/p'}, with g∗f = (2π)^{N/2}ĝ(−i∇)f.
pub fn young_orthonormal_check(g_hat: &[C64], system: &Mat<C64>, nu: &[C64], p: f64, grid: &TorusGrid) -> Result<KssReport> {
    let r = check_kss_p(p)?;
    if system.nrows() != grid.len() || system.ncols() != nu.len() || g_hat.len() != grid.len() {
        return Err(LabError::Dimension("system, coefficients and ĝ must match the torus".into()));
    }
    let pp = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let nf = grid.dim as f64;
    let prop = Propagator::new(*grid, Symbol::Schrodinger);
    let c = (2.0 * PI).powf(nf / 2.0);
    let mut rho = vec![0.0; grid.len()];
    for j in 0..nu.len() {
        let mut v = prop.to_fourier(&(0..grid.len()).map(|i| system[(i, j)]).collect::<Vec<_>>());
        v.iter_mut().zip(g_hat).for_each(|(a, g)| *a *= g * c);
        prop.transform(&mut v, true);
        for (r_, u) in rho.iter_mut().zip(&v) {
            *r_ += (nu[j] * u.norm_sqr()).re;
        }
    }
    let lhs = grid.space().lp_norm(&rho.iter().map(|v| v.abs()).collect::<Vec<_>>(), pp / 2.0);
    let nu_abs: Vec<f64> = nu.iter().map(|v| v.norm()).collect();
    let coeff = schatten_from_values(&nu_abs, pp / 2.0)?;
    let rhs = (2.0 * PI).powf(2.0 * nf / pp) * frequency_space(grid).lp_norm_c(g_hat, r).powi(2) * coeff;
    Ok(KssReport { p, lhs, rhs, ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 } })
}

/// α_q = max(2, (N−1)q/(N−q)).
pub fn alpha_q(n: usize, q: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 1 {
        return Ok(2.0);
    }
    if !(q >= 1.0 && q < nf) {
        return Err(LabError::Inadmissible(format!("need 1 ≤ q < N for the Birman–Schwinger exponent, got q = {q}")));
    }
    Ok(((nf - 1.0) * q / (nf - q)).max(2.0))
}

#[derive(Clone, Debug)]
pub struct BirmanSchwinger {
    pub op: WeightedOperator,
    pub alpha: f64,
    pub norm: f64,
}

/// A(z) = √V R₀(z) √|V| and its S^{α_q} norm.
pub fn birman_schwinger(v: &PotentialField, z: &SpectralParameter, q: f64) -> Result<BirmanSchwinger> {
    let alpha = alpha_q(v.dim(), q)?;
    let op = birman_schwinger_operator(v, z)?;
    let norm = schatten_mat(op.unitarize().as_ref(), alpha)?;
    Ok(BirmanSchwinger { op, alpha, norm })
}

pub fn birman_schwinger_operator(v: &PotentialField, z: &SpectralParameter) -> Result<WeightedOperator> {
    let u = sandwich_resolvent_matrix(&v.sqrt_v(), &v.sqrt_abs(), z, &v.space)?;
    let sw: Vec<f64> = v.space.weights.iter().map(|w| w.sqrt()).collect();
    let k = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] / (sw[i] * sw[j]));
    Ok(WeightedOperator { matrix: k, domain: v.space.clone(), codomain: v.space.clone() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundarySide {
    Upper,
    Lower,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbedCheck {
    pub a_norm: f64,
    pub a_operator_norm: f64,
    pub perturbed_norm: f64,
    pub bound: f64,
    pub applicable: bool,
    pub holds: bool,
    pub condition: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LapReport {
    pub lambda: f64,
    pub side: BoundarySide,
    pub alpha: f64,
    pub eps: Vec<f64>,
    pub norms: Vec<f64>,
    pub cauchy: Vec<f64>,
    pub monotone: bool,
    pub extrapolated_norm: f64,
    pub extrapolation_change: f64,
    pub perturbed: PerturbedCheck,
    #[serde(skip)]
    pub extrapolated: Mat<C64>,
}

fn richardson(a: &Mat<C64>, b: &Mat<C64>, ratio: f64, order: i32) -> Mat<C64> {
    // b = A(ratio·ε), a = A(ε), error ∝ ε^order
    let r = ratio.powi(order);
    (b - a * faer::Scale(C64::new(r, 0.0))) * faer::Scale(C64::new(1.0 / (1.0 - r), 0.0))
}

/// Boundary value A(λ ± i0) of the Birman–Schwinger family in S^{α_q}: Cauchy differences along a
/// geometric ε-sequence, order-2 Richardson extrapolation, and the (1+A)^{-1}A check.
pub fn lap_boundary(v: &PotentialField, lambda: f64, side: BoundarySide, eps_list: &[f64], q: f64) -> Result<LapReport> {
    if !(lambda > 0.0) {
        return invalid("λ must be positive");
    }
    if eps_list.len() < 3 || eps_list.iter().any(|e| !(*e > 0.0)) {
        return invalid("need at least 3 positive ε values");
    }
    let ratio = eps_list[1] / eps_list[0];
    if !(ratio < 1.0) || eps_list.windows(2).any(|w| ((w[1] / w[0]) - ratio).abs() > 1e-9 * ratio) {
        return invalid("ε list must be a decreasing geometric sequence");
    }
    let alpha = alpha_q(v.dim(), q)?;
    let sgn = if side == BoundarySide::Upper { 1.0 } else { -1.0 };
    let mats: Vec<Mat<C64>> = eps_list
        .iter()
        .map(|e| {
            let z = SpectralParameter::new(C64::new(lambda, sgn * e))?;
            Ok(birman_schwinger_operator(v, &z)?.unitarize())
        })
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = mats.iter().map(|m| schatten_mat(m.as_ref(), alpha)).collect::<Result<_>>()?;
    let cauchy: Vec<f64> = mats.windows(2).map(|w| schatten_mat((&w[0] - &w[1]).as_ref(), alpha)).collect::<Result<_>>()?;
    let monotone = cauchy.windows(2).all(|c| c[1] < c[0]);
    let k = mats.len();
    let r1a = richardson(&mats[k - 3], &mats[k - 2], ratio, 1);
    let r1b = richardson(&mats[k - 2], &mats[k - 1], ratio, 1);
    let ext = richardson(&r1a, &r1b, ratio, 2);
    let extrapolated_norm = schatten_mat(ext.as_ref(), alpha)?;
    let extrapolation_change = schatten_mat((&ext - &mats[k - 1]).as_ref(), alpha)? / extrapolated_norm.max(f64::MIN_POSITIVE);
    let perturbed = perturbed_check(&mats[k - 1], alpha)?;
    Ok(LapReport {
        lambda,
        side,
        alpha,
        eps: eps_list.to_vec(),
        norms,
        cauchy,
        monotone,
        extrapolated_norm,
        extrapolation_change,
        perturbed,
        extrapolated: ext,
    })
}

/// ‖(1+A)^{-1}A‖_{S^α} ≤ 2‖A‖_{S^α} whenever ‖A‖_{S^α} ≤ 1/2.
pub fn perturbed_check(a: &Mat<C64>, alpha: f64) -> Result<PerturbedCheck> {
    let n = a.nrows();
    let one_plus = a + Mat::<C64>::identity(n, n);
    let sv = singular_values_mat(one_plus.as_ref())?;
    let cond = sv[0] / sv[n - 1];
    if !(cond < 1e12) {
        return Err(LabError::Singular(format!("1 + A has condition number {cond:e}: possible eigenvalue or resonance")));
    }
    let lu = one_plus.partial_piv_lu();
    let x = lu.solve(a);
    let a_norm = schatten_mat(a.as_ref(), alpha)?;
    let a_op = singular_values_mat(a.as_ref())?[0];
    let perturbed_norm = schatten_mat(x.as_ref(), alpha)?;
    let applicable = a_norm <= 0.5;
    let bound = 2.0 * a_norm;
    Ok(PerturbedCheck {
        a_norm,
        a_operator_norm: a_op,
        perturbed_norm,
        bound,
        applicable,
        holds: !applicable || perturbed_norm <= bound * (1.0 + 1e-12),
        condition: cond,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpReport {
    pub t: Vec<f64>,
    pub distances: Vec<f64>,
    pub monotone: bool,
    pub final_distance: f64,
    pub anti_hermitian_residual: f64,
}

/// W₁(R₀(1+it) − R₀(1−it))W₂ against 2πi·W₁T_SW₂ on the unit sphere, in Hilbert–Schmidt distance.
/// T_S carries the quadratic-surface measure dσ/2 of {|ξ|² = 1}; with the compact measure dσ the
/// limit is πi·T_S and that factor is used instead.
pub fn resolvent_jump_vs_extension(
    space: &Arc<WeightedSpace>,
    surface: &SurfaceGrid,
    w1: &[C64],
    w2: &[C64],
    t_list: &[f64],
) -> Result<JumpReport> {
    let n = space.dim;
    if !(n == 2 || n == 3) || surface.dim() != n {
        return invalid("jump check runs in N ∈ {2, 3} with a sphere of the same dimension");
    }
    let factor = match surface.spec.kind {
        SurfaceKind::SphereQuadratic => 2.0 * PI,
        SurfaceKind::SphereCompact => PI,
        _ => return invalid("jump check needs the unit sphere"),
    };
    let t_op = ts_operator(surface, space).sandwich(w1, w2)?.unitarize();
    let target = &t_op * faer::Scale(C64::new(0.0, factor));
    let tn = frobenius(target.as_ref());
    let mut distances = Vec::new();
    let mut anti = 0.0f64;
    for &t in t_list {
        let up = sandwich_resolvent_matrix(w1, w2, &SpectralParameter::new(C64::new(1.0, t))?, space)?;
        let lo = sandwich_resolvent_matrix(w1, w2, &SpectralParameter::new(C64::new(1.0, -t))?, space)?;
        let jump = &up - &lo;
        let d = if tn > 0.0 { frobenius((&jump - &target).as_ref()) / tn } else { frobenius(jump.as_ref()) };
        distances.push(d);
        let same = w1.iter().zip(w2).all(|(a, b)| a == b && a.im == 0.0);
        if same {
            let h = &jump * faer::Scale(C64::new(0.0, -1.0));
            let r = frobenius((&h - h.adjoint()).as_ref()) / frobenius(h.as_ref()).max(f64::MIN_POSITIVE);
            anti = anti.max(r);
        }
    }
    let monotone = distances.windows(2).all(|d| d[1] < d[0]);
    Ok(JumpReport { t: t_list.to_vec(), final_distance: *distances.last().unwrap_or(&0.0), distances, monotone, anti_hermitian_residual: anti })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_and_kernels() {
        let z = SpectralParameter::new(C64::new(-1.0, 0.0)).unwrap();
        assert!((z.sqrt_z() - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((resolvent_kernel(1, &z, 0.7).unwrap() - (-0.7f64).exp() / 2.0).norm() < 1e-15);
        assert!((resolvent_kernel(3, &z, 1.0).unwrap().re - (-1f64).exp() / (4.0 * PI)).abs() < 1e-16);
        assert!((resolvent_kernel(3, &z, 1.0).unwrap().re - 0.029_276).abs() < 1e-5);
        assert!(SpectralParameter::new(C64::new(2.0, 0.0)).is_err());
        let w = SpectralParameter::polar(2.0, 1.9 * PI).unwrap();
        assert!(w.sqrt_z().im > 0.0 && (w.sqrt_z() * w.sqrt_z() - w.z()).norm() < 1e-14);
    }

    #[test]
    fn two_dimensional_kernel_matches_three_regimes() {
        // z = −1: G = K₀(r)/(2π)
        let z = SpectralParameter::new(C64::new(-1.0, 0.0)).unwrap();
        let g = resolvent_kernel(2, &z, 1.0).unwrap();
        assert!((g.re - 0.421_024_438_240_708_3 / (2.0 * PI)).abs() < 1e-13 && g.im.abs() < 1e-14);
    }

    #[test]
    fn cell_averages_are_continuous_across_branches() {
        let z = SpectralParameter::polar(1.3, 0.4).unwrap();
        // 3D: series (|κa| < 0.5) vs closed form just above
        let k = z.sqrt_z().norm();
        let a = 0.5 / k;
        let m = 4.0 * PI * a.powi(3) / 3.0;
        let lo = kernel_cell_average(3, &z, m * (1.0 - 1e-9));
        let hi = kernel_cell_average(3, &z, m * (1.0 + 1e-9));
        assert!((lo - hi).norm() < 1e-8 * lo.norm());
        // 2D: small-argument form vs Bessel form
        let a2 = 1e-3 / k;
        let m2 = PI * a2 * a2;
        let lo = kernel_cell_average(2, &z, m2 * (1.0 - 1e-6));
        let hi = kernel_cell_average(2, &z, m2 * (1.0 + 1e-6));
        assert!((lo - hi).norm() < 1e-5 * lo.norm());
    }

    #[test]
    fn exponent_tables() {
        assert_eq!(sobolev_exponents(3, 2.0).unwrap().0, 4.0);
        assert!((sobolev_exponents(3, 2.0).unwrap().1 + 0.25).abs() < 1e-15);
        assert!(!sobolev_exponents(2, 1.2).unwrap().2);
        assert!(sobolev_exponents(3, 1.0).is_err());
        assert_eq!(alpha_q(3, 2.0).unwrap(), 4.0);
        assert_eq!(alpha_q(3, 1.5).unwrap(), 2.0);
    }
}
