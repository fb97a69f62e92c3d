//! Periodic propagators, mixed space-time norms and orthonormal Strichartz experiments.

use crate::lab::{rng_for, slope_fit, SlopeFit};
use crate::specmat::{orthonormalize, schatten_from_values, singular_values_mat, WeightedSpace};
use crate::{invalid, LabError, Result, C64};
use faer::{Mat, Side};
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub dim: usize,
    pub length: f64,
    pub n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, length: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return invalid("torus dimension must be 1, 2 or 3");
        }
        if n < 2 || n % 2 != 0 {
            return invalid(format!("points per axis must be even, got {n}"));
        }
        if !(length > 0.0) {
            return invalid("period length must be positive");
        }
        Ok(Self { dim, length, n })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.n).map(|i| -self.length / 2.0 + i as f64 * self.spacing()).collect()
    }

    /// Frequencies of one axis in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n as i64;
        (0..n).map(|j| 2.0 * PI / self.length * if j < n / 2 { j } else { j - n } as f64).collect()
    }

    pub(crate) fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        let ax = self.axis();
        (0..self.len())
            .map(|f| {
                let idx = self.multi_index(f);
                let mut p = [0.0; 3];
                for a in 0..self.dim {
                    p[a] = ax[idx[a]];
                }
                p
            })
            .collect()
    }

    /// |k|² per flat Fourier index.
    pub fn k_squared(&self) -> Vec<f64> {
        let k = self.frequencies();
        (0..self.len())
            .map(|f| {
                let idx = self.multi_index(f);
                (0..self.dim).map(|a| k[idx[a]] * k[idx[a]]).sum()
            })
            .collect()
    }

    pub fn space(&self) -> Arc<WeightedSpace> {
        let pts = self.points();
        let w = vec![self.cell_volume(); pts.len()];
        Arc::new(WeightedSpace { dim: self.dim, points: pts, weights: w })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub m: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return invalid("time grid needs m ≥ 2");
        }
        if !(end > start) {
            return invalid("time interval must have positive length");
        }
        Ok(Self { start, end, m })
    }

    pub fn symmetric(t: f64, m: usize) -> Result<Self> {
        Self::new(-t, t, m)
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.m - 1) as f64
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.start + i as f64 * self.step()).collect()
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.step();
        (0..self.m).map(|i| if i == 0 || i == self.m - 1 { dt / 2.0 } else { dt }).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symbol {
    Schrodinger,
    HalfWave,
    PseudoRelativistic,
}

impl Symbol {
    pub fn phase(self, k2: f64, t: f64) -> C64 {
        let th = match self {
            Symbol::Schrodinger => -t * k2,
            Symbol::HalfWave => t * k2.sqrt(),
            Symbol::PseudoRelativistic => t * (1.0 + k2).sqrt(),
        };
        C64::from_polar(1.0, th)
    }
}

/// Cached FFT plans and symbol data for repeated propagation on one torus.
pub struct Propagator {
    grid: TorusGrid,
    symbol: Symbol,
    k2: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Propagator {
    pub fn new(grid: TorusGrid, symbol: Symbol) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        Self { k2: grid.k_squared(), grid, symbol, fwd, inv }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub(crate) fn transform(&self, data: &mut [C64], inverse: bool) {
        let n = self.grid.n;
        let d = self.grid.dim;
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut line = vec![C64::new(0.0, 0.0); n];
        for a in 0..d {
            let stride = n.pow((d - 1 - a) as u32);
            let total = data.len();
            for base in 0..total {
                if (base / stride) % n != 0 {
                    continue;
                }
                for i in 0..n {
                    line[i] = data[base + i * stride];
                }
                plan.process(&mut line);
                for i in 0..n {
                    data[base + i * stride] = line[i];
                }
            }
        }
        if inverse {
            let s = 1.0 / total_len(n, d) as f64;
            data.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn to_fourier(&self, f: &[C64]) -> Vec<C64> {
        let mut v = f.to_vec();
        self.transform(&mut v, false);
        v
    }

    /// Propagates Fourier coefficients to time t and returns samples.
    pub fn from_fourier_at(&self, fh: &[C64], t: f64) -> Vec<C64> {
        let mut v: Vec<C64> = fh.iter().zip(&self.k2).map(|(c, k2)| c * self.symbol.phase(*k2, t)).collect();
        self.transform(&mut v, true);
        v
    }

    pub fn apply(&self, f: &[C64], t: f64) -> Vec<C64> {
        self.from_fourier_at(&self.to_fourier(f), t)
    }
}

fn total_len(n: usize, d: usize) -> usize {
    n.pow(d as u32)
}

pub fn propagate(grid: &TorusGrid, f: &[C64], t: f64, symbol: Symbol) -> Result<Vec<C64>> {
    if f.len() != grid.len() {
        return Err(LabError::Dimension(format!("{} samples on a torus of {} points", f.len(), grid.len())));
    }
    Ok(Propagator::new(*grid, symbol).apply(f, t))
}

/// Unitary matrix of the propagator in orthonormal point coordinates (columns are propagated unit vectors).
pub fn propagator_matrix(grid: &TorusGrid, t: f64, symbol: Symbol) -> Mat<C64> {
    let p = Propagator::new(*grid, symbol);
    let n = grid.len();
    let mut m = Mat::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        let col = p.apply(&e, t);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = C64::new(0.0, 0.0);
    }
    m
}

/// Trapezoid-in-time of ‖F(t,·)‖^p_{L^q_x}, then the 1/p power. `abs_values[t][x]` holds |F|.
pub fn mixed_norm(abs_values: &[Vec<f64>], times: &TimeGrid, space: &WeightedSpace, p: f64, q: f64) -> Result<f64> {
    if abs_values.len() != times.m {
        return Err(LabError::Dimension("time samples vs time grid".into()));
    }
    if !(p >= 1.0) || !(q >= 1.0) {
        return invalid("mixed norm exponents must be ≥ 1");
    }
    let inner: Vec<f64> = abs_values
        .iter()
        .map(|row| {
            if row.len() != space.len() {
                Err(LabError::Dimension("space samples vs grid".into()))
            } else {
                Ok(space.lp_norm(row, q))
            }
        })
        .collect::<Result<_>>()?;
    Ok(time_norm(&inner, times, p))
}

fn time_norm(inner: &[f64], times: &TimeGrid, p: f64) -> f64 {
    if p.is_infinite() {
        return inner.iter().cloned().fold(0.0, f64::max);
    }
    let w = times.trapezoid_weights();
    inner.iter().zip(&w).map(|(v, w)| v.powf(p) * w).sum::<f64>().powf(1.0 / p)
}

/// Time exponent p with 2/p + d/q = d.
pub fn strichartz_time_exponent(d: usize, q: f64) -> Result<f64> {
    let df = d as f64;
    let upper = if d == 1 { f64::INFINITY } else { 1.0 + 2.0 / (df - 1.0) };
    if !(q >= 1.0 && q < upper) {
        return Err(LabError::Inadmissible(format!("need 1 ≤ q < 1 + 2/(d−1) = {upper} for d = {d}, got q = {q}")));
    }
    Ok(if q == 1.0 { f64::INFINITY } else { 2.0 * q / (df * (q - 1.0)) })
}

pub fn check_strichartz_pair(d: usize, p: f64, q: f64) -> Result<()> {
    let pe = strichartz_time_exponent(d, q)?;
    let ok = if pe.is_infinite() { p.is_infinite() } else { (p - pe).abs() <= 1e-12 * pe };
    if ok {
        Ok(())
    } else {
        Err(LabError::Inadmissible(format!("need 2/p + d/q = d: with d = {d}, q = {q} that is p = {pe}, got {p}")))
    }
}

fn split_factors(m: usize, slots: usize) -> Vec<usize> {
    let mut primes = Vec::new();
    let mut r = m;
    let mut f = 2;
    while r > 1 {
        while r % f == 0 {
            primes.push(f);
            r /= f;
        }
        f += 1;
    }
    primes.sort_unstable_by(|a, b| b.cmp(a));
    let mut out = vec![1usize; slots];
    for p in primes {
        let i = (0..slots).min_by_key(|i| out[*i]).unwrap();
        out[i] *= p;
    }
    out
}

/// Phase-space lattice of Gaussians e^{−|x−x₀|²/2} e^{ik₀·x}, spacing `a` in x and k, M points.
pub fn coherent_family(grid: &TorusGrid, m: usize, a: f64) -> Mat<C64> {
    let d = grid.dim;
    let f = split_factors(m, 2 * d);
    let pts = grid.points();
    let mut centers = Vec::with_capacity(m);
    for flat in 0..m {
        let mut r = flat;
        let mut c = [0.0; 6];
        for s in 0..2 * d {
            let i = r % f[s];
            r /= f[s];
            c[s] = a * (i as f64 - (f[s] as f64 - 1.0) / 2.0);
        }
        centers.push(c);
    }
    Mat::from_fn(pts.len(), m, |i, j| {
        let c = &centers[j];
        let x = &pts[i];
        let mut r2 = 0.0;
        let mut ph = 0.0;
        for a_ in 0..d {
            r2 += (x[a_] - c[a_]).powi(2);
            ph += c[d + a_] * x[a_];
        }
        C64::from_polar((-r2 / 2.0).exp(), ph)
    })
}

/// Largest |x₀| + 2|k₀|T + 3σ(T) of the family, to compare with L/2.
pub fn coherent_reach(grid: &TorusGrid, m: usize, a: f64, t_max: f64) -> f64 {
    let d = grid.dim;
    let f = split_factors(m, 2 * d);
    let x0 = (0..d).map(|s| a * (f[s] as f64 - 1.0) / 2.0).fold(0.0, f64::max);
    let k0 = (0..d).map(|s| a * (f[d + s] as f64 - 1.0) / 2.0).fold(0.0, f64::max);
    let sigma = (0.5 * (1.0 + 4.0 * t_max * t_max)).sqrt();
    x0 + 2.0 * k0 * t_max + 3.0 * sigma
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrichartzSetup {
    pub grid: TorusGrid,
    pub times: TimeGrid,
    pub lattice: f64,
}

impl StrichartzSetup {
    pub fn default_for(d: usize) -> Result<Self> {
        let lattice = (2.0 * PI).sqrt();
        match d {
            1 => Ok(Self { grid: TorusGrid::new(1, 200.0, 1280)?, times: TimeGrid::symmetric(3.0, 1200)?, lattice }),
            2 => Ok(Self { grid: TorusGrid::new(2, 48.0, 96)?, times: TimeGrid::symmetric(1.0, 160)?, lattice }),
            _ => invalid("Strichartz experiments run in d = 1 or 2"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StrichartzRow {
    pub m: usize,
    pub lhs_uniform: f64,
    pub rhs_uniform: f64,
    pub ratio_uniform: f64,
    pub lhs_random: f64,
    pub rhs_random: f64,
    pub ratio_random: f64,
    pub reach: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrichartzReport {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub rows: Vec<StrichartzRow>,
    pub ratio_spread: f64,
    pub fit_uniform: SlopeFit,
    pub gain_bound: f64,
    pub wrap_free: bool,
}

/// ‖Σ_j ν_j |e^{itΔ}f_j|²‖_{L^p_tL^q_x} for orthonormal columns f_j.
pub fn strichartz_lhs(setup: &StrichartzSetup, system: &Mat<C64>, nu: &[f64], p: f64, q: f64) -> Result<f64> {
    let prop = Propagator::new(setup.grid, Symbol::Schrodinger);
    let space = setup.grid.space();
    let hats: Vec<Vec<C64>> = (0..system.ncols())
        .map(|j| prop.to_fourier(&(0..system.nrows()).map(|i| system[(i, j)]).collect::<Vec<_>>()))
        .collect();
    let ts = setup.times.samples();
    let inner: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let mut rho = vec![0.0; space.len()];
            for (j, fh) in hats.iter().enumerate() {
                let u = prop.from_fourier_at(fh, t);
                for (r, v) in rho.iter_mut().zip(&u) {
                    *r += nu[j] * v.norm_sqr();
                }
            }
            let a: Vec<f64> = rho.iter().map(|v| v.abs()).collect();
            space.lp_norm(&a, q)
        })
        .collect();
    Ok(time_norm(&inner, &setup.times, p))
}

pub fn strichartz_experiment(d: usize, p: f64, q: f64, m_max: usize, seed: u64) -> Result<StrichartzReport> {
    strichartz_experiment_with(&StrichartzSetup::default_for(d)?, p, q, m_max, seed)
}

/// LHS/RHS for M = 1, 2, 4, …, M_max with ν ≡ 1 and with random signed ν.
pub fn strichartz_experiment_with(setup: &StrichartzSetup, p: f64, q: f64, m_max: usize, seed: u64) -> Result<StrichartzReport> {
    let d = setup.grid.dim;
    check_strichartz_pair(d, p, q)?;
    if m_max < 4 {
        return invalid("M_max must be at least 4 so that the slope fit has three points");
    }
    let space = setup.grid.space();
    let beta = 2.0 * q / (q + 1.0);
    let mut rows = Vec::new();
    let mut m = 1;
    let t_max = setup.times.start.abs().max(setup.times.end.abs());
    while m <= m_max {
        let fam = coherent_family(&setup.grid, m, setup.lattice);
        let sys = orthonormalize(&fam, &space)?;
        let ones = vec![1.0; m];
        let mut rng = rng_for(seed, m as u64);
        let nu: Vec<f64> = (0..m).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let lhs_u = strichartz_lhs(setup, &sys, &ones, p, q)?;
        let lhs_r = strichartz_lhs(setup, &sys, &nu, p, q)?;
        let rhs_u = schatten_from_values(&ones, beta)?;
        let rhs_r = schatten_from_values(&nu.iter().map(|v| v.abs()).collect::<Vec<_>>(), beta)?;
        rows.push(StrichartzRow {
            m,
            lhs_uniform: lhs_u,
            rhs_uniform: rhs_u,
            ratio_uniform: lhs_u / rhs_u,
            lhs_random: lhs_r,
            rhs_random: rhs_r,
            ratio_random: lhs_r / rhs_r,
            reach: coherent_reach(&setup.grid, m, setup.lattice, t_max),
        });
        m *= 2;
    }
    let all: Vec<f64> = rows.iter().flat_map(|r| [r.ratio_uniform, r.ratio_random]).collect();
    let spread = all.iter().cloned().fold(0.0, f64::max) / all.iter().cloned().fold(f64::INFINITY, f64::min);
    let fit = slope_fit(&rows.iter().map(|r| r.m as f64).collect::<Vec<_>>(), &rows.iter().map(|r| r.lhs_uniform).collect::<Vec<_>>())?;
    let wrap_free = rows.iter().all(|r| r.reach < setup.grid.length / 2.0);
    Ok(StrichartzReport { d, p, q, rows, ratio_spread: spread, fit_uniform: fit, gain_bound: (q + 1.0) / (2.0 * q), wrap_free })
}

/// Space-time weights sampled as `w[t][x]` on a time grid × torus.
pub type SpaceTimeField = Vec<Vec<C64>>;

#[derive(Clone, Debug, Serialize)]
pub struct MixedSandwich {
    pub norm: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// ‖W₁T_SW₂‖_{S^q} for the paraboloid in propagator form, T_S = (2π)^{-1}·[e^{i(t−s)Δ}],
/// against ‖W₁‖_{L^p_tL^q_x}‖W₂‖_{L^p_tL^q_x}.
pub fn mixed_sandwich(w1: &SpaceTimeField, w2: &SpaceTimeField, grid: &TorusGrid, times: &TimeGrid, p: f64, q: f64) -> Result<MixedSandwich> {
    let d = grid.dim as f64;
    if !((2.0 / p + d / q - 1.0).abs() < 1e-12 && q > d + 1.0) {
        return Err(LabError::Inadmissible(format!("need 2/p + d/q = 1 and q > d+1, got p = {p}, q = {q}, d = {d}")));
    }
    if w1.len() != times.m || w2.len() != times.m || w1.iter().chain(w2).any(|r| r.len() != grid.len()) {
        return Err(LabError::Dimension("weights must be sampled on the time grid × torus".into()));
    }
    let space = grid.space();
    let rhs = {
        let a1: Vec<Vec<f64>> = w1.iter().map(|r| r.iter().map(|v| v.norm()).collect()).collect();
        let a2: Vec<Vec<f64>> = w2.iter().map(|r| r.iter().map(|v| v.norm()).collect()).collect();
        mixed_norm(&a1, times, &space, p, q)? * mixed_norm(&a2, times, &space, p, q)?
    };
    if rhs == 0.0 {
        return Ok(MixedSandwich { norm: 0.0, rhs: 0.0, ratio: 0.0 });
    }
    let n = grid.len();
    let ts = times.samples();
    let tw = times.trapezoid_weights();
    let k2 = grid.k_squared();
    let pts = grid.points();
    let kf = grid.frequencies();
    // plane-wave basis: (x_i, k) ↦ e^{ik·x_i}/√(n^d)
    let waves = Mat::from_fn(n, n, |i, j| {
        let idx = grid.multi_index(j);
        let ph: f64 = (0..grid.dim).map(|a| kf[idx[a]] * pts[i][a]).sum();
        C64::from_polar(1.0 / (n as f64).sqrt(), ph)
    });
    let factor = |w: &SpaceTimeField, conj: bool| {
        Mat::from_fn(times.m * n, n, |r, k| {
            let (ti, i) = (r / n, r % n);
            let wv = if conj { w[ti][i].conj() } else { w[ti][i] };
            wv * waves[(i, k)] * Symbol::Schrodinger.phase(k2[k], ts[ti]) * tw[ti].sqrt()
        })
    };
    let x = factor(w1, false);
    let y = factor(w2, true);
    let r1 = x.qr().thin_R().to_owned();
    let r2 = y.qr().thin_R().to_owned();
    let s = (&r1 * r2.adjoint()) * faer::Scale(C64::new(1.0 / (2.0 * PI), 0.0));
    let norm = schatten_from_values(&singular_values_mat(s.as_ref())?, q)?;
    Ok(MixedSandwich { norm, rhs, ratio: norm / rhs })
}

#[derive(Clone, Debug, Serialize)]
pub struct InhomogeneousReport {
    pub lhs: f64,
    pub initial_term: f64,
    pub forcing_term: f64,
    pub ratio: f64,
}

fn abs_hermitian(m: &Mat<C64>) -> Result<Mat<C64>> {
    let e = m.self_adjoint_eigen(Side::Lower).map_err(|e| LabError::Linalg(format!("{e:?}")))?;
    let u = e.U();
    let s: Vec<f64> = e.S().column_vector().iter().map(|v| v.re.abs()).collect();
    let us = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * s[j]);
    Ok(&us * u.adjoint())
}

fn schatten_hermitian(m: &Mat<C64>, alpha: f64) -> Result<f64> {
    let ev = m.self_adjoint_eigenvalues(Side::Lower).map_err(|e| LabError::Linalg(format!("{e:?}")))?;
    schatten_from_values(&ev.iter().map(|v| v.abs()).collect::<Vec<_>>(), alpha)
}

/// Solves i∂_tγ = [−Δ,γ] + R(t) from t = 0 in both directions along `times` (which must contain 0),
/// in the interaction picture with trapezoid quadrature. Operators are n×n matrices in orthonormal
/// point coordinates; ρ(x_i) = γ_ii / h^d.
pub fn inhomogeneous_check(
    grid: &TorusGrid,
    times: &TimeGrid,
    gamma0: &Mat<C64>,
    r: &(dyn Fn(f64) -> Mat<C64> + Sync),
    p: f64,
    q: f64,
) -> Result<InhomogeneousReport> {
    check_strichartz_pair(grid.dim, p, q)?;
    let n = grid.len();
    if gamma0.nrows() != n || gamma0.ncols() != n {
        return Err(LabError::Dimension("γ₀ must be an n^d × n^d matrix".into()));
    }
    let ts = times.samples();
    let i0 = ts
        .iter()
        .position(|t| t.abs() < 1e-12 * times.step())
        .ok_or_else(|| LabError::Invalid("time grid must contain t = 0".into()))?;
    let us: Vec<Mat<C64>> = ts.par_iter().map(|&t| propagator_matrix(grid, t, Symbol::Schrodinger)).collect();
    // interaction-picture integrands e^{−isΔ}R(s)e^{isΔ} and e^{−isΔ}|R(s)|e^{isΔ}
    let pulled: Vec<(Mat<C64>, Mat<C64>)> = ts
        .par_iter()
        .zip(us.par_iter())
        .map(|(&s, u)| {
            let rs = r(s);
            let a = abs_hermitian(&rs)?;
            Ok((u.adjoint() * &rs * u, u.adjoint() * &a * u))
        })
        .collect::<Result<_>>()?;
    let dt = times.step();
    let mut cum = vec![Mat::<C64>::zeros(n, n); ts.len()];
    for k in i0 + 1..ts.len() {
        cum[k] = &cum[k - 1] + (&pulled[k - 1].0 + &pulled[k].0) * faer::Scale(C64::new(dt / 2.0, 0.0));
    }
    for k in (0..i0).rev() {
        cum[k] = &cum[k + 1] - (&pulled[k + 1].0 + &pulled[k].0) * faer::Scale(C64::new(dt / 2.0, 0.0));
    }
    let h = grid.cell_volume();
    let mi = C64::new(0.0, -1.0);
    let rows: Vec<Vec<f64>> = (0..ts.len())
        .into_par_iter()
        .map(|k| {
            let gi = gamma0 + &cum[k] * faer::Scale(mi);
            let g = &us[k] * gi * us[k].adjoint();
            (0..n).map(|i| (g[(i, i)] / h).norm()).collect()
        })
        .collect();
    let lhs = mixed_norm(&rows, times, &grid.space(), p, q)?;
    let beta = 2.0 * q / (q + 1.0);
    let tw = times.trapezoid_weights();
    let mut total = Mat::<C64>::zeros(n, n);
    for (k, w) in tw.iter().enumerate() {
        total += &pulled[k].1 * faer::Scale(C64::new(*w, 0.0));
    }
    let initial_term = schatten_hermitian(gamma0, beta)?;
    let forcing_term = schatten_hermitian(&total, beta)?;
    let den = initial_term + forcing_term;
    Ok(InhomogeneousReport { lhs, initial_term, forcing_term, ratio: if den > 0.0 { lhs / den } else { 0.0 } })
}
