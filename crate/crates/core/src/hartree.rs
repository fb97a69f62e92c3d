//! Density-matrix Hartree dynamics i∂ₜγ = [−Δ + w∗ρ_γ, γ] on a one-dimensional torus.

use crate::evolution::{check_strichartz_pair, TorusGrid};
use crate::specmat::{schatten_mat, DensityMatrix, WeightedOperator};
use crate::surface::gauss_legendre;
use crate::{invalid, LabError, Result, C64};
use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

/// Real pair interaction sampled at the torus displacements m·Δx (wrapped into [−L/2, L/2)).
#[derive(Clone, Debug)]
pub struct Interaction {
    pub grid: TorusGrid,
    pub q: f64,
    pub w: Vec<f64>,
    pub lq_prime_norm: f64,
}

impl Interaction {
    pub fn from_fn(grid: TorusGrid, q: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if grid.dim != 1 {
            return invalid("Hartree runs are one-dimensional");
        }
        if !(q >= 1.0) {
            return invalid("q must be at least 1");
        }
        let h = grid.spacing();
        let w: Vec<f64> = (0..grid.n)
            .map(|m| {
                let d = m as f64 * h;
                f(if d >= grid.length / 2.0 { d - grid.length } else { d })
            })
            .collect();
        if w.iter().any(|v| !v.is_finite()) {
            return invalid("interaction samples must be finite");
        }
        let qp = if q == 1.0 { f64::INFINITY } else { q / (q - 1.0) };
        let lq_prime_norm = if qp.is_infinite() {
            w.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        } else {
            (w.iter().map(|v| v.abs().powf(qp)).sum::<f64>() * h).powf(1.0 / qp)
        };
        Ok(Self { grid, q, w, lq_prime_norm })
    }

    pub fn zero(grid: TorusGrid, q: f64) -> Result<Self> {
        Self::from_fn(grid, q, |_| 0.0)
    }

    /// (w∗ρ)(x_i) = Σ_j w(x_i − x_j) ρ_j Δx.
    pub fn mean_field(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let h = self.grid.spacing();
        (0..n).map(|i| (0..n).map(|j| self.w[(i + n - j) % n] * rho[j]).sum::<f64>() * h).collect()
    }
}

#[derive(Clone, Debug)]
pub struct HartreeState {
    pub gamma: DensityMatrix,
    pub t: f64,
}

/// Kernel diagonal; Σρ·Δx = tr γ.
pub fn rho(gamma: &DensityMatrix) -> Vec<f64> {
    (0..gamma.op.nrows()).map(|i| gamma.op.matrix[(i, i)].re).collect()
}

fn schatten_exponent(q: f64) -> f64 {
    2.0 * q / (q + 1.0)
}

/// Fourier-basis workspace: X̂ = F·G·F* with G the unitarized γ and F the unitary DFT.
struct Workspace {
    n: usize,
    h: f64,
    k2: Vec<f64>,
    f: Mat<C64>,
    fa: Mat<C64>,
}

impl Workspace {
    fn new(grid: &TorusGrid) -> Self {
        let n = grid.n;
        let xs = grid.axis();
        let ks = grid.frequencies();
        let s = 1.0 / (n as f64).sqrt();
        let f = Mat::from_fn(n, n, |a, j| C64::from_polar(s, -ks[a] * xs[j]));
        let fa = f.adjoint().to_owned();
        Self { n, h: grid.spacing(), k2: ks.iter().map(|k| k * k).collect(), f, fa }
    }

    fn to_fourier(&self, g: &Mat<C64>) -> Mat<C64> {
        &self.f * g * &self.fa
    }

    fn to_position(&self, x: &Mat<C64>) -> Mat<C64> {
        &self.fa * x * &self.f
    }

    /// Free flow in the Fourier basis: X̂_ab ↦ e^{−it(k_a² − k_b²)} X̂_ab (sign s = −1 undoes it).
    fn free(&self, x: &Mat<C64>, t: f64) -> Mat<C64> {
        Mat::from_fn(self.n, self.n, |a, b| x[(a, b)] * C64::from_polar(1.0, -t * (self.k2[a] - self.k2[b])))
    }

    /// Interaction-picture right-hand side −i·e^{−itΔ}[w∗ρ, G]e^{itΔ} in the Fourier basis.
    fn rhs(&self, w: &Interaction, x: &Mat<C64>, t: f64) -> Mat<C64> {
        let g = self.to_position(&self.free(x, t));
        let rho: Vec<f64> = (0..self.n).map(|i| g[(i, i)].re / self.h).collect();
        let v = w.mean_field(&rho);
        let minus_i = C64::new(0.0, -1.0);
        let c = Mat::from_fn(self.n, self.n, |i, j| g[(i, j)] * ((v[i] - v[j]) * minus_i));
        self.free(&self.to_fourier(&c), -t)
    }
}

fn gauss_collocation(stages: usize) -> Result<(Vec<f64>, Vec<f64>, Mat<f64>)> {
    let (x, wt) = gauss_legendre(stages);
    let c: Vec<f64> = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
    let b: Vec<f64> = wt.iter().map(|v| 0.5 * v).collect();
    // Σ_j a_ij c_j^{k−1} = c_i^k / k
    let vand = Mat::from_fn(stages, stages, |k, j| c[j].powi(k as i32));
    let lu = vand.partial_piv_lu();
    let rhs = Mat::from_fn(stages, stages, |k, i| c[i].powi(k as i32 + 1) / (k as f64 + 1.0));
    let at = lu.solve(&rhs);
    let a = Mat::from_fn(stages, stages, |i, j| at[(j, i)]);
    if (0..stages).any(|i| (0..stages).any(|j| !a[(i, j)].is_finite())) {
        return Err(LabError::Linalg("collocation coefficients".into()));
    }
    Ok((c, b, a))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StepControl {
    pub tol: f64,
    pub max_iter: usize,
    pub stages: usize,
    /// largest window regardless of the contraction estimate
    pub max_tau: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { tol: 1e-13, max_iter: 60, stages: 4, max_tau: 0.01 }
    }
}

struct Integrator<'a> {
    ws: Workspace,
    w: &'a Interaction,
    c: Vec<f64>,
    b: Vec<f64>,
    a: Mat<f64>,
    ctl: StepControl,
    alpha: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowStats {
    pub tau: f64,
    pub iterations: usize,
    /// successive Picard differences in S^{2q/(q+1)}
    pub differences: Vec<f64>,
}

impl<'a> Integrator<'a> {
    fn new(w: &'a Interaction, ctl: StepControl) -> Result<Self> {
        if ctl.stages == 0 || !(ctl.tol > 0.0) || ctl.max_iter == 0 || !(ctl.max_tau > 0.0) {
            return invalid("step control needs stages ≥ 1, tol > 0, max_iter ≥ 1, max_tau > 0");
        }
        let (c, b, a) = gauss_collocation(ctl.stages)?;
        Ok(Self { ws: Workspace::new(&w.grid), w, c, b, a, ctl, alpha: schatten_exponent(w.q) })
    }

    /// One collocation window by Picard iteration on the stage values.
    fn window(&self, x0: &Mat<C64>, t0: f64, tau: f64) -> Result<(Mat<C64>, WindowStats)> {
        let s = self.c.len();
        let mut k: Vec<Mat<C64>> = (0..s).map(|i| self.ws.rhs(self.w, x0, t0 + self.c[i] * tau)).collect();
        let mut prev_end: Option<Mat<C64>> = None;
        let mut differences = Vec::new();
        for it in 0..self.ctl.max_iter {
            let stages: Vec<Mat<C64>> = (0..s)
                .map(|i| {
                    let mut y = x0.clone();
                    for j in 0..s {
                        y += faer::Scale(C64::new(tau * self.a[(i, j)], 0.0)) * &k[j];
                    }
                    y
                })
                .collect();
            k = (0..s).map(|i| self.ws.rhs(self.w, &stages[i], t0 + self.c[i] * tau)).collect();
            let mut end = x0.clone();
            for j in 0..s {
                end += faer::Scale(C64::new(tau * self.b[j], 0.0)) * &k[j];
            }
            if let Some(p) = &prev_end {
                let d = schatten_mat((&end - p).as_ref(), self.alpha)?;
                let scale = schatten_mat(end.as_ref(), self.alpha)?.max(f64::MIN_POSITIVE);
                differences.push(d);
                if d <= self.ctl.tol * scale {
                    return Ok((end, WindowStats { tau, iterations: it + 1, differences }));
                }
                if differences.len() >= 3 {
                    let l = differences.len();
                    if differences[l - 1] > differences[l - 2] && differences[l - 2] > differences[l - 3] {
                        break;
                    }
                }
            }
            prev_end = Some(end);
        }
        Err(LabError::NoConvergence(format!("Picard iteration on a window of length {tau}")))
    }

    /// A window of length `tau`, split into 2^k equal pieces (k ≤ 6) until each piece contracts.
    fn advance(&self, x0: &Mat<C64>, t0: f64, tau: f64) -> Result<(Mat<C64>, Vec<WindowStats>)> {
        for halvings in 0..=6u32 {
            let pieces = 1usize << halvings;
            let sub = tau / pieces as f64;
            let mut x = x0.clone();
            let mut stats = Vec::new();
            let mut ok = true;
            for p in 0..pieces {
                match self.window(&x, t0 + p as f64 * sub, sub) {
                    Ok((y, st)) => {
                        x = y;
                        stats.push(st);
                    }
                    Err(LabError::NoConvergence(_)) => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if ok {
                return Ok((x, stats));
            }
        }
        Err(LabError::NoConvergence("contraction window too large".into()))
    }
}

fn check_state(state: &HartreeState, w: &Interaction) -> Result<()> {
    let space = state.gamma.space();
    if space.len() != w.grid.n {
        return Err(LabError::Dimension("γ and the interaction live on different grids".into()));
    }
    let h = w.grid.spacing();
    if space.weights.iter().any(|x| (x - h).abs() > 1e-12 * h) {
        return Err(LabError::Dimension("γ must act on the torus grid with uniform weights Δx".into()));
    }
    Ok(())
}

fn unitarized(gamma: &DensityMatrix, h: f64) -> Mat<C64> {
    Mat::from_fn(gamma.op.nrows(), gamma.op.ncols(), |i, j| gamma.op.matrix[(i, j)] * h)
}

fn from_unitarized(g: Mat<C64>, like: &DensityMatrix, h: f64) -> DensityMatrix {
    let n = g.nrows();
    let m = Mat::from_fn(n, n, |i, j| g[(i, j)] / h);
    let op = WeightedOperator { matrix: m, domain: like.space().clone(), codomain: like.space().clone() };
    DensityMatrix { op, hermitian: like.hermitian }
}

/// Advance by `tau` with the default stage count and window cap.
pub fn duhamel_step(state: &HartreeState, w: &Interaction, tau: f64, tol: f64, max_iter: usize) -> Result<HartreeState> {
    duhamel_step_with(state, w, tau, StepControl { tol, max_iter, ..StepControl::default() }).map(|(s, _)| s)
}

pub fn duhamel_step_with(state: &HartreeState, w: &Interaction, tau: f64, ctl: StepControl) -> Result<(HartreeState, Vec<WindowStats>)> {
    if !(tau > 0.0) {
        return invalid("tau must be positive");
    }
    check_state(state, w)?;
    let integ = Integrator::new(w, ctl)?;
    let h = w.grid.spacing();
    let x0 = integ.ws.free(&integ.ws.to_fourier(&unitarized(&state.gamma, h)), -state.t);
    let (x1, stats) = integ.advance(&x0, state.t, tau)?;
    let g = integ.ws.to_position(&integ.ws.free(&x1, state.t + tau));
    Ok((HartreeState { gamma: from_unitarized(g, &state.gamma, h), t: state.t + tau }, stats))
}

/// Window length (1/4)(‖w‖_{q'}R²)^{−p'} with R = ‖γ₀‖_{S^{2q/(q+1)}}, capped at `max_tau`.
pub fn contraction_tau(w: &Interaction, r: f64, p: f64, max_tau: f64) -> f64 {
    let pp = if p.is_infinite() { 1.0 } else { p / (p - 1.0) };
    let s = w.lq_prime_norm * r * r;
    if s == 0.0 {
        max_tau
    } else {
        (0.25 * s.powf(-pp)).min(max_tau)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HartreeSample {
    pub t: f64,
    pub trace: f64,
    pub schatten: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HartreeReport {
    pub p: f64,
    pub q: f64,
    pub schatten_exponent: f64,
    pub tau: f64,
    pub samples: Vec<HartreeSample>,
    pub trace_drift: f64,
    pub schatten_drift: f64,
    /// ‖ρ_γ‖_{L^p_t L^q_x} on [0, T] by the trapezoid rule over the window ends
    pub strichartz_norm: f64,
    pub windows: Vec<WindowStats>,
    /// largest ratio of successive Picard differences
    pub contraction_factor: f64,
}

pub struct HartreeTrajectory {
    pub states: Vec<HartreeState>,
    pub report: HartreeReport,
}

fn sample(state: &HartreeState, alpha: f64, h: f64, psd: bool) -> Result<HartreeSample> {
    let g = unitarized(&state.gamma, h);
    let tr: f64 = (0..g.nrows()).map(|i| g[(i, i)].re).sum();
    let herm = crate::specmat::frobenius((&g - g.adjoint()).as_ref()) / crate::specmat::frobenius(g.as_ref()).max(f64::MIN_POSITIVE);
    let min_eigenvalue = if psd {
        let hp = crate::specmat::hermitian_part(&g);
        let ev = hp.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|e| LabError::Linalg(format!("{e:?}")))?;
        Some(ev[0])
    } else {
        None
    };
    Ok(HartreeSample { t: state.t, trace: tr, schatten: schatten_mat(g.as_ref(), alpha)?, hermiticity: herm, min_eigenvalue })
}

/// Chains windows to time T, recording every window end. `tau = None` uses `contraction_tau`.
pub fn evolve(
    gamma0: &DensityMatrix,
    w: &Interaction,
    t_final: f64,
    tau: Option<f64>,
    monitors: (f64, f64),
    ctl: StepControl,
) -> Result<HartreeTrajectory> {
    let (p, q) = monitors;
    check_strichartz_pair(1, p, q)?;
    if !(t_final >= 0.0) {
        return invalid("T must be non-negative");
    }
    let state0 = HartreeState { gamma: gamma0.clone(), t: 0.0 };
    check_state(&state0, w)?;
    let integ = Integrator::new(w, ctl)?;
    let h = w.grid.spacing();
    let alpha = integ.alpha;
    let g0 = unitarized(gamma0, h);
    let r = schatten_mat(g0.as_ref(), alpha)?;
    let tau = match tau {
        Some(t) if t > 0.0 => t,
        Some(_) => return invalid("tau must be positive"),
        None => contraction_tau(w, r, p, ctl.max_tau),
    };
    let psd = gamma0.hermitian && {
        let ev = crate::specmat::hermitian_part(&g0)
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| LabError::Linalg(format!("{e:?}")))?;
        ev[0] >= -1e-12 * ev[ev.len() - 1].abs()
    };
    let mut states = vec![state0.clone()];
    let mut samples = vec![sample(&state0, alpha, h, psd)?];
    let mut windows = Vec::new();
    let mut x = integ.ws.to_fourier(&g0);
    let mut t = 0.0;
    let steps = if t_final == 0.0 { 0 } else { (t_final / tau).ceil() as usize };
    for s in 0..steps {
        let dt = if s + 1 == steps { t_final - t } else { tau };
        let (y, st) = integ.advance(&x, t, dt)?;
        x = y;
        t = if s + 1 == steps { t_final } else { t + dt };
        windows.extend(st);
        let g = integ.ws.to_position(&integ.ws.free(&x, t));
        let state = HartreeState { gamma: from_unitarized(g, gamma0, h), t };
        samples.push(sample(&state, alpha, h, psd)?);
        states.push(state);
    }
    let tr0 = samples[0].trace;
    let s0 = samples[0].schatten;
    let trace_drift = samples.iter().map(|x| (x.trace - tr0).abs()).fold(0.0, f64::max);
    let schatten_drift = samples.iter().map(|x| (x.schatten - s0).abs()).fold(0.0, f64::max);
    let space = gamma0.space();
    let inner: Vec<f64> = states
        .iter()
        .map(|st| space.lp_norm(&rho(&st.gamma).iter().map(|v| v.abs()).collect::<Vec<_>>(), q))
        .collect();
    let mut acc = 0.0;
    for i in 1..states.len() {
        let dt = states[i].t - states[i - 1].t;
        acc += 0.5 * dt * (inner[i].powf(p) + inner[i - 1].powf(p));
    }
    let contraction_factor = windows
        .iter()
        .flat_map(|w| w.differences.windows(2).filter(|d| d[0] > 1e-12).map(|d| d[1] / d[0]).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    Ok(HartreeTrajectory {
        report: HartreeReport {
            p,
            q,
            schatten_exponent: alpha,
            tau,
            samples,
            trace_drift,
            schatten_drift,
            strichartz_norm: acc.powf(1.0 / p),
            windows,
            contraction_factor,
        },
        states,
    })
}

/// γ₀ = Σ ν_j |u_j⟩⟨u_j| on the torus grid.
pub fn density_from_orbitals(grid: &TorusGrid, orbitals: &[Vec<C64>], nu: &[f64]) -> Result<DensityMatrix> {
    if orbitals.len() != nu.len() || orbitals.iter().any(|u| u.len() != grid.n) {
        return Err(LabError::Dimension("orbitals vs occupations vs grid".into()));
    }
    let fs = Mat::from_fn(grid.n, orbitals.len(), |i, j| orbitals[j][i]);
    let nu_c: Vec<C64> = nu.iter().map(|v| C64::new(*v, 0.0)).collect();
    DensityMatrix::from_system(grid.space(), &nu_c, &fs)
}

/// Translation-invariant γ₀ with kernel Σ_k m(k) e^{ik(x−y)}/L.
pub fn translation_invariant(grid: &TorusGrid, m: impl Fn(f64) -> f64) -> Result<DensityMatrix> {
    let xs = grid.axis();
    let ks = grid.frequencies();
    let l = grid.length;
    let kernel = Mat::from_fn(grid.n, grid.n, |i, j| {
        ks.iter().map(|k| C64::from_polar(m(*k) / l, k * (xs[i] - xs[j]))).sum::<C64>()
    });
    let space = grid.space();
    DensityMatrix::new(WeightedOperator::new(kernel, space.clone(), space)?, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TorusGrid {
        TorusGrid::new(1, 20.0, 64).unwrap()
    }

    fn gaussian_orbital(g: &TorusGrid, x0: f64, k0: f64) -> Vec<C64> {
        let h = g.spacing();
        let u: Vec<C64> = g.axis().iter().map(|x| C64::from_polar((-(x - x0).powi(2)).exp(), k0 * x)).collect();
        let nrm = (u.iter().map(|v| v.norm_sqr()).sum::<f64>() * h).sqrt();
        u.iter().map(|v| v / nrm).collect()
    }

    #[test]
    fn collocation_is_exact_on_polynomials() {
        let (c, b, a) = gauss_collocation(3).unwrap();
        for k in 0..6 {
            let s: f64 = (0..3).map(|j| b[j] * c[j].powi(k)).sum();
            assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
        }
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| a[(i, j)] * c[j]).sum();
            assert!((s - c[i] * c[i] / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn density_normalization() {
        let g = grid();
        let u = gaussian_orbital(&g, 1.0, 0.5);
        let gamma = density_from_orbitals(&g, &[u.clone()], &[0.7]).unwrap();
        let r = rho(&gamma);
        for (a, b) in r.iter().zip(&u) {
            assert!((a - 0.7 * b.norm_sqr()).abs() < 1e-14);
        }
        let total: f64 = r.iter().sum::<f64>() * g.spacing();
        assert!((total - gamma.trace().re).abs() < 1e-12);
        let ti = translation_invariant(&g, |k| (-k * k).exp()).unwrap();
        let r = rho(&ti);
        assert!(r.iter().all(|v| (v - r[0]).abs() < 1e-12));
    }

    #[test]
    fn free_evolution_without_interaction() {
        let g = grid();
        let u = gaussian_orbital(&g, 0.0, 2.0);
        let gamma = density_from_orbitals(&g, &[u.clone()], &[1.0]).unwrap();
        let w = Interaction::zero(g, 2.0).unwrap();
        let st = duhamel_step(&HartreeState { gamma, t: 0.0 }, &w, 0.3, 1e-13, 20).unwrap();
        let prop = crate::evolution::Propagator::new(g, crate::evolution::Symbol::Schrodinger);
        let ut = prop.apply(&u, 0.3);
        for i in 0..g.n {
            for j in 0..g.n {
                assert!((st.gamma.op.matrix[(i, j)] - ut[i] * ut[j].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn translation_invariant_state_is_stationary() {
        let g = grid();
        let gamma = translation_invariant(&g, |k| 1.0 / (1.0 + k * k)).unwrap();
        let w = Interaction::from_fn(g, 2.0, |x| 3.0 * (-x * x).exp()).unwrap();
        let st = duhamel_step(&HartreeState { gamma: gamma.clone(), t: 0.0 }, &w, 0.05, 1e-13, 30).unwrap();
        let d = crate::specmat::frobenius((&st.gamma.op.matrix - &gamma.op.matrix).as_ref());
        assert!(d < 1e-11 * crate::specmat::frobenius(gamma.op.matrix.as_ref()));
    }
}
