#![allow(dead_code)]

use rustfft::FftPlanner;
use schatten_lab::C64;

/// Strang split-step for i∂ₜu = −u'' + (w∗|u|²)u on a periodic grid of n points and period l.
/// `w_disp[m]` is w at displacement m·h (wrapped).
pub fn split_step_nls(u0: &[C64], l: f64, w_disp: &[f64], t: f64, steps: usize) -> Vec<C64> {
    let n = u0.len();
    let h = l / n as f64;
    let dt = t / steps as f64;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let kin: Vec<C64> = (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            let k = 2.0 * std::f64::consts::PI * m / l;
            C64::from_polar(1.0, -k * k * dt)
        })
        .collect();
    let potential = |u: &[C64]| -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|j| w_disp[(i + n - j) % n] * u[j].norm_sqr()).sum::<f64>() * h).collect()
    };
    let mut u = u0.to_vec();
    for _ in 0..steps {
        let v = potential(&u);
        for (a, vi) in u.iter_mut().zip(&v) {
            *a *= C64::from_polar(1.0, -vi * dt / 2.0);
        }
        fwd.process(&mut u);
        for (a, k) in u.iter_mut().zip(&kin) {
            *a *= k / n as f64;
        }
        inv.process(&mut u);
        let v = potential(&u);
        for (a, vi) in u.iter_mut().zip(&v) {
            *a *= C64::from_polar(1.0, -vi * dt / 2.0);
        }
    }
    u
}

/// Normalized e^{−(x−x₀)²/s²} e^{ik₀x} on the given axis.
pub fn wave_packet(xs: &[f64], x0: f64, s: f64, k0: f64) -> Vec<C64> {
    let h = xs[1] - xs[0];
    let u: Vec<C64> = xs.iter().map(|x| C64::from_polar((-((x - x0) / s).powi(2)).exp(), k0 * x)).collect();
    let nrm = (u.iter().map(|v| v.norm_sqr()).sum::<f64>() * h).sqrt();
    u.into_iter().map(|v| v / nrm).collect()
}
