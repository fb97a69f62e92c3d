//! Bessel functions needed by the kernels: real `J_n` and complex `K_0`, `K_1`.

use crate::C64;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `J_n(x)` for integer order from the periodic integral
/// (1/2π)∫₀^{2π} cos(nτ − x sin τ) dτ; the trapezoid rule is spectrally accurate here.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let m = (1.5 * x.abs() + n.unsigned_abs() as f64 + 40.0).ceil() as usize;
    let m = m.max(64);
    let mut s = 0.0;
    for k in 0..m {
        let t = 2.0 * PI * k as f64 / m as f64;
        s += (n as f64 * t - x * t.sin()).cos();
    }
    s / m as f64
}

pub fn bessel_j0(x: f64) -> f64 {
    bessel_j(0, x)
}

pub fn bessel_j1(x: f64) -> f64 {
    bessel_j(1, x)
}

/// Returns `(K_0(w), K_1(w))` for `Re w ≥ 0`, `w ≠ 0`.
pub fn bessel_k01(w: C64) -> (C64, C64) {
    assert!(w.re >= -1e-14, "bessel_k01 needs Re w >= 0, got {w}");
    if w.norm() <= 2.0 {
        k01_series(w)
    } else {
        k01_cf2(w)
    }
}

fn k01_series(z: C64) -> (C64, C64) {
    let q = z * z / 4.0;
    let lg = (z / 2.0).ln();
    // I0, I1 and the two ψ-weighted sums share the same term recursion
    let mut i0 = C64::new(0.0, 0.0);
    let mut i1 = C64::new(0.0, 0.0);
    let mut s0 = C64::new(0.0, 0.0);
    let mut s1 = C64::new(0.0, 0.0);
    let mut t0 = C64::new(1.0, 0.0); // q^k / (k!)^2
    let mut t1 = C64::new(1.0, 0.0); // q^k / (k!(k+1)!)
    let mut hk = 0.0;
    for k in 0..200 {
        let kf = k as f64;
        if k > 0 {
            t0 *= q / (kf * kf);
            t1 *= q / (kf * (kf + 1.0));
            hk += 1.0 / kf;
        }
        i0 += t0;
        i1 += t1;
        s0 += t0 * hk;
        let psi_sum = (hk - EULER_GAMMA) + (hk + 1.0 / (kf + 1.0) - EULER_GAMMA);
        s1 += t1 * psi_sum;
        if t0.norm() < 1e-18 * i0.norm() && t1.norm() < 1e-18 * i1.norm() && k > 2 {
            break;
        }
    }
    let i1 = i1 * z / 2.0;
    let k0 = -(lg + EULER_GAMMA) * i0 + s0;
    let k1 = z.inv() + lg * i1 - z / 4.0 * s1;
    (k0, k1)
}

/// Steed's evaluation of Temme's continued fraction for ν = 0.
fn k01_cf2(x: C64) -> (C64, C64) {
    let one = C64::new(1.0, 0.0);
    let mut b = (one + x) * 2.0;
    let mut d = b.inv();
    let mut h = d;
    let mut delh = d;
    let mut q1 = C64::new(0.0, 0.0);
    let mut q2 = one;
    let a1 = C64::new(0.25, 0.0);
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 2..100_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = (b + a * d).inv();
        delh = (b * d - one) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-17 * s.norm() {
            break;
        }
    }
    h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    // scipy.special.kv reference values
    const K_REF: [((f64, f64), (f64, f64), (f64, f64)); 12] = [
        ((1.00000000000000006e-01, 0.0), (2.42706902470201680e+00, 0.0), (9.85384478087060600e+00, 0.0)),
        ((5.0e-01, 5.0e-01), (5.52972310925574750e-01, -5.99641947856594637e-01), (5.78453363822099109e-01, -1.08285821581821429e+00)),
        ((1.5e+00, -1.0e+00), (5.92849797229507286e-02, 1.88928949682702491e-01), (4.73772550512908674e-02, 2.37587082769226743e-01)),
        ((0.0, 2.0e+00), (-8.01696231883694321e-01, -3.51686813478300442e-01), (-9.05917209595989537e-01, -1.68126150312430916e-01)),
        ((1.00000000000000002e-02, 3.0e+00), (-5.86649737312397113e-01, 4.03417883787298481e-01), (-5.28386887688258700e-01, 5.04166813224318444e-01)),
        ((2.5e+00, 1.00000000000000006e-01), (6.18887819968684874e-02, -7.36869410906655989e-03), (7.32796891945055734e-02, -9.16047633617786752e-03)),
        ((4.0e+00, 4.0e+00), (-3.11192127809182184e-03, 8.97961155468042851e-03), (-2.77506945819915637e-03, 9.72154278115617589e-03)),
        ((2.99999999999999989e-01, 8.0e+00), (-2.56100317139958011e-01, -2.04373779997290866e-01), (-2.69859753063630969e-01, -1.89346684370565677e-01)),
        ((1.0e+01, 0.0), (1.77800623161676502e-05, 0.0), (1.86487734538255855e-05, 0.0)),
        ((5.00000000000000028e-02, 2.5e+01), (1.90276131976419655e-01, -1.43648939064231040e-01), (1.87449984698104671e-01, -1.47487177983655626e-01)),
        ((1.00000000000000002e-03, 1.00000000000000002e-03), (6.67711359705914820e+00, -7.85394324840797076e-01), (4.99996018745208801e+02, -5.00003195858609558e+02)),
        ((6.0e+00, 0.0), (1.24399432801312339e-03, 0.0), (1.34391971773550911e-03, 0.0)),
    ];

    // scipy.special.jv reference values
    const J_REF: [(i32, f64, f64); 9] = [
        (0, 1.0, 7.65197686557966605e-01),
        (0, 5.0, -1.77596771314338348e-01),
        (1, 1.0, 4.40050585744933553e-01),
        (1, 7.5, 1.35248427579705482e-01),
        (3, 2.0, 1.28943249474402083e-01),
        (0, 40.0, 7.36689058423729056e-03),
        (1, 123.4, -6.85099988565437100e-03),
        (5, 0.3, 6.30443263377106854e-07),
        (2, 60.0, 9.30250835476674198e-02),
    ];

    #[test]
    fn k0_k1_match_reference() {
        for &((zr, zi), (k0r, k0i), (k1r, k1i)) in K_REF.iter() {
            let (k0, k1) = bessel_k01(C64::new(zr, zi));
            let e0 = (k0 - C64::new(k0r, k0i)).norm() / C64::new(k0r, k0i).norm();
            let e1 = (k1 - C64::new(k1r, k1i)).norm() / C64::new(k1r, k1i).norm();
            assert!(e0 < 1e-12 && e1 < 1e-12, "z=({zr},{zi}) e0={e0:e} e1={e1:e}");
        }
    }

    #[test]
    fn series_and_fraction_agree_on_the_seam() {
        for k in 0..16 {
            let th = -PI / 2.0 + PI * k as f64 / 15.0;
            let z = C64::from_polar(2.0, th);
            let (a0, a1) = k01_series(z);
            let (b0, b1) = k01_cf2(z);
            assert!((a0 - b0).norm() < 1e-12 * b0.norm().max(1e-3), "{z}");
            assert!((a1 - b1).norm() < 1e-12 * b1.norm().max(1e-3), "{z}");
        }
    }

    #[test]
    fn j_matches_reference() {
        for &(n, x, v) in J_REF.iter() {
            let got = bessel_j(n, x);
            assert!((got - v).abs() < 1e-14 + 1e-12 * v.abs(), "J_{n}({x}) = {got} vs {v}");
        }
    }
}
