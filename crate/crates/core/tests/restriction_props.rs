use proptest::prelude::*;
use schatten_lab::restriction::{gamma_h, sandwich_ts_singular_values};
use schatten_lab::surface::{build_surface, ts_operator, SpatialGrid, SurfaceSpec};
use schatten_lab::C64;

#[test]
fn ts_kernel_depends_on_the_difference_only() {
    let surf = build_surface(&SurfaceSpec::sphere(2, 64)).unwrap();
    let n = 9;
    let space = SpatialGrid::new(2, 3.0, n).unwrap().space();
    let t = ts_operator(&surf, &space);
    let idx = |i: usize, j: usize| i * n + j;
    let scale = t.matrix[(0, 0)].norm();
    let mut worst = 0.0f64;
    for (a, b) in [((0, 0), (2, 5)), ((1, 3), (4, 0)), ((3, 3), (8, 7))] {
        for s in 0..n - a.0.max(b.0) {
            for r in 0..n - a.1.max(b.1) {
                let k0 = t.matrix[(idx(a.0, a.1), idx(b.0, b.1))];
                let k1 = t.matrix[(idx(a.0 + s, a.1 + r), idx(b.0 + s, b.1 + r))];
                worst = worst.max((k0 - k1).norm() / scale);
            }
        }
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn gamma_h_is_positive_semidefinite() {
    for (n, res) in [(2, 96), (3, 12)] {
        let surf = build_surface(&SurfaceSpec::sphere(n, res)).unwrap();
        for h in [0.4, 0.1, 0.025] {
            let g = gamma_h(&surf, h).unwrap();
            let ev = g.hermitian_eigenvalues().unwrap();
            let top = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let low = ev.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(low >= -1e-10 * top, "N = {n}, h = {h}: {low} vs {top}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sandwich_is_invariant_under_reciprocal_scaling(c in 0.05f64..20.0, phase in 0.0f64..6.28, seed in 0u64..1000) {
        let surf = build_surface(&SurfaceSpec::sphere(2, 48)).unwrap();
        let space = SpatialGrid::new(2, 3.0, 10).unwrap().space();
        let bump = |p: &[f64; 3], s: f64| C64::new((-(p[0] - 0.3).powi(2) - p[1].powi(2) / s).exp(), 0.1 * p[0] * s);
        let s = 1.0 + (seed % 7) as f64 * 0.3;
        let w1: Vec<C64> = space.points.iter().map(|p| bump(p, s)).collect();
        let w2: Vec<C64> = space.points.iter().map(|p| bump(&[p[1], p[0], 0.0], 2.0 / s)).collect();
        let k = C64::from_polar(c, phase);
        let w1s: Vec<C64> = w1.iter().map(|w| w * k).collect();
        let w2s: Vec<C64> = w2.iter().map(|w| w / k.conj()).collect();
        let a = sandwich_ts_singular_values(&w1, &surf, &space, &w2).unwrap();
        let b = sandwich_ts_singular_values(&w1s, &surf, &space, &w2s).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * a[0]);
        }
    }
}

#[test]
fn knapp_extension_norms_follow_the_cap_scaling() {
    use schatten_lab::lab::slope_fit;
    use schatten_lab::restriction::{knapp_exponent, knapp_extension_norms};
    let circle = build_surface(&SurfaceSpec::sphere(2, 512)).unwrap();
    let deltas = [0.4, 0.2, 0.1, 0.05];
    for pprime in [3.0, 4.0, 5.0] {
        let norms = knapp_extension_norms(&circle, pprime, &deltas, 48).unwrap();
        let fit = slope_fit(&deltas, &norms).unwrap();
        let expected = knapp_exponent(2, pprime);
        assert!(((fit.slope - expected) / expected).abs() < 0.15, "p' = {pprime}: {} vs {expected}", fit.slope);
    }
}
