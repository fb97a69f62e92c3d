use schatten_lab::{Mat, C64};
use proptest::prelude::*;
use schatten_lab::specmat::*;
use std::sync::Arc;

fn space(weights: Vec<f64>) -> Arc<WeightedSpace> {
    let n = weights.len();
    Arc::new(WeightedSpace::new(1, (0..n).map(|i| [i as f64, 0.0, 0.0]).collect(), weights).unwrap())
}

fn entries(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)), len)
}

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..2.0, len)
}

fn operator(k: &[C64], rows: usize, wd: Vec<f64>, wc: Vec<f64>) -> WeightedOperator {
    let m = Mat::from_fn(rows, wd.len(), |i, j| k[i * wd.len() + j]);
    WeightedOperator::new(m, space(wd), space(wc)).unwrap()
}

const ALPHAS: [f64; 6] = [1.0, 1.5, 2.0, 3.0, 6.0, f64::INFINITY];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splitting_a_node_keeps_the_spectrum(k in entries(25), wd in weights(5), wc in weights(5), split in 0usize..5) {
        let a = operator(&k, 5, wd.clone(), wc.clone());
        // duplicate column `split` and halve its weight: same operator, finer quadrature
        let mut wd2 = wd.clone();
        wd2[split] *= 0.5;
        wd2.push(wd2[split]);
        let m2 = Mat::from_fn(5, 6, |i, j| a.matrix[(i, if j == 5 { split } else { j })]);
        let b = WeightedOperator::new(m2, space(wd2), space(wc)).unwrap();
        let sa = singular_values(&a).unwrap().values;
        let sb = singular_values(&b).unwrap().values;
        for (x, y) in sa.iter().zip(&sb) {
            prop_assert!((x - y).abs() <= 1e-12 * sa[0]);
        }
        prop_assert!(sb[5..].iter().all(|s| *s <= 1e-12 * sa[0]));
    }

    #[test]
    fn schatten_norms_decrease_in_alpha(k in entries(24), wd in weights(4), wc in weights(6)) {
        let a = operator(&k, 6, wd, wc);
        let norms: Vec<f64> = ALPHAS.iter().map(|al| schatten_norm(&a, *al).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        prop_assert!((norms[5] - singular_values(&a).unwrap().largest()).abs() <= 1e-14 * norms[5]);
    }

    #[test]
    fn triangle_inequality(k1 in entries(16), k2 in entries(16), wd in weights(4), wc in weights(4)) {
        let a = operator(&k1, 4, wd.clone(), wc.clone());
        let b = operator(&k2, 4, wd, wc);
        let sum = a.sub(&b.scale(C64::new(-1.0, 0.0))).unwrap();
        for al in ALPHAS {
            let lhs = schatten_norm(&sum, al).unwrap();
            let rhs = schatten_norm(&a, al).unwrap() + schatten_norm(&b, al).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12), "alpha {}: {} > {}", al, lhs, rhs);
        }
    }

    #[test]
    fn adjoint_pairing(k in entries(15), wd in weights(3), wc in weights(5), f in entries(3), g in entries(5)) {
        let a = operator(&k, 5, wd, wc);
        let lhs = a.codomain.inner(&g, &a.apply(&f));
        let rhs = a.domain.inner(&a.adjoint().apply(&g), &f);
        prop_assert!((lhs - rhs).norm() <= 1e-13 * (1.0 + lhs.norm()));
    }

    #[test]
    fn density_matches_orbital_sum(k in entries(20), wd in weights(4), wc in weights(5), fs in entries(8), nu in prop::collection::vec(-1.0f64..1.0, 2)) {
        let a = operator(&k, 5, wd.clone(), wc);
        let f = Mat::from_fn(4, 2, |i, j| fs[i * 2 + j]);
        let nu_c: Vec<C64> = nu.iter().map(|x| C64::new(*x, 0.0)).collect();
        let gamma = DensityMatrix::from_system(a.domain.clone(), &nu_c, &f).unwrap();
        let rho = density_of(&a, &gamma).unwrap();
        let mut direct = vec![0.0; 5];
        for j in 0..2 {
            let col: Vec<C64> = (0..4).map(|i| f[(i, j)]).collect();
            for (d, v) in direct.iter_mut().zip(a.apply(&col)) {
                *d += nu[j] * v.norm_sqr();
            }
        }
        let scale = direct.iter().fold(1.0f64, |m, d| m.max(d.abs()));
        for (r, d) in rho.iter().zip(&direct) {
            prop_assert!((r - d).norm() <= 1e-13 * scale);
        }
    }
}
