//! Browser bindings for three small experiments. Each call returns a flat `Float64Array`
//! so the page needs no glue beyond the generated module.

use schatten_lab::resolvent::{sandwich_resolvent_matrix, PotentialField, SpectralParameter};
use schatten_lab::scatter::{smatrix_1d, square_well_transmission};
use schatten_lab::specmat::{frobenius, schatten_from_values, singular_values_mat};
use schatten_lab::surface::SpatialGrid;
use schatten_lab::{Mat, C64};
use wasm_bindgen::prelude::*;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Square well of depth `v0` on [0, a] at energy λ.
/// Returns [|t| closed form, |t| transfer matrix, |r|, |det S| − 1, unitarity residual].
#[wasm_bindgen]
pub fn square_well(v0: f64, a: f64, lambda: f64, cells: usize) -> Result<Vec<f64>, JsError> {
    if !(a > 0.0 && lambda > 0.0 && cells >= 1 && cells <= 20_000) {
        return Err(JsError::new("need a > 0, λ > 0 and 1 ≤ cells ≤ 20000"));
    }
    let exact = square_well_transmission(v0, a, lambda);
    let space = SpatialGrid::new(1, a / 2.0, cells).map_err(fail)?.space();
    let v = PotentialField::new(space, vec![C64::new(-v0, 0.0); cells]).map_err(fail)?;
    let s = smatrix_1d(&v, lambda).map_err(fail)?;
    Ok(vec![exact.norm(), s.t.norm(), s.r.norm(), s.determinant().norm() - 1.0, s.unitarity_residual()])
}

/// Schatten norms of a real n×n matrix given row-major, for each α in `alphas` (use `Infinity` for
/// the operator norm). Returns the norms followed by the singular values.
#[wasm_bindgen]
pub fn schatten_norms(entries: Vec<f64>, n: usize, alphas: Vec<f64>) -> Result<Vec<f64>, JsError> {
    if n == 0 || n > 64 || entries.len() != n * n {
        return Err(JsError::new("expected n×n entries with 1 ≤ n ≤ 64"));
    }
    let m = Mat::from_fn(n, n, |i, j| C64::new(entries[i * n + j], 0.0));
    let sv = singular_values_mat(m.as_ref()).map_err(fail)?;
    let mut out = alphas.iter().map(|a| schatten_from_values(&sv, *a)).collect::<Result<Vec<_>, _>>().map_err(fail)?;
    out.extend(sv);
    Ok(out)
}

/// Hilbert–Schmidt norm of W₁(−d²/dx² − z)^{-1}W₂ on [−L, L] for Gaussian weights of the given
/// width, against the uniform bound ½|z|^{-1/2}‖W₁‖₂‖W₂‖₂. Returns [norm, bound].
#[wasm_bindgen]
pub fn resolvent_hs(modulus: f64, arg: f64, width: f64, half_width: f64, cells: usize) -> Result<Vec<f64>, JsError> {
    if !(width > 0.0 && half_width > 0.0 && (8..=1500).contains(&cells)) {
        return Err(JsError::new("need width > 0, L > 0 and 8 ≤ cells ≤ 1500"));
    }
    let z = SpectralParameter::polar(modulus, arg).map_err(fail)?;
    let space = SpatialGrid::new(1, half_width, cells).map_err(fail)?.space();
    let w1: Vec<C64> = space.points.iter().map(|p| C64::new((-(p[0] + 0.4).powi(2) / (2.0 * width * width)).exp(), 0.0)).collect();
    let w2: Vec<C64> = space.points.iter().map(|p| C64::new((-(p[0] - 0.5).powi(2) / (2.0 * width * width)).exp(), 0.0)).collect();
    let k = sandwich_resolvent_matrix(&w1, &w2, &z, &space).map_err(fail)?;
    let bound = 0.5 / modulus.sqrt() * space.norm(&w1) * space.norm(&w2);
    Ok(vec![frobenius(k.as_ref()), bound])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_is_consistent() {
        let r = square_well(3.0, 1.3, 2.2, 64).unwrap();
        assert!((r[0] - r[1]).abs() < 1e-12);
        assert!((r[1] * r[1] + r[2] * r[2] - 1.0).abs() < 1e-12);
        assert!(r[3].abs() < 1e-12);
    }

    #[test]
    fn diagonal_norms() {
        let r = schatten_norms(vec![3.0, 0.0, 0.0, -4.0], 2, vec![1.0, 2.0, f64::INFINITY]).unwrap();
        assert!((r[0] - 7.0).abs() < 1e-12 && (r[1] - 5.0).abs() < 1e-12 && (r[2] - 4.0).abs() < 1e-12);
        assert_eq!(r.len(), 5);
    }

    #[test]
    fn resolvent_below_bound() {
        let r = resolvent_hs(1.0, 3.0, 0.7, 6.0, 400).unwrap();
        assert!(r[0] > 0.0 && r[0] < r[1]);
    }
}
