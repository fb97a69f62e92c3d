//! Surfaces with their measures, the extension operator E_S, T_S = E_S E_S*,
//! Fourier transforms of surface measures and Knapp caps.

use crate::specmat::{WeightedOperator, WeightedSpace};
use crate::{invalid, LabError, Result, C64};
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceKind {
    /// unit sphere with surface measure dσ
    SphereCompact,
    /// ξ_N = |ξ'|², measure dξ' on the base
    Paraboloid,
    /// |ξ'| = |ξ_N|, measure (2|ξ|)^{-1} dσ
    Cone,
    /// ξ_N² − |ξ'|² = 1, measure (2|ξ|)^{-1} dσ
    TwoSheetedHyperboloid,
    /// unit sphere with measure (2|ξ|)^{-1} dσ = dσ/2
    SphereQuadratic,
}

impl SurfaceKind {
    pub fn is_compact(self) -> bool {
        matches!(self, SurfaceKind::SphereCompact | SurfaceKind::SphereQuadratic)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub ambient_dim: usize,
    pub truncation_radius: f64,
    pub resolution: usize,
}

impl SurfaceSpec {
    pub fn sphere(n: usize, resolution: usize) -> Self {
        Self { kind: SurfaceKind::SphereCompact, ambient_dim: n, truncation_radius: 0.0, resolution }
    }
}

#[derive(Clone, Debug)]
pub struct SurfaceGrid {
    pub spec: SurfaceSpec,
    pub space: Arc<WeightedSpace>,
    /// |∇R| at each node (quadratic kinds only)
    pub normal_gradient: Vec<f64>,
    /// radius of the ball removed around the cone vertex
    pub excised_radius: Option<f64>,
}

impl SurfaceGrid {
    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.ambient_dim
    }
}

/// Uniform cell-centred grid on [−L, L]^N.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) || !(half_width > 0.0) || n == 0 {
            return invalid(format!("bad spatial grid dim={dim} L={half_width} n={n}"));
        }
        Ok(Self { dim, half_width, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|i| -self.half_width + (i as f64 + 0.5) * h).collect()
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        self.points_where(|_| true)
    }

    pub fn points_where(&self, keep: impl Fn(&[f64; 3]) -> bool) -> Vec<[f64; 3]> {
        let ax = self.axis();
        let mut out = Vec::new();
        match self.dim {
            1 => ax.iter().map(|&x| [x, 0.0, 0.0]).filter(|p| keep(p)).for_each(|p| out.push(p)),
            2 => {
                for &x in &ax {
                    for &y in &ax {
                        let p = [x, y, 0.0];
                        if keep(&p) {
                            out.push(p);
                        }
                    }
                }
            }
            _ => {
                for &x in &ax {
                    for &y in &ax {
                        for &z in &ax {
                            let p = [x, y, z];
                            if keep(&p) {
                                out.push(p);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn space(&self) -> Arc<WeightedSpace> {
        self.space_where(|_| true)
    }

    /// Sub-grid of the cells whose centres satisfy `keep` (e.g. the support of a bump).
    pub fn space_where(&self, keep: impl Fn(&[f64; 3]) -> bool) -> Arc<WeightedSpace> {
        let pts = self.points_where(keep);
        let w = vec![self.cell_volume(); pts.len()];
        Arc::new(WeightedSpace { dim: self.dim, points: pts, weights: w })
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Unit-sphere rule: equispaced circle (N=2) or Gauss–Legendre(polar) × equispaced(azimuth) (N=3).
pub fn sphere_rule(n_dim: usize, resolution: usize) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    match n_dim {
        2 => {
            let w = 2.0 * PI / resolution as f64;
            let pts = (0..resolution)
                .map(|j| {
                    let t = 2.0 * PI * j as f64 / resolution as f64;
                    [t.sin(), t.cos(), 0.0]
                })
                .collect();
            Ok((pts, vec![w; resolution]))
        }
        3 => {
            let (ct, wt) = gauss_legendre(resolution);
            let nphi = 2 * resolution;
            let dphi = 2.0 * PI / nphi as f64;
            let mut pts = Vec::with_capacity(resolution * nphi);
            let mut ws = Vec::with_capacity(resolution * nphi);
            for (c, wc) in ct.iter().zip(&wt) {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for k in 0..nphi {
                    let p = (k as f64 + 0.5) * dphi;
                    pts.push([s * p.cos(), s * p.sin(), *c]);
                    ws.push(wc * dphi);
                }
            }
            Ok((pts, ws))
        }
        _ => Err(LabError::Invalid(format!("sphere rule for N={n_dim} not supported"))),
    }
}

pub fn build_surface(spec: &SurfaceSpec) -> Result<SurfaceGrid> {
    let n = spec.ambient_dim;
    if spec.resolution < 8 {
        return invalid(format!("resolution {} below 8", spec.resolution));
    }
    if !(2..=3).contains(&n) {
        return Err(LabError::Invalid(format!("{:?} in N={n} not supported", spec.kind)));
    }
    if !spec.kind.is_compact() && !(spec.truncation_radius > 0.0) {
        return invalid("non-compact surface needs a positive truncation radius");
    }
    let res = spec.resolution;
    let k = spec.truncation_radius;
    // base grid over |ξ'| ≤ K: midpoint on [−K,K] (N=2) or polar midpoint (N=3); (point, dξ')
    let base = || -> Vec<([f64; 2], f64)> {
        if n == 2 {
            let h = 2.0 * k / res as f64;
            (0..res).map(|i| ([-k + (i as f64 + 0.5) * h, 0.0], h)).collect()
        } else {
            let dr = k / res as f64;
            let nth = 2 * res;
            let dth = 2.0 * PI / nth as f64;
            let mut v = Vec::with_capacity(res * nth);
            for i in 0..res {
                let r = (i as f64 + 0.5) * dr;
                for j in 0..nth {
                    let t = (j as f64 + 0.5) * dth;
                    v.push(([r * t.cos(), r * t.sin()], r * dr * dth));
                }
            }
            v
        }
    };
    let lift = |b: [f64; 2], last: f64| -> [f64; 3] {
        if n == 2 {
            [b[0], last, 0.0]
        } else {
            [b[0], b[1], last]
        }
    };
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    let mut grad = Vec::new();
    let mut excised = None;
    match spec.kind {
        SurfaceKind::SphereCompact | SurfaceKind::SphereQuadratic => {
            let (p, w) = sphere_rule(n, res)?;
            let f = if spec.kind == SurfaceKind::SphereQuadratic { 0.5 } else { 1.0 };
            pts = p;
            ws = w.iter().map(|x| x * f).collect();
            if spec.kind == SurfaceKind::SphereQuadratic {
                grad = vec![2.0; pts.len()];
            }
        }
        SurfaceKind::Paraboloid => {
            for (b, dxi) in base() {
                let r2 = b[0] * b[0] + b[1] * b[1];
                pts.push(lift(b, r2));
                ws.push(dxi);
                grad.push((1.0 + 4.0 * r2).sqrt());
            }
        }
        SurfaceKind::Cone => {
            let cut = 0.05 * k;
            excised = Some(cut);
            for (b, dxi) in base() {
                let r = (b[0] * b[0] + b[1] * b[1]).sqrt();
                if r < cut {
                    continue;
                }
                for s in [1.0, -1.0] {
                    pts.push(lift(b, s * r));
                    // dσ = √2 dξ', |ξ| = √2 r
                    ws.push(dxi / (2.0 * r));
                    grad.push(2.0 * 2f64.sqrt() * r);
                }
            }
        }
        SurfaceKind::TwoSheetedHyperboloid => {
            for (b, dxi) in base() {
                let r2 = b[0] * b[0] + b[1] * b[1];
                let top = (1.0 + r2).sqrt();
                for s in [1.0, -1.0] {
                    pts.push(lift(b, s * top));
                    ws.push(dxi / (2.0 * top));
                    grad.push(2.0 * (1.0 + 2.0 * r2).sqrt());
                }
            }
        }
    }
    let space = Arc::new(WeightedSpace::new(n, pts, ws)?);
    Ok(SurfaceGrid { spec: spec.clone(), space, normal_gradient: grad, excised_radius: excised })
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// E_S with kernel (2π)^{-N/2} e^{iξ·x}; weights stay in the spaces.
pub fn extension_matrix(surface: &SurfaceGrid, grid: &Arc<WeightedSpace>) -> WeightedOperator {
    let n = surface.dim() as i32;
    let c = (2.0 * PI).powf(-(n as f64) / 2.0);
    let xi = &surface.space.points;
    let xs = &grid.points;
    let m = Mat::from_fn(xs.len(), xi.len(), |i, j| C64::from_polar(c, dot(&xs[i], &xi[j])));
    WeightedOperator { matrix: m, domain: surface.space.clone(), codomain: grid.clone() }
}

pub fn ts_operator(surface: &SurfaceGrid, grid: &Arc<WeightedSpace>) -> WeightedOperator {
    let e = extension_matrix(surface, grid);
    e.compose(&e.adjoint()).expect("E and E* share the surface space")
}

/// ∫_S e^{−ik·ω} dμ(ω) by the surface quadrature.
pub fn surface_measure_ft(surface: &SurfaceGrid, k: [f64; 3]) -> C64 {
    surface
        .space
        .points
        .iter()
        .zip(&surface.space.weights)
        .map(|(p, w)| C64::from_polar(*w, -dot(&k, p)))
        .sum()
}

/// L²-normalized indicator of the cap of angular radius δ around the pole e_N.
pub fn knapp_cap(surface: &SurfaceGrid, delta: f64) -> Result<Vec<C64>> {
    if !surface.spec.kind.is_compact() {
        return invalid("Knapp caps are defined on the sphere kinds only");
    }
    if !(delta > 0.0 && delta <= PI) {
        return invalid(format!("cap radius {delta} outside (0, π]"));
    }
    let n = surface.dim();
    let spacing = match n {
        2 => 2.0 * PI / surface.spec.resolution as f64,
        _ => PI / surface.spec.resolution as f64,
    };
    if delta < spacing {
        return Err(LabError::UnderResolved(format!("cap radius {delta} below node spacing {spacing:.3e}")));
    }
    let pole_axis = n - 1;
    let inside: Vec<bool> = surface
        .space
        .points
        .iter()
        .map(|p| p[pole_axis].clamp(-1.0, 1.0).acos() <= delta + 1e-12)
        .collect();
    let mass: f64 = inside.iter().zip(&surface.space.weights).filter(|(b, _)| **b).map(|(_, w)| w).sum();
    let v = 1.0 / mass.sqrt();
    Ok(inside.iter().map(|&b| C64::new(if b { v } else { 0.0 }, 0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_j0;

    #[test]
    fn total_measures() {
        let c = build_surface(&SurfaceSpec::sphere(2, 256)).unwrap();
        assert!((c.space.total_measure() - 2.0 * PI).abs() < 1e-12);
        let s = build_surface(&SurfaceSpec::sphere(3, 36)).unwrap();
        assert_eq!(s.len(), 2592);
        assert!((s.space.total_measure() - 4.0 * PI).abs() < 1e-8);
        let p = build_surface(&SurfaceSpec {
            kind: SurfaceKind::Paraboloid,
            ambient_dim: 2,
            truncation_radius: 3.0,
            resolution: 64,
        })
        .unwrap();
        assert!((p.space.total_measure() - 6.0).abs() < 1e-12);
        let q = build_surface(&SurfaceSpec { kind: SurfaceKind::SphereQuadratic, ..SurfaceSpec::sphere(2, 64) }).unwrap();
        assert!((q.space.total_measure() - PI).abs() < 1e-12);
    }

    #[test]
    fn nodes_lie_on_surfaces() {
        for kind in [SurfaceKind::Paraboloid, SurfaceKind::Cone, SurfaceKind::TwoSheetedHyperboloid] {
            for n in [2, 3] {
                let g = build_surface(&SurfaceSpec { kind, ambient_dim: n, truncation_radius: 2.0, resolution: 12 }).unwrap();
                for p in &g.space.points {
                    let last = p[n - 1];
                    let r2: f64 = (0..n - 1).map(|i| p[i] * p[i]).sum();
                    let res = match kind {
                        SurfaceKind::Paraboloid => last - r2,
                        SurfaceKind::Cone => last * last - r2,
                        _ => last * last - r2 - 1.0,
                    };
                    assert!(res.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn extension_of_constant() {
        let c = build_surface(&SurfaceSpec::sphere(2, 256)).unwrap();
        let pts = Arc::new(WeightedSpace::new(2, vec![[0.0; 3], [0.6, 0.8, 0.0]], vec![1.0, 1.0]).unwrap());
        let e = extension_matrix(&c, &pts);
        let v = e.apply(&vec![C64::new(1.0, 0.0); c.len()]);
        assert!((v[0] - 1.0).norm() < 1e-13);
        assert!((v[1].re - 0.765_197_686_557_966_6).abs() < 1e-12 && v[1].im.abs() < 1e-12);
        assert!((v[1].re - bessel_j0(1.0)).abs() < 1e-12);
    }

    #[test]
    fn measure_transforms() {
        let c = build_surface(&SurfaceSpec::sphere(2, 256)).unwrap();
        assert!((surface_measure_ft(&c, [0.0; 3]) - 2.0 * PI).norm() < 1e-12);
        let v = surface_measure_ft(&c, [3.0, 4.0, 0.0]);
        assert!((v.re - 2.0 * PI * bessel_j0(5.0)).abs() < 1e-12 && v.im.abs() < 1e-12);
        let s = build_surface(&SurfaceSpec::sphere(3, 24)).unwrap();
        assert!(surface_measure_ft(&s, [0.0, 0.0, PI]).norm() < 1e-10);
    }

    #[test]
    fn caps_are_normalized() {
        let c = build_surface(&SurfaceSpec::sphere(2, 2048)).unwrap();
        for d in [0.1, 0.2, 0.4] {
            let f = knapp_cap(&c, d).unwrap();
            assert!((c.space.norm(&f) - 1.0).abs() < 1e-12);
        }
        let full = knapp_cap(&c, PI).unwrap();
        assert!((full[5].re - (2.0 * PI).powf(-0.5)).abs() < 1e-12);
        assert!(knapp_cap(&c, 1e-4).is_err());
    }
}
