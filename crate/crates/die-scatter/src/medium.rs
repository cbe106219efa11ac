//! Background medium, scatterer geometry, and the collocation grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Homogeneous isotropic background.
///
/// `k_b` is derived from `omega`, `eps_b`, `mu_b` at construction, so
/// `k_b^2 = omega^2 eps_b mu_b` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background {
    pub eps_b: Complex64,
    pub mu_b: Complex64,
    pub omega: f64,
    pub k_b: Complex64,
    pub lambda_b: f64,
}

impl Background {
    pub fn new(eps_b: Complex64, mu_b: Complex64, omega: f64) -> Result<Self> {
        if omega <= 0.0 {
            return Err(Error::InvalidParameter("omega must be positive".into()));
        }
        if eps_b == Complex64::new(0.0, 0.0) || mu_b == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidParameter(
                "background eps and mu must be nonzero".into(),
            ));
        }
        // outgoing-wave root: Re k_b >= 0, and Im k_b >= 0 for lossy media
        let mut k_b = (eps_b * mu_b).sqrt() * omega;
        if k_b.re < 0.0 || (k_b.re == 0.0 && k_b.im < 0.0) {
            k_b = -k_b;
        }
        if k_b.re <= 0.0 {
            return Err(Error::InvalidParameter(
                "background wavenumber has no positive real part".into(),
            ));
        }
        let lambda_b = 2.0 * PI / k_b.re;
        Ok(Background {
            eps_b,
            mu_b,
            omega,
            k_b,
            lambda_b,
        })
    }

    /// Unit background (eps_b = mu_b = 1) with omega = 2 pi, giving
    /// k_b = 2 pi and lambda_b = 1. Convenient normalized units for tests.
    pub fn unit() -> Self {
        Background::new(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), 2.0 * PI)
            .expect("unit background is valid")
    }

    /// Background impedance Z_b = k_b / (omega eps_b).
    pub fn impedance(&self) -> Complex64 {
        self.k_b / (self.omega * self.eps_b)
    }
}

/// Uniform collocation grid over the computational rectangle.
/// Node m sits at `origin + (i h, j h)` with lexicographic index m = i + j n1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub h: f64,
    pub origin: [f64; 2],
}

impl Grid {
    pub fn new(n1: usize, n2: usize, h: f64, origin: [f64; 2]) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidParameter("grid needs at least one node".into()));
        }
        if h <= 0.0 {
            return Err(Error::InvalidParameter("grid step must be positive".into()));
        }
        Ok(Grid { n1, n2, h, origin })
    }

    /// Square grid covering a domain of physical side `a` at step `h`,
    /// centered on the origin: n = floor(a/h) + 1 nodes per side.
    pub fn square_for_domain(a: f64, h: f64) -> Result<Self> {
        if a <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidParameter("domain and step must be positive".into()));
        }
        let n = (a / h + 1e-9).floor() as usize + 1;
        let side = (n - 1) as f64 * h;
        Grid::new(n, n, h, [-side / 2.0, -side / 2.0])
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical side length along x1 (square domains: a = (n1-1) h).
    pub fn side(&self) -> f64 {
        (self.n1 - 1) as f64 * self.h
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.n1
    }

    pub fn position(&self, m: usize) -> [f64; 2] {
        let i = m % self.n1;
        let j = m / self.n1;
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }
}

/// Grid-sampled material map with the derived contrast functions.
#[derive(Debug, Clone)]
pub struct MediumMap {
    pub eps_rel: Vec<Complex64>,
    pub mu_rel: Vec<Complex64>,
    pub chi_e: Vec<Complex64>,
    pub chi_m: Vec<Complex64>,
}

impl MediumMap {
    pub fn new(eps_rel: Vec<Complex64>, mu_rel: Vec<Complex64>) -> Result<Self> {
        if eps_rel.len() != mu_rel.len() {
            return Err(Error::SizeMismatch("eps and mu arrays differ in length".into()));
        }
        let one = Complex64::new(1.0, 0.0);
        if eps_rel.iter().any(|e| *e == Complex64::new(0.0, 0.0)) {
            return Err(Error::InvalidParameter(
                "relative permittivity must be nonzero everywhere".into(),
            ));
        }
        let chi_e = eps_rel.iter().map(|e| e - one).collect();
        let chi_m = mu_rel.iter().map(|m| m - one).collect();
        Ok(MediumMap {
            eps_rel,
            mu_rel,
            chi_e,
            chi_m,
        })
    }

    pub fn len(&self) -> usize {
        self.eps_rel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps_rel.is_empty()
    }

    pub fn is_nonmagnetic(&self) -> bool {
        self.chi_m.iter().all(|c| c.norm() == 0.0)
    }

    /// Medium of the multiplicative regularizer: eps'_rel = 1/eps_rel
    /// (so chi'_e = eps_b/eps - 1) and unit permeability.
    pub fn regularizer(&self) -> MediumMap {
        let one = Complex64::new(1.0, 0.0);
        let eps_rel: Vec<Complex64> = self.eps_rel.iter().map(|e| one / e).collect();
        let mu_rel = vec![one; self.mu_rel.len()];
        MediumMap::new(eps_rel, mu_rel).expect("1/eps is nonzero")
    }

    /// Dual medium (eps <-> mu swap) used to run magnetic TM problems
    /// through the TE machinery.
    pub fn dual(&self) -> MediumMap {
        MediumMap::new(self.mu_rel.clone(), self.eps_rel.clone()).expect("swap keeps validity")
    }

    /// Distinct relative permittivities, bucketed at 1e-3 relative tolerance.
    /// These define the essential-spectrum segments [1, eps/eps_b].
    pub fn distinct_materials(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::new();
        for &e in &self.eps_rel {
            let close = out
                .iter()
                .any(|&m| (m - e).norm() <= 1e-3 * m.norm().max(1.0));
            if !close {
                out.push(e);
            }
        }
        out.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        out
    }
}

/// Complex number as a [re, im] pair in config files.
pub(crate) mod cpair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

/// Scatterer geometry/material description, rasterized onto the grid with
/// the mid-point rule (each node takes the material of the region containing
/// its center; nodes outside every region keep chi = 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScattererSpec {
    /// Homogeneous square of side `side` centered at `center`.
    HomogeneousSquare {
        side: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(with = "cpair")]
        eps_rel: Complex64,
        #[serde(with = "cpair", default = "one_c")]
        mu_rel: Complex64,
    },
    /// Concentric squares; the inner layer overrides the outer one.
    LayeredSquare {
        outer_side: f64,
        inner_side: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(with = "cpair")]
        outer_eps_rel: Complex64,
        #[serde(with = "cpair")]
        inner_eps_rel: Complex64,
    },
    /// Homogeneous circular cylinder cross-section.
    CircularCylinder {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(with = "cpair")]
        eps_rel: Complex64,
        #[serde(with = "cpair", default = "one_c")]
        mu_rel: Complex64,
    },
    /// Closed-form profile eps/eps_b = base + amp sin(4 pi x1/side) sin(4 pi x2/side)
    /// over a square of side `side`, coordinates relative to the square center.
    AnalyticProfile {
        side: f64,
        #[serde(default)]
        center: [f64; 2],
        base: f64,
        amplitude: f64,
    },
}

fn one_c() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl ScattererSpec {
    /// Half-open bounding box [xmin, xmax] x [ymin, ymax] of the support.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            ScattererSpec::HomogeneousSquare { side, center, .. }
            | ScattererSpec::AnalyticProfile { side, center, .. } => (
                [center[0] - side / 2.0, center[1] - side / 2.0],
                [center[0] + side / 2.0, center[1] + side / 2.0],
            ),
            ScattererSpec::LayeredSquare {
                outer_side, center, ..
            } => (
                [center[0] - outer_side / 2.0, center[1] - outer_side / 2.0],
                [center[0] + outer_side / 2.0, center[1] + outer_side / 2.0],
            ),
            ScattererSpec::CircularCylinder { radius, center, .. } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    /// Largest real part of the relative permittivity over the support,
    /// used by the grid-step rule.
    pub fn max_eps_rel_real(&self) -> f64 {
        match *self {
            ScattererSpec::HomogeneousSquare { eps_rel, .. } => eps_rel.re.max(1.0),
            ScattererSpec::LayeredSquare {
                outer_eps_rel,
                inner_eps_rel,
                ..
            } => outer_eps_rel.re.max(inner_eps_rel.re).max(1.0),
            ScattererSpec::CircularCylinder { eps_rel, .. } => eps_rel.re.max(1.0),
            ScattererSpec::AnalyticProfile {
                base, amplitude, ..
            } => (base + amplitude.abs()).max(1.0),
        }
    }

    fn sample(&self, x: [f64; 2]) -> Option<(Complex64, Complex64)> {
        let one = Complex64::new(1.0, 0.0);
        let inside_square = |c: [f64; 2], side: f64| {
            (x[0] - c[0]).abs() <= side / 2.0 + 1e-12 * side
                && (x[1] - c[1]).abs() <= side / 2.0 + 1e-12 * side
        };
        match *self {
            ScattererSpec::HomogeneousSquare {
                side,
                center,
                eps_rel,
                mu_rel,
            } => inside_square(center, side).then_some((eps_rel, mu_rel)),
            ScattererSpec::LayeredSquare {
                outer_side,
                inner_side,
                center,
                outer_eps_rel,
                inner_eps_rel,
            } => {
                if inside_square(center, inner_side) {
                    Some((inner_eps_rel, one))
                } else if inside_square(center, outer_side) {
                    Some((outer_eps_rel, one))
                } else {
                    None
                }
            }
            ScattererSpec::CircularCylinder {
                radius,
                center,
                eps_rel,
                mu_rel,
            } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                (dx * dx + dy * dy <= radius * radius).then_some((eps_rel, mu_rel))
            }
            ScattererSpec::AnalyticProfile {
                side,
                center,
                base,
                amplitude,
            } => {
                if !inside_square(center, side) {
                    return None;
                }
                let u = 4.0 * PI * (x[0] - center[0]) / side;
                let v = 4.0 * PI * (x[1] - center[1]) / side;
                let eps = base + amplitude * u.sin() * v.sin();
                Some((Complex64::new(eps, 0.0), one))
            }
        }
    }
}

/// Grid step from the discretization rule h = lambda_b / (k n) with
/// n = sqrt(max eps' * max mu') the highest refractive index.
pub fn grid_step(
    eps_rel_max_real: f64,
    mu_rel_max_real: f64,
    k_points: usize,
    lambda_b: f64,
) -> Result<f64> {
    if k_points < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 points per wavelength".into(),
        ));
    }
    if lambda_b <= 0.0 {
        return Err(Error::InvalidParameter("wavelength must be positive".into()));
    }
    let prod = eps_rel_max_real * mu_rel_max_real;
    if prod <= 0.0 {
        return Err(Error::InvalidParameter(
            "refractive index requires eps'_max * mu'_max > 0".into(),
        ));
    }
    Ok(lambda_b / (k_points as f64 * prod.sqrt()))
}

/// Sample the scatterer on the grid (mid-point rule).
pub fn rasterize(spec: &ScattererSpec, grid: &Grid, _bg: &Background) -> Result<MediumMap> {
    // each node owns an h x h cell; coverage extends half a cell past the
    // outermost nodes
    let (lo, hi) = spec.bounding_box();
    let slack = grid.h * (0.5 + 1e-9);
    let gx0 = grid.origin[0] - slack;
    let gy0 = grid.origin[1] - slack;
    let gx1 = grid.origin[0] + (grid.n1 - 1) as f64 * grid.h + slack;
    let gy1 = grid.origin[1] + (grid.n2 - 1) as f64 * grid.h + slack;
    if lo[0] < gx0 || lo[1] < gy0 || hi[0] > gx1 || hi[1] > gy1 {
        return Err(Error::OutOfDomain(format!(
            "scatterer box [{:.4},{:.4}]x[{:.4},{:.4}] vs grid [{:.4},{:.4}]x[{:.4},{:.4}]",
            lo[0], hi[0], lo[1], hi[1], gx0, gx1, gy0, gy1
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let n = grid.len();
    let mut eps = vec![one; n];
    let mut mu = vec![one; n];
    for m in 0..n {
        if let Some((e, mm)) = spec.sample(grid.position(m)) {
            eps[m] = e;
            mu[m] = mm;
        }
    }
    MediumMap::new(eps, mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq16(side: f64) -> ScattererSpec {
        ScattererSpec::HomogeneousSquare {
            side,
            center: [0.0, 0.0],
            eps_rel: Complex64::new(16.0, 0.0),
            mu_rel: Complex64::new(1.0, 0.0),
        }
    }

    #[test]
    fn grid_step_rule_examples() {
        assert!((grid_step(16.0, 1.0, 15, 1.0).unwrap() - 1.0 / 60.0).abs() < 1e-15);
        assert!((grid_step(1.0, 1.0, 15, 1.0).unwrap() - 1.0 / 15.0).abs() < 1e-15);
        let h = grid_step(15.0, 1.0, 15, 1.0).unwrap();
        assert!((h - 1.0 / (15.0 * 15.0_f64.sqrt())).abs() < 1e-15);
        assert!((h - 0.017213).abs() < 1e-6);
        assert!(grid_step(16.0, 1.0, 1, 1.0).is_err());
        assert!(grid_step(-2.0, 1.0, 15, 1.0).is_err());
    }

    #[test]
    fn grid_step_monotone() {
        let mut prev = f64::INFINITY;
        for k in [5, 10, 15, 20, 40] {
            let h = grid_step(16.0, 1.0, k, 1.0).unwrap();
            assert!(h < prev);
            prev = h;
        }
        let mut prev = f64::INFINITY;
        for e in [1.0, 2.0, 4.0, 9.0, 16.0] {
            let h = grid_step(e, 1.0, 15, 1.0).unwrap();
            assert!(h < prev);
            prev = h;
        }
    }

    #[test]
    fn background_invariants() {
        let bg = Background::unit();
        let k2 = bg.k_b * bg.k_b;
        let rhs = bg.eps_b * bg.mu_b * bg.omega * bg.omega;
        assert!((k2 - rhs).norm() <= 1e-14 * rhs.norm());
        assert!((bg.lambda_b - 1.0).abs() < 1e-14);

        let lossy = Background::new(
            Complex64::new(1.0, 0.2),
            Complex64::new(1.0, 0.0),
            2.0 * PI,
        )
        .unwrap();
        assert!(lossy.k_b.re > 0.0 && lossy.k_b.im > 0.0);
        let k2 = lossy.k_b * lossy.k_b;
        let rhs = lossy.eps_b * lossy.mu_b * lossy.omega * lossy.omega;
        assert!((k2 - rhs).norm() <= 1e-14 * rhs.norm());
    }

    #[test]
    fn rasterize_homogeneous_fill() {
        let bg = Background::unit();
        let grid = Grid::square_for_domain(1.0, 1.0 / 15.0).unwrap();
        let map = rasterize(&sq16(1.0), &grid, &bg).unwrap();
        for c in &map.chi_e {
            assert!((c - Complex64::new(15.0, 0.0)).norm() < 1e-12);
        }
        assert!(map.is_nonmagnetic());
    }

    #[test]
    fn rasterize_layered_center() {
        let bg = Background::unit();
        let grid = Grid::square_for_domain(1.0, 1.0 / 16.0).unwrap();
        let spec = ScattererSpec::LayeredSquare {
            outer_side: 1.0,
            inner_side: 0.5,
            center: [0.0, 0.0],
            outer_eps_rel: Complex64::new(16.0, 0.0),
            inner_eps_rel: Complex64::new(2.5, 20.0),
        };
        let map = rasterize(&spec, &grid, &bg).unwrap();
        // center node idx: grid is 17x17, center at (8,8)
        let c = grid.index(8, 8);
        assert!((map.chi_e[c] - Complex64::new(1.5, 20.0)).norm() < 1e-12);
        // corner node carries the outer material
        let corner = grid.index(0, 0);
        assert!((map.chi_e[corner] - Complex64::new(15.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rasterize_profile_value() {
        let bg = Background::unit();
        // 9 nodes per side, h = a/8 puts a node exactly at (a/8, a/8)
        let a = 1.0;
        let grid = Grid::square_for_domain(a, a / 8.0).unwrap();
        let spec = ScattererSpec::AnalyticProfile {
            side: a,
            center: [0.0, 0.0],
            base: 10.0,
            amplitude: 5.0,
        };
        let map = rasterize(&spec, &grid, &bg).unwrap();
        let m = grid.index(5, 5); // (a/8, a/8) relative to center
        let pos = grid.position(m);
        assert!((pos[0] - a / 8.0).abs() < 1e-12 && (pos[1] - a / 8.0).abs() < 1e-12);
        assert!((map.eps_rel[m] - Complex64::new(15.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rasterize_zero_contrast() {
        let bg = Background::unit();
        let grid = Grid::square_for_domain(1.0, 0.1).unwrap();
        let spec = ScattererSpec::HomogeneousSquare {
            side: 0.5,
            center: [0.0, 0.0],
            eps_rel: Complex64::new(1.0, 0.0),
            mu_rel: Complex64::new(1.0, 0.0),
        };
        let map = rasterize(&spec, &grid, &bg).unwrap();
        for m in 0..map.len() {
            assert_eq!(map.chi_e[m], Complex64::new(0.0, 0.0));
            assert_eq!(map.chi_m[m], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn rasterize_out_of_domain() {
        let bg = Background::unit();
        let grid = Grid::square_for_domain(1.0, 0.1).unwrap();
        assert!(matches!(
            rasterize(&sq16(2.0), &grid, &bg),
            Err(Error::OutOfDomain(_))
        ));
    }

    #[test]
    fn node_positions_translate_with_origin() {
        let g0 = Grid::new(5, 4, 0.3, [0.0, 0.0]).unwrap();
        let g1 = Grid::new(5, 4, 0.3, [1.5, -2.0]).unwrap();
        for m in 0..g0.len() {
            let p0 = g0.position(m);
            let p1 = g1.position(m);
            assert!((p1[0] - p0[0] - 1.5).abs() < 1e-15);
            assert!((p1[1] - p0[1] + 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sizing_matches_flooring_rule() {
        // alpha a / lambda = 60 sqrt(15) * 4 = 232.379... -> 233 nodes per side
        let alpha = 15.0 * 15.0_f64.sqrt();
        let h = 1.0 / alpha;
        let grid = Grid::square_for_domain(4.0, h).unwrap();
        assert_eq!(grid.n1, 233);
    }

    #[test]
    fn distinct_materials_buckets() {
        let one = Complex64::new(1.0, 0.0);
        let e16 = Complex64::new(16.0, 0.0);
        let map = MediumMap::new(
            vec![one, e16, e16 * Complex64::new(1.0000001, 0.0), Complex64::new(2.5, 20.0)],
            vec![one; 4],
        )
        .unwrap();
        let mats = map.distinct_materials();
        assert_eq!(mats.len(), 3);
    }

    #[test]
    fn regularizer_contrast() {
        let map = MediumMap::new(
            vec![Complex64::new(16.0, 0.0)],
            vec![Complex64::new(1.0, 0.0)],
        )
        .unwrap();
        let reg = map.regularizer();
        assert!((reg.chi_e[0] - Complex64::new(1.0 / 16.0 - 1.0, 0.0)).norm() < 1e-15);
        assert!((reg.chi_e[0].re + 0.9375).abs() < 1e-15);
        assert!(reg.is_nonmagnetic());
    }
}
