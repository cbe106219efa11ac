//! Independent oracle: plane-wave scattering by a homogeneous circular
//! dielectric cylinder, evaluated from the cylindrical-harmonics series.
//! Used to validate the whole solver chain; shares nothing with the
//! operator/solver path except the Bessel ladders.
//!
//! The cylinder is centered at the origin of the evaluation frame.

use num_complex::Complex64;

use crate::bessel;
use crate::error::{Error, Result};
use crate::medium::Background;

#[derive(Debug, Clone)]
pub struct CylinderProblem {
    pub radius: f64,
    pub eps_rel: Complex64,
    pub mu_rel: Complex64,
    pub bg: Background,
    /// Incidence angle (radians from the x1 axis).
    pub psi: f64,
    /// Series truncation; `None` picks ceil(max(|k1 R|, |k_b rho_max|)) + 20.
    pub series_terms: Option<usize>,
}

impl CylinderProblem {
    pub fn new(radius: f64, eps_rel: Complex64, mu_rel: Complex64, bg: Background, psi: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::InvalidParameter("cylinder radius must be positive".into()));
        }
        if bg.k_b.im.abs() > 1e-14 * bg.k_b.norm() {
            return Err(Error::Unsupported(
                "the cylinder oracle assumes a lossless background".into(),
            ));
        }
        Ok(CylinderProblem {
            radius,
            eps_rel,
            mu_rel,
            bg,
            psi,
            series_terms: None,
        })
    }

    fn k_b(&self) -> f64 {
        self.bg.k_b.re
    }

    fn k1(&self) -> Complex64 {
        let mut k = self.bg.k_b.re * (self.eps_rel * self.mu_rel).sqrt();
        if k.re < 0.0 {
            k = -k;
        }
        k
    }

    fn pick_nmax(&self, rho_max: f64) -> Result<usize> {
        let needed = (self.k1().norm() * self.radius).max(self.k_b() * rho_max);
        let auto = needed.ceil() as usize + 20;
        match self.series_terms {
            None => Ok(auto),
            Some(n) => {
                if n + 8 < needed.ceil() as usize + 8 {
                    Err(Error::Truncation(format!(
                        "series_terms = {n} cannot converge out to k rho = {needed:.1}"
                    )))
                } else {
                    Ok(n)
                }
            }
        }
    }
}

/// Scattering (b_n) and interior (c_n) coefficients for orders 0..=nmax.
/// `gamma` is the admittance ratio in the tangential-derivative continuity:
/// sqrt(mu_r/eps_r) for the H3 (TE) problem, sqrt(eps_r/mu_r) for E3 (TM).
struct SeriesCoefficients {
    b: Vec<Complex64>,
    c: Vec<Complex64>,
}

fn coefficients(problem: &CylinderProblem, nmax: usize, gamma: Complex64) -> SeriesCoefficients {
    let u = problem.k_b() * problem.radius;
    let v = problem.k1() * problem.radius;
    let ju = bessel::jn_list(nmax + 1, u);
    let yu = bessel::yn_list(nmax + 1, u);
    let jv = bessel::jn_list_complex(nmax + 1, v);
    let dz = |z: &dyn Fn(usize) -> Complex64, n: usize| -> Complex64 {
        if n == 0 {
            -z(1)
        } else {
            (z(n - 1) - z(n + 1)) * 0.5
        }
    };
    let jue = |n: usize| Complex64::new(ju[n], 0.0);
    let hue = |n: usize| Complex64::new(ju[n], yu[n]);
    let jve = |n: usize| jv[n];
    let mut b = Vec::with_capacity(nmax + 1);
    let mut c = Vec::with_capacity(nmax + 1);
    for n in 0..=nmax {
        let jn_u = jue(n);
        let hn_u = hue(n);
        let jn_v = jve(n);
        let djn_u = dz(&jue, n);
        let dhn_u = dz(&hue, n);
        let djn_v = dz(&jve, n);
        let num = gamma * djn_v * jn_u - djn_u * jn_v;
        let den = dhn_u * jn_v - gamma * djn_v * hn_u;
        let bn = num / den;
        let cn = (jn_u + bn * hn_u) / jn_v;
        b.push(bn);
        c.push(cn);
    }
    SeriesCoefficients { b, c }
}

/// Signed-order lookup: Z_{-n} = (-1)^n Z_n.
#[inline]
fn signed(table: &[Complex64], n: isize) -> Complex64 {
    let idx = n.unsigned_abs();
    let val = table[idx];
    if n < 0 && idx % 2 == 1 {
        -val
    } else {
        val
    }
}

/// Total TE fields (E1, E2, H3) at the given points.
pub fn cylinder_fields_te(
    problem: &CylinderProblem,
    points: &[[f64; 2]],
) -> Result<Vec<[Complex64; 3]>> {
    let rho_max = points
        .iter()
        .map(|p| f64::hypot(p[0], p[1]))
        .fold(problem.radius, f64::max);
    let nmax = problem.pick_nmax(rho_max)?;
    let gamma = (problem.mu_rel / problem.eps_rel).sqrt();
    let coeffs = coefficients(problem, nmax + 1, gamma);
    let k_b = problem.k_b();
    let k1 = problem.k1();
    let omega = problem.bg.omega;
    let eps_in = problem.eps_rel * problem.bg.eps_b;
    let eps_out = problem.bg.eps_b;
    let i = Complex64::new(0.0, 1.0);

    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let rho = f64::hypot(p[0], p[1]);
        if (rho - problem.radius).abs() <= 1e-9 * problem.radius {
            return Err(Error::Domain(
                "evaluation point sits on the cylinder boundary circle".into(),
            ));
        }
        let phi = p[1].atan2(p[0]);
        let inside = rho < problem.radius;

        // radial tables for this point (order 0..=nmax+1)
        let (ztab, k, eps): (Vec<Complex64>, Complex64, Complex64) = if inside {
            let zt = if k1.im.abs() <= 1e-14 * k1.norm() {
                bessel::jn_list(nmax + 1, k1.re * rho)
                    .into_iter()
                    .map(|x| Complex64::new(x, 0.0))
                    .collect()
            } else {
                bessel::jn_list_complex(nmax + 1, k1 * rho)
            };
            (zt, k1, eps_in)
        } else {
            let ju = bessel::jn_list(nmax + 1, k_b * rho);
            let yu = bessel::yn_list(nmax + 1, k_b * rho);
            let zt = ju
                .iter()
                .zip(yu.iter())
                .map(|(j, y)| Complex64::new(*j, *y))
                .collect();
            (zt, Complex64::new(k_b, 0.0), eps_out)
        };
        // incident part needs plain J_n outside (the scattered adds H_n)
        let jtab: Vec<Complex64> = if inside {
            vec![]
        } else {
            bessel::jn_list(nmax + 1, k_b * rho)
                .into_iter()
                .map(|x| Complex64::new(x, 0.0))
                .collect()
        };

        let mut h3 = Complex64::new(0.0, 0.0);
        let mut d1 = Complex64::new(0.0, 0.0);
        let mut d2 = Complex64::new(0.0, 0.0);
        for n in -(nmax as isize)..=(nmax as isize) {
            let na = n.unsigned_abs();
            // i^n e^{-i n psi}
            let in_pow = match n.rem_euclid(4) {
                0 => Complex64::new(1.0, 0.0),
                1 => i,
                2 => Complex64::new(-1.0, 0.0),
                _ => -i,
            };
            let a_n = if inside {
                in_pow * coeffs.c[na] * (-i * (n as f64) * problem.psi).exp()
            } else {
                in_pow * (-i * (n as f64) * problem.psi).exp()
            };
            // radial factor of the order-n term and its ladder neighbors:
            // inside c_n J(k1 rho) (c_n folded into a_n), outside J + b_n H
            let term = |order: isize| -> Complex64 {
                if inside {
                    signed(&ztab, order)
                } else {
                    signed(&jtab, order) + coeffs.b[na] * signed(&ztab, order)
                }
            };
            let e_nphi = (i * (n as f64) * phi).exp();
            let e_np1 = (i * ((n + 1) as f64) * phi).exp();
            let e_nm1 = (i * ((n - 1) as f64) * phi).exp();
            h3 += a_n * term(n) * e_nphi;
            d1 += a_n * k * 0.5 * (term(n - 1) * e_nm1 - term(n + 1) * e_np1);
            d2 += a_n * i * k * 0.5 * (term(n + 1) * e_np1 + term(n - 1) * e_nm1);
        }
        let e1 = i / (omega * eps) * d2;
        let e2 = -i / (omega * eps) * d1;
        out.push([e1, e2, h3]);
    }
    Ok(out)
}

/// Total TM field E3 at the given points.
pub fn cylinder_fields_tm(problem: &CylinderProblem, points: &[[f64; 2]]) -> Result<Vec<Complex64>> {
    let rho_max = points
        .iter()
        .map(|p| f64::hypot(p[0], p[1]))
        .fold(problem.radius, f64::max);
    let nmax = problem.pick_nmax(rho_max)?;
    let gamma = (problem.eps_rel / problem.mu_rel).sqrt();
    let coeffs = coefficients(problem, nmax + 1, gamma);
    let k_b = problem.k_b();
    let k1 = problem.k1();
    let i = Complex64::new(0.0, 1.0);

    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let rho = f64::hypot(p[0], p[1]);
        if (rho - problem.radius).abs() <= 1e-9 * problem.radius {
            return Err(Error::Domain(
                "evaluation point sits on the cylinder boundary circle".into(),
            ));
        }
        let phi = p[1].atan2(p[0]);
        let inside = rho < problem.radius;
        let (ztab, jtab): (Vec<Complex64>, Vec<Complex64>) = if inside {
            let zt = if k1.im.abs() <= 1e-14 * k1.norm() {
                bessel::jn_list(nmax, k1.re * rho)
                    .into_iter()
                    .map(|x| Complex64::new(x, 0.0))
                    .collect()
            } else {
                bessel::jn_list_complex(nmax, k1 * rho)
            };
            (zt, vec![])
        } else {
            let ju = bessel::jn_list(nmax, k_b * rho);
            let yu = bessel::yn_list(nmax, k_b * rho);
            let h = ju
                .iter()
                .zip(yu.iter())
                .map(|(j, y)| Complex64::new(*j, *y))
                .collect();
            let j = ju.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
            (h, j)
        };
        let mut e3 = Complex64::new(0.0, 0.0);
        for n in -(nmax as isize)..=(nmax as isize) {
            let na = n.unsigned_abs();
            let in_pow = match n.rem_euclid(4) {
                0 => Complex64::new(1.0, 0.0),
                1 => i,
                2 => Complex64::new(-1.0, 0.0),
                _ => -i,
            };
            let phase = (i * (n as f64) * (phi - problem.psi)).exp();
            let term = if inside {
                coeffs.c[na] * signed(&ztab, n)
            } else {
                signed(&jtab, n) + coeffs.b[na] * signed(&ztab, n)
            };
            e3 += in_pow * term * phase;
        }
        out.push(e3);
    }
    Ok(out)
}

/// Scattering coefficients b_0..b_nmax for diagnostics (TE convention).
pub fn scattering_coefficients_te(problem: &CylinderProblem, nmax: usize) -> Vec<Complex64> {
    let gamma = (problem.mu_rel / problem.eps_rel).sqrt();
    coefficients(problem, nmax + 1, gamma).b[..=nmax].to_vec()
}
