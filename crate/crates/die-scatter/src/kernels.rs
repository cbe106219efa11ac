//! Scalar kernel factors and diagonal self terms of the discrete system.
//!
//! At lag d = x_n - x_m (d != 0) the matrix entries factor as
//! `A[row,col](n,m) = t_rowcol(d) * chi_col(x_m)`, with six independent
//! scalar factors: the 2x2 electric block (t11, t12 = t21, t22), the
//! field couplings t13/t23 (carrying omega mu_b) and t33. The row-3
//! couplings follow from the same lag functions scaled by eps_b/mu_b and
//! couple to the electric contrast; see `operator` for the assembly. The
//! lag-zero entries are not kernel samples at all: the whole diagonal comes
//! from `self_terms`.

use num_complex::Complex64;

use crate::bessel;
use crate::error::{Error, Result};
use crate::medium::Background;

/// H0^(1) and H1^(1) at one argument.
#[derive(Debug, Clone, Copy)]
pub struct HankelPair {
    pub h0: Complex64,
    pub h1: Complex64,
}

/// Contrast-free, h^2-scaled off-diagonal factors at one lag vector.
#[derive(Debug, Clone, Copy)]
pub struct KernelSample {
    pub t11: Complex64,
    pub t12: Complex64,
    pub t22: Complex64,
    pub t13: Complex64,
    pub t23: Complex64,
    pub t33: Complex64,
}

/// Hankel function of the first kind, order 0 or 1, at real z > 0.
pub fn hankel1(order: u8, z: f64) -> Result<Complex64> {
    if order > 1 {
        return Err(Error::Domain(format!("unsupported Hankel order {order}")));
    }
    if !(z > 0.0) {
        return Err(Error::Domain(format!(
            "hankel1 needs z > 0 (got {z}); lag-zero entries belong to self_terms"
        )));
    }
    Ok(bessel::hankel1_real(order, z))
}

/// Both Hankel orders at once.
pub fn hankel_pair(z: f64) -> Result<HankelPair> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("hankel_pair needs z > 0 (got {z})")));
    }
    let (j0, y0, j1, y1) = bessel::j0y0j1y1(z);
    Ok(HankelPair {
        h0: Complex64::new(j0, y0),
        h1: Complex64::new(j1, y1),
    })
}

/// Hankel pair at z = k_b r for a possibly lossy background wavenumber.
fn hankel_pair_kb(k_b: Complex64, r: f64) -> Result<HankelPair> {
    if k_b.im.abs() <= 1e-14 * k_b.norm() {
        hankel_pair(k_b.re * r)
    } else {
        let z = k_b * r;
        let h0 = bessel::hankel1_complex(0, z);
        let h1 = bessel::hankel1_complex(1, z);
        match (h0, h1) {
            (Some(h0), Some(h1)) => Ok(HankelPair { h0, h1 }),
            _ => Err(Error::Unsupported(format!(
                "complex Hankel argument |z|={:.3} outside the supported loss range",
                z.norm()
            ))),
        }
    }
}

/// Off-diagonal kernel factors at lag x_n - x_m.
pub fn offdiag_block(lag: [f64; 2], bg: &Background, h: f64) -> Result<KernelSample> {
    let r = (lag[0] * lag[0] + lag[1] * lag[1]).sqrt();
    if !(r > 0.0) {
        return Err(Error::Domain(
            "zero lag has no kernel sample; the diagonal is self_terms".into(),
        ));
    }
    let theta1 = lag[0] / r;
    let theta2 = lag[1] / r;
    let k_b = bg.k_b;
    let pair = hankel_pair_kb(k_b, r)?;
    let i = Complex64::new(0.0, 1.0);
    let h2 = h * h;

    // electric block: -(i k/(4r)) H1 (2 th th - delta) + (i k^2/4) H0 (th th - delta)
    let a = -i * k_b / (4.0 * r) * pair.h1;
    let b = i * k_b * k_b / 4.0 * pair.h0;
    let t11 = h2 * (a * (2.0 * theta1 * theta1 - 1.0) + b * (theta1 * theta1 - 1.0));
    let t22 = h2 * (a * (2.0 * theta2 * theta2 - 1.0) + b * (theta2 * theta2 - 1.0));
    let t12 = h2 * (a * 2.0 + b) * theta1 * theta2;

    // field couplings: -(omega mu_b k/4) H1 theta2 and +(omega mu_b k/4) H1 theta1
    let c = bg.omega * bg.mu_b * k_b / 4.0 * pair.h1;
    let t13 = -h2 * c * theta2;
    let t23 = h2 * c * theta1;

    let t33 = -h2 * i * k_b * k_b / 4.0 * pair.h0;

    Ok(KernelSample {
        t11,
        t12,
        t22,
        t13,
        t23,
        t33,
    })
}

/// Diagonal values (d_E for the two electric rows, d_H for the field row).
///
/// d_E = 1 + [1 - i pi k h/(4 sqrt pi) H1(k h/sqrt pi)] chi_e,
/// d_H = 1 + [1 - i pi k h/(2 sqrt pi) H1(k h/sqrt pi)] chi_m.
pub fn self_terms(
    chi_e: Complex64,
    chi_m: Complex64,
    bg: &Background,
    h: f64,
) -> Result<(Complex64, Complex64)> {
    let (be, bh) = self_brackets(bg, h)?;
    Ok((
        Complex64::new(1.0, 0.0) + be * chi_e,
        Complex64::new(1.0, 0.0) + bh * chi_m,
    ))
}

/// The two contrast multipliers in the self terms.
pub(crate) fn self_brackets(bg: &Background, h: f64) -> Result<(Complex64, Complex64)> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let rho = h / sqrt_pi; // disk of the same area as the grid cell
    let pair = hankel_pair_kb(bg.k_b, rho)?;
    let i = Complex64::new(0.0, 1.0);
    let common = i * std::f64::consts::PI * bg.k_b * h / (4.0 * sqrt_pi) * pair.h1;
    let one = Complex64::new(1.0, 0.0);
    Ok((one - common, one - 2.0 * common))
}
