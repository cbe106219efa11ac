//! Bessel and Hankel function evaluation for the integral-equation kernels.
//!
//! The kernels need H0^(1) and H1^(1) to ~1e-12 relative accuracy over the
//! whole range of grid lags, which spans z = k_b*h/sqrt(pi) up to
//! z = k_b*a*sqrt(2). Plain f64 power series lose too many digits past z ~ 8
//! (the leading term grows like (z^2/4)^k/(k!)^2 before the alternating sum
//! collapses), and the truncated large-z asymptotic series only reaches
//! ~1e-8 at z = 8. The series is therefore summed in double-double
//! arithmetic up to Z_SPLIT = 36, where the asymptotic expansion's smallest
//! term is already below 1e-16.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Crossover between the (double-double) power series and the asymptotic
/// expansion. Validated by the Wronskian sweep in the tests below.
const Z_SPLIT: f64 = 36.0;

/// Largest |z| accepted by the complex-argument series path.
pub(crate) const COMPLEX_SERIES_MAX: f64 = 12.0;

// ---------------------------------------------------------------------------
// Double-double arithmetic (Dekker/Knuth error-free transforms).
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    #[inline]
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact quotient of two f64 values to double-double precision.
    #[inline]
    fn from_quot(a: f64, b: f64) -> Self {
        let q = a / b;
        let r = (-q).mul_add(b, a) / b;
        Dd { hi: q, lo: r }
    }

    #[inline]
    fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    fn mul_f64(self, other: f64) -> Dd {
        let (p, e) = two_prod(self.hi, other);
        let e = e + self.lo * other;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    fn div_f64(self, other: f64) -> Dd {
        let q1 = self.hi / other;
        let (p, e) = two_prod(q1, other);
        let r = ((self.hi - p) - e + self.lo) / other;
        let (hi, lo) = quick_two_sum(q1, r);
        Dd { hi, lo }
    }

    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

// ---------------------------------------------------------------------------
// Power series, double-double accumulation (0 < z < Z_SPLIT).
// ---------------------------------------------------------------------------

/// J0, Y0, J1, Y1 by their ascending series. Sums run in double-double so the
/// alternating cancellation up to z = 36 still leaves ~1e-15 relative error.
fn series_dd(z: f64) -> (f64, f64, f64, f64) {
    let q = {
        let (p, e) = two_prod(z, z);
        Dd { hi: p, lo: e }.mul_f64(0.25)
    };

    // J0 = sum (-1)^k q^k / (k!)^2, with the Y0 companion sum over H_k.
    let mut term = Dd::from(1.0);
    let mut j0 = Dd::from(1.0);
    let mut y0_sum = Dd::from(0.0);
    let mut harmonic = Dd::from(0.0);
    for k in 1..250 {
        let kf = k as f64;
        term = term.mul(q).div_f64(kf * kf).neg();
        j0 = j0.add(term);
        harmonic = harmonic.add(Dd::from_quot(1.0, kf));
        y0_sum = y0_sum.add(term.mul(harmonic).neg());
        if term.hi.abs() < 1e-40 + 1e-35 * j0.hi.abs() {
            break;
        }
    }

    // J1 = (z/2) sum (-1)^k q^k / (k!(k+1)!), Y1 companion over H_k + H_{k+1}.
    let mut u = Dd::from(1.0);
    let mut j1_sum = Dd::from(1.0);
    let mut y1_sum = Dd::from(1.0); // k = 0 term: u_0 * (H_0 + H_1) = 1
    let mut hk = Dd::from(0.0);
    let mut hk1 = Dd::from(1.0);
    for k in 1..250 {
        let kf = k as f64;
        u = u.mul(q).div_f64(kf * (kf + 1.0)).neg();
        j1_sum = j1_sum.add(u);
        hk = hk.add(Dd::from_quot(1.0, kf));
        hk1 = hk1.add(Dd::from_quot(1.0, kf + 1.0));
        y1_sum = y1_sum.add(u.mul(hk.add(hk1)));
        if u.hi.abs() < 1e-40 + 1e-35 * j1_sum.hi.abs() {
            break;
        }
    }

    let log_term = (0.5 * z).ln() + EULER_GAMMA;
    let j0_v = j0.to_f64();
    let j1_v = j1_sum.to_f64() * (0.5 * z);
    let y0_v = (2.0 / PI) * (log_term * j0_v + y0_sum.to_f64());
    let y1_v =
        (2.0 / PI) * log_term * j1_v - 2.0 / (PI * z) - (z / (2.0 * PI)) * y1_sum.to_f64();
    (j0_v, y0_v, j1_v, y1_v)
}

// ---------------------------------------------------------------------------
// Large-argument asymptotic expansion (z >= Z_SPLIT).
// ---------------------------------------------------------------------------

/// Hankel asymptotic sum: H_nu^(1)(z) ~ sqrt(2/(pi z)) e^{i(z - nu pi/2 - pi/4)} S,
/// S = sum_k i^k a_k(nu) / z^k with a_k = a_{k-1} (4 nu^2 - (2k-1)^2)/(8k).
/// Terms are added until they stop decreasing; below z = 36 the floor would
/// exceed 1e-12, which is why the series path extends that far.
fn hankel_asymptotic(nu: u8, z: Complex64) -> Complex64 {
    let four_nu_sq = 4.0 * f64::from(nu) * f64::from(nu);
    let mut sum = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let factor = four_nu_sq - (2.0 * kf - 1.0) * (2.0 * kf - 1.0);
        term *= Complex64::new(0.0, 1.0) * factor / (8.0 * kf) / z;
        let mag = term.norm();
        if mag >= last {
            break;
        }
        sum += term;
        last = mag;
        if mag < 1e-18 * sum.norm() {
            break;
        }
    }
    let phase = z - Complex64::new(f64::from(nu) * PI / 2.0 + PI / 4.0, 0.0);
    let amp = (Complex64::new(2.0 / PI, 0.0) / z).sqrt();
    amp * (Complex64::new(0.0, 1.0) * phase).exp() * sum
}

// ---------------------------------------------------------------------------
// Public (crate) entry points.
// ---------------------------------------------------------------------------

/// J0, Y0, J1, Y1 at real z > 0.
pub(crate) fn j0y0j1y1(z: f64) -> (f64, f64, f64, f64) {
    debug_assert!(z > 0.0);
    if z < Z_SPLIT {
        series_dd(z)
    } else {
        let h0 = hankel_asymptotic(0, Complex64::new(z, 0.0));
        let h1 = hankel_asymptotic(1, Complex64::new(z, 0.0));
        (h0.re, h0.im, h1.re, h1.im)
    }
}

/// H_order^(1)(z) for real z > 0, order in {0, 1}.
pub(crate) fn hankel1_real(order: u8, z: f64) -> Complex64 {
    let (j0, y0, j1, y1) = j0y0j1y1(z);
    match order {
        0 => Complex64::new(j0, y0),
        _ => Complex64::new(j1, y1),
    }
}

/// H_order^(1)(z) for complex z with Im z >= 0.
///
/// Small-loss backgrounds only: the series path covers |z| <= 12 and the
/// asymptotic expansion |z| >= Z_SPLIT; in between there is no accurate
/// complex evaluation and `None` is returned.
pub(crate) fn hankel1_complex(order: u8, z: Complex64) -> Option<Complex64> {
    if z.im < 0.0 {
        return None;
    }
    if z.im == 0.0 {
        return if z.re > 0.0 {
            Some(hankel1_real(order, z.re))
        } else {
            None
        };
    }
    let zmag = z.norm();
    if zmag <= COMPLEX_SERIES_MAX {
        Some(series_complex(order, z))
    } else if zmag >= Z_SPLIT {
        Some(hankel_asymptotic(order, z))
    } else {
        None
    }
}

/// Plain-f64 ascending series for complex argument (|z| <= COMPLEX_SERIES_MAX).
fn series_complex(order: u8, z: Complex64) -> Complex64 {
    let q = z * z * 0.25;
    let log_term = (0.5 * z).ln() + EULER_GAMMA;
    if order == 0 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut j0 = term;
        let mut y0_sum = Complex64::new(0.0, 0.0);
        let mut harmonic = 0.0;
        for k in 1..120 {
            let kf = k as f64;
            term = -term * q / (kf * kf);
            j0 += term;
            harmonic += 1.0 / kf;
            y0_sum -= term * harmonic;
            if term.norm() < 1e-20 * j0.norm() {
                break;
            }
        }
        let y0 = (2.0 / PI) * (log_term * j0 + y0_sum);
        j0 + Complex64::new(0.0, 1.0) * y0
    } else {
        let mut u = Complex64::new(1.0, 0.0);
        let mut j1_sum = u;
        let mut y1_sum = u;
        let (mut hk, mut hk1) = (0.0, 1.0);
        for k in 1..120 {
            let kf = k as f64;
            u = -u * q / (kf * (kf + 1.0));
            j1_sum += u;
            hk += 1.0 / kf;
            hk1 += 1.0 / (kf + 1.0);
            y1_sum += u * (hk + hk1);
            if u.norm() < 1e-20 * j1_sum.norm() {
                break;
            }
        }
        let j1 = j1_sum * z * 0.5;
        let y1 = (2.0 / PI) * log_term * j1 - 2.0 / (PI * z) - z / (2.0 * PI) * y1_sum;
        j1 + Complex64::new(0.0, 1.0) * y1
    }
}

// ---------------------------------------------------------------------------
// Integer-order ladders for the cylinder series oracle.
// ---------------------------------------------------------------------------

/// J_0..J_nmax at real x >= 0 via Miller's downward recurrence, normalized
/// with 1 = J0 + 2 sum J_{2k}.
pub(crate) fn jn_list(nmax: usize, x: f64) -> Vec<f64> {
    debug_assert!(x >= 0.0);
    if x < 1e-8 {
        // two leading series terms; exact to f64 at this argument size
        let mut out = Vec::with_capacity(nmax + 1);
        let mut lead = 1.0_f64;
        for n in 0..=nmax {
            out.push(lead * (1.0 - x * x / (4.0 * (n as f64 + 1.0))));
            lead *= 0.5 * x / (n as f64 + 1.0);
        }
        return out;
    }
    let start = nmax + 18 + (1.2 * x) as usize;
    let mut jp1 = 0.0_f64; // J_{k+1}, seeded at order start+1
    let mut jc = 1e-300_f64; // J_k, seeded at order start
    let mut out = vec![0.0; nmax + 1];
    let mut norm = 0.0_f64;
    if start <= nmax {
        out[start] = jc;
    }
    for k in (1..=start).rev() {
        let jm1 = (2.0 * k as f64 / x) * jc - jp1;
        jp1 = jc;
        jc = jm1; // J_{k-1}
        let m = k - 1;
        if m <= nmax {
            out[m] = jc;
        }
        if m > 0 && m % 2 == 0 {
            norm += 2.0 * jc;
        }
        if jc.abs() > 1e280 {
            let s = 1e-280;
            jc *= s;
            jp1 *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    norm += jc; // J_0
    let scale = 1.0 / norm;
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// Y_0..Y_nmax at real x > 0 via the stable upward recurrence.
pub(crate) fn yn_list(nmax: usize, x: f64) -> Vec<f64> {
    let (_, y0, _, y1) = j0y0j1y1(x);
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(y0);
    if nmax >= 1 {
        out.push(y1);
    }
    for n in 1..nmax {
        let next = (2.0 * n as f64 / x) * out[n] - out[n - 1];
        out.push(next);
    }
    out
}

/// J_0..J_nmax at complex z via the per-order ascending series.
/// Adequate for the cylinder-series orders (n <~ 50) and |z| <~ 20.
pub(crate) fn jn_list_complex(nmax: usize, z: Complex64) -> Vec<Complex64> {
    let q = z * z * 0.25;
    let half = z * 0.5;
    let mut out = Vec::with_capacity(nmax + 1);
    for n in 0..=nmax {
        // leading (z/2)^n / n!
        let mut lead = Complex64::new(1.0, 0.0);
        for m in 1..=n {
            lead = lead * half / m as f64;
        }
        let mut term = lead;
        let mut sum = term;
        for k in 1..200 {
            let kf = k as f64;
            term = -term * q / (kf * (kf + n as f64));
            sum += term;
            if term.norm() < 1e-18 * sum.norm() + 1e-250 {
                break;
            }
        }
        out.push(sum);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: textbook f64 ascending series, trustworthy for
    /// z <= 4 where cancellation is negligible.
    fn oracle_small(z: f64) -> (f64, f64, f64, f64) {
        let q = z * z / 4.0;
        let mut term = 1.0;
        let mut j0 = 1.0;
        let mut s0 = 0.0;
        let mut h = 0.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            j0 += term;
            h += 1.0 / kf;
            s0 -= term * h;
        }
        let mut u = 1.0;
        let mut j1s = 1.0;
        let mut s1 = 1.0;
        let (mut hk, mut hk1) = (0.0, 1.0);
        for k in 1..60 {
            let kf = k as f64;
            u *= -q / (kf * (kf + 1.0));
            j1s += u;
            hk += 1.0 / kf;
            hk1 += 1.0 / (kf + 1.0);
            s1 += u * (hk + hk1);
        }
        let l = (0.5 * z).ln() + EULER_GAMMA;
        let j1 = j1s * z / 2.0;
        (
            j0,
            (2.0 / PI) * (l * j0 + s0),
            j1,
            (2.0 / PI) * l * j1 - 2.0 / (PI * z) - z / (2.0 * PI) * s1,
        )
    }

    #[test]
    fn matches_reference_values_at_one() {
        let h0 = hankel1_real(0, 1.0);
        let h1 = hankel1_real(1, 1.0);
        assert!((h0 - Complex64::new(0.76519768656, 0.08825696422)).norm() < 1e-10);
        assert!((h1 - Complex64::new(0.44005058574, -0.78121282130)).norm() < 1e-10);
    }

    #[test]
    fn matches_independent_series_oracle() {
        let mut z = 0.05;
        while z <= 4.0 {
            let (j0, y0, j1, y1) = j0y0j1y1(z);
            let (oj0, oy0, oj1, oy1) = oracle_small(z);
            let h0 = Complex64::new(j0, y0);
            let h1 = Complex64::new(j1, y1);
            assert!(
                (h0 - Complex64::new(oj0, oy0)).norm() <= 1e-12 * h0.norm(),
                "H0 mismatch at z={z}"
            );
            assert!(
                (h1 - Complex64::new(oj1, oy1)).norm() <= 1e-12 * h1.norm(),
                "H1 mismatch at z={z}"
            );
            z += 0.173;
        }
    }

    #[test]
    fn small_argument_h1_asymptote() {
        let z = 1e-3;
        let h1 = hankel1_real(1, z);
        let lead = Complex64::new(0.0, -2.0 / (PI * z));
        assert!((h1 - lead).norm() / h1.norm() < 1e-5);
    }

    #[test]
    fn wronskian_across_full_range() {
        // J1 Y0 - J0 Y1 = 2/(pi z), swept across both evaluation branches.
        let n = 400;
        for i in 0..=n {
            let z = 10f64.powf(-3.0 + 6.0 * i as f64 / n as f64);
            let (j0, y0, j1, y1) = j0y0j1y1(z);
            let w = j1 * y0 - j0 * y1;
            let exact = 2.0 / (PI * z);
            assert!(
                (w - exact).abs() <= 1e-10 * exact,
                "Wronskian off at z={z}: rel err {}",
                ((w - exact) / exact).abs()
            );
        }
    }

    #[test]
    fn branch_crossover_is_continuous() {
        for dz in [-1e-6, 1e-6] {
            let z = Z_SPLIT + dz;
            let (j0, y0, j1, y1) = j0y0j1y1(z);
            // central value from the dd series just below the split
            let (rj0, ry0, rj1, ry1) = series_dd(Z_SPLIT - 1e-9);
            let d0 = Complex64::new(j0 - rj0, y0 - ry0).norm();
            let d1 = Complex64::new(j1 - rj1, y1 - ry1).norm();
            let scale = Complex64::new(rj0, ry0).norm();
            assert!(d0 < 1e-5 * scale + 2.0 * (dz.abs() + 1e-9), "d0={d0}");
            assert!(d1 < 1e-5 * scale + 2.0 * (dz.abs() + 1e-9), "d1={d1}");
        }
        // tighter: values at the split from both branches agree to ~1e-13
        let (aj0, ay0, aj1, ay1) = series_dd(Z_SPLIT);
        let h0 = hankel_asymptotic(0, Complex64::new(Z_SPLIT, 0.0));
        let h1 = hankel_asymptotic(1, Complex64::new(Z_SPLIT, 0.0));
        assert!((Complex64::new(aj0, ay0) - h0).norm() < 1e-13);
        assert!((Complex64::new(aj1, ay1) - h1).norm() < 1e-13);
    }

    #[test]
    fn complex_path_matches_real_axis_limit() {
        for &zr in &[0.5, 3.0, 9.0] {
            let z = Complex64::new(zr, 1e-8);
            for order in [0u8, 1u8] {
                let c = hankel1_complex(order, z).unwrap();
                let r = hankel1_real(order, zr);
                assert!((c - r).norm() < 1e-6 * r.norm(), "order {order} z {zr}");
            }
        }
        assert!(hankel1_complex(0, Complex64::new(20.0, 5.0)).is_none());
        assert!(hankel1_complex(0, Complex64::new(1.0, -0.1)).is_none());
    }

    #[test]
    fn jn_ladder_consistent_with_low_orders() {
        for &x in &[0.7, 3.3, 8.5, 14.2] {
            let (j0, _, j1, _) = j0y0j1y1(x);
            let jn = jn_list(6, x);
            assert!((jn[0] - j0).abs() < 1e-13);
            assert!((jn[1] - j1).abs() < 1e-13);
            // recurrence residual at mid order
            let res = jn[3] * 2.0 * 3.0 / x - jn[2] - jn[4];
            assert!(res.abs() < 1e-12);
        }
    }

    #[test]
    fn yn_ladder_consistent_with_wronskian() {
        // J_{n+1} Y_n - J_n Y_{n+1} = 2/(pi x) holds at every order.
        for &x in &[1.1, 4.2, 9.7] {
            let jn = jn_list(8, x);
            let yn = yn_list(8, x);
            for n in 0..8 {
                let w = jn[n + 1] * yn[n] - jn[n] * yn[n + 1];
                let exact = 2.0 / (PI * x);
                assert!((w - exact).abs() < 1e-10 * exact, "order {n} x {x}");
            }
        }
    }

    #[test]
    fn jn_complex_matches_real_on_axis() {
        let zs = jn_list_complex(5, Complex64::new(4.0, 0.0));
        let rs = jn_list(5, 4.0);
        for n in 0..=5 {
            assert!((zs[n].re - rs[n]).abs() < 1e-12, "order {n}");
            assert!(zs[n].im.abs() < 1e-14);
        }
    }
}
