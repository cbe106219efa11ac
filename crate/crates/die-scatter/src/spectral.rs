//! Eigenvalue machinery: dense spectra for diagnostics, largest-magnitude
//! eigenpairs for deflation, the deflating right preconditioner
//! P^-1 = I + V (T^-1 - I) V^H, and the eigenvalue maps/bounds that drive
//! the deflation-radius and sizing estimates.

use num_complex::Complex64;
use serde::Serialize;
use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dotc, norm2, scale, CMat, Lu, ONE, ZERO};
use crate::medium::{rasterize, Background, Grid, MediumMap, ScattererSpec};
use crate::operator::{assemble_dense_capped, KernelTweak, LinearMap};

/// Default cap on the dense eigensolver dimension.
pub const DENSE_EIG_CAP: usize = 6000;

// ---------------------------------------------------------------------------
// Dense spectra.
// ---------------------------------------------------------------------------

/// All eigenvalues of a dense matrix (Hessenberg + shifted QR).
pub fn dense_spectrum(matrix: &CMat) -> Result<Vec<Complex64>> {
    dense_spectrum_capped(matrix, DENSE_EIG_CAP)
}

pub fn dense_spectrum_capped(matrix: &CMat, cap: usize) -> Result<Vec<Complex64>> {
    if !matrix.is_square() {
        return Err(Error::InvalidParameter("spectrum needs a square matrix".into()));
    }
    if matrix.n_rows > cap {
        return Err(Error::ResourceCap(format!(
            "dense eigensolve of dimension {} exceeds cap {cap}",
            matrix.n_rows
        )));
    }
    linalg::eigenvalues(matrix)
}

// ---------------------------------------------------------------------------
// Largest-magnitude eigenpairs (Krylov-Schur restarted Arnoldi).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TopkResult {
    pub values: Vec<Complex64>,
    pub vectors: Vec<Vec<Complex64>>,
    /// Residual bound |h b^H y| for each returned pair.
    pub residuals: Vec<f64>,
    /// False when the restart budget ran out first (partial results).
    pub converged: bool,
}

/// The `r` largest-magnitude eigenpairs of a linear map, by restarted
/// Arnoldi with Schur-form truncation; subspace dimension 2r + 10.
///
/// Residual contract on success: ||A v - lambda v|| <= tol |lambda| per pair.
pub fn topk_eigs(apply_a: &dyn LinearMap, r: usize, tol: f64) -> Result<TopkResult> {
    let dim = apply_a.dim();
    if r == 0 {
        return Ok(TopkResult {
            values: vec![],
            vectors: vec![],
            residuals: vec![],
            converged: true,
        });
    }
    if r >= dim {
        return Err(Error::InvalidParameter(format!(
            "requested {r} eigenpairs of a dimension-{dim} map"
        )));
    }
    if !(1e-14..=1e-1).contains(&tol) {
        return Err(Error::InvalidParameter(format!(
            "eigs tolerance {tol} outside [1e-14, 1e-1]"
        )));
    }
    let m = (2 * r + 10).min(dim);
    let max_restarts = 400;

    // Arnoldi state: basis columns, projected matrix (m+1 x m working array
    // whose active upper-left block is triangular-plus-spike after restarts).
    let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    v.push(linalg::pseudo_random_unit(dim, 0x5eed));
    let mut hmat = CMat::zeros(m + 1, m);
    let mut k_start = 0usize; // columns already holding the truncated state

    let mut w = vec![ZERO; dim];
    // Degenerate clusters surface one copy at a time: a Krylov space from a
    // single vector cannot hold two copies of an eigenvalue, so a converged
    // leading set may silently miss a multiple. Once the wanted set looks
    // converged, verification restarts replace the (near-zero) residual
    // direction with fresh random noise; any missing copy then outgrows the
    // discarded part of the spectrum and dethrones an impostor. Finishing
    // requires two clean verifications in a row.
    let mut prev_leading: Option<Vec<Complex64>> = None;
    let mut last_was_verification = false;
    let mut clean_verifications = 0usize;
    for restart in 0..max_restarts {
        // expand to the full subspace
        for j in k_start..m {
            apply_a.apply_to(&v[j], &mut w);
            for _pass in 0..2 {
                for (i, vi) in v.iter().enumerate().take(j + 1) {
                    let c = dotc(vi, &w);
                    hmat[(i, j)] += c;
                    axpy(-c, vi, &mut w);
                }
            }
            let nw = norm2(&w);
            hmat[(j + 1, j)] = Complex64::new(nw, 0.0);
            if nw <= 1e-13 * hmat.max_abs().max(1.0) {
                // invariant subspace: top-up with a fresh orthogonal direction
                let mut fresh = linalg::pseudo_random_unit(dim, 0xbeef + j as u64);
                for vi in v.iter().take(j + 1) {
                    let c = dotc(vi, &fresh);
                    axpy(-c, vi, &mut fresh);
                }
                let nf = norm2(&fresh);
                if nf < 1e-8 {
                    break;
                }
                scale(Complex64::new(1.0 / nf, 0.0), &mut fresh);
                hmat[(j + 1, j)] = ZERO;
                if v.len() == j + 1 {
                    v.push(fresh);
                } else {
                    v[j + 1] = fresh;
                }
                continue;
            }
            let mut next = w.clone();
            scale(Complex64::new(1.0 / nw, 0.0), &mut next);
            if v.len() == j + 1 {
                v.push(next);
            } else {
                v[j + 1] = next;
            }
        }

        // Schur form of the m x m projection, sorted by |lambda| descending
        let mut hm = CMat::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                hm[(i, j)] = hmat[(i, j)];
            }
        }
        let (mut t, mut q) = linalg::schur(&hm)?;
        linalg::reorder_schur_desc(&mut t, &mut q);
        let h_last = hmat[(m, m - 1)];
        // coupling row: h_{m+1,m} e_m^T Q
        let coupling: Vec<Complex64> = (0..m).map(|j| h_last * q[(m - 1, j)]).collect();

        // Ritz residuals for the leading r pairs
        let mut residuals = Vec::with_capacity(r);
        let mut all_ok = true;
        for i in 0..r {
            let y = linalg::triangular_eigenvector(&t, i);
            let mut cb = ZERO;
            for (cj, yj) in coupling.iter().zip(y.iter()) {
                cb += cj * yj;
            }
            let res = cb.norm();
            let lam = t[(i, i)].norm().max(1e-300);
            residuals.push(res);
            if res > tol * lam {
                all_ok = false;
            }
        }

        let leading: Vec<Complex64> = (0..r).map(|i| t[(i, i)]).collect();
        let matched_prev = match &prev_leading {
            Some(prev) => {
                let gap = greedy_match_distance(prev, &leading);
                let scale = leading.iter().map(|l| l.norm()).fold(1.0, f64::max);
                gap <= tol.max(1e-12) * 10.0 * scale
            }
            None => false,
        };
        if all_ok && matched_prev && last_was_verification {
            clean_verifications += 1;
        } else if !all_ok {
            clean_verifications = 0;
        }
        prev_leading = Some(leading);

        let finish = (all_ok && clean_verifications >= 2) || restart == max_restarts - 1;
        let verification = all_ok && !finish;
        // truncation size: the wanted part alone on verification rounds
        // (their couplings are below tolerance, safe to lock), otherwise
        // keep a buffer of nearly-converged directions
        let keep = if finish || verification {
            r
        } else {
            (r + (m - r) / 2).min(m - 1)
        };

        // rotate the basis: W = V_m Q[:, 0..keep]
        let mut rotated: Vec<Vec<Complex64>> = (0..keep).map(|_| vec![ZERO; dim]).collect();
        for (j, col) in rotated.iter_mut().enumerate() {
            for (i, vi) in v.iter().enumerate().take(m) {
                let qij = q[(i, j)];
                if qij != ZERO {
                    axpy(qij, vi, col);
                }
            }
        }

        if finish {
            let mut values = Vec::with_capacity(r);
            let mut vectors = Vec::with_capacity(r);
            for i in 0..r {
                values.push(t[(i, i)]);
                let y = linalg::triangular_eigenvector(&t, i);
                // Ritz vector x = V_m (Q y)
                let mut x = vec![ZERO; dim];
                for (j, vj) in v.iter().enumerate().take(m) {
                    let mut c = ZERO;
                    for (kq, yk) in y.iter().enumerate() {
                        c += q[(j, kq)] * yk;
                    }
                    axpy(c, vj, &mut x);
                }
                let nx = norm2(&x);
                scale(Complex64::new(1.0 / nx, 0.0), &mut x);
                vectors.push(x);
            }
            return Ok(TopkResult {
                values,
                vectors,
                residuals,
                converged: all_ok,
            });
        }

        // install the truncated Krylov-Schur state
        let residual_vec = if verification || v.len() <= m {
            // fresh random continuation: on verification rounds the locked
            // couplings are below tolerance; on exhausted expansions they
            // are exactly zero, so any orthonormal direction is valid
            let mut fresh = linalg::pseudo_random_unit(dim, 0xfade + restart as u64);
            for col in &rotated {
                let c = dotc(col, &fresh);
                axpy(-c, col, &mut fresh);
            }
            let nf = norm2(&fresh);
            scale(Complex64::new(1.0 / nf.max(1e-300), 0.0), &mut fresh);
            fresh
        } else {
            v[m].clone()
        };
        let mut new_h = CMat::zeros(m + 1, m);
        for i in 0..keep {
            for j in 0..keep {
                new_h[(i, j)] = t[(i, j)];
            }
        }
        if !verification {
            for (j, c) in coupling.iter().take(keep).enumerate() {
                new_h[(keep, j)] = *c;
            }
        }
        hmat = new_h;
        v.truncate(0);
        v.extend(rotated);
        v.push(residual_vec);
        k_start = keep;
        last_was_verification = verification;
    }
    unreachable!("restart loop always returns at the budget boundary");
}

// ---------------------------------------------------------------------------
// Deflation basis and preconditioner.
// ---------------------------------------------------------------------------

/// Orthonormal deflation span V with the projected matrix T = V^H A V.
pub struct DeflationBasis {
    v: Vec<Vec<Complex64>>,
    t: CMat,
    t_lu: Option<Lu>,
    pub cond_t: f64,
    pub r: usize,
    dim: usize,
    /// Eigenvalues the basis was built from (reporting only).
    pub deflated_values: Vec<Complex64>,
}

impl DeflationBasis {
    /// Empty basis: P^-1 is the identity.
    pub fn identity(dim: usize) -> Self {
        DeflationBasis {
            v: vec![],
            t: CMat::zeros(0, 0),
            t_lu: None,
            cond_t: 1.0,
            r: 0,
            dim,
            deflated_values: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t(&self) -> &CMat {
        &self.t
    }

    pub fn basis(&self) -> &[Vec<Complex64>] {
        &self.v
    }

    /// y = P^-1 x = x + V (T^-1 (V^H x) - V^H x); O(dim * r).
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.copy_from_slice(x);
        if self.r == 0 {
            return;
        }
        let coeffs: Vec<Complex64> = self.v.iter().map(|vi| dotc(vi, x)).collect();
        let mut solved = coeffs.clone();
        self.t_lu
            .as_ref()
            .expect("nonempty basis carries a factorization")
            .solve_in_place(&mut solved);
        for (s, c) in solved.iter_mut().zip(coeffs.iter()) {
            *s -= c;
        }
        for (vi, d) in self.v.iter().zip(solved.iter()) {
            axpy(*d, vi, y);
        }
    }
}

impl LinearMap for DeflationBasis {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply_to(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.apply(x, y);
    }
}

/// Build the deflating preconditioner from retrieved eigenpairs: orthonormal
/// basis via modified Gram-Schmidt, then T = V^H A V with its factorization.
pub fn build_deflation(
    apply_a: &dyn LinearMap,
    values: &[Complex64],
    vectors: &[Vec<Complex64>],
) -> Result<DeflationBasis> {
    let dim = apply_a.dim();
    if vectors.is_empty() {
        return Ok(DeflationBasis::identity(dim));
    }
    for vec in vectors {
        if vec.len() != dim {
            return Err(Error::SizeMismatch("eigenvector length vs operator dim".into()));
        }
    }
    let mut v: Vec<Vec<Complex64>> = vectors.to_vec();
    linalg::orthonormalize(&mut v)?;
    let r = v.len();
    let mut t = CMat::zeros(r, r);
    let mut av = vec![ZERO; dim];
    for (j, vj) in v.iter().enumerate() {
        apply_a.apply_to(vj, &mut av);
        for (i, vi) in v.iter().enumerate() {
            t[(i, j)] = dotc(vi, &av);
        }
    }
    let cond_t = linalg::cond_one(&t)
        .map_err(|_| Error::DegenerateBasis("projected matrix T is singular".into()))?;
    let t_lu = Some(linalg::lu_factor(&t)?);
    Ok(DeflationBasis {
        v,
        t,
        t_lu,
        cond_t,
        r,
        dim,
        deflated_values: values.to_vec(),
    })
}

/// y = inner(P^-1 x): the right-preconditioned map A P^-1 as one LinearMap
/// (for spectra of the preconditioned system).
pub struct DeflatedMap<'a> {
    pub inner: &'a dyn LinearMap,
    pub basis: &'a DeflationBasis,
}

impl LinearMap for DeflatedMap<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply_to(&self, x: &[Complex64], y: &mut [Complex64]) {
        let mut px = vec![ZERO; x.len()];
        self.basis.apply(x, &mut px);
        self.inner.apply_to(&px, y);
    }
}

// ---------------------------------------------------------------------------
// Eigenvalue map, deflation radius, wedge bound, beta estimate.
// ---------------------------------------------------------------------------

/// lambda' = [1 + (eps_b/eps)(1 - lambda)] lambda: the exact image of an
/// eigenvalue of A under left-multiplication by the regularizer, valid for
/// homogeneous contrast.
pub fn map_eigenvalue(lambda: Complex64, eps_rel: Complex64) -> Result<Complex64> {
    if eps_rel == ZERO {
        return Err(Error::Domain("eps_rel = 0 breaks the existence condition".into()));
    }
    Ok((ONE + (ONE - lambda) / eps_rel) * lambda)
}

/// Essential-spectrum segments [1, eps/eps_b], one per distinct material.
pub fn essential_segments(medium: &MediumMap) -> Vec<(Complex64, Complex64)> {
    medium
        .distinct_materials()
        .into_iter()
        .map(|m| (ONE, m))
        .collect()
}

/// Deflation radius: discretize each segment [1, eps/eps_b], push it through
/// `map_eigenvalue`, take the largest magnitude over all materials.
pub fn deflation_radius(materials: &[Complex64]) -> Result<f64> {
    deflation_radius_with_resolution(materials, 1000)
}

pub fn deflation_radius_with_resolution(materials: &[Complex64], points: usize) -> Result<f64> {
    if materials.is_empty() {
        return Err(Error::InvalidParameter("no materials given".into()));
    }
    if points < 2 {
        return Err(Error::InvalidParameter("need at least two sample points".into()));
    }
    let mut radius: f64 = 0.0;
    for &eps in materials {
        if eps == ZERO {
            return Err(Error::Domain("eps_rel = 0 breaks the existence condition".into()));
        }
        for k in 0..points {
            let t = k as f64 / (points - 1) as f64;
            let lambda = ONE + (eps - ONE).scale(t);
            radius = radius.max(map_eigenvalue(lambda, eps)?.norm());
        }
    }
    Ok(radius)
}

/// Wedge-bound violation report for a set of eigenvalues against the
/// material list (relative permittivities; the background supplies eps_b).
#[derive(Debug, Clone, Serialize)]
pub struct WedgeReport {
    pub checked: usize,
    pub violations: usize,
    pub max_violation: f64,
}

/// Evaluate Im eps - (Im eps + Im eps_b) Re l + (Re eps - Re eps_b) Im l
/// + Im eps_b |l|^2 <= 0 for every (eigenvalue, material) pair; entries above
/// `tol * max(1, |l|^2)` (after normalizing by |eps_b|) count as violations.
pub fn wedge_check(
    eigenvalues: &[Complex64],
    materials: &[Complex64],
    bg: &Background,
    tol: Option<f64>,
) -> WedgeReport {
    let tol = tol.unwrap_or(1e-8);
    let mut violations = 0;
    let mut max_violation = 0.0_f64;
    let eb = bg.eps_b;
    let scale_eb = eb.norm();
    for &lam in eigenvalues {
        for &mat in materials {
            let eps = mat * eb;
            let form = eps.im - (eps.im + eb.im) * lam.re + (eps.re - eb.re) * lam.im
                + eb.im * lam.norm_sqr();
            let v = form / scale_eb;
            let allowed = tol * lam.norm_sqr().max(1.0);
            if v > allowed {
                violations += 1;
                max_violation = max_violation.max(v);
            }
        }
    }
    WedgeReport {
        checked: eigenvalues.len() * materials.len(),
        violations,
        max_violation,
    }
}

/// Fraction of eigenvalues outside the deflation radius, averaged over
/// desk-scale configurations of the same scatterer.
pub fn estimate_beta(spec: &ScattererSpec, grids: &[Grid], bg: &Background) -> Result<f64> {
    let mut betas = Vec::new();
    for grid in grids {
        let medium = rasterize(spec, grid, bg)?;
        let dense = match assemble_dense_capped(&medium, grid, bg, DENSE_EIG_CAP, KernelTweak::None)
        {
            Ok(m) => m,
            Err(Error::ResourceCap(_)) => continue,
            Err(e) => return Err(e),
        };
        let eigs = dense_spectrum_capped(&dense, DENSE_EIG_CAP)?;
        let radius = deflation_radius(&medium.distinct_materials())?;
        let count = count_outside_radius(&eigs, radius);
        betas.push(count as f64 / eigs.len() as f64);
    }
    if betas.is_empty() {
        return Err(Error::ResourceCap(
            "all supplied grids exceed the dense-spectrum cap".into(),
        ));
    }
    Ok(betas.iter().sum::<f64>() / betas.len() as f64)
}

/// Eigenvalues strictly outside the radius (with a tiny relative guard so
/// boundary values do not count).
pub fn count_outside_radius(eigenvalues: &[Complex64], radius: f64) -> usize {
    eigenvalues
        .iter()
        .filter(|l| l.norm() > radius * (1.0 + 1e-9))
        .count()
}

/// Distance from a point to the segment [1, eps] in the complex plane.
pub fn distance_to_segment(lambda: Complex64, seg_end: Complex64) -> f64 {
    let a = ONE;
    let d = seg_end - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (lambda - a).norm();
    }
    // projection parameter of lambda onto the segment, clamped to [0, 1]
    let t = ((lambda - a).re * d.re + (lambda - a).im * d.im) / len2;
    let t = t.clamp(0.0, 1.0);
    (lambda - (a + d.scale(t))).norm()
}

/// Count eigenvalues within a tube of the essential segment [1, eps].
pub fn tube_count(eigenvalues: &[Complex64], seg_end: Complex64, radius: f64) -> usize {
    eigenvalues
        .iter()
        .filter(|l| distance_to_segment(**l, seg_end) <= radius)
        .count()
}

/// Greedy bottleneck matching distance between two equally sized multisets.
/// The optimal matching max-distance is bounded above by this value.
pub fn greedy_match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    // match the large magnitudes first: they are the sensitive ones
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| b_mag(a[j]).partial_cmp(&b_mag(a[i])).unwrap());
    let mut worst = 0.0_f64;
    for &i in &order {
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for (j, bj) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (a[i] - bj).norm();
            if d < best {
                best = d;
                best_j = j;
            }
        }
        used[best_j] = true;
        worst = worst.max(best);
    }
    worst
}

fn b_mag(z: Complex64) -> f64 {
    z.norm()
}

// ---------------------------------------------------------------------------
// Spectral report.
// ---------------------------------------------------------------------------

/// Eigenvalue diagnostics bundle for one configuration.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Complex64>,
    pub essential_segments: Vec<(Complex64, Complex64)>,
    pub deflation_radius: f64,
    pub wedge: WedgeReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub n_eigenvalues: usize,
    pub essential_segments: Vec<[f64; 4]>,
    pub deflation_radius: f64,
    pub outside_radius: usize,
    pub beta: f64,
    pub wedge_checked: usize,
    pub wedge_violations: usize,
    pub wedge_max_violation: f64,
}

impl SpectralReport {
    pub fn build(eigenvalues: Vec<Complex64>, medium: &MediumMap, bg: &Background) -> Result<Self> {
        let materials = medium.distinct_materials();
        let segments = essential_segments(medium);
        let radius = deflation_radius(&materials)?;
        let wedge = wedge_check(&eigenvalues, &materials, bg, None);
        Ok(SpectralReport {
            eigenvalues,
            essential_segments: segments,
            deflation_radius: radius,
            wedge,
        })
    }

    pub fn summary(&self) -> SpectralSummary {
        let outside = count_outside_radius(&self.eigenvalues, self.deflation_radius);
        SpectralSummary {
            n_eigenvalues: self.eigenvalues.len(),
            essential_segments: self
                .essential_segments
                .iter()
                .map(|(a, b)| [a.re, a.im, b.re, b.im])
                .collect(),
            deflation_radius: self.deflation_radius,
            outside_radius: outside,
            beta: outside as f64 / self.eigenvalues.len().max(1) as f64,
            wedge_checked: self.wedge.checked,
            wedge_violations: self.wedge.violations,
            wedge_max_violation: self.wedge.max_violation,
        }
    }

    /// CSV with one (re, im) row per eigenvalue.
    pub fn write_eigenvalues_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "re,im")?;
        for e in &self.eigenvalues {
            writeln!(w, "{:.16e},{:.16e}", e.re, e.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pseudo_random_unit;
    use crate::operator::assemble_dense;

    fn diag(values: &[Complex64]) -> CMat {
        let n = values.len();
        let mut m = CMat::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    fn te_matrix_16(nodes_per_side: usize) -> (CMat, MediumMap, Grid, Background) {
        let bg = Background::unit();
        let h = 1.0 / (nodes_per_side as f64 - 1.0);
        let grid = Grid::square_for_domain(1.0, h).unwrap();
        let spec = ScattererSpec::HomogeneousSquare {
            side: 1.0,
            center: [0.0, 0.0],
            eps_rel: Complex64::new(16.0, 0.0),
            mu_rel: ONE,
        };
        let medium = rasterize(&spec, &grid, &bg).unwrap();
        let a = assemble_dense(&medium, &grid, &bg).unwrap();
        (a, medium, grid, bg)
    }

    #[test]
    fn dense_spectrum_examples() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = Complex64::new(2.0, 0.0);
        a[(0, 1)] = ONE;
        a[(1, 1)] = Complex64::new(3.0, 0.0);
        let mut e = dense_spectrum(&a).unwrap();
        e.sort_by(|p, q| p.re.partial_cmp(&q.re).unwrap());
        assert!((e[0] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((e[1] - Complex64::new(3.0, 0.0)).norm() < 1e-12);

        let vals = pseudo_random_unit(2500, 77);
        let a = CMat {
            n_rows: 50,
            n_cols: 50,
            data: vals,
        };
        let eigs = dense_spectrum(&a).unwrap();
        let sum: Complex64 = eigs.iter().sum();
        let tr: Complex64 = (0..50).map(|i| a[(i, i)]).sum();
        assert!((sum - tr).norm() <= 1e-10 * tr.norm().max(1.0));

        let big = CMat::zeros(10, 10);
        assert!(matches!(
            dense_spectrum_capped(&big, 5),
            Err(Error::ResourceCap(_))
        ));
    }

    #[test]
    fn topk_on_diagonal() {
        let vals: Vec<Complex64> = (1..=10).map(|k| Complex64::new(k as f64, 0.0)).collect();
        let a = diag(&vals);
        let out = topk_eigs(&a, 3, 1e-10).unwrap();
        assert!(out.converged);
        let mut got: Vec<f64> = out.values.iter().map(|v| v.re).collect();
        got.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((got[0] - 10.0).abs() < 1e-8);
        assert!((got[1] - 9.0).abs() < 1e-8);
        assert!((got[2] - 8.0).abs() < 1e-8);
        // residual contract
        for (val, vec) in out.values.iter().zip(out.vectors.iter()) {
            let mut av = vec![ZERO; 10];
            a.matvec(vec, &mut av);
            axpy(-*val, vec, &mut av);
            assert!(norm2(&av) <= 1e-9 * val.norm());
        }
    }

    #[test]
    fn topk_matches_dense_on_te_matrix() {
        let (a, _, _, _) = te_matrix_16(8); // 3N = 192
        let mut dense = dense_spectrum(&a).unwrap();
        dense.sort_by(|p, q| q.norm().partial_cmp(&p.norm()).unwrap());
        let out = topk_eigs(&a, 3, 1e-8).unwrap();
        assert!(out.converged);
        // degenerate pairs make the ordering ambiguous; match as multisets
        let gap = greedy_match_distance(&out.values, &dense[..3]);
        let scale = dense[0].norm();
        assert!(gap <= 1e-6 * scale, "gap {gap} vs scale {scale}");
    }

    #[test]
    fn deflation_identity_for_r_zero() {
        let basis = DeflationBasis::identity(6);
        let x = pseudo_random_unit(6, 12);
        let mut y = vec![ZERO; 6];
        basis.apply(&x, &mut y);
        assert_eq!(x, y);
    }

    #[test]
    fn deflation_moves_top_eigenvalue_to_one() {
        // normal test matrix diag(10, 5, 1), deflate r = 1
        let a = diag(&[
            Complex64::new(10.0, 0.0),
            Complex64::new(5.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]);
        let e1 = vec![ONE, ZERO, ZERO];
        let basis = build_deflation(&a, &[Complex64::new(10.0, 0.0)], &[e1]).unwrap();
        // dense recomputation of A P^-1
        let mut ap = CMat::zeros(3, 3);
        for j in 0..3 {
            let mut ej = vec![ZERO; 3];
            ej[j] = ONE;
            let mut pj = vec![ZERO; 3];
            basis.apply(&ej, &mut pj);
            let mut col = vec![ZERO; 3];
            a.matvec(&pj, &mut col);
            for i in 0..3 {
                ap[(i, j)] = col[i];
            }
        }
        let mut eigs = dense_spectrum(&ap).unwrap();
        eigs.sort_by(|p, q| q.re.partial_cmp(&p.re).unwrap());
        assert!((eigs[0] - Complex64::new(5.0, 0.0)).norm() < 1e-10);
        assert!((eigs[1] - ONE).norm() < 1e-10);
        assert!((eigs[2] - ONE).norm() < 1e-10);
    }

    #[test]
    fn apply_deflation_identities() {
        let n = 24;
        let a = {
            let vals: Vec<Complex64> = (0..n)
                .map(|k| Complex64::new(1.0 + k as f64, 0.1 * (k % 5) as f64))
                .collect();
            diag(&vals)
        };
        let out = topk_eigs(&a, 4, 1e-12).unwrap();
        let basis = build_deflation(&a, &out.values, &out.vectors).unwrap();

        // x orthogonal to span(V): x unchanged
        let mut x = pseudo_random_unit(n, 77);
        for vi in basis.basis() {
            let c = dotc(vi, &x);
            axpy(-c, vi, &mut x);
        }
        let mut y = vec![ZERO; n];
        basis.apply(&x, &mut y);
        let mut diff = 0.0_f64;
        for (p, q) in x.iter().zip(y.iter()) {
            diff = diff.max((p - q).norm());
        }
        assert!(diff < 1e-12);

        // x = V e1: result is x / T11 when T is diagonal (it is, A normal here)
        let v0 = basis.basis()[0].clone();
        let mut y = vec![ZERO; n];
        basis.apply(&v0, &mut y);
        let t11 = basis.t()[(0, 0)];
        for (p, q) in v0.iter().zip(y.iter()) {
            assert!((p / t11 - q).norm() < 1e-10);
        }

        // random x: dense P^-1 formula vs the O(nr) application
        let x = pseudo_random_unit(n, 78);
        let mut y = vec![ZERO; n];
        basis.apply(&x, &mut y);
        // dense: P = I + V (T^-1 - I) V^H
        let r = basis.r;
        let mut vmat = CMat::zeros(n, r);
        for (j, vj) in basis.basis().iter().enumerate() {
            for i in 0..n {
                vmat[(i, j)] = vj[i];
            }
        }
        let tinv = linalg::lu_factor(basis.t()).unwrap().inverse();
        let mut tinv_minus_i = tinv.clone();
        for i in 0..r {
            tinv_minus_i[(i, i)] -= ONE;
        }
        let p = {
            let inner = vmat.matmul(&tinv_minus_i).matmul(&vmat.adjoint());
            let mut p = CMat::identity(n);
            for i in 0..n {
                for j in 0..n {
                    p[(i, j)] += inner[(i, j)];
                }
            }
            p
        };
        let mut y_dense = vec![ZERO; n];
        p.matvec(&x, &mut y_dense);
        for (p, q) in y.iter().zip(y_dense.iter()) {
            assert!((p - q).norm() < 1e-13);
        }
    }

    #[test]
    fn build_deflation_rejects_dependent_vectors() {
        let a = CMat::identity(8);
        let v1 = pseudo_random_unit(8, 1);
        let v2 = v1.clone();
        assert!(matches!(
            build_deflation(&a, &[ONE, ONE], &[v1, v2]),
            Err(Error::DegenerateBasis(_))
        ));
    }

    #[test]
    fn eigenvalue_map_examples() {
        let eps = Complex64::new(16.0, 0.0);
        assert!((map_eigenvalue(ONE, eps).unwrap() - ONE).norm() < 1e-15);
        assert!((map_eigenvalue(eps, eps).unwrap() - ONE).norm() < 1e-15);
        // max over the real segment [1, 16]
        let mut best = 0.0_f64;
        for k in 0..=100000 {
            let lam = Complex64::new(1.0 + 15.0 * k as f64 / 100000.0, 0.0);
            best = best.max(map_eigenvalue(lam, eps).unwrap().norm());
        }
        assert!((best - 4.515625).abs() < 1e-6);
        assert!(map_eigenvalue(ONE, ZERO).is_err());
    }

    #[test]
    fn eigenvalue_map_consistent_with_two_step_form() {
        // lambda = 1 - beta chi and lambda' = (1 - beta chi')(1 - beta chi)
        // must satisfy lambda' = map(lambda) for any beta
        let eps = Complex64::new(-16.0, 1.5);
        let chi = eps - ONE;
        let chi_p = ONE / eps - ONE;
        for k in 0..100 {
            let beta = Complex64::new(
                (k as f64 * 0.11).sin() * 2.0,
                (k as f64 * 0.07).cos() * 1.5,
            );
            let lam = ONE - beta * chi;
            let lam_p = (ONE - beta * chi_p) * lam;
            let mapped = map_eigenvalue(lam, eps).unwrap();
            assert!(
                (mapped - lam_p).norm() <= 1e-14 * lam_p.norm().max(1.0),
                "beta {beta}: {mapped} vs {lam_p}"
            );
        }
    }

    #[test]
    fn deflation_radius_values() {
        let r = deflation_radius(&[Complex64::new(16.0, 0.0)]).unwrap();
        assert!((r - 4.515625).abs() < 1e-4);
        let r = deflation_radius(&[ONE]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(deflation_radius(&[]).is_err());
        // 1000-point discretization against the 1e6-point refinement oracle
        let mats = [Complex64::new(-16.0, 1.5)];
        let coarse = deflation_radius(&mats).unwrap();
        let fine = deflation_radius_with_resolution(&mats, 1_000_000).unwrap();
        assert!((coarse - fine).abs() <= 1e-4 * fine);
    }

    #[test]
    fn wedge_reduces_to_lower_half_plane_when_lossless() {
        let bg = Background::unit();
        let mats = [Complex64::new(16.0, 0.0)];
        // Im lambda <= 0: no violations
        let ok = [
            ONE,
            Complex64::new(5.0, -2.0),
            Complex64::new(16.0, 0.0),
            Complex64::new(-3.0, -0.5),
        ];
        let rep = wedge_check(&ok, &mats, &bg, None);
        assert_eq!(rep.violations, 0);
        // a clearly positive imaginary part violates
        let bad = [Complex64::new(5.0, 0.1)];
        let rep = wedge_check(&bad, &mats, &bg, None);
        assert_eq!(rep.violations, 1);
        assert!(rep.max_violation > 0.0);
        // boundary point lambda = 1 sits exactly on the margin
        let rep = wedge_check(&[ONE], &mats, &bg, None);
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn beta_vacuum_is_zero() {
        let bg = Background::unit();
        let spec = ScattererSpec::HomogeneousSquare {
            side: 1.0,
            center: [0.0, 0.0],
            eps_rel: ONE,
            mu_rel: ONE,
        };
        let grids = [Grid::square_for_domain(1.0, 1.0 / 6.0).unwrap()];
        let beta = estimate_beta(&spec, &grids, &bg).unwrap();
        assert_eq!(beta, 0.0);
    }

    #[test]
    fn segment_distance_and_tube() {
        let e16 = Complex64::new(16.0, 0.0);
        assert!((distance_to_segment(Complex64::new(8.0, 0.3), e16) - 0.3).abs() < 1e-12);
        assert!((distance_to_segment(Complex64::new(0.0, 0.0), e16) - 1.0).abs() < 1e-12);
        assert!((distance_to_segment(Complex64::new(18.0, 0.0), e16) - 2.0).abs() < 1e-12);
        let eigs = [
            Complex64::new(2.0, 0.01),
            Complex64::new(17.0, 0.0),
            Complex64::new(5.0, 3.0),
        ];
        assert_eq!(tube_count(&eigs, e16, 0.75), 1);
    }

    #[test]
    fn greedy_matching_on_shuffled_sets() {
        let a = pseudo_random_unit(40, 3);
        let mut b = a.clone();
        b.reverse();
        assert!(greedy_match_distance(&a, &b) < 1e-15);
        b[0] += Complex64::new(1e-3, 0.0);
        let d = greedy_match_distance(&a, &b);
        assert!(d <= 1.1e-3 && d >= 1e-4);
    }
}
