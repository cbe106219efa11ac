//! Dense complex linear algebra: storage, LU, Hessenberg reduction, the
//! shifted-QR eigenvalue iteration, Schur form with reordering, and inverse
//! iteration. Self-contained; sized for the desk-scale diagnostic matrices
//! (dimension up to a few thousand).

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CMat {
            n_rows,
            n_cols,
            data: vec![ZERO; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let row = self.row(i);
            let mut acc = ZERO;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            y[i] = acc;
        }
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n_cols, other.n_rows);
        let mut c = CMat::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let aik = self[(i, k)];
                if aik == ZERO {
                    continue;
                }
                let brow = &other.data[k * other.n_cols..(k + 1) * other.n_cols];
                let crow = &mut c.data[i * other.n_cols..(i + 1) * other.n_cols];
                for (cj, bj) in crow.iter_mut().zip(brow.iter()) {
                    *cj += aik * bj;
                }
            }
        }
        c
    }

    pub fn adjoint(&self) -> CMat {
        let mut t = CMat::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)].conj();
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn one_norm(&self) -> f64 {
        let mut best = 0.0_f64;
        for j in 0..self.n_cols {
            let mut s = 0.0;
            for i in 0..self.n_rows {
                s += self[(i, j)].norm();
            }
            best = best.max(s);
        }
        best
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n_cols + j]
    }
}

// ---------------------------------------------------------------------------
// Vector helpers.
// ---------------------------------------------------------------------------

#[inline]
pub fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = ZERO;
    for (x, y) in a.iter().zip(b.iter()) {
        s += x.conj() * y;
    }
    s
}

#[inline]
pub fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[inline]
pub fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: Complex64, x: &mut [Complex64]) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}

/// Deterministic pseudo-random complex vector (splitmix64 core), unit norm.
pub fn pseudo_random_unit(n: usize, seed: u64) -> Vec<Complex64> {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| {
            let re = (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            let im = (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            Complex64::new(re, im)
        })
        .collect();
    let nrm = norm2(&v);
    scale(Complex64::new(1.0 / nrm, 0.0), &mut v);
    v
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Errors out when a
/// vector loses essentially all of its norm to the span of the previous ones.
pub fn orthonormalize(vectors: &mut [Vec<Complex64>]) -> Result<()> {
    for i in 0..vectors.len() {
        let before = norm2(&vectors[i]);
        if before == 0.0 {
            return Err(Error::DegenerateBasis(format!("vector {i} is zero")));
        }
        for _pass in 0..2 {
            for j in 0..i {
                let (head, tail) = vectors.split_at_mut(i);
                let coeff = dotc(&head[j], &tail[0]);
                axpy(-coeff, &head[j], &mut tail[0]);
            }
        }
        let after = norm2(&vectors[i]);
        if after <= 1e-8 * before {
            return Err(Error::DegenerateBasis(format!(
                "vector {i} is numerically in the span of its predecessors"
            )));
        }
        scale(Complex64::new(1.0 / after, 0.0), &mut vectors[i]);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// LU with partial pivoting.
// ---------------------------------------------------------------------------

pub struct Lu {
    lu: CMat,
    piv: Vec<usize>,
}

pub fn lu_factor(a: &CMat) -> Result<Lu> {
    assert!(a.is_square());
    let n = a.n_rows;
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].norm();
        for i in k + 1..n {
            let v = lu[(i, k)].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(Error::NumericalFailure(format!(
                "singular matrix in LU at column {k}"
            )));
        }
        if p != k {
            piv.swap(k, p);
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let m = lu[(i, k)] / pivot;
            lu[(i, k)] = m;
            if m == ZERO {
                continue;
            }
            let (top, bottom) = lu.data.split_at_mut(i * n);
            let krow = &top[k * n..k * n + n];
            let irow = &mut bottom[..n];
            for j in k + 1..n {
                irow[j] -= m * krow[j];
            }
        }
    }
    Ok(Lu { lu, piv })
}

impl Lu {
    pub fn n(&self) -> usize {
        self.lu.n_rows
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n();
        assert_eq!(b.len(), n);
        let permuted: Vec<Complex64> = self.piv.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        for i in 0..n {
            let mut acc = b[i];
            let row = self.lu.row(i);
            for j in 0..i {
                acc -= row[j] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            let row = self.lu.row(i);
            for j in i + 1..n {
                acc -= row[j] * b[j];
            }
            b[i] = acc / row[i];
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Exact inverse (small systems only).
    pub fn inverse(&self) -> CMat {
        let n = self.n();
        let mut inv = CMat::zeros(n, n);
        let mut col = vec![ZERO; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = ZERO);
            col[j] = ONE;
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// 1-norm condition number via the exact inverse; fine for the small
/// projected matrices it is used on.
pub fn cond_one(a: &CMat) -> Result<f64> {
    let lu = lu_factor(a)?;
    Ok(a.one_norm() * lu.inverse().one_norm())
}

// ---------------------------------------------------------------------------
// Balancing and Hessenberg reduction.
// ---------------------------------------------------------------------------

/// Parlett-Reinsch balancing with radix-2 scaling (similarity transform,
/// eigenvalues unchanged).
fn balance(a: &mut CMat) {
    let n = a.n_rows;
    let radix: f64 = 2.0;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    r += a[(i, j)].norm();
                    c += a[(j, i)].norm();
                }
            }
            if r == 0.0 || c == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = r + c;
            let mut cc = c;
            while cc < r / radix {
                f *= radix;
                cc *= radix * radix;
            }
            while cc > r * radix {
                f /= radix;
                cc /= radix * radix;
            }
            if (cc + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)].scale(g);
                }
                for j in 0..n {
                    a[(j, i)] = a[(j, i)].scale(f);
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Reduce to upper Hessenberg by Hermitian Householder reflectors. When `q`
/// is given it accumulates the transform (A = Q H Q^H).
fn hessenberg(a: &mut CMat, mut q: Option<&mut CMat>) {
    let n = a.n_rows;
    if let Some(qm) = q.as_deref_mut() {
        *qm = CMat::identity(n);
    }
    let mut v = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let mut norm_x = 0.0;
        for i in k + 1..n {
            norm_x += a[(i, k)].norm_sqr();
        }
        let norm_x = norm_x.sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x1 = a[(k + 1, k)];
        let phase = if x1 == ZERO {
            ONE
        } else {
            x1 / x1.norm()
        };
        // v = x + phase * |x| e1; P = I - 2 v v^H / (v^H v) is Hermitian unitary
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] += phase * norm_x;
        let vnorm2: f64 = v[k + 1..n].iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // left: A <- P A  (rows k+1.., all columns)
        for j in k..n {
            let mut s = ZERO;
            for i in k + 1..n {
                s += v[i].conj() * a[(i, j)];
            }
            s *= beta;
            for i in k + 1..n {
                let vi = v[i];
                a[(i, j)] -= s * vi;
            }
        }
        // right: A <- A P  (all rows, columns k+1..)
        for i in 0..n {
            let mut s = ZERO;
            for j in k + 1..n {
                s += a[(i, j)] * v[j];
            }
            s *= beta;
            for j in k + 1..n {
                a[(i, j)] -= s * v[j].conj();
            }
        }
        if let Some(qm) = q.as_deref_mut() {
            for i in 0..n {
                let mut s = ZERO;
                for j in k + 1..n {
                    s += qm[(i, j)] * v[j];
                }
                s *= beta;
                for j in k + 1..n {
                    qm[(i, j)] -= s * v[j].conj();
                }
            }
        }
        for i in k + 2..n {
            a[(i, k)] = ZERO;
        }
    }
}

// ---------------------------------------------------------------------------
// Shifted QR iteration on a Hessenberg matrix.
// ---------------------------------------------------------------------------

/// Givens rotation: returns (c, s) with c real such that
/// [c s; -conj(s) c] [f; g] = [r; 0].
#[inline]
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    if g == ZERO {
        return (1.0, ZERO);
    }
    if f == ZERO {
        return (0.0, g.conj() / g.norm());
    }
    let d = (f.norm_sqr() + g.norm_sqr()).sqrt();
    let c = f.norm() / d;
    let s = (f / f.norm()) * g.conj() / d;
    (c, s)
}

#[inline]
fn row_rot(h: &mut CMat, r1: usize, r2: usize, j0: usize, j1: usize, c: f64, s: Complex64) {
    let n = h.n_cols;
    let (lo, hi) = (r1.min(r2), r1.max(r2));
    debug_assert_eq!(hi, lo + 1);
    let (top, bottom) = h.data.split_at_mut(hi * n);
    let row1 = &mut top[lo * n..lo * n + n];
    let row2 = &mut bottom[..n];
    for j in j0..=j1 {
        let a = row1[j];
        let b = row2[j];
        row1[j] = a.scale(c) + s * b;
        row2[j] = -s.conj() * a + b.scale(c);
    }
}

#[inline]
fn col_rot(h: &mut CMat, c1: usize, c2: usize, i0: usize, i1: usize, c: f64, s: Complex64) {
    for i in i0..=i1 {
        let a = h[(i, c1)];
        let b = h[(i, c2)];
        h[(i, c1)] = a.scale(c) + s.conj() * b;
        h[(i, c2)] = -s * a + b.scale(c);
    }
}

/// Eigenvalue of the trailing 2x2 block closest to its (2,2) entry.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - det.scale(4.0)).sqrt();
    let l1 = (tr + disc).scale(0.5);
    let l2 = (tr - disc).scale(0.5);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn subdiag_negligible(h: &CMat, i: usize) -> bool {
    let s = h[(i - 1, i - 1)].norm() + h[(i, i)].norm();
    let s = if s == 0.0 { h.max_abs() } else { s };
    h[(i, i - 1)].norm() <= f64::EPSILON * s + f64::MIN_POSITIVE
}

/// Shifted QR on an upper Hessenberg matrix.
///
/// `full` updates entire rows/columns and accumulates `q` (Schur mode);
/// otherwise updates stay inside the active window (eigenvalues only).
fn qr_hessenberg(h: &mut CMat, mut q: Option<&mut CMat>, full: bool) -> Result<()> {
    let n = h.n_rows;
    if n == 0 {
        return Ok(());
    }
    let mut hi = n - 1;
    let mut since_deflate = 0usize;
    let mut total = 0usize;
    let max_total = 60 * n + 200;
    loop {
        // peel off converged eigenvalues from the bottom
        while hi > 0 && subdiag_negligible(h, hi) {
            h[(hi, hi - 1)] = ZERO;
            hi -= 1;
            since_deflate = 0;
        }
        if hi == 0 {
            return Ok(());
        }
        // active window [lo..=hi]
        let mut lo = hi;
        while lo > 0 && !subdiag_negligible(h, lo) {
            lo -= 1;
        }
        if lo > 0 {
            h[(lo, lo - 1)] = ZERO;
        }

        total += 1;
        since_deflate += 1;
        if total > max_total {
            return Err(Error::NumericalFailure(
                "QR iteration exceeded its sweep budget".into(),
            ));
        }

        let sigma = if since_deflate % 12 == 0 {
            // exceptional shift to break symmetry-induced stalls
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        let sigma = if sigma.is_finite() { sigma } else { h[(hi, hi)] };

        // implicit single-shift bulge chase over [lo..=hi]
        let mut x = h[(lo, lo)] - sigma;
        let mut z = h[(lo + 1, lo)];
        for k in lo..hi {
            let (c, s) = givens(x, z);
            let j0 = if k == lo { k } else { k - 1 };
            let (row_end, col_end_row) = if full {
                (n - 1, n - 1)
            } else {
                (hi, hi.min(k + 2))
            };
            let col_start = if full { 0 } else { lo };
            row_rot(h, k, k + 1, j0, row_end, c, s);
            col_rot(h, k, k + 1, col_start, col_end_row, c, s);
            if let Some(qm) = q.as_deref_mut() {
                let qn = qm.n_rows - 1;
                col_rot(qm, k, k + 1, 0, qn, c, s);
            }
            if k + 2 <= hi {
                x = h[(k + 1, k)];
                z = h[(k + 2, k)];
            }
        }
    }
}

/// All eigenvalues of a general complex matrix.
pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    assert!(a.is_square());
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h, None);
    qr_hessenberg(&mut h, None, false)?;
    Ok((0..h.n_rows).map(|i| h[(i, i)]).collect())
}

/// Schur decomposition A = Q T Q^H (T upper triangular).
pub fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    assert!(a.is_square());
    let mut t = a.clone();
    let mut q = CMat::identity(a.n_rows);
    hessenberg(&mut t, Some(&mut q));
    qr_hessenberg(&mut t, Some(&mut q), true)?;
    // clean the strictly-lower triangle (rounding residue of the chase)
    for i in 0..t.n_rows {
        for j in 0..i {
            t[(i, j)] = ZERO;
        }
    }
    Ok((t, q))
}

/// Swap the adjacent diagonal entries i, i+1 of a triangular T by a unitary
/// similarity, updating Q alongside.
fn schur_swap(t: &mut CMat, q: &mut CMat, i: usize) {
    let a = t[(i, i)];
    let b = t[(i, i + 1)];
    let d = t[(i + 1, i + 1)];
    // eigenvector of [[a, b], [0, d]] for eigenvalue d
    let v1 = b;
    let v2 = d - a;
    let nrm = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if nrm <= f64::EPSILON * (a.norm() + d.norm() + b.norm()) {
        return; // numerically identical eigenvalues; nothing to reorder
    }
    let (u1, u2) = (v1 / nrm, v2 / nrm);
    // G = [[u1, -conj(u2)], [u2, conj(u1)]], first column is the eigenvector
    let n = t.n_rows;
    // T <- G^H T G: rows i, i+1 then columns i, i+1
    for j in 0..n {
        let x = t[(i, j)];
        let y = t[(i + 1, j)];
        t[(i, j)] = u1.conj() * x + u2.conj() * y;
        t[(i + 1, j)] = -u2 * x + u1 * y;
    }
    for r in 0..n {
        let x = t[(r, i)];
        let y = t[(r, i + 1)];
        t[(r, i)] = x * u1 + y * u2;
        t[(r, i + 1)] = -x * u2.conj() + y * u1.conj();
    }
    for r in 0..q.n_rows {
        let x = q[(r, i)];
        let y = q[(r, i + 1)];
        q[(r, i)] = x * u1 + y * u2;
        q[(r, i + 1)] = -x * u2.conj() + y * u1.conj();
    }
    t[(i + 1, i)] = ZERO;
}

/// Reorder a Schur form so the diagonal is sorted by descending magnitude.
pub fn reorder_schur_desc(t: &mut CMat, q: &mut CMat) {
    let n = t.n_rows;
    for target in 0..n {
        let mut best = target;
        let mut best_mag = t[(target, target)].norm();
        for j in target + 1..n {
            let m = t[(j, j)].norm();
            if m > best_mag {
                best_mag = m;
                best = j;
            }
        }
        let mut pos = best;
        while pos > target {
            schur_swap(t, q, pos - 1);
            pos -= 1;
        }
    }
}

/// Eigenvector of a triangular matrix for the eigenvalue at position `idx`
/// (unit norm; back substitution with protected denominators).
pub fn triangular_eigenvector(t: &CMat, idx: usize) -> Vec<Complex64> {
    let n = t.n_rows;
    let lambda = t[(idx, idx)];
    let mut y = vec![ZERO; n];
    y[idx] = ONE;
    let scale_t = t.max_abs().max(1.0);
    for j in (0..idx).rev() {
        let mut s = ZERO;
        for k in j + 1..=idx {
            s += t[(j, k)] * y[k];
        }
        let mut den = t[(j, j)] - lambda;
        if den.norm() < 1e-300 + f64::EPSILON * scale_t {
            den = Complex64::new(f64::EPSILON * scale_t, 0.0);
        }
        y[j] = -s / den;
    }
    let nrm = norm2(&y);
    scale(Complex64::new(1.0 / nrm, 0.0), &mut y);
    y
}

/// A few steps of inverse iteration around `lambda`; returns a unit vector.
pub fn inverse_iteration(a: &CMat, lambda: Complex64, seed: u64) -> Result<Vec<Complex64>> {
    let n = a.n_rows;
    let shift = lambda
        + Complex64::new(
            a.frobenius() * f64::EPSILON * 8.0 + f64::MIN_POSITIVE,
            0.0,
        );
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = match lu_factor(&shifted) {
        Ok(lu) => lu,
        Err(_) => {
            // exactly singular shift: nudge a bit more
            for i in 0..n {
                shifted[(i, i)] -= Complex64::new(1e-12 * (1.0 + a.max_abs()), 0.0);
            }
            lu_factor(&shifted)?
        }
    };
    let mut v = pseudo_random_unit(n, seed);
    for _ in 0..3 {
        lu.solve_in_place(&mut v);
        let nrm = norm2(&v);
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::NumericalFailure("inverse iteration blew up".into()));
        }
        scale(Complex64::new(1.0 / nrm, 0.0), &mut v);
    }
    Ok(v)
}
