//! The discrete DIE operator: dense assembly for desk-scale spectra and the
//! matrix-free circulant-embedded FFT application used for solving, plus the
//! regularizer composition and the incident-field right-hand sides.
//!
//! TE unknowns are the node values of (E1, E2, H3), stacked in three blocks
//! of length N. The nonmagnetic TM problem is the scalar N-vector of E3
//! values; magnetic TM runs through the TE machinery on the dual medium.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fft::{next_fast_size, Fft2};
use crate::kernels::{self, KernelSample};
use crate::linalg::{CMat, ZERO};
use crate::medium::{Background, Grid, MediumMap};

/// Default dense-assembly cap on the system dimension (3N for TE).
pub const DENSE_DIM_CAP: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// (E1, E2, H3) system of size 3N.
    Te,
    /// Scalar nonmagnetic E3 system of size N.
    Tm,
}

/// Incident plane-wave convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncidentConvention {
    /// The component formulas exactly as tabulated for the discrete system.
    PaperVerbatim,
    /// A true source-free plane wave: H3 = exp(i k_b x.d),
    /// (E1, E2) = Z_b (-sin psi, cos psi) H3.
    MaxwellConsistent,
}

/// Field unknowns over the grid, one length-N block per component.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub data: Vec<Complex64>,
    pub components: usize,
    pub n: usize,
}

impl FieldVector {
    pub fn zeros(components: usize, n: usize) -> Self {
        FieldVector {
            data: vec![ZERO; components * n],
            components,
            n,
        }
    }

    pub fn from_data(data: Vec<Complex64>, components: usize) -> Result<Self> {
        if components == 0 || data.len() % components != 0 {
            return Err(Error::SizeMismatch(format!(
                "vector of length {} does not split into {} blocks",
                data.len(),
                components
            )));
        }
        let n = data.len() / components;
        Ok(FieldVector {
            data,
            components,
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.n..(c + 1) * self.n]
    }

    pub fn block_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.n..(c + 1) * self.n]
    }
}

/// Matrix-free linear map interface shared by operators, compositions, and
/// dense matrices.
pub trait LinearMap {
    fn dim(&self) -> usize;
    fn apply_to(&self, x: &[Complex64], y: &mut [Complex64]);
}

impl LinearMap for CMat {
    fn dim(&self) -> usize {
        self.n_rows
    }
    fn apply_to(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matvec(x, y);
    }
}

/// y = outer(inner(x)); used for the regularized system A_R A.
pub struct Composed<'a> {
    pub outer: &'a dyn LinearMap,
    pub inner: &'a dyn LinearMap,
}

impl LinearMap for Composed<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply_to(&self, x: &[Complex64], y: &mut [Complex64]) {
        let mut mid = vec![ZERO; self.inner.dim()];
        self.inner.apply_to(x, &mut mid);
        self.outer.apply_to(&mid, y);
    }
}

/// Kernel lag table over di in [-(n1-1), n1-1], dj in [-(n2-1), n2-1],
/// shared by the dense and FFT assembly routes so equal lags give bitwise
/// equal entries. The zero-lag slot holds zeros (the diagonal lives in the
/// self terms).
struct LagTable {
    n1: usize,
    n2: usize,
    samples: Vec<KernelSample>,
}

impl LagTable {
    fn build(grid: &Grid, bg: &Background) -> Result<Self> {
        let (n1, n2) = (grid.n1, grid.n2);
        let w = 2 * n1 - 1;
        let hgt = 2 * n2 - 1;
        let zero_sample = KernelSample {
            t11: ZERO,
            t12: ZERO,
            t22: ZERO,
            t13: ZERO,
            t23: ZERO,
            t33: ZERO,
        };
        let mut samples = vec![zero_sample; w * hgt];
        for dj in -(n2 as isize - 1)..=(n2 as isize - 1) {
            for di in -(n1 as isize - 1)..=(n1 as isize - 1) {
                if di == 0 && dj == 0 {
                    continue;
                }
                let lag = [di as f64 * grid.h, dj as f64 * grid.h];
                let idx = (di + n1 as isize - 1) as usize
                    + (dj + n2 as isize - 1) as usize * w;
                samples[idx] = kernels::offdiag_block(lag, bg, grid.h)?;
            }
        }
        Ok(LagTable { n1, n2, samples })
    }

    #[inline]
    fn at(&self, di: isize, dj: isize) -> &KernelSample {
        let w = 2 * self.n1 - 1;
        &self.samples[(di + self.n1 as isize - 1) as usize
            + (dj + self.n2 as isize - 1) as usize * w]
    }
}

/// Precomputed kernel spectra on the circulant embedding; shared between an
/// operator and its regularizer (the Green's tensor does not depend on the
/// contrast).
struct KernelSpectra {
    fft: Fft2,
    t11: Vec<Complex64>,
    t12: Vec<Complex64>,
    t22: Vec<Complex64>,
    t13: Vec<Complex64>,
    t23: Vec<Complex64>,
    t33: Vec<Complex64>,
}

impl KernelSpectra {
    fn build(table: &LagTable, grid: &Grid) -> Self {
        let p1 = next_fast_size(2 * grid.n1 - 1);
        let p2 = next_fast_size(2 * grid.n2 - 1);
        let fft = Fft2::new(p1, p2);
        let np = fft.len();
        let mut arrays = [
            vec![ZERO; np],
            vec![ZERO; np],
            vec![ZERO; np],
            vec![ZERO; np],
            vec![ZERO; np],
            vec![ZERO; np],
        ];
        for dj in -(grid.n2 as isize - 1)..=(grid.n2 as isize - 1) {
            for di in -(grid.n1 as isize - 1)..=(grid.n1 as isize - 1) {
                let s = table.at(di, dj);
                let idx = di.rem_euclid(p1 as isize) as usize
                    + dj.rem_euclid(p2 as isize) as usize * p1;
                arrays[0][idx] = s.t11;
                arrays[1][idx] = s.t12;
                arrays[2][idx] = s.t22;
                arrays[3][idx] = s.t13;
                arrays[4][idx] = s.t23;
                arrays[5][idx] = s.t33;
            }
        }
        let norm = Complex64::new(1.0 / np as f64, 0.0);
        for arr in arrays.iter_mut() {
            fft.forward(arr);
            for v in arr.iter_mut() {
                *v *= norm;
            }
        }
        let [t11, t12, t22, t13, t23, t33] = arrays;
        KernelSpectra {
            fft,
            t11,
            t12,
            t22,
            t13,
            t23,
            t33,
        }
    }
}

/// The discrete DIE operator with O(N log N) application.
pub struct DieOperator {
    pub grid: Grid,
    pub bg: Background,
    pub medium: MediumMap,
    pub polarization: Polarization,
    spectra: Arc<KernelSpectra>,
    /// Diagonal of the two electric rows (TE) or of the scalar system (TM).
    d_e: Vec<Complex64>,
    /// Diagonal of the field row (TE only).
    d_h: Vec<Complex64>,
    has_magnetic: bool,
    size: usize,
}

impl DieOperator {
    /// Build the operator with precomputed kernel spectra (the fast path).
    pub fn build_fast(
        medium: &MediumMap,
        grid: &Grid,
        bg: &Background,
        polarization: Polarization,
    ) -> Result<Self> {
        check_medium_grid(medium, grid)?;
        if polarization == Polarization::Tm && !medium.is_nonmagnetic() {
            return Err(Error::Unsupported(
                "magnetic TM is handled by the TE machinery on the dual medium \
                 (build_tm_via_duality)"
                    .into(),
            ));
        }
        let table = LagTable::build(grid, bg)?;
        let spectra = Arc::new(KernelSpectra::build(&table, grid));
        Self::from_parts(medium.clone(), *grid, *bg, polarization, spectra)
    }

    /// Scalar nonmagnetic TM operator (size N).
    pub fn build_tm(medium: &MediumMap, grid: &Grid, bg: &Background) -> Result<Self> {
        Self::build_fast(medium, grid, bg, Polarization::Tm)
    }

    /// Magnetic TM via eps <-> mu duality; the unknowns become (H1, H2, E3).
    pub fn build_tm_via_duality(
        medium: &MediumMap,
        grid: &Grid,
        bg: &Background,
    ) -> Result<Self> {
        let dual_bg = Background::new(bg.mu_b, bg.eps_b, bg.omega)?;
        Self::build_fast(&medium.dual(), grid, &dual_bg, Polarization::Te)
    }

    /// Same Green's tensor, different medium (shares the kernel spectra).
    pub fn with_medium(&self, medium: &MediumMap) -> Result<Self> {
        check_medium_grid(medium, &self.grid)?;
        if self.polarization == Polarization::Tm && !medium.is_nonmagnetic() {
            return Err(Error::Unsupported("scalar TM medium must be nonmagnetic".into()));
        }
        Self::from_parts(
            medium.clone(),
            self.grid,
            self.bg,
            self.polarization,
            Arc::clone(&self.spectra),
        )
    }

    /// The multiplicative regularizer A(chi'_e): contrast eps_b/eps - 1,
    /// zero magnetic contrast.
    pub fn regularizer(&self) -> Result<Self> {
        self.with_medium(&self.medium.regularizer())
    }

    fn from_parts(
        medium: MediumMap,
        grid: Grid,
        bg: Background,
        polarization: Polarization,
        spectra: Arc<KernelSpectra>,
    ) -> Result<Self> {
        let n = grid.len();
        let mut d_e = Vec::with_capacity(n);
        let mut d_h = Vec::with_capacity(n);
        for m in 0..n {
            match polarization {
                Polarization::Te => {
                    let (de, dh) = kernels::self_terms(medium.chi_e[m], medium.chi_m[m], &bg, grid.h)?;
                    d_e.push(de);
                    d_h.push(dh);
                }
                Polarization::Tm => {
                    // A33-form self term driven by the electric contrast
                    let (_, d) = kernels::self_terms(ZERO, medium.chi_e[m], &bg, grid.h)?;
                    d_e.push(d);
                }
            }
        }
        let has_magnetic = !medium.is_nonmagnetic();
        let size = match polarization {
            Polarization::Te => 3 * n,
            Polarization::Tm => n,
        };
        Ok(DieOperator {
            grid,
            bg,
            medium,
            polarization,
            spectra,
            d_e,
            d_h,
            has_magnetic,
            size,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }

    /// y = A u through the circulant embedding (6 scalar convolutions for TE).
    pub fn apply_into(&self, u: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        if u.len() != self.size || y.len() != self.size {
            return Err(Error::SizeMismatch(format!(
                "operator size {} vs vectors {}/{}",
                self.size,
                u.len(),
                y.len()
            )));
        }
        match self.polarization {
            Polarization::Te => self.apply_te(u, y),
            Polarization::Tm => self.apply_tm(u, y),
        }
        Ok(())
    }

    pub fn apply(&self, u: &FieldVector) -> Result<FieldVector> {
        let mut out = FieldVector::zeros(u.components, u.n);
        self.apply_into(&u.data, &mut out.data)?;
        Ok(out)
    }

    fn pad_contrast(&self, u: &[Complex64], chi: &[Complex64]) -> Vec<Complex64> {
        let sp = &self.spectra;
        let (p1, _p2) = (sp.fft.p1, sp.fft.p2);
        let mut w = vec![ZERO; sp.fft.len()];
        for j in 0..self.grid.n2 {
            let src = &u[j * self.grid.n1..(j + 1) * self.grid.n1];
            let chs = &chi[j * self.grid.n1..(j + 1) * self.grid.n1];
            let dst = &mut w[j * p1..j * p1 + self.grid.n1];
            for ((d, s), c) in dst.iter_mut().zip(src.iter()).zip(chs.iter()) {
                *d = s * c;
            }
        }
        w
    }

    fn unpad_add(&self, w: &[Complex64], out: &mut [Complex64]) {
        let p1 = self.spectra.fft.p1;
        for j in 0..self.grid.n2 {
            let src = &w[j * p1..j * p1 + self.grid.n1];
            let dst = &mut out[j * self.grid.n1..(j + 1) * self.grid.n1];
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += s;
            }
        }
    }

    fn apply_te(&self, u: &[Complex64], y: &mut [Complex64]) {
        let n = self.grid.len();
        let sp = &self.spectra;
        let np = sp.fft.len();
        let q = self.bg.eps_b / self.bg.mu_b; // row-3 coupling carries omega eps_b

        let mut w1 = self.pad_contrast(&u[0..n], &self.medium.chi_e);
        let mut w2 = self.pad_contrast(&u[n..2 * n], &self.medium.chi_e);
        sp.fft.forward(&mut w1);
        sp.fft.forward(&mut w2);
        let w3 = if self.has_magnetic {
            let mut w3 = self.pad_contrast(&u[2 * n..3 * n], &self.medium.chi_m);
            sp.fft.forward(&mut w3);
            Some(w3)
        } else {
            None
        };

        let mut y1 = vec![ZERO; np];
        let mut y2 = vec![ZERO; np];
        let mut y3 = vec![ZERO; np];
        for k in 0..np {
            let a = w1[k];
            let b = w2[k];
            let mut r1 = sp.t11[k] * a + sp.t12[k] * b;
            let mut r2 = sp.t12[k] * a + sp.t22[k] * b;
            let mut r3 = q * (sp.t13[k] * a + sp.t23[k] * b);
            if let Some(w3) = &w3 {
                let c = w3[k];
                r1 += sp.t13[k] * c;
                r2 += sp.t23[k] * c;
                r3 += sp.t33[k] * c;
            }
            y1[k] = r1;
            y2[k] = r2;
            y3[k] = r3;
        }
        sp.fft.inverse(&mut y1);
        sp.fft.inverse(&mut y2);
        sp.fft.inverse(&mut y3);

        for m in 0..n {
            y[m] = self.d_e[m] * u[m];
            y[n + m] = self.d_e[m] * u[n + m];
            y[2 * n + m] = self.d_h[m] * u[2 * n + m];
        }
        self.unpad_add(&y1, &mut y[0..n]);
        self.unpad_add(&y2, &mut y[n..2 * n]);
        self.unpad_add(&y3, &mut y[2 * n..3 * n]);
    }

    fn apply_tm(&self, u: &[Complex64], y: &mut [Complex64]) {
        let sp = &self.spectra;
        let mut w = self.pad_contrast(u, &self.medium.chi_e);
        sp.fft.forward(&mut w);
        for (v, t) in w.iter_mut().zip(sp.t33.iter()) {
            *v *= t;
        }
        sp.fft.inverse(&mut w);
        for m in 0..self.grid.len() {
            y[m] = self.d_e[m] * u[m];
        }
        self.unpad_add(&w, y);
    }
}

impl LinearMap for DieOperator {
    fn dim(&self) -> usize {
        self.size
    }
    fn apply_to(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.apply_into(x, y).expect("dimension checked by caller");
    }
}

fn check_medium_grid(medium: &MediumMap, grid: &Grid) -> Result<()> {
    if medium.len() != grid.len() {
        return Err(Error::SizeMismatch(format!(
            "medium has {} nodes, grid {}",
            medium.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// A_R (A u): exactly two fast applications.
pub fn apply_regularized(
    op: &DieOperator,
    reg: &DieOperator,
    u: &FieldVector,
) -> Result<FieldVector> {
    check_compatible(op, reg)?;
    reg.apply(&op.apply(u)?)
}

/// Grid/background compatibility of an operator and its regularizer.
pub fn check_compatible(op: &DieOperator, reg: &DieOperator) -> Result<()> {
    if op.grid != reg.grid {
        return Err(Error::SizeMismatch("operator and regularizer grids differ".into()));
    }
    if op.bg != reg.bg {
        return Err(Error::SizeMismatch(
            "operator and regularizer backgrounds differ".into(),
        ));
    }
    if op.polarization != reg.polarization {
        return Err(Error::SizeMismatch("polarization mismatch".into()));
    }
    Ok(())
}

/// Test hook for the validation suite's negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelTweak {
    None,
    /// Flip the sign of the t12 coupling in the dense assembly.
    FlipT12Sign,
}

/// Dense 3N x 3N TE matrix (diagnostics and validation; capped dimension).
pub fn assemble_dense(medium: &MediumMap, grid: &Grid, bg: &Background) -> Result<CMat> {
    assemble_dense_capped(medium, grid, bg, DENSE_DIM_CAP, KernelTweak::None)
}

pub fn assemble_dense_capped(
    medium: &MediumMap,
    grid: &Grid,
    bg: &Background,
    cap: usize,
    tweak: KernelTweak,
) -> Result<CMat> {
    check_medium_grid(medium, grid)?;
    let n = grid.len();
    if 3 * n > cap {
        return Err(Error::ResourceCap(format!(
            "dense TE assembly needs 3N = {} > cap {}; use the FFT path",
            3 * n,
            cap
        )));
    }
    let table = LagTable::build(grid, bg)?;
    let q = bg.eps_b / bg.mu_b;
    let mut a = CMat::zeros(3 * n, 3 * n);
    let n1 = grid.n1 as isize;
    for row in 0..n {
        let (ri, rj) = ((row % grid.n1) as isize, (row / grid.n1) as isize);
        for col in 0..n {
            if row == col {
                let (de, dh) =
                    kernels::self_terms(medium.chi_e[row], medium.chi_m[row], bg, grid.h)?;
                a[(row, col)] = de;
                a[(n + row, n + col)] = de;
                a[(2 * n + row, 2 * n + col)] = dh;
                continue;
            }
            let (ci, cj) = ((col % grid.n1) as isize, (col / grid.n1) as isize);
            let _ = n1;
            let s = table.at(ri - ci, rj - cj);
            let t12 = match tweak {
                KernelTweak::None => s.t12,
                KernelTweak::FlipT12Sign => -s.t12,
            };
            let ce = medium.chi_e[col];
            let cm = medium.chi_m[col];
            a[(row, col)] = s.t11 * ce;
            a[(row, n + col)] = t12 * ce;
            a[(row, 2 * n + col)] = s.t13 * cm;
            a[(n + row, col)] = t12 * ce;
            a[(n + row, n + col)] = s.t22 * ce;
            a[(n + row, 2 * n + col)] = s.t23 * cm;
            a[(2 * n + row, col)] = q * s.t13 * ce;
            a[(2 * n + row, n + col)] = q * s.t23 * ce;
            a[(2 * n + row, 2 * n + col)] = s.t33 * cm;
        }
    }
    Ok(a)
}

/// Dense N x N scalar TM matrix.
pub fn assemble_dense_tm(medium: &MediumMap, grid: &Grid, bg: &Background) -> Result<CMat> {
    check_medium_grid(medium, grid)?;
    if !medium.is_nonmagnetic() {
        return Err(Error::Unsupported("scalar TM medium must be nonmagnetic".into()));
    }
    let n = grid.len();
    if n > DENSE_DIM_CAP {
        return Err(Error::ResourceCap(format!(
            "dense TM assembly needs N = {n} > cap {DENSE_DIM_CAP}; use the FFT path"
        )));
    }
    let table = LagTable::build(grid, bg)?;
    let mut a = CMat::zeros(n, n);
    for row in 0..n {
        let (ri, rj) = ((row % grid.n1) as isize, (row / grid.n1) as isize);
        for col in 0..n {
            if row == col {
                let (_, d) = kernels::self_terms(ZERO, medium.chi_e[row], bg, grid.h)?;
                a[(row, col)] = d;
                continue;
            }
            let (ci, cj) = ((col % grid.n1) as isize, (col / grid.n1) as isize);
            let s = table.at(ri - ci, rj - cj);
            a[(row, col)] = s.t33 * medium.chi_e[col];
        }
    }
    Ok(a)
}

/// TE incident plane wave at angle psi (radians from the x1 axis).
pub fn incident_plane_wave(
    grid: &Grid,
    bg: &Background,
    psi: f64,
    convention: IncidentConvention,
) -> FieldVector {
    let n = grid.len();
    let mut out = FieldVector::zeros(3, n);
    let (c, s) = (psi.cos(), psi.sin());
    let i = Complex64::new(0.0, 1.0);
    let zb = bg.impedance();
    for m in 0..n {
        let x = grid.position(m);
        let phase = (i * bg.k_b * (x[0] * c + x[1] * s)).exp();
        match convention {
            IncidentConvention::PaperVerbatim => {
                out.data[m] = phase;
                out.data[n + m] = -phase * bg.k_b * s / (bg.omega * bg.eps_b);
                out.data[2 * n + m] = phase * bg.k_b * c / (bg.omega * bg.eps_b);
            }
            IncidentConvention::MaxwellConsistent => {
                out.data[m] = -zb * s * phase;
                out.data[n + m] = zb * c * phase;
                out.data[2 * n + m] = phase;
            }
        }
    }
    out
}

/// Scalar TM incident plane wave (unit-amplitude E3).
pub fn incident_plane_wave_tm(grid: &Grid, bg: &Background, psi: f64) -> FieldVector {
    let n = grid.len();
    let mut out = FieldVector::zeros(1, n);
    let (c, s) = (psi.cos(), psi.sin());
    let i = Complex64::new(0.0, 1.0);
    for m in 0..n {
        let x = grid.position(m);
        out.data[m] = (i * bg.k_b * (x[0] * c + x[1] * s)).exp();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, pseudo_random_unit};
    use crate::medium::{rasterize, ScattererSpec};

    fn unit_bg() -> Background {
        Background::unit()
    }

    fn medium_square(grid: &Grid, eps: Complex64) -> MediumMap {
        let spec = ScattererSpec::HomogeneousSquare {
            side: grid.side(),
            center: [0.0, 0.0],
            eps_rel: eps,
            mu_rel: Complex64::new(1.0, 0.0),
        };
        rasterize(&spec, grid, &unit_bg()).unwrap()
    }

    fn medium_layered(grid: &Grid) -> MediumMap {
        let spec = ScattererSpec::LayeredSquare {
            outer_side: grid.side(),
            inner_side: grid.side() / 2.0,
            center: [0.0, 0.0],
            outer_eps_rel: Complex64::new(16.0, 0.0),
            inner_eps_rel: Complex64::new(2.5, 20.0),
        };
        rasterize(&spec, grid, &unit_bg()).unwrap()
    }

    fn vacuum(grid: &Grid) -> MediumMap {
        let one = Complex64::new(1.0, 0.0);
        MediumMap::new(vec![one; grid.len()], vec![one; grid.len()]).unwrap()
    }

    fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let mut diff = 0.0;
        let mut scale = 0.0;
        for (x, y) in a.iter().zip(b.iter()) {
            diff += (x - y).norm_sqr();
            scale += y.norm_sqr();
        }
        (diff / scale.max(1e-300)).sqrt()
    }

    #[test]
    fn single_node_is_diagonal() {
        let bg = unit_bg();
        let grid = Grid::new(1, 1, 0.05, [0.0, 0.0]).unwrap();
        let one = Complex64::new(1.0, 0.0);
        // vacuum: exact identity
        let m = MediumMap::new(vec![one], vec![one]).unwrap();
        let a = assemble_dense(&m, &grid, &bg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { one } else { ZERO };
                assert_eq!(a[(i, j)], want);
            }
        }
        // chi_e = 15: diagonal (d_E, d_E, 1), zero off-diagonals
        let m = MediumMap::new(vec![Complex64::new(16.0, 0.0)], vec![one]).unwrap();
        let a = assemble_dense(&m, &grid, &bg).unwrap();
        let (de, dh) = kernels::self_terms(Complex64::new(15.0, 0.0), ZERO, &bg, 0.05).unwrap();
        assert_eq!(a[(0, 0)], de);
        assert_eq!(a[(1, 1)], de);
        assert_eq!(a[(2, 2)], dh);
        assert_eq!(dh, one);
        assert_eq!(a[(0, 1)], ZERO);
        assert_eq!(a[(2, 0)], ZERO);
    }

    #[test]
    fn homogeneous_offdiagonals_linear_in_contrast() {
        let bg = unit_bg();
        let grid = Grid::new(2, 2, 0.07, [0.0, 0.0]).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let m1 = MediumMap::new(vec![Complex64::new(2.0, 0.0); 4], vec![one; 4]).unwrap();
        let m2 = MediumMap::new(vec![Complex64::new(5.5, 0.0); 4], vec![one; 4]).unwrap();
        let a1 = assemble_dense(&m1, &grid, &bg).unwrap();
        let a2 = assemble_dense(&m2, &grid, &bg).unwrap();
        // off-diagonal entries scale with chi (1.0 -> 4.5)
        for i in 0..12 {
            for j in 0..12 {
                if i % 4 == j % 4 && i / 4 == j / 4 {
                    continue;
                }
                let want = a1[(i, j)] * Complex64::new(4.5, 0.0);
                assert!((a2[(i, j)] - want).norm() <= 1e-13 * want.norm().max(1e-12));
            }
        }
    }

    #[test]
    fn dense_entries_depend_on_lag_only() {
        let bg = unit_bg();
        let grid = Grid::new(3, 3, 0.06, [-0.06, -0.06]).unwrap();
        let m = medium_square(&grid, Complex64::new(16.0, 0.0));
        let a = assemble_dense(&m, &grid, &bg).unwrap();
        // nodes (0,0)->(1,1) and (1,1)->(2,2) share the lag vector
        let r1 = grid.index(1, 1);
        let c1 = grid.index(0, 0);
        let r2 = grid.index(2, 2);
        let c2 = grid.index(1, 1);
        assert_eq!(a[(r1, c1)], a[(r2, c2)]);
        let n = grid.len();
        assert_eq!(a[(n + r1, c1)], a[(n + r2, c2)]);
        assert_eq!(a[(2 * n + r1, n + c1)], a[(2 * n + r2, n + c2)]);
    }

    #[test]
    fn vacuum_identity_to_machine_precision() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 1.0 / 7.0).unwrap();
        let op = DieOperator::build_fast(&vacuum(&grid), &grid, &bg, Polarization::Te).unwrap();
        let u = pseudo_random_unit(op.size(), 99);
        let mut y = vec![ZERO; op.size()];
        op.apply_into(&u, &mut y).unwrap();
        assert!(rel_err(&y, &u) <= 1e-14);

        let tm = DieOperator::build_tm(&vacuum(&grid), &grid, &bg).unwrap();
        let u = pseudo_random_unit(tm.size(), 100);
        let mut y = vec![ZERO; tm.size()];
        tm.apply_into(&u, &mut y).unwrap();
        assert!(rel_err(&y, &u) <= 1e-14);
    }

    #[test]
    fn fft_matches_dense_on_test_media() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 1.0 / 7.0).unwrap(); // 8x8
        let media = [
            medium_square(&grid, Complex64::new(16.0, 0.0)),
            medium_square(&grid, Complex64::new(-16.0, 1.5)),
            medium_layered(&grid),
        ];
        for medium in &media {
            let dense = assemble_dense(medium, &grid, &bg).unwrap();
            let op = DieOperator::build_fast(medium, &grid, &bg, Polarization::Te).unwrap();
            for trial in 0..10 {
                let u = pseudo_random_unit(op.size(), 7 + trial);
                let mut y_fast = vec![ZERO; op.size()];
                op.apply_into(&u, &mut y_fast).unwrap();
                let mut y_dense = vec![ZERO; op.size()];
                dense.matvec(&u, &mut y_dense);
                assert!(
                    rel_err(&y_fast, &y_dense) <= 1e-12,
                    "medium mismatch {}",
                    rel_err(&y_fast, &y_dense)
                );
            }
        }
    }

    #[test]
    fn fft_matches_dense_tm() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 1.0 / 7.0).unwrap();
        let medium = medium_square(&grid, Complex64::new(16.0, 0.0));
        let dense = assemble_dense_tm(&medium, &grid, &bg).unwrap();
        let op = DieOperator::build_tm(&medium, &grid, &bg).unwrap();
        for trial in 0..10 {
            let u = pseudo_random_unit(op.size(), 50 + trial);
            let mut y_fast = vec![ZERO; op.size()];
            op.apply_into(&u, &mut y_fast).unwrap();
            let mut y_dense = vec![ZERO; op.size()];
            dense.matvec(&u, &mut y_dense);
            assert!(rel_err(&y_fast, &y_dense) <= 1e-12);
        }
    }

    #[test]
    fn unit_columns_match_dense_columns() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 1.0 / 4.0).unwrap(); // 5x5
        let medium = medium_square(&grid, Complex64::new(16.0, 0.0));
        let dense = assemble_dense(&medium, &grid, &bg).unwrap();
        let op = DieOperator::build_fast(&medium, &grid, &bg, Polarization::Te).unwrap();
        for col in [0usize, 7, 26, 60, 74] {
            let mut u = vec![ZERO; op.size()];
            u[col] = Complex64::new(1.0, 0.0);
            let mut y = vec![ZERO; op.size()];
            op.apply_into(&u, &mut y).unwrap();
            for row in 0..op.size() {
                assert!((y[row] - dense[(row, col)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn apply_is_linear() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 1.0 / 6.0).unwrap();
        let medium = medium_layered(&grid);
        let op = DieOperator::build_fast(&medium, &grid, &bg, Polarization::Te).unwrap();
        let u = pseudo_random_unit(op.size(), 1);
        let v = pseudo_random_unit(op.size(), 2);
        let alpha = Complex64::new(0.3, -1.1);
        let beta = Complex64::new(-0.7, 0.2);
        let mut combo = vec![ZERO; op.size()];
        for i in 0..op.size() {
            combo[i] = alpha * u[i] + beta * v[i];
        }
        let mut y_combo = vec![ZERO; op.size()];
        op.apply_into(&combo, &mut y_combo).unwrap();
        let mut yu = vec![ZERO; op.size()];
        let mut yv = vec![ZERO; op.size()];
        op.apply_into(&u, &mut yu).unwrap();
        op.apply_into(&v, &mut yv).unwrap();
        let mut want = vec![ZERO; op.size()];
        for i in 0..op.size() {
            want[i] = alpha * yu[i] + beta * yv[i];
        }
        assert!(rel_err(&y_combo, &want) <= 1e-13);
    }

    #[test]
    fn regularized_apply_and_vacuum() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 1.0 / 5.0).unwrap();
        let op = DieOperator::build_fast(&vacuum(&grid), &grid, &bg, Polarization::Te).unwrap();
        let reg = op.regularizer().unwrap();
        let u = FieldVector::from_data(pseudo_random_unit(op.size(), 3), 3).unwrap();
        let y = apply_regularized(&op, &reg, &u).unwrap();
        assert!(rel_err(&y.data, &u.data) <= 1e-13);

        // chi' for eps/eps_b = 16 is -0.9375 at scatterer nodes
        let medium = medium_square(&grid, Complex64::new(16.0, 0.0));
        let op = DieOperator::build_fast(&medium, &grid, &bg, Polarization::Te).unwrap();
        let reg = op.regularizer().unwrap();
        for c in &reg.medium.chi_e {
            assert!((c.re + 0.9375).abs() < 1e-14 && c.im.abs() < 1e-14);
        }
        assert!(reg.medium.is_nonmagnetic());
    }

    #[test]
    fn plane_wave_conventions() {
        let bg = unit_bg();
        let grid = Grid::new(3, 3, 0.25, [0.0, 0.0]).unwrap();
        let b = incident_plane_wave(&grid, &bg, 0.0, IncidentConvention::PaperVerbatim);
        let n = grid.len();
        // node at the origin
        let zb = bg.impedance();
        assert!((b.data[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(b.data[n].norm() < 1e-14);
        assert!((b.data[2 * n] - zb).norm() < 1e-14);

        let b = incident_plane_wave(&grid, &bg, 0.0, IncidentConvention::MaxwellConsistent);
        assert!(b.data[0].norm() < 1e-14);
        assert!((b.data[n] - zb).norm() < 1e-14);
        assert!((b.data[2 * n] - Complex64::new(1.0, 0.0)).norm() < 1e-14);

        for conv in [
            IncidentConvention::PaperVerbatim,
            IncidentConvention::MaxwellConsistent,
        ] {
            let b = incident_plane_wave(&grid, &bg, 0.77, conv);
            for m in 0..n {
                let b1 = match conv {
                    IncidentConvention::PaperVerbatim => b.data[m],
                    IncidentConvention::MaxwellConsistent => b.data[2 * n + m],
                };
                assert!((b1.norm() - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dense_cap_enforced() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 1.0 / 50.0).unwrap(); // 3N = 7803
        let medium = vacuum(&grid);
        assert!(matches!(
            assemble_dense(&medium, &grid, &bg),
            Err(Error::ResourceCap(_))
        ));
    }

    #[test]
    fn magnetic_tm_needs_duality() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 0.25).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let m = MediumMap::new(
            vec![one; grid.len()],
            vec![Complex64::new(2.0, 0.0); grid.len()],
        )
        .unwrap();
        assert!(DieOperator::build_tm(&m, &grid, &bg).is_err());
        let dual = DieOperator::build_tm_via_duality(&m, &grid, &bg).unwrap();
        assert_eq!(dual.polarization, Polarization::Te);
    }

    #[test]
    fn magnetic_medium_fft_matches_dense() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 1.0 / 5.0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let n = grid.len();
        let mut eps = vec![one; n];
        let mut mu = vec![one; n];
        for m in 0..n {
            let x = grid.position(m);
            if x[0].abs() < 0.3 && x[1].abs() < 0.3 {
                eps[m] = Complex64::new(4.0, 0.0);
                mu[m] = Complex64::new(2.0, 0.5);
            }
        }
        let medium = MediumMap::new(eps, mu).unwrap();
        let dense = assemble_dense(&medium, &grid, &bg).unwrap();
        let op = DieOperator::build_fast(&medium, &grid, &bg, Polarization::Te).unwrap();
        for trial in 0..5 {
            let u = pseudo_random_unit(op.size(), 800 + trial);
            let mut y_fast = vec![ZERO; op.size()];
            op.apply_into(&u, &mut y_fast).unwrap();
            let mut y_dense = vec![ZERO; op.size()];
            dense.matvec(&u, &mut y_dense);
            assert!(rel_err(&y_fast, &y_dense) <= 1e-12);
        }
    }

    #[test]
    fn size_mismatch_rejected() {
        let bg = unit_bg();
        let grid = Grid::square_for_domain(1.0, 0.5).unwrap();
        let op = DieOperator::build_fast(&vacuum(&grid), &grid, &bg, Polarization::Te).unwrap();
        let u = vec![ZERO; op.size() + 1];
        let mut y = vec![ZERO; op.size() + 1];
        assert!(matches!(
            op.apply_into(&u, &mut y),
            Err(Error::SizeMismatch(_))
        ));
    }

    #[test]
    fn norm_helper_consistency() {
        let v = pseudo_random_unit(64, 5);
        assert!((norm2(&v) - 1.0).abs() < 1e-12);
    }
}
