//! File-level pipelines behind the `die-scatter` command line: configuration
//! loading, the solve/spectrum/plan/validate/bench commands, and all output
//! artifacts (field grids, convergence CSVs, spectral reports, manifests).
//!
//! Outputs are deterministic for a fixed config: everything is
//! single-threaded and all randomness is seeded constants, so a rerun from
//! the written manifest reproduces the artifacts byte for byte (wall-clock
//! timings live in a separate timings.json outside that contract).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;

use std::path::Path;
use std::time::Instant;

use crate::analytic::{cylinder_fields_te, CylinderProblem};
use crate::error::{Error, Result};
use crate::krylov::{fair_memory_split, gmres_restarted, GmresResult, KrylovConfig};
use crate::linalg::{pseudo_random_unit, CMat, ZERO};
use crate::medium::{cpair, grid_step, rasterize, Background, Grid, MediumMap, ScattererSpec};
use crate::operator::{
    assemble_dense, assemble_dense_capped, assemble_dense_tm, incident_plane_wave,
    incident_plane_wave_tm, DieOperator, IncidentConvention, KernelTweak, LinearMap,
    Polarization, DENSE_DIM_CAP,
};
use crate::planner::{plan_for_memory, ResourcePlan};
use crate::spectral::{
    build_deflation, deflation_radius, dense_spectrum, topk_eigs, DeflatedMap, DeflationBasis,
    SpectralReport, TopkResult,
};

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundConfig {
    /// Complex numbers are [re, im] pairs.
    #[serde(with = "cpair")]
    pub eps_b: Complex64,
    #[serde(with = "cpair")]
    pub mu_b: Complex64,
    /// Angular frequency (rad/s in whatever unit system eps/mu use).
    pub omega: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        BackgroundConfig {
            eps_b: Complex64::new(1.0, 0.0),
            mu_b: Complex64::new(1.0, 0.0),
            omega: 2.0 * std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Plain,
    Regularized,
    RegularizedDeflated,
    Deflated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// Points per smallest medium wavelength (the paper's rule).
    KPoints { k_points: usize },
    /// Explicit grid step.
    Step { h: f64 },
    /// Explicit node count per side.
    NodesPerSide { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridAlignment {
    /// Nodes at cell corners including both domain edges (paper node count).
    Corner,
    /// Nodes at the midpoints of cells tiling the domain.
    Centered,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncidentConfig {
    pub psi: f64,
    pub convention: IncidentConvention,
}

impl Default for IncidentConfig {
    fn default() -> Self {
        IncidentConfig {
            psi: 0.0,
            convention: IncidentConvention::PaperVerbatim,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrylovSection {
    pub restart: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for KrylovSection {
    fn default() -> Self {
        KrylovSection {
            restart: 40,
            tol: 1e-8,
            max_iters: 200_000,
        }
    }
}

/// `plan` command inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanSection {
    pub memory_bytes: u64,
    pub beta: f64,
    pub x_restart_multiple: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub scatterer: ScattererSpec,
    #[serde(default)]
    pub background: BackgroundConfig,
    #[serde(default = "default_polarization")]
    pub polarization: Polarization,
    #[serde(default = "default_pipeline")]
    pub pipeline: Pipeline,
    #[serde(default)]
    pub krylov: KrylovSection,
    #[serde(default = "default_eigs_tol")]
    pub eigs_tol: f64,
    #[serde(default)]
    pub r_override: Option<usize>,
    #[serde(default)]
    pub incident: IncidentConfig,
    pub discretization: Discretization,
    /// Computational square side; defaults to the scatterer bounding box.
    #[serde(default)]
    pub domain_side: Option<f64>,
    #[serde(default = "default_alignment")]
    pub grid_alignment: GridAlignment,
    /// Also emit the compact binary field format next to the CSVs.
    #[serde(default)]
    pub binary_fields: bool,
    #[serde(default)]
    pub plan: Option<PlanSection>,
}

fn default_polarization() -> Polarization {
    Polarization::Te
}
fn default_pipeline() -> Pipeline {
    Pipeline::Plain
}
fn default_eigs_tol() -> f64 {
    1e-4
}
fn default_alignment() -> GridAlignment {
    GridAlignment::Corner
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{e}")))
    }

    pub fn background(&self) -> Result<Background> {
        Background::new(self.background.eps_b, self.background.mu_b, self.background.omega)
    }

    /// Resolve the grid from the discretization rule and the domain side.
    pub fn grid(&self) -> Result<Grid> {
        let bg = self.background()?;
        let (lo, hi) = self.scatterer.bounding_box();
        let side = self
            .domain_side
            .unwrap_or_else(|| (hi[0] - lo[0]).max(hi[1] - lo[1]));
        if side <= 0.0 {
            return Err(Error::InvalidConfig("domain side must be positive".into()));
        }
        let h = match self.discretization {
            Discretization::KPoints { k_points } => {
                grid_step(self.scatterer.max_eps_rel_real(), 1.0, k_points, bg.lambda_b)?
            }
            Discretization::Step { h } => h,
            Discretization::NodesPerSide { n } => {
                if n < 2 {
                    return Err(Error::InvalidConfig("need at least 2 nodes per side".into()));
                }
                match self.grid_alignment {
                    GridAlignment::Corner => side / (n - 1) as f64,
                    GridAlignment::Centered => side / n as f64,
                }
            }
        };
        if h <= 0.0 {
            return Err(Error::InvalidConfig("grid step must be positive".into()));
        }
        let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        match self.grid_alignment {
            GridAlignment::Corner => {
                let n = (side / h + 1e-9).floor() as usize + 1;
                let extent = (n - 1) as f64 * h;
                Grid::new(
                    n,
                    n,
                    h,
                    [center[0] - extent / 2.0, center[1] - extent / 2.0],
                )
            }
            GridAlignment::Centered => {
                let n = ((side / h - 1e-9).ceil() as usize).max(1);
                let extent = (n - 1) as f64 * h;
                Grid::new(
                    n,
                    n,
                    h,
                    [center[0] - extent / 2.0, center[1] - extent / 2.0],
                )
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Artifact helpers.
// ---------------------------------------------------------------------------

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Field grid CSV: columns (x1, x2, re, im).
fn write_field_csv(path: &Path, grid: &Grid, values: &[Complex64]) -> Result<()> {
    let mut out = String::with_capacity(values.len() * 64);
    out.push_str("x1,x2,re,im\n");
    for (m, v) in values.iter().enumerate() {
        let p = grid.position(m);
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            p[0], p[1], v.re, v.im
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinarySidecar {
    pub n1: usize,
    pub n2: usize,
    pub h: f64,
    pub origin: [f64; 2],
    pub component: String,
    pub count: usize,
    pub layout: String,
}

/// Compact binary field: little-endian f64 interleaved re/im, row-major,
/// with a JSON sidecar header.
pub fn write_field_binary(
    path: &Path,
    grid: &Grid,
    values: &[Complex64],
    component: &str,
) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 16);
    for v in values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let sidecar = BinarySidecar {
        n1: grid.n1,
        n2: grid.n2,
        h: grid.h,
        origin: grid.origin,
        component: component.to_string(),
        count: values.len(),
        layout: "le-f64-interleaved-re-im-row-major".to_string(),
    };
    write_json(&path.with_extension("json"), &sidecar)
}

/// Read back a binary field written by `write_field_binary`.
pub fn read_field_binary(path: &Path) -> Result<Vec<Complex64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::InvalidConfig("binary field length not a multiple of 16".into()));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    deterministic: bool,
    config: &'a RunConfig,
    grid_n1: usize,
    grid_n2: usize,
    grid_h: f64,
    unknowns: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    /// Off-line seconds (eigenvalue retrieval + basis construction).
    pub offline_seconds: f64,
    /// On-line seconds (the GMRES solve).
    pub online_seconds: f64,
    /// Reported total = offline + online.
    pub total_seconds: f64,
}

// ---------------------------------------------------------------------------
// Pipeline assembly.
// ---------------------------------------------------------------------------

struct Scene {
    bg: Background,
    grid: Grid,
    medium: MediumMap,
}

fn resolve_scene(config: &RunConfig) -> Result<Scene> {
    let bg = config.background()?;
    let grid = config.grid()?;
    let medium = rasterize(&config.scatterer, &grid, &bg)?;
    Ok(Scene { bg, grid, medium })
}

/// Deflation count policy: retrieve largest-magnitude eigenvalues until one
/// falls inside the deflation radius, then count the outsiders.
fn choose_r(
    map: &dyn LinearMap,
    radius: f64,
    eigs_tol: f64,
    r_cap: usize,
) -> Result<TopkResult> {
    let dim = map.dim();
    let mut r_try = 8usize.min(r_cap).max(1);
    loop {
        let out = topk_eigs(map, r_try.min(dim - 1), eigs_tol)?;
        let smallest = out
            .values
            .iter()
            .map(|v| v.norm())
            .fold(f64::INFINITY, f64::min);
        if smallest <= radius * (1.0 + 1e-9) || r_try >= r_cap || r_try >= dim - 1 {
            // keep only the outsiders
            let mut values = Vec::new();
            let mut vectors = Vec::new();
            let mut residuals = Vec::new();
            for ((v, x), res) in out
                .values
                .iter()
                .zip(out.vectors.iter())
                .zip(out.residuals.iter())
            {
                if v.norm() > radius * (1.0 + 1e-9) {
                    values.push(*v);
                    vectors.push(x.clone());
                    residuals.push(*res);
                }
            }
            return Ok(TopkResult {
                values,
                vectors,
                residuals,
                converged: out.converged,
            });
        }
        r_try = (2 * r_try).min(r_cap);
    }
}

/// Everything cmd_solve produces besides the files.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub pipeline: Pipeline,
    pub polarization: Polarization,
    pub unknowns: usize,
    pub r: usize,
    pub restart: usize,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub cond_t: Option<f64>,
    pub deflation_radius: Option<f64>,
    pub offline_seconds: f64,
    pub online_seconds: f64,
}

pub fn cmd_solve(config: &RunConfig, out_dir: &Path, deterministic: bool) -> Result<SolveSummary> {
    fs::create_dir_all(out_dir)?;
    let scene = resolve_scene(config)?;
    let n = scene.grid.len();

    let op = DieOperator::build_fast(&scene.medium, &scene.grid, &scene.bg, config.polarization)?;
    let b = match config.polarization {
        Polarization::Te => incident_plane_wave(
            &scene.grid,
            &scene.bg,
            config.incident.psi,
            config.incident.convention,
        ),
        Polarization::Tm => incident_plane_wave_tm(&scene.grid, &scene.bg, config.incident.psi),
    };

    let needs_reg = matches!(
        config.pipeline,
        Pipeline::Regularized | Pipeline::RegularizedDeflated
    );
    let reg = if needs_reg { Some(op.regularizer()?) } else { None };

    // right-hand side and system map per pipeline
    let composed;
    let system: &dyn LinearMap = match &reg {
        Some(reg_op) => {
            composed = crate::operator::Composed {
                outer: reg_op,
                inner: &op,
            };
            &composed
        }
        None => &op,
    };
    let rhs: Vec<Complex64> = match &reg {
        Some(reg_op) => {
            let mut out = vec![ZERO; b.data.len()];
            reg_op.apply_to(&b.data, &mut out);
            out
        }
        None => b.data.clone(),
    };

    // deflation basis (off-line work)
    let offline_start = Instant::now();
    let needs_deflation = matches!(
        config.pipeline,
        Pipeline::Deflated | Pipeline::RegularizedDeflated
    );
    let mut radius = None;
    let basis: DeflationBasis = if needs_deflation {
        let r_bound = deflation_radius(&scene.medium.distinct_materials())?;
        radius = Some(r_bound);
        let pairs = match config.r_override {
            Some(r) if r == 0 => TopkResult {
                values: vec![],
                vectors: vec![],
                residuals: vec![],
                converged: true,
            },
            Some(r) => topk_eigs(system, r, config.eigs_tol)?,
            None => {
                let cap = config.krylov.restart.saturating_sub(1).max(1).min(256);
                choose_r(system, r_bound, config.eigs_tol, cap)?
            }
        };
        build_deflation(system, &pairs.values, &pairs.vectors)?
    } else {
        DeflationBasis::identity(op.size())
    };
    let r = basis.r;
    let offline_seconds = offline_start.elapsed().as_secs_f64();

    // fair-memory restart
    let restart = if needs_deflation {
        fair_memory_split(config.krylov.restart, r)?.1
    } else {
        config.krylov.restart
    };
    let krylov = KrylovConfig {
        restart,
        tol: config.krylov.tol,
        max_iters: config.krylov.max_iters,
        record_history: true,
        check_orthonormality: false,
    };

    let online_start = Instant::now();
    let minv: Option<&dyn LinearMap> = if needs_deflation { Some(&basis) } else { None };
    let out: GmresResult = gmres_restarted(system, minv, &rhs, &krylov)?;
    let online_seconds = online_start.elapsed().as_secs_f64();

    // artifacts
    let manifest = Manifest {
        tool: "die-scatter",
        version: env!("CARGO_PKG_VERSION"),
        command: "solve",
        deterministic,
        config,
        grid_n1: scene.grid.n1,
        grid_n2: scene.grid.n2,
        grid_h: scene.grid.h,
        unknowns: op.size(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;

    let mut csv = Vec::new();
    out.record.write_csv(&mut csv)?;
    fs::write(out_dir.join("convergence.csv"), csv)?;

    let comp_names: &[&str] = match config.polarization {
        Polarization::Te => &["E1", "E2", "H3"],
        Polarization::Tm => &["E3"],
    };
    for (c, name) in comp_names.iter().enumerate() {
        let vals = &out.solution[c * n..(c + 1) * n];
        write_field_csv(
            &out_dir.join(format!("field_{name}.csv")),
            &scene.grid,
            vals,
        )?;
        if config.binary_fields {
            write_field_binary(
                &out_dir.join(format!("field_{name}.bin")),
                &scene.grid,
                vals,
                name,
            )?;
        }
    }
    if config.polarization == Polarization::Te {
        // |E1|^2 + |E2|^2 intensity grid
        let intensity: Vec<Complex64> = (0..n)
            .map(|m| {
                Complex64::new(
                    out.solution[m].norm_sqr() + out.solution[n + m].norm_sqr(),
                    0.0,
                )
            })
            .collect();
        write_field_csv(&out_dir.join("intensity_E.csv"), &scene.grid, &intensity)?;
    }

    let timings = Timings {
        offline_seconds,
        online_seconds,
        total_seconds: offline_seconds + online_seconds,
    };
    write_json(&out_dir.join("timings.json"), &timings)?;

    let summary = SolveSummary {
        pipeline: config.pipeline,
        polarization: config.polarization,
        unknowns: op.size(),
        r,
        restart,
        iterations: out.record.iterations,
        restarts_used: out.record.restarts_used,
        converged: out.record.converged && out.breakdown.is_none(),
        final_residual: out
            .record
            .true_residuals_at_restart
            .last()
            .copied()
            .unwrap_or(f64::NAN),
        cond_t: (r > 0).then_some(basis.cond_t),
        deflation_radius: radius,
        offline_seconds,
        online_seconds,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;

    out.ensure_converged()?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Spectrum command.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub pipeline: Pipeline,
    pub polarization: Polarization,
    pub dimension: usize,
    pub deflation_radius: f64,
    pub outside_radius: usize,
    pub wedge_violations: usize,
    pub r_deflated: usize,
}

pub fn cmd_spectrum(config: &RunConfig, out_dir: &Path) -> Result<SpectrumSummary> {
    fs::create_dir_all(out_dir)?;
    let scene = resolve_scene(config)?;

    let a = match config.polarization {
        Polarization::Te => assemble_dense(&scene.medium, &scene.grid, &scene.bg)?,
        Polarization::Tm => assemble_dense_tm(&scene.medium, &scene.grid, &scene.bg)?,
    };

    let mut r_deflated = 0usize;
    let matrix = match config.pipeline {
        Pipeline::Plain => a,
        Pipeline::Regularized => {
            let reg_medium = scene.medium.regularizer();
            let ar = match config.polarization {
                Polarization::Te => assemble_dense(&reg_medium, &scene.grid, &scene.bg)?,
                Polarization::Tm => assemble_dense_tm(&reg_medium, &scene.grid, &scene.bg)?,
            };
            ar.matmul(&a)
        }
        Pipeline::Deflated | Pipeline::RegularizedDeflated => {
            let base = if config.pipeline == Pipeline::Deflated {
                a
            } else {
                let reg_medium = scene.medium.regularizer();
                let ar = match config.polarization {
                    Polarization::Te => assemble_dense(&reg_medium, &scene.grid, &scene.bg)?,
                    Polarization::Tm => assemble_dense_tm(&reg_medium, &scene.grid, &scene.bg)?,
                };
                ar.matmul(&a)
            };
            let radius = deflation_radius(&scene.medium.distinct_materials())?;
            let pairs = match config.r_override {
                Some(r) => topk_eigs(&base, r, config.eigs_tol)?,
                None => choose_r(&base, radius, config.eigs_tol, 64)?,
            };
            let basis = build_deflation(&base, &pairs.values, &pairs.vectors)?;
            r_deflated = basis.r;
            // dense recomputation of (base) P^-1
            let dim = base.n_rows;
            let mut composed = CMat::zeros(dim, dim);
            let deflated = DeflatedMap {
                inner: &base,
                basis: &basis,
            };
            let mut col = vec![ZERO; dim];
            let mut e = vec![ZERO; dim];
            for j in 0..dim {
                e.iter_mut().for_each(|v| *v = ZERO);
                e[j] = Complex64::new(1.0, 0.0);
                deflated.apply_to(&e, &mut col);
                for i in 0..dim {
                    composed[(i, j)] = col[i];
                }
            }
            composed
        }
    };

    let eigenvalues = dense_spectrum(&matrix)?;
    let report = SpectralReport::build(eigenvalues, &scene.medium, &scene.bg)?;

    let mut csv = Vec::new();
    report.write_eigenvalues_csv(&mut csv)?;
    fs::write(out_dir.join("eigenvalues.csv"), csv)?;
    write_json(&out_dir.join("spectral_report.json"), &report.summary())?;

    let summary = SpectrumSummary {
        pipeline: config.pipeline,
        polarization: config.polarization,
        dimension: matrix_dim(&report),
        deflation_radius: report.deflation_radius,
        outside_radius: report.summary().outside_radius,
        wedge_violations: report.wedge.violations,
        r_deflated,
    };
    write_json(&out_dir.join("spectrum_summary.json"), &summary)?;
    Ok(summary)
}

fn matrix_dim(report: &SpectralReport) -> usize {
    report.eigenvalues.len()
}

// ---------------------------------------------------------------------------
// Plan command.
// ---------------------------------------------------------------------------

pub fn cmd_plan(config: &RunConfig, out_dir: &Path) -> Result<ResourcePlan> {
    fs::create_dir_all(out_dir)?;
    let section = config
        .plan
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("plan command needs a `plan` section".into()))?;
    let k_points = match config.discretization {
        Discretization::KPoints { k_points } => k_points,
        _ => {
            return Err(Error::InvalidConfig(
                "plan needs the k-points discretization rule".into(),
            ))
        }
    };
    let alpha = k_points as f64 * config.scatterer.max_eps_rel_real().sqrt();
    let plan = plan_for_memory(
        section.memory_bytes,
        section.beta,
        section.x_restart_multiple,
        alpha,
    )?;
    if section.x_restart_multiple < 1.0 {
        eprintln!(
            "warning: limited-memory preset (restart = {}r < r): such runs may diverge",
            section.x_restart_multiple
        );
    }
    write_json(&out_dir.join("plan.json"), &plan)?;
    Ok(plan)
}

/// Human-readable table for the plan command.
pub fn format_plan(plan: &ResourcePlan) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "largest affordable object     a/lambda_b = {} (raw {:.4})\n",
        plan.a_over_lambda_max, plan.a_over_lambda_raw
    ));
    s.push_str(&format!("grid nodes                    N = {}\n", plan.n));
    s.push_str(&format!("unknowns                      3N = {}\n", plan.unknowns));
    s.push_str(&format!("deflation count               r = {}\n", plan.r));
    s.push_str(&format!(
        "restart (preconditioned)      {}\n",
        plan.restart_precond
    ));
    s.push_str(&format!("restart (plain, fair memory)  {}\n", plan.restart_plain));
    s.push_str(&format!(
        "memory: system                {} bytes\n",
        plan.mem_system_bytes
    ));
    s.push_str(&format!(
        "memory: deflation + GMRES     {} bytes\n",
        plan.mem_precond_bytes
    ));
    s
}

// ---------------------------------------------------------------------------
// Validate command.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct ValidationOptions {
    /// Negative-control hook: corrupt the t12 kernel sign in the dense
    /// route; the FFT-vs-dense suite must then fail.
    pub corrupt_kernel_sign: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSuite {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub suites: Vec<ValidationSuite>,
}

pub fn cmd_validate(out_dir: &Path, options: &ValidationOptions) -> Result<ValidationReport> {
    fs::create_dir_all(out_dir)?;
    let bg = Background::unit();
    let mut suites = Vec::new();

    // vacuum identity
    {
        let grid = Grid::square_for_domain(1.0, 1.0 / 7.0)?;
        let one = Complex64::new(1.0, 0.0);
        let medium = MediumMap::new(vec![one; grid.len()], vec![one; grid.len()])?;
        let op = DieOperator::build_fast(&medium, &grid, &bg, Polarization::Te)?;
        let u = pseudo_random_unit(op.size(), 1);
        let mut y = vec![ZERO; op.size()];
        op.apply_into(&u, &mut y)?;
        let mut diff = 0.0;
        for (a, b) in y.iter().zip(u.iter()) {
            diff += (a - b).norm_sqr();
        }
        let rel = diff.sqrt();
        suites.push(ValidationSuite {
            name: "vacuum-identity".into(),
            passed: rel <= 1e-14,
            detail: format!("||A u - u|| = {rel:.3e} (tol 1e-14)"),
        });
    }

    // FFT vs dense equivalence on the three test media
    {
        let grid = Grid::square_for_domain(1.0, 1.0 / 7.0)?;
        let one = Complex64::new(1.0, 0.0);
        let media: Vec<(&str, ScattererSpec)> = vec![
            (
                "eps16",
                ScattererSpec::HomogeneousSquare {
                    side: 1.0,
                    center: [0.0, 0.0],
                    eps_rel: Complex64::new(16.0, 0.0),
                    mu_rel: one,
                },
            ),
            (
                "eps-16+1.5i",
                ScattererSpec::HomogeneousSquare {
                    side: 1.0,
                    center: [0.0, 0.0],
                    eps_rel: Complex64::new(-16.0, 1.5),
                    mu_rel: one,
                },
            ),
            (
                "layered",
                ScattererSpec::LayeredSquare {
                    outer_side: 1.0,
                    inner_side: 0.5,
                    center: [0.0, 0.0],
                    outer_eps_rel: Complex64::new(16.0, 0.0),
                    inner_eps_rel: Complex64::new(2.5, 20.0),
                },
            ),
        ];
        let tweak = if options.corrupt_kernel_sign {
            KernelTweak::FlipT12Sign
        } else {
            KernelTweak::None
        };
        let mut worst: f64 = 0.0;
        for (_, spec) in &media {
            let medium = rasterize(spec, &grid, &bg)?;
            let dense = assemble_dense_capped(&medium, &grid, &bg, DENSE_DIM_CAP, tweak)?;
            let op = DieOperator::build_fast(&medium, &grid, &bg, Polarization::Te)?;
            for trial in 0..10u64 {
                let u = pseudo_random_unit(op.size(), 100 + trial);
                let mut yf = vec![ZERO; op.size()];
                op.apply_into(&u, &mut yf)?;
                let mut yd = vec![ZERO; op.size()];
                dense.matvec(&u, &mut yd);
                let mut num = 0.0;
                let mut den = 0.0;
                for (a, b) in yf.iter().zip(yd.iter()) {
                    num += (a - b).norm_sqr();
                    den += b.norm_sqr();
                }
                worst = worst.max((num / den).sqrt());
            }
        }
        suites.push(ValidationSuite {
            name: "fft-vs-dense".into(),
            passed: worst <= 1e-12,
            detail: format!("worst relative error {worst:.3e} over 3 media x 10 vectors (tol 1e-12)"),
        });
    }

    // cylinder refinement against the analytic series
    {
        let mut errors = Vec::new();
        for k_points in [10usize, 15, 20] {
            errors.push(cylinder_validation_error(k_points)?);
        }
        let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
        suites.push(ValidationSuite {
            name: "cylinder-oracle-refinement".into(),
            passed: decreasing,
            detail: format!(
                "interior RMS errors at 10/15/20 points per wavelength: {:.3e} / {:.3e} / {:.3e} (must decrease)",
                errors[0], errors[1], errors[2]
            ),
        });
    }

    let passed = suites.iter().all(|s| s.passed);
    let report = ValidationReport { passed, suites };
    write_json(&out_dir.join("validate.json"), &report)?;
    if !passed {
        let failed: Vec<&str> = report
            .suites
            .iter()
            .filter(|s| !s.passed)
            .map(|s| s.name.as_str())
            .collect();
        return Err(Error::ValidationFailed(format!(
            "suites failed: {}",
            failed.join(", ")
        )));
    }
    Ok(report)
}

/// Interior RMS error of the TE solve against the cylinder series at the
/// given points-per-smallest-wavelength, cell-centered grid, eps_rel = 4,
/// radius lambda_b / 2.
pub fn cylinder_validation_error(k_points: usize) -> Result<f64> {
    let bg = Background::unit();
    let radius = 0.5 * bg.lambda_b;
    let eps = Complex64::new(4.0, 0.0);
    let side = 2.0 * radius;
    let h = grid_step(4.0, 1.0, k_points, bg.lambda_b)?;
    let n_side = (side / h).round() as usize;
    let grid = Grid::new(
        n_side,
        n_side,
        h,
        [-side / 2.0 + h / 2.0, -side / 2.0 + h / 2.0],
    )?;
    let spec = ScattererSpec::CircularCylinder {
        radius,
        center: [0.0, 0.0],
        eps_rel: eps,
        mu_rel: Complex64::new(1.0, 0.0),
    };
    let medium = rasterize(&spec, &grid, &bg)?;
    let op = DieOperator::build_fast(&medium, &grid, &bg, Polarization::Te)?;
    let b = incident_plane_wave(&grid, &bg, 0.0, IncidentConvention::MaxwellConsistent);
    let cfg = KrylovConfig {
        restart: 60,
        tol: 1e-9,
        ..Default::default()
    };
    let out = gmres_restarted(&op, None, &b.data, &cfg)?;
    out.ensure_converged()?;

    let n = grid.len();
    let mut pts = Vec::new();
    let mut idx = Vec::new();
    for m in 0..n {
        let p = grid.position(m);
        if f64::hypot(p[0], p[1]) <= radius - 2.0 * grid.h {
            pts.push(p);
            idx.push(m);
        }
    }
    let problem = CylinderProblem::new(radius, eps, Complex64::new(1.0, 0.0), bg, 0.0)?;
    let oracle = cylinder_fields_te(&problem, &pts)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (row, &m) in idx.iter().enumerate() {
        for c in 0..3 {
            num += (out.solution[c * n + m] - oracle[row][c]).norm_sqr();
            den += oracle[row][c].norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

// ---------------------------------------------------------------------------
// Bench command.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub system: String,
    pub r: usize,
    pub restart: usize,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
    /// Iteration speed-up relative to the plain system.
    pub iteration_ratio: f64,
    /// Wall-clock speed-up relative to the plain system (machine-specific;
    /// reported as a ratio only).
    pub time_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Fair-memory comparison of the plain, regularized, and
/// regularized-plus-deflated systems on one configuration.
pub fn cmd_bench(config: &RunConfig, out_dir: &Path) -> Result<BenchReport> {
    fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    let mut run = |pipeline: Pipeline, label: &str| -> Result<()> {
        let mut cfg = config.clone();
        cfg.pipeline = pipeline;
        let t0 = Instant::now();
        let sub = out_dir.join(label);
        let summary = cmd_solve(&cfg, &sub, true);
        let seconds = t0.elapsed().as_secs_f64();
        match summary {
            Ok(s) => {
                rows.push(BenchRow {
                    system: label.to_string(),
                    r: s.r,
                    restart: s.restart,
                    iterations: s.iterations,
                    converged: s.converged,
                    seconds,
                    iteration_ratio: 1.0,
                    time_ratio: 1.0,
                });
                Ok(())
            }
            Err(Error::NonConverged(_)) => {
                rows.push(BenchRow {
                    system: label.to_string(),
                    r: 0,
                    restart: 0,
                    iterations: config.krylov.max_iters,
                    converged: false,
                    seconds,
                    iteration_ratio: 1.0,
                    time_ratio: 1.0,
                });
                Ok(())
            }
            Err(e) => Err(e),
        }
    };
    run(Pipeline::Plain, "plain")?;
    run(Pipeline::Regularized, "regularized")?;
    run(Pipeline::RegularizedDeflated, "regularized-deflated")?;
    let base_iters = rows[0].iterations.max(1) as f64;
    let base_secs = rows[0].seconds.max(1e-12);
    for row in rows.iter_mut() {
        row.iteration_ratio = base_iters / row.iterations.max(1) as f64;
        row.time_ratio = base_secs / row.seconds.max(1e-12);
    }
    let report = BenchReport { rows };
    write_json(&out_dir.join("bench.json"), &report)?;
    Ok(report)
}

/// Human-readable bench table.
pub fn format_bench(report: &BenchReport) -> String {
    let mut s = String::from(
        "system                 r  restart  iterations  converged  speedup(iters)  speedup(time)\n",
    );
    for row in &report.rows {
        s.push_str(&format!(
            "{:<20} {:>3} {:>8} {:>11} {:>10} {:>15.2} {:>14.2}\n",
            row.system, row.r, row.restart, row.iterations, row.converged,
            row.iteration_ratio, row.time_ratio
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> RunConfig {
        RunConfig {
            scatterer: ScattererSpec::HomogeneousSquare {
                side: 1.0,
                center: [0.0, 0.0],
                eps_rel: Complex64::new(16.0, 0.0),
                mu_rel: Complex64::new(1.0, 0.0),
            },
            background: BackgroundConfig::default(),
            polarization: Polarization::Te,
            pipeline: Pipeline::Plain,
            krylov: KrylovSection {
                restart: 40,
                tol: 1e-8,
                max_iters: 50_000,
            },
            eigs_tol: 1e-4,
            r_override: None,
            incident: IncidentConfig::default(),
            discretization: Discretization::NodesPerSide { n: 9 },
            domain_side: None,
            grid_alignment: GridAlignment::Corner,
            binary_fields: false,
            plan: None,
        }
    }

    #[test]
    fn config_roundtrip() {
        let cfg = tiny_config();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.krylov.restart, 40);
        assert!(matches!(back.pipeline, Pipeline::Plain));
        let grid = back.grid().unwrap();
        assert_eq!(grid.n1, 9);
    }

    #[test]
    fn grid_resolution_rules() {
        let mut cfg = tiny_config();
        cfg.discretization = Discretization::KPoints { k_points: 15 };
        let grid = cfg.grid().unwrap();
        // eps 16 -> n = 4 -> h = 1/60, corner grid over side 1: 61 nodes
        assert_eq!(grid.n1, 61);
        assert!((grid.h - 1.0 / 60.0).abs() < 1e-15);

        cfg.grid_alignment = GridAlignment::Centered;
        cfg.discretization = Discretization::Step { h: 0.1 };
        let grid = cfg.grid().unwrap();
        assert_eq!(grid.n1, 10);
        // centered: first node half a cell inside
        assert!((grid.origin[0] + 0.45).abs() < 1e-12);
    }

    #[test]
    fn binary_field_roundtrip() {
        let dir = std::env::temp_dir().join("die_scatter_binfield_test");
        fs::create_dir_all(&dir).unwrap();
        let grid = Grid::new(3, 2, 0.5, [0.0, 0.0]).unwrap();
        let vals: Vec<Complex64> = (0..6)
            .map(|k| Complex64::new(k as f64, -(k as f64) * 0.5))
            .collect();
        let path = dir.join("f.bin");
        write_field_binary(&path, &grid, &vals, "E1").unwrap();
        let back = read_field_binary(&path).unwrap();
        assert_eq!(vals, back);
        let sidecar: BinarySidecar =
            serde_json::from_str(&fs::read_to_string(path.with_extension("json")).unwrap())
                .unwrap();
        assert_eq!(sidecar.n1, 3);
        assert_eq!(sidecar.component, "E1");
        fs::remove_dir_all(&dir).ok();
    }
}
