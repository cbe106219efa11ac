//! Resource planning: the discretization/size/memory/deflation arithmetic
//! that decides the largest affordable problem for a given memory budget.
//!
//! Byte counts are exact integers: the system, right-hand side, and unknown
//! vector take M_A = 720 N bytes; deflation plus the GMRES subspace take
//! M_Prec = 16 r^2 + 48 N r + 48 N restart bytes (16 bytes per complex
//! number).

use serde::Serialize;

use crate::error::{Error, Result};

/// Committed plan for one run.
#[derive(Debug, Clone, Serialize)]
pub struct ResourcePlan {
    /// Grid nodes (s^2 for a square grid of s nodes per side).
    pub n: u64,
    /// Unknowns 3N of the TE system.
    pub unknowns: u64,
    /// Deflation count r = ceil(3 N beta).
    pub r: u64,
    /// Restart of the plain solver at fair memory (restart_precond + r).
    pub restart_plain: u64,
    /// Restart of the preconditioned solver (x * r).
    pub restart_precond: u64,
    pub mem_system_bytes: u64,
    pub mem_precond_bytes: u64,
    /// Committed object size in background wavelengths.
    pub a_over_lambda_max: f64,
    /// Raw closed-form values before committing to a realizable size.
    pub n_max_raw: f64,
    pub a_over_lambda_raw: f64,
}

/// Nodes per side s = floor(alpha a/lambda) + 1, N = s^2.
pub fn problem_size(a_over_lambda: f64, alpha: f64) -> u64 {
    let s = nodes_per_side(a_over_lambda, alpha);
    s * s
}

pub fn nodes_per_side(a_over_lambda: f64, alpha: f64) -> u64 {
    ((alpha * a_over_lambda + 1e-9).floor() as u64) + 1
}

/// r = ceil(3 N beta).
pub fn estimate_r(n: u64, beta: f64) -> u64 {
    (3.0 * n as f64 * beta).ceil() as u64
}

/// Exact byte budgets (system, preconditioner).
pub fn memory_budget(n: u64, r: u64, restart_precond: u64) -> (u64, u64) {
    let mem_system = 720 * n;
    let mem_precond = 16 * r * r + 48 * n * r + 48 * n * restart_precond;
    (mem_system, mem_precond)
}

/// Closed-form largest node count and object size for a memory budget:
/// N_max = [sqrt(900 + M c) - 30] / (12 c), c = beta^2 + beta + x beta,
/// [a/lambda]_max = (sqrt(N_max) - 1)/alpha.
pub fn max_affordable(m_bytes: f64, beta: f64, x_restart_multiple: f64, alpha: f64) -> Result<(f64, f64)> {
    if m_bytes <= 0.0 || beta <= 0.0 || x_restart_multiple <= 0.0 || alpha <= 0.0 {
        return Err(Error::InvalidParameter(
            "memory, beta, restart multiple, and alpha must be positive".into(),
        ));
    }
    let c = beta * beta + beta + x_restart_multiple * beta;
    let n_max = ((900.0 + m_bytes * c).sqrt() - 30.0) / (12.0 * c);
    let a_max = (n_max.sqrt() - 1.0) / alpha;
    Ok((n_max, a_max))
}

/// Full plan: closed-form maximum, then commit to the largest object size on
/// a 0.1-wavelength ladder (rounding the committed size down keeps the plan
/// inside the budget) and size the grid, deflation count, and restarts.
pub fn plan_for_memory(
    m_bytes: u64,
    beta: f64,
    x_restart_multiple: f64,
    alpha: f64,
) -> Result<ResourcePlan> {
    let (n_max_raw, a_raw) = max_affordable(m_bytes as f64, beta, x_restart_multiple, alpha)?;
    let a_committed = (a_raw * 10.0).floor() / 10.0;
    if a_committed <= 0.0 {
        return Err(Error::ResourceCap(format!(
            "memory budget of {m_bytes} bytes affords no object at all (raw a/lambda = {a_raw:.3})"
        )));
    }
    let n = problem_size(a_committed, alpha);
    let r = estimate_r(n, beta);
    let restart_precond = (x_restart_multiple * r as f64).round() as u64;
    let restart_plain = restart_precond + r;
    let (mem_system, mem_precond) = memory_budget(n, r, restart_precond);
    Ok(ResourcePlan {
        n,
        unknowns: 3 * n,
        r,
        restart_plain,
        restart_precond,
        mem_system_bytes: mem_system,
        mem_precond_bytes: mem_precond,
        a_over_lambda_max: a_committed,
        n_max_raw,
        a_over_lambda_raw: a_raw,
    })
}
