//! Projection-based divergence cleaning: wide-stencil and narrow-stencil
//! Poisson solves with homogeneous Dirichlet boundary values, the least-norm
//! correction through D D*, and the unpreconditioned conjugate-gradient
//! solver they share.

use crate::error::Error;
use crate::grid::{self, AxisOp, GridSpec, ScalarField, VectorField};

/// Cleaning method selector. CLI names mirror the experiment labels:
/// `none | ws-ln | ws-d0 | ns-d0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CleanMethod {
    None,
    /// Wide-stencil Laplacian (D applied twice), homogeneous Dirichlet values.
    WsD0,
    /// Compatible narrow-stencil Laplacian, homogeneous Dirichlet values.
    NsD0,
    /// Least-norm correction beta = div* (div div*)^{-1} (-div B).
    WsLn,
}

impl CleanMethod {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => CleanMethod::None,
            "ws-d0" => CleanMethod::WsD0,
            "ns-d0" => CleanMethod::NsD0,
            "ws-ln" => CleanMethod::WsLn,
            _ => return None,
        })
    }
    pub fn name(self) -> &'static str {
        match self {
            CleanMethod::None => "none",
            CleanMethod::WsD0 => "ws-d0",
            CleanMethod::NsD0 => "ns-d0",
            CleanMethod::WsLn => "ws-ln",
        }
    }
}

/// Cleaning configuration; defaults follow the reference experiments
/// (absolute divergence threshold 1e-3, at most 50 CG iterations per step).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DivCleanConfig {
    pub method: CleanMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DivCleanConfig {
    fn default() -> Self {
        DivCleanConfig {
            method: CleanMethod::None,
            tol: 1e-3,
            max_iter: 50,
        }
    }
}

impl DivCleanConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("cleaning tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("cleaning max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one cleaning application.
#[derive(Debug, Clone, Default)]
pub struct CleanStats {
    pub iterations: usize,
    pub pre_div: f64,
    pub post_div: f64,
    /// <1, Delta B_i>_M per component.
    pub mass_change: [f64; 3],
    /// ||B||_M^2 after minus before.
    pub energy_change: f64,
    pub breakdown: bool,
    /// Divergence threshold reached (skipped counts as converged).
    pub converged: bool,
    /// Nothing to do: the field was already below the threshold.
    pub skipped: bool,
}

/// Conjugate-gradient result.
#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub breakdown: bool,
    pub converged: bool,
}

/// Unpreconditioned CG with zero initial guess in a caller-supplied inner
/// product; `apply_a` must be self-adjoint positive semidefinite with respect
/// to it and the right-hand side orthogonal to the kernel.
pub fn cg_solve(
    mut apply_a: impl FnMut(&[f64], &mut [f64]),
    rhs: &[f64],
    inner: impl Fn(&[f64], &[f64]) -> f64,
    tol_residual: f64,
    max_iter: usize,
) -> Result<CgResult, Error> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut rr = inner(&r, &r);
    if !rr.is_finite() {
        return Err(Error::CgAborted("non-finite right-hand side".into()));
    }
    let mut history = vec![rr.sqrt()];
    if rr.sqrt() <= tol_residual {
        return Ok(CgResult {
            x,
            iterations: 0,
            residual_history: history,
            breakdown: false,
            converged: true,
        });
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply_a(&p, &mut ap);
        let pap = inner(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::CgAborted(format!(
                "non-finite curvature at iteration {it}"
            )));
        }
        if pap <= 0.0 {
            return Ok(CgResult {
                x,
                iterations: it - 1,
                residual_history: history,
                breakdown: true,
                converged: false,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = inner(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::CgAborted(format!(
                "non-finite residual at iteration {it}"
            )));
        }
        history.push(rr_new.sqrt());
        if rr_new.sqrt() <= tol_residual {
            return Ok(CgResult {
                x,
                iterations: it,
                residual_history: history,
                breakdown: false,
                converged: true,
            });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Ok(CgResult {
        x,
        iterations: max_iter,
        residual_history: history,
        breakdown: false,
        converged: false,
    })
}

/// Multiply (or divide) by the 1D norm weight of one axis, respecting the
/// tensor-product structure of M.
fn scale_axis_weight(grid: &GridSpec, axis: usize, f: &[f64], out: &mut [f64], invert: bool) {
    let [n1, n2, n3] = grid.shape();
    let w = grid.axis_weight(axis);
    match axis {
        0 => {
            for block in 0..n2 * n3 {
                let base = block * n1;
                for i in 0..n1 {
                    let s = if invert { 1.0 / w[i] } else { w[i] };
                    out[base + i] = f[base + i] * s;
                }
            }
        }
        1 => {
            for k in 0..n3 {
                for j in 0..n2 {
                    let s = if invert { 1.0 / w[j] } else { w[j] };
                    let base = n1 * (j + n2 * k);
                    for i in 0..n1 {
                        out[base + i] = f[base + i] * s;
                    }
                }
            }
        }
        _ => {
            let plane = n1 * n2;
            for k in 0..n3 {
                let s = if invert { 1.0 / w[k] } else { w[k] };
                let base = k * plane;
                for i in 0..plane {
                    out[base + i] = f[base + i] * s;
                }
            }
        }
    }
}

/// Component j of div* phi = M^{-1} D_j^T M phi (tangential weights cancel).
fn div_star_component(grid: &GridSpec, axis: usize, phi: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    scale_axis_weight(grid, axis, phi, scratch, false);
    grid::apply_axis(grid, axis, AxisOp::DTranspose, scratch, out, 1.0, 0.0);
    let tmp = out.to_vec();
    scale_axis_weight(grid, axis, &tmp, out, true);
}

fn zero_boundary(grid: &GridSpec, f: &mut [f64]) {
    let [n1, n2, n3] = grid.shape();
    for k in 0..n3 {
        for j in 0..n2 {
            let edge_jk = j == 0 || j == n2 - 1 || k == 0 || k == n3 - 1;
            let base = n1 * (j + n2 * k);
            if edge_jk {
                f[base..base + n1].fill(0.0);
            } else {
                f[base] = 0.0;
                f[base + n1 - 1] = 0.0;
            }
        }
    }
}

fn m_inner(grid: &GridSpec, a: &[f64], b: &[f64]) -> f64 {
    grid::inner_m(grid, a, b)
}

/// Apply the projection selected by `cfg` to `b` in place.
///
/// The divergence threshold is checked before doing any work: a field already
/// below `tol` is returned unchanged.
pub fn clean(grid: &GridSpec, cfg: &DivCleanConfig, b: &mut VectorField) -> Result<CleanStats, Error> {
    cfg.validate()?;
    let n = grid.total_nodes();
    let mut div = ScalarField::zeros(n);
    grid::divergence(grid, b, &mut div);
    let pre_div = grid::norm_m(grid, &div.data);
    let mut stats = CleanStats {
        pre_div,
        post_div: pre_div,
        converged: pre_div <= cfg.tol,
        ..Default::default()
    };
    if matches!(cfg.method, CleanMethod::None) {
        return Ok(stats);
    }
    if pre_div <= cfg.tol {
        stats.skipped = true;
        return Ok(stats);
    }
    if !pre_div.is_finite() {
        return Err(Error::NonFinite("divergence before cleaning".into()));
    }

    let pre_energy = grid::energy(grid, b);
    let pre_mass = [
        m_inner(grid, &vec![1.0; n], b.comp(0)),
        m_inner(grid, &vec![1.0; n], b.comp(1)),
        m_inner(grid, &vec![1.0; n], b.comp(2)),
    ];

    match cfg.method {
        CleanMethod::None => unreachable!(),
        CleanMethod::WsLn => {
            // (div div*) phi = -div B on all nodes; CG in the M inner product.
            // The CG residual is exactly -div(B + div* phi_k), so the stopping
            // test is the divergence norm of the partially corrected field.
            let rhs: Vec<f64> = div.data.iter().map(|v| -v).collect();
            let mut scratch = vec![0.0; n];
            let mut comp = vec![0.0; n];
            let result = cg_solve(
                |phi, out| {
                    out.fill(0.0);
                    for axis in 0..3 {
                        div_star_component(grid, axis, phi, &mut scratch, &mut comp);
                        grid::apply_axis(grid, axis, AxisOp::D, &comp, out, 1.0, 1.0);
                    }
                },
                &rhs,
                |a, c| m_inner(grid, a, c),
                cfg.tol,
                cfg.max_iter,
            )?;
            stats.iterations = result.iterations;
            stats.breakdown = result.breakdown;
            let mut beta = vec![0.0; n];
            for axis in 0..3 {
                div_star_component(grid, axis, &result.x, &mut scratch, &mut beta);
                let bc = b.comp_mut(axis);
                for m in 0..n {
                    bc[m] += beta[m];
                }
            }
        }
        CleanMethod::WsD0 | CleanMethod::NsD0 => {
            if (0..3).any(|a| grid.axis(a).periodic) {
                return Err(Error::PeriodicDirichletCleaning);
            }
            let narrow = matches!(cfg.method, CleanMethod::NsD0);
            if narrow {
                // fail early if the order lacks a compatible second derivative
                let probe = vec![0.0; n];
                let mut sink = vec![0.0; n];
                grid::try_apply_axis(grid, 0, AxisOp::D2, &probe, &mut sink, 1.0, 0.0)?;
            }
            // interior system: unknowns and residuals vanish on the boundary
            let mut rhs = div.data.clone();
            zero_boundary(grid, &mut rhs);
            let mut t = vec![0.0; n];
            let result = cg_solve(
                |phi, out| {
                    if narrow {
                        for axis in 0..3 {
                            grid::apply_axis(
                                grid,
                                axis,
                                AxisOp::D2,
                                phi,
                                out,
                                -1.0,
                                if axis == 0 { 0.0 } else { 1.0 },
                            );
                        }
                    } else {
                        out.fill(0.0);
                        for axis in 0..3 {
                            grid::apply_axis(grid, axis, AxisOp::D, phi, &mut t, 1.0, 0.0);
                            grid::apply_axis(grid, axis, AxisOp::D, &t, out, -1.0, 1.0);
                        }
                    }
                    zero_boundary(grid, out);
                },
                &rhs,
                |a, c| m_inner(grid, a, c),
                cfg.tol,
                cfg.max_iter,
            )?;
            stats.iterations = result.iterations;
            stats.breakdown = result.breakdown;
            let mut grad = vec![0.0; n];
            for axis in 0..3 {
                grid::apply_axis(grid, axis, AxisOp::D, &result.x, &mut grad, 1.0, 0.0);
                let bc = b.comp_mut(axis);
                for m in 0..n {
                    bc[m] += grad[m];
                }
            }
        }
    }

    grid::divergence(grid, b, &mut div);
    stats.post_div = grid::norm_m(grid, &div.data);
    stats.converged = stats.post_div <= cfg.tol;
    stats.energy_change = grid::energy(grid, b) - pre_energy;
    let ones = vec![1.0; n];
    for c in 0..3 {
        stats.mass_change[c] = m_inner(grid, &ones, b.comp(c)) - pre_mass[c];
    }
    Ok(stats)
}
