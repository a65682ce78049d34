//! Explicit low-storage Runge-Kutta time stepping and CFL-based step control.

use crate::grid::GridSpec;

/// Five-stage fourth-order low-storage (2N) Runge-Kutta scheme.
#[derive(Debug, Clone)]
pub struct LsrkScheme {
    pub a: [f64; 5],
    pub b: [f64; 5],
    pub c: [f64; 5],
}

impl LsrkScheme {
    /// Carpenter-Kennedy RK4(5) 2N-storage coefficients.
    pub fn rk45_2n() -> Self {
        LsrkScheme {
            a: [
                0.0,
                -567301805773.0 / 1357537059087.0,
                -2404267990393.0 / 2016746695238.0,
                -3550918686646.0 / 2091501179385.0,
                -1275806237668.0 / 842570457699.0,
            ],
            b: [
                1432997174477.0 / 9575080441755.0,
                5161836677717.0 / 13612068292357.0,
                1720146321549.0 / 2090206949498.0,
                3134564353537.0 / 4481467310338.0,
                2277821191437.0 / 14882151754819.0,
            ],
            c: [
                0.0,
                1432997174477.0 / 9575080441755.0,
                2526269341429.0 / 6820363962896.0,
                2006345519317.0 / 3224310063776.0,
                2802321613138.0 / 2924317926251.0,
            ],
        }
    }
}

/// One 2N-storage step: y <- y(t + dt). `register` and `rhs_buf` are reused
/// scratch of the same length as the state.
pub fn lsrk_step(
    scheme: &LsrkScheme,
    mut rhs: impl FnMut(f64, &[f64], &mut [f64]),
    t: f64,
    dt: f64,
    y: &mut [f64],
    register: &mut [f64],
    rhs_buf: &mut [f64],
) {
    assert_eq!(y.len(), register.len());
    assert_eq!(y.len(), rhs_buf.len());
    register.fill(0.0);
    for s in 0..5 {
        rhs(t + scheme.c[s] * dt, y, rhs_buf);
        let (a, b) = (scheme.a[s], scheme.b[s]);
        for ((k, r), yv) in register.iter_mut().zip(rhs_buf.iter()).zip(y.iter_mut()) {
            *k = a * *k + dt * r;
            *yv += b * *k;
        }
    }
}

/// CFL-based step-size selection.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct StepControl {
    pub cfl: f64,
    /// Scale the CFL number by 1/N (explicit treatment of the second-derivative
    /// Hall term needs dt ~ dx^2).
    pub hall_mode: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct DtResult {
    pub dt: f64,
    /// Set when max|u| vanished and the step fell back to the remaining time.
    pub degenerate: bool,
}

/// dt = cfl_eff * min_i dx_i / max|u|, clipped to the remaining time so the
/// final time is hit exactly. max|u| is the componentwise max-norm over nodes.
pub fn compute_dt(ctrl: &StepControl, grid: &GridSpec, u: &[f64], t_remaining: f64) -> DtResult {
    let max_u = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n_max = (0..3).map(|a| grid.axis(a).n).max().unwrap() as f64;
    let cfl_eff = if ctrl.hall_mode {
        ctrl.cfl / n_max
    } else {
        ctrl.cfl
    };
    if max_u <= 0.0 || !max_u.is_finite() {
        return DtResult {
            dt: t_remaining,
            degenerate: true,
        };
    }
    let dt = (cfl_eff * grid.min_dx() / max_u).min(t_remaining);
    DtResult {
        dt,
        degenerate: false,
    }
}
