//! Closed-form solutions and data providers for the test cases: a rotating
//! field for the linear equation, a confined stationary state, an exact
//! Hall solution on a periodic box (also used as outflow initial data), and
//! the boundary-driven divergence-growth scenario.

use crate::grid::{GridSpec, VectorField};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Experiment selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    Rotation3d,
    Confined,
    HallPeriodic,
    HallOutflow,
    Divbound,
}

impl CaseKind {
    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Rotation3d => "rotation3d",
            CaseKind::Confined => "confined",
            CaseKind::HallPeriodic => "hall-periodic",
            CaseKind::HallOutflow => "hall-outflow",
            CaseKind::Divbound => "divbound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "rotation3d" => CaseKind::Rotation3d,
            "confined" => CaseKind::Confined,
            "hall-periodic" => CaseKind::HallPeriodic,
            "hall-outflow" => CaseKind::HallOutflow,
            "divbound" => CaseKind::Divbound,
            _ => return None,
        })
    }

    pub fn hall(self) -> bool {
        matches!(self, CaseKind::HallPeriodic | CaseKind::HallOutflow)
    }

    pub fn periodic(self) -> bool {
        matches!(self, CaseKind::HallPeriodic)
    }

    pub fn default_domain(self) -> ([f64; 3], [f64; 3]) {
        match self {
            CaseKind::Rotation3d => ([-1.0; 3], [1.0; 3]),
            CaseKind::Confined => ([0.0; 3], [1.0; 3]),
            CaseKind::HallPeriodic | CaseKind::HallOutflow => {
                ([0.0; 3], [4.0 * std::f64::consts::PI / 3.0; 3])
            }
            CaseKind::Divbound => ([0.0; 3], [std::f64::consts::PI, 1.0, 1.0]),
        }
    }

    pub fn default_final_time(self) -> f64 {
        match self {
            CaseKind::Rotation3d => 2.0 * std::f64::consts::PI,
            CaseKind::Confined => 2.0,
            CaseKind::HallPeriodic => 1.0,
            CaseKind::HallOutflow => 5.0,
            CaseKind::Divbound => 5.0,
        }
    }
}

// ---------------------------------------------------------------------------
// rotation test case

/// Rotation matrix about the (1,1,1)/sqrt(3) axis by angle t.
pub fn rotation_matrix(t: f64) -> [[f64; 3]; 3] {
    let c = t.cos();
    let s = t.sin();
    let third = 1.0 / 3.0;
    [
        [
            third * (1.0 + 2.0 * c),
            third * (1.0 - c - SQRT3 * s),
            third * (1.0 - c + SQRT3 * s),
        ],
        [
            third * (1.0 - c + SQRT3 * s),
            third * (1.0 + 2.0 * c),
            third * (1.0 - c - SQRT3 * s),
        ],
        [
            third * (1.0 - c - SQRT3 * s),
            third * (1.0 - c + SQRT3 * s),
            third * (1.0 + 2.0 * c),
        ],
    ]
}

fn matvec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Overall amplitude of the rotating profile used by the error studies.
const PROFILE_AMPLITUDE: f64 = 51.0;

fn rotation_b0([x, y, z]: [f64; 3]) -> [f64; 3] {
    let alpha = (-(5.0 / 3.0)
        * (3.0 - 2.0 * (3.0 + SQRT3) * x + 12.0 * x * x - 2.0 * (-3.0 + SQRT3) * y
            + 12.0 * y * y
            + 4.0 * SQRT3 * z
            + 12.0 * z * z))
        .exp();
    [
        PROFILE_AMPLITUDE * alpha / 48.0 * (3.0 - SQRT3 - 4.0 * SQRT3 * y + 4.0 * SQRT3 * z),
        PROFILE_AMPLITUDE * alpha / 48.0 * (-3.0 - SQRT3 + 4.0 * SQRT3 * x - 4.0 * SQRT3 * z),
        PROFILE_AMPLITUDE * alpha / (8.0 * SQRT3) * (1.0 - 2.0 * x + 2.0 * y),
    ]
}

/// Exact solution of the linear induction equation: a localised profile
/// rigidly rotating with the stationary velocity field.
pub fn eval_rotation3d(t: f64, pos: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let back = rotation_matrix(-t);
    let fwd = rotation_matrix(t);
    let b = matvec(&fwd, rotation_b0(matvec(&back, pos)));
    (b, rotation_velocity(pos))
}

pub fn rotation_velocity([x, y, z]: [f64; 3]) -> [f64; 3] {
    [(z - y) / SQRT3, (x - z) / SQRT3, (y - x) / SQRT3]
}

// ---------------------------------------------------------------------------
// confined stationary state

/// Stationary solution with u = B and u vanishing on the boundary of [0,1]^3.
pub fn eval_confined([x, y, z]: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    use std::f64::consts::PI;
    let u = [
        (PI * x).sin() * (PI * y).cos() * (PI * z).cos(),
        (PI * x).cos() * (PI * y).sin() * (PI * z).cos(),
        -2.0 * (PI * x).cos() * (PI * y).cos() * (PI * z).sin(),
    ];
    (u, u)
}

// ---------------------------------------------------------------------------
// exact Hall solution (periodic box / outflow initial data)

/// Parameters of the exact incompressible Hall solution B = alpha u + n.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct HallExactParams {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub n: [f64; 3],
}

impl Default for HallExactParams {
    fn default() -> Self {
        HallExactParams {
            alpha: 0.5,
            a: 1.0,
            b: 1.0,
            c: 1.0,
            n: [1.0 / SQRT3; 3],
        }
    }
}

impl HallExactParams {
    /// Wave number k = (1 - alpha^2)/alpha; 3/2 for the defaults.
    pub fn wavenumber(&self) -> f64 {
        (1.0 - self.alpha * self.alpha) / self.alpha
    }

    pub fn velocity(&self, t: f64, [x, y, z]: [f64; 3]) -> [f64; 3] {
        let k = self.wavenumber();
        let p = self.alpha * k * t;
        [
            self.a * (k * y + p * self.n[1]).cos() + self.b * (k * z + p * self.n[2]).sin(),
            self.b * (k * z + p * self.n[2]).cos() + self.c * (k * x + p * self.n[0]).sin(),
            self.c * (k * x + p * self.n[0]).cos() + self.a * (k * y + p * self.n[1]).sin(),
        ]
    }

    /// Time derivative of the velocity (used by residual checks).
    pub fn velocity_tendency(&self, t: f64, [x, y, z]: [f64; 3]) -> [f64; 3] {
        let k = self.wavenumber();
        let p = self.alpha * k * t;
        let dp = self.alpha * k;
        [
            -self.a * (k * y + p * self.n[1]).sin() * dp * self.n[1]
                + self.b * (k * z + p * self.n[2]).cos() * dp * self.n[2],
            -self.b * (k * z + p * self.n[2]).sin() * dp * self.n[2]
                + self.c * (k * x + p * self.n[0]).cos() * dp * self.n[0],
            -self.c * (k * x + p * self.n[0]).sin() * dp * self.n[0]
                + self.a * (k * y + p * self.n[1]).cos() * dp * self.n[1],
        ]
    }
}

/// Exact solution of the Hall induction equation with rho = 1.
pub fn eval_hall_periodic(t: f64, pos: [f64; 3], p: &HallExactParams) -> ([f64; 3], [f64; 3]) {
    let u = p.velocity(t, pos);
    let b = [
        p.alpha * u[0] + p.n[0],
        p.alpha * u[1] + p.n[1],
        p.alpha * u[2] + p.n[2],
    ];
    (b, u)
}

// ---------------------------------------------------------------------------
// boundary-driven divergence growth

/// Boundary data B^b_i(t) = delta_{i1} sin(n t) for the divergence-growth
/// scenario (uniform velocity (1,0,0), zero initial data).
pub fn eval_divbound_boundary(t: f64, n_mode: u32) -> [f64; 3] {
    [(n_mode as f64 * t).sin(), 0.0, 0.0]
}

// ---------------------------------------------------------------------------
// grid sampling

/// Boundary data B^b evaluated per face node and time.
#[derive(Debug, Clone)]
pub enum BoundaryProvider {
    Zero,
    /// Analytic rotating solution of the linear equation.
    Rotation3d,
    /// Space-uniform (sin(n t), 0, 0) driving signal.
    Divbound { n_mode: u32 },
    /// Exact Hall solution (confined case shares it with B = u).
    Confined,
}

impl BoundaryProvider {
    pub fn eval(&self, t: f64, pos: [f64; 3]) -> [f64; 3] {
        match self {
            BoundaryProvider::Zero => [0.0; 3],
            BoundaryProvider::Rotation3d => eval_rotation3d(t, pos).0,
            BoundaryProvider::Divbound { n_mode } => eval_divbound_boundary(t, *n_mode),
            BoundaryProvider::Confined => eval_confined(pos).0,
        }
    }
}

/// Prescribed velocity data, sampled to the grid each Runge-Kutta stage
/// (cached by the caller when stationary).
#[derive(Debug, Clone)]
pub enum VelocityField {
    Rotation3d,
    Confined,
    HallExact(HallExactParams),
    Uniform([f64; 3]),
}

impl VelocityField {
    pub fn stationary(&self) -> bool {
        !matches!(self, VelocityField::HallExact(_))
    }

    pub fn fill(&self, grid: &GridSpec, t: f64, out: &mut VectorField) {
        match self {
            VelocityField::Rotation3d => fill_pointwise(grid, out, rotation_velocity),
            VelocityField::Confined => fill_pointwise(grid, out, |pos| eval_confined(pos).1),
            VelocityField::Uniform(v) => {
                for c in 0..3 {
                    out.comp_mut(c).fill(v[c]);
                }
            }
            VelocityField::HallExact(p) => fill_hall_velocity(grid, t, p, out),
        }
    }
}

fn fill_pointwise(grid: &GridSpec, out: &mut VectorField, f: impl Fn([f64; 3]) -> [f64; 3]) {
    let [n1, n2, n3] = grid.shape();
    for k in 0..n3 {
        for j in 0..n2 {
            let base = n1 * (j + n2 * k);
            for i in 0..n1 {
                let v = f(grid.node_pos(i, j, k));
                for c in 0..3 {
                    out.comp_mut(c)[base + i] = v[c];
                }
            }
        }
    }
}

/// The exact Hall velocity is separable per axis, so each component is a sum
/// of two 1D lookups; avoids one trig call per node.
fn fill_hall_velocity(grid: &GridSpec, t: f64, p: &HallExactParams, out: &mut VectorField) {
    let k = p.wavenumber();
    let phase = p.alpha * k * t;
    let [n1, n2, n3] = grid.shape();
    let tab = |axis: usize, amp: f64, cosine: bool, n_i: f64| -> Vec<f64> {
        (0..grid.axis(axis).n)
            .map(|i| {
                let arg = k * grid.axis(axis).coord(i) + phase * n_i;
                if cosine {
                    amp * arg.cos()
                } else {
                    amp * arg.sin()
                }
            })
            .collect()
    };
    let a_cos_y = tab(1, p.a, true, p.n[1]);
    let a_sin_y = tab(1, p.a, false, p.n[1]);
    let b_cos_z = tab(2, p.b, true, p.n[2]);
    let b_sin_z = tab(2, p.b, false, p.n[2]);
    let c_cos_x = tab(0, p.c, true, p.n[0]);
    let c_sin_x = tab(0, p.c, false, p.n[0]);
    for kk in 0..n3 {
        for j in 0..n2 {
            let base = n1 * (j + n2 * kk);
            let u1_yz = a_cos_y[j] + b_sin_z[kk];
            let u2_z = b_cos_z[kk];
            let u3_y = a_sin_y[j];
            out.comp_mut(0)[base..base + n1].fill(u1_yz);
            let u2 = &mut out.comp_mut(1)[base..base + n1];
            for (i, v) in u2.iter_mut().enumerate() {
                *v = u2_z + c_sin_x[i];
            }
            let u3 = &mut out.comp_mut(2)[base..base + n1];
            for (i, v) in u3.iter_mut().enumerate() {
                *v = c_cos_x[i] + u3_y;
            }
        }
    }
}

/// Sample the analytic magnetic field of a case at time t.
/// Returns None when no closed form is available (outflow at t > 0).
pub fn sample_exact_b(
    grid: &GridSpec,
    case: CaseKind,
    hall_params: &HallExactParams,
    t: f64,
) -> Option<VectorField> {
    let mut out = VectorField::zeros(grid.total_nodes());
    match case {
        CaseKind::Rotation3d => fill_pointwise(grid, &mut out, |pos| eval_rotation3d(t, pos).0),
        CaseKind::Confined => fill_pointwise(grid, &mut out, |pos| eval_confined(pos).0),
        CaseKind::HallPeriodic => {
            fill_pointwise(grid, &mut out, |pos| eval_hall_periodic(t, pos, hall_params).0)
        }
        CaseKind::HallOutflow if t == 0.0 => fill_pointwise(grid, &mut out, |pos| {
            eval_hall_periodic(0.0, pos, hall_params).0
        }),
        CaseKind::Divbound if t == 0.0 => {}
        _ => return None,
    }
    Some(out)
}
