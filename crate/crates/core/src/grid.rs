//! 3D Cartesian grid bookkeeping: tensor-product application of 1D operators
//! along axes, discrete vector calculus, boundary surface operators, and
//! M-weighted norms and integrals.
//!
//! Layout is axis-major with x1 fastest: idx = i + n1*(j + n2*k). All modules
//! share this convention.

use crate::error::Error;
use crate::sbp::{BandedOp, SbpOp1D};
use rayon::prelude::*;
use std::io::{Read, Write};

/// Operators below this node count run serially; rayon overhead dominates
/// otherwise on small test grids.
const PAR_THRESHOLD: usize = 32_768;

#[derive(Debug, Clone)]
pub enum AxisOperator {
    Sbp(SbpOp1D),
    /// Centered periodic stencil of the same interior order (no closures),
    /// coefficients with dx baked in.
    Periodic { coeffs: Vec<f64>, dx: f64 },
}

#[derive(Debug, Clone)]
pub struct Axis {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
    pub op: AxisOperator,
}

impl Axis {
    pub fn dx(&self) -> f64 {
        let len = self.hi - self.lo;
        if self.periodic {
            len / self.n as f64
        } else {
            len / (self.n - 1) as f64
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.dx()
    }
}

fn periodic_stencil(order: usize, dx: f64) -> Result<Vec<f64>, Error> {
    let c: &[f64] = match order {
        2 => &[-0.5, 0.0, 0.5],
        4 => &[1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0],
        6 => &[
            -1.0 / 60.0,
            3.0 / 20.0,
            -3.0 / 4.0,
            0.0,
            3.0 / 4.0,
            -3.0 / 20.0,
            1.0 / 60.0,
        ],
        _ => return Err(Error::UnsupportedOrder(order)),
    };
    Ok(c.iter().map(|v| v / dx).collect())
}

/// 3D Cartesian grid: per-axis bounds, node counts, periodicity and operators.
#[derive(Debug, Clone)]
pub struct GridSpec {
    axes: [Axis; 3],
    /// Per-axis norm weights (dx included; for periodic axes all equal dx).
    weights: [Vec<f64>; 3],
    order: usize,
}

impl GridSpec {
    pub fn new(
        order: usize,
        n: [usize; 3],
        lo: [f64; 3],
        hi: [f64; 3],
        periodic: [bool; 3],
    ) -> Result<Self, Error> {
        let mut axes = Vec::with_capacity(3);
        for a in 0..3 {
            let len = hi[a] - lo[a];
            if len <= 0.0 {
                return Err(Error::InvalidSpacing(len));
            }
            let op = if periodic[a] {
                let dx = len / n[a] as f64;
                AxisOperator::Periodic {
                    coeffs: periodic_stencil(order, dx)?,
                    dx,
                }
            } else {
                let dx = len / (n[a] - 1) as f64;
                AxisOperator::Sbp(SbpOp1D::new(order, n[a], dx)?)
            };
            axes.push(Axis {
                n: n[a],
                lo: lo[a],
                hi: hi[a],
                periodic: periodic[a],
                op,
            });
        }
        let axes: [Axis; 3] = axes.try_into().unwrap();
        let weights = [
            axis_weights(&axes[0]),
            axis_weights(&axes[1]),
            axis_weights(&axes[2]),
        ];
        Ok(GridSpec {
            axes,
            weights,
            order,
        })
    }

    /// Cube with the same node count and bounds on every axis.
    pub fn cube(order: usize, n: usize, lo: f64, hi: f64, periodic: bool) -> Result<Self, Error> {
        Self::new(
            order,
            [n; 3],
            [lo; 3],
            [hi; 3],
            [periodic; 3],
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }
    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }
    pub fn shape(&self) -> [usize; 3] {
        [self.axes[0].n, self.axes[1].n, self.axes[2].n]
    }
    pub fn total_nodes(&self) -> usize {
        self.axes[0].n * self.axes[1].n * self.axes[2].n
    }
    pub fn min_dx(&self) -> f64 {
        self.axes.iter().map(|a| a.dx()).fold(f64::INFINITY, f64::min)
    }
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.axes[0].n * (j + self.axes[1].n * k)
    }
    pub fn node_pos(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.axes[0].coord(i),
            self.axes[1].coord(j),
            self.axes[2].coord(k),
        ]
    }
    pub fn axis_weight(&self, a: usize) -> &[f64] {
        &self.weights[a]
    }
    /// Quadrature weight of node (i, j, k): product of the 1D norm weights.
    pub fn node_weight(&self, i: usize, j: usize, k: usize) -> f64 {
        self.weights[0][i] * self.weights[1][j] * self.weights[2][k]
    }
    /// Boundary norm weight of the given non-periodic axis (same on both ends).
    pub fn boundary_weight(&self, a: usize) -> f64 {
        self.weights[a][0]
    }

    /// Evaluate a function of position into a new scalar field.
    pub fn sample_scalar(&self, f: impl Fn([f64; 3]) -> f64) -> ScalarField {
        let [n1, n2, n3] = self.shape();
        let mut data = vec![0.0; self.total_nodes()];
        for k in 0..n3 {
            for j in 0..n2 {
                let base = n1 * (j + n2 * k);
                for i in 0..n1 {
                    data[base + i] = f(self.node_pos(i, j, k));
                }
            }
        }
        ScalarField { data }
    }

    /// Evaluate a vector-valued function of position into a new vector field.
    pub fn sample_vector(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> VectorField {
        let n = self.total_nodes();
        let mut out = VectorField::zeros(n);
        let [n1, n2, n3] = self.shape();
        for k in 0..n3 {
            for j in 0..n2 {
                let base = n1 * (j + n2 * k);
                for i in 0..n1 {
                    let v = f(self.node_pos(i, j, k));
                    for c in 0..3 {
                        out.comp_mut(c)[base + i] = v[c];
                    }
                }
            }
        }
        out
    }
}

fn axis_weights(axis: &Axis) -> Vec<f64> {
    match &axis.op {
        AxisOperator::Sbp(op) => op.m_weights(),
        AxisOperator::Periodic { dx, .. } => vec![*dx; axis.n],
    }
}

/// Scalar grid function: values at nodes in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        ScalarField { data: vec![0.0; n] }
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Vector grid function: three components stored contiguously
/// (component-major), so the whole state doubles as one flat slice.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    data: Vec<f64>,
    n: usize,
}

impl VectorField {
    pub fn zeros(n: usize) -> Self {
        VectorField {
            data: vec![0.0; 3 * n],
            n,
        }
    }
    pub fn from_flat(data: Vec<f64>) -> Self {
        assert_eq!(data.len() % 3, 0);
        let n = data.len() / 3;
        VectorField { data, n }
    }
    pub fn nodes(&self) -> usize {
        self.n
    }
    pub fn comp(&self, c: usize) -> &[f64] {
        &self.data[c * self.n..(c + 1) * self.n]
    }
    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.n..(c + 1) * self.n]
    }
    pub fn flat(&self) -> &[f64] {
        &self.data
    }
    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Which 1D operator to apply along an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisOp {
    D,
    DTranspose,
    D2,
}

enum OpTables<'a> {
    Banded(&'a BandedOp),
    Periodic(Vec<f64>),
}

fn resolve_op<'a>(axis: &'a Axis, which: AxisOp) -> Result<OpTables<'a>, Error> {
    match (&axis.op, which) {
        (AxisOperator::Sbp(op), AxisOp::D) => Ok(OpTables::Banded(op.d_op())),
        (AxisOperator::Sbp(op), AxisOp::DTranspose) => Ok(OpTables::Banded(op.dt_op())),
        (AxisOperator::Sbp(op), AxisOp::D2) => op
            .d2_op()
            .map(OpTables::Banded)
            .ok_or(Error::MissingSecondDerivative(op.order())),
        (AxisOperator::Periodic { coeffs, .. }, AxisOp::D) => Ok(OpTables::Periodic(coeffs.clone())),
        // antisymmetric circulant: transpose = reversed stencil
        (AxisOperator::Periodic { coeffs, .. }, AxisOp::DTranspose) => {
            Ok(OpTables::Periodic(coeffs.iter().rev().copied().collect()))
        }
        (AxisOperator::Periodic { .. }, AxisOp::D2) => Err(Error::PeriodicDirichletCleaning),
    }
}

/// out = beta * out + alpha * Op_axis(f). Panics on shape mismatch.
pub fn apply_axis(
    grid: &GridSpec,
    axis: usize,
    which: AxisOp,
    f: &[f64],
    out: &mut [f64],
    alpha: f64,
    beta: f64,
) {
    try_apply_axis(grid, axis, which, f, out, alpha, beta).expect("axis operator unavailable")
}

pub fn try_apply_axis(
    grid: &GridSpec,
    axis: usize,
    which: AxisOp,
    f: &[f64],
    out: &mut [f64],
    alpha: f64,
    beta: f64,
) -> Result<(), Error> {
    let total = grid.total_nodes();
    assert_eq!(f.len(), total, "field length mismatch");
    assert_eq!(out.len(), total, "output length mismatch");
    let [n1, n2, n3] = grid.shape();
    let tables = resolve_op(grid.axis(axis), which)?;
    scale_in_place(out, beta, total >= PAR_THRESHOLD);
    match axis {
        0 => sweep_axis0(&tables, f, out, n1, n2 * n3, alpha),
        1 => sweep_rowblocks(&tables, f, out, n2, n1, n3, alpha),
        2 => sweep_rowblocks(&tables, f, out, n3, n1 * n2, 1, alpha),
        _ => panic!("axis out of range"),
    }
    Ok(())
}

fn scale_in_place(out: &mut [f64], beta: f64, par: bool) {
    if beta == 1.0 {
        return;
    }
    if beta == 0.0 {
        if par {
            out.par_chunks_mut(1 << 15).for_each(|c| c.fill(0.0));
        } else {
            out.fill(0.0);
        }
    } else if par {
        out.par_chunks_mut(1 << 15)
            .for_each(|c| c.iter_mut().for_each(|v| *v *= beta));
    } else {
        out.iter_mut().for_each(|v| *v *= beta);
    }
}

/// Axis 0: lines are contiguous slices of length n1. Lines are batched so
/// each rayon task covers a cache-friendly amount of work.
fn sweep_axis0(tables: &OpTables, f: &[f64], out: &mut [f64], n1: usize, nlines: usize, alpha: f64) {
    let work = |lines_in: &[f64], lines_out: &mut [f64]| {
        for (i, o) in lines_in.chunks(n1).zip(lines_out.chunks_mut(n1)) {
            match tables {
                OpTables::Banded(op) => line_banded(op, i, o, alpha),
                OpTables::Periodic(c) => line_periodic(c, i, o, alpha),
            }
        }
    };
    if n1 * nlines >= PAR_THRESHOLD {
        let batch = (PAR_THRESHOLD / n1).max(1) * n1;
        out.par_chunks_mut(batch)
            .zip(f.par_chunks(batch))
            .for_each(|(o, i)| work(i, o));
    } else {
        work(f, out);
    }
}

fn line_banded(op: &BandedOp, f: &[f64], out: &mut [f64], alpha: f64) {
    let n = f.len();
    if let Some(mat) = op.dense_fallback() {
        for i in 0..n {
            let row = &mat[i * n..(i + 1) * n];
            let s: f64 = row.iter().zip(f).map(|(c, v)| c * v).sum();
            out[i] += alpha * s;
        }
        return;
    }
    let closure = op.closure();
    let interior = op.interior();
    let nb = closure.len();
    let w = interior.len() / 2;
    for (i, row) in closure.iter().enumerate() {
        let s: f64 = row.iter().zip(f).map(|(c, v)| c * v).sum();
        out[i] += alpha * s;
    }
    for (i, o) in out[nb..n - nb].iter_mut().enumerate() {
        let window = &f[nb + i - w..nb + i + w + 1];
        let s: f64 = interior.iter().zip(window).map(|(c, v)| c * v).sum();
        *o += alpha * s;
    }
    let mirror = op.mirror();
    for (i, row) in closure.iter().enumerate() {
        let s: f64 = row.iter().zip(f.iter().rev()).map(|(c, v)| c * v).sum();
        out[n - 1 - i] += alpha * mirror * s;
    }
}

fn line_periodic(coeffs: &[f64], f: &[f64], out: &mut [f64], alpha: f64) {
    let n = f.len();
    let w = coeffs.len() / 2;
    for i in 0..n {
        let mut s = 0.0;
        if i >= w && i + w < n {
            for (k, &c) in coeffs.iter().enumerate() {
                s += c * f[i + k - w];
            }
        } else {
            for (k, &c) in coeffs.iter().enumerate() {
                let j = (i + k + n - w) % n;
                s += c * f[j];
            }
        }
        out[i] += alpha * s;
    }
}

/// Axes 1 and 2: slabs of `nrows` contiguous rows of length `rowlen`;
/// `nslabs` independent slabs (n3 for axis 1, one for axis 2).
fn sweep_rowblocks(
    tables: &OpTables,
    f: &[f64],
    out: &mut [f64],
    nrows: usize,
    rowlen: usize,
    nslabs: usize,
    alpha: f64,
) {
    let slab = nrows * rowlen;
    let work = |fin: &[f64], fout: &mut [f64]| {
        for (i, o) in fin.chunks(slab).zip(fout.chunks_mut(slab)) {
            match tables {
                OpTables::Banded(op) => rowblock_banded(op, i, o, nrows, rowlen, alpha),
                OpTables::Periodic(c) => rowblock_periodic(c, i, o, nrows, rowlen, alpha),
            }
        }
    };
    if nslabs > 1 && slab * nslabs >= PAR_THRESHOLD {
        let batch = (PAR_THRESHOLD / slab).max(1) * slab;
        out.par_chunks_mut(batch)
            .zip(f.par_chunks(batch))
            .for_each(|(o, i)| work(i, o));
    } else if nslabs > 1 {
        work(f, out);
    } else {
        // single big slab (axis 2): parallelise over output row ranges
        if slab >= PAR_THRESHOLD {
            let nthreads = rayon::current_num_threads().max(1);
            let rows_per = nrows.div_ceil(nthreads);
            let fin = f;
            out.par_chunks_mut(rows_per * rowlen)
                .enumerate()
                .for_each(|(t, osub)| {
                    let r0 = t * rows_per;
                    let r1 = (r0 + osub.len() / rowlen).min(nrows);
                    rowblock_banded_range(tables, fin, osub, nrows, rowlen, r0, r1, alpha);
                });
        } else {
            work(f, out);
        }
    }
}

fn rowblock_banded(op: &BandedOp, f: &[f64], out: &mut [f64], nrows: usize, rowlen: usize, alpha: f64) {
    rowblock_banded_range(
        &OpTables::Banded(op),
        f,
        out,
        nrows,
        rowlen,
        0,
        nrows,
        alpha,
    )
}

fn rowblock_periodic(c: &[f64], f: &[f64], out: &mut [f64], nrows: usize, rowlen: usize, alpha: f64) {
    rowblock_banded_range(
        &OpTables::Periodic(c.to_vec()),
        f,
        out,
        nrows,
        rowlen,
        0,
        nrows,
        alpha,
    )
}

/// Compute output rows [r0, r1) of a row-block sweep; `out` starts at row r0.
fn rowblock_banded_range(
    tables: &OpTables,
    f: &[f64],
    out: &mut [f64],
    nrows: usize,
    rowlen: usize,
    r0: usize,
    r1: usize,
    alpha: f64,
) {
    let row_in = |r: usize| &f[r * rowlen..(r + 1) * rowlen];
    let add_row = |out: &mut [f64], orow: usize, irow: usize, coeff: f64| {
        if coeff == 0.0 {
            return;
        }
        let dst = &mut out[(orow - r0) * rowlen..(orow - r0 + 1) * rowlen];
        let src = row_in(irow);
        let c = alpha * coeff;
        for (d, s) in dst.iter_mut().zip(src) {
            *d += c * s;
        }
    };
    match tables {
        OpTables::Periodic(coeffs) => {
            let w = coeffs.len() / 2;
            for r in r0..r1 {
                for (k, &c) in coeffs.iter().enumerate() {
                    let src = (r + k + nrows - w) % nrows;
                    add_row(out, r, src, c);
                }
            }
        }
        OpTables::Banded(op) => {
            if let Some(mat) = op.dense_fallback() {
                for r in r0..r1 {
                    for j in 0..nrows {
                        add_row(out, r, j, mat[r * nrows + j]);
                    }
                }
                return;
            }
            let closure = op.closure();
            let interior = op.interior();
            let nb = closure.len();
            let w = interior.len() / 2;
            let mirror = op.mirror();
            for r in r0..r1 {
                if r < nb {
                    for (j, &c) in closure[r].iter().enumerate() {
                        add_row(out, r, j, c);
                    }
                } else if r >= nrows - nb {
                    let rr = nrows - 1 - r;
                    for (j, &c) in closure[rr].iter().enumerate() {
                        add_row(out, r, nrows - 1 - j, mirror * c);
                    }
                } else {
                    for (k, &c) in interior.iter().enumerate() {
                        add_row(out, r, r + k - w, c);
                    }
                }
            }
        }
    }
}

/// Discrete divergence: sum_j D_j B_j.
pub fn divergence(grid: &GridSpec, b: &VectorField, out: &mut ScalarField) {
    apply_axis(grid, 0, AxisOp::D, b.comp(0), &mut out.data, 1.0, 0.0);
    apply_axis(grid, 1, AxisOp::D, b.comp(1), &mut out.data, 1.0, 1.0);
    apply_axis(grid, 2, AxisOp::D, b.comp(2), &mut out.data, 1.0, 1.0);
}

/// Discrete curl: (D x B)_i = eps_ijk D_j B_k.
pub fn curl(grid: &GridSpec, b: &VectorField, out: &mut VectorField) {
    // out_0 = D1 B2 - D2 B1  (axes are 0-based here)
    {
        let o = out.comp_mut(0);
        apply_axis(grid, 1, AxisOp::D, b.comp(2), o, 1.0, 0.0);
        apply_axis(grid, 2, AxisOp::D, b.comp(1), o, -1.0, 1.0);
    }
    {
        let o = out.comp_mut(1);
        apply_axis(grid, 2, AxisOp::D, b.comp(0), o, 1.0, 0.0);
        apply_axis(grid, 0, AxisOp::D, b.comp(2), o, -1.0, 1.0);
    }
    {
        let o = out.comp_mut(2);
        apply_axis(grid, 0, AxisOp::D, b.comp(1), o, 1.0, 0.0);
        apply_axis(grid, 1, AxisOp::D, b.comp(0), o, -1.0, 1.0);
    }
}

/// Discrete gradient of a scalar potential.
pub fn gradient(grid: &GridSpec, phi: &ScalarField, out: &mut VectorField) {
    for a in 0..3 {
        apply_axis(grid, a, AxisOp::D, &phi.data, out.comp_mut(a), 1.0, 0.0);
    }
}

/// M-weighted inner product; fixed sequential reduction order for
/// bit-reproducible runs.
pub fn inner_m(grid: &GridSpec, f: &[f64], g: &[f64]) -> f64 {
    let [n1, n2, n3] = grid.shape();
    assert_eq!(f.len(), grid.total_nodes());
    assert_eq!(g.len(), grid.total_nodes());
    let (w1, w2, w3) = (grid.axis_weight(0), grid.axis_weight(1), grid.axis_weight(2));
    let mut acc = 0.0;
    for k in 0..n3 {
        for j in 0..n2 {
            let wjk = w2[j] * w3[k];
            let base = n1 * (j + n2 * k);
            let mut line = 0.0;
            for i in 0..n1 {
                line += w1[i] * f[base + i] * g[base + i];
            }
            acc += wjk * line;
        }
    }
    acc
}

pub fn norm_m(grid: &GridSpec, f: &[f64]) -> f64 {
    inner_m(grid, f, f).sqrt()
}

/// Magnetic energy ||B||_M^2 = sum_i <B_i, B_i>_M.
pub fn energy(grid: &GridSpec, b: &VectorField) -> f64 {
    (0..3).map(|c| inner_m(grid, b.comp(c), b.comp(c))).sum()
}

/// M-norm of the divergence restricted to nodes interior in every axis.
pub fn interior_div_norm(grid: &GridSpec, b: &VectorField) -> f64 {
    let mut div = ScalarField::zeros(grid.total_nodes());
    divergence(grid, b, &mut div);
    let [n1, n2, n3] = grid.shape();
    let mut acc = 0.0;
    for k in 1..n3 - 1 {
        for j in 1..n2 - 1 {
            for i in 1..n1 - 1 {
                let v = div.data[grid.idx(i, j, k)];
                acc += grid.node_weight(i, j, k) * v * v;
            }
        }
    }
    acc.sqrt()
}

/// Lifting operator along one axis: out = M^{-1} E_a data (signed) or
/// M^{-1} |E_a| data (absolute). Nonzero only on the two faces of the axis.
pub fn boundary_lift(
    grid: &GridSpec,
    axis: usize,
    data: &ScalarField,
    signed: bool,
    out: &mut ScalarField,
) {
    assert!(
        !grid.axis(axis).periodic,
        "boundary lift undefined on a periodic axis"
    );
    out.data.fill(0.0);
    let mb = grid.boundary_weight(axis);
    let low_sign = if signed { -1.0 } else { 1.0 };
    for_each_face_node(grid, axis, Face::Low, |idx, _| {
        out.data[idx] = low_sign * data.data[idx] / mb;
    });
    for_each_face_node(grid, axis, Face::High, |idx, _| {
        out.data[idx] = data.data[idx] / mb;
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Low,
    High,
}

impl Face {
    /// Outward normal component along the face's axis.
    pub fn normal(self) -> f64 {
        match self {
            Face::Low => -1.0,
            Face::High => 1.0,
        }
    }
}

/// Visit every node of one axis face; callback gets the flat index and (i,j,k).
pub fn for_each_face_node(
    grid: &GridSpec,
    axis: usize,
    face: Face,
    mut f: impl FnMut(usize, [usize; 3]),
) {
    let [n1, n2, n3] = grid.shape();
    let fixed = match face {
        Face::Low => 0,
        Face::High => grid.axis(axis).n - 1,
    };
    match axis {
        0 => {
            for k in 0..n3 {
                for j in 0..n2 {
                    f(grid.idx(fixed, j, k), [fixed, j, k]);
                }
            }
        }
        1 => {
            for k in 0..n3 {
                for i in 0..n1 {
                    f(grid.idx(i, fixed, k), [i, fixed, k]);
                }
            }
        }
        2 => {
            for j in 0..n2 {
                for i in 0..n1 {
                    f(grid.idx(i, j, fixed), [i, j, fixed]);
                }
            }
        }
        _ => panic!("axis out of range"),
    }
}

/// Dense matrix of the first-derivative operator along one axis
/// (test/diagnostic oracle).
pub fn axis_d_dense(grid: &GridSpec, axis: usize) -> Vec<f64> {
    match &grid.axis(axis).op {
        AxisOperator::Sbp(op) => op.d_op_dense(),
        AxisOperator::Periodic { coeffs, .. } => {
            let n = grid.axis(axis).n;
            let w = coeffs.len() / 2;
            let mut mat = vec![0.0; n * n];
            for i in 0..n {
                for (k, &c) in coeffs.iter().enumerate() {
                    let j = (i + k + n - w) % n;
                    mat[i * n + j] += c;
                }
            }
            mat
        }
    }
}

/// Quadrature of `f` over one face using the tangential norm weights.
pub fn face_quadrature(grid: &GridSpec, axis: usize, face: Face, f: &[f64]) -> f64 {
    let mut acc = 0.0;
    let (w1, w2, w3) = (grid.axis_weight(0), grid.axis_weight(1), grid.axis_weight(2));
    for_each_face_node(grid, axis, face, |idx, [i, j, k]| {
        let w = match axis {
            0 => w2[j] * w3[k],
            1 => w1[i] * w3[k],
            _ => w1[i] * w2[j],
        };
        acc += w * f[idx];
    });
    acc
}

// ---------------------------------------------------------------------------
// snapshots

const MAGIC: &[u8; 8] = b"GRIDFN01";

/// Flat binary dump: axis sizes and component count as little-endian u64,
/// then doubles in layout order.
pub fn write_field_binary(
    w: &mut impl Write,
    shape: [usize; 3],
    components: &[&[f64]],
) -> Result<(), Error> {
    for comp in components {
        if comp.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("refusing to write non-finite field".into()));
        }
    }
    w.write_all(&MAGIC[..8])?;
    for s in shape {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    w.write_all(&(components.len() as u64).to_le_bytes())?;
    for comp in components {
        for v in *comp {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_field_binary(r: &mut impl Read) -> Result<([usize; 3], Vec<Vec<f64>>), Error> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidConfig("bad field snapshot header".into()));
    }
    let mut u64buf = [0u8; 8];
    let mut shape = [0usize; 3];
    for s in &mut shape {
        r.read_exact(&mut u64buf)?;
        *s = u64::from_le_bytes(u64buf) as usize;
    }
    r.read_exact(&mut u64buf)?;
    let ncomp = u64::from_le_bytes(u64buf) as usize;
    let n = shape[0] * shape[1] * shape[2];
    let mut comps = Vec::with_capacity(ncomp);
    for _ in 0..ncomp {
        let mut data = vec![0.0; n];
        for v in &mut data {
            r.read_exact(&mut u64buf)?;
            *v = f64::from_le_bytes(u64buf);
            if !v.is_finite() {
                return Err(Error::NonFinite("non-finite value in snapshot".into()));
            }
        }
        comps.push(data);
    }
    Ok((shape, comps))
}

/// CSV dump for small grids: one row per node with coordinates and values.
pub fn write_field_csv(
    w: &mut impl Write,
    grid: &GridSpec,
    components: &[&[f64]],
) -> Result<(), Error> {
    let [n1, n2, n3] = grid.shape();
    write!(w, "x1,x2,x3")?;
    for c in 0..components.len() {
        write!(w, ",v{c}")?;
    }
    writeln!(w)?;
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let [x, y, z] = grid.node_pos(i, j, k);
                write!(w, "{x:.17e},{y:.17e},{z:.17e}")?;
                let idx = grid.idx(i, j, k);
                for comp in components {
                    write!(w, ",{:.17e}", comp[idx])?;
                }
                writeln!(w)?;
            }
        }
    }
    Ok(())
}
