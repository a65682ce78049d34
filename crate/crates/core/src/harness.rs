//! Experiment harness: run configurations, the time loop with optional
//! divergence cleaning, error norms and experimental orders of convergence,
//! CFL stability scans, and CSV/gnuplot output.

use crate::cleaning::{self, CleanMethod, DivCleanConfig};
use crate::error::Error;
use crate::grid::{self, GridSpec, ScalarField, VectorField};
use crate::rhs::{BcKind, FormSelection, HallParams, InductionRhs, SourceForm, TermForm};
use crate::solutions::{self, BoundaryProvider, CaseKind, HallExactParams, VelocityField};
use crate::time::{compute_dt, lsrk_step, LsrkScheme, StepControl};
use std::io::Write;
use std::path::{Path, PathBuf};

fn default_order() -> usize {
    4
}
fn default_n() -> usize {
    40
}
fn default_cfl() -> f64 {
    0.95
}
fn default_stride() -> usize {
    10
}
fn default_forms() -> FormSelection {
    FormSelection::new(TermForm::Central, SourceForm::Zero, TermForm::Central)
}
fn default_divbound_mode() -> u32 {
    1
}

/// One simulation configuration; JSON keys mirror the field names.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub case: CaseKind,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Per-axis node counts; defaults to n on every axis (the divergence
    /// scenario uses a slab since its solution is constant tangentially).
    #[serde(default)]
    pub n_per_axis: Option<[usize; 3]>,
    #[serde(default = "default_forms")]
    pub forms: FormSelection,
    #[serde(default)]
    pub divclean: DivCleanConfig,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Defaults to the per-case final time.
    #[serde(default)]
    pub final_time: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Time-series sampling stride in steps.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Replace u/2 by u in the outflow boundary term (comparison runs only).
    #[serde(default)]
    pub outflow_u_full: bool,
    /// Mode number of the divergence-growth driving signal.
    #[serde(default = "default_divbound_mode")]
    pub divbound_mode: u32,
    #[serde(default)]
    pub hall_params: Option<HallExactParams>,
}

impl RunConfig {
    pub fn new(case: CaseKind) -> Self {
        RunConfig {
            case,
            order: default_order(),
            n: default_n(),
            n_per_axis: None,
            forms: default_forms(),
            divclean: DivCleanConfig::default(),
            cfl: default_cfl(),
            final_time: None,
            output_dir: None,
            stride: default_stride(),
            outflow_u_full: false,
            divbound_mode: default_divbound_mode(),
            hall_params: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, Error> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if ![2, 4, 6].contains(&self.order) {
            return Err(Error::UnsupportedOrder(self.order));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::InvalidConfig("cfl must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidConfig("stride must be >= 1".into()));
        }
        if self.divbound_mode == 0 {
            return Err(Error::InvalidConfig("divbound mode must be >= 1".into()));
        }
        if let Some(t) = self.final_time {
            if !(t >= 0.0) {
                return Err(Error::InvalidConfig("final_time must be >= 0".into()));
            }
        }
        self.divclean.validate()?;
        if self.case == CaseKind::HallPeriodic && self.outflow_u_full {
            return Err(Error::InvalidConfig(
                "outflow_u_full only applies to outflow boundaries".into(),
            ));
        }
        Ok(())
    }

    pub fn hall_exact(&self) -> HallExactParams {
        self.hall_params.unwrap_or_default()
    }

    pub fn resolved_final_time(&self) -> f64 {
        self.final_time.unwrap_or_else(|| self.case.default_final_time())
    }

    pub fn shape(&self) -> [usize; 3] {
        if let Some(s) = self.n_per_axis {
            return s;
        }
        match self.case {
            // tangentially constant solution: a thin slab is enough
            CaseKind::Divbound => {
                let nt = (2 * self.order + 2).max(10);
                [self.n, nt, nt]
            }
            _ => [self.n; 3],
        }
    }

    pub fn build_grid(&self) -> Result<GridSpec, Error> {
        let (lo, hi) = self.case.default_domain();
        let periodic = self.case.periodic();
        GridSpec::new(self.order, self.shape(), lo, hi, [periodic; 3])
    }

    pub fn velocity(&self) -> VelocityField {
        match self.case {
            CaseKind::Rotation3d => VelocityField::Rotation3d,
            CaseKind::Confined => VelocityField::Confined,
            CaseKind::HallPeriodic | CaseKind::HallOutflow => {
                VelocityField::HallExact(self.hall_exact())
            }
            CaseKind::Divbound => VelocityField::Uniform([1.0, 0.0, 0.0]),
        }
    }

    pub fn bc(&self) -> BcKind {
        match self.case {
            CaseKind::Rotation3d => BcKind::LinearInflow(BoundaryProvider::Rotation3d),
            CaseKind::Confined => BcKind::LinearInflow(BoundaryProvider::Confined),
            CaseKind::HallPeriodic => BcKind::Periodic,
            CaseKind::HallOutflow => BcKind::HallOutflow {
                u_full: self.outflow_u_full,
            },
            CaseKind::Divbound => BcKind::LinearInflow(BoundaryProvider::Divbound {
                n_mode: self.divbound_mode,
            }),
        }
    }

    pub fn hall(&self, grid: &GridSpec) -> Result<Option<HallParams>, Error> {
        if self.case.hall() {
            // constant particle density rho = 1 in all Hall experiments
            Ok(Some(HallParams::uniform(grid, 1.0)?))
        } else {
            Ok(None)
        }
    }

    pub fn initial_state(&self, grid: &GridSpec) -> VectorField {
        solutions::sample_exact_b(grid, self.case, &self.hall_exact(), 0.0)
            .unwrap_or_else(|| VectorField::zeros(grid.total_nodes()))
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            cfl: self.cfl,
            hall_mode: self.case.hall(),
        }
    }
}

/// Aggregated cleaning activity over a run.
#[derive(Debug, Clone, Default)]
pub struct CleanSummary {
    pub applications: usize,
    pub skipped: usize,
    pub total_iterations: usize,
    pub max_post_div: f64,
    pub breakdowns: usize,
}

impl CleanSummary {
    fn absorb(&mut self, s: &cleaning::CleanStats) {
        if s.skipped {
            self.skipped += 1;
        } else {
            self.applications += 1;
            self.total_iterations += s.iterations;
            self.max_post_div = self.max_post_div.max(s.post_div);
        }
        if s.breakdown {
            self.breakdowns += 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub grid: GridSpec,
    pub state: VectorField,
    /// (t, ||B||_M^2, ||div B||_M) samples; NaN entries mark blow-up.
    pub series: Vec<(f64, f64, f64)>,
    pub steps: usize,
    pub final_time: f64,
    pub blew_up: bool,
    pub clean_summary: CleanSummary,
    pub wall_seconds: f64,
}

fn series_sample(grid: &GridSpec, b: &VectorField, div_buf: &mut ScalarField) -> (f64, f64) {
    let energy = grid::energy(grid, b);
    grid::divergence(grid, b, div_buf);
    let div = grid::norm_m(grid, &div_buf.data);
    (energy, div)
}

/// Advance a configuration to its final time.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunResult, Error> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let grid = cfg.build_grid()?;
    let mut rhs = InductionRhs::new(
        grid.clone(),
        cfg.forms,
        cfg.bc(),
        cfg.hall(&grid)?,
        cfg.velocity(),
    )?;
    let scheme = LsrkScheme::rk45_2n();
    let ctrl = cfg.step_control();
    let t_end = cfg.resolved_final_time();

    let mut b = cfg.initial_state(&grid);
    let n = grid.total_nodes();
    let mut register = vec![0.0; 3 * n];
    let mut rhs_buf = vec![0.0; 3 * n];
    let mut div_buf = ScalarField::zeros(n);

    let mut series = Vec::new();
    let (e0, d0) = series_sample(&grid, &b, &mut div_buf);
    series.push((0.0, e0, d0));

    let mut t = 0.0;
    let mut steps = 0usize;
    let mut blew_up = false;
    let mut clean_summary = CleanSummary::default();
    // final time reached when the remaining interval underflows the step
    while t < t_end && (t_end - t) > 1e-14 * t_end.max(1.0) {
        // compute_dt reduces the slice to its extremum, which is already known
        let max_u = rhs.max_velocity(t);
        let dt = compute_dt(&ctrl, &grid, &[max_u], t_end - t).dt;
        lsrk_step(
            &scheme,
            |tt, y, out| rhs.eval(tt, y, out),
            t,
            dt,
            b.flat_mut(),
            &mut register,
            &mut rhs_buf,
        );
        t += dt;
        steps += 1;
        if !b.all_finite() {
            blew_up = true;
            series.push((t, f64::NAN, f64::NAN));
            break;
        }
        if cfg.divclean.method != CleanMethod::None {
            let stats = cleaning::clean(&grid, &cfg.divclean, &mut b)?;
            clean_summary.absorb(&stats);
        }
        if steps % cfg.stride == 0 || t >= t_end {
            let (e, d) = series_sample(&grid, &b, &mut div_buf);
            series.push((t, e, d));
        }
    }

    Ok(RunResult {
        grid,
        state: b,
        series,
        steps,
        final_time: t,
        blew_up,
        clean_summary,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Error norms at time t: eps_B = ||B - B_exact||_M (None when the case has
/// no closed-form solution at t) and eps_divB = ||div B||_M.
pub fn compute_errors(
    grid: &GridSpec,
    b: &VectorField,
    t: f64,
    case: CaseKind,
    hall: &HallExactParams,
) -> (Option<f64>, f64) {
    let n = grid.total_nodes();
    let mut div = ScalarField::zeros(n);
    grid::divergence(grid, b, &mut div);
    let eps_div = grid::norm_m(grid, &div.data);
    let eps_b = solutions::sample_exact_b(grid, case, hall, t).map(|exact| {
        let mut acc = 0.0;
        let mut diff = vec![0.0; n];
        for c in 0..3 {
            for m in 0..n {
                diff[m] = b.comp(c)[m] - exact.comp(c)[m];
            }
            acc += grid::inner_m(grid, &diff, &diff);
        }
        acc.sqrt()
    });
    (eps_b, eps_div)
}

/// One row of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub eps_b: f64,
    pub eoc_b: Option<f64>,
    pub eps_div: f64,
    pub eoc_div: Option<f64>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

/// EOC between consecutive resolutions: log(e_prev/e_cur) / log(n_cur/n_prev).
pub fn eoc(e_prev: f64, e_cur: f64, n_prev: usize, n_cur: usize) -> f64 {
    (e_prev / e_cur).ln() / (n_cur as f64 / n_prev as f64).ln()
}

/// Run the configuration at each resolution and collect errors and orders.
pub fn run_convergence(base: &RunConfig, ns: &[usize]) -> Result<ConvergenceReport, Error> {
    let mut report = ConvergenceReport::default();
    for &n in ns {
        let mut cfg = base.clone();
        cfg.n = n;
        cfg.n_per_axis = None;
        let result = run_simulation(&cfg)?;
        let (eps_b, eps_div) = compute_errors(
            &result.grid,
            &result.state,
            result.final_time,
            cfg.case,
            &cfg.hall_exact(),
        );
        let eps_b = if result.blew_up {
            f64::NAN
        } else {
            eps_b.unwrap_or(f64::NAN)
        };
        let eps_div = if result.blew_up { f64::NAN } else { eps_div };
        let (eoc_b, eoc_div) = match report.rows.last() {
            Some(prev) if eps_b.is_finite() && prev.eps_b.is_finite() => (
                Some(eoc(prev.eps_b, eps_b, prev.n, n)),
                Some(eoc(prev.eps_div, eps_div, prev.n, n)),
            ),
            _ => (None, None),
        };
        report.rows.push(ConvergenceRow {
            n,
            eps_b,
            eoc_b,
            eps_div,
            eoc_div,
            runtime_s: result.wall_seconds,
        });
    }
    Ok(report)
}

/// Result of a CFL stability scan.
#[derive(Debug, Clone)]
pub struct CflScan {
    /// (cfl, stable) for every value actually run, in scan order.
    pub tried: Vec<(f64, bool)>,
    pub max_stable: Option<f64>,
}

/// Scan CFL numbers from the largest down and report the first stable one;
/// instability below a stable value is not expected for these schemes.
pub fn run_cfl_scan(base: &RunConfig, cfls: &[f64]) -> Result<CflScan, Error> {
    let mut values: Vec<f64> = cfls.to_vec();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut tried = Vec::new();
    let mut max_stable = None;
    for &cfl in &values {
        let mut cfg = base.clone();
        cfg.cfl = cfl;
        let result = run_simulation(&cfg)?;
        let stable = !result.blew_up;
        tried.push((cfl, stable));
        if stable {
            max_stable = Some(cfl);
            break;
        }
    }
    Ok(CflScan { tried, max_stable })
}

// ---------------------------------------------------------------------------
// output files

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => String::new(),
    }
}

/// `N,eps_B,eoc_B,eps_divB,eoc_divB,runtime_s`
pub fn write_convergence_csv(w: &mut impl Write, report: &ConvergenceReport) -> Result<(), Error> {
    writeln!(w, "N,eps_B,eoc_B,eps_divB,eoc_divB,runtime_s")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{:.8e},{},{:.8e},{},{:.3}",
            r.n,
            r.eps_b,
            fmt_opt(r.eoc_b),
            r.eps_div,
            fmt_opt(r.eoc_div),
            r.runtime_s
        )?;
    }
    Ok(())
}

/// `t,energy,div_norm`
pub fn write_series_csv(w: &mut impl Write, series: &[(f64, f64, f64)]) -> Result<(), Error> {
    writeln!(w, "t,energy,div_norm")?;
    for (t, e, d) in series {
        writeln!(w, "{t:.8e},{e:.8e},{d:.8e}")?;
    }
    Ok(())
}

/// Two-column gnuplot data: time against energy or divergence norm.
pub fn write_series_dat(
    w: &mut impl Write,
    series: &[(f64, f64, f64)],
    divergence: bool,
) -> Result<(), Error> {
    for (t, e, d) in series {
        let v = if divergence { d } else { e };
        writeln!(w, "{t:.8e} {v:.8e}")?;
    }
    Ok(())
}

/// One cleaning-study row.
#[derive(Debug, Clone)]
pub struct CleanStudyRow {
    pub forms: FormSelection,
    pub energy: f64,
    pub eps_b: Option<f64>,
    pub eps_div: f64,
    pub method: CleanMethod,
}

/// `uiBj,source,ujBi,energy,eps_B,eps_divB,method`
pub fn write_cleanstudy_csv(w: &mut impl Write, rows: &[CleanStudyRow]) -> Result<(), Error> {
    writeln!(w, "uiBj,source,ujBi,energy,eps_B,eps_divB,method")?;
    for r in rows {
        let eps_b = match r.eps_b {
            Some(v) => format!("{v:.8e}"),
            None => String::new(),
        };
        writeln!(
            w,
            "{},{},{},{:.8e},{},{:.8e},{}",
            r.forms.ui_bj.name(),
            r.forms.source.name(),
            r.forms.uj_bi.name(),
            r.energy,
            eps_b,
            r.eps_div,
            r.method.name()
        )?;
    }
    Ok(())
}

/// Run one configuration per (forms, method) pair and collect study rows.
pub fn run_clean_study(
    base: &RunConfig,
    forms: &[FormSelection],
    methods: &[CleanMethod],
) -> Result<Vec<CleanStudyRow>, Error> {
    let mut rows = Vec::new();
    for f in forms {
        for &m in methods {
            let mut cfg = base.clone();
            cfg.forms = *f;
            cfg.divclean.method = m;
            let result = run_simulation(&cfg)?;
            let (eps_b, eps_div) = compute_errors(
                &result.grid,
                &result.state,
                result.final_time,
                cfg.case,
                &cfg.hall_exact(),
            );
            let energy = grid::energy(&result.grid, &result.state);
            rows.push(CleanStudyRow {
                forms: *f,
                energy: if result.blew_up { f64::NAN } else { energy },
                eps_b: if result.blew_up { Some(f64::NAN) } else { eps_b },
                eps_div: if result.blew_up { f64::NAN } else { eps_div },
                method: m,
            });
        }
    }
    Ok(rows)
}

/// Write the standard output files of a run into its output directory.
pub fn emit_run_outputs(cfg: &RunConfig, result: &RunResult) -> Result<(), Error> {
    let Some(dir) = &cfg.output_dir else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::File::create(dir.join("series.csv"))?;
    write_series_csv(&mut f, &result.series)?;
    let mut f = std::fs::File::create(dir.join("series_energy.dat"))?;
    write_series_dat(&mut f, &result.series, false)?;
    let mut f = std::fs::File::create(dir.join("series_div.dat"))?;
    write_series_dat(&mut f, &result.series, true)?;
    if !result.blew_up {
        let mut f = std::fs::File::create(dir.join("final_state.bin"))?;
        grid::write_field_binary(
            &mut f,
            result.grid.shape(),
            &[
                result.state.comp(0),
                result.state.comp(1),
                result.state.comp(2),
            ],
        )?;
    }
    Ok(())
}
