//! Scenario orchestration, exponential-rate fitting and run reports.
//!
//! A [`Scenario`] fixes a plant, a geometry with its grid, a feedback law, a
//! time horizon and an initial condition. [`run_scenario`] integrates the
//! loop, records norms every `record_every` steps, fits the decay rate on
//! `[1/c, T]` and compares it with the target `0.9·c`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actuation::{
    min_modes_sector, min_modes_square, min_modes_strip, ActuatorBank, DecayBudget, ShapeFunction,
};
use crate::control::{
    control_piano, control_sector, control_square_findim, control_square_full,
    control_strip_truncated, LawKind,
};
use crate::kernels::{KernelGeometry, KernelTable, PlantParams};
use crate::modal::AngularBasis;
use crate::sim::{
    check_dt, ensemble_l2_norm, h1_norm, interface_trace, l2_norm, masked_l2_norm, polar_l2_norm,
    write_polar_snapshot, write_rect_snapshot, ControlledEdge, Cut, Field2D, MaskedGrid, ModeState,
    NormSeries, OmegaReplay, PianoGeometry, PolarField, PolarGrid, PolarStepper, RectGrid,
    RectStepper, StripModeStepper,
};
use crate::{Error, Result};

/// Fraction of `c` a fitted rate must reach to pass.
pub const PASS_FRACTION: f64 = 0.9;
/// A fit stops at the first sample below this fraction of the initial norm.
pub const FIT_FLOOR: f64 = 1e-14;
/// Fewest samples accepted in a fit window.
pub const MIN_FIT_SAMPLES: usize = 20;
/// Constant in the replay tolerance `C·(h² + dt)`, fixed from the measured
/// gap of the 64 × 64 piano run (about 5.3) with headroom.
pub const REPLAY_CONSTANT: f64 = 8.0;

/// Result of a least-squares fit of `log ‖u‖` against `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `−slope`; negative for growth.
    pub rate: f64,
    /// `max_t ‖u(t)‖ / (‖u(0)‖ e^{−rate·t})` over the usable samples.
    #[serde(rename = "M")]
    pub overshoot: f64,
    /// RMS residual in the log domain.
    pub residual: f64,
    pub window: [f64; 2],
}

/// Fits the `L²` column of `series` on `[t0, T]`.
pub fn fit_decay(series: &NormSeries, t0: f64) -> Result<DecayFit> {
    fit_decay_values(&series.times, &series.l2, t0)
}

/// Fits an arbitrary norm history on `[t0, T]`.
///
/// Samples from the first one below [`FIT_FLOOR`] times the initial norm
/// onwards are discarded, since they are dominated by round-off.
pub fn fit_decay_values(times: &[f64], norms: &[f64], t0: f64) -> Result<DecayFit> {
    if times.len() != norms.len() {
        return Err(Error::Fit(format!(
            "{} times but {} norms",
            times.len(),
            norms.len()
        )));
    }
    let norm0 = *norms
        .first()
        .ok_or_else(|| Error::Fit("empty norm series".into()))?;
    if !(norm0 > 0.0) || !norm0.is_finite() {
        return Err(Error::Fit(format!(
            "initial norm must be positive and finite, got {norm0}"
        )));
    }
    let usable = norms
        .iter()
        .position(|&n| !(n >= FIT_FLOOR * norm0) || !n.is_finite())
        .unwrap_or(norms.len());
    let window: Vec<(f64, f64)> = times[..usable]
        .iter()
        .zip(&norms[..usable])
        .filter(|(t, _)| **t >= t0 - 1e-12)
        .map(|(&t, &n)| (t, n.ln()))
        .collect();
    if window.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "only {} usable samples on [{t0}, T], need {MIN_FIT_SAMPLES}",
            window.len()
        )));
    }
    let count = window.len() as f64;
    let t_mean = window.iter().map(|w| w.0).sum::<f64>() / count;
    let y_mean = window.iter().map(|w| w.1).sum::<f64>() / count;
    let sxx: f64 = window.iter().map(|w| (w.0 - t_mean).powi(2)).sum();
    let sxy: f64 = window.iter().map(|w| (w.0 - t_mean) * (w.1 - y_mean)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("fit window has a single distinct time".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let residual = (window
        .iter()
        .map(|w| (w.1 - intercept - slope * w.0).powi(2))
        .sum::<f64>()
        / count)
        .sqrt();
    let rate = -slope;
    let overshoot = times[..usable]
        .iter()
        .zip(&norms[..usable])
        .map(|(&t, &n)| n / (norm0 * (-rate * t).exp()))
        .fold(1.0, f64::max);
    Ok(DecayFit {
        rate,
        overshoot,
        residual,
        window: [window[0].0, window[window.len() - 1].0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Wavenumber ensemble `k = −k_max, −k_max+dk, …, k_max` on `y ∈ [0, 1]`.
    Strip { ny: usize, k_max: f64, dk: f64 },
    /// `[0, L]²`, controlled at `x = L`.
    Square { extent: f64, nx: usize, ny: usize },
    /// `0 < r < R`, `θ₁ < θ < θ₂`, controlled on the arc.
    Sector {
        theta1: f64,
        theta2: f64,
        radius: f64,
        nr: usize,
        ntheta: usize,
    },
    /// Square `[0, L]²` with a corner cut, controlled at `y = L`; simulated on
    /// an `n × n` interior grid of the extended square.
    Piano {
        extent: f64,
        cut: Option<Cut>,
        n: usize,
    },
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Strip { .. } => "strip",
            Geometry::Square { .. } => "square",
            Geometry::Sector { .. } => "sector",
            Geometry::Piano { .. } => "piano",
        }
    }

    fn default_law(&self) -> LawKind {
        match self {
            Geometry::Strip { .. } => LawKind::StripTruncated,
            Geometry::Square { .. } => LawKind::SquareFull,
            Geometry::Sector { .. } => LawKind::SectorModal,
            Geometry::Piano { .. } => LawKind::PianoExtended,
        }
    }

    fn accepts(&self, law: LawKind) -> bool {
        law == self.default_law()
            || (matches!(self, Geometry::Square { .. }) && law == LawKind::SquareFindim)
    }

    fn budget(&self, p: &PlantParams) -> Result<DecayBudget> {
        match *self {
            Geometry::Strip { .. } => Ok(min_modes_strip(p)),
            Geometry::Square { .. } | Geometry::Piano { .. } => Ok(min_modes_square(p)),
            Geometry::Sector {
                theta1,
                theta2,
                radius,
                ..
            } => min_modes_sector(p, theta1, theta2, radius),
        }
    }

    fn strip_wavenumbers(k_max: f64, dk: f64) -> Vec<f64> {
        let count = (2.0 * k_max / dk).round() as usize + 1;
        (0..count).map(|i| -k_max + i as f64 * dk).collect()
    }
}

/// Actuator bank for the finite-dimensional square law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActuatorSpec {
    Piecewise { m: usize },
    Sinusoidal { m: usize },
    Custom { shapes: Vec<ShapeFunction> },
}

impl ActuatorSpec {
    pub fn build(&self, n_modes: usize) -> Result<ActuatorBank> {
        match self {
            ActuatorSpec::Piecewise { m } => ActuatorBank::piecewise(*m, n_modes),
            ActuatorSpec::Sinusoidal { m } => ActuatorBank::sinusoidal(*m, n_modes),
            ActuatorSpec::Custom { shapes } => ActuatorBank::new(shapes.clone(), n_modes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawSpec {
    pub kind: LawKind,
    /// Overrides the mode budget `N` from the plant.
    pub n: Option<usize>,
    /// Defaults to `N` piecewise-constant actuators.
    pub actuators: Option<ActuatorSpec>,
    /// `false` runs the plant without feedback.
    pub enabled: bool,
}

impl LawSpec {
    pub fn new(kind: LawKind) -> Self {
        LawSpec {
            kind,
            n: None,
            actuators: None,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPreset {
    Zero,
    LowestMode,
    TwoModeMix,
    RandomBandLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub preset: InitPreset,
    pub seed: u64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            preset: InitPreset::TwoModeMix,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitNorm {
    L2,
    H1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantParams,
    pub geometry: Geometry,
    pub law: LawSpec,
    pub dt: f64,
    pub t_final: f64,
    pub init: InitSpec,
    /// Steps between recorded samples.
    pub record_every: usize,
    /// Also run the same plant without feedback and fit it.
    pub compare_open_loop: bool,
    /// Norm whose history is fitted; the law decides when `None`.
    pub fit_norm: Option<FitNorm>,
    /// CSV and JSON outputs go here when set.
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    /// Scenario with the geometry's default law, `dt = 1e-3`, `T = 20/c`,
    /// the two-mode initial condition and no file output.
    pub fn new(name: impl Into<String>, plant: PlantParams, geometry: Geometry) -> Self {
        Scenario {
            name: name.into(),
            plant,
            law: LawSpec::new(geometry.default_law()),
            geometry,
            dt: 1e-3,
            t_final: 20.0 / plant.c(),
            init: InitSpec::default(),
            record_every: 10,
            compare_open_loop: false,
            fit_norm: None,
            output_dir: None,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn fit_norm(&self) -> FitNorm {
        self.fit_norm.unwrap_or(match self.law.kind {
            LawKind::SquareFindim => FitNorm::H1,
            _ => FitNorm::L2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_dt(self.dt, self.plant.lambda())?;
        let c = self.plant.c();
        if !self.t_final.is_finite() || self.t_final < 20.0 / c * (1.0 - 1e-12) {
            return Err(Error::config(format!(
                "t_final = {} must be at least 20/c = {}",
                self.t_final,
                20.0 / c
            )));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every must be >= 1"));
        }
        if !self.geometry.accepts(self.law.kind) {
            return Err(Error::config(format!(
                "law {:?} does not apply to a {} geometry",
                self.law.kind,
                self.geometry.name()
            )));
        }
        if self.law.n == Some(0) {
            return Err(Error::config("law.n must be >= 1"));
        }
        if self.fit_norm() == FitNorm::H1
            && !matches!(
                self.geometry,
                Geometry::Square { .. } | Geometry::Piano { .. }
            )
        {
            return Err(Error::config(
                "H1 fits are only recorded on rectangular grids",
            ));
        }
        match self.geometry {
            Geometry::Strip { ny, k_max, dk } => {
                if ny < 8 {
                    return Err(Error::config(format!("grid.ny must be >= 8, got {ny}")));
                }
                if !(k_max >= 0.0) || !(dk > 0.0) || !k_max.is_finite() || !dk.is_finite() {
                    return Err(Error::config(format!(
                        "need k_max >= 0 and dk > 0, got {k_max}, {dk}"
                    )));
                }
                let steps = 2.0 * k_max / dk;
                if (steps - steps.round()).abs() > 1e-9 {
                    return Err(Error::config("2·k_max must be a multiple of dk"));
                }
            }
            Geometry::Square { extent, nx, ny } => {
                RectGrid::new(nx, ny, extent)?;
            }
            Geometry::Sector {
                theta1,
                theta2,
                radius,
                nr,
                ntheta,
            } => {
                PolarGrid::new(nr, ntheta, radius, theta1, theta2)?;
            }
            Geometry::Piano { extent, cut, n } => {
                let g = RectGrid::new(n, n, extent)?;
                MaskedGrid::new(g, PianoGeometry { extent, cut })?;
            }
        }
        Ok(())
    }
}

/// Fit summary without the window, as used for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub rate: f64,
    #[serde(rename = "M")]
    pub overshoot: f64,
    pub residual: f64,
    pub window: [f64; 2],
}

impl From<DecayFit> for FitSummary {
    fn from(f: DecayFit) -> Self {
        FitSummary {
            rate: f.rate,
            overshoot: f.overshoot,
            residual: f.residual,
            window: f.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFitReport {
    pub k: f64,
    pub controlled: bool,
    pub fit: Option<FitSummary>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub n0: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub geometry: String,
    pub law: LawKind,
    pub closed_loop: bool,
    pub fitted_norm: FitNorm,
    pub budget: BudgetReport,
    pub rate: Option<f64>,
    #[serde(rename = "M")]
    pub overshoot: Option<f64>,
    pub residual: Option<f64>,
    pub window: Option<[f64; 2]>,
    pub target_rate: f64,
    pub pass: bool,
    /// Zero initial data: nothing to fit.
    pub trivial: bool,
    pub open_loop: Option<FitSummary>,
    /// Piano only: fit of the `Ω`-restricted `L²` norm.
    pub restricted: Option<FitSummary>,
    /// Piano only: worst relative gap between the extended run and an
    /// `Ω`-only replay driven by the recorded cut trace.
    pub replay_discrepancy: Option<f64>,
    pub replay_tolerance: Option<f64>,
    /// Strip only: one fit per sampled wavenumber.
    pub mode_fits: Vec<ModeFitReport>,
    pub files: Vec<String>,
    pub notes: Vec<String>,
}

/// Everything a run produces besides the report.
#[derive(Debug, Clone, Default)]
struct RunOutput {
    series: NormSeries,
    restricted: Option<NormSeries>,
    replay: Option<(f64, f64)>,
    modes: Vec<(f64, bool, NormSeries)>,
    files: Vec<(String, String)>,
}

fn with_context(e: Error, name: &str) -> Error {
    match e {
        Error::Domain(m) => Error::Domain(format!("scenario '{name}': {m}")),
        Error::Config(m) => Error::Config(format!("scenario '{name}': {m}")),
        Error::Stabilizability(m) => Error::Stabilizability(format!("scenario '{name}': {m}")),
        Error::Numerical(m) => Error::Numerical(format!("scenario '{name}': {m}")),
        Error::Fit(m) => Error::Fit(format!("scenario '{name}': {m}")),
        Error::Io(e) => Error::Io(std::io::Error::new(
            e.kind(),
            format!("scenario '{name}': {e}"),
        )),
    }
}

/// Runs a scenario and, when an output directory is set, writes
/// `norms.csv`, `profile.csv`, `snapshot.csv`, geometry-specific extras and
/// `report.json` into it.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    run_inner(s).map_err(|e| with_context(e, &s.name))
}

fn run_inner(s: &Scenario) -> Result<ScenarioReport> {
    s.validate()?;
    let budget = s.geometry.budget(&s.plant)?;
    let n = s.law.n.unwrap_or(budget.n);
    let closed = s.law.enabled;

    let (main, open) = if s.compare_open_loop && closed {
        std::thread::scope(|scope| {
            let open = scope.spawn(|| simulate(s, n, false));
            let main = simulate(s, n, true);
            (main, open.join().expect("open-loop run panicked"))
        })
    } else {
        (simulate(s, n, closed), Ok(RunOutput::default()))
    };
    let main = main?;
    let open = if s.compare_open_loop && closed {
        Some(open?)
    } else {
        None
    };

    let c = s.plant.c();
    let target = PASS_FRACTION * c;
    let t0 = 1.0 / c;
    let fit_norm = s.fit_norm();
    let fitted = match fit_norm {
        FitNorm::L2 => &main.series.l2,
        FitNorm::H1 => main.series.h1.as_ref().expect("rectangular runs record H1"),
    };
    let trivial = main.series.l2.first().is_some_and(|&n0| n0 == 0.0);
    let mut notes = Vec::new();
    let mut report = ScenarioReport {
        scenario: s.name.clone(),
        geometry: s.geometry.name().into(),
        law: s.law.kind,
        closed_loop: closed,
        fitted_norm: fit_norm,
        budget: BudgetReport { n0: budget.n0, n },
        rate: None,
        overshoot: None,
        residual: None,
        window: None,
        target_rate: target,
        pass: true,
        trivial,
        open_loop: None,
        restricted: None,
        replay_discrepancy: None,
        replay_tolerance: None,
        mode_fits: Vec::new(),
        files: Vec::new(),
        notes: Vec::new(),
    };
    if n < budget.n {
        notes.push(format!(
            "law uses N = {n} below the plant budget N = {}",
            budget.n
        ));
    }

    if trivial {
        notes.push("zero initial condition: norms stay zero, fit skipped".into());
    } else {
        let fit = fit_decay_values(&main.series.times, fitted, t0)?;
        report.rate = Some(fit.rate);
        report.overshoot = Some(fit.overshoot);
        report.residual = Some(fit.residual);
        report.window = Some(fit.window);
        report.pass = fit.rate >= target;
        if let Some(open) = &open {
            let series = match fit_norm {
                FitNorm::L2 => &open.series.l2,
                FitNorm::H1 => open.series.h1.as_ref().expect("rectangular runs record H1"),
            };
            report.open_loop = Some(fit_decay_values(&open.series.times, series, t0)?.into());
        }
        if let Some(r) = &main.restricted {
            let f = fit_decay(r, t0)?;
            report.pass &= f.rate >= target;
            report.restricted = Some(f.into());
        }
        if let Some((gap, tol)) = main.replay {
            report.pass &= gap <= tol;
            report.replay_discrepancy = Some(gap);
            report.replay_tolerance = Some(tol);
        }
        let mut early = 0;
        for (k, controlled, series) in &main.modes {
            let fit = if series.l2[0] > 0.0 {
                let (fit, refit) = fit_mode(series, t0)?;
                early += usize::from(refit);
                Some(fit)
            } else {
                None
            };
            let pass = fit.is_none_or(|f| f.rate >= target);
            report.pass &= pass;
            report.mode_fits.push(ModeFitReport {
                k: *k,
                controlled: *controlled,
                fit: fit.map(Into::into),
                pass,
            });
        }
        if early > 0 {
            notes.push(format!(
                "{early} mode(s) reached the round-off floor before t0 = {t0}; fitted from t = 0"
            ));
        }
    }
    report.notes = notes;

    if let Some(dir) = &s.output_dir {
        std::fs::create_dir_all(dir)?;
        let mut files = main.files;
        if let Some(open) = &open {
            let mut buf = Vec::new();
            open.series.write_csv(&mut buf)?;
            files.push((
                "open_loop_norms.csv".into(),
                String::from_utf8(buf).expect("CSV is UTF-8"),
            ));
        }
        for (name, contents) in &files {
            std::fs::write(dir.join(name), contents)?;
            report.files.push(name.clone());
        }
        report.files.push("report.json".into());
        write_report(&report, &dir.join("report.json"))?;
    }
    Ok(report)
}

/// Fit on `[t0, T]`, or on `[0, T]` for a history that falls below the
/// round-off floor before `t0`. The flag reports the fallback.
fn fit_mode(series: &NormSeries, t0: f64) -> Result<(DecayFit, bool)> {
    match fit_decay(series, t0) {
        Ok(f) => Ok((f, false)),
        Err(Error::Fit(msg)) => {
            let floor = FIT_FLOOR * series.l2[0];
            let early = series
                .times
                .iter()
                .zip(&series.l2)
                .any(|(&t, &n)| t < t0 && n < floor);
            if early {
                fit_decay(series, 0.0).map(|f| (f, true))
            } else {
                Err(Error::Fit(msg))
            }
        }
        Err(e) => Err(e),
    }
}

fn write_report(report: &ScenarioReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::numerical(format!("report encoding: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Runs independent scenarios on up to `jobs` threads; results keep the
/// input order.
pub fn run_scenarios(scenarios: &[Scenario], jobs: usize) -> Vec<Result<ScenarioReport>> {
    let jobs = jobs.clamp(1, scenarios.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<ScenarioReport>>>> =
        scenarios.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(s) = scenarios.get(i) else { break };
                *results[i].lock().expect("result slot poisoned") = Some(run_scenario(s));
            });
        }
    });
    results
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("result slot poisoned")
                .expect("every scenario ran")
        })
        .collect()
}

fn simulate(s: &Scenario, n: usize, closed: bool) -> Result<RunOutput> {
    match s.geometry {
        Geometry::Strip { ny, k_max, dk } => simulate_strip(s, n, closed, ny, k_max, dk),
        Geometry::Square { extent, nx, ny } => {
            simulate_square(s, n, closed, RectGrid::new(nx, ny, extent)?)
        }
        Geometry::Sector {
            theta1,
            theta2,
            radius,
            nr,
            ntheta,
        } => simulate_sector(
            s,
            n,
            closed,
            PolarGrid::new(nr, ntheta, radius, theta1, theta2)?,
        ),
        Geometry::Piano {
            extent,
            cut,
            n: size,
        } => {
            let grid = MaskedGrid::new(
                RectGrid::new(size, size, extent)?,
                PianoGeometry { extent, cut },
            )?;
            simulate_piano(s, closed, grid)
        }
    }
}

fn is_record(step: usize, every: usize, last: usize) -> bool {
    step.is_multiple_of(every) || step == last
}

fn check_finite(values: &[f64], t: f64) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numerical(format!(
            "state became non-finite at t = {t}"
        )))
    }
}

fn csv_text(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV is UTF-8"))
}

/// Interior values of the rectangular presets on `[0, L]²`.
fn rect_initial(init: InitSpec, extent: f64) -> impl Fn(f64, f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
    let random: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    move |x, y| {
        let (x, y) = (PI * x / extent, PI * y / extent);
        match init.preset {
            InitPreset::Zero => 0.0,
            InitPreset::LowestMode => x.sin() * y.sin(),
            InitPreset::TwoModeMix => x.sin() * y.sin() + 0.5 * (2.0 * x).sin() * y.sin(),
            InitPreset::RandomBandLimited => (0..16)
                .map(|m| {
                    let (a, b) = ((m / 4 + 1) as f64, (m % 4 + 1) as f64);
                    random[m] / (a * b) * (a * x).sin() * (b * y).sin()
                })
                .sum(),
        }
    }
}

fn simulate_square(s: &Scenario, n: usize, closed: bool, grid: RectGrid) -> Result<RunOutput> {
    let p = &s.plant;
    let edge = ControlledEdge::East;
    let mut state = Field2D::from_fn(grid, edge, rect_initial(s.init, grid.extent));
    let stepper = RectStepper::new(grid, edge, p, s.dt)?;
    let table = KernelTable::on_abscissae(
        p,
        KernelGeometry::Square {
            extent: grid.extent,
        },
        grid.xs(),
    )?;
    let findim = s.law.kind == LawKind::SquareFindim;
    let bank = if findim {
        Some(
            s.law
                .actuators
                .clone()
                .unwrap_or(ActuatorSpec::Piecewise { m: n })
                .build(n)?,
        )
    } else {
        None
    };
    let mut budget = s.geometry.budget(p)?;
    budget.n = n;

    let steps = s.steps();
    let coords = edge.coordinates(&grid);
    let mut series = NormSeries::new(true);
    let mut profile_csv = String::from("t,y,U\n");
    let mut profile = vec![0.0; coords.len()];
    for step in 0..=steps {
        let t = step as f64 * s.dt;
        if closed {
            profile = match &bank {
                Some(bank) => control_square_findim(&state, bank, &budget, &table)?.profile,
                None => control_square_full(&state, &table)?,
            };
        }
        if is_record(step, s.record_every, steps) {
            check_finite(&state.values, t)?;
            series.push(t, l2_norm(&state), Some(h1_norm(&state)))?;
            for (y, u) in coords.iter().zip(&profile) {
                writeln!(profile_csv, "{t},{y},{u}").expect("writing to a String");
            }
        }
        if step < steps {
            stepper.step(&mut state, &profile)?;
        }
    }
    let snapshot = csv_text(|b| write_rect_snapshot(&state, b))?;
    let norms = csv_text(|b| series.write_csv(b))?;
    Ok(RunOutput {
        series,
        files: vec![
            ("norms.csv".into(), norms),
            ("profile.csv".into(), profile_csv),
            ("snapshot.csv".into(), snapshot),
        ],
        ..RunOutput::default()
    })
}

/// Smooth cutoff vanishing on the removed side of the cut and tending to one
/// inside `Ω`.
fn cut_taper(geometry: &PianoGeometry, x: f64, y: f64) -> f64 {
    let Some(c) = geometry.cut else { return 1.0 };
    let (dx, dy) = (c.end[0] - c.start[0], c.end[1] - c.start[1]);
    let len = (dx * dx + dy * dy).sqrt();
    // distance into Ω, which lies to the right of start → end
    let d = -(dx * (y - c.start[1]) - dy * (x - c.start[0])) / len;
    if d <= 0.0 {
        0.0
    } else {
        // flat to all orders at the cut
        (-(0.25 * geometry.extent / d).powi(2)).exp()
    }
}

fn simulate_piano(s: &Scenario, closed: bool, grid: MaskedGrid) -> Result<RunOutput> {
    let p = &s.plant;
    let edge = ControlledEdge::North;
    let rect = grid.parent;
    let base = rect_initial(s.init, rect.extent);
    let geometry = grid.geometry;
    let mut state = Field2D::from_fn(rect, edge, |x, y| base(x, y) * cut_taper(&geometry, x, y));
    let stepper = RectStepper::new(rect, edge, p, s.dt)?;
    let table = KernelTable::on_abscissae(
        p,
        KernelGeometry::Square {
            extent: rect.extent,
        },
        rect.ys(),
    )?;
    let replay = OmegaReplay::new(&grid, edge, p, s.dt)?;
    let mut shadow = replay.restrict(&state);

    let steps = s.steps();
    let coords = edge.coordinates(&rect);
    let mut series = NormSeries::new(true);
    let mut restricted = NormSeries::new(false);
    let mut profile_csv = String::from("t,x,U\n");
    let mut trace_csv = String::from("t,s,U1\n");
    let mut profile = vec![0.0; coords.len()];
    // The Ω-only plant is open-loop unstable whenever λ exceeds its first
    // Dirichlet eigenvalue, so any stencil mismatch in the replay grows while
    // the closed loop decays. The gap is therefore measured against the
    // running peak of ‖u|_Ω‖ over the transient window [0, 1/c].
    let replay_window = 1.0 / p.c();
    let mut worst_gap: f64 = 0.0;
    let mut peak = replay.discrepancy_parts(&shadow, &state).1;
    for step in 0..=steps {
        let t = step as f64 * s.dt;
        let trace = if closed {
            let (u2, u1) = control_piano(&state, &grid, &table)?;
            profile = u2;
            u1
        } else {
            interface_trace(&grid, &state)
        };
        if is_record(step, s.record_every, steps) {
            check_finite(&state.values, t)?;
            let l2 = l2_norm(&state);
            series.push(t, l2, Some(h1_norm(&state)))?;
            restricted.push(t, masked_l2_norm(&grid, &state), None)?;
            for (x, u) in coords.iter().zip(&profile) {
                writeln!(profile_csv, "{t},{x},{u}").expect("writing to a String");
            }
            for (arc, u) in trace.s.iter().zip(&trace.values) {
                writeln!(trace_csv, "{t},{arc},{u}").expect("writing to a String");
            }
        }
        if step < steps {
            let inputs_old = replay.inputs(&trace, &state.boundary)?;
            stepper.step(&mut state, &profile)?;
            let inputs_new = replay.inputs(&interface_trace(&grid, &state), &state.boundary)?;
            replay.step(&mut shadow, &inputs_old, &inputs_new)?;
            if t + s.dt <= replay_window + 1e-12 {
                let (gap, size) = replay.discrepancy_parts(&shadow, &state);
                peak = peak.max(size);
                if peak > 0.0 {
                    worst_gap = worst_gap.max(gap / peak);
                }
            }
        }
    }
    let h = rect.hx();
    let tolerance = REPLAY_CONSTANT * (h * h + s.dt);
    let snapshot = csv_text(|b| write_rect_snapshot(&state, b))?;
    let norms = csv_text(|b| series.write_csv(b))?;
    let restricted_csv = csv_text(|b| restricted.write_csv(b))?;
    Ok(RunOutput {
        series,
        restricted: Some(restricted),
        replay: Some((worst_gap, tolerance)),
        files: vec![
            ("norms.csv".into(), norms),
            ("omega_norms.csv".into(), restricted_csv),
            ("profile.csv".into(), profile_csv),
            ("trace.csv".into(), trace_csv),
            ("snapshot.csv".into(), snapshot),
        ],
        ..RunOutput::default()
    })
}

/// Radial factor `(r/R)^α (1 − (r/R)²)`, regular at the origin for mode α.
fn radial_bump(r: f64, radius: f64, alpha: f64) -> f64 {
    let s = r / radius;
    s.powf(alpha) * (1.0 - s * s)
}

fn simulate_sector(s: &Scenario, n: usize, closed: bool, grid: PolarGrid) -> Result<RunOutput> {
    let p = &s.plant;
    let full = AngularBasis::new(grid.theta1, grid.theta2, n.max(4))?;
    let radius = grid.radius();
    let mut rng = ChaCha8Rng::seed_from_u64(s.init.seed);
    let amps: Vec<f64> = match s.init.preset {
        InitPreset::Zero => vec![],
        InitPreset::LowestMode => vec![1.0],
        InitPreset::TwoModeMix => vec![1.0, 1.0],
        InitPreset::RandomBandLimited => (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let mut state = PolarField::from_fn(grid, |r, th| {
        amps.iter()
            .enumerate()
            .map(|(m, a)| a * radial_bump(r, radius, full.alpha(m + 1)) * full.phi(m + 1, th))
            .sum()
    });
    let stepper = PolarStepper::new(grid, p, s.dt)?;
    let basis = AngularBasis::new(grid.theta1, grid.theta2, n)?;
    let tables = (1..=n)
        .map(|m| {
            KernelTable::on_abscissae(
                p,
                KernelGeometry::Sector {
                    alpha: basis.alpha(m),
                    radius,
                },
                grid.radial.abscissae(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut budget = s.geometry.budget(p)?;
    budget.n = n;

    let steps = s.steps();
    let thetas = grid.interior_thetas();
    let mut series = NormSeries::new(false);
    let mut profile_csv = String::from("t,theta,U\n");
    let mut profile = vec![0.0; thetas.len()];
    for step in 0..=steps {
        let t = step as f64 * s.dt;
        if closed {
            profile = control_sector(&state, &basis, &budget, &tables)?.profile;
        }
        if is_record(step, s.record_every, steps) {
            check_finite(&state.values, t)?;
            series.push(t, polar_l2_norm(&state), None)?;
            for (th, u) in thetas.iter().zip(&profile) {
                writeln!(profile_csv, "{t},{th},{u}").expect("writing to a String");
            }
        }
        if step < steps {
            stepper.step(&mut state, &profile)?;
        }
    }
    let snapshot = csv_text(|b| write_polar_snapshot(&state, b))?;
    let norms = csv_text(|b| series.write_csv(b))?;
    Ok(RunOutput {
        series,
        files: vec![
            ("norms.csv".into(), norms),
            ("profile.csv".into(), profile_csv),
            ("snapshot.csv".into(), snapshot),
        ],
        ..RunOutput::default()
    })
}

fn simulate_strip(
    s: &Scenario,
    n: usize,
    closed: bool,
    ny: usize,
    k_max: f64,
    dk: f64,
) -> Result<RunOutput> {
    let p = &s.plant;
    let ks = Geometry::strip_wavenumbers(k_max, dk);
    let mut rng = ChaCha8Rng::seed_from_u64(s.init.seed);
    // u(−k) = conj u(k) keeps the physical field real
    let half: Vec<(Complex64, Complex64)> = ks
        .iter()
        .map(|_| {
            let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (c(), c())
        })
        .collect();
    let mut modes: Vec<ModeState> = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let envelope = (-0.5 * k * k).exp();
            let (a, b) = match s.init.preset {
                InitPreset::Zero => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
                InitPreset::LowestMode => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
                InitPreset::TwoModeMix => (Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)),
                InitPreset::RandomBandLimited => {
                    let mirror = ks.len() - 1 - i;
                    if i <= mirror {
                        half[i]
                    } else {
                        (half[mirror].0.conj(), half[mirror].1.conj())
                    }
                }
            };
            ModeState::strip(k, ny, |y| {
                envelope * (a * (PI * y).sin() + b * (2.0 * PI * y).sin())
            })
        })
        .collect();
    let steppers = ks
        .iter()
        .map(|&k| StripModeStepper::new(k, ny, p, s.dt))
        .collect::<Result<Vec<_>>>()?;
    let table = KernelTable::on_abscissae(p, KernelGeometry::Strip, modes[0].abscissae.clone())?;
    let mut budget = s.geometry.budget(p)?;
    budget.n = n;
    let controlled: Vec<bool> = ks.iter().map(|k| closed && k.abs() < n as f64).collect();

    let steps = s.steps();
    let mut series = NormSeries::new(false);
    let mut per_mode: Vec<NormSeries> = ks.iter().map(|_| NormSeries::new(false)).collect();
    let mut profile_csv = String::from("t,k,U_re,U_im\n");
    let mut modes_csv = String::from("t,k,l2\n");
    let mut controls = vec![Complex64::new(0.0, 0.0); ks.len()];
    for step in 0..=steps {
        let t = step as f64 * s.dt;
        for (i, mode) in modes.iter().enumerate() {
            if controlled[i] {
                controls[i] = control_strip_truncated(mode, &budget, &table)?;
            }
        }
        // per-mode histories are kept at every step: high wavenumbers reach
        // the round-off floor within a few dozen steps
        let mode_norms: Vec<f64> = modes.iter().map(ModeState::l2_norm).collect();
        for (series, &l2) in per_mode.iter_mut().zip(&mode_norms) {
            series.push(t, l2, None)?;
        }
        if is_record(step, s.record_every, steps) {
            if modes
                .iter()
                .flat_map(|m| &m.values)
                .any(|v| !v.re.is_finite() || !v.im.is_finite())
            {
                return Err(Error::numerical(format!(
                    "state became non-finite at t = {t}"
                )));
            }
            series.push(t, ensemble_l2_norm(&modes, &ks), None)?;
            for (i, l2) in mode_norms.iter().enumerate() {
                writeln!(modes_csv, "{t},{},{l2}", ks[i]).expect("writing to a String");
                if controlled[i] {
                    writeln!(
                        profile_csv,
                        "{t},{},{},{}",
                        ks[i], controls[i].re, controls[i].im
                    )
                    .expect("writing to a String");
                }
            }
        }
        if step < steps {
            for ((mode, stepper), u) in modes.iter_mut().zip(&steppers).zip(&controls) {
                stepper.step(mode, *u)?;
            }
        }
    }
    let norms = csv_text(|b| series.write_csv(b))?;
    Ok(RunOutput {
        series,
        modes: ks
            .iter()
            .zip(&controlled)
            .zip(per_mode)
            .map(|((&k, &c), s)| (k, c, s))
            .collect(),
        files: vec![
            ("norms.csv".into(), norms),
            ("modes.csv".into(), modes_csv),
            ("profile.csv".into(), profile_csv),
        ],
        ..RunOutput::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series_from(f: impl Fn(f64) -> f64, t_end: f64, count: usize) -> NormSeries {
        let mut s = NormSeries::new(false);
        for i in 0..count {
            let t = t_end * i as f64 / (count - 1) as f64;
            s.push(t, f(t), None).unwrap();
        }
        s
    }

    #[test]
    fn exact_exponential() {
        let s = series_from(|t| (-3.0 * t).exp(), 5.0, 501);
        let f = fit_decay(&s, 0.5).unwrap();
        assert!((f.rate - 3.0).abs() < 1e-10);
        assert!(f.residual < 1e-10);
        assert!((f.overshoot - 1.0).abs() < 1e-9);
        assert_eq!(f.window, [0.5, 5.0]);
    }

    #[test]
    fn oscillating_envelope() {
        let s = series_from(|t| (-3.0 * t).exp() * (2.0 + t.cos()), 10.0, 1001);
        let f = fit_decay(&s, 1.0).unwrap();
        assert!((f.rate - 3.0).abs() < 0.06, "{}", f.rate);
        assert!(f.overshoot >= 1.0);
        assert!(f.residual > 0.0);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let s = series_from(|_| 2.5, 3.0, 100);
        let f = fit_decay(&s, 0.0).unwrap();
        assert!(f.rate.abs() < 1e-14);
        assert_eq!(f.overshoot, 1.0);
    }

    #[test]
    fn fit_stops_at_the_round_off_floor() {
        // rate 40 reaches 1e-14 near t = 0.8, after which the tail is junk
        let s = series_from(
            |t| if t < 0.8 { (-40.0 * t).exp() } else { 1e-300 },
            2.0,
            2001,
        );
        let f = fit_decay(&s, 0.1).unwrap();
        assert!((f.rate - 40.0).abs() < 1e-8);
        assert!(f.window[1] < 0.81);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            fit_decay(&series_from(|t| (-t).exp(), 1.0, 10), 0.0),
            Err(Error::Fit(_))
        ));
        assert!(matches!(
            fit_decay(&NormSeries::new(false), 0.0),
            Err(Error::Fit(_))
        ));
        assert!(matches!(
            fit_decay(&series_from(|_| 0.0, 1.0, 50), 0.0),
            Err(Error::Fit(_))
        ));
        assert!(fit_decay(&series_from(|t| (-t).exp(), 1.0, 50), 0.9).is_err());
    }

    fn square_scenario() -> Scenario {
        let p = PlantParams::new(1.0, 12.0, 2.0).unwrap();
        let mut s = Scenario::new(
            "square-small",
            p,
            Geometry::Square {
                extent: 1.0,
                nx: 16,
                ny: 16,
            },
        );
        s.t_final = 10.0;
        s
    }

    #[test]
    fn scenario_validation() {
        let mut s = square_scenario();
        assert!(s.validate().is_ok());
        s.t_final = 5.0;
        assert!(s.validate().is_err());
        let mut s = square_scenario();
        s.dt = 1e-2;
        assert!(s.validate().is_err());
        let mut s = square_scenario();
        s.law.kind = LawKind::SectorModal;
        assert!(s.validate().is_err());
        let mut s = square_scenario();
        s.record_every = 0;
        assert!(s.validate().is_err());
        let mut s = square_scenario();
        s.geometry = Geometry::Strip {
            ny: 31,
            k_max: 1.0,
            dk: 0.3,
        };
        s.law = LawSpec::new(LawKind::StripTruncated);
        assert!(s.validate().is_err());
    }

    #[test]
    fn zero_initial_condition_is_trivial() {
        let mut s = square_scenario();
        s.init.preset = InitPreset::Zero;
        let r = run_scenario(&s).unwrap();
        assert!(r.trivial);
        assert!(r.rate.is_none());
        assert!(r.pass);
    }

    #[test]
    fn small_square_closes_the_loop() {
        let mut s = square_scenario();
        s.compare_open_loop = true;
        let r = run_scenario(&s).unwrap();
        let rate = r.rate.unwrap();
        assert!(rate >= 1.8, "{rate}");
        assert!(r.overshoot.unwrap() >= 1.0);
        let open = r.open_loop.unwrap();
        // lowest discrete eigenvalue: λ − 2·4 sin²(πh/2)/h²
        let h = 1.0 / 17.0;
        let expected = 12.0 - 8.0 * (PI * h / 2.0).sin().powi(2) / (h * h);
        assert!(
            (-open.rate - expected).abs() < 0.05 * expected.abs(),
            "{} vs {expected}",
            -open.rate
        );
        assert!(r.pass);
    }

    #[test]
    fn errors_carry_the_scenario_name() {
        let mut s = square_scenario();
        s.law = LawSpec {
            kind: LawKind::SquareFindim,
            n: None,
            actuators: Some(ActuatorSpec::Piecewise { m: 1 }),
            enabled: true,
        };
        let err = run_scenario(&s).unwrap_err();
        assert!(matches!(err, Error::Stabilizability(_)));
        assert!(err.to_string().contains("square-small"));
    }

    #[test]
    fn scenario_outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = square_scenario();
        s.output_dir = Some(dir.path().to_path_buf());
        let r = run_scenario(&s).unwrap();
        for f in &r.files {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let norms = std::fs::read_to_string(dir.path().join("norms.csv")).unwrap();
        assert!(norms.starts_with("t,l2,h1\n0,"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        for key in ["scenario", "rate", "M", "residual", "pass"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn parallel_runner_keeps_order() {
        let mut a = square_scenario();
        a.name = "a".into();
        let mut b = square_scenario();
        b.name = "b".into();
        b.t_final = 1.0;
        let out = run_scenarios(&[a, b], 2);
        assert_eq!(out[0].as_ref().unwrap().scenario, "a");
        assert!(out[1].is_err());
    }

    #[test]
    fn strip_wavenumber_grid() {
        let ks = Geometry::strip_wavenumbers(4.0, 0.25);
        assert_eq!(ks.len(), 33);
        assert_eq!(ks[0], -4.0);
        assert_eq!(ks[16], 0.0);
        assert_eq!(ks[32], 4.0);
    }

    #[test]
    fn taper_vanishes_beyond_the_cut() {
        let g = PianoGeometry::standard();
        assert_eq!(cut_taper(&g, 0.1, 0.9), 0.0);
        let far = cut_taper(&g, 0.9, 0.1);
        assert!(far > 0.9 && far < 1.0);
        assert!(cut_taper(&g, 0.5, 0.5) < far);
        assert_eq!(cut_taper(&PianoGeometry::full(1.0), 0.1, 0.9), 1.0);
    }

    proptest! {
        #[test]
        fn fit_recovers_any_rate(rate in -5.0f64..20.0, amp in 0.1f64..10.0) {
            let s = series_from(|t| amp * (-rate * t).exp(), 2.0, 201);
            let f = fit_decay(&s, 0.2).unwrap();
            prop_assert!((f.rate - rate).abs() < 1e-8);
            prop_assert!(f.residual >= 0.0);
            prop_assert!(f.overshoot >= 1.0);
        }
    }
}
