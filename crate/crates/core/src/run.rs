//! Drives a complete experiment from a [`RunConfig`] and writes its artifacts.
//!
//! Every run directory gets `manifest.json` (config echo, code version,
//! event counts, list of outputs) and `summary.json`. Decay runs add
//! `spectrum_tNNNN.csv`, `decorrelation_kNN.csv`, `conservation.csv` and
//! optionally `two_time.csv`; oscillator and oracle runs add
//! `oscillator.csv`. Nothing is written when the configuration is invalid.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::closures::{ClosureKind, ClosureSettings, ClosureState, DivisionEvent};
use crate::config::{validate, Emit, Mode, RunConfig};
use crate::diagnostics::{
    decorrelation_curve, dissipation_rate, energy_spectrum, spectrum, sweeping_factor, total_energy,
    transfer_conservation,
};
use crate::error::{Error, Result};
use crate::history::TimeGrid;
use crate::oscillator::{
    constraint_residual, dia_solve, exact_equal_time, exact_response, max_exact_error, monte_carlo_oracle,
    rget_solve, OscillatorState,
};
use crate::output::{emit_csv, emit_json};

/// Process exit status for an error (`0` is success).
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) => 2,
        Error::Blowup { .. } => 3,
        _ => 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Blowup,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Blowup => "blowup",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupInfo {
    /// Last committed row.
    pub last_good_row: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EventCounts {
    pub regularized_divisions: u64,
    /// First few floored divisions, for locating them.
    pub division_samples: Vec<DivisionEvent>,
    /// Steps after which at least one equal-time value was negative.
    pub negative_spectrum_steps: usize,
    /// Negative equal-time values summed over all steps.
    pub negative_spectrum_flags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub code_version: &'static str,
    pub mode: Mode,
    pub status: RunStatus,
    pub exit_code: i32,
    pub config: RunConfig,
    pub events: EventCounts,
    pub blowup: Option<BlowupInfo>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.manifest.exit_code
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DecaySummary {
    pub t: Vec<f64>,
    pub total_energy: Vec<f64>,
    pub dissipation_rate: Vec<f64>,
    pub transfer_residual: Vec<f64>,
    pub negative_spectrum: Vec<usize>,
    pub regularized: Vec<u64>,
    pub energy_monotone: bool,
    pub decorrelation: Vec<DecorrelationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecorrelationSummary {
    pub k_index: usize,
    pub k: f64,
    /// `Q(k; t_end, 0) / Q(k; 0, 0)`.
    pub ratio_from_start: f64,
    pub viscous_reference: f64,
    /// Viscous reference times the random-sweeping factor.
    pub swept_reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillatorSummary {
    pub closure: ClosureKind,
    pub max_relative_error: f64,
    /// Propagator-constraint residual (RGET only) and the node stride used.
    pub constraint_residual: Option<f64>,
    pub constraint_stride: Option<usize>,
    pub mc_samples: Option<usize>,
    /// Largest `|estimate − exact| / stderr` over the written rows.
    pub mc_max_z: Option<f64>,
}

struct Artifacts<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Artifacts<'_> {
    fn path(&mut self, name: String) -> PathBuf {
        let path = self.dir.join(&name);
        self.written.push(name);
        path
    }
}

/// Runs `cfg` and writes its artifacts under `cfg.output_dir`.
///
/// A numerical blowup still yields `Ok`: the outputs up to the last good
/// row and a manifest with status `blowup` (exit code 3) are written.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    validate(cfg)?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut art = Artifacts {
        dir: &dir,
        written: Vec::new(),
    };
    let (events, blowup) = match cfg.mode {
        Mode::Decay => run_decay(cfg, &mut art)?,
        Mode::Oscillator | Mode::Oracle => (run_oscillator(cfg, &mut art)?, None),
    };
    let status = if blowup.is_some() {
        RunStatus::Blowup
    } else {
        RunStatus::Completed
    };
    let mut outputs = art.written;
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: "closurelab",
        code_version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode,
        status,
        exit_code: if blowup.is_some() { 3 } else { 0 },
        config: cfg.clone(),
        events,
        blowup,
        outputs,
    };
    emit_json(&dir.join("manifest.json"), &manifest)?;
    Ok(RunOutcome { dir, manifest })
}

fn write_spectrum(state: &ClosureState, m: usize, art: &mut Artifacts) -> Result<()> {
    let snap = spectrum(state, m)?;
    let rows = (0..snap.k.len()).map(|i| (snap.k[i], snap.energy[i], snap.q_diag[i]));
    emit_csv(&art.path(format!("spectrum_t{m:04}.csv")), &["k", "E", "Q_diag"], rows)
}

fn run_decay(cfg: &RunConfig, art: &mut Artifacts) -> Result<(EventCounts, Option<BlowupInfo>)> {
    let grid = cfg.grid.build()?;
    let initial = cfg.initial_spectrum.sample(&grid);
    let settings = ClosureSettings {
        kind: cfg.closure,
        nu: cfg.nu,
        eps_floor: cfg.eps_floor,
        nonlinear: cfg.decay.nonlinear,
        track_response: cfg.decay.track_response,
        diagonal: cfg.decay.diagonal,
    };
    let times = TimeGrid::new(cfg.time.dt, cfg.time.n_steps)?;
    let mut state = ClosureState::new(grid, times, settings, &initial)?;

    let mut summary = DecaySummary {
        energy_monotone: true,
        ..Default::default()
    };
    let mut events = EventCounts::default();
    let record = |state: &ClosureState, summary: &mut DecaySummary, m: usize| {
        let energy = energy_spectrum(state.grid(), state.q().diagonal(m));
        summary.t.push(state.times().t(m));
        summary.total_energy.push(total_energy(state.grid(), &energy));
        summary.dissipation_rate.push(dissipation_rate(state.grid(), cfg.nu, &energy));
    };
    record(&state, &mut summary, 0);
    summary.negative_spectrum.push(state.q().diagonal(0).iter().filter(|&&v| v < 0.0).count());
    summary.regularized.push(0);
    if cfg.emits(Emit::Spectrum) {
        write_spectrum(&state, 0, art)?;
    }

    let mut blowup = None;
    for step in 1..=cfg.time.n_steps {
        match state.advance() {
            Ok(report) => {
                summary.transfer_residual.push(report.transfer_residual);
                summary.negative_spectrum.push(report.negative_spectrum);
                summary.regularized.push(report.regularized);
                if report.negative_spectrum > 0 {
                    events.negative_spectrum_steps += 1;
                    events.negative_spectrum_flags += report.negative_spectrum;
                }
                record(&state, &mut summary, step);
                let e = &summary.total_energy;
                if e[step] > e[step - 1] {
                    summary.energy_monotone = false;
                }
                if cfg.emits(Emit::Spectrum) && (step % cfg.decay.spectrum_every == 0 || step == cfg.time.n_steps) {
                    write_spectrum(&state, step, art)?;
                }
                log::info!(
                    "step {step}: E = {:.6e}, residual = {:.2e}",
                    summary.total_energy[step],
                    report.transfer_residual
                );
            }
            Err(e @ Error::Blowup { .. }) => {
                log::warn!("blowup during step {step}: {e}");
                let m = state.current_row();
                if cfg.emits(Emit::Spectrum) && m % cfg.decay.spectrum_every != 0 {
                    write_spectrum(&state, m, art)?;
                }
                blowup = Some(BlowupInfo {
                    last_good_row: m,
                    message: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let last = state.current_row();
    summary.transfer_residual.push(if blowup.is_none() {
        transfer_conservation(&state, last)?
    } else {
        f64::NAN
    });

    if cfg.emits(Emit::Conservation) {
        let rows: Vec<(f64, f64)> = summary
            .t
            .iter()
            .copied()
            .zip(summary.transfer_residual.iter().copied())
            .filter(|(_, r)| r.is_finite())
            .collect();
        emit_csv(&art.path("conservation.csv".into()), &["t", "residual"], rows)?;
    }
    let tau = state.time();
    for &k_index in &cfg.decay.decorrelation_k {
        let curve = decorrelation_curve(&state, k_index)?;
        let k = state.grid().k(k_index);
        if cfg.emits(Emit::Decorrelation) {
            let rows = curve.iter().map(|p| (p.t_prime, p.ratio, p.viscous_reference));
            emit_csv(
                &art.path(format!("decorrelation_k{k_index:02}.csv")),
                &["t_prime", "ratio", "exact_viscous_ref"],
                rows,
            )?;
        }
        let first = curve[0];
        summary.decorrelation.push(DecorrelationSummary {
            k_index,
            k,
            ratio_from_start: first.ratio,
            viscous_reference: first.viscous_reference,
            swept_reference: first.viscous_reference * sweeping_factor(cfg.sweeping, k, tau),
        });
    }
    if cfg.emits(Emit::TwoTimeDump) {
        let q = state.q();
        let times = state.times();
        let grid = state.grid();
        let rows = (0..=last).flat_map(|m| {
            (0..=m).flat_map(move |n| (0..grid.n_k()).map(move |k| (times.t(m), times.t(n), grid.k(k), q.get(k, m, n))))
        });
        emit_csv(&art.path("two_time.csv".into()), &["t", "t_prime", "k", "Q"], rows)?;
    }
    emit_json(&art.path("summary.json".into()), &summary)?;

    events.regularized_divisions = state.events().count();
    events.division_samples = state.events().samples();
    Ok((events, blowup))
}

fn run_oscillator(cfg: &RunConfig, art: &mut Artifacts) -> Result<EventCounts> {
    let params = cfg.oscillator_params()?;
    let times = TimeGrid::new(cfg.time.dt, cfg.time.n_steps)?;
    let solution: OscillatorState = match cfg.closure {
        ClosureKind::Rget => rget_solve(&params, &times)?,
        ClosureKind::Dia => dia_solve(&params, &times)?,
        other => unreachable!("validated: {other}"),
    };
    let rows: Vec<usize> = (0..=cfg.time.n_steps)
        .filter(|m| m % cfg.oscillator.output_every == 0 || *m == cfg.time.n_steps)
        .collect();
    let mc = if cfg.mode == Mode::Oracle {
        let pairs: Vec<(f64, f64)> = rows.iter().map(|&m| (times.t(m), 0.0)).collect();
        Some(monte_carlo_oracle(&params, cfg.oscillator.mc_samples, &pairs, cfg.seed)?)
    } else {
        None
    };
    let mut max_z: f64 = 0.0;
    let table: Vec<_> = rows
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let t = times.t(m);
            let q_exact = exact_equal_time(&params, t);
            let estimate = mc.as_ref().map(|points| points[i].equal_time);
            if let Some(e) = estimate {
                if e.re_stderr > 0.0 {
                    max_z = max_z.max((e.re - q_exact).abs() / e.re_stderr);
                }
            }
            (
                t,
                q_exact,
                solution.equal_time(m),
                exact_response(&params, t, 0.0),
                solution.response(m, 0),
                estimate.map(|e| e.re),
                estimate.map(|e| e.re_stderr),
            )
        })
        .collect();
    emit_csv(
        &art.path("oscillator.csv".into()),
        &["t", "Q_exact", "Q_closure", "G_exact", "G_closure", "Q_mc", "Q_mc_stderr"],
        table,
    )?;
    let stride = (cfg.time.n_steps / 300).max(1);
    let summary = OscillatorSummary {
        closure: cfg.closure,
        max_relative_error: max_exact_error(&params, &solution),
        constraint_residual: (cfg.closure == ClosureKind::Rget).then(|| constraint_residual(&params, &solution, stride)),
        constraint_stride: (cfg.closure == ClosureKind::Rget).then_some(stride),
        mc_samples: mc.as_ref().map(|_| cfg.oscillator.mc_samples),
        mc_max_z: mc.as_ref().map(|_| max_z),
    };
    emit_json(&art.path("summary.json".into()), &summary)?;
    Ok(EventCounts::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, GridConfig, TimeConfig};

    fn small_decay(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig::defaults(Mode::Decay);
        cfg.grid = GridConfig {
            k_min: 0.2,
            k_max: 5.0,
            n_k: 12,
            n_mu: 6,
        };
        cfg.time = TimeConfig { dt: 0.02, n_steps: 6 };
        cfg.decay.spectrum_every = 4;
        cfg.decay.decorrelation_k = vec![3];
        cfg.emit.push(Emit::TwoTimeDump);
        cfg.output_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn decay_run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&small_decay(dir.path())).unwrap();
        assert_eq!(out.exit_code(), 0);
        for name in [
            "manifest.json",
            "summary.json",
            "spectrum_t0000.csv",
            "spectrum_t0004.csv",
            "spectrum_t0006.csv",
            "conservation.csv",
            "decorrelation_k03.csv",
            "two_time.csv",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
            assert!(out.manifest.outputs.iter().any(|o| o == name));
        }
        let conservation = fs::read_to_string(dir.path().join("conservation.csv")).unwrap();
        assert_eq!(conservation.lines().count(), 1 + 7);
        let two_time = fs::read_to_string(dir.path().join("two_time.csv")).unwrap();
        assert_eq!(two_time.lines().count(), 1 + 12 * 28);
    }

    #[test]
    fn identical_config_gives_identical_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut cfg = small_decay(a.path());
        run(&cfg).unwrap();
        cfg.output_dir = b.path().to_path_buf();
        run(&cfg).unwrap();
        for name in ["spectrum_t0006.csv", "summary.json", "two_time.csv"] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
    }

    #[test]
    fn config_error_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_decay(&dir.path().join("run"));
        cfg.nu = -1.0;
        let err = run(&cfg).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(!dir.path().join("run").exists());
    }

    #[test]
    fn blowup_is_reported_with_exit_code_three() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_decay(dir.path());
        // a huge peaked start on a coarse grid overwhelms the VLET ratio
        cfg.closure = ClosureKind::Vlet;
        cfg.initial_spectrum = crate::closures::InitialSpectrum::Peaked {
            amplitude: 1e6,
            k_peak: 1.0,
        };
        cfg.time.n_steps = 60;
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code(), 3);
        assert_eq!(out.manifest.status, RunStatus::Blowup);
        let events = &out.manifest.events;
        assert!(events.regularized_divisions > 0);
        assert!(events
            .division_samples
            .iter()
            .all(|e| e.k_index.is_some_and(|k| k < 12) && e.times.0 <= 60));
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(text.contains("\"status\": \"blowup\""));
    }

    #[test]
    fn oracle_run_fills_monte_carlo_columns() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "mode = \"oracle\"\nnu = 0.1\nseed = 7\noutput_dir = {:?}\n[oscillator]\nb_var = 1.0\nmc_samples = 20000\noutput_every = 50\n[time]\ndt = 0.01\nn_steps = 100\n",
            dir.path().display().to_string()
        );
        let cfg = parse_config(&text, None).unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code(), 0);
        let csv = fs::read_to_string(dir.path().join("oscillator.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,Q_exact,Q_closure,G_exact,G_closure,Q_mc,Q_mc_stderr");
        assert_eq!(lines.len(), 1 + 3);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 7 && !l.ends_with(',')));
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert!(summary["max_relative_error"].as_f64().unwrap() < 1e-6);
        assert!(summary["mc_max_z"].as_f64().unwrap() < 4.0);
    }
}
