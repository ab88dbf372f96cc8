//! Run configuration: a TOML document with lowercase snake-case keys.
//!
//! Parsing is strict. Unknown keys, duplicate keys, type mismatches and
//! out-of-domain values are all rejected with the key path and, where it
//! can be found, the line. Every key is optional; [`reference_markdown`]
//! renders the defaults (this is what `CONFIG.md` contains).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::closures::{ClosureKind, DiagonalRoute, InitialSpectrum};
use crate::diagnostics::SweepingParams;
use crate::error::{ConfigError, Result};
use crate::kernel::WavenumberGrid;
use crate::oscillator::OscillatorParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Random oscillator: closed forms against the closure solution.
    Oscillator,
    /// Free decay of isotropic turbulence under one closure.
    Decay,
    /// Oscillator run plus the Monte-Carlo ensemble oracle.
    Oracle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Oscillator => "oscillator",
            Mode::Decay => "decay",
            Mode::Oracle => "oracle",
        }
    }

    fn is_oscillator(self) -> bool {
        self != Mode::Decay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    Spectrum,
    Decorrelation,
    Conservation,
    TwoTimeDump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
    pub n_mu: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<WavenumberGrid> {
        WavenumberGrid::build(self.k_min, self.k_max, self.n_k, self.n_mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeConfig {
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorConfig {
    pub b_var: f64,
    pub q0_sq: f64,
    pub mc_samples: usize,
    /// Rows of `oscillator.csv`: every `output_every`-th time node.
    pub output_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayConfig {
    pub nonlinear: bool,
    pub track_response: bool,
    pub diagonal: DiagonalRoute,
    /// Spectrum snapshots every this many steps (the last step is always written).
    pub spectrum_every: usize,
    /// Wavenumber indices for `decorrelation_kNN.csv`.
    pub decorrelation_k: Vec<usize>,
}

/// Validated experiment description with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub closure: ClosureKind,
    pub nu: f64,
    pub eps_floor: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub emit: Vec<Emit>,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial_spectrum: InitialSpectrum,
    pub oscillator: OscillatorConfig,
    pub sweeping: SweepingParams,
    pub decay: DecayConfig,
}

// Raw document; `None` means "use the default".
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    closure: Option<ClosureKind>,
    nu: Option<f64>,
    eps_floor: Option<f64>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    emit: Option<Vec<Emit>>,
    grid: Option<RawGrid>,
    time: Option<RawTime>,
    initial_spectrum: Option<RawSpectrum>,
    oscillator: Option<RawOscillator>,
    sweeping: Option<RawSweeping>,
    decay: Option<RawDecay>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    k_min: Option<f64>,
    k_max: Option<f64>,
    n_k: Option<usize>,
    n_mu: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: Option<f64>,
    n_steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawSpectrum {
    Peaked { amplitude: Option<f64>, k_peak: Option<f64> },
    PowerExp { c: Option<f64>, exponent: Option<f64>, cutoff: Option<f64> },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOscillator {
    b_var: Option<f64>,
    q0_sq: Option<f64>,
    mc_samples: Option<usize>,
    output_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweeping {
    v0_sq: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecay {
    nonlinear: Option<bool>,
    track_response: Option<bool>,
    diagonal: Option<DiagonalRoute>,
    spectrum_every: Option<usize>,
    decorrelation_k: Option<Vec<usize>>,
}

pub const DEFAULT_GRID: GridConfig = GridConfig {
    k_min: 0.1,
    k_max: 6.0,
    n_k: 64,
    n_mu: 32,
};
pub const DEFAULT_DECAY_TIME: TimeConfig = TimeConfig { dt: 0.01, n_steps: 128 };
pub const DEFAULT_OSCILLATOR_TIME: TimeConfig = TimeConfig { dt: 1e-3, n_steps: 3000 };
pub const DEFAULT_NU: f64 = 0.1;
pub const DEFAULT_SPECTRUM: InitialSpectrum = InitialSpectrum::PowerExp {
    c: 0.05,
    exponent: 1.0,
    cutoff: 0.5,
};
const DEFAULT_PEAKED: (f64, f64) = (1.0, 1.0);
pub const DEFAULT_OSCILLATOR: OscillatorConfig = OscillatorConfig {
    b_var: 1.0,
    q0_sq: 1.0,
    mc_samples: 100_000,
    output_every: 100,
};

/// Quarter points of the grid: `[16, 32, 48]` for the default 64 nodes.
pub fn default_decorrelation_k(n_k: usize) -> Vec<usize> {
    let mut k = vec![n_k / 4, n_k / 2, 3 * n_k / 4];
    k.dedup();
    k
}

impl RunConfig {
    /// Every key at its default for `mode`.
    pub fn defaults(mode: Mode) -> Self {
        let time = if mode.is_oscillator() {
            DEFAULT_OSCILLATOR_TIME
        } else {
            DEFAULT_DECAY_TIME
        };
        Self {
            mode,
            closure: if mode.is_oscillator() { ClosureKind::Rget } else { ClosureKind::Dia },
            nu: DEFAULT_NU,
            eps_floor: 1e-8,
            seed: 0,
            output_dir: PathBuf::from("out"),
            emit: vec![Emit::Spectrum, Emit::Decorrelation, Emit::Conservation],
            grid: DEFAULT_GRID,
            time,
            initial_spectrum: DEFAULT_SPECTRUM,
            oscillator: DEFAULT_OSCILLATOR,
            sweeping: SweepingParams { v0_sq: 1.0 },
            decay: DecayConfig {
                nonlinear: true,
                track_response: false,
                diagonal: DiagonalRoute::EqualTime,
                spectrum_every: 16,
                decorrelation_k: default_decorrelation_k(DEFAULT_GRID.n_k),
            },
        }
    }

    pub fn oscillator_params(&self) -> Result<OscillatorParams> {
        OscillatorParams::new(self.nu, self.oscillator.b_var, self.oscillator.q0_sq)
    }

    pub fn emits(&self, what: Emit) -> bool {
        self.emit.contains(&what)
    }
}

/// 1-based line of byte offset `pos`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

/// Line on which `path` (e.g. `grid.n_k`) is assigned, if it is present.
fn locate(text: &str, path: &str) -> Option<usize> {
    let (table, leaf) = match path.rsplit_once('.') {
        Some((t, l)) => (t, l),
        None => ("", path),
    };
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = header.trim().to_string();
            continue;
        }
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim().trim_matches('"');
            if current == table && key == leaf {
                return Some(i + 1);
            }
            // dotted keys at top level, e.g. `grid.n_k = 64`
            if current.is_empty() && key == path {
                return Some(i + 1);
            }
        }
    }
    None
}

/// Parses and validates a configuration document. `mode` overrides the
/// document's `mode` key when given (a conflicting key is an error).
pub fn parse_config(text: &str, mode: Option<Mode>) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        ConfigError::new("", e.message().trim().to_string()).at_line(line)
    })?;
    let fail = |key: &str, message: String| -> crate::error::Error {
        ConfigError::new(key, message).at_line(locate(text, key)).into()
    };

    let mode = match (mode, raw.mode) {
        (Some(cli), Some(doc)) if cli != doc => {
            return Err(fail(
                "mode",
                format!("document says `{}` but `{}` was requested", doc.name(), cli.name()),
            ))
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => Mode::Decay,
    };
    let mut cfg = RunConfig::defaults(mode);
    if let Some(v) = raw.closure {
        cfg.closure = v;
    }
    if let Some(v) = raw.nu {
        cfg.nu = v;
    }
    if let Some(v) = raw.eps_floor {
        cfg.eps_floor = v;
    }
    if let Some(v) = raw.seed {
        cfg.seed = v;
    }
    if let Some(v) = raw.output_dir {
        cfg.output_dir = v;
    }
    if let Some(v) = raw.emit {
        cfg.emit = v;
    }
    if let Some(g) = raw.grid {
        cfg.grid.k_min = g.k_min.unwrap_or(cfg.grid.k_min);
        cfg.grid.k_max = g.k_max.unwrap_or(cfg.grid.k_max);
        cfg.grid.n_k = g.n_k.unwrap_or(cfg.grid.n_k);
        cfg.grid.n_mu = g.n_mu.unwrap_or(cfg.grid.n_mu);
    }
    if let Some(t) = raw.time {
        cfg.time.dt = t.dt.unwrap_or(cfg.time.dt);
        cfg.time.n_steps = t.n_steps.unwrap_or(cfg.time.n_steps);
    }
    if let Some(s) = raw.initial_spectrum {
        cfg.initial_spectrum = match s {
            RawSpectrum::Peaked { amplitude, k_peak } => InitialSpectrum::Peaked {
                amplitude: amplitude.unwrap_or(DEFAULT_PEAKED.0),
                k_peak: k_peak.unwrap_or(DEFAULT_PEAKED.1),
            },
            RawSpectrum::PowerExp { c, exponent, cutoff } => {
                let InitialSpectrum::PowerExp {
                    c: c0,
                    exponent: a0,
                    cutoff: k0,
                } = DEFAULT_SPECTRUM
                else {
                    unreachable!()
                };
                InitialSpectrum::PowerExp {
                    c: c.unwrap_or(c0),
                    exponent: exponent.unwrap_or(a0),
                    cutoff: cutoff.unwrap_or(k0),
                }
            }
        };
    }
    if let Some(o) = raw.oscillator {
        cfg.oscillator.b_var = o.b_var.unwrap_or(cfg.oscillator.b_var);
        cfg.oscillator.q0_sq = o.q0_sq.unwrap_or(cfg.oscillator.q0_sq);
        cfg.oscillator.mc_samples = o.mc_samples.unwrap_or(cfg.oscillator.mc_samples);
        cfg.oscillator.output_every = o.output_every.unwrap_or(cfg.oscillator.output_every);
    }
    if let Some(s) = raw.sweeping {
        cfg.sweeping.v0_sq = s.v0_sq.unwrap_or(cfg.sweeping.v0_sq);
    }
    cfg.decay.decorrelation_k = default_decorrelation_k(cfg.grid.n_k);
    if let Some(d) = raw.decay {
        cfg.decay.nonlinear = d.nonlinear.unwrap_or(cfg.decay.nonlinear);
        cfg.decay.track_response = d.track_response.unwrap_or(cfg.decay.track_response);
        cfg.decay.diagonal = d.diagonal.unwrap_or(cfg.decay.diagonal);
        cfg.decay.spectrum_every = d.spectrum_every.unwrap_or(cfg.decay.spectrum_every);
        if let Some(k) = d.decorrelation_k {
            cfg.decay.decorrelation_k = k;
        }
    }
    validate(&cfg).map_err(|e| match e {
        crate::error::Error::Config(c) => {
            let line = c.line.or_else(|| locate(text, &c.key));
            crate::error::Error::Config(c.at_line(line))
        }
        other => other,
    })?;
    Ok(cfg)
}

/// Domain checks shared by parsed and programmatic configurations.
pub fn validate(cfg: &RunConfig) -> Result<()> {
    let bad = |key: &str, message: &str| -> Result<()> { Err(ConfigError::new(key, message).into()) };
    if !(cfg.nu.is_finite() && cfg.nu >= 0.0) {
        return bad("nu", "must be finite and >= 0");
    }
    if !(cfg.eps_floor.is_finite() && cfg.eps_floor > 0.0 && cfg.eps_floor < 1.0) {
        return bad("eps_floor", "must lie in (0, 1)");
    }
    if !(cfg.time.dt.is_finite() && cfg.time.dt > 0.0) {
        return bad("time.dt", "must be finite and > 0");
    }
    if cfg.time.n_steps == 0 {
        return bad("time.n_steps", "must be at least 1");
    }
    if cfg.mode.is_oscillator() {
        if !matches!(cfg.closure, ClosureKind::Rget | ClosureKind::Dia) {
            return bad("closure", "the oscillator runs under `rget` or `dia` only");
        }
        cfg.oscillator_params().map_err(|e| match e {
            crate::error::Error::Config(c) => {
                let key = match c.key.as_str() {
                    "nu" => "nu".to_string(),
                    other => format!("oscillator.{other}"),
                };
                crate::error::Error::Config(ConfigError::new(key, c.message))
            }
            other => other,
        })?;
        if cfg.oscillator.output_every == 0 {
            return bad("oscillator.output_every", "must be at least 1");
        }
        if cfg.mode == Mode::Oracle && cfg.oscillator.mc_samples < 1000 {
            return bad("oscillator.mc_samples", "must be at least 1000");
        }
    } else {
        cfg.grid.build()?;
        cfg.initial_spectrum.validate()?;
        if cfg.decay.spectrum_every == 0 {
            return bad("decay.spectrum_every", "must be at least 1");
        }
        if let Some(&k) = cfg.decay.decorrelation_k.iter().find(|&&k| k >= cfg.grid.n_k) {
            return Err(ConfigError::new(
                "decay.decorrelation_k",
                format!("index {k} outside the {}-node grid", cfg.grid.n_k),
            )
            .into());
        }
        if cfg.decay.diagonal == DiagonalRoute::TwoTimeSweep && cfg.closure == ClosureKind::Rget {
            return bad("decay.diagonal", "`two_time_sweep` is defined for dia, let and vlet");
        }
        if cfg.decay.track_response && cfg.closure != ClosureKind::Rget {
            return bad("decay.track_response", "only the RGET response is optional");
        }
    }
    SweepingParams::new(cfg.sweeping.v0_sq).map_err(|_| ConfigError::new("sweeping.v0_sq", "must be finite and >= 0"))?;
    Ok(())
}

fn spectrum_doc(s: &InitialSpectrum) -> String {
    match *s {
        InitialSpectrum::Peaked { amplitude, k_peak } => {
            format!("kind = \"peaked\", amplitude = {amplitude:?}, k_peak = {k_peak:?}")
        }
        InitialSpectrum::PowerExp { c, exponent, cutoff } => {
            format!("kind = \"power_exp\", c = {c:?}, exponent = {exponent:?}, cutoff = {cutoff:?}")
        }
    }
}

/// Markdown reference of every key and its default.
pub fn reference_markdown() -> String {
    let d = RunConfig::defaults(Mode::Decay);
    let o = RunConfig::defaults(Mode::Oscillator);
    let rows: Vec<(&str, String, &str)> = vec![
        ("mode", "\"decay\"".into(), "`oscillator`, `decay` or `oracle`; the CLI subcommand takes precedence and a conflicting value is an error"),
        ("closure", format!("\"{}\" (decay), \"{}\" (oscillator, oracle)", d.closure, o.closure), "`dia`, `let`, `vlet` or `rget`; the oscillator accepts `dia` and `rget`"),
        ("nu", format!("{:?}", d.nu), "viscosity (decay) or damping rate (oscillator), >= 0"),
        ("eps_floor", format!("{:?}", d.eps_floor), "relative floor for divisions, in (0, 1)"),
        ("seed", format!("{}", d.seed), "Monte-Carlo seed"),
        ("output_dir", format!("{:?}", d.output_dir.display().to_string()), "run directory, created if missing"),
        ("emit", "[\"spectrum\", \"decorrelation\", \"conservation\"]".into(), "decay outputs; `two_time_dump` adds `two_time.csv`"),
        ("grid.k_min", format!("{:?}", d.grid.k_min), "> 0"),
        ("grid.k_max", format!("{:?}", d.grid.k_max), "> k_min"),
        ("grid.n_k", format!("{}", d.grid.n_k), ">= 8 radial nodes, log-spaced"),
        ("grid.n_mu", format!("{}", d.grid.n_mu), ">= 4 Gauss-Legendre angular nodes"),
        ("time.dt", format!("{:?} (decay), {:?} (oscillator, oracle)", d.time.dt, o.time.dt), "> 0"),
        ("time.n_steps", format!("{} (decay), {} (oscillator, oracle)", d.time.n_steps, o.time.n_steps), ">= 1"),
        ("initial_spectrum", spectrum_doc(&d.initial_spectrum), "`peaked`: A k^4 exp(-2k^2/k_p^2), defaults amplitude = 1.0, k_peak = 1.0; `power_exp`: c k^a exp(-k/k_c)"),
        ("oscillator.b_var", format!("{:?}", o.oscillator.b_var), "variance of the random frequency, >= 0"),
        ("oscillator.q0_sq", format!("{:?}", o.oscillator.q0_sq), "initial correlation Q(0,0), > 0"),
        ("oscillator.mc_samples", format!("{}", o.oscillator.mc_samples), "oracle ensemble size, >= 1000"),
        ("oscillator.output_every", format!("{}", o.oscillator.output_every), "row stride of `oscillator.csv`"),
        ("sweeping.v0_sq", format!("{:?}", d.sweeping.v0_sq), "sweeping-velocity variance behind `swept_reference` in `summary.json`, >= 0"),
        ("decay.nonlinear", format!("{}", d.decay.nonlinear), "false drops every transfer term"),
        ("decay.track_response", format!("{}", d.decay.track_response), "evolve the RGET response G"),
        ("decay.diagonal", "\"equal_time\"".into(), "`equal_time` or `two_time_sweep` (not RGET)"),
        ("decay.spectrum_every", format!("{}", d.decay.spectrum_every), "snapshot stride; the last step is always written"),
        ("decay.decorrelation_k", "n_k/4, n_k/2, 3n_k/4".into(), "grid indices for `decorrelation_kNN.csv`"),
    ];
    let mut out = String::from(
        "# Configuration reference\n\n\
         Generated by `spectral_closure::config::reference_markdown`; a test keeps this file in sync.\n\n\
         Configs are TOML. Every key is optional. Unknown or duplicate keys are errors, and so are\n\
         out-of-range values; the message names the key path and line.\n\n\
         | key | default | meaning |\n|---|---|---|\n",
    );
    for (key, default, meaning) in rows {
        out.push_str(&format!("| `{key}` | `{default}` | {meaning} |\n"));
    }
    out.push_str(
        "\nMinimal oscillator run:\n\n```toml\nmode = \"oscillator\"\nnu = 0.1\n\n[oscillator]\nb_var = 1.0\n\n[time]\ndt = 0.001\nn_steps = 3000\n```\n\
         \nA short VLET free decay from a peaked spectrum with the full two-time table:\n\n```toml\n\
         mode = \"decay\"\nclosure = \"vlet\"\nemit = [\"spectrum\", \"conservation\", \"two_time_dump\"]\n\n\
         [grid]\nk_min = 0.2\nk_max = 4.0\nn_k = 24\nn_mu = 12\n\n\
         [time]\ndt = 0.01\nn_steps = 40\n\n\
         [initial_spectrum]\nkind = \"peaked\"\namplitude = 0.05\nk_peak = 1.0\n```\n",
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn config_error(text: &str) -> ConfigError {
        match parse_config(text, None) {
            Err(Error::Config(c)) => c,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_oscillator_config() {
        let text = "mode = \"oscillator\"\nnu = 0.1\n[oscillator]\nb_var = 0.5\n[time]\ndt = 0.01\nn_steps = 20\n";
        let cfg = parse_config(text, None).unwrap();
        assert_eq!(cfg.mode, Mode::Oscillator);
        assert_eq!(cfg.closure, ClosureKind::Rget);
        assert_eq!(cfg.oscillator.b_var, 0.5);
        assert_eq!(cfg.oscillator.q0_sq, 1.0);
        assert_eq!(cfg.time, TimeConfig { dt: 0.01, n_steps: 20 });
    }

    #[test]
    fn negative_nu_names_the_key() {
        let e = config_error("mode = \"decay\"\n\nnu = -1.0\n");
        assert_eq!(e.key, "nu");
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let e = config_error("nu = 0.1\nnu = 0.2\n");
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let e = config_error("[grid]\nn_k = 32\nnk = 32\n");
        assert!(e.message.contains("nk"), "{}", e.message);
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn type_mismatch_is_rejected() {
        let e = config_error("[time]\nn_steps = \"many\"\n");
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn nested_domain_error_has_path_and_line() {
        let e = config_error("[grid]\nk_min = 0.1\nn_k = 4\n");
        assert_eq!(e.key, "grid.n_k");
        assert_eq!(e.line, Some(3));
        let e = config_error("mode = \"oracle\"\n[oscillator]\nmc_samples = 10\n");
        assert_eq!(e.key, "oscillator.mc_samples");
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn spectrum_families() {
        let cfg = parse_config("[initial_spectrum]\nkind = \"peaked\"\nk_peak = 2.0\n", None).unwrap();
        assert_eq!(cfg.initial_spectrum, InitialSpectrum::Peaked { amplitude: 1.0, k_peak: 2.0 });
        let e = config_error("[initial_spectrum]\nkind = \"peaked\"\ncutoff = 2.0\n");
        assert!(e.message.contains("cutoff"));
    }

    #[test]
    fn mode_conflict_and_override() {
        let cfg = parse_config("", Some(Mode::Oracle)).unwrap();
        assert_eq!(cfg.mode, Mode::Oracle);
        assert_eq!(cfg.time, DEFAULT_OSCILLATOR_TIME);
        assert!(matches!(
            parse_config("mode = \"decay\"\n", Some(Mode::Oscillator)),
            Err(Error::Config(c)) if c.key == "mode"
        ));
    }

    #[test]
    fn closure_restrictions() {
        assert_eq!(config_error("mode = \"oscillator\"\nclosure = \"let\"\n").key, "closure");
        assert_eq!(
            config_error("closure = \"rget\"\n[decay]\ndiagonal = \"two_time_sweep\"\n").key,
            "decay.diagonal"
        );
        assert_eq!(config_error("[decay]\ndecorrelation_k = [64]\n").key, "decay.decorrelation_k");
    }

    #[test]
    fn defaults_validate() {
        for mode in [Mode::Oscillator, Mode::Decay, Mode::Oracle] {
            validate(&RunConfig::defaults(mode)).unwrap();
        }
        assert_eq!(DEFAULT_SPECTRUM, InitialSpectrum::default());
    }

    #[test]
    fn decorrelation_indices_follow_the_grid() {
        let cfg = parse_config("mode = \"decay\"\n[grid]\nn_k = 12\n", None).unwrap();
        assert_eq!(cfg.decay.decorrelation_k, vec![3, 6, 9]);
        assert_eq!(RunConfig::defaults(Mode::Decay).decay.decorrelation_k, vec![16, 32, 48]);
    }
}
