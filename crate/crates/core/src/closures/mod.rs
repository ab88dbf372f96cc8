//! Right-hand sides and time stepping for the DIA, LET, VLET and RGET
//! closures of homogeneous isotropic turbulence.
//!
//! All four closures evolve the two-time correlation `Q(k; t, t')` and its
//! equal-time diagonal. They differ in how the propagator is obtained:
//!
//! | closure | propagator                                   | correlation RHS |
//! |---------|----------------------------------------------|-----------------|
//! | DIA     | evolved response `H`                          | transfer `P`     |
//! | LET     | `H(k;t,t') = Q(k;t,t') / Q(k;t',t')`          | transfer `P`     |
//! | VLET    | `H(k;t,t') = Q(k;t,t) / Q(k;t,t')`            | transfer `P`     |
//! | RGET    | eliminated by the sweeping constraints        | dedicated forms  |
//!
//! [`reference`](mod@reference) evaluates single entries directly from the integral
//! definitions; [`assembly`] produces whole time rows and is what the
//! stepper uses.

pub mod assembly;
mod initial;
pub mod reference;
mod stepper;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use self::initial::InitialSpectrum;
pub use self::stepper::{DiagonalRoute, StepReport};
use crate::error::{Error, Result};
use crate::history::{FieldKind, TimeGrid, TwoTimeField};
use crate::kernel::{TriadTable, WavenumberGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosureKind {
    Dia,
    Let,
    Vlet,
    Rget,
}

impl ClosureKind {
    pub const ALL: [ClosureKind; 4] = [
        ClosureKind::Dia,
        ClosureKind::Let,
        ClosureKind::Vlet,
        ClosureKind::Rget,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClosureKind::Dia => "dia",
            ClosureKind::Let => "let",
            ClosureKind::Vlet => "vlet",
            ClosureKind::Rget => "rget",
        }
    }

    /// DIA, LET and VLET share the transfer term and differ only in `H`.
    pub fn uses_shared_transfer(self) -> bool {
        !matches!(self, ClosureKind::Rget)
    }
}

impl fmt::Display for ClosureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClosureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dia" => Ok(ClosureKind::Dia),
            "let" => Ok(ClosureKind::Let),
            "vlet" => Ok(ClosureKind::Vlet),
            "rget" => Ok(ClosureKind::Rget),
            other => Err(format!("unknown closure `{other}` (expected dia, let, vlet or rget)")),
        }
    }
}

/// Result of a floored division.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guarded {
    pub value: f64,
    pub regularized: bool,
}

/// `numerator / denominator`, with `|denominator|` floored at
/// `eps_floor · scale`. A zero denominator is treated as positive.
#[inline]
pub fn safeguard_divide(numerator: f64, denominator: f64, scale: f64, eps_floor: f64) -> Guarded {
    let floor = eps_floor * scale;
    if denominator.abs() >= floor {
        Guarded {
            value: numerator / denominator,
            regularized: false,
        }
    } else {
        let signed = if denominator < 0.0 { -floor } else { floor };
        Guarded {
            value: numerator / signed,
            regularized: true,
        }
    }
}

/// Where a regularized division happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DivisionSite {
    LetPropagator,
    VletPropagator,
    RgetCorrelation,
    RgetResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DivisionEvent {
    pub site: DivisionSite,
    /// Wavenumber of the equation being assembled; `None` when the division
    /// feeds every equation (the shared reciprocal tables of the RGET path).
    pub k_index: Option<usize>,
    /// Node of the floored denominator inside a triad sum.
    pub p_index: Option<usize>,
    /// Time indices of the floored denominator.
    pub times: (usize, usize),
}

/// Run-wide tally of regularized divisions with the first few provenances.
#[derive(Debug, Default)]
pub struct DivisionLog {
    count: AtomicU64,
    samples: Mutex<Vec<DivisionEvent>>,
}

impl DivisionLog {
    const MAX_SAMPLES: usize = 32;

    pub fn record(&self, event: DivisionEvent) {
        self.count.fetch_add(1, Ordering::Relaxed);
        let mut samples = self.samples.lock().expect("division log poisoned");
        if samples.len() < Self::MAX_SAMPLES {
            samples.push(event);
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn samples(&self) -> Vec<DivisionEvent> {
        self.samples.lock().expect("division log poisoned").clone()
    }
}

/// Floored divisions found while building a table, before they are merged
/// into the run-wide [`DivisionLog`].
#[derive(Debug, Default)]
pub(crate) struct DivisionTally {
    pub count: u64,
    samples: Vec<DivisionEvent>,
}

impl DivisionTally {
    pub fn note(&mut self, event: DivisionEvent) {
        self.count += 1;
        if self.samples.len() < DivisionLog::MAX_SAMPLES {
            self.samples.push(event);
        }
    }
}

impl Clone for DivisionLog {
    fn clone(&self) -> Self {
        Self {
            count: AtomicU64::new(self.count()),
            samples: Mutex::new(self.samples()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureSettings {
    pub kind: ClosureKind,
    /// Kinematic viscosity.
    pub nu: f64,
    /// Relative floor for divisions by correlations and propagators.
    pub eps_floor: f64,
    /// When false every nonlinear term is dropped (`L ≡ 0`).
    pub nonlinear: bool,
    /// Evolve the RGET response `G` alongside `Q`.
    pub track_response: bool,
    pub diagonal: DiagonalRoute,
}

impl ClosureSettings {
    pub const DEFAULT_EPS_FLOOR: f64 = 1e-8;

    pub fn new(kind: ClosureKind, nu: f64) -> Self {
        Self {
            kind,
            nu,
            eps_floor: Self::DEFAULT_EPS_FLOOR,
            nonlinear: true,
            track_response: false,
            diagonal: DiagonalRoute::EqualTime,
        }
    }
}

/// Everything the stepper evolves, plus the shared geometry.
#[derive(Debug, Clone)]
pub struct ClosureState {
    grid: WavenumberGrid,
    triads: TriadTable,
    times: TimeGrid,
    settings: ClosureSettings,
    q: TwoTimeField,
    h: Option<TwoTimeField>,
    g: Option<TwoTimeField>,
    events: DivisionLog,
}

impl ClosureState {
    /// Starts a run from the equal-time spectrum `Q(k; 0, 0)`.
    pub fn new(
        grid: WavenumberGrid,
        times: TimeGrid,
        settings: ClosureSettings,
        initial: &[f64],
    ) -> Result<Self> {
        if initial.len() != grid.n_k() {
            return Err(Error::Contract(format!(
                "initial spectrum has {} values for {} wavenumbers",
                initial.len(),
                grid.n_k()
            )));
        }
        let n_k = grid.n_k();
        let mut q = TwoTimeField::new(FieldKind::Correlation, n_k);
        q.push_row(initial)?;
        let unit = vec![1.0; n_k];
        let h = (settings.kind == ClosureKind::Dia).then(|| {
            let mut h = TwoTimeField::new(FieldKind::Response, n_k);
            h.push_row(&unit).expect("unit row");
            h
        });
        let g = (settings.kind == ClosureKind::Rget && settings.track_response).then(|| {
            let mut g = TwoTimeField::new(FieldKind::Response, n_k);
            g.push_row(&unit).expect("unit row");
            g
        });
        Self::from_fields(grid, times, settings, q, h, g)
    }

    /// Wraps existing fields, e.g. a synthetic history for testing.
    pub fn from_fields(
        grid: WavenumberGrid,
        times: TimeGrid,
        settings: ClosureSettings,
        q: TwoTimeField,
        h: Option<TwoTimeField>,
        g: Option<TwoTimeField>,
    ) -> Result<Self> {
        if !(settings.nu.is_finite() && settings.nu >= 0.0) {
            return Err(crate::error::ConfigError::new("nu", "must be finite and >= 0").into());
        }
        if !(settings.eps_floor.is_finite() && settings.eps_floor > 0.0) {
            return Err(crate::error::ConfigError::new("eps_floor", "must be finite and > 0").into());
        }
        let rows = q.rows();
        if rows == 0 || q.kind() != FieldKind::Correlation || q.n_k() != grid.n_k() {
            return Err(Error::Contract("Q must be a non-empty correlation field on the grid".into()));
        }
        let needs_h = settings.kind == ClosureKind::Dia;
        if needs_h != h.is_some() {
            return Err(Error::Contract("an evolved H is required by DIA and only DIA".into()));
        }
        let needs_g = settings.kind == ClosureKind::Rget && settings.track_response;
        if needs_g != g.is_some() {
            return Err(Error::Contract("G is tracked only under RGET with track_response".into()));
        }
        for field in h.iter().chain(g.iter()) {
            if field.rows() != rows || field.kind() != FieldKind::Response || field.n_k() != grid.n_k() {
                return Err(Error::Contract("response fields must match Q row for row".into()));
            }
        }
        let triads = TriadTable::new(&grid)?;
        Ok(Self {
            grid,
            triads,
            times,
            settings,
            q,
            h,
            g,
            events: DivisionLog::default(),
        })
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn triads(&self) -> &TriadTable {
        &self.triads
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn settings(&self) -> &ClosureSettings {
        &self.settings
    }

    pub fn kind(&self) -> ClosureKind {
        self.settings.kind
    }

    pub fn q(&self) -> &TwoTimeField {
        &self.q
    }

    /// Evolved DIA response function.
    pub fn h(&self) -> Option<&TwoTimeField> {
        self.h.as_ref()
    }

    /// Evolved RGET response function.
    pub fn g(&self) -> Option<&TwoTimeField> {
        self.g.as_ref()
    }

    pub fn events(&self) -> &DivisionLog {
        &self.events
    }

    /// Latest committed time index.
    pub fn current_row(&self) -> usize {
        self.q.rows() - 1
    }

    pub fn time(&self) -> f64 {
        self.times.t(self.current_row())
    }

    fn diagonal_max(&self, m: usize) -> f64 {
        self.q.diagonal(m).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// LET propagator `Q(k;t_m,t_n) / Q(k;t_n,t_n)`; unit on the diagonal.
    pub fn let_propagator(&self, k_index: usize, m: usize, n: usize) -> Result<f64> {
        check_forward(m, n)?;
        if m == n {
            return Ok(1.0);
        }
        let scale = positive_scale(self.diagonal_max(n));
        let r = safeguard_divide(
            self.q.query(k_index, m, n)?,
            self.q.query(k_index, n, n)?,
            scale,
            self.settings.eps_floor,
        );
        if r.regularized {
            self.events.record(DivisionEvent {
                site: DivisionSite::LetPropagator,
                k_index: Some(k_index),
                p_index: None,
                times: (n, n),
            });
        }
        Ok(r.value)
    }

    /// VLET propagator `Q(k;t_m,t_m) / Q(k;t_m,t_n)`; unit on the diagonal.
    pub fn vlet_propagator(&self, k_index: usize, m: usize, n: usize) -> Result<f64> {
        check_forward(m, n)?;
        if m == n {
            return Ok(1.0);
        }
        let scale = positive_scale(self.diagonal_max(m));
        let r = safeguard_divide(
            self.q.query(k_index, m, m)?,
            self.q.query(k_index, m, n)?,
            scale,
            self.settings.eps_floor,
        );
        if r.regularized {
            self.events.record(DivisionEvent {
                site: DivisionSite::VletPropagator,
                k_index: Some(k_index),
                p_index: None,
                times: (m, n),
            });
        }
        Ok(r.value)
    }

    /// `H(k; t_m, t_n)` under the active closure (DIA, LET or VLET).
    pub fn propagator(&self, k_index: usize, m: usize, n: usize) -> Result<f64> {
        match self.settings.kind {
            ClosureKind::Dia => self
                .h
                .as_ref()
                .expect("DIA state carries H")
                .query(k_index, m, n),
            ClosureKind::Let => self.let_propagator(k_index, m, n),
            ClosureKind::Vlet => self.vlet_propagator(k_index, m, n),
            ClosureKind::Rget => Err(Error::Contract(
                "RGET eliminates the propagator; no H is defined".into(),
            )),
        }
    }

    /// Propagator triangle over rows `0..rows`, built without logging.
    /// Returns the table and the number of floored divisions.
    pub(crate) fn propagator_table(&self, rows: usize) -> (Cow<'_, TwoTimeField>, DivisionTally) {
        let n_k = self.grid.n_k();
        let eps = self.settings.eps_floor;
        match self.settings.kind {
            ClosureKind::Dia => (
                Cow::Borrowed(self.h.as_ref().expect("DIA state carries H")),
                DivisionTally::default(),
            ),
            ClosureKind::Rget => unreachable!("RGET has no propagator table"),
            kind => {
                let mut table = TwoTimeField::new(FieldKind::Response, n_k);
                let mut floored = DivisionTally::default();
                let site = match kind {
                    ClosureKind::Let => DivisionSite::LetPropagator,
                    _ => DivisionSite::VletPropagator,
                };
                // time indices of the floored denominator
                let den_times = |m: usize, n: usize| if kind == ClosureKind::Let { (n, n) } else { (m, n) };
                let mut row = Vec::new();
                for m in 0..rows {
                    row.clear();
                    for n in 0..=m {
                        if n == m {
                            row.extend(std::iter::repeat_n(1.0, n_k));
                            continue;
                        }
                        let scale = match kind {
                            ClosureKind::Let => positive_scale(self.diagonal_max(n)),
                            _ => positive_scale(self.diagonal_max(m)),
                        };
                        for k in 0..n_k {
                            let (num, den) = match kind {
                                ClosureKind::Let => (self.q.get(k, m, n), self.q.get(k, n, n)),
                                _ => (self.q.get(k, m, m), self.q.get(k, m, n)),
                            };
                            let r = safeguard_divide(num, den, scale, eps);
                            if r.regularized {
                                floored.note(DivisionEvent {
                                    site,
                                    k_index: Some(k),
                                    p_index: None,
                                    times: den_times(m, n),
                                });
                            }
                            row.push(r.value);
                        }
                    }
                    table
                        .push_row(&row)
                        .unwrap_or_else(|e| panic!("propagator row {m}: {e}"));
                }
                (Cow::Owned(table), floored)
            }
        }
    }

    pub(crate) fn record_bulk(&self, tally: &DivisionTally) {
        if tally.count > 0 {
            self.events.count.fetch_add(tally.count, Ordering::Relaxed);
            let mut samples = self.events.samples.lock().expect("division log poisoned");
            let room = DivisionLog::MAX_SAMPLES.saturating_sub(samples.len());
            samples.extend(tally.samples.iter().take(room).copied());
        }
    }
}

fn check_forward(m: usize, n: usize) -> Result<()> {
    if m < n {
        Err(Error::Contract(format!(
            "propagator queried backwards in time (m={m} < n={n})"
        )))
    } else {
        Ok(())
    }
}

#[inline]
pub(crate) fn positive_scale(scale: f64) -> f64 {
    if scale > 0.0 && scale.is_finite() {
        scale
    } else {
        f64::MIN_POSITIVE
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state_with_q(kind: ClosureKind, rows: &[Vec<f64>]) -> ClosureState {
        let grid = WavenumberGrid::build(0.5, 4.0, 8, 4).unwrap();
        let n_k = grid.n_k();
        let mut q = TwoTimeField::new(FieldKind::Correlation, n_k);
        for row in rows {
            q.push_row(row).unwrap();
        }
        let h = (kind == ClosureKind::Dia).then(|| {
            let mut h = TwoTimeField::new(FieldKind::Response, n_k);
            for m in 0..rows.len() {
                let mut row = vec![0.5; m * n_k];
                row.extend(vec![1.0; n_k]);
                h.push_row(&row).unwrap();
            }
            h
        });
        let times = TimeGrid::new(0.1, 10).unwrap();
        ClosureState::from_fields(grid, times, ClosureSettings::new(kind, 0.01), q, h, None).unwrap()
    }

    /// Q(k; t_m, t_n) = A_k e^{-a_k (t_m - t_n)} e^{-b_k t_n} for m ≥ n.
    fn exponential_rows(n_rows: usize, a: f64) -> Vec<Vec<f64>> {
        (0..n_rows)
            .map(|m| {
                (0..=m)
                    .flat_map(|n| {
                        (0..8).map(move |k| {
                            let amp = 1.0 + k as f64;
                            amp * (-a * 0.1 * (m - n) as f64).exp() * (-0.3 * 0.1 * n as f64).exp()
                        })
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn safeguard_examples() {
        assert_eq!(safeguard_divide(1.0, 2.0, 1.0, 1e-8), Guarded { value: 0.5, regularized: false });
        let r = safeguard_divide(1.0, 0.0, 1.0, 1e-8);
        assert!(r.regularized);
        assert!((r.value - 1e8).abs() < 1e-6);
        assert_eq!(safeguard_divide(0.0, 0.0, 1.0, 1e-8), Guarded { value: 0.0, regularized: true });
        let r = safeguard_divide(1.0, -1e-12, 1.0, 1e-8);
        assert!(r.regularized && r.value < 0.0);
    }

    #[test]
    fn let_propagator_recovers_exponential_decay() {
        let state = state_with_q(ClosureKind::Let, &exponential_rows(5, 2.0));
        for m in 0..5 {
            for n in 0..=m {
                let h = state.let_propagator(3, m, n).unwrap();
                let expected = (-2.0 * 0.1 * (m - n) as f64).exp();
                assert!((h - expected).abs() <= 1e-14 * expected);
            }
            assert_eq!(state.let_propagator(3, m, m).unwrap(), 1.0);
        }
        assert!(state.let_propagator(0, 1, 2).is_err());
    }

    #[test]
    fn vlet_propagator_grows_as_inverse_decay() {
        // Q(k;t,t') = Q(k;t,t) e^{-a(t-t')}: the VLET ratio is e^{+a(t-t')}.
        let a = 1.5;
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|m| {
                (0..=m)
                    .flat_map(|n| (0..8).map(move |k| (1.0 + k as f64) * (-a * 0.1 * (m - n) as f64).exp()))
                    .collect()
            })
            .collect();
        let state = state_with_q(ClosureKind::Vlet, &rows);
        let h = state.vlet_propagator(2, 4, 1).unwrap();
        assert!((h - (a * 0.3).exp()).abs() < 1e-13);
        assert_eq!(state.vlet_propagator(2, 3, 3).unwrap(), 1.0);
    }

    #[test]
    fn floored_division_is_logged() {
        let mut rows = exponential_rows(3, 1.0);
        // zero equal-time value at k = 0, t_1
        rows[1][8] = 0.0;
        let state = state_with_q(ClosureKind::Let, &rows);
        let before = state.events().count();
        let h = state.let_propagator(0, 2, 1).unwrap();
        assert!(h.is_finite());
        assert_eq!(state.events().count(), before + 1);
        assert_eq!(state.events().samples()[0].site, DivisionSite::LetPropagator);
    }

    #[test]
    fn propagator_table_matches_pointwise() {
        for kind in [ClosureKind::Let, ClosureKind::Vlet] {
            let state = state_with_q(kind, &exponential_rows(4, 0.7));
            let (table, _) = state.propagator_table(4);
            for m in 0..4 {
                for n in 0..=m {
                    for k in 0..8 {
                        assert_eq!(table.get(k, m, n), state.propagator(k, m, n).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn closure_kind_parses() {
        assert_eq!("RGET".parse::<ClosureKind>().unwrap(), ClosureKind::Rget);
        assert!("lhdi".parse::<ClosureKind>().is_err());
    }

    proptest! {
        #[test]
        fn let_and_vlet_invert_their_ratios(values in proptest::collection::vec(0.1f64..10.0, 8 * 6)) {
            // three rows of positive data: 8 + 16 + 24 = 48 values
            let rows = vec![values[..8].to_vec(), values[8..24].to_vec(), values[24..48].to_vec()];
            let let_state = state_with_q(ClosureKind::Let, &rows);
            let vlet_state = state_with_q(ClosureKind::Vlet, &rows);
            let q = let_state.q();
            for k in 0..8 {
                for m in 0..3 {
                    for n in 0..=m {
                        let h = let_state.let_propagator(k, m, n).unwrap();
                        let back = h * q.get(k, n, n);
                        prop_assert!((back - q.get(k, m, n)).abs() <= 1e-15 * q.get(k, m, n).abs() * 2.0);
                        let hv = vlet_state.vlet_propagator(k, m, n).unwrap();
                        let back = hv * q.get(k, m, n);
                        prop_assert!((back - q.get(k, m, m)).abs() <= 1e-15 * q.get(k, m, m).abs() * 2.0);
                    }
                }
            }
        }
    }
}
