//! Heun predictor-corrector with the viscous terms integrated exactly.
//!
//! For `y' = −λy + f(y)` one step reads
//!
//! ```text
//! y* = e (y₀ + dt f₀)
//! y₁ = e y₀ + dt/2 (e f₀ + f(y*)),   e = exp(−λ dt)
//! ```
//!
//! with `λ = νk²` for two-time entries and responses and `λ = 2νk²` for the
//! equal-time diagonal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assembly::{assemble_row, RowRhs};
use super::reference::transfer_two_time;
use super::{ClosureKind, ClosureState};
use crate::diagnostics::conservation_residual;
use crate::error::{Error, Result};

/// How the new equal-time value `Q(k; t_{M+1}, t_{M+1})` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalRoute {
    /// Integrate the equal-time equation directly.
    #[default]
    EqualTime,
    /// Continue the two-time equation along its second argument from
    /// `Q(k; t_{M+1}, t_M)` up to the diagonal (DIA, LET and VLET only).
    TwoTimeSweep,
}

/// What happened during one accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport {
    /// Index of the newly committed row.
    pub row: usize,
    pub time: f64,
    /// Conservation residual of the equal-time transfer at the start of the step.
    pub transfer_residual: f64,
    /// Floored divisions during this step.
    pub regularized: u64,
    /// Wavenumbers whose new equal-time value is negative.
    pub negative_spectrum: usize,
}

/// New rows for every evolved field.
struct Stage {
    q: Vec<f64>,
    h: Option<Vec<f64>>,
    g: Option<Vec<f64>>,
}

// parallel per-wavenumber arrays read more plainly by index
#[allow(clippy::needless_range_loop)]
impl ClosureState {
    fn decay_factors(&self, factor: f64) -> Vec<f64> {
        let nu = self.settings.nu;
        let dt = self.times.dt();
        self.grid
            .k_nodes()
            .iter()
            .map(|k| (-factor * nu * k * k * dt).exp())
            .collect()
    }

    /// Builds row `M + 1` from row `M` and the right-hand sides. With
    /// `corrector = None` this is the explicit predictor.
    fn stage(&self, rhs0: &RowRhs, corrector: Option<&RowRhs>, e1: &[f64], e2: &[f64]) -> Stage {
        let m = rhs0.m;
        let n_k = self.grid.n_k();
        let dt = self.times.dt();
        let step = |y0: f64, f0: f64, f1: Option<f64>, e: f64| match f1 {
            None => e * (y0 + dt * f0),
            Some(f1) => e * y0 + 0.5 * dt * (e * f0 + f1),
        };

        let mut q = Vec::with_capacity((m + 2) * n_k);
        for n in 0..=m {
            for k in 0..n_k {
                let f1 = corrector.map(|r| r.correlation_at(k, n));
                q.push(step(self.q.get(k, m, n), rhs0.correlation_at(k, n), f1, e1[k]));
            }
        }
        for k in 0..n_k {
            let f1 = corrector.map(|r| r.equal_time[k]);
            q.push(step(self.q.get(k, m, m), rhs0.equal_time[k], f1, e2[k]));
        }

        let response = |field: &super::TwoTimeField| {
            let mut row = Vec::with_capacity((m + 2) * n_k);
            for n in 0..=m {
                for k in 0..n_k {
                    let f0 = rhs0.response_at(k, n).unwrap_or(0.0);
                    let f1 = corrector.map(|r| r.response_at(k, n).unwrap_or(0.0));
                    row.push(step(field.get(k, m, n), f0, f1, e1[k]));
                }
            }
            row.extend(std::iter::repeat_n(1.0, n_k));
            row
        };
        Stage {
            h: self.h.as_ref().map(response),
            g: self.g.as_ref().map(response),
            q,
        }
    }

    fn push_stage(&mut self, stage: &Stage) -> Result<()> {
        let n_k = self.grid.n_k();
        let m = self.q.rows();
        for values in std::iter::once(&stage.q).chain(stage.h.iter()).chain(stage.g.iter()) {
            if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Blowup {
                    k_index: pos % n_k,
                    m,
                    n: pos / n_k,
                });
            }
        }
        self.q.push_row(&stage.q)?;
        if let (Some(h), Some(row)) = (self.h.as_mut(), stage.h.as_ref()) {
            h.push_row(row)?;
        }
        if let (Some(g), Some(row)) = (self.g.as_mut(), stage.g.as_ref()) {
            g.push_row(row)?;
        }
        Ok(())
    }

    fn pop_stage(&mut self) {
        self.q.pop_row();
        if let Some(h) = self.h.as_mut() {
            h.pop_row();
        }
        if let Some(g) = self.g.as_mut() {
            g.pop_row();
        }
    }

    /// Evaluates `f(state)` with `stage` temporarily committed as row `M + 1`.
    fn with_stage<T>(&mut self, stage: &Stage, f: impl FnOnce(&Self) -> Result<T>) -> Result<T> {
        self.push_stage(stage)?;
        let out = f(self);
        self.pop_stage();
        out
    }

    /// `P(k; t_a, t_b)` for every wavenumber, any ordering of `a`, `b`.
    fn transfer_column(&self, a: usize, b: usize) -> Result<Vec<f64>> {
        (0..self.grid.n_k())
            .into_par_iter()
            .map(|k| transfer_two_time(self, k, a, b))
            .collect()
    }

    /// Replaces the diagonal of the corrected row by the value reached by
    /// sweeping the two-time equation from `t' = t_M` to `t' = t_{M+1}`.
    fn sweep_diagonal(&mut self, stage: &mut Stage, e1: &[f64]) -> Result<()> {
        let n_k = self.grid.n_k();
        let m = self.current_row();
        let dt = self.times.dt();
        let diag = (m + 1) * n_k;
        let off: Vec<f64> = stage.q[m * n_k..diag].to_vec();
        // provisional diagonal by linear extrapolation along t'
        for k in 0..n_k {
            stage.q[diag + k] = 2.0 * off[k] - self.q.get(k, m, m);
        }
        let f0 = self.with_stage(stage, |s| s.transfer_column(m, m + 1))?;
        for k in 0..n_k {
            stage.q[diag + k] = e1[k] * (off[k] + dt * f0[k]);
        }
        let f1 = self.with_stage(stage, |s| s.transfer_column(m + 1, m + 1))?;
        for k in 0..n_k {
            stage.q[diag + k] = e1[k] * off[k] + 0.5 * dt * (e1[k] * f0[k] + f1[k]);
        }
        Ok(())
    }

    /// Advances every evolved field by one time step.
    ///
    /// On a numerical blowup nothing is committed and the state still holds
    /// the last good row.
    pub fn advance(&mut self) -> Result<StepReport> {
        let m = self.current_row();
        if self.settings.diagonal == DiagonalRoute::TwoTimeSweep && self.kind() == ClosureKind::Rget {
            return Err(Error::Contract("the two-time diagonal sweep is defined for DIA, LET and VLET".into()));
        }
        let before = self.events.count();
        let e1 = self.decay_factors(1.0);
        let e2 = self.decay_factors(2.0);

        let rhs0 = assemble_row(self, m)?;
        let transfer_residual = conservation_residual(&self.grid, &rhs0.equal_time_transfer());
        let predictor = self.stage(&rhs0, None, &e1, &e2);
        let rhs1 = self.with_stage(&predictor, |s| assemble_row(s, m + 1))?;
        let mut corrected = self.stage(&rhs0, Some(&rhs1), &e1, &e2);
        if self.settings.diagonal == DiagonalRoute::TwoTimeSweep {
            self.sweep_diagonal(&mut corrected, &e1)?;
        }
        self.push_stage(&corrected)?;

        let negative_spectrum = self.q.diagonal(m + 1).iter().filter(|&&v| v < 0.0).count();
        Ok(StepReport {
            row: m + 1,
            time: self.times.t(m + 1),
            transfer_residual,
            regularized: self.events.count() - before,
            negative_spectrum,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closures::{ClosureSettings, InitialSpectrum};
    use crate::history::TimeGrid;
    use crate::kernel::WavenumberGrid;

    fn state(kind: ClosureKind, nonlinear: bool, dt: f64, n_k: usize, n_mu: usize) -> ClosureState {
        let grid = WavenumberGrid::build(0.2, 6.0, n_k, n_mu).unwrap();
        let initial = InitialSpectrum::default().sample(&grid);
        let mut settings = ClosureSettings::new(kind, 0.1);
        settings.nonlinear = nonlinear;
        settings.track_response = true;
        ClosureState::new(grid, TimeGrid::new(dt, 400).unwrap(), settings, &initial).unwrap()
    }

    #[test]
    fn linear_limit_is_exact_viscous_decay() {
        for kind in ClosureKind::ALL {
            let mut s = state(kind, false, 0.01, 8, 4);
            for _ in 0..100 {
                s.advance().unwrap();
            }
            let q0 = InitialSpectrum::default().sample(s.grid());
            let t = s.time();
            for (k_index, &k) in s.grid().k_nodes().iter().enumerate() {
                let nu_k2 = 0.1 * k * k;
                let exact = q0[k_index] * (-2.0 * nu_k2 * t).exp();
                let got = s.q().get(k_index, 100, 100);
                assert!((got - exact).abs() <= 1e-8 * exact, "{kind} k={k}: {got} vs {exact}");
                let tau = t - s.times().t(40);
                let two_time = s.q().get(k_index, 100, 40);
                let expected = q0[k_index] * (-2.0 * nu_k2 * s.times().t(40)).exp() * (-nu_k2 * tau).exp();
                assert!((two_time - expected).abs() <= 1e-8 * expected);
                for response in s.h().iter().chain(s.g().iter()) {
                    let v = response.get(k_index, 100, 40);
                    assert!((v - (-nu_k2 * tau).exp()).abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn blowup_leaves_last_good_row() {
        let mut s = state(ClosureKind::Let, true, 0.01, 8, 4);
        s.advance().unwrap();
        let before = s.q().clone();
        s.settings.nu = f64::NAN;
        assert!(s.advance().is_err());
        assert_eq!(s.q(), &before);
    }

    #[test]
    fn step_report_counts_rows() {
        let mut s = state(ClosureKind::Dia, true, 0.02, 8, 4);
        let r = s.advance().unwrap();
        assert_eq!(r.row, 1);
        assert!((r.time - 0.02).abs() < 1e-15);
        assert_eq!(s.h().unwrap().rows(), 2);
    }

    #[test]
    fn rget_rejects_two_time_sweep() {
        let mut s = state(ClosureKind::Rget, true, 0.02, 8, 4);
        s.settings.diagonal = DiagonalRoute::TwoTimeSweep;
        assert!(matches!(s.advance(), Err(Error::Contract(_))));
    }

    #[test]
    fn two_time_sweep_tracks_equal_time() {
        let mut direct = state(ClosureKind::Let, true, 0.01, 12, 6);
        let mut sweep = state(ClosureKind::Let, true, 0.01, 12, 6);
        sweep.settings.diagonal = DiagonalRoute::TwoTimeSweep;
        for _ in 0..20 {
            direct.advance().unwrap();
            sweep.advance().unwrap();
        }
        for (a, b) in direct.q().diagonal(20).iter().zip(sweep.q().diagonal(20)) {
            assert!((a - b).abs() <= 1e-4 * a.abs());
        }
    }

    #[test]
    fn heun_converges_at_second_order() {
        let diagonal_at = |dt: f64| {
            let steps = (0.2 / dt).round() as usize;
            let mut s = state(ClosureKind::Dia, true, dt, 10, 6);
            for _ in 0..steps {
                s.advance().unwrap();
            }
            s.q().diagonal(steps).to_vec()
        };
        let (coarse, mid, fine) = (diagonal_at(0.04), diagonal_at(0.02), diagonal_at(0.01));
        let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        let order = (gap(&coarse, &mid) / gap(&mid, &fine)).log2();
        assert!(order >= 1.8, "observed order {order}");
    }
}
