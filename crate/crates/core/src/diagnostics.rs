//! Observables computed from committed closure rows.
//!
//! Energy spectrum convention: `E(k) = 4πk² Q(k; t, t)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::closures::assembly::assemble_row;
use crate::closures::{positive_scale, safeguard_divide, ClosureState};
use crate::error::{ConfigError, Error, Result};
use crate::kernel::WavenumberGrid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSnapshot {
    pub t: f64,
    pub k: Vec<f64>,
    pub energy: Vec<f64>,
    pub q_diag: Vec<f64>,
    pub total_energy: f64,
    pub dissipation_rate: f64,
    pub transfer_residual: f64,
    pub negative: Vec<bool>,
}

impl SpectrumSnapshot {
    pub fn negative_count(&self) -> usize {
        self.negative.iter().filter(|&&b| b).count()
    }
}

pub fn energy_spectrum(grid: &WavenumberGrid, q_diag: &[f64]) -> Vec<f64> {
    grid.k_nodes()
        .iter()
        .zip(q_diag)
        .map(|(k, q)| 4.0 * PI * k * k * q)
        .collect()
}

pub fn total_energy(grid: &WavenumberGrid, energy: &[f64]) -> f64 {
    grid.k_weights().iter().zip(energy).map(|(w, e)| w * e).sum()
}

pub fn dissipation_rate(grid: &WavenumberGrid, nu: f64, energy: &[f64]) -> f64 {
    2.0 * nu
        * grid
            .k_nodes()
            .iter()
            .zip(grid.k_weights())
            .zip(energy)
            .map(|((k, w), e)| k * k * e * w)
            .sum::<f64>()
}

/// `|Σ 4πk² P w| / Σ 4πk² |P| w`, or 0 when the transfer vanishes.
pub fn conservation_residual(grid: &WavenumberGrid, transfer: &[f64]) -> f64 {
    let mut net = 0.0;
    let mut gross = 0.0;
    for ((k, w), p) in grid.k_nodes().iter().zip(grid.k_weights()).zip(transfer) {
        let shell = 4.0 * PI * k * k * w;
        net += shell * p;
        gross += shell * p.abs();
    }
    if gross == 0.0 {
        0.0
    } else {
        net.abs() / gross
    }
}

/// Equal-time transfer `P(k; t_m, t_m)` of the active closure.
pub fn equal_time_transfer(state: &ClosureState, m: usize) -> Result<Vec<f64>> {
    Ok(assemble_row(state, m)?.equal_time_transfer())
}

pub fn transfer_conservation(state: &ClosureState, m: usize) -> Result<f64> {
    Ok(conservation_residual(state.grid(), &equal_time_transfer(state, m)?))
}

pub fn spectrum(state: &ClosureState, m: usize) -> Result<SpectrumSnapshot> {
    if m >= state.q().rows() {
        return Err(Error::Contract(format!("row {m} has not been computed")));
    }
    let grid = state.grid();
    let q_diag = state.q().diagonal(m).to_vec();
    let energy = energy_spectrum(grid, &q_diag);
    Ok(SpectrumSnapshot {
        t: state.times().t(m),
        k: grid.k_nodes().to_vec(),
        total_energy: total_energy(grid, &energy),
        dissipation_rate: dissipation_rate(grid, state.settings().nu, &energy),
        transfer_residual: transfer_conservation(state, m)?,
        negative: q_diag.iter().map(|&q| q < 0.0).collect(),
        energy,
        q_diag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepingParams {
    /// Variance of one component of the random convection velocity.
    pub v0_sq: f64,
}

impl SweepingParams {
    pub fn new(v0_sq: f64) -> Result<Self> {
        if !(v0_sq.is_finite() && v0_sq >= 0.0) {
            return Err(ConfigError::new("v0_sq", "must be finite and >= 0").into());
        }
        Ok(Self { v0_sq })
    }
}

/// Gaussian decorrelation `exp(−k² v0² τ² / 2)` from random sweeping.
pub fn sweeping_factor(params: SweepingParams, k: f64, tau: f64) -> f64 {
    (-0.5 * k * k * params.v0_sq * tau * tau).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecorrelationPoint {
    pub t_prime: f64,
    pub ratio: f64,
    /// `exp(−νk²(t_M − t'))`, the purely viscous value.
    pub viscous_reference: f64,
}

/// `Q(k; t_M, t_n) / Q(k; t_n, t_n)` for `n = 0..=M` at the latest row `M`.
///
/// Denominators use the same floor as the LET propagator.
pub fn decorrelation_curve(state: &ClosureState, k_index: usize) -> Result<Vec<DecorrelationPoint>> {
    let grid = state.grid();
    if k_index >= grid.n_k() {
        return Err(Error::Contract(format!("k_index {k_index} outside the grid")));
    }
    let q = state.q();
    let m = state.current_row();
    let k = grid.k(k_index);
    let nu = state.settings().nu;
    let eps = state.settings().eps_floor;
    Ok((0..=m)
        .map(|n| {
            let ratio = if n == m {
                1.0
            } else {
                let scale = positive_scale(q.diagonal(n).iter().fold(0.0_f64, |a, v| a.max(v.abs())));
                safeguard_divide(q.get(k_index, m, n), q.get(k_index, n, n), scale, eps).value
            };
            let tau = state.times().t(m) - state.times().t(n);
            DecorrelationPoint {
                t_prime: state.times().t(n),
                ratio,
                viscous_reference: (-nu * k * k * tau).exp(),
            }
        })
        .collect())
}
