//! Single-entry right-hand sides evaluated straight from the integral forms
//! through [`convolve`] (with [`TRANSFER_SIGN`] applied) and the trapezoid history rule.
//!
//! These are slow (every call redoes the full `(p, μ, s)` sum) but follow the
//! equations term by term. The stepper uses [`super::assembly`] instead, and
//! the two are cross-checked in tests.

use crate::closures::{
    positive_scale, safeguard_divide, ClosureKind, ClosureState, DivisionEvent, DivisionSite,
};
use crate::error::{Error, Result};
use crate::history::{try_time_integral, TwoTimeField};
use crate::kernel::{convolve, interp_at, WavenumberGrid, TRANSFER_SIGN};

/// [`convolve`] with the closure orientation of the kernel.
fn transfer_integral<F>(grid: &WavenumberGrid, k_index: usize, integrand: F) -> Result<f64>
where
    F: FnMut(f64, f64, f64) -> Result<f64>,
{
    Ok(TRANSFER_SIGN * convolve(grid, k_index, integrand)?)
}

fn ensure_rows(state: &ClosureState, m: usize, n: usize) -> Result<()> {
    let rows = state.q().rows();
    if m.max(n) >= rows {
        return Err(Error::Contract(format!(
            "time index {} beyond the {rows} committed rows",
            m.max(n)
        )));
    }
    Ok(())
}

fn finite(value: f64, k_index: usize, m: usize, n: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Blowup { k_index, m, n })
    }
}

/// Propagator slice `H(·; t_a, t_b)`, `a ≥ b`.
fn propagator_slice(state: &ClosureState, a: usize, b: usize) -> Result<Vec<f64>> {
    (0..state.grid().n_k())
        .map(|k| state.propagator(k, a, b))
        .collect()
}

/// Inertial transfer `P(k; t_m, t_n)` shared by DIA, LET and VLET:
///
/// ```text
/// P = ∫d³p L [ ∫₀^{t_n} ds H(k;t_n,s) Q(p;t_m,s) Q(q;t_m,s)
///            − ∫₀^{t_m} ds H(p;t_m,s) Q(k;t_n,s) Q(q;t_m,s) ]
/// ```
///
/// Any ordering of `m` and `n` is accepted as long as both rows exist.
pub fn transfer_two_time(state: &ClosureState, k_index: usize, m: usize, n: usize) -> Result<f64> {
    if !state.kind().uses_shared_transfer() {
        return Err(Error::Contract("transfer_two_time applies to DIA, LET and VLET".into()));
    }
    ensure_rows(state, m, n)?;
    if !state.settings().nonlinear {
        return Ok(0.0);
    }
    let grid = state.grid();
    let q = state.q();
    let dt = state.times().dt();
    let h_k: Vec<f64> = (0..=n)
        .map(|s| state.propagator(k_index, n, s))
        .collect::<Result<_>>()?;
    let h_m: Vec<Vec<f64>> = (0..=m)
        .map(|s| propagator_slice(state, m, s))
        .collect::<Result<_>>()?;

    let value = transfer_integral(grid, k_index, |p, qq, _| {
        let first = try_time_integral(0, n, dt, |s| {
            let col = q.slice(m, s);
            Ok(h_k[s] * interp_at(col, grid, p) * interp_at(col, grid, qq))
        })?;
        let second = try_time_integral(0, m, dt, |s| {
            let col = q.slice(m, s);
            Ok(interp_at(&h_m[s], grid, p) * q.get(k_index, n, s) * interp_at(col, grid, qq))
        })?;
        Ok(first - second)
    })?;
    finite(value, k_index, m, n)
}

/// Memory term of the DIA response equation (viscous part excluded):
///
/// ```text
/// −∫d³p L ∫_{t_n}^{t_m} ds H(k;s,t_n) H(p;t_m,s) Q(q;t_m,s)
/// ```
pub fn dia_response_rhs(state: &ClosureState, k_index: usize, m: usize, n: usize) -> Result<f64> {
    if state.kind() != ClosureKind::Dia {
        return Err(Error::Contract("dia_response_rhs requires the DIA closure".into()));
    }
    if m < n {
        return Err(Error::Contract(format!("response rhs needs m ≥ n (m={m}, n={n})")));
    }
    ensure_rows(state, m, n)?;
    if !state.settings().nonlinear || m == n {
        return Ok(0.0);
    }
    let grid = state.grid();
    let q = state.q();
    let h = state.h().expect("DIA state carries H");
    let dt = state.times().dt();
    let value = transfer_integral(grid, k_index, |p, qq, _| {
        try_time_integral(n, m, dt, |s| {
            Ok(h.get(k_index, s, n) * interp_at(h.slice(m, s), grid, p) * interp_at(q.slice(m, s), grid, qq))
        })
    })?;
    finite(-value, k_index, m, n)
}

/// `1 / Q(p; t_a, t_b)` floored relative to `√|Q(p;t_a,t_a) Q(p;t_b,t_b)|`.
fn correlation_reciprocal(state: &ClosureState, p_index: usize, k_index: usize, a: usize, b: usize) -> f64 {
    let q = state.q();
    let scale = positive_scale((q.get(p_index, a, a) * q.get(p_index, b, b)).abs().sqrt());
    let r = safeguard_divide(1.0, q.get(p_index, a, b), scale, state.settings().eps_floor);
    if r.regularized {
        state.events().record(DivisionEvent {
            site: DivisionSite::RgetCorrelation,
            k_index: Some(k_index),
            p_index: Some(p_index),
            times: (a, b),
        });
    }
    r.value
}

fn node_index(state: &ClosureState, p: f64) -> usize {
    let nodes = state.grid().k_nodes();
    nodes
        .binary_search_by(|x| x.total_cmp(&p))
        .expect("convolution radial points are grid nodes")
}

/// RGET two-time correlation right-hand side (viscous part excluded):
///
/// ```text
/// − ∫d³p L Q(p;t,t') ∫₀^t  ds Q(k;t',s) Q(q;t,s) / Q(p;s,t')
/// + ∫d³p L Q(k;t,t') ∫₀^t' ds Q(p;t,s)  Q(q;t,s) / Q(k;t,s)
/// ```
pub fn rget_rhs_two_time(state: &ClosureState, k_index: usize, m: usize, n: usize) -> Result<f64> {
    if state.kind() != ClosureKind::Rget {
        return Err(Error::Contract("rget_rhs_two_time requires the RGET closure".into()));
    }
    if m < n {
        return Err(Error::Contract(format!("rget rhs needs m ≥ n (m={m}, n={n})")));
    }
    ensure_rows(state, m, n)?;
    if !state.settings().nonlinear {
        return Ok(0.0);
    }
    let grid = state.grid();
    let q = state.q();
    let dt = state.times().dt();

    let swept_out = transfer_integral(grid, k_index, |p, qq, _| {
        let i = node_index(state, p);
        let history = try_time_integral(0, m, dt, |s| {
            let ratio = correlation_reciprocal(state, i, k_index, s, n);
            Ok(q.get(k_index, n, s) * interp_at(q.slice(m, s), grid, qq) * ratio)
        })?;
        Ok(q.get(i, m, n) * history)
    })?;
    let swept_in = transfer_integral(grid, k_index, |p, qq, _| {
        try_time_integral(0, n, dt, |s| {
            let col = q.slice(m, s);
            let ratio = correlation_reciprocal(state, k_index, k_index, m, s);
            Ok(interp_at(col, grid, p) * interp_at(col, grid, qq) * ratio)
        })
    })?;
    finite(-swept_out + q.get(k_index, m, n) * swept_in, k_index, m, n)
}

/// RGET equal-time right-hand side (viscous part excluded):
///
/// ```text
/// − 2∫d³p L Q(p;t,t) ∫₀^t ds Q(k;t,s) Q(q;t,s) / Q(p;t,s)
/// + 2∫d³p L Q(k;t,t) ∫₀^t ds Q(p;t,s) Q(q;t,s) / Q(k;t,s)
/// ```
pub fn rget_rhs_equal_time(state: &ClosureState, k_index: usize, m: usize) -> Result<f64> {
    if state.kind() != ClosureKind::Rget {
        return Err(Error::Contract("rget_rhs_equal_time requires the RGET closure".into()));
    }
    ensure_rows(state, m, m)?;
    if !state.settings().nonlinear {
        return Ok(0.0);
    }
    let grid = state.grid();
    let q = state.q();
    let dt = state.times().dt();
    let out = transfer_integral(grid, k_index, |p, qq, _| {
        let i = node_index(state, p);
        let history = try_time_integral(0, m, dt, |s| {
            let ratio = correlation_reciprocal(state, i, k_index, m, s);
            Ok(q.get(k_index, m, s) * interp_at(q.slice(m, s), grid, qq) * ratio)
        })?;
        Ok(q.get(i, m, m) * history)
    })?;
    let inward = transfer_integral(grid, k_index, |p, qq, _| {
        try_time_integral(0, m, dt, |s| {
            let col = q.slice(m, s);
            let ratio = correlation_reciprocal(state, k_index, k_index, m, s);
            Ok(interp_at(col, grid, p) * interp_at(col, grid, qq) * ratio)
        })
    })?;
    finite(-2.0 * out + 2.0 * q.get(k_index, m, m) * inward, k_index, m, m)
}

/// Memory term of the RGET response equation (viscous part excluded):
///
/// ```text
/// −∫d³p L G(p;t,t') ∫_{t'}^{t} ds [G(k;s,t') / G(p;s,t')] Q(q;t,s)
/// ```
pub fn rget_response_rhs(state: &ClosureState, k_index: usize, m: usize, n: usize) -> Result<f64> {
    if state.kind() != ClosureKind::Rget {
        return Err(Error::Contract("rget_response_rhs requires the RGET closure".into()));
    }
    let g: &TwoTimeField = state
        .g()
        .ok_or_else(|| Error::Contract("RGET response tracking is disabled".into()))?;
    if m < n {
        return Err(Error::Contract(format!("response rhs needs m ≥ n (m={m}, n={n})")));
    }
    ensure_rows(state, m, n)?;
    if !state.settings().nonlinear || m == n {
        return Ok(0.0);
    }
    let grid = state.grid();
    let q = state.q();
    let dt = state.times().dt();
    let eps = state.settings().eps_floor;
    let value = transfer_integral(grid, k_index, |p, qq, _| {
        let i = node_index(state, p);
        let history = try_time_integral(n, m, dt, |s| {
            let r = safeguard_divide(g.get(k_index, s, n), g.get(i, s, n), 1.0, eps);
            if r.regularized {
                state.events().record(DivisionEvent {
                    site: DivisionSite::RgetResponse,
                    k_index: Some(k_index),
                    p_index: Some(i),
                    times: (s, n),
                });
            }
            Ok(r.value * interp_at(q.slice(m, s), grid, qq))
        })?;
        Ok(g.get(i, m, n) * history)
    })?;
    finite(-value, k_index, m, n)
}
