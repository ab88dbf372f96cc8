//! Whole-row evaluation of the closure right-hand sides.
//!
//! Every memory integral at row `m` is built from one angular table
//!
//! ```text
//! C(k, p_i; t_m, s) = Σⱼ μw_j L(k, p_i, μ_j) Q(q_ij; t_m, s)
//! ```
//!
//! which is computed once per `(k, i, s)` and then contracted with the
//! radial shell factors, propagators and history weights. Rows `≤ m` are
//! read-only during assembly and each wavenumber owns its outputs, so the
//! `k` loop runs in parallel.

use rayon::prelude::*;

use crate::closures::{
    positive_scale, safeguard_divide, ClosureKind, ClosureState, DivisionEvent, DivisionSite, DivisionTally,
};
use crate::error::{Error, Result};
use crate::history::{trapezoid_weight, FieldKind, TwoTimeField};

/// Right-hand sides for every entry of time row `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRhs {
    pub m: usize,
    pub n_k: usize,
    /// Nonlinear part of the two-time correlation equation, `[n * n_k + k]`
    /// for `n ≤ m`: `P(k; t_m, t_n)` for DIA/LET/VLET, the RGET form otherwise.
    pub correlation: Vec<f64>,
    /// Nonlinear part of the equal-time equation, `[k]`: `2P(k; t_m, t_m)`
    /// or the RGET equal-time form.
    pub equal_time: Vec<f64>,
    /// Memory term of the evolved response (DIA `H` or RGET `G`), `[n * n_k + k]`.
    pub response: Option<Vec<f64>>,
    /// Floored divisions encountered while assembling.
    pub regularized: u64,
}

impl RowRhs {
    fn zeros(m: usize, n_k: usize, with_response: bool) -> Self {
        Self {
            m,
            n_k,
            correlation: vec![0.0; (m + 1) * n_k],
            equal_time: vec![0.0; n_k],
            response: with_response.then(|| vec![0.0; (m + 1) * n_k]),
            regularized: 0,
        }
    }

    pub fn correlation_at(&self, k_index: usize, n: usize) -> f64 {
        self.correlation[n * self.n_k + k_index]
    }

    pub fn response_at(&self, k_index: usize, n: usize) -> Option<f64> {
        self.response.as_ref().map(|r| r[n * self.n_k + k_index])
    }

    /// Equal-time transfer `P(k; t_m, t_m)` (half the equal-time RHS).
    pub fn equal_time_transfer(&self) -> Vec<f64> {
        self.equal_time.iter().map(|v| 0.5 * v).collect()
    }
}

struct KOutput {
    correlation: Vec<f64>,
    equal_time: f64,
    response: Option<Vec<f64>>,
}

#[inline]
fn dot3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).sum()
}

/// Triangle of floored reciprocals `1 / V(p; t_a, t_b)` for rows `0..=m`.
fn reciprocal_triangle(
    field: &TwoTimeField,
    m: usize,
    eps: f64,
    site: DivisionSite,
    scale: impl Fn(usize, usize, usize) -> f64,
) -> (TwoTimeField, DivisionTally) {
    let n_k = field.n_k();
    let mut out = TwoTimeField::new(FieldKind::Correlation, n_k);
    let mut floored = DivisionTally::default();
    let mut row = Vec::with_capacity((m + 1) * n_k);
    for a in 0..=m {
        row.clear();
        for b in 0..=a {
            for (p, &v) in field.slice(a, b).iter().enumerate() {
                let r = safeguard_divide(1.0, v, scale(p, a, b), eps);
                if r.regularized {
                    floored.note(DivisionEvent {
                        site,
                        k_index: None,
                        p_index: Some(p),
                        times: (a, b),
                    });
                }
                row.push(r.value);
            }
        }
        out.push_row(&row).expect("reciprocals of finite values are finite");
    }
    (out, floored)
}

/// Assembles all right-hand sides of row `m` (rows `0..=m` must exist).
pub fn assemble_row(state: &ClosureState, m: usize) -> Result<RowRhs> {
    let q = state.q();
    if m >= q.rows() {
        return Err(Error::Contract(format!("row {m} not present ({} rows)", q.rows())));
    }
    let grid = state.grid();
    let n_k = grid.n_k();
    let kind = state.kind();
    let with_response = match kind {
        ClosureKind::Dia => true,
        ClosureKind::Rget => state.g().is_some(),
        _ => false,
    };
    if !state.settings().nonlinear {
        return Ok(RowRhs::zeros(m, n_k, with_response));
    }

    let dt = state.times().dt();
    let eps = state.settings().eps_floor;
    let triads = state.triads();
    let shell: Vec<f64> = (0..n_k).map(|i| grid.shell_factor(i)).collect();
    // node-major copies of row m: [i * cols + s]
    let cols = m + 1;
    let mut row_t = vec![0.0; n_k * cols];
    for s in 0..=m {
        for (i, &v) in q.slice(m, s).iter().enumerate() {
            row_t[i * cols + s] = v;
        }
    }
    let logs_t: Vec<f64> = row_t.iter().map(|&v| if v > 0.0 { v.ln() } else { 0.0 }).collect();
    // L and q are symmetric in k <-> p, so only p >= k is evaluated;
    // upper[k][(i - k) * cols + s]
    let upper: Vec<Vec<f64>> = (0..n_k)
        .into_par_iter()
        .map(|k| {
            let mut c = vec![0.0; (n_k - k) * cols];
            for (i, out) in (k..n_k).zip(c.chunks_mut(cols)) {
                triads.angular_history(k, i, &row_t, &logs_t, out);
            }
            c
        })
        .collect();
    let angular = |k: usize| -> Vec<f64> {
        let mut c = Vec::with_capacity((m + 1) * n_k);
        for s in 0..=m {
            c.extend((0..n_k).map(|i| {
                let (lo, hi) = if i >= k { (k, i) } else { (i, k) };
                upper[lo][(hi - lo) * cols + s]
            }));
        }
        c
    };
    // A(k; t_m, s) = Σ_i shell_i Q(p_i; t_m, s) C(k, p_i; t_m, s)
    let energy_flux = |c: &[f64]| -> Vec<f64> {
        (0..=m)
            .map(|s| dot3(&shell, q.slice(m, s), &c[s * n_k..(s + 1) * n_k]))
            .collect()
    };

    let mut regularized = 0;
    let outputs: Vec<KOutput> = match kind {
        ClosureKind::Dia | ClosureKind::Let | ClosureKind::Vlet => {
            let (h, floored) = state.propagator_table(m + 1);
            state.record_bulk(&floored);
            regularized += floored.count;
            let h = &*h;
            (0..n_k)
                .into_par_iter()
                .map(|k| {
                    let c = angular(k);
                    let a = energy_flux(&c);
                    let b: Vec<f64> = (0..=m)
                        .map(|s| dot3(&shell, h.slice(m, s), &c[s * n_k..(s + 1) * n_k]))
                        .collect();
                    let correlation: Vec<f64> = (0..=m)
                        .map(|n| {
                            let gain: f64 = (0..=n)
                                .map(|s| trapezoid_weight(s, 0, n, dt) * h.get(k, n, s) * a[s])
                                .sum();
                            let loss: f64 = (0..=m)
                                .map(|s| trapezoid_weight(s, 0, m, dt) * q.get(k, n, s) * b[s])
                                .sum();
                            gain - loss
                        })
                        .collect();
                    let response = (kind == ClosureKind::Dia).then(|| {
                        (0..=m)
                            .map(|n| {
                                -(n..=m)
                                    .map(|s| trapezoid_weight(s, n, m, dt) * h.get(k, s, n) * b[s])
                                    .sum::<f64>()
                            })
                            .collect()
                    });
                    KOutput {
                        equal_time: 2.0 * correlation[m],
                        correlation,
                        response,
                    }
                })
                .collect()
        }
        ClosureKind::Rget => {
            let (recip_q, floored) = reciprocal_triangle(q, m, eps, DivisionSite::RgetCorrelation, |p, a, b| {
                positive_scale((q.get(p, a, a) * q.get(p, b, b)).abs().sqrt())
            });
            state.record_bulk(&floored);
            regularized += floored.count;
            let recip_g = state.g().map(|g| {
                let (r, floored) = reciprocal_triangle(g, m, eps, DivisionSite::RgetResponse, |_, _, _| 1.0);
                state.record_bulk(&floored);
                regularized += floored.count;
                r
            });
            let g = state.g();
            // u_n[i] = shell_i Q(p_i; t_m, t_n)
            let weighted: Vec<Vec<f64>> = (0..=m)
                .map(|n| shell.iter().zip(q.slice(m, n)).map(|(w, v)| w * v).collect())
                .collect();
            let weighted_g: Option<Vec<Vec<f64>>> = g.map(|g| {
                (0..=m)
                    .map(|n| shell.iter().zip(g.slice(m, n)).map(|(w, v)| w * v).collect())
                    .collect()
            });
            (0..n_k)
                .into_par_iter()
                .map(|k| {
                    let c = angular(k);
                    let a = energy_flux(&c);
                    let cs = |s: usize| &c[s * n_k..(s + 1) * n_k];
                    let inward = |n: usize| -> f64 {
                        (0..=n)
                            .map(|s| trapezoid_weight(s, 0, n, dt) * a[s] * recip_q.get(k, m, s))
                            .sum()
                    };
                    let correlation: Vec<f64> = (0..=m)
                        .map(|n| {
                            let swept_out: f64 = (0..=m)
                                .map(|s| {
                                    trapezoid_weight(s, 0, m, dt)
                                        * q.get(k, n, s)
                                        * dot3(&weighted[n], recip_q.slice(s, n), cs(s))
                                })
                                .sum();
                            -swept_out + q.get(k, m, n) * inward(n)
                        })
                        .collect();
                    let out_diag: f64 = (0..=m)
                        .map(|s| {
                            trapezoid_weight(s, 0, m, dt)
                                * q.get(k, m, s)
                                * dot3(&weighted[m], recip_q.slice(m, s), cs(s))
                        })
                        .sum();
                    let equal_time = -2.0 * out_diag + 2.0 * q.get(k, m, m) * inward(m);
                    let response = match (g, &recip_g, &weighted_g) {
                        (Some(g), Some(rg), Some(wg)) => Some(
                            (0..=m)
                                .map(|n| {
                                    -(n..=m)
                                        .map(|s| {
                                            trapezoid_weight(s, n, m, dt)
                                                * g.get(k, s, n)
                                                * dot3(&wg[n], rg.slice(s, n), cs(s))
                                        })
                                        .sum::<f64>()
                                })
                                .collect(),
                        ),
                        _ => None,
                    };
                    KOutput {
                        correlation,
                        equal_time,
                        response,
                    }
                })
                .collect()
        }
    };

    let mut rhs = RowRhs::zeros(m, n_k, with_response);
    rhs.regularized = regularized;
    for (k, out) in outputs.into_iter().enumerate() {
        rhs.equal_time[k] = out.equal_time;
        for (n, v) in out.correlation.into_iter().enumerate() {
            rhs.correlation[n * n_k + k] = v;
        }
        if let (Some(dst), Some(src)) = (rhs.response.as_mut(), out.response) {
            for (n, v) in src.into_iter().enumerate() {
                dst[n * n_k + k] = v;
            }
        }
    }
    let check = |values: &[f64]| values.iter().position(|v| !v.is_finite());
    if let Some(pos) = check(&rhs.correlation) {
        return Err(Error::Blowup { k_index: pos % n_k, m, n: pos / n_k });
    }
    if let Some(k) = check(&rhs.equal_time) {
        return Err(Error::Blowup { k_index: k, m, n: m });
    }
    if let Some(pos) = rhs.response.as_deref().and_then(check) {
        return Err(Error::Blowup { k_index: pos % n_k, m, n: pos / n_k });
    }
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::closures::{reference, ClosureSettings, InitialSpectrum};
    use crate::diagnostics::conservation_residual;
    use crate::history::TimeGrid;
    use crate::kernel::WavenumberGrid;

    fn evolved(kind: ClosureKind, steps: usize) -> ClosureState {
        let grid = WavenumberGrid::build(0.1, 6.0, 10, 6).unwrap();
        let initial = InitialSpectrum::default().sample(&grid);
        let mut settings = ClosureSettings::new(kind, 0.1);
        settings.track_response = true;
        let mut s = ClosureState::new(grid, TimeGrid::new(0.02, 20).unwrap(), settings, &initial).unwrap();
        for _ in 0..steps {
            s.advance().unwrap();
        }
        s
    }

    fn close(fast: f64, slow: f64, scale: f64) -> bool {
        (fast - slow).abs() <= 1e-12 * scale
    }

    #[test]
    fn fast_matches_reference() {
        for kind in ClosureKind::ALL {
            let s = evolved(kind, 3);
            for m in 0..=3 {
                let rhs = assemble_row(&s, m).unwrap();
                let mut slow_two = Vec::new();
                let mut slow_resp = Vec::new();
                for n in 0..=m {
                    for k in 0..10 {
                        slow_two.push(match kind {
                            ClosureKind::Rget => reference::rget_rhs_two_time(&s, k, m, n).unwrap(),
                            _ => reference::transfer_two_time(&s, k, m, n).unwrap(),
                        });
                        slow_resp.push(match kind {
                            ClosureKind::Dia => reference::dia_response_rhs(&s, k, m, n).unwrap(),
                            ClosureKind::Rget => reference::rget_response_rhs(&s, k, m, n).unwrap(),
                            _ => 0.0,
                        });
                    }
                }
                let scale = slow_two.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                for (i, (&f, &r)) in rhs.correlation.iter().zip(&slow_two).enumerate() {
                    assert!(close(f, r, scale), "{kind} m={m} entry {i}: {f} vs {r}");
                }
                if let Some(resp) = &rhs.response {
                    let scale = slow_resp.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                    for (&f, &r) in resp.iter().zip(&slow_resp) {
                        assert!(close(f, r, scale), "{kind} m={m} response: {f} vs {r}");
                    }
                }
                for k in 0..10 {
                    let slow = match kind {
                        ClosureKind::Rget => reference::rget_rhs_equal_time(&s, k, m).unwrap(),
                        _ => 2.0 * reference::transfer_two_time(&s, k, m, m).unwrap(),
                    };
                    assert!(close(rhs.equal_time[k], slow, 2.0 * scale));
                }
            }
        }
    }

    #[test]
    fn shared_transfer_is_bit_identical() {
        // a DIA state whose evolved H equals the LET propagator must produce
        // exactly the LET transfer
        let let_state = evolved(ClosureKind::Let, 4);
        let (h, _) = let_state.propagator_table(5);
        let dia = ClosureState::from_fields(
            let_state.grid().clone(),
            *let_state.times(),
            ClosureSettings::new(ClosureKind::Dia, 0.1),
            let_state.q().clone(),
            Some(h.into_owned()),
            None,
        )
        .unwrap();
        let a = assemble_row(&let_state, 4).unwrap();
        let b = assemble_row(&dia, 4).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.correlation), bits(&b.correlation));
        assert_eq!(bits(&a.equal_time), bits(&b.equal_time));
    }

    #[test]
    fn rget_equal_time_is_twice_the_diagonal() {
        let s = evolved(ClosureKind::Rget, 5);
        for m in 0..=5 {
            let rhs = assemble_row(&s, m).unwrap();
            let scale = rhs.equal_time.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            for k in 0..10 {
                assert!(close(rhs.equal_time[k], 2.0 * rhs.correlation_at(k, m), scale));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn equal_time_transfer_conserves_energy(
            amplitude in 1e-3..10.0_f64,
            k_peak in 0.3..4.0_f64,
            kind_index in 0..4_usize,
        ) {
            let grid = WavenumberGrid::build(0.1, 8.0, 12, 6).unwrap();
            let initial = InitialSpectrum::Peaked { amplitude, k_peak }.sample(&grid);
            let kind = ClosureKind::ALL[kind_index];
            let s = ClosureState::new(grid, TimeGrid::new(0.01, 2).unwrap(), ClosureSettings::new(kind, 0.1), &initial).unwrap();
            let rhs = assemble_row(&s, 0).unwrap();
            prop_assert!(conservation_residual(s.grid(), &rhs.equal_time_transfer()) < 1e-12);
        }
    }
}
