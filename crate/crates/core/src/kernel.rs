//! Triad geometry and wavenumber-space quadrature.
//!
//! Isotropy reduces every `∫d³p` in the closure equations to
//! `2π ∫p² dp ∫dμ`. Radial nodes are log-spaced between `k_min` and `k_max`;
//! angular nodes are Gauss–Legendre abscissae, which never touch `μ = ±1`.
//! The third side of the triad, `q = |k − p|`, generally falls between radial
//! nodes and is handled by [`interp_at`].

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// Geometric transfer kernel `L(k, p)` for wavenumbers `k`, `p` whose
/// directions have cosine `mu`:
///
/// ```text
/// L = [μ(k² + p²) − kp(1 + 2μ²)] (1 − μ²) kp / (k² + p² − 2kpμ)
/// ```
/// Orientation of `L` inside the transfer integrals.
///
/// [`eval_l`] equals `−k² (p/k)(xy + z³)` with `x, y, z` the cosines of the
/// angles opposite `k, p, q`. Its symmetrization over `p ↔ q`, which is all
/// the input term sees, is never positive. Integrating `+L` would make the
/// input term drain energy from every shell, so closures integrate
/// `TRANSFER_SIGN · L` instead.
pub const TRANSFER_SIGN: f64 = -1.0;

pub fn eval_l(k: f64, p: f64, mu: f64) -> Result<f64> {
    let denom = k * k + p * p - 2.0 * k * p * mu;
    if denom.is_nan() || denom < 1e-30 * k * k {
        return Err(Error::DegenerateGeometry { k, p, mu });
    }
    let numer = (mu * (k * k + p * p) - k * p * (1.0 + 2.0 * mu * mu)) * (1.0 - mu * mu) * k * p;
    let value = numer / denom;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::DegenerateGeometry { k, p, mu })
    }
}

/// Radial and angular quadrature nodes shared by every convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberGrid {
    k_nodes: Vec<f64>,
    k_weights: Vec<f64>,
    ln_k: Vec<f64>,
    mu_nodes: Vec<f64>,
    mu_weights: Vec<f64>,
}

// End corrections for the uniform rule in ln k: with weights `END[p-1]` on
// the first and last `p` nodes (1 elsewhere) the rule integrates
// polynomials of degree < 2p exactly.
const END: [&[f64]; 5] = [
    &[1.0 / 2.0],
    &[12.0 / 29.0, 63.0 / 58.0],
    &[75.0 / 203.0, 205.0 / 174.0, 20.0 / 21.0],
    &[17425.0 / 51156.0, 3355.0 / 2639.0, 167.0 / 196.0, 1697.0 / 1638.0],
    &[8675.0 / 27144.0, 10811.0 / 7917.0, 233.0 / 336.0, 43507.0 / 37674.0, 32369.0 / 33488.0],
];

impl WavenumberGrid {
    pub const MIN_K_NODES: usize = 8;
    pub const MIN_MU_NODES: usize = 4;

    /// Log-spaced radial nodes on `[k_min, k_max]` with `n_mu` Gauss–Legendre
    /// angular nodes.
    pub fn build(k_min: f64, k_max: f64, n_k: usize, n_mu: usize) -> Result<Self> {
        Self::build_with_minimum(k_min, k_max, n_k, n_mu, Self::MIN_K_NODES, Self::MIN_MU_NODES)
    }

    /// Like [`WavenumberGrid::build`] but accepts down to two nodes in each
    /// direction. Too coarse for physics; meant for comparing assembly paths
    /// against brute-force loops on tiny problems.
    pub fn build_small(k_min: f64, k_max: f64, n_k: usize, n_mu: usize) -> Result<Self> {
        Self::build_with_minimum(k_min, k_max, n_k, n_mu, 2, 2)
    }

    fn build_with_minimum(
        k_min: f64,
        k_max: f64,
        n_k: usize,
        n_mu: usize,
        min_k: usize,
        min_mu: usize,
    ) -> Result<Self> {
        use crate::error::ConfigError;
        if !(k_min.is_finite() && k_min > 0.0) {
            return Err(ConfigError::new("grid.k_min", "must be finite and > 0").into());
        }
        if !(k_max.is_finite() && k_max > k_min) {
            return Err(ConfigError::new("grid.k_max", "must be finite and > k_min").into());
        }
        if n_k < min_k {
            return Err(ConfigError::new("grid.n_k", format!("must be at least {min_k}")).into());
        }
        if n_mu < min_mu {
            return Err(ConfigError::new("grid.n_mu", format!("must be at least {min_mu}")).into());
        }

        let (ln_min, ln_max) = (k_min.ln(), k_max.ln());
        let h = (ln_max - ln_min) / (n_k - 1) as f64;
        let mut k_nodes: Vec<f64> = (0..n_k).map(|i| (ln_min + h * i as f64).exp()).collect();
        k_nodes[0] = k_min;
        k_nodes[n_k - 1] = k_max;
        let ln_k: Vec<f64> = k_nodes.iter().map(|k| k.ln()).collect();

        // ∫f(k)dk = ∫f(k) k d(ln k); the uniform rule lives in ln k.
        let end = END[(n_k / 2).min(END.len()) - 1];
        let k_weights = (0..n_k)
            .map(|i| {
                let from_end = i.min(n_k - 1 - i);
                let g = end.get(from_end).copied().unwrap_or(1.0);
                g * h * k_nodes[i]
            })
            .collect();

        let rule = GaussLegendre::new(n_mu)
            .map_err(|e| Error::from(ConfigError::new("grid.n_mu", e.to_string())))?;
        let mut pairs: Vec<(f64, f64)> = rule.into_node_weight_pairs();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mu_nodes, mu_weights) = pairs.into_iter().unzip();

        Ok(Self {
            k_nodes,
            k_weights,
            ln_k,
            mu_nodes,
            mu_weights,
        })
    }

    pub fn k_nodes(&self) -> &[f64] {
        &self.k_nodes
    }

    pub fn k_weights(&self) -> &[f64] {
        &self.k_weights
    }

    pub fn mu_nodes(&self) -> &[f64] {
        &self.mu_nodes
    }

    pub fn mu_weights(&self) -> &[f64] {
        &self.mu_weights
    }

    pub fn n_k(&self) -> usize {
        self.k_nodes.len()
    }

    pub fn n_mu(&self) -> usize {
        self.mu_nodes.len()
    }

    pub fn k(&self, index: usize) -> f64 {
        self.k_nodes[index]
    }

    pub fn k_min(&self) -> f64 {
        self.k_nodes[0]
    }

    pub fn k_max(&self) -> f64 {
        self.k_nodes[self.n_k() - 1]
    }

    /// Radial factor `2π w_i p_i²` of the shell integral.
    pub fn shell_factor(&self, index: usize) -> f64 {
        let p = self.k_nodes[index];
        2.0 * PI * self.k_weights[index] * p * p
    }

    /// Locates `q` between radial nodes; `None` outside `[k_min, k_max]`.
    pub fn bracket(&self, q: f64) -> Option<Bracket> {
        let n = self.n_k();
        if !(q >= self.k_nodes[0] && q <= self.k_nodes[n - 1]) {
            return None;
        }
        // first index with node > q
        let upper = self.k_nodes.partition_point(|&k| k <= q);
        let lo = upper - 1;
        if self.k_nodes[lo] == q || lo == n - 1 {
            return Some(Bracket {
                lo,
                t_log: 0.0,
                t_lin: 0.0,
            });
        }
        let (k_lo, k_hi) = (self.k_nodes[lo], self.k_nodes[lo + 1]);
        Some(Bracket {
            lo,
            t_log: (q.ln() - self.ln_k[lo]) / (self.ln_k[lo + 1] - self.ln_k[lo]),
            t_lin: (q - k_lo) / (k_hi - k_lo),
        })
    }
}

/// Position of an off-grid wavenumber between two radial nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: usize,
    /// Fraction of the interval in `ln k`.
    pub t_log: f64,
    /// Fraction of the interval in `k`.
    pub t_lin: f64,
}

impl Bracket {
    #[inline]
    pub fn eval(&self, values: &[f64]) -> f64 {
        if self.t_log == 0.0 {
            return values[self.lo];
        }
        let (a, b) = (values[self.lo], values[self.lo + 1]);
        if a > 0.0 && b > 0.0 {
            let (la, lb) = (a.ln(), b.ln());
            (la + self.t_log * (lb - la)).exp()
        } else {
            (1.0 - self.t_lin) * a + self.t_lin * b
        }
    }

    /// Same as [`Bracket::eval`] with `ln(values)` supplied by the caller
    /// (entries for non-positive values are ignored).
    #[inline]
    pub fn eval_with_logs(&self, values: &[f64], logs: &[f64]) -> f64 {
        if self.t_log == 0.0 {
            return values[self.lo];
        }
        let (a, b) = (values[self.lo], values[self.lo + 1]);
        if a > 0.0 && b > 0.0 {
            let (la, lb) = (logs[self.lo], logs[self.lo + 1]);
            (la + self.t_log * (lb - la)).exp()
        } else {
            (1.0 - self.t_lin) * a + self.t_lin * b
        }
    }
}

/// Interpolates a per-node array at wavenumber `q`: log-log linear where
/// both bracketing values are positive, linear otherwise, and zero outside
/// the resolved band.
pub fn interp_at(values: &[f64], grid: &WavenumberGrid, q: f64) -> f64 {
    debug_assert_eq!(values.len(), grid.n_k());
    match grid.bracket(q) {
        Some(b) => b.eval(values),
        None => 0.0,
    }
}

/// `∫d³p L(k, p) F(p, |k − p|)` for `k = grid.k(k_index)`:
///
/// ```text
/// 2π Σᵢ Σⱼ w_i μw_j p_i² L(k, p_i, μ_j) F(p_i, q_ij, L)
/// ```
///
/// The integrand receives `(p, q, L)` so it may depend on the kernel value.
pub fn convolve<F>(grid: &WavenumberGrid, k_index: usize, mut integrand: F) -> Result<f64>
where
    F: FnMut(f64, f64, f64) -> Result<f64>,
{
    let k = grid.k(k_index);
    let mut total = 0.0;
    for (i, &p) in grid.k_nodes().iter().enumerate() {
        let mut angular = 0.0;
        for (&mu, &w_mu) in grid.mu_nodes().iter().zip(grid.mu_weights()) {
            let l = eval_l(k, p, mu)?;
            let q = triad_side(k, p, mu);
            angular += w_mu * l * integrand(p, q, l)?;
        }
        total += grid.k_weights()[i] * p * p * angular;
    }
    Ok(2.0 * PI * total)
}

#[inline]
pub fn triad_side(k: f64, p: f64, mu: f64) -> f64 {
    (k * k + p * p - 2.0 * k * p * mu).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct TriadEntry {
    bracket: Bracket,
    /// `TRANSFER_SIGN · μw_j · L(k, p_i, μ_j)`
    coef: f64,
}

/// Precomputed `(k, p_i, μ_j)` geometry: kernel values and the interpolation
/// bracket of `q`. Entries with `q` outside the band are dropped since they
/// contribute zero.
#[derive(Debug, Clone)]
pub struct TriadTable {
    n_k: usize,
    entries: Vec<TriadEntry>,
    // offsets[k * n_k + i]..offsets[k * n_k + i + 1]
    offsets: Vec<usize>,
}

impl TriadTable {
    pub fn new(grid: &WavenumberGrid) -> Result<Self> {
        let n_k = grid.n_k();
        let mut entries = Vec::new();
        let mut offsets = Vec::with_capacity(n_k * n_k + 1);
        offsets.push(0);
        for &k in grid.k_nodes() {
            for &p in grid.k_nodes() {
                for (&mu, &w_mu) in grid.mu_nodes().iter().zip(grid.mu_weights()) {
                    let l = eval_l(k, p, mu)?;
                    if let Some(bracket) = grid.bracket(triad_side(k, p, mu)) {
                        entries.push(TriadEntry {
                            bracket,
                            coef: TRANSFER_SIGN * w_mu * l,
                        });
                    }
                }
                offsets.push(entries.len());
            }
        }
        Ok(Self {
            n_k,
            entries,
            offsets,
        })
    }

    /// `Σⱼ μw_j L(k, p_i, μ_j) V(q_ij)` with `logs = ln(values)`.
    #[inline]
    pub fn angular_sum(&self, k_index: usize, p_index: usize, values: &[f64], logs: &[f64]) -> f64 {
        let cell = k_index * self.n_k + p_index;
        self.entries[self.offsets[cell]..self.offsets[cell + 1]]
            .iter()
            .map(|e| e.coef * e.bracket.eval_with_logs(values, logs))
            .sum()
    }

    /// [`TriadTable::angular_sum`] for many columns at once: adds the sum for
    /// column `s` into `out[s]`. `values` and `logs` are node-major,
    /// `[node * out.len() + s]`, so each entry is read once.
    pub fn angular_history(&self, k_index: usize, p_index: usize, values: &[f64], logs: &[f64], out: &mut [f64]) {
        let cols = out.len();
        let cell = k_index * self.n_k + p_index;
        for e in &self.entries[self.offsets[cell]..self.offsets[cell + 1]] {
            let b = e.bracket;
            let lo = b.lo * cols;
            if b.t_log == 0.0 {
                for (o, v) in out.iter_mut().zip(&values[lo..lo + cols]) {
                    *o += e.coef * v;
                }
                continue;
            }
            let hi = lo + cols;
            let (va, vb) = (&values[lo..lo + cols], &values[hi..hi + cols]);
            let (la, lb) = (&logs[lo..lo + cols], &logs[hi..hi + cols]);
            for s in 0..cols {
                let (a, bv) = (va[s], vb[s]);
                let v = if a > 0.0 && bv > 0.0 {
                    (la[s] + b.t_log * (lb[s] - la[s])).exp()
                } else {
                    (1.0 - b.t_lin) * a + b.t_lin * bv
                };
                out[s] += e.coef * v;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn default_grid() -> WavenumberGrid {
        WavenumberGrid::build(0.1, 10.0, 64, 32).unwrap()
    }

    #[test]
    fn kernel_hand_value() {
        assert_eq!(eval_l(1.0, 1.0, 0.0).unwrap(), -0.5);
    }

    #[test]
    fn kernel_collinear_limits() {
        let grid = WavenumberGrid::build(0.1, 10.0, 16, 64).unwrap();
        let mu_last = *grid.mu_nodes().last().unwrap();
        let mu_first = grid.mu_nodes()[0];
        // anti-parallel and unequal parallel triads vanish with (1 − μ²)
        assert!(eval_l(1.0, 1.0, mu_first).unwrap().abs() < 2e-3);
        assert!(eval_l(1.0, 2.0, mu_last).unwrap().abs() < 1e-2);
        assert_eq!(eval_l(1.0, 2.0, 1.0).unwrap(), 0.0);
        // k = p: the (1 − μ) of the denominator cancels and L → −1
        let m = mu_last;
        let l = eval_l(1.0, 1.0, m).unwrap();
        assert!((l - 0.5 * (2.0 * m - 1.0 - 2.0 * m * m) * (1.0 + m)).abs() < 1e-12);
        assert!((l + 1.0).abs() < 2e-3);
    }

    #[test]
    fn kernel_exchange_symmetry_example() {
        assert_eq!(eval_l(2.0, 1.0, 0.5).unwrap(), eval_l(1.0, 2.0, 0.5).unwrap());
    }

    #[test]
    fn kernel_rejects_degenerate_triad() {
        assert!(matches!(
            eval_l(1.0, 1.0, 1.0),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn grid_endpoints_and_ratio() {
        let grid = WavenumberGrid::build(0.1, 10.0, 8, 4).unwrap();
        assert_eq!(grid.k_nodes()[0], 0.1);
        assert_eq!(grid.k_nodes()[7], 10.0);
        let ratio = grid.k(1) / grid.k(0);
        for w in grid.k_nodes().windows(2) {
            assert_relative_eq!(w[1] / w[0], ratio, max_relative = 1e-12);
        }
    }

    #[test]
    fn grid_rejects_bad_bounds_and_counts() {
        assert!(matches!(
            WavenumberGrid::build(1.0, 1.0, 8, 4),
            Err(Error::Config(_))
        ));
        assert!(WavenumberGrid::build(0.0, 1.0, 8, 4).is_err());
        assert!(WavenumberGrid::build(0.1, 1.0, 7, 4).is_err());
        assert!(WavenumberGrid::build(0.1, 1.0, 8, 3).is_err());
    }

    #[test]
    fn angular_weights_sum_to_two() {
        let grid = default_grid();
        let sum: f64 = grid.mu_weights().iter().sum();
        assert!((sum - 2.0).abs() / 2.0 <= 1e-12);
        assert!(grid.mu_nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(grid.mu_nodes().iter().all(|&m| m > -1.0 && m < 1.0));
    }

    #[test]
    fn radial_rule_on_power_law_times_exponential() {
        // ∫_{0.1}^{10} k² e^{-k} dk = [-(k² + 2k + 2) e^{-k}]
        let antiderivative = |k: f64| -(k * k + 2.0 * k + 2.0) * (-k).exp();
        let exact = antiderivative(10.0) - antiderivative(0.1);
        let grid = default_grid();
        let approx: f64 = grid
            .k_nodes()
            .iter()
            .zip(grid.k_weights())
            .map(|(&k, &w)| w * k * k * (-k).exp())
            .sum();
        assert!((approx - exact).abs() / exact <= 1e-6, "{approx} vs {exact}");
    }

    #[test]
    fn interp_reproduces_nodes_and_zero_out_of_band() {
        let grid = default_grid();
        let values: Vec<f64> = grid.k_nodes().iter().map(|k| (k * 1.3).sin()).collect();
        for (i, &k) in grid.k_nodes().iter().enumerate() {
            assert_eq!(interp_at(&values, &grid, k), values[i]);
        }
        assert_eq!(interp_at(&values, &grid, grid.k_max() * 2.0), 0.0);
        assert_eq!(interp_at(&values, &grid, grid.k_min() * 0.5), 0.0);
    }

    #[test]
    fn interp_exact_on_power_law() {
        let grid = default_grid();
        let c = 3.7;
        let values: Vec<f64> = grid.k_nodes().iter().map(|k| c * k.powi(-2)).collect();
        for i in 0..grid.n_k() - 1 {
            let q = (grid.k(i) * grid.k(i + 1)).sqrt();
            let got = interp_at(&values, &grid, q);
            assert!((got - c * q.powi(-2)).abs() / (c * q.powi(-2)) <= 1e-12);
        }
    }

    #[test]
    fn interp_linear_when_sign_changes() {
        let grid = WavenumberGrid::build(1.0, 128.0, 8, 4).unwrap();
        let mut values = vec![1.0; 8];
        values[3] = -1.0;
        let q = 0.5 * (grid.k(2) + grid.k(3));
        assert_relative_eq!(interp_at(&values, &grid, q), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn convolve_zero_integrand() {
        let grid = WavenumberGrid::build(0.1, 10.0, 16, 8).unwrap();
        assert_eq!(convolve(&grid, 3, |_, _, _| Ok(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn convolve_unit_integrand_gives_shell_volume() {
        let grid = default_grid();
        let got = convolve(&grid, 20, |_, _, l| Ok(1.0 / l)).unwrap();
        let exact = 4.0 * PI * (10f64.powi(3) - 0.1f64.powi(3)) / 3.0;
        assert!((got - exact).abs() / exact <= 1e-6, "{got} vs {exact}");
    }

    #[test]
    fn convolve_propagates_callback_errors() {
        let grid = WavenumberGrid::build(0.1, 10.0, 8, 4).unwrap();
        let r = convolve(&grid, 0, |_, _, _| Err(Error::Contract("boom".into())));
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn triad_table_matches_convolve() {
        let grid = WavenumberGrid::build(0.2, 6.0, 12, 6).unwrap();
        let table = TriadTable::new(&grid).unwrap();
        let values: Vec<f64> = grid.k_nodes().iter().map(|k| k.powi(4) * (-k * k).exp()).collect();
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        for k_index in 0..grid.n_k() {
            let reference = convolve(&grid, k_index, |p, q, _| {
                Ok(interp_at(&values, &grid, p) * interp_at(&values, &grid, q))
            })
            .unwrap();
            let fast: f64 = (0..grid.n_k())
                .map(|i| grid.shell_factor(i) * values[i] * table.angular_sum(k_index, i, &values, &logs))
                .sum();
            assert_relative_eq!(fast, TRANSFER_SIGN * reference, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn kernel_is_minus_k_squared_b(k in 0.05f64..20.0, p in 0.05f64..20.0, mu in -0.999f64..0.999) {
            let q = triad_side(k, p, mu);
            prop_assume!(q > 1e-3 * k.max(p));
            let x = (p * p + q * q - k * k) / (2.0 * p * q);
            let y = (k * k + q * q - p * p) / (2.0 * k * q);
            let b = (p / k) * (x * y + mu.powi(3));
            let l = eval_l(k, p, mu).unwrap();
            let scale = k * k * b.abs().max(1e-12);
            prop_assert!((l + k * k * b).abs() <= 1e-9 * scale.max(l.abs()));
            let swapped = eval_l(k, q, y).unwrap();
            prop_assert!(TRANSFER_SIGN * (l + swapped) >= -1e-9 * (l.abs() + swapped.abs()));
        }

        #[test]
        fn kernel_symmetric_in_k_and_p(k in 0.01f64..50.0, p in 0.01f64..50.0, mu in -0.999f64..0.999) {
            let a = eval_l(k, p, mu).unwrap();
            let b = eval_l(p, k, mu).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
        }

        #[test]
        fn kernel_bounded_by_sine_squared(k in 0.1f64..10.0, p in 0.1f64..10.0) {
            let grid = WavenumberGrid::build(0.1, 10.0, 8, 32).unwrap();
            // |L| / (1 − μ²) ≤ (k² + p² + 3kp) kp / q², with q² smallest at the last node
            let bound = grid.mu_nodes().iter().map(|&mu| {
                eval_l(k, p, mu).unwrap().abs() / (1.0 - mu * mu)
            }).fold(0.0, f64::max);
            prop_assert!(bound.is_finite());
            prop_assert!(bound <= 3.0 * (k * k + p * p) * k * p / (k * k + p * p - 2.0 * k * p * grid.mu_nodes()[31]));
        }

        #[test]
        fn convolve_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, k_index in 0usize..12) {
            let grid = WavenumberGrid::build(0.2, 5.0, 12, 6).unwrap();
            let f = |p: f64, q: f64| p.sin() * (-q).exp();
            let g = |p: f64, q: f64| p * q;
            let lhs = convolve(&grid, k_index, |p, q, _| Ok(a * f(p, q) + b * g(p, q))).unwrap();
            let fa = convolve(&grid, k_index, |p, q, _| Ok(f(p, q))).unwrap();
            let gb = convolve(&grid, k_index, |p, q, _| Ok(g(p, q))).unwrap();
            let rhs = a * fa + b * gb;
            let scale = (a * fa).abs() + (b * gb).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
        }
    }
}
