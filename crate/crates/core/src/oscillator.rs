//! The random oscillator `(d/dt + ν + ib) q = 0` with Gaussian `b`.
//!
//! Its ensemble statistics are known in closed form, which makes it the
//! reference problem for the closure machinery:
//!
//! ```text
//! Q(t,t') = Q₀ exp[−ν(t+t') − ⟨b²⟩(t+t')²/2]
//! Q(t,t)  = Q₀ exp[−2νt − 2⟨b²⟩t²]
//! G(t,t') = exp[−ν(t−t') − ⟨b²⟩(t−t')²/2]
//! ```
//!
//! [`rget_solve`] integrates the constraint-reduced closure equations,
//! [`dia_solve`] the self-consistent DIA equations, and
//! [`monte_carlo_oracle`] samples the ensemble directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ConfigError, Error, Result};
use crate::history::{trapezoid_weight, FieldKind, TimeGrid, TwoTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorParams {
    /// Damping rate.
    pub nu: f64,
    /// Variance `⟨b²⟩` of the random frequency.
    pub b_var: f64,
    /// Initial correlation `Q(0, 0)`.
    pub q0_sq: f64,
}

impl OscillatorParams {
    pub fn new(nu: f64, b_var: f64, q0_sq: f64) -> Result<Self> {
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(ConfigError::new("nu", "must be finite and >= 0").into());
        }
        if !(b_var.is_finite() && b_var >= 0.0) {
            return Err(ConfigError::new("b_var", "must be finite and >= 0").into());
        }
        if !(q0_sq.is_finite() && q0_sq > 0.0) {
            return Err(ConfigError::new("q0_sq", "must be finite and > 0").into());
        }
        Ok(Self { nu, b_var, q0_sq })
    }
}

pub fn exact_two_time(p: &OscillatorParams, t: f64, t_prime: f64) -> f64 {
    let s = t + t_prime;
    p.q0_sq * (-p.nu * s - 0.5 * p.b_var * s * s).exp()
}

pub fn exact_equal_time(p: &OscillatorParams, t: f64) -> f64 {
    p.q0_sq * (-2.0 * p.nu * t - 2.0 * p.b_var * t * t).exp()
}

pub fn exact_response(p: &OscillatorParams, t: f64, t_prime: f64) -> f64 {
    let tau = t - t_prime;
    (-p.nu * tau - 0.5 * p.b_var * tau * tau).exp()
}

/// Propagator fixed by `Q(t,t') = H(t,s) Q(t',s)`.
pub fn constraint_propagator_first(p: &OscillatorParams, t: f64, s: f64, t_prime: f64) -> f64 {
    (-p.nu * (t - s) - 0.5 * p.b_var * (t - s) * (t + s + 2.0 * t_prime)).exp()
}

/// Propagator fixed by `Q(t,t') = H(t',s) Q(t,s)`.
pub fn constraint_propagator_second(p: &OscillatorParams, t: f64, s: f64, t_prime: f64) -> f64 {
    constraint_propagator_first(p, t_prime, s, t)
}

/// Propagator fixed by `Q(t,t) = H(t,s) Q(t,s)`.
pub fn constraint_propagator_equal_time(p: &OscillatorParams, t: f64, s: f64) -> f64 {
    constraint_propagator_first(p, t, s, t)
}

/// Propagator fixed by `G(t,t') = H(t,s) G(s,t')`.
pub fn constraint_propagator_response(p: &OscillatorParams, t: f64, s: f64, t_prime: f64) -> f64 {
    (-p.nu * (t - s) - 0.5 * p.b_var * (t - s) * (t + s - 2.0 * t_prime)).exp()
}

/// Two-time tables of one oscillator solution (`n_k = 1` fields).
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorState {
    pub times: TimeGrid,
    /// `Q(t_m, t_n)`; its diagonal is the equal-time correlation.
    pub q: TwoTimeField,
    /// `G(t_m, t_n)`, unit diagonal.
    pub g: TwoTimeField,
}

impl OscillatorState {
    fn from_dense(times: TimeGrid, q: &[Vec<f64>], g: &[Vec<f64>]) -> Result<Self> {
        let mut qf = TwoTimeField::new(FieldKind::Correlation, 1);
        let mut gf = TwoTimeField::new(FieldKind::Response, 1);
        for (qr, gr) in q.iter().zip(g) {
            qf.push_row(qr)?;
            gf.push_row(gr)?;
        }
        Ok(Self { times, q: qf, g: gf })
    }

    pub fn rows(&self) -> usize {
        self.q.rows()
    }

    pub fn two_time(&self, m: usize, n: usize) -> f64 {
        self.q.get(0, m, n)
    }

    pub fn equal_time(&self, m: usize) -> f64 {
        self.q.get(0, m, m)
    }

    pub fn response(&self, m: usize, n: usize) -> f64 {
        self.g.get(0, m, n)
    }
}

/// Classical RK4 step factor for `y' = −a(t) y` from `t` to `t + dt`:
/// one step maps `y` to `y · rk4_factor(…)`.
fn rk4_factor(t: f64, dt: f64, a: impl Fn(f64) -> f64) -> f64 {
    let k1 = -a(t);
    let k2 = -a(t + 0.5 * dt) * (1.0 + 0.5 * dt * k1);
    let k3 = -a(t + 0.5 * dt) * (1.0 + 0.5 * dt * k2);
    let k4 = -a(t + dt) * (1.0 + dt * k3);
    1.0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates the constraint-reduced closure equations
///
/// ```text
/// dQ(t,t')/dt = −[ν + ⟨b²⟩(t+t')] Q(t,t')
/// dQ(t,t)/dt  = −[2ν + 4⟨b²⟩t] Q(t,t)
/// dG(t,t')/dt = −[ν + ⟨b²⟩(t−t')] G(t,t')
/// ```
///
/// with RK4: the diagonal from `Q₀`, and every column `t'` from its
/// diagonal. The equations are linear, so each step is a multiplication and
/// the tables are built row by row.
pub fn rget_solve(params: &OscillatorParams, times: &TimeGrid) -> Result<OscillatorState> {
    let (nu, b) = (params.nu, params.b_var);
    let dt = times.dt();
    let n = times.n_steps();
    // the step factor of column t' at row t depends on t + t' for Q and on
    // t − t' for G, so both are tabulated by index
    let q_factor: Vec<f64> = (0..2 * n).map(|i| rk4_factor(times.t(i), dt, |s| nu + b * s)).collect();
    let g_factor: Vec<f64> = (0..n).map(|i| rk4_factor(times.t(i), dt, |s| nu + b * s)).collect();
    let mut qf = TwoTimeField::new(FieldKind::Correlation, 1);
    let mut gf = TwoTimeField::new(FieldKind::Response, 1);
    let mut q = vec![params.q0_sq];
    let mut g = vec![1.0];
    qf.push_row(&q)?;
    gf.push_row(&g)?;
    for m in 0..n {
        let diagonal = q[m] * rk4_factor(times.t(m), dt, |t| 2.0 * nu + 4.0 * b * t);
        for (c, (qc, gc)) in q.iter_mut().zip(g.iter_mut()).enumerate() {
            *qc *= q_factor[m + c];
            *gc *= g_factor[m - c];
        }
        q.push(diagonal);
        g.push(1.0);
        qf.push_row(&q)?;
        gf.push_row(&g)?;
    }
    Ok(OscillatorState { times: *times, q: qf, g: gf })
}

/// Largest relative mismatch between the unreduced memory-integral closure
/// right-hand sides (constraint propagators substituted, trapezoid history)
/// and their reduced forms, evaluated on the solution tables every `stride`
/// nodes.
///
/// ```text
/// −⟨b²⟩[∫₀^t H(t,s)Q(t',s) + ∫₀^t' H(t',s)Q(t,s)]   vs  −⟨b²⟩(t+t')Q(t,t')
/// −4⟨b²⟩∫₀^t H(t,s)Q(t,s)                          vs  −4⟨b²⟩ t Q(t,t)
/// −⟨b²⟩∫_{t'}^t H(t,s)G(s,t')                       vs  −⟨b²⟩(t−t')G(t,t')
/// ```
pub fn memory_reduction_residual(params: &OscillatorParams, state: &OscillatorState, stride: usize) -> f64 {
    let stride = stride.max(1);
    let dt = state.times.dt() * stride as f64;
    let t_of = |i: usize| state.times.t(i * stride);
    let nodes = (state.rows() - 1) / stride + 1;
    let q = |a: usize, b: usize| state.two_time(a * stride, b * stride);
    let g = |a: usize, b: usize| state.response(a * stride, b * stride);
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
    (1..nodes)
        .into_par_iter()
        .map(|m| {
            let t = t_of(m);
            let mut worst = 0.0_f64;
            for n in 0..=m {
                let tp = t_of(n);
                let first: f64 = (0..=m)
                    .map(|s| trapezoid_weight(s, 0, m, dt) * constraint_propagator_first(params, t, t_of(s), tp) * q(n, s))
                    .sum();
                let second: f64 = (0..=n)
                    .map(|s| trapezoid_weight(s, 0, n, dt) * constraint_propagator_second(params, t, t_of(s), tp) * q(m, s))
                    .sum();
                worst = worst.max(rel(first + second, (t + tp) * q(m, n)));
                let memory: f64 = (n..=m)
                    .map(|s| trapezoid_weight(s, n, m, dt) * constraint_propagator_response(params, t, t_of(s), tp) * g(s, n))
                    .sum();
                if m > n {
                    worst = worst.max(rel(memory, (t - tp) * g(m, n)));
                }
            }
            let equal: f64 = (0..=m)
                .map(|s| trapezoid_weight(s, 0, m, dt) * constraint_propagator_equal_time(params, t, t_of(s)) * q(m, s))
                .sum();
            worst.max(rel(4.0 * equal, 4.0 * t * q(m, m)))
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest relative violation of the propagator constraints on the solution
/// tables, over all node triples `s ≤ min(t, t')` on every `stride`-th node:
/// `H(t,s)Q(t',s) = Q(t,t')`, `H(t',s)Q(t,s) = Q(t,t')` and
/// `H(t,s)Q(t,s) = Q(t,t)`, with `H` the closed-form constraint propagators.
/// Also checks the ratio-reconstructed `Q(t,t')/Q(t',s)` against them.
pub fn constraint_residual(params: &OscillatorParams, state: &OscillatorState, stride: usize) -> f64 {
    let stride = stride.max(1);
    let nodes = (state.rows() - 1) / stride + 1;
    let t_of = |i: usize| state.times.t(i * stride);
    let q = |a: usize, b: usize| state.two_time(a * stride, b * stride);
    (0..nodes)
        .into_par_iter()
        .map(|m| {
            let t = t_of(m);
            let mut worst = 0.0_f64;
            for n in 0..nodes {
                let tp = t_of(n);
                let target = q(m, n);
                for s in 0..=m.min(n) {
                    let ts = t_of(s);
                    let h1 = constraint_propagator_first(params, t, ts, tp);
                    let h2 = constraint_propagator_second(params, t, ts, tp);
                    worst = worst
                        .max(((h1 * q(n, s) - target) / target).abs())
                        .max(((h2 * q(m, s) - target) / target).abs())
                        .max(((target / q(n, s) - h1) / h1).abs());
                }
            }
            for s in 0..=m {
                let h = constraint_propagator_equal_time(params, t, t_of(s));
                worst = worst.max(((h * q(m, s) - q(m, m)) / q(m, m)).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Stationary DIA response `g(τ)` on `τ = 0, dt, …, n_steps·dt`:
///
/// ```text
/// g' = −νg − ⟨b²⟩ ∫₀^τ g(τ−u) g(u) du,   g(0) = 1
/// ```
///
/// Heun steps with a trapezoid memory integral.
pub fn dia_response(params: &OscillatorParams, times: &TimeGrid) -> Result<Vec<f64>> {
    let (nu, b) = (params.nu, params.b_var);
    let dt = times.dt();
    let n = times.n_steps();
    let mut g = Vec::with_capacity(n + 1);
    g.push(1.0);
    // trapezoid ∫₀^{τ_j} g(τ_j − u) g(u) du over the values in `g`
    let memory = |g: &[f64]| -> f64 {
        let j = g.len() - 1;
        (0..=j).map(|s| trapezoid_weight(s, 0, j, dt) * g[j - s] * g[s]).sum()
    };
    for j in 0..n {
        let f0 = -nu * g[j] - b * memory(&g);
        g.push(g[j] + dt * f0);
        let f1 = -nu * g[j + 1] - b * memory(&g);
        g[j + 1] = g[j] + 0.5 * dt * (f0 + f1);
        if !g[j + 1].is_finite() {
            return Err(Error::Blowup { k_index: 0, m: j + 1, n: 0 });
        }
    }
    Ok(g)
}

/// Self-consistent DIA closure, the propagator identified with `G`:
///
/// ```text
/// dG(t,t')/dt = −νG − ⟨b²⟩∫_{t'}^t G(t,s) G(s,t')
/// dQ(t,t')/dt = −νQ − ⟨b²⟩[∫₀^t G(t,s)Q(t',s) + ∫₀^t' G(t',s)Q(t,s)]
/// dQ(t,t)/dt  = −2νQ − 4⟨b²⟩∫₀^t G(t,s)Q(t,s)
/// ```
///
/// `G` depends only on `t − t'` and comes from [`dia_response`]; `Q` is
/// advanced row by row with Heun steps, so the cost grows as `n_steps³`.
pub fn dia_solve(params: &OscillatorParams, times: &TimeGrid) -> Result<OscillatorState> {
    let (nu, b) = (params.nu, params.b_var);
    let dt = times.dt();
    let n = times.n_steps();
    let resp = dia_response(params, times)?;

    // dense lower triangle, q[m][j] for j ≤ m
    let mut q: Vec<Vec<f64>> = vec![vec![params.q0_sq]];
    let at = |q: &[Vec<f64>], a: usize, c: usize| if a >= c { q[a][c] } else { q[c][a] };
    // right-hand sides of row m (entries n ≤ m, then the equal-time value)
    let rhs = |q: &[Vec<f64>], m: usize| -> Vec<f64> {
        let mut out: Vec<f64> = (0..=m)
            .map(|j| {
                let first: f64 = (0..=m).map(|s| trapezoid_weight(s, 0, m, dt) * resp[m - s] * at(q, j, s)).sum();
                let second: f64 = (0..=j).map(|s| trapezoid_weight(s, 0, j, dt) * resp[j - s] * at(q, m, s)).sum();
                -nu * q[m][j] - b * (first + second)
            })
            .collect();
        let memory: f64 = (0..=m).map(|s| trapezoid_weight(s, 0, m, dt) * resp[m - s] * q[m][s]).sum();
        out.push(-2.0 * nu * q[m][m] - 4.0 * b * memory);
        out
    };
    for m in 0..n {
        let f0 = rhs(&q, m);
        let mut row: Vec<f64> = (0..=m).map(|j| q[m][j] + dt * f0[j]).collect();
        row.push(q[m][m] + dt * f0[m + 1]);
        q.push(row);
        let f1 = rhs(&q, m + 1);
        let mut row: Vec<f64> = (0..=m).map(|j| q[m][j] + 0.5 * dt * (f0[j] + f1[j])).collect();
        row.push(q[m][m] + 0.5 * dt * (f0[m + 1] + f1[m + 2]));
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup { k_index: 0, m: m + 1, n: j });
        }
        q[m + 1] = row;
    }
    let g: Vec<Vec<f64>> = (0..=n).map(|m| (0..=m).map(|j| resp[m - j]).collect()).collect();
    OscillatorState::from_dense(*times, &q, &g)
}

/// Sample mean of a complex quantity with the standard errors of its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexEstimate {
    pub re: f64,
    pub im: f64,
    pub re_stderr: f64,
    pub im_stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloPoint {
    pub t: f64,
    pub t_prime: f64,
    /// `⟨q(t) q(t')⟩`
    pub two_time: ComplexEstimate,
    /// `⟨q(t) q(t)⟩`
    pub equal_time: ComplexEstimate,
    /// `⟨Ĝ(t, t')⟩`
    pub response: ComplexEstimate,
}

const MC_BLOCK: usize = 1 << 15;
/// Running sums `(Σre, Σim, Σre², Σim²)` for the three estimates of each pair.
type BlockSums = Vec<[[f64; 4]; 3]>;

fn accumulate(acc: &mut [f64; 4], re: f64, im: f64) {
    acc[0] += re;
    acc[1] += im;
    acc[2] += re * re;
    acc[3] += im * im;
}

fn estimate(sums: [f64; 4], n: f64) -> ComplexEstimate {
    let stat = |s: f64, s2: f64| {
        let mean = s / n;
        let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    };
    let (re, re_stderr) = stat(sums[0], sums[2]);
    let (im, im_stderr) = stat(sums[1], sums[3]);
    ComplexEstimate { re, im, re_stderr, im_stderr }
}

/// Ensemble averages over `n_samples` realizations of `b ~ N(0, ⟨b²⟩)`, with
/// `q(t) = √Q₀ exp(−νt − ibt)` and `Ĝ(t,t') = exp(−(ν + ib)(t − t'))`.
///
/// Samples are drawn in fixed-size blocks, each from its own ChaCha stream
/// derived from `seed`, and block sums are reduced in block order, so the
/// result does not depend on the number of threads.
pub fn monte_carlo_oracle(
    params: &OscillatorParams,
    n_samples: usize,
    pairs: &[(f64, f64)],
    seed: u64,
) -> Result<Vec<MonteCarloPoint>> {
    if n_samples < 1000 {
        return Err(ConfigError::new("mc_samples", "must be at least 1000").into());
    }
    if pairs.iter().any(|&(t, tp)| !(t.is_finite() && tp.is_finite() && t >= tp && tp >= 0.0)) {
        return Err(Error::Contract("Monte-Carlo pairs need t ≥ t' ≥ 0".into()));
    }
    let normal = Normal::new(0.0, params.b_var.sqrt()).map_err(|e| Error::Contract(e.to_string()))?;
    let n_blocks = n_samples.div_ceil(MC_BLOCK);
    let nu = params.nu;
    let q0 = params.q0_sq;

    let blocks: Vec<BlockSums> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            let count = MC_BLOCK.min(n_samples - block * MC_BLOCK);
            let mut sums: BlockSums = vec![[[0.0; 4]; 3]; pairs.len()];
            for _ in 0..count {
                let b = normal.sample(&mut rng);
                for (acc, &(t, tp)) in sums.iter_mut().zip(pairs) {
                    let phase = |amp: f64, x: f64| (amp * (b * x).cos(), -amp * (b * x).sin());
                    let (re, im) = phase(q0 * (-nu * (t + tp)).exp(), t + tp);
                    accumulate(&mut acc[0], re, im);
                    let (re, im) = phase(q0 * (-2.0 * nu * t).exp(), 2.0 * t);
                    accumulate(&mut acc[1], re, im);
                    let (re, im) = phase((-nu * (t - tp)).exp(), t - tp);
                    accumulate(&mut acc[2], re, im);
                }
            }
            sums
        })
        .collect();

    let mut total: BlockSums = vec![[[0.0; 4]; 3]; pairs.len()];
    for block in &blocks {
        for (acc, part) in total.iter_mut().zip(block) {
            for (a, p) in acc.iter_mut().zip(part) {
                for (x, y) in a.iter_mut().zip(p) {
                    *x += y;
                }
            }
        }
    }
    let n = n_samples as f64;
    Ok(pairs
        .iter()
        .zip(total)
        .map(|(&(t, t_prime), sums)| MonteCarloPoint {
            t,
            t_prime,
            two_time: estimate(sums[0], n),
            equal_time: estimate(sums[1], n),
            response: estimate(sums[2], n),
        })
        .collect())
}

/// Largest relative deviation of a solution from the closed forms.
pub fn max_exact_error(params: &OscillatorParams, state: &OscillatorState) -> f64 {
    let times = &state.times;
    (0..state.rows())
        .into_par_iter()
        .map(|m| {
            let t = times.t(m);
            let mut worst = ((state.equal_time(m) - exact_equal_time(params, t)) / exact_equal_time(params, t)).abs();
            for n in 0..=m {
                let tp = times.t(n);
                let q = exact_two_time(params, t, tp);
                let g = exact_response(params, t, tp);
                worst = worst
                    .max(((state.two_time(m, n) - q) / q).abs())
                    .max(((state.response(m, n) - g) / g).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nu: f64, b: f64) -> OscillatorParams {
        OscillatorParams::new(nu, b, 1.0).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let p = params(0.0, 1.0);
        assert!((exact_two_time(&p, 1.0, 0.0) - 0.606531).abs() < 1e-6);
        assert!((exact_equal_time(&p, 1.0) - 0.135335).abs() < 1e-6);
        assert!((exact_response(&p, 2.0, 1.0) - 0.606531).abs() < 1e-6);
        assert_eq!(exact_two_time(&params(0.3, 2.0), 0.0, 0.0), 1.0);
        assert_eq!(exact_response(&params(0.3, 2.0), 1.7, 1.7), 1.0);
        let damped = params(1.0, 0.0);
        assert!((exact_two_time(&damped, 2.0, 1.0) - (-3.0f64).exp()).abs() < 1e-15);
        assert!((exact_response(&damped, 2.0, 0.5) - (-1.5f64).exp()).abs() < 1e-15);
        for t in [0.0, 0.3, 1.9] {
            let p = params(0.2, 0.7);
            assert!((exact_equal_time(&p, t) - exact_two_time(&p, t, t)).abs() <= 1e-15);
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(OscillatorParams::new(-0.1, 1.0, 1.0).is_err());
        assert!(OscillatorParams::new(0.1, -1.0, 1.0).is_err());
        assert!(OscillatorParams::new(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn rget_solve_is_exact() {
        let times = TimeGrid::new(1e-3, 1000).unwrap();
        for p in [params(0.1, 1.0), params(1.0, 0.1)] {
            let s = rget_solve(&p, &times).unwrap();
            assert!(max_exact_error(&p, &s) < 1e-6);
        }
    }

    #[test]
    fn rget_solve_deterministic_limit_is_exponential() {
        let p = params(0.7, 0.0);
        let times = TimeGrid::new(1e-3, 2000).unwrap();
        let s = rget_solve(&p, &times).unwrap();
        assert!(max_exact_error(&p, &s) < 1e-12);
    }

    #[test]
    fn memory_forms_reduce_to_local_forms() {
        let p = params(0.1, 1.0);
        let times = TimeGrid::new(1e-3, 1000).unwrap();
        let s = rget_solve(&p, &times).unwrap();
        assert!(memory_reduction_residual(&p, &s, 20) < 1e-10);
        assert!(constraint_residual(&p, &s, 20) < 1e-8);
    }

    #[test]
    fn dia_short_time_matches_exact() {
        let p = params(0.0, 1.0);
        let times = TimeGrid::new(1e-3, 100).unwrap();
        let g = dia_response(&p, &times).unwrap();
        // both ≈ 0.99501 at τ = 0.1; they separate at O(τ⁴)
        assert!((g[100] - exact_response(&p, 0.1, 0.0)).abs() < 1e-5);
        assert!((g[100] - 0.99501).abs() < 1e-5);
    }

    #[test]
    fn dia_without_noise_is_exact() {
        let p = params(0.4, 0.0);
        let times = TimeGrid::new(5e-3, 100).unwrap();
        let s = dia_solve(&p, &times).unwrap();
        assert!(max_exact_error(&p, &s) < 1e-4);
    }

    #[test]
    fn dia_and_rget_approach_each_other_as_noise_vanishes() {
        let times = TimeGrid::new(1e-2, 100).unwrap();
        let gap = |b: f64| {
            let p = params(0.1, b);
            let dia = dia_solve(&p, &times).unwrap();
            let exact = rget_solve(&p, &times).unwrap();
            (dia.response(100, 0) - exact.response(100, 0)).abs() / exact.response(100, 0)
        };
        let (g1, g2, g3) = (gap(0.4), gap(0.2), gap(0.1));
        assert!(g2 < g1 && g3 < g2);
        assert!(g3 / 0.1 < g1 / 0.4);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_unbiased() {
        let p = params(0.0, 1.0);
        let pairs = [(1.0, 0.0), (1.0, 1.0)];
        let a = monte_carlo_oracle(&p, 20_000, &pairs, 7).unwrap();
        let b = monte_carlo_oracle(&p, 20_000, &pairs, 7).unwrap();
        assert_eq!(a, b);
        let g = a[0].response;
        assert!(g.im.abs() <= 3.0 * g.im_stderr);
        let q = a[1].equal_time;
        assert!((q.re - exact_equal_time(&p, 1.0)).abs() <= 3.0 * q.re_stderr);
    }

    #[test]
    fn monte_carlo_error_scales_as_inverse_root_n() {
        let p = params(0.1, 1.0);
        let pairs = [(0.5, 0.0)];
        let e = |n| monte_carlo_oracle(&p, n, &pairs, 11).unwrap()[0].two_time.re_stderr;
        let ratio = e(40_000) / e(160_000);
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn monte_carlo_rejects_small_ensembles() {
        assert!(monte_carlo_oracle(&params(0.0, 1.0), 10, &[(1.0, 0.0)], 1).is_err());
    }
}
