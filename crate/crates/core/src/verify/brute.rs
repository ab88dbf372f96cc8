//! Naive loop evaluation of every closure right-hand side.
//!
//! Nothing here goes through [`crate::kernel::TriadTable`], `convolve`, the
//! history helpers or the propagator tables: the kernel, the interpolation
//! of `Q(q)`, the floors and the trapezoid sums are written out again as
//! plain loops over `(p, μ, s)`. Only the grid nodes and weights and the
//! stored fields are shared with the fast path.
//!
//! Each value comes with `gross`, the same sum taken over absolute values,
//! which is the natural scale for relative comparisons of a sum that may
//! cancel.

use std::f64::consts::PI;

use crate::closures::{ClosureKind, ClosureState};
use crate::kernel::{WavenumberGrid, TRANSFER_SIGN};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Naive {
    pub value: f64,
    pub gross: f64,
}

impl Naive {
    fn zero() -> Self {
        Self { value: 0.0, gross: 0.0 }
    }

    fn add(&mut self, term: f64) {
        self.value += term;
        self.gross += term.abs();
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            value: factor * self.value,
            gross: factor.abs() * self.gross,
        }
    }

    /// `|other − value| / gross` (absolute difference when `gross` is zero).
    pub fn relative_gap(&self, other: f64) -> f64 {
        let diff = (other - self.value).abs();
        if self.gross > 0.0 {
            diff / self.gross
        } else {
            diff
        }
    }
}

fn kernel(k: f64, p: f64, mu: f64) -> f64 {
    let q2 = k * k + p * p - 2.0 * k * p * mu;
    (mu * (k * k + p * p) - k * p * (1.0 + 2.0 * mu * mu)) * (1.0 - mu * mu) * k * p / q2
}

/// Log-log linear between positive neighbours, linear otherwise, zero off band.
fn interpolate(grid: &WavenumberGrid, values: &[f64], q: f64) -> f64 {
    let k = grid.k_nodes();
    let n = k.len();
    if q < k[0] || q > k[n - 1] {
        return 0.0;
    }
    for i in 0..n {
        if q == k[i] {
            return values[i];
        }
    }
    let mut i = 0;
    while k[i + 1] < q {
        i += 1;
    }
    let (a, b) = (values[i], values[i + 1]);
    if a > 0.0 && b > 0.0 {
        let t = (q.ln() - k[i].ln()) / (k[i + 1].ln() - k[i].ln());
        (a.ln() * (1.0 - t) + b.ln() * t).exp()
    } else {
        let t = (q - k[i]) / (k[i + 1] - k[i]);
        a * (1.0 - t) + b * t
    }
}

fn trapezoid(s: usize, from: usize, to: usize, dt: f64) -> f64 {
    if from == to {
        0.0
    } else if s == from || s == to {
        0.5 * dt
    } else {
        dt
    }
}

fn floored(numerator: f64, denominator: f64, floor: f64) -> f64 {
    if denominator.abs() >= floor {
        numerator / denominator
    } else if denominator < 0.0 {
        -numerator / floor
    } else {
        numerator / floor
    }
}

struct View<'a> {
    state: &'a ClosureState,
    grid: &'a WavenumberGrid,
    dt: f64,
    eps: f64,
}

impl<'a> View<'a> {
    fn new(state: &'a ClosureState) -> Self {
        Self {
            state,
            grid: state.grid(),
            dt: state.times().dt(),
            eps: state.settings().eps_floor,
        }
    }

    fn n_k(&self) -> usize {
        self.grid.n_k()
    }

    fn q(&self, k: usize, a: usize, b: usize) -> f64 {
        self.state.q().get(k, a, b)
    }

    fn q_column(&self, a: usize, b: usize) -> Vec<f64> {
        (0..self.n_k()).map(|k| self.q(k, a, b)).collect()
    }

    fn diag_max(&self, a: usize) -> f64 {
        let m = (0..self.n_k()).map(|k| self.q(k, a, a).abs()).fold(0.0, f64::max);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    /// `H(k; t_a, t_b)`, `a ≥ b`, for DIA, LET or VLET.
    fn h(&self, k: usize, a: usize, b: usize) -> f64 {
        if a == b {
            return 1.0;
        }
        match self.state.kind() {
            ClosureKind::Dia => self.state.h().expect("DIA carries H").get(k, a, b),
            ClosureKind::Let => floored(self.q(k, a, b), self.q(k, b, b), self.eps * self.diag_max(b)),
            ClosureKind::Vlet => floored(self.q(k, a, a), self.q(k, a, b), self.eps * self.diag_max(a)),
            ClosureKind::Rget => unreachable!("RGET has no propagator"),
        }
    }

    fn g(&self, k: usize, a: usize, b: usize) -> f64 {
        self.state.g().expect("RGET response tracked").get(k, a, b)
    }

    /// `1 / Q(p; t_a, t_b)` with the RGET floor.
    fn recip_q(&self, p: usize, a: usize, b: usize) -> f64 {
        let scale = (self.q(p, a, a) * self.q(p, b, b)).abs().sqrt();
        let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        floored(1.0, self.q(p, a, b), self.eps * scale)
    }

    /// `Σ_p Σ_μ 2π w_p p² w_μ σL f(i, q)` with the integrand evaluated fresh
    /// at every node.
    fn shell_sum(&self, k_index: usize, mut f: impl FnMut(usize, f64) -> Naive) -> Naive {
        let k = self.grid.k(k_index);
        let mut out = Naive::zero();
        for (i, (&p, &w_p)) in self.grid.k_nodes().iter().zip(self.grid.k_weights()).enumerate() {
            for (&mu, &w_mu) in self.grid.mu_nodes().iter().zip(self.grid.mu_weights()) {
                let q = (k * k + p * p - 2.0 * k * p * mu).sqrt();
                let weight = 2.0 * PI * w_p * p * p * w_mu * TRANSFER_SIGN * kernel(k, p, mu);
                let inner = f(i, q);
                out.value += weight * inner.value;
                out.gross += weight.abs() * inner.gross;
            }
        }
        out
    }
}

/// `P(k; t_m, t_n)` for DIA, LET and VLET.
pub fn transfer(state: &ClosureState, k: usize, m: usize, n: usize) -> Naive {
    let v = View::new(state);
    v.shell_sum(k, |i, q| {
        let mut acc = Naive::zero();
        for s in 0..=n {
            let qq = interpolate(v.grid, &v.q_column(m, s), q);
            acc.add(trapezoid(s, 0, n, v.dt) * v.h(k, n, s) * v.q(i, m, s) * qq);
        }
        for s in 0..=m {
            let qq = interpolate(v.grid, &v.q_column(m, s), q);
            acc.add(-trapezoid(s, 0, m, v.dt) * v.h(i, m, s) * v.q(k, n, s) * qq);
        }
        acc
    })
}

/// Memory term of the DIA response equation.
pub fn dia_response(state: &ClosureState, k: usize, m: usize, n: usize) -> Naive {
    let v = View::new(state);
    v.shell_sum(k, |i, q| {
        let mut acc = Naive::zero();
        for s in n..=m {
            let qq = interpolate(v.grid, &v.q_column(m, s), q);
            acc.add(-trapezoid(s, n, m, v.dt) * v.h(k, s, n) * v.h(i, m, s) * qq);
        }
        acc
    })
}

/// RGET two-time right-hand side.
pub fn rget_two_time(state: &ClosureState, k: usize, m: usize, n: usize) -> Naive {
    let v = View::new(state);
    v.shell_sum(k, |i, q| {
        let mut acc = Naive::zero();
        for s in 0..=m {
            let qq = interpolate(v.grid, &v.q_column(m, s), q);
            acc.add(-v.q(i, m, n) * trapezoid(s, 0, m, v.dt) * v.q(k, n, s) * qq * v.recip_q(i, s, n));
        }
        for s in 0..=n {
            let qq = interpolate(v.grid, &v.q_column(m, s), q);
            acc.add(v.q(k, m, n) * trapezoid(s, 0, n, v.dt) * v.q(i, m, s) * qq * v.recip_q(k, m, s));
        }
        acc
    })
}

/// RGET equal-time right-hand side.
pub fn rget_equal_time(state: &ClosureState, k: usize, m: usize) -> Naive {
    let v = View::new(state);
    v.shell_sum(k, |i, q| {
        let mut acc = Naive::zero();
        for s in 0..=m {
            let qq = interpolate(v.grid, &v.q_column(m, s), q);
            let w = trapezoid(s, 0, m, v.dt);
            acc.add(-2.0 * v.q(i, m, m) * w * v.q(k, m, s) * qq * v.recip_q(i, m, s));
            acc.add(2.0 * v.q(k, m, m) * w * v.q(i, m, s) * qq * v.recip_q(k, m, s));
        }
        acc
    })
}

/// Memory term of the RGET response equation.
pub fn rget_response(state: &ClosureState, k: usize, m: usize, n: usize) -> Naive {
    let v = View::new(state);
    v.shell_sum(k, |i, q| {
        let mut acc = Naive::zero();
        for s in n..=m {
            let qq = interpolate(v.grid, &v.q_column(m, s), q);
            let ratio = floored(v.g(k, s, n), v.g(i, s, n), v.eps);
            acc.add(-v.g(i, m, n) * trapezoid(s, n, m, v.dt) * ratio * qq);
        }
        acc
    })
}

/// Equal-time right-hand side of the active closure (`2P` or the RGET form).
pub fn equal_time(state: &ClosureState, k: usize, m: usize) -> Naive {
    match state.kind() {
        ClosureKind::Rget => rget_equal_time(state, k, m),
        _ => transfer(state, k, m, m).scaled(2.0),
    }
}

/// Two-time right-hand side of the active closure.
pub fn two_time(state: &ClosureState, k: usize, m: usize, n: usize) -> Naive {
    match state.kind() {
        ClosureKind::Rget => rget_two_time(state, k, m, n),
        _ => transfer(state, k, m, n),
    }
}

/// Response memory term of the active closure, if it evolves one.
pub fn response(state: &ClosureState, k: usize, m: usize, n: usize) -> Option<Naive> {
    match state.kind() {
        ClosureKind::Dia => Some(dia_response(state, k, m, n)),
        ClosureKind::Rget if state.g().is_some() => Some(rget_response(state, k, m, n)),
        _ => None,
    }
}
