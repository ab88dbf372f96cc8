//! Two-time functions on a uniform time grid.
//!
//! A [`TwoTimeField`] stores `V(k; t_m, t_n)` for `n ≤ m` as a packed lower
//! triangle. Cell `(m, n)` holds one value per wavenumber node, contiguous in
//! `k`, so that the spectral slice `V(·; t_m, t_n)` used by the convolutions
//! is a plain slice.

use crate::error::{ConfigError, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ConfigError::new("dt", "must be finite and > 0").into());
        }
        if n_steps < 1 {
            return Err(ConfigError::new("n_steps", "must be at least 1").into());
        }
        Ok(Self { dt, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Symmetric in its two times; `(m, n)` and `(n, m)` share a cell.
    Correlation,
    /// Defined for `m ≥ n` only, with a unit diagonal.
    Response,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimeField {
    kind: FieldKind,
    n_k: usize,
    rows: usize,
    data: Vec<f64>,
}

#[inline]
fn cell(m: usize, n: usize) -> usize {
    m * (m + 1) / 2 + n
}

impl TwoTimeField {
    pub fn new(kind: FieldKind, n_k: usize) -> Self {
        Self {
            kind,
            n_k,
            rows: 0,
            data: Vec::new(),
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn n_k(&self) -> usize {
        self.n_k
    }

    /// Number of committed time rows; the latest time index is `rows() - 1`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn stored_cells(&self) -> usize {
        self.data.len()
    }

    fn check(&self, k_index: usize, m: usize, n: usize) -> Result<()> {
        if k_index >= self.n_k || m.max(n) >= self.rows {
            return Err(Error::Contract(format!(
                "index (k={k_index}, m={m}, n={n}) outside field with {} rows and {} wavenumbers",
                self.rows, self.n_k
            )));
        }
        if self.kind == FieldKind::Response && m < n {
            return Err(Error::Contract(format!(
                "response function queried backwards in time (m={m} < n={n})"
            )));
        }
        Ok(())
    }

    /// Checked lookup honoring the symmetry rule of the field kind.
    pub fn query(&self, k_index: usize, m: usize, n: usize) -> Result<f64> {
        self.check(k_index, m, n)?;
        Ok(self.get(k_index, m, n))
    }

    /// Unchecked lookup; correlations are symmetrized, responses must have
    /// `m ≥ n`.
    #[inline]
    pub fn get(&self, k_index: usize, m: usize, n: usize) -> f64 {
        let (a, b) = if m >= n { (m, n) } else { (n, m) };
        debug_assert!(self.kind == FieldKind::Correlation || m >= n);
        self.data[cell(a, b) * self.n_k + k_index]
    }

    /// The spectral slice `V(·; t_m, t_n)`.
    #[inline]
    pub fn slice(&self, m: usize, n: usize) -> &[f64] {
        let (a, b) = if m >= n { (m, n) } else { (n, m) };
        let start = cell(a, b) * self.n_k;
        &self.data[start..start + self.n_k]
    }

    /// Appends row `M + 1` given as `values[n * n_k + k]` for `n ≤ M + 1`.
    ///
    /// Response rows must carry an exact unit diagonal.
    pub fn push_row(&mut self, values: &[f64]) -> Result<()> {
        let m = self.rows;
        if values.len() != (m + 1) * self.n_k {
            return Err(Error::Contract(format!(
                "row {m} needs {} values, got {}",
                (m + 1) * self.n_k,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                k_index: pos % self.n_k,
                m,
                n: pos / self.n_k,
            });
        }
        if self.kind == FieldKind::Response {
            let diagonal = &values[m * self.n_k..];
            if diagonal.iter().any(|&v| v != 1.0) {
                return Err(Error::Contract(format!(
                    "response row {m} must have a unit diagonal"
                )));
            }
        }
        self.data.extend_from_slice(values);
        self.rows += 1;
        Ok(())
    }

    /// Removes the latest row (used to discard a predictor stage).
    pub fn pop_row(&mut self) {
        if self.rows == 0 {
            return;
        }
        self.rows -= 1;
        self.data.truncate(cell(self.rows, 0) * self.n_k);
    }

    /// Equal-time values `V(·; t_m, t_m)`.
    pub fn diagonal(&self, m: usize) -> &[f64] {
        self.slice(m, m)
    }
}

/// Trapezoid weight of node `s` in `∫_{t_from}^{t_to} ds` on a uniform grid.
#[inline]
pub fn trapezoid_weight(s: usize, from: usize, to: usize, dt: f64) -> f64 {
    if from == to || s < from || s > to {
        0.0
    } else if s == from || s == to {
        0.5 * dt
    } else {
        dt
    }
}

/// Trapezoidal `∫_{t_from}^{t_to} f(s) ds` over the grid nodes `s`.
pub fn time_integral<F>(from: usize, to: usize, dt: f64, mut integrand: F) -> f64
where
    F: FnMut(usize) -> f64,
{
    if to <= from {
        return 0.0;
    }
    let interior: f64 = (from + 1..to).map(&mut integrand).sum();
    dt * (0.5 * (integrand(from) + integrand(to)) + interior)
}

/// Fallible variant of [`time_integral`].
pub fn try_time_integral<F>(from: usize, to: usize, dt: f64, mut integrand: F) -> Result<f64>
where
    F: FnMut(usize) -> Result<f64>,
{
    if to <= from {
        return Ok(0.0);
    }
    let mut interior = 0.0;
    for s in from + 1..to {
        interior += integrand(s)?;
    }
    Ok(dt * (0.5 * (integrand(from)? + integrand(to)?) + interior))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn filled(kind: FieldKind, n_k: usize, rows: usize) -> TwoTimeField {
        let mut field = TwoTimeField::new(kind, n_k);
        for m in 0..rows {
            let row: Vec<f64> = (0..=m)
                .flat_map(|n| {
                    (0..n_k).map(move |k| {
                        if kind == FieldKind::Response && n == m {
                            1.0
                        } else {
                            (k + 1) as f64 * 0.5 + m as f64 * 0.01 - n as f64 * 0.003
                        }
                    })
                })
                .collect();
            field.push_row(&row).unwrap();
        }
        field
    }

    #[test]
    fn correlation_is_symmetric() {
        let field = filled(FieldKind::Correlation, 3, 6);
        assert_eq!(field.query(1, 3, 5).unwrap(), field.query(1, 5, 3).unwrap());
    }

    #[test]
    fn response_unit_diagonal_and_forward_only() {
        let field = filled(FieldKind::Response, 3, 6);
        assert_eq!(field.query(2, 4, 4).unwrap(), 1.0);
        assert!(matches!(field.query(0, 2, 5), Err(Error::Contract(_))));
    }

    #[test]
    fn response_rejects_non_unit_diagonal() {
        let mut field = TwoTimeField::new(FieldKind::Response, 2);
        assert!(field.push_row(&[1.0, 0.5]).is_err());
        assert!(field.push_row(&[1.0, 1.0]).is_ok());
    }

    #[test]
    fn non_finite_row_reports_location() {
        let mut field = TwoTimeField::new(FieldKind::Correlation, 2);
        field.push_row(&[1.0, 1.0]).unwrap();
        let err = field.push_row(&[1.0, 1.0, 1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Blowup { k_index: 1, m: 1, n: 1 }));
        assert_eq!(field.rows(), 1);
    }

    #[test]
    fn storage_is_triangular() {
        for rows in 1..10 {
            let field = filled(FieldKind::Correlation, 4, rows);
            assert_eq!(field.stored_cells(), 4 * rows * (rows + 1) / 2);
        }
    }

    #[test]
    fn pop_row_restores_previous_state() {
        let mut field = filled(FieldKind::Correlation, 2, 4);
        let before = field.clone();
        field.push_row(&[0.0; 10]).unwrap();
        field.pop_row();
        assert_eq!(field, before);
    }

    #[test]
    fn trapezoid_examples() {
        assert_eq!(time_integral(3, 3, 0.1, |_| 1.0), 0.0);
        let dt = 0.25;
        assert_eq!(time_integral(0, 8, dt, |_| 2.0), 2.0 * 8.0 * dt);
        assert_eq!(time_integral(0, 4, dt, |s| s as f64 * dt), 0.5);
    }

    #[test]
    fn trapezoid_second_order_on_quadratic() {
        let exact = 1.0 / 3.0;
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            (time_integral(0, n, dt, |s| (s as f64 * dt).powi(2)) - exact).abs()
        };
        let order = (err(16) / err(32)).log2();
        assert!(order > 1.95 && order < 2.05, "order {order}");
    }

    #[test]
    fn trapezoid_weights_agree_with_integral() {
        let dt = 0.3;
        let f = |s: usize| (s as f64).sin();
        let direct = time_integral(2, 9, dt, f);
        let weighted: f64 = (0..12).map(|s| trapezoid_weight(s, 2, 9, dt) * f(s)).sum();
        assert!((direct - weighted).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn symmetrized_matrix_equals_transpose(rows in 1usize..12, k in 0usize..3) {
            let field = filled(FieldKind::Correlation, 3, rows);
            for m in 0..rows {
                for n in 0..rows {
                    prop_assert_eq!(field.get(k, m, n).to_bits(), field.get(k, n, m).to_bits());
                }
            }
        }
    }
}
