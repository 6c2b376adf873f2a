//! Densities sampled on a uniform grid, with trapezoidal quadrature and a
//! plain `x,p` CSV form.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::{ClassifyError, FailureKind};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("grid needs at least two nodes, got {0}")]
    TooShort(usize),
    #[error("non-finite density value at node {0}")]
    NonFinite(usize),
    #[error("grids are incompatible: {0}")]
    Incompatible(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ClassifyError for GridError {
    fn failure_kind(&self) -> FailureKind {
        match self {
            GridError::Io { .. } => FailureKind::Io,
            _ => FailureKind::Validation,
        }
    }
}

/// A density (or any scalar field) sampled on the uniform grid
/// `x_i = x0 + i·dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    x0: f64,
    dx: f64,
    p: Vec<f64>,
}

impl GridDensity {
    pub fn new(x0: f64, dx: f64, p: Vec<f64>) -> Result<Self, GridError> {
        if !(dx > 0.0) || !dx.is_finite() || !x0.is_finite() {
            return Err(GridError::BadStep(dx));
        }
        if p.len() < 2 {
            return Err(GridError::TooShort(p.len()));
        }
        if let Some(i) = p.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(GridDensity { x0, dx, p })
    }

    /// Tabulates `f` on `n` nodes starting at `x0`.
    pub fn from_fn<F: Fn(f64) -> f64>(x0: f64, dx: f64, n: usize, f: F) -> Result<Self, GridError> {
        let p = (0..n).map(|i| f(x0 + i as f64 * dx)).collect();
        GridDensity::new(x0, dx, p)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least two nodes
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.p.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.p
    }

    /// Trapezoidal integral over the whole grid.
    pub fn integral(&self) -> f64 {
        let inner: f64 = self.p[1..self.p.len() - 1].iter().sum();
        self.dx * (0.5 * (self.p[0] + self.p[self.p.len() - 1]) + inner)
    }

    /// Trapezoidal first moment (not normalization-checked).
    pub fn raw_mean(&self) -> f64 {
        self.weighted_integral(|x| x)
    }

    /// Trapezoidal second central moment around `raw_mean` (not
    /// normalization-checked).
    pub fn raw_variance(&self) -> f64 {
        let m = self.raw_mean();
        self.weighted_integral(|x| (x - m) * (x - m))
    }

    fn weighted_integral<F: Fn(f64) -> f64>(&self, w: F) -> f64 {
        let n = self.p.len();
        let mut acc = 0.5 * (w(self.x(0)) * self.p[0] + w(self.x(n - 1)) * self.p[n - 1]);
        for i in 1..n - 1 {
            acc += w(self.x(i)) * self.p[i];
        }
        acc * self.dx
    }

    /// Scales the density to unit trapezoidal mass and returns the mass it had
    /// before scaling. Values are clamped at zero first (transport schemes can
    /// leave harmless negative dust in the last digits).
    pub fn normalize(&mut self) -> f64 {
        for v in &mut self.p {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mass = self.integral();
        if mass > 0.0 && mass.is_finite() {
            for v in &mut self.p {
                *v /= mass;
            }
        }
        mass
    }

    fn same_grid(&self, other: &GridDensity) -> Result<(), GridError> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        if self.p.len() != other.p.len() || !close(self.x0, other.x0) || !close(self.dx, other.dx) {
            return Err(GridError::Incompatible(format!(
                "({} nodes from {} step {}) vs ({} nodes from {} step {})",
                self.p.len(),
                self.x0,
                self.dx,
                other.p.len(),
                other.x0,
                other.dx
            )));
        }
        Ok(())
    }

    /// L¹ distance between two densities on the same grid.
    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64, GridError> {
        self.same_grid(other)?;
        let diff: Vec<f64> = self
            .p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .collect();
        // Trapezoid on |difference|.
        let inner: f64 = diff[1..diff.len() - 1].iter().sum();
        Ok(self.dx * (0.5 * (diff[0] + diff[diff.len() - 1]) + inner))
    }

    /// Writes the grid as CSV with header `x,p`.
    pub fn write_csv(&self, path: &Path) -> Result<(), GridError> {
        let mut out = String::from("x,p\n");
        for (i, v) in self.p.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.x(i), v));
        }
        write_file(path, out.as_bytes())
    }

    /// Reads a density from `x,p` CSV; the x column must form a uniform,
    /// strictly increasing grid.
    pub fn read_csv(path: &Path) -> Result<Self, GridError> {
        let text = fs::read_to_string(path).map_err(|source| GridError::Io {
            action: "read",
            path: path.display().to_string(),
            source,
        })?;
        let parse_err = |line: usize, message: String| GridError::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "x,p" => {}
            Some((_, h)) => return Err(parse_err(1, format!("expected header 'x,p', got '{h}'"))),
            None => return Err(parse_err(1, "empty file".into())),
        }
        let mut xs = Vec::new();
        let mut ps = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (xs_str, ps_str) = line
                .split_once(',')
                .ok_or_else(|| parse_err(lineno, "expected two comma-separated fields".into()))?;
            let x: f64 = xs_str
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad x value '{xs_str}'")))?;
            let p: f64 = ps_str
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad p value '{ps_str}'")))?;
            xs.push(x);
            ps.push(p);
        }
        if xs.len() < 2 {
            return Err(GridError::TooShort(xs.len()));
        }
        let dx = xs[1] - xs[0];
        for w in xs.windows(2) {
            if ((w[1] - w[0]) - dx).abs() > 1e-9 * (1.0 + dx.abs()) {
                return Err(GridError::Incompatible(
                    "x column is not a uniform increasing grid".into(),
                ));
            }
        }
        GridDensity::new(xs[0], dx, ps)
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), GridError> {
    let mut f = fs::File::create(path).map_err(|source| GridError::Io {
        action: "create",
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(bytes).map_err(|source| GridError::Io {
        action: "write",
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_integral_is_exact_for_linear_functions() {
        let g = GridDensity::from_fn(0.0, 0.25, 9, |x| 3.0 * x + 1.0).unwrap();
        // ∫₀² (3x+1) dx = 8
        assert!((g.integral() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn moments_of_a_symmetric_hat_are_centered() {
        let g = GridDensity::from_fn(-1.0, 0.001, 2001, |x| (1.0 - x.abs()).max(0.0)).unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-6);
        assert!(g.raw_mean().abs() < 1e-12);
        // Var of the triangular density on [-1,1] is 1/6.
        assert!((g.raw_variance() - 1.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn normalize_reports_previous_mass() {
        let mut g = GridDensity::new(0.0, 1.0, vec![2.0, 2.0, 2.0]).unwrap();
        let before = g.normalize();
        assert!((before - 4.0).abs() < 1e-15);
        assert!((g.integral() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_grids() {
        assert!(GridDensity::new(0.0, 0.0, vec![1.0, 1.0]).is_err());
        assert!(GridDensity::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(GridDensity::new(0.0, 1.0, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_grid_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("density.csv");
        let g = GridDensity::from_fn(0.5, 0.125, 17, |x| (-x).exp()).unwrap();
        g.write_csv(&path).unwrap();
        let back = GridDensity::read_csv(&path).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn csv_parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,p\n0.0,1.0\noops,2.0\n").unwrap();
        match GridDensity::read_csv(&path) {
            Err(GridError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn l1_distance_requires_matching_grids() {
        let a = GridDensity::new(0.0, 1.0, vec![1.0, 1.0]).unwrap();
        let b = GridDensity::new(0.0, 0.5, vec![1.0, 1.0]).unwrap();
        assert!(a.l1_distance(&b).is_err());
    }
}
