//! Structured grids on flat tori `T^n` and on cylinders `I × T^n`.
//!
//! Points are stored row-major: axis 0 varies slowest. On a cylinder the
//! open τ-axis is axis 0, so each constant-τ slice is a contiguous block.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Points per parallel work chunk in the derivative kernel.
const PAR_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum Axis {
    Periodic { points: usize, length: f64 },
    Open { points: usize, start: f64, step: f64 },
}

impl Axis {
    pub fn points(&self) -> usize {
        match *self {
            Axis::Periodic { points, .. } | Axis::Open { points, .. } => points,
        }
    }

    pub fn spacing(&self) -> f64 {
        match *self {
            Axis::Periodic { points, length } => length / points as f64,
            Axis::Open { step, .. } => step,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        match *self {
            Axis::Periodic { .. } => i as f64 * self.spacing(),
            Axis::Open { start, step, .. } => start + i as f64 * step,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Axis::Periodic { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    /// Periodic grid on the torus with the given points and periods per axis.
    pub fn torus(shape: &[usize], lengths: &[f64]) -> Result<Grid> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::InvalidGrid(format!(
                "torus dimension must be 1, 2 or 3, got {}",
                shape.len()
            )));
        }
        if shape.len() != lengths.len() {
            return Err(Error::InvalidGrid(format!(
                "{} shape entries but {} lengths",
                shape.len(),
                lengths.len()
            )));
        }
        let mut axes = Vec::with_capacity(shape.len());
        for (a, (&points, &length)) in shape.iter().zip(lengths).enumerate() {
            if points < 8 || points % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has {points} points; need an even count >= 8"
                )));
            }
            if !(length.is_finite() && length > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has non-positive length {length}"
                )));
            }
            axes.push(Axis::Periodic { points, length });
        }
        Ok(Grid { axes })
    }

    /// `n`-torus of unit periods with `points` samples per axis.
    pub fn unit_torus(n: usize, points: usize) -> Result<Grid> {
        Grid::torus(&vec![points; n], &vec![1.0; n])
    }

    /// Cylinder `I × Σ` with the open τ-axis prepended as axis 0.
    pub fn cylinder(spatial: &Grid, start: f64, step: f64, count: usize) -> Result<Grid> {
        if spatial.tau_axis().is_some() {
            return Err(Error::InvalidGrid("spatial factor is already a cylinder".into()));
        }
        if count < 9 {
            return Err(Error::InvalidGrid(format!(
                "τ-axis needs at least 9 samples, got {count}"
            )));
        }
        if !(step.is_finite() && step > 0.0 && start.is_finite()) {
            return Err(Error::InvalidGrid(format!("bad τ-axis start {start}, step {step}")));
        }
        let mut axes = vec![Axis::Open { points: count, start, step }];
        axes.extend(spatial.axes.iter().cloned());
        Ok(Grid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::points).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a].spacing()
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes
            .iter()
            .filter(|ax| ax.is_periodic())
            .map(Axis::spacing)
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the open τ-axis, if this is a cylinder.
    pub fn tau_axis(&self) -> Option<usize> {
        self.axes.iter().position(|ax| !ax.is_periodic())
    }

    /// The periodic factor; the grid itself for a torus.
    pub fn spatial(&self) -> Grid {
        Grid {
            axes: self.axes.iter().filter(|ax| ax.is_periodic()).cloned().collect(),
        }
    }

    /// Periods of the periodic axes.
    pub fn lengths(&self) -> Vec<f64> {
        self.axes
            .iter()
            .filter_map(|ax| match *ax {
                Axis::Periodic { length, .. } => Some(length),
                Axis::Open { .. } => None,
            })
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    pub fn stride(&self, a: usize) -> usize {
        self.axes[a + 1..].iter().map(Axis::points).product()
    }

    /// Multi-index of a flat point index.
    pub fn unravel(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            let m = self.axes[a].points();
            idx[a] = p % m;
            p /= m;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, ax)| acc * ax.points() + i)
    }

    /// Samples `f(x)` at every grid point; `x` has one coordinate per axis.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        (0..self.len())
            .map(|p| {
                for (a, i) in self.unravel(p).into_iter().enumerate() {
                    x[a] = self.axes[a].coord(i);
                }
                f(&x)
            })
            .collect()
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.dim() {
            Ok(())
        } else {
            Err(Error::AxisOutOfRange { axis, dim: self.dim() })
        }
    }

    /// Fourth-order finite-difference derivative of raw point data along `axis`.
    ///
    /// Centered stencil with periodic wrap; on an open axis the first and
    /// last two layers use one-sided fourth-order stencils. Constant data
    /// differentiates to exactly zero.
    pub fn diff(&self, data: &[f64], axis: usize) -> Vec<f64> {
        debug_assert_eq!(data.len(), self.len());
        let m = self.axes[axis].points();
        let s = self.stride(axis);
        let block = m * s;
        let inv = 1.0 / (12.0 * self.axes[axis].spacing());
        let periodic = self.axes[axis].is_periodic();
        let mut out = vec![0.0; data.len()];
        let chunk = (PAR_CHUNK / block).max(1) * block;
        out.par_chunks_mut(chunk)
            .zip(data.par_chunks(chunk))
            .for_each(|(o, f)| {
                for (ob, fb) in o.chunks_mut(block).zip(f.chunks(block)) {
                    if periodic {
                        diff_periodic(fb, ob, m, s, inv);
                    } else {
                        diff_open(fb, ob, m, s, inv);
                    }
                }
            });
        out
    }

    /// Rectangle-rule integral of point data, summed in storage order.
    pub fn integrate(&self, data: &[f64]) -> f64 {
        let cell: f64 = self.axes.iter().map(Axis::spacing).product();
        data.iter().sum::<f64>() * cell
    }
}

fn diff_periodic(f: &[f64], out: &mut [f64], m: usize, s: usize, inv: f64) {
    for i in 0..m {
        let ip1 = (i + 1) % m;
        let ip2 = (i + 2) % m;
        let im1 = (i + m - 1) % m;
        let im2 = (i + m - 2) % m;
        let (o, a1, b1, a2, b2) = (i * s, ip1 * s, im1 * s, ip2 * s, im2 * s);
        for k in 0..s {
            out[o + k] = (8.0 * (f[a1 + k] - f[b1 + k]) - (f[a2 + k] - f[b2 + k])) * inv;
        }
    }
}

// One-sided weights (times 12Δ) for the first two layers; the last two
// layers use the mirrored weights with opposite sign.
const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

fn diff_open(f: &[f64], out: &mut [f64], m: usize, s: usize, inv: f64) {
    for i in 2..m - 2 {
        let o = i * s;
        for k in 0..s {
            let a1 = f[o + s + k] - f[o - s + k];
            let a2 = f[o + 2 * s + k] - f[o - 2 * s + k];
            out[o + k] = (8.0 * a1 - a2) * inv;
        }
    }
    for (row, w) in [(0usize, &EDGE0), (1, &EDGE1)] {
        for k in 0..s {
            let lo: f64 = (0..5).map(|j| w[j] * f[j * s + k]).sum();
            let hi: f64 = (0..5).map(|j| w[j] * f[(m - 1 - j) * s + k]).sum();
            out[row * s + k] = lo * inv;
            out[(m - 1 - row) * s + k] = -hi * inv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::torus(&[6], &[1.0]).is_err());
        assert!(Grid::torus(&[9], &[1.0]).is_err());
        assert!(Grid::torus(&[8], &[0.0]).is_err());
        assert!(Grid::torus(&[8, 8, 8, 8], &[1.0; 4]).is_err());
        let g = Grid::unit_torus(2, 8).unwrap();
        assert!(Grid::cylinder(&g, 0.0, 0.1, 8).is_err());
        assert!(Grid::cylinder(&g, 0.0, 0.1, 9).is_ok());
    }

    #[test]
    fn spacing_times_points_is_length() {
        let g = Grid::torus(&[10, 12], &[0.7, 3.0]).unwrap();
        assert_eq!(g.spacing(0) * 10.0, 0.7);
        assert_eq!(g.spacing(1) * 12.0, 3.0);
    }

    #[test]
    fn ravel_roundtrip() {
        let g = Grid::torus(&[8, 10, 12], &[1.0; 3]).unwrap();
        for p in [0, 7, 123, g.len() - 1] {
            assert_eq!(g.ravel(&g.unravel(p)), p);
        }
    }

    #[test]
    fn open_axis_is_exact_on_quartics() {
        let g = Grid::cylinder(&Grid::unit_torus(1, 8).unwrap(), 0.3, 0.05, 11).unwrap();
        let f = g.sample(|x| 1.0 + x[0] - 2.0 * x[0].powi(2) + x[0].powi(3) + 0.5 * x[0].powi(4));
        let df = g.diff(&f, 0);
        let exact = g.sample(|x| 1.0 - 4.0 * x[0] + 3.0 * x[0].powi(2) + 2.0 * x[0].powi(3));
        for (a, b) in df.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn periodic_derivative_of_sine() {
        let g = Grid::unit_torus(1, 64).unwrap();
        let f = g.sample(|x| (2.0 * PI * x[0]).sin());
        let df = g.diff(&f, 0);
        let err = g
            .sample(|x| 2.0 * PI * (2.0 * PI * x[0]).cos())
            .iter()
            .zip(&df)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4);
    }
}
