#![allow(dead_code)]

use std::f64::consts::TAU;
use std::sync::Arc;

use gerbeflow::Grid;

pub fn torus(n: usize, points: usize) -> Arc<Grid> {
    Arc::new(Grid::unit_torus(n, points).unwrap())
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Max deviation of `a` from `f` sampled on `grid`.
pub fn err_vs(grid: &Grid, a: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    max_diff(a, &grid.sample(f))
}

/// Observed order between consecutive levels of a doubling study.
pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

pub fn s(k: f64, x: f64) -> f64 {
    (TAU * k * x).sin()
}

pub fn c(k: f64, x: f64) -> f64 {
    (TAU * k * x).cos()
}

pub mod homogeneous;
