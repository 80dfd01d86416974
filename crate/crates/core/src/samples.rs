//! Random smooth test data built from a few low Fourier modes.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{sym_count, sym_index, Form, FormBasis, Scalar, SymTensor};
use crate::geometry::Metric;
use crate::grid::Grid;

/// `a0 + Σ a·sin(2π k·x/L + φ)` over the unit modes along each axis and the
/// diagonal modes of neighbouring axes, with amplitudes drawn from
/// `[−amp, amp]`. Periodic axes only.
pub fn random_trig(rng: &mut impl Rng, grid: &Grid, a0: f64, amp: f64) -> Vec<f64> {
    let n = grid.dim();
    let lengths = grid.lengths();
    let mut modes = Vec::new();
    for a in 0..n {
        let mut k = vec![0.0; n];
        k[a] = 1.0;
        modes.push(k.clone());
        if a + 1 < n {
            k[a + 1] = 1.0;
            modes.push(k);
        }
    }
    let terms: Vec<(Vec<f64>, f64, f64)> = modes
        .into_iter()
        .map(|k| (k, rng.gen_range(-amp..=amp), rng.gen_range(0.0..TAU)))
        .collect();
    grid.sample(|x| {
        a0 + terms
            .iter()
            .map(|(k, a, ph)| {
                let arg: f64 = k.iter().zip(x).zip(&lengths).map(|((k, x), l)| k * x / l).sum();
                a * (TAU * arg + ph).sin()
            })
            .sum::<f64>()
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_scalar(rng: &mut impl Rng, grid: &Arc<Grid>, a0: f64, amp: f64) -> Scalar {
    Scalar::new(grid.clone(), random_trig(rng, grid, a0, amp)).expect("sampled on the grid")
}

/// Symmetric tensor with diagonal mean `diag` and perturbations of size `amp`.
pub fn random_sym(rng: &mut impl Rng, grid: &Arc<Grid>, diag: f64, amp: f64) -> SymTensor {
    let d = grid.dim();
    let comps = (0..sym_count(d))
        .map(|c| {
            let on_diag = (0..d).any(|i| sym_index(d, i, i) == c);
            random_trig(rng, grid, if on_diag { diag } else { 0.0 }, amp)
        })
        .collect();
    SymTensor::new(grid.clone(), comps).expect("sampled on the grid")
}

/// Metric `δ + O(amp)`; `amp` well below `1/d` keeps it positive definite.
pub fn random_metric(rng: &mut impl Rng, grid: &Arc<Grid>, amp: f64) -> Result<Metric> {
    Metric::new(random_sym(rng, grid, 1.0, amp))
}

pub fn random_form(rng: &mut impl Rng, grid: &Arc<Grid>, k: usize, a0: f64, amp: f64) -> Result<Form> {
    let comps = (0..FormBasis::new(grid.dim(), k).len()).map(|_| random_trig(rng, grid, a0, amp)).collect();
    Form::new(grid.clone(), k, comps)
}
