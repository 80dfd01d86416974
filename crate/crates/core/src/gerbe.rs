//! Flux-level gerbe data on `T³`: the class `m` through the harmonic flux
//! `(2πm/vol)·vol`, curvings `θ` modulo closed 2-forms with `2πZ` periods,
//! and the closure relations of a τ-family of fluxes.

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Form, Scalar};
use crate::geometry::{codifferential, Metric};
use crate::grid::Grid;
use crate::soliton::check_closed;
use crate::solver::conjugate_gradient;

/// Distance from `2πZ` tolerated for the periods of a gauge parameter.
pub const PERIOD_TOL: f64 = 1e-8;

/// Dixmier–Douady class `m` with its harmonic representative.
#[derive(Clone, Debug)]
pub struct FluxData {
    pub m: i64,
    pub h0: Form,
    pub vol: f64,
}

impl FluxData {
    pub fn new(m: i64, grid: &Arc<Grid>) -> Result<FluxData> {
        let h0 = flux_representative(m, grid)?
            .ok_or_else(|| Error::Unsupported("curvings with flux live on a 3-torus".into()))?;
        Ok(FluxData { m, h0, vol: grid.volume() })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.h0.grid()
    }
}

/// `(2πm/vol)·dx∧dy∧dz` on a 3-torus; `None` on lower-dimensional tori,
/// which carry no 3-forms and hence only the class `m = 0`.
pub fn flux_representative(m: i64, grid: &Arc<Grid>) -> Result<Option<Form>> {
    match grid.dim() {
        3 => {
            let value = TAU * m as f64 / grid.volume();
            Ok(Some(Form::new(grid.clone(), 3, vec![vec![value; grid.len()]])?))
        }
        d if d < 3 && m == 0 => Ok(None),
        d => Err(Error::Unsupported(format!("a flux with class {m} needs a 3-torus, got dimension {d}"))),
    }
}

/// `(round(P/2π), |P − 2π·round(P/2π)|)` for the period `P` of a closed
/// 3-form over the fundamental 3-cycle.
pub fn quantization_check(h: &Form) -> Result<(i64, f64)> {
    if h.grid().dim() != 3 {
        return Err(Error::Unsupported("quantization is checked on a 3-torus".into()));
    }
    h.expect_degree(3)?;
    check_closed(h, "H")?;
    let period = h.fundamental_period(&[0, 1, 2])?;
    let k = (period / TAU).round();
    Ok((k as i64, (period - TAU * k).abs()))
}

/// A curving up to its flux class: curvature `H = H0 + dθ`.
#[derive(Clone, Debug)]
pub struct CurvingRep {
    pub theta: Form,
    pub flux: FluxData,
}

impl CurvingRep {
    pub fn new(theta: Form, flux: FluxData) -> Result<CurvingRep> {
        theta.expect_degree(2)?;
        theta.check_same_grid(flux.grid())?;
        Ok(CurvingRep { theta, flux })
    }

    pub fn curvature(&self) -> Result<Form> {
        Ok(&self.flux.h0 + &self.theta.exterior_derivative()?)
    }

    /// Periods of `θ` over every coordinate 2-torus, keyed by axis pair.
    pub fn plaquette_periods(&self) -> Result<Vec<((usize, usize), f64)>> {
        plaquette_periods(&self.theta)
    }
}

fn plaquette_periods(f: &Form) -> Result<Vec<((usize, usize), f64)>> {
    f.basis()
        .tuples()
        .iter()
        .map(|t| Ok(((t[0], t[1]), f.fundamental_period(t)?)))
        .collect()
}

/// `θ ↦ θ + σ` for a closed `σ` whose plaquette periods lie in `2πZ`.
pub fn gauge_act(c: &CurvingRep, sigma: &Form) -> Result<CurvingRep> {
    sigma.expect_degree(2)?;
    sigma.check_same_grid(c.flux.grid())?;
    check_closed(sigma, "σ")?;
    for ((a, b), period) in plaquette_periods(sigma)? {
        let offset = (period - TAU * (period / TAU).round()).abs();
        if offset > PERIOD_TOL {
            return Err(Error::NotIntegral { what: format!("σ on the ({a},{b}) plaquette"), period, offset });
        }
    }
    CurvingRep::new(&c.theta + sigma, c.flux.clone())
}

/// Two curvings define the same class exactly when their curvature
/// difference is exact; returns the class comparison and the residual of
/// the constructed primitive.
pub fn same_class(a: &CurvingRep, b: &CurvingRep, tol: f64) -> Result<(bool, f64)> {
    let diff = &a.curvature()? - &b.curvature()?;
    match exact_primitive(&diff, tol) {
        Ok(theta) => Ok((true, (&theta.exterior_derivative()? - &diff).max_abs())),
        Err(Error::Hypothesis { .. }) => Ok((false, f64::NAN)),
        Err(e) => Err(e),
    }
}

/// Splits a top-degree form `f·vol₀` on a flat torus into its harmonic
/// part `mean(f)·vol₀` and an exact part, and returns a primitive
/// `θ = δ(F vol₀)` with `δdF = f − mean(f)`, so `dθ` reproduces the exact
/// part. Fails when the harmonic part exceeds `tol`.
pub fn exact_primitive(top: &Form, tol: f64) -> Result<Form> {
    let grid = top.grid().clone();
    let d = grid.dim();
    top.expect_degree(d)?;
    let f = top.comp_scalar(0);
    let mean = f.mean();
    if mean.abs() > tol {
        return Err(Error::Hypothesis {
            name: "exact",
            detail: format!("harmonic part {mean:.3e} exceeds {tol:.3e}"),
        });
    }
    let flat = Metric::flat(&grid);
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let s = Scalar::new(grid.clone(), x.to_vec())?;
        Ok(codifferential(&flat, &crate::field::differential(&s))?.comp_scalar(0).into_data())
    };
    let rhs: Vec<f64> = f.data().iter().map(|x| x - mean).collect();
    let (potential, _) = conjugate_gradient(apply, &rhs, 1e-14, 50_000)?;
    let potential = Scalar::new(grid.clone(), potential)?;
    codifferential(&flat, &Form::new(grid.clone(), d, vec![potential.into_data()])?)
}

/// Max norms of `∂τH − dψ`, `dH` and, when supplied, `∂τA − dΨ` over the
/// interior samples of uniformly spaced τ-families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureResiduals {
    pub evolution: f64,
    pub closed: f64,
    pub gauge: Option<f64>,
}

pub fn reduction_closure_check(
    h: &[Form],
    psi: &[Form],
    step: f64,
    gauge: Option<(&[Form], &[Form])>,
) -> Result<ClosureResiduals> {
    if h.len() < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: h.len() });
    }
    if psi.len() != h.len() {
        return Err(Error::TooFewSamples { needed: h.len(), got: psi.len() });
    }
    let evolution = transport_residual(h, psi, step)?;
    let mut closed: f64 = 0.0;
    for f in h {
        if f.degree() < f.grid().dim() {
            closed = closed.max(f.exterior_derivative()?.max_abs());
        }
    }
    let gauge = match gauge {
        Some((a, big_psi)) => {
            if a.len() != h.len() || big_psi.len() != h.len() {
                return Err(Error::TooFewSamples { needed: h.len(), got: a.len().min(big_psi.len()) });
            }
            Some(transport_residual(a, big_psi, step)?)
        }
        None => None,
    };
    Ok(ClosureResiduals { evolution, closed, gauge })
}

/// `max_j |∂τX_j − dY_j|` with centered 4th-order τ-differences.
fn transport_residual(x: &[Form], y: &[Form], step: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 2..x.len() - 2 {
        let dx = (&(&x[j - 2] - &x[j + 2]) + &(&x[j + 1] - &x[j - 1]).scale(8.0)).scale(1.0 / (12.0 * step));
        let dy = y[j].exterior_derivative()?;
        worst = worst.max((&dx - &dy).max_abs());
    }
    Ok(worst)
}
