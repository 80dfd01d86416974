//! Identity suite behind `gerbeflow verify`: conformal identities, the
//! contracted Bianchi identity and `δ² = 0` by refinement from `N` to
//! `2N`, plus exact equivariance and quantization checks at `N`.

use std::f64::consts::TAU;
use std::sync::Arc;

use gerbeflow::field::differential;
use gerbeflow::frames::conformal_identity_residuals;
use gerbeflow::geometry::{codifferential, div_symtensor, ricci, scalar_curvature};
use gerbeflow::gerbe::{flux_representative, gauge_act, quantization_check, CurvingRep, FluxData};
use gerbeflow::samples;
use gerbeflow::soliton::{
    einstein_residuals, pullback_affine, pullback_form, pullback_scalar, pullback_sym, string_residuals, AffineMap,
    SolitonFields,
};
use gerbeflow::{Form, Grid, Result, Scalar};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::expr::TrigSum;

/// Minimum observed order for a convergence check.
pub const MIN_ORDER: f64 = 3.5;
/// Residuals this small count as converged regardless of their ratio.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Convergence,
    Exact,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub levels: Vec<usize>,
    pub residuals: Vec<f64>,
    pub observed_order: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn convergence(name: &str, levels: [usize; 2], residuals: [f64; 2]) -> Check {
        let order = (residuals[0] / residuals[1]).log2() / (levels[1] as f64 / levels[0] as f64).log2();
        let pass = order >= MIN_ORDER || residuals[1] <= ROUNDOFF_FLOOR;
        Check {
            name: name.into(),
            kind: CheckKind::Convergence,
            levels: levels.to_vec(),
            residuals: residuals.to_vec(),
            observed_order: Some(order),
            threshold: MIN_ORDER,
            pass,
        }
    }

    fn exact(name: &str, level: usize, residual: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            kind: CheckKind::Exact,
            levels: vec![level],
            residuals: vec![residual],
            observed_order: None,
            threshold,
            pass: residual <= threshold,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub points: usize,
    pub pass: bool,
    pub checks: Vec<Check>,
}

/// Dilaton on `T³`: the configured expression when given, else random.
fn dilaton(grid: &Arc<Grid>, phi: Option<&TrigSum>, seed: u64) -> Scalar {
    match phi {
        Some(e) => Scalar::from_fn(grid, |x| e.eval(x)),
        None => samples::random_scalar(&mut samples::rng(seed ^ 0x9e37), grid, 0.0, 0.2),
    }
}

fn torus3(points: usize) -> Result<Arc<Grid>> {
    Ok(Arc::new(Grid::unit_torus(3, points)?))
}

/// Conformal-identity residual norms `[ricci, codifferential, hessian]`.
fn conformal_norms(points: usize, phi: Option<&TrigSum>, seed: u64) -> Result<[f64; 3]> {
    let grid = torus3(points)?;
    let mut rng = samples::rng(seed);
    let g_e = samples::random_metric(&mut rng, &grid, 0.1)?;
    let alpha = samples::random_form(&mut rng, &grid, 2, 0.0, 0.5)?;
    let phi = dilaton(&grid, phi, seed);
    Ok(conformal_identity_residuals(&g_e, &phi, 2, &alpha)?.max_norms())
}

/// `max|δRic + ½ds|`.
fn bianchi_norm(points: usize, seed: u64) -> Result<f64> {
    let grid = torus3(points)?;
    let g = samples::random_metric(&mut samples::rng(seed.wrapping_add(1)), &grid, 0.1)?;
    let lhs = &div_symtensor(&g, &ricci(&g))? + &differential(&scalar_curvature(&g)).scale(0.5);
    Ok(lhs.max_abs())
}

/// `max|δδα|` for a 2-form.
fn delta_squared_norm(points: usize, seed: u64) -> Result<f64> {
    let grid = torus3(points)?;
    let mut rng = samples::rng(seed.wrapping_add(2));
    let g = samples::random_metric(&mut rng, &grid, 0.1)?;
    let alpha = samples::random_form(&mut rng, &grid, 2, 0.0, 0.5)?;
    Ok(codifferential(&g, &codifferential(&g, &alpha)?)?.max_abs())
}

/// Random soliton-type fields on `T³` with a closed flux.
pub fn sample_fields(points: usize, seed: u64) -> Result<SolitonFields> {
    let grid = torus3(points)?;
    let mut rng = samples::rng(seed.wrapping_add(3));
    let g = samples::random_metric(&mut rng, &grid, 0.1)?;
    let phi = samples::random_scalar(&mut rng, &grid, 0.0, 0.2);
    let theta = samples::random_form(&mut rng, &grid, 2, 0.0, 0.05)?;
    let flux = flux_representative(1, &grid)?.expect("3-torus");
    let h = &flux + &theta.exterior_derivative()?;
    SolitonFields::new(g, Some(h), phi)
}

/// Largest discrepancy between pulling back residuals and evaluating
/// residuals of pulled-back fields, over a swap and a translation.
pub fn equivariance_defect(fields: &SolitonFields) -> Result<f64> {
    let maps = [AffineMap::swap(3, 0, 1), AffineMap::translation(vec![3, -2, 5])];
    let mut worst: f64 = 0.0;
    for map in &maps {
        let moved = pullback_affine(map, fields)?;
        let (e0, m0) = string_residuals(fields)?;
        let (e1, m1) = string_residuals(&moved)?;
        worst = worst.max((&pullback_sym(map, &e0)? - &e1).max_abs());
        worst = worst.max((&pullback_form(map, &m0)? - &m1).max_abs());
        let r0 = einstein_residuals(fields, 0.0, 2)?;
        let r1 = einstein_residuals(&moved, 0.0, 2)?;
        worst = worst.max((&pullback_sym(map, &r0.einstein)? - &r1.einstein).max_abs());
        worst = worst.max((&pullback_form(map, &r0.maxwell)? - &r1.maxwell).max_abs());
        worst = worst.max((&pullback_scalar(map, &r0.dilaton)? - &r1.dilaton).max_abs());
    }
    Ok(worst)
}

/// Period defect of the `m = 2` flux, and the change in
/// `quantization_check` under a gauge transformation with integral periods.
fn quantization_defects(points: usize, seed: u64) -> Result<(f64, f64)> {
    let grid = torus3(points)?;
    let h0 = flux_representative(2, &grid)?.expect("3-torus");
    let period_defect = (h0.fundamental_period(&[0, 1, 2])? - 2.0 * TAU).abs();
    let mut rng = samples::rng(seed.wrapping_add(4));
    let theta = samples::random_form(&mut rng, &grid, 2, 0.0, 0.1)?;
    let rep = CurvingRep::new(theta, FluxData::new(2, &grid)?)?;
    let beta = samples::random_form(&mut rng, &grid, 1, 0.0, 0.1)?;
    let plaquette = Form::from_fn(&grid, 2, |t, _| if t == [0, 1] { TAU } else { 0.0 })?;
    let sigma = &plaquette + &beta.exterior_derivative()?;
    let moved = gauge_act(&rep, &sigma)?;
    let (k0, r0) = quantization_check(&rep.curvature()?)?;
    let (k1, r1) = quantization_check(&moved.curvature()?)?;
    let gauge_defect = if k0 == k1 && k0 == 2 { (r0 - r1).abs() } else { f64::INFINITY };
    Ok((period_defect, gauge_defect))
}

pub fn run(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let n = cfg.grid.points[0];
    let levels = [n, 2 * n];
    let seed = cfg.seed;
    let phi = cfg.constraints2d.as_ref().map(|c| &c.phi);
    let mut checks = Vec::new();

    let coarse = conformal_norms(levels[0], phi, seed)?;
    let fine = conformal_norms(levels[1], phi, seed)?;
    for (i, name) in ["conformal_ricci", "conformal_codifferential", "conformal_hessian"].iter().enumerate() {
        checks.push(Check::convergence(name, levels, [coarse[i], fine[i]]));
    }
    checks.push(Check::convergence("contracted_bianchi", levels, [bianchi_norm(levels[0], seed)?, bianchi_norm(levels[1], seed)?]));
    checks.push(Check::convergence(
        "codifferential_squared",
        levels,
        [delta_squared_norm(levels[0], seed)?, delta_squared_norm(levels[1], seed)?],
    ));
    checks.push(Check::exact("equivariance", n, equivariance_defect(&sample_fields(n, seed)?)?, EXACT_TOL));
    let (period, gauge) = quantization_defects(n, seed)?;
    checks.push(Check::exact("quantization_period", n, period, EXACT_TOL));
    checks.push(Check::exact("quantization_gauge_invariance", n, gauge, EXACT_TOL));

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { seed, points: n, pass, checks })
}
