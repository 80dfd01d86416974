mod common;

use std::f64::consts::TAU;
use std::sync::Arc;

use common::{order, s, torus};
use gerbeflow::cauchy::{evolve, generic_state, EvolutionConfig};
use gerbeflow::gerbe::{
    exact_primitive, flux_representative, gauge_act, quantization_check, reduction_closure_check, same_class,
    CurvingRep, FluxData,
};
use gerbeflow::{samples, Error, Form, Grid, Scalar};
use proptest::prelude::*;

fn box_torus() -> Arc<Grid> {
    Arc::new(Grid::torus(&[8, 10, 12], &[2.0, 1.0, 1.5]).unwrap())
}

fn random_theta(g: &Arc<Grid>, seed: u64) -> Form {
    samples::random_form(&mut samples::rng(seed), g, 2, 0.0, 0.3).unwrap()
}

/// `dβ` for a random 1-form `β`.
fn exact_two_form(g: &Arc<Grid>, seed: u64) -> Form {
    samples::random_form(&mut samples::rng(seed), g, 1, 0.0, 0.3).unwrap().exterior_derivative().unwrap()
}

fn dxdy(g: &Arc<Grid>, value: f64) -> Form {
    Form::from_fn(g, 2, |t, _| if t == [0, 1] { value } else { 0.0 }).unwrap()
}

#[test]
fn representatives_carry_the_class_in_their_period() {
    let g = torus(3, 8);
    assert_eq!(flux_representative(0, &g).unwrap().unwrap().max_abs(), 0.0);
    for (m, period) in [(2, 2.0 * TAU), (-1, -TAU), (5, 5.0 * TAU)] {
        let h = flux_representative(m, &g).unwrap().unwrap();
        assert!(h.comp(0).iter().all(|v| *v == m as f64 * TAU));
        assert!((h.fundamental_period(&[0, 1, 2]).unwrap() - period).abs() <= 1e-12);
    }
    let b = box_torus();
    let h = flux_representative(2, &b).unwrap().unwrap();
    assert!((h.fundamental_period(&[0, 1, 2]).unwrap() - 2.0 * TAU).abs() <= 1e-12);
}

#[test]
fn lower_dimensional_tori_carry_only_the_trivial_class() {
    let g = torus(2, 8);
    assert!(flux_representative(0, &g).unwrap().is_none());
    assert!(flux_representative(1, &g).is_err());
    assert!(FluxData::new(0, &g).is_err());
}

#[test]
fn quantization_of_representatives_and_exact_forms() {
    let g = torus(3, 16);
    let (k, r) = quantization_check(&flux_representative(3, &g).unwrap().unwrap()).unwrap();
    assert_eq!(k, 3);
    assert!(r <= 1e-12);

    let dtheta = random_theta(&g, 1).exterior_derivative().unwrap();
    let (k, r) = quantization_check(&dtheta).unwrap();
    assert_eq!(k, 0);
    assert!(r <= 1e-10, "{r}");

    let shifted = &flux_representative(-2, &g).unwrap().unwrap() + &dtheta;
    let (k, r) = quantization_check(&shifted).unwrap();
    assert_eq!(k, -2);
    assert!(r <= 1e-10, "{r}");
}

#[test]
fn quantization_needs_a_three_form_on_a_three_torus() {
    let g = torus(3, 8);
    assert!(matches!(quantization_check(&random_theta(&g, 2)), Err(Error::DegreeMismatch { .. })));
    let plane = torus(2, 8);
    assert!(quantization_check(&Form::zeros(&plane, 2).unwrap()).is_err());
}

#[test]
fn gauge_action_by_zero_and_by_exact_forms() {
    let g = torus(3, 16);
    let c = CurvingRep::new(random_theta(&g, 3), FluxData::new(1, &g).unwrap()).unwrap();
    let same = gauge_act(&c, &Form::zeros(&g, 2).unwrap()).unwrap();
    assert_eq!((&same.theta - &c.theta).max_abs(), 0.0);

    let moved = gauge_act(&c, &exact_two_form(&g, 4)).unwrap();
    let dh = (&moved.curvature().unwrap() - &c.curvature().unwrap()).max_abs();
    assert!(dh <= 1e-13, "{dh}");
}

#[test]
fn integral_shift_moves_only_the_plaquette_period() {
    let g = torus(3, 8);
    let c = CurvingRep::new(random_theta(&g, 5), FluxData::new(2, &g).unwrap()).unwrap();
    let moved = gauge_act(&c, &dxdy(&g, TAU)).unwrap();
    assert!((&moved.curvature().unwrap() - &c.curvature().unwrap()).max_abs() <= 1e-13);
    let before = c.plaquette_periods().unwrap();
    let after = moved.plaquette_periods().unwrap();
    for ((axes, p0), (_, p1)) in before.iter().zip(&after) {
        let shift = if *axes == (0, 1) { TAU } else { 0.0 };
        assert!((p1 - p0 - shift).abs() <= 1e-12, "{axes:?}");
    }
    assert_eq!(quantization_check(&c.curvature().unwrap()).unwrap().0, 2);
    assert_eq!(quantization_check(&moved.curvature().unwrap()).unwrap().0, 2);
}

#[test]
fn gauge_parameters_must_be_closed_and_integral() {
    // fine along z, where σ varies, so the closedness tolerance is tight
    let g = Arc::new(Grid::torus(&[8, 8, 64], &[1.0, 1.0, 1.0]).unwrap());
    let c = CurvingRep::new(Form::zeros(&g, 2).unwrap(), FluxData::new(0, &g).unwrap()).unwrap();
    let wavy = Form::from_fn(&g, 2, |t, x| if t == [0, 1] { s(1.0, x[2]) } else { 0.0 }).unwrap();
    assert!(matches!(gauge_act(&c, &wavy), Err(Error::NotClosed { .. })));
    assert!(matches!(gauge_act(&c, &dxdy(&g, 1.0)), Err(Error::NotIntegral { .. })));
    assert!(gauge_act(&c, &dxdy(&g, -2.0 * TAU)).is_ok());
}

#[test]
fn classes_agree_exactly_when_the_curvature_difference_is_exact() {
    let g = torus(3, 16);
    let a = CurvingRep::new(random_theta(&g, 6), FluxData::new(1, &g).unwrap()).unwrap();
    let b = CurvingRep::new(random_theta(&g, 7), FluxData::new(1, &g).unwrap()).unwrap();
    let (same, residual) = same_class(&a, &b, 1e-8).unwrap();
    assert!(same);
    assert!(residual <= 1e-9, "{residual}");
    let c = CurvingRep::new(random_theta(&g, 6), FluxData::new(2, &g).unwrap()).unwrap();
    assert!(!same_class(&a, &c, 1e-8).unwrap().0);
}

#[test]
fn exact_primitive_reproduces_a_mean_free_top_form() {
    let g = torus(3, 16);
    let f = Scalar::from_fn(&g, |x| s(1.0, x[0]) * s(1.0, x[1]) + 0.3 * s(2.0, x[2]));
    let top = Form::new(g.clone(), 3, vec![f.into_data()]).unwrap();
    let theta = exact_primitive(&top, 1e-10).unwrap();
    assert!((&theta.exterior_derivative().unwrap() - &top).max_abs() <= 1e-9);
    let harmonic = Form::new(g.clone(), 3, vec![vec![1.0; g.len()]]).unwrap();
    assert!(matches!(exact_primitive(&harmonic, 1e-10), Err(Error::Hypothesis { name: "exact", .. })));
}

#[test]
fn constant_flux_families_close_trivially() {
    let g = torus(3, 8);
    let h: Vec<Form> = (0..6).map(|_| flux_representative(1, &g).unwrap().unwrap()).collect();
    let psi: Vec<Form> = (0..6).map(|_| Form::zeros(&g, 2).unwrap()).collect();
    let r = reduction_closure_check(&h, &psi, 0.1, None).unwrap();
    assert_eq!(r.evolution, 0.0);
    assert_eq!(r.closed, 0.0);
    assert!(r.gauge.is_none());
    assert!(matches!(reduction_closure_check(&h[..4], &psi[..4], 0.1, None), Err(Error::TooFewSamples { .. })));
}

#[test]
fn linear_flux_families_close_to_roundoff() {
    let g = torus(3, 16);
    let step = 0.05;
    let sigma = random_theta(&g, 8);
    let flux0 = flux_representative(1, &g).unwrap().unwrap();
    let h: Vec<Form> = (0..7)
        .map(|j| &flux0 + &sigma.scale(j as f64 * step).exterior_derivative().unwrap())
        .collect();
    let psi = vec![sigma.clone(); 7];
    // Gauge family A_τ = A₀ + τ·dΨ with a fixed 0-form Ψ.
    let big_psi = Form::from_fn(&g, 0, |_, x| s(1.0, x[0] + x[1])).unwrap();
    let a0 = samples::random_form(&mut samples::rng(9), &g, 1, 0.0, 0.2).unwrap();
    let da = big_psi.exterior_derivative().unwrap();
    let a: Vec<Form> = (0..7).map(|j| &a0 + &da.scale(j as f64 * step)).collect();
    let bp = vec![big_psi; 7];
    let r = reduction_closure_check(&h, &psi, step, Some((&a, &bp))).unwrap();
    assert!(r.evolution <= 1e-11, "{r:?}");
    assert!(r.gauge.unwrap() <= 1e-11, "{r:?}");
}

#[test]
fn evolved_fluxes_obey_the_closure_relations() {
    let g = torus(3, 8);
    let st = generic_state(&g, 10).unwrap();
    let dx = g.min_spacing();
    let residual = |r: usize| {
        let traj = evolve(&st, &EvolutionConfig { lambda: 0.0, dt: dx / r as f64, steps: r, record_every: 1 })
            .unwrap();
        let h: Vec<Form> = traj.states.iter().map(|s| s.flux().unwrap().unwrap()).collect();
        let psi: Vec<Form> = traj.states.iter().map(|s| s.fields.psi.clone()).collect();
        reduction_closure_check(&h, &psi, traj.record_step(), None).unwrap()
    };
    let (coarse, fine) = (residual(32), residual(64));
    assert_eq!(coarse.closed, 0.0);
    assert!(order(coarse.evolution, fine.evolution) >= 3.5, "{coarse:?} {fine:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gauge_orbits_preserve_the_class(seed in any::<u64>(), m in -3i64..4, k in -2i32..3) {
        let g = torus(3, 8);
        let c = CurvingRep::new(random_theta(&g, seed), FluxData::new(m, &g).unwrap()).unwrap();
        let sigma = &exact_two_form(&g, seed ^ 1) + &dxdy(&g, TAU * k as f64);
        let moved = gauge_act(&c, &sigma).unwrap();
        let before = quantization_check(&c.curvature().unwrap()).unwrap();
        let after = quantization_check(&moved.curvature().unwrap()).unwrap();
        prop_assert_eq!(before.0, m);
        prop_assert_eq!(after.0, m);
    }

    #[test]
    fn gauge_action_is_affine(seed in any::<u64>()) {
        let g = torus(3, 8);
        let c = CurvingRep::new(random_theta(&g, seed), FluxData::new(1, &g).unwrap()).unwrap();
        let s1 = dxdy(&g, TAU);
        let s2 = exact_two_form(&g, seed ^ 2);
        let twice = gauge_act(&gauge_act(&c, &s1).unwrap(), &s2).unwrap();
        let once = gauge_act(&c, &(&s1 + &s2)).unwrap();
        // floating-point addition is not associative; equal up to one rounding
        prop_assert!((&twice.theta - &once.theta).max_abs() <= 1e-15 * (1.0 + TAU));
    }
}
