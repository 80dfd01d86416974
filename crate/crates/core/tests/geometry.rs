mod common;

use std::f64::consts::TAU;
use std::sync::Arc;

use common::{c, err_vs, max_diff, order, s, torus};
use gerbeflow::field::differential;
use gerbeflow::geometry::{
    christoffel, circ_form, circ_sym, codifferential, delta1, det_inner, div_symtensor, flat, form_contract, hessian,
    inverse_metric, norm2, ricci, scalar_curvature, sharp, trace,
};
use gerbeflow::samples;
use gerbeflow::{Error, Form, Grid, Metric, Scalar, SymTensor};
use nalgebra::Matrix3;
use proptest::prelude::*;

fn diag_metric(g: &Arc<Grid>, f: impl Fn(usize, &[f64]) -> f64) -> Metric {
    Metric::new(SymTensor::from_fn(g, |i, j, x| if i == j { f(i, x) } else { 0.0 })).unwrap()
}

fn random_metric(g: &Arc<Grid>, seed: u64) -> Metric {
    samples::random_metric(&mut samples::rng(seed), g, 0.15).unwrap()
}

fn random_form(g: &Arc<Grid>, k: usize, seed: u64) -> Form {
    samples::random_form(&mut samples::rng(seed), g, k, 0.2, 0.5).unwrap()
}

fn sym_comps_close(a: &SymTensor, b: &SymTensor, tol: f64) {
    let d = a.dim();
    for i in 0..d {
        for j in i..d {
            let e = max_diff(a.get(i, j), b.get(i, j));
            assert!(e <= tol, "component ({i},{j}) off by {e:e}");
        }
    }
}

#[test]
fn inverse_of_identity_and_scaled_identity() {
    let g = torus(3, 8);
    sym_comps_close(&inverse_metric(&Metric::flat(&g)), &SymTensor::identity(&g), 0.0);
    let h = Metric::new(SymTensor::scaled_identity(&Scalar::constant(&g, 2.5 * 2.5))).unwrap();
    sym_comps_close(&inverse_metric(&h), &SymTensor::scaled_identity(&Scalar::constant(&g, 2.5f64.powi(-2))), 1e-15);
}

#[test]
fn inverse_of_diagonal_metric_is_reciprocal() {
    let g = torus(2, 16);
    let h = diag_metric(&g, |i, x| if i == 0 { 1.0 + 0.5 * s(1.0, x[0]).powi(2) } else { 1.0 });
    let inv = inverse_metric(&h);
    assert!(err_vs(&g, inv.get(0, 0), |x| 1.0 / (1.0 + 0.5 * s(1.0, x[0]).powi(2))) < 1e-15);
    assert_eq!(inv.get(0, 1).iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
}

#[test]
fn inverse_times_metric_is_identity() {
    let g = torus(3, 8);
    let h = random_metric(&g, 11);
    let inv = inverse_metric(&h);
    for p in 0..g.len() {
        let m = Matrix3::from_fn(|i, j| h.tensor().at(p)[i][j]);
        let mi = Matrix3::from_fn(|i, j| inv.at(p)[i][j]);
        assert!((m * mi - Matrix3::identity()).amax() <= 1e-12);
    }
}

#[test]
fn degenerate_metric_names_the_grid_index() {
    let g = torus(2, 8);
    let bad = 9;
    let t = SymTensor::from_fn(&g, |i, j, x| {
        let singular = (x[0] - g.axis(0).coord(1)).abs() < 1e-12 && (x[1] - g.axis(1).coord(1)).abs() < 1e-12;
        if singular || i == j {
            1.0
        } else {
            0.0
        }
    });
    match Metric::new(t) {
        Err(Error::DegenerateMetric { index, .. }) => assert_eq!(index, bad),
        other => panic!("expected a degenerate-metric error, got {other:?}"),
    }
}

#[test]
fn flat_christoffel_and_curvature_vanish() {
    let g = torus(3, 8);
    let h = Metric::flat(&g);
    assert_eq!(christoffel(&h).max_abs(), 0.0);
    assert_eq!(ricci(&h).max_abs(), 0.0);
    assert_eq!(scalar_curvature(&h).max_abs(), 0.0);
}

/// `h = e^{2u}δ` with `u = ε sin(2πx)` on the unit `T²`.
fn conformal(g: &Arc<Grid>, eps: f64) -> Metric {
    Metric::conformally_flat(&Scalar::from_fn(g, |x| 2.0 * eps * s(1.0, x[0]))).unwrap()
}

#[test]
fn christoffel_of_conformally_flat_metric() {
    let eps = 0.2;
    let ux = |x: &[f64]| eps * TAU * c(1.0, x[0]);
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&m| {
            let g = torus(2, m);
            let gam = christoffel(&conformal(&g, eps));
            err_vs(&g, gam.get(0, 0, 0), ux)
                .max(err_vs(&g, gam.get(0, 1, 1), |x| -ux(x)))
                .max(err_vs(&g, gam.get(1, 0, 1), ux))
                .max(err_vs(&g, gam.get(1, 1, 0), ux))
        })
        .collect();
    assert!(order(errs[1], errs[2]) >= 3.5, "{errs:?}");
}

#[test]
fn scalar_curvature_of_conformally_flat_metric() {
    let eps = 0.2;
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&m| {
            let g = torus(2, m);
            let sc = scalar_curvature(&conformal(&g, eps));
            let exact = |x: &[f64]| {
                let u = eps * s(1.0, x[0]);
                let uxx = -eps * TAU * TAU * s(1.0, x[0]);
                -2.0 * (-2.0 * u).exp() * uxx
            };
            err_vs(&g, sc.data(), exact)
        })
        .collect();
    assert!(order(errs[1], errs[2]) >= 3.5, "{errs:?}");
}

#[test]
fn warped_product_christoffel_and_curvature() {
    let a = |x: f64| 1.0 + 0.25 * c(1.0, x);
    let da = |x: f64| -0.25 * TAU * s(1.0, x);
    let dda = |x: f64| -0.25 * TAU * TAU * c(1.0, x);
    let errs: Vec<[f64; 2]> = [16, 32, 64]
        .iter()
        .map(|&m| {
            let g = torus(2, m);
            let h = diag_metric(&g, |i, x| if i == 0 { 1.0 } else { a(x[0]).powi(2) });
            let gam = christoffel(&h);
            let e_gam = err_vs(&g, gam.get(0, 1, 1), |x| -a(x[0]) * da(x[0]))
                .max(err_vs(&g, gam.get(1, 0, 1), |x| da(x[0]) / a(x[0])));
            let e_s = err_vs(&g, scalar_curvature(&h).data(), |x| -2.0 * dda(x[0]) / a(x[0]));
            [e_gam, e_s]
        })
        .collect();
    for q in 0..2 {
        assert!(order(errs[1][q], errs[2][q]) >= 3.5, "{errs:?}");
    }
}

#[test]
fn hessian_examples() {
    let g = torus(2, 8);
    assert_eq!(hessian(&Metric::flat(&g), &Scalar::constant(&g, 2.0)).unwrap().max_abs(), 0.0);

    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&m| {
            let g = torus(2, m);
            let hs = hessian(&Metric::flat(&g), &Scalar::from_fn(&g, |x| s(1.0, x[0]))).unwrap();
            err_vs(&g, hs.get(0, 0), |x| -TAU * TAU * s(1.0, x[0]))
                .max(err_vs(&g, hs.get(0, 1), |_| 0.0))
                .max(err_vs(&g, hs.get(1, 1), |_| 0.0))
        })
        .collect();
    assert!(order(errs[1], errs[2]) >= 3.5, "{errs:?}");
}

#[test]
fn trace_of_hessian_is_minus_laplacian() {
    let g = torus(3, 16);
    let h = random_metric(&g, 3);
    let f = samples::random_scalar(&mut samples::rng(4), &g, 0.0, 0.5);
    let tr = trace(&h, &hessian(&h, &f).unwrap());
    let lap = codifferential(&h, &differential(&f)).unwrap();
    assert!(max_diff(tr.data(), &lap.comp_scalar(0).scale(-1.0).into_data()) <= 1e-10);
}

#[test]
fn codifferential_examples() {
    let l = 2.0;
    let errs: Vec<[f64; 2]> = [16, 32, 64]
        .iter()
        .map(|&m| {
            let g = Arc::new(Grid::torus(&[m, m], &[l, l]).unwrap());
            let f = Scalar::from_fn(&g, |x| (TAU * x[0] / l).sin());
            let lap = codifferential(&Metric::flat(&g), &differential(&f)).unwrap();
            let e1 = err_vs(&g, lap.comp(0), |x| (TAU / l).powi(2) * (TAU * x[0] / l).sin());
            let gu = torus(2, m);
            let alpha = Form::from_fn(&gu, 1, |t, x| if t == [0] { s(1.0, x[0]) } else { 0.0 }).unwrap();
            let div = codifferential(&Metric::flat(&gu), &alpha).unwrap();
            let e2 = err_vs(&gu, div.comp(0), |x| -TAU * c(1.0, x[0]));
            [e1, e2]
        })
        .collect();
    for q in 0..2 {
        assert!(order(errs[1][q], errs[2][q]) >= 3.5, "{errs:?}");
    }
    let g = torus(3, 8);
    let constant = Form::from_fn(&g, 2, |t, _| (t[0] + 2 * t[1]) as f64).unwrap();
    assert_eq!(codifferential(&Metric::flat(&g), &constant).unwrap().max_abs(), 0.0);
}

#[test]
fn codifferential_of_a_scalar_is_rejected() {
    let g = torus(2, 8);
    let f = Form::zeros(&g, 0).unwrap();
    assert!(codifferential(&Metric::flat(&g), &f).is_err());
}

#[test]
fn divergence_of_symmetric_tensors() {
    let g = torus(3, 16);
    let h = random_metric(&g, 5);
    assert!(div_symtensor(&h, h.tensor()).unwrap().max_abs() <= 1e-10);

    let g = torus(2, 32);
    let flat_h = Metric::flat(&g);
    let t = SymTensor::from_fn(&g, |i, j, x| if i == 0 && j == 0 { s(1.0, x[0]) } else { 0.0 });
    let div = div_symtensor(&flat_h, &t).unwrap();
    assert!(err_vs(&g, div.comp(0), |x| -TAU * c(1.0, x[0])) < 1e-3);
    assert_eq!(div.comp(1).iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);

    let f = samples::random_scalar(&mut samples::rng(6), &g, 0.0, 1.0);
    let div = div_symtensor(&flat_h, &SymTensor::scaled_identity(&f)).unwrap();
    assert!((&div + &differential(&f)).max_abs() <= 1e-13);
}

#[test]
fn determinant_norm_of_monomials() {
    let g2 = torus(2, 8);
    let dxdy = Form::from_fn(&g2, 2, |_, _| 1.0).unwrap();
    assert!(err_vs(&g2, norm2(&Metric::flat(&g2), &dxdy).unwrap().data(), |_| 1.0) < 1e-15);
    let cc = 1.7;
    let scaled = Metric::new(SymTensor::scaled_identity(&Scalar::constant(&g2, cc * cc))).unwrap();
    assert!(err_vs(&g2, norm2(&scaled, &dxdy).unwrap().data(), |_| cc.powi(-4)) < 1e-14);

    let g3 = torus(3, 8);
    let vol = Form::from_fn(&g3, 3, |_, _| 1.0).unwrap();
    assert!(err_vs(&g3, norm2(&Metric::flat(&g3), &vol).unwrap().data(), |_| 1.0) < 1e-15);
    // The plain tensor contraction over all 3! orderings counts each monomial six times.
    let full: f64 = (0..3)
        .flat_map(|i| (0..3).flat_map(move |j| (0..3).map(move |k| [i, j, k])))
        .filter_map(|idx| vol.get(&idx).map(|(v, sign)| (sign * v[0]).powi(2)))
        .sum();
    assert_eq!(full, 6.0);
}

#[test]
fn det_inner_rejects_mixed_degrees() {
    let g = torus(3, 8);
    let h = Metric::flat(&g);
    assert!(det_inner(&h, &Form::zeros(&g, 1).unwrap(), &Form::zeros(&g, 2).unwrap()).is_err());
}

#[test]
fn circ_form_examples() {
    let g = torus(3, 8);
    let flat_h = Metric::flat(&g);
    let vol = Form::from_fn(&g, 3, |_, _| 1.0).unwrap();
    sym_comps_close(&circ_form(&flat_h, &vol, &vol).unwrap(), &SymTensor::identity(&g), 1e-15);
    assert_eq!(circ_form(&flat_h, &Form::zeros(&g, 3).unwrap(), &vol).unwrap().max_abs(), 0.0);

    let h = random_metric(&g, 7);
    let f = samples::random_scalar(&mut samples::rng(8), &g, 0.5, 0.3);
    let hf = h.volume_form().mul_scalar(&f);
    let expected = h.tensor().mul_scalar(&(&f * &f));
    sym_comps_close(&circ_form(&h, &hf, &hf).unwrap(), &expected, 1e-12);
}

#[test]
fn circ_sym_examples() {
    let g = torus(3, 8);
    let h = random_metric(&g, 9);
    let b = samples::random_sym(&mut samples::rng(10), &g, 0.0, 1.0);
    sym_comps_close(&circ_sym(&h, h.tensor(), &b).unwrap(), &b, 1e-13);

    let g = torus(2, 8);
    let a = SymTensor::from_fn(&g, |i, j, _| if i == j { [2.0, -3.0][i] } else { 0.0 });
    let expected = SymTensor::from_fn(&g, |i, j, _| if i == j { [4.0, 9.0][i] } else { 0.0 });
    sym_comps_close(&circ_sym(&Metric::flat(&g), &a, &a).unwrap(), &expected, 0.0);
}

#[test]
fn delta1_examples() {
    let g = torus(3, 8);
    let h = random_metric(&g, 12);
    let alpha = random_form(&g, 2, 13);
    let out = delta1(&h, h.tensor(), &alpha).unwrap();
    assert!((&out - &alpha.scale(2.0)).max_abs() <= 1e-12);
    assert_eq!(delta1(&h, &SymTensor::zeros(&g), &alpha).unwrap().max_abs(), 0.0);
    assert!(delta1(&h, h.tensor(), &Form::zeros(&g, 0).unwrap()).is_err());

    let g = torus(2, 8);
    let kxx = SymTensor::from_fn(&g, |i, j, _| if i == 0 && j == 0 { 1.0 } else { 0.0 });
    let dxdy = Form::from_fn(&g, 2, |_, _| 1.0).unwrap();
    assert_eq!((&delta1(&Metric::flat(&g), &kxx, &dxdy).unwrap() - &dxdy).max_abs(), 0.0);
}

/// `Σ_i K(e_i) ∧ ι_{e_i}α` for a 2-form on `T³`, evaluated pointwise in an
/// `h`-orthonormal frame obtained by Gram–Schmidt on the coordinate basis.
fn delta1_by_frame(h: &Metric, kt: &SymTensor, alpha: &Form) -> Vec<Matrix3<f64>> {
    (0..h.grid().len())
        .map(|p| {
            let hm = Matrix3::from_fn(|i, j| h.tensor().at(p)[i][j]);
            let km = Matrix3::from_fn(|i, j| kt.at(p)[i][j]);
            let am = Matrix3::from_fn(|i, j| alpha.get(&[i, j]).map_or(0.0, |(v, sg)| sg * v[p]));
            let mut frame: Vec<nalgebra::Vector3<f64>> = Vec::new();
            for a in 0..3 {
                let mut v = nalgebra::Vector3::ith(a, 1.0);
                for e in &frame {
                    v -= e * (e.transpose() * hm * v)[0];
                }
                frame.push(v / (v.transpose() * hm * v)[0].sqrt());
            }
            let mut out = Matrix3::zeros();
            for e in &frame {
                let ke = km * e;
                let ie = am.transpose() * e;
                out += ke * ie.transpose() - ie * ke.transpose();
            }
            out
        })
        .collect()
}

#[test]
fn delta1_matches_orthonormal_frame_evaluation() {
    let g = torus(3, 8);
    for seed in 0..4 {
        let h = random_metric(&g, 100 + seed);
        let kt = samples::random_sym(&mut samples::rng(200 + seed), &g, 0.0, 1.0);
        let alpha = random_form(&g, 2, 300 + seed);
        let coord = delta1(&h, &kt, &alpha).unwrap();
        let frame = delta1_by_frame(&h, &kt, &alpha);
        for (c, t) in coord.basis().tuples().iter().enumerate() {
            let (i, j) = (t[0], t[1]);
            let e = coord.comp(c).iter().zip(&frame).map(|(a, m)| (a - m[(i, j)]).abs()).fold(0.0, f64::max);
            assert!(e <= 1e-10, "seed {seed}, component {t:?}: {e:e}");
        }
    }
}

#[test]
fn form_contract_examples() {
    let g = torus(3, 8);
    let h = Metric::flat(&g);
    let dxdy = Form::from_fn(&g, 2, |t, _| if t == [0, 1] { 1.0 } else { 0.0 }).unwrap();
    let vol = Form::from_fn(&g, 3, |_, _| 1.0).unwrap();
    let dz = Form::from_fn(&g, 1, |t, _| if t == [2] { 1.0 } else { 0.0 }).unwrap();
    assert_eq!((&form_contract(&h, &dxdy, &vol).unwrap() - &dz).max_abs(), 0.0);
    assert_eq!(form_contract(&h, &Form::zeros(&g, 2).unwrap(), &vol).unwrap().max_abs(), 0.0);
    assert!(form_contract(&h, &vol, &dxdy).is_err());
}

#[test]
fn sharp_and_flat_examples() {
    let g = torus(2, 8);
    let dx = Form::from_fn(&g, 1, |t, _| if t == [0] { 1.0 } else { 0.0 }).unwrap();
    let v = sharp(&Metric::flat(&g), &dx).unwrap();
    assert!(err_vs(&g, v.comp(0), |_| 1.0) == 0.0 && err_vs(&g, v.comp(1), |_| 0.0) == 0.0);
    let cc = 0.6;
    let scaled = Metric::new(SymTensor::scaled_identity(&Scalar::constant(&g, cc * cc))).unwrap();
    assert!(err_vs(&g, sharp(&scaled, &dx).unwrap().comp(0), |_| cc.powi(-2)) < 1e-15);
}

#[test]
fn contracted_bianchi_and_delta_squared_converge() {
    let errs: Vec<[f64; 2]> = [16, 32]
        .iter()
        .map(|&m| {
            let g = torus(3, m);
            let h = samples::random_metric(&mut samples::rng(21), &g, 0.1).unwrap();
            let ric = ricci(&h);
            let einstein = &ric - &h.tensor().mul_scalar(&scalar_curvature(&h).scale(0.5));
            let bianchi = div_symtensor(&h, &einstein).unwrap().max_abs();
            let alpha = random_form(&g, 2, 22);
            let dd = codifferential(&h, &codifferential(&h, &alpha).unwrap()).unwrap().max_abs();
            [bianchi, dd]
        })
        .collect();
    for q in 0..2 {
        assert!(order(errs[0][q], errs[1][q]) >= 3.5, "{errs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gram_positivity_of_circ_sym(seed in any::<u64>()) {
        let g = torus(3, 8);
        let h = random_metric(&g, seed);
        let a = samples::random_sym(&mut samples::rng(seed ^ 1), &g, 0.0, 1.0);
        let tr = trace(&h, &circ_sym(&h, &a, &a).unwrap());
        prop_assert!(tr.data().iter().all(|v| *v >= -1e-14));
    }

    #[test]
    fn circ_form_trace_is_twice_the_norm_for_two_forms(seed in any::<u64>()) {
        let g = torus(3, 8);
        let h = random_metric(&g, seed);
        let psi = random_form(&g, 2, seed ^ 2);
        let tr = trace(&h, &circ_form(&h, &psi, &psi).unwrap());
        prop_assert!(tr.data().iter().all(|v| *v >= 0.0));
        let twice = norm2(&h, &psi).unwrap().scale(2.0);
        prop_assert!(max_diff(tr.data(), twice.data()) <= 1e-12);
    }

    #[test]
    fn self_contraction_is_the_norm(seed in any::<u64>(), k in 1usize..4) {
        let g = torus(3, 8);
        let h = random_metric(&g, seed);
        let psi = random_form(&g, k, seed ^ 3);
        let lhs = form_contract(&h, &psi, &psi).unwrap();
        prop_assert!(max_diff(lhs.comp(0), norm2(&h, &psi).unwrap().data()) <= 1e-12);
    }

    #[test]
    fn flat_inverts_sharp(seed in any::<u64>()) {
        let g = torus(3, 8);
        let h = random_metric(&g, seed);
        let alpha = random_form(&g, 1, seed ^ 4);
        let back = flat(&h, &sharp(&h, &alpha).unwrap()).unwrap();
        prop_assert!((&back - &alpha).max_abs() <= 1e-12);
    }
}
