//! Riemannian tensor calculus on a grid.
//!
//! Sign conventions: `δ = −div`, so `δ(df)` is the positive Laplacian.
//! Inner products of forms use the determinant normalisation
//! `⟨α,β⟩ = (1/k!) α_I β^I`, under which orthonormal wedge monomials have
//! unit norm. Contractions `α(v)` insert `v` into the first slot.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Matrix4};

use crate::error::{Error, Result};
use crate::field::{same_grid, sym_count, sym_index, Form, FormBasis, Scalar, SymTensor, VectorField};
use crate::grid::Grid;

/// Smallest admissible eigenvalue of a metric.
pub const SPD_FLOOR: f64 = 1e-10;
/// Largest admissible pointwise condition number.
pub const MAX_CONDITION: f64 = 1e10;

fn acc(out: &mut [f64], s: f64, x: &[f64]) {
    for (o, a) in out.iter_mut().zip(x) {
        *o += s * a;
    }
}

fn acc2(out: &mut [f64], s: f64, x: &[f64], y: &[f64]) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
        *o += s * a * b;
    }
}

fn acc3(out: &mut [f64], s: f64, x: &[f64], y: &[f64], z: &[f64]) {
    for (((o, a), b), c) in out.iter_mut().zip(x).zip(y).zip(z) {
        *o += s * a * b * c;
    }
}

fn ensure_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Pointwise symmetric positive-definite metric with cached inverse.
#[derive(Clone, Debug)]
pub struct Metric {
    g: SymTensor,
    inv: SymTensor,
    det: Vec<f64>,
}

struct PointInfo {
    min_eig: f64,
    max_eig: f64,
    inv: [[f64; 4]; 4],
    det: f64,
}

macro_rules! analyze_fixed {
    ($mat:ty, $d:expr, $m:expr) => {{
        let a = <$mat>::from_fn(|i, j| $m[i][j]);
        let eig = a.symmetric_eigenvalues();
        let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_eig = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut inv = [[0.0; 4]; 4];
        if let Some(ai) = a.try_inverse() {
            for i in 0..$d {
                for j in 0..$d {
                    inv[i][j] = 0.5 * (ai[(i, j)] + ai[(j, i)]);
                }
            }
        }
        PointInfo { min_eig, max_eig, inv, det: a.determinant() }
    }};
}

fn analyze(d: usize, m: &[[f64; 4]; 4]) -> PointInfo {
    match d {
        1 => {
            let mut inv = [[0.0; 4]; 4];
            inv[0][0] = 1.0 / m[0][0];
            PointInfo { min_eig: m[0][0], max_eig: m[0][0], inv, det: m[0][0] }
        }
        2 => analyze_fixed!(Matrix2<f64>, 2, m),
        3 => analyze_fixed!(Matrix3<f64>, 3, m),
        _ => analyze_fixed!(Matrix4<f64>, 4, m),
    }
}

impl Metric {
    /// Validates positivity and conditioning at every point.
    pub fn new(g: SymTensor) -> Result<Metric> {
        let d = g.dim();
        let n = g.grid().len();
        let mut inv = vec![vec![0.0; n]; sym_count(d)];
        let mut det = vec![0.0; n];
        for p in 0..n {
            let m = g.at(p);
            if m.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::DegenerateMetric { index: p, detail: "non-finite entry".into() });
            }
            let info = analyze(d, &m);
            if info.min_eig.is_nan() || info.min_eig <= SPD_FLOOR {
                return Err(Error::DegenerateMetric {
                    index: p,
                    detail: format!("smallest eigenvalue {:.3e}", info.min_eig),
                });
            }
            if info.max_eig / info.min_eig > MAX_CONDITION {
                return Err(Error::DegenerateMetric {
                    index: p,
                    detail: format!("condition number {:.3e}", info.max_eig / info.min_eig),
                });
            }
            for i in 0..d {
                for j in i..d {
                    inv[sym_index(d, i, j)][p] = info.inv[i][j];
                }
            }
            det[p] = info.det;
        }
        let inv = SymTensor::raw(g.grid().clone(), inv);
        Ok(Metric { g, inv, det })
    }

    pub fn flat(grid: &Arc<Grid>) -> Metric {
        Metric::new(SymTensor::identity(grid)).expect("identity is a metric")
    }

    /// `e^{u} δ`.
    pub fn conformally_flat(u: &Scalar) -> Result<Metric> {
        Metric::new(SymTensor::scaled_identity(&u.exp()))
    }

    pub fn tensor(&self) -> &SymTensor {
        &self.g
    }

    pub fn into_tensor(self) -> SymTensor {
        self.g
    }

    pub fn inverse(&self) -> &SymTensor {
        &self.inv
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.g.grid()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn det(&self) -> Scalar {
        Scalar::raw(self.grid().clone(), self.det.clone())
    }

    pub fn sqrt_det(&self) -> Scalar {
        Scalar::raw(self.grid().clone(), self.det.iter().map(|x| x.sqrt()).collect())
    }

    /// Riemannian volume form `√det(h) dx^0∧…∧dx^{d−1}`.
    pub fn volume_form(&self) -> Form {
        Form::raw(self.grid().clone(), self.dim(), vec![self.sqrt_det().into_data()])
    }

    /// Pointwise conformal rescaling `f·h`.
    pub fn conformal(&self, f: &Scalar) -> Result<Metric> {
        Metric::new(self.g.mul_scalar(f))
    }

    fn hinv(&self, i: usize, j: usize) -> &[f64] {
        self.inv.get(i, j)
    }
}

/// Pointwise inverse of the metric.
pub fn inverse_metric(h: &Metric) -> SymTensor {
    h.inverse().clone()
}

/// Christoffel symbols `Γ^k_{ij}`, packed symmetric in `(i, j)`.
#[derive(Clone, Debug)]
pub struct Christoffel {
    grid: Arc<Grid>,
    comps: Vec<Vec<f64>>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.comps[k * sym_count(d) + sym_index(d, i, j)]
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn christoffel(h: &Metric) -> Christoffel {
    let grid = h.grid().clone();
    let d = grid.dim();
    let n = grid.len();
    let g = h.tensor();
    // dh[a][c] = ∂_a h_c
    let dh: Vec<Vec<Vec<f64>>> = (0..d)
        .map(|a| g.comps().iter().map(|c| grid.diff(c, a)).collect())
        .collect();
    let dh_at = |a: usize, i: usize, j: usize| &dh[a][sym_index(d, i, j)];
    let mut lower = vec![vec![0.0; n]; d * sym_count(d)];
    for l in 0..d {
        for i in 0..d {
            for j in i..d {
                let out = &mut lower[l * sym_count(d) + sym_index(d, i, j)];
                acc(out, 0.5, dh_at(i, j, l));
                acc(out, 0.5, dh_at(j, i, l));
                acc(out, -0.5, dh_at(l, i, j));
            }
        }
    }
    let mut comps = vec![vec![0.0; n]; d * sym_count(d)];
    for k in 0..d {
        for ij in 0..sym_count(d) {
            let out = &mut comps[k * sym_count(d) + ij];
            for l in 0..d {
                acc2(out, 1.0, h.hinv(k, l), &lower[l * sym_count(d) + ij]);
            }
        }
    }
    Christoffel { grid, comps }
}

/// Ricci tensor from Christoffel derivatives.
pub fn ricci(h: &Metric) -> SymTensor {
    ricci_with(h, &christoffel(h))
}

pub fn ricci_with(h: &Metric, gam: &Christoffel) -> SymTensor {
    let grid = h.grid().clone();
    let d = grid.dim();
    let n = grid.len();
    // V_j = Γ^k_{kj}
    let v: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut out = vec![0.0; n];
            for k in 0..d {
                acc(&mut out, 1.0, gam.get(k, k, j));
            }
            out
        })
        .collect();
    let dv: Vec<Vec<Vec<f64>>> = (0..d).map(|i| v.iter().map(|vj| grid.diff(vj, i)).collect()).collect();
    SymTensor::from_comps_fn(&grid, |i, j| {
        let mut out = vec![0.0; n];
        for k in 0..d {
            acc(&mut out, 1.0, &grid.diff(gam.get(k, i, j), k));
        }
        acc(&mut out, -0.5, &dv[i][j]);
        acc(&mut out, -0.5, &dv[j][i]);
        for l in 0..d {
            acc2(&mut out, 1.0, &v[l], gam.get(l, i, j));
            for k in 0..d {
                acc2(&mut out, -1.0, gam.get(k, i, l), gam.get(l, k, j));
            }
        }
        out
    })
}

/// `Tr_h A = h^{ij} A_ij`.
pub fn trace(h: &Metric, a: &SymTensor) -> Scalar {
    let d = h.dim();
    let mut out = vec![0.0; h.grid().len()];
    for i in 0..d {
        for j in 0..d {
            acc2(&mut out, 1.0, h.hinv(i, j), a.get(i, j));
        }
    }
    Scalar::raw(h.grid().clone(), out)
}

pub fn scalar_curvature(h: &Metric) -> Scalar {
    trace(h, &ricci(h))
}

/// `A_ij A_kl h^{ik} h^{jl}`.
pub fn tensor_norm2(h: &Metric, a: &SymTensor) -> Scalar {
    let mixed = mixed(h, a);
    let d = h.dim();
    let mut out = vec![0.0; h.grid().len()];
    for i in 0..d {
        for j in 0..d {
            acc2(&mut out, 1.0, &mixed[i][j], &mixed[j][i]);
        }
    }
    Scalar::raw(h.grid().clone(), out)
}

/// `A^i_j = h^{ik} A_kj` as a dense array of component arrays.
fn mixed(h: &Metric, a: &SymTensor) -> Vec<Vec<Vec<f64>>> {
    let d = h.dim();
    let n = h.grid().len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let mut out = vec![0.0; n];
                    for k in 0..d {
                        acc2(&mut out, 1.0, h.hinv(i, k), a.get(k, j));
                    }
                    out
                })
                .collect()
        })
        .collect()
}

/// Hessian `∂_i∂_j f − Γ^k_{ij} ∂_k f`.
pub fn hessian(h: &Metric, f: &Scalar) -> Result<SymTensor> {
    ensure_grid(h.grid(), f.grid())?;
    Ok(hessian_with(h, &christoffel(h), f))
}

pub fn hessian_with(h: &Metric, gam: &Christoffel, f: &Scalar) -> SymTensor {
    let grid = h.grid().clone();
    let d = grid.dim();
    let df: Vec<Vec<f64>> = (0..d).map(|a| grid.diff(f.data(), a)).collect();
    SymTensor::from_comps_fn(&grid, |i, j| {
        let mut out = grid.diff(&df[j], i);
        for k in 0..d {
            acc2(&mut out, -1.0, gam.get(k, i, j), &df[k]);
        }
        out
    })
}

/// `(δα)_J = −h^{ab} (∇_a α)_{bJ}`.
pub fn codifferential(h: &Metric, alpha: &Form) -> Result<Form> {
    codifferential_with(h, &christoffel(h), alpha)
}

pub fn codifferential_with(h: &Metric, gam: &Christoffel, alpha: &Form) -> Result<Form> {
    ensure_grid(h.grid(), alpha.grid())?;
    let k = alpha.degree();
    if k == 0 {
        return Err(Error::Unsupported("codifferential of a 0-form".into()));
    }
    let grid = h.grid().clone();
    let d = grid.dim();
    let n = grid.len();
    let src = alpha.basis();
    let dst = FormBasis::new(d, k - 1);
    // Contracted Christoffel G^c = h^{ab} Γ^c_{ab}.
    let gc: Vec<Vec<f64>> = (0..d)
        .map(|c| {
            let mut out = vec![0.0; n];
            for a in 0..d {
                for b in 0..d {
                    acc2(&mut out, 1.0, h.hinv(a, b), gam.get(c, a, b));
                }
            }
            out
        })
        .collect();
    let mut deriv: Vec<Option<Vec<f64>>> = vec![None; d * src.len()];
    let mut comps = Vec::with_capacity(dst.len());
    for jt in dst.tuples() {
        let mut out = vec![0.0; n];
        let mut idx = Vec::with_capacity(k);
        for b in 0..d {
            idx.clear();
            idx.push(b);
            idx.extend_from_slice(jt);
            let Some((cb, sb)) = src.find(&idx) else { continue };
            for a in 0..d {
                let der = deriv[a * src.len() + cb].get_or_insert_with(|| grid.diff(alpha.comp(cb), a));
                acc2(&mut out, -sb, h.hinv(a, b), der);
            }
            // + G^b α_{bJ}
            acc2(&mut out, sb, &gc[b], alpha.comp(cb));
        }
        // + Σ_m h^{ab} Γ^c_{a j_m} α_{b j_1…c…}
        for m in 0..jt.len() {
            for b in 0..d {
                for c in 0..d {
                    idx.clear();
                    idx.push(b);
                    idx.extend_from_slice(jt);
                    idx[m + 1] = c;
                    let Some((cc, sc)) = src.find(&idx) else { continue };
                    for a in 0..d {
                        acc3(&mut out, sc, h.hinv(a, b), gam.get(c, a, jt[m]), alpha.comp(cc));
                    }
                }
            }
        }
        comps.push(out);
    }
    Ok(Form::raw(grid, k - 1, comps))
}

/// `(δT)_j = −h^{ab} (∇_a T)_{bj}`.
pub fn div_symtensor(h: &Metric, t: &SymTensor) -> Result<Form> {
    div_symtensor_with(h, &christoffel(h), t)
}

pub fn div_symtensor_with(h: &Metric, gam: &Christoffel, t: &SymTensor) -> Result<Form> {
    ensure_grid(h.grid(), t.grid())?;
    let grid = h.grid().clone();
    let d = grid.dim();
    let n = grid.len();
    let dt: Vec<Vec<Vec<f64>>> = (0..d).map(|a| t.comps().iter().map(|c| grid.diff(c, a)).collect()).collect();
    let comps = (0..d)
        .map(|j| {
            let mut out = vec![0.0; n];
            for a in 0..d {
                for b in 0..d {
                    let hab = h.hinv(a, b);
                    acc2(&mut out, -1.0, hab, &dt[a][sym_index(d, b, j)]);
                    for c in 0..d {
                        acc3(&mut out, 1.0, hab, gam.get(c, a, b), t.get(c, j));
                        acc3(&mut out, 1.0, hab, gam.get(c, a, j), t.get(b, c));
                    }
                }
            }
            out
        })
        .collect();
    Ok(Form::raw(grid, 1, comps))
}

/// Determinants of the `k × k` minors of `h^{-1}` for every pair of
/// increasing tuples, indexed `[I][J]`.
fn inverse_minors(h: &Metric, k: usize) -> Vec<Vec<Vec<f64>>> {
    let d = h.dim();
    let n = h.grid().len();
    let basis = FormBasis::new(d, k);
    let perms = permutations(k);
    let m = basis.len();
    let mut out = vec![vec![Vec::new(); m]; m];
    for i in 0..m {
        for j in i..m {
            let (ti, tj) = (basis.tuple(i), basis.tuple(j));
            let mut v = vec![1.0; n];
            if k > 0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                for (perm, sign) in &perms {
                    let mut term = vec![*sign; n];
                    for (r, &s) in perm.iter().enumerate() {
                        for (t, x) in term.iter_mut().zip(h.hinv(ti[r], tj[s])) {
                            *t *= x;
                        }
                    }
                    acc(&mut v, 1.0, &term);
                }
            }
            out[j][i] = v.clone();
            out[i][j] = v;
        }
    }
    out
}

fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(cur: &mut Vec<usize>, k: usize, out: &mut Vec<(Vec<usize>, f64)>) {
        if cur.len() == k {
            let mut sign = 1.0;
            for i in 0..k {
                for j in i + 1..k {
                    if cur[i] > cur[j] {
                        sign = -sign;
                    }
                }
            }
            out.push((cur.clone(), sign));
            return;
        }
        for i in 0..k {
            if !cur.contains(&i) {
                cur.push(i);
                rec(cur, k, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), k, &mut out);
    out
}

/// Contravariant components `α^I` for increasing tuples `I`.
fn raise_form(h: &Metric, alpha: &Form) -> Vec<Vec<f64>> {
    let minors = inverse_minors(h, alpha.degree());
    let n = h.grid().len();
    (0..minors.len())
        .map(|i| {
            let mut out = vec![0.0; n];
            for (j, c) in alpha.comps().iter().enumerate() {
                acc2(&mut out, 1.0, &minors[i][j], c);
            }
            out
        })
        .collect()
}

/// Determinant inner product `(1/k!) α_I β^I`.
pub fn det_inner(h: &Metric, alpha: &Form, beta: &Form) -> Result<Scalar> {
    ensure_grid(h.grid(), alpha.grid())?;
    ensure_grid(h.grid(), beta.grid())?;
    beta.expect_degree(alpha.degree())?;
    let raised = raise_form(h, beta);
    let mut out = vec![0.0; h.grid().len()];
    for (a, b) in alpha.comps().iter().zip(&raised) {
        acc2(&mut out, 1.0, a, b);
    }
    Ok(Scalar::raw(h.grid().clone(), out))
}

/// `|α|²_h` in the determinant norm.
pub fn norm2(h: &Metric, alpha: &Form) -> Result<Scalar> {
    det_inner(h, alpha, alpha)
}

/// `(ι_v α)_J = v^i α_{iJ}`.
pub fn interior(v: &VectorField, alpha: &Form) -> Result<Form> {
    ensure_grid(v.grid(), alpha.grid())?;
    let k = alpha.degree();
    if k == 0 {
        return Err(Error::Unsupported("interior product of a 0-form".into()));
    }
    let grid = alpha.grid().clone();
    let d = grid.dim();
    let src = alpha.basis();
    let dst = FormBasis::new(d, k - 1);
    let comps = dst
        .tuples()
        .iter()
        .map(|jt| {
            let mut out = vec![0.0; grid.len()];
            for i in 0..d {
                let mut idx = vec![i];
                idx.extend_from_slice(jt);
                if let Some((c, s)) = src.find(&idx) {
                    acc2(&mut out, s, v.comp(i), alpha.comp(c));
                }
            }
            out
        })
        .collect();
    Ok(Form::raw(grid, k - 1, comps))
}

/// `(α∘β)(v, w) = ⟨ι_v α, ι_w β⟩`, symmetrised.
pub fn circ_form(h: &Metric, alpha: &Form, beta: &Form) -> Result<SymTensor> {
    ensure_grid(h.grid(), alpha.grid())?;
    ensure_grid(h.grid(), beta.grid())?;
    beta.expect_degree(alpha.degree())?;
    let k = alpha.degree();
    if k == 0 {
        return Err(Error::Unsupported("circ of 0-forms".into()));
    }
    let d = h.dim();
    let n = h.grid().len();
    let src = alpha.basis();
    let sub = FormBasis::new(d, k - 1);
    let minors = inverse_minors(h, k - 1);
    // Slot components (ι_a α)_J as (array index, sign) pairs.
    let slot = |a: usize, j: usize| -> Option<(usize, f64)> {
        let mut idx = vec![a];
        idx.extend_from_slice(sub.tuple(j));
        src.find(&idx)
    };
    let pair = |x: &Form, y: &Form, a: usize, b: usize| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for j in 0..sub.len() {
            let Some((cj, sj)) = slot(a, j) else { continue };
            for l in 0..sub.len() {
                let Some((cl, sl)) = slot(b, l) else { continue };
                acc3(&mut out, sj * sl, x.comp(cj), y.comp(cl), &minors[j][l]);
            }
        }
        out
    };
    Ok(SymTensor::from_comps_fn(h.grid(), |a, b| {
        let mut ab = pair(alpha, beta, a, b);
        let ba = pair(alpha, beta, b, a);
        for (x, y) in ab.iter_mut().zip(&ba) {
            *x = 0.5 * (*x + y);
        }
        ab
    }))
}

/// `(A∘B)_ij = A_ik h^{kl} B_lj`, symmetrised.
pub fn circ_sym(h: &Metric, a: &SymTensor, b: &SymTensor) -> Result<SymTensor> {
    ensure_grid(h.grid(), a.grid())?;
    ensure_grid(h.grid(), b.grid())?;
    let mb = mixed(h, b);
    let d = h.dim();
    let n = h.grid().len();
    Ok(SymTensor::from_comps_fn(h.grid(), |i, j| {
        let mut out = vec![0.0; n];
        for k in 0..d {
            acc2(&mut out, 0.5, a.get(i, k), &mb[k][j]);
            acc2(&mut out, 0.5, a.get(j, k), &mb[k][i]);
        }
        out
    }))
}

/// `K Δ₁ α = Σ_{ab} h^{ab} K(∂_a) ∧ ι_{∂_b} α`; in components
/// `(KΔ₁α)_I = Σ_m K^b_{i_m} α_{i_1…b…i_k}` with `b` in slot `m`.
pub fn delta1(h: &Metric, kt: &SymTensor, alpha: &Form) -> Result<Form> {
    ensure_grid(h.grid(), kt.grid())?;
    ensure_grid(h.grid(), alpha.grid())?;
    let k = alpha.degree();
    if k == 0 {
        return Err(Error::Unsupported("Δ₁ acts on forms of degree ≥ 1".into()));
    }
    let d = h.dim();
    let n = h.grid().len();
    let km = mixed(h, kt);
    let basis = alpha.basis();
    let comps = basis
        .tuples()
        .iter()
        .map(|it| {
            let mut out = vec![0.0; n];
            for m in 0..k {
                for b in 0..d {
                    let mut idx = it.clone();
                    idx[m] = b;
                    if let Some((c, s)) = basis.find(&idx) {
                        acc2(&mut out, s, &km[b][it[m]], alpha.comp(c));
                    }
                }
            }
            out
        })
        .collect();
    Ok(Form::raw(h.grid().clone(), k, comps))
}

/// `(ψ ⌟ H)_J = (1/p!) ψ^{I} H_{IJ}`, contracting the leading slots of `H`.
pub fn form_contract(h: &Metric, psi: &Form, big: &Form) -> Result<Form> {
    ensure_grid(h.grid(), psi.grid())?;
    ensure_grid(h.grid(), big.grid())?;
    let (p, q) = (psi.degree(), big.degree());
    if p > q {
        return Err(Error::Unsupported(format!("cannot contract a {p}-form into a {q}-form")));
    }
    let d = h.dim();
    let n = h.grid().len();
    let raised = raise_form(h, psi);
    let pb = psi.basis();
    let hb = big.basis();
    let dst = FormBasis::new(d, q - p);
    let comps = dst
        .tuples()
        .iter()
        .map(|jt| {
            let mut out = vec![0.0; n];
            for (i, it) in pb.tuples().iter().enumerate() {
                let mut idx = it.clone();
                idx.extend_from_slice(jt);
                if let Some((c, s)) = hb.find(&idx) {
                    acc2(&mut out, s, &raised[i], big.comp(c));
                }
            }
            out
        })
        .collect();
    Ok(Form::raw(h.grid().clone(), q - p, comps))
}

/// Index raising `α ↦ α^♯`.
pub fn sharp(h: &Metric, alpha: &Form) -> Result<VectorField> {
    ensure_grid(h.grid(), alpha.grid())?;
    alpha.expect_degree(1)?;
    let d = h.dim();
    let comps = (0..d)
        .map(|i| {
            let mut out = vec![0.0; h.grid().len()];
            for j in 0..d {
                acc2(&mut out, 1.0, h.hinv(i, j), alpha.comp(j));
            }
            out
        })
        .collect();
    Ok(VectorField::raw(h.grid().clone(), comps))
}

/// Index lowering `v ↦ v^♭`.
pub fn flat(h: &Metric, v: &VectorField) -> Result<Form> {
    ensure_grid(h.grid(), v.grid())?;
    let d = h.dim();
    let comps = (0..d)
        .map(|i| {
            let mut out = vec![0.0; h.grid().len()];
            for j in 0..d {
                acc2(&mut out, 1.0, h.tensor().get(i, j), v.comp(j));
            }
            out
        })
        .collect();
    Ok(Form::raw(h.grid().clone(), 1, comps))
}

/// `α(v)` with `v = β^♯`, i.e. `ι_{β♯} α`.
pub fn contract_sharp(h: &Metric, alpha: &Form, beta: &Form) -> Result<Form> {
    interior(&sharp(h, beta)?, alpha)
}

/// `K(v)` for a symmetric tensor and vector field, as a 1-form.
pub fn sym_apply(kt: &SymTensor, v: &VectorField) -> Result<Form> {
    ensure_grid(kt.grid(), v.grid())?;
    let d = kt.dim();
    let comps = (0..d)
        .map(|i| {
            let mut out = vec![0.0; kt.grid().len()];
            for j in 0..d {
                acc2(&mut out, 1.0, kt.get(i, j), v.comp(j));
            }
            out
        })
        .collect();
    Ok(Form::raw(kt.grid().clone(), 1, comps))
}
