//! Residuals of the full-dimensional soliton system in the string and
//! Einstein frames, the λ-field of the gradient condition, and pullback by
//! grid-compatible affine maps of the torus.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{differential, Form, Scalar, SymTensor, VectorField};
use crate::geometry::{
    christoffel, circ_form, codifferential_with, flat, hessian_with, interior, norm2, ricci_with, sharp, Christoffel,
    Metric,
};
use crate::grid::{Axis, Grid};

/// Ratio between the closedness violation tolerated on construction and the
/// estimated truncation error of the input.
const CLOSEDNESS_FACTOR: f64 = 100.0;

/// Interior margin (in τ-samples) excluded from cylinder residual norms.
pub const TAU_MARGIN: usize = 4;

/// `(g, H, φ)` with optional soliton vector field and closed 2-form.
#[derive(Clone, Debug)]
pub struct SolitonFields {
    pub g: Metric,
    pub h: Option<Form>,
    pub phi: Scalar,
    pub v: Option<VectorField>,
    pub alpha: Option<Form>,
}

/// Rough truncation-error scale of a form: the gap between second- and
/// fourth-order derivatives of its components.
fn truncation_scale(f: &Form) -> f64 {
    let grid = f.grid();
    let mut worst: f64 = 0.0;
    for a in 0..grid.dim() {
        let ax = grid.axis(a);
        let m = ax.points();
        let s = grid.stride(a);
        let inv = 1.0 / (2.0 * ax.spacing());
        for c in f.comps() {
            let d4 = grid.diff(c, a);
            for (p, v4) in d4.iter().enumerate() {
                let i = (p / s) % m;
                let (im, ip) = match ax {
                    Axis::Periodic { .. } => ((i + m - 1) % m, (i + 1) % m),
                    Axis::Open { .. } => {
                        if i == 0 || i + 1 == m {
                            continue;
                        }
                        (i - 1, i + 1)
                    }
                };
                let base = p - i * s;
                let d2 = (c[base + ip * s] - c[base + im * s]) * inv;
                worst = worst.max((v4 - d2).abs());
            }
        }
    }
    worst
}

pub(crate) fn check_closed(f: &Form, what: &str) -> Result<()> {
    if f.degree() >= f.grid().dim() {
        return Ok(());
    }
    let df = f.exterior_derivative()?;
    let limit = CLOSEDNESS_FACTOR * truncation_scale(f) + 1e-10 * (1.0 + f.max_abs());
    let max = df.max_abs();
    if max > limit {
        return Err(Error::NotClosed { what: what.to_string(), max, limit });
    }
    Ok(())
}

impl SolitonFields {
    /// Gradient configuration with `v = grad φ` and `α = 0`.
    pub fn new(g: Metric, h: Option<Form>, phi: Scalar) -> Result<SolitonFields> {
        SolitonFields::general(g, h, phi, None, None)
    }

    pub fn general(
        g: Metric,
        h: Option<Form>,
        phi: Scalar,
        v: Option<VectorField>,
        alpha: Option<Form>,
    ) -> Result<SolitonFields> {
        let grid = g.grid().clone();
        phi.check_same_grid(&grid)?;
        if let Some(h3) = &h {
            h3.check_same_grid(&grid)?;
            h3.expect_degree(3)?;
            check_closed(h3, "H")?;
        }
        if let Some(v) = &v {
            v.check_same_grid(&grid)?;
        }
        if let Some(a) = &alpha {
            a.check_same_grid(&grid)?;
            a.expect_degree(2)?;
            check_closed(a, "α")?;
        }
        Ok(SolitonFields { g, h, phi, v, alpha })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.g.grid()
    }
}

/// Einstein residual `Ric + ½L_v g − ½H∘H` and Maxwell residual
/// `δH + H(v) + α`.
pub fn string_residuals(s: &SolitonFields) -> Result<(SymTensor, Form)> {
    let g = &s.g;
    let grid = g.grid().clone();
    let gam = christoffel(g);
    let lie_half = match &s.v {
        None => hessian_with(g, &gam, &s.phi),
        Some(v) => half_lie_derivative(g, &gam, v)?,
    };
    let mut e = &ricci_with(g, &gam) + &lie_half;
    let mut mx = match &s.alpha {
        Some(a) => a.clone(),
        None => Form::zeros(&grid, 2)?,
    };
    if let Some(h3) = &s.h {
        if grid.dim() < 3 {
            return Err(Error::Unsupported("a 3-form flux needs ambient dimension ≥ 3".into()));
        }
        e = &e - &circ_form(g, h3, h3)?.scale(0.5);
        let v = match &s.v {
            Some(v) => v.clone(),
            None => sharp(g, &differential(&s.phi))?,
        };
        mx = &(&mx + &codifferential_with(g, &gam, h3)?) + &interior(&v, h3)?;
    }
    Ok((e, mx))
}

/// `½ L_v g`, the symmetrised covariant derivative of `v^♭`.
fn half_lie_derivative(g: &Metric, gam: &Christoffel, v: &VectorField) -> Result<SymTensor> {
    let vb = flat(g, v)?;
    let grid = g.grid().clone();
    let d = grid.dim();
    Ok(SymTensor::from_comps_fn(&grid, |i, j| {
        let mut out: Vec<f64> = grid
            .diff(vb.comp(j), i)
            .iter()
            .zip(grid.diff(vb.comp(i), j))
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        for k in 0..d {
            for ((o, gk), vk) in out.iter_mut().zip(gam.get(k, i, j)).zip(vb.comp(k)) {
                *o -= gk * vk;
            }
        }
        out
    }))
}

/// `λ = δdφ + |dφ|² − |H|²` pointwise.
pub fn lambda_field(s: &SolitonFields) -> Result<Scalar> {
    let g = &s.g;
    let dphi = differential(&s.phi);
    let lap = codifferential_with(g, &christoffel(g), &dphi)?.comp_scalar(0);
    let mut lam = &lap + &norm2(g, &dphi)?;
    if let Some(h3) = &s.h {
        lam = &lam - &norm2(g, h3)?;
    }
    Ok(lam)
}

/// Mean of a λ-field and its largest deviation from the mean.
pub fn lambda_report(lam: &Scalar) -> (f64, f64) {
    let mean = lam.mean();
    let dev = lam.data().iter().fold(0.0_f64, |m, x| m.max((x - mean).abs()));
    (mean, dev)
}

/// Residuals of the Einstein-frame system.
#[derive(Clone, Debug)]
pub struct EinsteinResiduals {
    pub einstein: SymTensor,
    pub maxwell: Form,
    pub dilaton: Scalar,
}

/// Evaluates the Einstein-frame Einstein, Maxwell and dilaton equations
/// with coefficients `1/(n−1)`, `4/(n−1)` and weight `e^{−4φ/(n−1)}`.
pub fn einstein_residuals(s: &SolitonFields, lambda: f64, n: usize) -> Result<EinsteinResiduals> {
    let g = &s.g;
    let grid = g.grid().clone();
    if grid.dim() != n + 1 {
        return Err(Error::Unsupported(format!(
            "ambient dimension {} does not equal n + 1 = {}",
            grid.dim(),
            n + 1
        )));
    }
    if n < 2 {
        return Err(Error::Unsupported("Einstein frame needs n ≥ 2".into()));
    }
    let m = (n - 1) as f64;
    let gam = christoffel(g);
    let dphi = differential(&s.phi);
    let weight = s.phi.map(|p| (-4.0 * p / m).exp());
    let lam_term = s.phi.map(|p| lambda * (2.0 * p / m).exp());
    let h2 = match &s.h {
        Some(h3) => norm2(g, h3)?,
        None => Scalar::zeros(&grid),
    };
    let source = &(&weight * &h2) + &lam_term;

    let mut einstein = &ricci_with(g, &gam) - &SymTensor::sym_product(&dphi, &dphi)?.scale(1.0 / m);
    einstein = &einstein + &g.tensor().mul_scalar(&source).scale(1.0 / m);
    let mut maxwell = Form::zeros(&grid, 2)?;
    if let Some(h3) = &s.h {
        einstein = &einstein - &circ_form(g, h3, h3)?.mul_scalar(&weight).scale(0.5);
        let v = sharp(g, &dphi)?;
        maxwell = &codifferential_with(g, &gam, h3)? + &interior(&v, h3)?.scale(4.0 / m);
    }
    let lap = codifferential_with(g, &gam, &dphi)?.comp_scalar(0);
    let dilaton = &lap - &source;
    Ok(EinsteinResiduals { einstein, maxwell, dilaton })
}

/// Flat indices of the points whose τ-index keeps at least
/// [`TAU_MARGIN`] samples to either end; every point on a torus.
pub fn interior_points(grid: &Grid) -> Vec<usize> {
    match grid.tau_axis() {
        None => (0..grid.len()).collect(),
        Some(t) => {
            let m = grid.axis(t).points();
            let s = grid.stride(t);
            (0..grid.len())
                .filter(|p| {
                    let i = (p / s) % m;
                    i >= TAU_MARGIN && i + TAU_MARGIN < m
                })
                .collect()
        }
    }
}

/// Max over interior points and components.
pub fn interior_max(comps: &[Vec<f64>], grid: &Grid) -> f64 {
    let pts = interior_points(grid);
    comps
        .iter()
        .flat_map(|c| pts.iter().map(move |&p| c[p].abs()))
        .fold(0.0, f64::max)
}

impl EinsteinResiduals {
    /// Interior max norms of the Einstein, Maxwell and dilaton residuals.
    pub fn interior_norms(&self) -> [f64; 3] {
        let grid = self.dilaton.grid();
        [
            interior_max(self.einstein.comps(), grid),
            interior_max(self.maxwell.comps(), grid),
            interior_max(&[self.dilaton.data().to_vec()], grid),
        ]
    }
}

/// Affine self-map `x ↦ A x + b` of the torus factor. `A` must be a signed
/// permutation (the maps under which the centered stencils are exactly
/// equivariant) and `b` a whole number of grid steps per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub matrix: Vec<Vec<i64>>,
    pub shift: Vec<i64>,
}

impl AffineMap {
    pub fn identity(n: usize) -> AffineMap {
        AffineMap {
            matrix: (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect(),
            shift: vec![0; n],
        }
    }

    pub fn translation(steps: Vec<i64>) -> AffineMap {
        let mut m = AffineMap::identity(steps.len());
        m.shift = steps;
        m
    }

    pub fn swap(n: usize, a: usize, b: usize) -> AffineMap {
        let mut m = AffineMap::identity(n);
        m.matrix.swap(a, b);
        m
    }

    /// Checks compatibility with the spatial factor of `grid`; returns the
    /// permutation `σ` and signs with `(A x)_a = sign_a · x_{σ(a)}`.
    fn decompose(&self, spatial: &Grid) -> Result<(Vec<usize>, Vec<i64>)> {
        let n = spatial.dim();
        if self.matrix.len() != n || self.matrix.iter().any(|r| r.len() != n) || self.shift.len() != n {
            return Err(Error::IncompatibleMap(format!("expected {n}×{n} matrix and {n} shifts")));
        }
        let mut perm = vec![0; n];
        let mut sign = vec![0; n];
        let mut used = vec![false; n];
        for (a, row) in self.matrix.iter().enumerate() {
            let nz: Vec<usize> = (0..n).filter(|&b| row[b] != 0).collect();
            if nz.len() != 1 || row[nz[0]].abs() != 1 {
                return Err(Error::IncompatibleMap(
                    "only signed permutation matrices commute with the axis-aligned stencils".into(),
                ));
            }
            let b = nz[0];
            if used[b] {
                return Err(Error::IncompatibleMap("matrix is singular".into()));
            }
            used[b] = true;
            if spatial.axis(a) != spatial.axis(b) {
                return Err(Error::IncompatibleMap(format!(
                    "axes {a} and {b} differ in points or period"
                )));
            }
            perm[a] = b;
            sign[a] = row[b];
        }
        Ok((perm, sign))
    }
}

struct Pullback {
    grid: Arc<Grid>,
    /// For each point, the flat index of its image.
    source: Vec<usize>,
    /// Jacobian `J[a][b] = ∂(f^a)/∂x^b` on the full grid dimension.
    jac: Vec<Vec<f64>>,
}

impl Pullback {
    fn new(map: &AffineMap, grid: &Arc<Grid>) -> Result<Pullback> {
        let spatial = grid.spatial();
        let (perm, sign) = map.decompose(&spatial)?;
        let off = usize::from(grid.tau_axis().is_some());
        let d = grid.dim();
        let mut jac = vec![vec![0.0; d]; d];
        if off == 1 {
            jac[0][0] = 1.0;
        }
        for a in 0..perm.len() {
            jac[a + off][perm[a] + off] = sign[a] as f64;
        }
        let source = (0..grid.len())
            .map(|p| {
                let idx = grid.unravel(p);
                let mut img = idx.clone();
                for a in 0..perm.len() {
                    let m = spatial.axis(a).points() as i64;
                    let x = idx[perm[a] + off] as i64 * sign[a] + map.shift[a];
                    img[a + off] = x.rem_euclid(m) as usize;
                }
                grid.ravel(&img)
            })
            .collect();
        Ok(Pullback { grid: grid.clone(), source, jac })
    }

    fn resample(&self, v: &[f64]) -> Vec<f64> {
        self.source.iter().map(|&q| v[q]).collect()
    }

    fn scalar(&self, f: &Scalar) -> Scalar {
        Scalar::raw(self.grid.clone(), self.resample(f.data()))
    }

    /// `(f^*α)_I = Σ_J Π_m J[j_m][i_m] α_J(f(x))` over all index tuples `J`.
    fn form(&self, f: &Form) -> Form {
        let basis = f.basis();
        let comps = basis
            .tuples()
            .iter()
            .map(|it| {
                let mut out = vec![0.0; self.grid.len()];
                for (c, jt) in basis.tuples().iter().enumerate() {
                    let coeff = tuple_coefficient(&self.jac, jt, it);
                    if coeff != 0.0 {
                        let src = self.resample(f.comp(c));
                        for (o, s) in out.iter_mut().zip(src) {
                            *o += coeff * s;
                        }
                    }
                }
                out
            })
            .collect();
        Form::raw(self.grid.clone(), f.degree(), comps)
    }

    fn sym(&self, t: &SymTensor) -> SymTensor {
        let d = self.grid.dim();
        SymTensor::from_comps_fn(&self.grid, |i, j| {
            let mut out = vec![0.0; self.grid.len()];
            for a in 0..d {
                for b in 0..d {
                    let coeff = self.jac[a][i] * self.jac[b][j];
                    if coeff != 0.0 {
                        for (o, s) in out.iter_mut().zip(self.resample(t.get(a, b))) {
                            *o += coeff * s;
                        }
                    }
                }
            }
            out
        })
    }

    /// Vector fields push back with the inverse Jacobian, which for a
    /// signed permutation is the transpose.
    fn vector(&self, v: &VectorField) -> VectorField {
        let d = self.grid.dim();
        let comps = (0..d)
            .map(|i| {
                let mut out = vec![0.0; self.grid.len()];
                for a in 0..d {
                    let coeff = self.jac[a][i];
                    if coeff != 0.0 {
                        for (o, s) in out.iter_mut().zip(self.resample(v.comp(a))) {
                            *o += coeff * s;
                        }
                    }
                }
                out
            })
            .collect();
        VectorField::raw(self.grid.clone(), comps)
    }
}

/// Coefficient of `α_J` in `(f^*α)_I`: the determinant of the Jacobian
/// minor with rows `J` and columns `I`.
fn tuple_coefficient(jac: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    let mut m = vec![vec![0.0; k]; k];
    for r in 0..k {
        for c in 0..k {
            m[r][c] = jac[rows[r]][cols[c]];
        }
    }
    det_small(&m)
}

fn det_small(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        k => (0..k)
            .map(|c| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &x)| x).collect())
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][c] * det_small(&minor)
            })
            .sum(),
    }
}

/// Pulls every field back along `map`. On a cylinder the map acts on the
/// spatial factor and fixes τ.
pub fn pullback_affine(map: &AffineMap, s: &SolitonFields) -> Result<SolitonFields> {
    let pb = Pullback::new(map, s.grid())?;
    let g = Metric::new(pb.sym(s.g.tensor()))?;
    Ok(SolitonFields {
        g,
        h: s.h.as_ref().map(|h| pb.form(h)),
        phi: pb.scalar(&s.phi),
        v: s.v.as_ref().map(|v| pb.vector(v)),
        alpha: s.alpha.as_ref().map(|a| pb.form(a)),
    })
}

/// Pullback of individual fields, for checking equivariance of residuals.
pub fn pullback_form(map: &AffineMap, f: &Form) -> Result<Form> {
    Ok(Pullback::new(map, f.grid())?.form(f))
}

pub fn pullback_sym(map: &AffineMap, t: &SymTensor) -> Result<SymTensor> {
    Ok(Pullback::new(map, t.grid())?.sym(t))
}

pub fn pullback_scalar(map: &AffineMap, f: &Scalar) -> Result<Scalar> {
    Ok(Pullback::new(map, f.grid())?.scalar(f))
}
