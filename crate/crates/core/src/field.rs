//! Component arrays over a [`Grid`].
//!
//! Tensor fields keep one array per independent component. Symmetric
//! 2-tensors are packed upper-triangular, `(0,0),(0,1),…,(0,d−1),(1,1),…`;
//! k-forms use increasing index tuples in lexicographic order.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

pub fn sym_count(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Packed position of the symmetric pair `(i, j)`.
pub fn sym_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * i.saturating_sub(1) / 2 + j - i
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Increasing index tuples labelling the components of k-forms in `d` dimensions.
#[derive(Clone, Debug)]
pub struct FormBasis {
    d: usize,
    tuples: Vec<Vec<usize>>,
}

impl FormBasis {
    pub fn new(d: usize, k: usize) -> FormBasis {
        let mut tuples = Vec::with_capacity(binomial(d, k));
        let mut cur = Vec::with_capacity(k);
        fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..d {
                cur.push(i);
                rec(i + 1, d, k, cur, out);
                cur.pop();
            }
        }
        rec(0, d, k, &mut cur, &mut tuples);
        FormBasis { d, tuples }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tuple(&self, c: usize) -> &[usize] {
        &self.tuples[c]
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    /// Component and sign for an arbitrary index tuple; `None` on repeats.
    pub fn find(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let mut v = idx.to_vec();
        let mut sign = 1.0;
        for i in 0..v.len() {
            for j in 0..v.len() - 1 - i {
                if v[j] > v[j + 1] {
                    v.swap(j, j + 1);
                    sign = -sign;
                } else if v[j] == v[j + 1] {
                    return None;
                }
            }
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        self.tuples.iter().position(|t| *t == v).map(|c| (c, sign))
    }
}

#[derive(Clone, Debug)]
pub struct Scalar {
    grid: Arc<Grid>,
    data: Vec<f64>,
}

impl Scalar {
    pub fn new(grid: Arc<Grid>, data: Vec<f64>) -> Result<Scalar> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "scalar has {} values for {} points",
                data.len(),
                grid.len()
            )));
        }
        Ok(Scalar { grid, data })
    }

    pub(crate) fn raw(grid: Arc<Grid>, data: Vec<f64>) -> Scalar {
        debug_assert_eq!(data.len(), grid.len());
        Scalar { grid, data }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Scalar {
        Scalar::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Scalar {
        Scalar { grid: grid.clone(), data: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Scalar {
        Scalar { grid: grid.clone(), data: grid.sample(f) }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Scalar {
        Scalar { grid: self.grid.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Scalar, f: impl Fn(f64, f64) -> f64) -> Scalar {
        debug_assert!(same_grid(&self.grid, &other.grid));
        Scalar {
            grid: self.grid.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn partial_derivative(&self, axis: usize) -> Result<Scalar> {
        self.grid.check_axis(axis)?;
        Ok(self.d(axis))
    }

    pub(crate) fn d(&self, axis: usize) -> Scalar {
        Scalar { grid: self.grid.clone(), data: self.grid.diff(&self.data, axis) }
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.data)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation over grid points.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn l2(&self) -> f64 {
        self.grid.integrate(&self.data.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn exp(&self) -> Scalar {
        self.map(f64::exp)
    }

    pub fn scale(&self, c: f64) -> Scalar {
        self.map(|x| c * x)
    }

    pub fn check_same_grid(&self, other: &Arc<Grid>) -> Result<()> {
        check_grid(&self.grid, other)
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<&Scalar> for f64 {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        rhs.scale(self)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.scale(-1.0)
    }
}

macro_rules! component_field {
    ($t:ident) => {
        impl $t {
            pub fn grid(&self) -> &Arc<Grid> {
                &self.grid
            }

            pub fn comps(&self) -> &[Vec<f64>] {
                &self.comps
            }

            pub fn comp(&self, c: usize) -> &[f64] {
                &self.comps[c]
            }

            pub fn comp_scalar(&self, c: usize) -> Scalar {
                Scalar::raw(self.grid.clone(), self.comps[c].clone())
            }

            pub fn into_comps(self) -> Vec<Vec<f64>> {
                self.comps
            }

            pub fn max_abs(&self) -> f64 {
                self.comps.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
            }

            /// `sqrt(Σ_c ∫ comp_c²)`, a coordinate L² norm.
            pub fn l2(&self) -> f64 {
                self.comps
                    .iter()
                    .map(|c| self.grid.integrate(&c.iter().map(|x| x * x).collect::<Vec<_>>()))
                    .sum::<f64>()
                    .sqrt()
            }

            pub fn is_finite(&self) -> bool {
                self.comps.iter().flatten().all(|x| x.is_finite())
            }

            pub fn map_comps(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
                let mut out = self.clone();
                out.comps = self.comps.iter().map(|c| f(c)).collect();
                out
            }

            pub fn zip_comps(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
                debug_assert!(same_grid(&self.grid, &other.grid));
                debug_assert_eq!(self.comps.len(), other.comps.len());
                let mut out = self.clone();
                for (o, b) in out.comps.iter_mut().zip(&other.comps) {
                    for (x, &y) in o.iter_mut().zip(b) {
                        *x = f(*x, y);
                    }
                }
                out
            }

            pub fn scale(&self, c: f64) -> Self {
                self.map_comps(|v| v.iter().map(|x| c * x).collect())
            }

            /// Pointwise product with a scalar field.
            pub fn mul_scalar(&self, s: &Scalar) -> Self {
                debug_assert!(same_grid(&self.grid, s.grid()));
                self.map_comps(|v| v.iter().zip(s.data()).map(|(x, y)| x * y).collect())
            }

            /// Componentwise derivative along `axis`.
            pub fn partial_derivative(&self, axis: usize) -> Result<Self> {
                self.grid.check_axis(axis)?;
                Ok(self.map_comps(|v| self.grid.diff(v, axis)))
            }

            pub fn check_same_grid(&self, other: &Arc<Grid>) -> Result<()> {
                check_grid(&self.grid, other)
            }
        }

        impl Add for &$t {
            type Output = $t;
            fn add(self, rhs: &$t) -> $t {
                self.zip_comps(rhs, |a, b| a + b)
            }
        }

        impl Sub for &$t {
            type Output = $t;
            fn sub(self, rhs: &$t) -> $t {
                self.zip_comps(rhs, |a, b| a - b)
            }
        }

        impl Mul<&$t> for f64 {
            type Output = $t;
            fn mul(self, rhs: &$t) -> $t {
                rhs.scale(self)
            }
        }
    };
}

/// Differential k-form.
#[derive(Clone, Debug)]
pub struct Form {
    grid: Arc<Grid>,
    degree: usize,
    comps: Vec<Vec<f64>>,
}

component_field!(Form);

impl Form {
    pub fn new(grid: Arc<Grid>, degree: usize, comps: Vec<Vec<f64>>) -> Result<Form> {
        if degree > grid.dim() {
            return Err(Error::Unsupported(format!(
                "{degree}-forms do not exist on a {}-dimensional grid",
                grid.dim()
            )));
        }
        let count = binomial(grid.dim(), degree);
        if comps.len() != count || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidGrid(format!(
                "{degree}-form needs {count} components of {} values",
                grid.len()
            )));
        }
        Ok(Form { grid, degree, comps })
    }

    pub(crate) fn raw(grid: Arc<Grid>, degree: usize, comps: Vec<Vec<f64>>) -> Form {
        debug_assert_eq!(comps.len(), binomial(grid.dim(), degree));
        Form { grid, degree, comps }
    }

    pub fn zeros(grid: &Arc<Grid>, degree: usize) -> Result<Form> {
        let count = binomial(grid.dim(), degree);
        Form::new(grid.clone(), degree, vec![vec![0.0; grid.len()]; count])
    }

    /// Form with components given by `f(tuple, x)`.
    pub fn from_fn(grid: &Arc<Grid>, degree: usize, f: impl Fn(&[usize], &[f64]) -> f64) -> Result<Form> {
        let basis = FormBasis::new(grid.dim(), degree);
        let comps = basis.tuples().iter().map(|t| grid.sample(|x| f(t, x))).collect();
        Form::new(grid.clone(), degree, comps)
    }

    pub fn from_scalar(s: &Scalar) -> Form {
        Form { grid: s.grid().clone(), degree: 0, comps: vec![s.data().to_vec()] }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn basis(&self) -> FormBasis {
        FormBasis::new(self.grid.dim(), self.degree)
    }

    /// Component array for an arbitrary tuple together with its sign.
    pub fn get(&self, idx: &[usize]) -> Option<(&[f64], f64)> {
        self.basis().find(idx).map(|(c, s)| (self.comps[c].as_slice(), s))
    }

    pub fn expect_degree(&self, k: usize) -> Result<()> {
        if self.degree == k {
            Ok(())
        } else {
            Err(Error::DegreeMismatch { expected: k, found: self.degree })
        }
    }
}

impl Form {
    /// Exterior derivative via the coordinate formula
    /// `(dα)_{i0…ik} = Σ_m (−1)^m ∂_{i_m} α_{i0…î_m…ik}`.
    pub fn exterior_derivative(&self) -> Result<Form> {
        let d = self.grid.dim();
        if self.degree >= d {
            return Err(Error::Unsupported(format!(
                "d of a {}-form on a {d}-dimensional grid",
                self.degree
            )));
        }
        let src = self.basis();
        let dst = FormBasis::new(d, self.degree + 1);
        let n = self.grid.len();
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; d * src.len()];
        let mut comps = Vec::with_capacity(dst.len());
        for t in dst.tuples() {
            let mut out = vec![0.0; n];
            for (m, &axis) in t.iter().enumerate() {
                let rest: Vec<usize> = t.iter().enumerate().filter(|&(j, _)| j != m).map(|(_, &i)| i).collect();
                let (c, _) = src.find(&rest).expect("sub-tuple of an increasing tuple is increasing");
                let slot = &mut cache[axis * src.len() + c];
                let der = slot.get_or_insert_with(|| self.grid.diff(&self.comps[c], axis));
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                for (o, v) in out.iter_mut().zip(der.iter()) {
                    *o += sign * v;
                }
            }
            comps.push(out);
        }
        Ok(Form::raw(self.grid.clone(), self.degree + 1, comps))
    }

    /// Integral of the component along the coordinate torus spanned by
    /// `cycle`, taken at index 0 in every transverse direction.
    pub fn fundamental_period(&self, cycle: &[usize]) -> Result<f64> {
        if cycle.len() != self.degree {
            return Err(Error::DegreeMismatch { expected: cycle.len(), found: self.degree });
        }
        for &a in cycle {
            self.grid.check_axis(a)?;
            if !self.grid.axis(a).is_periodic() {
                return Err(Error::Unsupported("periods are taken over periodic axes only".into()));
            }
        }
        let (c, sign) = match self.basis().find(cycle) {
            Some(found) => found,
            None => return Err(Error::Unsupported("cycle axes must be distinct".into())),
        };
        let shape: Vec<usize> = cycle.iter().map(|&a| self.grid.axis(a).points()).collect();
        let cell: f64 = cycle.iter().map(|&a| self.grid.spacing(a)).product();
        let total: usize = shape.iter().product();
        let mut idx = vec![0; self.grid.dim()];
        // Neumaier summation: the period must hold to ~1e-12 over 10⁵+ cells.
        let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
        for q in 0..total {
            let mut r = q;
            for (pos, &a) in cycle.iter().enumerate().rev() {
                idx[a] = r % shape[pos];
                r /= shape[pos];
            }
            let v = self.comps[c][self.grid.ravel(&idx)];
            let t = sum + v;
            comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
            sum = t;
        }
        Ok(sign * (sum + comp) * cell)
    }
}

/// `df` as a 1-form.
pub fn differential(f: &Scalar) -> Form {
    let grid = f.grid().clone();
    let comps = (0..grid.dim()).map(|a| grid.diff(f.data(), a)).collect();
    Form::raw(grid, 1, comps)
}

/// Symmetric covariant 2-tensor.
#[derive(Clone, Debug)]
pub struct SymTensor {
    grid: Arc<Grid>,
    comps: Vec<Vec<f64>>,
}

component_field!(SymTensor);

impl SymTensor {
    pub fn new(grid: Arc<Grid>, comps: Vec<Vec<f64>>) -> Result<SymTensor> {
        let count = sym_count(grid.dim());
        if comps.len() != count || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidGrid(format!(
                "symmetric tensor needs {count} components of {} values",
                grid.len()
            )));
        }
        Ok(SymTensor { grid, comps })
    }

    pub(crate) fn raw(grid: Arc<Grid>, comps: Vec<Vec<f64>>) -> SymTensor {
        debug_assert_eq!(comps.len(), sym_count(grid.dim()));
        SymTensor { grid, comps }
    }

    pub fn zeros(grid: &Arc<Grid>) -> SymTensor {
        SymTensor::raw(grid.clone(), vec![vec![0.0; grid.len()]; sym_count(grid.dim())])
    }

    /// `f(x)·δ_ij`.
    pub fn scaled_identity(f: &Scalar) -> SymTensor {
        let grid = f.grid().clone();
        let d = grid.dim();
        let mut t = SymTensor::zeros(&grid);
        for i in 0..d {
            t.comps[sym_index(d, i, i)] = f.data().to_vec();
        }
        t
    }

    pub fn identity(grid: &Arc<Grid>) -> SymTensor {
        SymTensor::scaled_identity(&Scalar::constant(grid, 1.0))
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(usize, usize, &[f64]) -> f64) -> SymTensor {
        let d = grid.dim();
        let mut comps = Vec::with_capacity(sym_count(d));
        for i in 0..d {
            for j in i..d {
                comps.push(grid.sample(|x| f(i, j, x)));
            }
        }
        SymTensor::raw(grid.clone(), comps)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[sym_index(self.dim(), i, j)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Vec<f64> {
        let d = self.dim();
        &mut self.comps[sym_index(d, i, j)]
    }

    /// Dense `d × d` matrix at point `p`.
    pub fn at(&self, p: usize) -> [[f64; 4]; 4] {
        let d = self.dim();
        let mut m = [[0.0; 4]; 4];
        for i in 0..d {
            for j in i..d {
                let v = self.comps[sym_index(d, i, j)][p];
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    /// Symmetric product `a ⊗ b + b ⊗ a` halved; `a ⊗ a` when equal.
    pub fn sym_product(a: &Form, b: &Form) -> Result<SymTensor> {
        a.expect_degree(1)?;
        b.expect_degree(1)?;
        check_grid(a.grid(), b.grid())?;
        Ok(SymTensor::from_comps_fn(a.grid(), |i, j| {
            a.comp(i)
                .iter()
                .zip(b.comp(j))
                .zip(a.comp(j).iter().zip(b.comp(i)))
                .map(|((ai, bj), (aj, bi))| 0.5 * (ai * bj + aj * bi))
                .collect()
        }))
    }

    pub fn from_comps_fn(grid: &Arc<Grid>, f: impl Fn(usize, usize) -> Vec<f64>) -> SymTensor {
        let d = grid.dim();
        let mut comps = Vec::with_capacity(sym_count(d));
        for i in 0..d {
            for j in i..d {
                comps.push(f(i, j));
            }
        }
        SymTensor::raw(grid.clone(), comps)
    }
}

/// Tangent vector field, one component per axis.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<Grid>,
    comps: Vec<Vec<f64>>,
}

component_field!(VectorField);

impl VectorField {
    pub fn new(grid: Arc<Grid>, comps: Vec<Vec<f64>>) -> Result<VectorField> {
        if comps.len() != grid.dim() || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidGrid("vector field component count".into()));
        }
        Ok(VectorField { grid, comps })
    }

    pub(crate) fn raw(grid: Arc<Grid>, comps: Vec<Vec<f64>>) -> VectorField {
        VectorField { grid, comps }
    }
}
