//! Initial data on `Σ = T²`: `ψ = c·e^{4φ}ν_h`, the momentum ansatz
//! `Θ = f h + Θ_o`, `ρ = −F(φ)` with `f = (∫F)(φ) + k`, and a Newton solve
//! for the conformal factor `h = e^u h₀` in the flat conformal class.
//!
//! `Θ` is half the slice derivative of the metric, so `K = ∂τh = 2Θ`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::cauchy::{CauchyState, Fields};
use crate::error::{Error, Result};
use crate::field::{differential, Form, Scalar, SymTensor};
use crate::geometry::{codifferential, div_symtensor, norm2, scalar_curvature, trace, Metric};
use crate::grid::Grid;
use crate::solver::conjugate_gradient;

/// Newton stops once `max|G(u)|` falls to this level.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
const CG_MAX_ITER: usize = 20_000;
/// `Θ_o` must be traceless to this level.
pub const TRACE_TOL: f64 = 1e-12;
/// Admissible divergence of a nonzero `Θ_o`.
pub const DIVERGENCE_TOL: f64 = 1e-6;

/// The function `F` of the ansatz `ρ = −F(φ)` together with an
/// antiderivative.
#[derive(Clone, Copy)]
pub enum Profile {
    Zero,
    /// `F = 1`, `∫F = t`.
    Const1,
    /// `F = t`, `∫F = t²/2`.
    Linear,
    Custom { name: &'static str, f: fn(f64) -> f64, antiderivative: fn(f64) -> f64 },
}

impl Profile {
    pub fn from_name(name: &str) -> Option<Profile> {
        match name {
            "zero" => Some(Profile::Zero),
            "const1" => Some(Profile::Const1),
            "linear" => Some(Profile::Linear),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Zero => "zero",
            Profile::Const1 => "const1",
            Profile::Linear => "linear",
            Profile::Custom { name, .. } => name,
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Const1 => 1.0,
            Profile::Linear => t,
            Profile::Custom { f, .. } => f(t),
        }
    }

    pub fn antiderivative(&self, t: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Const1 => t,
            Profile::Linear => 0.5 * t * t,
            Profile::Custom { antiderivative, .. } => antiderivative(t),
        }
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct AnsatzParams {
    pub c: f64,
    pub k: f64,
    pub profile: Profile,
    pub theta_o: Option<SymTensor>,
    pub phi: Scalar,
}

impl AnsatzParams {
    pub fn new(c: f64, k: f64, profile: Profile, phi: Scalar) -> AnsatzParams {
        AnsatzParams { c, k, profile, theta_o: None, phi }
    }

    /// `f = (∫F)(φ) + k`.
    pub fn trace_part(&self) -> Scalar {
        self.phi.map(|p| self.profile.antiderivative(p) + self.k)
    }

    /// `A = F(φ)² + (c²/2)e^{4φ} − 2(k + (∫F)(φ))²`.
    pub fn coefficient_a(&self) -> Scalar {
        self.phi.map(|p| {
            let f = self.profile.antiderivative(p) + self.k;
            self.profile.f(p).powi(2) + 0.5 * self.c * self.c * (4.0 * p).exp() - 2.0 * f * f
        })
    }

    fn validate(&self, h: &Metric) -> Result<()> {
        self.phi.check_same_grid(h.grid())?;
        if h.dim() != 2 {
            return Err(Error::Unsupported(format!("the ansatz lives on surfaces, got dimension {}", h.dim())));
        }
        let a = self.coefficient_a();
        if let Some(min) = a.data().iter().copied().reduce(f64::min).filter(|m| *m < 0.0) {
            return Err(Error::Hypothesis {
                name: "pointwise_solvability",
                detail: format!("F² + (c²/2)e^(4φ) − 2(k + ∫F)² reaches {min:.3e} < 0"),
            });
        }
        if let Some(t) = &self.theta_o {
            t.check_same_grid(h.grid())?;
            let tr = trace(h, t).max_abs();
            if tr > TRACE_TOL {
                return Err(Error::Hypothesis { name: "theta_o_traceless", detail: format!("max |Tr Θ_o| = {tr:.3e}") });
            }
            let div = div_symtensor(h, t)?.max_abs();
            if div > DIVERGENCE_TOL {
                return Err(Error::Hypothesis {
                    name: "theta_o_divergence_free",
                    detail: format!("max |δΘ_o| = {div:.3e}"),
                });
            }
        }
        Ok(())
    }
}

/// `ψ = c·e^{4φ}·√det h dx∧dy`.
pub fn psi_from_phi(c: f64, phi: &Scalar, h: &Metric) -> Result<Form> {
    if h.dim() != 2 {
        return Err(Error::Unsupported(format!("ψ = c e^(4φ) ν_h needs n = 2, got n = {}", h.dim())));
    }
    phi.check_same_grid(h.grid())?;
    let density = phi.zip_map(&h.sqrt_det(), |p, s| c * (4.0 * p).exp() * s);
    Form::new(h.grid().clone(), 2, vec![density.into_data()])
}

/// `(Θ, ρ) = (f h + Θ_o, −F(φ))`.
pub fn build_momentum_ansatz(p: &AnsatzParams, h: &Metric) -> Result<(SymTensor, Scalar)> {
    p.validate(h)?;
    let mut theta = h.tensor().mul_scalar(&p.trace_part());
    if let Some(t) = &p.theta_o {
        theta = &theta + t;
    }
    let rho = p.phi.map(|x| -p.profile.f(x));
    Ok((theta, rho))
}

/// Converged conformal factor with the Newton residual history.
#[derive(Clone, Debug)]
pub struct NewtonSolution {
    pub u: Scalar,
    /// `max|G(u_k)|` for every iterate, starting with the initial guess.
    pub history: Vec<f64>,
    pub cg_iterations: Vec<usize>,
}

impl NewtonSolution {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }

    pub fn final_residual(&self) -> f64 {
        *self.history.last().expect("history holds the initial residual")
    }
}

/// `G(u) = δdu + Ae^u − Be^{−u} − w`.
pub fn elliptic_residual(h: &Metric, a: &Scalar, b: &Scalar, w: &Scalar, u: &Scalar) -> Result<Scalar> {
    let lap = laplacian(h, u)?;
    let mut out = lap.into_data();
    for (i, o) in out.iter_mut().enumerate() {
        let ui = u.data()[i];
        *o += a.data()[i] * ui.exp() - b.data()[i] * (-ui).exp() - w.data()[i];
    }
    Scalar::new(u.grid().clone(), out)
}

fn laplacian(h: &Metric, u: &Scalar) -> Result<Scalar> {
    Ok(codifferential(h, &differential(u))?.comp_scalar(0))
}

fn is_constant_metric(h: &Metric) -> bool {
    h.tensor().comps().iter().all(|c| {
        let first = c[0];
        c.iter().all(|x| (x - first).abs() <= 1e-14 * (1.0 + first.abs()))
    })
}

/// `u₀ = log(max(∫w / ∫A, 1e-6))`.
pub fn default_initial_guess(a: &Scalar, w: &Scalar) -> f64 {
    (w.integrate() / a.integrate()).max(1e-6).ln()
}

/// Solves `δdu + Ae^u − Be^{−u} = w` on a flat torus by Newton iteration
/// with conjugate-gradient linear solves, starting from the constant `u0`.
pub fn solve_elliptic(h: &Metric, a: &Scalar, b: &Scalar, w: &Scalar, u0: Option<f64>) -> Result<NewtonSolution> {
    let grid = h.grid().clone();
    for f in [a, b, w] {
        f.check_same_grid(&grid)?;
    }
    if !is_constant_metric(h) {
        return Err(Error::Unsupported("the elliptic solve needs a constant-coefficient (flat) metric".into()));
    }
    check_hypotheses(a, b, w)?;
    let start = u0.unwrap_or_else(|| default_initial_guess(a, w));
    let mut u = Scalar::constant(&grid, start);
    let mut g = elliptic_residual(h, a, b, w, &u)?;
    let mut history = vec![g.max_abs()];
    let mut cg_iterations = Vec::new();
    while *history.last().expect("nonempty") > NEWTON_TOL {
        if history.len() > NEWTON_MAX_ITER {
            return Err(Error::NoConvergence {
                iterations: NEWTON_MAX_ITER,
                last: *history.last().expect("nonempty"),
                history,
            });
        }
        let diag: Vec<f64> = u
            .data()
            .iter()
            .zip(a.data().iter().zip(b.data()))
            .map(|(ui, (ai, bi))| ai * ui.exp() + bi * (-ui).exp())
            .collect();
        let rhs: Vec<f64> = g.data().iter().map(|x| -x).collect();
        let (du, iters) = solve_linearized(&grid, h, &diag, &rhs)?;
        cg_iterations.push(iters);
        u = u.zip_map(&du, |x, y| x + y);
        if !u.is_finite() {
            return Err(Error::NonFinite { what: "u".into(), step: history.len() });
        }
        g = elliptic_residual(h, a, b, w, &u)?;
        history.push(g.max_abs());
    }
    Ok(NewtonSolution { u, history, cg_iterations })
}

fn check_hypotheses(a: &Scalar, b: &Scalar, w: &Scalar) -> Result<()> {
    if let Some(m) = a.data().iter().copied().reduce(f64::min).filter(|m| *m < 0.0) {
        return Err(Error::Hypothesis { name: "A_nonnegative", detail: format!("min A = {m:.3e}") });
    }
    if let Some(m) = b.data().iter().copied().reduce(f64::min).filter(|m| *m < 0.0) {
        return Err(Error::Hypothesis { name: "B_nonnegative", detail: format!("min B = {m:.3e}") });
    }
    let vol = a.grid().volume();
    let ab = (a - b).integrate();
    if ab <= 1e-14 * vol * (1.0 + a.max_abs() + b.max_abs()) {
        return Err(Error::Hypothesis { name: "integral_A_minus_B_positive", detail: format!("∫(A − B) = {ab:.3e}") });
    }
    let iw = w.integrate();
    if iw <= 1e-12 * vol * (1.0 + w.max_abs()) {
        return Err(Error::Hypothesis { name: "integral_w_positive", detail: format!("∫w = {iw:.3e}") });
    }
    Ok(())
}

/// Solves `(δd + diag) x = rhs`; the operator is symmetric for
/// constant-coefficient metrics and positive when `diag` is somewhere
/// positive.
fn solve_linearized(grid: &Arc<Grid>, h: &Metric, diag: &[f64], rhs: &[f64]) -> Result<(Scalar, usize)> {
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let s = Scalar::new(grid.clone(), x.to_vec())?;
        let mut out = laplacian(h, &s)?.into_data();
        out.iter_mut().zip(diag.iter().zip(x)).for_each(|(o, (d, xi))| *o += d * xi);
        Ok(out)
    };
    let (x, iters) = conjugate_gradient(apply, rhs, 1e-14, CG_MAX_ITER)?;
    Ok((Scalar::new(grid.clone(), x)?, iters))
}

/// Initial data together with the solver record.
#[derive(Clone, Debug)]
pub struct ConformalSolution {
    pub state: CauchyState,
    pub u: Scalar,
    pub newton: NewtonSolution,
}

/// Summary written next to solved states.
#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub c: f64,
    pub k: f64,
    #[serde(rename = "F")]
    pub profile: String,
    pub residuals: ResidualMaxima,
    pub newton_iters: usize,
    pub final_residual: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResidualMaxima {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
}

/// Builds constraint-satisfying data `(h = e^u h₀, K = 2Θ, φ, ρ, ψ, θ = 0)`
/// for `λ = 0` on the flat torus.
pub fn solve_conformal_constraints(p: &AnsatzParams, h0: &Metric, u0: Option<f64>) -> Result<ConformalSolution> {
    if h0.dim() != 2 {
        return Err(Error::Unsupported(format!("constraint solve needs n = 2, got n = {}", h0.dim())));
    }
    if let Some(t) = &p.theta_o {
        if t.max_abs() > 0.0 {
            return Err(Error::Hypothesis {
                name: "theta_o_zero",
                detail: "the solvable branch requires Θ_o = 0 (otherwise B = −|Θ_o|² < 0)".into(),
            });
        }
    }
    p.validate(h0)?;
    let a = p.coefficient_a();
    let b = Scalar::zeros(h0.grid());
    let w = &norm2(h0, &differential(&p.phi))? - &scalar_curvature(h0);
    let newton = solve_elliptic(h0, &a, &b, &w, u0)?;
    let u = newton.u.clone();
    let h = h0.conformal(&u.exp())?;
    let (theta, rho) = build_momentum_ansatz(p, &h)?;
    let psi = psi_from_phi(p.c, &p.phi, &h)?;
    let grid = h.grid().clone();
    let fields = Fields {
        h: h.tensor().clone(),
        k: theta.scale(2.0),
        phi: p.phi.clone(),
        rho,
        psi,
        theta: Form::zeros(&grid, 2)?,
    };
    Ok(ConformalSolution { state: CauchyState::new(fields, None, 0.0)?, u, newton })
}
