//! Reduced Cauchy problem on `Σ = T^n`: evolution right-hand sides,
//! constraints, fixed-step RK4, constraint-propagation checks and
//! reassembly of the cylinder `I × Σ`.
//!
//! The shift `a_τ` is held at zero, so the flux on each slice is
//! `H = flux0 + dθ` with `∂τθ = ψ`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{differential, sym_count, sym_index, Form, Scalar, SymTensor};
use crate::geometry::{
    christoffel, circ_form, circ_sym, codifferential, codifferential_with, contract_sharp, delta1, div_symtensor_with,
    form_contract, norm2, ricci_with, sharp, sym_apply, tensor_norm2, trace, Metric,
};
use crate::grid::Grid;
use crate::samples;
use crate::soliton::{einstein_residuals, SolitonFields};

/// Largest admissible `dt / min spacing`.
pub const CFL_LIMIT: f64 = 0.25;

/// The evolved unknowns, also used for their time derivatives.
#[derive(Clone, Debug)]
pub struct Fields {
    pub h: SymTensor,
    pub k: SymTensor,
    pub phi: Scalar,
    pub rho: Scalar,
    pub psi: Form,
    pub theta: Form,
}

impl Fields {
    /// `self + a·other`.
    fn axpy(&self, a: f64, o: &Fields) -> Fields {
        Fields {
            h: self.h.zip_comps(&o.h, |x, y| x + a * y),
            k: self.k.zip_comps(&o.k, |x, y| x + a * y),
            phi: self.phi.zip_map(&o.phi, |x, y| x + a * y),
            rho: self.rho.zip_map(&o.rho, |x, y| x + a * y),
            psi: self.psi.zip_comps(&o.psi, |x, y| x + a * y),
            theta: self.theta.zip_comps(&o.theta, |x, y| x + a * y),
        }
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("h", self.h.is_finite()),
            ("K", self.k.is_finite()),
            ("phi", self.phi.is_finite()),
            ("rho", self.rho.is_finite()),
            ("psi", self.psi.is_finite()),
            ("theta", self.theta.is_finite()),
        ]
        .into_iter()
        .find(|(_, ok)| !ok)
        .map(|(name, _)| name)
    }

    /// Largest componentwise difference over all fields.
    pub fn max_diff(&self, o: &Fields) -> f64 {
        [
            (&self.h - &o.h).max_abs(),
            (&self.k - &o.k).max_abs(),
            (&self.phi - &o.phi).max_abs(),
            (&self.rho - &o.rho).max_abs(),
            (&self.psi - &o.psi).max_abs(),
            (&self.theta - &o.theta).max_abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// State `(h, K = ∂τh, φ, ρ = ∂τφ, ψ, θ)` on a slice, with the fixed closed
/// flux `flux0` (3-forms exist only for `n = 3`).
#[derive(Clone, Debug)]
pub struct CauchyState {
    pub fields: Fields,
    pub flux0: Option<Form>,
    pub tau: f64,
}

impl CauchyState {
    pub fn new(fields: Fields, flux0: Option<Form>, tau: f64) -> Result<CauchyState> {
        let grid = fields.h.grid().clone();
        if grid.tau_axis().is_some() {
            return Err(Error::Unsupported("Cauchy data live on a torus".into()));
        }
        let n = grid.dim();
        if n < 2 {
            return Err(Error::Unsupported("the reduced system needs n ≥ 2".into()));
        }
        fields.k.check_same_grid(&grid)?;
        fields.phi.check_same_grid(&grid)?;
        fields.rho.check_same_grid(&grid)?;
        fields.psi.check_same_grid(&grid)?;
        fields.theta.check_same_grid(&grid)?;
        fields.psi.expect_degree(2)?;
        fields.theta.expect_degree(2)?;
        if let Some(f) = &flux0 {
            f.check_same_grid(&grid)?;
            f.expect_degree(3)?;
        }
        Metric::new(fields.h.clone())?;
        if let Some(name) = fields.first_non_finite() {
            return Err(Error::NonFinite { what: name.into(), step: 0 });
        }
        Ok(CauchyState { fields, flux0, tau })
    }

    /// Flat metric, every other field zero.
    pub fn flat(grid: &Arc<Grid>) -> Result<CauchyState> {
        let fields = Fields {
            h: SymTensor::identity(grid),
            k: SymTensor::zeros(grid),
            phi: Scalar::zeros(grid),
            rho: Scalar::zeros(grid),
            psi: Form::zeros(grid, 2)?,
            theta: Form::zeros(grid, 2)?,
        };
        CauchyState::new(fields, None, 0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.fields.h.grid()
    }

    pub fn n(&self) -> usize {
        self.grid().dim()
    }

    pub fn metric(&self) -> Result<Metric> {
        Metric::new(self.fields.h.clone())
    }

    /// `H = flux0 + dθ`; `None` when `n < 3`.
    pub fn flux(&self) -> Result<Option<Form>> {
        if self.n() < 3 {
            return Ok(None);
        }
        let dtheta = self.fields.theta.exterior_derivative()?;
        Ok(Some(match &self.flux0 {
            Some(f) => f + &dtheta,
            None => dtheta,
        }))
    }

    /// `(τ, K, ρ, ψ) ↦ (−τ, −K, −ρ, −ψ)`.
    pub fn time_flip(&self) -> CauchyState {
        let f = &self.fields;
        CauchyState {
            fields: Fields {
                h: f.h.clone(),
                k: f.k.scale(-1.0),
                phi: f.phi.clone(),
                rho: f.rho.scale(-1.0),
                psi: f.psi.scale(-1.0),
                theta: f.theta.clone(),
            },
            flux0: self.flux0.clone(),
            tau: -self.tau,
        }
    }

    fn with_fields(&self, fields: Fields, tau: f64) -> CauchyState {
        CauchyState { fields, flux0: self.flux0.clone(), tau }
    }
}

/// Fixed-step integration settings. The gauge datum `a_τ` is always zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolutionConfig {
    pub lambda: f64,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
}

impl EvolutionConfig {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Unsupported(format!("dt must be positive, got {}", self.dt)));
        }
        let bound = CFL_LIMIT * grid.min_spacing();
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::Unsupported(format!(
                "dt = {} exceeds the stability bound {CFL_LIMIT}·min spacing = {bound}",
                self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Unsupported("record_every must be at least 1".into()));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Unsupported("lambda must be finite".into()));
        }
        Ok(())
    }

    /// Steps of equal size reaching `tau` with `dt ≤ CFL_LIMIT·Δ`.
    pub fn reaching(tau: f64, grid: &Grid, lambda: f64, record_every: usize) -> EvolutionConfig {
        let steps = (tau / (CFL_LIMIT * grid.min_spacing())).ceil().max(1.0) as usize;
        EvolutionConfig { lambda, dt: tau / steps as f64, steps, record_every }
    }
}

/// Shared pieces of the right-hand side and the constraints.
struct SliceTerms {
    h: Metric,
    trk: Scalar,
    dphi: Form,
    weight: Scalar,
    lam_term: Scalar,
    flux: Option<Form>,
    source: Scalar,
}

fn slice_terms(s: &CauchyState, lambda: f64) -> Result<SliceTerms> {
    let h = s.metric()?;
    let m = (s.n() - 1) as f64;
    let f = &s.fields;
    let trk = trace(&h, &f.k);
    let dphi = differential(&f.phi);
    let weight = f.phi.map(|p| (-4.0 * p / m).exp());
    let lam_term = f.phi.map(|p| lambda * (2.0 * p / m).exp());
    let flux = s.flux()?;
    let mut forms2 = norm2(&h, &f.psi)?;
    if let Some(fl) = &flux {
        forms2 = &forms2 + &norm2(&h, fl)?;
    }
    let source = &weight * &forms2;
    Ok(SliceTerms { h, trk, dphi, weight, lam_term, flux, source })
}

/// Time derivatives `(∂h, ∂K, ∂φ, ∂ρ, ∂ψ, ∂θ)` of the reduced system.
pub fn evolution_rhs(s: &CauchyState, cfg: &EvolutionConfig) -> Result<Fields> {
    let t = slice_terms(s, cfg.lambda)?;
    let f = &s.fields;
    let h = &t.h;
    let m = (s.n() - 1) as f64;
    let gam = christoffel(h);

    let mut dk = ricci_with(h, &gam).scale(2.0);
    dk = &dk + &circ_sym(h, &f.k, &f.k)?;
    dk = &dk - &f.k.mul_scalar(&t.trk).scale(0.5);
    dk = &dk - &SymTensor::sym_product(&t.dphi, &t.dphi)?.scale(2.0 / m);
    dk = &dk + &f.h.mul_scalar(&(&t.source + &t.lam_term)).scale(2.0 / m);
    let mut circ = circ_form(h, &f.psi, &f.psi)?;
    if let Some(fl) = &t.flux {
        circ = &circ + &circ_form(h, fl, fl)?;
    }
    dk = &dk - &circ.mul_scalar(&t.weight);

    let coeff = &f.rho.scale(4.0 / m) - &t.trk.scale(0.5);
    let mut dpsi = &delta1(h, &f.k, &f.psi)? + &f.psi.mul_scalar(&coeff);
    if let Some(fl) = &t.flux {
        dpsi = &dpsi + &codifferential_with(h, &gam, fl)?;
        dpsi = &dpsi + &contract_sharp(h, fl, &t.dphi)?.scale(4.0 / m);
    }

    let lap = codifferential_with(h, &gam, &t.dphi)?.comp_scalar(0);
    let drho = &(&lap - &(&f.rho * &t.trk).scale(0.5)) - &(&t.source + &t.lam_term);

    Ok(Fields {
        h: f.k.clone(),
        k: dk,
        phi: f.rho.clone(),
        rho: drho,
        theta: f.psi.clone(),
        psi: dpsi,
    })
}

/// Momentum (`C1`), Hamiltonian (`C2`) and flux (`C3`) constraint fields.
#[derive(Clone, Debug)]
pub struct ConstraintResiduals {
    pub c1: Form,
    pub c2: Scalar,
    pub c3: Form,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ConstraintNorms {
    pub tau: f64,
    pub c1_max: f64,
    pub c1_l2: f64,
    pub c2_max: f64,
    pub c2_l2: f64,
    pub c3_max: f64,
    pub c3_l2: f64,
}

impl ConstraintNorms {
    pub fn max(&self) -> f64 {
        self.c1_max.max(self.c2_max).max(self.c3_max)
    }
}

impl ConstraintResiduals {
    pub fn norms(&self, tau: f64) -> ConstraintNorms {
        ConstraintNorms {
            tau,
            c1_max: self.c1.max_abs(),
            c1_l2: self.c1.l2(),
            c2_max: self.c2.max_abs(),
            c2_l2: self.c2.l2(),
            c3_max: self.c3.max_abs(),
            c3_l2: self.c3.l2(),
        }
    }
}

pub fn constraint_residuals(s: &CauchyState, cfg: &EvolutionConfig) -> Result<ConstraintResiduals> {
    constraint_residuals_lambda(s, cfg.lambda)
}

pub fn constraint_residuals_lambda(s: &CauchyState, lambda: f64) -> Result<ConstraintResiduals> {
    let t = slice_terms(s, lambda)?;
    let f = &s.fields;
    let h = &t.h;
    let m = (s.n() - 1) as f64;
    let gam = christoffel(h);

    let mut c1 = &div_symtensor_with(h, &gam, &f.k)? + &differential(&t.trk);
    c1 = &c1 + &t.dphi.mul_scalar(&f.rho).scale(2.0 / m);
    if let Some(fl) = &t.flux {
        c1 = &c1 + &form_contract(h, &f.psi, fl)?.mul_scalar(&t.weight);
    }

    let s_h = trace(h, &ricci_with(h, &gam));
    let kin = &tensor_norm2(h, &f.k) - &(&t.trk * &t.trk);
    let dil = &(&f.rho * &f.rho) - &norm2(h, &t.dphi)?;
    let mut forms = norm2(h, &f.psi)?;
    if let Some(fl) = &t.flux {
        forms = &forms - &norm2(h, fl)?;
    }
    let mut c2 = &s_h + &kin.scale(0.25);
    c2 = &c2 + &t.lam_term;
    c2 = &c2 + &dil.scale(1.0 / m);
    c2 = &c2 + &(&forms * &t.weight).scale(0.5);

    let c3 = &codifferential_with(h, &gam, &f.psi)? + &contract_sharp(h, &f.psi, &t.dphi)?.scale(4.0 / m);
    Ok(ConstraintResiduals { c1, c2, c3 })
}

/// One classical RK4 step of size `cfg.dt`.
pub fn rk4_step(s: &CauchyState, cfg: &EvolutionConfig) -> Result<CauchyState> {
    let dt = cfg.dt;
    let k1 = evolution_rhs(s, cfg)?;
    let s2 = s.with_fields(s.fields.axpy(0.5 * dt, &k1), s.tau + 0.5 * dt);
    let k2 = evolution_rhs(&s2, cfg)?;
    let s3 = s.with_fields(s.fields.axpy(0.5 * dt, &k2), s.tau + 0.5 * dt);
    let k3 = evolution_rhs(&s3, cfg)?;
    let s4 = s.with_fields(s.fields.axpy(dt, &k3), s.tau + dt);
    let k4 = evolution_rhs(&s4, cfg)?;
    let next = s
        .fields
        .axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4);
    Ok(s.with_fields(next, s.tau + dt))
}

/// Recorded states and constraint norms at a uniform cadence.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<CauchyState>,
    pub residuals: Vec<ConstraintNorms>,
    pub config: EvolutionConfig,
}

impl Trajectory {
    /// τ-spacing between consecutive records.
    pub fn record_step(&self) -> f64 {
        self.config.dt * self.config.record_every as f64
    }

    pub fn max_constraint(&self) -> f64 {
        self.residuals.iter().map(ConstraintNorms::max).fold(0.0, f64::max)
    }

    pub fn last(&self) -> &CauchyState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Integrates `cfg.steps` RK4 steps, recording every `cfg.record_every`.
/// Aborts with the offending step index on the first non-finite value.
pub fn evolve(s: &CauchyState, cfg: &EvolutionConfig) -> Result<Trajectory> {
    evolve_with(s, cfg, |_, _| {})
}

/// As [`evolve`], calling `observe(step, state)` after every recorded step.
pub fn evolve_with(
    s: &CauchyState,
    cfg: &EvolutionConfig,
    mut observe: impl FnMut(usize, &CauchyState),
) -> Result<Trajectory> {
    cfg.validate(s.grid())?;
    let mut cur = s.clone();
    let mut states = vec![cur.clone()];
    let mut residuals = vec![constraint_residuals(&cur, cfg)?.norms(cur.tau)];
    observe(0, &cur);
    for step in 1..=cfg.steps {
        cur = match rk4_step(&cur, cfg) {
            Ok(next) => next,
            Err(Error::DegenerateMetric { .. }) if !cur.fields.h.is_finite() => {
                return Err(Error::NonFinite { what: "h".into(), step })
            }
            Err(e @ Error::DegenerateMetric { .. }) => return Err(Error::Aborted { step, reason: e.to_string() }),
            Err(e) => return Err(e),
        };
        if let Some(name) = cur.fields.first_non_finite() {
            return Err(Error::NonFinite { what: name.into(), step });
        }
        if step % cfg.record_every == 0 {
            let norms = constraint_residuals(&cur, cfg)?.norms(cur.tau);
            let finite = [norms.c1_max, norms.c2_max, norms.c3_max].iter().all(|x| x.is_finite());
            if !finite {
                return Err(Error::NonFinite { what: "constraints".into(), step });
            }
            residuals.push(norms);
            states.push(cur.clone());
            observe(step, &cur);
        }
    }
    Ok(Trajectory { states, residuals, config: cfg.clone() })
}

/// Argument of the `C3` term in the propagation law for `C1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum C3Argument {
    Psi,
    DtPsi,
}

/// Coefficients of a candidate constraint-propagation law
///
/// ```text
/// ∂τC1 = −½TrK·C1 + a·dC2 + b·e^{−4φ/(n−1)}·C3⌟X,   X ∈ {ψ, ∂τψ}
/// ∂τC2 = c·δC1 − TrK·C2
/// ∂τC3 = −(½TrK − 4ρ/(n−1))·C3 + s·K(C3^♯)
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Variant {
    pub dc2_weight: f64,
    pub c3_argument: C3Argument,
    pub c3_weight: f64,
    pub delta_c1: f64,
    pub k_sign: f64,
}

impl Variant {
    /// Half weights on `dC2` and the `C3` term, which acts on `∂τψ`.
    pub fn half_weights() -> Variant {
        Variant { dc2_weight: 0.5, c3_argument: C3Argument::DtPsi, c3_weight: -0.5, delta_c1: -2.0, k_sign: -1.0 }
    }

    /// Unit weights on `dC2` and the `C3` term, which acts on `ψ`.
    pub fn unit_weights() -> Variant {
        Variant { dc2_weight: 1.0, c3_argument: C3Argument::Psi, c3_weight: -1.0, delta_c1: 2.0, k_sign: -1.0 }
    }

    /// The law obeyed by the constraints of the reduced system.
    pub fn propagation_law() -> Variant {
        Variant { dc2_weight: 1.0, c3_argument: C3Argument::Psi, c3_weight: 1.0, delta_c1: 1.0, k_sign: 1.0 }
    }

    /// The 32 combinations mixing [`Variant::half_weights`] and
    /// [`Variant::unit_weights`] term by term.
    pub fn base_candidates() -> Vec<Variant> {
        Variant::grid_of(&[-0.5, -1.0], &[2.0, -2.0])
    }

    /// Base candidates extended by either sign of the `C3` term and unit
    /// weight on `δC1` (128 variants).
    pub fn extended_candidates() -> Vec<Variant> {
        Variant::grid_of(&[-0.5, -1.0, 0.5, 1.0], &[2.0, -2.0, 1.0, -1.0])
    }

    fn grid_of(c3_weights: &[f64], deltas: &[f64]) -> Vec<Variant> {
        let mut out = Vec::new();
        for &dc2_weight in &[0.5, 1.0] {
            for &c3_argument in &[C3Argument::Psi, C3Argument::DtPsi] {
                for &c3_weight in c3_weights {
                    for &delta_c1 in deltas {
                        for &k_sign in &[1.0, -1.0] {
                            out.push(Variant { dc2_weight, c3_argument, c3_weight, delta_c1, k_sign });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn label(&self) -> String {
        let arg = match self.c3_argument {
            C3Argument::Psi => "psi",
            C3Argument::DtPsi => "dtau_psi",
        };
        format!(
            "dC2:{:+} C3x{}:{:+} deltaC1:{:+} K(C3#):{:+}",
            self.dc2_weight, arg, self.c3_weight, self.delta_c1, self.k_sign
        )
    }
}

/// Per-time fields entering every candidate propagation law.
pub struct PropagationTerms {
    pub taus: Vec<f64>,
    /// `∂τC_i` by finite differences, and each term of the laws.
    dt_c1: Vec<Form>,
    dt_c2: Vec<Scalar>,
    dt_c3: Vec<Form>,
    c1_damp: Vec<Form>,
    d_c2: Vec<Form>,
    c3_psi: Vec<Form>,
    c3_dtpsi: Vec<Form>,
    delta_c1: Vec<Scalar>,
    c2_damp: Vec<Scalar>,
    c3_damp: Vec<Form>,
    k_c3: Vec<Form>,
}

/// 4th-order derivative weights (times `12Δ`) at offsets −2..=2 from the
/// evaluation point for centered use.
const CENTERED: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];

/// Evaluates the propagation-law terms on the interior records (two from
/// each end) of a trajectory.
pub fn propagation_terms(traj: &Trajectory) -> Result<PropagationTerms> {
    let m = traj.states.len();
    if m < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: m });
    }
    let lambda = traj.config.lambda;
    let step = traj.record_step();
    let cs: Vec<ConstraintResiduals> =
        traj.states.iter().map(|s| constraint_residuals_lambda(s, lambda)).collect::<Result<_>>()?;
    let mut out = PropagationTerms {
        taus: Vec::new(),
        dt_c1: Vec::new(),
        dt_c2: Vec::new(),
        dt_c3: Vec::new(),
        c1_damp: Vec::new(),
        d_c2: Vec::new(),
        c3_psi: Vec::new(),
        c3_dtpsi: Vec::new(),
        delta_c1: Vec::new(),
        c2_damp: Vec::new(),
        c3_damp: Vec::new(),
        k_c3: Vec::new(),
    };
    let cfg = EvolutionConfig { lambda, ..traj.config.clone() };
    for j in 2..m - 2 {
        let s = &traj.states[j];
        let c = &cs[j];
        let f = &s.fields;
        let h = s.metric()?;
        let nm = (s.n() - 1) as f64;
        let trk = trace(&h, &f.k);
        let weight = f.phi.map(|p| (-4.0 * p / nm).exp());

        let mut dc1 = c.c1.scale(0.0);
        let mut dc2 = c.c2.scale(0.0);
        let mut dc3 = c.c3.scale(0.0);
        for (o, w) in CENTERED.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let cj = &cs[j + o - 2];
            let a = w / (12.0 * step);
            dc1 = &dc1 + &cj.c1.scale(a);
            dc2 = &dc2 + &cj.c2.scale(a);
            dc3 = &dc3 + &cj.c3.scale(a);
        }
        let dtpsi = evolution_rhs(s, &cfg)?.psi;
        out.taus.push(s.tau);
        out.dt_c1.push(dc1);
        out.dt_c2.push(dc2);
        out.dt_c3.push(dc3);
        out.c1_damp.push(c.c1.mul_scalar(&trk).scale(-0.5));
        out.d_c2.push(differential(&c.c2));
        out.c3_psi.push(form_contract(&h, &c.c3, &f.psi)?.mul_scalar(&weight));
        out.c3_dtpsi.push(form_contract(&h, &c.c3, &dtpsi)?.mul_scalar(&weight));
        out.delta_c1.push(codifferential(&h, &c.c1)?.comp_scalar(0));
        out.c2_damp.push((&c.c2 * &trk).scale(-1.0));
        let coeff = &trk.scale(0.5) - &f.rho.scale(4.0 / nm);
        out.c3_damp.push(c.c3.mul_scalar(&coeff).scale(-1.0));
        out.k_c3.push(sym_apply(&f.k, &sharp(&h, &c.c3)?)?);
    }
    Ok(out)
}

/// Max norms `(D1, D2, D3)` of `∂τC_i − RHS_i` at one interior record.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PropagationNorms {
    pub tau: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl PropagationNorms {
    pub fn max(&self) -> f64 {
        self.d1.max(self.d2).max(self.d3)
    }
}

impl PropagationTerms {
    pub fn residuals(&self, v: &Variant) -> Vec<PropagationNorms> {
        (0..self.taus.len())
            .map(|j| {
                let c3term = match v.c3_argument {
                    C3Argument::Psi => &self.c3_psi[j],
                    C3Argument::DtPsi => &self.c3_dtpsi[j],
                };
                let rhs1 = &(&self.c1_damp[j] + &self.d_c2[j].scale(v.dc2_weight)) + &c3term.scale(v.c3_weight);
                let rhs2 = &self.delta_c1[j].scale(v.delta_c1) + &self.c2_damp[j];
                let rhs3 = &self.c3_damp[j] + &self.k_c3[j].scale(v.k_sign);
                PropagationNorms {
                    tau: self.taus[j],
                    d1: (&self.dt_c1[j] - &rhs1).max_abs(),
                    d2: (&self.dt_c2[j] - &rhs2).max_abs(),
                    d3: (&self.dt_c3[j] - &rhs3).max_abs(),
                }
            })
            .collect()
    }

    /// Largest constraint time-derivative magnitude, a scale for residuals.
    pub fn scale(&self) -> f64 {
        self.dt_c1
            .iter()
            .map(Form::max_abs)
            .chain(self.dt_c2.iter().map(Scalar::max_abs))
            .chain(self.dt_c3.iter().map(Form::max_abs))
            .fold(0.0, f64::max)
    }
}

/// `D_i(variant)` per interior record.
pub fn propagation_residuals(traj: &Trajectory, variant: &Variant) -> Result<Vec<PropagationNorms>> {
    Ok(propagation_terms(traj)?.residuals(variant))
}

/// Stacks the trajectory into `(g = dτ² + h_τ, H̄ = dτ∧ψ_τ + H_τ, φ)` on the
/// cylinder `I × Σ`.
pub fn assemble_spacetime(traj: &Trajectory) -> Result<SolitonFields> {
    let m = traj.states.len();
    if m < 9 {
        return Err(Error::TooFewSamples { needed: 9, got: m });
    }
    let first = &traj.states[0];
    let spatial = first.grid().clone();
    let n = spatial.dim();
    let cyl = Arc::new(Grid::cylinder(&spatial, first.tau, traj.record_step(), m)?);
    let d = n + 1;
    let stack = |get: &dyn Fn(&CauchyState) -> Vec<f64>| -> Vec<f64> {
        traj.states.iter().flat_map(|s| get(s)).collect()
    };
    let ones = vec![1.0; cyl.len()];
    let zeros = vec![0.0; cyl.len()];
    let mut gcomps = vec![Vec::new(); sym_count(d)];
    for i in 0..d {
        for j in i..d {
            gcomps[sym_index(d, i, j)] = match (i, j) {
                (0, 0) => ones.clone(),
                (0, _) => zeros.clone(),
                _ => stack(&|s| s.fields.h.get(i - 1, j - 1).to_vec()),
            };
        }
    }
    let g = Metric::new(SymTensor::new(cyl.clone(), gcomps)?)?;
    let phi = Scalar::new(cyl.clone(), stack(&|s| s.fields.phi.data().to_vec()))?;

    let fluxes: Vec<Option<Form>> = traj.states.iter().map(CauchyState::flux).collect::<Result<_>>()?;
    let basis3 = crate::field::FormBasis::new(d, 3);
    let mut hcomps = Vec::with_capacity(basis3.len());
    for t in basis3.tuples() {
        let data = if t[0] == 0 {
            let (c, _) = traj.states[0].fields.psi.basis().find(&[t[1] - 1, t[2] - 1]).expect("valid pair");
            stack(&|s| s.fields.psi.comp(c).to_vec())
        } else {
            fluxes.iter().flat_map(|f| f.as_ref().expect("n = 3 has a flux").comp(0).to_vec()).collect()
        };
        hcomps.push(data);
    }
    let hbar = Form::new(cyl.clone(), 3, hcomps)?;
    SolitonFields::new(g, Some(hbar), phi)
}

/// Interior max norms of the Einstein-frame Einstein, Maxwell and dilaton
/// residuals of the assembled cylinder.
pub fn reduction_equivalence(traj: &Trajectory) -> Result<[f64; 3]> {
    let n = traj.states[0].n();
    let fields = assemble_spacetime(traj)?;
    Ok(einstein_residuals(&fields, traj.config.lambda, n)?.interior_norms())
}

/// Smooth inhomogeneous data with every constraint nonzero, used to
/// discriminate candidate propagation laws.
pub fn generic_state(grid: &Arc<Grid>, seed: u64) -> Result<CauchyState> {
    let mut rng = samples::rng(seed);
    let h = samples::random_sym(&mut rng, grid, 1.0, 0.1);
    let k = samples::random_sym(&mut rng, grid, 0.1, 0.2);
    let phi = samples::random_scalar(&mut rng, grid, 0.0, 0.2);
    let rho = samples::random_scalar(&mut rng, grid, 0.0, 0.3);
    let psi = samples::random_form(&mut rng, grid, 2, 0.5, 0.2)?;
    let theta = samples::random_form(&mut rng, grid, 2, 0.0, 0.1)?;
    let flux0 = if grid.dim() == 3 { Some(Form::new(grid.clone(), 3, vec![vec![0.3; grid.len()]])?) } else { None };
    CauchyState::new(Fields { h, k, phi, rho, psi, theta }, flux0, 0.0)
}

/// Which candidate family a calibration searches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CandidateSet {
    /// The 32 base candidates.
    Base,
    /// The 128-variant superset.
    Extended,
}

impl CandidateSet {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            CandidateSet::Base => Variant::base_candidates(),
            CandidateSet::Extended => Variant::extended_candidates(),
        }
    }
}

/// One refinement level of a calibration study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationLevel {
    pub points: usize,
    pub dt: f64,
    pub steps: usize,
}

impl CalibrationLevel {
    /// `dt = Δ/8` for spacing `Δ = length / points`, `steps` reaching `tau`.
    pub fn refined(points: usize, length: f64, tau: f64) -> CalibrationLevel {
        let dt = length / (8.0 * points as f64);
        CalibrationLevel { points, dt, steps: (tau / dt).round() as usize }
    }
}

/// Residual history of one candidate across refinement levels.
#[derive(Clone, Debug, Serialize)]
pub struct VariantRow {
    pub variant: Variant,
    pub label: String,
    /// Max over interior records of `max(D1, D2, D3)` per level.
    pub residuals: Vec<[f64; 3]>,
    /// Observed order of `max(D1, D2, D3)` between consecutive levels.
    pub orders: Vec<f64>,
}

impl VariantRow {
    pub fn finest(&self) -> f64 {
        self.residuals.last().map_or(0.0, |r| r[0].max(r[1]).max(r[2]))
    }

    pub fn final_order(&self) -> f64 {
        self.orders.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Selected { variant: Variant, label: String, order: f64, margin: f64 },
    Inconclusive { reason: String },
    NonDiscriminating,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub candidate_set: CandidateSet,
    pub levels: Vec<CalibrationLevel>,
    pub lambda: f64,
    pub verdict: Verdict,
    /// Whether the selected variant lies among the base candidates.
    pub in_base_set: Option<bool>,
    pub rows: Vec<VariantRow>,
}

impl CalibrationReport {
    pub fn winner(&self) -> Option<&Variant> {
        match &self.verdict {
            Verdict::Selected { variant, .. } => Some(variant),
            _ => None,
        }
    }
}

/// Minimum observed order for a converging variant.
pub const MIN_ORDER: f64 = 3.5;
/// Required ratio between every rival's finest residual and the winner's.
pub const RIVAL_MARGIN: f64 = 10.0;
/// Residuals at or below this are treated as identically zero.
pub const ZERO_FLOOR: f64 = 1e-12;

/// Runs the refinement study: evolves `generator(points)` at every level,
/// evaluates each candidate law and selects the unique converging one.
pub fn calibrate_identities(
    generator: impl Fn(usize) -> Result<CauchyState>,
    levels: &[CalibrationLevel],
    lambda: f64,
    set: CandidateSet,
) -> Result<CalibrationReport> {
    if levels.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: levels.len() });
    }
    let variants = set.variants();
    let mut residuals = vec![Vec::with_capacity(levels.len()); variants.len()];
    let mut spacings = Vec::with_capacity(levels.len());
    for level in levels {
        let state = generator(level.points)?;
        let grid = state.grid().clone();
        spacings.push(grid.min_spacing());
        let cfg = EvolutionConfig { lambda, dt: level.dt, steps: level.steps, record_every: 1 };
        let traj = evolve(&state, &cfg)?;
        let terms = propagation_terms(&traj)?;
        for (v, out) in variants.iter().zip(residuals.iter_mut()) {
            let worst = terms
                .residuals(v)
                .iter()
                .fold([0.0f64; 3], |a, r| [a[0].max(r.d1), a[1].max(r.d2), a[2].max(r.d3)]);
            out.push(worst);
        }
    }
    let rows: Vec<VariantRow> = variants
        .iter()
        .zip(residuals)
        .map(|(v, res)| {
            let maxes: Vec<f64> = res.iter().map(|r| r[0].max(r[1]).max(r[2])).collect();
            let orders = maxes
                .windows(2)
                .zip(spacings.windows(2))
                .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
                .collect();
            VariantRow { variant: *v, label: v.label(), residuals: res, orders }
        })
        .collect();
    let verdict = select(&rows);
    let in_base_set = match &verdict {
        Verdict::Selected { variant, .. } => Some(Variant::base_candidates().contains(variant)),
        _ => None,
    };
    Ok(CalibrationReport { candidate_set: set, levels: levels.to_vec(), lambda, verdict, in_base_set, rows })
}

fn select(rows: &[VariantRow]) -> Verdict {
    let all_zero = rows.iter().all(|r| r.residuals.iter().flatten().all(|x| *x <= ZERO_FLOOR));
    if all_zero {
        return Verdict::NonDiscriminating;
    }
    let converging: Vec<&VariantRow> = rows.iter().filter(|r| r.final_order() >= MIN_ORDER).collect();
    let best = match converging.as_slice() {
        [] => return Verdict::Inconclusive { reason: format!("no variant converges at order ≥ {MIN_ORDER}") },
        [one] => *one,
        many => {
            return Verdict::Inconclusive {
                reason: format!("{} variants converge at order ≥ {MIN_ORDER}", many.len()),
            }
        }
    };
    let rival = rows
        .iter()
        .filter(|r| r.variant != best.variant)
        .map(VariantRow::finest)
        .fold(f64::INFINITY, f64::min);
    let margin = rival / best.finest();
    if margin < RIVAL_MARGIN {
        return Verdict::Inconclusive {
            reason: format!("closest rival is only {margin:.2}× the best candidate"),
        };
    }
    Verdict::Selected { variant: best.variant, label: best.label.clone(), order: best.final_order(), margin }
}

/// Spatially constant data on `T²`: `h = a²δ`, `K = bδ`, constant `φ`, `ρ`,
/// `ψ = p·dx∧dy` and `θ = t·dx∧dy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HomogeneousData {
    pub a: f64,
    pub b: f64,
    pub phi: f64,
    pub rho: f64,
    pub p: f64,
    pub t: f64,
}

pub fn homogeneous_state(grid: &Arc<Grid>, d: HomogeneousData) -> Result<CauchyState> {
    if grid.dim() != 2 {
        return Err(Error::Unsupported("homogeneous data are defined on T²".into()));
    }
    let fields = Fields {
        h: SymTensor::scaled_identity(&Scalar::constant(grid, d.a * d.a)),
        k: SymTensor::scaled_identity(&Scalar::constant(grid, d.b)),
        phi: Scalar::constant(grid, d.phi),
        rho: Scalar::constant(grid, d.rho),
        psi: Form::new(grid.clone(), 2, vec![vec![d.p; grid.len()]])?,
        theta: Form::new(grid.clone(), 2, vec![vec![d.t; grid.len()]])?,
    };
    CauchyState::new(fields, None, 0.0)
}
