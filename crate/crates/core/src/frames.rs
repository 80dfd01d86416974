//! String ↔ Einstein frame change `g_E = e^{−2φ/(n−1)} g` and numerical
//! checks of the conformal transformation identities.
//!
//! `n` is always the dimension of the spatial slice, so the metric being
//! rescaled lives in dimension `n + 1`.

use crate::error::{Error, Result};
use crate::field::{differential, Form, Scalar, SymTensor};
use crate::geometry::{
    christoffel, codifferential_with, contract_sharp, hessian_with, norm2, ricci_with, scalar_curvature, Metric,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    String,
    Einstein,
}

/// Frame label together with the slice dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameTag {
    pub frame: Frame,
    pub n: usize,
}

impl FrameTag {
    pub fn new(frame: Frame, n: usize) -> Result<FrameTag> {
        if n == 0 {
            return Err(Error::Unsupported("frame dimension n must be at least 1".into()));
        }
        Ok(FrameTag { frame, n })
    }
}

fn exponent_denominator(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Unsupported(format!(
            "conformal exponent 2φ/(n−1) is undefined for n = {n}"
        )));
    }
    Ok((n - 1) as f64)
}

/// `g_E = e^{−2φ/(n−1)} g`.
pub fn to_einstein(g: &Metric, phi: &Scalar, n: usize) -> Result<Metric> {
    let m = exponent_denominator(n)?;
    g.conformal(&phi.map(|p| (-2.0 * p / m).exp()))
}

/// Inverse of [`to_einstein`]: `g = e^{2φ/(n−1)} g_E`.
pub fn to_string_frame(g_e: &Metric, phi: &Scalar, n: usize) -> Result<Metric> {
    let m = exponent_denominator(n)?;
    g_e.conformal(&phi.map(|p| (2.0 * p / m).exp()))
}

/// Residuals of the three conformal identities relating `g = e^{2φ/(n−1)} g_E`
/// to `g_E`: Ricci, codifferential of a test form, and Hessian of `φ`.
#[derive(Clone, Debug)]
pub struct ConformalResiduals {
    pub ricci: SymTensor,
    pub codifferential: Form,
    pub hessian: SymTensor,
}

impl ConformalResiduals {
    pub fn max_norms(&self) -> [f64; 3] {
        [self.ricci.max_abs(), self.codifferential.max_abs(), self.hessian.max_abs()]
    }
}

/// Evaluates each identity twice: the left side directly on `g`, the right
/// side from `g_E` quantities. `alpha` is the test form for the
/// codifferential identity.
pub fn conformal_identity_residuals(g_e: &Metric, phi: &Scalar, n: usize, alpha: &Form) -> Result<ConformalResiduals> {
    let m = exponent_denominator(n)?;
    if g_e.dim() != n + 1 {
        return Err(Error::Unsupported(format!(
            "metric of dimension {} does not match n + 1 = {}",
            g_e.dim(),
            n + 1
        )));
    }
    let g = to_string_frame(g_e, phi, n)?;
    let gam = christoffel(&g);
    let gam_e = christoffel(g_e);
    let dphi = differential(phi);
    let dphi2 = SymTensor::sym_product(&dphi, &dphi)?;
    let dphi_norm = norm2(g_e, &dphi)?;
    let hess_e = hessian_with(g_e, &gam_e, phi);
    let lap_e = codifferential_with(g_e, &gam_e, &dphi)?.comp_scalar(0);
    let ge = g_e.tensor();

    // Ric^g = Ric^E − (∇^E dφ − dφ⊗dφ/(n−1)) + (δ^E dφ − |dφ|²_E) g_E/(n−1)
    let ric_rhs = &(&ricci_with(g_e, &gam_e) - &hess_e)
        + &(&dphi2.scale(1.0 / m) + &ge.mul_scalar(&(&lap_e - &dphi_norm)).scale(1.0 / m));
    let ricci = &ricci_with(&g, &gam) - &ric_rhs;

    // δ^g α = e^{−2φ/(n−1)} (δ^E α − (n+1−2k)/(n−1) α(dφ^♯E))
    let k = alpha.degree() as f64;
    let weight = (n as f64 + 1.0 - 2.0 * k) / m;
    let inner = &codifferential_with(g_e, &gam_e, alpha)? - &contract_sharp(g_e, alpha, &dphi)?.scale(weight);
    let cod_rhs = inner.mul_scalar(&phi.map(|p| (-2.0 * p / m).exp()));
    let codifferential = &codifferential_with(&g, &gam, alpha)? - &cod_rhs;

    // ∇^g dφ = ∇^E dφ − 2 dφ⊗dφ/(n−1) + |dφ|²_E g_E/(n−1)
    let hess_rhs = &(&hess_e - &dphi2.scale(2.0 / m)) + &ge.mul_scalar(&dphi_norm).scale(1.0 / m);
    let hessian = &hessian_with(&g, &gam, phi) - &hess_rhs;

    Ok(ConformalResiduals { ricci, codifferential, hessian })
}

/// Both sides of the integrated scalar-curvature density relation
/// `∫ e^{−φ} s^g ν_g = ∫ (s^E − n/(n−1) |dφ|²_E) ν_E`.
///
/// The pointwise densities differ by the exact term `2n/(n−1) Δ_E φ`,
/// which integrates to zero on a closed manifold.
#[derive(Clone, Copy, Debug)]
pub struct DensityCheck {
    pub string_side: f64,
    pub einstein_side: f64,
    /// `∫ s^E ν_E` alone, for comparison with the uncorrected relation.
    pub einstein_hilbert: f64,
}

pub fn scalar_density_check(g_e: &Metric, phi: &Scalar, n: usize) -> Result<DensityCheck> {
    let m = exponent_denominator(n)?;
    let g = to_string_frame(g_e, phi, n)?;
    let lhs = &(&phi.map(|p| (-p).exp()) * &g.sqrt_det()) * &scalar_curvature(&g);
    let s_e = scalar_curvature(g_e);
    let dphi_norm = norm2(g_e, &differential(phi))?;
    let vol_e = g_e.sqrt_det();
    let rhs = &vol_e * &(&s_e - &dphi_norm.scale(n as f64 / m));
    Ok(DensityCheck {
        string_side: lhs.integrate(),
        einstein_side: rhs.integrate(),
        einstein_hilbert: (&vol_e * &s_e).integrate(),
    })
}
