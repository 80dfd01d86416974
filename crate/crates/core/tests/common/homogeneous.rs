//! Spatially constant data on `T²` reduce the evolution system to six ODEs.
//! With `h = Aδ`, `K = Bδ` and `ψ = p·dx∧dy` on a flat slice (`n = 2`):
//!
//! ```text
//! A' = B
//! B' = e^{−4φ}p²/A + 2λe^{2φ}A
//! φ' = ρ
//! ρ' = −ρB/A − e^{−4φ}p²/A² − λe^{2φ}
//! p' = (B/A + 4ρ)p
//! t' = p
//! ```
//!
//! Here `|ψ|² = p²/A²`, `ψ∘ψ = (p²/A)δ` and `Σ_i K(e_i)∧ι_{e_i}ψ = 2(B/A)ψ`.

use ode_solvers::{Dop853, System, Vector6};

pub type State = Vector6<f64>;

pub struct Reduced {
    pub lambda: f64,
}

impl Reduced {
    pub fn rhs(&self, y: &State) -> State {
        let (a, b, phi, rho, p) = (y[0], y[1], y[2], y[3], y[4]);
        let w = (-4.0 * phi).exp();
        let l = self.lambda * (2.0 * phi).exp();
        State::new(
            b,
            w * p * p / a + 2.0 * l * a,
            rho,
            -rho * b / a - w * p * p / (a * a) - l,
            (b / a + 4.0 * rho) * p,
            p,
        )
    }
}

impl System<f64, State> for Reduced {
    fn system(&self, _x: f64, y: &State, dy: &mut State) {
        *dy = self.rhs(y);
    }
}

/// `y(tau)` by an adaptive 8th-order Dormand–Prince integration at
/// tolerance `1e-12`, read off its dense output.
pub fn integrate(lambda: f64, y0: State, tau: f64) -> State {
    let mut solver = Dop853::new(Reduced { lambda }, 0.0, tau, tau / 4.0, y0, 1e-12, 1e-12);
    solver.integrate().expect("reduced system integrates");
    let (x, y) = solver.results().get();
    assert!((x.last().unwrap() - tau).abs() < 1e-14);
    *y.last().unwrap()
}
