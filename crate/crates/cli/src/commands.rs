use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use gerbeflow::cauchy::{
    calibrate_identities, constraint_residuals_lambda, evolve_with, generic_state, homogeneous_state, CalibrationLevel,
    CalibrationReport, CandidateSet, CauchyState, EvolutionConfig, HomogeneousData, Verdict,
};
use gerbeflow::constraint2d::{solve_conformal_constraints, AnsatzParams, Profile, ResidualMaxima, SolveSummary};
use gerbeflow::{gfld, Error, Grid, Metric, Scalar};
use serde::Serialize;

use crate::config::{CalibrationData, ConfigError, ExperimentConfig};
use crate::output::{remove_stale_states, write_atomic, write_json};
use crate::verify;

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Config = 1,
    Verification = 2,
    Numerical = 3,
    Inconclusive = 4,
}

/// A failure with the status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Failure {
        Failure { exit: Exit::Config, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let exit = match &e {
            Error::Hypothesis { .. } | Error::NotClosed { .. } | Error::NotIntegral { .. } => Exit::Verification,
            Error::NonFinite { .. } | Error::Aborted { .. } | Error::NoConvergence { .. } | Error::DegenerateMetric { .. } => Exit::Numerical,
            _ => Exit::Config,
        };
        Failure { exit, message: e.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Failure {
        Failure::config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::config(format!("I/O error: {e}"))
    }
}

fn torus(cfg: &ExperimentConfig) -> Result<Arc<Grid>, Failure> {
    Ok(Arc::new(Grid::torus(&cfg.grid.points, &cfg.grid.lengths)?))
}

pub fn verify(cfg: &ExperimentConfig, out: &Path) -> Result<Exit, Failure> {
    let report = verify::run(cfg)?;
    write_json(out, "verify_report.json", &report)?;
    for c in &report.checks {
        let detail = match c.observed_order {
            Some(o) => format!("order {o:.2}"),
            None => format!("residual {:.3e}", c.residuals[0]),
        };
        eprintln!("{} {}: {detail}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    Ok(if report.pass { Exit::Ok } else { Exit::Verification })
}

pub fn solve_constraints(cfg: &ExperimentConfig, out: &Path) -> Result<Exit, Failure> {
    if cfg.grid.n != 2 {
        return Err(Failure::config("solve-constraints needs [grid] n = 2"));
    }
    let c = cfg.constraints2d()?;
    let grid = torus(cfg)?;
    let phi = Scalar::from_fn(&grid, |x| c.phi.eval(x));
    let profile = Profile::from_name(&c.profile).expect("validated profile name");
    let params = AnsatzParams::new(c.c, c.k, profile, phi);
    let sol = solve_conformal_constraints(&params, &Metric::flat(&grid), None)?;
    let res = constraint_residuals_lambda(&sol.state, 0.0)?;
    let summary = SolveSummary {
        c: c.c,
        k: c.k,
        profile: c.profile.clone(),
        residuals: ResidualMaxima { c1: res.c1.max_abs(), c2: res.c2.max_abs(), c3: res.c3.max_abs() },
        newton_iters: sol.newton.iterations(),
        final_residual: sol.newton.final_residual(),
    };
    let mut bytes = Vec::new();
    gfld::write_state(&mut bytes, &sol.state)?;
    write_atomic(out, "initial_state.gfld", &bytes)?;
    write_json(out, "initial_state.json", &summary)?;
    Ok(Exit::Ok)
}

pub fn evolve(cfg: &ExperimentConfig, state: Option<&Path>, out: &Path) -> Result<Exit, Failure> {
    let settings = cfg.evolution()?;
    let path = state.ok_or_else(|| Failure::config("evolve needs --state <path>"))?;
    let file = File::open(path).map_err(|e| Failure::config(format!("cannot open {}: {e}", path.display())))?;
    let initial = gfld::read_state(&mut BufReader::new(file))?;
    if initial.grid().shape() != cfg.grid.points || initial.grid().lengths() != cfg.grid.lengths {
        return Err(Failure::config("state grid does not match [grid]"));
    }
    let ecfg = EvolutionConfig {
        lambda: settings.lambda,
        dt: settings.dt,
        steps: settings.steps,
        record_every: settings.record_every,
    };
    let mut written = 0;
    let mut write_error = None;
    let traj = evolve_with(&initial, &ecfg, |_, s| {
        let mut bytes = Vec::new();
        let result = gfld::write_state(&mut bytes, s)
            .map_err(Failure::from)
            .and_then(|_| write_atomic(out, &format!("state_{written}.gfld"), &bytes).map_err(Failure::from));
        if let Err(e) = result {
            write_error.get_or_insert(e);
        }
        written += 1;
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let traj = traj?;
    remove_stale_states(out, written)?;
    let mut csv = String::from("tau,C1_max,C1_l2,C2_max,C2_l2,C3_max,C3_l2\n");
    for r in &traj.residuals {
        writeln!(
            csv,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.tau, r.c1_max, r.c1_l2, r.c2_max, r.c2_l2, r.c3_max, r.c3_l2
        )
        .expect("writing to a String");
    }
    write_atomic(out, "residuals.csv", csv.as_bytes())?;
    Ok(Exit::Ok)
}

#[derive(Serialize)]
struct ConventionLedger<'a> {
    conventions: Conventions,
    propagation: &'a CalibrationReport,
}

#[derive(Serialize)]
struct Conventions {
    codifferential: &'static str,
    form_inner_product: &'static str,
    second_fundamental_form: &'static str,
    c3_contraction_weight: &'static str,
}

const CONVENTIONS: Conventions = Conventions {
    codifferential: "δ = −div, so δd is the positive Laplacian",
    form_inner_product: "determinant norm (1/k!) α_I β^I",
    second_fundamental_form: "Θ = ½∂τh, K = ∂τh = 2Θ",
    c3_contraction_weight: "ψ⌟H carries 1/p!, so ψ⌟ψ = |ψ|²",
};

pub fn calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<Exit, Failure> {
    let cal = &cfg.calibration;
    let n = cfg.grid.n;
    if cal.data == CalibrationData::Homogeneous && n != 2 {
        return Err(Failure::config("homogeneous calibration data are defined for n = 2"));
    }
    let length = cfg.grid.lengths[0];
    if cfg.grid.lengths.iter().any(|l| *l != length) {
        return Err(Failure::config("calibration needs equal torus lengths"));
    }
    let seed = cfg.seed;
    let generator = |points: usize| -> gerbeflow::Result<CauchyState> {
        let grid = Arc::new(Grid::torus(&vec![points; n], &vec![length; n])?);
        match cal.data {
            CalibrationData::Generic => generic_state(&grid, seed),
            CalibrationData::Flat => CauchyState::flat(&grid),
            CalibrationData::Homogeneous => homogeneous_state(
                &grid,
                HomogeneousData { a: 1.1, b: 0.3, phi: 0.1, rho: 0.4, p: 0.7, t: 0.0 },
            ),
        }
    };
    let levels: Vec<CalibrationLevel> =
        cal.levels.iter().map(|&p| CalibrationLevel::refined(p, length, cal.tau)).collect();
    let set = if cal.extended { CandidateSet::Extended } else { CandidateSet::Base };
    let report = calibrate_identities(generator, &levels, cal.lambda, set)?;
    write_json(out, "convention_ledger.json", &ConventionLedger { conventions: CONVENTIONS, propagation: &report })?;
    match &report.verdict {
        Verdict::Selected { label, order, margin, .. } => {
            eprintln!("selected {label} (order {order:.2}, rival margin {margin:.1}x)");
            Ok(Exit::Ok)
        }
        Verdict::Inconclusive { reason } => {
            eprintln!("inconclusive: {reason}");
            Ok(Exit::Inconclusive)
        }
        Verdict::NonDiscriminating => {
            eprintln!("inconclusive: every variant gives identically zero residuals");
            Ok(Exit::Inconclusive)
        }
    }
}
