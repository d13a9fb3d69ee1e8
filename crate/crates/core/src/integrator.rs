//! Material-point time stepping.
//!
//! Each step evaluates the flow directions from the converged stresses of the
//! previous step, integrates both plastic stretches with the exponential map,
//! and solves the scalar consistency condition `Φ(Δλ) = 0` by Newton's method
//! when the elastic trial state violates the yield condition.

use crate::constitutive::{
    compute_stresses, corotated_kinematics, reduced_dissipation, BoundaryCondition, DissipationRecord, Material,
    StressSet,
};
use crate::error::{Error, Result};
use crate::refmodels::LoadPath;
use crate::tensor3::SymTensor3;

/// Tolerance on the dimensionless yield residual.
pub const TOL_PHI: f64 = 1e-8;
pub const MAX_NEWTON_ITERS: usize = 50;
const MAX_BISECTION_ITERS: usize = 200;
/// Flow directions with a smaller norm count as vanishing.
const DEGENERATE_FLOW: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialState {
    pub u_p: SymTensor3,
    pub u_pi: SymTensor3,
}

impl MaterialState {
    pub const VIRGIN: MaterialState = MaterialState { u_p: SymTensor3::IDENTITY, u_pi: SymTensor3::IDENTITY };
}

impl Default for MaterialState {
    fn default() -> Self {
        Self::VIRGIN
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub time: f64,
    pub c: SymTensor3,
    pub state: MaterialState,
    pub stresses: StressSet,
    /// Cauchy stress.
    pub sigma: SymTensor3,
    pub dlambda: f64,
    /// Dimensionless yield residual of the elastic trial.
    pub phi_trial: f64,
    /// Dimensionless yield residual at the accepted state.
    pub phi_final: f64,
    pub newton_iters: usize,
    pub dissipation: DissipationRecord,
    pub used_bisection: bool,
    /// Flow directions had to be re-evaluated at the trial state.
    pub flow_reevaluated: bool,
}

impl StepResult {
    /// Discrete KKT conditions.
    pub fn kkt_ok(&self, tol: f64) -> bool {
        (self.dlambda == 0.0 && self.phi_final <= tol) || (self.dlambda > 0.0 && self.phi_final.abs() <= tol)
    }
}

/// `U·exp(2·Δλ·D)·U`, the updated squared stretch.
pub fn exp_update(u: &SymTensor3, dlambda: f64, d_dir: &SymTensor3) -> Result<SymTensor3> {
    if dlambda == 0.0 {
        return Ok(u.square());
    }
    Ok(u.sandwich(&(*d_dir * (2.0 * dlambda)).sym_exp()))
}

/// Flow directions `(∂g1/∂Γ̄, ∂g2/∂Θ̄)` at the given stresses.
pub fn flow_directions<M: Material + ?Sized>(model: &M, stresses: &StressSet) -> Result<(SymTensor3, SymTensor3)> {
    Ok((model.flow_plastic(stresses)?, model.flow_hardening(stresses)?))
}

/// `det(F)⁻¹ F S F` with `F = C^{1/2}` (rotation-free coaxial loading).
pub fn cauchy_stress(c: &SymTensor3, s: &SymTensor3) -> Result<SymTensor3> {
    let f = c.spd_sqrt()?;
    Ok(f.sandwich(s) * (1.0 / f.det()))
}

struct Evaluated {
    state: MaterialState,
    stresses: StressSet,
    phi: f64,
}

struct Stepper<'a, M: Material + ?Sized> {
    model: &'a M,
    state_n: MaterialState,
    c_next: SymTensor3,
    bc: BoundaryCondition,
    dp: SymTensor3,
    dpi: SymTensor3,
}

impl<M: Material + ?Sized> Stepper<'_, M> {
    fn eval(&self, dlambda: f64) -> Result<Evaluated> {
        let state = if dlambda == 0.0 {
            self.state_n
        } else {
            MaterialState {
                u_p: exp_update(&self.state_n.u_p, dlambda, &self.dp)?.spd_sqrt()?,
                u_pi: exp_update(&self.state_n.u_pi, dlambda, &self.dpi)?.spd_sqrt()?,
            }
        };
        let kin = corotated_kinematics(self.c_next, state.u_p, state.u_pi)?;
        let stresses = compute_stresses(self.model, &kin, self.bc)?;
        let phi = self.model.yield_value(&stresses)? / self.model.yield_scale();
        if !phi.is_finite() {
            return Err(Error::NewtonDivergence(format!("yield residual is {phi} at Δλ = {dlambda:e}")));
        }
        Ok(Evaluated { state, stresses, phi })
    }

    fn slope(&self, dlambda: f64) -> Result<f64> {
        let h = (1e-6 * dlambda).max(1e-8);
        Ok((self.eval(dlambda + h)?.phi - self.eval(dlambda - h)?.phi) / (2.0 * h))
    }

    /// Newton iteration from the trial state; `None` asks for the bracketing fallback.
    fn newton(&self, trial: Evaluated) -> Result<Option<(f64, Evaluated, usize)>> {
        let mut dl = 0.0;
        let mut cur = trial;
        let mut growing_flips = 0;
        for it in 1..=MAX_NEWTON_ITERS {
            let slope = self.slope(dl)?;
            // Φ must decrease along the flow; anything else goes to bisection
            if !(slope < 0.0) || !slope.is_finite() {
                return Ok(None);
            }
            let next_dl = (dl - cur.phi / slope).max(0.0);
            let next = self.eval(next_dl)?;
            if next.phi.signum() != cur.phi.signum() && next.phi.abs() > cur.phi.abs() {
                growing_flips += 1;
                if growing_flips >= 5 {
                    return Ok(None);
                }
            } else {
                growing_flips = 0;
            }
            dl = next_dl;
            cur = next;
            if cur.phi.abs() <= TOL_PHI && dl > 0.0 {
                // one more update drives the residual to round-off, which keeps the
                // converged state a smooth function of the model parameters
                let slope = self.slope(dl)?;
                if slope < 0.0 && slope.is_finite() {
                    let pdl = (dl - cur.phi / slope).max(0.0);
                    let polished = self.eval(pdl)?;
                    if pdl > 0.0 && polished.phi.abs() <= cur.phi.abs() {
                        return Ok(Some((pdl, polished, it + 1)));
                    }
                }
                return Ok(Some((dl, cur, it)));
            }
        }
        Err(Error::NewtonDivergence(format!(
            "no convergence after {MAX_NEWTON_ITERS} iterations (residual {:e})",
            cur.phi
        )))
    }

    fn bisection(&self) -> Result<(f64, Evaluated, usize)> {
        let mut lo = 0.0;
        let mut hi = 1e-8;
        let mut evals = 0;
        let mut at_hi = self.eval(hi)?;
        while at_hi.phi > 0.0 {
            lo = hi;
            hi *= 2.0;
            evals += 1;
            if evals > MAX_BISECTION_ITERS {
                return Err(Error::NewtonDivergence("could not bracket the consistency condition".into()));
            }
            at_hi = self.eval(hi)?;
        }
        if at_hi.phi.abs() <= TOL_PHI {
            return Ok((hi, at_hi, evals));
        }
        for _ in 0..MAX_BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            let m = self.eval(mid)?;
            evals += 1;
            if m.phi.abs() <= TOL_PHI {
                return Ok((mid, m, evals));
            }
            if m.phi > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::NewtonDivergence("bisection did not reach the tolerance".into()))
    }
}

/// One time step given the converged stresses of the previous step.
pub fn step_from<M: Material + ?Sized>(
    model: &M,
    state_n: MaterialState,
    stresses_n: &StressSet,
    t_next: f64,
    dt: f64,
    c_next: SymTensor3,
    bc: BoundaryCondition,
) -> Result<StepResult> {
    if !(dt > 0.0) {
        return Err(Error::InvalidPath(format!("time step must be positive, got {dt}")));
    }
    let (dp, dpi) = flow_directions(model, stresses_n)?;
    let mut stepper = Stepper { model, state_n, c_next, bc, dp, dpi };
    let trial = stepper.eval(0.0)?;
    let phi_trial = trial.phi;

    let elastic = |trial: Evaluated| -> Result<StepResult> {
        Ok(StepResult {
            time: t_next,
            c: c_next,
            state: trial.state,
            sigma: cauchy_stress(&c_next, &trial.stresses.s)?,
            stresses: trial.stresses,
            dlambda: 0.0,
            phi_trial,
            phi_final: trial.phi,
            newton_iters: 0,
            dissipation: DissipationRecord::default(),
            used_bisection: false,
            flow_reevaluated: false,
        })
    };
    if phi_trial <= TOL_PHI {
        return elastic(trial);
    }

    let mut flow_stresses = *stresses_n;
    let mut flow_reevaluated = false;
    if stepper.dp.norm() < DEGENERATE_FLOW {
        let (dp, dpi) = flow_directions(model, &trial.stresses)?;
        if dp.norm() < DEGENERATE_FLOW {
            return Err(Error::DegenerateFlow);
        }
        stepper.dp = dp;
        stepper.dpi = dpi;
        flow_stresses = trial.stresses;
        flow_reevaluated = true;
    }

    let (dlambda, fin, iters, used_bisection) = match stepper.newton(trial)? {
        Some((dl, fin, it)) => (dl, fin, it, false),
        None => {
            let (dl, fin, it) = stepper.bisection()?;
            (dl, fin, it, true)
        }
    };
    let dissipation = reduced_dissipation(
        &flow_stresses.gamma,
        &stepper.dp,
        &flow_stresses.theta,
        &stepper.dpi,
        dlambda / dt,
    );
    Ok(StepResult {
        time: t_next,
        c: c_next,
        state: fin.state,
        sigma: cauchy_stress(&c_next, &fin.stresses.s)?,
        stresses: fin.stresses,
        dlambda,
        phi_trial,
        phi_final: fin.phi,
        newton_iters: iters,
        dissipation,
        used_bisection,
        flow_reevaluated,
    })
}

/// One time step from `C_n` to `C_next`; the result is stamped with time `dt`.
pub fn step<M: Material + ?Sized>(
    model: &M,
    state_n: MaterialState,
    c_n: SymTensor3,
    c_next: SymTensor3,
    dt: f64,
    bc: BoundaryCondition,
) -> Result<StepResult> {
    let kin = corotated_kinematics(c_n, state_n.u_p, state_n.u_pi)?;
    let stresses_n = compute_stresses(model, &kin, bc)?;
    step_from(model, state_n, &stresses_n, dt, dt, c_next, bc)
}

/// Response at the first record of a path, starting from the virgin state.
pub fn initial_record<M: Material + ?Sized>(
    model: &M,
    time: f64,
    c: SymTensor3,
    bc: BoundaryCondition,
) -> Result<StepResult> {
    let state = MaterialState::VIRGIN;
    let kin = corotated_kinematics(c, state.u_p, state.u_pi)?;
    let stresses = compute_stresses(model, &kin, bc)?;
    let phi = model.yield_value(&stresses)? / model.yield_scale();
    Ok(StepResult {
        time,
        c,
        state,
        sigma: cauchy_stress(&c, &stresses.s)?,
        stresses,
        dlambda: 0.0,
        phi_trial: phi,
        phi_final: phi,
        newton_iters: 0,
        dissipation: DissipationRecord::default(),
        used_bisection: false,
        flow_reevaluated: false,
    })
}

/// Runs the model along a load path from the virgin state. The first record
/// is the (elastic) response at the path's first point.
pub fn simulate_path<M: Material + ?Sized>(model: &M, path: &LoadPath) -> Result<Vec<StepResult>> {
    simulate_states(model, path.times(), path.c_history(), BoundaryCondition::FreeS33)
}

pub fn simulate_states<M: Material + ?Sized>(
    model: &M,
    times: &[f64],
    cs: &[SymTensor3],
    bc: BoundaryCondition,
) -> Result<Vec<StepResult>> {
    if times.len() != cs.len() || times.is_empty() {
        return Err(Error::InvalidPath("times and deformations must be non-empty and of equal length".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut prev = initial_record(model, times[0], cs[0], bc)?;
    out.push(prev);
    for k in 1..times.len() {
        let r = step_from(model, prev.state, &prev.stresses, times[k], times[k] - times[k - 1], cs[k], bc)?;
        out.push(r);
        prev = r;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfuncs::WeightSet;

    fn uniaxial(l: f64) -> SymTensor3 {
        SymTensor3::diag(l * l, 1.0 / l, 1.0 / l)
    }

    fn perfect() -> WeightSet {
        WeightSet::von_mises_af(12.5, 2.0, 0.0, 0.0)
    }

    #[test]
    fn exp_update_examples() {
        let u = SymTensor3::diag(1.1, 0.9, 1.0);
        assert_eq!(exp_update(&u, 0.0, &SymTensor3::diag(1.0, 0.0, 0.0)).unwrap(), u.square());
        let d = SymTensor3::diag(1.0, -0.5, -0.5);
        let c = exp_update(&SymTensor3::IDENTITY, 0.05, &d).unwrap();
        let want = SymTensor3::diag(0.1f64.exp(), (-0.05f64).exp(), (-0.05f64).exp());
        assert!((c - want).max_abs() < 1e-15);
        let c = exp_update(&u, 0.7, &d).unwrap();
        assert!((c.det() / u.square().det() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flow_direction_examples() {
        let ws = perfect();
        let zero = StressSet::default();
        let (dp, dpi) = flow_directions(&ws, &zero).unwrap();
        assert_eq!((dp, dpi), (SymTensor3::ZERO, SymTensor3::ZERO));
        let st = StressSet { gamma: SymTensor3::diag(2.0, 0.0, 0.0), ..Default::default() };
        let (dp, _) = flow_directions(&ws, &st).unwrap();
        assert!((dp - SymTensor3::diag(1.0, -0.5, -0.5)).max_abs() < 1e-15);
        assert_eq!(dp.trace(), 0.0);
    }

    #[test]
    fn elastic_step_keeps_state() {
        let ws = perfect();
        let r = step(&ws, MaterialState::VIRGIN, SymTensor3::IDENTITY, uniaxial(1.01), 1.0, BoundaryCondition::FreeS33)
            .unwrap();
        assert_eq!(r.dlambda, 0.0);
        assert_eq!(r.state, MaterialState::VIRGIN);
        assert!(r.phi_final < 0.0);
    }

    #[test]
    fn perfect_plasticity_plateaus_at_yield() {
        let ws = perfect();
        let n = 300;
        let times: Vec<f64> = (0..=n).map(|k| k as f64).collect();
        let cs: Vec<_> = (0..=n).map(|k| uniaxial(1.0 + 0.3 * k as f64 / n as f64)).collect();
        let out = simulate_states(&ws, &times, &cs, BoundaryCondition::FreeS33).unwrap();
        let last = out.last().unwrap();
        assert!((last.sigma.xx - 2.0).abs() < 1e-6, "{}", last.sigma.xx);
        assert!(out.iter().all(|r| r.kkt_ok(TOL_PHI)));
        assert!(out.iter().all(|r| !r.used_bisection && r.newton_iters <= 6));
        assert!(out.iter().all(|r| r.dissipation.total >= -1e-10));
        assert!((last.state.u_p.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversal_starts_elastic() {
        let ws = WeightSet::von_mises_af(12.5, 2.0, 8.5, 3.0);
        let mut lam: Vec<f64> = (0..=100).map(|k| 1.0 + 0.2 * k as f64 / 100.0).collect();
        lam.extend((1..=20).map(|k| 1.2 - 0.1 * k as f64 / 20.0));
        let times: Vec<f64> = (0..lam.len()).map(|k| k as f64).collect();
        let cs: Vec<_> = lam.iter().map(|&l| uniaxial(l)).collect();
        let out = simulate_states(&ws, &times, &cs, BoundaryCondition::FreeS33).unwrap();
        assert!(out[100].dlambda > 0.0);
        assert_eq!(out[101].dlambda, 0.0);
    }

    #[test]
    fn step_rejects_bad_time_increment() {
        let ws = perfect();
        let r = step(&ws, MaterialState::VIRGIN, SymTensor3::IDENTITY, uniaxial(1.01), 0.0, BoundaryCondition::FreeS33);
        assert!(matches!(r, Err(Error::InvalidPath(_))));
    }
}
