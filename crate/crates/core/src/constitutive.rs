//! Co-rotated kinematics and the stress-like state relations.
//!
//! Given the right Cauchy–Green tensor `C` and the two plastic stretches
//! `U_p`, `U_pi`, the strain measures fed to the energies are
//!
//! * `C̄e = U_p⁻¹ C U_p⁻¹` (elastic),
//! * `Cp = U_p²` (linear hardening),
//! * `B̄pe = U_p U_pi⁻² U_p` (nonlinear hardening).
//!
//! Stresses follow from the energy derivatives. Incompressibility is imposed
//! by a pressure multiplier `p` that enters `S` as `2p·det(C)·C⁻¹` and the
//! Mandel stress as the spherical part `2p·det(C)·I`.

use crate::error::{Error, Result};
use crate::netfuncs::WeightSet;
use crate::tensor3::SymTensor3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicSet {
    pub c: SymTensor3,
    pub u_p: SymTensor3,
    pub u_pi: SymTensor3,
    pub ce_bar: SymTensor3,
    pub c_p: SymTensor3,
    pub bpe_bar: SymTensor3,
    pub u_p_inv: SymTensor3,
    pub u_pi_inv: SymTensor3,
}

/// Energy derivatives w.r.t. the three strain measures.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EnergyDerivatives {
    pub d_ce: SymTensor3,
    pub d_cp: SymTensor3,
    pub d_bpe: SymTensor3,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct StressSet {
    /// Second Piola–Kirchhoff stress.
    pub s: SymTensor3,
    /// Mandel stress.
    pub mandel: SymTensor3,
    /// Linear backstress.
    pub chi: SymTensor3,
    /// Nonlinear backstress.
    pub xi: SymTensor3,
    /// Relative stress, the yield-function argument.
    pub gamma: SymTensor3,
    /// Driving stress of the hardening flow.
    pub theta: SymTensor3,
    /// Pressure multiplier.
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryCondition {
    /// Coaxial loading with a traction-free third direction (`S33 = 0`).
    #[default]
    FreeS33,
    /// No multiplier; stresses follow from the energies alone.
    Unconstrained,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DissipationRecord {
    pub total: f64,
    pub plastic: f64,
    pub hardening: f64,
}

/// A constitutive model the return mapping can drive.
///
/// Yield values are reported in the model's own units; `yield_scale` converts
/// them to the dimensionless residual used for convergence and KKT checks.
pub trait Material {
    fn energy_derivatives(&self, kin: &KinematicSet) -> Result<EnergyDerivatives>;
    fn yield_value(&self, stresses: &StressSet) -> Result<f64>;
    fn yield_scale(&self) -> f64 {
        1.0
    }
    /// Plastic flow direction `D̄p` per unit multiplier.
    fn flow_plastic(&self, stresses: &StressSet) -> Result<SymTensor3>;
    /// Hardening flow direction `D̄pi` per unit multiplier.
    fn flow_hardening(&self, stresses: &StressSet) -> Result<SymTensor3>;
}

impl Material for WeightSet {
    fn energy_derivatives(&self, kin: &KinematicSet) -> Result<EnergyDerivatives> {
        Ok(EnergyDerivatives {
            d_ce: self.psi_e.grad(&kin.ce_bar)?,
            d_cp: self.psi_p.grad(&kin.c_p)?,
            d_bpe: self.psi_pe.grad(&kin.bpe_bar)?,
        })
    }

    fn yield_value(&self, stresses: &StressSet) -> Result<f64> {
        self.g1.yield_value(&stresses.gamma)
    }

    fn flow_plastic(&self, stresses: &StressSet) -> Result<SymTensor3> {
        self.g1.flow(&stresses.gamma)
    }

    fn flow_hardening(&self, stresses: &StressSet) -> Result<SymTensor3> {
        self.g2.flow(&stresses.theta)
    }
}

pub fn corotated_kinematics(c: SymTensor3, u_p: SymTensor3, u_pi: SymTensor3) -> Result<KinematicSet> {
    for t in [&c, &u_p, &u_pi] {
        if !t.is_spd() {
            return Err(Error::NotPositiveDefinite);
        }
    }
    let u_p_inv = u_p.spd_inv()?;
    let u_pi_inv = u_pi.spd_inv()?;
    let ce_bar = u_p_inv.sandwich(&c);
    let c_p = u_p.square();
    let bpe_bar = u_p.sandwich(&u_pi_inv.square());
    Ok(KinematicSet { c, u_p, u_pi, ce_bar, c_p, bpe_bar, u_p_inv, u_pi_inv })
}

/// Multiplier that makes `S33` vanish: `p = −S33 / (2·det(C)·(C⁻¹)33)`.
pub fn solve_pressure(s_nopress: &SymTensor3, c: &SymTensor3) -> Result<f64> {
    let c_inv = c.spd_inv()?;
    let denom = 2.0 * c.det() * c_inv.zz;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularTensor);
    }
    Ok(-s_nopress.zz / denom)
}

pub fn compute_stresses<M: Material + ?Sized>(
    model: &M,
    kin: &KinematicSet,
    bc: BoundaryCondition,
) -> Result<StressSet> {
    let d = model.energy_derivatives(kin)?;
    let s_np = kin.u_p_inv.sandwich(&d.d_ce) * 2.0;
    let mut mandel = kin.ce_bar.sym_product(&d.d_ce) * 2.0;
    let chi = d.d_cp.sym_product(&kin.c_p) * 2.0;
    let xi = d.d_bpe.sym_product(&kin.bpe_bar) * 2.0;
    let theta = hardening_pullback(&(d.d_bpe * 2.0), kin);

    let (s, p) = match bc {
        BoundaryCondition::Unconstrained => (s_np, 0.0),
        BoundaryCondition::FreeS33 => {
            let p = solve_pressure(&s_np, &kin.c)?;
            let jc = kin.c.det();
            let s = s_np + kin.c.spd_inv()? * (2.0 * p * jc);
            mandel += SymTensor3::IDENTITY * (2.0 * p * jc);
            (s, p)
        }
    };
    let gamma = mandel - chi - xi;
    Ok(StressSet { s, mandel, chi, xi, gamma, theta, p })
}

/// `Mᵀ X M` with `M = U_p U_pi⁻¹`, skipping dense products for diagonal states.
fn hardening_pullback(x: &SymTensor3, kin: &KinematicSet) -> SymTensor3 {
    if x.is_diagonal() && kin.u_p.is_diagonal() && kin.u_pi.is_diagonal() {
        let f = [
            kin.u_p.xx * kin.u_pi_inv.xx,
            kin.u_p.yy * kin.u_pi_inv.yy,
            kin.u_p.zz * kin.u_pi_inv.zz,
        ];
        return SymTensor3::diag(x.xx * f[0] * f[0], x.yy * f[1] * f[1], x.zz * f[2] * f[2]);
    }
    let m = kin.u_p.to_mat3().matmul(&kin.u_pi_inv.to_mat3());
    SymTensor3::congruence(x, &m)
}

/// `λ·(Γ̄ : D̄p + Θ̄ : D̄pi)` with the flow directions given per unit multiplier.
pub fn reduced_dissipation(
    gamma: &SymTensor3,
    dp_dir: &SymTensor3,
    theta: &SymTensor3,
    dpi_dir: &SymTensor3,
    lambda: f64,
) -> DissipationRecord {
    let plastic = lambda * gamma.ddot(dp_dir);
    let hardening = lambda * theta.ddot(dpi_dir);
    DissipationRecord { total: plastic + hardening, plastic, hardening }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfuncs::{EnergyWeights, NetForm};

    fn uniaxial(l: f64) -> SymTensor3 {
        SymTensor3::diag(l * l, 1.0 / l, 1.0 / l)
    }

    #[test]
    fn kinematics_examples() {
        let c = uniaxial(1.2);
        let k = corotated_kinematics(c, SymTensor3::IDENTITY, SymTensor3::IDENTITY).unwrap();
        assert_eq!(k.ce_bar, c);
        assert_eq!(k.c_p, SymTensor3::IDENTITY);
        assert_eq!(k.bpe_bar, SymTensor3::IDENTITY);

        let a: f64 = 1.3;
        let up = SymTensor3::diag(a, 1.0 / a.sqrt(), 1.0 / a.sqrt());
        let k = corotated_kinematics(SymTensor3::IDENTITY, up, up).unwrap();
        let want = SymTensor3::diag(1.0 / (a * a), a, a);
        assert!((k.ce_bar - want).max_abs() < 1e-15);
        assert!((k.bpe_bar - SymTensor3::IDENTITY).max_abs() < 1e-15);
        assert!((k.c_p.det() - 1.0).abs() < 1e-15);

        assert_eq!(
            corotated_kinematics(SymTensor3::diag(1.0, -1.0, 1.0), up, up),
            Err(Error::NotPositiveDefinite)
        );
    }

    #[test]
    fn zero_weights_give_zero_stress() {
        let ws = WeightSet::zeros(NetForm::Reduced, NetForm::Reduced);
        let k = corotated_kinematics(uniaxial(1.1), SymTensor3::IDENTITY, SymTensor3::IDENTITY).unwrap();
        let st = compute_stresses(&ws, &k, BoundaryCondition::FreeS33).unwrap();
        assert_eq!(st.p, 0.0);
        assert_eq!(st.s, SymTensor3::ZERO);
        assert_eq!(st.gamma, SymTensor3::ZERO);
        assert_eq!(st.theta, SymTensor3::ZERO);
    }

    #[test]
    fn neo_hookean_uniaxial_mandel() {
        let mut ws = WeightSet::zeros(NetForm::Reduced, NetForm::Reduced);
        ws.psi_e = EnergyWeights::neo_hookean(6.25);
        ws.psi_p = EnergyWeights::neo_hookean(3.0);
        let k = corotated_kinematics(uniaxial(1.1), SymTensor3::IDENTITY, SymTensor3::IDENTITY).unwrap();
        let st = compute_stresses(&ws, &k, BoundaryCondition::FreeS33).unwrap();
        let dev = st.mandel.dev();
        assert!((dev - SymTensor3::diag(2.5076, -1.2538, -1.2538)).max_abs() < 5e-5);
        assert_eq!(st.chi, SymTensor3::ZERO);
        assert!(st.s.zz.abs() <= 1e-12 * st.s.max_abs());
        assert_eq!(st.gamma, st.mandel - st.chi - st.xi);
    }

    #[test]
    fn pressure_examples() {
        assert_eq!(solve_pressure(&SymTensor3::ZERO, &SymTensor3::IDENTITY).unwrap(), 0.0);
        let s = SymTensor3::diag(0.0, 0.0, -2.0);
        assert_eq!(solve_pressure(&s, &SymTensor3::IDENTITY).unwrap(), 1.0);
    }

    #[test]
    fn dissipation_examples() {
        let g = SymTensor3::diag(2.0, 0.0, 0.0);
        let f = SymTensor3::diag(1.0, -0.5, -0.5);
        assert_eq!(reduced_dissipation(&g, &f, &SymTensor3::ZERO, &SymTensor3::ZERO, 0.0).total, 0.0);
        let d = reduced_dissipation(&g, &f, &SymTensor3::ZERO, &SymTensor3::ZERO, 0.1);
        assert!((d.total - 0.2).abs() < 1e-15);
    }
}
