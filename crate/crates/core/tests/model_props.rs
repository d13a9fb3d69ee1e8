use icann_core::constitutive::{compute_stresses, corotated_kinematics, BoundaryCondition};
use icann_core::integrator::{simulate_states, StepResult, TOL_PHI};
use icann_core::netfuncs::{EnergyWeights, NetForm, PotentialWeights, WeightSet};
use icann_core::tensor3::{Mat3, SymTensor3};
use proptest::prelude::*;

fn rotation(axis: [f64; 3], angle: f64) -> Mat3 {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|v| v / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    Mat3([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])
}

fn axis() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0..1.0f64).prop_filter("non-degenerate axis", |a| a[0] * a[0] + a[1] * a[1] + a[2] * a[2] > 1e-2)
}

fn form() -> impl Strategy<Value = NetForm> {
    prop_oneof![Just(NetForm::Reduced), Just(NetForm::Full)]
}

fn energy_weights() -> impl Strategy<Value = EnergyWeights> {
    form().prop_flat_map(|f| {
        let (n2, n1) = EnergyWeights::layout(f);
        (prop::collection::vec(0.0..2.0f64, n2), prop::collection::vec(0.0..1.5f64, n1), 0.0..2.0f64, 0.0..2.0f64)
            .prop_map(move |(w2, w1, e, s)| EnergyWeights { form: f, w2, w1, vol_exp: e, vol_scale: s })
    })
}

fn potential_weights() -> impl Strategy<Value = PotentialWeights> {
    form().prop_flat_map(|f| {
        let (n2, n1) = PotentialWeights::layout(f);
        (prop::collection::vec(0.0..1.0f64, n2), prop::collection::vec(0.0..1.0f64, n1))
            .prop_map(move |(w2, w1)| PotentialWeights { form: f, w2, w1 })
    })
}

fn spd_near_identity() -> impl Strategy<Value = SymTensor3> {
    (prop::array::uniform3(0.6..1.6f64), axis(), 0.0..3.0f64)
        .prop_map(|(d, ax, ang)| SymTensor3::congruence(&SymTensor3::diag(d[0], d[1], d[2]), &rotation(ax, ang)))
}

fn small_sym() -> impl Strategy<Value = SymTensor3> {
    prop::array::uniform6(-0.5..0.5f64).prop_map(SymTensor3::from_array)
}

/// Central differences of a scalar function of a symmetric tensor, in the
/// tensor-derivative convention (off-diagonal entries halved).
fn fd_grad(f: impl Fn(&SymTensor3) -> f64, a: &SymTensor3, h: f64) -> SymTensor3 {
    let base = a.to_array();
    let mut out = [0.0; 6];
    for k in 0..6 {
        let mut p = base;
        let mut m = base;
        p[k] += h;
        m[k] -= h;
        let d = (f(&SymTensor3::from_array(p)) - f(&SymTensor3::from_array(m))) / (2.0 * h);
        out[k] = if k < 3 { d } else { 0.5 * d };
    }
    SymTensor3::from_array(out)
}

proptest! {
    #[test]
    fn energy_vanishes_at_identity(w in energy_weights()) {
        prop_assert!(w.eval(&SymTensor3::IDENTITY).unwrap().abs() <= 1e-12);
        prop_assert!(w.grad(&SymTensor3::IDENTITY).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn potential_is_even_and_zero_at_origin(w in potential_weights(), a in small_sym()) {
        prop_assert_eq!(w.eval(&SymTensor3::ZERO).unwrap(), 0.0);
        prop_assert_eq!(w.eval(&a).unwrap(), w.eval(&-a).unwrap());
    }

    #[test]
    fn evaluators_are_isotropic(e in energy_weights(), g in potential_weights(), a in spd_near_identity(), b in small_sym(), ax in axis(), ang in 0.0..3.0f64) {
        let q = rotation(ax, ang);
        let ea = e.eval(&a).unwrap();
        let er = e.eval(&SymTensor3::congruence(&a, &q)).unwrap();
        prop_assert!((ea - er).abs() <= 1e-10 * (1.0 + ea.abs()));
        let ga = g.eval(&b).unwrap();
        let gr = g.eval(&SymTensor3::congruence(&b, &q)).unwrap();
        prop_assert!((ga - gr).abs() <= 1e-10 * (1.0 + ga.abs()));
    }

    #[test]
    fn energy_grows_along_isochoric_stretch(w in energy_weights(), l0 in 1.0..1.5f64, dl in 0.0..0.3f64) {
        let uni = |l: f64| SymTensor3::diag(l * l, 1.0 / l, 1.0 / l);
        let a = w.eval(&uni(l0)).unwrap();
        let b = w.eval(&uni(l0 + dl)).unwrap();
        prop_assert!(b >= a - 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn potential_is_midpoint_convex(w in potential_weights(), a in small_sym(), b in small_sym()) {
        let mid = (a + b) * 0.5;
        let lhs = w.eval(&mid).unwrap();
        let rhs = 0.5 * (w.eval(&a).unwrap() + w.eval(&b).unwrap());
        prop_assert!(lhs <= rhs + 1e-10);
    }

    #[test]
    fn energy_gradient_matches_differences(w in energy_weights(), a in spd_near_identity()) {
        let g = w.grad(&a).unwrap();
        let fd = fd_grad(|x| w.eval(x).unwrap(), &a, 1e-6);
        prop_assert!((g - fd).max_abs() <= 1e-6 * g.max_abs().max(1e-3), "{g:?} vs {fd:?}");
    }

    #[test]
    fn potential_flow_matches_differences(w in potential_weights(), a in small_sym()) {
        let inv = a.invariants();
        // stay clear of the |I1| and |J̃2| kinks
        prop_assume!(inv.i1.abs() > 1e-3 && inv.j2 > 1e-3);
        let g = w.flow(&a).unwrap();
        let fd = fd_grad(|x| w.eval(x).unwrap(), &a, 1e-7);
        prop_assert!((g - fd).max_abs() <= 1e-6 * g.max_abs().max(1e-3), "{g:?} vs {fd:?}");
    }
}

fn diag_isochoric() -> impl Strategy<Value = SymTensor3> {
    (0.7..1.4f64, 0.7..1.4f64).prop_map(|(a, b)| SymTensor3::diag(a, b, 1.0 / (a * b)))
}

// Deviatoric flows only: I1 channels make the plastic flow volumetric, and
// under incompressible driving nothing but the pressure resists that.
fn random_weight_set() -> impl Strategy<Value = WeightSet> {
    let energy = (prop::collection::vec(0.0..5.0f64, 4), prop::collection::vec(0.0..1.0f64, 2));
    let pot = (prop::collection::vec(0.0..0.3f64, 2), prop::collection::vec(0.0..1.0f64, 3))
        .prop_map(|(j2, w1)| ([vec![0.0; 4], j2].concat(), w1));
    (energy.clone(), energy.clone(), energy, pot.clone(), pot).prop_map(|(e, p, pe, g1, g2)| {
        let mut ws = WeightSet::zeros(NetForm::Reduced, NetForm::Reduced);
        let en = |(w2, w1): (Vec<f64>, Vec<f64>)| EnergyWeights { form: NetForm::Reduced, w2, w1, vol_exp: 0.0, vol_scale: 0.0 };
        let po = |(w2, w1): (Vec<f64>, Vec<f64>)| PotentialWeights { form: NetForm::Reduced, w2, w1 };
        ws.psi_e = en(e);
        ws.psi_e.w2[0] += 4.0;
        ws.psi_p = en(p);
        ws.psi_pe = en(pe);
        ws.g1 = po(g1);
        ws.g1.w2[4] += 0.2;
        ws.g2 = po(g2);
        ws
    })
}

proptest! {
    #[test]
    fn relative_stress_identity_and_pressure(ws in random_weight_set(), c in diag_isochoric(), up in diag_isochoric(), upi in diag_isochoric()) {
        let kin = corotated_kinematics(c, up, upi).unwrap();
        let st = compute_stresses(&ws, &kin, BoundaryCondition::FreeS33).unwrap();
        prop_assert_eq!(st.gamma, st.mandel - st.chi - st.xi);
        prop_assert!(st.s.zz.abs() <= 1e-12 * st.s.max_abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn virgin_state_collapses_to_hyperelasticity(ws in random_weight_set(), c in diag_isochoric()) {
        let kin = corotated_kinematics(c, SymTensor3::IDENTITY, SymTensor3::IDENTITY).unwrap();
        let st = compute_stresses(&ws, &kin, BoundaryCondition::FreeS33).unwrap();
        let direct = ws.psi_e.grad(&c).unwrap() * 2.0 + c.spd_inv().unwrap() * (2.0 * st.p * c.det());
        prop_assert!((st.s - direct).max_abs() <= 1e-12 * direct.max_abs().max(1.0));
    }

    #[test]
    fn stresses_rotate_with_the_state(ws in random_weight_set(), c in diag_isochoric(), up in diag_isochoric(), upi in diag_isochoric(), ax in axis(), ang in 0.0..3.0f64) {
        let q = rotation(ax, ang);
        let r = |x: &SymTensor3| SymTensor3::congruence(x, &q);
        let a = compute_stresses(&ws, &corotated_kinematics(c, up, upi).unwrap(), BoundaryCondition::Unconstrained).unwrap();
        let b = compute_stresses(&ws, &corotated_kinematics(r(&c), r(&up), r(&upi)).unwrap(), BoundaryCondition::Unconstrained).unwrap();
        prop_assert!((r(&a.s) - b.s).max_abs() <= 1e-9 * a.s.max_abs().max(1.0));
        prop_assert!((r(&a.gamma) - b.gamma).max_abs() <= 1e-9 * a.gamma.max_abs().max(1.0));
    }
}

fn uniaxial(l: f64) -> SymTensor3 {
    SymTensor3::diag(l * l, 1.0 / l, 1.0 / l)
}

/// Stretch history 1 → hi → lo → hi → lo with `n` steps per ramp.
fn cyclic(hi: f64, lo: f64, n: usize) -> (Vec<f64>, Vec<SymTensor3>) {
    let nodes = [1.0, hi, lo, hi, lo];
    let mut l = vec![1.0];
    for w in nodes.windows(2) {
        for k in 1..=n {
            l.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
        }
    }
    ((0..l.len()).map(|k| k as f64).collect(), l.iter().map(|&x| uniaxial(x)).collect())
}

fn run(ws: &WeightSet, times: &[f64], cs: &[SymTensor3]) -> Vec<StepResult> {
    simulate_states(ws, times, cs, BoundaryCondition::FreeS33).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn deviatoric_flow_keeps_plastic_volume(ws in random_weight_set(), hi in 1.1..1.3f64, lo in 0.8..0.9f64) {
        let (t, cs) = cyclic(hi, lo, 260);
        let out = run(&ws, &t, &cs);
        prop_assert!(out.len() > 1000);
        prop_assert!(out.iter().any(|r| r.dlambda > 0.0));
        for r in &out {
            let dp = r.state.u_p.square().det();
            let dpi = r.state.u_pi.square().det();
            prop_assert!((dp - 1.0).abs() <= 1e-8 && (dpi - 1.0).abs() <= 1e-8, "{dp} {dpi}");
        }
    }

    #[test]
    fn kkt_and_dissipation_on_every_step(ws in random_weight_set(), hi in 1.1..1.3f64, lo in 0.8..0.9f64) {
        let (t, cs) = cyclic(hi, lo, 60);
        for r in run(&ws, &t, &cs) {
            prop_assert!(r.kkt_ok(TOL_PHI), "dλ={} Φ={}", r.dlambda, r.phi_final);
            prop_assert!(r.dissipation.total >= -1e-10);
        }
    }

    #[test]
    fn time_scaling_leaves_stresses_unchanged(ws in random_weight_set(), scale in 0.01..100.0f64) {
        let (t, cs) = cyclic(1.2, 0.85, 40);
        let ts: Vec<f64> = t.iter().map(|x| x * scale).collect();
        let a = run(&ws, &t, &cs);
        let b = run(&ws, &ts, &cs);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.sigma, y.sigma);
            prop_assert_eq!(x.dlambda, y.dlambda);
        }
    }

    #[test]
    fn simulation_is_bitwise_deterministic(ws in random_weight_set()) {
        let (t, cs) = cyclic(1.2, 0.85, 30);
        prop_assert_eq!(run(&ws, &t, &cs), run(&ws, &t, &cs));
    }
}

#[test]
fn zero_deformation_path_stays_at_rest() {
    let ws = WeightSet::von_mises_af(12.5, 2.0, 8.5, 3.0);
    let t: Vec<f64> = (0..20).map(f64::from).collect();
    let cs = vec![SymTensor3::IDENTITY; 20];
    for r in run(&ws, &t, &cs) {
        assert_eq!(r.sigma, SymTensor3::ZERO);
        assert_eq!(r.dlambda, 0.0);
    }
}

#[test]
fn halving_the_step_halves_the_error() {
    let ws = WeightSet::von_mises_af(12.5, 2.0, 8.5, 3.0);
    let final_stress = |n: usize| {
        let t: Vec<f64> = (0..=n).map(|k| k as f64).collect();
        let cs: Vec<_> = (0..=n).map(|k| uniaxial(1.0 + 0.3 * k as f64 / n as f64)).collect();
        run(&ws, &t, &cs).last().unwrap().sigma.xx
    };
    let s: Vec<f64> = [100, 200, 400, 800].iter().map(|&n| final_stress(n)).collect();
    for w in s.windows(3) {
        let ratio = (w[0] - w[1]) / (w[1] - w[2]);
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}, stresses {s:?}");
    }
}
