//! Seeded property suite behind the `verify` command.
//!
//! Each check draws its random cases from a ChaCha8 stream derived from the
//! seed and the check name, so adding a check never perturbs the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constitutive::{compute_stresses, corotated_kinematics, BoundaryCondition};
use crate::error::Result;
use crate::integrator::{simulate_path, simulate_states, TOL_PHI};
use crate::netfuncs::{EnergyWeights, NetForm, PotentialWeights, WeightSet};
use crate::refmodels::{
    generate_vm_af, make_path, plane_directions, trace_yield_surface, PathKind, PathSpec, Plane, VmAfParams,
};
use crate::tensor3::{Mat3, SymTensor3};
use crate::training::{clip_gradient, gradient, TrainConfig, TrainingData};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value against the threshold, human readable.
    pub detail: String,
}

type CheckFn = fn(&mut ChaCha8Rng, usize) -> Result<(bool, String)>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("tensor.spectral_roundtrip", spectral_roundtrip),
    ("netfuncs.energy_gradient", energy_gradient),
    ("netfuncs.potential_flow", potential_flow),
    ("netfuncs.potential_even_convex", potential_even_convex),
    ("constitutive.traction_free", traction_free),
    ("constitutive.rotation_covariance", rotation_covariance),
    ("integrator.plastic_incompressibility", plastic_incompressibility),
    ("integrator.kkt_dissipation", kkt_dissipation),
    ("refmodels.generator_consistency", generator_consistency),
    ("refmodels.trace_symmetry", trace_symmetry),
    ("refmodels.von_mises_crossings", von_mises_crossings),
    ("training.clip_formula", clip_formula),
    ("training.regularization_gradient", regularization_gradient),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check with `cases` random draws each. Errors inside a check
/// count as failures; they never abort the suite.
pub fn run_all(seed: u64, cases: usize) -> Vec<Check> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv(name));
            match f(&mut rng, cases.max(1)) {
                Ok((passed, detail)) => Check { name, passed, detail },
                Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
            }
        })
        .collect()
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn verdict(worst: f64, tol: f64) -> (bool, String) {
    (worst <= tol, format!("worst {worst:.3e} (tol {tol:.0e})"))
}

// ---------------------------------------------------------------- samplers

fn rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    // unit quaternion from four normal-ish draws
    let mut q = [0.0f64; 4];
    loop {
        for v in q.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            q.iter_mut().for_each(|v| *v /= n);
            break;
        }
    }
    let [w, x, y, z] = q;
    Mat3([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

fn spd(rng: &mut ChaCha8Rng) -> SymTensor3 {
    let d = SymTensor3::diag(rng.gen_range(0.6..1.6), rng.gen_range(0.6..1.6), rng.gen_range(0.6..1.6));
    SymTensor3::congruence(&d, &rotation(rng))
}

fn small_sym(rng: &mut ChaCha8Rng) -> SymTensor3 {
    SymTensor3::from_array(std::array::from_fn(|_| rng.gen_range(-0.5..0.5)))
}

fn form(rng: &mut ChaCha8Rng) -> NetForm {
    if rng.gen_bool(0.5) {
        NetForm::Reduced
    } else {
        NetForm::Full
    }
}

fn energy_weights(rng: &mut ChaCha8Rng) -> EnergyWeights {
    let f = form(rng);
    let (n2, n1) = EnergyWeights::layout(f);
    EnergyWeights {
        form: f,
        w2: (0..n2).map(|_| rng.gen_range(0.0..2.0)).collect(),
        w1: (0..n1).map(|_| rng.gen_range(0.0..1.5)).collect(),
        vol_exp: rng.gen_range(0.0..2.0),
        vol_scale: rng.gen_range(0.0..2.0),
    }
}

fn potential_weights(rng: &mut ChaCha8Rng) -> PotentialWeights {
    let f = form(rng);
    let (n2, n1) = PotentialWeights::layout(f);
    PotentialWeights {
        form: f,
        w2: (0..n2).map(|_| rng.gen_range(0.0..1.0)).collect(),
        w1: (0..n1).map(|_| rng.gen_range(0.0..1.0)).collect(),
    }
}

/// Potential acting on the deviator only: first-invariant channels zeroed.
fn deviatoric_potential(rng: &mut ChaCha8Rng, j2_floor: f64) -> PotentialWeights {
    let mut w = potential_weights(rng);
    let per_channel = if w.form == NetForm::Full { 3 } else { 2 };
    // channel order: I1, I1², J̃2, J̃2² (full) or I1, I1², J̃2 (reduced)
    for v in w.w2.iter_mut().take(2 * per_channel) {
        *v = 0.0;
    }
    w.w2[2 * per_channel] += j2_floor;
    w
}

fn random_weight_set(rng: &mut ChaCha8Rng) -> WeightSet {
    let mut ws = WeightSet::zeros(NetForm::Reduced, NetForm::Reduced);
    ws.psi_e = EnergyWeights::neo_hookean(rng.gen_range(3.0..8.0));
    ws.psi_e.w2[1] += rng.gen_range(0.0..0.5);
    ws.psi_e.w1[0] = rng.gen_range(0.0..1.0);
    ws.psi_p = EnergyWeights::neo_hookean(rng.gen_range(0.0..2.0));
    ws.psi_pe = EnergyWeights::neo_hookean(rng.gen_range(0.0..5.0));
    ws.g1 = deviatoric_potential(rng, 0.2);
    ws.g1.w2.iter_mut().for_each(|v| *v *= 0.5);
    ws.g2 = deviatoric_potential(rng, 0.0);
    ws
}

fn fd_grad(f: impl Fn(&SymTensor3) -> f64, a: &SymTensor3, h: f64) -> SymTensor3 {
    let base = a.to_array();
    SymTensor3::from_array(std::array::from_fn(|k| {
        let mut p = base;
        let mut m = base;
        p[k] += h;
        m[k] -= h;
        let d = (f(&SymTensor3::from_array(p)) - f(&SymTensor3::from_array(m))) / (2.0 * h);
        if k < 3 {
            d
        } else {
            0.5 * d
        }
    }))
}

// ------------------------------------------------------------------ checks

fn spectral_roundtrip(rng: &mut ChaCha8Rng, cases: usize) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let a = spd(rng);
        let back = a.spectral().reconstruct();
        let root = a.spd_sqrt()?;
        worst = worst.max((back - a).max_abs()).max((root.square() - a).max_abs());
    }
    Ok(verdict(worst, 1e-12))
}

fn energy_gradient(rng: &mut ChaCha8Rng, cases: usize) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let w = energy_weights(rng);
        let a = spd(rng);
        let g = w.grad(&a)?;
        let fd = fd_grad(|x| w.eval(x).unwrap_or(f64::NAN), &a, 1e-6);
        worst = worst.max((g - fd).max_abs() / g.max_abs().max(1e-3));
    }
    Ok(verdict(worst, 1e-6))
}

fn potential_flow(rng: &mut ChaCha8Rng, cases: usize) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < cases {
        let w = potential_weights(rng);
        let a = small_sym(rng);
        let inv = a.invariants();
        if inv.i1.abs() <= 1e-3 || inv.j2 <= 1e-3 {
            continue;
        }
        let g = w.flow(&a)?;
        let fd = fd_grad(|x| w.eval(x).unwrap_or(f64::NAN), &a, 1e-6);
        worst = worst.max((g - fd).max_abs() / g.max_abs().max(1e-3));
        done += 1;
    }
    Ok(verdict(worst, 1e-6))
}

fn potential_even_convex(rng: &mut ChaCha8Rng, cases: usize) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let w = potential_weights(rng);
        let (a, b) = (small_sym(rng), small_sym(rng));
        let even = (w.eval(&a)? - w.eval(&-a)?).abs();
        let mid = w.eval(&((a + b) * 0.5))? - 0.5 * (w.eval(&a)? + w.eval(&b)?);
        worst = worst.max(even).max(mid).max(w.eval(&SymTensor3::ZERO)?.abs());
    }
    Ok(verdict(worst, 1e-10))
}

fn traction_free(rng: &mut ChaCha8Rng, cases: usize) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let ws = random_weight_set(rng);
        let l: f64 = rng.gen_range(0.8..1.3);
        let c = SymTensor3::diag(l * l, 1.0 / l, 1.0 / l);
        let up = SymTensor3::diag(rng.gen_range(0.9..1.1), 1.0, 1.0);
        let up = up * up.det().powf(-1.0 / 3.0);
        let kin = corotated_kinematics(c, up, SymTensor3::IDENTITY)?;
        let st = compute_stresses(&ws, &kin, BoundaryCondition::FreeS33)?;
        worst = worst.max(st.s.zz.abs() / st.s.max_abs().max(1.0));
    }
    Ok(verdict(worst, 1e-12))
}

fn rotation_covariance(rng: &mut ChaCha8Rng, cases: usize) -> Result<(bool, String)> {
    // rotating C and the plastic stretch together rotates every stress
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let ws = random_weight_set(rng);
        let (c, up, upi) = (spd(rng), spd(rng), spd(rng));
        let q = rotation(rng);
        let rot = |x: &SymTensor3| SymTensor3::congruence(x, &q);
        let base = compute_stresses(&ws, &corotated_kinematics(c, up, upi)?, BoundaryCondition::Unconstrained)?;
        let turned =
            compute_stresses(&ws, &corotated_kinematics(rot(&c), rot(&up), rot(&upi))?, BoundaryCondition::Unconstrained)?;
        let scale = base.s.max_abs().max(base.gamma.max_abs()).max(1.0);
        worst = worst
            .max((rot(&base.s) - turned.s).max_abs() / scale)
            .max((rot(&base.gamma) - turned.gamma).max_abs() / scale);
    }
    Ok(verdict(worst, 1e-10))
}

fn cyclic_path(steps_per_ramp: usize) -> Result<crate::refmodels::LoadPath> {
    make_path(&PathSpec {
        kind: PathKind::Cyclic,
        stretch: 1.25,
        compression_stretch: 0.85,
        steps_per_ramp,
        n_cycles: 2,
        dt: 1.0,
    })
}

fn plastic_incompressibility(rng: &mut ChaCha8Rng, cases: usize) -> Result<(bool, String)> {
    let path = cyclic_path(100)?;
    let mut worst = 0.0f64;
    let mut models = vec![WeightSet::von_mises_af(12.5, 2.0, 8.5, 3.0)];
    models.extend((0..cases.min(4)).map(|_| random_weight_set(rng)));
    for ws in &models {
        for r in simulate_path(ws, &path)? {
            let dp = r.state.u_p.det().powi(2);
            let dpi = r.state.u_pi.det().powi(2);
            worst = worst.max((dp - 1.0).abs()).max((dpi - 1.0).abs());
        }
    }
    Ok(verdict(worst, 1e-8))
}

fn kkt_dissipation(rng: &mut ChaCha8Rng, cases: usize) -> Result<(bool, String)> {
    let path = cyclic_path(100)?;
    let mut models = vec![WeightSet::von_mises_af(12.5, 2.0, 8.5, 3.0)];
    models.extend((0..cases.min(4)).map(|_| random_weight_set(rng)));
    let (mut bad, mut min_d, mut n) = (0usize, f64::INFINITY, 0usize);
    for ws in &models {
        let res = simulate_states(ws, path.times(), path.c_history(), BoundaryCondition::FreeS33)?;
        for r in &res {
            n += 1;
            if !r.kkt_ok(TOL_PHI) {
                bad += 1;
            }
            min_d = min_d.min(r.dissipation.total);
        }
    }
    let ok = bad == 0 && min_d >= -1e-10;
    Ok((ok, format!("{bad} of {n} steps violate KKT, min dissipation {min_d:.3e}")))
}

fn generator_consistency(_: &mut ChaCha8Rng, _: usize) -> Result<(bool, String)> {
    let params = VmAfParams::default();
    let ws = WeightSet::von_mises_af(params.mu, params.sigma_y, params.c, params.b);
    let mut worst = 0.0f64;
    for kind in [PathKind::Ut, PathKind::Cyclic] {
        let path = make_path(&PathSpec::default_for(kind).with_steps(100))?;
        let ds = generate_vm_af(&params, &path)?;
        let net = simulate_path(&ws, &path)?;
        let s = ds.max_abs_sigma();
        let mse = net.iter().zip(&ds.sigma11).map(|(r, t)| ((r.sigma.xx - t) / s).powi(2)).sum::<f64>() / ds.len() as f64;
        worst = worst.max(mse.sqrt());
    }
    Ok(verdict(worst, 1e-2))
}

fn trace_symmetry(rng: &mut ChaCha8Rng, cases: usize) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..cases.min(8) {
        let mut w = potential_weights(rng);
        w.w2[0] += 0.1;
        let n = 2 * rng.gen_range(4..24);
        let pts = trace_yield_surface(&w, Plane::S11S22, n)?;
        let half = pts.len() / 2;
        for (p, q) in pts[..half].iter().zip(&pts[half..]) {
            let d = (0..3).map(|k| (p[k] + q[k]).abs()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
    }
    Ok(verdict(worst, 1e-10))
}

fn von_mises_crossings(_: &mut ChaCha8Rng, _: usize) -> Result<(bool, String)> {
    // J̃2 = σ² on a uniaxial ray, so a unit J̃2 weight of 1/4 crosses at ±2
    let w = PotentialWeights::von_mises(0.25);
    let dirs = plane_directions(Plane::S11S22, 8)?;
    let pts = trace_yield_surface(&w, Plane::S11S22, 8)?;
    let mut worst = 0.0f64;
    for (d, p) in dirs.iter().zip(&pts) {
        if d[1] == 0.0 {
            worst = worst.max((p[0].abs() - 2.0).abs());
        }
    }
    Ok(verdict(worst, 1e-9))
}

fn clip_formula(rng: &mut ChaCha8Rng, _: usize) -> Result<(bool, String)> {
    let c = 0.01;
    let dir: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for target in [0.0, c / 2.0, c, 2.0 * c] {
        let g: Vec<f64> = dir.iter().map(|v| v / n * target).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let factor = if norm > 0.0 { (c / norm).min(1.0) } else { 1.0 };
        let clipped = clip_gradient(&g, c);
        for (a, b) in clipped.iter().zip(&g) {
            worst = worst.max((a - b * factor).abs());
        }
    }
    Ok((worst == 0.0, format!("max deviation {worst:e}")))
}

fn regularization_gradient(rng: &mut ChaCha8Rng, _: usize) -> Result<(bool, String)> {
    // with targets equal to the model's own predictions only the penalty remains
    let ws = WeightSet::von_mises_af(12.5, 2.0, 8.5, 3.0);
    let path = make_path(&PathSpec::default_for(PathKind::Ut).with_steps(10))?;
    let ds = crate::refmodels::generate(&ws, &path, Default::default())?;
    let data = TrainingData::with_scale(vec![ds], 1.0)?;
    let cfg = TrainConfig { l2_energy: rng.gen_range(1e-4..1e-2), l2_potential: 0.0, ..TrainConfig::default() };
    let g = gradient(&ws, &data, &cfg)?;
    let mut worst = 0.0f64;
    let layout = ws.layout();
    let values = ws.values();
    for ((info, v), gk) in layout.iter().zip(&values).zip(&g) {
        if info.group.is_energy() && info.layer.is_output() && *v >= cfg.fd_step {
            worst = worst.max((gk - 2.0 * cfg.l2_energy * v).abs() / (2.0 * cfg.l2_energy * v).abs().max(1e-6));
        }
    }
    Ok(verdict(worst, 1e-4))
}
