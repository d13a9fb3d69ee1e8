//! Model discovery: loss, finite-difference gradients, clipped ADAM with a
//! non-negativity projection, staged pretraining and early stopping.
//!
//! Training runs in normalized units: every observed stress is divided by the
//! largest |σ11| over the training datasets and the weights are expressed for
//! that stress scale (see [`WeightSet::scaled_stress`]). Reports carry both
//! the normalized and the physical weights. The L1/L2 penalty is charged on
//! the physical weights, so the regularization strength does not depend on
//! the stress scale of the data.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constitutive::{compute_stresses, corotated_kinematics, BoundaryCondition};
use crate::error::{Error, Result};
use crate::integrator::{simulate_states, MaterialState};
use crate::netfuncs::{Group, NetForm, WeightInfo, WeightSet};
use crate::refmodels::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Central differences of the full simulate-and-loss pipeline.
    #[default]
    Fd,
    /// Analytic gradients; not built.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Consecutive epochs of (relatively) unchanged loss before stopping.
    pub patience: usize,
    pub stop_tol: f64,
    pub l2_energy: f64,
    pub l2_potential: f64,
    pub l1_energy: f64,
    pub l1_potential: f64,
    /// Also regularize first-layer weights (ablation switch).
    pub regularize_first_layer: bool,
    pub clipnorm: f64,
    pub seed: u64,
    pub gradient: GradientMode,
    pub fd_step: f64,
    /// Fraction of the largest trial `J̃2` at which plasticity is forced to
    /// start when the yield network is initialised.
    pub f_enforce: f64,
    pub pretrain: bool,
    pub pretrain_epochs: usize,
    /// Range of the random first-layer initialisation.
    pub init_range: [f64; 2],
    pub energy_form: NetForm,
    pub potential_form: NetForm,
    /// Groups kept at their starting values throughout.
    pub frozen: Vec<Group>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_epochs: 5000,
            patience: 50,
            stop_tol: 1e-9,
            l2_energy: 1e-3,
            l2_potential: 1e-4,
            l1_energy: 0.0,
            l1_potential: 0.0,
            regularize_first_layer: false,
            clipnorm: 0.01,
            seed: 0,
            gradient: GradientMode::Fd,
            fd_step: 1e-6,
            f_enforce: 0.5,
            pretrain: true,
            pretrain_epochs: 300,
            init_range: [0.5, 1.5],
            energy_form: NetForm::Reduced,
            potential_form: NetForm::Reduced,
            frozen: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("l2_energy", self.l2_energy),
            ("l2_potential", self.l2_potential),
            ("l1_energy", self.l1_energy),
            ("l1_potential", self.l1_potential),
        ];
        for (n, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{n} must be non-negative, got {v}")));
            }
        }
        let pos = [
            ("learning_rate", self.learning_rate),
            ("clipnorm", self.clipnorm),
            ("fd_step", self.fd_step),
            ("stop_tol", self.stop_tol),
        ];
        for (n, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{n} must be positive, got {v}")));
            }
        }
        if !(self.f_enforce > 0.0 && self.f_enforce <= 1.0) {
            return Err(Error::Config(format!("f_enforce must lie in (0, 1], got {}", self.f_enforce)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        let [lo, hi] = self.init_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!("init_range must satisfy 0 <= lo <= hi, got [{lo}, {hi}]")));
        }
        if self.gradient == GradientMode::Exact {
            return Err(Error::Config("exact gradients are not available; use gradient = \"fd\"".into()));
        }
        Ok(())
    }
}

/// Training datasets with their common stress normalization.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub datasets: Vec<Dataset>,
    /// Largest |σ11| over all datasets (1 if every stress vanishes).
    pub scale: f64,
    targets: Vec<Vec<f64>>,
}

impl TrainingData {
    pub fn new(datasets: Vec<Dataset>) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::Config("no training datasets given".into()));
        }
        let m = datasets.iter().map(Dataset::max_abs_sigma).fold(0.0, f64::max);
        let scale = if m > 0.0 { m } else { 1.0 };
        Self::with_scale(datasets, scale)
    }

    /// Uses a given normalization factor instead of the data maximum.
    pub fn with_scale(datasets: Vec<Dataset>, scale: f64) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::Config("no training datasets given".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Validation(format!("normalization must be positive, got {scale}")));
        }
        let targets = datasets.iter().map(|d| d.sigma11.iter().map(|s| s / scale).collect()).collect();
        Ok(Self { datasets, scale, targets })
    }

    /// Normalized σ11 predictions of a normalized weight set.
    pub fn predictions(&self, ws: &WeightSet) -> Result<Vec<Vec<f64>>> {
        self.datasets
            .iter()
            .enumerate()
            .map(|(i, d)| {
                simulate_states(ws, &d.times, &d.cs, BoundaryCondition::FreeS33)
                    .map(|r| r.iter().map(|x| x.sigma.xx).collect())
                    .map_err(|e| Error::Simulation { dataset: i, source: Box::new(e) })
            })
            .collect()
    }

    /// Mean over experiments of the mean squared normalized stress error.
    pub fn data_loss(&self, ws: &WeightSet) -> Result<f64> {
        let preds = self.predictions(ws)?;
        Ok(mse(&preds, &self.targets))
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }
}

fn mse(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let per: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / t.len() as f64)
        .sum();
    per / targets.len() as f64
}

fn reg_factors(info: &WeightInfo, cfg: &TrainConfig) -> (f64, f64) {
    if !(info.layer.is_output() || cfg.regularize_first_layer) {
        return (0.0, 0.0);
    }
    if info.group.is_energy() {
        (cfg.l1_energy, cfg.l2_energy)
    } else {
        (cfg.l1_potential, cfg.l2_potential)
    }
}

/// `Σ L2·w² + L1·|w|` over the regularized weights.
pub fn regularization(ws: &WeightSet, cfg: &TrainConfig) -> f64 {
    ws.layout()
        .iter()
        .zip(ws.values())
        .map(|(info, w)| {
            let (l1, l2) = reg_factors(info, cfg);
            l2 * w * w + l1 * w.abs()
        })
        .sum()
}

/// Training loss of normalized weights. The penalty acts on the same weights
/// expressed in physical stress units.
pub fn loss(ws: &WeightSet, data: &TrainingData, cfg: &TrainConfig) -> Result<f64> {
    Ok(data.data_loss(ws)? + regularization(&ws.scaled_stress(1.0 / data.scale), cfg))
}

/// Loss and its finite-difference gradient with respect to the weights
/// selected by `mask` (other components are 0). Weights closer to 0 than the
/// step use a forward difference, so no perturbation leaves the orthant.
pub fn loss_and_gradient(ws: &WeightSet, data: &TrainingData, cfg: &TrainConfig, mask: &[bool]) -> Result<(f64, Vec<f64>)> {
    if cfg.gradient == GradientMode::Exact {
        return Err(Error::Config("exact gradients are not available".into()));
    }
    let base = loss(ws, data, cfg)?;
    let values = ws.values();
    let layout = ws.layout();
    let h = cfg.fd_step;
    let mut probe = ws.clone();
    let mut eval_at = |i: usize, w: f64| -> Option<f64> {
        let mut v = values.clone();
        v[i] = w;
        probe.set_values(&v);
        loss(&probe, data, cfg).ok().filter(|l| l.is_finite())
    };
    let mut g = vec![0.0; values.len()];
    for (i, &w) in values.iter().enumerate() {
        if !mask.get(i).copied().unwrap_or(false) {
            continue;
        }
        let up = eval_at(i, w + h);
        let gi = if w >= h {
            match (up, eval_at(i, w - h)) {
                (Some(a), Some(b)) => (a - b) / (2.0 * h),
                (Some(a), None) => (a - base) / h,
                (None, Some(b)) => (base - b) / h,
                (None, None) => f64::NAN,
            }
        } else {
            up.map_or(f64::NAN, |a| (a - base) / h)
        };
        if !gi.is_finite() {
            return Err(Error::NonFiniteGradient(layout[i].name.clone()));
        }
        g[i] = gi;
    }
    Ok((base, g))
}

pub fn gradient(ws: &WeightSet, data: &TrainingData, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let mask = vec![true; ws.len()];
    loss_and_gradient(ws, data, cfg, &mask).map(|(_, g)| g)
}

/// `G·min(1, c/‖G‖)` with the global Euclidean norm.
pub fn clip_gradient(g: &[f64], c: f64) -> Vec<f64> {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= c {
        return g.to_vec();
    }
    let f = c / norm;
    g.iter().map(|x| x * f).collect()
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected ADAM update followed by projection onto `w ≥ 0`.
pub fn adam_step(state: &mut AdamState, ws: &WeightSet, g: &[f64], lr: f64) -> WeightSet {
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let mut w = ws.values();
    for i in 0..w.len() {
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g[i];
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        w[i] = (w[i] - lr * mhat / (vhat.sqrt() + ADAM_EPS)).max(0.0);
    }
    ws.with_values(&w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub groups: Vec<String>,
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Largest trial `J̃2` found before the yield network was initialised.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub j2_trial_max: Option<f64>,
}

struct RunOutcome {
    best: WeightSet,
    best_loss: f64,
    best_epoch: usize,
    history: Vec<f64>,
    stopped_early: bool,
}

fn group_mask(ws: &WeightSet, groups: &[Group], frozen: &[Group]) -> Vec<bool> {
    ws.layout().iter().map(|i| groups.contains(&i.group) && !frozen.contains(&i.group)).collect()
}

/// Full-batch optimization of the masked weights. Returns the best weights
/// seen. A step that leaves the domain of the simulator is retracted and the
/// learning rate halved.
fn optimize(
    data: &TrainingData,
    init: WeightSet,
    mask: &[bool],
    epochs: usize,
    cfg: &TrainConfig,
) -> Result<RunOutcome> {
    let mut ws = init;
    let mut adam = AdamState::new(ws.len());
    let mut lr = cfg.learning_rate;
    let mut last_good: Option<WeightSet> = None;
    let mut out = RunOutcome {
        best: ws.clone(),
        best_loss: f64::INFINITY,
        best_epoch: 0,
        history: Vec::with_capacity(epochs),
        stopped_early: false,
    };
    let mut stable = 0;
    while out.history.len() < epochs {
        let (l, g) = match loss_and_gradient(&ws, data, cfg, mask) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => match last_good.take() {
                Some(prev) if lr > 1e-8 * cfg.learning_rate => {
                    ws = prev;
                    lr *= 0.5;
                    adam = AdamState::new(ws.len());
                    continue;
                }
                _ => return Err(e),
            },
            Err(e) => return Err(e),
        };
        let epoch = out.history.len();
        if let Some(&prev) = out.history.last() {
            let prev: f64 = prev;
            if (l - prev).abs() <= cfg.stop_tol * prev.abs().max(f64::MIN_POSITIVE) {
                stable += 1;
            } else {
                stable = 0;
            }
        }
        out.history.push(l);
        if l < out.best_loss {
            out.best_loss = l;
            out.best = ws.clone();
            out.best_epoch = epoch;
        }
        if stable >= cfg.patience {
            out.stopped_early = true;
            break;
        }
        let g = clip_gradient(&g, cfg.clipnorm);
        let next = adam_step(&mut adam, &ws, &g, lr);
        last_good = Some(std::mem::replace(&mut ws, next));
    }
    Ok(out)
}

fn init_first_layer(ws: &mut WeightSet, group: Group, rng: &mut ChaCha8Rng, range: [f64; 2]) {
    let mut draw = || if range[1] > range[0] { rng.gen_range(range[0]..range[1]) } else { range[0] };
    match group {
        Group::PsiE => ws.psi_e.w1.iter_mut().for_each(|w| *w = draw()),
        Group::PsiP => ws.psi_p.w1.iter_mut().for_each(|w| *w = draw()),
        Group::PsiPe => ws.psi_pe.w1.iter_mut().for_each(|w| *w = draw()),
        Group::G1 => ws.g1.w1.iter_mut().for_each(|w| *w = draw()),
        Group::G2 => ws.g2.w1.iter_mut().for_each(|w| *w = draw()),
    }
}

/// Index of the linear `|J̃2|` weight inside a potential's second layer.
fn j2_abs_index(form: NetForm) -> usize {
    match form {
        NetForm::Reduced => 4,
        NetForm::Full => 6,
    }
}

/// Largest `3·J2` of the relative stress along the datasets under `ws`,
/// evaluated at the virgin internal state.
fn max_trial_j2(ws: &WeightSet, data: &TrainingData) -> Result<f64> {
    let mut m: f64 = 0.0;
    for d in &data.datasets {
        for c in &d.cs {
            let kin = corotated_kinematics(*c, MaterialState::VIRGIN.u_p, MaterialState::VIRGIN.u_pi)?;
            let st = compute_stresses(ws, &kin, BoundaryCondition::FreeS33)?;
            m = m.max(3.0 * st.gamma.invariants().j2);
        }
    }
    Ok(m)
}

pub const PRETRAIN_STAGES: [&[Group]; 4] = [&[Group::PsiE], &[Group::G1], &[Group::PsiP], &[Group::PsiPe, Group::G2]];

/// Staged pretraining from all-zero weights. Each stage unfreezes one weight
/// group (the last one unfreezes the nonlinear hardening energy together with
/// its potential), draws that group's first layer from `init_range` and trains
/// only that group. Returns normalized weights.
pub fn pretrain(data: &TrainingData, cfg: &TrainConfig) -> Result<(WeightSet, Vec<StageRecord>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ws = WeightSet::zeros(cfg.energy_form, cfg.potential_form);
    let mut records = Vec::new();
    for groups in PRETRAIN_STAGES {
        let mut j2_trial_max = None;
        for &g in groups {
            init_first_layer(&mut ws, g, &mut rng, cfg.init_range);
        }
        if groups.contains(&Group::G1) {
            let j2 = max_trial_j2(&ws, data)?;
            if !(j2 > 0.0 && j2.is_finite()) {
                return Err(Error::Validation("the elastic model predicts no deviatoric stress on the data".into()));
            }
            ws.g1.w2[j2_abs_index(ws.g1.form)] = 1.0 / (cfg.f_enforce * j2);
            j2_trial_max = Some(j2);
        }
        let mask = group_mask(&ws, groups, &cfg.frozen);
        let run = optimize(data, ws, &mask, cfg.pretrain_epochs, cfg)?;
        records.push(StageRecord {
            groups: groups.iter().map(|g| g.name().to_string()).collect(),
            epochs: run.history.len(),
            initial_loss: run.history.first().copied().unwrap_or(f64::NAN),
            final_loss: run.best_loss,
            j2_trial_max,
        });
        ws = run.best;
    }
    Ok((ws, records))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Weights in physical stress units.
    pub weights: Value,
    /// Weights for stresses divided by `normalization`.
    pub weights_normalized: Value,
    pub normalization: f64,
    /// Total loss per epoch of the main run (pretraining excluded).
    pub loss_history: Vec<f64>,
    pub best_loss: f64,
    pub best_epoch: usize,
    /// Data term of the loss at the returned weights.
    pub data_loss: f64,
    pub stopped_early: bool,
    pub stages: Vec<StageRecord>,
    pub config: TrainConfig,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn weight_set(&self) -> Result<WeightSet> {
        WeightSet::from_json_value(&self.weights)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Pretraining (unless disabled) followed by full-batch training of all
/// weights until early stop or `max_epochs`.
pub fn train(datasets: &[Dataset], cfg: &TrainConfig) -> Result<TrainReport> {
    train_with(TrainingData::new(datasets.to_vec())?, None, cfg)
}

/// Like [`train`]; `start` (physical units) replaces pretraining when given.
pub fn train_with(data: TrainingData, start: Option<WeightSet>, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let clock = Instant::now();
    let (init, stages) = match start {
        Some(ws) => {
            ws.validate()?;
            (ws.scaled_stress(data.scale), Vec::new())
        }
        None if cfg.pretrain => pretrain(&data, cfg)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut ws = WeightSet::zeros(cfg.energy_form, cfg.potential_form);
            for g in Group::ALL {
                init_first_layer(&mut ws, g, &mut rng, cfg.init_range);
            }
            (ws, Vec::new())
        }
    };
    let mask = group_mask(&init, &Group::ALL, &cfg.frozen);
    let run = optimize(&data, init, &mask, cfg.max_epochs, cfg)?;
    let data_loss = data.data_loss(&run.best)?;
    let physical = run.best.scaled_stress(1.0 / data.scale);
    Ok(TrainReport {
        weights: physical.to_json_value(),
        weights_normalized: run.best.to_json_value(),
        normalization: data.scale,
        loss_history: run.history,
        best_loss: run.best_loss,
        best_epoch: run.best_epoch,
        data_loss,
        stopped_early: run.stopped_early,
        stages,
        config: cfg.clone(),
        wall_time_s: clock.elapsed().as_secs_f64(),
    })
}

/// Root-mean-square σ11 error of physical weights on a dataset, divided by
/// `scale`.
pub fn normalized_rms(ws: &WeightSet, ds: &Dataset, scale: f64) -> Result<f64> {
    let out = simulate_states(ws, &ds.times, &ds.cs, BoundaryCondition::FreeS33)?;
    let sq: f64 = out.iter().zip(&ds.sigma11).map(|(r, s)| (r.sigma.xx - s).powi(2)).sum();
    Ok((sq / ds.len() as f64).sqrt() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refmodels::{generate_vm_af, make_path, PathKind, PathSpec, VmAfParams};

    fn ut_data(steps: usize) -> TrainingData {
        let path = make_path(&PathSpec::default_for(PathKind::Ut).with_steps(steps)).unwrap();
        TrainingData::new(vec![generate_vm_af(&VmAfParams::default(), &path).unwrap()]).unwrap()
    }

    #[test]
    fn clip_examples() {
        let c = 0.01;
        let g = [0.012, 0.016];
        let out = clip_gradient(&g, c);
        assert!((out[0] - 0.006).abs() < 1e-16 && (out[1] - 0.008).abs() < 1e-16);
        let g = [0.003, 0.004];
        assert_eq!(clip_gradient(&g, c), g.to_vec());
        assert_eq!(clip_gradient(&[0.0, 0.0], c), vec![0.0, 0.0]);
    }

    #[test]
    fn adam_examples() {
        let mut ws = WeightSet::zeros(NetForm::Reduced, NetForm::Reduced);
        ws.psi_e.w2[0] = 1.0;
        ws.psi_e.w2[1] = 0.001;
        let mut g = vec![0.0; ws.len()];
        g[0] = 2.0;
        g[1] = 1.0;
        let mut st = AdamState::new(ws.len());
        let next = adam_step(&mut st, &ws, &g, 0.1);
        assert!((next.psi_e.w2[0] - 0.9).abs() < 1e-8);
        assert_eq!(next.psi_e.w2[1], 0.0);
        assert_eq!(st.t, 1);
        let mut st = AdamState::new(ws.len());
        assert_eq!(adam_step(&mut st, &ws, &vec![0.0; ws.len()], 0.1), ws);
    }

    #[test]
    fn loss_examples() {
        let data = ut_data(20);
        let cfg = TrainConfig { l2_energy: 0.0, l2_potential: 0.0, ..Default::default() };
        let perfect = WeightSet::von_mises_af(12.5, 2.0, 8.5, 3.0).scaled_stress(data.scale);
        assert!(loss(&perfect, &data, &cfg).unwrap() < 1e-20);

        let zero = WeightSet::zeros(NetForm::Reduced, NetForm::Reduced);
        let l = loss(&zero, &data, &cfg).unwrap();
        assert!(l > 0.0 && l <= 1.0);

        let mut one = zero.clone();
        one.psi_e.w2[0] = 2.0;
        let cfg = TrainConfig { l2_energy: 0.001, ..Default::default() };
        assert!((regularization(&one, &cfg) - 0.004).abs() < 1e-18);
        // first-layer weights are left alone unless asked for
        one.psi_e.w1[0] = 3.0;
        assert!((regularization(&one, &cfg) - 0.004).abs() < 1e-18);
        let cfg = TrainConfig { regularize_first_layer: true, ..cfg };
        assert!((regularization(&one, &cfg) - 0.013).abs() < 1e-15);
    }

    #[test]
    fn pure_regularization_gradient() {
        let data = ut_data(10);
        let mut ws = WeightSet::von_mises_af(12.5, 2.0, 0.0, 0.0).scaled_stress(data.scale);
        ws.psi_p.w2[0] = 0.7;
        let with = TrainConfig { l2_energy: 0.01, ..Default::default() };
        let without = TrainConfig { l2_energy: 0.0, ..Default::default() };
        let a = gradient(&ws, &data, &with).unwrap();
        let b = gradient(&ws, &data, &without).unwrap();
        let k = ws.layout().iter().position(|i| i.name == "psi_p.w2.1").unwrap();
        // penalty is charged on the physical weight s·w
        let s = data.scale;
        assert!(((a[k] - b[k]) - 2.0 * 0.01 * s * s * 0.7).abs() < 1e-7 * s * s, "{} vs {}", a[k] - b[k], 2.0 * 0.01 * s * s * 0.7);
    }

    #[test]
    fn dead_potential_has_no_gradient_on_elastic_data() {
        let path = make_path(&PathSpec { stretch: 1.02, ..PathSpec::default_for(PathKind::Ut) }.with_steps(10)).unwrap();
        let ds = generate_vm_af(&VmAfParams::default(), &path).unwrap();
        let data = TrainingData::new(vec![ds]).unwrap();
        let ws = WeightSet::von_mises_af(12.5, 2.0, 8.5, 3.0).scaled_stress(data.scale);
        let g = gradient(&ws, &data, &TrainConfig { l2_potential: 0.0, ..Default::default() }).unwrap();
        for (info, gi) in ws.layout().iter().zip(&g) {
            if !info.group.is_energy() {
                assert_eq!(*gi, 0.0, "{}", info.name);
            }
        }
    }

    #[test]
    fn exact_mode_is_rejected() {
        let cfg = TrainConfig { gradient: GradientMode::Exact, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(matches!(TrainingData::new(vec![]), Err(Error::Config(_))));
    }
}
