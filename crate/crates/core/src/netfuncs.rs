//! Invariant-based networks for the free energies and plastic potentials.
//!
//! Every network is organised in *channels*: one first-layer input (an
//! invariant expression) feeding a small set of second-layer activations.
//!
//! Energy channels take `K1 = Ĩ1 − 3`, `K2 = Ĩ2^{3/2} − 3√3` and, in the full
//! form, their squares. Each channel contributes `a·x + b·(exp(c·x) − 1)`. A
//! separate Ogden-type volumetric term `w3_2·(I3^{w3_1} − 1 − w3_1·ln I3)` is
//! added.
//!
//! Potential channels take `I1`, `I1²`, `J̃2 = 3·J2` and, in the full form,
//! `J̃2²`. Reduced channels contribute `a·|x| + b·ln cosh(c·x)`; full channels
//! add `d·(cosh(e·x) − 1)`.
//!
//! Weight names (flat JSON keys) are `<group>.w2.<k>`, `<group>.w1.<k>`,
//! `<group>.w3.1` (volumetric exponent) and `<group>.w3.2` (volumetric
//! scale), 1-based. Channel `k` (0-based) of a reduced energy owns `w2.{2k+1,
//! 2k+2}` and `w1.{k+1}`; the same layout holds for the full energy with four
//! channels (`K1`, `K1²`, `K2`, `K2²`). A reduced potential channel owns
//! `w2.{2k+1, 2k+2}` and `w1.{k+1}`. A full potential channel owns `w2.{3k+1,
//! 3k+2, 3k+3}` (abs, ln cosh, cosh − 1) and `w1.{2k+1, 2k+2}` (ln cosh,
//! cosh − 1), with channels ordered `I1`, `I1²`, `J̃2`, `J̃2²`.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::tensor3::SymTensor3;

/// Activation arguments above this magnitude are clamped (zero derivative).
pub const ACTIVATION_CLAMP: f64 = 50.0;
/// Activation arguments above this magnitude are rejected.
pub const ACTIVATION_LIMIT: f64 = 500.0;

const SQRT_27: f64 = 5.196152422706632;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NetForm {
    #[default]
    Reduced,
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyWeights {
    pub form: NetForm,
    pub w2: Vec<f64>,
    pub w1: Vec<f64>,
    /// Volumetric exponent `w3_1`.
    pub vol_exp: f64,
    /// Volumetric scale `w3_2`.
    pub vol_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialWeights {
    pub form: NetForm,
    pub w2: Vec<f64>,
    pub w1: Vec<f64>,
}

/// The five networks of the material model. The yield function shares its
/// network with the plastic-flow potential `g1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    pub psi_e: EnergyWeights,
    pub psi_p: EnergyWeights,
    pub psi_pe: EnergyWeights,
    pub g1: PotentialWeights,
    pub g2: PotentialWeights,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    PsiE,
    PsiP,
    PsiPe,
    G1,
    G2,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::PsiE, Group::PsiP, Group::PsiPe, Group::G1, Group::G2];

    pub fn name(self) -> &'static str {
        match self {
            Group::PsiE => "psi_e",
            Group::PsiP => "psi_p",
            Group::PsiPe => "psi_pe",
            Group::G1 => "g1",
            Group::G2 => "g2",
        }
    }

    pub fn is_energy(self) -> bool {
        matches!(self, Group::PsiE | Group::PsiP | Group::PsiPe)
    }
}

/// Position of a weight inside its network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Second,
    First,
    VolExponent,
    VolScale,
}

impl Layer {
    /// Second-layer (output-scaling) weights; the volumetric scale counts as one.
    pub fn is_output(self) -> bool {
        matches!(self, Layer::Second | Layer::VolScale)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightInfo {
    pub name: String,
    pub group: Group,
    pub layer: Layer,
}

fn check_arg(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > ACTIVATION_LIMIT {
        return Err(Error::ActivationOverflow(x));
    }
    Ok(x.clamp(-ACTIVATION_CLAMP, ACTIVATION_CLAMP))
}

/// `exp(x) − 1` and its derivative, clamped.
fn expm1_act(x: f64) -> Result<(f64, f64)> {
    let xc = check_arg(x)?;
    let d = if x.abs() > ACTIVATION_CLAMP { 0.0 } else { xc.exp() };
    Ok((xc.exp_m1(), d))
}

/// `cosh(x) − 1` and its derivative, clamped.
fn coshm1_act(x: f64) -> Result<(f64, f64)> {
    let xc = check_arg(x)?;
    let h = 0.5 * xc;
    let s = h.sinh();
    let d = if x.abs() > ACTIVATION_CLAMP { 0.0 } else { xc.sinh() };
    Ok((2.0 * s * s, d))
}

/// Overflow-free `ln cosh(x)` and its derivative `tanh(x)`.
pub fn ln_cosh(x: f64) -> (f64, f64) {
    let a = x.abs();
    (a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2, x.tanh())
}

fn abs_act(x: f64) -> (f64, f64) {
    // subgradient 0 at the kink
    let d = if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    };
    (x.abs(), d)
}

/// Up to four channel inputs, without heap allocation.
struct ChannelBuf {
    items: [(f64, f64, f64); 4],
    len: usize,
}

impl ChannelBuf {
    fn new(src: &[(f64, f64, f64)]) -> Self {
        let mut items = [(0.0, 0.0, 0.0); 4];
        items[..src.len()].copy_from_slice(src);
        Self { items, len: src.len() }
    }
}

impl IntoIterator for ChannelBuf {
    type Item = (f64, f64, f64);
    type IntoIter = std::iter::Take<std::array::IntoIter<(f64, f64, f64), 4>>;
    fn into_iter(self) -> Self::IntoIter {
        self.items.into_iter().take(self.len)
    }
}

/// Invariant inputs of an energy network and their gradients w.r.t. the tensor.
struct EnergyInputs {
    k1: f64,
    k2: f64,
    i3: f64,
    dk1: SymTensor3,
    dk2: SymTensor3,
    a_inv: SymTensor3,
}

fn energy_inputs(a: &SymTensor3, want_grad: bool) -> Result<EnergyInputs> {
    let inv = a.invariants();
    if !(inv.i3 > 0.0) {
        return Err(Error::NonPositiveDeterminant(inv.i3));
    }
    let s1 = inv.i3.cbrt().recip();
    let s2 = s1 * s1;
    let it1 = inv.i1 * s1;
    let it2 = inv.i2 * s2;
    let sq2 = it2.sqrt();
    let k1 = it1 - 3.0;
    let k2 = it2 * sq2 - SQRT_27;
    if !want_grad {
        return Ok(EnergyInputs {
            k1,
            k2,
            i3: inv.i3,
            dk1: SymTensor3::ZERO,
            dk2: SymTensor3::ZERO,
            a_inv: SymTensor3::ZERO,
        });
    }
    let a_inv = a.inverse()?;
    let id = SymTensor3::IDENTITY;
    let dk1 = (id - a_inv * (inv.i1 / 3.0)) * s1;
    let dit2 = (id * inv.i1 - *a - a_inv * (2.0 * inv.i2 / 3.0)) * s2;
    let dk2 = dit2 * (1.5 * sq2);
    Ok(EnergyInputs { k1, k2, i3: inv.i3, dk1, dk2, a_inv })
}

impl EnergyWeights {
    pub fn zeros(form: NetForm) -> Self {
        let (n2, n1) = Self::layout(form);
        Self { form, w2: vec![0.0; n2], w1: vec![0.0; n1], vol_exp: 0.0, vol_scale: 0.0 }
    }

    /// `(second-layer count, first-layer count)`.
    pub fn layout(form: NetForm) -> (usize, usize) {
        match form {
            NetForm::Reduced => (4, 2),
            NetForm::Full => (8, 4),
        }
    }

    /// Neo-Hookean shape: `coef·(Ĩ1 − 3)`.
    pub fn neo_hookean(coef: f64) -> Self {
        let mut w = Self::zeros(NetForm::Reduced);
        w.w2[0] = coef;
        w
    }

    fn is_zero(&self) -> bool {
        self.w2.iter().all(|&w| w == 0.0) && self.vol_scale == 0.0
    }

    /// Channel inputs and their derivatives w.r.t. `(K1, K2)`.
    fn channel_inputs(&self, k1: f64, k2: f64) -> ChannelBuf {
        match self.form {
            NetForm::Reduced => ChannelBuf::new(&[(k1, 1.0, 0.0), (k2, 0.0, 1.0)]),
            NetForm::Full => ChannelBuf::new(&[
                (k1, 1.0, 0.0),
                (k1 * k1, 2.0 * k1, 0.0),
                (k2, 0.0, 1.0),
                (k2 * k2, 0.0, 2.0 * k2),
            ]),
        }
    }

    fn vol_terms(&self, i3: f64) -> (f64, f64) {
        if self.vol_scale == 0.0 {
            return (0.0, 0.0);
        }
        let l = i3.ln();
        let em = (self.vol_exp * l).exp_m1();
        // value, and dψ/dI3 · I3
        (self.vol_scale * (em - self.vol_exp * l), self.vol_scale * self.vol_exp * em)
    }

    pub fn eval(&self, a: &SymTensor3) -> Result<f64> {
        let inp = energy_inputs(a, false)?;
        let mut psi = 0.0;
        for (k, (x, _, _)) in self.channel_inputs(inp.k1, inp.k2).into_iter().enumerate() {
            let (lin, ex) = (self.w2[2 * k], self.w2[2 * k + 1]);
            psi += lin * x;
            if ex != 0.0 {
                psi += ex * expm1_act(self.w1[k] * x)?.0;
            }
        }
        Ok(psi + self.vol_terms(inp.i3).0)
    }

    /// `∂ψ/∂A`.
    pub fn grad(&self, a: &SymTensor3) -> Result<SymTensor3> {
        if self.is_zero() {
            if !(a.det() > 0.0) {
                return Err(Error::NonPositiveDeterminant(a.det()));
            }
            return Ok(SymTensor3::ZERO);
        }
        let inp = energy_inputs(a, true)?;
        let (mut d1, mut d2) = (0.0, 0.0);
        for (k, (x, dx1, dx2)) in self.channel_inputs(inp.k1, inp.k2).into_iter().enumerate() {
            let (lin, ex) = (self.w2[2 * k], self.w2[2 * k + 1]);
            let mut dpsi = lin;
            if ex != 0.0 {
                dpsi += ex * self.w1[k] * expm1_act(self.w1[k] * x)?.1;
            }
            d1 += dpsi * dx1;
            d2 += dpsi * dx2;
        }
        let (_, dvol) = self.vol_terms(inp.i3);
        Ok(inp.dk1 * d1 + inp.dk2 * d2 + inp.a_inv * dvol)
    }

    /// Parameters of the same function when stresses are divided by `s`.
    pub fn scaled_stress(&self, s: f64) -> Self {
        let mut w = self.clone();
        w.w2.iter_mut().for_each(|v| *v /= s);
        w.vol_scale /= s;
        w
    }
}

/// Potential channel inputs `(x, ∂x/∂I1, ∂x/∂J̃2)`.
fn potential_channels(form: NetForm, i1: f64, jt2: f64) -> ChannelBuf {
    let all = [(i1, 1.0, 0.0), (i1 * i1, 2.0 * i1, 0.0), (jt2, 0.0, 1.0), (jt2 * jt2, 0.0, 2.0 * jt2)];
    match form {
        NetForm::Reduced => ChannelBuf::new(&all[..3]),
        NetForm::Full => ChannelBuf::new(&all),
    }
}

impl PotentialWeights {
    pub fn zeros(form: NetForm) -> Self {
        let (n2, n1) = Self::layout(form);
        Self { form, w2: vec![0.0; n2], w1: vec![0.0; n1] }
    }

    pub fn layout(form: NetForm) -> (usize, usize) {
        match form {
            NetForm::Reduced => (6, 3),
            NetForm::Full => (12, 8),
        }
    }

    /// Pure `coef·J̃2` potential (von Mises shape).
    pub fn von_mises(coef: f64) -> Self {
        let mut w = Self::zeros(NetForm::Reduced);
        w.w2[4] = coef;
        w
    }

    /// Stress-scaling power of each channel's input.
    fn channel_powers(&self) -> &'static [i32] {
        match self.form {
            NetForm::Reduced => &[1, 2, 2],
            NetForm::Full => &[1, 2, 2, 4],
        }
    }

    /// Channel value and `dg/dx`.
    fn channel(&self, k: usize, x: f64) -> Result<(f64, f64)> {
        match self.form {
            NetForm::Reduced => {
                let (wa, wl, c) = (self.w2[2 * k], self.w2[2 * k + 1], self.w1[k]);
                let (va, da) = abs_act(x);
                let mut v = wa * va;
                let mut d = wa * da;
                if wl != 0.0 {
                    let (l, t) = ln_cosh(c * x);
                    v += wl * l;
                    d += wl * c * t;
                }
                Ok((v, d))
            }
            NetForm::Full => {
                let (wa, wl, wc) = (self.w2[3 * k], self.w2[3 * k + 1], self.w2[3 * k + 2]);
                let (cl, cc) = (self.w1[2 * k], self.w1[2 * k + 1]);
                let (va, da) = abs_act(x);
                let mut v = wa * va;
                let mut d = wa * da;
                if wl != 0.0 {
                    let (l, t) = ln_cosh(cl * x);
                    v += wl * l;
                    d += wl * cl * t;
                }
                if wc != 0.0 {
                    let (h, dh) = coshm1_act(cc * x)?;
                    v += wc * h;
                    d += wc * cc * dh;
                }
                Ok((v, d))
            }
        }
    }

    pub fn eval(&self, a: &SymTensor3) -> Result<f64> {
        let inv = a.invariants();
        let mut g = 0.0;
        for (k, (x, _, _)) in potential_channels(self.form, inv.i1, 3.0 * inv.j2).into_iter().enumerate() {
            g += self.channel(k, x)?.0;
        }
        Ok(g)
    }

    /// `∂g/∂A = g,I1·I + g,J̃2·3·dev(A)`.
    pub fn flow(&self, a: &SymTensor3) -> Result<SymTensor3> {
        let inv = a.invariants();
        let (mut gi1, mut gj2) = (0.0, 0.0);
        for (k, (x, dx1, dxj)) in potential_channels(self.form, inv.i1, 3.0 * inv.j2).into_iter().enumerate() {
            let (_, d) = self.channel(k, x)?;
            gi1 += d * dx1;
            gj2 += d * dxj;
        }
        Ok(SymTensor3::IDENTITY * gi1 + a.dev() * (3.0 * gj2))
    }

    /// Yield function `Φ = g − 1` for the normalized form.
    pub fn yield_value(&self, gamma: &SymTensor3) -> Result<f64> {
        Ok(self.eval(gamma)? - 1.0)
    }

    pub fn scaled_stress(&self, s: f64) -> Self {
        let mut w = self.clone();
        let powers = self.channel_powers();
        let (per2, per1) = match self.form {
            NetForm::Reduced => (2, 1),
            NetForm::Full => (3, 2),
        };
        for (k, &p) in powers.iter().enumerate() {
            let f = s.powi(p);
            // abs terms scale with the input; activation slopes absorb the rest
            w.w2[per2 * k] *= f;
            for j in 0..per1 {
                w.w1[per1 * k + j] *= f;
            }
        }
        w
    }
}

pub fn energy_eval(w: &EnergyWeights, a: &SymTensor3) -> Result<f64> {
    w.eval(a)
}

pub fn energy_grad(w: &EnergyWeights, a: &SymTensor3) -> Result<SymTensor3> {
    w.grad(a)
}

pub fn potential_eval(w: &PotentialWeights, a: &SymTensor3) -> Result<f64> {
    w.eval(a)
}

pub fn potential_flow(w: &PotentialWeights, a: &SymTensor3) -> Result<SymTensor3> {
    w.flow(a)
}

pub fn yield_value(w: &PotentialWeights, gamma: &SymTensor3) -> Result<f64> {
    w.yield_value(gamma)
}

impl WeightSet {
    pub fn zeros(energy_form: NetForm, potential_form: NetForm) -> Self {
        Self {
            psi_e: EnergyWeights::zeros(energy_form),
            psi_p: EnergyWeights::zeros(energy_form),
            psi_pe: EnergyWeights::zeros(energy_form),
            g1: PotentialWeights::zeros(potential_form),
            g2: PotentialWeights::zeros(potential_form),
        }
    }

    /// Network equivalent of Neo-Hookean elasticity, von Mises yield and
    /// Armstrong–Frederick hardening with backstress modulus `c` and recovery
    /// parameter `b` (all in stress units).
    pub fn von_mises_af(mu: f64, sigma_y: f64, c: f64, b: f64) -> Self {
        let mut ws = Self::zeros(NetForm::Reduced, NetForm::Reduced);
        ws.psi_e = EnergyWeights::neo_hookean(mu / 2.0);
        ws.psi_pe = EnergyWeights::neo_hookean(c / 2.0);
        ws.g1 = PotentialWeights::von_mises(1.0 / (sigma_y * sigma_y));
        ws.g2 = PotentialWeights::von_mises(b / (3.0 * sigma_y * sigma_y));
        ws
    }

    /// Flat parameter layout, in a fixed order.
    pub fn layout(&self) -> Vec<WeightInfo> {
        let mut out = Vec::new();
        let mut push = |group: Group, layer: Layer, name: String| out.push(WeightInfo { name, group, layer });
        for g in Group::ALL {
            let p = g.name();
            let (n2, n1, vol) = match g {
                Group::PsiE | Group::PsiP | Group::PsiPe => {
                    let e = self.energy(g);
                    (e.w2.len(), e.w1.len(), true)
                }
                Group::G1 | Group::G2 => {
                    let q = self.potential(g);
                    (q.w2.len(), q.w1.len(), false)
                }
            };
            for k in 1..=n2 {
                push(g, Layer::Second, format!("{p}.w2.{k}"));
            }
            for k in 1..=n1 {
                push(g, Layer::First, format!("{p}.w1.{k}"));
            }
            if vol {
                push(g, Layer::VolExponent, format!("{p}.w3.1"));
                push(g, Layer::VolScale, format!("{p}.w3.2"));
            }
        }
        out
    }

    pub fn energy(&self, g: Group) -> &EnergyWeights {
        match g {
            Group::PsiE => &self.psi_e,
            Group::PsiP => &self.psi_p,
            Group::PsiPe => &self.psi_pe,
            _ => panic!("{} is not an energy network", g.name()),
        }
    }

    pub fn potential(&self, g: Group) -> &PotentialWeights {
        match g {
            Group::G1 => &self.g1,
            Group::G2 => &self.g2,
            _ => panic!("{} is not a potential network", g.name()),
        }
    }

    /// Values in [`WeightSet::layout`] order.
    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for e in [&self.psi_e, &self.psi_p, &self.psi_pe] {
            v.extend_from_slice(&e.w2);
            v.extend_from_slice(&e.w1);
            v.push(e.vol_exp);
            v.push(e.vol_scale);
        }
        for q in [&self.g1, &self.g2] {
            v.extend_from_slice(&q.w2);
            v.extend_from_slice(&q.w1);
        }
        v
    }

    pub fn set_values(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.len(), "weight vector length mismatch");
        let mut it = v.iter().copied();
        for e in [&mut self.psi_e, &mut self.psi_p, &mut self.psi_pe] {
            e.w2.iter_mut().for_each(|w| *w = it.next().unwrap());
            e.w1.iter_mut().for_each(|w| *w = it.next().unwrap());
            e.vol_exp = it.next().unwrap();
            e.vol_scale = it.next().unwrap();
        }
        for q in [&mut self.g1, &mut self.g2] {
            q.w2.iter_mut().for_each(|w| *w = it.next().unwrap());
            q.w1.iter_mut().for_each(|w| *w = it.next().unwrap());
        }
    }

    pub fn with_values(&self, v: &[f64]) -> Self {
        let mut w = self.clone();
        w.set_values(v);
        w
    }

    pub fn len(&self) -> usize {
        let e = |w: &EnergyWeights| w.w2.len() + w.w1.len() + 2;
        let p = |w: &PotentialWeights| w.w2.len() + w.w1.len();
        e(&self.psi_e) + e(&self.psi_p) + e(&self.psi_pe) + p(&self.g1) + p(&self.g2)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        for (info, v) in self.layout().iter().zip(self.values()) {
            if !v.is_finite() {
                return Err(Error::Weights(format!("`{}` is not finite", info.name)));
            }
            if v < 0.0 {
                return Err(Error::Weights(format!("`{}` is negative ({v})", info.name)));
            }
        }
        Ok(())
    }

    /// The same model expressed for stresses divided by `s`.
    pub fn scaled_stress(&self, s: f64) -> Self {
        Self {
            psi_e: self.psi_e.scaled_stress(s),
            psi_p: self.psi_p.scaled_stress(s),
            psi_pe: self.psi_pe.scaled_stress(s),
            g1: self.g1.scaled_stress(s),
            g2: self.g2.scaled_stress(s),
        }
    }

    pub fn to_json_value(&self) -> Value {
        let mut m = Map::new();
        for (info, v) in self.layout().into_iter().zip(self.values()) {
            m.insert(info.name, Value::from(v));
        }
        Value::Object(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("weights serialize")
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Weights("expected a JSON object of name → number".into()))?;
        let count = |prefix: &str| obj.keys().filter(|k| k.starts_with(prefix)).count();
        let energy_form = match count("psi_e.w2.") {
            4 => NetForm::Reduced,
            8 => NetForm::Full,
            n => return Err(Error::Weights(format!("psi_e has {n} second-layer weights, expected 4 or 8"))),
        };
        let potential_form = match count("g1.w2.") {
            6 => NetForm::Reduced,
            12 => NetForm::Full,
            n => return Err(Error::Weights(format!("g1 has {n} second-layer weights, expected 6 or 12"))),
        };
        let mut ws = Self::zeros(energy_form, potential_form);
        let layout = ws.layout();
        if obj.len() != layout.len() {
            let unknown: Vec<_> = obj
                .keys()
                .filter(|k| !layout.iter().any(|i| &i.name == *k))
                .cloned()
                .collect();
            return Err(Error::Weights(format!(
                "expected {} weights, found {} (unknown: {unknown:?})",
                layout.len(),
                obj.len()
            )));
        }
        let mut vals = Vec::with_capacity(layout.len());
        for info in &layout {
            let x = obj
                .get(&info.name)
                .ok_or_else(|| Error::Weights(format!("missing `{}`", info.name)))?
                .as_f64()
                .ok_or_else(|| Error::Weights(format!("`{}` is not a number", info.name)))?;
            vals.push(x);
        }
        ws.set_values(&vals);
        ws.validate()?;
        Ok(ws)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::Weights(e.to_string()))?;
        Self::from_json_value(&v)
    }
}
