//! Load paths, analytic reference models, datasets and yield-surface tracing.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constitutive::{EnergyDerivatives, KinematicSet, Material, StressSet};
use crate::error::{Error, Result};
use crate::integrator::{simulate_path, StepResult};
use crate::netfuncs::PotentialWeights;
use crate::tensor3::SymTensor3;

// ---------------------------------------------------------------- load paths

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathKind {
    #[serde(rename = "UT")]
    Ut,
    #[serde(rename = "UC")]
    Uc,
    #[serde(rename = "EB")]
    Eb,
    #[serde(rename = "UT-unl")]
    UtUnl,
    #[serde(rename = "Cyclic")]
    Cyclic,
    #[serde(rename = "custom")]
    Custom,
}

impl PathKind {
    pub fn label(self) -> &'static str {
        match self {
            PathKind::Ut => "UT",
            PathKind::Uc => "UC",
            PathKind::Eb => "EB",
            PathKind::UtUnl => "UT-unl",
            PathKind::Cyclic => "Cyclic",
            PathKind::Custom => "custom",
        }
    }

    pub fn deformation(self) -> Deformation {
        match self {
            PathKind::Eb => Deformation::Equibiaxial,
            _ => Deformation::Uniaxial,
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PathKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ut" => Ok(PathKind::Ut),
            "uc" => Ok(PathKind::Uc),
            "eb" => Ok(PathKind::Eb),
            "ut-unl" | "ut_unl" | "utunl" => Ok(PathKind::UtUnl),
            "cyclic" | "cyc" => Ok(PathKind::Cyclic),
            "custom" => Ok(PathKind::Custom),
            other => Err(Error::InvalidPath(format!("unknown load case `{other}`"))),
        }
    }
}

/// How the axial stretch maps to an isochoric diagonal `C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deformation {
    /// `diag(λ², 1/λ, 1/λ)`
    Uniaxial,
    /// `diag(λ², λ², 1/λ⁴)`
    Equibiaxial,
}

impl Deformation {
    pub fn c_of(self, l: f64) -> SymTensor3 {
        match self {
            Deformation::Uniaxial => SymTensor3::diag(l * l, 1.0 / l, 1.0 / l),
            Deformation::Equibiaxial => {
                let l2 = l * l;
                SymTensor3::diag(l2, l2, 1.0 / (l2 * l2))
            }
        }
    }
}

/// Parameters of a generated load path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub kind: PathKind,
    /// Peak stretch (the tensile peak for cyclic paths).
    pub stretch: f64,
    /// Compressive turning stretch of cyclic paths.
    #[serde(default = "default_compression")]
    pub compression_stretch: f64,
    #[serde(default = "default_steps")]
    pub steps_per_ramp: usize,
    #[serde(default = "default_cycles")]
    pub n_cycles: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_compression() -> f64 {
    0.85
}
fn default_steps() -> usize {
    200
}
fn default_cycles() -> usize {
    1
}
fn default_dt() -> f64 {
    1.0
}

impl PathSpec {
    /// Default amplitudes: UT/EB/UT-unl to 1.3, UC to 0.8, cyclic 1.25/0.85.
    pub fn default_for(kind: PathKind) -> Self {
        let stretch = match kind {
            PathKind::Uc => 0.8,
            PathKind::Cyclic => 1.25,
            _ => 1.3,
        };
        Self {
            kind,
            stretch,
            compression_stretch: default_compression(),
            steps_per_ramp: default_steps(),
            n_cycles: default_cycles(),
            dt: default_dt(),
        }
    }

    pub fn with_steps(mut self, n: usize) -> Self {
        self.steps_per_ramp = n;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadPath {
    pub kind: PathKind,
    pub deformation: Deformation,
    times: Vec<f64>,
    stretches: Vec<f64>,
    cs: Vec<SymTensor3>,
}

impl LoadPath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn stretches(&self) -> &[f64] {
        &self.stretches
    }

    pub fn c_history(&self) -> &[SymTensor3] {
        &self.cs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Arbitrary stretch history; times must increase strictly.
    pub fn custom(deformation: Deformation, times: Vec<f64>, stretches: Vec<f64>) -> Result<Self> {
        if times.len() != stretches.len() || times.len() < 2 {
            return Err(Error::InvalidPath("need at least two (time, stretch) pairs of equal count".into()));
        }
        if let Some(&l) = stretches.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidPath(format!("stretch must be positive and finite, got {l}")));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath(format!("time must increase strictly ({} then {})", w[0], w[1])));
        }
        let cs = stretches.iter().map(|&l| deformation.c_of(l)).collect();
        Ok(Self { kind: PathKind::Custom, deformation, times, stretches, cs })
    }
}

/// Piecewise-linear ramps through `nodes`, `n` steps each, endpoints exact.
fn ramps(nodes: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![nodes[0]];
    for w in nodes.windows(2) {
        for k in 1..=n {
            out.push(if k == n { w[1] } else { w[0] + (w[1] - w[0]) * (k as f64 / n as f64) });
        }
    }
    out
}

pub fn make_path(spec: &PathSpec) -> Result<LoadPath> {
    let amp = spec.stretch;
    if !(amp > 0.0 && amp.is_finite()) {
        return Err(Error::InvalidPath(format!("amplitude must be positive, got {amp}")));
    }
    if spec.steps_per_ramp < 10 {
        return Err(Error::InvalidPath(format!("need at least 10 steps per ramp, got {}", spec.steps_per_ramp)));
    }
    if !(spec.dt > 0.0 && spec.dt.is_finite()) {
        return Err(Error::InvalidPath(format!("time step must be positive, got {}", spec.dt)));
    }
    let nodes: Vec<f64> = match spec.kind {
        PathKind::Ut | PathKind::Uc | PathKind::Eb => vec![1.0, amp],
        PathKind::UtUnl => vec![1.0, amp, 1.0],
        PathKind::Cyclic => {
            let lc = spec.compression_stretch;
            if !(lc > 0.0 && lc.is_finite()) {
                return Err(Error::InvalidPath(format!("compression amplitude must be positive, got {lc}")));
            }
            if spec.n_cycles == 0 {
                return Err(Error::InvalidPath("cyclic path needs at least one cycle".into()));
            }
            let mut v = vec![1.0, amp];
            for r in 1..2 * spec.n_cycles {
                v.push(if r % 2 == 1 { lc } else { amp });
            }
            v
        }
        PathKind::Custom => return Err(Error::InvalidPath("custom paths are built with LoadPath::custom".into())),
    };
    let stretches = ramps(&nodes, spec.steps_per_ramp);
    let times = (0..stretches.len()).map(|k| k as f64 * spec.dt).collect();
    let deformation = spec.kind.deformation();
    let cs = stretches.iter().map(|&l| deformation.c_of(l)).collect();
    Ok(LoadPath { kind: spec.kind, deformation, times, stretches, cs })
}

// ----------------------------------------------------------------- datasets

/// Observed axial Cauchy stress along a coaxial deformation history.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub times: Vec<f64>,
    pub cs: Vec<SymTensor3>,
    pub sigma11: Vec<f64>,
    /// `max |σ11|`; 1 for an all-zero record.
    pub normalization: f64,
    pub provenance: BTreeMap<String, String>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl Dataset {
    pub fn new(times: Vec<f64>, cs: Vec<SymTensor3>, sigma11: Vec<f64>, provenance: BTreeMap<String, String>) -> Result<Self> {
        if times.len() != cs.len() || times.len() != sigma11.len() || times.is_empty() {
            return Err(Error::Validation("dataset columns must be non-empty and of equal length".into()));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(format!("time is not strictly increasing ({} then {})", w[0], w[1])));
        }
        let m = max_abs(&sigma11);
        let normalization = if m > 0.0 { m } else { 1.0 };
        let mut provenance = provenance;
        provenance.insert("normalization".into(), format!("{normalization:.16e}"));
        Ok(Self { times, cs, sigma11, normalization, provenance })
    }

    pub fn from_results(results: &[StepResult], provenance: BTreeMap<String, String>) -> Result<Self> {
        Self::new(
            results.iter().map(|r| r.time).collect(),
            results.iter().map(|r| r.c).collect(),
            results.iter().map(|r| r.sigma.xx).collect(),
            provenance,
        )
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest |σ11| in the data (0 when all stresses vanish).
    pub fn max_abs_sigma(&self) -> f64 {
        max_abs(&self.sigma11)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.provenance {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "time,C11,C22,C33,sigma11")?;
        for i in 0..self.len() {
            let c = &self.cs[i];
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], c.xx, c.yy, c.zz, self.sigma11[i]
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let text = std::io::read_to_string(reader)?;
        let mut provenance = BTreeMap::new();
        for line in text.lines() {
            if let Some(rest) = line.trim_start().strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    provenance.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header_line = text.lines().position(|l| !l.trim_start().starts_with('#')).map_or(1, |p| p + 1);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse { line: header_line, column: String::new(), message: e.to_string() })?
            .clone();
        let mut idx = [0usize; 5];
        for (slot, name) in idx.iter_mut().zip(["time", "C11", "C22", "C33", "sigma11"]) {
            *slot = headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                line: header_line,
                column: name.into(),
                message: "missing column".into(),
            })?;
        }
        let (mut times, mut cs, mut sig) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                column: String::new(),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let mut vals = [0.0f64; 5];
            for (k, (&i, name)) in idx.iter().zip(["time", "C11", "C22", "C33", "sigma11"]).enumerate() {
                let raw = rec.get(i).ok_or_else(|| Error::Parse {
                    line,
                    column: name.into(),
                    message: "missing value".into(),
                })?;
                vals[k] = raw.parse().map_err(|e| Error::Parse {
                    line,
                    column: name.into(),
                    message: format!("`{raw}`: {e}"),
                })?;
            }
            times.push(vals[0]);
            cs.push(SymTensor3::diag(vals[1], vals[2], vals[3]));
            sig.push(vals[4]);
        }
        let stored = provenance.get("normalization").cloned();
        let mut ds = Dataset::new(times, cs, sig, provenance)?;
        if let Some(s) = stored {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::Validation(format!("normalization `{s}` is not a number")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("normalization must be positive, got {v}")));
            }
            ds.normalization = v;
            ds.provenance.insert("normalization".into(), s);
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    ds.save(path)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path)
}

// --------------------------------------------------------- analytic models

fn d_itilde1(a: &SymTensor3) -> Result<(f64, SymTensor3)> {
    let j = a.det();
    if !(j > 0.0) {
        return Err(Error::NonPositiveDeterminant(j));
    }
    let s = j.cbrt().recip();
    let i1 = a.trace();
    Ok((j, (SymTensor3::IDENTITY - a.inverse()? * (i1 / 3.0)) * s))
}

/// `∂/∂A` of `μ/2·(Ĩ1 − 3) + K/4·(det A − 1 − ln det A)`.
fn compressible_nh_grad(a: &SymTensor3, mu: f64, k: f64) -> Result<SymTensor3> {
    let (j, di1) = d_itilde1(a)?;
    Ok(di1 * (0.5 * mu) + a.inverse()? * (0.25 * k * (j - 1.0)))
}

/// Which strain measure carries the hardening energy `c/2·(Ĩ1 − 3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HardeningTarget {
    /// Nonlinear (recoverable) backstress, Armstrong–Frederick behaviour.
    #[default]
    Bpe,
    /// Linear backstress; the recovery potential then has nothing to act on.
    Cp,
}

/// Argument of the hardening recovery potential `b/2·tr(dev(·)²)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HardeningDriver {
    #[default]
    Theta,
    Gamma,
}

/// Neo-Hookean elasticity, von Mises yield, Armstrong–Frederick hardening.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VmAfParams {
    pub mu: f64,
    pub k: f64,
    pub sigma_y: f64,
    pub c: f64,
    pub b: f64,
    pub hardening: HardeningTarget,
    pub driver: HardeningDriver,
}

impl Default for VmAfParams {
    fn default() -> Self {
        Self {
            mu: 12.5,
            k: 25.0,
            sigma_y: 2.0,
            c: 8.5,
            b: 3.0,
            hardening: HardeningTarget::Bpe,
            driver: HardeningDriver::Theta,
        }
    }
}

impl VmAfParams {
    pub fn perfect_plasticity() -> Self {
        Self { c: 0.0, b: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("mu", self.mu), ("k", self.k), ("sigma_y", self.sigma_y)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{n} must be positive, got {v}")));
            }
        }
        for (n, v) in [("c", self.c), ("b", self.b)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{n} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn provenance(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("generator".into(), "vm_af".into());
        m.insert("mu".into(), self.mu.to_string());
        m.insert("k".into(), self.k.to_string());
        m.insert("sigma_y".into(), self.sigma_y.to_string());
        m.insert("c".into(), self.c.to_string());
        m.insert("b".into(), self.b.to_string());
        m.insert("hardening".into(), format!("{:?}", self.hardening).to_lowercase());
        m.insert("driver".into(), format!("{:?}", self.driver).to_lowercase());
        m
    }
}

impl Material for VmAfParams {
    fn energy_derivatives(&self, kin: &KinematicSet) -> Result<EnergyDerivatives> {
        let mut d = EnergyDerivatives { d_ce: compressible_nh_grad(&kin.ce_bar, self.mu, self.k)?, ..Default::default() };
        if self.c != 0.0 {
            match self.hardening {
                HardeningTarget::Bpe => d.d_bpe = d_itilde1(&kin.bpe_bar)?.1 * (0.5 * self.c),
                HardeningTarget::Cp => d.d_cp = d_itilde1(&kin.c_p)?.1 * (0.5 * self.c),
            }
        }
        Ok(d)
    }

    fn yield_value(&self, st: &StressSet) -> Result<f64> {
        Ok(3.0 * st.gamma.invariants().j2 - self.sigma_y * self.sigma_y)
    }

    fn yield_scale(&self) -> f64 {
        self.sigma_y * self.sigma_y
    }

    fn flow_plastic(&self, st: &StressSet) -> Result<SymTensor3> {
        Ok(st.gamma.dev() * 3.0)
    }

    fn flow_hardening(&self, st: &StressSet) -> Result<SymTensor3> {
        let arg = match self.driver {
            HardeningDriver::Theta => st.theta,
            HardeningDriver::Gamma => st.gamma,
        };
        Ok(arg.dev() * self.b)
    }
}

/// Compressible Neo-Hookean elasticity with the paraboloid yield function
/// `3J2 + (σC − σT)·I1 − σC·σT`, associative, perfectly plastic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TschoeglParams {
    pub mu: f64,
    pub k: f64,
    pub sigma_t: f64,
    pub sigma_c: f64,
}

impl Default for TschoeglParams {
    fn default() -> Self {
        Self { mu: 12.5, k: 25.0, sigma_t: 2.0, sigma_c: 4.0 }
    }
}

impl TschoeglParams {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("mu", self.mu), ("k", self.k), ("sigma_t", self.sigma_t), ("sigma_c", self.sigma_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{n} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Yield function value at a stress state.
    pub fn phi(&self, s: &SymTensor3) -> f64 {
        let inv = s.invariants();
        3.0 * inv.j2 + (self.sigma_c - self.sigma_t) * inv.i1 - self.sigma_c * self.sigma_t
    }

    pub fn provenance(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("generator".into(), "tschoegl".into());
        m.insert("mu".into(), self.mu.to_string());
        m.insert("k".into(), self.k.to_string());
        m.insert("sigma_t".into(), self.sigma_t.to_string());
        m.insert("sigma_c".into(), self.sigma_c.to_string());
        m
    }
}

impl Material for TschoeglParams {
    fn energy_derivatives(&self, kin: &KinematicSet) -> Result<EnergyDerivatives> {
        Ok(EnergyDerivatives { d_ce: compressible_nh_grad(&kin.ce_bar, self.mu, self.k)?, ..Default::default() })
    }

    fn yield_value(&self, st: &StressSet) -> Result<f64> {
        Ok(self.phi(&st.gamma))
    }

    fn yield_scale(&self) -> f64 {
        self.sigma_c * self.sigma_t
    }

    fn flow_plastic(&self, st: &StressSet) -> Result<SymTensor3> {
        Ok(st.gamma.dev() * 3.0 + SymTensor3::IDENTITY * (self.sigma_c - self.sigma_t))
    }

    fn flow_hardening(&self, _st: &StressSet) -> Result<SymTensor3> {
        Ok(SymTensor3::ZERO)
    }
}

fn path_provenance(path: &LoadPath, m: &mut BTreeMap<String, String>) {
    m.insert("case".into(), path.kind.label().into());
    m.insert("deformation".into(), format!("{:?}", path.deformation).to_lowercase());
    m.insert("records".into(), path.len().to_string());
    let s = path.stretches();
    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    m.insert("stretch_min".into(), lo.to_string());
    m.insert("stretch_max".into(), hi.to_string());
}

/// Runs any material along a path and records the axial Cauchy stress.
pub fn generate<M: Material + ?Sized>(model: &M, path: &LoadPath, mut provenance: BTreeMap<String, String>) -> Result<Dataset> {
    let out = simulate_path(model, path)?;
    path_provenance(path, &mut provenance);
    Dataset::from_results(&out, provenance)
}

pub fn generate_vm_af(params: &VmAfParams, path: &LoadPath) -> Result<Dataset> {
    params.validate()?;
    generate(params, path, params.provenance())
}

pub fn generate_tschoegl(params: &TschoeglParams, path: &LoadPath) -> Result<Dataset> {
    params.validate()?;
    generate(params, path, params.provenance())
}

// ------------------------------------------------------------------ tracing

/// Pair of principal axes spanning a plane of diagonal stress space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Plane {
    #[default]
    #[serde(rename = "11-22")]
    S11S22,
    #[serde(rename = "11-33")]
    S11S33,
    #[serde(rename = "22-33")]
    S22S33,
}

impl Plane {
    pub fn axes(self) -> (usize, usize) {
        match self {
            Plane::S11S22 => (0, 1),
            Plane::S11S33 => (0, 2),
            Plane::S22S33 => (1, 2),
        }
    }
}

impl FromStr for Plane {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "11-22" | "12" | "xy" => Ok(Plane::S11S22),
            "11-33" | "13" | "xz" => Ok(Plane::S11S33),
            "22-33" | "23" | "yz" => Ok(Plane::S22S33),
            other => Err(Error::Validation(format!("unknown plane `{other}` (use 11-22, 11-33 or 22-33)"))),
        }
    }
}

/// Cap on the ray parameter when searching for the level set.
pub const TRACE_CAP: f64 = 1e6;
pub const TRACE_TOL: f64 = 1e-10;

/// Distance along `dir` where `f` changes sign, given `f(0) < 0`. An
/// overflowing activation counts as "outside".
fn ray_root<F: Fn(&SymTensor3) -> Result<f64>>(f: &F, dir: [f64; 3], tol: f64) -> Result<f64> {
    let at = |s: f64| -> Result<f64> {
        match f(&SymTensor3::diag(s * dir[0], s * dir[1], s * dir[2])) {
            Err(Error::ActivationOverflow(_)) => Ok(f64::INFINITY),
            other => other,
        }
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let v = at(hi)?;
        if v.abs() <= tol {
            return Ok(hi);
        }
        if v > 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > TRACE_CAP {
            return Err(Error::UnboundedSurface(dir));
        }
    }
    let mut best = (f64::INFINITY, hi);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let v = at(mid)?;
        if v.abs() < best.0 {
            best = (v.abs(), mid);
        }
        if v.abs() <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(best.1)
}

/// Crossing points of the level set `f = 0` along each direction.
pub fn trace_level_set<F: Fn(&SymTensor3) -> Result<f64>>(f: F, dirs: &[[f64; 3]], tol: f64) -> Result<Vec<[f64; 3]>> {
    if f(&SymTensor3::ZERO)? >= 0.0 {
        return Err(Error::Validation("the origin must lie strictly inside the surface".into()));
    }
    dirs.iter()
        .map(|&d| ray_root(&f, d, tol).map(|s| [s * d[0], s * d[1], s * d[2]]))
        .collect()
}

/// Directions in a principal plane; the second half negates the first half
/// exactly, so point symmetry of the traced curve is not blurred by round-off.
pub fn plane_directions(plane: Plane, n_rays: usize) -> Result<Vec<[f64; 3]>> {
    if n_rays < 4 || n_rays % 2 != 0 {
        return Err(Error::Validation(format!("n_rays must be even and at least 4, got {n_rays}")));
    }
    let (i, j) = plane.axes();
    let half = n_rays / 2;
    let mut dirs = Vec::with_capacity(n_rays);
    for k in 0..half {
        let th = std::f64::consts::TAU * k as f64 / n_rays as f64;
        let mut d = [0.0; 3];
        d[i] = th.cos();
        d[j] = th.sin();
        dirs.push(d);
    }
    for k in 0..half {
        let d = dirs[k];
        dirs.push([-d[0], -d[1], -d[2]]);
    }
    Ok(dirs)
}

/// Near-uniform directions on the unit sphere of principal stress space
/// (antipodal pairs).
pub fn sphere_directions(n_points: usize) -> Result<Vec<[f64; 3]>> {
    if n_points < 2 || n_points % 2 != 0 {
        return Err(Error::Validation(format!("n_points must be even and at least 2, got {n_points}")));
    }
    let half = n_points / 2;
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut dirs = Vec::with_capacity(n_points);
    for k in 0..half {
        // upper hemisphere only; the lower one is its reflection
        let z = 1.0 - (k as f64 + 0.5) / half as f64;
        let r = (1.0 - z * z).sqrt();
        let ph = golden * k as f64;
        dirs.push([r * ph.cos(), r * ph.sin(), z]);
    }
    for k in 0..half {
        let d = dirs[k];
        dirs.push([-d[0], -d[1], -d[2]]);
    }
    Ok(dirs)
}

/// Yield surface `g = 1` of a potential network in a principal stress plane.
pub fn trace_yield_surface(w: &PotentialWeights, plane: Plane, n_rays: usize) -> Result<Vec<[f64; 3]>> {
    trace_level_set(|s| w.yield_value(s), &plane_directions(plane, n_rays)?, TRACE_TOL)
}

/// Point cloud of the yield surface in principal stress space. Directions
/// along which the surface is open are skipped.
pub fn trace_yield_surface_3d(w: &PotentialWeights, n_points: usize) -> Result<Vec<[f64; 3]>> {
    let mut pts = Vec::new();
    for d in sphere_directions(n_points)? {
        match trace_level_set(|s| w.yield_value(s), &[d], TRACE_TOL) {
            Ok(p) => pts.extend(p),
            Err(Error::UnboundedSurface(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(pts)
}

/// Reference paraboloid surface, for overlays.
pub fn trace_tschoegl(params: &TschoeglParams, plane: Plane, n_rays: usize) -> Result<Vec<[f64; 3]>> {
    tschoegl_along(params, plane_directions(plane, n_rays)?)
}

/// Point cloud of the paraboloid; it is open towards hydrostatic compression.
pub fn trace_tschoegl_3d(params: &TschoeglParams, n_points: usize) -> Result<Vec<[f64; 3]>> {
    tschoegl_along(params, sphere_directions(n_points)?)
}

fn tschoegl_along(params: &TschoeglParams, dirs: Vec<[f64; 3]>) -> Result<Vec<[f64; 3]>> {
    let scale = params.sigma_c * params.sigma_t;
    let mut out = Vec::new();
    for d in dirs {
        match trace_level_set(|s| Ok(params.phi(s) / scale), &[d], TRACE_TOL) {
            Ok(p) => out.extend(p),
            Err(Error::UnboundedSurface(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
