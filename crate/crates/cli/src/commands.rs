use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use icann_core::constitutive::{BoundaryCondition, Material};
use icann_core::integrator::{simulate_path, simulate_states, StepResult};
use icann_core::netfuncs::WeightSet;
use icann_core::refmodels::{
    generate as generate_dataset, make_path, trace_tschoegl, trace_tschoegl_3d, trace_yield_surface, trace_yield_surface_3d, Dataset,
    PathKind, TschoeglParams, VmAfParams,
};
use icann_core::training::{normalized_rms, train_with, TrainingData};
use icann_core::verify;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ModelKind, RunConfig, TraceMode};
use crate::CliError;

/// One run directory: `config.resolved`, the outputs and `manifest.json`.
pub struct Run {
    dir: PathBuf,
    files: BTreeMap<String, String>,
    info: serde_json::Map<String, Value>,
}

impl Run {
    pub fn create(dir: &Path, cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let mut run = Run { dir: dir.to_path_buf(), files: BTreeMap::new(), info: serde_json::Map::new() };
        run.write("config.resolved", cfg.resolved().as_bytes())?;
        run.info.insert("seed".into(), json!(cfg.seed));
        Ok(run)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.insert(name.to_string(), format!("{:x}", Sha256::digest(bytes)));
        Ok(())
    }

    fn note(&mut self, key: &str, v: Value) {
        self.info.insert(key.to_string(), v);
    }

    fn finish(mut self, command: &str) -> Result<(), CliError> {
        self.info.insert("command".into(), json!(command));
        self.info.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        let files: Vec<Value> = self.files.iter().map(|(f, h)| json!({ "file": f, "sha256": h })).collect();
        self.info.insert("outputs".into(), Value::Array(files));
        let text = serde_json::to_string_pretty(&Value::Object(self.info))? + "\n";
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

enum Model {
    Network(WeightSet),
    VmAf(VmAfParams),
    Tschoegl(TschoeglParams),
}

impl Model {
    fn resolve(cfg: &RunConfig, kind: ModelKind, weights: Option<&Path>) -> Result<Self, CliError> {
        let m = match kind {
            ModelKind::VmAf => Model::VmAf(cfg.vm_af),
            ModelKind::VmPerfect => Model::VmAf(VmAfParams { c: 0.0, b: 0.0, ..cfg.vm_af }),
            ModelKind::Tschoegl => Model::Tschoegl(cfg.tschoegl),
            ModelKind::Network => {
                let p = weights.ok_or_else(|| CliError::Config("model `network` needs `weights`".into()))?;
                Model::Network(read_weights(p)?)
            }
        };
        match &m {
            Model::VmAf(p) => p.validate()?,
            Model::Tschoegl(p) => p.validate()?,
            Model::Network(w) => w.validate()?,
        }
        Ok(m)
    }

    fn material(&self) -> &dyn Material {
        match self {
            Model::Network(w) => w,
            Model::VmAf(p) => p,
            Model::Tschoegl(p) => p,
        }
    }

    fn provenance(&self) -> BTreeMap<String, String> {
        match self {
            Model::VmAf(p) => p.provenance(),
            Model::Tschoegl(p) => p.provenance(),
            Model::Network(_) => BTreeMap::from([("model".to_string(), "network".to_string())]),
        }
    }
}

/// A weight file is either a bare weight map or a training report.
fn read_weights(p: &Path) -> Result<WeightSet, CliError> {
    let text = fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
    let w = v.get("weights").filter(|w| w.is_object()).unwrap_or(&v);
    Ok(WeightSet::from_json_value(w)?)
}

fn read_dataset(p: &Path) -> Result<Dataset, CliError> {
    Dataset::load(p).map_err(|e| match e {
        icann_core::Error::Io(m) => CliError::Io(format!("{}: {m}", p.display())),
        other => CliError::Config(format!("{}: {other}", p.display())),
    })
}

pub fn generate(cfg: &RunConfig, mut run: Run) -> Result<(), CliError> {
    let g = &cfg.generate;
    if g.cases.is_empty() {
        return Err(CliError::Config("generate.cases is empty".into()));
    }
    let model = Model::resolve(cfg, g.model, g.weights.as_deref())?;
    let mut rows = serde_json::Map::new();
    for &kind in &g.cases {
        if kind == PathKind::Custom {
            return Err(CliError::Config("custom paths cannot be generated; use simulate.reference".into()));
        }
        let spec = g.load.spec(kind);
        let path = make_path(&spec)?;
        let mut prov = model.provenance();
        prov.insert("case".into(), kind.label().into());
        prov.insert("stretch".into(), spec.stretch.to_string());
        let ds = generate_dataset(model.material(), &path, prov)?;
        let mut buf = Vec::new();
        ds.write_csv(&mut buf)?;
        let name = format!("{}.csv", kind.label());
        run.write(&name, &buf)?;
        rows.insert(name.clone(), json!(ds.len()));
        println!("{name}: {} rows, max |sigma11| {:.6}", ds.len(), ds.max_abs_sigma());
    }
    run.note("rows", Value::Object(rows));
    run.finish("generate")
}

pub fn train(cfg: &RunConfig, mut run: Run) -> Result<(), CliError> {
    let t = &cfg.train;
    if t.datasets.is_empty() {
        return Err(CliError::Config("train.datasets is empty".into()));
    }
    t.optimizer.validate()?;
    let datasets = t.datasets.iter().map(|p| read_dataset(p)).collect::<Result<Vec<_>, _>>()?;
    let start = t.weights.as_deref().map(read_weights).transpose()?;
    let data = TrainingData::new(datasets)?;
    let report = train_with(data, start, &t.optimizer)?;
    let ws = report.weight_set()?;

    run.write("weights.json", (ws.to_json() + "\n").as_bytes())?;
    run.write("report.json", (report.to_json() + "\n").as_bytes())?;
    let mut loss = String::from("epoch,loss\n");
    for (i, l) in report.loss_history.iter().enumerate() {
        loss.push_str(&format!("{},{:.16e}\n", i + 1, l));
    }
    run.write("loss.csv", loss.as_bytes())?;

    let mut tests = serde_json::Map::new();
    for p in &t.test {
        let ds = read_dataset(p)?;
        let rms = normalized_rms(&ws, &ds, report.normalization)?;
        println!("held-out {}: normalized RMS {:.4e}", p.display(), rms);
        tests.insert(p.to_string_lossy().into_owned(), json!(rms));
    }
    println!(
        "epochs {}, best loss {:.6e} (epoch {}), data loss {:.6e}, {:.1} s",
        report.loss_history.len(),
        report.best_loss,
        report.best_epoch,
        report.data_loss,
        report.wall_time_s
    );
    run.note("best_loss", json!(report.best_loss));
    run.note("data_loss", json!(report.data_loss));
    run.note("normalization", json!(report.normalization));
    run.note("held_out_rms", Value::Object(tests));
    run.finish("train")
}

fn history_csv(results: &[StepResult], stretches: Option<&[f64]>) -> String {
    let mut s = String::from("time,stretch,sigma11,sigma22,sigma33,dlambda,phi,dissipation\n");
    for (i, r) in results.iter().enumerate() {
        let l = stretches.map_or(r.c.xx.sqrt(), |st| st[i]);
        s.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.time, l, r.sigma.xx, r.sigma.yy, r.sigma.zz, r.dlambda, r.phi_final, r.dissipation.total
        ));
    }
    s
}

pub fn simulate(cfg: &RunConfig, mut run: Run) -> Result<(), CliError> {
    let s = &cfg.simulate;
    let model = Model::resolve(cfg, s.model, s.weights.as_deref())?;
    let (results, stretches, reference) = match &s.reference {
        Some(p) => {
            let ds = read_dataset(p)?;
            let r = simulate_states(model.material(), &ds.times, &ds.cs, BoundaryCondition::FreeS33)?;
            (r, None, Some(ds))
        }
        None => {
            let path = make_path(&s.load.spec(s.case))?;
            let r = simulate_path(model.material(), &path)?;
            (r, Some(path.stretches().to_vec()), None)
        }
    };
    let mut prov = model.provenance();
    prov.insert("case".into(), if reference.is_some() { "custom".into() } else { s.case.label().into() });
    let ds = Dataset::from_results(&results, prov)?;
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    run.write("stress.csv", &buf)?;
    run.write("history.csv", history_csv(&results, stretches.as_deref()).as_bytes())?;
    let yielded = results.iter().filter(|r| r.dlambda > 0.0).count();
    println!("{} steps, {} plastic, final sigma11 {:.6}", results.len(), yielded, ds.sigma11.last().copied().unwrap_or(0.0));
    if let Some(r) = reference {
        let sq: f64 = ds.sigma11.iter().zip(&r.sigma11).map(|(a, b)| (a - b).powi(2)).sum();
        let rms = (sq / r.len() as f64).sqrt() / r.max_abs_sigma().max(f64::MIN_POSITIVE);
        println!("RMS against reference (relative to max |sigma11|): {rms:.4e}");
        run.note("reference_rms", json!(rms));
    }
    run.note("plastic_steps", json!(yielded));
    run.finish("simulate")
}

pub fn trace(cfg: &RunConfig, mut run: Run) -> Result<(), CliError> {
    let t = &cfg.trace;
    let model = Model::resolve(cfg, t.model, t.weights.as_deref())?;
    let pts = match (&model, t.mode) {
        (Model::Tschoegl(p), TraceMode::Plane) => trace_tschoegl(p, t.plane, t.rays)?,
        (Model::Tschoegl(p), TraceMode::Cloud) => trace_tschoegl_3d(p, t.points)?,
        (m, mode) => {
            // initial yield surface, zero backstress
            let g1 = match m {
                Model::Network(w) => w.g1.clone(),
                Model::VmAf(p) => WeightSet::von_mises_af(p.mu, p.sigma_y, p.c, p.b).g1,
                Model::Tschoegl(_) => unreachable!(),
            };
            match mode {
                TraceMode::Plane => trace_yield_surface(&g1, t.plane, t.rays)?,
                TraceMode::Cloud => trace_yield_surface_3d(&g1, t.points)?,
            }
        }
    };
    let mut buf = Vec::new();
    writeln!(buf, "s11,s22,s33")?;
    for p in &pts {
        writeln!(buf, "{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2])?;
    }
    run.write("surface.csv", &buf)?;
    println!("{} surface points", pts.len());
    run.note("points", json!(pts.len()));
    run.finish("trace")
}

pub fn verify(cfg: &RunConfig, mut run: Run) -> Result<(), CliError> {
    let report = verify::run_all(cfg.seed, cfg.verify.samples);
    for c in &report {
        println!("{} {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = report.iter().filter(|c| !c.passed).count();
    run.write("report.json", (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    run.note("failed", json!(failed));
    let total = report.len();
    run.finish("verify")?;
    if failed > 0 {
        return Err(CliError::Properties(failed, total));
    }
    Ok(())
}
