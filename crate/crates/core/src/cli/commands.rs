//! The `simulate`, `diagnose` and `rates` commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::coefficients::{self, CoefficientPlan};
use crate::error::{Error, Result};
use crate::grid::{self, make_dyadic_cubes, ScalarField};
use crate::io::{write_atomic, write_json};
use crate::poincare::{self, LanczosOptions};
use crate::rates::{self, FitOptions, TheoremId};
use crate::solver::{self, Solver, Trajectory};
use crate::weights;

pub const MANIFEST: &str = "manifest.json";
pub const LEDGER: &str = "ledger.csv";
const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub step: usize,
    pub time: f64,
}

/// Everything needed to reproduce and audit a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config: RunConfig,
    /// Step actually taken (the final time divided evenly).
    pub dt: f64,
    pub snapshots: Vec<SnapshotEntry>,
    /// SHA-256 of every other file in the run directory.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes a file into the run directory and records its hash.
struct RunDir {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl RunDir {
    fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(name), bytes)?;
        self.files.insert(name.to_string(), sha256(bytes));
        Ok(())
    }

    fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }
}

fn snapshot_bytes(f: &ScalarField) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    grid::write_snapshot(&mut buf, f)?;
    Ok(buf)
}

/// Runs the configured simulation into `out` and returns the manifest.
/// `base` resolves relative paths in the configuration.
pub fn simulate(config: &RunConfig, out: &Path, base: &Path) -> Result<Manifest> {
    config.validate()?;
    let grid = config.grid.build()?;
    let f0 = config.initial.build(&grid, config.seed, base)?;
    let mut solver = Solver::new(&grid, config.gamma, config.scheme.solver_config())?;
    let mut dir = RunDir::new(out)?;
    std::fs::create_dir_all(out.join(SNAPSHOT_DIR))?;
    let mut snapshots = Vec::new();
    let traj = solver::run(&mut solver, f0, config.t_final, config.snapshot_stride, |step, t, f| {
        let file = format!("{SNAPSHOT_DIR}/snap_{step:06}.llf");
        dir.put(&file, &snapshot_bytes(f)?)?;
        snapshots.push(SnapshotEntry { file, step, time: t });
        Ok(())
    })?;
    dir.put(LEDGER, solver::ledger_csv(&traj.ledger).as_bytes())?;
    let dt = traj.ledger.get(1).map(|r| r.dt).unwrap_or(0.0);
    diagnostics_after_run(config, &traj, dt, &mut dir)?;
    let manifest = Manifest {
        name: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        dt,
        snapshots,
        files: dir.files.clone(),
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

fn diagnostics_after_run(config: &RunConfig, traj: &Trajectory, dt: f64, dir: &mut RunDir) -> Result<()> {
    let last = traj.fields.last().expect("trajectory has the initial snapshot");
    let diag = &config.diagnostics;
    if let Some(w) = &diag.weights {
        dir.put_json("weights.json", &weight_reports(last, config.gamma, w.base_side, w.levels, w.p)?)?;
    }
    if let Some(p) = &diag.poincare {
        let (rep, csv) = poincare_reports(last, config.gamma, p.epsilons)?;
        dir.put_json("poincare.json", &rep)?;
        dir.put("lambda.csv", csv.as_bytes())?;
    }
    if let Some(r) = &diag.rates {
        if traj.times.len() >= rates::MIN_SAMPLES {
            for (name, bytes) in rate_files(traj, r.theorem, &r.radii, dt)? {
                dir.put(&name, &bytes)?;
            }
        }
    }
    if let Some(m) = &diag.moser {
        let rep = rates::moser_report(traj, m.n_max, m.radius)?;
        dir.put_json("moser.json", &rep)?;
        dir.put("moser.csv", rep.to_csv().as_bytes())?;
    }
    Ok(())
}

/// Diagnostic families available to `diagnose`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Weights,
    Poincare,
    Coefficients,
}

impl FromStr for Which {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" => Ok(Self::Weights),
            "poincare" => Ok(Self::Poincare),
            "coefficients" => Ok(Self::Coefficients),
            other => Err(Error::Config(format!(
                "unknown diagnostic `{other}` (expected weights, poincare or coefficients)"
            ))),
        }
    }
}

/// Weight constants of `a_{f,gamma}` and the doubling constant of `f`.
pub fn weight_reports(
    f: &ScalarField,
    gamma: f64,
    base_side: f64,
    levels: usize,
    p: f64,
) -> Result<Vec<weights::WeightReport>> {
    let grid = f.grid;
    let cubes = make_dyadic_cubes(&grid, base_side, levels)?;
    let a = coefficients::a_field(f, gamma)?;
    let h = coefficients::h_field(f, gamma)?;
    let mut out = vec![
        weights::ap_constant(&a, p, &cubes)?,
        weights::a1_constant(&a, &cubes)?,
    ];
    let d = grid.dim() as f64;
    // Any exponent below d/|2+gamma| is admissible; stay midway.
    let m = if gamma == -2.0 {
        2.0
    } else {
        (0.5 * (1.0 + d / (2.0 + gamma).abs())).min(2.0)
    };
    out.push(weights::reverse_holder(&a, m, &cubes)?);
    let radii: Vec<f64> = [0.25, 0.5, 0.75]
        .into_iter()
        .filter(|&r| r >= grid.spacing())
        .collect();
    let centers: Vec<Vec<f64>> = (0..grid.len())
        .step_by(7)
        .map(|i| grid.node_vec(i))
        .filter(|c| c.iter().map(|x| x * x).sum::<f64>() <= 9.0)
        .collect();
    out.push(weights::doubling_constant(f, &centers, &radii)?);
    let morrey = weights::morrey_values(&h, &a, &cubes, 1.0)?;
    let (at, value) = morrey
        .iter()
        .enumerate()
        .fold((None, f64::NEG_INFINITY), |(k, m), (i, &v)| if v > m { (Some(i), v) } else { (k, m) });
    out.push(weights::WeightReport {
        weight_id: "a".into(),
        cube_set: Some(weights::CubeSetSummary::of(&cubes)),
        constant_name: weights::ConstantName::Morrey,
        value,
        argmax_cube: at,
        parameters: weights::WeightParameters {
            s: Some(1.0),
            ..Default::default()
        },
        excluded: 0,
    });
    Ok(out)
}

/// Epsilon-Poincaré report and the `Lambda` curve as CSV.
pub fn poincare_reports(f: &ScalarField, gamma: f64, points: usize) -> Result<(crate::report::DiagnosticsReport, String)> {
    let plan = CoefficientPlan::new(&f.grid, gamma)?;
    let bundle = plan.bundle(f)?;
    let eps = poincare::default_epsilons(points.max(4));
    let opts = LanczosOptions::default();
    let (mut rep, plain, _) = poincare::eps_poincare_from_bundle(&bundle, &eps, &opts)?;
    let t = poincare::truncation_check(f, gamma, eps[0], &opts)?;
    rep.value("truncation_enlarged_half_extent", t.enlarged_half_extent)
        .value("truncation_lambda_enlarged", t.lambda_enlarged)
        .value("truncation_relative_change", t.relative_change);
    Ok((rep, plain.to_csv()))
}

fn rate_files(traj: &Trajectory, theorem: TheoremId, radii: &[f64], dt: f64) -> Result<Vec<(String, Vec<u8>)>> {
    let opts = FitOptions {
        dt,
        ..FitOptions::for_trajectory(traj)
    };
    let mut fits = Vec::new();
    let mut files = Vec::new();
    for &r in radii {
        let curve = rates::linf_history(traj, r)?;
        let fit = rates::fit_decay(traj, r, theorem, &opts)?;
        files.push((format!("linf_R{r}.csv"), curve.to_csv(Some(&fit)).into_bytes()));
        fits.push(fit);
    }
    let mut text = serde_json::to_string_pretty(&fits)?;
    text.push('\n');
    files.push(("rates.json".to_string(), text.into_bytes()));
    Ok(files)
}

/// A run directory (its last snapshot) or a bare snapshot file.
pub struct DiagnoseInput {
    pub field: ScalarField,
    pub gamma: Option<f64>,
    pub dir: PathBuf,
    pub config: Option<RunConfig>,
}

pub fn load_input(path: &Path) -> Result<DiagnoseInput> {
    if path.is_dir() {
        let manifest = Manifest::load(path)?;
        let last = manifest
            .snapshots
            .last()
            .ok_or_else(|| Error::Snapshot("run directory has no snapshots".into()))?;
        Ok(DiagnoseInput {
            field: grid::load_snapshot(&path.join(&last.file))?,
            gamma: Some(manifest.config.gamma),
            dir: path.to_path_buf(),
            config: Some(manifest.config),
        })
    } else {
        Ok(DiagnoseInput {
            field: grid::load_snapshot(path)?,
            gamma: None,
            dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            config: None,
        })
    }
}

/// Writes the requested reports into `out` and returns the file names.
pub fn diagnose(input: &DiagnoseInput, which: Which, gamma: Option<f64>, out: &Path) -> Result<Vec<String>> {
    let gamma = gamma
        .or(input.gamma)
        .ok_or_else(|| Error::Config("gamma: required for a bare snapshot (pass --gamma)".into()))?;
    let diag = input.config.as_ref().map(|c| c.diagnostics.clone()).unwrap_or_default();
    let f = &input.field;
    let mut written = Vec::new();
    match which {
        Which::Weights => {
            let w = diag.weights.unwrap_or_default();
            write_json(&out.join("weights.json"), &weight_reports(f, gamma, w.base_side, w.levels, w.p)?)?;
            written.push("weights.json".to_string());
        }
        Which::Poincare => {
            let p = diag.poincare.unwrap_or_default();
            let (rep, csv) = poincare_reports(f, gamma, p.epsilons)?;
            write_json(&out.join("poincare.json"), &rep)?;
            write_atomic(&out.join("lambda.csv"), csv.as_bytes())?;
            written.extend(["poincare.json".to_string(), "lambda.csv".to_string()]);
        }
        Which::Coefficients => {
            write_json(&out.join("coefficients.json"), &coefficients::comparability_report(f, gamma)?)?;
            written.push("coefficients.json".to_string());
        }
    }
    Ok(written)
}

/// Rebuilds the stored trajectory of a run directory.
pub fn load_trajectory(dir: &Path) -> Result<(Manifest, Trajectory)> {
    let manifest = Manifest::load(dir)?;
    let mut times = Vec::new();
    let mut fields = Vec::new();
    for s in &manifest.snapshots {
        times.push(s.time);
        fields.push(grid::load_snapshot(&dir.join(&s.file))?);
    }
    let traj = Trajectory {
        gamma: manifest.config.gamma,
        times,
        fields,
        ledger: Vec::new(),
    };
    Ok((manifest, traj))
}

/// Fits decay exponents for every radius and writes `rates.json` and one
/// CSV per radius into `out`.
pub fn rates_command(dir: &Path, theorem: TheoremId, radii: &[f64], out: &Path) -> Result<Vec<String>> {
    let (manifest, traj) = load_trajectory(dir)?;
    if traj.times.len() < rates::MIN_SAMPLES {
        return Err(Error::DegenerateWindow(format!(
            "{} snapshots stored, at least {} needed",
            traj.times.len(),
            rates::MIN_SAMPLES
        )));
    }
    let mut names = Vec::new();
    for (name, bytes) in rate_files(&traj, theorem, radii, manifest.dt)? {
        write_atomic(&out.join(&name), &bytes)?;
        names.push(name);
    }
    Ok(names)
}
