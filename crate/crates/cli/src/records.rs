//! On-disk run records: trajectory CSV, manifest JSON and report JSON.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tvop::analysis::{measure_and_verify, BoundReport};
use tvop::operators::ResidualPair;
use tvop::oracle::{solution_trajectory, OracleSpec};
use tvop::problems::{make_scenario, Algorithm, ProblemStream, ScenarioConfig};
use tvop::running::{step_metadata, AdmmForm, RunRecord, RunSettings};
use tvop::Vector;

pub const TOOL_NAME: &str = "tvop";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub step: usize,
    pub error: String,
}

/// Everything needed to regenerate a run from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub label: String,
    /// Canonical config text of this run (sweeps resolved).
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub admm_form: Option<AdmmForm>,
    pub steps_planned: usize,
    pub steps_completed: usize,
    pub status: Status,
    pub abort: Option<AbortInfo>,
    /// File names relative to the manifest.
    pub csv: String,
    pub report: Option<String>,
}

impl Manifest {
    pub fn config(&self) -> Result<ScenarioConfig> {
        if sha256_hex(&self.config) != self.config_sha256 {
            bail!("config hash mismatch in manifest '{}'", self.label);
        }
        Ok(ScenarioConfig::parse(&self.config)?)
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// File names of the three outputs for a run label.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub report: PathBuf,
}

impl RunFiles {
    pub fn new(dir: &Path, label: &str) -> Self {
        Self {
            csv: dir.join(format!("{label}.csv")),
            manifest: dir.join(format!("{label}.manifest.json")),
            report: dir.join(format!("{label}.report.json")),
        }
    }
}

/// Locate the manifest for a CSV, manifest or report path.
pub fn manifest_path(path: &Path) -> Result<PathBuf> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| anyhow!("bad path {}", path.display()))?;
    let stem = [".manifest.json", ".report.json", ".csv"]
        .iter()
        .find_map(|ext| name.strip_suffix(ext))
        .ok_or_else(|| anyhow!("{} is not a run file (.csv, .manifest.json, .report.json)", path.display()))?;
    Ok(path.with_file_name(format!("{stem}.manifest.json")))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn report_json(report: &BoundReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// Solve the oracle and compare the record against every bound.
pub fn analyze(stream: &ProblemStream, record: &RunRecord) -> Result<BoundReport> {
    let spec = OracleSpec::for_record(record)?;
    let oracle = solution_trajectory(stream, &spec, record.states.len())?;
    Ok(measure_and_verify(stream, record, &oracle)?)
}

// ---- CSV ----

const TAIL_COLUMNS: [&str; 6] =
    ["t_residual", "g_residual", "tracking_error", "objective_gap", "bound_tracking", "bound_fpr_avg"];

fn fmt(v: f64) -> String {
    // shortest representation that parses back to the same bits
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Iterate blocks written for a record, as `(prefix, vectors)`.
fn blocks(record: &RunRecord) -> Vec<(&'static str, &[Vector])> {
    let mut out: Vec<(&'static str, &[Vector])> = vec![("s", &record.states)];
    let primal_is_state = record.algorithm.is_some_and(|a| a.is_primal());
    if !primal_is_state {
        out.push(("x", &record.primal));
    }
    if let Some(z) = &record.auxiliary {
        out.push(("z", z));
    }
    let dual_is_state = matches!(
        record.algorithm,
        Some(Algorithm::DualAscentInequality | Algorithm::DualAscentEquality)
    );
    if let (Some(p), false) = (&record.dual, dual_is_state) {
        out.push(("p", p));
    }
    if let Some(nu) = &record.multiplier {
        out.push(("nu", nu));
    }
    out
}

/// One row per sample `k = 1..=T+1`; per-step columns are blank in the last row.
pub fn write_csv(path: &Path, stream: &ProblemStream, record: &RunRecord, report: Option<&BoundReport>) -> Result<()> {
    let blocks = blocks(record);
    let mut header = vec!["k".to_string(), "t_k".to_string()];
    for (prefix, vs) in &blocks {
        header.extend((1..=vs[0].len()).map(|i| format!("{prefix}_{i}")));
    }
    header.extend(TAIL_COLUMNS.iter().map(|s| s.to_string()));
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(&header)?;
    let samples = record.states.len();
    for i in 0..samples {
        let k = i + 1;
        let mut row = vec![k.to_string(), fmt(stream.sample(k)?.t)];
        for (_, vs) in &blocks {
            row.extend(vs[i].iter().map(|v| fmt(*v)));
        }
        let res = record.residuals.get(i);
        row.push(opt(res.map(|r| r.t_residual)));
        row.push(opt(res.map(|r| r.g_residual)));
        row.push(opt(report.map(|r| r.tracking_error[i])));
        row.push(opt(report.and_then(|r| r.objective_gap.as_ref()).map(|g| g[i])));
        row.push(opt(report.and_then(|r| r.bound_tracking.as_ref()).map(|b| b.curve[i])));
        row.push(opt(report.and_then(|r| r.bound_fpr_image.as_ref()).and_then(|b| b.curve.get(i).copied())));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed trajectory CSV.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("k") || !header.ends_with(&TAIL_COLUMNS.map(String::from)) {
            bail!("{}: not a trajectory CSV", path.display());
        }
        let mut rows = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec.with_context(|| format!("{}: row {}", path.display(), n + 1))?;
            if rec.len() != header.len() {
                bail!("{}: row {} has {} fields, expected {}", path.display(), n + 1, rec.len(), header.len());
            }
            let row = rec
                .iter()
                .map(|f| if f.is_empty() { Ok(None) } else { f.parse::<f64>().map(Some) })
                .collect::<std::result::Result<Vec<_>, _>>()
                .with_context(|| format!("{}: row {}", path.display(), n + 1))?;
            rows.push(row);
        }
        if rows.is_empty() {
            bail!("{}: no rows", path.display());
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Vectors of a block such as `s` or `z`, one per row.
    pub fn block(&self, prefix: &str) -> Result<Option<Vec<Vector>>> {
        let cols: Vec<usize> = self
            .header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.strip_prefix(prefix).and_then(|r| r.strip_prefix('_')).is_some_and(|i| i.parse::<usize>().is_ok()))
            .map(|(i, _)| i)
            .collect();
        if cols.is_empty() {
            return Ok(None);
        }
        self.rows
            .iter()
            .enumerate()
            .map(|(n, r)| {
                let vals = cols
                    .iter()
                    .map(|&c| r[c].ok_or_else(|| anyhow!("row {}: missing {prefix} component", n + 1)))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Vector::from_vec(vals))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// A run loaded back from disk.
pub struct Loaded {
    pub manifest: Manifest,
    pub config: ScenarioConfig,
    pub stream: ProblemStream,
    pub table: Table,
    pub record: RunRecord,
    pub dir: PathBuf,
}

/// Rebuild the record of a run from its CSV and manifest. Declared operator
/// constants are recomputed from the config.
pub fn load_run(path: &Path) -> Result<Loaded> {
    let mpath = manifest_path(path)?;
    let manifest = read_manifest(&mpath)?;
    let dir = mpath.parent().map(Path::to_path_buf).unwrap_or_default();
    let config = manifest.config()?;
    let stream = make_scenario(&config)?;
    let settings = RunSettings::from_config(&config)?;
    let table = Table::read(&dir.join(&manifest.csv))?;
    let states = table.block("s")?.ok_or_else(|| anyhow!("CSV has no state columns"))?;
    let steps = states.len() - 1;
    if steps != manifest.steps_completed {
        bail!("CSV has {} rows but the manifest records {} steps", states.len(), manifest.steps_completed);
    }
    let t = table.column("t_residual").expect("checked header");
    let g = table.column("g_residual").expect("checked header");
    let residuals = (0..steps)
        .map(|i| match (t[i], g[i]) {
            (Some(t_residual), Some(g_residual)) => Ok(ResidualPair { g_residual, t_residual }),
            _ => Err(anyhow!("row {}: missing residual", i + 1)),
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = step_metadata(&stream, &settings, &states[0], steps)?;
    let algorithm = settings.algorithm;
    let primal = table.block("x")?.unwrap_or_else(|| states.clone());
    let dual = match table.block("p")? {
        Some(p) => Some(p),
        None if matches!(algorithm, Algorithm::DualAscentInequality | Algorithm::DualAscentEquality) => {
            Some(states.clone())
        }
        None => None,
    };
    let record = RunRecord {
        stream: stream.name().to_string(),
        seed: stream.seed(),
        algorithm: Some(algorithm),
        lambda: Some(manifest.lambda),
        admm_form: manifest.admm_form,
        bound: settings.bound.set(states[0].len())?,
        primal,
        auxiliary: table.block("z")?,
        dual,
        multiplier: table.block("nu")?,
        residuals,
        alphas: meta.iter().map(|m| m.alpha).collect(),
        contractions: meta.iter().map(|m| m.contraction).collect(),
        image_bounds: meta.iter().map(|m| m.image_bound).collect(),
        wall_times: Vec::new(),
        states,
        aborted: None,
    };
    Ok(Loaded { manifest, config, stream, table, record, dir })
}
