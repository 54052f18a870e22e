//! `run`, `report` and `plot`.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use anyhow::{anyhow, bail, Context, Result};

use tvop::analysis::{steady_state_mean, BoundReport};
use tvop::problems::{make_scenario, Family, ScenarioConfig};
use tvop::running::{execute, prepare, RunSettings};

use crate::records::{
    analyze, load_run, report_json, sha256_hex, write_csv, write_json, AbortInfo, Manifest, RunFiles, Status,
    TOOL_NAME, TOOL_VERSION,
};
use crate::svg::{color, log_chart, scatter_panels, Marker, Scatter, Series};

/// Sample indices of the localization snapshots.
pub const SNAPSHOT_STEPS: [usize; 6] = [2, 4, 6, 8, 32, 64];

/// One concrete run of a (possibly swept) config.
#[derive(Debug, Clone)]
pub struct Job {
    pub label: String,
    pub config: ScenarioConfig,
}

/// Parse `key=v1,v2,...`.
pub fn parse_sweep(arg: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = arg.split_once('=').ok_or_else(|| anyhow!("sweep '{arg}' is not key=v1,v2,..."))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if key.trim().is_empty() || values.is_empty() {
        bail!("sweep '{arg}' needs a key and at least one value");
    }
    Ok((key.trim().to_string(), values))
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_' | '=') { c } else { '_' })
        .collect()
}

/// Expand the sweeps of `cfg` (config section plus command line) into jobs,
/// validating every one before anything runs.
pub fn plan(base: &str, cfg: &ScenarioConfig, sweeps: &[(String, Vec<String>)], seed: Option<u64>) -> Result<Vec<Job>> {
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        cfg = cfg.with("seed", &s.to_string())?;
    }
    for (k, vs) in sweeps {
        cfg.add_sweep(k, vs.clone())?;
    }
    let mut jobs = vec![Job { label: sanitize(base), config: cfg.without_sweeps() }];
    for (key, values) in cfg.sweeps() {
        let mut next = Vec::with_capacity(jobs.len() * values.len());
        for job in &jobs {
            for v in values {
                next.push(Job {
                    label: format!("{}-{}={}", job.label, sanitize(key), sanitize(v)),
                    config: job.config.with(key, v)?,
                });
            }
        }
        jobs = next;
    }
    for job in &jobs {
        let stream = make_scenario(&job.config).with_context(|| format!("run {}", job.label))?;
        let settings = RunSettings::from_config(&job.config).with_context(|| format!("run {}", job.label))?;
        prepare(&stream, &settings).with_context(|| format!("run {}", job.label))?;
    }
    Ok(jobs)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub label: String,
    pub files: RunFiles,
    pub completed: bool,
    pub report: Option<BoundReport>,
    pub message: Option<String>,
}

impl RunOutcome {
    pub fn verdicts_hold(&self) -> bool {
        self.report.as_ref().is_some_and(BoundReport::all_hold)
    }
}

/// Execute one job and write its CSV, report and manifest. A run that
/// aborts still leaves its partial CSV and manifest behind.
pub fn run_job(job: &Job, out_dir: &Path) -> Result<RunOutcome> {
    let stream = make_scenario(&job.config)?;
    let settings = RunSettings::from_config(&job.config)?;
    let planned = prepare(&stream, &settings)?.steps;
    let record = execute(&stream, &settings)?;
    let files = RunFiles::new(out_dir, &job.label);
    let (report, analysis_error) = match analyze(&stream, &record) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    write_csv(&files.csv, &stream, &record, report.as_ref())?;
    if let Some(r) = &report {
        fs::write(&files.report, report_json(r)?).with_context(|| format!("writing {}", files.report.display()))?;
    }
    let text = job.config.to_text();
    let manifest = Manifest {
        tool: TOOL_NAME.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        label: job.label.clone(),
        config_sha256: sha256_hex(&text),
        config: text,
        seed: stream.seed(),
        algorithm: settings.algorithm,
        lambda: record.lambda.expect("set by execute"),
        admm_form: record.admm_form,
        steps_planned: planned,
        steps_completed: record.steps(),
        status: if record.aborted.is_some() { Status::Aborted } else { Status::Completed },
        abort: record.aborted.as_ref().map(|a| AbortInfo { step: a.step, error: a.error.to_string() }),
        csv: file_name(&files.csv),
        report: report.as_ref().map(|_| file_name(&files.report)),
    };
    write_json(&files.manifest, &manifest)?;
    let message = match (&record.aborted, analysis_error) {
        (Some(a), _) => Some(format!("aborted at step {}: {}", a.step, a.error)),
        (None, Some(e)) => Some(format!("analysis failed: {e}")),
        _ => None,
    };
    Ok(RunOutcome { label: job.label.clone(), files, completed: record.aborted.is_none(), report, message })
}

fn file_name(p: &Path) -> String {
    p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string()
}

/// Run every job concurrently.
pub fn run_all(jobs: &[Job], out_dir: &Path) -> Result<Vec<RunOutcome>> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    thread::scope(|scope| {
        let handles: Vec<_> = jobs.iter().map(|job| scope.spawn(move || run_job(job, out_dir))).collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| anyhow!("run thread panicked"))?)
            .collect()
    })
}

pub fn cmd_run(config: &Path, out_dir: &Path, sweeps: &[String], seed: Option<u64>) -> Result<Vec<RunOutcome>> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = ScenarioConfig::parse(&text).with_context(|| format!("in {}", config.display()))?;
    let sweeps = sweeps.iter().map(|s| parse_sweep(s)).collect::<Result<Vec<_>>>()?;
    let base = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let jobs = plan(base, &cfg, &sweeps, seed)?;
    run_all(&jobs, out_dir)
}

/// One line per verdict, two-space indented.
pub fn verdict_lines(report: &BoundReport) -> Vec<String> {
    report
        .verdicts
        .iter()
        .map(|v| {
            format!(
                "  {:<20} {:<8} worst margin {:+.3e} over {} points",
                v.name,
                if v.holds { "holds" } else { "VIOLATED" },
                v.worst_margin,
                v.checked
            )
        })
        .collect()
}

pub fn summary_lines(label: &str, report: &BoundReport) -> Vec<String> {
    let mut out = vec![format!(
        "{label}: final tracking error {:.3e}, steady-state mean {:.3e} (last 20%), δ̂ {:.3e}",
        report.tracking_error.last().copied().unwrap_or(f64::NAN),
        steady_state_mean(&report.tracking_error),
        report.variation.delta_hat
    )];
    out.extend(verdict_lines(report));
    out
}

/// Re-analysis of a stored run.
#[derive(Debug)]
pub struct ReportOutcome {
    pub label: String,
    pub report: BoundReport,
    /// `None` when no stored report exists.
    pub round_trip_identical: Option<bool>,
    pub completed: bool,
}

/// Re-analyze the run behind `path` from its CSV and manifest.
pub fn report_one(path: &Path) -> Result<ReportOutcome> {
    let loaded = load_run(path)?;
    let report = analyze(&loaded.stream, &loaded.record)?;
    let round_trip_identical = match &loaded.manifest.report {
        Some(name) => {
            let stored = fs::read_to_string(loaded.dir.join(name)).with_context(|| format!("reading {name}"))?;
            Some(stored == report_json(&report)?)
        }
        None => None,
    };
    Ok(ReportOutcome {
        label: loaded.manifest.label.clone(),
        report,
        round_trip_identical,
        completed: loaded.manifest.status == Status::Completed,
    })
}

pub fn cmd_report(files: &[PathBuf]) -> Result<Vec<ReportOutcome>> {
    if files.is_empty() {
        bail!("report needs at least one run file");
    }
    files.iter().map(|f| report_one(f).with_context(|| format!("{}", f.display()))).collect()
}

/// Write the tracking-error chart to `out` (plus localization snapshot
/// charts next to it). Returns every file written.
pub fn cmd_plot(files: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if files.is_empty() {
        bail!("plot needs at least one run file");
    }
    let mut series = Vec::new();
    let mut written = Vec::new();
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
    for (i, f) in files.iter().enumerate() {
        let loaded = load_run(f).with_context(|| format!("{}", f.display()))?;
        let label = loaded.manifest.label.clone();
        let k = loaded.table.column("k").expect("checked header");
        let xy = |name: &str| -> Vec<(f64, f64)> {
            let col = loaded.table.column(name).expect("checked header");
            k.iter().zip(col).filter_map(|(k, v)| Some(((*k)?, v?))).collect()
        };
        series.push(Series { label: label.clone(), points: xy("tracking_error"), color: color(i), dashed: false });
        let bound = xy("bound_tracking");
        if !bound.is_empty() {
            series.push(Series { label: format!("{label} bound"), points: bound, color: color(i), dashed: true });
        }
        if loaded.config.family()? == Family::LocalizationLite {
            let path = out.with_file_name(format!("{stem}-{label}-snapshots.svg"));
            fs::write(&path, snapshot_svg(&loaded)?).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
    }
    let svg = log_chart("Tracking error", "k", "tracking error", &series);
    fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
    written.insert(0, out.to_path_buf());
    Ok(written)
}

fn snapshot_svg(loaded: &crate::records::Loaded) -> Result<String> {
    let z = loaded
        .table
        .block("z")?
        .ok_or_else(|| anyhow!("localization CSV has no position columns"))?;
    let mut panels = Vec::new();
    let mut extent: f64 = 0.0;
    for &k in SNAPSHOT_STEPS.iter().filter(|&&k| k <= z.len()) {
        let inst = loaded.stream.sample(k)?;
        let snap = inst.snapshot.ok_or_else(|| anyhow!("sample {k} carries no snapshot"))?;
        let estimate: Vec<[f64; 2]> = z[k - 1].as_slice().chunks(2).map(|c| [c[0], c[1]]).collect();
        for p in snap.anchors.iter().chain(&snap.truth).chain(&estimate) {
            extent = extent.max(p[0].abs()).max(p[1].abs());
        }
        panels.push((
            format!("k = {k}"),
            vec![
                Scatter { label: "anchors".into(), points: snap.anchors, marker: Marker::Square, color: color(0) },
                Scatter { label: "true positions".into(), points: snap.truth, marker: Marker::Dot, color: color(2) },
                Scatter { label: "estimates".into(), points: estimate, marker: Marker::Cross, color: color(1) },
            ],
        ));
    }
    let r = (extent * 1.1).max(1e-3);
    Ok(scatter_panels(&format!("Positions, {}", loaded.manifest.label), &panels, -r, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_arguments() {
        let (k, v) = parse_sweep("omega=0, pi/200,pi/100").unwrap();
        assert_eq!(k, "omega");
        assert_eq!(v, vec!["0", "pi/200", "pi/100"]);
        assert!(parse_sweep("omega").is_err());
        assert!(parse_sweep("omega=").is_err());
    }

    #[test]
    fn plan_expands_the_product_and_validates() {
        let cfg = ScenarioConfig::parse("[scenario]\nfamily = moving_quadratic\nhorizon = 5\n[sweep]\ndrift = 0.01, 0.02\n").unwrap();
        let jobs = plan("mq", &cfg, &[("n".into(), vec!["2".into(), "3".into()])], Some(9)).unwrap();
        assert_eq!(jobs.len(), 4);
        assert_eq!(jobs[0].label, "mq-drift=0.01-n=2");
        assert!(jobs.iter().all(|j| j.config.get("seed") == Some("9") && j.config.sweeps().is_empty()));
        assert!(plan("mq", &cfg, &[("lambda".into(), vec!["5".into()])], None).is_err());
        assert!(plan("mq", &cfg, &[("nonsense".into(), vec!["1".into()])], None).is_err());
    }

    #[test]
    fn labels_are_file_safe() {
        assert_eq!(sanitize("pi/200"), "pi_200");
    }
}
