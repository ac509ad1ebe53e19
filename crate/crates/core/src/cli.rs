//! Commands behind the `mrplab` binary. Each returns the process exit code.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Deserialize;

use crate::construction::{child_seed, rng_from_seed, sample_counting_path, simulate_ensemble, MrpModel};
use crate::counting::validate_counting_axioms;
use crate::error::{Error, Result};
use crate::exact::{count_pmf, joint_interarrival_probability, BoxQuery, ExactValue};
use crate::kernels;
use crate::model_file::{parse_json, ModelFile};
use crate::quadrature::QuadratureConfig;
use crate::report::{Component, Rule, VerificationReport};
use crate::stats::{self, ExchangeabilityOptions, MixedPoissonOptions};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_ACCURACY: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Capacity { .. } => EXIT_CAPACITY,
        Error::Accuracy { .. } => EXIT_ACCURACY,
        _ => EXIT_USAGE,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))
}

/// Writes via a temporary file in the target directory and renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Ingestion(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(ModelFile, MrpModel)> {
    let file = ModelFile::parse(&read(path)?).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let model = file.build()?;
    Ok((file, model))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Simulates an ensemble; writes the CSV to `out` and a manifest next to it.
pub fn cmd_simulate(model_path: &Path, n_paths: usize, n_events: usize, seed: u64, out: &Path) -> Result<i32> {
    let (file, model) = load_model(model_path)?;
    let ensemble = simulate_ensemble(&model, n_paths, n_events, seed)?;
    let mut csv = Vec::new();
    ensemble
        .write_csv(&mut csv)
        .map_err(|e| Error::Ingestion(e.to_string()))?;
    write_atomic(out, &csv)?;
    let mut manifest = ensemble.manifest(&model);
    manifest["meta"] = serde_json::to_value(&file.meta).expect("meta serializes");
    manifest["generated_at_unix"] = serde_json::json!(unix_now());
    write_atomic(&manifest_path(out), serde_json::to_string_pretty(&manifest).expect("json").as_bytes())?;
    Ok(EXIT_PASS)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountQuery {
    t: f64,
    n: usize,
}

/// One entry of a queries file. Exactly one of `box`, `cdf`, `count_pmf`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryItem {
    #[serde(default)]
    id: Option<String>,
    #[serde(rename = "box", default)]
    bounds: Option<Vec<(Option<f64>, Option<f64>)>>,
    #[serde(default)]
    cdf: Option<Vec<f64>>,
    #[serde(default)]
    count_pmf: Option<CountQuery>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Box(BoxQuery),
    CountPmf { t: f64, n: usize },
}

/// Parses a queries file into `(id, query)` pairs. Missing ids default to
/// the 0-based position.
pub fn parse_queries(text: &str) -> Result<Vec<(String, Query)>> {
    let items: Vec<QueryItem> = parse_json(text, "queries file")?;
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let id = item.id.unwrap_or_else(|| i.to_string());
            let q = match (item.bounds, item.cdf, item.count_pmf) {
                (Some(b), None, None) => Query::Box(BoxQuery::new(
                    b.into_iter()
                        .map(|(lo, hi)| (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)))
                        .collect(),
                )?),
                (None, Some(w), None) => {
                    let q = BoxQuery::upper(&w);
                    q.validate()?;
                    Query::Box(q)
                }
                (None, None, Some(c)) => Query::CountPmf { t: c.t, n: c.n },
                _ => return Err(Error::Config(format!("query {id}: give exactly one of `box`, `cdf`, `count_pmf`"))),
            };
            Ok((id, q))
        })
        .collect()
}

pub fn evaluate_query(model: &MrpModel, query: &Query, cfg: &QuadratureConfig) -> Result<ExactValue> {
    match query {
        Query::Box(b) => joint_interarrival_probability(model, b, cfg),
        Query::CountPmf { t, n } => count_pmf(model, *t, *n, cfg),
    }
}

fn config_with_tol(tol: Option<f64>) -> Result<QuadratureConfig> {
    let mut cfg = QuadratureConfig::default();
    if let Some(t) = tol {
        cfg.abs_tol = t;
        cfg.rel_tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Evaluates every query; results CSV has `query_id, probability,
/// error_estimate, method`. Unconverged rows keep their best estimate,
/// are marked `unconverged`, and make the exit code 4.
pub fn cmd_exact(model_path: &Path, queries_path: &Path, out: &Path, tol: Option<f64>) -> Result<i32> {
    let (_, model) = load_model(model_path)?;
    let queries = parse_queries(&read(queries_path)?)?;
    let cfg = config_with_tol(tol)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Ingestion(e.to_string());
    w.write_record(["query_id", "probability", "error_estimate", "method"]).map_err(csv_err)?;
    let mut code = EXIT_PASS;
    for (id, q) in &queries {
        match evaluate_query(&model, q, &cfg) {
            Ok(v) => w
                .write_record([id.as_str(), &v.probability.to_string(), &v.error.to_string(), v.method.as_str()])
                .map_err(csv_err)?,
            Err(Error::Accuracy { estimate, error_estimate, .. }) => {
                code = EXIT_ACCURACY;
                w.write_record([id.as_str(), &estimate.to_string(), &error_estimate.to_string(), "unconverged"])
                    .map_err(csv_err)?;
            }
            Err(e) => return Err(e),
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Ingestion(e.to_string()))?;
    write_atomic(out, &bytes)?;
    Ok(code)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Exchangeability,
    ConditionalIid,
    McVsExact,
    MixedPoisson,
    CountingAxioms,
    All,
}

impl Suite {
    pub const EACH: [Suite; 5] = [
        Suite::Exchangeability,
        Suite::ConditionalIid,
        Suite::McVsExact,
        Suite::MixedPoisson,
        Suite::CountingAxioms,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Suite::Exchangeability => "exchangeability",
            Suite::ConditionalIid => "conditional-iid",
            Suite::McVsExact => "mc-vs-exact",
            Suite::MixedPoisson => "mixed-poisson",
            Suite::CountingAxioms => "counting-axioms",
            Suite::All => "all",
        }
    }

    fn expand(self) -> Vec<Suite> {
        if self == Suite::All {
            Self::EACH.to_vec()
        } else {
            vec![self]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub paths: usize,
    pub events: usize,
    pub level: f64,
    pub queries: Option<PathBuf>,
    pub tol: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            paths: 20_000,
            events: 2,
            level: 0.01,
            queries: None,
            tol: None,
        }
    }
}

const COUNTING_PATHS: usize = 50;
const COUNTING_GRID: usize = 200;
const MIXED_POISSON_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

/// Runs the selected checks and writes a combined JSON report to `out`.
/// Exit 0 iff every check that ran passed; unsupported checks are skipped.
pub fn cmd_verify(model_path: &Path, suite: Suite, seed: u64, out: &Path, opts: &VerifyOptions) -> Result<i32> {
    let (file, model) = load_model(model_path)?;
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::domain("level", opts.level, "level must lie in (0, 1)"));
    }
    let queries = match &opts.queries {
        Some(p) => Some(parse_queries(&read(p)?)?),
        None => None,
    };
    let cfg = config_with_tol(opts.tol)?;

    let mut results = Vec::new();
    let mut code = EXIT_PASS;
    for (i, s) in suite.expand().into_iter().enumerate() {
        let sub_seed = child_seed(seed, i as u64);
        let outcome = run_suite(s, &model, sub_seed, opts, queries.as_deref(), &cfg);
        let entry = match outcome {
            Ok(report) => {
                if !report.passed && code == EXIT_PASS {
                    code = EXIT_REJECT;
                }
                serde_json::json!({
                    "suite": s.tag(),
                    "status": if report.passed { "passed" } else { "failed" },
                    "report": report,
                })
            }
            Err(Error::Unsupported(reason)) => serde_json::json!({"suite": s.tag(), "status": "skipped", "reason": reason}),
            Err(e) => {
                let c = exit_code(&e);
                if code == EXIT_PASS || code == EXIT_REJECT {
                    code = c;
                }
                serde_json::json!({"suite": s.tag(), "status": "error", "reason": e.to_string(), "exit_code": c})
            }
        };
        results.push(entry);
    }
    let doc = serde_json::json!({
        "schema_version": crate::report::REPORT_SCHEMA_VERSION,
        "model": file.meta.name,
        "model_hash": model.hash(),
        "expected_rejection": file.meta.expects_rejection,
        "suite": suite.tag(),
        "seed": seed,
        "level": opts.level,
        "passed": code == EXIT_PASS,
        "exit_code": code,
        "results": results,
    });
    write_atomic(out, serde_json::to_string_pretty(&doc).expect("json").as_bytes())?;
    Ok(code)
}

fn run_suite(
    suite: Suite,
    model: &MrpModel,
    seed: u64,
    opts: &VerifyOptions,
    queries: Option<&[(String, Query)]>,
    cfg: &QuadratureConfig,
) -> Result<VerificationReport> {
    match suite {
        Suite::Exchangeability => {
            let r = opts.events.clamp(2, 4);
            let ens = simulate_ensemble(model, opts.paths, r, seed)?;
            let eo = ExchangeabilityOptions {
                r,
                level: opts.level,
                seed: child_seed(seed, u64::MAX),
                ..Default::default()
            };
            stats::exchangeability_test(&ens, &eo)
        }
        Suite::ConditionalIid => {
            let theta = model.mixing.mean();
            let mut rep = stats::conditional_iid_test(model, &theta, opts.paths, opts.events.max(2), opts.level, seed)?;
            rep.caveat(format!("theta fixed at the mixing mean {theta:?}"));
            Ok(rep)
        }
        Suite::McVsExact => {
            let boxes: Vec<BoxQuery> = match queries {
                Some(qs) => qs
                    .iter()
                    .filter_map(|(_, q)| match q {
                        Query::Box(b) => Some(b.clone()),
                        Query::CountPmf { .. } => None,
                    })
                    .collect(),
                None => default_boxes(),
            };
            if boxes.is_empty() {
                return Err(Error::Config("no box queries for mc-vs-exact".into()));
            }
            let exact = boxes
                .iter()
                .map(|b| joint_interarrival_probability(model, b, cfg).map(|v| v.probability))
                .collect::<Result<Vec<_>>>()?;
            let r = boxes.iter().map(BoxQuery::dimension).max().unwrap_or(1);
            let ens = simulate_ensemble(model, opts.paths, r, seed)?;
            stats::mc_vs_exact(&ens, &boxes, &exact)
        }
        Suite::MixedPoisson => {
            let mo = MixedPoissonOptions {
                t_grid: MIXED_POISSON_TIMES.to_vec(),
                h: 1.0,
                n_paths: opts.paths,
                level: opts.level,
                seed,
            };
            stats::mixed_poisson_check(model, &mo, cfg)
        }
        Suite::CountingAxioms => counting_axioms_suite(model, seed),
        Suite::All => unreachable!("expanded before dispatch"),
    }
}

fn default_boxes() -> Vec<BoxQuery> {
    vec![
        BoxQuery::upper(&[1.0]),
        BoxQuery::upper(&[2.0, 1.0]),
        BoxQuery::upper(&[1.0, 2.0]),
        BoxQuery {
            bounds: vec![(0.25, 1.5), (0.5, 3.0)],
        },
    ]
}

/// Simulated counting paths sampled on a grid that includes every event
/// time, each run through the axiom validator.
fn counting_axioms_suite(model: &MrpModel, seed: u64) -> Result<VerificationReport> {
    let theta = model.mixing.mean();
    let mean = kernels::kernel_mean(&model.kernel, 1, &theta)?;
    let horizon = 20.0 * mean;
    let mut report = VerificationReport::new("counting_axioms");
    report.seeds.push(seed);
    report.size("paths", COUNTING_PATHS as u64);
    let mut violations = 0u64;
    let mut max_n = 0.0f64;
    for i in 0..COUNTING_PATHS {
        let mut rng = rng_from_seed(child_seed(seed, i as u64));
        let (_, path) = sample_counting_path(model, horizon, 1_000_000, &mut rng)?;
        let mut ts: Vec<f64> = (0..=COUNTING_GRID).map(|j| horizon * j as f64 / COUNTING_GRID as f64).collect();
        ts.extend_from_slice(path.event_times());
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let samples = ts
            .iter()
            .map(|&t| path.count_at(t).map(|n| (t, n as f64)))
            .collect::<Result<Vec<_>>>()?;
        let rep = validate_counting_axioms(&samples)?;
        if !rep.passed {
            violations += 1;
        }
        max_n = max_n.max(samples.last().map_or(0.0, |s| s.1));
    }
    report.push(Component::new("paths_with_violations", violations as f64, None, Rule::StatisticAtMost { bound: 0.0 }));
    report.push(
        Component::new("max_count_observed", max_n, None, Rule::Informational)
            .with_note("sup N_t = infinity cannot be falsified on a finite horizon"),
    );
    report.statistic = violations as f64;
    Ok(report)
}

/// Reads `t,N` samples (header required) and validates the counting axioms.
pub fn cmd_check_counts(input: &Path, out: &Path) -> Result<i32> {
    let samples = read_counts_csv(&read(input)?)?;
    let report = validate_counting_axioms(&samples)?;
    write_atomic(out, report.to_json().as_bytes())?;
    Ok(if report.passed { EXIT_PASS } else { EXIT_REJECT })
}

pub fn read_counts_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Ingestion(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingestion(format!("missing column `{name}` in header")))
    };
    let (ti, ni) = (col("t")?, col("N")?);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Ingestion(e.to_string()))?;
        let field = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .map_err(|_| Error::Ingestion(format!("row {}: `{s}` is not a number", line + 2)))
        };
        out.push((field(ti)?, field(ni)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries_parse() {
        let q = parse_queries(
            r#"[{"id": "a", "box": [[null, 2.0], [0.5, null]]},
                {"cdf": [1.0, 2.0]},
                {"count_pmf": {"t": 1.5, "n": 0}}]"#,
        )
        .unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(q[0].0, "a");
        assert_eq!(q[1].0, "1");
        assert_eq!(
            q[0].1,
            Query::Box(BoxQuery {
                bounds: vec![(f64::NEG_INFINITY, 2.0), (0.5, f64::INFINITY)]
            })
        );
        assert_eq!(q[2].1, Query::CountPmf { t: 1.5, n: 0 });
        assert!(parse_queries("[]").unwrap().is_empty());
    }

    #[test]
    fn ambiguous_query_rejected() {
        assert!(parse_queries(r#"[{"cdf": [1.0], "count_pmf": {"t": 1, "n": 0}}]"#).is_err());
        assert!(parse_queries(r#"[{}]"#).is_err());
        assert!(parse_queries(r#"[{"box": [[2.0, 1.0]]}]"#).is_err());
        assert!(parse_queries(r#"[{"cdf": [1.0], "weight": 2}]"#).is_err());
    }

    #[test]
    fn counts_csv() {
        let s = read_counts_csv("t, N\n0,0\n1.5,1\n").unwrap();
        assert_eq!(s, vec![(0.0, 0.0), (1.5, 1.0)]);
        assert!(read_counts_csv("time,N\n0,0\n").is_err());
        assert!(read_counts_csv("t,N\n0,x\n").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Capacity { requested: 2, limit: 1 }), EXIT_CAPACITY);
        assert_eq!(
            exit_code(&Error::Accuracy {
                estimate: 0.0,
                error_estimate: 1.0,
                tolerance: 0.1
            }),
            EXIT_ACCURACY
        );
        assert_eq!(exit_code(&Error::Config(String::new())), EXIT_USAGE);
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/ens.csv")), PathBuf::from("out/ens.csv.manifest.json"));
    }
}
