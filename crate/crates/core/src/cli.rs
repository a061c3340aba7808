//! Batch runner behind the `kpv` binary: parses a command line into an
//! [`ExperimentSpec`], runs it, and writes one report atomically.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{
    kp_threshold, verify_capoyleas_pach, verify_csikos, verify_lift_identity, verify_ww_proposition, FitWindow,
    ThresholdGrid, VerificationReport,
};
use crate::ball_volumes::{mc_ball_volumes, BallSystem, BallSystemProfile};
use crate::configurations::{is_expansion, random_expansion, PointConfiguration, DEFAULT_LENGTH_TOL};
use crate::error::{KpvError, Result};
use crate::meanwidth::{mean_width, mean_width_quadrature};
use crate::polyhedra::PolyhedralSet;
use crate::truncated_volume::{check_ww_lemma, ProfileOptions, DEFAULT_FIT_TERMS};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_NUMERICAL_ERROR: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Meanwidth,
    Volume,
    Boundary,
    Asymptotics,
    Verify,
    Threshold,
    Generate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    CapoyleasPach,
    Csikos,
    WwProposition,
    WwLemma,
    LiftIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    VoronoiOde,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Command-line grammar.
#[derive(Debug, Clone, Parser)]
#[command(name = "kpv", version, about = "Volumes of unions and intersections of balls")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Which check to run (verify only).
    #[arg(value_enum)]
    pub check: Option<Check>,
    /// Point configuration (or, for verify ww-lemma, polyhedral set) files.
    #[arg(long = "config")]
    pub config: Vec<PathBuf>,
    #[arg(long, conflicts_with = "r_grid")]
    pub r: Option<f64>,
    /// Geometric radius grid MIN:MAX:COUNT.
    #[arg(long = "r-grid")]
    pub r_grid: Option<String>,
    #[arg(long, value_enum, default_value = "voronoi-ode")]
    pub method: Method,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the pass tolerance of every verification record.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Perturbation size for generate.
    #[arg(long, default_value_t = 0.1)]
    pub magnitude: f64,
    /// Base point for verify ww-lemma, comma separated.
    #[arg(long)]
    pub p0: Option<String>,
    /// Output file (generate: file prefix). Standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

/// A fully resolved run request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub command: Command,
    pub check: Option<Check>,
    pub inputs: Vec<PathBuf>,
    pub parameters: BTreeMap<String, Value>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

fn parse_grid(text: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || KpvError::InvalidParameter(format!("--r-grid expects MIN:MAX:COUNT, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(bad());
    }
    Ok((lo, hi, count))
}

impl ExperimentSpec {
    /// Resolves defaults so the parameter block alone replays the run.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut params = BTreeMap::new();
        if let Some(r) = cli.r {
            params.insert("r".into(), json!(r));
        }
        if let Some(grid) = &cli.r_grid {
            let (lo, hi, count) = parse_grid(grid)?;
            params.insert("r_grid".into(), json!({"min": lo, "max": hi, "count": count}));
        }
        params.insert("seed".into(), json!(cli.seed));
        match cli.command {
            Command::Volume | Command::Boundary => {
                params.insert("method".into(), json!(cli.method));
                if cli.method == Method::MonteCarlo {
                    params.insert("samples".into(), json!(cli.samples.unwrap_or(1_000_000)));
                }
            }
            Command::Meanwidth => {
                params.insert("samples".into(), json!(cli.samples.unwrap_or(1_000_000)));
            }
            Command::Verify if cli.check == Some(Check::LiftIdentity) => {
                params.insert("samples".into(), json!(cli.samples.unwrap_or(10_000_000)));
            }
            Command::Generate => {
                params.insert("magnitude".into(), json!(cli.magnitude));
            }
            _ => {}
        }
        if let Some(t) = cli.tol {
            params.insert("tolerance".into(), json!(t));
        }
        if let Some(p0) = &cli.p0 {
            let coords: Vec<f64> = p0
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| KpvError::InvalidParameter(format!("--p0 expects comma-separated numbers, got {p0:?}")))?;
            params.insert("p0".into(), json!(coords));
        }
        if cli.command == Command::Verify && cli.check.is_none() {
            return Err(KpvError::InvalidParameter(
                "verify needs a check: capoyleas-pach, csikos, ww-proposition, ww-lemma or lift-identity".into(),
            ));
        }
        Ok(Self {
            command: cli.command,
            check: cli.check,
            inputs: cli.config.clone(),
            parameters: params,
            output: cli.out.clone(),
            format: cli.format,
        })
    }

    fn f64_param(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).and_then(Value::as_f64)
    }

    fn u64_param(&self, key: &str) -> Option<u64> {
        self.parameters.get(key).and_then(Value::as_u64)
    }

    fn radii(&self) -> Result<Vec<f64>> {
        if let Some(r) = self.f64_param("r") {
            if !(r > 0.0) {
                return Err(KpvError::InvalidParameter(format!("--r must be positive, got {r}")));
            }
            return Ok(vec![r]);
        }
        match self.parameters.get("r_grid") {
            Some(g) => {
                let lo = g["min"].as_f64().unwrap_or(1.0);
                let hi = g["max"].as_f64().unwrap_or(1.0);
                let count = g["count"].as_u64().unwrap_or(1) as usize;
                if count == 1 || hi == lo {
                    return Ok(vec![lo]);
                }
                Ok(FitWindow { r_min: lo, r_max: hi, count }.radii())
            }
            None => Err(KpvError::InvalidParameter("give --r or --r-grid".into())),
        }
    }

    fn window(&self) -> Option<FitWindow> {
        self.parameters.get("r_grid").map(|g| FitWindow {
            r_min: g["min"].as_f64().unwrap_or(1.0),
            r_max: g["max"].as_f64().unwrap_or(1.0),
            count: g["count"].as_u64().unwrap_or(1) as usize,
        })
    }

    fn config(&self, k: usize) -> Result<PointConfiguration> {
        let path = self.inputs.get(k).ok_or_else(|| {
            KpvError::InvalidParameter(format!("{:?} needs at least {} --config file(s)", self.command, k + 1))
        })?;
        read_json(path)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(num) if num.is_f64() => {
            json!(round12(num.as_f64().expect("f64 number")))
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// What a command produced: a JSON result, table rows for CSV, and
/// whether every verification it ran passed.
struct Outcome {
    result: Value,
    header: Vec<String>,
    rows: Vec<Vec<Value>>,
    passed: bool,
}

fn records_outcome(reports: &[VerificationReport], tol: Option<f64>) -> Result<Outcome> {
    let mut reports = reports.to_vec();
    if let Some(t) = tol {
        for rec in reports.iter_mut().flat_map(|r| r.records.iter_mut()) {
            rec.tolerance = t;
            rec.pass = rec.gap <= t;
        }
    }
    let passed = reports.iter().all(VerificationReport::passed);
    let rows = reports
        .iter()
        .flat_map(|rep| {
            rep.records.iter().map(move |r| {
                vec![
                    json!(rep.check),
                    json!(r.claim),
                    json!(r.lhs),
                    json!(r.rhs),
                    json!(r.gap),
                    json!(r.tolerance),
                    json!(r.pass),
                ]
            })
        })
        .collect();
    Ok(Outcome {
        result: serde_json::to_value(&reports)?,
        header: ["check", "claim", "lhs", "rhs", "gap", "tolerance", "pass"].map(String::from).to_vec(),
        rows,
        passed,
    })
}

fn table_outcome(header: &[&str], rows: Vec<Vec<Value>>) -> Outcome {
    let result = Value::Array(
        rows.iter()
            .map(|row| Value::Object(header.iter().map(|h| h.to_string()).zip(row.iter().cloned()).collect()))
            .collect(),
    );
    Outcome {
        result,
        header: header.iter().map(|h| h.to_string()).collect(),
        rows,
        passed: true,
    }
}

fn run_volume(spec: &ExperimentSpec, boundary: bool) -> Result<Outcome> {
    let p = spec.config(0)?;
    let radii = spec.radii()?;
    let seed = spec.u64_param("seed").unwrap_or(0);
    let method = spec.parameters.get("method").and_then(Value::as_str).unwrap_or("voronoi_ode");
    if method == "monte_carlo" {
        if boundary {
            return Err(KpvError::InvalidParameter(
                "boundary volumes need --method voronoi-ode".into(),
            ));
        }
        let samples = spec.u64_param("samples").unwrap_or(1_000_000);
        let mut rows = Vec::new();
        for (k, &r) in radii.iter().enumerate() {
            let (u, i) = mc_ball_volumes(&p, r, samples, seed.wrapping_add(k as u64))?;
            rows.push(vec![json!(r), json!(u.estimate), json!(u.stderr), json!(i.estimate), json!(i.stderr)]);
        }
        return Ok(table_outcome(
            &["r", "union_volume", "union_stderr", "intersection_volume", "intersection_stderr"],
            rows,
        ));
    }
    let top = radii.iter().copied().fold(0.0, f64::max);
    let prof = BallSystemProfile::new(&p, top * (1.0 + 1e-6), &ProfileOptions::default())?;
    let mut rows = Vec::new();
    for &r in &radii {
        if boundary {
            rows.push(vec![
                json!(r),
                json!(prof.boundary(BallSystem::Union, r)?),
                json!(prof.boundary(BallSystem::Intersection, r)?),
            ]);
        } else {
            rows.push(vec![
                json!(r),
                json!(prof.volume(BallSystem::Union, r)?),
                json!(prof.volume(BallSystem::Intersection, r)?),
            ]);
        }
    }
    Ok(if boundary {
        table_outcome(&["r", "union_boundary", "intersection_boundary"], rows)
    } else {
        table_outcome(&["r", "union_volume", "intersection_volume"], rows)
    })
}

fn run_meanwidth(spec: &ExperimentSpec) -> Result<Outcome> {
    let samples = spec.u64_param("samples").unwrap_or(1_000_000);
    let seed = spec.u64_param("seed").unwrap_or(0);
    let mut rows = Vec::new();
    for k in 0..spec.inputs.len().max(1) {
        let p = spec.config(k)?;
        let best = mean_width(&p)?;
        let quad = mean_width_quadrature(&p, samples, seed)?;
        rows.push(vec![
            json!(spec.inputs[k].display().to_string()),
            json!(best.value),
            json!(best.method),
            json!(best.stderr),
            json!(quad.value),
            json!(quad.stderr),
        ]);
    }
    Ok(table_outcome(
        &["config", "mean_width", "method", "stderr", "quadrature", "quadrature_stderr"],
        rows,
    ))
}

fn run_asymptotics(spec: &ExperimentSpec) -> Result<Outcome> {
    let p = spec.config(0)?;
    let options = ProfileOptions::default();
    let (prof, window) = match spec.window() {
        Some(w) => (BallSystemProfile::new(&p, w.r_max, &options)?, w),
        None => {
            let prof = BallSystemProfile::for_fit(&p, &options)?;
            let w = prof.default_window();
            (prof, w)
        }
    };
    let mut rows = Vec::new();
    for which in [BallSystem::Union, BallSystem::Intersection] {
        let fit = prof.fit(which, &window, DEFAULT_FIT_TERMS)?;
        let mut row = vec![json!(which), json!(fit.residual_norm), json!(fit.condition_estimate)];
        row.extend(fit.coefficients.iter().map(|c| json!(c)));
        rows.push(row);
    }
    let mut header = vec!["profile", "residual_norm", "condition_estimate"];
    let names = ["a_n", "a_n-1", "a_n-2", "a_n-3"];
    header.extend(names.iter().take(DEFAULT_FIT_TERMS));
    let mut out = table_outcome(&header, rows);
    out.result = json!({"window": window, "fits": out.result});
    Ok(out)
}

fn run_verify(spec: &ExperimentSpec) -> Result<Outcome> {
    let tol = spec.f64_param("tolerance");
    let check = spec.check.expect("checked in from_cli");
    if check == Check::WwLemma {
        let path = spec.inputs.first().ok_or_else(|| {
            KpvError::InvalidParameter("verify ww-lemma needs a polyhedral set --config".into())
        })?;
        let set: PolyhedralSet = read_json(path)?;
        let p0 = match spec.parameters.get("p0") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => vec![0.0; set.dimension()],
        };
        let c = check_ww_lemma(set.halfspaces(), &p0)?;
        let report = VerificationReport {
            check: "ww_lemma".into(),
            records: vec![crate::asymptotics::ClaimRecord::new(
                "W'_P(0) + W'_Pbar(0) = 0",
                c.w_prime + c.w_prime_complement,
                0.0,
                1e-3 * c.max_h.max(f64::MIN_POSITIVE),
            )],
            details: serde_json::to_value(&c)?,
        };
        return records_outcome(&[report], tol);
    }
    let mut reports = Vec::new();
    for k in 0..spec.inputs.len().max(1) {
        let p = spec.config(k)?;
        let window = spec.window();
        let report = match check {
            Check::CapoyleasPach => verify_capoyleas_pach(&p, window.as_ref())?,
            Check::Csikos => verify_csikos(&p, window.as_ref())?,
            Check::WwProposition => verify_ww_proposition(&p)?,
            Check::LiftIdentity => {
                let radii = spec.radii().unwrap_or_else(|_| vec![2.0, 5.0, 10.0]);
                let samples = spec.u64_param("samples").unwrap_or(10_000_000);
                verify_lift_identity(&p, &radii, samples, spec.u64_param("seed").unwrap_or(0))?
            }
            Check::WwLemma => unreachable!(),
        };
        reports.push(report);
    }
    records_outcome(&reports, tol)
}

fn run_threshold(spec: &ExperimentSpec) -> Result<Outcome> {
    let p = spec.config(0)?;
    let q = spec.config(1)?;
    let grid = match spec.window() {
        Some(w) => ThresholdGrid {
            r_min: w.r_min,
            r_max: w.r_max,
            count: w.count,
        },
        None => ThresholdGrid::for_pair(&p, &q),
    };
    let res = kp_threshold(&p, &q, &grid)?;
    let rows = res
        .points
        .iter()
        .map(|pt| {
            let mut row = vec![json!(pt.r)];
            row.extend(pt.gaps.iter().map(|g| json!(g)));
            row
        })
        .collect();
    let mut out = table_outcome(
        &["r", "union_gap", "intersection_gap", "union_boundary_gap", "intersection_boundary_gap"],
        rows,
    );
    out.passed = res.all_hold;
    out.result = serde_json::to_value(&res)?;
    Ok(out)
}

/// Writes `PREFIX.p.json` and `PREFIX.q.json`, `q` a random expansion of the base.
pub fn generate(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let base = spec.config(0)?;
    let seed = spec.u64_param("seed").unwrap_or(0);
    let magnitude = spec.f64_param("magnitude").unwrap_or(0.1);
    let prefix = spec
        .output
        .clone()
        .ok_or_else(|| KpvError::InvalidParameter("generate needs --out PREFIX".into()))?;
    let q = random_expansion(&base, seed, magnitude)?;
    debug_assert!(is_expansion(&base, &q, DEFAULT_LENGTH_TOL)?);
    let tag = |c: PointConfiguration, role: &str| {
        c.with_metadata("role", json!(role))
            .with_metadata("seed", json!(seed))
            .with_metadata("magnitude", json!(magnitude))
            .with_metadata("tool_version", json!(VERSION))
    };
    let files = [("p", tag(base, "base")), ("q", tag(q, "expansion"))];
    let mut written = Vec::new();
    for (role, cfg) in files {
        let mut path = prefix.clone().into_os_string();
        path.push(format!(".{role}.json"));
        let path = PathBuf::from(path);
        let text = serde_json::to_string_pretty(&cfg)?;
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| KpvError::Io(e.error))?;
    Ok(())
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn render(spec: &ExperimentSpec, out: &Outcome) -> Result<String> {
    Ok(match spec.format {
        Format::Json => {
            let report = json!({
                "tool": "kpv",
                "version": VERSION,
                "command": spec.command,
                "check": spec.check,
                "inputs": spec.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "parameters": spec.parameters,
                "passed": out.passed,
                "result": out.result,
            });
            serde_json::to_string_pretty(&round_value(report))? + "\n"
        }
        Format::Csv => {
            let mut text = format!("# kpv {VERSION} {}\n", serde_json::to_string(&round_value(json!(spec.parameters)))?);
            text.push_str(&out.header.join(","));
            text.push('\n');
            for row in &out.rows {
                let cells: Vec<String> = row.iter().map(|v| csv_cell(&round_value(v.clone()))).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            text
        }
    })
}

fn exit_code_for(err: &KpvError) -> i32 {
    if err.is_input_error() {
        EXIT_INPUT_ERROR
    } else {
        EXIT_NUMERICAL_ERROR
    }
}

/// Runs a spec and writes its report. Returns the process exit code.
pub fn run(spec: &ExperimentSpec) -> i32 {
    match run_inner(spec) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("kpv {:?}: {err}", spec.command);
            exit_code_for(&err)
        }
    }
}

fn run_inner(spec: &ExperimentSpec) -> Result<i32> {
    let outcome = match spec.command {
        Command::Generate => {
            for path in generate(spec)? {
                eprintln!("wrote {}", path.display());
            }
            return Ok(EXIT_OK);
        }
        Command::Meanwidth => run_meanwidth(spec)?,
        Command::Volume => run_volume(spec, false)?,
        Command::Boundary => run_volume(spec, true)?,
        Command::Asymptotics => run_asymptotics(spec)?,
        Command::Verify => run_verify(spec)?,
        Command::Threshold => run_threshold(spec)?,
    };
    let text = render(spec, &outcome)?;
    match &spec.output {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(if outcome.passed { EXIT_OK } else { EXIT_VERIFICATION_FAILED })
}

/// Parses arguments and runs; clap usage errors map to the input-error code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match ExperimentSpec::from_cli(&cli) {
        Ok(spec) => run(&spec),
        Err(err) => {
            eprintln!("kpv: {err}");
            exit_code_for(&err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        let rounded = round12(std::f64::consts::PI);
        assert_eq!(rounded.to_string(), "3.14159265359");
        assert_eq!(round12(0.0), 0.0);
        assert_eq!(round12(-1234567.891234567), -1234567.89123);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:10:5").unwrap(), (1.0, 10.0, 5));
        assert!(parse_grid("1:10").is_err());
        assert!(parse_grid("-1:10:3").is_err());
    }

    #[test]
    fn verify_requires_a_check() {
        assert_eq!(main_with_args(["kpv", "verify", "--config", "x.json"]), EXIT_INPUT_ERROR);
        assert_eq!(main_with_args(["kpv", "volume", "--config", "/nonexistent.json", "--r", "1"]), EXIT_INPUT_ERROR);
    }
}
