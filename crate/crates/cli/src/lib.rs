//! `mowa` subcommands. Each one is a thin adapter over a library operation:
//! machine output on stdout, diagnostics on stderr, exit 0 on success, 1 on
//! a domain failure (message key first on stderr) and 2 on a usage error.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use mowa_core::eval::{
    cohort_stats, grade, render_table, round2, round_half_away, sign_test, GradeEnv, GradeReport, Rubric, RubricFile,
    SignTestResult, Stats, DEFAULT_ALPHA,
};
use mowa_core::i18n;
use mowa_core::sensor::TraceError;
use mowa_core::spec::{validate_spec_against, ExtractMode, SpecError, ValidationReport};
use mowa_core::weaver::WeaveError;
use mowa_core::{
    extract, parse_spec, parse_trace, run_trace, CachePolicy, ExtractCache, MobileAppSpec, PageCorpus, Session,
    SimEvent, TourMode, XPathExpr,
};
use mowa_service::ServiceConfig;

pub const LOG_FILE: &str = "log.jsonl";

#[derive(Debug, Parser)]
#[command(name = "mowa", version, about = "Mobile web augmentation toolkit")]
pub struct Cli {
    /// Language of diagnostics.
    #[arg(long, global = true, env = "MOWA_LOCALE", default_value = i18n::DEFAULT_LOCALE)]
    pub locale: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an application file and print its validation report.
    Validate(ValidateArgs),
    /// Load one page, feed one reading, print the augmented HTML.
    Weave(WeaveArgs),
    /// Replay a sensor trace, writing every augmented page and the log.
    Simulate(SimulateArgs),
    /// Resolve one (url, xpath, mode) extraction.
    Extract(ExtractArgs),
    /// Grade a candidate application against a rubric.
    Grade(GradeArgs),
    /// Cohort statistics and sign test over a directory of grade reports.
    Stats(StatsArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(env = "MOWA_SPEC")]
    pub spec: PathBuf,
    /// Page snapshot cache; extraction sources outside it are flagged.
    #[arg(long, env = "MOWA_CACHE")]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeaveArgs {
    #[arg(long, env = "MOWA_SPEC")]
    pub spec: PathBuf,
    #[arg(long, env = "MOWA_PAGE_URL")]
    pub page_url: String,
    /// Reading as a trace line, e.g. `{"t":0,"kind":"qr","payload":"…"}`,
    /// or `@file` holding one.
    #[arg(long, env = "MOWA_CONTEXT")]
    pub context: Option<String>,
    #[arg(long, env = "MOWA_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, env = "MOWA_CACHE")]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, env = "MOWA_SPEC")]
    pub spec: PathBuf,
    #[arg(long, env = "MOWA_TRACE")]
    pub trace: PathBuf,
    #[arg(long, env = "MOWA_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, env = "MOWA_CACHE")]
    pub cache: Option<PathBuf>,
    #[arg(long, env = "MOWA_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub url: String,
    #[arg(long)]
    pub xpath: String,
    /// `text` or `attr:NAME`.
    #[arg(long, default_value = "text")]
    pub mode: String,
    #[arg(long, env = "MOWA_CACHE")]
    pub cache: PathBuf,
    /// Fetch and store pages missing from the cache.
    #[arg(long, env = "MOWA_NETWORK")]
    pub network: bool,
}

#[derive(Debug, Args)]
pub struct GradeArgs {
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long, env = "MOWA_RUBRIC")]
    pub rubric: PathBuf,
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, env = "MOWA_REPORTS")]
    pub reports: PathBuf,
    #[arg(long)]
    pub sign_median: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Print the grading table instead of JSON.
    #[arg(long)]
    pub table: bool,
    /// Use unrounded success rates instead of the two-decimal figures.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MOWA_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, env = "MOWA_STORE")]
    pub store: PathBuf,
    #[arg(long, env = "MOWA_CORPUS")]
    pub corpus: Option<PathBuf>,
    #[arg(long, env = "MOWA_CACHE")]
    pub cache: Option<PathBuf>,
}

/// A domain failure: message key, its arguments, and extra lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub key: String,
    pub args: Vec<(String, String)>,
    pub details: Vec<String>,
}

impl Failure {
    fn new(key: &str, args: &[(&str, String)]) -> Self {
        Failure {
            key: key.to_string(),
            args: args.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            details: Vec::new(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure::new("cli.io", &[("path", path.display().to_string()), ("detail", e.to_string())])
    }

    fn report(key: &str, report: &ValidationReport, locale: &str) -> Self {
        let mut f = Failure::new(key, &[]);
        f.details = issue_lines(report, locale);
        f
    }

    pub fn render(&self, locale: &str) -> String {
        let args: Vec<(&str, &str)> = self.args.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let mut out = format!("error[{}]: {}\n", self.key, i18n::message(locale, &self.key, &args));
        for d in &self.details {
            out += &format!("  {d}\n");
        }
        out
    }
}

fn spec_failure(e: SpecError, locale: &str) -> Failure {
    match &e {
        SpecError::InvalidSpec(r) => Failure::report(e.key(), r, locale),
        _ => Failure::new(e.key(), &e.args()),
    }
}

fn weave_failure(e: WeaveError, locale: &str) -> Failure {
    match &e {
        WeaveError::InvalidSpec(r) => Failure::report(e.key(), r, locale),
    }
}

fn issue_lines(report: &ValidationReport, locale: &str) -> Vec<String> {
    report
        .issues
        .iter()
        .map(|i| {
            let args: Vec<(&str, &str)> = i.args.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            let sev = serde_json::to_value(i.severity).ok().and_then(|v| v.as_str().map(str::to_string));
            format!("{}[{}] {}: {}", sev.unwrap_or_default(), i.key, i.path, i18n::message(locale, &i.key, &args))
        })
        .collect()
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::io(path, e))
}

fn load_spec(path: &Path, locale: &str) -> Result<MobileAppSpec, Failure> {
    parse_spec(&read(path)?).map_err(|e| spec_failure(e, locale))
}

fn open_cache(dir: Option<&Path>, policy: CachePolicy) -> Result<ExtractCache, Failure> {
    match dir {
        Some(d) => ExtractCache::open(d, policy).map_err(|e| Failure::new(e.key(), &[("path", d.display().to_string()), ("detail", e.to_string())])),
        None => Ok(ExtractCache::empty()),
    }
}

fn load_corpus(dir: &Path) -> Result<PageCorpus, Failure> {
    PageCorpus::load(dir).map_err(|e| Failure::new(e.key(), &[("url", dir.display().to_string()), ("detail", e.to_string())]))
}

fn json_line<T: Serialize>(out: &mut dyn Write, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    writeln!(out, "{text}").map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

fn write_out(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes()).map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

// ---------------------------------------------------------------- commands

pub fn validate(args: &ValidateArgs, locale: &str, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let spec = load_spec(&args.spec, locale)?;
    let cache = open_cache(args.cache.as_deref(), CachePolicy::CacheOnly)?;
    let known: HashSet<String> = cache.urls();
    let report = validate_spec_against(&spec, &known);
    json_line(out, &report)?;
    for line in issue_lines(&report, locale).iter().filter(|l| !l.starts_with("error")) {
        let _ = writeln!(err, "{line}");
    }
    if report.ok {
        Ok(())
    } else {
        let mut f = Failure::report("spec.invalid", &report, locale);
        f.details.retain(|l| l.starts_with("error"));
        Err(f)
    }
}

/// Parses a reading given inline or as `@file`.
pub fn parse_reading(raw: &str) -> Result<SimEvent, Failure> {
    let text = match raw.strip_prefix('@') {
        Some(path) => String::from_utf8_lossy(&read(Path::new(path))?).into_owned(),
        None => raw.to_string(),
    };
    let events = parse_trace(text.trim().as_bytes())
        .map_err(|e| Failure::new("cli.reading-invalid", &[("detail", e.to_string())]))?;
    match events.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(Failure::new("cli.reading-invalid", &[("detail", format!("{} readings", events.len()))])),
    }
}

/// A page after one reading, with the warnings raised on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Woven {
    pub html: Option<String>,
    pub warnings: Vec<(String, String)>,
}

/// The page at `page_url` after feeding `reading`.
pub fn weave_page(
    spec: &MobileAppSpec,
    corpus: &PageCorpus,
    cache: &ExtractCache,
    page_url: &str,
    reading: Option<&SimEvent>,
) -> Result<Woven, WeaveError> {
    let mut session = Session::new(spec, corpus, cache)?;
    session.handle_nav(0, page_url);
    if let Some(ev) = reading {
        session.feed(ev);
    }
    let warnings = session.log().warnings().map(|(k, d)| (k.to_string(), d.to_string())).collect();
    Ok(Woven { html: session.current_html(), warnings })
}

pub fn weave(args: &WeaveArgs, locale: &str, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let spec = load_spec(&args.spec, locale)?;
    let corpus = load_corpus(&args.corpus)?;
    let cache = open_cache(args.cache.as_deref(), CachePolicy::CacheOnly)?;
    let reading = args.context.as_deref().map(parse_reading).transpose()?;
    let Woven { html, warnings } =
        weave_page(&spec, &corpus, &cache, &args.page_url, reading.as_ref()).map_err(|e| weave_failure(e, locale))?;
    let Some(html) = html else {
        return Err(Failure::new("nav.miss", &[("url", args.page_url.clone())]));
    };
    for (key, detail) in &warnings {
        let _ = writeln!(err, "warning[{key}]: {detail}");
    }
    write_out(out, &html)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub snapshots: Vec<String>,
    pub tour_mode: TourMode,
    pub warnings: usize,
    pub log: String,
}

pub fn simulate(args: &SimulateArgs, locale: &str, out: &mut dyn Write) -> Outcome {
    let spec = load_spec(&args.spec, locale)?;
    let trace = parse_trace(&read(&args.trace)?).map_err(|e| {
        let args = match &e {
            TraceError::TraceSyntax { line, detail } => vec![("line", line.to_string()), ("detail", detail.clone())],
            TraceError::UnsortedTrace { line } => vec![("line", line.to_string())],
        };
        Failure::new(e.key(), &args)
    })?;
    let corpus = load_corpus(&args.corpus)?;
    let cache = open_cache(args.cache.as_deref(), CachePolicy::CacheOnly)?;
    let run = run_trace(&spec, &corpus, &cache, &trace).map_err(|e| weave_failure(e, locale))?;

    fs::create_dir_all(&args.out).map_err(|e| Failure::io(&args.out, e))?;
    let mut names = Vec::new();
    for snap in &run.snapshots {
        let path = args.out.join(snap.file_name());
        fs::write(&path, &snap.html).map_err(|e| Failure::io(&path, e))?;
        names.push(snap.file_name());
    }
    let log = args.out.join(LOG_FILE);
    fs::write(&log, run.log.to_jsonl()).map_err(|e| Failure::io(&log, e))?;
    json_line(
        out,
        &SimulateSummary {
            snapshots: names,
            tour_mode: run.tour.mode,
            warnings: run.log.warnings().count(),
            log: log.display().to_string(),
        },
    )
}

pub fn extract_value(args: &ExtractArgs) -> Result<String, Failure> {
    let xpath = XPathExpr::parse(&args.xpath)
        .map_err(|e| Failure::new("cli.xpath-invalid", &[("xpath", args.xpath.clone()), ("detail", e.to_string())]))?;
    let mode = ExtractMode::parse(&args.mode).ok_or_else(|| Failure::new("cli.mode-invalid", &[("mode", args.mode.clone())]))?;
    let policy = if args.network { CachePolicy::CacheThenNetwork } else { CachePolicy::CacheOnly };
    let cache = open_cache(Some(&args.cache), policy)?;
    extract(&args.url, &xpath, &mode, &cache).map_err(|e| {
        let args = match &e {
            mowa_core::ExtractError::PageUnavailable(u) => vec![("url", u.clone())],
            mowa_core::ExtractError::NoMatch { url, xpath } => vec![("url", url.clone()), ("xpath", xpath.clone())],
            mowa_core::ExtractError::AttributeAbsent(n) => vec![("name", n.clone())],
            mowa_core::ExtractError::BrokenIndex { path, detail } => vec![("path", path.clone()), ("detail", detail.clone())],
        };
        Failure::new(e.key(), &args)
    })
}

pub fn extract_cmd(args: &ExtractArgs, out: &mut dyn Write) -> Outcome {
    let value = extract_value(args)?;
    write_out(out, &format!("{value}\n"))
}

/// Loads a rubric file, resolving its paths against the file's directory.
pub fn load_rubric(path: &Path, locale: &str) -> Result<(Rubric, PageCorpus, ExtractCache), Failure> {
    let file: RubricFile = serde_json::from_slice(&read(path)?).map_err(|e| Failure::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let reference = load_spec(&base.join(&file.reference), locale)?;
    let corpus = match &file.corpus {
        Some(c) => load_corpus(&base.join(c))?,
        None => PageCorpus::default(),
    };
    let cache = open_cache(file.cache.as_ref().map(|c| base.join(c)).as_deref(), CachePolicy::CacheOnly)?;
    let rubric = Rubric {
        reference,
        expected_poi_count: file.expected_poi_count,
        expected_link_count: file.expected_link_count,
        required_props: file.required_props,
        tolerance: file.tolerance,
    };
    Ok((rubric, corpus, cache))
}

pub fn grade_cmd(args: &GradeArgs, locale: &str, out: &mut dyn Write) -> Outcome {
    let candidate = load_spec(&args.candidate, locale)?;
    let (rubric, corpus, cache) = load_rubric(&args.rubric, locale)?;
    let report = grade(&candidate, &rubric, &GradeEnv { corpus: &corpus, cache: &cache }).map_err(|e| {
        let mowa_core::eval::GradeError::RubricMismatch(r) = &e;
        match r {
            Some(r) => Failure::report(e.key(), r, locale),
            None => Failure::new(e.key(), &[]),
        }
    })?;
    let report = match &args.label {
        Some(l) => report.labeled(l.clone()),
        None => report,
    };
    json_line(out, &report)
}

/// Grade reports in a directory, ordered by file name.
pub fn load_reports(dir: &Path) -> Result<Vec<GradeReport>, Failure> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let r: GradeReport = serde_json::from_slice(&read(p)?).map_err(|e| Failure::io(p, e))?;
            if [r.a, r.b, r.c, r.d, r.e].iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Failure::new("stats.domain", &[]));
            }
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsSummary {
    /// `printed` when success rates were rounded to two decimals first.
    pub values: &'static str,
    #[serde(flatten)]
    pub stats: Stats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_test: Option<SignTestResult>,
    pub display: serde_json::Value,
}

pub fn stats_summary(reports: &[GradeReport], median: Option<f64>, alpha: f64, raw: bool) -> Result<StatsSummary, Failure> {
    let values: Vec<f64> = reports.iter().map(|r| if raw { r.sr } else { round2(r.sr) }).collect();
    let stats = cohort_stats(&values).map_err(|e| Failure::new(e.key(), &[]))?;
    let sign = median.map(|m| sign_test(&values, m, alpha)).transpose().map_err(|e| Failure::new(e.key(), &[]))?;
    let mut display = json!({
        "mean": format!("{:.2}", round2(stats.mean)),
        "sample_std": format!("{:.4}", round_half_away(stats.sample_std, 4)),
    });
    if let Some(t) = &sign {
        display["p_value"] = json!(format!("{:.4}", round_half_away(t.p_value, 4)));
    }
    Ok(StatsSummary { values: if raw { "raw" } else { "printed" }, stats, sign_test: sign, display })
}

pub fn stats_cmd(args: &StatsArgs, out: &mut dyn Write) -> Outcome {
    let reports = load_reports(&args.reports)?;
    if reports.is_empty() {
        return Err(Failure::new("cli.reports-empty", &[("path", args.reports.display().to_string())]));
    }
    let summary = stats_summary(&reports, args.sign_median, args.alpha, args.raw)?;
    if !args.table {
        return json_line(out, &summary);
    }
    let mut text = render_table(&reports);
    text += &format!("\nn = {}, mean = {}, sample std = {}\n", summary.stats.n, summary.display["mean"].as_str().unwrap_or(""), summary.display["sample_std"].as_str().unwrap_or(""));
    if let Some(t) = &summary.sign_test {
        text += &format!(
            "sign test at median {}: {} below, {} equal, {} above, p = {:.4}, {} at alpha {}\n",
            t.hypothesized_median,
            t.n_below,
            t.n_equal,
            t.n_above,
            round_half_away(t.p_value, 4),
            if t.reject { "reject" } else { "keep" },
            t.alpha
        );
    }
    write_out(out, &text)
}

pub fn serve_cmd(args: &ServeArgs, locale: &str) -> Outcome {
    let config = ServiceConfig {
        addr: args.addr,
        store: args.store.clone(),
        corpus: args.corpus.clone(),
        cache: args.cache.clone(),
        locale: locale.to_string(),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::io(&args.store, e))?;
    rt.block_on(mowa_service::serve(config)).map_err(|e| Failure::io(&args.store, e))
}

/// Parses `argv` and runs one subcommand. Returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                2
            } else {
                let _ = out.write_all(text.as_bytes());
                0
            };
        }
    };
    let locale = cli.locale.as_str();
    let outcome = match &cli.command {
        Command::Validate(a) => validate(a, locale, out, err),
        Command::Weave(a) => weave(a, locale, out, err),
        Command::Simulate(a) => simulate(a, locale, out),
        Command::Extract(a) => extract_cmd(a, out),
        Command::Grade(a) => grade_cmd(a, locale, out),
        Command::Stats(a) => stats_cmd(a, out),
        Command::Serve(a) => serve_cmd(a, locale),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            let _ = err.write_all(f.render(locale).as_bytes());
            1
        }
    }
}
