//! The `ellest` command line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ellest_core::losses;
use ellest_core::robust_tests::{devroye_lugosi_test, run_test_iid};
use ellest_core::{Error, TestOutcome};
use serde::Serialize;

use crate::config::{self, CheckAssumptionsSection, Command, ConfigError, RunConfig};
use crate::io::{self, IoError, Writer};
use crate::sim::{self, CurvePoint, DeviationRow, Scenario, Summary, TestErrorReport};
use crate::suite::{assumption_suite, SuiteLoss, SuiteReport};
use crate::par;

pub const EXIT_OK: i32 = 0;
/// A check ran and reported a violation.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ellest", version, about = "ℓ-estimators, robust two-point tests and Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    /// TOML (or .json) run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    pub describe: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Select the ℓ-estimate from a model given observations.
    Estimate,
    /// Run a two-point robust test, once on data or as a Monte Carlo tally.
    Test,
    /// Run a seeded simulation scenario.
    Simulate,
    /// Tabulate distances between measures.
    Distances,
    /// Exact-oracle assumption checks on random discrete spaces.
    CheckAssumptions(CheckArgs),
}

#[derive(Args, Debug, Default)]
pub struct CheckArgs {
    #[arg(long, value_enum)]
    pub loss: Option<SuiteLossArg>,
    /// Exponent of the L_j loss.
    #[arg(long)]
    pub j: Option<f64>,
    /// KL log-ratio bound (default: computed per space).
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub space_size: Option<usize>,
    /// Number of random spaces.
    #[arg(long)]
    pub triples: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SuiteLossArg {
    Tv,
    Hellinger,
    Kl,
    Lj,
    Linf,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(#[from] IoError),
    #[error("`{key}`: {source}")]
    Core { key: String, source: Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core { source, .. } if source.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

trait Located<T> {
    fn at(self, key: &str) -> Result<T, RunError>;
}

impl<T> Located<T> for ellest_core::Result<T> {
    fn at(self, key: &str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Core { key: key.to_string(), source })
    }
}

impl Sub {
    fn command(&self) -> Command {
        match self {
            Sub::Estimate => Command::Estimate,
            Sub::Test => Command::Test,
            Sub::Simulate => Command::Simulate,
            Sub::Distances => Command::Distances,
            Sub::CheckAssumptions(_) => Command::CheckAssumptions,
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ellest: config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if cli.describe {
        print!("{}", cfg.to_toml());
        return EXIT_OK;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("ellest: cannot start {} threads: {e}", cli.threads.unwrap_or(0));
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| execute(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            let origin = cli.config.as_deref().map_or_else(|| "command line".to_string(), |p| p.display().to_string());
            let kind = if e.exit_code() == EXIT_NUMERICAL { "numerical failure" } else { "error" };
            eprintln!("ellest: {kind} ({origin}): {e}");
            e.exit_code()
        }
    }
}

/// Loads the config file (if any) and applies command-line overrides.
pub fn resolve(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let command = cli.command.command();
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None if command == Command::CheckAssumptions => RunConfig::empty(command),
        None => return Err(ConfigError::at("--config", format!("`{command}` needs a config file"))),
    };
    let locate = |e: ConfigError| match &cli.config {
        Some(p) => e.in_file(p),
        None => e,
    };
    match cfg.command {
        None => cfg.command = Some(command),
        Some(c) if c != command => {
            return Err(locate(ConfigError::at("command", format!("config is for `{c}`, not `{command}`"))));
        }
        Some(_) => {}
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(e) = cli.epsilon {
        cfg.epsilon = e;
    }
    if let Some(d) = &cli.out {
        cfg.output.directory = d.clone();
    }
    cfg.verbosity = cfg.verbosity.saturating_add(cli.verbose);
    if let Sub::CheckAssumptions(a) = &cli.command {
        apply_check_args(&mut cfg, a).map_err(locate)?;
    }
    cfg.validate().map_err(locate)?;
    Ok(cfg)
}

fn apply_check_args(cfg: &mut RunConfig, a: &CheckArgs) -> Result<(), ConfigError> {
    let mut sec = cfg.check_assumptions.take().unwrap_or(CheckAssumptionsSection {
        loss: SuiteLoss::Tv,
        space_size: 5,
        triples: 200,
    });
    if let Some(l) = a.loss {
        sec.loss = match l {
            SuiteLossArg::Tv => SuiteLoss::Tv,
            SuiteLossArg::Hellinger => SuiteLoss::Hellinger,
            SuiteLossArg::Kl => SuiteLoss::Kl { a: a.a },
            SuiteLossArg::Lj => SuiteLoss::Lj {
                j: a.j.ok_or_else(|| ConfigError::at("--j", "`--loss lj` needs `--j`"))?,
            },
            SuiteLossArg::Linf => SuiteLoss::Linf,
        };
    } else {
        match (&mut sec.loss, a.j, a.a) {
            (SuiteLoss::Lj { j }, Some(v), _) => *j = v,
            (SuiteLoss::Kl { a }, _, Some(v)) => *a = Some(v),
            (_, None, None) => {}
            _ => return Err(ConfigError::at("--j/--a", "flag does not apply to the configured loss")),
        }
    }
    if let Some(s) = a.space_size {
        sec.space_size = s;
    }
    if let Some(t) = a.triples {
        sec.triples = t;
    }
    cfg.check_assumptions = Some(sec);
    Ok(())
}

fn say(cfg: &RunConfig, w: &Writer<'_>) {
    if cfg.verbosity > 0 {
        for p in &w.written {
            eprintln!("wrote {}", p.display());
        }
    }
}

/// Runs a validated config and returns the exit code.
pub fn execute(cfg: &RunConfig) -> Result<i32, RunError> {
    match cfg.command.expect("validated") {
        Command::Estimate => estimate(cfg),
        Command::Test => test(cfg),
        Command::Simulate => simulate(cfg),
        Command::Distances => distances(cfg),
        Command::CheckAssumptions => check(cfg),
    }
}

#[derive(Serialize)]
struct CandidateRow<'a> {
    format_version: u32,
    index: usize,
    label: &'a str,
    sup_stat: f64,
    in_minimizer_set: bool,
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    command: &'static str,
    n: usize,
    candidates: usize,
    loss: &'a ellest_core::LossSpec,
    epsilon: f64,
    chosen: usize,
    chosen_label: &'a str,
    sup_stat: f64,
    minimizer_set: &'a [usize],
}

fn estimate(cfg: &RunConfig) -> Result<i32, RunError> {
    let sec = cfg.estimate.as_ref().expect("validated");
    let model = sec.model.build().at("estimate.model")?;
    let x = sec.data.load("estimate.data", cfg.seed, model.dim())?;
    let rep = par::ell_estimate(&x, &model, &sec.loss, cfg.epsilon, None).at("estimate")?;
    let mut w = Writer::new(&cfg.output, "estimate")?;
    let rows: Vec<CandidateRow> = rep
        .sup_stat
        .iter()
        .enumerate()
        .map(|(i, &s)| CandidateRow {
            format_version: sim::FORMAT_VERSION,
            index: i,
            label: &rep.labels[i],
            sup_stat: s,
            in_minimizer_set: rep.minimizer_set.binary_search(&i).is_ok(),
        })
        .collect();
    w.csv("records.csv", &rows)?;
    w.jsonl("records.jsonl", &rows)?;
    w.summary(&EstimateSummary {
        command: "estimate",
        n: x.n(),
        candidates: model.len(),
        loss: &sec.loss,
        epsilon: cfg.epsilon,
        chosen: rep.chosen,
        chosen_label: rep.chosen_label(),
        sup_stat: rep.sup_stat[rep.chosen],
        minimizer_set: &rep.minimizer_set,
    })?;
    println!(
        "chosen {} ({}); sup statistic {}; {} of {} candidates within epsilon",
        rep.chosen,
        rep.chosen_label(),
        rep.sup_stat[rep.chosen],
        rep.minimizer_set.len(),
        model.len()
    );
    say(cfg, &w);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TestSummary<'a> {
    command: &'static str,
    loss: &'a ellest_core::LossSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<TestOutcome>,
    /// Scheffé-type test, reported alongside TV.
    #[serde(skip_serializing_if = "Option::is_none")]
    devroye_lugosi: Option<TestOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<&'a TestErrorReport>,
}

#[derive(Serialize)]
struct StatisticRow {
    format_version: u32,
    replication: usize,
    statistic: f64,
    decision: ellest_core::Decision,
}

fn test(cfg: &RunConfig) -> Result<i32, RunError> {
    let sec = cfg.test.as_ref().expect("validated");
    let mut outcome = None;
    let mut dl = None;
    if let Some(d) = &sec.data {
        let x = d.load("test.data", cfg.seed, sec.p.dim())?;
        let o = run_test_iid(&x, &sec.p, &sec.q, &sec.loss).at("test")?;
        println!("decision {:?}; statistic {}", o.decision, o.statistic);
        if matches!(sec.loss.kind, ellest_core::LossKind::Tv) && x.dim() == 1 {
            dl = Some(devroye_lugosi_test(&x, &sec.p, &sec.q).at("test")?);
        }
        outcome = Some(o);
    }
    let mut report = None;
    if let Some(mc) = &sec.monte_carlo {
        let seed = cfg.seed.ok_or_else(|| ConfigError::at("seed", "a Monte Carlo test needs a seed"))?;
        let r = sim::test_error_mc(&mc.truth, &sec.p, &sec.q, &sec.loss, mc.n, mc.replications, seed)
            .at("test.monte_carlo")?;
        match r.empirical_error {
            Some(e) => println!(
                "closer {:?}; gamma {}; error frequency {e} (hoeffding bound {})",
                r.closer, r.gamma, r.bound_hoeffding
            ),
            None => println!("closer {:?}; error frequency undefined; ties {}", r.closer, r.ties),
        }
        report = Some(r);
    }
    let stem = match cfg.seed {
        Some(s) => format!("test-seed{s}"),
        None => "test".into(),
    };
    let mut w = Writer::new(&cfg.output, stem)?;
    if let Some(r) = &report {
        let rows: Vec<StatisticRow> = r
            .statistics
            .iter()
            .enumerate()
            .map(|(i, &t)| StatisticRow {
                format_version: sim::FORMAT_VERSION,
                replication: i,
                statistic: t,
                decision: ellest_core::Decision::from_statistic(t),
            })
            .collect();
        w.csv("records.csv", &rows)?;
        w.jsonl("records.jsonl", &rows)?;
    }
    w.summary(&TestSummary {
        command: "test",
        loss: &sec.loss,
        outcome,
        devroye_lugosi: dl,
        monte_carlo: report.as_ref(),
    })?;
    say(cfg, &w);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    command: &'static str,
    digest: String,
    scenario: &'a Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    ns: Option<&'a [usize]>,
    summaries: Vec<&'a Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<&'a [CurvePoint]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deviation: Option<&'a [DeviationRow]>,
}

fn simulate(cfg: &RunConfig) -> Result<i32, RunError> {
    let sec = cfg.simulate.as_ref().expect("validated");
    let scenario = cfg.scenario(sec.n).expect("validated");
    let seed = scenario.seed;
    let (records, curve) = match &sec.ns {
        Some(ns) => {
            let (recs, curve) = sim::rate_curve(&scenario, ns).at("simulate")?;
            (recs, Some(curve))
        }
        None => (vec![sim::run_estimation(&scenario).at("simulate")?], None),
    };
    let deviation = match (&sec.xis, &sec.bound) {
        (Some(xis), Some(b)) => Some(sim::deviation_table(&records[0], xis, b).at("simulate.bound")?),
        _ => None,
    };
    let digest = scenario.digest();
    let mut w = Writer::new(&cfg.output, format!("{digest}-seed{seed}"))?;
    let summary = SimulateSummary {
        command: "simulate",
        digest: digest.clone(),
        scenario: &scenario,
        ns: sec.ns.as_deref(),
        summaries: records.iter().map(|r| &r.summary).collect(),
        curve: curve.as_ref().map(|c| c.points.as_slice()),
        slope: curve.as_ref().map(|c| c.slope),
        deviation: deviation.as_deref(),
    };
    io::write_experiment(&mut w, &records, summary.curve, summary.deviation, &summary)?;
    for r in &records {
        let s = &r.summary.loss;
        println!(
            "n = {}: {} replications, median loss {}, mean loss {}, best in model {}",
            r.scenario.n, s.count, s.median, s.mean, r.summary.min_model_loss
        );
    }
    if let Some(c) = &curve {
        println!("log-log slope {}", c.slope);
    }
    if let Some(d) = &deviation {
        for row in d {
            println!(
                "xi {}: frequency {} vs target {} ({})",
                row.xi,
                row.frequency,
                row.target,
                if row.pass { "ok" } else { "below" }
            );
        }
    }
    say(cfg, &w);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct DistanceRow<'a> {
    format_version: u32,
    p: usize,
    q: usize,
    p_label: &'a str,
    q_label: &'a str,
    loss: &'static str,
    value: f64,
}

fn distances(cfg: &RunConfig) -> Result<i32, RunError> {
    let sec = cfg.distances.as_ref().expect("validated");
    let mut rows = Vec::new();
    for (i, p) in sec.measures.iter().enumerate() {
        for (j, q) in sec.measures.iter().enumerate().skip(i + 1) {
            for l in &sec.losses {
                let value = losses::loss(l, p, q).at(&format!("distances.losses ({} between #{i} and #{j})", l.name()))?;
                println!("{} {} {}: {value}", l.name(), p.tag, q.tag);
                rows.push(DistanceRow {
                    format_version: sim::FORMAT_VERSION,
                    p: i,
                    q: j,
                    p_label: &p.tag,
                    q_label: &q.tag,
                    loss: l.name(),
                    value,
                });
            }
        }
    }
    let mut w = Writer::new(&cfg.output, "distances")?;
    w.csv("records.csv", &rows)?;
    w.jsonl("records.jsonl", &rows)?;
    w.summary(&serde_json::json!({ "command": "distances", "pairs": rows.len() / sec.losses.len().max(1) }))?;
    say(cfg, &w);
    Ok(EXIT_OK)
}

fn check(cfg: &RunConfig) -> Result<i32, RunError> {
    let sec = cfg.check_assumptions.as_ref().expect("validated");
    let seed = cfg.seed.unwrap_or(0);
    let rep = assumption_suite(sec.loss, sec.space_size, sec.triples, seed).at("check_assumptions")?;
    print_suite(&rep);
    let mut w = Writer::new(&cfg.output, format!("check-assumptions-{}-seed{seed}", rep.loss.name()))?;
    w.summary(&rep)?;
    say(cfg, &w);
    Ok(if rep.pass() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn print_suite(rep: &SuiteReport) {
    let line = |name: &str, c: &crate::suite::CheckSummary| {
        println!(
            "{name}: {} ({} checks, worst slack {:e}, max oscillation {}, max antisymmetry error {:e})",
            if c.pass() { "pass" } else { "FAIL" },
            c.checked,
            c.worst_slack,
            c.max_oscillation,
            c.max_antisymmetry_error
        );
        if let Some(v) = &c.first_violation {
            println!("  first violation: {v}");
        }
    };
    println!("loss {} on {} random {}-point spaces (seed {})", rep.loss.name(), rep.spaces, rep.space_size, rep.seed);
    line("mean inequality", &rep.assumption1);
    if let Some(a2) = &rep.assumption2 {
        line("variance inequality", a2);
    }
    if rep.cond3bis_skipped > 0 {
        println!("variance bound skipped on {} spaces where the TV variance condition fails", rep.cond3bis_skipped);
    }
    println!("worst slack {:e}", rep.worst_slack());
}
