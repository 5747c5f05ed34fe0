//! `ftfp`: one subcommand per pipeline stage.
//!
//! Exit codes: 0 on success, 1 when a produced artifact fails validation,
//! 2 on bad input (unreadable file, malformed JSON, invalid instance or
//! option, oracle bound exceeded).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ftfp_core::dump;
use ftfp_core::gamma::gamma_scan;
use ftfp_core::instance::{self, generate_euclidean, generate_near_far, validate};
use ftfp_core::lp::{check_complementary_slackness, make_complete, solve_lp};
use ftfp_core::oracle::{brute_force_opt, OracleConfig};
use ftfp_core::partition::{
    check_dual_edges, partition_close_far, verify_properties, verify_properties_cf,
};
use ftfp_core::pipeline::{
    partition_residual, partition_violations, prepare, run, Partitioned, RunConfig, SummaryRow,
};
use ftfp_core::rational::{self, Rational};
use ftfp_core::rounding::{validate_integral, Algorithm};
use ftfp_core::{default_gamma, FtfpError, FtfpInstance, IntegralSolution};

#[derive(Parser)]
#[command(
    name = "ftfp",
    version,
    about = "Fault-tolerant facility placement by LP rounding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Check an instance file, including the metric inequality.
    Validate(InstanceArg),
    /// Solve the LP relaxation exactly (primal, dual and cost split).
    Solve(StageArgs),
    /// Split sites so the LP optimum is complete.
    Complete(StageArgs),
    /// Separate the integral part of the optimum from the residual.
    Reduce(StageArgs),
    /// Partition the residual (close/far when --algo ebgs).
    Partition(RoundArgs),
    /// Run the full pipeline: solve, reduce, partition, round, recombine.
    Round(RoundArgs),
    /// Exact optimum by enumeration (tiny instances only).
    Oracle(StageArgs),
    /// Summary rows for several instances and algorithms.
    Bench(BenchArgs),
    /// Tabulate the bound curves over gamma and report the minimiser.
    GammaScan(GammaArgs),
    /// Check every property suite, or an integral solution with --solution.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum Family {
    #[default]
    Grid,
    NearFar,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Grid => "grid",
            Family::NearFar => "near-far",
        }
    }

    fn generate(self, sites: usize, clients: usize, r_max: u32, seed: u64) -> FtfpInstance {
        match self {
            Family::Grid => generate_euclidean(sites, clients, r_max, seed),
            Family::NearFar => generate_near_far(sites, clients, r_max, seed),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 5)]
    sites: usize,
    #[arg(long, default_value_t = 4)]
    clients: usize,
    #[arg(long, default_value_t = 3)]
    r_max: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t)]
    family: Family,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InstanceArg {
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Directory for artifacts; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RoundArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "ebgs")]
    algo: Algorithm,
    /// Scaling parameter for ebgs, as `p/q` or a decimal.
    #[arg(long, value_parser = parse_rational)]
    gamma: Option<Rational>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Treat property-suite violations as failures.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance files; generated instances are used when none is given.
    #[arg(long = "instance")]
    instances: Vec<PathBuf>,
    /// Algorithms to run; all three when omitted.
    #[arg(long = "algo")]
    algos: Vec<Algorithm>,
    #[arg(long, value_parser = parse_rational)]
    gamma: Option<Rational>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of generated instances when no --instance is given.
    #[arg(long, default_value_t = 10)]
    generate: u64,
    #[arg(long, value_enum, default_value_t = Family::NearFar)]
    family: Family,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct GammaArgs {
    #[arg(long, default_value_t = 1.4)]
    lo: f64,
    #[arg(long, default_value_t = 1.7)]
    hi: f64,
    #[arg(long, default_value_t = 0.001)]
    step: f64,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Integral solution JSON to check against the instance.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long, value_parser = parse_rational)]
    gamma: Option<Rational>,
}

fn parse_rational(text: &str) -> Result<Rational, String> {
    rational::parse(text)
}

/// Why a command stopped.
enum Failure {
    Input(String),
    Invalid(String),
}

impl From<FtfpError> for Failure {
    fn from(e: FtfpError) -> Self {
        match e {
            FtfpError::Parse { .. }
            | FtfpError::InvalidInstance(_)
            | FtfpError::Precondition(_)
            | FtfpError::BoundExceeded { .. }
            | FtfpError::Io(_) => Failure::Input(e.to_string()),
            FtfpError::Infeasible(_) | FtfpError::NotComplete { .. } | FtfpError::Solver(_) => {
                Failure::Invalid(e.to_string())
            }
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn load(path: &Path) -> Result<FtfpInstance, Failure> {
    instance::load(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn gamma_or_default(g: Option<Rational>) -> Rational {
    g.unwrap_or_else(default_gamma)
}

/// Prints to stdout; a closed pipe (e.g. `| head`) is not an error.
fn say(text: &str) -> io::Result<()> {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

/// Writes `name` into `out`, or prints it when there is no output directory.
fn emit(out: Option<&Path>, name: &str, body: &str) -> io::Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), body)
        }
        None => say(body),
    }
}

fn emit_json(out: Option<&Path>, name: &str, v: &Value) -> io::Result<()> {
    emit(out, name, &dump::to_pretty(v))
}

fn write_csv<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(r)?;
    }
    wtr.flush()
}

fn print_csv(header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut buf = Vec::new();
    write_csv(&mut buf, header, rows)?;
    say(String::from_utf8_lossy(&buf).trim_end())
}

fn summary_table(rows: &[SummaryRow], out: Option<&Path>, format: Format) -> CmdResult {
    let records: Vec<Vec<String>> = rows.iter().map(|r| r.record().to_vec()).collect();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_csv(
            fs::File::create(dir.join("summary.csv"))?,
            &SummaryRow::HEADER,
            &records,
        )?;
    }
    match format {
        Format::Csv => print_csv(&SummaryRow::HEADER, &records)?,
        Format::Json => {
            let list: Vec<Value> = records
                .iter()
                .map(|r| {
                    let obj: serde_json::Map<String, Value> = SummaryRow::HEADER
                        .iter()
                        .zip(r)
                        .map(|(k, v)| (k.to_string(), Value::String(v.clone())))
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            say(&dump::to_pretty(&Value::Array(list)))?;
        }
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    if a.sites == 0 || a.clients == 0 || a.r_max == 0 {
        return Err(Failure::Input(
            "sites, clients and r-max must be positive".to_string(),
        ));
    }
    let inst = a.family.generate(a.sites, a.clients, a.r_max, a.seed);
    match a.out {
        Some(path) => instance::save(&inst, &path)?,
        None => say(&instance::to_json(&inst))?,
    }
    Ok(())
}

fn cmd_validate(a: InstanceArg) -> CmdResult {
    let inst = instance::load_unchecked(&a.instance)?;
    let report = validate(&inst);
    if report.is_valid() {
        say(&format!(
            "valid: {} sites, {} clients",
            inst.num_sites(),
            inst.num_clients()
        ))?;
        Ok(())
    } else {
        for v in &report.violations {
            say(&v.to_string())?;
        }
        Err(Failure::Input(format!(
            "{} violations",
            report.violations.len()
        )))
    }
}

fn cmd_solve(a: StageArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let sol = solve_lp(&inst)?;
    let slack = check_complementary_slackness(&inst, &sol.primal, &sol.dual);
    emit_json(a.out.as_deref(), "solution.json", &dump::lp_solution(&sol))?;
    if !slack.is_empty() {
        return Err(Failure::Invalid(format!(
            "{} complementary slackness violations",
            slack.len()
        )));
    }
    Ok(())
}

fn cmd_complete(a: StageArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let sol = solve_lp(&inst)?;
    let (completed, primal) = make_complete(&inst, &sol.primal)?;
    let v = json!({
        "instance": serde_json::to_value(&completed).expect("instance serializes"),
        "x": serde_json::to_value(&primal).expect("solution serializes")["x"],
        "y": serde_json::to_value(&primal).expect("solution serializes")["y"],
    });
    emit_json(a.out.as_deref(), "completed.json", &v)?;
    if !primal.is_complete() {
        return Err(Failure::Invalid(
            "completion left a partial connection".to_string(),
        ));
    }
    Ok(())
}

fn cmd_reduce(a: StageArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let prep = prepare(&inst)?;
    let mut v = dump::reduction(&prep.reduction);
    v["integral_part"] = dump::integral(&prep.reduction.integral_part());
    emit_json(a.out.as_deref(), "reduction.json", &v)?;
    Ok(())
}

fn cmd_partition(a: RoundArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let gamma = gamma_or_default(a.gamma);
    RunConfig {
        algo: a.algo,
        gamma: gamma.clone(),
        trials: 1,
        seed: 0,
    }
    .validate()?;
    let prep = prepare(&inst)?;
    let Some(part) = partition_residual(&prep, a.algo, &gamma)? else {
        eprintln!("optimum is integral; nothing to partition");
        return emit_json(a.out.as_deref(), "partition.json", &json!(null)).map_err(Failure::from);
    };
    let v = match &part {
        Partitioned::Plain(ps) => dump::partition(ps),
        Partitioned::CloseFar(cfp) => dump::close_far(cfp),
    };
    emit_json(a.out.as_deref(), "partition.json", &v)?;
    finish_properties(&partition_violations(&prep, &part), a.strict)
}

fn finish_properties(violations: &[String], strict: bool) -> CmdResult {
    for v in violations {
        eprintln!("property violation: {v}");
    }
    if strict && !violations.is_empty() {
        return Err(Failure::Invalid(format!(
            "{} property violations",
            violations.len()
        )));
    }
    Ok(())
}

fn instance_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn cmd_round(a: RoundArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let cfg = RunConfig {
        algo: a.algo,
        gamma: gamma_or_default(a.gamma),
        trials: a.trials,
        seed: a.seed,
    };
    let rep = run(&inst, &cfg)?;
    if let Some(dir) = a.out.as_deref() {
        let prep = &rep.prepared;
        emit_json(Some(dir), "solution.json", &dump::lp_solution(&prep.lp))?;
        emit_json(
            Some(dir),
            "reduction.json",
            &dump::reduction(&prep.reduction),
        )?;
        let part = match &rep.partition {
            Some(Partitioned::Plain(ps)) => dump::partition(ps),
            Some(Partitioned::CloseFar(cfp)) => dump::close_far(cfp),
            None => Value::Null,
        };
        emit_json(Some(dir), "partition.json", &part)?;
        emit_json(Some(dir), "integral.json", &dump::integral(&rep.solution))?;
        emit_json(Some(dir), "estimate.json", &dump::estimate(&rep.estimate))?;
    }
    summary_table(
        &[rep.summary(&instance_name(&a.instance))],
        a.out.as_deref(),
        a.format,
    )?;
    if !rep.solution_violations.is_empty() {
        for v in &rep.solution_violations {
            eprintln!("infeasible: {v}");
        }
        return Err(Failure::Invalid(
            "rounded solution failed validation".to_string(),
        ));
    }
    finish_properties(&rep.property_violations, a.strict)
}

fn cmd_oracle(a: StageArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let sol = brute_force_opt(&inst, &OracleConfig::default())?;
    emit_json(a.out.as_deref(), "opt.json", &dump::integral(&sol))?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let instances: Vec<(String, FtfpInstance)> = if a.instances.is_empty() {
        (0..a.generate)
            .map(|k| {
                let seed = a.seed.wrapping_add(k);
                (
                    format!("{}-{seed}", a.family.name()),
                    a.family.generate(6, 5, 4, seed),
                )
            })
            .collect()
    } else {
        a.instances
            .iter()
            .map(|p| Ok((instance_name(p), load(p)?)))
            .collect::<Result<_, Failure>>()?
    };
    let algos = if a.algos.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        a.algos.clone()
    };
    let gamma = gamma_or_default(a.gamma);
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (name, inst) in &instances {
        for &algo in &algos {
            let cfg = RunConfig {
                algo,
                gamma: gamma.clone(),
                trials: a.trials,
                seed: a.seed,
            };
            let rep = run(inst, &cfg)?;
            if !rep.solution_violations.is_empty()
                || (a.strict && !rep.property_violations.is_empty())
            {
                bad.push(format!("{name} {algo}"));
            }
            rows.push(rep.summary(name));
        }
    }
    summary_table(&rows, a.out.as_deref(), a.format)?;
    if !bad.is_empty() {
        return Err(Failure::Invalid(format!(
            "validation failed for {}",
            bad.join(", ")
        )));
    }
    Ok(())
}

fn cmd_gamma_scan(a: GammaArgs) -> CmdResult {
    if !(1.0 < a.lo && a.lo < a.hi && a.hi < 2.0) || a.step <= 0.0 {
        return Err(Failure::Input(
            "need 1 < lo < hi < 2 and step > 0".to_string(),
        ));
    }
    let scan = gamma_scan(a.lo, a.hi, a.step);
    let fmt = rational::format_f64;
    match a.format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = scan
                .rows
                .iter()
                .map(|r| {
                    vec![
                        fmt(r.gamma),
                        fmt(r.facility),
                        fmt(r.close),
                        fmt(r.far),
                        fmt(r.max),
                    ]
                })
                .collect();
            print_csv(&["gamma", "facility", "close", "far", "max"], &rows)?;
            eprintln!("argmin {} min {}", fmt(scan.argmin), fmt(scan.min));
        }
        Format::Json => {
            let rows: Vec<Value> = scan
                .rows
                .iter()
                .map(|r| json!({"gamma": r.gamma, "facility": r.facility, "close": r.close, "far": r.far, "max": r.max}))
                .collect();
            let v = json!({"argmin": scan.argmin, "min": scan.min, "rows": rows});
            say(&dump::to_pretty(&v))?;
        }
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let mut problems: Vec<String> = Vec::new();
    if let Some(path) = &a.solution {
        let text = fs::read_to_string(path)?;
        let sol: IntegralSolution = serde_json::from_str(&text).map_err(FtfpError::from)?;
        problems.extend(
            validate_integral(&inst, &sol)
                .into_iter()
                .map(|v| v.to_string()),
        );
    } else {
        let gamma = gamma_or_default(a.gamma);
        let prep = prepare(&inst)?;
        problems.extend(
            check_complementary_slackness(&inst, &prep.lp.primal, &prep.lp.dual)
                .into_iter()
                .map(|v| format!("LP: {v}")),
        );
        let red = &prep.reduction;
        if red.residual_instance.num_clients() > 0 {
            let (ri, rp, rd) = (
                &red.residual_instance,
                &red.residual_fractional,
                &prep.residual_dual,
            );
            let ps = ftfp_core::partition::partition(ri, rp, rd)?;
            problems.extend(
                verify_properties(&ps, rp, rd)
                    .into_iter()
                    .map(|v| format!("partition: {v}")),
            );
            let cfp = partition_close_far(ri, rp, &gamma)?;
            problems.extend(
                verify_properties_cf(&cfp)
                    .into_iter()
                    .map(|v| format!("close/far: {v}")),
            );
            problems.extend(
                check_dual_edges(&cfp.base, rd)
                    .into_iter()
                    .map(|v| format!("close/far: {v}")),
            );
        }
    }
    for p in &problems {
        say(p)?;
    }
    if problems.is_empty() {
        say("ok")?;
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{} violations", problems.len())))
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(text) = std::env::var("FTFP_THREADS") else {
        return Ok(());
    };
    let n: usize = text.trim().parse().map_err(|_| {
        Failure::Input(format!(
            "FTFP_THREADS must be a positive integer, got {text:?}"
        ))
    })?;
    if n == 0 {
        return Err(Failure::Input("FTFP_THREADS must be positive".to_string()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Complete(a) => cmd_complete(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Partition(a) => cmd_partition(a),
        Command::Round(a) => cmd_round(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bench(a) => cmd_bench(a),
        Command::GammaScan(a) => cmd_gamma_scan(a),
        Command::Verify(a) => cmd_verify(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
