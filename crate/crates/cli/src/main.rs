use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use manna::generate::{gen_nonexistence, gen_partition_reduction, gen_random, PartitionVariant};
use manna::identical::approx_mms;
use manna::mixed::{solve_alpha_mms_po, Outcome, SolverParams};
use manna::model::{
    allocation_to_json, check_tau_condition, instance_to_json, parse_allocation, parse_instance,
    satisfies_alpha_mms, welfare,
};
use manna::oracle::{exact_alpha_star, exact_mms, find_gamma_dominator};
use manna::rational::{format_rational, parse_rational};
use manna::search::{opt_alpha_mms_po, SearchParams};
use manna::{Allocation, Error, Instance, Rational};

#[derive(Parser)]
#[command(
    name = "manna",
    version,
    about = "Approximate MMS allocations of goods and chores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find an (alpha - eps)-MMS and gamma-PO allocation, or report that no alpha-MMS one exists.
    Solve(SolveArgs),
    /// Approximate MMS value of each agent.
    Mms(MmsArgs),
    /// Search for the largest alpha the solver can certify.
    Opt(OptArgs),
    /// Check an allocation against alpha-MMS and, with --use-oracle, gamma-PO.
    Verify(VerifyArgs),
    /// Exact brute-force answers for small instances.
    Oracle(OracleArgs),
    /// Write a generated instance.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "1/10", value_parser = rational)]
    epsilon: Rational,
    /// Enumeration budget; defaults to MANNA_BUDGET or the library default.
    #[arg(long)]
    big_budget: Option<u64>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_parser = rational)]
    alpha: Rational,
    #[arg(long, default_value = "1/10", value_parser = rational)]
    gamma: Rational,
    /// Refuse instances violating the tau-condition.
    #[arg(long, value_parser = rational)]
    tau: Option<Rational>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MmsArgs {
    instance: PathBuf,
    /// Only report this agent.
    #[arg(long)]
    agent: Option<usize>,
    #[arg(long, value_parser = rational)]
    tau: Option<Rational>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OptArgs {
    instance: PathBuf,
    #[arg(long, default_value = "1/10", value_parser = rational)]
    gamma: Rational,
    #[arg(long, default_value = "1/1024", value_parser = rational)]
    delta: Rational,
    #[arg(long, value_parser = rational)]
    tau: Option<Rational>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    allocation: PathBuf,
    #[arg(long, default_value = "1", value_parser = rational)]
    alpha: Rational,
    #[arg(long, default_value = "0", value_parser = rational)]
    gamma: Rational,
    /// Use exact MMS values and run the dominance search.
    #[arg(long)]
    use_oracle: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleQuery {
    Mms,
    AlphaStar,
    Po,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    #[arg(value_enum)]
    query: OracleQuery,
    /// Allocation to test, required for `po`.
    #[arg(long)]
    allocation: Option<PathBuf>,
    #[arg(long, default_value = "0", value_parser = rational)]
    gamma: Rational,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    TwoAgent,
    Tau,
}

#[derive(Subcommand)]
enum GenCommand {
    /// The fixed three-agent instance with no 39/40-MMS allocation.
    Nonexistence {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identical-agent instance encoding a partition problem.
    Partition {
        /// Comma-separated nonnegative integer weights.
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<u64>,
        #[arg(long, value_enum, default_value = "two-agent")]
        variant: Variant,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_parser = rational)]
        tau: Option<Rational>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Uniform integer values, resampled until the tau-condition holds.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = -10, allow_hyphen_values = true)]
        lo: i64,
        #[arg(long, default_value_t = 10, allow_hyphen_values = true)]
        hi: i64,
        #[arg(long, default_value = "1/4", value_parser = rational)]
        tau: Rational,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn rational(text: &str) -> Result<Rational, String> {
    parse_rational(text).map_err(|e| format!("{text:?} is not a rational number ({e:?})"))
}

/// A failure reported as JSON on stderr with exit code 1.
struct Failure(Value);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Format(_) => "format",
            Error::Param(_) => "parameter",
            Error::Budget { .. } => "budget",
            Error::ZeroTotal { .. } => "zero_total",
            Error::TauViolation { .. } => "tau_violation",
            Error::Precondition(_) => "precondition",
            Error::Dimension(_) => "dimension",
            Error::Invariant(_) => "invariant",
        };
        let mut doc = json!({ "error": kind, "message": e.to_string() });
        if let Error::TauViolation { agents } = &e {
            doc["agents"] = json!(agents);
        }
        Failure(doc)
    }
}

impl From<manna::FormatError> for Failure {
    fn from(e: manna::FormatError) -> Self {
        Error::from(e).into()
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure(json!({ "error": "io", "message": format!("{}: {e}", path.display()) }))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    Ok(parse_instance(&read(path)?)?)
}

fn budget(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match std::env::var("MANNA_BUDGET") {
        Ok(text) => text.trim().parse().map_err(|_| {
            Failure(json!({ "error": "parameter", "message": format!("MANNA_BUDGET is not an integer: {text:?}") }))
        }),
        Err(_) => Ok(manna::DEFAULT_BUDGET),
    }
}

fn check_tau(inst: &Instance, tau: &Option<Rational>) -> Result<(), Failure> {
    if let Some(tau) = tau {
        let agents: Vec<usize> = check_tau_condition(inst, tau)
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(i, _)| i)
            .collect();
        if !agents.is_empty() {
            return Err(Error::TauViolation { agents }.into());
        }
    }
    Ok(())
}

/// JSON goes to `out` when given, with a one-line summary on stdout; otherwise to stdout.
fn emit(doc: &Value, out: &Option<PathBuf>, summary: &str) -> Result<(), Failure> {
    let text = doc.to_string();
    match out {
        Some(path) => {
            fs::write(path, text + "\n").map_err(|e| io_failure(path, e))?;
            println!("{summary}");
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn rationals(values: &[Rational]) -> Vec<String> {
    values.iter().map(format_rational).collect()
}

fn exact_profile(inst: &Instance, budget: u64) -> Result<Vec<Rational>, Failure> {
    (0..inst.n())
        .map(|i| Ok(exact_mms(inst.row(i), inst.n(), budget)?.0))
        .collect()
}

fn solve(args: SolveArgs) -> Result<ExitCode, Failure> {
    let inst = load_instance(&args.instance)?;
    check_tau(&inst, &args.tau)?;
    let params = SolverParams {
        tau: args.tau,
        big_budget: budget(args.common.big_budget)?,
        threads: args.threads,
        ..SolverParams::new(args.alpha.clone(), args.common.epsilon, args.gamma)
    };
    match solve_alpha_mms_po(&inst, &params)? {
        Outcome::Found(s) => {
            let doc = allocation_to_json(&inst, &s.allocation);
            let summary = format!(
                "found an allocation with welfare {}",
                format_rational(&welfare(&inst, &s.allocation))
            );
            emit(&doc, &args.common.out, &summary)?;
            Ok(ExitCode::SUCCESS)
        }
        Outcome::NoAlphaMms => {
            let message = format!("no {}-MMS allocation exists", format_rational(&args.alpha));
            let doc = json!({ "alpha": format_rational(&args.alpha), "result": message });
            emit(&doc, &args.common.out, &message)?;
            Ok(ExitCode::from(2))
        }
    }
}

fn mms(args: MmsArgs) -> Result<ExitCode, Failure> {
    let inst = load_instance(&args.instance)?;
    check_tau(&inst, &args.tau)?;
    let budget = budget(args.common.big_budget)?;
    let agents: Vec<usize> = match args.agent {
        Some(a) if a >= inst.n() => {
            return Err(
                Error::Param(format!("agent {a} out of range for {} agents", inst.n())).into(),
            )
        }
        Some(a) => vec![a],
        None => (0..inst.n()).collect(),
    };
    let mut values = Vec::new();
    for &i in &agents {
        values.push(approx_mms(inst.row(i), inst.n(), &args.common.epsilon, budget)?.0);
    }
    let doc = json!({
        "agents": agents,
        "epsilon": format_rational(&args.common.epsilon),
        "mms": rationals(&values),
    });
    emit(
        &doc,
        &args.common.out,
        &format!("MMS estimates {}", rationals(&values).join(" ")),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn opt(args: OptArgs) -> Result<ExitCode, Failure> {
    let inst = load_instance(&args.instance)?;
    check_tau(&inst, &args.tau)?;
    let params = SearchParams {
        delta: args.delta,
        tau: args.tau,
        big_budget: budget(args.common.big_budget)?,
        threads: args.threads,
        ..SearchParams::new(args.common.epsilon, args.gamma)
    };
    let r = opt_alpha_mms_po(&inst, &params)?;
    let mut doc = allocation_to_json(&inst, &r.allocation);
    doc["alpha"] = json!(format_rational(&r.alpha));
    doc["probes"] = r
        .probes
        .iter()
        .map(|(a, ok)| json!({ "alpha": format_rational(a), "found": ok }))
        .collect();
    emit(
        &doc,
        &args.common.out,
        &format!("best alpha {}", format_rational(&r.alpha)),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode, Failure> {
    let inst = load_instance(&args.instance)?;
    let alloc = parse_allocation(&inst, &read(&args.allocation)?)?;
    let budget = budget(args.common.big_budget)?;
    let mms = if args.use_oracle {
        exact_profile(&inst, budget)?
    } else {
        (0..inst.n())
            .map(|i| Ok(approx_mms(inst.row(i), inst.n(), &args.common.epsilon, budget)?.0))
            .collect::<Result<_, Failure>>()?
    };
    let alpha_mms = satisfies_alpha_mms(&inst, &alloc, &mms, &args.alpha)?;
    let mut doc = json!({
        "alpha": format_rational(&args.alpha),
        "alpha_mms": alpha_mms,
        "mms": rationals(&mms),
        "mms_source": if args.use_oracle { "exact" } else { "approximate" },
        "values": rationals(&inst.own_values(&alloc)),
        "gamma_po": Value::Null,
    });
    if args.use_oracle {
        let dominator = find_gamma_dominator(&inst, &alloc, &args.gamma, budget)?;
        doc["gamma"] = json!(format_rational(&args.gamma));
        doc["gamma_po"] = json!(dominator.is_none());
        if let Some(d) = dominator {
            doc["dominator"] = allocation_to_json(&inst, &d);
        }
    }
    emit(&doc, &args.common.out, &format!("alpha-MMS: {alpha_mms}"))?;
    Ok(ExitCode::SUCCESS)
}

fn oracle(args: OracleArgs) -> Result<ExitCode, Failure> {
    let inst = load_instance(&args.instance)?;
    let budget = budget(args.common.big_budget)?;
    let (doc, summary) = match args.query {
        OracleQuery::Mms => {
            let mms = exact_profile(&inst, budget)?;
            let summary = format!("exact MMS {}", rationals(&mms).join(" "));
            (json!({ "mms": rationals(&mms) }), summary)
        }
        OracleQuery::AlphaStar => {
            let mms = exact_profile(&inst, budget)?;
            let star = exact_alpha_star(&inst, &mms, budget)?;
            let summary = format!("best alpha {}", format_rational(&star));
            (
                json!({ "alpha_star": format_rational(&star), "mms": rationals(&mms) }),
                summary,
            )
        }
        OracleQuery::Po => {
            let path = args
                .allocation
                .ok_or_else(|| Failure::from(Error::Param("`po` needs --allocation".into())))?;
            let alloc: Allocation = parse_allocation(&inst, &read(&path)?)?;
            let dominator = find_gamma_dominator(&inst, &alloc, &args.gamma, budget)?;
            let mut doc =
                json!({ "gamma": format_rational(&args.gamma), "gamma_po": dominator.is_none() });
            if let Some(d) = &dominator {
                doc["dominator"] = allocation_to_json(&inst, d);
            }
            (doc, format!("gamma-PO: {}", dominator.is_none()))
        }
    };
    emit(&doc, &args.common.out, &summary)?;
    Ok(ExitCode::SUCCESS)
}

fn generate(cmd: GenCommand) -> Result<ExitCode, Failure> {
    let (inst, out) = match cmd {
        GenCommand::Nonexistence { out } => (gen_nonexistence(), out),
        GenCommand::Partition {
            weights,
            variant,
            n,
            tau,
            out,
        } => {
            let variant = match variant {
                Variant::TwoAgent => PartitionVariant::TwoAgent,
                Variant::Tau => match (n, tau) {
                    (Some(n), Some(tau)) => PartitionVariant::Tau { n, tau },
                    _ => {
                        return Err(
                            Error::Param("the tau variant needs --n and --tau".into()).into()
                        )
                    }
                },
            };
            (gen_partition_reduction(&weights, &variant)?, out)
        }
        GenCommand::Random {
            n,
            m,
            lo,
            hi,
            tau,
            seed,
            out,
        } => (gen_random(n, m, lo, hi, &tau, seed)?, out),
    };
    let summary = format!("{} agents, {} items", inst.n(), inst.m());
    emit(&instance_to_json(&inst), &out, &summary)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // Exit code 2 means non-existence here, so usage errors must not use it.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", json!({ "error": "usage", "message": message.trim() }));
            return ExitCode::FAILURE;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Mms(a) => mms(a),
        Command::Opt(a) => opt(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
        Command::Gen(c) => generate(c),
    };
    match result {
        Ok(code) => code,
        Err(Failure(doc)) => {
            eprintln!("{doc}");
            ExitCode::FAILURE
        }
    }
}
