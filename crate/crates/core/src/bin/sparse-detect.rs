//! Command-line front end: risk simulation, boundary evaluation, design
//! auditing, nondetectability estimation, and exact-oracle checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use sparse_detect::boundary::{rho_star, BoundaryFamily, SignalRule};
use sparse_detect::design::{
    audit_with_slack, default_sigma_p, estimate_nondetect_with_slack, load_design, make_anova,
    make_banded, BinaryDesign, DesignFormat,
};
use sparse_detect::error::{Error, Result};
use sparse_detect::model::{
    LinkFunction, RegimeSpec, ResponseVector, Sidedness, SparseSignalPrior,
};
use sparse_detect::oracle::{bayes_lr, bayes_lr_second_moment};
use sparse_detect::risk::{persist_results, run_experiment, ExperimentSpec, RiskCurve};
use sparse_detect::rng::{stream, stream_id};
use sparse_detect::stats::TestName;

const SEED_ENV: &str = "SPARSE_DETECT_SEED";

#[derive(Parser)]
#[command(name = "sparse-detect", version, about = "Sparse-signal detection toolkit for binary designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate empirical risk curves on a balanced design.
    Simulate(SimulateArgs),
    /// Evaluate detection-boundary exponents over an alpha grid.
    Boundary(BoundaryArgs),
    /// Audit the structure of a design matrix.
    Audit(AuditArgs),
    /// Estimate the row-intersection nondetectability condition.
    Nondetect(NondetectArgs),
    /// Exact integrated-likelihood oracle checks on a small instance.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of columns.
    #[arg(long)]
    p: Option<usize>,
    /// Replicates per column.
    #[arg(long)]
    r: Option<u64>,
    /// Number of signal coordinates (alternative to --alpha).
    #[arg(long)]
    k: Option<usize>,
    /// Sparsity exponent; k is derived as p^(1-alpha).
    #[arg(long)]
    alpha: Option<f64>,
    /// Link function: logistic | probit | uniform.
    #[arg(long)]
    link: Option<String>,
    /// Grid of t values: comma list (0,1,2) or range (0:6:1).
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
    /// Monte Carlo trials per arm and grid point.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; falls back to SPARSE_DETECT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated test names.
    #[arg(long)]
    tests: Option<String>,
    /// Signal rule: fig4-clamped | fig5 | explicit-A.
    #[arg(long = "signal-rule")]
    signal_rule: Option<String>,
    /// Boundary family for the offset rules.
    #[arg(long)]
    family: Option<String>,
    /// Sign structure: two-sided | one-sided.
    #[arg(long)]
    sidedness: Option<String>,
    /// Epsilon in the HC and Max cutoffs.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output CSV path; a JSON spec echo is written next to it.
    /// Without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

/// Config-file mirror of the simulate flags; keys are exactly the flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    p: Option<usize>,
    r: Option<u64>,
    k: Option<usize>,
    alpha: Option<f64>,
    link: Option<String>,
    #[serde(rename = "t-grid")]
    t_grid: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
    tests: Option<String>,
    #[serde(rename = "signal-rule")]
    signal_rule: Option<String>,
    family: Option<String>,
    sidedness: Option<String>,
    epsilon: Option<f64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
}

#[derive(Args)]
struct BoundaryArgs {
    /// linear | binary | binomial | max-binary | max-binomial.
    #[arg(long)]
    family: String,
    /// Alpha grid: single value, comma list, or range (0.6:1.0:0.05).
    #[arg(long = "alpha-grid")]
    alpha_grid: String,
    /// Link for the binary families.
    #[arg(long, default_value = "logistic")]
    link: String,
    /// Output CSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DesignSource {
    /// Path to a design file (requires --format).
    #[arg(long)]
    design: Option<PathBuf>,
    /// dense-csv | sparse-triplet.
    #[arg(long)]
    format: Option<String>,
    /// Balanced design shorthand: "p,r".
    #[arg(long)]
    anova: Option<String>,
    /// Banded design shorthand: "n,p,l1,l2".
    #[arg(long)]
    banded: Option<String>,
}

impl DesignSource {
    fn load(&self) -> Result<BinaryDesign> {
        match (&self.design, &self.anova, &self.banded) {
            (Some(path), None, None) => {
                let format: DesignFormat = self
                    .format
                    .as_deref()
                    .ok_or_else(|| Error::invalid("--design requires --format"))?
                    .parse()?;
                load_design(path, format)
            }
            (None, Some(spec), None) => {
                let v = parse_usize_list(spec, 2, "--anova expects 'p,r'")?;
                make_anova(v[0], v[1] as u64)
            }
            (None, None, Some(spec)) => {
                let v = parse_usize_list(spec, 4, "--banded expects 'n,p,l1,l2'")?;
                Ok(make_banded(v[0], v[1], v[2], v[3])?.design)
            }
            _ => Err(Error::invalid(
                "specify exactly one design source: --design, --anova, or --banded",
            )),
        }
    }
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    source: DesignSource,
    /// Judge asymptotic conditions against this p instead of the design's.
    #[arg(long = "p-for-ratios")]
    p_for_ratios: Option<usize>,
    /// Finite-sample slack: "x << y" is flagged when x < y / slack.
    #[arg(long, default_value_t = 1.0)]
    slack: f64,
}

#[derive(Args)]
struct NondetectArgs {
    #[command(flatten)]
    source: DesignSource,
    /// Support size of the sampled sparse alternatives.
    #[arg(long)]
    k: usize,
    /// Closeness radius (default: ceil(log p)).
    #[arg(long)]
    sigma: Option<u32>,
    /// Number of sampled support pairs.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    slack: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    r: u64,
    /// Signal strength of the prior.
    #[arg(long = "A", default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value = "logistic")]
    link: String,
    /// Independent signs per coordinate (default).
    #[arg(long = "two-sided", conflicts_with = "one_sided")]
    two_sided: bool,
    /// One shared sign across the support.
    #[arg(long = "one-sided")]
    one_sided: bool,
    /// Null Monte Carlo draws for the cross-check.
    #[arg(long = "mc-draws", default_value_t = 20_000)]
    mc_draws: usize,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Boundary(args) => cmd_boundary(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Nondetect(args) => cmd_nondetect(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .parse()
            .map_err(|_| Error::invalid(format!("{SEED_ENV}='{text}' is not a valid u64 seed"))),
        Err(_) => Ok(0),
    }
}

/// Parse "a,b,c" or "start:stop:step" into a float grid.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |detail: &str| Error::invalid(format!("invalid grid '{text}': {detail}"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("range form is start:stop:step"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad("bad start"))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad("bad stop"))?;
        let step: f64 = parts[2].trim().parse().map_err(|_| bad("bad step"))?;
        if step <= 0.0 || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 0.5).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    text.split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|_| bad(&format!("bad value '{f}'"))))
        .collect()
}

fn parse_usize_list(text: &str, want: usize, usage: &str) -> Result<Vec<usize>> {
    let vals: Vec<usize> = text
        .split(',')
        .map(|f| f.trim().parse().map_err(|_| Error::invalid(usage.to_string())))
        .collect::<Result<_>>()?;
    if vals.len() != want {
        return Err(Error::invalid(usage.to_string()));
    }
    Ok(vals)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let file: SimulateConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|source| Error::Io { path: path.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| {
                Error::invalid(format!("config file {}: {e}", path.display()))
            })?
        }
        None => SimulateConfig::default(),
    };

    let p = args.p.or(file.p).ok_or_else(|| Error::invalid("missing --p"))?;
    let r = args.r.or(file.r).ok_or_else(|| Error::invalid("missing --r"))?;
    let k = match (args.k.or(file.k), args.alpha.or(file.alpha)) {
        (Some(k), _) => k,
        (None, Some(alpha)) => RegimeSpec::from_alpha(p, alpha)?.k,
        (None, None) => return Err(Error::invalid("missing --k (or --alpha)")),
    };
    let link: LinkFunction =
        args.link.or(file.link).unwrap_or_else(|| "logistic".into()).parse()?;
    let t_grid = parse_grid(
        &args
            .t_grid
            .or(file.t_grid)
            .ok_or_else(|| Error::invalid("missing --t-grid"))?,
    )?;
    let tests: Vec<TestName> = match args.tests.or(file.tests) {
        Some(list) => list.split(',').map(|name| name.trim().parse()).collect::<Result<_>>()?,
        None => vec![TestName::Glrt, TestName::HcHalfrange, TestName::Max],
    };
    let signal_rule: SignalRule = args
        .signal_rule
        .or(file.signal_rule)
        .unwrap_or_else(|| "fig4-clamped".into())
        .parse()?;
    let sidedness = match args.sidedness.or(file.sidedness).as_deref() {
        None | Some("two-sided") => Sidedness::TwoSided,
        Some("one-sided") => Sidedness::OneSided,
        Some(other) => {
            return Err(Error::invalid(format!("unknown sidedness '{other}'")))
        }
    };
    let spec = ExperimentSpec {
        p,
        r,
        k,
        link,
        sidedness,
        tests,
        t_grid,
        signal_rule,
        family: args.family.or(file.family).unwrap_or_else(|| "binary".into()),
        n_trials: args.trials.or(file.trials).unwrap_or(300),
        seed: resolve_seed(args.seed.or(file.seed))?,
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(0.05),
    };
    spec.family()?; // validate the family name before the long run

    let curve = run_experiment(&spec, args.workers.or(file.workers))?;
    for (test, reason) in &curve.skipped {
        eprintln!("warning: {} unavailable: {reason}", test.as_str());
    }
    match args.out.or(file.out) {
        Some(out) => {
            let json = out.with_extension("json");
            persist_results(&curve, &out, &json)?;
            eprintln!("wrote {} and {}", out.display(), json.display());
        }
        None => print!("{}", curve_csv(&curve)),
    }
    Ok(())
}

fn curve_csv(curve: &RiskCurve) -> String {
    let mut out = String::from("test,t,A,risk,stderr,n_trials,seed\n");
    for pt in &curve.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            pt.test.as_str(),
            pt.t,
            pt.signal_strength,
            pt.risk,
            pt.stderr,
            pt.n_trials,
            curve.spec.seed
        ));
    }
    out
}

fn cmd_boundary(args: BoundaryArgs) -> Result<()> {
    let link: LinkFunction = args.link.parse()?;
    let family = BoundaryFamily::parse(&args.family, link)?;
    let grid = parse_grid(&args.alpha_grid)?;
    let mut out = String::from("alpha,family,value\n");
    for &alpha in &grid {
        let value = rho_star(family, alpha)?;
        out.push_str(&format!("{alpha},{},{value}\n", args.family));
    }
    emit(args.out.as_deref(), &out)
}

fn cmd_audit(args: AuditArgs) -> Result<()> {
    let design = args.source.load()?;
    let p = args.p_for_ratios.unwrap_or_else(|| design.p());
    let report = audit_with_slack(&design, p, args.slack);
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn cmd_nondetect(args: NondetectArgs) -> Result<()> {
    let design = args.source.load()?;
    let sigma = args.sigma.unwrap_or_else(|| default_sigma_p(design.p()));
    let seed = resolve_seed(args.seed)?;
    let mut rng = stream(seed, stream_id(&[b'n' as u64]));
    let estimate =
        estimate_nondetect_with_slack(&design, args.k, sigma, args.pairs, args.slack, &mut rng)?;
    println!("{}", serde_json::to_string_pretty(&estimate).expect("estimate serializes"));
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let link: LinkFunction = args.link.parse()?;
    let sidedness = if args.one_sided { Sidedness::OneSided } else { Sidedness::TwoSided };
    let prior = SparseSignalPrior::new(args.p, args.k, args.a, sidedness)?;
    let design = make_anova(args.p, args.r)?;
    let seed = resolve_seed(args.seed)?;

    let second_moment = bayes_lr_second_moment(&design, &prior, link)?;

    // Null Monte Carlo cross-check of E[L] = 1 and E[L^2].
    let mut rng = stream(seed, stream_id(&[b'o' as u64]));
    let mut sum_l = 0.0f64;
    let mut sum_l2 = 0.0f64;
    let mut sum_l4 = 0.0f64;
    let mut max_dev_from_one = 0.0f64;
    for _ in 0..args.mc_draws {
        let y: Vec<u8> = (0..design.n()).map(|_| rand::Rng::gen::<bool>(&mut rng) as u8).collect();
        let l = bayes_lr(&design, &ResponseVector(y), &prior, link)?;
        sum_l += l;
        sum_l2 += l * l;
        sum_l4 += l * l * l * l;
        max_dev_from_one = max_dev_from_one.max((l - 1.0).abs());
    }
    let n = args.mc_draws as f64;
    let mc_mean = sum_l / n;
    let mc_second = sum_l2 / n;
    let se_second = ((sum_l4 / n - mc_second * mc_second) / n).sqrt();
    let delta_se = if se_second > 0.0 { (second_moment - mc_second).abs() / se_second } else { 0.0 };

    // Single-replicate identity: with r = 1 and independent signs the
    // likelihood ratio is constant.
    let identity = if args.r == 1 && sidedness == Sidedness::TwoSided {
        serde_json::json!({
            "applicable": true,
            "max_abs_deviation_from_one": max_dev_from_one,
            "verified": max_dev_from_one < 1e-10,
        })
    } else {
        serde_json::json!({ "applicable": false })
    };

    let report = serde_json::json!({
        "p": args.p,
        "k": args.k,
        "r": args.r,
        "signal_strength": args.a,
        "link": link.name(),
        "sidedness": if args.one_sided { "one-sided" } else { "two-sided" },
        "second_moment_exact": second_moment,
        "mc_draws": args.mc_draws,
        "mc_mean_l": mc_mean,
        "mc_second_moment": mc_second,
        "mc_second_moment_stderr": se_second,
        "second_moment_delta_in_stderr": delta_se,
        "single_replicate_identity": identity,
        "seed": seed,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
