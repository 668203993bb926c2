//! Subcommand implementations. Each returns the rendered report plus any
//! warnings; a report may be produced alongside a domain failure.

use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;
use twinmarket::{
    build_twin, check_crr_completeness, decompose, discount, hypothesis_report,
    indistinguishability_experiment, martingale_prob, price, replicate, simulate_incomplete,
    verify_replication, weighted_norm, Claim, CompleteTwin, Error as CoreError,
    IncompleteModelSpec, ModelKind, PredictableMagnitudes, SampledSignal, MAX_DEPTH,
};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{read_prices_file, write_prices};
use crate::report::{
    ClaimSpec, ExperimentOutput, HypothesisOutput, PriceReport, ReplicationReport,
    SimulationOutput, Step, TwinReport,
};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a complete twin of an observed price series
    Twin(TwinArgs),
    /// Price a claim in a complete twin or an explicit binomial tree
    Price(ClaimArgs),
    /// Build and verify the replicating hedge of a claim
    Replicate(ClaimArgs),
    /// Simulate a path of an incomplete model
    Simulate(ModelArgs),
    /// Compare a simulated path with its twin after tick rounding
    Experiment(ModelArgs),
    /// Tabulate twin feasibility over a list of epsilons
    Hypothesis(HypothesisArgs),
}

#[derive(Debug, Args)]
pub struct TwinArgs {
    /// Price CSV with header `t,price`
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClaimKind {
    Call,
    Put,
    Forward,
    CustomTable,
}

#[derive(Debug, Args)]
pub struct ClaimArgs {
    /// Twin report written by `twin`
    #[arg(long, conflicts_with_all = ["spot", "magnitudes"])]
    pub twin: Option<PathBuf>,
    /// Discounted spot of an explicit tree (with --magnitudes)
    #[arg(long, requires = "magnitudes")]
    pub spot: Option<f64>,
    /// Comma-separated step magnitudes of an explicit tree
    #[arg(long, value_delimiter = ',', requires = "spot")]
    pub magnitudes: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "call")]
    pub claim: ClaimKind,
    /// Strike in discounted units
    #[arg(long)]
    pub strike: Option<f64>,
    /// CSV `path,payoff` with one row per u/d path
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Time the hedge starts; defaults to -1 for a twin, 0 for a tree
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<i64>,
    /// Settlement time; defaults to s + 1 for a twin
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    RandomSizeBinomial,
    IidUniformMagnitude,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "random-size-binomial")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0.005)]
    pub low: f64,
    #[arg(long, default_value_t = 0.05)]
    pub high: f64,
    #[arg(long = "initial-price", default_value_t = 100.0)]
    pub initial_price: f64,
}

#[derive(Debug, Args)]
pub struct HypothesisArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated closeness targets
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.01,0.002")]
    pub epsilons: Vec<f64>,
}

/// Rendered report and whatever should accompany it.
#[derive(Debug)]
pub struct Outcome {
    pub body: String,
    pub warnings: Vec<String>,
    /// Failure to report after the body has been written.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Self {
            body,
            warnings: Vec::new(),
            failure: None,
        }
    }
}

pub fn execute(command: &Command, cfg: &RunConfig) -> CliResult<Outcome> {
    match command {
        Command::Twin(args) => cmd_twin(args, cfg),
        Command::Price(args) => cmd_price(args, cfg, false),
        Command::Replicate(args) => cmd_price(args, cfg, true),
        Command::Simulate(args) => cmd_simulate(args, cfg),
        Command::Experiment(args) => cmd_experiment(args, cfg),
        Command::Hypothesis(args) => cmd_hypothesis(args, cfg),
    }
}

fn render<T: Serialize>(
    cfg: &RunConfig,
    default: Format,
    value: &T,
    csv: impl FnOnce(&T) -> csv::Result<String>,
) -> CliResult<String> {
    match cfg.format_or(default) {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(value)
                .map_err(|e| CliError::Input(format!("cannot encode report: {e}")))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => csv(value).map_err(|e| CliError::Input(format!("cannot encode csv: {e}"))),
    }
}

fn path_str(path: &std::path::Path) -> String {
    path.display().to_string()
}

pub fn cmd_twin(args: &TwinArgs, cfg: &RunConfig) -> CliResult<Outcome> {
    let full = read_prices_file(&path_str(&args.input), cfg.rho, 1.0)?;
    let weights = cfg.weights()?;
    let full_returns = discount(&full)?;
    let prices = if full.len() - 1 > cfg.window {
        full.tail(cfg.window)?
    } else {
        full.clone()
    };

    let dropped = full.len() - prices.len();
    let dropped_tail_norm = if dropped == 0 {
        0.0
    } else {
        let (_, x) = decompose(&full_returns, &weights);
        let head = SampledSignal::new(
            x.times()[..dropped].to_vec(),
            x.values()[..dropped].to_vec(),
        )?;
        weighted_norm(&head, &weights)
    };

    let twin = build_twin(
        &prices,
        cfg.epsilon,
        &weights,
        &cfg.omega_grid()?,
        cfg.lambda,
    )?;
    let failure = twin.ensure_within_epsilon().err().map(CliError::from);
    let mut warnings = Vec::new();
    if !twin.validity.all_in_unit_interval {
        let times: Vec<String> = twin
            .validity
            .violations
            .iter()
            .map(|(t, _)| t.to_string())
            .collect();
        warnings.push(format!(
            "twin magnitudes leave (0, 1) at t = {}",
            times.join(", ")
        ));
    }
    let xi = discount(&prices)?.xi().to_vec();
    let report = TwinReport::new(
        cfg.clone(),
        prices.prices(),
        &xi,
        twin,
        full.len(),
        dropped_tail_norm,
    );
    let body = render(cfg, Format::Json, &report, TwinReport::to_csv)?;
    Ok(Outcome {
        body,
        warnings,
        failure,
    })
}

fn read_twin(path: &std::path::Path) -> CliResult<CompleteTwin> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path_str(path), e))?;
    let report: TwinReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: line {}: {e}", path.display(), e.line())))?;
    Ok(report.twin)
}

/// Tree inputs: magnitudes, discounted spot, bond at `s`, per-step growth.
struct Tree {
    mags: PredictableMagnitudes,
    spot: f64,
    bond: f64,
    rho: f64,
}

fn tree_from(args: &ClaimArgs, cfg: &RunConfig) -> CliResult<Tree> {
    if let (Some(spot), Some(steps)) = (args.spot, &args.magnitudes) {
        let s = args.s.unwrap_or(0);
        let depth = steps.len() as i64;
        let q = args.q.unwrap_or(s + depth);
        if q - s != depth {
            return Err(CliError::Input(format!(
                "{depth} magnitudes given for s = {s} to q = {q}"
            )));
        }
        return Ok(Tree {
            mags: PredictableMagnitudes::new(s, q, steps.clone())?,
            spot,
            bond: 1.0,
            rho: cfg.rho,
        });
    }
    let path = args
        .twin
        .as_ref()
        .ok_or_else(|| CliError::Input("pass --twin, or --spot with --magnitudes".into()))?;
    let twin = read_twin(path)?;
    let s = args.s.unwrap_or(-1);
    let q = args.q.unwrap_or(s + 1);
    let spot = twin.discounted_price(s).ok_or_else(|| {
        CliError::Input(format!(
            "s = {s} lies outside the twin window {}..=0",
            twin.start
        ))
    })?;
    if q < s {
        return Err(CliError::Input(format!("q = {q} is before s = {s}")));
    }
    let a: Vec<f64> = (s + 1..=q)
        .map(|t| twin.magnitude_at(t).unwrap_or_else(|| twin.magnitude(t)))
        .collect();
    Ok(Tree {
        mags: PredictableMagnitudes::new(s, q, a)?,
        spot,
        bond: twin.bond_base * twin.rho.powi(s as i32),
        rho: twin.rho,
    })
}

fn claim_from(args: &ClaimArgs, depth: usize) -> CliResult<(Claim, ClaimSpec)> {
    let need_strike = || {
        args.strike
            .ok_or_else(|| CliError::Input("this claim needs --strike".into()))
    };
    let spec = |kind: &str, strike: Option<f64>| ClaimSpec {
        kind: kind.into(),
        strike,
        table: None,
    };
    Ok(match args.claim {
        ClaimKind::Call => {
            let k = need_strike()?;
            (Claim::call(k), spec("call", Some(k)))
        }
        ClaimKind::Put => {
            let k = need_strike()?;
            (Claim::put(k), spec("put", Some(k)))
        }
        ClaimKind::Forward => (Claim::forward(), spec("forward", None)),
        ClaimKind::CustomTable => {
            let path = args
                .table
                .as_ref()
                .ok_or_else(|| CliError::Input("custom-table needs --table".into()))?;
            let payoffs = read_table(path, depth)?;
            let mut spec = spec("custom-table", None);
            spec.table = Some(path_str(path));
            (Claim::table(payoffs), spec)
        }
    })
}

/// Reads a `path,payoff` table covering every u/d path of `depth` steps.
pub fn read_table(path: &std::path::Path, depth: usize) -> CliResult<Vec<f64>> {
    if depth > MAX_DEPTH {
        return Err(CoreError::DepthTooLarge {
            depth,
            max: MAX_DEPTH,
        }
        .into());
    }
    let name = path_str(path);
    let file = std::fs::File::open(path).map_err(|e| CliError::io(&name, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{name}: line 1: {e}")))?;
    if headers.len() != 2 || &headers[0] != "path" || &headers[1] != "payoff" {
        return Err(CliError::Input(format!(
            "{name}: line 1: expected header `path,payoff`"
        )));
    }
    let mut payoffs = vec![None; 1usize << depth];
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let fail = |msg: String| CliError::Input(format!("{name}: line {line}: {msg}"));
        let moves = &record[0];
        if moves.len() != depth {
            return Err(fail(format!("path `{moves}` does not have {depth} steps")));
        }
        let mut bits = 0usize;
        for (k, c) in moves.chars().enumerate() {
            match c {
                'u' | 'U' => bits |= 1 << k,
                'd' | 'D' => {}
                _ => return Err(fail(format!("path `{moves}` must use only u and d"))),
            }
        }
        let value: f64 = record[1]
            .parse()
            .map_err(|_| fail(format!("payoff `{}` is not a number", &record[1])))?;
        if !value.is_finite() {
            return Err(fail(format!("payoff `{}` is not finite", &record[1])));
        }
        if payoffs[bits].replace(value).is_some() {
            return Err(fail(format!("path `{moves}` appears twice")));
        }
    }
    let missing = payoffs.iter().filter(|p| p.is_none()).count();
    if missing > 0 {
        return Err(CliError::Input(format!(
            "{name}: {missing} of {} paths have no payoff",
            payoffs.len()
        )));
    }
    Ok(payoffs.into_iter().map(Option::unwrap).collect())
}

fn magnitude_failure(mags: &PredictableMagnitudes) -> Option<CliError> {
    check_crr_completeness(mags).first_violation?;
    let bad: Vec<String> = mags
        .steps()
        .iter()
        .enumerate()
        .filter(|(_, &a)| !(a > 0.0 && a < 1.0))
        .map(|(k, &a)| format!("t = {} (a = {a})", mags.s() + 1 + k as i64))
        .collect();
    Some(CliError::Domain(format!(
        "magnitudes outside (0, 1) at {}",
        bad.join(", ")
    )))
}

pub fn cmd_price(args: &ClaimArgs, cfg: &RunConfig, hedge: bool) -> CliResult<Outcome> {
    let tree = tree_from(args, cfg)?;
    if let Some(err) = magnitude_failure(&tree.mags) {
        return Err(err);
    }
    if tree.mags.depth() > MAX_DEPTH {
        return Err(CoreError::DepthTooLarge {
            depth: tree.mags.depth(),
            max: MAX_DEPTH,
        }
        .into());
    }
    let (claim, claim_spec) = claim_from(args, tree.mags.depth())?;
    let probs = martingale_prob(&tree.mags)?;
    let steps = (tree.mags.s() + 1..)
        .zip(tree.mags.steps().iter().zip(&probs))
        .map(|(t, (&magnitude, &up_probability))| Step {
            t,
            magnitude,
            up_probability,
        })
        .collect();
    let discounted = price(&claim, &tree.mags, tree.spot)?;
    let plan = replicate(&claim, &tree.mags, tree.spot, tree.bond, tree.rho)?;
    let pricing = PriceReport {
        config: cfg.clone(),
        claim: claim_spec,
        s: tree.mags.s(),
        q: tree.mags.q(),
        spot: tree.spot,
        bond_at_s: tree.bond,
        steps,
        price: discounted,
        initial_wealth: plan.initial_wealth,
    };
    let body = if hedge {
        let report = ReplicationReport {
            residual: verify_replication(&plan, &claim, &tree.mags, tree.spot, tree.bond, tree.rho),
            self_financing_gap: plan.max_self_financing_gap(),
            nodes: ReplicationReport::nodes_from(&plan),
            pricing,
        };
        render(cfg, Format::Json, &report, ReplicationReport::to_csv)?
    } else {
        render(cfg, Format::Json, &pricing, PriceReport::to_csv)?
    };
    Ok(Outcome::ok(body))
}

fn model_spec(args: &ModelArgs, cfg: &RunConfig) -> CliResult<IncompleteModelSpec> {
    let spec = IncompleteModelSpec {
        kind: match args.kind {
            KindArg::RandomSizeBinomial => ModelKind::RandomSizeBinomial,
            KindArg::IidUniformMagnitude => ModelKind::IidUniformMagnitude,
        },
        magnitude_low: args.low,
        magnitude_high: args.high,
        horizon: cfg.window,
        seed: cfg.seed,
        rho: cfg.rho,
        initial_price: args.initial_price,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_simulate(args: &ModelArgs, cfg: &RunConfig) -> CliResult<Outcome> {
    let spec = model_spec(args, cfg)?;
    let prices = simulate_incomplete(&spec)?;
    let body = match cfg.format_or(Format::Csv) {
        Format::Csv => {
            let mut out = Vec::new();
            write_prices(&mut out, &prices).map_err(|e| CliError::io("<buffer>", e))?;
            String::from_utf8(out).expect("csv output is utf-8")
        }
        Format::Json => {
            let output = SimulationOutput {
                config: cfg.clone(),
                spec,
                prices: prices
                    .times()
                    .zip(prices.prices().iter().copied())
                    .collect(),
            };
            render(cfg, Format::Json, &output, |_| unreachable!())?
        }
    };
    Ok(Outcome::ok(body))
}

pub fn cmd_experiment(args: &ModelArgs, cfg: &RunConfig) -> CliResult<Outcome> {
    let spec = model_spec(args, cfg)?;
    let report = indistinguishability_experiment(
        &spec,
        cfg.epsilon,
        cfg.tick,
        &cfg.weights()?,
        &cfg.omega_grid()?,
        cfg.lambda,
    )?;
    let mut warnings = Vec::new();
    if report.epsilon_exceeds_half_tick {
        warnings.push(format!(
            "epsilon {} exceeds half the tick {}; rounded prices may differ",
            cfg.epsilon, cfg.tick
        ));
    }
    if !report.within_epsilon {
        warnings.push(format!(
            "no band limit met epsilon {}; best combined error {}",
            cfg.epsilon, report.combined_error
        ));
    }
    let output = ExperimentOutput {
        config: cfg.clone(),
        report,
    };
    Ok(Outcome {
        body: render(cfg, Format::Json, &output, ExperimentOutput::to_csv)?,
        warnings,
        failure: None,
    })
}

pub fn cmd_hypothesis(args: &HypothesisArgs, cfg: &RunConfig) -> CliResult<Outcome> {
    let prices = read_prices_file(&path_str(&args.input), cfg.rho, 1.0)?;
    let prices = if prices.len() - 1 > cfg.window {
        prices.tail(cfg.window)?
    } else {
        prices
    };
    let mut epsilons = args.epsilons.clone();
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(CliError::Input("epsilons must be positive".into()));
    }
    epsilons.sort_by(|a, b| b.total_cmp(a));
    let table = hypothesis_report(
        &prices,
        &epsilons,
        &cfg.weights()?,
        &cfg.omega_grid()?,
        cfg.lambda,
    )?;
    let output = HypothesisOutput {
        config: cfg.clone(),
        table,
    };
    Ok(Outcome::ok(render(
        cfg,
        Format::Json,
        &output,
        HypothesisOutput::to_csv,
    )?))
}
