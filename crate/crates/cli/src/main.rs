use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use switchcost_core::data::contract::derived_to_csv;
use switchcost_core::data::{
    derive_contract, load_contracts, load_market_series, synthesize_dataset, CostTable, DeriveConfig, MarketSeries,
    SynthConfig,
};
use switchcost_core::gmm::counterfactual::AverageContract;
use switchcost_core::gmm::{
    counterfactual_margins, estimate, Dataset, EstimationConfig, GmmResult, ResultsTable, Scenario, StructuralParams,
};
use switchcost_core::io::{read_json, to_json_string};
use switchcost_core::model::ModelParams;
use switchcost_core::solver::{simulate_path, solve, steady_state_markup};
use switchcost_core::sweep::{records_to_csv, run_sweep_with_workers, sweep_report, GridSpec};

const USAGE: u8 = 1;
const FAILURE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "switchcost",
    version,
    about = "Switching-cost duopoly: equilibria, parameter sweeps, tariff data and GMM estimation",
    after_help = "Exit status: 0 on success, 1 on a usage or input error, 2 when a computation fails \
(for example no stable equilibrium, or the estimator does not converge).\n\
Output goes to the file given by -o; `-o -` (the default) writes data to stdout. \
Diagnostics always go to stderr.\n\
JSON numbers round-trip exactly; CSV numbers carry 17 significant digits; dates are ISO-8601."
)]
struct Cli {
    /// Worker threads for parallel stages. Results do not depend on it.
    #[arg(long, global = true, env = "SWITCHCOST_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Solve(SolveArgs),
    Sweep(SweepArgs),
    Simulate(SimulateArgs),
    Derive(DeriveArgs),
    Synth(SynthArgs),
    Estimate(EstimateArgs),
    Counterfactual(CounterfactualArgs),
}

#[derive(Debug, Args)]
struct PointArgs {
    /// Parameter point JSON: {"delta_c", "delta_f", "rho", "mu", "s", "c"?, "r"?}.
    /// Individual flags below override fields of the file.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    delta_c: Option<f64>,
    #[arg(long)]
    delta_f: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// Marginal cost.
    #[arg(long)]
    c: Option<f64>,
}

/// Solve one parameter point for its linear Markov equilibrium.
#[derive(Debug, Args)]
#[command(after_help = "Output JSON: {\"d\", \"e\", \"theta\", \"eta\", \"b\", \"markup\", \"steady_state_price\", \
\"equilibrium\", \"report\"}, where markup is d + e/2 - c and report lists every candidate root with its \
acceptance status. Exits 2 when no candidate is accepted; the report is still written.")]
struct SolveArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
}

/// Solve every point of a parameter grid.
#[derive(Debug, Args)]
#[command(after_help = "Grid JSON: {\"delta_c\": [..], \"delta_f\": [..], \"rho\": [..], \"mu\": [..], \"s\": [..], \
\"c\"?: number}. Without --grid the 3x3x5x9x11 default grid is used.\n\
Records CSV columns: delta_c, delta_f, rho, mu, s, c, status, candidate_count, stable_count, d, e, theta, \
markup, lock_in, coverage, young_rationality, cutoffs_interior; one row per grid point in grid order.\n\
Report JSON: {\"summary\", \"effects\", \"increasing_witness\", \"decreasing_witness\", \"monotonicity\", \
\"regime_width\"}: solve counts, the effect of s on the markup per base combination, markup directions \
in mu, delta_f and delta_c with every violating pair, and decreasing-effect shares by level.")]
struct SweepArgs {
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Records CSV.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Report JSON. Defaults to the output path with extension .report.json; required with `-o -`.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Share and price path of the equilibrium at one parameter point.
#[derive(Debug, Args)]
#[command(after_help = "Output CSV columns: t, sigma, price; periods + 1 rows starting from sigma0.")]
struct SimulateArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Initial share of firm A.
    #[arg(long, default_value_t = 0.5)]
    sigma0: f64,
    #[arg(long, default_value_t = 20)]
    periods: usize,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
}

/// Derive per-minute marginal costs, margins and portability variables for tariff options.
#[derive(Debug, Args)]
#[command(after_help = "Contracts CSV columns: id, effective_date (YYYY-MM-DD), revis (0 new, 1 revised), \
p1..p5 (per-minute prices by service; p4 and p5 may be blank), r_i (monthly commitment), F_i (fixed monthly fee), \
h_i (term in years), m, r1, r2 (location counts), c_v, c_d, vremot, dremot, iremot.\n\
Costs JSON: {\"operational_cents\", \"service_networks\", \"access_fees\": [{\"from\", \"per_minute\": [5]}], \
\"query_fee_cents\", \"toll_free_call_minutes\", \"allow_query_fee_outside_range\"}; every field has a default.\n\
Config JSON: {\"costs\", \"timeline\": {\"regimes\": [{\"from\", \"expectation\"}], \"implemented\"}, \
\"weights\": \"as_printed\" | \"intended\"}; --costs replaces the config's cost table.\n\
Output CSV columns: id, effective_date, revis, w1..w5, tfrac, avg_price, avg_cost, minutes, c_norm, margin, \
expected_date, tport, dport, h, vremot, dremot, iremot, volume_commitment_factor. \
A metadata sidecar <output stem>.meta.json records the configuration used (skipped for `-o -`).")]
struct DeriveArgs {
    #[arg(long)]
    contracts: PathBuf,
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
}

/// Generate a model-consistent synthetic estimation dataset.
#[derive(Debug, Args)]
#[command(after_help = "Params JSON: {\"alpha\": [5], \"beta\": [6], \"m_logit\", \"r_logit\", \"d\", \"e\", \
\"delta_f\"?, \"delta_c\"?}; alpha covers intercept, dport*tfrac, vremot, dremot, iremot and beta covers duration, \
vremot, dremot, iremot, tport, tport*tfrac. Without --params a built-in interior point is used.\n\
Market CSV columns: t, L, y, retain, steal (retain and steal may be blank). Without --market a built-in \
quarterly series is used.\n\
Output CSV columns: id, date, revis, h, price, c_norm, y, g, retain, steal, vremot, dremot, iremot, tport, \
tfrac, dport, sigma_prev, fwd_price, fwd_c_norm, fwd_y, fwd_g, fwd_dport, fwd2_dport, then one column per \
instrument (c1_t, c3_t, c4_t, c5_t, c1_lag, c3_lag, c4_lag, sigma_lag2). Forward columns are blank for \
records without a contract one duration later.")]
struct SynthArgs {
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    market: Option<PathBuf>,
    #[arg(long)]
    n: usize,
    #[arg(long, env = "SWITCHCOST_SEED")]
    seed: u64,
    /// Standard deviation of noise on observed prices.
    #[arg(long, default_value_t = 0.0)]
    price_noise: f64,
    /// Standard deviation of noise on retention and steal rates.
    #[arg(long, default_value_t = 0.0)]
    rate_noise: f64,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
}

/// Two-step GMM estimation of the structural parameters.
#[derive(Debug, Args)]
#[command(after_help = "Data CSV: the synth output layout.\n\
Config JSON (all fields optional): {\"instruments\": {\"constant\", \"columns\"}, \"starts\", \"seed\", \"delta_f\", \
\"delta_c\", \"objective_tol\", \"step_tol\", \"search_evaluations\", \"polish_iterations\", \"initial\": params, \
\"revision_subset\": 0 | 1}.\n\
Results JSON: {\"params\", \"estimates\": [{\"parameter\", \"estimate\", \"std_error\"}], \"mu\", \"rho\", \
\"observations\", \"usable\", \"moments\", \"df\", \"j_statistic\", \"p_value\", \"weight_matrix\", \
\"rank_deficient\", \"nonpositive_switching_costs\", \"shares_out_of_range\", \"diagnostics\"}.\n\
The coefficient table goes to --table, or to stderr without it.")]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Multi-start seed; overrides the config.
    #[arg(long, env = "SWITCHCOST_SEED")]
    seed: Option<u64>,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    /// Representative contract at equal shares.
    SteadyState,
    /// Every contract at its observed shares; needs --data.
    AllContracts,
}

/// Margin effect of making numbers portable.
#[derive(Debug, Args)]
#[command(after_help = "Takes estimated parameters from --results (estimate output) or --params (params JSON).\n\
Contract JSON: {\"h\", \"vremot\", \"dremot\", \"iremot\", \"tport\", \"tfrac\"}; without it the steady-state \
scenario averages --data.\n\
Output JSON: {\"scenario\", \"margin_base\", \"margin_counterfactual\", \"pct_change\", \
\"pct_change_average_of_ratios\", \"contracts\"}.")]
struct CounterfactualArgs {
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    results: Option<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "steady-state")]
    scenario: ScenarioArg,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    contract: Option<PathBuf>,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => USAGE,
            CliError::Failure(_) => FAILURE,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Failure(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let workers = match cli.workers {
        Some(0) => return Err(usage("--workers must be positive")),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(failure)?;
    match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a, workers),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Derive(a) => cmd_derive(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Counterfactual(a) => cmd_counterfactual(a),
    }
}

fn is_stdout(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn emit(path: &Path, text: &str) -> Result<(), CliError> {
    if is_stdout(path) {
        std::io::stdout().write_all(text.as_bytes()).map_err(failure)
    } else {
        fs::write(path, text).map_err(|e| failure(format!("{}: {e}", path.display())))
    }
}

fn emit_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = to_json_string(value);
    text.push('\n');
    emit(path, &text)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn load_point(a: &PointArgs) -> Result<ModelParams, CliError> {
    let mut p = match &a.params {
        Some(path) => read_json::<ModelParams>(path).map_err(usage)?,
        None => {
            let missing: Vec<&str> = [
                ("--delta-c", a.delta_c),
                ("--delta-f", a.delta_f),
                ("--rho", a.rho),
                ("--mu", a.mu),
                ("--s", a.s),
            ]
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(n, _)| *n)
            .collect();
            if !missing.is_empty() {
                return Err(usage(format!("without --params, {} must be given", missing.join(", "))));
            }
            ModelParams::new(0.0, 0.0, 0.0, 0.0, 0.0)
        }
    };
    p.delta_c = a.delta_c.unwrap_or(p.delta_c);
    p.delta_f = a.delta_f.unwrap_or(p.delta_f);
    p.rho = a.rho.unwrap_or(p.rho);
    p.mu = a.mu.unwrap_or(p.mu);
    p.s = a.s.unwrap_or(p.s);
    p.c = a.c.unwrap_or(p.c);
    p.validate().map_err(usage)?;
    Ok(p)
}

fn cmd_solve(a: SolveArgs) -> Result<(), CliError> {
    let p = load_point(&a.point)?;
    let report = solve(&p).map_err(failure)?;
    let Some(eq) = report.accepted.clone() else {
        emit_json(&a.output, &json!({ "report": report }))?;
        let why = report.failure.map_or("no accepted equilibrium".to_string(), |f| f.to_string());
        return Err(failure(why));
    };
    let out = json!({
        "d": eq.policy.d,
        "e": eq.policy.e,
        "theta": eq.dynamics.theta,
        "eta": eq.dynamics.eta,
        "b": eq.dynamics.b,
        "markup": steady_state_markup(&eq),
        "steady_state_price": eq.steady_state_price(),
        "equilibrium": eq,
        "report": report,
    });
    emit_json(&a.output, &out)
}

fn cmd_sweep(a: SweepArgs, workers: usize) -> Result<(), CliError> {
    let grid = match &a.grid {
        Some(path) => read_json::<GridSpec>(path).map_err(usage)?,
        None => GridSpec::standard(),
    };
    grid.validate().map_err(usage)?;
    let report_path = match (&a.report, is_stdout(&a.output)) {
        (Some(r), _) => r.clone(),
        (None, false) => with_suffix(&a.output, ".report.json"),
        (None, true) => return Err(usage("--report is required when records go to stdout")),
    };
    let records = run_sweep_with_workers(&grid, workers).map_err(failure)?;
    let report = sweep_report(&records);
    eprintln!(
        "sweep: {} points, {} solved, {} increasing and {} decreasing in s",
        report.summary.total, report.summary.solved, report.effects.increasing, report.effects.decreasing
    );
    emit(&a.output, &records_to_csv(&records).map_err(failure)?)?;
    emit_json(&report_path, &report)
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let p = load_point(&a.point)?;
    if !(0.0..=1.0).contains(&a.sigma0) {
        return Err(usage("--sigma0 must lie in [0, 1]"));
    }
    let eq = solve(&p).map_err(failure)?.into_result().map_err(failure)?;
    let path = simulate_path(&eq, a.sigma0, a.periods).map_err(failure)?;
    let mut text = String::from("t,sigma,price\n");
    for pt in path {
        text.push_str(&format!("{},{},{}\n", pt.t, fmt(pt.sigma), fmt(pt.price)));
    }
    emit(&a.output, &text)
}

fn fmt(x: f64) -> String {
    switchcost_core::io::fmt_g17(x)
}

fn cmd_derive(a: DeriveArgs) -> Result<(), CliError> {
    let mut config = match &a.config {
        Some(path) => read_json::<DeriveConfig>(path).map_err(usage)?,
        None => DeriveConfig::default(),
    };
    if let Some(path) = &a.costs {
        config.costs = read_json::<CostTable>(path).map_err(usage)?;
    }
    config.costs.validate().map_err(usage)?;
    config.timeline.validate().map_err(usage)?;
    let options = load_contracts(&a.contracts).map_err(usage)?;
    let rows = options
        .iter()
        .map(|o| derive_contract(o, &config).map_err(usage))
        .collect::<Result<Vec<_>, _>>()?;
    emit(&a.output, &derived_to_csv(&rows))?;
    if !is_stdout(&a.output) {
        let meta = json!({
            "contracts": a.contracts.display().to_string(),
            "rows": rows.len(),
            "config": config,
        });
        emit_json(&with_suffix(&a.output, ".meta.json"), &meta)?;
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let params = match &a.params {
        Some(path) => read_json::<StructuralParams>(path).map_err(usage)?,
        None => StructuralParams::synthetic_default(),
    };
    let series = match &a.market {
        Some(path) => load_market_series(path).map_err(usage)?,
        None => MarketSeries::builtin(),
    };
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let config = SynthConfig {
        price_noise: a.price_noise,
        rate_noise: a.rate_noise,
        ..SynthConfig::noiseless(a.n, a.seed)
    };
    let data = synthesize_dataset(&params, &series, &config).map_err(failure)?;
    emit(&a.output, &data.to_csv())
}

fn cmd_estimate(a: EstimateArgs) -> Result<(), CliError> {
    let data = Dataset::load(&a.data).map_err(usage)?;
    let mut config = match &a.config {
        Some(path) => read_json::<EstimationConfig>(path).map_err(usage)?,
        None => EstimationConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let result = estimate(&data, &config).map_err(failure)?;
    let table = ResultsTable::from_result(&result).render();
    match &a.table {
        Some(path) => emit(path, &table)?,
        None => eprint!("{table}"),
    }
    emit_json(&a.output, &result)
}

fn cmd_counterfactual(a: CounterfactualArgs) -> Result<(), CliError> {
    let params = match (&a.results, &a.params) {
        (Some(path), _) => read_json::<GmmResult>(path).map_err(usage)?.params,
        (None, Some(path)) => read_json::<StructuralParams>(path).map_err(usage)?,
        (None, None) => return Err(usage("one of --results or --params is required")),
    };
    let data = match &a.data {
        Some(path) => Some(Dataset::load(path).map_err(usage)?),
        None => None,
    };
    let scenario = match a.scenario {
        ScenarioArg::SteadyState => {
            let contract = match &a.contract {
                Some(path) => Some(read_json::<AverageContract>(path).map_err(usage)?),
                None => None,
            };
            if contract.is_none() && data.is_none() {
                return Err(usage("the steady-state scenario needs --contract or --data"));
            }
            Scenario::SteadyStateAverage { contract }
        }
        ScenarioArg::AllContracts => {
            if data.is_none() {
                return Err(usage("the all-contracts scenario needs --data"));
            }
            Scenario::AllContractsNoTransition
        }
    };
    let report = counterfactual_margins(&params, &scenario, data.as_ref()).map_err(failure)?;
    emit_json(&a.output, &report)
}
