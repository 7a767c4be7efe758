use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use wnopt::algorithms::{BudgetPolicy, OptimizerConfig, PowerAllocAlg, RoutingAlg, RoutingBound};
use wnopt::check::check_state;
use wnopt::exp::{
    emit_plots, generate_instance, preset, random_interior_state, run_experiment, summarize, trajectory_csv, ArmConfig,
    ExperimentConfig, ExperimentReport, GenConfig, InitKind, Perturbation, PRESET_CAPACITY_FLOOR, PRESET_NAMES, PRESET_RATE_MAX,
};
use wnopt::marginal::MsgScope;
use wnopt::model::{CapacityFn, LinkCostFn};
use wnopt::protocol::{ChannelModel, Staleness};
use wnopt::Error;

#[derive(Parser)]
#[command(name = "wnopt", version, about = "Joint routing and power control experiments for wireless networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance and print it as JSON.
    Generate(GenerateArgs),
    /// Run one algorithm configuration over a set of seeds.
    Run(RunArgs),
    /// Run a multi-arm experiment (a preset or a JSON experiment config).
    Compare(CompareArgs),
    /// Gradient, Hessian-bound and loop-freedom checks on an instance.
    Check(CheckArgs),
}

#[derive(Args, Clone, Default)]
struct InstanceFlags {
    /// Single seed; replaces the seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds, 0..n; replaces the seed list.
    #[arg(long)]
    seeds: Option<u64>,
    /// Node count.
    #[arg(long)]
    nodes: Option<usize>,
    /// Upper end of the session rate distribution.
    #[arg(long)]
    rate_max: Option<f64>,
}

impl InstanceFlags {
    fn apply(&self, instance: &mut GenConfig, seeds: &mut Vec<u64>) {
        if let Some(n) = self.nodes {
            instance.num_nodes = n;
        }
        if let Some(r) = self.rate_max {
            instance.rate_max = r;
        }
        if let Some(n) = self.seeds {
            *seeds = (0..n).collect();
        }
        if let Some(s) = self.seed {
            *seeds = vec![s];
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    instance: InstanceFlags,
    /// JSON instance generator config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceFlags,
    /// JSON run config with `instance`, `scenario` and `algorithm` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sweeps per run.
    #[arg(long)]
    iters: Option<usize>,
    /// Stop once every optimality residual is below this.
    #[arg(long)]
    tol: Option<f64>,
    /// Capacity floor for power updates; `none` removes it.
    #[arg(long)]
    floor: Option<String>,
    /// Algorithm switches, e.g. `rt=brt pa=bpa pc=on cr=off`. Also accepts
    /// `budget=initial|current` and `bound=network|downstream`.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    alg: Vec<String>,
    /// Channel noise scale s; routes all prices through the message channel.
    #[arg(long)]
    noise: Option<f64>,
    /// Consumers see the last published values instead of current ones.
    #[arg(long)]
    stale: bool,
    /// Power control message scope: `all` or the number of nearest nodes.
    #[arg(long)]
    scope: Option<String>,
    /// `none`, `topology` or `demand`.
    #[arg(long)]
    scenario: Option<String>,
    /// Start from min-hop routes (`aodv`) or a random interior state (`random`).
    #[arg(long)]
    init: Option<String>,
    /// Output directory for trajectory.csv, summary.json and plot.dat.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Preset experiment name.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    preset: Option<String>,
    #[command(flatten)]
    instance: InstanceFlags,
    /// JSON experiment config; replaces the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sweeps per run, per epoch for scenarios.
    #[arg(long)]
    iters: Option<usize>,
    /// Override the preset scenario: `none`, `topology` or `demand`.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory for trajectory.csv, summary.json and plot.dat.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    instance: InstanceFlags,
    /// Instance JSON as written by `generate`; drawn from the seed when absent.
    #[arg(long)]
    instance_file: Option<PathBuf>,
    /// Random interior states to test.
    #[arg(long, default_value_t = 5)]
    states: usize,
    /// Random directions per Hessian block.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Scale session rates so random states have finite cost.
    #[arg(long, default_value_t = 0.05)]
    load: f64,
}

/// Schema of `run --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    name: String,
    instance: GenConfig,
    capacity: Option<CapacityFn>,
    cost: LinkCostFn,
    seeds: Vec<u64>,
    init: InitKind,
    scenario: ScenarioSection,
    algorithm: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct ScenarioSection {
    perturbation: Perturbation,
    iterations: usize,
    channel: Option<ChannelModel>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection { perturbation: Perturbation::None, iterations: 200, channel: None }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "run".into(),
            // same demand range and floor as the preset experiments
            instance: GenConfig { rate_max: PRESET_RATE_MAX, ..GenConfig::default() },
            capacity: None,
            cost: LinkCostFn::default(),
            seeds: (0..20).collect(),
            init: InitKind::Aodv,
            scenario: ScenarioSection::default(),
            algorithm: OptimizerConfig { capacity_floor: Some(PRESET_CAPACITY_FLOOR), ..OptimizerConfig::default() },
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse_scenario(name: &str) -> CliResult<Perturbation> {
    match name {
        "none" => Ok(Perturbation::None),
        "topology" => Ok(Perturbation::TopologyJitter { period: 10, box_size: 0.1 }),
        "demand" => Ok(Perturbation::RateScaling { period: 10, max_factor: 2.0 }),
        other => Err(CliError::Usage(format!("unknown scenario {other:?} (none, topology, demand)"))),
    }
}

fn parse_scope(text: &str) -> CliResult<MsgScope> {
    if text == "all" {
        return Ok(MsgScope::All);
    }
    text.parse()
        .map(MsgScope::KNearest)
        .map_err(|_| CliError::Usage(format!("scope must be `all` or a node count, got {text:?}")))
}

fn on_off(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(CliError::Usage(format!("{key} takes on|off, got {v:?}"))),
    }
}

/// Applies `key=value` switches to an optimizer config.
fn apply_alg(cfg: &mut OptimizerConfig, switches: &[String]) -> CliResult<()> {
    for sw in switches.iter().flat_map(|s| s.split_whitespace()) {
        let (key, value) = sw.split_once('=').ok_or_else(|| CliError::Usage(format!("expected key=value, got {sw:?}")))?;
        let bad = || CliError::Usage(format!("bad value {value:?} for {key}"));
        match key {
            "rt" => {
                cfg.routing = match value {
                    "brt" => RoutingAlg::Brt,
                    "grt" => RoutingAlg::Grt,
                    "off" => RoutingAlg::Off,
                    _ => return Err(bad()),
                }
            }
            "pa" => {
                cfg.power_alloc = match value {
                    "bpa" => PowerAllocAlg::Bpa,
                    "gpa" => PowerAllocAlg::Gpa,
                    "off" => PowerAllocAlg::Off,
                    _ => return Err(bad()),
                }
            }
            "pc" => cfg.power_ctrl = on_off(key, value)?,
            "cr" => cfg.congestion = on_off(key, value)?,
            "budget" => {
                cfg.budget = match value {
                    "initial" => BudgetPolicy::Initial,
                    "current" => BudgetPolicy::Current,
                    _ => return Err(bad()),
                }
            }
            "bound" => {
                cfg.routing_bound = match value {
                    "network" => RoutingBound::NetworkMax,
                    "downstream" => RoutingBound::Downstream,
                    _ => return Err(bad()),
                }
            }
            _ => return Err(CliError::Usage(format!("unknown algorithm switch {key:?} (rt, pa, pc, cr, budget, bound)"))),
        }
    }
    Ok(())
}

fn init_kind(text: &str) -> CliResult<InitKind> {
    match text {
        "aodv" => Ok(InitKind::Aodv),
        "random" => Ok(InitKind::RandomInterior { gamma_min: 1.0 }),
        other => Err(CliError::Usage(format!("unknown init {other:?} (aodv, random)"))),
    }
}

fn run_config(args: &RunArgs) -> CliResult<ExperimentConfig> {
    let mut rc: RunConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    args.instance.apply(&mut rc.instance, &mut rc.seeds);
    if let Some(n) = args.iters {
        rc.scenario.iterations = n;
    }
    if let Some(t) = args.tol {
        rc.algorithm.tol = t;
    }
    apply_alg(&mut rc.algorithm, &args.alg)?;
    if let Some(f) = &args.floor {
        rc.algorithm.capacity_floor = match f.as_str() {
            "none" => None,
            v => Some(v.parse().map_err(|_| CliError::Usage(format!("floor must be a number or `none`, got {v:?}")))?),
        };
    }
    if let Some(s) = &args.scenario {
        rc.scenario.perturbation = parse_scenario(s)?;
    }
    if let Some(i) = &args.init {
        rc.init = init_kind(i)?;
    }
    let scope = args.scope.as_deref().map(parse_scope).transpose()?;
    if let Some(scope) = scope {
        rc.algorithm.msg_scope = scope;
    }
    if args.noise.is_some() || args.stale {
        let ch = rc.scenario.channel.get_or_insert_with(ChannelModel::default);
        if let Some(s) = args.noise {
            ch.noise_scale = s;
        }
        if args.stale {
            ch.staleness = Staleness::Cached;
        }
    }
    if let (Some(ch), Some(scope)) = (rc.scenario.channel.as_mut(), scope) {
        ch.msg_scope = scope;
    }
    rc.algorithm.max_iters = rc.scenario.iterations;
    Ok(ExperimentConfig {
        name: rc.name.clone(),
        instance: rc.instance,
        capacity: rc.capacity,
        cost: rc.cost,
        seeds: rc.seeds,
        iterations: rc.scenario.iterations,
        perturbation: rc.scenario.perturbation,
        arms: vec![ArmConfig { name: rc.name, init: rc.init, algorithm: rc.algorithm, channel: rc.scenario.channel }],
        ..ExperimentConfig::default()
    })
}

fn compare_config(args: &CompareArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(p), _) => read_json(p)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(CliError::Usage("give a preset name or --config".into())),
    };
    args.instance.apply(&mut cfg.instance, &mut cfg.seeds);
    if let Some(n) = args.iters {
        cfg.iterations = n;
    }
    if let Some(s) = &args.scenario {
        cfg.perturbation = parse_scenario(s)?;
    }
    for arm in &mut cfg.arms {
        arm.algorithm.max_iters = cfg.iterations;
    }
    Ok(cfg)
}

fn report(cfg: &ExperimentConfig, out: Option<&Path>) -> CliResult<()> {
    let rep: ExperimentReport = run_experiment(cfg)?;
    let csv = trajectory_csv(&rep);
    let summary = summarize(&rep);
    for arm in &summary.arms {
        let converged = arm.converged_at.iter().filter(|c| c.is_some()).count();
        println!(
            "{:<14} mean final cost {:>12.6}  converged {}/{}  reverts {}  loops {}",
            arm.name,
            arm.mean_final_cost,
            converged,
            arm.converged_at.len(),
            arm.guard_reverts,
            arm.loop_violations
        );
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join("trajectory.csv"), &csv)?;
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write_file(&dir.join("summary.json"), &json)?;
        write_file(&dir.join("plot.dat"), &emit_plots(&csv, 500))?;
    }
    Ok(())
}

fn generate(args: &GenerateArgs) -> CliResult<()> {
    let mut cfg: GenConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => GenConfig::default(),
    };
    let mut seeds = vec![cfg.seed];
    args.instance.apply(&mut cfg, &mut seeds);
    cfg.seed = seeds[0];
    let inst = generate_instance(&cfg)?;
    let json = serde_json::to_string_pretty(&inst).expect("instance serializes");
    match &args.out {
        Some(p) => write_file(p, &json),
        None => {
            // a closed pipe is not an error worth reporting
            let _ = writeln!(std::io::stdout(), "{json}");
            Ok(())
        }
    }
}

fn check(args: &CheckArgs) -> CliResult<bool> {
    let (topo, sessions, seed) = match &args.instance_file {
        Some(p) => {
            let inst: wnopt::exp::Instance = read_json(p)?;
            (inst.topology, inst.sessions, args.instance.seed.unwrap_or(0))
        }
        None => {
            let mut cfg = GenConfig { num_nodes: 10, radius: 0.8, ..GenConfig::default() };
            let mut seeds = vec![0];
            args.instance.apply(&mut cfg, &mut seeds);
            cfg.seed = seeds[0];
            let inst = generate_instance(&cfg)?;
            (inst.topology, inst.sessions, cfg.seed)
        }
    };
    let sessions: Vec<_> = sessions.iter().map(|s| s.with_rate(s.source_rate() * args.load)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    let mut checked = 0;
    for (label, capacity) in [("log-sinr", CapacityFn::high_sinr(1e5)), ("precise", CapacityFn::PreciseLog { k: 1e5 })] {
        for cost in [LinkCostFn::default(), LinkCostFn::Mm1Delay] {
            for k in 0..args.states {
                // redraw until the cost is finite; derivatives are undefined past capacity
                let mut st = None;
                for _ in 0..200 {
                    let s = random_interior_state(&topo, &sessions, 0.6, &mut rng);
                    if wnopt::model::network_cost(&topo, &sessions, &capacity, &cost, &s)?.is_finite() {
                        st = Some(s);
                        break;
                    }
                }
                let Some(st) = st else {
                    println!("{label} {cost:?} state {k}: no finite-cost state in 200 draws, skipped (try a lower --load)");
                    continue;
                };
                let r = check_state(&topo, &sessions, &capacity, &cost, &st, args.trials, &mut rng)?;
                let pass = r.passes(1e-5, 1e-9, 1e-6);
                ok &= pass;
                checked += 1;
                let g = r.gradient;
                println!(
                    "{label} {cost:?} state {k}: {} gradient {:.1e} identity {:.1e} hessian gap {:.1e} over {} blocks, acyclic {}",
                    if pass { "ok" } else { "FAIL" },
                    g.phi_max_rel.max(g.eta_max_rel).max(g.gamma_max_rel),
                    g.lemma1,
                    r.hessian_max_gap,
                    r.hessian_blocks,
                    r.allowed_acyclic
                );
            }
        }
    }
    if checked == 0 {
        println!("no state was checked");
    }
    Ok(ok && checked > 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a).map(|_| true),
        Command::Run(a) => run_config(a).and_then(|cfg| report(&cfg, a.out.as_deref())).map(|_| true),
        Command::Compare(a) => compare_config(a).and_then(|cfg| report(&cfg, a.out.as_deref())).map(|_| true),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InitialInfeasible => 2,
                Error::DescentGuardExhausted { .. } => 3,
                _ => 1,
            })
        }
        Err(CliError::Usage(m)) | Err(CliError::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
