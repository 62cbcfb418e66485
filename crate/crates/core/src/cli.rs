//! `motor-design` command line.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 runtime
//! failure (I/O, divergence, consistency).

use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agents::{oracle_shortest, Agent, GreedyAgent, OracleAgent, RandomAgent};
use crate::catalog::{
    load_catalog, machine, save_catalog, select, standard_catalog, Band, MachineVariant, Split, HELD_OUT_PER_MACHINE,
    PERFORMANCE_KEYS, TRAIN_PER_MACHINE,
};
use crate::config::{RunConfig, DEFAULT_CATALOG_SEED};
use crate::env::{flags, EpisodeLogRecord};
use crate::error::{Error, Result};
use crate::neural::Checkpoint;
use crate::ppo::{self, evaluate_agent_logged, EvalMode, EvalReport, PpoAgent};
use crate::surrogate::{self, DesignPoint};

#[derive(Debug, Parser)]
#[command(
    name = "motor-design",
    version,
    about = "Induction machine design game: catalog, PPO training, evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the training and held-out variant catalog.
    Catalog(CatalogArgs),
    /// Train the PPO actor-critic on the training variants.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a baseline agent.
    Eval(EvalArgs),
    /// Shortest feasible paths by breadth-first search.
    Oracle(OracleArgs),
    /// Print the performance and flags of one design point.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    #[arg(long, default_value_t = DEFAULT_CATALOG_SEED)]
    pub seed: u64,
    #[arg(long, default_value = "catalog.txt")]
    pub out: PathBuf,
    /// Machine ids to include.
    #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3])]
    pub machines: Vec<u8>,
}

/// Where the variants come from.
#[derive(Debug, Args)]
pub struct CatalogSource {
    /// Catalog file; generated from the seed when omitted.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub catalog_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub source: CatalogSource,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub total_steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub env_count: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Continue from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgentKind {
    Ppo,
    Greedy,
    Random,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    HeldOut,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::HeldOut => Split::HeldOut,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value_t = AgentKind::Ppo)]
    pub agent: AgentKind,
    /// Required for `--agent ppo`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub source: CatalogSource,
    #[arg(long, value_enum, default_value_t = SplitArg::HeldOut)]
    pub split: SplitArg,
    /// Episodes per variant.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// `greedy` (argmax) or `stochastic`.
    #[arg(long)]
    pub mode: Option<EvalMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write one JSON line per environment step here.
    #[arg(long)]
    pub episode_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub source: CatalogSource,
    #[arg(long, value_enum, default_value_t = SplitArg::HeldOut)]
    pub split: SplitArg,
    /// JSON-lines output of every result.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub machine: u8,
    /// Stack length in meters (default: base design).
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub turns: Option<u32>,
    /// Tooth-tip height in millimeters.
    #[arg(long)]
    pub tooth_tip: Option<f64>,
    /// Bands as `LO,HI`; per unit except tooth tip (mm).
    #[arg(long, value_parser = parse_band)]
    pub band_b_gap: Option<Band>,
    #[arg(long, value_parser = parse_band)]
    pub band_t_break: Option<Band>,
    #[arg(long, value_parser = parse_band)]
    pub band_i_start: Option<Band>,
    #[arg(long, value_parser = parse_band)]
    pub band_d_temp: Option<Band>,
    #[arg(long, value_parser = parse_band)]
    pub band_tooth_tip: Option<Band>,
}

fn parse_band(s: &str) -> std::result::Result<Band, String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad number `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad number `{hi}`"))?;
    if !(lo <= hi) {
        return Err("band needs LO <= HI".into());
    }
    Ok(Band::new(lo, hi))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Catalog(a) => cmd_catalog(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Inspect(a) => cmd_inspect(&a).map(|text| print!("{text}")),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn cmd_catalog(args: &CatalogArgs) -> Result<Vec<MachineVariant>> {
    for &id in &args.machines {
        machine(id)?;
    }
    let variants = standard_catalog(args.seed, &args.machines)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_catalog(&variants, &args.out)?;
    for &id in &args.machines {
        let train = variants
            .iter()
            .filter(|v| v.base_id == id && v.split == Split::Train)
            .count();
        let held = variants
            .iter()
            .filter(|v| v.base_id == id && v.split == Split::HeldOut)
            .count();
        println!("machine {id}: {train} training + {held} held-out variants");
    }
    debug_assert_eq!(
        variants.len(),
        args.machines.len() * (TRAIN_PER_MACHINE + HELD_OUT_PER_MACHINE)
    );
    println!("wrote {} variants to {}", variants.len(), args.out.display());
    Ok(variants)
}

fn resolve_catalog(source: &CatalogSource, cfg: &RunConfig) -> Result<Vec<MachineVariant>> {
    match source.catalog.as_ref().or(cfg.catalog.as_ref()) {
        Some(path) => load_catalog(path),
        None => standard_catalog(source.catalog_seed.unwrap_or(cfg.catalog_seed), &[1, 2, 3]),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), |p| RunConfig::load(p))
}

/// The fully resolved training configuration: file, then flag overrides.
pub fn resolve_train_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(v) = args.total_steps {
        cfg.hyper.total_steps = v;
    }
    if let Some(v) = args.seed {
        cfg.hyper.seed = v;
    }
    if let Some(v) = args.env_count {
        cfg.hyper.env_count = v;
    }
    if let Some(v) = args.horizon {
        cfg.hyper.horizon = v;
    }
    if let Some(v) = &args.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &args.source.catalog {
        cfg.catalog = Some(v.clone());
    }
    if let Some(v) = args.source.catalog_seed {
        cfg.catalog_seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = resolve_train_config(args)?;
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let variants = select(&resolve_catalog(&args.source, &cfg)?, Split::Train);
    if variants.is_empty() {
        return Err(Error::Validation("catalog has no training variants".into()));
    }
    let resume = args.resume.as_deref().map(Checkpoint::load).transpose()?;

    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_file(&out.join("config.resolved.toml"), &cfg.to_toml())?;
    let metrics_path = out.join("metrics.jsonl");
    let metrics = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&metrics_path)
        .map_err(|e| Error::io(&metrics_path, e))?;
    let mut metrics = BufWriter::new(metrics);
    let mut write_error = None;

    let quiet = args.quiet;
    let total_updates = cfg.hyper.update_count();
    let (ckpt, report) = ppo::train(&variants, &cfg.hyper, &cfg.reward, resume, |row| {
        let line = serde_json::to_string(row).expect("metrics row serializes");
        if let Err(e) = writeln!(metrics, "{line}").and_then(|_| metrics.flush()) {
            write_error.get_or_insert(e);
        }
        if !quiet {
            println!(
                "update {:>4}/{} steps {:>8} episodes {:>4} win {:.3} steps-to-win {:>6} reward {:>8.2} entropy {:.3}",
                row.update,
                total_updates,
                row.env_steps,
                row.episodes,
                row.win_rate,
                row.mean_steps_to_win.map_or("-".into(), |s| format!("{s:.1}")),
                row.mean_episode_reward,
                row.entropy,
            );
        }
    })?;
    drop(metrics);
    if let Some(e) = write_error {
        return Err(Error::io(&metrics_path, e));
    }
    let ckpt_path = out.join("checkpoint.txt");
    ckpt.save(&ckpt_path)?;
    write_file(&out.join("train_eval.txt"), &report.final_eval.table())?;
    println!("trained {} updates in {:.1} s", report.rows.len(), report.seconds);
    print!("{}", report.final_eval.table());
    println!("checkpoint: {}", ckpt_path.display());
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let cfg = load_config(args.config.as_ref())?;
    let variants = select(&resolve_catalog(&args.source, &cfg)?, args.split.into());
    if variants.is_empty() {
        return Err(Error::Validation("no variants in the selected split".into()));
    }
    let episodes = args.episodes.unwrap_or(cfg.eval_episodes);
    let seed = args.seed.unwrap_or(cfg.eval_seed);
    let mut agent: Box<dyn Agent> = match args.agent {
        AgentKind::Ppo => {
            let path = args
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::Validation("--agent ppo needs --checkpoint".into()))?;
            let ckpt = Checkpoint::load(path)?;
            Box::new(PpoAgent::new(ckpt.actor, args.mode.unwrap_or(cfg.eval_mode), seed))
        }
        AgentKind::Greedy => Box::new(GreedyAgent),
        AgentKind::Random => Box::new(RandomAgent::new(seed)),
        AgentKind::Oracle => Box::new(OracleAgent::default()),
    };

    let mut log_lines = Vec::new();
    let keep_log = args.episode_log.is_some();
    let report = evaluate_agent_logged(
        agent.as_mut(),
        &variants,
        episodes,
        &cfg.reward,
        &mut |rec: EpisodeLogRecord| {
            if keep_log {
                log_lines.push(serde_json::to_string(&rec).expect("log record serializes"));
            }
        },
    )?;
    print!("{}", report.table());
    let out = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let name = agent.name();
    write_file(&out.join(format!("episodes_{name}.csv")), &report.episodes_csv())?;
    write_file(&out.join(format!("eval_{name}.txt")), &report.table())?;
    if let Some(path) = &args.episode_log {
        let mut text = log_lines.join("\n");
        text.push('\n');
        write_file(path, &text)?;
    }
    Ok(report)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let cfg = RunConfig::default();
    let variants = select(&resolve_catalog(&args.source, &cfg)?, args.split.into());
    let mut lines = String::new();
    let mut per_machine: Vec<(u8, Vec<u32>)> = Vec::new();
    for v in &variants {
        let result = oracle_shortest(v)?;
        let steps = result.shortest_steps.ok_or_else(|| {
            Error::Consistency(format!("variant {} is certified feasible but unreachable", v.label()))
        })?;
        match per_machine.iter_mut().find(|(id, _)| *id == v.base_id) {
            Some((_, s)) => s.push(steps),
            None => per_machine.push((v.base_id, vec![steps])),
        }
        lines.push_str(&serde_json::to_string(&result).expect("oracle result serializes"));
        lines.push('\n');
    }
    println!(
        "{:<8} {:>9} {:>14} {:>6}",
        "machine", "variants", "mean shortest", "max"
    );
    for (id, steps) in &per_machine {
        let mean = steps.iter().sum::<u32>() as f64 / steps.len() as f64;
        println!(
            "{:<8} {:>9} {:>14.2} {:>6}",
            id,
            steps.len(),
            mean,
            steps.iter().max().unwrap_or(&0)
        );
    }
    if let Some(path) = &args.out {
        write_file(path, &lines)?;
    }
    Ok(())
}

/// Nominal bands: centered at 1 per unit with the sampler's half-widths.
fn nominal_bands(h0: f64) -> [Band; 5] {
    [
        Band::centered(1.0, 0.08),
        Band::centered(1.0, 0.15),
        Band::centered(1.0, 0.15),
        Band::centered(1.0, 0.10),
        Band::new(0.6 * h0, 2.2 * h0),
    ]
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<String> {
    use std::fmt::Write as _;

    let base = machine(args.machine)?;
    let design = DesignPoint {
        length: args.length.unwrap_or(base.base_design.length),
        turns: args.turns.unwrap_or(base.base_design.turns),
        tooth_tip: args.tooth_tip.unwrap_or(base.base_design.tooth_tip),
    };
    let point = base.locate(&design).map_err(|e| Error::Validation(e.to_string()))?;
    let perf = surrogate::evaluate_point(&base, point);
    let pu = base.per_unit(point);
    let mut bands = nominal_bands(base.tooth_tip.anchor);
    for (slot, band) in [
        args.band_b_gap,
        args.band_t_break,
        args.band_i_start,
        args.band_d_temp,
        args.band_tooth_tip,
    ]
    .into_iter()
    .enumerate()
    {
        if let Some(b) = band {
            bands[slot] = b;
        }
    }
    let f = flags(&perf, &bands);
    let si = base.to_si(&perf);
    let units = ["T", "N m", "A", "K"];

    let mut out = String::new();
    let _ = writeln!(
        out,
        "machine {} ({} kW, {} V): L = {} m, N = {}, h = {} mm",
        base.id, base.rated_power_kw, base.line_voltage_v, design.length, design.turns, design.tooth_tip
    );
    let _ = writeln!(
        out,
        "per unit: lambda = {}, nu = {}, eta = {}",
        pu.lambda, pu.nu, pu.eta
    );
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>14} {:>20} {:>5}",
        "value", "per unit", "SI", "band", "flag"
    );
    for (slot, key) in PERFORMANCE_KEYS.iter().enumerate() {
        let v = perf.to_array()[slot];
        let (pu_text, si_text) = if slot < 4 {
            (format!("{v:.6}"), format!("{:.3} {}", si[slot], units[slot]))
        } else {
            ("-".to_string(), format!("{v:.3} mm"))
        };
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>14} {:>20} {:>5}",
            key,
            pu_text,
            si_text,
            format!("[{:.4}, {:.4}]", bands[slot].low, bands[slot].high),
            f.0[slot]
        );
    }
    let _ = writeln!(out, "feasible: {}", f.is_clear());
    Ok(out)
}
