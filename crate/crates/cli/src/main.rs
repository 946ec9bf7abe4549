use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use srmkit::constraints::{compile, satisfied, SymbolicConstraint};
use srmkit::dsl::{atom_text, parse_named};
use srmkit::gridworld::{
    demonstrate, read_jsonl, write_jsonl, DoorKey, GridConfig, StateIndexer, StateKey,
};
use srmkit::inference::{
    algorithm1, train_ppo, RewardSource, TrainConfig, TrainOutcome, CSV_HEADER,
};
use srmkit::srm::{partial_evaluate, HoleAssignment, Srm};

/// Exit codes: 0 success, 1 constraint not satisfied, 2 bad input, 3 runtime failure.
#[derive(Parser)]
#[command(
    name = "srmkit",
    version,
    about = "Symbolic reward machines with learnable holes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write planner demonstrations as line-delimited JSON.
    GenDemos(GenDemos),
    /// Check a hole assignment against a machine's constraint.
    CheckConstraints(CheckConstraints),
    /// Print the rewards a concretized machine assigns to trajectories.
    EvalSrm(EvalSrm),
    /// Run the inference loop or the sparse-reward baseline.
    Train(Train),
}

#[derive(Args)]
struct Grid {
    /// Grid side length.
    #[arg(long, default_value_t = 6)]
    size: u8,
    /// Fix the dividing wall column.
    #[arg(long)]
    split: Option<u8>,
    /// Fix the door row.
    #[arg(long)]
    door_row: Option<u8>,
}

impl Grid {
    fn env(&self) -> Result<DoorKey, Failure> {
        let config = GridConfig {
            split: self.split,
            door_row: self.door_row,
            ..GridConfig::with_size(self.size)
        };
        DoorKey::new(config).map_err(|e| Failure::Input(e.to_string()))
    }
}

#[derive(Args)]
struct GenDemos {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, env = "SRMKIT_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: Grid,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckConstraints {
    /// Machine source; the bundled DoorKey machine when omitted.
    #[arg(long)]
    srm: Option<PathBuf>,
    /// Comma-separated hole values in declaration order.
    #[arg(long, allow_hyphen_values = true)]
    holes: String,
    /// Keep only the sign constraints.
    #[arg(long)]
    sign_only: bool,
}

#[derive(Args)]
struct EvalSrm {
    #[arg(long)]
    srm: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    holes: String,
    /// Trajectory log in the demonstration format.
    #[arg(long)]
    trajectories: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Algo1,
    Baseline,
}

#[derive(Args)]
struct Train {
    #[arg(long, value_enum, default_value_t = Mode::Algo1)]
    mode: Mode,
    /// A seed, a list `0,2,5` or an inclusive range `0..4`.
    #[arg(long, env = "SRMKIT_SEED", default_value = "0")]
    seed: String,
    /// Training configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    srm: Option<PathBuf>,
    /// Demonstrations; generated with the planner when omitted.
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Number of planner demonstrations when `--demos` is not given.
    #[arg(long, default_value_t = 10)]
    n_demos: usize,
    #[command(flatten)]
    grid: Grid,
    /// Drop the machine's constraint.
    #[arg(long, conflicts_with = "sign_only")]
    no_constraint: bool,
    /// Keep only the sign constraints.
    #[arg(long)]
    sign_only: bool,
    /// Override the frame budget.
    #[arg(long)]
    max_frames: Option<usize>,
    /// Output directory; one sub-directory per seed.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Unsatisfied,
    Input(String),
    Runtime(String),
}

impl Failure {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Input(format!("{}: {e}", path.display()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenDemos(c) => gen_demos(c),
        Command::CheckConstraints(c) => check_constraints(c),
        Command::EvalSrm(c) => eval_srm(c),
        Command::Train(c) => train(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Unsatisfied) => ExitCode::from(1),
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_srm(path: Option<&Path>) -> Result<Srm, Failure> {
    let Some(path) = path else {
        return Ok(srmkit::assets::doorkey());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    parse_named(&path.display().to_string(), &text).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        Failure::Input(format!("cannot parse machine\n{}", lines.join("\n")))
    })
}

fn parse_holes(srm: &Srm, s: &str) -> Result<HoleAssignment, Failure> {
    let values = s
        .split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Input(format!("bad hole value `{x}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != srm.n_holes() {
        return Err(Failure::Input(format!(
            "machine `{}` has {} holes, got {} values",
            srm.name(),
            srm.n_holes(),
            values.len()
        )));
    }
    Ok(HoleAssignment::new(values))
}

fn gen_demos(c: GenDemos) -> Result<(), Failure> {
    let env = c.grid.env()?;
    let demos = demonstrate(&env, c.n, c.seed).map_err(|e| Failure::Runtime(e.to_string()))?;
    let file = File::create(&c.out).map_err(|e| Failure::io(&c.out, e))?;
    let mut w = BufWriter::new(file);
    write_jsonl(&env, &demos, &mut w).map_err(|e| Failure::io(&c.out, e))?;
    w.flush().map_err(|e| Failure::io(&c.out, e))?;
    let mean_len = demos.iter().map(|d| d.len()).sum::<usize>() as f64 / demos.len().max(1) as f64;
    println!(
        "wrote {} trajectories to {} (mean length {mean_len:.1})",
        demos.len(),
        c.out.display()
    );
    Ok(())
}

fn check_constraints(c: CheckConstraints) -> Result<(), Failure> {
    let srm = load_srm(c.srm.as_deref())?;
    let h = parse_holes(&srm, &c.holes)?;
    let constraint = if c.sign_only {
        srm.constraint().sign_only(srm.n_holes())
    } else {
        srm.constraint().clone()
    };
    let lcs = compile(&constraint, srm.n_holes()).map_err(|e| Failure::Input(e.to_string()))?;
    let check = satisfied(&lcs, &h);
    println!("{:<8} {:<28} {:>12}  status", "label", "atom", "residual");
    for (row, u) in lcs.rows.iter().zip(&check.residuals) {
        let atom = &constraint.atoms[row.atom];
        let status = if *u <= 0.0 { "ok" } else { "VIOLATED" };
        println!(
            "{:<8} {:<28} {:>12.6}  {status}",
            atom.label,
            atom_text(&srm, atom),
            u
        );
    }
    if check.satisfied {
        println!("satisfied");
        Ok(())
    } else {
        let mut labels: Vec<&str> = lcs
            .rows
            .iter()
            .zip(&check.residuals)
            .filter(|(_, u)| **u > 0.0)
            .map(|(r, _)| constraint.atoms[r.atom].label.as_str())
            .collect();
        labels.dedup();
        println!("violated: {}", labels.join(", "));
        Err(Failure::Unsatisfied)
    }
}

fn eval_srm(c: EvalSrm) -> Result<(), Failure> {
    let srm = load_srm(c.srm.as_deref())?;
    let h = parse_holes(&srm, &c.holes)?;
    let file = File::open(&c.trajectories).map_err(|e| Failure::io(&c.trajectories, e))?;
    let trajectories =
        read_jsonl(BufReader::new(file)).map_err(|e| Failure::io(&c.trajectories, e))?;
    for (i, tau) in trajectories.iter().enumerate() {
        let res = srmkit::srm::run(&srm, tau, &h).map_err(|e| Failure::Input(e.to_string()))?;
        let path: Vec<&str> = res.path.iter().map(|q| srm.state_name(*q)).collect();
        let rewards: Vec<String> = res.rewards.iter().map(|r| format!("{r}")).collect();
        println!("trajectory {i}: {} steps", tau.len());
        println!("  rewards: [{}]", rewards.join(", "));
        println!("  path: {}", path.join(" -> "));
        println!("  total: {}", res.total);
    }
    Ok(())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Input(format!("bad seed `{s}`: expected N, N..M or a comma list"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect()
}

#[derive(Serialize)]
struct PolicyRow<'a> {
    state: &'a StateKey,
    logits: &'a [f64],
    value: f64,
}

fn write_checkpoints(dir: &Path, out: &TrainOutcome) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(dir.join("policy.jsonl"))?);
    write_policy(&mut w, &out.indexer, out)?;
    w.flush()?;
    if let Some(sampler) = &out.sampler {
        fs::write(
            dir.join("sampler.json"),
            serde_json::to_string_pretty(sampler)?,
        )?;
    }
    if let Some(model) = &out.model {
        let mut w = BufWriter::new(File::create(dir.join("reward_model.jsonl"))?);
        model.write_jsonl(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn write_policy<W: Write>(
    mut w: W,
    indexer: &StateIndexer,
    out: &TrainOutcome,
) -> std::io::Result<()> {
    let policy = &out.learner.policy;
    for s in 0..policy.n_states().min(indexer.len()) {
        let row = PolicyRow {
            state: indexer.key(s),
            logits: policy.logits(s),
            value: policy.value(s),
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn train(c: Train) -> Result<(), Failure> {
    let env = c.grid.env()?;
    let mut config = match &c.config {
        Some(p) => TrainConfig::from_path(p).map_err(|e| Failure::Input(e.to_string()))?,
        None => TrainConfig::default(),
    };
    if let Some(f) = c.max_frames {
        config.max_frames = f;
    }
    let seeds = parse_seeds(&c.seed)?;
    let mut srm = load_srm(c.srm.as_deref())?;
    if c.no_constraint {
        srm = srm
            .with_constraint(SymbolicConstraint::new(Vec::new()))
            .map_err(|e| Failure::Input(e.to_string()))?;
    } else if c.sign_only {
        let sign = srm.constraint().sign_only(srm.n_holes());
        srm = srm
            .with_constraint(sign)
            .map_err(|e| Failure::Input(e.to_string()))?;
    }
    let demos = match &c.demos {
        Some(p) => {
            let file = File::open(p).map_err(|e| Failure::io(p, e))?;
            read_jsonl(BufReader::new(file)).map_err(|e| Failure::io(p, e))?
        }
        None => Vec::new(),
    };
    if c.mode == Mode::Algo1 {
        // Fail on unusable demonstrations before any training starts.
        for tau in &demos {
            partial_evaluate(&srm, tau).map_err(|e| Failure::Input(e.to_string()))?;
        }
    }
    fs::create_dir_all(&c.out).map_err(|e| Failure::io(&c.out, e))?;
    for seed in seeds {
        config.seed = seed;
        let dir = c.out.join(format!("seed{seed}"));
        fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
        let csv_path = dir.join("reports.csv");
        let mut csv =
            BufWriter::new(File::create(&csv_path).map_err(|e| Failure::io(&csv_path, e))?);
        writeln!(csv, "{CSV_HEADER}").map_err(|e| Failure::io(&csv_path, e))?;
        let mut write_err = None;
        let on_report = |r: &srmkit::inference::IterationReport| {
            if let Err(e) = writeln!(csv, "{}", r.csv_row()) {
                write_err.get_or_insert(e);
            }
        };
        let outcome = match c.mode {
            Mode::Baseline => train_ppo(&env, RewardSource::Default, &config, on_report),
            Mode::Algo1 => {
                let demos = if demos.is_empty() {
                    demonstrate(&env, c.n_demos, seed)
                        .map_err(|e| Failure::Runtime(e.to_string()))?
                } else {
                    demos.clone()
                };
                algorithm1(&srm, &env, &demos, &config, on_report)
            }
        }
        .map_err(|e| Failure::Runtime(format!("seed {seed}: {e}")))?;
        if let Some(e) = write_err {
            return Err(Failure::Runtime(format!("{}: {e}", csv_path.display())));
        }
        csv.flush().map_err(|e| Failure::io(&csv_path, e))?;
        write_checkpoints(&dir, &outcome)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        let reached = outcome
            .frames_to_target
            .map_or("not reached".to_string(), |f| format!("{f} frames"));
        let last = outcome.reports.last().map_or(0.0, |r| r.avg_return);
        print!(
            "seed {seed}: {} frames, avg return {last:.3}, target {reached}",
            outcome.frames
        );
        if let Some(s) = &outcome.sampler {
            let mu: Vec<String> = s.mean.iter().map(|x| format!("{x:.3}")).collect();
            print!(", holes [{}]", mu.join(", "));
        }
        println!();
    }
    Ok(())
}
