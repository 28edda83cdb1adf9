use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use inforef::exact::{solve_dp_with_guard, DEFAULT_GUARD};
use inforef::format::{parse_diagram, serialize_diagram};
use inforef::inference::CompiledNetwork;
use inforef::policy::file::{read_policy, write_policy, write_tables};
use inforef::problems::maze::{MazeConfigFile, MazeProblem, MazeProblemConfig};
use inforef::problems::{parse_maze, simulate_policy, ActuatorModel, SensorModel};
use inforef::refinement::{policy_value, Budget, Heuristic, RefinementConfig, Refiner, Strategy};
use inforef::{Error, InfluenceDiagram};

#[derive(Parser)]
#[command(
    name = "inforef",
    version,
    about = "Anytime policy refinement for influence diagrams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a diagram file and report every problem found.
    Validate { diagram: PathBuf },
    /// Compute the optimal policy by exhaustive backward induction.
    Solve {
        diagram: PathBuf,
        /// Write the optimal policy as dp-table blocks.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest joint state space to enumerate.
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: u128,
    },
    /// Run the anytime refinement loop.
    Refine(RefineArgs),
    /// Evaluate a policy file exactly, optionally cross-checked by simulation.
    Eval {
        diagram: PathBuf,
        policy: PathBuf,
        /// Monte-Carlo episodes (maze diagrams only).
        #[arg(long)]
        simulate: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a maze walker diagram.
    Maze {
        /// ASCII maze (`#` obstacle, `.` open, `G` goal).
        maze: Option<PathBuf>,
        /// TOML file with keys maze, stages, sensor, actuator, seed.
        #[arg(long, conflicts_with = "maze")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        stages: usize,
        #[arg(long, default_value = "perfect")]
        sensor: SensorModelArg,
        #[arg(long, default_value = "perfect")]
        actuator: ActuatorModelArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SensorModelArg {
    Perfect,
    Noisy,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ActuatorModelArg {
    Perfect,
    Noisy,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum HeuristicArg {
    SecondBest,
    HighestProbability,
    Random,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StrategyArg {
    Maximal,
    Greedy,
    Random,
}

#[derive(Args)]
struct RefineArgs {
    diagram: PathBuf,
    #[arg(long, value_enum, default_value = "second-best")]
    heuristic: HeuristicArg,
    #[arg(long, value_enum, default_value = "maximal")]
    strategy: StrategyArg,
    /// Commitment schedule constant in p = N / (N + c).
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_extensions: Option<usize>,
    #[arg(long)]
    max_queries: Option<u64>,
    #[arg(long)]
    max_seconds: Option<f64>,
    /// Profile CSV output.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Finalized policy output.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Query ledger CSV output.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Extra CSV of normalized EV against queries, for plotting.
    #[arg(long)]
    emit_plot_data: Option<PathBuf>,
    /// Scale the second-best score by the context probability.
    #[arg(long)]
    weight_by_probability: bool,
    /// Record wall-clock time in the profile (makes output nondeterministic).
    #[arg(long)]
    record_time: bool,
}

/// Run description written at the top of every output file. Output paths are left out so
/// reruns into different directories produce identical bytes.
struct RunManifest {
    command: &'static str,
    inputs: Vec<PathBuf>,
    config: Vec<String>,
}

impl RunManifest {
    fn lines(&self) -> Vec<String> {
        let join = |ps: &[PathBuf]| ps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" ");
        let mut out = vec![
            format!("inforef {} {}", env!("CARGO_PKG_VERSION"), self.command),
            format!("inputs: {}", join(&self.inputs)),
        ];
        out.extend(self.config.iter().cloned());
        out
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Io(_) | Error::Maze(_) => 2,
        Error::GuardExceeded { .. } => 3,
        _ => 1,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_diagram(path: &Path) -> Result<InfluenceDiagram, Error> {
    parse_diagram(&read(path)?)
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), Error> {
    let d = load_diagram(path)?;
    let report = d.validate();
    for w in &report.warnings {
        println!("warning: {w}");
    }
    if report.is_ok() {
        println!(
            "ok: {} ({} nodes, {} decisions)",
            d.name(),
            d.len(),
            d.decisions().len()
        );
        Ok(())
    } else {
        Err(Error::Invalid(report))
    }
}

fn cmd_solve(path: &Path, out: Option<&Path>, guard: u128) -> Result<(), Error> {
    let d = load_diagram(path)?;
    let r = solve_dp_with_guard(&d, guard)?;
    println!("ev={}", r.ev);
    println!("steps={}", r.steps);
    if let Some(out) = out {
        let manifest = RunManifest {
            command: "solve",
            inputs: vec![path.to_path_buf()],
            config: vec![
                format!("guard={guard}"),
                format!("ev={}", r.ev),
                format!("steps={}", r.steps),
            ],
        };
        write_atomic(out, &write_tables(&d, d.name(), &r.policy, &manifest.lines()))?;
    }
    Ok(())
}

fn cmd_refine(a: &RefineArgs) -> Result<(), Error> {
    let d = load_diagram(&a.diagram)?;
    let config = RefinementConfig {
        heuristic: match a.heuristic {
            HeuristicArg::SecondBest => Heuristic::SecondBest,
            HeuristicArg::HighestProbability => Heuristic::HighestProbability,
            HeuristicArg::Random => Heuristic::Random,
        },
        strategy: match a.strategy {
            StrategyArg::Maximal => Strategy::Maximal,
            StrategyArg::Greedy => Strategy::Greedy,
            StrategyArg::Random => Strategy::Random,
        },
        c: a.c,
        seed: a.seed,
        budget: Budget {
            max_extensions: a.max_extensions,
            max_queries: a.max_queries,
            max_time: a.max_seconds.map(Duration::from_secs_f64),
        },
        weight_by_probability: a.weight_by_probability,
        record_time: a.record_time,
        ..RefinementConfig::default()
    };
    let manifest = RunManifest {
        command: "refine",
        inputs: vec![a.diagram.clone()],
        config: config.describe(),
    };

    let mut refiner = Refiner::new(&d, config)?;
    refiner.run()?;
    let result = refiner.finalize()?;

    let mut profile = result.profile.clone();
    profile.header = manifest.lines();
    if let Some(p) = &a.profile {
        write_atomic(p, &profile.to_csv())?;
    }
    if let Some(p) = &a.policy {
        let mut header = manifest.lines();
        header.push(format!("final_ev={}", result.final_ev));
        write_atomic(p, &write_policy(&d, d.name(), &result.policy, &header))?;
    }
    if let Some(p) = &a.ledger {
        write_atomic(p, &result.ledger.to_csv())?;
    }
    if let Some(p) = &a.emit_plot_data {
        let mut csv = String::from("N,queries,ev_normalized\n");
        for pt in &result.profile.points {
            csv.push_str(&format!("{},{},{}\n", pt.n, pt.queries, pt.ev_normalized));
        }
        write_atomic(p, &csv)?;
    }
    println!("final_ev={}", result.final_ev);
    println!("queries={}", result.ledger.total());
    println!("extensions={}", result.extensions);
    Ok(())
}

fn cmd_eval(diagram: &Path, policy: &Path, simulate: Option<u64>, seed: u64) -> Result<(), Error> {
    let d = load_diagram(diagram)?;
    let mut net = CompiledNetwork::compile(&d)?;
    let loaded = read_policy(&read(policy)?, &d, &net)?;
    loaded.install(&mut net)?;
    let ev = policy_value(&mut net)?;
    println!("ev={ev}");
    if let Some(episodes) = simulate {
        let problem = MazeProblem::from_diagram(&d)?;
        let (mean, stderr) = simulate_policy(&problem, &loaded, episodes, seed)?;
        let agree = (mean - ev).abs() <= 3.0 * stderr + 1e-12;
        println!("simulated={mean}");
        println!("stderr={stderr}");
        println!("agree={agree}");
    }
    Ok(())
}

fn cmd_maze(
    maze: Option<&Path>,
    config_path: Option<&Path>,
    stages: usize,
    sensor: SensorModelArg,
    actuator: ActuatorModelArg,
    out: &Path,
) -> Result<(), Error> {
    let config = match (config_path, maze) {
        (Some(c), _) => MazeConfigFile::load(c)?.0,
        (None, Some(m)) => MazeProblemConfig {
            maze: parse_maze(&read(m)?)?,
            stages,
            sensor: match sensor {
                SensorModelArg::Perfect => SensorModel::Perfect,
                SensorModelArg::Noisy => SensorModel::Noisy,
            },
            actuator: match actuator {
                ActuatorModelArg::Perfect => ActuatorModel::Perfect,
                ActuatorModelArg::Noisy => ActuatorModel::Noisy,
            },
        },
        (None, None) => return Err(Error::Config("give a maze file or --config".into())),
    };
    let problem = MazeProblem::new(config)?;
    write_atomic(out, &serialize_diagram(&problem.diagram))?;
    println!(
        "wrote {} ({} nodes, {} decisions)",
        out.display(),
        problem.diagram.len(),
        problem.diagram.decisions().len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { diagram } => cmd_validate(diagram),
        Command::Solve { diagram, out, guard } => cmd_solve(diagram, out.as_deref(), *guard),
        Command::Refine(args) => cmd_refine(args),
        Command::Eval {
            diagram,
            policy,
            simulate,
            seed,
        } => cmd_eval(diagram, policy, *simulate, *seed),
        Command::Maze {
            maze,
            config,
            stages,
            sensor,
            actuator,
            out,
        } => cmd_maze(maze.as_deref(), config.as_deref(), *stages, *sensor, *actuator, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
