//! `tneat` command-line front end: experiment runs, genome inspection and
//! the population-scaling benchmark.

pub mod checkpoint;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tneat::evolution::{GenerationStats, NeatState};
use tneat::genome::{parse_genome, serialize_genome};
use tneat::inference::genome_to_dot;
use tneat::problems::EvalMode;
use tneat::ExperimentConfig;

use checkpoint::Checkpoint;

pub const STATS_FILE: &str = "stats.csv";
pub const BEST_GENOME_FILE: &str = "best_genome.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const BENCH_FILE: &str = "bench.csv";

/// Exit status when the fitness target was reached.
pub const EXIT_TARGET: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
/// Exit status when the run stopped at the generation limit.
pub const EXIT_LIMIT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tneat", version, about = "Tensorized NEAT experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a population as described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Continue from `<out>/checkpoint.json`, appending to stats.csv.
        #[arg(long)]
        resume: bool,
        /// Fill the elapsed_seconds column (makes stats.csv machine dependent).
        #[arg(long)]
        wall_time: bool,
    },
    /// Time the population-parallel and genome-at-a-time paths.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,500,1000")]
        pop_sizes: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        generations: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print a genome file as Graphviz or as a readable summary.
    Inspect {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dot,
    Text,
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

pub fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Run {
            config,
            out,
            threads,
            resume,
            wall_time,
        } => with_threads(threads, || {
            cmd_run(&RunOptions {
                config,
                out,
                resume,
                wall_time,
            })
        }),
        Command::Bench {
            config,
            pop_sizes,
            generations,
            out,
            threads,
        } => with_threads(threads, || cmd_bench(&config, &pop_sizes, generations, &out)),
        Command::Inspect { genome, format } => cmd_inspect(&genome, format, stdout),
    }
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    match threads {
        None => f(),
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(f),
    }
}

/// Reads a config file and applies the `TNEAT_SEED` override.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, String)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    if let Ok(seed) = std::env::var("TNEAT_SEED") {
        config.neat.seed = seed
            .trim()
            .parse()
            .with_context(|| format!("TNEAT_SEED={seed:?} is not an unsigned integer"))?;
    }
    Ok((config, text))
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub resume: bool,
    pub wall_time: bool,
}

/// Runs an experiment, writing stats.csv, best_genome.txt and
/// checkpoint.json into the output directory.
pub fn cmd_run(opts: &RunOptions) -> Result<i32> {
    let (experiment, text) = load_config(&opts.config)?;
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let stats_path = opts.out.join(STATS_FILE);
    let checkpoint_path = opts.out.join(CHECKPOINT_FILE);

    // a resumed run keeps the original config text so later resumes compare against it
    let mut config_text = text;
    let (mut state, mut stats_file) = if opts.resume {
        let ck = Checkpoint::load(&checkpoint_path)?;
        config_text = ck.config_text.clone();
        let state = ck.restore(&experiment)?;
        let f = OpenOptions::new()
            .append(true)
            .open(&stats_path)
            .with_context(|| format!("opening {}", stats_path.display()))?;
        (state, f)
    } else {
        let state = NeatState::new(experiment.neat.clone())?;
        let mut f = fs::File::create(&stats_path).with_context(|| format!("creating {}", stats_path.display()))?;
        writeln!(f, "{}", GenerationStats::CSV_HEADER)?;
        (state, f)
    };

    let problem = experiment.problem.build();
    let mut write_err = None;
    let outcome = state.run(problem.as_ref(), EvalMode::Batched, |s, _| {
        if let Err(e) = writeln!(stats_file, "{}", s.csv_row(opts.wall_time)) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).context("writing stats.csv");
    }
    stats_file.flush()?;

    fs::write(opts.out.join(BEST_GENOME_FILE), serialize_genome(&outcome.best_genome))?;
    Checkpoint::capture(&state, &config_text).save(&checkpoint_path)?;
    Ok(if outcome.target_reached {
        EXIT_TARGET
    } else {
        EXIT_LIMIT
    })
}

/// Per-generation wall time of both evaluation paths.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub pop_size: usize,
    pub generation: usize,
    pub tensorized_seconds: f64,
    pub sequential_seconds: f64,
}

/// Runs `generations` generations per population size with the
/// population-parallel path (current thread pool, batched evaluation) and
/// with a genome-at-a-time path (one thread, sequential evaluation).
pub fn run_bench(experiment: &ExperimentConfig, pop_sizes: &[usize], generations: usize) -> Result<Vec<BenchRow>> {
    let problem = experiment.problem.build();
    let timed = |pop_size: usize, mode: EvalMode| -> Result<Vec<f64>> {
        let mut config = experiment.neat.clone();
        config.pop_size = pop_size;
        config.generation_limit = generations;
        config.fitness_target = f64::INFINITY;
        let mut state = NeatState::new(config)?;
        let mut times = Vec::with_capacity(generations);
        state.run(problem.as_ref(), mode, |s, _| times.push(s.elapsed_seconds))?;
        Ok(times)
    };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let mut rows = Vec::new();
    for &p in pop_sizes {
        let tensorized = timed(p, EvalMode::Batched)?;
        let sequential = single.install(|| timed(p, EvalMode::Sequential))?;
        for (g, (t, s)) in tensorized.iter().zip(&sequential).enumerate() {
            rows.push(BenchRow {
                pop_size: p,
                generation: g,
                tensorized_seconds: *t,
                sequential_seconds: *s,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_bench(config: &Path, pop_sizes: &[usize], generations: usize, out: &Path) -> Result<i32> {
    if pop_sizes.is_empty() || generations == 0 {
        bail!("need at least one population size and one generation");
    }
    let (experiment, _) = load_config(config)?;
    let rows = run_bench(&experiment, pop_sizes, generations)?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join(BENCH_FILE))?;
    w.write_record(["pop_size", "generation", "tensorized_seconds", "sequential_seconds"])?;
    for r in &rows {
        w.write_record([
            r.pop_size.to_string(),
            r.generation.to_string(),
            format!("{:.6}", r.tensorized_seconds),
            format!("{:.6}", r.sequential_seconds),
        ])?;
    }
    w.flush()?;
    Ok(0)
}

pub fn cmd_inspect(path: &Path, format: Format, out: &mut dyn Write) -> Result<i32> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let genome = parse_genome(&text).with_context(|| format!("in {}", path.display()))?;
    match format {
        Format::Dot => out.write_all(genome_to_dot(&genome).as_bytes())?,
        Format::Text => out.write_all(summary(&genome).as_bytes())?,
    }
    Ok(0)
}

fn summary(g: &tneat::GenomeTensors) -> String {
    use tneat::inference::{Activation, Aggregation};
    let (nodes, conns) = g.count_live();
    let mut s = format!(
        "inputs {} outputs {}\nlive nodes {nodes}/{} live connections {conns}/{}\n",
        g.num_inputs(),
        g.num_outputs(),
        g.max_nodes(),
        g.max_conns()
    );
    s.push_str("nodes:\n");
    for n in g.live_nodes() {
        let role = if g.is_input_key(n.key) {
            "input"
        } else if g.is_output_key(n.key) {
            "output"
        } else {
            "hidden"
        };
        let agg = Aggregation::from_id(n.aggregation_id).map_or("?", |a| a.name());
        let act = Activation::from_id(n.activation_id).map_or("?", |a| a.name());
        s.push_str(&format!(
            "  {:>4} {role:<6} bias {:+.6} response {:+.6} {agg} {act}\n",
            n.key, n.bias, n.response
        ));
    }
    s.push_str("connections:\n");
    for c in g.live_conns() {
        s.push_str(&format!(
            "  {:>4} -> {:<4} weight {:+.6}{}\n",
            c.in_key,
            c.out_key,
            c.weight,
            if c.enabled { "" } else { " (disabled)" }
        ));
    }
    s
}
