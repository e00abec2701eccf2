use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use synccount_core::cegar::Variant;
use synccount_core::sim::derive_seed;
use synccount_core::AlgorithmClass;

use crate::portfolio::worker_path;

#[derive(Debug, Parser)]
#[command(
    name = "synccount",
    version,
    about = "Verify, synthesise, transform and simulate synchronous 2-counting algorithms",
    after_help = "Exit status: 0 success, 1 negative verdict (fails / unsat / unrealizable), \
                  2 usage or input error, 3 resource limit."
)]
pub struct Cli {
    /// Seed for solvers, adversaries and coins.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Wall-clock limit, e.g. 90, 90s, 5m, 1h.
    #[arg(long, global = true, value_name = "DURATION", value_parser = parse_duration)]
    pub time_limit: Option<Duration>,

    /// Memory limit for external solver processes, e.g. 512M, 4G.
    #[arg(long, global = true, value_name = "BYTES", value_parser = parse_bytes)]
    pub mem_limit: Option<u64>,

    /// Append machine-readable progress events (JSON lines) to this file.
    #[arg(long, global = true, value_name = "PATH")]
    pub log: Option<PathBuf>,

    /// Run synth/cegar as a portfolio of this many seeded worker processes;
    /// the first decisive answer wins.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=256))]
    pub jobs: u32,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    /// Rewrites seed and artifact paths for portfolio worker `i`.
    pub fn enter_worker(&mut self, i: usize) {
        self.jobs = 1;
        self.seed = Some(derive_seed(self.seed.unwrap_or(0), &[i as u64]));
        self.log = self.log.as_deref().map(|p| worker_path(p, i));
        for p in self.command.artifacts_mut() {
            *p = worker_path(p, i);
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an algorithm file against a stabilisation bound.
    Verify(VerifyArgs),
    /// Synthesise an algorithm through the direct SAT encoding.
    Synth(SynthArgs),
    /// Counter-example guided synthesis.
    Cegar(CegarArgs),
    /// Add one node to an algorithm without slowing it down.
    Extend(ExtendArgs),
    /// Place an algorithm on a non-complete communication graph.
    Topology(TopologyArgs),
    /// Stack 2-counters into a 2^b-counter and simulate it.
    Compose(ComposeArgs),
    /// Run a protocol round by round against an adversary.
    Simulate(SimulateArgs),
    /// Write the direct encoding of an instance as DIMACS CNF.
    ExportCnf(ExportCnfArgs),
    /// Decode a solver model for a DIMACS file written by export-cnf.
    DecodeModel(DecodeModelArgs),
    /// Render the projection graph of one fault set as Graphviz DOT.
    ExportDot(ExportDotArgs),
    /// Solve a DIMACS file in-process; exits 10 (sat), 20 (unsat) or 0.
    DimacsSolve(DimacsSolveArgs),
}

impl Command {
    /// Paths written by the command that portfolio workers must not share.
    pub fn artifacts_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            Command::Synth(a) => a.output.iter_mut().chain(a.emit_cnf.iter_mut()).collect(),
            Command::Cegar(a) => a.out_dir.iter_mut().collect(),
            _ => Vec::new(),
        }
    }

    pub fn artifacts(&self) -> Vec<&Path> {
        match self {
            Command::Synth(a) => a.output.iter().chain(a.emit_cnf.iter()).map(PathBuf::as_path).collect(),
            Command::Cegar(a) => a.out_dir.iter().map(PathBuf::as_path).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[arg(long, default_value = "general")]
    pub class: AlgorithmClass,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub f: usize,
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub t: u32,
    /// Separate bound for the fault-free case.
    #[arg(long)]
    pub t0: Option<u32>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub algorithm: PathBuf,
    /// Bound to check; defaults to the file's `t`.
    #[arg(long)]
    pub t: Option<u32>,
    #[arg(long)]
    pub t0: Option<u32>,
    /// Also write the report to this file.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    /// Largest projection graph to build, in configurations.
    #[arg(long)]
    pub max_configs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Write the re-verified algorithm here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write the CNF with its variable legend.
    #[arg(long)]
    pub emit_cnf: Option<PathBuf>,
    /// Decode this solver output instead of solving.
    #[arg(long, value_name = "MODEL")]
    pub decode: Option<PathBuf>,
    #[arg(long)]
    pub max_vars: Option<u64>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("bound").required(true).args(["t", "unbounded"])))]
pub struct CegarArgs {
    #[arg(long, default_value = "general")]
    pub class: AlgorithmClass,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub f: usize,
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub t: Option<u32>,
    /// Search down from the largest useful bound (overshoot only).
    #[arg(long)]
    pub unbounded: bool,
    #[arg(long, default_value = "overshoot", value_parser = parse_variant)]
    pub variant: Variant,
    /// Overshoot: stop once an algorithm this fast is found.
    #[arg(long)]
    pub stop_at: Option<u32>,
    /// Write every verified intermediate algorithm as `t<T>.alg` here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Add the converse observation-difference clauses.
    #[arg(long)]
    pub d_converse: bool,
}

#[derive(Debug, Args)]
pub struct ExtendArgs {
    pub algorithm: PathBuf,
    /// Number of nodes to add.
    #[arg(long, default_value_t = 1)]
    pub times: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TopologyArgs {
    /// Graph in `v`/`e` line format.
    pub graph: PathBuf,
    /// Algorithm for the core clique; its `n` is the clique size.
    #[arg(long)]
    pub algorithm: PathBuf,
    /// Maximum number of layers after the core.
    #[arg(long)]
    pub d: usize,
    /// Earlier-layer neighbours required per vertex; defaults to 2f+1.
    #[arg(long)]
    pub m: Option<usize>,
    /// Core clique as comma-separated vertex ids; searched when absent.
    #[arg(long, value_delimiter = ',')]
    pub core: Option<Vec<usize>>,
    #[arg(long, default_value_t = synccount_core::transforms::DEFAULT_CLIQUE_SEARCH_CAP)]
    pub search_cap: usize,
    /// Write the graph with its `p` partition lines here.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Flatten to a complete-graph algorithm and report its exact time.
    #[arg(long)]
    pub verify: bool,
    /// Largest flattened transition table, in entries per node.
    #[arg(long, default_value_t = 1 << 22)]
    pub max_table: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdversaryKind {
    None,
    Random,
    Greedy,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// Layer algorithms, least significant first.
    #[arg(required = true)]
    pub layers: Vec<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 400)]
    pub rounds: usize,
    /// Faulty nodes, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub faults: Vec<usize>,
    #[arg(long, value_enum, default_value_t = AdversaryKind::Random)]
    pub adversary: AdversaryKind,
    /// Rounds of correct counting required before a trial counts as settled.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("protocol").required(true).args(["algorithm", "randomized"])))]
pub struct SimulateArgs {
    #[arg(long)]
    pub algorithm: Option<PathBuf>,
    /// Run the algorithm on this graph instead of the complete graph.
    #[arg(long, requires = "algorithm")]
    pub graph: Option<PathBuf>,
    /// Layer bound for graphs without `p` partition lines.
    #[arg(long)]
    pub d: Option<usize>,
    /// Use the randomised counter with --n and --f.
    #[arg(long, requires = "n", requires = "f")]
    pub randomized: bool,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub f: Option<usize>,
    #[arg(long, value_enum, default_value_t = AdversaryKind::Random)]
    pub adversary: AdversaryKind,
    /// Faulty nodes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub faults: Vec<usize>,
    /// Initial states (`0120` or `0,1,2,0`), `random`, or `worst`.
    #[arg(long, default_value = "random")]
    pub init: String,
    #[arg(long, default_value_t = 30)]
    pub rounds: usize,
    /// Run this many Monte Carlo trials instead of printing one trace.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub window: usize,
    #[arg(long, default_value_t = 10_000)]
    pub round_cap: usize,
}

#[derive(Debug, Args)]
pub struct ExportCnfArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub max_vars: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DecodeModelArgs {
    /// DIMACS file with the variable legend.
    pub cnf: PathBuf,
    /// Solver output: `s`/`v` lines or a plain literal list.
    pub model: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportDotArgs {
    pub algorithm: PathBuf,
    /// Faulty nodes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub faults: Vec<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DimacsSolveArgs {
    pub cnf: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

pub fn parse_duration(text: &str) -> Result<Duration, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let value: f64 = number.parse().map_err(|_| format!("bad duration {text:?}"))?;
    let scale = match unit {
        "" | "s" => 1.0,
        "ms" => 1e-3,
        "m" | "min" => 60.0,
        "h" => 3600.0,
        _ => return Err(format!("unknown duration unit {unit:?}")),
    };
    Duration::try_from_secs_f64(value * scale).map_err(|e| e.to_string())
}

pub fn parse_bytes(text: &str) -> Result<u64, String> {
    let text = text.trim();
    let (number, shift) = match text.char_indices().last() {
        Some((k, 'K' | 'k')) => (&text[..k], 10),
        Some((k, 'M' | 'm')) => (&text[..k], 20),
        Some((k, 'G' | 'g')) => (&text[..k], 30),
        Some((k, 'T' | 't')) => (&text[..k], 40),
        _ => (text, 0),
    };
    let value: u64 = number.parse().map_err(|_| format!("bad size {text:?}"))?;
    value
        .checked_mul(1 << shift)
        .ok_or_else(|| format!("size {text:?} overflows"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        assert_eq!(parse_duration("90").unwrap(), Duration::from_secs(90));
        assert_eq!(parse_duration("1.5m").unwrap(), Duration::from_secs(90));
        assert_eq!(parse_duration("250ms").unwrap(), Duration::from_millis(250));
        assert!(parse_duration("3 days").is_err());
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_bytes("4G").unwrap(), 4 << 30);
        assert_eq!(parse_bytes("512m").unwrap(), 512 << 20);
        assert_eq!(parse_bytes("100").unwrap(), 100);
        assert!(parse_bytes("lots").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
