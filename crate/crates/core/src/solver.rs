//! SAT backends.
//!
//! Two backends sit behind one interface: CaDiCaL linked in-process, used
//! incrementally, and an external DIMACS solver spawned once per call. An
//! incremental session can also be emulated on top of the external backend
//! by re-solving the accumulated clause database with the assumptions added
//! as unit clauses.
//!
//! Every satisfying model is re-evaluated against the clauses that were
//! handed to the backend before it is returned.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A DIMACS literal: `v` or `-v` for a variable `v >= 1`.
pub type Lit = i32;

/// Environment variable naming the external solver binary.
pub const SOLVER_ENV: &str = "SYNCCOUNT_SOLVER";
/// Optional whitespace-separated arguments passed before the CNF path.
pub const SOLVER_ARGS_ENV: &str = "SYNCCOUNT_SOLVER_ARGS";

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(300);
pub const DEFAULT_MEMORY_LIMIT: u64 = 4 << 30;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no external solver configured (set {SOLVER_ENV})")]
    NotConfigured,
    #[error("failed to run solver {path}: {source}")]
    Spawn {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed solver output: {0}")]
    MalformedOutput(String),
    #[error("malformed DIMACS: {0}")]
    MalformedDimacs(String),
    #[error("literal {0} is not a valid DIMACS literal")]
    BadLiteral(Lit),
    #[error("model violates clause #{index}: {clause:?}")]
    ModelCheckFailed { index: usize, clause: Vec<Lit> },
    #[error("session closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveStatus {
    Sat,
    Unsat,
    /// Time or memory limit, interruption, or a solver that gave up.
    Unknown(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub decisions: Option<u64>,
    pub conflicts: Option<u64>,
    pub wall: Duration,
}

/// A total assignment to variables `1..=num_vars`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    values: Vec<bool>,
}

impl Model {
    pub fn new(values: Vec<bool>) -> Self {
        Model { values }
    }

    /// Builds a model from a literal list; unmentioned variables are false.
    pub fn from_literals(literals: &[Lit], num_vars: usize) -> Result<Self, SolverError> {
        let mut values = vec![false; num_vars];
        for &lit in literals {
            let var = lit.unsigned_abs() as usize;
            if lit == 0 || var > num_vars {
                return Err(SolverError::BadLiteral(lit));
            }
            values[var - 1] = lit > 0;
        }
        Ok(Model { values })
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    /// Truth value of a literal. Variables beyond the model are false.
    pub fn value(&self, lit: Lit) -> bool {
        let var = lit.unsigned_abs() as usize;
        let v = var >= 1 && var <= self.values.len() && self.values[var - 1];
        if lit > 0 {
            v
        } else {
            !v
        }
    }

    pub fn literals(&self) -> Vec<Lit> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| if v { k as Lit + 1 } else { -(k as Lit + 1) })
            .collect()
    }

    pub fn satisfies(&self, clause: &[Lit]) -> bool {
        clause.iter().any(|&l| self.value(l))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub model: Option<Model>,
    pub stats: SolveStats,
}

impl SolveResult {
    fn unknown(reason: impl Into<String>, wall: Duration) -> Self {
        SolveResult {
            status: SolveStatus::Unknown(reason.into()),
            model: None,
            stats: SolveStats {
                wall,
                ..SolveStats::default()
            },
        }
    }

    pub fn is_sat(&self) -> bool {
        self.status == SolveStatus::Sat
    }

    pub fn is_unsat(&self) -> bool {
        self.status == SolveStatus::Unsat
    }
}

/// Per-solve resource limits. Memory limits are enforced only for external
/// solver processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub time: Option<Duration>,
    pub memory_bytes: Option<u64>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            time: Some(DEFAULT_TIME_LIMIT),
            memory_bytes: Some(DEFAULT_MEMORY_LIMIT),
        }
    }
}

impl Limits {
    pub fn unlimited() -> Self {
        Limits {
            time: None,
            memory_bytes: None,
        }
    }

    /// Caps the time limit at whatever is left before `deadline`.
    pub fn until(self, deadline: Option<Instant>) -> Self {
        match deadline {
            None => self,
            Some(d) => {
                let left = d.saturating_duration_since(Instant::now());
                Limits {
                    time: Some(self.time.map_or(left, |t| t.min(left))),
                    ..self
                }
            }
        }
    }
}

/// A plain CNF formula.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new(num_vars: usize) -> Self {
        Cnf {
            num_vars,
            clauses: Vec::new(),
        }
    }

    pub fn add(&mut self, clause: Vec<Lit>) {
        for &l in &clause {
            self.num_vars = self.num_vars.max(l.unsigned_abs() as usize);
        }
        self.clauses.push(clause);
    }

    /// Index of the first clause the model falsifies.
    pub fn first_violated(&self, model: &Model) -> Option<usize> {
        self.clauses.iter().position(|c| !model.satisfies(c))
    }

    pub fn check_model(&self, model: &Model) -> Result<(), SolverError> {
        match self.first_violated(model) {
            None => Ok(()),
            Some(index) => Err(SolverError::ModelCheckFailed {
                index,
                clause: self.clauses[index].clone(),
            }),
        }
    }

    pub fn write_dimacs<W: Write>(&self, mut out: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "c {c}")?;
        }
        writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        let mut line = String::new();
        for clause in &self.clauses {
            line.clear();
            for l in clause {
                line.push_str(&l.to_string());
                line.push(' ');
            }
            line.push('0');
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_dimacs(&self, comments: &[String]) -> String {
        let mut buf = Vec::new();
        self.write_dimacs(&mut buf, comments)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("DIMACS output is ASCII")
    }

    /// Parses DIMACS CNF, returning the formula and its comment lines with
    /// the leading `c ` stripped.
    pub fn parse_dimacs(text: &str) -> Result<(Cnf, Vec<String>), SolverError> {
        let mut comments = Vec::new();
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('c') {
                if rest.is_empty() || rest.starts_with(' ') {
                    comments.push(rest.trim_start().to_string());
                    continue;
                }
            }
            if trimmed.starts_with('p') {
                let fields: Vec<&str> = trimmed.split_whitespace().collect();
                if header.is_some() || fields.len() != 4 || fields[1] != "cnf" {
                    return Err(SolverError::MalformedDimacs(format!("bad header {trimmed:?}")));
                }
                let num = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| SolverError::MalformedDimacs(format!("bad number {s:?}")))
                };
                header = Some((num(fields[2])?, num(fields[3])?));
                continue;
            }
            let (vars, _) = header
                .ok_or_else(|| SolverError::MalformedDimacs("clause before header".into()))?;
            for tok in trimmed.split_whitespace() {
                let lit: Lit = tok
                    .parse()
                    .map_err(|_| SolverError::MalformedDimacs(format!("bad literal {tok:?}")))?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else if lit.unsigned_abs() as usize > vars {
                    return Err(SolverError::BadLiteral(lit));
                } else {
                    current.push(lit);
                }
            }
        }
        let (num_vars, num_clauses) =
            header.ok_or_else(|| SolverError::MalformedDimacs("missing header".into()))?;
        if !current.is_empty() {
            return Err(SolverError::MalformedDimacs("unterminated clause".into()));
        }
        if clauses.len() != num_clauses {
            return Err(SolverError::MalformedDimacs(format!(
                "header declares {num_clauses} clauses, found {}",
                clauses.len()
            )));
        }
        Ok((Cnf { num_vars, clauses }, comments))
    }
}

/// Parses solver output. Accepts the competition format (`s` and `v`
/// lines) or, when no status line is present, a bare whitespace-separated
/// literal list which is taken to be a satisfying assignment.
pub fn parse_solver_output(text: &str) -> Result<(SolveStatus, Vec<Lit>), SolverError> {
    let mut status = None;
    let mut literals = Vec::new();
    let mut saw_v = false;
    let mut bare = Vec::new();
    let push = |tokens: &mut dyn Iterator<Item = &str>, out: &mut Vec<Lit>| {
        for tok in tokens {
            let lit: Lit = tok
                .parse()
                .map_err(|_| SolverError::MalformedOutput(format!("bad literal {tok:?}")))?;
            if lit != 0 {
                out.push(lit);
            }
        }
        Ok::<(), SolverError>(())
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("s ") {
            status = Some(match rest.trim() {
                "SATISFIABLE" => SolveStatus::Sat,
                "UNSATISFIABLE" => SolveStatus::Unsat,
                other => SolveStatus::Unknown(other.to_string()),
            });
        } else if let Some(rest) = line.strip_prefix('v') {
            saw_v = true;
            push(&mut rest.split_whitespace(), &mut literals)?;
        } else {
            push(&mut line.split_whitespace(), &mut bare)?;
        }
    }
    match status {
        Some(s) => Ok((s, literals)),
        None if saw_v => Ok((SolveStatus::Sat, literals)),
        None if !bare.is_empty() => Ok((SolveStatus::Sat, bare)),
        None => Err(SolverError::MalformedOutput("no status line".into())),
    }
}

/// Writes a model in competition format.
pub fn format_model(status: &SolveStatus, model: Option<&Model>) -> String {
    let mut out = String::new();
    match status {
        SolveStatus::Sat => out.push_str("s SATISFIABLE\n"),
        SolveStatus::Unsat => out.push_str("s UNSATISFIABLE\n"),
        SolveStatus::Unknown(_) => out.push_str("s UNKNOWN\n"),
    }
    if let Some(m) = model {
        for chunk in m.literals().chunks(16) {
            let line: Vec<String> = chunk.iter().map(|l| l.to_string()).collect();
            out.push_str("v ");
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out.push_str("v 0\n");
    }
    out
}

/// Incremental solving: clauses persist, assumptions are per call, and an
/// unsatisfiable call under assumptions does not affect later calls.
pub trait IncrementalSolver {
    fn add_clause(&mut self, clause: &[Lit]) -> Result<(), SolverError>;

    fn solve_under(&mut self, assumptions: &[Lit]) -> Result<SolveResult, SolverError>;

    fn solve(&mut self) -> Result<SolveResult, SolverError> {
        self.solve_under(&[])
    }

    /// Applies to subsequent solve calls.
    fn set_limits(&mut self, limits: Limits);

    fn num_clauses(&self) -> usize;

    fn close(&mut self);
}

struct Deadline {
    at: Option<Instant>,
    cancel: Option<Arc<AtomicBool>>,
}

impl cadical::Callbacks for Deadline {
    fn terminate(&mut self) -> bool {
        self.at.is_some_and(|d| Instant::now() >= d)
            || self
                .cancel
                .as_ref()
                .is_some_and(|c| c.load(Ordering::Relaxed))
    }
}

/// In-process CaDiCaL with a shadow clause database for model checking.
///
/// CaDiCaL exposes no random seed; a seed instead permutes the literal
/// order of each clause as it is added, which changes watch selection.
pub struct CadicalSession {
    solver: Option<cadical::Solver<Deadline>>,
    db: Cnf,
    limits: Limits,
    cancel: Option<Arc<AtomicBool>>,
    rng: Option<ChaCha8Rng>,
    solves: u64,
}

impl Default for CadicalSession {
    fn default() -> Self {
        Self::new()
    }
}

impl CadicalSession {
    pub fn new() -> Self {
        CadicalSession {
            solver: Some(cadical::Solver::new()),
            db: Cnf::default(),
            limits: Limits::unlimited(),
            cancel: None,
            rng: None,
            solves: 0,
        }
    }

    pub fn with_seed(seed: Option<u64>) -> Self {
        let mut s = Self::new();
        s.rng = seed.map(ChaCha8Rng::seed_from_u64);
        s
    }

    /// A flag that aborts a running solve when set.
    pub fn set_cancel_flag(&mut self, flag: Arc<AtomicBool>) {
        self.cancel = Some(flag);
    }

    pub fn add_cnf(&mut self, cnf: &Cnf) -> Result<(), SolverError> {
        for c in &cnf.clauses {
            self.add_clause(c)?;
        }
        self.db.num_vars = self.db.num_vars.max(cnf.num_vars);
        Ok(())
    }

    pub fn solve_count(&self) -> u64 {
        self.solves
    }

    pub fn clause_db(&self) -> &Cnf {
        &self.db
    }
}

impl IncrementalSolver for CadicalSession {
    fn add_clause(&mut self, clause: &[Lit]) -> Result<(), SolverError> {
        let solver = self.solver.as_mut().ok_or(SolverError::Closed)?;
        if let Some(&bad) = clause.iter().find(|&&l| l == 0 || l == Lit::MIN) {
            return Err(SolverError::BadLiteral(bad));
        }
        match self.rng.as_mut() {
            Some(rng) => {
                let mut shuffled = clause.to_vec();
                shuffled.shuffle(rng);
                solver.add_clause(shuffled);
            }
            None => solver.add_clause(clause.iter().copied()),
        }
        self.db.add(clause.to_vec());
        Ok(())
    }

    fn solve_under(&mut self, assumptions: &[Lit]) -> Result<SolveResult, SolverError> {
        let solver = self.solver.as_mut().ok_or(SolverError::Closed)?;
        let start = Instant::now();
        solver.set_callbacks(Some(Deadline {
            at: self.limits.time.map(|t| start + t),
            cancel: self.cancel.clone(),
        }));
        self.solves += 1;
        let answer = solver.solve_with(assumptions.iter().copied());
        let wall = start.elapsed();
        let stats = SolveStats {
            wall,
            ..SolveStats::default()
        };
        match answer {
            Some(true) => {
                let num_vars = self
                    .db
                    .num_vars
                    .max(solver.max_variable().max(0) as usize)
                    .max(assumptions.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0));
                let values = (1..=num_vars as Lit)
                    .map(|v| solver.value(v).unwrap_or(false))
                    .collect();
                let model = Model::new(values);
                self.db.check_model(&model)?;
                if let Some(&bad) = assumptions.iter().find(|&&a| !model.value(a)) {
                    return Err(SolverError::ModelCheckFailed {
                        index: usize::MAX,
                        clause: vec![bad],
                    });
                }
                Ok(SolveResult {
                    status: SolveStatus::Sat,
                    model: Some(model),
                    stats,
                })
            }
            Some(false) => Ok(SolveResult {
                status: SolveStatus::Unsat,
                model: None,
                stats,
            }),
            None => Ok(SolveResult::unknown("interrupted", wall)),
        }
    }

    fn set_limits(&mut self, limits: Limits) {
        self.limits = limits;
    }

    fn num_clauses(&self) -> usize {
        self.db.clauses.len()
    }

    fn close(&mut self) {
        self.solver = None;
    }
}

/// An external DIMACS solver binary honouring exit codes 10/20.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    pub path: PathBuf,
    pub args: Vec<String>,
}

impl ExternalSolver {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ExternalSolver {
            path: path.into(),
            args: Vec::new(),
        }
    }

    pub fn from_env() -> Result<Self, SolverError> {
        let path = std::env::var_os(SOLVER_ENV).ok_or(SolverError::NotConfigured)?;
        let args = std::env::var(SOLVER_ARGS_ENV)
            .map(|a| a.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default();
        Ok(ExternalSolver {
            path: path.into(),
            args,
        })
    }

    /// Runs the solver on a CNF file already on disk.
    pub fn solve_file(&self, cnf_path: &Path, limits: Limits) -> Result<SolveResult, SolverError> {
        let start = Instant::now();
        let stdout = tempfile::tempfile()?;
        let mut cmd = Command::new(&self.path);
        cmd.args(&self.args)
            .arg(cnf_path)
            .stdin(Stdio::null())
            .stdout(Stdio::from(stdout.try_clone()?))
            .stderr(Stdio::null());
        if let Some(bytes) = limits.memory_bytes {
            set_memory_limit(&mut cmd, bytes);
        }
        let mut child = cmd.spawn().map_err(|source| SolverError::Spawn {
            path: self.path.clone(),
            source,
        })?;
        let deadline = limits.time.map(|t| start + t);
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(SolveResult::unknown("time limit", start.elapsed()));
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let wall = start.elapsed();
        let mut text = String::new();
        {
            use std::io::{Read, Seek};
            let mut f = stdout;
            f.seek(std::io::SeekFrom::Start(0))?;
            f.read_to_string(&mut text)?;
        }
        let parsed = parse_solver_output(&text);
        let stats = SolveStats {
            decisions: stat_line(&text, "decisions"),
            conflicts: stat_line(&text, "conflicts"),
            wall,
        };
        let code = status.code();
        let (st, literals) = match (code, parsed) {
            (Some(10), Ok((_, lits))) => (SolveStatus::Sat, lits),
            (Some(20), _) => (SolveStatus::Unsat, Vec::new()),
            (_, Ok((SolveStatus::Sat, lits))) if !lits.is_empty() => (SolveStatus::Sat, lits),
            (_, Ok((SolveStatus::Unsat, _))) => (SolveStatus::Unsat, Vec::new()),
            (_, Ok((SolveStatus::Unknown(r), _))) => (SolveStatus::Unknown(r), Vec::new()),
            (Some(10), Err(e)) => return Err(e),
            (code, _) => {
                let reason = match code {
                    Some(c) => format!("solver exited with code {c}"),
                    None => "solver killed by a signal (memory limit?)".to_string(),
                };
                return Ok(SolveResult::unknown(reason, wall));
            }
        };
        let model = if st == SolveStatus::Sat {
            let num_vars = literals
                .iter()
                .map(|l| l.unsigned_abs() as usize)
                .max()
                .unwrap_or(0);
            Some(Model::from_literals(&literals, num_vars)?)
        } else {
            None
        };
        Ok(SolveResult {
            status: st,
            model,
            stats,
        })
    }
}

#[cfg(unix)]
fn set_memory_limit(cmd: &mut Command, bytes: u64) {
    use std::os::unix::process::CommandExt;
    // SAFETY: setrlimit is async-signal-safe and touches no shared state.
    unsafe {
        cmd.pre_exec(move || {
            let lim = libc::rlimit {
                rlim_cur: bytes as libc::rlim_t,
                rlim_max: bytes as libc::rlim_t,
            };
            libc::setrlimit(libc::RLIMIT_AS, &lim);
            Ok(())
        });
    }
}

#[cfg(not(unix))]
fn set_memory_limit(_cmd: &mut Command, _bytes: u64) {}

/// Reads `c <name>: <number>` style statistics lines.
fn stat_line(text: &str, name: &str) -> Option<u64> {
    text.lines().find_map(|line| {
        let rest = line.strip_prefix('c')?.trim_start();
        let rest = rest.strip_prefix(name)?.trim_start().strip_prefix(':')?;
        rest.split_whitespace().next()?.parse().ok()
    })
}

/// Solver selection for one-shot solving.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    InProcess,
    External(ExternalSolver),
}

impl Backend {
    /// External solver from the environment if configured, else in-process.
    pub fn from_env() -> Self {
        ExternalSolver::from_env().map_or(Backend::InProcess, Backend::External)
    }

    pub fn session(&self, seed: Option<u64>) -> Box<dyn IncrementalSolver> {
        match self {
            Backend::InProcess => Box::new(CadicalSession::with_seed(seed)),
            Backend::External(ext) => Box::new(EmulatedSession::new(ext.clone(), seed)),
        }
    }
}

/// Solves a formula once. A seed shuffles clause order and literal order
/// within clauses before the formula reaches the backend.
pub fn solve_oneshot(
    backend: &Backend,
    cnf: &Cnf,
    limits: Limits,
    seed: Option<u64>,
) -> Result<SolveResult, SolverError> {
    let shuffled;
    let input = match seed {
        Some(seed) => {
            shuffled = shuffle_cnf(cnf, seed);
            &shuffled
        }
        None => cnf,
    };
    let mut result = match backend {
        Backend::InProcess => {
            let mut s = CadicalSession::new();
            s.set_limits(limits);
            s.add_cnf(input)?;
            s.solve()?
        }
        Backend::External(ext) => {
            let mut file = tempfile::Builder::new().suffix(".cnf").tempfile()?;
            input.write_dimacs(BufWriter::new(file.as_file_mut()), &[])?;
            file.as_file_mut().flush()?;
            ext.solve_file(file.path(), limits)?
        }
    };
    if let Some(model) = result.model.take() {
        let model = pad_model(model, cnf.num_vars);
        cnf.check_model(&model)?;
        result.model = Some(model);
    }
    Ok(result)
}

fn pad_model(model: Model, num_vars: usize) -> Model {
    let mut values = model.values;
    values.resize(num_vars.max(values.len()), false);
    Model::new(values)
}

fn shuffle_cnf(cnf: &Cnf, seed: u64) -> Cnf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clauses = cnf.clauses.clone();
    for c in clauses.iter_mut() {
        c.shuffle(&mut rng);
    }
    clauses.shuffle(&mut rng);
    Cnf {
        num_vars: cnf.num_vars,
        clauses,
    }
}

/// Incremental interface over a one-shot external solver: the clause
/// database is kept here and each solve writes it out with the assumptions
/// appended as unit clauses, so they never persist.
pub struct EmulatedSession {
    solver: ExternalSolver,
    db: Cnf,
    limits: Limits,
    seed: Option<u64>,
    closed: bool,
}

impl EmulatedSession {
    pub fn new(solver: ExternalSolver, seed: Option<u64>) -> Self {
        EmulatedSession {
            solver,
            db: Cnf::default(),
            limits: Limits::default(),
            seed,
            closed: false,
        }
    }
}

impl IncrementalSolver for EmulatedSession {
    fn add_clause(&mut self, clause: &[Lit]) -> Result<(), SolverError> {
        if self.closed {
            return Err(SolverError::Closed);
        }
        if let Some(&bad) = clause.iter().find(|&&l| l == 0 || l == Lit::MIN) {
            return Err(SolverError::BadLiteral(bad));
        }
        self.db.add(clause.to_vec());
        Ok(())
    }

    fn solve_under(&mut self, assumptions: &[Lit]) -> Result<SolveResult, SolverError> {
        if self.closed {
            return Err(SolverError::Closed);
        }
        let mut query = self.db.clone();
        for &a in assumptions {
            query.add(vec![a]);
        }
        solve_oneshot(
            &Backend::External(self.solver.clone()),
            &query,
            self.limits,
            self.seed,
        )
    }

    fn set_limits(&mut self, limits: Limits) {
        self.limits = limits;
    }

    fn num_clauses(&self) -> usize {
        self.db.clauses.len()
    }

    fn close(&mut self) {
        self.closed = true;
    }
}

/// Writes a formula to a DIMACS file.
pub fn write_dimacs_file(path: &Path, cnf: &Cnf, comments: &[String]) -> Result<(), SolverError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    cnf.write_dimacs(&mut w, comments)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incremental_contract() {
        let mut s = CadicalSession::new();
        s.add_clause(&[1, 2]).unwrap();
        let r = s.solve_under(&[-1]).unwrap();
        assert!(r.is_sat());
        assert!(r.model.unwrap().value(2));

        s.add_clause(&[-2]).unwrap();
        assert!(s.solve_under(&[-1]).unwrap().is_unsat());
        let r = s.solve().unwrap();
        assert!(r.is_sat());
        assert!(r.model.unwrap().value(1));
    }

    #[test]
    fn closed_session_errors() {
        let mut s = CadicalSession::new();
        s.close();
        assert!(matches!(s.add_clause(&[1]), Err(SolverError::Closed)));
        assert!(matches!(s.solve(), Err(SolverError::Closed)));
    }

    #[test]
    fn oneshot_in_process() {
        let mut cnf = Cnf::new(1);
        cnf.add(vec![1]);
        let r = solve_oneshot(&Backend::InProcess, &cnf, Limits::default(), None).unwrap();
        assert!(r.is_sat());
        assert!(r.model.unwrap().value(1));
        cnf.add(vec![-1]);
        let r = solve_oneshot(&Backend::InProcess, &cnf, Limits::default(), Some(7)).unwrap();
        assert!(r.is_unsat());
    }

    #[test]
    fn timeout_reports_unknown() {
        // pigeonhole 9 -> 8 is hard enough to outlast a zero budget
        let mut s = CadicalSession::new();
        let holes = 8;
        let var = |p: i32, h: i32| p * holes + h + 1;
        for p in 0..=holes {
            let c: Vec<Lit> = (0..holes).map(|h| var(p, h)).collect();
            s.add_clause(&c).unwrap();
        }
        for h in 0..holes {
            for p in 0..=holes {
                for q in p + 1..=holes {
                    s.add_clause(&[-var(p, h), -var(q, h)]).unwrap();
                }
            }
        }
        s.set_limits(Limits {
            time: Some(Duration::ZERO),
            memory_bytes: None,
        });
        let r = s.solve().unwrap();
        assert!(matches!(r.status, SolveStatus::Unknown(_)));
    }

    #[test]
    fn dimacs_round_trip() {
        let mut cnf = Cnf::new(3);
        cnf.add(vec![1, -2]);
        cnf.add(vec![2, 3, -1]);
        cnf.add(vec![-3]);
        let text = cnf.to_dimacs(&["hello".into()]);
        assert_eq!(text.lines().count(), 1 + 1 + 3);
        let (back, comments) = Cnf::parse_dimacs(&text).unwrap();
        assert_eq!(back, cnf);
        assert_eq!(comments, ["hello"]);
    }

    #[test]
    fn dimacs_rejects_garbage() {
        assert!(Cnf::parse_dimacs("1 2 0\n").is_err());
        assert!(Cnf::parse_dimacs("p cnf 2 1\n1 3 0\n").is_err());
        assert!(Cnf::parse_dimacs("p cnf 2 2\n1 2 0\n").is_err());
        assert!(Cnf::parse_dimacs("p cnf 2 1\n1 2\n").is_err());
    }

    #[test]
    fn solver_output_formats() {
        let (st, lits) = parse_solver_output("c hi\ns SATISFIABLE\nv 1 -2\nv 3 0\n").unwrap();
        assert_eq!(st, SolveStatus::Sat);
        assert_eq!(lits, [1, -2, 3]);
        let (st, lits) = parse_solver_output("s UNSATISFIABLE\n").unwrap();
        assert_eq!(st, SolveStatus::Unsat);
        assert!(lits.is_empty());
        let (st, lits) = parse_solver_output("1 -2 3\n-4 0\n").unwrap();
        assert_eq!(st, SolveStatus::Sat);
        assert_eq!(lits, [1, -2, 3, -4]);
        assert!(parse_solver_output("").is_err());
        assert!(parse_solver_output("v x\n").is_err());
    }

    #[test]
    fn format_model_parses_back() {
        let m = Model::new(vec![true, false, true]);
        let text = format_model(&SolveStatus::Sat, Some(&m));
        let (st, lits) = parse_solver_output(&text).unwrap();
        assert_eq!(st, SolveStatus::Sat);
        assert_eq!(Model::from_literals(&lits, 3).unwrap(), m);
    }

    #[test]
    fn model_check_catches_violations() {
        let mut cnf = Cnf::new(2);
        cnf.add(vec![1, 2]);
        assert!(cnf.check_model(&Model::new(vec![false, false])).is_err());
        assert!(cnf.check_model(&Model::new(vec![false, true])).is_ok());
    }

    #[test]
    fn missing_external_binary() {
        let ext = ExternalSolver::new("/nonexistent/solver");
        let mut cnf = Cnf::new(1);
        cnf.add(vec![1]);
        assert!(matches!(
            solve_oneshot(&Backend::External(ext), &cnf, Limits::default(), None),
            Err(SolverError::Spawn { .. })
        ));
    }

    #[cfg(unix)]
    fn fake_solver(dir: &Path, body: &str) -> ExternalSolver {
        use std::os::unix::fs::PermissionsExt;
        let path = dir.join("solver.sh");
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        ExternalSolver::new(path)
    }

    #[cfg(unix)]
    #[test]
    fn external_exit_protocol() {
        let dir = tempfile::tempdir().unwrap();
        let mut cnf = Cnf::new(2);
        cnf.add(vec![1]);
        cnf.add(vec![-2]);

        let sat = fake_solver(dir.path(), "echo 's SATISFIABLE'; echo 'v 1 -2 0'; exit 10");
        let r = solve_oneshot(&Backend::External(sat), &cnf, Limits::default(), None).unwrap();
        assert!(r.is_sat());

        let wrong = fake_solver(dir.path(), "echo 's SATISFIABLE'; echo 'v -1 -2 0'; exit 10");
        assert!(matches!(
            solve_oneshot(&Backend::External(wrong), &cnf, Limits::default(), None),
            Err(SolverError::ModelCheckFailed { .. })
        ));

        let unsat = fake_solver(dir.path(), "echo 's UNSATISFIABLE'; exit 20");
        let r = solve_oneshot(&Backend::External(unsat), &cnf, Limits::default(), None).unwrap();
        assert!(r.is_unsat());

        let slow = fake_solver(dir.path(), "sleep 5");
        let limits = Limits {
            time: Some(Duration::from_millis(100)),
            memory_bytes: None,
        };
        let r = solve_oneshot(&Backend::External(slow), &cnf, limits, None).unwrap();
        assert_eq!(r.status, SolveStatus::Unknown("time limit".into()));
    }

    #[cfg(unix)]
    #[test]
    fn emulated_session_keeps_assumptions_temporary() {
        let dir = tempfile::tempdir().unwrap();
        // answers UNSAT whenever the file contains the unit clause "-1 0"
        let ext = fake_solver(
            dir.path(),
            "if grep -qx -- '-1 0' \"$1\"; then echo 's UNSATISFIABLE'; exit 20; fi\n\
             echo 's SATISFIABLE'; echo 'v 1 0'; exit 10",
        );
        let mut s = EmulatedSession::new(ext, None);
        s.add_clause(&[1]).unwrap();
        assert!(s.solve_under(&[-1]).unwrap().is_unsat());
        assert!(s.solve().unwrap().is_sat());
        assert_eq!(s.num_clauses(), 1);
    }
}
