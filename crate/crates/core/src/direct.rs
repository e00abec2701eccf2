//! Direct propositional encoding of the synthesis problem.
//!
//! Variables:
//!
//! * `a(u, i, c)`: node `i` moves to state `c` after observing `u`;
//! * per fault set `F`, `h(x, i, c)`: some `u` projecting to `x` sends
//!   non-faulty node `i` to `c`;
//! * `e(x, y)`: edge of the projection graph `G_F`;
//! * `b(x, d)`: `x` belongs to the bad set `B_F(d)`.
//!
//! Ids are dense: the `a` block first, then one `h`/`e`/`b` block per fault
//! set in verification order. For cyclic algorithms only node 0 owns `a`
//! variables; `a(u, i, c)` is read as `a(rot_i(u), 0, c)`.

use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::model::{ActualSpace, Algorithm, AlgorithmClass, FaultSet, ModelError, Params};
use crate::solver::{self, Backend, Cnf, Limits, Lit, Model, SolveStats, SolveStatus, SolverError};
use crate::verifier::{self, GraphLimits, StabilizationBounds, VerificationReport, VerifyError};

/// Default cap on the number of variables of one instance.
pub const DEFAULT_MAX_VARS: u64 = 50_000_000;

/// Bound used for the fault-free case when a non-uniform bound is asked for
/// without a value.
pub const DEFAULT_T0: u32 = 3;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("encoding needs {vars} variables, above the cap of {cap}")]
    TooLarge { vars: u64, cap: u64 },
    #[error("model does not define a function: node {node}, observed #{observed} has {count} values")]
    NotFunctional {
        node: usize,
        observed: usize,
        count: usize,
    },
    #[error("model has {got} variables, instance needs {need}")]
    ModelTooShort { got: usize, need: usize },
    #[error("missing or malformed atlas comments: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("decoded algorithm failed re-verification:\n{0}")]
    Unsound(Box<VerificationReport>),
}

/// Variable block for one fault set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultBlock {
    pub faults: FaultSet,
    pub size: usize,
    pub free: usize,
    /// Required stabilisation bound for this fault set.
    pub bound: u32,
    pub h_offset: u64,
    pub e_offset: u64,
    pub b_offset: u64,
}

/// Bijection between encoding variables and DIMACS ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarAtlas {
    params: Params,
    class: AlgorithmClass,
    a_nodes: usize,
    blocks: Vec<FaultBlock>,
    num_vars: u64,
}

impl VarAtlas {
    pub fn new(params: Params, class: AlgorithmClass) -> Result<Self, ModelError> {
        params.validate()?;
        let fault_sets = match class {
            AlgorithmClass::Cyclic => FaultSet::cyclic_representatives(params.n, params.f),
            AlgorithmClass::General => FaultSet::all_up_to(params.n, params.f),
        };
        let a_nodes = match class {
            AlgorithmClass::Cyclic => 1,
            AlgorithmClass::General => params.n,
        };
        let s = params.s as u64;
        let mut next = 1 + a_nodes as u64 * (params.s as u64).pow(params.n as u32) * s;
        let bounds = StabilizationBounds {
            t: params.t,
            t0: params.t0,
        };
        let blocks = fault_sets
            .into_iter()
            .map(|faults| {
                let free = params.n - faults.len();
                let size = params.s.pow(free as u32);
                let v = size as u64;
                let bound = bounds.for_faults(&faults);
                let h_offset = next;
                let e_offset = h_offset + v * free as u64 * s;
                let b_offset = e_offset + v * v;
                next = b_offset + v * (bound as u64 + 1);
                FaultBlock {
                    faults,
                    size,
                    free,
                    bound,
                    h_offset,
                    e_offset,
                    b_offset,
                }
            })
            .collect();
        Ok(VarAtlas {
            params,
            class,
            a_nodes,
            blocks,
            num_vars: next - 1,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn class(&self) -> AlgorithmClass {
        self.class
    }

    pub fn blocks(&self) -> &[FaultBlock] {
        &self.blocks
    }

    pub fn num_vars(&self) -> u64 {
        self.num_vars
    }

    /// Number of `a` variables.
    pub fn a_count(&self) -> u64 {
        self.a_nodes as u64 * self.params.observed_count() as u64 * self.params.s as u64
    }

    /// `a(u, i, c)` with cyclic aliasing applied.
    pub fn a(&self, u: usize, i: usize, c: u8) -> Lit {
        let p = &self.params;
        let (u, i) = match self.class {
            AlgorithmClass::Cyclic => (p.space().rotate(u, i), 0),
            AlgorithmClass::General => (u, i),
        };
        (1 + ((i * p.observed_count() + u) * p.s + c as usize)) as Lit
    }

    /// `h(x, k, c)` where `k` indexes the free nodes of the block.
    pub fn h(&self, block: usize, x: usize, k: usize, c: u8) -> Lit {
        let b = &self.blocks[block];
        (b.h_offset + ((x * b.free + k) * self.params.s + c as usize) as u64) as Lit
    }

    pub fn e(&self, block: usize, x: usize, y: usize) -> Lit {
        let b = &self.blocks[block];
        (b.e_offset + (x * b.size + y) as u64) as Lit
    }

    pub fn b(&self, block: usize, x: usize, d: u32) -> Lit {
        let blk = &self.blocks[block];
        (blk.b_offset + x as u64 * (blk.bound as u64 + 1) + d as u64) as Lit
    }

    /// Comment lines describing the parameters and id layout.
    pub fn legend(&self) -> Vec<String> {
        let p = &self.params;
        let mut out = vec![
            "synccount direct encoding".to_string(),
            format!(
                "params n={} f={} s={} t={} t0={} class={}",
                p.n,
                p.f,
                p.s,
                p.t,
                p.t0.map_or_else(|| "none".to_string(), |t| t.to_string()),
                self.class
            ),
            format!(
                "atlas a offset=1 count={} id=1+((i*{}+u)*{}+c)",
                self.a_count(),
                p.observed_count(),
                p.s
            ),
        ];
        for b in &self.blocks {
            out.push(format!(
                "atlas F={} size={} bound={} h={} e={} b={}",
                b.faults, b.size, b.bound, b.h_offset, b.e_offset, b.b_offset
            ));
        }
        out
    }

    /// Rebuilds the atlas from the comment lines written by [`legend`].
    ///
    /// [`legend`]: VarAtlas::legend
    pub fn from_legend(comments: &[String]) -> Result<Self, EncodeError> {
        let line = comments
            .iter()
            .find_map(|c| c.strip_prefix("params "))
            .ok_or_else(|| EncodeError::BadHeader("no params line".into()))?;
        let mut n = None;
        let mut f = None;
        let mut s = None;
        let mut t = None;
        let mut t0 = None;
        let mut class = None;
        for field in line.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| EncodeError::BadHeader(format!("bad field {field:?}")))?;
            let num = || {
                value
                    .parse::<usize>()
                    .map_err(|_| EncodeError::BadHeader(format!("bad number {value:?}")))
            };
            match key {
                "n" => n = Some(num()?),
                "f" => f = Some(num()?),
                "s" => s = Some(num()?),
                "t" => t = Some(num()? as u32),
                "t0" if value == "none" => {}
                "t0" => t0 = Some(num()? as u32),
                "class" => class = Some(value.parse::<AlgorithmClass>()?),
                _ => return Err(EncodeError::BadHeader(format!("unknown key {key:?}"))),
            }
        }
        let missing = |k: &str| EncodeError::BadHeader(format!("missing {k}"));
        let mut params = Params::new(
            n.ok_or_else(|| missing("n"))?,
            f.ok_or_else(|| missing("f"))?,
            s.ok_or_else(|| missing("s"))?,
            t.ok_or_else(|| missing("t"))?,
        )?;
        if let Some(t0) = t0 {
            params = params.with_t0(t0)?;
        }
        let atlas = VarAtlas::new(params, class.ok_or_else(|| missing("class"))?)?;
        let expected = atlas.legend();
        let given: Vec<&String> = comments.iter().filter(|c| c.starts_with("atlas ")).collect();
        let wanted: Vec<&String> = expected.iter().filter(|c| c.starts_with("atlas ")).collect();
        if given != wanted {
            return Err(EncodeError::BadHeader("atlas lines do not match parameters".into()));
        }
        Ok(atlas)
    }
}

/// A CNF formula together with its atlas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfInstance {
    pub cnf: Cnf,
    pub atlas: VarAtlas,
}

impl CnfInstance {
    pub fn params(&self) -> &Params {
        self.atlas.params()
    }

    pub fn class(&self) -> AlgorithmClass {
        self.atlas.class()
    }
}

pub fn encode(params: Params, class: AlgorithmClass) -> Result<CnfInstance, EncodeError> {
    encode_with_cap(params, class, DEFAULT_MAX_VARS)
}

pub fn encode_with_cap(
    params: Params,
    class: AlgorithmClass,
    max_vars: u64,
) -> Result<CnfInstance, EncodeError> {
    let atlas = VarAtlas::new(params, class)?;
    if atlas.num_vars() > max_vars {
        return Err(EncodeError::TooLarge {
            vars: atlas.num_vars(),
            cap: max_vars,
        });
    }
    let p = params;
    let s = p.s;
    let mut cnf = Cnf::new(atlas.num_vars() as usize);

    let a_nodes = match class {
        AlgorithmClass::Cyclic => 1,
        AlgorithmClass::General => p.n,
    };
    // (1) totality and (2) functionality
    for i in 0..a_nodes {
        for u in 0..p.observed_count() {
            cnf.add((0..s as u8).map(|c| atlas.a(u, i, c)).collect());
            for c in 0..s as u8 {
                for c2 in c + 1..s as u8 {
                    cnf.add(vec![-atlas.a(u, i, c), -atlas.a(u, i, c2)]);
                }
            }
        }
    }

    for (blk, block) in atlas.blocks().iter().enumerate() {
        let space = ActualSpace::new(p.n, s, block.faults.clone());
        let free = space.free_nodes().to_vec();
        let v = block.size;
        let zero = space.zero_index();
        let one = space.one_index();

        // (3) adversary closure
        for u in 0..p.observed_count() {
            let x = space.project_observed(u);
            for (k, &i) in free.iter().enumerate() {
                for c in 0..s as u8 {
                    cnf.add(vec![-atlas.a(u, i, c), atlas.h(blk, x, k, c)]);
                }
            }
        }
        // (4) edges
        for x in 0..v {
            for y in 0..v {
                let mut clause: Vec<Lit> = (0..free.len())
                    .map(|k| -atlas.h(blk, x, k, space.free_digit(y, k)))
                    .collect();
                clause.push(atlas.e(blk, x, y));
                cnf.add(clause);
            }
        }
        // (5) good cycle, (6) exclusivity
        cnf.add(vec![atlas.e(blk, zero, one)]);
        cnf.add(vec![atlas.e(blk, one, zero)]);
        for x in 0..v {
            if x != zero && x != one {
                cnf.add(vec![-atlas.e(blk, zero, x)]);
                cnf.add(vec![-atlas.e(blk, one, x)]);
            }
        }
        // (7) no self-loops
        for x in 0..v {
            cnf.add(vec![-atlas.e(blk, x, x)]);
        }
        // (8, 9) base of the bad sets
        for x in 0..v {
            if x == zero || x == one {
                cnf.add(vec![-atlas.b(blk, x, 0)]);
            } else {
                cnf.add(vec![atlas.b(blk, x, 0)]);
            }
        }
        // (10) propagation
        for d in 0..block.bound {
            for x in 0..v {
                for y in 0..v {
                    cnf.add(vec![
                        -atlas.e(blk, x, y),
                        -atlas.b(blk, y, d),
                        atlas.b(blk, x, d + 1),
                    ]);
                }
            }
        }
        // (11) termination
        for x in 0..v {
            cnf.add(vec![-atlas.b(blk, x, block.bound)]);
        }
    }
    Ok(CnfInstance { cnf, atlas })
}

/// Reads the transition tables off a model.
pub fn decode(model: &Model, instance: &CnfInstance) -> Result<Algorithm, EncodeError> {
    let atlas = &instance.atlas;
    let p = *atlas.params();
    let need = atlas.a_count() as usize;
    if model.num_vars() < need {
        return Err(EncodeError::ModelTooShort {
            got: model.num_vars(),
            need,
        });
    }
    let nodes = match atlas.class() {
        AlgorithmClass::Cyclic => 1,
        AlgorithmClass::General => p.n,
    };
    let mut tables = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let mut table = Vec::with_capacity(p.observed_count());
        for u in 0..p.observed_count() {
            let values: Vec<u8> = (0..p.s as u8)
                .filter(|&c| model.value(atlas.a(u, i, c)))
                .collect();
            if values.len() != 1 {
                return Err(EncodeError::NotFunctional {
                    node: i,
                    observed: u,
                    count: values.len(),
                });
            }
            table.push(values[0]);
        }
        tables.push(table);
    }
    let alg = match atlas.class() {
        AlgorithmClass::Cyclic => Algorithm::cyclic(p, tables.pop().expect("one table")),
        AlgorithmClass::General => Algorithm::general(p, tables),
    }?;
    Ok(alg)
}

/// DIMACS text with the atlas legend as comments.
pub fn emit_dimacs(instance: &CnfInstance) -> String {
    instance.cnf.to_dimacs(&instance.atlas.legend())
}

/// Parses a DIMACS file written by [`emit_dimacs`].
pub fn parse_dimacs(text: &str) -> Result<CnfInstance, EncodeError> {
    let (cnf, comments) = Cnf::parse_dimacs(text)?;
    let atlas = VarAtlas::from_legend(&comments)?;
    if cnf.num_vars as u64 != atlas.num_vars() {
        return Err(EncodeError::BadHeader(format!(
            "header declares {} variables, atlas has {}",
            cnf.num_vars,
            atlas.num_vars()
        )));
    }
    Ok(CnfInstance { cnf, atlas })
}

/// Outcome of a synthesis run.
#[derive(Debug, Clone)]
pub enum SynthOutcome {
    /// The decoded algorithm, already re-verified.
    Realizable {
        algorithm: Algorithm,
        report: VerificationReport,
        stats: SolveStats,
    },
    Unrealizable { stats: SolveStats },
    Unknown { reason: String, stats: SolveStats },
}

impl SynthOutcome {
    pub fn is_realizable(&self) -> bool {
        matches!(self, SynthOutcome::Realizable { .. })
    }

    pub fn is_unrealizable(&self) -> bool {
        matches!(self, SynthOutcome::Unrealizable { .. })
    }

    pub fn stats(&self) -> &SolveStats {
        match self {
            SynthOutcome::Realizable { stats, .. }
            | SynthOutcome::Unrealizable { stats }
            | SynthOutcome::Unknown { stats, .. } => stats,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthOptions {
    pub backend: Backend,
    pub limits: Limits,
    pub seed: Option<u64>,
    pub max_vars: Option<u64>,
}

/// Encode, solve, decode, and re-verify.
pub fn synthesize(
    params: Params,
    class: AlgorithmClass,
    options: &SynthOptions,
) -> Result<SynthOutcome, EncodeError> {
    let start = Instant::now();
    let instance = encode_with_cap(params, class, options.max_vars.unwrap_or(DEFAULT_MAX_VARS))?;
    let result = solver::solve_oneshot(&options.backend, &instance.cnf, options.limits, options.seed)?;
    let mut stats = result.stats.clone();
    stats.wall = start.elapsed();
    match result.status {
        SolveStatus::Sat => {
            let model = result.model.expect("sat results carry a model");
            let algorithm = decode(&model, &instance)?;
            let report = reverify(&algorithm)?;
            Ok(SynthOutcome::Realizable {
                algorithm,
                report,
                stats,
            })
        }
        SolveStatus::Unsat => Ok(SynthOutcome::Unrealizable { stats }),
        SolveStatus::Unknown(reason) => Ok(SynthOutcome::Unknown { reason, stats }),
    }
}

/// Checks a decoded algorithm against the bounds it was synthesised for.
pub fn reverify(algorithm: &Algorithm) -> Result<VerificationReport, EncodeError> {
    let p = algorithm.params();
    let report = verifier::check_stabilization_with(
        algorithm,
        StabilizationBounds { t: p.t, t0: p.t0 },
        GraphLimits::default(),
    )?;
    if !report.stabilizes() {
        return Err(EncodeError::Unsound(Box::new(report)));
    }
    Ok(report)
}

/// Human-readable summary of the instance size per fault set.
pub fn describe(instance: &CnfInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "vars={} clauses={} a_vars={}",
        instance.cnf.num_vars,
        instance.cnf.clauses.len(),
        instance.atlas.a_count()
    );
    for b in instance.atlas.blocks() {
        let _ = writeln!(out, "F={} configs={} bound={}", b.faults, b.size, b.bound);
    }
    out
}
