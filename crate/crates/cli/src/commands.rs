use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde_json::json;
use synccount_core::cegar::{self, CegarEvent, CegarOptions, RefinementKind, Variant};
use synccount_core::direct::{self, CnfInstance, DEFAULT_MAX_VARS};
use synccount_core::sim::{self, Adversary, Init, MonteCarloOptions, Protocol, RandomizedCounter};
use synccount_core::solver::{self, Backend, Cnf, Limits, Model, SolveStatus};
use synccount_core::transforms::{self, TopologyGraph, TransformError};
use synccount_core::verifier::{self, GraphLimits, DEFAULT_MAX_CONFIGS};
use synccount_core::{Algorithm, FaultSet, Params, StabilizationBounds, VerificationReport};

use crate::args::*;
use crate::eventlog::EventLog;
use crate::{ResourceLimit, Status};

pub fn dispatch(cli: &Cli, log: &EventLog) -> Result<u8> {
    let status = match &cli.command {
        Command::Verify(a) => verify(a, log)?,
        Command::Synth(a) => synth(cli, a, log)?,
        Command::Cegar(a) => cegar(cli, a, log)?,
        Command::Extend(a) => extend(a, log)?,
        Command::Topology(a) => topology(a, log)?,
        Command::Compose(a) => compose(cli, a, log)?,
        Command::Simulate(a) => simulate(cli, a, log)?,
        Command::ExportCnf(a) => export_cnf(a)?,
        Command::DecodeModel(a) => decode_model(a, log)?,
        Command::ExportDot(a) => export_dot(a)?,
        Command::DimacsSolve(a) => return dimacs_solve(cli, a),
    };
    Ok(status as u8)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_algorithm(path: &Path) -> Result<Algorithm> {
    Algorithm::from_text(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn fault_set(members: &[usize], n: usize) -> Result<FaultSet> {
    Ok(FaultSet::new(members.to_vec(), n)?)
}

fn limits(cli: &Cli) -> Limits {
    let base = Limits::default();
    Limits {
        time: cli.time_limit.or(base.time),
        memory_bytes: cli.mem_limit.or(base.memory_bytes),
    }
}

fn adversary(kind: AdversaryKind, seed: u64) -> Adversary {
    match kind {
        AdversaryKind::None => Adversary::None,
        AdversaryKind::Random => Adversary::Random { seed },
        AdversaryKind::Greedy => Adversary::Greedy { seed },
    }
}

fn time_text(t: Option<u32>) -> String {
    t.map_or_else(|| "inf".to_string(), |t| t.to_string())
}

fn ms(d: Duration) -> u64 {
    d.as_millis() as u64
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes `alg`, reads the file back and verifies what is on disk before
/// moving it into place.
fn write_verified(path: &Path, alg: &Algorithm, bounds: StabilizationBounds) -> Result<VerificationReport> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(alg.to_text().as_bytes())?;
    tmp.flush()?;
    let back = read_algorithm(tmp.path())?;
    if &back != alg {
        bail!("{} does not read back as the algorithm written", path.display());
    }
    let report = verifier::check_stabilization_with(&back, bounds, GraphLimits::default())?;
    if !report.stabilizes() {
        bail!("refusing to write {}: re-verification failed\n{report}", path.display());
    }
    tmp.persist(path)
        .with_context(|| format!("moving algorithm into {}", path.display()))?;
    Ok(report)
}

fn verify_file(path: &Path, bounds: StabilizationBounds) -> Result<()> {
    let alg = read_algorithm(path)?;
    let report = verifier::check_stabilization_with(&alg, bounds, GraphLimits::default())?;
    if !report.stabilizes() {
        bail!("{} fails re-verification\n{report}", path.display());
    }
    Ok(())
}

/// Re-verifies the artifacts a command left on disk; used after a portfolio
/// worker's files have been moved into place.
pub fn recheck_artifacts(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => {
            if let Some(out) = a.output.as_deref().filter(|p| p.exists()) {
                verify_file(out, bounds_of(&a.instance))?;
            }
        }
        Command::Cegar(a) => {
            if let Some(dir) = a.out_dir.as_deref().filter(|p| p.is_dir()) {
                for entry in fs::read_dir(dir)? {
                    let path = entry?.path();
                    if path.extension().is_some_and(|e| e == "alg") {
                        let t = read_algorithm(&path)?.params().t;
                        verify_file(&path, StabilizationBounds::uniform(t))?;
                    }
                }
            }
        }
        _ => {}
    }
    Ok(())
}

fn verify(a: &VerifyArgs, log: &EventLog) -> Result<Status> {
    let alg = read_algorithm(&a.algorithm)?;
    let bounds = StabilizationBounds {
        t: a.t.unwrap_or(alg.params().t),
        t0: a.t0,
    };
    let graph_limits = GraphLimits {
        max_configs: a.max_configs.unwrap_or(DEFAULT_MAX_CONFIGS),
        ..GraphLimits::default()
    };
    let report = verifier::check_stabilization_with(&alg, bounds, graph_limits)?;
    let mut text = report.to_certificate();
    let _ = writeln!(text, "stab_time={}", time_text(report.stabilization_time()));
    print!("{text}");
    if let Some(cert) = &a.certificate {
        write_file(cert, &text)?;
    }
    log.emit(
        "verify",
        json!({
            "file": a.algorithm,
            "t": bounds.t,
            "t0": bounds.t0,
            "stabilizes": report.stabilizes(),
            "stab_time": report.stabilization_time(),
        }),
    );
    Ok(if report.stabilizes() {
        Status::Success
    } else {
        Status::Negative
    })
}

fn instance_params(i: &InstanceArgs) -> Result<Params> {
    let p = Params::new(i.n, i.f, i.s, i.t)?;
    Ok(match i.t0 {
        Some(t0) => p.with_t0(t0)?,
        None => p,
    })
}

fn bounds_of(i: &InstanceArgs) -> StabilizationBounds {
    StabilizationBounds { t: i.t, t0: i.t0 }
}

fn describe_instance(i: &InstanceArgs) -> String {
    let t0 = i.t0.map(|t0| format!(" t0={t0}")).unwrap_or_default();
    format!("{} n={} f={} s={} t={}{t0}", i.class, i.n, i.f, i.s, i.t)
}

fn encode(i: &InstanceArgs, max_vars: Option<u64>, log: &EventLog) -> Result<CnfInstance> {
    let params = instance_params(i)?;
    let instance = direct::encode_with_cap(params, i.class, max_vars.unwrap_or(DEFAULT_MAX_VARS))?;
    eprint!("{}", direct::describe(&instance));
    log.emit(
        "encoded",
        json!({ "vars": instance.cnf.num_vars, "clauses": instance.cnf.clauses.len() }),
    );
    Ok(instance)
}

/// Reads solver output and checks the model against the formula.
fn read_model(path: &Path, cnf: &Cnf) -> Result<Option<Model>> {
    let (status, literals) = solver::parse_solver_output(&read_text(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    match status {
        SolveStatus::Sat => {
            let model = Model::from_literals(&literals, cnf.num_vars)?;
            cnf.check_model(&model)?;
            Ok(Some(model))
        }
        SolveStatus::Unsat => Ok(None),
        SolveStatus::Unknown(reason) => Err(ResourceLimit(format!("solver gave up: {reason}")).into()),
    }
}

/// Decodes, re-verifies, and writes or prints a satisfying model's algorithm.
fn emit_solution(
    model: &Model,
    instance: &CnfInstance,
    output: Option<&Path>,
    bounds: StabilizationBounds,
) -> Result<VerificationReport> {
    let alg = direct::decode(model, instance)?;
    let report = direct::reverify(&alg)?;
    match output {
        Some(path) => {
            write_verified(path, &alg, bounds)?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", alg.to_text()),
    }
    Ok(report)
}

fn synth(cli: &Cli, a: &SynthArgs, log: &EventLog) -> Result<Status> {
    let instance = encode(&a.instance, a.max_vars, log)?;
    if let Some(path) = &a.emit_cnf {
        write_file(path, &direct::emit_dimacs(&instance))?;
    }
    let what = describe_instance(&a.instance);
    let model = match &a.decode {
        Some(path) => read_model(path, &instance.cnf)?,
        None => {
            let backend = Backend::from_env();
            let result = solver::solve_oneshot(&backend, &instance.cnf, limits(cli), cli.seed)?;
            log.emit(
                "solved",
                json!({
                    "status": format!("{:?}", result.status),
                    "wall_ms": ms(result.stats.wall),
                    "conflicts": result.stats.conflicts,
                    "decisions": result.stats.decisions,
                    "seed": cli.seed,
                }),
            );
            eprintln!("solver: {:?} in {:.2?}", result.status, result.stats.wall);
            match result.status {
                SolveStatus::Sat => result.model,
                SolveStatus::Unsat => None,
                SolveStatus::Unknown(reason) => {
                    return Err(ResourceLimit(format!("{what}: {reason}")).into())
                }
            }
        }
    };
    match model {
        Some(model) => {
            let report = emit_solution(&model, &instance, a.output.as_deref(), bounds_of(&a.instance))?;
            let t = time_text(report.stabilization_time());
            println!("sat: {what} realised, verified stab_time={t}");
            log.emit("result", json!({ "verdict": "sat", "stab_time": report.stabilization_time() }));
            Ok(Status::Success)
        }
        None => {
            println!("unsat: no algorithm exists for {what}");
            log.emit("result", json!({ "verdict": "unsat" }));
            Ok(Status::Negative)
        }
    }
}

fn cegar(cli: &Cli, a: &CegarArgs, log: &EventLog) -> Result<Status> {
    if a.unbounded && a.variant != Variant::Overshoot {
        bail!("--unbounded needs --variant overshoot");
    }
    let params = Params::new(a.n, a.f, a.s, a.t.unwrap_or(1))?;
    let options = CegarOptions {
        backend: Backend::from_env(),
        seed: cli.seed,
        time_limit: cli.time_limit,
        d_converse: a.d_converse,
        stop_at: a.stop_at,
    };
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut write_error = None;
    let mut on_event = |event: &CegarEvent| match event {
        CegarEvent::Unrolled { k, clauses } => {
            eprintln!("[cegar] unrolled k={k} clauses={clauses}");
            log.emit("unrolled", json!({ "k": k, "clauses": clauses }));
        }
        CegarEvent::Refined {
            kind,
            k,
            clause_len,
            refinements,
        } => {
            let kind = match kind {
                RefinementKind::Illegal => "illegal",
                RefinementKind::Loop => "loop",
                RefinementKind::Path => "path",
            };
            if refinements % 1000 == 0 {
                eprintln!("[cegar] iteration={refinements} k={k}");
            }
            if log.enabled() {
                log.emit(
                    "refined",
                    json!({ "iteration": refinements, "kind": kind, "k": k, "clause_len": clause_len }),
                );
            }
        }
        CegarEvent::Found { algorithm, t } => {
            eprintln!("[cegar] found an algorithm with stab_time={t}");
            let mut file = None;
            if let Some(dir) = &a.out_dir {
                let path = dir.join(format!("t{t}.alg"));
                match write_verified(&path, algorithm, StabilizationBounds::uniform(*t)) {
                    Ok(_) => file = Some(path),
                    Err(e) => write_error = write_error.take().or(Some(e)),
                }
            }
            log.emit("found", json!({ "t": t, "file": file }));
        }
    };
    let result = cegar::run(a.variant, params, a.class, a.t, &options, &mut on_event)?;
    if let Some(e) = write_error {
        return Err(e);
    }
    let st = &result.stats;
    println!(
        "stats: candidates={} refinements={} solves={} unrolled={} clauses={} vars={} wall={:.2?}",
        st.candidates, st.refinements, st.solves, st.unrolled, st.clauses, st.vars, st.wall
    );
    log.emit(
        "result",
        json!({
            "achieved_t": result.achieved_t(),
            "unrealizable_at": result.unrealizable_at,
            "timed_out": result.timed_out,
            "candidates": st.candidates,
            "refinements": st.refinements,
            "wall_ms": ms(st.wall),
        }),
    );
    let what = format!("{} n={} f={} s={}", a.class, a.n, a.f, a.s);
    if let Some((alg, t)) = &result.best {
        if a.t.is_none_or(|target| *t <= target) {
            if a.out_dir.is_none() {
                print!("{}", alg.to_text());
            }
            if let Some(u) = result.unrealizable_at {
                println!("note: no algorithm stabilises within {u} rounds");
            }
            println!("realizable: {what} stab_time={t}");
            return Ok(Status::Success);
        }
    }
    match (result.unrealizable_at, a.t) {
        (Some(u), Some(target)) if u >= target => {
            println!("unrealizable: no algorithm for {what} t={target}");
            Ok(Status::Negative)
        }
        (Some(u), None) => {
            println!("unrealizable: no algorithm for {what} t={u}");
            Ok(Status::Negative)
        }
        _ => Err(ResourceLimit(format!("{what}: no verdict within the time limit")).into()),
    }
}

fn extend(a: &ExtendArgs, log: &EventLog) -> Result<Status> {
    let alg = read_algorithm(&a.algorithm)?;
    let t = alg.params().t;
    let mut ext = alg;
    for _ in 0..a.times {
        ext = transforms::extend_node(&ext)?;
    }
    let report = verifier::check_stabilization(&ext, t)?;
    print!("{report}");
    println!("stab_time={}", time_text(report.stabilization_time()));
    log.emit(
        "extend",
        json!({ "n": ext.params().n, "stab_time": report.stabilization_time() }),
    );
    if !report.stabilizes() {
        return Ok(Status::Negative);
    }
    match &a.output {
        Some(path) => {
            write_verified(path, &ext, StabilizationBounds::uniform(t))?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", ext.to_text()),
    }
    Ok(Status::Success)
}

fn topology(a: &TopologyArgs, log: &EventLog) -> Result<Status> {
    let mut graph = TopologyGraph::parse(&read_text(&a.graph)?)?;
    let alg = read_algorithm(&a.algorithm)?;
    let p = *alg.params();
    let m = a.m.unwrap_or(2 * p.f + 1);
    let layers = match transforms::check_topology(&graph, p.n, m, a.d, a.core.as_deref(), a.search_cap) {
        Ok(layers) => layers,
        Err(e @ (TransformError::NotMember { .. } | TransformError::NoClique { .. })) => {
            println!("not a member: {e}");
            return Ok(Status::Negative);
        }
        Err(e) => return Err(e.into()),
    };
    for (k, layer) in layers.iter().enumerate() {
        let ids: Vec<String> = layer.iter().map(|v| v.to_string()).collect();
        println!("layer {k}: {}", ids.join(" "));
    }
    let depth = layers.len() - 1;
    log.emit("topology", json!({ "layers": layers, "depth": depth }));
    if let Some(out) = &a.output {
        graph.set_partition(layers.clone());
        write_file(out, &graph.to_text())?;
    }
    if !a.verify {
        return Ok(Status::Success);
    }
    let placed = if m == 2 * p.f + 1 {
        transforms::generalize_topology(&alg, &graph, &layers)?
    } else {
        transforms::generalize_topology_with_threshold(&alg, &graph, &layers, m)?
    };
    let flat = placed
        .to_algorithm(a.max_table)
        .map_err(|e| ResourceLimit(e.to_string()))?;
    let bound = p.t + depth.max(1) as u32 - 1;
    let report = verifier::check_stabilization(&flat, bound)?;
    let exact = report.stabilization_time();
    println!("stab_time={} bound={bound} (t={} d={depth})", time_text(exact), p.t);
    log.emit("topology_verify", json!({ "stab_time": exact, "bound": bound }));
    Ok(if report.stabilizes() {
        Status::Success
    } else {
        Status::Negative
    })
}

fn exact_period(seq: &[u32]) -> usize {
    (1..=seq.len() / 2)
        .find(|&p| seq.iter().zip(&seq[p..]).all(|(x, y)| x == y))
        .unwrap_or(seq.len())
}

fn random_init(protocol: &dyn Protocol, seed: u64) -> Vec<usize> {
    (0..protocol.nodes())
        .map(|i| (sim::derive_seed(seed, &[i as u64]) % protocol.states() as u64) as usize)
        .collect()
}

fn compose(cli: &Cli, a: &ComposeArgs, log: &EventLog) -> Result<Status> {
    let layers = a.layers.iter().map(|p| read_algorithm(p)).collect::<Result<Vec<_>>>()?;
    let counter = transforms::compose_layers(&layers)?;
    let faults = fault_set(&a.faults, counter.n())?;
    let modulus = 1usize << counter.depth();
    let window = a.window.unwrap_or((8 * modulus).max(16));
    if a.rounds < window {
        bail!("--rounds {} is shorter than the window {window}", a.rounds);
    }
    println!(
        "{} layers, {} nodes, {} composite states, counting mod {modulus}",
        counter.depth(),
        counter.n(),
        counter.states()
    );
    let seed = cli.seed.unwrap_or(0);
    let mut settle = Vec::new();
    let mut wrong = 0;
    for trial in 0..a.trials as u64 {
        let s = sim::derive_seed(seed, &[trial]);
        let init = random_init(&counter, s);
        let trace = sim::run(&counter, adversary(a.adversary, s), &faults, &init, a.rounds, s)?;
        let Some(start) = trace.stabilization_round(window) else {
            println!("trial {trial} (seed {s}): no settled counting within {} rounds", a.rounds);
            wrong += 1;
            continue;
        };
        let tail: Vec<u32> = trace.outputs[start..].iter().flatten().copied().collect();
        let period = exact_period(&tail);
        if period != modulus {
            println!("trial {trial} (seed {s}): period {period}");
            wrong += 1;
        }
        settle.push(start);
    }
    let max = settle.iter().max().copied();
    let mean = settle.iter().sum::<usize>() as f64 / settle.len().max(1) as f64;
    println!(
        "trials={} period_{modulus}={} settle_mean={mean:.2} settle_max={}",
        a.trials,
        a.trials - wrong,
        max.map_or_else(|| "-".into(), |m| m.to_string())
    );
    log.emit(
        "compose",
        json!({ "trials": a.trials, "failures": wrong, "settle_max": max, "modulus": modulus }),
    );
    Ok(if wrong == 0 {
        Status::Success
    } else {
        Status::Negative
    })
}

enum Built {
    Plain(Algorithm),
    Placed(transforms::TopologyAlgorithm),
    Randomized(RandomizedCounter),
}

impl Built {
    fn protocol(&self) -> &dyn Protocol {
        match self {
            Built::Plain(a) => a,
            Built::Placed(t) => t,
            Built::Randomized(r) => r,
        }
    }
}

fn build_protocol(a: &SimulateArgs) -> Result<Built> {
    if a.randomized {
        let (n, f) = (a.n.unwrap_or_default(), a.f.unwrap_or_default());
        return Ok(Built::Randomized(RandomizedCounter::new(n, f)?));
    }
    let path = a.algorithm.as_deref().expect("clap enforces a protocol");
    let alg = read_algorithm(path)?;
    let Some(graph_path) = &a.graph else {
        return Ok(Built::Plain(alg));
    };
    let graph = TopologyGraph::parse(&read_text(graph_path)?)?;
    let layers = match graph.partition() {
        Some(layers) => layers.to_vec(),
        None => {
            let p = alg.params();
            let d = a.d.context("the graph has no partition; pass --d")?;
            transforms::check_topology(
                &graph,
                p.n,
                2 * p.f + 1,
                d,
                None,
                transforms::DEFAULT_CLIQUE_SEARCH_CAP,
            )?
        }
    };
    Ok(Built::Placed(transforms::generalize_topology(&alg, &graph, &layers)?))
}

fn parse_states(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = if text.contains(',') {
        text.split(',').map(str::trim).collect()
    } else {
        text.split("").filter(|c| !c.is_empty()).collect()
    };
    parts
        .iter()
        .map(|p| p.parse().with_context(|| format!("bad state {p:?} in --init")))
        .collect()
}

fn simulate(cli: &Cli, a: &SimulateArgs, log: &EventLog) -> Result<Status> {
    let built = build_protocol(a)?;
    let protocol = built.protocol();
    let faults = match &built {
        Built::Placed(t) => {
            let positions = a
                .faults
                .iter()
                .map(|v| {
                    t.ids()
                        .iter()
                        .position(|id| id == v)
                        .with_context(|| format!("vertex {v} is not in the graph"))
                })
                .collect::<Result<Vec<_>>>()?;
            fault_set(&positions, protocol.nodes())?
        }
        _ => fault_set(&a.faults, protocol.nodes())?,
    };
    let seed = cli.seed.unwrap_or(0);
    let adv = adversary(a.adversary, seed);
    let init = match a.init.as_str() {
        "random" => Init::Random,
        "worst" => match &built {
            Built::Plain(alg) => Init::Fixed(sim::worst_initial(alg, &faults)?),
            _ => bail!("--init worst needs a plain --algorithm"),
        },
        text => Init::Fixed(parse_states(text)?),
    };

    if let Some(trials) = a.trials {
        let options = MonteCarloOptions {
            seed,
            round_cap: a.round_cap,
            window: a.window,
        };
        let stats = sim::run_monte_carlo(protocol, adv, &faults, &init, trials, options)?;
        println!("protocol: {} nodes, F={faults}, adversary {adv}", protocol.nodes());
        print!("{stats}");
        log.emit(
            "monte_carlo",
            json!({
                "trials": trials,
                "censored": stats.censored(),
                "mean": stats.mean(),
                "median": stats.median(),
                "max": stats.max(),
                "rule_violations": stats.rule_violations(),
            }),
        );
        return Ok(if stats.censored() == 0 && stats.rule_violations() == 0 {
            Status::Success
        } else {
            Status::Negative
        });
    }

    let init = match init {
        Init::Fixed(v) => v,
        Init::Random => random_init(protocol, sim::derive_seed(seed, &[u64::MAX])),
    };
    let trace = sim::run(protocol, adv, &faults, &init, a.rounds, seed)?;
    print!("{trace}");
    let settled = trace.stabilization_round(a.window);
    log.emit("trace", json!({ "rounds": a.rounds, "stabilized_at": settled }));
    match settled {
        Some(r) => {
            println!("stabilized_at={r}");
            Ok(Status::Success)
        }
        None => {
            println!("not stabilised within {} rounds (window {})", a.rounds, a.window);
            Ok(Status::Negative)
        }
    }
}

fn export_cnf(a: &ExportCnfArgs) -> Result<Status> {
    let instance = encode(&a.instance, a.max_vars, &EventLog::open(None)?)?;
    let text = direct::emit_dimacs(&instance);
    match &a.output {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(Status::Success)
}

fn decode_model(a: &DecodeModelArgs, log: &EventLog) -> Result<Status> {
    let instance = direct::parse_dimacs(&read_text(&a.cnf)?)
        .with_context(|| format!("parsing {}", a.cnf.display()))?;
    let p = *instance.params();
    let what = format!("{} n={} f={} s={} t={}", instance.class(), p.n, p.f, p.s, p.t);
    match read_model(&a.model, &instance.cnf)? {
        Some(model) => {
            let bounds = StabilizationBounds { t: p.t, t0: p.t0 };
            let report = emit_solution(&model, &instance, a.output.as_deref(), bounds)?;
            let t = time_text(report.stabilization_time());
            println!("sat: {what} realised, verified stab_time={t}");
            log.emit("result", json!({ "verdict": "sat", "stab_time": report.stabilization_time() }));
            Ok(Status::Success)
        }
        None => {
            println!("unsat: no algorithm exists for {what}");
            log.emit("result", json!({ "verdict": "unsat" }));
            Ok(Status::Negative)
        }
    }
}

fn export_dot(a: &ExportDotArgs) -> Result<Status> {
    let alg = read_algorithm(&a.algorithm)?;
    let faults = fault_set(&a.faults, alg.params().n)?;
    let graph = verifier::build_projection_graph(&alg, &faults)?;
    let dot = verifier::export_dot(&graph);
    match &a.output {
        Some(path) => write_file(path, &dot)?,
        None => print!("{dot}"),
    }
    Ok(Status::Success)
}

/// Competition-style solver: 10 for sat, 20 for unsat, 0 for unknown.
fn dimacs_solve(cli: &Cli, a: &DimacsSolveArgs) -> Result<u8> {
    let (cnf, _) = Cnf::parse_dimacs(&read_text(&a.cnf)?)?;
    let result = solver::solve_oneshot(&Backend::InProcess, &cnf, limits(cli), cli.seed)?;
    print!("{}", solver::format_model(&result.status, result.model.as_ref()));
    Ok(match result.status {
        SolveStatus::Sat => 10,
        SolveStatus::Unsat => 20,
        SolveStatus::Unknown(_) => 0,
    })
}
