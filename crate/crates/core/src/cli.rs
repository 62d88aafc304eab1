//! Batch command-line front end. Every command writes JSON-lines records
//! that carry the family hash, the resolved seed and the full command
//! configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::coupling::{
    adjacent_discrepancy_pair, check_g_inequalities, estimate_g, lemma_cover_existence, lemma_d_monotone,
    success_bound_check, write_coupling_csv, CoupledState, CouplingEngine, CouplingKind, CouplingOptions,
};
use crate::error::{Error, Result};
use crate::exact::{
    asymmetric_duality_falsifier, build_generator, duality_exact, product_measure, sector_stationary,
    stationarity_residual,
};
use crate::lattice::{Lattice, Site};
use crate::process::{
    rng_for, run_finite_with, sample_product_with, ConfigSimulator, Configuration, DualState, Estimate,
    InitialLaw, Trajectory,
};
use crate::rates::{ClosureMode, FamilySpec, RateFamily};

#[derive(Debug, Parser)]
#[command(name = "permuta", version, about = "Simulation and exact checks for permutation processes")]
pub struct Cli {
    /// Worker threads for replica-level parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON-lines output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report family constants and conditions.
    Validate(FamilyArgs),
    /// Simulate the process (or the finite set process on ℤ^d).
    Simulate(SimulateArgs),
    /// Monte Carlo check of the self-duality identity.
    DualCheck(DualCheckArgs),
    #[command(subcommand)]
    Couple(CoupleCommand),
    #[command(subcommand)]
    Exact(ExactCommand),
}

#[derive(Debug, Subcommand)]
pub enum CoupleCommand {
    /// First-passage estimates of the three two-point processes.
    Triple(TripleArgs),
    /// Two-discrepancy coupling.
    Recurrent(CouplingArgs),
    /// Discrepancy-monotone coupling.
    General(CouplingArgs),
    /// Exhaustive word-level lemmas.
    Lemmas(LemmaArgs),
    /// Empirical merge probability against the success bound.
    Bound(BoundArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExactCommand {
    /// Residual of the product measure under the generator.
    Stationarity(StationarityArgs),
    /// Stationary law of one particle-number sector.
    Sector(SectorArgs),
    /// Both sides of the duality identity by uniformization.
    Duality(ExactDualityArgs),
    /// Search for duality violations without requiring symmetry.
    Falsify(FalsifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FamilyArgs {
    #[arg(long)]
    pub family: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub time: f64,
    /// Product initial density (torus only).
    #[arg(long, conflicts_with = "sites")]
    pub rho: Option<f64>,
    /// Initially occupied sites, `;`-separated, e.g. `0;3` or `(0,1);(2,2)`.
    #[arg(long)]
    pub sites: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// CSV trajectory of the first sample.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DualCheckArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub time: f64,
    /// Dual set `A`.
    #[arg(long)]
    pub sites: String,
    #[arg(long, conflicts_with = "eta")]
    pub rho: Option<f64>,
    /// Explicit initial configuration.
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Allowed deviation in standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub tolerance_sigma: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TripleArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub x0: String,
    #[arg(long)]
    pub x1: String,
    #[arg(long)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosureArg {
    Strict,
    Relaxed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CouplingArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: f64,
    /// Occupied sites of the first copy; random adjacent discrepancies when omitted.
    #[arg(long, requires = "b")]
    pub a: Option<String>,
    #[arg(long, requires = "a")]
    pub b: Option<String>,
    /// Density of the random initial pair.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = ClosureArg::Strict)]
    pub closure: ClosureArg,
    /// Minimum fraction of coupled runs for a pass.
    #[arg(long)]
    pub tolerance_coupled: Option<f64>,
    /// CSV event log of the first run.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LemmaArgs {
    #[arg(long, default_value_t = 4)]
    pub max_range: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 200.0)]
    pub horizon: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StationarityArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance_residual: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SectorArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub particles: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance_residual: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactDualityArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub eta: String,
    #[arg(long)]
    pub sites: String,
    #[arg(long)]
    pub time: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance_duality: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FalsifyArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub time: f64,
    /// Dual set sizes to search, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub set_sizes: Vec<usize>,
}

/// Records produced by one command and its overall verdict.
#[derive(Debug, Default)]
pub struct Outcome {
    pub records: Vec<Value>,
    pub pass: bool,
}

/// Parses `;`-separated sites. An empty string is the empty list.
pub fn parse_sites(s: &str) -> Result<Vec<Site>> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

fn parse_site(s: &str) -> Result<Site> {
    match parse_sites(s)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(Error::Parse(format!("expected exactly one site, got {s:?}"))),
    }
}

fn configuration(lattice: &Lattice, s: &str) -> Result<Configuration> {
    Configuration::from_sites(lattice, &parse_sites(s)?)
}

fn load(path: &Path) -> Result<(RateFamily, String)> {
    let fam = FamilySpec::load(path)?;
    let hash = fam.hash();
    Ok((fam, hash))
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn record(command: &str, hash: Option<&str>, config: &impl Serialize, seed: Option<u64>, body: Value) -> Value {
    let mut r = json!({
        "command": command,
        "family_hash": hash,
        "config": config,
        "seed": seed,
    });
    if let (Value::Object(r), Value::Object(b)) = (&mut r, body) {
        r.extend(b);
    }
    r
}

fn sites_json(sites: impl IntoIterator<Item = Site>) -> Vec<String> {
    sites.into_iter().map(|x| x.to_string()).collect()
}

fn positive_samples(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("--samples must be at least 1".into()));
    }
    Ok(())
}

fn dump_to(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_validate(args: &FamilyArgs) -> Result<Outcome> {
    let (fam, hash) = load(&args.family)?;
    let report = fam.report();
    let closure = fam.range_closure(ClosureMode::Strict);
    let pass = report.m_pl.is_finite() && report.irreducible;
    let body = json!({
        "report": report,
        "closure_missing": closure.missing,
        "base_permutations": fam.base().len(),
        "pass": pass,
    });
    Ok(Outcome {
        records: vec![record("validate", Some(&hash), args, None, body)],
        pass,
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let (fam, hash) = load(&args.family)?;
    positive_samples(args.samples)?;
    if !(args.time >= 0.0 && args.time.is_finite()) {
        return Err(Error::Precondition("--time must be finite and non-negative".into()));
    }
    let seed = resolve_seed(args.seed);
    let lat = fam.lattice();
    let initial = args.sites.as_deref().map(parse_sites).transpose()?;
    let runs: Vec<Result<(Value, Option<Trajectory<()>>)>> = if lat.is_torus() {
        let init = match (&initial, args.rho) {
            (Some(s), _) => InitialLaw::Explicit(Configuration::from_sites(lat, s)?),
            (None, Some(rho)) => InitialLaw::Product(rho),
            (None, None) => return Err(Error::Precondition("simulate needs --rho or --sites".into())),
        };
        let sim = ConfigSimulator::new(&fam)?;
        (0..args.samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(seed, i);
                let mut eta = match &init {
                    InitialLaw::Product(rho) => sample_product_with(*rho, lat, &mut rng)?,
                    InitialLaw::Explicit(c) => c.clone(),
                };
                let particles = eta.count();
                let mut events = Vec::new();
                let fired = sim.run(&mut eta, args.time, &mut rng, |e, _| {
                    if i == 0 {
                        events.push(*e)
                    }
                });
                if eta.count() != particles {
                    return Err(Error::PropertyViolation("particle count changed".into()));
                }
                let body = json!({
                    "sample": i,
                    "events": fired,
                    "particles": particles,
                    "terminal": sites_json(eta.occupied_sites()),
                });
                let traj = (i == 0).then_some(Trajectory {
                    seed,
                    events,
                    terminal: (),
                });
                Ok((body, traj))
            })
            .collect()
    } else {
        let Some(sites) = initial else {
            return Err(Error::Precondition("simulation on ℤ^d needs --sites".into()));
        };
        for x in &sites {
            lat.check_site(*x)?;
        }
        fam.validate_for_simulation()?;
        let a0 = DualState::new(sites);
        (0..args.samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(seed, i);
                let mut a = a0.clone();
                let mut events = Vec::new();
                let fired = run_finite_with(&mut a, &fam, args.time, &mut rng, |e, _| {
                    if i == 0 {
                        events.push(*e)
                    }
                });
                if a.len() != a0.len() {
                    return Err(Error::PropertyViolation("particle count changed".into()));
                }
                let body = json!({
                    "sample": i,
                    "events": fired,
                    "particles": a.len(),
                    "terminal": sites_json(a.sites.iter().copied()),
                });
                let traj = (i == 0).then_some(Trajectory {
                    seed,
                    events,
                    terminal: (),
                });
                Ok((body, traj))
            })
            .collect()
    };
    let mut out = Outcome {
        records: Vec::new(),
        pass: true,
    };
    for r in runs {
        let (body, traj) = r?;
        if let (Some(t), Some(path)) = (traj, &args.dump) {
            dump_to(path, |w| t.write_csv(w))?;
        }
        out.records.push(record("simulate", Some(&hash), args, Some(seed), body));
    }
    Ok(out)
}

fn cmd_dual_check(args: &DualCheckArgs) -> Result<Outcome> {
    let (fam, hash) = load(&args.family)?;
    positive_samples(args.samples)?;
    let seed = resolve_seed(args.seed);
    let lat = fam.lattice();
    let a = DualState::new(parse_sites(&args.sites)?);
    let init = match (&args.eta, args.rho) {
        (Some(s), _) => InitialLaw::Explicit(configuration(lat, s)?),
        (None, Some(rho)) => InitialLaw::Product(rho),
        (None, None) => return Err(Error::Precondition("dual-check needs --rho or --eta".into())),
    };
    let est = crate::process::duality_mc(&init, &a, &fam, args.time, args.samples, seed)?;
    let k = args.tolerance_sigma;
    let exact = match &init {
        InitialLaw::Explicit(eta) if lat.num_sites().is_some_and(|n| n <= 16) => {
            Some(duality_exact(&fam, eta, &a, args.time)?)
        }
        _ => None,
    };
    let within = |e: &Estimate, v: f64| (e.mean - v).abs() <= k * e.std_error;
    let pass = match exact {
        Some(x) => within(&est.lhs, x.lhs) && within(&est.rhs, x.rhs),
        None => (est.lhs.mean - est.rhs.mean).abs() <= k * est.combined_se(),
    };
    let body = json!({
        "lhs": est.lhs,
        "rhs": est.rhs,
        "combined_se": est.combined_se(),
        "exact": exact,
        "pass": pass,
    });
    Ok(Outcome {
        records: vec![record("dual-check", Some(&hash), args, Some(seed), body)],
        pass,
    })
}

fn cmd_triple(args: &TripleArgs) -> Result<Outcome> {
    let (fam, hash) = load(&args.family)?;
    positive_samples(args.samples)?;
    let seed = resolve_seed(args.seed);
    let x = (parse_site(&args.x0)?, parse_site(&args.x1)?);
    let g = estimate_g(x, &fam, args.horizon, args.samples, seed)?;
    let ineq = check_g_inequalities(&g, &fam.report());
    let pathwise_ok = ineq
        .checks
        .iter()
        .all(|c| c.violations.is_none_or(|v| v == 0));
    if !pathwise_ok {
        return Err(Error::PropertyViolation("pathwise ordering of first-passage events failed".into()));
    }
    let body = json!({
        "estimates": g,
        "inequalities": ineq,
        "pass": ineq.pass,
    });
    Ok(Outcome {
        records: vec![record("couple triple", Some(&hash), args, Some(seed), body)],
        pass: ineq.pass,
    })
}

fn cmd_coupling(kind: CouplingKind, args: &CouplingArgs) -> Result<Outcome> {
    let name = match kind {
        CouplingKind::Recurrent => "couple recurrent",
        CouplingKind::General => "couple general",
    };
    let (fam, hash) = load(&args.family)?;
    positive_samples(args.samples)?;
    let seed = resolve_seed(args.seed);
    let lat = fam.lattice();
    let options = CouplingOptions {
        closure: match args.closure {
            ClosureArg::Strict => ClosureMode::Strict,
            ClosureArg::Relaxed => ClosureMode::Relaxed,
        },
        record: args.dump.is_some(),
        ..CouplingOptions::default()
    };
    let engine = CouplingEngine::new(&fam, kind, options)?;
    let explicit = match (&args.a, &args.b) {
        (Some(a), Some(b)) => Some((configuration(lat, a)?, configuration(lat, b)?)),
        _ => None,
    };
    let runs: Vec<Result<_>> = (0..args.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let (a, b) = match &explicit {
                Some(p) => p.clone(),
                None => adjacent_discrepancy_pair(&fam, args.rho, &mut rng)?,
            };
            engine.run(CoupledState::new(a, b)?, args.horizon, seed, &mut rng)
        })
        .collect();
    let mut out = Outcome::default();
    let mut coupled = Vec::with_capacity(args.samples);
    for (i, r) in runs.into_iter().enumerate() {
        let r = r?;
        if i == 0 {
            if let Some(path) = &args.dump {
                dump_to(path, |w| write_coupling_csv(&r.events, w))?;
            }
        }
        coupled.push(r.coupled);
        let body = json!({
            "sample": i,
            "initial_d": r.initial_d,
            "final_d": r.terminal.d(),
            "coupled": r.coupled,
            "t_couple": r.t_couple,
            "both_events": r.both_events,
            "merges": r.merges,
        });
        out.records.push(record(name, Some(&hash), args, Some(seed), body));
    }
    let frac = Estimate::from_indicators(&coupled);
    out.pass = args.tolerance_coupled.is_none_or(|f| frac.mean >= f);
    let body = json!({ "summary": true, "coupled_fraction": frac, "pass": out.pass });
    out.records.push(record(name, Some(&hash), args, Some(seed), body));
    Ok(out)
}

fn cmd_lemmas(args: &LemmaArgs) -> Result<Outcome> {
    let reports = [lemma_cover_existence(args.max_range)?, lemma_d_monotone(args.max_range)?];
    let pass = reports.iter().all(|r| r.pass);
    let records = reports
        .iter()
        .map(|r| record("couple lemmas", None, args, None, json!({ "report": r, "pass": r.pass })))
        .collect();
    Ok(Outcome { records, pass })
}

fn cmd_bound(args: &BoundArgs) -> Result<Outcome> {
    let (fam, hash) = load(&args.family)?;
    positive_samples(args.samples)?;
    let seed = resolve_seed(args.seed);
    let rep = success_bound_check(&fam, args.samples, args.horizon, seed)?;
    let pass = rep.pass;
    Ok(Outcome {
        records: vec![record("couple bound", Some(&hash), args, Some(seed), json!({ "report": rep, "pass": pass }))],
        pass,
    })
}

fn cmd_stationarity(args: &StationarityArgs) -> Result<Outcome> {
    let (fam, hash) = load(&args.family)?;
    if !(0.0..=1.0).contains(&args.rho) {
        return Err(Error::Precondition(format!("density {} outside [0, 1]", args.rho)));
    }
    let q = build_generator(&fam)?;
    let residual = stationarity_residual(&product_measure(q.n_sites(), args.rho), &q)?;
    let pass = residual <= args.tolerance_residual;
    let body = json!({
        "states": q.size(),
        "max_row_sum": q.max_row_sum(),
        "sector_block_diagonal": q.is_sector_block_diagonal(),
        "residual": residual,
        "pass": pass,
    });
    Ok(Outcome {
        records: vec![record("exact stationarity", Some(&hash), args, None, body)],
        pass,
    })
}

fn cmd_sector(args: &SectorArgs) -> Result<Outcome> {
    let (fam, hash) = load(&args.family)?;
    let q = build_generator(&fam)?;
    let pi = sector_stationary(&q, args.particles)?;
    let mut nu = vec![0.0; q.size()];
    for (&c, &p) in pi.states.iter().zip(&pi.probabilities) {
        nu[c as usize] = p;
    }
    let residual = q.left_mul(&nu).iter().map(|x| x.abs()).fold(0.0, f64::max);
    let uniform = 1.0 / pi.states.len() as f64;
    let deviation = pi
        .probabilities
        .iter()
        .map(|p| (p - uniform).abs())
        .fold(0.0, f64::max);
    let pass = residual <= args.tolerance_residual;
    let body = json!({
        "states": pi.states.len(),
        "residual": residual,
        "max_deviation_from_uniform": deviation,
        "pass": pass,
    });
    Ok(Outcome {
        records: vec![record("exact sector", Some(&hash), args, None, body)],
        pass,
    })
}

fn cmd_exact_duality(args: &ExactDualityArgs) -> Result<Outcome> {
    let (fam, hash) = load(&args.family)?;
    let eta = configuration(fam.lattice(), &args.eta)?;
    let a = DualState::new(parse_sites(&args.sites)?);
    let d = duality_exact(&fam, &eta, &a, args.time)?;
    let diff = (d.lhs - d.rhs).abs();
    let pass = diff <= args.tolerance_duality;
    let body = json!({ "lhs": d.lhs, "rhs": d.rhs, "difference": diff, "pass": pass });
    Ok(Outcome {
        records: vec![record("exact duality", Some(&hash), args, None, body)],
        pass,
    })
}

fn cmd_falsify(args: &FalsifyArgs) -> Result<Outcome> {
    let (fam, hash) = load(&args.family)?;
    let symmetric = fam.is_symmetric();
    let rep = asymmetric_duality_falsifier(&fam, args.time, &args.set_sizes)?;
    if symmetric && rep.witness.is_some() {
        return Err(Error::PropertyViolation("duality violated for a symmetric family".into()));
    }
    let body = json!({
        "symmetric": symmetric,
        "duality_holds": rep.witness.is_none(),
        "report": rep,
        "pass": true,
    });
    Ok(Outcome {
        records: vec![record("exact falsify", Some(&hash), args, None, body)],
        pass: true,
    })
}

pub fn dispatch(command: &Command) -> Result<Outcome> {
    match command {
        Command::Validate(a) => cmd_validate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::DualCheck(a) => cmd_dual_check(a),
        Command::Couple(c) => match c {
            CoupleCommand::Triple(a) => cmd_triple(a),
            CoupleCommand::Recurrent(a) => cmd_coupling(CouplingKind::Recurrent, a),
            CoupleCommand::General(a) => cmd_coupling(CouplingKind::General, a),
            CoupleCommand::Lemmas(a) => cmd_lemmas(a),
            CoupleCommand::Bound(a) => cmd_bound(a),
        },
        Command::Exact(c) => match c {
            ExactCommand::Stationarity(a) => cmd_stationarity(a),
            ExactCommand::Sector(a) => cmd_sector(a),
            ExactCommand::Duality(a) => cmd_exact_duality(a),
            ExactCommand::Falsify(a) => cmd_falsify(a),
        },
    }
}

/// Exit code for an error: 1 for property violations, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::PropertyViolation(_) => 1,
        _ => 2,
    }
}

fn write_records(out: Option<&Path>, records: &[Value]) -> Result<()> {
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match cli.threads {
        Some(0) => Err(Error::Precondition("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(&cli.command))),
        None => dispatch(&cli.command),
    };
    match result.and_then(|o| write_records(cli.out.as_deref(), &o.records).map(|_| o)) {
        Ok(o) => {
            if o.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
