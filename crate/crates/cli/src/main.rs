use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use uhlmann_core::adversarial::{
    build_boosted_kappa, build_kappa_family, eta_family_grid, kappa_instance_for,
    kappa_max_epsilon, qutrit_sensitivity, round_spectral_gap, CsvRow,
};
use uhlmann_core::certificate::{prepare, primal_probe};
use uhlmann_core::formats::{group_from_json, matrix_to_json, state_from_json, state_to_json};
use uhlmann_core::grouprep::{random_perturbed_rep, reps, stability_check, FiniteGroup};
use uhlmann_core::protocol::{
    accept_probability, completeness_experiment, reference_instance, simulate, slot_trace_distance,
    ProtocolParams, ProverStrategy,
};
use uhlmann_core::random::seeded_rng;
use uhlmann_core::uhlmann::{canonical_w, rigidity_report, UhlmannInstance};
use uhlmann_core::{CMatrix, Error, Result};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "uhlmann",
    version,
    about = "Canonical Uhlmann transformations and their rigidity"
)]
struct Cli {
    /// RNG seed for randomized subcommands (required when CI_STRICT=1).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative rank cut used when forming W, in (0, 1e-3].
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; subcommands pick a default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Pair {
    /// State |C> in cmjson.
    #[arg(long = "c")]
    c: PathBuf,
    /// State |D> in cmjson.
    #[arg(long = "d")]
    d: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the canonical transformation W as cmjson.
    Canonical(Pair),
    /// Fidelity, spectral gap, obliqueness and the rigidity bound.
    Report {
        #[command(flatten)]
        pair: Pair,
        /// Overlap deficit at which the bound is evaluated.
        #[arg(long)]
        epsilon: f64,
        /// Random near-optimal unitaries to probe; zero skips the probe.
        #[arg(long, default_value_t = 0)]
        probe_trials: usize,
    },
    /// Dual certificate at a multiplier (default -kappa/eta).
    Certificate {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        epsilon: f64,
        /// Multiplier on the overlap constraint.
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
    },
    /// Adversarial constructions.
    #[command(subcommand)]
    Adversarial(Adversarial),
    /// Enlarge the spectral gap by mixing and projecting.
    RoundGap {
        #[command(flatten)]
        pair: Pair,
        /// Spectral gap the rounded pair must reach.
        #[arg(long)]
        eta_target: f64,
        /// Defaults to eta_target^2 / 2.
        #[arg(long)]
        mix_delta: Option<f64>,
    },
    /// Simulate the two-round synthesis protocol.
    Protocol(ProtocolArgs),
    /// Stability of perturbed group representations.
    Grouprep(GroupArgs),
}

#[derive(Subcommand, Debug)]
enum Adversarial {
    /// Spectral gap family; comma-separated values sweep the grid.
    Eta {
        #[arg(long = "d", value_delimiter = ',', required = true)]
        d: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        eta: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        tau: Vec<f64>,
    },
    /// Obliqueness family with kappa close to the target.
    Kappa(KappaArgs),
    /// The obliqueness family lifted to fidelity at least one half.
    Boosted(KappaArgs),
    /// Qutrit pair whose canonical transformations differ by a swap.
    Qutrit {
        /// Size of the perturbation.
        #[arg(long)]
        epsilon: f64,
    },
}

#[derive(Args, Debug)]
struct KappaArgs {
    #[arg(long = "d", default_value_t = 2)]
    d: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    kappa: Vec<f64>,
    /// Deficit as a fraction of its largest admissible value.
    #[arg(long, default_value_t = 0.5)]
    epsilon_frac: f64,
}

#[derive(Args, Debug)]
struct ProtocolArgs {
    /// State |C>; the built-in two-qubit instance is used when both files are absent.
    #[arg(long = "c", requires = "d")]
    c: Option<PathBuf>,
    /// State |D>.
    #[arg(long = "d", requires = "c")]
    d: Option<PathBuf>,
    /// Qubits on the B side; the B dimension must be 2^n.
    #[arg(long, default_value_t = 2)]
    n: u32,
    /// Soundness parameter; accepted outputs are 1/r-close to the target.
    #[arg(long, default_value_t = 2)]
    r: u32,
    /// Overrides the honest per-round accept probability.
    #[arg(long)]
    gamma: Option<f64>,
    /// Independent protocol runs.
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    /// honest | derangement | random | epsilon:<value>
    #[arg(long, default_value = "honest")]
    prover: String,
    /// Per-trial outcomes as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GroupArgs {
    /// z<n> (n <= 8) or s3.
    #[arg(long, conflicts_with = "group_file")]
    group: Option<String>,
    /// Group table as JSON {"order": n, "table": [[...]]}.
    #[arg(long)]
    group_file: Option<PathBuf>,
    /// regular | characters:<c1,c2,..> | sign | standard | perm | perm+sign
    #[arg(long, default_value = "regular")]
    rep: String,
    /// Perturbation scales; one sweep point each.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    scale: Vec<f64>,
    /// Perturbations per scale.
    #[arg(long, default_value_t = 1)]
    count: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidFormat(format!("{}: {}", path.display(), e)))
}

fn load_pair(pair: &Pair) -> Result<UhlmannInstance<f64>> {
    let c = state_from_json(&read(&pair.c)?)?;
    let d = state_from_json(&read(&pair.d)?)?;
    UhlmannInstance::new(c, d)
}

fn parse_json(text: &str) -> Value {
    serde_json::from_str(text).expect("writer emits valid JSON")
}

struct Ctx {
    seed: Option<u64>,
    strict: bool,
    tol: Option<f64>,
}

impl Ctx {
    fn seed(&self) -> Result<u64> {
        match (self.seed, self.strict) {
            (Some(s), _) => Ok(s),
            (None, false) => Ok(0),
            (None, true) => Err(Error::BadParams(
                "--seed is required when CI_STRICT=1".into(),
            )),
        }
    }
}

enum Output {
    Json(Value),
    Text(String),
}

fn with_schema(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    v
}

fn csv_table(rows: &[CsvRow]) -> String {
    let mut s = String::from(CsvRow::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

fn rows_output(rows: Vec<CsvRow>, extra: Value, format: Format) -> Result<Output> {
    Ok(match format {
        Format::Csv => Output::Text(csv_table(&rows)),
        Format::Json => Output::Json(json!({
            "rows": serde_json::to_value(&rows).expect("rows serialize"),
            "details": extra,
        })),
    })
}

fn run_adversarial(cmd: &Adversarial, format: Format) -> Result<Output> {
    match cmd {
        Adversarial::Eta { d, eta, tau } => {
            let fams = eta_family_grid(d, eta, tau)?;
            let details: Vec<Value> = fams
                .iter()
                .map(|f| {
                    json!({
                        "d": f.d, "eta": f.eta, "tau": f.tau, "delta": f.delta,
                        "moved": f.g, "tau_effective": f.tau_effective,
                        "epsilon_nominal": f.epsilon_nominal, "epsilon": f.epsilon,
                    })
                })
                .collect();
            rows_output(
                fams.iter().map(|f| f.row()).collect(),
                json!(details),
                format,
            )
        }
        Adversarial::Kappa(args) | Adversarial::Boosted(args) => {
            let boosted = matches!(cmd, Adversarial::Boosted(_));
            if !(args.epsilon_frac > 0.0 && args.epsilon_frac <= 1.0) {
                return Err(Error::BadParams("--epsilon-frac must lie in (0, 1]".into()));
            }
            let mut rows = Vec::new();
            let mut details = Vec::new();
            for &k in &args.kappa {
                let (rho, s) = kappa_instance_for(k, args.d)?;
                let fam =
                    build_kappa_family(&rho, &s, args.epsilon_frac * kappa_max_epsilon(&rho, &s))?;
                if boosted {
                    let b = build_boosted_kappa(&fam)?;
                    details.push(json!({
                        "base_fidelity": b.base_fidelity, "base_kappa": b.base_kappa,
                        "kappa_times_base_fidelity_sq": b.kappa_times_base_fidelity_sq,
                    }));
                    rows.push(b.row());
                } else {
                    details.push(json!({
                        "kappa_formula": fam.kappa_formula, "eta_formula": fam.eta_formula,
                        "overlap": fam.overlap, "lower": fam.lower, "upper": fam.upper,
                    }));
                    rows.push(fam.row());
                }
            }
            rows_output(rows, json!(details), format)
        }
        Adversarial::Qutrit { epsilon } => {
            let q = qutrit_sensitivity(*epsilon)?;
            Ok(Output::Json(json!({
                "epsilon": q.epsilon,
                "w_gap": q.w_gap,
                "state_distance": q.state_distance,
                "within_epsilon": q.within_epsilon,
                "w": parse_json(&matrix_to_json(&q.w)),
                "w_swapped": parse_json(&matrix_to_json(&q.w_swapped)),
            })))
        }
    }
}

fn parse_prover(text: &str, inst: &UhlmannInstance<f64>, seed: u64) -> Result<ProverStrategy> {
    match text {
        "honest" => ProverStrategy::honest(inst),
        "derangement" => ProverStrategy::derangement(inst.dim_b()),
        "random" => ProverStrategy::random(inst.dim_b(), seed),
        other => match other.strip_prefix("epsilon:") {
            Some(v) => {
                let eps: f64 = v.parse().map_err(|_| {
                    Error::BadParams(format!("cannot parse epsilon in {:?}", other))
                })?;
                ProverStrategy::near_optimal(inst, eps, seed)
            }
            None => Err(Error::BadParams(format!(
                "unknown prover {:?}; expected honest, derangement, random or epsilon:<value>",
                other
            ))),
        },
    }
}

fn run_protocol_cmd(args: &ProtocolArgs, ctx: &Ctx) -> Result<Output> {
    let seed = ctx.seed()?;
    let inst = match (&args.c, &args.d) {
        (Some(c), Some(d)) => load_pair(&Pair {
            c: c.clone(),
            d: d.clone(),
        })?,
        _ => reference_instance()?,
    };
    if args.trials == 0 {
        return Err(Error::BadParams("--trials must be positive".into()));
    }
    let params = ProtocolParams::for_instance(&inst, args.n, args.r, args.gamma)?;
    let prover = parse_prover(&args.prover, &inst, seed)?;
    let records = simulate(&inst, &params, &prover, args.trials, seed)?;
    if let Some(path) = &args.csv {
        let mut s = String::from("trial,i_star,j,accepted\n");
        for r in &records {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.trial, r.i_star, r.j, r.accepted
            ));
        }
        write_file(path, &s)?;
    }
    let accepted = records.iter().filter(|r| r.accepted).count();
    let acceptance = accepted as f64 / args.trials as f64;
    let mut summary = json!({
        "prover": prover.label,
        "params": serde_json::to_value(&params).expect("params serialize"),
        "trials": args.trials,
        "accepted": accepted,
        "acceptance": acceptance,
        "round_probability": accept_probability(&inst, &prover)?,
        "slot_trace_distance": slot_trace_distance(&inst, &prover)?,
        "soundness_limit": 1.0 / args.r as f64,
        "seed": seed,
    });
    if args.prover == "honest" {
        let rep = completeness_experiment(&inst, &params, args.trials, seed)?;
        summary["completeness"] = serde_json::to_value(&rep).expect("report serializes");
    }
    Ok(Output::Json(summary))
}

fn parse_group(args: &GroupArgs) -> Result<FiniteGroup> {
    if let Some(path) = &args.group_file {
        return FiniteGroup::from_raw(group_from_json(&read(path)?)?);
    }
    let name = args.group.as_deref().unwrap_or("z2").to_ascii_lowercase();
    if name == "s3" {
        return Ok(FiniteGroup::s3());
    }
    match name.strip_prefix('z').and_then(|n| n.parse::<usize>().ok()) {
        Some(n) => FiniteGroup::cyclic(n),
        None => Err(Error::InvalidGroup(format!(
            "unknown group {:?}; expected z<n> or s3",
            name
        ))),
    }
}

fn parse_rep(text: &str, group: &FiniteGroup) -> Result<Vec<CMatrix>> {
    let is_s3 = *group == FiniteGroup::s3();
    let need_s3 = |r: Vec<CMatrix>| {
        if is_s3 {
            Ok(r)
        } else {
            Err(Error::BadParams(format!(
                "representation {:?} is only defined for s3",
                text
            )))
        }
    };
    match text {
        "regular" => Ok(reps::regular(group)),
        "sign" => need_s3(reps::s3_sign()),
        "standard" => need_s3(reps::s3_standard()),
        "perm" => need_s3(reps::s3_permutation()),
        "perm+sign" => need_s3(reps::direct_sum(&reps::s3_permutation(), &reps::s3_sign())?),
        other => match other.strip_prefix("characters:") {
            Some(list) => {
                let is_cyclic = (0..group.order())
                    .all(|a| group.mul(a, 1 % group.order()) == (a + 1) % group.order());
                if !is_cyclic {
                    return Err(Error::BadParams("characters need a cyclic group".into()));
                }
                let charges = list
                    .split(',')
                    .map(|c| c.trim().parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::BadParams(format!("cannot parse charges {:?}", list)))?;
                if charges.is_empty() {
                    return Err(Error::BadParams("need at least one charge".into()));
                }
                Ok(reps::cyclic_characters(group, &charges))
            }
            None => Err(Error::BadParams(format!(
                "unknown representation {:?}",
                other
            ))),
        },
    }
}

fn run_grouprep(args: &GroupArgs, ctx: &Ctx) -> Result<Output> {
    let seed = ctx.seed()?;
    let group = parse_group(args)?;
    let exact = parse_rep(&args.rep, &group)?;
    if args.count == 0 {
        return Err(Error::BadParams("--count must be positive".into()));
    }
    let mut points = Vec::new();
    let mut stream = 0u64;
    for &s in &args.scale {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::BadParams(format!(
                "scale must be finite and >= 0, got {}",
                s
            )));
        }
        for _ in 0..args.count {
            let mut rng = seeded_rng(seed, stream);
            let rep = random_perturbed_rep(&group, &exact, s, &mut rng)?;
            let result = stability_check(&rep)?;
            points.push(json!({
                "scale": s,
                "stream": stream,
                "result": serde_json::to_value(&result).expect("result serializes"),
            }));
            stream += 1;
        }
    }
    Ok(Output::Json(json!({
        "group_order": group.order(),
        "rep": args.rep,
        "dim": exact[0].rows(),
        "seed": seed,
        "points": points,
    })))
}

fn run(cli: &Cli) -> Result<Output> {
    let ctx = Ctx {
        seed: cli.seed,
        strict: std::env::var("CI_STRICT")
            .map(|v| v == "1")
            .unwrap_or(false),
        tol: cli.tol,
    };
    if let Some(t) = ctx.tol {
        if !(t > 0.0 && t <= 1e-3) {
            return Err(Error::BadParams(format!(
                "--tol must lie in (0, 1e-3], got {}",
                t
            )));
        }
    }
    if cli.format == Some(Format::Csv) && !matches!(cli.command, Command::Adversarial(_)) {
        return Err(Error::BadParams(
            "CSV output is only available for adversarial tables".into(),
        ));
    }
    match &cli.command {
        Command::Canonical(pair) => {
            let inst = load_pair(pair)?;
            let w = canonical_w(&inst, ctx.tol.unwrap_or_else(|| inst.rank_tol()))?;
            Ok(Output::Text(matrix_to_json(&w)))
        }
        Command::Report {
            pair,
            epsilon,
            probe_trials,
        } => {
            let inst = load_pair(pair)?;
            let mut report = rigidity_report(&inst, *epsilon)?;
            if *probe_trials > 0 {
                let probe = primal_probe(&inst, *epsilon, *probe_trials, ctx.seed()?)?;
                report.empirical_primal = Some(probe.best_residual);
            }
            Ok(Output::Json(
                serde_json::to_value(&report).expect("report serializes"),
            ))
        }
        Command::Certificate {
            pair,
            epsilon,
            alpha,
        } => {
            let inst = load_pair(pair)?;
            if epsilon.is_nan() || *epsilon < 0.0 {
                return Err(Error::BadParams(format!(
                    "epsilon must be >= 0, got {}",
                    epsilon
                )));
            }
            let p = prepare(&inst)?;
            let alpha = alpha.unwrap_or_else(|| p.optimal_alpha());
            let cert = p.certificate(*epsilon, alpha)?;
            let core = p.psd_core()?;
            Ok(Output::Json(json!({
                "epsilon": epsilon,
                "alpha": cert.alpha,
                "fidelity": p.fidelity,
                "eta": p.eta,
                "kappa": p.kappa,
                "trace_p_rho": p.trace_p_rho(),
                "value": cert.value,
                "objective": cert.objective,
                "expected_value": p.kappa / p.eta * epsilon - p.trace_p_rho(),
                "feasible": cert.feasible,
                "feasibility_margin": cert.feasibility_margin,
                "dual_bound": p.dual_bound(*epsilon)?,
                "psd_core_min_eig": core.min_eig,
                "y1": parse_json(&matrix_to_json(&cert.y1)),
                "y2": parse_json(&matrix_to_json(&cert.y2)),
            })))
        }
        Command::Adversarial(cmd) => run_adversarial(cmd, cli.format.unwrap_or(Format::Csv)),
        Command::RoundGap {
            pair,
            eta_target,
            mix_delta,
        } => {
            let inst = load_pair(pair)?;
            let delta = mix_delta.unwrap_or(eta_target * eta_target / 2.0);
            let r = round_spectral_gap(&inst, *eta_target, delta)?;
            Ok(Output::Json(json!({
                "eta_target": r.eta_target,
                "mix_delta": r.mix_delta,
                "overlap_c": r.overlap_c,
                "overlap_d": r.overlap_d,
                "beta": r.beta,
                "rank_pi": r.rank_pi,
                "rounded_gap": r.rounded_gap,
                "rounded_c": parse_json(&state_to_json(&r.rounded.c)),
                "rounded_d": parse_json(&state_to_json(&r.rounded.d)),
            })))
        }
        Command::Protocol(args) => run_protocol_cmd(args, &ctx),
        Command::Grouprep(args) => run_grouprep(args, &ctx),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::InvalidFormat(format!("{}: {}", path.display(), e)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| {
        let text = match out {
            Output::Json(v) => {
                let mut s =
                    serde_json::to_string_pretty(&with_schema(v)).expect("value serializes");
                s.push('\n');
                s
            }
            Output::Text(s) if s.ends_with('\n') => s,
            Output::Text(s) => s + "\n",
        };
        match &cli.out {
            Some(path) => write_file(path, &text),
            None => {
                print!("{}", text);
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = json!({
                "schema_version": SCHEMA_VERSION,
                "error": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{}", payload);
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
