use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use stpath_core::bomd::{check_gamma, default_gamma, run_trees, BomdOptions, BomdRun};
use stpath_core::certify::{brute_force_opt, build_certificate, verify, TourCertificate, BRUTE_FORCE_CAP};
use stpath_core::cuts::{build_layers, find_narrow_cuts};
use stpath_core::instance::{gen_random_metric, load_instance, Format, GenKind, LoadOptions};
use stpath_core::joins::DEFAULT_MATCHING_CAP;
use stpath_core::reconnect::{reconnect_json, DropRule, DEFAULT_SUBSET_CAP};
use stpath_core::subtour::solve_subtour_lp;
use stpath_core::treedecomp::{decompose_layered, DEFAULT_DENOMINATOR_CAP};
use stpath_core::{Instance, Rational};

#[derive(Parser)]
#[command(name = "stpath", version, about = "Metric s-t path TSP: best-of-many with deletion, certified in exact arithmetic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance; prints the tour, certificate to --out.
    Solve(SolveArgs),
    /// Solve and print the full certificate.
    Certify(SolveArgs),
    /// Print the layered tree combination of the LP optimum.
    Decompose(DecomposeArgs),
    /// Generate a random metric instance.
    Gen(GenArgs),
    /// Run a seed range and print a summary table.
    Bench(BenchArgs),
    /// Re-check a stored certificate against its instance.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Instance file.
    #[arg(long = "in")]
    input: PathBuf,
    /// json or tsplib; inferred from the extension when absent.
    #[arg(long)]
    format: Option<String>,
    /// Override the start vertex (0-based).
    #[arg(long)]
    s: Option<usize>,
    /// Override the end vertex (0-based).
    #[arg(long)]
    t: Option<usize>,
    /// Replace costs by their shortest-path closure.
    #[arg(long)]
    closure: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    MaxCost,
    Leftmost,
}

#[derive(Args)]
struct SolverArgs {
    /// Deletion parameter as p/q, in [0, 1/2].
    #[arg(long, default_value = "1/16")]
    gamma: String,
    /// Worker threads for the per-tree map.
    #[arg(long)]
    threads: Option<usize>,
    /// Which lonely cut of a bad edge keeps its edge undoubled.
    #[arg(long, value_enum, default_value = "max-cost")]
    drop_rule: Rule,
    /// Largest common denominator allowed in the tree combination.
    #[arg(long, default_value_t = DEFAULT_DENOMINATOR_CAP)]
    denominator_cap: u64,
    /// Largest odd-vertex count handled by the exact matching.
    #[arg(long, default_value_t = DEFAULT_MATCHING_CAP)]
    matching_cap: usize,
    /// Largest cut count for exhaustive subset checks.
    #[arg(long, default_value_t = DEFAULT_SUBSET_CAP)]
    subset_cap: usize,
    /// Compute OPT by Held-Karp up to this many vertices.
    #[arg(long, default_value_t = 12)]
    brute_max_n: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Certificate output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the LP optimum.
    #[arg(long)]
    lp_dump: Option<PathBuf>,
    /// Write the narrow-cut chain and layers.
    #[arg(long)]
    dump_cuts: Option<PathBuf>,
    /// Write the parity-correction vectors of every tree.
    #[arg(long)]
    dump_parity: Option<PathBuf>,
    /// Write bad edges, reconnection plans and surcharges of every tree.
    #[arg(long)]
    dump_reconnect: Option<PathBuf>,
    /// Write stage timings.
    #[arg(long)]
    timings: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_DENOMINATOR_CAP)]
    denominator_cap: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lp_dump: Option<PathBuf>,
    #[arg(long)]
    dump_cuts: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// euclidean or graph-metric.
    #[arg(long, default_value = "euclidean")]
    kind: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 5)]
    n_min: usize,
    #[arg(long, default_value_t = 12)]
    n_max: usize,
    #[arg(long, default_value_t = 200)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_start: u64,
    /// euclidean, graph-metric, or mixed (alternating by seed).
    #[arg(long, default_value = "mixed")]
    kind: String,
    #[command(flatten)]
    solver: SolverArgs,
    /// Per-instance results as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    timings: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Certificate produced by solve or certify.
    #[arg(long)]
    cert: PathBuf,
}

/// Failure of a certificate or assertion: exit code 1.
#[derive(Debug)]
struct Rejected(String);

impl std::fmt::Display for Rejected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Rejected {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Rejected>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<stpath_core::Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a, false),
        Command::Certify(a) => solve(a, true),
        Command::Decompose(a) => decompose(a),
        Command::Gen(a) => gen(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn read_instance(a: &InputArgs) -> anyhow::Result<Instance> {
    let format = match &a.format {
        Some(f) => f.parse::<Format>()?,
        None => match a.input.extension().and_then(|e| e.to_str()) {
            Some("tsp") | Some("tsplib") => Format::Tsplib,
            _ => Format::Json,
        },
    };
    let file = fs::File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let opts = LoadOptions {
        closure: a.closure,
        s: a.s,
        t: a.t,
    };
    let mut inst = load_instance(std::io::BufReader::new(file), format, opts)?;
    if inst.name.is_none() {
        inst.name = a.input.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    Ok(inst)
}

fn options(a: &SolverArgs) -> anyhow::Result<BomdOptions> {
    let gamma: Rational = if a.gamma.is_empty() {
        default_gamma()
    } else {
        a.gamma
            .parse()
            .map_err(|e| stpath_core::Error::Parse(format!("--gamma: {e}")))?
    };
    check_gamma(&gamma)?;
    if a.matching_cap == 0 || a.subset_cap == 0 || a.denominator_cap == 0 {
        return Err(stpath_core::Error::InvalidInstance("caps must be positive".into()).into());
    }
    if let Some(k) = a.threads {
        if k == 0 {
            return Err(stpath_core::Error::InvalidInstance("--threads must be positive".into()).into());
        }
        // a second call fails once the pool exists; the first setting stays
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(BomdOptions {
        gamma,
        rule: match a.drop_rule {
            Rule::MaxCost => DropRule::MaxCost,
            Rule::Leftmost => DropRule::Leftmost,
        },
        denominator_cap: a.denominator_cap,
        matching_cap: a.matching_cap,
        subset_cap: a.subset_cap,
    })
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

#[derive(Default, Serialize)]
struct Timings {
    lp_ms: f64,
    cuts_ms: f64,
    decompose_ms: f64,
    trees_ms: f64,
    certify_ms: f64,
    opt_ms: f64,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

struct Solved {
    run: BomdRun,
    cert: TourCertificate,
    timings: Timings,
}

fn run_pipeline(inst: &Instance, opts: &BomdOptions, brute_max_n: usize) -> anyhow::Result<Solved> {
    let mut tm = Timings::default();
    let clock = Instant::now();
    let xstar = solve_subtour_lp(inst)?;
    tm.lp_ms = ms(clock);
    let clock = Instant::now();
    let chain = find_narrow_cuts(inst, &xstar)?;
    let layers = build_layers(inst, &xstar, &chain);
    tm.cuts_ms = ms(clock);
    let clock = Instant::now();
    let (combo, stats) = decompose_layered(inst, &xstar, &layers, opts.denominator_cap)?;
    tm.decompose_ms = ms(clock);
    let clock = Instant::now();
    let trees = run_trees(inst, &xstar, &chain, &combo, &stats, opts)?;
    let run = BomdRun::assemble(xstar, chain, layers, combo, stats, opts, trees);
    tm.trees_ms = ms(clock);
    let clock = Instant::now();
    let opt = if inst.n() <= brute_max_n.min(BRUTE_FORCE_CAP) {
        Some(brute_force_opt(inst)?)
    } else {
        None
    };
    tm.opt_ms = ms(clock);
    let clock = Instant::now();
    let cert = build_certificate(inst, &run, opt)?;
    tm.certify_ms = ms(clock);
    Ok(Solved { run, cert, timings: tm })
}

fn solve(a: SolveArgs, print_certificate: bool) -> anyhow::Result<()> {
    let opts = options(&a.solver)?;
    let inst = read_instance(&a.input)?;
    let Solved { run, cert, timings } = run_pipeline(&inst, &opts, a.solver.brute_max_n)?;

    if let Some(p) = &a.lp_dump {
        write_json(p, &run.xstar.to_json(&inst))?;
    }
    if let Some(p) = &a.dump_cuts {
        let zeta: Vec<String> = run.layers.zeta.iter().map(Rational::to_pq).collect();
        write_json(p, &json!({ "chain": run.chain.to_json(), "zeta": zeta }))?;
    }
    if let Some(p) = &a.dump_parity {
        let rows: Vec<Value> = run
            .trees
            .iter()
            .map(|tr| json!({ "tree": tr.index, "y_cost": tr.y_cost.to_pq(), "y": tr.yf.to_json(&inst) }))
            .collect();
        write_json(p, &rows)?;
    }
    if let Some(p) = &a.dump_reconnect {
        let rows: Vec<Value> = run
            .trees
            .iter()
            .map(|tr| json!({ "tree": tr.index, "reconnect": reconnect_json(&inst, &tr.bad, &tr.plan, &tr.surcharge) }))
            .collect();
        write_json(p, &rows)?;
    }
    if let Some(p) = &a.timings {
        write_json(p, &timings)?;
    }
    let text = cert.to_json_string();
    if let Some(p) = &a.out {
        write_text(p, &text)?;
    }

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if print_certificate {
        writeln!(out, "{}", text.trim_end())?;
    } else {
        let summary = json!({
            "name": inst.name,
            "tour": run.best.to_json(&inst),
            "source": cert.tour_source,
            "lp_value": cert.lp_value.to_pq(),
            "opt": cert.opt.as_ref().map(Rational::to_pq),
            "final_bound": cert.final_bound.to_pq(),
            "certificate_valid": cert.passes(),
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    }
    if !cert.passes() {
        for f in cert.failures() {
            eprintln!("check failed: {f}");
        }
        bail!(Rejected("certificate has failing checks".into()));
    }
    Ok(())
}

fn decompose(a: DecomposeArgs) -> anyhow::Result<()> {
    let inst = read_instance(&a.input)?;
    let xstar = solve_subtour_lp(&inst)?;
    let chain = find_narrow_cuts(&inst, &xstar)?;
    let layers = build_layers(&inst, &xstar, &chain);
    let (combo, stats) = decompose_layered(&inst, &xstar, &layers, a.denominator_cap)?;
    if let Some(p) = &a.lp_dump {
        write_json(p, &xstar.to_json(&inst))?;
    }
    if let Some(p) = &a.dump_cuts {
        let zeta: Vec<String> = layers.zeta.iter().map(Rational::to_pq).collect();
        write_json(p, &json!({ "chain": chain.to_json(), "zeta": zeta }))?;
    }
    let text = serde_json::to_string_pretty(&combo.to_json(&inst, &stats))?;
    match &a.out {
        Some(p) => write_text(p, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    let kind: GenKind = a.kind.parse()?;
    if a.n < 2 {
        return Err(stpath_core::Error::InvalidInstance("--n must be at least 2".into()).into());
    }
    let inst = gen_random_metric(a.n, a.seed, kind);
    let text = inst.write_json();
    match &a.out {
        Some(p) => write_text(p, &text),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct BenchRow {
    name: String,
    n: usize,
    lp_value: String,
    tour_cost: String,
    opt: Option<String>,
    ratio_lp: String,
    certificate_valid: bool,
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let opts = options(&a.solver)?;
    if a.n_min < 3 || a.n_max < a.n_min {
        return Err(stpath_core::Error::InvalidInstance("need 3 <= n-min <= n-max".into()).into());
    }
    let fixed_kind = match a.kind.as_str() {
        "mixed" => None,
        k => Some(k.parse::<GenKind>()?),
    };
    let span = (a.n_max - a.n_min + 1) as u64;
    let mut rows = Vec::new();
    let mut total = Timings::default();
    let mut max_lp: Option<(Rational, String)> = None;
    let mut max_opt: Option<(Rational, String)> = None;
    let mut failures = Vec::new();
    for seed in a.seed_start..a.seed_start + a.seeds {
        let kind = fixed_kind.unwrap_or(if seed % 2 == 0 { GenKind::Euclidean } else { GenKind::GraphMetric });
        let n = a.n_min + (seed % span) as usize;
        let inst = gen_random_metric(n, seed, kind);
        let name = inst.name.clone().unwrap_or_default();
        let Solved { cert, timings, .. } =
            run_pipeline(&inst, &opts, a.solver.brute_max_n).with_context(|| format!("instance {name}"))?;
        total.lp_ms += timings.lp_ms;
        total.cuts_ms += timings.cuts_ms;
        total.decompose_ms += timings.decompose_ms;
        total.trees_ms += timings.trees_ms;
        total.certify_ms += timings.certify_ms;
        total.opt_ms += timings.opt_ms;
        let ratio = &cert.tour_cost / &cert.lp_value;
        if max_lp.as_ref().map_or(true, |(r, _)| ratio > *r) {
            max_lp = Some((ratio.clone(), name.clone()));
        }
        if let Some(opt) = &cert.opt {
            let r = &cert.tour_cost / opt;
            if max_opt.as_ref().map_or(true, |(m, _)| r > *m) {
                max_opt = Some((r, name.clone()));
            }
        }
        if !cert.passes() {
            failures.push(name.clone());
        }
        rows.push(BenchRow {
            name,
            n,
            lp_value: cert.lp_value.to_pq(),
            tour_cost: cert.tour_cost.to_pq(),
            opt: cert.opt.as_ref().map(Rational::to_pq),
            ratio_lp: ratio.to_pq(),
            certificate_valid: cert.passes(),
        });
    }

    let fmt_ratio = |r: &Option<(Rational, String)>| match r {
        Some((r, name)) => format!("{} ({:.6}) at {}", r.to_pq(), r.to_f64(), name),
        None => "n/a".to_string(),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "instances            {}", rows.len())?;
    writeln!(out, "n range              [{}, {}]", a.n_min, a.n_max)?;
    writeln!(out, "gamma                {}", opts.gamma.to_pq())?;
    writeln!(out, "guarantee            {}", stpath_core::certify::final_ratio(&opts.gamma).to_pq())?;
    writeln!(out, "max tour/OPT_LP      {}", fmt_ratio(&max_lp))?;
    writeln!(out, "max tour/OPT         {}", fmt_ratio(&max_opt))?;
    writeln!(out, "certificate failures {}", failures.len())?;
    for name in &failures {
        writeln!(out, "  failed: {name}")?;
    }
    // timings vary run to run; they go to stderr and the timings file only
    eprintln!("stage        total ms");
    for (stage, v) in [
        ("lp", total.lp_ms),
        ("cuts", total.cuts_ms),
        ("decompose", total.decompose_ms),
        ("trees", total.trees_ms),
        ("opt", total.opt_ms),
        ("certify", total.certify_ms),
    ] {
        eprintln!("{stage:<12} {v:>10.1}");
    }
    if let Some(p) = &a.out {
        write_json(p, &rows)?;
    }
    if let Some(p) = &a.timings {
        write_json(p, &total)?;
    }
    if !failures.is_empty() {
        bail!(Rejected(format!("{} certificates failed", failures.len())));
    }
    Ok(())
}

fn verify_cmd(a: VerifyArgs) -> anyhow::Result<()> {
    let inst = read_instance(&a.input)?;
    let text = fs::read_to_string(&a.cert).with_context(|| format!("reading {}", a.cert.display()))?;
    let cert = TourCertificate::from_json_str(&text)?;
    let problems = verify(&inst, &cert);
    if problems.is_empty() {
        println!("certificate valid: tour cost {} <= {}", cert.tour_cost.to_pq(), cert.final_bound.to_pq());
        Ok(())
    } else {
        for p in &problems {
            eprintln!("{p}");
        }
        Err(anyhow!(Rejected(format!("{} problems found", problems.len()))))
    }
}
