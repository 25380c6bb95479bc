//! `chandelier`: generate, score, and match correlated graph pairs.
//!
//! Exit codes: 0 success, 2 invalid config or input, 3 budget exceeded,
//! 4 internal invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chandelier::count::{
    colorful_count_all_roots, colorful_probability, exact_signed_count, Coloring, WeightedHost,
};
use chandelier::error::Error;
use chandelier::matching::{
    evaluate, match_by_threshold_raw, seeded_match, PartialMatching, SeededOptions,
};
use chandelier::model::{sample_pair, GraphPair, PiMode};
use chandelier::pipeline::{
    parse_config_text, run_pipeline, run_sweep, PipelineConfig, SweepConfig, TauRule,
};
use chandelier::rng::rng_stream;
use chandelier::score::{
    parse_matrix_csv, phi_approx, phi_exact, threshold_data_driven, threshold_fixed, ApproxOptions,
};
use chandelier::trees::{build_catalog, build_family, count_rooted_trees, RootedTreeShape};

#[derive(Parser)]
#[command(
    name = "chandelier",
    version,
    about = "Graph matching via chandelier counts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a correlated pair and write it to a pair file.
    Generate(GenerateArgs),
    /// Enumerate rooted trees / bulb catalogs.
    Trees(TreesArgs),
    /// Debug counts of one tree on one pair.
    Count(CountArgs),
    /// Compute a score matrix for a pair file.
    Score(ScoreArgs),
    /// Threshold a score matrix into a matching.
    Match(MatchArgs),
    /// Percolation completion from a seed matching.
    Seeded(SeededArgs),
    /// Full chain on one instance; prints the report.
    Pipeline(PipelineArgs),
    /// Grid sweep emitting CSV rows.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value = "uniform")]
    pi: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Accept q > 1/2 by complementing both graphs after sampling at 1-q.
    #[arg(long)]
    complement: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TreesArgs {
    /// Edge count K.
    #[arg(long)]
    edges: usize,
    /// Keep only shapes with at most this many automorphisms.
    #[arg(long)]
    max_aut: Option<u128>,
    /// Print only the count (uses the recurrence when no cap is given).
    #[arg(long)]
    count_only: bool,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    pair: PathBuf,
    /// Tree as a comma-separated level sequence, e.g. `0,1,2,1`.
    #[arg(long)]
    tree: String,
    #[arg(long)]
    root: usize,
    /// Which side of the pair to count on.
    #[arg(long, default_value = "a")]
    graph: String,
    /// Colorings for the estimate.
    #[arg(long, default_value_t = 200)]
    colorings: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    pair: PathBuf,
    #[arg(long, short = 'K')]
    k: usize,
    #[arg(long, short = 'L')]
    l: usize,
    #[arg(long, short = 'M')]
    m: usize,
    /// Automorphism cap R (unbounded when omitted).
    #[arg(long, short = 'R')]
    max_aut: Option<u128>,
    /// Use the exact oracle-scale scorer.
    #[arg(long)]
    exact: bool,
    /// Colorings per side (default: min(ceil(1/r), 10000)).
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Threshold constant for the sidecar tau (mutually exclusive with
    /// --auto-tau).
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    auto_tau: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MatchArgs {
    /// Score matrix CSV (from `score`).
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    tau: Option<f64>,
    /// Data-driven threshold from the matrix itself.
    #[arg(long)]
    auto_tau: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SeededArgs {
    #[arg(long)]
    pair: PathBuf,
    /// Seed matching file (`i j` lines).
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct PipelineFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    pi: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short = 'K')]
    k: Option<usize>,
    #[arg(long, short = 'L')]
    l: Option<usize>,
    #[arg(long, short = 'M')]
    m: Option<usize>,
    #[arg(long)]
    max_aut: Option<u128>,
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    auto_tau: bool,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Edge probability for the percolation threshold (default: empirical
    /// density).
    #[arg(long)]
    seeded_q: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Include wall-clock timings (report is no longer byte-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    flags: PipelineFlags,
    /// Write the report here in addition to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: PipelineFlags,
    /// Comma-separated grid values.
    #[arg(long)]
    ns: Option<String>,
    #[arg(long)]
    qs: Option<String>,
    #[arg(long)]
    rhos: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded(_) => 3,
        Error::AutOverflow { .. } | Error::InvariantViolation(_) => 4,
        _ => 2,
    }
}

fn run(cli: Cli) -> chandelier::Result<()> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Trees(args) => trees(args),
        Command::Count(args) => count(args),
        Command::Score(args) => score(args),
        Command::Match(args) => do_match(args),
        Command::Seeded(args) => seeded(args),
        Command::Pipeline(args) => pipeline(args),
        Command::Sweep(args) => sweep(args),
    }
}

fn generate(args: GenerateArgs) -> chandelier::Result<()> {
    let pi_mode = PiMode::parse(&args.pi)?;
    let pair = if args.q > 0.5 && args.complement {
        sample_pair(args.n, 1.0 - args.q, args.rho, pi_mode, args.seed)?.complement()
    } else {
        sample_pair(args.n, args.q, args.rho, pi_mode, args.seed)?
    };
    pair.write_file(&args.out)?;
    println!(
        "wrote pair n={} q={} rho={} seed={} to {}",
        pair.n,
        pair.q,
        pair.rho,
        pair.seed,
        args.out.display()
    );
    Ok(())
}

fn trees(args: TreesArgs) -> chandelier::Result<()> {
    if args.count_only && args.max_aut.is_none() {
        println!("{}", count_rooted_trees(args.edges)?);
        return Ok(());
    }
    let catalog = build_catalog(args.edges, args.max_aut)?;
    if catalog.is_empty() {
        eprintln!("warning: empty catalog (R below the minimum automorphism count)");
    }
    if args.count_only {
        println!("{}", catalog.len());
        return Ok(());
    }
    for bulb in catalog.bulbs() {
        println!("levels={} aut={}", bulb.levels_string(), bulb.aut());
    }
    Ok(())
}

fn count(args: CountArgs) -> chandelier::Result<()> {
    let pair = GraphPair::read_file(&args.pair)?;
    let levels: Vec<u8> = args
        .tree
        .split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad level `{x}`")))
        })
        .collect::<chandelier::Result<_>>()?;
    let shape = RootedTreeShape::from_levels(&levels)?;
    let graph = match args.graph.as_str() {
        "a" => &pair.a,
        "b" => &pair.b,
        other => {
            return Err(Error::InvalidInput(format!(
                "--graph must be a or b, got {other}"
            )))
        }
    };
    let host = WeightedHost::centered(graph, pair.q);
    let colors = shape.vertices();
    let r = colorful_probability(colors);
    let mut acc = 0.0;
    for c in 0..args.colorings {
        let mut rng = rng_stream(args.seed, c as u64);
        let coloring = Coloring::random(pair.n, colors, &mut rng);
        acc += colorful_count_all_roots(&host, &shape, &coloring)?[args.root];
    }
    let estimate = acc / (r * args.colorings.max(1) as f64);
    println!("tree levels={} aut={}", shape.levels_string(), shape.aut());
    println!(
        "estimate = {estimate} ({} colorings, r = {r})",
        args.colorings
    );
    match exact_signed_count(&host, args.root, &shape) {
        Ok(exact) => println!("exact = {exact}"),
        Err(Error::CapExceeded(msg)) => println!("exact = unavailable ({msg})"),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn score(args: ScoreArgs) -> chandelier::Result<()> {
    if args.c.is_some() && args.auto_tau {
        return Err(Error::InvalidInput(
            "--c and --auto-tau are mutually exclusive".into(),
        ));
    }
    let pair = GraphPair::read_file(&args.pair)?;
    let family = build_family(args.k, args.l, args.m, args.max_aut)?;
    let mut scores = if args.exact {
        phi_exact(&pair, &family)?
    } else {
        let opts = ApproxOptions {
            t_override: args.t,
            seed: args.seed,
            ..Default::default()
        };
        phi_approx(&pair, &family, &opts)?
    };
    if let Some(c) = args.c {
        scores.tau = Some(threshold_fixed(scores.mu, c)?);
    } else if args.auto_tau {
        scores.tau = Some(threshold_data_driven(&scores));
    }
    std::fs::write(&args.out, scores.to_csv())?;
    let mut meta = scores.metadata_text();
    // Provenance of the scored instance, so the sidecar alone reproduces
    // the run.
    meta.push_str(&format!(
        "pair_q = {}\npair_rho = {}\npair_seed = {}\npair_pi_mode = {}\n",
        pair.q,
        pair.rho,
        pair.seed,
        pair.pi_mode.as_str()
    ));
    let meta_path = args.out.with_extension("meta");
    std::fs::write(&meta_path, meta)?;
    println!(
        "wrote {} and {} (mu = {})",
        args.out.display(),
        meta_path.display(),
        scores.mu
    );
    Ok(())
}

fn do_match(args: MatchArgs) -> chandelier::Result<()> {
    let text = std::fs::read_to_string(&args.scores)?;
    let (n, scores) = parse_matrix_csv(&text)?;
    let tau = match (args.tau, args.auto_tau) {
        (Some(t), false) => t,
        (None, true) => {
            // Recompute the data-driven threshold from the raw matrix.
            let mut best = Vec::with_capacity(n);
            for i in 0..n {
                let row = &scores[i * n..(i + 1) * n];
                let mut arg = 0;
                for j in 1..n {
                    if row[j] > row[arg] {
                        arg = j;
                    }
                }
                best.push(row[arg]);
            }
            best.sort_by(|a, b| a.partial_cmp(b).unwrap());
            best[(n - 1) / 2] / 2.0
        }
        _ => {
            return Err(Error::InvalidInput(
                "exactly one of --tau and --auto-tau is required".into(),
            ))
        }
    };
    let matching = match_by_threshold_raw(n, &scores, tau);
    std::fs::write(&args.out, matching.to_text())?;
    println!("tau = {tau}, matched {} of {n}", matching.len());
    Ok(())
}

fn seeded(args: SeededArgs) -> chandelier::Result<()> {
    let pair = GraphPair::read_file(&args.pair)?;
    let seeds_text = std::fs::read_to_string(&args.seeds)?;
    let seeds = PartialMatching::from_text(pair.n, &seeds_text)?;
    let opts = SeededOptions {
        q: args.q,
        gamma: args.gamma,
    };
    let out = seeded_match(&pair.a, &pair.b, &seeds, opts)?;
    std::fs::write(&args.out, out.to_text())?;
    let metrics = evaluate(&out, &pair.pi);
    println!(
        "matched {} of {} (accuracy {}, exact {})",
        out.len(),
        pair.n,
        metrics.accuracy,
        metrics.exact
    );
    Ok(())
}

fn build_pipeline_config(flags: &PipelineFlags) -> chandelier::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path)?;
        cfg.apply_kv(&parse_config_text(&text)?)?;
    }
    // Flags override config keys.
    if let Some(n) = flags.n {
        cfg.n = n;
    }
    if let Some(q) = flags.q {
        cfg.q = q;
    }
    if let Some(rho) = flags.rho {
        cfg.rho = rho;
    }
    if let Some(pi) = &flags.pi {
        cfg.pi_mode = PiMode::parse(pi)?;
    }
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(k) = flags.k {
        cfg.k = k;
    }
    if let Some(l) = flags.l {
        cfg.l = l;
    }
    if let Some(m) = flags.m {
        cfg.m = m;
    }
    if let Some(r) = flags.max_aut {
        cfg.r_cap = Some(r);
    }
    if flags.exact {
        cfg.exact = true;
    }
    if let Some(t) = flags.t {
        cfg.t_override = Some(t);
    }
    match (flags.c, flags.auto_tau) {
        (Some(_), true) => {
            return Err(Error::InvalidInput(
                "--c and --auto-tau are mutually exclusive".into(),
            ))
        }
        (Some(c), false) => cfg.tau_rule = TauRule::Fixed(c),
        (None, true) => cfg.tau_rule = TauRule::DataDriven,
        (None, false) => {}
    }
    if let Some(e) = flags.epsilon {
        cfg.epsilon = e;
    }
    if let Some(sq) = flags.seeded_q {
        cfg.seeded_q = Some(sq);
    }
    if let Some(g) = flags.gamma {
        cfg.gamma = Some(g);
    }
    if flags.timings {
        cfg.timings = true;
    }
    Ok(cfg)
}

fn pipeline(args: PipelineArgs) -> chandelier::Result<()> {
    let cfg = build_pipeline_config(&args.flags)?;
    let report = run_pipeline(&cfg)?;
    let text = report.render_text();
    print!("{text}");
    if let Some(path) = &args.report {
        std::fs::write(path, &text)?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> chandelier::Result<()> {
    // Base keys: defaults, then config file, then flags (inside
    // build_pipeline_config). Grid keys: defaults from the base, then
    // config file, then flags below.
    let base = build_pipeline_config(&args.flags)?;
    let mut cfg = SweepConfig {
        ns: vec![base.n],
        qs: vec![base.q],
        rhos: vec![base.rho],
        trials: 1,
        seed: base.seed,
        base,
    };
    if let Some(path) = &args.flags.config {
        let text = std::fs::read_to_string(path)?;
        cfg.apply_grid_kv(&parse_config_text(&text)?)?;
    }
    let parse_list_flag = |s: &str, name: &str| -> chandelier::Result<Vec<f64>> {
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad {name} entry `{x}`")))
            })
            .collect()
    };
    if let Some(ns) = &args.ns {
        cfg.ns = ns
            .split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad ns entry `{x}`")))
            })
            .collect::<chandelier::Result<_>>()?;
    }
    if let Some(qs) = &args.qs {
        cfg.qs = parse_list_flag(qs, "qs")?;
    }
    if let Some(rhos) = &args.rhos {
        cfg.rhos = parse_list_flag(rhos, "rhos")?;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    let csv = run_sweep(&cfg)?;
    std::fs::write(&args.out, &csv)?;
    println!(
        "wrote {} rows to {}",
        csv.lines().count().saturating_sub(2),
        args.out.display()
    );
    Ok(())
}
