use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use pca_core::bench::{emit_results, emit_summary, parse_manifest, parse_termination, run_bench, summarize};
use pca_core::iterpca::iter_pca_traced;
use pca_core::orienteering::GuessBound;
use pca_core::tsplib::{parse_p2p, parse_pcw};
use pca_core::{
    b_search_kmlp, generate_rewards, iter_pca, parse_tsplib, pcc, solve, OrienteeringInstance, PcaError, RewardScheme,
    RouteKind, SearchConfig, SolverConfig,
};

#[derive(Parser)]
#[command(name = "pca", version, about = "Prize-collecting arborescences and orienteering")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run IterPCA on a raw instance (`nodes`/`root`/`penalty`/`arc` lines)
    Pcw { path: PathBuf },
    /// Orienteering path from the root
    SolveRooted(SolveArgs),
    /// Orienteering path from the root to --end-node (or a point-to-point set file)
    SolveP2p(SolveArgs),
    /// Orienteering cycle through the root
    SolveCycle(SolveArgs),
    /// Distribution over trees covering k nodes in expectation
    KmlpTrees {
        path: PathBuf,
        #[arg(long)]
        k: usize,
        /// Integer scale of the distances (1 for integral data)
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Run every row of a benchmark manifest
    Bench {
        manifest: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        no_prune: bool,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// practical | theory | exact
    #[arg(long, default_value = "practical")]
    termination: String,
}

impl SearchArgs {
    fn config(&self) -> anyhow::Result<SearchConfig> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            bail!("--epsilon must lie in (0, 0.5)");
        }
        Ok(SearchConfig { epsilon: self.epsilon, termination: parse_termination(&self.termination)? })
    }
}

#[derive(Args)]
struct SolveArgs {
    path: PathBuf,
    #[arg(long)]
    budget: Option<f64>,
    /// Budget becomes ceil(tsp_opt / 2)
    #[arg(long)]
    tsp_opt: Option<f64>,
    /// Reward generator for TSPLIB input
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    gen: Option<u32>,
    /// 0-based end node (TSPLIB input to solve-p2p)
    #[arg(long)]
    end_node: Option<usize>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    no_prune: bool,
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(a: &SolveArgs, kind: RouteKind) -> anyhow::Result<OrienteeringInstance> {
    let text = read(&a.path)?;
    let budget = match (a.budget, a.tsp_opt) {
        (Some(_), Some(_)) => bail!("give --budget or --tsp-opt, not both"),
        (Some(b), None) => Some(b),
        (None, Some(t)) => Some((t / 2.0).ceil()),
        (None, None) => None,
    };
    if kind == RouteKind::RtPath && !text.contains("EDGE_WEIGHT_TYPE") {
        if a.gen.is_some() || a.end_node.is_some() {
            bail!("--gen and --end-node apply to TSPLIB input only");
        }
        return Ok(parse_p2p(&text)?.to_instance(budget)?);
    }
    let tsp = parse_tsplib(&text)?;
    let gen = a.gen.ok_or_else(|| anyhow!("--gen is required for TSPLIB input"))?;
    let budget = budget.ok_or_else(|| anyhow!("--budget or --tsp-opt is required"))?;
    let end = match kind {
        RouteKind::RtPath => Some(a.end_node.ok_or_else(|| anyhow!("--end-node is required"))?),
        _ if a.end_node.is_some() => bail!("--end-node applies to solve-p2p only"),
        _ => None,
    };
    let rewards = generate_rewards(&tsp.matrix, RewardScheme::from_index(gen)?);
    Ok(OrienteeringInstance::new(tsp.matrix, rewards, 0, end, budget)?)
}

fn fmt(x: f64) -> String {
    let x = x + 0.0; // no "-0"
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.6}")
    }
}

fn audit_line(g: &GuessBound) -> String {
    let terms: Vec<String> = g.terms.iter().map(|(k, v)| format!("{k}={}", fmt(*v))).collect();
    format!(
        "guess w={} candidate={} bound={} probes={}{} [{}]",
        g.w,
        fmt(g.candidate_reward),
        fmt(g.value),
        g.probes,
        if g.pruned { " pruned" } else { "" },
        terms.join(" ")
    )
}

fn run_solve(a: &SolveArgs, kind: RouteKind, verbose: bool, out: &mut impl std::io::Write) -> anyhow::Result<()> {
    let inst = load_instance(a, kind)?;
    if !inst.is_metric() {
        eprintln!("note: distances violate the triangle inequality; used as given");
    }
    let cfg = SolverConfig { search: a.search.config()?, prune: !a.no_prune };
    let res = solve(&inst, kind, &cfg)?;
    let nodes: Vec<String> = res.solution.nodes.iter().map(usize::to_string).collect();
    writeln!(out, "Val={}", fmt(res.solution.reward))?;
    writeln!(out, "cost={} budget={}", fmt(res.solution.cost), fmt(inst.budget))?;
    writeln!(out, "nodes={}", nodes.join(" "))?;
    writeln!(out, "UB={}", fmt(res.bound.aggregate))?;
    if verbose {
        for g in &res.bound.guesses {
            writeln!(out, "{}", audit_line(g))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.cmd {
        Cmd::Pcw { path } => {
            let inst = parse_pcw(&read(path)?)?;
            let res = if cli.verbose {
                let (res, trace) = iter_pca_traced(&inst)?;
                for l in trace {
                    eprintln!("{l}");
                }
                res
            } else {
                iter_pca(&inst)?
            };
            writeln!(out, "PCC={}", fmt(pcc(&res.tree, &inst)?))?;
            writeln!(out, "Y={}", fmt(res.certificate.total()))?;
            for (tail, head, id) in res.tree.arcs() {
                writeln!(out, "arc {tail} {head} {} (#{id})", fmt(inst.graph.arc(id).cost))?;
            }
            writeln!(out, "certificate_sets={}", res.certificate.len())?;
        }
        Cmd::SolveRooted(a) => run_solve(a, RouteKind::RootedPath, cli.verbose, &mut out)?,
        Cmd::SolveP2p(a) => run_solve(a, RouteKind::RtPath, cli.verbose, &mut out)?,
        Cmd::SolveCycle(a) => run_solve(a, RouteKind::Cycle, cli.verbose, &mut out)?,
        Cmd::KmlpTrees { path, k, scale } => {
            let tsp = parse_tsplib(&read(path)?)?;
            let nodes: Vec<usize> = (0..tsp.dimension).collect();
            let d = b_search_kmlp(&nodes, &tsp.matrix, 0, *k, *scale)?;
            writeln!(out, "coverage={:.6} cost={:.6}", d.expected_coverage(), d.expected_cost(&tsp.matrix))?;
            for (g, t) in &d.atoms {
                let covered: Vec<String> = t.covered().iter().map(usize::to_string).collect();
                writeln!(out, "tree weight={g:.6} cost={} nodes={}", fmt(t.metric_cost(&tsp.matrix)), covered.join(" "))?;
            }
        }
        Cmd::Bench { manifest, search, no_prune, out: dest } => {
            let base = manifest.parent().unwrap_or(Path::new("."));
            let cfgs = parse_manifest(&read(manifest)?, base, search.config()?)?;
            let results = run_bench(&cfgs, !no_prune);
            let mut rows = Vec::new();
            let mut failed = 0;
            for (cfg, r) in cfgs.iter().zip(results) {
                match r {
                    Ok(row) => {
                        if cli.verbose {
                            eprintln!("done {}", row.dataset);
                        }
                        rows.push(row);
                    }
                    Err(e) => {
                        failed += 1;
                        eprintln!("error: {}: {e}", cfg.name());
                    }
                }
            }
            let csv = emit_results(&rows);
            match dest {
                Some(p) => {
                    std::fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?;
                    write!(out, "{}", emit_summary(&summarize(&rows)))?;
                }
                None => write!(out, "{csv}")?,
            }
            if failed > 0 {
                bail!("{failed} of {} rows failed", cfgs.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<PcaError>() {
                Some(PcaError::Infeasible(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
