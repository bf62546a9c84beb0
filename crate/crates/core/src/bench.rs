//! Benchmark manifests, sweeps, and the results table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{PcaError, Result};
use crate::lagrange::{SearchConfig, Termination};
use crate::orienteering::{solve, OrienteeringInstance, RouteKind, SolverConfig};
use crate::tsplib::{generate_rewards, parse_p2p, parse_tsplib, RewardScheme};

pub const HEADER: &str = "Dataset,B,Val,Opt,UB,OptOverVal,UBOverOpt,UBOverVal";
pub const FOOTER_HEADER: &str = "Statistic,Count,Mean,Max";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dataset: PathBuf,
    /// Unused for point-to-point rows, whose budget comes from the file.
    pub tsp_opt: Option<f64>,
    pub budget: Option<f64>,
    /// `None` for point-to-point rows, which carry their own scores.
    pub gen: Option<RewardScheme>,
    pub variant: RouteKind,
    pub known_opt: Option<f64>,
    pub search: SearchConfig,
}

impl BenchConfig {
    pub fn name(&self) -> String {
        let stem = self.dataset.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        match self.gen {
            Some(g) => format!("{stem}/gen{}/{}", g.index(), variant_name(self.variant)),
            None => format!("{stem}/{}", variant_name(self.variant)),
        }
    }

    pub fn load(&self) -> Result<OrienteeringInstance> {
        let text = std::fs::read_to_string(&self.dataset)
            .map_err(|e| PcaError::Input(format!("{}: {e}", self.dataset.display())))?;
        if self.variant == RouteKind::RtPath {
            return parse_p2p(&text)?.to_instance(self.budget);
        }
        let tsp = parse_tsplib(&text)?;
        let gen = self.gen.ok_or_else(|| PcaError::Input(format!("{}: missing reward generator", self.name())))?;
        let budget = match (self.budget, self.tsp_opt) {
            (Some(b), _) => b,
            (None, Some(t)) => (t / 2.0).ceil(),
            (None, None) => return Err(PcaError::Input(format!("{}: need tsp_opt or a budget", self.name()))),
        };
        let rewards = generate_rewards(&tsp.matrix, gen);
        OrienteeringInstance::new(tsp.matrix, rewards, 0, None, budget)
    }
}

pub fn variant_name(kind: RouteKind) -> &'static str {
    match kind {
        RouteKind::RootedPath => "rooted",
        RouteKind::RtPath => "p2p",
        RouteKind::Cycle => "cycle",
    }
}

pub fn parse_variant(s: &str) -> Result<RouteKind> {
    match s {
        "rooted" => Ok(RouteKind::RootedPath),
        "p2p" => Ok(RouteKind::RtPath),
        "cycle" => Ok(RouteKind::Cycle),
        _ => Err(PcaError::Input(format!("unknown variant {s:?}"))),
    }
}

pub fn parse_termination(s: &str) -> Result<Termination> {
    match s {
        "practical" => Ok(Termination::Practical),
        "theory" => Ok(Termination::Theory),
        "exact" => Ok(Termination::Exact { m: 1.0 }),
        _ => Err(PcaError::Input(format!("unknown termination mode {s:?}"))),
    }
}

fn opt_num(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite() && *x >= 0.0)
        .map(Some)
        .ok_or_else(|| PcaError::parse(line, format!("bad number {s:?}")))
}

/// Manifest columns: `dataset_path,tsp_opt,gen,variant,known_opt` and an
/// optional `budget`. Paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path, search: SearchConfig) -> Result<Vec<BenchConfig>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| PcaError::parse(1, e.to_string()))?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| PcaError::parse(1, format!("manifest lacks column {name}")));
    let (c_path, c_opt, c_gen, c_var) = (need("dataset_path")?, need("tsp_opt")?, need("gen")?, need("variant")?);
    let (c_known, c_budget) = (col("known_opt"), col("budget"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| PcaError::parse(0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let get = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("");
        let gen = match get(Some(c_gen)) {
            "" => None,
            g => Some(RewardScheme::from_index(g.trim_start_matches("gen").parse().map_err(|_| PcaError::parse(line, format!("bad gen {g:?}")))?)?),
        };
        let variant = parse_variant(get(Some(c_var))).map_err(|e| PcaError::parse(line, e.to_string()))?;
        if variant != RouteKind::RtPath && gen.is_none() {
            return Err(PcaError::parse(line, "gen is required for rooted and cycle rows"));
        }
        let cfg = BenchConfig {
            dataset: base.join(get(Some(c_path))),
            tsp_opt: opt_num(get(Some(c_opt)), line)?,
            budget: opt_num(get(c_budget), line)?,
            gen,
            variant,
            known_opt: opt_num(get(c_known), line)?,
            search,
        };
        if variant != RouteKind::RtPath && cfg.tsp_opt.is_none() && cfg.budget.is_none() {
            return Err(PcaError::parse(line, "need tsp_opt or budget"));
        }
        out.push(cfg);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub budget: f64,
    pub val: f64,
    pub opt: Option<f64>,
    pub ub: f64,
    pub non_metric: bool,
}

impl BenchRow {
    pub fn opt_over_val(&self) -> Option<f64> {
        self.opt.filter(|_| self.val > 0.0).map(|o| o / self.val)
    }

    pub fn ub_over_opt(&self) -> Option<f64> {
        self.opt.filter(|&o| o > 0.0).map(|o| self.ub / o)
    }

    pub fn ub_over_val(&self) -> Option<f64> {
        (self.val > 0.0).then(|| self.ub / self.val)
    }
}

pub fn run_one(cfg: &BenchConfig, prune: bool) -> Result<BenchRow> {
    let inst = cfg.load()?;
    let out = solve(&inst, cfg.variant, &SolverConfig { search: cfg.search, prune })?;
    let mut dataset = cfg.name();
    if !inst.is_metric() {
        // Non-metric datasets carry a star, as in the usual tables.
        dataset = dataset.replacen('/', "*/", 1);
    }
    Ok(BenchRow {
        dataset,
        budget: inst.budget,
        val: out.solution.reward,
        opt: cfg.known_opt,
        ub: out.bound.aggregate,
        non_metric: !inst.is_metric(),
    })
}

/// Rows run in parallel on the current rayon pool; output order follows `configs`.
pub fn run_bench(configs: &[BenchConfig], prune: bool) -> Vec<Result<BenchRow>> {
    configs.par_iter().map(|c| run_one(c, prune)).collect()
}

fn fmt_num(x: f64) -> String {
    let x = x + 0.0;
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.3}")
    }
}

fn fmt3(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.3}"))
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub statistic: String,
    pub count: usize,
    pub mean: Option<f64>,
    pub max: Option<f64>,
}

/// Aggregates over the ratios as printed (3 decimals), so they can be
/// recomputed from the table alone.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryLine> {
    let stats: [(&str, fn(&BenchRow) -> Option<f64>); 3] = [
        ("OptOverVal", BenchRow::opt_over_val),
        ("UBOverOpt", BenchRow::ub_over_opt),
        ("UBOverVal", BenchRow::ub_over_val),
    ];
    stats
        .iter()
        .map(|(name, f)| {
            let xs: Vec<f64> = rows.iter().filter_map(f).map(round3).collect();
            let mean = (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
            let max = xs.iter().copied().reduce(f64::max);
            SummaryLine { statistic: name.to_string(), count: xs.len(), mean, max }
        })
        .collect()
}

pub fn emit_results(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3},{},{},{}",
            r.dataset,
            fmt_num(r.budget),
            fmt_num(r.val),
            r.opt.map_or_else(String::new, fmt_num),
            r.ub,
            fmt3(r.opt_over_val()),
            fmt3(r.ub_over_opt()),
            fmt3(r.ub_over_val()),
        );
    }
    out.push('\n');
    out.push_str(&emit_summary(&summarize(rows)));
    out
}

pub fn emit_summary(lines: &[SummaryLine]) -> String {
    let mut out = format!("{FOOTER_HEADER}\n");
    for s in lines {
        let _ = writeln!(out, "{},{},{},{}", s.statistic, s.count, fmt3(s.mean), fmt3(s.max));
    }
    out
}

/// Inverse of [`emit_results`]; returns the rows and the footer.
pub fn parse_results(text: &str) -> Result<(Vec<BenchRow>, Vec<SummaryLine>)> {
    let (table, footer) = text.split_once("\n\n").unwrap_or((text, ""));
    let mut lines = table.lines();
    if lines.next() != Some(HEADER) {
        return Err(PcaError::parse(1, "unexpected results header"));
    }
    let cell = |s: &str, line: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| PcaError::parse(line, format!("bad number {s:?}")))
        }
    };
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 8 {
            return Err(PcaError::parse(line, "expected 8 fields"));
        }
        let req = |s: &str| cell(s, line)?.ok_or_else(|| PcaError::parse(line, "missing value"));
        rows.push(BenchRow {
            dataset: f[0].to_string(),
            budget: req(f[1])?,
            val: req(f[2])?,
            opt: cell(f[3], line)?,
            ub: req(f[4])?,
            non_metric: f[0].contains('*'),
        });
    }
    let mut summary = Vec::new();
    let mut fl = footer.lines().filter(|l| !l.is_empty());
    if let Some(h) = fl.next() {
        if h != FOOTER_HEADER {
            return Err(PcaError::parse(0, "unexpected summary header"));
        }
        for l in fl {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(PcaError::parse(0, format!("bad summary line {l:?}")));
            }
            summary.push(SummaryLine {
                statistic: f[0].to_string(),
                count: f[1].parse().map_err(|_| PcaError::parse(0, format!("bad count {:?}", f[1])))?,
                mean: cell(f[2], 0)?,
                max: cell(f[3], 0)?,
            });
        }
    }
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(val: f64, opt: Option<f64>, ub: f64) -> BenchRow {
        BenchRow { dataset: "x/gen1/cycle".into(), budget: 10.0, val, opt, ub, non_metric: false }
    }

    #[test]
    fn unknown_opt_leaves_cells_empty() {
        let text = emit_results(&[row(5.0, None, 7.0)]);
        assert_eq!(text.lines().nth(1).unwrap(), "x/gen1/cycle,10,5,,7.000,,,1.400");
    }

    #[test]
    fn identity_ratios() {
        let text = emit_results(&[row(5.0, Some(5.0), 5.0)]);
        assert_eq!(text.lines().nth(1).unwrap(), "x/gen1/cycle,10,5,5,5.000,1.000,1.000,1.000");
    }

    #[test]
    fn manifest_rows() {
        let m = "dataset_path,tsp_opt,gen,variant,known_opt\na.tsp,101,2,cycle,\n# skip\nb.txt,,,p2p,30\n";
        let c = parse_manifest(m, Path::new("/d"), SearchConfig::default()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].dataset, PathBuf::from("/d/a.tsp"));
        assert_eq!((c[0].gen, c[0].known_opt), (Some(RewardScheme::Gen2), None));
        assert_eq!((c[1].variant, c[1].known_opt), (RouteKind::RtPath, Some(30.0)));
        assert!(parse_manifest("dataset_path,tsp_opt,gen,variant\na,1,,cycle\n", Path::new("."), SearchConfig::default()).is_err());
    }
}
