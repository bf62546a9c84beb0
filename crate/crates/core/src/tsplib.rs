//! TSPLIB reading, reward generation, and the small text formats used by
//! the CLI (point-to-point sets, raw prize-collecting instances, the
//! tsp_opt registry).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{PcaError, Result};
use crate::graph::{Arc, Digraph, DistMatrix, PcwInstance};
use crate::orienteering::OrienteeringInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeWeightType {
    Euc2d,
    Ceil2d,
    Att,
    Geo,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeWeightFormat {
    FullMatrix,
    UpperRow,
    LowerRow,
    UpperDiagRow,
    LowerDiagRow,
}

impl EdgeWeightFormat {
    fn keyword(self) -> &'static str {
        match self {
            EdgeWeightFormat::FullMatrix => "FULL_MATRIX",
            EdgeWeightFormat::UpperRow => "UPPER_ROW",
            EdgeWeightFormat::LowerRow => "LOWER_ROW",
            EdgeWeightFormat::UpperDiagRow => "UPPER_DIAG_ROW",
            EdgeWeightFormat::LowerDiagRow => "LOWER_DIAG_ROW",
        }
    }

    /// (row, column) pairs in file order.
    fn cells(self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..n {
            let cols: Box<dyn Iterator<Item = usize>> = match self {
                EdgeWeightFormat::FullMatrix => Box::new(0..n),
                EdgeWeightFormat::UpperRow => Box::new(i + 1..n),
                EdgeWeightFormat::LowerRow => Box::new(0..i),
                EdgeWeightFormat::UpperDiagRow => Box::new(i..n),
                EdgeWeightFormat::LowerDiagRow => Box::new(0..=i),
            };
            out.extend(cols.map(|j| (i, j)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsplibInstance {
    pub name: String,
    pub dimension: usize,
    pub edge_weight_type: EdgeWeightType,
    pub edge_weight_format: Option<EdgeWeightFormat>,
    pub coords: Option<Vec<(f64, f64)>>,
    pub matrix: DistMatrix,
}

fn nint(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn geo_radians(x: f64) -> f64 {
    let deg = x.trunc();
    let min = x - deg;
    std::f64::consts::PI * (deg + 5.0 * min / 3.0) / 180.0
}

fn distance(kind: EdgeWeightType, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    match kind {
        EdgeWeightType::Euc2d => nint((dx * dx + dy * dy).sqrt()),
        EdgeWeightType::Ceil2d => (dx * dx + dy * dy).sqrt().ceil(),
        EdgeWeightType::Att => {
            let r = ((dx * dx + dy * dy) / 10.0).sqrt();
            let t = nint(r);
            if t < r {
                t + 1.0
            } else {
                t
            }
        }
        EdgeWeightType::Geo => {
            const RRR: f64 = 6378.388;
            let (lat_a, lon_a) = (geo_radians(a.0), geo_radians(a.1));
            let (lat_b, lon_b) = (geo_radians(b.0), geo_radians(b.1));
            let q1 = (lon_a - lon_b).cos();
            let q2 = (lat_a - lat_b).cos();
            let q3 = (lat_a + lat_b).cos();
            (RRR * (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).acos() + 1.0).trunc()
        }
        EdgeWeightType::Explicit => unreachable!("explicit weights have no coordinates"),
    }
}

fn num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| PcaError::parse(line, format!("expected a number, found {tok:?}")))
}

/// Parse a symmetric TSPLIB instance and materialize its distance matrix.
pub fn parse_tsplib(text: &str) -> Result<TsplibInstance> {
    let mut name = String::new();
    let mut dimension: Option<usize> = None;
    let mut kind: Option<EdgeWeightType> = None;
    let mut format: Option<EdgeWeightFormat> = None;
    let mut coords: Option<Vec<(f64, f64)>> = None;
    let mut weights: Vec<(f64, usize)> = Vec::new();
    #[derive(PartialEq)]
    enum Section {
        Header,
        Coords,
        Weights,
        Skip,
    }
    let mut section = Section::Header;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let starts_alpha = s.starts_with(|c: char| c.is_ascii_alphabetic());
        if starts_alpha {
            let (key, value) = match s.split_once(':') {
                Some((k, v)) => (k.trim(), Some(v.trim())),
                None => (s.split_whitespace().next().unwrap_or(""), None),
            };
            match (key, value) {
                ("EOF", _) => break,
                ("NAME", Some(v)) => name = v.to_string(),
                ("COMMENT", _) | ("NODE_COORD_TYPE", _) | ("DISPLAY_DATA_TYPE", _) => {}
                ("TYPE", Some(v)) => {
                    if v != "TSP" {
                        return Err(PcaError::parse(line, format!("unsupported TYPE {v}")));
                    }
                }
                ("DIMENSION", Some(v)) => {
                    dimension = Some(v.parse().map_err(|_| PcaError::parse(line, format!("bad DIMENSION {v:?}")))?)
                }
                ("EDGE_WEIGHT_TYPE", Some(v)) => {
                    kind = Some(match v {
                        "EUC_2D" => EdgeWeightType::Euc2d,
                        "CEIL_2D" => EdgeWeightType::Ceil2d,
                        "ATT" => EdgeWeightType::Att,
                        "GEO" => EdgeWeightType::Geo,
                        "EXPLICIT" => EdgeWeightType::Explicit,
                        other => return Err(PcaError::parse(line, format!("unsupported EDGE_WEIGHT_TYPE {other}"))),
                    })
                }
                ("EDGE_WEIGHT_FORMAT", Some(v)) => {
                    format = Some(match v {
                        "FULL_MATRIX" => EdgeWeightFormat::FullMatrix,
                        "UPPER_ROW" => EdgeWeightFormat::UpperRow,
                        "LOWER_ROW" => EdgeWeightFormat::LowerRow,
                        "UPPER_DIAG_ROW" => EdgeWeightFormat::UpperDiagRow,
                        "LOWER_DIAG_ROW" => EdgeWeightFormat::LowerDiagRow,
                        other => return Err(PcaError::parse(line, format!("unsupported EDGE_WEIGHT_FORMAT {other}"))),
                    })
                }
                ("NODE_COORD_SECTION", _) => {
                    section = Section::Coords;
                    coords = Some(Vec::new());
                }
                ("EDGE_WEIGHT_SECTION", _) => section = Section::Weights,
                ("DISPLAY_DATA_SECTION", _) => section = Section::Skip,
                (k, _) => return Err(PcaError::parse(line, format!("unsupported keyword {k}"))),
            }
            continue;
        }
        match section {
            Section::Header => return Err(PcaError::parse(line, "data outside of a section")),
            Section::Skip => {}
            Section::Coords => {
                let toks: Vec<&str> = s.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(PcaError::parse(line, "coordinate lines need: index x y"));
                }
                num(toks[0], line)?;
                coords.as_mut().unwrap().push((num(toks[1], line)?, num(toks[2], line)?));
            }
            Section::Weights => {
                for tok in s.split_whitespace() {
                    weights.push((num(tok, line)?, line));
                }
            }
        }
    }
    let n = dimension.ok_or_else(|| PcaError::parse(0, "missing DIMENSION"))?;
    let kind = kind.ok_or_else(|| PcaError::parse(0, "missing EDGE_WEIGHT_TYPE"))?;
    let matrix = if kind == EdgeWeightType::Explicit {
        let f = format.ok_or_else(|| PcaError::parse(0, "EXPLICIT weights need EDGE_WEIGHT_FORMAT"))?;
        let cells = f.cells(n);
        if weights.len() != cells.len() {
            return Err(PcaError::parse(0, format!("{} expects {} weights, found {}", f.keyword(), cells.len(), weights.len())));
        }
        let mut d = vec![f64::NAN; n * n];
        for (&(i, j), &(x, line)) in cells.iter().zip(&weights) {
            if i == j && x != 0.0 {
                return Err(PcaError::parse(line, format!("nonzero diagonal entry at node {}", i + 1)));
            }
            for (a, b) in [(i, j), (j, i)] {
                if !d[a * n + b].is_nan() && d[a * n + b] != x {
                    return Err(PcaError::parse(line, format!("asymmetric weights between {} and {}", i + 1, j + 1)));
                }
                d[a * n + b] = x;
            }
        }
        for i in 0..n {
            d[i * n + i] = 0.0;
        }
        DistMatrix::new(n, d)?
    } else {
        let pts = coords.as_ref().ok_or_else(|| PcaError::parse(0, "missing NODE_COORD_SECTION"))?;
        if pts.len() != n {
            return Err(PcaError::parse(0, format!("DIMENSION {n} but {} coordinates", pts.len())));
        }
        DistMatrix::from_fn(n, |u, v| distance(kind, pts[u], pts[v]))?
    };
    Ok(TsplibInstance { name, dimension: n, edge_weight_type: kind, edge_weight_format: format, coords, matrix })
}

/// Write `matrix` as an EXPLICIT TSPLIB instance in the given format.
pub fn encode_explicit(name: &str, matrix: &DistMatrix, format: EdgeWeightFormat) -> String {
    let n = matrix.len();
    let mut out = String::new();
    let _ = writeln!(out, "NAME : {name}\nTYPE : TSP\nDIMENSION : {n}\nEDGE_WEIGHT_TYPE : EXPLICIT");
    let _ = writeln!(out, "EDGE_WEIGHT_FORMAT : {}\nEDGE_WEIGHT_SECTION", format.keyword());
    let mut row = usize::MAX;
    for (i, j) in format.cells(n) {
        if i != row {
            if row != usize::MAX {
                out.push('\n');
            }
            row = i;
        } else {
            out.push(' ');
        }
        let _ = write!(out, "{}", matrix.get(i, j));
    }
    out.push_str("\nEOF\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RewardScheme {
    Gen1,
    Gen2,
    Gen3,
}

impl RewardScheme {
    pub fn from_index(g: u32) -> Result<Self> {
        match g {
            1 => Ok(RewardScheme::Gen1),
            2 => Ok(RewardScheme::Gen2),
            3 => Ok(RewardScheme::Gen3),
            _ => Err(PcaError::Input(format!("reward generator {g} not in 1..=3"))),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            RewardScheme::Gen1 => 1,
            RewardScheme::Gen2 => 2,
            RewardScheme::Gen3 => 3,
        }
    }
}

/// Node rewards with the first node as root (reward 0). Gen 2 numbers nodes
/// from 1 in file order.
pub fn generate_rewards(metric: &DistMatrix, scheme: RewardScheme) -> Vec<f64> {
    let n = metric.len();
    let mut r: Vec<f64> = match scheme {
        RewardScheme::Gen1 => vec![1.0; n],
        RewardScheme::Gen2 => (1..=n).map(|j| 1.0 + ((7141 * j + 73) % 100) as f64).collect(),
        RewardScheme::Gen3 => {
            let far = metric.row(0).iter().copied().fold(0.0, f64::max);
            (0..n)
                .map(|v| if far > 0.0 { 1.0 + (99.0 * metric.get(0, v) / far).floor() } else { 1.0 })
                .collect()
        }
    };
    if n > 0 {
        r[0] = 0.0;
    }
    r
}

/// Point-to-point set: first line `Tmax P`, then `x y score` per node; the
/// first node is the start and the second the end.
#[derive(Debug, Clone, PartialEq)]
pub struct P2pSet {
    pub tmax: f64,
    pub points: Vec<(f64, f64)>,
    pub scores: Vec<f64>,
}

impl P2pSet {
    pub fn to_instance(&self, budget: Option<f64>) -> Result<OrienteeringInstance> {
        let m = DistMatrix::euclidean(&self.points)?;
        OrienteeringInstance::new(m, self.scores.clone(), 0, Some(1), budget.unwrap_or(self.tmax))
    }
}

pub fn parse_p2p(text: &str) -> Result<P2pSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (i, head) = lines.next().ok_or_else(|| PcaError::parse(1, "empty file"))?;
    let h: Vec<&str> = head.split_whitespace().collect();
    if h.len() != 2 {
        return Err(PcaError::parse(i + 1, "header must be: Tmax P"));
    }
    let tmax = num(h[0], i + 1)?;
    num(h[1], i + 1)?;
    let (mut points, mut scores) = (Vec::new(), Vec::new());
    for (i, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(PcaError::parse(i + 1, "node lines need: x y score"));
        }
        points.push((num(t[0], i + 1)?, num(t[1], i + 1)?));
        scores.push(num(t[2], i + 1)?);
    }
    if points.len() < 2 {
        return Err(PcaError::parse(0, "need at least a start and an end node"));
    }
    Ok(P2pSet { tmax, points, scores })
}

/// Line format: `nodes N`, `root R`, `penalty V P`, `arc U V C`; `#` starts a comment.
pub fn parse_pcw(text: &str) -> Result<PcwInstance> {
    let mut n: Option<usize> = None;
    let mut root = 0;
    let mut pen: BTreeMap<usize, f64> = BTreeMap::new();
    let mut arcs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap().trim();
        if s.is_empty() {
            continue;
        }
        let t: Vec<&str> = s.split_whitespace().collect();
        let idx = |k: usize| -> Result<usize> {
            t.get(k)
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| PcaError::parse(line, format!("expected a node index in {s:?}")))
        };
        let val = |k: usize| -> Result<f64> { num(t.get(k).copied().unwrap_or(""), line) };
        match (t[0], t.len()) {
            ("nodes", 2) => n = Some(idx(1)?),
            ("root", 2) => root = idx(1)?,
            ("penalty", 3) => {
                pen.insert(idx(1)?, val(2)?);
            }
            ("arc", 4) => arcs.push(Arc { tail: idx(1)?, head: idx(2)?, cost: val(3)? }),
            _ => return Err(PcaError::parse(line, format!("unrecognized line {s:?}"))),
        }
    }
    let n = n.ok_or_else(|| PcaError::parse(0, "missing `nodes` line"))?;
    if let Some((&v, _)) = pen.range(n..).next() {
        return Err(PcaError::Input(format!("penalty for node {v} outside [0, {n})")));
    }
    let penalties = (0..n).map(|v| pen.get(&v).copied().unwrap_or(0.0)).collect();
    PcwInstance::new(Digraph::new(n, root, arcs)?, penalties)
}

/// `name,tsp_opt` CSV with a header row.
pub fn parse_tsp_opt_registry(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| PcaError::parse(i + 2, e.to_string()))?;
        let (Some(name), Some(v)) = (rec.get(0), rec.get(1)) else {
            return Err(PcaError::parse(i + 2, "expected name,tsp_opt"));
        };
        out.insert(name.to_string(), num(v, i + 2)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_triangle() {
        let t = "NAME : tri\nTYPE : TSP\nDIMENSION : 3\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 3 0\n3 0 4\nEOF\n";
        let i = parse_tsplib(t).unwrap();
        assert_eq!((i.matrix.get(0, 1), i.matrix.get(0, 2), i.matrix.get(1, 2)), (3.0, 4.0, 5.0));
    }

    #[test]
    fn explicit_full_matrix() {
        let t = "NAME: two\nTYPE: TSP\nDIMENSION: 2\nEDGE_WEIGHT_TYPE: EXPLICIT\nEDGE_WEIGHT_FORMAT: FULL_MATRIX\nEDGE_WEIGHT_SECTION\n0 7\n7 0\nEOF";
        let i = parse_tsplib(t).unwrap();
        assert_eq!((i.matrix.get(0, 1), i.matrix.get(1, 0)), (7.0, 7.0));
    }

    #[test]
    fn rejects_bad_input() {
        let bad_kind = "DIMENSION : 2\nEDGE_WEIGHT_TYPE : MAN_3D\n";
        assert!(matches!(parse_tsplib(bad_kind), Err(PcaError::Parse { line: 2, .. })));
        let short = "DIMENSION : 3\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nEOF\n";
        assert!(parse_tsplib(short).is_err());
        let nan = "DIMENSION : 2\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n1 0 x\n2 1 1\nEOF\n";
        assert!(matches!(parse_tsplib(nan), Err(PcaError::Parse { line: 4, .. })));
        let asym = "DIMENSION : 2\nEDGE_WEIGHT_TYPE : EXPLICIT\nEDGE_WEIGHT_FORMAT : FULL_MATRIX\nEDGE_WEIGHT_SECTION\n0 1 2 0\nEOF\n";
        assert!(parse_tsplib(asym).is_err());
        assert!(parse_tsplib("DIMENSION : 2\nFOO : 1\n").is_err());
    }

    #[test]
    fn rewards() {
        let m = DistMatrix::from_fn(3, |u, v| (u as f64 - v as f64).abs()).unwrap();
        assert_eq!(generate_rewards(&m, RewardScheme::Gen1), vec![0.0, 1.0, 1.0]);
        // j = 1 would be 15; the root is zeroed, j = 2 gives 1 + 14355 mod 100.
        assert_eq!(generate_rewards(&m, RewardScheme::Gen2), vec![0.0, 56.0, 97.0]);
        assert_eq!(1 + (7141 + 73) % 100, 15);
        assert_eq!(generate_rewards(&m, RewardScheme::Gen3), vec![0.0, 50.0, 100.0]);
    }

    #[test]
    fn pcw_text() {
        let i = parse_pcw("# two nodes\nnodes 2\nroot 0\npenalty 1 5\narc 0 1 3\n").unwrap();
        assert_eq!(i.penalties, vec![0.0, 5.0]);
        assert_eq!(i.graph.arcs().len(), 1);
        assert!(parse_pcw("nodes 2\nbogus 1\n").is_err());
        assert!(parse_pcw("nodes 2\npenalty 4 1\n").is_err());
    }

    #[test]
    fn p2p_text() {
        let s = parse_p2p("10 1\n0 0 0\n3 4 0\n1 1 5\n").unwrap();
        let i = s.to_instance(None).unwrap();
        assert_eq!((i.budget, i.end, i.metric.get(0, 1)), (10.0, Some(1), 5.0));
        assert!(parse_p2p("10\n").is_err());
    }
}
