use std::path::Path;
use std::process::{Command, Output};

fn pca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pca")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Small EUC_2D instance on a jittered grid.
fn grid_tsp(n: usize, seed: u64) -> String {
    let mut s = format!("NAME : g{n}\nTYPE : TSP\nDIMENSION : {n}\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n");
    let mut x = seed;
    for i in 0..n {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let jitter = (x >> 59) as usize;
        s += &format!("{} {} {}\n", i + 1, (i % 4) * 20 + jitter, (i / 4) * 20 + jitter / 2);
    }
    s + "EOF\n"
}

const P2P: &str = "40 1\n0 0 0\n10 0 0\n5 5 10\n5 -5 20\n30 30 50\n";

#[test]
fn pcw_two_node_base_case() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "two.pcw", "nodes 2\nroot 0\npenalty 1 5\narc 0 1 3\n");
    let o = pca(&["pcw", &f]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("PCC=3\n") && s.contains("Y=3\n"), "{s}");
    assert!(s.contains("arc 0 1 3"));
}

#[test]
fn zero_budget_cycle_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "g.tsp", &grid_tsp(8, 1));
    let o = pca(&["solve-cycle", &f, "--budget", "0", "--gen", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("Val=0\n") && s.contains("nodes=0\n"), "{s}");
}

#[test]
fn solves_report_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "g.tsp", &grid_tsp(10, 2));
    for sub in ["solve-rooted", "solve-cycle"] {
        let o = pca(&[sub, &f, "--tsp-opt", "150", "--gen", "3", "--verbose"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let s = stdout(&o);
        let cost: f64 = s.lines().find_map(|l| l.strip_prefix("cost=")).unwrap().split(' ').next().unwrap().parse().unwrap();
        assert!(cost <= 75.0 + 1e-9);
        assert!(s.lines().any(|l| l.starts_with("guess w=")));
    }
    let p = write(dir.path(), "set.txt", P2P);
    let o = pca(&["solve-p2p", &p]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("nodes=0") && s.lines().any(|l| l.starts_with("nodes=") && l.ends_with(" 1")), "{s}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "set.txt", P2P);
    // End node sits 10 away.
    assert_eq!(pca(&["solve-p2p", &p, "--budget", "5"]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.tsp", "DIMENSION : 2\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n1 0 zz\n");
    let o = pca(&["solve-rooted", &bad, "--budget", "5", "--gen", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
    let g = write(dir.path(), "g.tsp", &grid_tsp(5, 3));
    assert_eq!(pca(&["solve-rooted", &g, "--gen", "1"]).status.code(), Some(1));
    assert_eq!(pca(&["solve-rooted", &g, "--budget", "9"]).status.code(), Some(1));
    assert_eq!(pca(&["solve-rooted", &g, "--budget", "9", "--gen", "4"]).status.code(), Some(1));
    assert_eq!(pca(&["solve-cycle", &g, "--budget", "9", "--gen", "1", "--termination", "fast"]).status.code(), Some(1));
    assert_eq!(pca(&["pcw", &write(dir.path(), "x.pcw", "nodes 2\narc 0 0 1\n")]).status.code(), Some(1));
    assert_eq!(pca(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(pca(&["--help"]).status.code(), Some(0));
}

#[test]
fn kmlp_trees_cover_k() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.tsp", &grid_tsp(7, 4));
    let o = pca(&["kmlp-trees", &g, "--k", "4"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("coverage=4.000000"), "{}", stdout(&o));
}

#[test]
fn bench_manifest_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.tsp", &grid_tsp(9, 5));
    write(dir.path(), "b.tsp", &grid_tsp(11, 6));
    write(dir.path(), "set.txt", P2P);
    let manifest = write(
        dir.path(),
        "m.csv",
        "dataset_path,tsp_opt,gen,variant,known_opt\n\
         a.tsp,160,1,cycle,\n\
         a.tsp,160,2,rooted,\n\
         b.tsp,200,3,cycle,\n\
         b.tsp,200,1,rooted,\n\
         set.txt,,,p2p,30\n\
         set.txt,,,p2p,\n",
    );
    let one = pca(&["bench", &manifest, "--threads", "1"]);
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    let many = pca(&["bench", &manifest, "--threads", "4"]);
    assert_eq!(one.stdout, many.stdout);
    let text = stdout(&one);
    let (rows, footer) = pca_core::bench::parse_results(&text).unwrap();
    assert_eq!(rows.len(), 6);
    // Recompute the footer from the printed ratio columns.
    let table: Vec<Vec<&str>> = text.split("\n\n").next().unwrap().lines().skip(1).map(|l| l.split(',').collect()).collect();
    for (col, line) in [5usize, 6, 7].iter().zip(&footer) {
        let xs: Vec<f64> = table.iter().filter(|r| !r[*col].is_empty()).map(|r| r[*col].parse().unwrap()).collect();
        assert_eq!(line.count, xs.len());
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((line.mean.unwrap() - mean).abs() <= 5e-4 + 1e-12);
        assert_eq!(line.max.unwrap(), xs.iter().copied().fold(0.0, f64::max));
    }
    let out = dir.path().join("res.csv");
    let o = pca(&["bench", &manifest, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
    assert!(stdout(&o).starts_with("Statistic,Count,Mean,Max"));
}
