use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use l0fit::instances::{cc_bruteforce, gen_planted, Graph};
use l0fit::tree::parse_newick_with_labels;
use l0fit::ultrafit::{fit_ultrametric_exact, UltraSolverSpec};
use l0fit::{fit_constrained, l0_distance, ConstrainedInstance, DistanceMatrix, Execution};
use tempfile::TempDir;

fn l0fit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l0fit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(TempDir::new().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

fn report_cost(path: &Path) -> usize {
    let text = fs::read_to_string(path).unwrap();
    let line = text.lines().find(|l| l.starts_with("cost ")).unwrap();
    line[5..].parse().unwrap()
}

/// Runs a fit command writing tree, report and matrix; re-verifies the
/// report against the re-parsed files.
fn fit(dir: &Dir, cmd: &str, input: &str, extra: &[&str]) -> (Output, usize) {
    let (tree, report, matrix) = (dir.arg("out.nwk"), dir.arg("report.txt"), dir.arg("fitted.txt"));
    let mut args = vec![
        cmd, "--input", input, "--output", &tree, "--report", &report, "--matrix", &matrix,
    ];
    args.extend_from_slice(extra);
    let out = l0fit(&args);
    if code(&out) != 0 {
        return (out, usize::MAX);
    }
    let cost = report_cost(&dir.path("report.txt"));
    let fitted = DistanceMatrix::parse(&fs::read_to_string(dir.path("fitted.txt")).unwrap()).unwrap();
    let original = match cmd {
        "fit-constrained" => ConstrainedInstance::parse(&fs::read_to_string(input).unwrap())
            .unwrap()
            .matrix()
            .clone(),
        _ => DistanceMatrix::parse(&fs::read_to_string(input).unwrap()).unwrap(),
    };
    assert_eq!(l0_distance(&original, &fitted).unwrap(), cost);
    let newick = fs::read_to_string(dir.path("out.nwk")).unwrap();
    let tree = parse_newick_with_labels(&newick, original.labels()).unwrap();
    assert_eq!(tree.induced_matrix().unwrap(), fitted);
    let check = l0fit(&["check", "--input", &tree_path(dir), "--kind", "newick"]);
    assert_eq!(code(&check), 0, "{}", stderr(&check));
    (out, cost)
}

fn tree_path(dir: &Dir) -> String {
    dir.arg("out.nwk")
}

const C4: &str = "4\na b c d\n0 1 2 1\n1 0 1 2\n2 1 0 1\n1 2 1 0\n";
const TRI: &str = "3\nu v w\n0 3 2\n3 0 1\n2 1 0\n";

#[test]
fn fit_tree_on_tree_metric_costs_nothing() {
    let dir = Dir::new();
    let input = dir.write("m.txt", "4\na b c d\n0 3 4 5\n3 0 3 4\n4 3 0 3\n5 4 3 0\n");
    for solver in ["exact", "heuristic"] {
        let (out, cost) = fit(&dir, "fit-tree", &input, &["--solver", solver]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert_eq!(cost, 0);
    }
}

#[test]
fn fit_tree_on_path_graph_instance() {
    let dir = Dir::new();
    let graph = dir.write("g.txt", &Graph::path(3).unwrap().to_text());
    let cc = dir.arg("cc.txt");
    assert_eq!(code(&l0fit(&["gen", "cc", "--input", &graph, "--output", &cc])), 0);
    let (out, cost) = fit(&dir, "fit-tree", &cc, &["--solver", "heuristic"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(cost, cc_bruteforce(&Graph::path(3).unwrap()).unwrap().0);
    assert_eq!(cost, 1);
    let report = fs::read_to_string(dir.path("report.txt")).unwrap();
    assert!(report.starts_with("cost 1\nalpha "), "{report}");
    assert!(report.contains("\nsolver heuristic\nn 9\n"));

    // nine elements are beyond the exact solver
    let out = l0fit(&["fit-tree", "--input", &cc, "--solver", "exact"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn fit_ultra_examples() {
    let dir = Dir::new();
    let ultra = dir.write("u.txt", "3\nu v w\n0 2 2\n2 0 1\n2 1 0\n");
    let (out, cost) = fit(&dir, "fit-ultra", &ultra, &[]);
    assert_eq!((code(&out), cost), (0, 0));

    let tri = dir.write("t.txt", TRI);
    let (out, cost) = fit(&dir, "fit-ultra", &tri, &["--solver", "exact"]);
    assert_eq!(code(&out), 0);
    let d = DistanceMatrix::parse(TRI).unwrap();
    let oracle = l0_distance(&d, &fit_ultrametric_exact(&d, 6, Execution::Sequential).unwrap()).unwrap();
    assert_eq!((cost, oracle), (1, 1));

    let big = dir.arg("big.txt");
    assert_eq!(
        code(&l0fit(&[
            "gen", "planted", "--n", "8", "--k", "3", "--seed", "1", "--output", &big
        ])),
        0
    );
    let out = l0fit(&["fit-ultra", "--input", &big, "--solver", "exact"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("exact solver limit"));
}

#[test]
fn fit_constrained_examples() {
    let dir = Dir::new();
    // anchor pairs at h, other bounds slack: same cost as the unconstrained fit
    let inactive = "4\na b c d\n0 5 5 5\n5 0 3 1\n5 3 0 4\n5 1 4 0\nalpha a\nh 5\na 5\nb 1\nc 1\nd 1\n";
    let input = dir.write("i.txt", inactive);
    let (out, cost) = fit(&dir, "fit-constrained", &input, &["--solver", "exact"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let plain = dir.write("p.txt", "4\na b c d\n0 5 5 5\n5 0 3 1\n5 3 0 4\n5 1 4 0\n");
    let (_, unconstrained) = fit(&dir, "fit-ultra", &plain, &["--solver", "exact"]);
    assert_eq!(cost, unconstrained);

    // all bounds equal h: the only feasible matrix is constant
    let single = "3\na b c\n0 3 1\n3 0 2\n1 2 0\nalpha a\nh 3\na 3\nb 3\nc 3\n";
    let input = dir.write("s.txt", single);
    let (out, cost) = fit(&dir, "fit-constrained", &input, &[]);
    assert_eq!((code(&out), cost), (0, 2));

    let text = "4\na b c d\n0 1 3 2\n1 0 2 4\n3 2 0 1\n2 4 1 0\nalpha b\nh 4\na 2\nb 4\nc 1\nd 3\n";
    let input = dir.write("r.txt", text);
    let (_, cost) = fit(&dir, "fit-constrained", &input, &["--solver", "exact"]);
    let inst = ConstrainedInstance::parse(text).unwrap();
    let opt = l0_distance(
        inst.matrix(),
        &l0fit::fit_constrained_exact(&inst, Execution::Sequential).unwrap(),
    )
    .unwrap();
    assert!(cost <= 2 * opt, "{cost} vs {opt}");
    assert_eq!(cost, fit_constrained(&inst, &UltraSolverSpec::exact()).unwrap().1.cost);
}

#[test]
fn malformed_inputs_exit_with_one() {
    let dir = Dir::new();
    let asym = dir.write("a.txt", "3\nx y z\n0 1 2\n1 0 3\n2 4 0\n");
    let out = l0fit(&["fit-tree", "--input", &asym]);
    assert_eq!(code(&out), 1);
    let msg = stderr(&out);
    assert!(msg.contains("(y, z)"), "{msg}");

    let out = l0fit(&["fit-tree", "--input", &dir.arg("missing.txt")]);
    assert_eq!(code(&out), 1);
    let out = l0fit(&["fit-tree", "--input", &asym, "--solver", "magic"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&l0fit(&["frobnicate"])), 1);
    assert_eq!(code(&l0fit(&["--help"])), 0);
}

#[test]
fn check_kinds() {
    let dir = Dir::new();
    let ultra = dir.write("u.txt", "3\nu v w\n0 2 2\n2 0 1\n2 1 0\n");
    for kind in ["matrix", "ultrametric", "tree"] {
        let out = l0fit(&["check", "--input", &ultra, "--kind", kind]);
        assert_eq!(code(&out), 0, "{kind}: {}", stderr(&out));
    }
    let c4 = dir.write("c4.txt", C4);
    let out = l0fit(&["check", "--input", &c4, "--kind", "tree"]);
    assert_eq!(code(&out), 1);
    let msg = stderr(&out);
    assert!(msg.contains("four-point-violation on (a, b, c, d)"), "{msg}");
    assert!(msg.contains("[2, 4, 2]"), "{msg}");

    let tri = dir.write("t.txt", TRI);
    let out = l0fit(&["check", "--input", &tri, "--kind", "ultrametric"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("ultrametric-violation"));

    let nwk = dir.write("t.nwk", "((a:1,b:2):0.5,(c:1/3,d:0):2);\n");
    assert_eq!(code(&l0fit(&["check", "--input", &nwk, "--kind", "newick"])), 0);
    let broken = dir.write("b.nwk", "((a:1,b:2):0.5,(c:1,d:0):2)\n");
    assert_eq!(code(&l0fit(&["check", "--input", &broken, "--kind", "newick"])), 1);

    let near = dir.write("n.txt", "3\nu v w\n0 2 2.01\n2 0 1\n2.01 1 0\n");
    assert_eq!(code(&l0fit(&["check", "--input", &near, "--kind", "ultrametric"])), 1);
    let out = l0fit(&[
        "check",
        "--input",
        &near,
        "--kind",
        "ultrametric",
        "--tolerance",
        "0.05",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn gen_is_deterministic_and_solvable() {
    let dir = Dir::new();
    let (a, b) = (dir.arg("a.txt"), dir.arg("b.txt"));
    for p in [&a, &b] {
        let out = l0fit(&["gen", "planted", "--n", "8", "--k", "0", "--seed", "42", "--output", p]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let expected = gen_planted(8, 0, 42).unwrap().matrix.to_text();
    assert_eq!(fs::read_to_string(&a).unwrap(), expected);
    let (out, cost) = fit(&dir, "fit-tree", &a, &[]);
    assert_eq!((code(&out), cost), (0, 0));

    let graph = dir.write("g.txt", &Graph::path(3).unwrap().to_text());
    let out = l0fit(&["gen", "cc", "--input", &graph]);
    assert_eq!(code(&out), 0);
    let m = DistanceMatrix::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(m.n(), 9);
    let out = l0fit(&["gen", "cc", "--input", &graph, "--delta", "0.1", "--vprime-size", "2"]);
    let m = DistanceMatrix::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(m.n(), 5);
    assert_eq!(m.get(3, 4), &l0fit::value::ratio(1, 10));
    assert_eq!(code(&l0fit(&["gen", "planted", "--n", "3", "--k", "9"])), 1);
}

#[test]
fn output_independent_of_threads() {
    let dir = Dir::new();
    let input = dir.write("m.txt", &gen_planted(5, 3, 9).unwrap().matrix.to_text());
    let run = |extra: &[&str]| {
        let mut args = vec!["fit-tree", "--input", &input, "--solver", "exact"];
        args.extend_from_slice(extra);
        let out = l0fit(&args);
        assert_eq!(code(&out), 0);
        let report: Vec<String> = stderr(&out)
            .lines()
            .filter(|l| !l.starts_with("wall time"))
            .map(String::from)
            .collect();
        (out.stdout, report)
    };
    assert_eq!(run(&[]), run(&["--sequential"]));
}
