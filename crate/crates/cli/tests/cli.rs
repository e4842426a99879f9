use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const LAYERS: &str = "vertex_name\tlayer_index\ng1\t1\ng2\t1\np3\t2\np4\t2\n";
const GRAPH: &str = "src\tdst\tkind\ng1\tp3\tdir\ng2\tp4\tdir\np3\tp4\tundir\n";

fn bans(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bans"))
        .current_dir(dir)
        .env("BANS_OUTPUT_ROOT", dir.join("default-root"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = bans(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn toy(dir: &Path, prefix: &str) {
    fs::write(dir.join("toy_layers.tsv"), LAYERS).unwrap();
    fs::write(dir.join("toy_graph.tsv"), GRAPH).unwrap();
    let p = |s: &str| format!("{prefix}/{s}");
    ok(dir, &["simulate", "--layers", "toy_layers.tsv", "--graph", "toy_graph.tsv", "--n", "200", "--seed", "1", "--out", &p("sim")]);
    ok(dir, &["fit", "--data", &p("sim/data.csv"), "--layers", &p("sim/layers.tsv"), "--iters", "3000", "--burnin", "1000", "--out", &p("fit")]);
    ok(dir, &["select", "--ppi", &p("fit/ppi.tsv"), "--layers", &p("sim/layers.tsv"), "--alpha", "0.1", "--out", &p("select")]);
    ok(dir, &[
        "signs", "--data", &p("sim/data.csv"), "--layers", &p("sim/layers.tsv"), "--selected", &p("select/selected.tsv"),
        "--iters", "3000", "--burnin", "1000", "--out", &p("signs"),
    ]);
    ok(dir, &[
        "evaluate", "--layers", &p("sim/layers.tsv"), "--truth", &p("sim/truth.tsv"), "--scores", &p("fit/ppi.tsv"),
        "--selected", &p("select/selected.tsv"), "--out", &p("eval"),
    ]);
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

#[test]
fn toy_example_recovers_its_graph() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path(), "toy");
    let toy = dir.path().join("toy");
    for sub in ["sim", "fit", "select", "signs", "eval"] {
        assert!(toy.join(sub).join("manifest.json").is_file(), "{sub} manifest");
    }
    let selected = data_lines(&toy.join("select/selected.tsv"));
    let mut edges: Vec<String> = selected[1..].iter().map(|l| l.split('\t').take(3).collect::<Vec<_>>().join(" ")).collect();
    edges.sort();
    assert_eq!(edges, ["g1 p3 dir", "g2 p4 dir", "p3 p4 undir"]);

    let signed = data_lines(&toy.join("signs/signed.tsv"));
    assert_eq!(signed.len(), 4);
    assert!(signed[1..].iter().all(|l| !l.contains("\tNA")));

    let summary = data_lines(&toy.join("eval/summary.tsv"));
    let mcc = summary.iter().find(|l| l.starts_with("mcc\t")).unwrap();
    assert_eq!(mcc.split('\t').nth(1).unwrap().parse::<f64>().unwrap(), 1.0);
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path(), "a");
    toy(dir.path(), "b");
    for file in ["sim/data.csv", "sim/truth.tsv", "fit/ppi.tsv", "select/selected.tsv", "signs/signed.tsv", "eval/evaluation.tsv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let manifest = |p: &str| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(dir.path().join(p).join("fit/manifest.json")).unwrap()).unwrap()
    };
    assert_eq!(manifest("a")["id"], manifest("b")["id"]);
    assert_eq!(manifest("a")["outputs"][0]["sha256"], manifest("b")["outputs"][0]["sha256"]);
}

#[test]
fn default_output_directory_is_keyed_by_manifest_id() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["simulate", "--p", "6", "--q", "2", "--n", "30"]);
    let mut parts = out.split_whitespace();
    let (id, path) = (parts.next().unwrap(), parts.next().unwrap());
    assert_eq!(id.len(), 16);
    let expected = dir.path().join("default-root").join("simulate").join(id);
    assert_eq!(Path::new(path), expected);
    let first = fs::read_to_string(expected.join("data.csv")).unwrap();
    assert_eq!(first.lines().next().unwrap(), format!("# manifest {id}"));
}

#[test]
fn missing_input_fails_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = bans(dir.path(), &["fit", "--data", "absent.csv", "--layers", "absent.tsv", "--out", "x"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("absent"), "{err}");
}

#[test]
fn bad_data_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("layers.tsv"), LAYERS).unwrap();
    fs::write(dir.path().join("data.csv"), "g1,g2,p3,p4\n1,2,3,4\n2,x,1,0\n3,1,2,2\n").unwrap();
    let out = bans(dir.path(), &["fit", "--data", "data.csv", "--layers", "layers.tsv", "--out", "x"]);
    assert!(!out.status.success());
    assert!(!dir.path().join("x/ppi.tsv").exists());
}

#[test]
fn help_shows_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["--help"]);
    assert!(help.contains("g1 -> p3"));
    assert!(help.contains("bans pipeline"));
    assert!(help.contains("layer_index"));
}
