use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rectify(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rectify")).current_dir(dir).args(args).output().expect("spawn rectify")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SEGMENT: &str = r#"
seed = 7
[measure]
kind = "segment"
n = 1000
[jones]
samples = 20
[cones]
samples = 40
"#;

#[test]
fn run_segment_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("segment.toml"), SEGMENT).unwrap();
    let o = rectify(tmp.path(), &["run", "--config", "segment.toml", "--out-dir", "a"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gamma: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/gamma.json")).unwrap()).unwrap();
    let ratio = gamma["ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 1e-9, "ratio {ratio}");
    assert_eq!(gamma["connected"], serde_json::Value::Bool(true));
    assert!(gamma["bridges"].as_array().unwrap().is_empty());
    let svg = fs::read_to_string(tmp.path().join("a/gamma.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<line"));
    let cones = fs::read_to_string(tmp.path().join("a/cones.csv")).unwrap();
    assert!(cones.starts_with("atom_id,label,best_V,best_alpha,min_ratio\n"));
    let jones = fs::read_to_string(tmp.path().join("a/jones.csv")).unwrap();
    assert!(jones.starts_with("point_id,k,partial_sum,label\n"));
    assert!(!jones.contains("divergent"));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("segment.toml"), SEGMENT).unwrap();
    for (dir, threads) in [("a", "1"), ("b", "4")] {
        let o = rectify(tmp.path(), &["run", "--config", "segment.toml", "--out-dir", dir, "--threads", threads]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(tmp.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for n in names {
        let a = fs::read(tmp.path().join("a").join(&n)).unwrap();
        let b = fs::read(tmp.path().join("b").join(&n)).unwrap();
        assert!(a == b, "{n:?} differs");
    }
}

#[test]
fn missing_file_exits_2_naming_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rectify(tmp.path(), &["run", "--config", "no_such.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("rectify: input error:") && err.contains("no_such.toml"), "{err}");

    let o = rectify(tmp.path(), &["curve", "--measure", "absent.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.json"));
}

#[test]
fn invalid_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[measure]\nkind = \"segment\"\n[curve]\nepsilon = 0.5\n").unwrap();
    fs::write(tmp.path().join("junk.json"), "{ not json").unwrap();
    for args in [
        vec!["run", "--config", "bad.toml"],
        vec!["gen", "--kind", "spiral"],
        vec!["family", "--measure", "junk.json"],
        vec!["no-such-command"],
    ] {
        let o = rectify(tmp.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("rectify: input error:"), "{err}");
    }
}

#[test]
fn computation_failure_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    // Four scales are the minimum for a profile slope.
    assert!(rectify(tmp.path(), &["gen", "--kind", "segment", "--n", "50", "--out", "m.json"]).status.success());
    let o = rectify(tmp.path(), &["family", "--measure", "m.json", "--k0", "0", "--k-max", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = rectify(tmp.path(), &["jones", "--measure", "m.json", "--family", "family.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("rectify: compute error:"));
}

#[test]
fn subcommand_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let steps: Vec<Vec<&str>> = vec![
        vec!["gen", "--kind", "lipschitz_graph", "--n", "600", "--out", "m.json"],
        vec!["family", "--measure", "m.json", "--k-max", "11", "--betas", "betas.csv"],
        vec!["jones", "--measure", "m.json", "--family", "family.json", "--samples", "10"],
        vec!["curve", "--measure", "m.json", "--k-max", "8", "--svg", "g.svg", "--hierarchy-out", "h.json"],
        vec!["curve", "--hierarchy", "h.json", "--out", "g2.json"],
        vec!["trees", "--measure", "m.json", "--family", "family.json", "--leaves-out", "leaves.json"],
        vec!["cones", "--measure", "m.json", "--samples", "30", "--alphas", "0.5,0.9"],
        vec!["render", "--gamma", "g2.json", "--out", "g2.svg"],
        vec!["render", "--labels", "labels.csv", "--measure", "m.json", "--out", "labels.svg"],
    ];
    for s in &steps {
        let o = rectify(d, s);
        assert!(o.status.success(), "{s:?}: {}", stderr(&o));
    }
    assert_eq!(fs::read(d.join("gamma.json")).unwrap(), fs::read(d.join("g2.json")).unwrap());
    let betas = fs::read_to_string(d.join("betas.csv")).unwrap();
    assert!(betas.starts_with("k,ball_index,beta2,mass,diam\n"));
    let tree: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("tree.json")).unwrap()).unwrap();
    assert!(tree["nodes"].as_object().unwrap().contains_key(tree["top"].as_str().unwrap()));
    let labels = fs::read_to_string(d.join("labels.svg")).unwrap();
    assert!(labels.contains("<circle"));
}
