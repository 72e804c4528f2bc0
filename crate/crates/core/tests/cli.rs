use std::fs;
use std::process::Command;

fn sumlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sumlab"))
}

#[test]
fn run_is_byte_identical_for_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    fs::write(
        &config,
        "# small run\nexperiment = pairwise\nn = 100, 1000\ntrials = 4\nmodes = rtn, sr\nseed = 42\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let status = sumlab()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--output")
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("schema_version,experiment,n,mode,trial,rel_error,"));
    assert!(header.ends_with(",seed"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 4);

    let other = sumlab()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--seed", "43"])
        .output()
        .unwrap();
    assert!(other.status.success());
    assert_ne!(other.stdout, outputs[0]);
}

#[test]
fn custom_tree_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.txt");
    fs::write(&tree, "2 x1 x2 11\n3 x3 x4 11\n4 s2 s3 24\n").unwrap();
    let out = sumlab()
        .args(["run", "--n", "4", "--trials", "2", "--tree"])
        .arg(&tree)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains("MIX_REC"));
}

#[test]
fn compensated_figure_has_its_bound_columns() {
    let dir = tempfile::tempdir().unwrap();
    let status = sumlab()
        .args([
            "figures",
            "--which",
            "compensated",
            "--nmax",
            "1e3",
            "--trials",
            "3",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let rows = fs::read_to_string(dir.path().join("compensated.csv")).unwrap();
    let header = rows.lines().next().unwrap();
    for col in [
        "COMP_DET_PARTIAL",
        "COMP_DET_INPUTS",
        "COMP_PROB_PARTIAL",
        "COMP_PROB_INPUTS",
    ] {
        assert!(header.contains(col), "{header}");
    }
    assert!(dir.path().join("compensated_summary.csv").exists());
}

#[test]
fn rejects_bad_input() {
    let out = sumlab().args(["run", "--n", "1"]).output().unwrap();
    assert!(!out.status.success());
    let out = sumlab()
        .args(["run", "--dist", "cauchy(0,1)"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = sumlab()
        .args(["constants", "--n", "1e5", "--h", "1e5", "--t", "0"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
