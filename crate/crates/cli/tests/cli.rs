use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn chshear(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chshear"))
        .args(args)
        .env_remove("CHSHEAR_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
seed = 4
[grid]
nx = 32
ny = 32
[params]
epsilon = 0.5
gamma = 0.1
a = -1.0
b = 0.2
[shear]
profile = "cosine"
[initial_data]
kind = "seeded-random"
k_min = 1.0
k_max = 4.0
amp = 1.0
mean_frac = 0.1
[controller]
dt_init = 0.01
output_interval = 0.25
[outputs]
t_end = 2.0
tail_fit = true
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_accepts_fixtures() {
    for name in [
        "hyperdiffusion-control.toml",
        "unstable-noshear.toml",
        "unstable-shear-suppressed.toml",
        "nonlinear-energy.toml",
    ] {
        let o = chshear(&["validate", fixture(name).to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        assert_eq!(stdout(&o).trim(), "ok");
    }
}

#[test]
fn validate_names_missing_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), &SMALL.replace("epsilon = 0.5\n", ""));
    let o = chshear(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("epsilon"), "{}", stderr(&o));
}

#[test]
fn config_flag_is_accepted() {
    let o = chshear(&["--config", fixture("nonlinear-energy.toml").to_str().unwrap(), "validate"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn thresholds_unit_inputs() {
    let o = chshear(&["thresholds", "--epsilon", "1", "--l", "1", "--fluct0", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("|a| bound (20211018eq01) = 1e-7"), "{out}");
    assert!(out.contains("not provided by the paper"));
    let o = chshear(&["thresholds", "--b1", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("B1"));
}

#[test]
fn thresholds_json() {
    let o = chshear(&["thresholds", "--epsilon", "1", "--a", "-2e-8", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["a_bound_eq1018"].as_f64(), Some(1e-7));
    assert_eq!(v["conditions"][2]["holds"].as_bool(), Some(true));
}

#[test]
fn run_writes_outputs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csvs = Vec::new();
    for sub in ["one", "two"] {
        let out = dir.path().join(sub);
        let o = chshear(&["--quiet", "--out-dir", out.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push(fs::read(out.join("diagnostics.csv")).unwrap());
        let status: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("status.json")).unwrap()).unwrap();
        assert_eq!(status["status"], "reached_t_end");
        assert_eq!(status["blow_up"], false);
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    assert!(text.starts_with("t,l2,h2,mean,mean_part_l2,fluct_l2,"));
    assert_eq!(text.lines().count(), 1 + 9);

    // a different seed changes the data
    let out = dir.path().join("three");
    let o = chshear(&["-q", "--seed", "5", "--out-dir", out.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(fs::read(out.join("diagnostics.csv")).unwrap(), csvs[0]);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_chshear"))
        .args(["-q", "run", cfg.to_str().unwrap()])
        .env("CHSHEAR_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("status.json").exists());
}

#[test]
fn blow_up_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = chshear(&[
        "-q",
        "--out-dir",
        out.to_str().unwrap(),
        "run",
        fixture("unstable-noshear.toml").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let status: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("status.json")).unwrap()).unwrap();
    assert_eq!(status["blow_up"], true);
    assert_eq!(status["status"], "blow_up");
}

#[test]
fn runtime_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "kind = \"seeded-random\"\nk_min = 1.0\nk_max = 4.0\namp = 1.0\nmean_frac = 0.1",
        "kind = \"checkpoint\"\npath = \"missing.chk\"",
    );
    let cfg = write_config(dir.path(), &text);
    let o = chshear(&["-q", "--out-dir", dir.path().to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn checkpoint_restart_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = write_config(dir.path(), SMALL);
    let o = chshear(&["-q", "--out-dir", dir.path().join("full").to_str().unwrap(), "run", full.to_str().unwrap()]);
    assert!(o.status.success());

    let first = dir.path().join("first.toml");
    fs::write(
        &first,
        SMALL
            .replace("t_end = 2.0", "t_end = 1.0\ncheckpoint = true")
            .replace("tail_fit = true", "tail_fit = false"),
    )
    .unwrap();
    let o = chshear(&["-q", "--out-dir", dir.path().join("a").to_str().unwrap(), "run", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let second = dir.path().join("second.toml");
    fs::write(
        &second,
        SMALL
            .replace(
                "kind = \"seeded-random\"\nk_min = 1.0\nk_max = 4.0\namp = 1.0\nmean_frac = 0.1",
                "kind = \"checkpoint\"\npath = \"a/final.chk\"",
            )
            .replace("tail_fit = true", "tail_fit = false"),
    )
    .unwrap();
    let o = chshear(&["-q", "--out-dir", dir.path().join("b").to_str().unwrap(), "run", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    // the state columns of the resumed tail match the uninterrupted run bit for bit
    let rows = |p: PathBuf| -> Vec<Vec<String>> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').take(7).map(String::from).collect())
            .collect()
    };
    let full_rows = rows(dir.path().join("full/diagnostics.csv"));
    let resumed = rows(dir.path().join("b/diagnostics.csv"));
    assert_eq!(resumed.len(), 5);
    assert_eq!(&full_rows[full_rows.len() - 5..], &resumed[..]);
}

#[test]
fn sweep_writes_ordered_map() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[sweep]\na = [0.0, -1.0]\namplitude = [20.0, 5.0]\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("sweep");
    let o = chshear(&["-q", "--jobs", "2", "--out-dir", out.to_str().unwrap(), "sweep", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let map = fs::read_to_string(out.join("map.csv")).unwrap();
    let lines: Vec<&str> = map.lines().collect();
    assert_eq!(lines[0], "a,A,status,final_l2,decay_rate,r2");
    let keys: Vec<(f64, f64)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(keys, vec![(-1.0, 5.0), (-1.0, 20.0), (0.0, 5.0), (0.0, 20.0)]);
    assert!(out.join("cells").read_dir().unwrap().count() == 4);
}

#[test]
fn mixing_and_semigroup_studies() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}\n[mixing]\nt_max = 20.0\nsamples = 20\nk_max = 4.0\n\
         [semigroup]\ngamma_max = 0.1\ngamma_min = 0.01\ncount = 5\nshears = [\"none\"]\nk_max = 4.0\n\
         [semigroup.decay]\nmin_steps = 500\n"
    );
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("lin");
    let o = chshear(&["-q", "--out-dir", out.to_str().unwrap(), "mixing", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("mixing_cosine.csv").exists());
    assert!(out.join("mixing_constant.csv").exists());
    let o = chshear(&["-q", "--out-dir", out.to_str().unwrap(), "semigroup", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("semigroup_summary.json")).unwrap()).unwrap();
    let slope = summary[0]["measured_exponent"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.02, "no-shear exponent {slope}");
}

#[test]
fn version_subcommand() {
    let o = chshear(&["version"]);
    assert!(stdout(&o).starts_with("chshear "));
}
