use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn specsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specsim"))
        .args(args)
        .env_remove("SPECSIM_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn report(o: &Output) -> Value {
    let line = stdout(o).lines().next().expect("a report line").to_string();
    serde_json::from_str(&line).unwrap()
}

#[test]
fn control_attack_depends_on_forwarding_policy() {
    let o = specsim(&["run", "spectre_1_1_control", "--forwarding-policy=baseline"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["attack_success"], true);

    let o = specsim(&[
        "run",
        "spectre_1_1_control",
        "--forwarding-policy=slothbear_stores",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["attack_success"], false);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        specsim(&["run", "--scenario-file=missing.txt"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(specsim(&["run", "no_such_scenario"]).status.code(), Some(2));
    assert_eq!(
        specsim(&["run", "spectre_1_0", "--rob-capacity=0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        specsim(&["run", "spectre_1_0", "--mitigation=bogus"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn timeout_exits_3_with_a_report() {
    let o = specsim(&["run", "spectre_1_0", "--cycle-limit=50"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(report(&o)["error"]
        .as_str()
        .unwrap()
        .contains("cycle limit"));
}

#[test]
fn unwritable_trace_exits_4() {
    let o = specsim(&["trace", "spectre_1_0", "--out", "/nonexistent/dir/t.jsonl"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn matrix_output_is_byte_identical() {
    let args = [
        "matrix",
        "--policies=baseline,slothbear_loads",
        "--mitigations=none,fence",
    ];
    let a = specsim(&args);
    let b = specsim(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(!text.contains("unexpected"), "{text}");
    // 6 scenarios x 2 policies x 2 mitigations, 2 benchmark rows, header
    assert_eq!(text.lines().count(), 6 * 2 * 2 + 2 + 1);
}

#[test]
fn matrix_json_rows_are_sorted() {
    let o = specsim(&[
        "matrix",
        "--json",
        "--no-benign",
        "--scenarios=halo,ghost",
        "--policies=baseline",
    ]);
    let names: Vec<String> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["scenario"].to_string())
        .collect();
    assert_eq!(names.len(), 8);
    assert!(names[..4].iter().all(|n| n == "\"ghost\""));
}

#[test]
fn trace_then_show_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let p = path.to_str().unwrap();
    let o = specsim(&["trace", "spectre_1_1_control", "-o", p]);
    assert_eq!(o.status.code(), Some(0));
    let lines = std::fs::read_to_string(&path).unwrap();
    assert!(lines.lines().any(|l| l.contains("\"kind\":\"resteer\"")));
    let shown = specsim(&["show-trace", p]);
    assert_eq!(shown.status.code(), Some(0));
    assert!(stdout(&shown).contains("resteer"));
    assert_eq!(
        specsim(&["show-trace", "/nonexistent.jsonl"]).status.code(),
        Some(2)
    );
}

#[test]
fn config_layers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(
        &cfg,
        "# bear everywhere\nforwarding_policy=slothbear_stores\n",
    )
    .unwrap();
    let run = |env: Option<&Path>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_specsim"));
        c.args(["run", "spectre_1_1_control"])
            .args(extra)
            .env_remove("SPECSIM_CONFIG");
        if let Some(p) = env {
            c.env("SPECSIM_CONFIG", p);
        }
        let o = c.output().unwrap();
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        report(&o)["forwarding_policy"]
            .as_str()
            .unwrap()
            .to_string()
    };
    assert_eq!(run(None, &[]), "baseline");
    assert_eq!(run(Some(&cfg), &[]), "slothbear_stores");
    let c = cfg.to_str().unwrap();
    assert_eq!(run(None, &["--config", c]), "slothbear_stores");
    assert_eq!(
        run(Some(&cfg), &["--forwarding-policy", "arctic_sloth"]),
        "arctic_sloth"
    );
}

#[test]
fn list_names_every_scenario() {
    let text = stdout(&specsim(&["list"]));
    for name in [
        "spectre_1_0",
        "spectre_1_1_data",
        "spectre_1_1_control",
        "spectre_1_1_rop",
        "spectre_1_2",
        "ghost",
        "halo",
        "benign",
    ] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn table_flag_adds_a_human_line() {
    let o = specsim(&["run", "spectre_1_0", "--table"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().contains("LEAKED"));
}

#[test]
fn scenario_file_settings_sit_below_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(
        &path,
        "name = \"tiny\"\nsource = \"halt\"\nsecret = { addr = 0x1000, value = 1 }\n\
         [config]\nforwarding_policy = \"sloth_marked\"\n",
    )
    .unwrap();
    let file = format!("--scenario-file={}", path.display());
    let o = specsim(&["run", &file]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["forwarding_policy"], "sloth_marked");
    assert_eq!(report(&o)["attack_success"], false);
    let o = specsim(&["run", &file, "--forwarding-policy=baseline"]);
    assert_eq!(report(&o)["forwarding_policy"], "baseline");
}
