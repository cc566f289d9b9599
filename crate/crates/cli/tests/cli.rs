use std::path::Path;
use std::process::{Command, Output};

fn wvflang(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wvflang"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn parse_check_reports_canonical_form_and_errors() {
    let ok = wvflang(&["parse-check", "(Symbol_0)&~ Symbol_4"]);
    assert!(ok.status.success());
    let out = stdout(&ok);
    assert!(out.contains("canonical: Symbol_0 & ~Symbol_4"), "{out}");
    assert!(out.contains("length: 4"), "{out}");

    let bad = wvflang(&["parse-check", "Symbol_0 | "]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("invalid expression"));
}

#[test]
fn gen_tasks_with_split() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tasks.json");
    let o = wvflang(&["gen-tasks", "--seed", "3", "--split", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["tasks"].as_array().unwrap().len(), 162);
    assert_eq!(doc["train"].as_array().unwrap().len(), 81);
    assert_eq!(doc["test"].as_array().unwrap().len(), 81);
    assert!(doc["tasks"][0]["denotation"].as_array().is_some());
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn exp_b_run_writes_outputs_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = wvflang(&[
        "run-exp-b",
        "--model", "heuristic_mock",
        "--seeds", "0,1",
        "--total-step-budget", "20000",
        "--eval-episodes", "50",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = read(&out, "metrics.csv");
    assert!(metrics.starts_with("env_steps,mean_success,tasks_solved,split,seed\n"));
    assert!(metrics.contains(",train,") && metrics.contains(",test,"));
    let cfg: serde_json::Value = serde_json::from_str(&read(&out, "config.json")).unwrap();
    assert_eq!(cfg["experiment"], "exp_b_split");
    assert_eq!(cfg["eval_episodes"], 50);
    assert!(read(&out, "verdicts_seed0.jsonl").lines().count() > 0);
    assert!(read(&out, "aggregate.csv").starts_with("split,tick,env_steps,mean_success,ci_low,ci_high"));
    assert!(stdout(&o).contains("step_audit"));

    let agg = wvflang(&["aggregate", out.join("metrics.csv").to_str().unwrap()]);
    assert!(agg.status.success());
    let rows = stdout(&agg);
    assert!(rows.lines().nth(1).unwrap().starts_with("train,0,"), "{rows}");
    assert!(rows.lines().any(|l| l.ends_with(",2")), "{rows}");
}

#[test]
fn check_flag_sets_the_exit_code() {
    let passing = wvflang(&["oracle", "--seeds", "0", "--total-step-budget", "0", "--eval-episodes", "30", "--check"]);
    assert!(passing.status.success(), "{}", stdout(&passing));
    assert!(stdout(&passing).contains("PASS oracle_overall"));

    let failing = wvflang(&[
        "run-exp-a", "--model", "oracle_mock", "--noise-rate", "1.0", "--seeds", "0",
        "--total-step-budget", "5000", "--check",
    ]);
    assert_eq!(failing.status.code(), Some(1), "{}", stdout(&failing));
    assert!(stdout(&failing).contains("FAIL final_success"));
}

#[test]
fn config_file_is_validated_and_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"seeds":[0],"eval_evry_steps":5}"#).unwrap();
    let o = wvflang(&["oracle", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("eval_evry_steps"), "{}", stderr(&o));

    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"seeds":[4],"eval_episodes":10,"total_step_budget":0}"#).unwrap();
    let out = dir.path().join("o");
    let o = wvflang(&["oracle", "--config", good.to_str().unwrap(), "--seeds", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg: serde_json::Value = serde_json::from_str(&read(&out, "config.json")).unwrap();
    assert_eq!(cfg["seeds"], serde_json::json!([5]));
    assert_eq!(cfg["eval_episodes"], 10);
    assert_eq!(read(&out, "oracle_audit_seed5.csv").lines().count(), 163);
}

#[test]
fn train_wvf_writes_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let o = wvflang(&[
        "train-wvf", "--grid-width", "5", "--grid-height", "5", "--tabular-episodes", "2000",
        "--eval-episodes", "20", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(dir.path(), "basis_success.csv").lines().count(), 10);
    let ck: serde_json::Value = serde_json::from_str(&read(dir.path(), "q_max.json")).unwrap();
    assert_eq!(ck["header"]["task"], "max");
    assert_eq!(ck["layouts"].as_array().unwrap().len(), 5);
}

#[test]
fn remote_model_without_key_fails_cleanly() {
    let o = Command::new(env!("CARGO_BIN_EXE_wvflang"))
        .args(["run-exp-a", "--model", "remote", "--seeds", "0", "--total-step-budget", "5000"])
        .env_remove("OPENAI_API_KEY")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("OPENAI_API_KEY"), "{}", stderr(&o));
}
