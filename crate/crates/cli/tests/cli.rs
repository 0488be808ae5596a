use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use sha2::{Digest, Sha256};

use pistack_cli::{cmd_oracle, exit, main_with, OracleArgs};
use pistack_core::ids::NodeId;
use pistack_core::routing::{shortest_path_scalarized, CriteriaWeights, LogisticsGraph, Route, RoutingError};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn suite(name: &str) -> String {
    repo().join("scenarios/suite").join(name).display().to_string()
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["pistack"];
    argv.extend_from_slice(args);
    let code = main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn graph_doc(nodes: &[&str], edges: &[(&str, &str, u32, u32, f64)], expedite: bool) -> String {
    let nodes: Vec<String> = nodes.iter().map(|n| format!(r#"{{"id":"{n}","kind":"hub"}}"#)).collect();
    let edges: Vec<String> = edges
        .iter()
        .map(|(a, b, t, c, r)| {
            format!(r#"{{"from":"{a}","to":"{b}","base_time":{t},"base_cost":{c},"risk":{r},"expedite_time_factor":0.5,"expedite_cost_factor":3}}"#)
        })
        .collect();
    format!(
        r#"{{"schema_version":1,"graph":{{"nodes":[{}],"edges":[{}]}},"params":{{"allow_expedite":{expedite}}}}}"#,
        nodes.join(","),
        edges.join(",")
    )
}

fn sha(path: &str) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

#[test]
fn help_matches_golden() {
    let mut text = String::new();
    for sub in ["", "validate", "run", "routes", "oracle", "report"] {
        let mut args: Vec<&str> = Vec::new();
        if !sub.is_empty() {
            args.push(sub);
        }
        args.push("--help");
        let (code, out, _) = cli(&args);
        assert_eq!(code, exit::OK);
        let shown = if sub.is_empty() { String::new() } else { format!("{sub} ") };
        text.push_str(&format!("$ pistack {shown}--help\n{out}\n"));
    }
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/help.txt")).unwrap();
    assert_eq!(text, golden);
    for flag in ["--seed", "--horizon", "--trace", "--report", "--no-faults", "--from", "--to", "--weights", "--pareto", "PI_STACK_SEED"] {
        assert!(golden.contains(flag), "{flag} undocumented");
    }
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["validate", &suite("s01_2n_1d.json")]).0, exit::OK);

    let bad = fs::read_to_string(suite("s01_2n_1d.json")).unwrap().replacen(r#""consignee": "N"#, r#""consignee": "Q"#, 1);
    let p = write(dir.path(), "bad.json", &bad);
    let (code, _, err) = cli(&["validate", &p]);
    assert_eq!(code, exit::INVALID);
    assert!(err.contains("unresolved_reference") && err.contains('Q'), "{err}");

    assert_eq!(cli(&["validate", "/no/such/file.json"]).0, exit::IO);

    let unreachable = graph_doc(&["A", "B"], &[("B", "A", 5, 5, 0.0)], false).replace(
        r#""params""#,
        r#""demands":[{"demand_id":"D","product":{"product_code":"P","quantity":1,"unit_weight":1,"unit_volume":1},"consignor":"A","consignee":"B","deadline":10}],"params""#,
    );
    let p = write(dir.path(), "unreach.json", &unreachable);
    let (code, out, _) = cli(&["validate", &p]);
    assert_eq!(code, exit::INVALID);
    assert!(out.contains("unreachable"), "{out}");
}

#[test]
fn multicast_fixtures_rejected() {
    let mut n = 0;
    for e in fs::read_dir(repo().join("scenarios/negative")).unwrap() {
        let p = e.unwrap().path().display().to_string();
        let (code, _, err) = cli(&["validate", &p]);
        assert_eq!(code, exit::INVALID, "{p}");
        assert!(err.contains("multicast_consignee"), "{p}: {err}");
        n += 1;
    }
    assert_eq!(n, 5);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl").display().to_string();
    let b = dir.path().join("b.jsonl").display().to_string();
    let s = suite("s08_5n_12d.json");
    assert_eq!(cli(&["run", &s, "--seed", "7", "--trace", &a]).0, exit::OK);
    assert_eq!(cli(&["run", &s, "--seed", "7", "--trace", &b]).0, exit::OK);
    assert_eq!(sha(&a), sha(&b));
    assert!(fs::metadata(&a).unwrap().len() > 0);
}

#[test]
fn horizon_zero_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.jsonl").display().to_string();
    let r = dir.path().join("r.json").display().to_string();
    assert_eq!(cli(&["run", &suite("s03_3n_2d.json"), "--horizon", "0", "--trace", &t, "--report", &r]).0, exit::OK);
    assert_eq!(fs::read_to_string(&t).unwrap(), "");
    let (code, out, _) = cli(&["report", &t]);
    assert_eq!(code, exit::OK);
    assert!(out.contains("\"total\": 0"), "{out}");
}

#[test]
fn baseline_is_cheaper_when_a_loss_fires() {
    let dir = tempfile::tempdir().unwrap();
    let s = suite("loss02_nospare.json");
    let cost = |extra: &[&str]| -> f64 {
        let r = dir.path().join("r.json");
        let mut args = vec!["run", s.as_str(), "--report", r.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(cli(&args).0, exit::OK);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&r).unwrap()).unwrap();
        v["costs"]["total"].as_f64().unwrap()
    };
    assert!(cost(&["--no-faults"]) < cost(&[]));
}

#[test]
fn report_reproduces_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.jsonl").display().to_string();
    let r = dir.path().join("r.json").display().to_string();
    assert_eq!(cli(&["run", &suite("s14_8n_25d.json"), "--trace", &t, "--report", &r]).0, exit::OK);
    let (code, out, _) = cli(&["report", &t]);
    assert_eq!(code, exit::OK);
    let json = &out[out.find("\n{").unwrap() + 1..];
    assert_eq!(json, fs::read_to_string(&r).unwrap());
}

#[test]
fn truncated_trace_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.jsonl").display().to_string();
    assert_eq!(cli(&["run", &suite("s02_2n_3d.json"), "--trace", &t]).0, exit::OK);
    let text = fs::read_to_string(&t).unwrap();
    let cut = write(dir.path(), "cut.jsonl", &text[..text.len() / 2]);
    let (code, _, err) = cli(&["report", &cut]);
    assert_eq!(code, exit::INVALID);
    assert!(err.contains("truncated_trace") || err.contains("malformed"), "{err}");
    let lines: Vec<&str> = text.lines().collect();
    let no_end = write(dir.path(), "noend.jsonl", &(lines[..lines.len() - 1].join("\n") + "\n"));
    let (code, _, err) = cli(&["report", &no_end]);
    assert_eq!(code, exit::INVALID);
    assert!(err.contains("truncated_trace"), "{err}");
    assert_eq!(cli(&["report", "/no/such/trace"]).0, exit::IO);
}

#[test]
fn routes_line_pareto_and_unreachable() {
    let dir = tempfile::tempdir().unwrap();
    let line = write(dir.path(), "line.json", &graph_doc(&["A", "B", "C"], &[("A", "B", 10, 1, 0.0), ("B", "C", 20, 2, 0.0)], false));
    let (code, out, _) = cli(&["routes", &line, "--from", "A", "--to", "C"]);
    assert_eq!(code, exit::OK);
    assert_eq!(out.matches("route ").count(), 1);
    assert!(out.contains("route A -> B -> C"));
    assert!(out.contains("total time 30 cost 3 risk 0 score 33"), "{out}");

    let (code, out, _) = cli(&["routes", &line, "--from", "C", "--to", "A"]);
    assert_eq!(code, exit::OK);
    assert_eq!(out, "UNREACHABLE C -> A\n");

    let two = write(
        dir.path(),
        "two.json",
        &graph_doc(&["A", "B", "C", "D"], &[("A", "B", 10, 50, 0.0), ("B", "D", 10, 50, 0.0), ("A", "C", 50, 5, 0.0), ("C", "D", 50, 5, 0.0)], false),
    );
    let (code, out, _) = cli(&["routes", &two, "--from", "A", "--to", "D", "--pareto"]);
    assert_eq!(code, exit::OK);
    assert!(out.contains("route A -> B -> D") && out.contains("route A -> C -> D"), "{out}");
    let (_, best, _) = cli(&["routes", &two, "--from", "A", "--to", "D", "--weights", "0,1,0"]);
    assert!(best.contains("route A -> C -> D") && best.contains("score 10\n"), "{best}");

    let (code, _, err) = cli(&["routes", &two, "--from", "A", "--to", "Z"]);
    assert_eq!(code, exit::INVALID);
    assert!(err.contains('Z'));
    assert_eq!(cli(&["routes", &two, "--from", "A", "--to", "D", "--weights", "1,x,0"]).0, exit::INVALID);
}

#[test]
fn printed_totals_match_route_cost() {
    let s = suite("s07_5n_10d.json");
    let (code, out, _) = cli(&["routes", &s, "--from", "N0", "--to", "N4", "--weights", "1,2,100"]);
    assert_eq!(code, exit::OK);
    let total = out.lines().find(|l| l.trim_start().starts_with("total")).unwrap();
    let nums: Vec<f64> = total.split_whitespace().filter_map(|w| w.parse().ok()).collect();
    let [t, c, r, score] = nums.as_slice() else { panic!("{total}") };
    assert_eq!(*score, t * 1.0 + c * 2.0 + r * 100.0);
}

#[test]
fn oracle_agrees_on_suite_graphs() {
    for name in ["s01_2n_1d.json", "s07_5n_10d.json", "s14_8n_25d.json"] {
        let (code, out, _) = cli(&["oracle", &suite(name)]);
        assert_eq!(code, exit::OK, "{name}: {out}");
        assert!(!out.contains("DISAGREE"));
        assert!(out.lines().count() >= 2);
    }
}

#[test]
fn corrupted_router_disagrees() {
    // Picks the most expensive simple route: wrong whenever there is a choice.
    let worst = |g: &LogisticsGraph, s: &NodeId, d: &NodeId, w: &CriteriaWeights, e: bool| -> Result<Route, RoutingError> {
        let good = shortest_path_scalarized(g, s, d, w, e)?;
        Ok(pistack_core::routing::oracle::enumerate_routes(g, s, d, e)
            .into_iter()
            .max_by(|a, b| pistack_core::routing::route_cost(a, w).total_cmp(&pistack_core::routing::route_cost(b, w)))
            .unwrap_or(good))
    };
    let args = OracleArgs {
        scenario: suite("s07_5n_10d.json").into(),
        from: None,
        to: None,
        weights: None,
    };
    let mut out = Vec::new();
    let code = cmd_oracle(&args, &worst, &mut out).unwrap();
    assert_eq!(code, exit::ABORTED);
    assert!(String::from_utf8(out).unwrap().contains("DISAGREE"));
}

#[test]
fn oracle_refuses_13_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = (0..13).map(|i| format!("N{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let edges: Vec<(&str, &str, u32, u32, f64)> = refs.windows(2).map(|w| (w[0], w[1], 1, 1, 0.0)).collect();
    let p = write(dir.path(), "big.json", &graph_doc(&refs, &edges, false));
    let (code, _, err) = cli(&["oracle", &p]);
    assert_eq!(code, exit::INVALID);
    assert!(err.contains("instance_too_large"), "{err}");
}

#[test]
fn binary_honours_env_seed_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_pistack");
    let s = suite("s04_3n_5d.json");
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let st = Command::new(bin).args(["run", &s, "--trace"]).arg(&a).env("PI_STACK_SEED", "11").stdout(Stdio::null()).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let st = Command::new(bin).args(["run", &s, "--seed", "11", "--trace"]).arg(&b).env_remove("PI_STACK_SEED").stdout(Stdio::null()).status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let st = Command::new(bin).args(["validate", "/no/such/file"]).stderr(Stdio::null()).status().unwrap();
    assert_eq!(st.code(), Some(3));
    let st = Command::new(bin).args(["frobnicate"]).stderr(Stdio::null()).status().unwrap();
    assert_eq!(st.code(), Some(1));
}
