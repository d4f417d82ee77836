use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eor_core::rng::{generator, uniform53};
use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn eor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eor")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn running_example() -> String {
    data("running_example.csv").to_str().unwrap().to_string()
}

#[test]
fn eor_ranks_a_b_candidate_first() {
    let rows = csv_rows(&stdout(&eor(&["rank", "--input", &running_example(), "--policy", "eor"])));
    assert_eq!(rows[0], ["rank", "id", "group", "prob"]);
    assert_eq!(rows[1][2], "B");
    assert_eq!(rows[1][3], "0.6");
    assert_eq!(rows.len(), 26);
}

#[test]
fn prp_keeps_sorted_input_in_order() {
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "p.csv", "id,group,prob\nx,A,0.9\ny,B,0.8\nz,A,0.5\nw,B,0.5\nv,A,0.1\n");
    let rows = csv_rows(&stdout(&eor(&["rank", "--input", &pool, "--policy", "prp"])));
    let ids: Vec<&str> = rows[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(ids, ["x", "y", "z", "w", "v"]);
}

#[test]
fn rank_top_k_and_json() {
    let out = stdout(&eor(&["rank", "--input", &running_example(), "--k", "3", "--format", "json"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["rank"], 1);
    assert_eq!(rows[0]["prob"], 0.6);
}

#[test]
fn k_beyond_pool_is_a_constraint_error() {
    let out = eor(&["rank", "--input", &running_example(), "--k", "26"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_prob_column_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "p.csv", "id,group\na,A\nb,B\n");
    let out = eor(&["rank", "--input", &pool]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1") && err.contains("prob"), "{err}");
}

#[test]
fn bad_probability_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "p.csv", "id,group,prob\na,A,0.5\nb,B,0.5\nc,B,1.5\n");
    let out = eor(&["rank", "--input", &pool]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn partial_labels_are_rejected() {
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "p.csv", "id,group,prob,label\na,A,0.5,1\nb,B,0.5,\n");
    assert_eq!(eor(&["rank", "--input", &pool]).status.code(), Some(2));
}

#[test]
fn missing_file_is_an_input_error() {
    assert_eq!(eor(&["rank", "--input", "/nonexistent/pool.csv"]).status.code(), Some(2));
}

#[test]
fn quota_policy_needs_two_groups() {
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "p.csv", "id,group,prob\na,A,0.5\nb,B,0.5\nc,C,0.5\n");
    assert_eq!(eor(&["rank", "--input", &pool, "--policy", "prr"]).status.code(), Some(3));
}

#[test]
fn unknown_protected_group_is_a_constraint_error() {
    let out = eor(&["rank", "--input", &running_example(), "--policy", "fairstar", "--protected", "Z"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn trace_of_eor_on_the_running_example() {
    let rows = csv_rows(&stdout(&eor(&["trace", "--input", &running_example()])));
    assert_eq!(rows[0], ["k", "id", "group", "delta", "total_cost", "cost_A", "cost_B"]);
    let delta: Vec<f64> = rows[1..].iter().map(|r| r[3].parse().unwrap()).collect();
    let peak = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    assert!((peak - 0.15).abs() < 1e-12, "peak {peak}");
    assert!((delta[3].abs() - 0.15).abs() < 1e-12);
    let last = rows.last().unwrap();
    assert_eq!(last[0], "25");
    assert_eq!((last[3].as_str(), last[4].as_str()), ("0", "0"));
}

#[test]
fn trace_ends_at_zero_for_every_policy() {
    for policy in ["eor", "prp", "dp", "prr", "fairstar", "uniform", "ts", "exp", "ra"] {
        let rows = csv_rows(&stdout(&eor(&["trace", "--input", &running_example(), "--policy", policy])));
        let last = rows.last().unwrap();
        let (d, c): (f64, f64) = (last[3].parse().unwrap(), last[4].parse().unwrap());
        assert!(d.abs() < 1e-9 && c.abs() < 1e-9, "{policy}: {last:?}");
    }
}

#[test]
fn trace_columns_are_sanitized_group_names() {
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "p.csv", "id,group,prob\na,wo men,0.5\nb,men/boys,0.4\n");
    let header = stdout(&eor(&["trace", "--input", &pool])).lines().next().unwrap().to_string();
    assert_eq!(header, "k,id,group,delta,total_cost,cost_wo_men,cost_men_boys");
}

#[test]
fn label_mode_without_labels_fails() {
    let out = eor(&["trace", "--input", &running_example(), "--mode", "labels"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn label_mode_uses_labels() {
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "p.csv", "id,group,prob,label\na,A,0.9,1\nb,B,0.8,0\nc,A,0.2,0\nd,B,0.1,1\n");
    let rows = csv_rows(&stdout(&eor(&["trace", "--input", &pool, "--policy", "prp", "--mode", "labels"])));
    // a is A's only relevant candidate, d is B's.
    let delta: Vec<&str> = rows[1..].iter().map(|r| r[3].as_str()).collect();
    assert_eq!(delta, ["1", "1", "1", "0"]);
}

#[test]
fn rank_then_audit_reproduces_the_trace() {
    let dir = TempDir::new().unwrap();
    let ranked = dir.path().join("ranked.csv");
    for policy in ["prp", "dp", "eor"] {
        stdout(&eor(&[
            "rank",
            "--input",
            &running_example(),
            "--policy",
            policy,
            "--out",
            ranked.to_str().unwrap(),
        ]));
        let audit = stdout(&eor(&["audit", "--input", ranked.to_str().unwrap(), "--groups", "A,B"]));
        let audit: Value = serde_json::from_str(&audit).unwrap();
        let logged: Vec<f64> = audit["queries"][0]["delta_logged"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let trace = csv_rows(&stdout(&eor(&["trace", "--input", &running_example(), "--policy", policy])));
        let traced: Vec<f64> = trace[1..].iter().map(|r| r[3].parse().unwrap()).collect();
        assert_eq!(logged, traced, "{policy}");
        if policy == "eor" {
            assert_eq!(audit["queries"][0]["delta_eor"], audit["queries"][0]["delta_logged"]);
        }
    }
}

/// Logged rankings for two queries: PRP order on high-disparity pools.
fn logged_prp_file(dir: &TempDir) -> String {
    let mut body = String::from("query_id,position,id,group,prob\n");
    let queries = [
        ("q1", vec![("a1", "A", 0.95), ("a2", "A", 0.9), ("b1", "B", 0.55), ("b2", "B", 0.5), ("b3", "B", 0.45), ("a3", "A", 0.05)]),
        ("q2", vec![("c1", "A", 0.99), ("d1", "B", 0.6), ("d2", "B", 0.4), ("c2", "A", 0.01)]),
    ];
    for (q, rows) in queries {
        // Written in reverse to check that positions, not file order, decide.
        for (pos, (id, g, p)) in rows.iter().enumerate().rev() {
            body.push_str(&format!("{q},{},{id},{g},{p}\n", pos + 1));
        }
    }
    write(dir, "logged.csv", &body)
}

#[test]
fn audit_averages_per_query_traces() {
    let dir = TempDir::new().unwrap();
    let file = logged_prp_file(&dir);
    let v: Value = serde_json::from_str(&stdout(&eor(&["audit", "--input", &file]))).unwrap();
    assert_eq!(v["query_count"], 2);
    let curve = |q: usize, key: &str| -> Vec<f64> {
        v["queries"][q][key].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
    };
    let mean = |key: &str| -> Vec<f64> {
        v[key].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
    };
    for (key, mean_key) in [("delta_logged", "mean_abs_delta_logged"), ("delta_eor", "mean_abs_delta_eor")] {
        let (q1, q2, m) = (curve(0, key), curve(1, key), mean(mean_key));
        assert_eq!(m.len(), 6);
        for k in 0..6 {
            let want = match q2.get(k) {
                Some(d) => (q1[k].abs() + d.abs()) / 2.0,
                None => q1[k].abs(),
            };
            assert!((m[k] - want).abs() < 1e-9, "{key} k {k}");
        }
    }
    // PRP's logged curve sits farther from zero than EOR's somewhere.
    let (logged, fair) = (mean("mean_abs_delta_logged"), mean("mean_abs_delta_eor"));
    assert!(logged.iter().zip(&fair).any(|(l, e)| l > &(e + 1e-9)));
    assert!(logged.iter().zip(&fair).all(|(l, e)| l + 1e-9 >= *e));
}

#[test]
fn audit_csv_lists_query_counts() {
    let dir = TempDir::new().unwrap();
    let file = logged_prp_file(&dir);
    let rows = csv_rows(&stdout(&eor(&["audit", "--input", &file, "--format", "csv"])));
    assert_eq!(rows[0], ["k", "queries", "mean_abs_delta_logged", "mean_abs_delta_eor"]);
    assert_eq!(rows[4][1], "2");
    assert_eq!(rows[5][1], "1");
}

#[test]
fn audit_numbers_groups_by_first_appearance() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "l.csv", "position,id,group,prob\n1,b,B,0.6\n2,a,A,0.9\n3,c,A,0.1\n");
    let delta = |extra: &[&str]| -> f64 {
        let mut args = vec!["audit", "--input", &file];
        args.extend_from_slice(extra);
        let v: Value = serde_json::from_str(&stdout(&eor(&args))).unwrap();
        v["queries"][0]["delta_logged"][0].as_f64().unwrap()
    };
    // B first: δ(1) = 1 − 0; with A first the sign flips.
    assert_eq!(delta(&[]), 1.0);
    assert_eq!(delta(&["--groups", "A,B"]), -1.0);
}

#[test]
fn audit_rejects_duplicate_positions() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "l.csv", "query_id,position,id,group,prob\nq,1,a,A,0.5\nq,1,b,B,0.5\n");
    let out = eor(&["audit", "--input", &file]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate position"));
}

#[test]
fn audit_skips_queries_missing_a_group() {
    let dir = TempDir::new().unwrap();
    let file = write(
        &dir,
        "l.csv",
        "query_id,position,id,group,prob\nq1,1,a,A,0.5\nq1,2,b,B,0.5\nq2,1,c,A,0.7\n",
    );
    let v: Value = serde_json::from_str(&stdout(&eor(&["audit", "--input", &file]))).unwrap();
    assert_eq!(v["query_count"], 1);
    assert_eq!(v["skipped_queries"][0], "q2");
}

#[test]
fn verify_prefix_four_of_the_running_example() {
    let v: Value = serde_json::from_str(&stdout(&eor(&["verify", "--input", &running_example(), "--k", "4"]))).unwrap();
    assert_eq!(v["k"], 4);
    assert_eq!(v["feasible"], true);
    assert_eq!(v["passed"], true);
    assert!(v["gap"].as_f64().unwrap() <= v["bound"].as_f64().unwrap());
    assert!((v["delta"].as_f64().unwrap().abs() - 0.15).abs() < 1e-12);
    assert_eq!(v["eor_value"], 0.375);
    // 25 candidates is above the exhaustive search limit.
    assert!(v["ilp_value"].is_null());
    for key in ["phi", "lp_value", "residual_max"] {
        assert!(v[key].is_number(), "{key}");
    }
}

#[test]
fn verify_all_prefixes_of_a_small_pool() {
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "p.csv", "id,group,prob\na,A,0.9\nb,A,0.3\nc,A,0.2\nd,B,0.8\ne,B,0.7\nf,B,0.1\n");
    let rows = csv_rows(&stdout(&eor(&["verify", "--input", &pool, "--format", "csv"])));
    assert_eq!(rows.len(), 7);
    let ilp = rows[0].iter().position(|h| h == "ilp_value").unwrap();
    let passed = rows[0].iter().position(|h| h == "passed").unwrap();
    assert!(rows[1..].iter().all(|r| !r[ilp].is_empty() && r[passed] == "true"));
}

#[test]
fn verify_exits_four_when_a_check_fails() {
    // Three groups where the exact optimum beats EOR by more than φδ.
    let dir = TempDir::new().unwrap();
    let pool = write(
        &dir,
        "p.csv",
        "id,group,prob\na0,A,0.000000000001\na1,A,0.668\nb0,B,0.999999999999\nb1,B,0.081\n\
         c0,C,0.4\nc1,C,0.3\nc2,C,0.4\nc3,C,0.9\n",
    );
    let out = eor(&["verify", "--input", &pool, "--k", "3"]);
    assert_eq!(out.status.code(), Some(4));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cost_gap_within_bound"], false);
    assert_eq!(v["feasible"], true);
}

#[test]
fn compare_emits_the_table_layout() {
    let rows = csv_rows(&stdout(&eor(&[
        "compare",
        "--scenario",
        "high",
        "--runs",
        "3",
        "--policies",
        "eor,prp,uniform",
    ])));
    assert_eq!(
        rows[0],
        ["policy", "unfairness_mean", "unfairness_se", "effectiveness_mean", "effectiveness_se"]
    );
    let names: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["eor", "prp", "uniform"]);
    let eor_u: f64 = rows[1][1].parse().unwrap();
    let prp_u: f64 = rows[2][1].parse().unwrap();
    assert!(eor_u < prp_u);
    let uniform_eff: f64 = rows[3][3].parse().unwrap();
    assert!(uniform_eff.abs() < 1e-6);
}

#[test]
fn compare_on_a_single_pool() {
    let rows = csv_rows(&stdout(&eor(&["compare", "--input", &running_example(), "--policies", "eor,prp"])));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][2], "0");
    let (eor_u, prp_u): (f64, f64) = (rows[1][1].parse().unwrap(), rows[2][1].parse().unwrap());
    assert!(eor_u < prp_u);
}

#[test]
fn compare_needs_a_source() {
    assert_eq!(eor(&["compare", "--runs", "2"]).status.code(), Some(2));
}

#[test]
fn simulate_is_byte_deterministic() {
    let args = ["simulate", "--scenario", "low", "--runs", "3", "--seed", "9", "--policies", "eor,ts"];
    let first = stdout(&eor(&args));
    assert_eq!(first, stdout(&eor(&args)));
    let rows = csv_rows(&first);
    assert_eq!(rows[0][..4], ["run", "policy", "unfairness", "effectiveness"]);
    assert_eq!(rows.len(), 7);
    for r in &rows[1..] {
        let (a, b): (f64, f64) = (r[6].parse().unwrap(), r[7].parse().unwrap());
        assert!((a - b).abs() <= 1.0 + 1e-9);
    }
}

#[test]
fn stochastic_rankings_depend_only_on_the_seed() {
    let run = |seed: &str| stdout(&eor(&["rank", "--input", &running_example(), "--policy", "ts", "--seed", seed]));
    assert_eq!(run("4"), run("4"));
    assert_ne!(run("4"), run("5"));
}

#[test]
fn output_goes_to_the_requested_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("trace.json");
    let printed = stdout(&eor(&[
        "trace",
        "--input",
        &running_example(),
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(printed.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 25);
    assert!(v[0].get("cost_B").is_some());
}

#[test]
fn calibrated_bernoulli_data_gives_near_identity_platt() {
    let mut rng = generator(17);
    let mut body = String::from("id,group,prob,label\n");
    for i in 0..20_000 {
        let p = 0.02 + 0.96 * uniform53(&mut rng);
        let label = u8::from(uniform53(&mut rng) < p);
        body.push_str(&format!("c{i},{},{p},{label}\n", if i % 2 == 0 { "A" } else { "B" }));
    }
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "cal.csv", &body);
    let v: Value = serde_json::from_str(&stdout(&eor(&["calibrate", "--input", &pool]))).unwrap();
    let (a, b) = (v["a"].as_f64().unwrap(), v["b"].as_f64().unwrap());
    assert!((a - 1.0).abs() < 0.08, "a = {a}");
    assert!(b.abs() < 0.06, "b = {b}");
    assert_eq!(v["bins_before"].as_array().unwrap().len(), 20);
    assert!(v["max_deviation_after"].as_f64().unwrap() < 0.05);
}

#[test]
fn calibrate_recovers_a_known_distortion() {
    // True probability σ(2·logit(p) − 0.5).
    let mut rng = generator(18);
    let mut body = String::from("id,group,prob,label\n");
    for i in 0..20_000 {
        let p: f64 = 0.05 + 0.9 * uniform53(&mut rng);
        let z = 2.0 * (p / (1.0 - p)).ln() - 0.5;
        let truth = 1.0 / (1.0 + (-z).exp());
        let label = u8::from(uniform53(&mut rng) < truth);
        body.push_str(&format!("c{i},A,{p},{label}\n"));
    }
    let dir = TempDir::new().unwrap();
    let pool = write(&dir, "cal.csv", &body);
    let rows = csv_rows(&stdout(&eor(&["calibrate", "--input", &pool, "--format", "csv"])));
    let (a, b): (f64, f64) = (rows[1][0].parse().unwrap(), rows[1][1].parse().unwrap());
    assert!((a - 2.0).abs() < 0.15, "a = {a}");
    assert!((b + 0.5).abs() < 0.1, "b = {b}");
}

#[test]
fn calibrate_needs_labels() {
    assert_eq!(eor(&["calibrate", "--input", &running_example()]).status.code(), Some(3));
}
