use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn afm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let validator = jsonschema::validator_for(&schema(schema_name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}");
}

#[test]
fn classify_reference_set() {
    let o = afm(&["classify", "--b1", "0.1", "--b2", "1", "--a", "1.89"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_valid("equilibria.schema.json", &doc);
    let kinds: Vec<&str> = doc
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["center", "saddle", "center"]);
    assert!(stderr(&o).contains("regime: bistable"));
}

#[test]
fn melnikov_in_monotone_regime_is_a_parameter_error() {
    let o = afm(&[
        "melnikov", "--b1", "0.2", "--b2", "1", "--a", "1.0", "--omega", "1", "--C", "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("requires b1 < b1* = "),
        "{}",
        stderr(&o)
    );
    assert!(o.stdout.is_empty());
}

#[test]
fn invalid_parameters_exit_two() {
    for args in [
        vec!["classify", "--b1", "-1"],
        vec!["melnikov", "--omega", "0"],
        vec!["simulate", "--x1", "-0.5", "--x2", "0", "--t1", "1"],
        vec!["classify", "--b1", "not-a-number"],
    ] {
        assert_eq!(afm(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn melnikov_threshold_contract() {
    let o = afm(&[
        "melnikov", "--b1", "0.1", "--b2", "1", "--a", "1.89", "--omega", "1", "--C", "0.7", "--B",
        "0.2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_valid("melnikov.schema.json", &doc);
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    let mut min = f64::INFINITY;
    for r in results {
        let xi1 = r["xi1"].as_f64().unwrap();
        let xi2 = r["xi2"].as_f64().unwrap();
        let th = r["threshold_B"].as_f64().unwrap();
        assert_eq!(th, 0.7 * (xi2 / xi1).abs());
        assert_eq!(r["persists"].as_bool().unwrap(), 0.2 > th);
        min = min.min(th);
    }
    assert_eq!(doc["min_threshold_B"].as_f64().unwrap(), min);

    let one = afm(&["melnikov", "--side", "right"]);
    let doc: Value = serde_json::from_str(&stdout(&one)).unwrap();
    assert_eq!(doc["results"].as_array().unwrap().len(), 1);
    assert_eq!(doc["results"][0]["side"], "right");
}

#[test]
fn outputs_are_byte_identical() {
    for args in [
        vec!["melnikov"],
        vec!["scan", "--omega-min", "0.5", "--omega-max", "2", "--n", "4"],
        vec!["sweep", "--a-min", "1.5", "--a-max", "2.2", "--n", "50"],
    ] {
        let a = afm(&args);
        let b = afm(&args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let par = afm(&["scan", "--omega-min", "0.5", "--omega-max", "2", "--n", "4"]);
    let seq = afm(&[
        "--sequential",
        "scan",
        "--omega-min",
        "0.5",
        "--omega-max",
        "2",
        "--n",
        "4",
    ]);
    assert_eq!(par.stdout, seq.stdout);
}

#[test]
fn csv_outputs_have_headers() {
    let cases: [(&[&str], &str); 5] = [
        (
            &["regimes", "--b2-min", "0.5", "--b2-max", "2", "--n", "5"],
            "b2,b1_crit",
        ),
        (
            &["sweep", "--a-min", "1.5", "--a-max", "2.2", "--n", "20"],
            "branch_id,a,x,kind,m_prime",
        ),
        (
            &["scan", "--omega-min", "1", "--omega-max", "1", "--n", "1"],
            "omega,side,xi1,xi2,threshold_B",
        ),
        (
            &["simulate", "--x1", "1.2", "--x2", "0", "--t1", "1"],
            "t,x1,x2",
        ),
        (
            &["verify", "--epsilon", "1e-4", "--phases", "2", "--B", "0.7"],
            "epsilon,t0_phase,measured,predicted,sign_match",
        ),
    ];
    for (args, header) in cases {
        let o = afm(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let text = stdout(&o);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(header));
        let width = header.split(',').count();
        assert!(lines.clone().count() >= 1);
        assert!(lines.all(|l| l.split(',').count() == width));
    }
}

#[test]
fn sweep_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("diagram.csv");
    let folds = dir.path().join("folds.csv");
    let o = afm(&[
        "sweep",
        "--a-min",
        "1.8",
        "--a-max",
        "2.0",
        "--n",
        "40",
        "--out",
        out.to_str().unwrap(),
        "--folds",
        folds.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let folds = std::fs::read_to_string(folds).unwrap();
    assert_eq!(folds.lines().count(), 3);
    assert!(std::fs::read_to_string(out)
        .unwrap()
        .starts_with("branch_id,"));
}

#[test]
fn verify_signs_match() {
    let o = afm(&["verify", "--epsilon", "1e-4", "--phases", "4", "--B", "0.7"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn reference_constants_are_flagged() {
    let o = afm(&["reference"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_valid("reference.schema.json", &doc);
    assert_eq!(doc["regime"], "monotone");
    assert_eq!(doc["loop_exists"], false);
    assert!(stderr(&o).contains("no homoclinic loop"));

    let m = afm(&[
        "melnikov",
        "--b1",
        "0.0113876",
        "--b2",
        "0.148148",
        "--a",
        "1.07468",
    ]);
    assert_eq!(m.status.code(), Some(2));
    assert!(stderr(&m).contains("cantilever example constants"));
}
