use std::path::PathBuf;
use std::process::{Command, Output};

fn pnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnn")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = pnn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_temp(name: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("pnn-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn dim_reports_known_values() {
    let text = stdout(&["dim", "2-2-3:2"]);
    assert!(text.starts_with("# dim 2-2-3:2 seed=0"));
    assert!(text.lines().any(|l| l == "dim 8"));
    assert!(text.lines().any(|l| l == "ambient 9"));
    let text = stdout(&["dim", "3-2-1:2", "--backend", "rat", "--trials", "2"]);
    assert!(text.lines().any(|l| l == "dim 5"));
    assert!(text.lines().any(|l| l == "defect 1"));
}

#[test]
fn eddeg_agrees_with_closed_form() {
    let text = stdout(&["eddeg", "3"]);
    assert!(text.lines().any(|l| l == "closed_form 39"));
    assert!(text.lines().any(|l| l == "polar_sum 39"));
    assert!(stdout(&["eddeg", "10"]).contains("polar_sum 683"));
}

#[test]
fn table1_reproduces_every_row() {
    let out = pnn(&["--format", "csv", "table1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 27);
    assert!(rows.iter().all(|r| r.ends_with(",true")), "{text}");
}

#[test]
fn unknown_subcommand_exits_with_usage_error() {
    let out = pnn(&["bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = pnn(&["dim", "2-0-1:2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_is_reproducible() {
    for args in [&["--format", "csv", "sweep", "--max-r", "3"][..], &["eddeg", "3", "--census", "--starts", "40"][..]] {
        assert_eq!(stdout(args), stdout(args), "{args:?}");
    }
}

#[test]
fn member_reads_a_coefficient_file() {
    let diff = write_temp("diff.txt", "2 2\n2,0\t1\n0,2\t-1\n");
    let path = diff.to_str().unwrap();
    let text = stdout(&["member", "2-2-1:2", "--input", path, "--exact"]);
    assert!(text.lines().any(|l| l == "in_manifold yes"), "{text}");
    let text = stdout(&["member", "2-1-1:2", "--input", path, "--exact"]);
    assert!(text.lines().any(|l| l == "in_manifold no"), "{text}");
    let counter = write_temp("counter.txt", "2 2\n2,0\t1\n0,2\t-1\n2 2\n1,1\t1\n");
    let text = stdout(&["member", "2-2-2:2", "--input", counter.to_str().unwrap(), "--exact"]);
    assert!(text.lines().any(|l| l == "in_variety yes"), "{text}");
    assert!(text.lines().any(|l| l == "in_manifold no"), "{text}");
    let _ = std::fs::remove_file(diff);
    let _ = std::fs::remove_file(counter);
}

#[test]
fn known_facts_and_json() {
    let text = stdout(&["known", "3-1-5-1:3"]);
    assert!(text.contains("width-1"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&stdout(&["--format", "json", "dim", "2-2-3:2"])).unwrap();
    assert_eq!(json["dim"], 8);
    assert_eq!(json["edim"], 8);
}
