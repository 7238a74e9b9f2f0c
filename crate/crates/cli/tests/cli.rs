use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn cfmg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfmg")).args(args).output().expect("runs")
}

fn cfmg_stdin(args: &[&str], input: &str, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cfmg"));
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    if let Some(t) = threads {
        cmd.env("CFMG_THREADS", t);
    }
    let mut child = cmd.spawn().expect("spawns");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn grid(dir: &Path, size: &str, seed: &str) -> std::path::PathBuf {
    let g = dir.join(format!("grid-{size}-{seed}.txt"));
    let o = cfmg(&["generate", "--family", "grid", "--size", size, "--seed", seed, "--out", path(&g)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    g
}

#[test]
fn generate_is_deterministic() {
    let a = cfmg(&["generate", "--family", "random_expansion", "--size", "60", "--seed", "9"]);
    let b = cfmg(&["generate", "--family", "random_expansion", "--size", "60", "--seed", "9"]);
    let c = cfmg(&["generate", "--family", "random_expansion", "--size", "60", "--seed", "10"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert!(stdout(&a).starts_with("60 "));
}

#[test]
fn generate_rejects_bad_size() {
    let o = cfmg(&["generate", "--family", "grid", "--size", "4xq"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "3x3", "0");
    let o = cfmg(&["verify", path(&g), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(v.as_array().unwrap().iter().all(|r| r["ok"] == true));

    let c6 = dir.path().join("c6.txt");
    fs::write(&c6, "6 6\n0 1\n1 2\n2 3\n3 4\n4 5\n5 0\n").unwrap();
    let o = cfmg(&["verify", path(&c6)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAILED"));

    let o = cfmg(&["verify", path(&dir.path().join("missing.txt"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn query_answers_in_order_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "4x4", "0");
    let q = "interval 0 15\n# comment\n\nmedian3 0 3 12\ndistance 0 15\ninterval 5 5\n";
    let o = cfmg_stdin(&["query", path(&g), "--check"], q, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<_> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 4);
    // Default payloads on the full grid: the whole grid, one vertex, a corner pair.
    assert_eq!(lines[0], "16");
    assert_eq!(lines[1], "0");
    assert_eq!(lines[2], "6");
    assert_eq!(lines[3], "1");
}

#[test]
fn query_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let o = cfmg(&["generate", "--family", "random_expansion", "--size", "80", "--seed", "3", "--payload", "random(5)", "--out", path(&g)]);
    assert!(o.status.success());
    let mut q = String::new();
    for i in 0..80u32 {
        q += &format!("interval {} {}\n", i, (i * 37 + 11) % 80);
        q += &format!("median3 {} {} {}\n", i, (i * 7) % 80, (i * 13 + 5) % 80);
        q += &format!("distance {} {}\n", i, (i * 29) % 80);
    }
    let one = cfmg_stdin(&["query", path(&g), "--semigroup", "fingerprint", "--check"], &q, Some("1"));
    let four = cfmg_stdin(&["query", path(&g), "--semigroup", "fingerprint", "--check"], &q, Some("4"));
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(four.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(stdout(&one).lines().count(), 240);
}

#[test]
fn query_parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "2x2", "0");
    for (input, needle) in [
        ("interval 0 1\nfoo 1 2\n", "line 2"),
        ("interval 0\n", "line 1"),
        ("distance 0 1\n\ndistance 0 99\n", "line 3"),
        ("median3 0 1 x\n", "line 1"),
    ] {
        let o = cfmg_stdin(&["query", path(&g)], input, None);
        assert_eq!(o.status.code(), Some(2), "{input:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(needle), "{input:?}");
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn build_then_query_from_index_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "6x5", "0");
    let idx = dir.path().join("g.idx");
    let o = cfmg(&["build", path(&g), "--out", path(&idx), "--semigroup", "min", "--leaf-size", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let q = "interval 0 29\ninterval 7 22\nmedian3 0 5 24\n";
    let qf = dir.path().join("q.txt");
    fs::write(&qf, q).unwrap();
    let built = cfmg(&["query", path(&g), "--queries", path(&qf), "--semigroup", "min", "--check"]);
    let loaded = cfmg(&["query", path(&g), "--queries", path(&qf), "--index-file", path(&idx), "--check"]);
    assert!(built.status.success());
    assert!(loaded.status.success());
    assert_eq!(built.stdout, loaded.stdout);

    let mut bytes = fs::read(&idx).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    fs::write(&idx, bytes).unwrap();
    let o = cfmg(&["query", path(&g), "--queries", path(&qf), "--index-file", path(&idx)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn build_rejects_non_median_input() {
    let dir = tempfile::tempdir().unwrap();
    let c6 = dir.path().join("c6.txt");
    fs::write(&c6, "6 6\n0 1\n1 2\n2 3\n3 4\n4 5\n5 0\n").unwrap();
    let o = cfmg(&["build", path(&c6), "--out", path(&dir.path().join("x.idx"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_reports_json() {
    let o = cfmg(&[
        "bench", "--family", "grid", "--min-exp", "5", "--max-exp", "7", "--trials", "50", "--checked", "50", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["mismatches"] == 0 && r["checked"] == 50));
    assert_eq!(rows[2]["n"], 128);
}

#[test]
fn trivial_queries() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let o = cfmg(&["generate", "--family", "grid", "--size", "3x3", "--payload", "ones", "--out", path(&g)]);
    assert!(o.status.success());
    let o = cfmg_stdin(&["query", path(&g), "--check"], "interval 0 8\ninterval 4 4\nmedian3 2 2 6\n", None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "9\n1\n2\n");

    let p = dir.path().join("p.txt");
    fs::write(&p, "3 2\n7 9\n9 11\n#payloads\n7 40\n9 2\n11 5\n").unwrap();
    let o = cfmg_stdin(&["query", path(&p), "--semigroup", "min", "--check"], "interval 7 7\ninterval 11 7\nmedian3 9 9 11\n", None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "40\n2\n9\n");
}

#[test]
fn generated_random_instance_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let o = cfmg(&["generate", "--family", "random_expansion", "--size", "200", "--seed", "1", "--out", path(&g)]);
    assert!(o.status.success());
    let o = cfmg(&["verify", path(&g)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn bench_build_only() {
    let o = cfmg(&["bench", "--sizes", "32,64", "--trials", "0", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["rows"].as_array().unwrap().iter().all(|r| r["checked"] == 0 && r["entries"].as_u64().is_some()));
    assert!(v["visit_fit"].is_null());

    let o = cfmg(&["bench", "--sizes", "64,32", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
