use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TREES: &str = "\
(S (NP (NNS agouti)) (VP (VBZ is) (NP (DT a) (NN))))
(S (NP (DT a) (NN)) (VP (VBZ is)))
(A (B (C (D) (E) (F))))
(A (B (C (D)) (C (E) (F))))
";

fn sindex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sindex"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = sindex(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().to_path_buf();
    std::fs::write(p.join("c.txt"), TREES).unwrap();
    ok(&p, &["ingest", "c.txt", "-o", "data"]);
    (dir, p)
}

#[test]
fn build_then_query_prints_sorted_matches() {
    let (_d, p) = setup();
    ok(&p, &["build", "-d", "data", "-o", "rs3", "--mss", "3", "--scheme", "root-split"]);
    assert_eq!(ok(&p, &["query", "-i", "rs3", "NP(DT)(NN)"]), "0\t8\t9\t2\n1\t2\t4\t1\n");
    assert_eq!(ok(&p, &["query", "-i", "rs3", "--count", "A(B(C(D)(E)(F)))"]), "1\n");
    assert_eq!(ok(&p, &["query", "-i", "rs3", "A(B(C(D)(E)(F)))"]), "2\t1\t6\t0\n");
    assert_eq!(ok(&p, &["query", "-i", "rs3", "Z"]), "");
}

#[test]
fn every_scheme_agrees_with_the_oracle() {
    let (_d, p) = setup();
    for scheme in ["filter", "interval", "root-split"] {
        for mss in ["1", "2", "4"] {
            let name = format!("{scheme}{mss}");
            ok(&p, &["build", "-d", "data", "-o", &name, "--mss", mss, "--scheme", scheme]);
            for q in ["S(NP)(VP(//NN))", "A(//C(E))", "C", "S(//NP(DT))(//VBZ)"] {
                let out = ok(&p, &["query", "-i", &name, "-d", "data", "--oracle", q]);
                assert!(out.ends_with("MATCH-SET EQUAL\n"), "{name} {q}: {out}");
            }
        }
    }
}

#[test]
fn query_from_file_with_explain_and_time() {
    let (_d, p) = setup();
    ok(&p, &["build", "-d", "data", "-o", "si2", "--mss", "2", "--scheme", "si"]);
    std::fs::write(p.join("q.txt"), "S(NP)\n  (VP)\n").unwrap();
    let o = sindex(&p, &["query", "-i", "si2", "--file", "q.txt", "--explain", "--time"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.starts_with("query: S(NP)(VP)\nscheme: interval, mss: 2\n"), "{out}");
    assert!(out.ends_with("0\t1\t11\t0\n1\t1\t8\t0\n"), "{out}");
    let err = String::from_utf8(o.stderr).unwrap();
    for phase in ["decompose", "fetch", "join", "filter"] {
        assert!(err.contains(phase), "{err}");
    }
}

#[test]
fn errors_exit_nonzero() {
    let (_d, p) = setup();
    ok(&p, &["build", "-d", "data", "-o", "rs2", "--mss", "2", "--scheme", "rs"]);
    ok(&p, &["build", "-d", "data", "-o", "fb2", "--mss", "2", "--scheme", "fb"]);
    let fails = |args: &[&str], msg: &str| {
        let o = sindex(&p, args);
        assert!(!o.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(msg), "{args:?}: {err}");
    };
    fails(&["query", "-i", "rs2", "--mss", "3", "A"], "mss 2");
    fails(&["query", "-i", "rs2", "--scheme", "interval", "A"], "root-split");
    fails(&["query", "-i", "fb2", "A"], "data file");
    fails(&["query", "-i", "rs2", "A(("], "error");
    fails(&["query", "-i", "missing", "A"], "error");
    fails(&["build", "-d", "data", "-o", "x", "--mss", "9"], "error");
    std::fs::write(p.join("bad.txt"), "(A (B)\n").unwrap();
    fails(&["ingest", "bad.txt", "-o", "d2"], "error");
}

#[test]
fn oracle_mismatch_is_reported() {
    let (_d, p) = setup();
    ok(&p, &["build", "-d", "data", "-o", "rs2", "--mss", "2", "--scheme", "rs"]);
    // index over the first two trees only, checked against all four
    std::fs::write(p.join("half.txt"), TREES.lines().take(2).collect::<Vec<_>>().join("\n")).unwrap();
    ok(&p, &["ingest", "half.txt", "-o", "half"]);
    ok(&p, &["build", "-d", "half", "-o", "h2", "--mss", "2", "--scheme", "rs"]);
    let o = sindex(&p, &["query", "-i", "h2", "-d", "data", "--oracle", "C"]);
    assert!(!o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("MATCH-SET DIFFERS\n-\t2\t3\t"), "{out}");
}

#[test]
fn stats_gen_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["gen", "corpus", "--seed", "4", "--trees", "200", "-o", "c.txt"]);
    assert_eq!(std::fs::read_to_string(p.join("c.txt")).unwrap().lines().count(), 200);
    ok(p, &["ingest", "c.txt", "-o", "data"]);
    ok(p, &["build", "-d", "data", "-o", "rs3", "--mss", "3"]);

    let s = ok(p, &["stats", "-i", "rs3", "-d", "data", "--format", "jsonl"]);
    let recs: Vec<serde_json::Value> = s.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs[0]["table"], "corpus");
    assert_eq!(recs[0]["trees"], 200);
    assert_eq!(recs[1]["mss"], 3);
    let by_size: Vec<_> = recs.iter().filter(|r| r["table"] == "by_size").collect();
    assert_eq!(by_size.len(), 3);
    let total: u64 = by_size.iter().map(|r| r["postings"].as_u64().unwrap()).sum();
    assert_eq!(recs[1]["postings"].as_u64(), Some(total));

    ok(p, &["gen", "queries", "-d", "data", "--class", "H,ML", "--max-size", "4", "--descendant-prob", "0.3", "-o", "q.txt"]);
    let qs = std::fs::read_to_string(p.join("q.txt")).unwrap();
    assert!(qs.lines().filter(|l| !l.starts_with('#')).count() >= 4, "{qs}");

    let b = ok(p, &["bench", "-i", "rs3", "q.txt", "--reps", "2", "--threads", "2"]);
    let (table, records) = b.split_once("\n\n").unwrap();
    for bin in ["<10", "10-100", "100-1k", "1k-10k", ">10k"] {
        assert!(table.contains(bin), "{table}");
    }
    let per: Vec<serde_json::Value> = records
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .filter(|r: &serde_json::Value| r["table"] == "query")
        .collect();
    assert_eq!(per.len(), qs.lines().filter(|l| !l.starts_with('#')).count());
}
