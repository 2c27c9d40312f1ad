use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sepidx_core::formats::write_sidx;
use sepidx_core::LabeledFeatureSet;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn sepidx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepidx"))
        .args(args)
        .env_remove("SEPIDX_THREADS")
        .output()
        .expect("spawn sepidx")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn line_set(dir: &Path, name: &str, xs: &[f32], labels: &[u32]) -> PathBuf {
    let fs = LabeledFeatureSet::new(name, 1, xs.to_vec(), labels.to_vec()).unwrap();
    let path = dir.join(format!("{name}.sidx"));
    write_sidx(&fs, &path).unwrap();
    path
}

#[test]
fn si_plain_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let two_pairs = line_set(dir.path(), "two_pairs", &[0.0, 0.1, 10.0, 10.1], &[0, 0, 1, 1]);
    let o = sepidx(&["si", "--input", two_pairs.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "1.000000\n");
    assert!(o.stderr.is_empty());

    let five = line_set(dir.path(), "five", &[0.0, 1.0, 2.5, 3.0, 10.0], &[0, 0, 1, 1, 0]);
    let o = sepidx(&["si", "--input", five.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["si_value"].as_f64(), Some(0.8));
    assert_eq!(v["match_count"].as_u64(), Some(4));
    assert_eq!(v["q"].as_u64(), Some(5));
    assert_eq!(v["candidate_name"], "five");
}

#[test]
fn si_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    std::fs::write(&path, "a,cls\n0,1\n0.1,1\n5,2\n5.2,2\n").unwrap();
    let o = sepidx(&["si", "--input", path.to_str().unwrap(), "--csv", "--label-column", "cls"]);
    assert_eq!(stdout(&o), "1.000000\n");
}

#[test]
fn si_missing_file() {
    let o = sepidx(&["si", "--input", "/no/such/dir/input.sidx"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("/no/such/dir/input.sidx"), "{err}");
    assert!(err.to_lowercase().contains("no such file"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn invalid_file_and_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sidx");
    std::fs::write(&bad, b"NOPE").unwrap();
    assert_eq!(sepidx(&["si", "--input", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(sepidx(&["si"]).status.code(), Some(2));
    assert_eq!(sepidx(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(sepidx(&["--help"]).status.code(), Some(0));
}

fn rank(manifest: &str, out: &Path, canonical: bool) -> Output {
    let m = fixture(manifest);
    let mut args = vec!["rank", "--manifest", m.to_str().unwrap(), "--out", out.to_str().unwrap()];
    if canonical {
        args.push("--canonical");
    }
    sepidx(&args)
}

#[test]
fn rank_linnaeus_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = rank("linnaeus5_manifest.json", &out, false);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).take(7).collect();
    assert!(rows[0].contains("Xception") && rows[0].ends_with("ACCEPTED"));
    assert!(rows[6].contains("EfficientB3") && rows[6].ends_with("REJECTED"));
    let report: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["kind"], "ranking");
    assert_eq!(report["accepted"].as_array().unwrap().len(), 6);
    assert_eq!(report["metadata"]["fixture_mode"], true);
    assert!(report["metadata"]["generated_unix"].as_u64().unwrap() > 0);
}

#[test]
fn rank_covid_ct_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = rank("covid_ct_manifest.json", &dir.path().join("r.json"), true);
    let text = stdout(&o);
    let rejected: Vec<&str> = text.lines().filter(|l| l.ends_with("REJECTED")).collect();
    assert_eq!(rejected.len(), 2);
    assert!(rejected[0].contains("Resnet50V2"));
    assert!(rejected[1].contains("NasnetLarge"));
}

#[test]
fn canonical_rank_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    rank("linnaeus5_manifest.json", &a, true);
    rank("linnaeus5_manifest.json", &b, true);
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().contains("\"generated_unix\": 0"));
}

#[test]
fn bad_manifest_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(&m, r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},"candidates":[]}"#).unwrap();
    let out = dir.path().join("r.json");
    let o = sepidx(&["rank", "--manifest", m.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"));
    assert!(!out.exists());
}

fn correlate(table: &str, dir: &Path) -> (Output, PathBuf) {
    let report = dir.join("r.json");
    rank(&format!("{table}_manifest.json"), &report, true);
    let out = dir.join("c.json");
    let acc = fixture(&format!("{table}_accuracies.json"));
    let o = sepidx(&[
        "correlate",
        "--report",
        report.to_str().unwrap(),
        "--accuracies",
        acc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--canonical",
    ]);
    (o, out)
}

#[test]
fn correlate_linnaeus() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = correlate("linnaeus5", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(summary["spearman"]["status"], "defined");
    assert!((summary["spearman"]["value"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
    assert!(stdout(&o).contains("spearman 1.000000"));
}

#[test]
fn correlate_covid_ct_names_the_violation() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = correlate("covid_ct", dir.path());
    let summary: Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    let v = summary["violations"].as_array().unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0]["higher_si"], "Xception");
    assert_eq!(v[0]["lower_si"], "InceptionV3");
    assert!(stdout(&o).contains("Xception > InceptionV3"));
}

#[test]
fn correlate_with_single_overlap_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    rank("linnaeus5_manifest.json", &report, true);
    let acc = dir.path().join("acc.json");
    std::fs::write(&acc, r#"{"Xception": 0.9, "NotInReport": 0.5}"#).unwrap();
    let out = dir.path().join("c.json");
    let o = sepidx(&[
        "correlate",
        "--report",
        report.to_str().unwrap(),
        "--accuracies",
        acc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 2"));
}

fn embedding_manifest(dir: &Path) -> PathBuf {
    let raw = line_set(dir, "raw", &[0.0, 1.0, 2.5, 3.0, 10.0, 11.0, 12.5, 13.0], &[0, 0, 1, 1, 0, 1, 0, 1]);
    let good = line_set(dir, "good", &[0.0, 0.1, 5.0, 5.1, 0.2, 5.2, 0.3, 5.3], &[0, 0, 1, 1, 0, 1, 0, 1]);
    let _ = (raw, good);
    let m = dir.join("m.json");
    std::fs::write(
        &m,
        r#"{"schema":"sepidx-manifest/1","baseline":{"path":"raw.sidx"},
            "candidates":[{"name":"good","path":"good.sidx"},{"name":"raw-again","path":"raw.sidx"}]}"#,
    )
    .unwrap();
    m
}

#[test]
fn stability_full_fraction_matches_rank() {
    let dir = tempfile::tempdir().unwrap();
    let m = embedding_manifest(dir.path());
    let r = dir.path().join("r.json");
    let o = sepidx(&["rank", "--manifest", m.to_str().unwrap(), "--out", r.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = dir.path().join("s.json");
    let o = sepidx(&[
        "stability",
        "--manifest",
        m.to_str().unwrap(),
        "--fractions",
        "1.0",
        "--out",
        s.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rank: Value = serde_json::from_slice(&std::fs::read(r).unwrap()).unwrap();
    let stab: Value = serde_json::from_slice(&std::fs::read(s).unwrap()).unwrap();
    for c in stab["candidates"].as_array().unwrap() {
        let name = c["candidate_name"].as_str().unwrap();
        let ranked = rank["accepted"]
            .as_array()
            .unwrap()
            .iter()
            .chain(rank["rejected"].as_array().unwrap())
            .find(|s| s["candidate_name"] == name)
            .unwrap();
        assert_eq!(c["scores"][0][0].as_f64(), ranked["si_value"].as_f64());
    }
}

#[test]
fn stability_refuses_fixture_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture("linnaeus5_manifest.json");
    let out = dir.path().join("s.json");
    let o = sepidx(&["stability", "--manifest", m.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no embedding"));
}

#[test]
fn stability_too_small_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = embedding_manifest(dir.path());
    let out = dir.path().join("s.json");
    let o = sepidx(&[
        "stability",
        "--manifest",
        m.to_str().unwrap(),
        "--fractions",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("too small"));
}

#[test]
fn threads_flag_and_env_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let p = line_set(dir.path(), "p", &[0.0, 0.1, 10.0, 10.1], &[0, 0, 1, 1]);
    let o = sepidx(&["--threads", "3", "si", "--input", p.to_str().unwrap()]);
    assert_eq!(stdout(&o), "1.000000\n");
    let o = Command::new(env!("CARGO_BIN_EXE_sepidx"))
        .args(["si", "--input", p.to_str().unwrap()])
        .env("SEPIDX_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(stdout(&o), "1.000000\n");
}

#[test]
fn library_entry_point_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    let p = line_set(dir.path(), "p", &[0.0, 1.0], &[0, 1]);
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = sepidx_cli::run(["sepidx", "si", "--input", p.to_str().unwrap()], &mut out, &mut err);
    assert_eq!(code, 0);
    assert_eq!(String::from_utf8(out).unwrap(), "0.000000\n");
}
