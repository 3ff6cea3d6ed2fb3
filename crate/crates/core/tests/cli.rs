//! The `trialkb` binary: exit codes, dry runs and the report.

use std::path::Path;
use std::process::{Command, Output};

use trialkb::crawl::SnapshotStore;
use trialkb::{compute_stats, Store};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trialkb"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(dir.join("trialkb.toml"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

/// Config with fixtures in process. `proxy` points at a closed port so any
/// real network fetch would fail loudly.
fn write_config(dir: &Path) {
    std::fs::write(
        dir.join("trialkb.toml"),
        "[kb]\npath = \"kb\"\nsnapshots = \"snapshots\"\n\
         [http]\ndelay_ms = 0\n\
         [fixtures]\nenabled = true\n",
    )
    .unwrap();
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn missing_config_exits_2_naming_the_path() {
    let out = bin().args(["--config", "/no/such/dir/cfg.toml", "report"]).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/dir/cfg.toml"));
}

#[test]
fn invalid_config_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("trialkb.toml"), "[crawl]\nmax_pages = 0\n").unwrap();
    let out = run(dir.path(), &["report"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("crawl.max_pages"));
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_2() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_kb_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    let out = run(dir.path(), &["report"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(&dir.path().join("kb").display().to_string()));
}

#[test]
fn harvest_dry_run_prints_plan_and_fetches_nothing() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    assert_eq!(code(&run(dir.path(), &["fixtures", "--seed"])), 0);
    let before = std::fs::read(dir.path().join("kb/companies.jsonl")).unwrap();
    let out = run(dir.path(), &["harvest", "--dry-run"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let store = Store::open(dir.path().join("kb")).unwrap();
    assert_eq!(stdout.lines().count(), store.kb.companies().count());
    assert!(stdout.lines().all(|l| l.split('\t').count() == 4));
    // Nothing fetched means nothing harvested, so nothing stamped.
    assert_eq!(std::fs::read(dir.path().join("kb/companies.jsonl")).unwrap(), before);
    assert!(!dir.path().join("kb/trials.jsonl").exists());

    let one = run(dir.path(), &["harvest", "--dry-run", "--company", "co-00002"]);
    assert_eq!(String::from_utf8_lossy(&one.stdout).lines().count(), 1);
    assert_eq!(code(&run(dir.path(), &["harvest", "--dry-run", "--company", "co-99999"])), 2);
}

#[test]
fn crawl_dry_run_lists_seeds_without_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    run(dir.path(), &["fixtures", "--seed"]);
    let out = run(dir.path(), &["crawl", "--dry-run"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("http://www.orbis-clinical.test/"));
    assert!(!dir.path().join("snapshots").exists());
}

#[test]
fn report_matches_direct_stats_call() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    run(dir.path(), &["fixtures", "--seed"]);
    assert_eq!(code(&run(dir.path(), &["harvest", "--company", "co-00001"])), 0);
    assert_eq!(code(&run(dir.path(), &["crawl", "--company", "co-00001"])), 0);
    let out_file = dir.path().join("report.txt");
    let out = run(dir.path(), &["report", "--out", out_file.to_str().unwrap()]);
    assert_eq!(code(&out), 0);

    let store = Store::open(dir.path().join("kb")).unwrap();
    let expected = compute_stats(&store.kb, Some(&SnapshotStore::new(dir.path().join("snapshots")))).to_string();
    assert_eq!(String::from_utf8_lossy(&out.stdout), expected);
    assert_eq!(std::fs::read_to_string(out_file).unwrap(), expected);
    assert!(store.kb.trials().count() > 0);
}

#[test]
fn quarantined_records_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    run(dir.path(), &["fixtures", "--seed"]);
    // An adapter whose id field does not exist rejects every record.
    let adapters = trialkb::harvest::AdapterRegistry::bundled();
    let mut fixture = adapters.get("fixture").unwrap().clone();
    fixture.parser.fields.insert("registry_id".into(), "no_such_field".into());
    std::fs::write(dir.path().join("adapters.json"), serde_json::to_string(&[fixture]).unwrap()).unwrap();
    let mut cfg = std::fs::read_to_string(dir.path().join("trialkb.toml")).unwrap();
    cfg = cfg.replace("[http]", "[harvest]\nadapters = \"adapters.json\"\n[http]");
    std::fs::write(dir.path().join("trialkb.toml"), cfg).unwrap();

    let out = run(dir.path(), &["harvest", "--company", "co-00001"]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let store = Store::open(dir.path().join("kb")).unwrap();
    assert!(!store.quarantine.is_empty());
    assert!(store.quarantine.iter().all(|q| q.reason.contains("registry_id")));
}
