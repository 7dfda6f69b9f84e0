use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lfun::generic::{kronecker, required_terms, GammaShape};
use lfun::zeros::ZERO_GUARD_DIGITS;

fn lfun(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfun"))
        .arg("--cache-dir")
        .arg(cache)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn classgroup_prints_table_triple() {
    let dir = tempfile::tempdir().unwrap();
    let o = lfun(dir.path(), &["classgroup", "23"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "q=23 h=3 C={3} usable=1");
    assert!(dir.path().join("forms_23.tsv").exists());

    let o = lfun(dir.path(), &["classgroup", "10000088"]);
    assert_eq!(stdout(&o).trim(), "q=10000088 h=1512 C={126, 6, 2} usable=752");

    assert_eq!(code(&lfun(dir.path(), &["classgroup", "10000005"])), 2);
    assert_eq!(code(&lfun(dir.path(), &["classgroup", "banana"])), 2);
}

#[test]
fn coeffs_are_idempotent_and_keyed_on_digits() {
    let dir = tempfile::tempdir().unwrap();
    let o = lfun(dir.path(), &["coeffs", "100003", "--digits", "6"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains(" built "));
    let path = dir.path().join("coeffs_100003_6.bin");
    let first = fs::read(&path).unwrap();
    let o = lfun(dir.path(), &["coeffs", "100003", "--digits", "6"]);
    assert!(stdout(&o).contains(" cached "));
    assert_eq!(first, fs::read(&path).unwrap());

    let o = lfun(dir.path(), &["coeffs", "100003", "--digits", "8"]);
    assert!(stdout(&o).contains(" built "));
    assert!(dir.path().join("coeffs_100003_8.bin").exists());
    let o = lfun(dir.path(), &["coeffs", "100003", "--digits", "6", "--normalization", "lattice"]);
    assert!(stdout(&o).contains(" built "));
    assert!(dir.path().join("coeffs_100003_6_lattice.bin").exists());
}

#[test]
fn zero_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let args = |out: &Path| {
        vec!["zeros".to_string(), "100003".into(), "--digits".into(), "6".into(), "--out".into(), out.display().to_string()]
    };
    let run = |out: &Path, extra: &[&str]| {
        let mut v = args(out);
        v.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        lfun(&cache, &refs)
    };
    let o = run(&a, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&b, &["--workers", "1"])), 0);
    let manifest = a.join("manifest.json").display().to_string();
    assert_eq!(code(&lfun(&cache, &["replay", &manifest, "--out", &c.display().to_string()])), 0);
    for f in ["zeros.csv", "characters.csv", "density.csv", "lowest.csv", "manifest.json"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs across worker counts");
        assert_eq!(x, fs::read(c.join(f)).unwrap(), "{f} differs after replay");
    }
    let zeros = fs::read_to_string(a.join("zeros.csv")).unwrap();
    let mut lines = zeros.lines();
    assert_eq!(lines.next(), Some("q,char_index,t,gamma_tilde"));
    let mut count = 0;
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let t: f64 = f[2].parse().unwrap();
        assert!(f[0] == "100003" && t > 0.0 && t <= 1.0);
        count += 1;
    }
    assert!(count > 0);
    let density = fs::read_to_string(a.join("density.csv")).unwrap();
    assert_eq!(density.lines().count(), 37);
    assert!(density.starts_with("bin_lo,bin_hi,weight,model_value\n0.00,0.05,"));
}

#[test]
fn zero_run_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o").display().to_string();
    let o = lfun(dir.path(), &["zeros", "23", "--chars", "0", "--out", &out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pole"));
    assert_eq!(code(&lfun(dir.path(), &["zeros", "23", "--chars", "5", "--out", &out])), 2);
    assert_eq!(code(&lfun(dir.path(), &["zeros", "23", "--t-range", "0", "2", "--out", &out])), 2);
    assert_eq!(code(&lfun(dir.path(), &["zeros", "23", "--digits", "0", "--out", &out])), 2);
    assert_eq!(code(&lfun(dir.path(), &["replay", "/nonexistent/manifest.json"])), 2);
}

#[test]
fn genus_characters_can_be_selected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = lfun(dir.path(), &["zeros", "84", "--chars", "1:0,0:1,1:1", "--digits", "8", "--out", &out.display().to_string()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("characters=3"));
}

fn kronecker_file(d: i64, digits: u32) -> String {
    let cond = d.unsigned_abs();
    let kappa = u32::from(d < 0);
    let n = required_terms(cond, GammaShape::Half, kappa, digits).unwrap();
    let mut s = format!("GLF1 user{d} {cond} half 1 {n} {kappa}\n");
    for i in 1..=n as u64 {
        s.push_str(&format!("{i} {}\n", kronecker(d, i)));
    }
    s
}

#[test]
fn generic_file_and_builtin_agree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.glf");
    fs::write(&path, kronecker_file(-1000003, 12 + ZERO_GUARD_DIGITS)).unwrap();
    let a = dir.path().join("a").display().to_string();
    let b = dir.path().join("b").display().to_string();
    let oa = lfun(dir.path(), &["generic", path.to_str().unwrap(), "--digits", "12", "--out", &a]);
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = lfun(dir.path(), &["generic", "--kronecker", "-1000003", "--digits", "12", "--out", &b]);
    assert_eq!(code(&ob), 0, "{}", String::from_utf8_lossy(&ob.stderr));
    let zeros = |o: &Output| stdout(o).lines().skip(1).map(str::to_string).collect::<Vec<_>>();
    assert!(!zeros(&oa).is_empty());
    assert_eq!(zeros(&oa), zeros(&ob));
    let values = fs::read_to_string(dir.path().join("a/values.csv")).unwrap();
    assert!(values.starts_with("t,z\n0,"));
}

#[test]
fn generic_reports_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o").display().to_string();
    let empty = dir.path().join("empty.glf");
    fs::write(&empty, "").unwrap();
    let o = lfun(dir.path(), &["generic", empty.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let bad = dir.path().join("bad.glf");
    fs::write(&bad, "GLF1 x 23 half 1 3 1\n1 1\n2 x\n3 1\n").unwrap();
    let o = lfun(dir.path(), &["generic", bad.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let short = dir.path().join("short.glf");
    fs::write(&short, "GLF1 x 23 half 1 2 1\n1 1\n2 -1\n").unwrap();
    assert_eq!(code(&lfun(dir.path(), &["generic", short.to_str().unwrap(), "--out", &out])), 2);
    assert_eq!(code(&lfun(dir.path(), &["generic", "--kronecker", "-23", "--t-range", "0", "1.5", "--out", &out])), 2);
}

#[test]
fn stats_pool_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for q in ["100003", "100019", "100043"] {
        let out = dir.path().join(format!("q{q}")).display().to_string();
        let o = lfun(dir.path(), &["zeros", q, "--out", &out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(out);
    }
    let stats = dir.path().join("stats").display().to_string();
    let mut args = vec!["stats", "--out", stats.as_str()];
    args.extend(runs.iter().map(String::as_str));
    let o = lfun(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("stats/stats.json")).unwrap()).unwrap();
    assert_eq!(json["runs"], 3);
    let r = json["correlation"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&r));
    assert_eq!(fs::read_to_string(dir.path().join("stats/per_discriminant.csv")).unwrap().lines().count(), 4);

    assert_eq!(code(&lfun(dir.path(), &["stats", "--out", &stats])), 2);
}
