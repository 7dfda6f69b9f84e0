//! The pipeline behind each subcommand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use lfun::cache::{load_or_build_coeffs, load_or_build_forms};
use lfun::engine::{direct_eval, precompute_sums, z_eval, GridOptions, TaylorGrid};
use lfun::generic::{CoeffFile, GenericEngine};
use lfun::mp::to_sig_string;
use lfun::theta::Normalization;
use lfun::zeros::{
    class_number_correlation, default_step, lowest_zero_stats, one_level_density, scan_many, zeros_from_samples,
    Histogram, ScanConfig, ScanResult, ZeroRecord, DEFAULT_RESCALE, ZERO_GUARD_DIGITS,
};
use lfun::{CharIndex, ClassGroup, Error, Result};
use rug::Float;
use serde_json::json;

use crate::config::{Command, GenericConfig, GenericSource, Manifest, ZerosConfig};

/// Discriminants `-q` of the reference ensemble whose characters were all
/// scanned; `q = 10000031` is omitted.
pub const ENSEMBLE: [u64; 29] = [
    10000003, 10000004, 10000007, 10000011, 10000015, 10000019, 10000020, 10000023, 10000024, 10000027, 10000036,
    10000039, 10000043, 10000047, 10000051, 10000052, 10000055, 10000056, 10000059, 10000063, 10000072, 10000079,
    10000083, 10000084, 10000087, 10000088, 10000091, 10000095, 10000099,
];

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq)]
pub struct ClassGroupReport {
    pub q: u64,
    pub h: usize,
    pub structure: String,
    pub usable: usize,
    pub built: bool,
}

pub fn run_classgroup(cache_dir: &Path, q: u64) -> Result<ClassGroupReport> {
    let (g, built) = load_or_build_forms(cache_dir, q)?;
    Ok(ClassGroupReport {
        q,
        h: g.class_number(),
        structure: g.structure_display(),
        usable: g.count_usable_characters(),
        built,
    })
}

#[derive(Clone, Debug)]
pub struct CoeffsReport {
    pub path: PathBuf,
    pub n: usize,
    pub t: u32,
    pub b: usize,
    pub rows: usize,
    pub built: bool,
}

pub fn run_coeffs(
    cache_dir: &Path,
    q: u64,
    digits: u32,
    normalization: Normalization,
    paranoid: bool,
) -> Result<CoeffsReport> {
    if digits == 0 {
        return Err(Error::Input("--digits must be at least 1".into()));
    }
    let (g, _) = load_or_build_forms(cache_dir, q)?;
    let grid = TaylorGrid::build(q, digits, GridOptions { paranoid, ..GridOptions::default() })?;
    let c = load_or_build_coeffs(cache_dir, &g, digits, normalization, false)?;
    Ok(CoeffsReport {
        path: c.path,
        n: grid.n_max,
        t: grid.t_count,
        b: grid.b,
        rows: c.table.characters().len(),
        built: c.built,
    })
}

fn select_characters(g: &ClassGroup, wanted: &[String]) -> Result<Vec<CharIndex>> {
    if wanted.is_empty() {
        return Ok(g.usable_characters());
    }
    let m = g.invariant_factors();
    let mut out = Vec::with_capacity(wanted.len());
    for w in wanted {
        let chi: CharIndex = w.parse()?;
        if chi.0.len() != m.len() || chi.0.iter().zip(m).any(|(&a, &mi)| a as u64 >= mi) {
            return Err(Error::Input(format!("character {w} does not fit the group {}", g.structure_display())));
        }
        if chi.is_principal() {
            return Err(Error::Domain(
                "the principal character gives ζ(s) L(s, χ_d), which has a pole at s = 1; pick another character"
                    .into(),
            ));
        }
        if out.contains(&chi) {
            return Err(Error::Input(format!("character {w} listed twice")));
        }
        out.push(chi);
    }
    Ok(out)
}

fn scan_config(q: u64, digits: u32, t_range: (f64, f64), step: Option<f64>, tol: Option<f64>) -> ScanConfig {
    let mut s = ScanConfig::new(q, digits);
    s.lo = t_range.0;
    s.hi = t_range.1;
    if let Some(step) = step {
        s.step = step;
    }
    if let Some(tol) = tol {
        s.tol = tol;
    }
    s
}

fn fmt_f(x: f64) -> String {
    format!("{x:.10}")
}

fn zeros_csv(results: &[ScanResult], digits: u32, char_label: impl Fn(&CharIndex) -> String) -> String {
    let mut s = String::from("q,char_index,t,gamma_tilde\n");
    for r in results {
        for z in &r.zeros {
            let _ = writeln!(s, "{},{},{},{}", z.q, char_label(&z.chi), to_sig_string(&z.t, digits as usize), fmt_f(z.gamma_tilde));
        }
    }
    s
}

fn histogram_csv(h: &Histogram, with_model: bool) -> String {
    let mut s = String::from(if with_model { "bin_lo,bin_hi,weight,model_value\n" } else { "bin_lo,bin_hi,weight\n" });
    for &(lo, hi, w, m) in &h.bins {
        if with_model {
            let _ = writeln!(s, "{lo:.2},{hi:.2},{},{}", fmt_f(w), fmt_f(m));
        } else {
            let _ = writeln!(s, "{lo:.2},{hi:.2},{}", fmt_f(w));
        }
    }
    s
}

fn lowest(r: &ScanResult) -> Option<f64> {
    r.zeros
        .iter()
        .filter(|z| z.t.is_sign_positive() && !z.t.is_zero())
        .map(|z| z.gamma_tilde)
        .min_by(|a, b| a.total_cmp(b))
}

fn characters_csv(results: &[ScanResult], q: u64) -> String {
    let mut s = String::from("q,char_index,zeros,lowest_gamma_tilde,central_zero\n");
    for r in results {
        let lo = lowest(r).map(fmt_f).unwrap_or_default();
        let _ = writeln!(s, "{q},{},{},{lo},{}", r.chi, r.zeros.len(), u8::from(r.central_zero));
    }
    s
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::write(dir.join(name), body)?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ZerosReport {
    pub q: u64,
    pub h: usize,
    pub characters: usize,
    pub zeros: usize,
    pub central_zeros: usize,
    pub mean_lowest: Option<f64>,
    pub oracle_checks: usize,
    pub oracle_max_diff: f64,
    pub results: Vec<ScanResult>,
}

/// Scans the selected characters of `-q` and writes `zeros.csv`,
/// `characters.csv`, `density.csv`, `lowest.csv` and the manifest to
/// `out_dir`.
pub fn run_zeros(cfg: &ZerosConfig, cache_dir: &Path, out_dir: &Path) -> Result<ZerosReport> {
    cfg.validate()?;
    let (g, _) = load_or_build_forms(cache_dir, cfg.q)?;
    let chars = select_characters(&g, &cfg.chars)?;
    let include_real = chars.iter().any(|c| g.is_real(c));
    let table = load_or_build_coeffs(cache_dir, &g, cfg.digits, cfg.normalization, include_real)?.table;
    let grid = TaylorGrid::build(cfg.q, cfg.digits, GridOptions { paranoid: cfg.paranoid, ..GridOptions::default() })?;
    let rows = chars.iter().map(|c| table.row_or_err(c)).collect::<Result<Vec<_>>>()?;
    let sums = precompute_sums(&rows, &grid)?;
    let scan = scan_config(cfg.q, cfg.digits, cfg.t_range, cfg.step, cfg.tol);
    scan.validate()?;
    log::info!("scanning {} characters of -{} (N={}, T={}, B={})", chars.len(), cfg.q, grid.n_max, grid.t_count, grid.b);
    let results = scan_many(&grid, &chars, &sums, &scan)?;

    // Every hundredth (character, sample) pair against the direct sum.
    let (mut oracle_checks, mut oracle_max_diff) = (0usize, 0.0f64);
    if cfg.oracle {
        let ts = scan.samples();
        let pairs: Vec<(usize, f64)> =
            (0..chars.len() * ts.len()).step_by(100).map(|i| (i / ts.len(), ts[i % ts.len()])).collect();
        let bits = grid.bits();
        let tol = 10f64.powi(-(cfg.digits as i32));
        use rayon::prelude::*;
        let diffs = pairs
            .par_iter()
            .map(|&(c, t)| {
                let t = Float::with_val(bits, t);
                let a = z_eval(&t, &sums[c], &grid)?.to_f64();
                let b = direct_eval(&t, rows[c], &grid)?.to_f64();
                Ok(((a - b).abs(), b.abs()))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, &(d, mag)) in diffs.iter().enumerate() {
            oracle_max_diff = oracle_max_diff.max(d);
            if d > tol * mag.max(1.0) {
                let (c, t) = pairs[i];
                return Err(Error::Numerical(format!(
                    "oracle mismatch for character {} at t={t}: |Taylor - direct| = {d:e}",
                    chars[c]
                )));
            }
        }
        oracle_checks = diffs.len();
    }

    let zeros: usize = results.iter().map(|r| r.zeros.len()).sum();
    let central_zeros = results.iter().filter(|r| r.central_zero).count();
    let stats = lowest_zero_stats(&results).ok();
    let density = one_level_density(&results, cfg.rescale);

    fs::create_dir_all(out_dir)?;
    write(out_dir, "zeros.csv", &zeros_csv(&results, cfg.digits, |c| c.to_string()))?;
    write(out_dir, "characters.csv", &characters_csv(&results, cfg.q))?;
    write(out_dir, "density.csv", &histogram_csv(&density, true))?;
    let mut outputs = vec!["zeros.csv", "characters.csv", "density.csv"];
    if let Some((_, h)) = &stats {
        write(out_dir, "lowest.csv", &histogram_csv(h, false))?;
        outputs.push("lowest.csv");
    }
    let parameters = json!({
        "n": grid.n_max,
        "t": grid.t_count,
        "b": grid.b,
        "precision_bits": grid.bits(),
        "step": scan.step,
        "tol": scan.tol,
        "zero_threshold": scan.zero_threshold,
    });
    let summary = json!({
        "h": g.class_number(),
        "structure": g.structure_display(),
        "characters": chars.len(),
        "zeros": zeros,
        "central_zeros": central_zeros,
        "mean_lowest": stats.as_ref().map(|s| s.0),
        "oracle_checks": oracle_checks,
        "oracle_max_diff": oracle_max_diff,
    });
    Manifest::new(Command::Zeros(cfg.clone()), parameters, summary, &outputs).write(&out_dir.join(MANIFEST))?;
    Ok(ZerosReport {
        q: cfg.q,
        h: g.class_number(),
        characters: chars.len(),
        zeros,
        central_zeros,
        mean_lowest: stats.map(|s| s.0),
        oracle_checks,
        oracle_max_diff,
        results,
    })
}

#[derive(Clone, Debug)]
pub struct GenericReport {
    pub name: String,
    pub cond: u64,
    pub zeros: Vec<ZeroRecord>,
    pub central_zero: bool,
    /// Interval whose exact inner sum was recomputed.
    pub checked_interval: Option<u32>,
    pub digits: u32,
}

impl GenericReport {
    /// Zero ordinates to the requested number of significant digits.
    pub fn zero_strings(&self) -> Vec<String> {
        self.zeros.iter().map(|z| to_sig_string(&z.t, self.digits as usize)).collect()
    }
}

fn load_coefficients(cfg: &GenericConfig, work_digits: u32) -> Result<CoeffFile> {
    match &cfg.source {
        GenericSource::File(p) => CoeffFile::read(BufReader::new(File::open(p)?)),
        GenericSource::Kronecker(d) => CoeffFile::kronecker(*d, work_digits),
    }
}

/// Scans `Z(t)` of a coefficient sequence, writing `zeros.csv`,
/// `values.csv` and the manifest to `out_dir`.
pub fn run_generic(cfg: &GenericConfig, out_dir: &Path) -> Result<GenericReport> {
    cfg.validate()?;
    let work = cfg.digits + ZERO_GUARD_DIGITS;
    let file = load_coefficients(cfg, work)?;
    let engine = GenericEngine::new(&file, work)?;
    let checked_interval = engine.verify_inner_sum()?;
    let p = &engine.params;
    let mut scan = scan_config(p.cond, cfg.digits, cfg.t_range, cfg.step, cfg.tol);
    if cfg.tol.is_none() {
        scan.tol = 10f64.powi(-(work as i32));
    }
    scan.step = cfg.step.unwrap_or_else(|| default_step(p.cond));
    scan.validate()?;
    let bits = p.precision.bits();
    let ts = scan.samples();
    let values = ts.iter().map(|&t| engine.z(&Float::with_val(bits, t))).collect::<Result<Vec<_>>>()?;
    let label = CharIndex(vec![]);
    let res = zeros_from_samples(p.cond, &label, &scan, bits, &ts, &values, |t| engine.z(t))?;

    fs::create_dir_all(out_dir)?;
    write(out_dir, "zeros.csv", &zeros_csv(std::slice::from_ref(&res), cfg.digits, |_| file.name.clone()))?;
    let mut vals = String::from("t,z\n");
    for (t, z) in ts.iter().zip(&values) {
        let _ = writeln!(vals, "{t},{}", to_sig_string(z, cfg.digits as usize));
    }
    write(out_dir, "values.csv", &vals)?;
    let parameters = json!({
        "name": file.name,
        "cond": p.cond,
        "shape": p.shape,
        "sign": p.sign,
        "kappa": p.kappa,
        "work_digits": work,
        "precision_bits": bits,
        "m_max": p.m_max,
        "n_used": p.n_used,
        "t": p.t_count,
        "b": p.b,
        "step": scan.step,
        "tol": scan.tol,
        "checked_interval": checked_interval,
    });
    let zero_strings: Vec<String> = res.zeros.iter().map(|z| to_sig_string(&z.t, cfg.digits as usize)).collect();
    let summary = json!({ "zeros": zero_strings, "central_zero": res.central_zero });
    Manifest::new(Command::Generic(cfg.clone()), parameters, summary, &["zeros.csv", "values.csv"])
        .write(&out_dir.join(MANIFEST))?;
    Ok(GenericReport {
        name: file.name,
        cond: p.cond,
        zeros: res.zeros,
        central_zero: res.central_zero,
        checked_interval,
        digits: cfg.digits,
    })
}

/// Re-executes the run recorded in a manifest.
pub fn run_replay(manifest: &Path, cache_dir: &Path, out_dir: &Path) -> Result<()> {
    match Manifest::read(manifest)?.run {
        Command::Zeros(cfg) => run_zeros(&cfg, cache_dir, out_dir).map(|_| ()),
        Command::Generic(cfg) => run_generic(&cfg, out_dir).map(|_| ()),
    }
}

#[derive(Clone, Debug)]
pub struct StatsReport {
    pub characters: usize,
    pub zeros: usize,
    pub mean_lowest: Option<f64>,
    /// `(q, h, mean lowest γ̃)` per run with zeros.
    pub per_discriminant: Vec<(u64, usize, f64)>,
    pub correlation: Option<f64>,
}

fn parse_err(path: &Path, line: usize, msg: &str) -> Error {
    Error::Parse { line, msg: format!("{}: {msg}", path.display()) }
}

/// Reads a zero-scan output directory back into per-character results.
fn load_run(dir: &Path) -> Result<(ZerosConfig, usize, Vec<ScanResult>)> {
    let manifest = Manifest::read(&dir.join(MANIFEST))?;
    let Command::Zeros(cfg) = manifest.run else {
        return Err(Error::Input(format!("{} is not a class-group zero run", dir.display())));
    };
    let h = manifest.summary["h"].as_u64().ok_or_else(|| Error::Input("manifest lacks h".into()))? as usize;
    let mut by_char: BTreeMap<String, ScanResult> = BTreeMap::new();
    let mut order = Vec::new();
    let chars_path = dir.join("characters.csv");
    for (i, line) in fs::read_to_string(&chars_path)?.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(parse_err(&chars_path, i + 1, "expected 5 fields"));
        }
        let chi: CharIndex = f[1].parse()?;
        order.push(f[1].to_string());
        by_char.insert(f[1].to_string(), ScanResult { chi, zeros: Vec::new(), central_zero: f[4] == "1" });
    }
    let zeros_path = dir.join("zeros.csv");
    for (i, line) in fs::read_to_string(&zeros_path)?.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || parse_err(&zeros_path, i + 1, "expected q,char_index,t,gamma_tilde");
        if f.len() != 4 {
            return Err(bad());
        }
        let t = Float::parse(f[2]).map(|p| Float::with_val(64, p)).map_err(|_| bad())?;
        let gamma_tilde: f64 = f[3].parse().map_err(|_| bad())?;
        let r = by_char.get_mut(f[1]).ok_or_else(bad)?;
        r.zeros.push(ZeroRecord { q: cfg.q, chi: r.chi.clone(), t, gamma_tilde });
    }
    let results = order.iter().map(|k| by_char.remove(k).unwrap()).collect();
    Ok((cfg, h, results))
}

/// Pools zero-scan directories: lowest-zero histogram, one-level density,
/// per-discriminant means and their correlation with `h/√q`.
pub fn run_stats(dirs: &[PathBuf], rescale: Option<f64>, out_dir: &Path) -> Result<StatsReport> {
    if dirs.is_empty() {
        return Err(Error::Input("stats needs at least one run directory".into()));
    }
    let mut all = Vec::new();
    let mut per = Vec::new();
    let mut rescale_used = rescale;
    for d in dirs {
        let (cfg, h, results) = load_run(d)?;
        rescale_used.get_or_insert(cfg.rescale);
        if let Ok((mean, _)) = lowest_zero_stats(&results) {
            per.push((cfg.q, h, mean));
        }
        all.extend(results);
    }
    let rescale = rescale_used.unwrap_or(DEFAULT_RESCALE);
    let stats = lowest_zero_stats(&all).ok();
    let density = one_level_density(&all, rescale);
    let correlation = if per.len() >= 3 { class_number_correlation(&per).ok() } else { None };
    let zeros = all.iter().map(|r| r.zeros.len()).sum();

    fs::create_dir_all(out_dir)?;
    write(out_dir, "density.csv", &histogram_csv(&density, true))?;
    if let Some((_, h)) = &stats {
        write(out_dir, "lowest.csv", &histogram_csv(h, false))?;
    }
    let mut pd = String::from("q,h,h_over_sqrt_q,mean_lowest_gamma_tilde\n");
    for &(q, h, m) in &per {
        let _ = writeln!(pd, "{q},{h},{},{}", fmt_f(h as f64 / (q as f64).sqrt()), fmt_f(m));
    }
    write(out_dir, "per_discriminant.csv", &pd)?;
    let summary = json!({
        "runs": dirs.len(),
        "characters": all.len(),
        "zeros": zeros,
        "rescale": rescale,
        "mean_lowest": stats.as_ref().map(|s| s.0),
        "correlation": correlation,
    });
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Input(e.to_string()))?;
    text.push('\n');
    write(out_dir, "stats.json", &text)?;
    Ok(StatsReport { characters: all.len(), zeros, mean_lowest: stats.map(|s| s.0), per_discriminant: per, correlation })
}

/// Scans every usable character of the reference ensemble into
/// `out_dir/q<q>/`, then pools the runs into `out_dir/summary/`.  Runs whose
/// manifest already exists are reused.
pub fn run_ensemble(digits: u32, cache_dir: &Path, out_dir: &Path) -> Result<StatsReport> {
    let mut dirs = Vec::new();
    for &q in &ENSEMBLE {
        let dir = out_dir.join(format!("q{q}"));
        let cfg = ZerosConfig::new(q, digits);
        let done = Manifest::read(&dir.join(MANIFEST)).map(|m| m.run == Command::Zeros(cfg.clone())).unwrap_or(false);
        if !done {
            log::info!("ensemble: scanning -{q}");
            run_zeros(&cfg, cache_dir, &dir)?;
        }
        dirs.push(dir);
    }
    run_stats(&dirs, None, &out_dir.join("summary"))
}
