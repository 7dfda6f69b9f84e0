use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lfun::theta::Normalization;
use lfun::zeros::DEFAULT_RESCALE;
use lfun::{Error, Result};
use lfun_cli::{
    run_classgroup, run_coeffs, run_ensemble, run_generic, run_replay, run_stats, run_zeros, GenericConfig,
    GenericSource, ZerosConfig,
};

/// L-functions of imaginary quadratic class group characters near the
/// critical point.
#[derive(Parser, Debug)]
#[command(name = "lfun", version)]
struct Cli {
    /// Cache directory for class groups and coefficient tables.
    #[arg(long, global = true, default_value = "lfun-cache")]
    cache_dir: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Range {
    /// Scan window `lo hi` inside [-1, 1].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    t_range: Option<Vec<f64>>,
    /// Sample spacing; defaults to 2π/(20 ln q).
    #[arg(long)]
    step: Option<f64>,
    /// Bracket width at which refinement stops.
    #[arg(long)]
    tol: Option<f64>,
}

impl Range {
    fn pair(&self) -> (f64, f64) {
        self.t_range.as_ref().map_or((0.0, 1.0), |v| (v[0], v[1]))
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Compute the class group of -q and cache its reduced forms.
    Classgroup { q: u64 },
    /// Build the coefficient table of -q at D digits.
    Coeffs {
        q: u64,
        #[arg(long, default_value_t = 6)]
        digits: u32,
        #[arg(long, default_value_t = Normalization::Ideal)]
        normalization: Normalization,
        #[arg(long)]
        paranoid: bool,
    },
    /// Locate zeros of Z(t, φ) for characters of -q.
    Zeros {
        q: u64,
        #[arg(long, default_value_t = 6)]
        digits: u32,
        #[command(flatten)]
        range: Range,
        /// Comma-separated characters `a1:a2:...`, or `all` for every usable one.
        #[arg(long, default_value = "all")]
        chars: String,
        #[arg(long, default_value_t = Normalization::Ideal)]
        normalization: Normalization,
        /// Factor applied to normalized zeros in the density histogram.
        #[arg(long, default_value_t = DEFAULT_RESCALE)]
        rescale: f64,
        /// Use the maximal-error Taylor order.
        #[arg(long)]
        paranoid: bool,
        /// Check one in a hundred evaluations against the direct sum.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value = "lfun-out")]
        out: PathBuf,
    },
    /// Locate zeros of an L-function given by a coefficient file.
    Generic {
        /// `GLF1` coefficient file.
        #[arg(required_unless_present = "kronecker", conflicts_with = "kronecker")]
        file: Option<PathBuf>,
        /// Use the quadratic character of this fundamental discriminant.
        #[arg(long, allow_negative_numbers = true)]
        kronecker: Option<i64>,
        #[arg(long, default_value_t = 30)]
        digits: u32,
        #[command(flatten)]
        range: Range,
        #[arg(long, default_value = "lfun-out")]
        out: PathBuf,
    },
    /// Pool zero-scan directories into histograms and correlations.
    Stats {
        /// Output directories of `zeros` runs.
        runs: Vec<PathBuf>,
        #[arg(long)]
        rescale: Option<f64>,
        /// Scan the full 29-discriminant ensemble first (hours to days).
        #[arg(long = "full-paper")]
        full_ensemble: bool,
        #[arg(long, default_value_t = 6)]
        digits: u32,
        #[arg(long, default_value = "lfun-stats")]
        out: PathBuf,
    },
    /// Re-execute a run from its manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "lfun-out")]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<()> {
    let cache = &cli.cache_dir;
    match cli.command {
        Cmd::Classgroup { q } => {
            let r = run_classgroup(cache, q)?;
            println!("q={} h={} C={} usable={}", r.q, r.h, r.structure, r.usable);
        }
        Cmd::Coeffs { q, digits, normalization, paranoid } => {
            let r = run_coeffs(cache, q, digits, normalization, paranoid)?;
            let state = if r.built { "built" } else { "cached" };
            println!("{} {state} N={} T={} B={} rows={}", r.path.display(), r.n, r.t, r.b, r.rows);
        }
        Cmd::Zeros { q, digits, range, chars, normalization, rescale, paranoid, oracle, out } => {
            let chars = if chars == "all" {
                Vec::new()
            } else {
                chars.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            };
            let cfg = ZerosConfig {
                q,
                digits,
                t_range: range.pair(),
                step: range.step,
                tol: range.tol,
                chars,
                normalization,
                rescale,
                paranoid,
                oracle,
            };
            let r = run_zeros(&cfg, cache, &out)?;
            let mean = r.mean_lowest.map_or("none".to_string(), |m| format!("{m:.6}"));
            println!(
                "q={} characters={} zeros={} central_zeros={} mean_lowest={mean}",
                r.q, r.characters, r.zeros, r.central_zeros
            );
            if oracle {
                println!("oracle checks={} max_diff={:e}", r.oracle_checks, r.oracle_max_diff);
            }
        }
        Cmd::Generic { file, kronecker, digits, range, out } => {
            let source = match (file, kronecker) {
                (_, Some(d)) => GenericSource::Kronecker(d),
                (Some(p), None) => GenericSource::File(p),
                (None, None) => return Err(Error::Input("give a coefficient file or --kronecker".into())),
            };
            let cfg = GenericConfig { source, digits, t_range: range.pair(), step: range.step, tol: range.tol };
            let r = run_generic(&cfg, &out)?;
            println!("{} cond={} zeros={} central_zero={}", r.name, r.cond, r.zeros.len(), r.central_zero);
            for t in r.zero_strings() {
                println!("{t}");
            }
        }
        Cmd::Stats { runs, rescale, full_ensemble, digits, out } => {
            let r = if full_ensemble {
                run_ensemble(digits, cache, &out)?
            } else {
                run_stats(&runs, rescale, &out)?
            };
            let mean = r.mean_lowest.map_or("none".to_string(), |m| format!("{m:.6}"));
            let corr = r.correlation.map_or("none".to_string(), |c| format!("{c:.4}"));
            println!("characters={} zeros={} mean_lowest={mean} correlation={corr}", r.characters, r.zeros);
        }
        Cmd::Replay { manifest, out } => run_replay(&manifest, cache, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
