//! Command-line front end. [`dispatch`] parses arguments, runs one
//! subcommand and maps the outcome to a process exit status:
//! 0 success, 1 usage or configuration error, 2 runtime fault,
//! 3 failed verification tolerance.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{load_sporadic_csv, sporadify_all, write_sporadic_csv, TimeSeries};
use crate::error::{Error, Result};
use crate::model::Vsdn;
use crate::train::{
    evaluate_interpolation, evaluate_prediction, make_holdout, train, write_history, Checkpoint, Config, Metrics, Task,
};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "vsdn", version, about = "Variational stochastic differential networks for sporadic time series")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `train.seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulates the Double-OU data set and writes it as CSV.
    SimulateOu {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Write the dense lattice instead of the sporadic version.
        #[arg(long)]
        dense: bool,
    },
    /// Drops frames and dimensions from a CSV data set.
    Sporadify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        p_time: Option<f64>,
        #[arg(long)]
        p_dim: Option<f64>,
    },
    /// Trains a model and writes the best checkpoint and epoch history.
    Train {
        #[command(flatten)]
        common: Common,
        /// CSV data set (otherwise the configured simulation is used).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Epoch history CSV (defaults to the checkpoint path with `.history.csv`).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Scores a checkpoint on the test split (or on `--data`).
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = Task::Prediction)]
        task: Task,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decodes every series of `--data` on a regular time grid.
    Interpolate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Query spacing (defaults to the configured frame spacing).
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs one numerical oracle and writes its report.
    Verify {
        #[command(subcommand)]
        check: Check,
    },
    /// Trains fresh models for each K with both losses and writes curves.
    KSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,5,25")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 40)]
        epochs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum Check {
    /// Path KL: closed form against Monte Carlo of the density ratio.
    KlOracle {
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        h_q: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        h_g: f64,
        #[arg(long, default_value_t = 1.0)]
        r_g: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 50_000)]
        paths: usize,
        /// Sweep drift gaps and diffusions over {0.5, 1, 2} instead.
        #[arg(long)]
        grid: bool,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "kl_oracle.csv")]
        out: PathBuf,
    },
    /// Log-weight increment against the transition density ratio.
    LogwIdentity {
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "logw_identity.csv")]
        out: PathBuf,
    },
    /// VAE and IWAE bound means for increasing K on a trained model.
    BoundOrdering {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Series to use (defaults to the checkpoint's test split).
        #[arg(long)]
        data: Option<PathBuf>,
        /// How many series to use.
        #[arg(long, default_value_t = 4)]
        series: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,5,25")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bound_ordering.csv")]
        out: PathBuf,
    },
    /// Gradient variance with state-free and state-dependent diffusion.
    NoiseInjection {
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 10_000)]
        redraws: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "noise_injection.csv")]
        out: PathBuf,
    },
    /// Tape gradient of the VAE loss against central differences.
    Gradient {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value = "gradient.csv")]
        out: PathBuf,
    },
    /// Euler–Maruyama OU moments at T = 1.
    Euler {
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "euler.csv")]
        out: PathBuf,
    },
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERIFY,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_runtime_fault() { EXIT_RUNTIME } else { EXIT_CONFIG }
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_lines(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for r in rows {
        writeln!(w, "{r}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn verdict(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, Vsdn)> {
    let ckpt = Checkpoint::load(path)?;
    let model = ckpt.to_model()?;
    Ok((ckpt, model))
}

fn test_split(cfg: &Config, data: Option<&PathBuf>) -> Result<Vec<TimeSeries>> {
    match data {
        Some(p) => load_sporadic_csv(p),
        None => Ok(cfg.data.build(cfg.train.seed)?.test),
    }
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::SimulateOu { common, out, dense } => {
            let cfg = common.load()?;
            cfg.validate()?;
            let series = cfg.data.generate(cfg.train.seed, dense)?;
            write_sporadic_csv(&out, &series)?;
            println!("wrote {} series to {}", series.len(), out.display());
            Ok(true)
        }
        Command::Sporadify { common, data, out, p_time, p_dim } => {
            let cfg = common.load()?;
            let series = load_sporadic_csv(&data)?;
            let sparse = sporadify_all(&series, p_time.unwrap_or(cfg.data.p_time), p_dim.unwrap_or(cfg.data.p_dim), cfg.train.seed)?;
            write_sporadic_csv(&out, &sparse)?;
            println!("wrote {} series to {}", sparse.len(), out.display());
            Ok(true)
        }
        Command::Train { common, data, out, history } => {
            let mut cfg = common.load()?;
            if let Some(d) = data {
                cfg.data.csv = Some(d);
            }
            cfg.validate()?;
            let splits = cfg.data.build(cfg.train.seed)?;
            let model = Vsdn::new(cfg.model.clone(), cfg.train.seed)?;
            let outcome = train(model, &cfg, &splits, |row| {
                let r = &row.report;
                println!(
                    "epoch {:>4} {:<5} {} {:>10.4}/frame  ({:.1}s)",
                    row.epoch,
                    row.split,
                    cfg.train.loss,
                    r.objective(cfg.train.loss) / r.n_frames.max(1) as f64,
                    row.wall_time
                );
            })?;
            Checkpoint::from_model(&cfg, &outcome.model, outcome.best_epoch as u64).save(&out)?;
            let hist = history.unwrap_or_else(|| out.with_extension("history.csv"));
            let mut w = create(&hist)?;
            write_history(&mut w, &outcome.history).and_then(|_| w.flush()).map_err(|e| Error::io(&hist, e))?;
            println!("best epoch {} (validation bound {:.4}); checkpoint {}", outcome.best_epoch, outcome.best_val_bound, out.display());
            Ok(true)
        }
        Command::Evaluate { checkpoint, task, samples, seed, data, out } => {
            let (ckpt, model) = load_checkpoint(&checkpoint)?;
            let cfg = &ckpt.config;
            let series = test_split(cfg, data.as_ref())?;
            let s = samples.unwrap_or(cfg.model.prediction_samples);
            let seed = seed.unwrap_or(cfg.train.seed);
            let metrics: Metrics = match task {
                Task::Prediction => evaluate_prediction(&model, &series, s, seed)?,
                Task::Interpolation => evaluate_interpolation(&model, &make_holdout(&series, cfg.data.holdout_frac, seed)?, s, seed)?,
            };
            write_lines(&out, Metrics::CSV_HEADER, [metrics.csv_row()])?;
            println!("{task}: nll/frame {:.4}  mse {:.5}  over {} frames", metrics.nll_per_frame, metrics.mse, metrics.n_frames);
            Ok(true)
        }
        Command::Interpolate { checkpoint, data, step, samples, seed, out } => {
            let (ckpt, model) = load_checkpoint(&checkpoint)?;
            let series = load_sporadic_csv(&data)?;
            let step = step.unwrap_or(ckpt.config.data.frame_dt);
            if !(step > 0.0) {
                return Err(Error::config("--step must be positive"));
            }
            let s = samples.unwrap_or(ckpt.config.model.prediction_samples);
            let d2 = ckpt.config.model.d2;
            let header = std::iter::once("series_id,time".to_string())
                .chain((1..=d2).map(|j| format!("mean_{j}")))
                .chain((1..=d2).map(|j| format!("std_{j}")))
                .collect::<Vec<_>>()
                .join(",");
            let mut rows = Vec::new();
            for sr in &series {
                let (t0, t1) = (sr.times()[0], sr.last_time());
                let n = ((t1 - t0) / step).floor() as usize;
                let queries: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * step).filter(|&t| t <= t1).collect();
                for q in model.interpolate(sr, &queries, s, seed)? {
                    let stds: Vec<f64> = (0..d2)
                        .map(|j| {
                            let m = q.point[j];
                            let second = q.samples.iter().map(|e| e.log_std[j].exp().powi(2) + e.mean[j].powi(2)).sum::<f64>() / s as f64;
                            (second - m * m).max(0.0).sqrt()
                        })
                        .collect();
                    let vals: Vec<String> = q.point.iter().chain(&stds).map(f64::to_string).collect();
                    rows.push(format!("{},{},{}", sr.id(), q.time, vals.join(",")));
                }
            }
            let n = rows.len();
            write_lines(&out, &header, rows)?;
            println!("wrote {n} decoded points to {}", out.display());
            Ok(true)
        }
        Command::Verify { check } => run_check(check),
        Command::KSweep { common, data, k, epochs, out } => {
            let mut cfg = common.load()?;
            if let Some(d) = data {
                cfg.data.csv = Some(d);
            }
            cfg.validate()?;
            let splits = cfg.data.build(cfg.train.seed)?;
            let rows = verify::k_sweep_training(&cfg, &splits, &k, epochs)?;
            let finite = rows.iter().all(|r| r.train_bound.is_finite() && r.val_bound.is_finite());
            write_lines(&out, verify::SweepRow::CSV_HEADER, rows.iter().map(|r| r.csv_row()))?;
            Ok(verdict("k-sweep", finite, format!("{} rows, all finite: {finite}", rows.len())))
        }
    }
}

fn run_check(check: Check) -> Result<bool> {
    match check {
        Check::KlOracle { h_q, h_g, r_g, horizon, dt, paths, grid, tol, seed, out } => {
            let cases: Vec<(f64, f64, f64)> = if grid {
                let v = [0.5, 1.0, 2.0];
                v.iter().flat_map(|&gap| v.iter().map(move |&r| (gap, 0.0, r))).collect()
            } else {
                vec![(h_q, h_g, r_g)]
            };
            let reports = cases
                .iter()
                .map(|&(q, g, r)| verify::kl_mc_oracle(q, g, r, horizon, dt, paths, seed))
                .collect::<Result<Vec<_>>>()?;
            write_lines(&out, verify::KlOracleReport::CSV_HEADER, reports.iter().map(|r| r.csv_row()))?;
            let mut ok = true;
            for r in &reports {
                let pass = r.rel_err() < tol || (r.analytic == 0.0 && r.mc == 0.0);
                ok &= verdict(
                    "kl-oracle",
                    pass,
                    format!("gap {} r_g {}: analytic {:.5} mc {:.5} ± {:.5} (rel err {:.4})", r.h_q - r.h_g, r.r_g, r.analytic, r.mc, r.std_err, r.rel_err()),
                );
            }
            Ok(ok)
        }
        Check::LogwIdentity { steps, tol, seed, out } => {
            let worst = verify::logw_identity_check(steps, seed)?;
            write_lines(&out, "steps,max_abs_err", [format!("{steps},{worst:e}")])?;
            Ok(verdict("logw-identity", worst <= tol, format!("max |diff| {worst:e} over {steps} steps")))
        }
        Check::BoundOrdering { checkpoint, data, series, k, n_mc, seed, out } => {
            let (ckpt, model) = load_checkpoint(&checkpoint)?;
            let pool = test_split(&ckpt.config, data.as_ref())?;
            let chosen: Vec<TimeSeries> = pool.into_iter().take(series.max(1)).collect();
            let rows = verify::bound_ordering_sweep(&model, &chosen, &k, n_mc, seed)?;
            write_lines(&out, verify::BoundRow::CSV_HEADER, rows.iter().map(|r| r.csv_row()))?;
            let v = verify::assess_ordering(&rows);
            Ok(verdict(
                "bound-ordering",
                v.passes(3.0, 4.0),
                format!("worst decrease {:.2} se; K=1 gap {:?} se", v.worst_decrease_se, v.k1_gap_se),
            ))
        }
        Check::NoiseInjection { dt, theta, phi, draws, redraws, tol, seed, out } => {
            let r = verify::noise_injection_experiment(dt, theta, phi, draws, redraws, seed)?;
            write_lines(&out, verify::NoiseInjectionReport::CSV_HEADER, r.csv_rows())?;
            Ok(verdict(
                "noise-injection",
                r.passes(tol),
                format!(
                    "max err {:e}; drift-gradient variance {:e} (state-free) vs {:e} (state-dependent)",
                    r.max_abs_err, r.state_free_phi_var, r.state_dependent_phi_var
                ),
            ))
        }
        Check::Gradient { common, h, tol, out } => {
            let mut cfg = common.load()?;
            cfg.model.d1 = 2;
            cfg.model.d_h = 4;
            cfg.model.d2 = 2;
            let model = Vsdn::new(cfg.model.clone(), cfg.train.seed)?;
            let series = verify::toy_series()?;
            let r = verify::gradient_check(&model, &series, cfg.model.k, cfg.train.seed, h, 1e-6)?;
            write_lines(&out, "n_params,max_rel_err,worst_index,loss", [format!("{},{:e},{},{}", r.n_params, r.max_rel_err, r.worst_index, r.loss)])?;
            Ok(verdict("gradient", r.max_rel_err < tol, format!("max relative error {:e} over {} parameters", r.max_rel_err, r.n_params)))
        }
        Check::Euler { paths, seed, out } => {
            let m = verify::euler_ou_moments(1.5, 0.8, 0.01, 100, paths, seed);
            write_lines(
                &out,
                "mean,mean_se,want_mean,var,want_var",
                [format!("{},{},{},{},{}", m.mean, m.mean_se, m.want_mean, m.var, m.want_var)],
            )?;
            Ok(verdict("euler", m.passes(3.0, 0.05), format!("mean {:.4} (want {:.4}), var {:.4} (want {:.4})", m.mean, m.want_mean, m.var, m.want_var)))
        }
    }
}
