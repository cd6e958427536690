//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.
//!
//! `VSDN_ACCEPT_ONLY=3,4` runs a subset; `VSDN_ACCEPT_CHECKPOINT=path`
//! saves the trained model of criterion 1.

use std::time::Instant;

use vsdn::data::{holdout_frames, TimeSeries};
use vsdn::model::{InferenceMode, Vsdn, VsdnConfig};
use vsdn::train::{evaluate_prediction, train, Checkpoint, Config, Metrics};
use vsdn::verify;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Settings of the Double-OU run.
fn double_ou_config() -> Config {
    let mut cfg = Config::default();
    cfg.data.n_seq = 2000;
    cfg.train.batch_size = 50;
    cfg.train.learning_rate = 3e-3;
    cfg.train.epochs = 200;
    cfg.train.max_seconds = Some(840.0);
    cfg.train.seed = 2024;
    cfg
}

struct Trained {
    model: Vsdn,
    test: Vec<TimeSeries>,
    metrics: Metrics,
}

fn train_and_score(cfg: &Config, label: &str) -> vsdn::Result<Trained> {
    let splits = cfg.data.build(cfg.train.seed)?;
    let model = Vsdn::new(cfg.model.clone(), cfg.train.seed)?;
    let t = Instant::now();
    let out = train(model, cfg, &splits, |row| {
        if row.split == "val" && row.epoch % 10 == 0 {
            eprintln!("  [{label}] epoch {} val bound/frame {:.4}", row.epoch, row.report.vae_bound / row.report.n_frames as f64);
        }
    })?;
    eprintln!("  [{label}] {} epochs in {:.0}s, best epoch {}", out.epochs_run, t.elapsed().as_secs_f64(), out.best_epoch);
    let metrics = evaluate_prediction(&out.model, &splits.test, cfg.model.prediction_samples, cfg.train.seed)?;
    Ok(Trained { model: out.model, test: splits.test, metrics })
}

fn criterion_1(trained: &vsdn::Result<Trained>, ablation: &vsdn::Result<Trained>) -> Outcome {
    let (full, base) = match (trained, ablation) {
        (Ok(f), Ok(b)) => (f, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("training failed: {e}")),
    };
    let (nll, mse, abl) = (full.metrics.nll_per_frame, full.metrics.mse, base.metrics.nll_per_frame);
    let gap = abl - nll;
    outcome(
        nll <= -0.90 && mse <= 0.010 && gap >= 0.05,
        format!(
            "prediction NLL/frame {nll:.4} (<= -0.90), MSE {mse:.5} (<= 0.010), no-latent NLL {abl:.4}, gap {gap:.4} (>= 0.05), {} frames",
            full.metrics.n_frames
        ),
    )
}

fn criterion_2(trained: &vsdn::Result<Trained>) -> Outcome {
    let Ok(t) = trained else { return outcome(false, "no trained model".into()) };
    let series: Vec<TimeSeries> = t.test.iter().take(10).cloned().collect();
    let start = Instant::now();
    match verify::bound_ordering_sweep(&t.model, &series, &[1, 5, 25], 500, 77) {
        Ok(rows) => {
            let v = verify::assess_ordering(&rows);
            let table: Vec<String> = rows
                .iter()
                .map(|r| format!("K={} iwae {:.3}±{:.3} vae {:.3}±{:.3}", r.k, r.iwae_mean, r.iwae_se, r.vae_mean, r.vae_se))
                .collect();
            let secs = start.elapsed().as_secs_f64();
            outcome(
                v.passes(3.0, 4.0) && secs <= 300.0,
                format!(
                    "{}; worst decrease {:.2} se (<= 3), K=1 gap {:.2} se (<= 4), {secs:.0}s",
                    table.join("; "),
                    v.worst_decrease_se,
                    v.k1_gap_se.unwrap_or(f64::NAN)
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let grid = [0.5, 1.0, 2.0];
    let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut fails = Vec::new();
    for &gap in &grid {
        for &r in &grid {
            match verify::kl_mc_oracle(gap, 0.0, r, 1.0, 1e-3, 50_000, 31) {
                Ok(rep) => {
                    let e = rep.rel_err();
                    if e > worst.0 {
                        worst = (e, gap, r);
                    }
                    if !(e < 0.02) {
                        fails.push(format!("gap {gap} r {r}: {:.2}%", 100.0 * e));
                    }
                }
                Err(e) => fails.push(e.to_string()),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        fails.is_empty() && secs <= 120.0,
        format!(
            "worst relative error {:.2}% at gap {} r_g {} (< 2%); {} of 9 cells over; {secs:.0}s{}",
            100.0 * worst.0,
            worst.1,
            worst.2,
            fails.len(),
            if fails.is_empty() { String::new() } else { format!(" [{}]", fails.join(", ")) }
        ),
    )
}

fn criterion_4() -> Outcome {
    match verify::logw_identity_check(10_000, 4) {
        Ok(worst) => outcome(worst <= 1e-12, format!("max |logw - log density ratio| {worst:.3e} over 10^4 steps (<= 1e-12)")),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_5() -> Outcome {
    let cfg = VsdnConfig { d1: 2, d2: 2, d_h: 4, ..Default::default() };
    let run = || -> vsdn::Result<verify::GradCheckReport> {
        let model = Vsdn::new(cfg.clone(), 13)?;
        let series = verify::toy_series()?;
        verify::gradient_check(&model, &series, cfg.k, 5, 1e-5, 1e-6)
    };
    match run() {
        Ok(r) => outcome(r.max_rel_err < 1e-4, format!("max relative error {:.3e} over {} parameters (< 1e-4)", r.max_rel_err, r.n_params)),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    match verify::noise_injection_experiment(0.1, 1.0, 0.5, 100, 10_000, 6) {
        Ok(r) => {
            let secs = start.elapsed().as_secs_f64();
            outcome(
                r.passes(1e-10) && secs <= 60.0,
                format!(
                    "closed-form max error {:.2e} (<= 1e-10); drift-gradient variance {:e} state-free (= 0), {:.3e} state-dependent (> 0); {secs:.1}s",
                    r.max_abs_err, r.state_free_phi_var, r.state_dependent_phi_var
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_7() -> Outcome {
    let run = || -> vsdn::Result<verify::DiffusionSensitivity> {
        let model = Vsdn::new(VsdnConfig { mode: InferenceMode::Smoothing, ..Default::default() }, 71)?;
        let cfg = vsdn::train::DataConfig { n_seq: 1, ..Default::default() };
        let series = cfg.generate(71, false)?.remove(0);
        verify::diffusion_state_sensitivity(&model, &series, 0.7, 3)
    };
    match run() {
        Ok(r) => outcome(
            r.max_diffusion_change == 0.0 && r.min_state_change > 0.0,
            format!(
                "{} nodes: min latent change {:.3e} (> 0), max diffusion change {:e} (= 0)",
                r.nodes, r.min_state_change, r.max_diffusion_change
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_8() -> Outcome {
    let run = || -> vsdn::Result<(usize, usize, usize, bool)> {
        let mut cfg = Config::default();
        cfg.data.n_seq = 200;
        let series = cfg.data.generate(8, false)?;
        let mut variants = 0;
        let mut mismatches = 0;
        for mode in [InferenceMode::Filtering, InferenceMode::Smoothing] {
            let model = Vsdn::new(VsdnConfig { mode, ..Default::default() }, 8)?;
            for s in series.iter().take(3) {
                let r = verify::mask_soundness(&model, s, 8)?;
                variants += r.variants;
                mismatches += r.mismatches;
            }
        }
        let thinned = series
            .iter()
            .map(|s| holdout_frames(s, 0.5, 8).map(|(kept, _)| kept))
            .collect::<vsdn::Result<Vec<_>>>()?;
        let splits = vsdn::data::split_dataset(thinned, 0.7, 0.15, 8)?;
        cfg.train.epochs = 5;
        cfg.train.batch_size = 50;
        cfg.train.learning_rate = 1e-3;
        let model = Vsdn::new(cfg.model.clone(), 8)?;
        let out = train(model, &cfg, &splits, |_| {})?;
        let finite = out.epochs_run == 5 && out.history.iter().all(|h| h.report.vae_bound.is_finite());
        Ok((variants, mismatches, out.epochs_run, finite))
    };
    match run() {
        Ok((variants, mismatches, epochs, finite)) => outcome(
            mismatches == 0 && finite,
            format!("{mismatches} of {variants} masked-cell perturbations changed an output; half-frame data trained {epochs} epochs, finite: {finite}"),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_9() -> Outcome {
    let m = verify::euler_ou_moments(1.5, 0.8, 0.01, 100, 100_000, 9);
    outcome(
        m.passes(3.0, 0.05),
        format!(
            "mean {:.5} vs {:.5} ({:.2} se, <= 3); variance {:.5} vs {:.5} ({:.2}%, <= 5%)",
            m.mean,
            m.want_mean,
            (m.mean - m.want_mean).abs() / m.mean_se,
            m.var,
            m.want_var,
            100.0 * (m.var / m.want_var - 1.0).abs()
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("VSDN_ACCEPT_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        println!("{} criterion {n}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o));
    };

    if wanted(1) || wanted(2) {
        let cfg = double_ou_config();
        let start = Instant::now();
        let trained = train_and_score(&cfg, "latent");
        if let (Ok(t), Ok(path)) = (&trained, std::env::var("VSDN_ACCEPT_CHECKPOINT")) {
            if let Err(e) = Checkpoint::from_model(&cfg, &t.model, 0).save(&path) {
                eprintln!("  cannot save checkpoint: {e}");
            }
        }
        if wanted(1) {
            let mut abl = cfg.clone();
            abl.model.latent = false;
            let ablation = train_and_score(&abl, "no latent");
            let mut o = criterion_1(&trained, &ablation);
            let secs = start.elapsed().as_secs_f64();
            o.detail.push_str(&format!(", {secs:.0}s (<= 1800)"));
            o.pass &= secs <= 1800.0;
            report(1, o);
        }
        if wanted(2) {
            report(2, criterion_2(&trained));
        }
    }
    let rest: [(usize, fn() -> Outcome); 7] =
        [(3, criterion_3), (4, criterion_4), (5, criterion_5), (6, criterion_6), (7, criterion_7), (8, criterion_8), (9, criterion_9)];
    for (n, f) in rest {
        if wanted(n) {
            report(n, f());
        }
    }
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
