use vsdn::data::{split_dataset, Splits, TimeSeries};
use vsdn::model::Vsdn;
use vsdn::train::{
    evaluate_prediction, prediction_scores, train, write_history, Checkpoint, Config, HistoryRow, TrainOutcome,
};

fn small_config() -> Config {
    let mut cfg = Config::default();
    cfg.data.n_seq = 16;
    cfg.data.horizon = 1.0;
    cfg.model.d1 = 3;
    cfg.model.d_h = 4;
    cfg.model.mlp_hidden = 6;
    cfg.model.max_dt = 0.05;
    cfg.model.k = 2;
    cfg.train.epochs = 4;
    cfg.train.batch_size = 4;
    cfg.train.patience = 2;
    cfg.train.learning_rate = 1e-2;
    cfg
}

fn run(cfg: &Config) -> (Splits, TrainOutcome) {
    let splits = cfg.data.build(cfg.train.seed).unwrap();
    let model = Vsdn::new(cfg.model.clone(), cfg.train.seed).unwrap();
    let out = train(model, cfg, &splits, |_| {}).unwrap();
    (splits, out)
}

fn history_without_wall_time(rows: &[HistoryRow]) -> String {
    let mut buf = Vec::new();
    write_history(&mut buf, rows).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn fixed_seed_gives_identical_history() {
    let cfg = small_config();
    let (_, a) = run(&cfg);
    let (_, b) = run(&cfg);
    assert_eq!(history_without_wall_time(&a.history), history_without_wall_time(&b.history));
    assert_eq!(a.model.store().flatten(), b.model.store().flatten());
}

#[test]
fn returned_model_is_the_best_validation_epoch() {
    let cfg = small_config();
    let (_, out) = run(&cfg);
    let vals: Vec<f64> = out.history.iter().filter(|r| r.split == "val").map(|r| r.report.vae_bound).collect();
    let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best_val_bound, best);
    assert_eq!(vals[out.best_epoch - 1], best);
    assert!(out.epochs_run <= out.best_epoch + cfg.train.patience);
}

#[test]
fn patience_one_stops_one_epoch_after_the_last_improvement() {
    let mut cfg = small_config();
    cfg.train.patience = 1;
    cfg.train.epochs = 30;
    cfg.train.learning_rate = 0.5;
    let (_, out) = run(&cfg);
    assert_eq!(out.epochs_run, out.best_epoch + 1);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let cfg = small_config();
    let (splits, out) = run(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    Checkpoint::from_model(&cfg, &out.model, out.best_epoch as u64).save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.config, cfg);
    let model = loaded.to_model().unwrap();
    let a = evaluate_prediction(&out.model, &splits.test, 3, 1).unwrap();
    let b = evaluate_prediction(&model, &splits.test, 3, 1).unwrap();
    assert_eq!((a.nll_per_frame, a.mse, a.n_frames), (b.nll_per_frame, b.mse, b.n_frames));
}

#[test]
fn evaluation_is_deterministic_and_independent_of_grouping() {
    let cfg = small_config();
    let splits = cfg.data.build(3).unwrap();
    let model = Vsdn::new(cfg.model.clone(), 3).unwrap();
    let data = &splits.train;
    let a = evaluate_prediction(&model, data, 1, 5).unwrap();
    let b = evaluate_prediction(&model, data, 1, 5).unwrap();
    assert_eq!((a.nll_per_frame, a.mse), (b.nll_per_frame, b.mse));
    let whole = prediction_scores(&model, data, 4, 9).unwrap();
    let (left, right) = data.split_at(data.len() / 2);
    let mut parts = prediction_scores(&model, left, 4, 9).unwrap();
    parts.extend(prediction_scores(&model, right, 4, 9).unwrap());
    assert_eq!(whole, parts);
}

#[test]
fn empty_validation_split_is_a_config_error() {
    let cfg = small_config();
    let series: Vec<TimeSeries> = cfg.data.generate(0, false).unwrap();
    let splits = split_dataset(series, 1.0, 0.0, 0).unwrap();
    let model = Vsdn::new(cfg.model.clone(), 0).unwrap();
    assert!(matches!(train(model, &cfg, &splits, |_| {}), Err(vsdn::Error::Config(_))));
}

#[test]
fn dimension_mismatch_is_rejected() {
    let mut cfg = small_config();
    cfg.data.csv = Some("unused.csv".into());
    cfg.model.d2 = 3;
    let splits = small_config().data.build(0).unwrap();
    let model = Vsdn::new(cfg.model.clone(), 0).unwrap();
    assert!(matches!(train(model, &cfg, &splits, |_| {}), Err(vsdn::Error::Config(_))));
}
