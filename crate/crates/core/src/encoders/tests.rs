use ndarray::{array, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{ParamStore, Tape};
use crate::data::TimeSeries;
use crate::sde::build_time_grid;

fn encoder() -> (ParamStore, OdeRnn) {
    let mut store = ParamStore::new();
    let enc = OdeRnn::new(&mut store, "enc", 2, 4, 6, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    (store, enc)
}

fn series(values: Array2<f64>) -> TimeSeries {
    let mask = array![[true, false], [true, true], [false, true]];
    TimeSeries::new(0, vec![0.2, 0.5, 0.8], values, mask).unwrap()
}

fn base() -> Array2<f64> {
    array![[0.3, 0.0], [-1.0, 0.4], [0.0, 2.0]]
}

#[test]
fn empty_observation_set_is_pure_flow() {
    let (store, enc) = encoder();
    let grid = build_time_grid(&[], 0.25, 1.0).unwrap();
    let tape = Tape::no_grad();
    let p = tape.bind(&store);
    let obs = vec![None; grid.len()];
    let f = enc.run_forward(&p, &tape, &grid, &obs, 1).unwrap();
    assert!(f.post.iter().all(Option::is_none));
    let mut h = store.by_name("enc.h0").unwrap().clone();
    for i in 0..grid.len() {
        assert_eq!(f.pre[i].value(), &h);
        if i + 1 < grid.len() {
            let dh = enc_flow(&store, &h);
            h = &h + &(dh * grid.dt()[i]);
        }
    }
}

fn enc_flow(store: &ParamStore, h: &Array2<f64>) -> Array2<f64> {
    let w0 = store.by_name("enc.flow.w0").unwrap();
    let b0 = store.by_name("enc.flow.b0").unwrap();
    let w1 = store.by_name("enc.flow.w1").unwrap();
    let b1 = store.by_name("enc.flow.b1").unwrap();
    (h.dot(w0) + b0).mapv(f64::tanh).dot(w1) + b1
}

#[test]
fn pre_features_only_see_the_strict_past() {
    let (store, enc) = encoder();
    let s = series(base());
    let grid = build_time_grid(s.times(), 0.1, 1.0).unwrap();
    let a = enc.encode_forward(&store, &s, &grid).unwrap();
    for n in 0..3 {
        let mut v = base();
        v[[n, 0]] += 0.7;
        v[[n, 1]] -= 0.3;
        let b = enc.encode_forward(&store, &series(v), &grid).unwrap();
        let tn = s.times()[n];
        for (i, &t) in grid.nodes().iter().enumerate() {
            let same = a.pre_features.row(i) == b.pre_features.row(i);
            assert_eq!(same, t <= tn, "obs {n} node {i}");
        }
        for m in 0..3 {
            let same = a.post_features.row(m) == b.post_features.row(m);
            assert_eq!(same, m < n, "obs {n} post {m}");
        }
    }
}

#[test]
fn back_features_only_see_the_present_and_future() {
    let (store, enc) = encoder();
    let s = series(base());
    let grid = build_time_grid(s.times(), 0.1, 1.0).unwrap();
    let a = enc.encode_backward(&store, &s, &grid).unwrap();
    for n in 0..3 {
        let mut v = base();
        v[[n, 0]] += 0.7;
        v[[n, 1]] += 0.2;
        let b = enc.encode_backward(&store, &series(v), &grid).unwrap();
        let tn = s.times()[n];
        for (i, &t) in grid.nodes().iter().enumerate() {
            assert_eq!(a.row(i) == b.row(i), t > tn, "obs {n} node {i}");
        }
    }
}

#[test]
fn masked_out_cells_never_leak() {
    let (store, enc) = encoder();
    let grid = build_time_grid(&[0.2, 0.5, 0.8], 0.1, 1.0).unwrap();
    let mut v = base();
    v[[0, 1]] = 123.0;
    v[[2, 0]] = -9e9;
    let a = enc.encode_forward(&store, &series(base()), &grid).unwrap();
    let b = enc.encode_forward(&store, &series(v.clone()), &grid).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        enc.encode_backward(&store, &series(base()), &grid).unwrap(),
        enc.encode_backward(&store, &series(v), &grid).unwrap()
    );
}

#[test]
fn batched_rows_match_single_series() {
    let (store, enc) = encoder();
    let s1 = series(base());
    let s2 = TimeSeries::new(1, vec![0.1, 0.5], array![[1.0, 1.0], [0.0, -0.5]], array![[true, true], [false, true]]).unwrap();
    let grid = build_time_grid(&[0.1, 0.2, 0.5, 0.8], 0.1, 0.8).unwrap();
    let tape = Tape::no_grad();
    let p = tape.bind(&store);
    let obs = gather_observations(&[&s1, &s2], &grid).unwrap();
    let f = enc.run_forward(&p, &tape, &grid, &obs, 2).unwrap();
    for (r, s) in [&s1, &s2].into_iter().enumerate() {
        let single = enc.encode_forward(&store, s, &grid).unwrap();
        for i in 0..grid.len() {
            for c in 0..4 {
                assert!((f.pre[i].value()[[r, c]] - single.pre_features[[i, c]]).abs() < 1e-14);
            }
        }
    }
}
