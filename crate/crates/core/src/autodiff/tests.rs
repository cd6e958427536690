use ndarray::{array, Array2};
use proptest::prelude::*;

use super::*;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn product_rule() {
    let mut store = ParamStore::new();
    let x = store.add("x", array![[3.0]]);
    let y = store.add("y", array![[4.0]]);
    let tape = Tape::new();
    let p = tape.bind(&store);
    let root = p[x.0].mul(&p[y.0]);
    let g = tape.backward(&root, &store).unwrap();
    assert_eq!(g.get("x").unwrap()[[0, 0]], 4.0);
    assert_eq!(g.get("y").unwrap()[[0, 0]], 3.0);
}

#[test]
fn logsumexp_of_equal_inputs_splits_gradient() {
    let mut store = ParamStore::new();
    let a = store.add("a", array![[0.7, 0.7]]);
    let tape = Tape::new();
    let p = tape.bind(&store);
    let root = p[a.0].logsumexp();
    let g = tape.backward(&root, &store).unwrap();
    let ga = g.get("a").unwrap();
    assert!((ga[[0, 0]] - 0.5).abs() < 1e-15 && (ga[[0, 1]] - 0.5).abs() < 1e-15);
}

#[test]
fn non_scalar_root_is_rejected() {
    let mut store = ParamStore::new();
    let a = store.add("a", array![[1.0, 2.0]]);
    let tape = Tape::new();
    let p = tape.bind(&store);
    assert!(tape.backward(&p[a.0], &store).is_err());
}

#[test]
fn unused_parameters_get_zero_gradient() {
    let mut store = ParamStore::new();
    let a = store.add("a", array![[2.0]]);
    store.add("unused", array![[1.0, 1.0]]);
    let tape = Tape::new();
    let p = tape.bind(&store);
    let root = p[a.0].square();
    let g = tape.backward(&root, &store).unwrap();
    assert_eq!(g.get("a").unwrap()[[0, 0]], 4.0);
    assert!(g.get("unused").unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn no_grad_tape_records_nothing() {
    let mut store = ParamStore::new();
    let a = store.add("a", array![[2.0]]);
    let tape = Tape::no_grad();
    let p = tape.bind(&store);
    let root = p[a.0].square().exp();
    assert!(tape.is_empty());
    assert!((root.scalar() - 4f64.exp()).abs() < 1e-12);
}

#[test]
fn logsumexp_examples() {
    assert!((logsumexp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
    assert_eq!(logsumexp(&[1000.0, 1000.0]).unwrap(), 1000.0 + 2f64.ln());
    assert_eq!(logsumexp(&[-3.25]).unwrap(), -3.25);
    assert!(logsumexp(&[]).is_err());
}

#[test]
fn broadcasting_ops_reduce_gradients() {
    let mut store = ParamStore::new();
    let m = store.add("m", array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
    let row = store.add("row", array![[0.5, -1.0]]);
    let col = store.add("col", array![[1.0], [2.0], [3.0]]);
    let tape = Tape::new();
    let p = tape.bind(&store);
    let root = p[m.0].add(&p[row.0]).mul(&p[col.0]).sum();
    let g = tape.backward(&root, &store).unwrap();
    // d/drow = sum of col over rows = 6 per column
    assert_eq!(g.get("row").unwrap(), &array![[6.0, 6.0]]);
    assert_eq!(g.get("col").unwrap(), &array![[2.5], [6.5], [10.5]]);
}

#[test]
fn repeat_rows_layout_and_gradient() {
    let mut store = ParamStore::new();
    let a = store.add("a", array![[1.0, 2.0], [3.0, 4.0]]);
    let tape = Tape::new();
    let p = tape.bind(&store);
    let r = p[a.0].repeat_rows(3);
    assert_eq!(r.rows(), 6);
    assert_eq!(r.value().row(2).to_vec(), vec![1.0, 2.0]);
    assert_eq!(r.value().row(3).to_vec(), vec![3.0, 4.0]);
    let w = tape.constant(Array2::from_shape_fn((6, 2), |(i, _)| i as f64));
    let g = tape.backward(&r.mul(&w).sum(), &store).unwrap();
    assert_eq!(g.get("a").unwrap(), &array![[3.0, 3.0], [12.0, 12.0]]);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut store = ParamStore::new();
    store.add("w", array![[1.0]]);
    let mut grads = Gradients::zeros_like(&store);
    grads.accumulate(ParamId(0), &array![[0.5]]);
    let hyper = AdamHyper { learning_rate: 1e-4, weight_decay: 0.0, ..AdamHyper::default() };
    adam_step(&mut store, &grads, &hyper).unwrap();
    let delta = store.by_name("w").unwrap()[[0, 0]] - 1.0;
    assert!((delta + 1e-4).abs() < 1e-10, "delta {delta}");
    assert_eq!(store.step_count(), 1);
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut store = ParamStore::new();
    store.add("w", array![[1.0, -2.0]]);
    let grads = Gradients::zeros_like(&store);
    let hyper = AdamHyper { weight_decay: 0.0, ..AdamHyper::default() };
    for _ in 0..3 {
        adam_step(&mut store, &grads, &hyper).unwrap();
    }
    assert_eq!(store.by_name("w").unwrap(), &array![[1.0, -2.0]]);
    assert_eq!(store.step_count(), 3);
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let mut store = ParamStore::new();
        store.add("w", array![[0.3, -0.7]]);
        let mut grads = Gradients::zeros_like(&store);
        grads.accumulate(ParamId(0), &array![[0.1, 2.0]]);
        let hyper = AdamHyper::default();
        adam_step(&mut store, &grads, &hyper).unwrap();
        adam_step(&mut store, &grads, &hyper).unwrap();
        store.flatten()
    };
    let a = run();
    let b = run();
    assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
}

#[test]
fn adam_rejects_non_finite_gradient_by_name() {
    let mut store = ParamStore::new();
    store.add("fine", array![[1.0]]);
    store.add("broken", array![[1.0]]);
    let mut grads = Gradients::zeros_like(&store);
    grads.accumulate(ParamId(1), &array![[f64::NAN]]);
    match adam_step(&mut store, &grads, &AdamHyper::default()) {
        Err(crate::Error::NonFiniteGradient(name)) => assert_eq!(name, "broken"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(store.step_count(), 0);
}

#[test]
fn clipping_caps_global_norm() {
    let mut store = ParamStore::new();
    store.add("w", array![[0.0, 0.0]]);
    let mut grads = Gradients::zeros_like(&store);
    grads.accumulate(ParamId(0), &array![[30.0, 40.0]]);
    let before = clip_global_norm(&mut grads, 10.0);
    assert_eq!(before, 50.0);
    assert!((grads.global_norm() - 10.0).abs() < 1e-12);
}

/// A graph touching every primitive: add, multiply, matmul, tanh, relu,
/// sigmoid, exp, log, softplus, logsumexp, sum, mean.
fn composite(store: &ParamStore, tape: &Tape) -> f64 {
    let p = tape.bind(store);
    let (a, b, v) = (&p[0], &p[1], &p[2]);
    let h = a.tanh().matmul(b).softplus().mean();
    let s = a.sigmoid().mul(&v.exp()).sum();
    let r = a.relu().matmul(b).logsumexp();
    let l = a.square().add_scalar(1.0).ln().sum();
    let d = a.sub(v).mul(a).mean();
    let root = h.add(&s).add(&r.scale(0.5)).add(&l).sub(&d);
    root.scalar()
}

fn composite_store(vals: &[f64]) -> ParamStore {
    let mut store = ParamStore::new();
    store.add("a", Array2::from_shape_vec((3, 4), vals[0..12].to_vec()).unwrap());
    store.add("b", Array2::from_shape_vec((4, 2), vals[12..20].to_vec()).unwrap());
    store.add("v", Array2::from_shape_vec((1, 4), vals[20..24].to_vec()).unwrap());
    store
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradients_agree_with_finite_differences(vals in proptest::collection::vec(-2.0f64..2.0, 24)) {
        // keep relu inputs away from the kink
        prop_assume!(vals[0..12].iter().all(|x| x.abs() > 1e-3));
        let store = composite_store(&vals);
        let tape = Tape::new();
        let p = tape.bind(&store);
        let (a, b, v) = (&p[0], &p[1], &p[2]);
        let h = a.tanh().matmul(b).softplus().mean();
        let s = a.sigmoid().mul(&v.exp()).sum();
        let r = a.relu().matmul(b).logsumexp();
        let l = a.square().add_scalar(1.0).ln().sum();
        let d = a.sub(v).mul(a).mean();
        let root = h.add(&s).add(&r.scale(0.5)).add(&l).sub(&d);
        let g = tape.backward(&root, &store).unwrap().flatten();

        let mut probe = store.clone();
        let fd = finite_diff_oracle(|x| { probe.set_flat(x); composite(&probe, &Tape::no_grad()) }, &vals, 1e-5).unwrap();
        for (i, (x, y)) in g.iter().zip(&fd).enumerate() {
            prop_assert!(rel_err(*x, *y) < 1e-4, "coord {} autodiff {} fd {}", i, x, y);
        }
    }

    #[test]
    fn logsumexp_is_shift_invariant(v in proptest::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let lhs = logsumexp(&shifted).unwrap();
        let rhs = logsumexp(&v).unwrap() + c;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }
}
