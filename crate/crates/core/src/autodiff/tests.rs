use super::*;
use crate::rng::RngStream;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Central-difference gradient of `f` at `x`.
fn numeric_grad(x: &Tensor, f: &dyn Fn(&Tensor) -> f64) -> Vec<f64> {
    let h = 1e-5;
    (0..x.numel())
        .map(|k| {
            let mut plus = x.clone();
            plus.data_mut()[k] += h;
            let mut minus = x.clone();
            minus.data_mut()[k] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn matmul_examples() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::matrix(&[&[1.0, 2.0], &[3.0, 4.0]]));
    let id = g.constant(Tensor::matrix(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let p = g.matmul(a, id).unwrap();
    assert_eq!(g.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);

    let a = g.constant(Tensor::matrix(&[&[1.0, 2.0, 1.0]]));
    let b = g.constant(Tensor::matrix(&[&[2.0], &[0.0], &[1.0]]));
    let p = g.matmul(a, b).unwrap();
    assert_eq!(g.value(p).data(), &[3.0]);

    let z = g.constant(Tensor::zeros(&[2, 3]));
    let any = g.constant(Tensor::full(&[3, 4], 7.5));
    let p = g.matmul(z, any).unwrap();
    assert_eq!(g.shape(p), &[2, 4]);
    assert!(g.value(p).data().iter().all(|&v| v == 0.0));
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    let msg = g.matmul(a, b).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]"), "{}", msg);
}

#[test]
fn concat_examples() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::vector(vec![1.0, 2.0]));
    let b = g.constant(Tensor::vector(vec![3.0, 4.0, 5.0]));
    let c = g.concat(&[a, b]).unwrap();
    assert_eq!(g.shape(c), &[5]);

    let single = g.concat(&[a]).unwrap();
    assert_eq!(g.value(single), g.value(a));

    let l = g.constant(Tensor::matrix(&[&[1.0], &[2.0]]));
    let r = g.constant(Tensor::matrix(&[&[3.0], &[4.0]]));
    let c = g.concat(&[l, r]).unwrap();
    assert_eq!(g.value(c), &Tensor::matrix(&[&[1.0, 3.0], &[2.0, 4.0]]));

    let bad = g.constant(Tensor::zeros(&[3, 1]));
    assert!(matches!(g.concat(&[l, bad]), Err(Error::Shape(_))));
}

#[test]
fn softmax_examples() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![0.0, 0.0, 0.0]));
    let s = g.softmax(x, 0).unwrap();
    for &v in g.value(s).data() {
        assert!(close(v, 1.0 / 3.0, 1e-15));
    }

    let x = g.constant(Tensor::vector(vec![1000.0, 1000.0]));
    let s = g.softmax(x, 0).unwrap();
    assert_eq!(g.value(s).data(), &[0.5, 0.5]);

    let x = g.constant(Tensor::vector(vec![0.0, 3f64.ln()]));
    let s = g.softmax(x, 0).unwrap();
    assert!(close(g.value(s).data()[0], 0.25, 1e-15));
    assert!(close(g.value(s).data()[1], 0.75, 1e-15));

    let x = g.constant(Tensor::vector(vec![0.0, f64::NAN]));
    assert!(matches!(g.softmax(x, 0), Err(Error::Numeric(_))));
}

#[test]
fn softmax_rows_and_columns() {
    let t = Tensor::matrix(&[&[1.0, 2.0, 3.0], &[-1.0, 0.5, 9.0]]);
    let rows = softmax(&t, 1).unwrap();
    for r in 0..2 {
        assert!(close(rows.row_slice(r).iter().sum::<f64>(), 1.0, 1e-12));
    }
    let cols = softmax(&t, 0).unwrap();
    for c in 0..3 {
        assert!(close(cols.at(0, c) + cols.at(1, c), 1.0, 1e-12));
    }
}

#[test]
fn cross_entropy_examples() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::matrix(&[&[0.3, 0.3, 0.3, 0.3]]));
    let l = g.cross_entropy(x, &[2]).unwrap();
    assert!(close(g.value(l).item(), 4f64.ln(), 1e-12));

    let x = g.constant(Tensor::matrix(&[&[80.0, 0.0, 0.0]]));
    let l = g.cross_entropy(x, &[0]).unwrap();
    assert!(g.value(l).item() < 1e-30);

    let x = g.constant(Tensor::matrix(&[&[0.0, 3f64.ln()]]));
    let l = g.cross_entropy(x, &[1]).unwrap();
    assert!(close(g.value(l).item(), -(0.75f64.ln()), 1e-12));

    assert!(matches!(g.cross_entropy(x, &[2]), Err(Error::Index(_))));
}

#[test]
fn cross_entropy_gradient_is_softmax_minus_onehot_over_n() {
    let mut g = Graph::new();
    let logits = Tensor::matrix(&[&[0.1, -0.4, 1.2], &[2.0, 0.0, -1.0]]);
    let x = g.var(logits.clone());
    let l = g.cross_entropy(x, &[2, 1]).unwrap();
    g.backward(l).unwrap();
    let p = softmax(&logits, 1).unwrap();
    let grad = g.grad(x).unwrap();
    for r in 0..2 {
        for c in 0..3 {
            let onehot = if (r, c) == (0, 2) || (r, c) == (1, 1) { 1.0 } else { 0.0 };
            assert!(close(grad.at(r, c), (p.at(r, c) - onehot) / 2.0, 1e-15));
        }
    }
}

#[test]
fn leaky_relu_examples() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![-10.0, 0.0, 10.0]));
    let y = g.leaky_relu(x, 0.1);
    assert_eq!(g.value(y).data(), &[-1.0, 0.0, 10.0]);
    let y = g.leaky_relu(x, 1.0);
    assert_eq!(g.value(y), g.value(x));

    let x0 = Tensor::vector(vec![-2.0]);
    let x = g.var(x0.clone());
    let y = g.leaky_relu(x, 0.1);
    let s = g.sum(y);
    g.backward(s).unwrap();
    let fd = numeric_grad(&x0, &|t| if t.data()[0] > 0.0 { t.data()[0] } else { 0.1 * t.data()[0] });
    assert!(close(g.grad(x).unwrap().data()[0], 0.1, 1e-15));
    assert!(close(fd[0], 0.1, 1e-9));

    // subgradient at zero is the slope
    let mut g = Graph::new();
    let x = g.var(Tensor::vector(vec![0.0]));
    let y = g.leaky_relu(x, 0.1);
    let s = g.sum(y);
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[0.1]);
}

#[test]
fn backward_examples() {
    let mut g = Graph::new();
    let x0 = Tensor::vector(vec![3.0]);
    let x = g.var(x0.clone());
    let sq = g.mul(x, x).unwrap();
    let loss = g.sum(sq);
    g.backward(loss).unwrap();
    let fd = numeric_grad(&x0, &|t| t.data()[0] * t.data()[0]);
    assert!(close(g.grad(x).unwrap().data()[0], 6.0, 1e-12));
    assert!(close(fd[0], 6.0, 1e-6));

    let mut g = Graph::new();
    let x = g.var(Tensor::vector(vec![1.0, 2.0]));
    let c = g.constant(Tensor::scalar(4.0));
    let _unused = g.scalar_mul(x, 3.0);
    let loss = g.sum(c);
    g.backward(loss).unwrap();
    assert!(g.grad(x).is_none() || g.grad(x).unwrap().data().iter().all(|&v| v == 0.0));

    let mut g = Graph::new();
    let x = g.var(Tensor::scalar(5.0));
    let y = g.scalar_mul(x, 2.0);
    g.backward(y).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[2.0]);
}

#[test]
fn backward_rejects_non_scalar() {
    let mut g = Graph::new();
    let x = g.var(Tensor::vector(vec![1.0, 2.0]));
    assert!(matches!(g.backward(x), Err(Error::Contract(_))));
}

#[test]
fn repeated_backward_accumulates_until_zeroed() {
    let mut g = Graph::new();
    let x = g.var(Tensor::scalar(1.5));
    let y = g.mul(x, x).unwrap();
    let t = g.tanh(y);
    g.backward(t).unwrap();
    let once = g.grad(x).unwrap().data()[0];
    g.backward(t).unwrap();
    assert!(close(g.grad(x).unwrap().data()[0], 2.0 * once, 1e-15));
    g.zero_grads();
    g.backward(t).unwrap();
    assert!(close(g.grad(x).unwrap().data()[0], once, 1e-15));
}

#[test]
fn fan_out_accumulates_both_consumers() {
    let x0 = Tensor::vector(vec![0.7, -1.3]);
    let f = |g: &mut Graph, x: NodeId| {
        let a = g.sigmoid(x);
        let b = g.tanh(x);
        let p = g.mul(a, b).unwrap();
        g.sum(p)
    };
    let mut g = Graph::new();
    let x = g.var(x0.clone());
    let loss = f(&mut g, x);
    g.backward(loss).unwrap();
    let fd = numeric_grad(&x0, &|t| {
        let mut g = Graph::new();
        let x = g.constant(t.clone());
        let l = f(&mut g, x);
        g.value(l).item()
    });
    for (a, n) in g.grad(x).unwrap().data().iter().zip(&fd) {
        assert!(close(*a, *n, 1e-8));
    }
}

#[test]
fn gather_scatter_adds_repeated_rows() {
    let mut g = Graph::new();
    let table = g.var(Tensor::matrix(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]));
    let rows = g.gather(table, &[2, 0, 2]).unwrap();
    assert_eq!(g.value(rows).data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
    let s = g.sum(rows);
    g.backward(s).unwrap();
    assert_eq!(g.grad(table).unwrap().data(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    assert!(matches!(g.gather(table, &[3]), Err(Error::Index(_))));
}

#[test]
fn param_nodes_are_shared_and_exported() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::row(vec![2.0, -1.0]), true);
    let fixed = store.add("fixed", Tensor::row(vec![1.0, 1.0]), false);
    let mut g = Graph::new();
    let a = g.param(&store, w);
    let b = g.param(&store, w);
    assert_eq!(a, b);
    let f = g.param(&store, fixed);
    let p = g.mul(a, f).unwrap();
    let q = g.mul(p, b).unwrap();
    let s = g.sum(q);
    g.backward(s).unwrap();
    g.accumulate_param_grads(&mut store);
    assert_eq!(store.grad(w).data(), &[4.0, -2.0]);
    assert_eq!(store.grad(fixed).data(), &[0.0, 0.0]);
}

#[test]
fn dropout_mask_examples() {
    let mut rng = RngStream::new(11);
    let m = dropout_mask(&[3, 4], 0.0, &mut rng).unwrap();
    assert!(m.data().iter().all(|&v| v == 1.0));

    let mut rng = RngStream::new(5);
    let m = dropout_mask(&[1_000_000], 0.5, &mut rng).unwrap();
    let kept = m.data().iter().filter(|&&v| v != 0.0).count() as f64 / 1e6;
    assert!((kept - 0.5).abs() < 0.01, "kept fraction {}", kept);
    assert!(m.data().iter().all(|&v| v == 0.0 || v == 2.0));

    let a = dropout_mask(&[50], 0.33, &mut RngStream::new(9)).unwrap();
    let b = dropout_mask(&[50], 0.33, &mut RngStream::new(9)).unwrap();
    assert_eq!(a, b);

    assert!(matches!(
        dropout_mask(&[2], 1.0, &mut rng),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn slice_and_sum_axis_roundtrip_values() {
    let mut g = Graph::new();
    let x = g.var(Tensor::matrix(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]));
    let c = g.slice_cols(x, 1, 2).unwrap();
    assert_eq!(g.value(c).data(), &[2.0, 3.0, 5.0, 6.0]);
    let r = g.slice_rows(x, 1, 1).unwrap();
    assert_eq!(g.value(r).data(), &[4.0, 5.0, 6.0]);
    let s = g.sum_axis(x, 1).unwrap();
    assert_eq!(g.shape(s), &[2, 1]);
    assert_eq!(g.value(s).data(), &[6.0, 15.0]);
    let s0 = g.sum_axis(x, 0).unwrap();
    assert_eq!(g.value(s0).data(), &[5.0, 7.0, 9.0]);
    assert!(g.slice_rows(x, 1, 2).is_err());
}
