use crate::autodiff::Tensor;
use crate::rng::RngStream;

pub const UNIFORM_RANGE: f64 = 0.05;

pub fn uniform(shape: &[usize], rng: &mut RngStream) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| rng.uniform_range(-UNIFORM_RANGE, UNIFORM_RANGE))
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Glorot/Xavier uniform draw for an `input × output` weight matrix.
pub fn glorot(input: usize, output: usize, rng: &mut RngStream) -> Tensor {
    let limit = (6.0 / (input + output) as f64).sqrt();
    let data = (0..input * output).map(|_| rng.uniform_range(-limit, limit)).collect();
    Tensor::new(vec![input, output], data).unwrap()
}

/// Random `n×n` orthogonal matrix (Gram-Schmidt on a Gaussian draw).
pub fn orthogonal_square(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        for u in &q {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            q.push(v);
        }
    }
    q.into_iter().flatten().collect()
}

/// Recurrent weight `h × (blocks·h)` made of independent orthogonal blocks.
pub fn orthogonal_blocks(h: usize, blocks: usize, rng: &mut RngStream) -> Tensor {
    let mut data = vec![0.0; h * h * blocks];
    for b in 0..blocks {
        let block = orthogonal_square(h, rng);
        for i in 0..h {
            for j in 0..h {
                data[i * h * blocks + b * h + j] = block[i * h + j];
            }
        }
    }
    Tensor::new(vec![h, h * blocks], data).unwrap()
}
