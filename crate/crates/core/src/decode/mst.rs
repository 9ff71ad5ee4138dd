use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Maximum spanning arborescence rooted at 0 with exactly one root child.
///
/// `scores` is n×(n+1): row i holds the scores of dependent i+1 for every
/// candidate head 0..=n. Returns the head of each dependent.
pub fn decode_tree_mst(scores: &Tensor) -> Result<Vec<usize>> {
    let n = scores.rows();
    if scores.rank() != 2 || scores.cols() != n + 1 {
        return Err(Error::Shape(format!(
            "arc scores must be n×(n+1), got {:?}",
            scores.shape()
        )));
    }
    if n == 0 {
        return Err(Error::Validation("cannot decode an empty sentence".into()));
    }
    if scores.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("arc scores must be finite".into()));
    }
    // w[d][h] over nodes 0..=n; the root has no head and no self-loops.
    let mut w = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    for d in 1..=n {
        for h in 0..=n {
            if h != d {
                w[d][h] = scores.at(d - 1, h);
            }
        }
    }
    let heads = chu_liu_edmonds(&w);
    if heads[1..].iter().filter(|&&h| h == 0).count() == 1 {
        return Ok(heads[1..].to_vec());
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 1..=n {
        let mut constrained = w.clone();
        for (d, row) in constrained.iter_mut().enumerate().skip(1) {
            if d != r {
                row[0] = f64::NEG_INFINITY;
            }
        }
        let heads = chu_liu_edmonds(&constrained);
        let total: f64 = (1..=n).map(|d| w[d][heads[d]]).sum();
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, heads));
        }
    }
    Ok(best.expect("n >= 1").1[1..].to_vec())
}

fn argmax_head(row: &[f64]) -> usize {
    let mut best = 0;
    for (h, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = h;
        }
    }
    best
}

fn find_cycle(heads: &[usize]) -> Option<Vec<usize>> {
    let n = heads.len();
    let mut color = vec![0u8; n];
    color[0] = 2;
    for start in 1..n {
        let mut path = Vec::new();
        let mut v = start;
        while color[v] == 0 {
            color[v] = 1;
            path.push(v);
            v = heads[v];
        }
        if color[v] == 1 {
            let pos = path.iter().position(|&x| x == v).expect("on path");
            let cycle = path[pos..].to_vec();
            return Some(cycle);
        }
        for p in path {
            color[p] = 2;
        }
    }
    None
}

/// Recursive contraction on a dense score matrix `w[dep][head]` whose node 0
/// is the root. Returns a head per node (entry 0 unused).
fn chu_liu_edmonds(w: &[Vec<f64>]) -> Vec<usize> {
    let n = w.len();
    let mut heads = vec![0; n];
    for d in 1..n {
        heads[d] = argmax_head(&w[d]);
    }
    let Some(cycle) = find_cycle(&heads) else {
        return heads;
    };
    let mut in_cycle = vec![false; n];
    for &c in &cycle {
        in_cycle[c] = true;
    }
    // Surviving nodes keep their order; the contracted node goes last.
    let rest: Vec<usize> = (0..n).filter(|&v| !in_cycle[v]).collect();
    let m = rest.len() + 1;
    let c = m - 1;
    let mut sub = vec![vec![f64::NEG_INFINITY; m]; m];
    // For arcs leaving the cycle: which cycle node is the real head.
    let mut out_from = vec![0; m];
    // For the arc entering the cycle from each outside head: which cycle node it enters.
    let mut in_to = vec![0; m];
    for (a, &d) in rest.iter().enumerate() {
        for (b, &h) in rest.iter().enumerate() {
            sub[a][b] = w[d][h];
        }
        let mut best = f64::NEG_INFINITY;
        let mut arg = cycle[0];
        for &h in &cycle {
            if w[d][h] > best {
                best = w[d][h];
                arg = h;
            }
        }
        sub[a][c] = best;
        out_from[a] = arg;
    }
    for (b, &h) in rest.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        let mut arg = cycle[0];
        for &d in &cycle {
            let v = w[d][h] - w[d][heads[d]];
            if v > best {
                best = v;
                arg = d;
            }
        }
        sub[c][b] = best;
        in_to[b] = arg;
    }
    let sub_heads = chu_liu_edmonds(&sub);
    let mut out = heads.clone();
    for (a, &d) in rest.iter().enumerate().skip(1) {
        let h = sub_heads[a];
        out[d] = if h == c { out_from[a] } else { rest[h] };
    }
    let entering_head = sub_heads[c];
    out[in_to[entering_head]] = rest[entering_head];
    out
}
