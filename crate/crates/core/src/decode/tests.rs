use super::*;
use crate::corpus::tree::is_tree;
use crate::rng::RngStream;

fn matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> Tensor {
    let mut data = Vec::with_capacity(n * (n + 1));
    for i in 0..n {
        for j in 0..=n {
            data.push(f(i, j));
        }
    }
    Tensor::new(vec![n, n + 1], data).unwrap()
}

fn random_scores(n: usize, rng: &mut RngStream) -> Tensor {
    let data = (0..n * (n + 1)).map(|_| rng_value(rng)).collect();
    Tensor::new(vec![n, n + 1], data).unwrap()
}

fn rng_value(rng: &mut RngStream) -> f64 {
    rng.uniform_range(-5.0, 5.0)
}

/// Enumerates every head vector and keeps the best single-rooted tree.
fn brute_force(scores: &Tensor) -> (f64, Vec<usize>) {
    let n = scores.rows();
    let mut heads = vec![0; n];
    let mut best = (f64::NEG_INFINITY, Vec::new());
    loop {
        if is_tree(&heads) {
            let s = tree_score(scores, &heads);
            if s > best.0 {
                best = (s, heads.clone());
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            heads[i] += 1;
            if heads[i] <= n {
                break;
            }
            heads[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn tags_argmax_and_ties() {
    let logits = Tensor::matrix(&[&[0.0, 1.0], &[1.0, 0.0], &[2.0, 2.0]]);
    assert_eq!(decode_tags(&logits), vec![1, 0, 0]);
}

#[test]
fn tags_invariant_under_affine_transform() {
    let mut rng = RngStream::new(1);
    for _ in 0..100 {
        let data: Vec<f64> = (0..12).map(|_| rng_value(&mut rng)).collect();
        let t = Tensor::new(vec![3, 4], data.clone()).unwrap();
        let shift = rng_value(&mut rng);
        let scale = rng.uniform_range(0.1, 10.0);
        let moved = Tensor::new(vec![3, 4], data.iter().map(|v| v * scale + shift).collect()).unwrap();
        assert_eq!(decode_tags(&t), decode_tags(&moved));
    }
}

#[test]
fn greedy_returns_cycles() {
    // 1←2 and 2←1 dominate.
    let s = matrix(2, |i, j| if j == 2 - i { 10.0 } else { 0.0 });
    assert_eq!(decode_tree_greedy(&s), vec![2, 1]);
}

#[test]
fn greedy_all_root() {
    let s = matrix(3, |_, j| if j == 0 { 1.0 } else { 0.0 });
    assert_eq!(decode_tree_greedy(&s), vec![0, 0, 0]);
}

#[test]
fn greedy_agrees_with_mst_when_tree() {
    let mut rng = RngStream::new(2);
    let mut checked = 0;
    for _ in 0..2000 {
        let n = 1 + rng.below(5);
        let s = random_scores(n, &mut rng);
        let g = decode_tree_greedy(&s);
        if is_tree(&g) {
            assert_eq!(decode_tree_mst(&s).unwrap(), g);
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn mst_single_token() {
    let s = matrix(1, |_, _| 3.0);
    assert_eq!(decode_tree_mst(&s).unwrap(), vec![0]);
}

#[test]
fn mst_two_token_hand_case() {
    // s(1←0)=1, s(1←2)=5, s(2←0)=4, s(2←1)=0
    let s = Tensor::matrix(&[&[1.0, 0.0, 5.0], &[4.0, 0.0, 0.0]]);
    let heads = decode_tree_mst(&s).unwrap();
    assert_eq!(heads, vec![2, 0]);
    assert_eq!(tree_score(&s, &heads), 9.0);
}

#[test]
fn mst_empty_is_error() {
    let s = Tensor::zeros(&[1, 1]);
    assert!(decode_tree_mst(&s).is_err());
}

#[test]
fn mst_matches_brute_force() {
    let mut rng = RngStream::new(3);
    for n in 1..=6 {
        for _ in 0..40 {
            let s = random_scores(n, &mut rng);
            let heads = decode_tree_mst(&s).unwrap();
            assert!(is_tree(&heads));
            let (best, _) = brute_force(&s);
            assert!((tree_score(&s, &heads) - best).abs() < 1e-9, "n={}", n);
        }
    }
}

#[test]
fn mst_forces_single_root_child() {
    let s = matrix(4, |_, j| if j == 0 { 10.0 } else { 0.0 });
    let heads = decode_tree_mst(&s).unwrap();
    assert_eq!(heads.iter().filter(|&&h| h == 0).count(), 1);
    assert!(is_tree(&heads));
}

#[test]
fn labels_at_chosen_head() {
    // n=2, 3 head columns, 2 labels.
    let mut t = Tensor::zeros(&[2, 3, 2]);
    let at = |i: usize, j: usize, l: usize| (i * 3 + j) * 2 + l;
    t.data_mut()[at(0, 2, 1)] = 1.0;
    t.data_mut()[at(1, 0, 0)] = 2.0;
    t.data_mut()[at(1, 1, 1)] = 5.0;
    assert_eq!(assign_labels(&t, &[2, 0]).unwrap(), vec![1, 0]);
    t.data_mut()[at(0, 0, 0)] = 100.0;
    assert_eq!(assign_labels(&t, &[2, 0]).unwrap(), vec![1, 0]);
}

#[test]
fn single_label_everywhere() {
    let t = Tensor::zeros(&[3, 4, 1]);
    assert_eq!(assign_labels(&t, &[0, 1, 1]).unwrap(), vec![0, 0, 0]);
}

#[test]
fn decode_mode_parse() {
    assert_eq!("greedy".parse::<DecodeMode>().unwrap(), DecodeMode::Greedy);
    assert_eq!(DecodeMode::default().to_string(), "mst");
    assert!("eisner".parse::<DecodeMode>().is_err());
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(300))]

    #[test]
    fn mst_always_tree(n in 1usize..=12, seed in 0u64..u64::MAX) {
        let mut rng = RngStream::new(seed);
        let s = random_scores(n, &mut rng);
        proptest::prop_assert!(is_tree(&decode_tree_mst(&s).unwrap()));
    }

    #[test]
    fn raising_a_chosen_arc_keeps_it(n in 2usize..=6, seed in 0u64..u64::MAX, bump in 0.0f64..5.0) {
        let mut rng = RngStream::new(seed);
        let mut s = random_scores(n, &mut rng);
        let heads = decode_tree_mst(&s).unwrap();
        let d = rng.below(n);
        let v = s.at(d, heads[d]);
        s.set(d, heads[d], v + bump);
        let (_, oracle) = brute_force(&s);
        let again = decode_tree_mst(&s).unwrap();
        proptest::prop_assert_eq!(again[d], heads[d]);
        proptest::prop_assert!((tree_score(&s, &again) - tree_score(&s, &oracle)).abs() < 1e-9);
    }
}
