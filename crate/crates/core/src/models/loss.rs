use crate::autodiff::{Graph, NodeId, Reduction};
use crate::error::Result;

/// Head-selection cross-entropy: for each dependent, the negative log
/// softmax probability of its gold head over all candidate heads.
pub fn arc_loss(g: &mut Graph, arc_scores: NodeId, heads: &[usize], reduction: Reduction) -> Result<NodeId> {
    g.cross_entropy_with(arc_scores, heads, reduction)
}

/// Label cross-entropy at the gold head of each dependent. `gold_head_scores`
/// is `n × L`, row `i` holding the label scores for the arc from dependent
/// `i` to its gold head.
pub fn label_loss(g: &mut Graph, gold_head_scores: NodeId, labels: &[usize], reduction: Reduction) -> Result<NodeId> {
    g.cross_entropy_with(gold_head_scores, labels, reduction)
}

/// Tagging cross-entropy.
pub fn tag_loss(g: &mut Graph, logits: NodeId, tags: &[usize], reduction: Reduction) -> Result<NodeId> {
    g.cross_entropy_with(logits, tags, reduction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn value(f: impl FnOnce(&mut Graph) -> NodeId) -> f64 {
        let mut g = Graph::new();
        let out = f(&mut g);
        g.value(out).item()
    }

    #[test]
    fn arc_loss_equal_scores() {
        let v = value(|g| {
            let s = g.constant(Tensor::matrix(&[&[0.3, 0.3]]));
            arc_loss(g, s, &[1], Reduction::Mean).unwrap()
        });
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn arc_loss_saturated() {
        let v = value(|g| {
            let s = g.constant(Tensor::matrix(&[&[0.0, 50.0]]));
            arc_loss(g, s, &[1], Reduction::Mean).unwrap()
        });
        assert!(v < 1e-20);
    }

    #[test]
    fn arc_loss_closed_form() {
        let v = value(|g| {
            let s = g.constant(Tensor::matrix(&[&[0.0, 3f64.ln()]]));
            arc_loss(g, s, &[1], Reduction::Mean).unwrap()
        });
        assert!((v + 0.75f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn label_loss_uniform() {
        let v = value(|g| {
            let s = g.constant(Tensor::zeros(&[3, 5]));
            label_loss(g, s, &[0, 4, 2], Reduction::Mean).unwrap()
        });
        assert!((v - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn label_loss_single_label() {
        let v = value(|g| {
            let s = g.constant(Tensor::matrix(&[&[7.0], &[-2.0]]));
            label_loss(g, s, &[0, 0], Reduction::Mean).unwrap()
        });
        assert_eq!(v, 0.0);
    }

    #[test]
    fn label_loss_two_labels_by_hand() {
        // scores [1, 2] gold 0 → -ln(e/(e+e²)) = ln(1+e)
        let v = value(|g| {
            let s = g.constant(Tensor::matrix(&[&[1.0, 2.0]]));
            label_loss(g, s, &[0], Reduction::Mean).unwrap()
        });
        assert!((v - (1.0 + std::f64::consts::E).ln()).abs() < 1e-12);
    }
}
