use super::{Bag, CardinalityModel, ExtScore, Instance, InstanceLabeling, Label, ModelWeights};
use crate::error::{Error, Result};

/// Result of maximizing the bag score over instance labelings for a fixed bag label.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub labeling: InstanceLabeling,
    /// `F_w(X, Y) = max_y f_w(X, y, Y)`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub labeling: InstanceLabeling,
    /// `F_w(X, +1)`, or `None` when every labeling is forbidden.
    pub value_pos: Option<f64>,
    /// `F_w(X, -1)`, or `None` when every labeling is forbidden.
    pub value_neg: Option<f64>,
}

/// Instance potential `(w . x) y`.
pub fn instance_potential(w: &ModelWeights, x: &Instance, y: Label) -> Result<f64> {
    Ok(w.score(&x.features)? * y.sign())
}

pub(crate) fn instance_scores(w: &ModelWeights, bag: &Bag) -> Result<Vec<f64>> {
    if bag.dim() != w.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            actual: bag.dim(),
        });
    }
    let scores: Vec<f64> = bag
        .instances
        .iter()
        .map(|x| w.score_unchecked(&x.features))
        .collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite instance score in bag `{}`",
            bag.bag_id
        )));
    }
    Ok(scores)
}

/// Sum of instance potentials in index order. Both scoring and inference go through here so
/// that a returned optimum and a re-scored labeling agree bit for bit.
fn labeled_sum(scores: &[f64], labels: &[Label]) -> f64 {
    scores.iter().zip(labels).map(|(s, y)| s * y.sign()).sum()
}

fn score_labeling(scores: &[f64], model: &CardinalityModel, labels: &[Label], bag_label: Label) -> ExtScore {
    let m_pos = labels.iter().filter(|&&l| l == Label::Positive).count();
    let m_neg = labels.len() - m_pos;
    let card = model.potential(m_pos, m_neg, bag_label);
    if card.is_forbidden() {
        return ExtScore::Forbidden;
    }
    card + labeled_sum(scores, labels)
}

/// `f_w(X, y, Y)`: cardinality potential plus the sum of instance potentials.
pub fn bag_score(
    w: &ModelWeights,
    model: &CardinalityModel,
    bag: &Bag,
    labeling: &InstanceLabeling,
    bag_label: Label,
) -> Result<ExtScore> {
    if labeling.len() != bag.len() {
        return Err(Error::Dimension {
            expected: bag.len(),
            actual: labeling.len(),
        });
    }
    let scores = instance_scores(w, bag)?;
    Ok(score_labeling(&scores, model, &labeling.labels, bag_label))
}

/// Exact maximization over labelings given precomputed instance scores.
///
/// For a fixed number `k` of positives the best labeling marks the `k` highest scores positive,
/// so only `m + 1` candidates need checking after one sort. Equal scores keep index order and
/// equal totals prefer the smaller `k`.
pub(crate) fn infer_from_scores(
    scores: &[f64],
    model: &CardinalityModel,
    bag_label: Label,
) -> Option<(Vec<Label>, f64)> {
    let m = scores.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let total: f64 = scores.iter().sum();
    let mut best: Option<(usize, f64)> = None;
    let mut prefix = 0.0;
    for k in 0..=m {
        if k > 0 {
            prefix += scores[order[k - 1]];
        }
        if let ExtScore::Finite(c) = model.potential(k, m - k, bag_label) {
            let value = c + 2.0 * prefix - total;
            if best.is_none_or(|(_, v)| value > v) {
                best = Some((k, value));
            }
        }
    }
    let (k, _) = best?;

    let mut labels = vec![Label::Negative; m];
    for &i in &order[..k] {
        labels[i] = Label::Positive;
    }
    let value = score_labeling(scores, model, &labels, bag_label).finite()?;
    Some((labels, value))
}

/// Most probable instance labeling for bag label `bag_label` and its score `F_w(X, Y)`.
pub fn infer_labeling(
    w: &ModelWeights,
    model: &CardinalityModel,
    bag: &Bag,
    bag_label: Label,
) -> Result<Inference> {
    let scores = instance_scores(w, bag)?;
    infer_from_scores(&scores, model, bag_label)
        .map(|(labels, value)| Inference {
            labeling: InstanceLabeling::new(labels),
            value,
        })
        .ok_or(Error::Infeasible(bag_label.as_i8()))
}

pub(crate) fn predict_from_scores(scores: &[f64], model: &CardinalityModel) -> Result<Prediction> {
    let pos = infer_from_scores(scores, model, Label::Positive);
    let neg = infer_from_scores(scores, model, Label::Negative);
    let value_pos = pos.as_ref().map(|p| p.1);
    let value_neg = neg.as_ref().map(|n| n.1);
    let (label, labels) = match (pos, neg) {
        (Some((lp, vp)), Some((ln, vn))) => {
            if vp > vn {
                (Label::Positive, lp)
            } else {
                (Label::Negative, ln)
            }
        }
        (Some((lp, _)), None) => (Label::Positive, lp),
        (None, Some((ln, _))) => (Label::Negative, ln),
        (None, None) => return Err(Error::Infeasible(0)),
    };
    Ok(Prediction {
        label,
        labeling: InstanceLabeling::new(labels),
        value_pos,
        value_neg,
    })
}

/// Runs inference for both bag labels and keeps the better one; an exact tie predicts negative.
pub fn predict_bag(w: &ModelWeights, model: &CardinalityModel, bag: &Bag) -> Result<Prediction> {
    let scores = instance_scores(w, bag)?;
    predict_from_scores(&scores, model)
}

/// Loss-augmented maximizer: the bag label, its labeling and `max_Y [Delta(Y, Y_true) + F(X, Y)]`.
pub(crate) fn loss_augmented_from_scores(
    scores: &[f64],
    model: &CardinalityModel,
    truth: Label,
) -> Result<(Label, Vec<Label>, f64)> {
    let mut best: Option<(Label, Vec<Label>, f64)> = None;
    // Truth first so that ties keep the zero-loss label.
    for y in [truth, truth.flip()] {
        if let Some((labels, value)) = infer_from_scores(scores, model, y) {
            let delta = if y == truth { 0.0 } else { 1.0 };
            let v = delta + value;
            if best.as_ref().is_none_or(|b| v > b.2) {
                best = Some((y, labels, v));
            }
        }
    }
    best.ok_or(Error::Infeasible(0))
}

/// `L_n = max_Y max_y [Delta(Y, Y_true) + f_w(X, y, Y)]` with 0-1 loss `Delta`.
pub fn loss_augmented_score(
    w: &ModelWeights,
    model: &CardinalityModel,
    bag: &Bag,
    truth: Label,
) -> Result<f64> {
    let scores = instance_scores(w, bag)?;
    loss_augmented_from_scores(&scores, model, truth).map(|(_, _, v)| v)
}

/// Per-bag hinge `L_n - R_n` (always non-negative).
pub(crate) fn bag_hinge(scores: &[f64], model: &CardinalityModel, truth: Label) -> Result<f64> {
    let (_, _, l) = loss_augmented_from_scores(scores, model, truth)?;
    let (_, r) = infer_from_scores(scores, model, truth).ok_or(Error::Infeasible(truth.as_i8()))?;
    Ok((l - r).max(0.0))
}

/// Regularized latent hinge objective `sum_n (L_n - R_n) + lambda/2 |w|^2`.
pub fn objective(w: &ModelWeights, model: &CardinalityModel, bags: &[Bag], lambda: f64) -> Result<f64> {
    let mut loss = 0.0;
    for bag in bags {
        let truth = bag
            .label
            .ok_or_else(|| Error::Contract(format!("bag `{}` is unlabeled", bag.bag_id)))?;
        let scores = instance_scores(w, bag)?;
        loss += bag_hinge(&scores, model, truth)?;
    }
    Ok(loss + 0.5 * lambda * w.squared_norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos() -> Label {
        Label::Positive
    }
    fn neg() -> Label {
        Label::Negative
    }

    /// Bag whose instances are 1-D, so with `w = [1]` the instance scores equal the features.
    fn scored_bag(scores: &[f64], label: Option<Label>) -> (ModelWeights, Bag) {
        let rows = scores.iter().map(|&s| vec![s]).collect();
        (ModelWeights::plain(vec![1.0]), Bag::from_rows("b", rows, label).unwrap())
    }

    #[test]
    fn instance_potential_examples() {
        let w = ModelWeights::plain(vec![1.0, -2.0]);
        let x = Instance::new(vec![3.0, 1.0]);
        assert_eq!(instance_potential(&w, &x, pos()).unwrap(), 1.0);
        assert_eq!(instance_potential(&w, &x, neg()).unwrap(), -1.0);
        let zero = ModelWeights::plain(vec![0.0, 0.0]);
        assert_eq!(instance_potential(&zero, &x, neg()).unwrap(), 0.0);
    }

    #[test]
    fn instance_potential_dimension_mismatch() {
        let w = ModelWeights::plain(vec![1.0, -2.0]);
        let x = Instance::new(vec![3.0]);
        assert!(matches!(
            instance_potential(&w, &x, pos()),
            Err(Error::Dimension { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn bias_weight_acts_on_constant_feature() {
        let w = ModelWeights::new(vec![1.0, -2.0, 0.5], 1.0, "", true).unwrap();
        let x = Instance::new(vec![3.0, 1.0]);
        assert_eq!(instance_potential(&w, &x, pos()).unwrap(), 1.5);
    }

    #[test]
    fn bag_score_examples() {
        let model = CardinalityModel::StandardMil;
        let (w, bag) = scored_bag(&[2.0], None);
        let s = bag_score(&w, &model, &bag, &InstanceLabeling::new(vec![pos()]), pos()).unwrap();
        assert_eq!(s, ExtScore::Finite(2.0));
        let s = bag_score(&w, &model, &bag, &InstanceLabeling::new(vec![neg()]), pos()).unwrap();
        assert_eq!(s, ExtScore::Forbidden);

        let (w, bag) = scored_bag(&[1.0, -3.0], None);
        let s = bag_score(&w, &model, &bag, &InstanceLabeling::new(vec![pos(), neg()]), pos()).unwrap();
        assert_eq!(s, ExtScore::Finite(4.0));
    }

    #[test]
    fn bag_score_length_mismatch() {
        let (w, bag) = scored_bag(&[1.0, -3.0], None);
        let r = bag_score(
            &w,
            &CardinalityModel::StandardMil,
            &bag,
            &InstanceLabeling::new(vec![pos()]),
            pos(),
        );
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }

    #[test]
    fn infer_examples() {
        let model = CardinalityModel::StandardMil;
        let (w, bag) = scored_bag(&[5.0, -1.0, 2.0], None);
        let r = infer_labeling(&w, &model, &bag, neg()).unwrap();
        assert_eq!(r.labeling.labels, vec![neg(), neg(), neg()]);
        assert_eq!(r.value, -6.0);
        let r = infer_labeling(&w, &model, &bag, pos()).unwrap();
        assert_eq!(r.labeling.labels, vec![pos(), neg(), pos()]);
        assert_eq!(r.value, 8.0);

        let (w, bag) = scored_bag(&[-4.0, -1.0], None);
        let r = infer_labeling(&w, &model, &bag, pos()).unwrap();
        assert_eq!(r.labeling.labels, vec![neg(), pos()]);
        assert_eq!(r.value, 3.0);

        let (w, bag) = scored_bag(&[0.0], None);
        let r = infer_labeling(&w, &model, &bag, pos()).unwrap();
        assert_eq!((r.labeling.labels, r.value), (vec![pos()], 0.0));
        let r = infer_labeling(&w, &model, &bag, neg()).unwrap();
        assert_eq!((r.labeling.labels, r.value), (vec![neg()], 0.0));
    }

    #[test]
    fn infer_ties_prefer_lower_index_and_smaller_k() {
        let model = CardinalityModel::StandardMil;
        // Zero scores: every k >= 1 totals 0, so k = 1 and the first instance wins.
        let (w, bag) = scored_bag(&[0.0, 0.0, 0.0], None);
        let r = infer_labeling(&w, &model, &bag, pos()).unwrap();
        assert_eq!(r.labeling.labels, vec![pos(), neg(), neg()]);
        // Equal positive scores: all are taken; equal negative ones: only the earliest.
        let (w, bag) = scored_bag(&[-2.0, -1.0, -1.0], None);
        let r = infer_labeling(&w, &model, &bag, pos()).unwrap();
        assert_eq!(r.labeling.labels, vec![neg(), pos(), neg()]);
    }

    struct NothingAllowed;
    impl super::super::CardinalityFunctions for NothingAllowed {
        fn c_pos(&self, _: usize, _: usize) -> ExtScore {
            ExtScore::Forbidden
        }
        fn c_neg(&self, _: usize, _: usize) -> ExtScore {
            ExtScore::Forbidden
        }
    }

    #[test]
    fn infeasible_inference_is_an_error() {
        let model = CardinalityModel::Custom(std::sync::Arc::new(NothingAllowed));
        let (w, bag) = scored_bag(&[1.0], None);
        assert!(matches!(infer_labeling(&w, &model, &bag, pos()), Err(Error::Infeasible(1))));
        assert!(matches!(predict_bag(&w, &model, &bag), Err(Error::Infeasible(_))));
    }

    #[test]
    fn predict_examples() {
        let model = CardinalityModel::StandardMil;
        let (w, bag) = scored_bag(&[5.0, -1.0, 2.0], None);
        let p = predict_bag(&w, &model, &bag).unwrap();
        assert_eq!(p.label, pos());
        assert_eq!(p.labeling.labels, vec![pos(), neg(), pos()]);

        let (w, bag) = scored_bag(&[-10.0, -10.0], None);
        let p = predict_bag(&w, &model, &bag).unwrap();
        assert_eq!((p.label, p.labeling.labels), (neg(), vec![neg(), neg()]));
        assert_eq!((p.value_pos, p.value_neg), (Some(0.0), Some(20.0)));

        let (w, bag) = scored_bag(&[0.0], None);
        let p = predict_bag(&w, &model, &bag).unwrap();
        assert_eq!((p.label, p.labeling.labels), (neg(), vec![neg()]));
    }

    #[test]
    fn loss_augmented_examples() {
        let model = CardinalityModel::StandardMil;
        let (w, bag) = scored_bag(&[5.0, -1.0, 2.0], None);
        assert_eq!(loss_augmented_score(&w, &model, &bag, pos()).unwrap(), 8.0);
        let (w, bag) = scored_bag(&[-10.0, -10.0], None);
        assert_eq!(loss_augmented_score(&w, &model, &bag, pos()).unwrap(), 21.0);
        let zero = ModelWeights::plain(vec![0.0]);
        let bag = Bag::from_rows("z", vec![vec![7.0]], None).unwrap();
        assert_eq!(loss_augmented_score(&zero, &model, &bag, neg()).unwrap(), 1.0);
    }

    #[test]
    fn objective_examples() {
        let model = CardinalityModel::StandardMil;
        let zero = ModelWeights::plain(vec![0.0]);
        let bag = Bag::from_rows("z", vec![vec![3.5]], Some(pos())).unwrap();
        assert_eq!(objective(&zero, &model, &[bag], 1.0).unwrap(), 1.0);

        // |w|^2 = 2 with scores [-10, -10]: w = [1, 1] on features [-5, -5].
        let w = ModelWeights::plain(vec![1.0, 1.0]);
        let bag = Bag::from_rows("b", vec![vec![-5.0, -5.0], vec![-5.0, -5.0]], Some(pos())).unwrap();
        assert_eq!(objective(&w, &model, &[bag], 1.0).unwrap(), 22.0);

        // Margin >= 1 leaves the hinge inactive.
        let (w, bag) = scored_bag(&[5.0, -1.0, 2.0], Some(pos()));
        let scores = instance_scores(&w, &bag).unwrap();
        assert_eq!(bag_hinge(&scores, &model, pos()).unwrap(), 0.0);
    }

    #[test]
    fn objective_rejects_unlabeled_bag() {
        let (w, bag) = scored_bag(&[1.0], None);
        assert!(matches!(
            objective(&w, &CardinalityModel::StandardMil, &[bag], 1.0),
            Err(Error::Contract(_))
        ));
    }
}
