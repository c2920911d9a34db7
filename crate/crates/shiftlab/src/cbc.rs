//! Cross-modality box correction pipeline.
//!
//! One correction epoch runs in three steps: build a quality-ranked bag of
//! candidate samples per ground-truth box, screen candidates against a
//! batch-adaptive score threshold and keep the single best survivor, then
//! blend each box center toward its survivor with the progressive weight of
//! the epoch schedule. Box sizes, categories, ordering, and the reference
//! annotations are never touched; only sensed centers move.
//!
//! States mutate only through their update operations; everything else here
//! is pure and can fan out per ground truth.

use crate::boxgeom::{beta_schedule, correct_center, BoxH, LabeledBox, SimilarityKind};
use crate::error::{Error, Result};

/// One candidate prediction emitted for a scene by a (surrogate) detector
/// head: a predicted box, the anchor it came from, per-category logits, and
/// the assigned target category (`None` = background).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub pred: BoxH,
    pub anchor: BoxH,
    pub logits: Vec<f64>,
    pub target: Option<usize>,
}

impl Sample {
    pub fn new(pred: BoxH, anchor: BoxH, logits: Vec<f64>, target: Option<usize>) -> Self {
        debug_assert!(
            logits.iter().all(|l| l.is_finite()),
            "logits must be finite"
        );
        Self {
            pred,
            anchor,
            logits,
            target,
        }
    }
}

/// Configuration of the quality-aware factor.
#[derive(Clone, Copy, Debug)]
pub struct QafConfig {
    /// Weight between location quality and classification probability,
    /// in `[0, 1]`. 1 = location only, 0 = classification only.
    pub alpha: f64,
    /// Box similarity used for both the anchor and the prediction term.
    pub similarity: SimilarityKind,
}

impl QafConfig {
    pub fn new(alpha: f64, similarity: SimilarityKind) -> Self {
        assert!(
            (0.0..=1.0).contains(&alpha),
            "alpha must lie in [0, 1], got {alpha}"
        );
        Self { alpha, similarity }
    }
}

impl Default for QafConfig {
    fn default() -> Self {
        Self::new(0.5, SimilarityKind::gw_adaptive())
    }
}

/// The positive candidates collected for one ground-truth box, strongest
/// quality first, each carrying its classification score.
#[derive(Clone, Debug)]
pub struct Bag {
    pub gt_index: usize,
    pub members: Vec<BagMember>,
}

#[derive(Clone, Debug)]
pub struct BagMember {
    pub sample: Sample,
    pub score: f64,
}

/// The per-epoch sensed annotation set being corrected, alongside the fixed
/// reference set it started from. Index `j` refers to the same object in
/// both lists at every epoch.
#[derive(Clone, Debug)]
pub struct CorrectionState {
    epoch: usize,
    max_epochs: usize,
    gamma: f64,
    sensed: Vec<LabeledBox>,
    reference: Vec<LabeledBox>,
}

impl CorrectionState {
    /// Start a correction run: the sensed set is initialized to a copy of
    /// the reference annotations.
    pub fn init(reference: Vec<LabeledBox>, max_epochs: usize, gamma: f64) -> Self {
        assert!(max_epochs >= 1, "max_epochs must be at least 1");
        assert!(
            (0.0..=1.0).contains(&gamma),
            "gamma must lie in [0, 1], got {gamma}"
        );
        Self {
            epoch: 0,
            max_epochs,
            gamma,
            sensed: reference.clone(),
            reference,
        }
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn max_epochs(&self) -> usize {
        self.max_epochs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Correction weight the next `correct_epoch` call will apply.
    pub fn current_beta(&self) -> f64 {
        beta_schedule(
            self.epoch.min(self.max_epochs - 1),
            self.max_epochs,
            self.gamma,
        )
    }

    pub fn sensed_gts(&self) -> &[LabeledBox] {
        &self.sensed
    }

    pub fn reference_gts(&self) -> &[LabeledBox] {
        &self.reference
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Hybrid location quality: the better of anchor-to-GT and prediction-to-GT
/// similarity.
pub fn hlq(sample: &Sample, gt: BoxH, cfg: &QafConfig) -> f64 {
    cfg.similarity
        .eval(sample.anchor, gt)
        .max(cfg.similarity.eval(sample.pred, gt))
        .max(0.0)
}

/// Quality-aware factor of a sample against a set of ground truths: the best
/// over GTs of `HLQ^alpha * prob^(1-alpha)`, gated to zero unless the
/// sample's anchor center lies inside the GT box. Samples carrying a target
/// category only consider GTs of that category.
///
/// Returns the factor and the index of the GT attaining it (ties broken
/// toward the lowest index; `None` when every GT is gated out).
pub fn qaf_argmax(sample: &Sample, gts: &[LabeledBox], cfg: &QafConfig) -> (f64, Option<usize>) {
    let mut best = 0.0;
    let mut best_gt = None;
    for (j, gt) in gts.iter().enumerate() {
        if let Some(cat) = sample.target {
            if cat != gt.category {
                continue;
            }
        }
        let (ax, ay) = sample.anchor.center();
        if !gt.bbox.contains(ax, ay) {
            continue; // spatial prior gate
        }
        if gt.category >= sample.logits.len() {
            continue;
        }
        let prob = sigmoid(sample.logits[gt.category]);
        let q = hlq(sample, gt.bbox, cfg).powf(cfg.alpha) * prob.powf(1.0 - cfg.alpha);
        if q > best {
            best = q;
            best_gt = Some(j);
        }
    }
    (best, best_gt)
}

/// Quality-aware factor alone (see [`qaf_argmax`]).
pub fn qaf(sample: &Sample, gts: &[LabeledBox], cfg: &QafConfig) -> f64 {
    qaf_argmax(sample, gts, cfg).0
}

/// Classification score of a sample: sigmoid of the logit at its target
/// category, or 0 for background samples.
pub fn sample_score(sample: &Sample) -> f64 {
    match sample.target {
        Some(cat) => sigmoid(sample.logits[cat]),
        None => 0.0,
    }
}

/// Assign every sample to the ground truth maximizing its quality-aware
/// factor and keep the best `top_q` candidates per GT.
///
/// Returns one bag per GT, aligned with `state.sensed_gts()` by index. A GT
/// whose candidates were all gated out gets an empty bag and will not be
/// corrected this epoch. Bag members are ordered by descending factor (ties
/// toward the earlier sample) and carry samples re-targeted to the bag's
/// category, so `member.score == sample_score(&member.sample)` holds.
pub fn build_bags(
    samples: &[Sample],
    state: &CorrectionState,
    cfg: &QafConfig,
    top_q: usize,
) -> Vec<Bag> {
    let gts = state.sensed_gts();
    let mut ranked: Vec<Vec<(f64, usize)>> = vec![Vec::new(); gts.len()];
    for (i, sample) in samples.iter().enumerate() {
        let (q, best_gt) = qaf_argmax(sample, gts, cfg);
        if let Some(j) = best_gt {
            if q > 0.0 {
                ranked[j].push((q, i));
            }
        }
    }
    ranked
        .into_iter()
        .enumerate()
        .map(|(gt_index, mut cands)| {
            // descending factor, ascending sample index on ties
            cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            cands.truncate(top_q);
            let members = cands
                .into_iter()
                .map(|(_, i)| {
                    let mut sample = samples[i].clone();
                    sample.target = Some(gts[gt_index].category);
                    let score = sample_score(&sample);
                    BagMember { sample, score }
                })
                .collect();
            Bag { gt_index, members }
        })
        .collect()
}

/// Batch-adaptive score threshold: mean plus population standard deviation
/// of the pooled scores.
pub fn batch_threshold(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput {
            what: "batch score pool",
        });
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    Ok(mean + var.sqrt())
}

/// The bag member with the highest score among those strictly above the
/// threshold; `None` when nobody clears it (the GT is left uncorrected).
/// Ties go to the earliest member.
pub fn select_top1(bag: &Bag, thr: f64) -> Option<&BagMember> {
    let mut best: Option<&BagMember> = None;
    for member in &bag.members {
        if member.score > thr && best.is_none_or(|b| member.score > b.score) {
            best = Some(member);
        }
    }
    best
}

/// Apply one correction epoch: for every GT whose bag yields a selection,
/// blend its center toward the selected sample's predicted center with the
/// scheduled weight; everything else is copied unchanged and the epoch
/// counter advances.
pub fn correct_epoch(state: &CorrectionState, bags: &[Bag], thr: f64) -> Result<CorrectionState> {
    let n = state.sensed.len();
    let mut seen = vec![false; n];
    for bag in bags {
        if bag.gt_index >= n {
            return Err(Error::BagIndexOutOfRange {
                gt_index: bag.gt_index,
                len: n,
            });
        }
        if seen[bag.gt_index] {
            return Err(Error::DuplicateBag {
                gt_index: bag.gt_index,
            });
        }
        seen[bag.gt_index] = true;
    }

    let beta = beta_schedule(
        state.epoch.min(state.max_epochs - 1),
        state.max_epochs,
        state.gamma,
    );
    let mut sensed = state.sensed.clone();
    for bag in bags {
        if let Some(member) = select_top1(bag, thr) {
            let gt = &mut sensed[bag.gt_index];
            gt.bbox = correct_center(gt.bbox, member.sample.pred.center(), beta);
        }
    }
    Ok(CorrectionState {
        epoch: state.epoch + 1,
        max_epochs: state.max_epochs,
        gamma: state.gamma,
        sensed,
        reference: state.reference.clone(),
    })
}

/// Teacher parameters tracked as an exponential moving average of student
/// parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EmaState {
    teacher: Vec<f64>,
    momentum: f64,
}

impl EmaState {
    pub fn new(teacher: Vec<f64>, momentum: f64) -> Self {
        assert!(
            (0.0..=1.0).contains(&momentum),
            "momentum must lie in [0, 1], got {momentum}"
        );
        debug_assert!(teacher.iter().all(|t| t.is_finite()));
        Self { teacher, momentum }
    }

    pub fn teacher(&self) -> &[f64] {
        &self.teacher
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }
}

/// One EMA step: `teacher <- m * teacher + (1 - m) * student`.
pub fn ema_update(state: &EmaState, student: &[f64]) -> Result<EmaState> {
    if student.len() != state.teacher.len() {
        return Err(Error::LengthMismatch {
            what: "EMA parameter vectors",
            left: state.teacher.len(),
            right: student.len(),
        });
    }
    let m = state.momentum;
    let teacher = state
        .teacher
        .iter()
        .zip(student)
        .map(|(t, s)| m * t + (1.0 - m) * s)
        .collect();
    Ok(EmaState {
        teacher,
        momentum: m,
    })
}

/// Per-modality head losses over a sample set.
///
/// `target_boxes[i]` is the regression target of sample `i`, present exactly
/// for positive samples. The classification loss is the mean over all
/// samples of the per-sample binary cross-entropy (positives on their target
/// logit, backgrounds averaged over every category logit); the regression
/// loss is the mean absolute difference over the four box parameters of
/// positive samples only, 0 when there are no positives.
pub fn modality_losses(samples: &[Sample], target_boxes: &[Option<BoxH>]) -> Result<(f64, f64)> {
    if samples.len() != target_boxes.len() {
        return Err(Error::LengthMismatch {
            what: "samples and regression targets",
            left: samples.len(),
            right: target_boxes.len(),
        });
    }
    if samples.is_empty() {
        return Ok((0.0, 0.0));
    }

    let mut cls = 0.0;
    let mut reg = 0.0;
    let mut n_reg_params = 0usize;
    for (sample, target_box) in samples.iter().zip(target_boxes) {
        match (sample.target, target_box) {
            (Some(cat), Some(tb)) => {
                cls += -sigmoid(sample.logits[cat]).ln();
                let (p, t) = (sample.pred, *tb);
                reg += (p.cx() - t.cx()).abs()
                    + (p.cy() - t.cy()).abs()
                    + (p.w() - t.w()).abs()
                    + (p.h() - t.h()).abs();
                n_reg_params += 4;
            }
            (None, None) => {
                let k = sample.logits.len().max(1) as f64;
                cls += sample
                    .logits
                    .iter()
                    .map(|l| -(1.0 - sigmoid(*l)).ln())
                    .sum::<f64>()
                    / k;
            }
            _ => {
                return Err(Error::LengthMismatch {
                    what: "sample target category and regression target presence",
                    left: usize::from(sample.target.is_some()),
                    right: usize::from(target_box.is_some()),
                })
            }
        }
    }
    let l_cls = cls / samples.len() as f64;
    let l_reg = if n_reg_params == 0 {
        0.0
    } else {
        reg / n_reg_params as f64
    };
    Ok((l_cls, l_reg))
}

/// Total correction-head loss: half-sums of the per-modality classification
/// and regression losses.
pub fn cbc_loss(l_cls_r: f64, l_cls_s: f64, l_reg_r: f64, l_reg_s: f64) -> f64 {
    0.5 * (l_cls_r + l_cls_s) + 0.5 * (l_reg_r + l_reg_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxgeom::gw_similarity;
    use crate::rng::Rng;

    fn bx(cx: f64, cy: f64, w: f64, h: f64) -> BoxH {
        BoxH::new(cx, cy, w, h).unwrap()
    }

    fn lb(cx: f64, cy: f64, w: f64, h: f64, cat: usize) -> LabeledBox {
        LabeledBox::new(bx(cx, cy, w, h), cat)
    }

    fn gw1() -> QafConfig {
        QafConfig::new(0.5, SimilarityKind::GaussianWasserstein { c: Some(1.0) })
    }

    #[test]
    fn hlq_takes_the_better_of_anchor_and_pred() {
        let gt = bx(0.0, 0.0, 4.0, 4.0);
        let cfg = gw1();
        // anchor at W2 distance 1, pred at distance 2
        let s = Sample::new(
            bx(2.0, 0.0, 4.0, 4.0),
            bx(1.0, 0.0, 4.0, 4.0),
            vec![0.0],
            Some(0),
        );
        let expect = gw_similarity(bx(1.0, 0.0, 4.0, 4.0), gt, 1.0);
        assert_eq!(hlq(&s, gt, &cfg), expect);
        // identical boxes
        let s = Sample::new(gt, gt, vec![0.0], Some(0));
        assert_eq!(hlq(&s, gt, &cfg), 1.0);
        // both terms effectively zero far away
        let s = Sample::new(
            bx(1e4, 0.0, 4.0, 4.0),
            bx(1e4, 0.0, 4.0, 4.0),
            vec![0.0],
            Some(0),
        );
        assert_eq!(hlq(&s, gt, &cfg), 0.0);
    }

    #[test]
    fn qaf_worked_example() {
        // HLQ 0.64 via the anchor term (W2 = -ln 0.64, C = 1), prob 0.25
        let d = -(0.64f64.ln());
        let gt = lb(d, 0.0, 4.0, 4.0, 0);
        let s = Sample::new(
            bx(1e4, 0.0, 4.0, 4.0),
            bx(0.0, 0.0, 4.0, 4.0),
            vec![(0.25f64 / 0.75).ln()],
            Some(0),
        );
        let (q, j) = qaf_argmax(&s, &[gt], &gw1());
        assert!((q - 0.4).abs() < 1e-12, "{q}");
        assert_eq!(j, Some(0));
    }

    #[test]
    fn qaf_gated_by_spatial_prior() {
        // anchor center outside the GT box
        let gt = lb(0.0, 0.0, 4.0, 4.0, 0);
        let s = Sample::new(
            bx(0.0, 0.0, 4.0, 4.0),
            bx(10.0, 0.0, 4.0, 4.0),
            vec![5.0],
            Some(0),
        );
        let (q, j) = qaf_argmax(&s, &[gt], &gw1());
        assert_eq!(q, 0.0);
        assert_eq!(j, None);
    }

    #[test]
    fn qaf_max_over_gts() {
        // two GTs: (HLQ, prob) = (0.81, 0.09) and (0.25, 0.49)
        let d1 = -(0.81f64.ln());
        let d2 = -(0.25f64.ln());
        let gts = vec![lb(d1, 0.0, 6.0, 6.0, 0), lb(d2, 0.0, 6.0, 6.0, 1)];
        let s = Sample::new(
            bx(1e4, 0.0, 6.0, 6.0),
            bx(0.0, 0.0, 6.0, 6.0),
            vec![(0.09f64 / 0.91).ln(), (0.49f64 / 0.51).ln()],
            None,
        );
        let (q, j) = qaf_argmax(&s, &gts, &gw1());
        assert!((q - 0.35).abs() < 1e-12, "{q}");
        assert_eq!(j, Some(1));
    }

    #[test]
    fn sample_score_examples() {
        let b = bx(0.0, 0.0, 1.0, 1.0);
        assert_eq!(sample_score(&Sample::new(b, b, vec![0.0], Some(0))), 0.5);
        assert_eq!(sample_score(&Sample::new(b, b, vec![3.0], None)), 0.0);
        let s = sample_score(&Sample::new(b, b, vec![2.0], Some(0)));
        assert!((s - 0.8807970779778823).abs() < 1e-15);
    }

    #[test]
    fn build_bags_ranks_and_truncates() {
        let gt = lb(0.0, 0.0, 10.0, 10.0, 0);
        let state = CorrectionState::init(vec![gt], 24, 0.5);
        let cfg = gw1();
        // three samples with distinct factors; the middle one is gated out
        let mk = |anchor_cx: f64, logit: f64, gated: bool| {
            let a = if gated {
                bx(100.0, 0.0, 2.0, 2.0)
            } else {
                bx(anchor_cx, 0.0, 10.0, 10.0)
            };
            Sample::new(bx(anchor_cx, 0.0, 10.0, 10.0), a, vec![logit], Some(0))
        };
        let samples = vec![
            mk(1.0, -1.0, false),
            mk(0.5, 5.0, true),
            mk(0.2, 3.0, false),
        ];
        let bags = build_bags(&samples, &state, &cfg, 2);
        assert_eq!(bags.len(), 1);
        let bag = &bags[0];
        assert_eq!(bag.members.len(), 2);
        // strongest first: sample 2 (near, confident) then sample 0
        assert_eq!(bag.members[0].sample.pred, samples[2].pred);
        assert_eq!(bag.members[1].sample.pred, samples[0].pred);
        for m in &bag.members {
            assert_eq!(m.score, sample_score(&m.sample));
        }
    }

    #[test]
    fn build_bags_all_gated_gives_empty_bag() {
        let state = CorrectionState::init(vec![lb(0.0, 0.0, 4.0, 4.0, 0)], 24, 0.5);
        let far = bx(50.0, 50.0, 2.0, 2.0);
        let samples = vec![Sample::new(far, far, vec![4.0], Some(0))];
        let bags = build_bags(&samples, &state, &gw1(), 7);
        assert_eq!(bags.len(), 1);
        assert!(bags[0].members.is_empty());
    }

    #[test]
    fn build_bags_assigns_to_argmax_gt() {
        // brute-force check on a random 10-sample scene with two distant GTs
        let gts = vec![lb(0.0, 0.0, 8.0, 8.0, 0), lb(40.0, 0.0, 8.0, 8.0, 0)];
        let state = CorrectionState::init(gts.clone(), 24, 0.5);
        let cfg = gw1();
        let mut rng = Rng::new(303);
        let mut samples = Vec::new();
        for _ in 0..10 {
            let near = if rng.next_f64() < 0.5 { 0.0 } else { 40.0 };
            let cx = near + rng.range_f64(-3.0, 3.0);
            let b = bx(cx, rng.range_f64(-2.0, 2.0), 8.0, 8.0);
            samples.push(Sample::new(b, b, vec![rng.range_f64(-1.0, 3.0)], Some(0)));
        }
        let bags = build_bags(&samples, &state, &cfg, 10);
        for (i, s) in samples.iter().enumerate() {
            let (q, best) = qaf_argmax(s, state.sensed_gts(), &cfg);
            let holder: Vec<usize> = bags
                .iter()
                .filter(|b| {
                    b.members
                        .iter()
                        .any(|m| m.sample.pred == s.pred && m.sample.anchor == s.anchor)
                })
                .map(|b| b.gt_index)
                .collect();
            if q > 0.0 {
                assert_eq!(holder, vec![best.unwrap()], "sample {i}");
            } else {
                assert!(holder.is_empty(), "sample {i}");
            }
        }
    }

    #[test]
    fn batch_threshold_examples() {
        let t = batch_threshold(&[0.2, 0.4, 0.6]).unwrap();
        assert!((t - 0.5632993161855452).abs() < 1e-15, "{t}");
        assert_eq!(batch_threshold(&[0.7]).unwrap(), 0.7);
        assert_eq!(batch_threshold(&[0.3, 0.3, 0.3]).unwrap(), 0.3);
        assert!(batch_threshold(&[]).is_err());
    }

    fn quick_bag(scores: &[f64]) -> Bag {
        let b = bx(0.0, 0.0, 1.0, 1.0);
        Bag {
            gt_index: 0,
            members: scores
                .iter()
                .map(|&score| BagMember {
                    sample: Sample::new(b, b, vec![0.0], Some(0)),
                    score,
                })
                .collect(),
        }
    }

    #[test]
    fn select_top1_behaviour() {
        let bag = quick_bag(&[0.3, 0.7]);
        assert_eq!(select_top1(&bag, 0.5).unwrap().score, 0.7);
        let bag = quick_bag(&[0.3, 0.4]);
        assert!(select_top1(&bag, 0.5).is_none());
        // tie at the max goes to the earliest member
        let mut bag = quick_bag(&[0.9, 0.9]);
        bag.members[0].sample.logits = vec![1.0];
        let picked = select_top1(&bag, 0.0).unwrap();
        assert_eq!(picked.sample.logits, vec![1.0]);
        // top-1 only mode: threshold negative infinity admits everyone
        let bag = quick_bag(&[0.1]);
        assert_eq!(select_top1(&bag, f64::NEG_INFINITY).unwrap().score, 0.1);
    }

    fn bag_with_pred(gt_index: usize, pred_center: (f64, f64), score: f64) -> Bag {
        let pred = bx(pred_center.0, pred_center.1, 4.0, 4.0);
        Bag {
            gt_index,
            members: vec![BagMember {
                sample: Sample::new(pred, pred, vec![0.0], Some(0)),
                score,
            }],
        }
    }

    #[test]
    fn correct_epoch_composes_schedule_and_blend() {
        // beta(11) = 1 for E=24, gamma=0.5: full replacement
        let mut state = CorrectionState::init(vec![lb(6.0, 2.0, 4.0, 4.0, 0)], 24, 0.5);
        for _ in 0..11 {
            state = correct_epoch(&state, &[], 0.0).unwrap();
        }
        assert_eq!(state.epoch(), 11);
        let next = correct_epoch(&state, &[bag_with_pred(0, (10.0, 10.0), 0.9)], 0.5).unwrap();
        assert_eq!(next.sensed_gts()[0].bbox.center(), (10.0, 10.0));
        assert_eq!(next.sensed_gts()[0].bbox.w(), 4.0);
        assert_eq!(next.epoch(), 12);
    }

    #[test]
    fn correct_epoch_beta_zero_is_identity() {
        let state = CorrectionState::init(vec![lb(6.0, 2.0, 4.0, 4.0, 0)], 24, 0.5);
        let next = correct_epoch(&state, &[bag_with_pred(0, (10.0, 10.0), 0.99)], 0.0).unwrap();
        assert_eq!(next.sensed_gts(), state.sensed_gts());
    }

    #[test]
    fn correct_epoch_empty_bag_leaves_gt() {
        let mut state = CorrectionState::init(
            vec![lb(6.0, 2.0, 4.0, 4.0, 0), lb(20.0, 20.0, 4.0, 4.0, 1)],
            4,
            0.5,
        );
        state = correct_epoch(&state, &[], 0.0).unwrap(); // move past beta=0
        let bags = vec![
            Bag {
                gt_index: 0,
                members: vec![],
            },
            bag_with_pred(1, (26.0, 20.0), 0.9),
        ];
        let next = correct_epoch(&state, &bags, 0.5).unwrap();
        assert_eq!(next.sensed_gts()[0], state.sensed_gts()[0]);
        assert_ne!(next.sensed_gts()[1], state.sensed_gts()[1]);
    }

    #[test]
    fn correct_epoch_rejects_bad_bags() {
        let state = CorrectionState::init(vec![lb(0.0, 0.0, 4.0, 4.0, 0)], 4, 0.5);
        assert!(matches!(
            correct_epoch(&state, &[bag_with_pred(3, (0.0, 0.0), 0.5)], 0.0),
            Err(Error::BagIndexOutOfRange { .. })
        ));
        let dupes = vec![
            bag_with_pred(0, (0.0, 0.0), 0.5),
            bag_with_pred(0, (1.0, 1.0), 0.5),
        ];
        assert!(matches!(
            correct_epoch(&state, &dupes, 0.0),
            Err(Error::DuplicateBag { .. })
        ));
    }

    #[test]
    fn fixed_sample_converges_exactly_when_beta_hits_one() {
        // E=24, gamma=0.5: beta reaches 1 at epoch 11, so the center lands
        // on the sample bit-exactly after pass 12 and never moves again
        let mut state = CorrectionState::init(vec![lb(6.0, 2.0, 4.0, 4.0, 0)], 24, 0.5);
        let bags = vec![bag_with_pred(0, (10.25, -3.5), 0.9)];
        for k in 0..24 {
            state = correct_epoch(&state, &bags, 0.0).unwrap();
            let center = state.sensed_gts()[0].bbox.center();
            if k >= 11 {
                assert_eq!(center, (10.25, -3.5), "epoch {k}");
            } else if k > 0 {
                assert_ne!(center, (10.25, -3.5), "epoch {k}");
            }
        }
    }

    #[test]
    fn correct_epoch_deterministic() {
        let state = CorrectionState::init(vec![lb(6.0, 2.0, 4.0, 4.0, 0)], 24, 0.5);
        let bags = vec![bag_with_pred(0, (9.0, 5.0), 0.8)];
        let a = correct_epoch(&state, &bags, 0.1).unwrap();
        let b = correct_epoch(&state, &bags, 0.1).unwrap();
        assert_eq!(a.sensed_gts(), b.sensed_gts());
    }

    #[test]
    fn ema_single_step_and_limits() {
        let state = EmaState::new(vec![0.0], 0.9997);
        let next = ema_update(&state, &[1.0]).unwrap();
        assert_eq!(next.teacher()[0], 1.0 - 0.9997);

        let state = EmaState::new(vec![0.25, -3.0], 0.0);
        let next = ema_update(&state, &[1.0, 2.0]).unwrap();
        assert_eq!(next.teacher(), &[1.0, 2.0]);

        assert!(ema_update(&EmaState::new(vec![0.0], 0.5), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ema_geometric_convergence() {
        let m = 0.9;
        let mut state = EmaState::new(vec![0.0], m);
        let mut prev_gap = 1.0;
        for _ in 0..10_000 {
            state = ema_update(&state, &[1.0]).unwrap();
            let gap = (1.0 - state.teacher()[0]).abs();
            assert!(gap <= prev_gap * m + 1e-15);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-12);
    }

    #[test]
    fn modality_losses_worked_examples() {
        let b = bx(0.0, 0.0, 2.0, 2.0);
        // one positive, logit 0 at its target -> -ln(0.5)
        let s = vec![Sample::new(b, b, vec![1.0, 0.0], Some(1))];
        let (cls, reg) = modality_losses(&s, &[Some(b)]).unwrap();
        assert!((cls - 0.5f64.ln().abs()).abs() < 1e-15);
        assert_eq!(reg, 0.0);

        // background-only pool: regression is zero by convention
        let s = vec![Sample::new(b, b, vec![0.0], None)];
        let (cls, reg) = modality_losses(&s, &[None]).unwrap();
        assert!((cls - 0.5f64.ln().abs()).abs() < 1e-15);
        assert_eq!(reg, 0.0);

        // regression: mean absolute difference over the 4 box parameters
        let t = bx(1.0, 0.0, 2.0, 4.0);
        let s = vec![Sample::new(b, b, vec![0.0], Some(0))];
        let (_, reg) = modality_losses(&s, &[Some(t)]).unwrap();
        assert!((reg - (1.0 + 0.0 + 0.0 + 2.0) / 4.0).abs() < 1e-15);

        // target presence must agree with the sample's category
        assert!(modality_losses(&s, &[None]).is_err());
    }

    #[test]
    fn cbc_loss_examples() {
        assert!((cbc_loss(1.0, 0.5, 0.2, 0.4) - 1.05).abs() < 1e-15);
        assert_eq!(cbc_loss(0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(cbc_loss(0.8, 0.0, 0.6, 0.0), 0.5 * 0.8 + 0.5 * 0.6);
    }

    #[test]
    fn qaf_bounds_property() {
        let mut rng = Rng::new(606);
        let cfg = QafConfig::default();
        for _ in 0..500 {
            let gts = vec![lb(
                rng.range_f64(-10.0, 10.0),
                rng.range_f64(-10.0, 10.0),
                rng.range_f64(2.0, 12.0),
                rng.range_f64(2.0, 12.0),
                0,
            )];
            let pred = bx(
                rng.range_f64(-12.0, 12.0),
                rng.range_f64(-12.0, 12.0),
                rng.range_f64(2.0, 12.0),
                rng.range_f64(2.0, 12.0),
            );
            let anchor = bx(
                rng.range_f64(-12.0, 12.0),
                rng.range_f64(-12.0, 12.0),
                rng.range_f64(2.0, 12.0),
                rng.range_f64(2.0, 12.0),
            );
            let s = Sample::new(pred, anchor, vec![rng.range_f64(-5.0, 5.0)], Some(0));
            let q = qaf(&s, &gts, &cfg);
            assert!((0.0..=1.0).contains(&q), "qaf out of bounds: {q}");
            let (ax, ay) = s.anchor.center();
            if !gts[0].bbox.contains(ax, ay) {
                assert_eq!(q, 0.0);
            }
        }
    }
}
