//! Synthetic ground truth for end-to-end verification of the correction
//! pipeline.
//!
//! A scene pair holds reference annotations plus the true sensed boxes they
//! drifted from, with the per-object shift vectors on record. A surrogate
//! detector stands in for a trained head: it emits candidate samples around
//! the true sensed centers with controllable localization noise and
//! confidence quality, so correction accuracy is measurable against known
//! truth without any training.
//!
//! The surrogate models the supervision feedback loop that makes progressive
//! correction matter: a head trained against misplaced boxes partly echoes
//! the misplaced position instead of the object's true one. Its parameter
//! vector carries a supervision-error estimate; each epoch the student's
//! estimate tracks the current annotation error and the teacher follows by
//! exponential moving average. The teacher's estimate sets how strongly its
//! predictions are pulled toward the current (possibly wrong) annotation.
//! Correct early and the pull fades; correct late and even the final
//! predictions echo stale supervision. A detector with zero localization
//! noise is exact regardless of the estimate.
//!
//! Everything is a pure function of the configuration and the seed; scenes
//! use forked RNG streams so results do not depend on evaluation order.

use crate::boxgeom::{beta_schedule, BoxH, LabeledBox, SimilarityKind};
use crate::cbc::{
    batch_threshold, build_bags, correct_epoch, ema_update, CorrectionState, EmaState, QafConfig,
    Sample,
};
use crate::error::{Error, Result};
use crate::matching::{asim, CategoryGrouping, ImagePair};
use crate::rng::Rng;

/// Per-class size ranges of generated objects, in pixels: a small slow class
/// and a larger fast one.
const CLASS_SIZE_RANGES: [(f64, f64); 2] = [(8.0, 12.0), (10.0, 16.0)];

/// Anchors jitter around the current annotation by up to this fraction of
/// the box extent per axis; beyond half the extent the spatial prior gate
/// rejects them, so a fraction of candidates always exercises the gate.
const ANCHOR_JITTER: f64 = 0.6;

/// Shift magnitudes are clamped this many standard deviations above the
/// mean so placement margins can bound the worst case.
const SHIFT_CLAMP_SIGMA: f64 = 4.0;

/// Shift direction distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Direction {
    UniformAngle,
    Fixed(f64),
}

/// Per-class shift magnitude distribution, in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassShift {
    pub mean: f64,
    pub std: f64,
}

/// How objects drift between the reference and sensed modalities.
#[derive(Clone, Debug)]
pub struct ShiftModel {
    pub per_class: Vec<ClassShift>,
    pub direction: Direction,
    pub unshifted_fraction: f64,
}

impl ShiftModel {
    pub fn new(per_class: Vec<ClassShift>, direction: Direction, unshifted_fraction: f64) -> Self {
        assert!(
            !per_class.is_empty(),
            "shift model needs at least one class"
        );
        assert!(
            per_class.iter().all(|c| c.mean >= 0.0 && c.std >= 0.0),
            "shift magnitudes must be non-negative"
        );
        assert!(
            (0.0..=1.0).contains(&unshifted_fraction),
            "unshifted fraction must lie in [0, 1]"
        );
        Self {
            per_class,
            direction,
            unshifted_fraction,
        }
    }

    /// Uniform magnitude for every class.
    pub fn uniform(mean: f64, std: f64) -> Self {
        Self::new(
            vec![ClassShift { mean, std }; 2],
            Direction::UniformAngle,
            0.0,
        )
    }

    /// Two classes: a slow one and a fast one whose shifts are larger.
    pub fn two_speed() -> Self {
        Self::new(
            vec![
                ClassShift {
                    mean: 4.0,
                    std: 1.0,
                },
                ClassShift {
                    mean: 10.0,
                    std: 3.0,
                },
            ],
            Direction::UniformAngle,
            0.1,
        )
    }

    fn class(&self, category: usize) -> ClassShift {
        self.per_class[category.min(self.per_class.len() - 1)]
    }

    fn max_magnitude(&self) -> f64 {
        self.per_class
            .iter()
            .map(|c| c.mean + SHIFT_CLAMP_SIGMA * c.std)
            .fold(0.0, f64::max)
    }

    /// Draw one shift vector for an object of `category`.
    pub fn sample_shift(&self, category: usize, rng: &mut Rng) -> (f64, f64) {
        if self.unshifted_fraction > 0.0 && rng.next_f64() < self.unshifted_fraction {
            return (0.0, 0.0);
        }
        let class = self.class(category);
        let magnitude = (class.mean + class.std * rng.normal())
            .clamp(0.0, class.mean + SHIFT_CLAMP_SIGMA * class.std);
        let angle = match self.direction {
            Direction::UniformAngle => rng.range_f64(0.0, std::f64::consts::TAU),
            Direction::Fixed(a) => a,
        };
        (magnitude * angle.cos(), magnitude * angle.sin())
    }
}

/// Simulator ground truth for one image pair: reference annotations, the
/// true sensed boxes, and the shift vector between each pair. Sizes always
/// match between the two modalities; only centers differ.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenePair {
    pub id: String,
    pub reference: Vec<LabeledBox>,
    pub sensed_true: Vec<LabeledBox>,
    pub shifts: Vec<(f64, f64)>,
}

/// Generate a scene of well-separated objects inside `field` (width,
/// height), then drift each one per the shift model. Deterministic given the
/// seed. Fails when the field cannot hold that many objects with the margins
/// the shift model requires.
pub fn generate_scene(
    seed: u64,
    n_objects: usize,
    shift_model: &ShiftModel,
    field: (f64, f64),
) -> Result<ScenePair> {
    let mut rng = Rng::new(seed);
    let (field_w, field_h) = field;
    let max_size = CLASS_SIZE_RANGES.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_shift = shift_model.max_magnitude();
    let margin = max_shift + max_size / 2.0 + 2.0;
    // objects stay far enough apart that candidates for one object can never
    // pass another object's spatial prior gate
    let min_sep = 2.0 * (max_size + max_shift);

    if n_objects > 0 && (field_w <= 2.0 * margin || field_h <= 2.0 * margin) {
        return Err(Error::FieldTooSmall {
            field_w,
            field_h,
            n_objects,
            margin,
        });
    }

    let mut centers: Vec<(f64, f64)> = Vec::with_capacity(n_objects);
    let mut attempts = 0usize;
    while centers.len() < n_objects {
        attempts += 1;
        if attempts > 200 * n_objects.max(1) {
            return Err(Error::FieldTooSmall {
                field_w,
                field_h,
                n_objects,
                margin,
            });
        }
        let cand = (
            rng.range_f64(margin, field_w - margin),
            rng.range_f64(margin, field_h - margin),
        );
        let ok = centers
            .iter()
            .all(|c| ((c.0 - cand.0).powi(2) + (c.1 - cand.1).powi(2)).sqrt() >= min_sep);
        if ok {
            centers.push(cand);
        }
    }

    let mut reference = Vec::with_capacity(n_objects);
    let mut sensed_true = Vec::with_capacity(n_objects);
    let mut shifts = Vec::with_capacity(n_objects);
    for &(cx, cy) in &centers {
        let category = rng.next_index(CLASS_SIZE_RANGES.len());
        let (lo, hi) = CLASS_SIZE_RANGES[category];
        let w = rng.range_f64(lo, hi);
        let h = rng.range_f64(lo, hi);
        let reference_box = BoxH::new(cx, cy, w, h)?;
        let shift = shift_model.sample_shift(category, &mut rng);
        reference.push(LabeledBox::new(reference_box, category));
        sensed_true.push(LabeledBox::new(
            reference_box.translated(shift.0, shift.1)?,
            category,
        ));
        shifts.push(shift);
    }

    Ok(ScenePair {
        id: format!("scene-{seed:016x}"),
        reference,
        sensed_true,
        shifts,
    })
}

/// Build a scene from existing reference annotations by drifting them with
/// the shift model (no placement, no separation guarantees).
pub fn scene_from_reference(
    id: &str,
    reference: Vec<LabeledBox>,
    shift_model: &ShiftModel,
    seed: u64,
) -> Result<ScenePair> {
    let mut rng = Rng::new(seed);
    let mut sensed_true = Vec::with_capacity(reference.len());
    let mut shifts = Vec::with_capacity(reference.len());
    for lb in &reference {
        let shift = shift_model.sample_shift(lb.category, &mut rng);
        sensed_true.push(LabeledBox::new(
            lb.bbox.translated(shift.0, shift.1)?,
            lb.category,
        ));
        shifts.push(shift);
    }
    Ok(ScenePair {
        id: id.to_string(),
        reference,
        sensed_true,
        shifts,
    })
}

/// Surrogate for a detection head at desk scale.
///
/// Candidates are drawn around the true sensed centers with localization
/// noise `sigma_det`, plus a supervision echo: a pull toward the current
/// annotation whose strength grows with the head's supervision-error
/// estimate (see the module docs). Both distortions scale with `sigma_det`,
/// so a noiseless detector is exact. The confidence logit at the true
/// category decays linearly with the distance from the true center and is
/// scaled by `reliability` (1 = clean daylight, 0 = uninformative darkness).
/// `params` is the supervision-error estimate vector, the EMA target of the
/// mean-teacher loop.
#[derive(Clone, Debug)]
pub struct SurrogateDetector {
    pub sigma_det: f64,
    pub logit_scale: f64,
    pub reliability: f64,
    pub samples_per_object: usize,
    pub params: Vec<f64>,
    pub feedback_gain: f64,
}

impl SurrogateDetector {
    pub fn new(
        sigma_det: f64,
        logit_scale: f64,
        reliability: f64,
        samples_per_object: usize,
    ) -> Self {
        assert!(sigma_det >= 0.0, "sigma_det must be non-negative");
        assert!(
            (0.0..=1.0).contains(&reliability),
            "reliability must lie in [0, 1]"
        );
        assert!(
            samples_per_object >= 1,
            "need at least one sample per object"
        );
        Self {
            sigma_det,
            logit_scale,
            reliability,
            samples_per_object,
            params: vec![0.0],
            feedback_gain: 3.0,
        }
    }

    fn supervision_error(&self) -> f64 {
        self.params.first().copied().unwrap_or(0.0).max(0.0)
    }
}

/// Emit candidate samples for every object of a scene.
///
/// `current_gts` are the sensed annotations of the running correction state,
/// indexed like the scene's objects; anchors jitter around them so the
/// quality gate sees a realistic mix of inside and outside anchors.
/// Deterministic given the seed.
pub fn surrogate_samples(
    scene: &ScenePair,
    current_gts: &[LabeledBox],
    det: &SurrogateDetector,
    seed: u64,
) -> Result<Vec<Sample>> {
    if current_gts.len() != scene.sensed_true.len() {
        return Err(Error::LengthMismatch {
            what: "current annotations and scene objects",
            left: current_gts.len(),
            right: scene.sensed_true.len(),
        });
    }
    let mut rng = Rng::new(seed);
    let n_cats = scene
        .reference
        .iter()
        .map(|b| b.category + 1)
        .max()
        .unwrap_or(1);
    let mean_size = if scene.reference.is_empty() {
        1.0
    } else {
        scene
            .reference
            .iter()
            .map(|b| b.bbox.area().sqrt())
            .sum::<f64>()
            / scene.reference.len() as f64
    };
    // supervision echo: the head's belief center sits this fraction of the
    // way from the true object toward the annotation it was trained on,
    // saturating in the error estimate and vanishing with the noise scale;
    // capped below 1 so the loop can always make progress
    let err = det.supervision_error();
    let pull = (det.sigma_det.min(1.0) * det.feedback_gain * err / (err + mean_size)).min(0.95);

    let mut samples = Vec::with_capacity(scene.sensed_true.len() * det.samples_per_object);
    for (truth, current) in scene.sensed_true.iter().zip(current_gts) {
        let (tx, ty) = truth.bbox.center();
        let (gx, gy) = current.bbox.center();
        // the head scatters candidates around its belief and is most
        // confident near the belief, not near the truth it cannot see
        let bx_ = tx + pull * (gx - tx);
        let by_ = ty + pull * (gy - ty);
        let decay_radius = 2.0 * truth.bbox.area().sqrt();
        for _ in 0..det.samples_per_object {
            let px = bx_ + det.sigma_det * rng.normal();
            let py = by_ + det.sigma_det * rng.normal();
            let pred = BoxH::new(px, py, truth.bbox.w(), truth.bbox.h())?;
            let d = ((px - bx_).powi(2) + (py - by_).powi(2)).sqrt();
            let confident = det.logit_scale * (1.0 - d / decay_radius) * det.reliability;
            let logits = (0..n_cats)
                .map(|c| {
                    if c == truth.category {
                        confident
                    } else {
                        -det.logit_scale * det.reliability
                    }
                })
                .collect();
            let gt = current.bbox;
            let anchor = gt.with_center(
                gt.cx() + rng.range_f64(-ANCHOR_JITTER, ANCHOR_JITTER) * gt.w(),
                gt.cy() + rng.range_f64(-ANCHOR_JITTER, ANCHOR_JITTER) * gt.h(),
            )?;
            samples.push(Sample::new(pred, anchor, logits, Some(truth.category)));
        }
    }
    Ok(samples)
}

/// Sample selection regime of the correction loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Only the top-scoring bag member is used; no screening.
    Top1Only,
    /// Batch-adaptive threshold first, then top-1 among survivors.
    ThresholdTop1,
}

/// Full experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub n_scenes: usize,
    pub objects_per_scene: usize,
    pub field: (f64, f64),
    pub shift_model: ShiftModel,
    pub detector: SurrogateDetector,
    pub epochs: usize,
    pub gamma: f64,
    pub mode: ThresholdMode,
    pub qaf: QafConfig,
    pub top_q: usize,
    pub ema_momentum: f64,
    /// EMA updates applied per epoch (the momentum is a per-update constant;
    /// an epoch covers many updates).
    pub ema_steps_per_epoch: usize,
    /// Include the (identically zero) scores of unbagged background samples
    /// in the threshold pool.
    pub background_in_pool: bool,
    /// Similarity used for the recorded aSim trajectory.
    pub similarity: SimilarityKind,
    pub grouping: CategoryGrouping,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_scenes: 4,
            objects_per_scene: 10,
            field: (512.0, 512.0),
            shift_model: ShiftModel::two_speed(),
            detector: SurrogateDetector::new(1.0, 4.0, 0.9, 7),
            epochs: 24,
            gamma: 0.5,
            mode: ThresholdMode::Top1Only,
            qaf: QafConfig::default(),
            top_q: 7,
            ema_momentum: 0.9997,
            ema_steps_per_epoch: 1000,
            background_in_pool: false,
            similarity: SimilarityKind::gw_adaptive(),
            grouping: CategoryGrouping::PerCategory,
        }
    }
}

/// One row of the correction trajectory: the state after correction pass
/// `epoch`, plus the blend weight and threshold that pass used.
/// `asim_true` is absent when the runner has no ground truth to compare to.
#[derive(Clone, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub asim_true: Option<f64>,
    pub asim_ref: f64,
    pub beta: f64,
    pub thr: f64,
}

/// The full run: initial alignment, one record per epoch, and the sensed
/// annotation snapshots (per epoch, per scene) the passes produced.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial_true: Option<f64>,
    pub initial_ref: f64,
    pub records: Vec<EpochRecord>,
    pub sensed_per_epoch: Vec<Vec<Vec<LabeledBox>>>,
}

impl Trajectory {
    /// Final aSim against the true sensed boxes, when truth was available.
    pub fn final_true(&self) -> Option<f64> {
        self.records
            .last()
            .and_then(|r| r.asim_true)
            .or(self.initial_true)
    }
}

/// Outcome of a simulated experiment: the scenes plus the trajectory.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub scenes: Vec<ScenePair>,
    pub trajectory: Trajectory,
}

/// Run the full correction experiment: generate scenes, initialize the
/// sensed annotations to the reference ones, then per epoch let the teacher
/// emit samples, build bags, screen them, and correct, recording aSim
/// against both the true sensed boxes and the reference boxes.
pub fn run_correction_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentOutcome> {
    let master = Rng::new(seed);
    let mut scenes = Vec::with_capacity(cfg.n_scenes);
    for i in 0..cfg.n_scenes {
        scenes.push(generate_scene(
            master.derive_seed(i as u64),
            cfg.objects_per_scene,
            &cfg.shift_model,
            cfg.field,
        )?);
    }
    let trajectory = run_on_scenes(cfg, &scenes, seed)?;
    Ok(ExperimentOutcome { scenes, trajectory })
}

/// Run the correction loop on prebuilt scenes (the `correct` command path).
pub fn run_on_scenes(
    cfg: &ExperimentConfig,
    scenes: &[ScenePair],
    seed: u64,
) -> Result<Trajectory> {
    let master = Rng::new(seed);
    let mut states: Vec<CorrectionState> = scenes
        .iter()
        .map(|s| CorrectionState::init(s.reference.clone(), cfg.epochs, cfg.gamma))
        .collect();

    // mean-teacher bookkeeping on the supervision-error estimate
    let initial_err = mean_center_error(scenes, &states);
    let mut teacher = EmaState::new(vec![initial_err], cfg.ema_momentum);

    let asim_of = |states: &[CorrectionState], against_truth: bool| -> f64 {
        let images: Vec<ImagePair> = scenes
            .iter()
            .zip(states)
            .map(|(scene, st)| ImagePair {
                id: scene.id.clone(),
                refs: st.sensed_gts().to_vec(),
                senseds: if against_truth {
                    scene.sensed_true.clone()
                } else {
                    scene.reference.clone()
                },
            })
            .collect();
        asim(&images, cfg.similarity, cfg.grouping).aggregate
    };

    let initial_true = asim_of(&states, true);
    let initial_ref = asim_of(&states, false);

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut sensed_per_epoch = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        // the student's estimate tracks the error of the annotations it was
        // just trained on; the teacher follows through the EMA
        let student = vec![mean_center_error(scenes, &states)];
        for _ in 0..cfg.ema_steps_per_epoch {
            teacher = ema_update(&teacher, &student)?;
        }
        let mut det = cfg.detector.clone();
        det.params = teacher.teacher().to_vec();

        let mut all_bags = Vec::with_capacity(scenes.len());
        let mut pool = Vec::new();
        for (i, (scene, state)) in scenes.iter().zip(&states).enumerate() {
            let sample_seed = master.derive_seed(0x1000_0000 + ((epoch as u64) << 20) + i as u64);
            let samples = surrogate_samples(scene, state.sensed_gts(), &det, sample_seed)?;
            let bags = build_bags(&samples, state, &cfg.qaf, cfg.top_q);
            let bagged: usize = bags.iter().map(|b| b.members.len()).sum();
            pool.extend(bags.iter().flat_map(|b| b.members.iter().map(|m| m.score)));
            if cfg.background_in_pool {
                // background samples score identically zero
                pool.extend(std::iter::repeat_n(
                    0.0,
                    samples.len() - bagged.min(samples.len()),
                ));
            }
            all_bags.push(bags);
        }

        let thr = match cfg.mode {
            ThresholdMode::Top1Only => f64::NEG_INFINITY,
            ThresholdMode::ThresholdTop1 => {
                if pool.is_empty() {
                    f64::INFINITY // nothing qualified; no GT is corrected
                } else {
                    batch_threshold(&pool)?
                }
            }
        };

        let beta = beta_schedule(epoch, cfg.epochs, cfg.gamma);
        for (state, bags) in states.iter_mut().zip(&all_bags) {
            *state = correct_epoch(state, bags, thr)?;
        }

        records.push(EpochRecord {
            epoch,
            asim_true: Some(asim_of(&states, true)),
            asim_ref: asim_of(&states, false),
            beta,
            thr,
        });
        sensed_per_epoch.push(states.iter().map(|s| s.sensed_gts().to_vec()).collect());
    }

    Ok(Trajectory {
        initial_true: Some(initial_true),
        initial_ref,
        records,
        sensed_per_epoch,
    })
}

/// Correction loop over a fixed, externally supplied sample pool (reused
/// every epoch). No simulator truth exists here, so `asim_true` is absent.
pub fn run_static_correction(
    reference: &[(String, Vec<LabeledBox>)],
    samples_per_image: &[Vec<Sample>],
    cfg: &ExperimentConfig,
) -> Result<Trajectory> {
    if reference.len() != samples_per_image.len() {
        return Err(Error::LengthMismatch {
            what: "reference images and sample lists",
            left: reference.len(),
            right: samples_per_image.len(),
        });
    }
    let mut states: Vec<CorrectionState> = reference
        .iter()
        .map(|(_, boxes)| CorrectionState::init(boxes.clone(), cfg.epochs, cfg.gamma))
        .collect();

    let asim_ref_of = |states: &[CorrectionState]| -> f64 {
        let images: Vec<ImagePair> = reference
            .iter()
            .zip(states)
            .map(|((id, boxes), st)| ImagePair {
                id: id.clone(),
                refs: st.sensed_gts().to_vec(),
                senseds: boxes.clone(),
            })
            .collect();
        asim(&images, cfg.similarity, cfg.grouping).aggregate
    };

    let initial_ref = asim_ref_of(&states);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut sensed_per_epoch = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut all_bags = Vec::with_capacity(states.len());
        let mut pool = Vec::new();
        for (samples, state) in samples_per_image.iter().zip(&states) {
            let bags = build_bags(samples, state, &cfg.qaf, cfg.top_q);
            pool.extend(bags.iter().flat_map(|b| b.members.iter().map(|m| m.score)));
            if cfg.background_in_pool {
                let bagged: usize = bags.iter().map(|b| b.members.len()).sum();
                pool.extend(std::iter::repeat_n(
                    0.0,
                    samples.len() - bagged.min(samples.len()),
                ));
            }
            all_bags.push(bags);
        }
        let thr = match cfg.mode {
            ThresholdMode::Top1Only => f64::NEG_INFINITY,
            ThresholdMode::ThresholdTop1 => {
                if pool.is_empty() {
                    f64::INFINITY
                } else {
                    batch_threshold(&pool)?
                }
            }
        };
        let beta = beta_schedule(epoch, cfg.epochs, cfg.gamma);
        for (state, bags) in states.iter_mut().zip(&all_bags) {
            *state = correct_epoch(state, bags, thr)?;
        }
        records.push(EpochRecord {
            epoch,
            asim_true: None,
            asim_ref: asim_ref_of(&states),
            beta,
            thr,
        });
        sensed_per_epoch.push(states.iter().map(|s| s.sensed_gts().to_vec()).collect());
    }

    Ok(Trajectory {
        initial_true: None,
        initial_ref,
        records,
        sensed_per_epoch,
    })
}

/// Synthetic feature-grid pair for alignment demos: a smooth sum-of-blobs
/// field, plus the same field evaluated at coordinates displaced by `shift`
/// (so the sensed grid is the reference translated by exactly that amount,
/// with no resampling error). Deterministic given the seed.
pub fn synthetic_grid_pair(
    seed: u64,
    h: usize,
    w: usize,
    c: usize,
    shift: (f64, f64),
) -> (crate::swca::FeatureGrid, crate::swca::FeatureGrid) {
    let mut rng = Rng::new(seed);
    let n_blobs = 3 + c;
    struct Blob {
        x: f64,
        y: f64,
        radius: f64,
        amplitude: Vec<f64>,
    }
    let blobs: Vec<Blob> = (0..n_blobs)
        .map(|_| Blob {
            x: rng.range_f64(0.0, w as f64),
            y: rng.range_f64(0.0, h as f64),
            radius: rng.range_f64(2.0, 0.25 * (h.min(w) as f64).max(8.0)),
            amplitude: (0..c).map(|_| rng.range_f64(-1.0, 1.0)).collect(),
        })
        .collect();
    let eval = |x: f64, y: f64, ch: usize| -> f64 {
        blobs
            .iter()
            .map(|b| {
                let d2 = (x - b.x).powi(2) + (y - b.y).powi(2);
                b.amplitude[ch] * (-d2 / (2.0 * b.radius * b.radius)).exp()
            })
            .sum()
    };
    let reference =
        crate::swca::FeatureGrid::from_fn(h, w, c, |y, x, ch| eval(x as f64, y as f64, ch));
    let sensed = crate::swca::FeatureGrid::from_fn(h, w, c, |y, x, ch| {
        eval(x as f64 - shift.0, y as f64 - shift.1, ch)
    });
    (reference, sensed)
}

fn mean_center_error(scenes: &[ScenePair], states: &[CorrectionState]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (scene, state) in scenes.iter().zip(states) {
        for (truth, current) in scene.sensed_true.iter().zip(state.sensed_gts()) {
            let (tx, ty) = truth.bbox.center();
            let (cx, cy) = current.bbox.center();
            total += ((tx - cx).powi(2) + (ty - cy).powi(2)).sqrt();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}
