//! Browser demo bindings: three interactive views over the core library,
//! each returning a JSON payload for the page to render.
//!
//! Functions compile on native targets too (where they are plain functions),
//! so the crate is testable without a wasm toolchain.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use shiftlab::boxgeom::{LabeledBox, SimilarityKind};
use shiftlab::sim::{
    generate_scene, run_correction_experiment, synthetic_grid_pair, ExperimentConfig, ScenePair,
    ShiftModel, SurrogateDetector, ThresholdMode,
};
use shiftlab::swca::{swca_align_with_fields, FeatureGrid, OffsetField, OpInit, SwcaParams};

#[derive(Serialize)]
struct BoxView {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    category: usize,
}

impl From<&LabeledBox> for BoxView {
    fn from(lb: &LabeledBox) -> Self {
        Self {
            cx: lb.bbox.cx(),
            cy: lb.bbox.cy(),
            w: lb.bbox.w(),
            h: lb.bbox.h(),
            category: lb.category,
        }
    }
}

#[derive(Serialize)]
struct SceneView {
    id: String,
    field: f64,
    reference: Vec<BoxView>,
    sensed_true: Vec<BoxView>,
    shifts: Vec<(f64, f64)>,
}

impl SceneView {
    fn new(scene: &ScenePair, field: f64) -> Self {
        Self {
            id: scene.id.clone(),
            field,
            reference: scene.reference.iter().map(BoxView::from).collect(),
            sensed_true: scene.sensed_true.iter().map(BoxView::from).collect(),
            shifts: scene.shifts.clone(),
        }
    }
}

fn shift_model(mean: f64, std: f64, unshifted_fraction: f64) -> Result<ShiftModel, String> {
    if mean < 0.0 || std < 0.0 {
        return Err("shift mean and std must be non-negative".into());
    }
    if !(0.0..=1.0).contains(&unshifted_fraction) {
        return Err("unshifted fraction must lie in [0, 1]".into());
    }
    let mut model = ShiftModel::uniform(mean, std);
    model.unshifted_fraction = unshifted_fraction;
    Ok(model)
}

/// Generate one scene pair: reference boxes, true sensed boxes, shifts.
#[wasm_bindgen]
pub fn scene_json(
    seed: u32,
    n_objects: u32,
    shift_mean: f64,
    shift_std: f64,
    unshifted_fraction: f64,
) -> Result<String, String> {
    let field = 512.0;
    let model = shift_model(shift_mean, shift_std, unshifted_fraction)?;
    let scene = generate_scene(seed as u64, n_objects as usize, &model, (field, field))
        .map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&SceneView::new(&scene, field)).expect("scene serialization"))
}

#[derive(Serialize)]
struct EpochView {
    epoch: usize,
    asim_true: f64,
    asim_ref: f64,
    beta: f64,
    thr: Option<f64>,
    boxes: Vec<BoxView>,
}

#[derive(Serialize)]
struct CorrectionView {
    initial_true: f64,
    initial_ref: f64,
    final_true: f64,
    scene: SceneView,
    epochs: Vec<EpochView>,
}

/// Run the full correction experiment; the payload carries the aSim
/// trajectory plus, for the first scene, the corrected annotation set after
/// every epoch so the page can animate the boxes moving.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)] // flat scalar surface for the JS side
pub fn correction_json(
    seed: u32,
    scenes: u32,
    objects_per_scene: u32,
    shift_mean: f64,
    shift_std: f64,
    sigma_det: f64,
    reliability: f64,
    epochs: u32,
    gamma: f64,
    threshold_top1: bool,
) -> Result<String, String> {
    if scenes == 0 || objects_per_scene == 0 || epochs == 0 {
        return Err("scenes, objects, and epochs must be positive".into());
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err("gamma must lie in [0, 1]".into());
    }
    if !(0.0..=1.0).contains(&reliability) {
        return Err("reliability must lie in [0, 1]".into());
    }
    if sigma_det < 0.0 {
        return Err("sigma_det must be non-negative".into());
    }
    let field = 512.0;
    let cfg = ExperimentConfig {
        n_scenes: scenes as usize,
        objects_per_scene: objects_per_scene as usize,
        field: (field, field),
        shift_model: shift_model(shift_mean, shift_std, 0.0)?,
        detector: SurrogateDetector::new(sigma_det, 4.0, reliability, 7),
        epochs: epochs as usize,
        gamma,
        mode: if threshold_top1 {
            ThresholdMode::ThresholdTop1
        } else {
            ThresholdMode::Top1Only
        },
        similarity: SimilarityKind::gw_adaptive(),
        ..ExperimentConfig::default()
    };
    let outcome = run_correction_experiment(&cfg, seed as u64).map_err(|e| e.to_string())?;
    let t = &outcome.trajectory;
    let view = CorrectionView {
        initial_true: t.initial_true.unwrap_or(f64::NAN),
        initial_ref: t.initial_ref,
        final_true: t.final_true().unwrap_or(f64::NAN),
        scene: SceneView::new(&outcome.scenes[0], field),
        epochs: t
            .records
            .iter()
            .zip(&t.sensed_per_epoch)
            .map(|(r, snapshot)| EpochView {
                epoch: r.epoch,
                asim_true: r.asim_true.unwrap_or(f64::NAN),
                asim_ref: r.asim_ref,
                beta: r.beta,
                thr: r.thr.is_finite().then_some(r.thr),
                boxes: snapshot[0].iter().map(BoxView::from).collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&view).expect("correction serialization"))
}

#[derive(Serialize)]
struct PlaneView {
    h: usize,
    w: usize,
    values: Vec<f64>,
}

fn channel_plane(grid: &FeatureGrid, ch: usize) -> PlaneView {
    let (h, w, _) = grid.shape();
    let mut values = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            values.push(grid.get(y, x, ch));
        }
    }
    PlaneView { h, w, values }
}

#[derive(Serialize)]
struct OffsetsView {
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl From<&OffsetField> for OffsetsView {
    fn from(f: &OffsetField) -> Self {
        let (h, w) = f.shape();
        let mut dx = Vec::with_capacity(h * w);
        let mut dy = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                dx.push(f.dx(y, x));
                dy.push(f.dy(y, x));
            }
        }
        Self { dx, dy }
    }
}

#[derive(Serialize)]
struct SwcaView {
    reference: PlaneView,
    sensed: PlaneView,
    aligned: PlaneView,
    offsets1: OffsetsView,
    offsets2: OffsetsView,
}

/// Push a synthetic shifted grid pair through the two-block alignment
/// cascade; the payload carries channel-0 planes of all three grids plus
/// both predicted offset fields.
#[wasm_bindgen]
pub fn swca_json(
    seed: u32,
    h: u32,
    w: u32,
    window: u32,
    shift_x: f64,
    shift_y: f64,
    random_offsets: bool,
) -> Result<String, String> {
    if h == 0 || w == 0 || window == 0 {
        return Err("grid and window dimensions must be positive".into());
    }
    if h > 256 || w > 256 {
        return Err("grid too large for the demo (max 256)".into());
    }
    let channels = 6;
    let d_k = 12;
    let (f_ref, f_sensed) = synthetic_grid_pair(
        seed as u64,
        h as usize,
        w as usize,
        channels,
        (shift_x, shift_y),
    );
    let init = if random_offsets {
        OpInit::Random
    } else {
        OpInit::Zero
    };
    let params = SwcaParams::seeded(channels, d_k, 1, window as usize, seed as u64, init);
    let (aligned, off1, off2) =
        swca_align_with_fields(&f_ref, &f_sensed, &params).map_err(|e| e.to_string())?;
    let view = SwcaView {
        reference: channel_plane(&f_ref, 0),
        sensed: channel_plane(&f_sensed, 0),
        aligned: channel_plane(&aligned, 0),
        offsets1: OffsetsView::from(&off1),
        offsets2: OffsetsView::from(&off2),
    };
    Ok(serde_json::to_string(&view).expect("swca serialization"))
}
