//! Run configuration: flat `key = value` pairs under `[section]` headers.
//!
//! Every field has a default, so an empty file is valid; unknown sections or
//! keys are errors so typos cannot silently fall back to defaults. Lines
//! starting with `#` or `;` are comments, as is anything after ` #` on a
//! value line.

use std::path::Path;

use shiftlab::boxgeom::SimilarityKind;
use shiftlab::cbc::QafConfig;
use shiftlab::matching::CategoryGrouping;
use shiftlab::sim::{
    ClassShift, Direction, ExperimentConfig, ShiftModel, SurrogateDetector, ThresholdMode,
};
use shiftlab::swca::OpInit;

use crate::error::{io_err, CliError, CliResult};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub similarity: SimilarityKind,
    pub alpha: f64,
    pub qaf_similarity: SimilarityKind,
    pub top_q: usize,
    pub mode: ThresholdMode,
    pub epochs: usize,
    pub gamma: f64,
    pub ema_momentum: f64,
    pub ema_steps_per_epoch: usize,
    pub background_in_pool: bool,
    pub grouping: CategoryGrouping,
    pub sim: SimSection,
    pub swca: SwcaSection,
}

#[derive(Clone, Debug)]
pub struct SimSection {
    pub scenes: usize,
    pub objects_per_scene: usize,
    pub field_w: f64,
    pub field_h: f64,
    pub shift_mean_slow: f64,
    pub shift_std_slow: f64,
    pub shift_mean_fast: f64,
    pub shift_std_fast: f64,
    pub unshifted_fraction: f64,
    pub direction: Direction,
    pub sigma_det: f64,
    pub logit_scale: f64,
    pub reliability: f64,
    pub samples_per_object: usize,
    pub feedback_gain: f64,
}

#[derive(Clone, Debug)]
pub struct SwcaSection {
    pub window: usize,
    pub channels: usize,
    pub d_k: usize,
    pub heads: usize,
    pub op_init: OpInit,
    pub grid_h: usize,
    pub grid_w: usize,
    pub demo_shift_x: f64,
    pub demo_shift_y: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            similarity: SimilarityKind::gw_adaptive(),
            alpha: 0.5,
            qaf_similarity: SimilarityKind::gw_adaptive(),
            top_q: 7,
            mode: ThresholdMode::Top1Only,
            epochs: 24,
            gamma: 0.5,
            ema_momentum: 0.9997,
            ema_steps_per_epoch: 1000,
            background_in_pool: false,
            grouping: CategoryGrouping::PerCategory,
            sim: SimSection {
                scenes: 4,
                objects_per_scene: 10,
                field_w: 512.0,
                field_h: 512.0,
                shift_mean_slow: 4.0,
                shift_std_slow: 1.0,
                shift_mean_fast: 10.0,
                shift_std_fast: 3.0,
                unshifted_fraction: 0.1,
                direction: Direction::UniformAngle,
                sigma_det: 1.0,
                logit_scale: 4.0,
                reliability: 0.9,
                samples_per_object: 7,
                feedback_gain: 3.0,
            },
            swca: SwcaSection {
                window: 8,
                channels: 8,
                d_k: 16,
                heads: 1,
                op_init: OpInit::Zero,
                grid_h: 64,
                grid_w: 64,
                demo_shift_x: 3.0,
                demo_shift_y: 1.5,
            },
        }
    }
}

impl RunConfig {
    pub fn shift_model(&self) -> ShiftModel {
        ShiftModel::new(
            vec![
                ClassShift {
                    mean: self.sim.shift_mean_slow,
                    std: self.sim.shift_std_slow,
                },
                ClassShift {
                    mean: self.sim.shift_mean_fast,
                    std: self.sim.shift_std_fast,
                },
            ],
            self.sim.direction,
            self.sim.unshifted_fraction,
        )
    }

    pub fn detector(&self) -> SurrogateDetector {
        let mut det = SurrogateDetector::new(
            self.sim.sigma_det,
            self.sim.logit_scale,
            self.sim.reliability,
            self.sim.samples_per_object,
        );
        det.feedback_gain = self.sim.feedback_gain;
        det
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            n_scenes: self.sim.scenes,
            objects_per_scene: self.sim.objects_per_scene,
            field: (self.sim.field_w, self.sim.field_h),
            shift_model: self.shift_model(),
            detector: self.detector(),
            epochs: self.epochs,
            gamma: self.gamma,
            mode: self.mode,
            qaf: QafConfig::new(self.alpha, self.qaf_similarity),
            top_q: self.top_q,
            ema_momentum: self.ema_momentum,
            ema_steps_per_epoch: self.ema_steps_per_epoch,
            background_in_pool: self.background_in_pool,
            similarity: self.similarity,
            grouping: self.grouping,
        }
    }
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(&text, &path.display().to_string())
}

pub fn parse_config(text: &str, path: &str) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let err = |message: String| CliError::Config {
            path: path.to_string(),
            line,
            message,
        };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header {trimmed:?}")))?
                .trim();
            match name {
                "run" | "similarity" | "cbc" | "simulator" | "swca" => section = name.to_string(),
                other => return Err(err(format!("unknown section [{other}]"))),
            }
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got {trimmed:?}")))?;
        let key = key.trim();
        let value = value.split(" #").next().unwrap_or(value).trim();
        apply(&mut cfg, &section, key, value).map_err(err)?;
    }
    sanity(&cfg, path)?;
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, section: &str, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(value: &str, key: &str) -> Result<T, String> {
        value
            .parse()
            .map_err(|_| format!("key {key}: cannot parse {value:?}"))
    }
    fn sim_kind(value: &str, key: &str, gw_c: Option<f64>) -> Result<SimilarityKind, String> {
        match value {
            "iou" => Ok(SimilarityKind::Iou),
            "giou" => Ok(SimilarityKind::Giou),
            "gw" => Ok(SimilarityKind::GaussianWasserstein { c: gw_c }),
            other => Err(format!("key {key}: expected iou|giou|gw, got {other:?}")),
        }
    }

    match (section, key) {
        ("run", "seed") => cfg.seed = num(value, key)?,

        ("similarity", "kind") => {
            let c = match cfg.similarity {
                SimilarityKind::GaussianWasserstein { c } => c,
                _ => None,
            };
            cfg.similarity = sim_kind(value, key, c)?;
        }
        ("similarity", "gw_c") => {
            let c = if value == "auto" {
                None
            } else {
                let v: f64 = num(value, key)?;
                if v <= 0.0 {
                    return Err(format!("key gw_c: must be positive, got {value}"));
                }
                Some(v)
            };
            if let SimilarityKind::GaussianWasserstein { c: slot } = &mut cfg.similarity {
                *slot = c;
            } else {
                return Err("key gw_c: only meaningful when kind = gw (set kind first)".into());
            }
        }

        ("cbc", "alpha") => {
            cfg.alpha = num(value, key)?;
            if !(0.0..=1.0).contains(&cfg.alpha) {
                return Err(format!("key alpha: must lie in [0, 1], got {value}"));
            }
        }
        ("cbc", "qaf_similarity") => cfg.qaf_similarity = sim_kind(value, key, None)?,
        ("cbc", "top_q") => cfg.top_q = num(value, key)?,
        ("cbc", "threshold_mode") => {
            cfg.mode = match value {
                "top1" => ThresholdMode::Top1Only,
                "threshold_top1" => ThresholdMode::ThresholdTop1,
                other => {
                    return Err(format!(
                        "key threshold_mode: expected top1|threshold_top1, got {other:?}"
                    ))
                }
            }
        }
        ("cbc", "epochs") => cfg.epochs = num(value, key)?,
        ("cbc", "gamma") => {
            cfg.gamma = num(value, key)?;
            if !(0.0..=1.0).contains(&cfg.gamma) {
                return Err(format!("key gamma: must lie in [0, 1], got {value}"));
            }
        }
        ("cbc", "ema_momentum") => {
            cfg.ema_momentum = num(value, key)?;
            if !(0.0..=1.0).contains(&cfg.ema_momentum) {
                return Err(format!("key ema_momentum: must lie in [0, 1], got {value}"));
            }
        }
        ("cbc", "ema_steps_per_epoch") => cfg.ema_steps_per_epoch = num(value, key)?,
        ("cbc", "threshold_pool") => {
            cfg.background_in_pool = match value {
                "positives" => false,
                "all" => true,
                other => {
                    return Err(format!(
                        "key threshold_pool: expected positives|all, got {other:?}"
                    ))
                }
            }
        }
        ("cbc", "grouping") => {
            cfg.grouping = match value {
                "per_category" => CategoryGrouping::PerCategory,
                "pooled" => CategoryGrouping::Pooled,
                other => {
                    return Err(format!(
                        "key grouping: expected per_category|pooled, got {other:?}"
                    ))
                }
            }
        }

        ("simulator", "scenes") => cfg.sim.scenes = num(value, key)?,
        ("simulator", "objects_per_scene") => cfg.sim.objects_per_scene = num(value, key)?,
        ("simulator", "field_w") => cfg.sim.field_w = num(value, key)?,
        ("simulator", "field_h") => cfg.sim.field_h = num(value, key)?,
        ("simulator", "shift_mean_slow") => cfg.sim.shift_mean_slow = num(value, key)?,
        ("simulator", "shift_std_slow") => cfg.sim.shift_std_slow = num(value, key)?,
        ("simulator", "shift_mean_fast") => cfg.sim.shift_mean_fast = num(value, key)?,
        ("simulator", "shift_std_fast") => cfg.sim.shift_std_fast = num(value, key)?,
        ("simulator", "unshifted_fraction") => cfg.sim.unshifted_fraction = num(value, key)?,
        ("simulator", "direction") => {
            cfg.sim.direction = if value == "uniform" {
                Direction::UniformAngle
            } else if let Some(deg) = value.strip_prefix("fixed:") {
                Direction::Fixed(num::<f64>(deg, key)?.to_radians())
            } else {
                return Err(format!(
                    "key direction: expected uniform|fixed:<degrees>, got {value:?}"
                ));
            }
        }
        ("simulator", "sigma_det") => cfg.sim.sigma_det = num(value, key)?,
        ("simulator", "logit_scale") => cfg.sim.logit_scale = num(value, key)?,
        ("simulator", "reliability") => {
            cfg.sim.reliability = num(value, key)?;
            if !(0.0..=1.0).contains(&cfg.sim.reliability) {
                return Err(format!("key reliability: must lie in [0, 1], got {value}"));
            }
        }
        ("simulator", "samples_per_object") => cfg.sim.samples_per_object = num(value, key)?,
        ("simulator", "feedback_gain") => cfg.sim.feedback_gain = num(value, key)?,

        ("swca", "window") => cfg.swca.window = num(value, key)?,
        ("swca", "channels") => cfg.swca.channels = num(value, key)?,
        ("swca", "d_k") => cfg.swca.d_k = num(value, key)?,
        ("swca", "heads") => cfg.swca.heads = num(value, key)?,
        ("swca", "op_init") => {
            cfg.swca.op_init = match value {
                "zero" => OpInit::Zero,
                "random" => OpInit::Random,
                other => return Err(format!("key op_init: expected zero|random, got {other:?}")),
            }
        }
        ("swca", "grid_h") => cfg.swca.grid_h = num(value, key)?,
        ("swca", "grid_w") => cfg.swca.grid_w = num(value, key)?,
        ("swca", "demo_shift_x") => cfg.swca.demo_shift_x = num(value, key)?,
        ("swca", "demo_shift_y") => cfg.swca.demo_shift_y = num(value, key)?,

        ("", key) => return Err(format!("key {key} appears before any [section] header")),
        (section, key) => return Err(format!("unknown key {key} in section [{section}]")),
    }
    Ok(())
}

fn sanity(cfg: &RunConfig, path: &str) -> CliResult<()> {
    let bad = |message: &str| CliError::Config {
        path: path.to_string(),
        line: 0,
        message: message.to_string(),
    };
    if cfg.epochs == 0 {
        return Err(bad("epochs must be at least 1"));
    }
    if cfg.top_q == 0 {
        return Err(bad("top_q must be at least 1"));
    }
    if cfg.sim.samples_per_object == 0 {
        return Err(bad("samples_per_object must be at least 1"));
    }
    if cfg.swca.window == 0 {
        return Err(bad("window must be at least 1"));
    }
    if cfg.swca.heads == 0 || !cfg.swca.d_k.is_multiple_of(cfg.swca.heads) {
        return Err(bad("d_k must be a positive multiple of heads"));
    }
    if cfg.swca.channels == 0 || cfg.swca.grid_h == 0 || cfg.swca.grid_w == 0 {
        return Err(bad("swca grid dimensions and channels must be positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = parse_config("", "mem").unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.epochs, 24);
        assert_eq!(cfg.gamma, 0.5);
        assert_eq!(cfg.ema_momentum, 0.9997);
        assert_eq!(cfg.swca.window, 8);
    }

    #[test]
    fn parses_sections_and_comments() {
        let text = "
# overall run
[run]
seed = 9

[similarity]
kind = gw
gw_c = 4.0   # fixed normalization

[cbc]
gamma = 1.0
threshold_mode = threshold_top1

[simulator]
shift_mean_fast = 12.5
direction = fixed:90
";
        let cfg = parse_config(text, "mem").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(
            cfg.similarity,
            SimilarityKind::GaussianWasserstein { c: Some(4.0) }
        );
        assert_eq!(cfg.gamma, 1.0);
        assert_eq!(cfg.mode, ThresholdMode::ThresholdTop1);
        assert_eq!(cfg.sim.shift_mean_fast, 12.5);
        match cfg.sim.direction {
            Direction::Fixed(r) => assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = parse_config("[cbc]\ngama = 0.5\n", "mem").unwrap_err();
        assert!(err.to_string().contains("unknown key gama"), "{err}");
        let err = parse_config("[nope]\n", "mem").unwrap_err();
        assert!(err.to_string().contains("unknown section"), "{err}");
        let err = parse_config("seed = 3\n", "mem").unwrap_err();
        assert!(err.to_string().contains("before any"), "{err}");
    }

    #[test]
    fn range_checks() {
        assert!(parse_config("[cbc]\nalpha = 1.5\n", "mem").is_err());
        assert!(parse_config("[similarity]\nkind = gw\ngw_c = -1\n", "mem").is_err());
        assert!(parse_config("[cbc]\nepochs = 0\n", "mem").is_err());
    }
}
