//! Command-line driver: aSim reports, box correction runs, shift
//! simulation, subset selection, and the alignment demo.
//!
//! Every command is deterministic given its config and seed; re-runs write
//! byte-identical outputs. The env var `SHIFTLAB_SEED` overrides any seed
//! from flags or config. Failures exit non-zero with a single
//! `error: ...` line on stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use shiftlab::boxgeom::{LabeledBox, SimilarityKind};
use shiftlab::matching::{asim, select_shift_subset, CategoryGrouping, ImagePair};
use shiftlab::rng::Rng;
use shiftlab::sim::{
    run_correction_experiment, run_on_scenes, run_static_correction, scene_from_reference,
    synthetic_grid_pair, ScenePair, Trajectory,
};
use shiftlab::swca::{swca_align_with_fields, OffsetField, SwcaParams};

use shiftlab_cli::annotations::{
    self, from_labeled, load_annotations, load_samples, save_annotations, to_labeled, to_samples,
    AnnotationFile, CategoryTable,
};
use shiftlab_cli::config::load_config;
use shiftlab_cli::error::{io_err, CliError, CliResult};
use shiftlab_cli::gridio;
use shiftlab_cli::util::{parse_per_image_csv, per_image_csv, trajectory_csv, write_atomic};

#[derive(Parser)]
#[command(
    name = "shiftlab",
    version,
    about = "cross-modality box correction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SimArg {
    Iou,
    Giou,
    Gw,
}

#[derive(Subcommand)]
enum Command {
    /// Average box similarity between two annotation files after optimal
    /// per-image matching, printed on the 0-100 scale.
    Asim {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        sensed: PathBuf,
        #[arg(long = "sim", value_enum, default_value = "gw")]
        similarity: SimArg,
        /// Fixed normalization constant for gw (default: scale-adaptive).
        #[arg(long)]
        gw_c: Option<f64>,
        /// Also write a per-image CSV report.
        #[arg(long)]
        per_image: Option<PathBuf>,
        /// Pool categories instead of matching within each category.
        #[arg(long)]
        pooled: bool,
    },
    /// Run the progressive correction loop, writing the corrected
    /// annotations after every epoch plus the aSim trajectory.
    Correct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// `sim` (drift the reference via the configured shift model and
        /// sample from the surrogate detector) or a samples JSON file.
        #[arg(long)]
        samples_from: String,
        #[arg(long)]
        out_prefix: String,
    },
    /// Generate scene pairs and run the full correction experiment.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select the image ids whose aSim falls below mean - std.
    Subset {
        #[arg(long)]
        per_image: PathBuf,
    },
    /// Feed a synthetic shifted grid pair through the alignment cascade and
    /// dump the grids plus offset statistics.
    SwcaDemo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> std::process::ExitCode {
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

/// `SHIFTLAB_SEED` > `--seed` > config seed.
fn effective_seed(flag: Option<u64>, config_seed: u64) -> CliResult<u64> {
    if let Ok(text) = std::env::var("SHIFTLAB_SEED") {
        return text
            .trim()
            .parse()
            .map_err(|_| CliError::Other(format!("SHIFTLAB_SEED: cannot parse {text:?}")));
    }
    Ok(flag.unwrap_or(config_seed))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Asim {
            reference,
            sensed,
            similarity,
            gw_c,
            per_image,
            pooled,
        } => cmd_asim(
            &reference,
            &sensed,
            similarity,
            gw_c,
            per_image.as_deref(),
            pooled,
        ),
        Command::Correct {
            config,
            reference,
            samples_from,
            out_prefix,
        } => cmd_correct(&config, &reference, &samples_from, &out_prefix),
        Command::Simulate { config, seed, out } => cmd_simulate(&config, seed, &out),
        Command::Subset { per_image } => cmd_subset(&per_image),
        Command::SwcaDemo { config, seed, out } => cmd_swca_demo(&config, seed, &out),
    }
}

fn similarity_from(arg: SimArg, gw_c: Option<f64>) -> CliResult<SimilarityKind> {
    if let Some(c) = gw_c {
        if c <= 0.0 {
            return Err(CliError::Other(format!("--gw-c must be positive, got {c}")));
        }
    }
    Ok(match arg {
        SimArg::Iou => SimilarityKind::Iou,
        SimArg::Giou => SimilarityKind::Giou,
        SimArg::Gw => SimilarityKind::GaussianWasserstein { c: gw_c },
    })
}

/// Join two annotation files by image id: every id of either file appears
/// once, in reference order first, missing sides as empty sets.
fn join_by_id(
    reference: &AnnotationFile,
    sensed: &AnnotationFile,
    table: &mut CategoryTable,
) -> Vec<ImagePair> {
    let mut sensed_by_id: BTreeMap<&str, &annotations::ImageAnnotations> = sensed
        .images
        .iter()
        .map(|img| (img.id.as_str(), img))
        .collect();
    let mut pairs = Vec::new();
    for img in &reference.images {
        let senseds = sensed_by_id
            .remove(img.id.as_str())
            .map(|s| to_labeled(s, table))
            .unwrap_or_default();
        pairs.push(ImagePair {
            id: img.id.clone(),
            refs: to_labeled(img, table),
            senseds,
        });
    }
    for img in sensed.images.iter() {
        if sensed_by_id.contains_key(img.id.as_str()) {
            pairs.push(ImagePair {
                id: img.id.clone(),
                refs: Vec::new(),
                senseds: to_labeled(img, table),
            });
        }
    }
    pairs
}

fn cmd_asim(
    reference: &Path,
    sensed: &Path,
    similarity: SimArg,
    gw_c: Option<f64>,
    per_image_out: Option<&Path>,
    pooled: bool,
) -> CliResult<()> {
    let kind = similarity_from(similarity, gw_c)?;
    let ref_file = load_annotations(reference)?;
    let sensed_file = load_annotations(sensed)?;
    let mut table = CategoryTable::default();
    let pairs = join_by_id(&ref_file, &sensed_file, &mut table);
    let grouping = if pooled {
        CategoryGrouping::Pooled
    } else {
        CategoryGrouping::PerCategory
    };
    let report = asim(&pairs, kind, grouping);
    if let Some(path) = per_image_out {
        write_atomic(path, per_image_csv(&report.per_image).as_bytes())?;
    }
    println!("{:.2}", report.aggregate);
    Ok(())
}

fn write_epoch_files(
    prefix: &str,
    ids: &[String],
    initial: &[Vec<LabeledBox>],
    trajectory: &Trajectory,
    table: &CategoryTable,
) -> CliResult<()> {
    let write_epoch = |k: usize, boxes_per_image: &[Vec<LabeledBox>]| -> CliResult<()> {
        let file = AnnotationFile {
            images: ids
                .iter()
                .zip(boxes_per_image)
                .map(|(id, boxes)| from_labeled(id, boxes, table))
                .collect(),
        };
        save_annotations(&file, Path::new(&format!("{prefix}_epoch{k}.json")))
    };
    write_epoch(0, initial)?;
    for (k, snapshot) in trajectory.sensed_per_epoch.iter().enumerate() {
        write_epoch(k + 1, snapshot)?;
    }
    write_atomic(
        Path::new(&format!("{prefix}_trajectory.csv")),
        trajectory_csv(trajectory).as_bytes(),
    )
}

fn cmd_correct(
    config_path: &Path,
    reference: &Path,
    samples_from: &str,
    out_prefix: &str,
) -> CliResult<()> {
    let cfg = load_config(config_path)?;
    let seed = effective_seed(None, cfg.seed)?;
    let ref_file = load_annotations(reference)?;
    let mut table = CategoryTable::default();
    let ids: Vec<String> = ref_file.images.iter().map(|i| i.id.clone()).collect();
    let initial: Vec<Vec<LabeledBox>> = ref_file
        .images
        .iter()
        .map(|img| to_labeled(img, &mut table))
        .collect();

    let trajectory = if samples_from == "sim" {
        let shift_model = cfg.shift_model();
        let master = Rng::new(seed);
        let scenes: Vec<ScenePair> = ids
            .iter()
            .zip(&initial)
            .enumerate()
            .map(|(i, (id, boxes))| {
                scene_from_reference(
                    id,
                    boxes.clone(),
                    &shift_model,
                    master.derive_seed(i as u64),
                )
            })
            .collect::<Result<_, _>>()?;
        run_on_scenes(&cfg.experiment(), &scenes, seed)?
    } else {
        let samples_file = load_samples(Path::new(samples_from))?;
        let by_id: BTreeMap<&str, &annotations::ImageSamples> = samples_file
            .images
            .iter()
            .map(|img| (img.id.as_str(), img))
            .collect();
        let mut samples_per_image = Vec::with_capacity(ids.len());
        for id in &ids {
            match by_id.get(id.as_str()) {
                Some(img) => samples_per_image.push(to_samples(img, &mut table)?),
                None => samples_per_image.push(Vec::new()),
            }
        }
        let reference_sets: Vec<(String, Vec<LabeledBox>)> =
            ids.iter().cloned().zip(initial.iter().cloned()).collect();
        run_static_correction(&reference_sets, &samples_per_image, &cfg.experiment())?
    };

    write_epoch_files(out_prefix, &ids, &initial, &trajectory, &table)
}

fn cmd_simulate(config_path: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg = load_config(config_path)?;
    let seed = effective_seed(seed, cfg.seed)?;
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;

    let outcome = run_correction_experiment(&cfg.experiment(), seed)?;

    // generated scenes use the two-speed taxonomy
    let mut table = CategoryTable::default();
    table.intern("slow");
    table.intern("fast");

    let annotations_of = |select: &dyn Fn(&ScenePair) -> &[LabeledBox]| AnnotationFile {
        images: outcome
            .scenes
            .iter()
            .map(|s| from_labeled(&s.id, select(s), &table))
            .collect(),
    };
    save_annotations(
        &annotations_of(&|s| &s.reference),
        &out.join("reference.json"),
    )?;
    save_annotations(
        &annotations_of(&|s| &s.sensed_true),
        &out.join("sensed_true.json"),
    )?;

    let final_boxes = outcome
        .trajectory
        .sensed_per_epoch
        .last()
        .cloned()
        .unwrap_or_else(|| outcome.scenes.iter().map(|s| s.reference.clone()).collect());
    let corrected = AnnotationFile {
        images: outcome
            .scenes
            .iter()
            .zip(&final_boxes)
            .map(|(s, boxes)| from_labeled(&s.id, boxes, &table))
            .collect(),
    };
    save_annotations(&corrected, &out.join("corrected.json"))?;

    let mut shifts = String::from("image,object,dx,dy\n");
    for scene in &outcome.scenes {
        for (j, (dx, dy)) in scene.shifts.iter().enumerate() {
            shifts.push_str(&format!("{},{j},{dx},{dy}\n", scene.id));
        }
    }
    write_atomic(&out.join("shifts.csv"), shifts.as_bytes())?;
    write_atomic(
        &out.join("trajectory.csv"),
        trajectory_csv(&outcome.trajectory).as_bytes(),
    )?;

    let t = &outcome.trajectory;
    println!(
        "scenes {} | aSim vs truth: initial {:.2} final {:.2} | aSim vs reference: final {:.2}",
        outcome.scenes.len(),
        t.initial_true.unwrap_or(f64::NAN),
        t.final_true().unwrap_or(f64::NAN),
        t.records.last().map_or(t.initial_ref, |r| r.asim_ref),
    );
    Ok(())
}

fn cmd_subset(per_image: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(per_image).map_err(|e| io_err(per_image, e))?;
    let rows = parse_per_image_csv(&text, &per_image.display().to_string())?;
    let selected = select_shift_subset(&rows)?;
    for id in selected {
        println!("{id}");
    }
    Ok(())
}

fn offsets_stats(block: usize, field: &OffsetField) -> String {
    let (h, w) = field.shape();
    let n = (h * w) as f64;
    let (mut sx, mut sy, mut ax, mut ay, mut max) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (field.dx(y, x), field.dy(y, x));
            sx += dx;
            sy += dy;
            ax += dx.abs();
            ay += dy.abs();
            max = max.max(dx.abs()).max(dy.abs());
        }
    }
    format!(
        "{block},{},{},{},{},{max}\n",
        sx / n,
        sy / n,
        ax / n,
        ay / n
    )
}

fn cmd_swca_demo(config_path: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg = load_config(config_path)?;
    let seed = effective_seed(seed, cfg.seed)?;
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;

    let s = &cfg.swca;
    let (f_ref, f_sensed) = synthetic_grid_pair(
        seed,
        s.grid_h,
        s.grid_w,
        s.channels,
        (s.demo_shift_x, s.demo_shift_y),
    );
    let params = SwcaParams::seeded(s.channels, s.d_k, s.heads, s.window, seed, s.op_init);
    let (aligned, off1, off2) = swca_align_with_fields(&f_ref, &f_sensed, &params)?;

    gridio::write_grid(&f_ref, &out.join("f_reference.bin"))?;
    gridio::write_grid(&f_sensed, &out.join("f_sensed.bin"))?;
    gridio::write_grid(&aligned, &out.join("f_aligned.bin"))?;

    let mut csv = String::from("block,mean_dx,mean_dy,mean_abs_dx,mean_abs_dy,max_abs\n");
    csv.push_str(&offsets_stats(1, &off1));
    csv.push_str(&offsets_stats(2, &off2));
    write_atomic(&out.join("offsets.csv"), csv.as_bytes())?;

    println!(
        "grids {}x{}x{} written to {} (window {}, op_init {:?})",
        s.grid_h,
        s.grid_w,
        s.channels,
        out.display(),
        s.window,
        s.op_init
    );
    Ok(())
}
