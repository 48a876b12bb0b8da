//! Experiment orchestration: distill, eval, plot and control-sim verbs.
//!
//! Directory layout per experiment:
//!   <out>/<name>/manifest.json
//!   <out>/<name>/surrogate/    samples and selected-id CSVs
//!   <out>/<name>/checkpoints/  model checkpoints and loss traces
//!   <out>/<name>/reports/      per-cell report JSON and aggregate.csv
//!   <out>/<name>/plots/        scatter PNGs
//!   <out>/<name>/control/     trajectory archives and control JSON

use crate::config::{mix_seed, DatasetSpec, ExperimentConfig, Extractor, Method};
use crate::data::{load_image_folder, make_synthetic_dataset};
use crate::manifest::{CellRecord, Manifest};
use crate::plot::plot_embedding_scatter;
use distillkit::checkpoint::DiffusionCheckpoint;
use distillkit::control::{
    cost_to_go_estimate, diversity_terminal_cost, follmer_drift, repr_path_cost, simulate_sde,
    solve_trilevel_toy, GaussianMixture, SdeOptions, TrilevelInstance,
};
use distillkit::coreset::{herding_select, kcenter_select, random_select, SelectedIds};
use distillkit::dataset::{FeatureSet, LabeledDataset};
use distillkit::diffusion::{ancestral_sample, Denoiser, EncoderDecoder, NoiseSchedule};
use distillkit::error::{DistillError, Result};
use distillkit::eval::{
    build_report, gaussian_fid, mmd_rbf, prdc, train_eval_classifier, Bandwidth, SurrogateDataset,
    SurrogateOrigin, TestModel,
};
use distillkit::minimax::{finetune, DivMode, MinimaxConfig, ReprMode, TraceRow};
use distillkit::nn::conv::{ConvNet, Tensor3};
use distillkit::nn::Activation;
use distillkit::rng::rng_from_seed;
use std::path::{Path, PathBuf};
use std::time::Instant;

// Fixed tags for deriving independent seed streams from the base seed.
const TAG_DATASET: u64 = 0x01;
const TAG_TEST: u64 = 0x02;
const TAG_INIT: u64 = 0x03;
const TAG_PRETRAIN: u64 = 0x04;
const TAG_FINETUNE: u64 = 0x05;
const TAG_SELECT: u64 = 0x06;
const TAG_SAMPLE: u64 = 0x07;
const TAG_EXTRACTOR: u64 = 0x08;
const TAG_CONTROL: u64 = 0x09;

pub struct ExperimentPaths {
    pub root: PathBuf,
}

impl ExperimentPaths {
    pub fn new(out_dir: &Path, name: &str) -> Self {
        ExperimentPaths {
            root: out_dir.join(name),
        }
    }

    pub fn ensure_dirs(&self) -> Result<()> {
        for child in ["surrogate", "checkpoints", "reports", "plots", "control"] {
            std::fs::create_dir_all(self.root.join(child))?;
        }
        Ok(())
    }

    pub fn samples_csv(&self, method: Method, ipc: usize) -> PathBuf {
        self.root
            .join("surrogate")
            .join(format!("{}_ipc{}.csv", method.as_str(), ipc))
    }

    pub fn ids_csv(&self, method: Method, ipc: usize) -> PathBuf {
        self.root
            .join("surrogate")
            .join(format!("{}_ipc{}_ids.csv", method.as_str(), ipc))
    }

    pub fn checkpoint(&self, method: Method) -> PathBuf {
        self.root
            .join("checkpoints")
            .join(format!("{}.ckpt", method.as_str()))
    }

    pub fn trace_csv(&self, method: Method) -> PathBuf {
        self.root
            .join("checkpoints")
            .join(format!("{}_trace.csv", method.as_str()))
    }

    pub fn report_json(&self, method: Method, ipc: usize) -> PathBuf {
        self.root
            .join("reports")
            .join(format!("{}_ipc{}.json", method.as_str(), ipc))
    }

    pub fn aggregate_csv(&self) -> PathBuf {
        self.root.join("reports").join("aggregate.csv")
    }

    pub fn scatter_png(&self, ipc: usize) -> PathBuf {
        self.root.join("plots").join(format!("scatter_ipc{ipc}.png"))
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned()
    }
}

/// Shortest round-trip float formatting; parseable back to the same bits.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_samples_csv(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let dim = ds.dim();
    let mut out = String::from("label");
    for d in 0..dim {
        out.push_str(&format!(",f{d}"));
    }
    out.push('\n');
    for (row, &label) in ds.features.iter().zip(&ds.labels) {
        out.push_str(&label.to_string());
        for v in row {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_samples_csv(path: &Path, class_count: usize) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let label: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DistillError::invalid(format!("bad label on line {i}")))?;
        let row: Vec<f64> = parts
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| DistillError::invalid(format!("bad value on line {i}: {e}")))?;
        features.push(row);
        labels.push(label);
    }
    LabeledDataset::new(features, labels, class_count)
}

fn write_ids_csv(path: &Path, ids: &SelectedIds) -> Result<()> {
    let mut out = String::from("class,rank,source_id\n");
    for (class, rank, id) in ids.rows() {
        out.push_str(&format!("{class},{rank},{id}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut out = String::from("step,simple,repr,div,total\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.step,
            fmt_f64(row.simple),
            fmt_f64(row.repr),
            fmt_f64(row.div),
            fmt_f64(row.total)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The training pool for the run, derived deterministically from the seed.
pub fn build_dataset(cfg: &ExperimentConfig, base_seed: u64) -> Result<LabeledDataset> {
    match &cfg.dataset {
        DatasetSpec::Synthetic { per_class, .. } => {
            let (ds, _) =
                make_synthetic_dataset(&cfg.dataset, *per_class, mix_seed(&[base_seed, TAG_DATASET]))?;
            Ok(ds)
        }
        DatasetSpec::ImageFolder {
            path,
            resolution,
            channels,
        } => {
            let (ds, _) = load_image_folder(Path::new(path), *resolution, *channels)?;
            Ok(ds)
        }
    }
}

/// Held-out test set: fresh synthetic draws, or the folder itself for
/// image datasets at desk scale.
fn build_test_set(cfg: &ExperimentConfig, base_seed: u64) -> Result<LabeledDataset> {
    match &cfg.dataset {
        DatasetSpec::Synthetic { .. } => {
            let (ds, _) = make_synthetic_dataset(
                &cfg.dataset,
                cfg.eval.test_per_class,
                mix_seed(&[base_seed, TAG_TEST]),
            )?;
            Ok(ds)
        }
        DatasetSpec::ImageFolder { .. } => build_dataset(cfg, base_seed),
    }
}

fn image_shape(cfg: &ExperimentConfig) -> Option<(usize, usize)> {
    match &cfg.dataset {
        DatasetSpec::ImageFolder {
            resolution,
            channels,
            ..
        } => Some((*channels, *resolution)),
        _ => None,
    }
}

/// Maps raw rows to metric features per the configured extractor.
fn extract_features(
    cfg: &ExperimentConfig,
    base_seed: u64,
    pool: &LabeledDataset,
    rows: &LabeledDataset,
) -> Result<FeatureSet> {
    match cfg.eval.extractor {
        Extractor::Identity => FeatureSet::from_dataset(rows),
        Extractor::Conv => {
            let (channels, side) = image_shape(cfg).ok_or_else(|| {
                DistillError::invalid("conv extractor requires an image dataset")
            })?;
            let mut rng = rng_from_seed(mix_seed(&[base_seed, TAG_EXTRACTOR]));
            let mut net = ConvNet::init(channels, side, [8, 12, 16], pool.class_count, &mut rng)?;
            train_conv_briefly(&mut net, pool, channels, side)?;
            let feats = rows
                .features
                .iter()
                .map(|r| {
                    Tensor3::from_flat(channels, side, side, r.clone()).map(|img| net.features(&img))
                })
                .collect::<Result<Vec<_>>>()?;
            FeatureSet::new(feats, rows.labels.clone(), (0..rows.len()).collect(), rows.class_count)
        }
    }
}

fn train_conv_briefly(
    net: &mut ConvNet,
    pool: &LabeledDataset,
    channels: usize,
    side: usize,
) -> Result<()> {
    let mut params = net.params_flat();
    let mut opt = distillkit::nn::Sgd::new(0.05, 0.9, params.len());
    let batch = 16usize.min(pool.len());
    for epoch in 0..8 {
        for chunk_start in (0..pool.len()).step_by(batch) {
            let end = (chunk_start + batch).min(pool.len());
            let mut images = Vec::with_capacity(end - chunk_start);
            let mut labels = Vec::with_capacity(end - chunk_start);
            for idx in chunk_start..end {
                images.push(Tensor3::from_flat(
                    channels,
                    side,
                    side,
                    pool.features[idx].clone(),
                )?);
                labels.push(pool.labels[idx]);
            }
            let (_, grads) = net.loss_and_grad(&images, &labels);
            opt.step(&mut params, &grads);
            net.set_params_flat(&params);
        }
        let _ = epoch;
    }
    Ok(())
}

struct DiffusionArtifacts {
    base: Denoiser,
    minimax: Option<Denoiser>,
    minimax_trace: Vec<TraceRow>,
    base_trace: Vec<TraceRow>,
}

/// Pretrains once, then produces the naive fine-tune (simple loss only) and
/// the minimax fine-tune from the same starting point and seed.
fn prepare_diffusion(
    cfg: &ExperimentConfig,
    dataset: &LabeledDataset,
    schedule: &NoiseSchedule,
    base_seed: u64,
    want_minimax: bool,
) -> Result<DiffusionArtifacts> {
    let spec = &cfg.diffusion;
    let mut init_rng = rng_from_seed(mix_seed(&[base_seed, TAG_INIT]));
    let model = Denoiser::init(
        dataset.dim(),
        dataset.class_count,
        spec.class_embed_dim,
        spec.time_feat_dim,
        &spec.hidden,
        Activation::Tanh,
        &mut init_rng,
    );
    let encoder = EncoderDecoder::identity();
    let pretrain_cfg = MinimaxConfig {
        lambda_r: 0.0,
        lambda_d: 0.0,
        repr_mode: ReprMode::Off,
        div_mode: DivMode::Off,
        epochs: spec.pretrain_epochs,
        learning_rate: spec.pretrain_learning_rate,
        batch_size: spec.pretrain_batch_size,
        ..cfg.minimax.clone()
    };
    let pretrained = finetune(
        model,
        dataset,
        &encoder,
        schedule,
        &pretrain_cfg,
        mix_seed(&[base_seed, TAG_PRETRAIN]),
    )?
    .model;

    // The naive fine-tune shares every knob with the minimax one except
    // the criteria themselves, so the two runs are bit-comparable.
    let ft_seed = mix_seed(&[base_seed, TAG_FINETUNE]);
    let base_cfg = MinimaxConfig {
        lambda_r: 0.0,
        lambda_d: 0.0,
        repr_mode: ReprMode::Off,
        div_mode: DivMode::Off,
        ..cfg.minimax.clone()
    };
    let base_out = finetune(pretrained.clone(), dataset, &encoder, schedule, &base_cfg, ft_seed)?;

    let (minimax, minimax_trace) = if want_minimax {
        let out = finetune(pretrained, dataset, &encoder, schedule, &cfg.minimax, ft_seed)?;
        (Some(out.model), out.trace)
    } else {
        (None, Vec::new())
    };
    Ok(DiffusionArtifacts {
        base: base_out.model,
        minimax,
        minimax_trace,
        base_trace: base_out.trace,
    })
}

/// Samples exactly `ipc` embeddings per class; the seed stream depends on
/// (base seed, ipc, class) but not on the method, so ablations that leave
/// the model untouched reproduce the baseline samples exactly.
fn sample_surrogate(
    model: &Denoiser,
    cfg: &ExperimentConfig,
    schedule: &NoiseSchedule,
    class_count: usize,
    ipc: usize,
    base_seed: u64,
) -> Result<LabeledDataset> {
    let mut features = Vec::with_capacity(class_count * ipc);
    let mut labels = Vec::with_capacity(class_count * ipc);
    for class in 0..class_count {
        let seed = mix_seed(&[base_seed, TAG_SAMPLE, ipc as u64, class as u64]);
        let batch = ancestral_sample(
            model,
            schedule,
            class,
            cfg.diffusion.sample_steps,
            ipc,
            seed,
            cfg.diffusion.sampler,
        )?;
        for row in batch {
            features.push(row);
            labels.push(class);
        }
    }
    LabeledDataset::new(features, labels, class_count)
}

fn surrogate_from_selection(
    dataset: &LabeledDataset,
    ids: &SelectedIds,
) -> Result<LabeledDataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (class, ranked) in ids.per_class.iter().enumerate() {
        for &id in ranked {
            features.push(dataset.features[id].clone());
            labels.push(class);
        }
    }
    LabeledDataset::new(features, labels, dataset.class_count)
}

pub fn run_distill(cfg: &ExperimentConfig, out_dir: &Path, base_seed: u64) -> Result<Manifest> {
    cfg.validate()?;
    let paths = ExperimentPaths::new(out_dir, &cfg.name);
    paths.ensure_dirs()?;
    let mut manifest = Manifest::new(&cfg.name, &cfg.config_hash(), base_seed);

    let dataset = build_dataset(cfg, base_seed)?;
    let fs = FeatureSet::from_dataset(&dataset)?;
    let schedule = NoiseSchedule::new(cfg.diffusion.timesteps, cfg.diffusion.schedule)?;

    let needs_diffusion = cfg.methods.iter().any(Method::is_diffusion);
    let wants_minimax = cfg.methods.contains(&Method::DiffusionMinimax);
    let diffusion = if needs_diffusion {
        Some(prepare_diffusion(cfg, &dataset, &schedule, base_seed, wants_minimax)?)
    } else {
        None
    };

    // Persist diffusion artifacts once per method.
    if let Some(art) = &diffusion {
        if cfg.methods.contains(&Method::DiffusionBase) {
            let ckpt = DiffusionCheckpoint {
                model: art.base.clone(),
                schedule_kind: cfg.diffusion.schedule,
                timesteps: cfg.diffusion.timesteps,
                zhat_mode: cfg.minimax.zhat_mode,
                sampler: cfg.diffusion.sampler,
            };
            ckpt.save(&paths.checkpoint(Method::DiffusionBase))?;
            write_trace_csv(&paths.trace_csv(Method::DiffusionBase), &art.base_trace)?;
        }
        if let Some(minimax) = &art.minimax {
            let ckpt = DiffusionCheckpoint {
                model: minimax.clone(),
                schedule_kind: cfg.diffusion.schedule,
                timesteps: cfg.diffusion.timesteps,
                zhat_mode: cfg.minimax.zhat_mode,
                sampler: cfg.diffusion.sampler,
            };
            ckpt.save(&paths.checkpoint(Method::DiffusionMinimax))?;
            write_trace_csv(&paths.trace_csv(Method::DiffusionMinimax), &art.minimax_trace)?;
        }
    }

    for &method in &cfg.methods {
        for &ipc in &cfg.ipc {
            let started = Instant::now();
            let mut artifacts = Vec::new();
            let items = match method {
                Method::Random => {
                    let ids =
                        random_select(&fs, ipc, mix_seed(&[base_seed, TAG_SELECT, ipc as u64]))?;
                    write_ids_csv(&paths.ids_csv(method, ipc), &ids)?;
                    artifacts.push(paths.relative(&paths.ids_csv(method, ipc)));
                    surrogate_from_selection(&dataset, &ids)?
                }
                Method::Herding => {
                    let ids = herding_select(&fs, ipc)?;
                    write_ids_csv(&paths.ids_csv(method, ipc), &ids)?;
                    artifacts.push(paths.relative(&paths.ids_csv(method, ipc)));
                    surrogate_from_selection(&dataset, &ids)?
                }
                Method::Kcenter => {
                    let ids =
                        kcenter_select(&fs, ipc, mix_seed(&[base_seed, TAG_SELECT, ipc as u64]))?;
                    write_ids_csv(&paths.ids_csv(method, ipc), &ids)?;
                    artifacts.push(paths.relative(&paths.ids_csv(method, ipc)));
                    surrogate_from_selection(&dataset, &ids)?
                }
                Method::DiffusionBase => {
                    let art = diffusion.as_ref().expect("diffusion prepared");
                    artifacts.push(paths.relative(&paths.checkpoint(method)));
                    artifacts.push(paths.relative(&paths.trace_csv(method)));
                    sample_surrogate(&art.base, cfg, &schedule, dataset.class_count, ipc, base_seed)?
                }
                Method::DiffusionMinimax => {
                    let art = diffusion.as_ref().expect("diffusion prepared");
                    let model = art.minimax.as_ref().expect("minimax prepared");
                    artifacts.push(paths.relative(&paths.checkpoint(method)));
                    artifacts.push(paths.relative(&paths.trace_csv(method)));
                    sample_surrogate(model, cfg, &schedule, dataset.class_count, ipc, base_seed)?
                }
            };
            let origin = if method.is_diffusion() {
                SurrogateOrigin::Generated
            } else {
                SurrogateOrigin::Selected
            };
            let surrogate = SurrogateDataset::new(items, ipc, origin, cfg.config_hash())?;
            write_samples_csv(&paths.samples_csv(method, ipc), &surrogate.items)?;
            artifacts.push(paths.relative(&paths.samples_csv(method, ipc)));
            manifest.distill_cells.push(CellRecord {
                method: method.as_str().to_string(),
                ipc,
                artifacts,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
                complete: true,
            });
            manifest.save(&paths.root)?;
        }
    }
    manifest.save(&paths.root)?;
    Ok(manifest)
}

fn test_model_name(tm: &TestModel) -> &'static str {
    match tm {
        TestModel::Mlp { .. } => "mlp",
        TestModel::Conv3 { .. } => "conv3",
    }
}

pub fn run_eval(cfg: &ExperimentConfig, out_dir: &Path, base_seed: u64) -> Result<Manifest> {
    cfg.validate()?;
    let paths = ExperimentPaths::new(out_dir, &cfg.name);
    let started = Instant::now();
    let mut manifest = Manifest::load(&paths.root).map_err(|_| {
        DistillError::invalid(format!(
            "no manifest under {}; run distill first",
            paths.root.display()
        ))
    })?;

    let dataset = build_dataset(cfg, base_seed)?;
    let test_set = build_test_set(cfg, base_seed)?;
    let real_features = extract_features(cfg, base_seed, &dataset, &dataset)?;

    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &ipc in &cfg.ipc {
            let samples_path = paths.samples_csv(method, ipc);
            if !samples_path.exists() {
                return Err(DistillError::invalid(format!(
                    "missing surrogate for ({}, ipc {ipc}); run distill first",
                    method.as_str()
                )));
            }
            let items = read_samples_csv(&samples_path, dataset.class_count)?;
            let accuracy =
                train_eval_classifier(&items, &test_set, &cfg.eval.protocol, &cfg.seeds)?;
            let surro_features = extract_features(cfg, base_seed, &dataset, &items)?;
            let mmd = mmd_rbf(&real_features, &surro_features, Bandwidth::MedianHeuristic)?;
            let fid = gaussian_fid(&real_features, &surro_features)?;
            let quality = prdc(&real_features, &surro_features, cfg.eval.prdc_k)?;
            let report = build_report(accuracy, mmd, fid, &quality)?;
            let report_path = paths.report_json(method, ipc);
            std::fs::write(&report_path, report.to_json())?;
            manifest
                .eval_artifacts
                .push(paths.relative(&report_path));
            rows.push(format!(
                "{},{},{},{},{},{},{},{},{},{}",
                method.as_str(),
                ipc,
                test_model_name(&cfg.eval.protocol.test_model),
                fmt_f64(report.top1_mean),
                fmt_f64(report.top1_std),
                fmt_f64(report.mmd),
                fmt_f64(report.fid),
                fmt_f64(report.precision),
                fmt_f64(report.recall),
                fmt_f64(report.coverage)
            ));
        }
    }
    let mut csv = String::from(
        "method,ipc,test_model,top1_mean,top1_std,mmd,fid,precision,recall,coverage\n",
    );
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    std::fs::write(paths.aggregate_csv(), csv)?;
    manifest
        .eval_artifacts
        .push(paths.relative(&paths.aggregate_csv()));
    manifest.eval_artifacts.sort();
    manifest.eval_artifacts.dedup();
    manifest.eval_wall_ms = started.elapsed().as_secs_f64() * 1e3;
    manifest.save(&paths.root)?;
    Ok(manifest)
}

/// Accuracy annotations for the scatter panels, parsed from aggregate.csv.
fn aggregate_accuracy(paths: &ExperimentPaths, method: Method, ipc: usize) -> Option<f64> {
    let text = std::fs::read_to_string(paths.aggregate_csv()).ok()?;
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() >= 4 && cols[0] == method.as_str() && cols[1] == ipc.to_string() {
            return cols[3].parse().ok();
        }
    }
    None
}

pub fn run_plot(cfg: &ExperimentConfig, out_dir: &Path, base_seed: u64) -> Result<Manifest> {
    cfg.validate()?;
    let paths = ExperimentPaths::new(out_dir, &cfg.name);
    let mut manifest = Manifest::load(&paths.root)
        .unwrap_or_else(|_| Manifest::new(&cfg.name, &cfg.config_hash(), base_seed));
    let dataset = build_dataset(cfg, base_seed)?;
    for &ipc in &cfg.ipc {
        let mut per_method = Vec::new();
        for &method in &cfg.methods {
            let path = paths.samples_csv(method, ipc);
            if !path.exists() {
                return Err(DistillError::invalid(format!(
                    "missing surrogate for ({}, ipc {ipc}); run distill first",
                    method.as_str()
                )));
            }
            let items = read_samples_csv(&path, dataset.class_count)?;
            per_method.push((
                method.as_str().to_string(),
                items.features,
                aggregate_accuracy(&paths, method, ipc),
            ));
        }
        let out = paths.scatter_png(ipc);
        plot_embedding_scatter(&dataset.features, &per_method, &out)?;
        manifest.plot_artifacts.push(paths.relative(&out));
    }
    manifest.plot_artifacts.sort();
    manifest.plot_artifacts.dedup();
    manifest.save(&paths.root)?;
    Ok(manifest)
}

pub fn run_control_sim(cfg: &ExperimentConfig, out_dir: &Path, base_seed: u64) -> Result<Manifest> {
    cfg.validate()?;
    let paths = ExperimentPaths::new(out_dir, &cfg.name);
    paths.ensure_dirs()?;
    let mut manifest = Manifest::load(&paths.root)
        .unwrap_or_else(|_| Manifest::new(&cfg.name, &cfg.config_hash(), base_seed));

    let spec = &cfg.control;
    let mix = GaussianMixture::new(spec.weights.clone(), spec.means.clone())?;
    let z0 = vec![0.0; mix.dim()];
    let bundle = simulate_sde(
        |z, t| follmer_drift(z, t, &mix),
        &z0,
        spec.steps,
        spec.particles,
        mix_seed(&[base_seed, TAG_CONTROL]),
        SdeOptions::default(),
    )?;
    let bundle_path = paths.root.join("control").join("bundle.narc");
    bundle.to_archive()?.save(&bundle_path)?;

    let cost = cost_to_go_estimate(&bundle, &mix)?;
    let diversity = if spec.particles >= 2 {
        Some(diversity_terminal_cost(&bundle)?)
    } else {
        None
    };
    // Path representativeness of the first particle against direct draws.
    let mut rng = rng_from_seed(mix_seed(&[base_seed, TAG_CONTROL, 1]));
    let direct: Vec<Vec<f64>> = (0..50).map(|_| mix.sample(&mut rng)).collect();
    let path_cost = if mix.dim() >= 2 {
        Some(repr_path_cost(
            &bundle.states[0],
            &bundle.times,
            &direct,
            spec.q_tilde,
        )?)
    } else {
        None
    };
    let costs_path = paths.root.join("control").join("costs.json");
    let costs_json = serde_json::json!({
        "cost_to_go": cost.value,
        "clipped_terminals": cost.clipped,
        "diversity_terminal": diversity,
        "repr_path_cost_particle0": path_cost,
        "particles": spec.particles,
        "steps": spec.steps,
    });
    std::fs::write(&costs_path, serde_json::to_string_pretty(&costs_json).unwrap())?;

    let tri = &spec.trilevel;
    let instance = TrilevelInstance {
        samples: distillkit::control::clustered_circle_samples(
            tri.samples_angle,
            tri.samples_arc,
            tri.samples_count,
            tri.radius,
        ),
        n_particles: tri.particles,
        q_tilde: tri.q_tilde,
        radius: tri.radius,
        grid_resolution: tri.grid_resolution,
        grid_extent: tri.grid_extent,
    };
    let solution = solve_trilevel_toy(&instance)?;
    let tri_path = paths.root.join("control").join("trilevel.json");
    let tri_json = serde_json::json!({
        "positions": solution.positions,
        "level_values": {
            "inner": solution.inner_values,
            "inner_optimum": solution.inner_optimum,
            "middle": solution.middle_value,
            "top": solution.top_value,
        },
        "grid_resolution": solution.grid_resolution,
    });
    std::fs::write(&tri_path, serde_json::to_string_pretty(&tri_json).unwrap())?;

    for p in [&bundle_path, &costs_path, &tri_path] {
        manifest.control_artifacts.push(paths.relative(p));
    }
    manifest.control_artifacts.sort();
    manifest.control_artifacts.dedup();
    manifest.save(&paths.root)?;
    Ok(manifest)
}

pub fn run_all(cfg: &ExperimentConfig, out_dir: &Path, base_seed: u64) -> Result<Manifest> {
    run_distill(cfg, out_dir, base_seed)?;
    run_eval(cfg, out_dir, base_seed)?;
    run_plot(cfg, out_dir, base_seed)?;
    run_control_sim(cfg, out_dir, base_seed)
}
