//! Command implementations behind the `bcdm` binary.

use std::path::{Path, PathBuf};

use bcdm_core::analysis::{
    agreement_matrix, boundary_raster, determinacy_histogram, proxy_a_distance, svd_spectrum,
    GridSpec,
};
use bcdm_core::data::{make_moons, LabeledDataset, UnlabeledDataset};
use bcdm_core::rng::derive_seed;
use bcdm_core::tensor_net::OptimizerConfig;
use bcdm_core::theory::{bound_report, BoundConfig, Hypothesis, JointTrainConfig};
use bcdm_core::trainer::{train, ModelTriple, TrainConfig};

use crate::cli::{AnalyzeCommand, BoundArgs, GenCommand, TrainArgs};
use crate::config::{default_noise_sd, parse_method, DomainSpec, FileConfig, MoonsSpec};
use crate::csvio;
use crate::error::{CliError, Result};
use crate::logging;
use crate::model_io;
use crate::pgm;

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// `gen moons`: write source.csv, target.csv, and target_labels.csv.
pub fn cmd_gen(cmd: &GenCommand) -> Result<()> {
    let GenCommand::Moons(args) = cmd;
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    ensure_dir(&args.out)?;
    let source = make_moons(args.n, args.noise, derive_seed(args.seed, "data/source"))?;
    let target = make_moons(args.n, args.noise, derive_seed(args.seed, "data/target"))?
        .rotated(args.rotation)?;
    csvio::write_labeled(&args.out.join("source.csv"), &source)?;
    csvio::write_unlabeled(&args.out.join("target.csv"), &target.unlabeled())?;
    csvio::write_labels(&args.out.join("target_labels.csv"), target.labels())?;
    logging::info(format!(
        "wrote source.csv, target.csv, target_labels.csv under {} ({} rows each)",
        args.out.display(),
        source.len()
    ));
    Ok(())
}

/// Resolved training inputs.
struct TrainData {
    source: LabeledDataset,
    target: UnlabeledDataset,
    eval_target: Option<LabeledDataset>,
}

fn moons_from_spec(spec: &MoonsSpec, seed: u64, stream: &str) -> Result<LabeledDataset> {
    let ds = make_moons(spec.n_per_class, spec.noise_sd, derive_seed(seed, stream))?;
    Ok(ds.rotated(spec.rotation_degrees)?)
}

fn resolve_source(cfg: &FileConfig, flag: &Option<PathBuf>, seed: u64) -> Result<LabeledDataset> {
    if let Some(path) = flag {
        return csvio::read_labeled(path);
    }
    match &cfg.source {
        Some(DomainSpec { path: Some(p), .. }) => csvio::read_labeled(Path::new(p)),
        Some(DomainSpec { moons: Some(m), .. }) => moons_from_spec(m, seed, "data/source"),
        _ => Err(CliError::Config(
            "no source data: give --source or a `source` config entry".into(),
        )),
    }
}

fn resolve_target(
    cfg: &FileConfig,
    flag: &Option<PathBuf>,
    labels_flag: &Option<PathBuf>,
    seed: u64,
) -> Result<(UnlabeledDataset, Option<LabeledDataset>)> {
    let labeled: Option<LabeledDataset> = if let Some(path) = flag {
        match csvio::read_dataset(path)? {
            csvio::LoadedDataset::Labeled(ds) => Some(ds),
            csvio::LoadedDataset::Unlabeled(ds) => {
                let labels_path = labels_flag
                    .clone()
                    .or_else(|| cfg.target_labels.as_ref().map(PathBuf::from));
                match labels_path {
                    Some(lp) => {
                        let labels = csvio::read_labels(&lp)?;
                        if labels.len() != ds.len() {
                            return Err(CliError::Data(format!(
                                "{} labels for {} target rows",
                                labels.len(),
                                ds.len()
                            )));
                        }
                        Some(LabeledDataset::new(ds.features().clone(), labels)?)
                    }
                    None => {
                        return Ok((ds, None));
                    }
                }
            }
        }
    } else {
        match &cfg.target {
            Some(DomainSpec { path: Some(p), .. }) => {
                return resolve_target(cfg, &Some(PathBuf::from(p)), labels_flag, seed);
            }
            Some(DomainSpec { moons: Some(m), .. }) => Some(moons_from_spec(m, seed, "data/target")?),
            _ => {
                return Err(CliError::Config(
                    "no target data: give --target or a `target` config entry".into(),
                ));
            }
        }
    };
    let labeled = labeled.expect("resolved above");
    Ok((labeled.unlabeled(), Some(labeled)))
}

fn load_run_config(args: &TrainArgs) -> Result<FileConfig> {
    let mut cfg = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(m) = &args.method {
        cfg.method = m.clone();
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.entropy_weight {
        cfg.entropy_weight = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.max_iteration {
        cfg.max_iteration = v;
    }
    if let Some(v) = args.base_lr {
        cfg.base_lr = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.log_every {
        cfg.log_every = v;
    }
    parse_method(&cfg.method)?;
    Ok(cfg)
}

/// `train`: run the configured method, write model.json and trainlog.csv,
/// print the final target accuracy when evaluation labels exist.
pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let file_cfg = load_run_config(args)?;
    let train_cfg: TrainConfig = file_cfg.to_train_config()?;
    let source = resolve_source(&file_cfg, &args.source, train_cfg.seed)?;
    let (target, eval_target) = resolve_target(&file_cfg, &args.target, &args.target_labels, train_cfg.seed)?;
    let data = TrainData {
        source,
        target,
        eval_target,
    };
    ensure_dir(&args.out)?;
    logging::info(format!(
        "training method={} for {} iterations on {} source / {} target samples",
        file_cfg.method,
        train_cfg.max_iteration,
        data.source.len(),
        data.target.len()
    ));
    let (models, log) = train(
        &train_cfg,
        &data.source,
        &data.target,
        data.eval_target.as_ref(),
    )?;
    model_io::save_triple(
        &args.out.join("model.json"),
        models.generator(),
        models.classifier1(),
        models.classifier2(),
    )?;
    csvio::write_trainlog(&args.out.join("trainlog.csv"), &log)?;
    if let Some(eval) = &data.eval_target {
        let acc = models.evaluate(eval)?;
        println!("target_accuracy={}", acc.mean);
    }
    logging::info(format!("wrote model.json and trainlog.csv under {}", args.out.display()));
    Ok(())
}

fn load_models(path: &Path) -> Result<ModelTriple> {
    let (g, c1, c2) = model_io::load_triple(path)?;
    let opt = TrainConfig::default().optimizer;
    ModelTriple::from_networks(g, c1, c2, opt, 1.0).map_err(CliError::from)
}

/// `analyze *`: diagnostics over a frozen model.
pub fn cmd_analyze(cmd: &AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Boundary(args) => {
            let models = load_models(&args.model)?;
            let mut feature_sets: Vec<bcdm_core::matrix::Matrix> = Vec::new();
            if let Some(p) = &args.source {
                feature_sets.push(csvio::read_features(p)?.features().clone());
            }
            if let Some(p) = &args.target {
                feature_sets.push(csvio::read_features(p)?.features().clone());
            }
            if feature_sets.is_empty() {
                return Err(CliError::Usage(
                    "boundary needs --source and/or --target to frame the grid".into(),
                ));
            }
            let refs: Vec<&bcdm_core::matrix::Matrix> = feature_sets.iter().collect();
            let spec = GridSpec::covering(&refs, (args.res, args.res), args.pad)?;
            let raster = boundary_raster(&models, &spec)?;
            pgm::write_pgm(&args.out, &raster, models.num_classes())?;
            let sidecar = args.out.with_extension("csv");
            csvio::write_raster_csv(&sidecar, &raster)?;
            logging::info(format!(
                "wrote {} and {}",
                args.out.display(),
                sidecar.display()
            ));
        }
        AnalyzeCommand::Histogram(args) => {
            let models = load_models(&args.model)?;
            let target = csvio::read_features(&args.target)?;
            let hist = determinacy_histogram(&models, &target, args.bins)?;
            csvio::write_histogram(&args.out, &hist)?;
            logging::info(format!("wrote {}", args.out.display()));
        }
        AnalyzeCommand::Agreement(args) => {
            let models = load_models(&args.model)?;
            let target = csvio::read_features(&args.target)?;
            let agreement = agreement_matrix(&models, &target)?;
            csvio::write_agreement(&args.out, &agreement)?;
            logging::info(format!("wrote {}", args.out.display()));
        }
        AnalyzeCommand::ADistance(args) => {
            let models = load_models(&args.model)?;
            let fs = models.generator().infer(csvio::read_features(&args.source)?.features())?;
            let ft = models.generator().infer(csvio::read_features(&args.target)?.features())?;
            let d = proxy_a_distance(&fs, &ft, args.seed)?;
            println!("a_distance={d}");
            if let Some(out) = &args.out {
                csvio::write_a_distance(out, d)?;
                logging::info(format!("wrote {}", out.display()));
            }
        }
        AnalyzeCommand::Svd(args) => {
            let models = load_models(&args.model)?;
            let feats = models.generator().infer(csvio::read_features(&args.data)?.features())?;
            let sv = svd_spectrum(&feats)?;
            csvio::write_spectrum(&args.out, &sv)?;
            logging::info(format!("wrote {}", args.out.display()));
        }
        AnalyzeCommand::Bound(args) => {
            cmd_bound(args)?;
        }
    }
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> Result<()> {
    let models = load_models(&args.model)?;
    let source = csvio::read_labeled(&args.source)?;
    let target_feats = csvio::read_features(&args.target)?;
    let labels = csvio::read_labels(&args.target_labels)?;
    if labels.len() != target_feats.len() {
        return Err(CliError::Data(format!(
            "{} labels for {} target rows",
            labels.len(),
            target_feats.len()
        )));
    }
    let target = LabeledDataset::new(target_feats.features().clone(), labels)?;
    let head_dims = models.classifier1().layer_dims();
    let feat_dim = models.generator().output_dim();
    let optimizer = OptimizerConfig {
        base_lr: 0.01,
        momentum: 0.9,
        weight_decay: 5e-4,
        anneal_a: 10.0,
        anneal_b: 0.75,
    };
    let cfg = BoundConfig {
        delta: args.delta,
        head_dims,
        ddd_restarts: args.ddd_restarts,
        ddd_budget: args.ddd_budget,
        ddd_lr: 1.0,
        rademacher_trials: args.rademacher_trials,
        rademacher_budget: args.rademacher_budget,
        rademacher_lr: 1.0,
        joint: JointTrainConfig {
            generator_dims: vec![source.dim(), feat_dim, feat_dim],
            classifier_dims: models.classifier1().layer_dims(),
            optimizer,
            batch_size: 32.min(source.len() + target.len()),
            budget: args.joint_budget,
        },
        seed: args.seed,
    };
    let h = Hypothesis::new(models.generator(), models.classifier1())?;
    let report = bound_report(&h, &source, &target, &cfg)?;
    csvio::write_bound(&args.out, &report)?;
    println!("bound={} target_error={}", report.bound, report.target_error);
    logging::info(bcdm_core::theory::report_summary(&report));
    logging::info(format!("wrote {}", args.out.display()));
    Ok(())
}

/// Shared default noise used by `gen moons` flags.
pub fn gen_default_noise() -> f64 {
    default_noise_sd()
}
