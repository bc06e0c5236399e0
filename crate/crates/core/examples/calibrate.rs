//! Hyperparameter calibration sweep for the two-moons benchmark.

use bcdm_core::data::{make_moons, LabeledDataset};
use bcdm_core::matrix::Matrix;
use bcdm_core::rng::derive_seed;
use bcdm_core::trainer::{train, Method, TrainConfig};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 0 {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    } else {
        v[n / 2]
    }
}

/// Shift every point by (-0.5, -0.25), putting the two-arc centroid at the
/// origin.
fn centered(ds: &LabeledDataset) -> LabeledDataset {
    let f = ds.features();
    let mut data = Vec::with_capacity(f.rows() * 2);
    for r in 0..f.rows() {
        data.push(f.get(r, 0) - 0.5);
        data.push(f.get(r, 1) - 0.25);
    }
    LabeledDataset::new(
        Matrix::from_vec(f.rows(), 2, data).unwrap(),
        ds.labels().to_vec(),
    )
    .unwrap()
}

fn run(cfg_base: &TrainConfig, method: Method, seeds: u64, noise: f64, center: bool) -> Vec<f64> {
    let mut accs = Vec::new();
    for seed in 0..seeds {
        let mut source = make_moons(100, noise, derive_seed(seed, "data/source")).unwrap();
        let mut target_lab = make_moons(100, noise, derive_seed(seed, "data/target")).unwrap();
        if center {
            source = centered(&source);
            target_lab = centered(&target_lab);
        }
        let target_lab = target_lab.rotated(30.0).unwrap();
        let target = target_lab.unlabeled();
        let mut cfg = cfg_base.clone();
        cfg.method = method;
        cfg.seed = seed;
        let (models, _) = train(&cfg, &source, &target, Some(&target_lab)).unwrap();
        accs.push(models.evaluate(&target_lab).unwrap().mean);
    }
    accs
}

struct Case {
    alpha: f64,
    ent: f64,
    mult: f64,
    center: bool,
}

fn main() {
    let grid = vec![
        Case { alpha: 0.01, ent: 0.01, mult: 10.0, center: true },
        Case { alpha: 1.0, ent: 0.01, mult: 10.0, center: true },
        Case { alpha: 2.0, ent: 0.01, mult: 0.3, center: true },
        Case { alpha: 2.0, ent: 0.01, mult: 1.0, center: true },
        Case { alpha: 1.0, ent: 0.01, mult: 1.0, center: true },
    ];
    for c in grid {
        println!(
            "=== a {} ent {} mult {} center {} ===",
            c.alpha, c.ent, c.mult, c.center
        );
        let mut cfg = TrainConfig::default();
        cfg.alpha = c.alpha;
        cfg.entropy_weight = c.ent;
        cfg.classifier_lr_multiplier = c.mult;
        cfg.optimizer.base_lr = 2e-3;
        cfg.optimizer.weight_decay = 5e-4;
        for &method in &[Method::SourceOnly, Method::Bcdm, Method::McdL1] {
            let accs = run(&cfg, method, 6, 0.1, c.center);
            println!(
                "{method:?}: median {:.3}  all {:?}",
                median(accs.clone()),
                accs.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            );
        }
    }
}
