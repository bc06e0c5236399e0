//! Single-run inspection of the training dynamics.

use bcdm_core::data::make_moons;
use bcdm_core::trainer::{train, Method, TrainConfig};

fn main() {
    let source = make_moons(100, 0.05, 1).unwrap();
    let target_lab = make_moons(100, 0.05, 2).unwrap().rotated(30.0).unwrap();
    let target = target_lab.unlabeled();
    let mut cfg = TrainConfig::default();
    cfg.method = Method::SourceOnly;
    cfg.seed = 3;
    cfg.log_every = 250;
    let (models, log) = train(&cfg, &source, &target, Some(&target_lab)).unwrap();
    for r in &log.records {
        println!(
            "iter {:5}  src_loss {:.4}  disc {:.4}  ent {:.4}  tgt_err {:.3}",
            r.iteration, r.source_loss, r.discrepancy, r.entropy, r.target_error
        );
    }
    println!("final source acc: {:?}", models.evaluate(&source).unwrap());
    println!("final target acc: {:?}", models.evaluate(&target_lab).unwrap());
}
