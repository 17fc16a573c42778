use std::time::Instant;

use textmatch::dataprep::{prepare, BatchMode, PrepareOptions, Prepared, VocabFilter};
use textmatch::evaluation::Metric;
use textmatch::models::{Model, ModelConfig, ModelKind};
use textmatch::synthetic::{generate, SyntheticConfig};
use textmatch::training::{train, Validation, BatchingConfig, Objective, OptimizerConfig};

fn dataset() -> Prepared {
    let pairs = generate(&SyntheticConfig::default()).unwrap();
    prepare(&pairs, &PrepareOptions { left_length: 5, right_length: 8, filter: VocabFilter::default() }).unwrap()
}

fn overfit(kind: ModelKind) {
    let data = dataset();
    let mut config = ModelConfig::new(kind, data.vocab.size(), 8, 5, 8);
    config.mlp = vec![8];
    config.seed = 3;
    let mut model = Model::build_with_vocab(&config, &data.vocab).unwrap();
    let start = Instant::now();
    let report = train(
        &mut model,
        &data.relations,
        &data.corpus,
        &Objective::hinge(),
        &BatchingConfig::new(BatchMode::Pairwise, 16),
        &OptimizerConfig::adam(0.01, 50),
        Some(Validation { relations: &data.relations, corpus: &data.corpus, metric: Metric::Map }),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let maps: Vec<f64> = report.epochs.iter().map(|e| e.validation.unwrap()).collect();
    let first = maps.iter().position(|&m| m >= 0.95);
    println!("{kind:?}: first epoch >= 0.95: {first:?}, final MAP {:.4}, loss {:.5}, {elapsed:.2?}", maps[49], report.final_loss().unwrap());
    assert!(maps[49] >= 0.95);
    assert!(elapsed.as_secs_f64() < 60.0);
}

#[test]
fn arci_overfits() {
    overfit(ModelKind::Arci);
}
#[test]
fn matchpyramid_overfits() {
    overfit(ModelKind::MatchPyramid);
}
#[test]
fn drmm_overfits() {
    overfit(ModelKind::Drmm);
}
#[test]
fn matchsrnn_overfits() {
    overfit(ModelKind::MatchSrnn);
}
