mod support;

use textmatch::autodiff::{Gradients, Graph};
use textmatch::dataprep::{prepare, BatchMode, PrepareOptions, Prepared, VocabFilter};
use textmatch::evaluation::Metric;
use textmatch::models::{Model, ModelConfig, ModelKind};
use textmatch::synthetic::{generate, SyntheticConfig};
use textmatch::training::{
    train, BatchingConfig, LossGraph, LossInput, Objective, Optimizer, OptimizerConfig, Validation,
};
use textmatch::Tensor;

fn toy() -> Prepared {
    let pairs = generate(&SyntheticConfig { queries: 12, ..Default::default() }).unwrap();
    prepare(&pairs, &PrepareOptions { left_length: 5, right_length: 8, filter: VocabFilter::default() }).unwrap()
}

fn model(kind: ModelKind, data: &Prepared) -> Model {
    let mut c = ModelConfig::new(kind, data.vocab.size(), 6, 5, 8);
    c.mlp = vec![4];
    c.seed = 11;
    Model::build_with_vocab(&c, &data.vocab).unwrap()
}

#[test]
fn adam_first_steps_match_hand_computation() {
    let cfg = OptimizerConfig::adam(0.001, 1);
    let mut g = Graph::new();
    g.parameter("w", Tensor::vector(vec![0.5, -0.25])).unwrap();
    let mut opt = Optimizer::new(&cfg).unwrap();

    let steps = [[1.0, -2.0], [0.5, 0.5], [-3.0, 0.0]];
    let (mut w, mut m, mut v) = ([0.5f64, -0.25], [0.0f64; 2], [0.0f64; 2]);
    for (t, grad) in steps.iter().enumerate() {
        let mut grads = Gradients::zeros_like(&g);
        grads.params_mut()[0] = Tensor::vector(grad.to_vec());
        opt.step(&mut g, &grads).unwrap();
        let t = (t + 1) as i32;
        for k in 0..2 {
            m[k] = 0.9 * m[k] + 0.1 * grad[k];
            v[k] = 0.999 * v[k] + 0.001 * grad[k] * grad[k];
            let m_hat = m[k] / (1.0 - 0.9f64.powi(t));
            let v_hat = v[k] / (1.0 - 0.999f64.powi(t));
            w[k] -= 0.001 * m_hat / (v_hat.sqrt() + 1e-8);
        }
        let got = g.params()[0].value.data();
        assert!((got[0] - w[0]).abs() < 1e-15 && (got[1] - w[1]).abs() < 1e-15, "step {t}: {got:?} vs {w:?}");
    }
    assert_eq!(opt.steps(), 3);
}

#[test]
fn adam_first_step_size() {
    let mut g = Graph::new();
    g.parameter("w", Tensor::vector(vec![0.0])).unwrap();
    let mut grads = Gradients::zeros_like(&g);
    grads.params_mut()[0] = Tensor::vector(vec![1.0]);
    Optimizer::new(&OptimizerConfig::adam(0.001, 1)).unwrap().step(&mut g, &grads).unwrap();
    let moved = -g.params()[0].value.data()[0];
    assert!((moved - 0.001 / (1.0 + 1e-8)).abs() < 1e-15, "{moved}");
}

#[test]
fn training_is_bitwise_reproducible() {
    let data = toy();
    for (objective, mode) in [
        (Objective::hinge(), BatchMode::Pairwise),
        (Objective::PointwiseLogistic, BatchMode::Pointwise),
        (Objective::ListwiseSoftmaxCe, BatchMode::Listwise),
    ] {
        let run = || {
            let mut m = model(ModelKind::Arci, &data);
            let report = train(
                &mut m,
                &data.relations,
                &data.corpus,
                &objective,
                &BatchingConfig::new(mode, 8),
                &OptimizerConfig { seed: 5, ..OptimizerConfig::adam(0.01, 3) },
                Some(Validation { relations: &data.relations, corpus: &data.corpus, metric: Metric::Ndcg(3) }),
            )
            .unwrap();
            (report.to_text(), m.to_bytes())
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b, "{objective:?}");
        assert_eq!(a.0.lines().count(), 3);
        assert!(a.0.lines().all(|l| l.split('\t').count() == 3));
    }
}

#[test]
fn every_objective_reduces_its_loss() {
    let data = toy();
    for (objective, mode) in [
        (Objective::PointwiseMse, BatchMode::Pointwise),
        (Objective::PointwiseLogistic, BatchMode::Pointwise),
        (Objective::hinge(), BatchMode::Pairwise),
        (Objective::ListwiseSoftmaxCe, BatchMode::Listwise),
    ] {
        let mut m = model(ModelKind::MatchPyramid, &data);
        let report = train(
            &mut m,
            &data.relations,
            &data.corpus,
            &objective,
            &BatchingConfig::new(mode, 8),
            &OptimizerConfig::adam(0.01, 15),
            None,
        )
        .unwrap();
        let first = report.epochs[0].mean_loss;
        let last = report.final_loss().unwrap();
        assert!(last < first, "{objective:?}: {first} -> {last}");
    }
}

#[test]
fn separable_pairs_reach_small_hinge_loss_within_200_steps() {
    let data = toy();
    let mut m = model(ModelKind::MatchPyramid, &data);
    // One batch holds every pair, so each epoch is one step.
    let batching = BatchingConfig::new(BatchMode::Pairwise, 10_000);
    let report = train(
        &mut m,
        &data.relations,
        &data.corpus,
        &Objective::hinge(),
        &batching,
        &OptimizerConfig::adam(0.01, 200),
        None,
    )
    .unwrap();
    let first = report.epochs.iter().position(|e| e.mean_loss < 0.01);
    assert!(first.is_some(), "hinge loss stayed above 0.01 for 200 steps: {:?}", report.final_loss());
}

#[test]
fn loss_spot_values() {
    let hinge = LossGraph::new(&Objective::hinge(), LossInput::Pairwise { pairs: 2 }).unwrap();
    let (loss, _) = hinge.evaluate(&[0.2, 2.0, 0.5, 0.0]).unwrap();
    assert!((loss - 1.3 / 2.0).abs() < 1e-12);

    let groups = [0..4];
    let listwise =
        LossGraph::new(&Objective::ListwiseSoftmaxCe, LossInput::Listwise { groups: &groups, grades: &[0, 0, 1, 0] }).unwrap();
    assert!((listwise.evaluate(&[-1.5; 4]).unwrap().0 - 4f64.ln()).abs() < 1e-12);

    let mse = LossGraph::new(&Objective::PointwiseMse, LossInput::Pointwise { labels: &[0, 3] }).unwrap();
    assert_eq!(mse.evaluate(&[0.0, 3.0]).unwrap().0, 0.0);
}
