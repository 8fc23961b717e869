use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nn::{mse_loss, Mode, Tensor3};

fn report(position: Vec3, z_baseline: Vec<f64>, z_target: Vec<f64>) -> DftReport {
    DftReport {
        position,
        z_baseline,
        z_target,
        h_baseline: None,
        h_target: None,
    }
}

fn random_inputs(rng: &mut ChaCha8Rng, b: usize, n: usize) -> (Tensor3, Tensor3) {
    let p = (0..3 * b).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut z = Vec::with_capacity(b * n);
    for _ in 0..b {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        z.extend(normalize_input(&raw));
    }
    (
        Tensor3::new(b, 3, 1, p).unwrap(),
        Tensor3::new(b, 1, n, z).unwrap(),
    )
}

#[test]
fn label_examples() {
    let one_hot = [0.0, 0.0, 2.5, 0.0];
    for mode in [LabelMode::FullTwin, LabelMode::SparseTopP(2), LabelMode::SparseTopP(4)] {
        assert_eq!(build_labels(&one_hot, mode).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
    }
    let l = build_labels(&[4.0, 3.0, 2.0, 1.0], LabelMode::SparseTopP(2)).unwrap();
    assert_eq!(l, vec![4.0 / 7.0, 3.0 / 7.0, 0.0, 0.0]);
    let l = build_labels(&[1.0, 2.0, 2.0, 2.0], LabelMode::SparseTopP(2)).unwrap();
    assert_eq!(l, vec![0.0, 0.5, 0.5, 0.0]);
    assert_eq!(build_labels(&[0.0; 4], LabelMode::FullTwin), Err(CalibError::ZeroTarget));
    assert_eq!(build_labels(&[1.0; 8], LabelMode::SparseTopP(5)), Err(CalibError::BadSparsity(5)));
    assert_eq!(build_labels(&[1.0; 8], LabelMode::SparseTopP(1)), Err(CalibError::BadSparsity(1)));
}

proptest! {
    #[test]
    fn labels_are_scale_invariant_simplex_points(
        z in prop::collection::vec(0.0f64..10.0, 8..40),
        scale in 1e-3f64..1e3,
        p in 2usize..=4,
    ) {
        prop_assume!(z.iter().any(|v| *v > 0.0));
        for mode in [LabelMode::FullTwin, LabelMode::SparseTopP(p)] {
            let a = build_labels(&z, mode).unwrap();
            let scaled: Vec<f64> = z.iter().map(|v| v * scale).collect();
            let b = build_labels(&scaled, mode).unwrap();
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(*x >= 0.0);
                prop_assert!((x - y).abs() < 1e-12);
            }
            if let LabelMode::SparseTopP(p) = mode {
                prop_assert!(a.iter().filter(|v| **v > 0.0).count() <= p);
            }
        }
    }
}

#[test]
fn position_box_standardizes_to_unit_cube() {
    let pts = [Vec3::new(0.0, -10.0, 1.5), Vec3::new(20.0, 30.0, 1.5)];
    let bx = PositionBox::from_positions(pts.iter());
    assert_eq!(bx.standardize(pts[0]), [-1.0, -1.0, 0.0]);
    assert_eq!(bx.standardize(pts[1]), [1.0, 1.0, 0.0]);
    assert_eq!(bx.standardize(Vec3::new(10.0, 10.0, 7.0)), [0.0, 0.0, 0.0]);
}

fn expected_rows(b: usize, n: usize) -> Vec<(Vec<Vec<usize>>, Vec<usize>)> {
    let s = |c: usize, l: usize| vec![b, c, l];
    vec![
        (vec![vec![b, n], vec![b, 3]], s(2, n)),
        (vec![s(2, n)], s(16, n)),
        (vec![s(16, n)], s(16, n / 2)),
        (vec![s(16, n / 2)], s(32, n / 2)),
        (vec![s(32, n / 2)], s(32, n / 4)),
        (vec![s(32, n / 4)], s(64, n / 4)),
        (vec![s(64, n / 4)], s(64, n / 8)),
        (vec![s(64, n / 8)], s(128, n / 8)),
        (vec![s(128, n / 8)], s(64, n / 4)),
        (vec![s(64 + 64, n / 4)], s(64, n / 4)),
        (vec![s(64, n / 4)], s(32, n / 2)),
        (vec![s(32 + 32, n / 2)], s(32, n / 2)),
        (vec![s(32, n / 2)], s(16, n)),
        (vec![s(16 + 16, n)], s(16, n)),
        (vec![s(16, n)], s(1, n)),
        (vec![s(1, n)], s(1, n)),
    ]
}

#[test]
fn forward_trace_matches_architecture_table() {
    for (n, b) in [(32, 2), (16, 3), (64, 1)] {
        let mut m = CalibModel::new(ModelConfig::new(n, 1)).unwrap();
        let (p, z) = random_inputs(&mut ChaCha8Rng::seed_from_u64(2), b, n);
        let (y, rows) = m.forward_traced(&p, &z, Mode::Train).unwrap();
        let expected = expected_rows(b, n);
        assert_eq!(rows.len(), 16);
        for (row, (inputs, output)) in rows.iter().zip(expected) {
            assert_eq!(row.inputs, inputs, "{} {}", row.section, row.stage);
            assert_eq!(row.output, output, "{} {}", row.section, row.stage);
        }
        assert_eq!(y.dims(), [b, 1, n]);
        for s in y.data().chunks(n) {
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(s.iter().all(|v| *v > 0.0));
        }
    }
}

#[test]
fn bottleneck_and_param_count() {
    let m = CalibModel::new(ModelConfig::new(32, 0)).unwrap();
    let count = m.param_count();
    assert!((90_000..=270_000).contains(&count), "{count}");
    // same count as summing the layer formulas
    let conv = |ci: usize, co: usize| co * ci * 3 + co;
    let block = |ci: usize, co: usize| conv(ci, co) + 2 * co;
    let expected = (3 * 64 + 64) + (64 * 32 + 32)
        + block(2, 16)
        + block(16, 32) + block(32, 32)
        + block(32, 64) + block(64, 64)
        + block(64, 128) + block(128, 128)
        + conv(128, 64) + block(128, 64) + block(64, 64)
        + conv(64, 32) + block(64, 32) + block(32, 32)
        + conv(32, 16) + block(32, 16) + block(16, 16)
        + conv(16, 1);
    assert_eq!(count, expected);
}

#[test]
fn bad_resolution_is_rejected() {
    for n in [0, 12, 30] {
        assert!(matches!(
            CalibModel::new(ModelConfig::new(n, 0)),
            Err(CalibError::BadResolution(_))
        ));
    }
}

#[test]
fn identical_inputs_give_identical_outputs_in_eval() {
    let mut m = CalibModel::new(ModelConfig::new(16, 3)).unwrap();
    let (p, z) = random_inputs(&mut ChaCha8Rng::seed_from_u64(4), 1, 16);
    let twice = |t: &Tensor3, c: usize| {
        let mut d = t.data().to_vec();
        d.extend_from_slice(t.data());
        Tensor3::new(2, c, t.length(), d).unwrap()
    };
    let y = m.forward(&twice(&p, 3), &twice(&z, 1), Mode::Eval).unwrap();
    assert_eq!(y.row(0, 0), y.row(1, 0));
}

#[test]
fn model_backward_before_forward() {
    let mut m = CalibModel::new(ModelConfig::new(8, 0)).unwrap();
    assert!(m.backward(&Tensor3::zeros(1, 1, 8)).is_err());
}

/// End-to-end finite differences through skips, pools and the embedding. The
/// step is smaller than in the per-layer checks: with this many ReLU and
/// max-pool units, some kink sits within 1e-5 of the evaluation point.
#[test]
fn whole_model_gradients_match_finite_differences() {
    const STEP: f64 = 1e-7;
    let n = 8;
    let mut m = CalibModel::new(ModelConfig::new(n, 5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (p, z) = random_inputs(&mut rng, 3, n);
    let target = crate::nn::softmax(&random_inputs(&mut rng, 3, n).1);
    let loss = |m: &mut CalibModel| {
        let y = m.forward(&p, &z, Mode::Train).unwrap();
        mse_loss(&y, &target).unwrap()
    };
    m.store_mut().zero_grad();
    let (_, g) = loss(&mut m);
    m.backward(&g).unwrap();
    let names = [
        "embed.fc1.weight",
        "embed.fc2.bias",
        "enc1.0.conv.weight",
        "enc2.1.bn.gamma",
        "enc4.1.conv.weight",
        "up1.weight",
        "dec1.0.conv.weight",
        "dec3.1.bn.beta",
        "head.weight",
        "head.bias",
    ];
    for name in names {
        let id = m.store().id(name).unwrap();
        let analytic = m.store().grad(id).to_vec();
        let take = analytic.len().min(12);
        let mut numeric = Vec::new();
        for k in 0..take {
            let orig = m.store().value(id)[k];
            m.store_mut().value_mut(id)[k] = orig + STEP;
            let lp = loss(&mut m).0;
            m.store_mut().value_mut(id)[k] = orig - STEP;
            let lm = loss(&mut m).0;
            m.store_mut().value_mut(id)[k] = orig;
            numeric.push((lp - lm) / (2.0 * STEP));
        }
        let err = crate::nn::gradcheck::relative_error(&analytic[..take], &numeric);
        assert!(err < 1e-4, "{name}: {err}");
    }
}

#[test]
fn store_round_trip_preserves_predictions() {
    let mut m = CalibModel::new(ModelConfig::new(16, 7)).unwrap();
    m.set_position_box(PositionBox {
        min: Vec3::new(-5.0, 0.0, 1.5),
        max: Vec3::new(5.0, 20.0, 1.5),
    });
    let stored = m.store().clone();
    let mut back = CalibModel::from_store(&stored, 99).unwrap();
    let pos = [Vec3::new(1.0, 2.0, 1.5), Vec3::new(-4.0, 19.0, 1.5)];
    let z1: Vec<f64> = (0..16).map(|i| (i % 5) as f64).collect();
    let z2: Vec<f64> = (0..16).map(|i| (i * i % 7) as f64).collect();
    let zs: [&[f64]; 2] = [&z1, &z2];
    assert_eq!(m.predict(&pos, &zs).unwrap(), back.predict(&pos, &zs).unwrap());
    assert_eq!(back.position_box(), m.position_box());
}

fn ramp(n: usize, center: f64, width: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let d = (i as f64 - center) / width;
            libm::exp(-d * d)
        })
        .collect()
}

/// Toy twin pair: the target peak moves with x, the baseline is a shifted,
/// blurred copy.
fn toy_dataset(count: usize, n: usize, seed: u64) -> Vec<DftReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = rng.random_range(0.0..100.0);
            let y = rng.random_range(0.0..50.0);
            let c = x / 100.0 * (n - 1) as f64;
            report(
                Vec3::new(x, y, 1.5),
                ramp(n, (c + 2.0) % n as f64, 2.0),
                ramp(n, c, 0.7),
            )
        })
        .collect()
}

fn quick_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 32,
        patience: epochs,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic() {
    let data = toy_dataset(60, 8, 1);
    let run = || train(&data, LabelMode::FullTwin, ModelConfig::new(8, 3), &quick_config(3, 11)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.log, b.log);
    assert_eq!(a.model.store(), b.model.store());
    assert_eq!(a.log.len(), 4);
    assert_eq!(a.val_indices.len(), 6);
}

#[test]
fn training_reduces_validation_loss_tenfold() {
    let n = 8;
    let data = toy_dataset(200, n, 2);
    let out = train(&data, LabelMode::FullTwin, ModelConfig::new(n, 4), &quick_config(50, 5)).unwrap();
    let initial = out.initial_val_loss();
    let best = out.best_val_loss();
    assert!(best * 10.0 <= initial, "{initial} -> {best}");
}

#[test]
fn trained_model_beats_identity_on_permuted_gap() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data: Vec<DftReport> = (0..200)
        .map(|_| {
            let zb: Vec<f64> = ramp(n, rng.random_range(0.0..(n - 1) as f64), 1.0);
            // target = baseline reversed along the beam axis
            let zt: Vec<f64> = zb.iter().rev().copied().collect();
            report(Vec3::new(rng.random_range(0.0..10.0), 0.0, 1.5), zb, zt)
        })
        .collect();
    let out = train(&data, LabelMode::FullTwin, ModelConfig::new(n, 1), &quick_config(40, 2)).unwrap();
    let mut model = out.model;
    let val: Vec<DftReport> = out.val_indices.iter().map(|&i| data[i].clone()).collect();
    let trained = evaluate_loss(&mut model, &val, LabelMode::FullTwin).unwrap();
    let identity: f64 = val
        .iter()
        .map(|r| {
            let a = normalize_input(&r.z_baseline);
            let b = build_labels(&r.z_target, LabelMode::FullTwin).unwrap();
            a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        })
        .sum::<f64>()
        / val.len() as f64;
    assert!(trained < identity, "{trained} vs identity {identity}");
}

#[test]
fn training_rejects_bad_data() {
    let good = toy_dataset(4, 8, 3);
    let cfg = quick_config(1, 0);
    assert_eq!(
        train(&[], LabelMode::FullTwin, ModelConfig::new(8, 0), &cfg).unwrap_err(),
        CalibError::EmptyDataset
    );
    let mut zero = good.clone();
    zero[2].z_target = vec![0.0; 8];
    assert!(matches!(
        train(&zero, LabelMode::FullTwin, ModelConfig::new(8, 0), &cfg),
        Err(CalibError::BadRecord { index: 2, .. })
    ));
    let mut short = good.clone();
    short[1].z_baseline.pop();
    assert!(matches!(
        train(&short, LabelMode::FullTwin, ModelConfig::new(8, 0), &cfg),
        Err(CalibError::BadRecord { index: 1, .. })
    ));
    let mut nan = good;
    nan[0].z_target[0] = f64::NAN;
    assert!(train(&nan, LabelMode::FullTwin, ModelConfig::new(8, 0), &cfg).is_err());
}

#[test]
fn diverging_learning_rate_aborts() {
    let data = toy_dataset(40, 8, 4);
    let mut cfg = quick_config(30, 0);
    cfg.adam.lr = f64::INFINITY;
    assert!(matches!(
        train(&data, LabelMode::FullTwin, ModelConfig::new(8, 0), &cfg),
        Err(CalibError::Divergence { .. })
    ));
}
