mod common;

use noma_sat::channel::Label;
use noma_sat::svm::{self, Sample, TrainOptions};
use noma_sat::RngStream;
use rand::Rng;

pub struct Instance {
    pub data: Vec<Sample>,
    pub c: f64,
    pub width: f64,
}

fn instance(seed: u64) -> Instance {
    let mut rng = RngStream::new(0x5eed, seed).generator();
    let n = rng.random_range(4..=12);
    let mut data: Vec<Sample> = (0..n)
        .map(|i| {
            let x = [rng.random_range(20.0..80.0), rng.random_range(0.0..3.0)];
            let label = if i % 2 == 0 { Label::Near } else { Label::Far };
            Sample::new(x, label)
        })
        .collect();
    // Tilt the labels toward a learnable boundary without making them separable.
    for s in data.iter_mut() {
        if rng.random_bool(0.6) {
            let near = s.x[1] > 1.5;
            *s = Sample::new(s.x, if near { Label::Near } else { Label::Far });
        }
    }
    if data.iter().all(|s| s.y == data[0].y) {
        let flipped = if data[0].y > 0.0 {
            Label::Far
        } else {
            Label::Near
        };
        data[0] = Sample::new(data[0].x, flipped);
    }
    Instance {
        data,
        c: rng.random_range(0.1..10.0),
        width: rng.random_range(0.3..3.0),
    }
}

#[test]
fn smo_matches_projected_gradient_oracle() {
    for seed in 0..25 {
        let inst = instance(seed);
        let model = svm::train(&inst.data, inst.c, inst.width).unwrap();
        let x: Vec<[f64; 2]> = inst.data.iter().map(|s| s.x).collect();
        let y: Vec<f64> = inst.data.iter().map(|s| s.y).collect();
        let k = common::gram(&common::population_standardize(&x), inst.width);
        let oracle = common::solve_dual(&y, &k, inst.c, 20_000);
        let smo = common::dual_objective(&model.alphas, &y, &k);
        let rel = (smo - oracle.objective).abs() / oracle.objective.abs().max(1e-12);
        assert!(
            rel < 1e-4,
            "seed {seed}: smo {smo} oracle {} rel {rel}",
            oracle.objective
        );
        for (i, s) in inst.data.iter().enumerate() {
            let g = common::decision(&oracle, &y, &k, i);
            assert_eq!(
                model.classify(&s.x),
                Label::from_sign(g),
                "seed {seed} point {i}: smo {} oracle {g}",
                model.decision_value(&s.x)
            );
        }
    }
}

#[test]
fn two_point_closed_form() {
    let expected = 1.0 / (1.0 - (-0.5f64).exp());
    let data = [
        Sample::new([0.0, 0.0], Label::Far),
        Sample::new([1.0, 0.0], Label::Near),
    ];
    let raw = TrainOptions {
        standardize: false,
        ..TrainOptions::default()
    };
    let model = svm::train_with(&data, 100.0, 1.0, raw).unwrap();
    for a in &model.alphas {
        assert!((a - expected).abs() < 1e-6, "{a} vs {expected}");
    }
}
