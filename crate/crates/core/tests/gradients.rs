//! Analytic gradients against central finite differences.

use proptest::prelude::*;
use smiley_core::models::{Architecture, FeatureScheme, LossKind, ModelState};

const STEP: f64 = 1e-5;

fn fd_gradient(model: &ModelState, x: &[f64], target: f64, kind: LossKind) -> Vec<f64> {
    (0..model.params.len())
        .map(|i| {
            let mut plus = model.clone();
            plus.params[i] += STEP;
            let mut minus = model.clone();
            minus.params[i] -= STEP;
            (plus.loss(x, target, kind).unwrap() - minus.loss(x, target, kind).unwrap())
                / (2.0 * STEP)
        })
        .collect()
}

fn arch_strategy() -> impl Strategy<Value = Architecture> {
    prop_oneof![
        Just(Architecture::Linear),
        (1usize..5).prop_map(|hidden| Architecture::Mlp { hidden })
    ]
}

fn scheme_strategy() -> impl Strategy<Value = FeatureScheme> {
    prop_oneof![
        Just(FeatureScheme::Raw),
        Just(FeatureScheme::Count),
        Just(FeatureScheme::Parity),
        Just(FeatureScheme::CountParity),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn analytic_matches_finite_differences(
        arch in arch_strategy(),
        scheme in scheme_strategy(),
        seed in any::<u64>(),
        x_raw in proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 9),
        target in 0.0f64..=1.0,
        ce in any::<bool>(),
    ) {
        let model = ModelState::random(arch, scheme, 3, 3, seed, 1.0).unwrap();
        let x = &x_raw[..model.input_dim()];
        let (kind, target) = if ce {
            (LossKind::CrossEntropy, target.round())
        } else {
            (LossKind::Squared, target)
        };
        let mut grad = vec![0.0; model.params.len()];
        model.accumulate_gradient(x, target, kind, &mut grad).unwrap();
        for (i, (a, f)) in grad.iter().zip(fd_gradient(&model, x, target, kind)).enumerate() {
            let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-6);
            prop_assert!(rel <= 1e-4, "param {}: analytic {} vs fd {}", i, a, f);
        }

        let mut zero = vec![0.0; model.params.len()];
        let loss = model.accumulate_gradient(x, target, LossKind::Smiley, &mut zero).unwrap();
        prop_assert_eq!(loss.to_bits(), 0);
        prop_assert!(zero.iter().all(|g| g.to_bits() == 0));
    }
}

#[test]
fn gradient_accumulates_across_samples() {
    let model = ModelState::random(
        Architecture::Mlp { hidden: 3 },
        FeatureScheme::CountParity,
        4,
        4,
        8,
        1.0,
    )
    .unwrap();
    let samples = [(vec![0.2, 1.0], 1.0), (vec![0.7, 0.0], 0.0)];
    let mut both = vec![0.0; model.params.len()];
    let mut sum = vec![0.0; model.params.len()];
    for (x, t) in &samples {
        model
            .accumulate_gradient(x, *t, LossKind::CrossEntropy, &mut both)
            .unwrap();
        let mut one = vec![0.0; model.params.len()];
        model
            .accumulate_gradient(x, *t, LossKind::CrossEntropy, &mut one)
            .unwrap();
        for (s, o) in sum.iter_mut().zip(one) {
            *s += o;
        }
    }
    for (a, b) in both.iter().zip(&sum) {
        assert!((a - b).abs() < 1e-15);
    }
}
