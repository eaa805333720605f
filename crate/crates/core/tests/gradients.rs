use proptest::prelude::*;
use rebalance_core::classifier::Standardizer;
use rebalance_core::dense::{softmax_cross_entropy, Activation, DenseNetwork};
use rebalance_core::vae::{elbo, elbo_gradients, VaeModel};

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs()) + 1e-7
}

fn central_difference(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            p[i] = params[i] + h;
            let up = f(&p);
            p[i] = params[i] - h;
            let down = f(&p);
            p[i] = params[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn smooth_activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Identity), Just(Activation::Softplus)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_backward_matches_finite_differences(
        dims in prop::collection::vec(1usize..6, 2..5),
        acts in prop::collection::vec(smooth_activation(), 4),
        seed in any::<u64>(),
        raw in prop::collection::vec(-2.0f64..2.0, 12),
    ) {
        let acts = &acts[..dims.len() - 1];
        let net = DenseNetwork::init(&dims, acts, seed).unwrap();
        let x = &raw[..dims[0]];
        let upstream = &raw[6..6 + dims[dims.len() - 1]];
        let loss = |n: &DenseNetwork, x: &[f64]| n.forward(x).unwrap().iter().zip(upstream).map(|(o, u)| o * u).sum::<f64>();
        let grads = net.backward(x, upstream).unwrap();
        let mut probe = net.clone();
        let numeric = central_difference(&net.parameters(), |p| {
            probe.set_parameters(p).unwrap();
            loss(&probe, x)
        });
        for (a, n) in grads.flatten().iter().zip(&numeric) {
            prop_assert!(close(*a, *n), "param {} vs {}", a, n);
        }
        let numeric_input = central_difference(x, |xi| loss(&net, xi));
        for (a, n) in grads.input.iter().zip(&numeric_input) {
            prop_assert!(close(*a, *n), "input {} vs {}", a, n);
        }
    }

    #[test]
    fn cross_entropy_gradient_matches(logits in prop::collection::vec(-30.0f64..30.0, 2..8), pick in any::<prop::sample::Index>()) {
        let label = pick.index(logits.len()) as u32;
        let (_, grad) = softmax_cross_entropy(&logits, label).unwrap();
        let numeric = central_difference(&logits, |l| softmax_cross_entropy(l, label).unwrap().0);
        for (a, n) in grad.iter().zip(&numeric) {
            prop_assert!(close(*a, *n));
        }
    }

    #[test]
    fn scaled_vae_gradients_match(
        d in 1usize..5,
        latent in 1usize..4,
        seed in any::<u64>(),
        raw in prop::collection::vec(-2.0f64..2.0, 16),
        scales in prop::collection::vec(0.2f64..3.0, 4),
    ) {
        let scaling = Standardizer { mean: raw[8..8 + d].to_vec(), std: scales[..d].to_vec() };
        let model = VaeModel::init(d, latent, 5, seed).unwrap().with_scaling(Some(scaling)).unwrap();
        let f = &raw[..d];
        let noise = &raw[4..4 + model.latent_dim];
        let (_, grads) = elbo_gradients(&model, f, noise).unwrap();
        let mut probe = model.clone();
        let numeric = central_difference(&model.parameters(), |p| {
            probe.set_parameters(p).unwrap();
            -elbo(&probe, f, noise).unwrap().value
        });
        for (a, n) in grads.flatten().iter().zip(&numeric) {
            prop_assert!(close(*a, *n), "{} vs {}", a, n);
        }
    }
}
