mod common;

use cbfkit::cbf::{CbfInstance, CbfTag};
use cbfkit::systems::{BicycleParams, PendulumParams, Scenario};
use common::{bicycle_state, fd_gradient, pendulum_state, relative_error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Distance below which a state counts as sitting on a ReQU kink.
const KINK_MARGIN: f64 = 1e-3;

fn near_kink(cbf: &CbfInstance, x: &[f64]) -> bool {
    match cbf.tag() {
        CbfTag::Abc => cbf.switching(x).unwrap().unwrap().abs() < KINK_MARGIN,
        CbfTag::Recbf => {
            let cbfkit::cbf::CbfKind::Rectified { epsilon, .. } = cbf.kind() else { unreachable!() };
            let r = cbf.hocbf_residual(&cbfkit::autodiff::constants(x)).unwrap().value();
            (epsilon - r).abs() < KINK_MARGIN
        }
        _ => false,
    }
}

fn check(scenario: &Scenario, sample: fn(&mut ChaCha8Rng) -> Vec<f64>, seed: u64) {
    for tag in CbfTag::ALL {
        let cbf = scenario.cbf(tag).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut checked = 0;
        while checked < 300 {
            let x = sample(&mut rng);
            if near_kink(&cbf, &x) {
                continue;
            }
            let ad = cbf.gradient(&x).unwrap();
            let fd = fd_gradient(|x| cbf.value(x).unwrap(), &x, 1e-6);
            let err = relative_error(&ad, &fd);
            assert!(err < 1e-6, "{tag} at {x:?}: ad {ad:?} fd {fd:?} err {err:e}");
            checked += 1;
        }
    }
}

#[test]
fn pendulum_gradients_match_finite_differences() {
    check(&Scenario::Pendulum(PendulumParams::default()), |r| pendulum_state(r), 11);
}

#[test]
fn bicycle_gradients_match_finite_differences() {
    check(&Scenario::Bicycle(BicycleParams::default()), |r| bicycle_state(r), 12);
}

#[test]
fn recbf_with_tiny_offset_still_differentiates() {
    let mut p = PendulumParams::default();
    p.epsilon = 0.01;
    check(&Scenario::Pendulum(p), |r| pendulum_state(r), 13);
}
