//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;

/// Central finite-difference gradient.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += step;
            xm[i] -= step;
            (f(&xp) - f(&xm)) / (2.0 * step)
        })
        .collect()
}

/// `max_i |a_i − b_i| / max(‖a‖_∞, 1)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

pub fn pendulum_state<R: Rng>(rng: &mut R) -> Vec<f64> {
    vec![rng.gen_range(-PI / 2.0..PI / 2.0), rng.gen_range(-4.0..4.0)]
}

pub fn bicycle_state<R: Rng>(rng: &mut R) -> Vec<f64> {
    vec![
        rng.gen_range(0.0..40.0),
        rng.gen_range(-10.0..10.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(0.5..12.0),
    ]
}

/// The half-line (or line) `{t : feasible(t)}` restricted to a point
/// closest to `target`, found by doubling search and bisection on the
/// predicate alone. `None` if nothing feasible turns up.
fn closest_feasible_1d<P: Fn(f64) -> bool>(feasible: P, target: f64) -> Option<f64> {
    if feasible(target) {
        return Some(target);
    }
    let mut step = 1e-6 * (1.0 + target.abs());
    let mut hit = None;
    while step < 1e18 {
        for cand in [target - step, target + step] {
            if feasible(cand) {
                hit = Some(cand);
                break;
            }
        }
        if hit.is_some() {
            break;
        }
        step *= 2.0;
    }
    let (mut inside, mut outside) = (hit?, target);
    loop {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            return Some(inside);
        }
        if feasible(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

/// Brute-force minimizer of `Σ Γ_i (u_i − k_i)²` subject to `feasible(u)`
/// for one or two inputs. The feasible set must be convex. Uses only the
/// predicate: a coarse grid for the outer coordinate, golden-section
/// refinement, and bisection for the inner coordinate's boundary.
pub fn qp_oracle<P: Fn(&[f64]) -> bool>(kd: &[f64], gamma: &[f64], feasible: P) -> Option<Vec<f64>> {
    let cost = |u: &[f64]| -> f64 { u.iter().zip(kd).zip(gamma).map(|((u, k), g)| g * (u - k).powi(2)).sum() };
    match kd.len() {
        1 => closest_feasible_1d(|t| feasible(&[t]), kd[0]).map(|t| vec![t]),
        2 => {
            let inner = |u1: f64| closest_feasible_1d(|t| feasible(&[u1, t]), kd[1]);
            let g = |u1: f64| inner(u1).map(|u2| cost(&[u1, u2])).unwrap_or(f64::INFINITY);
            const NODES: usize = 201;
            let mut radius = 1.0 + kd[0].abs();
            loop {
                let nodes: Vec<f64> = (0..NODES)
                    .map(|i| kd[0] - radius + 2.0 * radius * i as f64 / (NODES - 1) as f64)
                    .collect();
                let values: Vec<f64> = nodes.iter().map(|&t| g(t)).collect();
                let (best, &best_val) = values
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap();
                if best_val.is_finite() && best > 0 && best < NODES - 1 {
                    let u1 = golden(g, nodes[best - 1], nodes[best + 1]);
                    let u1 = if g(u1) <= best_val { u1 } else { nodes[best] };
                    return inner(u1).map(|u2| vec![u1, u2]);
                }
                radius *= 4.0;
                if radius > 1e15 {
                    return None;
                }
            }
        }
        m => panic!("oracle supports one or two inputs, got {m}"),
    }
}
