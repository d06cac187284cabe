//! Helpers shared by the integration tests.
#![allow(dead_code)]

use cascade_toa::crlb::FisherMatrix;
use cascade_toa::hierarchy::{assign_levels, dynamic_anchor_set, LevelMap};
use cascade_toa::model::{Node, NoiseParams, Position2D, Role, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random connected scenario with `n` nodes, 3–4 of them base anchors, in
/// which at least one node reaches level 2. Retries placements until it does.
pub fn random_scenario(seed: u64, n: usize, noise: NoiseParams) -> (Scenario, LevelMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let bases = rng.gen_range(3..=4);
        let mut nodes = Vec::with_capacity(n);
        for i in 0..bases {
            let p = Position2D::new(rng.gen_range(0.0..250.0), rng.gen_range(0.0..250.0));
            nodes.push(Node::new(format!("b{i}"), p, Role::BaseAnchor));
        }
        for i in bases..n {
            let p = Position2D::new(rng.gen_range(0.0..700.0), rng.gen_range(0.0..700.0));
            nodes.push(Node::new(format!("n{i}"), p, Role::Blind));
        }
        let sc = Scenario::new(nodes, 420.0, noise, seed).expect("valid scenario");
        let lm = assign_levels(&sc);
        // distinct positions keep every link direction defined
        let min_gap = pairwise_min_distance(&sc);
        if lm.max_level() >= 2 && min_gap > 5.0 {
            return (sc, lm);
        }
    }
    panic!("no level-2 placement found for seed {seed}");
}

fn pairwise_min_distance(sc: &Scenario) -> f64 {
    let nodes = sc.nodes();
    let mut best = f64::INFINITY;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            best = best.min(nodes[i].true_pos.distance(nodes[j].true_pos));
        }
    }
    best
}

/// Expected log-likelihood of θ around the true configuration: every ranging
/// link of the FIM's model contributes `−(d₀ − d(θ))²/2σ²`, every base anchor
/// `−‖s − s₀‖²/2δ²`. Its Hessian at θ₀ is minus the Fisher information.
pub fn expected_log_likelihood(sc: &Scenario, lm: &LevelMap, fim: &FisherMatrix, theta: &[f64]) -> f64 {
    let order = &fim.index.ordering;
    let at = |rank: usize| Position2D::new(theta[2 * rank], theta[2 * rank + 1]);
    let sigma2 = sc.noise.sigma.powi(2);
    let delta2 = sc.noise.delta.powi(2);
    let target_level = lm.level(order[0].as_str()).expect("leveled target");
    let mut total = 0.0;
    for (rank, id) in order.iter().enumerate() {
        let level = if rank == 0 { target_level } else { lm.level(id.as_str()).unwrap() };
        let truth = sc.position(id.as_str()).unwrap();
        if level == 0 {
            total -= at(rank).distance(truth).powi(2) / (2.0 * delta2);
            continue;
        }
        for a in &dynamic_anchor_set(sc, lm, id.as_str()).unwrap().anchors {
            let other = order.iter().position(|o| o == a).expect("anchor in θ");
            let d0 = truth.distance(sc.position(a.as_str()).unwrap());
            let d = at(rank).distance(at(other));
            total -= (d0 - d).powi(2) / (2.0 * sigma2);
        }
    }
    total
}

/// Central-difference Hessian of `f` at `x`.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut out = vec![vec![0.0; n]; n];
    let mut y = x.to_vec();
    for i in 0..n {
        for j in i..n {
            let mut eval = |si: f64, sj: f64| {
                y.copy_from_slice(x);
                y[i] += si * h;
                y[j] += sj * h;
                f(&y)
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// θ₀: the true coordinates in the FIM's parameter order.
pub fn true_theta(sc: &Scenario, fim: &FisherMatrix) -> Vec<f64> {
    fim.index
        .ordering
        .iter()
        .flat_map(|id| {
            let p = sc.position(id.as_str()).unwrap();
            [p.x, p.y]
        })
        .collect()
}
