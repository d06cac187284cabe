//! Analytic Fisher information against a finite-difference oracle.

mod common;

use cascade_toa::crlb::{build_fim, crlb_of_target, spd_inverse, CrlbValue, FisherMatrix};
use cascade_toa::hierarchy::assign_levels;
use cascade_toa::model::NoiseParams;
use cascade_toa::scenarios::{nine_node_scenario, NINE_NODE_TARGET};
use common::{expected_log_likelihood, fd_hessian, random_scenario, true_theta};
use nalgebra::DMatrix;

const STEP: f64 = 1e-3;
const REL_TOL: f64 = 1e-4;
/// Absolute floor, relative to the largest entry, for entries that are zero.
const ABS_FLOOR: f64 = 1e-9;

fn fd_fim(sc: &cascade_toa::Scenario, lm: &cascade_toa::hierarchy::LevelMap, fim: &FisherMatrix) -> DMatrix<f64> {
    let theta = true_theta(sc, fim);
    let h = fd_hessian(|t| expected_log_likelihood(sc, lm, fim, t), &theta, STEP);
    let n = theta.len();
    DMatrix::from_fn(n, n, |i, j| -h[i][j])
}

fn assert_matches(an: &DMatrix<f64>, fd: &DMatrix<f64>, what: &str) {
    let scale = an.amax();
    for i in 0..an.nrows() {
        for j in 0..an.ncols() {
            let (a, f) = (an[(i, j)], fd[(i, j)]);
            assert!((a - f).abs() <= REL_TOL * a.abs() + ABS_FLOOR * scale, "{what}: entry ({i},{j}) analytic {a} vs fd {f}");
        }
    }
}

#[test]
fn nine_node_fim_matches_finite_differences() {
    let sc = nine_node_scenario(5.0, 3.0);
    let lm = assign_levels(&sc);
    let fim = build_fim(&sc, &lm, NINE_NODE_TARGET).unwrap();
    let fd = fd_fim(&sc, &lm, &fim);
    assert_matches(&fim.entries, &fd, "nine-node");

    // the bound itself through the oracle's inverse
    let inv = spd_inverse(&fd).unwrap();
    let oracle = CrlbValue { value: inv[(0, 0)] + inv[(1, 1)] };
    let analytic = crlb_of_target(&fim).unwrap();
    assert!((analytic.value - oracle.value).abs() <= 1e-3 * oracle.value, "{analytic:?} vs {oracle:?}");
}

#[test]
fn random_scenarios_match_finite_differences() {
    let noise = NoiseParams::new(4.0, 2.0).unwrap();
    for seed in 0..5u64 {
        let (sc, lm) = random_scenario(seed, 6 + (seed as usize % 5), noise);
        for target in lm.at_level(lm.max_level()) {
            let fim = build_fim(&sc, &lm, target.as_str()).unwrap();
            assert_matches(&fim.entries, &fd_fim(&sc, &lm, &fim), &format!("seed {seed} target {target}"));
        }
    }
}

#[test]
fn cross_blocks_are_negative() {
    // the sign the oracle settles: node–anchor coupling enters with −u uᵀ/σ²
    let sc = nine_node_scenario(5.0, 3.0);
    let lm = assign_levels(&sc);
    let fim = build_fim(&sc, &lm, NINE_NODE_TARGET).unwrap();
    let t = fim.index.coord(NINE_NODE_TARGET, 0).unwrap();
    let l1 = fim.index.coord("L1", 0).unwrap();
    let fd = fd_fim(&sc, &lm, &fim);
    assert!(fim.entries[(t, l1)] < 0.0);
    assert!(fd[(t, l1)] < 0.0);
}
