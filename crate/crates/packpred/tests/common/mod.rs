//! Shared helpers for the integration tests: a seeded generator for small
//! packing instances (alternating coverage and linear objectives) and exact
//! offline optima to compare the online runs against.
//!
//! Each integration-test binary compiles this module independently and none
//! of them uses every item, so dead-code lints are suppressed here.
#![allow(dead_code)]

use packpred::engine::PackingInstance;
use packpred::objective::SetFunctionOracle;
use packpred::offline::{solve_lp, LpProblem};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub struct PackingCase {
    pub instance: PackingInstance,
    pub objective: ObjectiveSpec,
    pub predictions: Vec<bool>,
    pub eta: f64,
}

pub enum ObjectiveSpec {
    Linear(Vec<f64>),
    Coverage {
        universe: usize,
        covers: Vec<Vec<usize>>,
        weights: Vec<f64>,
    },
}

/// One small random packing case. Even indices draw a coverage objective
/// (n <= 12, so exact evaluation and exhaustive verification apply), odd
/// indices a linear one (n up to 30). Columns have 3-4 positive entries in
/// [0.6, 1.0). Half the cases carry a prediction built greedily within the
/// capacities (feasible throughout), the other half carry random bits that
/// almost always overflow some resource mid-stream, so the suite exercises
/// both the trusted and the fallback paths. Eta cycles through
/// {0.05, 0.5, 1.0}.
pub fn random_packing_case(idx: usize, seed: u64) -> PackingCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
    let m = rng.gen_range(3..=8usize);
    let coverage = idx % 2 == 0;
    let (n, oracle, objective) = if coverage {
        let n = rng.gen_range(6..=12usize);
        let universe = rng.gen_range(8..=16usize);
        let weights: Vec<f64> = (0..universe).map(|_| rng.gen_range(0.75..1.25)).collect();
        let covers: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                let k = rng.gen_range(2..=3usize).min(universe);
                rand::seq::index::sample(&mut rng, universe, k).into_vec()
            })
            .collect();
        let oracle =
            SetFunctionOracle::coverage(universe, covers.clone(), weights.clone()).unwrap();
        (
            n,
            oracle,
            ObjectiveSpec::Coverage {
                universe,
                covers,
                weights,
            },
        )
    } else {
        let n = rng.gen_range(13..=30usize);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let oracle = SetFunctionOracle::linear(weights.clone()).unwrap();
        (n, oracle, ObjectiveSpec::Linear(weights))
    };
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let k = rng.gen_range(3..=4usize).min(m);
            let rows = rand::seq::index::sample(&mut rng, m, k);
            let mut col = vec![0.0; m];
            for i in rows {
                col[i] = rng.gen_range(0.6..1.0);
            }
            col
        })
        .collect();
    let predictions: Vec<bool> = if rng.gen_bool(0.5) {
        let mut loads = vec![0.0f64; m];
        (0..n)
            .map(|e| {
                let fits = columns[e].iter().zip(&loads).all(|(b, l)| l + b <= 1.0);
                if fits && rng.gen_bool(0.7) {
                    for (l, b) in loads.iter_mut().zip(&columns[e]) {
                        *l += b;
                    }
                    true
                } else {
                    false
                }
            })
            .collect()
    } else {
        (0..n).map(|_| rng.gen_bool(0.4)).collect()
    };
    let (d, rho) = PackingInstance::derive_d_rho(m, &columns);
    let instance = PackingInstance::new(m, columns, oracle, d, rho).unwrap();
    let eta = [0.05, 0.5, 1.0][idx % 3];
    PackingCase {
        instance,
        objective,
        predictions,
        eta,
    }
}

/// Exact fractional optimum of a packing case. Linear objectives solve the
/// packing LP directly. Coverage objectives solve the standard coverage LP
/// (one covered-fraction variable per universe point), whose optimum upper
/// bounds the multilinear optimum F over the packing polytope — the safe
/// direction for robustness lower-bound checks.
pub fn packing_opt_frac(case: &PackingCase) -> f64 {
    let inst = &case.instance;
    let n = inst.n();
    match &case.objective {
        ObjectiveSpec::Linear(w) => {
            let rows: Vec<Vec<f64>> = (0..inst.m)
                .map(|i| (0..n).map(|e| inst.columns[e][i]).collect())
                .collect();
            let lp = LpProblem::new(w.clone(), rows, vec![1.0; inst.m], vec![1.0; n]).unwrap();
            solve_lp(&lp).unwrap().value
        }
        ObjectiveSpec::Coverage {
            universe,
            covers,
            weights,
        } => {
            // Variables [x_0..x_{n-1}, c_0..c_{U-1}]; maximize sum w_u c_u
            // s.t. packing rows on x, c_u <= sum_{e covering u} x_e, c <= 1.
            let nv = n + universe;
            let mut obj = vec![0.0; nv];
            for (u, &w) in weights.iter().enumerate() {
                obj[n + u] = w;
            }
            let mut rows = Vec::new();
            let mut caps = Vec::new();
            for i in 0..inst.m {
                let mut r = vec![0.0; nv];
                for e in 0..n {
                    r[e] = inst.columns[e][i];
                }
                rows.push(r);
                caps.push(1.0);
            }
            for u in 0..*universe {
                let mut r = vec![0.0; nv];
                r[n + u] = 1.0;
                for (e, cov) in covers.iter().enumerate() {
                    if cov.contains(&u) {
                        r[e] = -1.0;
                    }
                }
                rows.push(r);
                caps.push(0.0);
            }
            let lp = LpProblem::new(obj, rows, caps, vec![1.0; nv]).unwrap();
            solve_lp(&lp).unwrap().value
        }
    }
}
