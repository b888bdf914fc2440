//! Offline oracles: the fractional optimum via a dense simplex solver, the
//! integral optimum via a small branch-and-bound, and the epsilon-perturbed
//! prediction generator used by the experiments.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adauction::AdAuctionInstance;

#[derive(Error, Debug)]
pub enum OfflineError {
    #[error("LP too large: {vars} variables x {constraints} constraints (limits {MAX_VARS} x {MAX_CONSTRAINTS})")]
    TooLarge { vars: usize, constraints: usize },
    #[error("non-finite or negative capacity {value} in constraint {row}")]
    BadCapacity { row: usize, value: f64 },
    #[error("non-finite coefficient in LP")]
    BadCoefficient,
    #[error("constraint {row} has {len} coefficients for {vars} variables")]
    RowLength { row: usize, len: usize, vars: usize },
    #[error("LP is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

type Result<T> = std::result::Result<T, OfflineError>;

pub const MAX_VARS: usize = 20_000;
pub const MAX_CONSTRAINTS: usize = 5_000;
const EPS: f64 = 1e-9;

/// `maximize c . x  s.t.  A x <= cap, 0 <= x <= ub` (dense rows; `ub` entries
/// may be infinite).
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub caps: Vec<f64>,
    pub upper_bounds: Vec<f64>,
}

impl LpProblem {
    pub fn new(
        objective: Vec<f64>,
        rows: Vec<Vec<f64>>,
        caps: Vec<f64>,
        upper_bounds: Vec<f64>,
    ) -> Result<Self> {
        let n = objective.len();
        if objective.iter().any(|v| !v.is_finite()) {
            return Err(OfflineError::BadCoefficient);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(OfflineError::RowLength {
                    row: r,
                    len: row.len(),
                    vars: n,
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(OfflineError::BadCoefficient);
            }
        }
        for (r, &cap) in caps.iter().enumerate() {
            if !cap.is_finite() || cap < 0.0 {
                return Err(OfflineError::BadCapacity { row: r, value: cap });
            }
        }
        assert_eq!(rows.len(), caps.len());
        assert_eq!(upper_bounds.len(), n);
        Ok(Self {
            objective,
            rows,
            caps,
            upper_bounds,
        })
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

/// Primal simplex on the slack-basis tableau (every cap is non-negative, so
/// `x = 0` is feasible). Dantzig pricing, switching permanently to Bland's
/// rule after a stall, which guarantees termination. Finite upper bounds are
/// appended as explicit rows — adequate at the instance sizes in scope.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    let n = problem.objective.len();
    let mut rows = problem.rows.clone();
    let mut caps = problem.caps.clone();
    for (j, &ub) in problem.upper_bounds.iter().enumerate() {
        if ub.is_finite() {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            rows.push(row);
            caps.push(ub.max(0.0));
        }
    }
    let m = rows.len();
    if n > MAX_VARS || m > MAX_CONSTRAINTS {
        return Err(OfflineError::TooLarge {
            vars: n,
            constraints: m,
        });
    }

    // Tableau: m rows of [A | I | b], flattened; reduced costs kept apart.
    let width = n + m + 1;
    let mut tab = vec![0.0f64; m * width];
    for (r, row) in rows.iter().enumerate() {
        tab[r * width..r * width + n].copy_from_slice(row);
        tab[r * width + n + r] = 1.0;
        tab[r * width + n + m] = caps[r];
    }
    let mut rc: Vec<f64> = problem
        .objective
        .iter()
        .copied()
        .chain(std::iter::repeat(0.0))
        .take(n + m)
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut bland = false;
    let mut stall = 0usize;
    let iter_cap = 100 + 40 * (n + m);
    for _ in 0..iter_cap {
        // Entering variable.
        let enter = if bland {
            (0..n + m).find(|&j| rc[j] > EPS)
        } else {
            (0..n + m)
                .filter(|&j| rc[j] > EPS)
                .max_by(|&a, &b| rc[a].partial_cmp(&rc[b]).unwrap())
        };
        let Some(enter) = enter else {
            // Optimal: read off the solution.
            let mut x = vec![0.0; n];
            for (r, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = tab[r * width + n + m].max(0.0);
                }
            }
            let value = x
                .iter()
                .zip(&problem.objective)
                .map(|(xi, ci)| xi * ci)
                .sum();
            return Ok(LpSolution { value, x });
        };

        // Leaving row: minimum ratio, ties to the lowest basis index.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..m {
            let a = tab[r * width + enter];
            if a > EPS {
                let ratio = tab[r * width + n + m] / a;
                let better = match leave {
                    None => true,
                    Some(cur) => {
                        ratio < best_ratio - 1e-12
                            || (ratio < best_ratio + 1e-12 && basis[r] < basis[cur])
                    }
                };
                if better {
                    best_ratio = ratio.min(best_ratio);
                    leave = Some(r);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(OfflineError::Unbounded);
        };

        if best_ratio < 1e-12 {
            stall += 1;
            if stall > 50 {
                bland = true;
            }
        } else {
            stall = 0;
        }

        // Pivot on (leave, enter).
        let piv = tab[leave * width + enter];
        let (lo, hi) = (leave * width, leave * width + width);
        for v in &mut tab[lo..hi] {
            *v /= piv;
        }
        for r in 0..m {
            if r == leave {
                continue;
            }
            let factor = tab[r * width + enter];
            if factor != 0.0 {
                for c in 0..width {
                    tab[r * width + c] -= factor * tab[leave * width + c];
                }
            }
        }
        let factor = rc[enter];
        for (c, v) in rc.iter_mut().enumerate() {
            *v -= factor * tab[leave * width + c];
        }
        basis[leave] = enter;
    }
    Err(OfflineError::IterationLimit)
}

/// Build the fractional assignment LP of an ad-auction instance: one
/// variable per positive bid, item rows `sum_i x_{i,e} <= 1`, buyer rows
/// `sum_e b_{i,e} x_{i,e} <= B_i`. Returns the variable -> (buyer, item) map.
pub fn build_auction_lp(instance: &AdAuctionInstance) -> Result<(LpProblem, Vec<(usize, usize)>)> {
    let mut objective = Vec::new();
    let mut var_map = Vec::new();
    for (e, bids) in instance.items.iter().enumerate() {
        for &(i, b) in bids {
            if b > 0.0 {
                objective.push(b);
                var_map.push((i, e));
            }
        }
    }
    let nv = objective.len();
    let mut rows = Vec::new();
    let mut caps = Vec::new();
    for e in 0..instance.n() {
        let mut row = vec![0.0; nv];
        let mut any = false;
        for (j, &(_, ej)) in var_map.iter().enumerate() {
            if ej == e {
                row[j] = 1.0;
                any = true;
            }
        }
        if any {
            rows.push(row);
            caps.push(1.0);
        }
    }
    for i in 1..=instance.m {
        let mut row = vec![0.0; nv];
        let mut any = false;
        for (j, &(ij, ej)) in var_map.iter().enumerate() {
            if ij == i {
                row[j] = instance.bid(ej, i);
                any = true;
            }
        }
        if any {
            rows.push(row);
            caps.push(instance.budget(i));
        }
    }
    let ubs = vec![f64::INFINITY; nv];
    Ok((LpProblem::new(objective, rows, caps, ubs)?, var_map))
}

/// Fractional optimum of an ad-auction instance.
pub fn solve_fractional_opt(instance: &AdAuctionInstance) -> Result<LpSolution> {
    let (lp, _) = build_auction_lp(instance)?;
    solve_lp(&lp)
}

#[derive(Clone, Debug)]
pub struct BnbResult {
    pub value: f64,
    pub assignment: Vec<Option<usize>>,
    /// False when the time cap expired before the search space was exhausted.
    pub optimal: bool,
}

/// Optimal integral assignment (each item to at most one buyer, budgets
/// respected exactly) by depth-first branch and bound. Exact on small
/// instances; on larger ones the time cap yields the best assignment found
/// with `optimal = false`.
pub fn solve_integral_bnb(instance: &AdAuctionInstance, time_cap: Duration) -> BnbResult {
    let n = instance.n();
    // Upper bound: best remaining value ignoring budgets.
    let mut suffix = vec![0.0; n + 1];
    for e in (0..n).rev() {
        let best: f64 = instance.items[e]
            .iter()
            .map(|&(_, b)| b)
            .fold(0.0, f64::max);
        suffix[e] = suffix[e + 1] + best;
    }

    struct Search<'a> {
        instance: &'a AdAuctionInstance,
        suffix: Vec<f64>,
        best_value: f64,
        best_assignment: Vec<Option<usize>>,
        current: Vec<Option<usize>>,
        remaining: Vec<f64>,
        deadline: Instant,
        nodes: u64,
        timed_out: bool,
    }

    impl Search<'_> {
        fn dfs(&mut self, e: usize, value: f64) {
            self.nodes += 1;
            if self.nodes % 4096 == 0 && Instant::now() > self.deadline {
                self.timed_out = true;
            }
            if self.timed_out {
                return;
            }
            if e == self.instance.n() {
                if value > self.best_value {
                    self.best_value = value;
                    self.best_assignment = self.current.clone();
                }
                return;
            }
            if value + self.suffix[e] <= self.best_value + 1e-12 {
                return;
            }
            let mut choices: Vec<(usize, f64)> = self.instance.items[e]
                .iter()
                .filter(|&&(_, b)| b > 0.0)
                .copied()
                .collect();
            choices.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for (i, b) in choices {
                if b <= self.remaining[i] + 1e-15 {
                    self.remaining[i] -= b;
                    self.current[e] = Some(i);
                    self.dfs(e + 1, value + b);
                    self.current[e] = None;
                    self.remaining[i] += b;
                }
            }
            self.dfs(e + 1, value);
        }
    }

    let mut remaining = vec![0.0; instance.m + 1];
    for i in 1..=instance.m {
        remaining[i] = instance.budget(i);
    }
    let mut search = Search {
        instance,
        suffix,
        best_value: 0.0,
        best_assignment: vec![None; n],
        current: vec![None; n],
        remaining,
        deadline: Instant::now() + time_cap,
        nodes: 0,
        timed_out: false,
    };
    search.dfs(0, 0.0);
    BnbResult {
        value: search.best_value,
        assignment: search.best_assignment,
        optimal: !search.timed_out,
    }
}

/// Round a fractional LP solution to a feasible integral assignment: visit
/// variables in decreasing fractional mass and assign an item to a buyer when
/// the item is still free and the buyer's residual budget covers the bid;
/// then fill each still-unassigned item with its largest bid that fits. The
/// fill pass matters: the LP spreads most items across buyers in small
/// fractions, so mass order alone leaves the bulk of the stream unassigned.
pub fn greedy_prediction_base(
    instance: &AdAuctionInstance,
    x: &[f64],
    var_map: &[(usize, usize)],
) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..x.len()).filter(|&j| x[j] > 1e-9).collect();
    order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap().then(a.cmp(&b)));
    let mut assignment = vec![None; instance.n()];
    let mut remaining: Vec<f64> = std::iter::once(0.0)
        .chain(instance.budgets.iter().copied())
        .collect();
    for j in order {
        let (i, e) = var_map[j];
        let b = instance.bid(e, i);
        if assignment[e].is_none() && b <= remaining[i] + 1e-15 {
            assignment[e] = Some(i);
            remaining[i] -= b;
        }
    }
    for e in 0..instance.n() {
        if assignment[e].is_some() {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for &(i, b) in &instance.items[e] {
            if b > 0.0 && b <= remaining[i] + 1e-15 && best.map_or(true, |(_, bb)| b > bb) {
                best = Some((i, b));
            }
        }
        if let Some((i, b)) = best {
            assignment[e] = Some(i);
            remaining[i] -= b;
        }
    }
    assignment
}

/// Independently per assigned item, with probability `epsilon` replace the
/// predicted buyer by a uniform choice among the buyers with a positive bid
/// on that item. Unassigned items stay unassigned. Deterministic from `seed`;
/// `epsilon = 0` reproduces the base exactly.
pub fn generate_prediction(
    base: &[Option<usize>],
    epsilon: f64,
    seed: u64,
    instance: &AdAuctionInstance,
) -> Vec<Option<usize>> {
    assert!((0.0..=1.0).contains(&epsilon));
    assert_eq!(base.len(), instance.n());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    base.iter()
        .enumerate()
        .map(|(e, &b)| {
            let perturb = epsilon > 0.0 && rng.gen_bool(epsilon);
            if !perturb || b.is_none() {
                return b;
            }
            let bidders: Vec<usize> = instance.items[e]
                .iter()
                .filter(|&&(_, bid)| bid > 0.0)
                .map(|&(i, _)| i)
                .collect();
            if bidders.is_empty() {
                b
            } else {
                Some(bidders[rng.gen_range(0..bidders.len())])
            }
        })
        .collect()
}
