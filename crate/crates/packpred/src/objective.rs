//! Set-function oracles and their multilinear extensions.
//!
//! A set function `f` over `n` elements is exposed as a black-box oracle.
//! Its multilinear extension `F(x)` is the expectation of `f` over the random
//! set that includes element `e` independently with probability `x_e`.
//! `F` can be evaluated exactly by enumeration (small `n`) or by seeded
//! Monte-Carlo sampling, and is paired with an empirical checker for the
//! local-smoothness inequality that drives the packing engine's guarantees.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Largest element count for which full `2^n` enumeration is allowed.
pub const EXACT_LIMIT: usize = 20;

/// Largest element count for which exhaustive subset checks run (smoothness,
/// dual configuration constraints).
pub const EXHAUSTIVE_SET_LIMIT: usize = 12;

#[derive(Error, Debug)]
pub enum ObjectiveError {
    #[error("dimension mismatch: point has {point} coordinates, oracle has {oracle}")]
    DimensionMismatch { point: usize, oracle: usize },
    #[error("exact evaluation rejected for n = {n} (limit {limit})")]
    TooLargeForExact { n: usize, limit: usize },
    #[error("oracle returned negative value {value}; objectives must be non-negative")]
    NegativeValue { value: f64 },
    #[error("element {index} out of range (n = {n})")]
    ElementOutOfRange { index: usize, n: usize },
    #[error("invalid coordinate {value} at index {index}; must lie in [0,1]")]
    CoordinateOutOfRange { index: usize, value: f64 },
    #[error("smoothness parameter lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("smoothness parameter mu must be non-negative, got {0}")]
    NegativeMu(f64),
    #[error("custom oracle failed monotonicity spot check: f grew from {from} to {to} when removing an element")]
    NotMonotone { from: f64, to: f64 },
    #[error("sample count must be positive")]
    ZeroSamples,
}

type Result<T> = std::result::Result<T, ObjectiveError>;

/// Black-box callback for custom oracles.
pub type CustomEval = Box<dyn Fn(&[bool]) -> f64 + Send + Sync>;

enum OracleKind {
    Linear {
        weights: Vec<f64>,
    },
    Coverage {
        /// Universe points covered by each element.
        covers: Vec<Vec<usize>>,
        point_weights: Vec<f64>,
    },
    Custom {
        eval: CustomEval,
    },
}

/// A monotone non-negative set function, given either in closed form
/// (linear, weighted coverage) or as a black-box callback.
pub struct SetFunctionOracle {
    kind: OracleKind,
    n: usize,
}

impl SetFunctionOracle {
    /// Linear objective `f(S) = sum_{e in S} w_e` with `w_e >= 0`.
    pub fn linear(weights: Vec<f64>) -> Result<Self> {
        if let Some(&w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(ObjectiveError::NegativeValue { value: w });
        }
        let n = weights.len();
        Ok(Self {
            kind: OracleKind::Linear { weights },
            n,
        })
    }

    /// Weighted coverage objective: element `e` covers the universe points in
    /// `covers[e]`, and `f(S)` is the total weight of points covered by `S`.
    pub fn coverage(
        universe: usize,
        covers: Vec<Vec<usize>>,
        point_weights: Vec<f64>,
    ) -> Result<Self> {
        assert_eq!(point_weights.len(), universe, "one weight per universe point");
        if let Some(&w) = point_weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(ObjectiveError::NegativeValue { value: w });
        }
        for set in &covers {
            for &p in set {
                assert!(p < universe, "covered point {p} outside universe {universe}");
            }
        }
        let n = covers.len();
        Ok(Self {
            kind: OracleKind::Coverage {
                covers,
                point_weights,
            },
            n,
        })
    }

    /// Black-box oracle over `n` elements. Monotonicity cannot be proved for a
    /// callback, so it is asserted by `trials` randomized chain comparisons.
    pub fn custom(n: usize, eval: CustomEval, trials: usize, seed: u64) -> Result<Self> {
        let oracle = Self {
            kind: OracleKind::Custom { eval },
            n,
        };
        oracle.spot_check_monotone(trials, seed)?;
        Ok(oracle)
    }

    /// Number of elements the oracle is currently defined over.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, OracleKind::Linear { .. })
    }

    /// `f({e})`, used by the linear closed form and LP relaxations.
    pub fn singleton_value(&self, e: usize) -> Result<f64> {
        if e >= self.n {
            return Err(ObjectiveError::ElementOutOfRange { index: e, n: self.n });
        }
        match &self.kind {
            OracleKind::Linear { weights } => Ok(weights[e]),
            _ => {
                let mut set = vec![false; self.n];
                set[e] = true;
                self.value(&set)
            }
        }
    }

    /// Evaluate `f` on a set given as a membership mask.
    pub fn value(&self, set: &[bool]) -> Result<f64> {
        if set.len() != self.n {
            return Err(ObjectiveError::DimensionMismatch {
                point: set.len(),
                oracle: self.n,
            });
        }
        let v = match &self.kind {
            OracleKind::Linear { weights } => set
                .iter()
                .zip(weights)
                .filter(|(m, _)| **m)
                .map(|(_, w)| *w)
                .sum(),
            OracleKind::Coverage {
                covers,
                point_weights,
            } => {
                let mut covered = vec![false; point_weights.len()];
                for (e, member) in set.iter().enumerate() {
                    if *member {
                        for &p in &covers[e] {
                            covered[p] = true;
                        }
                    }
                }
                covered
                    .iter()
                    .zip(point_weights)
                    .filter(|(c, _)| **c)
                    .map(|(_, w)| *w)
                    .sum()
            }
            OracleKind::Custom { eval } => {
                let v = eval(set);
                if v < 0.0 || !v.is_finite() {
                    return Err(ObjectiveError::NegativeValue { value: v });
                }
                v
            }
        };
        Ok(v)
    }

    fn spot_check_monotone(&self, trials: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let mut set: Vec<bool> = (0..self.n).map(|_| rng.gen_bool(0.5)).collect();
            let members: Vec<usize> = (0..self.n).filter(|&e| set[e]).collect();
            if members.is_empty() {
                continue;
            }
            let with = self.value(&set)?;
            let drop = members[rng.gen_range(0..members.len())];
            set[drop] = false;
            let without = self.value(&set)?;
            if without > with + 1e-12 {
                return Err(ObjectiveError::NotMonotone {
                    from: with,
                    to: without,
                });
            }
        }
        Ok(())
    }
}

/// A fractional point `x` in `[0,1]^n`. Coordinates at or beyond `released`
/// belong to elements not yet revealed by the online stream and must be zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
    released: usize,
}

impl Point {
    /// A fully released point; every coordinate must lie in `[0,1]`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let released = coords.len();
        Self::with_released(coords, released)
    }

    /// A point whose first `released` coordinates are live; the rest must be 0.
    pub fn with_released(coords: Vec<f64>, released: usize) -> Result<Self> {
        for (i, &v) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(ObjectiveError::CoordinateOutOfRange { index: i, value: v });
            }
            if i >= released && v != 0.0 {
                return Err(ObjectiveError::CoordinateOutOfRange { index: i, value: v });
            }
        }
        Ok(Self { coords, released })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            coords: vec![0.0; n],
            released: 0,
        }
    }

    /// Characteristic vector of the set encoded by `mask`.
    pub fn indicator(n: usize, mask: u64) -> Self {
        let coords = (0..n)
            .map(|e| if mask >> e & 1 == 1 { 1.0 } else { 0.0 })
            .collect();
        Self { coords, released: n }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn released(&self) -> usize {
        self.released
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, e: usize) -> f64 {
        self.coords[e]
    }

    /// Reveal the next element; its coordinate stays at its current value
    /// (0 for a point built with [`Point::zeros`]).
    pub fn advance_released(&mut self) {
        assert!(self.released < self.coords.len());
        self.released += 1;
    }

    pub(crate) fn set(&mut self, e: usize, value: f64) {
        debug_assert!(e < self.released);
        debug_assert!((0.0..=1.0 + 1e-12).contains(&value));
        self.coords[e] = value.min(1.0);
    }

    /// Coordinatewise scaling by `1/(1+eta)`, used by the robustness bound.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coords: self.coords.iter().map(|v| v * factor).collect(),
            released: self.released,
        }
    }
}

/// Local-smoothness parameters `(lambda, mu)` of a multilinear extension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessParams {
    pub lambda: f64,
    pub mu: f64,
}

impl SmoothnessParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(ObjectiveError::NonPositiveLambda(lambda));
        }
        if mu < 0.0 || !mu.is_finite() {
            return Err(ObjectiveError::NegativeMu(mu));
        }
        Ok(Self { lambda, mu })
    }
}

/// How the multilinear extension is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvalMode {
    /// Full expectation over all subsets; rejected for `n > EXACT_LIMIT`.
    Exact,
    /// Mean of `samples` independent draws, reproducible from `seed`.
    Sampled { samples: usize, seed: u64 },
}

fn check_dims(oracle: &SetFunctionOracle, x: &Point) -> Result<()> {
    if x.len() != oracle.len() {
        return Err(ObjectiveError::DimensionMismatch {
            point: x.len(),
            oracle: oracle.len(),
        });
    }
    Ok(())
}

/// Exact expectation of `f` under independent inclusion with probabilities
/// `coords`. Enumerates only the fractional coordinates; 0/1 coordinates are
/// folded into a base set.
fn exact_expectation(oracle: &SetFunctionOracle, coords: &[f64]) -> Result<f64> {
    let n = coords.len();
    let mut set = vec![false; n];
    let mut frac = Vec::new();
    for (i, &v) in coords.iter().enumerate() {
        if v == 1.0 {
            set[i] = true;
        } else if v > 0.0 {
            frac.push(i);
        }
    }
    let k = frac.len();
    let mut total = 0.0;
    for mask in 0u64..(1u64 << k) {
        let mut prob = 1.0;
        for (j, &i) in frac.iter().enumerate() {
            let inc = mask >> j & 1 == 1;
            set[i] = inc;
            prob *= if inc { coords[i] } else { 1.0 - coords[i] };
        }
        if prob > 0.0 {
            total += prob * oracle.value(&set)?;
        }
    }
    Ok(total)
}

/// Cached oracle lookup keyed by the set's bitmask. Valid for `n <= 64`,
/// which covers every enumeration and sampling path in this crate.
struct MaskCache<'a> {
    oracle: &'a SetFunctionOracle,
    cache: HashMap<u64, f64>,
}

impl<'a> MaskCache<'a> {
    fn new(oracle: &'a SetFunctionOracle) -> Self {
        Self {
            oracle,
            cache: HashMap::new(),
        }
    }

    fn value(&mut self, set: &[bool]) -> Result<f64> {
        if set.len() > 64 {
            return self.oracle.value(set);
        }
        let mut mask = 0u64;
        for (i, &m) in set.iter().enumerate() {
            if m {
                mask |= 1 << i;
            }
        }
        if let Some(&v) = self.cache.get(&mask) {
            return Ok(v);
        }
        let v = self.oracle.value(set)?;
        self.cache.insert(mask, v);
        Ok(v)
    }
}

/// Sampled mean of `f` with the per-sample variance of the mean, used for
/// standard-error based checks.
fn sampled_stats(
    oracle: &SetFunctionOracle,
    coords: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(ObjectiveError::ZeroSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = MaskCache::new(oracle);
    let mut set = vec![false; coords.len()];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        for (i, &p) in coords.iter().enumerate() {
            set[i] = rng.gen_bool(p);
        }
        let v = cache.value(&set)?;
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    Ok((mean, var / samples as f64))
}

/// Multilinear extension value `F(x)`.
///
/// Linear oracles always use the closed form `sum_e x_e f({e})`. Exact mode
/// enumerates subsets; sampled mode averages seeded independent draws.
pub fn evaluate_f(oracle: &SetFunctionOracle, x: &Point, mode: EvalMode) -> Result<f64> {
    check_dims(oracle, x)?;
    if let OracleKind::Linear { weights } = &oracle.kind {
        return Ok(x.coords().iter().zip(weights).map(|(x, w)| x * w).sum());
    }
    match mode {
        EvalMode::Exact => {
            if oracle.len() > EXACT_LIMIT {
                return Err(ObjectiveError::TooLargeForExact {
                    n: oracle.len(),
                    limit: EXACT_LIMIT,
                });
            }
            exact_expectation(oracle, x.coords())
        }
        EvalMode::Sampled { samples, seed } => {
            Ok(sampled_stats(oracle, x.coords(), samples, seed)?.0)
        }
    }
}

/// Sampled `F(x)` together with its standard error.
pub fn evaluate_f_with_se(
    oracle: &SetFunctionOracle,
    x: &Point,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_dims(oracle, x)?;
    let (mean, var) = sampled_stats(oracle, x.coords(), samples, seed)?;
    Ok((mean, var.sqrt()))
}

/// Directional gradient `grad_e F(x) = F((x_-e,1)) - F((x_-e,0))`.
///
/// Unreleased elements have gradient 0 by convention. Sampled mode draws
/// common random subsets `R` of the other elements and averages
/// `f(R + e) - f(R)`, which keeps the estimator unbiased while pairing the
/// two terms for variance reduction.
pub fn gradient_f(
    oracle: &SetFunctionOracle,
    x: &Point,
    e: usize,
    mode: EvalMode,
) -> Result<f64> {
    check_dims(oracle, x)?;
    if e >= oracle.len() {
        return Err(ObjectiveError::ElementOutOfRange {
            index: e,
            n: oracle.len(),
        });
    }
    if e >= x.released() {
        return Ok(0.0);
    }
    if let OracleKind::Linear { weights } = &oracle.kind {
        return Ok(weights[e]);
    }
    match mode {
        EvalMode::Exact => {
            if oracle.len() > EXACT_LIMIT {
                return Err(ObjectiveError::TooLargeForExact {
                    n: oracle.len(),
                    limit: EXACT_LIMIT,
                });
            }
            let mut hi = x.coords().to_vec();
            hi[e] = 1.0;
            let mut lo = x.coords().to_vec();
            lo[e] = 0.0;
            Ok(exact_expectation(oracle, &hi)? - exact_expectation(oracle, &lo)?)
        }
        EvalMode::Sampled { samples, seed } => {
            Ok(gradient_sampled_stats(oracle, x.coords(), e, samples, seed)?.0)
        }
    }
}

/// Sampled gradient with its standard error (paired differences).
pub fn gradient_f_with_se(
    oracle: &SetFunctionOracle,
    x: &Point,
    e: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_dims(oracle, x)?;
    if e >= x.released() {
        return Ok((0.0, 0.0));
    }
    let (mean, var) = gradient_sampled_stats(oracle, x.coords(), e, samples, seed)?;
    Ok((mean, var.sqrt()))
}

fn gradient_sampled_stats(
    oracle: &SetFunctionOracle,
    coords: &[f64],
    e: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(ObjectiveError::ZeroSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = MaskCache::new(oracle);
    let mut set = vec![false; coords.len()];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        for (i, &p) in coords.iter().enumerate() {
            set[i] = i != e && rng.gen_bool(p);
        }
        set[e] = true;
        let hi = cache.value(&set)?;
        set[e] = false;
        let lo = cache.value(&set)?;
        let d = hi - lo;
        sum += d;
        sum_sq += d * d;
    }
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    Ok((mean, var / samples as f64))
}

/// One `(S, x)` pair violating the local-smoothness inequality.
#[derive(Clone, Debug)]
pub struct SmoothnessViolation {
    pub set_mask: u64,
    pub x: Vec<f64>,
    /// `lambda f(1_S) - mu F(x) - sum_{e in S} grad_e F(x)`, positive.
    pub gap: f64,
}

#[derive(Debug, Default)]
pub struct SmoothnessReport {
    pub violations: Vec<SmoothnessViolation>,
    pub max_violation: f64,
    pub pairs_checked: usize,
}

impl SmoothnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tolerance for exact-arithmetic smoothness checks.
pub const SMOOTHNESS_TOL: f64 = 1e-9;

/// Empirically check that the oracle's multilinear extension is
/// `(lambda, mu)`-locally-smooth: for every set `S` and point `x`,
/// `sum_{e in S} grad_e F(x) >= lambda f(1_S) - mu F(x)`.
///
/// For `n <= EXHAUSTIVE_SET_LIMIT` all sets `S` are enumerated against
/// `trials` random points; beyond that, `(S, x)` pairs are sampled and the
/// inequality is tested at 3 standard errors.
pub fn check_local_smoothness(
    oracle: &SetFunctionOracle,
    params: SmoothnessParams,
    trials: usize,
    seed: u64,
) -> Result<SmoothnessReport> {
    let n = oracle.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SmoothnessReport::default();

    if n <= EXHAUSTIVE_SET_LIMIT {
        // Precompute f on every set once.
        let mut f_of = vec![0.0; 1 << n];
        let mut set = vec![false; n];
        for (mask, slot) in f_of.iter_mut().enumerate() {
            for (e, s) in set.iter_mut().enumerate() {
                *s = mask >> e & 1 == 1;
            }
            *slot = oracle.value(&set)?;
        }
        for _ in 0..trials {
            let x = Point::new((0..n).map(|_| rng.gen::<f64>()).collect())?;
            let fx = evaluate_f(oracle, &x, EvalMode::Exact)?;
            let grads: Vec<f64> = (0..n)
                .map(|e| gradient_f(oracle, &x, e, EvalMode::Exact))
                .collect::<Result<_>>()?;
            for mask in 0u64..(1u64 << n) {
                let lhs: f64 = (0..n)
                    .filter(|e| mask >> e & 1 == 1)
                    .map(|e| grads[e])
                    .sum();
                let rhs = params.lambda * f_of[mask as usize] - params.mu * fx;
                report.pairs_checked += 1;
                let gap = rhs - lhs;
                if gap > SMOOTHNESS_TOL {
                    report.max_violation = report.max_violation.max(gap);
                    report.violations.push(SmoothnessViolation {
                        set_mask: mask,
                        x: x.coords().to_vec(),
                        gap,
                    });
                }
            }
        }
    } else {
        // Sampled regime: random (S, x) pairs, Monte-Carlo F and gradients,
        // inequality tested at 3 standard errors.
        let samples = 20_000;
        for t in 0..trials {
            let x = Point::new((0..n).map(|_| rng.gen::<f64>()).collect())?;
            let mask: u64 = rng.gen::<u64>() & ((1u64 << n.min(63)) - 1);
            let members: Vec<usize> = (0..n).filter(|e| mask >> e & 1 == 1).collect();
            let sub_seed = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(t as u64 + 1));
            let (fx, fx_se) = evaluate_f_with_se(oracle, &x, samples, sub_seed)?;
            let mut lhs = 0.0;
            let mut lhs_var = 0.0;
            for (j, &e) in members.iter().enumerate() {
                let (g, se) =
                    gradient_f_with_se(oracle, &x, e, samples, sub_seed.wrapping_add(j as u64 + 1))?;
                lhs += g;
                lhs_var += se * se;
            }
            let set: Vec<bool> = (0..n).map(|e| mask >> e & 1 == 1).collect();
            let f_s = oracle.value(&set)?;
            let rhs = params.lambda * f_s - params.mu * fx;
            let se_total = (lhs_var + (params.mu * fx_se).powi(2)).sqrt();
            report.pairs_checked += 1;
            let gap = rhs - lhs;
            if gap > 3.0 * se_total {
                report.max_violation = report.max_violation.max(gap);
                report.violations.push(SmoothnessViolation {
                    set_mask: mask,
                    x: x.coords().to_vec(),
                    gap,
                });
            }
        }
    }
    Ok(report)
}
