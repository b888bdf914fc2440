//! Learning-augmented allocation for budgeted ad-auction revenue
//! maximization.
//!
//! Items arrive online, each with sparse bids from a few buyers. A predicted
//! assignment may accompany the stream. Each item is offered to the buyer
//! maximizing `b_{i,e}(1 - alpha_i)`; when the predicted buyer outbids the
//! selected one the item is split `eta / (1 - eta)` between them, otherwise
//! the selected buyer takes it whole. Buyer 0 is fictitious: it bids 0,
//! absorbs allocations nobody profitable wants, and generates no revenue.
//!
//! The multiplier `alpha_i` follows the recurrence
//! `alpha_i <- alpha_i (1 + b/B_i) + (b/B_i) / (C - 1)` with
//! `C = (1 + R_max)^{eta / R_max}`, which keeps every buyer's spending within
//! `B_i (1 + R_max)` and yields revenue at least `(1 - 1/C)/(1 + R_max)` of
//! the fractional optimum, and at least `(1 - eta)` of the prediction's value
//! when the prediction is budget-feasible.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum AuctionError {
    #[error("R_max must be positive, got {0}")]
    NonPositiveRMax(f64),
    #[error("eta must lie in (0, 1], got {0}")]
    BadEta(f64),
    #[error("item {item}: buyer id {buyer} out of range 1..={m}")]
    BuyerOutOfRange { item: usize, buyer: usize, m: usize },
    #[error("item {item}: bid {bid} from buyer {buyer} exceeds budget {budget}")]
    BidExceedsBudget {
        item: usize,
        buyer: usize,
        bid: f64,
        budget: f64,
    },
    #[error("negative or non-finite value: {0}")]
    BadValue(f64),
    #[error("prediction stream has {len} entries for {n} items")]
    PredictionLength { len: usize, n: usize },
}

type Result<T> = std::result::Result<T, AuctionError>;

/// Relative tolerance for the running alpha lower bound (Lemma-4-style).
pub const ALPHA_BOUND_REL_TOL: f64 = 1e-9;
/// Tolerance for budget overrun beyond the `(1 + R_max)` factor.
pub const BUDGET_TOL: f64 = 1e-9;
/// Slack in the online predicted-spend feasibility monitor.
pub const PRED_SLACK: f64 = 1e-12;
/// Relative tolerance for the per-step primal/dual increase identity.
pub const DUAL_STEP_REL_TOL: f64 = 1e-9;

/// `C = (1 + R_max)^{eta / R_max}`; as `R_max -> 0+` the robustness factor
/// `1 - 1/C` tends to `1 - e^{-eta}`.
pub fn constant_c(r_max: f64, eta: f64) -> Result<f64> {
    if !(r_max > 0.0) {
        return Err(AuctionError::NonPositiveRMax(r_max));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(AuctionError::BadEta(eta));
    }
    Ok((1.0 + r_max).powf(eta / r_max))
}

/// Budgeted ad-auction instance: buyers `1..=m` with budgets, and a stream of
/// items each carrying a sparse bid vector. `r_max = max b_{i,e} / B_i`.
#[derive(Clone, Debug)]
pub struct AdAuctionInstance {
    pub m: usize,
    /// `budgets[i - 1]` is buyer `i`'s budget. A zero budget is allowed only
    /// for buyers without positive bids (inert buyers).
    pub budgets: Vec<f64>,
    /// Per item: `(buyer_id, bid)` pairs with `buyer_id` in `1..=m`.
    pub items: Vec<Vec<(usize, f64)>>,
    pub r_max: f64,
}

impl AdAuctionInstance {
    pub fn new(budgets: Vec<f64>, items: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let m = budgets.len();
        for &b in &budgets {
            if !b.is_finite() || b < 0.0 {
                return Err(AuctionError::BadValue(b));
            }
        }
        let mut r_max = 0.0f64;
        for (e, bids) in items.iter().enumerate() {
            for &(i, bid) in bids {
                if i == 0 || i > m {
                    return Err(AuctionError::BuyerOutOfRange {
                        item: e,
                        buyer: i,
                        m,
                    });
                }
                if !bid.is_finite() || bid < 0.0 {
                    return Err(AuctionError::BadValue(bid));
                }
                if bid > budgets[i - 1] {
                    return Err(AuctionError::BidExceedsBudget {
                        item: e,
                        buyer: i,
                        bid,
                        budget: budgets[i - 1],
                    });
                }
                if bid > 0.0 {
                    r_max = r_max.max(bid / budgets[i - 1]);
                }
            }
        }
        Ok(Self {
            m,
            budgets,
            items,
            r_max,
        })
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn budget(&self, i: usize) -> f64 {
        self.budgets[i - 1]
    }

    pub fn bid(&self, e: usize, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.items[e]
            .iter()
            .find(|&&(j, _)| j == i)
            .map_or(0.0, |&(_, b)| b)
    }
}

/// The buyer maximizing `b_{i,e}(1 - alpha_i)`, ties broken by lowest id;
/// buyer 0 when the maximum is not positive.
pub fn select_buyer(bids: &[(usize, f64)], alpha: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_val = 0.0f64;
    let mut sorted: Vec<&(usize, f64)> = bids.iter().collect();
    sorted.sort_by_key(|&&(i, _)| i);
    for &&(i, b) in &sorted {
        let v = b * (1.0 - alpha[i]);
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

/// State of one run; index 0 of every per-buyer vector is the fictitious
/// buyer.
#[derive(Clone, Debug)]
pub struct AuctionState {
    pub eta: f64,
    pub c: f64,
    pub alpha: Vec<f64>,
    pub spent: Vec<f64>,
    /// Per item, the `(buyer, fraction)` allocations made.
    pub allocations: Vec<Vec<(usize, f64)>>,
    /// `M(i)`: items fully allocated to buyer `i` (analysis bookkeeping).
    pub m_set: Vec<Vec<usize>>,
    /// `N(i)`: items where buyer `i` received the `1 - eta` predicted share.
    pub n_set: Vec<Vec<usize>>,
    /// `sum_{e in M(i)} b_{i,e}` for the alpha lower bound.
    pub m_spend: Vec<f64>,
    pub revenue: f64,
    pred_spend: Vec<f64>,
    pub pred_infeasible_at: Option<usize>,
    pub items_seen: usize,
}

impl AuctionState {
    pub fn new(m: usize, eta: f64, c: f64) -> Self {
        Self {
            eta,
            c,
            alpha: vec![0.0; m + 1],
            spent: vec![0.0; m + 1],
            allocations: Vec::new(),
            m_set: vec![Vec::new(); m + 1],
            n_set: vec![Vec::new(); m + 1],
            m_spend: vec![0.0; m + 1],
            revenue: 0.0,
            pred_spend: vec![0.0; m + 1],
            pred_infeasible_at: None,
            items_seen: 0,
        }
    }

    pub fn pred_feasible(&self) -> bool {
        self.pred_infeasible_at.is_none()
    }
}

/// What one allocation step did, for the per-step certificate checks.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    pub item: usize,
    pub selected: usize,
    pub predicted: usize,
    /// `max(0, b_{i,e}(1 - alpha_i))` before the update.
    pub beta: f64,
    pub bid_selected: f64,
    pub primal_gain: f64,
    /// `B_i * delta(alpha_i)`.
    pub dual_alpha_gain: f64,
}

/// Process one item. The prediction monitor is updated first; once the
/// cumulative predicted spend of some buyer exceeds its budget the predicted
/// buyer is replaced by 0 from that item onward (inclusive).
pub fn allocate_item(
    state: &mut AuctionState,
    instance: &AdAuctionInstance,
    e: usize,
    predicted: Option<usize>,
) -> StepRecord {
    debug_assert_eq!(e, state.items_seen);
    state.items_seen += 1;

    if let Some(p) = predicted {
        if p != 0 {
            state.pred_spend[p] += instance.bid(e, p);
            if state.pred_spend[p] > instance.budget(p) + PRED_SLACK
                && state.pred_infeasible_at.is_none()
            {
                state.pred_infeasible_at = Some(e);
            }
        }
    }
    let i_star = match predicted {
        Some(p) if state.pred_feasible() => p,
        _ => 0,
    };

    let bids = &instance.items[e];
    let i = select_buyer(bids, &state.alpha);
    let b_i = instance.bid(e, i);
    let b_star = instance.bid(e, i_star);
    let beta = (b_i * (1.0 - state.alpha[i])).max(0.0);

    let mut alloc = Vec::new();
    let mut primal_gain = 0.0;
    if b_i < b_star {
        // Predicted buyer outbids the selected one: split the item.
        alloc.push((i, state.eta));
        alloc.push((i_star, 1.0 - state.eta));
        if i != 0 {
            state.spent[i] += b_i * state.eta;
            primal_gain += b_i * state.eta;
        }
        state.spent[i_star] += b_star * (1.0 - state.eta);
        primal_gain += b_star * (1.0 - state.eta);
        state.n_set[i_star].push(e);
    } else {
        alloc.push((i, 1.0));
        if i != 0 {
            state.spent[i] += b_i;
            primal_gain += b_i;
            state.m_set[i].push(e);
            state.m_spend[i] += b_i;
        }
    }
    state.allocations.push(alloc);
    state.revenue += primal_gain;

    let mut dual_alpha_gain = 0.0;
    if i != 0 && b_i > 0.0 {
        let ratio = b_i / instance.budget(i);
        let before = state.alpha[i];
        state.alpha[i] = before * (1.0 + ratio) + ratio / (state.c - 1.0);
        dual_alpha_gain = instance.budget(i) * (state.alpha[i] - before);
    }

    StepRecord {
        item: e,
        selected: i,
        predicted: i_star,
        beta,
        bid_selected: b_i,
        primal_gain,
        dual_alpha_gain,
    }
}

#[derive(Debug, Default)]
pub struct AuctionReport {
    pub violations: Vec<String>,
}

impl AuctionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Running lower bound on the multipliers:
/// `alpha_i >= (C^{sum_{e in M(i)} b_{i,e}/(eta B_i)} - 1) / (C - 1)`.
pub fn verify_lemma4(state: &AuctionState, instance: &AdAuctionInstance) -> AuctionReport {
    let mut report = AuctionReport::default();
    for i in 1..=instance.m {
        let budget = instance.budget(i);
        if budget <= 0.0 {
            continue;
        }
        let bound =
            (state.c.powf(state.m_spend[i] / (state.eta * budget)) - 1.0) / (state.c - 1.0);
        if state.alpha[i] < bound * (1.0 - ALPHA_BOUND_REL_TOL) - 1e-15 {
            report.violations.push(format!(
                "buyer {i}: alpha = {} < bound {bound}",
                state.alpha[i]
            ));
        }
    }
    report
}

/// Spending stays within `B_i (1 + R_max)` per buyer and allocation mass
/// within 1 per item.
pub fn verify_budgets(state: &AuctionState, instance: &AdAuctionInstance) -> AuctionReport {
    let mut report = AuctionReport::default();
    for i in 1..=instance.m {
        let cap = instance.budget(i) * (1.0 + instance.r_max);
        if state.spent[i] > cap + BUDGET_TOL {
            report.violations.push(format!(
                "buyer {i}: spent {} > {} = B(1+R_max)",
                state.spent[i], cap
            ));
        }
    }
    for (e, alloc) in state.allocations.iter().enumerate() {
        let mass: f64 = alloc.iter().map(|&(_, x)| x).sum();
        if mass > 1.0 + BUDGET_TOL {
            report
                .violations
                .push(format!("item {e}: allocation mass {mass} > 1"));
        }
    }
    report
}

/// Outcome of a full run. `revenue` is the raw allocated value;
/// `revenue_capped` truncates each buyer's contribution at its budget, which
/// is the value actually collectible and the quantity compared against the
/// fractional optimum.
pub struct AuctionOutcome {
    pub state: AuctionState,
    pub steps: Vec<StepRecord>,
    pub revenue: f64,
    pub revenue_capped: f64,
    pub pred_infeasible_at: Option<usize>,
    /// Violations of the running alpha bound or the per-step primal/dual
    /// identity, collected during the run.
    pub check_violations: Vec<String>,
}

/// Run Algorithm 2 over the full stream. Deterministic. The running alpha
/// bound and the per-step dual-increase identity
/// `B_i delta(alpha_i) + beta_e = b_{i,e} C/(C-1)` are checked after every
/// item and collected in the outcome.
pub fn run_ad_auction(
    instance: &AdAuctionInstance,
    predictions: Option<&[Option<usize>]>,
    eta: f64,
) -> Result<AuctionOutcome> {
    if let Some(p) = predictions {
        if p.len() != instance.n() {
            return Err(AuctionError::PredictionLength {
                len: p.len(),
                n: instance.n(),
            });
        }
    }
    let c = if instance.r_max > 0.0 {
        constant_c(instance.r_max, eta)?
    } else {
        // No positive bids: nothing will be allocated; any C > 1 works.
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(AuctionError::BadEta(eta));
        }
        eta.exp()
    };
    let mut state = AuctionState::new(instance.m, eta, c);
    let mut steps = Vec::with_capacity(instance.n());
    let mut check_violations = Vec::new();

    for e in 0..instance.n() {
        let pred = predictions.and_then(|p| p[e]).map(Some).unwrap_or(None);
        let rec = allocate_item(&mut state, instance, e, pred);

        let expected = rec.bid_selected * c / (c - 1.0);
        let actual = rec.dual_alpha_gain + rec.beta;
        let scale = expected.abs().max(1.0);
        if rec.selected != 0 && (actual - expected).abs() > DUAL_STEP_REL_TOL * scale {
            check_violations.push(format!(
                "item {e}: dual increase {actual} != {expected}"
            ));
        }
        if rec.selected != 0 && rec.primal_gain < rec.bid_selected * (1.0 - 1e-12) {
            check_violations.push(format!(
                "item {e}: primal gain {} < selected bid {}",
                rec.primal_gain, rec.bid_selected
            ));
        }
        let lem = verify_lemma4(&state, instance);
        check_violations.extend(lem.violations);
        steps.push(rec);
    }

    let revenue_capped: f64 = (1..=instance.m)
        .map(|i| state.spent[i].min(instance.budget(i)))
        .sum();
    Ok(AuctionOutcome {
        revenue: state.revenue,
        revenue_capped,
        pred_infeasible_at: state.pred_infeasible_at,
        steps,
        state,
        check_violations,
    })
}

/// Value of a predicted assignment, with per-buyer spending truncated at the
/// budget; 0-valued when the assignment is empty.
pub fn prediction_value(instance: &AdAuctionInstance, predictions: &[Option<usize>]) -> f64 {
    let mut spend = vec![0.0; instance.m + 1];
    for (e, pred) in predictions.iter().enumerate() {
        if let Some(p) = *pred {
            if p != 0 {
                spend[p] += instance.bid(e, p);
            }
        }
    }
    (1..=instance.m)
        .map(|i| spend[i].min(instance.budget(i)))
        .sum()
}

/// Whether a predicted assignment respects every budget exactly.
pub fn prediction_feasible(instance: &AdAuctionInstance, predictions: &[Option<usize>]) -> bool {
    let mut spend = vec![0.0; instance.m + 1];
    for (e, pred) in predictions.iter().enumerate() {
        if let Some(p) = *pred {
            if p != 0 {
                spend[p] += instance.bid(e, p);
            }
        }
    }
    (1..=instance.m).all(|i| spend[i] <= instance.budget(i) + PRED_SLACK)
}
