//! Epoch bookkeeping, the purchase-count estimator and its confidence bound.
//!
//! A tier-1 epoch ends at every tier-1 no-purchase; a tier-2 epoch ends at a
//! no-purchase on both tiers. Labels come from one counter of completed
//! epochs shared by both tiers: an epoch opened when `l` epochs have been
//! completed is labelled `l`. When both tiers close on the same customer, both
//! closures are counted before either tier reopens.
//!
//! Epochs still open when the horizon ends are never finalized, so they do
//! not contribute to any estimate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{ProductId, TieredOffer};
use crate::choice::ChoiceOutcome;
use crate::error::{invalid_param, Error, Result};

/// Multiplier of the log term in the confidence bound.
pub const DEFAULT_UCB_SCALE: f64 = 48.0;

/// Index given to a product that has not completed any epoch yet.
pub const COLD_START_UCB: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OpenEpoch {
    label: u64,
    steps: Vec<u64>,
    offered: Option<Vec<ProductId>>,
    counts: BTreeMap<ProductId, u64>,
}

/// A finalized epoch of one tier (zero-based `tier`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub tier: usize,
    pub label: u64,
    pub steps: Vec<u64>,
    pub offered: Vec<ProductId>,
    pub counts: BTreeMap<ProductId, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub label: u64,
    pub tier: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRecord {
    pub launch_label: u64,
    pub epochs_by_tier: [u64; 2],
    pub purchases: u64,
    /// Per-epoch counts; kept only by ledgers built with history.
    pub observations: Vec<Observation>,
}

impl ProductRecord {
    pub fn epochs(&self) -> u64 {
        self.epochs_by_tier[0] + self.epochs_by_tier[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochClosure {
    pub tier: usize,
    pub label: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLedger {
    completed: u64,
    open: [Option<OpenEpoch>; 2],
    labels: [Vec<u64>; 2],
    records: Vec<EpochRecord>,
    products: BTreeMap<ProductId, ProductRecord>,
    last_t: Option<u64>,
    keep_history: bool,
}

impl Default for EpochLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl EpochLedger {
    /// Ledger that retains every epoch record and per-epoch observation.
    pub fn new() -> Self {
        EpochLedger {
            completed: 0,
            open: [None, None],
            labels: [Vec::new(), Vec::new()],
            records: Vec::new(),
            products: BTreeMap::new(),
            last_t: None,
            keep_history: true,
        }
    }

    /// Ledger that keeps only running totals per product.
    pub fn compact() -> Self {
        EpochLedger {
            keep_history: false,
            ..Self::new()
        }
    }

    /// Current epoch label, i.e. the number of completed epochs.
    pub fn current_label(&self) -> u64 {
        self.completed
    }

    /// Labels of the tier's finalized epochs (zero-based tier).
    pub fn labels(&self, tier: usize) -> &[u64] {
        &self.labels[tier]
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    /// Time steps of a finalized epoch.
    pub fn epoch_steps(&self, tier: usize, label: u64) -> Option<&[u64]> {
        self.records
            .iter()
            .find(|r| r.tier == tier && r.label == label)
            .map(|r| r.steps.as_slice())
    }

    /// Steps recorded so far in the tier's open epoch.
    pub fn open_steps(&self, tier: usize) -> &[u64] {
        self.open[tier].as_ref().map_or(&[], |e| e.steps.as_slice())
    }

    /// Records `id` as launched at the current label; no-op when known.
    pub fn register(&mut self, id: ProductId) {
        let label = self.completed;
        self.products.entry(id).or_insert(ProductRecord {
            launch_label: label,
            epochs_by_tier: [0, 0],
            purchases: 0,
            observations: Vec::new(),
        });
    }

    pub fn product(&self, id: ProductId) -> Option<&ProductRecord> {
        self.products.get(&id)
    }

    pub fn products(&self) -> impl Iterator<Item = (&ProductId, &ProductRecord)> {
        self.products.iter()
    }

    /// Number of finalized epochs that offered `id`, over both tiers.
    pub fn times_offered(&self, id: ProductId) -> u64 {
        self.products.get(&id).map_or(0, ProductRecord::epochs)
    }

    /// Feeds one customer. Returns the epochs that closed, tier 1 first.
    pub fn record_step(&mut self, offer: &TieredOffer, outcome: ChoiceOutcome, t: u64) -> Result<Vec<EpochClosure>> {
        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(Error::NonIncreasingTime { t, previous: prev });
            }
        }
        if offer.num_tiers() > 2 {
            return Err(invalid_param("offer", "the ledger tracks two tiers"));
        }
        for (k, tier) in offer.tiers.iter().enumerate() {
            for id in tier {
                if offer.tiers[k + 1..].iter().any(|later| later.contains(id)) || tier.iter().filter(|x| *x == id).count() > 1 {
                    return Err(Error::OverlappingTiers(*id));
                }
            }
        }
        outcome.check_against(offer)?;

        for id in offer.ids() {
            self.register(id);
        }
        for k in 0..2 {
            let mut shown = offer.tier(k).to_vec();
            shown.sort_unstable();
            let label = self.completed;
            let epoch = self.open[k].get_or_insert_with(|| OpenEpoch {
                label,
                steps: Vec::new(),
                offered: None,
                counts: BTreeMap::new(),
            });
            match &epoch.offered {
                None => epoch.offered = Some(shown),
                Some(prev) if *prev != shown => {
                    return Err(Error::OfferChangedMidEpoch {
                        tier: k + 1,
                        label: epoch.label,
                    })
                }
                Some(_) => {}
            }
        }
        self.last_t = Some(t);

        let tier1 = self.open[0].as_mut().expect("opened above");
        tier1.steps.push(t);
        if let ChoiceOutcome::Purchased { tier: 0, id } = outcome {
            *tier1.counts.entry(id).or_insert(0) += 1;
            return Ok(Vec::new());
        }
        let tier2 = self.open[1].as_mut().expect("opened above");
        tier2.steps.push(t);
        if let ChoiceOutcome::Purchased { id, .. } = outcome {
            *tier2.counts.entry(id).or_insert(0) += 1;
        }

        let mut closed = vec![self.close(0)];
        if outcome == ChoiceOutcome::NoPurchase {
            closed.push(self.close(1));
        }
        Ok(closed)
    }

    fn close(&mut self, tier: usize) -> EpochClosure {
        let epoch = self.open[tier].take().expect("closing an open epoch");
        let offered = epoch.offered.unwrap_or_default();
        for id in &offered {
            let count = epoch.counts.get(id).copied().unwrap_or(0);
            let rec = self.products.get_mut(id).expect("registered on offer");
            rec.epochs_by_tier[tier] += 1;
            rec.purchases += count;
            if self.keep_history {
                rec.observations.push(Observation {
                    label: epoch.label,
                    tier,
                    count,
                });
            }
        }
        if !epoch.steps.is_empty() {
            self.labels[tier].push(epoch.label);
        }
        if self.keep_history {
            self.records.push(EpochRecord {
                tier,
                label: epoch.label,
                steps: epoch.steps,
                offered,
                counts: epoch.counts,
            });
        }
        self.completed += 1;
        EpochClosure {
            tier,
            label: epoch.label,
        }
    }

    /// Average purchases per finalized epoch over all epochs offering `id`.
    pub fn v_bar(&self, id: ProductId) -> Result<f64> {
        let rec = self.products.get(&id).ok_or(Error::NeverOffered(id))?;
        if rec.epochs() == 0 {
            return Err(Error::NeverOffered(id));
        }
        Ok(rec.purchases as f64 / rec.epochs() as f64)
    }

    /// `(sum of counts, epoch count)` over epochs labelled at most `l`.
    /// Requires a ledger with history.
    pub fn counts_until(&self, id: ProductId, l: u64) -> Result<(u64, u64)> {
        if !self.keep_history {
            return Err(invalid_param("ledger", "label-indexed queries need a ledger with history"));
        }
        let rec = self.products.get(&id).ok_or(Error::NeverOffered(id))?;
        Ok(rec
            .observations
            .iter()
            .filter(|o| o.label <= l)
            .fold((0, 0), |(s, n), o| (s + o.count, n + 1)))
    }

    pub fn v_bar_at(&self, id: ProductId, l: u64) -> Result<f64> {
        let (sum, n) = self.counts_until(id, l)?;
        if n == 0 {
            return Err(Error::NeverOffered(id));
        }
        Ok(sum as f64 / n as f64)
    }

    /// Confidence bound at the current label with `k` products in total.
    pub fn v_ucb(&self, id: ProductId, k: usize, scale: f64) -> Result<f64> {
        let rec = self.products.get(&id).ok_or(Error::NeverOffered(id))?;
        let vbar = self.v_bar(id)?;
        let dl = self.completed.saturating_sub(rec.launch_label);
        Ok(ucb_index(vbar, rec.epochs(), k, dl, scale))
    }

    pub fn v_ucb_at(&self, id: ProductId, l: u64, k: usize, scale: f64) -> Result<f64> {
        let rec = self.products.get(&id).ok_or(Error::NeverOffered(id))?;
        let (sum, n) = self.counts_until(id, l)?;
        if n == 0 {
            return Err(Error::NeverOffered(id));
        }
        let dl = l.saturating_sub(rec.launch_label);
        Ok(ucb_index(sum as f64 / n as f64, n, k, dl, scale))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serialization cannot fail")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// `v + sqrt(v c log(k dl + 1) / n) + c log(k dl + 1) / n`.
pub fn ucb_index(v_bar: f64, epochs: u64, k: usize, epochs_since_launch: u64, scale: f64) -> f64 {
    let log_term = (k as f64 * epochs_since_launch as f64 + 1.0).ln();
    let n = epochs as f64;
    v_bar + (v_bar * scale * log_term / n).sqrt() + scale * log_term / n
}

/// Epochs needed so the estimate is within `epsilon` with probability at
/// least `1 - alpha`.
pub fn min_learning_epochs(epsilon: f64, alpha: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid_param("epsilon", format!("must be positive, got {epsilon}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid_param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let gap = (1.0 + 4.0 * epsilon).sqrt() - 1.0;
    Ok((192.0 * (2.0 / alpha + 1.0).ln() / (gap * gap)).ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningCriterion {
    pub epsilon: f64,
    pub alpha: f64,
    pub m: u64,
}

impl LearningCriterion {
    pub fn new(epsilon: f64, alpha: f64) -> Result<Self> {
        Ok(LearningCriterion {
            epsilon,
            alpha,
            m: min_learning_epochs(epsilon, alpha)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace_offer() -> TieredOffer {
        TieredOffer::from_ids(&[&[1], &[2]])
    }

    fn replay(outcomes: &[ChoiceOutcome]) -> EpochLedger {
        let mut ledger = EpochLedger::new();
        let offer = trace_offer();
        for (t, o) in outcomes.iter().enumerate() {
            ledger.record_step(&offer, *o, t as u64 + 1).unwrap();
        }
        ledger
    }

    #[test]
    fn nine_customer_trace() {
        use ChoiceOutcome::NoPurchase as N;
        let t1 = ChoiceOutcome::tier1(1);
        let t2 = ChoiceOutcome::tier2(2);
        let ledger = replay(&[t1, t2, t1, t1, N, t2, t1, t1, N]);
        assert_eq!(ledger.labels(0), &[0, 1, 3, 4]);
        assert_eq!(ledger.labels(1), &[0, 3]);
        assert_eq!(ledger.epoch_steps(0, 0).unwrap(), &[1, 2]);
        assert_eq!(ledger.epoch_steps(0, 1).unwrap(), &[3, 4, 5]);
        assert_eq!(ledger.epoch_steps(0, 3).unwrap(), &[6]);
        assert_eq!(ledger.epoch_steps(0, 4).unwrap(), &[7, 8, 9]);
        assert_eq!(ledger.epoch_steps(1, 0).unwrap(), &[2, 5]);
        assert_eq!(ledger.epoch_steps(1, 3).unwrap(), &[6, 9]);
        assert_eq!(ledger.current_label(), 6);
    }

    #[test]
    fn first_customer_walks_away() {
        let mut ledger = EpochLedger::new();
        let closed = ledger.record_step(&trace_offer(), ChoiceOutcome::NoPurchase, 1).unwrap();
        assert_eq!(closed, vec![EpochClosure { tier: 0, label: 0 }, EpochClosure { tier: 1, label: 0 }]);
        assert_eq!(ledger.v_bar(ProductId(1)).unwrap(), 0.0);
        assert_eq!(ledger.v_bar(ProductId(2)).unwrap(), 0.0);
        assert_eq!(ledger.current_label(), 2);
    }

    #[test]
    fn v_bar_arithmetic() {
        let mut ledger = EpochLedger::new();
        let offer = TieredOffer::from_ids(&[&[1], &[]]);
        ledger.record_step(&offer, ChoiceOutcome::NoPurchase, 1).unwrap();
        ledger.record_step(&offer, ChoiceOutcome::tier1(1), 2).unwrap();
        ledger.record_step(&offer, ChoiceOutcome::tier1(1), 3).unwrap();
        ledger.record_step(&offer, ChoiceOutcome::NoPurchase, 4).unwrap();
        assert_eq!(ledger.v_bar(ProductId(1)).unwrap(), 1.0);
        assert_eq!(ledger.v_bar_at(ProductId(1), 0).unwrap(), 0.0);
        assert_eq!(ledger.times_offered(ProductId(1)), 2);
    }

    #[test]
    fn open_epoch_is_not_counted() {
        let mut ledger = EpochLedger::new();
        let offer = TieredOffer::from_ids(&[&[1], &[]]);
        ledger.record_step(&offer, ChoiceOutcome::tier1(1), 1).unwrap();
        assert_eq!(ledger.v_bar(ProductId(1)).unwrap_err(), Error::NeverOffered(ProductId(1)));
        assert_eq!(ledger.open_steps(0), &[1]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut ledger = EpochLedger::new();
        let offer = trace_offer();
        assert!(matches!(
            ledger.record_step(&offer, ChoiceOutcome::tier1(2), 1),
            Err(Error::InconsistentOutcome(_))
        ));
        ledger.record_step(&offer, ChoiceOutcome::tier1(1), 1).unwrap();
        assert_eq!(
            ledger.record_step(&offer, ChoiceOutcome::tier1(1), 1).unwrap_err(),
            Error::NonIncreasingTime { t: 1, previous: 1 }
        );
        let changed = TieredOffer::from_ids(&[&[1, 3], &[2]]);
        assert_eq!(
            ledger.record_step(&changed, ChoiceOutcome::tier1(1), 2).unwrap_err(),
            Error::OfferChangedMidEpoch { tier: 1, label: 0 }
        );
        let overlap = TieredOffer::from_ids(&[&[1], &[1]]);
        assert_eq!(
            ledger.record_step(&overlap, ChoiceOutcome::NoPurchase, 3).unwrap_err(),
            Error::OverlappingTiers(ProductId(1))
        );
    }

    #[test]
    fn ucb_zero_log_case() {
        assert_eq!(ucb_index(0.3, 10, 50, 0, DEFAULT_UCB_SCALE), 0.3);
    }

    #[test]
    fn ucb_reference_value() {
        // 0.1 + sqrt(0.1 * 48 * ln(101) / 100) + 48 * ln(101) / 100, evaluated
        // with 30-digit arithmetic.
        let expected = 2.785_923_105_786_537_9;
        assert!((ucb_index(0.1, 100, 10, 10, 48.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn ucb_from_ledger() {
        let mut ledger = EpochLedger::new();
        let offer = TieredOffer::from_ids(&[&[1], &[]]);
        ledger.record_step(&offer, ChoiceOutcome::tier1(1), 1).unwrap();
        ledger.record_step(&offer, ChoiceOutcome::NoPurchase, 2).unwrap();
        let expected = ucb_index(1.0, 1, 5, 2, 48.0);
        assert!((ledger.v_ucb(ProductId(1), 5, 48.0).unwrap() - expected).abs() < 1e-15);
        assert!((ledger.v_ucb_at(ProductId(1), 2, 5, 48.0).unwrap() - expected).abs() < 1e-15);
        assert!(ledger.v_ucb(ProductId(9), 5, 48.0).is_err());
    }

    #[test]
    fn min_learning_reference_values() {
        // 192 ln(21) / (sqrt(1.8) - 1)^2 = 5008.19..., and
        // 192 ln(41) / (sqrt(1.4) - 1)^2 = 21240.59..., both from 30-digit arithmetic.
        assert_eq!(min_learning_epochs(0.2, 0.1).unwrap(), 5009);
        assert_eq!(min_learning_epochs(0.1, 0.05).unwrap(), 21241);
    }

    #[test]
    fn min_learning_validation() {
        assert!(min_learning_epochs(0.0, 0.1).is_err());
        assert!(min_learning_epochs(-1.0, 0.1).is_err());
        assert!(min_learning_epochs(0.1, 0.0).is_err());
        assert!(min_learning_epochs(0.1, 1.0).is_err());
    }

    #[test]
    fn ledger_json_round_trip() {
        use ChoiceOutcome::NoPurchase as N;
        let ledger = replay(&[ChoiceOutcome::tier1(1), ChoiceOutcome::tier2(2), N]);
        let back = EpochLedger::from_json(&ledger.to_json()).unwrap();
        assert_eq!(back, ledger);
    }

    fn arb_outcome() -> impl Strategy<Value = (u8, u8)> {
        (0u8..3, 0u8..3)
    }

    proptest! {
        #[test]
        fn ucb_dominates_v_bar(v in 0.0..5.0f64, n in 1u64..10_000, k in 1usize..200, dl in 0u64..10_000) {
            prop_assert!(ucb_index(v, n, k, dl, DEFAULT_UCB_SCALE) >= v);
        }

        #[test]
        fn m_monotone(e1 in 0.01..5.0f64, e2 in 0.01..5.0f64, a1 in 0.001..0.999f64, a2 in 0.001..0.999f64) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(min_learning_epochs(lo, 0.1).unwrap() >= min_learning_epochs(hi, 0.1).unwrap());
            let (alo, ahi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            prop_assert!(min_learning_epochs(0.2, alo).unwrap() >= min_learning_epochs(0.2, ahi).unwrap());
        }

        /// Scripted runs with offers that change only at epoch boundaries;
        /// per-product epoch counts must match a recount from the raw log.
        #[test]
        fn recount_matches(script in prop::collection::vec((arb_outcome(), 0u8..4, 0u8..4), 1..300)) {
            let mut ledger = EpochLedger::new();
            let mut s1: Vec<ProductId> = vec![ProductId(0)];
            let mut s2: Vec<ProductId> = vec![ProductId(5)];
            let mut need1 = false;
            let mut need2 = false;
            let mut log: Vec<(TieredOffer, ChoiceOutcome)> = Vec::new();
            for (t, ((kind, pick), a, b)) in script.into_iter().enumerate() {
                if need2 {
                    s2 = (5..5 + b as u32 + 1).map(ProductId).collect();
                }
                if need1 {
                    s1 = (0..a as u32 + 1).map(ProductId).collect();
                }
                let offer = TieredOffer::two_tier(s1.clone(), s2.clone());
                let outcome = match kind {
                    0 => ChoiceOutcome::Purchased { tier: 0, id: s1[pick as usize % s1.len()] },
                    1 => ChoiceOutcome::Purchased { tier: 1, id: s2[pick as usize % s2.len()] },
                    _ => ChoiceOutcome::NoPurchase,
                };
                let closed = ledger.record_step(&offer, outcome, t as u64 + 1).unwrap();
                need1 = !closed.is_empty();
                need2 = closed.len() == 2;
                log.push((offer, outcome));
            }

            // Recount: walk the log, splitting into epochs per tier.
            let mut epochs: BTreeMap<ProductId, u64> = BTreeMap::new();
            let mut purchases: BTreeMap<ProductId, u64> = BTreeMap::new();
            let mut open1: BTreeMap<ProductId, u64> = BTreeMap::new();
            let mut open2: BTreeMap<ProductId, u64> = BTreeMap::new();
            for (offer, outcome) in &log {
                for &id in offer.tier(0) { open1.entry(id).or_insert(0); }
                for &id in offer.tier(1) { open2.entry(id).or_insert(0); }
                match outcome {
                    ChoiceOutcome::Purchased { tier: 0, id } => *open1.get_mut(id).unwrap() += 1,
                    ChoiceOutcome::Purchased { id, .. } => {
                        *open2.get_mut(id).unwrap() += 1;
                        for (id, c) in std::mem::take(&mut open1) {
                            *epochs.entry(id).or_insert(0) += 1;
                            *purchases.entry(id).or_insert(0) += c;
                        }
                    }
                    ChoiceOutcome::NoPurchase => {
                        for (id, c) in std::mem::take(&mut open1).into_iter().chain(std::mem::take(&mut open2)) {
                            *epochs.entry(id).or_insert(0) += 1;
                            *purchases.entry(id).or_insert(0) += c;
                        }
                    }
                }
            }
            for (id, rec) in ledger.products() {
                prop_assert_eq!(rec.epochs(), epochs.get(id).copied().unwrap_or(0));
                prop_assert_eq!(rec.purchases, purchases.get(id).copied().unwrap_or(0));
                let (_, n) = ledger.counts_until(*id, u64::MAX).unwrap();
                prop_assert_eq!(n, rec.epochs());
            }
            let labels1 = ledger.labels(0);
            prop_assert!(labels1.windows(2).all(|w| w[0] < w[1]));
            let labels2 = ledger.labels(1);
            prop_assert!(labels2.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
