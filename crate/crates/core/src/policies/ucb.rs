//! UCB exploration-exploitation with a minimum learning constraint.
//!
//! At the start of every tier-2 epoch the policy solves the offline problem
//! under the confidence-bound valuations and appends every under-learned
//! product left out of that solution to the second tier. After a tier-1
//! no-purchase that does not end the tier-2 epoch, only the first tier is
//! re-solved; the second tier stays frozen.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MarketView, Policy};
use crate::catalog::{ProductId, TieredOffer};
use crate::choice::{ChoiceOutcome, TierSums};
use crate::error::Result;
use crate::estimation::{EpochLedger, COLD_START_UCB};
use crate::offline::{best_tier1_given, solve_candidates, Candidate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbConfig {
    /// Epochs every new product must be offered in (M).
    pub min_epochs: u64,
    pub ucb_scale: f64,
}

/// Where under-learned products outside the solved offer are shown.
#[derive(Debug, Clone)]
pub enum NewProductTier {
    Second,
    /// Low-profit ones go to tier 1 or tier 2 on a fair coin.
    Random(ChaCha8Rng),
    /// Low-profit ones always go to tier 1.
    First,
}

impl NewProductTier {
    pub fn random(seed: u64) -> Self {
        NewProductTier::Random(ChaCha8Rng::seed_from_u64(seed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    SolveBoth,
    SolveFirst,
    Hold,
}

pub struct UcbPolicy {
    cfg: UcbConfig,
    placement: NewProductTier,
    ledger: EpochLedger,
    phase: Phase,
    tier2: Vec<ProductId>,
    /// Under-learned products added to each tier this tier-2 epoch.
    forced: [Vec<ProductId>; 2],
    tier2_value: f64,
    current: TieredOffer,
}

impl UcbPolicy {
    pub fn new(cfg: UcbConfig, placement: NewProductTier) -> Self {
        UcbPolicy {
            cfg,
            placement,
            ledger: EpochLedger::compact(),
            phase: Phase::SolveBoth,
            tier2: Vec::new(),
            forced: [Vec::new(), Vec::new()],
            tier2_value: 0.0,
            current: TieredOffer::empty(),
        }
    }

    pub fn ledger(&self) -> &EpochLedger {
        &self.ledger
    }

    /// Under-learned products added outside the solved offer, per tier.
    pub fn forced(&self) -> &[Vec<ProductId>; 2] {
        &self.forced
    }

    fn index(&self, id: ProductId, view: &MarketView<'_>) -> f64 {
        if view.known.contains(&id) {
            return view.catalog.get(id).map_or(0.0, |p| p.valuation);
        }
        if self.ledger.times_offered(id) == 0 {
            return COLD_START_UCB;
        }
        // Valuations never exceed 1, so capping keeps the bound optimistic.
        self.ledger
            .v_ucb(id, view.total_products, self.cfg.ucb_scale)
            .unwrap_or(COLD_START_UCB)
            .min(1.0)
    }

    fn candidates(&self, view: &MarketView<'_>, ids: &[ProductId]) -> Vec<Candidate> {
        ids.iter()
            .map(|&id| Candidate {
                id,
                profit: view.catalog.get(id).map_or(0.0, |p| p.profit),
                valuation: self.index(id, view),
            })
            .collect()
    }

    fn solve_both(&mut self, view: &MarketView<'_>) -> TieredOffer {
        let x1 = self.candidates(view, view.catalog.candidates_tier1());
        let x2 = self.candidates(view, view.catalog.candidates_tier2());
        let solved = solve_candidates(&x1, &x2);
        let s1 = solved.offer.tier(0).to_vec();
        let s2 = solved.offer.tier(1).to_vec();
        let mut sums = TierSums::default();
        for c in x2.iter().filter(|c| s2.contains(&c.id)) {
            sums.add(c.profit, c.valuation);
        }
        self.tier2_value = sums.revenue();

        let under_learned: Vec<ProductId> = view
            .catalog
            .products()
            .iter()
            .map(|p| p.id)
            .filter(|id| !view.known.contains(id) && self.ledger.times_offered(*id) < self.cfg.min_epochs)
            .filter(|id| !s1.contains(id) && !s2.contains(id))
            .collect();
        self.forced = [Vec::new(), Vec::new()];
        for id in under_learned {
            let eligible = [view.catalog.is_candidate(0, id), view.catalog.is_candidate(1, id)];
            let low = view.catalog.get(id).map_or(0.0, |p| p.profit) < self.tier2_value;
            let preferred = match &mut self.placement {
                NewProductTier::Second => 1,
                NewProductTier::Random(rng) if low => {
                    if rng.random::<bool>() {
                        0
                    } else {
                        1
                    }
                }
                NewProductTier::First if low => 0,
                _ => 1,
            };
            // A product outside the preferred tier's candidate set takes the other tier.
            let tier = if eligible[preferred] { preferred } else { 1 - preferred };
            if eligible[tier] {
                self.forced[tier].push(id);
            }
        }
        self.tier2 = s2;
        self.assemble(s1)
    }

    fn solve_first(&mut self, view: &MarketView<'_>) -> TieredOffer {
        let x1 = self.candidates(view, view.catalog.candidates_tier1());
        let exclude: BTreeSet<ProductId> = self
            .tier2
            .iter()
            .chain(&self.forced[1])
            .chain(&self.forced[0])
            .copied()
            .collect();
        let (s1, _) = best_tier1_given(&x1, &exclude, self.tier2_value);
        self.assemble(s1)
    }

    fn assemble(&self, mut s1: Vec<ProductId>) -> TieredOffer {
        s1.extend(self.forced[0].iter().copied());
        let mut s2 = self.tier2.clone();
        s2.extend(self.forced[1].iter().copied());
        TieredOffer::two_tier(s1, s2)
    }
}

impl Policy for UcbPolicy {
    fn name(&self) -> String {
        match self.placement {
            NewProductTier::Second => "algorithm1".into(),
            NewProductTier::Random(_) => "random_tier".into(),
            NewProductTier::First => "first_tier".into(),
        }
    }

    fn next_offer(&mut self, view: &MarketView<'_>, _t: u64) -> Result<TieredOffer> {
        for p in view.catalog.products() {
            self.ledger.register(p.id);
        }
        self.current = match self.phase {
            Phase::SolveBoth => self.solve_both(view),
            Phase::SolveFirst => self.solve_first(view),
            Phase::Hold => return Ok(self.current.clone()),
        };
        self.phase = Phase::Hold;
        Ok(self.current.clone())
    }

    fn observe(&mut self, offer: &TieredOffer, outcome: ChoiceOutcome, t: u64) -> Result<()> {
        let closed = self.ledger.record_step(offer, outcome, t)?;
        self.phase = match closed.len() {
            0 => Phase::Hold,
            1 => Phase::SolveFirst,
            _ => Phase::SolveBoth,
        };
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Catalog, Product};
    use crate::estimation::ucb_index;
    use crate::offline::solve_two_tier;

    fn view_parts(c: &Catalog, known_all: bool) -> (Catalog, BTreeSet<ProductId>) {
        let known: BTreeSet<ProductId> = if known_all {
            c.products().iter().map(|p| p.id).collect()
        } else {
            BTreeSet::new()
        };
        let shown = c.with_valuations(|p| if known.contains(&p.id) { p.valuation } else { 0.0 });
        (shown, known)
    }

    #[test]
    fn known_valuations_reduce_to_offline_optimum() {
        let c = Catalog::new(
            vec![
                Product::new(1, 0.9, 0.3),
                Product::new(2, 0.5, 0.4),
                Product::new(3, 0.4, 0.2),
                Product::new(4, 0.1, 0.5),
            ],
            vec![ProductId(1), ProductId(2)],
            vec![ProductId(3), ProductId(4)],
        )
        .unwrap();
        let (shown, known) = view_parts(&c, true);
        let view = MarketView { catalog: &shown, known: &known, total_products: 4 };
        let best = solve_two_tier(&c).unwrap().offer;
        let mut p = UcbPolicy::new(UcbConfig { min_epochs: 0, ucb_scale: 48.0 }, NewProductTier::Second);
        let outcomes = [
            ChoiceOutcome::NoPurchase,
            ChoiceOutcome::tier1(1),
            ChoiceOutcome::tier2(3),
            ChoiceOutcome::NoPurchase,
        ];
        for (t, o) in outcomes.into_iter().enumerate() {
            let offer = p.next_offer(&view, t as u64 + 1).unwrap();
            assert_eq!(offer.normalized(), best.normalized());
            p.observe(&offer, o, t as u64 + 1).unwrap();
        }
    }

    #[test]
    fn low_profit_new_product_goes_to_tier2() {
        // Known incumbents plus one new product whose profit is below the
        // tier-2 revenue: it is appended to tier 2 and never shown in tier 1.
        let c = Catalog::new(
            vec![
                Product::new(1, 0.9, 0.2),
                Product::new(2, 0.6, 0.3),
                Product::new(3, 0.05, 0.3),
            ],
            vec![ProductId(1)],
            vec![ProductId(2), ProductId(3)],
        )
        .unwrap();
        let known: BTreeSet<ProductId> = [ProductId(1), ProductId(2)].into_iter().collect();
        let shown = c.with_valuations(|p| if known.contains(&p.id) { p.valuation } else { 0.0 });
        let view = MarketView { catalog: &shown, known: &known, total_products: 3 };
        let mut p = UcbPolicy::new(UcbConfig { min_epochs: 1_000_000, ucb_scale: 48.0 }, NewProductTier::Second);
        for t in 1..=2000u64 {
            let offer = p.next_offer(&view, t).unwrap();
            assert!(!offer.tier(0).contains(&ProductId(3)));
            assert!(offer.tier(1).contains(&ProductId(3)));
            p.observe(&offer, ChoiceOutcome::NoPurchase, t).unwrap();
        }
        assert_eq!(p.forced()[1], vec![ProductId(3)]);
        assert!(p.forced()[0].is_empty());
    }

    #[test]
    fn scripted_trace_matches_hand_computation() {
        // X1 = {1}, X2 = {2, 3}, K = 3, no learning constraint, scale 1.
        let c = Catalog::new(
            vec![Product::new(1, 1.0, 0.5), Product::new(2, 0.8, 0.5), Product::new(3, 0.3, 0.5)],
            vec![ProductId(1)],
            vec![ProductId(2), ProductId(3)],
        )
        .unwrap();
        let (shown, known) = view_parts(&c, false);
        let view = MarketView { catalog: &shown, known: &known, total_products: 3 };
        let mut p = UcbPolicy::new(UcbConfig { min_epochs: 0, ucb_scale: 1.0 }, NewProductTier::Second);
        let cold = COLD_START_UCB;

        // t = 1: all indices cold. Tier 2: {2} earns 0.8c/(1+c), more than
        // {2,3} at 1.1c/(1+2c). Tier 1 adds product 1 since 1.0 > 0.4.
        assert!(0.8 * cold / (1.0 + cold) > 1.1 * cold / (1.0 + 2.0 * cold));
        let o1 = p.next_offer(&view, 1).unwrap();
        assert_eq!(o1, TieredOffer::from_ids(&[&[1], &[2]]));
        p.observe(&o1, ChoiceOutcome::NoPurchase, 1).unwrap();

        // Both epochs labelled 0 closed; label is now 2. Products 1 and 2
        // have one empty epoch each: index = ln(3 * 2 + 1). Product 3 is cold.
        let w = ucb_index(0.0, 1, 3, 2, 1.0);
        assert!((w - 7f64.ln()).abs() < 1e-12);
        let r2_single = 0.8 * w / (1.0 + w);
        let r2_pair = (0.8 * w + 0.3 * cold) / (1.0 + w + cold);
        assert!(r2_single > r2_pair);
        assert!((w + r2_single) / (1.0 + w) > r2_single);
        let o2 = p.next_offer(&view, 2).unwrap();
        assert_eq!(o2, TieredOffer::from_ids(&[&[1], &[2]]));

        // A tier-2 purchase closes the tier-1 epoch only (label 2 -> 3).
        // Tier 1 is re-solved against the frozen tier-2 value r2_single:
        // product 1 has two empty epochs, index ln(3 * 3 + 1) / 2.
        p.observe(&o2, ChoiceOutcome::tier2(2), 2).unwrap();
        let w1 = ucb_index(0.0, 2, 3, 3, 1.0);
        assert!((w1 + r2_single) / (1.0 + w1) > r2_single);
        let o3 = p.next_offer(&view, 3).unwrap();
        assert_eq!(o3, TieredOffer::from_ids(&[&[1], &[2]]));

        // A tier-1 purchase closes nothing: the offer is held.
        p.observe(&o3, ChoiceOutcome::tier1(1), 3).unwrap();
        assert_eq!(p.next_offer(&view, 4).unwrap(), o3);
        p.observe(&o3, ChoiceOutcome::NoPurchase, 4).unwrap();
        assert_eq!(p.ledger().current_label(), 5);
        assert_eq!(p.ledger().times_offered(ProductId(1)), 3);
        assert_eq!(p.ledger().times_offered(ProductId(2)), 2);
        assert_eq!(p.ledger().times_offered(ProductId(3)), 0);
        assert!((p.ledger().v_bar(ProductId(1)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.ledger().v_bar(ProductId(2)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn forced_first_tier_placement() {
        let c = Catalog::new(
            vec![Product::new(1, 0.9, 0.2), Product::new(2, 0.6, 0.3), Product::new(3, 0.01, 0.3)],
            vec![ProductId(1), ProductId(3)],
            vec![ProductId(2), ProductId(3)],
        )
        .unwrap();
        let known: BTreeSet<ProductId> = [ProductId(1), ProductId(2)].into_iter().collect();
        let shown = c.with_valuations(|p| if known.contains(&p.id) { p.valuation } else { 0.0 });
        let view = MarketView { catalog: &shown, known: &known, total_products: 3 };
        let mut p = UcbPolicy::new(UcbConfig { min_epochs: 1_000_000, ucb_scale: 48.0 }, NewProductTier::First);
        for t in 1..=2000u64 {
            let offer = p.next_offer(&view, t).unwrap();
            p.observe(&offer, ChoiceOutcome::NoPurchase, t).unwrap();
        }
        let offer = p.next_offer(&view, 2001).unwrap();
        assert!(offer.tier(0).contains(&ProductId(3)));
    }

    #[test]
    fn forced_products_stay_in_their_candidate_sets() {
        // Product 3 is only eligible for tier 1, product 4 only for tier 2.
        let c = Catalog::new(
            vec![
                Product::new(1, 0.9, 0.2),
                Product::new(2, 0.6, 0.3),
                Product::new(3, 0.01, 0.3),
                Product::new(4, 0.02, 0.3),
            ],
            vec![ProductId(1), ProductId(3)],
            vec![ProductId(2), ProductId(4)],
        )
        .unwrap();
        let known: BTreeSet<ProductId> = [ProductId(1), ProductId(2)].into_iter().collect();
        let shown = c.with_valuations(|p| if known.contains(&p.id) { p.valuation } else { 0.0 });
        let view = MarketView { catalog: &shown, known: &known, total_products: 4 };
        for placement in [NewProductTier::Second, NewProductTier::First, NewProductTier::random(7)] {
            let mut p = UcbPolicy::new(UcbConfig { min_epochs: 1_000_000, ucb_scale: 48.0 }, placement);
            for t in 1..=500u64 {
                let offer = p.next_offer(&view, t).unwrap();
                offer.validate_candidates(&c).unwrap();
                assert!(offer.contains(ProductId(3)) && offer.contains(ProductId(4)));
                p.observe(&offer, ChoiceOutcome::NoPurchase, t).unwrap();
            }
        }
    }
}
