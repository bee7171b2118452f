//! Regret over one learning epoch for a new product shown in tier 1 or 2.
//!
//! Adding `m` to tier 1 keeps one tier-1 epoch going for `N1` customers,
//! where `N1` ends at the first tier-1 no-purchase. Adding it to tier 2 runs
//! one tier-2 epoch of `N2` customers, ending at the first full no-purchase.
//! Each customer's outcome decides on its own whether the epoch ends, so
//! `E[sum of per-customer regret] = E[N] * per-customer regret`.

use rand::Rng;

use crate::catalog::{Catalog, ProductId, TieredOffer};
use crate::choice::{expected_profit, ChoiceOutcome, Sampler};
use crate::error::{invalid_param, Result};
use crate::stats::summarize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Learn `m` in the priority tier.
    FirstTier,
    /// Learn `m` in the secondary tier.
    SecondTier,
}

impl Strategy {
    fn tier(self) -> usize {
        match self {
            Strategy::FirstTier => 0,
            Strategy::SecondTier => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegretMode {
    ClosedForm,
    MonteCarlo { epochs: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRegret {
    pub value: f64,
    /// Zero for the closed form.
    pub std_err: f64,
}

fn with_new_product(base: &TieredOffer, m: ProductId, strategy: Strategy) -> Result<TieredOffer> {
    if base.contains(m) {
        return Err(invalid_param("m", format!("product {m} is already in the base offer")));
    }
    let mut offer = base.clone();
    while offer.tiers.len() < 2 {
        offer.tiers.push(Vec::new());
    }
    offer.tiers[strategy.tier()].push(m);
    Ok(offer)
}

/// Epoch regret of showing `base` plus `m` against a benchmark earning
/// `reference` per customer.
pub fn epoch_regret_against(
    strategy: Strategy,
    base: &TieredOffer,
    reference: f64,
    m: ProductId,
    catalog: &Catalog,
    mode: RegretMode,
) -> Result<EpochRegret> {
    let offer = with_new_product(base, m, strategy)?;
    match mode {
        RegretMode::ClosedForm => {
            let weight = |k: usize| -> Result<f64> {
                offer.tier(k).iter().map(|&id| catalog.get(id).map(|p| p.valuation)).sum()
            };
            let mean_len = match strategy {
                Strategy::FirstTier => 1.0 + weight(0)?,
                Strategy::SecondTier => (1.0 + weight(0)?) * (1.0 + weight(1)?),
            };
            let per_customer = reference - expected_profit(&offer, catalog)?;
            Ok(EpochRegret {
                value: mean_len * per_customer,
                std_err: 0.0,
            })
        }
        RegretMode::MonteCarlo { epochs, seed } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let sampler = Sampler::new(&offer, catalog)?;
            let totals: Vec<f64> = (0..epochs)
                .map(|_| one_epoch(&sampler, strategy, reference, &mut rng))
                .collect();
            let s = summarize(&totals);
            Ok(EpochRegret {
                value: s.mean,
                std_err: s.std_err,
            })
        }
    }
}

fn one_epoch<R: Rng>(sampler: &Sampler, strategy: Strategy, reference: f64, rng: &mut R) -> f64 {
    let mut total = 0.0;
    loop {
        let outcome = sampler.sample(rng);
        total += reference - sampler.revenue(outcome);
        let ends = match strategy {
            Strategy::FirstTier => outcome.reached(1),
            Strategy::SecondTier => outcome == ChoiceOutcome::NoPurchase,
        };
        if ends {
            return total;
        }
    }
}

/// Epoch regret measured against `base` itself, the offer in place before
/// `m` arrived.
pub fn epoch_regret_g(
    strategy: Strategy,
    base: &TieredOffer,
    m: ProductId,
    catalog: &Catalog,
    mode: RegretMode,
) -> Result<EpochRegret> {
    let without_m = catalog.filter(|p| p.id != m);
    let reference = expected_profit(base, &without_m)?;
    epoch_regret_against(strategy, base, reference, m, catalog, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Product;
    use crate::choice::expected_profit_single_tier;

    fn instance(r_m: f64, v_m: f64) -> (Catalog, TieredOffer) {
        let c = Catalog::new(
            vec![
                Product::new(1, 0.9, 0.3),
                Product::new(2, 0.5, 0.4),
                Product::new(3, 0.4, 0.2),
                Product::new(9, r_m, v_m),
            ],
            vec![ProductId(1)],
            vec![ProductId(2), ProductId(3), ProductId(9)],
        )
        .unwrap();
        (c, TieredOffer::from_ids(&[&[1], &[2, 3]]))
    }

    #[test]
    fn second_tier_closed_form_identity() {
        let (c, base) = instance(0.1, 0.25);
        let g2 = epoch_regret_g(Strategy::SecondTier, &base, ProductId(9), &c, RegretMode::ClosedForm).unwrap();
        let r2 = expected_profit_single_tier(base.tier(1), &c).unwrap();
        assert!((g2.value - 0.25 * (r2 - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn first_tier_closed_form_identity() {
        let (c, base) = instance(0.1, 0.25);
        let g1 = epoch_regret_g(Strategy::FirstTier, &base, ProductId(9), &c, RegretMode::ClosedForm).unwrap();
        let r = expected_profit(&base, &c.filter(|p| p.id != ProductId(9))).unwrap();
        assert!((g1.value - 0.25 * (r - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn vanishing_cases() {
        let (c, base) = instance(0.1, 0.0);
        for s in [Strategy::FirstTier, Strategy::SecondTier] {
            let g = epoch_regret_g(s, &base, ProductId(9), &c, RegretMode::ClosedForm).unwrap();
            assert!(g.value.abs() < 1e-12);
        }
        let (c0, base0) = instance(0.0, 0.3);
        let r2 = expected_profit_single_tier(base0.tier(1), &c0).unwrap();
        let (c, base) = instance(r2, 0.3);
        let g2 = epoch_regret_g(Strategy::SecondTier, &base, ProductId(9), &c, RegretMode::ClosedForm).unwrap();
        assert!(g2.value.abs() < 1e-12);
    }

    #[test]
    fn rejects_present_product() {
        let (c, _) = instance(0.1, 0.2);
        let base = TieredOffer::from_ids(&[&[1], &[9]]);
        assert!(epoch_regret_g(Strategy::FirstTier, &base, ProductId(9), &c, RegretMode::ClosedForm).is_err());
    }

    #[test]
    fn monte_carlo_agrees() {
        let (c, base) = instance(0.1, 0.25);
        for s in [Strategy::FirstTier, Strategy::SecondTier] {
            let exact = epoch_regret_g(s, &base, ProductId(9), &c, RegretMode::ClosedForm).unwrap();
            let mc = epoch_regret_g(s, &base, ProductId(9), &c, RegretMode::MonteCarlo { epochs: 200_000, seed: 3 })
                .unwrap();
            assert!((mc.value - exact.value).abs() < 3.0 * mc.std_err, "{s:?}: {mc:?} vs {exact:?}");
        }
    }
}
