//! Sequential MNL choice probabilities, expected profit and a sampler.
//!
//! A customer runs an MNL choice over the first tier plus the outside option.
//! Only on a no-purchase does she move on to the next tier. Tier indices are
//! zero-based throughout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ProductId, TieredOffer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChoiceOutcome {
    Purchased { tier: usize, id: ProductId },
    NoPurchase,
}

impl ChoiceOutcome {
    /// Tier-1 purchase shorthand.
    pub fn tier1(id: u32) -> Self {
        ChoiceOutcome::Purchased { tier: 0, id: ProductId(id) }
    }

    pub fn tier2(id: u32) -> Self {
        ChoiceOutcome::Purchased { tier: 1, id: ProductId(id) }
    }

    pub fn purchased(&self) -> Option<ProductId> {
        match self {
            ChoiceOutcome::Purchased { id, .. } => Some(*id),
            ChoiceOutcome::NoPurchase => None,
        }
    }

    /// Whether the customer declined every tier before `tier`, i.e. saw it.
    pub fn reached(&self, tier: usize) -> bool {
        match self {
            ChoiceOutcome::Purchased { tier: k, .. } => *k >= tier,
            ChoiceOutcome::NoPurchase => true,
        }
    }

    /// Checks that a purchased id sits in the claimed tier of `offer`.
    pub fn check_against(&self, offer: &TieredOffer) -> Result<()> {
        if let ChoiceOutcome::Purchased { tier, id } = self {
            if !offer.tier(*tier).contains(id) {
                return Err(Error::InconsistentOutcome(format!(
                    "product {id} purchased from tier {} but not offered there",
                    tier + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDistribution {
    /// `(id, tier, probability)` in offer order.
    pub purchase: Vec<(ProductId, usize, f64)>,
    pub no_purchase: f64,
    /// Conditional no-purchase probability `1 / (1 + V_k)` of each tier.
    pub tier_no_purchase: Vec<f64>,
}

impl ChoiceDistribution {
    /// Purchase probability of `id`; zero when not offered.
    pub fn prob(&self, id: ProductId) -> f64 {
        self.purchase
            .iter()
            .find(|(i, _, _)| *i == id)
            .map_or(0.0, |&(_, _, p)| p)
    }

    pub fn total(&self) -> f64 {
        self.purchase.iter().map(|&(_, _, p)| p).sum::<f64>() + self.no_purchase
    }
}

/// Sum of `r * v` and sum of `v` over one tier.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TierSums {
    pub weighted_profit: f64,
    pub weight: f64,
}

impl TierSums {
    pub fn add(&mut self, profit: f64, valuation: f64) {
        self.weighted_profit += profit * valuation;
        self.weight += valuation;
    }

    /// Single-tier MNL revenue.
    pub fn revenue(&self) -> f64 {
        self.weighted_profit / (1.0 + self.weight)
    }
}

/// Expected profit from per-tier sums, folding from the last tier forward:
/// `R_k = (A_k + R_{k+1}) / (1 + V_k)`.
pub fn profit_from_sums(tiers: &[TierSums]) -> f64 {
    tiers
        .iter()
        .rev()
        .fold(0.0, |tail, s| (s.weighted_profit + tail) / (1.0 + s.weight))
}

fn tier_sums(offer: &TieredOffer, catalog: &Catalog) -> Result<Vec<TierSums>> {
    offer
        .tiers
        .iter()
        .map(|tier| {
            let mut s = TierSums::default();
            for &id in tier {
                let p = catalog.get(id)?;
                s.add(p.profit, p.valuation);
            }
            Ok(s)
        })
        .collect()
}

pub fn purchase_probabilities(offer: &TieredOffer, catalog: &Catalog) -> Result<ChoiceDistribution> {
    offer.validate(catalog)?;
    let mut reach = 1.0;
    let mut purchase = Vec::new();
    let mut tier_no_purchase = Vec::with_capacity(offer.num_tiers());
    for (k, tier) in offer.tiers.iter().enumerate() {
        let weight: f64 = tier
            .iter()
            .map(|&id| catalog.get(id).map(|p| p.valuation))
            .sum::<Result<f64>>()?;
        let denom = 1.0 + weight;
        for &id in tier {
            let v = catalog.get(id)?.valuation;
            purchase.push((id, k, reach * v / denom));
        }
        tier_no_purchase.push(1.0 / denom);
        reach /= denom;
    }
    Ok(ChoiceDistribution {
        purchase,
        no_purchase: reach,
        tier_no_purchase,
    })
}

/// Expected profit of an offer with any number of tiers.
pub fn expected_profit(offer: &TieredOffer, catalog: &Catalog) -> Result<f64> {
    offer.validate(catalog)?;
    Ok(profit_from_sums(&tier_sums(offer, catalog)?))
}

/// Plain MNL revenue of a single set of products.
pub fn expected_profit_single_tier(tier: &[ProductId], catalog: &Catalog) -> Result<f64> {
    let mut s = TierSums::default();
    for &id in tier {
        let p = catalog.get(id)?;
        s.add(p.profit, p.valuation);
    }
    Ok(s.revenue())
}

/// Expected profit of the suffix offers `(S_j, ..., S_W)` for every `j`.
pub fn suffix_profits(offer: &TieredOffer, catalog: &Catalog) -> Result<Vec<f64>> {
    let sums = tier_sums(offer, catalog)?;
    Ok((0..sums.len()).map(|j| profit_from_sums(&sums[j..])).collect())
}

/// Draws one customer's decision.
pub fn sample_choice<R: Rng + ?Sized>(
    offer: &TieredOffer,
    catalog: &Catalog,
    rng: &mut R,
) -> Result<ChoiceOutcome> {
    Ok(Sampler::new(offer, catalog)?.sample(rng))
}

/// Pre-resolved weights of one offer, for repeated draws.
#[derive(Debug, Clone)]
pub struct Sampler {
    tiers: Vec<(Vec<(ProductId, f64, f64)>, f64)>,
}

impl Sampler {
    pub fn new(offer: &TieredOffer, catalog: &Catalog) -> Result<Self> {
        offer.validate(catalog)?;
        let tiers = offer
            .tiers
            .iter()
            .map(|tier| {
                let items: Vec<(ProductId, f64, f64)> = tier
                    .iter()
                    .map(|&id| {
                        let p = catalog.get(id).expect("validated");
                        (id, p.valuation, p.profit)
                    })
                    .collect();
                let total = items.iter().map(|x| x.1).sum();
                (items, total)
            })
            .collect();
        Ok(Sampler { tiers })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChoiceOutcome {
        for (k, (items, total)) in self.tiers.iter().enumerate() {
            let u = rng.random::<f64>() * (1.0 + total);
            if u < *total {
                let mut acc = 0.0;
                let mut last_positive = None;
                for &(id, w, _) in items {
                    if w > 0.0 {
                        last_positive = Some(id);
                        acc += w;
                        if u < acc {
                            return ChoiceOutcome::Purchased { tier: k, id };
                        }
                    }
                }
                // Rounding can leave u just above the running sum.
                if let Some(id) = last_positive {
                    return ChoiceOutcome::Purchased { tier: k, id };
                }
            }
        }
        ChoiceOutcome::NoPurchase
    }

    /// Profit earned from an outcome of this offer.
    pub fn revenue(&self, outcome: ChoiceOutcome) -> f64 {
        match outcome {
            ChoiceOutcome::Purchased { tier, id } => self.tiers[tier]
                .0
                .iter()
                .find(|x| x.0 == id)
                .map_or(0.0, |x| x.2),
            ChoiceOutcome::NoPurchase => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Product;
    use crate::stats::chi_square_gof;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example1() -> Catalog {
        Catalog::fully_overlapping(vec![Product::new(1, 10.0, 0.1), Product::new(2, 1.0, 1.0)]).unwrap()
    }

    #[test]
    fn example1_profits() {
        let c = example1();
        let single = expected_profit_single_tier(&[ProductId(1), ProductId(2)], &c).unwrap();
        assert!((single - 2.0 / 2.1).abs() < 1e-12);
        assert!((single - 0.952).abs() < 5e-4);
        let two = expected_profit(&TieredOffer::from_ids(&[&[1], &[2]]), &c).unwrap();
        assert!((two - (1.0 / 1.1 + 0.5 / 1.1)).abs() < 1e-12);
        assert!((two - 1.36).abs() < 5e-3);
    }

    #[test]
    fn example1_probabilities() {
        let c = example1();
        let d = purchase_probabilities(&TieredOffer::from_ids(&[&[1], &[2]]), &c).unwrap();
        assert!((d.prob(ProductId(1)) - 0.1 / 1.1).abs() < 1e-15);
        assert!((d.prob(ProductId(2)) - 0.5 / 1.1).abs() < 1e-15);
        assert!((d.no_purchase - 0.5 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn empty_offer() {
        let c = example1();
        let d = purchase_probabilities(&TieredOffer::empty(), &c).unwrap();
        assert_eq!(d.no_purchase, 1.0);
        assert!(d.purchase.is_empty());
        assert_eq!(expected_profit(&TieredOffer::empty(), &c).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(
                sample_choice(&TieredOffer::empty(), &c, &mut rng).unwrap(),
                ChoiceOutcome::NoPurchase
            );
        }
    }

    #[test]
    fn zero_weight_never_sampled() {
        let c = Catalog::fully_overlapping(vec![Product::new(1, 1.0, 0.0)]).unwrap();
        let offer = TieredOffer::from_ids(&[&[1], &[]]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            assert_eq!(sample_choice(&offer, &c, &mut rng).unwrap(), ChoiceOutcome::NoPurchase);
        }
    }

    #[test]
    fn unknown_id_is_reported() {
        let c = example1();
        let err = expected_profit(&TieredOffer::from_ids(&[&[7], &[]]), &c).unwrap_err();
        assert_eq!(err, Error::UnknownProduct(ProductId(7)));
    }

    #[test]
    fn outcome_consistency() {
        let offer = TieredOffer::from_ids(&[&[1], &[2]]);
        assert!(ChoiceOutcome::tier1(1).check_against(&offer).is_ok());
        assert!(ChoiceOutcome::tier1(2).check_against(&offer).is_err());
        assert!(ChoiceOutcome::NoPurchase.check_against(&offer).is_ok());
    }

    #[test]
    fn sampler_matches_example1() {
        let c = example1();
        let offer = TieredOffer::from_ids(&[&[1], &[2]]);
        let d = purchase_probabilities(&offer, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            match sample_choice(&offer, &c, &mut rng).unwrap() {
                ChoiceOutcome::Purchased { id, .. } => counts[id.0 as usize - 1] += 1,
                ChoiceOutcome::NoPurchase => counts[2] += 1,
            }
        }
        let probs = [d.prob(ProductId(1)), d.prob(ProductId(2)), d.no_purchase];
        for (count, p) in counts.iter().zip(probs) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*count as f64 / n as f64 - p).abs() < 3.0 * se);
        }
    }

    #[test]
    fn sampler_chi_square_on_random_offers() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let products: Vec<Product> = (0..6)
                .map(|i| Product::new(i, rng.random(), rng.random::<f64>() * 0.9))
                .collect();
            let c = Catalog::fully_overlapping(products).unwrap();
            let mut s1 = Vec::new();
            let mut s2 = Vec::new();
            for i in 0..6 {
                if rng.random::<bool>() {
                    s1.push(ProductId(i));
                } else {
                    s2.push(ProductId(i));
                }
            }
            let offer = TieredOffer::two_tier(s1, s2);
            let d = purchase_probabilities(&offer, &c).unwrap();
            let mut counts = vec![0u64; 7];
            for _ in 0..1_000_000 {
                match sample_choice(&offer, &c, &mut rng).unwrap() {
                    ChoiceOutcome::Purchased { id, .. } => counts[id.0 as usize] += 1,
                    ChoiceOutcome::NoPurchase => counts[6] += 1,
                }
            }
            let mut probs: Vec<f64> = (0..6).map(|i| d.prob(ProductId(i))).collect();
            probs.push(d.no_purchase);
            let test = chi_square_gof(&counts, &probs);
            assert!(test.p_value > 0.001, "p = {}", test.p_value);
        }
    }

    fn arb_instance() -> impl Strategy<Value = (Catalog, TieredOffer)> {
        prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0u8..3), 0..10).prop_map(|rows| {
            let mut tiers = vec![Vec::new(), Vec::new()];
            let products = rows
                .iter()
                .enumerate()
                .map(|(i, &(r, v, t))| {
                    if t < 2 {
                        tiers[t as usize].push(ProductId(i as u32));
                    }
                    Product::new(i as u32, r, v)
                })
                .collect();
            (Catalog::fully_overlapping(products).unwrap(), TieredOffer::new(tiers))
        })
    }

    proptest! {
        #[test]
        fn probabilities_normalize((c, offer) in arb_instance()) {
            let d = purchase_probabilities(&offer, &c).unwrap();
            prop_assert!((d.total() - 1.0).abs() < 1e-12);
            for &(_, _, p) in &d.purchase {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }

        #[test]
        fn tier2_factorization((c, offer) in arb_instance()) {
            let d = purchase_probabilities(&offer, &c).unwrap();
            let v1: f64 = offer.tier(0).iter().map(|&i| c.get(i).unwrap().valuation).sum();
            let v2: f64 = offer.tier(1).iter().map(|&i| c.get(i).unwrap().valuation).sum();
            for &id in offer.tier(1) {
                let direct = c.get(id).unwrap().valuation / ((1.0 + v1) * (1.0 + v2));
                let factored = (1.0 / (1.0 + v1)) * (c.get(id).unwrap().valuation / (1.0 + v2));
                prop_assert!((d.prob(id) - direct).abs() < 1e-12);
                prop_assert!((direct - factored).abs() < 1e-12);
            }
        }

        #[test]
        fn profit_equals_probability_weighted_sum((c, offer) in arb_instance()) {
            let d = purchase_probabilities(&offer, &c).unwrap();
            let direct: f64 = d.purchase.iter().map(|&(id, _, p)| c.get(id).unwrap().profit * p).sum();
            prop_assert!((expected_profit(&offer, &c).unwrap() - direct).abs() < 1e-12);
        }

        #[test]
        fn single_tier_identity((c, offer) in arb_instance()) {
            let a = expected_profit_single_tier(offer.tier(0), &c).unwrap();
            let b = expected_profit(&TieredOffer::two_tier(offer.tier(0).to_vec(), vec![]), &c).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn adding_profitable_product_to_tier1_helps(
            (c, offer) in arb_instance(),
            r in 0.0..2.0f64,
            v in 0.01..1.0f64,
        ) {
            let base = expected_profit(&offer, &c).unwrap();
            prop_assume!(r > base + 1e-9);
            let id = ProductId(1000);
            let c2 = c.with_product(Product::new(1000, r, v), &[0]).unwrap();
            let mut grown = offer.clone();
            grown.tiers[0].push(id);
            prop_assert!(expected_profit(&grown, &c2).unwrap() > base);
        }
    }
}
