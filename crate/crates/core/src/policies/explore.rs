//! Explore-then-exploit benchmark over profit-ordered prefix pairs.
//!
//! Candidates are the prefix pairs of the profit-sorted candidate lists. At
//! each tier-2 epoch start the incumbent is the candidate with the highest
//! estimated profit. A candidate is still explored while its lowest product
//! profit beats the incumbent's estimated profit and it has been shown to
//! fewer than `gamma * ln t` customers. Unseen candidates get one showing
//! regardless of the quota, from `t = 2` on. Estimates start at zero.

use super::{MarketView, Policy};
use crate::catalog::TieredOffer;
use crate::choice::{profit_from_sums, ChoiceOutcome, TierSums};
use crate::error::Result;
use crate::estimation::EpochLedger;
use crate::offline::{candidates_of, prefix_pair_offers};

pub const DEFAULT_GAMMA: f64 = 30.0;

pub struct ExploreThenExploit {
    gamma: f64,
    ledger: EpochLedger,
    offers: Vec<TieredOffer>,
    shown: Vec<u64>,
    current: Option<usize>,
    choose: bool,
}

impl ExploreThenExploit {
    pub fn new(gamma: f64) -> Self {
        ExploreThenExploit {
            gamma,
            ledger: EpochLedger::compact(),
            offers: Vec::new(),
            shown: Vec::new(),
            current: None,
            choose: true,
        }
    }

    /// Number of customers each candidate has been shown to.
    pub fn display_counts(&self) -> &[u64] {
        &self.shown
    }

    pub fn candidates(&self) -> &[TieredOffer] {
        &self.offers
    }

    fn estimated_profit(&self, offer: &TieredOffer, view: &MarketView<'_>) -> f64 {
        let sums: Vec<TierSums> = offer
            .tiers
            .iter()
            .map(|tier| {
                let mut s = TierSums::default();
                for &id in tier {
                    let r = view.catalog.get(id).map_or(0.0, |p| p.profit);
                    let v = if view.known.contains(&id) {
                        view.catalog.get(id).map_or(0.0, |p| p.valuation)
                    } else {
                        self.ledger.v_bar(id).unwrap_or(0.0)
                    };
                    s.add(r, v);
                }
                s
            })
            .collect();
        profit_from_sums(&sums)
    }

    fn choose(&self, view: &MarketView<'_>, t: u64) -> usize {
        let est: Vec<f64> = self.offers.iter().map(|o| self.estimated_profit(o, view)).collect();
        let mut incumbent = 0;
        for (k, &e) in est.iter().enumerate() {
            if e > est[incumbent] {
                incumbent = k;
            }
        }
        let quota = self.gamma * (t as f64).ln();
        let first_pass = self.gamma > 0.0 && t > 1;
        let mut pick: Option<usize> = None;
        for (k, offer) in self.offers.iter().enumerate() {
            if offer.is_empty() {
                continue;
            }
            let lowest = offer
                .ids()
                .map(|id| view.catalog.get(id).map_or(0.0, |p| p.profit))
                .fold(f64::INFINITY, f64::min);
            let n = self.shown[k];
            let eligible = lowest > est[incumbent] && ((n as f64) < quota || (first_pass && n == 0));
            if eligible && pick.is_none_or(|p| n < self.shown[p]) {
                pick = Some(k);
            }
        }
        pick.unwrap_or(incumbent)
    }
}

impl Policy for ExploreThenExploit {
    fn name(&self) -> String {
        "explore_then_exploit".into()
    }

    fn next_offer(&mut self, view: &MarketView<'_>, t: u64) -> Result<TieredOffer> {
        if self.offers.is_empty() {
            let (x1, x2) = candidates_of(view.catalog);
            self.offers = prefix_pair_offers(&x1, &x2);
            self.shown = vec![0; self.offers.len()];
        }
        if self.choose || self.current.is_none() {
            self.current = Some(self.choose(view, t));
            self.choose = false;
        }
        Ok(self.offers[self.current.expect("set above")].clone())
    }

    fn observe(&mut self, offer: &TieredOffer, outcome: ChoiceOutcome, t: u64) -> Result<()> {
        if let Some(k) = self.current {
            self.shown[k] += 1;
        }
        let closed = self.ledger.record_step(offer, outcome, t)?;
        self.choose = closed.len() == 2;
        Ok(())
    }
}
