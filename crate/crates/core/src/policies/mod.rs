//! Online recommendation policies.
//!
//! A policy sees a [`MarketView`] of launched products. Valuations in the view
//! are real only for products flagged as known; every other valuation is
//! zeroed so a learning policy cannot peek at the truth.

mod explore;
mod regret;
mod ucb;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ProductId, TieredOffer};
use crate::choice::ChoiceOutcome;
use crate::error::Result;
use crate::offline::solve_two_tier;

pub use explore::{ExploreThenExploit, DEFAULT_GAMMA};
pub use regret::{epoch_regret_against, epoch_regret_g, EpochRegret, RegretMode, Strategy};
pub use ucb::{NewProductTier, UcbConfig, UcbPolicy};

pub struct MarketView<'a> {
    /// Launched products; unknown valuations are zero.
    pub catalog: &'a Catalog,
    /// Products whose valuation in `catalog` is the true one.
    pub known: &'a BTreeSet<ProductId>,
    /// Size of the whole product universe over the horizon.
    pub total_products: usize,
}

pub trait Policy: Send {
    fn name(&self) -> String;

    fn next_offer(&mut self, view: &MarketView<'_>, t: u64) -> Result<TieredOffer>;

    fn observe(&mut self, offer: &TieredOffer, outcome: ChoiceOutcome, t: u64) -> Result<()>;
}

/// Serializable policy choice with its hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// UCB learning; under-learned products not selected go to tier 2.
    Algorithm1 {
        min_epochs: u64,
        #[serde(default = "default_scale")]
        ucb_scale: f64,
    },
    /// As `Algorithm1`, but low-profit under-learned products go to a
    /// uniformly random tier.
    RandomTier {
        min_epochs: u64,
        #[serde(default = "default_scale")]
        ucb_scale: f64,
    },
    ExploreThenExploit {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Oracle {},
    /// Always offers nothing.
    Empty {},
}

fn default_scale() -> f64 {
    crate::estimation::DEFAULT_UCB_SCALE
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Algorithm1 { .. } => "algorithm1".into(),
            PolicySpec::RandomTier { .. } => "random_tier".into(),
            PolicySpec::ExploreThenExploit { .. } => "explore_then_exploit".into(),
            PolicySpec::Oracle {} => "oracle".into(),
            PolicySpec::Empty {} => "empty".into(),
        }
    }

    /// Same spec with the learning constraint replaced, where it applies.
    pub fn with_min_epochs(&self, m: u64) -> PolicySpec {
        match self.clone() {
            PolicySpec::Algorithm1 { ucb_scale, .. } => PolicySpec::Algorithm1 { min_epochs: m, ucb_scale },
            PolicySpec::RandomTier { ucb_scale, .. } => PolicySpec::RandomTier { min_epochs: m, ucb_scale },
            other => other,
        }
    }

    /// Builds the policy. `truth` is only handed to the oracle.
    pub fn build(&self, truth: &Catalog, seed: u64) -> Box<dyn Policy> {
        match *self {
            PolicySpec::Algorithm1 { min_epochs, ucb_scale } => Box::new(UcbPolicy::new(
                UcbConfig { min_epochs, ucb_scale },
                NewProductTier::Second,
            )),
            PolicySpec::RandomTier { min_epochs, ucb_scale } => Box::new(UcbPolicy::new(
                UcbConfig { min_epochs, ucb_scale },
                NewProductTier::random(seed),
            )),
            PolicySpec::ExploreThenExploit { gamma } => Box::new(ExploreThenExploit::new(gamma)),
            PolicySpec::Oracle {} => Box::new(OraclePolicy::new(truth.clone())),
            PolicySpec::Empty {} => Box::new(EmptyPolicy),
        }
    }
}

/// Offers the true optimum over launched products.
pub struct OraclePolicy {
    truth: Catalog,
    cached: Option<(usize, TieredOffer)>,
}

impl OraclePolicy {
    pub fn new(truth: Catalog) -> Self {
        OraclePolicy { truth, cached: None }
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn next_offer(&mut self, view: &MarketView<'_>, _t: u64) -> Result<TieredOffer> {
        let n = view.catalog.len();
        if let Some((k, offer)) = &self.cached {
            if *k == n {
                return Ok(offer.clone());
            }
        }
        let launched = self.truth.filter(|p| view.catalog.contains(p.id));
        let offer = solve_two_tier(&launched)?.offer;
        self.cached = Some((n, offer.clone()));
        Ok(offer)
    }

    fn observe(&mut self, _offer: &TieredOffer, _outcome: ChoiceOutcome, _t: u64) -> Result<()> {
        Ok(())
    }
}

pub struct EmptyPolicy;

impl Policy for EmptyPolicy {
    fn name(&self) -> String {
        "empty".into()
    }

    fn next_offer(&mut self, _view: &MarketView<'_>, _t: u64) -> Result<TieredOffer> {
        Ok(TieredOffer::empty())
    }

    fn observe(&mut self, _offer: &TieredOffer, _outcome: ChoiceOutcome, _t: u64) -> Result<()> {
        Ok(())
    }
}
