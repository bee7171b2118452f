//! Experiment configuration and catalog generation.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Product, ProductId};
use crate::error::{Error, Result};
use crate::policies::PolicySpec;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub horizon: u64,
    pub replications: usize,
    pub seed: u64,
    pub catalog: CatalogSpec,
    /// Valuation-support variants; empty means one run with the catalog as is.
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub benchmark: Benchmark,
    /// Where each value came from.
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CatalogSpec {
    Explicit {
        catalog: Catalog,
        /// Products whose valuation the policies are told.
        #[serde(default)]
        known: Vec<ProductId>,
    },
    Generated {
        groups: Vec<ProductGroup>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductGroup {
    pub name: String,
    pub count: usize,
    /// Uniform profit support `[lo, hi]`.
    pub profit: [f64; 2],
    /// Uniform valuation support `[lo, hi]`, with `hi < 1`.
    pub valuation: [f64; 2],
    /// Candidate sets the group joins: 1 for X1, 2 for X2.
    pub tiers: Vec<u8>,
    #[serde(default)]
    pub known: bool,
    #[serde(default)]
    pub launch: Launch,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Launch {
    #[default]
    AtStart,
    At {
        time: u64,
    },
    /// The k-th product of the group launches at `start + k * spacing`.
    Every {
        start: u64,
        spacing: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Replaces every group's valuation support.
    #[serde(default)]
    pub valuation: Option<[f64; 2]>,
}

/// What regret is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    /// Optimum over products launched so far, re-solved at launches.
    #[default]
    LaunchedOnly,
    /// One optimum over every product of the horizon.
    AllProducts,
}

/// A concrete catalog plus the products the policies know.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub catalog: Catalog,
    pub known: BTreeSet<ProductId>,
}

fn check_range(name: &str, what: &str, r: [f64; 2], max: f64, strict_max: bool) -> Result<()> {
    let ok = r[0].is_finite() && r[1].is_finite() && 0.0 <= r[0] && r[0] <= r[1] && (if strict_max { r[1] < max } else { r[1] <= max });
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("group {name}: {what} support {r:?} is invalid")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidConfig("at least one policy is required".into()));
        }
        for p in &self.policies {
            if let PolicySpec::ExploreThenExploit { gamma } = p {
                if !(*gamma >= 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidConfig(format!("gamma must be non-negative, got {gamma}")));
                }
            }
        }
        for s in &self.scenarios {
            if let Some(v) = s.valuation {
                check_range(&s.name, "valuation", v, 1.0, true)?;
            }
        }
        match &self.catalog {
            CatalogSpec::Explicit { catalog, known } => {
                for p in catalog.products() {
                    if p.launch_time > self.horizon {
                        return Err(Error::InvalidConfig(format!(
                            "product {} launches at {} after the horizon {}",
                            p.id, p.launch_time, self.horizon
                        )));
                    }
                }
                for id in known {
                    catalog.get(*id)?;
                }
            }
            CatalogSpec::Generated { groups } => {
                for g in groups {
                    check_range(&g.name, "profit", g.profit, f64::INFINITY, false)?;
                    check_range(&g.name, "valuation", g.valuation, 1.0, true)?;
                    if g.tiers.is_empty() || g.tiers.iter().any(|t| *t != 1 && *t != 2) {
                        return Err(Error::InvalidConfig(format!("group {}: tiers must be a non-empty subset of [1, 2]", g.name)));
                    }
                    if g.count > 0 {
                        let last = launch_time(g.launch, g.count - 1);
                        if last > self.horizon {
                            return Err(Error::InvalidConfig(format!(
                                "group {}: last launch at {last} is after the horizon {}",
                                g.name, self.horizon
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Scenario list with the implicit default filled in.
    pub fn scenario_list(&self) -> Vec<Scenario> {
        if self.scenarios.is_empty() {
            vec![Scenario {
                name: "default".into(),
                valuation: None,
            }]
        } else {
            self.scenarios.clone()
        }
    }

    /// Draws the catalog of one replication. Uniform draws are shared across
    /// scenarios, so scenarios differ only in their valuation scaling.
    pub fn instance(&self, scenario: &Scenario, rep_seed: u64) -> Result<Instance> {
        match &self.catalog {
            CatalogSpec::Explicit { catalog, known } => {
                let catalog = match scenario.valuation {
                    None => catalog.clone(),
                    Some(_) => {
                        return Err(Error::InvalidConfig(
                            "valuation scenarios need a generated catalog".into(),
                        ))
                    }
                };
                Ok(Instance {
                    catalog,
                    known: known.iter().copied().collect(),
                })
            }
            CatalogSpec::Generated { groups } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, STREAM_CATALOG));
                let mut products = Vec::new();
                let mut x1 = Vec::new();
                let mut x2 = Vec::new();
                let mut known = BTreeSet::new();
                let mut next = 0u32;
                for g in groups {
                    let v_range = scenario.valuation.unwrap_or(g.valuation);
                    for k in 0..g.count {
                        let ur: f64 = rng.random();
                        let uv: f64 = rng.random();
                        let id = ProductId(next);
                        next += 1;
                        products.push(Product {
                            id,
                            profit: g.profit[0] + (g.profit[1] - g.profit[0]) * ur,
                            valuation: v_range[0] + (v_range[1] - v_range[0]) * uv,
                            launch_time: launch_time(g.launch, k),
                        });
                        if g.tiers.contains(&1) {
                            x1.push(id);
                        }
                        if g.tiers.contains(&2) {
                            x2.push(id);
                        }
                        if g.known {
                            known.insert(id);
                        }
                    }
                }
                Ok(Instance {
                    catalog: Catalog::new(products, x1, x2)?,
                    known,
                })
            }
        }
    }
}

fn launch_time(launch: Launch, k: usize) -> u64 {
    match launch {
        Launch::AtStart => 0,
        Launch::At { time } => time,
        Launch::Every { start, spacing } => start + spacing * k as u64,
    }
}

pub(crate) const STREAM_CATALOG: u64 = 0;
pub(crate) const STREAM_CHOICE: u64 = 1;
pub(crate) const STREAM_POLICY: u64 = 2;

/// SplitMix64 finalizer over `seed` and a stream tag.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` under base seed `seed`.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    derive_seed(seed, 0x5EED_0000 + rep as u64)
}
