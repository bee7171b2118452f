//! Customer-arrival simulation and pseudo-regret accounting.
//!
//! Each step exposes the launched products to the policy, takes its offer,
//! draws the customer's choice from the true valuations and charges the gap
//! between the benchmark's expected profit and the offer's expected profit.

mod config;
mod presets;

use std::collections::BTreeSet;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{format_tier, Catalog, TieredOffer};
use crate::choice::{expected_profit, Sampler};
use crate::error::Result;
use crate::offline::solve_two_tier;
use crate::parallel::{map_jobs, Execution};
use crate::policies::{MarketView, PolicySpec};
use crate::stats::{summarize, Summary};

pub use config::{
    derive_seed, replication_seed, Benchmark, CatalogSpec, ExperimentConfig, Instance, Launch, ProductGroup, Scenario,
    CONFIG_SCHEMA_VERSION,
};
pub use presets::{experiment1, experiment2, experiment3, experiment_preset, PRESET_SEED};

use config::{STREAM_CHOICE, STREAM_POLICY};

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Realized profit per step, for diagnostics.
    pub revenue: Vec<f64>,
    /// `(t, offer)` at every step where the offer changed.
    pub offer_changes: Vec<(u64, TieredOffer)>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Offer shown at step `t` (1-based).
    pub fn offer_at(&self, t: u64) -> Option<&TieredOffer> {
        let k = self.offer_changes.partition_point(|(s, _)| *s <= t);
        k.checked_sub(1).map(|k| &self.offer_changes[k].1)
    }

    /// Writes `t,instantaneous_regret,cumulative_regret,offered_tier1,offered_tier2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,instantaneous_regret,cumulative_regret,offered_tier1,offered_tier2")?;
        let mut change = 0;
        let mut tiers = (String::new(), String::new());
        for (k, (inst, cum)) in self.instantaneous.iter().zip(&self.cumulative).enumerate() {
            let t = k as u64 + 1;
            while change < self.offer_changes.len() && self.offer_changes[change].0 <= t {
                let o = &self.offer_changes[change].1;
                tiers = (format_tier(o.tier(0)), format_tier(o.tier(1)));
                change += 1;
            }
            writeln!(w, "{t},{inst},{cum},{},{}", tiers.0, tiers.1)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Runs one policy on one instance for `horizon` customers.
pub fn run(instance: &Instance, policy: &PolicySpec, horizon: u64, benchmark: Benchmark, seed: u64) -> Result<RegretTrace> {
    let truth = &instance.catalog;
    let mut choice_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_CHOICE));
    let mut agent = policy.build(truth, derive_seed(seed, STREAM_POLICY));

    let mut launch_times: Vec<u64> = truth.products().iter().map(|p| p.launch_time.max(1)).collect();
    launch_times.sort_unstable();
    launch_times.dedup();
    let mut next_launch = 0;

    let all_best = match benchmark {
        Benchmark::AllProducts => Some(solve_two_tier(truth)?.expected_profit),
        Benchmark::LaunchedOnly => None,
    };
    let mut launched = Catalog::empty();
    let mut public = Catalog::empty();
    let mut best = 0.0;

    let n = horizon as usize;
    let mut trace = RegretTrace {
        instantaneous: Vec::with_capacity(n),
        cumulative: Vec::with_capacity(n),
        revenue: Vec::with_capacity(n),
        offer_changes: Vec::new(),
    };
    let mut cached: Option<(TieredOffer, Sampler, f64)> = None;
    let mut total = 0.0;

    for t in 1..=horizon {
        if next_launch < launch_times.len() && launch_times[next_launch] <= t {
            while next_launch < launch_times.len() && launch_times[next_launch] <= t {
                next_launch += 1;
            }
            launched = truth.launched_by(t);
            public = launched.with_valuations(|p| if instance.known.contains(&p.id) { p.valuation } else { 0.0 });
            best = match all_best {
                Some(v) => v,
                None => solve_two_tier(&launched)?.expected_profit,
            };
            cached = None;
        }
        let view = MarketView {
            catalog: &public,
            known: &instance.known,
            total_products: truth.len(),
        };
        let offer = agent.next_offer(&view, t)?;
        if cached.as_ref().is_none_or(|(o, _, _)| *o != offer) {
            offer.validate_candidates(&launched)?;
            let sampler = Sampler::new(&offer, &launched)?;
            let value = expected_profit(&offer, &launched)?;
            if trace.offer_changes.last().is_none_or(|(_, o)| *o != offer) {
                trace.offer_changes.push((t, offer.clone()));
            }
            cached = Some((offer.clone(), sampler, value));
        }
        let (_, sampler, value) = cached.as_ref().expect("set above");
        let outcome = sampler.sample(&mut choice_rng);
        let regret = best - value;
        total += regret;
        trace.instantaneous.push(regret);
        trace.cumulative.push(total);
        trace.revenue.push(sampler.revenue(outcome));
        agent.observe(&offer, outcome, t)?;
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub policy: String,
    pub final_regret: Summary,
    pub final_regrets: Vec<f64>,
    pub replication_seeds: Vec<u64>,
    #[serde(skip)]
    pub mean_curve: Vec<f64>,
    #[serde(skip)]
    pub traces: Vec<RegretTrace>,
}

/// One (scenario, policy) cell of an experiment.
#[derive(Debug, Clone)]
struct Job {
    scenario: usize,
    policy: usize,
    rep: usize,
}

/// Runs every scenario and policy for `config.replications` replications.
/// Within a replication all policies see the same catalog and seeds.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<Vec<Aggregate>> {
    config.validate()?;
    let scenarios = config.scenario_list();
    let jobs: Vec<Job> = (0..scenarios.len())
        .flat_map(|s| {
            (0..config.policies.len()).flat_map(move |p| (0..config.replications).map(move |rep| Job { scenario: s, policy: p, rep }))
        })
        .collect();
    let results = map_jobs(&jobs, exec, |job| -> Result<RegretTrace> {
        let seed = replication_seed(config.seed, job.rep);
        let instance = config.instance(&scenarios[job.scenario], seed)?;
        run(&instance, &config.policies[job.policy], config.horizon, config.benchmark, seed)
    });
    let mut traces = results.into_iter();
    let mut out = Vec::new();
    for scenario in &scenarios {
        for policy in &config.policies {
            let reps: Vec<RegretTrace> = traces
                .by_ref()
                .take(config.replications)
                .collect::<Result<_>>()?;
            out.push(aggregate(
                &scenario.name,
                &policy.label(),
                reps,
                (0..config.replications).map(|r| replication_seed(config.seed, r)).collect(),
            ));
        }
    }
    Ok(out)
}

/// Replicates one policy under one scenario.
pub fn replicate(config: &ExperimentConfig, scenario: &Scenario, policy: &PolicySpec, exec: Execution) -> Result<Aggregate> {
    config.validate()?;
    let reps: Vec<usize> = (0..config.replications).collect();
    let traces = map_jobs(&reps, exec, |&rep| {
        let seed = replication_seed(config.seed, rep);
        let instance = config.instance(scenario, seed)?;
        run(&instance, policy, config.horizon, config.benchmark, seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let seeds = reps.iter().map(|&r| replication_seed(config.seed, r)).collect();
    Ok(aggregate(&scenario.name, &policy.label(), traces, seeds))
}

fn aggregate(scenario: &str, policy: &str, traces: Vec<RegretTrace>, seeds: Vec<u64>) -> Aggregate {
    let finals: Vec<f64> = traces.iter().map(RegretTrace::final_regret).collect();
    let len = traces.iter().map(|t| t.cumulative.len()).min().unwrap_or(0);
    let mean_curve = (0..len)
        .map(|k| traces.iter().map(|t| t.cumulative[k]).sum::<f64>() / traces.len() as f64)
        .collect();
    Aggregate {
        scenario: scenario.into(),
        policy: policy.into(),
        final_regret: summarize(&finals),
        final_regrets: finals,
        replication_seeds: seeds,
        mean_curve,
        traces,
    }
}

/// Writes `t,mean_cumulative_regret`.
pub fn write_mean_curve_csv<W: Write>(curve: &[f64], mut w: W) -> io::Result<()> {
    writeln!(w, "t,mean_cumulative_regret")?;
    for (k, v) in curve.iter().enumerate() {
        writeln!(w, "{},{v}", k + 1)?;
    }
    Ok(())
}

/// Catalog with ids from an explicit set; handy for small scripted runs.
pub fn instance_from_catalog(catalog: Catalog, known: impl IntoIterator<Item = crate::catalog::ProductId>) -> Instance {
    Instance {
        catalog,
        known: known.into_iter().collect::<BTreeSet<_>>(),
    }
}
