//! Self-checks of the model, solver, estimators and simulator.
//!
//! Every check returns a [`CheckReport`] instead of panicking, so callers can
//! print one line per check and decide on an exit code.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::{Catalog, Product, ProductId, TieredOffer};
use crate::choice::{expected_profit, expected_profit_single_tier, suffix_profits, ChoiceOutcome, Sampler};
use crate::error::{Error, Result};
use crate::estimation::{min_learning_epochs, ucb_index, EpochLedger, DEFAULT_UCB_SCALE};
use crate::offline::{
    brute_force_optimal, brute_force_with_candidates, enumerate_offers, has_profit_ordered_tiers,
    is_profit_ordered_by_tier, new_product_tier_prediction, solve_two_tier, Placement,
};
use crate::parallel::{map_jobs, Execution};
use crate::policies::{epoch_regret_against, epoch_regret_g, PolicySpec, RegretMode, Strategy};
use crate::simulator::{
    experiment1, experiment2, experiment3, replication_seed, run, run_experiment, Aggregate, Benchmark, CatalogSpec,
    ExperimentConfig, CONFIG_SCHEMA_VERSION,
};
use crate::stats::{geometric_gof, summarize};

pub const VERIFY_SEED: u64 = 0xC0FFEE;

/// Largest tolerated miss rate of the confidence bound at any checkpoint.
pub const COVERAGE_THRESHOLD: f64 = 0.01;

const EXAMPLE1_FIXTURE: &str = "example1.json";
const EXAMPLE1_JSON: &str = include_str!("../fixtures/example1.json");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => CheckReport {
                name: name.into(),
                passed,
                detail,
            },
            Err(e) => CheckReport {
                name: name.into(),
                passed: false,
                detail: format!("error: {e}"),
            },
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("[{tag}] {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Directory holding catalog fixtures; `None` uses the built-in copies.
    pub fixtures: Option<PathBuf>,
    /// Constant of the confidence bound under test.
    pub ucb_scale: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            fixtures: None,
            ucb_scale: DEFAULT_UCB_SCALE,
            seed: VERIFY_SEED,
        }
    }
}

/// The quick checks, in a fixed order.
pub fn fast_checks(opts: &VerifyOptions) -> Vec<CheckReport> {
    vec![
        check_example1(opts.fixtures.as_deref()),
        check_trace_replay(),
        check_solver_oracle(200, opts.seed),
        check_geometric_epochs(100_000, opts.seed),
        check_epoch_regret(50, 100_000, opts.seed),
        check_optimism_coverage(opts.ucb_scale, 2_000, opts.seed),
    ]
}

fn load_fixture(dir: Option<&Path>, name: &str) -> std::result::Result<String, String> {
    match dir {
        None => match name {
            EXAMPLE1_FIXTURE => Ok(EXAMPLE1_JSON.into()),
            _ => Err(format!("fixture missing: no built-in {name}")),
        },
        Some(dir) => {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| format!("fixture missing: {} ({e})", path.display()))
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Single-tier and two-tier profits of the two-product example.
pub fn check_example1(fixtures: Option<&Path>) -> CheckReport {
    let name = "example1_values";
    let text = match load_fixture(fixtures, EXAMPLE1_FIXTURE) {
        Ok(t) => t,
        Err(msg) => {
            return CheckReport {
                name: name.into(),
                passed: false,
                detail: msg,
            }
        }
    };
    CheckReport::from_result(
        name,
        (|| {
            let c = Catalog::from_json(&text).map_err(|e| Error::InvalidConfig(format!("{EXAMPLE1_FIXTURE}: {e}")))?;
            let one = expected_profit_single_tier(&[ProductId(1), ProductId(2)], &c)?;
            let two = expected_profit(&TieredOffer::from_ids(&[&[1], &[2]]), &c)?;
            let one_exact = (10.0 * 0.1 + 1.0 * 1.0) / 2.1;
            let two_exact = (10.0 * 0.1 + 1.0 * 1.0 / 2.0) / 1.1;
            let solved = solve_two_tier(&c)?;
            let ok = close(one, 0.952, 5e-3)
                && close(two, 1.36, 5e-3)
                && close(one, one_exact, 1e-12)
                && close(two, two_exact, 1e-12)
                && solved.offer.normalized() == TieredOffer::from_ids(&[&[1], &[2]]);
            Ok((ok, format!("single tier {one:.6}, two tiers {two:.6}, optimum {}", solved.offer)))
        })(),
    )
}

/// Epoch labels and step sets of the scripted nine-customer sequence.
pub fn check_trace_replay() -> CheckReport {
    CheckReport::from_result(
        "trace_replay",
        (|| {
            let offer = TieredOffer::from_ids(&[&[1], &[2]]);
            let t1 = ChoiceOutcome::tier1(1);
            let t2 = ChoiceOutcome::tier2(2);
            let n = ChoiceOutcome::NoPurchase;
            let mut ledger = EpochLedger::new();
            for (t, o) in [t1, t2, t1, t1, n, t2, t1, t1, n].into_iter().enumerate() {
                ledger.record_step(&offer, o, t as u64 + 1)?;
            }
            let steps = |tier: usize, l: u64| ledger.epoch_steps(tier, l).map(<[u64]>::to_vec);
            let ok = ledger.labels(0) == [0, 1, 3, 4]
                && ledger.labels(1) == [0, 3]
                && steps(0, 0) == Some(vec![1, 2])
                && steps(0, 1) == Some(vec![3, 4, 5])
                && steps(0, 3) == Some(vec![6])
                && steps(0, 4) == Some(vec![7, 8, 9])
                && steps(1, 0) == Some(vec![2, 5])
                && steps(1, 3) == Some(vec![6, 9]);
            Ok((ok, format!("tier-1 labels {:?}, tier-2 labels {:?}", ledger.labels(0), ledger.labels(1))))
        })(),
    )
}

/// Random catalog with at most `max_x` products per candidate set and
/// overlap allowed.
fn random_overlapping_catalog(rng: &mut ChaCha8Rng, max_x: usize, vmax: f64) -> Catalog {
    let n = rng.random_range(1..=max_x + 4);
    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    let mut products = Vec::new();
    for i in 0..n {
        let id = ProductId(i as u32);
        let m = rng.random_range(0..3u8);
        if m != 1 && x1.len() < max_x {
            x1.push(id);
        }
        if m != 0 && x2.len() < max_x {
            x2.push(id);
        }
        products.push(Product::new(i as u32, rng.random(), rng.random::<f64>() * vmax));
    }
    let products = products
        .into_iter()
        .filter(|p| x1.contains(&p.id) || x2.contains(&p.id))
        .collect();
    Catalog::new(products, x1, x2).expect("generated catalog is valid")
}

/// Exact solver against exhaustive search on random overlapping catalogs.
pub fn check_solver_oracle(instances: usize, seed: u64) -> CheckReport {
    CheckReport::from_result(
        "solver_oracle_equivalence",
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x501);
            let mut worst: f64 = 0.0;
            let mut bad = 0;
            for _ in 0..instances {
                let c = random_overlapping_catalog(&mut rng, 8, 0.5);
                let s = solve_two_tier(&c)?;
                let b = brute_force_optimal(&c, 2)?;
                let gap = (s.expected_profit - b.expected_profit).abs();
                worst = worst.max(gap);
                let ordered = has_profit_ordered_tiers(&s.offer, &c) && is_profit_ordered_by_tier(&s.offer, &c);
                if gap > 1e-9 || !ordered || !s.proven_optimal {
                    bad += 1;
                }
            }
            Ok((bad == 0, format!("{instances} catalogs, {bad} mismatches, max gap {worst:.2e}")))
        })(),
    )
}

/// Random three-tier instances with pairwise-disjoint candidate sets plus one
/// product eligible for every tier.
pub fn check_new_product_placement(instances: usize, seed: u64) -> CheckReport {
    CheckReport::from_result(
        "new_product_placement",
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3713);
            let mut checked = 0;
            let mut skipped = 0;
            let mut failures = Vec::new();
            while checked < instances {
                let n = rng.random_range(3..=7usize);
                let mut tiers: Vec<Vec<ProductId>> = vec![Vec::new(); 3];
                let mut products = Vec::new();
                for i in 0..n {
                    products.push(Product::new(i as u32, rng.random(), rng.random::<f64>() * 0.5));
                    tiers[rng.random_range(0..3)].push(ProductId(i as u32));
                }
                let all: Vec<ProductId> = products.iter().map(|p| p.id).collect();
                let base = Catalog::new(products.clone(), all.clone(), all)?;
                let before = brute_force_with_candidates(&base, &tiers)?;
                let suffix = suffix_profits(&three_tiers(&before.offer), &base)?;
                let m = ProductId(n as u32);
                let r_m: f64 = rng.random();
                if suffix.iter().any(|s| (s - r_m).abs() < 1e-9) {
                    skipped += 1;
                    continue;
                }
                checked += 1;
                if suffix.windows(2).any(|w| w[0] < w[1] - 1e-12) {
                    failures.push(format!("suffix not monotone: {suffix:?}"));
                    continue;
                }
                products.push(Product::new(m.0, r_m, rng.random::<f64>() * 0.5));
                let ids: Vec<ProductId> = products.iter().map(|p| p.id).collect();
                let extended = Catalog::new(products, ids.clone(), ids)?;
                let with_m: Vec<Vec<ProductId>> = tiers
                    .iter()
                    .map(|t| t.iter().copied().chain(std::iter::once(m)).collect())
                    .collect();
                let after = brute_force_with_candidates(&extended, &with_m)?;
                let placed = after.offer.tier_of(m);
                let ok = match new_product_tier_prediction(&suffix, r_m) {
                    Placement::Excluded => placed.is_none(),
                    Placement::EarliestTier(j) => placed.is_none_or(|k| k >= j),
                };
                if !ok {
                    failures.push(format!("r_m {r_m:.4}, suffix {suffix:?}, placed in {placed:?}"));
                }
            }
            let detail = format!(
                "{checked} instances ({skipped} near-ties skipped), {} violations{}",
                failures.len(),
                failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
            );
            Ok((failures.is_empty(), detail))
        })(),
    )
}

fn three_tiers(offer: &TieredOffer) -> TieredOffer {
    let mut o = offer.clone();
    while o.tiers.len() < 3 {
        o.tiers.push(Vec::new());
    }
    o
}

/// Per-epoch purchase counts of one product, from `epochs` epochs of the
/// tier it sits in.
fn epoch_counts(offer: &TieredOffer, catalog: &Catalog, id: ProductId, epochs: usize, seed: u64) -> Result<Vec<u64>> {
    let tier = offer.tier_of(id).ok_or_else(|| crate::error::invalid_param("id", "product is not offered"))?;
    let sampler = Sampler::new(offer, catalog)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ledger = EpochLedger::new();
    let mut t = 0;
    while ledger.product(id).map_or(0, |r| r.epochs_by_tier[tier]) < epochs as u64 {
        t += 1;
        let outcome = sampler.sample(&mut rng);
        ledger.record_step(offer, outcome, t)?;
    }
    let rec = ledger.product(id).expect("offered above");
    Ok(rec.observations.iter().take(epochs).map(|o| o.count).collect())
}

/// Per-epoch counts are geometric with mean `v`, in either tier.
pub fn check_geometric_epochs(epochs: usize, seed: u64) -> CheckReport {
    CheckReport::from_result(
        "geometric_epoch_counts",
        (|| {
            let v = 0.3;
            let c = Catalog::fully_overlapping(vec![
                Product::new(0, 0.5, v),
                Product::new(1, 0.8, 0.4),
                Product::new(2, 0.3, 0.2),
            ])?;
            let m = ProductId(0);
            let first = epoch_counts(&TieredOffer::from_ids(&[&[0, 1], &[2]]), &c, m, epochs, seed ^ 0x11)?;
            let second = epoch_counts(&TieredOffer::from_ids(&[&[1], &[0, 2]]), &c, m, epochs, seed ^ 0x22)?;
            let p = 1.0 / (1.0 + v);
            let g1 = geometric_gof(&first, p);
            let g2 = geometric_gof(&second, p);
            let pooled: Vec<f64> = first.iter().chain(&second).map(|&k| k as f64).collect();
            let s = summarize(&pooled);
            let z = (s.mean - v) / s.std_err;
            let ok = g1.p_value > 0.001 && g2.p_value > 0.001 && z.abs() < 3.0;
            Ok((
                ok,
                format!(
                    "tier-1 p={:.3}, tier-2 p={:.3}, pooled mean {:.4} ({z:+.2} se)",
                    g1.p_value, g2.p_value, s.mean
                ),
            ))
        })(),
    )
}

/// Two-tier instance with disjoint candidate sets and a new product whose
/// profit is below the optimal secondary-tier revenue.
struct RegretInstance {
    catalog: Catalog,
    base: Catalog,
    optimum: TieredOffer,
    m: ProductId,
}

fn regret_instance(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> Result<Option<RegretInstance>> {
    let mut products = Vec::new();
    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    for i in 0..n1 + n2 {
        products.push(Product::new(i as u32, rng.random(), rng.random::<f64>() * 0.5));
        if i < n1 {
            x1.push(ProductId(i as u32));
        } else {
            x2.push(ProductId(i as u32));
        }
    }
    let base = Catalog::new(products.clone(), x1.clone(), x2.clone())?;
    let optimum = solve_two_tier(&base)?.offer;
    let r2 = expected_profit_single_tier(optimum.tier(1), &base)?;
    if r2 <= 1e-6 {
        return Ok(None);
    }
    let m = ProductId((n1 + n2) as u32);
    products.push(Product::new(m.0, rng.random::<f64>() * r2, 0.05 + rng.random::<f64>() * 0.45));
    x2.push(m);
    let catalog = Catalog::new(products, x1, x2)?;
    Ok(Some(RegretInstance {
        catalog,
        base,
        optimum,
        m,
    }))
}

/// Monte Carlo epoch regret of both learning strategies against the closed
/// form, the ordering of the two, and the optimal base offer.
pub fn check_epoch_regret(instances: usize, epochs: u64, seed: u64) -> CheckReport {
    CheckReport::from_result(
        "epoch_regret",
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7E0);
            let mut cases = Vec::new();
            while cases.len() < instances {
                let (n1, n2) = (rng.random_range(1..=4), rng.random_range(1..=4));
                if let Some(inst) = regret_instance(&mut rng, n1, n2)? {
                    cases.push(inst);
                }
            }
            let jobs: Vec<(usize, &RegretInstance)> = cases.iter().enumerate().collect();
            let results = map_jobs(&jobs, Execution::Parallel, |&(k, inst)| -> Result<(bool, bool)> {
                let mc = |s: Strategy, salt: u64| {
                    epoch_regret_g(
                        s,
                        &inst.optimum,
                        inst.m,
                        &inst.catalog,
                        RegretMode::MonteCarlo {
                            epochs,
                            seed: seed ^ (k as u64) << 8 ^ salt,
                        },
                    )
                };
                let g1 = mc(Strategy::FirstTier, 1)?;
                let g2 = mc(Strategy::SecondTier, 2)?;
                let p = inst.catalog.get(inst.m)?;
                let closed = p.valuation * (expected_profit_single_tier(inst.optimum.tier(1), &inst.base)? - p.profit);
                let matches = (g2.value - closed).abs() <= 3.0 * g2.std_err.max(1e-12);
                let ordered = g1.value >= g2.value - 3.0 * (g1.std_err.powi(2) + g2.std_err.powi(2)).sqrt();
                Ok((matches, ordered))
            });
            let mut mismatches = 0;
            let mut disorders = 0;
            for r in results {
                let (m, o) = r?;
                mismatches += usize::from(!m);
                disorders += usize::from(!o);
            }
            let argmin_failures = check_argmin(instances, &mut rng)?;
            let ok = mismatches == 0 && disorders == 0 && argmin_failures == 0;
            Ok((
                ok,
                format!(
                    "{instances} instances x {epochs} epochs: {mismatches} closed-form misses, {disorders} ordering misses, {argmin_failures} arg-min misses"
                ),
            ))
        })(),
    )
}

/// On small instances both regret functions are minimized by the optimum.
fn check_argmin(instances: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let mut failures = 0;
    let mut done = 0;
    while done < instances {
        let (n1, n2) = (rng.random_range(1..=3), rng.random_range(1..=2));
        let Some(inst) = regret_instance(rng, n1, n2)? else { continue };
        done += 1;
        let best = expected_profit(&inst.optimum, &inst.base)?;
        let candidates = vec![inst.base.candidates_tier1().to_vec(), inst.base.candidates_tier2().to_vec()];
        let offers = enumerate_offers(&inst.base, &candidates)?;
        for strategy in [Strategy::FirstTier, Strategy::SecondTier] {
            let g = |q: &TieredOffer| {
                epoch_regret_against(strategy, q, best, inst.m, &inst.catalog, RegretMode::ClosedForm).map(|r| r.value)
            };
            let at_optimum = g(&inst.optimum)?;
            let mut min = f64::INFINITY;
            let mut arg = TieredOffer::empty();
            for q in &offers {
                let v = g(q)?;
                if v < min {
                    min = v;
                    arg = q.clone();
                }
            }
            let arg_profit = expected_profit(&arg, &inst.base)?;
            if min < at_optimum - 1e-12 || (arg_profit - best).abs() > 1e-12 {
                failures += 1;
            }
        }
    }
    Ok(failures)
}

/// Number of purchases before the first no-purchase for one product shown
/// alone.
fn one_epoch_count(rng: &mut ChaCha8Rng, v: f64) -> u64 {
    let stay = v / (1.0 + v);
    let mut k = 0;
    while rng.random::<f64>() < stay {
        k += 1;
    }
    k
}

/// After `M(0.2, 0.1)` epochs the estimate misses by more than 0.2 in at
/// most a 0.1 fraction of replications.
pub fn check_min_learning(replications: usize, seed: u64) -> CheckReport {
    CheckReport::from_result(
        "minimum_learning_criterion",
        (|| {
            let (eps, alpha) = (0.2, 0.1);
            let m = min_learning_epochs(eps, alpha)?;
            let mut worst: f64 = 0.0;
            let mut details = Vec::new();
            for (k, v) in [0.1, 0.5, 0.9].into_iter().enumerate() {
                let reps: Vec<usize> = (0..replications).collect();
                let misses = map_jobs(&reps, Execution::Parallel, |&r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(seed ^ (k as u64 + 1) << 20, r));
                    let total: u64 = (0..m).map(|_| one_epoch_count(&mut rng, v)).sum();
                    ((total as f64 / m as f64) - v).abs() > eps
                })
                .into_iter()
                .filter(|&x| x)
                .count();
                let frac = misses as f64 / replications as f64;
                worst = worst.max(frac);
                details.push(format!("v={v}: {frac:.3}"));
            }
            Ok((
                worst <= alpha,
                format!("M={m}, {replications} reps, miss fractions {}", details.join(", ")),
            ))
        })(),
    )
}

/// Checkpoints (epochs observed) at which the bound is tested.
const COVERAGE_CHECKPOINTS: [u64; 8] = [5, 10, 20, 50, 100, 200, 500, 1000];

/// Worst miss rate `P(v_ucb < v)` over valuations and checkpoints, with one
/// epoch per label and `k` products.
pub fn optimism_miss_rate(scale: f64, replications: usize, k: usize, seed: u64) -> f64 {
    let valuations = [0.05, 0.2, 0.5, 0.9];
    let last = *COVERAGE_CHECKPOINTS.last().expect("non-empty");
    let mut worst: f64 = 0.0;
    for (vi, &v) in valuations.iter().enumerate() {
        let reps: Vec<usize> = (0..replications).collect();
        let misses = map_jobs(&reps, Execution::Parallel, |&r| {
            let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(seed ^ (vi as u64 + 1) << 24, r));
            let mut total = 0u64;
            let mut hit = [false; COVERAGE_CHECKPOINTS.len()];
            let mut next = 0;
            for n in 1..=last {
                total += one_epoch_count(&mut rng, v);
                if n == COVERAGE_CHECKPOINTS[next] {
                    hit[next] = ucb_index(total as f64 / n as f64, n, k, n, scale) < v;
                    next += 1;
                }
            }
            hit
        });
        for c in 0..COVERAGE_CHECKPOINTS.len() {
            let rate = misses.iter().filter(|h| h[c]).count() as f64 / replications as f64;
            worst = worst.max(rate);
        }
    }
    worst
}

/// The confidence bound stays above the true valuation at every checkpoint
/// except with probability below [`COVERAGE_THRESHOLD`].
pub fn check_optimism_coverage(scale: f64, replications: usize, seed: u64) -> CheckReport {
    let worst = optimism_miss_rate(scale, replications, 10, seed ^ 0x0C);
    CheckReport {
        name: "optimism_coverage".into(),
        passed: worst <= COVERAGE_THRESHOLD,
        detail: format!("scale {scale}, worst miss rate {worst:.4} (limit {COVERAGE_THRESHOLD})"),
    }
}

/// A small explicit config for replay checks.
pub fn tiny_config(horizon: u64, replications: usize, seed: u64) -> ExperimentConfig {
    let catalog = Catalog::new(
        vec![
            Product::new(0, 0.9, 0.3),
            Product::new(1, 0.6, 0.4),
            Product::new(2, 0.2, 0.5).launched_at(horizon / 4),
        ],
        vec![ProductId(0), ProductId(1)],
        vec![ProductId(1), ProductId(2)],
    )
    .expect("fixed catalog is valid");
    ExperimentConfig {
        schema_version: CONFIG_SCHEMA_VERSION,
        name: "tiny".into(),
        horizon,
        replications,
        seed,
        catalog: CatalogSpec::Explicit {
            catalog,
            known: Vec::new(),
        },
        scenarios: Vec::new(),
        policies: vec![PolicySpec::Algorithm1 {
            min_epochs: 5,
            ucb_scale: DEFAULT_UCB_SCALE,
        }],
        benchmark: Benchmark::LaunchedOnly,
        notes: Vec::new(),
    }
}

/// Identical config and seed give byte-identical traces, sequentially and
/// in parallel.
pub fn check_determinism(seed: u64) -> CheckReport {
    CheckReport::from_result(
        "determinism",
        (|| {
            let cfg = tiny_config(2_000, 3, seed);
            let csvs = |exec| -> Result<Vec<String>> {
                Ok(run_experiment(&cfg, exec)?
                    .iter()
                    .flat_map(|a| a.traces.iter().map(|t| t.to_csv_string()))
                    .collect())
            };
            let a = csvs(Execution::Sequential)?;
            let b = csvs(Execution::Sequential)?;
            let c = csvs(Execution::Parallel)?;
            let ok = a == b && a == c && a.windows(2).any(|w| w[0] != w[1]);
            Ok((ok, format!("{} traces, {} bytes each run", a.len(), a.iter().map(String::len).sum::<usize>())))
        })(),
    )
}

fn find<'a>(aggs: &'a [Aggregate], scenario: Option<&str>, policy: &str) -> Result<&'a Aggregate> {
    aggs.iter()
        .find(|a| a.policy == policy && scenario.is_none_or(|s| a.scenario == s))
        .ok_or_else(|| Error::InvalidConfig(format!("no results for policy {policy}")))
}

/// Mean final regret increases with the valuation support.
pub fn check_experiment1(exec: Execution) -> CheckReport {
    CheckReport::from_result(
        "experiment1_support_ordering",
        (|| {
            let aggs = run_experiment(&experiment1(), exec)?;
            let means: Vec<f64> = aggs.iter().map(|a| a.final_regret.mean).collect();
            let sds: Vec<f64> = aggs.iter().map(|a| a.final_regret.std_dev).collect();
            let ok = means.windows(2).all(|w| w[0] < w[1]);
            let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(" < ");
            Ok((ok, format!("means {}; std devs {}", fmt(&means), fmt(&sds))))
        })(),
    )
}

/// The learning policy loses less than half of what explore-then-exploit
/// loses.
pub fn check_experiment2(exec: Execution) -> CheckReport {
    CheckReport::from_result(
        "experiment2_versus_explore_then_exploit",
        (|| {
            let aggs = run_experiment(&experiment2(), exec)?;
            let a = find(&aggs, None, "algorithm1")?.final_regret;
            let b = find(&aggs, None, "explore_then_exploit")?.final_regret;
            let ratio = a.mean / b.mean;
            Ok((
                ratio < 0.5,
                format!("algorithm1 {:.1} vs explore_then_exploit {:.1}, ratio {ratio:.3}", a.mean, b.mean),
            ))
        })(),
    )
}

/// Secondary-tier learning beats random-tier learning by more than one
/// pooled standard error.
pub fn check_experiment3(exec: Execution) -> CheckReport {
    CheckReport::from_result(
        "experiment3_versus_random_tier",
        (|| {
            let aggs = run_experiment(&experiment3(), exec)?;
            let a = find(&aggs, None, "algorithm1")?.final_regret;
            let b = find(&aggs, None, "random_tier")?.final_regret;
            let se = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
            Ok((
                b.mean - a.mean > se,
                format!("algorithm1 {:.1} vs random_tier {:.1}, pooled se {se:.1}", a.mean, b.mean),
            ))
        })(),
    )
}

/// Average regret per customer falls by more than half between `short` and
/// `long` on the second experiment's catalog with no learning constraint.
pub fn check_sublinearity(short: u64, long: u64, seeds: usize, exec: Execution) -> CheckReport {
    CheckReport::from_result(
        "sublinear_regret",
        (|| {
            let mut cfg = experiment2();
            cfg.horizon = long;
            cfg.replications = seeds;
            let learner = cfg
                .policies
                .iter()
                .find(|p| matches!(p, PolicySpec::Algorithm1 { .. }))
                .ok_or_else(|| Error::InvalidConfig("preset has no learning policy".into()))?
                .with_min_epochs(0);
            cfg.policies = vec![learner];
            let scenario = &cfg.scenario_list()[0];
            let reps: Vec<usize> = (0..seeds).collect();
            let traces = map_jobs(&reps, exec, |&r| {
                let seed = replication_seed(cfg.seed, r);
                let inst = cfg.instance(scenario, seed)?;
                run(&inst, &cfg.policies[0], long, cfg.benchmark, seed)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let mean_at = |t: u64| traces.iter().map(|tr| tr.cumulative[t as usize - 1]).sum::<f64>() / seeds as f64;
            let early = mean_at(short) / short as f64;
            let late = mean_at(long) / long as f64;
            Ok((
                late < 0.5 * early,
                format!("regret/t {early:.5} at t={short}, {late:.5} at t={long}, ratio {:.3}", late / early),
            ))
        })(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_checks_pass() {
        for r in [check_example1(None), check_trace_replay(), check_solver_oracle(20, 3)] {
            assert!(r.passed, "{}", r.line());
        }
    }

    #[test]
    fn missing_fixture_is_reported() {
        let r = check_example1(Some(Path::new("/nonexistent/fixtures")));
        assert!(!r.passed);
        assert!(r.detail.starts_with("fixture missing"), "{}", r.detail);
    }

    #[test]
    fn malformed_fixture_is_reported() {
        let dir = std::env::temp_dir().join(format!("smnl-verify-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join(EXAMPLE1_FIXTURE), "{\"schema_version\": 1").unwrap();
        let r = check_example1(Some(&dir));
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(!r.passed);
        assert!(r.detail.contains("error"), "{}", r.detail);
    }

    #[test]
    fn report_line() {
        let r = CheckReport {
            name: "x".into(),
            passed: true,
            detail: "ok".into(),
        };
        assert_eq!(r.line(), "[PASS] x: ok");
    }
}
