//! Offline tiered assortment optimization.
//!
//! With disjoint candidate sets the problem separates: the second tier is the
//! best revenue-ordered prefix of X2 on its own, and the first tier is the best
//! prefix of X1 against an outside option worth the second tier's revenue.
//!
//! When X1 and X2 share products, choosing which shared products go to the
//! second tier is no longer a prefix decision, so the solver runs a small
//! branch and bound. Its bound lets every shared product sit in both tiers at
//! once; that relaxation is again separable and solved by the two prefix scans.
//! Branching bans a conflicting product from one tier or the other.

use std::collections::BTreeSet;

use crate::catalog::{Catalog, ProductId, TieredOffer};
use crate::choice::{profit_from_sums, TierSums};
use crate::error::{Error, Result};

/// Largest candidate count accepted by the exhaustive oracles.
pub const BRUTE_FORCE_CAP: usize = 12;

/// Default node budget of the branch and bound.
pub const DEFAULT_NODE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: ProductId,
    pub profit: f64,
    pub valuation: f64,
}

impl Candidate {
    pub fn new(id: u32, profit: f64, valuation: f64) -> Self {
        Candidate {
            id: ProductId(id),
            profit,
            valuation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub offer: TieredOffer,
    pub expected_profit: f64,
    /// Lowest profit in each tier; `+inf` for an empty tier.
    pub thresholds: (f64, f64),
    /// False only when the branch and bound ran out of nodes.
    pub proven_optimal: bool,
}

/// Candidate lists of a catalog, in candidate-set order.
pub fn candidates_of(catalog: &Catalog) -> (Vec<Candidate>, Vec<Candidate>) {
    let conv = |ids: &[ProductId]| -> Vec<Candidate> {
        ids.iter()
            .map(|&id| {
                let p = catalog.get(id).expect("catalog candidates are validated");
                Candidate {
                    id,
                    profit: p.profit,
                    valuation: p.valuation,
                }
            })
            .collect()
    };
    (conv(catalog.candidates_tier1()), conv(catalog.candidates_tier2()))
}

/// Profit descending, then id ascending.
pub fn sort_by_profit(list: &mut [Candidate]) {
    list.sort_by(|a, b| b.profit.total_cmp(&a.profit).then(a.id.cmp(&b.id)));
}

pub fn solve_two_tier(catalog: &Catalog) -> Result<SolveResult> {
    let (x1, x2) = candidates_of(catalog);
    Ok(solve_candidates(&x1, &x2))
}

pub fn solve_candidates(x1: &[Candidate], x2: &[Candidate]) -> SolveResult {
    solve_candidates_with_limit(x1, x2, DEFAULT_NODE_LIMIT)
}

/// Best prefix of `sorted` (skipping disallowed entries) for
/// `(A + outside) / (1 + V)`. Returns chosen positions and the value.
fn best_prefix(sorted: &[Candidate], allowed: impl Fn(usize) -> bool, outside: f64) -> (usize, f64) {
    let mut sums = TierSums::default();
    let mut best = outside;
    let mut best_len = 0;
    for (k, c) in sorted.iter().enumerate() {
        if !allowed(k) {
            continue;
        }
        sums.add(c.profit, c.valuation);
        let value = (sums.weighted_profit + outside) / (1.0 + sums.weight);
        if value > best {
            best = value;
            best_len = k + 1;
        }
    }
    (best_len, best)
}

fn thresholds_of(s1: &[Candidate], s2: &[Candidate]) -> (f64, f64) {
    let min = |s: &[Candidate]| s.iter().map(|c| c.profit).fold(f64::INFINITY, f64::min);
    (min(s1), min(s2))
}

struct Problem {
    x1: Vec<Candidate>,
    x2: Vec<Candidate>,
    /// Position in `x2` of each `x1` entry that is also a tier-2 candidate.
    shared_in_x2: Vec<Option<usize>>,
}

struct Relaxed {
    s1: Vec<usize>,
    s2: Vec<usize>,
    value: f64,
}

impl Problem {
    fn new(x1: &[Candidate], x2: &[Candidate]) -> Self {
        let mut x1 = dedup(x1);
        let mut x2 = dedup(x2);
        sort_by_profit(&mut x1);
        sort_by_profit(&mut x2);
        let shared_in_x2 = x1
            .iter()
            .map(|c| x2.iter().position(|d| d.id == c.id))
            .collect();
        Problem { x1, x2, shared_in_x2 }
    }

    /// Exact optimum when shared products may appear in both tiers.
    fn relax(&self, ban1: &[bool], ban2: &[bool]) -> Relaxed {
        let (len2, r2) = best_prefix(&self.x2, |k| !ban2[k], 0.0);
        let (len1, value) = best_prefix(&self.x1, |k| !ban1[k], r2);
        Relaxed {
            s1: (0..len1).filter(|&k| !ban1[k]).collect(),
            s2: (0..len2).filter(|&k| !ban2[k]).collect(),
            value,
        }
    }

    fn offer(&self, s1: &[usize], s2: &[usize]) -> (TieredOffer, (f64, f64)) {
        let c1: Vec<Candidate> = s1.iter().map(|&k| self.x1[k]).collect();
        let c2: Vec<Candidate> = s2.iter().map(|&k| self.x2[k]).collect();
        let th = thresholds_of(&c1, &c2);
        (
            TieredOffer::two_tier(c1.iter().map(|c| c.id).collect(), c2.iter().map(|c| c.id).collect()),
            th,
        )
    }
}

fn dedup(list: &[Candidate]) -> Vec<Candidate> {
    let mut seen = BTreeSet::new();
    list.iter().copied().filter(|c| seen.insert(c.id)).collect()
}

pub fn solve_candidates_with_limit(x1: &[Candidate], x2: &[Candidate], node_limit: usize) -> SolveResult {
    let p = Problem::new(x1, x2);
    let n1 = p.x1.len();
    let n2 = p.x2.len();

    let root = p.relax(&vec![false; n1], &vec![false; n2]);
    let conflict = |r: &Relaxed| -> Option<(usize, usize)> {
        r.s1.iter().find_map(|&k| {
            p.shared_in_x2[k].and_then(|j| r.s2.contains(&j).then_some((k, j)))
        })
    };
    if conflict(&root).is_none() {
        let (offer, thresholds) = p.offer(&root.s1, &root.s2);
        return SolveResult {
            offer,
            expected_profit: root.value,
            thresholds,
            proven_optimal: true,
        };
    }

    let mut best_value: f64 = 0.0;
    let mut best: (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    let mut stack = vec![(vec![false; n1], vec![false; n2])];
    let mut nodes = 0usize;
    let mut proven = true;
    while let Some((ban1, ban2)) = stack.pop() {
        nodes += 1;
        if nodes > node_limit {
            proven = false;
            break;
        }
        let r = p.relax(&ban1, &ban2);
        if r.value <= best_value + 1e-13 * best_value.abs().max(1.0) {
            continue;
        }
        match conflict(&r) {
            None => {
                best_value = r.value;
                best = (r.s1, r.s2);
            }
            Some((k1, k2)) => {
                let mut out_of_tier1 = ban1.clone();
                out_of_tier1[k1] = true;
                stack.push((out_of_tier1, ban2.clone()));
                let mut out_of_tier2 = ban2;
                out_of_tier2[k2] = true;
                stack.push((ban1, out_of_tier2));
            }
        }
    }
    let (offer, thresholds) = p.offer(&best.0, &best.1);
    SolveResult {
        offer,
        expected_profit: best_value,
        thresholds,
        proven_optimal: proven,
    }
}

/// Best tier-1 prefix of `x1` (minus `exclude`) against an outside option
/// worth `outside`. Returns the ids and the resulting expected profit.
pub fn best_tier1_given(x1: &[Candidate], exclude: &BTreeSet<ProductId>, outside: f64) -> (Vec<ProductId>, f64) {
    let mut sorted: Vec<Candidate> = dedup(x1).into_iter().filter(|c| !exclude.contains(&c.id)).collect();
    sort_by_profit(&mut sorted);
    let (len, value) = best_prefix(&sorted, |_| true, outside);
    (sorted[..len].iter().map(|c| c.id).collect(), value)
}

/// Best single-tier MNL assortment of `list`.
pub fn best_single_tier(list: &[Candidate]) -> (Vec<ProductId>, f64) {
    best_tier1_given(list, &BTreeSet::new(), 0.0)
}

/// Every prefix pair of the profit-sorted candidate lists, ordered by
/// tier-1 length then tier-2 length. Tier-2 prefixes skip products already
/// placed in tier 1.
pub fn prefix_pair_offers(x1: &[Candidate], x2: &[Candidate]) -> Vec<TieredOffer> {
    let mut x1 = dedup(x1);
    let mut x2 = dedup(x2);
    sort_by_profit(&mut x1);
    sort_by_profit(&mut x2);
    let mut out = Vec::new();
    for i in 0..=x1.len() {
        let s1: Vec<ProductId> = x1[..i].iter().map(|c| c.id).collect();
        let rest: Vec<ProductId> = x2.iter().map(|c| c.id).filter(|id| !s1.contains(id)).collect();
        for j in 0..=rest.len() {
            out.push(TieredOffer::two_tier(s1.clone(), rest[..j].to_vec()));
        }
    }
    out
}

fn profit_of(offer: &TieredOffer, lookup: &[Candidate]) -> f64 {
    let sums: Vec<TierSums> = offer
        .tiers
        .iter()
        .map(|t| {
            let mut s = TierSums::default();
            for id in t {
                let c = lookup.iter().find(|c| c.id == *id).expect("offer built from candidates");
                s.add(c.profit, c.valuation);
            }
            s
        })
        .collect();
    profit_from_sums(&sums)
}

/// Maximum over `prefix_pair_offers`, evaluated naively.
pub fn solve_prefix_pairs_naive(x1: &[Candidate], x2: &[Candidate]) -> (TieredOffer, f64) {
    let all: Vec<Candidate> = x1.iter().chain(x2).copied().collect();
    let mut best = (TieredOffer::empty(), 0.0);
    for offer in prefix_pair_offers(x1, x2) {
        let v = profit_of(&offer, &all);
        if v > best.1 {
            best = (offer, v);
        }
    }
    best
}

struct Enumeration<'a> {
    catalog: &'a Catalog,
    items: Vec<ProductId>,
    options: Vec<Vec<usize>>,
}

impl<'a> Enumeration<'a> {
    fn new(catalog: &'a Catalog, tier_candidates: &[Vec<ProductId>]) -> Result<Self> {
        let items: Vec<ProductId> = tier_candidates
            .iter()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if items.len() > BRUTE_FORCE_CAP {
            return Err(Error::InstanceTooLarge {
                size: items.len(),
                cap: BRUTE_FORCE_CAP,
            });
        }
        for &id in &items {
            catalog.get(id)?;
        }
        let options = items
            .iter()
            .map(|id| {
                (0..tier_candidates.len())
                    .filter(|&k| tier_candidates[k].contains(id))
                    .collect()
            })
            .collect();
        Ok(Enumeration { catalog, items, options })
    }

    /// Calls `f` with every assignment, as per-tier membership and sums.
    fn run(&self, num_tiers: usize, f: &mut impl FnMut(&[Vec<ProductId>], &[TierSums])) {
        let mut tiers = vec![Vec::new(); num_tiers];
        let mut sums = vec![TierSums::default(); num_tiers];
        self.recurse(0, &mut tiers, &mut sums, f);
    }

    fn recurse(
        &self,
        k: usize,
        tiers: &mut Vec<Vec<ProductId>>,
        sums: &mut Vec<TierSums>,
        f: &mut impl FnMut(&[Vec<ProductId>], &[TierSums]),
    ) {
        if k == self.items.len() {
            f(tiers, sums);
            return;
        }
        self.recurse(k + 1, tiers, sums, f);
        let id = self.items[k];
        let p = self.catalog.get(id).expect("checked in new");
        for &t in &self.options[k] {
            let saved = sums[t];
            sums[t].add(p.profit, p.valuation);
            tiers[t].push(id);
            self.recurse(k + 1, tiers, sums, f);
            tiers[t].pop();
            sums[t] = saved;
        }
    }
}

/// Exhaustive optimum with `num_tiers` tiers. Tier 1 draws from X1 and every
/// later tier from X2.
pub fn brute_force_optimal(catalog: &Catalog, num_tiers: usize) -> Result<SolveResult> {
    let tier_candidates: Vec<Vec<ProductId>> = (0..num_tiers)
        .map(|k| catalog.candidates(k.min(1)).to_vec())
        .collect();
    brute_force_with_candidates(catalog, &tier_candidates)
}

/// Exhaustive optimum with an explicit candidate set per tier.
pub fn brute_force_with_candidates(catalog: &Catalog, tier_candidates: &[Vec<ProductId>]) -> Result<SolveResult> {
    let e = Enumeration::new(catalog, tier_candidates)?;
    let w = tier_candidates.len();
    let mut best_value = 0.0;
    let mut best_tiers = vec![Vec::new(); w];
    e.run(w, &mut |tiers, sums| {
        let v = profit_from_sums(sums);
        if v > best_value {
            best_value = v;
            best_tiers = tiers.to_vec();
        }
    });
    let offer = TieredOffer::new(best_tiers).normalized();
    let min = |k: usize| {
        offer
            .tier(k)
            .iter()
            .map(|&id| catalog.get(id).map(|p| p.profit).unwrap_or(f64::INFINITY))
            .fold(f64::INFINITY, f64::min)
    };
    Ok(SolveResult {
        thresholds: (min(0), min(1)),
        offer,
        expected_profit: best_value,
        proven_optimal: true,
    })
}

/// All offers that respect the per-tier candidate sets and disjointness.
pub fn enumerate_offers(catalog: &Catalog, tier_candidates: &[Vec<ProductId>]) -> Result<Vec<TieredOffer>> {
    let e = Enumeration::new(catalog, tier_candidates)?;
    let mut out = Vec::new();
    e.run(tier_candidates.len(), &mut |tiers, _| out.push(TieredOffer::new(tiers.to_vec())));
    Ok(out)
}

fn profit_or_nan(catalog: &Catalog, id: ProductId) -> f64 {
    catalog.get(id).map(|p| p.profit).unwrap_or(f64::NAN)
}

/// Every member of `tier` earns at least as much as every candidate left out.
pub fn is_profit_ordered_set(tier: &[ProductId], candidate_set: &[ProductId], catalog: &Catalog) -> bool {
    let lowest_in = tier
        .iter()
        .map(|&id| profit_or_nan(catalog, id))
        .fold(f64::INFINITY, f64::min);
    candidate_set
        .iter()
        .filter(|id| !tier.contains(id))
        .all(|&id| profit_or_nan(catalog, id) <= lowest_in)
}

/// No tier-1 product earns less than a tier-2 candidate left out of the offer.
pub fn is_profit_ordered_by_tier(offer: &TieredOffer, catalog: &Catalog) -> bool {
    let s1 = offer.tier(0);
    let s2 = offer.tier(1);
    catalog
        .candidates_tier2()
        .iter()
        .filter(|j| !s1.contains(j) && !s2.contains(j))
        .all(|&j| {
            let rj = profit_or_nan(catalog, j);
            s1.iter().all(|&i| profit_or_nan(catalog, i) >= rj)
        })
}

/// Both tiers are profit-ordered within the candidates still available to
/// them: X1 minus the second tier, and X2 minus the first tier.
pub fn has_profit_ordered_tiers(offer: &TieredOffer, catalog: &Catalog) -> bool {
    let s1 = offer.tier(0);
    let s2 = offer.tier(1);
    let avail1: Vec<ProductId> = catalog.candidates_tier1().iter().copied().filter(|i| !s2.contains(i)).collect();
    let avail2: Vec<ProductId> = catalog.candidates_tier2().iter().copied().filter(|i| !s1.contains(i)).collect();
    is_profit_ordered_set(s1, &avail1, catalog) && is_profit_ordered_set(s2, &avail2, catalog)
}

/// Where a newly added product may land relative to an existing optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// The product stays out of the optimum.
    Excluded,
    /// The product cannot appear in any tier before this zero-based index.
    EarliestTier(usize),
}

/// Predicts the placement of a new product with profit `r_m` from the
/// expected profits of the suffix offers of the current optimum.
///
/// `suffix[j]` is the expected profit of `(S_j, ..., S_W)`. Equality with a
/// suffix value counts as not excluded.
pub fn new_product_tier_prediction(suffix: &[f64], r_m: f64) -> Placement {
    // Tier j is ruled out exactly when r_m < suffix[j].
    match (0..suffix.len()).find(|&j| r_m >= suffix[j]) {
        Some(j) => Placement::EarliestTier(j),
        None => Placement::Excluded,
    }
}
