//! Products, catalogs with per-tier candidate sets, and tiered offers.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current catalog file schema version.
pub const CATALOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductId(pub u32);

impl fmt::Display for ProductId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for ProductId {
    fn from(v: u32) -> Self {
        ProductId(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Product {
    pub id: ProductId,
    pub profit: f64,
    pub valuation: f64,
    #[serde(default)]
    pub launch_time: u64,
}

impl Product {
    pub fn new(id: u32, profit: f64, valuation: f64) -> Self {
        Product {
            id: ProductId(id),
            profit,
            valuation,
            launch_time: 0,
        }
    }

    pub fn launched_at(mut self, t: u64) -> Self {
        self.launch_time = t;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.profit.is_finite() || self.profit < 0.0 {
            return Err(Error::InvalidProduct {
                id: self.id,
                field: "profit",
                value: self.profit,
                reason: "must be finite and non-negative",
            });
        }
        // v = 1 is accepted: the two-product example in the literature uses it.
        if !self.valuation.is_finite() || !(0.0..=1.0).contains(&self.valuation) {
            return Err(Error::InvalidProduct {
                id: self.id,
                field: "valuation",
                value: self.valuation,
                reason: "must lie in [0, 1]",
            });
        }
        Ok(())
    }
}

/// A validated set of products plus the candidate sets X1 and X2.
///
/// Candidate lists keep their input order and are deduplicated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CatalogFile", into = "CatalogFile")]
pub struct Catalog {
    products: Vec<Product>,
    candidates: [Vec<ProductId>; 2],
    #[serde(skip)]
    index: HashMap<ProductId, usize>,
}

/// On-disk catalog record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    pub schema_version: u32,
    pub products: Vec<Product>,
    pub candidates_tier1: Vec<ProductId>,
    pub candidates_tier2: Vec<ProductId>,
}

impl TryFrom<CatalogFile> for Catalog {
    type Error = Error;

    fn try_from(f: CatalogFile) -> Result<Self> {
        if f.schema_version != CATALOG_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported catalog schema_version {} (expected {})",
                f.schema_version, CATALOG_SCHEMA_VERSION
            )));
        }
        Catalog::new(f.products, f.candidates_tier1, f.candidates_tier2)
    }
}

impl From<Catalog> for CatalogFile {
    fn from(c: Catalog) -> Self {
        let [x1, x2] = c.candidates;
        CatalogFile {
            schema_version: CATALOG_SCHEMA_VERSION,
            products: c.products,
            candidates_tier1: x1,
            candidates_tier2: x2,
        }
    }
}

fn dedup_keep_order(ids: Vec<ProductId>) -> Vec<ProductId> {
    let mut seen = BTreeSet::new();
    ids.into_iter().filter(|id| seen.insert(*id)).collect()
}

impl Catalog {
    pub fn new(
        products: Vec<Product>,
        candidates_tier1: Vec<ProductId>,
        candidates_tier2: Vec<ProductId>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(products.len());
        for (k, p) in products.iter().enumerate() {
            p.validate()?;
            if index.insert(p.id, k).is_some() {
                return Err(Error::DuplicateProduct(p.id));
            }
        }
        for id in candidates_tier1.iter().chain(&candidates_tier2) {
            if !index.contains_key(id) {
                return Err(Error::UnknownProduct(*id));
            }
        }
        Ok(Catalog {
            products,
            candidates: [
                dedup_keep_order(candidates_tier1),
                dedup_keep_order(candidates_tier2),
            ],
            index,
        })
    }

    /// Catalog where every product is a candidate for both tiers.
    pub fn fully_overlapping(products: Vec<Product>) -> Result<Self> {
        let ids: Vec<ProductId> = products.iter().map(|p| p.id).collect();
        Catalog::new(products, ids.clone(), ids)
    }

    pub fn empty() -> Self {
        Catalog {
            products: Vec::new(),
            candidates: [Vec::new(), Vec::new()],
            index: HashMap::new(),
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serialization cannot fail")
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn contains(&self, id: ProductId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: ProductId) -> Result<&Product> {
        self.index
            .get(&id)
            .map(|&k| &self.products[k])
            .ok_or(Error::UnknownProduct(id))
    }

    /// Candidate set for a zero-based tier index (0 = X1, 1 = X2).
    pub fn candidates(&self, tier: usize) -> &[ProductId] {
        &self.candidates[tier.min(1)]
    }

    pub fn candidates_tier1(&self) -> &[ProductId] {
        &self.candidates[0]
    }

    pub fn candidates_tier2(&self) -> &[ProductId] {
        &self.candidates[1]
    }

    pub fn is_candidate(&self, tier: usize, id: ProductId) -> bool {
        self.candidates(tier).contains(&id)
    }

    /// Products launched at or before `t`, with candidate sets restricted to them.
    pub fn launched_by(&self, t: u64) -> Catalog {
        self.filter(|p| p.launch_time <= t)
    }

    pub fn filter(&self, keep: impl Fn(&Product) -> bool) -> Catalog {
        let products: Vec<Product> = self.products.iter().copied().filter(|p| keep(p)).collect();
        let index: HashMap<ProductId, usize> =
            products.iter().enumerate().map(|(k, p)| (p.id, k)).collect();
        let restrict = |ids: &[ProductId]| -> Vec<ProductId> {
            ids.iter().copied().filter(|id| index.contains_key(id)).collect()
        };
        Catalog {
            candidates: [restrict(&self.candidates[0]), restrict(&self.candidates[1])],
            products,
            index,
        }
    }

    /// Same catalog with valuations replaced by `f(product)`.
    ///
    /// Replacement values are clamped into `[0, 1]`.
    pub fn with_valuations(&self, f: impl Fn(&Product) -> f64) -> Catalog {
        let mut out = self.clone();
        for p in &mut out.products {
            p.valuation = f(p).clamp(0.0, 1.0);
        }
        out
    }

    /// Adds a product and appends it to the candidate sets of the given
    /// zero-based tiers.
    pub fn with_product(&self, product: Product, tiers: &[usize]) -> Result<Catalog> {
        let mut products = self.products.clone();
        products.push(product);
        let mut c = self.candidates.clone();
        for &k in tiers {
            c[k.min(1)].push(product.id);
        }
        let [x1, x2] = c;
        Catalog::new(products, x1, x2)
    }

    pub fn max_profit(&self) -> f64 {
        self.products.iter().map(|p| p.profit).fold(0.0, f64::max)
    }
}

/// An ordered list of tiers; `tiers[0]` is the priority tier.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TieredOffer {
    pub tiers: Vec<Vec<ProductId>>,
}

impl TieredOffer {
    pub fn empty() -> Self {
        TieredOffer {
            tiers: vec![Vec::new(), Vec::new()],
        }
    }

    pub fn new(tiers: Vec<Vec<ProductId>>) -> Self {
        TieredOffer { tiers }
    }

    pub fn two_tier(s1: Vec<ProductId>, s2: Vec<ProductId>) -> Self {
        TieredOffer { tiers: vec![s1, s2] }
    }

    pub fn from_ids(tiers: &[&[u32]]) -> Self {
        TieredOffer {
            tiers: tiers
                .iter()
                .map(|t| t.iter().map(|&i| ProductId(i)).collect())
                .collect(),
        }
    }

    /// Tier `k` (zero-based); empty when the offer has fewer tiers.
    pub fn tier(&self, k: usize) -> &[ProductId] {
        self.tiers.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_tiers(&self) -> usize {
        self.tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.iter().all(Vec::is_empty)
    }

    pub fn contains(&self, id: ProductId) -> bool {
        self.tiers.iter().any(|t| t.contains(&id))
    }

    /// Zero-based tier holding `id`, if any.
    pub fn tier_of(&self, id: ProductId) -> Option<usize> {
        self.tiers.iter().position(|t| t.contains(&id))
    }

    pub fn ids(&self) -> impl Iterator<Item = ProductId> + '_ {
        self.tiers.iter().flatten().copied()
    }

    /// Every tier sorted by id, trailing empty tiers beyond the second removed.
    pub fn normalized(&self) -> TieredOffer {
        let mut tiers: Vec<Vec<ProductId>> = self
            .tiers
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.sort_unstable();
                t
            })
            .collect();
        while tiers.len() < 2 {
            tiers.push(Vec::new());
        }
        while tiers.len() > 2 && tiers.last().is_some_and(Vec::is_empty) {
            tiers.pop();
        }
        TieredOffer { tiers }
    }

    /// Checks that all ids exist and tiers are pairwise disjoint.
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in self.ids() {
            catalog.get(id)?;
            if !seen.insert(id) {
                return Err(Error::OverlappingTiers(id));
            }
        }
        Ok(())
    }

    /// As `validate`, and every product of tier k must be in candidate set k.
    pub fn validate_candidates(&self, catalog: &Catalog) -> Result<()> {
        self.validate(catalog)?;
        for (k, tier) in self.tiers.iter().enumerate() {
            if let Some(&id) = tier.iter().find(|&&id| !catalog.is_candidate(k, id)) {
                return Err(Error::NotCandidate { id, tier: k + 1 });
            }
        }
        Ok(())
    }
}

impl fmt::Display for TieredOffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, t) in self.tiers.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            let ids: Vec<String> = t.iter().map(ToString::to_string).collect();
            write!(f, "{{{}}}", ids.join(","))?;
        }
        write!(f, ")")
    }
}

/// Space-separated ids of one tier, as written to trace files.
pub fn format_tier(ids: &[ProductId]) -> String {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_products() {
        let bad_v = Catalog::fully_overlapping(vec![Product::new(1, 1.0, 1.5)]);
        assert!(matches!(bad_v, Err(Error::InvalidProduct { field: "valuation", .. })));
        let bad_r = Catalog::fully_overlapping(vec![Product::new(1, -1.0, 0.5)]);
        assert!(matches!(bad_r, Err(Error::InvalidProduct { field: "profit", .. })));
        let dup = Catalog::fully_overlapping(vec![Product::new(1, 1.0, 0.5), Product::new(1, 2.0, 0.1)]);
        assert_eq!(dup.unwrap_err(), Error::DuplicateProduct(ProductId(1)));
    }

    #[test]
    fn unknown_candidate_rejected() {
        let r = Catalog::new(vec![Product::new(1, 1.0, 0.5)], vec![ProductId(2)], vec![]);
        assert_eq!(r.unwrap_err(), Error::UnknownProduct(ProductId(2)));
    }

    #[test]
    fn json_round_trip() {
        let c = Catalog::new(
            vec![Product::new(1, 10.0, 0.1), Product::new(2, 1.0, 1.0).launched_at(5)],
            vec![ProductId(1)],
            vec![ProductId(1), ProductId(2)],
        )
        .unwrap();
        let back = Catalog::from_json(&c.to_json()).unwrap();
        assert_eq!(back.products(), c.products());
        assert_eq!(back.candidates_tier2(), c.candidates_tier2());
        assert_eq!(back.get(ProductId(2)).unwrap().launch_time, 5);
    }

    #[test]
    fn json_rejects_unknown_fields_and_versions() {
        let extra = r#"{"schema_version":1,"products":[],"candidates_tier1":[],"candidates_tier2":[],"x":1}"#;
        assert!(Catalog::from_json(extra).is_err());
        let version = r#"{"schema_version":9,"products":[],"candidates_tier1":[],"candidates_tier2":[]}"#;
        assert!(Catalog::from_json(version).is_err());
    }

    #[test]
    fn launched_by_restricts_candidates() {
        let c = Catalog::fully_overlapping(vec![
            Product::new(1, 1.0, 0.1),
            Product::new(2, 1.0, 0.1).launched_at(10),
        ])
        .unwrap();
        let early = c.launched_by(9);
        assert_eq!(early.len(), 1);
        assert_eq!(early.candidates_tier2(), &[ProductId(1)]);
        assert_eq!(c.launched_by(10).len(), 2);
    }

    #[test]
    fn offer_validation() {
        let c = Catalog::fully_overlapping(vec![Product::new(1, 1.0, 0.1), Product::new(2, 1.0, 0.1)])
            .unwrap();
        assert!(TieredOffer::from_ids(&[&[1], &[2]]).validate(&c).is_ok());
        assert_eq!(
            TieredOffer::from_ids(&[&[1], &[1]]).validate(&c).unwrap_err(),
            Error::OverlappingTiers(ProductId(1))
        );
        assert_eq!(
            TieredOffer::from_ids(&[&[3], &[]]).validate(&c).unwrap_err(),
            Error::UnknownProduct(ProductId(3))
        );
    }

    #[test]
    fn candidate_validation() {
        let c = Catalog::new(
            vec![Product::new(1, 1.0, 0.1), Product::new(2, 1.0, 0.1)],
            vec![ProductId(1)],
            vec![ProductId(2)],
        )
        .unwrap();
        assert!(TieredOffer::from_ids(&[&[1], &[2]]).validate_candidates(&c).is_ok());
        assert!(TieredOffer::from_ids(&[&[2], &[1]]).validate(&c).is_ok());
        assert_eq!(
            TieredOffer::from_ids(&[&[], &[1]]).validate_candidates(&c).unwrap_err(),
            Error::NotCandidate { id: ProductId(1), tier: 2 }
        );
    }
}
