use thiserror::Error;

use crate::catalog::ProductId;

/// Errors raised by catalog validation, choice evaluation, estimation and
/// simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown product id {0}")]
    UnknownProduct(ProductId),

    #[error("duplicate product id {0}")]
    DuplicateProduct(ProductId),

    #[error("product {id}: {field} = {value} is invalid ({reason})")]
    InvalidProduct {
        id: ProductId,
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("product {0} appears in more than one tier of the offer")]
    OverlappingTiers(ProductId),

    #[error("product {id} is not a candidate for tier {tier}")]
    NotCandidate { id: ProductId, tier: usize },

    #[error("outcome is inconsistent with the offer: {0}")]
    InconsistentOutcome(String),

    #[error("tier {tier} offer changed in the middle of epoch {label}")]
    OfferChangedMidEpoch { tier: usize, label: u64 },

    #[error("time step {t} is not after the previous step {previous}")]
    NonIncreasingTime { t: u64, previous: u64 },

    #[error("product {0} has never been offered in a completed epoch")]
    NeverOffered(ProductId),

    #[error("instance too large for exhaustive search: {size} candidates exceeds the cap of {cap}")]
    InstanceTooLarge { size: usize, cap: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
