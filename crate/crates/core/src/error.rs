use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dilation factor must be at least 2, got {0}")]
    InvalidDilation(u64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero mask")]
    ZeroMask,
    #[error("mask is not normalized (coefficient sum {0})")]
    NotNormalized(String),
    #[error("resource limit: {needed} coefficients needed, cap is {cap} (set SUBDIVKIT_MAX_COEFFS to raise)")]
    Resource { needed: u128, cap: u128 },
    #[error("no eigenvalue 1")]
    NoUnitEigenvalue,
    #[error("eigenvalue 1 not simple")]
    UnitEigenvalueNotSimple,
    #[error("eigenvector cannot be normalized to unit sum")]
    EigenvectorNotNormalizable,
    #[error("sum rules of order at least 1 required")]
    SumRulesRequired,
    #[error("{0} not admissible within search bounds")]
    NotAdmissible(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
