use thiserror::Error;

/// Failure modes shared by every module.
///
/// The variants map one-to-one onto the CLI exit codes: domain and
/// precondition errors are caller mistakes, resource errors mean a budget or
/// size limit could not be met.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {x}")))
    }
}

pub(crate) fn ensure_nonnegative(name: &str, x: f64) -> Result<()> {
    ensure_finite(name, x)?;
    if x < 0.0 {
        return Err(Error::Precondition(format!("{name} must be nonnegative, got {x}")));
    }
    Ok(())
}
