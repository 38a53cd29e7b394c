//! Resource caps shared by every enumeration and dense-state routine.

use std::sync::OnceLock;

use crate::error::{QwkError, Result};

/// Default cap on any dense Hilbert-space dimension (2¹⁴).
pub const DEFAULT_MAX_DIM: usize = 1 << 14;
/// Cap on exhaustive word enumerations, |A|ⁿ ≤ 2²⁴.
pub const MAX_ENUM: usize = 1 << 24;
/// Classical output spaces up to this size are evaluated exactly.
pub const EXACT_OUTPUT_LIMIT: usize = 4096;
/// Largest matrix handed to a dense eigensolver inside loops.
pub const DENSE_LIMIT: usize = 1024;
/// Classical output spaces enumerated for exact leakage.
pub const LEAKAGE_ENUM_LIMIT: usize = 1 << 16;

/// Dimension cap, overridable through `QWK_CAP_DIM`.
pub fn max_dim() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("QWK_CAP_DIM")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&v| v > 0)
            .unwrap_or(DEFAULT_MAX_DIM)
    })
}

pub fn check_dim(what: &str, dim: usize) -> Result<()> {
    if dim > max_dim() {
        return Err(QwkError::CapExceeded(format!(
            "{what} has dimension {dim} > cap {}",
            max_dim()
        )));
    }
    Ok(())
}

/// `base^n` with overflow and cap checking.
pub fn checked_pow(what: &str, base: usize, n: usize, cap: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..n {
        acc = acc
            .checked_mul(base)
            .filter(|&v| v <= cap)
            .ok_or_else(|| QwkError::CapExceeded(format!("{what}: {base}^{n} exceeds {cap}")))?;
    }
    Ok(acc)
}
