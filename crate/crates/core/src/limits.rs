//! Size guards for exhaustive enumerations.

/// Default cap on enumerated trajectories, reaction functions, and states.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Environment variable that overrides [`DEFAULT_CAP`].
pub const CAP_ENV: &str = "IIHS_MAX_TRAJECTORIES";

/// The cap in effect: `IIHS_MAX_TRAJECTORIES` when set to a positive
/// integer, [`DEFAULT_CAP`] otherwise.
pub fn max_items() -> u64 {
    std::env::var(CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_CAP)
}

pub(crate) fn guard(what: &'static str, count: u64, cap: u64) -> crate::Result<()> {
    if count > cap {
        Err(crate::Error::SizeGuard {
            what,
            count: count.to_string(),
            cap,
        })
    } else {
        Ok(())
    }
}

/// `base^exp` or `None` on overflow.
pub(crate) fn checked_pow(base: u64, exp: u64) -> Option<u64> {
    let exp = u32::try_from(exp).ok()?;
    base.checked_pow(exp)
}
