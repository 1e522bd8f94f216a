//! Oracles and fixtures shared by the integration suites and the
//! acceptance run. Every case returns `Err` with a readable reason instead
//! of panicking, so callers can either assert or tally.

#![allow(dead_code)]

pub mod brute;
pub mod gradients;
pub mod shapes;

/// Runs `case` for every seed and returns the first failure.
pub fn all_seeds(
    seeds: std::ops::Range<u64>,
    mut case: impl FnMut(u64) -> Result<(), String>,
) -> Result<(), String> {
    for s in seeds {
        case(s).map_err(|e| format!("seed {s}: {e}"))?;
    }
    Ok(())
}
