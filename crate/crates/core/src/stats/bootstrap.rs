//! Block bootstrap index resamplers.
//!
//! Two schemes are provided: the circular block bootstrap (fixed block
//! length, wrap-around) and the stationary bootstrap of Politis-Romano
//! (geometric block lengths). Both draw full-length index vectors so that
//! multivariate series can be resampled jointly by row.

use crate::error::Error;
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Circular block bootstrap: fixed-length blocks with wrap-around starts.
pub fn circular_block_indices(t: usize, block_length: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    assert!(t > 0 && block_length >= 1);
    let mut idx = Vec::with_capacity(t);
    while idx.len() < t {
        let start = rng.gen_range(0..t);
        for k in 0..block_length {
            if idx.len() == t {
                break;
            }
            idx.push((start + k) % t);
        }
    }
    idx
}

/// Stationary bootstrap: blocks restart with probability `1/expected_block`.
pub fn stationary_indices(t: usize, expected_block: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    assert!(t > 0 && expected_block >= 1.0);
    let restart_p = 1.0 / expected_block;
    let mut idx = Vec::with_capacity(t);
    let mut cur = rng.gen_range(0..t);
    idx.push(cur);
    while idx.len() < t {
        if rng.gen::<f64>() < restart_p {
            cur = rng.gen_range(0..t);
        } else {
            cur = (cur + 1) % t;
        }
        idx.push(cur);
    }
    idx
}

/// Validate common bootstrap parameters.
pub fn validate(replications: usize, block_length: usize) -> Result<()> {
    if replications < 100 {
        return Err(Error::config(format!(
            "bootstrap needs at least 100 replications, got {replications}"
        )));
    }
    if block_length < 1 {
        return Err(Error::config("block length must be at least 1"));
    }
    Ok(())
}
