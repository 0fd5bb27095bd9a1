//! Effective-number (Hill) diversities of a vector of category counts.
//!
//! Counts are turned into probabilities `p_i = c_i / sum(c)`. An all-zero or
//! empty vector has diversity 0 by convention; any other vector has
//! diversity between 1 and the number of nonzero categories.

use crate::error::{Error, Result};

/// Orders within this distance of 1 are evaluated as the Shannon limit.
pub const SHANNON_ORDER_TOLERANCE: f64 = 1e-9;

fn total(counts: &[u64]) -> u64 {
    counts.iter().sum()
}

fn probabilities(counts: &[u64]) -> impl Iterator<Item = f64> + '_ {
    let n = total(counts) as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(move |&c| c as f64 / n)
}

/// Shannon entropy in nats, with `0 ln 0 = 0`. Zero for an empty vector.
pub fn shannon_entropy(counts: &[u64]) -> f64 {
    if total(counts) == 0 {
        return 0.0;
    }
    -probabilities(counts).map(|p| p * p.ln()).sum::<f64>()
}

/// `exp(H)`, the effective number of equally likely categories.
pub fn shannon_diversity(counts: &[u64]) -> f64 {
    if total(counts) == 0 {
        return 0.0;
    }
    shannon_entropy(counts).exp()
}

/// Hill number of order `q`: `(sum p^q)^(1/(1-q))` over nonzero categories,
/// the support size at `q = 0` and the Shannon diversity at `q = 1`.
pub fn renyi_diversity(counts: &[u64], q: f64) -> Result<f64> {
    if !(q >= 0.0) || q.is_infinite() {
        return Err(Error::domain(format!(
            "diversity order must be finite and >= 0, got {q}"
        )));
    }
    if total(counts) == 0 {
        return Ok(0.0);
    }
    if q == 0.0 {
        return Ok(counts.iter().filter(|&&c| c > 0).count() as f64);
    }
    let gap = q - 1.0;
    if gap.abs() <= SHANNON_ORDER_TOLERANCE {
        return Ok(shannon_diversity(counts));
    }
    // sum p^q - 1 = sum p (p^(q-1) - 1); expm1/ln_1p keep precision near q = 1.
    // Far from 1 the direct sum is better: 1 + excess cancels when sum p^q is small.
    let excess: f64 = probabilities(counts)
        .map(|p| p * (gap * p.ln()).exp_m1())
        .sum();
    let log_sum = if excess.abs() < 0.5 {
        excess.ln_1p()
    } else {
        probabilities(counts).map(|p| p.powf(q)).sum::<f64>().ln()
    };
    Ok((log_sum / -gap).exp())
}
