use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::alphabet::Inventory;
use super::key::DigramProbability;
use super::CipherError;

fn binomial(n: usize, k: usize) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `pool! / (pool - draws)!`, the number of injective assignments.
fn falling_factorial(pool: usize, draws: usize) -> BigUint {
    if draws > pool {
        return BigUint::zero();
    }
    ((pool - draws + 1)..=pool).fold(BigUint::one(), |acc, x| acc * BigUint::from(x))
}

/// Number of distinct keys [`generate_key`](super::generate_key) can emit
/// for `inventory` under one scheme.
///
/// Every subset pair whose code-point pool covers the cleartext alphabet is
/// reachable, every injective mapping into that pool is reachable, and the
/// digram probability is one of four values recorded in the key.
pub fn key_space_size(inventory: &Inventory) -> Result<BigUint, CipherError> {
    let needed = inventory.clear.len();
    let (m, n) = (inventory.consonants.len(), inventory.vowels.len());
    let mut total = BigUint::zero();
    let mut best = 0;
    for a in 0..=m {
        for b in 0..=n {
            let pool = a * b + (m - a) + (n - b);
            best = best.max(pool);
            if pool < needed {
                continue;
            }
            total += binomial(m, a) * binomial(n, b) * falling_factorial(pool, needed);
        }
    }
    if total.is_zero() {
        return Err(CipherError::InsufficientCodePoints {
            needed,
            available: best,
        });
    }
    Ok(total * BigUint::from(DigramProbability::ALL.len()))
}
