//! Privacy amplification by random Hankel-matrix hashing.

use rand::Rng;

/// Bits withheld on top of every disclosed bit.
pub const SAFETY_MARGIN: usize = 64;

fn pack(bits: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

/// Final key length `⌊secret_entropy⌋ − leaked − 64`, never more than the
/// input length and zero when that is not positive.
pub fn amplified_length(n_bits: usize, secret_entropy: f64, leaked_bits: usize) -> usize {
    if !(secret_entropy > 0.0) {
        return 0;
    }
    let budget = secret_entropy.floor() as i128 - leaked_bits as i128 - SAFETY_MARGIN as i128;
    budget.clamp(0, n_bits as i128) as usize
}

/// Compresses `bits` to [`amplified_length`] bits with a seeded `ℓ × n`
/// Hankel matrix, `out_i = ⊕_j r_{i+j} b_j`. The matrix seed is drawn from
/// `rng`, which stands for public randomness both parties share.
pub fn privacy_amplify<R: Rng + ?Sized>(
    bits: &[bool],
    secret_entropy: f64,
    leaked_bits: usize,
    rng: &mut R,
) -> Vec<bool> {
    let n = bits.len();
    let len = amplified_length(n, secret_entropy, leaked_bits);
    if len == 0 {
        return Vec::new();
    }
    let input = pack(bits);
    let seed: Vec<u64> = (0..(n + len).div_ceil(64) + 1).map(|_| rng.gen()).collect();
    (0..len)
        .map(|i| {
            let (w, s) = (i / 64, i % 64);
            let mut acc = 0u64;
            for (k, word) in input.iter().enumerate() {
                let window = if s == 0 {
                    seed[w + k]
                } else {
                    (seed[w + k] >> s) | (seed[w + k + 1] << (64 - s))
                };
                acc ^= window & word;
            }
            acc.count_ones() % 2 == 1
        })
        .collect()
}

/// Frequency test: `|#ones/n − 1/2| < 3/√n`.
pub fn monobit_passes(bits: &[bool]) -> bool {
    if bits.is_empty() {
        return false;
    }
    let n = bits.len() as f64;
    let ones = bits.iter().filter(|&&b| b).count() as f64;
    (ones / n - 0.5).abs() < 3.0 / n.sqrt()
}
