//! Interactive parity-exchange error correction.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

/// Result of one Cascade run on Bob's copy.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeOutcome {
    pub corrected: Vec<bool>,
    /// Parities Alice disclosed.
    pub leaked_bits: usize,
    pub corrections: usize,
}

/// Initial block size `⌈0.73/Q⌉`, capped at the string length.
pub fn first_block_size(qber: f64, n: usize) -> usize {
    let n = n.max(1);
    if !(qber > 0.0) {
        return n;
    }
    ((0.73 / qber).ceil() as usize).clamp(1, n)
}

struct Layout {
    // position in this pass → original index
    order: Vec<usize>,
    // original index → position in this pass
    position: Vec<usize>,
    block: usize,
}

impl Layout {
    fn new(order: Vec<usize>, block: usize) -> Self {
        let mut position = vec![0; order.len()];
        for (p, &i) in order.iter().enumerate() {
            position[i] = p;
        }
        Layout { order, position, block }
    }

    fn blocks(&self) -> usize {
        self.order.len().div_ceil(self.block)
    }

    fn span(&self, b: usize) -> (usize, usize) {
        (b * self.block, ((b + 1) * self.block).min(self.order.len()))
    }

    fn parity(&self, bits: &[bool], lo: usize, hi: usize) -> bool {
        self.order[lo..hi].iter().fold(false, |acc, &i| acc ^ bits[i])
    }
}

/// Corrects `bob` toward `alice` with `passes` Cascade passes. Block sizes
/// start at [`first_block_size`] and double each pass; passes after the first
/// use a fresh random permutation. Every parity Alice reveals is counted.
pub fn cascade<R: Rng + ?Sized>(
    alice: &[bool],
    bob: &[bool],
    qber: f64,
    passes: usize,
    rng: &mut R,
) -> CascadeOutcome {
    assert_eq!(alice.len(), bob.len(), "cascade on strings of different length");
    let n = alice.len();
    let mut bob = bob.to_vec();
    let mut leaked = 0;
    let mut corrections = 0;
    if n == 0 {
        return CascadeOutcome { corrected: bob, leaked_bits: 0, corrections: 0 };
    }
    let k1 = first_block_size(qber, n);
    let mut layouts: Vec<Layout> = Vec::with_capacity(passes);
    let mut odd: Vec<BTreeSet<usize>> = Vec::with_capacity(passes);

    for pass in 0..passes {
        let mut order: Vec<usize> = (0..n).collect();
        if pass > 0 {
            order.shuffle(rng);
        }
        let block = k1.saturating_mul(1 << pass.min(40)).min(n);
        let layout = Layout::new(order, block);
        let mut mismatched = BTreeSet::new();
        for b in 0..layout.blocks() {
            let (lo, hi) = layout.span(b);
            leaked += 1;
            if layout.parity(alice, lo, hi) != layout.parity(&bob, lo, hi) {
                mismatched.insert(b);
            }
        }
        layouts.push(layout);
        odd.push(mismatched);

        // Each flip toggles the error parity of one block in every pass so
        // far, which can expose errors hidden in earlier passes.
        while let Some((q, b)) =
            odd.iter().enumerate().find_map(|(q, set)| set.first().map(|&b| (q, b)))
        {
            let layout = &layouts[q];
            let (mut lo, mut hi) = layout.span(b);
            while hi - lo > 1 {
                let mid = lo + (hi - lo).div_ceil(2);
                leaked += 1;
                if layout.parity(alice, lo, mid) != layout.parity(&bob, lo, mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let flipped = layout.order[lo];
            bob[flipped] = !bob[flipped];
            corrections += 1;
            for (l, set) in layouts.iter().zip(odd.iter_mut()) {
                let block = l.position[flipped] / l.block;
                if !set.remove(&block) {
                    set.insert(block);
                }
            }
        }
    }
    CascadeOutcome { corrected: bob, leaked_bits: leaked, corrections }
}
