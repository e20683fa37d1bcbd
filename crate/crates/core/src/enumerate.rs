//! Enumeration of item-to-bundle assignments.
//!
//! An assignment vector's rank is its value read as a base-`n` numeral, so
//! lexicographic order with the last position changing fastest is rank order.

use std::ops::ControlFlow;

/// Visits assignment vectors in `{0..base}^len` up to relabeling: each position may use
/// at most one more than the largest digit before it, so every set partition
/// into at most `base` blocks is visited once.
pub(crate) fn for_each_set_partition<F>(len: usize, base: usize, mut f: F)
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    fn go<F: FnMut(&[usize]) -> ControlFlow<()>>(
        digits: &mut Vec<usize>,
        len: usize,
        base: usize,
        used: usize,
        f: &mut F,
    ) -> ControlFlow<()> {
        if digits.len() == len {
            return f(digits);
        }
        for d in 0..base.min(used + 1) {
            digits.push(d);
            let flow = go(digits, len, base, used.max(d + 1), f);
            digits.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }
    if base > 0 {
        let _ = go(&mut Vec::with_capacity(len), len, base, 0, &mut f);
    }
}

/// The assignment vector with the given rank.
pub(crate) fn decode(mut rank: u64, base: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0; len];
    for d in digits.iter_mut().rev() {
        *d = (rank % base as u64) as usize;
        rank /= base as u64;
    }
    digits
}

/// Groups positions by digit: `bundles[b]` lists `items[p]` for each `p` with `digits[p] == b`.
pub(crate) fn bundles_of(digits: &[usize], items: &[usize], base: usize) -> Vec<Vec<usize>> {
    let mut bundles = vec![Vec::new(); base];
    for (&d, &j) in digits.iter().zip(items) {
        bundles[d].push(j);
    }
    bundles
}
