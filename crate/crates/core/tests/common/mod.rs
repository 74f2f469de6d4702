//! Test-only oracles, independent of the library's dynamic programming.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

/// Minimum unit-cost edit script length found by enumerating every
/// monotone pairing of reference and hypothesis positions.
///
/// A pairing of k reference positions with k hypothesis positions (both in
/// increasing order) is an alignment: paired positions are matches or
/// substitutions, the rest are deletions or insertions. Its cost is
/// `(m - k) + (n - k) + mismatches`.
pub fn brute_force_edit_cost<T: PartialEq>(reference: &[T], hyp: &[T]) -> usize {
    let (m, n) = (reference.len(), hyp.len());
    assert!(m <= 16 && n <= 16, "brute force is exponential");
    let mut hyp_masks: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for mask in 0u32..(1 << n) {
        hyp_masks[mask.count_ones() as usize].push(mask);
    }
    let mut best = m + n;
    for rmask in 0u32..(1 << m) {
        let k = rmask.count_ones() as usize;
        if k > n {
            continue;
        }
        let rpos: Vec<usize> = (0..m).filter(|i| rmask >> i & 1 == 1).collect();
        for &hmask in &hyp_masks[k] {
            let hpos = (0..n).filter(|j| hmask >> j & 1 == 1);
            let mismatches = rpos
                .iter()
                .zip(hpos)
                .filter(|(&i, j)| reference[i] != hyp[*j])
                .count();
            best = best.min((m - k) + (n - k) + mismatches);
        }
    }
    best
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        assert_eq!(brute_force_edit_cost::<u8>(&[], &[]), 0);
        assert_eq!(brute_force_edit_cost(b"abc", b""), 3);
        assert_eq!(brute_force_edit_cost(b"kitten", b"sitting"), 3);
        assert_eq!(brute_force_edit_cost(b"abcd", b"acde"), 2);
    }
}
