//! Exact binomial coefficients and lexicographic k-combination walking,
//! shared by the fault-set enumerator and its chunking layer.

/// C(n, k) computed exactly in u128. Saturates instead of overflowing;
/// callers guard against astronomically large plans before trusting sums.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Multiply before dividing keeps every intermediate value integral:
        // acc is C(n, i) here and (n - i) brings it to C(n, i+1) * (i+1).
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Initializes `idx` with the `rank`-th (0-based) k-combination of
/// {0, .., m-1} in lexicographic order. `idx.len()` selects k.
pub fn unrank_combination(m: usize, rank: u128, idx: &mut [usize]) {
    let k = idx.len();
    debug_assert!(rank < binomial(m as u64, k as u64));
    let mut rank = rank;
    let mut next = 0usize;
    for (p, slot) in idx.iter_mut().enumerate() {
        let remaining = k - p - 1;
        let mut a = next;
        loop {
            let tail = binomial((m - a - 1) as u64, remaining as u64);
            if rank < tail {
                break;
            }
            rank -= tail;
            a += 1;
        }
        *slot = a;
        next = a + 1;
    }
}

/// Advances `idx` to the lexicographic successor among k-combinations of
/// {0, .., m-1}. Returns false (leaving `idx` exhausted) after the last one.
pub fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    if k == 0 {
        return false;
    }
    let mut p = k;
    while p > 0 {
        p -= 1;
        if idx[p] != m - (k - p) {
            idx[p] += 1;
            for q in p + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_table() {
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 5), 1);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(5, 6), 0);
        assert_eq!(binomial(49, 6), 13_983_816);
        assert_eq!(binomial(56, 7), 231_917_400);
    }

    #[test]
    fn combination_walk_matches_unrank() {
        let (m, k) = (9, 4);
        let total = binomial(m as u64, k as u64);
        let mut idx: Vec<usize> = (0..k).collect();
        let mut rank: u128 = 0;
        loop {
            let mut fresh = vec![0usize; k];
            unrank_combination(m, rank, &mut fresh);
            assert_eq!(fresh, idx, "rank {rank}");
            rank += 1;
            if !next_combination(&mut idx, m) {
                break;
            }
        }
        assert_eq!(rank, total);
    }

    #[test]
    fn empty_combination_is_single_case() {
        let mut idx: [usize; 0] = [];
        assert!(!next_combination(&mut idx, 7));
        unrank_combination(7, 0, &mut idx);
    }
}
