//! Word-level helpers on rows of `u64` (bit `x` lives in word `x / 64`).

/// Sets bits `x0..=x1`.
pub fn fill_range(row: &mut [u64], x0: usize, x1: usize) {
    if x1 < x0 {
        return;
    }
    let (w0, w1) = (x0 / 64, x1 / 64);
    let lo = !0u64 << (x0 % 64);
    let hi = !0u64 >> (63 - x1 % 64);
    if w0 == w1 {
        row[w0] |= lo & hi;
        return;
    }
    row[w0] |= lo;
    for w in &mut row[w0 + 1..w1] {
        *w = !0;
    }
    row[w1] |= hi;
}

/// `dst |= src << s` (towards higher indices); bits pushed past `dst` are dropped.
pub fn or_shifted(dst: &mut [u64], src: &[u64], s: usize) {
    let (q, b) = (s / 64, s % 64);
    let n = dst.len();
    if q >= n {
        return;
    }
    if b == 0 {
        for (d, &v) in dst[q..].iter_mut().zip(src) {
            *d |= v;
        }
        return;
    }
    let m = src.len();
    for i in q..n {
        let j = i - q;
        let mut v = if j < m { src[j] << b } else { 0 };
        if j >= 1 && j - 1 < m {
            v |= src[j - 1] >> (64 - b);
        }
        dst[i] |= v;
    }
}

/// `dst |= src >> s` (towards lower indices).
pub fn or_shifted_down(dst: &mut [u64], src: &[u64], s: usize) {
    let (q, b) = (s / 64, s % 64);
    let m = src.len();
    for (i, d) in dst.iter_mut().enumerate() {
        let j = i + q;
        if j >= m {
            break;
        }
        let mut v = src[j] >> b;
        if b != 0 && j + 1 < m {
            v |= src[j + 1] << (64 - b);
        }
        *d |= v;
    }
}

/// Number of set bits of `a & (b shifted by s)` where positive `s` moves `b`
/// towards higher indices.
pub fn and_count_shifted(a: &[u64], b: &[u64], s: i64, scratch: &mut Vec<u64>) -> u64 {
    scratch.clear();
    scratch.resize(a.len(), 0);
    if s >= 0 {
        or_shifted(scratch, b, s as usize);
    } else {
        or_shifted_down(scratch, b, (-s) as usize);
    }
    a.iter()
        .zip(scratch.iter())
        .map(|(x, y)| (x & y).count_ones() as u64)
        .sum()
}

/// Indices of the set bits, ascending.
pub fn ones(row: &[u64]) -> impl Iterator<Item = usize> + '_ {
    row.iter().enumerate().flat_map(|(i, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            if w == 0 {
                return None;
            }
            let t = w.trailing_zeros() as usize;
            w &= w - 1;
            Some(i * 64 + t)
        })
    })
}

/// Inclusive prefix counts: `out[x] = popcount(row[0..x])` for `x ∈ 0..=len`.
pub fn prefix_counts(row: &[u64], len: usize, out: &mut Vec<u32>) {
    out.clear();
    out.reserve(len + 1);
    let mut acc = 0u32;
    out.push(0);
    for x in 0..len {
        acc += ((row[x / 64] >> (x % 64)) & 1) as u32;
        out.push(acc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_shift(src: &[u64], s: i64, n: usize) -> Vec<u64> {
        let mut out = vec![0u64; n];
        for x in ones(src) {
            let y = x as i64 + s;
            if y >= 0 && (y as usize) < n * 64 {
                out[y as usize / 64] |= 1 << (y as usize % 64);
            }
        }
        out
    }

    #[test]
    fn shifts_match_naive() {
        let src = [0x8000_0000_0000_0001u64, 0xdead_beef_0000_ffff, 0x1];
        for s in [0usize, 1, 5, 63, 64, 65, 130, 200] {
            let mut d = vec![0u64; 4];
            or_shifted(&mut d, &src, s);
            assert_eq!(d, naive_shift(&src, s as i64, 4), "up {s}");
            let mut d = vec![0u64; 3];
            or_shifted_down(&mut d, &src, s);
            assert_eq!(d, naive_shift(&src, -(s as i64), 3), "down {s}");
        }
    }

    #[test]
    fn fill_and_prefix() {
        let mut row = vec![0u64; 3];
        fill_range(&mut row, 60, 130);
        assert_eq!(ones(&row).count(), 71);
        fill_range(&mut row, 3, 3);
        let mut p = Vec::new();
        prefix_counts(&row, 192, &mut p);
        assert_eq!(p[192], 72);
        assert_eq!(p[4], 1);
    }
}
