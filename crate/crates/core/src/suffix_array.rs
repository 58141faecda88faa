//! Linear-time suffix array construction (SA-IS) and LCP arrays.

const NONE: usize = usize::MAX;

/// Suffix array of `s`, whose symbols must all be `<= upper`.
///
/// Induced sorting: classify suffixes as S/L type, sort the LMS substrings by
/// induction, name them, recurse on the reduced string when names collide,
/// and induce the final order from the sorted LMS suffixes.
pub fn suffix_array(s: &[u32], upper: u32) -> Vec<usize> {
    debug_assert!(s.iter().all(|&c| c <= upper));
    sa_is(s, upper as usize)
}

fn sa_is(s: &[u32], upper: usize) -> Vec<usize> {
    let n = s.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![0],
        2 => return if s[0] < s[1] { vec![0, 1] } else { vec![1, 0] },
        _ => {}
    }

    let mut ls = vec![false; n];
    for i in (0..n - 1).rev() {
        ls[i] = if s[i] == s[i + 1] {
            ls[i + 1]
        } else {
            s[i] < s[i + 1]
        };
    }

    // Bucket starts for L-type (sum_l) and S-type (sum_s) suffixes.
    let mut sum_l = vec![0usize; upper + 1];
    let mut sum_s = vec![0usize; upper + 1];
    for i in 0..n {
        let c = s[i] as usize;
        if !ls[i] {
            sum_s[c] += 1;
        } else {
            sum_l[c + 1] += 1;
        }
    }
    for i in 0..=upper {
        sum_s[i] += sum_l[i];
        if i < upper {
            sum_l[i + 1] += sum_s[i];
        }
    }

    let induce = |lms: &[usize], sa: &mut [usize]| {
        sa.fill(NONE);
        let mut buf = sum_s.clone();
        for &d in lms {
            if d == n {
                continue;
            }
            let c = s[d] as usize;
            sa[buf[c]] = d;
            buf[c] += 1;
        }
        buf.copy_from_slice(&sum_l);
        let last = s[n - 1] as usize;
        sa[buf[last]] = n - 1;
        buf[last] += 1;
        for i in 0..n {
            let v = sa[i];
            if v != NONE && v >= 1 && !ls[v - 1] {
                let c = s[v - 1] as usize;
                sa[buf[c]] = v - 1;
                buf[c] += 1;
            }
        }
        buf.copy_from_slice(&sum_l);
        for i in (0..n).rev() {
            let v = sa[i];
            if v != NONE && v >= 1 && ls[v - 1] {
                let c = s[v - 1] as usize + 1;
                buf[c] -= 1;
                sa[buf[c]] = v - 1;
            }
        }
    };

    let mut lms_map = vec![NONE; n + 1];
    let mut lms = Vec::new();
    for i in 1..n {
        if !ls[i - 1] && ls[i] {
            lms_map[i] = lms.len();
            lms.push(i);
        }
    }
    let m = lms.len();

    let mut sa = vec![NONE; n];
    induce(&lms, &mut sa);

    if m > 0 {
        let mut sorted_lms: Vec<usize> = sa.iter().copied().filter(|&v| lms_map[v] != NONE).collect();
        let mut reduced = vec![0u32; m];
        let mut names = 0usize;
        reduced[lms_map[sorted_lms[0]]] = 0;
        for i in 1..m {
            let mut l = sorted_lms[i - 1];
            let mut r = sorted_lms[i];
            let end_l = if lms_map[l] + 1 < m { lms[lms_map[l] + 1] } else { n };
            let end_r = if lms_map[r] + 1 < m { lms[lms_map[r] + 1] } else { n };
            let mut same = true;
            if end_l - l != end_r - r {
                same = false;
            } else {
                while l < end_l {
                    if s[l] != s[r] {
                        break;
                    }
                    l += 1;
                    r += 1;
                }
                if l == n || s[l] != s[r] {
                    same = false;
                }
            }
            if !same {
                names += 1;
            }
            reduced[lms_map[sorted_lms[i]]] = names as u32;
        }
        let reduced_sa = sa_is(&reduced, names);
        for (slot, &r) in sorted_lms.iter_mut().zip(&reduced_sa) {
            *slot = lms[r];
        }
        induce(&sorted_lms, &mut sa);
    }
    sa
}

/// Kasai's algorithm: `lcp[i]` is the longest common prefix of the suffixes
/// at `sa[i - 1]` and `sa[i]`; `lcp[0] = 0`.
pub fn lcp_array(s: &[u32], sa: &[usize]) -> Vec<usize> {
    let n = s.len();
    let mut rank = vec![0usize; n];
    for (i, &p) in sa.iter().enumerate() {
        rank[p] = i;
    }
    let mut lcp = vec![0usize; n];
    let mut h = 0usize;
    for i in 0..n {
        if rank[i] == 0 {
            h = 0;
            continue;
        }
        let j = sa[rank[i] - 1];
        while i + h < n && j + h < n && s[i + h] == s[j + h] {
            h += 1;
        }
        lcp[rank[i]] = h;
        h = h.saturating_sub(1);
    }
    lcp
}
