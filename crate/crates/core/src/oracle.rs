//! Brute-force reference computations by explicit path enumeration. They
//! are exponential in `n` and exist to test the fast algorithms.

use crate::disorder::{log_mgf, DisorderSpec, Environment};
use crate::error::{Error, Result};
use crate::geometry::{Dim, Pos};

const MAX_PATHS: u64 = 1 << 26;

fn step(d: Dim, code: u64) -> Pos {
    match (d, code) {
        (Dim::One, 0) => [-1, 0],
        (Dim::One, _) => [1, 0],
        (Dim::Two, 0) => [1, 0],
        (Dim::Two, 1) => [-1, 0],
        (Dim::Two, 2) => [0, 1],
        (Dim::Two, _) => [0, -1],
    }
}

fn path_count(d: Dim, n: usize) -> Result<u64> {
    let k = d.degree() as u64;
    let count = k.checked_pow(n as u32).filter(|&c| c <= MAX_PATHS);
    count.ok_or_else(|| Error::Domain(format!("{k}^{n} paths is too many to enumerate")))
}

/// Calls `f` with every nearest-neighbour path `S_1, ..., S_n` from the
/// origin.
pub fn for_each_path<F: FnMut(&[Pos])>(d: Dim, n: usize, mut f: F) -> Result<()> {
    let total = path_count(d, n)?;
    let k = d.degree() as u64;
    let mut path = vec![[0i64, 0]; n];
    for code in 0..total {
        let mut c = code;
        let mut p = [0i64, 0];
        for s in path.iter_mut() {
            let dz = step(d, c % k);
            c /= k;
            p = [p[0] + dz[0], p[1] + dz[1]];
            *s = p;
        }
        f(&path);
    }
    Ok(())
}

/// `log W_n` summed path by path, every path carrying probability
/// `(2d)^{-n}`.
pub fn brute_force_log_partition<E: Environment + ?Sized>(
    omega: &E,
    beta: f64,
    spec: &DisorderSpec,
    n: usize,
) -> Result<f64> {
    let lam = log_mgf(spec, beta)?;
    let mut energies = Vec::new();
    for_each_path(omega.dim(), n, |path| {
        let h: f64 = path.iter().enumerate().map(|(i, &p)| beta * omega.value(i as i64 + 1, p) - lam).sum();
        energies.push(h);
    })?;
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = energies.iter().map(|h| (h - max).exp()).sum();
    Ok(max + (sum / energies.len() as f64).ln())
}

/// Law of `#{1 <= i <= n : S_i = S'_i}` for two independent walks,
/// enumerating all pairs of paths.
pub fn brute_force_overlap_law(d: Dim, n: usize) -> Result<Vec<f64>> {
    let total = path_count(d, n)?;
    if total.saturating_mul(total) > MAX_PATHS {
        return Err(Error::Domain(format!("{total}^2 path pairs is too many to enumerate")));
    }
    let mut paths = Vec::with_capacity(total as usize);
    for_each_path(d, n, |p| paths.push(p.to_vec()))?;
    let mut counts = vec![0u64; n + 1];
    for a in &paths {
        for b in &paths {
            counts[a.iter().zip(b).filter(|(x, y)| x == y).count()] += 1;
        }
    }
    let norm = (total * total) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / norm).collect())
}

/// `P⊗2 exp(h #{1 <= i <= n : S_i = S'_i})` by pair enumeration.
pub fn brute_force_pair_partition(n: usize, h: f64, d: Dim) -> Result<f64> {
    let law = brute_force_overlap_law(d, n)?;
    Ok(law.iter().enumerate().map(|(k, p)| p * (h * k as f64).exp()).sum())
}

/// `P{max_{i <= n} |S_i| >= halfwidth}` (l-infinity norm).
pub fn brute_force_escape(n: usize, halfwidth: i64, d: Dim) -> Result<f64> {
    let mut hits = 0u64;
    let mut total = 0u64;
    for_each_path(d, n, |path| {
        total += 1;
        if path.iter().any(|p| p[0].abs().max(p[1].abs()) >= halfwidth) {
            hits += 1;
        }
    })?;
    Ok(hits as f64 / total as f64)
}

/// Restricted partition function of the strip from level 0 to `r` over
/// `n = r^2` steps in d = 1, weighting sites at times `1..n-1`.
pub fn brute_force_confined<E: Environment + ?Sized>(omega: &E, beta: f64, spec: &DisorderSpec, r: i64) -> Result<f64> {
    let n = (r * r) as usize;
    let lam = log_mgf(spec, beta)?;
    let mut acc = 0.0;
    let mut total = 0u64;
    for_each_path(Dim::One, n, |path| {
        total += 1;
        let inside = path[..n - 1].iter().all(|p| p[0] > 0 && p[0] < r);
        if inside && path[n - 1][0] == r {
            let h: f64 =
                path[..n - 1].iter().enumerate().map(|(i, &p)| beta * omega.value(i as i64 + 1, p) - lam).sum();
            acc += h.exp();
        }
    })?;
    Ok(acc / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        let mut c = 0;
        for_each_path(Dim::Two, 3, |_| c += 1).unwrap();
        assert_eq!(c, 64);
        assert!(for_each_path(Dim::Two, 20, |_| ()).is_err());
    }

    #[test]
    fn overlap_law_is_a_law() {
        let law = brute_force_overlap_law(Dim::One, 4).unwrap();
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // P{S_1 = S'_1} = 1/2 contributes to E overlap = sum_i u_i
        let mean: f64 = law.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let u: f64 = (1..=4).map(|k| crate::renewal::meet_probability(Dim::One, k)).sum();
        assert!((mean - u).abs() < 1e-14);
    }
}
