use serde::{Deserialize, Serialize};

use crate::disorder::{log_mgf, DisorderSpec, Environment, Window};

use crate::error::{Error, Result};
use crate::geometry::{confined_endpoint_prob, Dim, SquareRequirement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }
}

/// Paths of length `n` from `(t0, entry)` to `(t0 + n, entry ± sqrt(n))`
/// that stay strictly between the two levels at times `t0 + 1 .. t0 + n - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfinedSpec {
    pub n: u64,
    pub t0: i64,
    pub entry: i64,
    pub direction: Direction,
    /// Leave the environment at the final site out of the weight.
    pub exclude_last: bool,
}

impl ConfinedSpec {
    pub fn new(n: u64, t0: i64, entry: i64, direction: Direction) -> Result<Self> {
        SquareRequirement::EvenSquare.check(n)?;
        Ok(Self { n, t0, entry, direction, exclude_last: true })
    }

    /// Interior of the strip at times `t0 + 1 ..= t0 + n - 1`, which holds
    /// every weighted site except possibly the final one.
    pub fn interior(&self) -> Window {
        let r = SquareRequirement::EvenSquare.check(self.n).unwrap_or(0) as i64;
        let (lo, hi) = match self.direction {
            Direction::Up => (self.entry + 1, self.entry + r - 1),
            Direction::Down => (self.entry - r + 1, self.entry - 1),
        };
        Window { d: Dim::One, t_lo: self.t0 + 1, t_hi: self.t0 + self.n as i64 - 1, lo: [lo, 0], hi: [hi, 0] }
    }

    pub fn exit(&self) -> (i64, i64) {
        let r = SquareRequirement::EvenSquare.check(self.n).unwrap_or(0) as i64;
        (self.t0 + self.n as i64, self.entry + self.direction.sign() * r)
    }
}

/// Restricted partition function `W̄`: the contribution to `W_n` of the
/// confined paths of `conf`, with per-site weights `exp(beta omega - lambda)`.
pub fn restricted_partition<E: Environment + ?Sized>(
    omega: &E,
    beta: f64,
    spec: &DisorderSpec,
    conf: &ConfinedSpec,
) -> Result<f64> {
    if omega.dim() != Dim::One {
        return Err(Error::Geometry("confined paths are one-dimensional".into()));
    }
    let r = SquareRequirement::EvenSquare.check(conf.n)? as usize;
    let n = conf.n as usize;
    if r < 2 {
        return Ok(0.0);
    }
    let lam = log_mgf(spec, beta)?;
    if beta != 0.0 {
        if !omega.covers(&conf.interior()) {
            return Err(Error::WindowTooSmall("environment does not cover the confined strip".into()));
        }
        if !conf.exclude_last {
            let (t, x) = conf.exit();
            omega.try_value(t, [x, 0])?;
        }
    }
    let s = conf.direction.sign();
    let weight = |i: usize, z: usize| -> f64 {
        if beta == 0.0 {
            1.0
        } else {
            let t = conf.t0 + i as i64;
            (beta * omega.value(t, [conf.entry + s * z as i64, 0]) - lam).exp()
        }
    };
    // interior levels 1..r-1 at index z-1
    let w = r - 1;
    let mut cur = vec![0.0f64; w];
    let mut next = vec![0.0f64; w];
    cur[0] = 0.5 * weight(1, 1);
    for i in 2..n {
        for (j, v) in next.iter_mut().enumerate() {
            let left = if j > 0 { cur[j - 1] } else { 0.0 };
            let right = if j + 1 < w { cur[j + 1] } else { 0.0 };
            *v = 0.5 * (left + right) * weight(i, j + 1);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let mut v = 0.5 * cur[w - 1];
    if !conf.exclude_last {
        v *= weight(n, r);
    }
    Ok(v)
}

/// Options for the conditioned two-replica moment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairConditioning {
    /// Also count the forced meeting at the common endpoint, time `n`.
    pub include_final_time: bool,
}

/// `P^{⊗2}[exp(gamma sum_{i=1}^{n-1} 1{S_i = S'_i}) | A_n]`, where `A_n` asks
/// both walks to stay in `(0, sqrt n)` for `0 < i < n` and end at `sqrt n`.
pub fn conditioned_pair_moment(n: u64, gamma: f64, cond: PairConditioning) -> Result<f64> {
    conditioned_pair_log_moment(n, gamma, cond).map(f64::exp)
}

pub fn conditioned_pair_log_moment(n: u64, gamma: f64, cond: PairConditioning) -> Result<f64> {
    let p = confined_endpoint_prob(n)?;
    if p == 0.0 {
        return Err(Error::ZeroProbability(format!("the confined event A_n is empty for n = {n}")));
    }
    let r = SquareRequirement::EvenSquare.check(n)? as usize;
    let w = r - 1;
    let eg = gamma.exp();
    let mut cur = vec![0.0f64; w * w];
    let mut tmp = vec![0.0f64; w * w];
    // time 1: both walks at level 1, which is a meeting
    cur[0] = 0.25 * eg;
    let mut log_scale = 0.0;
    for _ in 2..n {
        // first coordinate
        for a in 0..w {
            for b in 0..w {
                let l = if a > 0 { cur[(a - 1) * w + b] } else { 0.0 };
                let h = if a + 1 < w { cur[(a + 1) * w + b] } else { 0.0 };
                tmp[a * w + b] = 0.5 * (l + h);
            }
        }
        // second coordinate
        for a in 0..w {
            let row = &tmp[a * w..(a + 1) * w];
            for b in 0..w {
                let l = if b > 0 { row[b - 1] } else { 0.0 };
                let h = if b + 1 < w { row[b + 1] } else { 0.0 };
                cur[a * w + b] = 0.5 * (l + h);
            }
        }
        for a in 0..w {
            cur[a * w + a] *= eg;
        }
        let m = cur.iter().fold(0.0f64, |x, &y| x.max(y));
        if m > 0.0 {
            for v in cur.iter_mut() {
                *v /= m;
            }
            log_scale += m.ln();
        }
    }
    let mut log_v = log_scale + (0.25 * cur[w * w - 1]).ln();
    if cond.include_final_time {
        log_v += gamma;
    }
    Ok(log_v - 2.0 * p.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_environment, HashedEnvironment};

    #[test]
    fn zero_beta_equals_confined_probability() {
        let env = HashedEnvironment::new(&DisorderSpec::Gaussian, Dim::One, 1).unwrap();
        for n in [4u64, 16, 36, 64] {
            for dir in [Direction::Up, Direction::Down] {
                let conf = ConfinedSpec::new(n, 7, -3, dir).unwrap();
                let v = restricted_partition(&env, 0.0, &DisorderSpec::Gaussian, &conf).unwrap();
                assert!((v - confined_endpoint_prob(n).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn n4_is_always_zero() {
        let env = HashedEnvironment::new(&DisorderSpec::Gaussian, Dim::One, 2).unwrap();
        let conf = ConfinedSpec::new(4, 0, 0, Direction::Up).unwrap();
        assert_eq!(restricted_partition(&env, 1.3, &DisorderSpec::Gaussian, &conf).unwrap(), 0.0);
        assert!(matches!(conditioned_pair_moment(4, 0.1, PairConditioning::default()), Err(Error::ZeroProbability(_))));
    }

    #[test]
    fn window_must_cover_strip() {
        let w = Window::new(Dim::One, 1, 15, [0, 0], [3, 0]).unwrap();
        let f = sample_environment(&DisorderSpec::Gaussian, &w, 1).unwrap();
        let conf = ConfinedSpec::new(16, 0, 0, Direction::Up).unwrap();
        assert!(restricted_partition(&f, 0.5, &DisorderSpec::Gaussian, &conf).is_ok());
        let conf = ConfinedSpec::new(16, 0, 0, Direction::Down).unwrap();
        assert!(restricted_partition(&f, 0.5, &DisorderSpec::Gaussian, &conf).is_err());
        assert!(ConfinedSpec::new(9, 0, 0, Direction::Up).is_err());
    }

    #[test]
    fn conditioned_moment_basics() {
        let c = PairConditioning::default();
        assert!((conditioned_pair_moment(16, 0.0, c).unwrap() - 1.0).abs() < 1e-12);
        let mut last = 1.0;
        for g in [0.05, 0.1, 0.2, 0.4] {
            let v = conditioned_pair_moment(64, g, c).unwrap();
            assert!(v >= last);
            last = v;
        }
        let with_final = conditioned_pair_moment(16, 0.1, PairConditioning { include_final_time: true }).unwrap();
        assert!((with_final / conditioned_pair_moment(16, 0.1, c).unwrap() - 0.1f64.exp()).abs() < 1e-12);
    }
}
