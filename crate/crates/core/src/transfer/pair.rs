use serde::{Deserialize, Serialize};

use super::{check_cover, slice_len, slice_weights, spread};
use crate::disorder::{log_mgf, DisorderSpec, Environment};
use crate::error::{Error, Result};
use crate::geometry::Dim;
use crate::renewal::meet_probabilities;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRoute {
    DifferenceWalk,
    Renewal,
}

/// `Y_N = E[exp(h sum_{i=1}^N 1{S_i = S'_i})]` for two independent walks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDPResult {
    pub log_value: f64,
    pub n: u64,
    pub h: f64,
    pub d: Dim,
    pub route: PairRoute,
}

impl PairDPResult {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// Largest sizes handled by the difference-walk DP in [`pair_pinning_partition`].
const DP_MAX_1D: u64 = 4096;
const DP_MAX_2D: u64 = 128;

/// Exact `Y_N`. Small systems use the difference-walk DP, large ones the
/// renewal recursion over first meeting times; both are exact.
pub fn pair_pinning_partition(n: u64, h: f64, d: Dim) -> Result<PairDPResult> {
    check_args(n, h)?;
    if h == 0.0 {
        return Ok(PairDPResult { log_value: 0.0, n, h, d, route: PairRoute::DifferenceWalk });
    }
    let small = match d {
        Dim::One => n <= DP_MAX_1D,
        Dim::Two => n <= DP_MAX_2D,
    };
    if small {
        pair_pinning_dp(n, h, d)
    } else {
        pair_pinning_renewal(n, h, d)
    }
}

fn check_args(n: u64, h: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    if !h.is_finite() {
        return Err(Error::Domain(format!("pinning parameter {h} is not finite")));
    }
    Ok(())
}

/// One lazy step `1/4, 1/2, 1/4` of a difference coordinate, written to
/// indices `lo..=hi`.
fn lazy_step(cur: &[f64], out: &mut [f64], lo: usize, hi: usize) {
    for m in lo..=hi {
        let l = if m > 0 { cur[m - 1] } else { 0.0 };
        let r = if m + 1 < cur.len() { cur[m + 1] } else { 0.0 };
        out[m] = 0.25 * (l + r) + 0.5 * cur[m];
    }
}

/// DP over the difference of the two walks. In the rotated coordinates
/// each component of the difference is a lazy walk, so d = 2 is a product
/// of two such walks that meet when both components vanish.
pub fn pair_pinning_dp(n: u64, h: f64, d: Dim) -> Result<PairDPResult> {
    check_args(n, h)?;
    let nn = n as usize;
    let width = 2 * nn + 1;
    let off = nn;
    let eh = h.exp();
    let mut log_scale = 0.0;
    let total = match d {
        Dim::One => {
            let mut cur = vec![0.0f64; width];
            let mut next = vec![0.0f64; width];
            cur[off] = 1.0;
            for i in 1..=nn {
                lazy_step(&cur, &mut next, off - i, off + i);
                next[off] *= eh;
                std::mem::swap(&mut cur, &mut next);
                let m = cur[off - i..=off + i].iter().fold(0.0f64, |a, &b| a.max(b));
                for v in cur[off - i..=off + i].iter_mut() {
                    *v /= m;
                }
                log_scale += m.ln();
            }
            cur.iter().sum::<f64>()
        }
        Dim::Two => {
            let mut cur = vec![0.0f64; width * width];
            let mut tmp = vec![0.0f64; width * width];
            cur[off * width + off] = 1.0;
            let mut col = vec![0.0f64; width];
            let mut colo = vec![0.0f64; width];
            for i in 1..=nn {
                let (lo, hi) = (off - i, off + i);
                for a in lo..=hi {
                    let row = &cur[a * width..(a + 1) * width];
                    lazy_step(row, &mut tmp[a * width..(a + 1) * width], lo, hi);
                }
                for b in lo..=hi {
                    for (a, c) in col.iter_mut().enumerate() {
                        *c = tmp[a * width + b];
                    }
                    lazy_step(&col, &mut colo, lo, hi);
                    for a in lo..=hi {
                        cur[a * width + b] = colo[a];
                    }
                }
                cur[off * width + off] *= eh;
                let mut m = 0.0f64;
                for a in lo..=hi {
                    for b in lo..=hi {
                        m = m.max(cur[a * width + b]);
                    }
                }
                for a in lo..=hi {
                    for b in lo..=hi {
                        cur[a * width + b] /= m;
                    }
                }
                log_scale += m.ln();
            }
            cur.iter().sum::<f64>()
        }
    };
    Ok(PairDPResult { log_value: log_scale + total.ln(), n, h, d, route: PairRoute::DifferenceWalk })
}

/// Law of the first meeting time: `f[k] = P(tau_1 = k)` for `k = 1..=n`,
/// with `f[0] = 0`.
pub fn first_meeting_law(d: Dim, n: u64) -> Vec<f64> {
    let u = meet_probabilities(d, n);
    let nn = n as usize;
    let mut f = vec![0.0; nn + 1];
    match d {
        // the difference walk at time k is the simple walk at time 2k
        Dim::One => {
            for k in 1..=nn {
                f[k] = u[k] / (2 * k - 1) as f64;
            }
        }
        // renewal equation u_k = sum_{j=1}^k f_j u_{k-j}
        Dim::Two => {
            for k in 1..=nn {
                let s: f64 = (1..k).map(|j| f[j] * u[k - j]).sum();
                f[k] = (u[k] - s).max(0.0);
            }
        }
    }
    f
}

/// `Y_N` from the renewal recursion `Z_m = P(tau_1 > m) + sum_k f_k e^h Z_{m-k}`.
/// The recursion runs on `exp(-c m) Z_m` with `c >= 0` chosen so that the
/// rescaled kernel has mass at most one, which keeps every term bounded.
pub fn pair_pinning_renewal(n: u64, h: f64, d: Dim) -> Result<PairDPResult> {
    check_args(n, h)?;
    let f = first_meeting_law(d, n);
    let nn = n as usize;
    let mass = |c: f64| -> f64 { (1..=nn).map(|k| f[k] * (h - c * k as f64).exp()).sum() };
    let c = if mass(0.0) <= 1.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, h.max(0.0));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let kernel: Vec<f64> = (0..=nn).map(|k| if k == 0 { 0.0 } else { f[k] * (h - c * k as f64).exp() }).collect();
    let mut z = vec![0.0f64; nn + 1];
    z[0] = 1.0;
    let mut cum = 0.0;
    for m in 1..=nn {
        cum += f[m];
        let tail = (1.0 - cum).max(0.0);
        let conv: f64 = (1..=m).map(|k| kernel[k] * z[m - k]).sum();
        z[m] = (-c * m as f64).exp() * tail + conv;
    }
    Ok(PairDPResult { log_value: z[nn].ln() + c * nn as f64, n, h, d, route: PairRoute::Renewal })
}

/// `log P^{⊗2} exp(sum_{i=1}^N [b(omega_{i,S_i} + omega_{i,S'_i}) - 2 lambda(b) + h 1{S_i = S'_i}])`
/// for two walks in the same environment.
pub fn pair_environment_log_partition<E: Environment + ?Sized>(
    omega: &E,
    spec: &DisorderSpec,
    b: f64,
    h: f64,
    n: usize,
) -> Result<f64> {
    let d = omega.dim();
    let lam = log_mgf(spec, b)?;
    if b != 0.0 {
        check_cover(omega, n)?;
    }
    let eh = h.exp();
    let mut cur = vec![1.0f64];
    let mut wts = Vec::new();
    let mut row = Vec::new();
    let mut log_scale = 0.0;
    for i in 1..=n {
        let lp = slice_len(d, i - 1);
        let ln = slice_len(d, i);
        // spread the second index of every row, then the first index
        let mut stage = vec![0.0f64; lp * ln];
        for a in 0..lp {
            spread(d, i, &cur[a * lp..(a + 1) * lp], &mut row);
            stage[a * ln..(a + 1) * ln].copy_from_slice(&row);
        }
        let mut t = vec![0.0f64; ln * lp];
        for a in 0..lp {
            for c in 0..ln {
                t[c * lp + a] = stage[a * ln + c];
            }
        }
        let mut next = vec![0.0f64; ln * ln];
        for c in 0..ln {
            spread(d, i, &t[c * lp..(c + 1) * lp], &mut row);
            next[c * ln..(c + 1) * ln].copy_from_slice(&row);
        }
        slice_weights(omega, b, lam, i, &mut wts);
        for a in 0..ln {
            for c in 0..ln {
                next[a * ln + c] *= wts[a] * wts[c];
            }
            next[a * ln + a] *= eh;
        }
        let m = next.iter().fold(0.0f64, |x, &y| x.max(y));
        for v in next.iter_mut() {
            *v /= m;
        }
        log_scale += m.ln();
        cur = next;
    }
    Ok(log_scale + cur.iter().sum::<f64>().ln())
}
