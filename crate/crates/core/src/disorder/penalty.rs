use super::covariance::{block_values, BlockCovariance, BlockPlacement};
use super::field::Environment;
use crate::error::{Error, Result};

/// `f_K(x) = -K 1{x > exp(K^2)}`.
pub fn f_k(x: f64, k: f64) -> f64 {
    if x > (k * k).exp() {
        -k
    } else {
        0.0
    }
}

/// Penalty on block correlations: `g(omega) = exp(sum_k f_K(U_k))`.
#[derive(Debug, Clone)]
pub struct PenaltySpec {
    pub k: f64,
    pub blocks: Vec<BlockPlacement>,
    pub cov: BlockCovariance,
}

impl PenaltySpec {
    pub fn new(k: f64, blocks: Vec<BlockPlacement>, cov: BlockCovariance) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Domain(format!("penalty constant K = {k} must be positive")));
        }
        for (a, b) in blocks.iter().enumerate() {
            let wa = b.window(&cov);
            for o in &blocks[a + 1..] {
                let wb = o.window(&cov);
                let disjoint = wa.t_hi < wb.t_lo
                    || wb.t_hi < wa.t_lo
                    || (0..2).any(|i| wa.hi[i] < wb.lo[i] || wb.hi[i] < wa.lo[i]);
                if !disjoint {
                    return Err(Error::Geometry("penalty blocks overlap".into()));
                }
            }
        }
        Ok(Self { k, blocks, cov })
    }

    /// The threshold `exp(K^2)` above which a block is penalized.
    pub fn threshold(&self) -> f64 {
        (self.k * self.k).exp()
    }
}

/// `U = sum_{a,b in B} V_ab omega_a omega_b` for one block.
pub fn quadratic_form<E: Environment + ?Sized>(
    omega: &E,
    cov: &BlockCovariance,
    block: &BlockPlacement,
) -> Result<f64> {
    Ok(cov.quadratic_form(&block_values(omega, cov, block)?))
}

/// `g(omega)`, always one of `exp(-j K)` for `j = 0..=blocks`.
pub fn penalty_density<E: Environment + ?Sized>(omega: &E, pen: &PenaltySpec) -> Result<f64> {
    let mut exceed = 0u32;
    for b in &pen.blocks {
        if f_k(quadratic_form(omega, &pen.cov, b)?, pen.k) != 0.0 {
            exceed += 1;
        }
    }
    Ok((-(exceed as f64) * pen.k).exp())
}
