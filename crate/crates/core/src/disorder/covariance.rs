use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::field::{Environment, EnvironmentField, MeasureTag, Provenance, Window};
use super::DisorderSpec;
use crate::error::{Error, Result};
use crate::geometry::{CoarsePlan, Dim, Pos};
use crate::rng::SiteHasher;

/// Minimum eigenvalue of `I - V` required before factorizing.
pub const PD_TOLERANCE: f64 = 1e-9;

const PERRON_MAX_ITERS: usize = 20_000;
const PERRON_REL_TOL: f64 = 1e-12;

/// The kernel `V` restricted to one block: times `1..=n` and the l-infinity
/// ball of radius `halfwidth` around the origin. Stored in CSR form over the
/// local site order `(i - 1) * cells + spatial index`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCovariance {
    d: Dim,
    n: u64,
    c6: f64,
    c7: f64,
    normalization: f64,
    halfwidth: i64,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    row_sum_bound: f64,
    hs_norm_sq: f64,
    perron: (f64, f64),
}

impl BlockCovariance {
    /// `V = 0` on the block geometry of `plan`, so that `I - V` is the
    /// identity.
    pub fn zero(plan: &CoarsePlan) -> Result<Self> {
        let mut cov = Self::empty(plan)?;
        cov.row_ptr = vec![0; cov.dim() + 1];
        Ok(cov)
    }

    fn empty(plan: &CoarsePlan) -> Result<Self> {
        plan.validate()?;
        if plan.n < 4 {
            return Err(Error::Geometry(format!("block length n = {} must be at least 4", plan.n)));
        }
        Ok(Self {
            d: plan.d,
            n: plan.n,
            c6: plan.constants.c6,
            c7: plan.constants.c7,
            normalization: plan.v_normalization,
            halfwidth: plan.halfwidth(plan.constants.c6),
            row_ptr: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            row_sum_bound: 0.0,
            hs_norm_sq: 0.0,
            perron: (0.0, 0.0),
        })
    }

    pub fn d(&self) -> Dim {
        self.d
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn halfwidth(&self) -> i64 {
        self.halfwidth
    }

    pub fn constants(&self) -> (f64, f64) {
        (self.c6, self.c7)
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    fn side(&self) -> usize {
        (2 * self.halfwidth + 1) as usize
    }

    /// Number of spatial sites per time slice.
    pub fn cells(&self) -> usize {
        match self.d {
            Dim::One => self.side(),
            Dim::Two => self.side() * self.side(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n as usize * self.cells()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Local index of the block site `(i, z)`, with `1 <= i <= n` and `z`
    /// relative to the block center.
    pub fn local_index(&self, i: i64, z: Pos) -> Option<usize> {
        let h = self.halfwidth;
        if i < 1 || i > self.n as i64 || z[0].abs() > h {
            return None;
        }
        let s = match self.d {
            Dim::One => {
                if z[1] != 0 {
                    return None;
                }
                (z[0] + h) as usize
            }
            Dim::Two => {
                if z[1].abs() > h {
                    return None;
                }
                (z[0] + h) as usize * self.side() + (z[1] + h) as usize
            }
        };
        Some((i - 1) as usize * self.cells() + s)
    }

    pub fn site(&self, idx: usize) -> (i64, Pos) {
        let cells = self.cells();
        let i = (idx / cells) as i64 + 1;
        let s = idx % cells;
        let h = self.halfwidth;
        let z = match self.d {
            Dim::One => [s as i64 - h, 0],
            Dim::Two => [(s / self.side()) as i64 - h, (s % self.side()) as i64 - h],
        };
        (i, z)
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, Pos)> + '_ {
        (0..self.dim()).map(|k| self.site(k))
    }

    /// Nonzero entries of row `a` as `(column, value)`.
    pub fn row(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[a]..self.row_ptr[a + 1];
        self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        let r = self.row_ptr[a]..self.row_ptr[a + 1];
        match self.cols[r.clone()].binary_search(&(b as u32)) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// `max_a sum_b |V_ab|`.
    pub fn row_sum_bound(&self) -> f64 {
        self.row_sum_bound
    }

    /// The bound `C7 / (C6 sqrt(log n))` on the largest row sum.
    pub fn analytic_row_bound(&self) -> f64 {
        self.c7 / (self.c6 * (self.n as f64).ln().sqrt())
    }

    /// Squared Hilbert-Schmidt norm `sum_ab V_ab^2`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.hs_norm_sq
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|a| self.entry(a, a)).sum()
    }

    /// Largest eigenvalue of `V`. Since `V` is entrywise nonnegative this is
    /// its Perron root; the value returned is the upper end of a
    /// Collatz-Wielandt bracket.
    pub fn max_eigenvalue(&self) -> f64 {
        self.perron.1
    }

    pub fn perron_bracket(&self) -> (f64, f64) {
        self.perron
    }

    /// Smallest eigenvalue of `I - V`, i.e. `1 - max_eigenvalue`.
    pub fn min_eigenvalue(&self) -> f64 {
        1.0 - self.perron.1
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > PD_TOLERANCE
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.row(a).map(|(b, v)| v * x[b]).sum();
        }
    }

    /// `sum_ab V_ab x_a x_b`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.dim()).map(|a| x[a] * self.row(a).map(|(b, v)| v * x[b]).sum::<f64>()).sum()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for (b, v) in self.row(a) {
                m[(a, b)] = v;
            }
        }
        m
    }

    /// `I - s V` as a dense matrix.
    pub fn dense_shifted(&self, s: f64) -> DMatrix<f64> {
        let mut m = self.dense() * (-s);
        for a in 0..self.dim() {
            m[(a, a)] += 1.0;
        }
        m
    }

    fn finish(&mut self) {
        let dim = self.dim();
        self.row_sum_bound = (0..dim).map(|a| self.row(a).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        self.hs_norm_sq = self.vals.iter().map(|v| v * v).sum();
        self.perron = self.perron_root();
    }

    /// Power iteration on `V + sI` with Collatz-Wielandt bounds
    /// `min (Vx)_a / x_a <= rho <= max (Vx)_a / x_a` for positive `x`.
    fn perron_root(&self) -> (f64, f64) {
        let dim = self.dim();
        if self.vals.is_empty() {
            return (0.0, 0.0);
        }
        let mut x = vec![1.0; dim];
        let mut y = vec![0.0; dim];
        let mut best = (0.0f64, self.row_sum_bound);
        // eigenvalues of V lie in [-rho, rho]; a shift of rho/4 removes the
        // competition from the negative end of the spectrum
        let shift = 0.25 * self.row_sum_bound;
        for _ in 0..PERRON_MAX_ITERS {
            self.matvec(&x, &mut y);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for a in 0..dim {
                let r = y[a] / x[a];
                lo = lo.min(r);
                hi = hi.max(r);
            }
            best = (best.0.max(lo), best.1.min(hi));
            if best.1 - best.0 <= PERRON_REL_TOL * best.1 {
                break;
            }
            let norm = x.iter().zip(&y).map(|(xa, ya)| shift * xa + ya).fold(0.0, f64::max);
            for a in 0..dim {
                x[a] = (shift * x[a] + y[a]) / norm;
            }
        }
        best
    }
}

/// Builds the block kernel: zero diagonal, and off the diagonal
/// `1{|z - z'| <= C7 sqrt|j-i|} / (norm C6 C7 n sqrt(log n) |j - i|)`.
pub fn build_block_covariance(plan: &CoarsePlan) -> Result<BlockCovariance> {
    let mut cov = BlockCovariance::empty(plan)?;
    let n = plan.n as i64;
    let h = cov.halfwidth;
    let base = 1.0 / (cov.normalization * cov.c6 * cov.c7 * plan.n as f64 * (plan.n as f64).ln().sqrt());
    let radii: Vec<i64> = (0..n).map(|k| (cov.c7 * (k as f64).sqrt() + 1e-12).floor() as i64).collect();
    let dim = cov.dim();
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for a in 0..dim {
        let (i, z) = cov.site(a);
        for j in 1..=n {
            if j == i {
                continue;
            }
            let k = (j - i).abs();
            let r = radii[k as usize];
            let v = base / k as f64;
            let (x0, x1) = ((z[0] - r).max(-h), (z[0] + r).min(h));
            match plan.d {
                Dim::One => {
                    for x in x0..=x1 {
                        cols.push(cov.local_index(j, [x, 0]).unwrap() as u32);
                        vals.push(v);
                    }
                }
                Dim::Two => {
                    let (y0, y1) = ((z[1] - r).max(-h), (z[1] + r).min(h));
                    for x in x0..=x1 {
                        for y in y0..=y1 {
                            cols.push(cov.local_index(j, [x, y]).unwrap() as u32);
                            vals.push(v);
                        }
                    }
                }
            }
        }
        row_ptr.push(cols.len());
    }
    cov.row_ptr = row_ptr;
    cov.cols = cols;
    cov.vals = vals;
    cov.finish();
    Ok(cov)
}

/// Cholesky factor of `I - s V` for a block.
#[derive(Debug, Clone)]
pub struct CorrelatedFactor {
    chol: Cholesky<f64, Dyn>,
    scale: f64,
}

impl CorrelatedFactor {
    /// Factorizes `I - s V`, refusing when its smallest eigenvalue
    /// `1 - s rho(V)` is not above [`PD_TOLERANCE`].
    pub fn new(cov: &BlockCovariance, s: f64) -> Result<Self> {
        let min_eig = 1.0 - s * cov.max_eigenvalue();
        if !(min_eig > PD_TOLERANCE) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eig, tolerance: PD_TOLERANCE });
        }
        let chol = Cholesky::new(cov.dense_shifted(s))
            .ok_or(Error::NotPositiveDefinite { min_eigenvalue: min_eig, tolerance: PD_TOLERANCE })?;
        Ok(Self { chol, scale: s })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `L g`, a vector with covariance `I - s V` when `g` is standard.
    pub fn correlate(&self, g: &[f64]) -> Vec<f64> {
        let l = self.chol.l();
        (l * DVector::from_column_slice(g)).as_slice().to_vec()
    }

    /// `x^T (I - s V)^{-1} x`.
    pub fn inverse_quadratic(&self, x: &[f64]) -> f64 {
        let sol = self.chol.solve(&DVector::from_column_slice(x));
        sol.dot(&DVector::from_column_slice(x))
    }
}

/// Position of one block `B_k`: times `t0 + 1 ..= t0 + n`, spatial center
/// `center`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlacement {
    pub t0: i64,
    pub center: Pos,
}

impl BlockPlacement {
    /// The `m` blocks of a corridor: block `k` starts at time `(k-1) n` and
    /// is centered at `sqrt(n) y_{k-1}` with `y_0 = 0`.
    pub fn corridor(ys: &[Pos], plan: &CoarsePlan) -> Result<Vec<Self>> {
        if ys.len() as u64 != plan.m {
            return Err(Error::Geometry(format!("expected {} cell coordinates", plan.m)));
        }
        let r = plan.sqrt_n(crate::geometry::SquareRequirement::Square)? as i64;
        Ok((0..plan.m as usize)
            .map(|k| {
                let y = if k == 0 { [0, 0] } else { ys[k - 1] };
                BlockPlacement {
                    t0: k as i64 * plan.n as i64,
                    center: [r * y[0], if plan.d == Dim::Two { r * y[1] } else { 0 }],
                }
            })
            .collect())
    }

    pub fn global(&self, i: i64, z: Pos) -> (i64, Pos) {
        (self.t0 + i, [self.center[0] + z[0], self.center[1] + z[1]])
    }

    pub fn window(&self, cov: &BlockCovariance) -> Window {
        let h = cov.halfwidth();
        let hy = if cov.d() == Dim::Two { h } else { 0 };
        Window {
            d: cov.d(),
            t_lo: self.t0 + 1,
            t_hi: self.t0 + cov.n() as i64,
            lo: [self.center[0] - h, self.center[1] - hy],
            hi: [self.center[0] + h, self.center[1] + hy],
        }
    }
}

fn check_blocks(cov: &BlockCovariance, blocks: &[BlockPlacement], covers: impl Fn(&Window) -> bool) -> Result<()> {
    for (k, b) in blocks.iter().enumerate() {
        let w = b.window(cov);
        if !covers(&w) {
            return Err(Error::Geometry(format!("block {k} lies outside the environment window")));
        }
        for o in &blocks[k + 1..] {
            let v = o.window(cov);
            let disjoint = w.t_hi < v.t_lo || v.t_hi < w.t_lo || (0..2).any(|a| w.hi[a] < v.lo[a] || v.hi[a] < w.lo[a]);
            if !disjoint {
                return Err(Error::Geometry("correlated blocks overlap".into()));
            }
        }
    }
    Ok(())
}

/// Gaussian field with covariance `I - V` inside each block and i.i.d.
/// standard values elsewhere. With `V = 0` the output equals the base
/// Gaussian field for the same seed.
pub fn sample_correlated(
    cov: &BlockCovariance,
    blocks: &[BlockPlacement],
    window: &Window,
    seed: u64,
) -> Result<EnvironmentField> {
    let factor = CorrelatedFactor::new(cov, 1.0)?;
    sample_correlated_with(cov, &factor, blocks, window, seed)
}

/// As [`sample_correlated`] with a precomputed factor of `I - V`.
pub fn sample_correlated_with(
    cov: &BlockCovariance,
    factor: &CorrelatedFactor,
    blocks: &[BlockPlacement],
    window: &Window,
    seed: u64,
) -> Result<EnvironmentField> {
    check_blocks(cov, blocks, |w| window.covers(w))?;
    let spec = DisorderSpec::Gaussian;
    let mut field = super::sample_environment(&spec, window, seed)?;
    let hasher = SiteHasher::new(seed);
    let mut g = vec![0.0; cov.dim()];
    for b in blocks {
        for (idx, gi) in g.iter_mut().enumerate() {
            let (i, z) = cov.site(idx);
            let (t, p) = b.global(i, z);
            *gi = hasher.gaussian(t, p[0], p[1]);
        }
        let w = factor.correlate(&g);
        for (idx, v) in w.into_iter().enumerate() {
            let (i, z) = cov.site(idx);
            let (t, p) = b.global(i, z);
            field.set(t, p, v);
        }
    }
    let prov = Provenance {
        spec,
        seed,
        tag: MeasureTag::Correlated {
            block_dim: cov.dim(),
            blocks: blocks.len(),
            min_eigenvalue: cov.min_eigenvalue(),
        },
    };
    EnvironmentField::from_values(*field.window(), field.values().to_vec(), prov)
}

/// Block values of `omega` in local order.
pub fn block_values<E: Environment + ?Sized>(omega: &E, cov: &BlockCovariance, b: &BlockPlacement) -> Result<Vec<f64>> {
    if !omega.covers(&b.window(cov)) {
        return Err(Error::Geometry("block lies outside the environment window".into()));
    }
    Ok(cov
        .sites()
        .map(|(i, z)| {
            let (t, p) = b.global(i, z);
            omega.value(t, p)
        })
        .collect())
}

/// `log dQ~/dQ = sum_k [ -1/2 log det(I - V) - 1/2 w_k^T ((I - V)^{-1} - I) w_k ]`.
pub fn correlated_log_density<E: Environment + ?Sized>(
    omega: &E,
    factor: &CorrelatedFactor,
    cov: &BlockCovariance,
    blocks: &[BlockPlacement],
) -> Result<f64> {
    check_blocks(cov, blocks, |w| omega.covers(w))?;
    let ld = factor.log_det();
    let mut acc = 0.0;
    for b in blocks {
        let w = block_values(omega, cov, b)?;
        let norm2: f64 = w.iter().map(|v| v * v).sum();
        acc += -0.5 * ld - 0.5 * (factor.inverse_quadratic(&w) - norm2);
    }
    Ok(acc)
}

/// Density of the block-correlated law with respect to the i.i.d. Gaussian
/// law.
pub fn correlated_density<E: Environment + ?Sized>(
    omega: &E,
    cov: &BlockCovariance,
    blocks: &[BlockPlacement],
) -> Result<f64> {
    let factor = CorrelatedFactor::new(cov, 1.0)?;
    correlated_log_density(omega, &factor, cov, blocks).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Constants;

    fn plan(d: Dim, n: u64, c6: f64, c7: f64) -> CoarsePlan {
        CoarsePlan::new(d, n, 1, 0.5).unwrap().with_constants(Constants { c6, c7, ..Constants::default() })
    }

    fn formula(p: &CoarsePlan, a: (i64, Pos), b: (i64, Pos)) -> f64 {
        if a == b || a.0 == b.0 {
            return 0.0;
        }
        let k = (a.0 - b.0).abs() as f64;
        let dist = (a.1[0] - b.1[0]).abs().max((a.1[1] - b.1[1]).abs()) as f64;
        if dist > p.constants.c7 * k.sqrt() {
            return 0.0;
        }
        let n = p.n as f64;
        1.0 / (p.v_normalization * p.constants.c6 * p.constants.c7 * n * n.ln().sqrt() * k)
    }

    #[test]
    fn entries_match_scalar_formula() {
        for d in [Dim::One, Dim::Two] {
            let p = plan(d, 4, 1.5, 1.0);
            let cov = build_block_covariance(&p).unwrap();
            assert_eq!(cov.halfwidth(), 3);
            for a in 0..cov.dim() {
                for b in 0..cov.dim() {
                    let f = formula(&p, cov.site(a), cov.site(b));
                    assert!((cov.entry(a, b) - f).abs() <= 1e-15 * f.max(1e-300), "{a} {b}");
                }
            }
            assert_eq!(cov.trace(), 0.0);
        }
    }

    #[test]
    fn derived_statistics() {
        for d in [Dim::One, Dim::Two] {
            let cov = build_block_covariance(&plan(d, 16, 1.0, 2.0)).unwrap();
            assert!(cov.row_sum_bound() <= cov.analytic_row_bound());
            assert!(cov.hs_norm_sq() <= 1.0);
            let eig = nalgebra::SymmetricEigen::new(cov.dense()).eigenvalues.max();
            let (lo, hi) = cov.perron_bracket();
            assert!(lo <= eig * (1.0 + 1e-12) && eig <= hi * (1.0 + 1e-12), "{lo} {eig} {hi}");
            assert!((hi - eig).abs() < 1e-10 * eig);
            assert!(hi <= cov.row_sum_bound() * (1.0 + 1e-12));
            assert!(cov.is_positive_definite());
        }
    }

    #[test]
    fn tiny_c6_breaks_positive_definiteness() {
        let mut p = plan(Dim::One, 4, 1e-3, 1.0);
        p.v_normalization = 1.0;
        let cov = build_block_covariance(&p).unwrap();
        assert!(cov.row_sum_bound() >= 1.0);
        let w = Window::new(Dim::One, 1, 4, [0, 0], [0, 0]).unwrap();
        let blocks = [BlockPlacement { t0: 0, center: [0, 0] }];
        match sample_correlated(&cov, &blocks, &w, 1) {
            Err(Error::NotPositiveDefinite { min_eigenvalue, .. }) => assert!(min_eigenvalue <= 0.0),
            other => panic!("expected a positive-definiteness error, got {other:?}"),
        }
    }

    #[test]
    fn zero_kernel_reproduces_base_field() {
        let p = plan(Dim::Two, 4, 1.0, 1.0);
        let cov = BlockCovariance::zero(&p).unwrap();
        assert_eq!(cov.min_eigenvalue(), 1.0);
        let w = Window::new(Dim::Two, 1, 8, [-4, -4], [4, 4]).unwrap();
        let blocks = [BlockPlacement { t0: 0, center: [0, 0] }, BlockPlacement { t0: 4, center: [1, 1] }];
        let a = sample_correlated(&cov, &blocks, &w, 9).unwrap();
        let b = super::super::sample_environment(&DisorderSpec::Gaussian, &w, 9).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((correlated_density(&a, &cov, &blocks).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_blocks_rejected() {
        let cov = build_block_covariance(&plan(Dim::One, 4, 1.0, 1.0)).unwrap();
        let w = Window::new(Dim::One, 1, 8, [-6, 0], [6, 0]).unwrap();
        let blocks = [BlockPlacement { t0: 0, center: [0, 0] }, BlockPlacement { t0: 2, center: [1, 0] }];
        assert!(sample_correlated(&cov, &blocks, &w, 1).is_err());
    }
}
