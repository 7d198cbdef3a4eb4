//! Lattice geometry of the coarse graining: cells, corridors, blocks and
//! exact probabilities for confined simple random walks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension of the walk (the polymer lives in 1+d dimensions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Dim {
    pub fn from_usize(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            _ => Err(Error::Domain(format!("dimension must be 1 or 2, got {d}"))),
        }
    }

    pub fn as_usize(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    /// Number of nearest neighbours of a lattice site.
    pub fn degree(self) -> usize {
        2 * self.as_usize()
    }
}

/// Spatial position. In dimension one the second coordinate is always 0.
pub type Pos = [i64; 2];

/// l-infinity norm, which is the norm used for every d = 2 ball.
#[inline]
pub fn linf(p: Pos) -> i64 {
    p[0].abs().max(p[1].abs())
}

/// Exact integer square root when `n` is a perfect square.
pub fn exact_sqrt(n: u64) -> Option<u64> {
    let r = (n as f64).sqrt().round() as u64;
    (r.checked_mul(r) == Some(n)).then_some(r)
}

/// Which integrality condition a construction needs on the block length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SquareRequirement {
    /// `n` is a perfect square (cell constructions).
    Square,
    /// `n` is an even perfect square (confined-walk constructions).
    EvenSquare,
}

impl SquareRequirement {
    /// Returns `sqrt(n)` or an error naming the violated condition.
    pub fn check(self, n: u64) -> Result<u64> {
        let r = exact_sqrt(n)
            .ok_or_else(|| Error::Geometry(format!("n = {n} is not a perfect square ({self:?} required)")))?;
        if self == SquareRequirement::EvenSquare && !n.is_multiple_of(2) {
            return Err(Error::Parity(format!("n = {n} must be an even perfect square")));
        }
        Ok(r)
    }
}

/// Free constants of the coarse-graining constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self { c2: 2.0, c3: 1.0, c4: 2.0, c5: 1.0, c6: 2.0, c7: 2.0 }
    }
}

/// Scale bundle shared by every coarse-graining construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarsePlan {
    pub d: Dim,
    /// Block length.
    pub n: u64,
    /// Number of blocks; the system size is `n * m`.
    pub m: u64,
    pub theta: f64,
    /// Shift or tilt magnitude.
    pub delta: f64,
    pub constants: Constants,
    /// Normalization constant in the denominator of the block covariance.
    pub v_normalization: f64,
}

impl CoarsePlan {
    pub const DEFAULT_V_NORMALIZATION: f64 = 100.0;

    pub fn new(d: Dim, n: u64, m: u64, theta: f64) -> Result<Self> {
        let plan = Self {
            d,
            n,
            m,
            theta,
            delta: 0.0,
            constants: Constants::default(),
            v_normalization: Self::DEFAULT_V_NORMALIZATION,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_constants(mut self, constants: Constants) -> Self {
        self.constants = constants;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Geometry("n and m must be positive".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Domain(format!("theta = {} must lie in (0,1)", self.theta)));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::Domain(format!("delta = {} must be >= 0", self.delta)));
        }
        let c = &self.constants;
        for (name, v) in [("C2", c.c2), ("C3", c.c3), ("C4", c.c4), ("C5", c.c5), ("C6", c.c6), ("C7", c.c7)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("constant {name} = {v} must be positive")));
            }
        }
        if !(self.v_normalization > 0.0) {
            return Err(Error::Domain("covariance normalization must be positive".into()));
        }
        Ok(())
    }

    pub fn system_size(&self) -> u64 {
        self.n * self.m
    }

    pub fn sqrt_n(&self, req: SquareRequirement) -> Result<u64> {
        req.check(self.n)
    }

    /// `floor(c * sqrt(n))`, the integer half-width used for every box.
    pub fn halfwidth(&self, c: f64) -> i64 {
        (c * (self.n as f64).sqrt()).floor() as i64
    }

    /// Corridor half-width: `C4 sqrt(n)` in d = 1, `C6 sqrt(n)` in d = 2.
    pub fn corridor_halfwidth(&self) -> i64 {
        match self.d {
            Dim::One => self.halfwidth(self.constants.c4),
            Dim::Two => self.halfwidth(self.constants.c6),
        }
    }

    /// Default shift for the d = 1 coarse graining, `n^{-3/4} C4^{-1/2}`.
    pub fn default_delta_1d(&self) -> f64 {
        (self.n as f64).powf(-0.75) / self.constants.c4.sqrt()
    }
}

/// Coarse cell label: block index and cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub k: u64,
    pub y: Pos,
}

/// Axis-aligned spatial box, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpatialBox {
    pub d: Dim,
    pub lo: Pos,
    pub hi: Pos,
}

impl SpatialBox {
    pub fn contains(&self, p: Pos) -> bool {
        (0..self.d.as_usize()).all(|a| p[a] >= self.lo[a] && p[a] <= self.hi[a]) && (self.d == Dim::Two || p[1] == 0)
    }

    pub fn cardinality(&self) -> u64 {
        (0..self.d.as_usize()).map(|a| (self.hi[a] - self.lo[a] + 1).max(0) as u64).product()
    }

    /// Centered l-infinity ball.
    pub fn ball(d: Dim, center: Pos, radius: i64) -> Self {
        let lo = [center[0] - radius, if d == Dim::Two { center[1] - radius } else { 0 }];
        let hi = [center[0] + radius, if d == Dim::Two { center[1] + radius } else { 0 }];
        Self { d, lo, hi }
    }

    pub fn iter(&self) -> impl Iterator<Item = Pos> + '_ {
        let (ylo, yhi) = match self.d {
            Dim::One => (0, 0),
            Dim::Two => (self.lo[1], self.hi[1]),
        };
        (self.lo[0]..=self.hi[0]).flat_map(move |x| (ylo..=yhi).map(move |y| [x, y]))
    }
}

/// Space-time box: times `t_lo..=t_hi` times a spatial box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteBox {
    pub t_lo: i64,
    pub t_hi: i64,
    pub space: SpatialBox,
}

impl SiteBox {
    pub fn contains(&self, t: i64, p: Pos) -> bool {
        t >= self.t_lo && t <= self.t_hi && self.space.contains(p)
    }

    pub fn cardinality(&self) -> u64 {
        (self.t_hi - self.t_lo + 1).max(0) as u64 * self.space.cardinality()
    }

    fn intersects(&self, other: &SiteBox) -> bool {
        let d = self.space.d.as_usize();
        self.t_lo <= other.t_hi
            && other.t_lo <= self.t_hi
            && (0..d).all(|a| self.space.lo[a] <= other.space.hi[a] && other.space.lo[a] <= self.space.hi[a])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Pos)> + '_ {
        (self.t_lo..=self.t_hi).flat_map(move |t| self.space.iter().map(move |p| (t, p)))
    }
}

/// A finite set of space-time sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SiteSet {
    /// Union of pairwise disjoint boxes.
    Boxes { d: Dim, boxes: Vec<SiteBox> },
    /// Explicit list of distinct sites.
    Explicit { d: Dim, sites: Vec<(i64, Pos)> },
}

impl SiteSet {
    pub fn empty(d: Dim) -> Self {
        SiteSet::Explicit { d, sites: Vec::new() }
    }

    /// Union of boxes; fails if two boxes overlap.
    pub fn from_disjoint_boxes(d: Dim, boxes: Vec<SiteBox>) -> Result<Self> {
        for (i, a) in boxes.iter().enumerate() {
            if a.space.d != d {
                return Err(Error::Geometry("box dimension mismatch".into()));
            }
            if boxes[i + 1..].iter().any(|b| a.intersects(b)) {
                return Err(Error::Geometry("site boxes overlap".into()));
            }
        }
        Ok(SiteSet::Boxes { d, boxes })
    }

    pub fn from_sites(d: Dim, mut sites: Vec<(i64, Pos)>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        SiteSet::Explicit { d, sites }
    }

    pub fn dim(&self) -> Dim {
        match self {
            SiteSet::Boxes { d, .. } | SiteSet::Explicit { d, .. } => *d,
        }
    }

    pub fn contains(&self, t: i64, p: Pos) -> bool {
        match self {
            SiteSet::Boxes { boxes, .. } => boxes.iter().any(|b| b.contains(t, p)),
            SiteSet::Explicit { sites, .. } => sites.binary_search(&(t, p)).is_ok(),
        }
    }

    pub fn cardinality(&self) -> u64 {
        match self {
            SiteSet::Boxes { boxes, .. } => boxes.iter().map(SiteBox::cardinality).sum(),
            SiteSet::Explicit { sites, .. } => sites.len() as u64,
        }
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = (i64, Pos)> + '_> {
        match self {
            SiteSet::Boxes { boxes, .. } => Box::new(boxes.iter().flat_map(SiteBox::iter)),
            SiteSet::Explicit { sites, .. } => Box::new(sites.iter().copied()),
        }
    }

    /// Smallest space-time box containing the set, `None` when empty.
    pub fn bounding_box(&self) -> Option<SiteBox> {
        let d = self.dim();
        let mut it = self.iter_boxes();
        let first = it.next()?;
        let mut bb = first;
        for b in it {
            bb.t_lo = bb.t_lo.min(b.t_lo);
            bb.t_hi = bb.t_hi.max(b.t_hi);
            for a in 0..2 {
                bb.space.lo[a] = bb.space.lo[a].min(b.space.lo[a]);
                bb.space.hi[a] = bb.space.hi[a].max(b.space.hi[a]);
            }
        }
        bb.space.d = d;
        Some(bb)
    }

    fn iter_boxes(&self) -> Box<dyn Iterator<Item = SiteBox> + '_> {
        match self {
            SiteSet::Boxes { boxes, .. } => Box::new(boxes.iter().copied()),
            SiteSet::Explicit { d, sites } => Box::new(sites.iter().map(move |&(t, p)| SiteBox {
                t_lo: t,
                t_hi: t,
                space: SpatialBox { d: *d, lo: p, hi: p },
            })),
        }
    }
}

/// Spatial cell `I_y`: `[y sqrt(n), (y+1) sqrt(n))` per coordinate.
pub fn cell(y: Pos, n: u64, d: Dim) -> Result<SpatialBox> {
    let r = SquareRequirement::Square.check(n)? as i64;
    let lo = [y[0] * r, if d == Dim::Two { y[1] * r } else { 0 }];
    let hi = [lo[0] + r - 1, if d == Dim::Two { lo[1] + r - 1 } else { 0 }];
    Ok(SpatialBox { d, lo, hi })
}

/// Index of the cell containing a spatial point.
pub fn cell_of(p: Pos, n: u64, d: Dim) -> Result<Pos> {
    let r = SquareRequirement::Square.check(n)? as i64;
    Ok([p[0].div_euclid(r), if d == Dim::Two { p[1].div_euclid(r) } else { 0 }])
}

/// Corridor `J_Y`: for block `k = 1..m`, times `(k-1)n+1 ..= kn` and the
/// ball of radius `corridor_halfwidth` around `sqrt(n) y_{k-1}`, with
/// `y_0 = 0`. `ys` holds `y_1, ..., y_m`.
pub fn corridor_jy(ys: &[Pos], plan: &CoarsePlan) -> Result<SiteSet> {
    if ys.len() as u64 != plan.m {
        return Err(Error::Geometry(format!("corridor needs m = {} cell coordinates, got {}", plan.m, ys.len())));
    }
    let r = plan.sqrt_n(SquareRequirement::Square)? as i64;
    let hw = plan.corridor_halfwidth();
    let n = plan.n as i64;
    let boxes = (0..plan.m as usize)
        .map(|k| {
            let y = if k == 0 { [0, 0] } else { ys[k - 1] };
            let center = [r * y[0], if plan.d == Dim::Two { r * y[1] } else { 0 }];
            SiteBox { t_lo: k as i64 * n + 1, t_hi: (k as i64 + 1) * n, space: SpatialBox::ball(plan.d, center, hw) }
        })
        .collect();
    SiteSet::from_disjoint_boxes(plan.d, boxes)
}

/// Exact `P{ max_{i <= n} |S_i| >= halfwidth }` for the simple random walk
/// started at the origin (l-infinity norm in d = 2).
pub fn escape_probability(n: u64, halfwidth: i64, d: Dim) -> f64 {
    if halfwidth <= 0 {
        return 1.0;
    }
    if halfwidth as u64 > n {
        return 0.0;
    }
    let h = halfwidth;
    // Survival mass on |z| < h.
    let w = (2 * h - 1) as usize;
    let off = (h - 1) as usize;
    match d {
        Dim::One => {
            let mut cur = vec![0.0f64; w];
            let mut next = vec![0.0f64; w];
            cur[off] = 1.0;
            for _ in 0..n {
                for (j, v) in next.iter_mut().enumerate() {
                    let left = if j > 0 { cur[j - 1] } else { 0.0 };
                    let right = if j + 1 < w { cur[j + 1] } else { 0.0 };
                    *v = 0.5 * (left + right);
                }
                std::mem::swap(&mut cur, &mut next);
            }
            (1.0 - cur.iter().sum::<f64>()).clamp(0.0, 1.0)
        }
        Dim::Two => {
            let mut cur = vec![0.0f64; w * w];
            let mut next = vec![0.0f64; w * w];
            cur[off * w + off] = 1.0;
            for _ in 0..n {
                for a in 0..w {
                    for b in 0..w {
                        let mut s = 0.0;
                        if a > 0 {
                            s += cur[(a - 1) * w + b];
                        }
                        if a + 1 < w {
                            s += cur[(a + 1) * w + b];
                        }
                        if b > 0 {
                            s += cur[a * w + b - 1];
                        }
                        if b + 1 < w {
                            s += cur[a * w + b + 1];
                        }
                        next[a * w + b] = 0.25 * s;
                    }
                }
                std::mem::swap(&mut cur, &mut next);
            }
            (1.0 - cur.iter().sum::<f64>()).clamp(0.0, 1.0)
        }
    }
}

/// Exact `P{ S_n = sqrt(n), 0 < S_i < sqrt(n) for 0 < i < n }` in d = 1,
/// for `n` an even perfect square.
pub fn confined_endpoint_prob(n: u64) -> Result<f64> {
    let r = SquareRequirement::EvenSquare.check(n)? as usize;
    if r < 2 {
        return Ok(0.0);
    }
    // Interior states 1..r-1 stored at index z-1.
    let w = r - 1;
    let mut cur = vec![0.0f64; w];
    let mut next = vec![0.0f64; w];
    // S_1 = 1 is the only admissible first step.
    cur[0] = 0.5;
    for _ in 1..n - 1 {
        for (j, v) in next.iter_mut().enumerate() {
            let left = if j > 0 { cur[j - 1] } else { 0.0 };
            let right = if j + 1 < w { cur[j + 1] } else { 0.0 };
            *v = 0.5 * (left + right);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    // Final step from r-1 to r.
    Ok(0.5 * cur[w - 1])
}

/// Exact `P{S_n = x}` for the one-dimensional walk.
pub fn srw_point_probability(n: u64, x: i64) -> f64 {
    let n_i = n as i64;
    if x.abs() > n_i || (n_i + x) % 2 != 0 {
        return 0.0;
    }
    let k = ((n_i + x) / 2) as u64;
    (ln_binomial(n, k) - n as f64 * std::f64::consts::LN_2).exp()
}

pub(crate) fn ln_binomial(n: u64, k: u64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_examples() {
        let c = cell([0, 0], 4, Dim::One).unwrap();
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![[0, 0], [1, 0]]);
        let c2 = cell([1, -1], 4, Dim::Two).unwrap();
        assert_eq!(c2.lo, [2, -2]);
        assert_eq!(c2.hi, [3, -1]);
        assert_eq!(c2.cardinality(), 4);
        assert!(matches!(cell([0, 0], 5, Dim::One), Err(Error::Geometry(_))));
    }

    #[test]
    fn cells_tile_the_line_and_plane() {
        for n in [4u64, 9, 16] {
            for x in -20..20 {
                let y = cell_of([x, 0], n, Dim::One).unwrap();
                let owners = (-20..20).filter(|&k| cell([k, 0], n, Dim::One).unwrap().contains([x, 0])).count();
                assert_eq!(owners, 1);
                assert!(cell(y, n, Dim::One).unwrap().contains([x, 0]));
            }
            for x in -7..7 {
                for yy in -7..7 {
                    let c = cell_of([x, yy], n, Dim::Two).unwrap();
                    assert!(cell(c, n, Dim::Two).unwrap().contains([x, yy]));
                }
            }
        }
        let a = cell([3, 0], 9, Dim::One).unwrap();
        let b = cell([4, 0], 9, Dim::One).unwrap();
        assert_eq!(a.hi[0] + 1, b.lo[0]);
    }

    #[test]
    fn corridor_single_box_count() {
        let plan = CoarsePlan::new(Dim::One, 16, 1, 0.5).unwrap();
        let j = corridor_jy(&[[0, 0]], &plan).unwrap();
        let hw = (plan.constants.c4 * 4.0).floor() as u64;
        assert_eq!(j.cardinality(), 16 * (2 * hw + 1));
    }

    #[test]
    fn corridor_translation_invariant_cardinality() {
        let plan = CoarsePlan::new(Dim::Two, 9, 3, 0.5).unwrap();
        let a = corridor_jy(&[[0, 0], [0, 0], [0, 0]], &plan).unwrap();
        let b = corridor_jy(&[[2, -1], [5, 3], [-4, 0]], &plan).unwrap();
        assert_eq!(a.cardinality(), b.cardinality());
        assert!(b.contains(10, [6, -3]));
    }

    #[test]
    fn escape_probability_small_cases() {
        assert_eq!(escape_probability(5, 6, Dim::One), 0.0);
        assert!((escape_probability(2, 1, Dim::One) - 1.0).abs() < 1e-15);
        assert!((escape_probability(2, 2, Dim::One) - 0.5).abs() < 1e-15);
        assert!((escape_probability(1, 1, Dim::Two) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn confined_endpoint_small_cases() {
        assert_eq!(confined_endpoint_prob(4).unwrap(), 0.0);
        assert!(matches!(confined_endpoint_prob(9), Err(Error::Parity(_))));
        assert!(matches!(confined_endpoint_prob(8), Err(Error::Geometry(_))));
    }

    #[test]
    fn point_probability_sums_to_one() {
        let s: f64 = (-30..=30).map(|x| srw_point_probability(30, x)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((srw_point_probability(2, 0) - 0.5).abs() < 1e-14);
    }
}
