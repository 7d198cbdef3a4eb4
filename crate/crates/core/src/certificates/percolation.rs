use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{confidence_of, BoundDirection, Certificate, CertificateInputs, CertificateMethod};
use crate::disorder::{log_mgf, DisorderSpec, HashedEnvironment};
use crate::error::{Error, Result};
use crate::estimators::{record, replica_map, EstimateCI, EstimatorTag, RunConfig};
use crate::geometry::{confined_endpoint_prob, Dim, SquareRequirement};
use crate::rng::{derive_seed, purpose, stream_rng};
use crate::transfer::{restricted_partition, ConfinedSpec, Direction};

/// Critical parameter of oriented bond percolation on the square lattice.
pub const DEFAULT_PC: f64 = 0.6447;

/// Cells `(i, y)` with `0 <= i < m`, `|y| <= rows` and `i - y` even. From
/// each cell an up edge leads to `(i + 1, y + 1)` and a down edge to
/// `(i + 1, y - 1)`; an edge is open when its restricted partition function
/// reaches the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercoGrid {
    pub n: u64,
    pub m: u64,
    pub rows: i64,
    pub threshold: f64,
    /// Up-edge values `W̄`, `NaN` off the admissible cells (empty for
    /// Bernoulli grids).
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub open_up: Vec<bool>,
    pub open_down: Vec<bool>,
}

impl PercoGrid {
    fn width(&self) -> usize {
        (2 * self.rows + 1) as usize
    }

    pub fn index(&self, i: u64, y: i64) -> Option<usize> {
        if i >= self.m || y.abs() > self.rows || (i as i64 - y).rem_euclid(2) != 0 {
            return None;
        }
        Some(i as usize * self.width() + (y + self.rows) as usize)
    }

    pub fn is_open(&self, i: u64, y: i64, dir: Direction) -> bool {
        self.index(i, y).is_some_and(|k| match dir {
            Direction::Up => self.open_up[k],
            Direction::Down => self.open_down[k],
        })
    }

    pub fn set_open(&mut self, i: u64, y: i64, dir: Direction, open: bool) {
        if let Some(k) = self.index(i, y) {
            match dir {
                Direction::Up => self.open_up[k] = open,
                Direction::Down => self.open_down[k] = open,
            }
        }
    }

    /// Admissible cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        (0..self.m).flat_map(move |i| {
            (-self.rows..=self.rows).filter(move |y| (i as i64 - y).rem_euclid(2) == 0).map(move |y| (i, y))
        })
    }

    /// Every edge open independently with probability `p`.
    pub fn bernoulli<R: Rng + ?Sized>(m: u64, rows: i64, p: f64, rng: &mut R) -> Self {
        let len = m as usize * (2 * rows + 1) as usize;
        let mut g = Self {
            n: 0,
            m,
            rows,
            threshold: f64::NAN,
            up: Vec::new(),
            down: Vec::new(),
            open_up: vec![false; len],
            open_down: vec![false; len],
        };
        let cells: Vec<_> = g.cells().collect();
        for (i, y) in cells {
            let k = g.index(i, y).unwrap();
            g.open_up[k] = rng.random::<f64>() < p;
            g.open_down[k] = rng.random::<f64>() < p;
        }
        g
    }

    /// Fraction of open edges.
    pub fn open_fraction(&self) -> f64 {
        let (mut open, mut total) = (0usize, 0usize);
        for (i, y) in self.cells() {
            let k = self.index(i, y).unwrap();
            open += self.open_up[k] as usize + self.open_down[k] as usize;
            total += 2;
        }
        open as f64 / total as f64
    }
}

fn check_cell_length(n: u64) -> Result<i64> {
    let r = SquareRequirement::EvenSquare.check(n)? as i64;
    if r < 4 {
        return Err(Error::Geometry(format!("n = {n} leaves no confined path; use sqrt(n) >= 4")));
    }
    Ok(r)
}

/// `W̄` for the cell `(i, y)` in direction `dir`: paths over times
/// `(i n, (i + 1) n]` from level `y sqrt(n)` to `(y ± 1) sqrt(n)`, strictly
/// inside the strip in between.
#[allow(clippy::too_many_arguments)]
fn cell_value(
    env: &HashedEnvironment,
    beta: f64,
    spec: &DisorderSpec,
    n: u64,
    r: i64,
    i: u64,
    y: i64,
    dir: Direction,
) -> Result<f64> {
    let conf = ConfinedSpec::new(n, i as i64 * n as i64, y * r, dir)?;
    restricted_partition(env, beta, spec, &conf)
}

/// Builds an `m`-row grid from one environment with seed
/// `cfg.environment_seed(0)`. Up edges of `(i, y)` and down edges of
/// `(i, y + 1)` never share a strip because of the parity constraint, so
/// all cell variables come from disjoint sites.
pub fn build_perco_grid(
    beta: f64,
    n: u64,
    m: u64,
    rows: i64,
    spec: &DisorderSpec,
    cfg: &RunConfig,
) -> Result<PercoGrid> {
    build_perco_grid_seeded(beta, n, m, rows, spec, cfg.environment_seed(0), cfg.workers)
}

pub(crate) fn build_perco_grid_seeded(
    beta: f64,
    n: u64,
    m: u64,
    rows: i64,
    spec: &DisorderSpec,
    seed: u64,
    workers: usize,
) -> Result<PercoGrid> {
    let r = check_cell_length(n)?;
    if m == 0 || rows < 0 {
        return Err(Error::Geometry("grid needs m >= 1 and rows >= 0".into()));
    }
    let env = HashedEnvironment::new(spec, Dim::One, seed)?;
    let threshold = confined_endpoint_prob(n)? / 2.0;
    let len = m as usize * (2 * rows + 1) as usize;
    let mut g = PercoGrid {
        n,
        m,
        rows,
        threshold,
        up: vec![f64::NAN; len],
        down: vec![f64::NAN; len],
        open_up: vec![false; len],
        open_down: vec![false; len],
    };
    let cells: Vec<(u64, i64)> = g.cells().collect();
    let cell_cfg = RunConfig { seed, replicas: cells.len() as u64, workers, batch_size: None };
    let values = replica_map(&cell_cfg, |c| {
        let (i, y) = cells[c as usize];
        Ok((
            cell_value(&env, beta, spec, n, r, i, y, Direction::Up)?,
            cell_value(&env, beta, spec, n, r, i, y, Direction::Down)?,
        ))
    })?;
    for (&(i, y), (u, d)) in cells.iter().zip(values) {
        let k = g.index(i, y).unwrap();
        g.up[k] = u;
        g.down[k] = d;
        g.open_up[k] = u >= threshold;
        g.open_down[k] = d >= threshold;
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSearch {
    /// Length of the longest open path from the origin cell.
    pub longest: u64,
    /// `y_0 = 0, ..., y_m` of the highest spanning path, if one exists.
    pub highest: Option<Vec<i64>>,
}

/// Longest open path from `(0, 0)` and, when some path reaches row `m`,
/// the highest spanning one.
pub fn directed_path_search(grid: &PercoGrid) -> PathSearch {
    let m = grid.m as usize;
    let w = (2 * grid.rows + 1) as usize;
    let col = |y: i64| (y + grid.rows) as usize;
    // reach[i][y]: (i, y) is reachable from the origin, for i = 0..=m
    let mut reach = vec![vec![false; w]; m + 1];
    if grid.rows >= 0 {
        reach[0][col(0)] = true;
    }
    let mut longest = 0u64;
    for i in 0..m {
        for y in -grid.rows..=grid.rows {
            if !reach[i][col(y)] {
                continue;
            }
            for (dir, ny) in [(Direction::Up, y + 1), (Direction::Down, y - 1)] {
                if ny.abs() <= grid.rows && grid.is_open(i as u64, y, dir) {
                    reach[i + 1][col(ny)] = true;
                    longest = longest.max(i as u64 + 1);
                }
            }
        }
    }
    if !reach[m].iter().any(|&b| b) {
        return PathSearch { longest, highest: None };
    }
    // good[i][y]: reachable and extends to row m
    let mut good = vec![vec![false; w]; m + 1];
    good[m].clone_from(&reach[m]);
    for i in (0..m).rev() {
        for y in -grid.rows..=grid.rows {
            if !reach[i][col(y)] {
                continue;
            }
            good[i][col(y)] = [(Direction::Up, y + 1), (Direction::Down, y - 1)]
                .iter()
                .any(|&(dir, ny)| ny.abs() <= grid.rows && grid.is_open(i as u64, y, dir) && good[i + 1][col(ny)]);
        }
    }
    // preferring the up edge gives the pointwise highest path by planarity
    let mut path = vec![0i64];
    let mut y = 0i64;
    for i in 0..m {
        let up = y < grid.rows && grid.is_open(i as u64, y, Direction::Up) && good[i + 1][col(y + 1)];
        y = if up { y + 1 } else { y - 1 };
        path.push(y);
    }
    PathSearch { longest, highest: Some(path) }
}

/// Finite-size estimate of the oriented bond percolation threshold: the
/// `p` at which an `m`-row grid spans with probability 1/2, by bisection
/// with `grids` Bernoulli grids per step.
pub fn estimate_pc(m: u64, grids: u64, seed: u64, steps: u32) -> f64 {
    let (mut lo, mut hi) = (0.5f64, 0.8f64);
    for s in 0..steps {
        let p = 0.5 * (lo + hi);
        let spans = (0..grids)
            .filter(|&g| {
                let mut rng = stream_rng(derive_seed(seed, s as u64, purpose::PERCOLATION), g, purpose::PERCOLATION);
                let grid = PercoGrid::bernoulli(m, m as i64, p, &mut rng);
                directed_path_search(&grid).highest.is_some()
            })
            .count();
        if 2 * spans >= grids as usize {
            hi = p;
        } else {
            lo = p;
        }
    }
    0.5 * (lo + hi)
}

/// `q = Q{W̄ >= QW̄/2}` for the up cell at the origin, one cell per replica.
pub fn open_probability(beta: f64, n: u64, spec: &DisorderSpec, cfg: &RunConfig) -> Result<EstimateCI> {
    let r = check_cell_length(n)?;
    let threshold = confined_endpoint_prob(n)? / 2.0;
    let xs = replica_map(cfg, |k| {
        let env = HashedEnvironment::new(spec, Dim::One, cfg.environment_seed(k))?;
        let v = cell_value(&env, beta, spec, n, r, 0, 0, Direction::Up)?;
        Ok(if v >= threshold { 1.0 } else { 0.0 })
    })?;
    Ok(record(cfg.summarize(&xs), cfg, EstimatorTag::OpenProbability, beta, n as usize, Dim::One, spec, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercoOutcome {
    pub q: EstimateCI,
    /// `q - level * stderr`.
    pub q_lower: f64,
    pub p_c: f64,
    pub certificate: Option<Certificate>,
}

/// Lower bound `p(beta) >= (1/n)[-2 lambda(beta) - log 2 + log QW̄]`, issued
/// when the lower confidence limit of `q` exceeds `p_c`.
pub fn percolation_lower_certificate(
    beta: f64,
    n: u64,
    spec: &DisorderSpec,
    cfg: &RunConfig,
    p_c: f64,
    level: f64,
) -> Result<PercoOutcome> {
    if !(p_c > 0.0 && p_c < 1.0) {
        return Err(Error::Domain(format!("p_c = {p_c} must lie in (0, 1)")));
    }
    let q = open_probability(beta, n, spec, cfg)?;
    let q_lower = q.mean - level * q.stderr;
    let certificate = if q_lower > p_c {
        let value = (-2.0 * log_mgf(spec, beta)? - std::f64::consts::LN_2 + confined_endpoint_prob(n)?.ln()) / n as f64;
        let mut inputs = CertificateInputs::new(beta, n, Dim::One, spec, cfg, level);
        inputs.p_c = Some(p_c);
        Some(Certificate {
            direction: BoundDirection::Lower,
            value,
            confidence: confidence_of(level),
            method: CertificateMethod::Percolation,
            inputs,
            estimate: q.clone(),
            limit: q_lower,
        })
    } else {
        None
    };
    Ok(PercoOutcome { q, q_lower, p_c, certificate })
}
