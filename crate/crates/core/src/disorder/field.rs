use serde::{Deserialize, Serialize};

use super::{DisorderSpec, SiteSampler};
use crate::error::{Error, Result};
use crate::geometry::{Dim, Pos};
use crate::rng::SiteHasher;

/// Finite space-time window: times `t_lo..=t_hi` and a spatial box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub d: Dim,
    pub t_lo: i64,
    pub t_hi: i64,
    pub lo: Pos,
    pub hi: Pos,
}

impl Window {
    pub fn new(d: Dim, t_lo: i64, t_hi: i64, lo: Pos, hi: Pos) -> Result<Self> {
        let mut w = Self { d, t_lo, t_hi, lo, hi };
        if d == Dim::One {
            w.lo[1] = 0;
            w.hi[1] = 0;
        }
        if t_hi < t_lo || w.hi[0] < w.lo[0] || w.hi[1] < w.lo[1] {
            return Err(Error::Geometry(format!("empty window {w:?}")));
        }
        Ok(w)
    }

    /// Window covering every site a walk of length `n` from the origin can
    /// visit at times `1..=n`.
    pub fn cone(d: Dim, n: u64) -> Self {
        let r = n as i64;
        let lo = [-r, if d == Dim::Two { -r } else { 0 }];
        let hi = [r, if d == Dim::Two { r } else { 0 }];
        Self { d, t_lo: 1, t_hi: r.max(1), lo, hi }
    }

    pub fn widths(&self) -> (usize, usize) {
        ((self.hi[0] - self.lo[0] + 1) as usize, (self.hi[1] - self.lo[1] + 1) as usize)
    }

    pub fn len(&self) -> usize {
        let (wx, wy) = self.widths();
        (self.t_hi - self.t_lo + 1) as usize * wx * wy
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, t: i64, p: Pos) -> bool {
        t >= self.t_lo
            && t <= self.t_hi
            && p[0] >= self.lo[0]
            && p[0] <= self.hi[0]
            && p[1] >= self.lo[1]
            && p[1] <= self.hi[1]
    }

    pub fn covers(&self, other: &Window) -> bool {
        self.t_lo <= other.t_lo
            && self.t_hi >= other.t_hi
            && (0..2).all(|a| self.lo[a] <= other.lo[a] && self.hi[a] >= other.hi[a])
    }

    #[inline]
    pub(crate) fn index(&self, t: i64, p: Pos) -> usize {
        let (wx, wy) = self.widths();
        (((t - self.t_lo) as usize * wx) + (p[0] - self.lo[0]) as usize) * wy + (p[1] - self.lo[1]) as usize
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, Pos)> + '_ {
        (self.t_lo..=self.t_hi).flat_map(move |t| {
            (self.lo[0]..=self.hi[0]).flat_map(move |x| (self.lo[1]..=self.hi[1]).map(move |y| (t, [x, y])))
        })
    }
}

/// Which law produced a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum MeasureTag {
    Base,
    Shifted { delta: f64, region_sites: u64 },
    Correlated { block_dim: usize, blocks: usize, min_eigenvalue: f64 },
    Penalized { k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: DisorderSpec,
    pub seed: u64,
    pub tag: MeasureTag,
}

/// Read access to a quenched environment.
pub trait Environment: Sync {
    fn dim(&self) -> Dim;

    /// Whether every site of `w` has a value.
    fn covers(&self, w: &Window) -> bool;

    /// Value at a covered site. Callers check coverage first.
    fn value(&self, t: i64, p: Pos) -> f64;

    fn try_value(&self, t: i64, p: Pos) -> Result<f64> {
        let probe = Window { d: self.dim(), t_lo: t, t_hi: t, lo: p, hi: p };
        if self.covers(&probe) {
            Ok(self.value(t, p))
        } else {
            Err(Error::OutOfWindow { t, pos: p })
        }
    }
}

/// One disorder realization stored densely on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentField {
    window: Window,
    values: Vec<f64>,
    provenance: Provenance,
}

impl EnvironmentField {
    pub fn from_values(window: Window, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.len() != window.len() {
            return Err(Error::Geometry(format!(
                "window has {} sites but {} values were given",
                window.len(),
                values.len()
            )));
        }
        Ok(Self { window, values, provenance })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn get(&self, t: i64, p: Pos) -> Result<f64> {
        if self.window.contains(t, p) {
            Ok(self.values[self.window.index(t, p)])
        } else {
            Err(Error::OutOfWindow { t, pos: p })
        }
    }

    pub(crate) fn set(&mut self, t: i64, p: Pos, v: f64) {
        let i = self.window.index(t, p);
        self.values[i] = v;
    }
}

impl Environment for EnvironmentField {
    fn dim(&self) -> Dim {
        self.window.d
    }

    fn covers(&self, w: &Window) -> bool {
        self.window.covers(w)
    }

    #[inline]
    fn value(&self, t: i64, p: Pos) -> f64 {
        self.values[self.window.index(t, p)]
    }
}

/// An unbounded i.i.d. environment whose values are generated on demand
/// from the site hash. Materializing it on any window gives exactly
/// [`sample_environment`] for the same seed.
#[derive(Debug, Clone)]
pub struct HashedEnvironment {
    d: Dim,
    spec: DisorderSpec,
    seed: u64,
    hasher: SiteHasher,
    sampler: SiteSampler,
}

impl HashedEnvironment {
    pub fn new(spec: &DisorderSpec, d: Dim, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self { d, spec: spec.clone(), seed, hasher: SiteHasher::new(seed), sampler: SiteSampler::new(spec, 0.0)? })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &DisorderSpec {
        &self.spec
    }

    pub fn materialize(&self, window: &Window) -> EnvironmentField {
        let values = window.sites().map(|(t, p)| self.sampler.sample(&self.hasher, t, p[0], p[1])).collect();
        EnvironmentField {
            window: *window,
            values,
            provenance: Provenance { spec: self.spec.clone(), seed: self.seed, tag: MeasureTag::Base },
        }
    }
}

impl Environment for HashedEnvironment {
    fn dim(&self) -> Dim {
        self.d
    }

    fn covers(&self, _w: &Window) -> bool {
        true
    }

    #[inline]
    fn value(&self, t: i64, p: Pos) -> f64 {
        self.sampler.sample(&self.hasher, t, p[0], p[1])
    }
}

/// i.i.d. field on `window`, a deterministic function of `(spec, seed)`.
pub fn sample_environment(spec: &DisorderSpec, window: &Window, seed: u64) -> Result<EnvironmentField> {
    if window.is_empty() {
        return Err(Error::Geometry("empty window".into()));
    }
    Ok(HashedEnvironment::new(spec, window.d, seed)?.materialize(window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed, purpose};

    #[test]
    fn sampling_is_deterministic() {
        let w = Window::new(Dim::Two, 1, 5, [-3, -2], [4, 2]).unwrap();
        for spec in [DisorderSpec::Gaussian, DisorderSpec::Rademacher] {
            let a = sample_environment(&spec, &w, 99).unwrap();
            let b = sample_environment(&spec, &w, 99).unwrap();
            assert_eq!(a.values(), b.values());
            let c = sample_environment(&spec, &w, 100).unwrap();
            assert_ne!(a.values(), c.values());
        }
    }

    #[test]
    fn values_do_not_depend_on_window() {
        let spec = DisorderSpec::Gaussian;
        let big = sample_environment(&spec, &Window::new(Dim::One, 1, 10, [-10, 0], [10, 0]).unwrap(), 5).unwrap();
        let small = sample_environment(&spec, &Window::new(Dim::One, 3, 4, [-1, 0], [2, 0]).unwrap(), 5).unwrap();
        for (t, p) in small.window().sites() {
            assert_eq!(small.get(t, p).unwrap(), big.get(t, p).unwrap());
        }
    }

    #[test]
    fn out_of_window_access_is_an_error() {
        let w = Window::new(Dim::One, 1, 3, [-2, 0], [2, 0]).unwrap();
        let f = sample_environment(&DisorderSpec::Gaussian, &w, 1).unwrap();
        assert!(matches!(f.get(4, [0, 0]), Err(Error::OutOfWindow { .. })));
        assert!(matches!(f.get(1, [3, 0]), Err(Error::OutOfWindow { .. })));
        assert!(f.try_value(0, [0, 0]).is_err());
        assert!(f.get(2, [-2, 0]).is_ok());
    }

    #[test]
    fn gaussian_sample_mean() {
        let w = Window::new(Dim::One, 1, 1000, [0, 0], [999, 0]).unwrap();
        let f = sample_environment(&DisorderSpec::Gaussian, &w, 2024).unwrap();
        let n = f.values().len() as f64;
        let mean = f.values().iter().sum::<f64>() / n;
        let var = f.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn split_seeds_are_uncorrelated() {
        let spec = DisorderSpec::Gaussian;
        let w1 = Window::new(Dim::One, 1, 200, [0, 0], [199, 0]).unwrap();
        let w2 = Window::new(Dim::One, 1, 200, [500, 0], [699, 0]).unwrap();
        let a = sample_environment(&spec, &w1, derive_seed(3, 0, purpose::ENVIRONMENT)).unwrap();
        let b = sample_environment(&spec, &w2, derive_seed(3, 1, purpose::ENVIRONMENT)).unwrap();
        let n = a.values().len() as f64;
        let rho = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>() / n;
        assert!(rho.abs() < 0.01, "rho {rho}");
    }

    #[test]
    fn rademacher_values_are_signs() {
        let w = Window::new(Dim::One, 1, 50, [-50, 0], [50, 0]).unwrap();
        let f = sample_environment(&DisorderSpec::Rademacher, &w, 4).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0 || v == -1.0));
        let mean = f.values().iter().sum::<f64>() / f.values().len() as f64;
        assert!(mean.abs() < 4.0 / (f.values().len() as f64).sqrt());
    }
}
