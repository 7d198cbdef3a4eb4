use serde::{Deserialize, Serialize};

use super::field::{Environment, EnvironmentField, MeasureTag, Provenance, Window};
use super::{log_mgf, DisorderSpec, SiteSampler};
use crate::error::{Error, Result};
use crate::geometry::SiteSet;
use crate::rng::SiteHasher;

/// Exponential tilt by `-delta` on the sites of `region`. For Gaussian
/// disorder this is the mean shift `omega -> omega - delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftPlan {
    pub region: SiteSet,
    pub delta: f64,
}

impl ShiftPlan {
    pub fn new(region: SiteSet, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("shift magnitude {delta} must be >= 0")));
        }
        Ok(Self { region, delta })
    }

    fn check_inside(&self, covers: impl Fn(&Window) -> bool) -> Result<()> {
        let Some(bb) = self.region.bounding_box() else {
            return Ok(());
        };
        let w = Window { d: self.region.dim(), t_lo: bb.t_lo, t_hi: bb.t_hi, lo: bb.space.lo, hi: bb.space.hi };
        if covers(&w) {
            Ok(())
        } else {
            Err(Error::Geometry("shift region is not inside the environment window".into()))
        }
    }
}

/// `log dQ~/dQ (omega) = -sum_J [delta omega + lambda(-delta)]`.
pub fn shift_log_density<E: Environment + ?Sized>(omega: &E, plan: &ShiftPlan, spec: &DisorderSpec) -> Result<f64> {
    if plan.delta == 0.0 {
        return Ok(0.0);
    }
    plan.check_inside(|w| omega.covers(w))?;
    let l = log_mgf(spec, -plan.delta)?;
    let sum: f64 = plan.region.iter().map(|(t, p)| omega.value(t, p)).sum();
    Ok(-plan.delta * sum - plan.region.cardinality() as f64 * l)
}

/// Radon-Nikodym derivative of the shifted law with respect to the base law.
pub fn shift_density<E: Environment + ?Sized>(omega: &E, plan: &ShiftPlan, spec: &DisorderSpec) -> Result<f64> {
    shift_log_density(omega, plan, spec).map(f64::exp)
}

/// Unbounded shifted field generated on demand; it agrees site by site
/// with [`sample_shifted`] for the same seed.
#[derive(Debug, Clone)]
pub struct ShiftedEnvironment {
    d: crate::geometry::Dim,
    hasher: SiteHasher,
    base: SiteSampler,
    tilted: SiteSampler,
    plan: ShiftPlan,
}

impl ShiftedEnvironment {
    pub fn new(spec: &DisorderSpec, plan: &ShiftPlan, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            d: plan.region.dim(),
            hasher: SiteHasher::new(seed),
            base: SiteSampler::new(spec, 0.0)?,
            tilted: SiteSampler::new(spec, -plan.delta)?,
            plan: plan.clone(),
        })
    }
}

impl Environment for ShiftedEnvironment {
    fn dim(&self) -> crate::geometry::Dim {
        self.d
    }

    fn covers(&self, _w: &Window) -> bool {
        true
    }

    #[inline]
    fn value(&self, t: i64, p: crate::geometry::Pos) -> f64 {
        let s = if self.plan.region.contains(t, p) { &self.tilted } else { &self.base };
        s.sample(&self.hasher, t, p[0], p[1])
    }
}

/// Field under the shifted law. Sites off the region reuse the base
/// values of the same seed, and so do sites on it when `delta = 0`.
pub fn sample_shifted(spec: &DisorderSpec, window: &Window, plan: &ShiftPlan, seed: u64) -> Result<EnvironmentField> {
    spec.validate()?;
    plan.check_inside(|w| window.covers(w))?;
    let hasher = SiteHasher::new(seed);
    let base = SiteSampler::new(spec, 0.0)?;
    let tilted = SiteSampler::new(spec, -plan.delta)?;
    let values = window
        .sites()
        .map(|(t, p)| {
            let s = if plan.region.contains(t, p) { &tilted } else { &base };
            s.sample(&hasher, t, p[0], p[1])
        })
        .collect();
    EnvironmentField::from_values(
        *window,
        values,
        Provenance {
            spec: spec.clone(),
            seed,
            tag: MeasureTag::Shifted { delta: plan.delta, region_sites: plan.region.cardinality() },
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_environment, tilted_mean};
    use crate::geometry::{Dim, SiteBox, SpatialBox};

    fn region(d: Dim) -> SiteSet {
        SiteSet::from_disjoint_boxes(d, vec![SiteBox { t_lo: 2, t_hi: 4, space: SpatialBox::ball(d, [0, 0], 1) }])
            .unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let w = Window::new(Dim::One, 1, 6, [-3, 0], [3, 0]).unwrap();
        for spec in [DisorderSpec::Gaussian, DisorderSpec::Rademacher] {
            let plan = ShiftPlan::new(region(Dim::One), 0.0).unwrap();
            let base = sample_environment(&spec, &w, 17).unwrap();
            let shifted = sample_shifted(&spec, &w, &plan, 17).unwrap();
            assert_eq!(base.values(), shifted.values());
            assert_eq!(shift_density(&base, &plan, &spec).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_site_gaussian_density() {
        let w = Window::new(Dim::One, 1, 1, [0, 0], [0, 0]).unwrap();
        let f = EnvironmentField::from_values(
            w,
            vec![0.0],
            Provenance { spec: DisorderSpec::Gaussian, seed: 0, tag: MeasureTag::Base },
        )
        .unwrap();
        let plan = ShiftPlan::new(SiteSet::from_sites(Dim::One, vec![(1, [0, 0])]), 1.0).unwrap();
        let v = shift_density(&f, &plan, &DisorderSpec::Gaussian).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn off_region_values_unchanged_and_on_region_mean_shifts() {
        let w = Window::new(Dim::One, 1, 4, [-200, 0], [200, 0]).unwrap();
        let r = SiteSet::from_disjoint_boxes(
            Dim::One,
            vec![SiteBox { t_lo: 1, t_hi: 4, space: SpatialBox::ball(Dim::One, [0, 0], 150) }],
        )
        .unwrap();
        for spec in [DisorderSpec::Gaussian, DisorderSpec::Rademacher] {
            let plan = ShiftPlan::new(r.clone(), 0.3).unwrap();
            let base = sample_environment(&spec, &w, 5).unwrap();
            let sh = sample_shifted(&spec, &w, &plan, 5).unwrap();
            let mut on = Vec::new();
            for (t, p) in w.sites() {
                if r.contains(t, p) {
                    on.push(sh.get(t, p).unwrap());
                } else {
                    assert_eq!(sh.get(t, p).unwrap(), base.get(t, p).unwrap());
                }
            }
            let mean = on.iter().sum::<f64>() / on.len() as f64;
            let expect = tilted_mean(&spec, -0.3).unwrap();
            assert!((mean - expect).abs() < 4.0 / (on.len() as f64).sqrt(), "{mean} vs {expect}");
        }
    }

    #[test]
    fn lazy_shift_matches_materialized() {
        let w = Window::new(Dim::One, 1, 6, [-3, 0], [3, 0]).unwrap();
        let plan = ShiftPlan::new(region(Dim::One), 0.4).unwrap();
        for spec in [DisorderSpec::Gaussian, DisorderSpec::Rademacher] {
            let a = sample_shifted(&spec, &w, &plan, 8).unwrap();
            let b = ShiftedEnvironment::new(&spec, &plan, 8).unwrap();
            for (t, p) in w.sites() {
                assert_eq!(a.get(t, p).unwrap(), b.value(t, p));
            }
        }
    }

    #[test]
    fn region_outside_window_is_rejected() {
        let w = Window::new(Dim::One, 1, 3, [-1, 0], [1, 0]).unwrap();
        let plan = ShiftPlan::new(region(Dim::One), 0.5).unwrap();
        assert!(sample_shifted(&DisorderSpec::Gaussian, &w, &plan, 1).is_err());
        assert!(ShiftPlan::new(region(Dim::One), -0.1).is_err());
    }
}
