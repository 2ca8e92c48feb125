//! Continuous process distributions and the location-shift model.
//!
//! A `DistributionSpec` is a named family, optionally rescaled to unit
//! variance, plus a location shift expressed in units of the (possibly
//! rescaled) standard deviation. Shifting the test distribution by delta
//! relative to the reference distribution is the out-of-control model used
//! everywhere in the crate.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::uniform_open01;
use crate::stats::{norm_cdf, norm_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Uniform01,
    Normal,
    Laplace,
    /// Gamma with shape 2 and rate 2 (mean 1, variance 1/2).
    Gamma22,
    Exponential,
}

impl Family {
    /// Standard deviation of the unscaled family.
    fn raw_sd(self) -> f64 {
        match self {
            Family::Uniform01 => (1.0f64 / 12.0).sqrt(),
            Family::Normal => 1.0,
            Family::Laplace => 2.0f64.sqrt(),
            Family::Gamma22 => 0.5f64.sqrt(),
            Family::Exponential => 1.0,
        }
    }

    fn raw_cdf(self, x: f64) -> f64 {
        match self {
            Family::Uniform01 => x.clamp(0.0, 1.0),
            Family::Normal => norm_cdf(x),
            Family::Laplace => {
                if x < 0.0 {
                    0.5 * x.exp()
                } else {
                    1.0 - 0.5 * (-x).exp()
                }
            }
            Family::Gamma22 => {
                if x <= 0.0 {
                    0.0
                } else {
                    // Erlang(2, rate 2)
                    -f64::exp_m1(-2.0 * x) - 2.0 * x * (-2.0 * x).exp()
                }
            }
            Family::Exponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -f64::exp_m1(-x)
                }
            }
        }
    }

    /// One unscaled draw. Consumes a fixed number of uniforms per variate so
    /// parallel streams stay aligned across shift values.
    fn raw_draw<R: RngCore>(self, rng: &mut R) -> f64 {
        match self {
            Family::Uniform01 => uniform_open01(rng),
            Family::Normal => norm_quantile(uniform_open01(rng)),
            Family::Laplace => {
                let u = uniform_open01(rng);
                if u < 0.5 {
                    (2.0 * u).ln()
                } else {
                    -(2.0 * (1.0 - u)).ln()
                }
            }
            Family::Gamma22 => {
                let u1 = uniform_open01(rng);
                let u2 = uniform_open01(rng);
                -(u1.ln() + u2.ln()) / 2.0
            }
            Family::Exponential => -uniform_open01(rng).ln(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform01 => "uniform01",
            Family::Normal => "normal",
            Family::Laplace => "laplace",
            Family::Gamma22 => "gamma22",
            Family::Exponential => "exponential",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        match s {
            "uniform01" | "uniform" => Ok(Family::Uniform01),
            "normal" => Ok(Family::Normal),
            "laplace" => Ok(Family::Laplace),
            "gamma22" | "gamma" => Ok(Family::Gamma22),
            "exponential" | "exp" => Ok(Family::Exponential),
            other => Err(Error::invalid(format!(
                "unknown distribution family '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    pub family: Family,
    /// Location shift in units of the standard deviation.
    pub shift_delta: f64,
    /// When set, the family is rescaled to unit variance before shifting.
    pub standardized: bool,
}

impl DistributionSpec {
    pub fn new(family: Family, shift_delta: f64, standardized: bool) -> Self {
        DistributionSpec {
            family,
            shift_delta,
            standardized,
        }
    }

    /// The family at its in-control location.
    pub fn in_control(family: Family) -> Self {
        DistributionSpec::new(family, 0.0, false)
    }

    /// Unit-variance version of the family, unshifted.
    pub fn standardized(family: Family) -> Self {
        DistributionSpec::new(family, 0.0, true)
    }

    pub fn with_shift(self, delta: f64) -> Self {
        DistributionSpec {
            shift_delta: delta,
            ..self
        }
    }

    /// Standard deviation of the (possibly standardized) base family; the
    /// shift is `shift_delta` times this.
    pub fn base_sd(&self) -> f64 {
        if self.standardized {
            1.0
        } else {
            self.family.raw_sd()
        }
    }

    fn base_cdf(&self, z: f64) -> f64 {
        if self.standardized {
            self.family.raw_cdf(z * self.family.raw_sd())
        } else {
            self.family.raw_cdf(z)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.base_cdf(x - self.shift_delta * self.base_sd())
    }

    pub fn draw<R: RngCore>(&self, rng: &mut R) -> f64 {
        let raw = self.family.raw_draw(rng);
        let base = if self.standardized {
            raw / self.family.raw_sd()
        } else {
            raw
        };
        base + self.shift_delta * self.base_sd()
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.draw(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::stats::ks_distance_uniform;

    const ALL: [Family; 5] = [
        Family::Uniform01,
        Family::Normal,
        Family::Laplace,
        Family::Gamma22,
        Family::Exponential,
    ];

    #[test]
    fn cdf_trivial_points() {
        assert_eq!(
            DistributionSpec::in_control(Family::Uniform01).cdf(0.5),
            0.5
        );
        assert!((DistributionSpec::in_control(Family::Normal).cdf(0.0) - 0.5).abs() < 1e-15);
        // standardized laplace is symmetric about 0
        assert!((DistributionSpec::standardized(Family::Laplace).cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cdf_monotone_with_limits() {
        for fam in ALL {
            let spec = DistributionSpec::standardized(fam);
            let mut prev = 0.0;
            for i in -400..=400 {
                let x = i as f64 / 20.0;
                let c = spec.cdf(x);
                assert!((0.0..=1.0).contains(&c));
                assert!(c + 1e-15 >= prev, "{fam:?} not monotone at {x}");
                prev = c;
            }
            assert!(spec.cdf(-1e6) < 1e-12);
            assert!(spec.cdf(1e6) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn shift_contract_is_exact() {
        for fam in ALL {
            for &delta in &[-1.0, 0.25, 2.0] {
                let shifted = DistributionSpec::new(fam, delta, true);
                let base = DistributionSpec::standardized(fam);
                for i in -10..10 {
                    let x = i as f64 / 3.0;
                    assert_eq!(shifted.cdf(x), base.cdf(x - delta));
                }
            }
        }
    }

    #[test]
    fn probability_integral_transform_ks() {
        // 99% KS band for n = 1e5 draws: 1.628 / sqrt(n)
        let n = 100_000;
        let band = 1.628 / (n as f64).sqrt();
        for (i, fam) in ALL.into_iter().enumerate() {
            let spec = DistributionSpec::standardized(fam);
            let mut rng = stream_rng(42, i as u64);
            let mut u: Vec<f64> = (0..n).map(|_| spec.cdf(spec.draw(&mut rng))).collect();
            u.sort_by(f64::total_cmp);
            let d = ks_distance_uniform(&u);
            assert!(d < band, "{fam:?}: KS {d} exceeds 99% band {band}");
        }
    }

    #[test]
    fn standardized_moments() {
        // CLT bound on the mean of 1e6 unit-variance draws: 3/sqrt(1e6)
        let n = 1_000_000;
        let spec = DistributionSpec::standardized(Family::Laplace);
        let mut rng = stream_rng(7, 0);
        let xs = spec.sample(&mut rng, n);
        let mean = crate::stats::mean(&xs);
        assert!(mean.abs() < 0.005, "laplace mean {mean}");

        let spec = DistributionSpec::standardized(Family::Gamma22);
        let mut rng = stream_rng(7, 1);
        let xs = spec.sample(&mut rng, n);
        let mean = crate::stats::mean(&xs);
        let var: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
        assert!(
            (var - 1.0).abs() < 0.01,
            "gamma22 standardized variance {var}"
        );
    }

    #[test]
    fn uniform_draws_in_unit_interval() {
        let spec = DistributionSpec::in_control(Family::Uniform01);
        let mut rng = stream_rng(3, 0);
        for _ in 0..10_000 {
            let x = spec.draw(&mut rng);
            assert!((0.0..1.0).contains(&x));
        }
    }
}
