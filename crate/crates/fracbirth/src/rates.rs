//! Birth-rate schedules `lambda_k` and their validation.
//!
//! Two families are supported: the linear family `lambda_k = lambda k`
//! (Yule–Furry) and explicit finite prefixes. The partial-fraction solution
//! for general rates requires pairwise-distinct values, so validation
//! hard-errors on exact duplicates and records the smallest relative gap
//! as a conditioning diagnostic.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative gap below which partial-fraction coefficients lose roughly
/// six digits; validation warns (does not error) under this.
pub const DEGENERATE_GAP: f64 = 1e-6;

/// A birth-rate sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RateSchedule {
    /// `lambda_k = lambda * k`.
    Linear { lambda: f64 },
    /// Explicit finite prefix `lambda_1, ..., lambda_n`.
    Explicit { rates: Vec<f64> },
}

impl RateSchedule {
    pub fn linear(lambda: f64) -> Self {
        RateSchedule::Linear { lambda }
    }

    pub fn explicit(rates: Vec<f64>) -> Self {
        RateSchedule::Explicit { rates }
    }

    /// `lambda_k` for one-based `k`.
    pub fn rate_at(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain("state index k is one-based".into()));
        }
        match self {
            RateSchedule::Linear { lambda } => Ok(lambda * k as f64),
            RateSchedule::Explicit { rates } => rates
                .get(k - 1)
                .copied()
                .ok_or(Error::IndexOutOfRange { k, len: rates.len() }),
        }
    }

    /// Confirms positivity and pairwise distinctness of the first `k_max`
    /// rates; returns the schedule with its conditioning diagnostics.
    pub fn validate(self, k_max: usize) -> Result<ValidatedSchedule> {
        if k_max == 0 {
            return Err(Error::Domain("k_max must be >= 1".into()));
        }
        match &self {
            RateSchedule::Linear { lambda } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::NonPositiveRate(1, *lambda));
                }
                // lambda (k-1) vs lambda k: gap 1/k, smallest at k = k_max.
                let min_gap = if k_max == 1 { 1.0 } else { 1.0 / k_max as f64 };
                Ok(ValidatedSchedule {
                    schedule: self,
                    k_max,
                    min_relative_gap: min_gap,
                    degenerate: min_gap < DEGENERATE_GAP,
                })
            }
            RateSchedule::Explicit { rates } => {
                if k_max > rates.len() {
                    return Err(Error::IndexOutOfRange {
                        k: k_max,
                        len: rates.len(),
                    });
                }
                let prefix = &rates[..k_max];
                for (i, &r) in prefix.iter().enumerate() {
                    if !(r.is_finite() && r > 0.0) {
                        return Err(Error::NonPositiveRate(i + 1, r));
                    }
                }
                let mut min_gap = f64::INFINITY;
                for i in 0..prefix.len() {
                    for j in (i + 1)..prefix.len() {
                        if prefix[i] == prefix[j] {
                            return Err(Error::DuplicateRates(i + 1, j + 1, prefix[i]));
                        }
                        let gap = (prefix[i] - prefix[j]).abs() / prefix[i].max(prefix[j]);
                        min_gap = min_gap.min(gap);
                    }
                }
                if k_max == 1 {
                    min_gap = 1.0;
                }
                Ok(ValidatedSchedule {
                    schedule: self,
                    k_max,
                    min_relative_gap: min_gap,
                    degenerate: min_gap < DEGENERATE_GAP,
                })
            }
        }
    }
}

/// A schedule whose first `k_max` rates passed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSchedule {
    schedule: RateSchedule,
    k_max: usize,
    min_relative_gap: f64,
    degenerate: bool,
}

impl ValidatedSchedule {
    pub fn schedule(&self) -> &RateSchedule {
        &self.schedule
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Smallest relative gap |l_i - l_j| / max(l_i, l_j) over the prefix.
    pub fn min_relative_gap(&self) -> f64 {
        self.min_relative_gap
    }

    /// True when the gap diagnostic fell under [`DEGENERATE_GAP`]; the
    /// schedule is usable but partial fractions lose accuracy.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `lambda_k`, guaranteed error-free for `k <= k_max`.
    pub fn rate_at(&self, k: usize) -> Result<f64> {
        self.schedule.rate_at(k)
    }

    /// Non-explosion diagnostic: the partial sum of `1/lambda_k` and the
    /// analytic verdict where one exists.
    pub fn non_explosion_check(&self, k_max: usize) -> Result<NonExplosionCheck> {
        if k_max == 0 {
            return Err(Error::Domain("k_max must be >= 1".into()));
        }
        let mut sum = 0.0;
        for k in 1..=k_max {
            sum += 1.0 / self.schedule.rate_at(k)?;
        }
        let verdict = match self.schedule {
            // sum 1/(lambda k) is harmonic: diverges, so never explodes.
            RateSchedule::Linear { .. } => ExplosionVerdict::DivergesAnalytically,
            // A finite prefix cannot decide the series.
            RateSchedule::Explicit { .. } => ExplosionVerdict::Inconclusive,
        };
        Ok(NonExplosionCheck {
            partial_sum: sum,
            verdict,
        })
    }
}

/// Verdict of the non-explosion criterion `sum 1/lambda_k = inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExplosionVerdict {
    /// The full series provably diverges (linear family).
    DivergesAnalytically,
    /// Only a finite prefix is known.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonExplosionCheck {
    pub partial_sum: f64,
    pub verdict: ExplosionVerdict,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_rate_lookup() {
        let s = RateSchedule::linear(2.0);
        assert_eq!(s.rate_at(3).unwrap(), 6.0);
    }

    #[test]
    fn explicit_rate_lookup_and_bounds() {
        let s = RateSchedule::explicit(vec![1.0, 3.0, 7.0]);
        assert_eq!(s.rate_at(2).unwrap(), 3.0);
        assert!(matches!(
            s.rate_at(4),
            Err(Error::IndexOutOfRange { k: 4, len: 3 })
        ));
    }

    #[test]
    fn duplicate_rates_rejected() {
        let s = RateSchedule::explicit(vec![1.0, 1.0, 2.0]);
        assert!(matches!(s.validate(3), Err(Error::DuplicateRates(1, 2, _))));
    }

    #[test]
    fn linear_min_gap() {
        let v = RateSchedule::linear(1.0).validate(100).unwrap();
        assert_abs_diff_eq!(v.min_relative_gap(), 0.01, epsilon = 1e-15);
        assert!(!v.is_degenerate());
    }

    #[test]
    fn near_duplicate_warns_but_validates() {
        let v = RateSchedule::explicit(vec![1.0, 1.0 + 1e-9])
            .validate(2)
            .unwrap();
        assert!(v.is_degenerate());
    }

    #[test]
    fn non_positive_rate_rejected() {
        assert!(matches!(
            RateSchedule::explicit(vec![1.0, -2.0]).validate(2),
            Err(Error::NonPositiveRate(2, _))
        ));
        assert!(matches!(
            RateSchedule::linear(0.0).validate(1),
            Err(Error::NonPositiveRate(_, _))
        ));
    }

    #[test]
    fn validate_idempotent() {
        let v1 = RateSchedule::linear(1.5).validate(10).unwrap();
        let v2 = v1.schedule().clone().validate(10).unwrap();
        assert_eq!(v1, v2);
        for k in 1..=10 {
            assert!(v1.rate_at(k).is_ok());
        }
    }

    #[test]
    fn linear_ratio_constant() {
        let v = RateSchedule::linear(2.5).validate(20).unwrap();
        for k in 1..=20 {
            assert_abs_diff_eq!(v.rate_at(k).unwrap() / k as f64, 2.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn harmonic_partial_sum() {
        let v = RateSchedule::linear(1.0).validate(4).unwrap();
        let c = v.non_explosion_check(4).unwrap();
        assert_abs_diff_eq!(c.partial_sum, 1.0 + 0.5 + 1.0 / 3.0 + 0.25, epsilon = 1e-12);
        assert_eq!(c.verdict, ExplosionVerdict::DivergesAnalytically);
    }

    #[test]
    fn explicit_partial_sum_inconclusive() {
        let v = RateSchedule::explicit(vec![1.0, 2.0, 4.0]).validate(3).unwrap();
        let c = v.non_explosion_check(3).unwrap();
        assert_abs_diff_eq!(c.partial_sum, 1.75, epsilon = 1e-12);
        assert_eq!(c.verdict, ExplosionVerdict::Inconclusive);
    }

    #[test]
    fn single_rate_linear_check() {
        let v = RateSchedule::linear(10.0).validate(1).unwrap();
        let c = v.non_explosion_check(1).unwrap();
        assert_abs_diff_eq!(c.partial_sum, 0.1, epsilon = 1e-12);
        assert_eq!(c.verdict, ExplosionVerdict::DivergesAnalytically);
    }

    #[test]
    fn schedule_json_round_trip() {
        let s: RateSchedule = serde_json::from_str(r#"{"kind":"linear","lambda":1.0}"#).unwrap();
        assert_eq!(s, RateSchedule::linear(1.0));
        let s: RateSchedule =
            serde_json::from_str(r#"{"kind":"explicit","rates":[1.0,2.5,4.0]}"#).unwrap();
        assert_eq!(s, RateSchedule::explicit(vec![1.0, 2.5, 4.0]));
    }
}
