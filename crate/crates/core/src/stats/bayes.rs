use serde::{Deserialize, Serialize};

use super::binomial::ln_binom_pmf;
use super::special::ln_beta;
use super::StatsError;

/// Beta prior on the subject-cohort rate under the alternative hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self::UNIFORM
    }
}

impl BetaPrior {
    pub const UNIFORM: BetaPrior = BetaPrior {
        alpha: 1.0,
        beta: 1.0,
    };

    fn is_uniform(&self) -> bool {
        self.alpha == 1.0 && self.beta == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactor {
    pub log_b: f64,
}

impl BayesFactor {
    /// `B` itself; `+inf` when it overflows.
    pub fn value(&self) -> f64 {
        self.log_b.exp()
    }
}

/// Evidence category on the `3 / 20 / 150` scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    BareMention,
    Positive,
    Strong,
    VeryStrong,
}

impl Evidence {
    pub fn classify(b: f64) -> Self {
        if b >= 150.0 {
            Evidence::VeryStrong
        } else if b >= 20.0 {
            Evidence::Strong
        } else if b >= 3.0 {
            Evidence::Positive
        } else {
            Evidence::BareMention
        }
    }
}

/// Marginal likelihood of `k` successes in `n` trials under a Beta prior,
/// over the likelihood under the fixed null rate `p0`. Evaluated in log
/// space; the binomial coefficient cancels.
pub fn bayes_factor(k: u64, n: u64, p0: f64, prior: BetaPrior) -> Result<BayesFactor, StatsError> {
    if k > n {
        return Err(StatsError::Domain(format!("k = {k} exceeds n = {n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::Domain(format!("p0 = {p0} outside (0, 1)")));
    }
    if !(prior.alpha > 0.0 && prior.beta > 0.0) || !prior.alpha.is_finite() || !prior.beta.is_finite() {
        return Err(StatsError::Domain(format!(
            "Beta({}, {}) is not a proper prior",
            prior.alpha, prior.beta
        )));
    }
    let log_b = if prior.is_uniform() {
        // Uniform prior: marginal likelihood is exactly 1 / (n + 1).
        -((n + 1) as f64).ln() - ln_binom_pmf(k, n, p0)
    } else {
        let (kf, nf) = (k as f64, n as f64);
        ln_beta(kf + prior.alpha, nf - kf + prior.beta)
            - ln_beta(prior.alpha, prior.beta)
            - kf * p0.ln()
            - (nf - kf) * (-p0).ln_1p()
    };
    Ok(BayesFactor { log_b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_prior_examples() {
        let b = bayes_factor(8, 10, 0.5, BetaPrior::UNIFORM).unwrap();
        assert_relative_eq!(b.value(), (1.0 / 11.0) / (45.0 / 1024.0), max_relative = 1e-13);
        assert_relative_eq!(b.value(), 2.0687, max_relative = 1e-4);
        assert_relative_eq!(b.log_b, 0.727, epsilon = 1e-3);

        let b = bayes_factor(5, 10, 0.5, BetaPrior::UNIFORM).unwrap();
        assert_relative_eq!(b.value(), 1024.0 / (11.0 * 252.0), max_relative = 1e-13);
        assert!(b.value() < 1.0);

        let b = bayes_factor(10, 10, 0.5, BetaPrior::UNIFORM).unwrap();
        assert_relative_eq!(b.value(), 1024.0 / 11.0, max_relative = 1e-13);
        assert_relative_eq!(b.log_b, 4.534, epsilon = 1e-3);
        assert_eq!(Evidence::classify(b.value()), Evidence::Strong);
    }

    #[test]
    fn general_prior_agrees_with_uniform_path() {
        // Beta(1, 1) through the general formula.
        for (k, n, p0) in [(3u64, 40u64, 0.02f64), (0, 17, 0.3), (55, 60, 0.7)] {
            let (kf, nf) = (k as f64, n as f64);
            let general = ln_beta(kf + 1.0, nf - kf + 1.0) - kf * p0.ln() - (nf - kf) * (1.0 - p0).ln();
            let fast = bayes_factor(k, n, p0, BetaPrior::UNIFORM).unwrap().log_b;
            assert_relative_eq!(general, fast, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn evidence_categories() {
        assert_eq!(Evidence::classify(2.9), Evidence::BareMention);
        assert_eq!(Evidence::classify(3.0), Evidence::Positive);
        assert_eq!(Evidence::classify(149.0), Evidence::Strong);
        assert_eq!(Evidence::classify(150.0), Evidence::VeryStrong);
    }

    #[test]
    fn underflowing_null_gives_finite_log() {
        let b = bayes_factor(900, 1000, 0.01, BetaPrior::UNIFORM).unwrap();
        assert!(b.log_b.is_finite() && b.log_b > 1000.0);
        assert!(b.value().is_infinite());
    }

    #[test]
    fn domain() {
        assert!(bayes_factor(2, 1, 0.5, BetaPrior::UNIFORM).is_err());
        assert!(bayes_factor(1, 1, 0.0, BetaPrior::UNIFORM).is_err());
        assert!(bayes_factor(1, 1, 0.5, BetaPrior { alpha: 0.0, beta: 1.0 }).is_err());
    }
}
