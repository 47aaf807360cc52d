//! Channel and code parameters, the power split between the two users, the
//! asymptotic capacity region and the second-order statistics of the
//! dirty-paper auxiliary variables.
//!
//! Everything is in nats. The only place bits appear is [`nats_to_bits`].

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Physical parameters of the two-receiver Gaussian broadcast channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Total transmit power.
    #[serde(rename = "P")]
    pub power: f64,
    /// Noise variance at receiver 1 (the strong user).
    #[serde(rename = "N1")]
    pub noise1: f64,
    /// Noise variance at receiver 2.
    #[serde(rename = "N2")]
    pub noise2: f64,
    /// Blocklength.
    pub n: usize,
}

impl ChannelSpec {
    pub fn new(power: f64, noise1: f64, noise2: f64, n: usize) -> Self {
        Self { power, noise1, noise2, n }
    }

    pub fn noise(&self, user: User) -> f64 {
        match user {
            User::One => self.noise1,
            User::Two => self.noise2,
        }
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [("P", self.power), ("N1", self.noise1), ("N2", self.noise2)] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be finite and positive, got {v}"));
            }
        }
        if self.n < 1 {
            return domain("blocklength n must be at least 1");
        }
        Ok(())
    }
}

/// Receiver index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum User {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl User {
    pub fn index(self) -> usize {
        match self {
            User::One => 1,
            User::Two => 2,
        }
    }
}

/// How the codebooks meet the power constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PowerMode {
    /// Average power: X1 ~ N(0, αP), X2 ~ N(0, ᾱP).
    Average,
    /// Equal power per codeword, with X1 in the null space of X2.
    Peak {
        #[serde(rename = "P1")]
        p1: f64,
        #[serde(rename = "P2")]
        p2: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSplit {
    /// Fraction of the power given to user 1.
    pub alpha: f64,
    #[serde(flatten)]
    pub mode: PowerMode,
}

impl PowerSplit {
    pub fn average(alpha: f64) -> Self {
        Self { alpha, mode: PowerMode::Average }
    }
}

/// A checked configuration with the derived power quantities filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidatedConfig {
    pub spec: ChannelSpec,
    pub alpha: f64,
    pub alpha_bar: f64,
    /// αP, the power of X1.
    pub alpha_power: f64,
    /// ᾱP, the power of X2.
    pub alpha_bar_power: f64,
    pub mode: PowerMode,
}

/// Checks a channel and power split and derives ᾱ, αP and ᾱP.
pub fn validate(spec: ChannelSpec, split: PowerSplit) -> Result<ValidatedConfig> {
    spec.check()?;
    let alpha = split.alpha;
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    if let PowerMode::Peak { p1, p2 } = split.mode {
        if !(p1.is_finite() && p2.is_finite() && p1 >= 0.0 && p2 >= 0.0) {
            return domain(format!("peak powers must be finite and nonnegative, got P1={p1}, P2={p2}"));
        }
        if p1 + p2 > spec.power * (1.0 + 1e-12) {
            return domain(format!(
                "peak powers exceed the budget: P1+P2={} > P={}",
                p1 + p2,
                spec.power
            ));
        }
    }
    let alpha_bar = 1.0 - alpha;
    Ok(ValidatedConfig {
        spec,
        alpha,
        alpha_bar,
        alpha_power: alpha * spec.power,
        alpha_bar_power: alpha_bar * spec.power,
        mode: split.mode,
    })
}

/// C(x) = ½ ln(1 + x).
pub fn shannon_capacity(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return domain(format!("snr must be nonnegative, got {snr}"));
    }
    Ok(capacity(snr))
}

pub(crate) fn capacity(snr: f64) -> f64 {
    0.5 * snr.ln_1p()
}

pub fn nats_to_bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}

pub fn bits_to_nats(x: f64) -> f64 {
    x * std::f64::consts::LN_2
}

/// Corner of the asymptotic region for this split: (C(αP/N1), C(ᾱP/(αP+N2))).
pub fn asymptotic_region(cfg: &ValidatedConfig) -> (f64, f64) {
    let s = &cfg.spec;
    (
        capacity(cfg.alpha_power / s.noise1),
        capacity(cfg.alpha_bar_power / (cfg.alpha_power + s.noise2)),
    )
}

/// Code sizes, stored as natural logarithms so that rates near capacity at
/// large blocklengths (M far beyond any integer type) are representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSizes {
    pub ln_m1: f64,
    pub ln_m2: f64,
}

impl CodeSizes {
    pub fn from_counts(m1: u64, m2: u64) -> Result<Self> {
        if m1 < 1 || m2 < 1 {
            return domain("code sizes must be at least 1");
        }
        Ok(Self { ln_m1: (m1 as f64).ln(), ln_m2: (m2 as f64).ln() })
    }

    pub fn from_ln(ln_m1: f64, ln_m2: f64) -> Result<Self> {
        for v in [ln_m1, ln_m2] {
            if !(v.is_finite() && v >= 0.0) {
                return domain(format!("ln M must be finite and nonnegative, got {v}"));
            }
        }
        Ok(Self { ln_m1, ln_m2 })
    }

    /// Sizes ⌈e^{nR}⌉-free: M_j = e^{n R_j} with rates in nats per channel use.
    pub fn from_rates(n: usize, r1: f64, r2: f64) -> Result<Self> {
        Self::from_ln(n as f64 * r1, n as f64 * r2)
    }

    pub fn ln_m(&self, user: User) -> f64 {
        match user {
            User::One => self.ln_m1,
            User::Two => self.ln_m2,
        }
    }

    /// ln η_j with η_j = (M_j − 1)/2; −∞ for a single codeword.
    pub fn ln_eta(&self, user: User) -> f64 {
        ln_eta(self.ln_m(user))
    }

    /// Decoding threshold γ_j = ln η_j.
    pub fn gamma(&self, user: User) -> f64 {
        self.ln_eta(user)
    }
}

/// ln((M − 1)/2) from ln M without forming M.
pub(crate) fn ln_eta(ln_m: f64) -> f64 {
    if ln_m <= 0.0 {
        return f64::NEG_INFINITY;
    }
    // ln(e^x − 1) = x + ln(1 − e^{−x})
    let ln_m_minus_1 = if ln_m > 1.0 { ln_m + (-(-ln_m).exp()).ln_1p() } else { ln_m.exp_m1().ln() };
    ln_m_minus_1 - std::f64::consts::LN_2
}

/// Second-order statistics of the dirty-paper auxiliaries
/// U1 = X1 + b2·X2, U2 = X2 and the output Y1 = X1 + X2 + Z1 (per letter).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpcStats {
    pub b2: f64,
    pub rho: f64,
    pub cov_u1y1: f64,
    pub var_u1: f64,
    pub var_y1: f64,
    pub var_u1_given_u2: f64,
    /// I(U1; U2) per letter, in nats.
    pub i_u1u2_per_letter: f64,
}

pub fn dpc_statistics(cfg: &ValidatedConfig) -> Result<DpcStats> {
    if cfg.alpha_power <= 0.0 {
        return Err(Error::Degenerate("user 1 has no power (alpha = 0)".into()));
    }
    let p = cfg.spec.power;
    let n1 = cfg.spec.noise1;
    let ap = cfg.alpha_power;
    let abp = cfg.alpha_bar_power;
    let b2 = ap / (ap + n1);
    let cov = ap * (p + n1) / (ap + n1);
    let var_u1 = ap * (ap * abp + (ap + n1).powi(2)) / (ap + n1).powi(2);
    let var_y1 = p + n1;
    let rho = cov / (var_u1 * var_y1).sqrt();
    // U1 = b2·U2 + X1 with X1 independent of U2.
    let var_u1_given_u2 = ap;
    Ok(DpcStats {
        b2,
        rho,
        cov_u1y1: cov,
        var_u1,
        var_y1,
        var_u1_given_u2,
        i_u1u2_per_letter: 0.5 * (var_u1 / var_u1_given_u2).ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg(alpha: f64) -> ValidatedConfig {
        validate(ChannelSpec::new(2.0, 1.0, 1.0, 100), PowerSplit::average(alpha)).unwrap()
    }

    #[test]
    fn validate_fills_in_power_split() {
        let c = cfg(0.5);
        assert_eq!(c.alpha_power, 1.0);
        assert_eq!(c.alpha_bar_power, 1.0);
    }

    #[test]
    fn validate_rejects_bad_inputs() {
        let bad = ChannelSpec::new(-1.0, 1.0, 1.0, 10);
        assert!(matches!(validate(bad, PowerSplit::average(0.5)), Err(Error::Domain(_))));
        let s = ChannelSpec::new(2.0, 1.0, 1.0, 10);
        assert!(validate(s, PowerSplit::average(1.5)).is_err());
        assert!(validate(ChannelSpec::new(2.0, 1.0, 1.0, 0), PowerSplit::average(0.5)).is_err());
        let peak = PowerSplit { alpha: 0.5, mode: PowerMode::Peak { p1: 1.5, p2: 1.0 } };
        assert!(matches!(validate(s, peak), Err(Error::Domain(_))));
    }

    #[test]
    fn capacity_values() {
        assert_eq!(shannon_capacity(0.0).unwrap(), 0.0);
        assert_relative_eq!(shannon_capacity(1.0).unwrap(), 0.5 * 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(nats_to_bits(shannon_capacity(3.0).unwrap()), 1.0, epsilon = 1e-15);
        assert!(shannon_capacity(-0.1).is_err());
    }

    #[test]
    fn region_corners() {
        let (r1, r2) = asymptotic_region(&cfg(1.0));
        assert_relative_eq!(r1, capacity(2.0));
        assert_eq!(r2, 0.0);
        let (r1, r2) = asymptotic_region(&cfg(0.0));
        assert_eq!(r1, 0.0);
        assert_relative_eq!(r2, capacity(2.0));
        let (r1, r2) = asymptotic_region(&cfg(0.5));
        assert_relative_eq!(r1, 0.34657359027997264, epsilon = 1e-12);
        assert_relative_eq!(r2, 0.2027325540540822, epsilon = 1e-12);
    }

    #[test]
    fn dpc_statistics_reference_point() {
        let s = dpc_statistics(&cfg(0.5)).unwrap();
        assert_relative_eq!(s.b2, 0.5);
        assert_relative_eq!(s.cov_u1y1, 1.5);
        assert_relative_eq!(s.var_u1, 1.25);
        assert_relative_eq!(s.var_y1, 3.0);
        assert_relative_eq!(s.rho, 1.5 / 3.75f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(s.i_u1u2_per_letter, 0.5 * 1.25f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(s.i_u1u2_per_letter, 0.11157177565710485, epsilon = 1e-12);
    }

    #[test]
    fn dpc_statistics_full_power_to_user_one() {
        let s = dpc_statistics(&cfg(1.0)).unwrap();
        assert_relative_eq!(s.var_u1, 2.0, epsilon = 1e-15);
        assert_relative_eq!(s.rho, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(s.i_u1u2_per_letter, 0.0);
    }

    #[test]
    fn dpc_statistics_rejects_zero_alpha() {
        assert!(matches!(dpc_statistics(&cfg(0.0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ln_eta_matches_direct_formula() {
        assert_eq!(ln_eta(0.0), f64::NEG_INFINITY);
        for m in [2u64, 3, 7, 1 << 20] {
            let direct = (((m - 1) as f64) / 2.0).ln();
            assert_relative_eq!(ln_eta((m as f64).ln()), direct, epsilon = 1e-12);
        }
        let sizes = CodeSizes::from_counts(1, 5).unwrap();
        assert_eq!(sizes.gamma(User::One), f64::NEG_INFINITY);
        assert_relative_eq!(sizes.gamma(User::Two), 2f64.ln(), epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn b2_in_unit_interval_and_increasing(p in 0.1f64..20.0, n1 in 0.1f64..10.0, a in 0.01f64..0.98) {
            let spec = ChannelSpec::new(p, n1, 1.0, 10);
            let lo = dpc_statistics(&validate(spec, PowerSplit::average(a)).unwrap()).unwrap();
            let hi = dpc_statistics(&validate(spec, PowerSplit::average(a + 0.01)).unwrap()).unwrap();
            prop_assert!(lo.b2 >= 0.0 && lo.b2 < 1.0);
            prop_assert!(hi.b2 > lo.b2);
        }

        #[test]
        fn region_monotone_in_alpha(p in 0.1f64..20.0, n1 in 0.1f64..10.0, n2 in 0.1f64..10.0, a in 0.0f64..0.99) {
            let spec = ChannelSpec::new(p, n1, n2, 10);
            let (r1a, r2a) = asymptotic_region(&validate(spec, PowerSplit::average(a)).unwrap());
            let (r1b, r2b) = asymptotic_region(&validate(spec, PowerSplit::average(a + 0.01)).unwrap());
            prop_assert!(r1b >= r1a);
            prop_assert!(r2b <= r2a);
        }

        #[test]
        fn rho_and_a3_identity(p in 0.1f64..20.0, n1 in 0.1f64..10.0, a in 0.01f64..1.0) {
            let s = dpc_statistics(&validate(ChannelSpec::new(p, n1, 1.0, 10), PowerSplit::average(a)).unwrap()).unwrap();
            prop_assert!(s.rho * s.rho < 1.0);
            prop_assert!(s.i_u1u2_per_letter >= 0.0);
            let a3 = s.rho / ((1.0 - s.rho * s.rho) * (s.var_u1 * s.var_y1).sqrt());
            prop_assert!((a3 * n1 - 1.0).abs() < 1e-10);
        }
    }
}
