//! Dependence-testing upper bound on the average error probability of dirty
//! paper coding over the two-user Gaussian broadcast channel.
//!
//! For user j the bound is `Pr[i_j < γ_j] + η_j·Pr[ī_j > γ_j]`, where i_j is
//! the information density of the true codeword, ī_j that of an independent
//! one, η_j = (M_j − 1)/2 and γ_j = ln η_j. After centring, each density is
//! `n·C_j + n·v` with v one of the quadratic forms built in [`crate::qform`].

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{asymptotic_region, dpc_statistics, ln_eta, CodeSizes, User, ValidatedConfig};
use crate::qform::{build_confusion_form_u1, build_misdetect_form_u1, build_user2_forms, ConfusionModel, QuadForm};
use crate::specfun::vg_ln_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DtOptions {
    pub confusion_model: ConfusionModel,
}

/// The two error terms of one user, already multiplied out and clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermPair {
    pub misdetect: f64,
    /// η·Pr[ī > γ], clipped to [0, 1].
    pub confusion: f64,
    /// Unclipped ln of the confusion term (may exceed 0).
    pub ln_confusion: f64,
    /// Normalised threshold ζ at which the dispersion terms are evaluated.
    pub zeta: f64,
}

impl TermPair {
    fn zero() -> Self {
        Self { misdetect: 0.0, confusion: 0.0, ln_confusion: f64::NEG_INFINITY, zeta: f64::NEG_INFINITY }
    }

    pub fn sum(&self) -> f64 {
        self.misdetect + self.confusion
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtReport {
    pub eps1_misdetect: f64,
    pub eps1_confusion: f64,
    pub eps2_misdetect: f64,
    pub eps2_confusion: f64,
    /// Zero: average-power Gaussian codebooks have no infeasible inputs.
    pub infeasible_input_prob: f64,
    pub total: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    /// γ1 + I(U1^n; U2^n), the threshold on i(U1; Y1).
    pub gamma1_prime: f64,
}

pub(crate) fn ln_lower_tail(form: &QuadForm, t: f64) -> Result<f64> {
    match form.vg_params() {
        Some(p) => vg_ln_cdf(&p, t),
        None => form.ln_cdf(t),
    }
}

fn assemble(ln_eta: f64, misdetect: &QuadForm, confusion: &QuadForm, zeta: f64) -> Result<TermPair> {
    let mis = ln_lower_tail(misdetect, zeta)?.exp().clamp(0.0, 1.0);
    let ln_conf = ln_eta + confusion.ln_sf(zeta)?;
    Ok(TermPair { misdetect: mis, confusion: ln_conf.exp().clamp(0.0, 1.0), ln_confusion: ln_conf, zeta })
}

/// A user with no power has information density identically zero.
fn powerless(ln_eta: f64) -> TermPair {
    let (misdetect, ln_confusion) = if ln_eta > 0.0 {
        (1.0, f64::NEG_INFINITY)
    } else if ln_eta < 0.0 {
        (0.0, ln_eta)
    } else {
        (0.0, f64::NEG_INFINITY)
    };
    TermPair { misdetect, confusion: ln_confusion.exp().min(1.0), ln_confusion, zeta: f64::NAN }
}

/// User-1 terms for a code with ln M1 codewords.
pub fn epsilon1(cfg: &ValidatedConfig, ln_m1: f64, opts: DtOptions) -> Result<TermPair> {
    let le = ln_eta(ln_m1);
    if le == f64::NEG_INFINITY {
        return Ok(TermPair::zero());
    }
    if cfg.alpha_power <= 0.0 {
        return Ok(powerless(le));
    }
    let n = cfg.spec.n as f64;
    let (c1, _) = asymptotic_region(cfg);
    // i(U1;Y1) − I(U1^n;U2^n) = n·C1 + n·v1, so the test i(U1;Y1) < γ1 + I
    // becomes v1 < (γ1 − n·C1)/n.
    let zeta = (le - n * c1) / n;
    let mis = build_misdetect_form_u1(cfg)?;
    let conf = build_confusion_form_u1(cfg, opts.confusion_model)?;
    assemble(le, &mis, &conf, zeta)
}

/// User-2 terms for a code with ln M2 codewords. Shared verbatim with the
/// superposition-coding bound.
pub fn epsilon2(cfg: &ValidatedConfig, ln_m2: f64) -> Result<TermPair> {
    let le = ln_eta(ln_m2);
    if le == f64::NEG_INFINITY {
        return Ok(TermPair::zero());
    }
    if cfg.alpha_bar_power <= 0.0 {
        return Ok(powerless(le));
    }
    let n = cfg.spec.n as f64;
    let (_, c2) = asymptotic_region(cfg);
    let zeta = (le - n * c2) / n;
    let (mis, conf) = build_user2_forms(cfg)?;
    assemble(le, &mis, &conf, zeta)
}

/// The full bound for the given code sizes.
pub fn dt_bound(cfg: &ValidatedConfig, sizes: &CodeSizes, opts: DtOptions) -> Result<DtReport> {
    let (e1, e2) = rayon::join(
        || epsilon1(cfg, sizes.ln_m(User::One), opts),
        || epsilon2(cfg, sizes.ln_m(User::Two)),
    );
    let (e1, e2) = (e1?, e2?);
    let i12 = if cfg.alpha_power > 0.0 {
        cfg.spec.n as f64 * dpc_statistics(cfg)?.i_u1u2_per_letter
    } else {
        0.0
    };
    Ok(DtReport {
        eps1_misdetect: e1.misdetect,
        eps1_confusion: e1.confusion,
        eps2_misdetect: e2.misdetect,
        eps2_confusion: e2.confusion,
        infeasible_input_prob: 0.0,
        total: (e1.sum() + e2.sum()).min(1.0),
        zeta1: e1.zeta,
        zeta2: e2.zeta,
        gamma1_prime: sizes.gamma(User::One) + i12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, ChannelSpec, PowerSplit};
    use proptest::prelude::*;

    fn cfg(alpha: f64, n: usize) -> ValidatedConfig {
        validate(ChannelSpec::new(2.0, 1.0, 1.0, n), PowerSplit::average(alpha)).unwrap()
    }

    fn at_rate_fraction(c: &ValidatedConfig, f: f64) -> CodeSizes {
        let (r1, r2) = asymptotic_region(c);
        CodeSizes::from_rates(c.spec.n, f * r1, f * r2).unwrap()
    }

    #[test]
    fn single_codewords_give_zero() {
        let c = cfg(0.5, 500);
        let r = dt_bound(&c, &CodeSizes::from_counts(1, 1).unwrap(), DtOptions::default()).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.infeasible_input_prob, 0.0);
    }

    #[test]
    fn rates_beyond_capacity_clip_to_one() {
        let c = cfg(0.5, 500);
        let r = dt_bound(&c, &at_rate_fraction(&c, 1.5), DtOptions::default()).unwrap();
        assert_eq!(r.total, 1.0);
        let e1 = epsilon1(&c, 500.0 * 10.0, DtOptions::default()).unwrap();
        assert!(e1.misdetect > 1.0 - 1e-12);
    }

    #[test]
    fn user2_symmetric_threshold_gives_half() {
        // ζ2 = 0 when ln η2 = n·C2.
        let c = cfg(0.5, 100);
        let (_, c2) = asymptotic_region(&c);
        let ln_m2 = (2.0 * (100.0 * c2).exp() + 1.0).ln();
        let e2 = epsilon2(&c, ln_m2).unwrap();
        assert!(e2.zeta.abs() < 1e-12);
        assert!((e2.misdetect - 0.5).abs() < 1e-10);
    }

    #[test]
    fn no_power_for_user_two() {
        let c = cfg(1.0, 100);
        for m2 in [3u64, 16, 1 << 20] {
            let e = epsilon2(&c, (m2 as f64).ln()).unwrap();
            assert_eq!(e.misdetect, 1.0);
        }
        let e = epsilon2(&c, 2f64.ln()).unwrap();
        assert!(e.sum() >= 0.5);
    }

    #[test]
    fn reference_config_decreases_with_n() {
        let mut prev = 1.0;
        for n in [500, 1000, 2000] {
            let c = cfg(0.5, n);
            let r = dt_bound(&c, &at_rate_fraction(&c, 0.7), DtOptions::default()).unwrap();
            assert!(r.total > 0.0 && r.total < 1.0);
            assert!(r.total <= prev, "n={n}: {} > {prev}", r.total);
            prev = r.total;
        }
    }

    #[test]
    fn deterministic() {
        let c = cfg(0.3, 300);
        let s = at_rate_fraction(&c, 0.8);
        let a = dt_bound(&c, &s, DtOptions::default()).unwrap();
        let b = dt_bound(&c, &s, DtOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn monotone_in_code_sizes(a in 0.1f64..0.9, f in 0.3f64..1.1, bump in 0.01f64..0.5) {
            let c = cfg(a, 200);
            let s = at_rate_fraction(&c, f);
            let base = dt_bound(&c, &s, DtOptions::default()).unwrap().total;
            let s1 = CodeSizes::from_ln(s.ln_m1 + bump, s.ln_m2).unwrap();
            let s2 = CodeSizes::from_ln(s.ln_m1, s.ln_m2 + bump).unwrap();
            prop_assert!(dt_bound(&c, &s1, DtOptions::default()).unwrap().total >= base - 1e-12);
            prop_assert!(dt_bound(&c, &s2, DtOptions::default()).unwrap().total >= base - 1e-12);
        }
    }
}
