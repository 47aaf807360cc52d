//! Dependence-testing bound under superposition coding with successive
//! cancellation.
//!
//! The user-2 row is the closed-form path shared with dirty paper coding;
//! the two rows decoded at receiver 1 are estimated by the Monte Carlo
//! oracle, sampling i(X;Y1|X2) and i(X2;Y1) from their definitions.

use serde::{Deserialize, Serialize};

use crate::dt_dpc::{dt_bound, epsilon2, DtOptions};
use crate::error::{domain, Result};
use crate::mc_oracle::{estimate_prob, Direction, McConfig, McEstimate, Scenario, TermId};
use crate::model::{CodeSizes, User, ValidatedConfig};

/// Smallest sample count accepted for the Monte Carlo rows.
pub const MIN_SAMPLES: u64 = 10_000;

/// How a row of a bound is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evaluation {
    ClosedForm,
    MonteCarlo,
}

/// Threshold applied to a row's information density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Threshold {
    /// γ_j = ln((M_j − 1)/2).
    Gamma(User),
    /// γ_1 + I(U1^n; U2^n).
    GammaPlusAuxiliaryInformation(User),
}

/// One misdetection/confusion row of a DT bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowSpec {
    pub label: &'static str,
    /// Whose message the row decodes.
    pub decodes: User,
    /// Which receiver observes.
    pub receiver: User,
    pub threshold: Threshold,
    pub joint: TermId,
    pub bar: TermId,
    pub evaluation: Evaluation,
}

const SPC_ROWS: [RowSpec; 3] = [
    RowSpec {
        label: "user 2 at receiver 2",
        decodes: User::Two,
        receiver: User::Two,
        threshold: Threshold::Gamma(User::Two),
        joint: TermId::U2Y2,
        bar: TermId::U2Y2Bar,
        evaluation: Evaluation::ClosedForm,
    },
    RowSpec {
        label: "user 1 at receiver 1 given user 2",
        decodes: User::One,
        receiver: User::One,
        threshold: Threshold::Gamma(User::One),
        joint: TermId::SpcCond,
        bar: TermId::SpcCondBar,
        evaluation: Evaluation::MonteCarlo,
    },
    RowSpec {
        label: "user 2 at receiver 1",
        decodes: User::Two,
        receiver: User::One,
        threshold: Threshold::Gamma(User::Two),
        joint: TermId::SpcCross,
        bar: TermId::SpcCrossBar,
        evaluation: Evaluation::MonteCarlo,
    },
];

const DPC_ROWS: [RowSpec; 2] = [
    RowSpec {
        label: "user 2 at receiver 2",
        decodes: User::Two,
        receiver: User::Two,
        threshold: Threshold::Gamma(User::Two),
        joint: TermId::U2Y2,
        bar: TermId::U2Y2Bar,
        evaluation: Evaluation::ClosedForm,
    },
    RowSpec {
        label: "user 1 at receiver 1",
        decodes: User::One,
        receiver: User::One,
        threshold: Threshold::GammaPlusAuxiliaryInformation(User::One),
        joint: TermId::U1Y1,
        bar: TermId::U1Y1Bar,
        evaluation: Evaluation::ClosedForm,
    },
];

/// Rows of the superposition-coding bound, in report order.
pub fn spc_rows() -> &'static [RowSpec] {
    &SPC_ROWS
}

/// Rows of the dirty-paper-coding bound.
pub fn dpc_rows() -> &'static [RowSpec] {
    &DPC_ROWS
}

/// A Monte Carlo row: Pr[i < γ] + η·Pr[ī > γ].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub misdetect: McEstimate,
    pub confusion: McEstimate,
    /// Misdetection estimate plus η times the confusion estimate, capped at 1.
    pub value: f64,
    /// Half-width of the 99% interval of `value`, from the per-event
    /// intervals (Wilson's when an event is rare), capped at 1.
    pub half_width: f64,
}

fn interval_half_width(e: &McEstimate) -> f64 {
    (e.ci_high - e.p_hat).max(e.p_hat - e.ci_low)
}

/// Estimates one DT row by sampling.
pub fn mc_row(joint: TermId, bar: TermId, scenario: &Scenario, gamma: f64, ln_eta: f64, mc: &McConfig) -> Result<McRow> {
    let misdetect = estimate_prob(joint, scenario, gamma, Direction::Below, mc)?;
    let confusion = estimate_prob(bar, scenario, gamma, Direction::Above, mc)?;
    let scaled = |p: f64| if p > 0.0 { (ln_eta + p.ln()).exp().min(1.0) } else { 0.0 };
    Ok(McRow {
        misdetect,
        confusion,
        value: (misdetect.p_hat + scaled(confusion.p_hat)).min(1.0),
        half_width: (interval_half_width(&misdetect) + scaled(interval_half_width(&confusion))).min(1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcReport {
    pub term_user2: f64,
    pub term_user1_cond: f64,
    pub term_cross: f64,
    pub infeasible_input_prob: f64,
    pub total: f64,
    pub user1_cond_half_width: f64,
    pub cross_half_width: f64,
    pub user1_cond: Option<McRow>,
    pub cross: Option<McRow>,
    /// Rows whose 99% half-width exceeds a tenth of their value.
    pub warnings: Vec<String>,
}

impl SpcReport {
    /// Half-width of the total, summing the row widths.
    pub fn total_half_width(&self) -> f64 {
        self.user1_cond_half_width + self.cross_half_width
    }
}

/// Streams for different rows are separated by term; rows that share a
/// term are not possible here, so one seed serves the whole bound.
pub fn spc_bound(cfg: &ValidatedConfig, sizes: &CodeSizes, mc: &McConfig) -> Result<SpcReport> {
    if mc.samples < MIN_SAMPLES {
        return domain(format!("superposition bound needs at least {MIN_SAMPLES} samples, got {}", mc.samples));
    }
    let scenario = Scenario::Average(*cfg);
    let user2 = epsilon2(cfg, sizes.ln_m(User::Two))?;
    let mut warnings = Vec::new();
    let mut row = |spec: &RowSpec| -> Result<Option<McRow>> {
        let user = match spec.threshold {
            Threshold::Gamma(u) | Threshold::GammaPlusAuxiliaryInformation(u) => u,
        };
        let ln_eta = sizes.ln_eta(user);
        if ln_eta == f64::NEG_INFINITY {
            // A single codeword is never confused or missed.
            return Ok(None);
        }
        let r = mc_row(spec.joint, spec.bar, &scenario, sizes.gamma(user), ln_eta, mc)?;
        if r.half_width > 0.1 * r.value {
            warnings.push(format!(
                "{}: 99% half-width {:.3e} exceeds 10% of the estimate {:.3e}",
                spec.label, r.half_width, r.value
            ));
        }
        Ok(Some(r))
    };
    let user1_cond = row(&SPC_ROWS[1])?;
    let cross = row(&SPC_ROWS[2])?;
    let value = |r: &Option<McRow>| r.map_or(0.0, |r| r.value);
    let width = |r: &Option<McRow>| r.map_or(0.0, |r| r.half_width);
    let (t2, t1, tc) = (user2.sum(), value(&user1_cond), value(&cross));
    Ok(SpcReport {
        term_user2: t2,
        term_user1_cond: t1,
        term_cross: tc,
        infeasible_input_prob: 0.0,
        total: (t2 + t1 + tc).min(1.0),
        user1_cond_half_width: width(&user1_cond),
        cross_half_width: width(&cross),
        user1_cond,
        cross,
        warnings,
    })
}

/// Both bounds side by side; no claim about which is smaller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcDpcComparison {
    pub dpc_total: f64,
    pub spc_total: f64,
    /// spc_total − dpc_total.
    pub difference: f64,
    /// Monte Carlo half-width carried by the superposition total.
    pub difference_half_width: f64,
}

pub fn compare_spc_dpc(cfg: &ValidatedConfig, sizes: &CodeSizes, mc: &McConfig, opts: DtOptions) -> Result<SpcDpcComparison> {
    let dpc = dt_bound(cfg, sizes, opts)?;
    let spc = spc_bound(cfg, sizes, mc)?;
    Ok(SpcDpcComparison {
        dpc_total: dpc.total,
        spc_total: spc.total,
        difference: spc.total - dpc.total,
        difference_half_width: spc.total_half_width(),
    })
}
