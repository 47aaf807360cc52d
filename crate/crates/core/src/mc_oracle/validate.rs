//! Closed-form terms against their Monte Carlo estimates over a grid.

use serde::{Deserialize, Serialize};

use super::{Direction, McConfig, McEstimate, Sampler, Scenario, TermId};
use crate::dt_dpc::ln_lower_tail;
use crate::error::{Error, Result};
use crate::kappa_beta::{info_density_laws, AffineChiLaw, PeakPowerConfig};
use crate::model::{validate, ChannelSpec, PowerSplit, User, ValidatedConfig};
use crate::numeric::brent;
use crate::qform::{build_confusion_form_u1, build_misdetect_form_u1, build_user2_forms, ConfusionModel, QuadForm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationGrid {
    #[serde(rename = "P")]
    pub power: f64,
    #[serde(rename = "N1")]
    pub noise1: f64,
    #[serde(rename = "N2")]
    pub noise2: f64,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    /// Closed-form probability each threshold is placed at.
    pub target_p: f64,
    /// Pass band in standard errors.
    pub band: f64,
    pub confusion_model: ConfusionModel,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        Self {
            power: 2.0,
            noise1: 1.0,
            noise2: 1.0,
            ns: vec![10, 50, 100],
            alphas: vec![0.3, 0.5, 0.8],
            target_p: 0.2,
            band: 3.0,
            confusion_model: ConfusionModel::Independent,
        }
    }
}

/// Deliberate corruption of a closed form, to prove the gate can fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Multiply the user-1 misdetection eigenvalue by the factor.
    ScaleLambda1Dp(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCase {
    pub label: String,
    pub term: TermId,
    pub n: usize,
    pub alpha: f64,
    /// Threshold on the sampled density, nats.
    pub threshold: f64,
    pub direction: Direction,
    pub closed_form: f64,
    pub mc: McEstimate,
    /// √(p(1−p)/N) at the closed-form p.
    pub std_err: f64,
    /// (p̂ − p)/std_err.
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub samples: u64,
    pub grid: ValidationGrid,
    pub fault: Option<Fault>,
    pub cases: Vec<ValidationCase>,
    pub passed: usize,
    pub failed: usize,
    pub all_passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ValidationCase> {
        self.cases.iter().filter(|c| !c.pass)
    }
}

/// ζ with exp(tail(ζ)) = p, bracketing around the mean of `form`.
fn solve_tail(form: &QuadForm, p: f64, tail: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let sd = form.variance().sqrt();
    let target = p.ln();
    let mut err = None;
    let f = |z: f64| match tail(z) {
        Ok(v) => v - target,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    };
    let m = form.mean();
    let root = brent(f, m - 12.0 * sd, m + 12.0 * sd, 1e-13 * sd, "validation threshold");
    match err {
        Some(e) => Err(e),
        None => root,
    }
}

struct Pending {
    label: &'static str,
    term: TermId,
    scenario: Scenario,
    threshold: f64,
    direction: Direction,
    closed_form: f64,
}

fn dt_cases(cfg: &ValidatedConfig, grid: &ValidationGrid, fault: Option<Fault>) -> Result<Vec<Pending>> {
    let scen = Scenario::Average(*cfg);
    let n = cfg.spec.n as f64;
    let p = grid.target_p;
    let info = |term| -> Result<f64> {
        Sampler::new(term, &scen)?
            .joint_information()
            .ok_or_else(|| Error::Consistency(format!("{term} has no joint law")))
    };
    let mut out = Vec::new();

    let mut mis1 = build_misdetect_form_u1(cfg)?;
    if let Some(Fault::ScaleLambda1Dp(k)) = fault {
        mis1.weights.iter_mut().for_each(|w| *w *= k);
    }
    let lower = |form: &QuadForm| {
        let z = solve_tail(form, p, |t| ln_lower_tail(form, t))?;
        Ok::<_, Error>((z, ln_lower_tail(form, z)?.exp()))
    };
    let upper = |form: &QuadForm| {
        let z = solve_tail(form, p, |t| form.ln_sf(t))?;
        Ok::<_, Error>((z, form.ln_sf(z)?.exp()))
    };

    let i1 = info(TermId::U1Y1)?;
    let (z, cf) = lower(&mis1)?;
    out.push(Pending {
        label: "user-1 misdetection",
        term: TermId::U1Y1,
        scenario: scen,
        threshold: n * (z + i1),
        direction: Direction::Below,
        closed_form: cf,
    });
    let conf1 = build_confusion_form_u1(cfg, grid.confusion_model)?;
    let (z, cf) = upper(&conf1)?;
    out.push(Pending {
        label: "user-1 confusion",
        term: match grid.confusion_model {
            ConfusionModel::Independent => TermId::U1Y1Bar,
            ConfusionModel::SharedState => TermId::U1Y1BarShared,
        },
        scenario: scen,
        threshold: n * (z + i1),
        direction: Direction::Above,
        closed_form: cf,
    });

    let i2 = info(TermId::U2Y2)?;
    let (mis2, conf2) = build_user2_forms(cfg)?;
    let (z, cf) = lower(&mis2)?;
    out.push(Pending {
        label: "user-2 misdetection",
        term: TermId::U2Y2,
        scenario: scen,
        threshold: n * (z + i2),
        direction: Direction::Below,
        closed_form: cf,
    });
    let (z, cf) = upper(&conf2)?;
    out.push(Pending {
        label: "user-2 confusion",
        term: TermId::U2Y2Bar,
        scenario: scen,
        threshold: n * (z + i2),
        direction: Direction::Above,
        closed_form: cf,
    });
    Ok(out)
}

fn peak_cases(cfg: &PeakPowerConfig, p: f64) -> Result<Vec<Pending>> {
    let scen = Scenario::Peak(*cfg);
    let case = |label, term, law: &AffineChiLaw| -> Result<Pending> {
        let gamma = law.quantile_ge(p)?;
        Ok(Pending { label, term, scenario: scen, threshold: gamma, direction: Direction::Above, closed_form: law.prob_ge(gamma)? })
    };
    let l1 = info_density_laws(User::One, cfg)?;
    let l2 = info_density_laws(User::Two, cfg)?;
    Ok(vec![
        case("beta law, user 1", TermId::G1, &l1.g)?,
        case("conditional law, user 1", TermId::H1, &l1.h)?,
        case("beta law, user 2", TermId::G2, &l2.g)?,
        case("conditional law, user 2", TermId::H2, &l2.h)?,
    ])
}

/// Runs every closed-form term against its MC estimate over the grid.
/// Failures are report content, not errors.
pub fn validate_all(grid: &ValidationGrid, mc: &McConfig, fault: Option<Fault>) -> Result<ValidationReport> {
    let mut cases = Vec::new();
    let mut cell = 0u64;
    for &n in &grid.ns {
        for &alpha in &grid.alphas {
            let spec = ChannelSpec::new(grid.power, grid.noise1, grid.noise2, n);
            let cfg = validate(spec, PowerSplit::average(alpha))?;
            let peak = PeakPowerConfig::new(spec, cfg.alpha_power, cfg.alpha_bar_power)?;
            let mut pending = dt_cases(&cfg, grid, fault)?;
            pending.extend(peak_cases(&peak, grid.target_p)?);
            let cell_mc = mc.derive(cell);
            cell += 1;
            for p in pending {
                let est = Sampler::new(p.term, &p.scenario)?.count(p.threshold, p.direction, &cell_mc)?;
                let se = (p.closed_form * (1.0 - p.closed_form) / mc.samples as f64).sqrt();
                let z = (est.p_hat - p.closed_form) / se;
                cases.push(ValidationCase {
                    label: p.label.to_string(),
                    term: p.term,
                    n,
                    alpha,
                    threshold: p.threshold,
                    direction: p.direction,
                    closed_form: p.closed_form,
                    mc: est,
                    std_err: se,
                    z,
                    pass: z.abs() <= grid.band,
                });
            }
        }
    }
    let passed = cases.iter().filter(|c| c.pass).count();
    let failed = cases.len() - passed;
    Ok(ValidationReport {
        seed: mc.seed,
        samples: mc.samples,
        grid: grid.clone(),
        fault,
        cases,
        passed,
        failed,
        all_passed: failed == 0,
    })
}
