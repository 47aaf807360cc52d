//! Subcommand bodies. Grid points run on the rayon pool and come back in
//! grid order, so files do not depend on scheduling.

use rayon::prelude::*;
use serde_json::Value;

use fblgbc::dt_dpc::{dt_bound, DtOptions};
use fblgbc::dt_spc::{compare_spc_dpc, spc_bound};
use fblgbc::kappa_beta::{kappa_beta_report, KappaBetaUser, PeakPowerConfig};
use fblgbc::mc_oracle::{validate_all, ValidationReport};
use fblgbc::model::{asymptotic_region, bits_to_nats, nats_to_bits, validate, CodeSizes, PowerSplit, ValidatedConfig};

use crate::config::{DtJob, Job, KappaBetaJob, PeakSplit, RegionJob, SizeSpec, SpcJob, SweepJob};
use crate::output::{num, Table};
use crate::CliError;

pub enum Outcome {
    Table(Table),
    Validation(ValidationReport),
}

pub fn run(job: &Job) -> Result<Outcome, CliError> {
    Ok(match job {
        Job::DtDpc(j) => Outcome::Table(dt_dpc(j)?),
        Job::DtSpc(j) => Outcome::Table(dt_spc(j)?),
        Job::KappaBeta(j) => Outcome::Table(kappa_beta(j)?),
        Job::Region(j) => Outcome::Table(region(j)?),
        Job::Validate(j) => Outcome::Validation(validate_all(&j.grid, &j.mc.mc(), j.fault)?),
        Job::Sweep(j) => Outcome::Table(sweep(j)?),
    })
}

/// Runs `f` over `points` in parallel, keeping grid order.
fn par_rows<P: Sync, R: Send>(points: &[P], f: impl Fn(&P) -> Result<R, CliError> + Sync + Send) -> Result<Vec<R>, CliError> {
    points.par_iter().map(f).collect()
}

/// Code sizes for one grid point, with the fraction used (if any).
fn sizes_at(spec: &SizeSpec, cfg: &ValidatedConfig) -> Result<Vec<(Option<f64>, CodeSizes)>, CliError> {
    let n = cfg.spec.n;
    Ok(match spec {
        SizeSpec::Counts { m1, m2 } => vec![(None, CodeSizes::from_counts(*m1, *m2)?)],
        SizeSpec::RatesBits { r1, r2 } => vec![(None, CodeSizes::from_rates(n, bits_to_nats(*r1), bits_to_nats(*r2))?)],
        SizeSpec::RegionFraction { fractions } => {
            let (c1, c2) = asymptotic_region(cfg);
            fractions
                .iter()
                .map(|&f| Ok((Some(f), CodeSizes::from_rates(n, f * c1, f * c2)?)))
                .collect::<Result<_, CliError>>()?
        }
    })
}

fn rate_bits(sizes: &CodeSizes, n: usize) -> (f64, f64) {
    use fblgbc::model::User;
    let r = |u| nats_to_bits(sizes.ln_m(u)) / n as f64;
    (r(User::One), r(User::Two))
}

fn grid(ns: &[usize], alphas: &[f64]) -> Vec<(usize, f64)> {
    ns.iter().flat_map(|&n| alphas.iter().map(move |&a| (n, a))).collect()
}

fn dt_dpc(j: &DtJob) -> Result<Table, CliError> {
    let opts = DtOptions { confusion_model: j.confusion_model };
    let points = grid(&j.ns, &j.alphas);
    let rows = par_rows(&points, |&(n, alpha)| {
        let cfg = validate(j.channel.spec(n), PowerSplit::average(alpha))?;
        sizes_at(&j.sizes, &cfg)?
            .into_iter()
            .map(|(_, sizes)| {
                let r = dt_bound(&cfg, &sizes, opts)?;
                let (r1, r2) = rate_bits(&sizes, n);
                Ok(vec![
                    Value::from(n),
                    num(alpha),
                    num(r1),
                    num(r2),
                    num(r.eps1_misdetect),
                    num(r.eps1_confusion),
                    num(r.eps2_misdetect),
                    num(r.eps2_confusion),
                    num(r.total),
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let mut t = Table::new(vec!["n", "alpha", "R1_bits", "R2_bits", "eps1_mis", "eps1_conf", "eps2_mis", "eps2_conf", "total"]);
    rows.into_iter().flatten().for_each(|r| t.push(r));
    Ok(t)
}

fn dt_spc(j: &SpcJob) -> Result<Table, CliError> {
    let points = grid(&j.dt.ns, &j.dt.alphas);
    let mc = j.mc.mc();
    let rows = par_rows(&points, |&(n, alpha)| {
        let cfg = validate(j.dt.channel.spec(n), PowerSplit::average(alpha))?;
        sizes_at(&j.dt.sizes, &cfg)?
            .into_iter()
            .map(|(_, sizes)| {
                let r = spc_bound(&cfg, &sizes, &mc)?;
                let (r1, r2) = rate_bits(&sizes, n);
                Ok(vec![
                    Value::from(n),
                    num(alpha),
                    num(r1),
                    num(r2),
                    num(r.term_user2),
                    num(r.term_user1_cond),
                    num(r.term_cross),
                    num(r.total),
                    num(r.user1_cond_half_width),
                    num(r.cross_half_width),
                    Value::from(r.warnings.join("; ")),
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let mut t = Table::new(vec![
        "n",
        "alpha",
        "R1_bits",
        "R2_bits",
        "term_user2",
        "term_user1_cond",
        "term_cross",
        "total",
        "user1_cond_hw99",
        "cross_hw99",
        "warnings",
    ]);
    rows.into_iter().flatten().for_each(|r| t.push(r));
    Ok(t)
}

fn kb_cells(u: &KappaBetaUser, n: usize) -> Vec<Value> {
    let bits = nats_to_bits(u.log_m_star_lb);
    vec![
        num(u.tau),
        num(u.gamma),
        num(u.beta),
        num(u.kappa),
        num(bits),
        num(bits / n as f64),
        num(nats_to_bits(u.capacity)),
        Value::from(u.admissible),
    ]
}

fn kappa_beta(j: &KappaBetaJob) -> Result<Table, CliError> {
    let p = j.channel.power;
    let splits: Vec<(f64, f64)> = match &j.split {
        PeakSplit::Powers { p1, p2 } => vec![(*p1, *p2)],
        PeakSplit::Alphas { alphas } => alphas.iter().map(|a| (a * p, (1.0 - a) * p)).collect(),
    };
    let points: Vec<(usize, (f64, f64))> = j.ns.iter().flat_map(|&n| splits.iter().map(move |&s| (n, s))).collect();
    let rows = par_rows(&points, |&(n, (p1, p2))| {
        let cfg = PeakPowerConfig::new(j.channel.spec(n), p1, p2)?;
        let r = kappa_beta_report(&cfg, j.eps1, j.eps2)?;
        let mut row = vec![Value::from(n), num(p1), num(p2), num(j.eps1), num(j.eps2)];
        row.extend(kb_cells(&r.user1, n));
        row.extend(kb_cells(&r.user2, n));
        Ok(row)
    })?;
    let mut t = Table::new(vec![
        "n",
        "P1",
        "P2",
        "eps1",
        "eps2",
        "tau_star_1",
        "gamma_1",
        "beta_1",
        "kappa_1",
        "log_M_lb_bits_1",
        "per_letter_bits_1",
        "capacity_bits_1",
        "admissible_1",
        "tau_star_2",
        "gamma_2",
        "beta_2",
        "kappa_2",
        "log_M_lb_bits_2",
        "per_letter_bits_2",
        "capacity_bits_2",
        "admissible_2",
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

/// Sentinel multiple of n·C bounding the ln M search.
pub const REGION_CEILING: f64 = 1.5;

/// Largest ln M in [0, hi] with `ok(ln M)`, by bisection; `ok(0)` must hold.
/// Returns (ln M, clipped-at-ceiling).
fn bisect_ln_m(hi: f64, mut ok: impl FnMut(f64) -> Result<bool, CliError>) -> Result<(f64, bool), CliError> {
    if hi <= 0.0 {
        return Ok((0.0, false));
    }
    if ok(hi)? {
        return Ok((hi, true));
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, false))
}

fn region(j: &RegionJob) -> Result<Table, CliError> {
    let opts = DtOptions { confusion_model: j.confusion_model };
    let n = j.n;
    let rows = par_rows(&j.alphas, |&alpha| {
        let cfg = validate(j.channel.spec(n), PowerSplit::average(alpha))?;
        let (c1, c2) = asymptotic_region(&cfg);
        let total = |l1: f64, l2: f64| -> Result<f64, CliError> { Ok(dt_bound(&cfg, &CodeSizes::from_ln(l1, l2)?, opts)?.total) };
        // User 1 first with half the budget, then user 2 with the rest.
        let row = (|| {
            let (l1, clip1) = bisect_ln_m(REGION_CEILING * n as f64 * c1, |l| Ok(total(l, 0.0)? <= 0.5 * j.eps))?;
            let (l2, clip2) = bisect_ln_m(REGION_CEILING * n as f64 * c2, |l| Ok(total(l1, l)? <= j.eps))?;
            let status = if clip1 || clip2 { "clipped" } else { "ok" };
            Ok::<_, CliError>((l1, l2, total(l1, l2)?, status.to_string()))
        })();
        let (l1, l2, tot, status) = match row {
            Ok(r) => r,
            Err(CliError::Numeric(e)) => (f64::NAN, f64::NAN, f64::NAN, format!("infeasible: {e}")),
            Err(e) => return Err(e),
        };
        let bits = |l: f64| nats_to_bits(l) / n as f64;
        Ok(vec![
            num(alpha),
            num(bits(l1)),
            num(bits(l2)),
            num(nats_to_bits(c1)),
            num(nats_to_bits(c2)),
            num(tot),
            Value::from(status),
        ])
    })?;
    let mut t = Table::new(vec!["alpha", "R1_bits", "R2_bits", "R1_asym_bits", "R2_asym_bits", "total", "status"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn sweep(j: &SweepJob) -> Result<Table, CliError> {
    let opts = DtOptions { confusion_model: j.confusion_model };
    let points: Vec<(usize, f64, f64)> = j
        .ns
        .iter()
        .flat_map(|&n| j.alphas.iter().flat_map(move |&a| j.fractions.iter().map(move |&f| (n, a, f))))
        .collect();
    let rows = par_rows(&points, |&(n, alpha, f)| {
        let cfg = validate(j.channel.spec(n), PowerSplit::average(alpha))?;
        let (c1, c2) = asymptotic_region(&cfg);
        let sizes = CodeSizes::from_rates(n, f * c1, f * c2)?;
        let (r1, r2) = rate_bits(&sizes, n);
        let mut row = vec![Value::from(n), num(alpha), num(f), num(r1), num(r2)];
        match &j.compare_spc {
            None => row.push(num(dt_bound(&cfg, &sizes, opts)?.total)),
            Some(mc) => {
                let c = compare_spc_dpc(&cfg, &sizes, &mc.mc(), opts)?;
                row.extend([num(c.dpc_total), num(c.spc_total), num(c.difference), num(c.difference_half_width)]);
            }
        }
        Ok(row)
    })?;
    let mut columns = vec!["n", "alpha", "fraction", "R1_bits", "R2_bits", "dpc_total"];
    if j.compare_spc.is_some() {
        columns.extend(["spc_total", "difference", "difference_hw99"]);
    }
    let mut t = Table::new(columns);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}
