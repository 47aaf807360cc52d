//! Information-density kernels, each written from the Gaussian densities
//! that define it. Second moments are computed here from the linear
//! construction of each pair; nothing is shared with the closed-form paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kappa_beta::PeakPowerConfig;
use crate::model::ValidatedConfig;

/// A registered information density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TermId {
    /// i(U2; Y2) under the true joint law.
    U2Y2,
    /// i(U2; Ȳ2) with Ȳ2 independent of the codeword.
    U2Y2Bar,
    /// i(U1; Y1) under the true joint law.
    U1Y1,
    /// i(U1; Ȳ1): competing auxiliary with its own interference draw.
    U1Y1Bar,
    /// i(U1; Ȳ1) with the competing auxiliary built on the true X2.
    U1Y1BarShared,
    /// i(X; Y1 | X2) under superposition coding.
    SpcCond,
    /// i(X; Ȳ1 | X2), Ȳ1 drawn from the output marginal.
    SpcCondBar,
    /// i(X2; Y1) under superposition coding.
    SpcCross,
    /// i(X2; Ȳ1).
    SpcCrossBar,
    /// Reference-output law of user 1's peak-power information density.
    G1,
    /// Conditional law of user 1's peak-power information density.
    H1,
    G2,
    H2,
}

impl TermId {
    pub const ALL: [TermId; 13] = [
        TermId::U2Y2,
        TermId::U2Y2Bar,
        TermId::U1Y1,
        TermId::U1Y1Bar,
        TermId::U1Y1BarShared,
        TermId::SpcCond,
        TermId::SpcCondBar,
        TermId::SpcCross,
        TermId::SpcCrossBar,
        TermId::G1,
        TermId::H1,
        TermId::G2,
        TermId::H2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TermId::U2Y2 => "i(U2;Y2)",
            TermId::U2Y2Bar => "i(U2;Ybar2)",
            TermId::U1Y1 => "i(U1;Y1)",
            TermId::U1Y1Bar => "i(U1;Ybar1)",
            TermId::U1Y1BarShared => "i(U1;Ybar1|shared)",
            TermId::SpcCond => "i(X;Y1|X2)",
            TermId::SpcCondBar => "i(X;Ybar1|X2)",
            TermId::SpcCross => "i(X2;Y1)",
            TermId::SpcCrossBar => "i(X2;Ybar1)",
            TermId::G1 => "G_n1",
            TermId::H1 => "H_n1",
            TermId::G2 => "G_n2",
            TermId::H2 => "H_n2",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s) || format!("{t:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownTerm(s.to_string()))
    }

    /// Substream index; fixed forever so reports stay reproducible.
    pub(crate) fn stream(self) -> u64 {
        Self::ALL.iter().position(|&t| t == self).expect("registered") as u64
    }

    /// True for the peak-power (κβ) laws.
    pub fn is_peak_law(self) -> bool {
        matches!(self, TermId::G1 | TermId::H1 | TermId::G2 | TermId::H2)
    }
}

impl std::str::FromStr for TermId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s)
    }
}

impl std::fmt::Display for TermId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The channel a term is sampled on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    /// Gaussian codebooks with an average-power split.
    Average(ValidatedConfig),
    /// Equal-power codewords.
    Peak(PeakPowerConfig),
}

impl Scenario {
    pub fn n(&self) -> usize {
        match self {
            Scenario::Average(c) => c.spec.n,
            Scenario::Peak(c) => c.spec.n,
        }
    }
}

/// Per-letter `ln N2((u,y); 0, Σ) − ln N(u; 0, vu) − ln N(y; 0, vy)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairDensity {
    constant: f64,
    uu: f64,
    yy: f64,
    uy: f64,
}

impl PairDensity {
    pub(crate) fn new(vu: f64, vy: f64, c: f64) -> Result<Self> {
        let det = vu * vy - c * c;
        if !(vu > 0.0 && vy > 0.0 && det > 0.0) {
            return Err(Error::Degenerate(format!("pair covariance [[{vu}, {c}], [{c}, {vy}]] is singular")));
        }
        Ok(Self {
            constant: 0.5 * (vu * vy / det).ln(),
            uu: -0.5 * (vy / det - 1.0 / vu),
            yy: -0.5 * (vu / det - 1.0 / vy),
            uy: c / det,
        })
    }

    /// Mutual information per letter: the mean of the density under the joint law.
    pub(crate) fn mutual_information(&self) -> f64 {
        self.constant
    }

    #[inline]
    fn eval(&self, u: f64, y: f64) -> f64 {
        self.constant + self.uu * u * u + self.yy * y * y + self.uy * u * y
    }
}

/// Per-letter `ln N(y; m1, v1) − ln N(y; m2, v2)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussRatio {
    constant: f64,
    h1: f64,
    h2: f64,
}

impl GaussRatio {
    fn new(v1: f64, v2: f64) -> Result<Self> {
        if !(v1 > 0.0 && v2 > 0.0) {
            return Err(Error::Degenerate(format!("variances {v1}, {v2} must be positive")));
        }
        Ok(Self { constant: 0.5 * (v2 / v1).ln(), h1: 0.5 / v1, h2: 0.5 / v2 })
    }

    #[inline]
    fn eval(&self, y: f64, m1: f64, m2: f64) -> f64 {
        let (d1, d2) = (y - m1, y - m2);
        self.constant - self.h1 * d1 * d1 + self.h2 * d2 * d2
    }
}

/// Independent coordinates ξ_i = std_i·g_i mapped linearly to (u, y).
#[derive(Debug, Clone)]
pub(crate) struct LinearPair {
    std: Vec<f64>,
    u_row: Vec<f64>,
    y_row: Vec<f64>,
}

impl LinearPair {
    pub(crate) fn covariance(&self) -> (f64, f64, f64) {
        let mut m = (0.0, 0.0, 0.0);
        for i in 0..self.std.len() {
            let v = self.std[i] * self.std[i];
            m.0 += self.u_row[i] * self.u_row[i] * v;
            m.1 += self.y_row[i] * self.y_row[i] * v;
            m.2 += self.u_row[i] * self.y_row[i] * v;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Kernel {
    /// (u, y) drawn through a linear map, scored with `density`.
    Linear { draw: LinearPair, density: PairDensity },
    /// u and y drawn independently.
    Split { su: f64, sy: f64, density: PairDensity },
    /// ln p(y|x1+x2) − ln p(y|x2); y is the channel output or an independent
    /// draw with standard deviation `bar`.
    SpcCond { s1: f64, s2: f64, sz: f64, bar: Option<f64>, ratio: GaussRatio },
    /// ln p(y|x2) − ln p(y).
    SpcCross { s1: f64, s2: f64, sz: f64, bar: Option<f64>, ratio: GaussRatio },
    /// Fixed codeword with per-letter amplitude `amp`; y = mean + sd·g and the
    /// score is ln N(y; amp, v) − ln N(y; 0, P + N).
    Peak { amp: f64, mean: f64, sd: f64, ratio: GaussRatio },
}

impl Kernel {
    pub(crate) fn normals_per_letter(&self) -> usize {
        match self {
            Kernel::Linear { draw, .. } => draw.std.len(),
            Kernel::Split { .. } => 2,
            Kernel::SpcCond { bar, .. } | Kernel::SpcCross { bar, .. } => 3 + usize::from(bar.is_some()),
            Kernel::Peak { .. } => 1,
        }
    }

    /// One sample: the sum over letters, reading `normals_per_letter`
    /// standard normals per letter from `z`.
    pub(crate) fn sample(&self, z: &[f64]) -> f64 {
        match self {
            Kernel::Linear { draw, density } => {
                let k = draw.std.len();
                z.chunks_exact(k)
                    .map(|g| {
                        let (mut u, mut y) = (0.0, 0.0);
                        for i in 0..k {
                            let x = draw.std[i] * g[i];
                            u += draw.u_row[i] * x;
                            y += draw.y_row[i] * x;
                        }
                        density.eval(u, y)
                    })
                    .sum()
            }
            Kernel::Split { su, sy, density } => z.chunks_exact(2).map(|g| density.eval(su * g[0], sy * g[1])).sum(),
            Kernel::SpcCond { s1, s2, sz, bar, ratio } | Kernel::SpcCross { s1, s2, sz, bar, ratio } => {
                let cond = matches!(self, Kernel::SpcCond { .. });
                z.chunks_exact(self.normals_per_letter())
                    .map(|g| {
                        let (x1, x2) = (s1 * g[0], s2 * g[1]);
                        let y = match bar {
                            Some(s) => s * g[3],
                            None => x1 + x2 + sz * g[2],
                        };
                        if cond {
                            ratio.eval(y, x1 + x2, x2)
                        } else {
                            ratio.eval(y, x2, 0.0)
                        }
                    })
                    .sum()
            }
            Kernel::Peak { amp, mean, sd, ratio } => z.iter().map(|g| ratio.eval(mean + sd * g, *amp, 0.0)).sum(),
        }
    }

    /// Mean of the density per letter under its own joint law, when the
    /// kernel is a joint (non-bar) pair.
    pub(crate) fn joint_information(&self) -> Option<f64> {
        match self {
            Kernel::Linear { density, .. } => Some(density.mutual_information()),
            _ => None,
        }
    }
}

fn require_average(term: TermId, s: &Scenario) -> Result<ValidatedConfig> {
    match s {
        Scenario::Average(c) => Ok(*c),
        Scenario::Peak(_) => Err(Error::Domain(format!("{term} needs an average-power configuration"))),
    }
}

fn require_peak(term: TermId, s: &Scenario) -> Result<PeakPowerConfig> {
    match s {
        Scenario::Peak(c) => Ok(*c),
        Scenario::Average(_) => Err(Error::Domain(format!("{term} needs a peak-power configuration"))),
    }
}

/// True (U1, Y1) pair over (X1, X2, Z1).
pub(crate) fn u1y1_pair(c: &ValidatedConfig) -> LinearPair {
    let (ap, abp, n1) = (c.alpha_power, c.alpha_bar_power, c.spec.noise1);
    let b2 = ap / (ap + n1);
    LinearPair {
        std: vec![ap.sqrt(), abp.sqrt(), n1.sqrt()],
        u_row: vec![1.0, b2, 0.0],
        y_row: vec![1.0, 1.0, 1.0],
    }
}

/// True (U2, Y2) pair over (X1, X2, Z2).
pub(crate) fn u2y2_pair(c: &ValidatedConfig) -> LinearPair {
    LinearPair {
        std: vec![c.alpha_power.sqrt(), c.alpha_bar_power.sqrt(), c.spec.noise2.sqrt()],
        u_row: vec![0.0, 1.0, 0.0],
        y_row: vec![1.0, 1.0, 1.0],
    }
}

pub(crate) fn build_kernel(term: TermId, s: &Scenario) -> Result<Kernel> {
    let density_of = |p: &LinearPair| {
        let (vu, vy, c) = p.covariance();
        PairDensity::new(vu, vy, c)
    };
    Ok(match term {
        TermId::U1Y1 | TermId::U2Y2 => {
            let c = require_average(term, s)?;
            let draw = if term == TermId::U1Y1 { u1y1_pair(&c) } else { u2y2_pair(&c) };
            let density = density_of(&draw)?;
            Kernel::Linear { draw, density }
        }
        TermId::U1Y1Bar | TermId::U2Y2Bar => {
            let c = require_average(term, s)?;
            let pair = if term == TermId::U1Y1Bar { u1y1_pair(&c) } else { u2y2_pair(&c) };
            let (vu, vy, _) = pair.covariance();
            Kernel::Split { su: vu.sqrt(), sy: vy.sqrt(), density: density_of(&pair)? }
        }
        TermId::U1Y1BarShared => {
            let c = require_average(term, s)?;
            let b2 = c.alpha_power / (c.alpha_power + c.spec.noise1);
            let sc = c.alpha_power.sqrt();
            // (X2, C_k, C_l, Z1): Ū1 = C_l + b2·X2, Y1 = C_k + X2 + Z1.
            let draw = LinearPair {
                std: vec![c.alpha_bar_power.sqrt(), sc, sc, c.spec.noise1.sqrt()],
                u_row: vec![b2, 0.0, 1.0, 0.0],
                y_row: vec![1.0, 1.0, 0.0, 1.0],
            };
            Kernel::Linear { draw, density: density_of(&u1y1_pair(&c))? }
        }
        TermId::SpcCond | TermId::SpcCondBar | TermId::SpcCross | TermId::SpcCrossBar => {
            let c = require_average(term, s)?;
            let (ap, abp, n1, p) = (c.alpha_power, c.alpha_bar_power, c.spec.noise1, c.spec.power);
            let bar = matches!(term, TermId::SpcCondBar | TermId::SpcCrossBar).then(|| (p + n1).sqrt());
            let (s1, s2, sz) = (ap.sqrt(), abp.sqrt(), n1.sqrt());
            if matches!(term, TermId::SpcCond | TermId::SpcCondBar) {
                Kernel::SpcCond { s1, s2, sz, bar, ratio: GaussRatio::new(n1, ap + n1)? }
            } else {
                Kernel::SpcCross { s1, s2, sz, bar, ratio: GaussRatio::new(ap + n1, p + n1)? }
            }
        }
        TermId::G1 | TermId::H1 | TermId::G2 | TermId::H2 => {
            let c = require_peak(term, s)?;
            let sp = &c.spec;
            // (codeword power, conditional noise variance, output variance).
            let (power, v, vy) = match term {
                TermId::G1 => (sp.power, sp.noise1, sp.power + sp.noise1),
                TermId::H1 => (sp.noise1 / (c.p1 + sp.noise1) * c.p2, sp.noise1, sp.power + sp.noise1),
                _ => (c.p2, c.p1 + sp.noise2, sp.power + sp.noise2),
            };
            let amp = power.sqrt();
            let (mean, sd) = if matches!(term, TermId::G1 | TermId::G2) { (0.0, vy.sqrt()) } else { (amp, v.sqrt()) };
            Kernel::Peak { amp, mean, sd, ratio: GaussRatio::new(v, vy)? }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, ChannelSpec, PowerSplit};

    #[test]
    fn names_round_trip() {
        for t in TermId::ALL {
            assert_eq!(TermId::from_name(t.name()).unwrap(), t);
            assert_eq!(t.name().parse::<TermId>().unwrap(), t);
        }
        assert!(matches!(TermId::from_name("i(Z;Z)"), Err(Error::UnknownTerm(_))));
    }

    #[test]
    fn pair_density_matches_bivariate_normal() {
        let (vu, vy, c) = (1.3, 2.0, 0.9);
        let d = PairDensity::new(vu, vy, c).unwrap();
        let (u, y) = (0.4, -1.1);
        let det: f64 = vu * vy - c * c;
        let joint = -(2.0 * std::f64::consts::PI) .ln() - 0.5 * det.ln()
            - 0.5 * (vy * u * u - 2.0 * c * u * y + vu * y * y) / det;
        let marg = |x: f64, v: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * x * x / v;
        assert!((d.eval(u, y) - (joint - marg(u, vu) - marg(y, vy))).abs() < 1e-14);
    }

    #[test]
    fn kernels_need_matching_scenario() {
        let avg = Scenario::Average(validate(ChannelSpec::new(2.0, 1.0, 1.0, 10), PowerSplit::average(0.5)).unwrap());
        assert!(build_kernel(TermId::G1, &avg).is_err());
        assert!(build_kernel(TermId::U1Y1, &avg).is_ok());
        let none = Scenario::Average(validate(ChannelSpec::new(2.0, 1.0, 1.0, 10), PowerSplit::average(0.0)).unwrap());
        assert!(matches!(build_kernel(TermId::U1Y1, &none), Err(Error::Degenerate(_))));
    }
}
