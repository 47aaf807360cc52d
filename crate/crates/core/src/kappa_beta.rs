//! κβ lower bounds on the maximal code sizes of peak-power dirty paper
//! coding.
//!
//! `ln M*_j ≥ ln κ_{τ,j} − ln β_{1−ε+τ,j}`. β is a Neyman–Pearson error
//! between the output law under a fixed codeword and the reference output
//! law; both information-density laws are affine functions of
//! `Σ S_i²` and `Σ S_i` for iid standard normals S_i, so every probability is
//! a noncentral chi-squared tail. κ tests a central against a noncentral
//! scaled chi-squared law for r = ‖Y‖².

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::model::{capacity, ChannelSpec, User};
use crate::numeric::{brent, golden_max, log_sub};
use crate::specfun::{chi2_ln_cdf, chi2_ln_sf, inv_marcum_in_b, ncx2_ln_cdf, ncx2_ln_pdf, ncx2_ln_sf};

/// Channel with equal-power codewords: ‖x1‖² = nP1, ‖x2‖² = nP2, x1 ⟂ x2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakPowerConfig {
    pub spec: ChannelSpec,
    #[serde(rename = "P1")]
    pub p1: f64,
    #[serde(rename = "P2")]
    pub p2: f64,
}

impl PeakPowerConfig {
    pub fn new(spec: ChannelSpec, p1: f64, p2: f64) -> Result<Self> {
        crate::model::validate(
            spec,
            crate::model::PowerSplit { alpha: 0.5, mode: crate::model::PowerMode::Peak { p1, p2 } },
        )?;
        Ok(Self { spec, p1, p2 })
    }

    /// b1 = N1/(P1 + N1).
    pub fn b1(&self) -> f64 {
        self.spec.noise1 / (self.p1 + self.spec.noise1)
    }

    /// The per-letter capacity term the user-j bound approaches.
    pub fn capacity(&self, user: User) -> f64 {
        match user {
            User::One => capacity(self.spec.power / self.spec.noise1),
            User::Two => capacity(self.p2 / (self.p1 + self.spec.noise2)),
        }
    }

    /// Lower limit on admissible thresholds γ_j.
    pub fn gamma_floor(&self, user: User) -> f64 {
        match user {
            User::Two => 0.0,
            User::One => {
                let (p1, p2, n1) = (self.p1, self.p2, self.spec.noise1);
                if p1 <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let var_u1 = p1 * (p1 * p2 + (p1 + n1).powi(2)) / (p1 + n1).powi(2);
                0.5 * (p1 / var_u1).ln()
            }
        }
    }
}

/// Law of `constant + Σ_{i≤n} (quad·S_i² + lin·S_i)` with S_i iid N(0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineChiLaw {
    pub n: usize,
    pub constant: f64,
    pub quad: f64,
    pub lin: f64,
}

impl AffineChiLaw {
    /// Completing the square: X = c' + quad·W with W ~ χ²_n(λ).
    /// Returns (λ, c').
    fn completed(&self) -> Result<(f64, f64)> {
        if self.quad == 0.0 {
            return Err(Error::Degenerate("information density has no quadratic part".into()));
        }
        let n = self.n as f64;
        let d = self.lin / (2.0 * self.quad);
        Ok((n * d * d, self.constant - n * self.quad * d * d))
    }

    /// Noncentrality of the completed square.
    pub fn noncentrality(&self) -> Result<f64> {
        Ok(self.completed()?.0)
    }

    /// Chi-squared threshold t with {X ≥ γ} = {W ≤ t} (quad < 0) or {W ≥ t}.
    pub fn threshold(&self, gamma: f64) -> Result<f64> {
        let (_, c) = self.completed()?;
        Ok((gamma - c) / self.quad)
    }

    pub fn mean(&self) -> f64 {
        self.constant + self.n as f64 * self.quad
    }

    pub fn variance(&self) -> f64 {
        self.n as f64 * (2.0 * self.quad * self.quad + self.lin * self.lin)
    }

    /// ln Pr[X ≥ γ].
    pub fn ln_prob_ge(&self, gamma: f64) -> Result<f64> {
        if gamma.is_nan() {
            return domain("threshold is NaN");
        }
        let (lambda, _) = self.completed()?;
        let k = self.n as f64;
        if gamma == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if gamma == f64::INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let t = self.threshold(gamma)?;
        if self.quad < 0.0 {
            ncx2_ln_cdf(k, lambda, t)
        } else {
            ncx2_ln_sf(k, lambda, t)
        }
    }

    pub fn prob_ge(&self, gamma: f64) -> Result<f64> {
        Ok(self.ln_prob_ge(gamma)?.exp())
    }

    /// γ with Pr[X ≥ γ] = a.
    pub fn quantile_ge(&self, a: f64) -> Result<f64> {
        if !(a > 0.0 && a < 1.0) {
            return domain(format!("probability must lie in (0, 1), got {a}"));
        }
        let (lambda, c) = self.completed()?;
        let nu = 0.5 * self.n as f64;
        let p = if self.quad < 0.0 { 1.0 - a } else { a };
        let b = inv_marcum_in_b(nu, lambda.sqrt(), p)?;
        Ok(c + self.quad * b * b)
    }
}

/// The information density under the reference output law (G) and under the
/// conditional law given a codeword (H).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoDensityLaws {
    pub g: AffineChiLaw,
    pub h: AffineChiLaw,
    /// Output variance normalised by the effective noise variance.
    pub sigma2_y: f64,
}

/// (σ², s_G, s_H) for user j.
pub(crate) fn law_parameters(user: User, cfg: &PeakPowerConfig) -> (f64, f64, f64) {
    let s = &cfg.spec;
    match user {
        User::Two => {
            let snr = cfg.p2 / (cfg.p1 + s.noise2);
            ((s.power + s.noise2) / (cfg.p1 + s.noise2), snr, snr)
        }
        User::One => ((s.power + s.noise1) / s.noise1, s.power / s.noise1, cfg.b1() * cfg.p2 / s.noise1),
    }
}

pub fn info_density_laws(user: User, cfg: &PeakPowerConfig) -> Result<InfoDensityLaws> {
    let (sigma2, s_g, s_h) = law_parameters(user, cfg);
    if sigma2 == 1.0 {
        return Err(Error::Degenerate(format!("user {} sees no signal", user.index())));
    }
    let n = cfg.spec.n;
    let nf = n as f64;
    let half_ln = 0.5 * nf * sigma2.ln();
    let g = AffineChiLaw {
        n,
        constant: half_ln - 0.5 * nf * s_g,
        quad: 0.5 * (1.0 - sigma2),
        lin: s_g.sqrt() * sigma2.sqrt(),
    };
    let h = AffineChiLaw {
        n,
        constant: half_ln + 0.5 * nf * s_h / sigma2,
        quad: 0.5 * (1.0 - sigma2) / sigma2,
        lin: s_h.sqrt() / sigma2,
    };
    Ok(InfoDensityLaws { g, h, sigma2_y: sigma2 })
}

/// β = Pr[G ≥ γ].
pub fn beta_user(user: User, cfg: &PeakPowerConfig, gamma: f64) -> Result<f64> {
    Ok(ln_beta_user(user, cfg, gamma)?.exp())
}

pub fn ln_beta_user(user: User, cfg: &PeakPowerConfig, gamma: f64) -> Result<f64> {
    info_density_laws(user, cfg)?.g.ln_prob_ge(gamma)
}

/// γ with Pr[H ≥ γ] = a; errors if γ falls below the admissible floor.
pub fn solve_gamma(user: User, cfg: &PeakPowerConfig, a: f64) -> Result<f64> {
    if a >= 1.0 && a.is_finite() {
        return Err(Error::Inadmissible(format!("a = {a} sends the threshold to −∞")));
    }
    if !(a > 0.0) {
        return domain(format!("probability must lie in (0, 1), got {a}"));
    }
    let gamma = info_density_laws(user, cfg)?.h.quantile_ge(a)?;
    let floor = cfg.gamma_floor(user);
    if !(gamma > floor) {
        return Err(Error::Inadmissible(format!(
            "user {}: γ = {gamma} is not above {floor}",
            user.index()
        )));
    }
    Ok(gamma)
}

/// The two hypotheses for r = ‖Y_j‖²: P0 = s0·χ²_n, P1 = s1·χ²_n(υ).
#[derive(Debug, Clone, Copy)]
struct KappaTest {
    n: f64,
    s0: f64,
    s1: f64,
    upsilon: f64,
}

impl KappaTest {
    fn new(user: User, cfg: &PeakPowerConfig) -> Self {
        let s = &cfg.spec;
        let n = s.n as f64;
        match user {
            User::One => Self {
                n,
                s0: s.power + s.noise1,
                s1: s.noise1,
                upsilon: n * cfg.b1() * cfg.p2 / s.noise1,
            },
            User::Two => Self {
                n,
                s0: s.power + s.noise2,
                s1: cfg.p1 + s.noise2,
                upsilon: n * cfg.p2 / (cfg.p1 + s.noise2),
            },
        }
    }

    fn ln_p0(&self, r: f64) -> f64 {
        let h = 0.5 * self.n;
        (h - 1.0) * r.ln() - r / (2.0 * self.s0) - ln_gamma(h) - h * (2.0 * self.s0).ln()
    }

    fn ln_p1(&self, r: f64) -> f64 {
        ncx2_ln_pdf(self.n, self.upsilon, r / self.s1).unwrap_or(f64::NAN) - self.s1.ln()
    }

    fn log_ratio(&self, r: f64) -> f64 {
        self.ln_p1(r) - self.ln_p0(r)
    }

    fn ln_mass0(&self, lo: f64, hi: f64) -> f64 {
        let c = |r: f64| chi2_ln_cdf(self.n, r / self.s0).unwrap_or(f64::NAN);
        let s = |r: f64| chi2_ln_sf(self.n, r / self.s0).unwrap_or(f64::NAN);
        ln_interval_mass(c, s, lo, hi)
    }

    fn ln_mass1(&self, lo: f64, hi: f64) -> f64 {
        let c = |r: f64| ncx2_ln_cdf(self.n, self.upsilon, r / self.s1).unwrap_or(f64::NAN);
        let s = |r: f64| ncx2_ln_sf(self.n, self.upsilon, r / self.s1).unwrap_or(f64::NAN);
        ln_interval_mass(c, s, lo, hi)
    }

    /// Generous upper end for r under either hypothesis.
    fn r_cap(&self) -> f64 {
        let spread = |s: f64, mean: f64, var: f64| s * (mean + 60.0 * var.sqrt() + 200.0);
        spread(self.s0, self.n, 2.0 * self.n).max(spread(self.s1, self.n + self.upsilon, 2.0 * (self.n + 2.0 * self.upsilon)))
    }
}

/// ln P[lo ≤ R ≤ hi] from ln CDF and ln SF, picking the well-conditioned side.
fn ln_interval_mass(ln_cdf: impl Fn(f64) -> f64, ln_sf: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let half = -std::f64::consts::LN_2;
    let c_hi = if hi == f64::INFINITY { 0.0 } else { ln_cdf(hi) };
    if c_hi <= half {
        let c_lo = if lo <= 0.0 { f64::NEG_INFINITY } else { ln_cdf(lo) };
        return if c_lo >= c_hi { f64::NEG_INFINITY } else { log_sub(c_hi, c_lo) };
    }
    let s_lo = if lo <= 0.0 { 0.0 } else { ln_sf(lo) };
    let s_hi = if hi == f64::INFINITY { f64::NEG_INFINITY } else { ln_sf(hi) };
    if s_lo <= half {
        return if s_hi >= s_lo { f64::NEG_INFINITY } else { log_sub(s_lo, s_hi) };
    }
    (1.0 - (if lo <= 0.0 { 0.0 } else { ln_cdf(lo).exp() }) - s_hi.exp()).max(0.0).ln()
}

/// Region {r : ln p1/p0 ≥ level}, an interval because the log ratio is
/// concave in r.
struct NpRegion {
    test: KappaTest,
    r_mode: f64,
    l_mode: f64,
    l_zero: f64,
    cap: f64,
}

impl NpRegion {
    fn new(test: KappaTest) -> Result<Self> {
        let cap = test.r_cap();
        let tiny = cap * 1e-14;
        let (r_mode, l_mode) = golden_max(|r| test.log_ratio(r), tiny, cap, cap * 1e-13);
        if !l_mode.is_finite() {
            return Err(Error::Convergence("kappa: log-likelihood ratio is not finite".into()));
        }
        Ok(Self { test, r_mode, l_mode, l_zero: test.log_ratio(tiny), cap })
    }

    fn interval(&self, level: f64) -> Result<(f64, f64)> {
        let t = &self.test;
        let f = |r: f64| t.log_ratio(r) - level;
        let lo = if self.l_zero >= level {
            0.0
        } else {
            brent(f, self.cap * 1e-14, self.r_mode, 1e-13 * self.r_mode, "kappa lower edge")?
        };
        let hi = if f(self.cap) >= 0.0 {
            f64::INFINITY
        } else {
            brent(f, self.r_mode, self.cap, 1e-13 * self.cap, "kappa upper edge")?
        };
        Ok((lo, hi))
    }
}

/// κ_τ = P0[p1/p0 ≥ ψ] with ψ set so that P1[p1/p0 ≥ ψ] = τ.
pub fn kappa(user: User, cfg: &PeakPowerConfig, tau: f64) -> Result<f64> {
    Ok(ln_kappa(user, cfg, tau)?.exp())
}

pub fn ln_kappa(user: User, cfg: &PeakPowerConfig, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return domain(format!("tau must lie in (0, 1), got {tau}"));
    }
    let test = KappaTest::new(user, cfg);
    if test.upsilon == 0.0 && test.s1 >= test.s0 {
        // Identical hypotheses.
        return Ok(tau.ln());
    }
    let region = NpRegion::new(test)?;
    let ln_tau = tau.ln();
    let err = std::cell::RefCell::new(None);
    let g = |level: f64| match region.interval(level) {
        Ok((lo, hi)) => test.ln_mass1(lo, hi) - ln_tau,
        Err(e) => {
            *err.borrow_mut() = Some(e);
            f64::NAN
        }
    };
    // Mass is 0 at the top level and grows as the level drops.
    let top = region.l_mode;
    let mut step = 1.0;
    while !(g(top - step) >= 0.0) {
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        step *= 2.0;
        if step > 1e8 {
            return Err(Error::Convergence("kappa: cannot reach target tau".into()));
        }
    }
    // Small τ needs a level very close to the mode, where mass ∝ √(top − level).
    let mut gap = 1e-3_f64.min(0.5 * step);
    while !(g(top - gap) < 0.0) {
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        gap *= 1e-2;
        if gap < 1e-300 {
            return Err(Error::Convergence("kappa: target tau below resolvable mass".into()));
        }
    }
    let level = brent(g, top - step, top - gap, 1e-14 * step, "kappa level")?;
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let (lo, hi) = region.interval(level)?;
    Ok(test.ln_mass0(lo, hi))
}

/// Lower bound on ln M*_j for a given (ε, τ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSizeBound {
    /// max(0, ln κ − ln β), in nats.
    pub ln_m_lb: f64,
    pub ln_kappa: f64,
    pub ln_beta: f64,
    pub gamma: f64,
    pub tau: f64,
    /// False when the threshold violated its admissibility floor; the bound
    /// is then the trivial ln M* ≥ 0.
    pub admissible: bool,
}

pub fn max_code_size_lb(user: User, cfg: &PeakPowerConfig, eps: f64, tau: f64) -> Result<CodeSizeBound> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("eps must lie in (0, 1), got {eps}"));
    }
    if !(tau > 0.0 && tau < eps) {
        return domain(format!("tau must lie in (0, eps), got {tau}"));
    }
    let a = 1.0 - eps + tau;
    let gamma = match solve_gamma(user, cfg, a) {
        Ok(g) => g,
        Err(Error::Inadmissible(_)) => {
            return Ok(CodeSizeBound {
                ln_m_lb: 0.0,
                ln_kappa: f64::NAN,
                ln_beta: f64::NAN,
                gamma: f64::NAN,
                tau,
                admissible: false,
            })
        }
        Err(e) => return Err(e),
    };
    let ln_beta = ln_beta_user(user, cfg, gamma)?;
    let ln_kappa = ln_kappa(user, cfg, tau)?;
    Ok(CodeSizeBound { ln_m_lb: (ln_kappa - ln_beta).max(0.0), ln_kappa, ln_beta, gamma, tau, admissible: true })
}

/// Maximises the bound over τ ∈ (0, ε): coarse grid, then golden section.
pub fn optimize_tau(user: User, cfg: &PeakPowerConfig, eps: f64) -> Result<CodeSizeBound> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("eps must lie in (0, 1), got {eps}"));
    }
    let eval = |u: f64| max_code_size_lb(user, cfg, eps, u * eps);
    let objective = |b: &CodeSizeBound| if b.admissible { b.ln_kappa - b.ln_beta } else { f64::NEG_INFINITY };
    let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let mut best: Option<(usize, CodeSizeBound)> = None;
    for (i, &u) in grid.iter().enumerate() {
        let b = eval(u)?;
        if best.as_ref().map_or(true, |(_, cur)| objective(&b) > objective(cur)) {
            best = Some((i, b));
        }
    }
    let (i, coarse) = best.expect("grid is nonempty");
    if objective(&coarse) == f64::NEG_INFINITY {
        return eval(0.5);
    }
    let lo = if i == 0 { 1e-6 } else { grid[i - 1] };
    let hi = if i + 1 == grid.len() { 1.0 - 1e-6 } else { grid[i + 1] };
    let mut err = None;
    let (u, _) = golden_max(
        |u| match eval(u) {
            Ok(b) => objective(&b),
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        1e-6,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let refined = eval(u)?;
    Ok(if objective(&refined) >= objective(&coarse) { refined } else { coarse })
}

/// Per-user results of the κβ bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaBetaUser {
    pub eps: f64,
    pub tau: f64,
    pub gamma: f64,
    pub beta: f64,
    pub kappa: f64,
    pub log_m_star_lb: f64,
    pub admissible: bool,
    /// The capacity term the per-letter bound approaches.
    pub capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaBetaReport {
    pub user1: KappaBetaUser,
    pub user2: KappaBetaUser,
}

pub fn kappa_beta_user(user: User, cfg: &PeakPowerConfig, eps: f64) -> Result<KappaBetaUser> {
    let b = optimize_tau(user, cfg, eps)?;
    Ok(KappaBetaUser {
        eps,
        tau: b.tau,
        gamma: b.gamma,
        beta: b.ln_beta.exp(),
        kappa: b.ln_kappa.exp(),
        log_m_star_lb: b.ln_m_lb,
        admissible: b.admissible,
        capacity: cfg.capacity(user),
    })
}

pub fn kappa_beta_report(cfg: &PeakPowerConfig, eps1: f64, eps2: f64) -> Result<KappaBetaReport> {
    let (u1, u2) = rayon::join(|| kappa_beta_user(User::One, cfg, eps1), || kappa_beta_user(User::Two, cfg, eps2));
    Ok(KappaBetaReport { user1: u1?, user2: u2? })
}
