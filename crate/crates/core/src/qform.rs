//! Quadratic forms of Gaussian vectors: the dispersion matrices of the
//! dirty-paper information densities, their eigenvalues, and the laws of the
//! resulting weighted chi-squared sums.
//!
//! Every information density here has the per-letter shape
//! `c + a1·y² + a2·u² + a3·u·y` for a jointly Gaussian pair (u, y) that is a
//! linear function of independent Gaussian coordinates. Writing the
//! coordinates as `std_i · g_i` with g standard normal turns the sum over n
//! letters into `Σ_t λ_t χ²_{n,t}`, where λ_t are the eigenvalues of the
//! scaled coefficient matrix.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::model::{dpc_statistics, DpcStats, ValidatedConfig};
use crate::specfun::{chi2_ln_cdf, chi2_ln_sf, log_integrate, vg_ln_cdf, vg_ln_sf, VgParams};

/// Dense symmetric matrix. Writes go to both triangles, so symmetry holds
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        Self { order, data: vec![0.0; order * order] }
    }

    pub fn identity(order: usize) -> Self {
        Self::diag(&vec![1.0; order])
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.order + j] = v;
        self.data[j * self.order + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    /// D·M·D for a diagonal D.
    pub fn scaled(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.order);
        let mut m = self.clone();
        for i in 0..self.order {
            for j in i..self.order {
                m.set(i, j, self.get(i, j) * d[i] * d[j]);
            }
        }
        m
    }

    /// xᵀ M x.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.order {
            for j in 0..self.order {
                s += x[i] * self.get(i, j) * x[j];
            }
        }
        s
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn off_diagonal(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.order {
            for j in 0..self.order {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    }
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations,
/// sorted in descending order.
pub fn eigen_sym(m: &SymMatrix) -> Vec<f64> {
    let n = m.order;
    let mut a = m.clone();
    let norm = m.frobenius();
    for _sweep in 0..100 {
        if a.off_diagonal() <= 1e-15 * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                }
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Coefficients of a bivariate Gaussian information density
/// `ln p(u,y)/(p(u)p(y)) = c + a1·y² + a2·u² + a3·u·y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityCoefficients {
    pub constant: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl DensityCoefficients {
    pub fn from_moments(var_u: f64, var_y: f64, cov: f64) -> Self {
        let rho2 = cov * cov / (var_u * var_y);
        let k = 1.0 - 1.0 / (1.0 - rho2);
        Self {
            constant: -0.5 * (-rho2).ln_1p(),
            a1: k / (2.0 * var_y),
            a2: k / (2.0 * var_u),
            a3: cov / (var_u * var_y * (1.0 - rho2)),
        }
    }

    pub fn from_dpc(s: &DpcStats) -> Self {
        Self::from_moments(s.var_u1, s.var_y1, s.cov_u1y1)
    }

    pub fn eval(&self, u: f64, y: f64) -> f64 {
        self.constant + self.a1 * y * y + self.a2 * u * u + self.a3 * u * y
    }
}

/// A linear Gaussian model: independent coordinates ξ_i ~ N(0, std_i²) and
/// the pair u = ⟨u_row, ξ⟩, y = ⟨y_row, ξ⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub std: Vec<f64>,
    pub u_row: Vec<f64>,
    pub y_row: Vec<f64>,
}

impl LinearModel {
    /// Coefficient matrix D over ξ with a1·y² + a2·u² + a3·u·y = ξᵀ D ξ.
    pub fn density_matrix(&self, c: &DensityCoefficients) -> SymMatrix {
        let d = self.std.len();
        let mut m = SymMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let (ui, uj, yi, yj) = (self.u_row[i], self.u_row[j], self.y_row[i], self.y_row[j]);
                let v = c.a1 * yi * yj + c.a2 * ui * uj + 0.5 * c.a3 * (ui * yj + yi * uj);
                m.set(i, j, v);
            }
        }
        m
    }

    /// The same matrix in standardised coordinates, diag(std)·D·diag(std).
    pub fn scaled_density_matrix(&self, c: &DensityCoefficients) -> SymMatrix {
        self.density_matrix(c).scaled(&self.std)
    }
}

/// `offset + scale · Σ_t w_t χ²_{dof,t}` with independent central chi-squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadForm {
    pub weights: Vec<f64>,
    pub dof: usize,
    pub scale: f64,
    pub offset: f64,
}

impl QuadForm {
    pub fn new(weights: Vec<f64>, dof: usize, scale: f64, offset: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) || weights.iter().all(|&w| w == 0.0) {
            return domain("quadratic form needs finite weights, at least one nonzero");
        }
        if dof < 1 {
            return domain("degrees of freedom per weight must be at least 1");
        }
        if !(scale > 0.0 && scale.is_finite()) || !offset.is_finite() {
            return domain("scale must be positive and offset finite");
        }
        Ok(Self { weights, dof, scale, offset })
    }

    /// Form built from eigenvalues, dropping those below 1e−9 of the largest.
    pub fn from_eigenvalues(ev: &[f64], dof: usize, scale: f64, offset: f64) -> Result<Self> {
        let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let weights = ev.iter().copied().filter(|v| v.abs() >= 1e-9 * max).collect();
        Self::new(weights, dof, scale, offset)
    }

    pub fn mean(&self) -> f64 {
        self.offset + self.scale * self.dof as f64 * self.weights.iter().sum::<f64>()
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.dof as f64 * self.scale * self.scale * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// True when the weights are an exact ± pair.
    pub fn is_pm_pair(&self) -> bool {
        self.weights.len() == 2 && self.weights[0] == -self.weights[1]
    }

    /// The variance-gamma law of a ± pair form.
    pub fn vg_params(&self) -> Option<VgParams> {
        if !self.is_pm_pair() {
            return None;
        }
        let w = self.weights[0].abs() * self.scale;
        VgParams::symmetric(0.5 * self.dof as f64, 1.0 / (2.0 * w), self.offset).ok()
    }

    /// P[Q ≤ t]: variance-gamma law for a ± pair, Imhof inversion otherwise.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        match self.vg_params() {
            Some(p) => Ok(vg_ln_cdf(&p, t)?.exp()),
            None => self.imhof_cdf(t),
        }
    }

    /// ln P[Q ≤ t], with relative accuracy in the far tail.
    pub fn ln_cdf(&self, t: f64) -> Result<f64> {
        self.ln_tail(t, false)
    }

    /// ln P[Q > t], with relative accuracy in the far tail.
    pub fn ln_sf(&self, t: f64) -> Result<f64> {
        self.ln_tail(t, true)
    }

    fn ln_tail(&self, t: f64, upper: bool) -> Result<f64> {
        if t == f64::INFINITY {
            return Ok(if upper { f64::NEG_INFINITY } else { 0.0 });
        }
        if t == f64::NEG_INFINITY {
            return Ok(if upper { 0.0 } else { f64::NEG_INFINITY });
        }
        match self.weights.len() {
            1 | 2 => self.ln_tail_convolution(t, upper),
            _ => {
                if let Some(p) = self.vg_params() {
                    return if upper { vg_ln_sf(&p, t) } else { vg_ln_cdf(&p, t) };
                }
                let c = self.imhof_cdf(t)?;
                Ok(if upper { (1.0 - c).max(0.0).ln() } else { c.max(0.0).ln() })
            }
        }
    }

    /// Exact tails for one or two distinct weights: condition on one
    /// chi-square (written as u², u ≥ 0) and integrate the other's tail.
    fn ln_tail_convolution(&self, t: f64, upper: bool) -> Result<f64> {
        let k = self.dof as f64;
        let y = (t - self.offset) / self.scale;
        if self.weights.len() == 1 {
            let w = self.weights[0];
            let r = y / w;
            let below = w > 0.0; // event Q ≤ t is χ² ≤ r
            return if below != upper { chi2_ln_cdf(k, r) } else { chi2_ln_sf(k, r) };
        }
        // Integrate over the chi-square carrying the smaller weight.
        let (w1, w2) = if self.weights[0].abs() >= self.weights[1].abs() {
            (self.weights[0], self.weights[1])
        } else {
            (self.weights[1], self.weights[0])
        };
        // Event: w1·A ≤ y − w2·u² (lower) or w1·A > y − w2·u² (upper).
        // With r = (y − w2 u²)/w1 it is A ≤ r or A ≥ r depending on signs.
        let use_cdf = (w1 > 0.0) != upper;
        let ln_dens_const = std::f64::consts::LN_2 - 0.5 * k * std::f64::consts::LN_2 - ln_gamma(0.5 * k);
        let h = |u: f64| {
            let r = (y - w2 * u * u) / w1;
            let cond = if use_cdf { chi2_ln_cdf(k, r) } else { chi2_ln_sf(k, r) }.unwrap_or(f64::NAN);
            ln_dens_const + (k - 1.0) * u.ln() - 0.5 * u * u + cond
        };
        // Support of the conditional probability when it is a CDF: r > 0.
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        if use_cdf {
            let s1 = w1.signum();
            let (a, b) = (s1 * y, s1 * w2); // need a > b·u²
            if b > 0.0 {
                if a <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                hi = (a / b).sqrt();
            } else if a < 0.0 {
                lo = (a / b).sqrt();
            }
        }
        let scale = 1.0;
        let v = log_integrate(h, lo, hi, scale, "chi-squared convolution")?;
        Ok(v.min(0.0))
    }

    /// P[Q ≤ t] by Imhof's inversion of the characteristic function.
    pub fn imhof_cdf(&self, t: f64) -> Result<f64> {
        let lam: Vec<f64> = self.weights.iter().map(|w| w * self.scale).collect();
        let h = self.dof as f64;
        let x = t - self.offset;
        let theta = |u: f64| 0.5 * lam.iter().map(|l| h * (l * u).atan()).sum::<f64>() - 0.5 * x * u;
        let ln_rho = |u: f64| lam.iter().map(|l| 0.25 * h * (l * l * u * u).ln_1p()).sum::<f64>();
        let f = |u: f64| {
            if u == 0.0 {
                0.5 * lam.iter().map(|l| h * l).sum::<f64>() - 0.5 * x
            } else {
                theta(u).sin() / (u * ln_rho(u).exp())
            }
        };
        // Truncation: |∫_U^∞| ≤ 1 / (π k U^k Π|λ_j|^{h/2}), k = ½Σh.
        const TOL: f64 = 1e-10;
        let kk = 0.5 * h * lam.len() as f64;
        let ln_prod: f64 = lam.iter().map(|l| 0.5 * h * l.abs().ln()).sum();
        let ln_u = ((1.0 / (std::f64::consts::PI * kk * TOL)).ln() - ln_prod) / kk;
        let upper = ln_u.exp();
        // Trapezoid with halving, accelerated to Simpson.
        let mut n = 64usize;
        let mut hstep = upper / n as f64;
        let mut trap = 0.5 * (f(0.0) + f(upper)) * hstep + (1..n).map(|i| f(i as f64 * hstep)).sum::<f64>() * hstep;
        let mut simpson_prev = f64::NAN;
        loop {
            let mid: f64 = (0..n).map(|i| f((i as f64 + 0.5) * hstep)).sum::<f64>() * hstep;
            let trap2 = 0.5 * trap + 0.5 * mid;
            let simpson = (4.0 * trap2 - trap) / 3.0;
            n *= 2;
            hstep *= 0.5;
            trap = trap2;
            if (simpson - simpson_prev).abs() < 1e-11 {
                let c = 0.5 - simpson / std::f64::consts::PI;
                return Ok(c.clamp(0.0, 1.0));
            }
            simpson_prev = simpson;
            if n > 1 << 24 {
                return Err(Error::Convergence(format!(
                    "Imhof inversion at t={t}: no convergence with {n} nodes (last change {})",
                    (simpson - simpson_prev).abs()
                )));
            }
        }
    }
}

/// Which independence structure the user-1 confusion density uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfusionModel {
    /// The competing auxiliary codeword is independent of the output, as in
    /// the random-coding argument: Ū1 = C_l + b2·X̃2 with its own X̃2.
    #[default]
    Independent,
    /// The competing auxiliary shares the interference: Ū1 = C_l + b2·X2.
    SharedState,
}

fn user1_stats(cfg: &ValidatedConfig) -> Result<DpcStats> {
    dpc_statistics(cfg)
}

/// Coordinates (X1, X2, Z1) and the true pair (U1, Y1).
pub fn misdetect_model_u1(cfg: &ValidatedConfig) -> Result<LinearModel> {
    let s = user1_stats(cfg)?;
    Ok(LinearModel {
        std: vec![cfg.alpha_power.sqrt(), cfg.alpha_bar_power.sqrt(), cfg.spec.noise1.sqrt()],
        u_row: vec![1.0, s.b2, 0.0],
        y_row: vec![1.0, 1.0, 1.0],
    })
}

/// A_DP over (X1, X2, Z1), written out entry by entry.
pub fn a_dp(cfg: &ValidatedConfig) -> Result<SymMatrix> {
    let s = user1_stats(cfg)?;
    let c = DensityCoefficients::from_dpc(&s);
    Ok(a_dp_from(c.a1, c.a2, c.a3, s.b2))
}

/// The matrix with a1 and a2 in each other's places, kept for diagnostics.
pub fn swapped_a_dp(cfg: &ValidatedConfig) -> Result<SymMatrix> {
    let s = user1_stats(cfg)?;
    let c = DensityCoefficients::from_dpc(&s);
    Ok(a_dp_from(c.a2, c.a1, c.a3, s.b2))
}

fn a_dp_from(a1: f64, a2: f64, a3: f64, b2: f64) -> SymMatrix {
    let mut m = SymMatrix::zeros(3);
    m.set(0, 0, a1 + a2 + a3);
    m.set(0, 1, a1 + a2 * b2 + a3 * (1.0 + b2) / 2.0);
    m.set(0, 2, a1 + a3 / 2.0);
    m.set(1, 1, a1 + a2 * b2 * b2 + a3 * b2);
    m.set(1, 2, a1 + a3 * b2 / 2.0);
    m.set(2, 2, a1);
    m
}

/// diag(√αP, √ᾱP, √N1).
pub fn p1_dp(cfg: &ValidatedConfig) -> Vec<f64> {
    vec![cfg.alpha_power.sqrt(), cfg.alpha_bar_power.sqrt(), cfg.spec.noise1.sqrt()]
}

/// ½·αP(P+N1)/(N1² + 2αP·N1 + α·P²): the commonly quoted closed form for the
/// positive eigenvalue of P·A_DP·P. It equals ρ²/2.
pub fn reference_lambda_1dp(cfg: &ValidatedConfig) -> f64 {
    let (p, n1, ap) = (cfg.spec.power, cfg.spec.noise1, cfg.alpha_power);
    0.5 * ap * (p + n1) / (n1 * n1 + 2.0 * ap * n1 + cfg.alpha * p * p)
}

/// ρ/2, the positive eigenvalue of P·A_DP·P.
pub fn lambda_1dp(cfg: &ValidatedConfig) -> Result<f64> {
    Ok(0.5 * user1_stats(cfg)?.rho)
}

/// Splits eigenvalues into a symmetric ± pair, checking the structure.
fn pm_pair(ev: &[f64], what: &str) -> Result<f64> {
    let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let big: Vec<f64> = ev.iter().copied().filter(|v| v.abs() > 1e-9 * max).collect();
    if big.len() != 2 || big[0] <= 0.0 || big[1] >= 0.0 {
        return Err(Error::Consistency(format!("{what}: expected one ± eigenvalue pair, got {ev:?}")));
    }
    let (p, m) = (big[0], -big[1]);
    if (p - m).abs() > 1e-9 * p {
        return Err(Error::Consistency(format!("{what}: eigenvalues {p} and {} are not a ± pair", -m)));
    }
    Ok(0.5 * (p + m))
}

/// v_{1,DP} = (1/n)Σ quadratic form: user-1 misdetection dispersion term.
pub fn build_misdetect_form_u1(cfg: &ValidatedConfig) -> Result<QuadForm> {
    let m = a_dp(cfg)?.scaled(&p1_dp(cfg));
    let lam = pm_pair(&eigen_sym(&m), "user-1 misdetection form")?;
    let n = cfg.spec.n;
    QuadForm::new(vec![lam, -lam], n, 1.0 / n as f64, 0.0)
}

/// Linear model of (Ū1, Y1) for the user-1 confusion event.
pub fn confusion_model_u1(cfg: &ValidatedConfig, model: ConfusionModel) -> Result<LinearModel> {
    let s = user1_stats(cfg)?;
    let (sx2, sc, sz) = (cfg.alpha_bar_power.sqrt(), cfg.alpha_power.sqrt(), cfg.spec.noise1.sqrt());
    Ok(match model {
        // (X2, C_k, C_l, Z1)
        ConfusionModel::SharedState => LinearModel {
            std: vec![sx2, sc, sc, sz],
            u_row: vec![s.b2, 0.0, 1.0, 0.0],
            y_row: vec![1.0, 1.0, 0.0, 1.0],
        },
        // (X2, C_k, C_l, Z1, X̃2)
        ConfusionModel::Independent => LinearModel {
            std: vec![sx2, sc, sc, sz, sx2],
            u_row: vec![0.0, 0.0, 1.0, 0.0, s.b2],
            y_row: vec![1.0, 1.0, 0.0, 1.0, 0.0],
        },
    })
}

/// P_c·D_c·P_c for the chosen confusion model.
pub fn confusion_matrix_u1(cfg: &ValidatedConfig, model: ConfusionModel) -> Result<SymMatrix> {
    let c = DensityCoefficients::from_dpc(&user1_stats(cfg)?);
    Ok(confusion_model_u1(cfg, model)?.scaled_density_matrix(&c))
}

/// v_{c,DP}: user-1 confusion dispersion term.
pub fn build_confusion_form_u1(cfg: &ValidatedConfig, model: ConfusionModel) -> Result<QuadForm> {
    let m = confusion_matrix_u1(cfg, model)?;
    let n = cfg.spec.n;
    QuadForm::from_eigenvalues(&eigen_sym(&m), n, 1.0 / n as f64, 0.0)
}

/// (λ1, λc1, λc2) of the user-2 dispersion terms.
pub fn user2_lambdas(cfg: &ValidatedConfig) -> (f64, f64, f64) {
    let (p, n2, ap, abp) = (cfg.spec.power, cfg.spec.noise2, cfg.alpha_power, cfg.alpha_bar_power);
    let root = (abp * (p + n2)).sqrt();
    let l1 = abp.sqrt() / (2.0 * (p + n2).sqrt());
    let lc1 = -(abp + root) / (2.0 * (ap + n2));
    let lc2 = (-abp + root) / (2.0 * (ap + n2));
    (l1, lc1, lc2)
}

/// Coordinates (X2, X1, Z2) and the pair (U2, Y2) = (X2, X1 + X2 + Z2).
pub fn model_u2(cfg: &ValidatedConfig) -> LinearModel {
    LinearModel {
        std: vec![cfg.alpha_bar_power.sqrt(), cfg.alpha_power.sqrt(), cfg.spec.noise2.sqrt()],
        u_row: vec![1.0, 0.0, 0.0],
        y_row: vec![1.0, 1.0, 1.0],
    }
}

/// (v22, v_{c,2}): user-2 misdetection and confusion dispersion terms.
pub fn build_user2_forms(cfg: &ValidatedConfig) -> Result<(QuadForm, QuadForm)> {
    if cfg.alpha_bar_power <= 0.0 {
        return Err(Error::Degenerate("user 2 has no power (alpha = 1)".into()));
    }
    let (l1, lc1, lc2) = user2_lambdas(cfg);
    if !(lc1 <= 0.0 && lc2 >= 0.0) {
        return Err(Error::Consistency(format!("user-2 confusion weights ({lc1}, {lc2}) have unexpected signs")));
    }
    let n = cfg.spec.n;
    let scale = 1.0 / n as f64;
    Ok((QuadForm::new(vec![l1, -l1], n, scale, 0.0)?, QuadForm::new(vec![lc1, lc2], n, scale, 0.0)?))
}
