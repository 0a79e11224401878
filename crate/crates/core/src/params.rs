use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Upper end of the admissible decay range, `log 3 / log 2 - 1`.
pub fn alpha_plus() -> f64 {
    3f64.ln() / 2f64.ln() - 1.0
}

/// `1 - 2 (2^alpha - 1)`; positive exactly when `alpha < alpha_plus()`.
pub fn zeta_alpha(alpha: f64) -> f64 {
    1.0 - 2.0 * (2f64.powf(alpha) - 1.0)
}

/// Smallest contour separation constant, `8 zeta(2) = 4 pi^2 / 3`.
pub fn min_separation_constant() -> f64 {
    4.0 * PI * PI / 3.0
}

/// Default contour separation constant: first integer above `4 pi^2 / 3`.
pub const DEFAULT_C: f64 = 14.0;

/// Default nearest-neighbour enhancement.
pub const DEFAULT_J: f64 = 10.0;

/// Scalar parameters of the model and of the conditioned-ensemble thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    /// Nearest-neighbour enhancement: the coupling at distance one is `j + 1`.
    pub j: f64,
    pub beta: f64,
    /// Half-width of the window `[-l, l]`.
    pub l: usize,
    /// Contour separation constant.
    pub c: f64,
    /// Exponent of `eps0 = |Lambda|^-a`.
    pub a: f64,
    /// Exponent of `eps_s = |Lambda|^-gamma`.
    pub gamma: f64,
    /// Exponent of `eps_c = |Lambda|^-nu`.
    pub nu: f64,
}

impl ModelParams {
    /// Parameters with `C = 14` and the exponent choice
    /// `nu = alpha(1-alpha)/4`, `gamma = alpha/4`, `a = alpha(1-alpha)/2`.
    pub fn new(alpha: f64, j: f64, beta: f64, l: usize) -> Result<Self> {
        let p = ModelParams {
            alpha,
            j,
            beta,
            l,
            c: DEFAULT_C,
            a: alpha * (1.0 - alpha) / 2.0,
            gamma: alpha / 4.0,
            nu: alpha * (1.0 - alpha) / 4.0,
        };
        p.check()?;
        Ok(p)
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        self.c = c;
        self.check()?;
        Ok(self)
    }

    pub fn with_exponents(mut self, a: f64, gamma: f64, nu: f64) -> Result<Self> {
        self.a = a;
        self.gamma = gamma;
        self.nu = nu;
        self.check()?;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = beta;
        self.check()?;
        Ok(self)
    }

    pub fn with_j(mut self, j: f64) -> Result<Self> {
        self.j = j;
        self.check()?;
        Ok(self)
    }

    pub fn with_l(mut self, l: usize) -> Result<Self> {
        self.l = l;
        self.check()?;
        Ok(self)
    }

    /// Construction-time invariants. The exponent system is checked separately
    /// by [`validate_exponents`].
    pub fn check(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.alpha > 0.0 && self.alpha < alpha_plus()) {
            return bad("alpha", format!("{} not in (0, {:.7})", self.alpha, alpha_plus()));
        }
        if !(self.j >= 0.0 && self.j.is_finite()) {
            return bad("J", format!("{} must be a finite value >= 0", self.j));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta", format!("{} must be a finite value >= 0", self.beta));
        }
        if self.l == 0 {
            return bad("L", "half-width must be positive".into());
        }
        if !(self.c >= min_separation_constant()) {
            return bad("C", format!("{} below 4 pi^2 / 3 = {:.6}", self.c, min_separation_constant()));
        }
        for (name, v) in [("a", self.a), ("gamma", self.gamma), ("nu", self.nu)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(name, format!("{v} not in (0, 1)"));
            }
        }
        Ok(())
    }

    /// `|Lambda| = 2L + 1`.
    pub fn volume(&self) -> usize {
        2 * self.l + 1
    }

    pub fn zeta_alpha(&self) -> f64 {
        zeta_alpha(self.alpha)
    }

    /// `zeta_alpha / (alpha (1 - alpha))`, the recurring Peierls constant.
    pub fn peierls_constant(&self) -> f64 {
        self.zeta_alpha() / (self.alpha * (1.0 - self.alpha))
    }

    pub fn eps0(&self) -> f64 {
        (self.volume() as f64).powf(-self.a)
    }

    pub fn eps_s(&self) -> f64 {
        (self.volume() as f64).powf(-self.gamma)
    }

    pub fn eps_c(&self) -> f64 {
        (self.volume() as f64).powf(-self.nu)
    }

    /// `eps_s |Lambda|`: triangles strictly heavier than this are "large".
    pub fn eps_s_abs(&self) -> f64 {
        self.eps_s() * self.volume() as f64
    }

    /// `c10(alpha) = 2 pi^2 / (3 alpha (1 - alpha))`.
    pub fn c10(&self) -> f64 {
        2.0 * PI * PI / (3.0 * self.alpha * (1.0 - self.alpha))
    }

    /// `delta = c10(alpha) / C`.
    pub fn delta(&self) -> f64 {
        2.0 * PI * PI / (3.0 * self.alpha * (1.0 - self.alpha) * self.c)
    }
}

/// One inequality of the exponent system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub pass: bool,
    /// `lhs == rhs` up to rounding; a strict inequality fails there.
    pub on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub checks: Vec<ExponentCheck>,
    /// Admissible interval for the auxiliary exponent eta, when nonempty.
    pub eta_range: Option<(f64, f64)>,
}

impl ExponentReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.eta_range.is_some()
    }

    pub fn get(&self, name: &str) -> Option<&ExponentCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect()
    }
}

fn less(name: &'static str, lhs: f64, rhs: f64, strict: bool) -> ExponentCheck {
    let tol = 1e-12 * lhs.abs().max(rhs.abs()).max(1.0);
    let on_boundary = (lhs - rhs).abs() <= tol;
    let pass = if strict { lhs < rhs && !on_boundary } else { lhs <= rhs || on_boundary };
    ExponentCheck { name, lhs, rhs, strict, pass, on_boundary }
}

/// Report on the exponent system relating `a`, `gamma`, `nu` and `alpha`.
pub fn validate_exponents(p: &ModelParams) -> ExponentReport {
    let (al, g, nu, a) = (p.alpha, p.gamma, p.nu, p.a);
    let eta_lo = (g + nu * al) / (1.0 - al);
    let eta_hi = (1.0 - nu) * al;
    let checks = vec![
        less("gamma > 0", 0.0, g, true),
        less("gamma < alpha - nu", g, al - nu, true),
        less("gamma < 2/3", g, 2.0 / 3.0, true),
        less("(gamma + nu alpha)/(1 - alpha) <= (1 - nu) alpha", eta_lo, eta_hi, false),
        less("nu < a", nu, a, true),
        less("nu < gamma (1 - alpha)", nu, g * (1.0 - al), true),
    ];
    let eta_range = (eta_lo <= eta_hi).then_some((eta_lo, eta_hi));
    ExponentReport { checks, eta_range }
}
