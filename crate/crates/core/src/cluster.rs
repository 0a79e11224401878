//! Leading-order cluster-expansion values with their error envelopes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ground_state_of, Triangle};
use crate::kernel::{build_kernel, zeta, Kernel};
use crate::params::{zeta_alpha, ModelParams};

/// How the half-width of an [`Envelope`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    /// `center * e^{-(beta/32)(zeta_a/(a(1-a)) - 3 delta)}`.
    Cluster32,
    /// `|center| * e^{-(beta/64)(zeta_a/(a(1-a)) - 3 delta)}`.
    Cluster64,
    /// Explicit `10 xi |Lambda|^(a-1) / (a(1-a))`.
    FiniteVolume,
    /// Built from other envelopes.
    Combined,
}

/// `center +- half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub center: f64,
    pub half_width: f64,
    pub kind: BoundKind,
    /// False when the cluster exponent is not positive or the half-width
    /// reaches the size of the center.
    pub informative: bool,
}

impl Envelope {
    pub fn new(center: f64, half_width: f64, kind: BoundKind) -> Self {
        assert!(half_width >= 0.0, "negative half-width");
        Envelope { center, half_width, kind, informative: half_width < center.abs() }
    }

    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    /// Whether `x` is within the envelope widened by `slack`.
    pub fn contains(&self, x: f64, slack: f64) -> bool {
        (x - self.center).abs() <= self.half_width + slack
    }

    pub fn widen(&self, slack: f64) -> Envelope {
        Envelope { half_width: self.half_width + slack.abs(), kind: BoundKind::Combined, ..*self }
    }

    pub fn add(&self, o: &Envelope) -> Envelope {
        Envelope {
            center: self.center + o.center,
            half_width: self.half_width + o.half_width,
            kind: BoundKind::Combined,
            informative: self.informative && o.informative,
        }
    }

    pub fn scale(&self, s: f64) -> Envelope {
        Envelope { center: self.center * s, half_width: self.half_width * s.abs(), kind: BoundKind::Combined, ..*self }
    }
}

/// `zeta_a / (a(1-a)) - 3 delta`; the cluster bounds are informative only when positive.
pub fn cluster_gap(params: &ModelParams) -> f64 {
    params.peierls_constant() - 3.0 * params.delta()
}

/// `e^{-(beta/denom)(zeta_a/(a(1-a)) - 3 delta)}`, unclamped.
pub fn cluster_factor(params: &ModelParams, denom: f64) -> f64 {
    (-(params.beta / denom) * cluster_gap(params)).exp()
}

fn flagged(mut e: Envelope, params: &ModelParams) -> Envelope {
    e.informative &= cluster_gap(params) > 0.0;
    e
}

/// Unit-triangle activity `e^{-2 beta (zeta(2 - alpha) + J)}`.
pub fn xi_unit(params: &ModelParams) -> f64 {
    (-2.0 * params.beta * (zeta(2.0 - params.alpha) + params.j)).exp()
}

/// Finite-size term `10 xi |Lambda|^(alpha - 1) / (alpha (1 - alpha))`.
pub fn finite_volume_slack(params: &ModelParams) -> f64 {
    let a = params.alpha;
    10.0 * xi_unit(params) * (params.volume() as f64).powf(a - 1.0) / (a * (1.0 - a))
}

/// Spontaneous magnetization to leading order: `1 - 2 xi`.
pub fn m_beta_leading(params: &ModelParams) -> Envelope {
    let xi = xi_unit(params);
    flagged(Envelope::new(1.0 - 2.0 * xi, 2.0 * xi * cluster_factor(params, 32.0), BoundKind::Cluster32), params)
}

/// Conditional magnetization given one droplet of fraction `rho`:
/// `(1 - 2 rho)(1 - 2 xi)` with the finite-size half-width.
pub fn conditional_m_leading(rho: f64, params: &ModelParams) -> Result<Envelope> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter { name: "rho", reason: format!("{rho} not in [0, 1]") });
    }
    let xi = xi_unit(params);
    let mut e =
        Envelope::new((1.0 - 2.0 * rho) * (1.0 - 2.0 * xi), finite_volume_slack(params), BoundKind::FiniteVolume);
    e.informative = e.half_width < 1.0;
    Ok(e)
}

/// `sum_{y in union of bases, y != x} J(x - y)`.
fn droplet_sum(x: i64, externals: &[Triangle], k: &Kernel) -> f64 {
    let cum = |n: i64| if n <= 0 { 0.0 } else { k.cumulative(n as usize) };
    let mut s = 0.0;
    for t in externals {
        let (lo, hi) = t.base();
        s += if x < lo {
            cum(hi - x) - cum(lo - x - 1)
        } else if x > hi {
            cum(x - lo) - cum(x - hi - 1)
        } else {
            cum(x - lo) + cum(hi - x)
        };
    }
    s
}

/// Flip activity `xi^{sigma-bar}(x) = e^{-beta [h(flip x in sigma-bar) - h(sigma-bar)]}` in the
/// ground state of `externals`, in closed form.
///
/// Inside a base this is `xi * e^{2 beta sum_{y outside} J(x-y)}`, outside it is
/// `xi * e^{2 beta sum_{y inside} J(x-y)}`; the tail beyond the window is included.
pub fn xi_site(x: i64, externals: &[Triangle], params: &ModelParams) -> Result<f64> {
    let k = build_kernel(params)?;
    xi_site_with(x, externals, params, &k)
}

fn xi_site_with(x: i64, externals: &[Triangle], params: &ModelParams, k: &Kernel) -> Result<f64> {
    let l = params.l as i64;
    if x < -l || x > l {
        return Err(Error::SiteOutOfRange { site: x as isize, l: params.l });
    }
    ground_state_of(externals, params.l)?;
    if let Some(t) = externals.iter().find(|t| t.in_sf(x)) {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: format!("site {x} lies on the frame of {}:{}", t.i, t.j),
        });
    }
    let inside = externals.iter().any(|t| t.base_contains_site(x));
    let sigma = if inside { -1.0 } else { 1.0 };
    let total = k.total_coupling();
    let s_in = droplet_sum(x, externals, k);
    Ok((-params.beta * sigma * (total - 2.0 * s_in)).exp())
}

/// Leading order `log Z` in two conventions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogZLeading {
    /// `sum_x` of the finite-volume flip activities of the all-plus state.
    pub finite_volume: Envelope,
    /// `|Lambda| xi`.
    pub uniform: Envelope,
}

/// `log Z` to leading order: the sum over sites of unit-triangle activities.
pub fn logz_leading(params: &ModelParams) -> Result<LogZLeading> {
    let k = build_kernel(params)?;
    let l = params.l as i64;
    let fv: f64 = (-l..=l).map(|x| xi_site_with(x, &[], params, &k)).sum::<Result<f64>>()?;
    let un = params.volume() as f64 * xi_unit(params);
    let f = cluster_factor(params, 32.0);
    Ok(LogZLeading {
        finite_volume: flagged(Envelope::new(fv, fv * f, BoundKind::Cluster32), params),
        uniform: flagged(Envelope::new(un, un * f, BoundKind::Cluster32), params),
    })
}

/// Leading-order truncated correlation of `sigma_i`, `sigma_j` given the class of
/// `externals`, under the tilt `e^{beta r sum sigma}`:
/// `xi(i) xi(j) e^{-2 beta r (s_i + s_j)} 4 s_i s_j (e^{2 beta s_i s_j J(i-j)} - 1)`.
///
/// Zero when either site is on the frame of an external triangle.
pub fn two_point_leading(
    i: i64,
    j: i64,
    externals: &[Triangle],
    field_r: f64,
    params: &ModelParams,
) -> Result<Envelope> {
    if i.abs_diff(j) < 2 {
        return Err(Error::InvalidParameter { name: "j", reason: format!("|i - j| = {} < 2", i.abs_diff(j)) });
    }
    let k = build_kernel(params)?;
    ground_state_of(externals, params.l)?;
    if externals.iter().any(|t| t.in_sf(i) || t.in_sf(j)) {
        return Ok(Envelope::new(0.0, 0.0, BoundKind::Cluster64));
    }
    let sign = |x: i64| if externals.iter().any(|t| t.base_contains_site(x)) { -1.0 } else { 1.0 };
    let (si, sj) = (sign(i), sign(j));
    let b = params.beta;
    let act = xi_site_with(i, externals, params, &k)? * xi_site_with(j, externals, params, &k)?;
    let tilt = (-2.0 * b * field_r * (si + sj)).exp();
    let center = act * tilt * 4.0 * si * sj * ((2.0 * b * si * sj * k.coupling(i - j)).exp() - 1.0);
    Ok(flagged(Envelope::new(center, center.abs() * cluster_factor(params, 64.0), BoundKind::Cluster64), params))
}

/// `(exact, formula)` for the pair-energy excess of flipping `i` and `j` together
/// in the ground state of `externals`: the exact value from cached fields, the
/// formula `-2 s_i s_j J(i - j)`.
pub fn pair_excess(i: i64, j: i64, externals: &[Triangle], params: &ModelParams) -> Result<(f64, f64)> {
    let k = std::sync::Arc::new(build_kernel(params)?);
    let s = ground_state_of(externals, params.l)?;
    let cfg = crate::spins::SpinConfig::from_spins(s, k.clone())?;
    let l = params.l as i64;
    let (a, b) = ((i + l) as usize, (j + l) as usize);
    let exact = cfg.pair_delta_at(a, b) - cfg.delta_at(a) - cfg.delta_at(b);
    let formula = -2.0 * cfg.at(a) as f64 * cfg.at(b) as f64 * k.coupling(i - j);
    Ok((exact, formula))
}

/// Which admissible field range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FieldKind {
    /// Very-small classes: `zeta_a / (4 a (1-a) (eps_s |Lambda|)^(1-a))`.
    VerySmall,
    /// One droplet of fraction `rho`: `zeta_a 3^(1-a) / (4 a (1-a) (rho |Lambda|)^(1-a))`.
    SingleDroplet { rho: f64 },
}

pub fn field_threshold(kind: FieldKind, params: &ModelParams) -> f64 {
    let a = params.alpha;
    let pre = zeta_alpha(a) / (4.0 * a * (1.0 - a));
    match kind {
        FieldKind::VerySmall => pre / params.eps_s_abs().powf(1.0 - a),
        FieldKind::SingleDroplet { rho } => pre * 3f64.powf(1.0 - a) / (rho * params.volume() as f64).powf(1.0 - a),
    }
}
