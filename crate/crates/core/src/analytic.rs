//! Semi-analytic average rates.
//!
//! Every rate is an instance of `E[ln(1 + X/(Y+1))] = ∫ M_Y (1 − M_X) e^{−z}/z dz`
//! (see [`hamdi_rate`]) with an MGF pair assembled from the geometry and fading laws.
//! Closed forms (exponential-integral sums, alternating series, Meijer G) are kept as
//! independent cross-checks of the integral forms.

use std::f64::consts::PI;

use thiserror::Error;

use crate::config::{NormalizedParams, PowerSplit};
use crate::geometry::{nearest_distance_pdf_cond, pair_distance_pdf};
use crate::quadrature::{
    hamdi_rate, integrate_adaptive, integrate_semi_infinite_scaled, Integral, MgfFn, QuadError,
};
use crate::specfun::{
    exp_integral_en_scaled, gamma, ln_gamma, ln_gamma_unchecked, meijer_g, scaled_upper_gamma,
    MeijerGSpec, SpecFunError,
};

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    SpecialFunction(#[from] SpecFunError),
    #[error("{0}")]
    Domain(String),
    #[error("series cannot be summed in double precision: {terms} terms, largest {max_term:e}")]
    SeriesDivergence { terms: usize, max_term: f64 },
    #[error("closed form has coincident poles")]
    PoleCoincidence,
    #[error("Poisson window exceeded {0} terms")]
    Truncation(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    IntegralForm,
    Series,
    ClosedForm,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::IntegralForm => "integral-form",
            Method::Series => "series",
            Method::ClosedForm => "closed-form",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Error estimate of the outermost quadrature.
    pub quad_error: f64,
    /// Range `[lo, hi]` of RRH counts kept in a Poisson average.
    pub poisson_window: Option<(u64, u64)>,
    pub series_terms: Option<usize>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticResult {
    pub value: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl AnalyticResult {
    fn integral(q: Integral) -> Self {
        Self {
            value: q.value.max(0.0),
            method: Method::IntegralForm,
            diagnostics: Diagnostics {
                quad_error: q.error,
                ..Diagnostics::default()
            },
        }
    }

    fn with_window(mut self, window: &PoissonWindow) -> Self {
        self.diagnostics.poisson_window = Some((window.lo, window.hi()));
        self
    }
}

/// Value of an inner quadrature, or NaN so the failure surfaces in the outer integral
/// at the offending abscissa.
fn inner_value(q: Result<Integral, QuadError>, tol: f64) -> f64 {
    match q {
        Ok(i) => i.value,
        Err(QuadError::NoConvergence { estimate, error }) if error <= 1e3 * tol * estimate.abs() => {
            estimate
        }
        Err(_) => f64::NAN,
    }
}

/// `∫ₐᵇ f` split at the given interior points.
fn integrate_pieces<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<Integral, QuadError> {
    let mut edges = vec![a];
    let mut interior: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    interior.sort_by(f64::total_cmp);
    edges.extend(interior);
    edges.push(b);
    let mut total = Integral {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for w in edges.windows(2) {
        if w[1] > w[0] {
            let part = integrate_adaptive(f, w[0], w[1], tol, 1e-300)?;
            total.value += part.value;
            total.error += part.error;
            total.evaluations += part.evaluations;
        }
    }
    Ok(total)
}

/// `1 − (1+x)^{−k}` without cancellation.
fn one_minus_pow(x: f64, k: f64) -> f64 {
    if x.is_infinite() {
        return 1.0;
    }
    -(-k * x.ln_1p()).exp_m1()
}

/// Poisson weights `P(N)` for `N = lo..=hi`, `N ≥ 1`, covering all but `tail` of the mass
/// once `P(0)` is counted.
#[derive(Debug, Clone)]
pub struct PoissonWindow {
    pub lo: u64,
    pub weights: Vec<f64>,
}

const MAX_WINDOW: usize = 5_000_000;

impl PoissonWindow {
    pub fn new(mu: f64, tail: f64) -> Result<Self, AnalyticError> {
        let pmf = |n: u64| {
            if mu == 0.0 {
                return 0.0;
            }
            (n as f64 * mu.ln() - mu - ln_gamma_unchecked(n as f64 + 1.0)).exp()
        };
        let mode = (mu.floor() as u64).max(1);
        let mut lo = mode;
        let mut hi = mode;
        let mut left = Vec::new();
        let mut right = vec![pmf(mode)];
        let mut covered = (-mu).exp() + right[0];
        while 1.0 - covered > tail {
            let next_left = if lo > 1 { pmf(lo - 1) } else { 0.0 };
            let next_right = pmf(hi + 1);
            if lo > 1 && next_left >= next_right {
                lo -= 1;
                left.push(next_left);
                covered += next_left;
            } else {
                hi += 1;
                right.push(next_right);
                covered += next_right;
            }
            if left.len() + right.len() > MAX_WINDOW {
                return Err(AnalyticError::Truncation(MAX_WINDOW));
            }
            if next_left == 0.0 && next_right == 0.0 && hi as f64 > mu + 50.0 {
                break;
            }
        }
        left.reverse();
        left.extend(right);
        Ok(Self { lo, weights: left })
    }

    pub fn hi(&self) -> u64 {
        self.lo + self.weights.len() as u64 - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.lo + i as u64, w))
    }
}

/// `M_Y(s) = 1/(1 + P_u σ²_LI s)`.
pub fn mgf_li(params: &NormalizedParams) -> MgfFn {
    let b = params.li_power();
    MgfFn::with_complement(move |s| 1.0 / (1.0 + b * s), move |s| b * s / (1.0 + b * s))
}

/// Law of one DL RRH uniform in the disc with Gamma(M,1) fading under non-singular path loss.
#[derive(Debug, Clone, Copy)]
struct DiscPoint {
    radius: f64,
    epsilon: f64,
    alpha: f64,
    m: f64,
    tol: f64,
}

impl DiscPoint {
    fn new(params: &NormalizedParams, tol: f64) -> Self {
        Self {
            radius: params.radius,
            epsilon: params.epsilon,
            alpha: params.alpha.value,
            m: params.m_antennas as f64,
            tol,
        }
    }

    /// `1 − E[(1 + s·ℓ(r))^{−M}]` with `u = (r/R)²` uniform on `[0, 1]`.
    fn complement(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let f = |u: f64| {
            let r = self.radius * u.sqrt();
            one_minus_pow(s / (self.epsilon + r.powf(self.alpha)), self.m)
        };
        // the integrand turns over where s·ℓ(r) = 1
        let mut breaks = Vec::new();
        if s > self.epsilon {
            let r_t = (s - self.epsilon).powf(1.0 / self.alpha);
            breaks.push((r_t / self.radius).powi(2));
        }
        inner_value(integrate_pieces(&f, 0.0, 1.0, &breaks, self.tol), self.tol)
    }
}

/// Per-point MGF `M_{X_ℓ}(s) = E_r[(1 + s/(ε + r^α))^{−M}]` for `r` the distance of a
/// uniform point in the disc.
pub fn mgf_per_point_dl(params: &NormalizedParams) -> MgfFn {
    let point = DiscPoint::new(params, 1e-10);
    MgfFn::with_complement(move |s| 1.0 - point.complement(s), move |s| point.complement(s))
}

fn require_per_rrh_power(params: &NormalizedParams) -> Result<(), AnalyticError> {
    if params.ara_power_split == PowerSplit::Total {
        return Err(AnalyticError::Domain(
            "the analytic ARA rate assumes per-RRH DL power".into(),
        ));
    }
    Ok(())
}

/// ARA DL rate in the finite disc: `Σ_N P(N)·E[ln(1 + X_N/(Y+1))]` where `X_N` sums `N`
/// i.i.d. per-point terms. The Poisson average is taken inside the integrand, where
/// `1 − M_X = 1 − m^N`.
pub fn dl_rate_ara_exact(params: &NormalizedParams, tol: f64) -> Result<AnalyticResult, AnalyticError> {
    require_per_rrh_power(params)?;
    let window = PoissonWindow::new(params.mu_dl(), tol / 10.0)?;
    let point = DiscPoint::new(params, tol / 10.0);
    let p_b = params.p_b;
    let w = window.clone();
    let complement = move |z: f64| {
        let c = point.complement(p_b * z);
        let log_m = (-c).ln_1p();
        w.iter().map(|(n, p)| p * -(n as f64 * log_m).exp_m1()).sum::<f64>()
    };
    let c2 = complement.clone();
    let mx = MgfFn::with_complement(move |z| 1.0 - c2(z), complement);
    let q = hamdi_rate(&mx, &mgf_li(params), tol)?;
    Ok(AnalyticResult::integral(q).with_window(&window))
}

/// `∫₀^∞ (1 − (1 + s/(ε + x^α))^{−M}) x dx`.
fn pgfl_radial(s: f64, epsilon: f64, alpha: f64, m: f64, tol: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let f = |x: f64| one_minus_pow(s / (epsilon + x.powf(alpha)), m) * x;
    let scale = s.powf(1.0 / alpha).max(1e-6);
    inner_value(integrate_semi_infinite_scaled(f, scale, tol), tol)
}

/// Upper bound on the ARA DL rate from letting the disc grow to the whole plane. The PGFL
/// exponent is `2πpλ ∫ (1 − (1 + zP_b/(ε+x^α))^{−M}) x dx`.
pub fn dl_rate_ara_upper(params: &NormalizedParams, tol: f64) -> Result<AnalyticResult, AnalyticError> {
    require_per_rrh_power(params)?;
    let coeff = 2.0 * PI * params.p_dl * params.lambda;
    let (eps, alpha, m, p_b) = (
        params.epsilon,
        params.alpha.value,
        params.m_antennas as f64,
        params.p_b,
    );
    let inner_tol = tol / 10.0;
    let complement = move |z: f64| -(-coeff * pgfl_radial(p_b * z, eps, alpha, m, inner_tol)).exp_m1();
    let mx = MgfFn::with_complement(move |z| 1.0 - complement(z), complement);
    Ok(AnalyticResult::integral(hamdi_rate(&mx, &mgf_li(params), tol)?))
}

/// `G_α = δπλ_eff·Γ(M+δ)Γ(−δ)/Γ(M)`, negative for `0 < δ < 1`. With singular path loss,
/// the aggregate received power from a PPP of intensity `density` has MGF
/// `exp(G_α (sP)^δ)`.
pub fn g_alpha(delta: f64, density: f64, m: u32) -> Result<f64, AnalyticError> {
    let m = m as f64;
    Ok(delta * PI * density * gamma(m + delta)? * gamma(-delta)? / gamma(m)?)
}

/// Singular-path-loss ARA rate `∫ (1 − exp(G (zP)^δ)) e^{−z}/(z(1 + c z)) dz` for
/// transmit power `p_tx`, intensity `density`, and mean LI power `li_power = c`.
pub fn ara_singular_integral(
    p_tx: f64,
    density: f64,
    m: u32,
    delta: f64,
    li_power: f64,
    tol: f64,
) -> Result<AnalyticResult, AnalyticError> {
    let g = g_alpha(delta, density, m)?;
    let complement = move |z: f64| -(g * (z * p_tx).powf(delta)).exp_m1();
    let mx = MgfFn::with_complement(move |z| 1.0 - complement(z), complement);
    let my = MgfFn::with_complement(
        move |s| 1.0 / (1.0 + li_power * s),
        move |s| li_power * s / (1.0 + li_power * s),
    );
    Ok(AnalyticResult::integral(hamdi_rate(&mx, &my, tol)?))
}

/// `I_k = ∫₀^∞ z^{a−1} e^{−z}/(1 + c z) dz` with `a = δk`.
fn series_moment_ln(a: f64, c: f64) -> Result<f64, AnalyticError> {
    let lg = ln_gamma(a)?;
    if c == 0.0 {
        return Ok(lg);
    }
    let tail = scaled_upper_gamma(1.0 - a, 1.0 / c)?;
    Ok(lg - a * c.ln() + tail.ln())
}

/// Alternating-series evaluation of [`ara_singular_integral`]:
/// `−Σ_{k≥1} (G P^δ)^k/k! · I_k`.
///
/// For `0 < δ < 1` the series converges for every argument, but its terms peak near
/// `k ≈ (|G P^δ| δ^δ)^{1/(1−δ)}` before decaying. Fails with
/// [`AnalyticError::SeriesDivergence`] when terms are still growing past k = 60, or when
/// the accumulated rounding error of the terms exceeds `tol` relative to the sum. At
/// macro-cell powers the second test fires long before the peak.
pub fn ara_singular_series(
    p_tx: f64,
    density: f64,
    m: u32,
    delta: f64,
    li_power: f64,
    tol: f64,
) -> Result<AnalyticResult, AnalyticError> {
    let g = g_alpha(delta, density, m)?;
    let x = g * p_tx.powf(delta);
    if x == 0.0 {
        return Ok(AnalyticResult {
            value: 0.0,
            method: Method::Series,
            diagnostics: Diagnostics {
                series_terms: Some(0),
                ..Diagnostics::default()
            },
        });
    }
    let ln_x = x.abs().ln();
    // each term is exp of a sum of logarithms, so its relative error scales with their size
    let mut rounding = 0.0;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut small_run = 0;
    let mut max_term: f64 = 0.0;
    let mut prev_mag = f64::INFINITY;
    for k in 1..=2000usize {
        let kf = k as f64;
        let (lx, lf, li) = (kf * ln_x, ln_gamma_unchecked(kf + 1.0), series_moment_ln(delta * kf, li_power)?);
        let ln_mag = lx - lf + li;
        let mag = ln_mag.exp();
        let sign = if x < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        let term = -sign * mag;
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        max_term = max_term.max(mag);
        rounding += 4.0 * f64::EPSILON * mag * (lx.abs() + lf + li.abs() + 1.0);
        // no rate of interest is anywhere near 1e3 nats
        let growing = k > 60 && mag > prev_mag;
        if growing || !mag.is_finite() || rounding > 1e3 * tol {
            return Err(AnalyticError::SeriesDivergence { terms: k, max_term });
        }
        prev_mag = mag;
        if mag < tol * sum.abs() {
            small_run += 1;
            if small_run == 3 {
                if rounding > tol * sum.abs() {
                    return Err(AnalyticError::SeriesDivergence { terms: k, max_term });
                }
                return Ok(AnalyticResult {
                    value: sum,
                    method: Method::Series,
                    diagnostics: Diagnostics {
                        series_terms: Some(k),
                        ..Diagnostics::default()
                    },
                });
            }
        } else {
            small_run = 0;
        }
    }
    Err(AnalyticError::SeriesDivergence {
        terms: 2000,
        max_term,
    })
}

/// ARA DL rate bound under singular path loss (`ε` treated as 0, disc grown to the plane).
/// The returned value is the integral form. The series is attempted as well and its
/// outcome recorded in the diagnostics.
pub fn dl_rate_ara_singular(params: &NormalizedParams, tol: f64) -> Result<AnalyticResult, AnalyticError> {
    require_per_rrh_power(params)?;
    let density = params.p_dl * params.lambda;
    let (m, delta, li) = (params.m_antennas, params.delta(), params.li_power());
    let mut res = ara_singular_integral(params.p_b, density, m, delta, li, tol)?;
    let note = match ara_singular_series(params.p_b, density, m, delta, li, tol) {
        Ok(s) => {
            res.diagnostics.series_terms = s.diagnostics.series_terms;
            format!("series value {:.10e}", s.value)
        }
        Err(e) => format!("series unavailable: {e}"),
    };
    res.diagnostics.notes.push(note);
    Ok(res)
}

/// Poisson-averaged density of the nearest DL RRH distance, `Σ_N P(N) f(r | N)`.
fn nearest_weight(window: &PoissonWindow, r: f64, radius: f64) -> f64 {
    window
        .iter()
        .map(|(n, p)| p * nearest_distance_pdf_cond(r, n as u32, radius))
        .sum()
}

/// Breakpoints around the bulk of the nearest-RRH distance law in the disc.
fn nearest_breaks(mu: f64, radius: f64) -> Vec<f64> {
    if mu <= 0.0 {
        return Vec::new();
    }
    let mode = radius / (2.0 * mu).sqrt().max(1.0);
    [0.25, 1.0, 3.0, 8.0].iter().map(|k| k * mode).collect()
}

/// SRA DL rate: the nearest DL RRH at distance `r` gives `X = P_b ℓ(r)·Gamma(M, 1)`;
/// the rate is the Poisson-weighted average over `r` of the conditional rate.
pub fn dl_rate_sra(params: &NormalizedParams, tol: f64) -> Result<AnalyticResult, AnalyticError> {
    sra_dl_with(params, tol, |a, b, m, inner_tol| {
        let my = MgfFn::with_complement(move |s| 1.0 / (1.0 + b * s), move |s| b * s / (1.0 + b * s));
        inner_value(hamdi_rate(&MgfFn::gamma(m as f64, a), &my, inner_tol), inner_tol)
    })
}

/// [`dl_rate_sra`] with the conditional rate taken from its exponential-integral closed
/// form (falling back to quadrature where the closed form has coincident poles).
pub fn dl_rate_sra_closed_form(params: &NormalizedParams, tol: f64) -> Result<AnalyticResult, AnalyticError> {
    let mut res = sra_dl_with(params, tol, |a, b, m, inner_tol| match sra_conditional_closed_form(a, b, m) {
        Ok(v) => v,
        Err(_) => {
            let my = MgfFn::with_complement(move |s| 1.0 / (1.0 + b * s), move |s| b * s / (1.0 + b * s));
            inner_value(hamdi_rate(&MgfFn::gamma(m as f64, a), &my, inner_tol), inner_tol)
        }
    })?;
    res.method = Method::ClosedForm;
    Ok(res)
}

fn sra_dl_with(
    params: &NormalizedParams,
    tol: f64,
    conditional: impl Fn(f64, f64, u32, f64) -> f64,
) -> Result<AnalyticResult, AnalyticError> {
    let mu = params.mu_dl();
    let window = PoissonWindow::new(mu, tol / 10.0)?;
    let b = params.li_power();
    let inner_tol = tol / 10.0;
    let f = |r: f64| {
        let w = nearest_weight(&window, r, params.radius);
        if w == 0.0 {
            return 0.0;
        }
        let a = params.p_b / (params.epsilon + r.powf(params.alpha.value));
        w * conditional(a, b, params.m_antennas, inner_tol)
    };
    let q = integrate_pieces(&f, 0.0, params.radius, &nearest_breaks(mu, params.radius), tol)?;
    Ok(AnalyticResult::integral(q).with_window(&window))
}

/// `e^{1/a} Σ_{j=1}^{k} E_j(1/a) = E[ln(1 + a·Gamma(k, 1))]`.
fn gamma_log_moment(k: u32, a: f64) -> Result<f64, AnalyticError> {
    if a == 0.0 {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for j in 1..=k {
        s += exp_integral_en_scaled(j, 1.0 / a)?;
    }
    Ok(s)
}

/// `E[ln(1 + X/(Y+1))]` for `X ~ a·Gamma(M,1)` and `Y ~ b·Exp(1)` by partial fractions:
/// `Σ_k c_k e^{1/a}Σ_{j≤k}E_j(1/a) + ((1 − a/b)^{−M} − 1)·e^{1/b}E_1(1/b)` with
/// `c_k = a/(a−b)·(−b/(a−b))^{M−k}`.
pub fn sra_conditional_closed_form(a: f64, b: f64, m: u32) -> Result<f64, AnalyticError> {
    if b == 0.0 {
        return gamma_log_moment(m, a);
    }
    if (a - b).abs() <= 1e-6 * a.max(b) {
        return Err(AnalyticError::PoleCoincidence);
    }
    let ratio = -b / (a - b);
    let lead = a / (a - b);
    let mut total = 0.0;
    for k in 1..=m {
        total += lead * ratio.powi((m - k) as i32) * gamma_log_moment(k, a)?;
    }
    let d = (1.0 - a / b).powi(-(m as i32));
    total += (d - 1.0) * gamma_log_moment(1, b)?;
    Ok(total)
}

/// `M_{Z_i}(s) = E_V[1/(1 + sV)]` with `V ~ Beta(1, M−1)`, the squared magnitude of one
/// entry of an isotropic unit vector in `C^M`.
pub fn mgf_interference_mrc(m: u32) -> MgfFn {
    if m <= 1 {
        return MgfFn::gamma(1.0, 1.0);
    }
    let k = (m - 1) as f64;
    let tol = 1e-11;
    let density = move |v: f64| k * (1.0 - v).powf(k - 1.0);
    MgfFn::with_complement(
        move |s| {
            if s == 0.0 {
                return 1.0;
            }
            inner_value(integrate_adaptive(|v| density(v) / (1.0 + s * v), 0.0, 1.0, tol, 1e-300), tol)
        },
        move |s| {
            if s == 0.0 {
                return 0.0;
            }
            inner_value(
                integrate_adaptive(|v| density(v) * s * v / (1.0 + s * v), 0.0, 1.0, tol, 1e-300),
                tol,
            )
        },
    )
}

/// `E_r[(1 + z·p_tx·r^{−α})^{−k}]` complement for the nearest point of a PPP of the given
/// intensity, via `t = πλr² ~ Exp(1)`.
fn nearest_ppp_gamma_complement(z: f64, p_tx: f64, alpha: f64, density: f64, k: f64, tol: f64) -> f64 {
    if z == 0.0 || density == 0.0 || p_tx == 0.0 {
        return 0.0;
    }
    let f = |t: f64| {
        let r = (t / (PI * density)).sqrt();
        one_minus_pow(z * p_tx * r.powf(-alpha), k) * (-t).exp()
    };
    // the bracket drops from 1 to 0 around t where z·p·r^{−α} = 1
    let t_mid = PI * density * (z * p_tx).powf(2.0 / alpha);
    let scale = t_mid.clamp(1e-12, 1.0);
    inner_value(integrate_semi_infinite_scaled(f, scale, tol), tol)
}

/// SRA UL rate with MRC/MRT under singular path loss.
///
/// The UL signal MGF `M_W` averages `(1 + zP_u r^{−α})^{−M}` over the nearest-UL law of an
/// infinite-plane PPP with intensity `(1−p)λ`. The interference MGF averages
/// `M_{Z_i}(P_b d^{−α} z)^M` over the distance `d` between two uniform points in the disc.
pub fn ul_rate_sra_mrc(params: &NormalizedParams, tol: f64) -> Result<AnalyticResult, AnalyticError> {
    let m = params.m_antennas;
    let mf = m as f64;
    let alpha = params.alpha.value;
    let radius = params.radius;
    let p_b = params.p_b;
    let p_u = params.p_u;
    let density = (1.0 - params.p_dl) * params.lambda;
    let inner_tol = tol / 10.0;
    let kz = mgf_interference_mrc(m);

    let mw_complement = move |z: f64| nearest_ppp_gamma_complement(z, p_u, alpha, density, mf, inner_tol);
    let mw = MgfFn::with_complement(move |z| 1.0 - mw_complement(z), mw_complement);

    let kz2 = kz.clone();
    let mz_bar = move |z: f64| {
        if z == 0.0 || p_b == 0.0 {
            return 1.0;
        }
        let f = |r: f64| {
            let s = p_b * r.powf(-alpha) * z;
            kz2.eval(s).powf(mf) * pair_distance_pdf(r, radius)
        };
        let r_t = (p_b * z).powf(1.0 / alpha);
        let breaks = [r_t, radius];
        inner_value(integrate_pieces(&f, 0.0, 2.0 * radius, &breaks, inner_tol), inner_tol)
    };
    let mz = MgfFn::new(mz_bar);
    Ok(AnalyticResult::integral(hamdi_rate(&mw, &mz, tol)?))
}

/// Inputs of the interference-free UL rate: a nearest-RRH link of an infinite-plane PPP
/// with Gamma(`dof`, 1) effective fading. DL power and LI are deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfUplink {
    pub p_tx: f64,
    pub dof: u32,
    pub alpha: f64,
    pub density: f64,
}

impl ZfUplink {
    /// ZF costs one degree of freedom: `dof = M − 1`, intensity `(1−p)λ`.
    pub fn from_params(params: &NormalizedParams) -> Result<Self, AnalyticError> {
        if params.m_antennas < 2 {
            return Err(AnalyticError::Domain("ZF requires M > 1".into()));
        }
        Ok(Self {
            p_tx: params.p_u,
            dof: params.m_antennas - 1,
            alpha: params.alpha.value,
            density: (1.0 - params.p_dl) * params.lambda,
        })
    }
}

/// `∫₀^∞ E[ln(1 + p_tx r^{−α}·Gamma(dof, 1))] f_nearest(r) dr` with `t = πλr²`.
pub fn zf_rate(link: &ZfUplink, tol: f64) -> Result<AnalyticResult, AnalyticError> {
    if link.density == 0.0 || link.p_tx == 0.0 || link.dof == 0 {
        return Ok(AnalyticResult::integral(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        }));
    }
    let inner_tol = tol / 10.0;
    let one = MgfFn::degenerate_zero();
    let f = |t: f64| {
        let r = (t / (PI * link.density)).sqrt();
        let a = link.p_tx * r.powf(-link.alpha);
        let h = inner_value(hamdi_rate(&MgfFn::gamma(link.dof as f64, a), &one, inner_tol), inner_tol);
        h * (-t).exp()
    };
    Ok(AnalyticResult::integral(integrate_semi_infinite_scaled(f, 1.0, tol)?))
}

/// SRA UL rate with ZF/MRT. Reads only the fields of [`ZfUplink`].
pub fn ul_rate_sra_zf(params: &NormalizedParams, tol: f64) -> Result<AnalyticResult, AnalyticError> {
    zf_rate(&ZfUplink::from_params(params)?, tol)
}

/// Meijer-G closed form of [`zf_rate`] for `α = m/n`, as a cross-check.
///
/// `R = κ·G^{s,t}_{t+1,s}(ς | Δ(m,0), Δ(2n,0), 1; Δ(2n,K), Δ(2n,0), 0)` with `K` the
/// degrees of freedom, `s = 4n+1`, `t = m+2n`,
/// `κ = √m (2n)^{K−1/2} (2π)^{2−3n−m/2}/Γ(K)`, and `ς = (1/(2nP))^{2n}(m/(πλ))^m`.
pub fn zf_rate_meijer(link: &ZfUplink, alpha_num: u32, alpha_den: u32, tol: f64) -> Result<AnalyticResult, AnalyticError> {
    let (m, n) = (alpha_num as usize, alpha_den as usize);
    let k = link.dof as f64;
    let two_n = 2 * n;
    let delta = |count: usize, b: f64| -> Vec<f64> { (0..count).map(|i| (b + i as f64) / count as f64).collect() };
    let mut a = delta(m, 0.0);
    a.extend(delta(two_n, 0.0));
    a.push(1.0);
    let mut b = delta(two_n, k);
    b.extend(delta(two_n, 0.0));
    b.push(0.0);
    let varsigma = (1.0 / (two_n as f64 * link.p_tx)).powi(two_n as i32)
        * (m as f64 / (PI * link.density)).powi(m as i32);
    let kappa = (m as f64).sqrt() * (two_n as f64).powf(k - 0.5)
        * (2.0 * PI).powf(2.0 - 3.0 * n as f64 - m as f64 / 2.0)
        / gamma(k)?;
    let spec = MeijerGSpec::new(4 * n + 1, m + two_n, a, b, varsigma);
    let g = meijer_g(&spec, tol)?;
    Ok(AnalyticResult {
        value: kappa * g,
        method: Method::ClosedForm,
        diagnostics: Diagnostics::default(),
    })
}

/// Half-duplex rates, already weighted by τ (DL) and 1−τ (UL).
#[derive(Debug, Clone, PartialEq)]
pub struct HdRates {
    pub ul: AnalyticResult,
    pub dl: AnalyticResult,
}

impl HdRates {
    pub fn sum(&self) -> f64 {
        self.ul.value + self.dl.value
    }
}

fn scaled(mut r: AnalyticResult, w: f64) -> AnalyticResult {
    r.value *= w;
    r.diagnostics.quad_error *= w;
    r
}

/// Half-duplex ARA under singular path loss: each slot is the LI-free singular integral
/// with `(P_b, pλ)` for DL and `(P_u, (1−p)λ)` for UL.
pub fn hd_rate_ara(params: &NormalizedParams, tol: f64) -> Result<HdRates, AnalyticError> {
    require_per_rrh_power(params)?;
    let (m, delta) = (params.m_antennas, params.delta());
    let dl = ara_singular_integral(params.p_b, params.p_dl * params.lambda, m, delta, 0.0, tol)?;
    let ul = ara_singular_integral(params.p_u, (1.0 - params.p_dl) * params.lambda, m, delta, 0.0, tol)?;
    Ok(HdRates {
        ul: scaled(ul, 1.0 - params.tau),
        dl: scaled(dl, params.tau),
    })
}

/// Series form of [`hd_rate_ara`], for cross-checking where it converges.
pub fn hd_rate_ara_series(params: &NormalizedParams, tol: f64) -> Result<HdRates, AnalyticError> {
    let (m, delta) = (params.m_antennas, params.delta());
    let dl = ara_singular_series(params.p_b, params.p_dl * params.lambda, m, delta, 0.0, tol)?;
    let ul = ara_singular_series(params.p_u, (1.0 - params.p_dl) * params.lambda, m, delta, 0.0, tol)?;
    Ok(HdRates {
        ul: scaled(ul, 1.0 - params.tau),
        dl: scaled(dl, params.tau),
    })
}

/// Half-duplex SRA: the interference-free nearest-RRH rate with `M` degrees of freedom
/// (MRT or MRC on all antennas), intensity `pλ` for DL and `(1−p)λ` for UL.
pub fn hd_rates_sra(params: &NormalizedParams, tol: f64) -> Result<HdRates, AnalyticError> {
    let base = |p_tx: f64, density: f64| ZfUplink {
        p_tx,
        dof: params.m_antennas,
        alpha: params.alpha.value,
        density,
    };
    let dl = zf_rate(&base(params.p_b, params.p_dl * params.lambda), tol)?;
    let ul = zf_rate(&base(params.p_u, (1.0 - params.p_dl) * params.lambda), tol)?;
    Ok(HdRates {
        ul: scaled(ul, 1.0 - params.tau),
        dl: scaled(dl, params.tau),
    })
}

/// Smallest radius `start·2^k` past which doubling changes the finite-disc ARA DL rate by
/// less than `rel_change`. Returns the radius and the `(radius, rate)` trail.
pub fn saturation_radius(
    params: &NormalizedParams,
    start: f64,
    rel_change: f64,
    tol: f64,
) -> Result<(f64, Vec<(f64, f64)>), AnalyticError> {
    let mut p = params.clone();
    p.radius = start;
    let mut prev = dl_rate_ara_exact(&p, tol)?.value;
    let mut trail = vec![(start, prev)];
    for _ in 0..12 {
        p.radius *= 2.0;
        let next = dl_rate_ara_exact(&p, tol)?.value;
        trail.push((p.radius, next));
        if (next - prev).abs() <= rel_change * next.abs() {
            return Ok((p.radius / 2.0, trail));
        }
        prev = next;
    }
    Err(AnalyticError::Domain("DL rate did not saturate within 12 doublings".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{normalize, SystemParams};

    fn reference() -> NormalizedParams {
        normalize(&SystemParams::reference())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn li_mgf() {
        let mut p = reference();
        p.sigma_li = 0.0;
        let m = mgf_li(&p);
        assert_eq!(m.eval(123.0), 1.0);
        let p = reference();
        let m = mgf_li(&p);
        assert!((m.eval(1.0 / p.li_power()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn per_point_mgf_shape() {
        let p = reference();
        let m = mgf_per_point_dl(&p);
        assert_eq!(m.eval(0.0), 1.0);
        let mut prev = 1.0;
        for k in -3..12 {
            let v = m.eval(10f64.powi(k));
            assert!(v <= prev && v >= 0.0);
            prev = v;
        }
        let mut p3 = p.clone();
        p3.m_antennas = 3;
        assert!(mgf_per_point_dl(&p3).eval(1e5) < m.eval(1e5));
    }

    #[test]
    fn poisson_window_mass() {
        let w = PoissonWindow::new(392.7, 1e-10).unwrap();
        let mass: f64 = w.weights.iter().sum::<f64>() + (-392.7f64).exp();
        assert!((1.0 - mass).abs() <= 1e-10);
        assert!(w.lo > 250 && w.hi() < 550);
        let w0 = PoissonWindow::new(0.0, 1e-10).unwrap();
        assert_eq!(w0.weights.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn ara_exact_matches_closed_poisson_average() {
        let mut p = reference();
        p.radius = 100.0;
        let tol = 1e-8;
        let exact = dl_rate_ara_exact(&p, tol).unwrap();
        let point = DiscPoint::new(&p, 1e-11);
        let mu = p.mu_dl();
        let p_b = p.p_b;
        let comp = move |z: f64| -(-mu * point.complement(p_b * z)).exp_m1();
        let mx = MgfFn::with_complement(move |z| 1.0 - comp(z), comp);
        let closed = hamdi_rate(&mx, &mgf_li(&p), tol).unwrap();
        assert!(rel(exact.value, closed.value) < 1e-7, "{} {}", exact.value, closed.value);
    }

    #[test]
    fn ara_exact_vanishes_without_rrhs() {
        let mut p = reference();
        p.lambda = 1e-12;
        let r = dl_rate_ara_exact(&p, 1e-8).unwrap();
        assert!(r.value < 1e-5, "{}", r.value);
    }

    #[test]
    fn ara_total_power_split_rejected() {
        let mut p = reference();
        p.ara_power_split = PowerSplit::Total;
        assert!(matches!(dl_rate_ara_exact(&p, 1e-6), Err(AnalyticError::Domain(_))));
    }

    #[test]
    fn g_alpha_is_negative() {
        let g = g_alpha(2.0 / 3.0, 0.5e-3, 2).unwrap();
        assert!(g < 0.0);
    }

    #[test]
    fn singular_pgfl_matches_g_alpha() {
        let (delta, m) = (2.0 / 3.0, 2u32);
        let density = 1e-3;
        let g = g_alpha(delta, density, m).unwrap();
        for s in [1.0, 1e3, 1e6] {
            let i = pgfl_radial(s, 0.0, 2.0 / delta, m as f64, 1e-11);
            let lhs = -2.0 * PI * density * i;
            assert!(rel(lhs, g * s.powf(delta)) < 1e-7, "{s}: {lhs} vs {}", g * s.powf(delta));
        }
    }

    #[test]
    fn singular_series_agrees_when_convergent() {
        let (delta, m) = (2.0 / 3.0, 2u32);
        // larger powers lose digits to cancellation between the leading terms
        for (p_tx, li, tol) in [(100.0, 0.0, 1e-12), (1000.0, 1.0, 1e-10), (3000.0, 10.0, 1e-7)] {
            let i = ara_singular_integral(p_tx, 1e-3, m, delta, li, 1e-10).unwrap().value;
            let s = ara_singular_series(p_tx, 1e-3, m, delta, li, tol).unwrap().value;
            assert!(rel(s, i) < tol.max(1e-7), "{p_tx} {li}: {s} vs {i}");
        }
        assert!(ara_singular_series(1e4, 1e-3, m, delta, 10.0, 1e-5).is_err());
    }

    #[test]
    fn singular_series_reports_divergence_at_reference_power() {
        let p = reference();
        let e = ara_singular_series(p.p_b, 0.5e-3, 2, 2.0 / 3.0, p.li_power(), 1e-8);
        assert!(matches!(e, Err(AnalyticError::SeriesDivergence { .. })));
        let r = dl_rate_ara_singular(&p, 1e-8).unwrap();
        assert!(r.diagnostics.notes[0].contains("unavailable"));
    }

    #[test]
    fn upper_bound_vanishes_without_power() {
        let mut p = reference();
        p.p_b = 0.0;
        assert_eq!(dl_rate_ara_upper(&p, 1e-6).unwrap().value, 0.0);
    }

    #[test]
    fn upper_bound_exceeds_exact() {
        let mut p = reference();
        p.radius = 200.0;
        let exact = dl_rate_ara_exact(&p, 1e-8).unwrap().value;
        let upper = dl_rate_ara_upper(&p, 1e-8).unwrap().value;
        assert!(upper >= exact - 1e-4, "{upper} < {exact}");
    }

    #[test]
    fn sra_closed_form_matches_quadrature_oracle() {
        // values from independent mpmath quadrature of the rate integral
        let cases = [
            (3.0, 0.5, 2, 1.500_935_908_176_952_3),
            (0.2, 5.0, 3, 0.154_342_699_728_032_01),
            (100.0, 1.0, 2, 4.450_712_719_335_117_4),
            (2.0, 0.0, 3, 1.826_819_145_302_331_5),
            (7.0, 3.0, 1, 1.017_035_989_648_874_2),
        ];
        for (a, b, m, expect) in cases {
            let v = sra_conditional_closed_form(a, b, m).unwrap();
            assert!(rel(v, expect) < 1e-9, "{a} {b} {m}: {v}");
        }
        assert!(matches!(
            sra_conditional_closed_form(2.0, 2.0, 2),
            Err(AnalyticError::PoleCoincidence)
        ));
    }

    #[test]
    fn sra_dual_paths_agree() {
        let mut p = reference();
        p.radius = 150.0;
        let q = dl_rate_sra(&p, 1e-7).unwrap().value;
        let c = dl_rate_sra_closed_form(&p, 1e-7).unwrap().value;
        assert!(rel(q, c) < 1e-5, "{q} vs {c}");
    }

    #[test]
    fn mrc_unit_mgf() {
        let k1 = mgf_interference_mrc(1);
        assert!((k1.eval(1.0) - 0.5).abs() < 1e-15);
        let k2 = mgf_interference_mrc(2);
        assert_eq!(k2.eval(0.0), 1.0);
        // M = 2: V uniform, E[1/(1+sV)] = ln(1+s)/s
        assert!(rel(k2.eval(3.0), 4f64.ln() / 3.0) < 1e-10);
        let k3 = mgf_interference_mrc(3);
        assert!(rel(k3.complement(0.5), 1.0 - k3.eval(0.5)) < 1e-9);
    }

    #[test]
    fn zf_ignores_dl_power_and_li() {
        let p = reference();
        let mut q = p.clone();
        q.p_b = 0.0;
        q.sigma_li = 1e9;
        assert_eq!(ZfUplink::from_params(&p).unwrap(), ZfUplink::from_params(&q).unwrap());
        let mut one = p.clone();
        one.m_antennas = 1;
        assert!(ZfUplink::from_params(&one).is_err());
    }

    #[test]
    fn zf_rate_grows_with_ul_density() {
        let p = reference();
        let mut link = ZfUplink::from_params(&p).unwrap();
        let a = zf_rate(&link, 1e-7).unwrap().value;
        link.density *= 2.0;
        let b = zf_rate(&link, 1e-7).unwrap().value;
        assert!(b > a);
    }

    #[test]
    fn zf_rate_fubini_form() {
        // swapping the order of integration gives a single rate integral
        let p = reference();
        let link = ZfUplink::from_params(&p).unwrap();
        let nested = zf_rate(&link, 1e-8).unwrap().value;
        let comp = move |z: f64| {
            nearest_ppp_gamma_complement(z, link.p_tx, link.alpha, link.density, link.dof as f64, 1e-11)
        };
        let mx = MgfFn::with_complement(move |z| 1.0 - comp(z), comp);
        let swapped = hamdi_rate(&mx, &MgfFn::degenerate_zero(), 1e-9).unwrap().value;
        assert!(rel(nested, swapped) < 1e-6, "{nested} vs {swapped}");
    }

    #[test]
    fn mrc_without_dl_power_is_full_dof_zf() {
        let mut p = reference();
        p.p_b = 0.0;
        let mrc = ul_rate_sra_mrc(&p, 1e-7).unwrap().value;
        let mut link = ZfUplink::from_params(&p).unwrap();
        link.dof = p.m_antennas;
        let zf = zf_rate(&link, 1e-8).unwrap().value;
        assert!(rel(mrc, zf) < 1e-5, "{mrc} vs {zf}");
    }

    #[test]
    fn reference_point_matches_independent_oracles() {
        // scipy/mpmath quadratures written separately from this module
        let p = reference();
        let ara = dl_rate_ara_exact(&p, 1e-8).unwrap().value;
        assert!(rel(ara, 10.682_128_886_425) < 1e-6, "{ara}");
        let sra = dl_rate_sra_closed_form(&p, 1e-8).unwrap().value;
        assert!(rel(sra, 9.625_709_272_228) < 1e-6, "{sra}");
        let zf = ul_rate_sra_zf(&p, 1e-9).unwrap().value;
        assert!(rel(zf, 7.420_180_470_642_2) < 1e-8, "{zf}");
        for (pb, expect) in [(23.0, 7.891_231_45), (46.0, 4.705_129_974)] {
            let mut sp = SystemParams::reference();
            sp.p_b_dbm = pb;
            let mrc = ul_rate_sra_mrc(&normalize(&sp), 1e-7).unwrap().value;
            assert!(rel(mrc, expect) < 5e-6, "{pb}: {mrc}");
        }
    }

    #[test]
    fn zf_meijer_matches_quadrature() {
        let p = reference();
        let link = ZfUplink::from_params(&p).unwrap();
        let q = zf_rate(&link, 1e-9).unwrap().value;
        let g = zf_rate_meijer(&link, 3, 1, 1e-10).unwrap().value;
        assert!(rel(g, q) < 1e-8, "{g} vs {q}");
        let mut p4 = p.clone();
        p4.m_antennas = 4;
        let link = ZfUplink { alpha: 3.5, ..ZfUplink::from_params(&p4).unwrap() };
        let q = zf_rate(&link, 1e-9).unwrap().value;
        let g = zf_rate_meijer(&link, 7, 2, 1e-10).unwrap().value;
        assert!(rel(g, q) < 1e-7, "{g} vs {q}");
    }

    #[test]
    fn hd_ara_slots() {
        let mut p = reference();
        p.tau = 1.0;
        let r = hd_rate_ara(&p, 1e-8).unwrap();
        assert_eq!(r.ul.value, 0.0);
        assert!(r.dl.value > 0.0);
        p.tau = 0.5;
        p.p_dl = 0.0;
        let r = hd_rate_ara(&p, 1e-8).unwrap();
        assert_eq!(r.dl.value, 0.0);
    }

    #[test]
    fn hd_sra_symmetry() {
        let mut p = reference();
        p.p_u = p.p_b;
        let r = hd_rates_sra(&p, 1e-8).unwrap();
        assert!(rel(r.dl.value, r.ul.value) < 1e-12);
    }
}
