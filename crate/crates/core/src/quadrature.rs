//! Adaptive Gauss–Kronrod integration and the MGF rate integral.
//!
//! All analytic rates reduce to integrals of the form
//! `E[ln(1 + X/(Y+1))] = ∫₀^∞ M_Y(z) (1 − M_X(z)) e^{−z}/z dz`,
//! evaluated by [`hamdi_rate`] on a logarithmic grid in `z`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integration did not converge: estimate {estimate:e}, error bound {error:e}")]
    NoConvergence { estimate: f64, error: f64 },
    #[error("integrand returned a non-finite value at {at:e}")]
    NonFinite { at: f64 },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
}

/// An integral estimate with its absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Default relative tolerance for single integrals.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default relative tolerance for nested double integrals.
pub const DEFAULT_NESTED_TOL: f64 = 1e-6;
/// Maximum number of subintervals held by the adaptive integrator.
pub const MAX_SUBINTERVALS: usize = 4000;

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    splittable: bool,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // Unsplittable segments sink to the bottom of the heap.
        self.splittable
            .cmp(&other.splittable)
            .then(self.error.total_cmp(&other.error))
            .then(other.a.total_cmp(&self.a))
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite { at: x })
        }
    };
    let fc = eval(center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = res_k * half;
    let err = rescale_error((res_k - res_g) * half, res_abs * scale, res_asc * scale);
    Ok((value, err))
}

/// Adaptive G10K21 integration on `[a, b]` with relative and absolute tolerances.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Integral, QuadError> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (v, e) = gk21(&f, a, b)?;
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
        splittable: true,
    });
    let mut total = v;
    let mut total_err = e;
    loop {
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        if !seg.splittable || heap.len() + 2 > MAX_SUBINTERVALS {
            heap.push(seg);
            if seg.splittable {
                return Err(QuadError::NoConvergence {
                    estimate: total,
                    error: total_err,
                });
            }
            // Every remaining segment is at the resolution limit.
            break;
        }
        let mid = 0.5 * (seg.a + seg.b);
        let (v1, e1) = gk21(&f, seg.a, mid)?;
        let (v2, e2) = gk21(&f, mid, seg.b)?;
        evaluations += 42;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        let min_width = 1e3 * f64::EPSILON * (seg.a.abs() + seg.b.abs()).max(f64::MIN_POSITIVE);
        let child_ok = (mid - seg.a) > min_width;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
            splittable: child_ok,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
            splittable: child_ok,
        });
    }
    // Re-sum to shed the drift of the running totals.
    let mut value = 0.0;
    let mut error = 0.0;
    for s in heap.iter() {
        value += s.value;
        error += s.error;
    }
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// `∫ₐᵇ f(x) dx` to relative tolerance `tol`.
pub fn integrate_finite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Integral, QuadError> {
    if !(a < b) {
        return Err(QuadError::InvalidInterval { a, b });
    }
    integrate_adaptive(f, a, b, tol, 1e-300)
}

/// `∫₀^∞ f(x) dx` through the map `x = t/(1−t)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<Integral, QuadError> {
    integrate_semi_infinite_abs(f, 1.0, tol, 1e-300)
}

/// `∫₀^∞ f(x) dx` through `x = scale·t/(1−t)`; `scale` should sit near where f changes shape.
pub fn integrate_semi_infinite_scaled<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    tol: f64,
) -> Result<Integral, QuadError> {
    integrate_semi_infinite_abs(f, scale, tol, 1e-300)
}

pub(crate) fn integrate_semi_infinite_abs<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    tol: f64,
    abs_tol: f64,
) -> Result<Integral, QuadError> {
    let g = |t: f64| {
        let one_minus = 1.0 - t;
        let x = scale * t / one_minus;
        if !x.is_finite() {
            return 0.0;
        }
        f(x) * scale / (one_minus * one_minus)
    };
    integrate_adaptive(g, 0.0, 1.0, tol, abs_tol).map_err(|e| match e {
        QuadError::NonFinite { at } => QuadError::NonFinite {
            at: scale * at / (1.0 - at),
        },
        other => other,
    })
}

/// `∫_lo^hi f(x) dx` for `0 < lo < hi`, integrated in `u = ln x`.
pub fn integrate_log<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Integral, QuadError> {
    if !(lo > 0.0 && lo < hi) {
        return Err(QuadError::InvalidInterval { a: lo, b: hi });
    }
    let g = |u: f64| {
        let x = u.exp();
        f(x) * x
    };
    integrate_adaptive(g, lo.ln(), hi.ln(), tol, 1e-300).map_err(|e| match e {
        QuadError::NonFinite { at } => QuadError::NonFinite { at: at.exp() },
        other => other,
    })
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A moment generating function `z ↦ E[e^{−zX}]` of a nonnegative variable, for z ≥ 0.
///
/// An optional complement `z ↦ 1 − M(z)` can be supplied when it is available without
/// cancellation; the rate integral depends on it near the origin.
#[derive(Clone)]
pub struct MgfFn {
    eval: ScalarFn,
    complement: Option<ScalarFn>,
}

impl fmt::Debug for MgfFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MgfFn")
            .field("has_complement", &self.complement.is_some())
            .finish()
    }
}

impl MgfFn {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            complement: None,
        }
    }

    pub fn with_complement(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        complement: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            complement: Some(Arc::new(complement)),
        }
    }

    /// MGF of the zero variable: M ≡ 1.
    pub fn degenerate_zero() -> Self {
        Self::with_complement(|_| 1.0, |_| 0.0)
    }

    /// MGF of `scale · Gamma(shape, 1)`: `(1 + scale·z)^{−shape}`.
    pub fn gamma(shape: f64, scale: f64) -> Self {
        Self::with_complement(
            move |z| (-shape * (scale * z).ln_1p()).exp(),
            move |z| -(-shape * (scale * z).ln_1p()).exp_m1(),
        )
    }

    pub fn eval(&self, z: f64) -> f64 {
        (self.eval)(z)
    }

    pub fn complement(&self, z: f64) -> f64 {
        match &self.complement {
            Some(c) => c(z),
            None => 1.0 - (self.eval)(z),
        }
    }
}

/// Documented starting point of the small-z series region of the rate integral.
pub const HAMDI_Z0: f64 = 1e-6;
/// Upper limit in z; the tail beyond it is below e^{−60}.
pub const HAMDI_Z_MAX: f64 = 60.0;

/// `E[ln(1 + X/(Y+1))] = ∫₀^∞ M_Y(z)(1 − M_X(z)) e^{−z}/z dz` for independent X, Y ≥ 0.
///
/// The integral runs in `u = ln z` on `[ln z₀, ln 60]`. Below z₀ the integrand is replaced
/// by its small-z limit `E[X]`, whose contribution `E[X]·z₀ ≈ 1 − M_X(z₀)` is added in
/// closed form. z₀ starts at [`HAMDI_Z0`] and moves down by decades until
/// `1 − M_X(z₀) ≤ tol/100`, so the approximation error stays far below `tol`.
pub fn hamdi_rate(mx: &MgfFn, my: &MgfFn, tol: f64) -> Result<Integral, QuadError> {
    let mut z0 = HAMDI_Z0;
    let mut head = mx.complement(z0);
    while head > tol * 1e-2 && z0 > 1e-290 {
        z0 *= 0.1;
        head = mx.complement(z0);
    }
    if !head.is_finite() {
        return Err(QuadError::NonFinite { at: z0 });
    }
    let integrand = |u: f64| {
        let z = u.exp();
        my.eval(z) * mx.complement(z) * (-z).exp()
    };
    let body = integrate_adaptive(integrand, z0.ln(), HAMDI_Z_MAX.ln(), tol, tol * 1e-6)
        .map_err(|e| match e {
            QuadError::NonFinite { at } => QuadError::NonFinite { at: at.exp() },
            other => other,
        })?;
    Ok(Integral {
        value: body.value + head * my.eval(z0),
        error: body.error + head * tol,
        evaluations: body.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_endpoint_singularity() {
        let v = integrate_finite(|_| 1.0, 0.0, 1.0, 1e-10).unwrap();
        assert!((v.value - 1.0).abs() < 1e-14);
        let v = integrate_finite(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v.value - 2.0).abs() < 1e-9, "{}", v.value);
    }

    #[test]
    fn semi_infinite_exponentials() {
        let v = integrate_semi_infinite(|z| (-z).exp(), 1e-10).unwrap();
        assert!((v.value - 1.0).abs() < 1e-10);
        let v = integrate_semi_infinite(|z| z * (-z).exp(), 1e-10).unwrap();
        assert!((v.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_integrand_converges() {
        let v = integrate_finite(|_| 0.0, 0.0, 5.0, 1e-10).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn nonfinite_integrand_is_reported() {
        let e = integrate_finite(|x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, 1e-8);
        assert!(matches!(e, Err(QuadError::NonFinite { .. })));
    }

    #[test]
    fn invalid_interval() {
        assert!(matches!(
            integrate_finite(|x| x, 1.0, 0.0, 1e-8),
            Err(QuadError::InvalidInterval { .. })
        ));
    }

    #[test]
    fn budget_exhaustion_carries_estimate() {
        // Wildly oscillating integrand with a demanding tolerance.
        let e = integrate_finite(|x| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0, 1e-15);
        match e {
            Err(QuadError::NoConvergence { estimate, .. }) => assert!(estimate.is_finite()),
            Ok(_) => {}
            Err(other) => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hamdi_degenerate_x_is_zero() {
        let v = hamdi_rate(&MgfFn::degenerate_zero(), &MgfFn::gamma(1.0, 3.0), 1e-8).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn hamdi_exponential() {
        // E[ln(1+X)], X ~ Exp(1) equals e·E₁(1)
        let v = hamdi_rate(&MgfFn::gamma(1.0, 1.0), &MgfFn::degenerate_zero(), 1e-10).unwrap();
        assert!((v.value - 0.596_347_362_323_194).abs() < 1e-8, "{}", v.value);
    }

    #[test]
    fn hamdi_handles_large_scale() {
        // E[ln(1+aG)], G ~ Gamma(2): e^{1/a}(E₁(1/a) + E₂(1/a))
        let a = 4e9;
        let v = hamdi_rate(&MgfFn::gamma(2.0, a), &MgfFn::degenerate_zero(), 1e-9).unwrap();
        let x = 1.0 / a;
        let want = crate::specfun::exp_integral_en_scaled(1, x).unwrap()
            + crate::specfun::exp_integral_en_scaled(2, x).unwrap();
        assert!(((v.value - want) / want).abs() < 1e-8, "{} vs {want}", v.value);
    }
}
