//! Scenario parameters: parsing, validation and noise normalization.
//!
//! The config file is plain text with one `key = value` pair per line; `#` starts a
//! comment. Powers are given in dBm and converted once, in [`normalize`], to linear
//! values relative to the noise power. Everything downstream works with unit noise.
//!
//! | key              | required | default    | meaning                                   |
//! |------------------|----------|------------|-------------------------------------------|
//! | `lambda`         | yes      |            | RRH density, points per m²                |
//! | `p_dl`           | yes      |            | DL fraction (Bernoulli thinning), (0, 1)  |
//! | `m_antennas`     | yes      |            | antennas per RRH, ≥ 1                     |
//! | `alpha`          | yes      |            | path-loss exponent > 2, float or `m/n`    |
//! | `p_b_dbm`        | yes      |            | DL RRH transmit power, dBm                |
//! | `p_u_dbm`        | yes      |            | user transmit power, dBm, or `off`        |
//! | `sigma_li_dbm`   | yes      |            | residual LI power, dBm, or `off`          |
//! | `radius`         | no       | 500        | disc radius, m                            |
//! | `epsilon`        | no       | 1          | path-loss offset ε ≥ 0 (0 = singular)     |
//! | `noise_dbm`      | no       | -50        | noise power over the band, dBm            |
//! | `tau`            | no       | 0.5        | half-duplex DL time fraction              |
//! | `ara_power_split`| no       | `per_rrh`  | `per_rrh` or `total` (P_b shared by all)  |
//!
//! The residual LI power is the loopback power left at the user's receiver after
//! cancellation; `sigma_li_dbm = p_u_dbm` means no cancellation at all. It enters the
//! SINR as `P_u |h_LI|²` with `E|h_LI|² = 10^{(σ_LI − P_u)/10}`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("{key}: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("{key} {reason}")]
    Constraint { key: String, reason: String },
}

fn constraint(key: &str, reason: &str) -> ConfigError {
    ConfigError::Constraint {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

pub const REQUIRED_KEYS: [&str; 7] = [
    "lambda",
    "p_dl",
    "m_antennas",
    "alpha",
    "p_b_dbm",
    "p_u_dbm",
    "sigma_li_dbm",
];

pub const OPTIONAL_KEYS: [&str; 5] = ["radius", "epsilon", "noise_dbm", "tau", "ara_power_split"];

pub const DEFAULT_RADIUS: f64 = 500.0;
pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_NOISE_DBM: f64 = -50.0;
pub const DEFAULT_TAU: f64 = 0.5;
/// Largest denominator used when a float `alpha` is recorded as a fraction.
pub const MAX_ALPHA_DENOMINATOR: u32 = 16;

/// How the ARA scheme assigns DL power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerSplit {
    /// Every DL RRH transmits with `P_b`.
    #[default]
    PerRrh,
    /// `P_b` is the total DL power, shared equally by the realized DL RRHs.
    Total,
}

impl fmt::Display for PowerSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerSplit::PerRrh => "per_rrh",
            PowerSplit::Total => "total",
        })
    }
}

impl FromStr for PowerSplit {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "per_rrh" => Ok(PowerSplit::PerRrh),
            "total" => Ok(PowerSplit::Total),
            _ => Err(()),
        }
    }
}

/// Path-loss exponent with a reduced fraction `num/den` alongside the float value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent {
    pub value: f64,
    pub num: u32,
    pub den: u32,
    /// Whether `num/den` equals `value` exactly (given as a fraction or an integer).
    pub exact: bool,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Exponent {
    pub fn from_ratio(num: u32, den: u32) -> Option<Self> {
        if num == 0 || den == 0 {
            return None;
        }
        let g = gcd(num, den);
        Some(Self {
            value: num as f64 / den as f64,
            num: num / g,
            den: den / g,
            exact: true,
        })
    }

    /// Best fraction with denominator ≤ [`MAX_ALPHA_DENOMINATOR`].
    pub fn from_float(value: f64) -> Self {
        let mut best = (value.round() as u32, 1u32);
        let mut best_err = (value - best.0 as f64).abs();
        for den in 2..=MAX_ALPHA_DENOMINATOR {
            let num = (value * den as f64).round() as u32;
            let err = (value - num as f64 / den as f64).abs();
            if err < best_err - 1e-15 {
                best = (num, den);
                best_err = err;
            }
        }
        let g = gcd(best.0, best.1).max(1);
        Self {
            value,
            num: best.0 / g,
            den: best.1 / g,
            exact: best_err == 0.0,
        }
    }

    /// `δ = 2/α`.
    pub fn delta(&self) -> f64 {
        2.0 / self.value
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact && self.den != 1 {
            write!(f, "{}/{}", self.num, self.den)
        } else {
            write!(f, "{}", self.value)
        }
    }
}

impl FromStr for Exponent {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        if let Some((n, d)) = s.split_once('/') {
            let n: u32 = n.trim().parse().map_err(|_| ())?;
            let d: u32 = d.trim().parse().map_err(|_| ())?;
            Exponent::from_ratio(n, d).ok_or(())
        } else {
            let v: f64 = s.parse().map_err(|_| ())?;
            if !v.is_finite() {
                return Err(());
            }
            Ok(Exponent::from_float(v))
        }
    }
}

/// Scenario constants as configured (powers in dBm).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub lambda: f64,
    pub p_dl: f64,
    pub radius: f64,
    pub m_antennas: u32,
    pub alpha: Exponent,
    pub epsilon: f64,
    pub p_b_dbm: f64,
    /// `-inf` encodes `off`.
    pub p_u_dbm: f64,
    /// `-inf` encodes `off` (perfect cancellation).
    pub sigma_li_dbm: f64,
    pub noise_dbm: f64,
    pub tau: f64,
    pub ara_power_split: PowerSplit,
}

impl SystemParams {
    /// Parameters used throughout the numerical section: P_b = 46 dBm, P_u = 23 dBm,
    /// noise −50 dBm, λ = 10⁻³, p = 0.5, M = 2, α = 3, σ_LI = −30 dBm.
    pub fn reference() -> Self {
        Self {
            lambda: 1e-3,
            p_dl: 0.5,
            radius: DEFAULT_RADIUS,
            m_antennas: 2,
            alpha: Exponent::from_ratio(3, 1).unwrap(),
            epsilon: DEFAULT_EPSILON,
            p_b_dbm: 46.0,
            p_u_dbm: 23.0,
            sigma_li_dbm: -30.0,
            noise_dbm: DEFAULT_NOISE_DBM,
            tau: DEFAULT_TAU,
            ara_power_split: PowerSplit::PerRrh,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(constraint("lambda", "must be finite and nonnegative"));
        }
        if !(self.p_dl > 0.0 && self.p_dl < 1.0) {
            return Err(constraint("p_dl", "must lie strictly between 0 and 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(constraint("radius", "must be positive"));
        }
        if self.m_antennas < 1 {
            return Err(constraint("m_antennas", "must be at least 1"));
        }
        if !(self.alpha.value > 2.0) || !self.alpha.value.is_finite() {
            return Err(constraint("alpha", "must exceed 2"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(constraint("epsilon", "must be finite and nonnegative"));
        }
        if !self.p_b_dbm.is_finite() && self.p_b_dbm != f64::NEG_INFINITY {
            return Err(constraint("p_b_dbm", "must be finite or off"));
        }
        if !self.p_u_dbm.is_finite() && self.p_u_dbm != f64::NEG_INFINITY {
            return Err(constraint("p_u_dbm", "must be finite or off"));
        }
        if !self.sigma_li_dbm.is_finite() && self.sigma_li_dbm != f64::NEG_INFINITY {
            return Err(constraint("sigma_li_dbm", "must be finite or off"));
        }
        if !self.noise_dbm.is_finite() {
            return Err(constraint("noise_dbm", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(constraint("tau", "must lie in [0, 1]"));
        }
        let total = std::f64::consts::PI * self.lambda * self.radius * self.radius;
        if !total.is_finite() {
            return Err(constraint("lambda", "gives a non-finite Poisson mean"));
        }
        Ok(())
    }

    /// Mean number of DL RRHs in the disc, `π p λ R²`.
    pub fn mu_dl(&self) -> f64 {
        std::f64::consts::PI * self.p_dl * self.lambda * self.radius * self.radius
    }

    /// Mean number of UL RRHs in the disc, `π (1−p) λ R²`.
    pub fn mu_ul(&self) -> f64 {
        std::f64::consts::PI * (1.0 - self.p_dl) * self.lambda * self.radius * self.radius
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "lambda" => fmt_f64(self.lambda),
            "p_dl" => fmt_f64(self.p_dl),
            "radius" => fmt_f64(self.radius),
            "m_antennas" => self.m_antennas.to_string(),
            "alpha" => self.alpha.to_string(),
            "epsilon" => fmt_f64(self.epsilon),
            "p_b_dbm" => fmt_dbm(self.p_b_dbm),
            "p_u_dbm" => fmt_dbm(self.p_u_dbm),
            "sigma_li_dbm" => fmt_dbm(self.sigma_li_dbm),
            "noise_dbm" => fmt_f64(self.noise_dbm),
            "tau" => fmt_f64(self.tau),
            "ara_power_split" => self.ara_power_split.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Replace one field from its textual form; the result is re-validated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        let value = value.trim();
        match key {
            "lambda" => self.lambda = parse_f64(value).ok_or_else(bad)?,
            "p_dl" => self.p_dl = parse_f64(value).ok_or_else(bad)?,
            "radius" => self.radius = parse_f64(value).ok_or_else(bad)?,
            "m_antennas" => self.m_antennas = value.parse().map_err(|_| bad())?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad())?,
            "epsilon" => self.epsilon = parse_f64(value).ok_or_else(bad)?,
            "p_b_dbm" => self.p_b_dbm = parse_dbm(value).ok_or_else(bad)?,
            "p_u_dbm" => self.p_u_dbm = parse_dbm(value).ok_or_else(bad)?,
            "sigma_li_dbm" => self.sigma_li_dbm = parse_dbm(value).ok_or_else(bad)?,
            "noise_dbm" => self.noise_dbm = parse_f64(value).ok_or_else(bad)?,
            "tau" => self.tau = parse_f64(value).ok_or_else(bad)?,
            "ara_power_split" => self.ara_power_split = value.parse().map_err(|_| bad())?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        self.validate()
    }

    /// The config-file form: every key, one per line, in a fixed order.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in REQUIRED_KEYS.iter().chain(OPTIONAL_KEYS.iter()) {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&self.get(key).expect("known key"));
            out.push('\n');
        }
        out
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_dbm(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "off".to_string()
    } else {
        fmt_f64(v)
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_dbm(s: &str) -> Option<f64> {
    if s.eq_ignore_ascii_case("off") {
        Some(f64::NEG_INFINITY)
    } else {
        parse_f64(s)
    }
}

/// Parse and validate config text.
pub fn parse_params(text: &str) -> Result<SystemParams, ConfigError> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        if !REQUIRED_KEYS.contains(&k) && !OPTIONAL_KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if entries.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::DuplicateKey(k.to_string()));
        }
    }
    let missing: Vec<String> = REQUIRED_KEYS
        .iter()
        .filter(|k| !entries.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys(missing));
    }
    let mut params = SystemParams::reference();
    for (k, v) in &entries {
        params.set(k, v).or_else(|e| match e {
            // Cross-field constraints are checked once every key is in place.
            ConfigError::Constraint { .. } => Ok(()),
            other => Err(other),
        })?;
    }
    for k in OPTIONAL_KEYS {
        if !entries.contains_key(k) {
            match k {
                "radius" => params.radius = DEFAULT_RADIUS,
                "epsilon" => params.epsilon = DEFAULT_EPSILON,
                "noise_dbm" => params.noise_dbm = DEFAULT_NOISE_DBM,
                "tau" => params.tau = DEFAULT_TAU,
                "ara_power_split" => params.ara_power_split = PowerSplit::PerRrh,
                _ => unreachable!(),
            }
        }
    }
    params.validate()?;
    Ok(params)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<SystemParams, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_params(&text)
}

/// Parameters with powers expressed relative to the noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedParams {
    /// `P_b / N`
    pub p_b: f64,
    /// `P_u / N`
    pub p_u: f64,
    /// `E|h_LI|²`: residual LI power divided by the user transmit power.
    pub sigma_li: f64,
    pub lambda: f64,
    pub p_dl: f64,
    pub radius: f64,
    pub m_antennas: u32,
    pub alpha: Exponent,
    pub epsilon: f64,
    pub tau: f64,
    pub ara_power_split: PowerSplit,
}

/// `10^{dBm/10}` in mW.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn normalize(params: &SystemParams) -> NormalizedParams {
    let noise = dbm_to_mw(params.noise_dbm);
    let p_u = dbm_to_mw(params.p_u_dbm) / noise;
    let sigma_li = if params.p_u_dbm == f64::NEG_INFINITY {
        0.0
    } else {
        dbm_to_mw(params.sigma_li_dbm - params.p_u_dbm)
    };
    NormalizedParams {
        p_b: dbm_to_mw(params.p_b_dbm) / noise,
        p_u,
        sigma_li,
        lambda: params.lambda,
        p_dl: params.p_dl,
        radius: params.radius,
        m_antennas: params.m_antennas,
        alpha: params.alpha,
        epsilon: params.epsilon,
        tau: params.tau,
        ara_power_split: params.ara_power_split,
    }
}

impl NormalizedParams {
    pub fn delta(&self) -> f64 {
        self.alpha.delta()
    }

    pub fn mu_dl(&self) -> f64 {
        std::f64::consts::PI * self.p_dl * self.lambda * self.radius * self.radius
    }

    pub fn mu_ul(&self) -> f64 {
        std::f64::consts::PI * (1.0 - self.p_dl) * self.lambda * self.radius * self.radius
    }

    /// Mean residual LI power relative to noise, `P_u σ²_LI`.
    pub fn li_power(&self) -> f64 {
        let v = self.p_u * self.sigma_li;
        if v.is_nan() {
            0.0
        } else {
            v
        }
    }

    /// Re-normalizing an already normalized parameter set changes nothing.
    pub fn normalize(&self) -> NormalizedParams {
        self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "lambda = 1e-3\np_dl = 0.5\nm_antennas = 2\nalpha = 3\n\
                           p_b_dbm = 46\np_u_dbm = 23\nsigma_li_dbm = -30\n";

    #[test]
    fn parses_reference_powers() {
        let p = parse_params(MINIMAL).unwrap();
        assert_eq!(p.p_b_dbm, 46.0);
        assert_eq!(p.p_u_dbm, 23.0);
        assert_eq!(p.radius, DEFAULT_RADIUS);
        assert_eq!(p.epsilon, DEFAULT_EPSILON);
        assert_eq!(p.tau, DEFAULT_TAU);
        assert_eq!(p.noise_dbm, DEFAULT_NOISE_DBM);
    }

    #[test]
    fn alpha_two_rejected() {
        let text = MINIMAL.replace("alpha = 3", "alpha = 2");
        let err = parse_params(&text).unwrap_err();
        assert_eq!(err.to_string(), "alpha must exceed 2");
    }

    #[test]
    fn empty_file_lists_required_keys() {
        match parse_params("") {
            Err(ConfigError::MissingKeys(keys)) => {
                assert_eq!(keys.len(), REQUIRED_KEYS.len());
                let msg = ConfigError::MissingKeys(keys).to_string();
                for k in REQUIRED_KEYS {
                    assert!(msg.contains(k));
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constraint_errors_name_the_key() {
        for (k, v) in [
            ("p_dl", "1.0"),
            ("p_dl", "0"),
            ("radius", "-1"),
            ("m_antennas", "0"),
            ("tau", "1.5"),
            ("epsilon", "-0.1"),
        ] {
            let mut p = parse_params(MINIMAL).unwrap();
            let err = p.set(k, v).unwrap_err().to_string();
            assert!(err.contains(k), "{k}={v}: {err}");
        }
    }

    #[test]
    fn syntax_and_unknown_keys() {
        assert!(matches!(
            parse_params("lambda 1"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_params(&format!("{MINIMAL}bogus = 1")),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            parse_params(&format!("{MINIMAL}lambda = 2e-3")),
            Err(ConfigError::DuplicateKey(_))
        ));
    }

    #[test]
    fn rational_alpha() {
        let p = parse_params(&MINIMAL.replace("alpha = 3", "alpha = 7/2")).unwrap();
        assert_eq!((p.alpha.num, p.alpha.den), (7, 2));
        assert!(p.alpha.exact);
        let p = parse_params(&MINIMAL.replace("alpha = 3", "alpha = 2.75")).unwrap();
        assert_eq!((p.alpha.num, p.alpha.den), (11, 4));
        let p = parse_params(&MINIMAL.replace("alpha = 3", "alpha = 3.14159")).unwrap();
        assert!(p.alpha.den <= MAX_ALPHA_DENOMINATOR);
        assert!(!p.alpha.exact);
        let p = parse_params(&MINIMAL.replace("alpha = 3", "alpha = 8/2")).unwrap();
        assert_eq!((p.alpha.num, p.alpha.den), (4, 1));
    }

    #[test]
    fn normalization_arithmetic() {
        let p = parse_params(MINIMAL).unwrap();
        let n = normalize(&p);
        assert!((n.p_b / 10f64.powf(9.6) - 1.0).abs() < 1e-12);
        let mut q = p.clone();
        q.set("p_u_dbm", "-50").unwrap();
        assert!((normalize(&q).p_u - 1.0).abs() < 1e-12);
        q.set("sigma_li_dbm", "off").unwrap();
        assert_eq!(normalize(&q).sigma_li, 0.0);
        assert_eq!(normalize(&q).li_power(), 0.0);
        // LI power relative to noise: −30 dBm over −50 dBm noise
        assert!((n.li_power() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn user_power_off_silences_li() {
        let mut p = parse_params(MINIMAL).unwrap();
        p.set("p_u_dbm", "off").unwrap();
        let n = normalize(&p);
        assert_eq!(n.p_u, 0.0);
        assert_eq!(n.li_power(), 0.0);
    }

    #[test]
    fn poisson_means_add_up() {
        let p = parse_params(MINIMAL).unwrap();
        let total = std::f64::consts::PI * p.lambda * p.radius * p.radius;
        assert!((p.mu_dl() + p.mu_ul() - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn round_trip() {
        let mut p = parse_params(MINIMAL).unwrap();
        p.set("ara_power_split", "total").unwrap();
        p.set("sigma_li_dbm", "off").unwrap();
        let text = p.to_config_string();
        let q = parse_params(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(normalize(&q), normalize(&p));
        assert_eq!(normalize(&p).normalize(), normalize(&p));
    }
}
