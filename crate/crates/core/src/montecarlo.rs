//! Monte Carlo estimation of spatially averaged rates.
//!
//! Each spatial realization `k` owns two ChaCha8 streams derived from `(seed, k)`: one for
//! geometry and one for fading. Per-pattern averages are reduced with a fixed-shape
//! pairwise sum, so results are bitwise identical for any number of worker threads.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::beamforming::{
    sinr_dl_ara, sinr_dl_sra, sinr_ul_ara, sinr_ul_sra, snr_hd, Association, BeamError,
    Combiner, Direction, LinkRealization, MrcInterference, PatternGains,
};
use crate::channel::{ChannelError, CrossPlan, FadingDraw};
use crate::config::{normalize, ConfigError, NormalizedParams, SystemParams};
use crate::geometry::{sample_pattern, uniform_in_disc};

/// Caps the worker threads used by Monte Carlo runs.
pub const THREADS_ENV: &str = "CRAN_DUPLEX_THREADS";

#[derive(Debug, Error)]
pub enum McError {
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Duplex {
    Full,
    /// DL for a fraction τ of the slot, UL for the rest, with no LI or UL–DL interference.
    Half,
}

/// Law of the UL–DL RRH distance in SRA uplink interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum UdDistance {
    /// The actual distance between the nearest UL and the nearest DL RRH.
    #[default]
    Geometric,
    /// The distance between two fresh independent uniform points in the disc, as assumed
    /// by the analytic MRC rate.
    UniformPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Links {
    #[default]
    Both,
    Downlink,
    Uplink,
}

impl Links {
    fn dl(self) -> bool {
        self != Links::Uplink
    }

    fn ul(self) -> bool {
        self != Links::Downlink
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scheme {
    pub association: Association,
    pub combiner: Combiner,
    pub duplex: Duplex,
    pub links: Links,
    pub ud_distance: UdDistance,
    /// Applied to SRA MRC interference.
    pub mrc_interference: MrcInterference,
}

impl Scheme {
    pub fn new(association: Association, combiner: Combiner, duplex: Duplex) -> Self {
        Self {
            association,
            combiner,
            duplex,
            links: Links::Both,
            ud_distance: UdDistance::Geometric,
            mrc_interference: MrcInterference::ColumnSum,
        }
    }

    pub fn links(mut self, links: Links) -> Self {
        self.links = links;
        self
    }

    pub fn ud_distance(mut self, d: UdDistance) -> Self {
        self.ud_distance = d;
        self
    }

    pub fn mrc_interference(mut self, mode: MrcInterference) -> Self {
        self.mrc_interference = mode;
        self
    }

    fn validate(&self, params: &NormalizedParams) -> Result<(), McError> {
        let zf_used = self.combiner == Combiner::Zf && self.duplex == Duplex::Full && self.links.ul();
        if zf_used && params.m_antennas < 2 {
            return Err(McError::InvalidScheme("ZF requires M > 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = match self.association {
            Association::Ara => "ARA",
            Association::Sra => "SRA",
        };
        let c = match self.combiner {
            Combiner::Mrc => "MRC/MRT",
            Combiner::Zf => "ZF/MRT",
        };
        let d = match self.duplex {
            Duplex::Full => "FD",
            Duplex::Half => "HD",
        };
        write!(f, "{a}-{c}-{d}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub n_spatial: usize,
    pub n_fading: usize,
}

impl Budget {
    pub const DEFAULT: Budget = Budget {
        n_spatial: 2000,
        n_fading: 100,
    };

    pub fn new(n_spatial: usize, n_fading: usize) -> Self {
        Self {
            n_spatial,
            n_fading,
        }
    }

    pub fn total(&self) -> usize {
        self.n_spatial * self.n_fading
    }

    /// Ten times fewer spatial realizations (at least one).
    pub fn fast(self) -> Self {
        Self {
            n_spatial: (self.n_spatial / 10).max(1),
            n_fading: self.n_fading,
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// A Monte Carlo mean in nats/s/Hz with its batch-means standard error over patterns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_spatial: usize,
    pub n_fading: usize,
    pub scheme: Scheme,
    pub seed: u64,
}

/// UL, DL, and sum rates of one run; a link not simulated is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub ul: Option<RateEstimate>,
    pub dl: Option<RateEstimate>,
    pub sum: Option<RateEstimate>,
}

impl RateReport {
    pub fn ul_mean(&self) -> f64 {
        self.ul.map_or(f64::NAN, |e| e.mean)
    }

    pub fn dl_mean(&self) -> f64 {
        self.dl.map_or(f64::NAN, |e| e.mean)
    }

    pub fn sum_mean(&self) -> f64 {
        self.sum.map_or(f64::NAN, |e| e.mean)
    }
}

#[derive(Debug, Clone, Copy)]
enum StreamTag {
    Geometry = 1,
    Fading = 2,
}

fn stream_rng(seed: u64, index: u64, tag: StreamTag) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((index << 4) | tag as u64);
    rng
}

/// Sum with a fixed binary-tree shape that depends only on `xs.len()`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn run_in_pool<T: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> Result<T, McError> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| McError::ThreadPool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PatternOutcome {
    ul: f64,
    dl: f64,
}

fn simulate_pattern(
    params: &NormalizedParams,
    scheme: &Scheme,
    n_fading: usize,
    seed: u64,
    index: u64,
) -> Result<PatternOutcome, McError> {
    let mut geo = stream_rng(seed, index, StreamTag::Geometry);
    let full = sample_pattern(params.lambda, params.p_dl, params.radius, &mut geo);
    let sra = scheme.association == Association::Sra;
    let pattern = if sra { full.nearest_only() } else { full };
    let pair_distance = (sra && scheme.ud_distance == UdDistance::UniformPair).then(|| {
        let a = uniform_in_disc(params.radius, &mut geo);
        let b = uniform_in_disc(params.radius, &mut geo);
        a.distance(&b)
    });

    let fd = scheme.duplex == Duplex::Full;
    let ul_interfered = fd && scheme.links.ul() && pattern.n_ul() > 0 && pattern.n_dl() > 0;
    let gains = PatternGains::new(&pattern, params, ul_interfered)?;
    let plan = match (ul_interfered, scheme.association, scheme.combiner) {
        (false, _, _) => CrossPlan::none(),
        (true, Association::Sra, _) => CrossPlan::all_matrices(1, 1),
        (true, Association::Ara, Combiner::Mrc) => CrossPlan {
            matrices: Vec::new(),
            effective_gains: true,
        },
        // ZF needs the matrix toward each UL RRH's own nearest DL RRH
        (true, Association::Ara, Combiner::Zf) => CrossPlan {
            matrices: gains
                .nearest_dl_of_ul
                .iter()
                .enumerate()
                .filter_map(|(j, q)| q.map(|q| (j, q)))
                .collect(),
            effective_gains: true,
        },
    };

    let m = params.m_antennas as usize;
    let mut fad = stream_rng(seed, index, StreamTag::Fading);
    let (mut ul_acc, mut dl_acc) = (0.0, 0.0);
    for _ in 0..n_fading {
        let fading = FadingDraw::draw(m, pattern.n_dl(), pattern.n_ul(), params.sigma_li, &plan, &mut fad);
        let rz = LinkRealization::with_gains(&pattern, &fading, params, &gains)
            .with_pair_distance(pair_distance)
            .with_mrc_interference(if sra {
                scheme.mrc_interference
            } else {
                MrcInterference::Coherent
            });
        match scheme.duplex {
            Duplex::Full => {
                if scheme.links.dl() {
                    let s = if sra { sinr_dl_sra(&rz) } else { sinr_dl_ara(&rz) };
                    dl_acc += s.ln_1p();
                }
                if scheme.links.ul() {
                    let s = match scheme.association {
                        Association::Sra => sinr_ul_sra(&rz, scheme.combiner),
                        Association::Ara => sinr_ul_ara(&rz, scheme.combiner),
                    };
                    match s {
                        Ok(s) => ul_acc += s.ln_1p(),
                        Err(BeamError::NoUplink) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            Duplex::Half => {
                if scheme.links.dl() {
                    dl_acc += params.tau
                        * snr_hd(&rz, Direction::Downlink, scheme.association).ln_1p();
                }
                if scheme.links.ul() {
                    ul_acc += (1.0 - params.tau)
                        * snr_hd(&rz, Direction::Uplink, scheme.association).ln_1p();
                }
            }
        }
    }
    let n = n_fading as f64;
    Ok(PatternOutcome {
        ul: ul_acc / n,
        dl: dl_acc / n,
    })
}

/// Spatial-average rates under `scheme`. Worker threads are capped by [`THREADS_ENV`].
pub fn estimate_rate(
    params: &NormalizedParams,
    scheme: Scheme,
    budget: Budget,
    seed: u64,
) -> Result<RateReport, McError> {
    estimate_rate_with_threads(params, scheme, budget, seed, configured_threads())
}

/// As [`estimate_rate`] with an explicit thread count (`None` uses the global pool).
pub fn estimate_rate_with_threads(
    params: &NormalizedParams,
    scheme: Scheme,
    budget: Budget,
    seed: u64,
    threads: Option<usize>,
) -> Result<RateReport, McError> {
    if budget.n_spatial == 0 || budget.n_fading == 0 {
        return Err(McError::InvalidBudget(format!(
            "{} x {} realizations",
            budget.n_spatial, budget.n_fading
        )));
    }
    scheme.validate(params)?;
    let outcomes: Vec<PatternOutcome> = run_in_pool(threads, || {
        (0..budget.n_spatial as u64)
            .into_par_iter()
            .map(|k| simulate_pattern(params, &scheme, budget.n_fading, seed, k))
            .collect::<Result<Vec<_>, _>>()
    })??;

    let wrap = |xs: Vec<f64>| {
        let (mean, std_error) = mean_and_stderr(&xs);
        RateEstimate {
            mean,
            std_error,
            n_spatial: budget.n_spatial,
            n_fading: budget.n_fading,
            scheme,
            seed,
        }
    };
    let ul = scheme
        .links
        .ul()
        .then(|| wrap(outcomes.iter().map(|o| o.ul).collect()));
    let dl = scheme
        .links
        .dl()
        .then(|| wrap(outcomes.iter().map(|o| o.dl).collect()));
    let sum = (scheme.links == Links::Both).then(|| wrap(outcomes.iter().map(|o| o.ul + o.dl).collect()));
    Ok(RateReport { ul, dl, sum })
}

/// Parameter swept by [`sweep`]. Power values are in dBm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    SigmaLiDbm,
    PuDbm,
    PbDbm,
    PDl,
    Radius,
    Lambda,
}

impl SweepVariable {
    pub fn key(&self) -> &'static str {
        match self {
            SweepVariable::SigmaLiDbm => "sigma_li_dbm",
            SweepVariable::PuDbm => "p_u_dbm",
            SweepVariable::PbDbm => "p_b_dbm",
            SweepVariable::PDl => "p_dl",
            SweepVariable::Radius => "radius",
            SweepVariable::Lambda => "lambda",
        }
    }

    /// Normalized parameters with this variable set to `value`.
    ///
    /// `p_dl` may take the endpoints 0 and 1 here (all RRHs UL or all DL), which a
    /// configuration file rejects.
    pub fn apply(&self, base: &SystemParams, value: f64) -> Result<NormalizedParams, ConfigError> {
        let mut p = base.clone();
        match self {
            SweepVariable::SigmaLiDbm => p.sigma_li_dbm = value,
            SweepVariable::PuDbm => p.p_u_dbm = value,
            SweepVariable::PbDbm => p.p_b_dbm = value,
            SweepVariable::Radius => p.radius = value,
            SweepVariable::Lambda => p.lambda = value,
            SweepVariable::PDl => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ConfigError::Constraint {
                        key: "p_dl".into(),
                        reason: "must lie in [0, 1] in a sweep".into(),
                    });
                }
                p.validate()?;
                let mut n = normalize(&p);
                n.p_dl = value;
                return Ok(n);
            }
        }
        p.validate()?;
        Ok(normalize(&p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub report: RateReport,
}

/// One estimate per grid value, all with the same seed. Every grid point therefore sees
/// the same random streams, which gives common random numbers wherever the swept
/// variable does not change how many draws a realization consumes.
pub fn sweep(
    base: &SystemParams,
    scheme: Scheme,
    variable: SweepVariable,
    grid: &[f64],
    budget: Budget,
    seed: u64,
) -> Result<Vec<SweepPoint>, McError> {
    check_grid(grid)?;
    grid.iter()
        .map(|&value| {
            let params = variable.apply(base, value)?;
            Ok(SweepPoint {
                value,
                report: estimate_rate(&params, scheme, budget, seed)?,
            })
        })
        .collect()
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<(), McError> {
    if grid.is_empty() {
        return Err(McError::InvalidGrid("empty".into()));
    }
    let up = grid.windows(2).all(|w| w[0] < w[1]);
    let down = grid.windows(2).all(|w| w[0] > w[1]);
    if !(up || down) || grid.iter().any(|v| v.is_nan()) {
        return Err(McError::InvalidGrid("values must be strictly monotone".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemParams;

    fn base() -> NormalizedParams {
        let mut p = SystemParams::reference();
        p.radius = 100.0;
        normalize(&p)
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>());
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn zero_budget_is_rejected() {
        let e = estimate_rate(&base(), Scheme::new(Association::Sra, Combiner::Zf, Duplex::Full), Budget::new(0, 5), 1);
        assert!(matches!(e, Err(McError::InvalidBudget(_))));
    }

    #[test]
    fn zf_needs_two_antennas() {
        let mut p = base();
        p.m_antennas = 1;
        let e = estimate_rate(&p, Scheme::new(Association::Sra, Combiner::Zf, Duplex::Full), Budget::new(2, 2), 1);
        assert!(matches!(e, Err(McError::InvalidScheme(_))));
    }

    #[test]
    fn deterministic_across_threads() {
        let p = base();
        let s = Scheme::new(Association::Ara, Combiner::Zf, Duplex::Full);
        let a = estimate_rate_with_threads(&p, s, Budget::new(24, 3), 7, Some(1)).unwrap();
        let b = estimate_rate_with_threads(&p, s, Budget::new(24, 3), 7, Some(3)).unwrap();
        assert_eq!(a, b);
        let c = estimate_rate_with_threads(&p, s, Budget::new(24, 3), 8, Some(1)).unwrap();
        assert_ne!(a.sum_mean(), c.sum_mean());
    }

    #[test]
    fn user_power_off_kills_uplink_and_li() {
        let mut p = base();
        p.p_u = 0.0;
        let s = Scheme::new(Association::Sra, Combiner::Mrc, Duplex::Full);
        let r = estimate_rate(&p, s, Budget::new(50, 4), 3).unwrap();
        assert_eq!(r.ul_mean(), 0.0);
        let mut li_free = base();
        li_free.sigma_li = 0.0;
        let free = estimate_rate(&li_free, s, Budget::new(50, 4), 3).unwrap();
        assert_eq!(r.dl_mean(), free.dl_mean());
    }

    #[test]
    fn empty_network_has_zero_rates() {
        let mut p = base();
        p.lambda = 0.0;
        for a in [Association::Ara, Association::Sra] {
            let r = estimate_rate(&p, Scheme::new(a, Combiner::Mrc, Duplex::Full), Budget::new(20, 2), 1).unwrap();
            assert_eq!((r.ul_mean(), r.dl_mean()), (0.0, 0.0));
        }
    }

    #[test]
    fn half_duplex_ignores_li() {
        let mut a = base();
        let mut b = base();
        a.sigma_li = 0.0;
        b.sigma_li = 1e3;
        let s = Scheme::new(Association::Ara, Combiner::Mrc, Duplex::Half);
        assert_eq!(
            estimate_rate(&a, s, Budget::new(20, 3), 5).unwrap(),
            estimate_rate(&b, s, Budget::new(20, 3), 5).unwrap()
        );
    }

    #[test]
    fn links_select_outputs() {
        let s = Scheme::new(Association::Sra, Combiner::Mrc, Duplex::Full).links(Links::Downlink);
        let r = estimate_rate(&base(), s, Budget::new(10, 2), 1).unwrap();
        assert!(r.ul.is_none() && r.sum.is_none() && r.dl.is_some());
    }

    #[test]
    fn grid_must_be_monotone() {
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[1.0, 3.0, 2.0]).is_err());
        assert!(check_grid(&[3.0, 2.0]).is_ok());
        assert!(check_grid(&[1.0]).is_ok());
    }

    #[test]
    fn sweep_endpoints_of_dl_fraction() {
        let mut sp = SystemParams::reference();
        sp.radius = 100.0;
        let s = Scheme::new(Association::Sra, Combiner::Zf, Duplex::Full);
        let pts = sweep(&sp, s, SweepVariable::PDl, &[0.0, 1.0], Budget::new(20, 2), 9).unwrap();
        assert_eq!(pts[0].report.dl_mean(), 0.0);
        assert!(pts[0].report.ul_mean() > 0.0);
        assert_eq!(pts[1].report.ul_mean(), 0.0);
        assert!(pts[1].report.dl_mean() > 0.0);
    }
}
