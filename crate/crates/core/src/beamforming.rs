//! Beamformers and per-realization SINR/SNR evaluation.
//!
//! DL RRHs always use MRT toward the user. UL RRHs combine with MRC, or with ZF that
//! nulls the MRT-beamformed signal of one DL RRH.

use std::borrow::Cow;

use thiserror::Error;

use crate::channel::{inner, norm_sqr, path_loss, ChannelError, FadingDraw, C64};
use crate::config::{NormalizedParams, PowerSplit};
use crate::geometry::{nearest, PointPattern};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamError {
    #[error("beamformer input is the zero vector")]
    ZeroVector,
    #[error("ZF requires M > 1")]
    ZfNeedsMultipleAntennas,
    #[error("ZF projection of the desired channel vanished")]
    DegenerateProjection,
    #[error("no UL association")]
    NoUplink,
    #[error("fading draw lacks the cross channel between UL {ul} and DL {dl}")]
    MissingCross { ul: usize, dl: usize },
    #[error(transparent)]
    PathLoss(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Association {
    /// Every RRH in the disc serves the user.
    Ara,
    /// Only the nearest DL and the nearest UL RRH serve the user.
    Sra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combiner {
    Mrc,
    /// With SRA, nulls the single active DL RRH. With ARA, each UL RRH nulls its own
    /// nearest DL RRH and leaves the others.
    Zf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

/// How MRC/MRT interference through an explicit cross matrix is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MrcInterference {
    /// `|w_r† H w_t|²`.
    #[default]
    Coherent,
    /// `Σᵢ |w_r† H_{:,i}|² |w_{t,i}|²`, the per-column decomposition that the analytic
    /// SRA uplink rate is built on. It has the same mean as the coherent gain but a
    /// different law.
    ColumnSum,
}

/// `h/‖h‖`.
pub fn mrt(h: &[C64]) -> Result<Vec<C64>, BeamError> {
    let n = norm_sqr(h).sqrt();
    if !(n > 0.0) {
        return Err(BeamError::ZeroVector);
    }
    Ok(h.iter().map(|c| c / n).collect())
}

/// Unit combiner maximizing `|w†g|` subject to `w† h_cross = 0`: the normalized projection
/// of `g` onto the orthogonal complement of `h_cross`.
pub fn zf_receive(g: &[C64], h_cross: &[C64]) -> Result<Vec<C64>, BeamError> {
    if g.len() < 2 {
        return Err(BeamError::ZfNeedsMultipleAntennas);
    }
    let hc = norm_sqr(h_cross);
    if !(hc > 0.0) {
        return Err(BeamError::ZeroVector);
    }
    let coeff = inner(h_cross, g) / hc;
    let projected: Vec<C64> = g.iter().zip(h_cross).map(|(gi, hi)| gi - hi * coeff).collect();
    let n = norm_sqr(&projected).sqrt();
    if !(n > 1e-300) || n < 1e-12 * norm_sqr(g).sqrt() {
        return Err(BeamError::DegenerateProjection);
    }
    Ok(projected.into_iter().map(|c| c / n).collect())
}

/// Path losses of one point pattern, reusable across fading draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternGains {
    pub dl: Vec<f64>,
    pub ul: Vec<f64>,
    /// Row-major `n_ul × n_dl` UL–DL path losses, when requested.
    pub cross: Option<Vec<f64>>,
    /// Index of the DL RRH nearest to each UL RRH.
    pub nearest_dl_of_ul: Vec<Option<usize>>,
}

impl PatternGains {
    pub fn new(
        pattern: &PointPattern,
        params: &NormalizedParams,
        with_cross: bool,
    ) -> Result<Self, ChannelError> {
        let eps = params.epsilon;
        let a = params.alpha.value;
        let dl = pattern
            .dl_points
            .iter()
            .map(|p| path_loss(p.norm(), eps, a))
            .collect::<Result<Vec<_>, _>>()?;
        let ul = pattern
            .ul_points
            .iter()
            .map(|p| path_loss(p.norm(), eps, a))
            .collect::<Result<Vec<_>, _>>()?;
        let cross = if with_cross {
            let mut v = Vec::with_capacity(ul.len() * dl.len());
            for u in &pattern.ul_points {
                for d in &pattern.dl_points {
                    v.push(path_loss(u.distance(d), eps, a)?);
                }
            }
            Some(v)
        } else {
            None
        };
        let nearest_dl_of_ul = pattern
            .ul_points
            .iter()
            .map(|u| nearest(&pattern.dl_points, *u).map(|(i, _)| i))
            .collect();
        Ok(Self {
            dl,
            ul,
            cross,
            nearest_dl_of_ul,
        })
    }
}

/// A point pattern together with one fading draw and the parameters that weigh them.
#[derive(Debug, Clone)]
pub struct LinkRealization<'a> {
    pub pattern: &'a PointPattern,
    pub fading: &'a FadingDraw,
    pub params: &'a NormalizedParams,
    pub gains: Cow<'a, PatternGains>,
    /// Replaces the UL–DL RRH distance of the SRA pair when set.
    pub pair_distance: Option<f64>,
    pub mrc_interference: MrcInterference,
}

impl<'a> LinkRealization<'a> {
    pub fn new(
        pattern: &'a PointPattern,
        fading: &'a FadingDraw,
        params: &'a NormalizedParams,
    ) -> Result<Self, BeamError> {
        debug_assert_eq!(pattern.n_dl(), fading.n_dl());
        debug_assert_eq!(pattern.n_ul(), fading.n_ul());
        let with_cross = fading.cross_gains.is_some() || !fading.cross_matrices.is_empty();
        let gains = PatternGains::new(pattern, params, with_cross)?;
        Ok(Self {
            pattern,
            fading,
            params,
            gains: Cow::Owned(gains),
            pair_distance: None,
            mrc_interference: MrcInterference::Coherent,
        })
    }

    pub fn with_gains(
        pattern: &'a PointPattern,
        fading: &'a FadingDraw,
        params: &'a NormalizedParams,
        gains: &'a PatternGains,
    ) -> Self {
        Self {
            pattern,
            fading,
            params,
            gains: Cow::Borrowed(gains),
            pair_distance: None,
            mrc_interference: MrcInterference::Coherent,
        }
    }

    pub fn with_pair_distance(mut self, d: Option<f64>) -> Self {
        self.pair_distance = d;
        self
    }

    pub fn with_mrc_interference(mut self, mode: MrcInterference) -> Self {
        self.mrc_interference = mode;
        self
    }

    fn ara_dl_power(&self) -> f64 {
        match self.params.ara_power_split {
            PowerSplit::PerRrh => self.params.p_b,
            PowerSplit::Total if self.pattern.n_dl() > 0 => {
                self.params.p_b / self.pattern.n_dl() as f64
            }
            PowerSplit::Total => 0.0,
        }
    }

    fn li_term(&self) -> f64 {
        let v = self.params.p_u * self.fading.li_coeff.norm_sqr();
        if v.is_nan() {
            0.0
        } else {
            v
        }
    }

    fn dl_signal(&self, i: usize, power: f64) -> f64 {
        // |h†·mrt(h)|² = ‖h‖²
        power * self.gains.dl[i] * norm_sqr(&self.fading.dl_vectors[i])
    }

    fn cross_loss(&self, ul: usize, dl: usize) -> Result<f64, BeamError> {
        match &self.gains.cross {
            Some(c) => Ok(c[ul * self.pattern.n_dl() + dl]),
            None => Ok(path_loss(
                self.pattern.ul_points[ul].distance(&self.pattern.dl_points[dl]),
                self.params.epsilon,
                self.params.alpha.value,
            )?),
        }
    }

    /// Interference gain through `H^{ji}` toward `mrt(h_i)`, from the matrix if drawn
    /// (per [`MrcInterference`]), else the effective coherent gain.
    fn cross_gain(&self, ul: usize, dl: usize, w_r: &[C64]) -> Result<f64, BeamError> {
        if let Some(h) = self.fading.cross_matrix(ul, dl) {
            let w_t = mrt(&self.fading.dl_vectors[dl])?;
            return Ok(match self.mrc_interference {
                MrcInterference::Coherent => inner(w_r, &h.mul_vec(&w_t)).norm_sqr(),
                MrcInterference::ColumnSum => mrc_column_terms(w_r, h, &w_t),
            });
        }
        self.fading
            .cross_gain(ul, dl)
            .ok_or(BeamError::MissingCross { ul, dl })
    }

    /// `Σ_{i ≠ nulled} ℓ(d_ji)·gain_ji` for UL RRH `j`.
    fn ul_interference_row(&self, ul: usize, nulled: Option<usize>, w_r: &[C64]) -> Result<f64, BeamError> {
        let n_dl = self.pattern.n_dl();
        let (Some(losses), Some(gains)) = (&self.gains.cross, &self.fading.cross_gains) else {
            let mut total = 0.0;
            for i in (0..n_dl).filter(|&i| Some(i) != nulled) {
                total += self.cross_loss(ul, i)? * self.cross_gain(ul, i, w_r)?;
            }
            return Ok(total);
        };
        let row = ul * n_dl..(ul + 1) * n_dl;
        let mut total: f64 = losses[row.clone()].iter().zip(&gains[row]).map(|(l, g)| l * g).sum();
        // pairs with an explicit matrix replace their effective gain
        for (&(_, i), _) in self.fading.cross_matrices.range((ul, 0)..(ul + 1, 0)) {
            let loss = losses[ul * n_dl + i];
            total -= loss * gains[ul * n_dl + i];
            if Some(i) != nulled {
                total += loss * self.cross_gain(ul, i, w_r)?;
            }
        }
        if let Some(q) = nulled {
            if self.fading.cross_matrix(ul, q).is_none() {
                total -= losses[ul * n_dl + q] * gains[ul * n_dl + q];
            }
        }
        Ok(total.max(0.0))
    }

    /// `H^{ji} h_i`, the direction a ZF combiner at UL `j` must null.
    fn cross_direction(&self, ul: usize, dl: usize) -> Result<Vec<C64>, BeamError> {
        let h = self
            .fading
            .cross_matrix(ul, dl)
            .ok_or(BeamError::MissingCross { ul, dl })?;
        Ok(h.mul_vec(&self.fading.dl_vectors[dl]))
    }
}

/// ARA DL SINR: every DL RRH in the disc transmits to the user with MRT.
pub fn sinr_dl_ara(rz: &LinkRealization) -> f64 {
    let power = rz.ara_dl_power();
    let signal: f64 = (0..rz.pattern.n_dl()).map(|i| rz.dl_signal(i, power)).sum();
    signal / (rz.li_term() + 1.0)
}

/// SRA DL SINR: only the nearest DL RRH transmits; zero without one.
pub fn sinr_dl_sra(rz: &LinkRealization) -> f64 {
    match rz.pattern.nearest_dl() {
        Some((q, _)) => rz.dl_signal(q, rz.params.p_b) / (rz.li_term() + 1.0),
        None => 0.0,
    }
}

/// SRA UL SINR at the BBU for the nearest UL RRH `p`, interfered by the nearest DL RRH `q`.
///
/// ZF carries no interference term. Without a DL RRH there is nothing to null and ZF
/// reduces to MRC.
pub fn sinr_ul_sra(rz: &LinkRealization, combiner: Combiner) -> Result<f64, BeamError> {
    let m = rz.fading.m;
    if combiner == Combiner::Zf && m < 2 {
        return Err(BeamError::ZfNeedsMultipleAntennas);
    }
    let (p, _) = rz.pattern.nearest_ul().ok_or(BeamError::NoUplink)?;
    let g = &rz.fading.ul_vectors[p];
    let signal_scale = rz.params.p_u * rz.gains.ul[p];
    let Some((q, _)) = rz.pattern.nearest_dl() else {
        return Ok(signal_scale * norm_sqr(g));
    };
    match combiner {
        Combiner::Zf => {
            let w = zf_receive(g, &rz.cross_direction(p, q)?)?;
            Ok(signal_scale * inner(&w, g).norm_sqr())
        }
        Combiner::Mrc => {
            let w = mrt(g)?;
            let loss = match rz.pair_distance {
                Some(d) => path_loss(d, rz.params.epsilon, rz.params.alpha.value)?,
                None => rz.cross_loss(p, q)?,
            };
            let interference = rz.params.p_b * loss * rz.cross_gain(p, q, &w)?;
            Ok(signal_scale * norm_sqr(g) / (interference + 1.0))
        }
    }
}

/// ARA UL SINR: all UL RRHs combine (MRC, or ZF against their own nearest DL RRH) and the
/// BBU sums the outputs. The noise term is the unit noise of a unit-norm combiner.
pub fn sinr_ul_ara(rz: &LinkRealization, combiner: Combiner) -> Result<f64, BeamError> {
    let n_ul = rz.pattern.n_ul();
    if n_ul == 0 {
        return Err(BeamError::NoUplink);
    }
    if combiner == Combiner::Zf && rz.fading.m < 2 {
        return Err(BeamError::ZfNeedsMultipleAntennas);
    }
    let p_dl = rz.ara_dl_power();
    let mut signal = 0.0;
    let mut interference = 0.0;
    for j in 0..n_ul {
        let g = &rz.fading.ul_vectors[j];
        let nulled = match combiner {
            Combiner::Zf => rz.gains.nearest_dl_of_ul[j],
            Combiner::Mrc => None,
        };
        let w = match nulled {
            Some(q) => zf_receive(g, &rz.cross_direction(j, q)?)?,
            None => mrt(g)?,
        };
        signal += rz.params.p_u * rz.gains.ul[j] * inner(&w, g).norm_sqr();
        interference += p_dl * rz.ul_interference_row(j, nulled, &w)?;
    }
    Ok(signal / (interference + 1.0))
}

/// Half-duplex SNR: no LI and no UL–DL interference. UL uses MRC.
pub fn snr_hd(rz: &LinkRealization, direction: Direction, association: Association) -> f64 {
    let (gains, vectors, power, nearest_idx) = match direction {
        Direction::Downlink => (
            &rz.gains.dl,
            &rz.fading.dl_vectors,
            match association {
                Association::Ara => rz.ara_dl_power(),
                Association::Sra => rz.params.p_b,
            },
            rz.pattern.nearest_dl(),
        ),
        Direction::Uplink => (
            &rz.gains.ul,
            &rz.fading.ul_vectors,
            rz.params.p_u,
            rz.pattern.nearest_ul(),
        ),
    };
    match association {
        Association::Ara => gains
            .iter()
            .zip(vectors)
            .map(|(l, v)| power * l * norm_sqr(v))
            .sum(),
        Association::Sra => nearest_idx
            .map(|(k, _)| power * gains[k] * norm_sqr(&vectors[k]))
            .unwrap_or(0.0),
    }
}

/// `Σᵢ |w_r† H_{:,i}|² |w_{t,i}|²`: the diagonal part of `|w_r† H w_t|²`. The dropped
/// cross terms between columns average to zero but are not zero per draw.
pub fn mrc_column_terms(w_r: &[C64], h: &crate::channel::CMatrix, w_t: &[C64]) -> f64 {
    (0..h.dim())
        .map(|i| inner(w_r, &h.column(i)).norm_sqr() * w_t[i].norm_sqr())
        .sum()
}
