//! Rayleigh fading, the residual loopback channel, and path loss.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("path loss is singular at distance 0 when epsilon = 0")]
    Singular,
    #[error("invalid path-loss input: distance {distance}, epsilon {epsilon}")]
    Domain { distance: f64, epsilon: f64 },
}

/// `ℓ(d) = 1/(ε + d^α)`.
pub fn path_loss(distance: f64, epsilon: f64, alpha: f64) -> Result<f64, ChannelError> {
    if !(distance >= 0.0 && epsilon >= 0.0) {
        return Err(ChannelError::Domain { distance, epsilon });
    }
    let denom = epsilon + distance.powf(alpha);
    if denom == 0.0 {
        return Err(ChannelError::Singular);
    }
    Ok(1.0 / denom)
}

/// One CN(0,1) sample: real and imaginary parts are N(0, 1/2).
pub fn draw_cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

pub fn draw_cn_vector<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<C64> {
    (0..m).map(|_| draw_cn(rng)).collect()
}

/// Residual LI coefficient `h_LI ~ CN(0, σ²_LI)`; exactly zero when `sigma_li = 0`.
///
/// A standard draw is consumed in every case so that the rest of the stream does not
/// depend on `sigma_li`.
pub fn draw_li<R: Rng + ?Sized>(sigma_li: f64, rng: &mut R) -> C64 {
    let unit = draw_cn(rng);
    if sigma_li == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        unit * sigma_li.sqrt()
    }
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Inner product `a†b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Dense square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self {
            dim,
            data: draw_cn_vector(dim * dim, rng),
        }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        Self {
            dim,
            data: rows.concat(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn column(&self, col: usize) -> Vec<C64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Which UL–DL cross channels a fading draw materializes.
///
/// Explicit matrices are drawn for `matrices` as `(ul index, dl index)` pairs. With
/// `effective_gains`, every other pair gets a scalar `|w_r† H w_t|²` drawn directly from
/// its law: for unit-norm beamformers chosen independently of `H`, that gain is Exp(1)
/// and independent across pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrossPlan {
    pub matrices: Vec<(usize, usize)>,
    pub effective_gains: bool,
}

impl CrossPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn all_matrices(n_ul: usize, n_dl: usize) -> Self {
        Self {
            matrices: (0..n_ul)
                .flat_map(|j| (0..n_dl).map(move |i| (j, i)))
                .collect(),
            effective_gains: false,
        }
    }
}

/// One small-scale fading realization for a point pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    pub m: usize,
    /// `h_i`, DL RRH to user.
    pub dl_vectors: Vec<Vec<C64>>,
    /// `g_j`, user to UL RRH.
    pub ul_vectors: Vec<Vec<C64>>,
    /// `H_ud^{ji}` keyed by `(j, i)`.
    pub cross_matrices: BTreeMap<(usize, usize), CMatrix>,
    /// Row-major `n_ul × n_dl` effective cross gains, if the plan asked for them.
    pub cross_gains: Option<Vec<f64>>,
    pub li_coeff: C64,
}

impl FadingDraw {
    /// Draw order: LI, DL vectors, UL vectors, listed matrices, effective gains.
    pub fn draw<R: Rng + ?Sized>(
        m: usize,
        n_dl: usize,
        n_ul: usize,
        sigma_li: f64,
        plan: &CrossPlan,
        rng: &mut R,
    ) -> Self {
        let li_coeff = draw_li(sigma_li, rng);
        let dl_vectors = (0..n_dl).map(|_| draw_cn_vector(m, rng)).collect();
        let ul_vectors = (0..n_ul).map(|_| draw_cn_vector(m, rng)).collect();
        let mut cross_matrices = BTreeMap::new();
        for &(j, i) in &plan.matrices {
            debug_assert!(j < n_ul && i < n_dl);
            cross_matrices.insert((j, i), CMatrix::random(m, rng));
        }
        let cross_gains = plan.effective_gains.then(|| {
            (0..n_ul * n_dl)
                .map(|_| Exp1.sample(rng))
                .collect::<Vec<f64>>()
        });
        Self {
            m,
            dl_vectors,
            ul_vectors,
            cross_matrices,
            cross_gains,
            li_coeff,
        }
    }

    pub fn n_dl(&self) -> usize {
        self.dl_vectors.len()
    }

    pub fn n_ul(&self) -> usize {
        self.ul_vectors.len()
    }

    pub fn cross_matrix(&self, ul: usize, dl: usize) -> Option<&CMatrix> {
        self.cross_matrices.get(&(ul, dl))
    }

    pub fn cross_gain(&self, ul: usize, dl: usize) -> Option<f64> {
        self.cross_gains
            .as_ref()
            .map(|g| g[ul * self.dl_vectors.len() + dl])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_values() {
        assert_eq!(path_loss(0.0, 1.0, 3.0).unwrap(), 1.0);
        assert_eq!(path_loss(2.0, 0.0, 3.0).unwrap(), 0.125);
        assert_eq!(path_loss(0.0, 0.0, 3.0), Err(ChannelError::Singular));
        assert!(path_loss(-1.0, 1.0, 3.0).is_err());
        let mut prev = f64::INFINITY;
        for d in 1..=100 {
            let l = path_loss(d as f64, 1.0, 3.5).unwrap();
            assert!(l < prev && l > 0.0);
            prev = l;
        }
    }

    #[test]
    fn cn_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut norm4 = 0.0;
        let mut first = 0.0;
        for _ in 0..n {
            let h = draw_cn_vector(4, &mut rng);
            norm4 += norm_sqr(&h);
            first += h[0].norm_sqr();
        }
        assert!((norm4 / n as f64 / 4.0 - 1.0).abs() < 0.01);
        assert!((first / n as f64 - 1.0).abs() < 0.01);
    }

    #[test]
    fn li_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        assert_eq!(draw_li(0.0, &mut rng), C64::new(0.0, 0.0));
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| draw_li(0.3, &mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean / 0.3 - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn li_draw_consumes_the_same_randomness() {
        let mut a = ChaCha8Rng::seed_from_u64(13);
        let mut b = ChaCha8Rng::seed_from_u64(13);
        draw_li(0.0, &mut a);
        draw_li(5.0, &mut b);
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn distinct_entries_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 100_000;
        let mut acc = C64::new(0.0, 0.0);
        for _ in 0..n {
            let h = draw_cn_vector(2, &mut rng);
            acc += h[0] * h[1].conj();
        }
        // each product has unit second moment, so the mean has std 1/√n
        assert!(acc.norm() / (n as f64) < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn matrix_vector_product() {
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let zero = C64::new(0.0, 0.0);
        let a = CMatrix::from_rows(&[vec![one, i], vec![zero, one]]);
        assert_eq!(a.mul_vec(&[one, one]), vec![one + i, one]);
        assert_eq!(a.column(1), vec![i, one]);
    }

    #[test]
    fn fading_shapes_follow_the_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let plan = CrossPlan {
            matrices: vec![(1, 0)],
            effective_gains: true,
        };
        let f = FadingDraw::draw(3, 2, 4, 0.1, &plan, &mut rng);
        assert_eq!(f.n_dl(), 2);
        assert_eq!(f.n_ul(), 4);
        assert!(f.dl_vectors.iter().chain(&f.ul_vectors).all(|v| v.len() == 3));
        assert!(f.cross_matrix(1, 0).is_some());
        assert!(f.cross_matrix(0, 0).is_none());
        assert_eq!(f.cross_gains.as_ref().unwrap().len(), 8);
        assert!(f.cross_gain(3, 1).unwrap() >= 0.0);

        let bare = FadingDraw::draw(3, 2, 4, 0.1, &CrossPlan::none(), &mut rng);
        assert!(bare.cross_matrices.is_empty() && bare.cross_gains.is_none());
    }
}
