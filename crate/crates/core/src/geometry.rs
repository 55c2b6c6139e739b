//! Poisson point patterns in a disc and the distance laws used by the analytic engine.
//!
//! The user sits at the origin. All distances are to the origin except the
//! UL–DL RRH pair distance.

use std::f64::consts::PI;
use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One spatial realization: DL and UL RRH positions inside the disc of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub dl_points: Vec<Point2>,
    pub ul_points: Vec<Point2>,
    pub radius: f64,
}

impl PointPattern {
    pub fn n_dl(&self) -> usize {
        self.dl_points.len()
    }

    pub fn n_ul(&self) -> usize {
        self.ul_points.len()
    }

    pub fn nearest_dl(&self) -> Option<(usize, f64)> {
        nearest(&self.dl_points, Point2::ORIGIN)
    }

    pub fn nearest_ul(&self) -> Option<(usize, f64)> {
        nearest(&self.ul_points, Point2::ORIGIN)
    }

    /// The sub-pattern holding only the nearest DL and the nearest UL RRH (if any).
    /// Single-RRH association quantities are identical on both patterns.
    pub fn nearest_only(&self) -> PointPattern {
        let pick = |pts: &[Point2]| -> Vec<Point2> {
            nearest(pts, Point2::ORIGIN)
                .map(|(i, _)| vec![pts[i]])
                .unwrap_or_default()
        };
        PointPattern {
            dl_points: pick(&self.dl_points),
            ul_points: pick(&self.ul_points),
            radius: self.radius,
        }
    }

    /// CSV rows `type,x,y` with `type ∈ {dl, ul}`, preceded by a header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "type,x,y")?;
        for p in &self.dl_points {
            writeln!(out, "dl,{:?},{:?}", p.x, p.y)?;
        }
        for p in &self.ul_points {
            writeln!(out, "ul,{:?},{:?}", p.x, p.y)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, radius: f64) -> io::Result<PointPattern> {
        let bad = |line: &str| io::Error::new(io::ErrorKind::InvalidData, format!("bad row `{line}`"));
        let mut pattern = PointPattern {
            dl_points: Vec::new(),
            ul_points: Vec::new(),
            radius,
        };
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "type,x,y" {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(kind), Some(x), Some(y), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(line));
            };
            let x: f64 = x.trim().parse().map_err(|_| bad(line))?;
            let y: f64 = y.trim().parse().map_err(|_| bad(line))?;
            match kind.trim() {
                "dl" => pattern.dl_points.push(Point2::new(x, y)),
                "ul" => pattern.ul_points.push(Point2::new(x, y)),
                _ => return Err(bad(line)),
            }
        }
        Ok(pattern)
    }
}

/// A point uniformly distributed on the disc of radius `radius` centred at the origin.
pub fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point2 {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point2::new(r * theta.cos(), r * theta.sin())
}

/// Homogeneous PPP of intensity `lambda` restricted to the disc.
pub fn sample_ppp_disc<R: Rng + ?Sized>(lambda: f64, radius: f64, rng: &mut R) -> Vec<Point2> {
    let mean = PI * lambda * radius * radius;
    if !(mean > 0.0) {
        return Vec::new();
    }
    let count = Poisson::new(mean)
        .expect("positive finite Poisson mean")
        .sample(rng) as usize;
    (0..count).map(|_| uniform_in_disc(radius, rng)).collect()
}

/// Independent Bernoulli(p) marking: marked points go to DL, the rest to UL.
pub fn thin<R: Rng + ?Sized>(
    points: &[Point2],
    p: f64,
    rng: &mut R,
) -> (Vec<Point2>, Vec<Point2>) {
    let mut dl = Vec::new();
    let mut ul = Vec::new();
    for &pt in points {
        if rng.random::<f64>() < p {
            dl.push(pt);
        } else {
            ul.push(pt);
        }
    }
    (dl, ul)
}

/// PPP in the disc thinned into DL (probability `p_dl`) and UL sets.
pub fn sample_pattern<R: Rng + ?Sized>(
    lambda: f64,
    p_dl: f64,
    radius: f64,
    rng: &mut R,
) -> PointPattern {
    let all = sample_ppp_disc(lambda, radius, rng);
    let (dl_points, ul_points) = thin(&all, p_dl, rng);
    PointPattern {
        dl_points,
        ul_points,
        radius,
    }
}

/// Index and distance of the point closest to `origin`; ties go to the lowest index.
/// `None` signals that there is no RRH of this type.
pub fn nearest(points: &[Point2], origin: Point2) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let d = p.distance(&origin);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best
}

/// Density of the distance from the disc centre to the nearest of `n` i.i.d. uniform
/// points: `(2n/r)(1 − (r/R)²)^{n−1}(r/R)²` on `[0, R]`, zero elsewhere.
pub fn nearest_distance_pdf_cond(r: f64, n: u32, radius: f64) -> f64 {
    if n == 0 || !(0.0..=radius).contains(&r) {
        return 0.0;
    }
    let u = (r / radius).powi(2);
    // (2n/r)·u written as 2n·r/R² to stay finite at r = 0
    2.0 * n as f64 * r / (radius * radius) * (1.0 - u).powi(n as i32 - 1)
}

/// Density of the distance between two independent uniform points in a disc of radius R.
pub fn pair_distance_pdf(r: f64, radius: f64) -> f64 {
    if !(r > 0.0 && r < 2.0 * radius) {
        return 0.0;
    }
    let x = r / (2.0 * radius);
    let shape = (2.0 / PI) * (x.acos() - x * (1.0 - x * x).sqrt());
    2.0 * r / (radius * radius) * shape.max(0.0)
}

/// Nearest-neighbour distance law of an infinite-plane PPP with intensity `density`:
/// `2πλ r e^{−πλr²}`.
pub fn nearest_distance_pdf_ppp(r: f64, density: f64) -> f64 {
    if r < 0.0 {
        return 0.0;
    }
    2.0 * PI * density * r * (-PI * density * r * r).exp()
}
