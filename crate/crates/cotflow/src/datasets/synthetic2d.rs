//! The four 2D benchmark joints on Y = U = R.
//!
//! Generators mirror the usual toy-dataset constructions: moons and circles
//! as noisy parametric curves with linspaced angles, the swissroll as the
//! (x, z) coordinates of the 3D roll rescaled by 1/12, and the checkerboard
//! as uniform mass on the 8 black cells of a 4x4 board over [−2, 2]². The
//! sample's first coordinate is the horizontal axis u, the second is the
//! vertical conditioning axis y; atoms are stored (y, u).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Synthetic2D {
    Checkerboard,
    Moons,
    Circles,
    Swissroll,
}

impl Synthetic2D {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "checkerboard" => Ok(Self::Checkerboard),
            "moons" => Ok(Self::Moons),
            "circles" => Ok(Self::Circles),
            "swissroll" => Ok(Self::Swissroll),
            other => Err(Error::InvalidConfig(format!("unknown 2d dataset '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Checkerboard => "checkerboard",
            Self::Moons => "moons",
            Self::Circles => "circles",
            Self::Swissroll => "swissroll",
        }
    }

    pub const ALL: [Synthetic2D; 4] =
        [Self::Checkerboard, Self::Moons, Self::Circles, Self::Swissroll];
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Synthetic2DSpec {
    pub name: Synthetic2D,
    pub n: usize,
    pub seed: u64,
}

/// Draw `spec.n` joint samples; deterministic in the seed. Column layout of
/// the returned measure is (y, u) with d_y = d_u = 1.
pub fn sample_2d<F: Scalar>(spec: &Synthetic2DSpec) -> Result<DiscreteMeasure<F>> {
    if spec.n == 0 {
        return Err(Error::InvalidConfig("dataset size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // (horizontal u, vertical y) pairs
    let hv: Vec<(f64, f64)> = match spec.name {
        Synthetic2D::Moons => moons(spec.n, &mut rng),
        Synthetic2D::Circles => circles(spec.n, &mut rng),
        Synthetic2D::Swissroll => swissroll(spec.n, &mut rng),
        Synthetic2D::Checkerboard => checkerboard(spec.n, &mut rng),
    };
    let mut pts = Array2::zeros((spec.n, 2));
    for (i, &(h, v)) in hv.iter().enumerate() {
        pts[[i, 0]] = F::cast(v);
        pts[[i, 1]] = F::cast(h);
    }
    DiscreteMeasure::uniform(pts, 1, 1)
}

fn linspace(a: f64, b: f64, n: usize, endpoint: bool) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![a];
    }
    let denom = if endpoint { (n - 1) as f64 } else { n as f64 };
    (0..n).map(|i| a + (b - a) * i as f64 / denom).collect()
}

fn moons(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let n_out = n / 2;
    let n_in = n - n_out;
    let noise = 0.05;
    let mut pts = Vec::with_capacity(n);
    for t in linspace(0.0, std::f64::consts::PI, n_out, true) {
        pts.push((t.cos(), t.sin()));
    }
    for t in linspace(0.0, std::f64::consts::PI, n_in, true) {
        pts.push((1.0 - t.cos(), 1.0 - t.sin() - 0.5));
    }
    // fixed standardization constants; the raw cloud has mean (0.5, 0.25)
    let (mh, mv) = (0.5, 0.25);
    let (sh, sv) = (0.75, 0.25);
    pts.iter()
        .map(|&(h, v)| {
            let h = h + noise * normal(rng);
            let v = v + noise * normal(rng);
            ((h - mh) / sh, (v - mv) / sv)
        })
        .collect()
}

fn circles(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let n_out = n / 2;
    let n_in = n - n_out;
    let factor = 0.5;
    let noise = 0.05;
    let tau = 2.0 * std::f64::consts::PI;
    let mut pts = Vec::with_capacity(n);
    for t in linspace(0.0, tau, n_out, false) {
        pts.push((t.cos(), t.sin()));
    }
    for t in linspace(0.0, tau, n_in, false) {
        pts.push((factor * t.cos(), factor * t.sin()));
    }
    pts.iter()
        .map(|&(h, v)| (h + noise * normal(rng), v + noise * normal(rng)))
        .collect()
}

fn swissroll(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let noise = 0.75;
    let rescale = 12.0;
    (0..n)
        .map(|_| {
            let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * rng.random_range(0.0..1.0));
            let h = t * t.cos() + noise * normal(rng);
            let v = t * t.sin() + noise * normal(rng);
            (h / rescale, v / rescale)
        })
        .collect()
}

fn checkerboard(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    // black cells of a 4x4 board on [−2, 2]²: (i + j) even
    let cells: Vec<(f64, f64)> = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .filter(|(i, j)| (i + j) % 2 == 0)
        .map(|(i, j)| (-2.0 + i as f64, -2.0 + j as f64))
        .collect();
    (0..n)
        .map(|_| {
            let (cx, cy) = cells[rng.random_range(0..cells.len())];
            (cx + rng.random_range(0.0..1.0), cy + rng.random_range(0.0..1.0))
        })
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    f64::standard_normal(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: Synthetic2D, n: usize, seed: u64) -> Synthetic2DSpec {
        Synthetic2DSpec { name, n, seed }
    }

    #[test]
    fn same_seed_gives_identical_point_sets() {
        for name in Synthetic2D::ALL {
            let a: DiscreteMeasure<f64> = sample_2d(&spec(name, 100, 7)).unwrap();
            let b: DiscreteMeasure<f64> = sample_2d(&spec(name, 100, 7)).unwrap();
            assert_eq!(a.points(), b.points(), "{name:?}");
            let c: DiscreteMeasure<f64> = sample_2d(&spec(name, 100, 8)).unwrap();
            assert_ne!(a.points(), c.points(), "{name:?}");
        }
    }

    #[test]
    fn circles_stay_inside_the_two_annuli() {
        let m: DiscreteMeasure<f64> = sample_2d(&spec(Synthetic2D::Circles, 500, 3)).unwrap();
        for i in 0..m.len() {
            let u = m.u(i)[0];
            let y = m.y(i)[0];
            let r = (u * u + y * y).sqrt();
            let near_outer = (r - 1.0).abs() <= 0.25;
            let near_inner = (r - 0.5).abs() <= 0.25;
            assert!(near_outer || near_inner, "radius {r} outside both annuli");
        }
    }

    #[test]
    fn swissroll_respects_the_rescaled_envelope() {
        let m: DiscreteMeasure<f64> = sample_2d(&spec(Synthetic2D::Swissroll, 2000, 4)).unwrap();
        for x in m.points().iter() {
            assert!(x.abs() <= 2.0, "coordinate {x} outside the rolled envelope");
            assert!(x.abs() <= 15.0);
        }
    }

    #[test]
    fn checkerboard_occupies_only_black_cells() {
        let m: DiscreteMeasure<f64> = sample_2d(&spec(Synthetic2D::Checkerboard, 1000, 5)).unwrap();
        for k in 0..m.len() {
            let u = m.u(k)[0];
            let y = m.y(k)[0];
            assert!((-2.0..2.0).contains(&u) && (-2.0..2.0).contains(&y));
            let i = (u + 2.0).floor() as i64;
            let j = (y + 2.0).floor() as i64;
            assert_eq!((i + j) % 2, 0, "point ({u}, {y}) in a white cell");
        }
    }

    #[test]
    fn moons_standardization_centers_the_cloud() {
        // The scaling constants m = (0.5, 0.25), σ = (0.75, 0.25) are fixed;
        // m is the exact mean of the raw cloud, so the scaled cloud is
        // centered. Support stays inside the scaled crescent envelope.
        let m: DiscreteMeasure<f64> = sample_2d(&spec(Synthetic2D::Moons, 20_000, 6)).unwrap();
        let mean_u: f64 = m.u_block().column(0).sum() / m.len() as f64;
        let mean_y: f64 = m.y_block().column(0).sum() / m.len() as f64;
        assert!(mean_u.abs() < 0.03, "u mean {mean_u}");
        assert!(mean_y.abs() < 0.03, "y mean {mean_y}");
        for i in 0..m.len() {
            let u = m.u(i)[0];
            let y = m.y(i)[0];
            // raw h ∈ [−1, 2] ± 4 noise sd, raw v ∈ [−0.7, 1.2] ± 4 noise sd
            assert!((-2.4..=2.4).contains(&u), "u = {u} outside the scaled envelope");
            assert!((-4.8..=4.8).contains(&y), "y = {y} outside the scaled envelope");
        }
    }

    #[test]
    fn rejects_empty_request() {
        assert!(sample_2d::<f64>(&spec(Synthetic2D::Moons, 0, 0)).is_err());
        assert!(Synthetic2D::parse("spiral").is_err());
    }
}
