use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pcio::{Point3, PointCloud};
use crate::rng::stream;

const MIN_DET: f64 = 0.1;

fn det3(t: &[[f64; 3]; 3]) -> f64 {
    t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) - t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0])
        + t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0])
}

/// `T = I + G` with `G_ij ~ N(0, g_std^2)`, redrawn until `det T > 0.1`.
pub fn deviation_matrix(g_std: f64, rng: &mut ChaCha8Rng) -> Result<[[f64; 3]; 3]> {
    if !(g_std >= 0.0) || !g_std.is_finite() {
        return Err(Error::InvalidArgument(format!("g_std must be finite and >= 0, got {g_std}")));
    }
    if g_std == 0.0 {
        return Ok([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }
    let normal = Normal::new(0.0, g_std).expect("valid std");
    loop {
        let mut t = [[0.0; 3]; 3];
        for (r, row) in t.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = normal.sample(rng) + if r == c { 1.0 } else { 0.0 };
            }
        }
        if det3(&t) > MIN_DET {
            return Ok(t);
        }
    }
}

/// Row vectors times `T`, then, with probability 1/2, negation of `mirror_axis`.
pub fn augment_points(
    points: &[Point3],
    g_std: f64,
    mirror_axis: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Point3>> {
    if let Some(a) = mirror_axis {
        if a > 2 {
            return Err(Error::InvalidArgument(format!("mirror axis {a} is not 0, 1 or 2")));
        }
    }
    let t = deviation_matrix(g_std, rng)?;
    let flip = mirror_axis.filter(|_| rng.random_bool(0.5));
    Ok(points
        .iter()
        .map(|p| {
            let mut q = [0.0; 3];
            for (j, qj) in q.iter_mut().enumerate() {
                *qj = p[0] * t[0][j] + p[1] * t[1][j] + p[2] * t[2][j];
            }
            if let Some(a) = flip {
                q[a] = -q[a];
            }
            q
        })
        .collect())
}

/// Augmented copy of `cloud`; labels and colors are unchanged.
pub fn augment(cloud: &PointCloud, g_std: f64, mirror_axis: Option<usize>, seed: u64) -> Result<PointCloud> {
    let pts = augment_points(cloud.points(), g_std, mirror_axis, &mut stream(seed, &[0x617567]))?;
    cloud.with_points(pts)
}
