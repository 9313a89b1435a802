use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;

use super::{Dataset, PointCloud};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Cuts a scene into `block_size` x `block_size` columns over its xy extent.
///
/// The grid is anchored at the scene's minimum corner. Each non-empty cell
/// yields one block of exactly `points_per_block` points, drawn without
/// replacement when the cell is large enough and with replacement otherwise.
pub fn split_blocks(
    scene: &PointCloud,
    block_size: f64,
    points_per_block: usize,
    seed: u64,
    num_classes: usize,
) -> Result<Dataset> {
    if !(block_size > 0.0) || !block_size.is_finite() {
        return Err(Error::InvalidArgument(format!("block_size must be > 0, got {block_size}")));
    }
    if points_per_block < 1 {
        return Err(Error::InvalidArgument("points_per_block must be >= 1".into()));
    }
    let (lo, hi) = scene.bounding_box();
    let cells = |axis: usize| (((hi[axis] - lo[axis]) / block_size).ceil() as usize).max(1);
    let (nx, ny) = (cells(0), cells(1));
    let mut buckets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, p) in scene.points().iter().enumerate() {
        let ix = (((p[0] - lo[0]) / block_size).floor() as usize).min(nx - 1);
        let iy = (((p[1] - lo[1]) / block_size).floor() as usize).min(ny - 1);
        buckets.entry((ix, iy)).or_default().push(i);
    }
    let mut blocks = Vec::with_capacity(buckets.len());
    for ((ix, iy), members) in buckets {
        let mut rng = stream(seed, &[ix as u64, iy as u64]);
        let picked: Vec<usize> = if members.len() >= points_per_block {
            let mut idx = sample(&mut rng, members.len(), points_per_block).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|k| members[k]).collect()
        } else {
            (0..points_per_block)
                .map(|_| members[rng.random_range(0..members.len())])
                .collect()
        };
        blocks.push(scene.gather(format!("{}_b{ix}_{iy}", scene.id()), &picked)?);
    }
    Dataset::train_only(blocks, num_classes)
}
