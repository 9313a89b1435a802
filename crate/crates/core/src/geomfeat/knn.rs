use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::pcio::{Point3, PointCloud};

/// Exact k-nearest-neighbour lists (self excluded), sorted by ascending
/// distance with ties broken by lower point index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k: usize,
    stride: usize,
    neighbors: Vec<u32>,
    distances: Vec<f64>,
}

impl NeighborGraph {
    /// Requested k.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Entries per point, `min(k, N - 1)`.
    pub fn width(&self) -> usize {
        self.stride
    }

    pub fn len(&self) -> usize {
        if self.stride == 0 {
            0
        } else {
            self.neighbors.len() / self.stride
        }
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i * self.stride..(i + 1) * self.stride]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.stride..(i + 1) * self.stride]
    }
}

#[inline]
fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Clone, Copy, PartialEq)]
struct Cand(f64, u32);

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

const LEAF: usize = 8;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    fn build(points: &'a [Point3]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        tree.build_node(0, points.len());
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] == 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = (start + end) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a as usize][axis].total_cmp(&pts[b as usize][axis])
        });
        let value = pts[self.order[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    fn query(&self, node: usize, q: &Point3, skip: u32, k: usize, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i == skip {
                        continue;
                    }
                    let c = Cand(dist2(q, &self.points[i as usize]), i);
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.query(near, q, skip, k, heap);
                // Points equal to `value` may sit on either side, so equality
                // must still descend for exact tie-breaking.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().0 {
                    self.query(far, q, skip, k, heap);
                }
            }
        }
    }
}

/// Exact kNN graph over the cloud's coordinates.
pub fn knn(cloud: &PointCloud, k: usize) -> Result<NeighborGraph> {
    knn_points(cloud.points(), k)
}

pub(crate) fn knn_points(points: &[Point3], k: usize) -> Result<NeighborGraph> {
    if k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let stride = k.min(n - 1);
    let tree = KdTree::build(points);
    let mut neighbors = Vec::with_capacity(n * stride);
    let mut distances = Vec::with_capacity(n * stride);
    let mut heap = BinaryHeap::with_capacity(stride + 1);
    for (i, q) in points.iter().enumerate() {
        heap.clear();
        tree.query(0, q, i as u32, stride, &mut heap);
        let mut found: Vec<Cand> = heap.drain().collect();
        found.sort_unstable();
        for c in &found {
            neighbors.push(c.1);
            distances.push(c.0.sqrt());
        }
    }
    Ok(NeighborGraph { k, stride, neighbors, distances })
}
