use std::borrow::Cow;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{Granularity, UnitId};
use crate::error::{Error, Result};
use crate::pcio::PointCloud;
use crate::superpoint::SuperPointPartition;

/// Clicks charged for one unit: 1 for a point or super-point, the configured
/// per-shape cost (default: its point count) for a shape.
pub fn click_cost(granularity: Granularity, unit_points: usize, shape_cost: Option<usize>) -> usize {
    match granularity {
        Granularity::Point | Granularity::SuperPoint => 1,
        Granularity::Shape => shape_cost.unwrap_or(unit_points),
    }
}

/// The selectable units of a dataset at one granularity, with the ground
/// truth the simulated annotator answers from.
///
/// Ground truth is read through [`UnitCatalog::labels`], which counts reads
/// of samples outside the candidate set (such as a held-out test split).
#[derive(Debug)]
pub struct UnitCatalog<'a> {
    granularity: Granularity,
    clouds: &'a [PointCloud],
    partitions: Option<&'a [SuperPointPartition]>,
    candidates: Vec<u32>,
    shape_cost: Option<usize>,
    outside_reads: AtomicUsize,
}

impl<'a> UnitCatalog<'a> {
    /// `candidates` lists the sample indices whose units may be selected.
    pub fn new(
        granularity: Granularity,
        clouds: &'a [PointCloud],
        partitions: Option<&'a [SuperPointPartition]>,
        candidates: Vec<usize>,
        shape_cost: Option<usize>,
    ) -> Result<Self> {
        if let Some(p) = partitions {
            if p.len() != clouds.len() {
                return Err(Error::LengthMismatch { what: "partitions", got: p.len(), expected: clouds.len() });
            }
            for (part, cloud) in p.iter().zip(clouds) {
                if part.len() != cloud.len() {
                    return Err(Error::LengthMismatch { what: "partition points", got: part.len(), expected: cloud.len() });
                }
            }
        } else if granularity == Granularity::SuperPoint {
            return Err(Error::InvalidArgument("super-point granularity needs partitions".into()));
        }
        if let Some(&s) = candidates.iter().find(|&&s| s >= clouds.len()) {
            return Err(Error::InvalidArgument(format!("candidate sample {s} out of range")));
        }
        if shape_cost == Some(0) {
            return Err(Error::InvalidArgument("shape cost must be >= 1".into()));
        }
        let mut candidates: Vec<u32> = candidates.into_iter().map(|s| s as u32).collect();
        candidates.sort_unstable();
        candidates.dedup();
        Ok(Self { granularity, clouds, partitions, candidates, shape_cost, outside_reads: AtomicUsize::new(0) })
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn clouds(&self) -> &'a [PointCloud] {
        self.clouds
    }

    /// Ground-truth labels of one sample.
    pub fn labels(&self, sample: usize) -> &'a [u32] {
        if !self.is_candidate_sample(sample) {
            self.outside_reads.fetch_add(1, Ordering::Relaxed);
        }
        self.clouds[sample].labels()
    }

    /// Label reads of non-candidate samples so far.
    pub fn outside_label_reads(&self) -> usize {
        self.outside_reads.load(Ordering::Relaxed)
    }

    pub fn partitions(&self) -> Option<&'a [SuperPointPartition]> {
        self.partitions
    }

    pub fn partition(&self, sample: usize) -> Option<&'a SuperPointPartition> {
        self.partitions.map(|p| &p[sample])
    }

    /// Candidate sample indices, ascending.
    pub fn samples(&self) -> impl Iterator<Item = usize> + '_ {
        self.candidates.iter().map(|&s| s as usize)
    }

    pub fn is_candidate_sample(&self, sample: usize) -> bool {
        self.candidates.binary_search(&(sample as u32)).is_ok()
    }

    pub fn units_in(&self, sample: usize) -> usize {
        match self.granularity {
            Granularity::Point => self.clouds[sample].len(),
            Granularity::SuperPoint => self.partitions.expect("checked in new")[sample].k(),
            Granularity::Shape => 1,
        }
    }

    /// All units in ascending id order.
    pub fn units(&self) -> impl Iterator<Item = UnitId> + '_ {
        self.samples().flat_map(move |s| (0..self.units_in(s)).map(move |i| UnitId::new(s, i)))
    }

    pub fn unit_count(&self) -> usize {
        self.samples().map(|s| self.units_in(s)).sum()
    }

    /// Points annotated under the candidate samples: the click count of
    /// labelling everything point by point.
    pub fn total_points(&self) -> usize {
        self.samples().map(|s| self.clouds[s].len()).sum()
    }

    pub fn check(&self, unit: UnitId) -> Result<()> {
        let s = unit.sample as usize;
        if !self.is_candidate_sample(s) || unit.index as usize >= self.units_in(s) {
            return Err(Error::InvalidArgument(format!("unit {unit} is not a {} unit of this pool", self.granularity)));
        }
        Ok(())
    }

    /// Point indices covered by a unit.
    pub fn members(&self, unit: UnitId) -> Cow<'a, [u32]> {
        let s = unit.sample as usize;
        match self.granularity {
            Granularity::Point => Cow::Owned(vec![unit.index]),
            Granularity::SuperPoint => Cow::Borrowed(self.partitions.expect("checked in new")[s].members(unit.index as usize)),
            Granularity::Shape => Cow::Owned((0..self.clouds[s].len() as u32).collect()),
        }
    }

    pub fn cost(&self, unit: UnitId) -> usize {
        let points = match self.granularity {
            Granularity::Shape => self.clouds[unit.sample as usize].len(),
            _ => 1,
        };
        click_cost(self.granularity, points, self.shape_cost)
    }

    /// Smallest cost of any unit; the budget must cover at least this much.
    pub fn min_cost(&self) -> usize {
        match self.granularity {
            Granularity::Shape => self.samples().map(|s| self.cost(UnitId::new(s, 0))).min().unwrap_or(1),
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clouds() -> Vec<PointCloud> {
        (0..2)
            .map(|s| {
                let n = 3 + s;
                let pts = (0..n).map(|i| [i as f64, s as f64, 0.0]).collect();
                PointCloud::new(format!("s{s}"), pts, None, vec![1; n], None).unwrap()
            })
            .collect()
    }

    #[test]
    fn costs() {
        assert_eq!(click_cost(Granularity::SuperPoint, 37, None), 1);
        assert_eq!(click_cost(Granularity::Point, 1, None), 1);
        assert_eq!(click_cost(Granularity::Shape, 2048, None), 2048);
        assert_eq!(click_cost(Granularity::Shape, 2048, Some(10)), 10);
    }

    #[test]
    fn enumerates_units() {
        let c = clouds();
        let parts = vec![
            SuperPointPartition::from_assignment(vec![0, 0, 1]).unwrap(),
            SuperPointPartition::from_assignment(vec![0, 1, 1, 0]).unwrap(),
        ];
        let cat = UnitCatalog::new(Granularity::SuperPoint, &c, Some(&parts), vec![1], None).unwrap();
        assert_eq!(cat.units().collect::<Vec<_>>(), vec![UnitId::new(1, 0), UnitId::new(1, 1)]);
        assert_eq!(&*cat.members(UnitId::new(1, 1)), &[1, 2]);
        assert!(cat.check(UnitId::new(0, 0)).is_err());
        assert_eq!(cat.total_points(), 4);
        assert_eq!(cat.labels(1), &[1, 1, 1, 1]);
        assert_eq!(cat.outside_label_reads(), 0);
        cat.labels(0);
        assert_eq!(cat.outside_label_reads(), 1);
        let shapes = UnitCatalog::new(Granularity::Shape, &c, None, vec![0, 1], None).unwrap();
        assert_eq!(shapes.cost(UnitId::new(1, 0)), 4);
        assert_eq!(shapes.min_cost(), 3);
        assert!(UnitCatalog::new(Granularity::SuperPoint, &c, None, vec![0], None).is_err());
    }
}
