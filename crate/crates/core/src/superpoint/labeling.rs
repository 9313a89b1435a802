use super::partition::SuperPointPartition;
use crate::error::{Error, Result};
use crate::pcio::PointCloud;

/// What a simulated annotator reports for one super-point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLabel {
    /// Most frequent ground-truth class; ties go to the smallest class id.
    pub majority: u32,
    /// Members whose ground truth differs from `majority`.
    pub noise_count: usize,
    pub size: usize,
}

pub fn assign_majority_label(
    partition: &SuperPointPartition,
    cloud: &PointCloud,
    cluster: usize,
) -> Result<OracleLabel> {
    if partition.len() != cloud.len() {
        return Err(Error::LengthMismatch { what: "partition", got: partition.len(), expected: cloud.len() });
    }
    if cluster >= partition.k() {
        return Err(Error::InvalidArgument(format!("cluster {cluster} out of range (K = {})", partition.k())));
    }
    Ok(majority_of(partition.members(cluster).iter().map(|&i| cloud.labels()[i as usize])))
}

pub(crate) fn majority_of(labels: impl Iterator<Item = u32>) -> OracleLabel {
    let mut counts: Vec<usize> = Vec::new();
    let mut size = 0;
    for l in labels {
        let l = l as usize;
        if l >= counts.len() {
            counts.resize(l + 1, 0);
        }
        counts[l] += 1;
        size += 1;
    }
    let (majority, best) = counts
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (c, &n)| if n > acc.1 { (c, n) } else { acc });
    OracleLabel { majority: majority as u32, noise_count: size - best, size }
}

/// Fraction of points whose majority-vote label differs from their ground
/// truth, pooled over all samples.
pub fn noise_rate(samples: &[PointCloud], partitions: &[SuperPointPartition]) -> Result<f64> {
    if samples.len() != partitions.len() {
        return Err(Error::LengthMismatch { what: "partitions", got: partitions.len(), expected: samples.len() });
    }
    let (mut noisy, mut total) = (0usize, 0usize);
    for (cloud, part) in samples.iter().zip(partitions) {
        for c in 0..part.k() {
            noisy += assign_majority_label(part, cloud, c)?.noise_count;
        }
        total += cloud.len();
    }
    if total == 0 {
        return Err(Error::EmptyMembers);
    }
    Ok(noisy as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(labels: Vec<u32>) -> PointCloud {
        let pts = (0..labels.len()).map(|i| [i as f64, 0.0, 0.0]).collect();
        PointCloud::new("c", pts, None, labels, None).unwrap()
    }

    #[test]
    fn majority_and_noise() {
        let c = cloud(vec![0, 0, 0, 1, 2, 2, 2, 2, 2, 2]);
        let p = SuperPointPartition::from_assignment(vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 1]).unwrap();
        let a = assign_majority_label(&p, &c, 0).unwrap();
        assert_eq!((a.majority, a.noise_count, a.size), (0, 1, 4));
        assert_eq!(assign_majority_label(&p, &c, 1).unwrap().noise_count, 0);
        assert!((noise_rate(&[c], &[p]).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn tie_goes_to_smallest_class() {
        let c = cloud(vec![3, 1, 3, 1]);
        let p = SuperPointPartition::from_assignment(vec![0; 4]).unwrap();
        let a = assign_majority_label(&p, &c, 0).unwrap();
        assert_eq!((a.majority, a.noise_count), (1, 2));
    }
}
