//! Feature cache: a raw little-endian `f64` array of N rows
//! `(l1, l2, l3, f1, f2, f3)`, no header.

use super::GeometricFeatureSet;
use crate::error::{Error, Result};

pub fn write_feature_cache(set: &GeometricFeatureSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(set.len() * 48);
    for (e, f) in set.eigenvalues.iter().zip(&set.features) {
        for v in e.iter().chain(f) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_feature_cache(bytes: &[u8], expected_points: usize) -> Result<GeometricFeatureSet> {
    if bytes.len() != expected_points * 48 {
        return Err(Error::Format(format!(
            "feature cache holds {} bytes, expected {} for {expected_points} points",
            bytes.len(),
            expected_points * 48
        )));
    }
    let mut eigenvalues = Vec::with_capacity(expected_points);
    let mut features = Vec::with_capacity(expected_points);
    for row in bytes.chunks_exact(48) {
        let v: Vec<f64> = row
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        eigenvalues.push([v[0], v[1], v[2]]);
        features.push([v[3], v[4], v[5]]);
    }
    Ok(GeometricFeatureSet { eigenvalues, features })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let set = GeometricFeatureSet {
            eigenvalues: vec![[3.0, 2.0, 1.0], [0.5, 0.0, 0.0]],
            features: vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], [1.0, 0.0, 0.0]],
        };
        let bytes = write_feature_cache(&set);
        assert_eq!(bytes.len(), 96);
        assert_eq!(read_feature_cache(&bytes, 2).unwrap(), set);
        assert!(read_feature_cache(&bytes, 3).is_err());
    }
}
