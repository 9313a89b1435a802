use crate::error::{Error, Result};

/// A disjoint cover of a sample's points by `K` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperPointPartition {
    assignment: Vec<u32>,
    members: Vec<Vec<u32>>,
}

impl SuperPointPartition {
    /// Validates that cluster ids are exactly `0..K`, each used at least once.
    pub fn from_assignment(assignment: Vec<u32>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidArgument("empty partition".into()));
        }
        let k = assignment.iter().max().map_or(0, |&m| m as usize + 1);
        let mut members = vec![Vec::new(); k];
        for (i, &c) in assignment.iter().enumerate() {
            members[c as usize].push(i as u32);
        }
        if let Some(c) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!("cluster {c} is empty")));
        }
        Ok(Self { assignment, members })
    }

    /// Builds a partition from member lists, numbering clusters by their
    /// smallest point index.
    pub(crate) fn from_members(n: usize, mut clusters: Vec<Vec<u32>>) -> Self {
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort_unstable_by_key(|c| c[0]);
        let mut assignment = vec![0u32; n];
        for (id, c) in clusters.iter().enumerate() {
            for &i in c {
                assignment[i as usize] = id as u32;
            }
        }
        Self { assignment, members: clusters }
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn cluster_of(&self, point: usize) -> usize {
        self.assignment[point] as usize
    }

    pub fn members(&self, cluster: usize) -> &[u32] {
        &self.members[cluster]
    }

    pub fn clusters(&self) -> impl Iterator<Item = &[u32]> {
        self.members.iter().map(Vec::as_slice)
    }
}

/// One cluster index per line.
pub fn write_partition(p: &SuperPointPartition) -> String {
    let mut s = String::with_capacity(p.len() * 4);
    for c in p.assignment() {
        s.push_str(&c.to_string());
        s.push('\n');
    }
    s
}

pub fn read_partition(content: &str, expected_points: usize) -> Result<SuperPointPartition> {
    let assignment = content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<u32>()
                .map_err(|e| Error::Format(format!("partition line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    if assignment.len() != expected_points {
        return Err(Error::LengthMismatch {
            what: "partition",
            got: assignment.len(),
            expected: expected_points,
        });
    }
    SuperPointPartition::from_assignment(assignment)
}
