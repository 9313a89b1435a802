use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::{Granularity, UnitCatalog, UnitId};
use crate::error::{Error, Result};
use crate::superpoint::assign_majority_label;

/// First line of a pool file.
pub const POOL_HEADER: &str = "spal-pool v1";

/// What the annotator answered for one unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnitLabels {
    /// One class for every member point (a point or a super-point).
    Uniform(u32),
    /// One class per member point, in member order (a whole shape).
    PerPoint(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledUnit {
    pub cost: usize,
    pub labels: UnitLabels,
}

/// The ledger of labelled units, their click costs and the budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelPool {
    granularity: Granularity,
    budget: usize,
    spent: usize,
    labeled: BTreeMap<UnitId, LabeledUnit>,
    per_sample: BTreeMap<u32, usize>,
}

impl LabelPool {
    pub fn new(granularity: Granularity, budget: usize) -> Self {
        Self { granularity, budget, spent: 0, labeled: BTreeMap::new(), per_sample: BTreeMap::new() }
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn spent(&self) -> usize {
        self.spent
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.spent
    }

    pub fn len(&self) -> usize {
        self.labeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labeled.is_empty()
    }

    /// Raises or lowers the budget; it can never drop below what is spent.
    pub fn set_budget(&mut self, budget: usize) -> Result<()> {
        if budget < self.spent {
            return Err(Error::BudgetExceeded { cost: self.spent, remaining: budget });
        }
        self.budget = budget;
        Ok(())
    }

    pub fn is_labeled(&self, unit: UnitId) -> bool {
        self.labeled.contains_key(&unit)
    }

    pub fn get(&self, unit: UnitId) -> Option<&LabeledUnit> {
        self.labeled.get(&unit)
    }

    /// Labelled units in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (UnitId, &LabeledUnit)> {
        self.labeled.iter().map(|(u, l)| (*u, l))
    }

    pub fn units(&self) -> impl Iterator<Item = UnitId> + '_ {
        self.labeled.keys().copied()
    }

    /// Samples holding at least one labelled point, ascending.
    pub fn labeled_samples(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_sample.keys().map(|&s| s as usize)
    }

    pub fn sample_has_labels(&self, sample: usize) -> bool {
        self.per_sample.contains_key(&(sample as u32))
    }

    /// Adds a unit and charges its cost.
    pub fn record(&mut self, unit: UnitId, cost: usize, labels: UnitLabels) -> Result<()> {
        if self.labeled.contains_key(&unit) {
            return Err(Error::AlreadyLabeled(unit.to_string()));
        }
        if cost > self.remaining() {
            return Err(Error::BudgetExceeded { cost, remaining: self.remaining() });
        }
        self.spent += cost;
        self.labeled.insert(unit, LabeledUnit { cost, labels });
        *self.per_sample.entry(unit.sample).or_insert(0) += 1;
        Ok(())
    }

    /// Labelled units of one sample.
    pub fn units_in(&self, sample: usize) -> impl Iterator<Item = (UnitId, &LabeledUnit)> {
        let s = sample as u32;
        self.labeled.range(UnitId { sample: s, index: 0 }..=UnitId { sample: s, index: u32::MAX }).map(|(u, l)| (*u, l))
    }

    /// `(point, class)` training targets of one sample: each unit's answer
    /// broadcast to its member points, sorted by point.
    pub fn targets(&self, sample: usize, catalog: &UnitCatalog) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (unit, l) in self.units_in(sample) {
            let members = catalog.members(unit);
            match &l.labels {
                UnitLabels::Uniform(c) => out.extend(members.iter().map(|&i| (i, *c))),
                UnitLabels::PerPoint(v) => out.extend(members.iter().copied().zip(v.iter().copied())),
            }
        }
        out.sort_unstable();
        out
    }

    /// `(mislabelled points, labelled points)` against ground truth.
    pub fn label_noise(&self, catalog: &UnitCatalog) -> (usize, usize) {
        let (mut noisy, mut total) = (0, 0);
        for s in self.labeled_samples() {
            let gt = catalog.labels(s);
            for (i, c) in self.targets(s, catalog) {
                total += 1;
                if gt[i as usize] != c {
                    noisy += 1;
                }
            }
        }
        (noisy, total)
    }
}

/// Simulated annotator: answers `unit` from ground truth and charges its cost.
/// Points get their own class, super-points their majority class and shapes
/// every point's class.
pub fn oracle_label(pool: &mut LabelPool, catalog: &UnitCatalog, unit: UnitId) -> Result<usize> {
    if pool.granularity() != catalog.granularity() {
        return Err(Error::InvalidArgument(format!(
            "pool granularity {} differs from catalog granularity {}",
            pool.granularity(),
            catalog.granularity()
        )));
    }
    catalog.check(unit)?;
    if pool.is_labeled(unit) {
        return Err(Error::AlreadyLabeled(unit.to_string()));
    }
    let s = unit.sample as usize;
    let cloud = &catalog.clouds()[s];
    let gt = catalog.labels(s);
    let labels = match catalog.granularity() {
        Granularity::Point => UnitLabels::Uniform(gt[unit.index as usize]),
        Granularity::SuperPoint => {
            let part = catalog.partition(s).expect("super-point catalogs carry partitions");
            UnitLabels::Uniform(assign_majority_label(part, cloud, unit.index as usize)?.majority)
        }
        Granularity::Shape => UnitLabels::PerPoint(gt.to_vec()),
    };
    let cost = catalog.cost(unit);
    pool.record(unit, cost, labels)?;
    Ok(cost)
}

/// Versioned text form. `sample_ids[i]` names dataset sample `i`.
pub fn write_pool(pool: &LabelPool, sample_ids: &[&str]) -> String {
    let mut s = String::new();
    writeln!(s, "{POOL_HEADER}").unwrap();
    writeln!(s, "granularity {}", pool.granularity()).unwrap();
    writeln!(s, "budget {}", pool.budget()).unwrap();
    writeln!(s, "spent {}", pool.spent()).unwrap();
    for (u, l) in pool.iter() {
        write!(s, "unit {} {} {}", sample_ids[u.sample as usize], u.index, l.cost).unwrap();
        match &l.labels {
            UnitLabels::Uniform(c) => write!(s, " {c}").unwrap(),
            UnitLabels::PerPoint(v) => v.iter().for_each(|c| write!(s, " {c}").unwrap()),
        }
        s.push('\n');
    }
    s
}

pub fn read_pool(content: &str, sample_ids: &[&str]) -> Result<LabelPool> {
    let index: HashMap<&str, usize> = sample_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut lines = content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |n: usize, msg: &str| Error::Format(format!("pool line {}: {msg}", n + 1));
    match lines.next() {
        Some((_, l)) if l.trim() == POOL_HEADER => {}
        _ => return Err(Error::Format(format!("pool file must start with {POOL_HEADER:?}"))),
    }
    let mut field = |key: &str| -> Result<String> {
        let (n, l) = lines.next().ok_or_else(|| Error::Format(format!("pool file missing {key}")))?;
        let (k, v) = l.trim().split_once(' ').ok_or_else(|| bad(n, "expected key and value"))?;
        if k != key {
            return Err(bad(n, &format!("expected {key}, found {k}")));
        }
        Ok(v.trim().to_string())
    };
    let granularity: Granularity = field("granularity")?.parse()?;
    let budget: usize = field("budget")?.parse().map_err(|_| Error::Format("bad budget".into()))?;
    let spent: usize = field("spent")?.parse().map_err(|_| Error::Format("bad spent".into()))?;
    let mut pool = LabelPool::new(granularity, budget);
    for (n, l) in lines {
        let mut it = l.split_whitespace();
        if it.next() != Some("unit") {
            return Err(bad(n, "expected a unit record"));
        }
        let id = it.next().ok_or_else(|| bad(n, "missing sample id"))?;
        let sample = *index.get(id).ok_or_else(|| bad(n, &format!("unknown sample {id:?}")))?;
        let nums = it
            .map(|t| t.parse::<u64>().map_err(|_| bad(n, &format!("bad number {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if nums.len() < 3 {
            return Err(bad(n, "expected index, cost and labels"));
        }
        let labels: Vec<u32> = nums[2..].iter().map(|&c| c as u32).collect();
        let labels = match granularity {
            Granularity::Shape => UnitLabels::PerPoint(labels),
            _ if labels.len() == 1 => UnitLabels::Uniform(labels[0]),
            _ => return Err(bad(n, "point and super-point units carry one label")),
        };
        pool.record(UnitId::new(sample, nums[0] as usize), nums[1] as usize, labels)?;
    }
    if pool.spent() != spent {
        return Err(Error::Format(format!("pool header says {spent} clicks spent, units add up to {}", pool.spent())));
    }
    Ok(pool)
}
