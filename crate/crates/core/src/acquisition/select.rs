use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::scores::{AcquisitionScore, Scorer};
use super::{oracle_label, LabelPool, UnitCatalog, UnitId};
use crate::error::{Error, Result};

/// Indices of `scores` by descending combined score, ties by ascending unit id.
pub fn rank_candidates(scores: &[AcquisitionScore]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b].combined.total_cmp(&scores[a].combined).then(scores[a].unit.cmp(&scores[b].unit))
    });
    order
}

/// Labels up to `n_query` units from `ranked`, skipping labelled units and
/// units whose cost exceeds the remaining budget.
fn take_affordable(
    ranked: impl Iterator<Item = UnitId>,
    n_query: usize,
    pool: &mut LabelPool,
    catalog: &UnitCatalog,
) -> Result<Vec<UnitId>> {
    let mut picked = Vec::new();
    for unit in ranked {
        if picked.len() == n_query || pool.remaining() == 0 {
            break;
        }
        if pool.is_labeled(unit) || catalog.cost(unit) > pool.remaining() {
            continue;
        }
        oracle_label(pool, catalog, unit)?;
        picked.push(unit);
    }
    Ok(picked)
}

fn check_query(n_query: usize, pool: &LabelPool, catalog: &UnitCatalog) -> Result<()> {
    if n_query < 1 {
        return Err(Error::InvalidArgument("n_query must be >= 1".into()));
    }
    if catalog.unit_count() <= pool.units().filter(|u| catalog.check(*u).is_ok()).count() {
        return Err(Error::EmptyPool);
    }
    Ok(())
}

/// One-shot selection: the `n_query` best unlabelled units that fit the
/// remaining budget are sent to the annotator and added to `pool`.
pub fn select_query(
    scores: &[AcquisitionScore],
    n_query: usize,
    pool: &mut LabelPool,
    catalog: &UnitCatalog,
) -> Result<Vec<UnitId>> {
    check_query(n_query, pool, catalog)?;
    if scores.iter().all(|s| pool.is_labeled(s.unit)) {
        return Err(Error::EmptyPool);
    }
    let ranked: Vec<UnitId> = rank_candidates(scores).into_iter().map(|i| scores[i].unit).collect();
    take_affordable(ranked.into_iter(), n_query, pool, catalog)
}

/// Selection that re-scores after every pick, so each new unit's features
/// immediately lower the diversity of the remaining candidates.
pub fn select_greedy(
    scorer: &mut Scorer,
    n_query: usize,
    pool: &mut LabelPool,
    catalog: &UnitCatalog,
) -> Result<Vec<UnitId>> {
    check_query(n_query, pool, catalog)?;
    let index: std::collections::HashMap<UnitId, usize> = (0..scorer.len()).map(|k| (scorer.unit(k), k)).collect();
    let mut picked = Vec::new();
    while picked.len() < n_query && pool.remaining() > 0 {
        let scores = scorer.scores();
        let order = rank_candidates(&scores);
        let next = order
            .into_iter()
            .map(|i| scores[i].unit)
            .find(|u| !pool.is_labeled(*u) && catalog.cost(*u) <= pool.remaining());
        let Some(unit) = next else { break };
        oracle_label(pool, catalog, unit)?;
        scorer.mark_labeled(index[&unit]);
        picked.push(unit);
    }
    Ok(picked)
}

/// Uniformly random unlabelled units that fit the budget.
pub fn select_random(
    n_query: usize,
    pool: &mut LabelPool,
    catalog: &UnitCatalog,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<UnitId>> {
    check_query(n_query, pool, catalog)?;
    let mut units: Vec<UnitId> = catalog.units().filter(|u| !pool.is_labeled(*u)).collect();
    units.shuffle(rng);
    take_affordable(units.into_iter(), n_query, pool, catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Granularity;
    use crate::pcio::PointCloud;
    use crate::superpoint::SuperPointPartition;

    fn score(unit: UnitId, combined: f64) -> AcquisitionScore {
        AcquisitionScore { unit, d: 0.0, e: 0.0, s: 0.0, combined, raw: [0.0; 3] }
    }

    #[test]
    fn top_scores_with_budget_truncation() {
        let pts: Vec<[f64; 3]> = (0..6).map(|i| [i as f64, 0.0, 0.0]).collect();
        let clouds = vec![PointCloud::new("a", pts, None, vec![0, 0, 1, 1, 2, 2], None).unwrap()];
        let parts = vec![SuperPointPartition::from_assignment(vec![0, 0, 1, 1, 2, 2]).unwrap()];
        let cat = UnitCatalog::new(Granularity::SuperPoint, &clouds, Some(&parts), vec![0], None).unwrap();
        let scores = vec![score(UnitId::new(0, 0), 0.9), score(UnitId::new(0, 1), 0.5), score(UnitId::new(0, 2), 0.7)];
        let mut pool = LabelPool::new(Granularity::SuperPoint, 10);
        let got = select_query(&scores, 2, &mut pool, &cat).unwrap();
        assert_eq!(got, vec![UnitId::new(0, 0), UnitId::new(0, 2)]);

        let mut tight = LabelPool::new(Granularity::SuperPoint, 1);
        assert_eq!(select_query(&scores, 5, &mut tight, &cat).unwrap().len(), 1);
        assert_eq!(tight.spent(), 1);

        let ties = vec![score(UnitId::new(0, 2), 0.5), score(UnitId::new(0, 1), 0.5)];
        assert_eq!(rank_candidates(&ties), vec![1, 0]);

        let mut full = LabelPool::new(Granularity::SuperPoint, 10);
        select_query(&scores, 3, &mut full, &cat).unwrap();
        assert!(matches!(select_query(&scores, 1, &mut full, &cat), Err(Error::EmptyPool)));
    }
}
