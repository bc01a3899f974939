use crate::sim::dataset::largest_remainder;
use crate::sim::Label;
use crate::{Error, Result};

use super::db::{centroid, RepresentationDb, RepresentationRecord};

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy farthest-point sample of `budget` vectors, in selection order.
///
/// Starts from the vector farthest from the centroid, then repeatedly adds the
/// vector whose distance to the selected set is largest. Ties go to the lower
/// index.
pub fn farthest_point(vectors: &[&[f64]], budget: usize) -> Vec<usize> {
    let n = vectors.len();
    if budget >= n {
        return (0..n).collect();
    }
    if budget == 0 {
        return vec![];
    }
    let width = vectors[0].len();
    let c = centroid(vectors.iter().copied(), width);
    let first = argmax((0..n).map(|i| dist2(vectors[i], &c)));
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = vectors.iter().map(|v| dist2(v, vectors[first])).collect();
    while chosen.len() < budget {
        let next = argmax((0..n).map(|i| if chosen.contains(&i) { f64::NEG_INFINITY } else { nearest[i] }));
        chosen.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist2(vectors[i], vectors[next]));
        }
    }
    chosen
}

/// First index of the maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Smallest pairwise Euclidean distance within `subset`; infinite below two
/// members.
pub fn spread(vectors: &[&[f64]], subset: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for (k, &i) in subset.iter().enumerate() {
        for &j in &subset[k + 1..] {
            best = best.min(dist2(vectors[i], vectors[j]).sqrt());
        }
    }
    best
}

/// Keeps at most `budget` characteristic records of a task and drops the rest.
///
/// Label groups share the budget in proportion to their size (largest
/// remainder); each group is thinned by [`farthest_point`]. Survivors keep
/// their insertion order. Returns the retained records.
pub fn select_characteristic(db: &mut RepresentationDb, task_id: &str, budget: usize) -> Result<Vec<RepresentationRecord>> {
    if budget == 0 {
        return Err(Error::invalid("retention budget must be at least 1"));
    }
    let task = db.task_mut(task_id)?;
    let groups: Vec<(Label, Vec<usize>)> = [Label::Normal, Label::Anomalous, Label::Defect, Label::Unknown]
        .into_iter()
        .map(|l| (l, (0..task.records.len()).filter(|&i| task.records[i].label == l).collect::<Vec<_>>()))
        .filter(|(_, idx)| !idx.is_empty())
        .collect();
    let total = budget.min(task.records.len());
    let sizes: Vec<f64> = groups.iter().map(|(_, idx)| idx.len() as f64).collect();
    let shares = largest_remainder(&sizes, total);

    let mut keep = vec![false; task.records.len()];
    for ((_, idx), share) in groups.iter().zip(shares) {
        let vectors: Vec<&[f64]> = idx.iter().map(|&i| task.records[i].vector.as_slice()).collect();
        for local in farthest_point(&vectors, share) {
            keep[idx[local]] = true;
        }
    }
    let mut i = 0;
    task.records.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    task.budget = Some(budget);
    Ok(task.records.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::db::rec;
    use proptest::prelude::*;

    fn one_d(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn worked_example_keeps_extremes() {
        // centroid 3.25; 10 is farthest, then 0 is farthest from {10}
        let v = one_d(&[0.0, 1.0, 2.0, 10.0]);
        assert_eq!(farthest_point(&refs(&v), 2), vec![3, 0]);
    }

    #[test]
    fn budget_not_binding_keeps_all() {
        let v = one_d(&[5.0, 1.0, 3.0]);
        assert_eq!(farthest_point(&refs(&v), 3), vec![0, 1, 2]);
        assert_eq!(farthest_point(&refs(&v), 7), vec![0, 1, 2]);
    }

    #[test]
    fn identical_vectors_keep_lowest_index() {
        let v = vec![vec![1.0, 1.0]; 4];
        assert_eq!(farthest_point(&refs(&v), 1), vec![0]);
        assert_eq!(farthest_point(&refs(&v), 2), vec![0, 1]);
    }

    #[test]
    fn retention_splits_budget_by_label() {
        let mut db = RepresentationDb::new();
        for i in 0..6 {
            db.insert(rec("t", Label::Normal, vec![i as f64])).unwrap();
        }
        for i in 0..3 {
            db.insert(rec("t", Label::Anomalous, vec![100.0 + i as f64])).unwrap();
        }
        let kept = select_characteristic(&mut db, "t", 3).unwrap();
        // shares 2 normal, 1 anomalous; survivors stay in insertion order
        let xs: Vec<f64> = kept.iter().map(|r| r.vector[0]).collect();
        assert_eq!(xs, vec![0.0, 5.0, 100.0]);
        assert_eq!(db.task("t").unwrap().records.len(), 3);
        assert_eq!(db.task("t").unwrap().budget, Some(3));
        assert!(select_characteristic(&mut db, "missing", 3).is_err());
        assert!(select_characteristic(&mut db, "t", 0).is_err());
    }

    proptest! {
        #[test]
        fn retention_is_a_bounded_subset(xs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..20), b in 1usize..8) {
            let mut db = RepresentationDb::new();
            for (i, x) in xs.iter().enumerate() {
                let label = if i % 3 == 0 { Label::Anomalous } else { Label::Normal };
                db.insert(rec("t", label, x.clone())).unwrap();
            }
            let before = db.task("t").unwrap().records.clone();
            let kept = select_characteristic(&mut db, "t", b).unwrap();
            prop_assert!(kept.len() <= b);
            prop_assert_eq!(kept.len(), b.min(xs.len()));
            for r in &kept {
                prop_assert!(before.contains(r));
            }
        }

        #[test]
        fn reordering_only_changes_tie_breaks(xs in prop::collection::vec(-1000i32..1000, 2..10), b in 2usize..4) {
            // Ties may pick different members, never a worse spread.
            let pts: Vec<Vec<f64>> = xs.into_iter().map(|x| vec![x as f64]).collect();
            let mut rev = pts.clone();
            rev.reverse();
            let quality = |v: &[Vec<f64>]| spread(&refs(v), &farthest_point(&refs(v), b));
            prop_assert_eq!(quality(&pts), quality(&rev));
        }
    }
}
