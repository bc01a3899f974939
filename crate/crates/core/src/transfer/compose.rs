use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::sim::Label;
use crate::{Error, Result, RngSeed};

use super::db::{centroid, RepresentationDb, RepresentationRecord};

/// How much of a retraining set is borrowed from similar tasks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixPolicy {
    pub k_tasks: usize,
    /// Fraction of the composed set drawn from the database, in `[0, 1)`.
    pub mix_ratio: f64,
}

impl Default for MixPolicy {
    fn default() -> Self {
        MixPolicy {
            k_tasks: 1,
            mix_ratio: 0.5,
        }
    }
}

impl MixPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.mix_ratio) {
            return Err(Error::config(format!(
                "mix_ratio must lie in [0, 1) so that new samples remain, got {}",
                self.mix_ratio
            )));
        }
        Ok(())
    }

    /// `ceil(mix_ratio · N_total)` with `N_total = new / (1 − mix_ratio)`.
    ///
    /// A relative slack of 1e-9 absorbs representation error, so 0.3 of
    /// 7 / 0.7 gives 3 rather than 4.
    pub fn borrowed_count(&self, new: usize) -> usize {
        if self.k_tasks == 0 || self.mix_ratio == 0.0 {
            return 0;
        }
        let exact = self.mix_ratio * new as f64 / (1.0 - self.mix_ratio);
        (exact - 1e-9 * exact.max(1.0)).ceil().max(0.0) as usize
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("cosine of vectors with lengths {} and {}", a.len(), b.len())));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("zero-norm centroid has no direction to compare"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity of the two tasks' centroids, all labels pooled.
pub fn task_similarity(db: &RepresentationDb, task_a: &str, task_b: &str) -> Result<f64> {
    let (a, b) = (db.task(task_a)?, db.task(task_b)?);
    if a.code_size != b.code_size {
        return Err(Error::shape(format!(
            "tasks {task_a:?} and {task_b:?} have code sizes {} and {}",
            a.code_size, b.code_size
        )));
    }
    if a.records.is_empty() || b.records.is_empty() {
        return Err(Error::invalid("similarity needs two non-empty tasks"));
    }
    cosine(&a.centroid(), &b.centroid()).map_err(|e| Error::invalid(format!("similarity of {task_a:?} and {task_b:?}: {e}")))
}

/// A retraining set with one source tag per vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Composition {
    pub vectors: Vec<Vec<f64>>,
    /// Task each vector came from; new vectors carry the current task id.
    pub sources: Vec<String>,
    pub new_count: usize,
    pub borrowed: usize,
    /// Borrowed count the policy asked for.
    pub requested: usize,
    /// Tasks borrowed from, most similar first, with their similarity.
    pub donors: Vec<(String, f64)>,
    /// The stored records behind the borrowed vectors, in output order.
    pub borrowed_records: Vec<RepresentationRecord>,
}

impl Composition {
    pub fn shortfall(&self) -> usize {
        self.requested - self.borrowed
    }
}

/// Mixes `new_vectors` of `current_task` with normal records of the
/// `k_tasks` most similar other tasks.
///
/// Similarity is measured against the current task's stored records when it
/// has any, otherwise against the centroid of `new_vectors`. Tasks with a
/// different code size are not candidates. Borrowed records are a seeded
/// uniform draw without replacement; when the donors hold fewer normal
/// records than requested, all of them are used and the gap is reported as
/// [`Composition::shortfall`].
pub fn compose_training_set(
    db: &RepresentationDb,
    current_task: &str,
    new_vectors: &[Vec<f64>],
    policy: &MixPolicy,
    seed: RngSeed,
) -> Result<Composition> {
    policy.validate()?;
    let Some(first) = new_vectors.first() else {
        return Err(Error::invalid("composition needs at least one new vector"));
    };
    let width = first.len();
    if new_vectors.iter().any(|v| v.len() != width) {
        return Err(Error::shape("new vectors have differing lengths"));
    }
    let requested = policy.borrowed_count(new_vectors.len());
    let mut out = Composition {
        vectors: new_vectors.to_vec(),
        sources: vec![current_task.to_string(); new_vectors.len()],
        new_count: new_vectors.len(),
        borrowed: 0,
        requested,
        donors: vec![],
        borrowed_records: vec![],
    };
    if requested == 0 {
        return Ok(out);
    }

    let reference = match db.task(current_task) {
        Ok(t) if !t.records.is_empty() => {
            if t.code_size != width {
                return Err(Error::shape(format!(
                    "task {current_task:?} stores code size {}, new vectors have {width}",
                    t.code_size
                )));
            }
            t.centroid()
        }
        _ => centroid(new_vectors.iter().map(Vec::as_slice), width),
    };
    let mut ranked = vec![];
    for (id, task) in db.tasks() {
        if id == current_task || task.code_size != width || task.records.is_empty() {
            continue;
        }
        let sim = cosine(&reference, &task.centroid()).map_err(|e| Error::invalid(format!("similarity to {id:?}: {e}")))?;
        ranked.push((id.to_string(), sim));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(policy.k_tasks);

    let pool: Vec<&RepresentationRecord> = ranked
        .iter()
        .flat_map(|(id, _)| {
            let task = db.task(id).expect("ranked tasks exist");
            task.records.iter().filter(|r| r.label == Label::Normal)
        })
        .collect();
    let take = requested.min(pool.len());
    let mut rng = seed.rng();
    for i in sample(&mut rng, pool.len(), take) {
        out.vectors.push(pool[i].vector.clone());
        out.sources.push(pool[i].task_id.clone());
        out.borrowed_records.push(pool[i].clone());
    }
    out.borrowed = take;
    out.donors = ranked;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::db::rec;

    fn db_with(tasks: &[(&str, Vec<f64>, usize)]) -> RepresentationDb {
        let mut db = RepresentationDb::new();
        for (id, v, n) in tasks {
            for i in 0..*n {
                let mut x = v.clone();
                x[0] += i as f64 * 1e-3;
                db.insert(rec(id, Label::Normal, x)).unwrap();
            }
            db.insert(rec(id, Label::Anomalous, v.iter().map(|x| x + 5.0).collect())).unwrap();
        }
        db
    }

    #[test]
    fn similarity_basics() {
        let db = db_with(&[("a", vec![1.0, 0.0], 1), ("b", vec![0.0, 1.0], 1), ("c", vec![1.0, 0.0], 1)]);
        assert!((task_similarity(&db, "a", "c").unwrap() - 1.0).abs() < 1e-12);
        let (ab, ba) = (task_similarity(&db, "a", "b").unwrap(), task_similarity(&db, "b", "a").unwrap());
        assert!((ab - ba).abs() < 1e-12);

        let mut db = RepresentationDb::new();
        db.insert(rec("x", Label::Normal, vec![1.0, 0.0])).unwrap();
        db.insert(rec("y", Label::Normal, vec![0.0, 1.0])).unwrap();
        db.insert(rec("z", Label::Normal, vec![0.0, 0.0])).unwrap();
        assert_eq!(task_similarity(&db, "x", "y").unwrap(), 0.0);
        assert!(task_similarity(&db, "x", "z").is_err());
        assert!(task_similarity(&db, "x", "nope").is_err());
    }

    #[test]
    fn borrowed_count_formula() {
        let p = |mix_ratio| MixPolicy { k_tasks: 1, mix_ratio };
        assert_eq!(p(0.5).borrowed_count(50), 50);
        assert_eq!(p(0.3).borrowed_count(7), 3);
        assert_eq!(p(0.25).borrowed_count(10), 4); // 3.33 rounds up
        assert_eq!(p(0.0).borrowed_count(10), 0);
        assert_eq!(MixPolicy { k_tasks: 0, mix_ratio: 0.9 }.borrowed_count(10), 0);
        assert!(p(1.0).validate().is_err());
    }

    #[test]
    fn fifty_new_half_mix_borrows_fifty_normals() {
        let db = db_with(&[("near", vec![1.0, 1.0], 80), ("far", vec![-1.0, 1.0], 80)]);
        let new: Vec<Vec<f64>> = (0..50).map(|i| vec![1.0, 1.0 + i as f64 * 1e-3]).collect();
        let c = compose_training_set(&db, "fresh", &new, &MixPolicy::default(), RngSeed(3)).unwrap();
        assert_eq!((c.vectors.len(), c.borrowed, c.shortfall()), (100, 50, 0));
        assert_eq!(c.donors[0].0, "near");
        assert!(c.sources[50..].iter().all(|s| s == "near"));
        let stored: Vec<&Vec<f64>> = db.task("near").unwrap().records.iter().filter(|r| r.label == Label::Normal).map(|r| &r.vector).collect();
        assert!(c.vectors[50..].iter().all(|v| stored.contains(&v)));
        assert_eq!(c, compose_training_set(&db, "fresh", &new, &MixPolicy::default(), RngSeed(3)).unwrap());
    }

    #[test]
    fn degenerate_policies_return_new_vectors() {
        let db = db_with(&[("a", vec![1.0, 1.0], 10)]);
        let new = vec![vec![1.0, 2.0]; 4];
        for policy in [MixPolicy { k_tasks: 0, mix_ratio: 0.5 }, MixPolicy { k_tasks: 3, mix_ratio: 0.0 }] {
            let c = compose_training_set(&db, "b", &new, &policy, RngSeed(0)).unwrap();
            assert_eq!(c.vectors, new);
            assert_eq!(c.requested, 0);
        }
        assert!(compose_training_set(&db, "b", &[], &MixPolicy::default(), RngSeed(0)).is_err());
        assert!(compose_training_set(&db, "b", &new, &MixPolicy { k_tasks: 1, mix_ratio: 1.0 }, RngSeed(0)).is_err());
    }

    #[test]
    fn shortfall_is_reported() {
        let db = db_with(&[("a", vec![1.0, 1.0], 3)]);
        let new = vec![vec![1.0, 2.0]; 10];
        let c = compose_training_set(&db, "b", &new, &MixPolicy::default(), RngSeed(0)).unwrap();
        assert_eq!((c.requested, c.borrowed, c.shortfall()), (10, 3, 7));
    }
}
