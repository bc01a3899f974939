use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::Label;
use crate::{Error, Result};

/// One stored feature vector with its meta information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationRecord {
    pub task_id: String,
    pub label: Label,
    pub sensor: String,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub vector: Vec<f64>,
}

impl RepresentationRecord {
    pub fn code_size(&self) -> usize {
        self.vector.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.task_id.is_empty() {
            return Err(Error::invalid("record task_id is empty"));
        }
        if self.vector.is_empty() {
            return Err(Error::invalid(format!("record of task {:?} has an empty vector", self.task_id)));
        }
        if let Some(v) = self.vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("record of task {:?} holds {v}", self.task_id)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaskStore {
    pub code_size: usize,
    /// Budget of the last retention pass, if any.
    pub budget: Option<usize>,
    pub records: Vec<RepresentationRecord>,
}

impl TaskStore {
    pub fn centroid(&self) -> Vec<f64> {
        centroid(self.records.iter().map(|r| r.vector.as_slice()), self.code_size)
    }
}

/// Feature vectors grouped by task, in insertion order within each task.
///
/// Mutating operations take `&mut self`, so the borrow checker already gives
/// many readers or one writer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RepresentationDb {
    tasks: BTreeMap<String, TaskStore>,
}

impl RepresentationDb {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record to its task; the first record fixes the task's code size.
    pub fn insert(&mut self, record: RepresentationRecord) -> Result<()> {
        record.validate()?;
        match self.tasks.get_mut(&record.task_id) {
            Some(task) => {
                if task.code_size != record.code_size() {
                    return Err(Error::shape(format!(
                        "task {:?} stores code size {}, record has {}",
                        record.task_id,
                        task.code_size,
                        record.code_size()
                    )));
                }
                task.records.push(record);
            }
            None => {
                let store = TaskStore {
                    code_size: record.code_size(),
                    budget: None,
                    records: vec![],
                };
                self.tasks.entry(record.task_id.clone()).or_insert(store).records.push(record);
            }
        }
        Ok(())
    }

    pub fn task(&self, task_id: &str) -> Result<&TaskStore> {
        self.tasks
            .get(task_id)
            .ok_or_else(|| Error::invalid(format!("unknown task {task_id:?}")))
    }

    pub(crate) fn task_mut(&mut self, task_id: &str) -> Result<&mut TaskStore> {
        self.tasks
            .get_mut(task_id)
            .ok_or_else(|| Error::invalid(format!("unknown task {task_id:?}")))
    }

    /// Task ids in ascending order.
    pub fn task_ids(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(String::as_str)
    }

    pub fn tasks(&self) -> impl Iterator<Item = (&str, &TaskStore)> {
        self.tasks.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn record_count(&self) -> usize {
        self.tasks.values().map(|t| t.records.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// All records, task by task.
    pub fn records(&self) -> impl Iterator<Item = &RepresentationRecord> {
        self.tasks.values().flat_map(|t| t.records.iter())
    }
}

pub(crate) fn centroid<'a>(vectors: impl Iterator<Item = &'a [f64]>, width: usize) -> Vec<f64> {
    let mut sum = vec![0.0; width];
    let mut n = 0usize;
    for v in vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    sum
}

#[cfg(test)]
pub(crate) fn rec(task: &str, label: Label, vector: Vec<f64>) -> RepresentationRecord {
    RepresentationRecord {
        task_id: task.into(),
        label,
        sensor: "pressure".into(),
        timestamp: 1_700_000_000,
        vector,
    }
}
