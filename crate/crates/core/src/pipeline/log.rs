use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Stage;
use crate::error::{Error, Result};
use crate::losses::LossComponents;

/// One JSON-lines training record: either an optimizer step or an evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    #[serde(rename = "L_p", default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<f64>,
    #[serde(rename = "L_s", default, skip_serializing_if = "Option::is_none")]
    pub occupancy: Option<f64>,
    #[serde(rename = "L_v", default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(rename = "L_m", default, skip_serializing_if = "Option::is_none")]
    pub coarse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_iou: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_iou: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub best: bool,
}

impl StepRecord {
    pub fn with_components(mut self, c: &LossComponents) -> Self {
        self.partial = Some(c.partial);
        self.occupancy = Some(c.occupancy);
        self.variance = Some(c.variance);
        self.coarse = Some(c.coarse);
        self.total = Some(c.total);
        self
    }

    pub fn is_eval(&self) -> bool {
        self.val_iou.is_some() || self.partial_iou.is_some()
    }
}

/// Collects training records and optionally mirrors them to a JSON-lines file.
#[derive(Default)]
pub struct RunLog {
    pub records: Vec<StepRecord>,
    sink: Option<(PathBuf, BufWriter<File>)>,
    /// Where to drop the last good parameters if training diverges.
    pub snapshot_dir: Option<PathBuf>,
    category: Option<String>,
}

impl RunLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn to_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            sink: Some((path, BufWriter::new(f))),
            ..Self::default()
        })
    }

    pub fn with_snapshot_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.snapshot_dir = Some(dir.into());
        self
    }

    /// Tags subsequent records with a category.
    pub fn set_category(&mut self, category: Option<String>) {
        self.category = category;
    }

    pub fn push(&mut self, mut record: StepRecord) -> Result<()> {
        if record.category.is_none() {
            record.category = self.category.clone();
        }
        if let Some((path, w)) = self.sink.as_mut() {
            let line = serde_json::to_string(&record).map_err(|e| Error::json(path.as_path(), e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path.as_path(), e))?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some((path, w)) = self.sink.as_mut() {
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        Ok(())
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| !r.is_eval())
    }

    pub fn evals(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.is_eval())
    }
}
