use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxel::{chamfer, to_points, Confusion, VoxelGrid};

/// Chamfer distances are reported multiplied by this factor.
pub const CD_SCALE: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
    pub category: String,
    pub iou: f64,
    pub f1: f64,
    /// Scaled Chamfer distance; `None` when either grid is empty.
    pub cd: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub count: usize,
    pub iou: f64,
    pub f1: f64,
    /// Mean over samples with a defined CD; `None` if there are none.
    pub cd: Option<f64>,
    pub cd_excluded: usize,
}

impl CategoryMetrics {
    fn from_samples<'a>(samples: impl Iterator<Item = &'a SampleMetrics>) -> Self {
        let mut m = CategoryMetrics::default();
        let (mut cd_sum, mut cd_n) = (0.0, 0usize);
        for s in samples {
            m.count += 1;
            m.iou += s.iou;
            m.f1 += s.f1;
            match s.cd {
                Some(cd) => {
                    cd_sum += cd;
                    cd_n += 1;
                }
                None => m.cd_excluded += 1,
            }
        }
        if m.count > 0 {
            m.iou /= m.count as f64;
            m.f1 /= m.count as f64;
        }
        m.cd = (cd_n > 0).then(|| cd_sum / cd_n as f64);
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub categories: BTreeMap<String, CategoryMetrics>,
    /// Sample-weighted over all categories.
    pub overall: CategoryMetrics,
    pub samples: Vec<SampleMetrics>,
}

impl MetricsReport {
    pub fn from_samples(samples: Vec<SampleMetrics>) -> Self {
        let names: Vec<String> = samples
            .iter()
            .map(|s| s.category.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let categories = names
            .into_iter()
            .map(|c| {
                let m = CategoryMetrics::from_samples(samples.iter().filter(|s| s.category == c));
                (c, m)
            })
            .collect();
        let overall = CategoryMetrics::from_samples(samples.iter());
        Self {
            categories,
            overall,
            samples,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width text table, one row per category plus the average.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>6} {:>8} {:>8} {:>10} {:>9}", "category", "n", "IoU", "F1", "CD(x100)", "CD excl.");
        let row = |out: &mut String, name: &str, m: &CategoryMetrics| {
            let cd = m.cd.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                out,
                "{:<16} {:>6} {:>8.4} {:>8.4} {:>10} {:>9}",
                name, m.count, m.iou, m.f1, cd, m.cd_excluded
            );
        };
        for (name, m) in &self.categories {
            row(&mut out, name, m);
        }
        row(&mut out, "average", &self.overall);
        out
    }
}

/// Scores one prediction against its ground truth.
pub fn sample_metrics(pred: &VoxelGrid, gt: &VoxelGrid, category: &str) -> Result<SampleMetrics> {
    let confusion = Confusion::of(pred, gt)?;
    let iou = {
        let union = confusion.tp + confusion.fp + confusion.fn_;
        if union == 0 {
            1.0
        } else {
            confusion.tp as f64 / union as f64
        }
    };
    let cd = if pred.is_vacant() || gt.is_vacant() {
        None
    } else {
        Some(chamfer(&to_points::<f64>(pred), &to_points::<f64>(gt))? * CD_SCALE)
    };
    Ok(SampleMetrics {
        object_id: gt.object_id().or(pred.object_id()).map(str::to_string),
        category: category.to_string(),
        iou,
        f1: confusion.f1(),
        cd,
    })
}

/// Per-sample IoU, F1 and scaled CD grouped by category.
pub fn evaluate(predictions: &[VoxelGrid], ground_truths: &[VoxelGrid], categories: &[String]) -> Result<MetricsReport> {
    if predictions.len() != ground_truths.len() || predictions.len() != categories.len() {
        return Err(Error::Config(format!(
            "evaluate needs aligned lists, got {} predictions, {} ground truths, {} labels",
            predictions.len(),
            ground_truths.len(),
            categories.len()
        )));
    }
    let samples = predictions
        .par_iter()
        .zip(ground_truths)
        .zip(categories)
        .map(|((p, g), c)| {
            if p.is_vacant() {
                log::warn!("empty prediction for {}; CD excluded", g.object_id().unwrap_or(c));
            }
            sample_metrics(p, g, c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_samples(samples))
}
