use super::casr::partial_iou;
use super::config::Stage;
use crate::error::{Error, Result};
use crate::voxel::{iou, VoxelGrid};

/// What a candidate's predictions are scored against.
#[derive(Clone, Copy, Debug)]
pub enum EvalSet<'a> {
    /// Seen-category validation shapes.
    Cosl { ground_truth: &'a [VoxelGrid] },
    /// Partial scans only; complete shapes are unavailable.
    Casr { partials: &'a [Vec<VoxelGrid>] },
}

impl EvalSet<'_> {
    pub fn stage(&self) -> Stage {
        match self {
            EvalSet::Cosl { .. } => Stage::Cosl,
            EvalSet::Casr { .. } => Stage::Casr,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EvalSet::Cosl { ground_truth } => ground_truth.len(),
            EvalSet::Casr { partials } => partials.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean IoU of `predictions` under this set's criterion.
    pub fn score(&self, predictions: &[VoxelGrid]) -> Result<f64> {
        if predictions.len() != self.len() {
            return Err(Error::Config(format!(
                "{} predictions for an evaluation set of {}",
                predictions.len(),
                self.len()
            )));
        }
        match self {
            EvalSet::Cosl { ground_truth } => {
                let mut total = 0.0;
                for (p, g) in predictions.iter().zip(*ground_truth) {
                    total += iou(p, g)?;
                }
                Ok(total / predictions.len() as f64)
            }
            EvalSet::Casr { partials } => partial_iou(predictions, partials),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Selection<C> {
    pub best: C,
    pub index: usize,
    pub scores: Vec<f64>,
}

/// Runs every candidate and keeps the highest-scoring one; ties go to the earlier candidate.
pub fn select_hyperparams<C, F>(candidates: &[C], eval_set: &EvalSet<'_>, mut run: F) -> Result<Selection<C>>
where
    C: Clone,
    F: FnMut(&C) -> Result<Vec<VoxelGrid>>,
{
    if candidates.is_empty() {
        return Err(Error::Config("no hyperparameter candidates".into()));
    }
    if eval_set.is_empty() {
        return Err(Error::Config("empty evaluation set".into()));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut index = 0;
    for (i, c) in candidates.iter().enumerate() {
        let score = eval_set.score(&run(c)?)?;
        if score > scores.get(index).copied().unwrap_or(f64::NEG_INFINITY) {
            index = i;
        }
        scores.push(score);
    }
    Ok(Selection {
        best: candidates[index].clone(),
        index,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize, lo: usize, hi: usize) -> VoxelGrid {
        VoxelGrid::from_fn(n, |x, y, z| [x, y, z].iter().all(|&c| (lo..hi).contains(&c)))
    }

    #[test]
    fn single_candidate_is_returned() {
        let s = vec![vec![cube(8, 0, 2)]];
        let sel = select_hyperparams(&["only"], &EvalSet::Casr { partials: &s }, |_| Ok(vec![cube(8, 0, 3)])).unwrap();
        assert_eq!(sel.best, "only");
    }

    #[test]
    fn dominant_candidate_wins_and_ties_keep_order() {
        let s = vec![vec![cube(8, 0, 2)]];
        let eval = EvalSet::Casr { partials: &s };
        let sel = select_hyperparams(&[0usize, 1], &eval, |&c| Ok(vec![cube(8, 0, 2 + 2 * (1 - c))])).unwrap();
        assert_eq!(sel.index, 1);
        let tie = select_hyperparams(&[0usize, 1], &eval, |_| Ok(vec![cube(8, 0, 3)])).unwrap();
        assert_eq!(tie.index, 0);
    }

    #[test]
    fn empty_eval_set_is_a_config_error() {
        let gt: Vec<VoxelGrid> = Vec::new();
        let err = select_hyperparams(&[1], &EvalSet::Cosl { ground_truth: &gt }, |_| Ok(vec![])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
