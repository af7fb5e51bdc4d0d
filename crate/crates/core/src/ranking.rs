//! Joint ranking of states and labels.
//!
//! Sorting a sample's objects by their state (descending) and applying the
//! same reordering to the label maps every permutation of a sample onto one
//! canonical representative. Matrix states (interference) are reordered on
//! rows and columns simultaneously, keyed by the diagonal (direct-link) gains.
//! Ties are broken by original object index, which keeps the transform
//! deterministic.

use crate::datagen::{Dataset, Sample, Task};
use crate::error::{Error, Result};

/// Object reordering: output position `i` takes input object `indices[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    indices: Vec<usize>,
}

impl Permutation {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; indices.len()];
        for &i in &indices {
            if i >= indices.len() || seen[i] {
                return Err(Error::Domain(format!("{indices:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Self { indices })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    /// Stable descending order of `keys`.
    pub fn descending(keys: &[f64]) -> Self {
        let mut indices: Vec<usize> = (0..keys.len()).collect();
        indices.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.indices.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.indices.len()];
        for (pos, &src) in self.indices.iter().enumerate() {
            inv[src] = pos;
        }
        Self { indices: inv }
    }

    /// Permutation equivalent to applying `first` and then `self`.
    pub fn after(&self, first: &Permutation) -> Self {
        Self {
            indices: self.indices.iter().map(|&i| first.indices[i]).collect(),
        }
    }

    pub fn apply<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.indices.iter().map(|&i| values[i].clone()).collect()
    }

    /// `out[i][j] = m[indices[i]][indices[j]]` on a row-major square matrix.
    pub fn apply_matrix<T: Clone>(&self, m: &[T]) -> Vec<T> {
        let k = self.indices.len();
        let mut out = Vec::with_capacity(k * k);
        for &r in &self.indices {
            for &c in &self.indices {
                out.push(m[r * k + c].clone());
            }
        }
        out
    }
}

/// Stable descending-diagonal permutation of a row-major `k x k` matrix.
pub fn diagonal_order(matrix: &[f64], k: usize) -> Permutation {
    let diag: Vec<f64> = (0..k).map(|i| matrix[i * k + i]).collect();
    Permutation::descending(&diag)
}

/// Canonical form of a state: the ranked state and the permutation used.
pub fn rank_state(task: Task, state: &[f64], num_objects: usize) -> Result<(Vec<f64>, Permutation)> {
    if task.is_matrix() {
        if state.len() != num_objects * num_objects {
            return Err(Error::Shape(format!(
                "matrix state of {} entries is not {num_objects}x{num_objects}",
                state.len()
            )));
        }
        let perm = diagonal_order(state, num_objects);
        Ok((perm.apply_matrix(state), perm))
    } else {
        if state.len() != num_objects {
            return Err(Error::Shape(format!(
                "state of {} entries for {num_objects} objects",
                state.len()
            )));
        }
        let perm = Permutation::descending(state);
        Ok((perm.apply(state), perm))
    }
}

/// Sorts a vector-state sample and its label in descending state order.
/// Already-ranked samples are returned unchanged.
pub fn rank_vector_sample(sample: &Sample) -> Result<Sample> {
    if sample.is_ranked() {
        return Ok(sample.clone());
    }
    if sample.state.len() != sample.label.len() {
        return Err(Error::Shape(format!(
            "vector state of {} entries with {} labels",
            sample.state.len(),
            sample.label.len()
        )));
    }
    let perm = Permutation::descending(&sample.state);
    Ok(Sample {
        state: perm.apply(&sample.state),
        label: perm.apply(&sample.label),
        permutation: Some(perm),
    })
}

/// Reorders rows, columns and label of a matrix-state sample by descending
/// diagonal. Already-ranked samples are returned unchanged.
pub fn rank_matrix_sample(sample: &Sample) -> Result<Sample> {
    if sample.is_ranked() {
        return Ok(sample.clone());
    }
    let k = sample.label.len();
    if sample.state.len() != k * k {
        return Err(Error::Shape(format!(
            "state of {} entries is not a {k}x{k} matrix",
            sample.state.len()
        )));
    }
    let perm = diagonal_order(&sample.state, k);
    Ok(Sample {
        state: perm.apply_matrix(&sample.state),
        label: perm.apply(&sample.label),
        permutation: Some(perm),
    })
}

pub fn rank_sample(task: Task, sample: &Sample) -> Result<Sample> {
    if task.is_matrix() {
        rank_matrix_sample(sample)
    } else {
        rank_vector_sample(sample)
    }
}

/// Ranks every sample of a dataset.
pub fn rank_dataset(ds: &Dataset) -> Result<Dataset> {
    if ds.ranked {
        return Ok(ds.clone());
    }
    let samples = ds
        .samples
        .iter()
        .map(|s| rank_sample(ds.task, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        ranked: true,
        ..ds.clone()
    })
}

/// Maps a prediction made in ranked order back to the original object order.
pub fn unrank_prediction(pred: &[f64], perm: &Permutation) -> Result<Vec<f64>> {
    if pred.len() != perm.len() {
        return Err(Error::Shape(format!(
            "{} predictions for a permutation of {}",
            pred.len(),
            perm.len()
        )));
    }
    let mut out = vec![0.0; pred.len()];
    for (pos, &src) in perm.indices().iter().enumerate() {
        out[src] = pred[pos];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector_sample(state: &[f64], label: &[f64]) -> Sample {
        Sample {
            state: state.to_vec(),
            label: label.to_vec(),
            permutation: None,
        }
    }

    #[test]
    fn joint_sort_of_vector_sample() {
        let s = rank_vector_sample(&vector_sample(&[2.0, 5.0, 1.0], &[10.0, 20.0, 30.0])).unwrap();
        assert_eq!(s.state, vec![5.0, 2.0, 1.0]);
        assert_eq!(s.label, vec![20.0, 10.0, 30.0]);
        assert_eq!(s.permutation.as_ref().unwrap().indices(), &[1, 0, 2]);
    }

    #[test]
    fn descending_sample_gets_identity() {
        let s = rank_vector_sample(&vector_sample(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.state, vec![3.0, 2.0, 1.0]);
        assert!(s.permutation.unwrap().is_identity());
    }

    #[test]
    fn ranking_is_idempotent() {
        let once = rank_vector_sample(&vector_sample(&[0.3, 0.9, 0.1, 0.5], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(rank_vector_sample(&once).unwrap(), once);
    }

    #[test]
    fn ties_keep_original_order() {
        let s = rank_vector_sample(&vector_sample(&[1.0, 2.0, 1.0, 2.0], &[0.0, 1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.permutation.unwrap().indices(), &[1, 3, 0, 2]);
    }

    #[test]
    fn matrix_ranking_swaps_rows_and_columns() {
        let s = Sample {
            state: vec![1.0, 0.2, 0.4, 3.0],
            label: vec![0.1, 0.9],
            permutation: None,
        };
        let r = rank_matrix_sample(&s).unwrap();
        assert_eq!(r.state, vec![3.0, 0.4, 0.2, 1.0]);
        assert_eq!(r.label, vec![0.9, 0.1]);

        let sorted = Sample {
            state: vec![3.0, 0.2, 0.4, 1.0],
            label: vec![0.1, 0.9],
            permutation: None,
        };
        assert!(rank_matrix_sample(&sorted).unwrap().permutation.unwrap().is_identity());
    }

    #[test]
    fn matrix_ranking_rejects_non_square() {
        let s = Sample {
            state: vec![1.0; 5],
            label: vec![0.0, 0.0],
            permutation: None,
        };
        assert!(matches!(rank_matrix_sample(&s), Err(Error::Shape(_))));
    }

    #[test]
    fn unrank_examples() {
        let pred = [7.0, 8.0, 9.0];
        assert_eq!(unrank_prediction(&pred, &Permutation::identity(3)).unwrap(), pred.to_vec());
        let perm = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(unrank_prediction(&pred, &perm).unwrap(), vec![8.0, 9.0, 7.0]);
        assert!(unrank_prediction(&pred[..2], &perm).is_err());

        let label = [0.5, 0.25, 0.125];
        assert_eq!(unrank_prediction(&perm.apply(&label), &perm).unwrap(), label.to_vec());
    }

    #[test]
    fn permutation_algebra() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let q = Permutation::new(vec![1, 2, 0]).unwrap();
        let x = ['a', 'b', 'c'];
        assert_eq!(p.after(&q).apply(&x), p.apply(&q.apply(&x)));
        assert!(p.after(&p.inverse()).is_identity());
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }
}
