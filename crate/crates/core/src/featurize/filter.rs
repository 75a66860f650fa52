use super::assemble::FeatureMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_RARE_THRESHOLD: f64 = 0.01;

/// Keeps columns that are nonzero in at least `threshold` of the rows of
/// `train`. Apply the returned names to other rows with
/// [`FeatureMatrix::align_to`].
pub fn filter_rare_features(
    train: &FeatureMatrix,
    threshold: f64,
) -> Result<(FeatureMatrix, Vec<String>)> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::config(format!(
            "rare-feature threshold {threshold} must lie in [0, 1]"
        )));
    }
    let n = train.n_rows();
    if n == 0 || train.n_cols() == 0 {
        return Err(Error::data("cannot filter an empty feature matrix"));
    }
    let mut nonzero = vec![0usize; train.n_cols()];
    for row in train.values.rows() {
        for (c, v) in nonzero.iter_mut().zip(row) {
            if *v != 0.0 {
                *c += 1;
            }
        }
    }
    let keep: Vec<usize> = nonzero
        .iter()
        .enumerate()
        .filter(|(_, &c)| c as f64 / n as f64 >= threshold)
        .map(|(j, _)| j)
        .collect();
    if keep.is_empty() {
        return Err(Error::config(format!(
            "every feature is active in fewer than {threshold} of training rows; lower the rare-feature threshold"
        )));
    }
    let filtered = train.select_columns(&keep);
    let names = filtered.columns.clone();
    Ok((filtered, names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::{AnchorKey, ColumnGroup, FeatureSet};
    use crate::matrix::Matrix;

    fn fm(rows: &[[f64; 3]]) -> FeatureMatrix {
        FeatureMatrix {
            feature_set: FeatureSet::FS1,
            columns: vec!["life:a".into(), "life:b".into(), "life:c".into()],
            groups: vec![ColumnGroup::LifeEvent; 3],
            values: Matrix::from_rows(rows).unwrap(),
            anchors: (0..rows.len())
                .map(|i| AnchorKey {
                    patient_index: i,
                    patient_id: format!("p{i}"),
                    assessment_index: 0,
                    day: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn drops_never_active_keeps_always_active() {
        let m = fm(&[[0.0, 1.0, 0.0], [0.0, 2.0, 1.0], [0.0, 1.0, 0.0]]);
        let (_, names) = filter_rare_features(&m, 0.5).unwrap();
        assert_eq!(names, vec!["life:b".to_string()]);
        let (f, names) = filter_rare_features(&m, 0.3).unwrap();
        assert_eq!(names, vec!["life:b".to_string(), "life:c".to_string()]);
        let (_, again) = filter_rare_features(&f, 0.3).unwrap();
        assert_eq!(again, names);
    }

    #[test]
    fn all_filtered_is_an_error() {
        let m = fm(&[[0.0; 3], [0.0; 3]]);
        let err = filter_rare_features(&m, 0.01).unwrap_err();
        assert!(err.to_string().contains("lower the rare-feature threshold"));
    }
}
