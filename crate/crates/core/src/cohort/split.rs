use rand::seq::SliceRandom;

use super::CohortDataset;
use crate::error::{Error, Result};
use crate::numeric::seeded_rng;

/// Splits a cohort at patient level into (train, validation).
///
/// The train side receives `ceil(fraction * n)` patients. Both halves keep
/// the input's patient order, and each patient travels with all of its
/// assessments.
pub fn split_patients(
    dataset: &CohortDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(CohortDataset, CohortDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train_fraction = {train_fraction} must lie in the open interval (0, 1)"
        )));
    }
    let n = dataset.patients.len();
    let n_train = ((train_fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, 0x5971));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut valid) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    for (p, t) in dataset.patients.iter().zip(in_train) {
        if t {
            train.push(p.clone());
        } else {
            valid.push(p.clone());
        }
    }
    Ok((
        CohortDataset {
            schema_version: dataset.schema_version,
            patients: train,
        },
        CohortDataset {
            schema_version: dataset.schema_version,
            patients: valid,
        },
    ))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::cohort::{Demographics, EventTimeline, PatientRecord};

    fn cohort(n: usize) -> CohortDataset {
        let demo = Demographics::from_values(
            ["male", "under_21", "single", "other", "english", "australia", "none", "no"]
                .map(String::from),
        );
        CohortDataset::new(
            (0..n)
                .map(|i| PatientRecord {
                    patient_id: format!("P{i:05}"),
                    demographics: demo.clone(),
                    timeline: EventTimeline::default(),
                })
                .collect(),
        )
    }

    #[test]
    fn paper_sized_split_rounds_train_up() {
        let (t, v) = split_patients(&cohort(7399), 0.5, 11).unwrap();
        assert_eq!((t.patients.len(), v.patients.len()), (3700, 3699));
        let a: HashSet<_> = t.patients.iter().map(|p| &p.patient_id).collect();
        assert!(v.patients.iter().all(|p| !a.contains(&p.patient_id)));
    }

    #[test]
    fn single_patient_goes_to_train() {
        let (t, v) = split_patients(&cohort(1), 0.5, 0).unwrap();
        assert_eq!((t.patients.len(), v.patients.len()), (1, 0));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let ds = cohort(200);
        let ids = |s| {
            split_patients(&ds, 0.5, s)
                .unwrap()
                .0
                .patients
                .into_iter()
                .map(|p| p.patient_id)
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(4), ids(4));
        assert_ne!(ids(4), ids(5));
    }

    #[test]
    fn fraction_bounds() {
        let ds = cohort(3);
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(split_patients(&ds, f, 0), Err(Error::Config(_))));
        }
    }
}
