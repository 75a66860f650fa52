use proptest::prelude::*;

use redrisk::cohort::{
    generate_synthetic_cohort, load_cohort, save_cohort, split_patients, AssessmentEvent,
    CohortDataset, CohortFormat, Demographics, Diagnosis, EventTimeline, PatientRecord,
    SyntheticConfig, DEMOGRAPHIC_SCHEMA, ITEM_COUNT,
};
use redrisk::Error;

fn demographics() -> impl Strategy<Value = Demographics> {
    let fields: Vec<_> = DEMOGRAPHIC_SCHEMA
        .iter()
        .map(|(_, vocab)| prop::sample::select(vocab.to_vec()).prop_map(String::from))
        .collect();
    fields.prop_map(|v| Demographics::from_values(v.try_into().unwrap()))
}

fn assessment() -> impl Strategy<Value = AssessmentEvent> {
    (-2000i32..2000, prop::array::uniform18(0u8..=4), 0u8..=4)
        .prop_map(|(day, items, overall)| AssessmentEvent { day, items, overall })
}

fn timeline() -> impl Strategy<Value = EventTimeline> {
    let code = prop::sample::select(vec!["F32", "F33.1", "X60", "T43.2", "Z00", "R45.8", "S51.0"]);
    (
        prop::collection::vec((-2000i32..2000, code), 0..6),
        prop::collection::vec(-2000i32..2000, 0..3),
        prop::collection::vec(assessment(), 1..5),
    )
        .prop_map(|(diags, mut moves, mut assessments)| {
            let mut diagnoses: Vec<Diagnosis> = diags
                .into_iter()
                .map(|(day, code)| Diagnosis { day, code: code.to_string() })
                .collect();
            diagnoses.sort_by_key(|d| d.day);
            moves.sort_unstable();
            assessments.sort_by_key(|a| a.day);
            EventTimeline { diagnoses, postcode_changes: moves, assessments }
        })
}

fn cohort() -> impl Strategy<Value = CohortDataset> {
    prop::collection::vec((demographics(), timeline()), 1..6).prop_map(|ps| {
        CohortDataset::new(
            ps.into_iter()
                .enumerate()
                .map(|(i, (demographics, timeline))| PatientRecord {
                    patient_id: format!("p{i}"),
                    demographics,
                    timeline,
                })
                .collect(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn both_formats_round_trip(ds in cohort()) {
        let dir = tempfile::tempdir().unwrap();
        for (format, name) in [(CohortFormat::EventLines, "c.jsonl"), (CohortFormat::Archive, "c.json")] {
            let path = dir.path().join(name);
            save_cohort(&ds, &path, format).unwrap();
            prop_assert_eq!(CohortFormat::detect(&path).unwrap(), format);
            prop_assert_eq!(&load_cohort(&path, format).unwrap(), &ds);
        }
    }

    #[test]
    fn split_partitions_patients(n in 2usize..60, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let ds = generate_synthetic_cohort(&SyntheticConfig { n_patients: n, ..Default::default() }, 1).unwrap();
        let (train, valid) = split_patients(&ds, frac, seed).unwrap();
        prop_assert_eq!(train.patients.len(), ((frac * n as f64).ceil() as usize).min(n));
        let mut ids: Vec<&str> = train.patients.iter().chain(&valid.patients).map(|p| p.patient_id.as_str()).collect();
        ids.sort_unstable();
        let mut all: Vec<&str> = ds.patients.iter().map(|p| p.patient_id.as_str()).collect();
        all.sort_unstable();
        prop_assert_eq!(ids, all);
        let again = split_patients(&ds, frac, seed).unwrap();
        prop_assert_eq!(again.0, train);
    }
}

#[test]
fn synthetic_cohort_is_valid_and_seeded() {
    let cfg = SyntheticConfig { n_patients: 200, ..Default::default() };
    let a = generate_synthetic_cohort(&cfg, 5).unwrap();
    let report = a.validate().unwrap();
    assert_eq!(report.patients, 200);
    assert!(report.assessments >= 200);
    assert!(report.flagged_codes.is_empty());
    assert_eq!(a, generate_synthetic_cohort(&cfg, 5).unwrap());
    assert_ne!(a, generate_synthetic_cohort(&cfg, 6).unwrap());
}

#[test]
fn malformed_event_line_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(
        &path,
        "{\"kind\":\"diag\",\"patient_id\":\"a\",\"day\":1,\"code\":\"F32\"}\n{\"kind\":\"assess\",\"patient_id\":\n",
    )
    .unwrap();
    let err = load_cohort(&path, CohortFormat::EventLines).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains('2'), "{err}");
}

#[test]
fn out_of_range_rating_is_rejected() {
    let mut ds = generate_synthetic_cohort(&SyntheticConfig { n_patients: 3, ..Default::default() }, 0).unwrap();
    ds.patients[1].timeline.assessments[0].items[ITEM_COUNT - 1] = 5;
    assert!(matches!(ds.validate(), Err(Error::Validation(_))));
}

#[test]
fn missing_file_is_io_error() {
    let err = load_cohort(std::path::Path::new("/nonexistent/c.jsonl"), CohortFormat::EventLines).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}
