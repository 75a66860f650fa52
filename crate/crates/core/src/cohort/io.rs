//! Cohort file formats.
//!
//! * event-lines: one JSON object per line, discriminated by `kind`
//!   (`demo`, `diag`, `move`, `assess`). Every record carries `patient_id`;
//!   event records also carry `day`.
//! * cohort archive: a single JSON document whose leading fields are
//!   `magic` and `schema_version`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    AssessmentEvent, CohortDataset, Day, Demographics, Diagnosis, EventTimeline, PatientRecord,
    ITEM_COUNT, SCHEMA_VERSION,
};
use crate::error::{Error, Result};

pub const ARCHIVE_MAGIC: &str = "redrisk-cohort";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CohortFormat {
    EventLines,
    Archive,
}

impl FromStr for CohortFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "event-lines" => Ok(CohortFormat::EventLines),
            "cohort-archive" | "archive" => Ok(CohortFormat::Archive),
            other => Err(Error::config(format!(
                "unknown cohort format `{other}`, expected `event-lines` or `cohort-archive`"
            ))),
        }
    }
}

impl CohortFormat {
    pub fn name(self) -> &'static str {
        match self {
            CohortFormat::EventLines => "event-lines",
            CohortFormat::Archive => "cohort-archive",
        }
    }

    /// Sniffs the format from the first non-blank line of a file.
    pub fn detect(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let t = line.trim_start();
            if t.is_empty() {
                continue;
            }
            return Ok(if t.starts_with("{\"magic\"") {
                CohortFormat::Archive
            } else {
                CohortFormat::EventLines
            });
        }
        Ok(CohortFormat::EventLines)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum EventLine {
    Demo {
        patient_id: String,
        gender: String,
        age_band: String,
        marital_status: String,
        occupation: String,
        language: String,
        country_of_birth: String,
        religion: String,
        indigenous_status: String,
    },
    Diag {
        patient_id: String,
        day: Day,
        code: String,
    },
    Move {
        patient_id: String,
        day: Day,
    },
    Assess {
        patient_id: String,
        day: Day,
        items: Vec<u8>,
        overall: u8,
    },
}

#[derive(Serialize)]
struct ArchiveOut<'a> {
    magic: &'a str,
    schema_version: u32,
    patients: &'a [PatientRecord],
}

#[derive(Deserialize)]
struct ArchiveHeader {
    magic: String,
    schema_version: u32,
}

#[derive(Deserialize)]
struct ArchiveIn {
    patients: Vec<PatientRecord>,
}

pub fn load_cohort(path: &Path, format: CohortFormat) -> Result<CohortDataset> {
    let dataset = match format {
        CohortFormat::EventLines => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_event_lines(BufReader::new(file))?
        }
        CohortFormat::Archive => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            read_archive(&text)?
        }
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn save_cohort(dataset: &CohortDataset, path: &Path, format: CohortFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        CohortFormat::EventLines => write_event_lines(dataset, &mut w),
        CohortFormat::Archive => write_archive(dataset, &mut w),
    }
    .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_event_lines(reader: impl BufRead) -> Result<CohortDataset> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut demos: Vec<Option<Demographics>> = Vec::new();
    let mut ids: Vec<String> = Vec::new();
    let mut timelines: Vec<EventTimeline> = Vec::new();

    let mut slot = |id: String| -> usize {
        *index.entry(id.clone()).or_insert_with(|| {
            ids.push(id);
            demos.push(None);
            timelines.push(EventTimeline::default());
            ids.len() - 1
        })
    };
    // `slot` borrows the vectors mutably, so records are staged and applied after.
    let mut staged: Vec<(usize, usize, EventLine)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let id = match &rec {
            EventLine::Demo { patient_id, .. }
            | EventLine::Diag { patient_id, .. }
            | EventLine::Move { patient_id, .. }
            | EventLine::Assess { patient_id, .. } => patient_id.clone(),
        };
        staged.push((lineno, slot(id), rec));
    }

    for (lineno, k, rec) in staged {
        match rec {
            EventLine::Demo {
                patient_id,
                gender,
                age_band,
                marital_status,
                occupation,
                language,
                country_of_birth,
                religion,
                indigenous_status,
            } => {
                if demos[k].is_some() {
                    return Err(Error::validation(format!(
                        "line {lineno}: duplicate patient_id `{patient_id}`"
                    )));
                }
                demos[k] = Some(Demographics {
                    gender,
                    age_band,
                    marital_status,
                    occupation,
                    language,
                    country_of_birth,
                    religion,
                    indigenous_status,
                });
            }
            EventLine::Diag { day, code, .. } => timelines[k].diagnoses.push(Diagnosis { day, code }),
            EventLine::Move { day, .. } => timelines[k].postcode_changes.push(day),
            EventLine::Assess {
                day, items, overall, ..
            } => {
                let items: [u8; ITEM_COUNT] = items.as_slice().try_into().map_err(|_| {
                    Error::parse(
                        lineno,
                        format!("expected {ITEM_COUNT} item ratings, found {}", items.len()),
                    )
                })?;
                timelines[k].assessments.push(AssessmentEvent {
                    day,
                    items,
                    overall,
                });
            }
        }
    }

    let mut patients = Vec::with_capacity(ids.len());
    for ((patient_id, demo), timeline) in ids.into_iter().zip(demos).zip(timelines) {
        let demographics = demo.ok_or_else(|| {
            Error::validation(format!("patient `{patient_id}` has no demo record"))
        })?;
        patients.push(PatientRecord {
            patient_id,
            demographics,
            timeline,
        });
    }
    Ok(CohortDataset::new(patients))
}

pub(crate) fn write_event_lines(ds: &CohortDataset, w: &mut impl Write) -> std::io::Result<()> {
    for p in &ds.patients {
        let id = p.patient_id.clone();
        let d = &p.demographics;
        let mut emit = |rec: &EventLine| -> std::io::Result<()> {
            serde_json::to_writer(&mut *w, rec)?;
            w.write_all(b"\n")
        };
        emit(&EventLine::Demo {
            patient_id: id.clone(),
            gender: d.gender.clone(),
            age_band: d.age_band.clone(),
            marital_status: d.marital_status.clone(),
            occupation: d.occupation.clone(),
            language: d.language.clone(),
            country_of_birth: d.country_of_birth.clone(),
            religion: d.religion.clone(),
            indigenous_status: d.indigenous_status.clone(),
        })?;
        for dg in &p.timeline.diagnoses {
            emit(&EventLine::Diag {
                patient_id: id.clone(),
                day: dg.day,
                code: dg.code.clone(),
            })?;
        }
        for &day in &p.timeline.postcode_changes {
            emit(&EventLine::Move {
                patient_id: id.clone(),
                day,
            })?;
        }
        for a in &p.timeline.assessments {
            emit(&EventLine::Assess {
                patient_id: id.clone(),
                day: a.day,
                items: a.items.to_vec(),
                overall: a.overall,
            })?;
        }
    }
    Ok(())
}

pub(crate) fn read_archive(text: &str) -> Result<CohortDataset> {
    let header: ArchiveHeader = serde_json::from_str(text)
        .map_err(|e| Error::parse(e.line(), format!("not a cohort archive: {e}")))?;
    if header.magic != ARCHIVE_MAGIC {
        return Err(Error::parse(
            1,
            format!("bad archive magic `{}`, expected `{ARCHIVE_MAGIC}`", header.magic),
        ));
    }
    if header.schema_version > SCHEMA_VERSION {
        return Err(Error::validation(format!(
            "cohort archive schema_version {} is newer than the supported version {SCHEMA_VERSION}",
            header.schema_version
        )));
    }
    let body: ArchiveIn =
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    Ok(CohortDataset {
        schema_version: header.schema_version,
        patients: body.patients,
    })
}

pub(crate) fn write_archive(ds: &CohortDataset, w: &mut impl Write) -> std::io::Result<()> {
    serde_json::to_writer(
        &mut *w,
        &ArchiveOut {
            magic: ARCHIVE_MAGIC,
            schema_version: ds.schema_version,
            patients: &ds.patients,
        },
    )?;
    w.write_all(b"\n")
}
