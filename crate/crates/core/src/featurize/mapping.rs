use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::cohort::normalize_code;
use crate::error::{Error, Result};

/// Group that collects codes no prefix matches.
pub const UNMAPPED: &str = "unmapped";

const STUB_ELIXHAUSER: &str = include_str!("../../data/elixhauser_stub.tsv");
const STUB_MHDG: &str = include_str!("../../data/mhdg_stub.tsv");

/// ICD-10 prefix to group table with longest-prefix matching.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MappingTableRepr", into = "MappingTableRepr")]
pub struct MappingTable {
    entries: Vec<(String, String)>,
    groups: Vec<String>,
    by_prefix: HashMap<String, usize>,
    max_len: usize,
}

#[derive(Serialize, Deserialize)]
struct MappingTableRepr {
    entries: Vec<(String, String)>,
}

impl TryFrom<MappingTableRepr> for MappingTable {
    type Error = Error;

    fn try_from(r: MappingTableRepr) -> Result<Self> {
        MappingTable::new(r.entries)
    }
}

impl From<MappingTable> for MappingTableRepr {
    fn from(t: MappingTable) -> Self {
        MappingTableRepr { entries: t.entries }
    }
}

impl MappingTable {
    /// Builds a table; a prefix listed twice with different groups is ambiguous and rejected.
    pub fn new(entries: Vec<(String, String)>) -> Result<Self> {
        let mut seen: HashMap<String, String> = HashMap::new();
        let mut clean = Vec::with_capacity(entries.len());
        for (prefix, group) in entries {
            let p = normalize_code(&prefix);
            let g = group.trim().to_string();
            if p.is_empty() || g.is_empty() {
                return Err(Error::validation(format!(
                    "mapping entry `{prefix}` -> `{group}` has an empty side"
                )));
            }
            if g == UNMAPPED {
                return Err(Error::validation(format!("group name `{UNMAPPED}` is reserved")));
            }
            match seen.get(&p) {
                Some(prev) if *prev != g => {
                    return Err(Error::validation(format!(
                        "ambiguous mapping: prefix `{p}` maps to both `{prev}` and `{g}`"
                    )))
                }
                Some(_) => continue,
                None => {
                    seen.insert(p.clone(), g.clone());
                    clean.push((p, g));
                }
            }
        }
        let mut groups: Vec<String> = clean
            .iter()
            .map(|(_, g)| g.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        groups.push(UNMAPPED.to_string());
        let by_prefix = clean
            .iter()
            .map(|(p, g)| (p.clone(), groups.iter().position(|x| x == g).expect("group listed")))
            .collect();
        let max_len = clean.iter().map(|(p, _)| p.len()).max().unwrap_or(0);
        Ok(MappingTable {
            entries: clean,
            groups,
            by_prefix,
            max_len,
        })
    }

    /// Parses `PREFIX<TAB>GROUP` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (prefix, group) = line.split_once('\t').ok_or_else(|| {
                Error::parse(i + 1, format!("expected PREFIX<TAB>GROUP, got `{line}`"))
            })?;
            entries.push((prefix.to_string(), group.to_string()));
        }
        Self::new(entries)
    }

    pub fn stub_elixhauser() -> Self {
        Self::parse(STUB_ELIXHAUSER).expect("stub Elixhauser table parses")
    }

    pub fn stub_mhdg() -> Self {
        Self::parse(STUB_MHDG).expect("stub MHDG table parses")
    }

    /// Group names in column order; the last one is always [`UNMAPPED`].
    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    /// Index into [`groups`](Self::groups) for a code, by longest matching prefix.
    pub fn group_index(&self, code: &str) -> usize {
        let c = normalize_code(code);
        let upto = c.len().min(self.max_len);
        for len in (1..=upto).rev() {
            if let Some(&g) = c.get(..len).and_then(|p| self.by_prefix.get(p)) {
                return g;
            }
        }
        self.groups.len() - 1
    }

    pub fn group_of(&self, code: &str) -> &str {
        &self.groups[self.group_index(code)]
    }
}

/// Counts codes per group (longest-prefix match, unmatched to `unmapped`).
pub fn map_diagnoses<S: AsRef<str>>(codes: &[S], table: &MappingTable) -> Vec<u32> {
    let mut counts = vec![0; table.groups().len()];
    for c in codes {
        counts[table.group_index(c.as_ref())] += 1;
    }
    counts
}

/// The pair of diagnosis-group tables used for featurization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingTables {
    pub elixhauser: MappingTable,
    pub mhdg: MappingTable,
}

impl MappingTables {
    pub fn stub() -> Self {
        MappingTables {
            elixhauser: MappingTable::stub_elixhauser(),
            mhdg: MappingTable::stub_mhdg(),
        }
    }
}
