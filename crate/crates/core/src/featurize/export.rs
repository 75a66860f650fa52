use std::io::Write;

use super::assemble::FeatureMatrix;
use super::labels::RiskLabelSet;
use crate::error::{Error, Result};

/// Writes `label_<h>` columns followed by the feature columns, one row per anchor.
pub fn write_feature_csv<W: Write>(
    mut out: W,
    labels: &RiskLabelSet,
    features: &FeatureMatrix,
) -> Result<()> {
    if labels.len() != features.n_rows() {
        return Err(Error::Arity {
            expected: labels.len(),
            got: features.n_rows(),
        });
    }
    let io = |e| Error::io("<feature csv>", e);
    let header: Vec<String> = labels
        .horizons
        .iter()
        .map(|h| format!("label_{h}"))
        .chain(features.columns.iter().cloned())
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for r in 0..labels.len() {
        let mut line: Vec<String> = labels.row(r).iter().map(|l| l.to_string()).collect();
        line.extend(features.values.row(r).iter().map(|v| v.to_string()));
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    Ok(())
}
