use crate::cohort::{AssessmentEvent, ITEM_COUNT};
use crate::error::{Error, Result};

/// Summary statistics over the (time x item) rating matrix of an assessment history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssessmentStats {
    /// max over time of the overall rating
    pub max_overall: f64,
    /// sum over items of each item's max rating over time
    pub sum_of_item_max: f64,
    /// sum over items of each item's mean rating over time
    pub sum_of_item_mean: f64,
    /// mean over time of the per-assessment item sum
    pub mean_item_sum: f64,
    /// max over time of the per-assessment item sum
    pub max_item_sum: f64,
}

impl AssessmentStats {
    pub const NAMES: [&'static str; 5] = [
        "max_overall",
        "sum_item_max",
        "sum_item_mean",
        "mean_item_sum",
        "max_item_sum",
    ];

    pub fn to_array(self) -> [f64; 5] {
        [
            self.max_overall,
            self.sum_of_item_max,
            self.sum_of_item_mean,
            self.mean_item_sum,
            self.max_item_sum,
        ]
    }
}

pub fn aggregate_assessments(history: &[&AssessmentEvent]) -> Result<AssessmentStats> {
    if history.is_empty() {
        return Err(Error::data(
            "anchor has no assessment at or before it; assessment statistics are undefined",
        ));
    }
    let t = history.len() as f64;
    let mut item_max = [0u8; ITEM_COUNT];
    let mut item_total = [0u32; ITEM_COUNT];
    let mut max_overall = 0u8;
    let mut sum_total = 0u32;
    let mut max_sum = 0u32;
    for a in history {
        max_overall = max_overall.max(a.overall);
        for (q, &r) in a.items.iter().enumerate() {
            item_max[q] = item_max[q].max(r);
            item_total[q] += u32::from(r);
        }
        let s = a.item_sum();
        sum_total += s;
        max_sum = max_sum.max(s);
    }
    Ok(AssessmentStats {
        max_overall: f64::from(max_overall),
        sum_of_item_max: item_max.iter().map(|&m| f64::from(m)).sum(),
        sum_of_item_mean: item_total.iter().map(|&s| f64::from(s) / t).sum(),
        mean_item_sum: f64::from(sum_total) / t,
        max_item_sum: f64::from(max_sum),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(items: [u8; ITEM_COUNT], overall: u8) -> AssessmentEvent {
        AssessmentEvent {
            day: 0,
            items,
            overall,
        }
    }

    #[test]
    fn single_assessment_stats_coincide() {
        let x = a([2; ITEM_COUNT], 3);
        let s = aggregate_assessments(&[&x]).unwrap();
        assert_eq!(s.to_array(), [3.0, 36.0, 36.0, 36.0, 36.0]);
    }

    #[test]
    fn mean_and_max_of_item_sums() {
        let mut i1 = [0; ITEM_COUNT];
        i1[..5].copy_from_slice(&[2; 5]);
        let mut i2 = [0; ITEM_COUNT];
        i2[..10].copy_from_slice(&[3; 10]);
        let (x, y) = (a(i1, 0), a(i2, 0));
        let s = aggregate_assessments(&[&x, &y]).unwrap();
        assert_eq!(s.mean_item_sum, 20.0);
        assert_eq!(s.max_item_sum, 30.0);
    }

    #[test]
    fn empty_history_is_an_error() {
        assert!(aggregate_assessments(&[]).is_err());
    }
}
