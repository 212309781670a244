//! External clustering indices. Functions return `[0, 1]`-scale values;
//! [`MetricsReport`] carries percentages.

pub mod contingency;
pub mod hungarian;
pub mod information;

use serde::{Deserialize, Serialize};

pub use contingency::ContingencyTable;
pub use hungarian::max_weight_assignment;
pub use information::{ami, expected_mutual_information, mutual_information, nmi};

use crate::error::Result;

/// Percentages.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub nmi: f64,
    pub ami: f64,
    pub ari: f64,
}

impl MetricsReport {
    pub fn compute(pred: &[usize], truth: &[usize]) -> Result<Self> {
        let t = ContingencyTable::new(pred, truth)?;
        Ok(Self {
            acc: 100.0 * t.accuracy(),
            nmi: 100.0 * information::nmi_from_table(&t),
            ami: 100.0 * information::ami_from_table(&t),
            ari: 100.0 * t.ari(),
        })
    }

    pub fn mean(reports: &[MetricsReport]) -> MetricsReport {
        if reports.is_empty() {
            return MetricsReport::default();
        }
        let n = reports.len() as f64;
        let sum = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        MetricsReport {
            acc: sum(|r| r.acc),
            nmi: sum(|r| r.nmi),
            ami: sum(|r| r.ami),
            ari: sum(|r| r.ari),
        }
    }
}

/// Fraction of samples matched under the best injective cluster-to-class map.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(ContingencyTable::new(pred, truth)?.accuracy())
}

pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(ContingencyTable::new(pred, truth)?.ari())
}
