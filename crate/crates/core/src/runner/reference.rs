//! Published group-wise MAE reference values and the check of a run summary
//! against them.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Summary;
use crate::error::{Error, Result};
use crate::evaluation::Significance;
use crate::popularity::Group;
use crate::recommenders::Algorithm;

const BUILTIN: &str = include_str!("../../data/table2_reference.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCell {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub group: Group,
    pub mae: f64,
    pub marker: Significance,
    /// Relative tolerance, e.g. 0.1 for ±10%.
    pub tolerance: f64,
}

#[derive(Debug, Deserialize)]
struct Row {
    dataset: String,
    algorithm: String,
    group: String,
    mae: f64,
    marker: String,
    tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub cells: Vec<ReferenceCell>,
}

impl ReferenceTable {
    /// The table shipped in `data/table2_reference.csv`.
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN.as_bytes()).expect("shipped reference table parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut cells = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let marker = match row.marker.as_str() {
                "" => Significance::None,
                "**" => Significance::Weak,
                "***" => Significance::Strong,
                other => return Err(Error::invalid(format!("unknown significance marker `{other}`"))),
            };
            if row.tolerance.is_nan() || row.tolerance < 0.0 {
                return Err(Error::invalid(format!("negative tolerance {}", row.tolerance)));
            }
            cells.push(ReferenceCell {
                dataset: row.dataset,
                algorithm: row.algorithm.parse()?,
                group: row.group.parse()?,
                mae: row.mae,
                marker,
                tolerance: row.tolerance,
            });
        }
        Ok(Self { cells })
    }

    pub fn get(&self, dataset: &str, algorithm: Algorithm, group: Group) -> Option<&ReferenceCell> {
        self.cells
            .iter()
            .find(|c| c.dataset.eq_ignore_ascii_case(dataset) && c.algorithm == algorithm && c.group == group)
    }

    pub fn datasets(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.dataset.as_str()) {
                out.push(&c.dataset);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub algorithm: Algorithm,
    pub group: Group,
    pub observed: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub relative_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub algorithm: Algorithm,
    pub grand_mae: [f64; 3],
    /// LowPop strictly above both other groups.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerCheck {
    pub algorithm: Algorithm,
    pub observed: Option<Significance>,
    pub reference: Significance,
    /// Both flagged or both unflagged; the star level may differ.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub dataset: String,
    pub orderings: Vec<OrderingCheck>,
    pub cells: Vec<CellCheck>,
    pub markers: Vec<MarkerCheck>,
}

impl VerificationReport {
    /// Ordering and tolerance checks all pass. Markers are reported only.
    pub fn passed(&self) -> bool {
        self.orderings.iter().all(|o| o.pass) && self.cells.iter().all(|c| c.pass)
    }

    pub fn markers_match(&self) -> bool {
        self.markers.iter().all(|m| m.pass)
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset {}", self.dataset)?;
        for o in &self.orderings {
            let [l, m, h] = o.grand_mae;
            writeln!(
                f,
                "{} ordering {:<13} LowPop {l:.4} MedPop {m:.4} HighPop {h:.4}",
                verdict(o.pass),
                o.algorithm.to_string()
            )?;
        }
        for c in &self.cells {
            writeln!(
                f,
                "{} cell     {:<13} {:<8} observed {:.4} reference {:.4} ({:+.1}%, tolerance ±{:.0}%)",
                verdict(c.pass),
                c.algorithm.to_string(),
                c.group.to_string(),
                c.observed,
                c.reference,
                100.0 * c.relative_error,
                100.0 * c.tolerance
            )?;
        }
        for m in &self.markers {
            writeln!(
                f,
                "{} marker   {:<13} observed {:?} reference {:?}",
                verdict(m.pass),
                m.algorithm.to_string(),
                m.observed.map(|s| s.marker()).unwrap_or("n/a"),
                m.reference.marker()
            )?;
        }
        write!(f, "overall {}", verdict(self.passed()))
    }
}

/// Checks LowPop-highest ordering per algorithm and every grand MAE against
/// its reference cell. `tolerance` overrides the per-cell tolerances.
pub fn verify_against_reference(
    summary: &Summary,
    reference: &ReferenceTable,
    tolerance: Option<f64>,
) -> Result<VerificationReport> {
    let mut report = VerificationReport {
        dataset: summary.dataset.clone(),
        orderings: Vec::new(),
        cells: Vec::new(),
        markers: Vec::new(),
    };
    for row in &summary.results {
        let mut grand = [0.0; 3];
        for g in Group::ALL {
            let observed = row.grand_mae.get(g).ok_or_else(|| {
                Error::invalid(format!("summary has no {g} value for {}", row.algorithm))
            })?;
            let cell = reference.get(&summary.dataset, row.algorithm, g).ok_or_else(|| {
                Error::invalid(format!(
                    "reference has no cell for {} / {} / {g}",
                    summary.dataset, row.algorithm
                ))
            })?;
            let tol = tolerance.unwrap_or(cell.tolerance);
            let relative_error = (observed - cell.mae) / cell.mae;
            report.cells.push(CellCheck {
                algorithm: row.algorithm,
                group: g,
                observed,
                reference: cell.mae,
                tolerance: tol,
                relative_error,
                pass: (observed - cell.mae).abs() <= tol * cell.mae.abs() + 1e-12,
            });
            grand[g.index()] = observed;
        }
        report.orderings.push(OrderingCheck {
            algorithm: row.algorithm,
            grand_mae: grand,
            pass: grand[0] > grand[1] && grand[0] > grand[2],
        });
        let reference_marker = reference
            .get(&summary.dataset, row.algorithm, Group::LowPop)
            .map(|c| c.marker)
            .unwrap_or(Significance::None);
        report.markers.push(MarkerCheck {
            algorithm: row.algorithm,
            observed: row.significance,
            reference: reference_marker,
            pass: row.significance.is_some_and(|s| s.is_flagged()) == reference_marker.is_flagged(),
        });
    }
    Ok(report)
}
