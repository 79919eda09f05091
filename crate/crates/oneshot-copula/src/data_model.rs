//! Domain types for one-shot test data with two failure modes.
//!
//! A test cell is a (inspection time, stress) condition with the four
//! observed category counts: no failure, mode 1 only, mode 2 only, both.
//! All types are immutable value types; share them freely across threads.

use crate::error::{Error, Result};

/// One inspection condition: when the devices were inspected and at which
/// stress level they were tested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestCondition {
    pub inspection_time: f64,
    pub stress: f64,
}

/// Category counts for one test cell. `n0` devices showed no failure,
/// `n1`/`n2` exactly one mode, `n12` both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellCounts {
    pub n0: u64,
    pub n1: u64,
    pub n2: u64,
    pub n12: u64,
}

impl CellCounts {
    pub fn new(n0: u64, n1: u64, n2: u64, n12: u64) -> Self {
        CellCounts { n0, n1, n2, n12 }
    }

    /// Devices tested in this cell.
    pub fn total(&self) -> u64 {
        self.n0 + self.n1 + self.n2 + self.n12
    }

    /// Devices that experienced failure mode 1 (alone or with mode 2).
    pub fn mode1_total(&self) -> u64 {
        self.n1 + self.n12
    }

    /// Devices that experienced failure mode 2 (alone or with mode 1).
    pub fn mode2_total(&self) -> u64 {
        self.n2 + self.n12
    }

    pub fn as_array(&self) -> [u64; 4] {
        [self.n0, self.n1, self.n2, self.n12]
    }
}

/// Observed failure proportions for the two modes in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMargins {
    pub f1_hat: f64,
    pub f2_hat: f64,
}

/// A full one-shot experiment: a list of cells plus the distinct stress
/// levels in ascending order. Nothing requires the conditions to form a
/// complete grid; the objectives are sums over the observed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct OneShotDataset {
    cells: Vec<(TestCondition, CellCounts)>,
    stress_levels: Vec<f64>,
}

impl OneShotDataset {
    /// Builds a dataset and derives its distinct stress levels. Structural
    /// problems are reported by [`validate_dataset`], not here, so that
    /// invalid data can still be inspected.
    pub fn new(cells: Vec<(TestCondition, CellCounts)>) -> Self {
        let mut stress_levels: Vec<f64> = cells.iter().map(|(c, _)| c.stress).collect();
        stress_levels.sort_by(f64::total_cmp);
        stress_levels.dedup();
        OneShotDataset {
            cells,
            stress_levels,
        }
    }

    pub fn cells(&self) -> &[(TestCondition, CellCounts)] {
        &self.cells
    }

    /// Distinct stress levels, ascending.
    pub fn stress_levels(&self) -> &[f64] {
        &self.stress_levels
    }

    /// Total devices across all cells.
    pub fn total_units(&self) -> u64 {
        self.cells.iter().map(|(_, n)| n.total()).sum()
    }
}

/// Observed failure proportions `(N1/K, N2/K)` for one cell.
pub fn empirical_margins(cell: &CellCounts) -> Result<EmpiricalMargins> {
    let k = cell.total();
    if k == 0 {
        return Err(Error::EmptyCell);
    }
    Ok(EmpiricalMargins {
        f1_hat: cell.mode1_total() as f64 / k as f64,
        f2_hat: cell.mode2_total() as f64 / k as f64,
    })
}

/// Observed category proportions `(n0, n1, n2, n12) / K` for one cell.
pub fn empirical_cell_probs(cell: &CellCounts) -> Result<[f64; 4]> {
    let k = cell.total();
    if k == 0 {
        return Err(Error::EmptyCell);
    }
    let k = k as f64;
    Ok([
        cell.n0 as f64 / k,
        cell.n1 as f64 / k,
        cell.n2 as f64 / k,
        cell.n12 as f64 / k,
    ])
}

/// Outcome of [`validate_dataset`]. `violations` are structural defects
/// that make fitting meaningless; `warnings` flag designs that restrict
/// what can be estimated (a single stress level cannot identify a slope).
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every dataset invariant and reports all findings; never fails.
pub fn validate_dataset(ds: &OneShotDataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    if ds.cells().is_empty() {
        report.violations.push("dataset has no cells".to_string());
        return report;
    }
    for (idx, (cond, counts)) in ds.cells().iter().enumerate() {
        if !cond.inspection_time.is_finite() || cond.inspection_time <= 0.0 {
            report.violations.push(format!(
                "cell {idx}: inspection_time must be positive, got {}",
                cond.inspection_time
            ));
        }
        if !cond.stress.is_finite() {
            report
                .violations
                .push(format!("cell {idx}: stress must be finite, got {}", cond.stress));
        }
        if counts.total() == 0 {
            report
                .violations
                .push(format!("cell {idx}: all counts are zero"));
        }
    }
    for (i, (a, _)) in ds.cells().iter().enumerate() {
        for (b, _) in ds.cells().iter().skip(i + 1) {
            if a.inspection_time == b.inspection_time && a.stress == b.stress {
                report.violations.push(format!(
                    "duplicate condition (inspection_time={}, stress={})",
                    a.inspection_time, a.stress
                ));
            }
        }
    }
    if ds.stress_levels().len() < 2 {
        report
            .warnings
            .push("slope unidentified: fewer than 2 distinct stress levels".to_string());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn margins_of_known_cells() {
        // Control group, day 100.
        let m = empirical_margins(&CellCounts::new(58, 13, 0, 1)).unwrap();
        assert_eq!(m.f1_hat, 14.0 / 72.0);
        assert_eq!(m.f2_hat, 1.0 / 72.0);

        // No failures at all.
        let m = empirical_margins(&CellCounts::new(50, 0, 0, 0)).unwrap();
        assert_eq!(m.f1_hat, 0.0);
        assert_eq!(m.f2_hat, 0.0);

        // Irradiated group, day 700: mode 2 saturated.
        let m = empirical_margins(&CellCounts::new(0, 0, 1, 28)).unwrap();
        assert_eq!(m.f1_hat, 28.0 / 29.0);
        assert_eq!(m.f2_hat, 1.0);
    }

    #[test]
    fn empty_cell_is_rejected() {
        assert!(matches!(
            empirical_margins(&CellCounts::new(0, 0, 0, 0)),
            Err(Error::EmptyCell)
        ));
        assert!(empirical_cell_probs(&CellCounts::new(0, 0, 0, 0)).is_err());
    }

    #[test]
    fn cell_probs_of_known_cells() {
        let p = empirical_cell_probs(&CellCounts::new(58, 13, 0, 1)).unwrap();
        assert_eq!(p, [58.0 / 72.0, 13.0 / 72.0, 0.0, 1.0 / 72.0]);

        let p = empirical_cell_probs(&CellCounts::new(40, 0, 0, 0)).unwrap();
        assert_eq!(p, [1.0, 0.0, 0.0, 0.0]);

        let p = empirical_cell_probs(&CellCounts::new(10, 10, 10, 10)).unwrap();
        assert_eq!(p, [0.25; 4]);
    }

    #[test]
    fn dataset_collects_sorted_distinct_stresses() {
        let ds = OneShotDataset::new(vec![
            (cond(10.0, 1.0), CellCounts::new(1, 0, 0, 0)),
            (cond(10.0, 0.0), CellCounts::new(1, 0, 0, 0)),
            (cond(20.0, 1.0), CellCounts::new(1, 0, 0, 0)),
        ]);
        assert_eq!(ds.stress_levels(), &[0.0, 1.0]);
        assert_eq!(ds.total_units(), 3);
    }

    #[test]
    fn validation_flags_problems() {
        let ds = OneShotDataset::new(vec![
            (cond(10.0, 0.0), CellCounts::new(5, 0, 0, 0)),
            (cond(10.0, 0.0), CellCounts::new(0, 0, 0, 0)),
        ]);
        let report = validate_dataset(&ds);
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.contains("duplicate")));
        assert!(report.violations.iter().any(|v| v.contains("zero")));
        assert!(report.warnings.iter().any(|w| w.contains("slope unidentified")));

        let ds = OneShotDataset::new(vec![
            (cond(10.0, 0.0), CellCounts::new(5, 1, 1, 1)),
            (cond(10.0, 1.0), CellCounts::new(5, 1, 1, 1)),
        ]);
        let report = validate_dataset(&ds);
        assert!(report.is_valid());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn validation_rejects_nonpositive_inspection_time() {
        let ds = OneShotDataset::new(vec![(cond(0.0, 0.0), CellCounts::new(5, 0, 0, 0))]);
        assert!(!validate_dataset(&ds).is_valid());
    }

    fn cond(inspection_time: f64, stress: f64) -> TestCondition {
        TestCondition {
            inspection_time,
            stress,
        }
    }

    proptest! {
        #[test]
        fn margins_consistent_with_cell_probs(
            n0 in 0u64..2000, n1 in 0u64..2000, n2 in 0u64..2000, n12 in 0u64..2000
        ) {
            prop_assume!(n0 + n1 + n2 + n12 > 0);
            let cell = CellCounts::new(n0, n1, n2, n12);
            let m = empirical_margins(&cell).unwrap();
            let p = empirical_cell_probs(&cell).unwrap();
            // Equal up to one rounding step of the final additions.
            assert_relative_eq!(m.f1_hat, p[1] + p[3], max_relative = 1e-15);
            assert_relative_eq!(m.f2_hat, p[2] + p[3], max_relative = 1e-15);
        }

        #[test]
        fn cell_probs_lie_on_simplex(
            n0 in 0u64..100000, n1 in 0u64..100000, n2 in 0u64..100000, n12 in 0u64..100000
        ) {
            prop_assume!(n0 + n1 + n2 + n12 > 0);
            let p = empirical_cell_probs(&CellCounts::new(n0, n1, n2, n12)).unwrap();
            for x in p {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
