//! Phase-space grid scans: barrier validity, set membership, singular
//! regions and the switching structure of the activated construction.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cbf::CbfInstance;
use crate::model::{constraint_critical_point_check, relative_degree_check, ClassKappaE, Plant};
use crate::Error;

/// `‖L_g h‖` below which a node counts as singular.
pub const SINGULAR_TOL: f64 = 1e-10;
/// Slack on `s ≥ 0` matched to [`SINGULAR_TOL`].
pub const SWITCHING_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    /// State component swept along this axis.
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridAxis {
    /// Node `i`; endpoints are hit exactly and the midpoint of a symmetric
    /// window is exactly zero.
    pub fn node(&self, i: usize) -> f64 {
        if self.count == 1 {
            return self.lo;
        }
        let t = i as f64 / (self.count - 1) as f64;
        self.lo * (1.0 - t) + self.hi * t
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count.max(2) - 1) as f64
    }
}

/// A rectangular grid over selected state components; the remaining
/// components are fixed at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub base: Vec<f64>,
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    /// `φ ∈ [−π/2, π/2]`, `ω ∈ [−4, 4]` with `n × n` nodes.
    pub fn pendulum_window(n: usize) -> Self {
        GridSpec {
            base: vec![0.0, 0.0],
            axes: vec![
                GridAxis { index: 0, lo: -PI / 2.0, hi: PI / 2.0, count: n },
                GridAxis { index: 1, lo: -4.0, hi: 4.0, count: n },
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), Error> {
        for a in &self.axes {
            if a.count < 2 {
                return Err(Error::InvalidParameter(format!("axis {} needs at least 2 nodes", a.index)));
            }
            if a.index >= self.base.len() {
                return Err(Error::InvalidParameter(format!("axis index {} out of range", a.index)));
            }
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(Error::InvalidParameter(format!("axis {} has an empty window", a.index)));
            }
        }
        Ok(())
    }

    /// Node `k` in row-major order: the first axis varies slowest.
    pub fn node(&self, mut k: usize) -> Vec<f64> {
        let mut x = self.base.clone();
        for a in self.axes.iter().rev() {
            x[a.index] = a.node(k % a.count);
            k /= a.count;
        }
        x
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridScanRecord {
    pub x: Vec<f64>,
    pub h: f64,
    pub psi: f64,
    pub lgh_norm: f64,
    /// `L_f h + α(h)`.
    pub margin: f64,
    pub s: Option<f64>,
    pub in_s: bool,
    pub in_c: bool,
    pub singular: bool,
    pub validity_violation: bool,
    /// Node lies outside the extended set; numeric fields are NaN.
    pub excluded: bool,
}

impl GridScanRecord {
    fn excluded(x: Vec<f64>) -> Self {
        GridScanRecord {
            x,
            h: f64::NAN,
            psi: f64::NAN,
            lgh_norm: f64::NAN,
            margin: f64::NAN,
            s: None,
            in_s: false,
            in_c: false,
            singular: false,
            validity_violation: false,
            excluded: true,
        }
    }
}

/// Evaluates `cbf` at every grid node; `alpha` is the filter's class-K function.
pub fn grid_scan(
    plant: &dyn Plant,
    cbf: &CbfInstance,
    alpha: ClassKappaE,
    grid: &GridSpec,
) -> Result<Vec<GridScanRecord>, Error> {
    grid.validate()?;
    (0..grid.len())
        .into_par_iter()
        .map(|k| scan_node(plant, cbf, alpha, grid.node(k)))
        .collect()
}

fn scan_node(plant: &dyn Plant, cbf: &CbfInstance, alpha: ClassKappaE, x: Vec<f64>) -> Result<GridScanRecord, Error> {
    if !plant.in_extended_set(&x) {
        return Ok(GridScanRecord::excluded(x));
    }
    let lie = match cbf.lie(plant, &x) {
        Ok(l) => l,
        Err(Error::OutsideDomain(_) | Error::SingularVirtualController(_)) => return Ok(GridScanRecord::excluded(x)),
        Err(e) => return Err(e),
    };
    let psi = cbf.psi(&x);
    let s = cbf.switching(&x)?;
    let lgh_norm = lie.lg_norm();
    let margin = lie.lf + alpha.apply(lie.value);
    let singular = lgh_norm < SINGULAR_TOL;
    Ok(GridScanRecord {
        in_s: lie.value >= 0.0,
        in_c: psi >= 0.0,
        singular,
        validity_violation: singular && margin <= 0.0,
        h: lie.value,
        psi,
        lgh_norm,
        margin,
        s,
        x,
        excluded: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum InclusionCheck {
    /// The construction only protects `S ∩ C`.
    NotClaimed,
    /// Nodes with `h ≥ 0` but `ψ < 0`.
    Checked { violations: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub nodes: usize,
    pub excluded: usize,
    pub in_s: usize,
    pub in_c: usize,
    pub singular: usize,
    pub validity_violations: Vec<Vec<f64>>,
    pub inclusion: InclusionCheck,
}

impl ValidityReport {
    pub fn passes(&self) -> bool {
        self.validity_violations.is_empty()
            && match &self.inclusion {
                InclusionCheck::NotClaimed => true,
                InclusionCheck::Checked { violations } => violations.is_empty(),
            }
    }

    pub fn inclusion_violations(&self) -> usize {
        match &self.inclusion {
            InclusionCheck::NotClaimed => 0,
            InclusionCheck::Checked { violations } => violations.len(),
        }
    }
}

/// Summarizes a scan. Panics on an empty scan.
pub fn validity_report(records: &[GridScanRecord], inclusion_claimed: bool) -> ValidityReport {
    assert!(!records.is_empty(), "validity report of an empty scan");
    let live = || records.iter().filter(|r| !r.excluded);
    let validity_violations = live().filter(|r| r.validity_violation).map(|r| r.x.clone()).collect();
    let inclusion = if inclusion_claimed {
        InclusionCheck::Checked {
            violations: live().filter(|r| r.in_s && !r.in_c).map(|r| r.x.clone()).collect(),
        }
    } else {
        InclusionCheck::NotClaimed
    };
    ValidityReport {
        nodes: records.len(),
        excluded: records.len() - live().count(),
        in_s: live().filter(|r| r.in_s).count(),
        in_c: live().filter(|r| r.in_c).count(),
        singular: live().filter(|r| r.singular).count(),
        validity_violations,
        inclusion,
    }
}

/// `singular ⟺ s ≥ −1e-10` at every scanned node carrying a switching value.
pub fn abc_equivalence_check(records: &[GridScanRecord]) -> bool {
    records
        .iter()
        .filter(|r| !r.excluded)
        .all(|r| match r.s {
            Some(s) => r.singular == (s >= -SWITCHING_SLACK),
            None => false,
        })
}

/// Node-wise comparison of two safe sets scanned on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeSetComparison {
    pub first_only: Vec<Vec<f64>>,
    pub second_only: Vec<Vec<f64>>,
    pub both: usize,
}

impl SafeSetComparison {
    /// The second set is a strict subset of the first.
    pub fn first_strictly_contains_second(&self) -> bool {
        self.second_only.is_empty() && !self.first_only.is_empty()
    }
}

pub fn compare_safe_sets(first: &[GridScanRecord], second: &[GridScanRecord]) -> SafeSetComparison {
    assert_eq!(first.len(), second.len(), "scans must share a grid");
    let mut cmp = SafeSetComparison { first_only: Vec::new(), second_only: Vec::new(), both: 0 };
    for (a, b) in first.iter().zip(second) {
        match (a.in_s, b.in_s) {
            (true, true) => cmp.both += 1,
            (true, false) => cmp.first_only.push(a.x.clone()),
            (false, true) => cmp.second_only.push(b.x.clone()),
            _ => {}
        }
    }
    cmp
}

/// Sampled standing-assumption checks for a plant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionReport {
    pub checked: usize,
    /// States skipped for the rank test (e.g. near-zero speed).
    pub skipped: usize,
    pub relative_degree_failures: Vec<Vec<f64>>,
    pub critical_point_failures: Vec<Vec<f64>>,
}

impl AssumptionReport {
    pub fn passes(&self) -> bool {
        self.relative_degree_failures.is_empty() && self.critical_point_failures.is_empty()
    }
}

/// Checks the relative-degree and critical-point assumptions on `grid`.
/// States rejected by `rank_filter` are only checked for the latter.
pub fn assumption_report(
    plant: &dyn Plant,
    grid: &GridSpec,
    rank_filter: impl Fn(&[f64]) -> bool,
) -> Result<AssumptionReport, Error> {
    let mut report = AssumptionReport::default();
    for x in grid.nodes() {
        if !plant.in_extended_set(&x) {
            continue;
        }
        report.checked += 1;
        if !constraint_critical_point_check(plant, &x) {
            report.critical_point_failures.push(x.clone());
        }
        if !rank_filter(&x) {
            report.skipped += 1;
            continue;
        }
        if !relative_degree_check(plant, &x)?.holds() {
            report.relative_degree_failures.push(x);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbf::CbfTag;
    use crate::systems::{Pendulum, PendulumParams, Scenario};

    fn scan(tag: CbfTag, n: usize) -> Vec<GridScanRecord> {
        let sc = Scenario::Pendulum(PendulumParams::default());
        let cbf = sc.cbf(tag).unwrap();
        grid_scan(&Pendulum, &cbf, ClassKappaE::linear(1.0).unwrap(), &GridSpec::pendulum_window(n)).unwrap()
    }

    #[test]
    fn grid_nodes_are_row_major_and_exact() {
        let g = GridSpec::pendulum_window(401);
        assert_eq!(g.len(), 401 * 401);
        assert_eq!(g.node(0), vec![-PI / 2.0, -4.0]);
        assert_eq!(g.node(1), vec![-PI / 2.0, g.axes[1].node(1)]);
        assert!((g.node(1)[1] + 3.98).abs() < 1e-12);
        assert_eq!(g.node(401)[0], g.axes[0].node(1));
        assert_eq!(g.axes[0].node(200), 0.0);
        assert_eq!(g.axes[1].node(200), 0.0);
        assert_eq!(g.node(g.len() - 1), vec![PI / 2.0, 4.0]);
    }

    #[test]
    fn tiny_grid_has_four_nodes() {
        assert_eq!(scan(CbfTag::Abc, 2).len(), 4);
        let bad = GridSpec::pendulum_window(1);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn record_invariants() {
        for tag in CbfTag::ALL {
            for r in scan(tag, 41) {
                assert_eq!(r.in_s, r.h >= 0.0);
                assert_eq!(r.in_c, r.psi >= 0.0);
                assert!(!r.validity_violation || r.singular);
            }
        }
    }

    #[test]
    fn abc_sign_checks_at_named_nodes() {
        let sc = Scenario::Pendulum(PendulumParams::default());
        let cbf = sc.cbf(CbfTag::Abc).unwrap();
        let grid = |phi: f64, omega: f64| GridSpec {
            base: vec![phi, omega],
            axes: vec![GridAxis { index: 0, lo: phi, hi: phi + 1e-3, count: 2 }],
        };
        let a = ClassKappaE::linear(1.0).unwrap();
        let r = &grid_scan(&Pendulum, &cbf, a, &grid(0.3, 1.0)).unwrap()[0];
        assert!(r.s.unwrap() < 0.0 && !r.singular);
        let r = &grid_scan(&Pendulum, &cbf, a, &grid(-0.3, 1.0)).unwrap()[0];
        assert!(r.s.unwrap() > 0.0 && r.singular);
    }

    #[test]
    fn report_marks_hocbf_inclusion_as_not_claimed() {
        let sc = Scenario::Pendulum(PendulumParams::default());
        let recs = scan(CbfTag::Hocbf, 41);
        let rep = validity_report(&recs, sc.cbf(CbfTag::Hocbf).unwrap().guarantees_inclusion());
        assert_eq!(rep.inclusion, InclusionCheck::NotClaimed);
        assert!(!rep.validity_violations.is_empty());
    }

    #[test]
    fn scans_are_deterministic() {
        let a = scan(CbfTag::Abc, 61);
        let b = scan(CbfTag::Abc, 61);
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.h.to_bits(), q.h.to_bits());
            assert_eq!(p.margin.to_bits(), q.margin.to_bits());
            assert_eq!(p.lgh_norm.to_bits(), q.lgh_norm.to_bits());
        }
    }

    #[test]
    fn pendulum_assumptions_hold() {
        let rep = assumption_report(&Pendulum, &GridSpec::pendulum_window(41), |_| true).unwrap();
        assert!(rep.passes());
        assert_eq!(rep.checked, 41 * 41);
    }
}
