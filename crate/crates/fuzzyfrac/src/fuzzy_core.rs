//! Fuzzy numbers stored as endpoint samples over a grid of r-levels.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Default absolute tolerance for endpoint comparisons.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Ascending r-levels in [0,1], starting at 0 and ending at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RGrid {
    values: Vec<f64>,
}

impl RGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidRGrid("need at least two levels".into()));
        }
        if values[0] != 0.0 || *values.last().unwrap() != 1.0 {
            return Err(Error::InvalidRGrid("levels must start at 0 and end at 1".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidRGrid("levels must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `levels` equally spaced levels, both endpoints included.
    pub fn uniform(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidRGrid(format!("{levels} levels requested, need at least 2")));
        }
        let m = (levels - 1) as f64;
        let values = (0..levels).map(|i| i as f64 / m).collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of a level equal to `r` within `tol`.
    pub fn index_of(&self, r: f64, tol: f64) -> Option<usize> {
        self.values.iter().position(|&v| (v - r).abs() <= tol)
    }

    /// Linear interpolation of level data at `r`.
    pub fn interpolate(&self, data: &[f64], r: f64) -> f64 {
        let v = &self.values;
        let r = r.clamp(0.0, 1.0);
        let k = match v.iter().position(|&t| t >= r) {
            Some(0) => return data[0],
            Some(k) => k,
            None => return data[v.len() - 1],
        };
        let t = (r - v[k - 1]) / (v[k] - v[k - 1]);
        data[k - 1] + t * (data[k] - data[k - 1])
    }
}

impl Default for RGrid {
    fn default() -> Self {
        Self::uniform(11).expect("11 levels")
    }
}

/// Which of the checkable stacking conditions failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StackingCondition {
    /// lower endpoint is not nondecreasing in r
    LowerMonotone,
    /// upper endpoint is not nonincreasing in r
    UpperMonotone,
    /// lower(1) > upper(1)
    CoreOrder,
}

impl StackingCondition {
    pub fn label(&self) -> &'static str {
        match self {
            StackingCondition::LowerMonotone => "(i)",
            StackingCondition::UpperMonotone => "(ii)",
            StackingCondition::CoreOrder => "(iii)",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackingViolation {
    pub condition: StackingCondition,
    /// Level index where the violation shows (for the monotone conditions, the upper index of the pair).
    pub level: usize,
    pub amount: f64,
}

/// Result of checking the discrete stacking conditions.
///
/// One-sided continuity cannot be decided on a finite grid, so it is always reported as unverified.
#[derive(Clone, Debug, PartialEq)]
pub struct StackingReport {
    pub violations: Vec<StackingViolation>,
    pub continuity_verified: bool,
}

impl StackingReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn fails(&self, c: StackingCondition) -> bool {
        self.violations.iter().any(|v| v.condition == c)
    }
}

impl fmt::Display for StackingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid (continuity unverified)")
        } else {
            let parts: Vec<String> = self
                .violations
                .iter()
                .map(|v| format!("{} at level {} by {:e}", v.condition.label(), v.level, v.amount))
                .collect();
            write!(f, "invalid: {}", parts.join("; "))
        }
    }
}

/// Check lower nondecreasing, upper nonincreasing and lower(1) <= upper(1), up to `tol`.
pub fn validate_stacking(lower: &[f64], upper: &[f64], tol: f64) -> StackingReport {
    let mut violations = Vec::new();
    for k in 1..lower.len() {
        let d = lower[k - 1] - lower[k];
        if d > tol || d.is_nan() {
            violations.push(StackingViolation {
                condition: StackingCondition::LowerMonotone,
                level: k,
                amount: d,
            });
        }
    }
    for k in 1..upper.len() {
        let d = upper[k] - upper[k - 1];
        if d > tol || d.is_nan() {
            violations.push(StackingViolation {
                condition: StackingCondition::UpperMonotone,
                level: k,
                amount: d,
            });
        }
    }
    if let (Some(l), Some(u)) = (lower.last(), upper.last()) {
        let d = l - u;
        if d > tol || d.is_nan() {
            violations.push(StackingViolation {
                condition: StackingCondition::CoreOrder,
                level: lower.len() - 1,
                amount: d,
            });
        }
    }
    StackingReport {
        violations,
        continuity_verified: false,
    }
}

/// A fuzzy number given by its level intervals `[lower[k], upper[k]]` at `rgrid.values()[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyNumber {
    rgrid: RGrid,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl FuzzyNumber {
    pub fn new(rgrid: RGrid, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(rgrid, lower, upper, DEFAULT_TOL)
    }

    pub fn with_tolerance(rgrid: RGrid, lower: Vec<f64>, upper: Vec<f64>, tol: f64) -> Result<Self> {
        if lower.len() != rgrid.len() || upper.len() != rgrid.len() {
            return Err(Error::Stacking(format!(
                "expected {} levels, got {} lower and {} upper",
                rgrid.len(),
                lower.len(),
                upper.len()
            )));
        }
        let report = validate_stacking(&lower, &upper, tol);
        if !report.is_valid() {
            return Err(Error::Stacking(report.to_string()));
        }
        Ok(Self { rgrid, lower, upper })
    }

    /// Skips the stacking check. Pair with [`validate_stacking`] when the data may be invalid.
    pub fn new_unchecked(rgrid: RGrid, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert!(lower.len() == rgrid.len() && upper.len() == rgrid.len());
        Self { rgrid, lower, upper }
    }

    pub fn crisp(rgrid: &RGrid, c: f64) -> Self {
        let n = rgrid.len();
        Self {
            rgrid: rgrid.clone(),
            lower: vec![c; n],
            upper: vec![c; n],
        }
    }

    pub fn zero(rgrid: &RGrid) -> Self {
        Self::crisp(rgrid, 0.0)
    }

    pub fn rgrid(&self) -> &RGrid {
        &self.rgrid
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Level interval at an arbitrary r, linearly interpolated between grid levels.
    pub fn level(&self, r: f64) -> (f64, f64) {
        (
            self.rgrid.interpolate(&self.lower, r),
            self.rgrid.interpolate(&self.upper, r),
        )
    }

    /// Same number sampled on another r-grid.
    pub fn resample(&self, rgrid: &RGrid) -> Self {
        let lower = rgrid.values().iter().map(|&r| self.rgrid.interpolate(&self.lower, r)).collect();
        let upper = rgrid.values().iter().map(|&r| self.rgrid.interpolate(&self.upper, r)).collect();
        Self {
            rgrid: rgrid.clone(),
            lower,
            upper,
        }
    }

    /// CSV with header `r,lower,upper`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,lower,upper\n");
        for (k, r) in self.rgrid.values().iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", r, self.lower[k], self.upper[k]);
        }
        s
    }

    /// Parse `r,lower,upper` rows (header required). Stacking is not enforced; see [`parse_level_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let (r, lower, upper) = parse_level_csv(text)?;
        Self::new(RGrid::new(r)?, lower, upper)
    }
}

/// Read the columns of an `r,lower,upper` CSV without validating stacking.
pub fn parse_level_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["r", "lower", "upper"] {
        return Err(Error::Parse(format!("expected header r,lower,upper, found {header}")));
    }
    let (mut r, mut lo, mut up) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 columns, found {}", i + 2, f.len())));
        }
        let p = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {s:?}: {e}", i + 2)))
        };
        r.push(p(f[0])?);
        lo.push(p(f[1])?);
        up.push(p(f[2])?);
    }
    Ok((r, lo, up))
}

/// Triangular fuzzy number <a0_lower, a1, a0_upper>.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangularFuzzyNumber {
    pub a0_lower: f64,
    pub a1: f64,
    pub a0_upper: f64,
}

impl TriangularFuzzyNumber {
    pub fn new(a0_lower: f64, a1: f64, a0_upper: f64) -> Result<Self> {
        if !(a0_lower <= a1 && a1 <= a0_upper) {
            return Err(Error::InvalidTriangular(a0_lower, a1, a0_upper));
        }
        Ok(Self { a0_lower, a1, a0_upper })
    }

    pub fn lower_at(&self, r: f64) -> f64 {
        self.a1 - (1.0 - r) * (self.a1 - self.a0_lower)
    }

    pub fn upper_at(&self, r: f64) -> f64 {
        self.a1 + (1.0 - r) * (self.a0_upper - self.a1)
    }

    pub fn expand(&self, rgrid: &RGrid) -> FuzzyNumber {
        FuzzyNumber {
            rgrid: rgrid.clone(),
            lower: rgrid.values().iter().map(|&r| self.lower_at(r)).collect(),
            upper: rgrid.values().iter().map(|&r| self.upper_at(r)).collect(),
        }
    }
}

fn same_grid(u: &FuzzyNumber, v: &FuzzyNumber) -> Result<()> {
    if u.rgrid == v.rgrid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

pub fn add(u: &FuzzyNumber, v: &FuzzyNumber) -> Result<FuzzyNumber> {
    same_grid(u, v)?;
    Ok(FuzzyNumber {
        rgrid: u.rgrid.clone(),
        lower: u.lower.iter().zip(&v.lower).map(|(a, b)| a + b).collect(),
        upper: u.upper.iter().zip(&v.upper).map(|(a, b)| a + b).collect(),
    })
}

pub fn scale(lambda: f64, u: &FuzzyNumber) -> FuzzyNumber {
    let lo: Vec<f64> = u.lower.iter().map(|a| lambda * a).collect();
    let up: Vec<f64> = u.upper.iter().map(|a| lambda * a).collect();
    let (lower, upper) = if lambda < 0.0 { (up, lo) } else { (lo, up) };
    FuzzyNumber {
        rgrid: u.rgrid.clone(),
        lower,
        upper,
    }
}

pub fn product(u: &FuzzyNumber, v: &FuzzyNumber) -> Result<FuzzyNumber> {
    same_grid(u, v)?;
    let n = u.rgrid.len();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for k in 0..n {
        let p = [
            u.lower[k] * v.lower[k],
            u.lower[k] * v.upper[k],
            u.upper[k] * v.lower[k],
            u.upper[k] * v.upper[k],
        ];
        lower.push(p.iter().copied().fold(f64::INFINITY, f64::min));
        upper.push(p.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(FuzzyNumber {
        rgrid: u.rgrid.clone(),
        lower,
        upper,
    })
}

/// Outcome of a gH-difference: the candidate endpoints and whether they form a fuzzy number.
#[derive(Clone, Debug, PartialEq)]
pub struct GhDifference {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub report: StackingReport,
    rgrid: RGrid,
}

impl GhDifference {
    pub fn is_valid(&self) -> bool {
        self.report.is_valid()
    }

    /// The difference as a fuzzy number, if it is one.
    pub fn into_fuzzy(self) -> Option<FuzzyNumber> {
        if self.report.is_valid() {
            Some(FuzzyNumber {
                rgrid: self.rgrid,
                lower: self.lower,
                upper: self.upper,
            })
        } else {
            None
        }
    }
}

pub fn gh_difference(u: &FuzzyNumber, v: &FuzzyNumber) -> Result<GhDifference> {
    gh_difference_tol(u, v, DEFAULT_TOL)
}

pub fn gh_difference_tol(u: &FuzzyNumber, v: &FuzzyNumber, tol: f64) -> Result<GhDifference> {
    same_grid(u, v)?;
    let n = u.rgrid.len();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for k in 0..n {
        let a = u.lower[k] - v.lower[k];
        let b = u.upper[k] - v.upper[k];
        lower.push(a.min(b));
        upper.push(a.max(b));
    }
    let report = validate_stacking(&lower, &upper, tol);
    Ok(GhDifference {
        lower,
        upper,
        report,
        rgrid: u.rgrid.clone(),
    })
}

/// Sup over levels of the larger endpoint deviation.
pub fn hausdorff(u: &FuzzyNumber, v: &FuzzyNumber) -> Result<f64> {
    same_grid(u, v)?;
    let mut d: f64 = 0.0;
    for k in 0..u.rgrid.len() {
        d = d
            .max((u.lower[k] - v.lower[k]).abs())
            .max((u.upper[k] - v.upper[k]).abs());
    }
    Ok(d)
}

/// Order relation between two fuzzy numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FuzzyOrdering {
    Less,
    LessEq,
    Equivalent,
    GreaterEq,
    Greater,
    Noncomparable,
}

impl fmt::Display for FuzzyOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FuzzyOrdering::Less => "≺",
            FuzzyOrdering::LessEq => "⪯",
            FuzzyOrdering::Equivalent => "≈",
            FuzzyOrdering::GreaterEq => "⪰",
            FuzzyOrdering::Greater => "≻",
            FuzzyOrdering::Noncomparable => "noncomparable",
        };
        f.write_str(s)
    }
}

pub fn compare(u: &FuzzyNumber, v: &FuzzyNumber) -> Result<FuzzyOrdering> {
    compare_tol(u, v, DEFAULT_TOL)
}

/// Level-wise endpoint comparison. Strictness needs one grid level where both endpoints differ by more than `tol`.
pub fn compare_tol(u: &FuzzyNumber, v: &FuzzyNumber, tol: f64) -> Result<FuzzyOrdering> {
    same_grid(u, v)?;
    let n = u.rgrid.len();
    let le = (0..n).all(|k| u.lower[k] <= v.lower[k] + tol && u.upper[k] <= v.upper[k] + tol);
    let ge = (0..n).all(|k| u.lower[k] + tol >= v.lower[k] && u.upper[k] + tol >= v.upper[k]);
    let out = match (le, ge) {
        (true, true) => FuzzyOrdering::Equivalent,
        (true, false) => {
            if (0..n).any(|k| u.lower[k] < v.lower[k] - tol && u.upper[k] < v.upper[k] - tol) {
                FuzzyOrdering::Less
            } else {
                FuzzyOrdering::LessEq
            }
        }
        (false, true) => {
            if (0..n).any(|k| u.lower[k] > v.lower[k] + tol && u.upper[k] > v.upper[k] + tol) {
                FuzzyOrdering::Greater
            } else {
                FuzzyOrdering::GreaterEq
            }
        }
        (false, false) => FuzzyOrdering::Noncomparable,
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(a: f64, b: f64, c: f64) -> FuzzyNumber {
        TriangularFuzzyNumber::new(a, b, c).unwrap().expand(&RGrid::default())
    }

    fn assert_close(u: &FuzzyNumber, v: &FuzzyNumber) {
        assert!(hausdorff(u, v).unwrap() < 1e-12, "{u:?} vs {v:?}");
    }

    #[test]
    fn rgrid_default_has_eleven_levels() {
        let g = RGrid::default();
        assert_eq!(g.len(), 11);
        assert_eq!(g.values()[0], 0.0);
        assert_eq!(g.values()[10], 1.0);
        assert!((g.values()[3] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rgrid_rejects_bad_levels() {
        assert!(RGrid::new(vec![0.0]).is_err());
        assert!(RGrid::new(vec![0.1, 1.0]).is_err());
        assert!(RGrid::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(RGrid::uniform(1).is_err());
    }

    #[test]
    fn addition_examples() {
        let g = RGrid::default();
        assert_close(&add(&tri(1., 2., 3.), &FuzzyNumber::zero(&g)).unwrap(), &tri(1., 2., 3.));
        assert_close(&add(&tri(1., 2., 3.), &tri(1., 2., 3.)).unwrap(), &tri(2., 4., 6.));
        assert_close(&add(&tri(-1., 0., 1.), &tri(0., 1., 2.)).unwrap(), &tri(-1., 1., 3.));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let u = tri(1., 2., 3.);
        let v = TriangularFuzzyNumber::new(1., 2., 3.).unwrap().expand(&RGrid::uniform(5).unwrap());
        assert_eq!(add(&u, &v), Err(Error::GridMismatch));
        assert!(product(&u, &v).is_err());
        assert!(gh_difference(&u, &v).is_err());
        assert!(hausdorff(&u, &v).is_err());
        assert!(compare(&u, &v).is_err());
    }

    #[test]
    fn scaling_examples() {
        let g = RGrid::default();
        let u = tri(1., 2., 3.);
        assert_close(&scale(1.0, &u), &u);
        assert_close(&scale(0.0, &u), &FuzzyNumber::zero(&g));
        assert_close(&scale(-1.0, &u), &tri(-3., -2., -1.));
    }

    #[test]
    fn product_examples() {
        let g = RGrid::default();
        let u = tri(1., 2., 3.);
        assert_close(&product(&u, &FuzzyNumber::crisp(&g, 1.0)).unwrap(), &u);
        let sq = product(&u, &u).unwrap();
        for (k, &r) in g.values().iter().enumerate() {
            assert!((sq.lower()[k] - (1.0 + r).powi(2)).abs() < 1e-12);
            assert!((sq.upper()[k] - (3.0 - r).powi(2)).abs() < 1e-12);
        }
        let w = tri(-1., 0., 1.);
        let p = product(&w, &w).unwrap();
        for (k, &r) in g.values().iter().enumerate() {
            assert!((p.lower()[k] + (1.0 - r).powi(2)).abs() < 1e-12);
            assert!((p.upper()[k] - (1.0 - r).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn gh_difference_examples() {
        let g = RGrid::default();
        let u = tri(1., 2., 3.);
        let d = gh_difference(&u, &u).unwrap();
        assert!(d.is_valid());
        assert_close(&d.into_fuzzy().unwrap(), &FuzzyNumber::zero(&g));
        let d = gh_difference(&u, &tri(0., 1., 2.)).unwrap();
        assert_close(&d.into_fuzzy().unwrap(), &FuzzyNumber::crisp(&g, 1.0));
    }

    #[test]
    fn gh_difference_reports_invalid_candidate() {
        // Both level differences nonmonotone in r: no fuzzy number.
        let g = RGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let u = FuzzyNumber::new(g.clone(), vec![0.0, 0.0, 0.0], vec![4.0, 1.0, 0.0]).unwrap();
        let v = FuzzyNumber::new(g, vec![-1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]).unwrap();
        let d = gh_difference(&u, &v).unwrap();
        assert!(!d.is_valid());
        assert_eq!(d.lower.len(), 3);
        assert!(d.into_fuzzy().is_none());
    }

    #[test]
    fn hausdorff_examples() {
        let g = RGrid::default();
        let u = tri(1., 2., 3.);
        assert_eq!(hausdorff(&u, &u).unwrap(), 0.0);
        assert!((hausdorff(&u, &tri(2., 3., 4.)).unwrap() - 1.0).abs() < 1e-12);
        assert!((hausdorff(&FuzzyNumber::zero(&g), &tri(-1., 0., 1.)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compare_examples() {
        let u = tri(1., 2., 3.);
        assert_eq!(compare(&u, &u).unwrap(), FuzzyOrdering::Equivalent);
        assert_eq!(compare(&u, &tri(2., 3., 4.)).unwrap(), FuzzyOrdering::Less);
        assert_eq!(compare(&tri(2., 3., 4.), &u).unwrap(), FuzzyOrdering::Greater);
        assert_eq!(compare(&tri(0., 1., 4.), &u).unwrap(), FuzzyOrdering::Noncomparable);
        // equal upper everywhere, lower smaller: only the weak relation
        assert_eq!(compare(&tri(0., 2., 3.), &u).unwrap(), FuzzyOrdering::LessEq);
        assert_eq!(compare(&u, &tri(0., 2., 3.)).unwrap(), FuzzyOrdering::GreaterEq);
    }

    #[test]
    fn stacking_examples() {
        let ok = validate_stacking(&[0.0, 0.5, 1.0], &[3.0, 2.5, 2.0], DEFAULT_TOL);
        assert!(ok.is_valid());
        assert!(!ok.continuity_verified);
        let bad = validate_stacking(&[0.0, 1.0, 0.5], &[3.0, 2.5, 2.0], DEFAULT_TOL);
        assert!(bad.fails(StackingCondition::LowerMonotone));
        assert!(!bad.fails(StackingCondition::UpperMonotone));
        let crossed = validate_stacking(&[0.0, 1.0, 2.0], &[3.0, 2.0, 1.0], DEFAULT_TOL);
        assert!(crossed.fails(StackingCondition::CoreOrder));
        assert!(!crossed.fails(StackingCondition::LowerMonotone));
    }

    #[test]
    fn triangular_core_is_crisp() {
        let t = TriangularFuzzyNumber::new(-1.0, 0.25, 4.0).unwrap();
        let f = t.expand(&RGrid::default());
        assert_eq!(f.lower()[10], 0.25);
        assert_eq!(f.upper()[10], 0.25);
        assert_eq!(f.lower()[0], -1.0);
        assert_eq!(f.upper()[0], 4.0);
        assert!(TriangularFuzzyNumber::new(1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn level_interpolation() {
        let f = tri(0., 1., 2.);
        let (l, u) = f.level(0.25);
        assert!((l - 0.25).abs() < 1e-12 && (u - 1.75).abs() < 1e-12);
        let coarse = f.resample(&RGrid::uniform(3).unwrap());
        assert_eq!(coarse.lower(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn csv_round_trip() {
        let f = tri(-1., 0., 1.);
        let back = FuzzyNumber::from_csv(&f.to_csv()).unwrap();
        assert_eq!(back, f);
        assert!(FuzzyNumber::from_csv("r,lo,up\n0,1,2\n").is_err());
        assert!(FuzzyNumber::from_csv("r,lower,upper\n0,1\n").is_err());
    }

    #[test]
    fn constructor_enforces_stacking() {
        let g = RGrid::new(vec![0.0, 1.0]).unwrap();
        assert!(FuzzyNumber::new(g.clone(), vec![1.0, 0.0], vec![2.0, 2.0]).is_err());
        assert!(FuzzyNumber::new(g, vec![0.0], vec![2.0, 2.0]).is_err());
    }
}
