//! The four-dimensional reservoir hyper-parameter domain.
//!
//! Points live in natural coordinates (`HyperPoint`) and in the unit cube.
//! The unit cube is where the surrogate model and all distance checks work:
//! linear dimensions map affinely, log-scaled dimensions map affinely in
//! log10 space, so one kernel length-scale regime covers values spanning
//! many decades.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DIMS: usize = 4;
pub const DIM_NAMES: [&str; DIMS] = ["alpha", "beta", "gamma", "rho"];

/// Infinity-norm radius in unit coordinates below which two points count as
/// the same setting.
pub const DEFAULT_DUPLICATE_TOL: f64 = 1e-6;

pub type UnitPoint = [f64; DIMS];

/// One setting of the reservoir hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    /// Feedback gain (diagonal of the interconnection matrix).
    pub alpha: f64,
    /// Input gain (scale of the input mask).
    pub beta: f64,
    /// Interconnection gain (value of the off-diagonal nonzeros).
    pub gamma: f64,
    /// Interconnection density (fraction of nonzero off-diagonal entries).
    pub rho: f64,
}

impl HyperPoint {
    pub fn new(alpha: f64, beta: f64, gamma: f64, rho: f64) -> Self {
        HyperPoint {
            alpha,
            beta,
            gamma,
            rho,
        }
    }

    pub fn to_array(self) -> [f64; DIMS] {
        [self.alpha, self.beta, self.gamma, self.rho]
    }

    pub fn from_array(v: [f64; DIMS]) -> Self {
        HyperPoint::new(v[0], v[1], v[2], v[3])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log10,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    pub scale: Scale,
}

impl Interval {
    pub fn new(low: f64, high: f64, scale: Scale) -> Result<Self> {
        if !(low.is_finite() && high.is_finite()) || low >= high {
            return Err(Error::domain(format!(
                "interval bounds must be finite with low < high, got [{low}, {high}]"
            )));
        }
        if scale == Scale::Log10 && low <= 0.0 {
            return Err(Error::domain(format!(
                "log-scaled interval needs a positive lower bound, got {low}"
            )));
        }
        Ok(Interval { low, high, scale })
    }

    pub fn linear(low: f64, high: f64) -> Result<Self> {
        Interval::new(low, high, Scale::Linear)
    }

    pub fn log10(low: f64, high: f64) -> Result<Self> {
        Interval::new(low, high, Scale::Log10)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high
    }

    fn to_unit(&self, v: f64) -> f64 {
        let u = match self.scale {
            Scale::Linear => (v - self.low) / (self.high - self.low),
            Scale::Log10 => {
                let (lo, hi) = (self.low.log10(), self.high.log10());
                (v.log10() - lo) / (hi - lo)
            }
        };
        u.clamp(0.0, 1.0)
    }

    fn from_unit(&self, u: f64) -> f64 {
        // Endpoints are returned verbatim so bounds survive the round trip exactly.
        if u <= 0.0 {
            return self.low;
        }
        if u >= 1.0 {
            return self.high;
        }
        let v = match self.scale {
            Scale::Linear => self.low + u * (self.high - self.low),
            Scale::Log10 => {
                let (lo, hi) = (self.low.log10(), self.high.log10());
                10f64.powf(lo + u * (hi - lo))
            }
        };
        v.clamp(self.low, self.high)
    }
}

/// Bounds and scales of the search domain, with optionally pinned dimensions.
///
/// A pinned dimension keeps a single value; campaigns search only over the
/// free dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct HyperSpace {
    intervals: [Interval; DIMS],
    pinned: [Option<f64>; DIMS],
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    intervals: [Interval; DIMS],
    #[serde(default)]
    pinned: [Option<f64>; DIMS],
}

impl TryFrom<RawSpace> for HyperSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        let mut space = HyperSpace::new(raw.intervals)?;
        for (dim, value) in raw.pinned.iter().enumerate() {
            if let Some(v) = value {
                space = space.pin(dim, *v)?;
            }
        }
        Ok(space)
    }
}

impl From<HyperSpace> for RawSpace {
    fn from(space: HyperSpace) -> Self {
        RawSpace {
            intervals: space.intervals,
            pinned: space.pinned,
        }
    }
}

impl HyperSpace {
    pub fn new(intervals: [Interval; DIMS]) -> Result<Self> {
        for (dim, iv) in intervals.iter().enumerate() {
            Interval::new(iv.low, iv.high, iv.scale)
                .map_err(|e| Error::domain(format!("{}: {e}", DIM_NAMES[dim])))?;
        }
        Ok(HyperSpace {
            intervals,
            pinned: [None; DIMS],
        })
    }

    /// α linear on [0.1, 1.5]; β, γ, ρ log-scaled on [1e-10, 1].
    pub fn standard() -> Self {
        HyperSpace {
            intervals: [
                Interval {
                    low: 0.1,
                    high: 1.5,
                    scale: Scale::Linear,
                },
                Interval {
                    low: 1e-10,
                    high: 1.0,
                    scale: Scale::Log10,
                },
                Interval {
                    low: 1e-10,
                    high: 1.0,
                    scale: Scale::Log10,
                },
                Interval {
                    low: 1e-10,
                    high: 1.0,
                    scale: Scale::Log10,
                },
            ],
            pinned: [None; DIMS],
        }
    }

    /// Fix dimension `dim` to `value`, removing it from the search.
    pub fn pin(mut self, dim: usize, value: f64) -> Result<Self> {
        let iv = self
            .intervals
            .get(dim)
            .ok_or_else(|| Error::domain(format!("no dimension {dim}")))?;
        if !iv.contains(value) {
            return Err(Error::domain(format!(
                "{} pinned at {value}, outside [{}, {}]",
                DIM_NAMES[dim], iv.low, iv.high
            )));
        }
        self.pinned[dim] = Some(value);
        Ok(self)
    }

    pub fn interval(&self, dim: usize) -> &Interval {
        &self.intervals[dim]
    }

    pub fn pinned(&self, dim: usize) -> Option<f64> {
        self.pinned[dim]
    }

    pub fn free_dims(&self) -> Vec<usize> {
        (0..DIMS).filter(|&d| self.pinned[d].is_none()).collect()
    }

    pub fn contains(&self, p: &HyperPoint) -> bool {
        p.to_array()
            .iter()
            .zip(&self.intervals)
            .all(|(v, iv)| iv.contains(*v))
    }

    pub fn to_unit(&self, p: &HyperPoint) -> Result<UnitPoint> {
        let values = p.to_array();
        let mut u = [0.0; DIMS];
        for dim in 0..DIMS {
            let iv = &self.intervals[dim];
            let v = values[dim];
            if !iv.contains(v) {
                return Err(Error::domain(format!(
                    "{} = {v} outside [{}, {}]",
                    DIM_NAMES[dim], iv.low, iv.high
                )));
            }
            u[dim] = iv.to_unit(v);
        }
        Ok(u)
    }

    pub fn from_unit(&self, u: &UnitPoint) -> Result<HyperPoint> {
        let mut v = [0.0; DIMS];
        for dim in 0..DIMS {
            let c = u[dim];
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::domain(format!(
                    "unit coordinate {} = {c} outside [0, 1]",
                    DIM_NAMES[dim]
                )));
            }
            v[dim] = self.intervals[dim].from_unit(c);
        }
        Ok(HyperPoint::from_array(v))
    }

    /// Unit point with pinned dimensions overwritten by their pinned values.
    pub fn embed(&self, free: &[f64]) -> UnitPoint {
        let dims = self.free_dims();
        debug_assert_eq!(free.len(), dims.len());
        let mut u = [0.0; DIMS];
        for dim in 0..DIMS {
            if let Some(v) = self.pinned[dim] {
                u[dim] = self.intervals[dim].to_unit(v);
            }
        }
        for (c, &dim) in free.iter().zip(&dims) {
            u[dim] = *c;
        }
        u
    }

    /// Free-dimension coordinates of a unit point.
    pub fn project(&self, u: &UnitPoint) -> Vec<f64> {
        self.free_dims().iter().map(|&d| u[d]).collect()
    }

    /// Natural point for free-dimension unit coordinates; pinned values are
    /// reproduced exactly.
    pub fn point_from_free(&self, free: &[f64]) -> Result<HyperPoint> {
        let mut p = self.from_unit(&self.embed(free))?.to_array();
        for dim in 0..DIMS {
            if let Some(v) = self.pinned[dim] {
                p[dim] = v;
            }
        }
        Ok(HyperPoint::from_array(p))
    }

    pub fn grid_points(&self, grid: &GridSpec) -> Result<Vec<HyperPoint>> {
        grid.validate(self)?;
        let lists = &grid.values;
        let mut out = Vec::with_capacity(grid.len());
        for &a in &lists[0] {
            for &b in &lists[1] {
                for &g in &lists[2] {
                    for &r in &lists[3] {
                        out.push(HyperPoint::new(a, b, g, r));
                    }
                }
            }
        }
        Ok(out)
    }

    /// True iff some historical point lies within `tol` of `p` in the unit
    /// infinity norm. Points outside the space are compared after clamping.
    pub fn is_duplicate(&self, p: &HyperPoint, history: &[HyperPoint], tol: f64) -> bool {
        let up = self.to_unit_clamped(p);
        history
            .iter()
            .any(|h| unit_distance(&up, &self.to_unit_clamped(h)) <= tol)
    }

    /// Unit coordinates after clamping each value into its interval.
    pub fn to_unit_clamped(&self, p: &HyperPoint) -> UnitPoint {
        let v = p.to_array();
        let mut u = [0.0; DIMS];
        for dim in 0..DIMS {
            let iv = &self.intervals[dim];
            u[dim] = iv.to_unit(v[dim].clamp(iv.low, iv.high));
        }
        u
    }
}

/// Infinity-norm distance.
pub fn unit_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn is_duplicate_unit(u: &[f64], history: &[Vec<f64>], tol: f64) -> bool {
    history.iter().any(|h| unit_distance(u, h) <= tol)
}

/// Explicit value lists for the grid-search baseline, one per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub values: [Vec<f64>; DIMS],
}

impl GridSpec {
    pub fn new(values: [Vec<f64>; DIMS]) -> Self {
        GridSpec { values }
    }

    /// The 3 × 2 × 3 × 3 lattice used as the grid-search baseline.
    pub fn standard() -> Self {
        GridSpec::new([
            vec![0.6, 0.8, 1.0],
            vec![0.01, 0.1],
            vec![0.001, 0.01, 0.1],
            vec![0.001, 0.01, 0.1],
        ])
    }

    pub fn len(&self) -> usize {
        self.values.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, space: &HyperSpace) -> Result<()> {
        for (dim, list) in self.values.iter().enumerate() {
            let name = DIM_NAMES[dim];
            if list.is_empty() {
                return Err(Error::domain(format!("grid list for {name} is empty")));
            }
            let iv = space.interval(dim);
            for (i, v) in list.iter().enumerate() {
                if !iv.contains(*v) {
                    return Err(Error::domain(format!(
                        "grid value {name} = {v} outside [{}, {}]",
                        iv.low, iv.high
                    )));
                }
                if list[..i].contains(v) {
                    return Err(Error::domain(format!("grid value {name} = {v} listed twice")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_map_to_endpoints() {
        let s = HyperSpace::standard();
        let lo = s.to_unit(&HyperPoint::new(0.1, 1e-10, 1e-10, 1e-10)).unwrap();
        assert_eq!(lo, [0.0; 4]);
        let hi = s.to_unit(&HyperPoint::new(1.5, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(hi, [1.0; 4]);
        let mid = s.to_unit(&HyperPoint::new(0.8, 1e-5, 1e-5, 1e-5)).unwrap();
        for c in mid {
            assert!((c - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn from_unit_corners() {
        let s = HyperSpace::standard();
        assert_eq!(
            s.from_unit(&[0.0; 4]).unwrap(),
            HyperPoint::new(0.1, 1e-10, 1e-10, 1e-10)
        );
        assert_eq!(
            s.from_unit(&[1.0; 4]).unwrap(),
            HyperPoint::new(1.5, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn out_of_bounds_names_dimension() {
        let s = HyperSpace::standard();
        let err = s.to_unit(&HyperPoint::new(0.5, 2.0, 0.1, 0.1)).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
        let err = s.from_unit(&[0.5, 0.5, 1.5, 0.5]).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn invalid_intervals_rejected() {
        assert!(Interval::linear(1.0, 1.0).is_err());
        assert!(Interval::log10(0.0, 1.0).is_err());
        assert!(Interval::log10(-1.0, 1.0).is_err());
    }

    #[test]
    fn standard_grid_has_54_points() {
        let s = HyperSpace::standard();
        let pts = s.grid_points(&GridSpec::standard()).unwrap();
        assert_eq!(pts.len(), 54);
        assert_eq!(pts[0], HyperPoint::new(0.6, 0.01, 0.001, 0.001));
        assert_eq!(pts[1], HyperPoint::new(0.6, 0.01, 0.001, 0.01));
        assert_eq!(pts[53], HyperPoint::new(1.0, 0.1, 0.1, 0.1));
    }

    #[test]
    fn grid_ordering_and_sizes() {
        let s = HyperSpace::standard();
        let one = GridSpec::new([vec![0.5], vec![0.1], vec![0.1], vec![0.1]]);
        assert_eq!(s.grid_points(&one).unwrap().len(), 1);
        let g = GridSpec::new([vec![0.5, 0.7], vec![0.1, 0.2], vec![0.1], vec![0.3]]);
        let pts = s.grid_points(&g).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0], HyperPoint::new(0.5, 0.1, 0.1, 0.3));
        assert_eq!(pts[1], HyperPoint::new(0.5, 0.2, 0.1, 0.3));
        assert_eq!(pts[2], HyperPoint::new(0.7, 0.1, 0.1, 0.3));
    }

    #[test]
    fn grid_validation() {
        let s = HyperSpace::standard();
        let empty = GridSpec::new([vec![], vec![0.1], vec![0.1], vec![0.1]]);
        assert!(s.grid_points(&empty).unwrap_err().to_string().contains("alpha"));
        let outside = GridSpec::new([vec![2.0], vec![0.1], vec![0.1], vec![0.1]]);
        assert!(s.grid_points(&outside).is_err());
        let twice = GridSpec::new([vec![0.5], vec![0.1, 0.1], vec![0.1], vec![0.1]]);
        assert!(s.grid_points(&twice).is_err());
    }

    #[test]
    fn duplicates() {
        let s = HyperSpace::standard();
        let p = HyperPoint::new(0.8, 1e-3, 1e-4, 0.5);
        assert!(!s.is_duplicate(&p, &[], 0.0));
        assert!(s.is_duplicate(&p, &[p], 0.0));
        // α shifted by 0.02 of its unit range: distance 0.02 exactly.
        let q = HyperPoint::new(0.8 + 0.02 * 1.4, 1e-3, 1e-4, 0.5);
        let d = unit_distance(&s.to_unit(&p).unwrap(), &s.to_unit(&q).unwrap());
        assert!((d - 0.02).abs() < 1e-12);
        assert!(!s.is_duplicate(&q, &[p], 0.01));
        assert!(s.is_duplicate(&q, &[p], 0.03));
    }

    #[test]
    fn pinned_dimensions() {
        let s = HyperSpace::standard().pin(2, 1e-3).unwrap().pin(3, 0.01).unwrap();
        assert_eq!(s.free_dims(), vec![0, 1]);
        let p = s.point_from_free(&[0.0, 1.0]).unwrap();
        assert_eq!(p, HyperPoint::new(0.1, 1.0, 1e-3, 0.01));
        assert_eq!(s.project(&s.to_unit(&p).unwrap()), vec![0.0, 1.0]);
        assert!(HyperSpace::standard().pin(0, 3.0).is_err());
    }

    #[test]
    fn serde_round_trip_validates() {
        let s = HyperSpace::standard().pin(1, 0.5).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: HyperSpace = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        let bad = json.replace("1e-10", "-1.0");
        assert!(serde_json::from_str::<HyperSpace>(&bad).is_err());
    }
}
