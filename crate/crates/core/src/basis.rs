//! Knot intervals, sampler state and design-matrix construction.
//!
//! Four bases are supported: truncated powers `(x - g)_+^P`, an equivalent
//! B-spline basis for the same function space, the change-point basis
//! `(-1 + x/g)_+`, and a degree-one basis constrained to be periodic over a
//! fixed period (value and slope match at both ends).

use nalgebra::DMatrix;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::ThinQr;

/// Margin, as a fraction of the covariate range, kept between generated
/// partitions and the extreme observations.
pub const EDGE_MARGIN: f64 = 0.02;

/// Half-open interval `[lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v < self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Ordered, non-overlapping intervals; interval `k` hosts at most one knot.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPartition {
    intervals: Vec<Interval>,
}

impl IntervalPartition {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::validation(
                "interval partition must contain at least one interval",
            ));
        }
        for (k, iv) in intervals.iter().enumerate() {
            if !(iv.lower.is_finite() && iv.upper.is_finite() && iv.lower < iv.upper) {
                return Err(Error::validation(format!(
                    "interval {k} is empty or not finite: [{}, {})",
                    iv.lower, iv.upper
                )));
            }
        }
        for (k, w) in intervals.windows(2).enumerate() {
            if w[0].upper > w[1].lower {
                return Err(Error::validation(format!(
                    "intervals {k} and {} overlap",
                    k + 1
                )));
            }
        }
        Ok(Self { intervals })
    }

    /// Contiguous partition between consecutive entries of `bounds`.
    pub fn from_bounds(bounds: &[f64]) -> Result<Self> {
        if bounds.len() < 2 {
            return Err(Error::validation(
                "at least two interval bounds are required",
            ));
        }
        if bounds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::validation(
                "interval bounds must be strictly increasing",
            ));
        }
        Self::new(
            bounds
                .windows(2)
                .map(|w| Interval {
                    lower: w[0],
                    upper: w[1],
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn get(&self, k: usize) -> Interval {
        self.intervals[k]
    }

    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> f64 {
        let iv = self.intervals[k];
        let v = rng.random_range(iv.lower..iv.upper);
        // guard against the upper bound being hit through rounding
        if v < iv.upper {
            v
        } else {
            iv.lower
        }
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.intervals.iter().map(Interval::midpoint).collect()
    }

    /// Index of the interval containing `v`, if any.
    pub fn locate(&self, v: f64) -> Option<usize> {
        self.intervals.iter().position(|iv| iv.contains(v))
    }
}

/// How to build the knot intervals from data.
#[derive(Debug, Clone, PartialEq)]
pub enum IntervalStrategy {
    /// One interval per `n_x` sorted distinct covariate values.
    EveryNx(usize),
    /// `k` equal-width intervals.
    EqualCount(usize),
    /// User-supplied bounds, used verbatim.
    Explicit(Vec<f64>),
}

/// Builds an interval partition for `data`.
///
/// Generated partitions (`EveryNx`, `EqualCount`) live inside
/// `[min x + eps, max x - eps]` with `eps = EDGE_MARGIN * range`. Interior
/// boundaries of `EveryNx` sit halfway between the `j*n_x`-th and the next
/// sorted distinct value, so each interval holds `n_x` distinct values.
pub fn default_intervals(data: &Dataset, strategy: &IntervalStrategy) -> Result<IntervalPartition> {
    if let IntervalStrategy::Explicit(bounds) = strategy {
        return IntervalPartition::from_bounds(bounds);
    }
    let distinct = data.distinct_x();
    if distinct.len() < 2 {
        return Err(Error::validation(
            "at least two distinct x values are needed to build knot intervals",
        ));
    }
    let (min, max) = (distinct[0], distinct[distinct.len() - 1]);
    let eps = EDGE_MARGIN * (max - min);
    let (lo, hi) = (min + eps, max - eps);
    let bounds = match strategy {
        IntervalStrategy::EveryNx(nx) => {
            if *nx < 1 {
                return Err(Error::validation("n_x must be at least 1"));
            }
            let mut b = vec![lo];
            let mut j = 1;
            while nx * j < distinct.len() {
                let cut = 0.5 * (distinct[nx * j - 1] + distinct[nx * j]);
                if cut > lo && cut < hi {
                    b.push(cut);
                }
                j += 1;
            }
            b.push(hi);
            b
        }
        IntervalStrategy::EqualCount(k) => {
            if *k < 1 {
                return Err(Error::validation("interval count must be at least 1"));
            }
            let w = (hi - lo) / *k as f64;
            let mut b: Vec<f64> = (0..*k).map(|i| lo + i as f64 * w).collect();
            b.push(hi);
            b
        }
        IntervalStrategy::Explicit(_) => unreachable!(),
    };
    IntervalPartition::from_bounds(&bounds)
}

/// Indicator vector `z` and knot locations `gamma`, one entry per interval.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KnotState {
    pub z: Vec<bool>,
    pub gamma: Vec<f64>,
}

impl KnotState {
    pub fn new(z: Vec<bool>, gamma: Vec<f64>) -> Result<Self> {
        if z.len() != gamma.len() {
            return Err(Error::validation("z and gamma must have the same length"));
        }
        Ok(Self { z, gamma })
    }

    /// All knots inactive, each location at its interval midpoint.
    pub fn empty(partition: &IntervalPartition) -> Self {
        Self {
            z: vec![false; partition.len()],
            gamma: partition.midpoints(),
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// `|z|`
    pub fn size(&self) -> usize {
        self.z.iter().filter(|&&b| b).count()
    }

    /// `(k, gamma_k)` for every active knot, ascending in `k`.
    pub fn active(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.z
            .iter()
            .zip(&self.gamma)
            .enumerate()
            .filter(|(_, (&on, _))| on)
            .map(|(k, (_, &g))| (k, g))
    }

    pub fn active_locations(&self) -> Vec<f64> {
        self.active().map(|(_, g)| g).collect()
    }

    pub fn validate(&self, partition: &IntervalPartition) -> Result<()> {
        if self.len() != partition.len() {
            return Err(Error::validation(format!(
                "knot state has {} entries but the partition has {} intervals",
                self.len(),
                partition.len()
            )));
        }
        for (k, &g) in self.gamma.iter().enumerate() {
            if !partition.get(k).contains(g) {
                return Err(Error::validation(format!(
                    "gamma[{k}] = {g} lies outside its interval"
                )));
            }
        }
        Ok(())
    }

    /// Compact string form of `z`, e.g. `"0110"`.
    pub fn z_string(&self) -> String {
        self.z.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Provenance of a design column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnLabel {
    /// `x^j`
    Polynomial(usize),
    /// Knot column contributed by interval `k`.
    Knot(usize),
    /// `j`-th B-spline function.
    BSpline(usize),
    /// Intercept of a constrained (periodic) curve.
    Intercept,
    /// Marks a periodic design that collapsed to a constant because fewer
    /// than two knots were active.
    Degenerate,
}

/// Dense design matrix with column provenance and an optional cached thin QR.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub labels: Vec<ColumnLabel>,
    factorization: Option<ThinQr>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>, labels: Vec<ColumnLabel>) -> Self {
        debug_assert_eq!(values.ncols(), labels.len());

        Self {
            values,
            labels,
            factorization: None,
        }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Computes and caches the thin QR factorisation.
    pub fn factorize(mut self) -> Result<Self> {
        if self.factorization.is_none() {
            self.factorization = Some(ThinQr::new(&self.values)?);
        }
        Ok(self)
    }

    pub fn factorization(&self) -> Option<&ThinQr> {
        self.factorization.as_ref()
    }

    /// `X b` as a plain vector.
    pub fn apply(&self, coef: &[f64]) -> Vec<f64> {
        assert_eq!(coef.len(), self.ncols(), "coefficient length mismatch");
        let n = self.nrows();
        let mut out = vec![0.0; n];
        for (j, &c) in coef.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let col = self.values.column(j);
            for i in 0..n {
                out[i] += c * col[i];
            }
        }
        out
    }

    pub fn is_degenerate(&self) -> bool {
        self.labels.contains(&ColumnLabel::Degenerate)
    }
}

/// Which family of basis functions turns a knot state into columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Basis {
    TruncatedPower {
        degree: usize,
    },
    /// B-splines on the fixed `domain`; zero outside it.
    BSpline {
        degree: usize,
        domain: (f64, f64),
    },
    ChangePoint,
    PeriodicLinear {
        period: f64,
    },
}

impl Basis {
    pub fn design(&self, x: &[f64], state: &KnotState) -> Result<DesignMatrix> {
        match *self {
            Basis::TruncatedPower { degree } => truncated_power_design(x, degree, state),
            Basis::BSpline { degree, domain } => bspline_design(x, degree, domain, state),
            Basis::ChangePoint => changepoint_design(x, state),
            Basis::PeriodicLinear { period } => Ok(periodic_linear_design(x, state, period)),
        }
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree < 1 {
        return Err(Error::validation("spline degree must be at least 1"));
    }
    Ok(())
}

/// Columns `1, x, ..., x^P` followed by `(x - gamma_k)_+^P` for each active
/// `k` in ascending order.
pub fn truncated_power_design(x: &[f64], degree: usize, state: &KnotState) -> Result<DesignMatrix> {
    check_degree(degree)?;
    let knots: Vec<(usize, f64)> = state.active().collect();
    let m = degree + 1 + knots.len();
    let mut values = DMatrix::zeros(x.len(), m);
    for (i, &xi) in x.iter().enumerate() {
        let mut p = 1.0;
        for j in 0..=degree {
            values[(i, j)] = p;
            p *= xi;
        }
        for (c, &(_, g)) in knots.iter().enumerate() {
            let d = xi - g;
            values[(i, degree + 1 + c)] = if d > 0.0 { d.powi(degree as i32) } else { 0.0 };
        }
    }
    let labels = (0..=degree)
        .map(ColumnLabel::Polynomial)
        .chain(knots.iter().map(|&(k, _)| ColumnLabel::Knot(k)))
        .collect();
    Ok(DesignMatrix::new(values, labels))
}

/// B-spline basis of degree `P` on `domain` with the active knots as
/// interior breakpoints. Spans the same space as the truncated-power basis
/// restricted to the domain, but is far better conditioned.
pub fn bspline_design(
    x: &[f64],
    degree: usize,
    domain: (f64, f64),
    state: &KnotState,
) -> Result<DesignMatrix> {
    check_degree(degree)?;
    let (a, b) = domain;
    if !(a < b) {
        return Err(Error::DegenerateBasis(format!(
            "B-spline domain [{a}, {b}] has fewer than {} distinct knots",
            degree + 1
        )));
    }
    let mut interior = state.active_locations();
    interior.sort_by(f64::total_cmp);
    if interior.iter().any(|&g| g <= a || g >= b) {
        return Err(Error::DegenerateBasis(
            "active knot outside the B-spline domain".into(),
        ));
    }
    if interior.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::DegenerateBasis("coincident active knots".into()));
    }
    let mut knots = vec![a; degree + 1];
    knots.extend_from_slice(&interior);
    knots.extend(std::iter::repeat_n(b, degree + 1));
    let m = knots.len() - degree - 1;
    let mut values = DMatrix::zeros(x.len(), m);
    let mut local = vec![0.0; degree + 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi < a || xi > b {
            continue;
        }
        let span = find_span(&knots, degree, xi);
        basis_functions(&knots, degree, span, xi, &mut local);
        for (r, &v) in local.iter().enumerate() {
            values[(i, span - degree + r)] = v;
        }
    }
    Ok(DesignMatrix::new(
        values,
        (0..m).map(ColumnLabel::BSpline).collect(),
    ))
}

/// Knot span `s` with `t_s <= x < t_{s+1}`; the right end of the domain
/// belongs to the last non-empty span.
fn find_span(knots: &[f64], degree: usize, x: f64) -> usize {
    let last = knots.len() - degree - 2;
    if x >= knots[last + 1] {
        return last;
    }
    let (mut lo, mut hi) = (degree, last + 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// The `degree + 1` non-zero B-splines at `x` in `span` (Cox-de Boor).
fn basis_functions(knots: &[f64], degree: usize, span: usize, x: f64, out: &mut [f64]) {
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    out[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

/// Columns `1, x` followed by `(-1 + x/gamma_k)_+` for each active `k`.
pub fn changepoint_design(x: &[f64], state: &KnotState) -> Result<DesignMatrix> {
    let knots: Vec<(usize, f64)> = state.active().collect();
    if let Some(&(k, _)) = knots.iter().find(|(_, g)| *g == 0.0) {
        return Err(Error::Numerical(format!("change point {k} sits at zero")));
    }
    let mut values = DMatrix::zeros(x.len(), 2 + knots.len());
    for (i, &xi) in x.iter().enumerate() {
        values[(i, 0)] = 1.0;
        values[(i, 1)] = xi;
        for (c, &(_, g)) in knots.iter().enumerate() {
            values[(i, 2 + c)] = (xi / g - 1.0).max(0.0);
        }
    }
    let labels = [ColumnLabel::Polynomial(0), ColumnLabel::Polynomial(1)]
        .into_iter()
        .chain(knots.iter().map(|&(k, _)| ColumnLabel::Knot(k)))
        .collect();
    Ok(DesignMatrix::new(values, labels))
}

/// Degree-one spline over `[0, period]` with `f(0) = f(period)` and equal
/// end slopes, in free coordinates `(alpha_0, eta_1, ..., eta_{K-1})`.
///
/// With active knots `g_1 < ... < g_K` the constraints fix
/// `eta_K = -sum_{j<K} eta_j` and `alpha_1 = -sum_k eta_k (1 - g_k/period)`,
/// which leaves column `j` equal to
/// `(t - g_j)_+ - (t - g_K)_+ + t (g_j - g_K) / period`.
/// Fewer than two active knots force a constant curve.
pub fn periodic_linear_design(t: &[f64], state: &KnotState, period: f64) -> DesignMatrix {
    let knots: Vec<(usize, f64)> = state.active().collect();
    let n = t.len();
    if knots.len() < 2 {
        // a lone knot cannot satisfy both end constraints, so its slope
        // change is forced to zero
        let mut labels = vec![ColumnLabel::Intercept];
        if !knots.is_empty() {
            labels.push(ColumnLabel::Degenerate);
        }
        return DesignMatrix {
            values: DMatrix::from_element(n, 1, 1.0),
            labels,
            factorization: None,
        };
    }
    let (_, last) = knots[knots.len() - 1];
    let free = &knots[..knots.len() - 1];
    let mut values = DMatrix::zeros(n, 1 + free.len());
    for (i, &ti) in t.iter().enumerate() {
        values[(i, 0)] = 1.0;
        let tail = (ti - last).max(0.0);
        for (c, &(_, g)) in free.iter().enumerate() {
            values[(i, 1 + c)] = (ti - g).max(0.0) - tail + ti * (g - last) / period;
        }
    }
    let labels = std::iter::once(ColumnLabel::Intercept)
        .chain(free.iter().map(|&(k, _)| ColumnLabel::Knot(k)))
        .collect();
    DesignMatrix::new(values, labels)
}

/// Full periodic-curve parameters recovered from free coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCurve {
    pub alpha0: f64,
    pub alpha1: f64,
    /// `(gamma_k, eta_k)` for every active knot.
    pub knots: Vec<(f64, f64)>,
}

impl PeriodicCurve {
    /// Rebuilds `(alpha_0, alpha_1, eta_1..eta_K)` from the coefficients of
    /// `periodic_linear_design`.
    pub fn from_free(free: &[f64], state: &KnotState, period: f64) -> Self {
        let gammas = state.active_locations();
        if gammas.len() < 2 {
            return Self {
                alpha0: free[0],
                alpha1: 0.0,
                knots: gammas.iter().map(|&g| (g, 0.0)).collect(),
            };
        }
        let mut etas: Vec<f64> = free[1..].to_vec();
        etas.push(-etas.iter().sum::<f64>());
        let alpha1 = -gammas
            .iter()
            .zip(&etas)
            .map(|(g, e)| e * (1.0 - g / period))
            .sum::<f64>();
        Self {
            alpha0: free[0],
            alpha1,
            knots: gammas.into_iter().zip(etas).collect(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.alpha0
            + self.alpha1 * t
            + self
                .knots
                .iter()
                .map(|(g, e)| e * (t - g).max(0.0))
                .sum::<f64>()
    }

    /// Right-derivative at `t`.
    pub fn slope(&self, t: f64) -> f64 {
        self.alpha1
            + self
                .knots
                .iter()
                .filter(|(g, _)| t >= *g)
                .map(|(_, e)| e)
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::condition_number;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(z: &[u8], gamma: &[f64]) -> KnotState {
        KnotState::new(z.iter().map(|&b| b == 1).collect(), gamma.to_vec()).unwrap()
    }

    fn ls_fit(x: &DesignMatrix, y: &[f64]) -> Vec<f64> {
        let qr = ThinQr::new(&x.values).unwrap();
        x.apply(qr.least_squares(y).as_slice())
    }

    #[test]
    fn truncated_power_entries() {
        let s = state(&[1], &[0.5]);
        let d = truncated_power_design(&[0.8, 0.4], 3, &s).unwrap();
        assert!((d.values[(0, 4)] - 0.027).abs() < 1e-15);
        assert_eq!(d.values[(1, 4)], 0.0);
        assert_eq!(d.labels[4], ColumnLabel::Knot(0));
    }

    #[test]
    fn no_knots_gives_polynomial_design() {
        let s = state(&[0, 0, 0], &[0.1, 0.2, 0.3]);
        let x = [0.0, 0.25, 0.5, 0.75, 1.0];
        let d = truncated_power_design(&x, 3, &s).unwrap();
        assert_eq!(d.values.shape(), (5, 4));
        assert!((d.values[(3, 3)] - 0.75f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn bspline_matches_truncated_power_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| (6.0 * v).sin() + 0.1 * rng.random::<f64>())
            .collect();
        let s = state(&[1, 0, 1, 1], &[0.2, 0.4, 0.55, 0.8]);
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tp = truncated_power_design(&x, 3, &s).unwrap();
        let bs = bspline_design(&x, 3, (lo, hi), &s).unwrap();
        assert_eq!(tp.ncols(), bs.ncols());
        let diff = ls_fit(&tp, &y)
            .iter()
            .zip(ls_fit(&bs, &y))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn bspline_without_knots_is_polynomial_fit() {
        let x: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let s = state(&[0, 0], &[0.3, 0.6]);
        let tp = truncated_power_design(&x, 3, &s).unwrap();
        let bs = bspline_design(&x, 3, (0.0, 1.0), &s).unwrap();
        for (a, b) in ls_fit(&tp, &y).iter().zip(ls_fit(&bs, &y)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn bspline_partition_of_unity() {
        let s = state(&[1, 1], &[0.3, 0.7]);
        let x: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let d = bspline_design(&x, 2, (0.0, 1.0), &s).unwrap();
        for i in 0..x.len() {
            let sum: f64 = d.values.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bspline_better_conditioned_on_clustered_knots() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let s = state(&[1, 1, 1], &[0.50, 0.52, 0.54]);
        let tp = truncated_power_design(&x, 3, &s).unwrap();
        let bs = bspline_design(&x, 3, (0.0, 1.0), &s).unwrap();
        assert!(condition_number(&bs.values) <= condition_number(&tp.values));
    }

    #[test]
    fn bspline_rejects_empty_domain() {
        let s = state(&[0], &[0.5]);
        assert!(matches!(
            bspline_design(&[0.5], 3, (0.5, 0.5), &s),
            Err(Error::DegenerateBasis(_))
        ));
    }

    #[test]
    fn changepoint_entries() {
        let s = state(&[1, 0], &[1.29, 0.5]);
        let d = changepoint_design(&[1.5, 1.0], &s).unwrap();
        assert_eq!(d.ncols(), 3);
        assert!((d.values[(0, 2)] - (1.5 / 1.29 - 1.0)).abs() < 1e-15);
        assert!((d.values[(0, 2)] - 0.16279).abs() < 1e-5);
        assert_eq!(d.values[(1, 2)], 0.0);
    }

    #[test]
    fn changepoint_rejects_zero_location() {
        let s = state(&[1], &[0.0]);
        assert!(changepoint_design(&[1.0], &s).is_err());
    }

    #[test]
    fn changepoint_column_count() {
        let s = state(&[0, 1, 0], &[0.5, 1.3, 1.5]);
        let x: Vec<f64> = (0..15).map(|i| 0.1 * i as f64).collect();
        assert_eq!(changepoint_design(&x, &s).unwrap().values.shape(), (15, 3));
    }

    #[test]
    fn periodic_endpoints_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = state(&[1, 0, 1, 1], &[40.0, 120.0, 200.0, 310.0]);
        let d = periodic_linear_design(&[0.0, 366.0], &s, 366.0);
        assert_eq!(d.ncols(), 3);
        for _ in 0..20 {
            let coef: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let f = d.apply(&coef);
            assert!((f[0] - f[1]).abs() < 1e-10);
            let curve = PeriodicCurve::from_free(&coef, &s, 366.0);
            let eta_sum: f64 = curve.knots.iter().map(|(_, e)| e).sum();
            assert!(eta_sum.abs() < 1e-12);
            assert!((curve.slope(0.0) - curve.slope(366.0)).abs() < 1e-12);
            assert!((curve.value(0.0) - curve.value(366.0)).abs() < 1e-10);
            for t in [1.0, 77.0, 200.0, 365.0] {
                let via_design = periodic_linear_design(&[t], &s, 366.0).apply(&coef)[0];
                assert!((via_design - curve.value(t)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn periodic_degenerate_cases() {
        let none = state(&[0, 0], &[10.0, 20.0]);
        let d = periodic_linear_design(&[1.0, 2.0], &none, 366.0);
        assert_eq!(d.labels, vec![ColumnLabel::Intercept]);
        let one = state(&[1, 0], &[10.0, 20.0]);
        let d = periodic_linear_design(&[1.0, 2.0], &one, 366.0);
        assert_eq!(d.ncols(), 1);
        assert!(d.is_degenerate());
    }

    #[test]
    fn explicit_intervals() {
        let d = Dataset::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let b = vec![0.02, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.98];
        let p = default_intervals(&d, &IntervalStrategy::Explicit(b)).unwrap();
        assert_eq!(p.len(), 10);
    }

    #[test]
    fn every_nx_counts() {
        let x: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let d = Dataset::new(x, vec![0.0; 100]).unwrap();
        let p = default_intervals(&d, &IntervalStrategy::EveryNx(4)).unwrap();
        assert_eq!(p.len(), 25);
    }

    #[test]
    fn equal_count_widths() {
        let x: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let d = Dataset::new(x, vec![0.0; 11]).unwrap();
        let p = default_intervals(&d, &IntervalStrategy::EqualCount(10)).unwrap();
        assert_eq!(p.len(), 10);
        assert!((p.get(0).lower - 0.02).abs() < 1e-12);
        for iv in p.intervals() {
            assert!((iv.width() - 0.096).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_distinct_values() {
        let d = Dataset::new(vec![0.3, 0.3], vec![0.0, 1.0]).unwrap();
        assert!(default_intervals(&d, &IntervalStrategy::EqualCount(2)).is_err());
    }

    #[test]
    fn partition_rejects_bad_bounds() {
        assert!(IntervalPartition::from_bounds(&[0.0, 0.0, 1.0]).is_err());
        assert!(IntervalPartition::from_bounds(&[0.0]).is_err());
    }

    #[test]
    fn half_open_membership() {
        let p = IntervalPartition::from_bounds(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(p.locate(0.5), Some(1));
        assert_eq!(p.locate(1.0), None);
    }
}
