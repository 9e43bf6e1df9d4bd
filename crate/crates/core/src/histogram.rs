//! Piecewise-constant histograms over `[1..n]` and their error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{bad_params, Error, Result};
use crate::stream::ExactDistribution;

/// A piecewise-constant function on `[1..n]`.
///
/// Piece `j` covers `breakpoints[j-1]+1 ..= breakpoints[j]` (with implicit
/// `0` before the first breakpoint and `n` after the last), so an index equal
/// to a breakpoint belongs to the piece on its left. Empty pieces are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHistogram", into = "RawHistogram")]
pub struct Histogram {
    n: u64,
    breakpoints: Vec<u64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawHistogram {
    n: u64,
    breakpoints: Vec<u64>,
    values: Vec<f64>,
}

impl TryFrom<RawHistogram> for Histogram {
    type Error = Error;

    fn try_from(raw: RawHistogram) -> Result<Self> {
        Histogram::new(raw.n, raw.breakpoints, raw.values)
    }
}

impl From<Histogram> for RawHistogram {
    fn from(h: Histogram) -> Self {
        RawHistogram {
            n: h.n,
            breakpoints: h.breakpoints,
            values: h.values,
        }
    }
}

impl Histogram {
    pub fn new(n: u64, breakpoints: Vec<u64>, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(bad_params("histogram domain must be non-empty"));
        }
        if values.len() != breakpoints.len() + 1 {
            return Err(bad_params(format!(
                "{} values for {} breakpoints",
                values.len(),
                breakpoints.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] > w[1]) {
            return Err(bad_params("breakpoints must be non-decreasing"));
        }
        if breakpoints.iter().any(|&b| b == 0 || b > n) {
            return Err(bad_params("breakpoints must lie in [1..n]"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(bad_params("histogram values must lie in [0,1]"));
        }
        Ok(Self { n, breakpoints, values })
    }

    pub fn constant(n: u64, value: f64) -> Result<Self> {
        Self::new(n, Vec::new(), vec![value])
    }

    /// Builds a histogram from consecutive pieces given as `(last_index, value)`.
    /// The final piece is extended to `n`. Values are clamped to `[0,1]`.
    pub fn from_piece_ends(n: u64, pieces: &[(u64, f64)]) -> Result<Self> {
        if pieces.is_empty() {
            return Self::constant(n, 0.0);
        }
        let breakpoints = pieces[..pieces.len() - 1].iter().map(|&(end, _)| end).collect();
        let values = pieces.iter().map(|&(_, v)| v.clamp(0.0, 1.0)).collect();
        Self::new(n, breakpoints, values)
    }

    pub fn domain_size(&self) -> u64 {
        self.n
    }

    pub fn breakpoints(&self) -> &[u64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn piece_count(&self) -> usize {
        self.values.len()
    }

    /// Number of pieces covering at least one index.
    pub fn nonempty_piece_count(&self) -> usize {
        self.pieces().filter(|p| p.start <= p.end).count()
    }

    /// Pieces as inclusive `[start, end]` ranges; empty pieces have `start > end`.
    pub fn pieces(&self) -> impl Iterator<Item = Piece> + '_ {
        (0..self.values.len()).map(move |j| {
            let start = if j == 0 { 1 } else { self.breakpoints[j - 1] + 1 };
            let end = if j == self.breakpoints.len() { self.n } else { self.breakpoints[j] };
            Piece {
                start,
                end,
                value: self.values[j],
            }
        })
    }

    pub fn eval(&self, i: u64) -> Result<f64> {
        if i == 0 || i > self.n {
            return Err(Error::DomainViolation { item: i, n: self.n });
        }
        Ok(self.values[self.breakpoints.partition_point(|&b| b < i)])
    }

    /// Replaces the value at each listed index by a dedicated unit-width piece.
    /// `singletons` need not be sorted; later duplicates win.
    pub fn with_singletons(&self, singletons: &[(u64, f64)]) -> Result<Self> {
        let mut singles: Vec<(u64, f64)> = singletons.to_vec();
        singles.sort_by_key(|&(i, _)| i);
        singles.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 = later.1;
                true
            } else {
                false
            }
        });
        if let Some(&(i, _)) = singles.iter().find(|&&(i, _)| i == 0 || i > self.n) {
            return Err(Error::DomainViolation { item: i, n: self.n });
        }
        let mut ends: Vec<(u64, f64)> = Vec::new();
        let mut next = singles.iter().peekable();
        for piece in self.pieces().filter(|p| p.start <= p.end) {
            let mut cursor = piece.start;
            while let Some(&&(i, v)) = next.peek() {
                if i > piece.end {
                    break;
                }
                if i > cursor {
                    ends.push((i - 1, piece.value));
                }
                ends.push((i, v));
                cursor = i + 1;
                next.next();
            }
            if cursor <= piece.end {
                ends.push((piece.end, piece.value));
            }
        }
        Self::from_piece_ends(self.n, &ends)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: u64,
    pub end: u64,
    pub value: f64,
}

impl Piece {
    pub fn len(&self) -> u64 {
        if self.start > self.end {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_domain(p: &ExactDistribution, f: &Histogram) -> Result<()> {
    if p.total() == 0 {
        return Err(Error::EmptyStream);
    }
    if p.domain_size() != f.domain_size() {
        return Err(Error::DomainMismatch {
            stream: p.domain_size(),
            histogram: f.domain_size(),
        });
    }
    Ok(())
}

/// Support-aware L1 error: `sum over supp(P) of |p_i - f(i)|`.
pub fn support_error(p: &ExactDistribution, f: &Histogram) -> Result<f64> {
    check_domain(p, f)?;
    let m = p.total() as f64;
    let mut err = 0.0;
    for piece in f.pieces().filter(|pc| !pc.is_empty()) {
        for (_, c) in p.range(piece.start, piece.end) {
            err += (c as f64 / m - piece.value).abs();
        }
    }
    Ok(err)
}

/// Support-oblivious L1 error over the whole domain.
pub fn domain_error(p: &ExactDistribution, f: &Histogram) -> Result<f64> {
    check_domain(p, f)?;
    let m = p.total() as f64;
    let mut err = 0.0;
    for piece in f.pieces().filter(|pc| !pc.is_empty()) {
        let mut supported = 0u64;
        for (_, c) in p.range(piece.start, piece.end) {
            supported += 1;
            err += (c as f64 / m - piece.value).abs();
        }
        err += (piece.len() - supported) as f64 * piece.value;
    }
    Ok(err)
}

/// A multiset of `(index, mass)` points sorted by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedPointSet {
    points: Vec<(u64, f64)>,
}

impl WeightedPointSet {
    /// Sorts the points by index (stable). Masses must lie in `[0,1]`.
    pub fn new(mut points: Vec<(u64, f64)>) -> Result<Self> {
        if points.iter().any(|&(i, m)| i == 0 || !(0.0..=1.0).contains(&m)) {
            return Err(bad_params("points need index >= 1 and mass in [0,1]"));
        }
        points.sort_by_key(|&(i, _)| i);
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, m)| m).collect()
    }
}

/// Lower median (the `ceil(len/2)`-th smallest element).
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    let mid = (v.len() - 1) / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    Some(*m)
}

/// Best constant for a set of masses under L1 loss, and its cost.
pub fn interval_cost(points: &WeightedPointSet) -> Result<(f64, f64)> {
    interval_cost_masses(&points.masses())
}

pub fn interval_cost_masses(masses: &[f64]) -> Result<(f64, f64)> {
    let med = lower_median(masses).ok_or(Error::EmptyPointSet)?;
    Ok((med, masses.iter().map(|&x| (x - med).abs()).sum()))
}

/// Mass bucket index `z` with `mass` in `((1+eps)^-(z+1), (1+eps)^-z]`.
pub(crate) fn mass_bucket(mass: f64, eps: f64) -> i64 {
    let base = 1.0 + eps;
    let mut z = ((1.0 / mass).ln() / base.ln()).floor() as i64;
    // boundary values computed elsewhere may differ in the last bits
    let tol = 1e-12;
    while base.powi(-(z as i32)) * (1.0 + tol) < mass {
        z -= 1;
    }
    while base.powi(-(z as i32 + 1)) >= mass * (1.0 - tol) {
        z += 1;
    }
    z
}

/// Sample-based cost estimate of `h`: every sampled supported point is
/// charged `n/s * |gamma_j - (1+eps)^-z|` where `z` is its mass bucket.
/// Buckets finer than `eps^2 / sqrt(n)` are clamped to the last bucket;
/// zero-mass samples lie outside every bucket.
pub fn est_error(points: &WeightedPointSet, n: u64, s: u64, h: &Histogram, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(bad_params("eps must lie in (0,1)"));
    }
    if s == 0 {
        return Err(bad_params("sample count must be positive"));
    }
    let base = 1.0 + eps;
    let z_max = ((n as f64).sqrt() / (eps * eps)).ln() / base.ln();
    let z_max = z_max.ceil().max(0.0) as i64;
    let scale = n as f64 / s as f64;
    let mut total = 0.0;
    for &(i, mass) in points.points() {
        if mass <= 0.0 {
            continue;
        }
        let z = mass_bucket(mass, eps).clamp(0, z_max);
        let rep = base.powi(-(z as i32));
        total += scale * (h.eval(i)? - rep).abs();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(n: u64, counts: &[(u64, u64)]) -> ExactDistribution {
        ExactDistribution::from_counts(n, counts.iter().copied()).unwrap()
    }

    #[test]
    fn eval_constant_and_breakpoint_rule() {
        let f = Histogram::constant(10, 0.3).unwrap();
        assert_eq!(f.eval(7).unwrap(), 0.3);
        let g = Histogram::new(10, vec![5], vec![0.1, 0.2]).unwrap();
        assert_eq!(g.eval(5).unwrap(), 0.1);
        assert_eq!(g.eval(6).unwrap(), 0.2);
        assert!(matches!(g.eval(0), Err(Error::DomainViolation { .. })));
        assert!(matches!(g.eval(11), Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn invalid_histograms_rejected() {
        assert!(Histogram::new(10, vec![5], vec![0.1]).is_err());
        assert!(Histogram::new(10, vec![6, 5], vec![0.1, 0.1, 0.1]).is_err());
        assert!(Histogram::new(10, vec![11], vec![0.1, 0.1]).is_err());
        assert!(Histogram::new(10, vec![], vec![1.5]).is_err());
    }

    #[test]
    fn empty_pieces_are_allowed() {
        let f = Histogram::new(10, vec![3, 3], vec![0.1, 0.9, 0.2]).unwrap();
        assert_eq!(f.eval(3).unwrap(), 0.1);
        assert_eq!(f.eval(4).unwrap(), 0.2);
        assert_eq!(f.nonempty_piece_count(), 2);
    }

    #[test]
    fn json_shape() {
        let f = Histogram::new(10, vec![5], vec![0.25, 0.5]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"n":10,"breakpoints":[5],"values":[0.25,0.5]}"#);
        assert_eq!(serde_json::from_str::<Histogram>(&s).unwrap(), f);
        assert!(serde_json::from_str::<Histogram>(r#"{"n":10,"breakpoints":[5],"values":[0.25]}"#).is_err());
    }

    #[test]
    fn support_error_examples() {
        // uniform over even items with p = 2/n, constant fit
        let n = 100;
        let p = dist(n, &(1..=n / 2).map(|j| (2 * j, 1)).collect::<Vec<_>>());
        let f = Histogram::constant(n, 2.0 / n as f64).unwrap();
        assert!(support_error(&p, &f).unwrap().abs() < 1e-12);
        assert!((domain_error(&p, &f).unwrap() - 1.0).abs() < 1e-12);

        let zero = Histogram::constant(n, 0.0).unwrap();
        assert!((support_error(&p, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!((domain_error(&p, &zero).unwrap() - 1.0).abs() < 1e-12);

        let q = dist(4, &[(1, 2), (3, 1), (4, 1)]);
        let c = Histogram::constant(4, 0.25).unwrap();
        assert!((support_error(&q, &c).unwrap() - 0.25).abs() < 1e-12);
        // item 2 is off-support and contributes 0.25 to the domain error only
        assert!((domain_error(&q, &c).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_support_errors_agree() {
        let p = dist(5, &[(1, 1), (2, 2), (3, 3), (4, 1), (5, 3)]);
        let f = Histogram::new(5, vec![2], vec![0.1, 0.3]).unwrap();
        assert!((support_error(&p, &f).unwrap() - domain_error(&p, &f).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn errors_need_mass_and_matching_domain() {
        let f = Histogram::constant(4, 0.0).unwrap();
        assert_eq!(support_error(&ExactDistribution::new(4), &f), Err(Error::EmptyStream));
        let p = dist(5, &[(1, 1)]);
        assert!(matches!(support_error(&p, &f), Err(Error::DomainMismatch { .. })));
    }

    #[test]
    fn interval_cost_examples() {
        let (v, c) = interval_cost_masses(&[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(v, 0.3);
        assert!((c - 0.3).abs() < 1e-12);
        assert_eq!(interval_cost_masses(&[0.4, 0.4, 0.4]).unwrap(), (0.4, 0.0));
        let (v, c) = interval_cost_masses(&[0.4, 0.1]).unwrap();
        assert_eq!(v, 0.1);
        assert!((c - 0.3).abs() < 1e-12);
        assert_eq!(interval_cost_masses(&[]), Err(Error::EmptyPointSet));
        assert_eq!(interval_cost(&WeightedPointSet::default()), Err(Error::EmptyPointSet));
    }

    #[test]
    fn with_singletons_splits_pieces() {
        let base = Histogram::new(10, vec![5], vec![0.1, 0.2]).unwrap();
        let f = base.with_singletons(&[(5, 0.9), (1, 0.7), (8, 0.5)]).unwrap();
        let expect = [0.7, 0.1, 0.1, 0.1, 0.9, 0.2, 0.2, 0.5, 0.2, 0.2];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(f.eval(i as u64 + 1).unwrap(), *e, "index {}", i + 1);
        }
        assert_eq!(f.nonempty_piece_count(), 6);
        assert!(base.with_singletons(&[(11, 0.1)]).is_err());
    }

    #[test]
    fn mass_bucket_boundaries() {
        let eps = 0.1;
        for z in 0..40 {
            let v = (1.0f64 + eps).powi(-z);
            assert_eq!(mass_bucket(v, eps), z as i64);
            assert_eq!(mass_bucket(v * 0.999, eps), z as i64);
        }
    }

    #[test]
    fn est_error_examples() {
        let eps = 0.2;
        let h = Histogram::constant(100, 0.3).unwrap();
        assert_eq!(est_error(&WeightedPointSet::default(), 100, 10, &h, eps).unwrap(), 0.0);
        let v = (1.0f64 + eps).powi(-5);
        let pts = WeightedPointSet::new(vec![(3, v), (9, v), (40, v)]).unwrap();
        let hv = Histogram::constant(100, v).unwrap();
        assert!(est_error(&pts, 100, 3, &hv, eps).unwrap() < 1e-12);
        // zero-mass samples are outside the support and cost nothing
        let zeros = WeightedPointSet::new(vec![(3, 0.0)]).unwrap();
        assert_eq!(est_error(&zeros, 100, 1, &h, eps).unwrap(), 0.0);
    }
}
