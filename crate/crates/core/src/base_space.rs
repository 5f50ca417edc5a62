//! Sampled parameter spaces standing in for `(0, 1]` or `{1/N}`, their
//! one-point compactifications, and the base-map predicates used by bundle
//! morphisms and extensions.

use serde::{Deserialize, Serialize};

use crate::convergence::{estimate_nonnegative_limit, TailConfig};
use crate::error::{Error, Result};

const METRIC_TOL: f64 = 1e-12;

/// A point of a sampled base space: one of the samples or the adjoined `0_I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Point {
    Sample(usize),
    Limit,
}

/// Finite, strictly decreasing set of positive parameter values with a
/// metric, optionally carrying an adjoined limit point.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledBaseSpace {
    points: Vec<f64>,
    /// row-major `n x n`
    distances: Vec<f64>,
    limit: Option<Vec<f64>>,
    euclidean: bool,
    resolution: f64,
}

impl SampledBaseSpace {
    /// Euclidean base space on the given points.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        validate_points(&points)?;
        let n = points.len();
        let mut distances = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                distances[i * n + j] = (points[i] - points[j]).abs();
            }
        }
        Ok(Self {
            points,
            distances,
            limit: None,
            euclidean: true,
            resolution: 0.0,
        })
    }

    /// Base space with a custom metric; symmetry, vanishing diagonal and the
    /// triangle inequality are audited on all sampled triples.
    pub fn with_metric(points: Vec<f64>, metric: impl Fn(f64, f64) -> f64) -> Result<Self> {
        validate_points(&points)?;
        let n = points.len();
        let mut distances = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                distances[i * n + j] = metric(points[i], points[j]);
            }
        }
        let space = Self {
            points,
            distances,
            limit: None,
            euclidean: false,
            resolution: 0.0,
        };
        space.audit_metric()?;
        Ok(space)
    }

    pub fn with_resolution(mut self, resolution: f64) -> Self {
        self.resolution = resolution.max(0.0);
        self
    }

    fn audit_metric(&self) -> Result<()> {
        let pts = self.all_points();
        for &x in &pts {
            if self.distance(x, x).abs() > METRIC_TOL {
                return Err(Error::InvalidMetric("d(x,x) != 0".into()));
            }
            for &y in &pts {
                let dxy = self.distance(x, y);
                if !dxy.is_finite() || dxy < 0.0 {
                    return Err(Error::InvalidMetric("negative or non-finite distance".into()));
                }
                if x != y && dxy == 0.0 {
                    return Err(Error::InvalidMetric("distinct points at distance 0".into()));
                }
                if (dxy - self.distance(y, x)).abs() > METRIC_TOL {
                    return Err(Error::InvalidMetric("asymmetric".into()));
                }
                for &z in &pts {
                    if self.distance(x, z) > dxy + self.distance(y, z) + METRIC_TOL {
                        return Err(Error::InvalidMetric("triangle inequality fails".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point_value(&self, p: Point) -> f64 {
        match p {
            Point::Sample(k) => self.points[k],
            Point::Limit => 0.0,
        }
    }

    pub fn has_limit(&self) -> bool {
        self.limit.is_some()
    }

    pub fn is_euclidean(&self) -> bool {
        self.euclidean
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Samples followed by the limit point, when present.
    pub fn all_points(&self) -> Vec<Point> {
        let mut v: Vec<Point> = (0..self.len()).map(Point::Sample).collect();
        if self.has_limit() {
            v.push(Point::Limit);
        }
        v
    }

    pub fn distance(&self, x: Point, y: Point) -> f64 {
        let n = self.len();
        match (x, y) {
            (Point::Sample(i), Point::Sample(j)) => self.distances[i * n + j],
            (Point::Sample(i), Point::Limit) | (Point::Limit, Point::Sample(i)) => {
                self.limit_distance(i)
            }
            (Point::Limit, Point::Limit) => 0.0,
        }
    }

    /// `d(hbar_k, 0_I)`; when no limit point is attached this is the distance
    /// the default compactification would assign.
    pub fn limit_distance(&self, k: usize) -> f64 {
        match &self.limit {
            Some(d) => d[k],
            None => self.points[k],
        }
    }

    pub fn limit_distances(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.limit_distance(k)).collect()
    }

    pub fn index_of(&self, hbar: f64) -> Result<usize> {
        self.points
            .iter()
            .position(|&p| (p - hbar).abs() <= 1e-12 * p.abs().max(1e-300))
            .ok_or(Error::UnsampledPoint(hbar))
    }

    /// Adjoins `0_I` with `d(hbar, 0_I) = hbar`.
    pub fn one_point_compactify(&self) -> Result<Self> {
        self.compactify_with(self.points.clone())
    }

    /// Adjoins `0_I` with the given distances.
    pub fn compactify_with(&self, limit_distances: Vec<f64>) -> Result<Self> {
        if self.has_limit() {
            return Err(Error::LimitPointPresent);
        }
        if limit_distances.len() != self.len() {
            return Err(Error::GridMismatch {
                expected: self.len(),
                found: limit_distances.len(),
            });
        }
        if limit_distances.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidMetric("limit distances must be positive".into()));
        }
        let mut out = self.clone();
        out.limit = Some(limit_distances);
        if !self.euclidean {
            out.audit_metric()?;
        }
        Ok(out)
    }

    /// Drops the limit point.
    pub fn interior(&self) -> Self {
        let mut out = self.clone();
        out.limit = None;
        out
    }

    /// `|hbar|_I`: distance in the compactification from `hbar` to `0_I`.
    pub fn hbar_distance(&self, hbar: f64) -> Result<f64> {
        if !self.has_limit() {
            return Err(Error::NoLimitPoint);
        }
        let k = self.index_of(hbar)?;
        Ok(self.limit_distance(k))
    }

    fn sub_space(&self, keep: &[usize]) -> Self {
        let n = self.len();
        let m = keep.len();
        let mut distances = vec![0.0; m * m];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                distances[a * m + b] = self.distances[i * n + j];
            }
        }
        Self {
            points: keep.iter().map(|&k| self.points[k]).collect(),
            distances,
            limit: self
                .limit
                .as_ref()
                .map(|d| keep.iter().map(|&k| d[k]).collect()),
            euclidean: self.euclidean,
            resolution: self.resolution,
        }
    }

    /// The sub-space on the given sample indices (kept in grid order).
    pub fn restrict_to(&self, indices: &[usize]) -> Result<Self> {
        let mut keep = indices.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() || keep.iter().any(|&k| k >= self.len()) {
            return Err(Error::InvalidGrid("bad sub-grid indices".into()));
        }
        Ok(self.sub_space(&keep))
    }
}

fn validate_points(points: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidGrid("no points".into()));
    }
    if points.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidGrid("points must be positive and finite".into()));
    }
    if points.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidGrid("points must be strictly decreasing".into()));
    }
    Ok(())
}

/// Geometric grid `hbar_max * ratio^k`, `k = 0..count`.
pub fn make_geometric_grid(hbar_max: f64, ratio: f64, count: usize) -> Result<SampledBaseSpace> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidGrid(format!("ratio {ratio} outside (0,1)")));
    }
    if count == 0 {
        return Err(Error::InvalidGrid("count must be positive".into()));
    }
    SampledBaseSpace::from_points((0..count).map(|k| hbar_max * ratio.powi(k as i32)).collect())
}

/// A map between sampled base spaces.
///
/// Images are sample points of the target (or its limit point). When the map
/// comes from a formula, the exact values and the snapping error to the
/// nearest target sample are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseMap {
    source: SampledBaseSpace,
    target: SampledBaseSpace,
    images: Vec<Point>,
    limit_image: Option<Point>,
    exact: Option<Vec<f64>>,
    snap_error: Vec<f64>,
}

impl BaseMap {
    pub fn new(source: SampledBaseSpace, target: SampledBaseSpace, images: Vec<Point>) -> Result<Self> {
        if images.len() != source.len() {
            return Err(Error::InvalidBaseMap("map must be total on source samples".into()));
        }
        for p in &images {
            match p {
                Point::Sample(k) if *k >= target.len() => {
                    return Err(Error::InvalidBaseMap(format!("image index {k} out of range")))
                }
                Point::Limit if !target.has_limit() => {
                    return Err(Error::InvalidBaseMap("target has no limit point".into()))
                }
                _ => {}
            }
        }
        let limit_image = (source.has_limit() && target.has_limit()).then_some(Point::Limit);
        let n = source.len();
        Ok(Self {
            source,
            target,
            images,
            limit_image,
            exact: None,
            snap_error: vec![0.0; n],
        })
    }

    pub fn identity(space: &SampledBaseSpace) -> Self {
        let images = (0..space.len()).map(Point::Sample).collect();
        Self::new(space.clone(), space.clone(), images).expect("identity is total")
    }

    /// Maps every source sample to the target sample with the same value.
    pub fn inclusion(source: &SampledBaseSpace, target: &SampledBaseSpace) -> Result<Self> {
        let images = source
            .points()
            .iter()
            .map(|&h| target.index_of(h).map(Point::Sample))
            .collect::<Result<Vec<_>>>()
            .map_err(|_| Error::InvalidBaseMap("source point missing from target".into()))?;
        Self::new(source.clone(), target.clone(), images)
    }

    /// Maps `hbar -> f(hbar)` snapped to the nearest target sample (or the
    /// limit point, located at value 0).
    pub fn snapped(
        source: &SampledBaseSpace,
        target: &SampledBaseSpace,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let mut images = Vec::with_capacity(source.len());
        let mut exact = Vec::with_capacity(source.len());
        let mut snap = Vec::with_capacity(source.len());
        for &h in source.points() {
            let y = f(h);
            if !y.is_finite() {
                return Err(Error::InvalidBaseMap(format!("f({h}) is not finite")));
            }
            let mut best = (Point::Limit, f64::INFINITY);
            for (k, &p) in target.points().iter().enumerate() {
                let e = (p - y).abs();
                if e < best.1 {
                    best = (Point::Sample(k), e);
                }
            }
            if target.has_limit() && y.abs() < best.1 {
                best = (Point::Limit, y.abs());
            }
            images.push(best.0);
            exact.push(y);
            snap.push(best.1);
        }
        let mut map = Self::new(source.clone(), target.clone(), images)?;
        map.exact = Some(exact);
        map.snap_error = snap;
        Ok(map)
    }

    /// Maps onto the image grid `{f(hbar)}`: the target is the Euclidean space
    /// on the distinct image values, compactified when the source is.
    pub fn image_grid(source: &SampledBaseSpace, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = source.points().iter().map(|&h| f(h)).collect();
        if values.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
            return Err(Error::InvalidBaseMap("image values must be positive".into()));
        }
        let mut distinct = values.clone();
        distinct.sort_by(|a, b| b.total_cmp(a));
        distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs());
        let mut target = SampledBaseSpace::from_points(distinct)?;
        if source.has_limit() {
            target = target.one_point_compactify()?;
        }
        let images = values
            .iter()
            .map(|&y| {
                target
                    .points()
                    .iter()
                    .position(|&p| (p - y).abs() <= 1e-15 * p.abs())
                    .map(Point::Sample)
                    .expect("value present")
            })
            .collect();
        let mut map = Self::new(source.clone(), target, images)?;
        map.exact = Some(values);
        Ok(map)
    }

    pub fn with_limit_image(mut self, p: Option<Point>) -> Self {
        self.limit_image = p;
        self
    }

    pub fn source(&self) -> &SampledBaseSpace {
        &self.source
    }

    pub fn target(&self) -> &SampledBaseSpace {
        &self.target
    }

    pub fn images(&self) -> &[Point] {
        &self.images
    }

    pub fn limit_image(&self) -> Option<Point> {
        self.limit_image
    }

    pub fn snap_errors(&self) -> &[f64] {
        &self.snap_error
    }

    pub fn exact_values(&self) -> Option<&[f64]> {
        self.exact.as_deref()
    }

    pub fn image(&self, p: Point) -> Option<Point> {
        match p {
            Point::Sample(k) => self.images.get(k).copied(),
            Point::Limit => self.limit_image,
        }
    }

    /// `|alpha(hbar_k)|_J`, using the exact image value when the target metric
    /// is Euclidean and one is known.
    pub fn image_distance_to_limit(&self, k: usize) -> f64 {
        match (&self.exact, self.target.is_euclidean()) {
            (Some(ex), true) => ex[k].abs(),
            _ => match self.images[k] {
                Point::Sample(j) => self.target.limit_distance(j),
                Point::Limit => 0.0,
            },
        }
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.images.iter().all(|p| seen.insert(*p))
            && !(self.limit_image.is_some() && self.images.contains(&Point::Limit))
    }

    /// Same map with source and target samples reindexed onto new base spaces
    /// (used after compactification, where sample indices are unchanged).
    pub fn with_spaces(&self, source: SampledBaseSpace, target: SampledBaseSpace) -> Result<Self> {
        let mut out = Self::new(source, target, self.images.clone())?;
        out.exact = self.exact.clone();
        out.snap_error = self.snap_error.clone();
        Ok(out)
    }
}

/// `outer . inner`.
pub fn compose(outer: &BaseMap, inner: &BaseMap) -> Result<BaseMap> {
    if inner.target != outer.source {
        return Err(Error::CompositionMismatch(
            "inner target differs from outer source".into(),
        ));
    }
    let images: Vec<Point> = inner
        .images
        .iter()
        .map(|&p| outer.image(p).unwrap_or(Point::Limit))
        .collect();
    let exact = match (&outer.exact, inner.images.iter().all(|p| matches!(p, Point::Sample(_)))) {
        (Some(ex), true) => Some(
            inner
                .images
                .iter()
                .map(|p| match p {
                    Point::Sample(k) => ex[*k],
                    Point::Limit => 0.0,
                })
                .collect(),
        ),
        _ => None,
    };
    let snap_error = inner
        .images
        .iter()
        .enumerate()
        .map(|(k, p)| {
            inner.snap_error[k]
                + match p {
                    Point::Sample(j) => outer.snap_error[*j],
                    Point::Limit => 0.0,
                }
        })
        .collect();
    let limit_image = inner.limit_image.and_then(|p| outer.image(p));
    Ok(BaseMap {
        source: inner.source.clone(),
        target: outer.target.clone(),
        images,
        limit_image,
        exact,
        snap_error,
    })
}

/// Outcome of [`is_metric_map`]; `witness` holds a violating pair of values.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricMapReport {
    pub is_metric: bool,
    pub witness: Option<(f64, f64)>,
}

/// `d_J(alpha(x), alpha(y)) <= d_I(x, y)` on all sampled pairs.
pub fn is_metric_map(alpha: &BaseMap) -> MetricMapReport {
    let pts = alpha.source.all_points();
    for (a, &x) in pts.iter().enumerate() {
        for &y in &pts[a + 1..] {
            let (Some(ax), Some(ay)) = (alpha.image(x), alpha.image(y)) else {
                continue;
            };
            let dj = alpha.target.distance(ax, ay);
            let di = alpha.source.distance(x, y);
            if dj > di + METRIC_TOL {
                return MetricMapReport {
                    is_metric: false,
                    witness: Some((alpha.source.point_value(x), alpha.source.point_value(y))),
                };
            }
        }
    }
    MetricMapReport {
        is_metric: true,
        witness: None,
    }
}

/// Finite-sample properness: along the source tail approaching `0_I`, the
/// images approach `0_J` (so no sequence escaping to the limit is mapped to
/// a set bounded away from the target limit).
pub fn is_proper(alpha: &BaseMap) -> bool {
    if alpha.source.has_limit() && alpha.limit_image.is_some_and(|p| p != Point::Limit) {
        return false;
    }
    let n = alpha.source.len();
    let dist = alpha.source.limit_distances();
    let img: Vec<f64> = (0..n).map(|k| alpha.image_distance_to_limit(k)).collect();
    if img.iter().zip(&dist).all(|(a, b)| a <= b) {
        return true;
    }
    let cfg = TailConfig::default();
    if n < cfg.min_samples {
        // too short to see a tail: require the image tail to shrink at least as fast
        return img.windows(2).all(|w| w[1] < w[0]);
    }
    let scale = img.iter().copied().fold(0.0, f64::max);
    match estimate_nonnegative_limit(&dist, &img, &cfg) {
        Ok(est) => est.value <= cfg.null_tol * scale + est.error_bound,
        Err(_) => false,
    }
}

/// Injective, isometric on all sampled pairs, and dense: every target sample
/// lies within the target resolution of an image point.
pub fn is_dense_isometric_embedding(alpha: &BaseMap) -> bool {
    if !alpha.is_injective() {
        return false;
    }
    let pts = alpha.source.all_points();
    for (a, &x) in pts.iter().enumerate() {
        for &y in &pts[a..] {
            let (Some(ax), Some(ay)) = (alpha.image(x), alpha.image(y)) else {
                continue;
            };
            let dj = alpha.target.distance(ax, ay);
            let di = alpha.source.distance(x, y);
            if (dj - di).abs() > METRIC_TOL {
                return false;
            }
        }
    }
    let image_pts: Vec<Point> = pts.iter().filter_map(|&p| alpha.image(p)).collect();
    (0..alpha.target.len()).all(|k| {
        image_pts
            .iter()
            .any(|&p| alpha.target.distance(Point::Sample(k), p) <= alpha.target.resolution() + METRIC_TOL)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> SampledBaseSpace {
        make_geometric_grid(1.0, 0.5, n).unwrap()
    }

    #[test]
    fn geometric_grid_examples() {
        let g = grid(3);
        assert_eq!(g.points(), &[1.0, 0.5, 0.25]);
        assert_eq!(g.distance(Point::Sample(0), Point::Sample(2)), 0.75);
        let g = make_geometric_grid(0.5, 0.1, 2).unwrap();
        assert!((g.points()[1] - 0.05).abs() < 1e-17);
        assert!(make_geometric_grid(1.0, 1.0, 3).is_err());
        assert!(make_geometric_grid(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn compactification_examples() {
        let g = grid(3);
        let c = g.one_point_compactify().unwrap();
        assert_eq!(c.distance(Point::Sample(2), Point::Limit), 0.25);
        assert_eq!(c.distance(Point::Sample(0), Point::Limit), 1.0);
        assert_eq!(c.hbar_distance(0.25).unwrap(), 0.25);
        assert_eq!(c.hbar_distance(1.0).unwrap(), 1.0);
        assert_eq!(c.one_point_compactify(), Err(Error::LimitPointPresent));
        assert_eq!(g.hbar_distance(0.25), Err(Error::NoLimitPoint));
        assert_eq!(c.hbar_distance(0.3), Err(Error::UnsampledPoint(0.3)));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(
                    c.distance(Point::Sample(i), Point::Sample(j)),
                    g.distance(Point::Sample(i), Point::Sample(j))
                );
            }
        }
    }

    #[test]
    fn custom_limit_distance() {
        let g = SampledBaseSpace::with_metric(vec![1.0, 0.5, 0.25], |x, y| 2.0 * (x - y).abs())
            .unwrap();
        let c = g.compactify_with(g.points().iter().map(|h| 2.0 * h).collect()).unwrap();
        assert_eq!(c.hbar_distance(0.5).unwrap(), 1.0);
    }

    #[test]
    fn bad_metric_rejected() {
        // squared distance breaks the triangle inequality
        let r = SampledBaseSpace::with_metric(vec![1.0, 0.5, 0.0001], |x, y| (x - y).powi(2) * 10.0);
        assert!(matches!(r, Err(Error::InvalidMetric(_))));
    }

    #[test]
    fn metric_map_examples() {
        let g = grid(6);
        assert!(is_metric_map(&BaseMap::identity(&g)).is_metric);
        let half = BaseMap::snapped(&g, &g, |x| x / 2.0).unwrap();
        assert!(is_metric_map(&half).is_metric);
        let double = BaseMap::image_grid(&g, |x| 2.0 * x).unwrap();
        let rep = is_metric_map(&double);
        assert!(!rep.is_metric);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn properness_examples() {
        let g = grid(8).one_point_compactify().unwrap();
        assert!(is_proper(&BaseMap::identity(&g)));
        let constant = BaseMap::new(g.clone(), g.clone(), vec![Point::Sample(1); 8])
            .unwrap()
            .with_limit_image(Some(Point::Limit));
        assert!(!is_proper(&constant));
        let square = BaseMap::image_grid(&g, |x| x * x).unwrap();
        assert!(is_proper(&square));
    }

    #[test]
    fn dense_isometric_examples() {
        let g = grid(5);
        let c = g.one_point_compactify().unwrap();
        assert!(is_dense_isometric_embedding(&BaseMap::inclusion(&g, &c).unwrap()));
        let half = BaseMap::snapped(&g, &g, |x| x / 2.0).unwrap();
        assert!(!is_dense_isometric_embedding(&half));
        let collapse = BaseMap::new(g.clone(), g.clone(), vec![Point::Sample(0); 5]).unwrap();
        assert!(!is_dense_isometric_embedding(&collapse));
    }

    #[test]
    fn composition_of_contractions() {
        let g = grid(6);
        let a = BaseMap::snapped(&g, &g, |x| x / 2.0).unwrap();
        let b = BaseMap::snapped(&g, &g, |x| x / 4.0).unwrap();
        let ab = compose(&a, &b).unwrap();
        assert!(is_metric_map(&ab).is_metric);
        assert_eq!(ab.source(), &g);
    }
}
