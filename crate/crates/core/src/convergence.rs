//! Tail analysis of sampled sequences approaching the limit point: thinning,
//! Cauchy tests, Richardson extrapolation with fitted order, log-log slopes
//! and empirical moduli of continuity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    CauchyTail,
    Richardson,
}

/// Estimate of `lim_{hbar -> 0} f(hbar)` from samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub method: LimitMethod,
    pub samples_used: usize,
}

impl LimitEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            error_bound: 0.0,
            method: LimitMethod::CauchyTail,
            samples_used: 2,
        }
    }
}

/// Tolerances and window sizes for every tail-based decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TailConfig {
    /// Number of (thinned) tail samples inspected.
    pub window: usize,
    /// Target ratio between consecutive thinned samples.
    pub thin_ratio: f64,
    /// Successive differences below this are treated as converged.
    pub cauchy_tol: f64,
    /// Null-ideal membership tolerance.
    pub null_tol: f64,
    pub slope_min: f64,
    pub min_samples: usize,
    /// Residuals at or below this count as exactly zero.
    pub zero_tol: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            window: 4,
            thin_ratio: 1.5,
            cauchy_tol: 1e-6,
            null_tol: 1e-3,
            slope_min: 0.9,
            min_samples: 4,
            zero_tol: 1e-10,
        }
    }
}

/// Picks up to `count` indices from the tail of `dist` (distances to the
/// limit point, in grid order, decreasing) so that consecutive picks differ
/// by roughly `ratio`. Returned in grid order.
pub fn thin_tail(dist: &[f64], ratio: f64, count: usize) -> Vec<usize> {
    if dist.is_empty() || count == 0 {
        return Vec::new();
    }
    let mut current = (0..dist.len())
        .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        .unwrap();
    let mut picks = vec![current];
    while picks.len() < count {
        let target = dist[current] * ratio;
        let next = (0..dist.len())
            .filter(|&k| dist[k] > dist[current] * (1.0 + 1e-9))
            .min_by(|&a, &b| {
                let ea = (dist[a] / target).ln().abs();
                let eb = (dist[b] / target).ln().abs();
                ea.total_cmp(&eb)
            });
        match next {
            Some(k) => {
                picks.push(k);
                current = k;
            }
            None => break,
        }
    }
    picks.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]));
    picks
}

/// Indices used for tail decisions: thinned when possible, otherwise the
/// last `count` samples by distance.
pub fn tail_indices(dist: &[f64], cfg: &TailConfig) -> Vec<usize> {
    let count = cfg.window.max(2);
    let picks = thin_tail(dist, cfg.thin_ratio, count);
    if picks.len() >= count.min(dist.len()) {
        return picks;
    }
    nearest(dist, count)
}

/// The `count` samples closest to the limit point, farthest first.
pub(crate) fn nearest(dist: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]));
    order[order.len().saturating_sub(count)..].to_vec()
}

/// Successive differences contract and keep one sign (differences at or
/// below `tol` are ignored).
pub fn is_cauchy_tail(values: &[f64], tol: f64) -> bool {
    let signed: Vec<f64> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.abs() > tol)
        .collect();
    let contracting = signed.windows(2).all(|w| w[1].abs() < w[0].abs());
    let one_sign = signed.iter().all(|&d| d > 0.0) || signed.iter().all(|&d| d < 0.0);
    contracting && one_sign
}

/// Fits `v = l + c h^p` through three samples with `h0 > h1 > h2`.
/// Returns `(l, p)` or `None` when the fit is ill-conditioned.
pub fn richardson3(h: [f64; 3], v: [f64; 3]) -> Option<(f64, f64)> {
    let d1 = v[0] - v[1];
    let d2 = v[1] - v[2];
    if d1 == 0.0 || d2 == 0.0 {
        return None;
    }
    let r = d1 / d2;
    if !(r > 1.0) || !r.is_finite() {
        return None;
    }
    let g = |p: f64| (h[0].powf(p) - h[1].powf(p)) / (h[1].powf(p) - h[2].powf(p));
    let (mut lo, mut hi) = (0.05_f64, 12.0_f64);
    let (glo, ghi) = (g(lo) - r, g(hi) - r);
    if !(glo * ghi < 0.0) {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) - r) * glo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    let c = d2 / (h[1].powf(p) - h[2].powf(p));
    let l = v[2] - c * h[2].powf(p);
    l.is_finite().then_some((l, p))
}

/// Estimates the limit of `values` as `dist -> 0`.
pub fn estimate_limit(dist: &[f64], values: &[f64], cfg: &TailConfig) -> Result<LimitEstimate> {
    assert_eq!(dist.len(), values.len());
    let needed = cfg.min_samples.max(2);
    if values.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            found: values.len(),
        });
    }
    let mut tail_cfg = cfg.clone();
    tail_cfg.window = cfg.window.max(4);
    let pick = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&k| values[k]).collect() };
    let mut idx = tail_indices(dist, &tail_cfg);
    if !is_cauchy_tail(&pick(&idx), cfg.cauchy_tol) {
        // a kink between smooth branches can sit inside the thinned tail
        idx = nearest(dist, tail_cfg.window);
        if !is_cauchy_tail(&pick(&idx), cfg.cauchy_tol) {
            return Err(Error::NonCauchyTail);
        }
    }
    let h: Vec<f64> = idx.iter().map(|&k| dist[k]).collect();
    let v = pick(&idx);
    let n = v.len();
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let floor = 1e-14 * scale.max(1e-300);
    let last_diff = (v[n - 1] - v[n - 2]).abs();
    if v.windows(2).all(|w| (w[1] - w[0]).abs() <= cfg.cauchy_tol) {
        return Ok(LimitEstimate {
            value: v[n - 1],
            error_bound: last_diff.max(if last_diff > 0.0 { floor } else { 0.0 }),
            method: LimitMethod::CauchyTail,
            samples_used: n,
        });
    }
    let fit_last = richardson3([h[n - 3], h[n - 2], h[n - 1]], [v[n - 3], v[n - 2], v[n - 1]]);
    let fit_prev = (n >= 4)
        .then(|| richardson3([h[n - 4], h[n - 3], h[n - 2]], [v[n - 4], v[n - 3], v[n - 2]]))
        .flatten();
    match fit_last {
        Some((l, _p)) => {
            let err = match fit_prev {
                Some((l0, _)) => (l - l0).abs(),
                None => (l - v[n - 1]).abs(),
            };
            Ok(LimitEstimate {
                value: l,
                error_bound: err.max(floor),
                method: LimitMethod::Richardson,
                samples_used: n,
            })
        }
        None => Ok(LimitEstimate {
            value: v[n - 1],
            error_bound: v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max),
            method: LimitMethod::CauchyTail,
            samples_used: n,
        }),
    }
}

/// As [`estimate_limit`], for quantities known to be nonnegative (norms).
pub fn estimate_nonnegative_limit(
    dist: &[f64],
    values: &[f64],
    cfg: &TailConfig,
) -> Result<LimitEstimate> {
    let mut est = estimate_limit(dist, values, cfg)?;
    if est.value < 0.0 {
        est.error_bound = est.error_bound.max(-est.value);
        est.value = 0.0;
    }
    Ok(est)
}

/// Least-squares slope of `log r` against `log h`, with its standard error.
/// Points with `r <= 0` are skipped.
pub fn loglog_slope(h: &[f64], r: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(r)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let stderr = if pts.len() > 2 {
        let ss: f64 = pts
            .iter()
            .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
            .sum();
        (ss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, stderr))
}

/// Empirical modulus of continuity `w(d) = max{|f(x) - f(y)| : dist(x,y) <= d}`
/// evaluated at every sampled pair distance `d <= window`.
pub fn modulus_of_continuity(
    n: usize,
    dist: impl Fn(usize, usize) -> f64,
    values: &[f64],
    window: f64,
) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(i, j);
            if d <= window {
                pairs.push((d, (values[i] - values[j]).abs()));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut running = 0.0_f64;
    for (d, jump) in pairs {
        running = running.max(jump);
        match out.last_mut() {
            Some(last) if last.0 == d => last.1 = running,
            _ => out.push((d, running)),
        }
    }
    out
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub hbar: f64,
    pub value: f64,
    pub residual: f64,
    pub slope_estimate: Option<f64>,
}

/// Sampled residual sequence with its fitted decay rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub rows: Vec<ConvergenceRow>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub slope_min: f64,
    /// every residual is at or below the zero tolerance
    pub exact: bool,
    pub tail_monotone: bool,
    pub pass: bool,
}

impl ConvergenceReport {
    /// `hbar` are the distances to the limit point in grid order.
    pub fn from_samples(
        name: impl Into<String>,
        hbar: &[f64],
        value: &[f64],
        residual: &[f64],
        cfg: &TailConfig,
    ) -> Self {
        let n = hbar.len();
        let mut rows = Vec::with_capacity(n);
        for k in 0..n {
            let slope_estimate = (k > 0)
                .then(|| {
                    let (r0, r1) = (residual[k - 1], residual[k]);
                    (r0 > 0.0 && r1 > 0.0 && hbar[k] != hbar[k - 1])
                        .then(|| (r1.ln() - r0.ln()) / (hbar[k].ln() - hbar[k - 1].ln()))
                })
                .flatten();
            rows.push(ConvergenceRow {
                hbar: hbar[k],
                value: value[k],
                residual: residual[k],
                slope_estimate,
            });
        }
        let exact = residual.iter().all(|&r| r <= cfg.zero_tol);
        let idx = tail_indices(hbar, cfg);
        let th: Vec<f64> = idx.iter().map(|&k| hbar[k]).collect();
        let tr: Vec<f64> = idx.iter().map(|&k| residual[k]).collect();
        let tail_monotone = tr
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + cfg.zero_tol);
        let fit = loglog_slope(&th, &tr);
        let slope = fit.map(|f| f.0);
        let pass = exact || (tail_monotone && slope.is_some_and(|s| s >= cfg.slope_min));
        Self {
            name: name.into(),
            rows,
            slope,
            slope_stderr: fit.map(|f| f.1),
            slope_min: cfg.slope_min,
            exact,
            tail_monotone,
            pass,
        }
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.residual).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    /// CSV with columns `hbar,value,residual,slope_estimate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("hbar,value,residual,slope_estimate\n");
        for r in &self.rows {
            let slope = r.slope_estimate.map(|s| format!("{s:e}")).unwrap_or_default();
            out.push_str(&format!("{:e},{:e},{:e},{}\n", r.hbar, r.value, r.residual, slope));
        }
        out
    }
}
