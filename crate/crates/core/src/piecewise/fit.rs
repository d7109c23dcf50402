//! Least-squares replacement of sampled potentials by piecewise segments.

use nalgebra::{DMatrix, DVector};

use super::{KnotReport, PiecewiseModel, Segment, SegmentForm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Knots {
    /// Interior knot positions, strictly inside the sample range.
    Explicit(Vec<f64>),
    /// Greedy insertion until the residual drops below `tol_fit`.
    Auto { max_segments: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub form: SegmentForm,
    pub knots: Knots,
    /// Weight of each knot value-mismatch residual relative to one sample.
    pub continuity_weight: f64,
    pub tol_fit: f64,
    /// Energy stored in the fitted model.
    pub energy: f64,
}

impl FitOptions {
    pub fn new(form: SegmentForm, knots: Knots, energy: f64) -> Self {
        Self { form, knots, continuity_weight: 1e4, tol_fit: 1e-3, energy }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: PiecewiseModel,
    pub knots: Vec<KnotReport>,
    /// Max |V_fit − V_sample| per segment.
    pub segment_residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Fit `samples` (sorted by x) with one segment between consecutive knots.
pub fn fit_piecewise(samples: &[(f64, f64)], options: &FitOptions) -> Result<FitReport> {
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Fit { segment: 0, reason: "sample abscissae must be strictly increasing".into() });
    }
    if samples.len() < 3 {
        return Err(Error::Fit { segment: 0, reason: format!("{} samples, need at least 3", samples.len()) });
    }
    if !(options.continuity_weight >= 0.0) {
        return Err(Error::domain("continuity weight must be non-negative"));
    }
    match &options.knots {
        Knots::Explicit(knots) => fit_with_knots(samples, knots, options),
        Knots::Auto { max_segments } => {
            let mut knots: Vec<f64> = Vec::new();
            loop {
                let report = fit_with_knots(samples, &knots, options)?;
                if report.max_residual <= options.tol_fit {
                    return Ok(report);
                }
                if knots.len() + 1 >= *max_segments {
                    return Err(Error::Fit {
                        segment: report.segment_residuals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |m| m.0),
                        reason: format!(
                            "residual {} above tol_fit {} with the maximum of {} segments",
                            report.max_residual, options.tol_fit, max_segments
                        ),
                    });
                }
                // split the segment above tolerance holding the most samples;
                // the continuity penalty leaks a wide segment's error into
                // its neighbours, so the largest residual is a poor guide
                let bounds = boundaries(samples, &knots);
                let idx = partition(samples, &bounds);
                let worst = (0..idx.len())
                    .filter(|&s| report.segment_residuals[s] > options.tol_fit)
                    .max_by_key(|&s| idx[s].len())
                    .expect("some segment exceeds tol_fit");
                let range = &idx[worst];
                if range.len() < 6 {
                    return Err(Error::Fit {
                        segment: worst,
                        reason: format!("residual {} above tol_fit but too few samples to split", report.max_residual),
                    });
                }
                let mid = range.start + range.len() / 2;
                knots.push(samples[mid].0);
                knots.sort_by(f64::total_cmp);
            }
        }
    }
}

fn boundaries(samples: &[(f64, f64)], knots: &[f64]) -> Vec<f64> {
    let mut b = vec![samples[0].0];
    b.extend_from_slice(knots);
    b.push(samples[samples.len() - 1].0);
    b
}

/// Sample index range for each segment; knots belong to the right segment.
fn partition(samples: &[(f64, f64)], bounds: &[f64]) -> Vec<std::ops::Range<usize>> {
    let nseg = bounds.len() - 1;
    (0..nseg)
        .map(|i| {
            let start = samples.partition_point(|s| s.0 < bounds[i]);
            let end = if i + 1 == nseg { samples.len() } else { samples.partition_point(|s| s.0 < bounds[i + 1]) };
            start..end
        })
        .collect()
}

/// Segment parameters in a locally shifted/scaled frame.
#[derive(Debug, Clone, Copy)]
struct Local {
    form: SegmentForm,
    shift: f64,
    scale: f64,
}

impl Local {
    // parameters p: quadratic (p0, p1, p2) in t = (x − shift)/scale;
    // exponential (a, b', c) with V = a + b'·exp(−(x − shift)/c)
    fn value_and_grad(&self, p: &[f64], x: f64) -> (f64, [f64; 3]) {
        match self.form {
            SegmentForm::Quadratic => {
                let t = (x - self.shift) / self.scale;
                (p[0] + t * (p[1] + p[2] * t), [1.0, t, t * t])
            }
            SegmentForm::Exponential => {
                let d = x - self.shift;
                let e = (-d / p[2]).exp();
                (p[0] + p[1] * e, [1.0, e, p[1] * e * d / (p[2] * p[2])])
            }
        }
    }

    fn to_segment(&self, p: &[f64], x_lo: f64, x_hi: f64) -> Result<Segment> {
        match self.form {
            SegmentForm::Quadratic => {
                let (m, s) = (self.shift, self.scale);
                let c = p[2] / (s * s);
                let b = p[1] / s - 2.0 * p[2] * m / (s * s);
                let a = p[0] - p[1] * m / s + p[2] * m * m / (s * s);
                Segment::quadratic(a, b, c, x_lo, x_hi)
            }
            SegmentForm::Exponential => {
                let b = p[1] * (self.shift / p[2]).exp();
                Segment::exponential(p[0], b, p[2], x_lo, x_hi)
            }
        }
    }
}

fn fit_with_knots(samples: &[(f64, f64)], knots: &[f64], options: &FitOptions) -> Result<FitReport> {
    let (x0, xn) = (samples[0].0, samples[samples.len() - 1].0);
    if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|&k| !(k > x0 && k < xn)) {
        return Err(Error::Fit { segment: 0, reason: "knots must be increasing and strictly inside the sample range".into() });
    }
    let bounds = boundaries(samples, knots);
    let ranges = partition(samples, &bounds);
    for (i, r) in ranges.iter().enumerate() {
        if r.len() < 3 {
            return Err(Error::Fit { segment: i, reason: format!("{} samples, need at least 3", r.len()) });
        }
    }

    let mut locals = Vec::with_capacity(ranges.len());
    let mut params = Vec::with_capacity(3 * ranges.len());
    for (i, r) in ranges.iter().enumerate() {
        let pts = &samples[r.clone()];
        let (local, p) = initial_fit(i, pts, options.form, bounds[i], bounds[i + 1])?;
        locals.push(local);
        params.extend_from_slice(&p);
    }

    let joint = options.continuity_weight > 0.0 && ranges.len() > 1;
    let needs_lm = joint || options.form == SegmentForm::Exponential;
    if needs_lm {
        let sw = options.continuity_weight.sqrt();
        let n_data = samples.len();
        let n_res = n_data + if joint { ranges.len() - 1 } else { 0 };
        let eval = |p: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
            let mut r = DVector::zeros(n_res);
            let mut jac = DMatrix::zeros(n_res, p.len());
            for (s, range) in ranges.iter().enumerate() {
                let ps = &p.as_slice()[3 * s..3 * s + 3];
                for row in range.clone() {
                    let (v, g) = locals[s].value_and_grad(ps, samples[row].0);
                    r[row] = v - samples[row].1;
                    for j in 0..3 {
                        jac[(row, 3 * s + j)] = g[j];
                    }
                }
            }
            if joint {
                for s in 0..ranges.len() - 1 {
                    let x = bounds[s + 1];
                    let (vl, gl) = locals[s].value_and_grad(&p.as_slice()[3 * s..3 * s + 3], x);
                    let (vr, gr) = locals[s + 1].value_and_grad(&p.as_slice()[3 * s + 3..3 * s + 6], x);
                    let row = n_data + s;
                    r[row] = sw * (vr - vl);
                    for j in 0..3 {
                        jac[(row, 3 * s + j)] = -sw * gl[j];
                        jac[(row, 3 * s + 3 + j)] = sw * gr[j];
                    }
                }
            }
            (r, jac)
        };
        let p = levenberg_marquardt(DVector::from_vec(params), eval, 500);
        params = p.as_slice().to_vec();
    }

    let mut segments = Vec::with_capacity(ranges.len());
    for (s, local) in locals.iter().enumerate() {
        let p = &params[3 * s..3 * s + 3];
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit { segment: s, reason: "fit diverged".into() });
        }
        segments.push(local.to_segment(p, bounds[s], bounds[s + 1])?);
    }
    let model = PiecewiseModel::new(segments, options.energy)?;
    let segment_residuals: Vec<f64> = ranges
        .iter()
        .enumerate()
        .map(|(s, r)| {
            samples[r.clone()]
                .iter()
                .map(|&(x, v)| (model.segments()[s].value(x) - v).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let max_residual = segment_residuals.iter().copied().fold(0.0, f64::max);
    Ok(FitReport { knots: model.knot_reports(), model, segment_residuals, max_residual })
}

fn initial_fit(seg: usize, pts: &[(f64, f64)], form: SegmentForm, x_lo: f64, x_hi: f64) -> Result<(Local, [f64; 3])> {
    let width = x_hi - x_lo;
    match form {
        SegmentForm::Quadratic => {
            let local = Local { form, shift: 0.5 * (x_lo + x_hi), scale: 0.5 * width };
            let a = DMatrix::from_fn(pts.len(), 3, |i, j| local.value_and_grad(&[0.0; 3], pts[i].0).1[j]);
            let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
            let svd = a.svd(true, true);
            let smax = svd.singular_values.max();
            if svd.singular_values.min() <= 1e-12 * smax {
                return Err(Error::Fit { segment: seg, reason: "singular normal equations".into() });
            }
            let p = svd
                .solve(&y, 0.0)
                .map_err(|e| Error::Fit { segment: seg, reason: e.to_string() })?;
            Ok((local, [p[0], p[1], p[2]]))
        }
        SegmentForm::Exponential => {
            let shift = x_lo;
            let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
            let spread = pts.iter().map(|p| (p.1 - mean).abs()).fold(0.0, f64::max);
            let local = Local { form, shift, scale: width };
            if spread <= 1e-14 * mean.abs().max(1.0) {
                return Ok((local, [mean, 0.0, width]));
            }
            // variable projection: for fixed c the model is linear in (a, b')
            let ssr = |c: f64| linear_in_c(pts, shift, c).map(|(_, _, s)| s).unwrap_or(f64::INFINITY);
            let mut best = (f64::INFINITY, width);
            let n = 200;
            let mut grid = Vec::with_capacity(2 * n);
            for sign in [1.0, -1.0] {
                for i in 0..n {
                    let lg = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
                    grid.push(sign * width * 10f64.powf(lg));
                }
            }
            for &c in &grid {
                let s = ssr(c);
                if s < best.0 {
                    best = (s, c);
                }
            }
            if !best.0.is_finite() {
                return Err(Error::Fit { segment: seg, reason: "no usable decay length".into() });
            }
            // golden-section refinement in ln|c| between grid neighbours
            let sign = best.1.signum();
            let step = 6.0 / (n - 1) as f64 * std::f64::consts::LN_10;
            let centre = best.1.abs().ln();
            let f = |t: f64| ssr(sign * t.exp());
            let (mut lo, mut hi) = (centre - step, centre + step);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut t1, mut t2) = (hi - g * (hi - lo), lo + g * (hi - lo));
            let (mut f1, mut f2) = (f(t1), f(t2));
            for _ in 0..80 {
                if f1 < f2 {
                    hi = t2;
                    t2 = t1;
                    f2 = f1;
                    t1 = hi - g * (hi - lo);
                    f1 = f(t1);
                } else {
                    lo = t1;
                    t1 = t2;
                    f1 = f2;
                    t2 = lo + g * (hi - lo);
                    f2 = f(t2);
                }
            }
            let c = sign * (0.5 * (lo + hi)).exp();
            let c = if ssr(c) <= best.0 { c } else { best.1 };
            let (a, b, _) = linear_in_c(pts, shift, c)
                .ok_or_else(|| Error::Fit { segment: seg, reason: "singular normal equations".into() })?;
            Ok((local, [a, b, c]))
        }
    }
}

/// Least-squares (a, b') for V = a + b'·exp(−(x − shift)/c), plus the SSR.
fn linear_in_c(pts: &[(f64, f64)], shift: f64, c: f64) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let e: Vec<f64> = pts.iter().map(|p| (-(p.0 - shift) / c).exp()).collect();
    if e.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let em = e.iter().sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut see, mut sey) = (0.0, 0.0);
    for (ei, p) in e.iter().zip(pts) {
        see += (ei - em) * (ei - em);
        sey += (ei - em) * (p.1 - ym);
    }
    if !(see > 1e-300) || see < 1e-24 * em * em * n {
        return None;
    }
    let b = sey / see;
    let a = ym - b * em;
    let ssr = e.iter().zip(pts).map(|(ei, p)| (a + b * ei - p.1).powi(2)).sum();
    Some((a, b, ssr))
}

fn levenberg_marquardt<F>(mut p: DVector<f64>, f: F, max_iter: usize) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let finite = |r: &DVector<f64>, j: &DMatrix<f64>| r.iter().all(|v| v.is_finite()) && j.iter().all(|v| v.is_finite());
    let (mut r, mut jac) = f(&p);
    if !finite(&r, &jac) {
        return p;
    }
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..max_iter {
        if cost == 0.0 {
            break;
        }
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e16 {
            let mut m = a.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += lambda * a[(i, i)].max(1e-300);
            }
            let Some(chol) = m.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let delta = -chol.solve(&g);
            let trial = &p + &delta;
            let (rt, jt) = f(&trial);
            let ct = rt.norm_squared();
            if finite(&rt, &jt) && ct <= cost {
                small_step = delta.norm() <= 1e-15 * (p.norm() + 1e-15) || cost - ct <= 1e-30 * cost;
                p = trial;
                r = rt;
                jac = jt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted || small_step {
            break;
        }
    }
    p
}
