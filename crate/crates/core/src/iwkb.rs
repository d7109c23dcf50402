//! Instantaneous WKB: position-dependent incident/reflected amplitudes and
//! the pointwise transmission and reflection coefficients T(x), R(x).
//!
//! Far from the barrier the WKB amplitudes obey `A − B = c` and
//! `A² + B² = k`, which fixes
//!
//! ```text
//! A = c/2 + √(2k − c²)/2,     B = −c/2 + √(2k − c²)/2.
//! ```
//!
//! Two further constants shift them to `C = c₁ + A`, `D = c₂ + B` so that
//! the inner boundary is fully transmitting, and the renormalised pair
//! `a = C·√(k/h)`, `b = D·√(k/h)` with `h = C² + D²` keeps `a² + b² = k`.
//! T = a²/k and R = b²/k then sum to one at every point.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::format::format_g17;
use crate::numerics::brent;
use crate::piecewise::{chain_real_phase, LocalWavenumber, PiecewiseModel, WaveRegime};
use crate::potential::Potential1d;

fn root_term(c: f64, k: f64) -> Result<f64> {
    let mut disc = 2.0 * k - c * c;
    // rounding when c² = 2k exactly
    if disc < 0.0 && disc >= -4.0 * f64::EPSILON * (2.0 * k).abs() {
        disc = 0.0;
    }
    if disc < 0.0 || !disc.is_finite() {
        return Err(Error::AmplitudeDomain { x: None, value: disc });
    }
    Ok(disc.sqrt())
}

/// Far-field amplitudes (A, B) for splitting constant `c` at wavenumber `k`.
pub fn far_field_amplitudes(c: f64, k: f64) -> Result<(f64, f64)> {
    let s = root_term(c, k)?;
    Ok((0.5 * c + 0.5 * s, -0.5 * c + 0.5 * s))
}

/// c = √(T·k) − √(R·k).
pub fn solve_c(t_far: f64, r_far: f64, k_far: f64) -> Result<f64> {
    if !(t_far >= 0.0 && r_far >= 0.0) {
        return Err(Error::domain(format!("negative far-field coefficients T = {t_far}, R = {r_far}")));
    }
    if !(k_far > 0.0) {
        return Err(Error::domain(format!("far-field wavenumber must be positive, got {k_far}")));
    }
    if (t_far + r_far - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!("T + R = {} is not 1", t_far + r_far)));
    }
    Ok((t_far * k_far).sqrt() - (r_far * k_far).sqrt())
}

/// c₂ such that D = c₂ + B vanishes at the inner boundary.
pub fn solve_c2(c: f64, k_inner: f64) -> Result<f64> {
    Ok(0.5 * c - 0.5 * root_term(c, k_inner)?)
}

/// Result of the far-field matching for c₁.
#[derive(Debug, Clone, PartialEq)]
pub struct C1Solution {
    pub c1: f64,
    /// Both roots of the matching quadratic (equal in the degenerate case).
    pub roots: [f64; 2],
    pub note: String,
}

/// c₁ from matching the reflection coefficient at the far anchor,
/// b²(x_far) = B²(x_far), i.e. C(x_far) = ±D·A/B.
///
/// Root choice: h must stay positive at every wavenumber in `k_check`
/// (those with 2k ≥ c²) and C(x_far) must carry the sign of A(x_far); if
/// both roots qualify the one with smaller |c₁| wins.
pub fn solve_c1(c: f64, c2: f64, k_far: f64, k_check: &[f64]) -> Result<C1Solution> {
    let s = root_term(c, k_far)?;
    if s == 0.0 {
        return Err(Error::Matching { reason: "2k_far - c^2 = 0 at the far anchor".into(), discriminant: 0.0 });
    }
    let (a_far, b_far) = (0.5 * c + 0.5 * s, -0.5 * c + 0.5 * s);
    let d_far = c2 + b_far;
    let scale = s.max(c.abs()).max(c2.abs());
    if b_far.abs() <= 1e-14 * scale {
        if d_far.abs() <= 1e-12 * scale {
            return Ok(C1Solution {
                c1: 0.0,
                roots: [0.0, 0.0],
                note: "degenerate: B = D = 0 at the far anchor, every c1 matches; c1 = 0 chosen".into(),
            });
        }
        return Err(Error::Matching {
            reason: format!("B(x_far) = 0 while D(x_far) = {d_far}; reflection cannot be matched"),
            discriminant: f64::NAN,
        });
    }
    if d_far.abs() <= 1e-12 * scale {
        return Err(Error::Matching {
            reason: format!(
                "D(x_far) = c2 + B(x_far) = 0 (equal inner and far wavenumbers), so b(x_far) = 0 and R_far = {} cannot be matched",
                format_g17(b_far * b_far / k_far)
            ),
            discriminant: 0.0,
        });
    }
    // h = C² + D² and k = A² + B², so b² = B² reduces to C² = (D·A/B)²
    let half_gap = (d_far * a_far / b_far).abs();
    let disc = 4.0 * half_gap * half_gap;
    let roots = [-a_far - half_gap, -a_far + half_gap];

    let qualifies = |c1: f64| {
        let h_ok = k_check.iter().chain(std::iter::once(&k_far)).all(|&k| {
            if 2.0 * k < c * c {
                return true;
            }
            normalization_h(c, c1, c2, k).is_ok()
        });
        let big_c = c1 + a_far;
        h_ok && (big_c * a_far >= 0.0)
    };
    let mut candidates: Vec<f64> = roots.iter().copied().filter(|&r| qualifies(r)).collect();
    candidates.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let Some(&c1) = candidates.first() else {
        return Err(Error::Matching {
            reason: format!("neither root {:?} keeps h > 0 with C(x_far) of the sign of A(x_far)", roots),
            discriminant: disc,
        });
    };
    let note = if candidates.len() == 2 {
        "both roots admissible; smaller |c1| chosen".to_string()
    } else {
        let other = if c1 == roots[0] { roots[1] } else { roots[0] };
        format!("root {} rejected (h <= 0 on grid or C(x_far) opposite to A(x_far))", format_g17(other))
    };
    let mut sorted = roots;
    sorted.sort_by(f64::total_cmp);
    Ok(C1Solution { c1, roots: sorted, note })
}

/// h = C² + D².
pub fn normalization_h(c: f64, c1: f64, c2: f64, k: f64) -> Result<f64> {
    let (big_a, big_b) = far_field_amplitudes(c, k)?;
    check_h((c1 + big_a).powi(2) + (c2 + big_b).powi(2))
}

/// h in the expanded form (c₁ + c/2)² + (c₂ − c/2)² + (c₁ + c₂)s + s²/2.
pub fn normalization_h_expanded(c: f64, c1: f64, c2: f64, k: f64) -> Result<f64> {
    let s = root_term(c, k)?;
    check_h((c1 + 0.5 * c).powi(2) + (c2 - 0.5 * c).powi(2) + (c1 + c2) * s + 0.5 * s * s)
}

fn check_h(h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Normalization { x: None, h });
    }
    Ok(h)
}

/// Modified amplitudes (a, b) = (C, D)·√(k/h).
pub fn modulated_amplitudes(c: f64, c1: f64, c2: f64, k: f64) -> Result<(f64, f64)> {
    let (big_a, big_b) = far_field_amplitudes(c, k)?;
    let h = normalization_h(c, c1, c2, k)?;
    let scale = (k / h).sqrt();
    Ok(((c1 + big_a) * scale, (c2 + big_b) * scale))
}

/// (T, R) = (a²/k, b²/k).
pub fn instantaneous_coefficients(c: f64, c1: f64, c2: f64, k: f64) -> Result<(f64, f64)> {
    if !(k > 0.0) {
        return Err(Error::domain(format!("coefficients need k > 0, got {k}")));
    }
    let (a, b) = modulated_amplitudes(c, c1, c2, k)?;
    Ok((a * a / k, b * b / k))
}

/// (T, R) through the explicit expansion in c, c₁, c₂ and h.
pub fn instantaneous_coefficients_expanded(c: f64, c1: f64, c2: f64, k: f64) -> Result<(f64, f64)> {
    let s = root_term(c, k)?;
    let h = normalization_h_expanded(c, c1, c2, k)?;
    let p = c1 + 0.5 * c;
    let q = c2 - 0.5 * c;
    let common = s * s / (4.0 * h);
    Ok((p / h * (p + s) + common, q / h * (q + s) + common))
}

/// Far-field coefficient pair fed into the constant solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarField {
    pub transmission: f64,
    pub reflection: f64,
}

/// The three constants c, c₁, c₂ together with the anchors that fixed them.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConstants {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub k_inner: f64,
    pub k_far: f64,
    pub x_min: f64,
    pub x_far: f64,
    pub t_far: f64,
    pub r_far: f64,
    pub c1_roots: [f64; 2],
    pub c1_note: String,
}

impl BoundaryConstants {
    /// Solve c, then c₂, then c₁.
    pub fn solve(
        far: FarField,
        k_inner: f64,
        k_far: f64,
        x_min: f64,
        x_far: f64,
        k_check: &[f64],
    ) -> Result<Self> {
        if !(x_min < x_far) {
            return Err(Error::domain(format!("anchors need x_min < x_far, got {x_min}, {x_far}")));
        }
        let c = solve_c(far.transmission, far.reflection, k_far)?;
        let c2 = solve_c2(c, k_inner)?;
        let sol = solve_c1(c, c2, k_far, k_check)?;
        Ok(Self {
            c,
            c1: sol.c1,
            c2,
            k_inner,
            k_far,
            x_min,
            x_far,
            t_far: far.transmission,
            r_far: far.reflection,
            c1_roots: sol.roots,
            c1_note: sol.note,
        })
    }

    /// Anchor wavenumbers read from `model`; `k_far` may be overridden.
    pub fn for_model(
        model: &PiecewiseModel,
        far: FarField,
        x_min: f64,
        x_far: f64,
        k_far_override: Option<f64>,
        grid: &[f64],
    ) -> Result<Self> {
        let k_inner = propagating_k(model, x_min)?;
        let k_far = match k_far_override {
            Some(k) => k,
            None => propagating_k(model, x_far)?,
        };
        let k_check: Vec<f64> = grid
            .iter()
            .filter_map(|&x| model.local_wavenumber(x).ok())
            .filter(|k| k.is_propagating())
            .map(|k| k.magnitude)
            .collect();
        Self::solve(far, k_inner, k_far, x_min, x_far, &k_check)
    }

    /// Flat key/value record.
    pub fn to_record(&self) -> String {
        self.record().finish()
    }

    pub fn record(&self) -> Record {
        let mut rec = Record::new();
        rec.num("c", self.c)
            .num("c1", self.c1)
            .num("c2", self.c2)
            .num("k_inner", self.k_inner)
            .num("k_far", self.k_far)
            .num("x_min", self.x_min)
            .num("x_far", self.x_far)
            .num("T_far", self.t_far)
            .num("R_far", self.r_far)
            .num("c1_root_lo", self.c1_roots[0])
            .num("c1_root_hi", self.c1_roots[1])
            .text("c1_note", &self.c1_note);
        rec
    }
}

fn propagating_k(model: &PiecewiseModel, x: f64) -> Result<f64> {
    let k = model.local_wavenumber(x)?;
    if !k.is_propagating() {
        return Err(Error::domain(format!("anchor x = {x} is not classically allowed")));
    }
    Ok(k.magnitude)
}

/// `format=1` key/value text record.
#[derive(Debug, Default)]
pub struct Record {
    lines: Vec<String>,
}

impl Record {
    pub fn new() -> Self {
        Self { lines: vec!["format=1".into()] }
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.lines.push(format!("{key}={}", format_g17(v)));
        self
    }

    pub fn int(&mut self, key: &str, v: i64) -> &mut Self {
        self.lines.push(format!("{key}={v}"));
        self
    }

    pub fn text(&mut self, key: &str, v: &str) -> &mut Self {
        self.lines.push(format!("{key}={}", v.replace('\n', " ")));
        self
    }

    pub fn finish(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    /// `key=value` lines, starting with `format=1`.
    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Same content as a two-column `key,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        for line in &self.lines {
            let (k, v) = line.split_once('=').unwrap_or((line, ""));
            if v.contains(',') || v.contains('"') {
                out.push_str(&format!("{k},\"{}\"\n", v.replace('"', "\"\"")));
            } else {
                out.push_str(&format!("{k},{v}\n"));
            }
        }
        out
    }
}

/// One grid point of a coefficient profile. Amplitude and coefficient
/// fields are `None` at evanescent and turning-point rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub x: f64,
    pub v: f64,
    pub k: f64,
    pub u: f64,
    pub big_a: Option<f64>,
    pub big_b: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub t: Option<f64>,
    pub r: Option<f64>,
    pub validity: f64,
    pub evanescent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    pub rows: Vec<ProfileRow>,
}

impl CoefficientProfile {
    pub const HEADER: &'static str = "x,V,k,u,A,B,a,b,T,R,validity,evanescent";

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_g17).unwrap_or_default();
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                format_g17(r.x),
                format_g17(r.v),
                format_g17(r.k),
                format_g17(r.u),
                opt(r.big_a),
                opt(r.big_b),
                opt(r.a),
                opt(r.b),
                opt(r.t),
                opt(r.r),
                format_g17(r.validity),
                u8::from(r.evanescent)
            ));
        }
        out
    }

    pub fn allowed(&self) -> impl Iterator<Item = &ProfileRow> {
        self.rows.iter().filter(|r| !r.evanescent)
    }
}

fn phased(model: &PiecewiseModel, x_ref: f64) -> Result<std::borrow::Cow<'_, PiecewiseModel>> {
    if model.is_chained() {
        Ok(std::borrow::Cow::Borrowed(model))
    } else {
        Ok(std::borrow::Cow::Owned(chain_real_phase(model, x_ref)?))
    }
}

/// |k′|/k², infinite where k = 0.
fn validity_metric(model: &PiecewiseModel, x: f64, k: &LocalWavenumber) -> Result<f64> {
    if k.magnitude == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(model.wavenumber_slope(x)?.abs() / (k.magnitude * k.magnitude))
}

/// Apply the instantaneous amplitudes at every grid point.
pub fn coefficient_profile(
    model: &PiecewiseModel,
    constants: &BoundaryConstants,
    grid: &[f64],
) -> Result<CoefficientProfile> {
    let model = phased(model, constants.x_min)?;
    let (c, c1, c2) = (constants.c, constants.c1, constants.c2);
    let mut rows = Vec::with_capacity(grid.len());
    for &x in grid {
        let v = model.potential(x)?;
        let k = LocalWavenumber::from_energy(model.energy(), v);
        let u = model.eiconal(x)?;
        let validity = validity_metric(&model, x, &k)?;
        let mut row = ProfileRow {
            x,
            v,
            k: k.magnitude,
            u,
            big_a: None,
            big_b: None,
            a: None,
            b: None,
            t: None,
            r: None,
            validity,
            evanescent: k.regime != WaveRegime::Propagating,
        };
        if k.is_propagating() {
            let km = k.magnitude;
            let (big_a, big_b) = far_field_amplitudes(c, km).map_err(|e| e.at(x))?;
            let (a, b) = modulated_amplitudes(c, c1, c2, km).map_err(|e| e.at(x))?;
            row.big_a = Some(big_a);
            row.big_b = Some(big_b);
            row.a = Some(a);
            row.b = Some(b);
            row.t = Some(a * a / km);
            row.r = Some(b * b / km);
        }
        rows.push(row);
    }
    Ok(CoefficientProfile { rows })
}

/// y(x) = a/√k·e^{iu} + b/√k·e^{−iu} at every grid point.
pub fn wavefunction(model: &PiecewiseModel, constants: &BoundaryConstants, grid: &[f64]) -> Result<Vec<Complex64>> {
    let model = phased(model, constants.x_min)?;
    grid.iter()
        .map(|&x| {
            let k = model.local_wavenumber(x)?;
            if !k.is_propagating() {
                return Err(Error::TurningPoint { x });
            }
            let (a, b) = modulated_amplitudes(constants.c, constants.c1, constants.c2, k.magnitude).map_err(|e| e.at(x))?;
            let u = model.eiconal(x)?;
            let phase = Complex64::from_polar(1.0, u);
            Ok((a * phase + b * phase.conj()) / k.magnitude.sqrt())
        })
        .collect()
}

/// A root of E = V(x) bracketed between two grid points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningPoint {
    pub lo: f64,
    pub hi: f64,
    /// Refined location, or the knot when E − V jumps sign there.
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    /// (x, |k′|/k²) per grid point.
    pub metric: Vec<(f64, f64)>,
    pub turning_points: Vec<TurningPoint>,
}

impl ValidityReport {
    /// Largest finite-or-infinite metric among classically allowed points.
    pub fn max_metric(&self) -> f64 {
        self.metric.iter().map(|m| m.1).fold(0.0, f64::max)
    }
}

pub fn validity_report(model: &PiecewiseModel, grid: &[f64]) -> Result<ValidityReport> {
    let energy = model.energy();
    let mut metric = Vec::with_capacity(grid.len());
    let mut gaps = Vec::with_capacity(grid.len());
    for &x in grid {
        let v = model.potential(x)?;
        let k = LocalWavenumber::from_energy(energy, v);
        metric.push((x, validity_metric(model, x, &k)?));
        gaps.push(energy - v);
    }
    let mut turning_points = Vec::new();
    for i in 0..grid.len().saturating_sub(1) {
        let (g0, g1) = (gaps[i], gaps[i + 1]);
        if g0 == 0.0 {
            turning_points.push(TurningPoint { lo: grid[i], hi: grid[i], x: grid[i] });
            continue;
        }
        if g0 * g1 >= 0.0 {
            continue;
        }
        let (lo, hi) = (grid[i], grid[i + 1]);
        let (si, sj) = (model.segment_index(lo)?, model.segment_index(hi)?);
        let x = if si == sj || (sj == si + 1 && hi == model.segments()[sj].x_lo) {
            let seg = model.segments()[si];
            brent(|x| energy - seg.value(x), lo, hi, 1e-13).unwrap_or(0.5 * (lo + hi))
        } else {
            // sign change across a knot: locate it segment by segment
            let mut found = None;
            for s in si..=sj {
                let seg = model.segments()[s];
                let (a, b) = (lo.max(seg.x_lo), hi.min(seg.x_hi));
                if let Some(&r) = seg.turning_points(energy).iter().find(|&&r| r >= a && r <= b) {
                    found = Some(r);
                    break;
                }
            }
            found.unwrap_or_else(|| model.segments()[sj].x_lo)
        };
        turning_points.push(TurningPoint { lo, hi, x });
    }
    if let Some(&g) = gaps.last() {
        if g == 0.0 && grid.len() > 1 {
            let x = grid[grid.len() - 1];
            turning_points.push(TurningPoint { lo: x, hi: x, x });
        }
    }
    Ok(ValidityReport { metric, turning_points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piecewise::{chain_eiconal, load_reference_table, Segment, TABLE_X_MIN};
    use crate::potential::uniform_grid;
    use proptest::prelude::*;

    #[test]
    fn far_field_examples() {
        assert_eq!(far_field_amplitudes(0.0, 0.5).unwrap(), (0.5, 0.5));
        let (a, b) = far_field_amplitudes(0.8, 0.64).unwrap();
        assert!((a - 0.8).abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = far_field_amplitudes(-0.0913, 0.8).unwrap();
        assert!((a - 0.585156).abs() < 1e-6 && (b - 0.676456).abs() < 1e-6, "{a} {b}");
        assert!(matches!(far_field_amplitudes(2.0, 0.5), Err(Error::AmplitudeDomain { .. })));
    }

    #[test]
    fn c_examples() {
        assert!((solve_c(0.299, 0.701, 0.0988).unwrap() + 0.0913).abs() < 1e-4);
        assert!((solve_c(1.0, 0.0, 0.64).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(solve_c(0.5, 0.5, 3.7).unwrap(), 0.0);
        assert!(solve_c(-0.1, 1.1, 0.5).is_err());
        assert!(solve_c(0.5, 0.4, 0.5).is_err());
    }

    #[test]
    fn c2_examples() {
        assert!((solve_c2(-0.0913, 0.8).unwrap() + 0.676456).abs() < 1e-6);
        assert_eq!(solve_c2(0.0, 0.5).unwrap(), -0.5);
        let c = (2.0f64 * 0.3).sqrt();
        assert!((solve_c2(c, 0.3).unwrap() - 0.5 * c).abs() < 1e-15);
        assert!(solve_c2(2.0, 0.3).is_err());
    }

    #[test]
    fn c1_examples() {
        let sol = solve_c1(-0.0913, -0.6765, 0.0988, &[]).unwrap();
        assert!((sol.c1 - 0.098).abs() < 1e-3, "{sol:?}");
        let sol = solve_c1(0.0, 0.0, 0.37, &[]).unwrap();
        assert_eq!(sol.c1, 0.0);
        // residual: |b| matches |B| at the far anchor
        let (c, c2, k) = (-0.0913, -0.6765, 0.0988);
        let sol = solve_c1(c, c2, k, &[]).unwrap();
        let (_, big_b) = far_field_amplitudes(c, k).unwrap();
        let (_, b) = modulated_amplitudes(c, sol.c1, c2, k).unwrap();
        assert!((b.abs() - big_b.abs()).abs() <= 1e-10);
    }

    #[test]
    fn c1_degenerate_and_failure() {
        // free space: T = 1, R = 0 and k_inner = k_far
        let k = 0.64;
        let c = solve_c(1.0, 0.0, k).unwrap();
        let c2 = solve_c2(c, k).unwrap();
        assert!(c2.abs() < 1e-15);
        assert_eq!(solve_c1(c, c2, k, &[]).unwrap().c1, 0.0);
        // R = 0 far away but the inner wavenumber differs
        let c2 = solve_c2(c, 0.9).unwrap();
        assert!(matches!(solve_c1(c, c2, k, &[]), Err(Error::Matching { .. })));
        // R > 0 with k_inner = k_far leaves D = 0 at the far anchor
        let c = solve_c(0.6, 0.4, k).unwrap();
        let c2 = solve_c2(c, k).unwrap();
        match solve_c1(c, c2, k, &[]) {
            Err(Error::Matching { reason, .. }) => assert!(reason.contains("equal inner and far")),
            other => panic!("expected a matching error, got {other:?}"),
        }
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalization_h(0.0, 0.0, 0.0, 0.5).unwrap(), 0.5);
        let (c, c1, c2, k) = (-0.0913, 0.098, -0.6765, 0.8);
        let (big_a, big_b) = far_field_amplitudes(c, k).unwrap();
        let h = normalization_h(c, c1, c2, k).unwrap();
        assert!((h - ((c1 + big_a).powi(2) + (c2 + big_b).powi(2))).abs() < 1e-12);
        // C = D = 0 makes h vanish
        let (c, k) = (0.0, 0.5);
        assert!(matches!(normalization_h(c, -0.5, -0.5, k), Err(Error::Normalization { .. })));
    }

    #[test]
    fn modulated_examples() {
        let (big_a, big_b) = far_field_amplitudes(0.1, 0.4).unwrap();
        let (a, b) = modulated_amplitudes(0.1, 0.0, 0.0, 0.4).unwrap();
        assert!((a - big_a).abs() < 1e-15 && (b - big_b).abs() < 1e-15);
        let c = -0.0913;
        let c2 = solve_c2(c, 0.8).unwrap();
        let (_, b) = modulated_amplitudes(c, 0.098, c2, 0.8).unwrap();
        assert!(b.abs() < 1e-10);
    }

    #[test]
    fn coefficient_examples() {
        let c = -0.0913;
        let c2 = solve_c2(c, 0.8).unwrap();
        let c1 = solve_c1(c, c2, 0.0988, &[]).unwrap().c1;
        let (t, r) = instantaneous_coefficients(c, c1, c2, 0.8).unwrap();
        assert!((t - 1.0).abs() < 1e-10 && r < 1e-10);
        let (t, r) = instantaneous_coefficients(c, c1, c2, 0.0988).unwrap();
        assert!((r - 0.701).abs() < 1e-3 && (t - 0.299).abs() < 1e-3, "{t} {r}");
        let (t, r) = instantaneous_coefficients(0.0, 0.0, 0.0, 0.3).unwrap();
        assert!((t - 0.5).abs() < 1e-15 && (r - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn amplitude_identities(k in 0.01f64..2.0, cf in -0.99f64..0.99, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
            let c = cf * (2.0 * k).sqrt();
            let (big_a, big_b) = far_field_amplitudes(c, k).unwrap();
            prop_assert!((big_a - big_b - c).abs() < 1e-10);
            prop_assert!((big_a * big_a + big_b * big_b - k).abs() < 1e-10);
            if let Ok(h) = normalization_h(c, c1, c2, k) {
                prop_assert!((h - (c1 + big_a).powi(2) - (c2 + big_b).powi(2)).abs() < 1e-10);
                let (a, b) = modulated_amplitudes(c, c1, c2, k).unwrap();
                prop_assert!((a * a + b * b - k).abs() < 1e-10);
                let (t, r) = instantaneous_coefficients(c, c1, c2, k).unwrap();
                prop_assert!((t + r - 1.0).abs() < 1e-10);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&t));
                let (te, re) = instantaneous_coefficients_expanded(c, c1, c2, k).unwrap();
                prop_assert!((te - t).abs() < 1e-12 && (re - r).abs() < 1e-12);
            }
        }

        #[test]
        fn inner_boundary_is_reflectionless(k_in in 0.05f64..2.0, tf in 0.01f64..0.99, k_far in 0.05f64..2.0) {
            let c = solve_c(tf, 1.0 - tf, k_far).unwrap();
            prop_assume!(2.0 * k_in >= c * c);
            let c2 = solve_c2(c, k_in).unwrap();
            if let Ok(sol) = solve_c1(c, c2, k_far, &[]) {
                let (_, r) = instantaneous_coefficients(c, sol.c1, c2, k_in).unwrap();
                prop_assert!(r <= 1e-12);
                let (_, big_b) = far_field_amplitudes(c, k_far).unwrap();
                let (_, b) = modulated_amplitudes(c, sol.c1, c2, k_far).unwrap();
                prop_assert!((b.abs() - big_b.abs()).abs() <= 1e-10);
                let (_, r_far) = instantaneous_coefficients(c, sol.c1, c2, k_far).unwrap();
                prop_assert!((r_far - big_b * big_b / k_far).abs() <= 1e-10);
            }
        }
    }

    fn constant_model(v: f64, energy: f64) -> PiecewiseModel {
        PiecewiseModel::new(vec![Segment::quadratic(v, 0.0, 0.0, 0.0, 50.0).unwrap()], energy).unwrap()
    }

    #[test]
    fn constant_potential_full_transmission() {
        let m = constant_model(0.2, 0.64);
        let k = (0.44f64).sqrt();
        let consts = BoundaryConstants::solve(FarField { transmission: 1.0, reflection: 0.0 }, k, k, 0.0, 50.0, &[]).unwrap();
        let grid = uniform_grid(0.0, 50.0, 11);
        let prof = coefficient_profile(&m, &consts, &grid).unwrap();
        for row in &prof.rows {
            assert!((row.t.unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(row.validity, 0.0);
        }
        let y = wavefunction(&m, &consts, &grid).unwrap();
        for (x, yv) in grid.iter().zip(&y) {
            let expected = Complex64::from_polar(1.0, k * x);
            assert!((yv - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn evanescent_rows_are_flagged() {
        let m = PiecewiseModel::new(vec![Segment::quadratic(0.0, 0.0, 0.0, 0.0, 10.0).unwrap(), Segment::quadratic(1.0, 0.0, 0.0, 10.0, 20.0).unwrap()], 0.64).unwrap();
        let consts = BoundaryConstants::solve(FarField { transmission: 0.5, reflection: 0.5 }, 0.8, 0.5, 0.0, 9.0, &[]).unwrap();
        let prof = coefficient_profile(&m, &consts, &[5.0, 15.0]).unwrap();
        assert!(!prof.rows[0].evanescent && prof.rows[0].t.is_some());
        assert!(prof.rows[1].evanescent && prof.rows[1].t.is_none());
        assert!(prof.to_csv().lines().nth(2).unwrap().ends_with(",1"));
    }

    #[test]
    fn squared_modulus_expansion() {
        let m = chain_eiconal(&PiecewiseModel::new(vec![Segment::exponential(0.1, 0.3, 5.0, 0.0, 30.0).unwrap()], 0.64).unwrap(), 0.0).unwrap();
        let k_in = m.local_wavenumber(0.0).unwrap().magnitude;
        let k_far = m.local_wavenumber(30.0).unwrap().magnitude;
        let consts = BoundaryConstants::solve(FarField { transmission: 0.9, reflection: 0.1 }, k_in, k_far, 0.0, 30.0, &[]).unwrap();
        let grid = uniform_grid(0.0, 30.0, 31);
        let y = wavefunction(&m, &consts, &grid).unwrap();
        for (&x, yv) in grid.iter().zip(&y) {
            let k = m.local_wavenumber(x).unwrap().magnitude;
            let (a, b) = modulated_amplitudes(consts.c, consts.c1, consts.c2, k).unwrap();
            let u = m.eiconal(x).unwrap();
            let expect = (a * a + b * b + 2.0 * a * b * (2.0 * u).cos()) / k;
            assert!((yv.norm_sqr() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn validity_examples() {
        let m = constant_model(0.0, 0.64);
        let rep = validity_report(&m, &uniform_grid(0.0, 50.0, 11)).unwrap();
        assert!(rep.metric.iter().all(|m| m.1 == 0.0));
        assert!(rep.turning_points.is_empty());

        let p = load_reference_table(TABLE_X_MIN).unwrap();
        let rep = validity_report(&p, &[309.0, 310.0]).unwrap();
        assert!(rep.metric[1].1.is_finite() && rep.metric[1].1 < 0.05, "{:?}", rep.metric);

        // bump V = 1 − (x/5)² on [−5, 5], E just below its top
        let bump = PiecewiseModel::new(vec![Segment::quadratic(1.0, 0.0, -0.04, -5.0, 5.0).unwrap()], 0.99).unwrap();
        let rep = validity_report(&bump, &uniform_grid(-5.0, 5.0, 101)).unwrap();
        assert_eq!(rep.turning_points.len(), 2);
        assert!((rep.turning_points[0].x + 0.5).abs() < 1e-9);
        assert!((rep.turning_points[1].x - 0.5).abs() < 1e-9);
    }
}
