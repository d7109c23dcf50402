//! Piecewise-integrable replacement of a potential and the closed-form
//! eiconal u(x) = ∫ k dx chained across segment boundaries.
//!
//! Two segment families are supported:
//!
//! * quadratic, `V = a + b·x + c·x²`
//! * exponential, `V = a + b·exp(−x/c)`
//!
//! Both have elementary antiderivatives of `k = √(E − V)`. For the
//! quadratic family the commonly quoted form
//! `−2c·k − c√(E−a)·log|(k − √(E−a))/(k + √(E−a))|` does not differentiate
//! back to `k`; [`eiconal_closed_form`] uses the standard antiderivative of
//! `√(α + βx + γx²)` instead.

mod fit;

pub use fit::{fit_piecewise, FitOptions, FitReport, Knots};

use crate::error::{Error, Result};
use crate::format::format_g17;
use crate::numerics::integrate;
use crate::potential::{eval_potential, Potential1d, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentForm {
    Quadratic,
    Exponential,
}

impl SegmentForm {
    pub fn name(self) -> &'static str {
        match self {
            SegmentForm::Quadratic => "quadratic",
            SegmentForm::Exponential => "exponential",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quadratic" => Some(SegmentForm::Quadratic),
            "exponential" => Some(SegmentForm::Exponential),
            _ => None,
        }
    }
}

/// One integrable piece of the potential on `[x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub form: SegmentForm,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Segment {
    pub fn new(form: SegmentForm, a: f64, b: f64, c: f64, x_lo: f64, x_hi: f64) -> Result<Self> {
        if !(x_lo < x_hi) {
            return Err(Error::domain(format!("segment needs x_lo < x_hi, got [{x_lo}, {x_hi}]")));
        }
        if form == SegmentForm::Exponential && c == 0.0 {
            return Err(Error::domain("exponential segment needs c != 0"));
        }
        Ok(Self { form, a, b, c, x_lo, x_hi })
    }

    pub fn quadratic(a: f64, b: f64, c: f64, x_lo: f64, x_hi: f64) -> Result<Self> {
        Self::new(SegmentForm::Quadratic, a, b, c, x_lo, x_hi)
    }

    pub fn exponential(a: f64, b: f64, c: f64, x_lo: f64, x_hi: f64) -> Result<Self> {
        Self::new(SegmentForm::Exponential, a, b, c, x_lo, x_hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi
    }

    /// V(x) without the interval check.
    pub fn value(&self, x: f64) -> f64 {
        match self.form {
            SegmentForm::Quadratic => self.a + x * (self.b + self.c * x),
            SegmentForm::Exponential => self.a + self.b * (-x / self.c).exp(),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match self.form {
            SegmentForm::Quadratic => self.b + 2.0 * self.c * x,
            SegmentForm::Exponential => -self.b / self.c * (-x / self.c).exp(),
        }
    }

    /// Roots of E = V(x) strictly inside the segment, ascending.
    pub fn turning_points(&self, energy: f64) -> Vec<f64> {
        let mut roots = Vec::new();
        match self.form {
            SegmentForm::Exponential => {
                let ratio = (energy - self.a) / self.b;
                if self.b != 0.0 && ratio > 0.0 {
                    roots.push(-self.c * ratio.ln());
                }
            }
            SegmentForm::Quadratic => {
                let (qa, qb, qc) = (self.c, self.b, self.a - energy);
                if qa == 0.0 {
                    if qb != 0.0 {
                        roots.push(-qc / qb);
                    }
                } else {
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc >= 0.0 {
                        let q = -0.5 * (qb + disc.sqrt().copysign(qb));
                        if q != 0.0 {
                            roots.push(q / qa);
                            roots.push(qc / q);
                        } else {
                            roots.push(0.0);
                        }
                    }
                }
            }
        }
        roots.retain(|&x| x > self.x_lo && x < self.x_hi);
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        roots
    }
}

/// V_l(x) with the interval check.
pub fn eval_segment(seg: &Segment, x: f64) -> Result<f64> {
    if !seg.contains(x) {
        return Err(Error::domain(format!(
            "x = {x} outside segment [{}, {}]",
            seg.x_lo, seg.x_hi
        )));
    }
    Ok(seg.value(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveRegime {
    Propagating,
    TurningPoint,
    Evanescent,
}

/// k(x) = √|E − V| together with which side of E the potential sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalWavenumber {
    pub magnitude: f64,
    pub regime: WaveRegime,
}

impl LocalWavenumber {
    pub fn from_energy(energy: f64, v: f64) -> Self {
        let k2 = energy - v;
        let regime = if k2.abs() <= 4.0 * f64::EPSILON * energy.abs().max(v.abs()) {
            WaveRegime::TurningPoint
        } else if k2 > 0.0 {
            WaveRegime::Propagating
        } else {
            WaveRegime::Evanescent
        };
        let magnitude = if regime == WaveRegime::TurningPoint { 0.0 } else { k2.abs().sqrt() };
        Self { magnitude, regime }
    }

    pub fn is_propagating(&self) -> bool {
        self.regime == WaveRegime::Propagating
    }
}

/// Antiderivative of `k = √(E − V)` for one segment. Finite at turning
/// points; callers must ensure `E ≥ V(x)`.
fn antiderivative(seg: &Segment, energy: f64, x: f64) -> f64 {
    match seg.form {
        SegmentForm::Exponential => exponential_antiderivative(seg, energy, x),
        SegmentForm::Quadratic => quadratic_antiderivative(seg, energy, x),
    }
}

fn exponential_antiderivative(seg: &Segment, energy: f64, x: f64) -> f64 {
    let c = seg.c;
    let k_inf_sq = energy - seg.a;
    let tail = seg.b * (-x / c).exp();
    let k = (k_inf_sq - tail).max(0.0).sqrt();
    if seg.b == 0.0 {
        return k * x;
    }
    if k_inf_sq > 0.0 {
        // u = −2ck + cK·log|(K + k)/(K − k)|, K = √(E − a); K − k is
        // rewritten as b·e^(−x/c)/(K + k) to avoid cancellation.
        let kk = k_inf_sq.sqrt();
        -2.0 * c * k + c * kk * (2.0 * (kk + k).ln() - seg.b.abs().ln() + x / c)
    } else if k_inf_sq < 0.0 {
        let q = (-k_inf_sq).sqrt();
        -2.0 * c * k + 2.0 * c * q * (k / q).atan()
    } else {
        -2.0 * c * k
    }
}

fn quadratic_antiderivative(seg: &Segment, energy: f64, x: f64) -> f64 {
    // k² = α + βx + γx²
    let alpha = energy - seg.a;
    let beta = -seg.b;
    let gamma = -seg.c;
    let w = seg.x_lo.abs().max(seg.x_hi.abs()).max(1.0);
    let r = (alpha + x * (beta + gamma * x)).max(0.0);
    let sr = r.sqrt();

    if gamma.abs() * w * w <= 1e-12 * (alpha.abs() + beta.abs() * w) {
        if beta.abs() * w <= 1e-14 * alpha.abs() {
            return alpha.max(0.0).sqrt() * x;
        }
        return 2.0 / (3.0 * beta) * r * sr;
    }

    let lin = 2.0 * gamma * x + beta;
    let disc = 4.0 * alpha * gamma - beta * beta;
    let inv_sqrt = if gamma > 0.0 {
        // ∫dx/√R = ln|2√(γR) + 2γx + β| / √γ
        let sg = gamma.sqrt();
        let s = 2.0 * sg * sr;
        let arg = if lin >= 0.0 {
            s + lin
        } else {
            // (s + lin)(s − lin) = 4γR − lin² = disc
            disc / (s - lin)
        };
        arg.abs().ln() / sg
    } else {
        let sg = (-gamma).sqrt();
        let root = (-disc).sqrt();
        -(lin / root).clamp(-1.0, 1.0).asin() / sg
    };
    lin * sr / (4.0 * gamma) + disc / (8.0 * gamma) * inv_sqrt
}

/// Closed-form eiconal of a single segment at `x` (up to a constant).
pub fn eiconal_closed_form(seg: &Segment, energy: f64, x: f64) -> Result<f64> {
    let v = eval_segment(seg, x)?;
    let k = LocalWavenumber::from_energy(energy, v);
    if !k.is_propagating() {
        return Err(Error::TurningPoint { x });
    }
    Ok(antiderivative(seg, energy, x))
}

/// Adaptive quadrature of k over `[x_lo, x_hi]`, absolute tolerance 1e-10.
pub fn eiconal_quadrature<P: Potential1d + ?Sized>(
    potential: &P,
    energy: f64,
    x_lo: f64,
    x_hi: f64,
) -> Result<f64> {
    const PROBES: usize = 256;
    let (lo, hi) = if x_lo <= x_hi { (x_lo, x_hi) } else { (x_hi, x_lo) };
    let mut prev = lo;
    let mut prev_ok = energy - potential.potential(lo)? > 0.0;
    if !prev_ok {
        return Err(Error::TurningPoint { x: lo });
    }
    for i in 1..=PROBES {
        let x = lo + (hi - lo) * i as f64 / PROBES as f64;
        let ok = energy - potential.potential(x)? > 0.0;
        if ok != prev_ok || !ok {
            return Err(Error::TurningPointBracket { lo: prev, hi: x });
        }
        prev = x;
        prev_ok = ok;
    }
    let failure = std::cell::RefCell::new(None);
    let v = integrate(
        |x| match potential.potential(x) {
            Ok(v) => (energy - v).max(0.0).sqrt(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        1e-10,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let v = v?;
    Ok(if x_lo <= x_hi { v } else { -v })
}

/// Contiguous stretch of the domain with a single phase offset: either a
/// classically allowed part of a segment, or a forbidden part where the
/// real phase stays constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePiece {
    pub segment: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub allowed: bool,
    pub offset: f64,
}

/// Value mismatch of adjacent segments at a knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotReport {
    pub x: f64,
    pub value_jump: f64,
    pub slope_jump: f64,
}

/// Ordered contiguous segments with the total energy E and, once chained,
/// the eiconal integration constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseModel {
    segments: Vec<Segment>,
    energy: f64,
    x_ref: Option<f64>,
    phase: Vec<PhasePiece>,
}

impl PiecewiseModel {
    pub fn new(segments: Vec<Segment>, energy: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::domain("piecewise model needs at least one segment"));
        }
        for (i, w) in segments.windows(2).enumerate() {
            let scale = w[0].x_hi.abs().max(1.0);
            if (w[0].x_hi - w[1].x_lo).abs() > 1e-12 * scale {
                return Err(Error::domain(format!(
                    "segments {i} and {} are not contiguous ({} vs {})",
                    i + 1,
                    w[0].x_hi,
                    w[1].x_lo
                )));
            }
        }
        if !energy.is_finite() {
            return Err(Error::domain("energy must be finite"));
        }
        Ok(Self { segments, energy, x_ref: None, phase: Vec::new() })
    }

    /// A single segment reproducing an analytic potential on `[x_lo, x_hi]`.
    pub fn from_spec(spec: &PotentialSpec, energy: f64, x_lo: f64, x_hi: f64) -> Result<Self> {
        let segs = match *spec {
            PotentialSpec::Constant { v0 } => vec![Segment::quadratic(v0, 0.0, 0.0, x_lo, x_hi)?],
            PotentialSpec::Quadratic { a, b, c } => vec![Segment::quadratic(a, b, c, x_lo, x_hi)?],
            PotentialSpec::Exponential { a, b, c } => vec![Segment::exponential(a, b, c, x_lo, x_hi)?],
            PotentialSpec::Rectangular { x_lo: b_lo, x_hi: b_hi, .. } => {
                let mut edges = vec![x_lo];
                edges.extend([b_lo, b_hi].into_iter().filter(|&e| e > x_lo && e < x_hi));
                edges.push(x_hi);
                edges
                    .windows(2)
                    .map(|w| {
                        let mid = 0.5 * (w[0] + w[1]);
                        Segment::quadratic(eval_potential(spec, mid)?, 0.0, 0.0, w[0], w[1])
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            PotentialSpec::KerrDirac { .. } | PotentialSpec::Tabulated(_) => {
                return Err(Error::domain(
                    "potential has no integrable closed form; fit a piecewise model first",
                ))
            }
        };
        Self::new(segs, energy)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn with_energy(&self, energy: f64) -> Self {
        Self { segments: self.segments.clone(), energy, x_ref: None, phase: Vec::new() }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.segments[0].x_lo, self.segments[self.segments.len() - 1].x_hi)
    }

    pub fn x_ref(&self) -> Option<f64> {
        self.x_ref
    }

    pub fn is_chained(&self) -> bool {
        !self.phase.is_empty()
    }

    pub fn phase_pieces(&self) -> &[PhasePiece] {
        &self.phase
    }

    /// Per-piece eiconal integration constants (one per segment when the
    /// model is classically allowed throughout).
    pub fn u_offsets(&self) -> Vec<f64> {
        self.phase.iter().map(|p| p.offset).collect()
    }

    /// Segment index owning `x`; a knot belongs to the segment on its right.
    pub fn segment_index(&self, x: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::domain(format!("x = {x} outside model domain [{lo}, {hi}]")));
        }
        let i = self.segments.partition_point(|s| s.x_hi <= x);
        Ok(i.min(self.segments.len() - 1))
    }

    pub fn segment_at(&self, x: f64) -> Result<&Segment> {
        Ok(&self.segments[self.segment_index(x)?])
    }

    pub fn local_wavenumber(&self, x: f64) -> Result<LocalWavenumber> {
        local_wavenumber(self, x)
    }

    /// Analytic dk/dx; infinite at turning points.
    pub fn wavenumber_slope(&self, x: f64) -> Result<f64> {
        let seg = self.segment_at(x)?;
        let k = LocalWavenumber::from_energy(self.energy, seg.value(x));
        if k.magnitude == 0.0 {
            return Ok(f64::INFINITY);
        }
        // k² = ±(E − V) ⇒ k' = ∓V'/(2k)
        let sign = if k.regime == WaveRegime::Evanescent { 1.0 } else { -1.0 };
        Ok(sign * seg.slope(x) / (2.0 * k.magnitude))
    }

    /// Chained eiconal at `x`. The model must have been chained.
    pub fn eiconal(&self, x: f64) -> Result<f64> {
        if self.phase.is_empty() {
            return Err(Error::domain("eiconal requested from an unchained model"));
        }
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::domain(format!("x = {x} outside model domain [{lo}, {hi}]")));
        }
        let i = self.phase.partition_point(|p| p.x_hi <= x).min(self.phase.len() - 1);
        let piece = &self.phase[i];
        if piece.allowed {
            let seg = &self.segments[piece.segment];
            Ok(piece.offset + antiderivative(seg, self.energy, x))
        } else {
            Ok(piece.offset)
        }
    }

    /// Value and slope mismatches at every interior knot.
    pub fn knot_reports(&self) -> Vec<KnotReport> {
        self.segments
            .windows(2)
            .map(|w| {
                let x = w[1].x_lo;
                KnotReport {
                    x,
                    value_jump: w[1].value(x) - w[0].value(x),
                    slope_jump: w[1].slope(x) - w[0].slope(x),
                }
            })
            .collect()
    }

    /// Indices of segments where V ≥ E somewhere.
    pub fn forbidden_segments(&self) -> Vec<usize> {
        self.segments
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                let mut probes = vec![s.x_lo, s.x_hi];
                if s.form == SegmentForm::Quadratic && s.c != 0.0 {
                    let vertex = -s.b / (2.0 * s.c);
                    if s.contains(vertex) {
                        probes.push(vertex);
                    }
                }
                probes.iter().any(|&x| !LocalWavenumber::from_energy(self.energy, s.value(x)).is_propagating())
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Write the plain-text model format.
    pub fn to_text(&self) -> String {
        let x_ref = self.x_ref.unwrap_or(self.domain().0);
        let mut out = format!("E {} x_ref {}\n", format_g17(self.energy), format_g17(x_ref));
        for s in &self.segments {
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                s.form.name(),
                format_g17(s.a),
                format_g17(s.b),
                format_g17(s.c),
                format_g17(s.x_lo),
                format_g17(s.x_hi)
            ));
        }
        out
    }

    /// Parse the text format; the model comes back unchained, with its
    /// stored reference point available through [`Self::x_ref`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| Error::config(None, "empty model file"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "E" || toks[2] != "x_ref" {
            return Err(Error::config(Some(hline), "expected header `E <energy> x_ref <x>`"));
        }
        let num = |s: &str, line: usize| {
            s.parse::<f64>()
                .map_err(|_| Error::config(Some(line), format!("invalid number `{s}`")))
        };
        let energy = num(toks[1], hline)?;
        let x_ref = num(toks[3], hline)?;
        let mut segments = Vec::new();
        for (line, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 6 {
                return Err(Error::config(Some(line), "expected `form a b c x_lo x_hi`"));
            }
            let form = SegmentForm::parse(t[0])
                .ok_or_else(|| Error::config(Some(line), format!("unknown segment form `{}`", t[0])))?;
            segments.push(Segment::new(
                form,
                num(t[1], line)?,
                num(t[2], line)?,
                num(t[3], line)?,
                num(t[4], line)?,
                num(t[5], line)?,
            )?);
        }
        let mut model = Self::new(segments, energy)?;
        model.x_ref = Some(x_ref);
        Ok(model)
    }
}

impl Potential1d for PiecewiseModel {
    fn potential(&self, x: f64) -> Result<f64> {
        Ok(self.segment_at(x)?.value(x))
    }
}

pub fn local_wavenumber(model: &PiecewiseModel, x: f64) -> Result<LocalWavenumber> {
    let v = model.potential(x)?;
    Ok(LocalWavenumber::from_energy(model.energy, v))
}

/// Fix the eiconal constants so that u(x_ref) = 0 and u is continuous at
/// every knot. Fails if any segment is classically forbidden anywhere.
pub fn chain_eiconal(model: &PiecewiseModel, x_ref: f64) -> Result<PiecewiseModel> {
    let forbidden = model.forbidden_segments();
    if !forbidden.is_empty() {
        return Err(Error::ForbiddenRegion { segments: forbidden });
    }
    chain_pieces(model, x_ref)
}

/// Like [`chain_eiconal`] but tolerates forbidden stretches, across which
/// the real phase ∫Re k dx is held constant.
pub fn chain_real_phase(model: &PiecewiseModel, x_ref: f64) -> Result<PiecewiseModel> {
    chain_pieces(model, x_ref)
}

fn chain_pieces(model: &PiecewiseModel, x_ref: f64) -> Result<PiecewiseModel> {
    model.segment_index(x_ref)?;
    let energy = model.energy;
    let mut pieces = Vec::new();
    for (si, seg) in model.segments.iter().enumerate() {
        let mut cuts = vec![seg.x_lo];
        cuts.extend(seg.turning_points(energy));
        cuts.push(seg.x_hi);
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let allowed = energy - seg.value(mid) > 0.0;
            pieces.push(PhasePiece { segment: si, x_lo: w[0], x_hi: w[1], allowed, offset: 0.0 });
        }
    }

    let raw = |p: &PhasePiece, x: f64| {
        if p.allowed {
            antiderivative(&model.segments[p.segment], energy, x)
        } else {
            0.0
        }
    };
    let mut offset = 0.0;
    for i in 0..pieces.len() {
        if i > 0 {
            let prev = pieces[i - 1];
            let x = pieces[i].x_lo;
            offset = prev.offset + raw(&prev, x) - raw(&pieces[i], x);
        }
        pieces[i].offset = offset;
    }

    let mut chained = PiecewiseModel {
        segments: model.segments.clone(),
        energy,
        x_ref: Some(x_ref),
        phase: pieces,
    };
    let shift = chained.eiconal(x_ref)?;
    for p in &mut chained.phase {
        p.offset -= shift;
    }
    Ok(chained)
}

/// The five exponential segments fitted to the Kerr–Dirac potential for the
/// reference parameter set, with E = σ² = 0.64. The first segment extends to
/// −∞ and is truncated at `x_min`.
pub fn load_reference_table(x_min: f64) -> Result<PiecewiseModel> {
    const ROWS: [(f64, f64, f64, f64); 5] = [
        (0.0, -0.187354, -3.75, 0.0),
        (0.603, 0.415646, 8.79, 30.0),
        (0.629, 0.126_900_38, 26.3, 109.0),
        (0.635_430_98, 0.037_193_439, 73.5, 208.0),
        (0.635_430_98, 0.222_892_5, 45.0, 310.0),
    ];
    if !(x_min < 0.0) {
        return Err(Error::domain("x_min must lie below the first knot at x = 0"));
    }
    let mut lo = x_min;
    let mut segs = Vec::with_capacity(ROWS.len());
    for (a, b, c, hi) in ROWS {
        segs.push(Segment::exponential(a, b, c, lo, hi)?);
        lo = hi;
    }
    PiecewiseModel::new(segs, 0.64)
}

/// Default truncation of the −∞ end of the reference table.
pub const TABLE_X_MIN: f64 = -50.0;

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> PiecewiseModel {
        load_reference_table(TABLE_X_MIN).unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn segment_evaluation() {
        let q = Segment::quadratic(1.0, 0.0, 0.0, 0.0, 10.0).unwrap();
        assert_eq!(eval_segment(&q, 7.0).unwrap(), 1.0);
        assert!(eval_segment(&q, 11.0).is_err());
        let e = Segment::exponential(0.0, -0.187354, -3.75, -50.0, 0.0).unwrap();
        assert_eq!(eval_segment(&e, 0.0).unwrap(), -0.187354);
        let e5 = Segment::exponential(0.635_430_98, 0.222_892_5, 45.0, 208.0, 310.0).unwrap();
        assert!((eval_segment(&e5, 310.0).unwrap() - 0.635_658_1).abs() < 5e-8);
        assert!(Segment::exponential(0.0, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(Segment::quadratic(0.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn wavenumber_regimes() {
        let m = PiecewiseModel::new(vec![Segment::quadratic(0.0, 0.0, 0.0, 0.0, 1.0).unwrap()], 0.64).unwrap();
        let k = local_wavenumber(&m, 0.5).unwrap();
        assert!((k.magnitude - 0.8).abs() < 1e-15);
        assert_eq!(k.regime, WaveRegime::Propagating);

        let m = PiecewiseModel::new(vec![Segment::quadratic(0.64, 0.0, 0.0, 0.0, 1.0).unwrap()], 0.64).unwrap();
        let k = local_wavenumber(&m, 0.5).unwrap();
        assert_eq!(k.magnitude, 0.0);
        assert_eq!(k.regime, WaveRegime::TurningPoint);

        let k = local_wavenumber(&table(), 310.0).unwrap();
        assert!((k.magnitude - 0.0659).abs() < 1e-4);

        let k = local_wavenumber(&table(), 5.0).unwrap();
        assert_eq!(k.regime, WaveRegime::Evanescent);
    }

    #[test]
    fn constant_segment_eiconal_is_linear() {
        let q = Segment::quadratic(0.0, 0.0, 0.0, 0.0, 10.0).unwrap();
        let e = Segment::exponential(0.0, 0.0, 5.0, 0.0, 10.0).unwrap();
        for seg in [q, e] {
            let du = eiconal_closed_form(&seg, 0.64, 9.0).unwrap() - eiconal_closed_form(&seg, 0.64, 2.0).unwrap();
            assert!((du - 0.8 * 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_eiconal_derivative() {
        let seg = Segment::exponential(0.603, 0.415646, 8.79, 0.0, 30.0).unwrap();
        let x = 25.0;
        let h = 1e-4;
        let fd = (eiconal_closed_form(&seg, 0.64, x + h).unwrap() - eiconal_closed_form(&seg, 0.64, x - h).unwrap())
            / (2.0 * h);
        let k = (0.64 - seg.value(x)).sqrt();
        assert!(rel_close(fd, k, 1e-6), "{fd} vs {k}");
    }

    #[test]
    fn exponential_eiconal_all_asymptotic_signs() {
        // E − a > 0, = 0 and < 0 (the latter two need b < 0)
        for (a, b) in [(0.3, -0.2), (0.64, -0.3), (0.9, -2.0)] {
            let seg = Segment::exponential(a, b, 2.0, 0.0, 3.0).unwrap();
            let q = eiconal_quadrature(&seg_potential(seg), 0.64, 0.5, 2.5).unwrap();
            let c = eiconal_closed_form(&seg, 0.64, 2.5).unwrap() - eiconal_closed_form(&seg, 0.64, 0.5).unwrap();
            assert!((q - c).abs() < 1e-9, "a={a}: {q} vs {c}");
        }
    }

    fn seg_potential(seg: Segment) -> PiecewiseModel {
        PiecewiseModel::new(vec![seg], 0.64).unwrap()
    }

    #[test]
    fn quadratic_eiconal_matches_quadrature() {
        let seg = Segment::quadratic(0.5, 0.01, -0.0001, 0.0, 10.0).unwrap();
        let closed = eiconal_closed_form(&seg, 0.64, 10.0).unwrap() - eiconal_closed_form(&seg, 0.64, 0.0).unwrap();
        let quad = eiconal_quadrature(&seg_potential(seg), 0.64, 0.0, 10.0).unwrap();
        assert!((closed - quad).abs() < 1e-9, "{closed} vs {quad}");
        // concave-down k² (arcsine branch)
        let seg = Segment::quadratic(0.1, -0.02, 0.003, -5.0, 5.0).unwrap();
        let closed = eiconal_closed_form(&seg, 0.64, 4.0).unwrap() - eiconal_closed_form(&seg, 0.64, -4.0).unwrap();
        let quad = eiconal_quadrature(&seg_potential(seg), 0.64, -4.0, 4.0).unwrap();
        assert!((closed - quad).abs() < 1e-9, "{closed} vs {quad}");
        // linear
        let seg = Segment::quadratic(0.1, 0.02, 0.0, 0.0, 10.0).unwrap();
        let closed = eiconal_closed_form(&seg, 0.64, 10.0).unwrap() - eiconal_closed_form(&seg, 0.64, 0.0).unwrap();
        let quad = eiconal_quadrature(&seg_potential(seg), 0.64, 0.0, 10.0).unwrap();
        assert!((closed - quad).abs() < 1e-9);
    }

    #[test]
    fn eiconal_errors_at_turning_point() {
        let seg = Segment::exponential(0.603, 0.415646, 8.79, 0.0, 30.0).unwrap();
        assert!(matches!(eiconal_closed_form(&seg, 0.64, 5.0), Err(Error::TurningPoint { .. })));
        let m = seg_potential(seg);
        assert!(matches!(eiconal_quadrature(&m, 0.64, 10.0, 25.0), Err(Error::TurningPoint { .. })));
        let ramp = seg_potential(Segment::quadratic(0.0, 0.1, 0.0, 0.0, 10.0).unwrap());
        assert!(matches!(
            eiconal_quadrature(&ramp, 0.64, 0.0, 10.0),
            Err(Error::TurningPointBracket { lo, hi }) if lo <= 6.4 && hi >= 6.4
        ));
    }

    #[test]
    fn quadrature_of_free_space() {
        let spec = PotentialSpec::Constant { v0: 0.0 };
        let u = eiconal_quadrature(&spec, 0.64, 0.0, 10.0).unwrap();
        assert!((u - 8.0).abs() < 1e-12);
    }

    #[test]
    fn chain_single_segment() {
        let m = PiecewiseModel::new(vec![Segment::quadratic(0.0, 0.0, 0.0, -3.0, 7.0).unwrap()], 0.64).unwrap();
        let c = chain_eiconal(&m, -3.0).unwrap();
        for x in [-3.0, 0.0, 2.5, 7.0] {
            assert!((c.eiconal(x).unwrap() - 0.8 * (x + 3.0)).abs() < 1e-12);
        }
        assert!(m.eiconal(0.0).is_err());
    }

    #[test]
    fn chain_is_refinement_invariant() {
        let whole = PiecewiseModel::new(vec![Segment::exponential(0.2, 0.3, 4.0, 0.0, 20.0).unwrap()], 0.64).unwrap();
        let split = PiecewiseModel::new(
            vec![
                Segment::exponential(0.2, 0.3, 4.0, 0.0, 7.3).unwrap(),
                Segment::exponential(0.2, 0.3, 4.0, 7.3, 20.0).unwrap(),
            ],
            0.64,
        )
        .unwrap();
        let a = chain_eiconal(&whole, 0.0).unwrap();
        let b = chain_eiconal(&split, 0.0).unwrap();
        for i in 0..=200 {
            let x = 0.1 * i as f64;
            assert!((a.eiconal(x).unwrap() - b.eiconal(x).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn chain_rejects_forbidden_regions() {
        match chain_eiconal(&table(), TABLE_X_MIN) {
            Err(Error::ForbiddenRegion { segments }) => assert_eq!(segments, vec![1, 2, 3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn real_phase_chain_on_reference_table_is_continuous() {
        let c = chain_real_phase(&table(), TABLE_X_MIN).unwrap();
        assert_eq!(c.eiconal(TABLE_X_MIN).unwrap(), 0.0);
        for knot in [0.0, 30.0, 109.0, 208.0] {
            let eps = 1e-9;
            let left = c.eiconal(knot - eps).unwrap();
            let right = c.eiconal(knot).unwrap();
            assert!((right - left).abs() < 1e-8, "knot {knot}: {left} vs {right}");
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=720 {
            let x = TABLE_X_MIN + 0.5 * i as f64;
            let u = c.eiconal(x).unwrap();
            assert!(u >= prev - 1e-12);
            prev = u;
        }
    }

    #[test]
    fn reference_table_loads_verbatim() {
        let m = table();
        assert_eq!(m.segments().len(), 5);
        assert_eq!(m.energy(), 0.64);
        assert_eq!(m.segments()[0].value(0.0), -0.187354);
        assert!((m.segments()[1].value(0.0) - 1.018646).abs() < 1e-15);
        let jumps = m.knot_reports();
        assert!((jumps[0].value_jump - 1.206).abs() < 1e-3);
        assert!((m.potential(310.0).unwrap() - 0.635_658_1).abs() < 5e-8);
        let v = m.potential(-50.0).unwrap();
        assert!(v < 0.0 && v > -4e-7);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let m = chain_real_phase(&table(), -50.0).unwrap();
        let text = m.to_text();
        let back = PiecewiseModel::from_text(&text).unwrap();
        assert_eq!(back.segments(), m.segments());
        assert_eq!(back.energy(), m.energy());
        assert_eq!(back.x_ref(), Some(-50.0));
        assert_eq!(back.to_text(), text);
        assert!(PiecewiseModel::from_text("E 1 x_ref 0\ncubic 1 2 3 0 1\n").is_err());
    }

    #[test]
    fn slope_is_analytic() {
        let m = table();
        for &x in &[-20.0, 25.0, 80.0, 250.0] {
            let k = m.local_wavenumber(x).unwrap();
            if !k.is_propagating() {
                continue;
            }
            let h = 1e-5;
            let fd = (m.local_wavenumber(x + h).unwrap().magnitude - m.local_wavenumber(x - h).unwrap().magnitude) / (2.0 * h);
            let an = m.wavenumber_slope(x).unwrap();
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-6), "{x}: {fd} vs {an}");
        }
    }
}
