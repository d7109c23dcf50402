//! Plain (global) WKB estimates of the far-field coefficients, used as an
//! alternative source of (T, R) for the instantaneous constants.
//!
//! * With classically forbidden stretches: Kemble's barrier formula
//!   `T = 1 / (1 + exp(2Θ))`, Θ = Σ ∫ √(V − E) dx over the forbidden parts.
//! * Above the barrier: leading-order reflection of the WKB (Bremmer)
//!   series, `r = −½ ∫ (ln k)′ e^{2iu} dx`, with value jumps at knots
//!   contributing `−½ Δln k · e^{2iu}`.

use crate::error::{Error, Result};
use crate::numerics::integrate;
use crate::piecewise::{chain_eiconal, chain_real_phase, PiecewiseModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WkbMethod {
    /// Barrier penetration with the total forbidden action Θ.
    Tunneling { theta: f64 },
    /// No turning points; first-order above-barrier reflection.
    AboveBarrier,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WkbEstimate {
    pub transmission: f64,
    pub reflection: f64,
    pub method: WkbMethod,
}

pub fn wkb_far_field(model: &PiecewiseModel) -> Result<WkbEstimate> {
    if model.forbidden_segments().is_empty() {
        above_barrier(model)
    } else {
        tunneling(model)
    }
}

fn tunneling(model: &PiecewiseModel) -> Result<WkbEstimate> {
    let chained = chain_real_phase(model, model.domain().0)?;
    let energy = model.energy();
    let mut theta = 0.0;
    for piece in chained.phase_pieces().iter().filter(|p| !p.allowed) {
        let seg = model.segments()[piece.segment];
        theta += integrate(|x| (seg.value(x) - energy).max(0.0).sqrt(), piece.x_lo, piece.x_hi, 1e-12)?;
    }
    // 1/(1 + e^{2Θ}) written to stay finite for large Θ
    let transmission = if theta > 0.0 {
        let e = (-2.0 * theta).exp();
        e / (1.0 + e)
    } else {
        0.5
    };
    Ok(WkbEstimate { transmission, reflection: 1.0 - transmission, method: WkbMethod::Tunneling { theta } })
}

fn above_barrier(model: &PiecewiseModel) -> Result<WkbEstimate> {
    let chained = chain_eiconal(model, model.domain().0)?;
    let energy = model.energy();
    let (mut re, mut im) = (0.0, 0.0);
    for seg in model.segments() {
        // (ln k)′ = −V′/(2k²)
        let dlnk = |x: f64| -seg.slope(x) / (2.0 * (energy - seg.value(x)));
        let phase = |x: f64| 2.0 * chained.eiconal(x.clamp(seg.x_lo, seg.x_hi)).unwrap_or(0.0);
        // the eiconal lookup assigns knots to the right segment; integrate
        // over the open interior only
        let (lo, hi) = (seg.x_lo, seg.x_hi);
        re += integrate(|x| dlnk(x) * phase(x).cos(), lo, hi, 1e-13)?;
        im += integrate(|x| dlnk(x) * phase(x).sin(), lo, hi, 1e-13)?;
    }
    for w in model.segments().windows(2) {
        let x = w[1].x_lo;
        let k_left = (energy - w[0].value(x)).sqrt();
        let k_right = (energy - w[1].value(x)).sqrt();
        let jump = (k_right / k_left).ln();
        let u = chained.eiconal(x)?;
        re += jump * (2.0 * u).cos();
        im += jump * (2.0 * u).sin();
    }
    let reflection = 0.25 * (re * re + im * im);
    if !(reflection < 1.0) {
        return Err(Error::domain(format!(
            "first-order WKB reflection {reflection} is not small; the potential varies too fast"
        )));
    }
    Ok(WkbEstimate { transmission: 1.0 - reflection, reflection, method: WkbMethod::AboveBarrier })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::transfer_matrix_scatter;
    use crate::oracle::StepPotential;
    use crate::piecewise::Segment;

    #[test]
    fn flat_potential_has_no_reflection() {
        let m = PiecewiseModel::new(vec![Segment::quadratic(0.1, 0.0, 0.0, 0.0, 10.0).unwrap()], 0.64).unwrap();
        let est = wkb_far_field(&m).unwrap();
        assert_eq!(est.reflection, 0.0);
        assert_eq!(est.method, WkbMethod::AboveBarrier);
    }

    #[test]
    fn small_step_matches_fresnel() {
        // a weak step: exact R = ((k1 − k2)/(k1 + k2))², first order gives ¼(Δln k)²
        let m = PiecewiseModel::new(
            vec![Segment::quadratic(0.0, 0.0, 0.0, 0.0, 5.0).unwrap(), Segment::quadratic(0.01, 0.0, 0.0, 5.0, 10.0).unwrap()],
            0.64,
        )
        .unwrap();
        let est = wkb_far_field(&m).unwrap();
        let s = StepPotential::new(vec![0.0, 5.0, 10.0], vec![0.0, 0.01]).unwrap();
        let exact = transfer_matrix_scatter(&s, 0.64).unwrap().reflection;
        assert!(((est.reflection - exact) / exact).abs() < 1e-3, "{} vs {}", est.reflection, exact);
    }

    #[test]
    fn opaque_barrier_uses_kemble() {
        let m = PiecewiseModel::new(
            vec![
                Segment::quadratic(0.0, 0.0, 0.0, 0.0, 5.0).unwrap(),
                Segment::quadratic(1.0, 0.0, 0.0, 5.0, 7.0).unwrap(),
                Segment::quadratic(0.0, 0.0, 0.0, 7.0, 12.0).unwrap(),
            ],
            0.5,
        )
        .unwrap();
        let est = wkb_far_field(&m).unwrap();
        match est.method {
            WkbMethod::Tunneling { theta } => assert!((theta - 2.0 * 0.5f64.sqrt()).abs() < 1e-10),
            _ => panic!("expected tunneling"),
        }
        assert!((est.transmission + est.reflection - 1.0).abs() < 1e-15);
    }
}
