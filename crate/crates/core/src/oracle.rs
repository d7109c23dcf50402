//! Multi-step scattering: the potential is replaced by square steps and the
//! wave function and its derivative are matched at every junction.
//!
//! The solver marches from the transmitted side back to the incident side,
//! carrying the logarithmic derivative Y = ψ′/ψ and the log-magnitude of ψ.
//! Each step is a Möbius map of Y, so thick tunnelling cells never overflow.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::format::format_g17;
use crate::iwkb::Record;
use crate::potential::Potential1d;

#[derive(Debug, Clone, PartialEq)]
pub struct StepPotential {
    edges: Vec<f64>,
    heights: Vec<f64>,
}

impl StepPotential {
    pub fn new(edges: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if heights.is_empty() {
            return Err(Error::domain("step potential needs at least one cell"));
        }
        if edges.len() != heights.len() + 1 {
            return Err(Error::domain("step potential needs N + 1 edges for N heights"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("step edges must be strictly increasing"));
        }
        Ok(Self { edges, heights })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn reversed(&self) -> Self {
        let x0 = self.edges[0];
        let xn = self.edges[self.edges.len() - 1];
        let edges = self.edges.iter().rev().map(|e| x0 + xn - e).collect();
        let heights = self.heights.iter().rev().copied().collect();
        Self { edges, heights }
    }

    fn asymptotic_k(&self, energy: f64, height: f64) -> Result<f64> {
        if !(energy > height) {
            return Err(Error::NoPropagatingMode { energy, height });
        }
        Ok((energy - height).sqrt())
    }

    pub fn k_left(&self, energy: f64) -> Result<f64> {
        self.asymptotic_k(energy, self.heights[0])
    }

    pub fn k_right(&self, energy: f64) -> Result<f64> {
        self.asymptotic_k(energy, self.heights[self.heights.len() - 1])
    }

    /// Two-column `edge height` listing, one line per cell plus the closing
    /// edge.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (e, h) in self.edges.iter().zip(&self.heights) {
            out.push_str(&format!("{} {}\n", format_g17(*e), format_g17(*h)));
        }
        let last = self.heights[self.heights.len() - 1];
        out.push_str(&format!("{} {}\n", format_g17(self.edges[self.edges.len() - 1]), format_g17(last)));
        out
    }
}

/// Far-field scattering for a wave incident from the left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringResult {
    pub reflection: f64,
    pub transmission: f64,
    /// Reflected amplitude, phase referenced to the left edge.
    pub r_amp: Complex64,
    /// Transmitted amplitude, phase referenced to the right edge.
    pub t_amp: Complex64,
}

impl ScatteringResult {
    pub fn to_record(&self) -> String {
        self.record().finish()
    }

    pub fn record(&self) -> Record {
        let mut rec = Record::new();
        rec.num("T", self.transmission)
            .num("R", self.reflection)
            .num("r_re", self.r_amp.re)
            .num("r_im", self.r_amp.im)
            .num("t_re", self.t_amp.re)
            .num("t_im", self.t_amp.im);
        rec
    }
}

/// Midpoint-sampled heights on `n` uniform cells of `[x_min, x_max]`.
pub fn discretize_to_steps<P: Potential1d + ?Sized>(potential: &P, n: usize, x_min: f64, x_max: f64) -> Result<StepPotential> {
    if n == 0 {
        return Err(Error::domain("number of steps must be at least 1"));
    }
    if !(x_min < x_max) {
        return Err(Error::domain(format!("step domain needs x_min < x_max, got [{x_min}, {x_max}]")));
    }
    let width = (x_max - x_min) / n as f64;
    let edges: Vec<f64> = (0..=n).map(|i| if i == n { x_max } else { x_min + width * i as f64 }).collect();
    let heights = edges
        .windows(2)
        .map(|w| potential.potential(0.5 * (w[0] + w[1])))
        .collect::<Result<Vec<_>>>()?;
    StepPotential::new(edges, heights)
}

pub fn transfer_matrix_scatter(steps: &StepPotential, energy: f64) -> Result<ScatteringResult> {
    let k_left = steps.k_left(energy)?;
    let k_right = steps.k_right(energy)?;
    let i = Complex64::i();

    // outgoing wave t·e^{ik(x − x_N)} on the right
    let mut y = i * k_right;
    let mut log_mag = 0.0;
    let mut phase = Complex64::new(1.0, 0.0);

    for (w, &height) in steps.edges.windows(2).zip(&steps.heights).rev() {
        let d = w[1] - w[0];
        let q2 = energy - height;
        // ψ_in/ψ_out (scaled by e^{-extra}) and the new Y at the left edge
        let (ratio, y_in, extra) = if q2 > 0.0 {
            let q = q2.sqrt();
            let (s, c) = (q * d).sin_cos();
            let ratio = c - s * y / q;
            (ratio, (q * s + c * y) / ratio, 0.0)
        } else if q2 < 0.0 {
            let kappa = (-q2).sqrt();
            let e = (-2.0 * kappa * d).exp();
            let (ch, sh) = (0.5 * (1.0 + e), 0.5 * (1.0 - e));
            let ratio = ch - sh * y / kappa;
            (ratio, (ch * y - kappa * sh) / ratio, kappa * d)
        } else {
            let ratio = 1.0 - d * y;
            (ratio, y / ratio, 0.0)
        };
        let mag = ratio.norm();
        if !(mag > 0.0) || !y_in.re.is_finite() || !y_in.im.is_finite() {
            return Err(Error::domain("transfer march hit a node of the wave function"));
        }
        log_mag += mag.ln() + extra;
        phase *= ratio / mag;
        y = y_in;
    }

    let ik = i * k_left;
    let r_amp = (ik - y) / (ik + y);
    let one_plus_r = 2.0 * ik / (ik + y);
    // ψ_left = ψ_right · Π ratios, ψ_left = 1 + r, ψ_right = t
    let t_amp = one_plus_r * phase.conj() * (-log_mag).exp();
    let transmission = k_right / k_left * one_plus_r.norm_sqr() * (-2.0 * log_mag).exp();
    Ok(ScatteringResult { reflection: r_amp.norm_sqr(), transmission, r_amp, t_amp })
}

/// Converged oracle result with the grid sizes visited.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergedScatter {
    pub result: ScatteringResult,
    pub n_used: usize,
    pub history: Vec<(usize, f64)>,
}

/// Successive T must also agree to this relative accuracy.
pub const REL_GUARD: f64 = 1e-2;

/// Largest grid the doubling loop will attempt.
pub const MAX_STEPS: usize = 1 << 20;

/// Double the number of steps from 64 until successive T agree to `tol`
/// (and to [`REL_GUARD`] relative).
/// The reported result is the coarser grid of the agreeing pair, i.e. the
/// smallest N whose T was confirmed by its refinement.
pub fn converge_scatter<P: Potential1d + ?Sized>(
    potential: &P,
    energy: f64,
    x_min: f64,
    x_max: f64,
    tol: f64,
) -> Result<ConvergedScatter> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("convergence tolerance must be positive, got {tol}")));
    }
    let mut n = 64;
    let mut history = Vec::new();
    let mut prev: Option<ScatteringResult> = None;
    while n <= MAX_STEPS {
        let steps = discretize_to_steps(potential, n, x_min, x_max)?;
        let res = transfer_matrix_scatter(&steps, energy)?;
        history.push((n, res.transmission));
        if let Some(p) = prev {
            let dt = (res.transmission - p.transmission).abs();
            // the relative guard keeps an absolute tol from accepting
            // tunnelling values far below it
            if dt <= tol && dt <= REL_GUARD * res.transmission.max(p.transmission) {
                return Ok(ConvergedScatter { result: p, n_used: n / 2, history });
            }
        }
        prev = Some(res);
        n *= 2;
    }
    Err(Error::Convergence {
        reason: format!("|dT| > {tol} at N = {MAX_STEPS}"),
        sequence: history.into_iter().map(|h| h.1).collect(),
    })
}
