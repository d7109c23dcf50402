//! Potentials consumed by the solvers: simple analytic forms, tabulated
//! samples and the effective potential of the radial Dirac equation in Kerr
//! geometry.

use crate::error::{Error, Result};
use crate::numerics::{brent, Pchip};

/// Anything that can report a potential value at a coordinate.
pub trait Potential1d {
    fn potential(&self, x: f64) -> Result<f64>;
}

/// How the symbol ω in the Kerr–Dirac potential is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OmegaConvention {
    /// ω² ≡ r² + a² + am/σ.
    #[default]
    Squared,
    /// ω ≡ r² + a² + am/σ, so the potential uses its square.
    Literal,
}

/// Black hole and particle parameters, geometric units (ħ = c = G = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Kerr spin parameter `a`, in units of `mass`.
    pub spin: f64,
    pub mass: f64,
    pub particle_mass: f64,
    /// Incident-wave frequency σ.
    pub frequency: f64,
    /// Angular separation constant λ̄.
    pub separation_constant: f64,
    /// Azimuthal quantum number (half-integer).
    pub azimuthal: f64,
    /// Orbital quantum number; carried as metadata only.
    pub orbital: f64,
    pub omega: OmegaConvention,
}

impl PhysicalParams {
    /// a = 0.5, M = 1, m_p = 0.8, σ = 0.8, λ̄ = 0.92, m = -1/2, l = 1/2.
    pub fn reference() -> Self {
        Self {
            spin: 0.5,
            mass: 1.0,
            particle_mass: 0.8,
            frequency: 0.8,
            separation_constant: 0.92,
            azimuthal: -0.5,
            orbital: 0.5,
            omega: OmegaConvention::Squared,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::domain(format!("black-hole mass must be positive, got {}", self.mass)));
        }
        if !(self.spin >= 0.0 && self.spin < self.mass) {
            return Err(Error::domain(format!(
                "spin must satisfy 0 <= a < M (a = {}, M = {})",
                self.spin, self.mass
            )));
        }
        if self.frequency == 0.0 || !self.frequency.is_finite() {
            return Err(Error::domain("frequency sigma must be nonzero"));
        }
        if !(self.particle_mass >= 0.0) {
            return Err(Error::domain("particle mass must be non-negative"));
        }
        Ok(())
    }

    pub fn delta(&self, r: f64) -> f64 {
        r * r - 2.0 * self.mass * r + self.spin * self.spin
    }

    /// ω² as it enters the potential.
    pub fn omega_sq(&self, r: f64) -> f64 {
        let w = r * r + self.spin * self.spin + self.spin * self.azimuthal / self.frequency;
        match self.omega {
            OmegaConvention::Squared => w,
            OmegaConvention::Literal => w * w,
        }
    }
}

/// Outer horizon r₊ = M + √(M² − a²).
pub fn horizon_radius(params: &PhysicalParams) -> Result<f64> {
    params.validate()?;
    let m = params.mass;
    Ok(m + (m * m - params.spin * params.spin).sqrt())
}

fn inner_horizon(params: &PhysicalParams) -> f64 {
    let m = params.mass;
    m - (m * m - params.spin * params.spin).sqrt()
}

fn check_outside(params: &PhysicalParams, r: f64) -> Result<f64> {
    let rp = horizon_radius(params)?;
    if !(r > rp) {
        return Err(Error::domain(format!("r = {r} is not outside the horizon r+ = {rp}")));
    }
    Ok(rp)
}

/// Effective potential of the decoupled radial Dirac equation.
pub fn kerr_dirac_potential(params: &PhysicalParams, r: f64) -> Result<f64> {
    check_outside(params, r)?;
    let m = params.mass;
    let mp = params.particle_mass;
    let lam = params.separation_constant;
    let sigma = params.frequency;

    let delta = params.delta(r);
    let sqrt_delta = delta.sqrt();
    let w2 = params.omega_sq(r);
    let l = lam * lam + mp * mp * r * r;
    let den = w2 * l + lam * mp * delta / (2.0 * sigma);
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Singularity { r });
    }

    let l32 = l * l.sqrt();
    let first = sqrt_delta * l32 / (den * den)
        * (sqrt_delta * l32 + ((r - m) * l + 3.0 * mp * mp * r * delta));
    let second = delta * sqrt_delta * l * l32 / (den * den * den)
        * (2.0 * r * l + 2.0 * mp * mp * w2 * r + lam * mp * (r - m) / sigma);
    let v = first - second;
    if !v.is_finite() {
        return Err(Error::Singularity { r });
    }
    Ok(v)
}

/// Tortoise-like coordinate with dx/dr = ω²/Δ, in closed form
/// `x = r + α ln(r − r₊) + β ln(r − r₋)`.
pub fn tortoise_map(params: &PhysicalParams, r: f64) -> Result<f64> {
    let (alpha, beta) = tortoise_coefficients(params)?;
    let rp = check_outside(params, r)?;
    let rm = inner_horizon(params);
    Ok(r + alpha * (r - rp).ln() + log_term(beta, r - rm))
}

/// Analytic dx/dr of [`tortoise_map`].
pub fn tortoise_derivative(params: &PhysicalParams, r: f64) -> Result<f64> {
    check_outside(params, r)?;
    Ok(params.omega_sq(r) / params.delta(r))
}

fn log_term(coef: f64, arg: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else {
        coef * arg.ln()
    }
}

fn tortoise_coefficients(params: &PhysicalParams) -> Result<(f64, f64)> {
    if params.omega != OmegaConvention::Squared {
        return Err(Error::domain(
            "tortoise map is defined for the default omega convention only",
        ));
    }
    let rp = horizon_radius(params)?;
    let rm = inner_horizon(params);
    if params.omega_sq(rp) <= 0.0 {
        return Err(Error::domain("omega^2 <= 0 at the horizon; tortoise map is not monotone"));
    }
    // ω²/Δ = 1 + (2Mr + q)/((r − r₊)(r − r₋))
    let q = params.spin * params.azimuthal / params.frequency;
    let span = rp - rm;
    let alpha = (2.0 * params.mass * rp + q) / span;
    let beta = -(2.0 * params.mass * rm + q) / span;
    Ok((alpha, beta))
}

/// Inverse of [`tortoise_map`], solved in the variable s = ln(r − r₊).
pub fn inverse_tortoise(params: &PhysicalParams, x: f64) -> Result<f64> {
    let (alpha, beta) = tortoise_coefficients(params)?;
    let rp = horizon_radius(params)?;
    let rm = inner_horizon(params);
    let g = |s: f64| {
        let d = s.exp();
        rp + d + alpha * s + log_term(beta, rp - rm + d) - x
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut step = 2.0;
    while g(lo) > 0.0 {
        lo -= step;
        step *= 2.0;
        if lo < -700.0 {
            return Err(Error::domain(format!("x = {x} maps too close to the horizon")));
        }
    }
    step = 2.0;
    while g(hi) < 0.0 {
        hi += step.min(5.0);
        step *= 2.0;
        if hi > 700.0 {
            return Err(Error::domain(format!("x = {x} is out of range for the tortoise map")));
        }
    }
    let s = brent(g, lo, hi, 1e-15)?;
    Ok(rp + s.exp())
}

/// Map from the wave-equation coordinate x to the radius r.
#[derive(Debug, Clone, PartialEq)]
pub enum CoordinateMap {
    Identity,
    Tortoise,
    /// Monotone (x, r) table, interpolated.
    Table(Pchip),
}

impl CoordinateMap {
    pub fn from_table(xs: Vec<f64>, rs: Vec<f64>) -> Result<Self> {
        let increasing = rs.windows(2).all(|w| w[1] > w[0]);
        let decreasing = rs.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::domain("coordinate table r(x) must be strictly monotone"));
        }
        Ok(CoordinateMap::Table(Pchip::new(xs, rs)?))
    }

    pub fn radius(&self, params: &PhysicalParams, x: f64) -> Result<f64> {
        match self {
            CoordinateMap::Identity => Ok(x),
            CoordinateMap::Tortoise => inverse_tortoise(params, x),
            CoordinateMap::Table(t) => t.eval(x),
        }
    }
}

/// One-dimensional potential V(x).
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Constant { v0: f64 },
    /// Height `v0` on `[x_lo, x_hi]`, zero elsewhere.
    Rectangular { v0: f64, x_lo: f64, x_hi: f64 },
    /// `a + b·exp(−x/c)`
    Exponential { a: f64, b: f64, c: f64 },
    /// `a + b·x + c·x²`
    Quadratic { a: f64, b: f64, c: f64 },
    KerrDirac { params: PhysicalParams, map: CoordinateMap },
    Tabulated(Pchip),
}

impl PotentialSpec {
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        let (xs, vs): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        Ok(PotentialSpec::Tabulated(Pchip::new(xs, vs)?))
    }

    pub fn kerr_dirac(params: PhysicalParams, map: CoordinateMap) -> Result<Self> {
        params.validate()?;
        Ok(PotentialSpec::KerrDirac { params, map })
    }
}

impl Potential1d for PotentialSpec {
    fn potential(&self, x: f64) -> Result<f64> {
        eval_potential(self, x)
    }
}

pub fn eval_potential(spec: &PotentialSpec, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("coordinate {x} is not finite")));
    }
    match spec {
        PotentialSpec::Constant { v0 } => Ok(*v0),
        PotentialSpec::Rectangular { v0, x_lo, x_hi } => {
            Ok(if x >= *x_lo && x <= *x_hi { *v0 } else { 0.0 })
        }
        PotentialSpec::Exponential { a, b, c } => {
            if *c == 0.0 {
                return Err(Error::domain("exponential potential needs c != 0"));
            }
            Ok(a + b * (-x / c).exp())
        }
        PotentialSpec::Quadratic { a, b, c } => Ok(a + x * (b + c * x)),
        PotentialSpec::KerrDirac { params, map } => {
            let r = map.radius(params, x)?;
            kerr_dirac_potential(params, r)
        }
        PotentialSpec::Tabulated(table) => table.eval(x),
    }
}

/// Evaluate `source` on every grid point.
pub fn sample_potential<P: Potential1d + ?Sized>(source: &P, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::domain("sampling grid is empty"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("sampling grid must be sorted"));
    }
    grid.iter().map(|&x| Ok((x, source.potential(x)?))).collect()
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}
