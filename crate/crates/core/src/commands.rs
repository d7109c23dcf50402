//! The CLI pipelines as pure functions from a [`RunConfig`] to output text.

use crate::config::{direct_model, read_columns, FarFieldSource, PotentialSource, RunConfig};
use crate::error::{Error, Result};
use crate::format::format_g17;
use crate::iwkb::{coefficient_profile, validity_report, BoundaryConstants, FarField, Record};
use crate::oracle::{converge_scatter, discretize_to_steps, ConvergedScatter};
use crate::piecewise::{fit_piecewise, FitOptions, FitReport, PiecewiseModel};
use crate::potential::{sample_potential, uniform_grid, Potential1d};
use crate::wkb::{wkb_far_field, WkbMethod};

/// Output flavour for the `--format` flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Kv,
}

/// Validity metric above which the IWKB preconditions are reported as failed.
pub const VALIDITY_LIMIT: f64 = 0.05;

pub fn grid(cfg: &RunConfig) -> Vec<f64> {
    uniform_grid(cfg.x_min, cfg.x_max, cfg.grid)
}

/// Raw potential for the configured source (no fitting).
fn raw_potential(cfg: &RunConfig) -> Result<Box<dyn Potential1d>> {
    Ok(match &cfg.potential {
        PotentialSource::Analytic(spec) | PotentialSource::Fitted(spec) => Box::new(spec.clone()),
        _ => Box::new(direct_model(cfg).expect("segment sources build directly")?),
    })
}

fn fit_options(cfg: &RunConfig) -> FitOptions {
    let mut opts = FitOptions::new(cfg.fit.form, cfg.fit.knots.clone(), cfg.energy);
    opts.continuity_weight = cfg.fit.continuity_weight;
    opts.tol_fit = cfg.fit.tol_fit;
    opts
}

/// Samples for the fitter: the `samples` file if given, else the
/// configured potential on the run grid.
fn fit_samples(cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    match &cfg.fit.samples {
        Some(path) => read_columns(path),
        None => sample_potential(raw_potential(cfg)?.as_ref(), &grid(cfg)),
    }
}

/// The piecewise model the IWKB stage works on.
pub fn build_model(cfg: &RunConfig) -> Result<PiecewiseModel> {
    match direct_model(cfg) {
        Some(m) => m,
        None => Ok(fit_piecewise(&fit_samples(cfg)?, &fit_options(cfg))?.model),
    }
}

fn table_only(format: Option<OutputFormat>, what: &str) -> Result<()> {
    if format == Some(OutputFormat::Kv) {
        return Err(Error::config(None, format!("{what} output is a table; use --format csv")));
    }
    Ok(())
}

fn emit(rec: &Record, format: Option<OutputFormat>) -> String {
    match format {
        Some(OutputFormat::Csv) => rec.to_csv(),
        _ => rec.finish(),
    }
}

/// `x,V,E` samples of the potential.
pub fn cmd_potential(cfg: &RunConfig, format: Option<OutputFormat>) -> Result<String> {
    table_only(format, "potential")?;
    let pot = raw_potential(cfg)?;
    let e = format_g17(cfg.energy);
    let mut out = String::from("x,V,E\n");
    for (x, v) in sample_potential(pot.as_ref(), &grid(cfg))? {
        out.push_str(&format!("{},{},{}\n", format_g17(x), format_g17(v), e));
    }
    Ok(out)
}

/// Run the step oracle on `[x_min, x_hi]`.
fn oracle_on(cfg: &RunConfig, x_hi: f64) -> Result<ConvergedScatter> {
    let pot = raw_potential(cfg)?;
    converge_scatter(pot.as_ref(), cfg.energy, cfg.x_min, x_hi, cfg.tol)
}

/// Far-field (T, R) and the fields describing where they came from.
fn resolve_far_field(cfg: &RunConfig, model: &PiecewiseModel) -> Result<(FarField, Record)> {
    let mut prov = Record::new();
    prov.text("far_field", cfg.far_field.name());
    let far = match cfg.far_field {
        FarFieldSource::Values { transmission, reflection } => FarField { transmission, reflection },
        FarFieldSource::Oracle => {
            let conv = oracle_on(cfg, cfg.x_far())?;
            prov.int("oracle_n", conv.n_used as i64).num("oracle_tol", cfg.tol);
            // T + R = 1 holds only to rounding; renormalize for the solver
            let t = conv.result.transmission / (conv.result.transmission + conv.result.reflection);
            FarField { transmission: t, reflection: 1.0 - t }
        }
        FarFieldSource::Wkb => {
            let est = wkb_far_field(model)?;
            match est.method {
                WkbMethod::Tunneling { theta } => prov.text("wkb_method", "tunneling").num("wkb_theta", theta),
                WkbMethod::AboveBarrier => prov.text("wkb_method", "above_barrier"),
            };
            FarField { transmission: est.transmission, reflection: est.reflection }
        }
    };
    Ok((far, prov))
}

fn solve_constants(cfg: &RunConfig, model: &PiecewiseModel) -> Result<(BoundaryConstants, Record)> {
    let (far, prov) = resolve_far_field(cfg, model)?;
    let consts = BoundaryConstants::for_model(model, far, cfg.x_min, cfg.x_far(), cfg.k_far, &grid(cfg))?;
    Ok((consts, prov))
}

fn append(rec: &mut Record, extra: &Record) {
    for line in extra.lines().iter().skip(1) {
        let (k, v) = line.split_once('=').unwrap_or((line, ""));
        rec.text(k, v);
    }
}

/// Solve c, c₂, c₁ and emit them with the provenance of every input.
pub fn cmd_constants(cfg: &RunConfig, format: Option<OutputFormat>) -> Result<String> {
    let model = build_model(cfg)?;
    let (consts, prov) = solve_constants(cfg, &model)?;
    let mut rec = consts.record();
    append(&mut rec, &prov);
    rec.text("k_inner_source", "model at x_min");
    rec.text("k_far_source", if cfg.k_far.is_some() { "config k_far" } else { "model at x_far" });
    Ok(emit(&rec, format))
}

/// Instantaneous coefficient profile as CSV.
pub fn cmd_profile(cfg: &RunConfig, format: Option<OutputFormat>) -> Result<String> {
    table_only(format, "profile")?;
    let model = build_model(cfg)?;
    let (consts, _) = solve_constants(cfg, &model)?;
    Ok(coefficient_profile(&model, &consts, &grid(cfg))?.to_csv())
}

/// Result of [`compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub t_iwkb: f64,
    pub r_iwkb: f64,
    pub t_oracle: f64,
    pub r_oracle: f64,
    pub n_used: usize,
    pub max_validity: f64,
    pub far_field: FarFieldSource,
}

impl Comparison {
    pub fn abs_gap(&self) -> f64 {
        (self.t_iwkb - self.t_oracle).abs()
    }

    pub fn rel_gap(&self) -> f64 {
        if self.t_oracle == 0.0 {
            if self.abs_gap() == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            self.abs_gap() / self.t_oracle.abs()
        }
    }

    pub fn preconditions_hold(&self) -> bool {
        self.max_validity <= VALIDITY_LIMIT
    }
}

/// Relative change of k across a knot above which the knot is a step. A
/// step of relative size δ reflects about δ²/4 of the flux.
const STEP_THRESHOLD: f64 = 1e-4;

/// A value jump at a knot is an infinitely steep change of k. Smaller
/// jumps are fit noise and ignored.
fn has_step(model: &PiecewiseModel, x_far: f64) -> bool {
    let e = model.energy();
    model.segments().windows(2).any(|w| {
        let x = w[0].x_hi;
        if x > x_far {
            return false;
        }
        let (kl2, kr2) = (e - w[0].value(x), e - w[1].value(x));
        if kl2 <= 0.0 || kr2 <= 0.0 {
            return kl2 != kr2;
        }
        let (kl, kr) = (kl2.sqrt(), kr2.sqrt());
        (kl - kr).abs() > STEP_THRESHOLD * kl.max(kr)
    })
}

/// IWKB far-field T (through the configured far-field source) against the
/// converged step oracle on `[x_min, x_far]`.
pub fn compare(cfg: &RunConfig) -> Result<Comparison> {
    if cfg.far_field == FarFieldSource::Oracle {
        return Err(Error::config(None, "compare needs a far-field source independent of the oracle (values or wkb)"));
    }
    let model = build_model(cfg)?;
    let (consts, _) = solve_constants(cfg, &model)?;
    let x_far = cfg.x_far();
    let at_far = coefficient_profile(&model, &consts, &[x_far])?;
    let row = at_far.rows[0];
    let (t_iwkb, r_iwkb) = match (row.t, row.r) {
        (Some(t), Some(r)) => (t, r),
        _ => return Err(Error::TurningPoint { x: x_far }),
    };
    let conv = oracle_on(cfg, x_far)?;
    let grid: Vec<f64> = grid(cfg).into_iter().filter(|&x| x <= x_far).collect();
    let report = validity_report(&model, &grid)?;
    let max_validity = if has_step(&model, x_far) { f64::INFINITY } else { report.max_metric() };
    Ok(Comparison {
        t_iwkb,
        r_iwkb,
        t_oracle: conv.result.transmission,
        r_oracle: conv.result.reflection,
        n_used: conv.n_used,
        max_validity,
        far_field: cfg.far_field,
    })
}

pub fn cmd_compare(cfg: &RunConfig, format: Option<OutputFormat>) -> Result<String> {
    let cmp = compare(cfg)?;
    let mut rec = Record::new();
    rec.num("T_iwkb", cmp.t_iwkb)
        .num("R_iwkb", cmp.r_iwkb)
        .num("T_oracle", cmp.t_oracle)
        .num("R_oracle", cmp.r_oracle)
        .num("abs_gap", cmp.abs_gap())
        .num("rel_gap", cmp.rel_gap())
        .num("max_validity", cmp.max_validity)
        .int("oracle_n", cmp.n_used as i64)
        .text("far_field", cmp.far_field.name());
    if !cmp.preconditions_hold() {
        rec.text(
            "warning",
            &format!(
                "validity metric {} exceeds {}; IWKB preconditions fail and the gap is not meaningful",
                format_g17(cmp.max_validity),
                VALIDITY_LIMIT
            ),
        );
    }
    Ok(emit(&rec, format))
}

/// Fit report as model text followed by `#` comment lines.
pub fn render_fit(report: &FitReport) -> String {
    let mut out = report.model.to_text();
    out.push_str("# knot value_jump slope_jump\n");
    for k in &report.knots {
        out.push_str(&format!("# {} {} {}\n", format_g17(k.x), format_g17(k.value_jump), format_g17(k.slope_jump)));
    }
    out.push_str("# segment max_residual\n");
    for (i, r) in report.segment_residuals.iter().enumerate() {
        out.push_str(&format!("# {} {}\n", i, format_g17(*r)));
    }
    out
}

pub fn cmd_fit(cfg: &RunConfig, format: Option<OutputFormat>) -> Result<String> {
    if format.is_some() {
        return Err(Error::config(None, "fit writes the model text format; --format does not apply"));
    }
    let report = fit_piecewise(&fit_samples(cfg)?, &fit_options(cfg))?;
    Ok(render_fit(&report))
}

/// Converged oracle record, or with `--format csv` the step potential at
/// the converged resolution.
pub fn cmd_oracle(cfg: &RunConfig, format: Option<OutputFormat>) -> Result<String> {
    let conv = oracle_on(cfg, cfg.x_max)?;
    if format == Some(OutputFormat::Csv) {
        let pot = raw_potential(cfg)?;
        let steps = discretize_to_steps(pot.as_ref(), conv.n_used, cfg.x_min, cfg.x_max)?;
        let mut out = String::from("edge,height\n");
        out.push_str(&steps.to_text().replace(' ', ","));
        return Ok(out);
    }
    let mut rec = conv.result.record();
    rec.int("n_used", conv.n_used as i64).num("tol", cfg.tol);
    let seq: Vec<String> = conv.history.iter().map(|(n, t)| format!("{n}:{}", format_g17(*t))).collect();
    rec.text("history", &seq.join(" "));
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn cfg(text: &str) -> RunConfig {
        let c = RunConfig::parse(text, Path::new(".")).unwrap();
        c.validate().unwrap();
        c
    }

    const FLAT: &str = "potential = constant\nv0 = 0.2\nenergy = 0.64\nx_min = 0\nx_max = 20\ngrid = 11\n";

    #[test]
    fn potential_csv_is_flat_for_constant() {
        let out = cmd_potential(&cfg(FLAT), None).unwrap();
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("x,V,E"));
        assert!(lines.all(|l| l.split(',').nth(1) == Some("0.20000000000000001")));
        assert!(cmd_potential(&cfg(FLAT), Some(OutputFormat::Kv)).is_err());
    }

    #[test]
    fn free_case_constants() {
        let c = cfg(&format!("{FLAT}far_field = values\nt_far = 1\nr_far = 0\n"));
        let out = cmd_constants(&c, None).unwrap();
        let k = (0.44f64).sqrt();
        let get = |key: &str| -> f64 {
            out.lines().find_map(|l| l.strip_prefix(&format!("{key}="))).unwrap().parse().unwrap()
        };
        // T = 1: c = √k and B = 0, so c₂ = 0 as well
        assert!((get("c") - k.sqrt()).abs() < 1e-15);
        assert!(get("c2").abs() < 1e-15);
        assert_eq!(get("c1"), 0.0);
        assert!(out.starts_with("format=1\n"));
        assert!(out.contains("far_field=values"));
    }

    #[test]
    fn compare_constant_potential_has_no_gap() {
        let cmp = compare(&cfg(FLAT)).unwrap();
        assert!(cmp.abs_gap() < 1e-10);
        assert_eq!(cmp.n_used, 64);
        let out = cmd_compare(&cfg(FLAT), None).unwrap();
        assert!(!out.contains("warning"));
    }

    #[test]
    fn compare_warns_on_steep_step() {
        let c = cfg("potential = rectangular\nv0 = 0.5\nbarrier_lo = 5\nbarrier_hi = 100\nenergy = 0.64\nx_min = 0\nx_max = 10\ngrid = 101\n");
        let out = cmd_compare(&c, None).unwrap();
        assert!(out.contains("warning="), "{out}");
    }

    #[test]
    fn knot_noise_is_not_a_step() {
        use crate::piecewise::Segment;
        let two = |jump: f64| {
            PiecewiseModel::new(vec![Segment::quadratic(0.1, 0.0, 0.0, 0.0, 5.0).unwrap(), Segment::quadratic(0.1 + jump, 0.0, 0.0, 5.0, 10.0).unwrap()], 0.64).unwrap()
        };
        assert!(!has_step(&two(1e-8), 10.0));
        assert!(has_step(&two(1e-2), 10.0));
        assert!(!has_step(&two(1e-2), 4.0));
    }

    #[test]
    fn compare_rejects_oracle_source() {
        let c = cfg(&format!("{FLAT}far_field = oracle\n"));
        assert!(matches!(compare(&c), Err(Error::Config { .. })));
    }

    #[test]
    fn oracle_source_constants() {
        let c = cfg("potential = exponential\na = 0.1\nb = 0.2\nc = 20\nenergy = 0.64\nx_min = 0\nx_max = 60\ngrid = 61\nfar_field = oracle\ntol = 1e-8\n");
        let out = cmd_constants(&c, None).unwrap();
        assert!(out.contains("far_field=oracle") && out.contains("oracle_n="));
    }

    #[test]
    fn fit_round_trips_through_model_text() {
        let c = cfg("potential = exponential\na = 0.1\nb = 0.2\nc = 20\nenergy = 0.64\nx_min = 0\nx_max = 60\ngrid = 61\nknots = 30\n");
        let out = cmd_fit(&c, None).unwrap();
        let m = PiecewiseModel::from_text(&out).unwrap();
        assert_eq!(m.segments().len(), 2);
        assert!((m.segments()[0].c - 20.0).abs() < 1e-6);
    }

    #[test]
    fn outputs_are_deterministic() {
        let c = cfg("potential = reference_table\nt_far = 0.299\ngrid = 73\n");
        assert_eq!(cmd_profile(&c, None).unwrap(), cmd_profile(&c, None).unwrap());
        assert_eq!(cmd_constants(&c, Some(OutputFormat::Csv)).unwrap(), cmd_constants(&c, Some(OutputFormat::Csv)).unwrap());
    }
}
