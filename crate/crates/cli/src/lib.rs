//! Verification commands behind the `qcverify` binary. Each command returns
//! a [`Report`] whose pass flag follows from its checks alone.

use std::time::Instant;

use num_traits::Zero;
use qcgeom::frame::{build_frame, build_frame_f64, frame_audit, rational_points};
use qcgeom::functional::{functional_scan, FunctionalConfig};
use qcgeom::group::ambient_dim;
use qcgeom::qmatrix::{build_q, certify_pd, QMatrix};
use qcgeom::tensors::{lemma_de_check, random_torsion, structural_check, universal_identity_suite, IdentityCheck};
use qcgeom::yamabe::{
    conformal_scal, conformal_torsion, h_explicit, phi_from_h, random_positive_poly, yamabe_residual, ExtremalParams,
};
use qcgeom::{GroupPoint, QcError, Rational, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Audit,
    Residual,
    Scal,
    Torsion,
    Identities,
    Qmatrix,
    Functional,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::Residual => "residual",
            Command::Scal => "scal",
            Command::Torsion => "torsion",
            Command::Identities => "identities",
            Command::Qmatrix => "qmatrix",
            Command::Functional => "functional",
        }
    }

    fn default_points(self) -> usize {
        match self {
            Command::Audit => 32,
            Command::Identities => 1000,
            _ => 10_000,
        }
    }
}

/// Replacement of one entry of the matrix, for negative controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tamper {
    pub row: usize,
    pub col: usize,
    /// Exact value as `p/q` or an integer.
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub seed: u64,
    pub points: Option<usize>,
    /// Half-width of the sampling box.
    #[serde(rename = "box")]
    pub box_half_width: f64,
    pub c0: Vec<f64>,
    pub sigma: Vec<f64>,
    pub q0: Option<Vec<f64>>,
    pub w0: Option<Vec<f64>>,
    pub tol_exact: f64,
    pub tol_quad: f64,
    /// Number of random polynomial conformal factors for the universal
    /// identities.
    pub polys: usize,
    pub tamper: Option<Tamper>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 1,
            seed: 2024,
            points: None,
            box_half_width: 2.0,
            c0: vec![1.0],
            sigma: vec![1.0],
            q0: None,
            w0: None,
            tol_exact: 1e-9,
            tol_quad: 1e-4,
            polys: 200,
            tamper: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), QcError> {
        let bad = |m: String| Err(QcError::InvalidParameter(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.points == Some(0) {
            return bad("points must be at least 1".into());
        }
        if !(self.box_half_width > 0.0) {
            return bad("box must be positive".into());
        }
        if self.c0.is_empty() || self.sigma.is_empty() {
            return bad("c0 and sigma need at least one value".into());
        }
        if self.c0.iter().chain(&self.sigma).any(|v| !(*v > 0.0)) {
            return bad("c0 and sigma must be positive".into());
        }
        if let Some(q0) = &self.q0 {
            if q0.len() != 4 * self.n {
                return bad(format!("q0 needs {} values, got {}", 4 * self.n, q0.len()));
            }
        }
        if let Some(w0) = &self.w0 {
            if w0.len() != 3 {
                return bad(format!("w0 needs 3 values, got {}", w0.len()));
            }
        }
        if !(self.tol_exact >= 0.0 && self.tol_quad >= 0.0) {
            return bad("tolerances must be nonnegative".into());
        }
        Ok(())
    }

    fn points_for(&self, cmd: Command) -> usize {
        self.points.unwrap_or(cmd.default_points())
    }

    /// Base point of the extremal: the configured one, else seeded random.
    fn base_point(&self, rng: &mut ChaCha8Rng) -> Result<GroupPoint<f64>, QcError> {
        let d = ambient_dim(self.n);
        let mut c: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Some(q0) = &self.q0 {
            c[..4 * self.n].copy_from_slice(q0);
        }
        if let Some(w0) = &self.w0 {
            c[4 * self.n..].copy_from_slice(w0);
        }
        GroupPoint::from_coords(&c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// Pass when `max_residual <= tolerance`.
    Le,
    /// Pass when `max_residual > tolerance`; used for negative controls
    /// and margins, where `max_residual` carries the smallest observed value.
    Gt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, values: &[f64], tolerance: f64) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        let nan = values.iter().any(|v| v.is_nan());
        Self {
            name: name.to_string(),
            max_residual: if nan { f64::NAN } else { max },
            mean_residual: mean(values),
            tolerance,
            comparison: Comparison::Le,
            pass: !nan && !values.is_empty() && max <= tolerance,
        }
    }

    pub fn gt(name: &str, values: &[f64], tolerance: f64) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let nan = values.iter().any(|v| v.is_nan());
        Self {
            name: name.to_string(),
            max_residual: min,
            mean_residual: mean(values),
            tolerance,
            comparison: Comparison::Gt,
            pass: !nan && !values.is_empty() && min > tolerance,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self::le(name, &[if ok { 0.0 } else { 1.0 }], 0.0)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub wall_ms: u64,
    #[serde(skip_serializing_if = "Value::is_null", default)]
    pub details: Value,
    /// Per-point rows for CSV output.
    #[serde(skip)]
    pub rows: Option<(Vec<String>, Vec<Vec<f64>>)>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with the wall-time field zeroed.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_ms: 0,
            ..self.clone()
        }
    }

    /// Per-point rows if the command produced them, else the check table.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.rows {
            Some((header, rows)) => {
                out.push_str(&header.join(","));
                out.push('\n');
                for row in rows {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
            }
            None => {
                out.push_str("name,max_residual,mean_residual,tolerance,comparison,pass\n");
                for c in &self.checks {
                    let cmp = match c.comparison {
                        Comparison::Le => "le",
                        Comparison::Gt => "gt",
                    };
                    out.push_str(&format!(
                        "{},{:e},{:e},{:e},{},{}\n",
                        c.name, c.max_residual, c.mean_residual, c.tolerance, cmp, c.pass
                    ));
                }
            }
        }
        out
    }
}

struct Outcome {
    checks: Vec<Check>,
    details: Value,
    rows: Option<(Vec<String>, Vec<Vec<f64>>)>,
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Report, QcError> {
    cfg.validate()?;
    let start = Instant::now();
    let out = match cmd {
        Command::Audit => cmd_audit(cfg)?,
        Command::Residual => cmd_residual(cfg)?,
        Command::Scal => cmd_scal(cfg)?,
        Command::Torsion => cmd_torsion(cfg)?,
        Command::Identities => cmd_identities(cfg)?,
        Command::Qmatrix => cmd_qmatrix(cfg)?,
        Command::Functional => cmd_functional(cfg)?,
    };
    let pass = out.checks.iter().all(|c| c.pass);
    Ok(Report {
        command: cmd.name().to_string(),
        config: cfg.clone(),
        checks: out.checks,
        pass,
        wall_ms: start.elapsed().as_millis() as u64,
        details: out.details,
        rows: out.rows,
    })
}

fn random_points(cfg: &RunConfig, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = ambient_dim(cfg.n);
    let w = cfg.box_half_width;
    (0..count).map(|_| (0..d).map(|_| rng.gen_range(-w..=w)).collect()).collect()
}

fn cmd_audit(cfg: &RunConfig) -> Result<Outcome, QcError> {
    let frame = build_frame(cfg.n)?;
    let half_width = cfg.box_half_width.ceil().max(1.0) as i64;
    let points = rational_points(cfg.n, cfg.points_for(Command::Audit), half_width, cfg.seed);
    let report = frame_audit(&frame, &points);
    let checks = report
        .checks
        .iter()
        .map(|c| {
            let v = if c.exact { 0.0 } else { c.max_violation.max(f64::MIN_POSITIVE) };
            Check::le(&c.name, &[v], 0.0)
        })
        .collect();
    Ok(Outcome {
        checks,
        details: json!({ "convention": format!("{:?}", frame.convention) }),
        rows: None,
    })
}

/// Every `(c0, sigma)` pair of the config with its seeded base point.
fn extremal_grid(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<ExtremalParams<f64>>, QcError> {
    let mut out = Vec::new();
    for &c0 in &cfg.c0 {
        for &sigma in &cfg.sigma {
            out.push(ExtremalParams::new(c0, sigma, cfg.base_point(rng)?)?);
        }
    }
    Ok(out)
}

fn grid_label(p: &ExtremalParams<f64>) -> String {
    format!("c0={},sigma={}", p.c0, p.sigma)
}

fn cmd_residual(cfg: &RunConfig) -> Result<Outcome, QcError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frame = build_frame_f64(cfg.n)?;
    let grid = extremal_grid(cfg, &mut rng)?;
    let count = cfg.points_for(Command::Residual);
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (k, params) in grid.iter().enumerate() {
        let s = params.constants().s_theta;
        let phi = phi_from_h(h_explicit(params), params.constants().q_dim);
        let points = random_points(cfg, count, &mut rng);
        let res: Vec<f64> = points
            .par_iter()
            .map(|p| yamabe_residual(&frame, &phi, s, p).map(|r| r.relative()))
            .collect::<Result<_, _>>()?;
        for (p, r) in points.iter().zip(&res) {
            let mut row = vec![k as f64];
            row.extend(p);
            row.push(*r);
            rows.push(row);
        }
        checks.push(Check::le(&format!("yamabe_residual[{}]", grid_label(params)), &res, cfg.tol_exact));
    }
    let mut header = vec!["grid".to_string()];
    header.extend((0..ambient_dim(cfg.n)).map(|i| format!("x{i}")));
    header.push("residual".into());
    Ok(Outcome {
        checks,
        details: Value::Null,
        rows: Some((header, rows)),
    })
}

fn cmd_scal(cfg: &RunConfig) -> Result<Outcome, QcError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frame = build_frame_f64(cfg.n)?;
    let grid = extremal_grid(cfg, &mut rng)?;
    let count = cfg.points_for(Command::Scal);
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for (k, params) in grid.iter().enumerate() {
        let expected = params.constants().s_theta;
        let h = h_explicit(params);
        let points = random_points(cfg, count, &mut rng);
        let vals: Vec<f64> = points
            .par_iter()
            .map(|p| conformal_scal(&frame, &h, 0.0, p))
            .collect::<Result<_, _>>()?;
        let m = mean(&vals);
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len().max(2) - 1) as f64;
        let rel: Vec<f64> = vals.iter().map(|v| (v - expected).abs() / expected.abs()).collect();
        for (p, v) in points.iter().zip(&vals) {
            let mut row = vec![k as f64];
            row.extend(p);
            row.push(*v);
            rows.push(row);
        }
        let label = grid_label(params);
        checks.push(Check::le(&format!("scal_matches_constant[{label}]"), &rel, cfg.tol_exact));
        checks.push(Check::le(&format!("scal_relative_std[{label}]"), &[var.sqrt() / m.abs()], cfg.tol_exact));
        details.push(json!({ "params": label, "expected": expected, "mean": m, "std": var.sqrt() }));
    }
    let mut header = vec!["grid".to_string()];
    header.extend((0..ambient_dim(cfg.n)).map(|i| format!("x{i}")));
    header.push("scal".into());
    Ok(Outcome {
        checks,
        details: Value::Array(details),
        rows: Some((header, rows)),
    })
}

fn cmd_torsion(cfg: &RunConfig) -> Result<Outcome, QcError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frame = build_frame_f64(cfg.n)?;
    let grid = extremal_grid(cfg, &mut rng)?;
    let count = cfg.points_for(Command::Torsion);
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (k, params) in grid.iter().enumerate() {
        let h = h_explicit(params);
        let points = random_points(cfg, count, &mut rng);
        let norms: Vec<(f64, f64)> = points
            .par_iter()
            .map(|p| conformal_torsion(&frame, &h, p).map(|(t, u)| (t.norm_sq().sqrt(), u.norm_sq().sqrt())))
            .collect::<Result<_, _>>()?;
        for (p, (t, u)) in points.iter().zip(&norms) {
            let mut row = vec![k as f64];
            row.extend(p);
            row.extend([*t, *u]);
            rows.push(row);
        }
        let label = grid_label(params);
        let t: Vec<f64> = norms.iter().map(|x| x.0).collect();
        let u: Vec<f64> = norms.iter().map(|x| x.1).collect();
        checks.push(Check::le(&format!("t0_norm[{label}]"), &t, cfg.tol_exact));
        checks.push(Check::le(&format!("u_norm[{label}]"), &u, cfg.tol_exact));
    }

    // negative control: generic positive conformal factors carry torsion
    let controls = 10;
    let probe = count.min(200);
    let mut peaks = Vec::with_capacity(controls);
    for _ in 0..controls {
        let h = random_positive_poly(cfg.n, &mut rng);
        let points = random_points(cfg, probe, &mut rng);
        let peak = points
            .par_iter()
            .map(|p| conformal_torsion(&frame, &h, p).map(|(t, u)| (t.norm_sq() + u.norm_sq()).sqrt()))
            .collect::<Result<Vec<f64>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        peaks.push(peak);
    }
    checks.push(Check::gt("nonextremal_torsion_detected", &peaks, 1e-3));
    let mut header = vec!["grid".to_string()];
    header.extend((0..ambient_dim(cfg.n)).map(|i| format!("x{i}")));
    header.extend(["t0_norm".to_string(), "u_norm".to_string()]);
    Ok(Outcome {
        checks,
        details: json!({ "control_peaks": peaks }),
        rows: Some((header, rows)),
    })
}

fn collect_identities(into: &mut Vec<(String, Vec<f64>)>, prefix: &str, checks: Vec<IdentityCheck>) {
    for c in checks {
        let name = format!("{prefix}.{}", c.name);
        match into.iter_mut().find(|(n, _)| *n == name) {
            Some((_, v)) => v.push(c.residual),
            None => into.push((name, vec![c.residual])),
        }
    }
}

fn cmd_identities(cfg: &RunConfig) -> Result<Outcome, QcError> {
    let frame = build_frame(cfg.n)?;
    let count = cfg.points_for(Command::Identities);
    let mut checks = Vec::new();

    // exact torsion data: left and right sides in rational arithmetic
    let per_seed: Vec<(Vec<IdentityCheck>, Vec<IdentityCheck>, bool)> = (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let td = random_torsion(&frame, cfg.seed.wrapping_mul(1_000_003).wrapping_add(k));
            let u_zero = cfg.n > 1 || td.u.norm_sq().is_zero();
            (lemma_de_check(&td), structural_check(&td), u_zero)
        })
        .collect();
    let mut lemma = Vec::new();
    let mut structural = Vec::new();
    let mut u_ok = true;
    for (l, s, u) in per_seed {
        collect_identities(&mut lemma, "lemma_de", l);
        collect_identities(&mut structural, "structural", s);
        u_ok &= u;
    }
    for (name, v) in &lemma {
        checks.push(Check::le(name, v, 1e-10));
    }
    for (name, v) in &structural {
        checks.push(Check::le(name, v, 1e-12));
    }
    if cfg.n == 1 {
        checks.push(Check::flag("structural.u_vanishes_n1", u_ok));
    }

    let zero = random_torsion(&frame, cfg.seed).without_torsion();
    let mut zero_res = Vec::new();
    collect_identities(&mut zero_res, "zero_torsion", lemma_de_check(&zero));
    for (name, v) in &zero_res {
        checks.push(Check::le(name, v, 0.0));
    }

    // universal identities for generic positive h
    let frame_f = build_frame_f64(cfg.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let cases: Vec<_> = (0..cfg.polys)
        .map(|_| {
            let h = random_positive_poly(cfg.n, &mut rng);
            let p = random_points(cfg, 1, &mut rng).remove(0);
            (h, p)
        })
        .collect();
    let results: Vec<Vec<IdentityCheck>> = cases
        .par_iter()
        .map(|(h, p)| universal_identity_suite(&frame_f, h, p))
        .collect::<Result<_, _>>()?;
    let mut universal = Vec::new();
    for r in results {
        collect_identities(&mut universal, "universal", r);
    }
    for (name, v) in &universal {
        checks.push(Check::le(name, v, cfg.tol_exact));
    }
    Ok(Outcome {
        checks,
        details: json!({ "torsion_samples": count, "polynomials": cfg.polys }),
        rows: None,
    })
}

fn parse_rational(s: &str) -> Result<Rational, QcError> {
    let bad = || QcError::InvalidParameter(format!("not a rational number: {s}"));
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim().parse::<i64>().map_err(|_| bad())?, b.trim().parse::<i64>().map_err(|_| bad())?),
        None => (s.trim().parse::<i64>().map_err(|_| bad())?, 1),
    };
    if den == 0 {
        return Err(bad());
    }
    Ok(Rational::from_ratio(num, den))
}

fn q_matrix(cfg: &RunConfig) -> Result<QMatrix, QcError> {
    let q = build_q();
    match &cfg.tamper {
        Some(t) => q.tampered(t.row, t.col, parse_rational(&t.value)?),
        None => Ok(q),
    }
}

fn cmd_qmatrix(cfg: &RunConfig) -> Result<Outcome, QcError> {
    let q = q_matrix(cfg)?;
    let cert = certify_pd(&q)?;
    let mut checks = vec![Check::flag("symmetric", cert.symmetric)];
    for (root, ok) in &cert.expected_roots {
        checks.push(Check::flag(&format!("char_poly_vanishes_at[{}]", root.label()), *ok));
    }
    checks.push(Check::flag("char_poly_fully_factored", cert.fully_factored()));
    let leading: Vec<f64> = cert.leading_minors.iter().map(|m| m.as_f64()).collect();
    checks.push(Check::gt("leading_minors_positive", &leading, 0.0));
    let shifted: Vec<f64> = cert.shifted_leading_minors.iter().map(|m| -m.as_f64()).collect();
    checks.push(Check::le("shifted_leading_minors_nonnegative", &shifted, 0.0));

    let text = |v: &[Rational]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let spectrum: Vec<Value> = cert
        .spectrum()
        .iter()
        .map(|(r, m)| json!({ "root": r.label(), "value": r.value(), "multiplicity": m }))
        .collect();
    let factors: Vec<Value> = cert
        .factors
        .iter()
        .map(|f| json!({ "coefficients": text(&f.poly.coeffs), "multiplicity": f.multiplicity }))
        .collect();
    let details = json!({
        "entries": q.entries.iter().map(|r| text(r)).collect::<Vec<_>>(),
        "char_poly": text(&cert.char_poly.coeffs),
        "factors": factors,
        "spectrum": spectrum,
        "leading_minors": text(&cert.leading_minors),
        "shifted_leading_minors": text(&cert.shifted_leading_minors),
        "shifted_min_principal_minor": {
            "value": cert.shifted_min_principal.0.to_string(),
            "indices": cert.shifted_min_principal.1,
        },
        "shifted_psd": cert.shifted_psd(),
        "positive_definite": cert.positive_definite,
        "min_eigenvalue": cert.min_eigenvalue.as_ref().map(|r| json!({ "root": r.label(), "value": r.value() })),
        "min_eigenvalue_bracket": [cert.min_eigenvalue_bracket.0.to_string(), cert.min_eigenvalue_bracket.1.to_string()],
    });
    Ok(Outcome {
        checks,
        details,
        rows: None,
    })
}

fn cmd_functional(cfg: &RunConfig) -> Result<Outcome, QcError> {
    let mut fc = FunctionalConfig::new(cfg.n, cfg.seed);
    fc.c0 = cfg.c0[0];
    fc.sigma = cfg.sigma[0];
    if let Some(q0) = &cfg.q0 {
        fc.translation[..4 * cfg.n].copy_from_slice(q0);
    }
    if let Some(w0) = &cfg.w0 {
        fc.translation[4 * cfg.n..].copy_from_slice(w0);
    }
    let report = functional_scan(&fc)?;
    let mut checks = Vec::new();
    for inv in &report.invariance {
        checks.push(Check::le(&format!("ratio_invariance[{}]", inv.name), &[inv.relative_difference], cfg.tol_quad));
    }
    let margins: Vec<f64> = report.bumps.iter().map(|b| b.margin - b.perturbed.error).collect();
    checks.push(Check::gt("bump_margin_beyond_error", &margins, 0.0));
    let details = serde_json::to_value(&report).expect("report serializes");
    Ok(Outcome {
        checks,
        details,
        rows: None,
    })
}
