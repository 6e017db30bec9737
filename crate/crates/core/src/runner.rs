//! Experiment orchestration behind the `solver` binary. Every experiment returns
//! its output files as bytes; writing is left to [`write_outputs`].

use crate::config::{Experiment, RuleChoice, RunConfig};
use crate::error::{Error, Result};
use crate::krein::{corner_targets, loglog_slope, nonrel_limit_experiment, RayRule, VolumeRule};
use crate::operator::Discretization;
use crate::radial::sphere_bound_states_radial;
use crate::schur::{certify_operator_norm, certify_weyl_at_zero, CertificateKind, KernelBound, NormCertificate};
use crate::spectral::{
    distinct_levels, estimate_m0, find_bound_states, gap_grid, scan_curves, trace_formula_check,
    BoundStateOptions,
};
use crate::{PhysParams, Vec3, C64};
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct Report {
    pub outputs: Vec<Output>,
    /// One line per stage, for the terminal.
    pub summary: Vec<String>,
}

/// 17 significant digits, so values round-trip exactly.
pub fn fmt_float(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("{v}")));
    }
    Ok(format!("{v:.16e}"))
}

fn check_json(v: &Value, path: &str) -> Result<()> {
    match v {
        // serde_json turns NaN and infinities into null; nulls are only allowed where declared
        Value::Null if !path.ends_with(".measured_norm") => Err(Error::NonFinite(path.into())),
        Value::Array(a) => a.iter().enumerate().try_for_each(|(i, x)| check_json(x, &format!("{path}[{i}]"))),
        Value::Object(o) => o.iter().try_for_each(|(k, x)| check_json(x, &format!("{path}.{k}"))),
        _ => Ok(()),
    }
}

fn json_output<T: Serialize>(name: &str, value: &T) -> Result<Output> {
    let v = serde_json::to_value(value).map_err(|e| Error::Invalid(e.to_string()))?;
    check_json(&v, "$")?;
    let mut bytes = serde_json::to_vec_pretty(&v).map_err(|e| Error::Invalid(e.to_string()))?;
    bytes.push(b'\n');
    Ok(Output { name: name.into(), bytes })
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() { Ok(v) } else { Err(Error::NonFinite(what.into())) }
}

fn params_json(p: &PhysParams, d: &Discretization) -> Value {
    json!({ "m": p.m, "c": p.c, "eta": p.eta, "scheme": d.scheme(), "dim": d.dim(), "nodes": d.surface.len() })
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let diags = cfg.diagnostics();
    if !diags.is_empty() {
        return Err(Error::Invalid(diags.join("; ")));
    }
    match cfg.experiment {
        Experiment::Curves => curves(cfg),
        Experiment::BoundStates => bound_states(cfg),
        Experiment::NonrelLimit => nonrel(cfg),
        Experiment::TraceCheck => trace(cfg),
        Experiment::Certify => certify(cfg),
        Experiment::OracleCompare => oracle(cfg),
    }
}

fn curves(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let d = cfg.discretization()?;
    let curve = scan_curves(&p, &d, &cfg.lambda_grid()?)?;
    let mut csv = String::from("lambda,branch,mu\n");
    let ids = curve.branch_ids();
    for (j, l) in curve.lambda_grid.iter().enumerate() {
        for (n, &(b, i)) in ids.iter().enumerate() {
            writeln!(csv, "{},{},{}", fmt_float(*l)?, n, fmt_float(curve.values[j][b][i])?).unwrap();
        }
    }
    let summary = vec![format!(
        "curves: {} points x {} branches, max |mu| = {:.6e}, {} monotonicity violations ({} outside clusters)",
        curve.lambda_grid.len(),
        ids.len(),
        curve.norm,
        curve.violations.len(),
        curve.violations_outside_clusters().len()
    )];
    Ok(Report { outputs: vec![Output { name: "curves.csv".into(), bytes: csv.into_bytes() }], summary })
}

fn bound_states(cfg: &RunConfig) -> Result<Report> {
    let p0 = cfg.params()?;
    let d = cfg.discretization()?;
    let grid = cfg.lambda_grid()?;
    let full = gap_grid(&p0, grid.len().max(2));
    let m0 = estimate_m0(&p0, &d, &full)?;
    let curve = scan_curves(&p0, &d, &grid)?;
    let opts = BoundStateOptions { tol: cfg.tolerances.bisection };
    let mut states = Vec::new();
    let mut counts = Vec::new();
    for eta in cfg.etas() {
        let p = p0.with_eta(eta);
        let roots = find_bound_states(&p, &d, &curve, opts)?;
        counts.push(json!({ "eta": eta, "count": roots.len(), "levels": distinct_levels(&roots, 10.0 * opts.tol * p.rest_energy()).len() }));
        for r in roots {
            states.push(json!({ "eta": eta, "lambda": r.lambda, "branch": r.branch, "block": r.block, "residual": r.residual, "multiplicity": r.multiplicity }));
        }
    }
    let mut out = json!({ "params": params_json(&p0, &d), "bound_states": states, "m0_estimate": m0 });
    if cfg.physics.eta_list.is_some() {
        out["counts"] = Value::Array(counts);
    }
    let summary = vec![
        format!("m0 estimate: {:.6e} at lambda = {:.6}", m0.value, m0.argmax),
        format!("bound states: {} roots over {} coupling(s)", out["bound_states"].as_array().map_or(0, |a| a.len()), cfg.etas().len()),
    ];
    Ok(Report { outputs: vec![json_output("bound_states.json", &out)?], summary })
}

fn volume_rule(cfg: &RunConfig) -> Result<VolumeRule> {
    Ok(match cfg.source.rule {
        RuleChoice::Analytic => VolumeRule::Analytic,
        RuleChoice::Rays => VolumeRule::Rays(RayRule::default()),
        RuleChoice::Grid => VolumeRule::Grid(crate::krein::default_grid(&cfg.source.gaussian())?),
    })
}

fn nonrel(cfg: &RunConfig) -> Result<Report> {
    let d = cfg.discretization()?;
    let g = cfg.source.gaussian();
    let lambda = C64::new(cfg.nonrel.lambda[0], cfg.nonrel.lambda[1]);
    let targets = corner_targets(cfg.nonrel.target_half);
    let rows = nonrel_limit_experiment(cfg.physics.m, cfg.eta(), lambda, &cfg.nonrel.c_list, &d, &g, &targets, &volume_rule(cfg)?)?;
    let mut csv = String::from("c,deviation_M,deviation_resolvent\n");
    for r in &rows {
        writeln!(csv, "{},{},{}", fmt_float(r.c)?, fmt_float(r.deviation_m)?, fmt_float(r.deviation_resolvent)?).unwrap();
    }
    let cs: Vec<f64> = rows.iter().map(|r| r.c).collect();
    let dm: Vec<f64> = rows.iter().map(|r| r.deviation_m).collect();
    let summary = if rows.len() >= 2 {
        vec![format!("nonrel-limit: slope of log deviation_M vs log c = {:.4}", loglog_slope(&cs, &dm))]
    } else {
        vec!["nonrel-limit: single c, no slope".into()]
    };
    Ok(Report { outputs: vec![Output { name: "nonrel.csv".into(), bytes: csv.into_bytes() }], summary })
}

fn trace(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let d = cfg.discretization()?;
    let lambda = C64::new(cfg.trace.lambda[0], cfg.trace.lambda[1]);
    let r = trace_formula_check(&p, &d, lambda)?;
    finite(r.relative_gap, "trace gap")?;
    let out = json!({ "params": params_json(&p, &d), "trace": r });
    let summary = vec![format!("trace-check: relative gap {:.3e}, derivative gap {:.3e}", r.relative_gap, r.derivative_gap)];
    Ok(Report { outputs: vec![json_output("trace.json", &out)?], summary })
}

fn certify(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?.with_eta(0.0);
    let d = cfg.discretization()?;
    let surf = &d.surface;
    let w = certify_weyl_at_zero(&p, surf)?;
    let mut certs: Vec<NormCertificate> = Vec::new();
    let mut remainder = w.remainder.clone();
    remainder.measured_norm = Some(w.remainder_norm);
    certs.push(remainder);
    // the free kernel at 0: |G_0(x)| <= kappa1 (|x|^-2 near 0, e^{-mc|x|/2} far out)
    let kb = fit_free_kernel_bound(&p)?;
    certs.push(certify_operator_norm(CertificateKind::VolumeConv, &kb, Some(surf))?);
    certs.push(certify_operator_norm(CertificateKind::SurfToVol, &kb, Some(surf))?);
    let out = json!({ "params": params_json(&p, &d), "certificates": certs, "weyl_at_zero": w, "holds": w.holds() });
    let summary = vec![format!(
        "certify: ||M_N(0)|| = {:.6e} <= {:.6e} ({}), remainder {:.6e} <= {:.6e}",
        w.measured_norm,
        w.bound,
        if w.holds() { "holds" } else { "VIOLATED" },
        w.remainder_norm,
        w.remainder.bound
    )];
    Ok(Report { outputs: vec![json_output("certificates.json", &out)?], summary })
}

/// `kappa1` with `|G_0(x)| <= kappa1 tau(x)` for `R = 1`, `kappa2 = mc/2`, from a
/// logarithmic sample of radii.
pub fn fit_free_kernel_bound(p: &PhysParams) -> Result<KernelBound> {
    let kappa2 = 0.5 * p.m * p.c;
    let r0 = 1.0;
    let mut k1 = 0.0f64;
    for i in 0..=4000 {
        let r = 1e-4 * (1e6f64).powf(i as f64 / 4000.0);
        let g = crate::kernels::green_kernel(p, C64::from(0.0), &Vec3::new(r, 0.0, 0.0))?;
        let tau = if r <= r0 { r.powi(-2) } else { (-kappa2 * r).exp() };
        k1 = k1.max(g.singular_values().max() / tau);
    }
    Ok(KernelBound::new(k1, kappa2, r0))
}

fn oracle(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let d = cfg.discretization()?;
    let a = cfg.surface.radius;
    let grid = cfg.lambda_grid()?;
    let curve = scan_curves(&p, &d, &grid)?;
    let opts = BoundStateOptions { tol: cfg.tolerances.bisection };
    let roots = find_bound_states(&p, &d, &curve, opts)?;
    let levels = distinct_levels(&roots, 10.0 * opts.tol * p.rest_energy());
    let oracle = sphere_bound_states_radial(a, &p, cfg.oracle.kappa_max, cfg.oracle.scan_points)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (l, mult) in &levels {
        let near = oracle.iter().min_by(|x, y| (x.lambda - l).abs().total_cmp(&(y.lambda - l).abs()));
        if let Some(o) = near {
            let delta = (o.lambda - l).abs();
            worst = worst.max(delta);
            rows.push(json!({ "lambda": l, "multiplicity": mult, "oracle_lambda": o.lambda, "oracle_kappa": o.kappa, "oracle_multiplicity": o.multiplicity, "delta": delta }));
        }
    }
    let out = json!({ "params": params_json(&p, &d), "roots": rows, "oracle_roots": oracle, "max_delta": worst });
    let summary = vec![format!("oracle-compare: {} levels, {} oracle roots, max |dlambda| = {:.3e}", levels.len(), oracle.len(), worst)];
    Ok(Report { outputs: vec![json_output("oracle_compare.json", &out)?], summary })
}

/// Writes every output through a temporary file and a rename.
pub fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for o in outputs {
        let target = dir.join(&o.name);
        let tmp = dir.join(format!(".{}.tmp", o.name));
        std::fs::write(&tmp, &o.bytes)?;
        std::fs::rename(&tmp, &target)?;
        written.push(target);
    }
    Ok(written)
}
