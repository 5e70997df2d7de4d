//! Task registry and the suite runner: every task produces one [`CheckReport`], and errors inside
//! a task become failed reports instead of aborting the run.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use crate::config::{Resolved, RunConfig};
use crate::decompositions::{
    alpha_split, check_corollary1, check_corollary2, check_corollary3, decompose, DecomposeOptions, DecompositionKind,
};
use crate::error::{Error, Result};
use crate::fixtures::random_field;
use crate::geometry::{bianchi_residual_with_scale, covariant_derivative, trace, MetricField};
use crate::grid_field::{l2_norm, Slot, TensorField};
use crate::harmonic_classes::{classify, conservative_check};
use crate::operators::OperatorHandle;
use crate::report::{CheckReport, Status};
use crate::variations::{
    eh_criticality, eh_variation_check, example1_check, example2_check, harmonic_family_check, ricci_variation_check,
    scalar_variation_check, volume_variation_check, DEFAULT_STEP,
};

/// Every task id, in the order `suite` runs them when the configuration lists none.
pub const TASKS: &[&str] = &[
    "bianchi",
    "einstein-trace",
    "metric-compatibility",
    "adjointness",
    "theorem1",
    "energy",
    "decompose-berger-ebin",
    "decompose-york",
    "decompose-alpha",
    "classify",
    "conservative",
    "corollary1",
    "corollary2",
    "corollary3",
    "variation-ricci",
    "variation-scalar",
    "variation-eh",
    "variation-volume",
    "eh-criticality",
    "harmonic-family",
    "example1",
    "example2",
];

/// Tasks behind each CLI subcommand.
pub fn tasks_for(command: &str) -> Option<&'static [&'static str]> {
    Some(match command {
        "verify-geometry" => &["bianchi", "einstein-trace", "metric-compatibility", "adjointness", "example1", "example2"],
        "verify-map" => &["theorem1", "energy", "corollary1", "corollary2"],
        "classify" => &["classify", "conservative"],
        "variations" => &[
            "variation-ricci",
            "variation-scalar",
            "variation-eh",
            "variation-volume",
            "eh-criticality",
            "harmonic-family",
        ],
        "suite" => TASKS,
        _ => return None,
    })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SuiteOptions {
    /// Record `runtime_ms` in each report; off by default so reports are reproducible byte for byte.
    pub timings: bool,
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub reports: Vec<CheckReport>,
    /// 0 when every non-skipped check passed, 1 otherwise.
    pub exit_code: i32,
}

pub fn exit_code(reports: &[CheckReport]) -> i32 {
    i32::from(reports.iter().any(|r| r.status == Status::Fail))
}

/// Runs `cfg.tasks` (or every task when empty) in order.
pub fn run_suite(cfg: &RunConfig, opts: &SuiteOptions) -> Result<SuiteOutcome> {
    let ctx = cfg.resolve()?;
    let ids: Vec<String> = if cfg.tasks.is_empty() {
        TASKS.iter().map(|s| s.to_string()).collect()
    } else {
        cfg.tasks.clone()
    };
    let reports: Vec<CheckReport> = ids.iter().map(|id| run_task(id, &ctx, opts)).collect();
    let exit_code = exit_code(&reports);
    Ok(SuiteOutcome { reports, exit_code })
}

/// Runs one task. An unmet hypothesis gives a skipped report; any other error or a panic gives a
/// failed one.
pub fn run_task(id: &str, ctx: &Resolved, opts: &SuiteOptions) -> CheckReport {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| dispatch(id, ctx)));
    let mut rep = match outcome {
        Ok(Ok(r)) => r,
        Ok(Err(Error::Precondition(msg))) => {
            let mut r = CheckReport::new(id);
            r.skip(format!("precondition unmet on fixture: {msg}"));
            r
        }
        Ok(Err(e)) => {
            let mut r = CheckReport::new(id);
            r.fail(e.to_string());
            r
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            let mut r = CheckReport::new(id);
            r.fail(format!("internal error: {msg}"));
            r
        }
    };
    rep.check_id = id.to_string();
    rep.metadata.resolution = ctx.grid.resolution().to_vec();
    rep.metadata.seed = ctx.seed;
    for w in ctx.map.warnings() {
        if !rep.metadata.warnings.contains(w) {
            rep.metadata.warnings.push(w.clone());
        }
    }
    if opts.timings {
        rep.metadata.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    rep
}

fn decompose_opts(ctx: &Resolved) -> DecomposeOptions {
    DecomposeOptions {
        floor: ctx.tolerances.floor,
        ..Default::default()
    }
}

/// Harmonic part of the configured tensor, the source of harmonic directions.
fn harmonic_part(ctx: &Resolved) -> Result<TensorField<f64>> {
    let split = alpha_split(&ctx.tensor, &ctx.metric, &decompose_opts(ctx))?;
    Ok(split.part("phi_h").expect("alpha split has phi_h").clone())
}

/// The Einstein tensor when it is nonzero, otherwise `φ_TT + g` from the York splitting of the
/// configured tensor; both are divergence free.
fn conservative_tensor(ctx: &Resolved) -> Result<TensorField<f64>> {
    let g = &ctx.metric;
    let e = &g.curvature().einstein;
    if e.max_abs() > ctx.tolerances.floor.sqrt() {
        return Ok(e.clone());
    }
    let y = decompose(DecompositionKind::York, &ctx.tensor, g, &decompose_opts(ctx))?;
    Ok(y.part("phi_tt").expect("york has phi_tt") + g.g())
}

fn dispatch(id: &str, ctx: &Resolved) -> Result<CheckReport> {
    let g = &ctx.metric;
    let tol = &ctx.tolerances;
    let n = g.dim();
    let mut rep = CheckReport::new(id);
    match id {
        "bianchi" => {
            let (res, ric) = bianchi_residual_with_scale(g.as_ref());
            rep.residual("|div Ric + ds/2|", res, tol.bound(tol.rel(1e-6), ric));
            rep.value("|Ric|", ric);
        }
        "einstein-trace" => {
            let c = g.curvature();
            let mut d = trace(&c.einstein, g);
            d.axpy(-(1.0 - 0.5 * n as f64), &c.scalar);
            rep.residual("max |trace E - (1 - n/2) s|", d.max_abs(), tol.bound(1e-10, c.scalar.max_abs()));
        }
        "metric-compatibility" => {
            let ng = covariant_derivative(g.g(), g)?;
            rep.residual("max |nabla g|", ng.max_abs(), 1e-10);
        }
        "adjointness" => adjointness(&mut rep, g, ctx.seed, tol.rel(1e-8))?,
        "theorem1" => {
            let th = ctx.map.theorem1_residual()?;
            rep.residual("r2 (proof identity)", th.r2, tol.bound(tol.rel(1e-7), th.scale));
            rep.value("r1", th.r1)
                .value("tension norm", th.tension_norm)
                .value("scale", th.scale)
                .value("min singular ratio", th.converse.min_singular_ratio)
                .value("rank certified", f64::from(u8::from(th.converse.rank_certified)));
        }
        "energy" => {
            let e = ctx.map.energy()?;
            let vol = g.volume();
            rep.value("E(f)", e.energy).value("Vol", vol).value("(n/2) Vol", 0.5 * n as f64 * vol);
            rep.value("constant map", f64::from(u8::from(e.constant_map)));
        }
        "decompose-berger-ebin" | "decompose-york" | "decompose-alpha" => {
            let kind = match id {
                "decompose-berger-ebin" => DecompositionKind::BergerEbin,
                "decompose-york" => DecompositionKind::York,
                _ => DecompositionKind::Alpha,
            };
            let res = decompose(kind, &ctx.tensor, g, &decompose_opts(ctx))?;
            rep = res.diagnostics.to_report(tol);
        }
        "classify" => {
            let phi = harmonic_part(ctx)?;
            let c = classify(&phi, g, tol.rel(1e-6), tol.floor)?;
            rep.residual("pythagoras defect", c.pythagoras_defect, tol.rel(1e-8));
            rep.residual("|K outside W|", c.off_w_norm, tol.bound(tol.rel(1e-6), c.harmonic_residual.scale));
            for (k, v) in c.constraint_residuals.iter().enumerate() {
                rep.residual(format!("K{} defining condition", k + 1), *v, tol.rel(1e-8));
            }
            for (k, v) in c.component_norms.iter().enumerate() {
                rep.value(format!("|K{}|", k + 1), *v);
            }
            rep.value("|K|", c.total_norm)
                .value("killing residual", c.structure_residuals.killing)
                .value("codazzi residual", c.structure_residuals.codazzi)
                .value("sinyukov residual", c.structure_residuals.sinyukov);
            let label = if c.class_label.is_empty() { "none".to_string() } else { c.class_label.join("+") };
            rep.warn(format!("class label: {label}"));
        }
        "conservative" => rep = conservative_check(&conservative_tensor(ctx)?, g, tol)?,
        "corollary1" => rep = check_corollary1(&ctx.map, tol)?,
        "corollary2" => rep = check_corollary2(&ctx.map, tol)?,
        "corollary3" => {
            if n < 3 {
                rep.skip("precondition unmet on fixture: corollary3 needs n >= 3");
            } else {
                rep = check_corollary3(g, tol)?;
            }
        }
        "variation-ricci" => rep = ricci_variation_check(g.as_ref(), &ctx.tensor, DEFAULT_STEP, tol)?.to_report(tol, 1e-5),
        "variation-scalar" => rep = scalar_variation_check(g.as_ref(), &ctx.tensor, DEFAULT_STEP, tol)?.to_report(tol, 1e-5),
        "variation-eh" => {
            let v = eh_variation_check(g.as_ref(), &harmonic_part(ctx)?, DEFAULT_STEP, tol)?;
            if g.curvature().ricci.max_abs() <= tol.floor {
                rep.skip("precondition unmet on fixture: the predicted variation vanishes identically (Ric = 0); see eh-criticality");
            } else {
                rep = v.to_report(tol, 1e-5);
            }
        }
        "variation-volume" => rep = volume_variation_check(g.as_ref(), &ctx.tensor, DEFAULT_STEP, tol)?.to_report(tol, 1e-5),
        "eh-criticality" => {
            if g.curvature().ricci.max_abs() > tol.floor {
                rep.skip("precondition unmet on fixture: metric is not flat");
            } else {
                let mut phi = harmonic_part(ctx)?;
                let size = l2_norm(&phi, g);
                if size <= tol.floor {
                    return Err(Error::Precondition("harmonic direction vanishes".into()));
                }
                phi = phi.scaled(1.0 / size);
                let c = eh_criticality(g.as_ref(), &phi, DEFAULT_STEP)?;
                rep.residual("|dS/dt| (Richardson, unit direction)", c.richardson.abs(), tol.rel(1e-8));
                rep.value("central difference at t", c.central).value("central difference at t/2", c.central_half);
            }
        }
        "harmonic-family" => {
            let phi = harmonic_part(ctx)?;
            rep = harmonic_family_check(g, &phi, &[-0.1, -0.05, 0.05, 0.1], tol)?;
        }
        "example1" => rep = example1_check(g, tol)?,
        "example2" => {
            if n != 3 {
                rep.skip("precondition unmet on fixture: cross curvature needs n = 3");
            } else {
                rep = example2_check(g, tol)?;
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown task {other:?}; known tasks: {}",
                TASKS.join(", ")
            )))
        }
    }
    Ok(rep)
}

/// Adjoint defects `|⟨Ax, y⟩ − ⟨x, A*y⟩|` over ten seeded pairs for each operator.
fn adjointness(rep: &mut CheckReport, g: &Arc<MetricField<f64>>, seed: u64, tol: f64) -> Result<()> {
    let ops = [
        ("killing", OperatorHandle::killing(g.clone())),
        ("alpha", OperatorHandle::alpha(g.clone())),
        ("conformal-killing", OperatorHandle::conformal_killing(g.clone())),
        ("gradient", OperatorHandle::gradient(g.clone())),
        ("sym3", OperatorHandle::sym3(g.clone())),
    ];
    let grid = g.grid();
    for (name, op) in &ops {
        let mut worst = 0.0f64;
        for k in 0..10u64 {
            let s = seed.wrapping_mul(1000).wrapping_add(k);
            let x = random_field(grid, &vec![Slot::Lower; op.domain_rank()], true, s, 3);
            let y = random_field(grid, &vec![Slot::Lower; op.codomain_rank()], true, s ^ 0xa5a5_0000, 3);
            worst = worst.max(op.adjoint_defect(&x, &y)?);
        }
        rep.residual(format!("{name} adjoint defect (max over 10 pairs)"), worst, tol);
    }
    Ok(())
}
