//! The twelve acceptance criteria, run in order at their stated tolerances. One line per criterion
//! goes to stderr. Criteria listed in `KNOWN_DEFECTS` are reported but do not fail the test; for
//! each of them a corrected variant is asserted instead.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use harmap_core::config::RunConfig;
use harmap_core::decompositions::{
    alpha_split, decompose, dimension_identity, york, york_trace_defect, DecomposeOptions, DecompositionKind,
    DecompositionResult,
};
use harmap_core::expr::parse_expression;
use harmap_core::fixtures::{self, default_resolution, MetricFixture};
use harmap_core::geometry::bianchi_residual_with_scale;
use harmap_core::grid_field::{l2_inner_product, l2_norm, Slot, TensorField};
use harmap_core::harmonic_classes::{
    build_k_basis, classify, flat_codazzi_from_potential, sinyukov_residual, structure_residuals,
};
use harmap_core::maps::{ConstantCodomain, ExprCodomain, TorusMap};
use harmap_core::operators::{divergence, killing_operator, OperatorHandle};
use harmap_core::report::{to_json, Tolerances};
use harmap_core::suite::{run_suite, SuiteOptions};
use harmap_core::variations::{
    eh_criticality, eh_variation_check, perturbed, ricci_variation_check, scalar_variation_check, VariationResult,
    DEFAULT_STEP,
};
use harmap_core::{Field, Metric};

/// Criteria whose stated form is contradicted by a derivation; see the notes shown with them.
const KNOWN_DEFECTS: &[usize] = &[6];

struct Outcome {
    pass: bool,
    notes: Vec<String>,
    /// For known defects: whether the corrected variant holds.
    corrected: Option<bool>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            notes: Vec::new(),
            corrected: None,
        }
    }

    fn check(&mut self, ok: bool, note: impl Into<String>) {
        let note = note.into();
        if !ok {
            self.pass = false;
            self.notes.push(format!("FAILED {note}"));
        } else {
            self.notes.push(note);
        }
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }
}

fn say(line: &str) {
    let mut e = std::io::stderr().lock();
    let _ = writeln!(e, "{line}");
}

fn metric(fx: MetricFixture) -> Arc<Metric> {
    Arc::new(fx.build(default_resolution(fx.dim())))
}

fn harmonic_part(phi: &Field, g: &Arc<Metric>) -> Field {
    alpha_split(phi, g, &DecomposeOptions::default())
        .unwrap()
        .part("phi_h")
        .unwrap()
        .clone()
}

fn bump_fixtures() -> Vec<MetricFixture> {
    (1..=3).map(|seed| MetricFixture::Bump3 { seed }).collect()
}

// 1 ---------------------------------------------------------------------------------------------

fn contracted_bianchi() -> Outcome {
    let mut o = Outcome::new();
    let floor = Tolerances::default().floor;
    for fx in MetricFixture::standard() {
        let g = metric(fx);
        let (res, ric) = bianchi_residual_with_scale(g.as_ref());
        o.check(res <= 1e-6 * ric.max(floor), format!("{}: |div Ric + ds/2| = {res:.2e}, |Ric| = {ric:.2e}", fx.name()));
    }
    o
}

// 2 ---------------------------------------------------------------------------------------------

fn flat_domain(n: usize, res: usize) -> Arc<Metric> {
    Arc::new(fixtures::flat(n, res))
}

fn map_fixtures() -> Vec<(&'static str, TorusMap<f64>, bool)> {
    let e2 = || -> Arc<ConstantCodomain> { Arc::new(ConstantCodomain::euclidean(2)) };
    let dom = flat_domain(2, 32);
    let zero = |g: &Arc<Metric>, m: usize| vec![TensorField::constant(g.grid(), 0.0); m];
    let sample = |g: &Arc<Metric>, text: &str| {
        harmap_core::maps::sample_expression::<f64>(g.grid(), &parse_expression(text).unwrap()).unwrap()
    };
    let mut out = Vec::new();
    out.push((
        "identity flat T2",
        TorusMap::new(dom.clone(), e2(), vec![vec![1, 0], vec![0, 1]], zero(&dom, 2)).unwrap(),
        true,
    ));
    out.push((
        "linear W = [[2,1],[0,1]]",
        TorusMap::new(dom.clone(), e2(), vec![vec![2, 1], vec![0, 1]], zero(&dom, 2)).unwrap(),
        true,
    ));
    out.push((
        "wave u = (0.1 sin x1 cos x2, 0)",
        TorusMap::new(
            dom.clone(),
            e2(),
            vec![vec![1, 0], vec![0, 1]],
            vec![sample(&dom, "0.1*sin(x1)*cos(x2)"), sample(&dom, "0")],
        )
        .unwrap(),
        false,
    ));
    let conf = Arc::new(fixtures::conformal_t2::<f64>(32));
    out.push((
        "identity conformal T2 -> flat",
        TorusMap::new(conf.clone(), e2(), vec![vec![1, 0], vec![0, 1]], zero(&conf, 2)).unwrap(),
        true,
    ));
    let bump = metric(MetricFixture::Bump3 { seed: 1 });
    out.push((
        "projection bump T3 -> flat T2",
        TorusMap::new(bump.clone(), e2(), vec![vec![1, 0, 0], vec![0, 1, 0]], zero(&bump, 2)).unwrap(),
        false,
    ));
    let c = parse_expression("exp(0.2*sin(x1))").unwrap();
    let z = parse_expression("0").unwrap();
    let cod = Arc::new(ExprCodomain::new(2, vec![vec![c.clone(), z.clone()], vec![z, c]]).unwrap());
    out.push((
        "flat T2 -> conformal target, u = (0.05 sin x2, 0)",
        TorusMap::new(dom.clone(), cod, vec![vec![1, 0], vec![0, 1]], vec![sample(&dom, "0.05*sin(x2)"), sample(&dom, "0")])
            .unwrap(),
        false,
    ));
    out
}

fn theorem1_both_directions() -> Outcome {
    let mut o = Outcome::new();
    let floor = Tolerances::default().floor;
    for (name, f, _) in map_fixtures() {
        let r = f.theorem1_residual().unwrap();
        o.check(r.r2 <= 1e-7 * r.scale + floor, format!("{name}: r2 = {:.2e} (scale {:.2e})", r.r2, r.scale));
        if name.starts_with("wave") {
            o.check(r.r1_relative(floor) > 1e-3, format!("{name}: r1 relative = {:.2e} > 1e-3", r.r1_relative(floor)));
        }
    }
    // identity maps built from harmonic directions
    let conf = metric(MetricFixture::Conformal2);
    let phi = harmonic_part(&fixtures::random_sym2(conf.grid(), 1, 2), &conf);
    let bump = metric(MetricFixture::Bump3 { seed: 1 });
    let ric = bump.curvature().ricci.clone();
    for (name, g, phi) in [("conformal T2, phi_h", conf, phi), ("bump T3, Ric", bump, ric)] {
        let dir = phi.scaled(1.0 / phi.max_abs());
        let target = perturbed(g.as_ref(), &dir, 0.1).unwrap();
        let f = TorusMap::identity_to(g.clone(), &target).unwrap();
        let r = f.theorem1_residual().unwrap();
        o.check(
            r.r1_relative(floor) <= 1e-7,
            format!("id: g -> g + 0.1 phi ({name}): r1 relative = {:.2e}", r.r1_relative(floor)),
        );
    }
    o
}

// 3 ---------------------------------------------------------------------------------------------

fn energy_anchor() -> Outcome {
    let mut o = Outcome::new();
    let g = flat_domain(2, 32);
    let f = TorusMap::identity(g.clone(), Arc::new(ConstantCodomain::euclidean(2))).unwrap();
    let e = f.energy().unwrap().energy;
    let want = 4.0 * PI * PI;
    let rel = (e - want).abs() / want;
    o.check(rel <= 1e-10, format!("E(id) = {e:.15}, (n/2) Vol = {want:.15}, relative gap {rel:.1e}"));
    o
}

// 4 ---------------------------------------------------------------------------------------------

const KINDS: [DecompositionKind; 3] = [DecompositionKind::BergerEbin, DecompositionKind::York, DecompositionKind::Alpha];

fn node_weights(g: &Metric) -> Vec<f64> {
    let cell = g.grid().cell_volume::<f64>();
    g.sqrt_det().data().iter().map(|w| w * cell).collect()
}

/// Dense `M`-orthogonal projection of `φ` onto the span of the columns of `A`, where `M` is the
/// grid quadrature with `g^{ia} g^{jb}` contraction. Columns come from applying the operators to
/// unit fields; the normal equations are solved with a dense Cholesky factorization.
fn dense_projection(kind: DecompositionKind, phi: &Field, g: &Arc<Metric>) -> Field {
    let grid = g.grid();
    let n = g.dim();
    let m = grid.len();
    let rows = n * n * m;
    let one_form_cols = n * m;
    let extra = if kind == DecompositionKind::York { m } else { 0 };
    let cols = one_form_cols + extra;
    let op = |theta: &Field| -> Field {
        match kind {
            DecompositionKind::BergerEbin | DecompositionKind::York => killing_operator(theta, g),
            DecompositionKind::Alpha => harmap_core::operators::alpha_g(theta, g),
        }
    };
    let flatten = |t: &Field, out: &mut [f64]| {
        // row index: (i*n + j)*m + node
        for i in 0..n {
            for j in 0..n {
                out[(i * n + j) * m..(i * n + j + 1) * m].copy_from_slice(t.comp(&[i, j]));
            }
        }
    };
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut unit = TensorField::zeros(grid, &[Slot::Lower]);
    let mut col = vec![0.0; rows];
    for k in 0..one_form_cols {
        unit.data_mut()[k] = 1.0;
        flatten(&op(&unit), &mut col);
        a.column_mut(k).copy_from_slice(&col);
        unit.data_mut()[k] = 0.0;
    }
    for p in 0..extra {
        for i in 0..n {
            for j in 0..n {
                a[((i * n + j) * m + p, one_form_cols + p)] = g.g().get(&[i, j], p);
            }
        }
    }
    let w = node_weights(g);
    let ginv = g.g_inv();
    let apply_m = |v: &[f64], out: &mut [f64]| {
        for p in 0..m {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for a_ in 0..n {
                        for b in 0..n {
                            s += ginv.get(&[i, a_], p) * ginv.get(&[j, b], p) * v[(a_ * n + b) * m + p];
                        }
                    }
                    out[(i * n + j) * m + p] = w[p] * s;
                }
            }
        }
    };
    let mut ma = DMatrix::<f64>::zeros(rows, cols);
    let mut buf = vec![0.0; rows];
    for k in 0..cols {
        apply_m(a.column(k).as_slice(), &mut buf);
        ma.column_mut(k).copy_from_slice(&buf);
    }
    let mut gram = a.tr_mul(&ma);
    let mut f = vec![0.0; rows];
    flatten(phi, &mut f);
    let rhs = ma.tr_mul(&DVector::from_vec(f));
    let shift = 1e-14 * (0..cols).map(|k| gram[(k, k)]).fold(0.0f64, f64::max);
    for k in 0..cols {
        gram[(k, k)] += shift;
    }
    let c = gram.cholesky().expect("regularized normal matrix is definite").solve(&rhs);
    let img = &a * c;
    let mut out = TensorField::zeros(grid, &[Slot::Lower, Slot::Lower]);
    for i in 0..n {
        for j in 0..n {
            out.comp_mut(&[i, j]).copy_from_slice(&img.as_slice()[(i * n + j) * m..(i * n + j + 1) * m]);
        }
    }
    out
}

fn decomposition_checks(o: &mut Outcome, name: &str, res: &DecompositionResult<f64>) {
    let d = &res.diagnostics;
    let worst_orth = d.orthogonality.iter().filter(|x| x.asserted).map(|x| x.relative).fold(0.0, f64::max);
    let worst_cond = d.conditions.iter().map(|c| c.relative).fold(0.0, f64::max);
    o.check(
        d.reconstruction <= 1e-6 && worst_orth <= 1e-6 && worst_cond <= 1e-6,
        format!(
            "{name} {}: reconstruction {:.1e}, orthogonality {:.1e}, conditions {:.1e}",
            d.kind.as_str(),
            d.reconstruction,
            worst_orth,
            worst_cond
        ),
    );
}

fn decomposition_suite() -> Outcome {
    let mut o = Outcome::new();
    let t = Instant::now();
    for fx in MetricFixture::standard() {
        let g = metric(fx);
        let phi = fixtures::random_sym2(g.grid(), 1, 2);
        for kind in KINDS {
            let res = decompose(kind, &phi, &g, &DecomposeOptions::default()).unwrap();
            decomposition_checks(&mut o, &fx.name(), &res);
        }
    }
    o.note(format!("decompositions at default resolution: {:.1} s", t.elapsed().as_secs_f64()));
    let t = Instant::now();
    for fx in [MetricFixture::Flat2, MetricFixture::Conformal2, MetricFixture::Bump3 { seed: 1 }] {
        let g: Arc<Metric> = Arc::new(fx.build(8));
        let phi = fixtures::random_sym2(g.grid(), 5, 2);
        let norm = l2_norm(&phi, &g);
        for kind in KINDS {
            let res = decompose(kind, &phi, &g, &DecomposeOptions::default()).unwrap();
            let dense = dense_projection(kind, &phi, &g);
            let gap = l2_norm(&(&res.image_part() - &dense), &g) / norm;
            o.check(gap <= 1e-8, format!("dense oracle N=8 {} {}: |image - dense| / |phi| = {gap:.1e}", fx.name(), kind.as_str()));
        }
    }
    o.note(format!("dense oracle: {:.1} s (budget 300 s)", t.elapsed().as_secs_f64()));
    o
}

// 5 ---------------------------------------------------------------------------------------------

fn adjointness() -> Outcome {
    let mut o = Outcome::new();
    for fx in MetricFixture::standard() {
        let g = metric(fx);
        let grid = g.grid();
        let killing = OperatorHandle::killing(g.clone());
        let alpha = OperatorHandle::alpha(g.clone());
        let (mut wk, mut wa, mut wp) = (0.0f64, 0.0f64, 0.0f64);
        for seed in 0..10u64 {
            let theta = fixtures::random_one_form(grid, 100 + seed, 3);
            let phi = fixtures::random_sym2(grid, 200 + seed, 3);
            wk = wk.max(killing.adjoint_defect(&theta, &phi).unwrap());
            wa = wa.max(alpha.adjoint_defect(&theta, &phi).unwrap());
            // pointwise divergence route: ⟨δ*θ, φ⟩ against ⟨θ, δφ⟩
            let ks = killing_operator(&theta, &g);
            let dphi = divergence(&phi, &g).unwrap();
            let lhs = l2_inner_product(&ks, &phi, &g).unwrap();
            let rhs = l2_inner_product(&theta, &dphi, &g).unwrap();
            let scale = l2_norm(&ks, &g) * l2_norm(&phi, &g) + l2_norm(&theta, &g) * l2_norm(&dphi, &g);
            wp = wp.max((lhs - rhs).abs() / scale);
        }
        o.check(wk <= 1e-8 && wa <= 1e-8, format!("{}: killing {wk:.1e}, alpha {wa:.1e} (10 pairs)", fx.name()));
        o.check(wp <= 1e-8, format!("{}: pointwise divergence pair {wp:.1e}", fx.name()));
    }
    o
}

// 6 ---------------------------------------------------------------------------------------------

fn york_of_ricci() -> Outcome {
    let mut o = Outcome::new();
    let mut corrected = true;
    let mut fxs = vec![MetricFixture::Flat3];
    fxs.extend(bump_fixtures());
    for fx in fxs {
        let g = metric(fx);
        let mut ric = g.curvature().ricci.clone();
        if ric.max_abs() <= Tolerances::default().floor {
            ric = TensorField::zeros(g.grid(), ric.slots());
        }
        let res = york(&ric, &g, &DecomposeOptions::default()).unwrap();
        let defect = york_trace_defect(&ric, &res, &g).unwrap();
        let id = dimension_identity(&res, &g);
        let floor = Tolerances::default().floor;
        let stated = id.stated / id.scale.max(floor);
        let derived = id.corrected / id.scale.max(floor);
        o.check(defect <= 1e-8, format!("{}: max |s + div(theta) - n lambda| = {defect:.1e}", fx.name()));
        o.check(
            id.stated <= 1e-6 * id.scale + floor,
            format!("{}: |sampson(theta) - (n-2) d lambda| / scale = {stated:.1e} (stated sign)", fx.name()),
        );
        let ok = id.corrected <= 1e-6 * id.scale + floor && defect <= 1e-8;
        corrected &= ok;
        o.note(format!("{}: |sampson(theta) + (n-2) d lambda| / scale = {derived:.1e} (derived sign)", fx.name()));
    }
    o.corrected = Some(corrected);
    o
}

// 7 ---------------------------------------------------------------------------------------------

fn variation_ok(o: &mut Outcome, name: &str, v: &VariationResult<f64>) {
    let q = v.convergence_ratio;
    o.check(
        v.rel_error <= 1e-5 && q.is_some_and(|q| (q - 4.0).abs() <= 1.0),
        format!("{name} {}: rel_error {:.1e}, ratio {}", v.name, v.rel_error, q.map_or("n/a".into(), |q| format!("{q:.3}"))),
    );
}

fn variation_formulas() -> Outcome {
    let mut o = Outcome::new();
    let tol = Tolerances::default();
    let mut fxs = vec![MetricFixture::Conformal2];
    fxs.extend(bump_fixtures());
    for fx in fxs {
        let g = metric(fx);
        let phi = fixtures::random_sym2(g.grid(), 11, 2);
        variation_ok(&mut o, &fx.name(), &ricci_variation_check(g.as_ref(), &phi, DEFAULT_STEP, &tol).unwrap());
        variation_ok(&mut o, &fx.name(), &scalar_variation_check(g.as_ref(), &phi, DEFAULT_STEP, &tol).unwrap());
        if fx.dim() == 3 {
            // Ric is a harmonic direction by the contracted Bianchi identity
            let ric = g.curvature().ricci.clone();
            variation_ok(&mut o, &fx.name(), &eh_variation_check(g.as_ref(), &ric, DEFAULT_STEP, &tol).unwrap());
        }
    }
    for fx in [MetricFixture::Flat2, MetricFixture::Flat3] {
        let g = metric(fx);
        let phi = harmonic_part(&fixtures::random_sym2(g.grid(), 11, 2), &g);
        let phi = phi.scaled(1.0 / l2_norm(&phi, &g));
        let c = eh_criticality(g.as_ref(), &phi, DEFAULT_STEP).unwrap();
        o.check(
            c.richardson.abs() <= 1e-8,
            format!(
                "{}: dS/dt along a unit harmonic direction: {:.1e} (central differences {:.1e} at t, {:.1e} at t/2)",
                fx.name(),
                c.richardson,
                c.central,
                c.central_half
            ),
        );
    }
    o
}

// 8 ---------------------------------------------------------------------------------------------

fn harmonic_families() -> Outcome {
    let mut o = Outcome::new();
    let tol = Tolerances::default();
    for fx in MetricFixture::standard() {
        let g = metric(fx);
        let mut worst = 0.0f64;
        let mut legs = 0;
        for seed in 1..=3 {
            let phi = harmonic_part(&fixtures::random_sym2(g.grid(), 20 + seed, 2), &g);
            let phi = phi.scaled(1.0 / phi.max_abs());
            let rep = harmap_core::variations::harmonic_family_check(&g, &phi, &[-0.1, -0.05, 0.05, 0.1], &tol).unwrap();
            for r in &rep.residuals {
                worst = worst.max(r.value / r.tolerance.max(f64::MIN_POSITIVE));
            }
            legs += rep.residuals.len();
            o.check(rep.passed() && rep.skipped_legs.is_empty(), format!("{} direction {seed}: {} residuals", fx.name(), rep.residuals.len()));
        }
        o.note(format!("{}: {legs} residuals, worst value/bound {worst:.1e}", fx.name()));
    }
    o
}

// 9 ---------------------------------------------------------------------------------------------

fn classifier() -> Outcome {
    let mut o = Outcome::new();
    for n in [2, 3] {
        let b = build_k_basis(n).unwrap();
        let (w, k1, k2, k3) = b.dims();
        o.check(w == k1 + k2 + k3, format!("n = {n}: dim W = {w} = {k1} + {k2} + {k3}"));
    }
    let floor = Tolerances::default().floor;
    let conf = metric(MetricFixture::Conformal2);
    let bump1 = metric(MetricFixture::Bump3 { seed: 1 });
    let mut cases: Vec<(String, Arc<Metric>, Field)> = vec![
        ("conformal-T2 phi_h".into(), conf.clone(), harmonic_part(&fixtures::random_sym2(conf.grid(), 1, 2), &conf)),
        ("bump-T3-seed1 phi_h".into(), bump1.clone(), harmonic_part(&fixtures::random_sym2(bump1.grid(), 1, 2), &bump1)),
    ];
    for fx in bump_fixtures() {
        let g = metric(fx);
        let ric = g.curvature().ricci.clone();
        cases.push((format!("{} Ric", fx.name()), g, ric));
    }
    for (name, g, phi) in cases {
        let c = classify(&phi, &g, 1e-6, floor).unwrap();
        let worst = c.constraint_residuals.iter().copied().fold(0.0, f64::max);
        let mut labels_stable = true;
        for s in [1e-3, 1e3] {
            let cs = classify(&phi.scaled(s), &g, 1e-6, floor).unwrap();
            labels_stable &= cs.class_label == c.class_label;
        }
        o.check(
            c.pythagoras_defect <= 1e-8 && worst <= 1e-8 && labels_stable,
            format!(
                "{name}: label {:?}, |K_a| = {:.2e}/{:.2e}/{:.2e}, pythagoras {:.1e}, conditions {:.1e}, labels stable under 1e±3: {labels_stable}",
                c.class_label, c.component_norms[0], c.component_norms[1], c.component_norms[2], c.pythagoras_defect, worst
            ),
        );
    }
    o
}

// 10 --------------------------------------------------------------------------------------------

fn structure_oracles() -> Outcome {
    let mut o = Outcome::new();
    for n in [2, 3] {
        let g = fixtures::flat::<f64>(n, 16);
        let grid = g.grid().clone();
        let f = TensorField::scalar_from_fn(&grid, |x: [f64; 3]| (x[0]).sin() * (2.0 * x[1]).cos() + 0.3 * (x[n - 1]).cos());
        let cp = flat_codazzi_from_potential(&f, &g).unwrap();
        o.check(cp.codazzi_residual <= 1e-9, format!("flat T{n}: Codazzi residual of a Hessian {:.1e}", cp.codazzi_residual));
        let c = [[1.5, 0.2, -0.3], [0.2, 0.7, 0.1], [-0.3, 0.1, 2.0]];
        let k = TensorField::from_constant_matrix(&grid, &c);
        let s = structure_residuals(&k, &g).unwrap();
        o.check(s.killing <= 1e-12, format!("flat T{n}: Killing residual of a constant tensor {:.1e}", s.killing));
    }
    for fx in [MetricFixture::Flat3, MetricFixture::Conformal2, MetricFixture::Bump3 { seed: 1 }] {
        let g = metric(fx);
        let r = sinyukov_residual(g.g(), &g).unwrap();
        o.check(r <= 1e-12, format!("{}: Sinyukov defect of omega = g {r:.1e}", fx.name()));
    }
    o
}

// 11 --------------------------------------------------------------------------------------------

fn parser_corpus() -> Outcome {
    let mut o = Outcome::new();
    let x = [1.0, 2.0, 3.0];
    let values: &[(&str, [f64; 3], f64)] = &[
        ("1 + 0.1*sin(x1)*cos(2*x2)", [0.0; 3], 1.0),
        ("2^3^2", x, 512.0),
        ("-2^2", x, -4.0),
        ("(-2)^2", x, 4.0),
        ("2^-1", x, 0.5),
        ("2+3*4", x, 14.0),
        ("8/4/2", x, 1.0),
        ("8-4-2", x, 2.0),
        ("--3", x, 3.0),
        ("x1*x2 + x3", x, 5.0),
        ("sqrt(16) + 1.5e1", x, 19.0),
        ("pi", x, PI),
    ];
    for (text, at, want) in values {
        let got = parse_expression(text).and_then(|e| Ok(e.eval(at))).map(|r| r.ok());
        o.check(got == Ok(Some(*want)), format!("{text:?} -> {got:?}"));
    }
    let errors: &[(&str, usize, &str)] = &[
        ("sin(x1", 6, ")"),
        ("1 +", 3, "number"),
        ("(1", 2, ")"),
        ("3*)", 2, "("),
        ("1 2", 2, "end of input"),
        ("sin x1", 4, "("),
        ("foo(1)", 0, "function"),
        ("x4", 0, "x3"),
    ];
    for (text, offset, expected) in errors {
        match parse_expression(text) {
            Ok(_) => o.check(false, format!("{text:?} parsed")),
            Err(e) => o.check(
                e.offset == *offset && e.expected.iter().any(|s| s == expected),
                format!("{text:?} -> offset {} expected {:?}", e.offset, e.expected),
            ),
        }
    }
    let x1 = parse_expression("x1").unwrap();
    let s = parse_expression("sin(x1)").unwrap();
    o.check(x1.check_periodic(2).is_err(), "periodicity validator rejects \"x1\"");
    o.check(s.check_periodic(2).is_ok(), "periodicity validator accepts \"sin(x1)\"");
    o
}

// 12 --------------------------------------------------------------------------------------------

fn determinism() -> Outcome {
    let mut o = Outcome::new();
    let cfgs = [
        r#"{"manifold": {"dim": 2}, "metric": "conformal-T2", "seed": 2,
            "tasks": ["bianchi", "adjointness", "theorem1", "decompose-york", "decompose-alpha", "classify", "variation-ricci", "harmonic-family"]}"#,
        r#"{"manifold": {"dim": 3, "resolution": 12}, "metric": "bump-T3", "seed": 3,
            "tasks": ["bianchi", "decompose-berger-ebin", "variation-scalar", "example1", "example2"]}"#,
    ];
    for text in cfgs {
        let cfg = RunConfig::from_json(text).unwrap();
        let a = to_json(&run_suite(&cfg, &SuiteOptions::default()).unwrap().reports);
        let b = to_json(&run_suite(&cfg, &SuiteOptions::default()).unwrap().reports);
        o.check(a == b, format!("dim {} seed {}: {} bytes, identical = {}", cfg.manifold.dim, cfg.seed, a.len(), a == b));
    }
    o
}

// -----------------------------------------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(usize, &str, fn() -> Outcome)> = vec![
        (1, "contracted Bianchi identity", contracted_bianchi),
        (2, "pullback-divergence identity, both directions", theorem1_both_directions),
        (3, "energy of the identity on flat T2", energy_anchor),
        (4, "decomposition suite and dense oracle", decomposition_suite),
        (5, "adjointness", adjointness),
        (6, "York splitting of Ric", york_of_ricci),
        (7, "variation formulas", variation_formulas),
        (8, "harmonic metric families", harmonic_families),
        (9, "K-space classifier", classifier),
        (10, "structure residual oracles", structure_oracles),
        (11, "expression parser", parser_corpus),
        (12, "determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    let mut summary = Vec::new();
    for (id, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        let secs = t.elapsed().as_secs_f64();
        let status = if o.pass { "PASS" } else { "FAIL" };
        let line = format!("criterion {id:>2} [{status}] {name} ({secs:.1} s)");
        say(&line);
        for n in &o.notes {
            say(&format!("    {n}"));
        }
        if KNOWN_DEFECTS.contains(&id) {
            let fixed = o.corrected.unwrap_or(false);
            say(&format!("    known defect: corrected variant {}", if fixed { "holds" } else { "FAILS" }));
            if !fixed {
                unexpected.push(id);
            }
        } else if !o.pass {
            unexpected.push(id);
        }
        summary.push(line);
    }
    say("summary:");
    for l in &summary {
        say(&format!("  {l}"));
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
