use approx::assert_relative_eq;
use proptest::prelude::*;

use harmap_core::expr::parse_expression;
use harmap_core::fixtures::{self, bump_metric, conformal_t2};
use harmap_core::geometry::{lower_all, raise_all, trace, MetricField};
use harmap_core::grid_field::{Grid, TensorField};
use harmap_core::harmonic_classes::{bar, bar_inverse};
use harmap_core::operators::OperatorHandle;
use harmap_core::report::{from_json, to_json, CheckReport};
use harmap_core::Metric;
use std::sync::Arc;

fn bump(seed: u64, amplitude: f64) -> Metric {
    bump_metric(&Grid::uniform(3, 8).unwrap(), seed, amplitude)
}

fn max_diff(a: &TensorField<f64>, b: &TensorField<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|v| format!("{}", v as f64 / 8.0)),
        (1usize..=3).prop_map(|i| format!("x{i}")),
        Just("pi".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "^"]), inner.clone())
                .prop_map(|(a, op, b)| format!("{a} {op} {b}")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.clone().prop_map(|a| format!("({a})")),
            (prop::sample::select(vec!["sin", "cos", "exp", "sqrt", "log"]), inner)
                .prop_map(|(f, a)| format!("{f}({a})")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn report_json_is_a_fixpoint(
        id in "[a-z][a-z0-9-]{0,12}",
        rows in prop::collection::vec(("[a-z ]{1,8}", -1e6f64..1e6, 0.0f64..1.0), 0..5),
        seed in any::<u64>(),
        skipped in any::<bool>(),
    ) {
        let mut r = CheckReport::new(id).with_metadata(&[8, 8], seed);
        for (name, v, tol) in rows {
            r.residual(name.clone(), v.abs(), tol);
            r.value(format!("{name}/value"), v);
        }
        if skipped {
            r.skip("precondition unmet on fixture");
        }
        let text = to_json(&[r.clone()]);
        let back = from_json(&text).unwrap();
        prop_assert_eq!(&back[0].check_id, &r.check_id);
        prop_assert_eq!(back[0].status, r.status);
        prop_assert_eq!(to_json(&back), text);
    }

    #[test]
    fn raise_and_lower_are_inverse(seed in 0u64..500, amp in 0.0f64..0.15) {
        let g = bump(seed, amp);
        for t in [fixtures::random_one_form(g.grid(), seed, 3), fixtures::random_sym2(g.grid(), seed, 3)] {
            let back = lower_all(&raise_all(&t, &g), &g);
            prop_assert!(max_diff(&back, &t) <= 1e-12 * t.max_abs());
        }
    }

    #[test]
    fn einstein_trace_identity(seed in 0u64..500, amp in 0.01f64..0.15) {
        let g = bump(seed, amp);
        let c = g.curvature();
        let te = trace(&c.einstein, &g);
        // trace_g E = (1 − n/2) s
        let want = c.scalar.scaled(-0.5);
        prop_assert!(max_diff(&te, &want) <= 1e-10 * c.scalar.max_abs().max(1.0));
    }

    #[test]
    fn handle_adjoints_hold_for_random_data(seed in 0u64..10_000, kmax in 1usize..5, amp in 0.0f64..0.15) {
        let g = Arc::new(bump(seed % 7, amp));
        let theta = fixtures::random_one_form(g.grid(), seed, kmax);
        let phi = fixtures::random_sym2(g.grid(), seed ^ 0xff, kmax);
        for op in [OperatorHandle::killing(g.clone()), OperatorHandle::alpha(g.clone()), OperatorHandle::conformal_killing(g.clone())] {
            let d = op.adjoint_defect(&theta, &phi).unwrap();
            prop_assert!(d <= 1e-12, "{}: {d:e}", op.name);
        }
    }

    #[test]
    fn bar_inverts_in_dimension_three(seed in 0u64..500, amp in 0.0f64..0.15) {
        let g = bump(seed, amp);
        let phi = fixtures::random_sym2(g.grid(), seed, 2);
        let back = bar_inverse(&bar(&phi, &g), &g).unwrap();
        prop_assert!(max_diff(&back, &phi) <= 1e-12 * phi.max_abs());
    }

    #[test]
    fn display_reparses_to_the_same_function(text in expr_text(), x in prop::array::uniform3(-3.0f64..3.0)) {
        let e = parse_expression(&text).unwrap();
        let shown = e.to_string();
        let again = parse_expression(&shown).unwrap();
        prop_assert_eq!(again.to_string(), shown.clone());
        match (e.eval(&x), again.eval(&x)) {
            (Ok(a), Ok(b)) => prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()), "{text} vs {shown}: {a} {b}"),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{text} vs {shown}: {a:?} {b:?}"),
        }
    }
}

#[test]
fn bar_is_singular_in_dimension_two() {
    let g: Metric = conformal_t2(8);
    let phi = fixtures::random_sym2(g.grid(), 1, 2);
    assert!(bar_inverse(&bar(&phi, &g), &g).is_err());
    // g itself is trace-reversed to zero
    let gb = bar(g.g(), &g);
    assert!(gb.max_abs() < 1e-14);
}

#[test]
fn flat_metric_raises_trivially() {
    let g = MetricField::<f64>::flat(&Grid::uniform(2, 8).unwrap());
    let t = fixtures::random_sym2::<f64>(g.grid(), 3, 2);
    let up = raise_all(&t, &g);
    assert_relative_eq!(up.data()[..], t.data()[..], epsilon = 0.0);
}
