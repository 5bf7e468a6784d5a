use halfsign_core::cusp::{build_cusp_triple, ContourSpec, CuspTriple};
use halfsign_core::qforms::build_desk_form;
use halfsign_core::voronoi::{progression_two_route, residual_decay, truncation_report, VoronoiParams};
use std::sync::OnceLock;

fn triple() -> &'static CuspTriple {
    static T: OnceLock<CuspTriple> = OnceLock::new();
    T.get_or_init(|| {
        let f = build_desk_form(10_001).unwrap();
        build_cusp_triple(&f, &ContourSpec::default(), 1e-6).unwrap()
    })
}

#[test]
fn two_routes_on_full_grid() {
    let f = &triple().f;
    for q in (1..=45u64).step_by(2) {
        for a in 0..q {
            for x in [1e2, 1e3, 1e4] {
                let r = progression_two_route(x, a, q, f).unwrap();
                assert!(r.passed, "{r:?}");
            }
        }
    }
}

#[test]
fn residual_shrinks_from_64_to_4096() {
    let t = triple();
    for d in [1u64, 3, 5] {
        let fit = residual_decay(8000.0, 64, &[64, 4096], d, 0, t).unwrap();
        let (lo, hi) = (fit.median_residuals[0], fit.median_residuals[1]);
        assert!(hi < lo, "d={d}: median residual {lo} at M=64, {hi} at M=4096");
    }
}

#[test]
fn compare_example() {
    let t = triple();
    let p = VoronoiParams::new(1000.0, 256, 1, 0, 4).unwrap();
    let r = truncation_report(&p, t).unwrap();
    assert!(r.main_imag.abs() < 1e-9 * r.main_term.abs().max(1.0));
    assert!(r.residual < 1.0, "{r:?}");
}
