use isq_core::grid::{GridFunction, HalfSpaceGrid};
use isq_core::sqfn::{GStarParams, HalfSpaceField, Reach};
use isq_core::weights::{ap_constant, lp_norm_with, weak_lp_with, Cube, CubeFamily, Weight};
use proptest::prelude::*;

const H: f64 = 0.125;
const CELLS: usize = 12;
const M: usize = 8;

fn grid(values: Vec<f64>) -> GridFunction {
    GridFunction::from_values(1, &[-0.75], H, &[CELLS], values).unwrap()
}

fn levels() -> HalfSpaceGrid {
    HalfSpaceGrid::covering(0.25, 4.0, 2).unwrap()
}

fn field(f: &GridFunction, alpha: f64, x: f64) -> HalfSpaceField {
    HalfSpaceField::intrinsic(f, alpha, M, &levels(), &Reach::point(&[x], 2.0, 4.0).unwrap(), None).unwrap()
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, CELLS)
}

fn alpha() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0)]
}

fn node() -> impl Strategy<Value = f64> {
    (-8i32..=16).prop_map(|k| k as f64 * H)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn area_is_absolutely_homogeneous(v in samples(), c in -4.0f64..4.0, a in alpha(), x in node()) {
        let f = grid(v);
        let s = field(&f, a, x).area(&[x], 1.0).unwrap();
        let sc = field(&f.scaled(c), a, x).area(&[x], 1.0).unwrap();
        prop_assert!(close(sc, c.abs() * s, 1e-7), "{sc} vs {}", c.abs() * s);
    }

    #[test]
    fn area_is_subadditive(u in samples(), v in samples(), a in alpha(), x in node()) {
        let (f, g) = (grid(u), grid(v));
        let sum = f.combine(1.0, &g, 1.0).unwrap();
        let lhs = field(&sum, a, x).area(&[x], 1.0).unwrap();
        let rhs = field(&f, a, x).area(&[x], 1.0).unwrap() + field(&g, a, x).area(&[x], 1.0).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-7) + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn area_commutes_with_lattice_translations(v in samples(), a in alpha(), x in node(), k in -6i32..6) {
        let f = grid(v);
        let s = k as f64 * H;
        let lhs = field(&f.translated(&[s]), a, x + s).area(&[x + s], 1.0).unwrap();
        let rhs = field(&f, a, x).area(&[x], 1.0).unwrap();
        prop_assert!(close(lhs, rhs, 1e-7), "{lhs} vs {rhs}");
    }

    #[test]
    fn area_grows_with_aperture(v in samples(), a in alpha(), x in node(), b in 0.25f64..1.0) {
        let f = grid(v);
        let fd = field(&f, a, x);
        prop_assert!(fd.area(&[x], b).unwrap() <= fd.area(&[x], 2.0 * b).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn gstar_decreases_in_lambda_and_dominates_area(v in samples(), a in alpha(), x in node(), l in 1.1f64..4.0) {
        let fd = field(&grid(v), a, x);
        let lo = fd.gstar(&[x], &GStarParams::new(l, 4.0).unwrap()).unwrap();
        let hi = fd.gstar(&[x], &GStarParams::new(2.0 * l, 4.0).unwrap()).unwrap();
        prop_assert!(hi <= lo * (1.0 + 1e-12));
        let sum = fd.gstar_sum(&[x], &GStarParams::new(l, 4.0).unwrap()).unwrap();
        prop_assert!(close(sum.partitioned(), sum.direct, 1e-10));
        // on |x - y| < t the g* weight is at least 2^{-λn}
        let area = fd.area(&[x], 1.0).unwrap();
        prop_assert!(area * 0.5f64.powf(l / 2.0) <= lo * (1.0 + 1e-9), "{area} {lo}");
    }

    #[test]
    fn weak_norm_is_bounded_by_strong_norm(
        v in prop::collection::vec(-10.0f64..10.0, 1..64),
        cells in prop::collection::vec(0.01f64..3.0, 64),
        p in 0.5f64..4.0,
    ) {
        let m = &cells[..v.len()];
        let weak = weak_lp_with(&v, m, p).unwrap();
        let strong = lp_norm_with(&v, m, p).unwrap();
        prop_assert!(weak <= strong * (1.0 + 1e-12), "{weak} > {strong}");
    }

    #[test]
    fn ap_constant_is_at_least_one(s in 0.0f64..1.0, p in 1.5f64..4.0) {
        let gamma = -0.9 + s * 0.9 * p;
        let w = Weight::power(1, &[0.0], gamma).unwrap();
        let fam = CubeFamily::new(1, Cube::new(&[0.0], 4.0).unwrap(), 4).unwrap();
        let c = ap_constant(&w, p, &fam).unwrap();
        prop_assert!(c >= 1.0 - 1e-9 && c.is_finite(), "{c}");
    }
}
