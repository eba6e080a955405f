use proptest::prelude::*;

use lipsub::convex::{sphere_grid, PolyhedralNorm};
use lipsub::embed::mazur_map;
use lipsub::exec::Exec;
use lipsub::frag::{derive_once, szlenk_from, szlenk_index};
use lipsub::metric::{make_model, mcshane_extend, pairwise_lip, BitopModel, FiniteMetric, ModelSpec};

fn line_model(points: &[f64]) -> BitopModel {
    let ids = (0..points.len()).map(|i| i.to_string()).collect();
    let d = FiniteMetric::from_fn(ids, |i, j| (points[i] - points[j]).abs());
    BitopModel::new(d.clone(), d, 0.01).unwrap()
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    v
}

fn norm_strategy() -> impl Strategy<Value = PolyhedralNorm> {
    prop_oneof![
        Just(PolyhedralNorm::l1(2)),
        Just(PolyhedralNorm::linf(2)),
        Just(PolyhedralNorm::l1(3)),
        Just(PolyhedralNorm::linf(3)),
        Just(PolyhedralNorm::hexagon()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extension_keeps_data_and_range(
        pts in prop::collection::vec(-10.0f64..10.0, 3..40),
        raw in prop::collection::vec(-1.0f64..1.0, 40),
        mask in prop::collection::vec(any::<bool>(), 40),
    ) {
        let pts = distinct(pts);
        prop_assume!(pts.len() >= 2);
        let m = line_model(&pts);
        let mut subset: Vec<usize> = (0..pts.len()).filter(|&i| mask[i]).collect();
        if subset.is_empty() {
            subset.push(0);
        }
        let values: Vec<f64> = subset.iter().map(|&i| raw[i]).collect();
        let own = pairwise_lip(m.restrict(&subset).unwrap().d(), &values, Exec::Sequential).value;
        let l = own.max(0.5);
        let f = mcshane_extend(&m, &subset, &values, l, (-1.0, 1.0)).unwrap();
        for (&h, v) in subset.iter().zip(&values) {
            prop_assert_eq!(f.values()[h], *v);
        }
        prop_assert!(f.values().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn sequential_and_parallel_scans_agree(values in prop::collection::vec(-5.0f64..5.0, 2..80)) {
        let m = make_model(&ModelSpec::IntervalGrid { n: values.len() }).unwrap();
        let a = pairwise_lip(m.d(), &values, Exec::Sequential);
        let b = pairwise_lip(m.d(), &values, Exec::Parallel);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn polyhedral_norm_axioms(
        n in norm_strategy(),
        x in prop::collection::vec(-3.0f64..3.0, 3),
        y in prop::collection::vec(-3.0f64..3.0, 3),
        t in -4.0f64..4.0,
    ) {
        let k = n.dim();
        let (x, y) = (&x[..k], &y[..k]);
        let nx = n.norm_eval(x).unwrap();
        let ny = n.norm_eval(y).unwrap();
        let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        prop_assert!(n.norm_eval(&sum).unwrap() <= nx + ny + 1e-9);
        let tx: Vec<f64> = x.iter().map(|a| t * a).collect();
        prop_assert!((n.norm_eval(&tx).unwrap() - t.abs() * nx).abs() <= 1e-9 * (1.0 + nx));
        let pairing: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        prop_assert!(pairing.abs() <= nx * n.dual_norm(y).unwrap() + 1e-9);
    }

    #[test]
    fn dual_norm_attained_on_extreme_points(n in norm_strategy(), x in prop::collection::vec(-3.0f64..3.0, 3)) {
        let x = &x[..n.dim()];
        let dual = n.polar_vertices().unwrap();
        let best = dual
            .ext_points
            .iter()
            .map(|y| y.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((best - n.norm_eval(x).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn mazur_round_trip(x in prop::collection::vec(-1.0f64..1.0, 1..10), i in 0usize..4, j in 0usize..4) {
        let qs = [1.0, 1.5, 2.0, 3.0];
        let (q1, q2) = (qs[i], qs[j]);
        let back = mazur_map(&mazur_map(&x, q1, q2).unwrap(), q2, q1).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn derivation_shrinks_and_restarts(n in 1usize..10, eps in 0.2f64..2.0) {
        let m = make_model(&ModelSpec::fan(n)).unwrap();
        let delta = m.delta().min(eps / 4.0);
        let all: Vec<usize> = (0..m.len()).collect();
        let once = derive_once(&m, &all, eps, delta).unwrap();
        prop_assert!(once.iter().all(|x| all.contains(x)));
        let trace = szlenk_index(&m, eps, delta).unwrap();
        for k in 0..trace.levels.len() {
            let rest = szlenk_from(&m, &trace.levels[k], eps, delta, Exec::default()).unwrap();
            prop_assert_eq!(&rest.levels[..], &trace.levels[k..]);
        }
    }

    #[test]
    fn sphere_grids_are_unit(n in 1usize..=3, res in 2usize..12) {
        for p in sphere_grid(n, res).unwrap() {
            let r: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((r - 1.0).abs() <= 1e-12);
        }
    }
}
