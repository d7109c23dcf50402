use iwkb::oracle::{discretize_to_steps, transfer_matrix_scatter, StepPotential};
use iwkb::piecewise::{chain_eiconal, PiecewiseModel, Segment};
use iwkb::potential::{tortoise_map, PhysicalParams, PotentialSpec};
use proptest::prelude::*;

/// Random step sequence whose outer heights stay below `energy`.
fn steps() -> impl Strategy<Value = (StepPotential, f64)> {
    (0.2f64..1.0, 0.0f64..0.95, 0.0f64..0.95, prop::collection::vec((0.1f64..3.0, 0.0f64..1.5), 1..12)).prop_map(|(e, l, r, cells)| {
        let mut edges = vec![-1.0, 0.0];
        let mut heights = vec![l * e];
        for (w, v) in cells {
            edges.push(edges[edges.len() - 1] + w);
            heights.push(v);
        }
        edges.push(edges[edges.len() - 1] + 1.0);
        heights.push(r * e);
        (StepPotential::new(edges, heights).unwrap(), e)
    })
}

fn exponential_model() -> impl Strategy<Value = (PiecewiseModel, f64)> {
    (-0.2f64..0.3, -0.3f64..0.3, 2.0f64..30.0, 0.5f64..39.5).prop_map(|(a, b, c, split)| {
        let m = PiecewiseModel::new(vec![Segment::exponential(a, b, c, 0.0, 40.0).unwrap()], 0.64).unwrap();
        (m, split)
    })
}

proptest! {
    #[test]
    fn oracle_conserves_flux((s, e) in steps()) {
        let r = transfer_matrix_scatter(&s, e).unwrap();
        prop_assert!((r.transmission + r.reflection - 1.0).abs() <= 1e-10);
        prop_assert!(r.transmission >= 0.0 && r.reflection >= 0.0);
    }

    #[test]
    fn oracle_is_reciprocal((s, e) in steps()) {
        let h = s.heights().to_vec();
        let mut h2 = h.clone();
        let last = h2.len() - 1;
        h2[last] = h[0];
        let sym = StepPotential::new(s.edges().to_vec(), h2).unwrap();
        let fwd = transfer_matrix_scatter(&sym, e).unwrap();
        let back = transfer_matrix_scatter(&sym.reversed(), e).unwrap();
        prop_assert!((fwd.transmission - back.transmission).abs() <= 1e-10);
    }

    #[test]
    fn eiconal_increases_and_survives_splitting((m, split) in exponential_model()) {
        let whole = chain_eiconal(&m, 0.0).unwrap();
        let s = m.segments()[0];
        let halves = PiecewiseModel::new(
            vec![
                Segment::exponential(s.a, s.b, s.c, 0.0, split).unwrap(),
                Segment::exponential(s.a, s.b, s.c, split, 40.0).unwrap(),
            ],
            0.64,
        )
        .unwrap();
        let halves = chain_eiconal(&halves, 0.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let x = 0.1 * i as f64;
            let u = whole.eiconal(x).unwrap();
            prop_assert!(u > prev);
            prop_assert!((u - halves.eiconal(x).unwrap()).abs() <= 1e-10);
            prev = u;
        }
    }

    #[test]
    fn tortoise_is_strictly_increasing(r in 1.9f64..500.0, dr in 1e-6f64..10.0) {
        let p = PhysicalParams::reference();
        prop_assume!(r > iwkb::potential::horizon_radius(&p).unwrap());
        prop_assert!(tortoise_map(&p, r + dr).unwrap() > tortoise_map(&p, r).unwrap());
    }
}

#[test]
fn oracle_refinement_gaps_shrink_for_a_smooth_ramp() {
    let ramp = PotentialSpec::Exponential { a: 0.3, b: -0.3, c: 30.0 };
    let t = |n: usize| transfer_matrix_scatter(&discretize_to_steps(&ramp, n, 0.0, 150.0).unwrap(), 0.64).unwrap().transmission;
    let ts: Vec<f64> = [64, 128, 256, 512, 1024, 2048].iter().map(|&n| t(n)).collect();
    let gaps: Vec<f64> = ts.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for g in gaps.windows(2) {
        assert!(g[1] < g[0], "gaps {gaps:?}");
    }
}
