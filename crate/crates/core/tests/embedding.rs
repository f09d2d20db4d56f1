use proptest::prelude::*;
use rydsat::embedding::{
    embed, optimize_hinge_angles, optimize_layout, residual_stats, transform_alpha,
    validate_geometry, EmbedOptions, Embedding, GeometryParams, HingeSpec, LayoutProblem,
    DEFAULT_C6_MHZ,
};
use rydsat::fixtures;
use rydsat::formula::Formula;
use rydsat::reduction::reduce;

fn default_embed(f: &Formula) -> Embedding {
    embed(
        &reduce(f),
        GeometryParams::default(),
        2,
        1,
        &EmbedOptions::default(),
    )
    .unwrap()
}

fn g1_hinges() -> (Embedding, HingeSpec) {
    let e = fixtures::g1_embedding();
    let spec = HingeSpec::detect(&e).unwrap();
    let spec = optimize_hinge_angles(&e, &spec, DEFAULT_C6_MHZ, 20);
    (e, spec)
}

#[test]
fn shipped_layouts_are_reproduced_and_valid() {
    let pairs = [
        (fixtures::psi1(), fixtures::g1_embedding()),
        (fixtures::psi2(), fixtures::g2_embedding()),
        (fixtures::psi3(), fixtures::g3_embedding()),
    ];
    for (f, shipped) in pairs {
        assert_eq!(default_embed(&f), shipped);
        assert!(validate_geometry(&shipped).is_empty());
    }
}

#[test]
fn fixture_structure() {
    let g1 = fixtures::g1_embedding();
    assert_eq!((g1.num_atoms(), g1.wires.len()), (8, 0));
    let g3 = fixtures::g3_embedding();
    assert_eq!((g3.num_atoms(), g3.wires.len()), (12, 2));
    assert!(g3.wires.iter().all(|w| w.chain.len() == 2));
}

#[test]
fn lone_segment() {
    let e = default_embed(&Formula::from_ints(2, &[&[1, 2]]));
    assert_eq!(e.num_atoms(), 2);
    assert!((e.distance(0, 1) - 7.0).abs() < 1e-9);
}

#[test]
fn triangle_gadget() {
    let e = default_embed(&fixtures::single_triangle());
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        assert!((e.distance(a, b) - 7.0).abs() <= e.params.edge_tolerance);
    }
}

#[test]
fn wires_have_even_length() {
    for e in [fixtures::g2_embedding(), fixtures::g3_embedding()] {
        assert!(!e.wires.is_empty());
        assert!(e.wires.iter().all(|w| w.chain.len() % 2 == 0));
    }
}

#[test]
fn optimizer_trace_is_monotone() {
    let e = fixtures::g1_embedding();
    let problem = LayoutProblem::new(
        e.num_atoms(),
        2,
        e.physical_edges.clone(),
        GeometryParams::default(),
        DEFAULT_C6_MHZ,
    );
    for seed in 0..5 {
        let result = optimize_layout(&problem, seed, true);
        for phase in &result.trace {
            for w in phase.windows(2) {
                assert!(w[1] <= w[0], "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn zero_alpha_is_identity() {
    let (e, spec) = g1_hinges();
    assert_eq!(transform_alpha(&e, 0.0, &spec).unwrap(), e);
    assert!(transform_alpha(&e, 1.5, &spec).is_err());
}

#[test]
fn alpha_sweep_residuals() {
    let (e, spec) = g1_hinges();
    let mean =
        |a: f64| residual_stats(&transform_alpha(&e, a, &spec).unwrap(), DEFAULT_C6_MHZ).mean;
    let (r0, r_half, r1) = (mean(0.0), mean(0.5), mean(1.0));
    assert!(r1 < r0, "{r0} -> {r1}");
    assert!(r1 <= r_half && r_half <= r0, "{r0} {r_half} {r1}");
    assert_eq!(transform_alpha(&e, 1.0, &spec).unwrap().dimension, 3);
}

#[test]
fn wired_layouts_have_no_hinges() {
    assert!(HingeSpec::detect(&fixtures::g3_embedding()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn folding_keeps_geometry_valid(alpha in 0.0f64..=1.0) {
        let (e, spec) = g1_hinges();
        let folded = transform_alpha(&e, alpha, &spec).unwrap();
        prop_assert!(validate_geometry(&folded).is_empty());
        for &(a, b) in &e.physical_edges {
            prop_assert!((folded.distance(a, b) - e.params.d).abs() <= e.params.edge_tolerance);
        }
    }
}
