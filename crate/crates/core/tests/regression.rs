use tmholo::encoding::BinaryForm;
use tmholo::geometry::{Channel, SystemGeometry, PROTOTYPE_PITCH, PROTOTYPE_WAVELENGTHS};
use tmholo::io::{read_pbm, write_pbm};
use tmholo::optimizer::{optimize, reconstruct_stack, Method, Objective, OptConfig};
use tmholo::propagation::default_propagator;
use tmholo::scenes;
use tmholo::target::multiplane_to_target;

fn setup() -> (tmholo::target::TargetStack, SystemGeometry) {
    let images = scenes::independent((32, 32), 2, 4);
    let stack = multiplane_to_target(&images, 0.015, Channel::Blue).unwrap();
    let geom = SystemGeometry::fitted(32, 32, PROTOTYPE_PITCH, PROTOTYPE_PITCH, 0.05, PROTOTYPE_WAVELENGTHS).unwrap();
    (stack, geom)
}

#[test]
fn bsgd_lowers_the_loss_for_every_seed() {
    let (stack, geom) = setup();
    for seed in 0..5 {
        let cfg = OptConfig {
            seed,
            iterations: 100,
            ..OptConfig::default()
        };
        let (b, trace) = optimize(&stack, &geom, &cfg).unwrap();
        assert_eq!(b.form(), BinaryForm::Device);
        assert_eq!(trace.losses.len(), 100);
        assert!(trace.final_loss < trace.initial_loss, "seed {seed}: {trace:?}");
    }
}

#[test]
fn bsgd_beats_both_baselines_on_loss() {
    let (stack, geom) = setup();
    let objective = Objective::new(&stack, &geom).unwrap();
    let loss = |method| {
        let cfg = OptConfig {
            method,
            seed: 3,
            ..OptConfig::default()
        };
        let (b, _) = optimize(&stack, &geom, &cfg).unwrap();
        objective.evaluate(&b.signed_values()).unwrap().loss()
    };
    let bsgd = loss(Method::Bsgd);
    assert!(bsgd < loss(Method::Gs));
    assert!(bsgd < loss(Method::Random));
}

#[test]
fn written_hologram_reconstructs_identically() {
    let (stack, geom) = setup();
    let cfg = OptConfig {
        iterations: 10,
        ..OptConfig::default()
    };
    let (b, _) = optimize(&stack, &geom, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.pbm");
    write_pbm(&path, &b).unwrap();
    let back = read_pbm(&path, b.seed, b.channel).unwrap();
    assert_eq!(back, b);
    let depths = stack.depths();
    let a = reconstruct_stack(&b, &geom, &depths, default_propagator()).unwrap();
    let c = reconstruct_stack(&back, &geom, &depths, default_propagator()).unwrap();
    assert_eq!(a, c);
}
