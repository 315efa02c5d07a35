use std::f64::consts::PI;

use ndarray::Array2;
use tmholo::field::energy;
use tmholo::geometry::{Channel, SystemGeometry, PROTOTYPE_WAVELENGTHS};
use tmholo::propagation::{adjoint_of, Operator, Padding, Propagator};
use tmholo::{ComplexField, C64};

/// Direct first Rayleigh-Sommerfeld integral at one output point.
fn rayleigh_sommerfeld(u0: &Array2<C64>, pitch: f64, lambda: f64, z: f64, x: f64, y: f64) -> C64 {
    let n = u0.nrows() as f64;
    let k = 2.0 * PI / lambda;
    let mut acc = C64::new(0.0, 0.0);
    for ((r, c), &u) in u0.indexed_iter() {
        let dx = x - (c as f64 - n / 2.0) * pitch;
        let dy = y - (r as f64 - n / 2.0) * pitch;
        let d = (dx * dx + dy * dy + z * z).sqrt();
        acc += u * C64::new(1.0 / d, -k) * C64::from_polar(z / (2.0 * PI * d * d), k * d);
    }
    acc * pitch * pitch
}

#[test]
fn angular_spectrum_matches_rayleigh_sommerfeld() {
    let (n, lambda, pitch, w0, z) = (32usize, 450e-9, 2e-6, 8e-6, 0.5e-3);
    let centre = |i: usize| (i as f64 - n as f64 / 2.0) * pitch;
    let u0 = Array2::from_shape_fn((n, n), |(r, c)| {
        let (x, y) = (centre(c), centre(r));
        C64::new((-(x * x + y * y) / (w0 * w0)).exp(), 0.0)
    });
    let field = ComplexField::new(u0.clone(), (pitch, pitch), lambda).unwrap();
    let out = Propagator::new(Padding::Double).propagate_coherent(&field, z);
    let peak = out.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (r, c) in [(16, 16), (12, 18), (20, 11), (16, 24)] {
        let direct = rayleigh_sommerfeld(&u0, pitch, lambda, z, centre(c), centre(r));
        let rel = (direct - out.data()[[r, c]]).norm() / peak;
        assert!(rel < 1e-3, "({r}, {c}): {rel}");
    }
}

#[test]
fn forward_chain_adjoint_is_reverse_chain_of_adjoints() {
    let geom = SystemGeometry::new(20, 24, 8e-6, 8e-6, 0.1, PROTOTYPE_WAVELENGTHS).unwrap();
    let lambda = geom.wavelength(Channel::Red);
    let u = ComplexField::new(
        Array2::from_shape_fn((24, 20), |(r, c)| {
            C64::new((r as f64 * 0.7).sin(), (c as f64 * 1.3).cos())
        }),
        (geom.dx, geom.dy),
        lambda,
    )
    .unwrap();
    let v = ComplexField::new(
        Array2::from_shape_fn((24, 20), |(r, c)| {
            C64::new((r * c) as f64 % 3.0 - 1.0, (r as f64).cos())
        }),
        geom.fourier_pitch(Channel::Red),
        lambda,
    )
    .unwrap();
    let chain = [
        Operator::FourierLens(geom.clone()),
        Operator::SidebandFilter,
        Operator::Propagate {
            z: 0.01,
            adjoint: false,
        },
    ];
    let forward = chain.iter().fold(u.clone(), |acc, op| op.apply(&acc));
    let backward = chain
        .iter()
        .rev()
        .fold(v.clone(), |acc, op| adjoint_of(op).unwrap().apply(&acc));
    let lhs: C64 = forward.data().iter().zip(v.data()).map(|(a, b)| a * b.conj()).sum();
    let rhs: C64 = u.data().iter().zip(backward.data()).map(|(a, b)| a * b.conj()).sum();
    assert!((lhs - rhs).norm() / lhs.norm() < 1e-10);
    // The lens is unitary.
    let lensed = Operator::FourierLens(geom).apply(&u);
    assert!((energy(lensed.data()) - energy(u.data())).abs() / energy(u.data()) < 1e-12);
}
