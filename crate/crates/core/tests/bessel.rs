mod common;

use common::bessel_oracle as oracle;
use num_complex::Complex64 as C;
use pat_core::bessel::bessel_k01;

fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn oracle_routes_agree_where_they_overlap() {
    for &arg in &[0.0, 0.7, -1.2, 1.5] {
        let z = C::from_polar(0.4, arg);
        for nu in 0..2 {
            assert!(rel(oracle::integral(nu, z), oracle::series(nu, z)) < 1e-12, "nu={nu} z={z}");
        }
        let z = C::from_polar(30.0, arg);
        for nu in 0..2 {
            assert!(rel(oracle::integral(nu, z), oracle::asymptotic(nu, z)) < 1e-11, "nu={nu} z={z}");
        }
    }
}

#[test]
fn reference_values() {
    let k = bessel_k01(C::new(1.0, 0.0)).unwrap();
    assert!((k.k0.re - 0.421_024_438_240_708_34).abs() < 1e-10);
    assert!((k.k1.re - 0.601_907_230_197_234_6).abs() < 1e-10);
    assert!((oracle::k(0, C::new(1.0, 0.0)).re - 0.421_024_438_240_708_34).abs() < 1e-12);
}

#[test]
fn matches_oracle_on_right_half_plane() {
    let mut worst = 0.0f64;
    for i in 0..=24 {
        let r = 0.05 * (700.0f64 / 0.05).powf(i as f64 / 24.0);
        for &arg in &[-1.5, -1.0, -0.4, 0.0, 0.4, 1.0, 1.5] {
            let z = C::from_polar(r, arg);
            let got = bessel_k01(z).unwrap();
            assert!(!got.underflow);
            worst = worst.max(rel(got.k0, oracle::k(0, z))).max(rel(got.k1, oracle::k(1, z)));
        }
    }
    assert!(worst < 1e-10, "worst relative error {worst:e}");
}
