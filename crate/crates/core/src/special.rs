//! Spherical Bessel kernels and the cylindrical J0.

/// j0(z) = sin z / z.
pub fn sph_j0(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        1.0 - z2 / 6.0 * (1.0 - z2 / 20.0)
    } else {
        z.sin() / z
    }
}

/// j1(z) = sin z / z² − cos z / z.
pub fn sph_j1(z: f64) -> f64 {
    if z.abs() < 1.0 {
        let z2 = z * z;
        let mut acc = 1.0;
        for n in (1..=8).rev() {
            let n = n as f64;
            acc = 1.0 - z2 / (2.0 * n * (2.0 * n + 3.0)) * acc;
        }
        z / 3.0 * acc
    } else {
        (z.sin() / z - z.cos()) / z
    }
}

/// Cylindrical Bessel J0 via the trapezoid rule on its integral representation,
/// which converges geometrically for periodic integrands.
pub fn bessel_j0(z: f64) -> f64 {
    let n = 32 + (z.abs() * 1.5) as usize;
    let h = std::f64::consts::PI / n as f64;
    let mut s = 1.0;
    for i in 1..n {
        s += (z * (i as f64 * h).sin()).cos();
    }
    s / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spherical_bessel_branches_join_smoothly() {
        for &z in &[1e-3, 1.0] {
            let lo = z * (1.0 - 4e-16);
            let hi = z * (1.0 + 4e-16);
            assert!((sph_j0(lo) - sph_j0(hi)).abs() < 1e-14);
            assert!((sph_j1(lo) - sph_j1(hi)).abs() < 1e-14);
        }
        assert!((sph_j1(2.0) - 0.435_397_774_979_992).abs() < 1e-14);
    }

    #[test]
    fn j0_reference_values() {
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
    }
}
