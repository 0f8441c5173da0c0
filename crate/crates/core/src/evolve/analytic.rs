use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qmath::ComplexMatrix;

/// `sin(w t / 2) / w`, continuous at `w = 0`.
fn sin_half_over(w: f64, t: f64) -> f64 {
    let x = 0.5 * w * t;
    if x.abs() < 1e-8 {
        0.5 * t * (1.0 - x * x / 6.0)
    } else {
        (0.5 * w * t).sin() / w
    }
}

/// Closed-form two-qubit propagator for a rectangular drive on one qubit.
///
/// `qubit` is 0 or 1, `t` the pulse length, `t0` its absolute start time,
/// `phi` the drive phase, `a` the Rabi rate and `jzz` the ZZ coupling (both
/// rad/s). The drive on one qubit rotates it at rate `a` while the partner is
/// in `|g>`, and at the generalized rate `sqrt(a^2 + jzz^2)` with a
/// `t0`-dependent phase while the partner is in `|e>`.
pub fn analytic_propagator(qubit: usize, t: f64, t0: f64, phi: f64, a: f64, jzz: f64) -> Result<ComplexMatrix> {
    if qubit > 1 {
        return Err(Error::Unsupported(format!(
            "closed-form propagator covers qubits 0 and 1 of a pair, got qubit {qubit}"
        )));
    }
    let omega = (a * a + jzz * jzz).sqrt();
    let (c, s) = ((0.5 * a * t).cos(), (0.5 * a * t).sin());
    let cw = (0.5 * omega * t).cos();
    let sw = sin_half_over(omega, t);

    // Partner-in-|g> block: an ordinary rotation.
    let g00 = Complex64::new(c, 0.0);
    let g01 = -Complex64::from_polar(s, -phi);
    let g10 = Complex64::from_polar(s, phi);
    let g11 = g00;

    // Partner-in-|e> block.
    let e00 = Complex64::from_polar(1.0, 0.5 * jzz * t) * Complex64::new(cw, -jzz * sw);
    let e01 = -Complex64::from_polar(a * sw, 0.5 * jzz * (t + 2.0 * t0) - phi);
    let e10 = Complex64::from_polar(a * sw, -(0.5 * jzz * (t + 2.0 * t0) - phi));
    let e11 = Complex64::from_polar(1.0, -0.5 * jzz * t) * Complex64::new(cw, jzz * sw);

    let mut u = ComplexMatrix::zeros(4, 4);
    // Index pairs (partner g, partner e) that the driven qubit connects.
    let (g_pair, e_pair) = if qubit == 0 { ((0, 2), (1, 3)) } else { ((0, 1), (2, 3)) };
    for ((lo, hi), [m00, m01, m10, m11]) in [(g_pair, [g00, g01, g10, g11]), (e_pair, [e00, e01, e10, e11])] {
        u[(lo, lo)] = m00;
        u[(lo, hi)] = m01;
        u[(hi, lo)] = m10;
        u[(hi, hi)] = m11;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::model::mhz_to_angular;
    use crate::qmath::{kron, max_abs_diff, unitarity_error, ComplexVector};

    const NS: f64 = 1e-9;

    fn single_rotation(theta: f64, phi: f64) -> ComplexMatrix {
        let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
        ComplexMatrix::from_row_slice(
            2,
            2,
            &[c.into(), -Complex64::from_polar(s, -phi), Complex64::from_polar(s, phi), c.into()],
        )
    }

    #[test]
    fn pi_rotation_flips_first_qubit() {
        let a = PI / (50.0 * NS);
        let u = analytic_propagator(0, 50.0 * NS, 0.0, 0.0, a, 0.0).unwrap();
        let out = &u * ComplexVector::from_vec(vec![1.0.into(), 0.0.into(), 0.0.into(), 0.0.into()]);
        assert!((out[2].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduces_to_local_rotation_without_coupling() {
        let (a, t, phi) = (2.3e7, 40.0 * NS, 0.7);
        let r = single_rotation(a * t, phi);
        let id = ComplexMatrix::identity(2, 2);
        let u0 = analytic_propagator(0, t, 12.0 * NS, phi, a, 0.0).unwrap();
        let u1 = analytic_propagator(1, t, 12.0 * NS, phi, a, 0.0).unwrap();
        assert!(max_abs_diff(&u0, &kron(&r, &id)) < 1e-12);
        assert!(max_abs_diff(&u1, &kron(&id, &r)) < 1e-12);
    }

    #[test]
    fn unitary_for_coupled_drive() {
        let j = mhz_to_angular(-4.37);
        for q in 0..2 {
            let u = analytic_propagator(q, 50.0 * NS, 33.0 * NS, -FRAC_PI_2, mhz_to_angular(5.0), j).unwrap();
            assert!(unitarity_error(&u) < 1e-12);
        }
    }

    #[test]
    fn semigroup_with_start_time_bookkeeping() {
        let (a, j, phi, t0) = (mhz_to_angular(5.0), mhz_to_angular(-4.37), 0.4, 7.0 * NS);
        let (ta, tb) = (18.0 * NS, 31.0 * NS);
        for q in 0..2 {
            let whole = analytic_propagator(q, ta + tb, t0, phi, a, j).unwrap();
            let first = analytic_propagator(q, ta, t0, phi, a, j).unwrap();
            let second = analytic_propagator(q, tb, t0 + ta, phi, a, j).unwrap();
            assert!(max_abs_diff(&whole, &(second * first)) < 1e-10);
        }
    }

    #[test]
    fn rejects_third_qubit() {
        assert!(matches!(analytic_propagator(2, 1e-8, 0.0, 0.0, 1e7, 0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_drive_zero_coupling_is_identity() {
        let u = analytic_propagator(1, 50.0 * NS, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(max_abs_diff(&u, &ComplexMatrix::identity(4, 4)) < 1e-15);
    }
}
