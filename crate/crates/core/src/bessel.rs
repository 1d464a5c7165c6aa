//! Modified Bessel functions of the second kind K₀ and K₁ for complex
//! argument in the right half plane.
//!
//! |z| ≤ 2 uses the ascending series; beyond that Steed's continued fraction
//! (Temme's CF2 with ν = 0), which converges for every Re z > 0 and needs no
//! asymptotic truncation.

use num_complex::Complex;

use crate::error::{PatError, Result};
use crate::scalar::Real;

/// Result of a K₀/K₁ evaluation. `underflow` is set when `e^{-z}` is below
/// the smallest normal number and both values were returned as exact zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselK01<T> {
    pub k0: Complex<T>,
    pub k1: Complex<T>,
    pub underflow: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BesselOrder {
    Zero,
    One,
}

/// K₀(z) or K₁(z). The `bool` is the underflow flag.
pub fn modified_bessel_k<T: Real>(order: BesselOrder, z: Complex<T>) -> Result<(Complex<T>, bool)> {
    let r = bessel_k01(z)?;
    Ok(match order {
        BesselOrder::Zero => (r.k0, r.underflow),
        BesselOrder::One => (r.k1, r.underflow),
    })
}

/// K₀(z) and K₁(z) together; CQ needs both at each frequency.
pub fn bessel_k01<T: Real>(z: Complex<T>) -> Result<BesselK01<T>> {
    if !(z.re > T::zero()) || !z.im.is_finite() || !z.re.is_finite() {
        return Err(PatError::BesselDomain(format!("K0/K1 need Re z > 0, got {z}")));
    }
    let zero = Complex::new(T::zero(), T::zero());
    if z.re > -T::min_positive_value().ln() {
        return Ok(BesselK01 { k0: zero, k1: zero, underflow: true });
    }
    let (k0, k1) = if z.norm() <= T::lit(2.0) { series(z) } else { steed(z)? };
    Ok(BesselK01 { k0, k1, underflow: false })
}

fn series<T: Real>(z: Complex<T>) -> (Complex<T>, Complex<T>) {
    let one = Complex::new(T::one(), T::zero());
    let half = T::lit(0.5);
    let t = z * z * T::lit(0.25);
    let log_half = (z * half).ln();
    let euler = T::lit(0.577_215_664_901_532_9);

    // term_k = t^k/(k!)², psi_k = ψ(k+1)
    let mut term = one;
    let mut psi = -euler;
    let mut i0 = Complex::new(T::zero(), T::zero());
    let mut s0 = i0;
    // term1_k = t^k/(k!(k+1)!)
    let mut term1 = one;
    let mut i1s = i0;
    let mut s1 = i0;
    let eps = T::epsilon() * T::lit(0.25);
    for k in 0..200usize {
        let kf = T::from_usize_lossy(k);
        let psi_next = psi + T::one() / (kf + T::one());
        i0 += term;
        s0 += term * psi;
        i1s += term1;
        s1 += term1 * (psi + psi_next);
        if term.norm() < eps * i0.norm() && term1.norm() < eps * i1s.norm() && k > 2 {
            break;
        }
        term = term * t / ((kf + T::one()) * (kf + T::one()));
        term1 = term1 * t / ((kf + T::one()) * (kf + T::lit(2.0)));
        psi = psi_next;
    }
    let i1 = z * half * i1s;
    let k0 = -log_half * i0 + s0;
    let k1 = one / z + log_half * i1 - z * T::lit(0.25) * s1;
    (k0, k1)
}

fn steed<T: Real>(z: Complex<T>) -> Result<(Complex<T>, Complex<T>)> {
    let c1 = Complex::new(T::one(), T::zero());
    let half = T::lit(0.5);
    let mut b = (c1 + z) * T::lit(2.0);
    let mut d = c1 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = Complex::new(T::zero(), T::zero());
    let mut q2 = c1;
    let a1 = T::lit(0.25);
    let mut q = Complex::new(a1, T::zero());
    let mut c = q;
    let mut a = -a1;
    let mut s = c1 + delh * q;
    let eps = T::epsilon();
    let mut converged = false;
    for i in 2..100_000usize {
        let fi = T::from_usize_lossy(i);
        a -= T::lit(2.0) * (fi - T::one());
        c = -c * a / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += T::lit(2.0);
        d = c1 / (b + d * a);
        delh = (b * d - c1) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < eps * s.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(PatError::NotConverged(format!("K0/K1 continued fraction at z = {z}")));
    }
    h = h * a1;
    let pi = T::PI();
    let k0 = (Complex::new(pi, T::zero()) / (z * T::lit(2.0))).sqrt() * (-z).exp() / s;
    let k1 = k0 * (z + half - h) / z;
    Ok((k0, k1))
}
