//! K₀/K₁ by three independent routes: harmonic-number power series for
//! small |z|, the integral K_ν(z) = ∫₀^∞ e^{-z cosh t} cosh(νt) dt for the
//! middle range and the Hankel asymptotic expansion for large |z|.

use num_complex::Complex64 as C;

const EULER: f64 = 0.577_215_664_901_532_9;

/// A&S 9.6.13 and 9.6.11 written with harmonic numbers.
pub fn series(nu: u32, z: C) -> C {
    let q = z * z / 4.0;
    let l = (z / 2.0).ln() + EULER;
    let mut sum = C::new(0.0, 0.0);
    let mut harm = vec![0.0f64; 80];
    for k in 1..80 {
        harm[k] = harm[k - 1] + 1.0 / k as f64;
    }
    let mut fact = vec![1.0f64; 82];
    for k in 1..82 {
        fact[k] = fact[k - 1] * k as f64;
    }
    match nu {
        0 => {
            for k in 0..60 {
                let tk = q.powu(k as u32) / (fact[k] * fact[k]);
                sum += tk * (harm[k] - l);
            }
            sum
        }
        _ => {
            for k in 0..60 {
                let tk = q.powu(k as u32) / (fact[k] * fact[k + 1]);
                // (z/2) t^k/(k!(k+1)!) [ln(z/2) + γ - (H_k + H_{k+1})/2]
                sum += tk * (l - 0.5 * (harm[k] + harm[k + 1]));
            }
            1.0 / z + z / 2.0 * sum
        }
    }
}

/// Trapezoid rule on the integral representation, computed for e^{z}K_ν(z).
pub fn integral(nu: u32, z: C) -> C {
    let re = z.re;
    // e^{-Re z (cosh t - 1)} < 1e-20 beyond t_max
    let t_max = (1.0 + 46.0 / re).acosh() + 0.5;
    let freq = z.norm() * t_max.sinh() + 1.0;
    let h = (0.25 / freq).min(0.01);
    let n = (t_max / h).ceil() as usize;
    let h = t_max / n as f64;
    let mut s = C::new(0.0, 0.0);
    for i in 0..=n {
        let t = i as f64 * h;
        let w = if i == 0 { 0.5 } else { 1.0 };
        s += (-z * (t.cosh() - 1.0)).exp() * (nu as f64 * t).cosh() * w;
    }
    s * h * (-z).exp()
}

/// Hankel expansion truncated at its smallest term.
pub fn asymptotic(nu: u32, z: C) -> C {
    let mu = 4.0 * (nu * nu) as f64;
    let mut term = C::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let next = term * (mu - ((2 * k - 1) * (2 * k - 1)) as f64) / (8.0 * k as f64 * z);
        if next.norm() >= last {
            break;
        }
        last = next.norm();
        term = next;
        sum += term;
    }
    (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp() * sum
}

/// Chooses the route by |z|.
pub fn k(nu: u32, z: C) -> C {
    let r = z.norm();
    if r <= 0.5 {
        series(nu, z)
    } else if r < 25.0 {
        integral(nu, z)
    } else {
        asymptotic(nu, z)
    }
}
