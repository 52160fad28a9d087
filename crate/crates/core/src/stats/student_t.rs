//! Two-sided Student-t p-values via the regularized incomplete beta function.

use crate::scalar::Scalar;

// Lanczos g=7, n=9 coefficients.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LANCZOS_G: f64 = 7.0;

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma<T: Scalar>(z: T) -> T {
    let half = T::from_f64_const(0.5);
    if z < half {
        // reflection: ln Γ(z) = ln(π / sin(πz)) − ln Γ(1 − z)
        let pi = T::from_f64_const(std::f64::consts::PI);
        return (pi / (pi * z).sin()).ln() - ln_gamma(T::one() - z);
    }
    let z = z - T::one();
    let mut acc = T::from_f64_const(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + T::from_f64_const(c) / (z + T::from_usize_const(i));
    }
    let t = z + T::from_f64_const(LANCZOS_G + 0.5);
    let half_ln_two_pi = T::from_f64_const(0.5 * (2.0 * std::f64::consts::PI).ln());
    half_ln_two_pi + (z + half) * t.ln() - t + acc.ln()
}

fn ln_beta<T: Scalar>(a: T, b: T) -> T {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta function (Lentz's algorithm).
fn beta_cf<T: Scalar>(a: T, b: T, x: T) -> T {
    let max_iter = 500;
    let eps = T::epsilon() * T::from_f64_const(8.0);
    let tiny = T::from_f64_const(1e-30);

    let one = T::one();
    let two = T::from_f64_const(2.0);
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;

    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;

    for m in 1..=max_iter {
        let m_t = T::from_usize_const(m);
        let m2 = two * m_t;

        // even step
        let aa = m_t * (b - m_t) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h = h * d * c;

        // odd step
        let aa = -(a + m_t) * (qab + m_t) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let del = d * c;
        h = h * del;

        if (del - one).abs() < eps {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn inc_beta_reg<T: Scalar>(a: T, b: T, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let one = T::one();
    let two = T::from_f64_const(2.0);
    let ln_front = a * x.ln() + b * (one - x).ln() - ln_beta(a, b);
    let front = ln_front.exp();
    if x < (a + one) / (a + b + two) {
        front * beta_cf(a, b, x) / a
    } else {
        one - front * beta_cf(b, a, one - x) / b
    }
}

/// Two-sided p-value of a t-statistic with `dof` degrees of freedom:
/// `2·(1 − F_t(|t|; dof))`, computed as `I_x(dof/2, 1/2)` at
/// `x = dof/(dof + t²)`.
pub fn p_value<T: Scalar>(t: T, dof: u64) -> T {
    assert!(dof >= 1, "p_value requires dof >= 1");
    if t.is_nan() {
        return T::nan();
    }
    if t == T::zero() {
        return T::one();
    }
    let nu = T::from_f64_const(dof as f64);
    let x = nu / (nu + t * t);
    let half = T::from_f64_const(0.5);
    inc_beta_reg(nu * half, half, x)
}
