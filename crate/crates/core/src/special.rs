//! Integer-order Bessel functions of real positive argument.
//!
//! Below [`ASYMPTOTIC_ARG`], `J` comes from Miller's backward recurrence and
//! `Y_0`, `Y_1` from Neumann series over those values; above it both use the
//! Hankel asymptotic expansion. Modified functions are returned
//! exponentially scaled: `I_n(x) e^{-x}` and `K_n(x) e^{x}`.

use std::f64::consts::PI;

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const ASYMPTOTIC_ARG: f64 = 17.0;
const MODIFIED_ASYMPTOTIC_ARG: f64 = 30.0;

fn sign_for_order(n: i32) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Bessel function of the first kind `J_n(x)`, `x >= 0`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        return sign_for_order(n) * bessel_j(-n, x);
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < ASYMPTOTIC_ARG || n as f64 > x {
        return miller_j(x, n as usize)[n as usize];
    }
    let (j0, _) = hankel_asymptotic(0, x);
    if n == 0 {
        return j0;
    }
    let (j1, _) = hankel_asymptotic(1, x);
    // Upward recurrence is stable while n <= x.
    let (mut prev, mut cur) = (j0, j1);
    for k in 1..n {
        let next = 2.0 * k as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Bessel function of the second kind `Y_n(x)`, `x > 0`.
pub fn bessel_y(n: i32, x: f64) -> f64 {
    if n < 0 {
        return sign_for_order(n) * bessel_y(-n, x);
    }
    let (y0, y1) = if x < ASYMPTOTIC_ARG {
        neumann_y01(x)
    } else {
        (hankel_asymptotic(0, x).1, hankel_asymptotic(1, x).1)
    };
    match n {
        0 => y0,
        1 => y1,
        _ => {
            let (mut prev, mut cur) = (y0, y1);
            for k in 1..n {
                let next = 2.0 * k as f64 / x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Hankel function of the second kind `H_n^(2)(x) = J_n(x) - i Y_n(x)`.
pub fn hankel2(n: i32, x: f64) -> Complex64 {
    Complex64::new(bessel_j(n, x), -bessel_y(n, x))
}

/// Derivative of `H_n^(2)` with respect to its argument.
pub fn hankel2_derivative(n: i32, x: f64) -> Complex64 {
    hankel2(n - 1, x) - hankel2(n, x) * (n as f64 / x)
}

/// Derivative of `J_n` with respect to its argument.
pub fn bessel_j_derivative(n: i32, x: f64) -> f64 {
    if n == 0 {
        -bessel_j(1, x)
    } else {
        bessel_j(n - 1, x) - n as f64 / x * bessel_j(n, x)
    }
}

/// `J_0(x) ..= J_N(x)` for some `N >= n_max` by Miller's backward recurrence,
/// normalized with `J_0 + 2 sum J_2k = 1`.
fn miller_j(x: f64, n_max: usize) -> Vec<f64> {
    let start = {
        let s = n_max.max(x as usize) + 24 + (10.0 * x.cbrt()) as usize;
        s + s % 2
    };
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-30;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for v in &mut j {
        *v /= norm;
    }
    j.truncate(start + 1);
    j
}

/// `(Y_0, Y_1)` from Neumann series over Miller values of `J_n`.
fn neumann_y01(x: f64) -> (f64, f64) {
    let j = miller_j(x, 2);
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * (log_term * j[0] - 2.0 * s0);
    let y1 = 2.0 / PI * (log_term * j[1] - j[0] / x + s1);
    (y0, y1)
}

/// Returns `(J_n(x), Y_n(x))` from the large-argument expansion.
fn hankel_asymptotic(n: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * n as f64 + 0.25) * PI;
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// Exponentially scaled modified Bessel function `I_n(x) e^{-x}`, `x >= 0`.
pub fn bessel_i_scaled(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < MODIFIED_ASYMPTOTIC_ARG {
        let half = 0.5 * x;
        let q = half * half;
        let mut term = (-x).exp();
        for k in 1..=n {
            term *= half / k as f64;
        }
        let mut sum = term;
        let mut k = 0u32;
        loop {
            k += 1;
            term *= q / (k as f64 * (k + n) as f64);
            sum += term;
            if term < 1e-17 * sum || k > 1000 {
                break;
            }
        }
        return sum;
    }
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// Exponentially scaled modified Bessel function `K_n(x) e^{x}`, `x > 0`.
///
/// Trapezoidal rule on `K_n(x) = int_0^inf exp(-x cosh t) cosh(n t) dt`;
/// the integrand is analytic in a strip so the rule converges geometrically.
pub fn bessel_k_scaled(n: u32, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let h = 0.1f64.min(0.5 / x.sqrt());
    let nf = n as f64;
    let peak = (nf / x).asinh();
    let log_integrand = |t: f64| nf * t - x * (t.cosh() - 1.0);
    let integrand = |t: f64| {
        let lg = log_integrand(t);
        0.5 * lg.exp() * (1.0 + (-2.0 * nf * t).exp())
    };
    let mut sum = 0.5 * integrand(0.0);
    let mut j = 1usize;
    loop {
        let t = j as f64 * h;
        let f = integrand(t);
        sum += f;
        if t > peak && f < 1e-18 * sum {
            break;
        }
        j += 1;
        if j > 100_000 {
            break;
        }
    }
    sum * h
}

/// `I_{n+1}(x) / I_n(x)`.
pub fn bessel_i_ratio(n: u32, x: f64) -> f64 {
    bessel_i_scaled(n + 1, x) / bessel_i_scaled(n, x)
}

/// `K_{n+1}(x) / K_n(x)`.
pub fn bessel_k_ratio(n: u32, x: f64) -> f64 {
    bessel_k_scaled(n + 1, x) / bessel_k_scaled(n, x)
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn tabulated_values() {
        let table = [
            (0, 1.0, 0.765_197_686_557_966_6, 0.088_256_964_215_676_96),
            (1, 1.0, 0.440_050_585_744_933_5, -0.781_212_821_300_288_7),
            (0, 5.0, -0.177_596_771_314_338_3, -0.308_517_625_249_033_8),
            (0, 10.0, -0.245_935_764_451_348_3, 0.055_671_167_283_599_39),
            (1, 10.0, 0.043_472_746_168_861_44, 0.249_015_424_206_953_9),
        ];
        for (n, x, j, y) in table {
            assert!(close(bessel_j(n, x), j, 1e-12), "J{n}({x}) = {}", bessel_j(n, x));
            assert!(close(bessel_y(n, x), y, 1e-12), "Y{n}({x}) = {}", bessel_y(n, x));
        }
    }

    #[test]
    fn wronskian_holds_across_branches() {
        for i in 1..400 {
            let x = 0.05 * i as f64 * (1.0 + 0.013 * i as f64);
            for n in 0..6 {
                let w = bessel_j(n + 1, x) * bessel_y(n, x) - bessel_j(n, x) * bessel_y(n + 1, x);
                let expect = 2.0 / (PI * x);
                assert!((w - expect).abs() < 1e-10 * expect.max(1e-3) + 1e-12, "n={n} x={x} w={w}");
            }
        }
    }

    #[test]
    fn j_matches_periodic_integral() {
        // J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt, trapezoid on a periodic integrand.
        for &x in &[0.3, 2.0, 9.0, 16.9, 17.1, 25.0, 60.0] {
            for n in 0..8 {
                let m = 2000;
                let mut s = 0.0;
                for j in 0..=m {
                    let t = PI * j as f64 / m as f64;
                    let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                    s += w * (n as f64 * t - x * t.sin()).cos();
                }
                let oracle = s / m as f64;
                assert!((bessel_j(n, x) - oracle).abs() < 1e-11, "J{n}({x})");
            }
        }
    }

    #[test]
    fn negative_orders_reflect() {
        for n in 1..5 {
            assert_eq!(bessel_j(-n, 3.0), sign_for_order(n) * bessel_j(n, 3.0));
            assert_eq!(bessel_y(-n, 3.0), sign_for_order(n) * bessel_y(n, 3.0));
        }
    }

    #[test]
    fn modified_functions_match_oracles() {
        // I_n via periodic trapezoid of (1/pi) int_0^pi exp(x (cos t - 1)) cos(n t) dt.
        for &x in &[0.01, 0.5, 3.0, 12.0, 29.9, 30.1, 80.0] {
            for n in 0..6u32 {
                let m = 4000;
                let mut s = 0.0;
                for j in 0..=m {
                    let t = PI * j as f64 / m as f64;
                    let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                    s += w * (x * (t.cos() - 1.0)).exp() * (n as f64 * t).cos();
                }
                let oracle = s / m as f64;
                let got = bessel_i_scaled(n, x);
                assert!((got - oracle).abs() < 1e-12 + 1e-10 * oracle, "I{n}({x}) {got} vs {oracle}");
            }
        }
        // Wronskian I_n K_{n+1} + I_{n+1} K_n = 1/x.
        for &x in &[0.02, 0.7, 4.0, 20.0, 45.0, 300.0] {
            for n in 0..6u32 {
                let w = bessel_i_scaled(n, x) * bessel_k_scaled(n + 1, x)
                    + bessel_i_scaled(n + 1, x) * bessel_k_scaled(n, x);
                assert!((w * x - 1.0).abs() < 1e-10, "n={n} x={x} w*x={}", w * x);
            }
        }
        // K_0(1) and K_1(1).
        assert!(close(bessel_k_scaled(0, 1.0) / 1f64.exp(), 0.421_024_438_240_708_3, 1e-13));
        assert!(close(bessel_k_scaled(1, 1.0) / 1f64.exp(), 0.601_907_230_197_234_6, 1e-13));
    }
}
