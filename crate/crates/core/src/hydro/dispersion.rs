//! Linear dispersion relation in finite depth.

use std::f64::consts::PI;

use crate::GRAVITY;

/// Propagating wavenumber `k` solving `omega^2 = g k tanh(k h)`.
///
/// Newton on `y = k h`, started to the right of the root; `y tanh y` is
/// convex and increasing so the iterates decrease monotonically.
pub fn wavenumber(omega: f64, depth: f64) -> f64 {
    debug_assert!(omega > 0.0 && depth > 0.0);
    let c = omega * omega * depth / GRAVITY;
    let mut y = c + c.sqrt();
    for _ in 0..100 {
        let t = y.tanh();
        let sech2 = 1.0 / (y.cosh() * y.cosh());
        let f = y * t - c;
        let step = f / (t + y * sech2);
        y -= step;
        if step.abs() <= 1e-16 * y {
            break;
        }
    }
    y / depth
}

/// The first `count` evanescent wavenumbers `k_n`, `n = 1..=count`, solving
/// `k_n tan(k_n h) = -omega^2 / g`. The `n`-th root lies in
/// `((n - 1/2) pi / h, n pi / h)`.
pub fn evanescent_wavenumbers(omega: f64, depth: f64, count: usize) -> Vec<f64> {
    let c = omega * omega * depth / GRAVITY;
    (1..=count)
        .map(|n| {
            let npi = n as f64 * PI;
            // y = n pi - theta, theta in (0, pi/2): (n pi - theta) sin(theta) = c cos(theta)
            let f = |t: f64| (npi - t) * t.sin() - c * t.cos();
            let df = |t: f64| -t.sin() + (npi - t) * t.cos() + c * t.sin();
            let (mut lo, mut hi) = (0.0, 0.5 * PI);
            let mut t = 0.25 * PI;
            for _ in 0..200 {
                let ft = f(t);
                if ft < 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
                let mut next = t - ft / df(t);
                if !(next > lo && next < hi) {
                    next = 0.5 * (lo + hi);
                }
                let done = (next - t).abs() <= 1e-16 * npi;
                t = next;
                if done || hi - lo <= 1e-16 * npi {
                    break;
                }
            }
            (npi - t) / depth
        })
        .collect()
}

/// Group velocity `(omega/k) (1 + 2kh / sinh 2kh) / 2`.
pub fn group_velocity(omega: f64, depth: f64) -> f64 {
    let k = wavenumber(omega, depth);
    let two_kh = 2.0 * k * depth;
    let ratio = if two_kh > 700.0 { 0.0 } else { two_kh / two_kh.sinh() };
    0.5 * omega / k * (1.0 + ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn deep_water_limit() {
        let k = wavenumber(1.0, 1e6);
        assert!((k - 1.0 / GRAVITY).abs() < 1e-5);
    }

    #[test]
    fn matches_bisection() {
        let (omega, h) = (0.5, 50.0);
        let oracle = bisect(|k| GRAVITY * k * (k * h).tanh() - omega * omega, 1e-6, 10.0);
        assert!((wavenumber(omega, h) - oracle).abs() < 1e-10);
    }

    #[test]
    fn shallow_water_limit() {
        let k = wavenumber(0.01, 10.0);
        assert!((k - 0.01 / (GRAVITY * 10.0f64).sqrt()).abs() < 1e-7);
        assert!((k - 0.0010096).abs() < 1e-7);
    }

    #[test]
    fn residual_is_tiny() {
        for &h in &[1.0, 10.0, 50.0, 500.0] {
            for i in 1..60 {
                let omega = 0.05 * i as f64;
                let k = wavenumber(omega, h);
                let res = (GRAVITY * k * (k * h).tanh() - omega * omega).abs() / (omega * omega);
                assert!(res < 1e-12, "h={h} omega={omega} res={res}");
            }
        }
    }

    #[test]
    fn evanescent_roots_match_bisection() {
        let (omega, h) = (0.8, 50.0);
        let roots = evanescent_wavenumbers(omega, h, 30);
        for (i, &k) in roots.iter().enumerate() {
            let n = (i + 1) as f64;
            let g = |kk: f64| kk * (kk * h).sin() + omega * omega / GRAVITY * (kk * h).cos();
            let oracle = bisect(g, (n - 0.5) * PI / h + 1e-12, n * PI / h - 1e-12);
            assert!((k - oracle).abs() < 1e-10 * oracle, "n={n}: {k} vs {oracle}");
        }
    }

    #[test]
    fn group_velocity_limits() {
        let deep = group_velocity(2.0, 1e4);
        assert!((deep - 0.5 * GRAVITY / 2.0).abs() < 1e-9);
        let shallow = group_velocity(0.01, 10.0);
        assert!((shallow - (GRAVITY * 10.0f64).sqrt()).abs() < 1e-3);
    }
}
