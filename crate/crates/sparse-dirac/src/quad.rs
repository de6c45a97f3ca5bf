//! Quadrature helpers: adaptive and composite Simpson, trapezoid oracle.

/// Adaptive Simpson integration with absolute tolerance `tol`.
///
/// Classic bisection scheme with the 1/15 Richardson correction; recursion
/// stops when the two-panel refinement changes the estimate by less than
/// `15 * tol` or the depth limit is reached.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0;
    adaptive_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) * (fa + 4.0 * flm + fm) / 6.0;
    let right = (b - m) * (fm + 4.0 * frm + fb) / 6.0;
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Composite Simpson on `n` panels (`n` is rounded up to even).
pub fn composite_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    sum * h / 3.0
}

/// Composite Simpson, doubling the panel count until the estimate moves by
/// less than `rel_tol` relative (or `abs_floor` absolute for near-zero
/// integrals).  Returns the refined value and the panel count used.
pub fn simpson_to_tolerance<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    n0: usize,
    rel_tol: f64,
    abs_floor: f64,
    n_max: usize,
) -> (f64, usize) {
    let mut n = n0.max(2).next_multiple_of(2);
    let mut value = composite_simpson(&f, a, b, n);
    while n < n_max {
        let refined = composite_simpson(&f, a, b, 2 * n);
        let scale = refined.abs().max(abs_floor);
        let done = (refined - value).abs() <= rel_tol * scale;
        n *= 2;
        value = refined;
        if done {
            break;
        }
    }
    (value, n)
}

/// Composite trapezoid rule on `n` panels.  Kept deliberately independent of
/// the Simpson path so it can serve as a cross-check oracle.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(1);
    let h = (b - a) / n as f64;
    let mut sum = 0.5 * (f(a) + f(b));
    for i in 1..n {
        sum += f(a + i as f64 * h);
    }
    sum * h
}

/// Trapezoid cumulative integral of samples `ys` on the (sorted) grid `xs`.
/// Entry `i` holds the integral from `xs[0]` to `xs[i]`.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_simpson_matches_analytic_integrals() {
        let i = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((i - 2.0).abs() < 1e-11);
        let j = adaptive_simpson(|x| (-x).exp(), 0.0, 10.0, 1e-12);
        assert!((j - (1.0 - (-10.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn composite_simpson_converges_fourth_order() {
        let exact = 2.0;
        let e1 = (composite_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 16) - exact).abs();
        let e2 = (composite_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 32) - exact).abs();
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn cumulative_trapezoid_tracks_running_integral() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| x * x).collect();
        let cum = cumulative_trapezoid(&xs, &ys);
        assert!((cum[100] - 1.0 / 3.0).abs() < 1e-4);
        assert_eq!(cum[0], 0.0);
    }
}
