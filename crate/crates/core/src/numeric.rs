//! Small numerical kernels shared across modules: bracketing root search,
//! golden-section maximization, composite Simpson quadrature and a stable
//! log-mean-exp.

/// Golden ratio conjugate, (√5 − 1)/2.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Smallest `x` in `[lo, hi]` for which `pred(x)` holds, assuming `pred` is
/// monotone (false then true) and `pred(hi)` holds. Stops once the bracket
/// width drops below `rel_tol * hi` (or `abs_tol`) and returns the upper end,
/// which always satisfies `pred`.
pub fn bisect_threshold<F>(mut lo: f64, mut hi: f64, rel_tol: f64, abs_tol: f64, mut pred: F) -> f64
where
    F: FnMut(f64) -> bool,
{
    for _ in 0..400 {
        if hi - lo <= (rel_tol * hi.abs()).max(abs_tol) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Maximizes a unimodal function on `[a, b]` by golden-section search.
/// Returns `(argmax, max)`.
pub fn golden_max<F>(mut a: f64, mut b: f64, tol: f64, f: F) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // the endpoints of the final bracket may beat the midpoint on a flat top
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson<F>(a: f64, b: f64, intervals: usize, f: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `log(mean(exp(xs)))` without overflow.
pub fn log_mean_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + (x - max).exp(), c + 1));
    max + (sum / count as f64).ln()
}

/// Mean and unbiased standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Binomial standard error of a proportion estimated from `trials` draws.
pub fn binomial_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let x = bisect_threshold(0.0, 2.0, 1e-12, 0.0, |x| x * x >= 2.0);
        assert!((x - 2f64.sqrt()).abs() < 1e-11);
        assert!(x * x >= 2.0);
    }

    #[test]
    fn golden_finds_parabola_top() {
        let (x, fx) = golden_max(-3.0, 5.0, 1e-12, |x| -(x - 1.25).powi(2) + 3.0);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((fx - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(0.0, 2.0, 4, |x| x * x * x - x);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn log_mean_exp_handles_large_arguments() {
        let xs = [1000.0, 1000.0];
        assert!((log_mean_exp(xs.iter().copied()) - 1000.0).abs() < 1e-12);
        let ys = [0.0, 2f64.ln()];
        assert!((log_mean_exp(ys.iter().copied()) - 1.5f64.ln()).abs() < 1e-12);
    }
}
