//! Scalar search routines shared by the entropy maximizer and the threshold
//! and distance solvers.

/// Inverse golden ratio, (sqrt(5) - 1) / 2.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a unimodal `f` on `[lo, hi]` by golden-section search.
///
/// Returns `(argmax, max)` once the bracket is narrower than `tol`.
pub fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    [(x1, f1), (x2, f2), (mid, fm)]
        .into_iter()
        .fold((mid, fm), |best, c| if c.1 > best.1 { c } else { best })
}

/// Bisection for a predicate that holds at `lo` and fails at `hi`.
///
/// Returns the final `(lo, hi)` bracket, with `hi - lo <= tol`.
pub fn bisect_boundary<P>(pred: P, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    P: Fn(f64) -> bool,
{
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Bisection root of a continuous `f` with `f(lo)` and `f(hi)` of opposite sign.
pub fn bisect_root<F>(f: F, lo: f64, hi: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let positive_at_lo = f(lo) > 0.0;
    let (a, b) = bisect_boundary(|x| (f(x) > 0.0) == positive_at_lo, lo, hi, tol);
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, 0.0, 1.0, 1e-10);
        // argmax of a flat peak is only resolvable to ~sqrt(eps)
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-14);
    }

    #[test]
    fn golden_handles_edge_maximum() {
        let (x, _) = golden_section_max(|x| x, 0.0, 1.0, 1e-10);
        assert!(x > 1.0 - 1e-9);
    }

    #[test]
    fn bisect_root_of_cubic() {
        let r = bisect_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-12);
        assert!((r - 2f64.cbrt()).abs() < 1e-11);
    }
}
