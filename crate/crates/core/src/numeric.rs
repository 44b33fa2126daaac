//! Small numerical helpers shared by the inverse routines.

/// Root of a monotone (either direction) function on `[lo, hi]` by bisection.
///
/// `f(lo)` and `f(hi)` must bracket zero. Stops once `|f| <= tol` or the
/// bracket can no longer be split in floating point.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    if f_lo.abs() <= tol {
        return lo;
    }
    let f_hi = f(hi);
    if f_hi.abs() <= tol {
        return hi;
    }
    let increasing = f_hi > f_lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.abs() <= tol {
            return mid;
        }
        if (fm < 0.0) == increasing {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    let _ = f_lo;
    0.5 * (lo + hi)
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros removed.
pub fn format_sig9(x: f64) -> String {
    const SIG: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..SIG).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
