//! One-dimensional derivative-free minimization.

use crate::math;

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Returns the best point seen and its value. Errors from `f` abort the search.
pub fn golden_section<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64), E> {
    let inv_phi = (math::sqrt(5.0) - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut it = 0;
    while (b - a) > tol && it < max_iter {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
        it += 1;
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}
