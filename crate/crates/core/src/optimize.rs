//! Bracketed scalar minimization (golden-section bracketing + Brent).

use crate::error::{Error, Result};

const GOLDEN: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Finds `a < b < c` with `f(b)` below both ends, expanding downhill from
/// the initial pair.
pub fn bracket_minimum<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    x0: f64,
    x1: f64,
    max_expansions: usize,
) -> Result<(f64, f64, f64)> {
    let (mut a, mut b) = (x0, x1);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLDEN * (b - a);
    let mut fc = f(c)?;
    let mut n = 0;
    while fc < fb {
        n += 1;
        if n > max_expansions {
            return Err(Error::Fit(format!(
                "no minimum bracketed after {max_expansions} expansions (last point {c})"
            )));
        }
        a = b;
        b = c;
        fb = fc;
        c = b + GOLDEN * (b - a);
        fc = f(c)?;
    }
    Ok(if a < c { (a, b, c) } else { (c, b, a) })
}

/// Brent's method on a bracket `lo < mid < hi`; stops when the bracket is
/// narrower than `tol·|x| + tiny`.
pub fn brent_minimize<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    (lo, mid, hi): (f64, f64, f64),
    tol: f64,
    max_iter: usize,
) -> Result<Minimum> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = mid;
    let mut w = x;
    let mut v = x;
    let mut fx = f(x)?;
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for evaluations in (1..).take(max_iter) {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-15;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(Minimum {
                x,
                value: fx,
                evaluations,
            });
        }
        let mut golden = true;
        if e.abs() > tol1 {
            // Parabola through x, w, v.
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(Error::Fit(format!(
        "Brent minimization did not converge in {max_iter} iterations"
    )))
}
