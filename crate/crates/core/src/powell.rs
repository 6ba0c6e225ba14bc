//! Powell's conjugate-direction minimizer with golden-section bracketing and
//! Brent line searches.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowellOptions {
    /// Stop once a full sweep lowers the objective by less than this.
    pub tol: f64,
    pub max_iters: usize,
    /// Relative tolerance of each Brent line minimization.
    pub line_tol: f64,
}

impl Default for PowellOptions {
    fn default() -> Self {
        PowellOptions {
            tol: 1e-6,
            max_iters: 200,
            line_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowellOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after every iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: x.to_vec() })
        }
    }
}

/// Minimizes `f` from `x0`. The returned value never exceeds `f(x0)`.
pub fn powell_minimize<F>(f: F, x0: &[f64], opts: &PowellOptions) -> Result<PowellOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::validation("cannot minimize over an empty vector"));
    }
    let mut f = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    let mut fx = f.eval(&x)?;
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut trace = vec![fx];
    let mut scratch = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let f_start = fx;
        let x_start = x.clone();
        let mut biggest = (0usize, 0.0f64);

        for (i, dir) in dirs.iter().enumerate() {
            let before = fx;
            fx = line_minimize(&mut f, &mut x, fx, dir, &mut scratch, opts.line_tol)?;
            if before - fx > biggest.1 {
                biggest = (i, before - fx);
            }
        }

        if f_start - fx < opts.tol {
            trace.push(fx);
            converged = true;
            break;
        }

        let new_dir: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let extrapolated: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| 2.0 * a - b).collect();
        let fe = f.eval(&extrapolated)?;
        if fe < f_start {
            let (big_i, delta) = biggest;
            let t = 2.0 * (f_start - 2.0 * fx + fe) * (f_start - fx - delta).powi(2)
                - delta * (f_start - fe).powi(2);
            if t < 0.0 {
                fx = line_minimize(&mut f, &mut x, fx, &new_dir, &mut scratch, opts.line_tol)?;
                dirs[big_i] = dirs[n - 1].clone();
                dirs[n - 1] = new_dir;
            }
        }
        trace.push(fx);
    }

    Ok(PowellOutcome {
        x,
        f: fx,
        iterations,
        converged,
        trace,
        evaluations: f.evals,
    })
}

/// Moves `x` to the minimum of `f` along `dir`; returns the new value. Never increases `fx`.
fn line_minimize<F: FnMut(&[f64]) -> f64>(
    f: &mut Counted<F>,
    x: &mut [f64],
    fx: f64,
    dir: &[f64],
    scratch: &mut [f64],
    tol: f64,
) -> Result<f64> {
    if dir.iter().all(|&d| d == 0.0) {
        return Ok(fx);
    }
    let mut g = |t: f64| -> Result<f64> {
        for ((s, xi), di) in scratch.iter_mut().zip(x.iter()).zip(dir) {
            *s = xi + t * di;
        }
        f.eval(scratch)
    };
    let bracket = bracket_minimum(&mut g, fx)?;
    let (t, ft) = brent(&mut g, bracket, tol)?;
    if ft < fx {
        for (xi, di) in x.iter_mut().zip(dir) {
            *xi += t * di;
        }
        Ok(ft)
    } else {
        Ok(fx)
    }
}

#[derive(Clone, Copy, Debug)]
struct Bracket {
    a: f64,
    b: f64,
    c: f64,
    fb: f64,
}

const GOLD: f64 = 1.618_033_988_749_895;
const GROW_LIMIT: f64 = 100.0;
const TINY: f64 = 1e-20;
const MAX_BRACKET_STEPS: usize = 200;

/// Golden-section expansion (with parabolic steps) from `[0, 1]` until `f(b) <= f(a), f(c)`.
fn bracket_minimum(g: &mut impl FnMut(f64) -> Result<f64>, f0: f64) -> Result<Bracket> {
    let (mut a, mut b) = (0.0, 1.0);
    let (mut fa, mut fb) = (f0, g(b)?);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = g(c)?;
    let mut steps = 0;
    while fb > fc && steps < MAX_BRACKET_STEPS {
        steps += 1;
        let r = (b - a) * (fb - fc);
        let q = (b - c) * (fb - fa);
        let denom = (q - r).abs().max(TINY).copysign(q - r);
        let mut u = b - ((b - c) * q - (b - a) * r) / (2.0 * denom);
        let ulim = b + GROW_LIMIT * (c - b);
        let mut fu;
        if (b - u) * (u - c) > 0.0 {
            fu = g(u)?;
            if fu < fc {
                return Ok(Bracket { a: b, b: u, c, fb: fu });
            } else if fu > fb {
                return Ok(Bracket { a, b, c: u, fb });
            }
            u = c + GOLD * (c - b);
            fu = g(u)?;
        } else if (c - u) * (u - ulim) > 0.0 {
            fu = g(u)?;
            if fu < fc {
                b = c;
                c = u;
                u = c + GOLD * (c - b);
                fb = fc;
                fc = fu;
                fu = g(u)?;
            }
        } else if (u - ulim) * (ulim - c) >= 0.0 {
            u = ulim;
            fu = g(u)?;
        } else {
            u = c + GOLD * (c - b);
            fu = g(u)?;
        }
        a = b;
        b = c;
        c = u;
        fa = fb;
        fb = fc;
        fc = fu;
    }
    let _ = fa;
    Ok(Bracket { a, b, c, fb })
}

const CGOLD: f64 = 0.381_966_011_250_105;
const ZEPS: f64 = 1e-12;
const BRENT_MAX_ITERS: usize = 200;

/// Brent's parabolic/golden minimization inside a bracket.
fn brent(g: &mut impl FnMut(f64) -> Result<f64>, br: Bracket, tol: f64) -> Result<(f64, f64)> {
    let (mut a, mut b) = if br.a < br.c { (br.a, br.c) } else { (br.c, br.a) };
    let (mut x, mut w, mut v) = (br.b, br.b, br.b);
    let (mut fx, mut fw, mut fv) = (br.fb, br.fb, br.fb);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);

    for _ in 0..BRENT_MAX_ITERS {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + ZEPS;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
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
        let fu = g(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_quadratic() {
        let c: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 - 3.0).collect();
        let f = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let out = powell_minimize(f, &[0.0; 10], &PowellOptions::default()).unwrap();
        assert!(out.converged);
        for (a, b) in out.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = powell_minimize(f, &[-1.2, 1.0], &PowellOptions::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-3 && (out.x[1] - 1.0).abs() < 1e-3, "{:?}", out);
    }

    #[test]
    fn absolute_value() {
        let out = powell_minimize(|x: &[f64]| x[0].abs(), &[5.0], &PowellOptions::default()).unwrap();
        assert!(out.x[0].abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn trace_is_non_increasing() {
        let f = |x: &[f64]| {
            (x[0] - 1.0).powi(4) + (x[0] + 2.0 * x[1]).powi(2) + (x[2] * x[1] - 0.5).powi(2) + 0.1 * x[2].abs()
        };
        let out = powell_minimize(f, &[3.0, -2.0, 1.5], &PowellOptions::default()).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(out.f <= out.trace[0]);
    }

    #[test]
    fn non_finite_is_an_error() {
        let f = |x: &[f64]| if x[0] > 2.0 { f64::NAN } else { -x[0] };
        match powell_minimize(f, &[0.0], &PowellOptions::default()) {
            Err(Error::NonFinite { point }) => assert!(point[0] > 2.0),
            other => panic!("{other:?}"),
        }
        assert!(powell_minimize(|_: &[f64]| 0.0, &[], &PowellOptions::default()).is_err());
    }

    #[test]
    fn flat_function_stays_put() {
        let out = powell_minimize(|_: &[f64]| 1.0, &[0.5, 0.25], &PowellOptions::default()).unwrap();
        assert_eq!(out.x, vec![0.5, 0.25]);
        assert!(out.converged);
    }
}
