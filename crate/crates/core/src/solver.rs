//! Float root finding and derivative-free maximization for construction.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Forward-difference step, scaled by max(1, |x_i|).
    pub fd_step: f64,
    pub max_iter: usize,
    /// Converged when the max-norm residual is at most this.
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            fd_step: 1e-7,
            max_iter: 200,
            tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    /// Max-norm residual at `x`.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn max_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn sq_norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], r0: &[f64], step: f64) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let r1 = f(&xp);
        xp[j] = x[j];
        for i in 0..r0.len() {
            jac[(i, j)] = (r1[i] - r0[i]) / h;
        }
    }
    jac
}

/// Minimum-norm least-squares solution, singular values below
/// `rel_cutoff · σ_max` treated as zero.
pub fn pseudo_solve(a: &DMatrix<f64>, b: &[f64], rel_cutoff: f64) -> Option<Vec<f64>> {
    if a.ncols() == 0 {
        return Some(Vec::new());
    }
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Some(vec![0.0; a.ncols()]);
    }
    let rhs = DVector::from_column_slice(b);
    svd.solve(&rhs, rel_cutoff * top)
        .ok()
        .map(|x| x.iter().copied().collect())
}

/// Iterations between progress checks.
const STALL_WINDOW: usize = 25;

/// Runs stop when a window shrinks the squared residual by less than this factor.
const STALL_RATIO: f64 = 0.9;

/// Damped Gauss–Newton on r(x) = 0 with step halving on the squared norm.
pub fn gauss_newton<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x0: Vec<f64>, opts: &NewtonOptions) -> NewtonOutcome {
    let mut x = x0;
    let mut r = f(&x);
    let mut iterations = 0;
    let mut checkpoint = sq_norm(&r);
    while iterations < opts.max_iter {
        let res = max_norm(&r);
        if res <= opts.tol || !res.is_finite() {
            break;
        }
        if iterations > 0 && iterations % STALL_WINDOW == 0 {
            let now = sq_norm(&r);
            if now > STALL_RATIO * checkpoint {
                break;
            }
            checkpoint = now;
        }
        iterations += 1;
        let jac = jacobian(f, &x, &r, opts.fd_step);
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let Some(dx) = pseudo_solve(&jac, &neg, 1e-9) else {
            break;
        };
        let base = sq_norm(&r);
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + lambda * di).collect();
            let rt = f(&trial);
            let s = sq_norm(&rt);
            if s.is_finite() && s < base {
                x = trial;
                r = rt;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let residual = max_norm(&r);
    NewtonOutcome {
        converged: residual <= opts.tol,
        x,
        residual,
        iterations,
    }
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut n = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= n).all(|&p| n % p != 0) {
            out.push(n);
        }
        n += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// Points 1..=count of the Halton sequence in [0, 1)^dim.
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    let bases = primes(dim);
    (1..=count as u64)
        .map(|i| bases.iter().map(|&b| radical_inverse(i, b)).collect())
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct OptimizeOptions {
    /// Half-width of the scanned box around the seed.
    pub radius: f64,
    /// Grid points per axis in the initial scan.
    pub grid: usize,
    pub max_evals: usize,
    /// Stop once the bracket or simplex is this small.
    pub tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            radius: 0.5,
            grid: 81,
            max_evals: 2000,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Deterministic derivative-free maximization: grid scan around the seed,
/// then golden-section (one variable) or Nelder–Mead (two or more).
/// The seed is returned unless a strictly larger value is found.
pub fn maximize<F: FnMut(&[f64]) -> f64>(mut f: F, seed: &[f64], opts: &OptimizeOptions) -> Maximum {
    let dim = seed.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut best = Maximum {
        x: seed.to_vec(),
        value: eval(seed, &mut evals),
        evaluations: 0,
    };
    if dim == 0 {
        best.evaluations = evals;
        return best;
    }
    let per_axis = if dim == 1 {
        opts.grid.max(3)
    } else {
        // Keep the scan near a few hundred points.
        ((opts.grid as f64).powf(1.0 / dim as f64).ceil() as usize).clamp(5, 11)
    };
    let h = 2.0 * opts.radius / (per_axis - 1) as f64;
    let total = per_axis.pow(dim as u32);
    for idx in 0..total {
        let mut rem = idx;
        let x: Vec<f64> = seed
            .iter()
            .map(|&s| {
                let i = rem % per_axis;
                rem /= per_axis;
                s - opts.radius + h * i as f64
            })
            .collect();
        let v = eval(&x, &mut evals);
        if v > best.value {
            best = Maximum {
                x,
                value: v,
                evaluations: 0,
            };
        }
    }
    if dim == 1 {
        golden_section(&mut eval, &mut evals, &mut best, h, opts);
    } else {
        nelder_mead(&mut eval, &mut evals, &mut best, h, opts);
    }
    best.evaluations = evals;
    best
}

fn golden_section<E: FnMut(&[f64], &mut usize) -> f64>(eval: &mut E, evals: &mut usize, best: &mut Maximum, h: f64, opts: &OptimizeOptions) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best.x[0] - h, best.x[0] + h);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let mut fc = eval(&[c], evals);
    let mut fd = eval(&[d], evals);
    while hi - lo > opts.tol && *evals < opts.max_evals {
        if fc >= fd {
            hi = d;
            (d, fd) = (c, fc);
            c = hi - ratio * (hi - lo);
            fc = eval(&[c], evals);
        } else {
            lo = c;
            (c, fc) = (d, fd);
            d = lo + ratio * (hi - lo);
            fd = eval(&[d], evals);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.value {
            best.x = vec![x];
            best.value = v;
        }
    }
}

fn nelder_mead<E: FnMut(&[f64], &mut usize) -> f64>(eval: &mut E, evals: &mut usize, best: &mut Maximum, h: f64, opts: &OptimizeOptions) {
    let dim = best.x.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(best.x.clone(), best.value)];
    for i in 0..dim {
        let mut x = best.x.clone();
        x[i] += h;
        let v = eval(&x, evals);
        simplex.push((x, v));
    }
    let point = |c: &[f64], p: &[f64], t: f64| -> Vec<f64> { c.iter().zip(p).map(|(ci, pi)| ci + t * (pi - ci)).collect() };
    while *evals < opts.max_evals {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let spread = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opts.tol {
            break;
        }
        let worst = simplex[dim].clone();
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let xr = point(&centroid, &worst.0, -1.0);
        let fr = eval(&xr, evals);
        if fr > simplex[0].1 {
            let xe = point(&centroid, &worst.0, -2.0);
            let fe = eval(&xe, evals);
            simplex[dim] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let xc = point(&centroid, &worst.0, 0.5);
            let fc = eval(&xc, evals);
            if fc > worst.1 {
                simplex[dim] = (xc, fc);
            } else {
                let top = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x = point(&top, &entry.0, 0.5);
                    let v = eval(&x, evals);
                    *entry = (x, v);
                }
            }
        }
    }
    for (x, v) in simplex {
        if v > best.value {
            best.x = x;
            best.value = v;
        }
    }
}
