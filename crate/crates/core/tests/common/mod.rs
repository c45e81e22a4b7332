//! Reference implementations used by the integration tests. Everything here
//! is written with explicit loops or brute-force scans and shares no code
//! with the library beyond its public types.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sadl::solver::{Iterate, Weights};

pub fn rand_mat(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub struct Instance {
    pub x: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub it: Iterate,
}

/// Random problem with every dimension drawn from `1..=max_dim`.
pub fn random_instance(rng: &mut ChaCha8Rng, max_dim: usize) -> Instance {
    let mut dim = || rng.random_range(1..=max_dim);
    let (m, n, r, s, c) = (dim(), dim(), dim(), dim(), dim());
    let scale = 0.5;
    Instance {
        x: rand_mat(m, n, scale, rng),
        h: rand_mat(s, n, scale, rng),
        l: rand_mat(c, n, scale, rng),
        it: Iterate {
            omega: rand_mat(r, m, scale, rng),
            u: rand_mat(r, n, scale, rng),
            q: rand_mat(s, r, scale, rng),
            w: rand_mat(c, s, scale, rng),
            y1: rand_mat(s, n, scale, rng),
            y2: rand_mat(c, n, scale, rng),
            mu: rng.random_range(0.1..3.0),
        },
    }
}

pub fn matmul_loops(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut acc = 0.0;
            for k in 0..a.ncols() {
                acc += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Augmented Lagrangian evaluated entry by entry.
pub fn lagrangian_loops(x: &DMatrix<f64>, h: &DMatrix<f64>, l: &DMatrix<f64>, w: Weights, it: &Iterate) -> f64 {
    let ox = matmul_loops(&it.omega, x);
    let qu = matmul_loops(&it.q, &it.u);
    let wqu = matmul_loops(&it.w, &qu);
    let mut total = 0.0;
    for i in 0..it.u.nrows() {
        for j in 0..it.u.ncols() {
            let d = it.u[(i, j)] - ox[(i, j)];
            total += 0.5 * d * d + w.lambda1 * it.u[(i, j)].abs();
        }
    }
    if !w.structured {
        return total;
    }
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            let r = h[(i, j)] - qu[(i, j)];
            total += w.lambda2 * it.y1[(i, j)] * r + 0.5 * it.mu * r * r;
        }
    }
    for i in 0..l.nrows() {
        for j in 0..l.ncols() {
            let r = l[(i, j)] - wqu[(i, j)];
            total += w.lambda3 * it.y2[(i, j)] * r + 0.5 * it.mu * r * r;
        }
    }
    total
}

/// Minimizer of `½(x − v)² + α|x|` found by scanning the candidates: the
/// kink at zero and the stationary point of each linear piece.
pub fn prox_scan(v: f64, alpha: f64) -> f64 {
    let obj = |x: f64| 0.5 * (x - v) * (x - v) + alpha * x.abs();
    let mut best = 0.0;
    for cand in [v - alpha, v + alpha] {
        if obj(cand) < obj(best) {
            best = cand;
        }
    }
    best
}

/// `H[p, j]` by locating the owner of row `p` with a linear scan over the
/// block sizes.
pub fn structure_oracle(labels: &[usize], block_rows: &[usize]) -> DMatrix<f64> {
    let s: usize = block_rows.iter().sum();
    let owner = |p: usize| {
        let mut start = 0;
        for (class, &k) in block_rows.iter().enumerate() {
            if p < start + k {
                return class;
            }
            start += k;
        }
        unreachable!()
    };
    DMatrix::from_fn(s, labels.len(), |p, j| if owner(p) == labels[j] { 1.0 } else { 0.0 })
}

/// `‖A‖₂²` by power iteration on `AᵀA`.
pub fn spectral_norm_sq_power(a: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let ata = a.transpose() * a;
    let mut v = DVector::from_fn(ata.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut est = 0.0;
    for _ in 0..5000 {
        let next = &ata * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let prev = est;
        est = v.dot(&next) / v.norm_squared();
        v = next / norm;
        if (est - prev).abs() <= 1e-15 * est {
            break;
        }
    }
    est
}

/// Central differences of `f` around `base`, one entry at a time.
pub fn central_difference<F>(base: &DMatrix<f64>, h: f64, mut f: F) -> DMatrix<f64>
where
    F: FnMut(&DMatrix<f64>) -> f64,
{
    let mut g = DMatrix::zeros(base.nrows(), base.ncols());
    let mut probe = base.clone();
    for idx in 0..base.len() {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = f(&probe);
        probe[idx] = orig - h;
        let down = f(&probe);
        probe[idx] = orig;
        g[idx] = (up - down) / (2.0 * h);
    }
    g
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Worst relative error of `grad_U`, `grad_Q` and `grad_W` against central
/// differences of the smooth Lagrangian (ℓ1 term dropped).
pub fn gradient_errors(inst: &Instance, lambda2: f64, lambda3: f64, h: f64) -> [f64; 3] {
    use sadl::solver::{grad_q, grad_u, grad_w, lagrangian, Problem};
    let weights = Weights {
        lambda1: 0.0,
        lambda2,
        lambda3,
        structured: true,
    };
    let p = Problem {
        x: &inst.x,
        h: &inst.h,
        l: &inst.l,
        weights,
        parallel: false,
    };
    let it = &inst.it;
    let eval = |it: &Iterate| lagrangian(&p, it).unwrap();
    let fd_u = central_difference(&it.u, h, |u| eval(&Iterate { u: u.clone(), ..it.clone() }));
    let fd_q = central_difference(&it.q, h, |q| eval(&Iterate { q: q.clone(), ..it.clone() }));
    let fd_w = central_difference(&it.w, h, |w| eval(&Iterate { w: w.clone(), ..it.clone() }));
    [
        rel_err(&grad_u(&p, it).unwrap(), &fd_u),
        rel_err(&grad_q(&p, it).unwrap(), &fd_q),
        rel_err(&grad_w(&p, it).unwrap(), &fd_w),
    ]
}

/// `‖(ΩX − U)Xᵀ + λ4·Ω‖ / ‖UXᵀ‖`, the stationarity residual of the ridge
/// subproblem solved by the dictionary update.
pub fn omega_residual(omega: &DMatrix<f64>, u: &DMatrix<f64>, x: &DMatrix<f64>, lambda4: f64) -> f64 {
    let xt = x.transpose();
    let grad = matmul_loops(&(matmul_loops(omega, x) - u), &xt) + omega * lambda4;
    let scale = matmul_loops(u, &xt).norm().max(f64::MIN_POSITIVE);
    grad.norm() / scale
}
