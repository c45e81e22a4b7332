//! Linearized alternating-direction training on the augmented Lagrangian
//!
//! ```text
//! ½‖U − ΩX‖²_F + λ1‖U‖₁ + λ2⟨Y1, H − QU⟩ + λ3⟨Y2, L − WQU⟩
//!     + μ/2 ‖H − QU‖²_F + μ/2 ‖L − WQU‖²_F
//! ```
//!
//! Each iteration takes a proximal-gradient step in `U`, gradient steps in
//! `Q` and `W`, solves the ridge problem for `Ω` exactly and renormalizes its
//! rows, then ascends the duals and grows the penalty `μ`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{DualStep, Mode, StepRule, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, mul, shape, spectral_norm_sq};
use crate::model::Model;
use crate::structure::StructureTargets;

/// Lower clamp on every step-size factor.
pub const MIN_STEP: f64 = 1e-8;

/// Weights of the Lagrangian terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Whether the structure and classifier terms (dual and penalty) are
    /// present at all. Off for plain dictionary learning.
    pub structured: bool,
}

impl From<&TrainConfig> for Weights {
    fn from(cfg: &TrainConfig) -> Self {
        let (lambda1, lambda2, lambda3) = cfg.effective_lambdas();
        Weights {
            lambda1,
            lambda2,
            lambda3,
            structured: cfg.mode == Mode::Sadl,
        }
    }
}

/// The fixed data of one training problem.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub x: &'a DMatrix<f64>,
    pub h: &'a DMatrix<f64>,
    pub l: &'a DMatrix<f64>,
    pub weights: Weights,
    pub parallel: bool,
}

/// All primal and dual variables at one point of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub omega: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub y1: DMatrix<f64>,
    pub y2: DMatrix<f64>,
    pub mu: f64,
}

impl Problem<'_> {
    fn check(&self, it: &Iterate, op: &'static str) -> Result<()> {
        let (m, n) = self.x.shape();
        let (r, s, c) = (it.omega.nrows(), self.h.nrows(), self.l.nrows());
        let expect = [
            ("Ω", &it.omega, (r, m)),
            ("U", &it.u, (r, n)),
            ("Q", &it.q, (s, r)),
            ("W", &it.w, (c, s)),
            ("Y1", &it.y1, (s, n)),
            ("Y2", &it.y2, (c, n)),
            ("H", self.h, (s, n)),
            ("L", self.l, (c, n)),
        ];
        for (name, mat, dims) in expect {
            if mat.shape() != dims {
                return Err(Error::dims(op, format!("{name} {}×{}", dims.0, dims.1), shape(mat)));
            }
        }
        Ok(())
    }
}

/// `QU`, `H − QU` and `L − WQU` at one iterate.
#[derive(Debug, Clone)]
pub struct Residuals {
    pub qu: DMatrix<f64>,
    pub structure: DMatrix<f64>,
    pub label: DMatrix<f64>,
}

impl Residuals {
    pub fn new(p: &Problem, it: &Iterate) -> Self {
        let qu = mul(&it.q, &it.u, p.parallel);
        let structure = p.h - &qu;
        let label = p.l - mul(&it.w, &qu, p.parallel);
        Residuals { qu, structure, label }
    }

    /// `λ2·Y1 + μ(H − QU)` and `λ3·Y2 + μ(L − WQU)`: the two multiplier-like
    /// factors shared by all gradients.
    fn pulls(&self, p: &Problem, it: &Iterate) -> (DMatrix<f64>, DMatrix<f64>) {
        let w = &p.weights;
        (
            &it.y1 * w.lambda2 + &self.structure * it.mu,
            &it.y2 * w.lambda3 + &self.label * it.mu,
        )
    }
}

/// Elementwise `sign(x)·max(|x| − alpha, 0)`.
pub fn soft_threshold(m: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    debug_assert!(alpha >= 0.0);
    m.map(|v| {
        if v > alpha {
            v - alpha
        } else if v < -alpha {
            v + alpha
        } else {
            0.0
        }
    })
}

/// Value of the augmented Lagrangian at `it`.
pub fn lagrangian(p: &Problem, it: &Iterate) -> Result<f64> {
    p.check(it, "lagrangian")?;
    let w = &p.weights;
    let data = (&it.u - mul(&it.omega, p.x, p.parallel)).norm_squared() / 2.0;
    let sparsity = w.lambda1 * it.u.iter().map(|v| v.abs()).sum::<f64>();
    if !w.structured {
        return Ok(data + sparsity);
    }
    let res = Residuals::new(p, it);
    Ok(data
        + sparsity
        + w.lambda2 * it.y1.dot(&res.structure)
        + w.lambda3 * it.y2.dot(&res.label)
        + it.mu / 2.0 * (res.structure.norm_squared() + res.label.norm_squared()))
}

/// Gradient in `U` of the smooth part (everything except `λ1‖U‖₁`):
/// `(U − ΩX) − Qᵀ(λ2Y1 + μ(H − QU)) − QᵀWᵀ(λ3Y2 + μ(L − WQU))`.
pub fn grad_u(p: &Problem, it: &Iterate) -> Result<DMatrix<f64>> {
    p.check(it, "grad_u")?;
    let mut g = &it.u - mul(&it.omega, p.x, p.parallel);
    if p.weights.structured {
        let res = Residuals::new(p, it);
        let (pull_h, pull_l) = res.pulls(p, it);
        let back = pull_h + it.w.transpose() * pull_l;
        g -= mul(&it.q.transpose(), &back, p.parallel);
    }
    Ok(g)
}

/// `−(λ2Y1 + μ(H − QU))Uᵀ − Wᵀ(λ3Y2 + μ(L − WQU))Uᵀ`.
pub fn grad_q(p: &Problem, it: &Iterate) -> Result<DMatrix<f64>> {
    p.check(it, "grad_q")?;
    if !p.weights.structured {
        return Ok(DMatrix::zeros(it.q.nrows(), it.q.ncols()));
    }
    let res = Residuals::new(p, it);
    let (pull_h, pull_l) = res.pulls(p, it);
    let back = pull_h + it.w.transpose() * pull_l;
    Ok(-(back * it.u.transpose()))
}

/// `−(λ3Y2 + μ(L − WQU))(QU)ᵀ`.
pub fn grad_w(p: &Problem, it: &Iterate) -> Result<DMatrix<f64>> {
    p.check(it, "grad_w")?;
    if !p.weights.structured {
        return Ok(DMatrix::zeros(it.w.nrows(), it.w.ncols()));
    }
    let res = Residuals::new(p, it);
    let (_, pull_l) = res.pulls(p, it);
    Ok(-(pull_l * res.qu.transpose()))
}

/// Cached Cholesky factor of `XXᵀ + λ4·I`; the system matrix never changes
/// during training so each dictionary update is a pair of triangular solves.
#[derive(Debug, Clone)]
pub struct OmegaSolver {
    x: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl OmegaSolver {
    pub fn new(x: &DMatrix<f64>, lambda4: f64) -> Result<Self> {
        let m = x.nrows();
        let mut gram = x * x.transpose();
        for i in 0..m {
            gram[(i, i)] += lambda4;
        }
        let scale = gram.diagonal().amax();
        let chol = Cholesky::new(gram).ok_or(Error::Singular("XXᵀ + λ4·I is not positive definite"))?;
        let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min_pivot * min_pivot <= f64::EPSILON * m as f64 * scale {
            return Err(Error::Singular("XXᵀ + λ4·I is numerically singular"));
        }
        Ok(OmegaSolver { x: x.clone(), chol })
    }

    /// `argmin_Ω ‖U − ΩX‖²_F + λ4‖Ω‖²_F = UXᵀ(XXᵀ + λ4·I)⁻¹`.
    pub fn solve(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if u.ncols() != self.x.ncols() {
            return Err(Error::dims(
                "update_omega",
                format!("U with {} columns", self.x.ncols()),
                shape(u),
            ));
        }
        // (XXᵀ + λ4 I) Ωᵀ = X Uᵀ
        let rhs = &self.x * u.transpose();
        Ok(self.chol.solve(&rhs).transpose())
    }
}

pub fn update_omega(u: &DMatrix<f64>, x: &DMatrix<f64>, lambda4: f64) -> Result<DMatrix<f64>> {
    OmegaSolver::new(x, lambda4)?.solve(u)
}

/// Scales every row to unit ℓ2 norm. Rows that are exactly zero (or not
/// finite) are redrawn from the Gaussian initializer first.
pub fn normalize_rows<R: Rng + ?Sized>(omega: &mut DMatrix<f64>, rng: &mut R) {
    let cols = omega.ncols();
    if cols == 0 {
        return;
    }
    let std = 1.0 / (cols as f64).sqrt();
    for mut row in omega.row_iter_mut() {
        let mut norm = row.norm();
        while !(norm > 0.0 && norm.is_finite()) {
            for v in row.iter_mut() {
                *v = std * rng.sample::<f64, _>(StandardNormal);
            }
            norm = row.norm();
        }
        row /= norm;
    }
}

/// One step of dual ascent plus penalty growth. With [`DualStep::Mu`]:
/// `Y1 + μ(H − QU)`, `Y2 + μ(L − WQU)`; with [`DualStep::Scaled`] the two
/// steps are divided by `λ2` and `λ3` (when nonzero). The penalty becomes
/// `min(ρμ, μ_max)`.
pub fn dual_and_penalty_update(
    p: &Problem,
    it: &Iterate,
    cfg: &TrainConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    p.check(it, "dual_and_penalty_update")?;
    let res = Residuals::new(p, it);
    let step = |lambda: f64| match cfg.dual_step {
        DualStep::Scaled if lambda > 0.0 => it.mu / lambda,
        _ => it.mu,
    };
    let y1 = &it.y1 + res.structure * step(p.weights.lambda2);
    let y2 = &it.y2 + res.label * step(p.weights.lambda3);
    Ok((y1, y2, (cfg.rho * it.mu).min(cfg.mu_max)))
}

/// Per-block step-size factors. The actual steps divide by `μ·eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub eta_u: f64,
    pub eta_q: f64,
    pub eta_w: f64,
}

fn clamp_step(v: f64) -> f64 {
    if v.is_nan() {
        MIN_STEP
    } else {
        v.max(MIN_STEP)
    }
}

/// Factor for the `U` prox step: `‖Q‖₂² + ‖WQ‖₂² + 1/μ` under the spectral
/// rule, which makes `μ·eta_u` an upper bound on the curvature of the smooth
/// part in `U`.
pub fn eta_u(q: &DMatrix<f64>, w: &DMatrix<f64>, mu: f64, rule: StepRule, structured: bool) -> f64 {
    clamp_step(match rule {
        StepRule::Spectral if structured => spectral_norm_sq(q) + spectral_norm_sq(&(w * q)) + 1.0 / mu,
        StepRule::Spectral => 1.0 / mu,
        StepRule::Fixed { eta_q, eta_wq, .. } => eta_q + eta_wq,
    })
}

/// Factor for the `Q` step: `‖U‖₂²(1 + ‖W‖₂²)`.
pub fn eta_q(u: &DMatrix<f64>, w: &DMatrix<f64>, rule: StepRule) -> f64 {
    clamp_step(match rule {
        StepRule::Spectral => spectral_norm_sq(u) * (1.0 + spectral_norm_sq(w)),
        StepRule::Fixed { eta_q, eta_wu, .. } => eta_q + eta_wu,
    })
}

/// Factor for the `W` step: `‖QU‖₂²`.
pub fn eta_w(qu: &DMatrix<f64>, rule: StepRule) -> f64 {
    clamp_step(match rule {
        StepRule::Spectral => spectral_norm_sq(qu),
        StepRule::Fixed { eta_qu, .. } => eta_qu,
    })
}

/// All three factors evaluated at a single iterate. Training evaluates each
/// one just before its own block update instead.
pub fn compute_step_sizes(it: &Iterate, rule: StepRule, structured: bool) -> StepSizes {
    StepSizes {
        eta_u: eta_u(&it.q, &it.w, it.mu, rule, structured),
        eta_q: eta_q(&it.u, &it.w, rule),
        eta_w: eta_w(&(&it.q * &it.u), rule),
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// `‖H − QU‖_F`
    pub residual_h: f64,
    /// `‖L − WQU‖_F`
    pub residual_l: f64,
    /// Penalty after this iteration's update.
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub u: DMatrix<f64>,
    pub y1: DMatrix<f64>,
    pub y2: DMatrix<f64>,
    pub mu: f64,
    /// Completed iterations.
    pub iterations: usize,
    /// True when the relative objective change fell below `tol`.
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

impl TrainState {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["iteration", "objective", "primal_residual_H", "primal_residual_L", "mu"])?;
        for r in &self.trace {
            wtr.write_record([
                r.iteration.to_string(),
                r.objective.to_string(),
                r.residual_h.to_string(),
                r.residual_l.to_string(),
                r.mu.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_trace_csv(File::create(path)?)
    }
}

fn check_targets(data: &Dataset, targets: &StructureTargets) -> Result<()> {
    let n = data.len();
    if targets.h.ncols() != n || targets.l.ncols() != n {
        return Err(Error::dims(
            "train",
            format!("targets with {n} columns"),
            format!("H {}, L {}", shape(&targets.h), shape(&targets.l)),
        ));
    }
    if targets.l.nrows() != data.classes() {
        return Err(Error::dims(
            "train",
            format!("L with {} rows", data.classes()),
            shape(&targets.l),
        ));
    }
    Ok(())
}

/// Runs the alternating scheme for up to `max_iter` iterations.
///
/// `Ω`, `Q` and `W` start as seeded Gaussian matrices (entries of variance
/// `1/columns`, `Ω` row-normalized) and `U`, `Y1`, `Y2` at zero. Training
/// stops early once `|obj_k − obj_{k−1}| / max(1, |obj_{k−1}|) < tol`.
///
/// In `plain_adl` mode only the code and dictionary updates run; the
/// returned model then carries `Q = I` and a ridge classifier fit on the
/// final codes.
pub fn train(data: &Dataset, targets: &StructureTargets, cfg: &TrainConfig) -> Result<(Model, TrainState)> {
    train_observed(data, targets, cfg, |_, _| {})
}

/// [`train`], calling `observe` with each completed iteration record and the
/// iterate it describes.
pub fn train_observed<F>(
    data: &Dataset,
    targets: &StructureTargets,
    cfg: &TrainConfig,
    mut observe: F,
) -> Result<(Model, TrainState)>
where
    F: FnMut(&IterationRecord, &Iterate),
{
    cfg.validate()?;
    data.require_all_classes()?;
    check_targets(data, targets)?;

    let weights = Weights::from(cfg);
    let problem = Problem {
        x: data.x(),
        h: &targets.h,
        l: &targets.l,
        weights,
        parallel: cfg.parallel,
    };
    let (m, n) = data.x().shape();
    let (r, s, c) = (cfg.dict_size, targets.rows(), targets.classes());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut omega = gaussian_matrix(r, m, &mut rng);
    normalize_rows(&mut omega, &mut rng);
    let q = gaussian_matrix(s, r, &mut rng);
    let w = gaussian_matrix(c, s, &mut rng);
    let mut it = Iterate {
        omega,
        u: DMatrix::zeros(r, n),
        q,
        w,
        y1: DMatrix::zeros(s, n),
        y2: DMatrix::zeros(c, n),
        mu: cfg.mu0,
    };
    let omega_solver = OmegaSolver::new(data.x(), cfg.lambda4)?;

    let mut trace = Vec::with_capacity(cfg.max_iter);
    let mut converged = false;
    for k in 1..=cfg.max_iter {
        let denom = it.mu * eta_u(&it.q, &it.w, it.mu, cfg.step_rule, weights.structured);
        let g = grad_u(&problem, &it)?;
        it.u = soft_threshold(&(&it.u - g / denom), weights.lambda1 / denom);

        if weights.structured {
            let denom = it.mu * eta_q(&it.u, &it.w, cfg.step_rule);
            let g = grad_q(&problem, &it)?;
            it.q -= g / denom;

            let qu = mul(&it.q, &it.u, cfg.parallel);
            let denom = it.mu * eta_w(&qu, cfg.step_rule);
            let g = grad_w(&problem, &it)?;
            it.w -= g / denom;
        }

        it.omega = omega_solver.solve(&it.u)?;
        normalize_rows(&mut it.omega, &mut rng);

        if weights.structured {
            let (y1, y2, mu) = dual_and_penalty_update(&problem, &it, cfg)?;
            it.y1 = y1;
            it.y2 = y2;
            it.mu = mu;
        } else {
            it.mu = (cfg.rho * it.mu).min(cfg.mu_max);
        }

        let objective = lagrangian(&problem, &it)?;
        let res = Residuals::new(&problem, &it);
        let record = IterationRecord {
            iteration: k,
            objective,
            residual_h: res.structure.norm(),
            residual_l: res.label.norm(),
            mu: it.mu,
        };
        observe(&record, &it);
        trace.push(record);
        if !objective.is_finite() {
            return Err(Error::Diverged {
                iteration: k,
                objective,
            });
        }
        if let [.., prev, last] = trace[..] {
            let change = (last.objective - prev.objective).abs() / prev.objective.abs().max(1.0);
            if change < cfg.tol {
                converged = true;
                break;
            }
        }
    }

    let Iterate {
        omega, u, q, w, y1, y2, mu,
    } = it;
    let (q, w) = match cfg.mode {
        Mode::Sadl => (q, w),
        Mode::PlainAdl => (
            DMatrix::identity(r, r),
            crate::ridge::ridge_weights(&u, &targets.l, cfg.ridge_gamma)?,
        ),
    };
    let model = Model::new(omega, q, w, cfg.clone())?;
    let state = TrainState {
        u,
        y1,
        y2,
        mu,
        iterations: trace.len(),
        converged,
        trace,
    };
    Ok((model, state))
}
