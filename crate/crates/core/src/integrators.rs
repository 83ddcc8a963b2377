//! Time stepping in double precision: the AVF step from the exact line
//! average, implicit Runge-Kutta steps, energy drift and observed order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::{FloatPoly, HamiltonianSystem};
use crate::linalg::Matrix;
use crate::quadrature::QuadRule;
use crate::trees::ButcherTableau;

/// Fixed-point iteration, handing over to Newton once an update shrinks by
/// less than `newton_switch`.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub newton_switch: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: 1e-14, max_iterations: 100, newton_switch: 0.5 }
    }
}

impl SolverConfig {
    pub fn new(tolerance: f64, max_iterations: usize) -> Result<Self> {
        let cfg = SolverConfig { tolerance, max_iterations, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidInput(
                "solver tolerance must be positive and max_iterations at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `H`, `f = J^{-1} ∇H` and the Jacobian of `f`, converted to `f64` once.
#[derive(Clone, Debug)]
pub struct FloatSystem {
    pub energy: FloatPoly,
    pub field: Vec<FloatPoly>,
    pub jacobian: Vec<Vec<FloatPoly>>,
}

impl FloatSystem {
    pub fn new(sys: &HamiltonianSystem) -> Self {
        let field: Vec<FloatPoly> = sys.vector_field().iter().map(|f| f.to_float()).collect();
        let n = field.len();
        let jacobian = field
            .iter()
            .map(|fi| (0..n).map(|j| fi.partial(j)).collect())
            .collect();
        FloatSystem { energy: sys.hamiltonian().to_float(), field, jacobian }
    }

    pub fn dim(&self) -> usize {
        self.field.len()
    }

    pub fn f(&self, y: &[f64]) -> Vec<f64> {
        self.field.iter().map(|fi| fi.eval(y)).collect()
    }

    pub fn jac(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.jacobian[i][j].eval(y))
    }

    pub fn hamiltonian(&self, y: &[f64]) -> f64 {
        self.energy.eval(y)
    }

    /// `∫_0^1 f((1-ξ) y0 + ξ y1) dξ`.
    pub fn line_average(&self, y0: &[f64], y1: &[f64]) -> Vec<f64> {
        self.field.iter().map(|fi| fi.segment_moment(y0, y1, 0)).collect()
    }

    /// Derivative of the line average with respect to `y1`: `∫ ξ Df(...) dξ`.
    fn line_average_jac(&self, y0: &[f64], y1: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.jacobian[i][j].segment_moment(y0, y1, 1))
    }
}

/// Runge-Kutta coefficients in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatTableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl FloatTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn midpoint() -> Self {
        FloatTableau { a: vec![vec![0.5]], b: vec![1.0], c: vec![0.5] }
    }

    pub fn explicit_euler() -> Self {
        FloatTableau { a: vec![vec![0.0]], b: vec![1.0], c: vec![0.0] }
    }
}

impl From<&ButcherTableau> for FloatTableau {
    fn from(t: &ButcherTableau) -> Self {
        FloatTableau { a: t.a_f64(), b: t.b_f64(), c: t.c_f64() }
    }
}

/// `A = c b^T` on the rule's nodes and weights.
pub fn avf_tableau(rule: &QuadRule) -> ButcherTableau {
    ButcherTableau::new(Matrix::outer(&rule.c, &rule.b), rule.b.clone(), rule.c.clone())
        .expect("rule vectors have matching lengths")
}

#[derive(Clone, Debug)]
pub enum Method {
    /// Exact line average of the vector field.
    Avf,
    RungeKutta(FloatTableau),
    Midpoint,
    ExplicitEuler,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Avf => "avf",
            Method::RungeKutta(_) => "rk",
            Method::Midpoint => "midpoint",
            Method::ExplicitEuler => "euler",
        }
    }
}

/// A solved step and the number of iterations it took.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub state: Vec<f64>,
    pub iterations: usize,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_step(h: f64, dim: usize, y: &[f64], cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if !h.is_finite() || h == 0.0 {
        return Err(Error::InvalidInput(format!("step size must be finite and nonzero (got {h})")));
    }
    if y.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: y.len() });
    }
    Ok(())
}

/// Solve `x = g(x)` by fixed-point sweeps, switching to Newton on
/// `x - g(x) = 0` with Jacobian `I - dg` once sweeps stall. Updates are
/// measured relative to `max(1, |x|)`, so large states are not held to an
/// absolute tolerance below their rounding level.
fn solve_implicit(
    mut x: Vec<f64>,
    cfg: &SolverConfig,
    g: impl Fn(&[f64]) -> Vec<f64>,
    dg: impl Fn(&[f64]) -> DMatrix<f64>,
) -> Result<StepResult> {
    let n = x.len();
    let mut last = f64::INFINITY;
    let mut newton = false;
    for it in 1..=cfg.max_iterations {
        let gx = g(&x);
        let delta: Vec<f64> = if newton {
            let r = DVector::from_iterator(n, x.iter().zip(&gx).map(|(a, b)| b - a));
            let jac = DMatrix::identity(n, n) - dg(&x);
            let step = jac.lu().solve(&r).ok_or_else(|| {
                Error::Singular("Newton matrix I - h J is singular".into())
            })?;
            step.iter().copied().collect()
        } else {
            x.iter().zip(&gx).map(|(a, b)| b - a).collect()
        };
        for (xi, d) in x.iter_mut().zip(&delta) {
            *xi += d;
        }
        let size = max_norm(&delta);
        if !size.is_finite() {
            break;
        }
        if size <= cfg.tolerance * max_norm(&x).max(1.0) {
            return Ok(StepResult { state: x, iterations: it });
        }
        if !newton && size > cfg.newton_switch * last {
            newton = true;
        }
        last = size;
    }
    let gx = g(&x);
    let residual = max_norm(&x.iter().zip(&gx).map(|(a, b)| a - b).collect::<Vec<_>>());
    Err(Error::SolverDiverged {
        step: 0,
        iterations: cfg.max_iterations,
        residual,
        last_iterate: x,
    })
}

/// `y1 = y + h ∫_0^1 f((1-ξ) y + ξ y1) dξ`.
pub fn avf_step(sys: &FloatSystem, y: &[f64], h: f64, cfg: &SolverConfig) -> Result<StepResult> {
    check_step(h, sys.dim(), y, cfg)?;
    let guess: Vec<f64> = y.iter().zip(sys.f(y)).map(|(a, b)| a + h * b).collect();
    solve_implicit(
        guess,
        cfg,
        |x| y.iter().zip(sys.line_average(y, x)).map(|(a, b)| a + h * b).collect(),
        |x| sys.line_average_jac(y, x) * h,
    )
}

/// Implicit Runge-Kutta step on stage increments `Z_i = h Σ_j a_ij f(y + Z_j)`.
pub fn rk_step(
    sys: &FloatSystem,
    tab: &FloatTableau,
    y: &[f64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<StepResult> {
    check_step(h, sys.dim(), y, cfg)?;
    let (s, n) = (tab.stages(), sys.dim());
    let stage = |z: &[f64], i: usize| -> Vec<f64> {
        y.iter().zip(&z[i * n..(i + 1) * n]).map(|(a, b)| a + b).collect()
    };
    let g = |z: &[f64]| -> Vec<f64> {
        let fs: Vec<Vec<f64>> = (0..s).map(|j| sys.f(&stage(z, j))).collect();
        let mut out = vec![0.0; s * n];
        for i in 0..s {
            for j in 0..s {
                let a = tab.a[i][j];
                if a != 0.0 {
                    for k in 0..n {
                        out[i * n + k] += h * a * fs[j][k];
                    }
                }
            }
        }
        out
    };
    let dg = |z: &[f64]| -> DMatrix<f64> {
        let js: Vec<DMatrix<f64>> = (0..s).map(|j| sys.jac(&stage(z, j))).collect();
        let mut m = DMatrix::zeros(s * n, s * n);
        for i in 0..s {
            for j in 0..s {
                let a = tab.a[i][j];
                if a != 0.0 {
                    m.view_mut((i * n, j * n), (n, n)).copy_from(&(&js[j] * (h * a)));
                }
            }
        }
        m
    };
    let res = solve_implicit(vec![0.0; s * n], cfg, g, dg)?;
    let mut out = y.to_vec();
    for i in 0..s {
        let fi = sys.f(&stage(&res.state, i));
        for k in 0..n {
            out[k] += h * tab.b[i] * fi[k];
        }
    }
    Ok(StepResult { state: out, iterations: res.iterations })
}

pub fn step(
    sys: &FloatSystem,
    method: &Method,
    y: &[f64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<StepResult> {
    match method {
        Method::Avf => avf_step(sys, y, h, cfg),
        Method::RungeKutta(tab) => rk_step(sys, tab, y, h, cfg),
        Method::Midpoint => rk_step(sys, &FloatTableau::midpoint(), y, h, cfg),
        Method::ExplicitEuler => rk_step(sys, &FloatTableau::explicit_euler(), y, h, cfg),
    }
}

/// Trajectory with energies recomputed from the stored states.
#[derive(Clone, Debug)]
pub struct IntegrationRun {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// Solver iterations for each step (one fewer entry than `states`).
    pub iterations: Vec<usize>,
}

impl IntegrationRun {
    /// `max_n |H(y_n) - H(y_0)|`.
    pub fn max_energy_drift(&self) -> f64 {
        let h0 = self.energies[0];
        self.energies.iter().fold(0.0, |m, e| m.max((e - h0).abs()))
    }

    /// Least-squares slope of `H(y_n) - H(y_0)` against the step index.
    pub fn drift_slope(&self) -> f64 {
        let h0 = self.energies[0];
        let pts: Vec<(f64, f64)> =
            self.energies.iter().enumerate().map(|(k, e)| (k as f64, e - h0)).collect();
        linear_slope(&pts)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("a run holds at least the initial state")
    }

    /// CSV with header `t,y1..yn,H,newton_iters`; the initial row reports 0 iterations.
    pub fn to_csv(&self) -> String {
        let n = self.states[0].len();
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",y{i}"));
        }
        out.push_str(",H,newton_iters\n");
        let iters = std::iter::once(0).chain(self.iterations.iter().copied());
        for (((t, y), e), it) in self.times.iter().zip(&self.states).zip(&self.energies).zip(iters) {
            out.push_str(&format!("{t:.17e}"));
            for v in y {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push_str(&format!(",{e:.17e},{it}\n"));
        }
        out
    }
}

fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `n_steps` steps of size `h`; a negative `h` integrates backwards in time.
pub fn integrate(
    sys: &FloatSystem,
    method: &Method,
    y0: &[f64],
    h: f64,
    n_steps: usize,
    cfg: &SolverConfig,
) -> Result<IntegrationRun> {
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be at least 1".into()));
    }
    check_step(h, sys.dim(), y0, cfg)?;
    let mut run = IntegrationRun {
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        energies: Vec::with_capacity(n_steps + 1),
        iterations: Vec::with_capacity(n_steps),
    };
    run.times.push(0.0);
    run.states.push(y0.to_vec());
    run.energies.push(sys.hamiltonian(y0));
    let mut y = y0.to_vec();
    for k in 1..=n_steps {
        let res = step(sys, method, &y, h, cfg).map_err(|e| match e {
            Error::SolverDiverged { iterations, residual, last_iterate, .. } => {
                Error::SolverDiverged { step: k, iterations, residual, last_iterate }
            }
            other => other,
        })?;
        y = res.state;
        run.times.push(k as f64 * h);
        run.energies.push(sys.hamiltonian(&y));
        run.states.push(y.clone());
        run.iterations.push(res.iterations);
    }
    Ok(run)
}

/// Errors at `t_end` against a reference run with step `min(h) / 64`.
#[derive(Clone, Debug)]
pub struct ConvergenceFit {
    pub slope: f64,
    pub step_sizes: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Observed order: slope of `log error` against `log h`.
pub fn convergence_order(
    sys: &FloatSystem,
    method: &Method,
    y0: &[f64],
    t_end: f64,
    h_list: &[f64],
    cfg: &SolverConfig,
) -> Result<ConvergenceFit> {
    if h_list.len() < 3 {
        return Err(Error::InvalidInput("need at least three step sizes".into()));
    }
    let steps_for = |h: f64| -> Result<usize> {
        let n = (t_end / h).round();
        if n < 1.0 || ((n * h - t_end) / t_end).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("t_end = {t_end} is not a multiple of h = {h}")));
        }
        Ok(n as usize)
    };
    let h_min = h_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_ref = h_min / 64.0;
    let reference = integrate(sys, method, y0, h_ref, steps_for(h_ref)?, cfg)?;
    let exact = reference.final_state().to_vec();
    let mut errors = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let run = integrate(sys, method, y0, h, steps_for(h)?, cfg)?;
        let err: Vec<f64> = run.final_state().iter().zip(&exact).map(|(a, b)| a - b).collect();
        errors.push(max_norm(&err));
    }
    let pts: Vec<(f64, f64)> = h_list.iter().zip(&errors).map(|(h, e)| (h.ln(), e.ln())).collect();
    Ok(ConvergenceFit { slope: linear_slope(&pts), step_sizes: h_list.to_vec(), errors })
}
