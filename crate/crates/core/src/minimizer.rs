//! Minimization of `E(u) = ∫(Lu)² + |{u > 0}|` over fields with a prescribed
//! trace, by continuation in a smoothed indicator.
//!
//! The indicator is replaced by the cubic smoothstep `H_ε`. Each stage runs a
//! descent whose direction applies `L_h⁻²` to the gradient, so a unit step is
//! the exact minimizer of the bending term plus the linearized measure term.

use std::io::{self, Write};

use serde::Serialize;

use crate::diff;
use crate::error::{Error, Result};
use crate::grid::{ScalarField, SparseOperator};
use crate::linsolve::{self, SolveReport};

/// `H_ε(t)`: 0 for `t ≤ 0`, `3s² − 2s³` with `s = t/ε` on `(0, ε)`, 1 beyond.
pub fn smoothstep(t: f64, eps: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= eps {
        1.0
    } else {
        let s = t / eps;
        s * s * (3.0 - 2.0 * s)
    }
}

pub fn smoothstep_derivative(t: f64, eps: f64) -> f64 {
    if t <= 0.0 || t >= eps {
        0.0
    } else {
        let s = t / eps;
        6.0 * s * (1.0 - s) / eps
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Trial step `s` instead of 1.
    Fixed(f64),
    /// Unit trial step.
    Backtracking,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyConfig {
    pub epsilon_schedule: Vec<f64>,
    pub step_rule: StepRule,
    /// Stage ends once the preconditioned step is below `tol_grad · max u₀` in sup norm.
    pub tol_grad: f64,
    /// Iteration cap per stage.
    pub max_outer: usize,
    pub solve_tol: f64,
    /// Continuation stops before any width below `resolve_factor · h · max|∇u|`
    /// on the sign-change nodes; 0 runs the whole schedule.
    pub resolve_factor: f64,
}

/// First smoothing width relative to `max u₀`.
pub const EPS0_FACTOR: f64 = 2.0;
/// Absolute floor of the smoothing width.
pub const EPS_FLOOR: f64 = 1e-4;
/// Exhausted line searches tolerated before the descent is declared divergent.
///
/// Every trial step is halved until the Armijo condition holds or it falls below `MIN_STEP`.
pub const MAX_FAILURES: usize = 50;
/// Relative energy tolerance when checking monotonicity.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Smallest smoothing band, in grid cells across the nodal set.
pub const DEFAULT_RESOLVE_FACTOR: f64 = 2.0;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / 1024.0;

impl EnergyConfig {
    pub fn new(
        epsilon_schedule: Vec<f64>,
        step_rule: StepRule,
        tol_grad: f64,
        max_outer: usize,
    ) -> Result<Self> {
        if epsilon_schedule.is_empty()
            || epsilon_schedule.iter().any(|e| !(e.is_finite() && *e > 0.0))
            || epsilon_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidInput(format!(
                "epsilon schedule must be positive and strictly decreasing: {epsilon_schedule:?}"
            )));
        }
        if !(tol_grad > 0.0) || max_outer == 0 {
            return Err(Error::InvalidInput("tol_grad and max_outer must be positive".into()));
        }
        if let StepRule::Fixed(s) = step_rule {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::InvalidInput(format!("fixed step {s} outside (0, 1]")));
            }
        }
        Ok(EnergyConfig {
            epsilon_schedule,
            step_rule,
            tol_grad,
            max_outer,
            solve_tol: 1e-8,
            resolve_factor: DEFAULT_RESOLVE_FACTOR,
        })
    }

    /// Halving schedule from `EPS0_FACTOR · max u₀` down to `floor`, which is
    /// raised to `max(2h², EPS_FLOOR)` if smaller.
    pub fn halving(u0_max: f64, h: f64, floor: f64) -> Result<Self> {
        let floor = floor.max(2.0 * h * h).max(EPS_FLOOR);
        let mut eps = EPS0_FACTOR * u0_max;
        if !(eps > floor) {
            return Self::new(vec![floor], StepRule::Backtracking, 1e-6, 200);
        }
        let mut schedule = Vec::new();
        while eps > floor {
            schedule.push(eps);
            eps *= 0.5;
        }
        schedule.push(floor);
        Self::new(schedule, StepRule::Backtracking, 1e-6, 200)
    }

    pub fn final_epsilon(&self) -> f64 {
        *self.epsilon_schedule.last().expect("schedule is non-empty")
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HistoryRow {
    pub stage: usize,
    pub iter: usize,
    pub e_eps: f64,
    pub e_sharp: f64,
    pub max_lu: f64,
}

#[derive(Clone, Debug)]
pub struct MinimizerState {
    pub u: ScalarField,
    /// `L_h u` on interior nodes.
    pub v: ScalarField,
    pub energy_bending: f64,
    /// Smoothed measure term at `epsilon`.
    pub energy_measure: f64,
    pub epsilon: f64,
    pub history: Vec<HistoryRow>,
    /// Sharp energy at the end of every stage.
    pub stage_sharp: Vec<f64>,
    /// Whether each stage met `tol_grad` before `max_outer`.
    pub stage_converged: Vec<bool>,
}

impl MinimizerState {
    pub fn energy_smoothed(&self) -> f64 {
        self.energy_bending + self.energy_measure
    }

    pub fn energy_sharp(&self) -> f64 {
        self.energy_bending + positive_measure(&self.u)
    }

    /// `stage,iter,E_eps,E_sharp,max_Lu`.
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "stage,iter,E_eps,E_sharp,max_Lu")?;
        for r in &self.history {
            writeln!(w, "{},{},{},{},{}", r.stage, r.iter, r.e_eps, r.e_sharp, r.max_lu)?;
        }
        Ok(())
    }
}

/// `h² · #{interior nodes with u > 0}`.
pub fn positive_measure(u: &ScalarField) -> f64 {
    let dom = u.domain();
    let count = dom.interior_nodes().iter().filter(|&&k| u.get(k) > 0.0).count();
    count as f64 * dom.h() * dom.h()
}

/// `(h² Σ v², v)` with `v = L_h u` on the interior.
fn bending(op: &SparseOperator, u: &ScalarField) -> (f64, Vec<f64>) {
    let mut v = op.matrix().mul_vec(&u.interior_values());
    for (vi, ci) in v.iter_mut().zip(op.boundary_contribution(u)) {
        *vi += ci;
    }
    let h2 = op.domain().h().powi(2);
    (v.iter().map(|x| x * x).sum::<f64>() * h2, v)
}

fn measure_smoothed(x: &[f64], eps: f64, h2: f64) -> f64 {
    x.iter().map(|&t| smoothstep(t, eps)).sum::<f64>() * h2
}

/// Sharp discrete energy `h²Σ(L_hu)² + h²#{u > 0}`.
pub fn sharp_energy(op: &SparseOperator, u: &ScalarField) -> f64 {
    bending(op, u).0 + positive_measure(u)
}

/// `E_ε(u)` and its gradient `2L_hᵀ(L_hu) + H_ε′(u)` on interior unknowns.
///
/// The gradient is with respect to the `h²`-weighted inner product, so the
/// directional derivative along `d` is `h² Σ gradᵢ dᵢ`.
pub fn smoothed_energy(op: &SparseOperator, u: &ScalarField, eps: f64) -> Result<(f64, Vec<f64>)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("smoothing width {eps} must be positive")));
    }
    let h2 = op.domain().h().powi(2);
    let (eb, v) = bending(op, u);
    let x = u.interior_values();
    let mut grad = op.matrix().mul_vec(&v);
    for (g, &t) in grad.iter_mut().zip(&x) {
        *g = 2.0 * *g + smoothstep_derivative(t, eps);
    }
    Ok((eb + measure_smoothed(&x, eps, h2), grad))
}

/// Solution of `L u = 0` with trace `u0`.
pub fn harmonic_extension(op: &SparseOperator, u0: &ScalarField) -> Result<ScalarField> {
    let n = op.domain().n_interior();
    op.solve_dirichlet(&vec![0.0; n], Some(u0), 1e-12, None)
        .map(|(u, _)| u)
}

struct Descent<'a> {
    op: &'a SparseOperator,
    trace: &'a ScalarField,
    h2: f64,
    /// Boundary contribution `C g` of the trace to `L_h u`.
    bc: Vec<f64>,
    tol: f64,
    warm_t: Vec<f64>,
    warm_s: Vec<f64>,
}

impl Descent<'_> {
    fn lu(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.op.matrix().mul_vec(x);
        for (vi, ci) in v.iter_mut().zip(&self.bc) {
            *vi += ci;
        }
        v
    }

    fn energy(&self, x: &[f64], eps: f64) -> (f64, f64, Vec<f64>) {
        let v = self.lu(x);
        let eb = v.iter().map(|a| a * a).sum::<f64>() * self.h2;
        (eb, measure_smoothed(x, eps, self.h2), v)
    }

    fn solve(&self, rhs: &[f64], guess: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let n = rhs.len();
        let (x, rep) = linsolve::solve_spd_from(
            self.op.matrix(),
            rhs,
            guess.to_vec(),
            self.tol,
            linsolve::default_max_iter(n),
        )?;
        if !rep.converged {
            return Err(Error::NotConverged {
                iterations: rep.iterations,
                residual: rep.final_residual,
                tol: self.tol,
            });
        }
        Ok((x, rep))
    }

    /// `d = −L_h⁻¹(v + ½ L_h⁻¹ H_ε′(u))`, the gradient preconditioned by `½ L_h⁻²`.
    fn direction(&mut self, x: &[f64], v: &[f64], eps: f64) -> Result<Vec<f64>> {
        let hp: Vec<f64> = x.iter().map(|&t| smoothstep_derivative(t, eps)).collect();
        let (t, _) = self.solve(&hp, &self.warm_t)?;
        let rhs: Vec<f64> = v.iter().zip(&t).map(|(a, b)| a + 0.5 * b).collect();
        let (s, _) = self.solve(&rhs, &self.warm_s)?;
        self.warm_t = t;
        self.warm_s = s.clone();
        Ok(s.into_iter().map(|a| -a).collect())
    }

    fn field(&self, x: &[f64]) -> ScalarField {
        let mut u = self.trace.clone();
        u.set_interior(x);
        u
    }
}

/// Continuation descent from the harmonic extension of `trace`.
///
/// Requires `trace > 0` on every boundary node.
pub fn minimize(op: &SparseOperator, trace: &ScalarField, cfg: &EnergyConfig) -> Result<MinimizerState> {
    let dom = op.domain();
    let h = dom.h();
    if let Some(&k) = dom.boundary_nodes().iter().find(|&&k| !(trace.get(k) > 0.0)) {
        let p = dom.point(k);
        return Err(Error::InvalidInput(format!(
            "boundary datum must be positive; got {} at ({}, {})",
            trace.get(k),
            p[0],
            p[1]
        )));
    }
    if cfg.final_epsilon() < 2.0 * h * h * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "final smoothing width {} below the resolvable 2h² = {}",
            cfg.final_epsilon(),
            2.0 * h * h
        )));
    }
    let u0_scale = dom
        .boundary_nodes()
        .iter()
        .fold(0.0f64, |m, &k| m.max(trace.get(k).abs()));

    let init = harmonic_extension(op, trace)?;
    let n = dom.n_interior();
    let mut st = Descent {
        op,
        trace,
        h2: h * h,
        bc: op.boundary_contribution(trace),
        tol: cfg.solve_tol,
        warm_t: vec![0.0; n],
        warm_s: vec![0.0; n],
    };
    let mut x = init.interior_values();
    let mut failures = 0;
    let mut history = Vec::new();
    let mut stage_sharp = Vec::new();
    let mut stage_converged = Vec::new();
    let sharp = |x: &[f64], eb: f64| eb + x.iter().filter(|&&t| t > 0.0).count() as f64 * h * h;
    let max_of = |v: &[f64]| v.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a));

    let mut eps_used = cfg.epsilon_schedule[0];
    for (stage, &eps) in cfg.epsilon_schedule.iter().enumerate() {
        if stage > 0 && cfg.resolve_factor > 0.0 {
            let g = max_gradient_on_crossings(&st.field(&x));
            if eps < cfg.resolve_factor * h * g {
                break;
            }
        }
        eps_used = eps;
        let (mut eb, mut em, mut v) = st.energy(&x, eps);
        history.push(HistoryRow {
            stage,
            iter: 0,
            e_eps: eb + em,
            e_sharp: sharp(&x, eb),
            max_lu: max_of(&v),
        });
        let mut converged = false;
        for iter in 1..=cfg.max_outer {
            let d = st.direction(&x, &v, eps)?;
            let dmax = d.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            if dmax <= cfg.tol_grad * u0_scale {
                converged = true;
                break;
            }
            // Directional derivative h² Σ grad·d with grad = 2L_h v + H′.
            let lv = op.matrix().mul_vec(&v);
            let slope: f64 = x
                .iter()
                .zip(&lv)
                .zip(&d)
                .map(|((&t, &l), &di)| (2.0 * l + smoothstep_derivative(t, eps)) * di)
                .sum::<f64>()
                * st.h2;
            let e = eb + em;
            let mut alpha = match cfg.step_rule {
                StepRule::Fixed(s) => s,
                StepRule::Backtracking => 1.0,
            };
            let accepted = loop {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                let (tb, tm, tv) = st.energy(&trial, eps);
                if tb + tm <= e + ARMIJO * alpha * slope {
                    break Some((trial, tb, tm, tv));
                }
                alpha *= 0.5;
                if alpha < MIN_STEP {
                    break None;
                }
            };
            let Some((trial, tb, tm, tv)) = accepted else {
                // No admissible decrease along d: the stage ends at the step floor.
                failures += 1;
                if failures > MAX_FAILURES {
                    return Err(Error::Diverged {
                        failures,
                        energy: e,
                        history: history.iter().map(|r: &HistoryRow| r.e_eps).collect(),
                    });
                }
                break;
            };
            let decrease = e - (tb + tm);
            x = trial;
            eb = tb;
            em = tm;
            v = tv;
            history.push(HistoryRow {
                stage,
                iter,
                e_eps: eb + em,
                e_sharp: sharp(&x, eb),
                max_lu: max_of(&v),
            });
            if decrease <= MONOTONE_TOL * e.abs() {
                converged = true;
                break;
            }
        }
        stage_sharp.push(sharp(&x, eb));
        stage_converged.push(converged);
    }

    let eps = eps_used;
    let (eb, em, v) = st.energy(&x, eps);
    Ok(MinimizerState {
        u: st.field(&x),
        v: ScalarField::from_interior(dom, &v),
        energy_bending: eb,
        energy_measure: em,
        epsilon: eps,
        history,
        stage_sharp,
        stage_converged,
    })
}

/// `max L_h u` over the interior.
pub fn supersolution_check(state: &MinimizerState) -> f64 {
    let dom = state.v.domain();
    dom.interior_nodes()
        .iter()
        .map(|&k| state.v.get(k))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest `|L_h u|` over interior nodes with a boundary node among their eight neighbours.
pub fn boundary_adjacent_lu(state: &MinimizerState) -> f64 {
    let dom = state.v.domain();
    dom.interior_nodes()
        .iter()
        .filter(|&&k| {
            (-1..=1).any(|dj| {
                (-1..=1).any(|di| {
                    dom.offset(k, di, dj)
                        .is_some_and(|m| dom.unknown(m).is_none())
                })
            })
        })
        .map(|&k| state.v.get(k).abs())
        .fold(0.0, f64::max)
}

/// Minimum distance to the boundary for the semiconvexity subdomain.
pub const SEMICONVEXITY_MARGIN: f64 = 0.1;

/// Smallest eigenvalue of the difference Hessian over nodes at least
/// [`SEMICONVEXITY_MARGIN`] inside the boundary.
pub fn semiconvexity_metric(u: &ScalarField) -> f64 {
    let dom = u.domain();
    dom.interior_nodes()
        .iter()
        .filter(|&&k| dom.signed_distance(k) <= -SEMICONVEXITY_MARGIN)
        .filter_map(|&k| diff::hessian_min_eigenvalue(u, k))
        .fold(f64::INFINITY, f64::min)
}

/// Largest central-difference gradient norm at interior nodes where `u`
/// changes sign towards an axis neighbour.
pub fn max_gradient_on_crossings(u: &ScalarField) -> f64 {
    let dom = u.domain();
    dom.interior_nodes()
        .iter()
        .filter(|&&k| {
            [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(di, dj)| {
                dom.offset(k, di, dj)
                    .is_some_and(|m| dom.is_active(m) && (u.get(m) > 0.0) != (u.get(k) > 0.0))
            })
        })
        .filter_map(|&k| diff::gradient(u, k).map(|g| g[0].hypot(g[1])))
        .fold(0.0, f64::max)
}

/// `|{0 < u < ε}| / ε` by interior-node counting.
///
/// Fails when `ε < 4 h · max|∇u|` on the sign-change nodes, where the strip is
/// thinner than the grid can resolve.
pub fn strip_measure_ratio(u: &ScalarField, eps_probe: f64) -> Result<f64> {
    let dom = u.domain();
    let h = dom.h();
    let g = max_gradient_on_crossings(u);
    if !(eps_probe > 0.0) || eps_probe < 4.0 * g * h {
        return Err(Error::InvalidInput(format!(
            "probe width {eps_probe} below the resolvable 4h·max|∇u| = {}",
            4.0 * g * h
        )));
    }
    let count = dom
        .interior_nodes()
        .iter()
        .filter(|&&k| {
            let t = u.get(k);
            t > 0.0 && t < eps_probe
        })
        .count();
    Ok(count as f64 * h * h / eps_probe)
}
