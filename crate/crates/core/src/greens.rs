//! Discrete Green's functions of `L` and of `L²` (Navier conditions), their
//! logarithmic singular parts and the anisotropic Hessian remainder.
//!
//! Derivative metrics skip every node within `2h` of the source or of the
//! boundary.

use serde::Serialize;

use crate::anisotropy::{evaluate_psi, CoefficientField, Mat2, Point, SingularityConstants};
use crate::diff;
use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, ScalarField, SparseOperator};
use crate::linsolve::SolveReport;

/// Relative residual for Green's columns; they are differentiated afterwards.
pub const GREENS_TOL: f64 = 1e-10;

/// Lowest value tolerated in a first-order column.
pub const POSITIVITY_FLOOR: f64 = -1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GreensKind {
    /// `L G = δ` with zero trace.
    FirstOrder,
    /// `L² G = δ` with `G = LG = 0` on the boundary.
    NavierBilaplacian,
}

#[derive(Clone, Debug)]
pub struct GreensColumn {
    pub source: usize,
    pub source_point: Point,
    pub kind: GreensKind,
    pub field: ScalarField,
    /// `L_h G`, kept for the bilaplacian kind. It is the first-order column of the same source.
    pub intermediate: Option<ScalarField>,
    pub reports: Vec<SolveReport>,
}

fn dirac(op: &SparseOperator, x0: usize) -> Result<Vec<f64>> {
    let dom = op.domain();
    let u = dom.unknown(x0).ok_or_else(|| {
        let p = dom.point(x0);
        Error::InvalidInput(format!("source node ({}, {}) is not interior", p[0], p[1]))
    })?;
    let mut rhs = vec![0.0; dom.n_interior()];
    rhs[u] = 1.0 / (dom.h() * dom.h());
    Ok(rhs)
}

/// Column `G_L(x₀, ·)` for the unit-mass discrete Dirac `e_{x₀}/h²`.
pub fn greens_column_l(op: &SparseOperator, x0: usize) -> Result<GreensColumn> {
    greens_column_l_tol(op, x0, GREENS_TOL)
}

pub fn greens_column_l_tol(op: &SparseOperator, x0: usize, tol: f64) -> Result<GreensColumn> {
    let rhs = dirac(op, x0)?;
    let (g, report) = op.solve_dirichlet(&rhs, None, tol, None)?;
    check_positive(&g)?;
    Ok(GreensColumn {
        source: x0,
        source_point: op.domain().point(x0),
        kind: GreensKind::FirstOrder,
        field: g,
        intermediate: None,
        reports: vec![report],
    })
}

fn check_positive(g: &ScalarField) -> Result<()> {
    let min = g.min_value();
    if min < POSITIVITY_FLOOR {
        return Err(Error::InvalidInput(format!(
            "first-order Green's column has minimum {min:e} below {POSITIVITY_FLOOR:e}"
        )));
    }
    Ok(())
}

/// Column `G_{L²}(x₀, ·)` by two nested Dirichlet solves.
pub fn greens_column_l2(op: &SparseOperator, x0: usize) -> Result<GreensColumn> {
    greens_column_l2_tol(op, x0, GREENS_TOL)
}

pub fn greens_column_l2_tol(op: &SparseOperator, x0: usize, tol: f64) -> Result<GreensColumn> {
    let first = greens_column_l_tol(op, x0, tol)?;
    let (g, report) = op.solve_dirichlet(&first.field.interior_values(), None, tol, None)?;
    let mut reports = first.reports;
    reports.push(report);
    Ok(GreensColumn {
        source: x0,
        source_point: first.source_point,
        kind: GreensKind::NavierBilaplacian,
        field: g,
        intermediate: Some(first.field),
        reports,
    })
}

/// Largest relative reciprocity defect `|G(xᵢ,xⱼ) − G(xⱼ,xᵢ)| / max(|G(xᵢ,xⱼ)|, |G(xⱼ,xᵢ)|)`
/// over all pairs of the given sources.
pub fn reciprocity_error(columns: &[GreensColumn]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, ca) in columns.iter().enumerate() {
        for cb in &columns[a + 1..] {
            let gab = ca.field.get(cb.source);
            let gba = cb.field.get(ca.source);
            let scale = gab.abs().max(gba.abs());
            if scale > 0.0 {
                worst = worst.max((gab - gba).abs() / scale);
            }
        }
    }
    worst
}

/// Remainder of `G` after removing the logarithmic singularity:
/// `f₁ = G_L + c₁ log ψ` or `f₂ = G_{L²} − (c₁/4) ψ log ψ`.
///
/// The source node, where `ψ = 0`, is set to zero.
pub fn singular_split(
    col: &GreensColumn,
    field: &CoefficientField,
    consts: &SingularityConstants,
) -> Result<ScalarField> {
    if consts.at != col.source_point {
        return Err(Error::InvalidInput(
            "singularity constants were computed at a different point".into(),
        ));
    }
    let dom = col.field.domain();
    let x = col.source_point;
    let mut out = ScalarField::zeros(dom);
    for k in 0..dom.n_nodes() {
        if !dom.is_active(k) || k == col.source {
            continue;
        }
        let psi = evaluate_psi(field, x, dom.point(k))?;
        let g = col.field.get(k);
        let v = match col.kind {
            GreensKind::FirstOrder => g + consts.c1 * psi.ln(),
            GreensKind::NavierBilaplacian => g - 0.25 * consts.c1 * psi * psi.ln(),
        };
        out.set(k, v);
    }
    Ok(out)
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Whether derivative metrics may use `node` for a source at `x0`.
pub fn is_measured(dom: &DiscreteDomain, x0: Point, node: usize) -> bool {
    let h = dom.h();
    dom.unknown(node).is_some()
        && distance(dom.point(node), x0) > 2.0 * h
        && -dom.signed_distance(node) >= 2.0 * h
}

fn sup_over_ball(
    f: &ScalarField,
    x0: Point,
    radius: f64,
    metric: impl Fn(&ScalarField, usize) -> Option<f64>,
) -> f64 {
    let dom = f.domain();
    dom.interior_nodes()
        .iter()
        .filter(|&&k| is_measured(dom, x0, k) && distance(dom.point(k), x0) <= radius)
        .filter_map(|&k| metric(f, k))
        .fold(0.0, f64::max)
}

/// Sup of the central-difference gradient norm over `r ≤ radius`.
pub fn gradient_sup(f: &ScalarField, x0: Point, radius: f64) -> f64 {
    sup_over_ball(f, x0, radius, |f, k| {
        diff::gradient(f, k).map(|g| g[0].hypot(g[1]))
    })
}

/// Sup of the largest third difference over `r ≤ radius`.
pub fn third_difference_sup(f: &ScalarField, x0: Point, radius: f64) -> f64 {
    sup_over_ball(f, x0, radius, |f, k| {
        diff::third_differences(f, k).map(|t| t.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
    })
}

/// Derivative sups of the split remainders and of the raw first-order column on one grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SplitSups {
    pub h: f64,
    pub f1_gradient: f64,
    pub f2_third_difference: f64,
    pub raw_gradient: f64,
}

/// Radius of the ball on which split regularity is measured.
pub const SPLIT_RADIUS: f64 = 0.5;

pub fn split_sups(
    op: &SparseOperator,
    field: &CoefficientField,
    consts: &SingularityConstants,
    x0: usize,
) -> Result<SplitSups> {
    let col2 = greens_column_l2(op, x0)?;
    let col1 = GreensColumn {
        source: x0,
        source_point: col2.source_point,
        kind: GreensKind::FirstOrder,
        field: col2.intermediate.clone().expect("bilaplacian column keeps its intermediate"),
        intermediate: None,
        reports: col2.reports[..1].to_vec(),
    };
    let p = col2.source_point;
    let f1 = singular_split(&col1, field, consts)?;
    let f2 = singular_split(&col2, field, consts)?;
    Ok(SplitSups {
        h: op.domain().h(),
        f1_gradient: gradient_sup(&f1, p, SPLIT_RADIUS),
        f2_third_difference: third_difference_sup(&f2, p, SPLIT_RADIUS),
        raw_gradient: gradient_sup(&col1.field, p, SPLIT_RADIUS),
    })
}

/// Matrix multiplying `½ div(A∇G)` in the Hessian decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `A(y)⁻¹` at the evaluation point.
    InverseAtPoint,
    /// `A(x₀)⁻¹` at the source.
    InverseAtSource,
    /// `(tr A(y)⁻¹ / 2) I`; the negative control.
    ScaledIdentity,
}

/// Per-annulus sups of the Hessian remainder `N = D²G − ½ div(A∇G) P` and of the singular term.
#[derive(Clone, Debug, Serialize)]
pub struct FrehseReport {
    pub h: f64,
    pub pairing: Pairing,
    /// Inner radii `r_k = 2^{-k}`; annulus `k` is `r_k ≤ |y − x₀| < 2r_k`, coarsest first.
    pub radii: Vec<f64>,
    pub sup_remainder: Vec<f64>,
    pub sup_singular: Vec<f64>,
    pub notes: Vec<String>,
}

impl FrehseReport {
    /// `sup_remainder / sup_singular` per annulus.
    pub fn ratios(&self) -> Vec<f64> {
        self.sup_remainder
            .iter()
            .zip(&self.sup_singular)
            .map(|(r, s)| r / s)
            .collect()
    }

    /// Finest-annulus ratio over coarsest-annulus ratio.
    pub fn dichotomy_ratio(&self) -> f64 {
        let r = self.ratios();
        match (r.first(), r.last()) {
            (Some(a), Some(b)) => b / a,
            _ => f64::NAN,
        }
    }

    /// Index of the annulus with inner radius `r`.
    pub fn annulus(&self, r: f64) -> Option<usize> {
        self.radii.iter().position(|&x| (x - r).abs() <= 1e-12 * r)
    }
}

/// Dyadic inner radii `2^{-k}`, `k = 2, 3, …` while `2^{-k} ≥ 4h`.
pub fn annulus_radii(h: f64) -> Vec<f64> {
    (2..)
        .map(|k| 0.5f64.powi(k))
        .take_while(|&r| r >= 4.0 * h * (1.0 - 1e-12))
        .collect()
}

fn max_abs_entry(m: &Mat2) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Annulus statistics of the Hessian decomposition with the `A(y)⁻¹` pairing.
pub fn frehse_residual(col: &GreensColumn, field: &CoefficientField) -> Result<FrehseReport> {
    frehse_residual_with(col, field, Pairing::InverseAtPoint)
}

pub fn frehse_residual_with(
    col: &GreensColumn,
    field: &CoefficientField,
    pairing: Pairing,
) -> Result<FrehseReport> {
    let lg = match (col.kind, &col.intermediate) {
        (GreensKind::NavierBilaplacian, Some(w)) => w,
        _ => {
            return Err(Error::InvalidInput(
                "Hessian remainder needs a bilaplacian column with its intermediate".into(),
            ))
        }
    };
    let dom = col.field.domain();
    let h = dom.h();
    let x0 = col.source_point;
    let radii = annulus_radii(h);
    let mut sup_remainder = vec![0.0; radii.len()];
    let mut sup_singular = vec![0.0; radii.len()];
    let mut counts = vec![0usize; radii.len()];
    let source_inv = field.inverse(x0)?;

    for &k in dom.interior_nodes() {
        if !is_measured(dom, x0, k) {
            continue;
        }
        let y = dom.point(k);
        let r = distance(y, x0);
        let Some(a) = radii.iter().position(|&rk| r >= rk && r < 2.0 * rk) else {
            continue;
        };
        let Some([d11, d12, d22]) = diff::hessian(&col.field, k) else {
            continue;
        };
        let hess = Mat2::new(d11, d12, d12, d22);
        // div(A∇G) = −L G.
        let half_div = -0.5 * lg.get(k);
        let inv_y = field.inverse(y)?;
        let p = match pairing {
            Pairing::InverseAtPoint => inv_y,
            Pairing::InverseAtSource => source_inv,
            Pairing::ScaledIdentity => Mat2::identity() * (0.5 * inv_y.trace()),
        };
        let n = hess - p * half_div;
        sup_remainder[a] = f64::max(sup_remainder[a], max_abs_entry(&n));
        sup_singular[a] = f64::max(sup_singular[a], half_div.abs() * max_abs_entry(&inv_y));
        counts[a] += 1;
    }

    let mut report = FrehseReport {
        h,
        pairing,
        radii: Vec::new(),
        sup_remainder: Vec::new(),
        sup_singular: Vec::new(),
        notes: Vec::new(),
    };
    for (a, &rk) in radii.iter().enumerate() {
        if counts[a] == 0 || rk < 2.0 * h {
            report
                .notes
                .push(format!("annulus at r = {rk} skipped: no measurable nodes"));
            continue;
        }
        report.radii.push(rk);
        report.sup_remainder.push(sup_remainder[a]);
        report.sup_singular.push(sup_singular[a]);
    }
    Ok(report)
}

/// Least-squares fit of per-annulus `sup |D²G|` against `|log r| + 1`.
#[derive(Clone, Debug, Serialize)]
pub struct LogBoundFit {
    pub slope: f64,
    pub offset: f64,
    /// `max_k |s_k − fit_k| / fit_k`; infinite if the fit is not positive on every annulus.
    pub max_overshoot: f64,
    pub radii: Vec<f64>,
    pub sups: Vec<f64>,
}

/// Hessian growth fit over the dyadic annuli with `4h ≤ r ≤ 1/4`.
pub fn log_bound_check(col: &GreensColumn) -> Result<LogBoundFit> {
    let dom = col.field.domain();
    let x0 = col.source_point;
    let radii = annulus_radii(dom.h());
    let mut sups = vec![0.0f64; radii.len()];
    for &k in dom.interior_nodes() {
        if !is_measured(dom, x0, k) {
            continue;
        }
        let r = distance(dom.point(k), x0);
        let Some(a) = radii.iter().position(|&rk| r >= rk && r < 2.0 * rk) else {
            continue;
        };
        if let Some(hs) = diff::hessian(&col.field, k) {
            sups[a] = sups[a].max(hs.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
        }
    }
    if radii.len() < 2 {
        return Err(Error::InvalidInput("grid too coarse for two annuli".into()));
    }
    let t: Vec<f64> = radii.iter().map(|r| r.ln().abs() + 1.0).collect();
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let sm = sups.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - tm).powi(2)).sum();
    let sts: f64 = t.iter().zip(&sups).map(|(a, b)| (a - tm) * (b - sm)).sum();
    let slope = sts / stt;
    let offset = sm - slope * tm;
    let max_overshoot = t
        .iter()
        .zip(&sups)
        .map(|(ti, si)| {
            let fit = slope * ti + offset;
            if fit > 0.0 {
                (si - fit).abs() / fit
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(LogBoundFit {
        slope,
        offset,
        max_overshoot,
        radii,
        sups,
    })
}

/// Least-squares slope of `G` against `−log |y − x₀|` over `r_min ≤ r ≤ r_max`.
///
/// For the identity field and a centred source on the unit disk this tends to `1/(2π)`.
pub fn log_slope(col: &GreensColumn, r_min: f64, r_max: f64) -> Result<f64> {
    let dom = col.field.domain();
    let x0 = col.source_point;
    let (mut n, mut st, mut sg, mut stt, mut stg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &k in dom.interior_nodes() {
        let r = distance(dom.point(k), x0);
        if r < r_min || r > r_max {
            continue;
        }
        let t = -r.ln();
        let g = col.field.get(k);
        n += 1.0;
        st += t;
        sg += g;
        stt += t * t;
        stg += t * g;
    }
    let det = n * stt - st * st;
    if n < 3.0 || det <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "no spread of nodes in {r_min} ≤ r ≤ {r_max}"
        )));
    }
    Ok((n * stg - st * sg) / det)
}
