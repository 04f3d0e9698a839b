//! Executes the requested checks on one grid or on a refinement ladder and
//! assembles the JSON report.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use bendfree_core::anisotropy::{d1_quadrature, Point, DEFAULT_CIRCLE_NODES};
use bendfree_core::greens::{
    self, frehse_residual_with, greens_column_l2, log_bound_check, log_slope, split_sups,
    FrehseReport, GreensColumn, LogBoundFit, Pairing, SplitSups,
};
use bendfree_core::grid::{assemble_l, build_domain, DiscreteDomain, ScalarField, Shape, SparseOperator};
use bendfree_core::minimizer::{
    boundary_adjacent_lu, minimize, semiconvexity_metric, supersolution_check, EnergyConfig,
    MinimizerState,
};
use bendfree_core::nodal::{
    domain_variation_residual, el_residual, extract_nodal, radial_bump, IdentityCheck, NodalSet,
    SINGULAR_GRAD,
};
use bendfree_core::CoefficientField;

use crate::config::{Check, RunConfig, MAX_RESOLUTION};
use crate::{CliError, Stage};

pub const SYMMETRY_LIMIT: f64 = 1e-9;
pub const LOG_SLOPE_TOL: f64 = 0.03;
pub const DICHOTOMY_LIMIT: f64 = 0.5;
pub const REMAINDER_BAND: [f64; 2] = [0.02, 0.06];
pub const SINGULAR_GROWTH_MIN: f64 = 1.3;
pub const REMAINDER_DRIFT_MAX: f64 = 1.2;
pub const SPLIT_GROWTH_MAX: f64 = 2.0;
pub const RAW_GROWTH_MIN: f64 = 1.5;
pub const ENERGY_AREA_FACTOR: f64 = 1.02;
pub const SUPERSOLUTION_TOL: f64 = 1e-6;
pub const CLEARANCE_MIN: f64 = 0.05;
pub const IDENTITY_LIMIT: f64 = 0.10;
pub const EMPTY_SET_TOL: f64 = 1e-8;
pub const TREND_LIMIT: f64 = 0.7;
pub const BOUNDARY_LU_DECAY: f64 = 1.3;
pub const GRADIENT_KEEP: f64 = 0.5;
pub const MAX_LEVELS: usize = 4;
pub const BANK_SIZE: usize = 5;

/// Probe functions for the first-variation identities: radial bumps centred on
/// the nodal set, each paired with a direction for the vector bank.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeBank {
    pub radius: f64,
    pub centres: Vec<Point>,
    pub directions: Vec<[f64; 2]>,
}

/// Tilts of the vector probes away from the normal, in radians.
const TILTS: [f64; BANK_SIZE] = [0.0, 0.3, -0.3, 0.6, -0.6];

impl ProbeBank {
    pub fn on_nodal_set(nodal: &NodalSet, inradius: f64) -> Self {
        let radius = (0.75 * nodal.boundary_clearance()).min(0.2 * inradius);
        let samples = nodal.sample_points(BANK_SIZE);
        let directions = samples
            .iter()
            .zip(TILTS)
            .map(|(&(_, n), a)| [n[0] * a.cos() - n[1] * a.sin(), n[0] * a.sin() + n[1] * a.cos()])
            .collect();
        ProbeBank {
            radius,
            centres: samples.into_iter().map(|(c, _)| c).collect(),
            directions,
        }
    }

    fn scalar(&self) -> Vec<impl Fn(Point) -> f64 + '_> {
        self.centres
            .iter()
            .map(move |&c| move |p: Point| radial_bump(p, c, self.radius))
            .collect()
    }

    fn vector(&self) -> Vec<impl Fn(Point) -> [f64; 2] + '_> {
        self.centres
            .iter()
            .zip(&self.directions)
            .map(move |(&c, &d)| {
                move |p: Point| {
                    let b = radial_bump(p, c, self.radius);
                    [b * d[0], b * d[1]]
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckResult {
    pub pass: bool,
    pub items: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckResult {
    fn item(&mut self, name: &str, ok: bool) {
        self.items.insert(name.to_string(), ok);
    }

    fn finish(mut self) -> Self {
        self.pass = self.items.values().all(|&v| v);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GreensMetrics {
    pub sources: Vec<Point>,
    pub symmetry_max_err: f64,
    pub symmetry_first_order: f64,
    pub symmetry_bilaplacian: f64,
    #[serde(rename = "min_GL")]
    pub min_gl: f64,
    /// `2π ×` slope of the centred column against `−log r`; only on disks.
    pub log_slope_normalized: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrehseMetrics {
    pub source: Point,
    pub report: FrehseReport,
    pub dichotomy: f64,
    pub control: FrehseReport,
    pub control_dichotomy: f64,
    pub log_fit: LogBoundFit,
    /// Coarse grid first; empty when the coarse companion grid would be too small.
    pub split_refinement: Vec<SplitSups>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimizeMetrics {
    pub epsilon_schedule: Vec<f64>,
    pub epsilon_final: f64,
    pub energy_final: f64,
    pub energy_smoothed: f64,
    pub energy_bending: f64,
    pub area: f64,
    #[serde(rename = "max_Lu")]
    pub max_lu: f64,
    #[serde(rename = "boundary_adjacent_Lu")]
    pub boundary_adjacent_lu: f64,
    pub semiconvexity: f64,
    pub u_min: f64,
    pub max_dev_from_const: Option<f64>,
    pub iterations: usize,
    pub stage_converged: Vec<bool>,
    pub collar_positive: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodalMetrics {
    pub nonempty: bool,
    pub length: f64,
    pub loops: usize,
    pub components_negative: usize,
    pub min_grad: Option<f64>,
    pub boundary_clearance: Option<f64>,
    pub measure_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ElMetrics {
    pub bank: ProbeBank,
    pub euler_lagrange: Vec<IdentityCheck>,
    pub domain_variation: Vec<IdentityCheck>,
    pub el_max: f64,
    pub dv_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Level {
    pub resolution: usize,
    pub h: f64,
    pub area_error: f64,
    pub greens: Option<GreensMetrics>,
    pub frehse: Option<FrehseMetrics>,
    pub minimize: Option<MinimizeMetrics>,
    pub nodal: Option<NodalMetrics>,
    pub el: Option<ElMetrics>,
    pub results: BTreeMap<String, CheckResult>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub resolution: usize,
    pub h: f64,
    pub area_error: f64,
    pub symmetry_max_err: Option<f64>,
    pub energy_final: Option<f64>,
    pub boundary_adjacent_lu: Option<f64>,
    pub min_grad: Option<f64>,
    pub components: Option<usize>,
    pub el_max: Option<f64>,
    pub dv_max: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Convergence {
    pub rows: Vec<ConvergenceRow>,
    /// Consecutive coarse-to-fine ratios, fine over coarse.
    pub ratios: BTreeMap<String, Vec<f64>>,
    pub result: CheckResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub shape: String,
    pub field: String,
    pub u0: String,
    pub checks: Vec<Check>,
    pub symmetry_max_err: Option<f64>,
    #[serde(rename = "min_GL")]
    pub min_gl: Option<f64>,
    pub frehse: Option<FrehseReport>,
    pub split_refinement: Option<Vec<SplitSups>>,
    pub energy_final: Option<f64>,
    pub nodal_nonempty: Option<bool>,
    pub max_dev_from_const: Option<f64>,
    pub levels: Vec<Level>,
    pub convergence: Option<Convergence>,
    pub results: BTreeMap<String, CheckResult>,
    pub pass: bool,
    pub timestamp: u64,
}

/// Where artifacts go; `None` disables writing.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn create(&self, rel: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(rel);
        let io_err = |e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        let file = fs::File::create(&path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(io_err)
    }
}

fn inradius(shape: &Shape) -> f64 {
    match *shape {
        Shape::Disk { radius, .. } => radius,
        Shape::Rect { min, max } => 0.5 * (max[0] - min[0]).min(max[1] - min[1]),
    }
}

fn centre(shape: &Shape) -> Point {
    let [lo, hi] = shape.bbox();
    [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]
}

fn coefficient(cfg: &RunConfig) -> Result<CoefficientField, CliError> {
    let [lo, hi] = cfg.shape.bbox();
    let pad = 0.1 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    CoefficientField::with_box(
        cfg.field.clone(),
        [[lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad]],
    )
    .stage("anisotropy")
}

fn energy_config(cfg: &RunConfig, trace_max: f64, h: f64) -> Result<EnergyConfig, CliError> {
    let e = &cfg.energy;
    let mut out = match &e.schedule {
        Some(s) => EnergyConfig::new(s.clone(), e.step_rule, e.tol_grad, e.max_outer),
        None => EnergyConfig::halving(trace_max, h, e.eps_floor).and_then(|mut c| {
            c.step_rule = e.step_rule;
            c.tol_grad = e.tol_grad;
            c.max_outer = e.max_outer;
            EnergyConfig::new(c.epsilon_schedule, c.step_rule, c.tol_grad, c.max_outer)
        }),
    }
    .stage("minimizer")?;
    out.resolve_factor = e.resolve_factor;
    out.solve_tol = e.solve_tol;
    Ok(out)
}

struct Context {
    cfg: RunConfig,
    field: CoefficientField,
    dom: Arc<DiscreteDomain>,
    op: SparseOperator,
    sink: Sink,
}

impl Context {
    fn suffix(&self, stem: &str) -> String {
        format!("{stem}_{}.csv", self.cfg.resolution)
    }

    fn source_point(&self) -> Point {
        self.cfg.source.unwrap_or_else(|| centre(&self.cfg.shape))
    }

    fn greens(&self, res: &mut CheckResult) -> Result<GreensMetrics, CliError> {
        let c = self.source_point();
        let r = 0.3 * inradius(&self.cfg.shape);
        let mut points = vec![c];
        for k in 0..4 {
            let a = 0.4 + k as f64 * std::f64::consts::FRAC_PI_2;
            points.push([c[0] + r * a.cos(), c[1] + r * a.sin()]);
        }
        let mut l2 = Vec::new();
        for p in &points {
            l2.push(greens_column_l2(&self.op, self.dom.nearest_node(*p)).stage("greens")?);
        }
        let l1: Vec<GreensColumn> = l2
            .iter()
            .map(|col| GreensColumn {
                source: col.source,
                source_point: col.source_point,
                kind: greens::GreensKind::FirstOrder,
                field: col.intermediate.clone().expect("bilaplacian column keeps its intermediate"),
                intermediate: None,
                reports: col.reports[..1].to_vec(),
            })
            .collect();
        let sym1 = greens::reciprocity_error(&l1);
        let sym2 = greens::reciprocity_error(&l2);
        let min_gl = l1.iter().map(|c| c.field.min_value()).fold(f64::INFINITY, f64::min);
        let symmetry_max_err = sym1.max(sym2);
        res.item("symmetry", symmetry_max_err <= SYMMETRY_LIMIT);
        res.item("nonnegative", min_gl >= greens::POSITIVITY_FLOOR);

        let centred_disk = matches!(self.cfg.shape, Shape::Disk { center, .. } if center == c);
        let log_slope_normalized = if centred_disk {
            let rad = inradius(&self.cfg.shape);
            let s = log_slope(&l1[0], 0.2 * rad, 0.5 * rad).stage("greens")?;
            Some(2.0 * std::f64::consts::PI * s)
        } else {
            None
        };
        match (log_slope_normalized, self.field.kind()) {
            (Some(s), bendfree_core::anisotropy::FieldKind::Identity) => {
                res.item("log_slope", (s - 1.0).abs() <= LOG_SLOPE_TOL)
            }
            _ => res.notes.push("log-slope oracle applies to the identity field on a centred disk only".into()),
        }
        self.sink.create(&format!("fields/{}", self.suffix("greens_L")), |w| l1[0].field.write_csv(w))?;
        self.sink.create(&format!("fields/{}", self.suffix("greens_L2")), |w| l2[0].field.write_csv(w))?;
        Ok(GreensMetrics {
            sources: l2.iter().map(|c| c.source_point).collect(),
            symmetry_max_err,
            symmetry_first_order: sym1,
            symmetry_bilaplacian: sym2,
            min_gl,
            log_slope_normalized,
        })
    }

    fn frehse(&self, res: &mut CheckResult) -> Result<FrehseMetrics, CliError> {
        let x0 = self.dom.nearest_node(self.source_point());
        let col = greens_column_l2(&self.op, x0).stage("greens")?;
        let report = frehse_residual_with(&col, &self.field, Pairing::InverseAtPoint).stage("greens")?;
        let control = frehse_residual_with(&col, &self.field, Pairing::ScaledIdentity).stage("greens")?;
        let log_fit = log_bound_check(&col).stage("greens")?;
        let dichotomy = report.dichotomy_ratio();
        let control_dichotomy = control.dichotomy_ratio();
        res.item("dichotomy", dichotomy <= DICHOTOMY_LIMIT);
        let identity = matches!(self.field.kind(), bendfree_core::anisotropy::FieldKind::Identity);
        let overshoot_limit = if identity { 0.10 } else { 0.15 };
        res.item("log_bound", log_fit.max_overshoot <= overshoot_limit);
        if identity {
            let fine = *report.sup_remainder.last().unwrap_or(&f64::NAN);
            res.item(
                "remainder_band",
                (REMAINDER_BAND[0]..=REMAINDER_BAND[1]).contains(&fine),
            );
            let (a, b) = match (report.annulus(0.25), report.annulus(0.0625)) {
                (Some(a), Some(b)) => (a, b),
                _ => (0, report.radii.len().saturating_sub(1)),
            };
            let growth = report.sup_singular[b] / report.sup_singular[a];
            let drift = report.sup_remainder[b] / report.sup_remainder[a];
            res.item("singular_growth", growth >= SINGULAR_GROWTH_MIN);
            res.item(
                "remainder_flat",
                drift <= REMAINDER_DRIFT_MAX && drift >= 1.0 / REMAINDER_DRIFT_MAX,
            );
        }

        let mut split = Vec::new();
        let coarse_res = (self.cfg.resolution + 1) / 2;
        if coarse_res >= 33 {
            let coarse_dom = build_domain(self.cfg.shape, coarse_res).stage("grid")?;
            let coarse_op = assemble_l(&self.field, &coarse_dom).stage("grid")?;
            for (op, dom) in [(&coarse_op, &coarse_dom), (&self.op, &self.dom)] {
                let node = dom.nearest_node(self.source_point());
                let consts = d1_quadrature(&self.field, dom.point(node), DEFAULT_CIRCLE_NODES)
                    .stage("anisotropy")?;
                split.push(split_sups(op, &self.field, &consts, node).stage("greens")?);
            }
            let (c, f) = (&split[0], &split[1]);
            res.item("split_f1_bounded", f.f1_gradient / c.f1_gradient <= SPLIT_GROWTH_MAX);
            res.item(
                "split_f2_bounded",
                f.f2_third_difference / c.f2_third_difference <= SPLIT_GROWTH_MAX,
            );
            res.item("split_raw_grows", f.raw_gradient / c.raw_gradient >= RAW_GROWTH_MIN);
        } else {
            res.notes.push(format!(
                "split refinement skipped: companion resolution {coarse_res} is below 33"
            ));
        }
        Ok(FrehseMetrics {
            source: col.source_point,
            report,
            dichotomy,
            control,
            control_dichotomy,
            log_fit,
            split_refinement: split,
        })
    }

    fn minimize(&self, res: &mut CheckResult, write: bool) -> Result<(MinimizerState, MinimizeMetrics), CliError> {
        let u0 = &self.cfg.u0;
        let trace = ScalarField::boundary_trace(&self.dom, |p| u0.eval(p));
        let trace_max = self
            .dom
            .boundary_nodes()
            .iter()
            .map(|&k| trace.get(k))
            .fold(f64::NEG_INFINITY, f64::max);
        let ecfg = energy_config(&self.cfg, trace_max, self.dom.h())?;
        let st = minimize(&self.op, &trace, &ecfg).stage("minimizer")?;
        let area = self.cfg.shape.area();
        let energy_final = st.energy_sharp();
        let max_lu = supersolution_check(&st);
        let max_dev_from_const = u0.as_constant().map(|c| {
            self.dom
                .interior_nodes()
                .iter()
                .map(|&k| (st.u.get(k) - c).abs())
                .fold(0.0, f64::max)
        });
        let collar = 0.1 * inradius(&self.cfg.shape);
        let collar_positive = self
            .dom
            .interior_nodes()
            .iter()
            .filter(|&&k| self.dom.signed_distance(k) > -collar)
            .all(|&k| st.u.get(k) > 0.0);
        res.item("energy_bound", energy_final <= ENERGY_AREA_FACTOR * area);
        res.item("supersolution", max_lu <= SUPERSOLUTION_TOL);
        res.item("collar_positive", collar_positive);
        if let Some(limit) = self.cfg.expect.energy_max {
            res.item("energy_expected", energy_final <= limit);
        }
        if let Some(limit) = self.cfg.expect.max_dev_from_const {
            res.item(
                "constant_expected",
                max_dev_from_const.is_some_and(|d| d <= limit),
            );
        }
        if write {
            self.sink.create(&format!("fields/{}", self.suffix("u")), |w| st.u.write_csv(w))?;
            self.sink.create(&format!("fields/{}", self.suffix("v")), |w| st.v.write_csv(w))?;
            self.sink.create(&self.suffix("history"), |w| st.write_history_csv(w))?;
        }
        let metrics = MinimizeMetrics {
            epsilon_schedule: ecfg.epsilon_schedule.clone(),
            epsilon_final: st.epsilon,
            energy_final,
            energy_smoothed: st.energy_smoothed(),
            energy_bending: st.energy_bending,
            area,
            max_lu,
            boundary_adjacent_lu: boundary_adjacent_lu(&st),
            semiconvexity: semiconvexity_metric(&st.u),
            u_min: st.u.min_value(),
            max_dev_from_const,
            iterations: st.history.len(),
            stage_converged: st.stage_converged.clone(),
            collar_positive,
        };
        Ok((st, metrics))
    }

    fn nodal(&self, st: &MinimizerState, res: &mut CheckResult, write: bool) -> Result<(NodalSet, NodalMetrics), CliError> {
        let set = extract_nodal(&st.u).stage("nodal")?;
        let nonempty = !set.is_empty();
        let (min_grad, clearance, mass) = if nonempty {
            let mass = 0.5 * set.inverse_grad_integral().stage("nodal")?;
            (Some(set.min_grad()), Some(set.boundary_clearance()), mass)
        } else {
            (None, None, 0.0)
        };
        if let Some(g) = min_grad {
            res.item("regular", g >= SINGULAR_GRAD);
        }
        if let Some(c) = clearance {
            res.item("clearance", c > CLEARANCE_MIN);
        }
        if let Some(want) = self.cfg.expect.nodal_nonempty {
            res.item("nonempty_expected", nonempty == want);
        }
        if write {
            self.sink.create(&format!("nodal/{}", self.suffix("gamma")), |w| set.write_csv(w))?;
        }
        let metrics = NodalMetrics {
            nonempty,
            length: set.length,
            loops: set.loops.len(),
            components_negative: set.components_negative,
            min_grad,
            boundary_clearance: clearance,
            measure_mass: mass,
        };
        Ok((set, metrics))
    }

    fn el(
        &self,
        st: &MinimizerState,
        set: &NodalSet,
        bank: Option<&ProbeBank>,
        res: &mut CheckResult,
    ) -> Result<ElMetrics, CliError> {
        let bank = match bank {
            Some(b) => b.clone(),
            None if !set.is_empty() => ProbeBank::on_nodal_set(set, inradius(&self.cfg.shape)),
            None => {
                // No free boundary: probe around the centre instead.
                let c = centre(&self.cfg.shape);
                let r = 0.3 * inradius(&self.cfg.shape);
                let centres = (0..BANK_SIZE)
                    .map(|k| {
                        let a = k as f64 * 2.0 * std::f64::consts::PI / BANK_SIZE as f64;
                        [c[0] + r * a.cos(), c[1] + r * a.sin()]
                    })
                    .collect();
                ProbeBank {
                    radius: 0.25 * inradius(&self.cfg.shape),
                    centres,
                    directions: TILTS.iter().map(|a| [a.cos(), a.sin()]).collect(),
                }
            }
        };
        let (el, dv) = {
            let scalars = bank.scalar();
            let scalar_refs: Vec<&dyn Fn(Point) -> f64> =
                scalars.iter().map(|f| f as &dyn Fn(Point) -> f64).collect();
            let vectors = bank.vector();
            let vector_refs: Vec<&dyn Fn(Point) -> [f64; 2]> =
                vectors.iter().map(|f| f as &dyn Fn(Point) -> [f64; 2]).collect();
            (
                el_residual(&self.op, &st.v, set, &scalar_refs).stage("nodal")?,
                domain_variation_residual(&st.u, set, &vector_refs).stage("nodal")?,
            )
        };
        let worst = |v: &[IdentityCheck]| v.iter().map(|c| c.mismatch).fold(0.0, f64::max);
        let (el_max, dv_max) = (worst(&el), worst(&dv));
        if set.is_empty() {
            let size = |v: &[IdentityCheck]| {
                v.iter().map(|c| c.lhs.abs().max(c.rhs.abs())).fold(0.0, f64::max)
            };
            res.item("el_vanishes", size(&el) <= EMPTY_SET_TOL);
            res.item("dv_vanishes", size(&dv) <= EMPTY_SET_TOL);
            res.notes.push("empty nodal set: both sides of each identity must vanish".into());
        } else {
            res.item("euler_lagrange", el_max <= IDENTITY_LIMIT);
            res.item("domain_variation", dv_max <= IDENTITY_LIMIT);
        }
        Ok(ElMetrics {
            bank,
            euler_lagrange: el,
            domain_variation: dv,
            el_max,
            dv_max,
        })
    }
}

/// Runs the requested checks at the configured resolution.
///
/// `bank` fixes the probe functions of the `el` check, so that several grids
/// can be compared on the same functions.
pub fn run_level(
    cfg: &RunConfig,
    out: Option<&Path>,
    bank: Option<&ProbeBank>,
) -> Result<(Level, Option<ProbeBank>), CliError> {
    cfg.validate()?;
    let field = coefficient(cfg)?;
    let dom = build_domain(cfg.shape, cfg.resolution).stage("grid")?;
    let op = assemble_l(&field, &dom).stage("grid")?;
    let ctx = Context {
        cfg: cfg.clone(),
        field,
        dom: dom.clone(),
        op,
        sink: Sink {
            dir: out.map(Path::to_path_buf),
        },
    };
    let wants = |c: Check| cfg.checks.contains(&c);
    let mut level = Level {
        resolution: cfg.resolution,
        h: dom.h(),
        area_error: (dom.discrete_area() - cfg.shape.area()).abs(),
        greens: None,
        frehse: None,
        minimize: None,
        nodal: None,
        el: None,
        results: BTreeMap::new(),
    };
    if wants(Check::Greens) {
        let mut r = CheckResult::default();
        level.greens = Some(ctx.greens(&mut r)?);
        level.results.insert("greens".into(), r.finish());
    }
    if wants(Check::Frehse) {
        let mut r = CheckResult::default();
        level.frehse = Some(ctx.frehse(&mut r)?);
        level.results.insert("frehse".into(), r.finish());
    }
    let mut used_bank = None;
    if wants(Check::Minimize) || wants(Check::Nodal) || wants(Check::El) {
        let mut r = CheckResult::default();
        let (st, m) = ctx.minimize(&mut r, wants(Check::Minimize))?;
        if wants(Check::Minimize) {
            level.minimize = Some(m);
            level.results.insert("minimize".into(), r.finish());
        }
        if wants(Check::Nodal) || wants(Check::El) {
            let mut r = CheckResult::default();
            let (set, m) = ctx.nodal(&st, &mut r, wants(Check::Nodal))?;
            if wants(Check::Nodal) {
                level.nodal = Some(m);
                level.results.insert("nodal".into(), r.finish());
            }
            if wants(Check::El) {
                let mut r = CheckResult::default();
                let m = ctx.el(&st, &set, bank, &mut r)?;
                if !set.is_empty() {
                    used_bank = Some(m.bank.clone());
                }
                level.el = Some(m);
                level.results.insert("el".into(), r.finish());
            }
        }
    }
    Ok((level, used_bank))
}

/// Resolutions `r, 2r − 1, …` for `levels` grids, refusing anything above the memory guard.
pub fn ladder(resolution: usize, levels: usize) -> Result<Vec<usize>, CliError> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(CliError::Invalid(format!(
            "levels must be between 1 and {MAX_LEVELS}, got {levels}"
        )));
    }
    let mut out = vec![resolution];
    for _ in 1..levels {
        let next = 2 * out.last().expect("non-empty") - 1;
        if next > MAX_RESOLUTION {
            return Err(CliError::Invalid(format!(
                "refinement to resolution {next} exceeds the limit of {MAX_RESOLUTION}"
            )));
        }
        out.push(next);
    }
    Ok(out)
}

fn ratios(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let v: Option<Vec<f64>> = values.iter().copied().collect();
    v.map(|v| v.windows(2).map(|w| w[1] / w[0]).collect())
}

fn convergence(levels: &[Level], checks: &[Check]) -> Convergence {
    let rows: Vec<ConvergenceRow> = levels
        .iter()
        .map(|l| ConvergenceRow {
            resolution: l.resolution,
            h: l.h,
            area_error: l.area_error,
            symmetry_max_err: l.greens.as_ref().map(|g| g.symmetry_max_err),
            energy_final: l.minimize.as_ref().map(|m| m.energy_final),
            boundary_adjacent_lu: l.minimize.as_ref().map(|m| m.boundary_adjacent_lu),
            min_grad: l.nodal.as_ref().and_then(|n| n.min_grad),
            components: l.nodal.as_ref().map(|n| n.components_negative),
            el_max: l.el.as_ref().map(|e| e.el_max),
            dv_max: l.el.as_ref().map(|e| e.dv_max),
        })
        .collect();
    let mut table = BTreeMap::new();
    let mut result = CheckResult::default();
    let column = |f: &dyn Fn(&ConvergenceRow) -> Option<f64>| -> Vec<Option<f64>> { rows.iter().map(f).collect() };
    if let Some(r) = ratios(&column(&|r| Some(r.area_error))) {
        table.insert("area_error".to_string(), r);
    }
    if let Some(r) = ratios(&column(&|r| r.symmetry_max_err)) {
        table.insert("symmetry_max_err".to_string(), r);
    }
    if checks.contains(&Check::Minimize) {
        if let Some(r) = ratios(&column(&|r| r.boundary_adjacent_lu)) {
            result.item("boundary_lu_decay", r.iter().all(|&q| q <= 1.0 / BOUNDARY_LU_DECAY));
            table.insert("boundary_adjacent_lu".to_string(), r);
        }
    }
    if checks.contains(&Check::Nodal) {
        match ratios(&column(&|r| r.min_grad)) {
            Some(r) => {
                result.item("gradient_kept", r.iter().all(|&q| q >= GRADIENT_KEEP));
                table.insert("min_grad".to_string(), r);
            }
            None => result.notes.push("min_grad ratios need a nonempty nodal set on every level".into()),
        }
        let comps: Vec<Option<usize>> = rows.iter().map(|r| r.components).collect();
        if let [.., Some(a), Some(b)] = comps.as_slice() {
            result.item("components_stable", a == b);
        }
    }
    if checks.contains(&Check::El) {
        let nonempty = levels.iter().all(|l| l.nodal.as_ref().map_or(true, |n| n.nonempty));
        for key in ["el_max", "dv_max"] {
            let col = column(&|r| if key == "el_max" { r.el_max } else { r.dv_max });
            if let Some(r) = ratios(&col) {
                if nonempty {
                    result.item(&format!("{key}_decay"), r.iter().all(|&q| q <= TREND_LIMIT));
                }
                table.insert(key.to_string(), r);
            }
        }
    }
    Convergence {
        rows,
        ratios: table,
        result: result.finish(),
    }
}

fn write_convergence_csv(w: &mut dyn Write, c: &Convergence) -> std::io::Result<()> {
    writeln!(
        w,
        "resolution,h,area_error,symmetry_max_err,energy_final,boundary_adjacent_Lu,min_grad,components,el_max,dv_max"
    )?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
    for r in &c.rows {
        writeln!(
            w,
            "{},{:e},{:e},{},{},{},{},{},{},{}",
            r.resolution,
            r.h,
            r.area_error,
            opt(r.symmetry_max_err),
            opt(r.energy_final),
            opt(r.boundary_adjacent_lu),
            opt(r.min_grad),
            r.components.map_or(String::new(), |c| c.to_string()),
            opt(r.el_max),
            opt(r.dv_max),
        )?;
    }
    Ok(())
}

/// Runs the scenario on `levels` grids and writes `report.json` (and
/// `convergence.csv` for more than one level) into `out`.
pub fn run(cfg: &RunConfig, levels: usize, out: &Path) -> Result<Report, CliError> {
    let resolutions = ladder(cfg.resolution, levels)?;
    let mut done = Vec::new();
    let mut bank: Option<ProbeBank> = None;
    for &res in &resolutions {
        let (level, used) = run_level(&cfg.at_resolution(res), Some(out), bank.as_ref())?;
        if bank.is_none() {
            bank = used;
        }
        done.push(level);
    }
    let conv = (done.len() > 1).then(|| convergence(&done, &cfg.checks));
    let finest = done.last().expect("at least one level");
    let mut results = finest.results.clone();
    if let Some(c) = &conv {
        results.insert("convergence".into(), c.result.clone());
    }
    let pass = results.values().all(|r| r.pass);
    let report = Report {
        scenario: cfg.name.clone(),
        shape: cfg.shape.to_string(),
        field: cfg.field.to_string(),
        u0: cfg.u0.to_string(),
        checks: cfg.checks.clone(),
        symmetry_max_err: finest.greens.as_ref().map(|g| g.symmetry_max_err),
        min_gl: finest.greens.as_ref().map(|g| g.min_gl),
        frehse: finest.frehse.as_ref().map(|f| f.report.clone()),
        split_refinement: finest.frehse.as_ref().map(|f| f.split_refinement.clone()),
        energy_final: finest.minimize.as_ref().map(|m| m.energy_final),
        nodal_nonempty: finest.nodal.as_ref().map(|n| n.nonempty),
        max_dev_from_const: finest.minimize.as_ref().and_then(|m| m.max_dev_from_const),
        levels: done.clone(),
        convergence: conv,
        results,
        pass,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let sink = Sink {
        dir: Some(out.to_path_buf()),
    };
    if let Some(c) = &report.convergence {
        sink.create("convergence.csv", |w| write_convergence_csv(w, c))?;
    }
    sink.create("report.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    Ok(report)
}
