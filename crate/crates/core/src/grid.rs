//! Masked uniform grids, grid-aligned scalar fields and the flux-form
//! discretization of `L = -div(A∇)`.
//!
//! Nodes are classified by the shape's signed distance `d`: a node is
//! *interior* when `d < -h/2`, *boundary* when it is not interior but is one
//! of the eight neighbours of an interior node, and *exterior* otherwise.
//! Interior nodes are the unknowns; boundary nodes carry the trace.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use crate::anisotropy::{CoefficientField, Point};
use crate::error::{Error, Result};
use crate::linsolve::{self, CsrMatrix, SolveReport};

pub const MIN_RESOLUTION: usize = 17;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Disk { center: Point, radius: f64 },
    Rect { min: Point, max: Point },
}

impl Shape {
    /// Disk centred at the origin.
    pub fn disk(radius: f64) -> Self {
        Shape::Disk {
            center: [0.0, 0.0],
            radius,
        }
    }

    /// Rectangle `[0, w] × [0, h]`.
    pub fn rect(w: f64, h: f64) -> Self {
        Shape::Rect {
            min: [0.0, 0.0],
            max: [w, h],
        }
    }

    pub fn bbox(&self) -> [Point; 2] {
        match *self {
            Shape::Disk { center, radius } => [
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ],
            Shape::Rect { min, max } => [min, max],
        }
    }

    /// Negative inside, positive outside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match *self {
            Shape::Disk { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) - radius
            }
            Shape::Rect { min, max } => {
                let c = [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0];
                let half = [(max[0] - min[0]) / 2.0, (max[1] - min[1]) / 2.0];
                let q = [(p[0] - c[0]).abs() - half[0], (p[1] - c[1]).abs() - half[1]];
                let outside = q[0].max(0.0).hypot(q[1].max(0.0));
                outside + q[0].max(q[1]).min(0.0)
            }
        }
    }

    /// Closest point of the boundary curve.
    pub fn project(&self, p: Point) -> Point {
        match *self {
            Shape::Disk { center, radius } => {
                let v = [p[0] - center[0], p[1] - center[1]];
                let r = v[0].hypot(v[1]);
                if r == 0.0 {
                    [center[0] + radius, center[1]]
                } else {
                    [center[0] + radius * v[0] / r, center[1] + radius * v[1] / r]
                }
            }
            Shape::Rect { min, max } => {
                let inside = p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1];
                if !inside {
                    return [p[0].clamp(min[0], max[0]), p[1].clamp(min[1], max[1])];
                }
                let gaps = [p[0] - min[0], max[0] - p[0], p[1] - min[1], max[1] - p[1]];
                let k = (0..4)
                    .min_by(|&a, &b| gaps[a].total_cmp(&gaps[b]))
                    .unwrap();
                match k {
                    0 => [min[0], p[1]],
                    1 => [max[0], p[1]],
                    2 => [p[0], min[1]],
                    _ => [p[0], max[1]],
                }
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Rect { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Disk { center, radius } if center == [0.0, 0.0] => write!(f, "disk({radius})"),
            Shape::Disk { center, radius } => {
                write!(f, "disk({radius}) at ({}, {})", center[0], center[1])
            }
            Shape::Rect { min, max } if min == [0.0, 0.0] => write!(f, "rect({},{})", max[0], max[1]),
            Shape::Rect { min, max } => {
                write!(f, "rect[{},{}]x[{},{}]", min[0], max[0], min[1], max[1])
            }
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    /// Parses `disk(r)` or `rect(w,h)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("unknown shape `{s}`"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let args = s[open + 1..s.len() - 1]
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        let shape = match (s[..open].trim(), args.as_slice()) {
            ("disk", &[r]) => Shape::disk(r),
            ("rect", &[w, h]) => Shape::rect(w, h),
            _ => return Err(bad()),
        };
        let [lo, hi] = shape.bbox();
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::InvalidInput(format!("degenerate shape `{s}`")));
        }
        Ok(shape)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

const NOT_UNKNOWN: usize = usize::MAX;

/// Masked uniform grid over a 2-D shape.
#[derive(Clone, Debug)]
pub struct DiscreteDomain {
    shape: Shape,
    resolution: usize,
    origin: Point,
    h: f64,
    nx: usize,
    ny: usize,
    kinds: Vec<NodeKind>,
    unknown_of: Vec<usize>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
}

/// Grid covering the shape's bounding box with `resolution` nodes across its
/// longer side, padded by one cell on every side.
pub fn build_domain(shape: Shape, resolution: usize) -> Result<Arc<DiscreteDomain>> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidInput(format!(
            "resolution {resolution} below the minimum {MIN_RESOLUTION}"
        )));
    }
    let [lo, hi] = shape.bbox();
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let h = extent / (resolution - 1) as f64;
    let cells = |len: f64| ((len / h) - 1e-9).ceil() as usize;
    let nx = cells(hi[0] - lo[0]) + 3;
    let ny = cells(hi[1] - lo[1]) + 3;
    let origin = [lo[0] - h, lo[1] - h];

    let threshold = -0.5 * h;
    let mut kinds = vec![NodeKind::Exterior; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
            if shape.signed_distance(p) < threshold {
                kinds[j * nx + i] = NodeKind::Interior;
            }
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            if kinds[j * nx + i] != NodeKind::Interior {
                continue;
            }
            if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                return Err(Error::InvalidInput("interior node on the grid edge".into()));
            }
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let k = (j as i64 + dj) as usize * nx + (i as i64 + di) as usize;
                    if kinds[k] == NodeKind::Exterior {
                        kinds[k] = NodeKind::Boundary;
                    }
                }
            }
        }
    }
    let mut unknown_of = vec![NOT_UNKNOWN; nx * ny];
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for (k, kind) in kinds.iter().enumerate() {
        match kind {
            NodeKind::Interior => {
                unknown_of[k] = interior.len();
                interior.push(k);
            }
            NodeKind::Boundary => boundary.push(k),
            NodeKind::Exterior => {}
        }
    }
    if interior.is_empty() {
        return Err(Error::InvalidInput(format!(
            "resolution {resolution} leaves no interior node in {shape}"
        )));
    }
    Ok(Arc::new(DiscreteDomain {
        shape,
        resolution,
        origin,
        h,
        nx,
        ny,
        kinds,
        unknown_of,
        interior,
        boundary,
    }))
}

impl DiscreteDomain {
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// Node ids of the unknowns, in unknown order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    pub fn point(&self, node: usize) -> Point {
        let (i, j) = self.ij(node);
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn is_active(&self, node: usize) -> bool {
        self.kinds[node] != NodeKind::Exterior
    }

    /// Unknown index of an interior node.
    pub fn unknown(&self, node: usize) -> Option<usize> {
        let u = self.unknown_of[node];
        (u != NOT_UNKNOWN).then_some(u)
    }

    /// Neighbour at integer offset, if inside the grid.
    pub fn offset(&self, node: usize, di: i64, dj: i64) -> Option<usize> {
        let (i, j) = self.ij(node);
        let (i, j) = (i as i64 + di, j as i64 + dj);
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            None
        } else {
            Some(self.node(i as usize, j as usize))
        }
    }

    pub fn signed_distance(&self, node: usize) -> f64 {
        self.shape.signed_distance(self.point(node))
    }

    /// Projection of a node onto the boundary curve; the trace location for boundary nodes.
    pub fn projection(&self, node: usize) -> Point {
        self.shape.project(self.point(node))
    }

    /// Cell measure `h²` times the interior-node count.
    pub fn discrete_area(&self) -> f64 {
        self.h * self.h * self.interior.len() as f64
    }

    /// Grid node closest to `p`.
    pub fn nearest_node(&self, p: Point) -> usize {
        let i = ((p[0] - self.origin[0]) / self.h).round().clamp(0.0, (self.nx - 1) as f64);
        let j = ((p[1] - self.origin[1]) / self.h).round().clamp(0.0, (self.ny - 1) as f64);
        self.node(i as usize, j as usize)
    }
}

/// Real values on the grid nodes of a domain. Exterior entries are kept at zero.
#[derive(Clone, Debug)]
pub struct ScalarField {
    domain: Arc<DiscreteDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: &Arc<DiscreteDomain>) -> Self {
        ScalarField {
            values: vec![0.0; domain.n_nodes()],
            domain: Arc::clone(domain),
        }
    }

    /// Samples `f` at every non-exterior node position.
    pub fn from_fn(domain: &Arc<DiscreteDomain>, f: impl Fn(Point) -> f64) -> Self {
        let mut out = Self::zeros(domain);
        for k in 0..domain.n_nodes() {
            if domain.is_active(k) {
                out.values[k] = f(domain.point(k));
            }
        }
        out
    }

    /// Interior unknown vector scattered onto the grid; boundary values zero.
    pub fn from_interior(domain: &Arc<DiscreteDomain>, x: &[f64]) -> Self {
        assert_eq!(x.len(), domain.n_interior());
        let mut out = Self::zeros(domain);
        for (u, &k) in domain.interior_nodes().iter().enumerate() {
            out.values[k] = x[u];
        }
        out
    }

    /// Field that is zero inside and carries `u0` evaluated at the projected
    /// boundary points on the boundary nodes.
    pub fn boundary_trace(domain: &Arc<DiscreteDomain>, u0: impl Fn(Point) -> f64) -> Self {
        let mut out = Self::zeros(domain);
        for &k in domain.boundary_nodes() {
            out.values[k] = u0(domain.projection(k));
        }
        out
    }

    pub fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn set(&mut self, node: usize, v: f64) {
        self.values[node] = v;
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.domain
            .interior_nodes()
            .iter()
            .map(|&k| self.values[k])
            .collect()
    }

    pub fn set_interior(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.domain.n_interior());
        for (u, &k) in self.domain.interior_nodes().iter().enumerate() {
            self.values[k] = x[u];
        }
    }

    /// Copies the boundary-node values of `other`.
    pub fn copy_boundary_from(&mut self, other: &ScalarField) {
        for &k in self.domain.boundary_nodes() {
            self.values[k] = other.values[k];
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Max |value| over non-exterior nodes.
    pub fn max_abs(&self) -> f64 {
        self.active_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.active_values().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.active_values().fold(f64::NEG_INFINITY, f64::max)
    }

    fn active_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len())
            .filter(|&k| self.domain.is_active(k))
            .map(|k| self.values[k])
    }

    /// `Σ v² h²` over interior nodes.
    pub fn interior_l2_sq(&self) -> f64 {
        let h2 = self.domain.h * self.domain.h;
        self.domain
            .interior_nodes()
            .iter()
            .map(|&k| self.values[k] * self.values[k])
            .sum::<f64>()
            * h2
    }

    /// CSV dump `x,y,value`, row-major over non-exterior nodes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,value")?;
        for k in 0..self.values.len() {
            if self.domain.is_active(k) {
                let p = self.domain.point(k);
                writeln!(w, "{},{},{}", p[0], p[1], self.values[k])?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    /// Boundary values enter through the trace; unknowns are interior nodes.
    DirichletTrace,
    /// `u = Lu = 0`: the square of a Dirichlet operator, applied as two nested solves.
    NavierPair,
}

/// Assembled divergence-form operator on the interior unknowns.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    domain: Arc<DiscreteDomain>,
    matrix: CsrMatrix,
    /// Interior rows × grid nodes: contributions of boundary-node values.
    coupling: CsrMatrix,
    bc_kind: BcKind,
    symmetric: bool,
}

/// Relative symmetry tolerance enforced at assembly.
pub const SYMMETRY_TOL: f64 = 1e-13;

/// Flux-form discretization of `L u = -div(A∇u)`.
///
/// `a₁₁` and `a₂₂` are sampled at the face midpoints of each interior node.
/// The cross term `2a₁₂∂₁u∂₂u` is assembled cell by cell from the averaged
/// edge differences with `a₁₂` at the cell centre, which keeps the matrix
/// symmetric with zero row sums.
pub fn assemble_l(field: &CoefficientField, domain: &Arc<DiscreteDomain>) -> Result<SparseOperator> {
    let dom = domain.as_ref();
    let h = dom.h;
    let inv_h2 = 1.0 / (h * h);
    let n = dom.n_interior();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(9); n];

    for (row, &k) in dom.interior.iter().enumerate() {
        let p = dom.point(k);
        let a_e = field.eval([p[0] + h / 2.0, p[1]])[(0, 0)];
        let a_w = field.eval([p[0] - h / 2.0, p[1]])[(0, 0)];
        let a_n = field.eval([p[0], p[1] + h / 2.0])[(1, 1)];
        let a_s = field.eval([p[0], p[1] - h / 2.0])[(1, 1)];
        for v in [a_e, a_w, a_n, a_s] {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    x: p[0],
                    y: p[1],
                    what: "A at a face midpoint",
                });
            }
        }
        let r = &mut rows[row];
        r.push((k, (a_e + a_w + a_n + a_s) * inv_h2));
        r.push((dom.offset(k, 1, 0).unwrap(), -a_e * inv_h2));
        r.push((dom.offset(k, -1, 0).unwrap(), -a_w * inv_h2));
        r.push((dom.offset(k, 0, 1).unwrap(), -a_n * inv_h2));
        r.push((dom.offset(k, 0, -1).unwrap(), -a_s * inv_h2));
    }

    // Cells are indexed by their south-west corner.
    if !is_diagonal_field(field) {
        for j in 0..dom.ny - 1 {
            for i in 0..dom.nx - 1 {
                let sw = dom.node(i, j);
                let corners = [sw, sw + 1, sw + dom.nx, sw + dom.nx + 1];
                if !corners.iter().any(|&c| dom.unknown(c).is_some()) {
                    continue;
                }
                let p = dom.point(sw);
                let a12 = field.eval([p[0] + h / 2.0, p[1] + h / 2.0])[(0, 1)];
                if !a12.is_finite() {
                    return Err(Error::NonFinite {
                        x: p[0],
                        y: p[1],
                        what: "A at a cell centre",
                    });
                }
                if a12 == 0.0 {
                    continue;
                }
                let c = 0.5 * a12 * inv_h2;
                // Local matrix c·[[1,0,0,-1],[0,-1,1,0],[0,1,-1,0],[-1,0,0,1]] over (sw, se, nw, ne).
                const LOCAL: [[f64; 4]; 4] = [
                    [1.0, 0.0, 0.0, -1.0],
                    [0.0, -1.0, 1.0, 0.0],
                    [0.0, 1.0, -1.0, 0.0],
                    [-1.0, 0.0, 0.0, 1.0],
                ];
                for (a, &ca) in corners.iter().enumerate() {
                    if let Some(row) = dom.unknown(ca) {
                        for (b, &cb) in corners.iter().enumerate() {
                            if LOCAL[a][b] != 0.0 {
                                rows[row].push((cb, c * LOCAL[a][b]));
                            }
                        }
                    }
                }
            }
        }
    }

    let mut interior_rows = Vec::with_capacity(n);
    let mut coupling_rows = Vec::with_capacity(n);
    for r in rows {
        let (mut inner, mut outer) = (Vec::with_capacity(9), Vec::new());
        for (node, v) in r {
            match dom.unknown(node) {
                Some(u) => inner.push((u, v)),
                None => {
                    debug_assert!(dom.is_active(node));
                    outer.push((node, v));
                }
            }
        }
        interior_rows.push(inner);
        coupling_rows.push(outer);
    }
    let matrix = CsrMatrix::from_rows(n, interior_rows);
    let coupling = CsrMatrix::from_rows(dom.n_nodes(), coupling_rows);

    for (row, d) in matrix.diagonal().into_iter().enumerate() {
        if !(d > 0.0) {
            return Err(Error::NotPositive { row, value: d });
        }
    }
    let asym = matrix.asymmetry_inf();
    let symmetric = asym <= SYMMETRY_TOL * matrix.norm_inf();
    Ok(SparseOperator {
        domain: Arc::clone(domain),
        matrix,
        coupling,
        bc_kind: BcKind::DirichletTrace,
        symmetric,
    })
}

fn is_diagonal_field(field: &CoefficientField) -> bool {
    use crate::anisotropy::FieldKind;
    matches!(
        field.kind(),
        FieldKind::Identity | FieldKind::Diag { .. } | FieldKind::Poly { .. }
    )
}

impl SparseOperator {
    pub fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    /// Interior block.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn bc_kind(&self) -> BcKind {
        self.bc_kind
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Largest stencil width over all rows (interior plus boundary couplings).
    pub fn max_row_pattern(&self) -> usize {
        (0..self.matrix.nrows())
            .map(|i| self.matrix.row_len(i) + self.coupling.row_len(i))
            .max()
            .unwrap_or(0)
    }

    /// Same matrix, tagged as the Navier pair used for `L²`.
    pub fn navier_pair(&self) -> SparseOperator {
        SparseOperator {
            bc_kind: BcKind::NavierPair,
            ..self.clone()
        }
    }

    /// Contribution `C g` of the boundary values of `u` to each interior row.
    pub fn boundary_contribution(&self, u: &ScalarField) -> Vec<f64> {
        self.coupling.mul_vec(u.values())
    }

    /// `L_h u` on interior nodes, using the boundary values of `u`; zero elsewhere.
    pub fn apply(&self, u: &ScalarField) -> ScalarField {
        let x = u.interior_values();
        let mut y = self.matrix.mul_vec(&x);
        for (yi, ci) in y.iter_mut().zip(self.boundary_contribution(u)) {
            *yi += ci;
        }
        ScalarField::from_interior(&self.domain, &y)
    }

    /// Solves `L_h u = f` on interior nodes with `u = trace` on boundary nodes.
    pub fn solve_dirichlet(
        &self,
        f: &[f64],
        trace: Option<&ScalarField>,
        tol: f64,
        guess: Option<Vec<f64>>,
    ) -> Result<(ScalarField, SolveReport)> {
        let mut rhs = f.to_vec();
        if let Some(t) = trace {
            for (r, c) in rhs.iter_mut().zip(self.boundary_contribution(t)) {
                *r -= c;
            }
        }
        let n = rhs.len();
        let guess = guess.unwrap_or_else(|| vec![0.0; n]);
        let (x, report) =
            linsolve::solve_spd_from(&self.matrix, &rhs, guess, tol, linsolve::default_max_iter(n))?;
        if !report.converged {
            return Err(Error::NotConverged {
                iterations: report.iterations,
                residual: report.final_residual,
                tol,
            });
        }
        let mut u = ScalarField::from_interior(&self.domain, &x);
        if let Some(t) = trace {
            u.copy_boundary_from(t);
        }
        Ok((u, report))
    }
}

/// `L_h(L_h f)` with Navier conditions: `f` and the intermediate `L_h f` are
/// taken as zero on the boundary.
pub fn apply_l2_navier(op: &SparseOperator, f: &ScalarField) -> ScalarField {
    let x = f.interior_values();
    let y = op.matrix.mul_vec(&op.matrix.mul_vec(&x));
    ScalarField::from_interior(&op.domain, &y)
}

/// Result of the nested Navier solve.
#[derive(Clone, Debug)]
pub struct NavierSolution {
    pub u: ScalarField,
    /// `w = L_h u`, the first Dirichlet solve.
    pub intermediate: ScalarField,
    pub reports: [SolveReport; 2],
}

/// Solves `L_h² u = rhs` as `L_h w = rhs`, `L_h u = w`, both with zero trace.
pub fn solve_l2_navier(op: &SparseOperator, rhs: &[f64], tol: f64) -> Result<NavierSolution> {
    let (w, r1) = op.solve_dirichlet(rhs, None, tol, None)?;
    let (u, r2) = op.solve_dirichlet(&w.interior_values(), None, tol, None)?;
    Ok(NavierSolution {
        u,
        intermediate: w,
        reports: [r1, r2],
    })
}
