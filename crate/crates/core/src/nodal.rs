//! Zero level set of a grid field, components of `{u < 0}`, the curve
//! measure `dH¹/(2|∇u|)` and the first-variation identities built on it.

use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::anisotropy::Point;
use crate::diff;
use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, ScalarField, SparseOperator};

/// Gradient magnitude below which a nodal point counts as singular.
pub const SINGULAR_GRAD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NodalVertex {
    pub point: Point,
    pub grad: [f64; 2],
    pub grad_mag: f64,
}

/// One marching-squares segment with its midpoint quadrature data.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    pub mid: Point,
    pub length: f64,
    /// Bilinearly interpolated gradient at `mid`.
    pub grad: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct NodalSet {
    domain: Arc<DiscreteDomain>,
    pub segments: Vec<Segment>,
    /// Closed polylines; the last vertex connects back to the first.
    pub loops: Vec<Vec<NodalVertex>>,
    pub length: f64,
    /// Connected components of `{u < 0}` among interior nodes.
    pub components_negative: usize,
}

/// Edge crossings of one cell, as a map from edge id to crossing point.
type EdgeKey = (usize, usize);

fn edge_key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

fn lerp(p: Point, q: Point, t: f64) -> Point {
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

struct GradSampler<'a> {
    u: &'a ScalarField,
    cache: HashMap<usize, Option<[f64; 2]>>,
}

impl GradSampler<'_> {
    fn node(&mut self, k: usize) -> Option<[f64; 2]> {
        let u = self.u;
        *self.cache.entry(k).or_insert_with(|| diff::gradient(u, k))
    }

    /// Bilinear interpolation of nodal central differences inside cell `sw`.
    /// Falls back to the cell's own bilinear gradient when a corner stencil is incomplete.
    fn at(&mut self, sw: usize, p: Point) -> [f64; 2] {
        let dom = self.u.domain().clone();
        let h = dom.h();
        let corners = [sw, sw + 1, sw + dom.nx(), sw + dom.nx() + 1];
        let o = dom.point(sw);
        let s = ((p[0] - o[0]) / h).clamp(0.0, 1.0);
        let t = ((p[1] - o[1]) / h).clamp(0.0, 1.0);
        let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
        let grads: Option<Vec<[f64; 2]>> = corners.iter().map(|&k| self.node(k)).collect();
        match grads {
            Some(g) => {
                let mut out = [0.0; 2];
                for (gi, wi) in g.iter().zip(w) {
                    out[0] += wi * gi[0];
                    out[1] += wi * gi[1];
                }
                out
            }
            None => {
                let v: Vec<f64> = corners.iter().map(|&k| self.u.get(k)).collect();
                [
                    ((1.0 - t) * (v[1] - v[0]) + t * (v[3] - v[2])) / h,
                    ((1.0 - s) * (v[2] - v[0]) + s * (v[3] - v[1])) / h,
                ]
            }
        }
    }
}

fn dist(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

/// Marching squares at level 0 with linear edge interpolation.
///
/// Saddle cells are resolved by the sign of the cell average: when it is
/// negative the two negative corners are joined. The same rule links
/// diagonal negative nodes when counting components of `{u < 0}`.
pub fn extract_nodal(u: &ScalarField) -> Result<NodalSet> {
    let dom = Arc::clone(u.domain());
    if let Some(&k) = dom.boundary_nodes().iter().find(|&&k| u.get(k) <= 0.0) {
        let p = dom.point(k);
        return Err(Error::NodalTouchesBoundary { x: p[0], y: p[1] });
    }
    let nx = dom.nx();
    let neg = |k: usize| u.get(k) < 0.0;
    let mut sampler = GradSampler {
        u,
        cache: HashMap::new(),
    };
    let mut segments = Vec::new();
    // Crossing edge -> the (at most two) segments that end on it.
    let mut incident: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    let mut seg_edges: Vec<[EdgeKey; 2]> = Vec::new();
    let mut crossing_pts: HashMap<EdgeKey, (Point, usize)> = HashMap::new();

    let mut uf = UnionFind::new(dom.n_nodes());

    for j in 0..dom.ny() - 1 {
        for i in 0..nx - 1 {
            let sw = dom.node(i, j);
            // Counter-clockwise: SW, SE, NE, NW.
            let c = [sw, sw + 1, sw + nx + 1, sw + nx];
            if !c.iter().all(|&k| dom.is_active(k)) {
                continue;
            }
            let vals = c.map(|k| u.get(k));
            let avg = vals.iter().sum::<f64>() / 4.0;
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if neg(a) && neg(b) {
                    uf.union(a, b);
                }
            }
            if avg < 0.0 {
                if neg(c[0]) && neg(c[2]) {
                    uf.union(c[0], c[2]);
                }
                if neg(c[1]) && neg(c[3]) {
                    uf.union(c[1], c[3]);
                }
            }
            let mask: Vec<bool> = c.iter().map(|&k| neg(k)).collect();
            let crossings: Vec<usize> = (0..4).filter(|&e| mask[e] != mask[(e + 1) % 4]).collect();
            if crossings.is_empty() {
                continue;
            }
            let mut point_on = |e: usize| -> (EdgeKey, Point) {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                let key = edge_key(a, b);
                let p = crossing_pts
                    .entry(key)
                    .or_insert_with(|| {
                        let (ua, ub) = (u.get(a), u.get(b));
                        (lerp(dom.point(a), dom.point(b), ua / (ua - ub)), sw)
                    })
                    .0;
                (key, p)
            };
            let pairs: Vec<(usize, usize)> = if crossings.len() == 2 {
                vec![(crossings[0], crossings[1])]
            } else {
                // Saddle: isolate the corners whose sign is not the connected one.
                let isolate_negative = avg >= 0.0;
                (0..4)
                    .filter(|&k| mask[k] == isolate_negative)
                    .map(|k| ((k + 3) % 4, k))
                    .collect()
            };
            for (e1, e2) in pairs {
                let (k1, p1) = point_on(e1);
                let (k2, p2) = point_on(e2);
                let mid = lerp(p1, p2, 0.5);
                let grad = sampler.at(sw, mid);
                let idx = segments.len();
                segments.push(Segment {
                    a: p1,
                    b: p2,
                    mid,
                    length: (p2[0] - p1[0]).hypot(p2[1] - p1[1]),
                    grad,
                });
                seg_edges.push([k1, k2]);
                incident.entry(k1).or_default().push(idx);
                incident.entry(k2).or_default().push(idx);
            }
        }
    }

    // Chain segments into closed loops through their shared edge crossings.
    let mut used = vec![false; segments.len()];
    let mut loops = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        let mut keys = Vec::new();
        let mut seg = start;
        let mut at = seg_edges[start][0];
        loop {
            used[seg] = true;
            keys.push(at);
            let next_key = if seg_edges[seg][0] == at {
                seg_edges[seg][1]
            } else {
                seg_edges[seg][0]
            };
            at = next_key;
            match incident[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        let vertices = keys
            .into_iter()
            .map(|key| {
                let (p, cell) = crossing_pts[&key];
                let grad = sampler.at(cell, p);
                NodalVertex {
                    point: p,
                    grad,
                    grad_mag: norm(grad),
                }
            })
            .collect();
        loops.push(vertices);
    }

    let mut roots: Vec<usize> = dom
        .interior_nodes()
        .iter()
        .filter(|&&k| neg(k))
        .map(|&k| uf.find(k))
        .collect();
    roots.sort_unstable();
    roots.dedup();

    let length = segments.iter().map(|s| s.length).sum();
    Ok(NodalSet {
        domain: dom,
        segments,
        loops,
        length,
        components_negative: roots.len(),
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl NodalSet {
    pub fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Smallest `|∇u|` over loop vertices and segment midpoints.
    pub fn min_grad(&self) -> f64 {
        let v = self.loops.iter().flatten().map(|v| v.grad_mag);
        let m = self.segments.iter().map(|s| norm(s.grad));
        v.chain(m).fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance from a nodal vertex to the domain boundary.
    pub fn boundary_clearance(&self) -> f64 {
        let shape = self.domain.shape();
        self.loops
            .iter()
            .flatten()
            .map(|v| -shape.signed_distance(v.point))
            .fold(f64::INFINITY, f64::min)
    }

    /// `∫_Γ dH¹/|∇u|` by the midpoint rule.
    pub fn inverse_grad_integral(&self) -> Result<f64> {
        self.check_regular()?;
        Ok(self.segments.iter().map(|s| s.length / norm(s.grad)).sum())
    }

    fn check_regular(&self) -> Result<()> {
        for s in &self.segments {
            let g = norm(s.grad);
            if !(g >= SINGULAR_GRAD) {
                return Err(Error::SingularNodal {
                    x: s.mid[0],
                    y: s.mid[1],
                    value: g,
                });
            }
        }
        Ok(())
    }

    /// Point masses `len/(2|∇u|)` at the segment midpoints.
    pub fn measure_density(&self) -> Result<MeasureDensity> {
        self.check_regular()?;
        Ok(MeasureDensity {
            points: self.segments.iter().map(|s| s.mid).collect(),
            weights: self
                .segments
                .iter()
                .map(|s| s.length / (2.0 * norm(s.grad)))
                .collect(),
        })
    }

    /// `n` points spread at equal arc length over all loops, in loop order,
    /// each with the unit normal `∇u/|∇u|` interpolated along its edge.
    pub fn sample_points(&self, n: usize) -> Vec<(Point, [f64; 2])> {
        let mut edges = Vec::new();
        for lp in &self.loops {
            for (i, v) in lp.iter().enumerate() {
                edges.push((*v, lp[(i + 1) % lp.len()]));
            }
        }
        let total: f64 = edges.iter().map(|(p, q)| dist(p.point, q.point)).sum();
        if n == 0 || total <= 0.0 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(n);
        let mut walked = 0.0;
        let mut edge = edges.iter();
        let mut cur = edge.next().copied();
        for i in 0..n {
            let target = total * (i as f64 + 0.5) / n as f64;
            while let Some((p, q)) = cur {
                let len = dist(p.point, q.point);
                if walked + len >= target {
                    let t = if len > 0.0 { (target - walked) / len } else { 0.0 };
                    let g = lerp(p.grad, q.grad, t);
                    let m = norm(g).max(f64::MIN_POSITIVE);
                    out.push((lerp(p.point, q.point, t), [g[0] / m, g[1] / m]));
                    break;
                }
                walked += len;
                cur = edge.next().copied();
            }
        }
        out
    }

    /// `component,vertex_index,x,y,grad_mag`, one row per loop vertex.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "component,vertex_index,x,y,grad_mag")?;
        for (c, lp) in self.loops.iter().enumerate() {
            for (i, v) in lp.iter().enumerate() {
                writeln!(w, "{c},{i},{},{},{}", v.point[0], v.point[1], v.grad_mag)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureDensity {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl MeasureDensity {
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ f(pᵢ) wᵢ`.
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, w)| f(p) * w).sum()
    }
}

/// One side-by-side evaluation of a first-variation identity.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, or 0 when both vanish.
    pub mismatch: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let mismatch = if scale <= 1e-300 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        };
        IdentityCheck { lhs, rhs, mismatch }
    }
}

/// Test function sampled on a grid.
pub type TestFunction<'a> = &'a dyn Fn(Point) -> f64;

/// Compares `2h²Σ(L_hu)(L_hφ)` with `−Σ φ len/|∇u|` over the nodal segments.
///
/// Test functions must vanish on the boundary nodes.
pub fn el_residual(
    op: &SparseOperator,
    v: &ScalarField,
    nodal: &NodalSet,
    test_bank: &[TestFunction<'_>],
) -> Result<Vec<IdentityCheck>> {
    nodal.check_regular()?;
    let dom = op.domain();
    let h2 = dom.h().powi(2);
    let vi = v.interior_values();
    test_bank
        .iter()
        .map(|phi| {
            let f = ScalarField::from_fn(dom, phi);
            if dom.boundary_nodes().iter().any(|&k| f.get(k).abs() > 1e-14) {
                return Err(Error::InvalidInput(
                    "test function does not vanish on the boundary".into(),
                ));
            }
            let lphi = op.matrix().mul_vec(&f.interior_values());
            let lhs = 2.0 * h2 * vi.iter().zip(&lphi).map(|(a, b)| a * b).sum::<f64>();
            let rhs = -nodal
                .segments
                .iter()
                .map(|s| phi(s.mid) * s.length / norm(s.grad))
                .sum::<f64>();
            Ok(IdentityCheck::new(lhs, rhs))
        })
        .collect()
}

/// Vector test field.
pub type VectorTestFunction<'a> = &'a dyn Fn(Point) -> [f64; 2];

/// Compares `−h² Σ_{u>0} div_h ψ` with `Σ ψ·∇u/|∇u| len` over the nodal segments.
pub fn domain_variation_residual(
    u: &ScalarField,
    nodal: &NodalSet,
    psi_bank: &[VectorTestFunction<'_>],
) -> Result<Vec<IdentityCheck>> {
    nodal.check_regular()?;
    let dom = u.domain();
    let h = dom.h();
    psi_bank
        .iter()
        .map(|psi| {
            let p1 = ScalarField::from_fn(dom, |p| psi(p)[0]);
            let p2 = ScalarField::from_fn(dom, |p| psi(p)[1]);
            let mut lhs = 0.0;
            for &k in dom.interior_nodes() {
                if u.get(k) > 0.0 {
                    let (Some(g1), Some(g2)) = (diff::gradient(&p1, k), diff::gradient(&p2, k))
                    else {
                        continue;
                    };
                    lhs -= g1[0] + g2[1];
                }
            }
            lhs *= h * h;
            let rhs = nodal
                .segments
                .iter()
                .map(|s| {
                    let q = psi(s.mid);
                    (q[0] * s.grad[0] + q[1] * s.grad[1]) / norm(s.grad) * s.length
                })
                .sum::<f64>();
            Ok(IdentityCheck::new(lhs, rhs))
        })
        .collect()
}

/// `exp(−1/(1 − |p − c|²/r²))` inside the disk of radius `r` about `c`, zero outside.
pub fn radial_bump(p: Point, centre: Point, radius: f64) -> f64 {
    bump(((p[0] - centre[0]).powi(2) + (p[1] - centre[1]).powi(2)) / (radius * radius))
}

/// Unnormalized bump `exp(−1/(1 − s²))` on `s < 1`.
fn bump(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s2)).exp()
    }
}

/// `g_n = Σ wᵢ φ_n(· − pᵢ)` with `φ_n` a bump of radius `1/n`.
///
/// Each translate is normalized on the grid so that `Σ φ_n(x_k − pᵢ) h² = 1`,
/// which makes the total mass exact whenever the support stays inside the
/// active nodes.
pub fn mollify_measure(
    density: &MeasureDensity,
    domain: &Arc<DiscreteDomain>,
    n: f64,
) -> Result<ScalarField> {
    let h = domain.h();
    let radius = 1.0 / n;
    if !(radius >= 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "bandwidth 1/n = {radius} below the resolvable 2h = {}",
            2.0 * h
        )));
    }
    let mut g = ScalarField::zeros(domain);
    let reach = (radius / h).ceil() as i64;
    for (&p, &w) in density.points.iter().zip(&density.weights) {
        let centre = domain.nearest_node(p);
        let mut support = Vec::new();
        let mut total = 0.0;
        for dj in -reach - 1..=reach + 1 {
            for di in -reach - 1..=reach + 1 {
                let Some(k) = domain.offset(centre, di, dj) else {
                    continue;
                };
                let q = domain.point(k);
                let s2 = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)) / (radius * radius);
                let b = bump(s2);
                if b > 0.0 {
                    if !domain.is_active(k) {
                        return Err(Error::InvalidInput(
                            "mollifier support leaves the domain".into(),
                        ));
                    }
                    total += b;
                    support.push((k, b));
                }
            }
        }
        let scale = w / (total * h * h);
        for (k, b) in support {
            g.set(k, g.get(k) + b * scale);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, Shape};
    use std::f64::consts::PI;

    fn square(res: usize) -> Arc<DiscreteDomain> {
        build_domain(Shape::Rect { min: [-1.0, -1.0], max: [1.0, 1.0] }, res).unwrap()
    }

    #[test]
    fn circle_length_and_single_loop() {
        let dom = square(257);
        let u = ScalarField::from_fn(&dom, |p| p[0] * p[0] + p[1] * p[1] - 0.25);
        let set = extract_nodal(&u).unwrap();
        assert_eq!(set.loops.len(), 1);
        assert_eq!(set.components_negative, 1);
        assert!((set.length - PI).abs() / PI < 0.02, "{}", set.length);
        // |∇u| = 2r = 1 on the circle.
        assert!((set.min_grad() - 1.0).abs() < 0.02);
        for v in &set.loops[0] {
            let r = v.point[0].hypot(v.point[1]);
            assert!((r - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn samples_are_evenly_spread_on_a_circle() {
        let dom = square(129);
        let u = ScalarField::from_fn(&dom, |p| p[0] * p[0] + p[1] * p[1] - 0.25);
        let pts = extract_nodal(&u).unwrap().sample_points(5);
        assert_eq!(pts.len(), 5);
        for (i, (p, n)) in pts.iter().enumerate() {
            assert!((p[0].hypot(p[1]) - 0.5).abs() < 1e-3);
            // Outward normal, since u grows with r.
            assert!((n[0] - 2.0 * p[0]).abs() + (n[1] - 2.0 * p[1]).abs() < 0.02);
            let q = pts[(i + 1) % 5].0;
            let chord = (p[0] - q[0]).hypot(p[1] - q[1]);
            assert!((chord - (PI / 5.0).sin()).abs() < 0.01, "{chord}");
        }
    }

    #[test]
    fn positive_field_has_empty_set() {
        let dom = square(33);
        let u = ScalarField::from_fn(&dom, |_| 1.0);
        let set = extract_nodal(&u).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.components_negative, 0);
        assert_eq!(set.loops.len(), 0);
    }

    #[test]
    fn two_wells_give_two_components() {
        let dom = square(129);
        let well = |p: Point, c: Point| {
            let r2 = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / 0.09;
            if r2 < 1.0 { 0.5 * (1.0 - r2).powi(2) } else { 0.0 }
        };
        let u = ScalarField::from_fn(&dom, |p| 0.1 - well(p, [-0.5, 0.0]) - well(p, [0.5, 0.0]));
        let set = extract_nodal(&u).unwrap();
        assert_eq!(set.components_negative, 2);
        assert_eq!(set.loops.len(), 2);
    }

    #[test]
    fn touching_the_boundary_is_an_error() {
        let dom = square(33);
        let u = ScalarField::from_fn(&dom, |p| p[0]);
        assert!(matches!(extract_nodal(&u), Err(Error::NodalTouchesBoundary { .. })));
    }

    #[test]
    fn saddle_follows_cell_average() {
        // u = (x−c)(y−c) − δ with the saddle point at a cell centre: the
        // negative quadrants join through that cell exactly when δ > 0.
        let dom = square(33);
        let c = dom.h() / 2.0;
        let centre = |d: f64| {
            ScalarField::from_fn(&dom, move |p| {
                let r2 = p[0] * p[0] + p[1] * p[1];
                if r2 < 0.25 { (p[0] - c) * (p[1] - c) - d } else { 1.0 }
            })
        };
        assert_eq!(extract_nodal(&centre(1e-4)).unwrap().components_negative, 1);
        assert_eq!(extract_nodal(&centre(-1e-4)).unwrap().components_negative, 2);
    }

    #[test]
    fn vertices_lie_on_the_zero_set() {
        let dom = square(65);
        let u = ScalarField::from_fn(&dom, |p| p[0] * p[0] + 2.0 * p[1] * p[1] - 0.3 + 0.1 * (5.0 * p[0]).sin());
        let set = extract_nodal(&u).unwrap();
        let scale = u.max_abs();
        for s in &set.segments {
            for p in [s.a, s.b] {
                // Re-interpolate along the cell edge the vertex lies on.
                let i = ((p[0] - dom.origin()[0]) / dom.h()).floor() as usize;
                let j = ((p[1] - dom.origin()[1]) / dom.h()).floor() as usize;
                let k = dom.node(i, j);
                let q = dom.point(k);
                let (fx, fy) = ((p[0] - q[0]) / dom.h(), (p[1] - q[1]) / dom.h());
                let val = (1.0 - fx) * (1.0 - fy) * u.get(k)
                    + fx * (1.0 - fy) * u.get(k + 1)
                    + (1.0 - fx) * fy * u.get(k + dom.nx())
                    + fx * fy * u.get(k + dom.nx() + 1);
                assert!(val.abs() <= 1e-8 * scale, "{val}");
            }
        }
    }

    #[test]
    fn mollified_point_mass_keeps_its_mass() {
        let dom = square(65);
        let density = MeasureDensity {
            points: vec![[0.013, -0.007]],
            weights: vec![0.7],
        };
        for n in [4.0, 8.0, 16.0] {
            let g = mollify_measure(&density, &dom, n).unwrap();
            let mass: f64 = g.values().iter().sum::<f64>() * dom.h().powi(2);
            assert!((mass - 0.7).abs() < 1e-12);
        }
        assert!(mollify_measure(&density, &dom, 32.0).is_err());
    }
}
