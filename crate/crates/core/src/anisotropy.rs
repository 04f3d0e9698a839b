//! Coefficient fields `A(x)`, the anisotropic distance `ψ_x(y) = A(y)⁻¹(y−x)·(y−x)`,
//! the `g`-orthonormal matrix frame and the constants governing the Green's
//! function singularity.
//!
//! The frame metric on symmetric 2×2 matrices is
//! `g(y)(M, N) = tr(A(y)⁻¹ M N A(y)⁻¹)`. Its first frame element is always
//! `A(y)/√2`; the other two are orthogonal to it, which makes
//! `tr(A_i A(y)⁻¹) = 0` for `i = 2, 3`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};

pub type Point = [f64; 2];
pub type Mat2 = Matrix2<f64>;

/// Central finite-difference step used for user fields without analytic derivatives.
pub const FD_STEP: f64 = 1e-5;
const DET_FLOOR: f64 = 1e-14;
const PIVOT_FLOOR: f64 = 1e-10;
const GRAM_COND_CEILING: f64 = 1e12;
const BOUNDS_SAMPLES: usize = 65;

/// Which coefficient law a [`CoefficientField`] evaluates.
#[derive(Clone)]
pub enum FieldKind {
    /// `A ≡ I`.
    Identity,
    /// `A ≡ diag(a, b)`.
    Diag { a: f64, b: f64 },
    /// `A(x) = diag(1 + α x₁², 1)`.
    Poly { alpha: f64 },
    /// `A ≡ R(θ) diag(a, b) R(θ)ᵀ`, a rotated constant diagonal.
    Rot { theta: f64, a: f64, b: f64 },
    /// User-supplied law; derivatives fall back to central differences.
    Custom(Arc<dyn Fn(Point) -> Mat2 + Send + Sync>),
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Custom(_) => f.write_str("Custom(..)"),
            other => write!(f, "{other}"),
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Identity => f.write_str("identity"),
            FieldKind::Diag { a, b } => write!(f, "diag({a},{b})"),
            FieldKind::Poly { alpha } => write!(f, "poly({alpha})"),
            FieldKind::Rot { theta, a, b } => write!(f, "rot({theta},{a},{b})"),
            FieldKind::Custom(_) => f.write_str("custom"),
        }
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    /// Parses `identity`, `diag(a,b)`, `poly(α)` or `rot(θ,a,b)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("unknown coefficient field `{s}`"));
        if s == "identity" {
            return Ok(FieldKind::Identity);
        }
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim();
        let args = s[open + 1..s.len() - 1]
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        match (name, args.as_slice()) {
            ("diag", &[a, b]) => Ok(FieldKind::Diag { a, b }),
            ("poly", &[alpha]) => Ok(FieldKind::Poly { alpha }),
            ("rot", &[theta, a, b]) => Ok(FieldKind::Rot { theta, a, b }),
            _ => Err(bad()),
        }
    }
}

/// A symmetric, uniformly elliptic matrix field together with its spectral
/// bounds over an evaluation box.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    kind: FieldKind,
    lambda: f64,
    lambda_upper: f64,
    bbox: [Point; 2],
}

impl CoefficientField {
    /// Default evaluation box, large enough for the unit disk and the unit square.
    pub const DEFAULT_BOX: [Point; 2] = [[-1.5, -1.5], [1.5, 1.5]];

    pub fn new(kind: FieldKind) -> Result<Self> {
        Self::with_box(kind, Self::DEFAULT_BOX)
    }

    /// Builds the field and samples its spectrum over `bbox` to fix `λ` and the upper bound.
    pub fn with_box(kind: FieldKind, bbox: [Point; 2]) -> Result<Self> {
        let mut field = CoefficientField {
            kind,
            lambda: f64::NAN,
            lambda_upper: f64::NAN,
            bbox,
        };
        let (lo, hi) = field.sample_spectrum()?;
        if !(lo > 0.0) {
            return Err(Error::InvalidInput(format!(
                "coefficient field {} is not uniformly elliptic on the box (min eigenvalue {lo})",
                field.kind
            )));
        }
        field.lambda = lo;
        field.lambda_upper = hi;
        Ok(field)
    }

    pub fn identity() -> Self {
        Self::new(FieldKind::Identity).expect("identity is elliptic")
    }

    pub fn diag(a: f64, b: f64) -> Result<Self> {
        Self::new(FieldKind::Diag { a, b })
    }

    pub fn poly(alpha: f64) -> Result<Self> {
        Self::new(FieldKind::Poly { alpha })
    }

    pub fn rot(theta: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(FieldKind::Rot { theta, a, b })
    }

    pub fn custom<F>(f: F) -> Result<Self>
    where
        F: Fn(Point) -> Mat2 + Send + Sync + 'static,
    {
        Self::new(FieldKind::Custom(Arc::new(f)))
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// Uniform ellipticity lower bound λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Upper spectral bound on the evaluation box.
    pub fn lambda_upper(&self) -> f64 {
        self.lambda_upper
    }

    pub fn bbox(&self) -> [Point; 2] {
        self.bbox
    }

    pub fn is_constant(&self) -> bool {
        matches!(
            self.kind,
            FieldKind::Identity | FieldKind::Diag { .. } | FieldKind::Rot { .. }
        )
    }

    pub fn eval(&self, x: Point) -> Mat2 {
        match &self.kind {
            FieldKind::Identity => Mat2::identity(),
            FieldKind::Diag { a, b } => Mat2::new(*a, 0.0, 0.0, *b),
            FieldKind::Poly { alpha } => Mat2::new(1.0 + alpha * x[0] * x[0], 0.0, 0.0, 1.0),
            FieldKind::Rot { theta, a, b } => {
                let (s, c) = theta.sin_cos();
                let r = Mat2::new(c, -s, s, c);
                r * Mat2::new(*a, 0.0, 0.0, *b) * r.transpose()
            }
            FieldKind::Custom(f) => f(x),
        }
    }

    /// `[∂₁A, ∂₂A]`.
    pub fn grad(&self, x: Point) -> [Mat2; 2] {
        match &self.kind {
            FieldKind::Identity | FieldKind::Diag { .. } | FieldKind::Rot { .. } => {
                [Mat2::zeros(), Mat2::zeros()]
            }
            FieldKind::Poly { alpha } => {
                [Mat2::new(2.0 * alpha * x[0], 0.0, 0.0, 0.0), Mat2::zeros()]
            }
            FieldKind::Custom(_) => self.fd_grad(x),
        }
    }

    /// `[∂₁₁A, ∂₁₂A, ∂₂₂A]`.
    pub fn hess(&self, x: Point) -> [Mat2; 3] {
        match &self.kind {
            FieldKind::Identity | FieldKind::Diag { .. } | FieldKind::Rot { .. } => {
                [Mat2::zeros(); 3]
            }
            FieldKind::Poly { alpha } => [
                Mat2::new(2.0 * alpha, 0.0, 0.0, 0.0),
                Mat2::zeros(),
                Mat2::zeros(),
            ],
            FieldKind::Custom(_) => self.fd_hess(x),
        }
    }

    /// Central-difference derivatives of `eval`, the fallback for user fields.
    pub fn fd_grad(&self, x: Point) -> [Mat2; 2] {
        let d = FD_STEP;
        let dx = (self.eval([x[0] + d, x[1]]) - self.eval([x[0] - d, x[1]])) / (2.0 * d);
        let dy = (self.eval([x[0], x[1] + d]) - self.eval([x[0], x[1] - d])) / (2.0 * d);
        [dx, dy]
    }

    pub fn fd_hess(&self, x: Point) -> [Mat2; 3] {
        // A wider step keeps the second-difference cancellation error near 1e-6.
        let d = 1e-4;
        let e = |p: Point| self.eval(p);
        let c = e(x);
        let xx = (e([x[0] + d, x[1]]) - c * 2.0 + e([x[0] - d, x[1]])) / (d * d);
        let yy = (e([x[0], x[1] + d]) - c * 2.0 + e([x[0], x[1] - d])) / (d * d);
        let xy = (e([x[0] + d, x[1] + d]) - e([x[0] + d, x[1] - d]) - e([x[0] - d, x[1] + d])
            + e([x[0] - d, x[1] - d]))
            / (4.0 * d * d);
        [xx, xy, yy]
    }

    /// `A(y)⁻¹`, rejecting corrupt (non-finite) values.
    pub fn inverse(&self, y: Point) -> Result<Mat2> {
        let a = self.eval(y);
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: y[0],
                y: y[1],
                what: "A(y)",
            });
        }
        inv2(&a)
    }

    /// `[∂₁A⁻¹, ∂₂A⁻¹]` from `∂A⁻¹ = −A⁻¹ ∂A A⁻¹`.
    pub fn inverse_grad(&self, y: Point) -> Result<[Mat2; 2]> {
        let ai = self.inverse(y)?;
        let [g1, g2] = self.grad(y);
        Ok([-ai * g1 * ai, -ai * g2 * ai])
    }

    /// Second derivatives `∂_k∂_j A⁻¹`, indexed `[[11, 12], [21, 22]]`.
    pub fn inverse_hess(&self, y: Point) -> Result<[[Mat2; 2]; 2]> {
        let ai = self.inverse(y)?;
        let g = self.grad(y);
        let [h11, h12, h22] = self.hess(y);
        let h = [[h11, h12], [h12, h22]];
        let mut out = [[Mat2::zeros(); 2]; 2];
        for k in 0..2 {
            for j in 0..2 {
                out[k][j] = ai * g[k] * ai * g[j] * ai + ai * g[j] * ai * g[k] * ai
                    - ai * h[k][j] * ai;
            }
        }
        Ok(out)
    }

    fn sample_spectrum(&self) -> Result<(f64, f64)> {
        let [lo, hi] = self.bbox;
        let n = if self.is_constant() { 1 } else { BOUNDS_SAMPLES };
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                let t = |k: usize| if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
                let p = [
                    lo[0] + t(i) * (hi[0] - lo[0]),
                    lo[1] + t(j) * (hi[1] - lo[1]),
                ];
                let a = self.eval(p);
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        x: p[0],
                        y: p[1],
                        what: "A(y)",
                    });
                }
                let (e0, e1) = sym_eigenvalues(&a);
                min = min.min(e0);
                max = max.max(e1);
            }
        }
        Ok((min, max))
    }
}

impl FromStr for CoefficientField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CoefficientField::new(s.parse()?)
    }
}

/// Eigenvalues `(min, max)` of the symmetric part of `a`.
pub fn sym_eigenvalues(a: &Mat2) -> (f64, f64) {
    let p = a[(0, 0)];
    let q = a[(1, 1)];
    let r = 0.5 * (a[(0, 1)] + a[(1, 0)]);
    let mean = 0.5 * (p + q);
    let rad = (0.25 * (p - q) * (p - q) + r * r).sqrt();
    (mean - rad, mean + rad)
}

/// Closed-form 2×2 inverse via the adjugate.
pub fn inv2(m: &Mat2) -> Result<Mat2> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det.abs() >= DET_FLOOR) {
        return Err(Error::SingularMatrix { det });
    }
    Ok(Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

fn diff(x: Point, y: Point) -> Vector2<f64> {
    Vector2::new(y[0] - x[0], y[1] - x[1])
}

/// `ψ_x(y) = A(y)⁻¹(y−x)·(y−x)`.
pub fn evaluate_psi(field: &CoefficientField, x: Point, y: Point) -> Result<f64> {
    let z = diff(x, y);
    let v = z.dot(&(field.inverse(y)? * z));
    if !v.is_finite() {
        return Err(Error::NonFinite {
            x: y[0],
            y: y[1],
            what: "ψ",
        });
    }
    Ok(v)
}

/// Frame metric `g(y)(M, N) = tr(A⁻¹ M N A⁻¹)` given `A(y)⁻¹`.
pub fn frame_metric(a_inv: &Mat2, m: &Mat2, n: &Mat2) -> f64 {
    (a_inv * m * n * a_inv).trace()
}

/// `g(y)`-orthonormal frame of the symmetric 2×2 matrices at one point.
#[derive(Clone, Debug)]
pub struct MatrixFrame {
    pub a1: Mat2,
    pub a2: Mat2,
    pub a3: Mat2,
    pub base_point: Point,
}

impl MatrixFrame {
    pub fn get(&self, i: FrameIndex) -> &Mat2 {
        match i {
            FrameIndex::A1 => &self.a1,
            FrameIndex::A2 => &self.a2,
            FrameIndex::A3 => &self.a3,
        }
    }

    pub fn as_array(&self) -> [Mat2; 3] {
        [self.a1, self.a2, self.a3]
    }

    /// Matrix of `g(y)(A_i, A_j)`; the identity for a valid frame.
    pub fn metric_gram(&self, field: &CoefficientField) -> Result<Matrix3<f64>> {
        let ai = field.inverse(self.base_point)?;
        let a = self.as_array();
        Ok(Matrix3::from_fn(|i, j| frame_metric(&ai, &a[i], &a[j])))
    }

    /// Hilbert–Schmidt Gram matrix `h_ij = tr(A_i A_j)`.
    pub fn hs_gram(&self) -> Matrix3<f64> {
        let a = self.as_array();
        Matrix3::from_fn(|i, j| (a[i] * a[j]).trace())
    }
}

/// Frame element selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameIndex {
    A1,
    A2,
    A3,
}

impl FrameIndex {
    pub const ALL: [FrameIndex; 3] = [FrameIndex::A1, FrameIndex::A2, FrameIndex::A3];
}

/// Modified Gram–Schmidt of `{A(y), diag(1,−1), offdiag(1,1)}` under `g(y)`.
pub fn build_frame(field: &CoefficientField, y: Point) -> Result<MatrixFrame> {
    let a = field.eval(y);
    let ai = field.inverse(y)?;
    let mut basis = [a, Mat2::new(1.0, 0.0, 0.0, -1.0), Mat2::new(0.0, 1.0, 1.0, 0.0)];
    for k in 0..3 {
        for j in 0..k {
            let (done, rest) = basis.split_at_mut(k);
            let proj = frame_metric(&ai, &rest[0], &done[j]);
            rest[0] -= done[j] * proj;
        }
        let norm = frame_metric(&ai, &basis[k], &basis[k]).sqrt();
        if !(norm >= PIVOT_FLOOR) {
            return Err(Error::DegenerateFrame {
                step: k + 1,
                pivot: norm,
            });
        }
        basis[k] /= norm;
    }
    // g(A, A) = tr(I) = 2, so the normalized first element is A/√2; pin it exactly.
    basis[0] = a / SQRT_2;
    Ok(MatrixFrame {
        a1: basis[0],
        a2: basis[1],
        a3: basis[2],
        base_point: y,
    })
}

/// Constants of the logarithmic singularity at a source point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularityConstants {
    pub d1: f64,
    pub c1: f64,
    pub at: Point,
}

pub const DEFAULT_CIRCLE_NODES: usize = 256;

/// `d₁(x) = 4π · mean over the unit circle of 1/(A(x)⁻¹z·z)`, trapezoid rule; `c₁ = 1/d₁`.
pub fn d1_quadrature(
    field: &CoefficientField,
    x: Point,
    n_nodes: usize,
) -> Result<SingularityConstants> {
    if n_nodes < 16 {
        return Err(Error::InvalidInput(format!(
            "circle quadrature needs at least 16 nodes, got {n_nodes}"
        )));
    }
    let ai = field.inverse(x)?;
    let sum: f64 = (0..n_nodes)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n_nodes as f64;
            let z = Vector2::new(t.cos(), t.sin());
            1.0 / z.dot(&(ai * z))
        })
        .sum();
    let d1 = 4.0 * PI * sum / n_nodes as f64;
    Ok(SingularityConstants {
        d1,
        c1: 1.0 / d1,
        at: x,
    })
}

/// `M₀(y) = Σᵢ h^{i1} Aᵢ(y)` with `h_ij = tr(A_i A_j)`.
///
/// The frame's `g`-orthonormality forces `tr(M₀ A_j) = δ_{1j}`, whose unique
/// solution is `A(y)⁻¹/√2`.
pub fn m0_matrix(field: &CoefficientField, y: Point) -> Result<Mat2> {
    let frame = build_frame(field, y)?;
    let h = frame.hs_gram();
    let eig = h.symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e.abs()), hi.max(e.abs())));
    let cond = hi / lo;
    if !(cond <= GRAM_COND_CEILING) {
        return Err(Error::IllConditioned { cond });
    }
    let h_inv = h.try_inverse().ok_or(Error::IllConditioned { cond })?;
    let a = frame.as_array();
    Ok((0..3).fold(Mat2::zeros(), |acc, i| acc + a[i] * h_inv[(i, 0)]))
}

/// Pieces of `ψ_x` and its derivatives at `y`.
struct PsiJet {
    z: Vector2<f64>,
    psi: f64,
    /// `∇ψ = 2A⁻¹z + w`.
    grad: Vector2<f64>,
    /// `w_j = z·(∂_jA⁻¹)z`.
    w: Vector2<f64>,
    /// `D²ψ`.
    hess: Matrix2<f64>,
    /// `∂_k w_j`, indexed `[k][j]`.
    dw: [[f64; 2]; 2],
}

fn psi_jet(field: &CoefficientField, x: Point, y: Point) -> Result<PsiJet> {
    let z = diff(x, y);
    if z.norm() == 0.0 {
        return Err(Error::SingularPoint);
    }
    let ai = field.inverse(y)?;
    let dai = field.inverse_grad(y)?;
    let ddai = field.inverse_hess(y)?;
    let psi = z.dot(&(ai * z));
    let w = Vector2::new(z.dot(&(dai[0] * z)), z.dot(&(dai[1] * z)));
    let grad = ai * z * 2.0 + w;
    let mut dw = [[0.0; 2]; 2];
    for k in 0..2 {
        for j in 0..2 {
            dw[k][j] = z.dot(&(ddai[k][j] * z)) + 2.0 * (dai[j] * z)[k];
        }
    }
    let hess = Matrix2::from_fn(|k, j| 2.0 * ai[(j, k)] + 2.0 * (dai[k] * z)[j] + dw[k][j]);
    if !psi.is_finite() || psi <= 0.0 {
        return Err(Error::NonFinite {
            x: y[0],
            y: y[1],
            what: "ψ",
        });
    }
    Ok(PsiJet {
        z,
        psi,
        grad,
        w,
        hess,
        dw,
    })
}

/// `div(M ∇(ψ_x log ψ_x))(y)` for a matrix field `M` with derivatives `dm = [∂₁M, ∂₂M]`.
///
/// Expands as `(log ψ + 1)[Σ (∂_kM)_kj ∂_jψ + M : D²ψ] + ∇ψ·M∇ψ / ψ`.
pub fn div_matrix_grad_psilog(
    field: &CoefficientField,
    x: Point,
    y: Point,
    m: &Mat2,
    dm: &[Mat2; 2],
) -> Result<f64> {
    let jet = psi_jet(field, x, y)?;
    let mut div_m_grad = 0.0;
    for k in 0..2 {
        for j in 0..2 {
            div_m_grad += dm[k][(k, j)] * jet.grad[j] + m[(k, j)] * jet.hess[(j, k)];
        }
    }
    Ok((jet.psi.ln() + 1.0) * div_m_grad + jet.grad.dot(&(m * jet.grad)) / jet.psi)
}

/// `div(A∇(ψ_x log ψ_x))(y)` in the expanded form
/// `4 log ψ + 8 + (log ψ + 1) div(Aw) + 4 z·w/ψ + w·Aw/ψ`.
pub fn div_a_grad_psilog(field: &CoefficientField, x: Point, y: Point) -> Result<f64> {
    let jet = psi_jet(field, x, y)?;
    let a = field.eval(y);
    let da = field.grad(y);
    let mut div_aw = 0.0;
    for k in 0..2 {
        for j in 0..2 {
            div_aw += da[k][(k, j)] * jet.w[j] + a[(k, j)] * jet.dw[k][j];
        }
    }
    let lp = jet.psi.ln();
    Ok(4.0 * lp + 8.0
        + (lp + 1.0) * div_aw
        + 4.0 * jet.z.dot(&jet.w) / jet.psi
        + jet.w.dot(&(a * jet.w)) / jet.psi)
}

/// Central-difference derivatives of the frame element `i` at `y`.
pub fn frame_grad(field: &CoefficientField, y: Point, i: FrameIndex) -> Result<[Mat2; 2]> {
    let d = FD_STEP;
    let at = |p: Point| build_frame(field, p).map(|f| *f.get(i));
    Ok([
        (at([y[0] + d, y[1]])? - at([y[0] - d, y[1]])?) / (2.0 * d),
        (at([y[0], y[1] + d])? - at([y[0], y[1] - d])?) / (2.0 * d),
    ])
}

/// `div(A_i ∇(ψ_x log ψ_x))(y)` for frame element `i`.
///
/// Bounded near `y = x` for `i = 2, 3`; for `i = 1` it carries the
/// `(4 log ψ)/√2` divergence.
pub fn frame_div_psilog(
    field: &CoefficientField,
    x: Point,
    y: Point,
    i: FrameIndex,
) -> Result<f64> {
    if x == y {
        return Err(Error::SingularPoint);
    }
    match i {
        FrameIndex::A1 => Ok(div_a_grad_psilog(field, x, y)? / SQRT_2),
        _ => {
            let frame = build_frame(field, y)?;
            let dm = if field.is_constant() {
                [Mat2::zeros(); 2]
            } else {
                frame_grad(field, y, i)?
            };
            div_matrix_grad_psilog(field, x, y, frame.get(i), &dm)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    macro_rules! assert_close {
        ($a:expr, $b:expr, $tol:expr) => {{
            let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
            assert!((a - b).abs() <= tol, "{} vs {} (tol {:e})", a, b, tol);
        }};
    }

    fn sym_err(m: &Mat2) -> f64 {
        (m[(0, 1)] - m[(1, 0)]).abs()
    }

    #[test]
    fn psi_examples() {
        let id = CoefficientField::identity();
        assert_close!(evaluate_psi(&id, [0.0, 0.0], [1.0, 0.0]).unwrap(), 1.0, 1e-15);
        let d = CoefficientField::diag(2.0, 1.0).unwrap();
        assert_close!(evaluate_psi(&d, [0.0, 0.0], [1.0, 0.0]).unwrap(), 0.5, 1e-15);
        let p = CoefficientField::poly(1.0).unwrap();
        // A(1,1) = diag(2, 1); dense solve of A v = z gives v = (1/2, 1).
        let a = p.eval([1.0, 1.0]);
        let v = a.lu().solve(&Vector2::new(1.0, 1.0)).unwrap();
        let oracle = v.dot(&Vector2::new(1.0, 1.0));
        assert_close!(oracle, 1.5, 1e-15);
        assert_close!(evaluate_psi(&p, [0.0, 0.0], [1.0, 1.0]).unwrap(), oracle, 1e-15);
    }

    #[test]
    fn corrupt_field_is_rejected() {
        let f = CoefficientField::with_box(
            FieldKind::Custom(Arc::new(|p: Point| {
                if p[0] > 2.0 {
                    Mat2::new(f64::NAN, 0.0, 0.0, 1.0)
                } else {
                    Mat2::identity()
                }
            })),
            [[-1.0, -1.0], [1.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(
            evaluate_psi(&f, [0.0, 0.0], [3.0, 0.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(CoefficientField::diag(1.0, -1.0).is_err());
    }

    #[test]
    fn parses_builtin_names() {
        let k: FieldKind = "rot(0.3, 2, 1)".parse().unwrap();
        assert!(matches!(k, FieldKind::Rot { a, b, .. } if a == 2.0 && b == 1.0));
        assert!(matches!("poly(1)".parse::<FieldKind>().unwrap(), FieldKind::Poly { alpha } if alpha == 1.0));
        assert!("diag(1)".parse::<FieldKind>().is_err());
        assert!("warp(1,2)".parse::<FieldKind>().is_err());
        assert_eq!("diag(2,1)".parse::<FieldKind>().unwrap().to_string(), "diag(2,1)");
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let p = CoefficientField::poly(0.7).unwrap();
        let x = [0.3, -0.4];
        let g = p.grad(x);
        let g_fd = p.fd_grad(x);
        for k in 0..2 {
            assert!((g[k] - g_fd[k]).amax() < 1e-9);
        }
        let h = p.hess(x);
        let h_fd = p.fd_hess(x);
        for k in 0..3 {
            assert!((h[k] - h_fd[k]).amax() < 1e-6);
        }
    }

    #[test]
    fn identity_frame_is_hilbert_schmidt_basis() {
        let f = build_frame(&CoefficientField::identity(), [0.1, 0.2]).unwrap();
        let s = SQRT_2.recip();
        assert!((f.a1 - Mat2::identity() * s).amax() < 1e-15);
        assert!((f.a2 - Mat2::new(s, 0.0, 0.0, -s)).amax() < 1e-15);
        assert!((f.a3 - Mat2::new(0.0, s, s, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn diag_frame_is_trace_free_against_inverse() {
        // Hand Gram–Schmidt for A = diag(4,1): A⁻¹ = diag(1/4, 1), g(M,N) = tr(A⁻² M N).
        // g(D, A) = tr(diag(1/16,1) diag(4,-1)) = 1/4 - 1 = -3/4 and g(A,A) = 2, so
        // D - (-3/8) A = diag(5/2, -5/8); the off-diagonal generator is already orthogonal.
        let field = CoefficientField::diag(4.0, 1.0).unwrap();
        let f = build_frame(&field, [0.0, 0.0]).unwrap();
        let ai = field.inverse([0.0, 0.0]).unwrap();
        assert_close!((f.a2 * ai).trace(), 0.0, 1e-14);
        assert_close!((f.a3 * ai).trace(), 0.0, 1e-14);
        let raw = Mat2::new(2.5, 0.0, 0.0, -0.625);
        let norm = frame_metric(&ai, &raw, &raw).sqrt();
        assert!((f.a2 - raw / norm).amax() < 1e-14);
        assert!(sym_err(&f.a2) == 0.0 && sym_err(&f.a3) == 0.0);
    }

    #[test]
    fn frame_is_orthonormal_for_rotated_field() {
        let field = CoefficientField::rot(0.4, 3.0, 0.5).unwrap();
        let f = build_frame(&field, [0.2, 0.2]).unwrap();
        let g = f.metric_gram(&field).unwrap();
        assert!((g - Matrix3::identity()).amax() < 1e-12);
        assert_eq!(f.a1, field.eval([0.2, 0.2]) / SQRT_2);
    }

    #[test]
    fn d1_closed_forms() {
        let id = d1_quadrature(&CoefficientField::identity(), [0.0, 0.0], 64).unwrap();
        assert_close!(id.d1, 4.0 * PI, 1e-13);
        assert_close!(id.c1, 1.0 / (4.0 * PI), 1e-15);
        for (a, b) in [(2.0, 1.0), (4.0, 9.0)] {
            let f = CoefficientField::diag(a, b).unwrap();
            let k = d1_quadrature(&f, [0.0, 0.0], 256).unwrap();
            assert_close!(k.d1, 4.0 * PI * f64::sqrt(a * b), 1e-10);
            assert_close!(k.c1 * k.d1, 1.0, 1e-15);
        }
        assert!(d1_quadrature(&CoefficientField::identity(), [0.0, 0.0], 8).is_err());
    }

    #[test]
    fn d1_converges_under_node_doubling() {
        let f = CoefficientField::poly(1.0).unwrap();
        let x = [0.5, 0.1];
        let a = d1_quadrature(&f, x, 64).unwrap().d1;
        let b = d1_quadrature(&f, x, 128).unwrap().d1;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn m0_examples() {
        let s = SQRT_2.recip();
        let m = m0_matrix(&CoefficientField::identity(), [0.0, 0.0]).unwrap();
        assert!((m - Mat2::identity() * s).amax() < 1e-15);
        let m = m0_matrix(&CoefficientField::diag(2.0, 1.0).unwrap(), [0.0, 0.0]).unwrap();
        assert!((m - Mat2::new(0.5, 0.0, 0.0, 1.0) * s).amax() < 1e-14);
        let field = CoefficientField::rot(1.1, 0.7, 2.3).unwrap();
        let frame = build_frame(&field, [0.0, 0.0]).unwrap();
        let m = m0_matrix(&field, [0.0, 0.0]).unwrap();
        for (j, a) in frame.as_array().iter().enumerate() {
            let expect = if j == 0 { 1.0 } else { 0.0 };
            assert_close!((m * a).trace(), expect, 1e-13);
        }
    }

    #[test]
    fn frame_direction_two_for_identity() {
        let id = CoefficientField::identity();
        for &(y0, y1) in &[(0.3, 0.1), (-0.02, 0.05), (1e-4, -3e-4)] {
            let v = frame_div_psilog(&id, [0.0, 0.0], [y0, y1], FrameIndex::A2).unwrap();
            let r2 = y0 * y0 + y1 * y1;
            // A₂ = diag(1,-1)/√2 after g-normalization.
            let expect = 4.0 * (y0 * y0 - y1 * y1) / (SQRT_2 * r2);
            assert_close!(v, expect, 1e-12);
            assert!(v.abs() <= 4.0 / SQRT_2 + 1e-12);
        }
        assert!(matches!(
            frame_div_psilog(&id, [0.2, 0.2], [0.2, 0.2], FrameIndex::A3),
            Err(Error::SingularPoint)
        ));
    }

    /// Finite-difference oracle: `div(M∇F)` by nested central differences of `F = ψ log ψ`.
    fn fd_div(field: &CoefficientField, m: &dyn Fn(Point) -> Mat2, x: Point, y: Point) -> f64 {
        let d = 1e-4;
        let f = |p: Point| {
            let s = evaluate_psi(field, x, p).unwrap();
            s * s.ln()
        };
        let grad = |p: Point| {
            Vector2::new(
                (f([p[0] + d, p[1]]) - f([p[0] - d, p[1]])) / (2.0 * d),
                (f([p[0], p[1] + d]) - f([p[0], p[1] - d])) / (2.0 * d),
            )
        };
        let flux = |p: Point| m(p) * grad(p);
        (flux([y[0] + d, y[1]])[0] - flux([y[0] - d, y[1]])[0]) / (2.0 * d)
            + (flux([y[0], y[1] + d])[1] - flux([y[0], y[1] - d])[1]) / (2.0 * d)
    }

    #[test]
    fn psilog_divergence_matches_finite_differences() {
        let field = CoefficientField::poly(1.0).unwrap();
        let x = [0.1, -0.2];
        let y = [0.35, 0.05];
        let a_route = div_a_grad_psilog(&field, x, y).unwrap();
        let general = div_matrix_grad_psilog(&field, x, y, &field.eval(y), &field.grad(y)).unwrap();
        assert_close!(a_route, general, 1e-11);
        let fd = fd_div(&field, &|p| field.eval(p), x, y);
        assert!((a_route - fd).abs() < 1e-4 * a_route.abs().max(1.0), "{a_route} vs {fd}");
        for i in [FrameIndex::A2, FrameIndex::A3] {
            let v = frame_div_psilog(&field, x, y, i).unwrap();
            let fd = fd_div(&field, &|p| *build_frame(&field, p).unwrap().get(i), x, y);
            assert!((v - fd).abs() < 1e-4 * v.abs().max(1.0), "{i:?}: {v} vs {fd}");
        }
    }

    #[test]
    fn identity_direction_one_has_log_divergence() {
        let id = CoefficientField::identity();
        // Central differences of ψ log ψ for A = I along the direction A/√2.
        let r: f64 = 0.01;
        let y = [r, 0.0];
        let v = frame_div_psilog(&id, [0.0, 0.0], y, FrameIndex::A1).unwrap();
        let fd = fd_div(&id, &|_| Mat2::identity() / SQRT_2, [0.0, 0.0], y);
        assert!((v - fd).abs() < 1e-3 * v.abs());
        assert_close!(v, (4.0 * (r * r).ln() + 8.0) / SQRT_2, 1e-12);
    }
}
