//! Central differences of grid fields.
//!
//! Every helper returns `None` when part of its stencil is exterior.

use crate::grid::ScalarField;

fn sample(u: &ScalarField, node: usize, di: i64, dj: i64) -> Option<f64> {
    let dom = u.domain();
    let k = dom.offset(node, di, dj)?;
    dom.is_active(k).then(|| u.get(k))
}

/// `[∂₁u, ∂₂u]`.
pub fn gradient(u: &ScalarField, node: usize) -> Option<[f64; 2]> {
    let h = u.domain().h();
    Some([
        (sample(u, node, 1, 0)? - sample(u, node, -1, 0)?) / (2.0 * h),
        (sample(u, node, 0, 1)? - sample(u, node, 0, -1)?) / (2.0 * h),
    ])
}

/// `[∂₁₁u, ∂₁₂u, ∂₂₂u]` from the 9-point stencil.
pub fn hessian(u: &ScalarField, node: usize) -> Option<[f64; 3]> {
    let h2 = u.domain().h().powi(2);
    let c = sample(u, node, 0, 0)?;
    let d11 = (sample(u, node, 1, 0)? - 2.0 * c + sample(u, node, -1, 0)?) / h2;
    let d22 = (sample(u, node, 0, 1)? - 2.0 * c + sample(u, node, 0, -1)?) / h2;
    let d12 = (sample(u, node, 1, 1)? - sample(u, node, 1, -1)? - sample(u, node, -1, 1)?
        + sample(u, node, -1, -1)?)
        / (4.0 * h2);
    Some([d11, d12, d22])
}

/// Smallest eigenvalue of the difference Hessian.
pub fn hessian_min_eigenvalue(u: &ScalarField, node: usize) -> Option<f64> {
    let [a, b, c] = hessian(u, node)?;
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    Some(mean - rad)
}

/// `[∂₁₁₁u, ∂₁₁₂u, ∂₁₂₂u, ∂₂₂₂u]`.
pub fn third_differences(u: &ScalarField, node: usize) -> Option<[f64; 4]> {
    let h = u.domain().h();
    let h3 = h * h * h;
    let axis = |di: i64, dj: i64| -> Option<f64> {
        Some(
            (sample(u, node, 2 * di, 2 * dj)? - 2.0 * sample(u, node, di, dj)?
                + 2.0 * sample(u, node, -di, -dj)?
                - sample(u, node, -2 * di, -2 * dj)?)
                / (2.0 * h3),
        )
    };
    // ∂_m of the second difference along e, by a central difference in m.
    let mixed = |ei: i64, ej: i64, mi: i64, mj: i64| -> Option<f64> {
        let second = |si: i64, sj: i64| -> Option<f64> {
            Some(
                sample(u, node, si + ei, sj + ej)? - 2.0 * sample(u, node, si, sj)?
                    + sample(u, node, si - ei, sj - ej)?,
            )
        };
        Some((second(mi, mj)? - second(-mi, -mj)?) / (2.0 * h3))
    };
    Some([
        axis(1, 0)?,
        mixed(1, 0, 0, 1)?,
        mixed(0, 1, 1, 0)?,
        axis(0, 1)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, Shape};

    #[test]
    fn exact_on_cubics() {
        let dom = build_domain(Shape::rect(1.0, 1.0), 33).unwrap();
        let u = ScalarField::from_fn(&dom, |p| {
            p[0].powi(3) + 2.0 * p[0] * p[0] * p[1] - p[0] * p[1] * p[1] + 0.5 * p[1].powi(3)
        });
        let k = dom.nearest_node([0.5, 0.25]);
        let [x, y] = dom.point(k);
        let g = gradient(&u, k).unwrap();
        let h2 = dom.h() * dom.h();
        // Central first differences are off by h²/6 · u'''.
        assert!((g[0] - (3.0 * x * x + 4.0 * x * y - y * y) - h2 * (6.0 + 0.0) / 6.0).abs() < 1e-9);
        let hs = hessian(&u, k).unwrap();
        assert!((hs[0] - (6.0 * x + 4.0 * y)).abs() < 1e-8);
        assert!((hs[1] - (4.0 * x - 2.0 * y)).abs() < 1e-8);
        assert!((hs[2] - (-2.0 * x + 3.0 * y)).abs() < 1e-8);
        let t = third_differences(&u, k).unwrap();
        for (got, want) in t.iter().zip([6.0, 4.0, -2.0, 3.0]) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
    }

    #[test]
    fn quadratic_min_eigenvalue() {
        let dom = build_domain(Shape::disk(1.0), 33).unwrap();
        let u = ScalarField::from_fn(&dom, |p| p[0] * p[0] + p[1] * p[1]);
        let k = dom.nearest_node([0.1, -0.2]);
        assert!((hessian_min_eigenvalue(&u, k).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn stencil_off_grid_is_none() {
        let dom = build_domain(Shape::rect(1.0, 1.0), 17).unwrap();
        let u = ScalarField::zeros(&dom);
        let corner = dom.nearest_node([0.0, 0.0]);
        assert!(gradient(&u, corner).is_none());
        assert!(third_differences(&u, dom.nearest_node([1.0 / 16.0, 0.5])).is_none());
    }
}
