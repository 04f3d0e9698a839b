use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coefficient field produced a non-finite value at ({x}, {y}): {what}")]
    NonFinite { x: f64, y: f64, what: &'static str },

    #[error("matrix is singular or nearly so (|det| = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("Gram–Schmidt pivot {pivot:e} below 1e-10 at step {step}: frame generators are not independent")]
    DegenerateFrame { step: usize, pivot: f64 },

    #[error("Gram matrix condition number {cond:e} exceeds 1e12")]
    IllConditioned { cond: f64 },

    #[error("evaluation at the singular point y = x")]
    SingularPoint,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assembled operator is not SPD: diagonal entry {value:e} at unknown {row}")]
    NotPositive { row: usize, value: f64 },

    #[error("conjugate gradient breakdown (non-finite value) after {iterations} iterations")]
    Breakdown { iterations: usize },

    #[error("linear solve did not converge: residual {residual:e} after {iterations} iterations (tol {tol:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("energy descent diverged after {failures} rejected steps (last energy {energy})")]
    Diverged {
        failures: usize,
        energy: f64,
        history: Vec<f64>,
    },

    #[error("nodal set touches the domain boundary at ({x}, {y})")]
    NodalTouchesBoundary { x: f64, y: f64 },

    #[error("degenerate gradient |∇u| = {value:e} on the nodal set at ({x}, {y})")]
    SingularNodal { x: f64, y: f64, value: f64 },
}
