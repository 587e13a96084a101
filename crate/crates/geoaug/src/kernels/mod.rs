//! Kernel expression trees and their Gram matrices.
//!
//! Base kernels are linear `var * (x . x')`, RBF
//! `var * exp(-|x - x'|^2 / (2 sigma^2))`, and quadratic
//! `var * (x . x' + c)^2`; composites are built with sum and product nodes.
//! Hyperparameters live in log space (`theta = exp(rho)`) so gradient steps
//! stay unconstrained; all gradients here are with respect to the
//! log-parameters, ordered by a pre-order traversal of the tree (within a
//! leaf: variance scale first, then the shape parameter).

mod grammar;
mod search;
mod text;

pub use grammar::{expand_grammar, BaseKernel, KernelInit};
pub use search::{bic, search_kernel, ModelScore, SearchConfig, TraceEntry};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::{Matrix, SymmetricMatrix};
use crate::scalar::{s, Scalar};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("active dimension {dim} out of range for {width}-dimensional input")]
    ActiveDimOutOfRange { dim: usize, width: usize },
    #[error("kernel parse error: {0}")]
    Parse(String),
}

/// A kernel expression tree.
///
/// Leaves carry a variance scale `var`; RBF adds a lengthscale `sigma` and
/// the quadratic kernel an offset `c`. An optional `dims` list restricts a
/// leaf to a subset of input dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelExpr<T> {
    Lin {
        var: T,
        dims: Option<Vec<usize>>,
    },
    Rbf {
        var: T,
        sigma: T,
        dims: Option<Vec<usize>>,
    },
    Quad {
        var: T,
        offset: T,
        dims: Option<Vec<usize>>,
    },
    Sum(Box<KernelExpr<T>>, Box<KernelExpr<T>>),
    Product(Box<KernelExpr<T>>, Box<KernelExpr<T>>),
}

impl<T: Scalar> KernelExpr<T> {
    pub fn lin(var: T) -> Self {
        KernelExpr::Lin { var, dims: None }
    }

    pub fn rbf(var: T, sigma: T) -> Self {
        KernelExpr::Rbf {
            var,
            sigma,
            dims: None,
        }
    }

    pub fn quad(var: T, offset: T) -> Self {
        KernelExpr::Quad {
            var,
            offset,
            dims: None,
        }
    }

    pub fn sum(left: KernelExpr<T>, right: KernelExpr<T>) -> Self {
        KernelExpr::Sum(Box::new(left), Box::new(right))
    }

    pub fn product(left: KernelExpr<T>, right: KernelExpr<T>) -> Self {
        KernelExpr::Product(Box::new(left), Box::new(right))
    }

    /// Tree depth: 1 for a leaf, `1 + max(children)` for operators.
    pub fn depth(&self) -> usize {
        match self {
            KernelExpr::Lin { .. } | KernelExpr::Rbf { .. } | KernelExpr::Quad { .. } => 1,
            KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Number of trainable hyperparameters.
    pub fn n_params(&self) -> usize {
        match self {
            KernelExpr::Lin { .. } => 1,
            KernelExpr::Rbf { .. } | KernelExpr::Quad { .. } => 2,
            KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => l.n_params() + r.n_params(),
        }
    }

    /// Log-space hyperparameter vector in pre-order traversal order.
    pub fn params_log(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        self.collect_params_log(&mut out);
        out
    }

    fn collect_params_log(&self, out: &mut Vec<T>) {
        match self {
            KernelExpr::Lin { var, .. } => out.push(var.ln()),
            KernelExpr::Rbf { var, sigma, .. } => {
                out.push(var.ln());
                out.push(sigma.ln());
            }
            KernelExpr::Quad { var, offset, .. } => {
                out.push(var.ln());
                out.push(offset.ln());
            }
            KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => {
                l.collect_params_log(out);
                r.collect_params_log(out);
            }
        }
    }

    /// Writes a log-space hyperparameter vector back into the tree.
    pub fn set_params_log(&mut self, rho: &[T]) {
        let consumed = self.assign_params_log(rho);
        assert_eq!(consumed, rho.len(), "hyperparameter vector length mismatch");
    }

    fn assign_params_log(&mut self, rho: &[T]) -> usize {
        match self {
            KernelExpr::Lin { var, .. } => {
                *var = rho[0].exp();
                1
            }
            KernelExpr::Rbf { var, sigma, .. } => {
                *var = rho[0].exp();
                *sigma = rho[1].exp();
                2
            }
            KernelExpr::Quad { var, offset, .. } => {
                *var = rho[0].exp();
                *offset = rho[1].exp();
                2
            }
            KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => {
                let nl = l.assign_params_log(rho);
                nl + r.assign_params_log(&rho[nl..])
            }
        }
    }

    /// Human-readable names for the hyperparameters, traversal-ordered.
    pub fn param_names(&self) -> Vec<String> {
        fn walk<T: Scalar>(k: &KernelExpr<T>, prefix: &str, out: &mut Vec<String>) {
            match k {
                KernelExpr::Lin { .. } => out.push(format!("{prefix}LIN.var")),
                KernelExpr::Rbf { .. } => {
                    out.push(format!("{prefix}RBF.var"));
                    out.push(format!("{prefix}RBF.sigma"));
                }
                KernelExpr::Quad { .. } => {
                    out.push(format!("{prefix}QUAD.var"));
                    out.push(format!("{prefix}QUAD.c"));
                }
                KernelExpr::Sum(l, r) => {
                    walk(l, &format!("{prefix}S.l."), out);
                    walk(r, &format!("{prefix}S.r."), out);
                }
                KernelExpr::Product(l, r) => {
                    walk(l, &format!("{prefix}P.l."), out);
                    walk(r, &format!("{prefix}P.r."), out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, "", &mut out);
        out
    }

    /// True when some leaf is of the given base type.
    pub fn contains_base(&self, base: BaseKernel) -> bool {
        match self {
            KernelExpr::Lin { .. } => base == BaseKernel::Lin,
            KernelExpr::Rbf { .. } => base == BaseKernel::Rbf,
            KernelExpr::Quad { .. } => base == BaseKernel::Quad,
            KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => {
                l.contains_base(base) || r.contains_base(base)
            }
        }
    }

    /// Validates hyperparameters and active dims against an input width.
    pub fn validate(&self, width: usize) -> Result<(), KernelError> {
        match self {
            KernelExpr::Lin { var, dims } => {
                check_positive(*var, "LIN var")?;
                check_dims(dims, width)
            }
            KernelExpr::Rbf { var, sigma, dims } => {
                check_positive(*var, "RBF var")?;
                check_positive(*sigma, "RBF sigma")?;
                check_dims(dims, width)
            }
            KernelExpr::Quad { var, offset, dims } => {
                check_positive(*var, "QUAD var")?;
                if !offset.is_finite() || *offset < T::zero() {
                    return Err(KernelError::InvalidHyperparameter(format!(
                        "QUAD c must be >= 0, got {offset}"
                    )));
                }
                check_dims(dims, width)
            }
            KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => {
                l.validate(width)?;
                r.validate(width)
            }
        }
    }

    /// Covariance between two feature vectors.
    pub fn eval(&self, x: &[T], x2: &[T]) -> Result<T, KernelError> {
        if x.len() != x2.len() {
            return Err(KernelError::DimensionMismatch {
                left: x.len(),
                right: x2.len(),
            });
        }
        self.validate(x.len())?;
        Ok(self.eval_unchecked(x, x2))
    }

    fn eval_unchecked(&self, x: &[T], x2: &[T]) -> T {
        match self {
            KernelExpr::Lin { var, dims } => *var * dot(x, x2, dims),
            KernelExpr::Rbf { var, sigma, dims } => {
                let d2 = sq_dist(x, x2, dims);
                *var * (-d2 / (s::<T>(2.0) * *sigma * *sigma)).exp()
            }
            KernelExpr::Quad { var, offset, dims } => {
                let base = dot(x, x2, dims) + *offset;
                *var * base * base
            }
            KernelExpr::Sum(l, r) => l.eval_unchecked(x, x2) + r.eval_unchecked(x, x2),
            KernelExpr::Product(l, r) => l.eval_unchecked(x, x2) * r.eval_unchecked(x, x2),
        }
    }

    /// Value plus gradient with respect to the log-parameters, written into
    /// `grad` (length `n_params`) in traversal order.
    fn eval_with_grad(&self, x: &[T], x2: &[T], grad: &mut [T]) -> T {
        match self {
            KernelExpr::Lin { var, dims } => {
                let v = *var * dot(x, x2, dims);
                grad[0] = v;
                v
            }
            KernelExpr::Rbf { var, sigma, dims } => {
                let d2 = sq_dist(x, x2, dims);
                let v = *var * (-d2 / (s::<T>(2.0) * *sigma * *sigma)).exp();
                grad[0] = v;
                grad[1] = v * d2 / (*sigma * *sigma);
                v
            }
            KernelExpr::Quad { var, offset, dims } => {
                let base = dot(x, x2, dims) + *offset;
                let v = *var * base * base;
                grad[0] = v;
                // d/d rho_c with c = exp(rho_c): c * var * 2 * base
                grad[1] = *offset * *var * s::<T>(2.0) * base;
                v
            }
            KernelExpr::Sum(l, r) => {
                let nl = l.n_params();
                let (gl, gr) = grad.split_at_mut(nl);
                l.eval_with_grad(x, x2, gl) + r.eval_with_grad(x, x2, gr)
            }
            KernelExpr::Product(l, r) => {
                let nl = l.n_params();
                let (gl, gr) = grad.split_at_mut(nl);
                let vl = l.eval_with_grad(x, x2, gl);
                let vr = r.eval_with_grad(x, x2, gr);
                for g in gl.iter_mut() {
                    *g *= vr;
                }
                for g in gr.iter_mut() {
                    *g *= vl;
                }
                vl * vr
            }
        }
    }

    /// Cross-Gram matrix: entry `(i, j)` is `k(x_i, x2_j)`.
    pub fn gram(&self, x: &[Vec<T>], x2: &[Vec<T>]) -> Result<Matrix<T>, KernelError> {
        let width = check_widths(x, x2)?;
        self.validate(width)?;
        Ok(Matrix::from_fn(x.len(), x2.len(), |i, j| {
            self.eval_unchecked(&x[i], &x2[j])
        }))
    }

    /// Symmetric Gram matrix over one point set (exploits symmetry).
    pub fn gram_symmetric(&self, x: &[Vec<T>]) -> Result<SymmetricMatrix<T>, KernelError> {
        let width = check_widths(x, x)?;
        self.validate(width)?;
        Ok(SymmetricMatrix::from_fn_symmetric(x.len(), |i, j| {
            self.eval_unchecked(&x[i], &x[j])
        }))
    }

    /// Symmetric Gram matrix together with one gradient matrix per
    /// log-hyperparameter, traversal-ordered.
    pub fn gram_with_grads(
        &self,
        x: &[Vec<T>],
    ) -> Result<(SymmetricMatrix<T>, Vec<Matrix<T>>), KernelError> {
        let width = check_widths(x, x)?;
        self.validate(width)?;
        let n = x.len();
        let k = self.n_params();
        let mut grads = vec![Matrix::zeros(n, n); k];
        let mut scratch = vec![T::zero(); k];
        let value = SymmetricMatrix::from_fn_symmetric(n, |i, j| {
            let v = self.eval_with_grad(&x[i], &x[j], &mut scratch);
            for (g, &sv) in grads.iter_mut().zip(scratch.iter()) {
                g[(i, j)] = sv;
                g[(j, i)] = sv;
            }
            v
        });
        Ok((value, grads))
    }

    /// Gradient matrices alone (see [`KernelExpr::gram_with_grads`]).
    pub fn gram_grad(&self, x: &[Vec<T>]) -> Result<Vec<Matrix<T>>, KernelError> {
        self.gram_with_grads(x).map(|(_, g)| g)
    }
}

fn check_positive<T: Scalar>(v: T, what: &str) -> Result<(), KernelError> {
    if !v.is_finite() || v <= T::zero() {
        return Err(KernelError::InvalidHyperparameter(format!(
            "{what} must be > 0, got {v}"
        )));
    }
    Ok(())
}

fn check_dims(dims: &Option<Vec<usize>>, width: usize) -> Result<(), KernelError> {
    if let Some(ds) = dims {
        for &d in ds {
            if d >= width {
                return Err(KernelError::ActiveDimOutOfRange { dim: d, width });
            }
        }
    }
    Ok(())
}

fn check_widths<T: Scalar>(x: &[Vec<T>], x2: &[Vec<T>]) -> Result<usize, KernelError> {
    let width = x.first().or_else(|| x2.first()).map_or(0, Vec::len);
    for row in x.iter().chain(x2.iter()) {
        if row.len() != width {
            return Err(KernelError::DimensionMismatch {
                left: width,
                right: row.len(),
            });
        }
    }
    Ok(width)
}

#[inline]
fn dot<T: Scalar>(x: &[T], x2: &[T], dims: &Option<Vec<usize>>) -> T {
    match dims {
        None => x
            .iter()
            .zip(x2)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b),
        Some(ds) => ds.iter().fold(T::zero(), |acc, &d| acc + x[d] * x2[d]),
    }
}

#[inline]
fn sq_dist<T: Scalar>(x: &[T], x2: &[T], dims: &Option<Vec<usize>>) -> T {
    match dims {
        None => x.iter().zip(x2).fold(T::zero(), |acc, (&a, &b)| {
            let d = a - b;
            acc + d * d
        }),
        Some(ds) => ds.iter().fold(T::zero(), |acc, &d| {
            let diff = x[d] - x2[d];
            acc + diff * diff
        }),
    }
}
