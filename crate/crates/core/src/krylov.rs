//! Matrix-free solvers for the coarse ghost-value system.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::interface::Interface;
use crate::{Error, Real, Result};

pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

/// `K` of an interface as an operator.
pub struct GhostOperator<'a, T>(pub &'a Interface<T>);

impl<T: Real> LinearOperator<T> for GhostOperator<'_, T> {
    fn dim(&self) -> usize {
        self.0.unknowns()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.0.apply_k(x, y)
    }
}

/// Dense matrix as an operator (tests and mocks).
pub struct DenseOperator(pub DMatrix<f64>);

impl<T: Real> LinearOperator<T> for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = (0..x.len()).fold(T::zero(), |s, c| s + T::lit(self.0[(r, c)]) * x[c]);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cg,
    Pcg,
    BlockJacobi,
    /// Dense LU factorization computed once.
    Lu,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Cg => "cg",
            Method::Pcg => "pcg",
            Method::BlockJacobi => "block-jacobi",
            Method::Lu => "lu",
        }
    }
}

/// Vector norm of the stopping test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualNorm {
    #[default]
    Max,
    Euclidean,
}

impl ResidualNorm {
    pub fn eval<T: Real>(&self, v: &[T]) -> f64 {
        match self {
            ResidualNorm::Max => max_abs(v).as_f64(),
            ResidualNorm::Euclidean => dot(v, v).as_f64().sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub abs_tol: f64,
    /// Optional tolerance relative to `‖r‖`; the looser of the two applies.
    pub rel_tol: Option<f64>,
    pub norm: ResidualNorm,
    pub max_iter: usize,
    /// Unknowns per diagonal block; a multiple of 3.
    pub block_size: usize,
    /// Cap on unknowns for dense assembly.
    pub dense_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: Method::BlockJacobi, abs_tol: 1e-7, rel_tol: None, norm: ResidualNorm::Max, max_iter: 1000, block_size: 3, dense_cap: 20_000 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::Config(format!("solver.abs_tol must be positive, got {}", self.abs_tol)));
        }
        if let Some(r) = self.rel_tol {
            if !(r > 0.0) {
                return Err(Error::Config(format!("solver.rel_tol must be positive, got {r}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be at least 1".into()));
        }
        if self.block_size == 0 || self.block_size % 3 != 0 {
            return Err(Error::Config(format!("solver.block_size must be a positive multiple of 3, got {}", self.block_size)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

/// Inverted diagonal blocks of an operator.
#[derive(Clone, Debug)]
pub struct BlockDiagonal<T> {
    pub ranges: Vec<Range<usize>>,
    pub blocks: Vec<DMatrix<f64>>,
    inverses: Vec<Vec<T>>,
}

impl<T: Real> BlockDiagonal<T> {
    pub fn new(ranges: Vec<Range<usize>>, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let inverses = blocks
            .iter()
            .enumerate()
            .map(|(b, m)| {
                m.clone()
                    .try_inverse()
                    .map(|inv| inv.transpose().iter().map(|v| T::lit(*v)).collect())
                    .ok_or_else(|| Error::Contract(format!("diagonal block {b} is singular")))
            })
            .collect::<Result<_>>()?;
        Ok(BlockDiagonal { ranges, blocks, inverses })
    }

    pub fn apply_inverse(&self, r: &[T], z: &mut [T]) {
        for (range, inv) in self.ranges.iter().zip(&self.inverses) {
            let n = range.len();
            for a in 0..n {
                let row = &inv[a * n..(a + 1) * n];
                z[range.start + a] = (0..n).fold(T::zero(), |s, b| s + row[b] * r[range.start + b]);
            }
        }
    }

    /// The block-diagonal part as a dense matrix.
    pub fn dense(&self, dim: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dim, dim);
        for (range, b) in self.ranges.iter().zip(&self.blocks) {
            m.view_mut((range.start, range.start), (range.len(), range.len())).copy_from(b);
        }
        m
    }
}

/// Diagonal blocks by probing: blocks in the same group must not couple.
pub fn probe_blocks<T: Real>(op: &dyn LinearOperator<T>, ranges: &[Range<usize>], groups: &[Vec<usize>]) -> Vec<DMatrix<f64>> {
    let n = op.dim();
    let mut blocks: Vec<DMatrix<f64>> = ranges.iter().map(|r| DMatrix::zeros(r.len(), r.len())).collect();
    let width = ranges.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut x = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    for group in groups {
        for d in 0..width {
            x.iter_mut().for_each(|v| *v = T::zero());
            for &b in group {
                if d < ranges[b].len() {
                    x[ranges[b].start + d] = T::one();
                }
            }
            op.apply(&x, &mut y);
            for &b in group {
                if d < ranges[b].len() {
                    for (a, row) in ranges[b].clone().enumerate() {
                        blocks[b][(a, d)] = y[row].as_f64();
                    }
                }
            }
        }
    }
    blocks
}

/// Diagonal blocks of the ghost system for blocks of `block_size / 3` nodes along r¹.
pub fn ghost_block_diagonal<T: Real>(iface: &Interface<T>, block_size: usize) -> Result<BlockDiagonal<T>> {
    let k = block_size / 3;
    let ranges: Vec<Range<usize>> = (0..iface.block_count(k))
        .map(|b| {
            let r = iface.block_nodes(k, b);
            3 * r.start..3 * r.end
        })
        .collect();
    let blocks = probe_blocks(&GhostOperator(iface), &ranges, &iface.probe_colors(k));
    BlockDiagonal::new(ranges, blocks)
}

/// Columns of an operator by probing with unit vectors.
pub fn assemble_dense<T: Real>(op: &dyn LinearOperator<T>, cap: usize) -> Result<DMatrix<f64>> {
    let n = op.dim();
    if n > cap {
        return Err(Error::TooLarge { unknowns: n, cap });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut x = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    for c in 0..n {
        x[c] = T::one();
        op.apply(&x, &mut y);
        x[c] = T::zero();
        for r in 0..n {
            m[(r, c)] = y[r].as_f64();
        }
    }
    Ok(m)
}

/// `‖A‖₁‖A⁻¹‖₁`, infinite for singular matrices.
pub fn condition_number_l1(m: &DMatrix<f64>) -> f64 {
    let norm1 = |a: &DMatrix<f64>| a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    match m.clone().try_inverse() {
        Some(inv) => norm1(m) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// Ratio of the extreme singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = m.singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

fn residual<T: Real>(op: &dyn LinearOperator<T>, b: &[T], x: &[T], r: &mut [T]) {
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
}

/// Solver with its setup (preconditioner or factorization) cached across right-hand sides.
#[derive(Clone, Debug)]
pub struct GhostSolver<T> {
    pub config: SolverConfig,
    pub precond: Option<BlockDiagonal<T>>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<T: Real> GhostSolver<T> {
    /// Setup against a generic operator; `blocks` is required for preconditioned methods.
    pub fn new(op: &dyn LinearOperator<T>, config: SolverConfig, blocks: Option<BlockDiagonal<T>>) -> Result<Self> {
        config.validate()?;
        let needs_blocks = matches!(config.method, Method::Pcg | Method::BlockJacobi);
        if needs_blocks && blocks.is_none() {
            return Err(Error::Contract(format!("{} needs diagonal blocks", config.method.name())));
        }
        let lu = if config.method == Method::Lu { Some(assemble_dense(op, config.dense_cap)?.lu()) } else { None };
        Ok(GhostSolver { config, precond: if needs_blocks { blocks } else { None }, lu })
    }

    pub fn for_interface(iface: &Interface<T>, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let blocks = match config.method {
            Method::Pcg | Method::BlockJacobi => Some(ghost_block_diagonal(iface, config.block_size)?),
            _ => None,
        };
        Self::new(&GhostOperator(iface), config, blocks)
    }

    fn tolerance(&self, b: &[T]) -> f64 {
        let rel = self.config.rel_tol.map_or(0.0, |r| r * self.config.norm.eval(b));
        self.config.abs_tol.max(rel)
    }

    /// Solves `K x = b` from the initial guess `x0`.
    pub fn solve(&self, op: &dyn LinearOperator<T>, b: &[T], x0: &[T]) -> Result<(Vec<T>, SolveReport)> {
        let n = op.dim();
        if b.len() != n || x0.len() != n {
            return Err(Error::Shape(format!("system has {n} unknowns, got rhs {} and guess {}", b.len(), x0.len())));
        }
        let tol = self.tolerance(b);
        match self.config.method {
            Method::Lu => {
                let lu = self.lu.as_ref().expect("factorization built in setup");
                let rhs = nalgebra::DVector::from_iterator(n, b.iter().map(|v| v.as_f64()));
                let sol = lu.solve(&rhs).ok_or_else(|| Error::Contract("ghost system matrix is singular".into()))?;
                let x: Vec<T> = sol.iter().map(|v| T::lit(*v)).collect();
                let mut r = vec![T::zero(); n];
                residual(op, b, &x, &mut r);
                let res = self.config.norm.eval(&r);
                Ok((x, SolveReport { iterations: 1, final_residual: res, converged: res <= tol }))
            }
            Method::BlockJacobi => self.block_jacobi(op, b, x0, tol),
            Method::Cg | Method::Pcg => self.cg(op, b, x0, tol),
        }
    }

    fn block_jacobi(&self, op: &dyn LinearOperator<T>, b: &[T], x0: &[T], tol: f64) -> Result<(Vec<T>, SolveReport)> {
        let m = self.precond.as_ref().expect("blocks built in setup");
        let n = b.len();
        let mut x = x0.to_vec();
        let mut r = vec![T::zero(); n];
        let mut z = vec![T::zero(); n];
        let mut it = 0;
        loop {
            residual(op, b, &x, &mut r);
            let res = self.config.norm.eval(&r);
            if res <= tol || it == self.config.max_iter || !res.is_finite() {
                return Ok((x, SolveReport { iterations: it, final_residual: res, converged: res <= tol }));
            }
            m.apply_inverse(&r, &mut z);
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += *zi;
            }
            it += 1;
        }
    }

    fn cg(&self, op: &dyn LinearOperator<T>, b: &[T], x0: &[T], tol: f64) -> Result<(Vec<T>, SolveReport)> {
        let n = b.len();
        let precondition = |r: &[T], z: &mut [T]| match &self.precond {
            Some(m) => m.apply_inverse(r, z),
            None => z.copy_from_slice(r),
        };
        let mut x = x0.to_vec();
        let mut r = vec![T::zero(); n];
        let mut z = vec![T::zero(); n];
        let mut q = vec![T::zero(); n];
        let mut it = 0;
        // Outer loop restarts from the true residual if the recurrence drifted.
        loop {
            residual(op, b, &x, &mut r);
            let res = self.config.norm.eval(&r);
            if res <= tol || it >= self.config.max_iter || !res.is_finite() {
                return Ok((x, SolveReport { iterations: it, final_residual: res, converged: res <= tol }));
            }
            precondition(&r, &mut z);
            let mut p = z.clone();
            let mut rz = dot(&r, &z);
            while it < self.config.max_iter {
                op.apply(&p, &mut q);
                let pq = dot(&p, &q);
                it += 1;
                if !(pq > T::zero()) {
                    return Err(Error::Breakdown { iteration: it, curvature: pq.as_f64() });
                }
                let alpha = rz / pq;
                for i in 0..n {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * q[i];
                }
                if self.config.norm.eval(&r) <= tol {
                    break;
                }
                precondition(&r, &mut z);
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for i in 0..n {
                    p[i] = z[i] + beta * p[i];
                }
            }
        }
    }
}
