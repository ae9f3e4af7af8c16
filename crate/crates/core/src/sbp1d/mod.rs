//! One-dimensional fourth-order summation-by-parts operators.
//!
//! All stencils are stored unscaled (grid spacing 1); callers divide by `h`
//! or `h²`. Indices are 0-based, so the ghost points sit at `-1` and `n`.
//!
//! The second-derivative operator is assembled as
//! `G(γ) = W⁻¹(−M(γ) − e₀γ₀bᵀ + eₙ₋₁γₙ₋₁bₙᵀ)` where `M(γ) = Σ_k γ_k M⁽ᵏ⁾`
//! and every `M⁽ᵏ⁾` is symmetric positive semi-definite. The summation-by-parts
//! identity therefore holds by construction with `S(u, v) = uᵀM(γ)v / h`.

mod periodic;
mod tables;

use std::collections::BTreeMap;

pub use periodic::PeriodicOps;

use crate::{Error, Result, Scalar};

/// Smallest supported grid.
pub const MIN_POINTS: usize = 8;

/// Rows near each end whose second-derivative stencil differs from the interior one.
const ZONE: usize = 6;

const NORM: [(i128, i128); 4] = [(17, 48), (59, 48), (43, 48), (49, 48)];

#[rustfmt::skip]
const D_BOUNDARY: [[(i128, i128); 6]; 4] = [
    [(-24, 17), (59, 34), (-4, 17), (-3, 34), (0, 1), (0, 1)],
    [(-1, 2), (0, 1), (1, 2), (0, 1), (0, 1), (0, 1)],
    [(4, 43), (-59, 86), (0, 1), (59, 86), (-4, 43), (0, 1)],
    [(3, 98), (0, 1), (-59, 98), (0, 1), (32, 49), (-4, 49)],
];

/// Boundary derivative using the ghost point, nodes -1..=3.
const GHOST_STENCIL: [(i128, i128); 5] = [(-1, 4), (-5, 6), (3, 2), (-1, 2), (1, 12)];

/// One-sided fourth-order boundary derivative, nodes 0..=4.
const FREE_STENCIL: [(i128, i128); 5] = [(-25, 12), (4, 1), (-3, 1), (4, 3), (-1, 4)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum End {
    Low,
    High,
}

/// Which boundary-derivative variant an end of the second-derivative operator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Closure {
    Ghost,
    Free,
}

/// Closure choice for one end together with the ghost value it needs.
#[derive(Clone, Debug, PartialEq)]
pub enum EndValue<T> {
    Free,
    Ghost(T),
}

impl<T> EndValue<T> {
    pub fn closure(&self) -> Closure {
        match self {
            EndValue::Free => Closure::Free,
            EndValue::Ghost(_) => Closure::Ghost,
        }
    }
}

/// Uniform 1D grid description.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D<T> {
    pub n: usize,
    pub h: T,
    pub periodic: bool,
    pub ghost_low: bool,
    pub ghost_high: bool,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(n: usize, length: T, periodic: bool, ghost_low: bool, ghost_high: bool) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::Config(format!("grid needs at least {MIN_POINTS} points, got {n}")));
        }
        if periodic && (ghost_low || ghost_high) {
            return Err(Error::Config("periodic grids carry no ghost points".into()));
        }
        let cells = if periodic { n } else { n - 1 };
        let h = length / T::from_int(cells as i64);
        Ok(Grid1D { n, h, periodic, ghost_low, ghost_high })
    }

    /// Grid on `[0, 1]`.
    pub fn unit(n: usize, periodic: bool) -> Result<Self> {
        Self::new(n, T::one(), periodic, false, false)
    }

    pub fn x(&self, i: isize) -> T {
        T::from_int(i as i64) * self.h.clone()
    }

    pub fn length(&self) -> T {
        let cells = if self.periodic { self.n } else { self.n - 1 };
        T::from_int(cells as i64) * self.h.clone()
    }
}

#[derive(Clone, Debug)]
struct Term<T> {
    j: usize,
    k: usize,
    c: T,
}

#[derive(Clone, Debug)]
pub(crate) struct InteriorConsts<T> {
    pub twelfth: T,
    pub two_thirds: T,
    pub three_quarters: T,
    pub three: T,
    pub sixth: T,
}

impl<T: Scalar> InteriorConsts<T> {
    pub fn new() -> Self {
        InteriorConsts {
            twelfth: T::from_ratio(1, 12),
            two_thirds: T::from_ratio(2, 3),
            three_quarters: T::from_ratio(3, 4),
            three: T::from_int(3),
            sixth: T::from_ratio(1, 6),
        }
    }

    /// Centered fourth-order first derivative from the four neighbours.
    #[inline]
    pub fn d1(&self, vm2: T, vm1: T, vp1: T, vp2: T) -> T {
        self.twelfth.clone() * (vm2 - vp2) + self.two_thirds.clone() * (vp1 - vm1)
    }

    /// Five-point variable-coefficient `(γ v')'` stencil.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub fn d2(&self, g: [T; 5], v: [T; 5]) -> T {
        let [gm2, gm1, g0, gp1, gp2] = g;
        let [vm2, vm1, v0, vp1, vp2] = v;
        let q = self.three_quarters.clone();
        let three = self.three.clone();
        let mux1 = gm1.clone() - q.clone() * (g0.clone() + gm2.clone());
        let mux2 = gm2 + gp1.clone() + three.clone() * (g0.clone() + gm1.clone());
        let mux3 = gm1 + gp2.clone() + three * (gp1.clone() + g0.clone());
        let mux4 = gp1 - q * (g0 + gp2);
        self.sixth.clone()
            * (mux1 * (vm2 - v0.clone())
                + mux2 * (vm1 - v0.clone())
                + mux3 * (vp1 - v0.clone())
                + mux4 * (vp2 - v0))
    }
}

/// Fourth-order SBP operator set for a non-periodic grid of `n` points.
#[derive(Clone, Debug)]
pub struct Sbp1D<T> {
    n: usize,
    weights: Vec<T>,
    d_low: Vec<[T; 6]>,
    ghost: [T; 5],
    free: [T; 5],
    /// `-stencil / ω₀`, shared by both ends after mirroring.
    ghost_term: [T; 5],
    free_term: [T; 5],
    rows: Vec<Option<Vec<Term<T>>>>,
    consts: InteriorConsts<T>,
}

fn ratio<T: Scalar>(r: (i128, i128)) -> T {
    T::from_ratio(r.0, r.1)
}

/// Local block `M⁽ᵏ⁾` and the node it starts at.
fn local_block<T: Scalar>(n: usize, k: usize, d_low: &[[T; 6]], w: &[T]) -> (usize, Vec<Vec<T>>) {
    let boundary = |k: usize| -> Vec<Vec<T>> {
        (0..6)
            .map(|a| {
                (0..6)
                    .map(|b| {
                        w[k].clone() * d_low[k][a].clone() * d_low[k][b].clone()
                            + ratio(tables::CLOSURE_REMAINDER[k][a][b])
                    })
                    .collect()
            })
            .collect()
    };
    if k < 4 {
        (0, boundary(k))
    } else if k >= n - 4 {
        let m = boundary(n - 1 - k);
        let mirrored = (0..6).map(|a| (0..6).map(|b| m[5 - a][5 - b].clone()).collect()).collect();
        (n - 6, mirrored)
    } else {
        let a1 = [-1, 4, -3, 0, 0];
        let a2 = [0, -1, 0, 1, 0];
        let a3 = [0, 0, 3, -4, 1];
        let q = (0..5)
            .map(|a| {
                (0..5)
                    .map(|b| {
                        let num = (a1[a] * a1[b] + a3[a] * a3[b]) as i128 + 4 * (a2[a] * a2[b]) as i128;
                        T::from_ratio(num, 24)
                    })
                    .collect()
            })
            .collect();
        (k - 2, q)
    }
}

impl<T: Scalar> Sbp1D<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::Config(format!(
                "SBP operators need at least {MIN_POINTS} points, got {n}"
            )));
        }
        let mut weights = vec![T::one(); n];
        for (i, &r) in NORM.iter().enumerate() {
            weights[i] = ratio(r);
            weights[n - 1 - i] = ratio(r);
        }
        let d_low: Vec<[T; 6]> = D_BOUNDARY
            .iter()
            .map(|row| std::array::from_fn(|j| ratio(row[j])))
            .collect();
        let ghost: [T; 5] = std::array::from_fn(|m| ratio(GHOST_STENCIL[m]));
        let free: [T; 5] = std::array::from_fn(|m| ratio(FREE_STENCIL[m]));
        let ghost_term = std::array::from_fn(|m| -ghost[m].clone() / weights[0].clone());
        let free_term = std::array::from_fn(|m| -free[m].clone() / weights[0].clone());

        let in_zone = |i: usize| i < ZONE || i >= n - ZONE;
        let mut acc: Vec<BTreeMap<(usize, usize), T>> = vec![BTreeMap::new(); n];
        for k in 0..n {
            let (off, m) = local_block(n, k, &d_low, &weights);
            for (a, row) in m.iter().enumerate() {
                let i = off + a;
                if !in_zone(i) {
                    continue;
                }
                for (b, v) in row.iter().enumerate() {
                    if *v == T::zero() {
                        continue;
                    }
                    let e = acc[i].entry((off + b, k)).or_insert_with(T::zero);
                    *e = e.clone() - v.clone() / weights[i].clone();
                }
            }
        }
        let rows = acc
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                in_zone(i).then(|| {
                    m.into_iter()
                        .filter(|(_, c)| *c != T::zero())
                        .map(|((j, k), c)| Term { j, k, c })
                        .collect()
                })
            })
            .collect();

        Ok(Sbp1D {
            n,
            weights,
            d_low,
            ghost,
            free,
            ghost_term,
            free_term,
            rows,
            consts: InteriorConsts::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i].clone()
    }

    /// Ghost-point boundary stencil `d̃` (low end, nodes -1..=3).
    pub fn ghost_stencil(&self) -> &[T; 5] {
        &self.ghost
    }

    /// Ghost-free boundary stencil `d` (low end, nodes 0..=4).
    pub fn free_stencil(&self) -> &[T; 5] {
        &self.free
    }

    /// Coefficient of the ghost value in the first/last row of `G̃` per unit `γ` at that end.
    pub fn ghost_coefficient(&self) -> T {
        self.ghost_term[0].clone()
    }

    /// Node range `[lo, hi]` read by row `i` of `D`.
    pub fn d_support(&self, i: usize) -> (usize, usize) {
        let n = self.n;
        if i < 4 {
            (0, 5)
        } else if i >= n - 4 {
            (n - 6, n - 1)
        } else {
            (i - 2, i + 2)
        }
    }

    /// Row `i` of `D` (unscaled).
    #[inline]
    pub fn d_row(&self, i: usize, v: impl Fn(usize) -> T) -> T {
        let n = self.n;
        if i < 4 {
            let r = &self.d_low[i];
            (0..6).fold(T::zero(), |s, j| s + r[j].clone() * v(j))
        } else if i >= n - 4 {
            let r = &self.d_low[n - 1 - i];
            -(0..6).fold(T::zero(), |s, j| s + r[j].clone() * v(n - 1 - j))
        } else {
            self.consts.d1(v(i - 2), v(i - 1), v(i + 1), v(i + 2))
        }
    }

    /// Boundary derivative at one end (unscaled). `v` must accept `-1` and `n` for ghosts.
    #[inline]
    pub fn bd_row(&self, end: End, closure: Closure, v: impl Fn(isize) -> T) -> T {
        let n = self.n as isize;
        match (end, closure) {
            (End::Low, Closure::Ghost) => (0..5).fold(T::zero(), |s, m| s + self.ghost[m].clone() * v(m as isize - 1)),
            (End::Low, Closure::Free) => (0..5).fold(T::zero(), |s, m| s + self.free[m].clone() * v(m as isize)),
            (End::High, Closure::Ghost) => -(0..5).fold(T::zero(), |s, m| s + self.ghost[m].clone() * v(n - m as isize)),
            (End::High, Closure::Free) => -(0..5).fold(T::zero(), |s, m| s + self.free[m].clone() * v(n - 1 - m as isize)),
        }
    }

    /// Row `i` of `G(γ)` (unscaled). `v` is queried at `-1`/`n` only for ghost closures.
    #[inline]
    pub fn g_row(
        &self,
        i: usize,
        low: Closure,
        high: Closure,
        gamma: impl Fn(usize) -> T,
        v: impl Fn(isize) -> T,
    ) -> T {
        let n = self.n;
        match &self.rows[i] {
            None => {
                let ii = i as isize;
                self.consts.d2(
                    [gamma(i - 2), gamma(i - 1), gamma(i), gamma(i + 1), gamma(i + 2)],
                    [v(ii - 2), v(ii - 1), v(ii), v(ii + 1), v(ii + 2)],
                )
            }
            Some(terms) => {
                let mut acc = terms
                    .iter()
                    .fold(T::zero(), |s, t| s + t.c.clone() * gamma(t.k) * v(t.j as isize));
                if i == 0 {
                    acc = acc + gamma(0) * self.end_term(low, |m| v(m));
                }
                if i == n - 1 {
                    let last = n as isize - 1;
                    acc = acc + gamma(n - 1) * self.end_term(high, |m| v(last - m));
                }
                acc
            }
        }
    }

    /// `-(stencil · v) / ω₀` in coordinates measured inward from the end (`m = -1` is the ghost).
    #[inline]
    fn end_term(&self, closure: Closure, v: impl Fn(isize) -> T) -> T {
        match closure {
            Closure::Ghost => (0..5).fold(T::zero(), |s, m| s + self.ghost_term[m].clone() * v(m as isize - 1)),
            Closure::Free => (0..5).fold(T::zero(), |s, m| s + self.free_term[m].clone() * v(m as isize)),
        }
    }

    /// Dense `M(γ) = Σ_k γ_k M⁽ᵏ⁾` (unscaled), so `S(u, v) = uᵀM(γ)v / h`.
    pub fn s_matrix(&self, gamma: &[T]) -> Result<Vec<Vec<T>>> {
        self.check_len("S coefficient", gamma.len(), self.n)?;
        let n = self.n;
        let mut m = vec![vec![T::zero(); n]; n];
        for k in 0..n {
            let (off, blk) = local_block(n, k, &self.d_low, &self.weights);
            for (a, row) in blk.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    let e = &mut m[off + a][off + b];
                    *e = e.clone() + gamma[k].clone() * v.clone();
                }
            }
        }
        Ok(m)
    }

    /// `S(u, v)` from [`Self::s_matrix`].
    pub fn s_form(&self, gamma: &[T], u: &[T], v: &[T], h: &T) -> Result<T> {
        self.check_len("S left input", u.len(), self.n)?;
        self.check_len("S right input", v.len(), self.n)?;
        let m = self.s_matrix(gamma)?;
        let s = (0..self.n).fold(T::zero(), |s, i| {
            s + u[i].clone() * (0..self.n).fold(T::zero(), |r, j| r + m[i][j].clone() * v[j].clone())
        });
        Ok(s / h.clone())
    }

    fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::Shape(format!("{what}: expected {want} entries, got {got}")));
        }
        Ok(())
    }

    pub fn apply_d(&self, v: &[T], h: &T) -> Result<Vec<T>> {
        self.check_len("D input", v.len(), self.n)?;
        Ok((0..self.n).map(|i| self.d_row(i, |j| v[j].clone()) / h.clone()).collect())
    }

    /// `G̃(γ)v` with `v_ext` holding the ghost at index 0 and at index `n + 1`.
    pub fn apply_g_ghost(&self, gamma: &[T], v_ext: &[T], h: &T) -> Result<Vec<T>> {
        self.check_len("G̃ input", v_ext.len(), self.n + 2)?;
        let low = EndValue::Ghost(v_ext[0].clone());
        let high = EndValue::Ghost(v_ext[self.n + 1].clone());
        self.apply_g(gamma, &v_ext[1..=self.n], low, high, h)
    }

    /// Ghost-free `G(γ)v`.
    pub fn apply_g_noghost(&self, gamma: &[T], v: &[T], h: &T) -> Result<Vec<T>> {
        self.apply_g(gamma, v, EndValue::Free, EndValue::Free, h)
    }

    /// Second derivative with an independent closure choice at each end.
    pub fn apply_g(&self, gamma: &[T], v: &[T], low: EndValue<T>, high: EndValue<T>, h: &T) -> Result<Vec<T>> {
        self.check_len("G input", v.len(), self.n)?;
        self.check_len("coefficient", gamma.len(), self.n)?;
        let n = self.n as isize;
        let at = |j: isize| -> T {
            if j < 0 {
                match &low {
                    EndValue::Ghost(g) => g.clone(),
                    EndValue::Free => unreachable!("ghost-free closure queried a ghost value"),
                }
            } else if j >= n {
                match &high {
                    EndValue::Ghost(g) => g.clone(),
                    EndValue::Free => unreachable!("ghost-free closure queried a ghost value"),
                }
            } else {
                v[j as usize].clone()
            }
        };
        let h2 = h.clone() * h.clone();
        Ok((0..self.n)
            .map(|i| self.g_row(i, low.closure(), high.closure(), |k| gamma[k].clone(), at) / h2.clone())
            .collect())
    }

    /// `b̃v` or `bv` at one end, scaled by `1/h`.
    pub fn boundary_derivative(&self, v: &[T], end: End, variant: EndValue<T>, h: &T) -> Result<T> {
        self.check_len("boundary derivative input", v.len(), self.n)?;
        let n = self.n as isize;
        let at = |j: isize| -> T {
            if j < 0 || j >= n {
                match &variant {
                    EndValue::Ghost(g) => g.clone(),
                    EndValue::Free => unreachable!(),
                }
            } else {
                v[j as usize].clone()
            }
        };
        Ok(self.bd_row(end, variant.closure(), at) / h.clone())
    }

    /// Ghost value for which the ghost and ghost-free boundary derivatives agree.
    pub fn eliminated_ghost(&self, v: &[T], end: End) -> Result<T> {
        self.check_len("ghost elimination input", v.len(), self.n)?;
        let n = self.n;
        let inward = |m: usize| match end {
            End::Low => v[m].clone(),
            End::High => v[n - 1 - m].clone(),
        };
        let free = (0..5).fold(T::zero(), |s, m| s + self.free[m].clone() * inward(m));
        let rest = (1..5).fold(T::zero(), |s, m| s + self.ghost[m].clone() * inward(m - 1));
        Ok((free - rest) / self.ghost[0].clone())
    }

    /// Discrete inner product `h Σ ω_i u_i v_i`.
    pub fn inner(&self, u: &[T], v: &[T], h: &T) -> T {
        let s = (0..self.n).fold(T::zero(), |s, i| s + self.weights[i].clone() * u[i].clone() * v[i].clone());
        h.clone() * s
    }
}

/// First- and second-derivative operators along one lateral direction.
#[derive(Clone, Debug)]
pub enum Axis<T> {
    Periodic(PeriodicOps<T>),
    Bounded(Sbp1D<T>),
}

impl<T: Scalar> Axis<T> {
    pub fn new(n: usize, periodic: bool) -> Result<Self> {
        Ok(if periodic {
            Axis::Periodic(PeriodicOps::new(n)?)
        } else {
            Axis::Bounded(Sbp1D::new(n)?)
        })
    }

    pub fn n(&self) -> usize {
        match self {
            Axis::Periodic(p) => p.n(),
            Axis::Bounded(s) => s.n(),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Axis::Periodic(_))
    }

    pub fn weight(&self, i: usize) -> T {
        match self {
            Axis::Periodic(_) => T::one(),
            Axis::Bounded(s) => s.weight(i),
        }
    }

    #[inline]
    pub fn d_row(&self, i: usize, v: impl Fn(usize) -> T) -> T {
        match self {
            Axis::Periodic(p) => p.d_row(i, v),
            Axis::Bounded(s) => s.d_row(i, v),
        }
    }

    /// Second derivative row; bounded axes use ghost-free closures at both ends.
    #[inline]
    pub fn g_row(&self, i: usize, gamma: impl Fn(usize) -> T, v: impl Fn(usize) -> T) -> T {
        match self {
            Axis::Periodic(p) => p.q_row(i, gamma, v),
            Axis::Bounded(s) => s.g_row(i, Closure::Free, Closure::Free, gamma, |j| v(j as usize)),
        }
    }

    /// Boundary derivative (ghost-free) at one end of a bounded axis.
    #[inline]
    pub fn bd_row(&self, end: End, v: impl Fn(usize) -> T) -> T {
        match self {
            Axis::Periodic(_) => T::zero(),
            Axis::Bounded(s) => s.bd_row(end, Closure::Free, |j| v(j as usize)),
        }
    }
}
