use super::{InteriorConsts, MIN_POINTS};
use crate::{Error, Result, Scalar};

/// Wrap-around centered operators; no boundary closures, unit norm weights.
#[derive(Clone, Debug)]
pub struct PeriodicOps<T> {
    n: usize,
    consts: InteriorConsts<T>,
}

impl<T: Scalar> PeriodicOps<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::Config(format!(
                "periodic operators need at least {MIN_POINTS} points, got {n}"
            )));
        }
        Ok(PeriodicOps { n, consts: InteriorConsts::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn wrap(&self, i: usize, off: isize) -> usize {
        (i as isize + off).rem_euclid(self.n as isize) as usize
    }

    #[inline]
    pub fn d_row(&self, i: usize, v: impl Fn(usize) -> T) -> T {
        let w = |o| v(self.wrap(i, o));
        self.consts.d1(w(-2), w(-1), w(1), w(2))
    }

    #[inline]
    pub fn q_row(&self, i: usize, gamma: impl Fn(usize) -> T, v: impl Fn(usize) -> T) -> T {
        let idx: [usize; 5] = std::array::from_fn(|m| self.wrap(i, m as isize - 2));
        self.consts.d2(idx.map(&gamma), idx.map(&v))
    }

    pub fn apply_d(&self, v: &[T], h: &T) -> Result<Vec<T>> {
        if v.len() != self.n {
            return Err(Error::Shape(format!("expected {} entries, got {}", self.n, v.len())));
        }
        Ok((0..self.n).map(|i| self.d_row(i, |j| v[j].clone()) / h.clone()).collect())
    }

    pub fn apply_q(&self, gamma: &[T], v: &[T], h: &T) -> Result<Vec<T>> {
        if v.len() != self.n || gamma.len() != self.n {
            return Err(Error::Shape(format!(
                "expected {} entries, got {} values and {} coefficients",
                self.n,
                v.len(),
                gamma.len()
            )));
        }
        let h2 = h.clone() * h.clone();
        Ok((0..self.n)
            .map(|i| self.q_row(i, |k| gamma[k].clone(), |j| v[j].clone()) / h2.clone())
            .collect())
    }
}
