//! Block mappings, metric terms, materials and the curvilinear coefficient matrices.

use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Height field over the reference square, with exact partial derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurfaceFn {
    Constant { c: f64 },
    /// `a·sin(kπr¹) + b·cos(kπr²) + c`
    Sinusoid { a: f64, b: f64, k: f64, c: f64 },
    /// `amplitude·exp(−(r^(axis) − center)²/width)`, `axis` is 1 or 2.
    Ridge { amplitude: f64, axis: u8, center: f64, width: f64 },
    /// `amplitude·exp(−((r¹ − c₁)² + (r² − c₂)²)/width)`
    Bump { amplitude: f64, center: [f64; 2], width: f64 },
    Sum { terms: Vec<SurfaceFn> },
}

impl SurfaceFn {
    /// Value and the partials along r¹ and r².
    pub fn eval<T: Real>(&self, r1: T, r2: T) -> [T; 3] {
        let l = T::lit;
        match self {
            SurfaceFn::Constant { c } => [l(*c), T::zero(), T::zero()],
            SurfaceFn::Sinusoid { a, b, k, c } => {
                let w = l(*k) * T::PI();
                let (s1, c1) = (w * r1).sin_cos();
                let (s2, c2) = (w * r2).sin_cos();
                [l(*a) * s1 + l(*b) * c2 + l(*c), l(*a) * w * c1, -l(*b) * w * s2]
            }
            SurfaceFn::Ridge { amplitude, axis, center, width } => {
                let r = if *axis == 1 { r1 } else { r2 };
                let d = r - l(*center);
                let e = l(*amplitude) * (-d * d / l(*width)).exp();
                let de = -l(2.0) * d / l(*width) * e;
                if *axis == 1 {
                    [e, de, T::zero()]
                } else {
                    [e, T::zero(), de]
                }
            }
            SurfaceFn::Bump { amplitude, center, width } => {
                let d1 = r1 - l(center[0]);
                let d2 = r2 - l(center[1]);
                let e = l(*amplitude) * (-(d1 * d1 + d2 * d2) / l(*width)).exp();
                let f = -l(2.0) / l(*width) * e;
                [e, f * d1, f * d2]
            }
            SurfaceFn::Sum { terms } => terms.iter().fold([T::zero(); 3], |acc, t| {
                let v = t.eval(r1, r2);
                [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]
            }),
        }
    }

    pub fn value<T: Real>(&self, r1: T, r2: T) -> T {
        self.eval(r1, r2)[0]
    }

    fn validate(&self) -> Result<()> {
        match self {
            SurfaceFn::Ridge { axis, width, .. } => {
                if *axis != 1 && *axis != 2 {
                    return Err(Error::Config(format!("ridge axis must be 1 or 2, got {axis}")));
                }
                if *width <= 0.0 {
                    return Err(Error::Config("ridge width must be positive".into()));
                }
            }
            SurfaceFn::Bump { width, .. } if *width <= 0.0 => {
                return Err(Error::Config("bump width must be positive".into()));
            }
            SurfaceFn::Sum { terms } => terms.iter().try_for_each(SurfaceFn::validate)?,
            _ => {}
        }
        Ok(())
    }

    /// Interface of the convergence study: `π + 0.2 sin(4πr¹) + 0.2 cos(4πr²)`.
    pub fn mms_interface() -> Self {
        SurfaceFn::Sinusoid { a: 0.2, b: 0.2, k: 4.0, c: std::f64::consts::PI }
    }

    pub fn mms_bottom() -> Self {
        SurfaceFn::Sum {
            terms: vec![
                SurfaceFn::Ridge { amplitude: 0.2, axis: 1, center: 0.6, width: 0.04 },
                SurfaceFn::Ridge { amplitude: 0.2, axis: 2, center: 0.6, width: 0.04 },
            ],
        }
    }

    pub fn mms_top() -> Self {
        SurfaceFn::Sum {
            terms: vec![
                SurfaceFn::Constant { c: 2.0 * std::f64::consts::PI },
                SurfaceFn::Ridge { amplitude: 0.2, axis: 1, center: 0.5, width: 0.04 },
                SurfaceFn::Ridge { amplitude: 0.2, axis: 2, center: 0.5, width: 0.04 },
            ],
        }
    }

    /// Curved refinement interface of the surface-source experiment.
    pub fn source_interface() -> Self {
        SurfaceFn::Sinusoid { a: 20.0, b: 20.0, k: 4.0, c: 800.0 }
    }
}

/// Vertical blend `x = Lx·r¹, y = Ly·r², z = r³·top + (1 − r³)·bottom`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockMapping {
    pub lx: f64,
    pub ly: f64,
    pub bottom: SurfaceFn,
    pub top: SurfaceFn,
}

impl BlockMapping {
    pub fn position<T: Real>(&self, r: [T; 3]) -> [T; 3] {
        let b = self.bottom.value(r[0], r[1]);
        let t = self.top.value(r[0], r[1]);
        [T::lit(self.lx) * r[0], T::lit(self.ly) * r[1], r[2] * t + (T::one() - r[2]) * b]
    }

    /// `∂x_a/∂r_b`.
    pub fn covariant<T: Real>(&self, r: [T; 3]) -> [[T; 3]; 3] {
        let b = self.bottom.eval(r[0], r[1]);
        let t = self.top.eval(r[0], r[1]);
        let s = T::one() - r[2];
        let z = T::zero();
        [
            [T::lit(self.lx), z, z],
            [z, T::lit(self.ly), z],
            [r[2] * t[1] + s * b[1], r[2] * t[2] + s * b[2], t[0] - b[0]],
        ]
    }

    /// Reference coordinates of a physical point (the blend is invertible in closed form).
    pub fn reference<T: Real>(&self, x: [T; 3]) -> [T; 3] {
        let r1 = x[0] / T::lit(self.lx);
        let r2 = x[1] / T::lit(self.ly);
        let b = self.bottom.value(r1, r2);
        let t = self.top.value(r1, r2);
        [r1, r2, (x[2] - b) / (t - b)]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(Error::Config(format!("mapping extents must be positive, got {} x {}", self.lx, self.ly)));
        }
        self.bottom.validate()?;
        self.top.validate()
    }
}

/// Node lattice of one block on the unit reference cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Periodic in r¹ and r².
    pub periodic: bool,
}

impl Lattice {
    pub fn new(n1: usize, n2: usize, n3: usize, periodic: bool) -> Self {
        Lattice { n1, n2, n3, periodic }
    }

    pub fn h<T: Real>(&self) -> [T; 3] {
        let lat = |n: usize| if self.periodic { n } else { n - 1 };
        [
            T::one() / T::lit(lat(self.n1) as f64),
            T::one() / T::lit(lat(self.n2) as f64),
            T::one() / T::lit((self.n3 - 1) as f64),
        ]
    }

    pub fn r<T: Real>(&self, i: usize, j: usize, k: isize) -> [T; 3] {
        let h = self.h::<T>();
        [T::lit(i as f64) * h[0], T::lit(j as f64) * h[1], T::lit(k as f64) * h[2]]
    }

    pub fn nodes(&self) -> usize {
        self.n1 * self.n2 * self.n3
    }

    pub fn face_nodes(&self) -> usize {
        self.n1 * self.n2
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n2 + j) * self.n1 + i
    }

    /// Lateral sizes of the 1:2 refinement of this lattice.
    pub fn refined_lateral(&self) -> (usize, usize) {
        if self.periodic {
            (2 * self.n1, 2 * self.n2)
        } else {
            (2 * self.n1 - 1, 2 * self.n2 - 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = crate::sbp1d::MIN_POINTS;
        if self.n1 < m || self.n2 < m || self.n3 < m {
            return Err(Error::Config(format!(
                "lattice {}x{}x{} is below the minimum of {m} points per direction",
                self.n1, self.n2, self.n3
            )));
        }
        Ok(())
    }
}

/// Per-node metric of one block.
#[derive(Clone, Debug)]
pub struct MetricData<T> {
    pub lattice: Lattice,
    /// Physical coordinates.
    pub x: Vec<[T; 3]>,
    pub jac: Vec<T>,
    /// `dr_dx[j][k] = ∂r^(j)/∂x^(k)`, so row 3 is `∇_x R^(3)`.
    pub dr_dx: Vec<[[T; 3]; 3]>,
}

pub(crate) fn det3<T: Real>(a: &[[T; 3]; 3]) -> T {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub(crate) fn inv3<T: Real>(a: &[[T; 3]; 3], det: T) -> [[T; 3]; 3] {
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
    [
        [c(1, 1, 2, 2) / det, -c(0, 1, 2, 2) / det, c(0, 1, 1, 2) / det],
        [-c(1, 0, 2, 2) / det, c(0, 0, 2, 2) / det, -c(0, 0, 1, 2) / det],
        [c(1, 0, 2, 1) / det, -c(0, 0, 2, 1) / det, c(0, 0, 1, 1) / det],
    ]
}

impl<T: Real> MetricData<T> {
    pub fn evaluate(mapping: &BlockMapping, lattice: Lattice) -> Result<Self> {
        mapping.validate()?;
        lattice.validate()?;
        let n = lattice.nodes();
        let mut x = Vec::with_capacity(n);
        let mut jac = Vec::with_capacity(n);
        let mut dr_dx = Vec::with_capacity(n);
        for k in 0..lattice.n3 {
            for j in 0..lattice.n2 {
                for i in 0..lattice.n1 {
                    let r = lattice.r::<T>(i, j, k as isize);
                    let a = mapping.covariant(r);
                    let d = det3(&a);
                    if !(d > T::zero()) {
                        return Err(Error::Geometry(format!(
                            "non-positive Jacobian {d:e} at node ({i}, {j}, {k})"
                        )));
                    }
                    x.push(mapping.position(r));
                    jac.push(d);
                    dr_dx.push(inv3(&a, d));
                }
            }
        }
        Ok(MetricData { lattice, x, jac, dr_dx })
    }

    /// `|∇_x R^(3)|` at a node.
    #[inline]
    pub fn lambda(&self, node: usize) -> T {
        let g = &self.dr_dx[node][2];
        (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
    }

    /// Unit outward normal of the face `r^(axis) = 0` (`high = false`) or `= 1`.
    pub fn normal(&self, node: usize, axis: usize, high: bool) -> [T; 3] {
        let g = self.dr_dx[node][axis];
        let m = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        let s = if high { T::one() } else { -T::one() };
        [s * g[0] / m, s * g[1] / m, s * g[2] / m]
    }
}

/// Elastic stiffness at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stiffness<T> {
    Isotropic { mu: T, lambda: T },
    /// Voigt-ordered 6x6 matrix (11, 22, 33, 23, 13, 12).
    General([[T; 6]; 6]),
}

impl<T: Real> Stiffness<T> {
    pub fn voigt(&self) -> [[T; 6]; 6] {
        match *self {
            Stiffness::General(z) => z,
            Stiffness::Isotropic { mu, lambda } => {
                let mut z = [[T::zero(); 6]; 6];
                for a in 0..3 {
                    for b in 0..3 {
                        z[a][b] = lambda;
                    }
                    z[a][a] = lambda + mu + mu;
                    z[a + 3][a + 3] = mu;
                }
                z
            }
        }
    }

    /// `M_lk = O_lᵀ Z O_k`.
    pub fn m_block(&self, l: usize, k: usize) -> [[T; 3]; 3] {
        let z = self.voigt();
        let mut m = [[T::zero(); 3]; 3];
        for p in 0..3 {
            for q in 0..3 {
                m[p][q] = z[VOIGT_SELECT[l][p]][VOIGT_SELECT[k][q]];
            }
        }
        m
    }
}

/// Rows of `O_lᵀ`: which Voigt entry each displacement component picks.
const VOIGT_SELECT: [[usize; 3]; 3] = [[0, 5, 4], [5, 1, 3], [4, 3, 2]];

/// Material sample: density and stiffness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialPoint<T> {
    pub rho: T,
    pub stiffness: Stiffness<T>,
}

/// Material fields, addressable by preset name from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Material {
    Constant { rho: f64, mu: f64, lambda: f64 },
    /// Smooth heterogeneous field of the convergence study.
    Mms,
    /// Fine-block field of the energy test.
    EnergyFine,
    /// Coarse-block field of the energy test.
    EnergyCoarse,
    /// Constant general anisotropic stiffness.
    Anisotropic { rho: f64, stiffness: [[f64; 6]; 6] },
}

/// Density, shear modulus and first Lamé parameter of the convergence study.
pub fn mms_material<T: Real>(x: [T; 3]) -> (T, T, T) {
    let l = T::lit;
    let rho = l(2.0) + (x[0] + l(0.3)).sin() * (x[1] + l(0.3)).sin() * (x[2] - l(0.2)).sin();
    let mu = l(3.0) + (l(3.0) * x[0] + l(0.1)).sin() * (l(3.0) * x[1] + l(0.1)).sin() * x[2].sin();
    let s = (l(3.0) * x[2]).sin();
    let lambda = l(21.0) + (x[0] + l(0.1)).cos() * (x[1] + l(0.1)).cos() * s * s;
    (rho, mu, lambda)
}

impl Material {
    pub fn sample<T: Real>(&self, x: [T; 3]) -> MaterialPoint<T> {
        let l = T::lit;
        let iso = |rho, mu, lambda| MaterialPoint { rho, stiffness: Stiffness::Isotropic { mu, lambda } };
        match self {
            Material::Constant { rho, mu, lambda } => iso(l(*rho), l(*mu), l(*lambda)),
            Material::Mms => {
                let (rho, mu, lambda) = mms_material(x);
                iso(rho, mu, lambda)
            }
            Material::EnergyFine => {
                let rho = l(3.0) + (l(2.0) * x[0] + l(0.3)).sin() * (x[1] + l(0.3)).cos() * (l(2.0) * x[2] - l(0.2)).sin();
                let s = x[2].sin();
                let mu = l(2.0) + (l(3.0) * x[0] + l(0.1)).cos() * (l(3.0) * x[1] + l(0.1)).sin() * s * s;
                let s3 = (l(3.0) * x[2]).sin();
                let lambda = l(15.0) + (x[0] + l(0.1)).cos() * (l(4.0) * x[1] + l(0.1)).sin() * s3 * s3;
                iso(rho, mu, lambda)
            }
            Material::EnergyCoarse => {
                let rho = l(2.0) + (x[0] + l(0.3)).sin() * (x[1] + l(0.3)).sin() * (l(2.0) * x[2] - l(0.2)).sin();
                let mu = l(3.0) + (l(3.0) * x[0] + l(0.1)).sin() * (l(3.0) * x[1] + l(0.1)).sin() * x[2].sin();
                let s3 = (l(3.0) * x[2]).sin();
                let lambda = l(21.0) + (x[0] + l(0.1)).cos() * (x[1] + l(0.1)).cos() * s3 * s3;
                iso(rho, mu, lambda)
            }
            Material::Anisotropic { rho, stiffness } => MaterialPoint {
                rho: l(*rho),
                stiffness: Stiffness::General(stiffness.map(|row| row.map(l))),
            },
        }
    }

    /// Checks positivity of ρ and μ and definiteness of the stiffness at the given points.
    pub fn validate_at<T: Real>(&self, points: &[[T; 3]]) -> Result<()> {
        for x in points {
            let p = self.sample(*x);
            if !(p.rho > T::zero()) {
                return Err(Error::Material(format!("non-positive density {:e} at {:?}", p.rho, x)));
            }
            let z = p.stiffness.voigt();
            let m = nalgebra::Matrix6::from_fn(|a, b| z[a][b].as_f64());
            if (m - m.transpose()).amax() > 1e-12 * m.amax() || m.cholesky().is_none() {
                return Err(Error::Material(format!("stiffness is not symmetric positive definite at {:?}", x)));
            }
        }
        Ok(())
    }
}

/// Pair index of `N_ij` in storage: N11, N22, N33, N12, N13, N23.
#[inline]
pub fn pair_slot(i: usize, j: usize) -> (usize, bool) {
    match (i, j) {
        (0, 0) => (0, false),
        (1, 1) => (1, false),
        (2, 2) => (2, false),
        (0, 1) => (3, false),
        (1, 0) => (3, true),
        (0, 2) => (4, false),
        (2, 0) => (4, true),
        (1, 2) => (5, false),
        (2, 1) => (5, true),
        _ => unreachable!("direction index out of range"),
    }
}

/// The nine 3x3 matrices `N_ij` per node (six stored, the rest by transposition).
#[derive(Clone, Debug)]
pub struct CoefficientField<T> {
    pub lattice: Lattice,
    data: Vec<T>,
    pub rho: Vec<T>,
}

const PER_NODE: usize = 54;

impl<T: Real> CoefficientField<T> {
    pub fn assemble(metric: &MetricData<T>, material: &Material) -> Result<Self> {
        let lattice = metric.lattice;
        let n = lattice.nodes();
        let mut data = vec![T::zero(); n * PER_NODE];
        let mut rho = Vec::with_capacity(n);
        for node in 0..n {
            let p = material.sample(metric.x[node]);
            if !(p.rho > T::zero()) {
                return Err(Error::Material(format!("non-positive density at node {node}")));
            }
            rho.push(p.rho);
            let b = &metric.dr_dx[node];
            let jac = metric.jac[node];
            let m: [[[[T; 3]; 3]; 3]; 3] = std::array::from_fn(|l| std::array::from_fn(|k| p.stiffness.m_block(l, k)));
            let out = &mut data[node * PER_NODE..(node + 1) * PER_NODE];
            for (slot, (i, j)) in [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
                for pp in 0..3 {
                    for q in 0..3 {
                        let mut s = T::zero();
                        for l in 0..3 {
                            for k in 0..3 {
                                s += b[i][l] * b[j][k] * m[l][k][pp][q];
                            }
                        }
                        out[slot * 9 + pp * 3 + q] = jac * s;
                    }
                }
            }
        }
        let field = CoefficientField { lattice, data, rho };
        field.check_definite()?;
        Ok(field)
    }

    fn check_definite(&self) -> Result<()> {
        for node in 0..self.lattice.nodes() {
            for l in 0..3 {
                let m = self.matrix(l, l, node);
                let a = nalgebra::Matrix3::from_fn(|p, q| m[p][q].as_f64());
                if a.cholesky().is_none() {
                    return Err(Error::Material(format!("N_{0}{0} is not positive definite at node {node}", l + 1)));
                }
            }
        }
        Ok(())
    }

    /// Entry `(p, q)` of `N_ij` at a node.
    #[inline(always)]
    pub fn get(&self, i: usize, j: usize, p: usize, q: usize, node: usize) -> T {
        let (slot, t) = pair_slot(i, j);
        let (p, q) = if t { (q, p) } else { (p, q) };
        self.data[node * PER_NODE + slot * 9 + p * 3 + q]
    }

    /// Stored block of `N_ij` with `i <= j` (slot order N11, N22, N33, N12, N13, N23).
    #[inline(always)]
    pub fn slot(&self, slot: usize, node: usize) -> &[T] {
        &self.data[node * PER_NODE + slot * 9..node * PER_NODE + slot * 9 + 9]
    }

    pub fn matrix(&self, i: usize, j: usize, node: usize) -> [[T; 3]; 3] {
        std::array::from_fn(|p| std::array::from_fn(|q| self.get(i, j, p, q, node)))
    }

    /// Largest eigenvalue over nodes of `[Tr N_lm] / (ρJ)`.
    pub fn cfl_kappa(&self, metric: &MetricData<T>) -> T {
        let mut best = T::zero();
        for node in 0..self.lattice.nodes() {
            let s = self.rho[node] * metric.jac[node];
            let t = nalgebra::Matrix3::from_fn(|l, m| {
                let a = self.matrix(l, m, node);
                ((a[0][0] + a[1][1] + a[2][2]) / s).as_f64()
            });
            let e = t.symmetric_eigenvalues().max();
            if T::lit(e) > best {
                best = T::lit(e);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_mapping() -> BlockMapping {
        BlockMapping { lx: 1.0, ly: 1.0, bottom: SurfaceFn::Constant { c: 0.0 }, top: SurfaceFn::Constant { c: 1.0 } }
    }

    #[test]
    fn identity_metric() {
        let m = MetricData::<f64>::evaluate(&identity_mapping(), Lattice::new(8, 9, 10, false)).unwrap();
        for node in 0..m.lattice.nodes() {
            assert!((m.jac[node] - 1.0).abs() < 1e-15);
            assert!((m.lambda(node) - 1.0).abs() < 1e-15);
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(m.dr_dx[node][a][b], if a == b { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn interface_surface_value() {
        let v = SurfaceFn::mms_interface().value(0.0f64, 0.0);
        assert!((v - (std::f64::consts::PI + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn surface_partials_match_differences() {
        let s = SurfaceFn::Sum {
            terms: vec![SurfaceFn::mms_top(), SurfaceFn::mms_interface(), SurfaceFn::Bump { amplitude: 0.3, center: [0.4, 0.7], width: 0.05 }],
        };
        let h = 1e-6f64;
        for (r1, r2) in [(0.1f64, 0.2f64), (0.55, 0.9), (0.0, 1.0)] {
            let v = s.eval(r1, r2);
            let d1 = (s.value(r1 + h, r2) - s.value(r1 - h, r2)) / (2.0 * h);
            let d2 = (s.value(r1, r2 + h) - s.value(r1, r2 - h)) / (2.0 * h);
            assert!((v[1] - d1).abs() < 1e-7 * (1.0 + d1.abs()));
            assert!((v[2] - d2).abs() < 1e-7 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn source_mapping_jacobian() {
        let map = BlockMapping { lx: 2000.0, ly: 2000.0, bottom: SurfaceFn::Constant { c: 0.0 }, top: SurfaceFn::source_interface() };
        let h = 1e-6f64;
        let r3 = 0.3f64;
        let dz = (map.position([0.0, 0.0, r3 + h])[2] - map.position([0.0, 0.0, r3 - h])[2]) / (2.0 * h);
        assert!((dz - 820.0).abs() < 1e-5);
        let a = map.covariant([0.0f64, 0.0, r3]);
        assert!((det3(&a) - 3.28e9).abs() < 1e-3);
    }

    #[test]
    fn contravariant_inverts_covariant() {
        let map = BlockMapping { lx: 6.0, ly: 5.0, bottom: SurfaceFn::mms_bottom(), top: SurfaceFn::mms_interface() };
        let m = MetricData::<f64>::evaluate(&map, Lattice::new(9, 10, 8, false)).unwrap();
        for node in (0..m.lattice.nodes()).step_by(7) {
            let i = node % 9;
            let j = (node / 9) % 10;
            let k = node / 90;
            let a = map.covariant(m.lattice.r::<f64>(i, j, k as isize));
            for p in 0..3 {
                for q in 0..3 {
                    let s: f64 = (0..3).map(|t| m.dr_dx[node][p][t] * a[t][q]).sum();
                    assert!((s - if p == q { 1.0 } else { 0.0 }).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn inverted_mapping_rejected() {
        let map = BlockMapping { lx: 1.0, ly: 1.0, bottom: SurfaceFn::Constant { c: 1.0 }, top: SurfaceFn::Constant { c: 0.0 } };
        assert!(matches!(MetricData::<f64>::evaluate(&map, Lattice::new(8, 8, 8, false)), Err(Error::Geometry(_))));
    }

    #[test]
    fn cartesian_n_reduces_to_m() {
        let metric = MetricData::<f64>::evaluate(&identity_mapping(), Lattice::new(8, 8, 8, false)).unwrap();
        let (mu, lambda) = (1.5, 4.0);
        let coeff = CoefficientField::assemble(&metric, &Material::Constant { rho: 1.0, mu, lambda }).unwrap();
        let n11 = coeff.matrix(0, 0, 5);
        assert_eq!(n11, [[2.0 * mu + lambda, 0.0, 0.0], [0.0, mu, 0.0], [0.0, 0.0, mu]]);
        let n12 = coeff.matrix(0, 1, 5);
        assert_eq!(n12, [[0.0, lambda, 0.0], [mu, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(n12[0][0] + n12[1][1] + n12[2][2], 0.0);
        let n23 = coeff.matrix(1, 2, 5);
        assert_eq!(n23, [[0.0, 0.0, 0.0], [0.0, 0.0, lambda], [0.0, mu, 0.0]]);
    }

    #[test]
    fn kappa_cartesian() {
        let metric = MetricData::<f64>::evaluate(&identity_mapping(), Lattice::new(8, 8, 8, false)).unwrap();
        let coeff = CoefficientField::assemble(&metric, &Material::Constant { rho: 1.0, mu: 1.0, lambda: 2.0 }).unwrap();
        assert!((coeff.cfl_kappa(&metric) - 6.0).abs() < 1e-12);
        let heavy = CoefficientField::assemble(&metric, &Material::Constant { rho: 2.0, mu: 1.0, lambda: 2.0 }).unwrap();
        assert!((heavy.cfl_kappa(&metric) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_spd_stiffness_rejected() {
        let mut z = [[0.0; 6]; 6];
        z[0][0] = -1.0;
        let mat = Material::Anisotropic { rho: 1.0, stiffness: z };
        assert!(matches!(mat.validate_at(&[[0.0f64; 3]]), Err(Error::Material(_))));
        let metric = MetricData::<f64>::evaluate(&identity_mapping(), Lattice::new(8, 8, 8, false)).unwrap();
        assert!(CoefficientField::assemble(&metric, &mat).is_err());
    }
}
