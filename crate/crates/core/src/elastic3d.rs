//! Spatial operators of one curvilinear block: `L`, tractions and physical boundary conditions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{det3, inv3, BlockMapping, CoefficientField, Lattice, Material, MetricData};
use crate::sbp1d::{Axis, Closure, End, Sbp1D};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockTag {
    Coarse,
    Fine,
    /// Uniform single-block reference mesh.
    Single,
}

impl BlockTag {
    pub fn name(&self) -> &'static str {
        match self {
            BlockTag::Coarse => "coarse",
            BlockTag::Fine => "fine",
            BlockTag::Single => "single",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaceBc {
    Periodic,
    Dirichlet,
    Traction,
    Interface,
}

/// Boundary treatment of the faces of one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockBcs {
    pub lateral: FaceBc,
    pub bottom: FaceBc,
    pub top: FaceBc,
}

impl BlockBcs {
    pub fn validate(&self, tag: BlockTag) -> Result<()> {
        if !matches!(self.lateral, FaceBc::Periodic | FaceBc::Dirichlet) {
            return Err(Error::Unsupported(format!("lateral faces must be periodic or dirichlet, got {:?}", self.lateral)));
        }
        let bottom_ok = match self.bottom {
            FaceBc::Dirichlet => true,
            FaceBc::Interface => tag == BlockTag::Fine,
            _ => false,
        };
        if !bottom_ok {
            return Err(Error::Unsupported(format!("{:?} bottom face of the {} block", self.bottom, tag.name())));
        }
        let top_ok = match self.top {
            FaceBc::Dirichlet => tag != BlockTag::Coarse,
            FaceBc::Traction => tag != BlockTag::Coarse,
            FaceBc::Interface => tag == BlockTag::Coarse,
            FaceBc::Periodic => false,
        };
        if !top_ok {
            return Err(Error::Unsupported(format!("{:?} top face of the {} block", self.top, tag.name())));
        }
        Ok(())
    }

    /// r³ closures: a ghost layer is carried at the top for the interface and for traction data.
    pub fn closures(&self) -> (Closure, Closure) {
        let high = match self.top {
            FaceBc::Interface | FaceBc::Traction => Closure::Ghost,
            _ => Closure::Free,
        };
        (Closure::Free, high)
    }
}

/// Boundary values supplied by a scenario.
pub trait BoundaryData<T: Real>: Sync {
    fn dirichlet(&self, tag: BlockTag, x: [T; 3], t: T) -> [T; 3];
    /// Prescribed `σ·n` for the unit outward normal `n`.
    fn traction(&self, tag: BlockTag, x: [T; 3], n: [T; 3], t: T) -> [T; 3];
    /// Second time derivative of the Dirichlet data.
    fn dirichlet_tt(&self, _tag: BlockTag, _x: [T; 3], _t: T) -> [T; 3] {
        [T::zero(); 3]
    }
}

/// Zero Dirichlet and traction data.
#[derive(Clone, Copy, Debug, Default)]
pub struct Homogeneous;

impl<T: Real> BoundaryData<T> for Homogeneous {
    fn dirichlet(&self, _: BlockTag, _: [T; 3], _: T) -> [T; 3] {
        [T::zero(); 3]
    }
    fn traction(&self, _: BlockTag, _: [T; 3], _: [T; 3], _: T) -> [T; 3] {
        [T::zero(); 3]
    }
}

/// Three values per node of one r³ = const face.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceField<T> {
    pub n1: usize,
    pub n2: usize,
    pub data: Vec<T>,
}

impl<T: Real> FaceField<T> {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        FaceField { n1, n2, data: vec![T::zero(); 3 * n1 * n2] }
    }

    pub fn from_fn(n1: usize, n2: usize, f: impl Fn(usize, usize) -> [T; 3]) -> Self {
        let mut data = Vec::with_capacity(3 * n1 * n2);
        for j in 0..n2 {
            for i in 0..n1 {
                data.extend_from_slice(&f(i, j));
            }
        }
        FaceField { n1, n2, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [T; 3] {
        let o = 3 * (j * self.n1 + i);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: [T; 3]) {
        let o = 3 * (j * self.n1 + i);
        self.data[o..o + 3].copy_from_slice(&v);
    }

    pub fn nodes(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Displacement of one block with one ghost plane below and above (`k = -1` and `k = n₃`).
#[derive(Clone, Debug, PartialEq)]
pub struct StateField<T> {
    pub lattice: Lattice,
    data: Vec<T>,
}

impl<T: Real> StateField<T> {
    pub fn zeros(lattice: Lattice) -> Self {
        StateField { lattice, data: vec![T::zero(); 3 * lattice.n1 * lattice.n2 * (lattice.n3 + 2)] }
    }

    /// Wraps a buffer in the layout of [`Self::raw`].
    pub fn from_raw(lattice: Lattice, data: Vec<T>) -> Result<Self> {
        let want = 3 * lattice.n1 * lattice.n2 * (lattice.n3 + 2);
        if data.len() != want {
            return Err(Error::Shape(format!("state field needs {want} values, got {}", data.len())));
        }
        Ok(StateField { lattice, data })
    }

    #[inline(always)]
    fn offset(&self, i: usize, j: usize, k: isize) -> usize {
        let l = &self.lattice;
        ((((k + 1) as usize) * l.n2 + j) * l.n1 + i) * 3
    }

    #[inline(always)]
    pub fn get(&self, q: usize, i: usize, j: usize, k: isize) -> T {
        self.data[self.offset(i, j, k) + q]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: isize) -> [T; 3] {
        let o = self.offset(i, j, k);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: isize, v: [T; 3]) {
        let o = self.offset(i, j, k);
        self.data[o..o + 3].copy_from_slice(&v);
    }

    /// Values at lattice node `node` (interior planes only).
    #[inline]
    pub fn at_node(&self, node: usize) -> [T; 3] {
        let o = 3 * (node + self.lattice.face_nodes());
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn plane_len(&self) -> usize {
        3 * self.lattice.face_nodes()
    }

    /// Everything, ghost planes included.
    pub fn raw(&self) -> &[T] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Planes `0..n₃`.
    pub fn interior(&self) -> &[T] {
        let p = self.plane_len();
        &self.data[p..p * (self.lattice.n3 + 1)]
    }

    pub fn interior_mut(&mut self) -> &mut [T] {
        let p = self.plane_len();
        let n3 = self.lattice.n3;
        &mut self.data[p..p * (n3 + 1)]
    }

    pub fn face(&self, k: isize) -> FaceField<T> {
        let o = self.offset(0, 0, k);
        FaceField { n1: self.lattice.n1, n2: self.lattice.n2, data: self.data[o..o + self.plane_len()].to_vec() }
    }

    pub fn set_face(&mut self, k: isize, f: &FaceField<T>) {
        let o = self.offset(0, 0, k);
        let p = self.plane_len();
        self.data[o..o + p].copy_from_slice(&f.data);
    }

    /// Sets every interior node from a function of its lattice index.
    pub fn fill(&mut self, f: impl Fn(usize) -> [T; 3] + Sync) {
        let p = self.plane_len();
        let n = self.lattice.nodes();
        self.data[p..p + 3 * n].par_chunks_mut(3).enumerate().for_each(|(node, c)| c.copy_from_slice(&f(node)));
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Operators and data of one block.
#[derive(Clone, Debug)]
pub struct Block<T> {
    pub tag: BlockTag,
    pub lattice: Lattice,
    pub h: [T; 3],
    pub ax1: Axis<T>,
    pub ax2: Axis<T>,
    pub ax3: Sbp1D<T>,
    pub bcs: BlockBcs,
    pub low: Closure,
    pub high: Closure,
    pub mapping: BlockMapping,
    pub material: Material,
    pub metric: MetricData<T>,
    pub coeff: CoefficientField<T>,
}

const FLUX: usize = 9;

impl<T: Real> Block<T> {
    pub fn new(tag: BlockTag, mapping: BlockMapping, material: Material, lattice: Lattice, bcs: BlockBcs) -> Result<Self> {
        bcs.validate(tag)?;
        if lattice.periodic != (bcs.lateral == FaceBc::Periodic) {
            return Err(Error::Config("lattice periodicity disagrees with the lateral boundary condition".into()));
        }
        let metric = MetricData::evaluate(&mapping, lattice)?;
        material.validate_at(&metric.x)?;
        let coeff = CoefficientField::assemble(&metric, &material)?;
        let (low, high) = bcs.closures();
        Ok(Block {
            tag,
            lattice,
            h: lattice.h(),
            ax1: Axis::new(lattice.n1, lattice.periodic)?,
            ax2: Axis::new(lattice.n2, lattice.periodic)?,
            ax3: Sbp1D::new(lattice.n3)?,
            bcs,
            low,
            high,
            mapping,
            material,
            metric,
            coeff,
        })
    }

    fn check(&self, u: &StateField<T>) -> Result<()> {
        if u.lattice != self.lattice {
            return Err(Error::Shape(format!(
                "state lattice {:?} does not match block lattice {:?}",
                u.lattice, self.lattice
            )));
        }
        Ok(())
    }

    /// `Σ_{m≠l} N_lm D_m u` on planes `k0..=k1`, nine values per node.
    fn fluxes(&self, u: &StateField<T>, k0: usize, k1: usize) -> Vec<T> {
        let lat = self.lattice;
        let (n1, n2) = (lat.n1, lat.n2);
        let plane = n1 * n2 * FLUX;
        let mut out = vec![T::zero(); plane * (k1 + 1 - k0)];
        let [h1, h2, h3] = self.h;
        let c = &self.coeff;
        out.par_chunks_mut(plane).enumerate().for_each(|(kr, buf)| {
            let k = k0 + kr;
            let ks = k as isize;
            for j in 0..n2 {
                for i in 0..n1 {
                    let node = lat.node(i, j, k);
                    let mut du = [[T::zero(); 3]; 3];
                    for q in 0..3 {
                        du[0][q] = self.ax1.d_row(i, |ii| u.get(q, ii, j, ks)) / h1;
                        du[1][q] = self.ax2.d_row(j, |jj| u.get(q, i, jj, ks)) / h2;
                        du[2][q] = self.ax3.d_row(k, |kk| u.get(q, i, j, kk as isize)) / h3;
                    }
                    let o = (j * n1 + i) * FLUX;
                    for l in 0..3 {
                        for p in 0..3 {
                            let mut s = T::zero();
                            for m in 0..3 {
                                if m == l {
                                    continue;
                                }
                                for q in 0..3 {
                                    s += c.get(l, m, p, q, node) * du[m][q];
                                }
                            }
                            buf[o + l * 3 + p] = s;
                        }
                    }
                }
            }
        });
        out
    }

    /// `L u` on plane `k` written to `out` (three values per face node); `flux` covers planes from `fk0`.
    fn l_plane(&self, u: &StateField<T>, flux: &[T], fk0: usize, k: usize, out: &mut [T]) {
        let lat = self.lattice;
        let (n1, n2) = (lat.n1, lat.n2);
        let [h1, h2, h3] = self.h;
        let (s1, s2, s3) = (T::one() / (h1 * h1), T::one() / (h2 * h2), T::one() / (h3 * h3));
        let c = &self.coeff;
        let ks = k as isize;
        let fidx = |i: usize, j: usize, kk: usize| ((kk - fk0) * n2 + j) * n1 * FLUX + i * FLUX;
        for j in 0..n2 {
            for i in 0..n1 {
                for p in 0..3 {
                    let mut g = T::zero();
                    for q in 0..3 {
                        g += self.ax1.g_row(i, |ii| c.get(0, 0, p, q, lat.node(ii, j, k)), |ii| u.get(q, ii, j, ks)) * s1;
                        g += self.ax2.g_row(j, |jj| c.get(1, 1, p, q, lat.node(i, jj, k)), |jj| u.get(q, i, jj, ks)) * s2;
                        g += self.ax3.g_row(
                            k,
                            self.low,
                            self.high,
                            |kk| c.get(2, 2, p, q, lat.node(i, j, kk)),
                            |kk| u.get(q, i, j, kk),
                        ) * s3;
                    }
                    let d = self.ax1.d_row(i, |ii| flux[fidx(ii, j, k) + p]) / h1
                        + self.ax2.d_row(j, |jj| flux[fidx(i, jj, k) + 3 + p]) / h2
                        + self.ax3.d_row(k, |kk| flux[fidx(i, j, kk) + 6 + p]) / h3;
                    out[3 * (j * n1 + i) + p] = g + d;
                }
            }
        }
    }

    /// `L u` at every node (not divided by `ρJ`); ghost planes of the result are zero.
    pub fn apply_l(&self, u: &StateField<T>) -> Result<StateField<T>> {
        self.check(u)?;
        let mut out = StateField::zeros(self.lattice);
        let flux = self.fluxes(u, 0, self.lattice.n3 - 1);
        let p = out.plane_len();
        out.interior_mut()
            .par_chunks_mut(p)
            .enumerate()
            .for_each(|(k, buf)| self.l_plane(u, &flux, 0, k, buf));
        Ok(out)
    }

    /// `L u` on the single plane `k`.
    pub fn apply_l_plane(&self, u: &StateField<T>, k: usize) -> Result<FaceField<T>> {
        self.check(u)?;
        let (lo, hi) = self.ax3.d_support(k);
        let flux = self.fluxes(u, lo, hi);
        let mut out = FaceField::zeros(self.lattice.n1, self.lattice.n2);
        self.l_plane(u, &flux, lo, k, &mut out.data);
        Ok(out)
    }

    fn end_plane(&self, end: End) -> (usize, Closure) {
        match end {
            End::Low => (0, self.low),
            End::High => (self.lattice.n3 - 1, self.high),
        }
    }

    /// Un-normalized traction `A₃u = Σ_m N₃m 𝔇_m u` on the face at `end`, using that end's r³ closure.
    pub fn traction(&self, u: &StateField<T>, end: End) -> Result<FaceField<T>> {
        self.check(u)?;
        let (k, closure) = self.end_plane(end);
        Ok(self.traction_with(u, end, k, closure))
    }

    fn traction_with(&self, u: &StateField<T>, end: End, k: usize, closure: Closure) -> FaceField<T> {
        let lat = self.lattice;
        let [h1, h2, h3] = self.h;
        let ks = k as isize;
        let c = &self.coeff;
        FaceField::from_fn(lat.n1, lat.n2, |i, j| {
            let node = lat.node(i, j, k);
            let mut d = [[T::zero(); 3]; 3];
            for q in 0..3 {
                d[0][q] = self.ax1.d_row(i, |ii| u.get(q, ii, j, ks)) / h1;
                d[1][q] = self.ax2.d_row(j, |jj| u.get(q, i, jj, ks)) / h2;
                d[2][q] = self.ax3.bd_row(end, closure, |kk| u.get(q, i, j, kk)) / h3;
            }
            std::array::from_fn(|p| {
                let mut s = T::zero();
                for m in 0..3 {
                    for q in 0..3 {
                        s += c.get(2, m, p, q, node) * d[m][q];
                    }
                }
                s
            })
        })
    }

    /// Coefficient of the ghost value in the r³ boundary derivative at `end`, scaled by `1/h₃`.
    pub fn traction_ghost_weight(&self, end: End) -> T {
        let g = self.ax3.ghost_stencil()[0];
        match end {
            End::Low => g / self.h[2],
            End::High => -g / self.h[2],
        }
    }

    /// Coefficient of the ghost value in the boundary row of `G̃₃` per unit `N₃₃`, scaled by `1/h₃²`.
    pub fn l_ghost_weight(&self) -> T {
        self.ax3.ghost_coefficient() / (self.h[2] * self.h[2])
    }

    /// `Λ J` on the face plane `k`.
    pub fn face_lambda_j(&self, k: usize) -> Vec<T> {
        let lat = self.lattice;
        (0..lat.face_nodes())
            .map(|f| {
                let node = k * lat.face_nodes() + f;
                self.metric.lambda(node) * self.metric.jac[node]
            })
            .collect()
    }

    /// Whether a node is overwritten by Dirichlet data.
    #[inline]
    pub fn is_dirichlet(&self, i: usize, j: usize, k: usize) -> bool {
        let lat = &self.lattice;
        (self.bcs.lateral == FaceBc::Dirichlet && (i == 0 || j == 0 || i + 1 == lat.n1 || j + 1 == lat.n2))
            || (self.bcs.bottom == FaceBc::Dirichlet && k == 0)
            || (self.bcs.top == FaceBc::Dirichlet && k + 1 == lat.n3)
    }

    /// Strong overwrite of all Dirichlet nodes.
    pub fn apply_dirichlet(&self, u: &mut StateField<T>, data: &dyn BoundaryData<T>, t: T) {
        let lat = self.lattice;
        for k in 0..lat.n3 {
            for j in 0..lat.n2 {
                for i in 0..lat.n1 {
                    if self.is_dirichlet(i, j, k) {
                        let x = self.metric.x[lat.node(i, j, k)];
                        u.set(i, j, k as isize, data.dirichlet(self.tag, x, t));
                    }
                }
            }
        }
    }

    /// Top ghost values from the prescribed traction, one 3x3 solve per column.
    pub fn solve_top_ghost(&self, u: &mut StateField<T>, data: &dyn BoundaryData<T>, t: T) -> Result<()> {
        if self.bcs.top != FaceBc::Traction {
            return Err(Error::Unsupported(format!("top face of the {} block has no traction condition", self.tag.name())));
        }
        self.check(u)?;
        let lat = self.lattice;
        let k = lat.n3 - 1;
        let top = lat.n3 as isize;
        for j in 0..lat.n2 {
            for i in 0..lat.n1 {
                u.set(i, j, top, [T::zero(); 3]);
            }
        }
        let rest = self.traction_with(u, End::High, k, Closure::Ghost);
        let w = self.traction_ghost_weight(End::High);
        for j in 0..lat.n2 {
            for i in 0..lat.n1 {
                let node = lat.node(i, j, k);
                let n = self.metric.normal(node, 2, true);
                let g = data.traction(self.tag, self.metric.x[node], n, t);
                let lj = self.metric.lambda(node) * self.metric.jac[node];
                let r = rest.at(i, j);
                let b: [T; 3] = std::array::from_fn(|p| lj * g[p] - r[p]);
                let a: [[T; 3]; 3] = std::array::from_fn(|p| std::array::from_fn(|q| w * self.coeff.get(2, 2, p, q, node)));
                u.set(i, j, top, solve3(&a, &b)?);
            }
        }
        Ok(())
    }

    /// Dirichlet overwrite, then top traction ghosts where prescribed.
    pub fn apply_physical_bcs(&self, u: &mut StateField<T>, data: &dyn BoundaryData<T>, t: T) -> Result<()> {
        self.apply_dirichlet(u, data, t);
        if self.bcs.top == FaceBc::Traction {
            self.solve_top_ghost(u, data, t)?;
        }
        Ok(())
    }

    /// Largest `κ` of the CFL bound on this block.
    pub fn kappa(&self) -> T {
        self.coeff.cfl_kappa(&self.metric)
    }

    pub fn min_h(&self) -> T {
        self.h[0].min(self.h[1]).min(self.h[2])
    }
}

pub(crate) fn solve3<T: Real>(a: &[[T; 3]; 3], b: &[T; 3]) -> Result<[T; 3]> {
    let d = det3(a);
    if !(d.abs() > T::zero()) || !d.is_finite() {
        return Err(Error::Contract("singular 3x3 system".into()));
    }
    let m = inv3(a, d);
    Ok(std::array::from_fn(|p| m[p][0] * b[0] + m[p][1] * b[1] + m[p][2] * b[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceFn;

    fn cube(lx: f64) -> BlockMapping {
        BlockMapping { lx, ly: lx, bottom: SurfaceFn::Constant { c: 0.0 }, top: SurfaceFn::Constant { c: lx } }
    }

    fn curvy() -> BlockMapping {
        BlockMapping {
            lx: 2.0 * std::f64::consts::PI,
            ly: 2.0 * std::f64::consts::PI,
            bottom: SurfaceFn::mms_interface(),
            top: SurfaceFn::mms_top(),
        }
    }

    fn bcs(lateral: FaceBc, bottom: FaceBc, top: FaceBc) -> BlockBcs {
        BlockBcs { lateral, bottom, top }
    }

    fn iso() -> Material {
        Material::Constant { rho: 1.0, mu: 1.0, lambda: 2.0 }
    }

    #[test]
    fn constant_field_is_annihilated() {
        for periodic in [false, true] {
            let lat = Lattice::new(9, 10, 11, periodic);
            let lateral = if periodic { FaceBc::Periodic } else { FaceBc::Dirichlet };
            let b = Block::<f64>::new(BlockTag::Fine, curvy(), Material::Mms, lat, bcs(lateral, FaceBc::Interface, FaceBc::Traction))
                .unwrap();
            let mut u = StateField::zeros(lat);
            for v in u.raw_mut().chunks_mut(3) {
                v.copy_from_slice(&[1.5, -0.5, 2.0]);
            }
            let lu = b.apply_l(&u).unwrap();
            let m = lu.interior().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = (0..lat.nodes()).map(|n| b.coeff.get(2, 2, 0, 0, n)).fold(0.0, f64::max) / (b.h[2] * b.h[2]);
            assert!(m < 1e-12 * scale, "{m} vs {scale}");
            let t = b.traction(&u, End::Low).unwrap();
            assert!(t.max_abs() < 1e-11);
        }
    }

    #[test]
    fn uniaxial_strain_has_constant_stress() {
        // u = (x, 0, 0) in a Cartesian box: ∇·σ = 0 and σ·e₃ = (0, 0, λ).
        let lat = Lattice::new(9, 9, 9, false);
        let top = Block::<f64>::new(BlockTag::Coarse, cube(2.0), iso(), lat, bcs(FaceBc::Dirichlet, FaceBc::Dirichlet, FaceBc::Interface))
            .unwrap();
        let bot = Block::<f64>::new(BlockTag::Fine, cube(2.0), iso(), lat, bcs(FaceBc::Dirichlet, FaceBc::Interface, FaceBc::Dirichlet))
            .unwrap();
        let mut u = StateField::zeros(lat);
        for k in -1..=lat.n3 as isize {
            for j in 0..lat.n2 {
                for i in 0..lat.n1 {
                    let x = top.mapping.position(lat.r::<f64>(i, j, k));
                    u.set(i, j, k, [x[0], 0.0, 0.0]);
                }
            }
        }
        for b in [&top, &bot] {
            let lu = b.apply_l(&u).unwrap();
            assert!(lu.interior().iter().all(|v| v.abs() < 1e-10));
        }
        for (b, end, k) in [(&top, End::High, lat.n3 - 1), (&bot, End::Low, 0)] {
            let t = b.traction(&u, end).unwrap();
            let lj = b.face_lambda_j(k);
            for j in 0..lat.n2 {
                for i in 0..lat.n1 {
                    let v = t.at(i, j);
                    let s = lj[j * lat.n1 + i];
                    assert!((v[0] / s).abs() < 1e-11 && (v[1] / s).abs() < 1e-11);
                    assert!((v[2] / s - 2.0).abs() < 1e-11, "{}", v[2] / s);
                }
            }
        }
    }

    #[test]
    fn single_plane_matches_full_application() {
        let lat = Lattice::new(10, 9, 12, false);
        let b = Block::<f64>::new(BlockTag::Coarse, curvy(), Material::Mms, lat, bcs(FaceBc::Dirichlet, FaceBc::Dirichlet, FaceBc::Interface))
            .unwrap();
        let mut u = StateField::zeros(lat);
        for (n, v) in u.raw_mut().iter_mut().enumerate() {
            *v = ((n as f64) * 0.37).sin();
        }
        let full = b.apply_l(&u).unwrap();
        for k in [0, 3, 6, lat.n3 - 2, lat.n3 - 1] {
            let p = b.apply_l_plane(&u, k).unwrap();
            assert_eq!(p, full.face(k as isize));
        }
    }

    #[test]
    fn linear_in_the_state() {
        let lat = Lattice::new(8, 8, 9, true);
        let b = Block::<f64>::new(BlockTag::Coarse, curvy(), Material::Mms, lat, bcs(FaceBc::Periodic, FaceBc::Dirichlet, FaceBc::Interface))
            .unwrap();
        let mut u = StateField::zeros(lat);
        let mut v = StateField::zeros(lat);
        let mut w = StateField::zeros(lat);
        for (n, ((a, bb), c)) in u.raw_mut().iter_mut().zip(v.raw_mut().iter_mut()).zip(w.raw_mut().iter_mut()).enumerate() {
            *a = ((n as f64) * 0.71).cos();
            *bb = ((n as f64) * 1.13).sin();
            *c = 2.0 * *a - 0.5 * *bb;
        }
        let (lu, lv, lw) = (b.apply_l(&u).unwrap(), b.apply_l(&v).unwrap(), b.apply_l(&w).unwrap());
        let scale = lu.interior().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for n in 0..lw.interior().len() {
            let e = lw.interior()[n] - 2.0 * lu.interior()[n] + 0.5 * lv.interior()[n];
            assert!(e.abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn top_ghost_reproduces_prescribed_traction() {
        struct Pull;
        impl BoundaryData<f64> for Pull {
            fn dirichlet(&self, _: BlockTag, _: [f64; 3], _: f64) -> [f64; 3] {
                [0.0; 3]
            }
            fn traction(&self, _: BlockTag, x: [f64; 3], _: [f64; 3], t: f64) -> [f64; 3] {
                [x[0].sin(), t, 1.0 + x[1]]
            }
        }
        let lat = Lattice::new(9, 9, 10, false);
        let b = Block::<f64>::new(BlockTag::Fine, curvy(), Material::Mms, lat, bcs(FaceBc::Dirichlet, FaceBc::Interface, FaceBc::Traction))
            .unwrap();
        let mut u = StateField::zeros(lat);
        u.fill(|n| [(n as f64 * 0.1).sin(), 0.0, (n as f64 * 0.2).cos()]);
        b.apply_physical_bcs(&mut u, &Pull, 0.5).unwrap();
        let tr = b.traction(&u, End::High).unwrap();
        let k = lat.n3 - 1;
        for j in 0..lat.n2 {
            for i in 0..lat.n1 {
                let node = lat.node(i, j, k);
                let x = b.metric.x[node];
                let lj = b.metric.lambda(node) * b.metric.jac[node];
                let want = Pull.traction(BlockTag::Fine, x, [0.0; 3], 0.5);
                let got = tr.at(i, j);
                for p in 0..3 {
                    assert!((got[p] / lj - want[p]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn traction_only_on_free_surface_tops() {
        let lat = Lattice::new(9, 9, 9, false);
        let e = Block::<f64>::new(BlockTag::Coarse, cube(1.0), iso(), lat, bcs(FaceBc::Dirichlet, FaceBc::Traction, FaceBc::Interface));
        assert!(matches!(e, Err(Error::Unsupported(_))));
        let e = Block::<f64>::new(BlockTag::Coarse, cube(1.0), iso(), lat, bcs(FaceBc::Traction, FaceBc::Dirichlet, FaceBc::Interface));
        assert!(matches!(e, Err(Error::Unsupported(_))));
        let b = Block::<f64>::new(BlockTag::Single, cube(1.0), iso(), lat, bcs(FaceBc::Dirichlet, FaceBc::Dirichlet, FaceBc::Dirichlet))
            .unwrap();
        let mut u = StateField::zeros(lat);
        assert!(matches!(b.solve_top_ghost(&mut u, &Homogeneous, 0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn homogeneous_dirichlet_keeps_zero_state() {
        let lat = Lattice::new(9, 9, 9, false);
        let b = Block::<f64>::new(BlockTag::Single, cube(1.0), iso(), lat, bcs(FaceBc::Dirichlet, FaceBc::Dirichlet, FaceBc::Traction))
            .unwrap();
        let mut u = StateField::zeros(lat);
        b.apply_physical_bcs(&mut u, &Homogeneous, 0.0).unwrap();
        assert!(u.raw().iter().all(|v| *v == 0.0));
    }
}
