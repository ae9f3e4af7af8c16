//! Coarse/fine face transfer and the ghost-value system for continuity of traction.

use serde::{Deserialize, Serialize};

use crate::elastic3d::{Block, BlockTag, FaceBc, FaceField, StateField};
use crate::sbp1d::{Axis, End};
use crate::{Error, Real, Result};

/// Restriction rows next to non-periodic face edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeRestriction {
    /// `R = ¼Pᵀ` everywhere, and no Dirichlet pinning of the coarse interface nodes.
    Transpose,
    /// `R = W₂ₕ⁻¹ ¼Pᵀ W_h` with the lateral SBP norms; equals `¼Pᵀ` away from edges and on periodic faces.
    NormAdjoint,
    /// Norm-adjoint pair with the edge rows of `P` adjusted so that `P` is exact for quadratics
    /// and `R` for constants.
    Preserving,
    /// Norm-adjoint pair with both operators exact for linears at the edges.
    #[default]
    Linear,
}

/// Odd fine rows next to an edge that the adjusted variants modify, and the coarse columns they may use.
const EDGE_ROWS: [usize; 4] = [1, 3, 5, 7];
const EDGE_COLS: usize = 6;

/// Edge block of `P` closest (Frobenius) to the one-sided stencils subject to
/// `P` reproducing degree `≤ p` and `½W_c⁻¹PᵀW_f` reproducing degree `≤ q` on coarse rows 1..=4.
fn edge_block(p_deg: u32, q_deg: u32) -> Result<Vec<[f64; EDGE_COLS]>> {
    let nc = 20;
    let nf = 2 * nc - 1;
    let axis = |n| Axis::<f64>::new(n, false);
    let (ac, af) = (axis(nc)?, axis(nf)?);
    let p0 = |f: usize, c: usize| -> f64 {
        let i = f / 2;
        if f % 2 == 0 {
            return if c == i { 1.0 } else { 0.0 };
        }
        let (start, st) = if i == 0 { (0, [5.0, 15.0, -5.0, 1.0]) } else { (i - 1, [-1.0, 9.0, 9.0, -1.0]) };
        if c >= start && c < start + 4 {
            st[c - start] / 16.0
        } else {
            0.0
        }
    };
    let unknowns: Vec<(usize, usize)> = EDGE_ROWS.iter().flat_map(|&f| (0..EDGE_COLS).map(move |c| (f, c))).collect();
    let (xf, xc) = (|f: usize| f as f64, |c: usize| 2.0 * c as f64);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for &f in &EDGE_ROWS {
        for k in 0..=p_deg as i32 {
            rows.push(unknowns.iter().map(|&(g, c)| if g == f { xc(c).powi(k) } else { 0.0 }).collect());
            rhs.push(xf(f).powi(k));
        }
    }
    for c in 1..=4 {
        for k in 0..=q_deg as i32 {
            let mut row = vec![0.0; unknowns.len()];
            let mut b = xc(c).powi(k);
            for f in 0..nf {
                let coef = 0.5 * af.weight(f) / ac.weight(c) * xf(f).powi(k);
                match unknowns.iter().position(|&u| u == (f, c)) {
                    Some(u) => row[u] += coef,
                    None => b -= coef * p0(f, c),
                }
            }
            rows.push(row);
            rhs.push(b);
        }
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), unknowns.len(), |i, j| rows[i][j]);
    let x0 = nalgebra::DVector::from_iterator(unknowns.len(), unknowns.iter().map(|&(f, c)| p0(f, c)));
    let b = nalgebra::DVector::from_vec(rhs);
    let pinv = a.clone().pseudo_inverse(1e-12).map_err(|e| Error::Contract(e.to_string()))?;
    let x = &x0 + pinv * (&b - &a * &x0);
    if (&a * &x - &b).amax() > 1e-10 {
        return Err(Error::Contract(format!("edge interpolation constraints (degrees {p_deg}, {q_deg}) are inconsistent")));
    }
    Ok(EDGE_ROWS
        .iter()
        .enumerate()
        .map(|(r, _)| std::array::from_fn(|c| x[r * EDGE_COLS + c]))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Coarse,
    Fine,
}

type Row<T> = Vec<(usize, T)>;

/// One-dimensional 1:2 interpolation and its restriction.
#[derive(Clone, Debug)]
pub struct Transfer1D<T> {
    pub nc: usize,
    pub nf: usize,
    pub periodic: bool,
    /// Fine rows of P.
    p: Vec<Row<T>>,
    /// Coarse rows of R.
    r: Vec<Row<T>>,
    pub wc: Vec<T>,
    pub wf: Vec<T>,
}

impl<T: Real> Transfer1D<T> {
    pub fn new(nc: usize, nf: usize, periodic: bool, edge: EdgeRestriction) -> Result<Self> {
        let want = if periodic { 2 * nc } else { 2 * nc - 1 };
        if nc < crate::sbp1d::MIN_POINTS {
            return Err(Error::Config(format!("coarse face size {nc} is below {}", crate::sbp1d::MIN_POINTS)));
        }
        if nf != want {
            return Err(Error::Config(format!(
                "fine face size {nf} is not the 1:2 refinement of coarse size {nc} (expected {want})"
            )));
        }
        let q = |n: i32| T::lit(n as f64 / 16.0);
        let mut p: Vec<Row<T>> = Vec::with_capacity(nf);
        for f in 0..nf {
            let i = f / 2;
            if f % 2 == 0 {
                p.push(vec![(i, T::one())]);
            } else if periodic {
                let w = |o: isize| (i as isize + o).rem_euclid(nc as isize) as usize;
                p.push(vec![(w(-1), q(-1)), (w(0), q(9)), (w(1), q(9)), (w(2), q(-1))]);
            } else if i == 0 {
                p.push(vec![(0, q(5)), (1, q(15)), (2, q(-5)), (3, q(1))]);
            } else if i == nc - 2 {
                p.push(vec![(nc - 4, q(1)), (nc - 3, q(-5)), (nc - 2, q(15)), (nc - 1, q(5))]);
            } else {
                p.push(vec![(i - 1, q(-1)), (i, q(9)), (i + 1, q(9)), (i + 2, q(-1))]);
            }
        }
        let degrees = match edge {
            EdgeRestriction::Preserving => Some((2, 0)),
            EdgeRestriction::Linear => Some((1, 1)),
            _ => None,
        };
        if let (Some((pd, qd)), false) = (degrees, periodic) {
            if nc < 10 {
                return Err(Error::Config(format!("{edge:?} edge transfer needs at least 10 coarse points per face direction, got {nc}")));
            }
            let block = edge_block(pd, qd)?;
            for (r, &f) in EDGE_ROWS.iter().enumerate() {
                let row: Row<T> = (0..EDGE_COLS).map(|c| (c, T::lit(block[r][c]))).filter(|e| e.1 != T::zero()).collect();
                p[nf - 1 - f] = row.iter().rev().map(|&(c, w)| (nc - 1 - c, w)).collect();
                p[f] = row;
            }
        }
        let (wc, wf): (Vec<T>, Vec<T>) = if periodic || edge == EdgeRestriction::Transpose {
            (vec![T::one(); nc], vec![T::one(); nf])
        } else {
            let (a, b) = (Axis::<T>::new(nc, false)?, Axis::<T>::new(nf, false)?);
            ((0..nc).map(|i| a.weight(i)).collect(), (0..nf).map(|i| b.weight(i)).collect())
        };
        let half = T::lit(0.5);
        let mut r: Vec<Row<T>> = vec![Vec::new(); nc];
        for (f, row) in p.iter().enumerate() {
            for &(c, w) in row {
                r[c].push((f, half * w * wf[f] / wc[c]));
            }
        }
        for row in &mut r {
            row.sort_by_key(|e| e.0);
        }
        Ok(Transfer1D { nc, nf, periodic, p, r, wc, wf })
    }

    pub fn p_row(&self, f: usize) -> &[(usize, T)] {
        &self.p[f]
    }

    pub fn r_row(&self, c: usize) -> &[(usize, T)] {
        &self.r[c]
    }

    pub fn p_entry(&self, f: usize, c: usize) -> T {
        self.p[f].iter().find(|e| e.0 == c).map_or(T::zero(), |e| e.1)
    }

    pub fn r_entry(&self, c: usize, f: usize) -> T {
        self.r[c].iter().find(|e| e.0 == f).map_or(T::zero(), |e| e.1)
    }
}

fn apply_rows<T: Real>(rows: &[Row<T>], along_i: bool, src: &[T], n_src: (usize, usize), n_dst: (usize, usize)) -> Vec<T> {
    let mut out = vec![T::zero(); 3 * n_dst.0 * n_dst.1];
    for j in 0..n_dst.1 {
        for i in 0..n_dst.0 {
            let o = 3 * (j * n_dst.0 + i);
            let row = if along_i { &rows[i] } else { &rows[j] };
            for &(s, w) in row {
                let si = if along_i { 3 * (j * n_src.0 + s) } else { 3 * (s * n_src.0 + i) };
                for p in 0..3 {
                    out[o + p] += w * src[si + p];
                }
            }
        }
    }
    out
}

/// Tensor-product face interpolation `P` and restriction `R`.
#[derive(Clone, Debug)]
pub struct Transfer<T> {
    pub x: Transfer1D<T>,
    pub y: Transfer1D<T>,
}

impl<T: Real> Transfer<T> {
    pub fn new(coarse: (usize, usize), fine: (usize, usize), periodic: bool, edge: EdgeRestriction) -> Result<Self> {
        Ok(Transfer {
            x: Transfer1D::new(coarse.0, fine.0, periodic, edge)?,
            y: Transfer1D::new(coarse.1, fine.1, periodic, edge)?,
        })
    }

    pub fn coarse_dims(&self) -> (usize, usize) {
        (self.x.nc, self.y.nc)
    }

    pub fn fine_dims(&self) -> (usize, usize) {
        (self.x.nf, self.y.nf)
    }

    fn check(&self, f: &FaceField<T>, dims: (usize, usize)) -> Result<()> {
        if (f.n1, f.n2) != dims {
            return Err(Error::Shape(format!("face field is {}x{}, expected {}x{}", f.n1, f.n2, dims.0, dims.1)));
        }
        Ok(())
    }

    pub fn interpolate(&self, c: &FaceField<T>) -> Result<FaceField<T>> {
        let (cd, fd) = (self.coarse_dims(), self.fine_dims());
        self.check(c, cd)?;
        let tmp = apply_rows(&self.x.p, true, &c.data, cd, (fd.0, cd.1));
        let data = apply_rows(&self.y.p, false, &tmp, (fd.0, cd.1), fd);
        Ok(FaceField { n1: fd.0, n2: fd.1, data })
    }

    pub fn restrict(&self, f: &FaceField<T>) -> Result<FaceField<T>> {
        let (cd, fd) = (self.coarse_dims(), self.fine_dims());
        self.check(f, fd)?;
        let tmp = apply_rows(&self.x.r, true, &f.data, fd, (cd.0, fd.1));
        let data = apply_rows(&self.y.r, false, &tmp, (cd.0, fd.1), cd);
        Ok(FaceField { n1: cd.0, n2: cd.1, data })
    }

    /// Scalar entry of `P` between fine node `(fi, fj)` and coarse node `(ci, cj)`.
    pub fn p_entry(&self, fine: (usize, usize), coarse: (usize, usize)) -> T {
        self.x.p_entry(fine.0, coarse.0) * self.y.p_entry(fine.1, coarse.1)
    }

    pub fn r_entry(&self, coarse: (usize, usize), fine: (usize, usize)) -> T {
        self.x.r_entry(coarse.0, fine.0) * self.y.r_entry(coarse.1, fine.1)
    }

    /// Scalar P as a dense row-major matrix (fine nodes × coarse nodes).
    pub fn dense_p(&self) -> nalgebra::DMatrix<f64> {
        let (cd, fd) = (self.coarse_dims(), self.fine_dims());
        nalgebra::DMatrix::from_fn(fd.0 * fd.1, cd.0 * cd.1, |a, b| {
            self.p_entry((a % fd.0, a / fd.0), (b % cd.0, b / cd.0)).as_f64()
        })
    }

    pub fn dense_r(&self) -> nalgebra::DMatrix<f64> {
        let (cd, fd) = (self.coarse_dims(), self.fine_dims());
        nalgebra::DMatrix::from_fn(cd.0 * cd.1, fd.0 * fd.1, |a, b| {
            self.r_entry((a % cd.0, a / cd.0), (b % fd.0, b / fd.0)).as_f64()
        })
    }
}

/// Interface data of a coarse (below) and fine (above) block pair.
#[derive(Clone, Debug)]
pub struct Interface<T> {
    pub transfer: Transfer<T>,
    pub edge: EdgeRestriction,
    /// `√(JΛ)` on the coarse and fine interface faces.
    sc: Vec<T>,
    sf: Vec<T>,
    jl_c: Vec<T>,
    jl_f: Vec<T>,
    rho_j_f: Vec<T>,
    hc: [T; 2],
    hf: [T; 2],
    /// `(ΛJ)⁻¹ N₃₃ / (4h₃)`: ghost dependence of the coarse traction.
    ka: Vec<[[T; 3]; 3]>,
    /// `(ρJ)⁻¹ (12/17) N₃₃ / h₃²`: ghost dependence of `L̃/(ρJ)` on the top plane.
    kb: Vec<[[T; 3]; 3]>,
    /// `(ΛJ)⁻¹ h₃ ω₁ ρJ` on the fine face.
    kd: Vec<T>,
    /// `h₃ ω₁` of the fine block.
    h3w: T,
    /// Coarse face nodes held by Dirichlet data.
    pinned: Vec<bool>,
}

impl<T: Real> Interface<T> {
    pub fn new(coarse: &Block<T>, fine: &Block<T>, edge: EdgeRestriction) -> Result<Self> {
        if coarse.tag != BlockTag::Coarse || fine.tag != BlockTag::Fine {
            return Err(Error::Config("interface needs a coarse block below a fine block".into()));
        }
        if coarse.bcs.top != FaceBc::Interface || fine.bcs.bottom != FaceBc::Interface {
            return Err(Error::Config("interface faces are not flagged as such".into()));
        }
        let (cm, fm) = (&coarse.mapping, &fine.mapping);
        if cm.top != fm.bottom || cm.lx != fm.lx || cm.ly != fm.ly {
            return Err(Error::Config("coarse top and fine bottom surfaces differ".into()));
        }
        let (cl, fl) = (coarse.lattice, fine.lattice);
        if cl.periodic != fl.periodic {
            return Err(Error::Config("blocks disagree on lateral periodicity".into()));
        }
        let transfer = Transfer::new((cl.n1, cl.n2), (fl.n1, fl.n2), cl.periodic, edge)
            .map_err(|e| Error::Config(format!("interface between coarse lattice {}x{} and fine lattice {}x{}: {e}", cl.n1, cl.n2, fl.n1, fl.n2)))?;
        let kc = cl.n3 - 1;
        let jl_c = coarse.face_lambda_j(kc);
        let jl_f = fine.face_lambda_j(0);
        let sc = jl_c.iter().map(|v| v.sqrt()).collect();
        let sf = jl_f.iter().map(|v| v.sqrt()).collect();
        let wt = coarse.traction_ghost_weight(End::High);
        let wl = coarse.l_ghost_weight();
        // Transpose keeps the unmodified scheme, with L̃c on every node.
        let pinned: Vec<bool> =
            (0..cl.face_nodes()).map(|f| edge != EdgeRestriction::Transpose && coarse.is_dirichlet(f % cl.n1, f / cl.n1, kc)).collect();
        let mut ka = Vec::with_capacity(cl.face_nodes());
        let mut kb = Vec::with_capacity(cl.face_nodes());
        for f in 0..cl.face_nodes() {
            let node = kc * cl.face_nodes() + f;
            let n33 = coarse.coeff.matrix(2, 2, node);
            let rj = coarse.coeff.rho[node] * coarse.metric.jac[node];
            ka.push(n33.map(|r| r.map(|v| wt * v / jl_c[f])));
            let w = if pinned[f] { T::zero() } else { wl };
            kb.push(n33.map(|r| r.map(|v| w * v / rj)));
        }
        let h3w = fine.h[2] * fine.ax3.weight(0);
        let rho_j_f: Vec<T> = (0..fl.face_nodes()).map(|f| fine.coeff.rho[f] * fine.metric.jac[f]).collect();
        let kd = (0..fl.face_nodes()).map(|f| h3w * rho_j_f[f] / jl_f[f]).collect();
        Ok(Interface {
            transfer,
            edge,
            sc,
            sf,
            jl_c,
            jl_f,
            rho_j_f,
            hc: [coarse.h[0], coarse.h[1]],
            hf: [fine.h[0], fine.h[1]],
            ka,
            kb,
            kd,
            h3w,
            pinned,
        })
    }

    pub fn unknowns(&self) -> usize {
        let (a, b) = self.transfer.coarse_dims();
        3 * a * b
    }

    /// `𝒫 = (JΛ)_h^{-1/2} P (JΛ)_{2h}^{1/2}`.
    pub fn interpolate_scaled(&self, c: &FaceField<T>) -> Result<FaceField<T>> {
        let mut s = c.clone();
        scale_nodes(&mut s, &self.sc, false);
        let mut out = self.transfer.interpolate(&s)?;
        scale_nodes(&mut out, &self.sf, true);
        Ok(out)
    }

    /// `ℛ = (JΛ)_{2h}^{-1/2} R (JΛ)_h^{1/2}`.
    pub fn restrict_scaled(&self, f: &FaceField<T>) -> Result<FaceField<T>> {
        let mut s = f.clone();
        scale_nodes(&mut s, &self.sf, false);
        let mut out = self.transfer.restrict(&s)?;
        scale_nodes(&mut out, &self.sc, true);
        Ok(out)
    }

    /// Face inner product `h₁h₂ Σ JΛ u·v`; with `weighted`, the lateral SBP norm weights are included.
    pub fn face_inner(&self, side: Side, u: &FaceField<T>, v: &FaceField<T>, weighted: bool) -> Result<T> {
        let (dims, jl, h, t) = match side {
            Side::Coarse => (self.transfer.coarse_dims(), &self.jl_c, self.hc, (&self.transfer.x.wc, &self.transfer.y.wc)),
            Side::Fine => (self.transfer.fine_dims(), &self.jl_f, self.hf, (&self.transfer.x.wf, &self.transfer.y.wf)),
        };
        for w in [u, v] {
            if (w.n1, w.n2) != dims {
                return Err(Error::Shape(format!("face field is {}x{}, expected {}x{}", w.n1, w.n2, dims.0, dims.1)));
            }
        }
        let mut s = T::zero();
        for j in 0..dims.1 {
            for i in 0..dims.0 {
                let n = j * dims.0 + i;
                let w = if weighted { t.0[i] * t.1[j] } else { T::one() };
                let (a, b) = (u.at(i, j), v.at(i, j));
                s += w * jl[n] * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
            }
        }
        Ok(h[0] * h[1] * s)
    }

    /// Sets the fine interface plane to `𝒫` of the coarse one.
    pub fn inject(&self, coarse: &Block<T>, c: &StateField<T>, f: &mut StateField<T>) -> Result<()> {
        let face = c.face(coarse.lattice.n3 as isize - 1);
        f.set_face(0, &self.interpolate_scaled(&face)?);
        Ok(())
    }

    /// Whether coarse face node `n` is held by Dirichlet data (never with `Transpose`).
    pub fn is_pinned(&self, n: usize) -> bool {
        self.pinned[n]
    }

    /// `η = ρJ 𝒫((ρJ)⁻¹ L̃c) − L f` on the fine interface face. On Dirichlet nodes of the coarse
    /// face `(ρJ)⁻¹ L̃c` is replaced by `pinned` (the data's `u_tt − F/ρ`), zero if absent.
    pub fn eta(&self, coarse: &Block<T>, fine: &Block<T>, c: &StateField<T>, f: &StateField<T>, pinned: Option<&FaceField<T>>) -> Result<FaceField<T>> {
        let kc = coarse.lattice.n3 - 1;
        let mut lc = coarse.apply_l_plane(c, kc)?;
        let nf = coarse.lattice.face_nodes();
        for n in 0..nf {
            let s = coarse.coeff.rho[kc * nf + n] * coarse.metric.jac[kc * nf + n];
            for p in 0..3 {
                let v = &mut lc.data[3 * n + p];
                *v = if !self.pinned[n] {
                    *v / s
                } else {
                    pinned.map_or(T::zero(), |a| a.data[3 * n + p])
                };
            }
        }
        let mut out = self.interpolate_scaled(&lc)?;
        let lf = fine.apply_l_plane(f, 0)?;
        for n in 0..out.nodes() {
            for p in 0..3 {
                out.data[3 * n + p] = self.rho_j_f[n] * out.data[3 * n + p] - lf.data[3 * n + p];
            }
        }
        Ok(out)
    }

    /// Traction mismatch `(ΛJ)⁻¹Ã₃c − ℛ[(ΛJ)⁻¹(A₃f − h₃ω₁η)]` at the current coarse ghosts.
    pub fn residual(&self, coarse: &Block<T>, fine: &Block<T>, c: &StateField<T>, f: &StateField<T>, pinned: Option<&FaceField<T>>) -> Result<Vec<T>> {
        let mut tc = coarse.traction(c, End::High)?;
        let mut tf = fine.traction(f, End::Low)?;
        let eta = self.eta(coarse, fine, c, f, pinned)?;
        for n in 0..tf.nodes() {
            for p in 0..3 {
                let v = &mut tf.data[3 * n + p];
                *v = (*v - self.h3w * eta.data[3 * n + p]) / self.jl_f[n];
            }
        }
        for n in 0..tc.nodes() {
            for p in 0..3 {
                tc.data[3 * n + p] /= self.jl_c[n];
            }
        }
        let rf = self.restrict_scaled(&tf)?;
        Ok(tc.data.iter().zip(&rf.data).map(|(a, b)| *a - *b).collect())
    }

    /// Right-hand side `r` of `K g = r`; leaves the coarse ghost plane zeroed.
    pub fn rhs(&self, coarse: &Block<T>, fine: &Block<T>, c: &mut StateField<T>, f: &StateField<T>, pinned: Option<&FaceField<T>>) -> Result<Vec<T>> {
        let top = coarse.lattice.n3 as isize;
        let (n1, n2) = (coarse.lattice.n1, coarse.lattice.n2);
        c.set_face(top, &FaceField::zeros(n1, n2));
        Ok(self.residual(coarse, fine, c, f, pinned)?.into_iter().map(|v| -v).collect())
    }

    pub fn set_ghosts(&self, coarse: &Block<T>, c: &mut StateField<T>, g: &[T]) {
        let (n1, n2) = (coarse.lattice.n1, coarse.lattice.n2);
        c.set_face(coarse.lattice.n3 as isize, &FaceField { n1, n2, data: g.to_vec() });
    }

    /// `K g`, the linear part of the residual in the coarse ghost values.
    pub fn apply_k(&self, g: &[T], out: &mut [T]) {
        let (n1, n2) = self.transfer.coarse_dims();
        let mut bg = FaceField::zeros(n1, n2);
        for n in 0..n1 * n2 {
            let v = [g[3 * n], g[3 * n + 1], g[3 * n + 2]];
            let a = mat_vec(&self.ka[n], &v);
            out[3 * n..3 * n + 3].copy_from_slice(&a);
            let b = mat_vec(&self.kb[n], &v);
            bg.data[3 * n..3 * n + 3].copy_from_slice(&b);
        }
        let mut pf = self.interpolate_scaled(&bg).expect("face sizes fixed at construction");
        for (n, d) in self.kd.iter().enumerate() {
            for p in 0..3 {
                pf.data[3 * n + p] *= *d;
            }
        }
        let r = self.restrict_scaled(&pf).expect("face sizes fixed at construction");
        for (o, v) in out.iter_mut().zip(&r.data) {
            *o += *v;
        }
    }

    /// Scalar coupling `Σ_f ℛ_if d_f 𝒫_fj` between coarse face nodes `i` and `j`.
    pub fn coupling(&self, i: (usize, usize), j: (usize, usize)) -> T {
        let (tx, ty) = (&self.transfer.x, &self.transfer.y);
        let nfx = tx.nf;
        let mut s = T::zero();
        for &(f2, ry) in ty.r_row(i.1) {
            let py = ty.p_entry(f2, j.1);
            if py == T::zero() {
                continue;
            }
            for &(f1, rx) in tx.r_row(i.0) {
                let px = tx.p_entry(f1, j.0);
                if px == T::zero() {
                    continue;
                }
                s += rx * ry * px * py * self.kd[f2 * nfx + f1];
            }
        }
        let nc = tx.nc;
        s * self.sc[j.1 * nc + j.0] / self.sc[i.1 * nc + i.0]
    }

    /// Exact 3x3 diagonal block of `K` at coarse face node `n`.
    pub fn diagonal_block(&self, n: usize) -> [[T; 3]; 3] {
        let nc = self.transfer.x.nc;
        let ij = (n % nc, n / nc);
        let c = self.coupling(ij, ij);
        std::array::from_fn(|p| std::array::from_fn(|q| self.ka[n][p][q] + c * self.kb[n][p][q]))
    }

    /// Coarse face nodes whose diagonal blocks can be probed simultaneously, for blocks of `k` nodes along r¹.
    pub fn probe_colors(&self, k: usize) -> Vec<Vec<usize>> {
        let (n1, n2) = self.transfer.coarse_dims();
        let periodic = self.transfer.x.periodic;
        let nb = n1.div_ceil(k);
        // Couplings reach at most five coarse nodes in each direction.
        let reach = 6usize;
        let color_mod = |count: usize, m: usize| if periodic && count % m != 0 { count } else { m.min(count) };
        let mi = color_mod(nb, reach.div_ceil(k) + 1);
        let mj = color_mod(n2, reach);
        let mut groups = vec![Vec::new(); mi * mj];
        for j in 0..n2 {
            for b in 0..nb {
                groups[(j % mj) * mi + b % mi].push(j * nb + b);
            }
        }
        groups.retain(|g| !g.is_empty());
        groups
    }

    /// Node range of block `b` for blocks of `k` nodes along r¹.
    pub fn block_nodes(&self, k: usize, b: usize) -> std::ops::Range<usize> {
        let n1 = self.transfer.x.nc;
        let nb = n1.div_ceil(k);
        let (row, bi) = (b / nb, b % nb);
        let start = row * n1 + bi * k;
        start..(row * n1 + ((bi + 1) * k).min(n1))
    }

    pub fn block_count(&self, k: usize) -> usize {
        let (n1, n2) = self.transfer.coarse_dims();
        n1.div_ceil(k) * n2
    }
}

fn scale_nodes<T: Real>(f: &mut FaceField<T>, s: &[T], divide: bool) {
    for (n, sv) in s.iter().enumerate() {
        for p in 0..3 {
            let v = &mut f.data[3 * n + p];
            *v = if divide { *v / *sv } else { *v * *sv };
        }
    }
}

#[inline]
fn mat_vec<T: Real>(a: &[[T; 3]; 3], v: &[T; 3]) -> [T; 3] {
    std::array::from_fn(|p| a[p][0] * v[0] + a[p][1] * v[1] + a[p][2] * v[2])
}
