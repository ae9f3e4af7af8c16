//! Discrete inner products, the energy forms and error norms.
//!
//! All reductions sum plane by plane in a fixed order, so results do not
//! depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elastic3d::{Block, FaceBc, FaceField, StateField};
use crate::sbp1d::End;
use crate::timestepper::Model;
use crate::{Error, Real, Result};

fn check<T: Real>(block: &Block<T>, u: &StateField<T>) -> Result<()> {
    if u.lattice != block.lattice {
        return Err(Error::Shape(format!("state lattice {:?} does not match block lattice {:?}", u.lattice, block.lattice)));
    }
    Ok(())
}

/// Quadrature weight `h₁h₂h₃ ω₁ω₂ω₃` of a node.
fn cell<T: Real>(block: &Block<T>, i: usize, j: usize, k: usize) -> T {
    let [h1, h2, h3] = block.h;
    h1 * h2 * h3 * block.ax1.weight(i) * block.ax2.weight(j) * block.ax3.weight(k)
}

/// `Σ_k f(k)` evaluated in parallel, summed in plane order.
fn plane_sum<T: Real>(n3: usize, f: impl Fn(usize) -> T + Sync + Send) -> T {
    let parts: Vec<T> = (0..n3).into_par_iter().map(f).collect();
    parts.into_iter().fold(T::zero(), |a, b| a + b)
}

/// `h₁h₂h₃ Σ ω J u·v` over the nodes of one block.
pub fn volume_inner<T: Real>(block: &Block<T>, u: &StateField<T>, v: &StateField<T>) -> Result<T> {
    check(block, u)?;
    check(block, v)?;
    Ok(weighted_sum(block, |n| {
        let (a, b) = (u.at_node(n), v.at_node(n));
        block.metric.jac[n] * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
    }))
}

/// `h₁h₂h₃ Σ ω f(node)`.
pub fn weighted_sum<T: Real>(block: &Block<T>, f: impl Fn(usize) -> T + Sync + Send) -> T {
    let lat = block.lattice;
    plane_sum(lat.n3, |k| {
        let mut s = T::zero();
        for j in 0..lat.n2 {
            for i in 0..lat.n1 {
                s += cell(block, i, j, k) * f(lat.node(i, j, k));
            }
        }
        s
    })
}

/// `A_l v = Σ_m N_lm D_m v` on a lateral face (`axis` 0 or 1), ghost-free closure.
fn lateral_traction<T: Real>(block: &Block<T>, v: &StateField<T>, axis: usize, end: End) -> Vec<(usize, [T; 3])> {
    let lat = block.lattice;
    let [h1, h2, h3] = block.h;
    let fixed = match (axis, end) {
        (0, End::Low) | (1, End::Low) => 0,
        (0, End::High) => lat.n1 - 1,
        _ => lat.n2 - 1,
    };
    let (na, nb) = if axis == 0 { (lat.n2, lat.n3) } else { (lat.n1, lat.n3) };
    let mut out = Vec::with_capacity(na * nb);
    for k in 0..nb {
        for a in 0..na {
            let (i, j) = if axis == 0 { (fixed, a) } else { (a, fixed) };
            let ks = k as isize;
            let node = lat.node(i, j, k);
            let mut d = [[T::zero(); 3]; 3];
            for q in 0..3 {
                d[0][q] = if axis == 0 {
                    block.ax1.bd_row(end, |ii| v.get(q, ii, j, ks)) / h1
                } else {
                    block.ax1.d_row(i, |ii| v.get(q, ii, j, ks)) / h1
                };
                d[1][q] = if axis == 1 {
                    block.ax2.bd_row(end, |jj| v.get(q, i, jj, ks)) / h2
                } else {
                    block.ax2.d_row(j, |jj| v.get(q, i, jj, ks)) / h2
                };
                d[2][q] = block.ax3.d_row(k, |kk| v.get(q, i, j, kk as isize)) / h3;
            }
            let t = std::array::from_fn(|p| {
                let mut s = T::zero();
                for m in 0..3 {
                    for q in 0..3 {
                        s += block.coeff.get(axis, m, p, q, node) * d[m][q];
                    }
                }
                s
            });
            out.push((node, t));
        }
    }
    out
}

/// Boundary form `B(u, v)` summed over all non-periodic faces.
pub fn boundary_form<T: Real>(block: &Block<T>, u: &StateField<T>, v: &StateField<T>) -> Result<T> {
    check(block, u)?;
    check(block, v)?;
    let lat = block.lattice;
    let [h1, h2, h3] = block.h;
    let dot = |a: [T; 3], b: [T; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut total = T::zero();
    for (end, sign, k) in [(End::Low, -T::one(), 0), (End::High, T::one(), lat.n3 - 1)] {
        let a3 = block.traction(v, end)?;
        let mut s = T::zero();
        for j in 0..lat.n2 {
            for i in 0..lat.n1 {
                s += h1 * h2 * block.ax1.weight(i) * block.ax2.weight(j) * dot(u.at(i, j, k as isize), a3.at(i, j));
            }
        }
        total += sign * s;
    }
    if block.bcs.lateral != FaceBc::Periodic {
        for axis in 0..2 {
            for (end, sign) in [(End::Low, -T::one()), (End::High, T::one())] {
                let mut s = T::zero();
                for (node, t) in lateral_traction(block, v, axis, end) {
                    let (i, j, k) = (node % lat.n1, (node / lat.n1) % lat.n2, node / lat.face_nodes());
                    let w = if axis == 0 { h2 * block.ax2.weight(j) } else { h1 * block.ax1.weight(i) };
                    s += w * h3 * block.ax3.weight(k) * dot(u.at_node(node), t);
                }
                total += sign * s;
            }
        }
    }
    Ok(total)
}

/// `S(u, v) = −(u, J⁻¹L v) + B(u, v)`, using the block's own closures.
pub fn strain_form<T: Real>(block: &Block<T>, u: &StateField<T>, v: &StateField<T>) -> Result<T> {
    let lv = block.apply_l(v)?;
    let uv = weighted_sum(block, |n| {
        let (a, b) = (u.at_node(n), lv.at_node(n));
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    });
    Ok(boundary_form(block, u, v)? - uv)
}

/// `L u` per block with the fine interface row replaced by `L u + η`.
pub fn l_hat<T: Real>(model: &Model<T>, u: &[StateField<T>]) -> Result<Vec<StateField<T>>> {
    let mut out: Vec<StateField<T>> = model.blocks.iter().zip(u).map(|(b, s)| b.apply_l(s)).collect::<Result<_>>()?;
    if let (Some(iface), Some(fine)) = (&model.interface, model.fine()) {
        let eta = iface.eta(model.coarse(), fine, &u[0], &u[1], None)?;
        let lf = out[1].face(0);
        let sum = FaceField::from_fn(lf.n1, lf.n2, |i, j| {
            let (a, b) = (lf.at(i, j), eta.at(i, j));
            [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
        });
        out[1].set_face(0, &sum);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub strain: f64,
    pub correction: f64,
    pub total: f64,
}

/// Fully discrete energy `E^{n+1/2}` of two consecutive levels.
pub fn discrete_energy<T: Real>(model: &Model<T>, new: &[StateField<T>], old: &[StateField<T>], dt: T) -> Result<EnergyParts> {
    let mut kinetic = T::zero();
    let mut strain = T::zero();
    for (b, block) in model.blocks.iter().enumerate() {
        let (un, uo) = (&new[b], &old[b]);
        kinetic += weighted_sum(block, |n| {
            let (a, c) = (un.at_node(n), uo.at_node(n));
            let w = block.coeff.rho[n] * block.metric.jac[n];
            (0..3).fold(T::zero(), |s, p| s + w * (a[p] - c[p]) * (a[p] - c[p]))
        }) / (dt * dt);
        strain += strain_form(block, un, uo)?;
    }
    let (ln, lo) = (l_hat(model, new)?, l_hat(model, old)?);
    let mut corr = T::zero();
    for (b, block) in model.blocks.iter().enumerate() {
        let lat = block.lattice;
        let (a, c) = (&ln[b], &lo[b]);
        corr += weighted_sum(block, |n| {
            let (i, j, k) = (n % lat.n1, (n / lat.n1) % lat.n2, n / lat.face_nodes());
            if block.is_dirichlet(i, j, k) {
                return T::zero();
            }
            let (x, y) = (a.at_node(n), c.at_node(n));
            (x[0] * y[0] + x[1] * y[1] + x[2] * y[2]) / (block.coeff.rho[n] * block.metric.jac[n])
        });
    }
    let correction = -dt * dt / T::lit(12.0) * corr;
    let total = kinetic + strain + correction;
    Ok(EnergyParts { kinetic: kinetic.as_f64(), strain: strain.as_f64(), correction: correction.as_f64(), total: total.as_f64() })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    /// Same quadrature without the Jacobian (reference-cube norm).
    pub l2_grid: f64,
    pub max: f64,
}

/// `L²` (volume inner product) and max-norm errors of one block against `exact(node)`.
pub fn block_error<T: Real>(block: &Block<T>, u: &StateField<T>, exact: impl Fn(usize) -> [T; 3] + Sync + Send) -> Result<ErrorNorms> {
    check(block, u)?;
    let sq_at = |n: usize| {
        let (a, e) = (u.at_node(n), exact(n));
        (0..3).fold(T::zero(), |s, p| s + (a[p] - e[p]) * (a[p] - e[p]))
    };
    let sq = weighted_sum(block, |n| block.metric.jac[n] * sq_at(n));
    let sq_grid = weighted_sum(block, sq_at);
    let max = (0..block.lattice.nodes())
        .into_par_iter()
        .map(|n| {
            let (a, e) = (u.at_node(n), exact(n));
            (0..3).fold(0.0f64, |m, p| m.max((a[p] - e[p]).abs().as_f64()))
        })
        .reduce(|| 0.0, f64::max);
    Ok(ErrorNorms { l2: sq.sqrt().as_f64(), l2_grid: sq_grid.sqrt().as_f64(), max })
}

/// Global `L²` error from per-block errors.
pub fn combine_l2(parts: &[ErrorNorms]) -> ErrorNorms {
    ErrorNorms {
        l2: parts.iter().map(|e| e.l2 * e.l2).sum::<f64>().sqrt(),
        l2_grid: parts.iter().map(|e| e.l2_grid * e.l2_grid).sum::<f64>().sqrt(),
        max: parts.iter().map(|e| e.max).fold(0.0, f64::max),
    }
}

/// `log₂(e_coarse / e_fine)` for successive halvings of the grid spacing.
pub fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// A recording point: its block and cubic Lagrange weights in reference coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Receiver {
    pub x: [f64; 3],
    pub block: usize,
    pub stencil: [Vec<(usize, f64)>; 3],
}

/// Cubic Lagrange weights on lattice axis positions `s` (in node units); a node hit is exact.
fn axis_stencil(s: f64, n: usize, periodic: bool) -> Vec<(usize, f64)> {
    let near = s.round();
    if (s - near).abs() < 1e-9 {
        let i = near as isize;
        let i = if periodic { i.rem_euclid(n as isize) } else { i.clamp(0, n as isize - 1) };
        return vec![(i as usize, 1.0)];
    }
    let mut base = s.floor() as isize - 1;
    if !periodic {
        base = base.clamp(0, n as isize - 4);
    }
    (0..4)
        .map(|a| {
            let xa = (base + a) as f64;
            let w = (0..4).filter(|&b| b != a).fold(1.0, |w, b| {
                let xb = (base + b) as f64;
                w * (s - xb) / (xa - xb)
            });
            ((base + a).rem_euclid(n as isize) as usize, w)
        })
        .collect()
}

/// Locates `x` in the first block (fine before coarse) whose reference cube contains it.
pub fn locate<T: Real>(blocks: &[Block<T>], x: [f64; 3]) -> Result<Receiver> {
    let tol = 1e-9;
    for (b, block) in blocks.iter().enumerate().rev() {
        let r = block.mapping.reference(x);
        let lat = block.lattice;
        let inside = |v: f64| (-tol..=1.0 + tol).contains(&v);
        if !(inside(r[0]) && inside(r[1]) && inside(r[2])) {
            continue;
        }
        let h: [f64; 3] = lat.h();
        let n = [lat.n1, lat.n2, lat.n3];
        let per = [lat.periodic, lat.periodic, false];
        let stencil = std::array::from_fn(|a| axis_stencil(r[a].clamp(0.0, 1.0) / h[a], n[a], per[a]));
        return Ok(Receiver { x, block: b, stencil });
    }
    Err(Error::Config(format!("receiver at {x:?} lies outside every block")))
}

/// Displacement at a receiver.
pub fn sample<T: Real>(u: &[StateField<T>], rcv: &Receiver) -> [T; 3] {
    let f = &u[rcv.block];
    let mut out = [T::zero(); 3];
    for &(k, wk) in &rcv.stencil[2] {
        for &(j, wj) in &rcv.stencil[1] {
            for &(i, wi) in &rcv.stencil[0] {
                let w = T::lit(wi * wj * wk);
                let v = f.at(i, j, k as isize);
                for p in 0..3 {
                    out[p] += w * v[p];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elastic3d::{BlockBcs, BlockTag};
    use crate::geometry::{BlockMapping, Lattice, Material, SurfaceFn};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(periodic: bool) -> Block<f64> {
        let lat = Lattice::new(9, 10, 9, periodic);
        let mapping = BlockMapping { lx: 2.0, ly: 2.5, bottom: SurfaceFn::Constant { c: 0.0 }, top: SurfaceFn::mms_interface() };
        let lateral = if periodic { FaceBc::Periodic } else { FaceBc::Dirichlet };
        let bcs = BlockBcs { lateral, bottom: FaceBc::Dirichlet, top: FaceBc::Dirichlet };
        Block::new(BlockTag::Single, mapping, Material::Mms, lat, bcs).unwrap()
    }

    fn random(b: &Block<f64>, seed: u64) -> StateField<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = StateField::zeros(b.lattice);
        for v in u.raw_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        u
    }

    #[test]
    fn strain_form_is_symmetric_and_nonnegative() {
        for periodic in [true, false] {
            let b = block(periodic);
            for seed in 0..3 {
                let (u, v) = (random(&b, seed), random(&b, seed + 10));
                let (suv, svu) = (strain_form(&b, &u, &v).unwrap(), strain_form(&b, &v, &u).unwrap());
                let scale = strain_form(&b, &u, &u).unwrap().abs() + strain_form(&b, &v, &v).unwrap().abs();
                assert!((suv - svu).abs() < 1e-12 * scale, "periodic={periodic}: {suv} vs {svu}");
                let norm = volume_inner(&b, &u, &u).unwrap();
                assert!(strain_form(&b, &u, &u).unwrap() >= -1e-11 * norm);
            }
        }
    }

    #[test]
    fn constant_field_has_no_strain() {
        let b = block(false);
        let mut u = StateField::zeros(b.lattice);
        u.fill(|_| [0.3, -1.0, 2.0]);
        for k in [-1isize, b.lattice.n3 as isize] {
            for j in 0..b.lattice.n2 {
                for i in 0..b.lattice.n1 {
                    u.set(i, j, k, [0.3, -1.0, 2.0]);
                }
            }
        }
        let s = strain_form(&b, &u, &u).unwrap();
        assert!(s.abs() < 1e-9, "{s}");
    }

    #[test]
    fn inner_product_is_bilinear_and_symmetric() {
        let b = block(true);
        let (u, v, w) = (random(&b, 1), random(&b, 2), random(&b, 3));
        let mut uw = u.clone();
        for (a, c) in uw.raw_mut().iter_mut().zip(w.raw()) {
            *a = 2.0 * *a - 0.5 * c;
        }
        let lhs = volume_inner(&b, &uw, &v).unwrap();
        let rhs = 2.0 * volume_inner(&b, &u, &v).unwrap() - 0.5 * volume_inner(&b, &w, &v).unwrap();
        assert!((lhs - rhs).abs() < 1e-13 * lhs.abs().max(1.0));
        let d = volume_inner(&b, &u, &v).unwrap() - volume_inner(&b, &v, &u).unwrap();
        assert!(d.abs() < 1e-13);
        assert_eq!(volume_inner(&b, &StateField::zeros(b.lattice), &u).unwrap(), 0.0);
    }

    #[test]
    fn rates_match_table_pair() {
        let r = rates(&[2.2227e-3, 1.4142e-4]);
        assert!((r[0] - 3.97).abs() < 0.005, "{}", r[0]);
    }

    #[test]
    fn exact_state_has_zero_error() {
        let b = block(false);
        let mut u = StateField::zeros(b.lattice);
        u.fill(|n| b.metric.x[n]);
        let e = block_error(&b, &u, |n| b.metric.x[n]).unwrap();
        assert_eq!(e.l2, 0.0);
        assert_eq!(e.max, 0.0);
    }

    #[test]
    fn receivers_are_exact_at_nodes_and_on_cubics() {
        let b = block(false);
        let mut u = StateField::zeros(b.lattice);
        let cubic = |r: [f64; 3]| [r[0] * r[0] * r[0] - r[1] * r[2], r[1] * r[1] * r[2], 1.0 + r[2] * r[2] * r[2]];
        u.fill(|n| {
            let l = b.lattice;
            cubic(l.r(n % l.n1, (n / l.n1) % l.n2, (n / l.face_nodes()) as isize))
        });
        let node = b.lattice.face_nodes() * 3 + b.lattice.n1 * 4 + 2;
        let rcv = locate(std::slice::from_ref(&b), b.metric.x[node]).unwrap();
        assert!(rcv.stencil.iter().all(|s| s.len() == 1));
        assert_eq!(sample(std::slice::from_ref(&u), &rcv), u.at_node(node));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let r = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let rcv = locate(std::slice::from_ref(&b), b.mapping.position(r)).unwrap();
            let (got, want) = (sample(std::slice::from_ref(&u), &rcv), cubic(r));
            (0..3).for_each(|p| assert!((got[p] - want[p]).abs() < 1e-11, "{r:?}"));
        }
        assert!(locate(std::slice::from_ref(&b), [1.0, 1.0, -0.5]).is_err());
    }
}
