use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbp_elastic::elastic3d::{Block, FaceField, StateField};
use sbp_elastic::interface::{EdgeRestriction, Interface, Side, Transfer};
use sbp_elastic::krylov::{GhostOperator, GhostSolver, Method, SolverConfig};
use sbp_elastic::scenarios::{GridSize, Scenario};

const EDGES: [EdgeRestriction; 4] =
    [EdgeRestriction::Transpose, EdgeRestriction::NormAdjoint, EdgeRestriction::Preserving, EdgeRestriction::Linear];

fn mms_pair(n: usize) -> (Block<f64>, Block<f64>) {
    let grid = GridSize { n1: n, n2: n, n3_coarse: 8, n3_fine: 9 };
    Scenario::mms(24).blocks(Some(grid)).unwrap()
}

fn random_face(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> FaceField<f64> {
    FaceField { n1, n2, data: (0..3 * n1 * n2).map(|_| rng.gen_range(-1.0..1.0)).collect() }
}

fn norm(f: &FaceField<f64>) -> f64 {
    f.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn restriction_is_quarter_transpose_on_dense_assemblies() {
    for (nc, periodic) in [(8, true), (11, true), (16, true), (8, false), (9, false), (17, false)] {
        let nf = if periodic { 2 * nc } else { 2 * nc - 1 };
        let t = Transfer::<f64>::new((nc, nc), (nf, nf), periodic, EdgeRestriction::Transpose).unwrap();
        let (p, r) = (t.dense_p(), t.dense_r());
        assert_eq!(r, p.transpose() * 0.25, "nc {nc} periodic {periodic}");
    }
}

#[test]
fn unscaled_interpolation_is_exact_on_bicubics() {
    let nc = 13;
    let nf = 2 * nc - 1;
    let t = Transfer::<f64>::new((nc, nc), (nf, nf), false, EdgeRestriction::Transpose).unwrap();
    let poly = |x: f64, y: f64| [1.0 + x - 2.0 * y * y + x * x * x * y * y * y, x * y * x, 0.5 * y * y * y - x * y * y];
    let c = FaceField::from_fn(nc, nc, |i, j| poly(i as f64, j as f64));
    let f = t.interpolate(&c).unwrap();
    for j in 0..nf {
        for i in 0..nf {
            let want = poly(i as f64 / 2.0, j as f64 / 2.0);
            let got = f.at(i, j);
            for p in 0..3 {
                assert!((got[p] - want[p]).abs() < 1e-12 * want[p].abs().max(1.0), "({i},{j}) {got:?} {want:?}");
            }
        }
    }
}

#[test]
fn edge_variants_keep_their_polynomial_exactness() {
    let nc = 12;
    let nf = 2 * nc - 1;
    for (edge, p_deg, r_deg) in [(EdgeRestriction::Preserving, 2, 0), (EdgeRestriction::Linear, 1, 1)] {
        let t = Transfer::<f64>::new((nc, nc), (nf, nf), false, edge).unwrap();
        for d in 0..=p_deg {
            let c = FaceField::from_fn(nc, nc, |i, j| [(i as f64).powi(d), (j as f64).powi(d), 1.0]);
            let f = t.interpolate(&c).unwrap();
            for j in 0..nf {
                for i in 0..nf {
                    let want = [(i as f64 / 2.0).powi(d), (j as f64 / 2.0).powi(d), 1.0];
                    let got = f.at(i, j);
                    (0..3).for_each(|p| assert!((got[p] - want[p]).abs() < 1e-11, "{edge:?} P degree {d}"));
                }
            }
        }
        for d in 0..=r_deg {
            let f = FaceField::from_fn(nf, nf, |i, j| [(i as f64 / 2.0).powi(d), (j as f64 / 2.0).powi(d), 1.0]);
            let c = t.restrict(&f).unwrap();
            for j in 0..nc {
                for i in 0..nc {
                    let want = [(i as f64).powi(d), (j as f64).powi(d), 1.0];
                    let got = c.at(i, j);
                    (0..3).for_each(|p| assert!((got[p] - want[p]).abs() < 1e-11, "{edge:?} R degree {d}"));
                }
            }
        }
    }
}

#[test]
fn restriction_reproduces_constants_on_periodic_faces() {
    let t = Transfer::<f64>::new((8, 10), (16, 20), true, EdgeRestriction::Transpose).unwrap();
    let c = t.restrict(&FaceField::from_fn(16, 20, |_, _| [2.5, -1.0, 0.0])).unwrap();
    assert!(c.data.chunks(3).all(|v| (v[0] - 2.5).abs() < 1e-14 && (v[1] + 1.0).abs() < 1e-14 && v[2] == 0.0));
}

#[test]
fn scaled_transfers_are_adjoint() {
    let (c, f) = mms_pair(13);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for edge in EDGES {
        let iface = Interface::new(&c, &f, edge).unwrap();
        let weighted = edge != EdgeRestriction::Transpose;
        let ((c1, c2), (f1, f2)) = (iface.transfer.coarse_dims(), iface.transfer.fine_dims());
        let pairs = if edge == EdgeRestriction::Linear { 1000 } else { 50 };
        for _ in 0..pairs {
            let (cv, fv) = (random_face(&mut rng, c1, c2), random_face(&mut rng, f1, f2));
            let lhs = iface.face_inner(Side::Fine, &iface.interpolate_scaled(&cv).unwrap(), &fv, weighted).unwrap();
            let rhs = iface.face_inner(Side::Coarse, &cv, &iface.restrict_scaled(&fv).unwrap(), weighted).unwrap();
            let scale = iface.face_inner(Side::Coarse, &cv, &cv, weighted).unwrap().sqrt()
                * iface.face_inner(Side::Fine, &fv, &fv, weighted).unwrap().sqrt();
            assert!((lhs - rhs).abs() < 1e-12 * scale, "{edge:?}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn unweighted_identity_fails_with_norm_weights_at_edges() {
    // The pair built for the SBP-weighted product is not adjoint in the plain sum.
    let (c, f) = mms_pair(13);
    let iface = Interface::new(&c, &f, EdgeRestriction::Linear).unwrap();
    let mut cv = FaceField::zeros(13, 13);
    cv.set(0, 5, [1.0, 0.0, 0.0]);
    let mut fv = FaceField::zeros(25, 25);
    fv.set(1, 10, [1.0, 0.0, 0.0]);
    let lhs = iface.face_inner(Side::Fine, &iface.interpolate_scaled(&cv).unwrap(), &fv, false).unwrap();
    let rhs = iface.face_inner(Side::Coarse, &cv, &iface.restrict_scaled(&fv).unwrap(), false).unwrap();
    assert!((lhs - rhs).abs() > 1e-6 * lhs.abs());
}

#[test]
fn ghost_system_is_affine_with_state_independent_matrix() {
    let (c, f) = mms_pair(13);
    let iface = Interface::new(&c, &f, EdgeRestriction::Linear).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = iface.unknowns();
    let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut kg = vec![0.0; n];
    iface.apply_k(&g, &mut kg);
    for _ in 0..2 {
        let mut us = StateField::zeros(c.lattice);
        us.raw_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let mut uf = StateField::zeros(f.lattice);
        uf.raw_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let r = iface.rhs(&c, &f, &mut us, &uf, None).unwrap();
        iface.set_ghosts(&c, &mut us, &g);
        let res = iface.residual(&c, &f, &us, &uf, None).unwrap();
        for a in 0..n {
            assert!((res[a] - (kg[a] - r[a])).abs() < 1e-9 * kg[a].abs().max(1.0), "entry {a}");
        }
    }
}

#[test]
fn probed_diagonal_blocks_match_exact_ones() {
    let (c, f) = mms_pair(13);
    let iface = Interface::new(&c, &f, EdgeRestriction::Linear).unwrap();
    let bd = sbp_elastic::krylov::ghost_block_diagonal(&iface, 3).unwrap();
    for (b, m) in bd.blocks.iter().enumerate() {
        let exact = iface.diagonal_block(b);
        for p in 0..3 {
            for q in 0..3 {
                assert!((m[(p, q)] - exact[p][q]).abs() < 1e-10 * exact[p][p].abs(), "block {b}");
            }
        }
    }
}

#[test]
fn ghost_solve_restores_traction_continuity_for_linear_fields() {
    // Homogeneous material and a flat interface: a linear displacement has constant
    // traction, so the continuous ghost extension satisfies the discrete system.
    let mut s = Scenario::gaussian_source(sbp_elastic::scenarios::SourceParams::reduced());
    s.coarse_mapping.top = sbp_elastic::geometry::SurfaceFn::Constant { c: 800.0 };
    s.fine_mapping.bottom = s.coarse_mapping.top.clone();
    let (c, f) = s.blocks::<f64>(Some(GridSize { n1: 11, n2: 11, n3_coarse: 9, n3_fine: 9 })).unwrap();
    let iface = Interface::new(&c, &f, EdgeRestriction::Linear).unwrap();
    let lin = |x: [f64; 3]| [1e-3 * x[0] + 2e-3 * x[2], -1e-3 * x[1] + 5e-4 * x[2], 3e-3 * x[2] + 1e-3 * x[0]];
    let fill = |b: &Block<f64>, ghost: bool| {
        let mut u = StateField::zeros(b.lattice);
        u.fill(|nd| lin(b.metric.x[nd]));
        if ghost {
            let l = b.lattice;
            let hz = (800.0 - 0.0) / (l.n3 - 1) as f64;
            let face = FaceField::from_fn(l.n1, l.n2, |i, j| {
                let x = b.metric.x[(l.n3 - 1) * l.face_nodes() + j * l.n1 + i];
                lin([x[0], x[1], x[2] + hz])
            });
            u.set_face(l.n3 as isize, &face);
        }
        u
    };
    let exact = fill(&c, true);
    let uf = fill(&f, false);
    let mut uc = fill(&c, false);
    let b = iface.rhs(&c, &f, &mut uc, &uf, None).unwrap();
    let cfg = SolverConfig { method: Method::Lu, ..Default::default() };
    let solver = GhostSolver::for_interface(&iface, cfg).unwrap();
    let (g, _) = solver.solve(&GhostOperator(&iface), &b, &vec![0.0; b.len()]).unwrap();
    let want = exact.face(c.lattice.n3 as isize);
    for (a, (x, y)) in g.iter().zip(&want.data).enumerate() {
        assert!((x - y).abs() < 1e-10 * y.abs().max(1.0), "ghost entry {a}: {x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interpolation_preserves_constants(nc in 10usize..20, periodic: bool, v in -5.0f64..5.0, e in 0usize..4) {
        let nf = if periodic { 2 * nc } else { 2 * nc - 1 };
        let t = Transfer::<f64>::new((nc, nc), (nf, nf), periodic, EDGES[e]).unwrap();
        let f = t.interpolate(&FaceField::from_fn(nc, nc, |_, _| [v, 2.0 * v, -v])).unwrap();
        for n in 0..f.nodes() {
            let a = f.at(n % nf, n / nf);
            prop_assert!((a[0] - v).abs() < 1e-13 && (a[1] - 2.0 * v).abs() < 1e-13 && (a[2] + v).abs() < 1e-13);
        }
    }

    #[test]
    fn transfers_are_linear(seed in 0u64..1000, a in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = Transfer::<f64>::new((11, 11), (21, 21), false, EdgeRestriction::Linear).unwrap();
        let (x, y) = (random_face(&mut rng, 11, 11), random_face(&mut rng, 11, 11));
        let mut z = x.clone();
        z.data.iter_mut().zip(&y.data).for_each(|(u, v)| *u = a * *u + v);
        let (px, py, pz) = (t.interpolate(&x).unwrap(), t.interpolate(&y).unwrap(), t.interpolate(&z).unwrap());
        let scale = norm(&px) + norm(&py);
        for n in 0..pz.data.len() {
            prop_assert!((pz.data[n] - a * px.data[n] - py.data[n]).abs() < 1e-13 * scale);
        }
    }
}
