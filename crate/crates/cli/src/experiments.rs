//! Numerical experiments shared by the subcommands and the acceptance suite.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sbp_elastic::diagnostics::{block_error, combine_l2, discrete_energy, locate, rates, sample, EnergyParts, ErrorNorms};
use sbp_elastic::elastic3d::FaceField;
use sbp_elastic::interface::{EdgeRestriction, Interface, Side, Transfer};
use sbp_elastic::krylov::{
    assemble_dense, condition_number, condition_number_l1, ghost_block_diagonal, GhostOperator, GhostSolver, Method, ResidualNorm,
    SolverConfig,
};
use sbp_elastic::sbp1d::{End, EndValue, Sbp1D};
use sbp_elastic::scenarios::{GridSize, Scenario, SourceParams};
use sbp_elastic::timestepper::{Model, Problem, TimeConfig};
use sbp_elastic::Model64;

use crate::error::Result;
use crate::output::{Cell, SolverStats, Table};

#[derive(Clone, Debug, Default, Serialize)]
pub struct SbpRow {
    pub n: usize,
    pub first_derivative: f64,
    pub ghost_second_derivative: f64,
    pub free_second_derivative: f64,
    pub symmetry: f64,
    /// Smallest eigenvalue of `M(γ)` relative to the largest.
    pub min_eigenvalue: f64,
}

impl SbpRow {
    pub fn worst(&self) -> f64 {
        [self.first_derivative, self.ghost_second_derivative, self.free_second_derivative, self.symmetry]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn rel(residual: f64, terms: &[f64]) -> f64 {
    let scale = terms.iter().map(|t| t.abs()).sum::<f64>();
    if scale == 0.0 {
        residual.abs()
    } else {
        residual.abs() / scale
    }
}

/// Relative residuals of the three summation-by-parts identities over random `(u, v, γ)`.
pub fn sbp_check(sizes: &[usize], triples: usize, seed: u64) -> Result<Vec<SbpRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &n in sizes {
        let op = Sbp1D::<f64>::new(n)?;
        let h = 1.0 / (n - 1) as f64;
        let mut row = SbpRow { n, min_eigenvalue: f64::INFINITY, ..Default::default() };
        for _ in 0..triples {
            let mut vec = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };
            let u = vec(n);
            let v_ext = vec(n + 2);
            let gamma: Vec<f64> = vec(n).iter().map(|g| 1.25 + g).collect();
            let v = &v_ext[1..=n];

            let du = op.apply_d(&u, &h)?;
            let dv = op.apply_d(v, &h)?;
            let (a, b, c) = (op.inner(&u, &dv, &h), op.inner(&du, v, &h), u[n - 1] * v[n - 1] - u[0] * v[0]);
            row.first_derivative = row.first_derivative.max(rel(a + b - c, &[a, b, u[0] * v[0], u[n - 1] * v[n - 1]]));

            let s_uv = op.s_form(&gamma, &u, v, &h)?;
            let s_vu = op.s_form(&gamma, v, &u, &h)?;
            row.symmetry = row.symmetry.max(rel(s_uv - s_vu, &[s_uv, s_vu]));

            for closure in [true, false] {
                let (g, low, high) = if closure {
                    (
                        op.apply_g_ghost(&gamma, &v_ext, &h)?,
                        EndValue::Ghost(v_ext[0]),
                        EndValue::Ghost(v_ext[n + 1]),
                    )
                } else {
                    (op.apply_g_noghost(&gamma, v, &h)?, EndValue::Free, EndValue::Free)
                };
                let b0 = op.boundary_derivative(v, End::Low, low, &h)?;
                let bn = op.boundary_derivative(v, End::High, high, &h)?;
                let lhs = op.inner(&u, &g, &h);
                let (t0, tn) = (u[0] * gamma[0] * b0, u[n - 1] * gamma[n - 1] * bn);
                let r = rel(lhs - (-s_uv - t0 + tn), &[lhs, s_uv, t0, tn]);
                if closure {
                    row.ghost_second_derivative = row.ghost_second_derivative.max(r);
                } else {
                    row.free_second_derivative = row.free_second_derivative.max(r);
                }
            }

            let m = op.s_matrix(&gamma)?;
            let dm = DMatrix::from_fn(n, n, |i, j| m[i][j]);
            row.symmetry = row.symmetry.max((&dm - dm.transpose()).amax() / dm.amax());
            let eig = dm.symmetric_eigenvalues();
            row.min_eigenvalue = row.min_eigenvalue.min(eig.min() / eig.max());
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct InterfaceReport {
    /// `max |R − ¼Pᵀ|` over the transpose-variant assemblies.
    pub restriction_vs_transpose: f64,
    /// Worst relative defect of `(𝒫u, v)_f = (u, ℛv)_c`, per edge variant.
    pub adjoint: Vec<(EdgeRestriction, f64)>,
    pub pairs: usize,
    /// Worst error of unscaled interpolation on bicubics.
    pub bicubic: f64,
}

fn random_face(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> FaceField<f64> {
    FaceField { n1, n2, data: (0..3 * n1 * n2).map(|_| rng.gen_range(-1.0..1.0)).collect() }
}

pub fn interface_check(pairs: usize, seed: u64) -> Result<InterfaceReport> {
    let mut report = InterfaceReport { pairs, ..Default::default() };
    for (nc, periodic) in [(8, true), (12, true), (8, false), (13, false), (25, false)] {
        let nf = if periodic { 2 * nc } else { 2 * nc - 1 };
        let t = Transfer::<f64>::new((nc, nc), (nf, nf), periodic, EdgeRestriction::Transpose)?;
        let d = (t.dense_r() - t.dense_p().transpose() * 0.25).amax();
        report.restriction_vs_transpose = report.restriction_vs_transpose.max(d);
    }

    let nc = 13;
    let nf = 2 * nc - 1;
    let t = Transfer::<f64>::new((nc, nc), (nf, nf), false, EdgeRestriction::Transpose)?;
    let poly = |x: f64, y: f64| {
        let mut v = [0.0; 3];
        for (p, c) in v.iter_mut().enumerate() {
            for a in 0..4 {
                for b in 0..4 {
                    *c += ((a + 2 * b + p) % 5) as f64 * 0.1 * x.powi(a as i32) * y.powi(b as i32);
                }
            }
        }
        v
    };
    let f = t.interpolate(&FaceField::from_fn(nc, nc, |i, j| poly(i as f64, j as f64)))?;
    for j in 0..nf {
        for i in 0..nf {
            let (want, got) = (poly(i as f64 / 2.0, j as f64 / 2.0), f.at(i, j));
            for p in 0..3 {
                report.bicubic = report.bicubic.max((got[p] - want[p]).abs() / want[p].abs().max(1.0));
            }
        }
    }

    let (c, fb) = Scenario::mms(24).blocks::<f64>(Some(GridSize { n1: 13, n2: 13, n3_coarse: 8, n3_fine: 9 }))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for edge in [EdgeRestriction::Transpose, EdgeRestriction::NormAdjoint, EdgeRestriction::Preserving, EdgeRestriction::Linear] {
        let iface = Interface::new(&c, &fb, edge)?;
        let weighted = edge != EdgeRestriction::Transpose;
        let ((c1, c2), (f1, f2)) = (iface.transfer.coarse_dims(), iface.transfer.fine_dims());
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let (cv, fv) = (random_face(&mut rng, c1, c2), random_face(&mut rng, f1, f2));
            let lhs = iface.face_inner(Side::Fine, &iface.interpolate_scaled(&cv)?, &fv, weighted)?;
            let rhs = iface.face_inner(Side::Coarse, &cv, &iface.restrict_scaled(&fv)?, weighted)?;
            let scale = iface.face_inner(Side::Coarse, &cv, &cv, weighted)?.sqrt() * iface.face_inner(Side::Fine, &fv, &fv, weighted)?.sqrt();
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        report.adjoint.push((edge, worst));
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct MmsRow {
    pub intervals: usize,
    pub two_h: f64,
    pub dt: f64,
    pub steps: usize,
    pub coarse: ErrorNorms,
    pub fine: ErrorNorms,
    pub global: ErrorNorms,
    pub solver: SolverStats,
}

pub fn two_block(scenario: &Scenario, grid: Option<GridSize>, edge: EdgeRestriction, solver: SolverConfig) -> Result<(Model64, Box<dyn Problem<f64>>)> {
    let problem = scenario.data::<f64>();
    let (c, f) = scenario.blocks::<f64>(grid)?;
    let model = Model::two_block(c, f, edge, solver, problem.as_ref())?;
    Ok((model, problem))
}

/// Runs the manufactured solution to its final time at coarse spacing `2π/intervals`.
pub fn mms_run(intervals: usize, periodic: bool, edge: EdgeRestriction, solver: SolverConfig, cfl: f64) -> Result<MmsRow> {
    let s = Scenario::mms_lateral(intervals, periodic);
    let (model, p) = two_block(&s, None, edge, solver)?;
    let (dt, n) = model.time_grid(&TimeConfig { cfl, t_end: s.t_end, dt: None })?;
    let mut lv = model.bootstrap(p.as_ref(), dt)?;
    let mut stats = SolverStats::default();
    for _ in 0..n {
        let st = model.step(&mut lv, dt, p.as_ref())?;
        st.predictor.iter().chain(st.corrector.iter()).for_each(|r| stats.add(r));
    }
    let mut parts = Vec::new();
    for (b, blk) in model.blocks.iter().enumerate() {
        let exact = |nd: usize| p.exact(blk.tag, blk.metric.x[nd], lv.t).expect("manufactured solution is exact");
        parts.push(block_error(blk, &lv.cur[b], exact)?);
    }
    Ok(MmsRow {
        intervals,
        two_h: 2.0 * std::f64::consts::PI / intervals as f64,
        dt,
        steps: n,
        coarse: parts[0],
        fine: parts[1],
        global: combine_l2(&parts),
        solver: stats,
    })
}

pub fn write_convergence(path: &Path, rows: &[MmsRow]) -> Result<()> {
    let l2: Vec<f64> = rows.iter().map(|r| r.global.l2).collect();
    let grid: Vec<f64> = rows.iter().map(|r| r.global.l2_grid).collect();
    let (r_l2, r_grid) = (rates(&l2), rates(&grid));
    let mut t = Table::create(
        path,
        &["two_h", "l2", "rate", "l2_coarse", "l2_fine", "l2_reference_cube", "rate_reference_cube", "max", "dt", "steps"],
    )?;
    for (i, r) in rows.iter().enumerate() {
        let rate = |v: &[f64]| if i == 0 { Cell::Text(String::new()) } else { Cell::Num(v[i - 1]) };
        t.row(&[
            r.two_h.into(),
            r.global.l2.into(),
            rate(&r_l2),
            r.coarse.l2.into(),
            r.fine.l2.into(),
            r.global.l2_grid.into(),
            rate(&r_grid),
            r.global.max.into(),
            r.dt.into(),
            r.steps.into(),
        ])?;
    }
    t.finish()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationStats {
    pub method: Method,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchResult {
    pub two_h: f64,
    pub edge: EdgeRestriction,
    pub unknowns: usize,
    /// `[K, D, D⁻¹K]` in the 1-norm.
    pub cond_l1: [f64; 3],
    /// `[K, D, D⁻¹K]` in the 2-norm.
    pub cond_l2: [f64; 3],
    pub systems: usize,
    pub iterations: Vec<(ResidualNorm, Vec<IterationStats>)>,
}

/// Condition numbers and iteration counts of CG, block Jacobi and PCG on the
/// ghost systems met while stepping the manufactured solution (zero initial guess).
pub fn solve_bench(intervals: usize, edge: EdgeRestriction, block_size: usize, abs_tol: f64, with_l2: bool) -> Result<BenchResult> {
    let s = Scenario::mms(intervals);
    let (model, p) = two_block(&s, None, edge, SolverConfig::default())?;
    let iface = model.interface.as_ref().expect("two-block model");
    let (c, f) = (&model.blocks[0], &model.blocks[1]);
    let op = GhostOperator(iface);
    let k = assemble_dense(&op, SolverConfig::default().dense_cap)?;
    let d = ghost_block_diagonal(iface, block_size)?.dense(k.nrows());
    let dinv = d.clone().try_inverse().ok_or_else(|| sbp_elastic::Error::Contract("block diagonal is singular".into()))?;
    let dk = &dinv * &k;
    let cond_l1 = [condition_number_l1(&k), condition_number_l1(&d), condition_number_l1(&dk)];
    let cond_l2 = if with_l2 { [condition_number(&k), condition_number(&d), condition_number(&dk)] } else { [f64::NAN; 3] };

    let (dt, n) = model.time_grid(&TimeConfig { cfl: 1.3, t_end: s.t_end, dt: None })?;
    let mut lv = model.bootstrap(p.as_ref(), dt)?;
    let mut systems = Vec::with_capacity(n);
    for _ in 0..n {
        model.step(&mut lv, dt, p.as_ref())?;
        let mut cu = lv.cur[0].clone();
        systems.push(iface.rhs(c, f, &mut cu, &lv.cur[1], None)?);
    }
    let mut iterations = Vec::new();
    for norm in [ResidualNorm::Max, ResidualNorm::Euclidean] {
        let mut per = Vec::new();
        for method in [Method::Cg, Method::BlockJacobi, Method::Pcg] {
            let cfg = SolverConfig { method, block_size, norm, abs_tol, ..Default::default() };
            let solver = GhostSolver::for_interface(iface, cfg)?;
            let its = systems
                .iter()
                .map(|b| solver.solve(&op, b, &vec![0.0; b.len()]).map(|(_, r)| r.iterations))
                .collect::<sbp_elastic::Result<Vec<_>>>()?;
            per.push(IterationStats {
                method,
                mean: its.iter().sum::<usize>() as f64 / its.len() as f64,
                min: *its.iter().min().unwrap_or(&0),
                max: *its.iter().max().unwrap_or(&0),
            });
        }
        iterations.push((norm, per));
    }
    Ok(BenchResult {
        two_h: 2.0 * std::f64::consts::PI / intervals as f64,
        edge,
        unknowns: k.nrows(),
        cond_l1,
        cond_l2,
        systems: systems.len(),
        iterations,
    })
}

pub fn write_bench(path: &Path, rows: &[BenchResult]) -> Result<()> {
    let mut t = Table::create(
        path,
        &["two_h", "edge", "unknowns", "matrix_norm", "cond_cg", "cond_block_jacobi", "cond_pcg", "residual_norm", "iters_cg", "iters_block_jacobi", "iters_pcg"],
    )?;
    for r in rows {
        for (cond_norm, cond) in [("1", r.cond_l1), ("2", r.cond_l2)] {
            for (norm, its) in &r.iterations {
                let name = match norm {
                    ResidualNorm::Max => "max",
                    ResidualNorm::Euclidean => "euclidean",
                };
                t.row(&[
                    r.two_h.into(),
                    edge_name(r.edge).into(),
                    r.unknowns.into(),
                    cond_norm.into(),
                    cond[0].into(),
                    cond[1].into(),
                    cond[2].into(),
                    name.into(),
                    its[0].mean.into(),
                    its[1].mean.into(),
                    its[2].mean.into(),
                ])?;
            }
        }
    }
    t.finish()?;
    Ok(())
}

pub fn edge_name(e: EdgeRestriction) -> &'static str {
    match e {
        EdgeRestriction::Transpose => "transpose",
        EdgeRestriction::NormAdjoint => "norm-adjoint",
        EdgeRestriction::Preserving => "preserving",
        EdgeRestriction::Linear => "linear",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub parts: EnergyParts,
    pub drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyRun {
    pub dt: f64,
    pub steps: usize,
    pub initial: f64,
    pub records: Vec<EnergyRecord>,
    pub max_drift: f64,
    /// Largest `E/E₀` seen.
    pub max_growth: f64,
    /// Step at which the energy grew past the blow-up factor or went non-finite.
    pub diverged_at: Option<usize>,
    pub solver: SolverStats,
}

/// Growth of `E/E₀` treated as divergence.
pub const BLOW_UP: f64 = 1e6;

/// Steps `model` with energy bookkeeping every `stride` steps, stopping early on blow-up.
pub fn energy_run(model: &Model64, problem: &dyn Problem<f64>, dt: f64, steps: usize, stride: usize) -> Result<EnergyRun> {
    let stride = stride.max(1);
    let mut lv = model.bootstrap(problem, dt)?;
    let e0 = discrete_energy(model, &lv.cur, &lv.prev, dt)?.total;
    let mut run = EnergyRun {
        dt,
        steps: 0,
        initial: e0,
        records: vec![],
        max_drift: 0.0,
        max_growth: 1.0,
        diverged_at: None,
        solver: SolverStats::default(),
    };
    for k in 1..=steps {
        match model.step(&mut lv, dt, problem) {
            Ok(st) => st.predictor.iter().chain(st.corrector.iter()).for_each(|r| run.solver.add(r)),
            Err(sbp_elastic::Error::Contract(_)) | Err(sbp_elastic::Error::NonConvergence { .. }) => {
                run.diverged_at = Some(k);
                run.max_growth = f64::INFINITY;
                run.steps = k;
                return Ok(run);
            }
            Err(e) => return Err(e.into()),
        }
        run.steps = k;
        if k % stride == 0 || k == steps {
            let parts = discrete_energy(model, &lv.cur, &lv.prev, dt)?;
            let drift = (parts.total - e0).abs() / e0.abs();
            let growth = parts.total / e0;
            run.max_drift = run.max_drift.max(drift);
            run.max_growth = run.max_growth.max(if growth.is_finite() { growth } else { f64::INFINITY });
            run.records.push(EnergyRecord { step: k, t: lv.t, parts, drift });
            if !growth.is_finite() || growth > BLOW_UP {
                run.diverged_at = Some(k);
                return Ok(run);
            }
        }
    }
    Ok(run)
}

pub fn write_energy(path: &Path, run: &EnergyRun) -> Result<()> {
    let mut t = Table::create(path, &["step", "t", "kinetic", "strain", "correction", "total", "relative_drift"])?;
    for r in &run.records {
        t.row(&[r.step.into(), r.t.into(), r.parts.kinetic.into(), r.parts.strain.into(), r.parts.correction.into(), r.parts.total.into(), r.drift.into()])?;
    }
    t.finish()?;
    Ok(())
}

/// Displacement histories at `receivers` over `steps` steps of `dt`.
pub fn record(model: &Model64, problem: &dyn Problem<f64>, receivers: &[[f64; 3]], dt: f64, steps: usize) -> Result<Vec<Vec<[f64; 3]>>> {
    let rcv = receivers.iter().map(|x| locate(&model.blocks, *x)).collect::<sbp_elastic::Result<Vec<_>>>()?;
    let mut lv = model.bootstrap(problem, dt)?;
    let mut out: Vec<Vec<[f64; 3]>> = rcv.iter().map(|r| vec![sample(&lv.cur, r)]).collect();
    for _ in 0..steps {
        model.step(&mut lv, dt, problem)?;
        for (r, o) in rcv.iter().zip(out.iter_mut()) {
            o.push(sample(&lv.cur, r));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReceiverComparison {
    pub x: [f64; 3],
    pub below_interface: bool,
    /// `max_t |u₂| / max_t |u₃|` of the refined run.
    pub u2_ratio: f64,
    /// Max-norm difference to the reference relative to the reference max-norm.
    pub difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SourceComparison {
    pub dt: f64,
    pub steps: usize,
    pub receivers: Vec<ReceiverComparison>,
    /// Same differences for a uniform mesh at the coarse spacing.
    pub coarse_uniform: Option<Vec<f64>>,
}

fn compare(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (0..3).map(|p| (x[p] - y[p]).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    let m = b.iter().map(|y| y.iter().map(|v| v.abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    d / m
}

/// Refined two-block run against a single block at the fine spacing, on the same time grid.
pub fn source_comparison(params: SourceParams, edge: EdgeRestriction, cfl: f64, with_coarse_uniform: bool) -> Result<SourceComparison> {
    let s = Scenario::gaussian_source(params);
    let (model, p) = two_block(&s, None, edge, s.recommended_solver())?;
    let uniform = Model::single(params.uniform_block()?, p.as_ref())?;
    let dt = model.max_dt(cfl).min(uniform.max_dt(cfl));
    let (dt, n) = model.time_grid(&TimeConfig { cfl, t_end: s.t_end, dt: Some(dt) })?;
    let a = record(&model, p.as_ref(), &s.receivers, dt, n)?;
    let b = record(&uniform, p.as_ref(), &s.receivers, dt, n)?;
    let receivers = s
        .receivers
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(x, (ta, tb))| {
            let m3 = ta.iter().map(|v| v[2].abs()).fold(0.0, f64::max);
            let m2 = ta.iter().map(|v| v[1].abs()).fold(0.0, f64::max);
            ReceiverComparison { x: *x, below_interface: x[2] < params.interface - params.ripple, u2_ratio: m2 / m3, difference: compare(ta, tb) }
        })
        .collect();
    let coarse_uniform = if with_coarse_uniform {
        let mut blk = params.uniform_block::<f64>()?;
        let (c, _) = params.grid.lattices(false);
        let n3 = ((blk.lattice.n3 - 1) / 2) + 1;
        blk = sbp_elastic::elastic3d::Block::new(blk.tag, blk.mapping.clone(), blk.material.clone(), sbp_elastic::geometry::Lattice::new(c.n1, c.n2, n3, false), blk.bcs)?;
        let m = Model::single(blk, p.as_ref())?;
        let t = record(&m, p.as_ref(), &s.receivers, dt, n)?;
        Some(t.iter().zip(&b).map(|(x, y)| compare(x, y)).collect())
    } else {
        None
    };
    Ok(SourceComparison { dt, steps: n, receivers, coarse_uniform })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbp_identities_hold_to_round_off() {
        let rows = sbp_check(&[8, 12], 10, 1).unwrap();
        for r in rows {
            assert!(r.worst() < 1e-12, "{r:?}");
            assert!(r.min_eigenvalue > -1e-12, "{r:?}");
        }
    }

    #[test]
    fn interface_check_small() {
        let r = interface_check(5, 2).unwrap();
        assert_eq!(r.restriction_vs_transpose, 0.0);
        assert!(r.bicubic < 1e-12);
        assert!(r.adjoint.iter().all(|(_, d)| *d < 1e-12), "{:?}", r.adjoint);
    }

    #[test]
    fn comparison_is_relative_max_norm() {
        let a = [[0.0, 0.0, 1.0], [0.0, 0.0, 2.1]];
        let b = [[0.0, 0.0, 1.0], [0.0, 0.0, 2.0]];
        assert!((compare(&a, &b) - 0.05).abs() < 1e-12);
    }
}
