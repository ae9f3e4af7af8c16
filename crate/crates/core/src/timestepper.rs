//! CFL step selection and the fourth-order predictor-corrector scheme.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elastic3d::{Block, BlockTag, BoundaryData, FaceBc, FaceField, StateField};
use crate::interface::{EdgeRestriction, Interface};
use crate::krylov::{GhostOperator, GhostSolver, SolveReport, SolverConfig};
use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { cfl: 1.3, t_end: 0.5, dt: None }
    }
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0) {
            return Err(Error::Config(format!("time.cfl must be positive, got {}", self.cfl)));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Config(format!("time.t_end must be positive, got {}", self.t_end)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("time.dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

/// `C·h/√κ`.
pub fn cfl_dt<T: Real>(kappa: T, h_min: T, cfl: T) -> T {
    cfl * h_min / kappa.sqrt()
}

/// Largest step not above `dt_max` that divides `t_end` evenly.
pub fn fit_to_end<T: Real>(dt_max: T, t_end: T) -> (T, usize) {
    let n = (t_end / dt_max).ceil().to_usize().unwrap_or(1).max(1);
    (t_end / T::lit(n as f64), n)
}

/// Body force density and its second time derivative at the nodes of one block.
pub trait NodalForcing<T>: Send + Sync {
    fn eval(&self, node: usize, t: T) -> [T; 3];
    fn eval_tt(&self, node: usize, t: T) -> [T; 3];
}

/// Everything a run needs from a scenario besides geometry and material.
pub trait Problem<T: Real>: BoundaryData<T> {
    fn initial(&self, tag: BlockTag, x: [T; 3]) -> [T; 3];

    fn initial_velocity(&self, _tag: BlockTag, _x: [T; 3]) -> [T; 3] {
        [T::zero(); 3]
    }

    fn exact(&self, _tag: BlockTag, _x: [T; 3], _t: T) -> Option<[T; 3]> {
        None
    }

    fn has_exact(&self) -> bool {
        false
    }

    fn forcing(&self, _block: &Block<T>) -> Option<Box<dyn NodalForcing<T>>> {
        None
    }
}

/// Displacements at `t_n` and `t_{n−1}`, one field per block.
#[derive(Clone, Debug)]
pub struct Levels<T> {
    pub cur: Vec<StateField<T>>,
    pub prev: Vec<StateField<T>>,
    pub t: T,
    pub step: usize,
    /// Last coarse ghost vector, used as the next initial guess.
    pub ghosts: Vec<T>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub predictor: Option<SolveReport>,
    pub corrector: Option<SolveReport>,
}

/// Blocks, interface and cached solver of one run.
pub struct Model<T: Real> {
    pub blocks: Vec<Block<T>>,
    pub interface: Option<Interface<T>>,
    pub solver: Option<GhostSolver<T>>,
    /// Abort on ghost-solve non-convergence; otherwise log and continue.
    pub strict: bool,
    forcing: Vec<Option<Box<dyn NodalForcing<T>>>>,
    inv_rho_j: Vec<Vec<T>>,
    inv_rho: Vec<Vec<T>>,
}

impl<T: Real> Model<T> {
    /// Coarse block below, fine block above.
    pub fn two_block(
        coarse: Block<T>,
        fine: Block<T>,
        edge: EdgeRestriction,
        solver: SolverConfig,
        problem: &dyn Problem<T>,
    ) -> Result<Self> {
        let iface = Interface::new(&coarse, &fine, edge)?;
        let solver = GhostSolver::for_interface(&iface, solver)?;
        Ok(Self::assemble(vec![coarse, fine], Some(iface), Some(solver), problem))
    }

    pub fn single(block: Block<T>, problem: &dyn Problem<T>) -> Result<Self> {
        if block.bcs.top == FaceBc::Interface || block.bcs.bottom == FaceBc::Interface {
            return Err(Error::Config("a single block cannot have interface faces".into()));
        }
        Ok(Self::assemble(vec![block], None, None, problem))
    }

    fn assemble(blocks: Vec<Block<T>>, interface: Option<Interface<T>>, solver: Option<GhostSolver<T>>, problem: &dyn Problem<T>) -> Self {
        let forcing = blocks.iter().map(|b| problem.forcing(b)).collect();
        let inv_rho_j = blocks
            .iter()
            .map(|b| (0..b.lattice.nodes()).map(|n| T::one() / (b.coeff.rho[n] * b.metric.jac[n])).collect())
            .collect();
        let inv_rho = blocks.iter().map(|b| b.coeff.rho.iter().map(|r| T::one() / *r).collect()).collect();
        Model { blocks, interface, solver, strict: true, forcing, inv_rho_j, inv_rho }
    }

    pub fn coarse(&self) -> &Block<T> {
        &self.blocks[0]
    }

    pub fn fine(&self) -> Option<&Block<T>> {
        self.blocks.get(1)
    }

    /// Per-block `(κ, min h)`.
    pub fn cfl_data(&self) -> Vec<(T, T)> {
        self.blocks.iter().map(|b| (b.kappa(), b.min_h())).collect()
    }

    /// Step bound `C·min_b(h_b/√κ_b)`.
    pub fn max_dt(&self, cfl: T) -> T {
        self.cfl_data()
            .into_iter()
            .map(|(k, h)| cfl_dt(k, h, cfl))
            .fold(T::infinity(), |a, b| a.min(b))
    }

    /// Step size and count for a time configuration.
    pub fn time_grid(&self, cfg: &TimeConfig) -> Result<(T, usize)> {
        cfg.validate()?;
        let t_end = T::lit(cfg.t_end);
        let bound = self.max_dt(T::lit(cfg.cfl));
        match cfg.dt {
            Some(dt) => {
                let dt = T::lit(dt);
                if dt > bound {
                    log::warn!("time step {dt:e} exceeds the CFL bound {bound:e}");
                }
                let n = (t_end / dt).round().to_usize().unwrap_or(1).max(1);
                Ok((dt, n))
            }
            None => Ok(fit_to_end(bound, t_end)),
        }
    }

    /// Dirichlet data, injection, top traction ghosts and the coarse ghost solve at time `t`.
    pub fn enforce(&self, u: &mut [StateField<T>], t: T, problem: &dyn Problem<T>, guess: &mut Vec<T>) -> Result<Option<SolveReport>> {
        match &self.interface {
            None => {
                self.blocks[0].apply_physical_bcs(&mut u[0], problem, t)?;
                Ok(None)
            }
            Some(iface) => {
                let (coarse, fine) = (&self.blocks[0], &self.blocks[1]);
                let (cs, fs) = u.split_at_mut(1);
                let (c, f) = (&mut cs[0], &mut fs[0]);
                coarse.apply_dirichlet(c, problem, t);
                iface.inject(coarse, c, f)?;
                fine.apply_physical_bcs(f, problem, t)?;
                let pinned = self.pinned_accel(t, problem);
                let r = iface.rhs(coarse, fine, c, f, pinned.as_ref())?;
                let solver = self.solver.as_ref().expect("two-block model carries a solver");
                if guess.len() != r.len() {
                    *guess = vec![T::zero(); r.len()];
                }
                let (g, report) = solver.solve(&GhostOperator(iface), &r, guess)?;
                if !report.converged {
                    if self.strict {
                        return Err(Error::NonConvergence {
                            method: solver.config.method.name().into(),
                            iterations: report.iterations,
                            residual: report.final_residual,
                        });
                    }
                    log::warn!("ghost solve stopped at residual {:e} after {} iterations", report.final_residual, report.iterations);
                }
                iface.set_ghosts(coarse, c, &g);
                *guess = g;
                Ok(Some(report))
            }
        }
    }

    /// `u_tt − F/ρ` from the Dirichlet data on the coarse interface face, if any node there is held.
    fn pinned_accel(&self, t: T, problem: &dyn Problem<T>) -> Option<FaceField<T>> {
        let iface = self.interface.as_ref()?;
        let coarse = &self.blocks[0];
        let lat = coarse.lattice;
        let base = (lat.n3 - 1) * lat.face_nodes();
        if !(0..lat.face_nodes()).any(|n| iface.is_pinned(n)) {
            return None;
        }
        let force = self.forcing[0].as_deref();
        Some(FaceField::from_fn(lat.n1, lat.n2, |i, j| {
            let f = j * lat.n1 + i;
            if !iface.is_pinned(f) {
                return [T::zero(); 3];
            }
            let node = base + f;
            let a = problem.dirichlet_tt(coarse.tag, coarse.metric.x[node], t);
            let g = force.map_or([T::zero(); 3], |fr| fr.eval(node, t));
            std::array::from_fn(|p| a[p] - g[p] * self.inv_rho[0][node])
        }))
    }

    /// `(ρJ)⁻¹ L u + ρ⁻¹F` (or `ρ⁻¹F_tt` with `second`) at every node of block `b`.
    fn accel(&self, b: usize, u: &StateField<T>, t: T, second: bool) -> Result<StateField<T>> {
        let mut a = self.blocks[b].apply_l(u)?;
        let irj = &self.inv_rho_j[b];
        let ir = &self.inv_rho[b];
        let force = self.forcing[b].as_deref();
        a.interior_mut().par_chunks_mut(3).enumerate().for_each(|(n, v)| {
            let f = match force {
                Some(f) if second => f.eval_tt(n, t),
                Some(f) => f.eval(n, t),
                None => [T::zero(); 3],
            };
            for p in 0..3 {
                v[p] = v[p] * irj[n] + f[p] * ir[n];
            }
        });
        Ok(a)
    }

    /// Fresh levels from initial data, both satisfying the interface and boundary conditions.
    pub fn bootstrap(&self, problem: &dyn Problem<T>, dt: T) -> Result<Levels<T>> {
        let mut ghosts = Vec::new();
        let t0 = T::zero();
        let mut cur: Vec<StateField<T>> = self.blocks.iter().map(|b| StateField::zeros(b.lattice)).collect();
        for (b, u) in self.blocks.iter().zip(cur.iter_mut()) {
            u.fill(|n| problem.initial(b.tag, b.metric.x[n]));
        }
        self.enforce(&mut cur, t0, problem, &mut ghosts)?;
        let mut prev: Vec<StateField<T>> = self.blocks.iter().map(|b| StateField::zeros(b.lattice)).collect();
        if problem.has_exact() {
            for (b, u) in self.blocks.iter().zip(prev.iter_mut()) {
                u.fill(|n| problem.exact(b.tag, b.metric.x[n], -dt).expect("scenario reports an exact solution"));
            }
        } else {
            let half = T::lit(0.5) * dt * dt;
            for (bi, b) in self.blocks.iter().enumerate() {
                let a = self.accel(bi, &cur[bi], t0, false)?;
                let u0 = &cur[bi];
                prev[bi].fill(|n| {
                    let (u, v, acc) = (u0.at_node(n), problem.initial_velocity(b.tag, b.metric.x[n]), a.at_node(n));
                    std::array::from_fn(|p| u[p] - dt * v[p] + half * acc[p])
                });
            }
        }
        let mut g_prev = ghosts.clone();
        self.enforce(&mut prev, -dt, problem, &mut g_prev)?;
        Ok(Levels { cur, prev, t: t0, step: 0, ghosts })
    }

    /// One predictor-corrector step.
    pub fn step(&self, lv: &mut Levels<T>, dt: T, problem: &dyn Problem<T>) -> Result<StepStats> {
        let t_next = lv.t + dt;
        let dt2 = dt * dt;
        let nb = self.blocks.len();
        // Predictor.
        let mut star = Vec::with_capacity(nb);
        for b in 0..nb {
            let a = self.accel(b, &lv.cur[b], lv.t, false)?;
            let mut s = StateField::zeros(self.blocks[b].lattice);
            let (u, um) = (lv.cur[b].interior(), lv.prev[b].interior());
            s.interior_mut()
                .par_iter_mut()
                .zip(a.interior().par_iter())
                .enumerate()
                .for_each(|(i, (v, acc))| *v = T::lit(2.0) * u[i] - um[i] + dt2 * *acc);
            star.push(s);
        }
        let predictor = self.enforce(&mut star, t_next, problem, &mut lv.ghosts)?;
        // Acceleration including ghost planes, then the corrector.
        let c4 = dt2 * dt2 / T::lit(12.0);
        for b in 0..nb {
            let mut udd = StateField::zeros(self.blocks[b].lattice);
            let (s, u, um) = (star[b].raw(), lv.cur[b].raw(), lv.prev[b].raw());
            udd.raw_mut()
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, v)| *v = (s[i] - T::lit(2.0) * u[i] + um[i]) / dt2);
            let corr = self.accel(b, &udd, lv.t, true)?;
            star[b].interior_mut().par_iter_mut().zip(corr.interior().par_iter()).for_each(|(v, c)| *v += c4 * *c);
        }
        let corrector = self.enforce(&mut star, t_next, problem, &mut lv.ghosts)?;
        let old = std::mem::replace(&mut lv.cur, star);
        lv.prev = old;
        lv.t = t_next;
        lv.step += 1;
        if lv.cur.iter().any(|u| !u.is_finite()) {
            return Err(Error::Contract(format!("non-finite displacement after step {}", lv.step)));
        }
        Ok(StepStats { predictor, corrector })
    }
}
