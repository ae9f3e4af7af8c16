//! The `run` subcommand: one configured simulation with all its artifacts.

use std::path::Path;
use std::time::Instant;

use sbp_elastic::diagnostics::{block_error, combine_l2, discrete_energy, locate, sample, ErrorNorms};
use sbp_elastic::timestepper::Model;

use crate::config::{Policy, RunConfig};
use crate::error::Result;
use crate::experiments::edge_name;
use crate::output::{BlockInfo, EnergySummary, Manifest, SolverStats, Table};
use crate::snapshot::{SnapshotHeader, SnapshotWriter};

/// Result of [`run`]: the manifest as written plus the final error when the scenario has an exact solution.
pub struct RunOutcome {
    pub manifest: Manifest,
    pub final_error: Option<ErrorNorms>,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.prepare_output()?;
    let clock = Instant::now();
    let scenario = cfg.scenario();
    let problem = scenario.data::<f64>();
    let (c, f) = scenario.blocks::<f64>(None)?;
    let solver = cfg.solver();
    let mut model = Model::two_block(c, f, cfg.edge, solver.clone(), problem.as_ref())?;
    model.strict = cfg.on_nonconvergence == Policy::Abort;
    let time = cfg.time();
    let (dt, steps) = model.time_grid(&time)?;
    log::info!("{}: {steps} steps of {dt:e}", scenario.name.as_str());

    let receivers = scenario.receivers.iter().map(|x| locate(&model.blocks, *x)).collect::<sbp_elastic::Result<Vec<_>>>()?;
    let mut files = Vec::new();
    let mut traces = receivers
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let name = format!("receiver_{i}.csv");
            files.push(name.clone());
            Table::create(&dir.join(name), &["t", "u1", "u2", "u3"])
        })
        .collect::<Result<Vec<_>>>()?;
    let energy_on = cfg.output.energy_stride > 0;
    let mut energy_table = if energy_on {
        files.push("energy.csv".into());
        Some(Table::create(&dir.join("energy.csv"), &["step", "t", "kinetic", "strain", "correction", "total", "relative_drift"])?)
    } else {
        None
    };
    let writer = (cfg.output.snapshot_stride > 0).then(SnapshotWriter::spawn);

    let mut lv = model.bootstrap(problem.as_ref(), dt)?;
    let mut stats = SolverStats::default();
    let mut energy: Option<EnergySummary> = None;
    let mut snapshots = 0;
    for step in 0..=steps {
        if step > 0 {
            let st = model.step(&mut lv, dt, problem.as_ref())?;
            st.predictor.iter().chain(st.corrector.iter()).for_each(|r| stats.add(r));
        }
        for (r, t) in receivers.iter().zip(traces.iter_mut()) {
            let u = sample(&lv.cur, r);
            t.row(&[lv.t.into(), u[0].into(), u[1].into(), u[2].into()])?;
        }
        if let Some(tab) = energy_table.as_mut() {
            if step % cfg.output.energy_stride == 0 || step == steps {
                let e = discrete_energy(&model, &lv.cur, &lv.prev, dt)?;
                let s = energy.get_or_insert(EnergySummary { initial: e.total, last: e.total, max_relative_drift: 0.0 });
                let drift = if s.initial == 0.0 { (e.total - s.initial).abs() } else { (e.total - s.initial).abs() / s.initial.abs() };
                s.last = e.total;
                s.max_relative_drift = s.max_relative_drift.max(drift);
                tab.row(&[step.into(), lv.t.into(), e.kinetic.into(), e.strain.into(), e.correction.into(), e.total.into(), drift.into()])?;
            }
        }
        if let Some(w) = &writer {
            if step % cfg.output.snapshot_stride == 0 || step == steps {
                for (b, blk) in model.blocks.iter().enumerate() {
                    let name = format!("snapshot_{}_{step:06}.snap", blk.tag.name());
                    w.submit(dir.join(&name), SnapshotHeader::new(blk.tag.name(), blk.lattice, lv.t, step), lv.cur[b].clone())?;
                    files.push(name);
                    snapshots += 1;
                }
            }
        }
    }
    for t in traces {
        t.finish()?;
    }
    if let Some(t) = energy_table {
        t.finish()?;
    }
    if let Some(w) = writer {
        w.finish()?;
    }

    let final_error = if problem.has_exact() {
        let parts = model
            .blocks
            .iter()
            .enumerate()
            .map(|(b, blk)| block_error(blk, &lv.cur[b], |n| problem.exact(blk.tag, blk.metric.x[n], lv.t).expect("exact solution")))
            .collect::<sbp_elastic::Result<Vec<_>>>()?;
        Some(combine_l2(&parts))
    } else {
        None
    };

    let blocks: Vec<BlockInfo> = model
        .blocks
        .iter()
        .map(|b| BlockInfo {
            tag: b.tag.name().into(),
            lattice: [b.lattice.n1, b.lattice.n2, b.lattice.n3],
            periodic: b.lattice.periodic,
            h: b.h,
            kappa: b.kappa(),
            min_h: b.min_h(),
        })
        .collect();
    if final_error.is_some() {
        files.push("error.csv".into());
    }
    files.push("manifest.json".into());
    let manifest = Manifest {
        scenario: scenario.name.as_str().into(),
        edge: edge_name(cfg.edge).into(),
        kappa_max: blocks.iter().map(|b| b.kappa).fold(0.0, f64::max),
        blocks,
        dt,
        steps,
        t_end: lv.t,
        cfl: time.cfl,
        solver,
        solver_stats: stats,
        energy,
        receivers: scenario.receivers.clone(),
        snapshots,
        threads: rayon::current_num_threads(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        files,
    };
    manifest.write(&dir.join("manifest.json"))?;
    if let Some(e) = &final_error {
        write_final_error(&dir.join("error.csv"), e)?;
    }
    Ok(RunOutcome { manifest, final_error })
}

fn write_final_error(path: &Path, e: &ErrorNorms) -> Result<()> {
    let mut t = Table::create(path, &["l2", "l2_reference_cube", "max"])?;
    t.row(&[e.l2.into(), e.l2_grid.into(), e.max.into()])?;
    t.finish()?;
    Ok(())
}
