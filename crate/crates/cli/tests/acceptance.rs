//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines reach the terminal under
//! plain `cargo test`. `ACCEPTANCE_ONLY=1,4` restricts the run.

use std::time::Instant;

use sbp_elastic::interface::EdgeRestriction;
use sbp_elastic::krylov::{Method, ResidualNorm, SolverConfig};
use sbp_elastic::scenarios::{Scenario, SourceParams};
use sbp_elastic::timestepper::TimeConfig;
use sbp_elastic_cli::experiments::{self, BenchResult, EnergyRun};

const SEED: u64 = 20180917;

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn within(x: f64, target: f64, frac: f64) -> bool {
    (x / target - 1.0).abs() <= frac
}

fn report(n: usize, ok: bool, detail: String) {
    println!("criterion {n}: {} | {detail}", verdict(ok));
}

fn sbp_identities() {
    let t = Instant::now();
    let rows = experiments::sbp_check(&[8, 12, 16, 24, 48], 100, SEED).expect("SBP check runs");
    let secs = t.elapsed().as_secs_f64();
    let worst = rows.iter().map(|r| r.worst()).fold(0.0, f64::max);
    let min_eig = rows.iter().map(|r| r.min_eigenvalue).fold(f64::INFINITY, f64::min);
    let ok = worst < 1e-12 && min_eig > -1e-12 && secs < 5.0;
    report(1, ok, format!("worst relative identity/symmetry residual {worst:.2e}; min eig(M)/max {min_eig:.2e}; {secs:.2} s"));
}

fn interface_operators() {
    let t = Instant::now();
    let r = experiments::interface_check(1000, SEED).expect("interface check runs");
    let secs = t.elapsed().as_secs_f64();
    let adj = r.adjoint.iter().map(|a| a.1).fold(0.0, f64::max);
    let ok = r.restriction_vs_transpose == 0.0 && adj < 1e-12 && r.bicubic < 1e-12 && secs < 10.0;
    let per: Vec<String> = r.adjoint.iter().map(|(e, d)| format!("{}={d:.1e}", experiments::edge_name(*e))).collect();
    report(
        2,
        ok,
        format!("max|R - P^T/4| {:.1e}; adjoint defect over {} pairs [{}]; bicubic error {:.1e}; {secs:.2} s", r.restriction_vs_transpose, r.pairs, per.join(", "), r.bicubic),
    );
}

fn convergence() {
    let t = Instant::now();
    let run = |iv| experiments::mms_run(iv, false, EdgeRestriction::default(), SolverConfig::default(), 1.3).expect("MMS runs");
    let (a, b) = (run(24), run(48));
    let target = 2.2227e-3;
    let rate = (a.global.l2_grid / b.global.l2_grid).log2();
    let rate_j = (a.global.l2 / b.global.l2).log2();
    let ok = within(a.global.l2_grid, target, 0.05) && (3.7..=4.3).contains(&rate);
    report(
        3,
        ok,
        format!(
            "L2 at 2pi/24 {:.4e} (target 2.2227e-3, {:+.1}%), rate {rate:.2}; coarse {:.4e} fine {:.4e}; Jacobian-weighted L2 {:.4e} rate {rate_j:.2}; {:.0} s",
            a.global.l2_grid,
            100.0 * (a.global.l2_grid / target - 1.0),
            a.coarse.l2_grid,
            a.fine.l2_grid,
            a.global.l2,
            t.elapsed().as_secs_f64()
        ),
    );
}

fn mean(r: &BenchResult, norm: ResidualNorm) -> [f64; 3] {
    let its = &r.iterations.iter().find(|(n, _)| *n == norm).expect("both norms benchmarked").1;
    [its[0].mean, its[1].mean, its[2].mean]
}

fn solvers() {
    let t = Instant::now();
    let r = experiments::solve_bench(24, EdgeRestriction::Transpose, 3, 1e-7, true).expect("benchmark runs");
    let conds = [37.78, 24.96, 4.01];
    let iters = [44.0, 13.0, 9.0];
    let its = mean(&r, ResidualNorm::Max);
    let its_e = mean(&r, ResidualNorm::Euclidean);
    let cond_ok = (0..3).all(|i| within(r.cond_l1[i], conds[i], 0.10));
    let its_ok = (0..3).all(|i| within(its[i], iters[i], 0.20));
    let degraded = r.cond_l1[2] < r.cond_l1[0] / 5.0 && its[2] < its[0] / 3.0;
    report(
        4,
        cond_ok && its_ok,
        format!(
            "{} unknowns; cond_1 K/D/D^-1K {:.2}/{:.2}/{:.2} (cond_2 {:.2}/{:.2}/{:.2}); iterations CG/BJ/PCG {:.1}/{:.1}/{:.1} max-norm, {:.1}/{:.1}/{:.1} Euclidean; conditions {}, iterations {}; fallback clause {}; {:.0} s",
            r.unknowns,
            r.cond_l1[0], r.cond_l1[1], r.cond_l1[2],
            r.cond_l2[0], r.cond_l2[1], r.cond_l2[2],
            its[0], its[1], its[2],
            its_e[0], its_e[1], its_e[2],
            verdict(cond_ok),
            verdict(its_ok),
            if degraded { "holds" } else { "fails" },
            t.elapsed().as_secs_f64()
        ),
    );
}

fn energy_run(cfl: f64, steps: usize, stride: usize) -> EnergyRun {
    let s = Scenario::energy(false);
    let solver = SolverConfig { method: Method::Lu, ..Default::default() };
    let (model, p) = experiments::two_block(&s, None, EdgeRestriction::default(), solver).expect("energy model");
    let (dt, _) = model.time_grid(&TimeConfig { cfl, t_end: s.t_end, dt: None }).expect("time grid");
    experiments::energy_run(&model, p.as_ref(), dt, steps, stride).expect("energy run")
}

fn energy(r: &EnergyRun, secs: f64) {
    let ok = r.steps >= 2000 && r.diverged_at.is_none() && r.max_drift < 1e-10;
    report(5, ok, format!("{} steps of {:.6e}; max relative drift {:.2e}; {secs:.0} s", r.steps, r.dt, r.max_drift));
}

fn transparency() {
    let t = Instant::now();
    let c = experiments::source_comparison(SourceParams::reduced(), EdgeRestriction::default(), 1.3, true).expect("source runs");
    let u2 = c.receivers.iter().map(|r| r.u2_ratio).fold(0.0, f64::max);
    let below = c.receivers.iter().position(|r| r.below_interface).expect("a receiver below the interface");
    let diff = c.receivers[below].difference;
    let coarse = c.coarse_uniform.as_ref().map_or(f64::NAN, |d| d[below]);
    let all: Vec<String> = c.receivers.iter().map(|r| format!("{:.1}%", 100.0 * r.difference)).collect();
    report(
        6,
        u2 < 1e-9 && diff < 0.02,
        format!(
            "max u2/max|u3| {u2:.1e}; refined vs uniform-fine at z={} : {:.1}% (all receivers [{}]); uniform-coarse vs uniform-fine there {:.1}%; {} steps; {:.0} s",
            c.receivers[below].x[2],
            100.0 * diff,
            all.join(", "),
            100.0 * coarse,
            c.steps,
            t.elapsed().as_secs_f64()
        ),
    );
}

fn stability(stable: &EnergyRun) {
    let t = Instant::now();
    let hot = energy_run(2.6, 500, 10);
    let ok_low = stable.steps >= 2000 && stable.diverged_at.is_none();
    let ok_high = hot.diverged_at.is_some();
    report(
        7,
        ok_low && ok_high,
        format!(
            "C=1.3: {} steps, max E/E0 {:.6}; C=2.6: {} (max E/E0 {:.3e} over {} steps); {:.0} s",
            stable.steps,
            stable.max_growth,
            match hot.diverged_at {
                Some(k) => format!("blew up at step {k}"),
                None => "bounded".into(),
            },
            hot.max_growth,
            hot.steps,
            t.elapsed().as_secs_f64()
        ),
    );
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let want = |n: usize| only.as_ref().map_or(true, |o| o.contains(&n));
    let clock = Instant::now();
    if want(1) {
        sbp_identities();
    }
    if want(2) {
        interface_operators();
    }
    if want(3) {
        convergence();
    }
    if want(4) {
        solvers();
    }
    let t = Instant::now();
    let stable = (want(5) || want(7)).then(|| energy_run(1.3, 2000, 50));
    let secs = t.elapsed().as_secs_f64();
    if let (true, Some(r)) = (want(5), stable.as_ref()) {
        energy(r, secs);
    }
    if want(6) {
        transparency();
    }
    if want(7) {
        stability(stable.as_ref().expect("stable run computed"));
    }
    println!("acceptance suite finished in {:.0} s", clock.elapsed().as_secs_f64());
}
