//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use compound_tput::harness::{self, ExperimentConfig, Model};
use compound_tput::limit::{self, GbarLaw};
use compound_tput::rng::{open01, stream_rng};
use compound_tput::stochastic::{self, SimSettings};
use compound_tput::{compound, fluid, stats, CompoundParams, LossRate};

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn lr(p: f64) -> LossRate {
    LossRate::new(p).unwrap()
}

fn fluid_table() -> Outcome {
    let params = CompoundParams::default();
    let targets = [
        (1e-2, 10.16),
        (1e-3, 64.12),
        (1e-4, 404.60),
        (3e-5, 1060.05),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, want) in targets {
        let got = fluid::fluid_avg_window(lr(p), &params);
        let e = rel(got, want);
        pass &= e < 1e-3;
        parts.push(format!("p={p:e}: {got:.4} vs {want} ({:.3}%)", 100.0 * e));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn fluid_convergence() -> Outcome {
    let params = CompoundParams::default();
    let p = lr(1e-3);
    let target = fluid::fixed_point(p, &params);
    let mut pass = true;
    let mut parts = Vec::new();
    for x0 in [10.0, 100.0] {
        let traj = fluid::simulate_fluid(x0, p, 200, None, &params);
        let xs = &traj.drop_epoch_windows;
        // slack for roundoff once the iterates sit on x*
        let eps = 1e-12 * target;
        let dir = (target - x0).signum();
        let monotone = xs.windows(2).all(|w| {
            dir * (w[1] - w[0]) >= -eps && (w[1] - target).abs() <= (w[0] - target).abs() + eps
        });
        let hit = xs.iter().position(|x| (x - target).abs() < 1e-6);
        pass &= monotone && hit.is_some();
        parts.push(format!(
            "x0={x0}: monotone={monotone}, |x-x*|<1e-6 after {} cycles",
            hit.map_or("never".to_string(), |n| n.to_string())
        ));
    }
    Outcome {
        pass,
        detail: format!("x*={target:.6}; {}", parts.join("; ")),
    }
}

fn limit_estimator() -> (Outcome, f64) {
    let params = CompoundParams::default();
    let start = Instant::now();
    let ests: Vec<_> = [0.0, 0.1, 2.0]
        .iter()
        .map(|&v0| {
            limit::estimate_mean_gbar(limit::DEFAULT_N, limit::DEFAULT_BURN_IN, v0, SEED, &params)
                .unwrap()
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let in_band = ests.iter().all(|e| (3.82..=3.98).contains(&e.mean_g));
    let mut agree = true;
    for a in &ests {
        for b in &ests {
            agree &= (a.mean_g - b.mean_g).abs() <= a.ci_halfwidth + b.ci_halfwidth;
        }
    }
    let fast = elapsed < 1.0;
    let detail = format!(
        "mean_g = {} (band [3.82, 3.98]); agree within CI: {agree}; {elapsed:.3} s",
        ests.iter()
            .map(|e| format!("{:.4}±{:.4}", e.mean_g, e.ci_halfwidth))
            .collect::<Vec<_>>()
            .join(", ")
    );
    (
        Outcome {
            pass: in_band && agree && fast,
            detail,
        },
        ests[1].mean_g,
    )
}

fn approx_table(mean_g: f64) -> Outcome {
    let params = CompoundParams::default();
    let targets = [(1e-3, 64.54), (1e-4, 407.25), (3e-5, 1067.01)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, want) in targets {
        let got = limit::approx_avg_window(lr(p), mean_g, &params);
        let e = rel(got, want);
        pass &= e < 0.01;
        parts.push(format!("p={p:e}: {got:.2} vs {want} ({:.2}%)", 100.0 * e));
    }
    Outcome {
        pass,
        detail: format!("mean_g={mean_g:.4}; {}", parts.join("; ")),
    }
}

fn chain_estimate(p: f64) -> stochastic::SimEstimate {
    let settings = SimSettings::new(2_000_000, SEED);
    stochastic::simulate_replicas(lr(p), &settings, 8, &CompoundParams::default()).unwrap()
}

fn simulation(est: &stochastic::SimEstimate, secs: f64) -> Outcome {
    let ew = rel(est.mean_window, 63.46);
    let eg = rel(est.goodput, 633.95);
    Outcome {
        pass: ew < 0.03 && eg < 0.03,
        detail: format!(
            "mean window {:.3}±{:.3} vs 63.46 ({:.2}%), goodput {:.2} vs 633.95 ({:.2}%), {secs:.1} s",
            est.mean_window,
            est.ci_halfwidth,
            100.0 * ew,
            est.goodput,
            100.0 * eg
        ),
    }
}

fn stationary() -> Outcome {
    let dist = stochastic::stationary_auto(lr(1e-2), &CompoundParams::default()).unwrap();
    let e = rel(dist.mean(), 12.99);
    let tail = dist.tail_mass();
    let sum_err = (dist.total() - 1.0).abs();
    Outcome {
        pass: e < 0.04 && tail < 1e-6 && sum_err <= 1e-12,
        detail: format!(
            "mean {:.4} vs 12.99 ({:.2}%), tail mass {tail:.2e}, |sum-1| = {sum_err:.1e}, w_max={}",
            dist.mean(),
            100.0 * e,
            dist.w_max
        ),
    }
}

/// `[(x^{1/4} + a y)^5 - x^{5/4}] / (5a)`, evaluated without cancellation.
fn binomial_log_ccdf(x: f64, y: f64, a: f64) -> f64 {
    let diff = if x == 0.0 {
        (a * y).powi(5)
    } else {
        let r = x.powf(0.25);
        r.powi(5) * (5.0 * (a * y / r).ln_1p()).exp_m1()
    };
    -diff / (5.0 * a)
}

fn hazard_identity() -> Outcome {
    use rand::Rng;
    let params = CompoundParams::default();
    let a = params.alpha * (1.0 - params.k);
    let mut rng = stream_rng(SEED, 7);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let x = rng.gen_range(0.0..100.0);
        let y = rng.gen_range(0.0..20.0);
        let poly = limit::gbar_log_ccdf(x, y, &params).unwrap();
        let closed = binomial_log_ccdf(x, y, a);
        if closed != 0.0 {
            worst = worst.max(rel(poly, closed));
        }
    }
    Outcome {
        pass: worst < 1e-10,
        detail: format!("max relative error {worst:.2e} over 10^4 pairs"),
    }
}

fn sampler_law() -> Outcome {
    let params = CompoundParams::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, x) in [0.0, 1.0, 5.0].into_iter().enumerate() {
        let law = GbarLaw::new(x, &params).unwrap();
        let mut rng = stream_rng(SEED, 100 + i as u64);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| law.sample(open01(&mut rng)).unwrap())
            .collect();
        let d = stats::ks_distance(&draws, |y| law.cdf(y));
        pass &= d < 0.005;
        parts.push(format!("x={x}: KS {d:.5}"));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn distribution_witness() -> Outcome {
    let params = CompoundParams::default();
    let p = lr(1e-5);
    let n = 100_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, x) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let w0 = compound::unscale_window(x, p, params.k).floor();
        let law = GbarLaw::new(compound::scale_window(w0, p, params.k), &params).unwrap();
        let mut rng = stream_rng(SEED, 200 + i as u64);
        let times: Vec<f64> = (0..n)
            .map(|_| {
                compound::scale_time(
                    stochastic::time_to_first_loss(w0, p, &mut rng, &params).time,
                    p,
                    params.k,
                )
            })
            .collect();
        let d = stats::ks_distance(&times, |y| law.cdf(y));
        pass &= d < 0.05;
        parts.push(format!("x={x} (w0={w0}): KS {d:.4}"));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn scaling_collapse(at_1e3: &stochastic::SimEstimate) -> Outcome {
    let k = CompoundParams::default().k;
    let at_1e4 = chain_estimate(1e-4);
    let a = compound::scale_window(at_1e3.mean_window, lr(1e-3), k);
    let b = compound::scale_window(at_1e4.mean_window, lr(1e-4), k);
    let e = rel(a, b);
    Outcome {
        pass: e < 0.05,
        detail: format!("p=1e-3: {a:.4}, p=1e-4: {b:.4} ({:.2}%)", 100.0 * e),
    }
}

fn write_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut config = ExperimentConfig {
        p_list: vec![1e-2, 1e-3, 1e-4],
        seed: Some(SEED),
        baseline: Some(Model::Sim),
        ..ExperimentConfig::default()
    };
    config.sim.n_rounds = 200_000;
    config.sim.replicas = 4;
    config.output.out_dir = dir.to_path_buf();
    let rows = harness::run_tables(&config).unwrap();
    let mut buf = Vec::new();
    harness::write_tables_csv(&rows, &config, &mut buf).unwrap();
    fs::write(dir.join("tables.csv"), &buf).unwrap();
    harness::run_figures(&config).unwrap();

    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = write_outputs(a.path());
    let second = write_outputs(b.path());
    let names: Vec<_> = first.iter().map(|(n, _)| n.as_str()).collect();
    Outcome {
        pass: first == second && !first.is_empty(),
        detail: format!("{} files compared: {}", first.len(), names.join(", ")),
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, out: Outcome| {
        println!(
            "{} [{id:>2}] {name}: {}",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
        results.push((id, name, out));
    };

    report(1, "fluid response function", fluid_table());
    report(2, "fluid fixed-point convergence", fluid_convergence());
    let (out, mean_g) = limit_estimator();
    report(3, "limit-chain estimator", out);
    report(4, "closed-form approximation", approx_table(mean_g));
    let start = Instant::now();
    let at_1e3 = chain_estimate(1e-3);
    report(
        5,
        "stochastic simulation",
        simulation(&at_1e3, start.elapsed().as_secs_f64()),
    );
    report(6, "stationary solver", stationary());
    report(7, "hazard identity", hazard_identity());
    report(8, "sampler law", sampler_law());
    report(9, "inter-loss time convergence", distribution_witness());
    report(10, "scaling collapse", scaling_collapse(&at_1e3));
    report(11, "determinism", determinism());

    let failed: Vec<_> = results
        .iter()
        .filter(|r| !r.2.pass)
        .map(|r| r.0.to_string())
        .collect();
    println!(
        "{} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {}", failed.join(", "))
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
