//! Deterministic-loss fluid model.
//!
//! Between drops the window follows `dW/dt = alpha * W^k / R`. A drop happens
//! each time `1/p` packets have been sent, after which the window is scaled by
//! `1 - beta`. Everything here is closed form.

use std::io::Write;

use crate::compound::{CompoundParams, LossRate};
use crate::error::Result;

/// One inter-drop period of the fluid path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidCycle {
    /// Window right after the previous drop.
    pub x_start: f64,
    /// Window just before the next drop.
    pub x_end: f64,
    /// Cycle duration in seconds.
    pub tau: f64,
    /// Packets sent during the cycle, `1/p`.
    pub packets: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FluidTrajectory {
    /// Post-drop windows, starting with the initial window.
    pub drop_epoch_windows: Vec<f64>,
    /// `(seconds, window)` pairs. Each drop appears twice: pre- then post-drop.
    pub samples: Vec<(f64, f64)>,
}

/// Window after `t` seconds without loss, starting from `x0`.
pub fn window_at(x0: f64, t: f64, params: &CompoundParams) -> f64 {
    if t == 0.0 {
        return x0;
    }
    let one_minus_k = 1.0 - params.k;
    (x0.powf(one_minus_k) + params.growth_rate() * t / params.rtt).powf(1.0 / one_minus_k)
}

/// Cycle that starts at window `x` and ends once `1/p` packets are out.
pub fn cycle(x: f64, p: LossRate, params: &CompoundParams) -> FluidCycle {
    let two_minus_k = 2.0 - params.k;
    let one_minus_k = 1.0 - params.k;
    let x_end =
        (x.powf(two_minus_k) + params.alpha * two_minus_k / p.get()).powf(1.0 / two_minus_k);
    let tau = params.rtt * (x_end.powf(one_minus_k) - x.powf(one_minus_k)) / params.growth_rate();
    FluidCycle {
        x_start: x,
        x_end,
        tau,
        packets: 1.0 / p.get(),
    }
}

/// Post-drop window of the next cycle.
pub fn drop_map(x: f64, p: LossRate, params: &CompoundParams) -> f64 {
    (1.0 - params.beta) * cycle(x, p, params).x_end
}

/// The unique post-drop window `x*_p` left invariant by [`drop_map`].
pub fn fixed_point(p: LossRate, params: &CompoundParams) -> f64 {
    let two_minus_k = 2.0 - params.k;
    let keep = (1.0 - params.beta).powf(two_minus_k);
    (params.alpha * two_minus_k * keep / (p.get() * (1.0 - keep))).powf(1.0 / two_minus_k)
}

/// Duration of the periodic cycle in seconds.
pub fn period(p: LossRate, params: &CompoundParams) -> f64 {
    let one_minus_k = 1.0 - params.k;
    let keep = (1.0 - params.beta).powf(one_minus_k);
    (1.0 - keep) * params.rtt / (params.growth_rate() * keep)
        * fixed_point(p, params).powf(one_minus_k)
}

/// Time-average window of the periodic fluid path (the fluid response function).
pub fn fluid_avg_window(p: LossRate, params: &CompoundParams) -> f64 {
    let k = params.k;
    let beta = params.beta;
    let ratio = (1.0 - k) / (2.0 - k);
    (1.0 - k)
        * (params.alpha / p.get()).powf(1.0 / (2.0 - k))
        * (1.0 - (1.0 - beta).powf(2.0 - k)).powf(ratio)
        / ((1.0 - (1.0 - beta).powf(1.0 - k)) * (2.0 - k).powf(ratio))
}

/// Iterate the drop map `n_cycles` times from `x0`.
///
/// With `sample_dt = Some(dt)`, the path is also sampled every `dt` seconds
/// within each cycle, plus the exact pre/post values at every drop.
pub fn simulate_fluid(
    x0: f64,
    p: LossRate,
    n_cycles: usize,
    sample_dt: Option<f64>,
    params: &CompoundParams,
) -> FluidTrajectory {
    assert!(x0 >= 1.0, "initial window must be >= 1, got {x0}");
    if let Some(dt) = sample_dt {
        assert!(dt > 0.0, "sample_dt must be > 0, got {dt}");
    }

    let mut traj = FluidTrajectory {
        drop_epoch_windows: Vec::with_capacity(n_cycles + 1),
        samples: Vec::new(),
    };
    traj.drop_epoch_windows.push(x0);

    let mut x = x0;
    let mut t0 = 0.0;
    for _ in 0..n_cycles {
        let c = cycle(x, p, params);
        if let Some(dt) = sample_dt {
            // the post-drop sample of the previous cycle already sits at t0
            let mut j = u64::from(!traj.samples.is_empty());
            loop {
                let local = j as f64 * dt;
                if local >= c.tau {
                    break;
                }
                traj.samples.push((t0 + local, window_at(x, local, params)));
                j += 1;
            }
            traj.samples.push((t0 + c.tau, c.x_end));
            traj.samples
                .push((t0 + c.tau, (1.0 - params.beta) * c.x_end));
        }
        t0 += c.tau;
        x = (1.0 - params.beta) * c.x_end;
        traj.drop_epoch_windows.push(x);
    }
    traj
}

/// CSV with header `t_seconds,window_packets`.
pub fn write_trajectory_csv<W: Write>(traj: &FluidTrajectory, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t_seconds", "window_packets"])?;
    for (t, w) in &traj.samples {
        wtr.write_record([t.to_string(), w.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
