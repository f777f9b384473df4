//! Random-loss window chain at a fixed loss rate `p`.
//!
//! Each packet is lost independently with probability `p`. Per round the flow
//! sends `floor(w)` packets; if any is lost the window is cut once to
//! `max(1, (1 - beta) w)`, otherwise it grows by [`aggregate_increment`].

use rand::Rng;
use rayon::prelude::*;

use crate::compound::{aggregate_increment, CompoundParams, LossRate};
use crate::error::{Error, Result};
use crate::fluid;
use crate::rng::{open01, stream_rng};
use crate::stats;

/// Number of batches used for batch-means confidence intervals.
pub const N_BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState {
    /// Window in packets, never below 1.
    pub w: f64,
    /// Rounds elapsed.
    pub round: u64,
}

impl ChainState {
    pub fn new(w: f64) -> Self {
        Self {
            w: w.max(1.0),
            round: 0,
        }
    }
}

/// One loss epoch of the embedded chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddedSample {
    /// Window just after the reduction.
    pub v: f64,
    /// Rounds since the previous loss round, counting the loss round itself.
    pub g: u64,
    /// Packets sent since the previous loss round, up to and including the
    /// first lost packet.
    pub packets: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean_window: f64,
    /// Packets per second, `(1 - p) * mean_window / R`.
    pub goodput: f64,
    /// Rounds that entered the average.
    pub n_rounds: u64,
    pub n_losses: u64,
    /// 95% batch-means half-width on `mean_window`.
    pub ci_halfwidth: f64,
}

/// Probability that at least one of the `floor(w)` packets of a round is lost.
pub fn loss_probability(w: f64, p: LossRate) -> f64 {
    -f64::exp_m1(w.floor() * (-p.get()).ln_1p())
}

/// Conditional mean change of the window from `j`, in the form used for the
/// positive-recurrence drift argument:
/// `-beta j (1 - (1-p)^j) + alpha j^k (1-p)^j`.
pub fn mean_drift(j: f64, p: LossRate, params: &CompoundParams) -> f64 {
    let survive = (j * (-p.get()).ln_1p()).exp();
    -params.beta * j * (1.0 - survive) + params.alpha * j.powf(params.k) * survive
}

/// Advance one round using the uniform draw `u`; loss iff `u < P(loss)`.
pub fn step_window_with(
    state: ChainState,
    p: LossRate,
    u: f64,
    params: &CompoundParams,
) -> (ChainState, bool) {
    let loss = u < loss_probability(state.w, p);
    let w = if loss {
        ((1.0 - params.beta) * state.w).max(1.0)
    } else {
        state.w + aggregate_increment(state.w, params)
    };
    (
        ChainState {
            w,
            round: state.round + 1,
        },
        loss,
    )
}

pub fn step_window<R: Rng + ?Sized>(
    state: ChainState,
    p: LossRate,
    rng: &mut R,
    params: &CompoundParams,
) -> (ChainState, bool) {
    step_window_with(state, p, open01(rng), params)
}

/// Position (1-based) of the first lost packet in a round of `n` packets,
/// given that the round had a loss. Inverse transform of the truncated
/// geometric law.
pub fn first_lost_packet(n: u64, p: LossRate, u: f64) -> u64 {
    let log_keep = (-p.get()).ln_1p();
    let any_loss = -f64::exp_m1(n as f64 * log_keep);
    let j = ((-u * any_loss).ln_1p() / log_keep).ceil();
    (j as u64).clamp(1, n.max(1))
}

/// Time to the first packet loss from window `w0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstLoss {
    /// Round in which the loss happened (1-based).
    pub rounds: u64,
    /// Loss time in RTTs, resolved to the lost packet's position in its round.
    pub time: f64,
    /// Window just before the loss round.
    pub w_at_loss: f64,
}

pub fn time_to_first_loss<R: Rng + ?Sized>(
    w0: f64,
    p: LossRate,
    rng: &mut R,
    params: &CompoundParams,
) -> FirstLoss {
    let mut state = ChainState::new(w0);
    loop {
        let before = state.w;
        let (next, loss) = step_window(state, p, rng, params);
        if loss {
            let n = before.floor() as u64;
            let j = first_lost_packet(n, p, open01(rng));
            return FirstLoss {
                rounds: next.round,
                time: (next.round - 1) as f64 + j as f64 / n as f64,
                w_at_loss: before,
            };
        }
        state = next;
    }
}

/// Run-length settings for one replica of [`simulate_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimSettings {
    pub n_rounds: u64,
    pub warmup_rounds: u64,
    pub seed: u64,
    pub stream: u64,
}

impl SimSettings {
    /// Warmup defaults to 10% of the run.
    pub fn new(n_rounds: u64, seed: u64) -> Self {
        Self {
            n_rounds,
            warmup_rounds: n_rounds / 10,
            seed,
            stream: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_rounds < self.warmup_rounds.saturating_mul(10) {
            return Err(Error::WarmupDominated {
                n_rounds: self.n_rounds,
                warmup_rounds: self.warmup_rounds,
            });
        }
        if self.n_rounds - self.warmup_rounds < N_BATCHES as u64 {
            return Err(Error::InvalidArgument(format!(
                "need at least {N_BATCHES} post-warmup rounds, got {}",
                self.n_rounds - self.warmup_rounds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub estimate: SimEstimate,
    /// Loss epochs whose preceding loss also fell after warmup.
    pub samples: Vec<EmbeddedSample>,
    pub batch_means: Vec<f64>,
}

/// Simulate the window chain from `w = 1` and average the window over the
/// post-warmup rounds.
pub fn simulate_chain(
    p: LossRate,
    settings: &SimSettings,
    params: &CompoundParams,
) -> Result<ChainRun> {
    settings.validate()?;
    let mut rng = stream_rng(settings.seed, settings.stream);

    let counted = settings.n_rounds - settings.warmup_rounds;
    let batch_len = counted / N_BATCHES as u64;
    let mut batch_sum = [0.0f64; N_BATCHES];
    let mut batch_cnt = [0u64; N_BATCHES];

    let mut samples = Vec::new();
    let mut n_losses = 0u64;
    let mut state = ChainState::new(1.0);
    let mut rounds_in_cycle = 0u64;
    let mut packets_in_cycle = 0u64;
    let mut cycle_open = false;

    for n in 0..settings.n_rounds {
        let in_window = n >= settings.warmup_rounds;
        if in_window {
            let b = (((n - settings.warmup_rounds) / batch_len) as usize).min(N_BATCHES - 1);
            batch_sum[b] += state.w;
            batch_cnt[b] += 1;
        }
        let sent = state.w.floor() as u64;
        let (next, loss) = step_window(state, p, &mut rng, params);
        rounds_in_cycle += 1;
        if loss {
            packets_in_cycle += first_lost_packet(sent, p, open01(&mut rng));
            if cycle_open {
                samples.push(EmbeddedSample {
                    v: next.w,
                    g: rounds_in_cycle,
                    packets: packets_in_cycle,
                });
            }
            if in_window {
                n_losses += 1;
                cycle_open = true;
            }
            rounds_in_cycle = 0;
            packets_in_cycle = 0;
        } else {
            packets_in_cycle += sent;
        }
        state = next;
    }

    let total: f64 = batch_sum.iter().sum();
    let mean_window = total / counted as f64;
    let batch_means: Vec<f64> = batch_sum
        .iter()
        .zip(&batch_cnt)
        .map(|(s, &c)| s / c as f64)
        .collect();
    Ok(ChainRun {
        estimate: SimEstimate {
            mean_window,
            goodput: goodput(mean_window, p.get(), params),
            n_rounds: counted,
            n_losses,
            ci_halfwidth: stats::ci_halfwidth(&batch_means),
        },
        samples,
        batch_means,
    })
}

/// Run `n_replicas` independent replicas (streams `0..n_replicas`) in parallel
/// and merge them. The merged interval pools all replicas' batch means.
pub fn simulate_replicas(
    p: LossRate,
    settings: &SimSettings,
    n_replicas: u64,
    params: &CompoundParams,
) -> Result<SimEstimate> {
    if n_replicas == 0 {
        return Err(Error::InvalidArgument("need at least one replica".into()));
    }
    let runs: Vec<ChainRun> = (0..n_replicas)
        .into_par_iter()
        .map(|stream| {
            let s = SimSettings {
                stream,
                ..*settings
            };
            simulate_chain(p, &s, params)
        })
        .collect::<Result<_>>()?;

    let n_rounds: u64 = runs.iter().map(|r| r.estimate.n_rounds).sum();
    let mean_window = runs
        .iter()
        .map(|r| r.estimate.mean_window * r.estimate.n_rounds as f64)
        .sum::<f64>()
        / n_rounds as f64;
    let pooled: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.batch_means.iter().copied())
        .collect();
    Ok(SimEstimate {
        mean_window,
        goodput: goodput(mean_window, p.get(), params),
        n_rounds,
        n_losses: runs.iter().map(|r| r.estimate.n_losses).sum(),
        ci_halfwidth: stats::ci_halfwidth(&pooled),
    })
}

/// Packets per second delivered, `(1 - p) * mean_window / R`. Accepts `p = 0`.
pub fn goodput(mean_window: f64, p: f64, params: &CompoundParams) -> f64 {
    (1.0 - p) * mean_window / params.rtt
}

/// Largest acceptable probability mass in the truncation state.
pub const TAIL_MASS_LIMIT: f64 = 1e-6;
/// L1 change between successive iterates at which power iteration stops.
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 1_000_000;

/// Stationary law of the integer window chain on `1..=w_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDist {
    /// `probs[i]` is the probability of window `i + 1`.
    pub probs: Vec<f64>,
    pub w_max: usize,
    pub iterations: usize,
    pub residual: f64,
}

impl StationaryDist {
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, q)| (i + 1) as f64 * q)
            .sum()
    }

    /// Mass sitting at the truncation bound.
    pub fn tail_mass(&self) -> f64 {
        *self.probs.last().unwrap_or(&0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// `16 x*_p` rounded up to a power of two.
pub fn default_w_max(p: LossRate, params: &CompoundParams) -> usize {
    let target = (16.0 * fluid::fixed_point(p, params)).ceil().max(2.0) as usize;
    target.next_power_of_two()
}

pub fn stationary_solver(
    p: LossRate,
    w_max: usize,
    params: &CompoundParams,
) -> Result<StationaryDist> {
    stationary_solver_with(p, w_max, MAX_ITERATIONS, params)
}

/// Power iteration on the integerized chain.
///
/// From state `j` the chain moves up to `min(w_max, j + round(max(1, alpha j^k)))`
/// (ties to even) with probability `(1-p)^j`, and down to
/// `max(1, floor((1-beta) j))` otherwise.
pub fn stationary_solver_with(
    p: LossRate,
    w_max: usize,
    max_iterations: usize,
    params: &CompoundParams,
) -> Result<StationaryDist> {
    if w_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "w_max must be >= 2, got {w_max}"
        )));
    }
    let log_keep = (-p.get()).ln_1p();
    let mut up = Vec::with_capacity(w_max);
    let mut down = Vec::with_capacity(w_max);
    let mut p_up = Vec::with_capacity(w_max);
    for j in 1..=w_max {
        let jf = j as f64;
        let inc = (params.alpha * jf.powf(params.k))
            .max(1.0)
            .round_ties_even() as usize;
        up.push((j + inc).min(w_max) - 1);
        down.push((((1.0 - params.beta) * jf).floor() as usize).max(1) - 1);
        p_up.push((jf * log_keep).exp());
    }

    let mut pi = vec![0.0; w_max];
    pi[0] = 1.0;
    let mut next = vec![0.0; w_max];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iterations {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (j, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            next[up[j]] += mass * p_up[j];
            next[down[j]] += mass * (1.0 - p_up[j]);
        }
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        iterations += 1;
        if residual < RESIDUAL_TOL {
            break;
        }
    }
    if residual >= RESIDUAL_TOL {
        return Err(Error::NotConverged {
            iterations,
            residual,
        });
    }

    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    let dist = StationaryDist {
        probs: pi,
        w_max,
        iterations,
        residual,
    };
    if dist.tail_mass() >= TAIL_MASS_LIMIT {
        return Err(Error::TailMass {
            w_max,
            mass: dist.tail_mass(),
        });
    }
    Ok(dist)
}

/// [`stationary_solver`] from [`default_w_max`], doubling the bound on a
/// tail-mass failure.
pub fn stationary_auto(p: LossRate, params: &CompoundParams) -> Result<StationaryDist> {
    const MAX_DOUBLINGS: u32 = 6;
    let mut w_max = default_w_max(p, params);
    let mut attempt = 0;
    loop {
        match stationary_solver(p, w_max, params) {
            Err(Error::TailMass { .. }) if attempt < MAX_DOUBLINGS => {
                w_max *= 2;
                attempt += 1;
            }
            other => return other,
        }
    }
}
