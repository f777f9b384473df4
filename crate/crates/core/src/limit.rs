//! Small-`p` limit of the loss-epoch chain.
//!
//! After scaling windows by `p^{1/(2-k)}` and time by `p^{(1-k)/(2-k)}`, the
//! inter-loss time started from scaled window `x` converges to a law `Gbar_x`
//! whose negative log-ccdf is a quintic in `y`, and post-loss windows follow
//! `V_n = (1-beta) (V_{n-1}^{1-k} + alpha (1-k) Gbar_{V_{n-1}})^{1/(1-k)}`.
//! The stationary mean of `Gbar_V` fixes the constant in
//! `E[W(p)] ~ p^{-1/(2-k)} / E[Gbar]`.

use std::io::Write;

use rand::Rng;

use crate::compound::{CompoundParams, LossRate};
use crate::error::{Error, Result};
use crate::rng::{open01, stream_rng};
use crate::stats;
use crate::stochastic::{goodput, N_BATCHES};

/// Reference value of `E[Gbar]` quoted with the published results.
pub const PUBLISHED_MEAN_GBAR: f64 = 3.9002;
/// Window coefficient quoted next to the closed-form approximation.
pub const PUBLISHED_COEFFICIENT: f64 = 0.2564;
/// Window coefficient used in the published comparison tables.
pub const TABLE_COEFFICIENT: f64 = 0.2570;

pub const DEFAULT_N: usize = 10_000;
pub const DEFAULT_BURN_IN: usize = 100;

const ROOT_TOL: f64 = 1e-12;
const MAX_ROOT_ITERATIONS: usize = 200;

/// Law of the scaled inter-loss time started from scaled window `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbarLaw {
    pub x: f64,
    /// Coefficients of `y, y^2, .., y^5` in `-log P(Gbar_x >= y)`.
    pub coeffs: [f64; 5],
}

impl GbarLaw {
    pub fn new(x: f64, params: &CompoundParams) -> Result<Self> {
        if !(x >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scaled window must be >= 0, got {x}"
            )));
        }
        let a = params.growth_rate();
        let k = params.k;
        let coeffs = [
            x,
            2.0 * a * x.powf(k),
            2.0 * a.powi(2) * x.powf(2.0 * k - 1.0),
            a.powi(3) * x.powf(3.0 * k - 2.0),
            a.powi(4) * x.powf(4.0 * k - 3.0) / 5.0,
        ];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "Gbar coefficients are not finite at x = {x} for k = {k}"
            )));
        }
        Ok(Self { x, coeffs })
    }

    /// Cumulative hazard `-log P(Gbar_x >= y)`.
    pub fn hazard(&self, y: f64) -> f64 {
        let [c1, c2, c3, c4, c5] = self.coeffs;
        y * (c1 + y * (c2 + y * (c3 + y * (c4 + y * c5))))
    }

    fn hazard_rate(&self, y: f64) -> f64 {
        let [c1, c2, c3, c4, c5] = self.coeffs;
        c1 + y * (2.0 * c2 + y * (3.0 * c3 + y * (4.0 * c4 + y * 5.0 * c5)))
    }

    pub fn log_ccdf(&self, y: f64) -> f64 {
        -self.hazard(y)
    }

    pub fn ccdf(&self, y: f64) -> f64 {
        (-self.hazard(y)).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        -f64::exp_m1(-self.hazard(y.max(0.0)))
    }

    /// Inverse transform: the `y >= 0` with `P(Gbar_x >= y) = u`.
    pub fn sample(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::UniformOutOfRange(u));
        }
        let target = -u.ln();
        Ok(self.solve_hazard(target))
    }

    /// Root of `hazard(y) = target` for `target > 0`. The hazard is a
    /// polynomial with nonnegative coefficients, so it is increasing and convex
    /// and Newton from the right end of the bracket cannot overshoot; bisection
    /// is kept as a fallback.
    fn solve_hazard(&self, target: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.hazard(hi) < target {
            lo = hi;
            hi *= 2.0;
        }
        let mut y = hi;
        for _ in 0..MAX_ROOT_ITERATIONS {
            let f = self.hazard(y) - target;
            if f.abs() < ROOT_TOL {
                return y;
            }
            if f > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let slope = self.hazard_rate(y);
            let newton = y - f / slope;
            y = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return y;
            }
        }
        y
    }
}

/// `log P(Gbar_x >= y)`.
pub fn gbar_log_ccdf(x: f64, y: f64, params: &CompoundParams) -> Result<f64> {
    Ok(GbarLaw::new(x, params)?.log_ccdf(y))
}

pub fn sample_gbar(x: f64, u: f64, params: &CompoundParams) -> Result<f64> {
    GbarLaw::new(x, params)?.sample(u)
}

/// Next post-loss scaled window after scaled time `g` from `v`.
pub fn step_vbar(v: f64, g: f64, params: &CompoundParams) -> f64 {
    let one_minus_k = 1.0 - params.k;
    (1.0 - params.beta) * (v.powf(one_minus_k) + params.growth_rate() * g).powf(1.0 / one_minus_k)
}

/// One transition of the limit chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitStep {
    pub v: f64,
    pub g: f64,
    pub v_next: f64,
}

/// Run `n` steps of the limit chain from `v0`, drawing each inter-loss time
/// with `draw(v)`.
pub fn run_limit_chain(
    n: usize,
    v0: f64,
    params: &CompoundParams,
    mut draw: impl FnMut(f64) -> Result<f64>,
) -> Result<Vec<LimitStep>> {
    let mut v = v0;
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let g = draw(v)?;
        let v_next = step_vbar(v, g, params);
        steps.push(LimitStep { v, g, v_next });
        v = v_next;
    }
    Ok(steps)
}

fn inverse_transform_draw<'a, R: Rng + ?Sized>(
    rng: &'a mut R,
    params: &'a CompoundParams,
) -> impl FnMut(f64) -> Result<f64> + 'a {
    move |v| GbarLaw::new(v, params)?.sample(open01(rng))
}

/// Seeded limit chain using inverse-transform sampling of `Gbar`.
pub fn sample_limit_chain(
    n: usize,
    v0: f64,
    seed: u64,
    params: &CompoundParams,
) -> Result<Vec<LimitStep>> {
    if !(v0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("v0 must be >= 0, got {v0}")));
    }
    let mut rng = stream_rng(seed, 0);
    run_limit_chain(n, v0, params, inverse_transform_draw(&mut rng, params))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbarEstimate {
    pub mean_g: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    /// 95% batch-means half-width.
    pub ci_halfwidth: f64,
}

impl GbarEstimate {
    /// `1 / mean_g`, the coefficient of `p^{-1/(2-k)}` in the mean window.
    pub fn coefficient(&self) -> f64 {
        1.0 / self.mean_g
    }
}

/// Average of the inter-loss times `g_i` for `i` in `(burn_in, n]`.
pub fn estimate_from_steps(steps: &[LimitStep], burn_in: usize) -> Result<GbarEstimate> {
    if steps.len() <= burn_in || steps.len() - burn_in < N_BATCHES {
        return Err(Error::InvalidArgument(format!(
            "need at least {N_BATCHES} samples after burn-in, got n = {} with burn_in = {burn_in}",
            steps.len()
        )));
    }
    let g: Vec<f64> = steps[burn_in..].iter().map(|s| s.g).collect();
    Ok(GbarEstimate {
        mean_g: g.iter().sum::<f64>() / g.len() as f64,
        n_samples: steps.len(),
        burn_in,
        ci_halfwidth: stats::ci_halfwidth(&stats::batch_means(&g, N_BATCHES)),
    })
}

pub fn estimate_mean_gbar(
    n: usize,
    burn_in: usize,
    v0: f64,
    seed: u64,
    params: &CompoundParams,
) -> Result<GbarEstimate> {
    estimate_from_steps(&sample_limit_chain(n, v0, seed, params)?, burn_in)
}

/// `sum_{i<=m} g_i / m` for `m = 1..=n`, no burn-in.
pub fn running_mean_trace(
    n: usize,
    v0: f64,
    seed: u64,
    params: &CompoundParams,
) -> Result<Vec<f64>> {
    let steps = sample_limit_chain(n, v0, seed, params)?;
    let mut sum = 0.0;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            sum += s.g;
            sum / (i + 1) as f64
        })
        .collect())
}

/// CSV with header `n,running_mean_g,v0`, one block per initial condition.
pub fn write_running_mean_csv<W: Write>(traces: &[(f64, Vec<f64>)], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["n", "running_mean_g", "v0"])?;
    for (v0, trace) in traces {
        for (i, m) in trace.iter().enumerate() {
            wtr.write_record([(i + 1).to_string(), m.to_string(), v0.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Post-burn-in scaled post-loss windows `V_i`, `i` in `(burn_in, n]`.
pub fn stationary_vbar_samples(
    n: usize,
    burn_in: usize,
    v0: f64,
    seed: u64,
    params: &CompoundParams,
) -> Result<Vec<f64>> {
    if n <= burn_in {
        return Err(Error::InvalidArgument(format!(
            "n = {n} must exceed burn_in = {burn_in}"
        )));
    }
    let steps = sample_limit_chain(n, v0, seed, params)?;
    Ok(steps[burn_in..].iter().map(|s| s.v_next).collect())
}

/// `p^{-1/(2-k)} / mean_g`.
pub fn approx_avg_window(p: LossRate, mean_g: f64, params: &CompoundParams) -> f64 {
    assert!(mean_g > 0.0, "mean_g must be > 0, got {mean_g}");
    p.get().powf(-params.window_exponent()) / mean_g
}

pub fn approx_goodput(p: LossRate, mean_g: f64, params: &CompoundParams) -> f64 {
    goodput(approx_avg_window(p, mean_g, params), p.get(), params)
}
