//! Protocol constants, the per-RTT Compound update and the loss-rate scalings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// TCP Compound constants plus the (fixed) round-trip time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompoundParams {
    /// Gain of the delay-based increase `alpha * w^k`.
    pub alpha: f64,
    /// Multiplicative-decrease fraction.
    pub beta: f64,
    /// Window exponent of the delay-based increase.
    pub k: f64,
    /// Queuing threshold in packets.
    pub gamma: f64,
    /// Queue-drain gain applied to the delay component.
    pub zeta: f64,
    /// Round-trip time in seconds.
    pub rtt: f64,
}

impl Default for CompoundParams {
    fn default() -> Self {
        Self {
            alpha: 0.125,
            beta: 0.5,
            k: 0.75,
            gamma: 30.0,
            zeta: 1.0,
            rtt: 0.1,
        }
    }
}

impl CompoundParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be > 0");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.k > 0.0 && self.k < 1.0) {
            return bad("k must lie in (0, 1)");
        }
        if !(self.gamma >= 0.0) || !(self.zeta >= 0.0) {
            return bad("gamma and zeta must be >= 0");
        }
        if !(self.rtt > 0.0 && self.rtt.is_finite()) {
            return bad("rtt must be > 0");
        }
        Ok(())
    }

    /// `1 / (2 - k)`: the power of `p` that turns windows into scaled windows.
    pub fn window_exponent(&self) -> f64 {
        1.0 / (2.0 - self.k)
    }

    /// `(1 - k) / (2 - k)`: the power of `p` that turns rounds into scaled time.
    pub fn time_exponent(&self) -> f64 {
        (1.0 - self.k) / (2.0 - self.k)
    }

    /// `alpha * (1 - k)`, the slope of `w^{1-k}` per RTT along the fluid path.
    pub(crate) fn growth_rate(&self) -> f64 {
        self.alpha * (1.0 - self.k)
    }
}

/// Packet loss probability, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LossRate(f64);

impl LossRate {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::LossRate(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for LossRate {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

/// Delay-based and loss-based window components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundState {
    pub d: f64,
    pub l: f64,
}

impl CompoundState {
    pub fn new(d: f64, l: f64) -> Self {
        Self { d, l }
    }

    pub fn w(&self) -> f64 {
        self.d + self.l
    }
}

/// One RTT of the Compound window update.
///
/// `q_next` is the queue estimate observed at the end of the round. The loss
/// branch scales both components by `1 - beta` and may leave `l` below one;
/// flooring is the caller's business.
pub fn compound_update(
    state: CompoundState,
    q_next: f64,
    loss: bool,
    params: &CompoundParams,
) -> CompoundState {
    let keep = 1.0 - params.beta;
    if loss {
        return CompoundState {
            d: keep * state.d,
            l: keep * state.l,
        };
    }
    let d = if q_next < params.gamma {
        state.d + (params.alpha * state.w().powf(params.k) - 1.0).max(0.0)
    } else {
        (state.d - params.zeta * q_next).max(0.0)
    };
    CompoundState {
        d,
        l: state.l + 1.0,
    }
}

/// Total-window increase over a loss-free, queue-free round:
/// `1 + (alpha * w^k - 1)^+`.
pub fn aggregate_increment(w: f64, params: &CompoundParams) -> f64 {
    (params.alpha * w.powf(params.k)).max(1.0)
}

/// `p^{1/(2-k)} * w`.
pub fn scale_window(w: f64, p: LossRate, k: f64) -> f64 {
    p.get().powf(1.0 / (2.0 - k)) * w
}

/// Inverse of [`scale_window`].
pub fn unscale_window(x: f64, p: LossRate, k: f64) -> f64 {
    x / p.get().powf(1.0 / (2.0 - k))
}

/// `p^{(1-k)/(2-k)} * g` for a duration `g` measured in RTTs.
pub fn scale_time(g_rounds: f64, p: LossRate, k: f64) -> f64 {
    p.get().powf((1.0 - k) / (2.0 - k)) * g_rounds
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn defaults() -> CompoundParams {
        CompoundParams::default()
    }

    #[test]
    fn small_window_clamps_delay_increase() {
        let s = compound_update(CompoundState::new(0.0, 1.0), 0.0, false, &defaults());
        assert_eq!(s, CompoundState::new(0.0, 2.0));
        assert_eq!(s.w(), 2.0);
    }

    #[test]
    fn loss_scales_both_components() {
        let s = compound_update(CompoundState::new(10.0, 5.0), 123.0, true, &defaults());
        assert_eq!(s, CompoundState::new(5.0, 2.5));
        assert_eq!(s.w(), 7.5);
    }

    #[test]
    fn queue_branch_drains_delay_component() {
        let params = CompoundParams {
            gamma: 30.0,
            zeta: 0.5,
            ..defaults()
        };
        let s = compound_update(CompoundState::new(20.0, 10.0), 31.0, false, &params);
        assert_relative_eq!(s.d, 4.5, epsilon = 1e-12);
        assert_eq!(s.l, 11.0);
        assert_relative_eq!(s.w(), 15.5, epsilon = 1e-12);

        // drained below zero
        let s = compound_update(CompoundState::new(3.0, 10.0), 31.0, false, &params);
        assert_eq!(s.d, 0.0);
    }

    #[test]
    fn queue_below_threshold_takes_growth_branch() {
        let params = defaults();
        let s = compound_update(CompoundState::new(90.0, 10.0), 29.0, false, &params);
        let expected = 90.0 + params.alpha * 100f64.powf(0.75) - 1.0;
        assert_relative_eq!(s.d, expected, epsilon = 1e-12);
    }

    #[test]
    fn loss_may_push_l_below_one() {
        let s = compound_update(CompoundState::new(0.0, 1.0), 0.0, true, &defaults());
        assert_eq!(s.l, 0.5);
    }

    #[test]
    fn increment_values() {
        let p = defaults();
        assert_eq!(aggregate_increment(1.0, &p), 1.0);
        assert_relative_eq!(aggregate_increment(100.0, &p), 3.952847, epsilon = 1e-6);
        let boundary = (1.0 / p.alpha).powf(1.0 / p.k);
        assert_relative_eq!(aggregate_increment(boundary, &p), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scalings() {
        let p = LossRate::new(1e-3).unwrap();
        assert_relative_eq!(scale_window(1000.0, p, 0.75), 3.981072, epsilon = 1e-6);
        assert_eq!(scale_window(0.0, p, 0.75), 0.0);
        assert_relative_eq!(scale_time(100.0, p, 0.75), 25.118864, epsilon = 1e-6);
        assert_relative_eq!(
            scale_window(unscale_window(0.37, p, 0.75), p, 0.75),
            0.37,
            max_relative = 1e-14
        );
    }

    #[test]
    fn loss_rate_bounds() {
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(LossRate::new(bad).is_err());
        }
        assert!(LossRate::new(0.5).is_ok());
    }

    #[test]
    fn default_params_validate() {
        defaults().validate().unwrap();
        let bad = CompoundParams {
            beta: 1.0,
            ..defaults()
        };
        assert!(bad.validate().is_err());
        let bad = CompoundParams {
            rtt: 0.0,
            ..defaults()
        };
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn update_keeps_sum_and_l_step(
                d in 0.0f64..1e4, l in 1.0f64..1e4, q in 0.0f64..100.0, loss: bool
            ) {
                let p = defaults();
                let s = compound_update(CompoundState::new(d, l), q, loss, &p);
                prop_assert_eq!(s.w(), s.d + s.l);
                prop_assert!(s.d >= 0.0);
                if loss {
                    prop_assert_eq!(s.l, 0.5 * l);
                } else {
                    prop_assert_eq!(s.l, l + 1.0);
                }
            }

            #[test]
            fn increment_at_least_one_and_monotone(w in 1.0f64..1e6, dw in 0.0f64..1e3) {
                let p = defaults();
                let a = aggregate_increment(w, &p);
                prop_assert!(a >= 1.0);
                prop_assert!(aggregate_increment(w + dw, &p) >= a);
                let raw = p.alpha * w.powf(p.k);
                if raw >= 1.0 {
                    prop_assert_eq!(a, raw);
                }
            }

            #[test]
            fn scalings_strictly_monotone(a in 0.0f64..1e6, da in 1e-3f64..1e3, p in 1e-7f64..0.9) {
                let p = LossRate::new(p).unwrap();
                prop_assert!(scale_window(a + da, p, 0.75) > scale_window(a, p, 0.75));
                prop_assert!(scale_time(a + da, p, 0.75) > scale_time(a, p, 0.75));
            }
        }
    }
}
