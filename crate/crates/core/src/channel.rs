//! Time-varying uplink rate sources.
//!
//! The policy and the latency model consume a single number per round: the
//! achievable uplink rate at the moment the round starts. This module
//! provides it from a constant, a recorded trace, or a two-state
//! Gilbert-Elliott regime model (strong/weak signal).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One point of a recorded channel trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample<T> {
    /// Seconds from scenario start.
    pub time: T,
    /// Uplink rate in bits/second.
    pub rate: T,
    /// Optional SNR in dB the rate was derived from.
    pub snr_db: Option<T>,
}

/// How a trace answers queries between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HoldMode {
    /// Keep the latest sample's rate until the next one (a per-round channel
    /// measurement behaves like this).
    #[default]
    Step,
    /// Linearly interpolate between neighboring samples.
    Linear,
}

/// An ordered, non-empty sequence of channel samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace<T> {
    samples: Vec<ChannelSample<T>>,
    hold: HoldMode,
}

impl<T: Scalar> ChannelTrace<T> {
    /// Builds a trace, validating ordering and positivity.
    pub fn new(samples: Vec<ChannelSample<T>>, hold: HoldMode) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("channel trace must contain at least one sample".into()));
        }
        let mut prev_time = None;
        for (i, s) in samples.iter().enumerate() {
            if !s.rate.is_finite() || s.rate <= T::zero() {
                return Err(Error::Config(format!(
                    "trace sample {i}: rate must be > 0, got {}",
                    s.rate
                )));
            }
            if !s.time.is_finite() || s.time < T::zero() {
                return Err(Error::Config(format!(
                    "trace sample {i}: time must be >= 0, got {}",
                    s.time
                )));
            }
            if let Some(p) = prev_time {
                if s.time <= p {
                    return Err(Error::Config(format!(
                        "trace sample {i}: times must be strictly increasing ({} after {p})",
                        s.time
                    )));
                }
            }
            prev_time = Some(s.time);
        }
        Ok(Self { samples, hold })
    }

    /// Single-sample trace holding `rate` forever.
    pub fn constant(rate: T) -> Result<Self> {
        Self::new(
            vec![ChannelSample { time: T::zero(), rate, snr_db: None }],
            HoldMode::Step,
        )
    }

    pub fn samples(&self) -> &[ChannelSample<T>] {
        &self.samples
    }

    pub fn hold_mode(&self) -> HoldMode {
        self.hold
    }

    /// Rate at time `t` (seconds). Queries before the first sample return the
    /// first sample's rate; queries after the last return the last's.
    pub fn rate_at(&self, t: T) -> T {
        let first = &self.samples[0];
        if t <= first.time {
            return first.rate;
        }
        let last = self.samples.last().unwrap();
        if t >= last.time {
            return last.rate;
        }
        // Index of the latest sample with time <= t.
        let idx = match self
            .samples
            .binary_search_by(|s| s.time.partial_cmp(&t).expect("finite times"))
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        match self.hold {
            HoldMode::Step => self.samples[idx].rate,
            HoldMode::Linear => {
                let a = &self.samples[idx];
                let b = &self.samples[idx + 1];
                let w = (t - a.time) / (b.time - a.time);
                a.rate + w * (b.rate - a.rate)
            }
        }
    }

    /// Parses the text trace format: one sample per line, either
    /// `time_s,rate_bps` or `time_s,snr_db,bandwidth_hz` (converted through
    /// [`snr_to_rate`]). Lines starting with `#` and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            let parse_field = |name: &str, s: &str| -> Result<T> {
                s.parse::<f64>()
                    .map(T::cast)
                    .map_err(|_| Error::Parse { line, msg: format!("invalid {name}: {s:?}") })
            };
            let sample = match fields.len() {
                2 => {
                    let time = parse_field("time", fields[0])?;
                    let rate = parse_field("rate", fields[1])?;
                    ChannelSample { time, rate, snr_db: None }
                }
                3 => {
                    let time = parse_field("time", fields[0])?;
                    let snr = parse_field("snr", fields[1])?;
                    let bw = parse_field("bandwidth", fields[2])?;
                    let rate = snr_to_rate(snr, bw)
                        .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
                    ChannelSample { time, rate, snr_db: Some(snr) }
                }
                n => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected 2 or 3 comma-separated fields, got {n}"),
                    })
                }
            };
            if !sample.rate.is_finite() || sample.rate <= T::zero() {
                return Err(Error::Parse {
                    line,
                    msg: format!("rate must be > 0, got {}", sample.rate),
                });
            }
            if sample.time < T::zero() {
                return Err(Error::Parse {
                    line,
                    msg: format!("time must be >= 0, got {}", sample.time),
                });
            }
            if let Some(prev) = samples.last() {
                let prev: &ChannelSample<T> = prev;
                if sample.time <= prev.time {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "times must be strictly increasing ({} after {})",
                            sample.time, prev.time
                        ),
                    });
                }
            }
            samples.push(sample);
        }
        Self::new(samples, HoldMode::Step)
    }

    /// Switches the interpolation mode.
    pub fn with_hold_mode(mut self, hold: HoldMode) -> Self {
        self.hold = hold;
        self
    }
}

/// Shannon capacity of a link with the given SNR and bandwidth:
/// `bandwidth * log2(1 + 10^(snr_db/10))`.
pub fn snr_to_rate<T: Scalar>(snr_db: T, bandwidth_hz: T) -> Result<T> {
    snr_to_rate_scaled(snr_db, bandwidth_hz, T::one())
}

/// [`snr_to_rate`] with a spectral-efficiency factor applied to the capacity.
pub fn snr_to_rate_scaled<T: Scalar>(snr_db: T, bandwidth_hz: T, efficiency: T) -> Result<T> {
    if !(bandwidth_hz > T::zero()) {
        return Err(Error::Domain(format!("bandwidth must be > 0, got {bandwidth_hz}")));
    }
    if !(efficiency > T::zero()) {
        return Err(Error::Domain(format!("efficiency must be > 0, got {efficiency}")));
    }
    let ten = T::cast(10.0);
    let linear = ten.powf(snr_db / ten);
    Ok(efficiency * bandwidth_hz * (T::one() + linear).log2())
}

/// Parameters of the two-state strong/weak regime model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GilbertElliottParams<T> {
    pub rate_strong: T,
    pub rate_weak: T,
    /// Probability of staying strong at each step.
    pub p_stay_strong: T,
    /// Probability of staying weak at each step.
    pub p_stay_weak: T,
    pub seed: u64,
}

impl<T: Scalar> GilbertElliottParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rate_strong", self.rate_strong), ("rate_weak", self.rate_weak)] {
            if !v.is_finite() || v <= T::zero() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("p_stay_strong", self.p_stay_strong),
            ("p_stay_weak", self.p_stay_weak),
        ] {
            if !v.is_finite() || v < T::zero() || v > T::one() {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Markov regime state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeState {
    Strong,
    Weak,
}

/// One Markov transition: stay with the configured probability, otherwise
/// switch. Returns the new state and its rate.
pub fn ge_step<T: Scalar, R: Rng>(
    params: &GilbertElliottParams<T>,
    state: GeState,
    rng: &mut R,
) -> (GeState, T) {
    let u = T::cast(rng.gen::<f64>());
    let next = match state {
        GeState::Strong => {
            if u < params.p_stay_strong {
                GeState::Strong
            } else {
                GeState::Weak
            }
        }
        GeState::Weak => {
            if u < params.p_stay_weak {
                GeState::Weak
            } else {
                GeState::Strong
            }
        }
    };
    let rate = match next {
        GeState::Strong => params.rate_strong,
        GeState::Weak => params.rate_weak,
    };
    (next, rate)
}

/// Stateful Gilbert-Elliott generator. Starts strong; owns its seeded RNG, so
/// a given parameter set always reproduces the same rate sequence.
#[derive(Debug, Clone)]
pub struct GilbertElliott<T> {
    params: GilbertElliottParams<T>,
    state: GeState,
    rng: ChaCha8Rng,
}

impl<T: Scalar> GilbertElliott<T> {
    pub fn new(params: GilbertElliottParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            state: GeState::Strong,
            params,
        })
    }

    pub fn state(&self) -> GeState {
        self.state
    }

    /// Advances one round and returns the rate of the new state.
    pub fn step(&mut self) -> T {
        let (state, rate) = ge_step(&self.params, self.state, &mut self.rng);
        self.state = state;
        rate
    }
}

/// A rate source the simulator can sample once per round.
#[derive(Debug, Clone)]
pub enum ChannelModel<T> {
    Constant(T),
    Trace(ChannelTrace<T>),
    Gilbert(GilbertElliott<T>),
}

impl<T: Scalar> ChannelModel<T> {
    /// Rate seen by a round starting at simulated time `t`. Trace channels
    /// are time-indexed; the Gilbert-Elliott model advances per round.
    pub fn sample(&mut self, t: T) -> T {
        match self {
            ChannelModel::Constant(r) => *r,
            ChannelModel::Trace(trace) => trace.rate_at(t),
            ChannelModel::Gilbert(ge) => ge.step(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(time: f64, rate: f64) -> ChannelSample<f64> {
        ChannelSample { time, rate, snr_db: None }
    }

    #[test]
    fn constant_trace_holds_forever() {
        let t = ChannelTrace::constant(1e6).unwrap();
        assert_eq!(t.rate_at(5.0), 1e6);
        assert_eq!(t.rate_at(0.0), 1e6);
    }

    #[test]
    fn step_hold_returns_latest_sample() {
        let t = ChannelTrace::new(vec![sample(0.0, 1e6), sample(10.0, 2e6)], HoldMode::Step).unwrap();
        assert_eq!(t.rate_at(9.99), 1e6);
        assert_eq!(t.rate_at(10.0), 2e6);
        assert_eq!(t.rate_at(50.0), 2e6);
    }

    #[test]
    fn linear_interpolates_between_samples() {
        let t = ChannelTrace::new(vec![sample(0.0, 1e6), sample(10.0, 2e6)], HoldMode::Linear).unwrap();
        assert_relative_eq!(t.rate_at(5.0), 1.5e6, max_relative = 1e-12);
    }

    #[test]
    fn rate_at_stays_within_trace_bounds() {
        let samples = vec![sample(0.0, 5e5), sample(3.0, 2e6), sample(7.0, 1e6)];
        for hold in [HoldMode::Step, HoldMode::Linear] {
            let t = ChannelTrace::new(samples.clone(), hold).unwrap();
            let mut q = 0.0;
            while q < 10.0 {
                let r = t.rate_at(q);
                assert!((5e5..=2e6).contains(&r));
                q += 0.37;
            }
        }
    }

    #[test]
    fn empty_trace_is_config_error() {
        assert!(matches!(
            ChannelTrace::<f64>::new(vec![], HoldMode::Step),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn snr_zero_db_doubles_capacity_per_hz() {
        assert_relative_eq!(snr_to_rate(0.0, 1e6).unwrap(), 1e6, max_relative = 1e-12);
    }

    #[test]
    fn snr_very_low_approaches_zero() {
        assert!(snr_to_rate(-300.0, 1e6).unwrap() < 1e-6);
    }

    #[test]
    fn snr_ten_db_hand_value() {
        // 1e6 * log2(11)
        assert_relative_eq!(snr_to_rate(10.0, 1e6).unwrap(), 3.4594316e6, max_relative = 1e-6);
    }

    #[test]
    fn snr_monotone_and_bandwidth_linear() {
        let mut prev = 0.0;
        let mut snr = -20.0;
        while snr <= 30.0 {
            let r = snr_to_rate(snr, 1e6).unwrap();
            assert!(r > prev);
            prev = r;
            snr += 0.5;
        }
        let r1 = snr_to_rate(7.0, 1e6).unwrap();
        let r3 = snr_to_rate(7.0, 3e6).unwrap();
        assert_relative_eq!(r3, 3.0 * r1, max_relative = 1e-12);
    }

    #[test]
    fn parse_two_column() {
        let t = ChannelTrace::<f64>::parse("0,1000000\n10,2000000").unwrap();
        assert_eq!(t.samples().len(), 2);
        assert_eq!(t.rate_at(0.0), 1e6);
        assert_eq!(t.rate_at(10.0), 2e6);
    }

    #[test]
    fn parse_rejects_nonpositive_rate_with_line() {
        match ChannelTrace::<f64>::parse("0,-5") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_nonmonotone_time_with_line() {
        match ChannelTrace::<f64>::parse("0,1e6\n5,1e6\n5,2e6") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_three_column_applies_snr_conversion() {
        let text = "# time, snr_db, bandwidth_hz\n0,0,1e6\n1,10,1e6\n2,20,1e6";
        let t = ChannelTrace::<f64>::parse(text).unwrap();
        assert_eq!(t.samples().len(), 3);
        assert_relative_eq!(t.rate_at(0.0), 1e6, max_relative = 1e-9);
        assert_relative_eq!(t.rate_at(1.0), snr_to_rate(10.0, 1e6).unwrap(), max_relative = 1e-12);
        assert_eq!(t.samples()[2].snr_db, Some(20.0));
    }

    #[test]
    fn parse_rejects_wrong_arity() {
        assert!(matches!(
            ChannelTrace::<f64>::parse("0,1,2,3"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ChannelTrace::<f64>::parse("0,1e6\nnot-a-number,2e6"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    fn ge_params(pss: f64, psw: f64, seed: u64) -> GilbertElliottParams<f64> {
        GilbertElliottParams {
            rate_strong: 2e6,
            rate_weak: 1e4,
            p_stay_strong: pss,
            p_stay_weak: psw,
            seed,
        }
    }

    #[test]
    fn ge_absorbing_strong_state() {
        let mut ge = GilbertElliott::new(ge_params(1.0, 0.5, 7)).unwrap();
        for _ in 0..100 {
            assert_eq!(ge.step(), 2e6);
        }
    }

    #[test]
    fn ge_forced_alternation() {
        let mut ge = GilbertElliott::new(ge_params(0.0, 0.0, 7)).unwrap();
        // Starts strong, so the first step lands weak, then alternates.
        for i in 0..50 {
            let rate = ge.step();
            if i % 2 == 0 {
                assert_eq!(rate, 1e4);
            } else {
                assert_eq!(rate, 2e6);
            }
        }
    }

    #[test]
    fn ge_matches_stationary_distribution() {
        // pi_strong = (1 - p_stay_weak) / ((1 - p_stay_strong) + (1 - p_stay_weak))
        let params = ge_params(0.9, 0.7, 42);
        let mut ge = GilbertElliott::new(params).unwrap();
        let n = 100_000;
        let strong = (0..n).filter(|_| ge.step() == 2e6).count();
        let pi_strong = 0.3 / (0.1 + 0.3);
        assert!((strong as f64 / n as f64 - pi_strong).abs() < 0.01);
    }

    #[test]
    fn ge_reproducible_per_seed() {
        let mut a = GilbertElliott::new(ge_params(0.8, 0.6, 99)).unwrap();
        let mut b = GilbertElliott::new(ge_params(0.8, 0.6, 99)).unwrap();
        let seq_a: Vec<f64> = (0..1000).map(|_| a.step()).collect();
        let seq_b: Vec<f64> = (0..1000).map(|_| b.step()).collect();
        assert_eq!(seq_a, seq_b);
        let mut c = GilbertElliott::new(ge_params(0.8, 0.6, 100)).unwrap();
        let seq_c: Vec<f64> = (0..1000).map(|_| c.step()).collect();
        assert_ne!(seq_a, seq_c);
    }

    #[test]
    fn ge_rejects_bad_probabilities() {
        assert!(GilbertElliott::new(ge_params(1.2, 0.5, 1)).is_err());
        let mut p = ge_params(0.5, 0.5, 1);
        p.rate_weak = 0.0;
        assert!(GilbertElliott::new(p).is_err());
    }
}
