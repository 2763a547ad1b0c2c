//! Kinetic Monte Carlo simulation by the direct method: re-enumerate the
//! legal transitions at every event, draw an exponential holding time from
//! the total rate, and pick a transition proportionally to its rate.
//!
//! Occupation is measured by holding time, not event count, since the
//! stationary law of a continuous-time chain weights states by how long
//! they are held. Trajectories are bit-reproducible for a fixed seed: the
//! generator is a fixed xoshiro256++ seeded through splitmix64, and the
//! transition order is the deterministic enumeration order.

use crate::dynamics::{enumerate_transitions, RateSpec};
use crate::error::{Error, Result};
use crate::exact::Distribution;
use crate::statespace::{Configuration, StateSpace};
use serde::{Deserialize, Serialize};

/// xoshiro256++ with splitmix64 seeding. Fixed per release so identical
/// seeds give identical trajectories.
#[derive(Clone, Debug)]
pub struct Rng {
    state: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        // splitmix64 stream expands the seed into the four state words.
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        Rng {
            state: [next(), next(), next(), next()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let [s0, s1, s2, s3] = self.state;
        let result = s0
            .wrapping_add(s3)
            .rotate_left(23)
            .wrapping_add(s0);
        let t = s1 << 17;
        let mut s2 = s2 ^ s0;
        let mut s3 = s3 ^ s1;
        let s1 = s1 ^ s2;
        let s0 = s0 ^ s3;
        s2 ^= t;
        s3 = s3.rotate_left(45);
        self.state = [s0, s1, s2, s3];
        result
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential holding time with total rate `rate`.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        let mut u = self.next_f64();
        if u == 0.0 {
            u = f64::MIN_POSITIVE;
        }
        -u.ln() / rate
    }
}

/// Event- or time-bounded simulation budget.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Events(u64),
    Time(f64),
}

/// One simulation request.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub spec: RateSpec,
    pub initial: Configuration,
    pub budget: Budget,
    pub seed: u64,
}

/// Time-weighted occupation frequencies per configuration rank.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub freq: Vec<f64>,
    pub total_time: f64,
    pub events: u64,
}

impl EmpiricalMeasure {
    /// Total-variation distance to an exact distribution on the same space.
    pub fn tv_distance(&self, other: &Distribution) -> Result<f64> {
        tv_distance(&self.freq, &other.probs)
    }
}

/// Half the L1 distance between two probability vectors.
pub fn tv_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "probability vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Run the direct-method simulation of `cfg` on `space`.
///
/// A frozen state (no transitions, which conservation allows only for
/// N = 0 or a single site) yields a point mass on the current state.
pub fn simulate(cfg: &SimConfig, space: &StateSpace) -> Result<EmpiricalMeasure> {
    if cfg.initial.len() != space.l() || cfg.initial.total() != space.n() {
        return Err(Error::DimensionMismatch(
            "initial configuration does not live in the state space".into(),
        ));
    }
    if cfg.spec.l() != space.l() {
        return Err(Error::DimensionMismatch(
            "rate spec does not match the lattice size".into(),
        ));
    }
    match cfg.budget {
        Budget::Events(0) => {
            return Err(Error::InvalidInput("event budget must be positive".into()))
        }
        Budget::Time(t) if !t.is_finite() || t <= 0.0 => {
            return Err(Error::InvalidInput("time budget must be positive".into()))
        }
        _ => {}
    }

    let mut rng = Rng::new(cfg.seed);
    let mut state = cfg.initial.clone();
    let mut weights = vec![0.0f64; space.size()];
    let mut total_time = 0.0f64;
    let mut events = 0u64;

    loop {
        match cfg.budget {
            Budget::Events(max) if events >= max => break,
            Budget::Time(max) if total_time >= max => break,
            _ => {}
        }
        let transitions = enumerate_transitions(&state, &cfg.spec)?;
        let total_rate: f64 = transitions.iter().map(|t| t.rate).sum();
        let rank = space.rank(&state)?;
        if total_rate <= 0.0 {
            // Frozen: all remaining mass on this state.
            if total_time == 0.0 {
                weights[rank] = 1.0;
                total_time = 1.0;
            } else if let Budget::Time(max) = cfg.budget {
                weights[rank] += max - total_time;
                total_time = max;
            }
            break;
        }
        let mut dt = rng.exponential(total_rate);
        if let Budget::Time(max) = cfg.budget {
            if total_time + dt > max {
                dt = max - total_time;
                weights[rank] += dt;
                total_time = max;
                break;
            }
        }
        weights[rank] += dt;
        total_time += dt;

        // Proportional selection in enumeration order.
        let mut draw = rng.next_f64() * total_rate;
        let mut chosen = transitions.len() - 1;
        for (i, t) in transitions.iter().enumerate() {
            draw -= t.rate;
            if draw < 0.0 {
                chosen = i;
                break;
            }
        }
        state = transitions[chosen].target.clone();
        debug_assert_eq!(state.total(), space.n());
        events += 1;
    }

    let norm = if total_time > 0.0 { total_time } else { 1.0 };
    for w in weights.iter_mut() {
        *w /= norm;
    }
    Ok(EmpiricalMeasure {
        l: space.l(),
        n: space.n(),
        freq: weights,
        total_time,
        events,
    })
}
