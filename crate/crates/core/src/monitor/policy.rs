use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length of an on or off window, in events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Length {
    Fixed(u64),
    /// Geometric on `1, 2, ...` with the given mean.
    Geometric {
        mean: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    AlwaysOn,
    AlwaysOff,
    /// Alternating windows, starting with an on window.
    Windowed {
        on: Length,
        off: Length,
    },
    /// Starts off; flips state before each event with the given probability.
    Bernoulli {
        toggle_probability: f64,
    },
    /// Always on, but starts a new fragment before each listed event index.
    SplitPoints(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingPolicy {
    pub kind: PolicyKind,
    /// Maximum fraction of events recorded per run, in `(0, 1]`. A window
    /// may only open before event `i` if at most `budget * i` events have
    /// been recorded so far. Ignored by `AlwaysOn` and `SplitPoints`.
    pub budget: f64,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("budget must be in (0, 1], got {0}")]
    Budget(f64),
    #[error("window lengths must be positive")]
    Length,
    #[error("toggle probability must be in (0, 1], got {0}")]
    Probability(f64),
}

pub const DEFAULT_ON_MEAN: f64 = 20.0;
pub const DEFAULT_OFF_MEAN: f64 = 80.0;
pub const DEFAULT_BUDGET: f64 = 0.25;

impl RecordingPolicy {
    /// Geometric windows (on mean 20, off mean 80) under a 0.25 budget.
    pub fn default_with_seed(rng_seed: u64) -> Self {
        RecordingPolicy {
            kind: PolicyKind::Windowed {
                on: Length::Geometric {
                    mean: DEFAULT_ON_MEAN,
                },
                off: Length::Geometric {
                    mean: DEFAULT_OFF_MEAN,
                },
            },
            budget: DEFAULT_BUDGET,
            rng_seed,
        }
    }

    pub fn always_on() -> Self {
        RecordingPolicy {
            kind: PolicyKind::AlwaysOn,
            budget: 1.0,
            rng_seed: 0,
        }
    }

    pub fn always_off() -> Self {
        RecordingPolicy {
            kind: PolicyKind::AlwaysOff,
            budget: 1.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return Err(PolicyError::Budget(self.budget));
        }
        let length_ok = |l: &Length| match l {
            Length::Fixed(n) => *n > 0,
            Length::Geometric { mean } => *mean >= 1.0 && mean.is_finite(),
        };
        match &self.kind {
            PolicyKind::Windowed { on, off } if !length_ok(on) || !length_ok(off) => {
                Err(PolicyError::Length)
            }
            PolicyKind::Bernoulli {
                toggle_probability: p,
            } if !(*p > 0.0 && *p <= 1.0) => Err(PolicyError::Probability(*p)),
            _ => Ok(()),
        }
    }
}

/// What to do before an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Decision {
    pub record: bool,
    /// Close any open fragment and start a new one at this boundary.
    pub split: bool,
}

/// Per-run state of a policy.
pub(crate) struct PolicyState<'a> {
    policy: &'a RecordingPolicy,
    rng: ChaCha8Rng,
    on: bool,
    /// Events left in the current window.
    remaining: u64,
}

impl<'a> PolicyState<'a> {
    pub fn new(policy: &'a RecordingPolicy, input_seed: u64) -> Self {
        let seed = policy
            .rng_seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(31)
            ^ input_seed;
        PolicyState {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            on: false,
            remaining: 0,
        }
    }

    fn sample(&mut self, l: &Length) -> u64 {
        match l {
            Length::Fixed(n) => *n,
            Length::Geometric { mean } => {
                let g = Geometric::new(1.0 / mean).expect("validated mean");
                g.sample(&mut self.rng).saturating_add(1)
            }
        }
    }

    fn may_open(&self, index: usize, recorded: usize) -> bool {
        recorded as f64 <= self.policy.budget * index as f64
    }

    /// Consulted before event `index`; `recorded` events so far were kept.
    pub fn decide(&mut self, index: usize, recorded: usize) -> Decision {
        let keep = |record| Decision {
            record,
            split: false,
        };
        match &self.policy.kind {
            PolicyKind::AlwaysOn => keep(true),
            PolicyKind::AlwaysOff => keep(false),
            PolicyKind::SplitPoints(points) => Decision {
                record: true,
                split: points.contains(&index),
            },
            PolicyKind::Windowed { on, off } => {
                if self.remaining == 0 {
                    if self.on {
                        self.on = false;
                        self.remaining = self.sample(&off.clone());
                    } else if self.may_open(index, recorded) {
                        self.on = true;
                        self.remaining = self.sample(&on.clone());
                    }
                }
                if self.remaining > 0 {
                    self.remaining -= 1;
                }
                keep(self.on)
            }
            PolicyKind::Bernoulli { toggle_probability } => {
                if self.rng.random_bool(*toggle_probability) {
                    if self.on {
                        self.on = false;
                    } else if self.may_open(index, recorded) {
                        self.on = true;
                    }
                }
                keep(self.on)
            }
        }
    }
}
