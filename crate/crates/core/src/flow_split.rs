//! Per-frame flow-split learning: utility estimation, regret estimation and
//! a Gibbs-entropy smoothed best response.
//!
//! Each flow keeps one estimate per RU. A frame's feedback is the
//! queue-weighted service surplus of every path used in the previous frame;
//! the regret of a path is its estimated utility relative to what the flow
//! currently expects under its own split.

use std::fmt;

/// Power-law learning rates `eta_x[t] = 1/(t+1)^e_x` plus the Boltzmann
/// temperature of the best response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningSchedule {
    pub e_utility: f64,
    pub e_regret: f64,
    pub e_split: f64,
    pub lambda: f64,
}

impl Default for LearningSchedule {
    fn default() -> Self {
        Self {
            e_utility: 0.51,
            e_regret: 0.55,
            e_split: 0.6,
            lambda: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    Utility,
    Regret,
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleViolation {
    /// Exponent <= 1/2: squared rates are not summable.
    NotSquareSummable(Rate, f64),
    /// Exponent > 1: rates are summable, so learning stalls.
    Summable(Rate, f64),
    /// Exponents must strictly increase utility -> regret -> split.
    TimescaleOrder { faster: Rate, slower: Rate },
    NonPositiveTemperature(f64),
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotSquareSummable(r, e) => write!(f, "{r:?} exponent {e} <= 0.5"),
            Self::Summable(r, e) => write!(f, "{r:?} exponent {e} > 1"),
            Self::TimescaleOrder { faster, slower } => {
                write!(f, "{faster:?} rate must decay slower than {slower:?} rate")
            }
            Self::NonPositiveTemperature(l) => write!(f, "lambda must be positive, got {l}"),
        }
    }
}

impl LearningSchedule {
    pub fn rate(&self, which: Rate, frame: u64) -> f64 {
        let e = match which {
            Rate::Utility => self.e_utility,
            Rate::Regret => self.e_regret,
            Rate::Split => self.e_split,
        };
        1.0 / ((frame + 1) as f64).powf(e)
    }

    /// Checks the stochastic-approximation conditions on power-law rates.
    /// An empty list means the schedule is valid.
    pub fn validate(&self) -> Vec<ScheduleViolation> {
        let mut out = Vec::new();
        let rates = [
            (Rate::Utility, self.e_utility),
            (Rate::Regret, self.e_regret),
            (Rate::Split, self.e_split),
        ];
        for (r, e) in rates {
            if !(e > 0.5) {
                out.push(ScheduleViolation::NotSquareSummable(r, e));
            } else if e > 1.0 {
                out.push(ScheduleViolation::Summable(r, e));
            }
        }
        for w in rates.windows(2) {
            if !(w[0].1 < w[1].1) {
                out.push(ScheduleViolation::TimescaleOrder {
                    faster: w[0].0,
                    slower: w[1].0,
                });
            }
        }
        if !(self.lambda > 0.0) {
            out.push(ScheduleViolation::NonPositiveTemperature(self.lambda));
        }
        out
    }
}

pub fn update_utility_estimate(uhat: f64, ubar: f64, eta: f64, selected: bool) -> f64 {
    if selected {
        uhat + eta * (ubar - uhat)
    } else {
        uhat
    }
}

pub fn update_regret_estimate(thetahat: f64, ubar: f64, uhat: f64, eta: f64, selected: bool) -> f64 {
    if selected {
        thetahat + eta * (ubar - uhat - thetahat)
    } else {
        thetahat
    }
}

/// Softmax of `lambda [theta]^+`, computed with max subtraction.
pub fn best_response(thetahat: &[f64], lambda: f64) -> Vec<f64> {
    let x: Vec<f64> = thetahat.iter().map(|&t| lambda * t.max(0.0)).collect();
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn update_flow_split(beta: &[f64], f: &[f64], eta: f64) -> Vec<f64> {
    beta.iter().zip(f).map(|(&b, &fv)| b + eta * (fv - b)).collect()
}

/// Accumulates one frame of path utility observations for a flow:
/// `sum_s (q/tau) (r - beta A)` per RU, in utility units.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub utility: Vec<f64>,
    pub used: Vec<bool>,
}

impl FrameObservation {
    pub fn new(num_rus: usize) -> Self {
        Self {
            utility: vec![0.0; num_rus],
            used: vec![false; num_rus],
        }
    }

    /// Adds one slot on path `ru`. `unit` converts bits and bits/s into
    /// the utility units used by the learner.
    #[allow(clippy::too_many_arguments)]
    pub fn add_slot(&mut self, ru: usize, q: f64, rate: f64, beta: f64, arrival: f64, tau: f64, unit: f64) {
        self.utility[ru] += observe_utility(q / unit, rate / unit, beta, arrival / unit, tau);
        self.used[ru] = true;
    }

    pub fn total(&self) -> f64 {
        self.utility.iter().sum()
    }
}

/// Instantaneous utility of one path in one slot.
pub fn observe_utility(q: f64, rate: f64, beta: f64, arrival: f64, tau: f64) -> f64 {
    q / tau * (rate - beta * arrival)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowLearner {
    pub uhat: Vec<f64>,
    pub thetahat: Vec<f64>,
    /// Split over every RU; entries outside the current path set decay.
    pub beta: Vec<f64>,
}

impl FlowLearner {
    /// Zero estimates and a uniform split over `paths`.
    pub fn new(num_rus: usize, paths: &[usize]) -> Self {
        let mut beta = vec![0.0; num_rus];
        for &ru in paths {
            beta[ru] = 1.0 / paths.len() as f64;
        }
        Self {
            uhat: vec![0.0; num_rus],
            thetahat: vec![0.0; num_rus],
            beta,
        }
    }

    /// Split actually applied on `paths`: the learned split restricted to
    /// the path set and renormalized (uniform if it has no mass there).
    pub fn deployed_split(&self, paths: &[usize]) -> Vec<f64> {
        let mass: f64 = paths.iter().map(|&ru| self.beta[ru]).sum();
        let mut out = vec![0.0; self.beta.len()];
        for &ru in paths {
            out[ru] = if mass > 0.0 {
                self.beta[ru] / mass
            } else {
                1.0 / paths.len() as f64
            };
        }
        out
    }

    /// One learning step at frame `frame >= 2` given the previous frame's
    /// observation, the split deployed then, and the new path set.
    pub fn update(
        &mut self,
        schedule: &LearningSchedule,
        frame: u64,
        obs: &FrameObservation,
        previous_split: &[f64],
        paths: &[usize],
    ) {
        let eta_u = schedule.rate(Rate::Utility, frame);
        let eta_t = schedule.rate(Rate::Regret, frame);
        let eta_b = schedule.rate(Rate::Split, frame);
        for ru in 0..self.uhat.len() {
            self.uhat[ru] =
                update_utility_estimate(self.uhat[ru], obs.utility[ru], eta_u, obs.used[ru]);
        }
        let baseline: f64 = (0..self.uhat.len())
            .filter(|&ru| obs.used[ru])
            .map(|ru| previous_split[ru] * self.uhat[ru])
            .sum();
        for ru in 0..self.thetahat.len() {
            self.thetahat[ru] = update_regret_estimate(
                self.thetahat[ru],
                self.uhat[ru],
                baseline,
                eta_t,
                obs.used[ru],
            );
        }
        let theta_p: Vec<f64> = paths.iter().map(|&ru| self.thetahat[ru]).collect();
        let fp = best_response(&theta_p, schedule.lambda);
        let mut f = vec![0.0; self.beta.len()];
        for (&ru, &v) in paths.iter().zip(&fp) {
            f[ru] = v;
        }
        self.beta = update_flow_split(&self.beta, &f, eta_b);
    }
}
