//! The two-timescale simulation loop, benchmark schemes and sweeps.

use rand::Rng;
use rayon::prelude::*;

use crate::analysis::{
    drift_record, theorem_constants, verify_scaling, ConstantInputs, DriftRecord, ScalingReport, ScalingRun,
    SlotQueues, TheoremConstants,
};
use crate::channel::{norm_sqr, ChannelRealization, LargeScaleState, Topology};
use crate::config::{Scheduler, Scheme, SimConfig};
use crate::congestion::{curvature_bounds, CongestionController, LogUtility};
use crate::flow_split::{FlowLearner, FrameObservation};
use crate::mrt::{equal_power_schedule, ia_schedule, MrtGains, MrtParams};
use crate::queueing::{tail_len, DelayBudget, QueueState};
use crate::rng::{SeedTree, Stream};
use crate::zf::{zf_schedule, PowerPolicy, ZfParams};
use crate::{Error, Result};

/// One UE in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRow {
    pub frame: usize,
    pub slot: usize,
    pub ue: usize,
    pub a_bps: f64,
    pub r_bps: f64,
    pub qhat_bits: f64,
    pub sum_q_bits: f64,
    pub l: f64,
    pub dl: f64,
    pub dl_ub: f64,
}

/// Learner state of one (UE, RU) pair at the start of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRow {
    pub frame: usize,
    pub ue: usize,
    pub ru: usize,
    pub beta: f64,
    pub uhat: f64,
    pub thetahat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub scheduler: Scheduler,
    pub phi: f64,
    pub seed: u64,
    pub frames: usize,
    pub slots: usize,
    /// Tail mean of `||a||_2`, bits/s.
    pub steady_a_norm: f64,
    /// Tail mean of `||qhat||_1`, bits.
    pub steady_qhat_l1: f64,
    /// Largest tail-mean `qhat_k / Abar`, seconds.
    pub worst_delay_s: f64,
    /// First slot from which the running time average of `||a||` stays
    /// within 10% of the steady value.
    pub convergence_slot: usize,
    pub drift_violations: usize,
    pub max_b: f64,
    /// Slots (or RUs within a slot, for zero forcing) whose minimum rates
    /// had to be dropped.
    pub infeasible_events: usize,
    pub degenerate_events: usize,
    /// Largest interference-free per-flow capacity seen, bits/s.
    pub capacity_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub slots: Vec<SlotRow>,
    pub frames: Vec<FrameRow>,
    pub drift: Vec<DriftRecord>,
    /// `||a||_2` per slot.
    pub a_norm: Vec<f64>,
    /// `||qhat||_1` per slot, after the update.
    pub qhat_l1: Vec<f64>,
    /// Tail mean of each flow's admitted rate, bits/s.
    pub steady_rates: Vec<f64>,
    /// Tail mean of each flow's service rate, bits/s.
    pub steady_service: Vec<f64>,
    pub summary: RunSummary,
}

impl RunTrace {
    /// Frame-mean `||a||_2`.
    pub fn frame_a_norm(&self, slots_per_frame: usize) -> Vec<f64> {
        self.a_norm
            .chunks(slots_per_frame)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }

    /// Split of every flow at every frame, `[frame][k][ru]`.
    pub fn splits(&self, num_ues: usize, num_rus: usize) -> Vec<Vec<Vec<f64>>> {
        let frames = self.frames.len() / (num_ues * num_rus).max(1);
        let mut out = vec![vec![vec![0.0; num_rus]; num_ues]; frames];
        for r in &self.frames {
            out[r.frame][r.ue][r.ru] = r.beta;
        }
        out
    }
}

/// Per-frame path sets and splits.
struct Steering {
    learners: Vec<FlowLearner>,
    previous: Option<(Vec<FrameObservation>, Vec<Vec<f64>>)>,
}

fn uniform_split(paths: &[usize], num_rus: usize) -> Vec<f64> {
    let mut b = vec![0.0; num_rus];
    for &ru in paths {
        b[ru] = 1.0 / paths.len() as f64;
    }
    b
}

/// Runs one simulation.
pub fn run_simulation(config: &SimConfig) -> Result<RunTrace> {
    config.validate()?;
    let seeds = SeedTree::new(config.seed);
    let topo = Topology::new(config.topology.clone(), &seeds)?;
    let k_count = topo.num_ues();
    let j_count = topo.num_rus();
    let tau = config.tau;
    let unit = config.utility_unit;
    let noise = config.topology.noise_power_w();
    let p_max = config.topology.power_budget_w;
    let utility = LogUtility::default();
    let controller = CongestionController {
        phi: config.phi,
        tau,
        a_max: config.a_max,
        unit,
    };
    let abar = config.mean_arrival();
    let mut delay = DelayBudget::new(
        vec![config.max_delay_s; k_count],
        vec![config.reliability; k_count],
        vec![abar; k_count],
        j_count,
    )?;
    let zf_params = ZfParams::new(config.topology.bandwidth_hz / j_count as f64, tau, noise, p_max);
    let mrt_params = MrtParams {
        ia_tol: config.ia_tol,
        ia_max_iter: config.ia_max_iter,
        inner_max_steps: config.inner_max_steps,
        ..MrtParams::new(config.topology.bandwidth_hz, tau, p_max)
    };
    let path_bandwidth = match config.scheduler {
        Scheduler::Zfbf => zf_params.bandwidth_hz,
        Scheduler::Mrt => mrt_params.bandwidth_hz,
    };

    let mut queues = QueueState::empty(k_count, j_count);
    let mut steering = Steering {
        learners: Vec::new(),
        previous: None,
    };
    let total_slots = config.total_slots();
    let mut slots = Vec::with_capacity(total_slots * k_count);
    let mut frames = Vec::with_capacity(config.frames * k_count * j_count);
    let mut drift = Vec::with_capacity(total_slots);
    let mut a_norm = Vec::with_capacity(total_slots);
    let mut qhat_l1 = Vec::with_capacity(total_slots);
    let mut a_hist: Vec<Vec<f64>> = Vec::with_capacity(total_slots);
    let mut r_hist: Vec<Vec<f64>> = Vec::with_capacity(total_slots);
    let mut qhat_hist: Vec<Vec<f64>> = Vec::with_capacity(total_slots);
    let mut infeasible = 0;
    let mut degenerate = 0;
    let mut capacity_max: f64 = 0.0;

    for frame in 0..config.frames {
        let large = topo.draw_large_scale(&seeds, frame as u64);
        let paths: Vec<Vec<usize>> = (0..k_count)
            .map(|k| match config.scheme {
                Scheme::NumNru => vec![large.nearest_ru(k)],
                _ => large.strongest_rus(k, config.paths_per_ue),
            })
            .collect();
        let beta = frame_split(config, &mut steering, &paths, frame, j_count);
        for k in 0..k_count {
            for ru in 0..j_count {
                let (uhat, thetahat) = steering
                    .learners
                    .get(k)
                    .map_or((0.0, 0.0), |l| (l.uhat[ru], l.thetahat[ru]));
                frames.push(FrameRow {
                    frame,
                    ue: k,
                    ru,
                    beta: beta[k][ru],
                    uhat,
                    thetahat,
                });
            }
        }
        let arrivals = draw_arrivals(config, &seeds, frame, k_count);
        let served: Vec<Vec<usize>> = (0..j_count)
            .map(|ru| (0..k_count).filter(|&k| beta[k][ru] > 0.0).collect())
            .collect();
        let mut obs: Vec<FrameObservation> = (0..k_count).map(|_| FrameObservation::new(j_count)).collect();

        for s in 0..config.slots_per_frame {
            let global = frame * config.slots_per_frame + s;
            let admitted: Vec<f64> = queues
                .qhat
                .iter()
                .map(|&qh| controller.optimal_rate(&utility, qh))
                .collect();
            let channels = large.draw_slot(&seeds, global as u64);
            capacity_max = capacity_max.max(flow_capacity(&channels, &beta, noise, p_max, path_bandwidth));
            delay.begin_slot(&beta, tau);
            let rbar = delay.values();
            let rates = schedule(
                config,
                &channels,
                &served,
                &queues.qhat,
                &rbar,
                &zf_params,
                &mrt_params,
                &mut infeasible,
                &mut degenerate,
            )?;
            let before = queues.clone();
            queues.step(&beta, &arrivals, &admitted, &rates, tau)?;
            delay.record_service(&rates, tau);
            let rec = drift_record(
                SlotQueues {
                    q: &before.q,
                    qhat: &before.qhat,
                    q_next: &queues.q,
                    qhat_next: &queues.qhat,
                },
                &beta,
                &arrivals,
                &admitted,
                &rates,
                tau,
            );
            for k in 0..k_count {
                for &ru in &paths[k] {
                    if beta[k][ru] > 0.0 {
                        obs[k].add_slot(ru, before.q[k][ru], rates[k][ru], beta[k][ru], arrivals[k], tau, unit);
                    }
                }
            }
            let total_rates: Vec<f64> = rates.iter().map(|r| r.iter().sum()).collect();
            for k in 0..k_count {
                slots.push(SlotRow {
                    frame,
                    slot: s,
                    ue: k,
                    a_bps: admitted[k],
                    r_bps: total_rates[k],
                    qhat_bits: queues.qhat[k],
                    sum_q_bits: queues.total_physical(k),
                    l: rec.l,
                    dl: rec.dl,
                    dl_ub: rec.dl_ub,
                });
            }
            drift.push(rec);
            a_norm.push(admitted.iter().map(|a| a * a).sum::<f64>().sqrt());
            qhat_l1.push(queues.qhat_l1());
            qhat_hist.push(queues.qhat.clone());
            a_hist.push(admitted);
            r_hist.push(total_rates);
        }
        steering.previous = Some((obs, beta));
    }

    let tail = tail_len(total_slots, config.warmup_fraction);
    let tail_mean = |v: &[f64]| v[v.len() - tail..].iter().sum::<f64>() / tail as f64;
    let column_mean = |h: &[Vec<f64>], k: usize| h[h.len() - tail..].iter().map(|row| row[k]).sum::<f64>() / tail as f64;
    let steady_rates: Vec<f64> = (0..k_count).map(|k| column_mean(&a_hist, k)).collect();
    let steady_service: Vec<f64> = (0..k_count).map(|k| column_mean(&r_hist, k)).collect();
    let worst_delay_s = if abar > 0.0 {
        (0..k_count)
            .map(|k| column_mean(&qhat_hist, k) / abar)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let steady_a_norm = tail_mean(&a_norm);
    let convergence_slot = settling_index(&running_mean(&a_norm), steady_a_norm, 0.1);
    let summary = RunSummary {
        scheme: config.scheme,
        scheduler: config.scheduler,
        phi: config.phi,
        seed: config.seed,
        frames: config.frames,
        slots: total_slots,
        steady_a_norm,
        steady_qhat_l1: tail_mean(&qhat_l1),
        worst_delay_s,
        convergence_slot,
        drift_violations: drift.iter().filter(|d| !d.holds(1e-12)).count(),
        max_b: drift.iter().map(|d| d.b).fold(0.0, f64::max),
        infeasible_events: infeasible,
        degenerate_events: degenerate,
        capacity_max,
    };
    Ok(RunTrace {
        slots,
        frames,
        drift,
        a_norm,
        qhat_l1,
        steady_rates,
        steady_service,
        summary,
    })
}

/// Cumulative averages `v[0..=i].mean()`.
pub fn running_mean(values: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            sum / (i + 1) as f64
        })
        .collect()
}

/// First index from which every value stays within `rel` of `target`.
pub fn settling_index(values: &[f64], target: f64, rel: f64) -> usize {
    let band = rel * target.abs();
    values
        .iter()
        .rposition(|v| (v - target).abs() > band)
        .map_or(0, |i| i + 1)
}

fn frame_split(
    config: &SimConfig,
    steering: &mut Steering,
    paths: &[Vec<usize>],
    frame: usize,
    num_rus: usize,
) -> Vec<Vec<f64>> {
    match config.scheme {
        Scheme::NumEfsd | Scheme::NumNru => paths.iter().map(|p| uniform_split(p, num_rus)).collect(),
        Scheme::Jfcs | Scheme::NumFra => {
            match steering.previous.take() {
                None => {
                    steering.learners = paths.iter().map(|p| FlowLearner::new(num_rus, p)).collect();
                }
                Some((obs, prev_beta)) => {
                    // frame index t = frame + 1; this is step t >= 2
                    let t = frame as u64 + 1;
                    for (k, learner) in steering.learners.iter_mut().enumerate() {
                        learner.update(&config.learning, t, &obs[k], &prev_beta[k], &paths[k]);
                    }
                }
            }
            steering
                .learners
                .iter()
                .zip(paths)
                .map(|(l, p)| l.deployed_split(p))
                .collect()
        }
    }
}

fn draw_arrivals(config: &SimConfig, seeds: &SeedTree, frame: usize, num_ues: usize) -> Vec<f64> {
    let mut rng = seeds.substream(Stream::Arrivals, frame as u64);
    (0..num_ues)
        .map(|_| {
            let u: f64 = rng.random();
            config.arrival_lo + (config.arrival_hi - config.arrival_lo) * u
        })
        .collect()
}

/// Largest `sum_paths W log2(1 + P ||h||^2 / N0)` over flows.
fn flow_capacity(channels: &ChannelRealization, beta: &[Vec<f64>], noise: f64, p_max: f64, bandwidth: f64) -> f64 {
    beta.iter()
        .enumerate()
        .map(|(k, b)| {
            b.iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(ru, _)| bandwidth * (1.0 + p_max * norm_sqr(channels.get(ru, k)) / noise).log2())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn schedule(
    config: &SimConfig,
    channels: &ChannelRealization,
    served: &[Vec<usize>],
    qhat: &[f64],
    rbar: &[Vec<f64>],
    zf: &ZfParams,
    mrt: &MrtParams,
    infeasible: &mut usize,
    degenerate: &mut usize,
) -> Result<Vec<Vec<f64>>> {
    let equal = config.scheme == Scheme::NumFra;
    match config.scheduler {
        Scheduler::Zfbf => {
            let policy = if equal {
                PowerPolicy::Equal
            } else {
                PowerPolicy::WaterFilling
            };
            let s = zf_schedule(channels, served, qhat, rbar, zf, policy)?;
            *infeasible += s.per_ru.iter().filter(|r| r.dropped_constraints).count();
            *degenerate += s.per_ru.iter().map(|r| r.degenerate).sum::<usize>();
            Ok(s.rates)
        }
        Scheduler::Mrt => {
            let gains = MrtGains::from_channels(channels, zf.noise_w);
            let s = if equal {
                equal_power_schedule(&gains, served, qhat, mrt)
            } else {
                ia_schedule(&gains, served, qhat, rbar, mrt)?
            };
            *infeasible += usize::from(s.dropped_constraints);
            Ok(s.rates)
        }
    }
}

/// Runs a benchmark scheme on an otherwise unchanged configuration.
pub fn run_benchmark(scheme: Scheme, config: &SimConfig) -> Result<RunTrace> {
    if scheme == Scheme::Jfcs {
        return Err(Error::config("run_benchmark expects num-fra, num-efsd or num-nru"));
    }
    run_simulation(&SimConfig {
        scheme,
        ..config.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Phi,
    Antennas,
    Lambda,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi" => Ok(Self::Phi),
            "M" | "m" | "antennas" => Ok(Self::Antennas),
            "lambda" => Ok(Self::Lambda),
            _ => Err(Error::config(format!("cannot sweep `{s}` (expected phi, M or lambda)"))),
        }
    }
}

impl SweepParameter {
    pub fn apply(self, config: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut c = config.clone();
        match self {
            Self::Phi => c.phi = value,
            Self::Lambda => c.learning.lambda = value,
            Self::Antennas => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::config(format!("antenna count must be a positive integer, got {value}")));
                }
                c.topology = c.topology.with_uniform_antennas(value as usize);
            }
        }
        Ok(c)
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub parameter: SweepParameter,
    /// `(value, summary or error)` sorted by value.
    pub runs: Vec<(f64, Result<RunTrace>)>,
    pub constants: Option<TheoremConstants>,
    pub scaling: Option<Result<ScalingReport>>,
}

/// Runs `config` at every value of `parameter` in parallel.
pub fn sweep(config: &SimConfig, parameter: SweepParameter, values: &[f64]) -> SweepOutcome {
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    let runs: Vec<(f64, Result<RunTrace>)> = values
        .par_iter()
        .map(|&v| (v, parameter.apply(config, v).and_then(|c| run_simulation(&c))))
        .collect();
    let (constants, scaling) = if parameter == SweepParameter::Phi && !runs.is_empty() {
        let caps: Vec<f64> = runs
            .iter()
            .filter_map(|(_, r)| r.as_ref().ok().map(|t| t.summary.capacity_max))
            .collect();
        match constants_for(config, caps.iter().copied().fold(0.0, f64::max)) {
            Ok(c) => {
                let scaling_runs = scaling_runs(config, &runs);
                let report = verify_scaling(&scaling_runs, &c, config.a_max / config.utility_unit);
                (Some(c), Some(report))
            }
            Err(e) => (None, Some(Err(e))),
        }
    } else {
        (None, None)
    };
    SweepOutcome {
        parameter,
        runs,
        constants,
        scaling,
    }
}

/// Steady statistics of phi-sweep runs in utility units. A run counts as
/// converged when its steady `||a||` settled before the tail window.
pub fn scaling_runs(config: &SimConfig, runs: &[(f64, Result<RunTrace>)]) -> Vec<ScalingRun> {
    let unit = config.utility_unit;
    let slots = config.total_slots();
    let warm = slots - tail_len(slots, config.warmup_fraction);
    runs.iter()
        .filter_map(|(phi, r)| {
            r.as_ref().ok().map(|t| ScalingRun {
                phi: *phi,
                qhat_l1: t.summary.steady_qhat_l1 / unit,
                rates: t.steady_rates.iter().map(|a| a / unit).collect(),
                converged: t.summary.convergence_slot <= warm,
            })
        })
        .collect()
}

/// Stability constants for `config` with the per-flow capacity bound
/// `capacity` (bits/s).
pub fn constants_for(config: &SimConfig, capacity: f64) -> Result<TheoremConstants> {
    let unit = config.utility_unit;
    let (psi, big_psi) = curvature_bounds(&LogUtility::default(), 0.0, config.a_max / unit, 101)?;
    theorem_constants(ConstantInputs {
        num_flows: config.topology.num_ues,
        tau: config.tau,
        psi,
        big_psi,
        a1_max: (config.arrival_hi / unit).powi(2),
        r_max: capacity / unit,
    })
}

/// Large-scale state of the first frame, for inspection.
pub fn first_frame(config: &SimConfig) -> Result<LargeScaleState> {
    let seeds = SeedTree::new(config.seed);
    let topo = Topology::new(config.topology.clone(), &seeds)?;
    Ok(topo.draw_large_scale(&seeds, 0))
}
