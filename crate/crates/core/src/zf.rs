//! Zero-forcing scheduler.
//!
//! Every RU projects each served UE's beam onto the null space of the other
//! UEs it serves, which removes intra-RU interference; the bandwidth split
//! across RUs removes the rest. Power then follows a weighted water-filling
//! whose per-RU multiplier is found by bisection.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::channel::{norm_sqr, ChannelRealization};
use crate::linalg::{combine, orthogonal_complement, project};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfParams {
    /// Bandwidth of one RU, `W / J`.
    pub bandwidth_hz: f64,
    pub tau: f64,
    pub noise_w: f64,
    pub p_max: f64,
    /// Bisection stops once the bracket is below `delta_rel` times the
    /// initial upper bracket.
    pub delta_rel: f64,
    pub rank_tol: f64,
    /// Effective gains below this fraction of `||h||^2` drop the UE.
    pub degenerate_rel: f64,
}

impl ZfParams {
    pub fn new(bandwidth_hz: f64, tau: f64, noise_w: f64, p_max: f64) -> Self {
        Self {
            bandwidth_hz,
            tau,
            noise_w,
            p_max,
            delta_rel: 1e-9,
            rank_tol: 1e-12,
            degenerate_rel: 1e-15,
        }
    }
}

/// Power needed to carry `rbar` bits in one slot over an interference-free
/// link: `(N0/nu)(2^{rbar/(W tau)} - 1)`, zero when `rbar <= 0`.
pub fn min_power(rbar: f64, bandwidth_hz: f64, tau: f64, nutilde: f64, noise_w: f64) -> f64 {
    if rbar <= 0.0 {
        return 0.0;
    }
    let p = noise_w / nutilde * ((rbar / (bandwidth_hz * tau)).exp2() - 1.0);
    if p.is_nan() {
        f64::INFINITY
    } else {
        p.max(0.0)
    }
}

/// Water level coefficient `qhat W / (tau ln 2)`.
pub fn water_level(qhat: f64, bandwidth_hz: f64, tau: f64) -> f64 {
    qhat * bandwidth_hz / (tau * LN_2)
}

/// `max(p_min, qhat W/(tau mu ln2) - N0/nu)`.
pub fn waterfill_power(
    mu: f64,
    qhat: f64,
    bandwidth_hz: f64,
    tau: f64,
    nutilde: f64,
    noise_w: f64,
    p_min: f64,
) -> f64 {
    waterfill(mu, water_level(qhat, bandwidth_hz, tau), noise_w / nutilde, p_min)
}

fn waterfill(mu: f64, level: f64, floor: f64, p_min: f64) -> f64 {
    let fill = if level == 0.0 { 0.0 } else { level / mu };
    (fill - floor).max(p_min)
}

/// One UE served by an RU, in water-filling form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterUser {
    /// `qhat W / (tau ln 2)`.
    pub level: f64,
    /// `N0 / nutilde`.
    pub floor: f64,
    pub p_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    pub mu: f64,
    pub powers: Vec<f64>,
    pub iterations: usize,
}

fn total_power(users: &[WaterUser], mu: f64) -> f64 {
    users.iter().map(|u| waterfill(mu, u.level, u.floor, u.p_min)).sum()
}

/// Bisection on the per-RU power price.
///
/// Returns the smallest price (up to the bracket tolerance) whose
/// water-filling powers fit the budget.
pub fn bisect_mu(users: &[WaterUser], p_max: f64, delta_rel: f64) -> Result<Bisection> {
    let pinned: f64 = users.iter().map(|u| u.p_min).sum();
    if !(pinned <= p_max * (1.0 + 1e-12)) {
        let detail: Vec<String> = users
            .iter()
            .enumerate()
            .map(|(i, u)| format!("ue{i}: p_min={:.3e}", u.p_min))
            .collect();
        return Err(Error::Infeasible(format!(
            "minimum powers sum to {pinned:.6e} W > budget {p_max:.6e} W ({})",
            detail.join(", ")
        )));
    }
    let max_level = users.iter().map(|u| u.level).fold(0.0, f64::max);
    if max_level == 0.0 {
        return Ok(Bisection {
            mu: 0.0,
            powers: users.iter().map(|u| u.p_min).collect(),
            iterations: 0,
        });
    }
    let p_unit = p_max / (10.0 * users.len() as f64);
    let mut hi = max_level / p_unit;
    while total_power(users, hi) > p_max {
        hi *= 2.0;
    }
    let delta = delta_rel * hi;
    let mut lo = 0.0;
    let mut iterations = 0;
    while hi - lo > delta {
        let mid = 0.5 * (lo + hi);
        if total_power(users, mid) <= p_max {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let mu = polish(users, p_max, lo, hi).unwrap_or(hi);
    Ok(Bisection {
        mu,
        powers: users.iter().map(|u| waterfill(mu, u.level, u.floor, u.p_min)).collect(),
        iterations,
    })
}

/// Exact price for the active set at `hi`, if it lands in `[lo, hi]` and
/// fits the budget.
fn polish(users: &[WaterUser], p_max: f64, lo: f64, hi: f64) -> Option<f64> {
    let (mut level, mut floor, mut pinned) = (0.0, 0.0, 0.0);
    for u in users {
        if u.level > 0.0 && u.level / hi - u.floor > u.p_min {
            level += u.level;
            floor += u.floor;
        } else {
            pinned += u.p_min;
        }
    }
    let room = p_max - pinned + floor;
    if level == 0.0 || room <= 0.0 {
        return None;
    }
    let mu = level / room;
    (mu >= lo && mu <= hi && total_power(users, mu) <= p_max * (1.0 + 1e-12)).then_some(mu)
}

/// Power rule for one RU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerPolicy {
    WaterFilling,
    /// Budget split evenly over served UEs; minimum rates ignored.
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuZf {
    pub ues: Vec<usize>,
    pub nutilde: Vec<f64>,
    pub basis: Vec<Vec<Vec<Complex64>>>,
    pub powers: Vec<f64>,
    pub mu: f64,
    pub dropped_constraints: bool,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZfSchedule {
    /// `[k][ru]`, watts.
    pub powers: Vec<Vec<f64>>,
    /// `[k][ru]`, bits/s.
    pub rates: Vec<Vec<f64>>,
    pub per_ru: Vec<RuZf>,
}

impl ZfSchedule {
    pub fn objective(&self, qhat: &[f64], tau: f64) -> f64 {
        weighted_sum_rate(&self.rates, qhat, tau)
    }

    /// Beamformer `sqrt(p/nu) V V^H h` of `ue` at `ru`.
    pub fn beamformer(&self, channels: &ChannelRealization, ru: usize, ue: usize) -> Option<Vec<Complex64>> {
        let info = &self.per_ru[ru];
        let idx = info.ues.iter().position(|&k| k == ue)?;
        let basis = &info.basis[idx];
        let h = channels.get(ru, ue);
        let coords = project(basis, h);
        let scale = if info.nutilde[idx] > 0.0 {
            (info.powers[idx] / info.nutilde[idx]).sqrt()
        } else {
            0.0
        };
        let coords: Vec<Complex64> = coords.into_iter().map(|c| c * scale).collect();
        Some(combine(basis, &coords, h.len()))
    }
}

pub fn weighted_sum_rate(rates: &[Vec<f64>], qhat: &[f64], tau: f64) -> f64 {
    rates
        .iter()
        .zip(qhat)
        .map(|(r, q)| q / tau * r.iter().sum::<f64>())
        .sum()
}

/// Schedules one slot. `served[ru]` lists the UEs that RU serves;
/// `rbar[k][ru]` is the bits owed on each path this slot.
pub fn zf_schedule(
    channels: &ChannelRealization,
    served: &[Vec<usize>],
    qhat: &[f64],
    rbar: &[Vec<f64>],
    params: &ZfParams,
    policy: PowerPolicy,
) -> Result<ZfSchedule> {
    let num_ues = channels.num_ues;
    let num_rus = channels.num_rus();
    let mut powers = vec![vec![0.0; num_rus]; num_ues];
    let mut rates = vec![vec![0.0; num_rus]; num_ues];
    let mut per_ru = Vec::with_capacity(num_rus);
    for ru in 0..num_rus {
        let info = schedule_ru(channels, ru, &served[ru], qhat, rbar, params, policy)?;
        for (i, &k) in info.ues.iter().enumerate() {
            powers[k][ru] = info.powers[i];
            rates[k][ru] = if info.nutilde[i] > 0.0 {
                params.bandwidth_hz * (1.0 + info.powers[i] * info.nutilde[i] / params.noise_w).log2()
            } else {
                0.0
            };
        }
        per_ru.push(info);
    }
    Ok(ZfSchedule {
        powers,
        rates,
        per_ru,
    })
}

fn schedule_ru(
    channels: &ChannelRealization,
    ru: usize,
    ues: &[usize],
    qhat: &[f64],
    rbar: &[Vec<f64>],
    params: &ZfParams,
    policy: PowerPolicy,
) -> Result<RuZf> {
    let m = channels.get(ru, 0).len();
    if !ues.is_empty() && m <= ues.len() {
        return Err(Error::config(format!(
            "zero forcing at RU {ru} needs more than {} antennas, has {m}",
            ues.len()
        )));
    }
    let mut nutilde = Vec::with_capacity(ues.len());
    let mut basis = Vec::with_capacity(ues.len());
    let mut degenerate = 0;
    for &k in ues {
        let others: Vec<Vec<Complex64>> = ues
            .iter()
            .filter(|&&o| o != k)
            .map(|&o| channels.get(ru, o).to_vec())
            .collect();
        let v = orthogonal_complement(&others, m, params.rank_tol);
        let h = channels.get(ru, k);
        let nu: f64 = project(&v, h).iter().map(|z| z.norm_sqr()).sum();
        if !(nu >= params.degenerate_rel * norm_sqr(h)) || nu == 0.0 {
            log::debug!("RU {ru}: dropping UE {k}, effective gain {nu:.3e} is degenerate");
            degenerate += 1;
            nutilde.push(0.0);
        } else {
            nutilde.push(nu);
        }
        basis.push(v);
    }
    let active: Vec<usize> = (0..ues.len()).filter(|&i| nutilde[i] > 0.0).collect();
    let mut powers = vec![0.0; ues.len()];
    let mut mu = 0.0;
    let mut dropped = false;
    match policy {
        PowerPolicy::Equal => {
            for &i in &active {
                powers[i] = params.p_max / active.len() as f64;
            }
        }
        PowerPolicy::WaterFilling => {
            let mut users: Vec<WaterUser> = active
                .iter()
                .map(|&i| {
                    let k = ues[i];
                    WaterUser {
                        level: water_level(qhat[k], params.bandwidth_hz, params.tau),
                        floor: params.noise_w / nutilde[i],
                        p_min: min_power(
                            rbar[k][ru],
                            params.bandwidth_hz,
                            params.tau,
                            nutilde[i],
                            params.noise_w,
                        ),
                    }
                })
                .collect();
            let pinned: f64 = users.iter().map(|u| u.p_min).sum();
            if !(pinned <= params.p_max * (1.0 + 1e-12)) {
                log::debug!("RU {ru}: minimum rates need {pinned:.3e} W, dropping them");
                dropped = true;
                for u in &mut users {
                    u.p_min = 0.0;
                }
            }
            if !users.is_empty() {
                let b = bisect_mu(&users, params.p_max, params.delta_rel)?;
                mu = b.mu;
                for (&i, p) in active.iter().zip(b.powers) {
                    powers[i] = p;
                }
            }
        }
    }
    Ok(RuZf {
        ues: ues.to_vec(),
        nutilde,
        basis,
        powers,
        mu,
        dropped_constraints: dropped,
        degenerate,
    })
}
