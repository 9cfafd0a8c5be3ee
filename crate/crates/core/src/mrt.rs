//! Maximum-ratio transmission power control by inner approximation.
//!
//! Beam directions are fixed to `h / ||h||`; only the powers are optimized.
//! Each outer iteration replaces every rate by a concave lower bound that is
//! tight at the current point and solves the resulting convex program with
//! projected gradient ascent over the per-RU power simplexes.

use std::f64::consts::LN_2;

use crate::channel::{norm_sqr, ChannelRealization};
use crate::linalg::inner;
use crate::{Error, Result};

/// Channel gains seen by MRT beams.
#[derive(Debug, Clone, PartialEq)]
pub struct MrtGains {
    /// `||h_k^ru||^2`, indexed `[k][ru]`.
    pub nu: Vec<Vec<f64>>,
    /// `|h_k^H h_k'|^2 / nu_k'` at each RU, indexed `[k][k'][ru]`.
    pub cross: Vec<Vec<Vec<f64>>>,
    pub noise_w: f64,
}

impl MrtGains {
    pub fn from_channels(channels: &ChannelRealization, noise_w: f64) -> Self {
        let k_count = channels.num_ues;
        let j_count = channels.num_rus();
        let nu: Vec<Vec<f64>> = (0..k_count)
            .map(|k| (0..j_count).map(|ru| norm_sqr(channels.get(ru, k))).collect())
            .collect();
        let cross = (0..k_count)
            .map(|k| {
                (0..k_count)
                    .map(|kp| {
                        (0..j_count)
                            .map(|ru| {
                                if k == kp {
                                    nu[k][ru]
                                } else if nu[kp][ru] > 0.0 {
                                    inner(channels.get(ru, k), channels.get(ru, kp)).norm_sqr() / nu[kp][ru]
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { nu, cross, noise_w }
    }

    pub fn num_ues(&self) -> usize {
        self.nu.len()
    }

    pub fn num_rus(&self) -> usize {
        self.nu.first().map_or(0, Vec::len)
    }
}

/// Interference plus noise `Phi` of the stream `(k, ru)` under powers
/// `p[k][ru]`, counting only paths listed in `served`.
pub fn interference(p: &[Vec<f64>], gains: &MrtGains, served: &[Vec<usize>], k: usize, ru: usize) -> f64 {
    let mut phi = gains.noise_w;
    for (r, ues) in served.iter().enumerate() {
        for &kp in ues {
            if kp == k && r == ru {
                continue;
            }
            phi += p[kp][r] * gains.cross[k][kp][r];
        }
    }
    phi
}

/// SINR `p nu / Phi` of stream `(k, ru)`.
pub fn mrt_sinr(p: &[Vec<f64>], gains: &MrtGains, served: &[Vec<usize>], k: usize, ru: usize) -> f64 {
    p[k][ru] * gains.nu[k][ru] / interference(p, gains, served, k, ru)
}

/// Concave lower bound of `ln(1 + v/z)` expanded at `(vbar, zbar)`.
pub fn concave_lower_bound(v: f64, z: f64, vbar: f64, zbar: f64) -> f64 {
    let g = vbar / zbar;
    g.ln_1p() - g + 2.0 * vbar.sqrt() * v.sqrt() / zbar - vbar * (z + v) / (zbar * (zbar + vbar))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrtParams {
    pub bandwidth_hz: f64,
    pub tau: f64,
    pub p_max: f64,
    pub ia_tol: f64,
    pub ia_max_iter: usize,
    pub inner_max_steps: usize,
    pub grad_tol: f64,
    pub feasibility_rounds: usize,
    /// Smallest normalized power `p / P_max` kept on a served path.
    pub floor: f64,
}

impl MrtParams {
    pub fn new(bandwidth_hz: f64, tau: f64, p_max: f64) -> Self {
        Self {
            bandwidth_hz,
            tau,
            p_max,
            ia_tol: 1e-5,
            ia_max_iter: 50,
            inner_max_steps: 500,
            grad_tol: 1e-6,
            feasibility_rounds: 20,
            floor: 1e-10,
        }
    }
}

/// The slot problem in normalized form: powers `x = p / P_max`, gains
/// divided by the noise power, rates in nats per channel use.
#[derive(Debug, Clone)]
pub struct Problem {
    /// `(k, ru)` of each variable.
    pub vars: Vec<(usize, usize)>,
    /// Variables at each RU.
    groups: Vec<Vec<usize>>,
    /// Normalized own gain `nu P_max / N0` of each variable.
    gain: Vec<f64>,
    /// `coupling[k][i]`: normalized gain of variable `i` at UE `k`.
    coupling: Vec<Vec<f64>>,
    /// Objective weight of each variable's UE.
    weight: Vec<f64>,
    /// Required nats per channel use, `None` when inactive.
    need: Vec<Option<f64>>,
    floor: f64,
    num_ues: usize,
}

const MAX_CORNERS: usize = 1024;
/// Share of equal power kept at a corner start; an IA expansion point at
/// zero power never moves.
const CORNER_MIX: f64 = 0.1;
const EXTRAPOLATION_STEPS: usize = 12;

/// Concave surrogate `s_i(x) = c_i + a_i sqrt(x_i) - b_i I_k(x)` for every
/// variable, built at an expansion point.
#[derive(Debug, Clone)]
struct Surrogate {
    constant: Vec<f64>,
    root: Vec<f64>,
    linear: Vec<f64>,
}

impl Problem {
    pub fn new(
        gains: &MrtGains,
        served: &[Vec<usize>],
        qhat: &[f64],
        rbar: &[Vec<f64>],
        params: &MrtParams,
    ) -> Self {
        let num_ues = gains.num_ues();
        let scale = params.p_max / gains.noise_w;
        let mut vars = Vec::new();
        let mut groups = vec![Vec::new(); served.len()];
        for (ru, ues) in served.iter().enumerate() {
            for &k in ues {
                groups[ru].push(vars.len());
                vars.push((k, ru));
            }
        }
        let qmax = qhat.iter().copied().fold(0.0, f64::max);
        let weight = vars
            .iter()
            .map(|&(k, _)| if qmax > 0.0 { qhat[k] / qmax } else { 0.0 })
            .collect();
        let gain = vars.iter().map(|&(k, ru)| gains.nu[k][ru] * scale).collect();
        let coupling = (0..num_ues)
            .map(|k| vars.iter().map(|&(kp, ru)| gains.cross[k][kp][ru] * scale).collect())
            .collect();
        let wt = params.bandwidth_hz * params.tau;
        let need = vars
            .iter()
            .map(|&(k, ru)| {
                let r = rbar[k][ru];
                (r > 0.0).then(|| r * LN_2 / wt)
            })
            .collect();
        Self {
            vars,
            groups,
            gain,
            coupling,
            weight,
            need,
            floor: params.floor,
            num_ues,
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn has_constraints(&self) -> bool {
        self.need.iter().any(Option::is_some)
    }

    /// Equal split of every RU's budget.
    pub fn equal_power(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for g in &self.groups {
            for &i in g {
                x[i] = 1.0 / g.len() as f64;
            }
        }
        x
    }

    /// Candidate starting points: equal power, then every choice of one
    /// UE (or none) per RU taking that RU's whole budget. Only the
    /// greedy choice is tried when there are more than `MAX_CORNERS`.
    pub fn starting_points(&self) -> Vec<Vec<f64>> {
        let equal = self.equal_power();
        let mut out = vec![equal.clone()];
        let groups: Vec<&Vec<usize>> = self.groups.iter().filter(|g| !g.is_empty()).collect();
        if groups.is_empty() {
            return out;
        }
        let corner = |pick: &[Option<usize>]| {
            let mut x = vec![self.floor; self.len()];
            for &i in pick.iter().flatten() {
                x[i] = 1.0 - self.floor * (self.groups.iter().find(|g| g.contains(&i)).map_or(1, Vec::len) - 1) as f64;
            }
            x
        };
        let count = groups.iter().try_fold(1usize, |acc, g| acc.checked_mul(g.len() + 1));
        match count {
            Some(n) if n <= MAX_CORNERS => {
                let mut idx = vec![0usize; groups.len()];
                for _ in 0..n {
                    let pick: Vec<Option<usize>> = groups.iter().zip(&idx).map(|(g, &j)| g.get(j).copied()).collect();
                    out.push(corner(&pick));
                    for (d, g) in idx.iter_mut().zip(&groups) {
                        *d += 1;
                        if *d <= g.len() {
                            break;
                        }
                        *d = 0;
                    }
                }
            }
            _ => {
                let pick: Vec<Option<usize>> = groups
                    .iter()
                    .map(|g| {
                        g.iter()
                            .copied()
                            .max_by(|&a, &b| (self.weight[a] * self.gain[a]).total_cmp(&(self.weight[b] * self.gain[b])))
                    })
                    .collect();
                out.push(corner(&pick));
            }
        }
        out
    }

    /// Start for the inner approximation: the candidate with the best true
    /// objective, blended with equal power so that no variable sits at
    /// zero. Falls back to equal power when no blended candidate meets
    /// the minimum rates.
    pub fn best_start(&self) -> Vec<f64> {
        let equal = self.equal_power();
        let constrained = self.has_constraints();
        self.starting_points()
            .into_iter()
            .map(|c| {
                let score = self.true_objective(&c);
                let x: Vec<f64> = c.iter().zip(&equal).map(|(c, e)| (1.0 - CORNER_MIX) * c + CORNER_MIX * e).collect();
                (score, x)
            })
            .filter(|(_, x)| !constrained || self.true_slack(x) > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map_or(equal, |(_, x)| x)
    }

    /// Total normalized received power plus noise at every UE.
    fn received(&self, x: &[f64]) -> Vec<f64> {
        self.coupling
            .iter()
            .map(|row| 1.0 + row.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>())
            .collect()
    }

    /// Achievable nats per channel use of every variable.
    pub fn true_rates(&self, x: &[f64]) -> Vec<f64> {
        let rx = self.received(x);
        self.vars
            .iter()
            .enumerate()
            .map(|(i, &(k, _))| {
                let v = x[i] * self.gain[i];
                (v / (rx[k] - v)).ln_1p()
            })
            .collect()
    }

    pub fn true_objective(&self, x: &[f64]) -> f64 {
        self.true_rates(x).iter().zip(&self.weight).map(|(r, w)| r * w).sum()
    }

    /// Smallest slack `rate - need` over constrained variables, or
    /// `+inf` when none are constrained.
    pub fn true_slack(&self, x: &[f64]) -> f64 {
        self.true_rates(x)
            .iter()
            .zip(&self.need)
            .filter_map(|(r, n)| n.map(|n| r - n))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether some constraint exceeds the interference-free capacity.
    pub fn exceeds_capacity(&self) -> bool {
        self.need
            .iter()
            .zip(&self.gain)
            .any(|(n, g)| n.is_some_and(|n| n > g.ln_1p()))
    }

    fn surrogate(&self, xbar: &[f64]) -> Surrogate {
        let rx = self.received(xbar);
        let n = self.len();
        let mut s = Surrogate {
            constant: Vec::with_capacity(n),
            root: Vec::with_capacity(n),
            linear: Vec::with_capacity(n),
        };
        for (i, &(k, _)) in self.vars.iter().enumerate() {
            let vbar = xbar[i] * self.gain[i];
            let zbar = rx[k] - vbar;
            let g = vbar / zbar;
            s.constant.push(g.ln_1p() - g);
            s.root.push(2.0 * vbar.sqrt() * self.gain[i].sqrt() / zbar);
            s.linear.push(vbar / (zbar * rx[k]));
        }
        s
    }

    fn surrogate_values(&self, s: &Surrogate, x: &[f64]) -> Vec<f64> {
        let rx = self.received(x);
        self.vars
            .iter()
            .enumerate()
            .map(|(i, &(k, _))| s.constant[i] + s.root[i] * x[i].sqrt() - s.linear[i] * rx[k])
            .collect()
    }

    /// Gradient of `sum_i coef_i s_i(x)`.
    fn surrogate_gradient(&self, s: &Surrogate, x: &[f64], coef: &[f64]) -> Vec<f64> {
        let mut per_ue = vec![0.0; self.num_ues];
        for (i, &(k, _)) in self.vars.iter().enumerate() {
            per_ue[k] += coef[i] * s.linear[i];
        }
        (0..self.len())
            .map(|j| {
                let own = coef[j] * s.root[j] / (2.0 * x[j].max(self.floor).sqrt());
                let cross: f64 = (0..self.num_ues).map(|k| per_ue[k] * self.coupling[k][j]).sum();
                own - cross
            })
            .collect()
    }

    /// Surrogate objective `sum_i w_i s_i(x)` at expansion point `xbar`.
    pub fn surrogate_objective(&self, xbar: &[f64], x: &[f64]) -> f64 {
        let s = self.surrogate(xbar);
        self.surrogate_values(&s, x).iter().zip(&self.weight).map(|(v, w)| v * w).sum()
    }

    /// Smallest surrogate slack at expansion point `xbar`.
    pub fn surrogate_slack(&self, xbar: &[f64], x: &[f64]) -> f64 {
        let s = self.surrogate(xbar);
        self.surrogate_values(&s, x)
            .iter()
            .zip(&self.need)
            .filter_map(|(r, n)| n.map(|n| r - n))
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean projection onto `{x >= floor, sum_group x <= 1}`.
    pub fn project(&self, x: &mut [f64]) {
        for g in &self.groups {
            let budget = 1.0 - self.floor * g.len() as f64;
            let y: Vec<f64> = g.iter().map(|&i| x[i] - self.floor).collect();
            let p = project_capped_simplex(&y, budget);
            for (&i, v) in g.iter().zip(p) {
                x[i] = v + self.floor;
            }
        }
    }

    pub fn to_powers(&self, x: &[f64], num_rus: usize, p_max: f64) -> Vec<Vec<f64>> {
        let mut p = vec![vec![0.0; num_rus]; self.num_ues];
        for (i, &(k, ru)) in self.vars.iter().enumerate() {
            p[k][ru] = x[i] * p_max;
        }
        p
    }
}

/// Projection onto `{y >= 0, sum y <= budget}`.
pub fn project_capped_simplex(y: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - budget) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Concave objective maximized by [`ascend`].
trait Concave {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

struct Penalized<'a> {
    problem: &'a Problem,
    surrogate: &'a Surrogate,
    rho: f64,
}

impl Concave for Penalized<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let s = self.problem.surrogate_values(self.surrogate, x);
        s.iter()
            .zip(&self.problem.weight)
            .zip(&self.problem.need)
            .map(|((v, w), n)| w * v + n.map_or(0.0, |n| self.rho * (v - n).min(0.0)))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = self.problem.surrogate_values(self.surrogate, x);
        let coef: Vec<f64> = s
            .iter()
            .zip(&self.problem.weight)
            .zip(&self.problem.need)
            .map(|((v, w), n)| match n {
                Some(n) if *v < *n => w + self.rho,
                _ => *w,
            })
            .collect();
        self.problem.surrogate_gradient(self.surrogate, x, &coef)
    }
}

/// Smoothed minimum slack, `-T ln sum exp(-(s_i - n_i)/T)`.
struct SoftMinSlack<'a> {
    problem: &'a Problem,
    surrogate: &'a Surrogate,
    temperature: f64,
}

impl SoftMinSlack<'_> {
    fn slacks(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let s = self.problem.surrogate_values(self.surrogate, x);
        s.iter()
            .zip(&self.problem.need)
            .enumerate()
            .filter_map(|(i, (v, n))| n.map(|n| (i, v - n)))
            .collect()
    }
}

impl Concave for SoftMinSlack<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let sl = self.slacks(x);
        let m = sl.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let sum: f64 = sl.iter().map(|s| (-(s.1 - m) / self.temperature).exp()).sum();
        m - self.temperature * sum.ln()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let sl = self.slacks(x);
        let m = sl.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let e: Vec<f64> = sl.iter().map(|s| (-(s.1 - m) / self.temperature).exp()).collect();
        let total: f64 = e.iter().sum();
        let mut coef = vec![0.0; self.problem.len()];
        for ((i, _), ei) in sl.iter().zip(&e) {
            coef[*i] = ei / total;
        }
        self.problem.surrogate_gradient(self.surrogate, x, &coef)
    }
}

/// Projected gradient ascent with Armijo backtracking.
fn ascend<F: Concave>(f: &F, problem: &Problem, x0: &[f64], max_steps: usize, grad_tol: f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut fx = f.value(&x);
    let mut alpha = 1.0;
    let mut first = true;
    for _ in 0..max_steps {
        let g = f.gradient(&x);
        if first {
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax == 0.0 {
                break;
            }
            alpha = 1.0 / gmax;
            first = false;
        }
        let mut accepted = None;
        let mut a = alpha;
        for _ in 0..60 {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + a * gi).collect();
            problem.project(&mut y);
            let dir: f64 = y.iter().zip(&x).zip(&g).map(|((yi, xi), gi)| (yi - xi) * gi).sum();
            let fy = f.value(&y);
            if fy >= fx + 1e-4 * dir {
                accepted = Some((y, fy, a));
                break;
            }
            a *= 0.5;
        }
        let Some((y, fy, a)) = accepted else { break };
        let step: f64 = y.iter().zip(&x).map(|(yi, xi)| (yi - xi).powi(2)).sum::<f64>().sqrt();
        x = y;
        let gain = fy - fx;
        fx = fy;
        alpha = a * 2.0;
        if step / a < grad_tol || step < 1e-14 || gain.abs() <= 1e-15 * fx.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// Maximizes the surrogate objective at expansion point `xbar` subject to
/// the surrogate minimum rates and the power budgets.
///
/// `xbar` must satisfy the constraints; the result is feasible and its
/// surrogate objective is at least that of `xbar`.
pub fn solve_inner_convex(problem: &Problem, xbar: &[f64], params: &MrtParams) -> Vec<f64> {
    let s = problem.surrogate(xbar);
    let base = problem.surrogate_objective(xbar, xbar);
    let mut rho = 1.0;
    for _ in 0..40 {
        let f = Penalized {
            problem,
            surrogate: &s,
            rho,
        };
        let x = ascend(&f, problem, xbar, params.inner_max_steps, params.grad_tol);
        let slack = problem
            .surrogate_values(&s, &x)
            .iter()
            .zip(&problem.need)
            .filter_map(|(v, n)| n.map(|n| v - n))
            .fold(f64::INFINITY, f64::min);
        if slack >= -1e-12 {
            let obj = problem.surrogate_objective(xbar, &x);
            return if obj >= base { x } else { xbar.to_vec() };
        }
        if !problem.has_constraints() {
            break;
        }
        rho *= 2.0;
    }
    xbar.to_vec()
}

/// Searches for powers meeting every minimum rate by repeatedly
/// maximizing the smallest surrogate slack.
pub fn find_feasible_init(problem: &Problem, start: &[f64], params: &MrtParams) -> Result<Vec<f64>> {
    if !problem.has_constraints() {
        return Ok(start.to_vec());
    }
    if problem.exceeds_capacity() {
        return Err(Error::Infeasible(
            "a minimum rate exceeds the interference-free link capacity".into(),
        ));
    }
    let mut x = start.to_vec();
    let mut best = problem.true_slack(&x);
    for _ in 0..params.feasibility_rounds {
        if best > 0.0 {
            return Ok(x);
        }
        let s = problem.surrogate(&x);
        let f = SoftMinSlack {
            problem,
            surrogate: &s,
            temperature: 1e-3,
        };
        let y = ascend(&f, problem, &x, params.inner_max_steps, params.grad_tol);
        let slack = problem.true_slack(&y);
        if slack <= best + 1e-12 {
            break;
        }
        x = y;
        best = slack;
    }
    if best > 0.0 {
        Ok(x)
    } else {
        Err(Error::Infeasible(format!(
            "best minimum-rate slack {best:.3e} nats after {} rounds",
            params.feasibility_rounds
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrtSchedule {
    /// `[k][ru]`, watts.
    pub powers: Vec<Vec<f64>>,
    /// `[k][ru]`, bits/s.
    pub rates: Vec<Vec<f64>>,
    /// Surrogate objective after each IA iteration, starting with the
    /// initial point. Units: weighted nats.
    pub surrogate_history: Vec<f64>,
    /// True weighted objective at each iterate, same units.
    pub objective_history: Vec<f64>,
    pub dropped_constraints: bool,
}

/// Inner-approximation schedule for one slot.
pub fn ia_schedule(
    gains: &MrtGains,
    served: &[Vec<usize>],
    qhat: &[f64],
    rbar: &[Vec<f64>],
    params: &MrtParams,
) -> Result<MrtSchedule> {
    let mut problem = Problem::new(gains, served, qhat, rbar, params);
    let start = problem.best_start();
    let mut dropped = false;
    let mut x = match find_feasible_init(&problem, &start, params) {
        Ok(x) => x,
        Err(Error::Infeasible(msg)) => {
            log::debug!("MRT minimum rates dropped: {msg}");
            dropped = true;
            problem.need.iter_mut().for_each(|n| *n = None);
            start
        }
        Err(e) => return Err(e),
    };
    let mut surrogate_history = vec![problem.surrogate_objective(&x, &x)];
    let mut objective_history = vec![problem.true_objective(&x)];
    for _ in 0..params.ia_max_iter {
        let y = solve_inner_convex(&problem, &x, params);
        surrogate_history.push(problem.surrogate_objective(&x, &y));
        let y = extrapolate(&problem, &x, y);
        let obj = problem.true_objective(&y);
        let prev = *objective_history.last().expect("nonempty");
        objective_history.push(obj);
        x = y;
        if (obj - prev).abs() <= params.ia_tol * prev.abs().max(1e-300) {
            break;
        }
    }
    Ok(finish(&problem, gains, served, &x, params, surrogate_history, objective_history, dropped))
}

/// Pushes `y` further along `y - x` (doubling the step, projected) while
/// the true objective keeps improving and the minimum rates still hold.
fn extrapolate(problem: &Problem, x: &[f64], y: Vec<f64>) -> Vec<f64> {
    let constrained = problem.has_constraints();
    let mut best = problem.true_objective(&y);
    let mut out = y;
    let dir: Vec<f64> = out.iter().zip(x).map(|(a, b)| a - b).collect();
    let mut t = 2.0;
    for _ in 0..EXTRAPOLATION_STEPS {
        let mut z: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
        problem.project(&mut z);
        let obj = problem.true_objective(&z);
        if !(obj > best) || (constrained && problem.true_slack(&z) < 0.0) {
            break;
        }
        best = obj;
        out = z;
        t *= 2.0;
    }
    out
}

/// Equal power on every served path.
pub fn equal_power_schedule(gains: &MrtGains, served: &[Vec<usize>], qhat: &[f64], params: &MrtParams) -> MrtSchedule {
    let rbar = vec![vec![0.0; gains.num_rus()]; gains.num_ues()];
    let problem = Problem::new(gains, served, qhat, &rbar, params);
    let x = problem.equal_power();
    let obj = problem.true_objective(&x);
    finish(&problem, gains, served, &x, params, vec![obj], vec![obj], false)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &Problem,
    gains: &MrtGains,
    served: &[Vec<usize>],
    x: &[f64],
    params: &MrtParams,
    surrogate_history: Vec<f64>,
    objective_history: Vec<f64>,
    dropped: bool,
) -> MrtSchedule {
    let powers = problem.to_powers(x, gains.num_rus(), params.p_max);
    let mut rates = vec![vec![0.0; gains.num_rus()]; gains.num_ues()];
    for (ru, ues) in served.iter().enumerate() {
        for &k in ues {
            rates[k][ru] = params.bandwidth_hz * mrt_sinr(&powers, gains, served, k, ru).ln_1p() / LN_2;
        }
    }
    MrtSchedule {
        powers,
        rates,
        surrogate_history,
        objective_history,
        dropped_constraints: dropped,
    }
}
