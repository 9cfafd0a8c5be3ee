//! Lyapunov bookkeeping, stability constants and scaling checks.

use crate::{Error, Result};

/// `(sum q^2 + sum qhat^2) / (2 tau^2)`.
pub fn lyapunov(q: &[Vec<f64>], qhat: &[f64], tau: f64) -> f64 {
    let phys: f64 = q.iter().flatten().map(|v| v * v).sum();
    let virt: f64 = qhat.iter().map(|v| v * v).sum();
    (phys + virt) / (2.0 * tau * tau)
}

/// Drift of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftRecord {
    /// Lyapunov value at the start of the slot.
    pub l: f64,
    /// Realized drift `L' - L`.
    pub dl: f64,
    /// Upper bound on the drift from the unclamped recursion.
    pub dl_ub: f64,
    /// Second-moment term of the bound.
    pub b: f64,
    /// Magnitude of the summed terms, used to scale rounding tolerances.
    pub scale: f64,
}

impl DriftRecord {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.dl <= self.dl_ub + rel_tol * self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Queue contents of one slot, before and after the update.
#[derive(Debug, Clone, Copy)]
pub struct SlotQueues<'a> {
    pub q: &'a [Vec<f64>],
    pub qhat: &'a [f64],
    pub q_next: &'a [Vec<f64>],
    pub qhat_next: &'a [f64],
}

/// Drift record of a slot given the per-path splits `beta[k][ru]`,
/// arrivals `A[k]`, admitted rates `a[k]` and path rates `r[k][ru]`
/// (bits/s).
pub fn drift_record(
    queues: SlotQueues<'_>,
    beta: &[Vec<f64>],
    arrivals: &[f64],
    admitted: &[f64],
    rates: &[Vec<f64>],
    tau: f64,
) -> DriftRecord {
    let mut linear = 0.0;
    let mut second = 0.0;
    let mut scale = 0.0;
    let mut dl = 0.0;
    let t2 = tau * tau;
    for k in 0..queues.qhat.len() {
        for ru in 0..queues.q[k].len() {
            let q = queues.q[k][ru];
            let qn = queues.q_next[k][ru];
            let x = beta[k][ru] * arrivals[k] - rates[k][ru];
            linear += q / tau * x;
            second += 0.5 * x * x;
            scale += (q / tau * x).abs() + 0.5 * x * x + (qn * qn + q * q) / (2.0 * t2);
            dl += (qn - q) * (qn + q) / (2.0 * t2);
        }
        let qh = queues.qhat[k];
        let qhn = queues.qhat_next[k];
        let x = admitted[k] - rates[k].iter().sum::<f64>();
        linear += qh / tau * x;
        second += 0.5 * x * x;
        scale += (qh / tau * x).abs() + 0.5 * x * x + (qhn * qhn + qh * qh) / (2.0 * t2);
        dl += (qhn - qh) * (qhn + qh) / (2.0 * t2);
    }
    DriftRecord {
        l: lyapunov(queues.q, queues.qhat, tau),
        dl,
        dl_ub: linear + second,
        b: second,
        scale,
    }
}

/// `sum (q/tau)(beta A - r) + sum (qhat/tau)(a - r) + B` and `B`.
pub fn drift_upper_bound(
    q: &[Vec<f64>],
    qhat: &[f64],
    beta: &[Vec<f64>],
    arrivals: &[f64],
    admitted: &[f64],
    rates: &[Vec<f64>],
    tau: f64,
) -> (f64, f64) {
    let r = drift_record(
        SlotQueues {
            q,
            qhat,
            q_next: q,
            qhat_next: qhat,
        },
        beta,
        arrivals,
        admitted,
        rates,
        tau,
    );
    (r.dl_ub, r.b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantInputs {
    pub num_flows: usize,
    pub tau: f64,
    pub psi: f64,
    pub big_psi: f64,
    pub a1_max: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub inputs: ConstantInputs,
}

impl TheoremConstants {
    /// `K Psi^2 (A1 + r^2) / (4 psi^2)`, the expanded form of `C3`.
    pub fn c3_expanded(&self) -> f64 {
        let i = &self.inputs;
        i.num_flows as f64 * i.big_psi.powi(2) * (i.a1_max + i.r_max.powi(2)) / (4.0 * i.psi.powi(2))
    }

    /// Upper bound on the steady `E ||qhat||_1` at scaling factor `phi`,
    /// given the largest admissible rate `a_max`.
    pub fn queue_bound(&self, phi: f64, a_max: f64) -> f64 {
        let i = &self.inputs;
        let k = i.num_flows as f64;
        i.tau * i.big_psi * k * a_max * phi + k.sqrt() * self.c1 * phi.sqrt()
    }

    /// Bound on `||a_inf - a*||` at scaling factor `phi`.
    pub fn rate_gap_bound(&self, phi: f64) -> f64 {
        self.c2 / phi.sqrt()
    }
}

pub fn theorem_constants(inputs: ConstantInputs) -> Result<TheoremConstants> {
    if !(inputs.psi > 0.0) {
        return Err(Error::Analysis(format!("curvature lower bound must be positive, got {}", inputs.psi)));
    }
    if !(inputs.big_psi >= inputs.psi) {
        return Err(Error::Analysis(format!(
            "curvature upper bound {} is below lower bound {}",
            inputs.big_psi, inputs.psi
        )));
    }
    if !(inputs.tau > 0.0) || inputs.num_flows == 0 {
        return Err(Error::Analysis("need tau > 0 and at least one flow".into()));
    }
    let k = inputs.num_flows as f64;
    let tau = inputs.tau;
    let c1 = (k * tau * tau * inputs.big_psi * (inputs.a1_max + inputs.r_max.powi(2)) / 2.0).sqrt();
    let c2 = c1 / (inputs.psi * tau);
    let c3 = inputs.big_psi * c1 * c1 / (2.0 * inputs.psi.powi(2) * tau * tau);
    Ok(TheoremConstants { c1, c2, c3, inputs })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Analysis("slope fit needs >= 2 paired points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Analysis("slope fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Analysis("slope fit needs distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Steady statistics of one run at a given `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRun {
    pub phi: f64,
    /// Steady `E ||qhat||_1`, in the same units as the constants.
    pub qhat_l1: f64,
    /// Steady admitted rates per flow.
    pub rates: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    /// `(phi, steady ||qhat||_1, bound, holds)` per included run.
    pub bounds: Vec<(f64, f64, f64, bool)>,
    pub exponent: f64,
    /// `(phi, ||a(phi) - a_ref||)` per included run.
    pub gaps: Vec<(f64, f64)>,
    pub gap_nonincreasing: bool,
    pub excluded: Vec<f64>,
}

impl ScalingReport {
    pub fn bound_holds(&self) -> bool {
        self.bounds.iter().all(|b| b.3)
    }
}

pub fn verify_scaling(runs: &[ScalingRun], constants: &TheoremConstants, a_max: f64) -> Result<ScalingReport> {
    let mut included: Vec<&ScalingRun> = Vec::new();
    let mut excluded = Vec::new();
    for r in runs {
        if r.converged {
            included.push(r);
        } else {
            log::warn!("excluding unconverged run at phi = {}", r.phi);
            excluded.push(r.phi);
        }
    }
    if included.len() < 3 {
        return Err(Error::Analysis(format!(
            "scaling check needs >= 3 converged runs, got {}",
            included.len()
        )));
    }
    included.sort_by(|a, b| a.phi.total_cmp(&b.phi));
    let bounds = included
        .iter()
        .map(|r| {
            let b = constants.queue_bound(r.phi, a_max);
            (r.phi, r.qhat_l1, b, r.qhat_l1 <= b)
        })
        .collect();
    let phis: Vec<f64> = included.iter().map(|r| r.phi).collect();
    let qs: Vec<f64> = included.iter().map(|r| r.qhat_l1).collect();
    let exponent = loglog_slope(&phis, &qs)?;
    let reference = &included.last().expect("nonempty").rates;
    let gaps: Vec<(f64, f64)> = included
        .iter()
        .map(|r| {
            let d = r
                .rates
                .iter()
                .zip(reference)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            (r.phi, d)
        })
        .collect();
    let gap_nonincreasing = gaps.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(ScalingReport {
        bounds,
        exponent,
        gaps,
        gap_nonincreasing,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lyapunov_cases() {
        assert_eq!(lyapunov(&[vec![0.0, 0.0]], &[0.0], 1e-3), 0.0);
        assert!((lyapunov(&[vec![0.0]], &[1e-3], 1e-3) - 0.5).abs() < 1e-15);
        assert_eq!(lyapunov(&[vec![3.0], vec![4.0]], &[], 1.0), 12.5);
    }

    #[test]
    fn drift_hand_trace() {
        // q: 2 -> 4 with 3 in and 1 out, tau = 1; the virtual queue is idle
        let q = [vec![2.0]];
        let qn = [vec![4.0]];
        let rec = drift_record(
            SlotQueues {
                q: &q,
                qhat: &[0.0],
                q_next: &qn,
                qhat_next: &[0.0],
            },
            &[vec![1.0]],
            &[3.0],
            &[1.0],
            &[vec![1.0]],
            1.0,
        );
        assert_eq!(rec.dl, 6.0);
        assert_eq!(rec.dl_ub, 6.0);
        assert_eq!(rec.b, 2.0);
        assert!(rec.holds(0.0));
    }

    #[test]
    fn balanced_flows_leave_only_b() {
        let q = [vec![5.0, 7.0]];
        let (ub, b) = drift_upper_bound(&q, &[3.0], &[vec![0.5, 0.5]], &[4.0], &[4.0], &[vec![2.0, 2.0]], 1.0);
        assert_eq!(ub, b);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn clamped_slot_has_strict_gap() {
        let q = [vec![1.0]];
        let qn = [vec![0.0]];
        let rec = drift_record(
            SlotQueues {
                q: &q,
                qhat: &[0.0],
                q_next: &qn,
                qhat_next: &[0.0],
            },
            &[vec![1.0]],
            &[0.0],
            &[0.0],
            &[vec![5.0]],
            1.0,
        );
        // virtual queue also clamps: 0 + 0 - 5
        assert!(rec.dl < rec.dl_ub);
    }

    #[test]
    fn constants_unit_case() {
        let c = theorem_constants(ConstantInputs {
            num_flows: 1,
            tau: 1.0,
            psi: 1.0,
            big_psi: 1.0,
            a1_max: 1.0,
            r_max: 1.0,
        })
        .unwrap();
        assert!((c.c1 - 1.0).abs() < 1e-15);
        assert!((c.c2 - 1.0).abs() < 1e-15);
        assert!((c.c3 - 0.5).abs() < 1e-15);
        assert!((c.c3_expanded() / c.c3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constants_scaling() {
        let base = ConstantInputs {
            num_flows: 3,
            tau: 1e-3,
            psi: 0.7,
            big_psi: 2.5,
            a1_max: 9.0,
            r_max: 4.0,
        };
        let c = theorem_constants(base).unwrap();
        let t = theorem_constants(ConstantInputs { tau: 2e-3, ..base }).unwrap();
        assert!((t.c1 / c.c1 - 2.0).abs() < 1e-12);
        assert!((t.c2 / c.c2 - 1.0).abs() < 1e-12);
        assert!((t.c3 / c.c3 - 1.0).abs() < 1e-12);
        let k = theorem_constants(ConstantInputs { num_flows: 12, ..base }).unwrap();
        assert!((k.c1 / c.c1 - 2.0).abs() < 1e-12);
        assert!((k.c2 / c.c2 - 2.0).abs() < 1e-12);
        assert!((k.c3 / c.c3 - 4.0).abs() < 1e-12);
        assert!((c.c3_expanded() / c.c3 - 1.0).abs() < 1e-12);
        assert!(theorem_constants(ConstantInputs { psi: 0.0, ..base }).is_err());
        assert!(theorem_constants(ConstantInputs { big_psi: 0.5, ..base }).is_err());
    }

    #[test]
    fn slope_fits() {
        let x = [5.0, 15.0, 25.0, 35.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.sqrt()).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&x, &[2.0; 4]).unwrap(), 0.0);
        assert!(loglog_slope(&x, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
    }

    fn constants() -> TheoremConstants {
        theorem_constants(ConstantInputs {
            num_flows: 2,
            tau: 1e-3,
            psi: 1.0,
            big_psi: 1.0,
            a1_max: 1.0,
            r_max: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn scaling_report_synthetic() {
        let runs: Vec<ScalingRun> = [5.0, 15.0, 25.0]
            .iter()
            .map(|&phi: &f64| ScalingRun {
                phi,
                qhat_l1: 1e-4 * phi.sqrt(),
                rates: vec![1.0 - 1.0 / phi, 1.0],
                converged: true,
            })
            .collect();
        let rep = verify_scaling(&runs, &constants(), 1.0).unwrap();
        assert!((rep.exponent - 0.5).abs() < 0.05);
        assert!(rep.gap_nonincreasing);
        assert!(rep.bound_holds());
    }

    #[test]
    fn scaling_report_excludes_unconverged() {
        let mut runs: Vec<ScalingRun> = [5.0, 15.0, 25.0]
            .iter()
            .map(|&phi| ScalingRun {
                phi,
                qhat_l1: 1.0,
                rates: vec![1.0],
                converged: true,
            })
            .collect();
        runs[1].converged = false;
        assert!(verify_scaling(&runs, &constants(), 1.0).is_err());
        runs[1].converged = true;
        let rep = verify_scaling(&runs, &constants(), 1.0).unwrap();
        assert_eq!(rep.exponent, 0.0);
    }

    proptest! {
        #[test]
        fn drift_never_exceeds_bound(
            q in proptest::collection::vec(0.0f64..1e6, 3),
            qh in 0.0f64..1e6,
            beta in 0.0f64..1.0,
            arrival in 0.0f64..1e9,
            admitted in 0.0f64..1e9,
            rates in proptest::collection::vec(0.0f64..1e9, 3),
        ) {
            let tau = 1e-3;
            let betas = vec![vec![beta, (1.0 - beta) / 2.0, (1.0 - beta) / 2.0]];
            let qs = vec![q.clone()];
            let qn: Vec<f64> = (0..3)
                .map(|i| (q[i] + betas[0][i] * arrival * tau - rates[i] * tau).max(0.0))
                .collect();
            let qhn = (qh + admitted * tau - rates.iter().sum::<f64>() * tau).max(0.0);
            let rec = drift_record(
                SlotQueues { q: &qs, qhat: &[qh], q_next: &[qn], qhat_next: &[qhn] },
                &betas,
                &[arrival],
                &[admitted],
                &[rates],
                tau,
            );
            prop_assert!(rec.holds(1e-12));
            prop_assert!(rec.l >= 0.0);
        }
    }
}
