//! Network topology and wireless channel generation.
//!
//! Large-scale quantities (path loss with log-normal shadowing, Rician
//! factor, LoS array response) are drawn once per frame. Small-scale NLoS
//! fading is redrawn every slot as i.i.d. CN(0, 1) entries.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::rng::{SeedTree, Stream};
use crate::{Error, Result};

/// Breakpoints of the three-slope path-loss model, in meters.
pub const PL_BREAK_NEAR_M: f64 = 10.0;
pub const PL_BREAK_FAR_M: f64 = 50.0;
/// Path-loss intercept at 1 km, in dB.
pub const PL_INTERCEPT_DB: f64 = -140.7;
/// Upper clamp on the Rician factor; keeps `P_LoS = 1` finite.
pub const KAPPA_MAX: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    /// Number of RUs attached to each DU; its length is the number of DUs.
    pub rus_per_du: Vec<usize>,
    pub num_ues: usize,
    /// Antennas per RU, indexed by flat RU id.
    pub antennas_per_ru: Vec<usize>,
    pub cell_radius_m: f64,
    pub ru_height_m: f64,
    pub ue_height_m: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    /// Per-RU transmit power budget in watts.
    pub power_budget_w: f64,
    pub shadow_sigma_db: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            rus_per_du: vec![4, 4],
            num_ues: 12,
            antennas_per_ru: vec![16; 8],
            cell_radius_m: 1000.0,
            ru_height_m: 10.0,
            ue_height_m: 1.5,
            bandwidth_hz: 20e6,
            noise_figure_db: 9.0,
            power_budget_w: dbm_to_watts(43.0),
            shadow_sigma_db: 8.0,
        }
    }
}

impl TopologyConfig {
    pub fn num_dus(&self) -> usize {
        self.rus_per_du.len()
    }

    pub fn num_rus(&self) -> usize {
        self.rus_per_du.iter().sum()
    }

    /// Sets every RU to `m` antennas.
    pub fn with_uniform_antennas(mut self, m: usize) -> Self {
        self.antennas_per_ru = vec![m; self.num_rus()];
        self
    }

    /// `(du, local index)` of a flat RU id.
    pub fn ru_label(&self, ru: usize) -> (usize, usize) {
        let mut base = 0;
        for (du, &n) in self.rus_per_du.iter().enumerate() {
            if ru < base + n {
                return (du, ru - base);
            }
            base += n;
        }
        panic!("RU id {ru} out of range");
    }

    pub fn validate(&self) -> Result<()> {
        if self.rus_per_du.is_empty() || self.rus_per_du.iter().any(|&n| n == 0) {
            return Err(Error::config("every DU needs at least one RU"));
        }
        if self.num_ues == 0 {
            return Err(Error::config("num_ues must be at least 1"));
        }
        if self.antennas_per_ru.len() != self.num_rus() {
            return Err(Error::config(format!(
                "antennas_per_ru has {} entries for {} RUs",
                self.antennas_per_ru.len(),
                self.num_rus()
            )));
        }
        if self.antennas_per_ru.iter().any(|&m| m == 0) {
            return Err(Error::config("every RU needs at least one antenna"));
        }
        let positive = [
            ("cell_radius", self.cell_radius_m),
            ("bandwidth", self.bandwidth_hz),
            ("power_budget", self.power_budget_w),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(Error::config("shadow_sigma must be nonnegative"));
        }
        Ok(())
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(noise_power_dbm(self.bandwidth_hz, self.noise_figure_db))
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Three-slope path loss in dB (a gain, so typically negative).
///
/// Distances enter the log terms in kilometers; the near and far slope
/// corrections switch on strictly below their breakpoints.
pub fn path_loss_db(distance_m: f64, shadow_db: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::domain(format!(
            "path loss needs a positive distance, got {distance_m}"
        )));
    }
    let d_km = distance_m / 1000.0;
    let c0 = if distance_m < PL_BREAK_NEAR_M { 1.0 } else { 0.0 };
    let c1 = if distance_m < PL_BREAK_FAR_M { 1.0 } else { 0.0 };
    Ok(PL_INTERCEPT_DB + shadow_db - 35.0 * d_km.log10()
        + 20.0 * c0 * (distance_m / PL_BREAK_NEAR_M).log10()
        + 15.0 * c1 * (distance_m / PL_BREAK_FAR_M).log10())
}

/// 3GPP UMa line-of-sight probability.
pub fn los_probability(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::domain(format!(
            "LoS probability needs a positive distance, got {distance_m}"
        )));
    }
    let e = (-distance_m / 36.0).exp();
    Ok((18.0 / distance_m).min(1.0) * (1.0 - e) + e)
}

pub fn rician_factor(p_los: f64) -> f64 {
    let p = p_los.clamp(0.0, 1.0);
    if p >= 1.0 {
        return KAPPA_MAX;
    }
    (p / (1.0 - p)).min(KAPPA_MAX)
}

/// Half-wavelength ULA response; element `m` (zero-based) is `exp(j pi m sin phi)`.
pub fn array_response(phi: f64, m: usize) -> Vec<Complex64> {
    let s = phi.sin();
    (0..m)
        .map(|i| Complex64::from_polar(1.0, PI * i as f64 * s))
        .collect()
}

/// Noise power in dBm for bandwidth `w_hz` and noise figure `nf_db`.
pub fn noise_power_dbm(w_hz: f64, nf_db: f64) -> f64 {
    -170.0 + 10.0 * w_hz.log10() + nf_db
}

/// Large-scale state of one RU-UE link for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub distance_m: f64,
    /// Linear large-scale power gain.
    pub xi: f64,
    pub kappa: f64,
    pub aod: f64,
    pub los: Vec<Complex64>,
}

impl LinkState {
    pub fn new(distance_m: f64, xi: f64, kappa: f64, aod: f64, antennas: usize) -> Self {
        Self {
            distance_m,
            xi,
            kappa,
            aod,
            los: array_response(aod, antennas),
        }
    }

    fn weights(&self) -> (f64, f64) {
        if self.kappa.is_infinite() {
            return (self.xi.sqrt(), 0.0);
        }
        let los = (self.xi * self.kappa / (self.kappa + 1.0)).sqrt();
        let nlos = (self.xi / (self.kappa + 1.0)).sqrt();
        (los, nlos)
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub config: TopologyConfig,
    pub ru_positions: Vec<[f64; 2]>,
}

impl Topology {
    /// Places RUs on a seeded square lattice clipped to the disc.
    pub fn new(config: TopologyConfig, seeds: &SeedTree) -> Result<Self> {
        config.validate()?;
        let mut rng = seeds.stream(Stream::Placement);
        let ru_positions = lattice_positions(config.num_rus(), config.cell_radius_m, &mut rng);
        Ok(Self {
            config,
            ru_positions,
        })
    }

    pub fn num_rus(&self) -> usize {
        self.ru_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.config.num_ues
    }

    /// UE positions and large-scale link states for `frame`.
    pub fn draw_large_scale(&self, seeds: &SeedTree, frame: u64) -> LargeScaleState {
        let cfg = &self.config;
        let mut place = seeds.substream(Stream::Placement, frame + 1);
        let mut shadow_rng = seeds.substream(Stream::Shadowing, frame);
        let shadow = Normal::new(0.0, cfg.shadow_sigma_db).expect("sigma validated");
        let ue_positions: Vec<[f64; 2]> = (0..cfg.num_ues)
            .map(|_| uniform_in_disc(cfg.cell_radius_m, &mut place))
            .collect();
        let dz = cfg.ru_height_m - cfg.ue_height_m;
        let mut links = Vec::with_capacity(self.num_rus() * cfg.num_ues);
        for (ru, rp) in self.ru_positions.iter().enumerate() {
            for up in &ue_positions {
                let dx = up[0] - rp[0];
                let dy = up[1] - rp[1];
                let d = (dx * dx + dy * dy + dz * dz).sqrt().max(1e-3);
                let sf = shadow.sample(&mut shadow_rng);
                let xi = db_to_linear(path_loss_db(d, sf).expect("positive distance"));
                let kappa = rician_factor(los_probability(d).expect("positive distance"));
                let aod = departure_angle(dx, dy);
                links.push(LinkState::new(d, xi, kappa, aod, cfg.antennas_per_ru[ru]));
            }
        }
        LargeScaleState {
            num_ues: cfg.num_ues,
            ue_positions,
            links,
        }
    }
}

/// Large-scale state of every RU-UE pair for one frame.
#[derive(Debug, Clone)]
pub struct LargeScaleState {
    pub num_ues: usize,
    pub ue_positions: Vec<[f64; 2]>,
    /// Row-major by RU then UE.
    pub links: Vec<LinkState>,
}

impl LargeScaleState {
    pub fn num_rus(&self) -> usize {
        self.links.len() / self.num_ues
    }

    pub fn link(&self, ru: usize, ue: usize) -> &LinkState {
        &self.links[ru * self.num_ues + ue]
    }

    /// The `n` RUs with the largest large-scale gain to `ue`, best first.
    pub fn strongest_rus(&self, ue: usize, n: usize) -> Vec<usize> {
        let mut rus: Vec<usize> = (0..self.num_rus()).collect();
        rus.sort_by(|&a, &b| {
            self.link(b, ue)
                .xi
                .total_cmp(&self.link(a, ue).xi)
                .then(a.cmp(&b))
        });
        rus.truncate(n.min(rus.len()));
        rus
    }

    pub fn nearest_ru(&self, ue: usize) -> usize {
        (0..self.num_rus())
            .min_by(|&a, &b| {
                self.link(a, ue)
                    .distance_m
                    .total_cmp(&self.link(b, ue).distance_m)
            })
            .expect("at least one RU")
    }

    /// One slot of small-scale fading on top of this frame's LoS part.
    pub fn draw_channel<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let h = self
            .links
            .iter()
            .map(|link| {
                let (wl, wn) = link.weights();
                link.los
                    .iter()
                    .map(|&los| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        let nlos = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
                        los * wl + nlos * wn
                    })
                    .collect()
            })
            .collect();
        ChannelRealization {
            num_ues: self.num_ues,
            h,
        }
    }

    /// Fading for global slot `slot`, a pure function of the seed and slot.
    pub fn draw_slot(&self, seeds: &SeedTree, slot: u64) -> ChannelRealization {
        let mut rng = seeds.substream(Stream::Fading, slot);
        self.draw_channel(&mut rng)
    }
}

/// Channel vectors of every RU-UE pair for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub num_ues: usize,
    /// Row-major by RU then UE; each entry has the RU's antenna count.
    pub h: Vec<Vec<Complex64>>,
}

impl ChannelRealization {
    pub fn get(&self, ru: usize, ue: usize) -> &[Complex64] {
        &self.h[ru * self.num_ues + ue]
    }

    pub fn num_rus(&self) -> usize {
        self.h.len() / self.num_ues
    }
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let a = 2.0 * PI * rng.random::<f64>();
    [r * a.cos(), r * a.sin()]
}

/// Broadside-referenced AoD folded into [-pi/2, pi/2).
fn departure_angle(dx: f64, dy: f64) -> f64 {
    let mut a = dy.atan2(dx);
    if a >= PI / 2.0 {
        a = PI - a;
    } else if a < -PI / 2.0 {
        a = -PI - a;
    }
    if a >= PI / 2.0 {
        a = -PI / 2.0;
    }
    a
}

fn lattice_positions<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Vec<[f64; 2]> {
    let usable = 0.8 * radius;
    let mut spacing = usable * (PI / n as f64).sqrt();
    let offset = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
    loop {
        let span = (usable / spacing).ceil() as i64 + 1;
        let mut points = Vec::new();
        for ix in -span..=span {
            for iy in -span..=span {
                let x = (ix as f64 + offset[0]) * spacing;
                let y = (iy as f64 + offset[1]) * spacing;
                if x * x + y * y <= usable * usable {
                    points.push([x, y]);
                }
            }
        }
        if points.len() >= n {
            points.sort_by(|a, b| {
                let ra = a[0] * a[0] + a[1] * a[1];
                let rb = b[0] * b[0] + b[1] * b[1];
                ra.total_cmp(&rb)
            });
            points.truncate(n);
            return points;
        }
        spacing *= 0.95;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_db(1000.0, 0.0).unwrap() - -140.7).abs() < 1e-12);
        let at10 = path_loss_db(10.0, 0.0).unwrap();
        let expected = -140.7 + 70.0 + 15.0 * 0.2f64.log10();
        assert!((at10 - expected).abs() < 1e-12);
        assert!((at10 - -81.18).abs() < 5e-3);
        // shadowing shifts the intercept
        assert!((path_loss_db(1000.0, 3.0).unwrap() - -137.7).abs() < 1e-12);
    }

    #[test]
    fn path_loss_is_continuous_at_breakpoints() {
        for d in [PL_BREAK_NEAR_M, PL_BREAK_FAR_M] {
            let below = path_loss_db(d * (1.0 - 1e-10), 0.0).unwrap();
            let at = path_loss_db(d, 0.0).unwrap();
            assert!((below - at).abs() < 1e-6, "jump at {d}: {below} vs {at}");
        }
    }

    #[test]
    fn path_loss_rejects_nonpositive_distance() {
        assert!(matches!(path_loss_db(0.0, 0.0), Err(Error::Domain(_))));
        assert!(path_loss_db(-3.0, 0.0).is_err());
        assert!(los_probability(0.0).is_err());
    }

    #[test]
    fn los_probability_values() {
        for d in [1.0, 5.0, 18.0] {
            assert!((los_probability(d).unwrap() - 1.0).abs() < 1e-15);
        }
        let e = (-1f64).exp();
        assert!((los_probability(36.0).unwrap() - (0.5 * (1.0 - e) + e)).abs() < 1e-15);
        assert!((los_probability(36.0).unwrap() - 0.68394).abs() < 1e-5);
        assert!(los_probability(1e9).unwrap() < 1e-7);
        let mut prev = 1.0;
        for i in 0..2000 {
            let p = los_probability(18.0 + i as f64 * 0.5).unwrap();
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn rician_factor_cases() {
        assert!((rician_factor(0.5) - 1.0).abs() < 1e-15);
        assert_eq!(rician_factor(0.0), 0.0);
        assert_eq!(rician_factor(1.0), KAPPA_MAX);
        assert_eq!(rician_factor(1.0 - 1e-12), KAPPA_MAX);
    }

    #[test]
    fn array_response_cases() {
        assert!(array_response(0.0, 5)
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(array_response(1.1, 1), vec![Complex64::new(1.0, 0.0)]);
        let a = array_response(PI / 2.0, 2);
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        for z in array_response(0.37, 9) {
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn noise_power_values() {
        assert!((noise_power_dbm(1.0, 0.0) - -170.0).abs() < 1e-12);
        assert!((noise_power_dbm(20e6, 9.0) - -87.99).abs() < 5e-3);
        let step = noise_power_dbm(40e6, 9.0) - noise_power_dbm(20e6, 9.0);
        assert!((step - 10.0 * 2f64.log10()).abs() < 1e-12);
    }

    fn single_link(kappa: f64, xi: f64, m: usize) -> LargeScaleState {
        LargeScaleState {
            num_ues: 1,
            ue_positions: vec![[0.0, 0.0]],
            links: vec![LinkState::new(100.0, xi, kappa, 0.3, m)],
        }
    }

    #[test]
    fn los_only_limit_is_deterministic() {
        let ls = single_link(f64::INFINITY, 4.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = ls.draw_channel(&mut rng);
        for (z, los) in h.get(0, 0).iter().zip(&ls.links[0].los) {
            assert!((z - los * 2.0).norm() < 1e-14);
        }
    }

    #[test]
    fn rayleigh_mean_power_matches_large_scale_gain() {
        let xi = 2.5e-11;
        let m = 4;
        let ls = single_link(0.0, xi, m);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 100_000;
        let mean: f64 = (0..draws)
            .map(|_| norm_sqr(ls.draw_channel(&mut rng).get(0, 0)) / m as f64)
            .sum::<f64>()
            / draws as f64;
        assert!((mean / xi - 1.0).abs() < 0.02, "mean/xi = {}", mean / xi);
    }

    #[test]
    fn rayleigh_element_variance_chi_square() {
        // (n-1) s^2 / sigma^2 ~ chi2(n-1) for each real component with
        // variance xi/2; use the normal approximation of chi2 at 1%.
        let xi = 3.0;
        let ls = single_link(0.0, xi, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000usize;
        let samples: Vec<Complex64> = (0..n).map(|_| ls.draw_channel(&mut rng).h[0][0]).collect();
        for part in [0usize, 1] {
            let xs: Vec<f64> = samples
                .iter()
                .map(|z| if part == 0 { z.re } else { z.im })
                .collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            let stat = ss / (xi / 2.0);
            let dof = (n - 1) as f64;
            let z = (stat - dof) / (2.0 * dof).sqrt();
            assert!(z.abs() < 2.576, "chi2 z-score {z}");
        }
    }

    #[test]
    fn channel_is_reproducible_from_seed() {
        let cfg = TopologyConfig {
            rus_per_du: vec![2, 2],
            num_ues: 3,
            antennas_per_ru: vec![4; 4],
            ..TopologyConfig::default()
        };
        let seeds = SeedTree::new(11);
        let topo = Topology::new(cfg, &seeds).unwrap();
        let a = topo.draw_large_scale(&seeds, 3).draw_slot(&seeds, 31);
        let b = topo.draw_large_scale(&seeds, 3).draw_slot(&seeds, 31);
        assert_eq!(a, b);
        let c = topo.draw_large_scale(&seeds, 3).draw_slot(&seeds, 32);
        assert_ne!(a, c);
    }

    #[test]
    fn topology_respects_geometry() {
        let cfg = TopologyConfig::default();
        let seeds = SeedTree::new(3);
        let topo = Topology::new(cfg.clone(), &seeds).unwrap();
        assert_eq!(topo.num_rus(), 8);
        for p in &topo.ru_positions {
            assert!(p[0].hypot(p[1]) <= cfg.cell_radius_m);
        }
        let ls = topo.draw_large_scale(&seeds, 0);
        for p in &ls.ue_positions {
            assert!(p[0].hypot(p[1]) <= cfg.cell_radius_m);
        }
        for link in &ls.links {
            assert!(link.xi > 0.0 && link.kappa.is_finite());
            assert!(link.distance_m >= cfg.ru_height_m - cfg.ue_height_m - 1e-9);
            assert!((-PI / 2.0..PI / 2.0).contains(&link.aod));
            assert!(link.los.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
        let strongest = ls.strongest_rus(0, 4);
        assert_eq!(strongest.len(), 4);
        for w in strongest.windows(2) {
            assert!(ls.link(w[0], 0).xi >= ls.link(w[1], 0).xi);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = TopologyConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.antennas_per_ru.pop();
        assert!(cfg.validate().is_err());
        let cfg = TopologyConfig {
            power_budget_w: 0.0,
            ..TopologyConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(TopologyConfig::default().ru_label(5), (1, 1));
    }
}
