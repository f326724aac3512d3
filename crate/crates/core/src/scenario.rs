//! Network geometry, target reflectivity and physical constants.
//!
//! A [`Scenario`] holds everything the CRLB formulas read: transmitter,
//! receiver and target positions in the plane, the complex gain of every
//! transmitter-target-receiver path and the radio constants. Gains are stored
//! flat in transmitter-major order, then target, then receiver.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planar position in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Point2D<T: Copy> {
    pub x: T,
    pub y: T,
}

impl<T: Copy> From<[T; 2]> for Point2D<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Point2D { x, y }
    }
}

impl<T: Copy> From<Point2D<T>> for [T; 2] {
    fn from(p: Point2D<T>) -> Self {
        [p.x, p.y]
    }
}

impl<T: Real> Point2D<T> {
    pub fn new(x: T, y: T) -> Self {
        Point2D { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Radio constants shared by every path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysConst<T> {
    #[serde(rename = "carrier_freq_hz")]
    pub carrier_freq: T,
    #[serde(rename = "speed_of_light_mps")]
    pub speed_of_light: T,
    #[serde(rename = "noise_psd_w_per_hz")]
    pub noise_psd: T,
    #[serde(rename = "pulse_rep_freq_hz")]
    pub pulse_rep_freq: T,
    #[serde(rename = "integration_time_s")]
    pub integration_time: T,
}

impl<T: Real> PhysConst<T> {
    /// 1 GHz carrier, thermal noise at 290 K, 5 kHz PRF, 10 ms integration.
    pub fn standard() -> Self {
        PhysConst {
            carrier_freq: T::lit(1.0e9),
            speed_of_light: T::lit(SPEED_OF_LIGHT),
            noise_psd: T::lit(1.380_649e-23 * 290.0),
            pulse_rep_freq: T::lit(5.0e3),
            integration_time: T::lit(1.0e-2),
        }
    }

    /// `8 pi^2 / (c^2 f_r N_0)`, the common factor of the CRLB vectors.
    pub fn eta(&self) -> T {
        T::lit(8.0) * T::PI() * T::PI()
            / (self.speed_of_light * self.speed_of_light * self.pulse_rep_freq * self.noise_psd)
    }

    /// Number of pulses integrated per localization, `f_r * T_int`.
    pub fn pulses_integrated(&self) -> T {
        self.pulse_rep_freq * self.integration_time
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("carrier_freq", self.carrier_freq),
            ("speed_of_light", self.speed_of_light),
            ("noise_psd", self.noise_psd),
            ("pulse_rep_freq", self.pulse_rep_freq),
            ("integration_time", self.integration_time),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidScenario(format!(
                    "{name} must be finite and strictly positive"
                )));
            }
        }
        Ok(())
    }
}

impl<T: Real> Default for PhysConst<T> {
    fn default() -> Self {
        Self::standard()
    }
}

/// Ground-truth geometry and reflectivity of one radar network snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ScenarioRepr<T>",
    into = "ScenarioRepr<T>",
    bound = "T: Real + Serialize + DeserializeOwned"
)]
pub struct Scenario<T: Real> {
    consts: PhysConst<T>,
    transmitters: Vec<Point2D<T>>,
    receivers: Vec<Point2D<T>>,
    targets: Vec<Point2D<T>>,
    gains: Vec<Complex<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + DeserializeOwned")]
struct ScenarioRepr<T: Real> {
    consts: PhysConst<T>,
    transmitters: Vec<Point2D<T>>,
    receivers: Vec<Point2D<T>>,
    targets: Vec<Point2D<T>>,
    gains: Vec<Complex<T>>,
}

impl<T: Real> TryFrom<ScenarioRepr<T>> for Scenario<T> {
    type Error = Error;

    fn try_from(r: ScenarioRepr<T>) -> Result<Self> {
        Scenario::new(r.consts, r.transmitters, r.receivers, r.targets, r.gains)
    }
}

impl<T: Real> From<Scenario<T>> for ScenarioRepr<T> {
    fn from(s: Scenario<T>) -> Self {
        ScenarioRepr {
            consts: s.consts,
            transmitters: s.transmitters,
            receivers: s.receivers,
            targets: s.targets,
            gains: s.gains,
        }
    }
}

impl<T: Real> Scenario<T> {
    /// Builds a scenario, checking sizes, finiteness and that no sensor
    /// coincides with a target.
    pub fn new(
        consts: PhysConst<T>,
        transmitters: Vec<Point2D<T>>,
        receivers: Vec<Point2D<T>>,
        targets: Vec<Point2D<T>>,
        gains: Vec<Complex<T>>,
    ) -> Result<Self> {
        consts.validate()?;
        let (m, n, q) = (transmitters.len(), receivers.len(), targets.len());
        if m == 0 || n == 0 || q == 0 {
            return Err(Error::InvalidScenario(format!(
                "need at least one transmitter, receiver and target (got M={m}, N={n}, Q={q})"
            )));
        }
        if gains.len() != m * q * n {
            return Err(Error::InvalidScenario(format!(
                "expected M*Q*N = {} gains, got {}",
                m * q * n,
                gains.len()
            )));
        }
        let all_points = transmitters.iter().chain(&receivers).chain(&targets);
        if !all_points.into_iter().all(Point2D::is_finite) {
            return Err(Error::InvalidScenario("non-finite coordinate".into()));
        }
        if !gains.iter().all(|h| h.re.is_finite() && h.im.is_finite()) {
            return Err(Error::InvalidScenario("non-finite gain".into()));
        }
        let s = Scenario {
            consts,
            transmitters,
            receivers,
            targets,
            gains,
        };
        s.distances()?;
        Ok(s)
    }

    pub fn consts(&self) -> &PhysConst<T> {
        &self.consts
    }

    pub fn transmitters(&self) -> &[Point2D<T>] {
        &self.transmitters
    }

    pub fn receivers(&self) -> &[Point2D<T>] {
        &self.receivers
    }

    pub fn targets(&self) -> &[Point2D<T>] {
        &self.targets
    }

    pub fn gains(&self) -> &[Complex<T>] {
        &self.gains
    }

    pub fn n_tx(&self) -> usize {
        self.transmitters.len()
    }

    pub fn n_rx(&self) -> usize {
        self.receivers.len()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    /// Flat index of path (m, q, n) into [`gains`](Self::gains).
    pub fn path_index(&self, m: usize, q: usize, n: usize) -> usize {
        (m * self.n_targets() + q) * self.n_rx() + n
    }

    pub fn gain(&self, m: usize, q: usize, n: usize) -> Complex<T> {
        self.gains[self.path_index(m, q, n)]
    }

    /// Same network with the target positions replaced, e.g. by coarse
    /// estimates from a previous cycle.
    pub fn with_targets(&self, targets: Vec<Point2D<T>>) -> Result<Self> {
        if targets.len() != self.n_targets() {
            return Err(Error::InvalidScenario(format!(
                "expected {} targets, got {}",
                self.n_targets(),
                targets.len()
            )));
        }
        Scenario::new(
            self.consts,
            self.transmitters.clone(),
            self.receivers.clone(),
            targets,
            self.gains.clone(),
        )
    }

    pub fn distances(&self) -> Result<Distances<T>> {
        distances(self)
    }

    pub fn pathloss(&self) -> Result<PathLoss<T>> {
        pathloss(self)
    }
}

impl Scenario<f64> {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Transmitter-to-target and target-to-receiver distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Distances<T> {
    n_targets: usize,
    n_rx: usize,
    tx: Vec<T>,
    rx: Vec<T>,
}

impl<T: Copy> Distances<T> {
    /// Distance transmitter `m` to target `q`.
    pub fn tx(&self, m: usize, q: usize) -> T {
        self.tx[m * self.n_targets + q]
    }

    /// Distance target `q` to receiver `n`.
    pub fn rx(&self, q: usize, n: usize) -> T {
        self.rx[q * self.n_rx + n]
    }
}

/// Euclidean distances of every transmitter-target and target-receiver pair.
pub fn distances<T: Real>(s: &Scenario<T>) -> Result<Distances<T>> {
    let mut tx = Vec::with_capacity(s.n_tx() * s.n_targets());
    for (m, t) in s.transmitters.iter().enumerate() {
        for (q, tar) in s.targets.iter().enumerate() {
            let d = t.distance(tar);
            if d <= T::zero() {
                return Err(Error::ZeroDistance {
                    what: "transmitter",
                    index: m,
                    target: q,
                });
            }
            tx.push(d);
        }
    }
    let mut rx = Vec::with_capacity(s.n_targets() * s.n_rx());
    for (q, tar) in s.targets.iter().enumerate() {
        for (n, r) in s.receivers.iter().enumerate() {
            let d = tar.distance(r);
            if d <= T::zero() {
                return Err(Error::ZeroDistance {
                    what: "receiver",
                    index: n,
                    target: q,
                });
            }
            rx.push(d);
        }
    }
    Ok(Distances {
        n_targets: s.n_targets(),
        n_rx: s.n_rx(),
        tx,
        rx,
    })
}

/// Two-way free-space pathloss of every path, same layout as the gains.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLoss<T> {
    n_targets: usize,
    n_rx: usize,
    values: Vec<T>,
}

impl<T: Copy> PathLoss<T> {
    pub fn get(&self, m: usize, q: usize, n: usize) -> T {
        self.values[(m * self.n_targets + q) * self.n_rx + n]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// `1 / (4 pi d_tx^2 * 4 pi d_rx^2 * 4 pi f_c^2)` for every path.
pub fn pathloss<T: Real>(s: &Scenario<T>) -> Result<PathLoss<T>> {
    let d = distances(s)?;
    Ok(pathloss_from(&d, s.consts.carrier_freq, s.n_tx()))
}

/// Pathloss of a single path with leg lengths `d_tx`, `d_rx`.
pub fn path_pathloss<T: Real>(d_tx: T, d_rx: T, fc: T) -> T {
    let four_pi = T::lit(4.0) * T::PI();
    T::one() / (four_pi * d_tx * d_tx * four_pi * d_rx * d_rx * four_pi * fc * fc)
}

pub(crate) fn pathloss_from<T: Real>(d: &Distances<T>, fc: T, n_tx: usize) -> PathLoss<T> {
    let mut values = Vec::with_capacity(n_tx * d.n_targets * d.n_rx);
    for m in 0..n_tx {
        for q in 0..d.n_targets {
            for n in 0..d.n_rx {
                values.push(path_pathloss(d.tx(m, q), d.rx(q, n), fc));
            }
        }
    }
    PathLoss {
        n_targets: d.n_targets,
        n_rx: d.n_rx,
        values,
    }
}

/// Power and bandwidth budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    /// Total power `P` in W.
    pub total_power: f64,
    /// Total bandwidth `B` in Hz.
    pub total_bandwidth: f64,
    /// Fixed per-transmitter power in W, used when only bandwidth is allocated.
    pub per_tx_power: f64,
    /// Fixed per-transmitter bandwidth in Hz, used when only power is allocated.
    pub per_tx_bandwidth: f64,
}

impl Budgets {
    /// Totals `P`, `B` with the fixed per-transmitter shares set to `P/M`, `B/M`.
    pub fn even(total_power: f64, total_bandwidth: f64, n_tx: usize) -> Self {
        Budgets {
            total_power,
            total_bandwidth,
            per_tx_power: total_power / n_tx as f64,
            per_tx_bandwidth: total_bandwidth / n_tx as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.total_power,
            self.total_bandwidth,
            self.per_tx_power,
            self.per_tx_bandwidth,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "budgets must be finite and strictly positive".into(),
            ))
        }
    }

    /// Same budgets with both totals (and shares) scaled by `factor`.
    pub fn scaled_power(&self, factor: f64) -> Self {
        Budgets {
            total_power: self.total_power * factor,
            per_tx_power: self.per_tx_power * factor,
            ..*self
        }
    }
}

/// Random layout model: sensors and targets uniform in a square, circular
/// complex Gaussian gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDistribution {
    /// Side of the square area in meters, lower-left corner at the origin.
    pub area_side: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_targets: usize,
    /// `E|h|^2` in m^2.
    pub gain_variance: f64,
    /// Minimum sensor-target separation in meters.
    pub min_separation: f64,
    pub consts: PhysConst<f64>,
}

impl Default for LayoutDistribution {
    fn default() -> Self {
        LayoutDistribution {
            area_side: 20_000.0,
            n_tx: 5,
            n_rx: 5,
            n_targets: 4,
            gain_variance: 10.0,
            min_separation: 1.0,
            consts: PhysConst::standard(),
        }
    }
}

const MAX_LAYOUT_DRAWS: usize = 10_000;

/// Draws a scenario from `cfg`; identical seeds give identical scenarios.
pub fn random_scenario(cfg: &LayoutDistribution, seed: u64) -> Result<Scenario<f64>> {
    if cfg.n_tx == 0 || cfg.n_rx == 0 || cfg.n_targets == 0 {
        return Err(Error::InvalidScenario("layout needs M, N, Q >= 1".into()));
    }
    if !(cfg.area_side > 0.0 && cfg.gain_variance > 0.0 && cfg.min_separation >= 0.0) {
        return Err(Error::InvalidScenario(
            "area side and gain variance must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coord = Uniform::new(0.0, cfg.area_side);
    let draw = |count: usize, rng: &mut ChaCha8Rng| -> Vec<Point2D<f64>> {
        (0..count)
            .map(|_| Point2D::new(coord.sample(rng), coord.sample(rng)))
            .collect()
    };

    let mut placed = None;
    for _ in 0..MAX_LAYOUT_DRAWS {
        let tx = draw(cfg.n_tx, &mut rng);
        let rx = draw(cfg.n_rx, &mut rng);
        let tar = draw(cfg.n_targets, &mut rng);
        let separated = tar.iter().all(|t| {
            tx.iter()
                .chain(&rx)
                .all(|s| s.distance(t) >= cfg.min_separation.max(f64::MIN_POSITIVE))
        });
        if separated {
            placed = Some((tx, rx, tar));
            break;
        }
    }
    let (tx, rx, tar) = placed.ok_or(Error::LayoutRejected {
        attempts: MAX_LAYOUT_DRAWS,
        min_separation: cfg.min_separation,
    })?;

    let gains = draw_gains(&mut rng, cfg.n_tx * cfg.n_targets * cfg.n_rx, cfg.gain_variance);
    Scenario::new(cfg.consts, tx, rx, tar, gains)
}

/// Circular complex Gaussian samples with `E|h|^2 = variance`.
fn draw_gains<R: Rng>(rng: &mut R, count: usize, variance: f64) -> Vec<Complex<f64>> {
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("positive variance");
    (0..count)
        .map(|_| Complex::new(normal.sample(rng), normal.sample(rng)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_path(tx: (f64, f64), tar: (f64, f64), rx: (f64, f64)) -> Result<Scenario<f64>> {
        Scenario::new(
            PhysConst::standard(),
            vec![Point2D::new(tx.0, tx.1)],
            vec![Point2D::new(rx.0, rx.1)],
            vec![Point2D::new(tar.0, tar.1)],
            vec![Complex::new(1.0, 0.0)],
        )
    }

    #[test]
    fn three_four_five() {
        let s = one_path((0.0, 0.0), (3.0, 4.0), (3.0, 0.0)).unwrap();
        let d = s.distances().unwrap();
        assert_eq!(d.tx(0, 0), 5.0);
        assert_eq!(d.rx(0, 0), 4.0);
    }

    #[test]
    fn coincident_sensor_and_target_rejected() {
        let err = one_path((1.0, 1.0), (1.0, 1.0), (5.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::ZeroDistance { what: "transmitter", .. }));
        let err = one_path((0.0, 0.0), (2.0, 2.0), (2.0, 2.0)).unwrap_err();
        assert!(matches!(err, Error::ZeroDistance { what: "receiver", .. }));
    }

    #[test]
    fn unit_pathloss() {
        let mut consts = PhysConst::standard();
        consts.carrier_freq = 1.0;
        let s = Scenario::new(
            consts,
            vec![Point2D::new(1.0, 0.0)],
            vec![Point2D::new(0.0, 1.0)],
            vec![Point2D::new(0.0, 0.0)],
            vec![Complex::new(1.0, 0.0)],
        )
        .unwrap();
        let alpha = s.pathloss().unwrap().get(0, 0, 0);
        let expected = (4.0 * std::f64::consts::PI).powi(-3);
        assert!((alpha - expected).abs() < 1e-18);
        assert!((alpha - 5.0393e-4).abs() < 1e-8);
    }

    #[test]
    fn doubling_tx_distance_quarters_pathloss() {
        let near = one_path((0.0, 100.0), (0.0, 0.0), (50.0, 0.0)).unwrap();
        let far = one_path((0.0, 200.0), (0.0, 0.0), (50.0, 0.0)).unwrap();
        let ratio = near.pathloss().unwrap().get(0, 0, 0) / far.pathloss().unwrap().get(0, 0, 0);
        assert!((ratio - 4.0).abs() < 1e-12);
    }

    #[test]
    fn km_scale_pathloss_hand_value() {
        // d_tx = 5 km, d_rx = 10 km, f_c = 1 GHz:
        // (4 pi)^3 = 1984.4017075391884, d_tx^2 d_rx^2 f_c^2 = 2.5e7 * 1e8 * 1e18 = 2.5e33
        let s = one_path((0.0, 5_000.0), (0.0, 0.0), (10_000.0, 0.0)).unwrap();
        let alpha = s.pathloss().unwrap().get(0, 0, 0);
        let expected = 1.0 / (1984.401_707_539_188_4 * 2.5e33);
        assert!((alpha / expected - 1.0).abs() < 1e-12, "{alpha} vs {expected}");
    }

    #[test]
    fn gain_count_checked() {
        let err = Scenario::new(
            PhysConst::standard(),
            vec![Point2D::new(0.0, 0.0)],
            vec![Point2D::new(1.0, 0.0)],
            vec![Point2D::new(0.0, 1.0)],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidScenario(_)));
    }

    #[test]
    fn random_scenario_is_deterministic() {
        let cfg = LayoutDistribution::default();
        assert_eq!(random_scenario(&cfg, 42).unwrap(), random_scenario(&cfg, 42).unwrap());
        assert_ne!(random_scenario(&cfg, 42).unwrap(), random_scenario(&cfg, 43).unwrap());
    }

    #[test]
    fn random_scenario_recomputed_distances() {
        let s = random_scenario(&LayoutDistribution::default(), 9).unwrap();
        let d = s.distances().unwrap();
        for (m, t) in s.transmitters().iter().enumerate() {
            for (q, tar) in s.targets().iter().enumerate() {
                let direct = ((t.x - tar.x).powi(2) + (t.y - tar.y).powi(2)).sqrt();
                assert!((d.tx(m, q) - direct).abs() <= 1e-9 * direct);
            }
        }
        for (q, tar) in s.targets().iter().enumerate() {
            for (n, r) in s.receivers().iter().enumerate() {
                let direct = ((r.x - tar.x).powi(2) + (r.y - tar.y).powi(2)).sqrt();
                assert!((d.rx(q, n) - direct).abs() <= 1e-9 * direct);
            }
        }
    }

    #[test]
    fn layout_statistics() {
        let cfg = LayoutDistribution {
            n_tx: 1,
            n_rx: 1,
            n_targets: 1,
            ..LayoutDistribution::default()
        };
        let draws = 100_000;
        let (mut sx, mut sy, mut power) = (0.0, 0.0, 0.0);
        for seed in 0..draws {
            let s = random_scenario(&cfg, seed).unwrap();
            sx += s.targets()[0].x;
            sy += s.targets()[0].y;
            power += s.gains()[0].norm_sqr();
        }
        let n = draws as f64;
        let center = cfg.area_side / 2.0;
        assert!((sx / n - center).abs() < 0.01 * center);
        assert!((sy / n - center).abs() < 0.01 * center);
        assert!((power / n - 10.0).abs() < 0.02 * 10.0, "E|h|^2 = {}", power / n);
    }

    #[test]
    fn impossible_separation_is_reported() {
        let cfg = LayoutDistribution {
            area_side: 1.0,
            min_separation: 10.0,
            ..LayoutDistribution::default()
        };
        assert!(matches!(
            random_scenario(&cfg, 1),
            Err(Error::LayoutRejected { .. })
        ));
    }

    #[test]
    fn json_round_trip_and_schema() {
        let s = random_scenario(&LayoutDistribution::default(), 3).unwrap();
        let text = s.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["transmitters"].as_array().unwrap().len(), 5);
        assert_eq!(v["transmitters"][0].as_array().unwrap().len(), 2);
        assert_eq!(v["gains"].as_array().unwrap().len(), 5 * 4 * 5);
        assert_eq!(v["gains"][0].as_array().unwrap().len(), 2);
        assert!(v["consts"]["carrier_freq_hz"].is_number());
        // gain order: m-major, then q, then n
        let h = s.gain(2, 1, 3);
        let idx = (2 * 4 + 1) * 5 + 3;
        assert_eq!(v["gains"][idx][0].as_f64().unwrap(), h.re);
        assert_eq!(Scenario::from_json(&text).unwrap(), s);
    }

    #[test]
    fn json_with_bad_gain_count_fails() {
        let text = r#"{"consts":{"carrier_freq_hz":1e9,"speed_of_light_mps":299792458,
            "noise_psd_w_per_hz":4e-21,"pulse_rep_freq_hz":5000,"integration_time_s":0.01},
            "transmitters":[[0,0]],"receivers":[[1,0]],"targets":[[0,1]],"gains":[]}"#;
        assert!(Scenario::from_json(text).is_err());
    }
}
