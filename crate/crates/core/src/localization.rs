//! Statistical multilateration: TOA draws at the delay-estimation bound and
//! a Gauss-Newton weighted least-squares position fit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crlb::{max_trace_crlb, AllocationPair, CrlbComponents};
use crate::error::{Error, Result};
use crate::scenario::{Point2D, Scenario};

const GN_TOLERANCE_M: f64 = 1e-6;
const GN_MAX_ITERATIONS: usize = 50;

/// One time of arrival on path transmitter `tx` -> `target` -> receiver `rx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToaObservation {
    pub tx: usize,
    pub target: usize,
    pub rx: usize,
    /// Seconds.
    pub toa: f64,
    /// Seconds squared.
    pub variance: f64,
}

/// Delay variance after integrating `f_r * T_int` pulses:
/// `N0 / (8 pi^2 w^2 p alpha |h|^2 T_int)`. Infinite when the path carries
/// no energy.
pub fn toa_variance(s: &Scenario<f64>, alloc: &AllocationPair<f64>, m: usize, q: usize, n: usize) -> Result<f64> {
    let alpha = s.pathloss()?.get(m, q, n);
    Ok(variance_from(s, alloc, alpha, m, q, n))
}

fn variance_from(s: &Scenario<f64>, alloc: &AllocationPair<f64>, alpha: f64, m: usize, q: usize, n: usize) -> f64 {
    let c = s.consts();
    let w = alloc.bandwidth[m];
    let energy = 8.0 * std::f64::consts::PI.powi(2) * w * w * alloc.power[m] * alpha * s.gain(m, q, n).norm_sqr()
        * c.integration_time;
    if energy > 0.0 {
        c.noise_psd / energy
    } else {
        f64::INFINITY
    }
}

/// One standard normal per path in `(m, q, n)` order. Reusing the same draws
/// across allocations gives common random numbers.
pub fn standard_normals(s: &Scenario<f64>, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..s.n_tx() * s.n_targets() * s.n_rx())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

/// TOAs with noise `sigma * eps[path]`; paths without power or bandwidth
/// are omitted.
pub fn toas_with_noise(s: &Scenario<f64>, alloc: &AllocationPair<f64>, eps: &[f64]) -> Result<Vec<ToaObservation>> {
    if alloc.n_tx() != s.n_tx() {
        return Err(Error::InvalidArgument("allocation length differs from transmitter count".into()));
    }
    let paths = s.n_tx() * s.n_targets() * s.n_rx();
    if eps.len() != paths {
        return Err(Error::InvalidArgument(format!("need {paths} noise samples, got {}", eps.len())));
    }
    let d = s.distances()?;
    let alpha = s.pathloss()?;
    let light = s.consts().speed_of_light;
    let mut out = Vec::new();
    for m in 0..s.n_tx() {
        for q in 0..s.n_targets() {
            for n in 0..s.n_rx() {
                let variance = variance_from(s, alloc, alpha.get(m, q, n), m, q, n);
                if !variance.is_finite() {
                    continue;
                }
                let delay = (d.tx(m, q) + d.rx(q, n)) / light;
                let toa = (delay + variance.sqrt() * eps[s.path_index(m, q, n)]).max(0.0);
                out.push(ToaObservation { tx: m, target: q, rx: n, toa, variance });
            }
        }
    }
    Ok(out)
}

/// Noisy TOAs for every energized path.
pub fn simulate_toas(s: &Scenario<f64>, alloc: &AllocationPair<f64>, seed: u64) -> Result<Vec<ToaObservation>> {
    toas_with_noise(s, alloc, &standard_normals(s, seed))
}

/// Noise-free TOAs (variances still reported).
pub fn exact_toas(s: &Scenario<f64>, alloc: &AllocationPair<f64>) -> Result<Vec<ToaObservation>> {
    let zeros = vec![0.0; s.n_tx() * s.n_targets() * s.n_rx()];
    toas_with_noise(s, alloc, &zeros)
}

/// Position estimate of one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub position: Point2D<f64>,
    /// Linearized covariance in m^2, row-major.
    pub covariance: [[f64; 2]; 2],
    pub iterations: usize,
}

impl TargetEstimate {
    pub fn covariance_trace(&self) -> f64 {
        self.covariance[0][0] + self.covariance[1][1]
    }
}

/// Weighted least-squares fit of every target, iterated from `coarse`.
///
/// Sensor positions and the speed of light come from `s`; its target
/// positions are not used.
pub fn blue_estimate(
    s: &Scenario<f64>,
    obs: &[ToaObservation],
    coarse: &[Point2D<f64>],
) -> Result<Vec<TargetEstimate>> {
    if coarse.len() != s.n_targets() {
        return Err(Error::InvalidArgument("one coarse location per target required".into()));
    }
    let light = s.consts().speed_of_light;
    (0..s.n_targets())
        .map(|q| {
            let own: Vec<&ToaObservation> = obs.iter().filter(|o| o.target == q).collect();
            fit_target(s, &own, coarse[q], light).ok_or(Error::RankDeficient { target: q })
        })
        .collect()
}

fn fit_target(s: &Scenario<f64>, obs: &[&ToaObservation], start: Point2D<f64>, light: f64) -> Option<TargetEstimate> {
    if obs.len() < 2 {
        return None;
    }
    let tx = s.transmitters();
    let rx = s.receivers();
    let mut x = start;
    let mut iterations = 0;
    loop {
        // normal equations in meters: range = c * toa, weight = 1 / (c^2 var)
        let (mut a11, mut a12, mut a22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for o in obs {
            let (t, r) = (tx[o.tx], rx[o.rx]);
            let (dt, dr) = (x.distance(&t), x.distance(&r));
            if !(dt > 0.0 && dr > 0.0) {
                return None;
            }
            let gx = (x.x - t.x) / dt + (x.x - r.x) / dr;
            let gy = (x.y - t.y) / dt + (x.y - r.y) / dr;
            let weight = 1.0 / (light * light * o.variance);
            let resid = light * o.toa - (dt + dr);
            a11 += weight * gx * gx;
            a12 += weight * gx * gy;
            a22 += weight * gy * gy;
            r1 += weight * gx * resid;
            r2 += weight * gy * resid;
        }
        let det = a11 * a22 - a12 * a12;
        if !(det > 1e-12 * (a11 + a22).powi(2)) {
            return None;
        }
        let covariance = [[a22 / det, -a12 / det], [-a12 / det, a11 / det]];
        let dx = covariance[0][0] * r1 + covariance[0][1] * r2;
        let dy = covariance[1][0] * r1 + covariance[1][1] * r2;
        iterations += 1;
        x = Point2D::new(x.x + dx, x.y + dy);
        if dx.hypot(dy) < GN_TOLERANCE_M || iterations >= GN_MAX_ITERATIONS {
            return Some(TargetEstimate {
                position: x,
                covariance,
                iterations,
            });
        }
    }
}

/// Largest Euclidean error over targets. Panics when the lengths differ.
pub fn max_position_error(estimates: &[Point2D<f64>], truth: &[Point2D<f64>]) -> f64 {
    assert_eq!(estimates.len(), truth.len(), "one estimate per target");
    estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| e.distance(t))
        .fold(0.0, f64::max)
}

/// Worst-case CRLB trace for the integrated measurement, i.e. the single
/// pulse bound divided by the number of integrated pulses.
pub fn integrated_max_crlb(
    s: &Scenario<f64>,
    comps: &[CrlbComponents<f64>],
    alloc: &AllocationPair<f64>,
) -> Result<f64> {
    Ok(max_trace_crlb(comps, alloc)?.0 / s.consts().pulses_integrated())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crlb::{build_all, trace_crlb};
    use crate::scenario::{random_scenario, LayoutDistribution, PhysConst, SPEED_OF_LIGHT};
    use num_complex::Complex;

    fn line_scenario() -> Scenario<f64> {
        Scenario::new(
            PhysConst::standard(),
            vec![Point2D::new(0.0, 3000.0)],
            vec![Point2D::new(0.0, -3000.0)],
            vec![Point2D::new(0.0, 0.0)],
            vec![Complex::new(1.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn noiseless_delay() {
        let s = line_scenario();
        let alloc = AllocationPair::uniform(1, 1.0, 1e6);
        let obs = exact_toas(&s, &alloc).unwrap();
        assert_eq!(obs.len(), 1);
        assert!((obs[0].toa - 6000.0 / SPEED_OF_LIGHT).abs() < 1e-18);
        assert!((obs[0].toa - 20.0138e-6).abs() < 1e-9);
    }

    #[test]
    fn sigma_is_inverse_in_bandwidth() {
        let s = line_scenario();
        let v1 = toa_variance(&s, &AllocationPair::uniform(1, 1.0, 1e6), 0, 0, 0).unwrap();
        let v2 = toa_variance(&s, &AllocationPair::uniform(1, 1.0, 2e6), 0, 0, 0).unwrap();
        assert!((v1.sqrt() / v2.sqrt() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_power_paths_are_omitted() {
        let s = random_scenario(&LayoutDistribution::default(), 3).unwrap();
        let mut alloc = AllocationPair::uniform(5, 10.0, 3e6);
        alloc.power[2] = 0.0;
        let obs = exact_toas(&s, &alloc).unwrap();
        assert_eq!(obs.len(), 4 * 4 * 5);
        assert!(obs.iter().all(|o| o.tx != 2));
    }

    #[test]
    fn empirical_variance_matches_model() {
        // the pathloss model carries no wavelength factor, so the power that
        // gives nanosecond-level timing is astronomically large
        let s = line_scenario();
        let alloc = AllocationPair::uniform(1, 1e20, 1e6);
        let truth = exact_toas(&s, &alloc).unwrap()[0];
        let draws = 10_000;
        let mut acc = 0.0;
        for seed in 0..draws {
            let o = simulate_toas(&s, &alloc, seed).unwrap()[0];
            acc += (o.toa - truth.toa).powi(2);
        }
        let empirical = acc / draws as f64;
        assert!(truth.variance.sqrt() < 1e-3 * truth.toa);
        assert!((empirical / truth.variance - 1.0).abs() < 0.05);
    }

    #[test]
    fn fixed_point_at_truth() {
        let s = random_scenario(&LayoutDistribution::default(), 9).unwrap();
        let alloc = AllocationPair::uniform(5, 10.0, 3e6);
        let obs = exact_toas(&s, &alloc).unwrap();
        let est = blue_estimate(&s, &obs, s.targets()).unwrap();
        for (e, t) in est.iter().zip(s.targets()) {
            assert!(e.position.distance(t) < 1e-6);
        }
    }

    #[test]
    fn converges_from_offset_start() {
        let s = random_scenario(&LayoutDistribution::default(), 10).unwrap();
        let alloc = AllocationPair::uniform(5, 10.0, 3e6);
        let obs = exact_toas(&s, &alloc).unwrap();
        let coarse: Vec<_> = s.targets().iter().map(|t| Point2D::new(t.x + 100.0, t.y - 60.0)).collect();
        let est = blue_estimate(&s, &obs, &coarse).unwrap();
        for (e, t) in est.iter().zip(s.targets()) {
            assert!(e.position.distance(t) < 1e-3);
        }
    }

    #[test]
    fn covariance_equals_integrated_crlb() {
        let s = random_scenario(&LayoutDistribution::default(), 12).unwrap();
        let comps = build_all(&s).unwrap();
        let alloc = AllocationPair::new(vec![1.0, 2.0, 3.0, 0.5, 3.5], vec![4e5, 6e5, 5e5, 9e5, 6e5]).unwrap();
        let obs = exact_toas(&s, &alloc).unwrap();
        let est = blue_estimate(&s, &obs, s.targets()).unwrap();
        let pulses = s.consts().pulses_integrated();
        for (e, c) in est.iter().zip(&comps) {
            let crlb = trace_crlb(c, &alloc).unwrap() / pulses;
            assert!(e.covariance_trace() >= crlb * (1.0 - 1e-9));
            assert!((e.covariance_trace() / crlb - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_geometry_is_rank_deficient() {
        let s = line_scenario();
        let alloc = AllocationPair::uniform(1, 1.0, 1e6);
        let obs = exact_toas(&s, &alloc).unwrap();
        assert!(matches!(
            blue_estimate(&s, &obs, s.targets()),
            Err(Error::RankDeficient { target: 0 })
        ));
    }

    #[test]
    fn max_error_examples() {
        let truth = vec![Point2D::new(0.0, 0.0), Point2D::new(10.0, 10.0)];
        assert_eq!(max_position_error(&truth, &truth), 0.0);
        let est = vec![Point2D::new(3.0, 4.0), Point2D::new(10.0, 10.0)];
        assert_eq!(max_position_error(&est, &truth), 5.0);
    }

    #[test]
    fn max_error_matches_loop() {
        let s = random_scenario(&LayoutDistribution::default(), 4).unwrap();
        let alloc = AllocationPair::uniform(5, 1e22, 3e6);
        let obs = simulate_toas(&s, &alloc, 77).unwrap();
        let est: Vec<_> = blue_estimate(&s, &obs, s.targets())
            .unwrap()
            .iter()
            .map(|e| e.position)
            .collect();
        let mut expected = 0.0f64;
        for q in 0..4 {
            let dx = est[q].x - s.targets()[q].x;
            let dy = est[q].y - s.targets()[q].y;
            expected = expected.max((dx * dx + dy * dy).sqrt());
        }
        assert_eq!(max_position_error(&est, s.targets()), expected);
    }
}
