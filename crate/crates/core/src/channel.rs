//! Per-link wideband channel synthesis.
//!
//! Pipeline per UE-TRP link: path loss and shadow fading, a tapped-delay-line
//! multipath draw, the N-subcarrier frequency response, an N-point IFFT
//! truncated to the first `cir_taps` taps, link-budget scaling and RSRP.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{bail, Result};
use crate::scenario::{Position, ScenarioConfig};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

fn check_pl_args(d_3d_m: f64, f_c_ghz: f64) -> Result<()> {
    if !(d_3d_m >= 1.0) {
        bail!(InvalidArgument, "path loss model needs d_3d >= 1 m, got {}", d_3d_m);
    }
    if !(f_c_ghz > 0.0) || !f_c_ghz.is_finite() {
        bail!(InvalidArgument, "carrier frequency must be positive, got {}", f_c_ghz);
    }
    Ok(())
}

pub fn path_loss_nlos(d_3d_m: f64, f_c_ghz: f64) -> Result<f64> {
    check_pl_args(d_3d_m, f_c_ghz)?;
    Ok(33.63 + 21.9 * d_3d_m.log10() + 20.0 * f_c_ghz.log10())
}

pub fn path_loss_los(d_3d_m: f64, f_c_ghz: f64) -> Result<f64> {
    check_pl_args(d_3d_m, f_c_ghz)?;
    Ok(31.84 + 21.5 * d_3d_m.log10() + 19.0 * f_c_ghz.log10())
}

/// InF-DH path loss in dB: the larger of the NLoS and LoS branches.
pub fn path_loss(d_3d_m: f64, f_c_ghz: f64) -> Result<f64> {
    Ok(path_loss_nlos(d_3d_m, f_c_ghz)?.max(path_loss_los(d_3d_m, f_c_ghz)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipathProfile {
    /// Absolute propagation delays, ascending.
    pub delays_s: Vec<f64>,
    /// Mean path powers, summing to one.
    pub powers_linear: Vec<f64>,
    pub rician_k_db: f64,
    /// First path is a deterministic direct component.
    pub los: bool,
}

impl MultipathProfile {
    pub fn n_paths(&self) -> usize {
        self.delays_s.len()
    }
}

/// Draws a multipath profile for one link.
///
/// Every path arrives at the geometric delay `d_3d / c` plus an excess delay
/// uniform on `[0, span_factor * tau_rms]`; mean powers decay as
/// `exp(-excess / tau_rms)`. On LoS links the first path has zero excess delay
/// and carries `K / (K + 1)` of the power.
pub fn draw_multipath<R: Rng + ?Sized>(
    los: bool,
    d_3d_m: f64,
    config: &ScenarioConfig,
    rng: &mut R,
) -> MultipathProfile {
    let mp = &config.multipath;
    let n = rng.gen_range(mp.min_paths..=mp.max_paths);
    let span = mp.span_factor * mp.tau_rms_s;
    let mut excess: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * span).collect();
    excess.sort_by(|a, b| a.partial_cmp(b).expect("finite delays"));
    if los {
        excess[0] = 0.0;
    }
    let mut powers: Vec<f64> = excess.iter().map(|t| (-t / mp.tau_rms_s).exp()).collect();
    normalize(&mut powers);
    if los && n > 1 {
        let k = 10f64.powf(mp.rician_k_db / 10.0);
        let scattered: f64 = powers[1..].iter().sum();
        powers[0] = k / (k + 1.0);
        for p in &mut powers[1..] {
            *p *= 1.0 / ((k + 1.0) * scattered);
        }
        normalize(&mut powers);
    }
    let geometric = d_3d_m / SPEED_OF_LIGHT_M_S;
    MultipathProfile {
        delays_s: excess.iter().map(|t| geometric + t).collect(),
        powers_linear: powers,
        rician_k_db: mp.rician_k_db,
        los,
    }
}

fn normalize(powers: &mut [f64]) {
    let total: f64 = powers.iter().sum();
    for p in powers.iter_mut() {
        *p /= total;
    }
}

/// Complex path gains: circular Gaussian with the profile's mean powers, and a
/// deterministic carrier-phase gain for the LoS direct path.
pub fn draw_path_gains<R: Rng + ?Sized>(
    profile: &MultipathProfile,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Vec<Complex64> {
    profile
        .delays_s
        .iter()
        .zip(&profile.powers_linear)
        .enumerate()
        .map(|(p, (&tau, &power))| {
            if p == 0 && profile.los {
                let phase = -2.0 * PI * (config.carrier_ghz * 1e9 * tau).fract();
                Complex64::from_polar(power.sqrt(), phase)
            } else {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) * (power / 2.0).sqrt()
            }
        })
        .collect()
}

/// `H(k) = sum_p g_p exp(-j 2 pi k df tau_p)` for `k = 0..n_subcarriers`.
pub fn freq_response_from_gains(
    delays_s: &[f64],
    gains: &[Complex64],
    n_subcarriers: usize,
    subcarrier_spacing_hz: f64,
) -> Vec<Complex64> {
    const ANCHOR: usize = 64;
    let mut h = vec![Complex64::new(0.0, 0.0); n_subcarriers];
    for (&tau, &g) in delays_s.iter().zip(gains) {
        let omega = -2.0 * PI * subcarrier_spacing_hz * tau;
        let step = Complex64::from_polar(1.0, omega);
        let mut phasor = Complex64::new(0.0, 0.0);
        for (k, hk) in h.iter_mut().enumerate() {
            if k % ANCHOR == 0 {
                // re-anchor the rotation recurrence to bound drift
                phasor = Complex64::from_polar(1.0, omega * k as f64);
            }
            *hk += g * phasor;
            phasor *= step;
        }
    }
    h
}

pub fn freq_response<R: Rng + ?Sized>(
    profile: &MultipathProfile,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Vec<Complex64> {
    let gains = draw_path_gains(profile, config, rng);
    freq_response_from_gains(&profile.delays_s, &gains, config.n_subcarriers, config.subcarrier_spacing_hz)
}

/// Reusable N-point inverse FFT. `Fft` plans are `Sync`, so one planner can
/// serve every worker thread.
#[derive(Clone)]
pub struct CirTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirTransform").field("n", &self.n).finish()
    }
}

impl CirTransform {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(n);
        Self { n, fft }
    }

    /// Full-length IFFT scaled by `1/N`, so a flat unit response maps to a
    /// unit impulse at tap 0.
    pub fn full(&self, freq_response: &[Complex64]) -> Result<Vec<Complex64>> {
        if freq_response.len() != self.n {
            bail!(
                Shape,
                "frequency response has {} bins, transform expects {}",
                freq_response.len(),
                self.n
            );
        }
        let mut buf = freq_response.to_vec();
        self.fft.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for v in &mut buf {
            *v *= scale;
        }
        Ok(buf)
    }

    pub fn truncated(&self, freq_response: &[Complex64], taps: usize) -> Result<Vec<Complex64>> {
        if taps > self.n {
            bail!(Shape, "cannot keep {} taps of a {}-point transform", taps, self.n);
        }
        let mut full = self.full(freq_response)?;
        full.truncate(taps);
        Ok(full)
    }
}

/// IFFT truncated to `config.cir_taps`. Plans a fresh transform; use
/// [`CirTransform`] directly in loops.
pub fn cir_from_freq(freq_response: &[Complex64], config: &ScenarioConfig) -> Result<Vec<Complex64>> {
    if freq_response.len() != config.n_subcarriers {
        bail!(
            Shape,
            "frequency response has {} bins, config expects {}",
            freq_response.len(),
            config.n_subcarriers
        );
    }
    CirTransform::new(config.n_subcarriers).truncated(freq_response, config.cir_taps)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Scales the CIR to received amplitude and then normalizes by the transmit
/// power. The net gain is `sqrt(10^(-(PL + SF) / 10))`.
pub fn apply_link_budget(cir: &[Complex64], path_loss_db: f64, shadow_db: f64, tx_power_dbm: f64) -> Vec<Complex64> {
    let tx = dbm_to_watts(tx_power_dbm);
    let received = (tx * db_to_linear(-path_loss_db - shadow_db)).sqrt();
    let norm = tx.sqrt();
    cir.iter().map(|h| h * received / norm).collect()
}

/// Least-squares channel estimate `Y(k) / X(k)`.
pub fn estimate_channel_ls(received: &[Complex64], reference: &[Complex64]) -> Result<Vec<Complex64>> {
    if received.len() != reference.len() {
        bail!(
            Shape,
            "received ({}) and reference ({}) lengths differ",
            received.len(),
            reference.len()
        );
    }
    if let Some(k) = reference.iter().position(|x| x.norm_sqr() == 0.0) {
        bail!(InvalidArgument, "reference symbol {} is zero", k);
    }
    Ok(received.iter().zip(reference).map(|(y, x)| y / x).collect())
}

/// Unit-modulus chirp used as the reference signal when receiver noise is on.
pub fn reference_signal(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let phase = PI * ((k as u128 * k as u128) % (2 * n as u128)) as f64 / n as f64;
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

/// `(1/L) sum |h(n)|^2`.
pub fn rsrp_linear(cir: &[Complex64]) -> f64 {
    if cir.is_empty() {
        return 0.0;
    }
    cir.iter().map(|h| h.norm_sqr()).sum::<f64>() / cir.len() as f64
}

/// RSRP in dBm, treating the linear power as watts. An all-zero CIR yields
/// negative infinity.
pub fn rsrp_dbm(cir: &[Complex64]) -> f64 {
    let lin = rsrp_linear(cir);
    if lin == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * lin.log10() + 30.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub los: bool,
    pub d_3d_m: f64,
    pub path_loss_db: f64,
    pub shadow_db: f64,
    /// Unscaled small-scale response `H(k)`.
    pub freq_response: Vec<Complex64>,
    /// Truncated CIR after link budget and transmit-power normalization.
    pub cir: Vec<Complex64>,
    pub rsrp_dbm: f64,
}

/// Synthesizes one UE-TRP link.
pub fn synthesize_link<R: Rng + ?Sized>(
    ue: &Position,
    trp: &Position,
    los: bool,
    config: &ScenarioConfig,
    transform: &CirTransform,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let d_3d = ue.distance_3d(trp).max(1.0);
    let path_loss_db = path_loss(d_3d, config.carrier_ghz)?;
    let shadow_db = if config.shadow_sigma_db > 0.0 {
        Normal::new(0.0, config.shadow_sigma_db)
            .map_err(|e| crate::error::Error::Config(e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    let profile = draw_multipath(los, d_3d, config, rng);
    let freq = freq_response(&profile, config, rng);
    let estimated = match config.multipath.snr_db {
        None => freq.clone(),
        Some(snr_db) => {
            let x = reference_signal(freq.len());
            let signal_power = freq.iter().map(|h| h.norm_sqr()).sum::<f64>() / freq.len() as f64;
            let noise_std = (signal_power / db_to_linear(snr_db) / 2.0).sqrt();
            let y: Vec<Complex64> = freq
                .iter()
                .zip(&x)
                .map(|(h, x)| {
                    let w = Complex64::new(
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                    ) * noise_std;
                    h * x + w
                })
                .collect();
            estimate_channel_ls(&y, &x)?
        }
    };
    let cir = transform.truncated(&estimated, config.cir_taps)?;
    let cir = apply_link_budget(&cir, path_loss_db, shadow_db, config.tx_power_dbm);
    let rsrp_dbm = rsrp_dbm(&cir);
    Ok(ChannelRealization {
        los,
        d_3d_m: d_3d,
        path_loss_db,
        shadow_db,
        freq_response: freq,
        cir,
        rsrp_dbm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> ScenarioConfig {
        ScenarioConfig {
            n_subcarriers: 512,
            cir_taps: 64,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn path_loss_reference_values() {
        assert!((path_loss_nlos(1.0, 1.0).unwrap() - 33.63).abs() < 1e-12);
        assert!((path_loss_nlos(1.0, 3.64).unwrap() - 44.8521).abs() < 1e-3);
        assert!((path_loss_nlos(100.0, 3.64).unwrap() - 88.6521).abs() < 1e-3);
        assert!((path_loss_los(1.0, 1.0).unwrap() - 31.84).abs() < 1e-12);
        assert!((path_loss_los(1.0, 3.64).unwrap() - 42.5009).abs() < 1e-3);
        assert!((path_loss_los(10.0, 3.64).unwrap() - 64.0009).abs() < 1e-3);
        assert!((path_loss(1.0, 1.0).unwrap() - 33.63).abs() < 1e-12);
    }

    #[test]
    fn nlos_branch_dominates_at_3_64_ghz() {
        for d in [1.0, 2.5, 10.0, 47.0, 130.0] {
            let nlos = path_loss_nlos(d, 3.64).unwrap();
            assert_eq!(path_loss(d, 3.64).unwrap(), nlos);
            let gap = nlos - path_loss_los(d, 3.64).unwrap();
            let expected = 1.79 + 3.64f64.log10() + 0.4 * d.log10();
            assert!((gap - expected).abs() < 1e-9);
            assert!((gap - 0.4 * d.log10() - 2.3511).abs() < 1e-3);
        }
    }

    #[test]
    fn path_loss_rejects_short_links() {
        assert!(path_loss_nlos(0.5, 3.64).is_err());
        assert!(path_loss_los(0.99, 3.64).is_err());
        assert!(path_loss(2.0, 0.0).is_err());
    }

    #[test]
    fn single_path_los_profile() {
        let mut cfg = small_config();
        cfg.multipath.min_paths = 1;
        cfg.multipath.max_paths = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = draw_multipath(true, 30.0, &cfg, &mut rng);
        assert_eq!(p.n_paths(), 1);
        assert_eq!(p.powers_linear, vec![1.0]);
        assert!((p.delays_s[0] - 30.0 / SPEED_OF_LIGHT_M_S).abs() < 1e-18);
    }

    #[test]
    fn profiles_are_normalized_and_sorted() {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..500 {
            let p = draw_multipath(i % 3 == 0, 12.0 + i as f64, &cfg, &mut rng);
            let sum: f64 = p.powers_linear.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(p.delays_s.windows(2).all(|w| w[0] <= w[1]));
            assert!((8..=24).contains(&p.n_paths()));
            if p.los {
                let k = db_to_linear(7.0);
                assert!((p.powers_linear[0] - k / (k + 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_excess_delay_tracks_tau_rms() {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 20.0;
        let base = d / SPEED_OF_LIGHT_M_S;
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| {
                let p = draw_multipath(false, d, &cfg, &mut rng);
                p.delays_s.iter().zip(&p.powers_linear).map(|(t, w)| (t - base) * w).sum::<f64>()
            })
            .sum::<f64>()
            / draws as f64;
        let tau = cfg.multipath.tau_rms_s;
        assert!((mean - tau).abs() / tau < 0.05, "mean excess delay {mean:e}");
    }

    #[test]
    fn flat_response_for_zero_delay() {
        let h = freq_response_from_gains(&[0.0], &[Complex64::new(1.0, 0.0)], 256, 30e3);
        assert!(h.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn one_sample_delay_gives_phase_ramp() {
        let n = 1024;
        let df = 30e3;
        let tau = 1.0 / (n as f64 * df);
        let g = Complex64::from_polar(0.7, 0.3);
        let h = freq_response_from_gains(&[tau], &[g], n, df);
        for k in 0..n {
            assert!((h[k].norm() - 0.7).abs() < 1e-12);
            let expected = g * Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64);
            assert!((h[k] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn recurrence_matches_direct_exponentials() {
        let delays = [37.3e-9, 121.9e-9, 402.0e-9];
        let gains = [
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.5, 0.1),
            Complex64::new(0.05, 0.4),
        ];
        let n = 4096;
        let h = freq_response_from_gains(&delays, &gains, n, 30e3);
        for k in (0..n).step_by(37) {
            let direct: Complex64 = delays
                .iter()
                .zip(&gains)
                .map(|(t, g)| g * Complex64::from_polar(1.0, -2.0 * PI * 30e3 * t * k as f64))
                .sum();
            assert!((h[k] - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_response_yields_unit_impulse() {
        let cfg = ScenarioConfig::default();
        let flat = vec![Complex64::new(1.0, 0.0); cfg.n_subcarriers];
        let cir = cir_from_freq(&flat, &cfg).unwrap();
        assert_eq!(cir.len(), 256);
        assert!((cir[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(cir[1..].iter().all(|h| h.norm() < 1e-12));
    }

    #[test]
    fn integer_delay_peaks_at_its_tap() {
        let cfg = small_config();
        let ts = cfg.sample_period_s();
        for m in [0usize, 5, 17, 63] {
            let h = freq_response_from_gains(&[m as f64 * ts], &[Complex64::new(1.0, 0.0)], 512, 30e3);
            let cir = cir_from_freq(&h, &cfg).unwrap();
            let peak = (0..cir.len())
                .max_by(|&a, &b| cir[a].norm().partial_cmp(&cir[b].norm()).unwrap())
                .unwrap();
            assert_eq!(peak, m);
            assert!((cir[m].norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn late_path_loses_energy_to_truncation() {
        let cfg = small_config();
        let ts = cfg.sample_period_s();
        let h = freq_response_from_gains(&[70.5 * ts], &[Complex64::new(1.0, 0.0)], 512, 30e3);
        let t = CirTransform::new(512);
        let full: f64 = t.full(&h).unwrap().iter().map(|v| v.norm_sqr()).sum();
        let kept: f64 = t.truncated(&h, 64).unwrap().iter().map(|v| v.norm_sqr()).sum();
        assert!(kept < full);
        assert!(kept < 0.1 * full);
    }

    #[test]
    fn cir_rejects_wrong_length() {
        let cfg = small_config();
        assert!(cir_from_freq(&vec![Complex64::new(1.0, 0.0); 100], &cfg).is_err());
    }

    #[test]
    fn link_budget_scaling() {
        let cir = vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.0)];
        let same = apply_link_budget(&cir, 0.0, 0.0, 24.0);
        for (a, b) in same.iter().zip(&cir) {
            assert!((a - b).norm() < 1e-12);
        }
        let tenth = apply_link_budget(&cir, 20.0, 0.0, 24.0);
        for (a, b) in tenth.iter().zip(&cir) {
            assert!((a - b * 0.1).norm() < 1e-12);
        }
        let s = apply_link_budget(&cir, 40.0, -10.0, 24.0);
        assert!((s[1].re - 0.5 * 0.031_622_776_601_683_79).abs() < 1e-12);
    }

    #[test]
    fn least_squares_estimate() {
        let x: Vec<Complex64> = reference_signal(16);
        let ones = estimate_channel_ls(&x, &x).unwrap();
        assert!(ones.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        let j2: Vec<Complex64> = x.iter().map(|v| v * Complex64::new(0.0, 2.0)).collect();
        let est = estimate_channel_ls(&j2, &x).unwrap();
        assert!(est.iter().all(|v| (v - Complex64::new(0.0, 2.0)).norm() < 1e-12));
        let h: Vec<Complex64> = (0..16).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let y: Vec<Complex64> = h.iter().zip(&x).map(|(h, x)| h * x).collect();
        let est = estimate_channel_ls(&y, &x).unwrap();
        for (a, b) in est.iter().zip(&h) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut bad = x.clone();
        bad[3] = Complex64::new(0.0, 0.0);
        assert!(estimate_channel_ls(&y, &bad).is_err());
        assert!(estimate_channel_ls(&y[..3], &x).is_err());
    }

    #[test]
    fn rsrp_examples() {
        let mut cir = vec![Complex64::new(0.0, 0.0); 256];
        cir[0] = Complex64::new(1.0, 0.0);
        assert!((rsrp_linear(&cir) - 1.0 / 256.0).abs() < 1e-18);
        let doubled: Vec<Complex64> = cir.iter().map(|h| h * 2.0).collect();
        assert!((rsrp_linear(&doubled) - 4.0 * rsrp_linear(&cir)).abs() < 1e-15);
        assert_eq!(rsrp_dbm(&vec![Complex64::new(0.0, 0.0); 8]), f64::NEG_INFINITY);
        assert!((rsrp_dbm(&cir) - (10.0 * (1.0f64 / 256.0).log10() + 30.0)).abs() < 1e-12);
    }

    #[test]
    fn noisy_links_stay_close_to_clean_at_high_snr() {
        let mut cfg = small_config();
        let trp = Position::new(50.0, 30.0, 8.0);
        let ue = Position::new(61.0, 24.0, 1.5);
        let t = CirTransform::new(cfg.n_subcarriers);
        let clean = synthesize_link(&ue, &trp, false, &cfg, &t, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        cfg.multipath.snr_db = Some(60.0);
        let noisy = synthesize_link(&ue, &trp, false, &cfg, &t, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(clean.freq_response, noisy.freq_response);
        assert!((clean.rsrp_dbm - noisy.rsrp_dbm).abs() < 0.1);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = small_config();
        let trp = Position::new(50.0, 30.0, 8.0);
        let ue = Position::new(70.0, 20.0, 1.5);
        let t = CirTransform::new(cfg.n_subcarriers);
        let a = synthesize_link(&ue, &trp, true, &cfg, &t, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = synthesize_link(&ue, &trp, true, &cfg, &t, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cir.len(), cfg.cir_taps);
        assert_eq!(a.freq_response.len(), cfg.n_subcarriers);
        assert!(a.rsrp_dbm.is_finite());
        assert_eq!(a.path_loss_db, path_loss(a.d_3d_m, cfg.carrier_ghz).unwrap());
    }
}
