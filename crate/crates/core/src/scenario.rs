//! InF-DH deployment geometry: hall, TRP grid, UE drops and LoS/NLoS draws.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{bail, Result};

/// Knobs of the tapped-delay-line generator that stands in for a ray-based
/// channel tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultipathParams {
    /// RMS delay constant of the exponential power-delay profile.
    pub tau_rms_s: f64,
    pub min_paths: usize,
    pub max_paths: usize,
    /// Excess delays are drawn on `[0, span_factor * tau_rms_s]`.
    pub span_factor: f64,
    /// Rician K-factor of the direct path on LoS links.
    pub rician_k_db: f64,
    /// Receiver SNR per subcarrier. `None` disables noise and least-squares
    /// estimation returns the exact frequency response.
    pub snr_db: Option<f64>,
}

impl Default for MultipathParams {
    fn default() -> Self {
        Self {
            tau_rms_s: 50e-9,
            min_paths: 8,
            max_paths: 24,
            span_factor: 4.0,
            rician_k_db: 7.0,
            snr_db: None,
        }
    }
}

/// Hall geometry, TRP grid, clutter and RF parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub hall_length_m: f64,
    pub hall_width_m: f64,
    pub n_trp: usize,
    pub trp_height_m: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub trp_spacing_m: f64,
    pub ue_height_m: f64,
    /// Fraction of floor area covered by clutter, in `(0, 1)`.
    pub clutter_density: f64,
    pub clutter_height_m: f64,
    pub clutter_size_m: f64,
    pub shadow_sigma_db: f64,
    pub carrier_ghz: f64,
    pub bandwidth_hz: f64,
    /// FFT size.
    pub n_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub cir_taps: usize,
    pub tx_power_dbm: f64,
    pub rng_seed: u64,
    /// Overrides the LoS decay distance derived from the clutter parameters.
    pub los_decay_override_m: Option<f64>,
    pub multipath: MultipathParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            hall_length_m: 120.0,
            hall_width_m: 60.0,
            n_trp: 18,
            trp_height_m: 8.0,
            grid_rows: 3,
            grid_cols: 6,
            trp_spacing_m: 20.0,
            ue_height_m: 1.5,
            clutter_density: 0.6,
            clutter_height_m: 6.0,
            clutter_size_m: 2.0,
            shadow_sigma_db: 4.0,
            carrier_ghz: 3.64,
            bandwidth_hz: 100e6,
            n_subcarriers: 4096,
            subcarrier_spacing_hz: 30e3,
            cir_taps: 256,
            tx_power_dbm: 24.0,
            rng_seed: 0,
            los_decay_override_m: None,
            multipath: MultipathParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// Full-size InF-DH layout: 18 TRPs, 256 CIR taps.
    pub fn paper() -> Self {
        Self::default()
    }

    /// Laptop-sized layout: 2x4 grid of TRPs in the same hall, 64 CIR taps.
    pub fn desk() -> Self {
        Self {
            n_trp: 8,
            grid_rows: 2,
            grid_cols: 4,
            cir_taps: 64,
            ..Self::default()
        }
    }

    /// Full 18-TRP grid with the short desk CIR.
    pub fn desk_full_grid() -> Self {
        Self {
            cir_taps: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.hall_length_m,
            self.hall_width_m,
            self.trp_height_m,
            self.trp_spacing_m,
            self.ue_height_m,
            self.clutter_density,
            self.clutter_height_m,
            self.clutter_size_m,
            self.shadow_sigma_db,
            self.carrier_ghz,
            self.bandwidth_hz,
            self.subcarrier_spacing_hz,
            self.tx_power_dbm,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            bail!(Config, "scenario contains non-finite values");
        }
        if self.grid_rows == 0 || self.grid_cols == 0 {
            bail!(Config, "grid must have at least one row and column");
        }
        if self.grid_rows * self.grid_cols != self.n_trp {
            bail!(
                Config,
                "grid {}x{} does not hold n_trp = {}",
                self.grid_rows,
                self.grid_cols,
                self.n_trp
            );
        }
        if self.trp_spacing_m < 0.0 {
            bail!(Config, "trp spacing must be nonnegative");
        }
        let span_x = (self.grid_cols - 1) as f64 * self.trp_spacing_m;
        let span_y = (self.grid_rows - 1) as f64 * self.trp_spacing_m;
        if span_x > self.hall_length_m || span_y > self.hall_width_m {
            bail!(
                Config,
                "TRP grid {}x{} m exceeds hall {}x{} m",
                span_x,
                span_y,
                self.hall_length_m,
                self.hall_width_m
            );
        }
        if !(self.clutter_density > 0.0 && self.clutter_density < 1.0) {
            bail!(Config, "clutter density must lie in (0, 1), got {}", self.clutter_density);
        }
        if !(self.ue_height_m < self.clutter_height_m && self.clutter_height_m < self.trp_height_m) {
            bail!(
                Config,
                "InF-DH requires ue height < clutter height < trp height ({} / {} / {})",
                self.ue_height_m,
                self.clutter_height_m,
                self.trp_height_m
            );
        }
        if self.clutter_size_m <= 0.0 {
            bail!(Config, "clutter size must be positive");
        }
        if self.carrier_ghz <= 0.0 || self.subcarrier_spacing_hz <= 0.0 {
            bail!(Config, "carrier and subcarrier spacing must be positive");
        }
        if self.n_subcarriers == 0 || self.cir_taps == 0 || self.cir_taps > self.n_subcarriers {
            bail!(
                Config,
                "need 0 < cir_taps ({}) <= n_subcarriers ({})",
                self.cir_taps,
                self.n_subcarriers
            );
        }
        if self.shadow_sigma_db < 0.0 {
            bail!(Config, "shadow fading sigma must be nonnegative");
        }
        let mp = &self.multipath;
        if mp.min_paths == 0 || mp.min_paths > mp.max_paths {
            bail!(Config, "need 1 <= min_paths <= max_paths");
        }
        if !(mp.tau_rms_s > 0.0) || !(mp.span_factor >= 0.0) || !mp.rician_k_db.is_finite() {
            bail!(Config, "invalid multipath parameters");
        }
        if let Some(k) = self.los_decay_override_m {
            if !(k > 0.0) {
                bail!(Config, "LoS decay override must be positive");
            }
        }
        Ok(())
    }

    /// Time-domain sample spacing of the N-point IFFT.
    pub fn sample_period_s(&self) -> f64 {
        1.0 / (self.n_subcarriers as f64 * self.subcarrier_spacing_hz)
    }

    /// SHA-256 over the canonical TOML rendering of the config.
    pub fn digest(&self) -> [u8; 32] {
        let text = toml::to_string(self).expect("scenario config serializes");
        let mut out = [0u8; 32];
        out.copy_from_slice(&Sha256::digest(text.as_bytes()));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

impl Position {
    pub fn new(x_m: f64, y_m: f64, z_m: f64) -> Self {
        Self { x_m, y_m, z_m }
    }

    pub fn distance_2d(&self, other: &Position) -> f64 {
        (self.x_m - other.x_m).hypot(self.y_m - other.y_m)
    }

    pub fn distance_3d(&self, other: &Position) -> f64 {
        let dz = self.z_m - other.z_m;
        (self.distance_2d(other).powi(2) + dz * dz).sqrt()
    }
}

/// Axis-aligned rectangle spanned by the TRP grid. For a rectangular grid
/// this is exactly its convex hull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hull {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Hull {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }
}

pub fn trp_hull(config: &ScenarioConfig) -> Result<Hull> {
    config.validate()?;
    let x0 = (config.hall_length_m - (config.grid_cols - 1) as f64 * config.trp_spacing_m) / 2.0;
    let y0 = (config.hall_width_m - (config.grid_rows - 1) as f64 * config.trp_spacing_m) / 2.0;
    Ok(Hull {
        x_min: x0,
        x_max: x0 + (config.grid_cols - 1) as f64 * config.trp_spacing_m,
        y_min: y0,
        y_max: y0 + (config.grid_rows - 1) as f64 * config.trp_spacing_m,
    })
}

/// TRP positions, centered in the hall, row-major from the (min x, min y) corner.
pub fn build_trp_grid(config: &ScenarioConfig) -> Result<Vec<Position>> {
    let hull = trp_hull(config)?;
    let mut trps = Vec::with_capacity(config.n_trp);
    for row in 0..config.grid_rows {
        for col in 0..config.grid_cols {
            trps.push(Position::new(
                hull.x_min + col as f64 * config.trp_spacing_m,
                hull.y_min + row as f64 * config.trp_spacing_m,
                config.trp_height_m,
            ));
        }
    }
    Ok(trps)
}

/// UE positions drawn uniformly over the TRP hull at UE antenna height.
pub fn drop_ues<R: Rng + ?Sized>(config: &ScenarioConfig, count: usize, rng: &mut R) -> Result<Vec<Position>> {
    if count == 0 {
        bail!(InvalidArgument, "UE count must be at least 1");
    }
    let hull = trp_hull(config)?;
    Ok((0..count)
        .map(|_| {
            let x = hull.x_min + rng.gen::<f64>() * (hull.x_max - hull.x_min);
            let y = hull.y_min + rng.gen::<f64>() * (hull.y_max - hull.y_min);
            Position::new(x, y, config.ue_height_m)
        })
        .collect())
}

/// Distance constant of the clutter-driven LoS probability.
pub fn los_decay_distance(config: &ScenarioConfig) -> Result<f64> {
    if let Some(k) = config.los_decay_override_m {
        return Ok(k);
    }
    let gap = config.clutter_height_m - config.ue_height_m;
    if gap <= 0.0 {
        bail!(
            Config,
            "clutter height {} m must exceed UE height {} m",
            config.clutter_height_m,
            config.ue_height_m
        );
    }
    let r = config.clutter_density;
    if !(r > 0.0 && r < 1.0) {
        bail!(Config, "clutter density must lie in (0, 1), got {}", r);
    }
    Ok(-config.clutter_size_m / (1.0 - r).ln() * (config.trp_height_m - config.ue_height_m) / gap)
}

/// `exp(-d_2d / k)` with `k` from [`los_decay_distance`].
pub fn los_probability(d_2d_m: f64, config: &ScenarioConfig) -> Result<f64> {
    if !(d_2d_m >= 0.0) {
        bail!(InvalidArgument, "horizontal distance must be nonnegative, got {}", d_2d_m);
    }
    let k = los_decay_distance(config)?;
    Ok((-d_2d_m / k).exp())
}

/// Independent Bernoulli LoS draw per (UE, TRP) link, indexed `[ue][trp]`.
pub fn classify_links<R: Rng + ?Sized>(
    ues: &[Position],
    trps: &[Position],
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<Vec<bool>>> {
    if ues.is_empty() || trps.is_empty() {
        bail!(InvalidArgument, "need at least one UE and one TRP");
    }
    let k = los_decay_distance(config)?;
    Ok(ues
        .iter()
        .map(|ue| {
            trps.iter()
                .map(|trp| {
                    let p = (-ue.distance_2d(trp) / k).exp();
                    rng.gen::<f64>() < p
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn xy(p: &[Position]) -> Vec<(f64, f64)> {
        p.iter().map(|p| (p.x_m, p.y_m)).collect()
    }

    #[test]
    fn default_grid_is_centered() {
        let trps = build_trp_grid(&ScenarioConfig::default()).unwrap();
        assert_eq!(trps.len(), 18);
        let xs = [10.0, 30.0, 50.0, 70.0, 90.0, 110.0];
        let ys = [10.0, 30.0, 50.0];
        for (i, t) in trps.iter().enumerate() {
            assert_eq!(t.x_m, xs[i % 6]);
            assert_eq!(t.y_m, ys[i / 6]);
            assert_eq!(t.z_m, 8.0);
        }
    }

    #[test]
    fn degenerate_single_trp_sits_at_hall_center() {
        let cfg = ScenarioConfig {
            n_trp: 1,
            grid_rows: 1,
            grid_cols: 1,
            trp_spacing_m: 0.0,
            ..ScenarioConfig::default()
        };
        let trps = build_trp_grid(&cfg).unwrap();
        assert_eq!(trps, vec![Position::new(60.0, 30.0, 8.0)]);
    }

    #[test]
    fn two_by_two_grid() {
        let cfg = ScenarioConfig {
            n_trp: 4,
            grid_rows: 2,
            grid_cols: 2,
            hall_length_m: 40.0,
            hall_width_m: 40.0,
            ..ScenarioConfig::default()
        };
        let trps = build_trp_grid(&cfg).unwrap();
        assert_eq!(xy(&trps), vec![(10.0, 10.0), (30.0, 10.0), (10.0, 30.0), (30.0, 30.0)]);
        assert!(trps.iter().all(|t| t.z_m == cfg.trp_height_m));
    }

    #[test]
    fn oversized_grid_is_rejected() {
        let cfg = ScenarioConfig {
            trp_spacing_m: 30.0,
            ..ScenarioConfig::default()
        };
        assert!(build_trp_grid(&cfg).is_err());
        let cfg = ScenarioConfig {
            n_trp: 17,
            ..ScenarioConfig::default()
        };
        assert!(build_trp_grid(&cfg).is_err());
    }

    #[test]
    fn adjacent_trps_are_spacing_apart() {
        let cfg = ScenarioConfig::default();
        let trps = build_trp_grid(&cfg).unwrap();
        for r in 0..cfg.grid_rows {
            for c in 0..cfg.grid_cols - 1 {
                let a = &trps[r * cfg.grid_cols + c];
                let b = &trps[r * cfg.grid_cols + c + 1];
                assert!((a.distance_3d(b) - cfg.trp_spacing_m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ue_drops_stay_in_hull_and_center_out() {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ues = drop_ues(&cfg, 10_000, &mut rng).unwrap();
        for u in &ues {
            assert!((10.0..=110.0).contains(&u.x_m));
            assert!((10.0..=50.0).contains(&u.y_m));
            assert_eq!(u.z_m, 1.5);
        }
        let mx = ues.iter().map(|u| u.x_m).sum::<f64>() / ues.len() as f64;
        let my = ues.iter().map(|u| u.y_m).sum::<f64>() / ues.len() as f64;
        assert!((mx - 60.0).abs() / 60.0 < 0.01, "mean x {mx}");
        assert!((my - 30.0).abs() / 30.0 < 0.01, "mean y {my}");
    }

    #[test]
    fn ue_drops_are_deterministic() {
        let cfg = ScenarioConfig::default();
        let a = drop_ues(&cfg, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = drop_ues(&cfg, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(drop_ues(&cfg, 0, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn los_probability_closed_form() {
        let cfg = ScenarioConfig::default();
        assert_eq!(los_probability(0.0, &cfg).unwrap(), 1.0);
        let k = los_decay_distance(&cfg).unwrap();
        let expected_k = (-2.0 / 0.4f64.ln()) * (6.5 / 4.5);
        assert!((k - expected_k).abs() < 1e-12);
        assert!((k - 3.1528).abs() < 1e-3);
        let p = los_probability(k, &cfg).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
        assert!(los_probability(100.0, &cfg).unwrap() < 1e-13);
        assert!(los_probability(-1.0, &cfg).is_err());
    }

    #[test]
    fn los_probability_rejects_low_clutter() {
        let cfg = ScenarioConfig {
            clutter_height_m: 1.0,
            ..ScenarioConfig::default()
        };
        assert!(los_probability(1.0, &cfg).is_err());
    }

    #[test]
    fn los_override_is_honored() {
        let cfg = ScenarioConfig {
            los_decay_override_m: Some(10.0),
            ..ScenarioConfig::default()
        };
        assert!((los_probability(10.0, &cfg).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn coincident_ue_is_always_los() {
        let cfg = ScenarioConfig::default();
        let trps = build_trp_grid(&cfg).unwrap();
        let ue = Position::new(trps[0].x_m, trps[0].y_m, cfg.ue_height_m);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let flags = classify_links(&[ue], &trps[..1], &cfg, &mut rng).unwrap();
            assert!(flags[0][0]);
        }
    }

    #[test]
    fn link_classification_matches_closed_form_rate() {
        let cfg = ScenarioConfig::default();
        let trp = Position::new(50.0, 30.0, cfg.trp_height_m);
        let d = 3.0;
        let ue = Position::new(50.0 + d, 30.0, cfg.ue_height_m);
        let ues = vec![ue; 100_000];
        let flags = classify_links(&ues, &[trp], &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let hits = flags.iter().filter(|f| f[0]).count() as f64;
        let p = los_probability(d, &cfg).unwrap();
        let n = ues.len() as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!((hits - n * p).abs() < 3.0 * sigma, "hits {hits} expected {}", n * p);

        let again = classify_links(&ues[..100], &[trp], &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(&flags[..100], &again[..]);
    }
}
