use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{bail, Result};

/// Sigmas of the mixed label-noise plan, in meters.
pub const NOISE_SIGMAS_M: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 1.0];

/// Truncated-normal draw on `[-2 sigma, 2 sigma]` by rejection.
pub fn truncated_normal<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return z * sigma;
        }
    }
}

/// Adds independent truncated-normal offsets to both coordinates.
pub fn add_label_noise<R: Rng + ?Sized>(label: [f64; 2], sigma_m: f64, rng: &mut R) -> Result<[f64; 2]> {
    if !(sigma_m >= 0.0) || !sigma_m.is_finite() {
        bail!(InvalidArgument, "label noise sigma must be finite and >= 0, got {}", sigma_m);
    }
    Ok([
        label[0] + truncated_normal(sigma_m, rng),
        label[1] + truncated_normal(sigma_m, rng),
    ])
}

/// Number of samples at each TRP availability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrpPlan(pub Vec<(usize, usize)>);

/// Number of samples at each label-noise sigma.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePlan(pub Vec<(f64, usize)>);

/// Splits `total` into `parts` near-equal shares, earlier shares taking the remainder.
fn equal_shares(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

impl TrpPlan {
    pub fn full(n_trp: usize, total: usize) -> Self {
        Self(vec![(n_trp, total)])
    }

    /// 35/80 of the samples spread evenly over availabilities 4..n_trp-1, the
    /// rest with every TRP present.
    pub fn mixed(n_trp: usize, total: usize) -> Result<Self> {
        if n_trp <= 4 {
            bail!(Config, "the mixed TRP plan needs more than 4 TRPs, got {}", n_trp);
        }
        let values: Vec<usize> = (4..n_trp).collect();
        let per = total * 35 / 80 / values.len();
        let mut plan: Vec<(usize, usize)> = values.into_iter().map(|v| (v, per)).collect();
        let used: usize = plan.iter().map(|(_, c)| c).sum();
        plan.push((n_trp, total - used));
        Ok(Self(plan))
    }

    /// Equal shares over an explicit list of availabilities.
    pub fn uniform(values: &[usize], total: usize) -> Self {
        Self(values.iter().copied().zip(equal_shares(total, values.len())).collect())
    }

    /// `full`, `mixed`, or `n:count,n:count,...`.
    pub fn parse(text: &str, n_trp: usize, total: usize) -> Result<Self> {
        match text.trim() {
            "full" | "none" => Ok(Self::full(n_trp, total)),
            "mixed" | "default" | "paper" => Self::mixed(n_trp, total),
            list => {
                let mut plan = Vec::new();
                for item in list.split(',') {
                    let (n, c) = item
                        .split_once(':')
                        .ok_or_else(|| crate::Error::InvalidArgument(format!("bad TRP plan entry '{item}'")))?;
                    let n = n.trim().parse().map_err(|_| bad_number(n))?;
                    let c = c.trim().parse().map_err(|_| bad_number(c))?;
                    plan.push((n, c));
                }
                Ok(Self(plan))
            }
        }
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|(_, c)| c).sum()
    }

    pub fn validate(&self, n_trp: usize, total: usize) -> Result<()> {
        if let Some((n, _)) = self.0.iter().find(|(n, _)| *n == 0 || *n > n_trp) {
            bail!(Config, "TRP availability {} outside 1..={}", n, n_trp);
        }
        if self.total() != total {
            bail!(Config, "TRP plan covers {} samples, dataset has {}", self.total(), total);
        }
        Ok(())
    }

    /// One availability per sample, in plan order.
    pub fn expand(&self) -> Vec<usize> {
        self.0.iter().flat_map(|&(n, c)| std::iter::repeat(n).take(c)).collect()
    }
}

impl NoisePlan {
    pub fn clean(total: usize) -> Self {
        Self(vec![(0.0, total)])
    }

    /// Equal shares over [`NOISE_SIGMAS_M`].
    pub fn mixed(total: usize) -> Self {
        Self(NOISE_SIGMAS_M.iter().copied().zip(equal_shares(total, NOISE_SIGMAS_M.len())).collect())
    }

    /// `none`, `mixed`, or `sigma:count,...`.
    pub fn parse(text: &str, total: usize) -> Result<Self> {
        match text.trim() {
            "none" | "clean" => Ok(Self::clean(total)),
            "mixed" | "default" | "paper" => Ok(Self::mixed(total)),
            list => {
                let mut plan = Vec::new();
                for item in list.split(',') {
                    let (s, c) = item
                        .split_once(':')
                        .ok_or_else(|| crate::Error::InvalidArgument(format!("bad noise plan entry '{item}'")))?;
                    let s = s.trim().parse().map_err(|_| bad_number(s))?;
                    let c = c.trim().parse().map_err(|_| bad_number(c))?;
                    plan.push((s, c));
                }
                Ok(Self(plan))
            }
        }
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|(_, c)| c).sum()
    }

    pub fn validate(&self, total: usize) -> Result<()> {
        if let Some((s, _)) = self.0.iter().find(|(s, _)| !(*s >= 0.0) || !s.is_finite()) {
            bail!(Config, "label noise sigma {} must be finite and >= 0", s);
        }
        if self.total() != total {
            bail!(Config, "label noise plan covers {} samples, dataset has {}", self.total(), total);
        }
        Ok(())
    }

    pub fn expand(&self) -> Vec<f64> {
        self.0.iter().flat_map(|&(s, c)| std::iter::repeat(s).take(c)).collect()
    }
}

fn bad_number(text: &str) -> crate::Error {
    crate::Error::InvalidArgument(format!("'{}' is not a number", text.trim()))
}
