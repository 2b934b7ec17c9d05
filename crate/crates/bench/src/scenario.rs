//! Named deployment geometries and the link budget shared by every scheme.

use irshp::channel::{generate_channels, LinkLosses};
use irshp::config::db_to_linear;
use irshp::{Channels, Error, Result, SeedStream, SystemConfig};
use serde::{Deserialize, Serialize};

/// How the two users sit relative to the surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    CoLocated,
    CoverageSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// BS to IRS k, metres.
    pub d_bs_irs: [f64; 2],
    /// `d_irs_users[k][u]`: IRS k to user u, metres.
    pub d_irs_users: [[f64; 2]; 2],
    /// Elements per surface.
    pub r: usize,
    pub placement: Placement,
}

impl Scenario {
    fn co_located(name: &str, d1: f64, d2: f64, r: usize) -> Self {
        Self {
            name: name.into(),
            d_bs_irs: [d1, d2],
            d_irs_users: [[d1; 2], [d2; 2]],
            r,
            placement: Placement::CoLocated,
        }
    }

    /// All hops 30 m, 25 elements per surface.
    pub fn first() -> Self {
        Self::co_located("first", 30.0, 30.0, 25)
    }

    /// Second surface pushed to 600 m on both hops, 50 elements per surface.
    pub fn second() -> Self {
        Self::co_located("second", 30.0, 600.0, 50)
    }

    /// All hops 30 m, 50 elements per surface.
    pub fn third() -> Self {
        Self::co_located("third", 30.0, 30.0, 50)
    }

    /// Each user 15 m from its own surface and 50 m from the other.
    pub fn coverage() -> Self {
        Self {
            name: "coverage".into(),
            d_bs_irs: [30.0, 30.0],
            d_irs_users: [[15.0, 50.0], [50.0, 15.0]],
            r: 25,
            placement: Placement::CoverageSplit,
        }
    }

    /// The geometry described by `cfg` itself (both surfaces at `d_hb`, users
    /// at `d_hi`); needs `R1 = R2`.
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        if cfg.r1 != cfg.r2 {
            return Err(Error::InvalidConfig(vec![format!(
                "scenario from config needs R1 = R2 (got {}, {})",
                cfg.r1, cfg.r2
            )]));
        }
        Ok(Self {
            name: "config".into(),
            d_bs_irs: [cfg.d_hb; 2],
            d_irs_users: [[cfg.d_hi; 2]; 2],
            r: cfg.r1,
            placement: Placement::CoLocated,
        })
    }

    pub fn presets() -> [Scenario; 4] {
        [Self::first(), Self::second(), Self::third(), Self::coverage()]
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::presets()
            .into_iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::InvalidConfig(vec![format!("unknown scenario `{name}`")]))
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .d_bs_irs
            .iter()
            .chain(self.d_irs_users.iter().flatten());
        let mut v = Vec::new();
        if all.clone().any(|d| !(d.is_finite() && *d > 0.0)) {
            v.push(format!("scenario `{}` has a non-positive distance", self.name));
        }
        if self.r == 0 {
            v.push(format!("scenario `{}` needs at least one element", self.name));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// `base` with the surface sizes of this scenario.
    pub fn apply(&self, base: &SystemConfig) -> Result<SystemConfig> {
        self.validate()?;
        SystemConfig {
            r1: self.r,
            r2: self.r,
            irs1_dims: None,
            irs2_dims: None,
            ..base.clone()
        }
        .validate()
    }

    /// Losses of this geometry relative to the reference cascade of `base`.
    pub fn losses(&self, base: &SystemConfig) -> LinkLosses {
        let pl = base.path_loss();
        let abs = LinkLosses {
            bs_irs1_db: pl.loss_db(self.d_bs_irs[0]) - base.gt_dbi,
            bs_irs2_db: pl.loss_db(self.d_bs_irs[1]) - base.gt_dbi,
            irs1_users_db: self.d_irs_users[0].map(|d| pl.loss_db(d)),
            irs2_users_db: self.d_irs_users[1].map(|d| pl.loss_db(d)),
        };
        let r = LinkLosses::from_config(base);
        abs.relative_to(r.bs_irs1_db, r.irs1_users_db[0])
    }
}

/// Converts between the normalized channel gain `‖G‖_F²` and absolute SNR.
///
/// Channels are drawn with the reference cascade loss of the base
/// configuration removed, so `P_t` is carried as the power that survives that
/// loss. The sweep axis is the SNR of the reference cascade, `P_ref / σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub pt_watts: f64,
    /// Loss of the reference BS-IRS-user cascade, dB.
    pub reference_db: f64,
}

impl LinkBudget {
    pub fn new(base: &SystemConfig) -> Self {
        let r = LinkLosses::from_config(base);
        Self {
            pt_watts: base.pt_watts(),
            reference_db: r.bs_irs1_db + r.irs1_users_db[0],
        }
    }

    /// Transmit power after the reference loss.
    pub fn received_power(&self) -> f64 {
        self.pt_watts / db_to_linear(self.reference_db)
    }

    /// Noise power that puts the reference SNR at `snr_db`.
    pub fn sigma2_for(&self, snr_db: f64) -> f64 {
        self.received_power() / db_to_linear(snr_db)
    }
}

/// Draws the channels of trial `trial` for `scenario` on top of `base`.
pub fn draw_trial(
    base: &SystemConfig,
    scenario: &Scenario,
    seeds: &SeedStream,
) -> Result<(SystemConfig, Channels)> {
    let cfg = scenario.apply(base)?;
    let ch = generate_channels(&cfg, &scenario.losses(base), seeds)?;
    Ok((cfg, ch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_scenario_is_the_reference() {
        let l = Scenario::first().losses(&SystemConfig::table1());
        assert_eq!(l, LinkLosses::uniform(0.0, 0.0));
    }

    #[test]
    fn far_surface_is_attenuated() {
        let l = Scenario::second().losses(&SystemConfig::table1());
        let hop = 20.0 * 20f64.log10();
        assert!((l.bs_irs2_db - hop).abs() < 1e-9);
        assert!((l.irs2_users_db[1] - hop).abs() < 1e-9);
        assert!(l.bs_irs1_db.abs() < 1e-9);
    }

    #[test]
    fn coverage_split_is_per_user() {
        let l = Scenario::coverage().losses(&SystemConfig::table1());
        assert!(l.irs1_users_db[0] < 0.0 && l.irs1_users_db[1] > 0.0);
        assert_eq!(l.irs1_users_db, [l.irs2_users_db[1], l.irs2_users_db[0]]);
    }

    #[test]
    fn budget_round_trip() {
        let b = LinkBudget::new(&SystemConfig::table1());
        let s2 = b.sigma2_for(10.0);
        assert!((b.received_power() / s2 - 10.0).abs() < 1e-9);
        assert!(Scenario::preset("nope").is_err());
    }
}
