use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Array geometry, OFDM numerology and slot count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub n_y: usize,
    pub n_z: usize,
    pub l_y: usize,
    pub l_z: usize,
    /// OFDM symbols per slot.
    pub m: usize,
    /// Subcarriers.
    pub q: usize,
    /// Slots, one surface configuration each.
    pub t: usize,
    pub delta_f_hz: f64,
    pub carrier_hz: f64,
    /// Sizes of the surface element groups; a single group when absent.
    pub group_sizes: Option<Vec<usize>>,
    /// Index of the group the estimators process.
    pub group: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_y: 2,
            n_z: 2,
            l_y: 2,
            l_z: 2,
            m: 4,
            q: 4,
            t: 256,
            delta_f_hz: 120e3,
            carrier_hz: 28e9,
            group_sizes: None,
            group: 0,
        }
    }
}

/// Placement of one element group inside the surface. Elements are indexed
/// `y * n_z + z`, so a group whose offset is a multiple of `n_z` covers a
/// contiguous band of `cols` columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupLayout {
    pub size: usize,
    pub offset: usize,
    pub n_z: usize,
    pub cols: usize,
    pub col_offset: usize,
}

impl SystemConfig {
    /// Number of surface elements `N_y N_z`.
    pub fn ris_elements(&self) -> usize {
        self.n_y * self.n_z
    }

    /// Number of transmit antennas `L_y L_z`.
    pub fn antennas(&self) -> usize {
        self.l_y * self.l_z
    }

    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.delta_f_hz
    }

    pub fn wavelength(&self) -> f64 {
        crate::scene::SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn groups(&self) -> Vec<usize> {
        self.group_sizes.clone().unwrap_or_else(|| vec![self.ris_elements()])
    }

    pub fn group_layout(&self, k: usize) -> GroupLayout {
        let sizes = self.groups();
        let offset: usize = sizes[..k].iter().sum();
        GroupLayout { size: sizes[k], offset, n_z: self.n_z, cols: sizes[k] / self.n_z, col_offset: offset / self.n_z }
    }

    /// Layout of the processed group.
    pub fn processed_group(&self) -> GroupLayout {
        self.group_layout(self.group)
    }

    pub fn validate(&self) -> Result<()> {
        let extents = [
            ("n_y", self.n_y),
            ("n_z", self.n_z),
            ("l_y", self.l_y),
            ("l_z", self.l_z),
            ("m", self.m),
            ("q", self.q),
            ("t", self.t),
        ];
        for (name, v) in extents {
            if v == 0 {
                return Err(Error::Config(format!("system.{name} must be at least 1")));
            }
        }
        for (name, v) in [("delta_f_hz", self.delta_f_hz), ("carrier_hz", self.carrier_hz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("system.{name} must be positive, got {v}")));
            }
        }
        let sizes = self.groups();
        if sizes.is_empty() {
            return Err(Error::Config("system.group_sizes must not be empty".into()));
        }
        if sizes.iter().sum::<usize>() != self.ris_elements() {
            return Err(Error::Config(format!(
                "system.group_sizes {sizes:?} must sum to n_y * n_z = {}",
                self.ris_elements()
            )));
        }
        if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s % self.n_z != 0) {
            return Err(Error::Config(format!("group size {bad} is not a positive multiple of n_z = {}", self.n_z)));
        }
        if self.group >= sizes.len() {
            return Err(Error::Config(format!("system.group = {} but only {} groups exist", self.group, sizes.len())));
        }
        Ok(())
    }
}

/// Ranges for randomized scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub distance_min_m: f64,
    pub distance_max_m: f64,
    pub speed_max_mps: f64,
    pub rcs_m2: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { distance_min_m: 10.0, distance_max_m: 250.0, speed_max_mps: 25.0, rcs_m2: 2.0 }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_min_m > 0.0 && self.distance_max_m >= self.distance_min_m) {
            return Err(Error::Config(format!(
                "scene distances need 0 < min <= max, got [{}, {}]",
                self.distance_min_m, self.distance_max_m
            )));
        }
        if !(self.speed_max_mps >= 0.0 && self.rcs_m2 > 0.0) {
            return Err(Error::Config("scene.speed_max_mps >= 0 and scene.rcs_m2 > 0 required".into()));
        }
        Ok(())
    }
}
