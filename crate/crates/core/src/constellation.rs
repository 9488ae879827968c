//! Walker-delta LEO/MEO shells on circular Keplerian orbits.
//!
//! Positions are Earth-centred Cartesian coordinates in metres. The Earth is a
//! non-rotating sphere; only relative geometry between satellites matters for
//! provisioning, so no frame rotation or perturbations are modelled.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravitational parameter of the Earth, m³/s².
pub const MU_EARTH: f64 = 3.986004418e14;
/// Mean spherical Earth radius, metres.
pub const R_EARTH_M: f64 = 6_371_000.0;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Line-of-sight segments must stay this far above the surface.
pub const VISIBILITY_MARGIN_M: f64 = 80_000.0;

/// One Walker-delta shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellConfig {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub num_planes: usize,
    pub sats_per_plane: usize,
    /// Inter-plane phasing as a fraction of the in-plane spacing, in `[0, 1)`.
    #[serde(default)]
    pub phase_offset: f64,
}

impl ShellConfig {
    /// 550 km, 53° shell with `count` satellites split into roughly square planes.
    pub fn leo_with_count(count: usize) -> Self {
        let planes = (1..=count)
            .take_while(|p| p * p <= count)
            .filter(|p| count % p == 0)
            .last()
            .unwrap_or(1);
        ShellConfig {
            altitude_km: 550.0,
            inclination_deg: 53.0,
            num_planes: planes,
            sats_per_plane: count / planes.max(1),
            phase_offset: 0.5,
        }
    }

    /// 8000 km, 55° shell with `count` satellites on 2–4 planes where `count` allows it.
    pub fn meo_with_count(count: usize) -> Self {
        let planes = (2..=4).rev().find(|p| count % p == 0 && count >= *p).unwrap_or(1);
        ShellConfig {
            altitude_km: 8000.0,
            inclination_deg: 55.0,
            num_planes: planes,
            sats_per_plane: count / planes.max(1),
            phase_offset: 0.5,
        }
    }

    pub fn count(&self) -> usize {
        self.num_planes * self.sats_per_plane
    }

    pub fn radius_m(&self) -> f64 {
        R_EARTH_M + self.altitude_km * 1000.0
    }

    /// Mean motion sqrt(μ/a³) in rad/s.
    pub fn angular_rate(&self) -> f64 {
        angular_rate(self.radius_m())
    }

    pub fn period_s(&self) -> f64 {
        2.0 * PI / self.angular_rate()
    }

    pub fn validate(&self, shell: &str) -> Result<()> {
        if self.count() == 0 {
            return Err(Error::Config(format!("{shell} shell has zero satellites")));
        }
        if !(self.altitude_km.is_finite() && self.altitude_km > 0.0) {
            return Err(Error::Config(format!(
                "{shell} altitude must be positive, got {}",
                self.altitude_km
            )));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(Error::Config(format!(
                "{shell} inclination {} outside [0, 180]",
                self.inclination_deg
            )));
        }
        if !(0.0..1.0).contains(&self.phase_offset) {
            return Err(Error::Config(format!(
                "{shell} phase offset {} outside [0, 1)",
                self.phase_offset
            )));
        }
        Ok(())
    }
}

/// Circular-orbit mean motion for orbital radius `a` in metres.
pub fn angular_rate(a: f64) -> f64 {
    (MU_EARTH / (a * a * a)).sqrt()
}

/// Satellite handle. LEO and MEO index spaces are disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SatelliteId {
    Leo(usize),
    Meo(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Orbit {
    radius: f64,
    raan: f64,
    inclination: f64,
    anomaly0: f64,
    rate: f64,
}

impl Orbit {
    fn position(&self, elapsed_s: f64) -> [f64; 3] {
        let u = self.anomaly0 + self.rate * elapsed_s;
        let (su, cu) = u.sin_cos();
        let (so, co) = self.raan.sin_cos();
        let (si, ci) = self.inclination.sin_cos();
        [
            self.radius * (co * cu - so * su * ci),
            self.radius * (so * cu + co * su * ci),
            self.radius * (su * si),
        ]
    }
}

fn shell_orbits(shell: &ShellConfig) -> Vec<Orbit> {
    let radius = shell.radius_m();
    let rate = angular_rate(radius);
    let inclination = shell.inclination_deg.to_radians();
    let spacing = 2.0 * PI / shell.sats_per_plane as f64;
    let mut orbits = Vec::with_capacity(shell.count());
    for p in 0..shell.num_planes {
        let raan = 2.0 * PI * p as f64 / shell.num_planes as f64;
        for s in 0..shell.sats_per_plane {
            let anomaly0 = spacing * s as f64 + shell.phase_offset * spacing * p as f64;
            orbits.push(Orbit {
                radius,
                raan,
                inclination,
                anomaly0,
                rate,
            });
        }
    }
    orbits
}

/// Satellite roster: one LEO data-plane shell and one MEO controller shell.
#[derive(Debug, Clone)]
pub struct Constellation {
    leo_shell: ShellConfig,
    meo_shell: ShellConfig,
    leo: Vec<Orbit>,
    meo: Vec<Orbit>,
}

impl Constellation {
    pub fn build(leo: ShellConfig, meo: ShellConfig) -> Result<Self> {
        leo.validate("LEO")?;
        meo.validate("MEO")?;
        Ok(Constellation {
            leo_shell: leo,
            meo_shell: meo,
            leo: shell_orbits(&leo),
            meo: shell_orbits(&meo),
        })
    }

    pub fn leo_shell(&self) -> &ShellConfig {
        &self.leo_shell
    }

    pub fn meo_shell(&self) -> &ShellConfig {
        &self.meo_shell
    }

    pub fn num_leo(&self) -> usize {
        self.leo.len()
    }

    pub fn num_meo(&self) -> usize {
        self.meo.len()
    }

    /// Geometry at slot `t`, i.e. `t * slot_duration_s` seconds after epoch.
    pub fn propagate(&self, slot: u64, slot_duration_s: f64) -> ConstellationSnapshot {
        let elapsed = slot as f64 * slot_duration_s;
        let leo = self.leo.iter().map(|o| o.position(elapsed)).collect();
        let meo = self.meo.iter().map(|o| o.position(elapsed)).collect();
        ConstellationSnapshot::from_positions(slot, slot_duration_s, leo, meo)
    }
}

/// Immutable geometry of every satellite during one slot.
#[derive(Debug, Clone, Serialize)]
pub struct ConstellationSnapshot {
    slot: u64,
    slot_duration_s: f64,
    leo: Vec<[f64; 3]>,
    meo: Vec<[f64; 3]>,
    #[serde(skip)]
    visibility: Vec<bool>,
}

impl ConstellationSnapshot {
    /// Snapshot over arbitrary positions. Visibility is derived from the positions.
    pub fn from_positions(
        slot: u64,
        slot_duration_s: f64,
        leo: Vec<[f64; 3]>,
        meo: Vec<[f64; 3]>,
    ) -> Self {
        let n = leo.len() + meo.len();
        let mut snap = ConstellationSnapshot {
            slot,
            slot_duration_s,
            leo,
            meo,
            visibility: vec![false; n * n],
        };
        let limit = R_EARTH_M + VISIBILITY_MARGIN_M;
        for a in 0..n {
            for b in (a + 1)..n {
                let pa = snap.position_at(a);
                let pb = snap.position_at(b);
                let vis = segment_clears_sphere(&pa, &pb, limit);
                snap.visibility[a * n + b] = vis;
                snap.visibility[b * n + a] = vis;
            }
        }
        snap
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.slot_duration_s
    }

    pub fn num_leo(&self) -> usize {
        self.leo.len()
    }

    pub fn num_meo(&self) -> usize {
        self.meo.len()
    }

    pub fn num_satellites(&self) -> usize {
        self.leo.len() + self.meo.len()
    }

    pub fn leo_positions(&self) -> &[[f64; 3]] {
        &self.leo
    }

    pub fn meo_positions(&self) -> &[[f64; 3]] {
        &self.meo
    }

    /// Dense node index: LEOs first, then MEOs.
    pub fn node_index(&self, id: SatelliteId) -> usize {
        match id {
            SatelliteId::Leo(i) => i,
            SatelliteId::Meo(i) => self.leo.len() + i,
        }
    }

    fn position_at(&self, node: usize) -> [f64; 3] {
        if node < self.leo.len() {
            self.leo[node]
        } else {
            self.meo[node - self.leo.len()]
        }
    }

    /// # Panics
    /// If `id` is outside the roster.
    pub fn position(&self, id: SatelliteId) -> [f64; 3] {
        match id {
            SatelliteId::Leo(i) => self.leo[i],
            SatelliteId::Meo(i) => self.meo[i],
        }
    }

    /// Straight-line slant range in metres.
    pub fn distance(&self, a: SatelliteId, b: SatelliteId) -> f64 {
        euclidean(&self.position(a), &self.position(b))
    }

    pub fn is_visible(&self, a: SatelliteId, b: SatelliteId) -> bool {
        let n = self.num_satellites();
        self.visibility[self.node_index(a) * n + self.node_index(b)]
    }

    /// Visibility between dense node indices (see [`Self::node_index`]).
    pub fn is_visible_nodes(&self, a: usize, b: usize) -> bool {
        self.visibility[a * self.num_satellites() + b]
    }

    /// Visible neighbours of every dense node, in ascending order.
    pub fn visibility_lists(&self) -> Vec<Vec<usize>> {
        let n = self.num_satellites();
        (0..n)
            .map(|a| (0..n).filter(|&b| self.visibility[a * n + b]).collect())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) fn euclidean(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// True iff the closed segment `a`–`b` stays strictly outside the sphere of radius `r`.
pub fn segment_clears_sphere(a: &[f64; 3], b: &[f64; 3], r: f64) -> bool {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let t = if dd == 0.0 {
        0.0
    } else {
        (-(a[0] * d[0] + a[1] * d[1] + a[2] * d[2]) / dd).clamp(0.0, 1.0)
    };
    let p = [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]];
    p[0] * p[0] + p[1] * p[1] + p[2] * p[2] > r * r
}

/// One-way light time over `d` metres.
pub fn propagation_delay(d: f64) -> f64 {
    d / SPEED_OF_LIGHT
}
