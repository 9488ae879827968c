//! Seeded gravity-model traffic between LEO satellites.

use std::path::Path;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::constellation::ConstellationSnapshot;
use crate::error::{Error, Result};
use crate::netmodel::Allocation;

/// Default synchronisation volume per managed node per slot, Mb.
pub const DEFAULT_SYNC_UNIT: f64 = 1.0;

/// Non-zero traffic between an ordered LEO pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficEntry {
    pub src: usize,
    pub dst: usize,
    pub volume: f64,
    pub flows: u32,
}

/// Traffic volume (Mb) and flow count between every ordered LEO pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficScenario {
    volume: Array2<f64>,
    flows: Array2<u32>,
    sync_unit: f64,
    entries: Vec<TrafficEntry>,
}

impl TrafficScenario {
    pub fn new(volume: Array2<f64>, flows: Array2<u32>, sync_unit: f64) -> Result<Self> {
        let n = volume.nrows();
        if volume.ncols() != n || flows.dim() != (n, n) {
            return Err(Error::Config("traffic matrices must be square and equal-sized".into()));
        }
        if !(sync_unit.is_finite() && sync_unit > 0.0) {
            return Err(Error::Config(format!("sync unit must be positive, got {sync_unit}")));
        }
        let mut entries = Vec::new();
        for ((i, j), &v) in volume.indexed_iter() {
            let f = flows[[i, j]];
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("volume ({i},{j}) = {v} is not finite and non-negative")));
            }
            if i == j && (v != 0.0 || f != 0) {
                return Err(Error::Config(format!("diagonal entry ({i},{i}) must be zero")));
            }
            if (v == 0.0) != (f == 0) {
                return Err(Error::Config(format!(
                    "entry ({i},{j}): volume {v} and flow count {f} must be zero together"
                )));
            }
            if f > 0 {
                entries.push(TrafficEntry { src: i, dst: j, volume: v, flows: f });
            }
        }
        Ok(TrafficScenario { volume, flows, sync_unit, entries })
    }

    pub fn zeros(n_leo: usize, sync_unit: f64) -> Result<Self> {
        Self::new(Array2::zeros((n_leo, n_leo)), Array2::zeros((n_leo, n_leo)), sync_unit)
    }

    pub fn num_leo(&self) -> usize {
        self.volume.nrows()
    }

    pub fn volume(&self) -> &Array2<f64> {
        &self.volume
    }

    pub fn flows(&self) -> &Array2<u32> {
        &self.flows
    }

    pub fn sync_unit(&self) -> f64 {
        self.sync_unit
    }

    /// Non-zero entries in row-major order.
    pub fn entries(&self) -> &[TrafficEntry] {
        &self.entries
    }

    pub fn total_flows(&self) -> u64 {
        self.entries.iter().map(|e| e.flows as u64).sum()
    }

    /// Writes `src,dst,volume_mb,flows` rows for every non-zero pair.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(CsvRow { src: e.src, dst: e.dst, volume_mb: e.volume, flows: e.flows })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, n_leo: usize, sync_unit: f64) -> Result<Self> {
        let mut volume = Array2::zeros((n_leo, n_leo));
        let mut flows = Array2::zeros((n_leo, n_leo));
        let mut r = csv::Reader::from_path(path)?;
        for row in r.deserialize() {
            let row: CsvRow = row?;
            if row.src >= n_leo || row.dst >= n_leo {
                return Err(Error::Config(format!(
                    "traffic row ({}, {}) outside {n_leo} LEO satellites",
                    row.src, row.dst
                )));
            }
            volume[[row.src, row.dst]] = row.volume_mb;
            flows[[row.src, row.dst]] = row.flows;
        }
        Self::new(volume, flows, sync_unit)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    src: usize,
    dst: usize,
    volume_mb: f64,
    flows: u32,
}

/// Samples `n_flows` flows with endpoints drawn proportional to `w_i * w_j`
/// (log-uniform node weights in [0.1, 10]) and exponential volumes of mean
/// `volume_scale` Mb.
pub fn generate_traffic(
    snapshot: &ConstellationSnapshot,
    n_flows: usize,
    volume_scale: f64,
    sync_unit: f64,
    seed: u64,
) -> Result<TrafficScenario> {
    let n = snapshot.num_leo();
    let mut volume = Array2::<f64>::zeros((n, n));
    let mut flows = Array2::<u32>::zeros((n, n));
    if n_flows == 0 || n < 2 {
        return TrafficScenario::new(volume, flows, sync_unit);
    }
    if !(volume_scale.is_finite() && volume_scale > 0.0) {
        return Err(Error::Config(format!("volume scale must be positive, got {volume_scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..=1.0))).collect();
    let endpoint = WeightedIndex::new(&weights).expect("weights are positive");
    let exp = Exp::new(1.0 / volume_scale).expect("rate is positive");
    for _ in 0..n_flows {
        let (src, dst) = loop {
            let a = endpoint.sample(&mut rng);
            let b = endpoint.sample(&mut rng);
            if a != b {
                break (a, b);
            }
        };
        let v: f64 = exp.sample(&mut rng);
        volume[[src, dst]] += v.max(f64::MIN_POSITIVE);
        flows[[src, dst]] += 1;
    }
    TrafficScenario::new(volume, flows, sync_unit)
}

/// Per-controller synchronisation volume `c_sync * |H_i|` and the senior's `c_sync * N_M`.
pub fn sync_traffic(allocation: &Allocation, scenario: &TrafficScenario) -> (Vec<f64>, f64) {
    let per_controller = allocation
        .domain_sizes()
        .into_iter()
        .map(|size| scenario.sync_unit * size as f64)
        .collect();
    (per_controller, scenario.sync_unit * allocation.num_controllers() as f64)
}

/// Volume matrix scaled so that its largest entry is 1.
pub fn normalize_volume(scenario: &TrafficScenario) -> Array2<f64> {
    normalize_matrix(&scenario.volume)
}

pub(crate) fn normalize_matrix(m: &Array2<f64>) -> Array2<f64> {
    let max = m.iter().cloned().fold(0.0_f64, f64::max);
    if max > 0.0 {
        m / max
    } else {
        m.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{Constellation, ShellConfig};

    fn snapshot(n_leo: usize, n_meo: usize) -> ConstellationSnapshot {
        Constellation::build(ShellConfig::leo_with_count(n_leo), ShellConfig::meo_with_count(n_meo))
            .unwrap()
            .propagate(0, 60.0)
    }

    #[test]
    fn zero_flows_gives_zero_matrices() {
        let t = generate_traffic(&snapshot(10, 2), 0, 1.0, 1.0, 7).unwrap();
        assert!(t.volume().iter().all(|&v| v == 0.0));
        assert!(t.flows().iter().all(|&f| f == 0));
        assert!(t.entries().is_empty());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let s = snapshot(30, 3);
        let a = generate_traffic(&s, 500, 2.0, 1.0, 11).unwrap();
        let b = generate_traffic(&s, 500, 2.0, 1.0, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_traffic(&s, 500, 2.0, 1.0, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn flow_count_is_conserved() {
        let t = generate_traffic(&snapshot(500, 20), 10_000, 1.0, 1.0, 3).unwrap();
        let total: u64 = t.flows().iter().map(|&f| f as u64).sum();
        assert_eq!(total, 10_000);
        assert_eq!(t.total_flows(), 10_000);
        for i in 0..500 {
            assert_eq!(t.volume()[[i, i]], 0.0);
        }
    }

    #[test]
    fn sync_traffic_linear_in_domain_size() {
        let mut controller_of = vec![0; 25];
        controller_of.extend([1; 5]);
        let alloc = Allocation::new(controller_of, 0, 20).unwrap();
        let t = TrafficScenario::zeros(30, 1.0).unwrap();
        let (per, senior) = sync_traffic(&alloc, &t);
        assert_eq!(per[0], 25.0);
        assert_eq!(per[1], 5.0);
        assert_eq!(per[2], 0.0);
        assert_eq!(senior, 20.0);
        assert_eq!(per.iter().sum::<f64>(), 30.0);
    }

    #[test]
    fn normalize_cases() {
        let z = TrafficScenario::zeros(4, 1.0).unwrap();
        assert!(normalize_volume(&z).iter().all(|&v| v == 0.0));
        let t = generate_traffic(&snapshot(12, 2), 40, 3.0, 1.0, 5).unwrap();
        let n = normalize_volume(&t);
        let max = n.iter().cloned().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(n.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(normalize_matrix(&n), n);
    }

    #[test]
    fn csv_round_trip() {
        let t = generate_traffic(&snapshot(12, 2), 40, 3.0, 1.0, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traffic.csv");
        t.write_csv(&path).unwrap();
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("src,dst,volume_mb,flows\n"));
        assert_eq!(TrafficScenario::read_csv(&path, 12, 1.0).unwrap(), t);
    }

    #[test]
    fn rejects_inconsistent_matrices() {
        let mut v = Array2::zeros((3, 3));
        v[[0, 1]] = 1.0;
        let f = Array2::zeros((3, 3));
        assert!(TrafficScenario::new(v, f, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn generated_traffic_invariants(seed in any::<u64>(), n_flows in 0usize..400, scale in 0.1f64..10.0) {
                let t = generate_traffic(&snapshot(16, 2), n_flows, scale, 1.0, seed).unwrap();
                prop_assert_eq!(t.total_flows(), n_flows as u64);
                for ((i, j), &v) in t.volume().indexed_iter() {
                    prop_assert!(v.is_finite() && v >= 0.0);
                    prop_assert_eq!(v == 0.0, t.flows()[[i, j]] == 0);
                    if i == j { prop_assert_eq!(v, 0.0); }
                }
                let n = normalize_volume(&t);
                prop_assert!(n.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}
