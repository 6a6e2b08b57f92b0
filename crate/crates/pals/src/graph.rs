//! Contact networks: stochastic-block-model generation, ingestion of contact
//! event logs into per-main-patient views, and quintile binning of raw
//! feature columns.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a node's own outcome is modeled (main) or the node participates
/// only as a potential spreader in someone else's neighborhood (auxiliary).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRole {
    Main,
    Auxiliary,
}

/// An undirected contact network with per-node binary features.
///
/// Edges are stored as adjacency lists (the real networks have median
/// degrees of 2 and 12, so dense storage would be wasteful). Neighbor lists
/// are kept sorted and deduplicated; networks are immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactNetwork {
    pub ids: Vec<String>,
    /// Per-node feature vector; entries are 0.0/1.0. May be empty until a
    /// generator fills it in.
    pub features: Vec<Vec<f64>>,
    pub neighbors: Vec<Vec<usize>>,
    /// Latest qualifying contact day per adjacency entry, aligned with
    /// `neighbors`. `None` for generated networks with no temporal data.
    pub contact_days: Option<Vec<Vec<i64>>>,
    pub roles: Vec<NodeRole>,
}

impl ContactNetwork {
    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    pub fn is_main(&self, i: usize) -> bool {
        self.roles[i] == NodeRole::Main
    }

    /// Node indices of the main cohort, ascending.
    pub fn main_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.is_main(i)).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.iter().map(|f| f.len()).max().unwrap_or(0)
    }

    /// Structural invariants: no self-loops, no duplicate neighbors,
    /// symmetry among main nodes, and no auxiliary node inside another
    /// auxiliary node's neighbor list.
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        if self.ids.len() != n || self.features.len() != n || self.neighbors.len() != n {
            return Err(Error::Config("network field lengths disagree".into()));
        }
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &j in nbrs {
                if j == i {
                    return Err(Error::Config(format!("self-loop at node {i}")));
                }
                if j >= n {
                    return Err(Error::Config(format!("neighbor {j} out of range")));
                }
                if prev == Some(j) {
                    return Err(Error::Config(format!("duplicate edge {i}-{j}")));
                }
                if prev.is_some_and(|p| p > j) {
                    return Err(Error::Config(format!("unsorted neighbors at node {i}")));
                }
                prev = Some(j);
                if !self.is_main(i) && !self.is_main(j) {
                    return Err(Error::Config(format!(
                        "auxiliary-auxiliary edge {i}-{j}"
                    )));
                }
                if self.is_main(i) && self.is_main(j) && !self.neighbors[j].contains(&i) {
                    return Err(Error::Config(format!(
                        "asymmetric main-main edge {i}-{j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Stochastic block model parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbmConfig {
    pub nodes_per_block: Vec<usize>,
    pub p_within: f64,
    pub p_between: f64,
    pub seed: u64,
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_block.is_empty() {
            return Err(Error::Config("need at least one block".into()));
        }
        let total: usize = self.nodes_per_block.iter().sum();
        if total < 2 {
            return Err(Error::Config("need at least two nodes".into()));
        }
        for &p in [self.p_within, self.p_between].iter() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("edge probability {p} outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// Sample a stochastic block model network. All nodes are main; features are
/// left empty for a downstream generator to fill.
pub fn generate_sbm(config: &SbmConfig) -> Result<ContactNetwork> {
    config.validate()?;
    let n: usize = config.nodes_per_block.iter().sum();
    let mut block = vec![0usize; n];
    let mut next = 0usize;
    for (b, &size) in config.nodes_per_block.iter().enumerate() {
        for _ in 0..size {
            block[next] = b;
            next += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block[i] == block[j] {
                config.p_within
            } else {
                config.p_between
            };
            if rng.gen::<f64>() < p {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    Ok(ContactNetwork {
        ids: (0..n).map(|i| i.to_string()).collect(),
        features: vec![Vec::new(); n],
        neighbors,
        contact_days: None,
        roles: vec![NodeRole::Main; n],
    })
}

/// One row of a contact log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub main_id: String,
    pub neighbor_id: String,
    /// Integer date ordinal.
    pub day: i64,
    pub channel: ContactChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactChannel {
    Room,
    Nurse,
}

impl ContactChannel {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "room" => Ok(ContactChannel::Room),
            "nurse" => Ok(ContactChannel::Nurse),
            other => Err(Error::Config(format!("unknown channel '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ContactChannel::Room => "room",
            ContactChannel::Nurse => "nurse",
        }
    }
}

/// Build a per-main-patient contact network from an event log.
///
/// Each main node's neighbors are the distinct ids it shared the channel
/// with on any day up to that main's cutoff; later events are dropped so no
/// information from after the prediction date leaks in. The latest
/// qualifying day is kept per edge for the neighbor-view feature snapshot.
/// Neighbor ids outside the cutoff map become auxiliary nodes; events whose
/// main id has no cutoff entry are ignored.
pub fn build_network_from_contacts(
    events: &[ContactEvent],
    channel: ContactChannel,
    cutoff_per_main: &BTreeMap<String, i64>,
) -> Result<ContactNetwork> {
    // Mains first (sorted by id via the BTreeMap), then auxiliaries sorted.
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut ids: Vec<String> = Vec::new();
    for id in cutoff_per_main.keys() {
        index.insert(id.as_str(), ids.len());
        ids.push(id.clone());
    }
    let main_count = ids.len();
    let mut aux_ids: Vec<&str> = events
        .iter()
        .filter(|e| e.channel == channel)
        .filter(|e| {
            cutoff_per_main
                .get(&e.main_id)
                .is_some_and(|&cutoff| e.day <= cutoff)
        })
        .map(|e| e.neighbor_id.as_str())
        .filter(|id| !cutoff_per_main.contains_key(*id))
        .collect();
    aux_ids.sort_unstable();
    aux_ids.dedup();
    for id in aux_ids {
        index.insert(id, ids.len());
        ids.push(id.to_string());
    }

    let n = ids.len();
    // (main, neighbor) -> latest qualifying day.
    let mut latest: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for e in events {
        if e.channel != channel {
            continue;
        }
        if e.main_id == e.neighbor_id {
            return Err(Error::Config(format!(
                "contact event with main_id == neighbor_id '{}'",
                e.main_id
            )));
        }
        let Some(&cutoff) = cutoff_per_main.get(&e.main_id) else {
            continue;
        };
        if e.day > cutoff {
            continue;
        }
        let i = index[e.main_id.as_str()];
        let j = index[e.neighbor_id.as_str()];
        latest
            .entry((i, j))
            .and_modify(|d| *d = (*d).max(e.day))
            .or_insert(e.day);
    }

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut days: Vec<Vec<i64>> = vec![Vec::new(); n];
    for (&(i, j), &day) in &latest {
        neighbors[i].push(j);
        days[i].push(day);
        // Auxiliary nodes get the reverse adjacency so their contact sets
        // are known (the neighbor-rate proxy needs them); main reverse
        // edges come only from that main's own qualifying events.
        if j >= main_count {
            neighbors[j].push(i);
            days[j].push(day);
        }
    }
    for i in 0..n {
        let mut order: Vec<usize> = (0..neighbors[i].len()).collect();
        order.sort_by_key(|&k| neighbors[i][k]);
        neighbors[i] = order.iter().map(|&k| neighbors[i][k]).collect();
        days[i] = order.iter().map(|&k| days[i][k]).collect();
    }

    let roles = (0..n)
        .map(|i| {
            if i < main_count {
                NodeRole::Main
            } else {
                NodeRole::Auxiliary
            }
        })
        .collect();
    Ok(ContactNetwork {
        ids,
        features: vec![Vec::new(); n],
        neighbors,
        contact_days: Some(days),
        roles,
    })
}

/// Bin one raw column into five one-hot indicator columns.
///
/// Quintile boundaries come from the training rows only; ties at a boundary
/// fall to the lower bin, and out-of-range test values clamp to the extreme
/// bins. Returns one `[f64; 5]` one-hot per node.
pub fn quintile_bin(
    raw: &[f64],
    training_mask: &[bool],
    column: &str,
) -> Result<Vec<[f64; 5]>> {
    if raw.len() != training_mask.len() {
        return Err(Error::Config("raw and training_mask lengths differ".into()));
    }
    let mut train: Vec<f64> = raw
        .iter()
        .zip(training_mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    train.sort_by(|a, b| a.partial_cmp(b).expect("non-finite feature value"));
    let mut distinct = train.clone();
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(Error::Binning {
            column: column.to_string(),
            message: format!(
                "need at least 5 distinct training values, found {}",
                distinct.len()
            ),
        });
    }
    let boundaries: Vec<f64> = [0.2, 0.4, 0.6, 0.8]
        .iter()
        .map(|&p| quantile_sorted(&train, p))
        .collect();
    Ok(raw
        .iter()
        .map(|&v| {
            let bin = boundaries.iter().take_while(|&&b| v > b).count();
            let mut one_hot = [0.0; 5];
            one_hot[bin] = 1.0;
            one_hot
        })
        .collect())
}

/// Linear-interpolation quantile of an already-sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sbm(blocks: Vec<usize>, p_within: f64, p_between: f64, seed: u64) -> SbmConfig {
        SbmConfig {
            nodes_per_block: blocks,
            p_within,
            p_between,
            seed,
        }
    }

    #[test]
    fn complete_blocks_empty_cut() {
        let net = generate_sbm(&sbm(vec![3, 3], 1.0, 0.0, 5)).unwrap();
        for i in 0..6 {
            assert_eq!(net.neighbors[i].len(), 2, "node {i}");
        }
        net.validate().unwrap();
    }

    #[test]
    fn zero_probabilities_no_edges() {
        let net = generate_sbm(&sbm(vec![4, 4], 0.0, 0.0, 1)).unwrap();
        assert!(net.neighbors.iter().all(|n| n.is_empty()));
    }

    #[test]
    fn identical_seed_identical_network() {
        let a = generate_sbm(&sbm(vec![20, 20], 0.3, 0.05, 99)).unwrap();
        let b = generate_sbm(&sbm(vec![20, 20], 0.3, 0.05, 99)).unwrap();
        assert_eq!(a, b);
        let c = generate_sbm(&sbm(vec![20, 20], 0.3, 0.05, 100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn within_block_degree_matches_binomial_moments() {
        // Total within-block edge count is Binomial(2*C(250,2), 0.5), so the
        // per-network mean within-degree is 2E/500 with mean 124.5 and
        // variance 4*Var(E)/500^2; averaged over 30 seeds the 3-sigma band
        // is +/- 0.273.
        let mut total = 0.0;
        let runs = 30;
        for seed in 0..runs {
            let net = generate_sbm(&sbm(vec![250, 250], 0.5, 0.01, seed)).unwrap();
            let block = |i: usize| i / 250;
            let within: usize = (0..500)
                .map(|i| {
                    net.neighbors[i]
                        .iter()
                        .filter(|&&j| block(j) == block(i))
                        .count()
                })
                .sum();
            total += within as f64 / 500.0;
        }
        let mean = total / runs as f64;
        let pairs_per_net = 2.0 * (250.0 * 249.0 / 2.0);
        let var_edges = pairs_per_net * 0.25;
        let sigma = (4.0 * var_edges / (500.0_f64 * 500.0) / runs as f64).sqrt();
        assert!(
            (mean - 124.5).abs() <= 3.0 * sigma,
            "mean {mean}, band {}",
            3.0 * sigma
        );
    }

    fn ev(main: &str, nbr: &str, day: i64, channel: ContactChannel) -> ContactEvent {
        ContactEvent {
            main_id: main.into(),
            neighbor_id: nbr.into(),
            day,
            channel,
        }
    }

    #[test]
    fn single_event_within_cutoff() {
        let cutoffs = BTreeMap::from([("A".to_string(), 5)]);
        let net = build_network_from_contacts(
            &[ev("A", "B", 3, ContactChannel::Room)],
            ContactChannel::Room,
            &cutoffs,
        )
        .unwrap();
        assert_eq!(net.ids, vec!["A", "B"]);
        assert_eq!(net.roles[1], NodeRole::Auxiliary);
        assert_eq!(net.neighbors[0], vec![1]);
        assert_eq!(net.neighbors[1], vec![0]);
    }

    #[test]
    fn event_after_cutoff_is_dropped() {
        let cutoffs = BTreeMap::from([("A".to_string(), 2)]);
        let net = build_network_from_contacts(
            &[ev("A", "B", 3, ContactChannel::Room)],
            ContactChannel::Room,
            &cutoffs,
        )
        .unwrap();
        assert!(net.neighbors[0].is_empty());
        // B never qualified, so it is not even a node.
        assert_eq!(net.ids, vec!["A"]);
    }

    #[test]
    fn duplicate_events_keep_latest_day() {
        let cutoffs = BTreeMap::from([("A".to_string(), 5)]);
        let net = build_network_from_contacts(
            &[
                ev("A", "B", 3, ContactChannel::Room),
                ev("A", "B", 4, ContactChannel::Room),
            ],
            ContactChannel::Room,
            &cutoffs,
        )
        .unwrap();
        assert_eq!(net.neighbors[0], vec![1]);
        assert_eq!(net.contact_days.as_ref().unwrap()[0], vec![4]);
    }

    #[test]
    fn channel_filter_and_unknown_mains() {
        let cutoffs = BTreeMap::from([("A".to_string(), 9)]);
        let net = build_network_from_contacts(
            &[
                ev("A", "B", 1, ContactChannel::Nurse),
                ev("X", "B", 1, ContactChannel::Room),
            ],
            ContactChannel::Room,
            &cutoffs,
        )
        .unwrap();
        assert!(net.neighbors[0].is_empty());
        assert_eq!(net.ids.len(), 1);
    }

    #[test]
    fn no_edge_day_exceeds_cutoff() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mains: Vec<String> = (0..6).map(|i| format!("m{i}")).collect();
        let cutoffs: BTreeMap<String, i64> = mains
            .iter()
            .map(|m| (m.clone(), rng.gen_range(0..10)))
            .collect();
        let mut events = Vec::new();
        for _ in 0..200 {
            let m = mains[rng.gen_range(0..mains.len())].clone();
            let other = format!("p{}", rng.gen_range(0..8));
            if m == other {
                continue;
            }
            events.push(ev(&m, &other, rng.gen_range(0..15), ContactChannel::Room));
        }
        let net =
            build_network_from_contacts(&events, ContactChannel::Room, &cutoffs).unwrap();
        let days = net.contact_days.as_ref().unwrap();
        for (i, id) in net.ids.iter().enumerate() {
            if let Some(&cutoff) = cutoffs.get(id) {
                for &d in &days[i] {
                    assert!(d <= cutoff);
                }
            }
        }
    }

    #[test]
    fn quintile_bins_uniform_training_values() {
        let raw: Vec<f64> = (1..=100).map(f64::from).collect();
        let mask = vec![true; 100];
        let bins = quintile_bin(&raw, &mask, "col").unwrap();
        // 50 sits in the third quintile of 1..100.
        assert_eq!(bins[49], [0.0, 0.0, 1.0, 0.0, 0.0]);
        for b in &bins {
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn below_training_range_clamps_to_first_bin() {
        let mut raw: Vec<f64> = (1..=50).map(f64::from).collect();
        raw.push(-100.0);
        let mut mask = vec![true; 50];
        mask.push(false);
        let bins = quintile_bin(&raw, &mask, "col").unwrap();
        assert_eq!(bins[50], [1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn boundary_tie_goes_to_lower_bin() {
        let raw: Vec<f64> = (1..=10).map(f64::from).collect();
        let mask = vec![true; 10];
        // Interpolated boundaries for 1..10 are 2.8, 4.6, 6.4, 8.2.
        let mut sorted = raw.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [2.8, 4.6, 6.4, 8.2];
        for (p, want) in [0.2, 0.4, 0.6, 0.8].iter().zip(expect) {
            assert!((quantile_sorted(&sorted, *p) - want).abs() < 1e-12);
        }
        let probe = quintile_bin(&[4.6, 4.6000001], &[true, false], "probe");
        assert!(probe.is_err()); // fewer than 5 distinct training values
        let bins = quintile_bin(&raw, &mask, "col").unwrap();
        // Value 4.6 would be a boundary; the nearest actual value 5.0 is
        // above it, 4.0 below. Check the tie explicitly through a test row.
        let mut raw2 = raw.clone();
        raw2.push(4.6);
        let mut mask2 = mask.clone();
        mask2.push(false);
        let bins2 = quintile_bin(&raw2, &mask2, "col").unwrap();
        assert_eq!(bins2[10], [0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(bins[3], [0.0, 1.0, 0.0, 0.0, 0.0]); // 4.0
        assert_eq!(bins[4], [0.0, 0.0, 1.0, 0.0, 0.0]); // 5.0
    }

    #[test]
    fn too_few_distinct_values_names_the_column() {
        let raw = vec![1.0, 1.0, 2.0, 2.0, 3.0];
        let mask = vec![true; 5];
        match quintile_bin(&raw, &mask, "age") {
            Err(Error::Binning { column, .. }) => assert_eq!(column, "age"),
            other => panic!("expected binning error, got {other:?}"),
        }
    }
}
