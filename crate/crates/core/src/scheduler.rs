//! Client selection: version-age top-k and the three energy-driven baselines.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Top-k by version age, probed each epoch.
    Vaoi,
    /// Train as soon as the battery covers one training.
    FedavgGreedy,
    /// Round-robin groups, training deferred to the last feasible slot.
    Fedbacys,
    /// FedBacys that only takes every other valid opportunity.
    FedbacysOdd,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Vaoi,
        PolicyKind::FedavgGreedy,
        PolicyKind::Fedbacys,
        PolicyKind::FedbacysOdd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Vaoi => "vaoi",
            PolicyKind::FedavgGreedy => "fedavg_greedy",
            PolicyKind::Fedbacys => "fedbacys",
            PolicyKind::FedbacysOdd => "fedbacys_odd",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown policy `{s}` (expected vaoi, fedavg_greedy, fedbacys, fedbacys_odd)"
                )
            })
    }
}

/// How the version-age policy turns ages into a participant set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// The k clients with the largest age.
    #[default]
    TopK,
    /// k clients sampled without replacement with probability proportional
    /// to age.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionDecision {
    /// Selected client ids, ascending.
    pub selected: Vec<usize>,
    /// `q[i]` is true iff `i` is selected.
    pub q: Vec<bool>,
}

impl SelectionDecision {
    pub fn from_selected(n: usize, mut selected: Vec<usize>) -> Self {
        selected.sort_unstable();
        let mut q = vec![false; n];
        for &i in &selected {
            q[i] = true;
        }
        SelectionDecision { selected, q }
    }
}

/// Orders clients for top-k: larger age first, then the one whose last
/// participation lies furthest back (never participated counts as oldest),
/// then lower id.
fn priority(ages: &[u64], last: &[Option<u64>], a: usize, b: usize) -> Ordering {
    ages[b]
        .cmp(&ages[a])
        .then_with(|| match (last[a], last[b]) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(x), Some(y)) => x.cmp(&y),
        })
        .then(a.cmp(&b))
}

/// Version-age selection of `min(k, N)` clients.
///
/// The selection probabilities `p_i = X_i / sum_j X_j` share one normalizer,
/// so ranking by `p_i` is ranking by age. When every age is zero the
/// probabilities are undefined: before anyone has participated a uniform
/// k-subset is drawn from `rng`, afterwards the staleness tie-break orders
/// the tied clients.
pub fn vaoi_select(
    ages: &[u64],
    last_participation: &[Option<u64>],
    k: usize,
    rule: SelectionRule,
    rng: &mut ChaCha8Rng,
) -> SelectionDecision {
    assert_eq!(ages.len(), last_participation.len());
    let n = ages.len();
    let k = k.min(n);
    let total: u64 = ages.iter().sum();
    let fresh = last_participation.iter().all(Option::is_none);
    if total == 0 && fresh {
        let picked = sample(rng, n, k).into_vec();
        return SelectionDecision::from_selected(n, picked);
    }
    let selected = match rule {
        SelectionRule::Proportional if total > 0 => proportional_sample(ages, k, rng),
        _ => top_k(ages, last_participation, k),
    };
    SelectionDecision::from_selected(n, selected)
}

fn top_k(ages: &[u64], last_participation: &[Option<u64>], k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..ages.len()).collect();
    ids.sort_by(|&a, &b| priority(ages, last_participation, a, b));
    ids.truncate(k);
    ids
}

/// Sequential weighted draws without replacement; once every positive-age
/// client is taken, the rest is filled uniformly from zero-age clients.
fn proportional_sample(ages: &[u64], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..ages.len()).collect();
    let mut picked = Vec::with_capacity(k);
    while picked.len() < k {
        let total: u64 = remaining.iter().map(|&i| ages[i]).sum();
        let pos = if total == 0 {
            rng.random_range(0..remaining.len())
        } else {
            let mut r = rng.random_range(0..total);
            remaining
                .iter()
                .position(|&i| {
                    if r < ages[i] {
                        true
                    } else {
                        r -= ages[i];
                        false
                    }
                })
                .expect("draw below total")
        };
        picked.push(remaining.remove(pos));
    }
    picked
}

/// What eligibility predicates may see of a client.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClientView {
    pub id: usize,
    pub idle: bool,
    pub has_pending: bool,
    pub battery: u32,
}

impl ClientView {
    /// Idle, nothing left to upload, and the battery covers one training.
    pub fn can_start(&self, kappa: u32) -> bool {
        self.idle && !self.has_pending && self.battery >= kappa
    }
}

pub fn fedavg_greedy_eligibility(client: &ClientView, kappa: u32) -> bool {
    client.can_start(kappa)
}

/// Group geometry of the FedBacys family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupSchedule {
    pub groups: u64,
    pub slots_per_epoch: u64,
    pub kappa: u64,
}

impl GroupSchedule {
    /// The only slot offset within an active epoch at which training may
    /// start: training then ends on the penultimate slot and the last slot
    /// is left for the upload. `None` if the epoch is too short.
    pub fn start_offset(&self) -> Option<u64> {
        self.slots_per_epoch.checked_sub(self.kappa + 1)
    }

    pub fn group_of(&self, client: usize) -> u64 {
        client as u64 % self.groups
    }

    pub fn is_active(&self, client: usize, epoch: u64) -> bool {
        epoch % self.groups == self.group_of(client)
    }

    /// True on the client's single launch slot of an active epoch.
    pub fn is_launch_slot(&self, client: usize, slot: u64) -> bool {
        let epoch = slot / self.slots_per_epoch;
        let offset = slot % self.slots_per_epoch;
        self.is_active(client, epoch) && Some(offset) == self.start_offset()
    }
}

pub fn fedbacys_eligibility(client: &ClientView, slot: u64, schedule: &GroupSchedule) -> bool {
    schedule.is_launch_slot(client.id, slot) && client.can_start(schedule.kappa as u32)
}

/// FedBacys criteria plus the odd-opportunity rule. Every slot that meets
/// the FedBacys criteria bumps `counter`; training proceeds only when the
/// bumped counter is odd.
pub fn fedbacys_odd_eligibility(
    client: &ClientView,
    slot: u64,
    schedule: &GroupSchedule,
    counter: &mut u64,
) -> bool {
    if !fedbacys_eligibility(client, slot, schedule) {
        return false;
    }
    *counter += 1;
    *counter % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn rng() -> ChaCha8Rng {
        stream(5, Domain::Scheduler, 0)
    }

    #[test]
    fn top_k_example() {
        let d = vaoi_select(
            &[5, 1, 3, 0],
            &[None; 4],
            2,
            SelectionRule::TopK,
            &mut rng(),
        );
        assert_eq!(d.selected, vec![0, 2]);
        assert_eq!(d.q, vec![true, false, true, false]);
    }

    #[test]
    fn zero_ages_fall_back_to_seeded_uniform() {
        let a = vaoi_select(&[0, 0, 0], &[None; 3], 2, SelectionRule::TopK, &mut rng());
        let b = vaoi_select(&[0, 0, 0], &[None; 3], 2, SelectionRule::TopK, &mut rng());
        assert_eq!(a, b);
        assert_eq!(a.selected.len(), 2);
        assert_ne!(a.selected[0], a.selected[1]);
    }

    #[test]
    fn zero_age_fallback_covers_all_subsets() {
        let mut r = rng();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..300 {
            seen.insert(vaoi_select(&[0; 4], &[None; 4], 2, SelectionRule::TopK, &mut r).selected);
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn zero_ages_after_participation_use_staleness() {
        let last = [Some(4), Some(3), None, Some(4)];
        for rule in [SelectionRule::TopK, SelectionRule::Proportional] {
            let d = vaoi_select(&[0; 4], &last, 2, rule, &mut rng());
            assert_eq!(d.selected, vec![1, 2]);
        }
    }

    #[test]
    fn ties_prefer_stalest_then_lowest_id() {
        let d = vaoi_select(
            &[4, 4, 1],
            &[Some(5), Some(2), None],
            1,
            SelectionRule::TopK,
            &mut rng(),
        );
        assert_eq!(d.selected, vec![1]);
        let d = vaoi_select(
            &[2, 2, 2],
            &[Some(3), None, None],
            2,
            SelectionRule::TopK,
            &mut rng(),
        );
        assert_eq!(d.selected, vec![1, 2]);
        let d = vaoi_select(
            &[1, 1],
            &[Some(0), Some(0)],
            1,
            SelectionRule::TopK,
            &mut rng(),
        );
        assert_eq!(d.selected, vec![0]);
    }

    #[test]
    fn k_larger_than_n_selects_everyone() {
        let d = vaoi_select(&[1, 0, 2], &[None; 3], 10, SelectionRule::TopK, &mut rng());
        assert_eq!(d.selected, vec![0, 1, 2]);
    }

    #[test]
    fn proportional_prefers_positive_ages() {
        let mut r = rng();
        for _ in 0..200 {
            let d = vaoi_select(
                &[0, 3, 0, 1],
                &[None; 4],
                2,
                SelectionRule::Proportional,
                &mut r,
            );
            assert_eq!(d.selected, vec![1, 3]);
        }
        let mut counts = [0usize; 2];
        for _ in 0..4000 {
            let d = vaoi_select(&[3, 1], &[None; 2], 1, SelectionRule::Proportional, &mut r);
            counts[d.selected[0]] += 1;
        }
        let share = counts[0] as f64 / 4000.0;
        assert!((share - 0.75).abs() < 0.03, "{share}");
    }

    fn view(id: usize, battery: u32, has_pending: bool) -> ClientView {
        ClientView {
            id,
            idle: true,
            has_pending,
            battery,
        }
    }

    #[test]
    fn greedy_rule() {
        assert!(fedavg_greedy_eligibility(&view(0, 20, false), 20));
        assert!(!fedavg_greedy_eligibility(&view(0, 20, true), 20));
        assert!(!fedavg_greedy_eligibility(&view(0, 19, false), 20));
        let busy = ClientView {
            idle: false,
            ..view(0, 25, false)
        };
        assert!(!fedavg_greedy_eligibility(&busy, 20));
    }

    #[test]
    fn fedbacys_geometry() {
        let s = GroupSchedule {
            groups: 10,
            slots_per_epoch: 30,
            kappa: 20,
        };
        assert_eq!(s.start_offset(), Some(9));
        let active: Vec<u64> = (0..30).filter(|&t| s.is_active(7, t)).collect();
        assert_eq!(active, vec![7, 17, 27]);
        let launch: Vec<u64> = (0..900).filter(|&slot| s.is_launch_slot(7, slot)).collect();
        assert_eq!(launch, vec![7 * 30 + 9, 17 * 30 + 9, 27 * 30 + 9]);
        assert!(fedbacys_eligibility(&view(7, 20, false), 219, &s));
        assert!(!fedbacys_eligibility(&view(7, 19, false), 219, &s));
        assert!(!fedbacys_eligibility(&view(7, 25, false), 220, &s));
        let short = GroupSchedule {
            slots_per_epoch: 20,
            ..s
        };
        assert_eq!(short.start_offset(), None);
    }

    #[test]
    fn odd_rule_skips_every_other_opportunity() {
        let s = GroupSchedule {
            groups: 10,
            slots_per_epoch: 30,
            kappa: 20,
        };
        let mut counter = 0;
        let trained: Vec<u64> = [7u64, 17, 27]
            .into_iter()
            .filter(|t| fedbacys_odd_eligibility(&view(7, 25, false), t * 30 + 9, &s, &mut counter))
            .collect();
        assert_eq!(trained, vec![7, 27]);
        assert_eq!(counter, 3);
        // A battery-denied opportunity does not count.
        assert!(!fedbacys_odd_eligibility(
            &view(7, 3, false),
            37 * 30 + 9,
            &s,
            &mut counter
        ));
        assert_eq!(counter, 3);
        assert!(!fedbacys_odd_eligibility(
            &view(7, 25, false),
            47 * 30 + 9,
            &s,
            &mut counter
        ));
        assert_eq!(counter, 4);
    }

    #[test]
    fn policy_names_roundtrip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.as_str().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("random".parse::<PolicyKind>().is_err());
    }
}
