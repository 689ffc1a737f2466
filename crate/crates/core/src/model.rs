//! Shared vocabulary: states, actions, transitions and the storage-space
//! record format.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig6;

/// An observation: real-valued features plus an optional tabular index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVec {
    pub values: Vec<f64>,
    pub discrete_id: Option<usize>,
}

impl StateVec {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            discrete_id: None,
        }
    }

    pub fn with_discrete(values: Vec<f64>, id: usize) -> Self {
        Self {
            values,
            discrete_id: Some(id),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0` and comparing NaN payloads.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.discrete_id == other.discrete_id
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainRole {
    Physical,
    Identical,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainId {
    pub id: u16,
    pub role: DomainRole,
}

impl DomainId {
    pub const PHYSICAL: DomainId = DomainId {
        id: 0,
        role: DomainRole::Physical,
    };
    pub const IDENTICAL: DomainId = DomainId {
        id: 1,
        role: DomainRole::Identical,
    };
    /// Marker for transitions produced by averaging several divergent domains.
    pub const AGGREGATE: DomainId = DomainId {
        id: u16::MAX,
        role: DomainRole::Divergent,
    };

    /// The `index`-th divergent domain; ids start right after the identical domain.
    pub fn divergent(index: usize) -> Self {
        let id = u16::try_from(index + 2)
            .ok()
            .filter(|&id| id < u16::MAX)
            .expect("divergent domain index out of range");
        DomainId {
            id,
            role: DomainRole::Divergent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    Physical,
    TwinFanout,
    TwinRollout,
}

impl TransitionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransitionKind::Physical => "PHYSICAL",
            TransitionKind::TwinFanout => "TWIN_FANOUT",
            TransitionKind::TwinRollout => "TWIN_ROLLOUT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: StateVec,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateVec,
    pub terminal: bool,
    pub domain: DomainId,
    pub kind: TransitionKind,
}

impl Transition {
    pub fn physical(
        state: StateVec,
        action: ActionId,
        reward: f64,
        next_state: StateVec,
        terminal: bool,
    ) -> Result<Self> {
        let t = Transition {
            state,
            action,
            reward,
            next_state,
            terminal,
            domain: DomainId::PHYSICAL,
            kind: TransitionKind::Physical,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.reward.is_finite() {
            return Err(Error::Numeric(format!("non-finite reward {}", self.reward)));
        }
        let physical_kind = self.kind == TransitionKind::Physical;
        let physical_domain = self.domain == DomainId::PHYSICAL;
        if physical_kind != physical_domain {
            return Err(Error::InvalidState(format!(
                "kind {} recorded in domain {}",
                self.kind.as_str(),
                self.domain.id
            )));
        }
        Ok(())
    }

    /// Equal in every field bit-for-bit, ignoring the domain and kind tags.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.state.bit_eq(&other.state)
            && self.action == other.action
            && self.reward.to_bits() == other.reward.to_bits()
            && self.next_state.bit_eq(&other.next_state)
            && self.terminal == other.terminal
    }
}

/// Map `state.values[0]` into one of `bins` equal-width cells over `[low, high]`.
pub fn encode_discrete(state: &StateVec, bins: usize, low: f64, high: f64) -> Result<usize> {
    if bins == 0 || !(low < high) {
        return Err(Error::Config(format!(
            "encode_discrete needs bins >= 1 and low < high (bins={bins}, low={low}, high={high})"
        )));
    }
    let x = *state
        .values
        .first()
        .ok_or_else(|| Error::InvalidState("empty state vector".into()))?;
    if !x.is_finite() {
        return Err(Error::InvalidState(format!("non-finite feature {x}")));
    }
    let frac = (x.clamp(low, high) - low) / (high - low);
    let bin = (bins as f64 * frac).floor() as usize;
    Ok(bin.min(bins - 1))
}

/// Order-independent mean: sorts before summing so any permutation of the
/// inputs yields the same bits.
fn exact_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Average a group of transitions that tried the same action from the same
/// state in several divergent domains.
pub fn transition_average(group: &[Transition]) -> Result<Transition> {
    let first = group.first().ok_or(Error::EmptyGroup)?;
    let dim = first.next_state.dim();
    for t in &group[1..] {
        if !t.state.bit_eq(&first.state) || t.action != first.action {
            return Err(Error::HeterogeneousGroup(
                "members differ in (state, action)".into(),
            ));
        }
        if t.kind != first.kind || t.terminal != first.terminal {
            return Err(Error::HeterogeneousGroup(
                "members differ in kind or terminal flag".into(),
            ));
        }
        if t.next_state.dim() != dim {
            return Err(Error::HeterogeneousGroup(format!(
                "next_state lengths {} and {dim}",
                t.next_state.dim()
            )));
        }
    }
    let mut rewards: Vec<f64> = group.iter().map(|t| t.reward).collect();
    let mut column = vec![0.0; group.len()];
    let values = (0..dim)
        .map(|j| {
            for (slot, t) in column.iter_mut().zip(group) {
                *slot = t.next_state.values[j];
            }
            exact_mean(&mut column)
        })
        .collect();
    let discrete_id = first.next_state.discrete_id.filter(|&id| {
        group
            .iter()
            .all(|t| t.next_state.discrete_id == Some(id))
    });
    Ok(Transition {
        state: first.state.clone(),
        action: first.action,
        reward: exact_mean(&mut rewards),
        next_state: StateVec {
            values,
            discrete_id,
        },
        terminal: first.terminal,
        domain: DomainId::AGGREGATE,
        kind: first.kind,
    })
}

/// Write a transition dump: header row, then one comma-separated record per line.
pub fn write_transition_log<W: Write>(out: &mut W, transitions: &[Transition]) -> std::io::Result<()> {
    let dim = transitions.first().map_or(0, |t| t.state.dim());
    let mut header = vec!["kind".to_string(), "domain".to_string()];
    header.extend((0..dim).map(|i| format!("state_{i}")));
    header.push("action".into());
    header.push("reward".into());
    header.extend((0..dim).map(|i| format!("next_state_{i}")));
    header.push("terminal".into());
    writeln!(out, "{}", header.join(","))?;
    for t in transitions {
        let mut row = vec![t.kind.as_str().to_string(), t.domain.id.to_string()];
        row.extend(t.state.values.iter().map(|&v| sig6(v)));
        row.push(t.action.to_string());
        row.push(sig6(t.reward));
        row.extend(t.next_state.values.iter().map(|&v| sig6(v)));
        row.push(u8::from(t.terminal).to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn sv(x: f64) -> StateVec {
        StateVec::new(vec![x])
    }

    fn fanout(reward: f64, next: Vec<f64>) -> Transition {
        Transition {
            state: StateVec::new(vec![0.0, 0.0]),
            action: ActionId(1),
            reward,
            next_state: StateVec::new(next),
            terminal: false,
            domain: DomainId::divergent(0),
            kind: TransitionKind::TwinFanout,
        }
    }

    #[test]
    fn encode_boundaries() {
        assert_eq!(encode_discrete(&sv(0.0), 100, 0.0, 2000.0).unwrap(), 0);
        assert_eq!(encode_discrete(&sv(2000.0), 100, 0.0, 2000.0).unwrap(), 99);
        assert_eq!(encode_discrete(&sv(999.0), 100, 0.0, 2000.0).unwrap(), 49);
        assert_eq!(encode_discrete(&sv(-5.0), 100, 0.0, 2000.0).unwrap(), 0);
        assert_eq!(encode_discrete(&sv(1e9), 100, 0.0, 2000.0).unwrap(), 99);
        assert_eq!(encode_discrete(&sv(3.0), 1, 0.0, 2000.0).unwrap(), 0);
    }

    #[test]
    fn encode_rejects_non_finite() {
        let err = encode_discrete(&sv(f64::NAN), 10, 0.0, 1.0).unwrap_err();
        assert_eq!(err.code(), "INVALID_STATE");
        assert!(encode_discrete(&sv(f64::INFINITY), 10, 0.0, 1.0).is_err());
        assert_eq!(
            encode_discrete(&sv(0.5), 10, 1.0, 1.0).unwrap_err().code(),
            "CONFIG_ERROR"
        );
    }

    #[test]
    fn average_pair() {
        let avg = transition_average(&[fanout(4.0, vec![1.0, 3.0]), fanout(6.0, vec![3.0, 1.0])])
            .unwrap();
        assert_eq!(avg.reward, 5.0);
        assert_eq!(avg.next_state.values, vec![2.0, 2.0]);
        assert_eq!(avg.domain, DomainId::AGGREGATE);
        assert_eq!(avg.domain.id, 65535);
        assert_eq!(avg.kind, TransitionKind::TwinFanout);
    }

    #[test]
    fn average_singleton_is_identity() {
        let t = fanout(2.5, vec![7.0, -1.0]);
        let avg = transition_average(std::slice::from_ref(&t)).unwrap();
        assert!(avg.same_outcome(&t));
        assert_eq!(avg.domain, DomainId::AGGREGATE);
    }

    #[test]
    fn average_errors() {
        assert_eq!(transition_average(&[]).unwrap_err().code(), "EMPTY_GROUP");
        let mut other = fanout(1.0, vec![0.0, 0.0]);
        other.action = ActionId(2);
        let err = transition_average(&[fanout(1.0, vec![0.0, 0.0]), other]).unwrap_err();
        assert_eq!(err.code(), "HETEROGENEOUS_GROUP");
        let short = fanout(1.0, vec![0.0]);
        assert!(transition_average(&[fanout(1.0, vec![0.0, 0.0]), short]).is_err());
    }

    #[test]
    fn averaging_five_noisy_rewards_concentrates() {
        // Monte-Carlo oracle: mean of 5 unit-variance draws has std 1/sqrt(5),
        // so |error| < 3/sqrt(5) holds with probability ~0.9973.
        let mut rng = RngStream::new(2024, "noise");
        let groups = 10_000;
        let bound = 3.0 / 5f64.sqrt();
        let mut inside = 0;
        for _ in 0..groups {
            let group: Vec<Transition> = (0..5)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    fanout(10.0 + e, vec![0.0, 0.0])
                })
                .collect();
            let avg = transition_average(&group).unwrap();
            if (avg.reward - 10.0).abs() < bound {
                inside += 1;
            }
        }
        assert!(inside as f64 / groups as f64 >= 0.99, "inside = {inside}");
    }

    #[test]
    fn physical_transition_validation() {
        let err = Transition::physical(sv(0.0), ActionId(0), f64::NAN, sv(1.0), true).unwrap_err();
        assert_eq!(err.code(), "NUMERIC_ERROR");
        let mut t = Transition::physical(sv(0.0), ActionId(0), 1.0, sv(1.0), true).unwrap();
        t.domain = DomainId::divergent(3);
        assert!(t.validate().is_err());
    }

    #[test]
    fn log_format() {
        let t = Transition::physical(
            StateVec::new(vec![1.5, 2.0]),
            ActionId(3),
            -0.25,
            StateVec::new(vec![1.0, 1.0 / 3.0]),
            true,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_transition_log(&mut buf, &[t]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "kind,domain,state_0,state_1,action,reward,next_state_0,next_state_1,terminal\n\
             PHYSICAL,0,1.5,2,3,-0.25,1,0.333333,1\n"
        );
    }

    proptest! {
        #[test]
        fn encode_is_monotone(a in -100.0f64..2100.0, b in -100.0f64..2100.0, bins in 1usize..300) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let ia = encode_discrete(&sv(lo), bins, 0.0, 2000.0).unwrap();
            let ib = encode_discrete(&sv(hi), bins, 0.0, 2000.0).unwrap();
            prop_assert!(ia <= ib);
            prop_assert!(ib < bins);
        }

        #[test]
        fn average_is_permutation_invariant(
            rewards in prop::collection::vec(-1e3f64..1e3, 1..8),
            seed in any::<u64>(),
        ) {
            let group: Vec<Transition> = rewards
                .iter()
                .enumerate()
                .map(|(i, &r)| fanout(r, vec![r * 0.5, i as f64]))
                .collect();
            let mut shuffled = group.clone();
            let mut rng = RngStream::new(seed, "perm");
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            let a = transition_average(&group).unwrap();
            let b = transition_average(&shuffled).unwrap();
            prop_assert!(a.same_outcome(&b));
        }
    }
}
