//! Confidence-weighted voting.
//!
//! Each choice's total confidence is the sum of the confidences of the agents
//! that picked it; the consensus is the choice with the largest total, ties
//! going to the lowest index.

use serde::{Deserialize, Serialize};

use crate::agents::{AgentResponse, Ballot};
use crate::dataset::{ChoiceIndex, NUM_CHOICES};
use crate::scalar::Weight;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult<W = f64> {
    pub total_confidence: [W; NUM_CHOICES],
    pub winner_index: ChoiceIndex,
    pub tie: bool,
    pub unanimous: bool,
    pub participating_agents: usize,
}

/// Per-choice sum of ballot weights. Abstentions add nothing.
pub fn total_confidence<W: Weight>(ballots: impl IntoIterator<Item = Ballot<W>>) -> [W; NUM_CHOICES] {
    let mut totals = [W::zero(); NUM_CHOICES];
    for ballot in ballots {
        if let Some(choice) = ballot.choice {
            totals[choice.index()] = totals[choice.index()] + ballot.weight;
        }
    }
    totals
}

/// Picks the arg-max of `totals`, flagging ties and unanimity among the
/// non-abstaining ballots.
pub fn select_consensus<W: Weight>(totals: [W; NUM_CHOICES], ballots: &[Ballot<W>]) -> ConsensusResult<W> {
    let mut winner = 0;
    for i in 1..NUM_CHOICES {
        if totals[i] > totals[winner] {
            winner = i;
        }
    }
    let best = totals[winner];
    let tie = totals.iter().filter(|&&t| t == best).count() > 1;
    let winner_index = ChoiceIndex::new(winner).expect("winner in range");

    let mut participating = 0;
    let mut all_agree = true;
    for choice in ballots.iter().filter_map(|b| b.choice) {
        participating += 1;
        all_agree &= choice == winner_index;
    }
    if participating == 0 {
        tracing::warn!("every agent abstained; consensus defaults to choice A");
    }

    ConsensusResult {
        total_confidence: totals,
        winner_index,
        tie,
        unanimous: participating > 0 && all_agree,
        participating_agents: participating,
    }
}

/// Consensus over `ballots` in one step.
pub fn tally<W: Weight>(ballots: &[Ballot<W>]) -> ConsensusResult<W> {
    select_consensus(total_confidence(ballots.iter().copied()), ballots)
}

/// Consensus over parsed responses, in scalar `W`.
pub fn consensus_of<W: Weight>(responses: &[AgentResponse]) -> ConsensusResult<W> {
    let ballots: Vec<Ballot<W>> = responses.iter().map(AgentResponse::ballot).collect();
    tally(&ballots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    fn b(choice: usize, w: f64) -> Ballot<f64> {
        Ballot::new(ChoiceIndex::new(choice), w)
    }

    #[test]
    fn initial_round_of_worked_example() {
        let ballots = [b(0, 1.0), b(1, 0.7), b(0, 0.85)];
        let tc = total_confidence(ballots);
        assert_eq!(tc, [1.0 + 0.85, 0.7, 0.0, 0.0]);
        assert!((tc[0] - 1.85).abs() < 1e-12);
        let c = select_consensus(tc, &ballots);
        assert_eq!(c.winner_index.letter(), 'A');
        assert!(!c.tie);
        assert!(!c.unanimous);
        assert_eq!(c.participating_agents, 3);
    }

    #[test]
    fn exact_rational_sums() {
        let r = |n, d| Rational::new(n, d);
        let ballots = [
            Ballot::new(ChoiceIndex::new(0), r(9, 10)),
            Ballot::new(ChoiceIndex::new(0), r(1, 1)),
            Ballot::new(ChoiceIndex::new(0), r(19, 20)),
        ];
        let c = tally(&ballots);
        assert_eq!(c.total_confidence, [r(57, 20), r(0, 1), r(0, 1), r(0, 1)]);
        assert!(c.unanimous && !c.tie);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(total_confidence::<f64>([]), [0.0; 4]);
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let ballots = [b(1, 1.0), b(0, 1.0)];
        let c = tally(&ballots);
        assert_eq!(c.winner_index.index(), 0);
        assert!(c.tie);
        assert!(!c.unanimous);
    }

    #[test]
    fn all_abstain_is_degenerate() {
        let ballots = [Ballot::new(None, 0.0), Ballot::new(None, 0.0)];
        let c = tally(&ballots);
        assert_eq!(c.winner_index.index(), 0);
        assert!(c.tie);
        assert!(!c.unanimous);
        assert_eq!(c.participating_agents, 0);
    }

    #[test]
    fn single_voter_is_unanimous() {
        let c = tally(&[b(2, 0.4)]);
        assert_eq!(c.winner_index.index(), 2);
        assert!(c.unanimous && !c.tie);
    }

    #[test]
    fn abstainers_do_not_break_unanimity() {
        let c = tally(&[b(3, 0.4), Ballot::new(None, 0.0), b(3, 0.9)]);
        assert!(c.unanimous);
        assert_eq!(c.participating_agents, 2);
    }

    fn ballots_strategy() -> impl Strategy<Value = Vec<Ballot<f64>>> {
        prop::collection::vec(
            (prop::option::weighted(0.85, 0usize..4), 0.0f64..=1.0).prop_map(|(c, w)| match c {
                Some(c) => Ballot::new(ChoiceIndex::new(c), if w == 0.0 { 0.01 } else { w }),
                None => Ballot::new(None, 0.0),
            }),
            0..10,
        )
    }

    proptest! {
        #[test]
        fn linearity(a in ballots_strategy(), b in ballots_strategy()) {
            let joined: Vec<_> = a.iter().chain(b.iter()).copied().collect();
            let whole = total_confidence(joined);
            let (ta, tb) = (total_confidence(a.clone()), total_confidence(b.clone()));
            for j in 0..4 {
                prop_assert!((whole[j] - (ta[j] + tb[j])).abs() < 1e-9);
            }
        }

        #[test]
        fn bounded_by_participants(ballots in ballots_strategy()) {
            let c = tally(&ballots);
            for t in c.total_confidence {
                prop_assert!(t >= 0.0 && t <= c.participating_agents as f64 + 1e-9);
            }
            if c.unanimous {
                prop_assert!(!c.tie);
            }
            prop_assert!(c.total_confidence.iter().all(|&t| t <= c.total_confidence[c.winner_index.index()]));
        }

        #[test]
        fn scale_invariance(ballots in prop::collection::vec((0usize..4, 1i64..=100), 0..10), k in 1i64..50) {
            // Exact arithmetic so scaling cannot introduce rounding ties.
            let base: Vec<Ballot<Rational>> = ballots
                .iter()
                .map(|&(c, w)| Ballot::new(ChoiceIndex::new(c), Rational::new(w, 100)))
                .collect();
            let scaled: Vec<Ballot<Rational>> = base
                .iter()
                .map(|b| Ballot::new(b.choice, b.weight * Rational::new(k, 7)))
                .collect();
            let (x, y) = (tally(&base), tally(&scaled));
            prop_assert_eq!(x.winner_index, y.winner_index);
            prop_assert_eq!(x.tie, y.tie);
            prop_assert_eq!(x.unanimous, y.unanimous);
        }
    }
}
