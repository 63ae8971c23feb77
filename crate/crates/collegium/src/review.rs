//! The journal-mediated review lifecycle.
//!
//! A round runs: fee bid → board acceptance vote → random reviewer
//! assignment → scoring (1..=5) → publication decision → final-version
//! vote → fee settlement. This module holds the round state plus the
//! pure arithmetic: the strict mean-greater-than-3 decision rule and
//! the reviewer fee split.
//!
//! # The fee split
//!
//! For a fee `f` with journal cut `f_j`, the reviewer pool is
//! `R = round((1 − f_j)·f)`. Each reviewer who scored gets a share
//!
//! ```text
//! share_u = 1/n + ½·|s_u − 3| / Σ|s_v − 3|  −  ½·|s_u − s̄| / Σ|s_v − s̄|
//! ```
//!
//! where a degenerate denominator (all scores 3, or all scores equal)
//! replaces that term with the uniform 1/n. The first correction pays
//! for taking a position (distance from the non-committal 3), the
//! second charges for disagreeing with the consensus mean. Shares sum
//! to 1; a share can still be negative, and a negative share is clipped
//! to zero. `R` is then apportioned over the clipped shares with
//! largest-remainder rounding, so `journal_share + Σ r_u` equals the
//! fee exactly — in integers, not approximately.
//!
//! Scores are integers, so shares are exact rationals: with `n` scores
//! summing to `S`, `|s_u − s̄| = |n·s_u − S| / n` and the common factor
//! `n` cancels in the normalized term. No floating point is involved.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::canonical::{Canon, Writer};
use crate::error::ProtocolError;
use crate::identity::{content_hash, ContentHash, PersonId};
use crate::journal::JournalId;
use crate::money::{largest_remainder, Ppm};

/// Content hash of the bid event that opened the round.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoundId(pub ContentHash);

impl RoundId {
    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }

    pub fn short(&self) -> String {
        self.to_hex()[..12].to_string()
    }
}

impl fmt::Display for RoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for RoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RoundId({}..)", self.short())
    }
}

impl Canon for RoundId {
    fn encode(&self, w: &mut Writer) {
        self.0.encode(w);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundStatus {
    /// Bid escrowed, awaiting the board's acceptance vote.
    Bid,
    AcceptedForReview,
    UnderReview,
    /// Scores are in and the decision is recorded in `decision`.
    Decided,
    /// Accepted papers wait here for the reviewers' final votes.
    FinalVote,
    Settled,
    Failed,
}

impl RoundStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RoundStatus::Bid => "bid",
            RoundStatus::AcceptedForReview => "accepted-for-review",
            RoundStatus::UnderReview => "under-review",
            RoundStatus::Decided => "decided",
            RoundStatus::FinalVote => "final-vote",
            RoundStatus::Settled => "settled",
            RoundStatus::Failed => "failed",
        }
    }
}

impl Canon for RoundStatus {
    fn encode(&self, w: &mut Writer) {
        w.u8(match self {
            RoundStatus::Bid => 0,
            RoundStatus::AcceptedForReview => 1,
            RoundStatus::UnderReview => 2,
            RoundStatus::Decided => 3,
            RoundStatus::FinalVote => 4,
            RoundStatus::Settled => 5,
            RoundStatus::Failed => 6,
        });
    }
}

/// A paper's journey through one journal's review process.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewRound {
    pub id: RoundId,
    pub paper: ContentHash,
    pub journal: JournalId,
    /// The review fee bid, escrowed from `payer` while the round runs.
    pub fee: u64,
    pub payer: PersonId,
    pub escrow: u64,
    pub status: RoundStatus,
    /// Assigned reviewers, sorted. Kept for replay even when the
    /// journal publishes pseudonyms instead.
    pub reviewers: Vec<PersonId>,
    /// Pseudonym tokens, parallel to nothing: sorted independently so
    /// the public ordering leaks no identity.
    pub pseudonyms: Vec<ContentHash>,
    pub scores: BTreeMap<PersonId, u8>,
    pub reports: BTreeMap<PersonId, ContentHash>,
    pub deadline: Option<u64>,
    pub decision: Option<bool>,
    pub final_hash: Option<ContentHash>,
    pub final_deadline: Option<u64>,
    pub final_votes: BTreeMap<PersonId, bool>,
}

impl ReviewRound {
    pub fn is_reviewer(&self, person: &PersonId) -> bool {
        self.reviewers.binary_search(person).is_ok()
    }

    /// Scores in reviewer order, as the payout functions expect.
    pub fn submitted_scores(&self) -> Vec<(PersonId, u8)> {
        self.scores.iter().map(|(p, s)| (*p, *s)).collect()
    }
}

impl Canon for ReviewRound {
    fn encode(&self, w: &mut Writer) {
        self.id.encode(w);
        self.paper.encode(w);
        self.journal.encode(w);
        w.u64(self.fee);
        self.payer.encode(w);
        w.u64(self.escrow);
        self.status.encode(w);
        w.seq(self.reviewers.len());
        for r in &self.reviewers {
            r.encode(w);
        }
        w.seq(self.pseudonyms.len());
        for p in &self.pseudonyms {
            p.encode(w);
        }
        w.seq(self.scores.len());
        for (p, s) in &self.scores {
            p.encode(w);
            w.u8(*s);
        }
        w.seq(self.reports.len());
        for (p, h) in &self.reports {
            p.encode(w);
            h.encode(w);
        }
        w.opt(self.deadline.as_ref(), |w, d| w.u64(*d));
        w.opt(self.decision.as_ref(), |w, d| w.bool(*d));
        w.opt(self.final_hash.as_ref(), |w, h| h.encode(w));
        w.opt(self.final_deadline.as_ref(), |w, d| w.u64(*d));
        w.seq(self.final_votes.len());
        for (p, v) in &self.final_votes {
            p.encode(w);
            w.bool(*v);
        }
    }
}

pub const SCORE_MIN: u8 = 1;
pub const SCORE_MAX: u8 = 5;

pub fn check_score(score: u8) -> Result<(), ProtocolError> {
    if (SCORE_MIN..=SCORE_MAX).contains(&score) {
        Ok(())
    } else {
        Err(ProtocolError::ScoreOutOfRange(score))
    }
}

/// Accept iff the mean score strictly exceeds 3. Integer-exact:
/// mean > 3 ⟺ Σs > 3n.
pub fn accept_by_mean(scores: &[u8]) -> bool {
    let n = scores.len() as u64;
    let sum: u64 = scores.iter().map(|&s| s as u64).sum();
    sum > 3 * n
}

/// How a settled fee divides. Conservation is an invariant, not a
/// hope: `journal_share + Σ reviewer_shares + refund_to_authors ==
/// fee`, exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payout {
    pub reviewer_shares: Vec<(PersonId, u64)>,
    pub journal_share: u64,
    pub refund_to_authors: u64,
}

impl Payout {
    pub fn total(&self) -> u64 {
        self.journal_share
            + self.refund_to_authors
            + self.reviewer_shares.iter().map(|(_, r)| r).sum::<u64>()
    }
}

/// Share numerators over the common denominator `2·n·P·Q`, where
/// `(p_u, P)` is the position term (`|s_u−3|`, its sum) and `(q_u, Q)`
/// the consensus term (`|n·s_u−S|`, its sum), each falling back to the
/// uniform `(1, n)` when its sum is zero. Negative numerators mean the
/// consensus penalty exceeded the base plus position reward.
pub fn share_numerators(scores: &[u8]) -> Vec<i128> {
    let n = scores.len() as i128;
    let sum: i128 = scores.iter().map(|&s| s as i128).sum();

    let pos: Vec<i128> = scores.iter().map(|&s| (s as i128 - 3).abs()).collect();
    let pos_sum: i128 = pos.iter().sum();
    let dev: Vec<i128> = scores.iter().map(|&s| (n * s as i128 - sum).abs()).collect();
    let dev_sum: i128 = dev.iter().sum();

    let (pos, pos_sum) = if pos_sum == 0 {
        (vec![1; scores.len()], n)
    } else {
        (pos, pos_sum)
    };
    let (dev, dev_sum) = if dev_sum == 0 {
        (vec![1; scores.len()], n)
    } else {
        (dev, dev_sum)
    };

    // share_u = 1/n + p_u/(2P) − q_u/(2Q), over denominator 2nPQ.
    (0..scores.len())
        .map(|u| 2 * pos_sum * dev_sum + n * dev_sum * pos[u] - n * pos_sum * dev[u])
        .collect()
}

/// Split a review fee between the journal and the reviewers who
/// actually scored (forfeiting reviewers are simply absent). `scored`
/// must be sorted by reviewer id; remainder ties then resolve in
/// fingerprint order.
pub fn split_review_fee(fee: u64, fee_keep: Ppm, scored: &[(PersonId, u8)]) -> Payout {
    let pool = fee_keep.complement().scale_round(fee);
    let journal_share = fee - pool;
    if scored.is_empty() {
        return Payout {
            reviewer_shares: Vec::new(),
            journal_share: fee,
            refund_to_authors: 0,
        };
    }
    let scores: Vec<u8> = scored.iter().map(|(_, s)| *s).collect();
    let weights: Vec<u128> = share_numerators(&scores)
        .into_iter()
        .map(|w| w.max(0) as u128)
        .collect();
    let shares = largest_remainder(pool, &weights);
    Payout {
        reviewer_shares: scored
            .iter()
            .zip(shares)
            .map(|(&(p, _), r)| (p, r))
            .collect(),
        journal_share,
        refund_to_authors: 0,
    }
}

/// The payout when a round fails after review started: the journal
/// keeps its cut, the reviewer pool returns to the authors.
pub fn failed_round_payout(fee: u64, fee_keep: Ppm) -> Payout {
    let pool = fee_keep.complement().scale_round(fee);
    Payout {
        reviewer_shares: Vec::new(),
        journal_share: fee - pool,
        refund_to_authors: pool,
    }
}

/// Minimum number of submitted reviews for a deadline-expired round to
/// still be decidable.
pub fn min_reviews(n_assigned: usize) -> usize {
    n_assigned.div_ceil(2)
}

/// Strict majority of the assigned reviewers must approve the final
/// version.
pub fn final_vote_passes(approvals: usize, n_assigned: usize) -> bool {
    2 * approvals > n_assigned
}

/// Draw `n` reviewers uniformly without replacement from the eligible
/// board members (sorted), seeded by (journal, paper, nonce). The same
/// inputs always yield the same set.
pub fn assign_reviewers(
    journal: &JournalId,
    paper: &ContentHash,
    nonce: u64,
    eligible: &[PersonId],
    n: usize,
) -> Result<Vec<PersonId>, ProtocolError> {
    if eligible.len() < n {
        return Err(ProtocolError::NotEnoughEligibleReviewers {
            needed: n,
            available: eligible.len(),
        });
    }
    let mut w = Writer::new();
    w.str("assign");
    journal.encode(&mut w);
    paper.encode(&mut w);
    w.u64(nonce);
    let seed = content_hash(&w.into_bytes());

    let mut rng = ChaCha12Rng::from_seed(seed.0);
    let mut pool = eligible.to_vec();
    let (chosen, _) = pool.partial_shuffle(&mut rng, n);
    let mut chosen = chosen.to_vec();
    chosen.sort();
    Ok(chosen)
}

/// Per-round pseudonym commitment: stable within a round, unlinkable
/// across rounds for anyone without the ledger salt.
pub fn pseudonym(reviewer: &PersonId, paper: &ContentHash, salt: &ContentHash) -> ContentHash {
    let mut w = Writer::new();
    w.str("pseudonym");
    reviewer.encode(&mut w);
    paper.encode(&mut w);
    salt.encode(&mut w);
    content_hash(&w.into_bytes())
}
