//! The journal-free review market.
//!
//! Scientists post asks (a fee, keywords, a capacity); authors submit a
//! paper with keywords and a budget bid. The matcher picks the reviewer
//! set that maximizes total reputation subject to the budget, review
//! runs in two steps (score the paper, then score each other's
//! reports), and settlement pays each reviewer iff the reports they
//! *received* average at least the report threshold. A reviewer's
//! payment never depends on the scores they hand out — that is the
//! structural anti-collusion property, and the tests assert it.
//!
//! Reputation (RS) starts equal for everyone and grows additively with
//! each review by the mean score the reviewer's report collected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::canonical::{Canon, Writer};
use crate::error::ProtocolError;
use crate::identity::{ContentHash, PersonId};

/// Content hash of the submit event that opened the submission.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubmissionId(pub ContentHash);

impl SubmissionId {
    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }

    pub fn short(&self) -> String {
        self.to_hex()[..12].to_string()
    }
}

impl fmt::Display for SubmissionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for SubmissionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubmissionId({}..)", self.short())
    }
}

impl Canon for SubmissionId {
    fn encode(&self, w: &mut Writer) {
        self.0.encode(w);
    }
}

/// Everyone's initial reputation score.
pub const INITIAL_RS: f64 = 1.0;

/// A scientist's standing ask in the market.
#[derive(Debug, Clone, PartialEq)]
pub struct ScientistProfile {
    pub person: PersonId,
    pub keywords: BTreeSet<String>,
    pub rs: f64,
    /// Fee asked per review, micro-credits.
    pub ask: u64,
    /// Maximum concurrent assignments.
    pub capacity: u32,
    /// Currently held assignments.
    pub active: u32,
}

impl ScientistProfile {
    pub fn has_capacity(&self) -> bool {
        self.active < self.capacity
    }

    pub fn shares_keyword(&self, keywords: &BTreeSet<String>) -> bool {
        self.keywords.iter().any(|k| keywords.contains(k))
    }
}

impl Canon for ScientistProfile {
    fn encode(&self, w: &mut Writer) {
        self.person.encode(w);
        w.seq(self.keywords.len());
        for k in &self.keywords {
            w.str(k);
        }
        w.f64(self.rs);
        w.u64(self.ask);
        w.u32(self.capacity);
        w.u32(self.active);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmissionStatus {
    Submitted,
    Matched,
    /// All paper scores are in; report scoring is open.
    Scored,
    ReportScored,
    Settled,
    Withdrawn,
}

impl SubmissionStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SubmissionStatus::Submitted => "submitted",
            SubmissionStatus::Matched => "matched",
            SubmissionStatus::Scored => "scored",
            SubmissionStatus::ReportScored => "report-scored",
            SubmissionStatus::Settled => "settled",
            SubmissionStatus::Withdrawn => "withdrawn",
        }
    }
}

impl Canon for SubmissionStatus {
    fn encode(&self, w: &mut Writer) {
        w.u8(match self {
            SubmissionStatus::Submitted => 0,
            SubmissionStatus::Matched => 1,
            SubmissionStatus::Scored => 2,
            SubmissionStatus::ReportScored => 3,
            SubmissionStatus::Settled => 4,
            SubmissionStatus::Withdrawn => 5,
        });
    }
}

/// A paper offered to the market with a budget bid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSubmission {
    pub id: SubmissionId,
    pub paper: ContentHash,
    pub payer: PersonId,
    pub keywords: BTreeSet<String>,
    /// The R_p budget, escrowed while the submission runs.
    pub bid: u64,
    pub escrow: u64,
    pub status: SubmissionStatus,
    /// Matched reviewers, sorted by fingerprint.
    pub reviewers: Vec<PersonId>,
    /// Asks captured at match time, parallel to `reviewers`.
    pub asks: Vec<u64>,
    pub paper_scores: BTreeMap<PersonId, u8>,
    pub reports: BTreeMap<PersonId, ContentHash>,
    /// (scorer, scoree) → score given to the scoree's report.
    pub report_scores: BTreeMap<(PersonId, PersonId), u8>,
    pub accepted: Option<bool>,
}

impl MarketSubmission {
    pub fn is_reviewer(&self, person: &PersonId) -> bool {
        self.reviewers.binary_search(person).is_ok()
    }
}

impl Canon for MarketSubmission {
    fn encode(&self, w: &mut Writer) {
        self.id.encode(w);
        self.paper.encode(w);
        self.payer.encode(w);
        w.seq(self.keywords.len());
        for k in &self.keywords {
            w.str(k);
        }
        w.u64(self.bid);
        w.u64(self.escrow);
        self.status.encode(w);
        w.seq(self.reviewers.len());
        for r in &self.reviewers {
            r.encode(w);
        }
        w.seq(self.asks.len());
        for a in &self.asks {
            w.u64(*a);
        }
        w.seq(self.paper_scores.len());
        for (p, s) in &self.paper_scores {
            p.encode(w);
            w.u8(*s);
        }
        w.seq(self.reports.len());
        for (p, h) in &self.reports {
            p.encode(w);
            h.encode(w);
        }
        w.seq(self.report_scores.len());
        for ((a, b), s) in &self.report_scores {
            a.encode(w);
            b.encode(w);
            w.u8(*s);
        }
        w.opt(self.accepted.as_ref(), |w, a| w.bool(*a));
    }
}

/// Per-field acceptance thresholds for the paper score S_p.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldThresholds {
    pub default: f64,
    pub per_field: BTreeMap<String, f64>,
}

impl Default for FieldThresholds {
    fn default() -> Self {
        Self {
            default: 3.0,
            per_field: BTreeMap::new(),
        }
    }
}

impl FieldThresholds {
    /// The strictest threshold among the submission's fields, or the
    /// default when none of its keywords carries one.
    pub fn tau_for(&self, keywords: &BTreeSet<String>) -> f64 {
        keywords
            .iter()
            .filter_map(|k| self.per_field.get(k).copied())
            .fold(None, |acc: Option<f64>, t| {
                Some(acc.map_or(t, |a| a.max(t)))
            })
            .unwrap_or(self.default)
    }
}

/// How RS moves after each settled review.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RsUpdateMode {
    /// RS += mean report score (the default).
    Additive,
    /// RS ← (1 − w)·RS + w·mean.
    Ema { weight: f64 },
}

impl RsUpdateMode {
    pub fn apply(&self, rs: f64, mean: f64) -> f64 {
        match self {
            RsUpdateMode::Additive => rs + mean,
            RsUpdateMode::Ema { weight } => (1.0 - weight) * rs + weight * mean,
        }
    }
}

/// Market-wide settlement knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketRules {
    /// Reviewers per paper; at least 3.
    pub group_size: usize,
    /// Report-mean payment threshold, in tenths (30 = 3.0, inclusive).
    pub report_threshold_tenths: u32,
    pub rs_mode: RsUpdateMode,
    pub thresholds: FieldThresholds,
}

impl Default for MarketRules {
    fn default() -> Self {
        Self {
            group_size: 3,
            report_threshold_tenths: 30,
            rs_mode: RsUpdateMode::Additive,
            thresholds: FieldThresholds::default(),
        }
    }
}

/// The eligible pool for a submission: keyword overlap, spare capacity,
/// not an author. Sorted by fingerprint.
pub fn eligible_pool<'a>(
    profiles: impl IntoIterator<Item = &'a ScientistProfile>,
    keywords: &BTreeSet<String>,
    exclude: &[PersonId],
) -> Vec<&'a ScientistProfile> {
    let mut pool: Vec<&ScientistProfile> = profiles
        .into_iter()
        .filter(|p| p.has_capacity() && p.shares_keyword(keywords) && !exclude.contains(&p.person))
        .collect();
    pool.sort_by_key(|p| p.person);
    pool
}

/// Population standard deviation of the pool's RS — the "mixed RS"
/// spread requirement δ.
fn rs_spread_requirement(pool: &[&ScientistProfile]) -> f64 {
    if pool.is_empty() {
        return 0.0;
    }
    let n = pool.len() as f64;
    let mean = pool.iter().map(|p| p.rs).sum::<f64>() / n;
    let var = pool.iter().map(|p| (p.rs - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

/// Select the reviewer set: exactly `group_size` distinct scientists
/// from the pool, maximizing Σ RS subject to Σ ask ≤ bid. Sets whose
/// RS spread reaches one pool standard deviation are preferred when any
/// such set fits the budget; ties break toward the lexicographically
/// smallest fingerprint tuple. The returned set is sorted.
pub fn match_reviewers(
    bid: u64,
    pool: &[&ScientistProfile],
    group_size: usize,
) -> Result<Vec<PersonId>, ProtocolError> {
    if pool.len() < group_size {
        return Err(ProtocolError::NoFeasibleMatch);
    }
    let delta = rs_spread_requirement(pool);

    // Pool sizes stay small enough that exhausting the combinations is
    // both the oracle and the implementation.
    let mut best_any: Option<(f64, Vec<usize>)> = None;
    let mut best_mixed: Option<(f64, Vec<usize>)> = None;
    let mut combo: Vec<usize> = (0..group_size).collect();
    loop {
        let total_ask: u64 = combo.iter().map(|&i| pool[i].ask).sum();
        if total_ask <= bid {
            let total_rs: f64 = combo.iter().map(|&i| pool[i].rs).sum();
            let spread = combo
                .iter()
                .map(|&i| pool[i].rs)
                .fold(f64::NEG_INFINITY, f64::max)
                - combo
                    .iter()
                    .map(|&i| pool[i].rs)
                    .fold(f64::INFINITY, f64::min);
            // Enumeration is lexicographic, so strictly-greater keeps
            // the smallest tuple among equals.
            if best_any.as_ref().is_none_or(|(rs, _)| total_rs > *rs) {
                best_any = Some((total_rs, combo.clone()));
            }
            if spread >= delta && best_mixed.as_ref().is_none_or(|(rs, _)| total_rs > *rs) {
                best_mixed = Some((total_rs, combo.clone()));
            }
        }
        if !next_combination(&mut combo, pool.len()) {
            break;
        }
    }
    match best_mixed.or(best_any) {
        Some((_, combo)) => Ok(combo.iter().map(|&i| pool[i].person).collect()),
        None => Err(ProtocolError::NoFeasibleMatch),
    }
}

/// Advance `combo` to the next lexicographic k-combination of
/// `0..pool_len`; false when exhausted.
fn next_combination(combo: &mut [usize], pool_len: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] != i + pool_len - k {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Fair-bid suggestion: the three cheapest eligible asks plus a 10%
/// safety margin, rounded up.
pub fn suggest_fair_bid(pool: &[&ScientistProfile]) -> Result<u64, ProtocolError> {
    if pool.len() < 3 {
        return Err(ProtocolError::NotEnoughReviewers);
    }
    let mut asks: Vec<u64> = pool.iter().map(|p| p.ask).collect();
    asks.sort_unstable();
    let cheapest: u64 = asks[..3].iter().sum();
    Ok((cheapest * 11).div_ceil(10))
}

/// One reviewer's slice of a settlement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewerSettlement {
    pub person: PersonId,
    pub ask: u64,
    /// Mean score this reviewer's report received from the peers.
    pub report_mean: f64,
    pub paid: bool,
    pub rs_before: f64,
    pub rs_after: f64,
}

/// The full outcome of settling a submission. Payments plus the refund
/// equal the bid exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SettlementOutcome {
    pub reviewers: Vec<ReviewerSettlement>,
    pub refund_to_authors: u64,
    pub paper_score: f64,
    pub tau: f64,
    pub accepted: bool,
}

impl SettlementOutcome {
    pub fn paid_total(&self) -> u64 {
        self.reviewers
            .iter()
            .filter(|r| r.paid)
            .map(|r| r.ask)
            .sum()
    }
}

/// Apply the settlement rules to a fully report-scored submission.
/// `rs_of` supplies each reviewer's current RS.
pub fn settle(
    submission: &MarketSubmission,
    rules: &MarketRules,
    rs_of: impl Fn(&PersonId) -> f64,
) -> SettlementOutcome {
    let n = submission.reviewers.len();
    let mut reviewers = Vec::with_capacity(n);
    let mut paid_total: u64 = 0;

    for (idx, person) in submission.reviewers.iter().enumerate() {
        let received: Vec<u64> = submission
            .report_scores
            .iter()
            .filter(|((_, scoree), _)| scoree == person)
            .map(|(_, &s)| s as u64)
            .collect();
        let count = received.len().max(1) as u64;
        let sum: u64 = received.iter().sum();
        let report_mean = sum as f64 / count as f64;
        // mean ≥ θ, checked in integers: 10·Σ ≥ θ_tenths·count.
        let paid = 10 * sum >= rules.report_threshold_tenths as u64 * count;
        let ask = submission.asks[idx];
        if paid {
            paid_total += ask;
        }
        let rs_before = rs_of(person);
        reviewers.push(ReviewerSettlement {
            person: *person,
            ask,
            report_mean,
            paid,
            rs_before,
            rs_after: rules.rs_mode.apply(rs_before, report_mean),
        });
    }

    let paper_sum: u64 = submission.paper_scores.values().map(|&s| s as u64).sum();
    let paper_score = paper_sum as f64 / submission.paper_scores.len().max(1) as f64;
    let tau = rules.thresholds.tau_for(&submission.keywords);

    SettlementOutcome {
        refund_to_authors: submission.bid - paid_total,
        reviewers,
        paper_score,
        tau,
        accepted: paper_score > tau,
    }
}
