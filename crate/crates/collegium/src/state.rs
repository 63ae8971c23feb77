//! The replayed protocol state.
//!
//! The event log is the only source of truth; this struct is what you
//! get by folding `apply` over it. Application is deterministic — the
//! same events always produce a state with the same [`State::digest`] —
//! and every event either applies atomically or is rejected with a
//! [`ProtocolError`] and changes nothing.
//!
//! Deterministic results that the protocol computes itself (reviewer
//! draws, fee splits, match selections, settlements) still appear in
//! event bodies so the log is self-describing; `apply` recomputes each
//! one and rejects a body that disagrees. Money moves only here, and
//! a debug assertion checks conservation after every event: the sum of
//! all wallets and escrows equals everything ever minted.

use std::collections::{BTreeMap, BTreeSet};

use crate::canonical::{Canon, Writer};
use crate::error::ProtocolError;
use crate::events::{DecisionOutcome, Event, EventBody};
use crate::identity::{
    content_hash, person_id_of, ContentHash, KeyRegistry, PersonId, RegisteredKey,
    SignatureRecord,
};
use crate::journal::{quorum_check, Journal, JournalId};
use crate::market::{
    eligible_pool, match_reviewers, settle, MarketRules, MarketSubmission, ScientistProfile,
    SubmissionId, SubmissionStatus, INITIAL_RS,
};
use crate::reputation::{CitationGraph, ReputationInputs, ServiceInterval, SolverOptions};
use crate::review::{
    accept_by_mean, assign_reviewers, check_score, failed_round_payout, final_vote_passes,
    min_reviews, pseudonym, split_review_fee, ReviewRound, RoundId, RoundStatus,
};
use crate::events;

/// Engine-level knobs that are inputs to replay (they come from the
/// scenario or the CLI config, and are echoed into run summaries).
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Days a pending join proposal stays open before its escrow
    /// returns to the bidder.
    pub join_expiry_days: u64,
    pub market: MarketRules,
    pub reputation: SolverOptions,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            join_expiry_days: 14,
            market: MarketRules::default(),
            reputation: SolverOptions::default(),
        }
    }
}

/// A published paper as the ledger knows it.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperRecord {
    pub hash: ContentHash,
    pub authors: Vec<PersonId>,
    pub keywords: BTreeSet<String>,
    pub cites: BTreeSet<ContentHash>,
    /// The journal snapshot that published it, once a round settles
    /// with a passing final vote.
    pub published_in: Option<JournalId>,
    pub published_at: Option<u64>,
    /// Certified by the journal-free market.
    pub market_accepted: bool,
}

impl PaperRecord {
    pub fn is_author(&self, person: &PersonId) -> bool {
        self.authors.binary_search(person).is_ok()
    }
}

impl Canon for PaperRecord {
    fn encode(&self, w: &mut Writer) {
        self.hash.encode(w);
        w.seq(self.authors.len());
        for a in &self.authors {
            a.encode(w);
        }
        w.seq(self.keywords.len());
        for k in &self.keywords {
            w.str(k);
        }
        w.seq(self.cites.len());
        for c in &self.cites {
            c.encode(w);
        }
        w.opt(self.published_in.as_ref(), |w, j| j.encode(w));
        w.opt(self.published_at.as_ref(), |w, d| w.u64(*d));
        w.bool(self.market_accepted);
    }
}

/// A join bid waiting for the board's vote, with its escrow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinProposal {
    pub id: ContentHash,
    pub journal: JournalId,
    pub candidate: PersonId,
    pub bid: u64,
    pub expires_day: u64,
}

impl Canon for JoinProposal {
    fn encode(&self, w: &mut Writer) {
        self.id.encode(w);
        self.journal.encode(w);
        self.candidate.encode(w);
        w.u64(self.bid);
        w.u64(self.expires_day);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub config: ProtocolConfig,
    /// Timestamp of the last applied event.
    pub day: u64,
    /// Hash of the genesis event; the pseudonym salt.
    pub salt: ContentHash,
    pub registry: KeyRegistry,
    pub wallets: BTreeMap<PersonId, u64>,
    pub journal_wallets: BTreeMap<JournalId, u64>,
    /// Everything ever minted (KeyRegister starting balances).
    pub minted: u64,
    pub journals: BTreeMap<JournalId, Journal>,
    pub pending_joins: BTreeMap<JournalId, JoinProposal>,
    pub papers: BTreeMap<ContentHash, PaperRecord>,
    pub rounds: BTreeMap<RoundId, ReviewRound>,
    pub profiles: BTreeMap<PersonId, ScientistProfile>,
    pub submissions: BTreeMap<SubmissionId, MarketSubmission>,
    pub events_applied: u64,
}

impl State {
    pub fn new(config: ProtocolConfig) -> Self {
        Self {
            config,
            day: 0,
            salt: ContentHash::ZERO,
            registry: KeyRegistry::new(),
            wallets: BTreeMap::new(),
            journal_wallets: BTreeMap::new(),
            minted: 0,
            journals: BTreeMap::new(),
            pending_joins: BTreeMap::new(),
            papers: BTreeMap::new(),
            rounds: BTreeMap::new(),
            profiles: BTreeMap::new(),
            submissions: BTreeMap::new(),
            events_applied: 0,
        }
    }

    pub fn person_balance(&self, person: &PersonId) -> u64 {
        self.wallets.get(person).copied().unwrap_or(0)
    }

    pub fn journal_balance(&self, journal: &JournalId) -> u64 {
        self.journal_wallets.get(journal).copied().unwrap_or(0)
    }

    /// Everything currently held anywhere: wallets plus live escrows.
    pub fn total_balance(&self) -> u64 {
        let wallets: u64 = self.wallets.values().sum();
        let journals: u64 = self.journal_wallets.values().sum();
        let joins: u64 = self.pending_joins.values().map(|p| p.bid).sum();
        let rounds: u64 = self.rounds.values().map(|r| r.escrow).sum();
        let subs: u64 = self.submissions.values().map(|s| s.escrow).sum();
        wallets + journals + joins + rounds + subs
    }

    pub fn conservation_holds(&self) -> bool {
        self.total_balance() == self.minted
    }

    /// Canonical digest of the entire state.
    pub fn digest(&self) -> ContentHash {
        content_hash(&self.canon_bytes())
    }

    fn debit_person(&mut self, person: &PersonId, amount: u64) -> Result<(), ProtocolError> {
        let balance = self.wallets.entry(*person).or_insert(0);
        if *balance < amount {
            return Err(ProtocolError::InsufficientFunds {
                needed: amount,
                available: *balance,
            });
        }
        *balance -= amount;
        Ok(())
    }

    fn credit_person(&mut self, person: &PersonId, amount: u64) {
        *self.wallets.entry(*person).or_insert(0) += amount;
    }

    fn credit_journal(&mut self, journal: &JournalId, amount: u64) {
        *self.journal_wallets.entry(*journal).or_insert(0) += amount;
    }

    fn journal(&self, id: &JournalId) -> Result<&Journal, ProtocolError> {
        self.journals.get(id).ok_or(ProtocolError::NoSuchJournal)
    }

    /// Approval signatures that verify against the registry, as the set
    /// of their signers.
    fn valid_signers(&self, message: &[u8], sigs: &[SignatureRecord]) -> BTreeSet<PersonId> {
        sigs.iter()
            .filter(|s| self.registry.verify_record(message, s))
            .map(|s| s.signer)
            .collect()
    }

    /// Pending join proposals whose window has closed refund their
    /// escrow the moment any later event advances the clock.
    fn sweep_expired_joins(&mut self, now: u64) {
        let expired: Vec<JournalId> = self
            .pending_joins
            .iter()
            .filter(|(_, p)| now > p.expires_day)
            .map(|(j, _)| *j)
            .collect();
        for j in expired {
            let p = self.pending_joins.remove(&j).expect("listed above");
            self.credit_person(&p.candidate, p.bid);
        }
    }

    /// Apply one event. The ledger has already checked the chain links
    /// and the actor's signature; this enforces every kind-specific
    /// precondition and performs the transition.
    pub fn apply(&mut self, event: &Event, event_hash: ContentHash) -> Result<(), ProtocolError> {
        if self.events_applied == 0 {
            self.salt = event_hash;
        }
        self.sweep_expired_joins(event.timestamp);
        self.day = event.timestamp;

        // Any actor other than a self-registering key must be known.
        let self_registration = matches!(
            &event.body,
            EventBody::KeyRegister { scheme, public, .. }
                if person_id_of(*scheme, public) == event.actor
        );
        if !self_registration && !self.registry.contains(&event.actor) {
            return Err(ProtocolError::UnknownActor);
        }

        match &event.body {
            EventBody::KeyRegister {
                scheme,
                public,
                validated,
                initial_balance,
            } => {
                let person = person_id_of(*scheme, public);
                if self.registry.contains(&person) {
                    return Err(ProtocolError::AlreadyRegistered);
                }
                self.registry.insert(
                    person,
                    RegisteredKey {
                        scheme: *scheme,
                        public: public.clone(),
                        validated: *validated,
                    },
                );
                self.credit_person(&person, *initial_balance);
                self.minted += *initial_balance;
            }

            EventBody::JournalCreate {
                founders,
                params,
                signatures,
            } => {
                params.validate()?;
                require_sorted_people(founders, "founders")?;
                if founders.is_empty() {
                    return Err(ProtocolError::EmptyBoardResult);
                }
                if !founders.contains(&event.actor) {
                    return Err(ProtocolError::NotBoardMember);
                }
                let message = events::journal_create_message(founders, params);
                let signers = self.valid_signers(&message, signatures);
                for f in founders {
                    if !signers.contains(f) {
                        return Err(ProtocolError::MissingFounderSignature(f.short()));
                    }
                }
                let id = crate::journal::journal_id(founders, params, None);
                if self.journals.contains_key(&id) {
                    return Err(ProtocolError::JournalExists);
                }
                self.journals.insert(
                    id,
                    Journal {
                        id,
                        board: founders.clone(),
                        ancestor: None,
                        params: *params,
                        created_at: event.timestamp,
                        superseded_by: None,
                    },
                );
                self.journal_wallets.insert(id, 0);
            }

            EventBody::JournalModify {
                journal,
                change,
                approvals,
            } => {
                let j = self.journal(journal)?.clone();
                if j.is_frozen() {
                    return Err(ProtocolError::AlreadySuperseded);
                }
                if self.pending_joins.contains_key(journal) {
                    return Err(ProtocolError::ProposalPending);
                }
                if !j.is_member(&event.actor) {
                    return Err(ProtocolError::NotBoardMember);
                }
                // A member leaving unilaterally needs no approvals: the
                // event signature itself is the consent that matters.
                if !change.is_unilateral_leave_by(&event.actor) {
                    let message = events::journal_modify_message(journal, change);
                    let signers = self.valid_signers(&message, approvals);
                    quorum_check(j.params.modify_quorum, &j.board, signers).require()?;
                }
                let (board, params) = change.apply_to(&j)?;
                self.create_descendant(&j, board, params, 0, event.timestamp)?;
            }

            EventBody::JoinBid {
                journal,
                bid,
                expires_day,
            } => {
                let j = self.journal(journal)?;
                if j.is_frozen() {
                    return Err(ProtocolError::AlreadySuperseded);
                }
                if j.is_member(&event.actor) {
                    return Err(ProtocolError::AlreadyMember);
                }
                if self.pending_joins.contains_key(journal) {
                    return Err(ProtocolError::ProposalPending);
                }
                if *expires_day < event.timestamp {
                    return Err(ProtocolError::ProposalExpired);
                }
                self.debit_person(&event.actor, *bid)?;
                self.pending_joins.insert(
                    *journal,
                    JoinProposal {
                        id: event_hash,
                        journal: *journal,
                        candidate: event.actor,
                        bid: *bid,
                        expires_day: *expires_day,
                    },
                );
            }

            EventBody::JoinDecision {
                journal,
                proposal,
                approvals,
            } => {
                let pending = self
                    .pending_joins
                    .get(journal)
                    .filter(|p| p.id == *proposal)
                    .cloned()
                    .ok_or(ProtocolError::NoSuchProposal)?;
                let j = self.journal(journal)?.clone();
                if !j.is_member(&event.actor) {
                    return Err(ProtocolError::NotBoardMember);
                }
                let message = events::join_approval_message(journal, proposal);
                let signers = self.valid_signers(&message, approvals);
                let quorum = quorum_check(j.params.modify_quorum, &j.board, signers);
                self.pending_joins.remove(journal);
                if quorum.met() {
                    // Accepted: the bid funds the successor journal.
                    let mut board = j.board.clone();
                    let pos = board
                        .binary_search(&pending.candidate)
                        .expect_err("candidate was not a member");
                    board.insert(pos, pending.candidate);
                    self.create_descendant(&j, board, j.params, pending.bid, event.timestamp)?;
                } else {
                    // Rejected: the bid returns to the bidder in full.
                    self.credit_person(&pending.candidate, pending.bid);
                }
            }

            EventBody::BalanceSpend {
                journal,
                amount,
                recipient,
                approvals,
            } => {
                let j = self.journal(journal)?.clone();
                if !j.is_member(&event.actor) {
                    return Err(ProtocolError::NotBoardMember);
                }
                if !self.registry.contains(recipient) {
                    return Err(ProtocolError::UnknownActor);
                }
                let message = events::spend_message(journal, *amount, recipient);
                let signers = self.valid_signers(&message, approvals);
                quorum_check(j.params.spend_quorum, &j.board, signers).require()?;
                let balance = self.journal_balance(journal);
                if balance < *amount {
                    return Err(ProtocolError::InsufficientFunds {
                        needed: *amount,
                        available: balance,
                    });
                }
                *self.journal_wallets.entry(*journal).or_insert(0) -= *amount;
                self.credit_person(recipient, *amount);
            }

            EventBody::BalanceTransfer {
                ancestor,
                descendant,
                approvals,
            } => {
                let anc = self.journal(ancestor)?.clone();
                let desc = self.journal(descendant)?;
                if desc.ancestor != Some(*ancestor) {
                    return Err(ProtocolError::NotDescendant);
                }
                if !anc.is_member(&event.actor) {
                    return Err(ProtocolError::NotBoardMember);
                }
                // The electorate is the ancestor's board.
                let message = events::transfer_message(ancestor, descendant);
                let signers = self.valid_signers(&message, approvals);
                quorum_check(anc.params.spend_quorum, &anc.board, signers).require()?;
                let amount = self.journal_balance(ancestor);
                self.journal_wallets.insert(*ancestor, 0);
                self.credit_journal(descendant, amount);
            }

            EventBody::PaperPublish {
                paper,
                authors,
                signatures,
                keywords,
                cites,
            } => {
                if self.papers.contains_key(paper) {
                    return Err(ProtocolError::PaperExists);
                }
                require_sorted_people(authors, "authors")?;
                if authors.is_empty() {
                    return Err(ProtocolError::NotCanonical("authors must be nonempty"));
                }
                if !authors.contains(&event.actor) {
                    return Err(ProtocolError::NotAuthor);
                }
                require_sorted_strings(keywords, "keywords")?;
                require_sorted_hashes(cites, "cites")?;
                // Every author signs the paper hash itself.
                for author in authors {
                    let ok = signatures.iter().any(|s| {
                        s.signer == *author && self.registry.verify_record(paper.as_bytes(), s)
                    });
                    if !ok {
                        return Err(ProtocolError::BadAuthorSignature(author.short()));
                    }
                }
                self.papers.insert(
                    *paper,
                    PaperRecord {
                        hash: *paper,
                        authors: authors.clone(),
                        keywords: keywords.iter().cloned().collect(),
                        cites: cites.iter().copied().collect(),
                        published_in: None,
                        published_at: None,
                        market_accepted: false,
                    },
                );
            }

            EventBody::ReviewBid {
                paper,
                journal,
                fee,
            } => {
                let record = self.papers.get(paper).ok_or(ProtocolError::NoSuchPaper)?;
                if !record.is_author(&event.actor) {
                    return Err(ProtocolError::NotAuthor);
                }
                let j = self.journal(journal)?;
                if j.is_frozen() {
                    return Err(ProtocolError::JournalSuperseded);
                }
                self.debit_person(&event.actor, *fee)?;
                let id = RoundId(event_hash);
                self.rounds.insert(
                    id,
                    ReviewRound {
                        id,
                        paper: *paper,
                        journal: *journal,
                        fee: *fee,
                        payer: event.actor,
                        escrow: *fee,
                        status: RoundStatus::Bid,
                        reviewers: Vec::new(),
                        pseudonyms: Vec::new(),
                        scores: BTreeMap::new(),
                        reports: BTreeMap::new(),
                        deadline: None,
                        decision: None,
                        final_hash: None,
                        final_deadline: None,
                        final_votes: BTreeMap::new(),
                    },
                );
            }

            EventBody::ReviewAcceptVote {
                round,
                approvals,
                author_confirmation,
            } => {
                let r = self.round(round)?.clone();
                expect_status(&r, RoundStatus::Bid)?;
                let j = self.journal(&r.journal)?.clone();
                if !j.is_member(&event.actor) {
                    return Err(ProtocolError::NotBoardMember);
                }
                let message = events::review_accept_message(round);
                let signers = self.valid_signers(&message, approvals);
                let quorum = quorum_check(j.params.accept_quorum, &j.board, signers);

                let confirm_message = events::review_confirm_message(round);
                let paper = self.papers.get(&r.paper).ok_or(ProtocolError::NoSuchPaper)?;
                let confirmed = author_confirmation.as_ref().is_some_and(|s| {
                    paper.is_author(&s.signer) && self.registry.verify_record(&confirm_message, s)
                });

                let r = self.rounds.get_mut(round).expect("cloned above");
                if quorum.met() && confirmed {
                    r.status = RoundStatus::AcceptedForReview;
                } else {
                    // The bid is refunded in full; the round is over.
                    let refund = r.escrow;
                    let payer = r.payer;
                    r.escrow = 0;
                    r.status = RoundStatus::Failed;
                    self.credit_person(&payer, refund);
                }
            }

            EventBody::ReviewerAssignment {
                round,
                nonce,
                reviewers,
                pseudonyms,
            } => {
                let r = self.round(round)?.clone();
                expect_status(&r, RoundStatus::AcceptedForReview)?;
                let j = self.journal(&r.journal)?.clone();
                if !j.is_member(&event.actor) {
                    return Err(ProtocolError::NotBoardMember);
                }
                let paper = self.papers.get(&r.paper).ok_or(ProtocolError::NoSuchPaper)?;
                let eligible: Vec<PersonId> = j
                    .board
                    .iter()
                    .filter(|m| !paper.is_author(m))
                    .copied()
                    .collect();
                let expected = assign_reviewers(
                    &r.journal,
                    &r.paper,
                    *nonce,
                    &eligible,
                    j.params.reviewers_per_paper as usize,
                )?;
                // The body must carry exactly the deterministic draw:
                // identities when the journal is open, tokens when it
                // reviews anonymously.
                if j.params.anonymous_reviewers {
                    let mut expected_tokens: Vec<ContentHash> = expected
                        .iter()
                        .map(|p| pseudonym(p, &r.paper, &self.salt))
                        .collect();
                    expected_tokens.sort();
                    if !reviewers.is_empty() || *pseudonyms != expected_tokens {
                        return Err(ProtocolError::AssignmentMismatch);
                    }
                } else if *reviewers != expected || !pseudonyms.is_empty() {
                    return Err(ProtocolError::AssignmentMismatch);
                }
                let r = self.rounds.get_mut(round).expect("cloned above");
                r.pseudonyms = if j.params.anonymous_reviewers {
                    pseudonyms.clone()
                } else {
                    Vec::new()
                };
                r.reviewers = expected;
                r.deadline = Some(event.timestamp + j.params.review_days);
                r.status = RoundStatus::UnderReview;
            }

            EventBody::ReviewSubmit {
                round,
                score,
                report,
            } => {
                let r = self.round(round)?;
                expect_status(r, RoundStatus::UnderReview)?;
                if !r.is_reviewer(&event.actor) {
                    return Err(ProtocolError::NotAssigned);
                }
                if event.timestamp > r.deadline.expect("set at assignment") {
                    return Err(ProtocolError::PastDeadline);
                }
                check_score(*score)?;
                if r.scores.contains_key(&event.actor) {
                    return Err(ProtocolError::DuplicateReview);
                }
                let r = self.rounds.get_mut(round).expect("checked above");
                r.scores.insert(event.actor, *score);
                r.reports.insert(event.actor, *report);
            }

            EventBody::PublicationDecision { round, outcome } => {
                let r = self.round(round)?.clone();
                expect_status(&r, RoundStatus::UnderReview)?;
                let j = self.journal(&r.journal)?.clone();
                if !j.is_member(&event.actor) {
                    return Err(ProtocolError::NotBoardMember);
                }
                let all_in = r.scores.len() == r.reviewers.len();
                let past_deadline = event.timestamp > r.deadline.expect("set at assignment");
                if !all_in && !past_deadline {
                    return Err(ProtocolError::ReviewsPending);
                }
                if !all_in && r.scores.len() < min_reviews(r.reviewers.len()) {
                    // Too few reviews arrived: the round fails, the
                    // journal keeps its cut, the rest goes home.
                    if *outcome != DecisionOutcome::Failed {
                        return Err(ProtocolError::DecisionMismatch);
                    }
                    let payout = failed_round_payout(r.fee, j.params.fee_keep);
                    let r = self.rounds.get_mut(round).expect("cloned above");
                    r.escrow = 0;
                    r.status = RoundStatus::Failed;
                    let payer = r.payer;
                    self.credit_journal(&j.id, payout.journal_share);
                    self.credit_person(&payer, payout.refund_to_authors);
                } else {
                    let scores: Vec<u8> = r.scores.values().copied().collect();
                    let accept = accept_by_mean(&scores);
                    let expected = if accept {
                        DecisionOutcome::Accepted
                    } else {
                        DecisionOutcome::Rejected
                    };
                    if *outcome != expected {
                        return Err(ProtocolError::DecisionMismatch);
                    }
                    let deadline = event.timestamp + j.params.review_days;
                    let r = self.rounds.get_mut(round).expect("cloned above");
                    r.decision = Some(accept);
                    r.status = RoundStatus::Decided;
                    // Authors get one review window to publish the
                    // final version before settlement may proceed
                    // without publication.
                    r.final_deadline = Some(deadline);
                }
            }

            EventBody::FinalVersion { round, final_hash } => {
                let r = self.round(round)?.clone();
                expect_status(&r, RoundStatus::Decided)?;
                if r.decision != Some(true) {
                    return Err(ProtocolError::WrongStatus {
                        expected: "decided-accept",
                        got: "decided-reject",
                    });
                }
                let paper = self.papers.get(&r.paper).ok_or(ProtocolError::NoSuchPaper)?;
                if !paper.is_author(&event.actor) {
                    return Err(ProtocolError::NotAuthor);
                }
                let j = self.journal(&r.journal)?.clone();
                let r = self.rounds.get_mut(round).expect("cloned above");
                r.final_hash = Some(*final_hash);
                r.final_deadline = Some(event.timestamp + j.params.review_days);
                r.status = RoundStatus::FinalVote;
            }

            EventBody::FinalVote { round, approve } => {
                let r = self.round(round)?;
                expect_status(r, RoundStatus::FinalVote)?;
                if !r.is_reviewer(&event.actor) {
                    return Err(ProtocolError::VoteFromNonReviewer);
                }
                if r.final_votes.contains_key(&event.actor) {
                    return Err(ProtocolError::DuplicateVote);
                }
                if event.timestamp > r.final_deadline.expect("set at final version") {
                    return Err(ProtocolError::PastDeadline);
                }
                let r = self.rounds.get_mut(round).expect("checked above");
                r.final_votes.insert(event.actor, *approve);
            }

            EventBody::FeeSettlement {
                round,
                reviewer_shares,
                journal_share,
                refund,
                published,
            } => {
                let r = self.round(round)?.clone();
                let j = self.journal(&r.journal)?.clone();
                if !j.is_member(&event.actor) {
                    return Err(ProtocolError::NotBoardMember);
                }
                let expect_published = match r.status {
                    // A rejected paper settles straight away.
                    RoundStatus::Decided if r.decision == Some(false) => false,
                    // An accepted paper whose authors never produced a
                    // final version forfeits publication once the
                    // window closes.
                    RoundStatus::Decided => {
                        if event.timestamp <= r.final_deadline.expect("set at decision") {
                            return Err(ProtocolError::ReviewsPending);
                        }
                        false
                    }
                    RoundStatus::FinalVote => {
                        let all_voted = r.final_votes.len() == r.reviewers.len();
                        let window_closed =
                            event.timestamp > r.final_deadline.expect("set at final version");
                        if !all_voted && !window_closed {
                            return Err(ProtocolError::ReviewsPending);
                        }
                        // Missing votes count as rejections.
                        let approvals = r.final_votes.values().filter(|v| **v).count();
                        final_vote_passes(approvals, r.reviewers.len())
                    }
                    _ => {
                        return Err(ProtocolError::WrongStatus {
                            expected: "decided or final-vote",
                            got: r.status.name(),
                        })
                    }
                };
                let payout = split_review_fee(r.fee, j.params.fee_keep, &r.submitted_scores());
                if *reviewer_shares != payout.reviewer_shares
                    || *journal_share != payout.journal_share
                    || *refund != payout.refund_to_authors
                {
                    return Err(ProtocolError::PayoutMismatch);
                }
                if *published != expect_published {
                    return Err(ProtocolError::DecisionMismatch);
                }
                let payer = r.payer;
                {
                    let r = self.rounds.get_mut(round).expect("cloned above");
                    r.escrow = 0;
                    r.status = RoundStatus::Settled;
                }
                self.credit_journal(&j.id, payout.journal_share);
                for (person, amount) in &payout.reviewer_shares {
                    self.credit_person(person, *amount);
                }
                self.credit_person(&payer, payout.refund_to_authors);
                if expect_published {
                    let paper = self.papers.get_mut(&r.paper).expect("exists");
                    paper.published_in = Some(j.id);
                    paper.published_at = Some(event.timestamp);
                }
            }

            EventBody::CitationDeclare { paper, cites } => {
                require_sorted_hashes(cites, "cites")?;
                let record = self.papers.get_mut(paper).ok_or(ProtocolError::NoSuchPaper)?;
                if !record.is_author(&event.actor) {
                    return Err(ProtocolError::NotAuthor);
                }
                record.cites.extend(cites.iter().copied());
            }

            EventBody::MarketAsk {
                keywords,
                ask,
                capacity,
            } => {
                require_sorted_strings(keywords, "keywords")?;
                let entry = self
                    .profiles
                    .entry(event.actor)
                    .or_insert_with(|| ScientistProfile {
                        person: event.actor,
                        keywords: BTreeSet::new(),
                        rs: INITIAL_RS,
                        ask: 0,
                        capacity: 0,
                        active: 0,
                    });
                entry.keywords = keywords.iter().cloned().collect();
                entry.ask = *ask;
                entry.capacity = *capacity;
            }

            EventBody::MarketSubmit {
                paper,
                keywords,
                bid,
            } => {
                require_sorted_strings(keywords, "keywords")?;
                if keywords.is_empty() {
                    return Err(ProtocolError::NotCanonical("keywords must be nonempty"));
                }
                let record = self.papers.get(paper).ok_or(ProtocolError::NoSuchPaper)?;
                if !record.is_author(&event.actor) {
                    return Err(ProtocolError::NotAuthor);
                }
                self.debit_person(&event.actor, *bid)?;
                let id = SubmissionId(event_hash);
                self.submissions.insert(
                    id,
                    MarketSubmission {
                        id,
                        paper: *paper,
                        payer: event.actor,
                        keywords: keywords.iter().cloned().collect(),
                        bid: *bid,
                        escrow: *bid,
                        status: SubmissionStatus::Submitted,
                        reviewers: Vec::new(),
                        asks: Vec::new(),
                        paper_scores: BTreeMap::new(),
                        reports: BTreeMap::new(),
                        report_scores: BTreeMap::new(),
                        accepted: None,
                    },
                );
            }

            EventBody::MarketMatch {
                submission,
                reviewers,
            } => {
                let sub = self.submission(submission)?.clone();
                expect_sub_status(&sub, SubmissionStatus::Submitted)?;
                let authors = self
                    .papers
                    .get(&sub.paper)
                    .map(|p| p.authors.clone())
                    .unwrap_or_default();
                let pool = eligible_pool(self.profiles.values(), &sub.keywords, &authors);
                let expected = match_reviewers(sub.bid, &pool, self.config.market.group_size)?;
                if *reviewers != expected {
                    return Err(ProtocolError::MatchMismatch);
                }
                let asks: Vec<u64> = expected
                    .iter()
                    .map(|p| self.profiles[p].ask)
                    .collect();
                for p in &expected {
                    self.profiles.get_mut(p).expect("in pool").active += 1;
                }
                let sub = self.submissions.get_mut(submission).expect("cloned above");
                sub.reviewers = expected;
                sub.asks = asks;
                sub.status = SubmissionStatus::Matched;
            }

            EventBody::MarketReview {
                submission,
                score,
                report,
            } => {
                let sub = self.submission(submission)?;
                expect_sub_status(sub, SubmissionStatus::Matched)?;
                if !sub.is_reviewer(&event.actor) {
                    return Err(ProtocolError::NotMatched);
                }
                check_score(*score)?;
                if sub.paper_scores.contains_key(&event.actor) {
                    return Err(ProtocolError::DuplicateScore);
                }
                let sub = self.submissions.get_mut(submission).expect("checked above");
                sub.paper_scores.insert(event.actor, *score);
                sub.reports.insert(event.actor, *report);
                if sub.paper_scores.len() == sub.reviewers.len() {
                    sub.status = SubmissionStatus::Scored;
                }
            }

            EventBody::MarketReportScore { submission, scores } => {
                let sub = self.submission(submission)?;
                expect_sub_status(sub, SubmissionStatus::Scored)?;
                if !sub.is_reviewer(&event.actor) {
                    return Err(ProtocolError::NotMatched);
                }
                if sub
                    .report_scores
                    .keys()
                    .any(|(scorer, _)| *scorer == event.actor)
                {
                    return Err(ProtocolError::DuplicateScore);
                }
                // Exactly one score for each *other* reviewer.
                let mut seen = BTreeSet::new();
                for (scoree, score) in scores {
                    if *scoree == event.actor {
                        return Err(ProtocolError::SelfScore);
                    }
                    if !sub.is_reviewer(scoree) {
                        return Err(ProtocolError::NotMatched);
                    }
                    check_score(*score)?;
                    if !seen.insert(*scoree) {
                        return Err(ProtocolError::NotCanonical("duplicate scoree"));
                    }
                }
                if seen.len() != sub.reviewers.len() - 1 {
                    return Err(ProtocolError::IncompleteReportScores);
                }
                let n = sub.reviewers.len();
                let sub = self.submissions.get_mut(submission).expect("checked above");
                for (scoree, score) in scores {
                    sub.report_scores.insert((event.actor, *scoree), *score);
                }
                if sub.report_scores.len() == n * (n - 1) {
                    sub.status = SubmissionStatus::ReportScored;
                }
            }

            EventBody::MarketSettlement {
                submission,
                paid,
                refund,
                accepted,
            } => {
                let sub = self.submission(submission)?.clone();
                expect_sub_status(&sub, SubmissionStatus::ReportScored)?;
                let profiles = &self.profiles;
                let outcome = settle(&sub, &self.config.market, |p| {
                    profiles.get(p).map_or(INITIAL_RS, |pr| pr.rs)
                });
                let expected_paid: Vec<(PersonId, u64)> = outcome
                    .reviewers
                    .iter()
                    .filter(|r| r.paid)
                    .map(|r| (r.person, r.ask))
                    .collect();
                if *paid != expected_paid
                    || *refund != outcome.refund_to_authors
                    || *accepted != outcome.accepted
                {
                    return Err(ProtocolError::SettlementMismatch);
                }
                for r in &outcome.reviewers {
                    if r.paid {
                        self.credit_person(&r.person, r.ask);
                    }
                    let profile = self.profiles.get_mut(&r.person).expect("matched");
                    profile.rs = r.rs_after;
                    profile.active = profile.active.saturating_sub(1);
                }
                self.credit_person(&sub.payer, outcome.refund_to_authors);
                let record = self.papers.get_mut(&sub.paper).expect("exists");
                if outcome.accepted {
                    record.market_accepted = true;
                }
                let sub = self.submissions.get_mut(submission).expect("cloned above");
                sub.escrow = 0;
                sub.accepted = Some(outcome.accepted);
                sub.status = if outcome.accepted {
                    SubmissionStatus::Settled
                } else {
                    SubmissionStatus::Withdrawn
                };
            }
        }

        self.events_applied += 1;
        debug_assert!(
            self.conservation_holds(),
            "money conservation violated at event {}",
            event.seq
        );
        Ok(())
    }

    fn round(&self, id: &RoundId) -> Result<&ReviewRound, ProtocolError> {
        self.rounds.get(id).ok_or(ProtocolError::NoSuchRound)
    }

    fn submission(&self, id: &SubmissionId) -> Result<&MarketSubmission, ProtocolError> {
        self.submissions
            .get(id)
            .ok_or(ProtocolError::NoSuchSubmission)
    }

    /// Create the descendant journal produced by a modify or join, with
    /// `endowment` already-escrowed micro-credits as its opening
    /// balance.
    fn create_descendant(
        &mut self,
        old: &Journal,
        board: Vec<PersonId>,
        params: crate::journal::JournalParams,
        endowment: u64,
        now: u64,
    ) -> Result<JournalId, ProtocolError> {
        let id = crate::journal::journal_id(&board, &params, Some(&old.id));
        if self.journals.contains_key(&id) {
            return Err(ProtocolError::JournalExists);
        }
        self.journals.insert(
            id,
            Journal {
                id,
                board,
                ancestor: Some(old.id),
                params,
                created_at: now,
                superseded_by: None,
            },
        );
        self.journal_wallets.insert(id, endowment);
        self.journals
            .get_mut(&old.id)
            .expect("old journal exists")
            .superseded_by = Some(id);
        Ok(id)
    }

    /// Everything the reputation solver needs, evaluated at `at_day`.
    /// Service intervals fall out of journal lifetimes: a snapshot's
    /// board serves from its creation until its descendant's creation
    /// (or the evaluation day, while it lives).
    pub fn reputation_inputs(&self, at_day: u64) -> ReputationInputs {
        let mut inputs = ReputationInputs::default();
        for (id, journal) in &self.journals {
            inputs.boards.insert(*id, journal.board.clone());
            let end = journal
                .superseded_by
                .and_then(|d| self.journals.get(&d))
                .map(|d| d.created_at)
                .unwrap_or(at_day)
                .max(journal.created_at);
            for member in &journal.board {
                inputs.intervals.push(ServiceInterval {
                    person: *member,
                    journal: *id,
                    from_day: journal.created_at,
                    to_day: end,
                });
            }
        }
        for (hash, paper) in &self.papers {
            if let Some(journal) = paper.published_in {
                inputs.graph.add_paper(*hash, journal);
            }
        }
        for (hash, paper) in &self.papers {
            if paper.published_in.is_some() {
                for cited in &paper.cites {
                    inputs.graph.add_citation(*hash, *cited);
                }
            }
        }
        inputs
    }

    /// The citation graph alone (published papers and their edges).
    pub fn citation_graph(&self) -> CitationGraph {
        self.reputation_inputs(self.day).graph
    }
}

impl Canon for State {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.day);
        self.salt.encode(w);
        self.registry.encode(w);
        w.seq(self.wallets.len());
        for (p, b) in &self.wallets {
            p.encode(w);
            w.u64(*b);
        }
        w.seq(self.journal_wallets.len());
        for (j, b) in &self.journal_wallets {
            j.encode(w);
            w.u64(*b);
        }
        w.u64(self.minted);
        w.seq(self.journals.len());
        for j in self.journals.values() {
            j.encode(w);
        }
        w.seq(self.pending_joins.len());
        for p in self.pending_joins.values() {
            p.encode(w);
        }
        w.seq(self.papers.len());
        for p in self.papers.values() {
            p.encode(w);
        }
        w.seq(self.rounds.len());
        for r in self.rounds.values() {
            r.encode(w);
        }
        w.seq(self.profiles.len());
        for p in self.profiles.values() {
            p.encode(w);
        }
        w.seq(self.submissions.len());
        for s in self.submissions.values() {
            s.encode(w);
        }
        w.u64(self.events_applied);
    }
}

fn expect_status(round: &ReviewRound, expected: RoundStatus) -> Result<(), ProtocolError> {
    if round.status == expected {
        Ok(())
    } else {
        Err(ProtocolError::WrongStatus {
            expected: expected.name(),
            got: round.status.name(),
        })
    }
}

fn expect_sub_status(
    sub: &MarketSubmission,
    expected: SubmissionStatus,
) -> Result<(), ProtocolError> {
    if sub.status == expected {
        Ok(())
    } else {
        Err(ProtocolError::WrongStatus {
            expected: expected.name(),
            got: sub.status.name(),
        })
    }
}

fn require_sorted_people(items: &[PersonId], what: &'static str) -> Result<(), ProtocolError> {
    if items.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(ProtocolError::NotCanonical(what))
    }
}

fn require_sorted_strings(items: &[String], what: &'static str) -> Result<(), ProtocolError> {
    if items.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(ProtocolError::NotCanonical(what))
    }
}

fn require_sorted_hashes(items: &[ContentHash], what: &'static str) -> Result<(), ProtocolError> {
    if items.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(ProtocolError::NotCanonical(what))
    }
}
