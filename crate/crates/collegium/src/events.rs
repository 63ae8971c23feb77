//! The protocol's event vocabulary.
//!
//! Every state transition is exactly one signed event. An event's
//! canonical bytes are `seq ‖ prev_hash ‖ timestamp ‖ actor ‖ kind ‖
//! body ‖ signature`; the signature covers everything before it, and
//! the event's content address covers everything including it, so a
//! single flipped bit anywhere breaks either the signature or the hash
//! chain.
//!
//! Governance bodies carry embedded approval signatures (one per
//! consenting member) over a domain-tagged message; the
//! `*_message` helpers here are the one place those messages are
//! defined, so signers and verifiers can never drift apart.

use crate::canonical::{Canon, DecodeError, Reader, Writer};
use crate::identity::{content_hash, ContentHash, PersonId, Scheme, SignatureRecord};
use crate::journal::{JournalChange, JournalId, JournalParams};
use crate::money::Ppm;
use crate::review::RoundId;
use crate::market::SubmissionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    KeyRegister,
    JournalCreate,
    JournalModify,
    JoinBid,
    JoinDecision,
    BalanceSpend,
    BalanceTransfer,
    PaperPublish,
    ReviewBid,
    ReviewAcceptVote,
    ReviewerAssignment,
    ReviewSubmit,
    PublicationDecision,
    FinalVersion,
    FinalVote,
    FeeSettlement,
    CitationDeclare,
    MarketAsk,
    MarketSubmit,
    MarketMatch,
    MarketReview,
    MarketReportScore,
    MarketSettlement,
}

impl EventKind {
    pub fn tag(&self) -> u8 {
        use EventKind::*;
        match self {
            KeyRegister => 1,
            JournalCreate => 2,
            JournalModify => 3,
            JoinBid => 4,
            JoinDecision => 5,
            BalanceSpend => 6,
            BalanceTransfer => 7,
            PaperPublish => 8,
            ReviewBid => 9,
            ReviewAcceptVote => 10,
            ReviewerAssignment => 11,
            ReviewSubmit => 12,
            PublicationDecision => 13,
            FinalVersion => 14,
            FinalVote => 15,
            FeeSettlement => 16,
            CitationDeclare => 17,
            MarketAsk => 18,
            MarketSubmit => 19,
            MarketMatch => 20,
            MarketReview => 21,
            MarketReportScore => 22,
            MarketSettlement => 23,
        }
    }

    pub fn from_tag(tag: u8) -> Option<EventKind> {
        use EventKind::*;
        Some(match tag {
            1 => KeyRegister,
            2 => JournalCreate,
            3 => JournalModify,
            4 => JoinBid,
            5 => JoinDecision,
            6 => BalanceSpend,
            7 => BalanceTransfer,
            8 => PaperPublish,
            9 => ReviewBid,
            10 => ReviewAcceptVote,
            11 => ReviewerAssignment,
            12 => ReviewSubmit,
            13 => PublicationDecision,
            14 => FinalVersion,
            15 => FinalVote,
            16 => FeeSettlement,
            17 => CitationDeclare,
            18 => MarketAsk,
            19 => MarketSubmit,
            20 => MarketMatch,
            21 => MarketReview,
            22 => MarketReportScore,
            23 => MarketSettlement,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        use EventKind::*;
        match self {
            KeyRegister => "KeyRegister",
            JournalCreate => "JournalCreate",
            JournalModify => "JournalModify",
            JoinBid => "JoinBid",
            JoinDecision => "JoinDecision",
            BalanceSpend => "BalanceSpend",
            BalanceTransfer => "BalanceTransfer",
            PaperPublish => "PaperPublish",
            ReviewBid => "ReviewBid",
            ReviewAcceptVote => "ReviewAcceptVote",
            ReviewerAssignment => "ReviewerAssignment",
            ReviewSubmit => "ReviewSubmit",
            PublicationDecision => "PublicationDecision",
            FinalVersion => "FinalVersion",
            FinalVote => "FinalVote",
            FeeSettlement => "FeeSettlement",
            CitationDeclare => "CitationDeclare",
            MarketAsk => "MarketAsk",
            MarketSubmit => "MarketSubmit",
            MarketMatch => "MarketMatch",
            MarketReview => "MarketReview",
            MarketReportScore => "MarketReportScore",
            MarketSettlement => "MarketSettlement",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionOutcome {
    Accepted,
    Rejected,
    /// Deadline passed with too few reviews; the round fails and the
    /// reviewer pool returns to the authors.
    Failed,
}

impl DecisionOutcome {
    pub fn name(&self) -> &'static str {
        match self {
            DecisionOutcome::Accepted => "accepted",
            DecisionOutcome::Rejected => "rejected",
            DecisionOutcome::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventBody {
    /// Registers a key (and mints its starting balance — the only
    /// money-creating event).
    KeyRegister {
        scheme: Scheme,
        public: Vec<u8>,
        validated: bool,
        initial_balance: u64,
    },
    JournalCreate {
        founders: Vec<PersonId>,
        params: JournalParams,
        signatures: Vec<SignatureRecord>,
    },
    JournalModify {
        journal: JournalId,
        change: JournalChange,
        approvals: Vec<SignatureRecord>,
    },
    /// The actor (candidate) escrows `bid` pending the board's vote.
    JoinBid {
        journal: JournalId,
        bid: u64,
        expires_day: u64,
    },
    JoinDecision {
        journal: JournalId,
        proposal: ContentHash,
        approvals: Vec<SignatureRecord>,
    },
    BalanceSpend {
        journal: JournalId,
        amount: u64,
        recipient: PersonId,
        approvals: Vec<SignatureRecord>,
    },
    /// Moves the full ancestor balance to its descendant.
    BalanceTransfer {
        ancestor: JournalId,
        descendant: JournalId,
        approvals: Vec<SignatureRecord>,
    },
    PaperPublish {
        paper: ContentHash,
        authors: Vec<PersonId>,
        signatures: Vec<SignatureRecord>,
        keywords: Vec<String>,
        cites: Vec<ContentHash>,
    },
    ReviewBid {
        paper: ContentHash,
        journal: JournalId,
        fee: u64,
    },
    ReviewAcceptVote {
        round: RoundId,
        approvals: Vec<SignatureRecord>,
        author_confirmation: Option<SignatureRecord>,
    },
    ReviewerAssignment {
        round: RoundId,
        nonce: u64,
        /// Assigned reviewers when the journal publishes identities…
        reviewers: Vec<PersonId>,
        /// …or pseudonym tokens when it does not. Exactly one of the
        /// two is populated.
        pseudonyms: Vec<ContentHash>,
    },
    ReviewSubmit {
        round: RoundId,
        score: u8,
        report: ContentHash,
    },
    PublicationDecision {
        round: RoundId,
        outcome: DecisionOutcome,
    },
    FinalVersion {
        round: RoundId,
        final_hash: ContentHash,
    },
    FinalVote {
        round: RoundId,
        approve: bool,
    },
    FeeSettlement {
        round: RoundId,
        reviewer_shares: Vec<(PersonId, u64)>,
        journal_share: u64,
        refund: u64,
        published: bool,
    },
    CitationDeclare {
        paper: ContentHash,
        cites: Vec<ContentHash>,
    },
    /// Upserts the actor's market profile.
    MarketAsk {
        keywords: Vec<String>,
        ask: u64,
        capacity: u32,
    },
    MarketSubmit {
        paper: ContentHash,
        keywords: Vec<String>,
        bid: u64,
    },
    MarketMatch {
        submission: SubmissionId,
        reviewers: Vec<PersonId>,
    },
    MarketReview {
        submission: SubmissionId,
        score: u8,
        report: ContentHash,
    },
    MarketReportScore {
        submission: SubmissionId,
        scores: Vec<(PersonId, u8)>,
    },
    MarketSettlement {
        submission: SubmissionId,
        paid: Vec<(PersonId, u64)>,
        refund: u64,
        accepted: bool,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        use EventBody::*;
        match self {
            KeyRegister { .. } => EventKind::KeyRegister,
            JournalCreate { .. } => EventKind::JournalCreate,
            JournalModify { .. } => EventKind::JournalModify,
            JoinBid { .. } => EventKind::JoinBid,
            JoinDecision { .. } => EventKind::JoinDecision,
            BalanceSpend { .. } => EventKind::BalanceSpend,
            BalanceTransfer { .. } => EventKind::BalanceTransfer,
            PaperPublish { .. } => EventKind::PaperPublish,
            ReviewBid { .. } => EventKind::ReviewBid,
            ReviewAcceptVote { .. } => EventKind::ReviewAcceptVote,
            ReviewerAssignment { .. } => EventKind::ReviewerAssignment,
            ReviewSubmit { .. } => EventKind::ReviewSubmit,
            PublicationDecision { .. } => EventKind::PublicationDecision,
            FinalVersion { .. } => EventKind::FinalVersion,
            FinalVote { .. } => EventKind::FinalVote,
            FeeSettlement { .. } => EventKind::FeeSettlement,
            CitationDeclare { .. } => EventKind::CitationDeclare,
            MarketAsk { .. } => EventKind::MarketAsk,
            MarketSubmit { .. } => EventKind::MarketSubmit,
            MarketMatch { .. } => EventKind::MarketMatch,
            MarketReview { .. } => EventKind::MarketReview,
            MarketReportScore { .. } => EventKind::MarketReportScore,
            MarketSettlement { .. } => EventKind::MarketSettlement,
        }
    }
}

fn encode_sigs(w: &mut Writer, sigs: &[SignatureRecord]) {
    w.seq(sigs.len());
    for s in sigs {
        s.encode(w);
    }
}

fn decode_sig(r: &mut Reader) -> Result<SignatureRecord, DecodeError> {
    Ok(SignatureRecord {
        signer: PersonId(r.raw32()?),
        payload_hash: ContentHash(r.raw32()?),
        bytes: r.bytes()?.to_vec(),
    })
}

fn decode_sigs(r: &mut Reader) -> Result<Vec<SignatureRecord>, DecodeError> {
    let n = r.seq()?;
    (0..n).map(|_| decode_sig(r)).collect()
}

fn decode_persons(r: &mut Reader) -> Result<Vec<PersonId>, DecodeError> {
    let n = r.seq()?;
    (0..n).map(|_| Ok(PersonId(r.raw32()?))).collect()
}

fn decode_hashes(r: &mut Reader) -> Result<Vec<ContentHash>, DecodeError> {
    let n = r.seq()?;
    (0..n).map(|_| Ok(ContentHash(r.raw32()?))).collect()
}

fn decode_strings(r: &mut Reader) -> Result<Vec<String>, DecodeError> {
    let n = r.seq()?;
    (0..n).map(|_| r.str()).collect()
}

fn decode_params(r: &mut Reader) -> Result<JournalParams, DecodeError> {
    let ppm = |r: &mut Reader| {
        let pos = r.pos();
        Ppm::new(r.u32()?).ok_or(DecodeError::Invalid {
            pos,
            what: "fraction over one",
        })
    };
    Ok(JournalParams {
        fee_keep: ppm(r)?,
        anonymous_reviewers: r.bool()?,
        review_days: r.u64()?,
        reviewers_per_paper: r.u32()?,
        accept_quorum: ppm(r)?,
        spend_quorum: ppm(r)?,
        modify_quorum: ppm(r)?,
    })
}

impl Canon for EventBody {
    fn encode(&self, w: &mut Writer) {
        use EventBody::*;
        w.u8(self.kind().tag());
        match self {
            KeyRegister {
                scheme,
                public,
                validated,
                initial_balance,
            } => {
                w.str(scheme.as_str());
                w.bytes(public);
                w.bool(*validated);
                w.u64(*initial_balance);
            }
            JournalCreate {
                founders,
                params,
                signatures,
            } => {
                w.seq(founders.len());
                for f in founders {
                    f.encode(w);
                }
                params.encode(w);
                encode_sigs(w, signatures);
            }
            JournalModify {
                journal,
                change,
                approvals,
            } => {
                journal.encode(w);
                change.encode(w);
                encode_sigs(w, approvals);
            }
            JoinBid {
                journal,
                bid,
                expires_day,
            } => {
                journal.encode(w);
                w.u64(*bid);
                w.u64(*expires_day);
            }
            JoinDecision {
                journal,
                proposal,
                approvals,
            } => {
                journal.encode(w);
                proposal.encode(w);
                encode_sigs(w, approvals);
            }
            BalanceSpend {
                journal,
                amount,
                recipient,
                approvals,
            } => {
                journal.encode(w);
                w.u64(*amount);
                recipient.encode(w);
                encode_sigs(w, approvals);
            }
            BalanceTransfer {
                ancestor,
                descendant,
                approvals,
            } => {
                ancestor.encode(w);
                descendant.encode(w);
                encode_sigs(w, approvals);
            }
            PaperPublish {
                paper,
                authors,
                signatures,
                keywords,
                cites,
            } => {
                paper.encode(w);
                w.seq(authors.len());
                for a in authors {
                    a.encode(w);
                }
                encode_sigs(w, signatures);
                w.seq(keywords.len());
                for k in keywords {
                    w.str(k);
                }
                w.seq(cites.len());
                for c in cites {
                    c.encode(w);
                }
            }
            ReviewBid {
                paper,
                journal,
                fee,
            } => {
                paper.encode(w);
                journal.encode(w);
                w.u64(*fee);
            }
            ReviewAcceptVote {
                round,
                approvals,
                author_confirmation,
            } => {
                round.encode(w);
                encode_sigs(w, approvals);
                w.opt(author_confirmation.as_ref(), |w, s| s.encode(w));
            }
            ReviewerAssignment {
                round,
                nonce,
                reviewers,
                pseudonyms,
            } => {
                round.encode(w);
                w.u64(*nonce);
                w.seq(reviewers.len());
                for r in reviewers {
                    r.encode(w);
                }
                w.seq(pseudonyms.len());
                for p in pseudonyms {
                    p.encode(w);
                }
            }
            ReviewSubmit {
                round,
                score,
                report,
            } => {
                round.encode(w);
                w.u8(*score);
                report.encode(w);
            }
            PublicationDecision { round, outcome } => {
                round.encode(w);
                w.u8(match outcome {
                    DecisionOutcome::Accepted => 0,
                    DecisionOutcome::Rejected => 1,
                    DecisionOutcome::Failed => 2,
                });
            }
            FinalVersion { round, final_hash } => {
                round.encode(w);
                final_hash.encode(w);
            }
            FinalVote { round, approve } => {
                round.encode(w);
                w.bool(*approve);
            }
            FeeSettlement {
                round,
                reviewer_shares,
                journal_share,
                refund,
                published,
            } => {
                round.encode(w);
                w.seq(reviewer_shares.len());
                for (p, r) in reviewer_shares {
                    p.encode(w);
                    w.u64(*r);
                }
                w.u64(*journal_share);
                w.u64(*refund);
                w.bool(*published);
            }
            CitationDeclare { paper, cites } => {
                paper.encode(w);
                w.seq(cites.len());
                for c in cites {
                    c.encode(w);
                }
            }
            MarketAsk {
                keywords,
                ask,
                capacity,
            } => {
                w.seq(keywords.len());
                for k in keywords {
                    w.str(k);
                }
                w.u64(*ask);
                w.u32(*capacity);
            }
            MarketSubmit {
                paper,
                keywords,
                bid,
            } => {
                paper.encode(w);
                w.seq(keywords.len());
                for k in keywords {
                    w.str(k);
                }
                w.u64(*bid);
            }
            MarketMatch {
                submission,
                reviewers,
            } => {
                submission.encode(w);
                w.seq(reviewers.len());
                for r in reviewers {
                    r.encode(w);
                }
            }
            MarketReview {
                submission,
                score,
                report,
            } => {
                submission.encode(w);
                w.u8(*score);
                report.encode(w);
            }
            MarketReportScore { submission, scores } => {
                submission.encode(w);
                w.seq(scores.len());
                for (p, s) in scores {
                    p.encode(w);
                    w.u8(*s);
                }
            }
            MarketSettlement {
                submission,
                paid,
                refund,
                accepted,
            } => {
                submission.encode(w);
                w.seq(paid.len());
                for (p, a) in paid {
                    p.encode(w);
                    w.u64(*a);
                }
                w.u64(*refund);
                w.bool(*accepted);
            }
        }
    }
}

impl EventBody {
    pub fn decode(r: &mut Reader) -> Result<EventBody, DecodeError> {
        let pos = r.pos();
        let tag = r.u8()?;
        let kind = EventKind::from_tag(tag).ok_or(DecodeError::Invalid {
            pos,
            what: "event kind",
        })?;
        Ok(match kind {
            EventKind::KeyRegister => {
                let pos = r.pos();
                let scheme: Scheme = r
                    .str()?
                    .parse()
                    .map_err(|_| DecodeError::Invalid { pos, what: "scheme" })?;
                EventBody::KeyRegister {
                    scheme,
                    public: r.bytes()?.to_vec(),
                    validated: r.bool()?,
                    initial_balance: r.u64()?,
                }
            }
            EventKind::JournalCreate => EventBody::JournalCreate {
                founders: decode_persons(r)?,
                params: decode_params(r)?,
                signatures: decode_sigs(r)?,
            },
            EventKind::JournalModify => {
                let journal = JournalId(ContentHash(r.raw32()?));
                let pos = r.pos();
                let change = match r.u8()? {
                    0 => JournalChange::Board {
                        add: decode_persons(r)?,
                        remove: decode_persons(r)?,
                    },
                    1 => JournalChange::Params(decode_params(r)?),
                    _ => {
                        return Err(DecodeError::Invalid {
                            pos,
                            what: "change tag",
                        })
                    }
                };
                EventBody::JournalModify {
                    journal,
                    change,
                    approvals: decode_sigs(r)?,
                }
            }
            EventKind::JoinBid => EventBody::JoinBid {
                journal: JournalId(ContentHash(r.raw32()?)),
                bid: r.u64()?,
                expires_day: r.u64()?,
            },
            EventKind::JoinDecision => EventBody::JoinDecision {
                journal: JournalId(ContentHash(r.raw32()?)),
                proposal: ContentHash(r.raw32()?),
                approvals: decode_sigs(r)?,
            },
            EventKind::BalanceSpend => EventBody::BalanceSpend {
                journal: JournalId(ContentHash(r.raw32()?)),
                amount: r.u64()?,
                recipient: PersonId(r.raw32()?),
                approvals: decode_sigs(r)?,
            },
            EventKind::BalanceTransfer => EventBody::BalanceTransfer {
                ancestor: JournalId(ContentHash(r.raw32()?)),
                descendant: JournalId(ContentHash(r.raw32()?)),
                approvals: decode_sigs(r)?,
            },
            EventKind::PaperPublish => EventBody::PaperPublish {
                paper: ContentHash(r.raw32()?),
                authors: decode_persons(r)?,
                signatures: decode_sigs(r)?,
                keywords: decode_strings(r)?,
                cites: decode_hashes(r)?,
            },
            EventKind::ReviewBid => EventBody::ReviewBid {
                paper: ContentHash(r.raw32()?),
                journal: JournalId(ContentHash(r.raw32()?)),
                fee: r.u64()?,
            },
            EventKind::ReviewAcceptVote => EventBody::ReviewAcceptVote {
                round: RoundId(ContentHash(r.raw32()?)),
                approvals: decode_sigs(r)?,
                author_confirmation: r.opt(decode_sig)?,
            },
            EventKind::ReviewerAssignment => EventBody::ReviewerAssignment {
                round: RoundId(ContentHash(r.raw32()?)),
                nonce: r.u64()?,
                reviewers: decode_persons(r)?,
                pseudonyms: decode_hashes(r)?,
            },
            EventKind::ReviewSubmit => EventBody::ReviewSubmit {
                round: RoundId(ContentHash(r.raw32()?)),
                score: r.u8()?,
                report: ContentHash(r.raw32()?),
            },
            EventKind::PublicationDecision => {
                let round = RoundId(ContentHash(r.raw32()?));
                let pos = r.pos();
                let outcome = match r.u8()? {
                    0 => DecisionOutcome::Accepted,
                    1 => DecisionOutcome::Rejected,
                    2 => DecisionOutcome::Failed,
                    _ => {
                        return Err(DecodeError::Invalid {
                            pos,
                            what: "decision outcome",
                        })
                    }
                };
                EventBody::PublicationDecision { round, outcome }
            }
            EventKind::FinalVersion => EventBody::FinalVersion {
                round: RoundId(ContentHash(r.raw32()?)),
                final_hash: ContentHash(r.raw32()?),
            },
            EventKind::FinalVote => EventBody::FinalVote {
                round: RoundId(ContentHash(r.raw32()?)),
                approve: r.bool()?,
            },
            EventKind::FeeSettlement => {
                let round = RoundId(ContentHash(r.raw32()?));
                let n = r.seq()?;
                let mut reviewer_shares = Vec::with_capacity(n);
                for _ in 0..n {
                    reviewer_shares.push((PersonId(r.raw32()?), r.u64()?));
                }
                EventBody::FeeSettlement {
                    round,
                    reviewer_shares,
                    journal_share: r.u64()?,
                    refund: r.u64()?,
                    published: r.bool()?,
                }
            }
            EventKind::CitationDeclare => EventBody::CitationDeclare {
                paper: ContentHash(r.raw32()?),
                cites: decode_hashes(r)?,
            },
            EventKind::MarketAsk => EventBody::MarketAsk {
                keywords: decode_strings(r)?,
                ask: r.u64()?,
                capacity: r.u32()?,
            },
            EventKind::MarketSubmit => EventBody::MarketSubmit {
                paper: ContentHash(r.raw32()?),
                keywords: decode_strings(r)?,
                bid: r.u64()?,
            },
            EventKind::MarketMatch => EventBody::MarketMatch {
                submission: SubmissionId(ContentHash(r.raw32()?)),
                reviewers: decode_persons(r)?,
            },
            EventKind::MarketReview => EventBody::MarketReview {
                submission: SubmissionId(ContentHash(r.raw32()?)),
                score: r.u8()?,
                report: ContentHash(r.raw32()?),
            },
            EventKind::MarketReportScore => {
                let submission = SubmissionId(ContentHash(r.raw32()?));
                let n = r.seq()?;
                let mut scores = Vec::with_capacity(n);
                for _ in 0..n {
                    scores.push((PersonId(r.raw32()?), r.u8()?));
                }
                EventBody::MarketReportScore { submission, scores }
            }
            EventKind::MarketSettlement => {
                let submission = SubmissionId(ContentHash(r.raw32()?));
                let n = r.seq()?;
                let mut paid = Vec::with_capacity(n);
                for _ in 0..n {
                    paid.push((PersonId(r.raw32()?), r.u64()?));
                }
                EventBody::MarketSettlement {
                    submission,
                    paid,
                    refund: r.u64()?,
                    accepted: r.bool()?,
                }
            }
        })
    }
}

/// One signed, chained protocol record.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Position in the log; the genesis event has seq 0.
    pub seq: u64,
    /// Hash of the previous event; all-zero for genesis.
    pub prev_hash: ContentHash,
    /// Simulated days since epoch.
    pub timestamp: u64,
    pub actor: PersonId,
    pub body: EventBody,
    /// Actor's signature over everything above.
    pub signature: SignatureRecord,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    /// The bytes the actor signs: the full record minus the signature.
    pub fn signing_bytes(
        seq: u64,
        prev_hash: &ContentHash,
        timestamp: u64,
        actor: &PersonId,
        body: &EventBody,
    ) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(seq);
        prev_hash.encode(&mut w);
        w.u64(timestamp);
        actor.encode(&mut w);
        body.encode(&mut w);
        w.into_bytes()
    }

    /// Content address of the full record, signature included.
    pub fn hash(&self) -> ContentHash {
        content_hash(&self.canon_bytes())
    }

    pub fn decode_bytes(bytes: &[u8]) -> Result<Event, DecodeError> {
        let mut r = Reader::new(bytes);
        let event = Event {
            seq: r.u64()?,
            prev_hash: ContentHash(r.raw32()?),
            timestamp: r.u64()?,
            actor: PersonId(r.raw32()?),
            body: EventBody::decode(&mut r)?,
            signature: decode_sig(&mut r)?,
        };
        r.done()?;
        Ok(event)
    }
}

impl Canon for Event {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.seq);
        self.prev_hash.encode(w);
        w.u64(self.timestamp);
        self.actor.encode(w);
        self.body.encode(w);
        self.signature.encode(w);
    }
}

// ---------------------------------------------------------------------------
// Messages that embedded approval signatures cover.

/// Founders sign the journal-id preimage itself, binding them to the
/// exact (board, params, no ancestor) they are creating.
pub fn journal_create_message(founders: &[PersonId], params: &JournalParams) -> Vec<u8> {
    crate::journal::id_preimage(founders, params, None)
}

pub fn journal_modify_message(journal: &JournalId, change: &JournalChange) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("modify");
    journal.encode(&mut w);
    change.encode(&mut w);
    w.into_bytes()
}

pub fn join_approval_message(journal: &JournalId, proposal: &ContentHash) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("join-approve");
    journal.encode(&mut w);
    proposal.encode(&mut w);
    w.into_bytes()
}

pub fn spend_message(journal: &JournalId, amount: u64, recipient: &PersonId) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("spend");
    journal.encode(&mut w);
    w.u64(amount);
    recipient.encode(&mut w);
    w.into_bytes()
}

pub fn transfer_message(ancestor: &JournalId, descendant: &JournalId) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("transfer");
    ancestor.encode(&mut w);
    descendant.encode(&mut w);
    w.into_bytes()
}

pub fn review_accept_message(round: &RoundId) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("review-accept");
    round.encode(&mut w);
    w.into_bytes()
}

pub fn review_confirm_message(round: &RoundId) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("review-confirm");
    round.encode(&mut w);
    w.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{keygen, sign};

    fn person(n: u8) -> PersonId {
        PersonId([n; 32])
    }

    fn hash(n: u8) -> ContentHash {
        ContentHash([n; 32])
    }

    fn sample_params() -> JournalParams {
        JournalParams {
            fee_keep: Ppm::from_f64(0.2),
            anonymous_reviewers: true,
            review_days: 14,
            reviewers_per_paper: 3,
            accept_quorum: Ppm::from_f64(0.5),
            spend_quorum: Ppm::from_f64(0.5),
            modify_quorum: Ppm::from_f64(0.75),
        }
    }

    fn sample_sig() -> SignatureRecord {
        SignatureRecord {
            signer: person(1),
            payload_hash: hash(2),
            bytes: vec![1, 2, 3],
        }
    }

    fn sample_bodies() -> Vec<EventBody> {
        vec![
            EventBody::KeyRegister {
                scheme: Scheme::Ed25519,
                public: vec![5; 32],
                validated: true,
                initial_balance: 10,
            },
            EventBody::JournalCreate {
                founders: vec![person(1), person(2)],
                params: sample_params(),
                signatures: vec![sample_sig()],
            },
            EventBody::JournalModify {
                journal: JournalId(hash(1)),
                change: JournalChange::Board {
                    add: vec![person(3)],
                    remove: vec![],
                },
                approvals: vec![sample_sig()],
            },
            EventBody::JournalModify {
                journal: JournalId(hash(1)),
                change: JournalChange::Params(sample_params()),
                approvals: vec![],
            },
            EventBody::JoinBid {
                journal: JournalId(hash(1)),
                bid: 100,
                expires_day: 14,
            },
            EventBody::JoinDecision {
                journal: JournalId(hash(1)),
                proposal: hash(9),
                approvals: vec![sample_sig()],
            },
            EventBody::BalanceSpend {
                journal: JournalId(hash(1)),
                amount: 7,
                recipient: person(4),
                approvals: vec![sample_sig()],
            },
            EventBody::BalanceTransfer {
                ancestor: JournalId(hash(1)),
                descendant: JournalId(hash(2)),
                approvals: vec![],
            },
            EventBody::PaperPublish {
                paper: hash(3),
                authors: vec![person(1)],
                signatures: vec![sample_sig()],
                keywords: vec!["physics".into()],
                cites: vec![hash(4)],
            },
            EventBody::ReviewBid {
                paper: hash(3),
                journal: JournalId(hash(1)),
                fee: 1000,
            },
            EventBody::ReviewAcceptVote {
                round: RoundId(hash(5)),
                approvals: vec![sample_sig()],
                author_confirmation: Some(sample_sig()),
            },
            EventBody::ReviewerAssignment {
                round: RoundId(hash(5)),
                nonce: 7,
                reviewers: vec![person(2), person(3)],
                pseudonyms: vec![],
            },
            EventBody::ReviewSubmit {
                round: RoundId(hash(5)),
                score: 4,
                report: hash(6),
            },
            EventBody::PublicationDecision {
                round: RoundId(hash(5)),
                outcome: DecisionOutcome::Accepted,
            },
            EventBody::FinalVersion {
                round: RoundId(hash(5)),
                final_hash: hash(7),
            },
            EventBody::FinalVote {
                round: RoundId(hash(5)),
                approve: true,
            },
            EventBody::FeeSettlement {
                round: RoundId(hash(5)),
                reviewer_shares: vec![(person(2), 400), (person(3), 400)],
                journal_share: 200,
                refund: 0,
                published: true,
            },
            EventBody::CitationDeclare {
                paper: hash(3),
                cites: vec![hash(8)],
            },
            EventBody::MarketAsk {
                keywords: vec!["physics".into()],
                ask: 10,
                capacity: 3,
            },
            EventBody::MarketSubmit {
                paper: hash(3),
                keywords: vec!["physics".into()],
                bid: 30,
            },
            EventBody::MarketMatch {
                submission: SubmissionId(hash(9)),
                reviewers: vec![person(2), person(3), person(4)],
            },
            EventBody::MarketReview {
                submission: SubmissionId(hash(9)),
                score: 5,
                report: hash(10),
            },
            EventBody::MarketReportScore {
                submission: SubmissionId(hash(9)),
                scores: vec![(person(3), 4), (person(4), 5)],
            },
            EventBody::MarketSettlement {
                submission: SubmissionId(hash(9)),
                paid: vec![(person(2), 10)],
                refund: 20,
                accepted: true,
            },
        ]
    }

    #[test]
    fn every_kind_round_trips_through_bytes() {
        let bodies = sample_bodies();
        let mut kinds: Vec<EventKind> = bodies.iter().map(|b| b.kind()).collect();
        kinds.dedup();
        assert_eq!(kinds.len(), 23, "sample set must cover every kind");

        for body in bodies {
            let key = keygen(Scheme::HmacSha256, [9; 32]);
            let signing =
                Event::signing_bytes(3, &hash(0), 12, &key.person_id(), &body);
            let event = Event {
                seq: 3,
                prev_hash: hash(0),
                timestamp: 12,
                actor: key.person_id(),
                body,
                signature: sign(&key, &signing).unwrap(),
            };
            let bytes = event.canon_bytes();
            let decoded = Event::decode_bytes(&bytes).unwrap();
            assert_eq!(decoded, event);
            assert_eq!(decoded.hash(), event.hash());
        }
    }

    #[test]
    fn tag_mapping_is_a_bijection() {
        for tag in 1..=23u8 {
            let kind = EventKind::from_tag(tag).unwrap();
            assert_eq!(kind.tag(), tag);
        }
        assert!(EventKind::from_tag(0).is_none());
        assert!(EventKind::from_tag(24).is_none());
    }
}
