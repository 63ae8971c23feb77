//! The append-only, hash-chained, signed event log.
//!
//! Every record links to its predecessor by content hash (the genesis
//! record links to the all-zero digest), carries a strictly increasing
//! sequence number and a non-decreasing timestamp, and is signed by its
//! actor. `append` re-derives the protocol state as it goes, so a
//! precondition violation rejects the event before anything is
//! persisted; `replay` folds a stored log back into the identical
//! state, byte for byte.
//!
//! On disk a log is a magic header followed by length-prefixed
//! canonical event records. Because the records are exactly the hashed
//! bytes, a single flipped bit anywhere is caught by the framing, the
//! hash chain, or a signature.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::canonical::{Canon, DecodeError};
use crate::error::ProtocolError;
use crate::events::{Event, EventBody};
use crate::identity::{
    content_hash, person_id_of, sign, ContentHash, IdentityError, KeyPair, RegisteredKey,
};
use crate::state::{ProtocolConfig, State};

const MAGIC: &[u8; 8] = b"CLGMLOG\x01";

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("chain break at seq {seq}: {reason}")]
    ChainBreak { seq: u64, reason: String },
    #[error("bad signature at seq {seq}")]
    BadSignature { seq: u64 },
    #[error("event {seq} rejected: {source}")]
    Rejected {
        seq: u64,
        #[source]
        source: ProtocolError,
    },
    #[error("malformed record {record}: {source}")]
    Malformed {
        record: usize,
        #[source]
        source: DecodeError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

impl LedgerError {
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::ChainBreak { .. } => "CHAIN_BREAK",
            LedgerError::BadSignature { .. } => "BAD_SIGNATURE",
            LedgerError::Rejected { source, .. } => source.code(),
            LedgerError::Malformed { .. } => "MALFORMED_LEDGER",
            LedgerError::Io(_) => "IO",
            LedgerError::Identity(_) => "INVALID_KEY",
        }
    }
}

/// The single-writer log handle: events plus the state they replay to.
#[derive(Debug, Clone)]
pub struct Ledger {
    events: Vec<Event>,
    hashes: Vec<ContentHash>,
    state: State,
}

impl Ledger {
    pub fn new(config: ProtocolConfig) -> Self {
        Self {
            events: Vec::new(),
            hashes: Vec::new(),
            state: State::new(config),
        }
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn hashes(&self) -> &[ContentHash] {
        &self.hashes
    }

    pub fn len(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Hash of the last event; the all-zero digest for an empty log.
    pub fn tip(&self) -> ContentHash {
        self.hashes.last().copied().unwrap_or(ContentHash::ZERO)
    }

    pub fn next_seq(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn current_day(&self) -> u64 {
        self.state.day
    }

    pub fn digest(&self) -> ContentHash {
        self.state.digest()
    }

    /// Validate the chain links and signature, apply the state
    /// transition, and persist the event — or reject it untouched.
    pub fn append(&mut self, event: Event) -> Result<ContentHash, LedgerError> {
        let seq = event.seq;
        if seq != self.next_seq() {
            return Err(LedgerError::ChainBreak {
                seq,
                reason: format!("expected seq {}, got {}", self.next_seq(), seq),
            });
        }
        if event.prev_hash != self.tip() {
            return Err(LedgerError::ChainBreak {
                seq,
                reason: "prev_hash does not match the tip".into(),
            });
        }
        if let Some(last) = self.events.last() {
            if event.timestamp < last.timestamp {
                return Err(LedgerError::ChainBreak {
                    seq,
                    reason: format!(
                        "timestamp {} regresses before {}",
                        event.timestamp, last.timestamp
                    ),
                });
            }
        }
        self.verify_signature(&event)?;
        let hash = event.hash();
        self.state
            .apply(&event, hash)
            .map_err(|source| LedgerError::Rejected { seq, source })?;
        self.events.push(event);
        self.hashes.push(hash);
        Ok(hash)
    }

    fn verify_signature(&self, event: &Event) -> Result<(), LedgerError> {
        let seq = event.seq;
        let signing = Event::signing_bytes(
            event.seq,
            &event.prev_hash,
            event.timestamp,
            &event.actor,
            &event.body,
        );
        let digest = content_hash(&signing);
        if event.signature.signer != event.actor || event.signature.payload_hash != digest {
            return Err(LedgerError::BadSignature { seq });
        }
        // A self-registration is verified against the key it registers;
        // everyone else must already be in the registry.
        let registered: Option<RegisteredKey> = match self.state.registry.get(&event.actor) {
            Some(k) => Some(k.clone()),
            None => match &event.body {
                EventBody::KeyRegister { scheme, public, .. }
                    if person_id_of(*scheme, public) == event.actor =>
                {
                    Some(RegisteredKey {
                        scheme: *scheme,
                        public: public.clone(),
                        validated: false,
                    })
                }
                _ => {
                    return Err(LedgerError::Rejected {
                        seq,
                        source: ProtocolError::UnknownActor,
                    })
                }
            },
        };
        let key = registered.expect("resolved above");
        let ok = crate::identity::verify_digest(key.scheme, &key.public, &digest, &event.signature.bytes)
            .unwrap_or(false);
        if ok {
            Ok(())
        } else {
            Err(LedgerError::BadSignature { seq })
        }
    }

    /// Build a correctly chained event signed by `key` and append it.
    pub fn submit(
        &mut self,
        key: &KeyPair,
        timestamp: u64,
        body: EventBody,
    ) -> Result<ContentHash, LedgerError> {
        let event = self.build_event(key, timestamp, body)?;
        self.append(event)
    }

    /// The chained, signed event `submit` would append.
    pub fn build_event(
        &self,
        key: &KeyPair,
        timestamp: u64,
        body: EventBody,
    ) -> Result<Event, LedgerError> {
        let seq = self.next_seq();
        let prev_hash = self.tip();
        let actor = key.person_id();
        let signing = Event::signing_bytes(seq, &prev_hash, timestamp, &actor, &body);
        let signature = sign(key, &signing)?;
        Ok(Event {
            seq,
            prev_hash,
            timestamp,
            actor,
            body,
            signature,
        })
    }

    /// Fold a stored event sequence back into a ledger, re-checking
    /// every link, signature, and precondition. The first invalid event
    /// is reported with its seq.
    pub fn replay(
        config: ProtocolConfig,
        events: impl IntoIterator<Item = Event>,
    ) -> Result<Ledger, LedgerError> {
        let mut ledger = Ledger::new(config);
        for event in events {
            ledger.append(event)?;
        }
        Ok(ledger)
    }

    // -- persistence --------------------------------------------------

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for event in &self.events {
            let bytes = event.canon_bytes();
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    /// Parse the framed records of a log file. Chain validity is not
    /// checked here — feed the result to [`Ledger::replay`].
    pub fn decode_records(bytes: &[u8]) -> Result<Vec<Event>, LedgerError> {
        let rest = bytes
            .strip_prefix(MAGIC.as_slice())
            .ok_or(LedgerError::Malformed {
                record: 0,
                source: DecodeError::Invalid {
                    pos: 0,
                    what: "log magic",
                },
            })?;
        let mut events = Vec::new();
        let mut offset = 0usize;
        let mut record = 0usize;
        while offset < rest.len() {
            if rest.len() - offset < 4 {
                return Err(LedgerError::Malformed {
                    record,
                    source: DecodeError::Truncated(offset),
                });
            }
            let len = u32::from_be_bytes(rest[offset..offset + 4].try_into().unwrap()) as usize;
            offset += 4;
            if rest.len() - offset < len {
                return Err(LedgerError::Malformed {
                    record,
                    source: DecodeError::Truncated(offset),
                });
            }
            let event = Event::decode_bytes(&rest[offset..offset + len])
                .map_err(|source| LedgerError::Malformed { record, source })?;
            events.push(event);
            offset += len;
            record += 1;
        }
        Ok(events)
    }

    pub fn save(&self, path: &Path) -> Result<(), LedgerError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path, config: ProtocolConfig) -> Result<Ledger, LedgerError> {
        let bytes = fs::read(path)?;
        let events = Self::decode_records(&bytes)?;
        Ledger::replay(config, events)
    }

    // -- text rendering -----------------------------------------------

    /// One canonical line per event, for diffing.
    pub fn render_line(&self, index: usize) -> String {
        let event = &self.events[index];
        format!(
            "seq={} day={} kind={} actor={} prev={} hash={} {}",
            event.seq,
            event.timestamp,
            event.kind().name(),
            event.actor,
            event.prev_hash,
            self.hashes[index],
            describe_body(&event.body),
        )
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.events.len() {
            out.push_str(&self.render_line(i));
            out.push('\n');
        }
        out
    }
}

fn describe_body(body: &EventBody) -> String {
    use EventBody::*;
    match body {
        KeyRegister {
            scheme,
            validated,
            initial_balance,
            ..
        } => format!(
            "scheme={scheme} validated={validated} balance={initial_balance}"
        ),
        JournalCreate { founders, .. } => format!("founders={}", founders.len()),
        JournalModify { journal, change, .. } => {
            let what = match change {
                crate::journal::JournalChange::Board { add, remove } => {
                    format!("board+{}-{}", add.len(), remove.len())
                }
                crate::journal::JournalChange::Params(_) => "params".to_string(),
            };
            format!("journal={journal} change={what}")
        }
        JoinBid {
            journal,
            bid,
            expires_day,
        } => format!("journal={journal} bid={bid} expires={expires_day}"),
        JoinDecision {
            journal, proposal, ..
        } => format!("journal={journal} proposal={proposal}"),
        BalanceSpend {
            journal,
            amount,
            recipient,
            ..
        } => format!("journal={journal} amount={amount} recipient={recipient}"),
        BalanceTransfer {
            ancestor,
            descendant,
            ..
        } => format!("ancestor={ancestor} descendant={descendant}"),
        PaperPublish {
            paper,
            authors,
            keywords,
            cites,
            ..
        } => format!(
            "paper={paper} authors={} keywords={} cites={}",
            authors.len(),
            keywords.join(","),
            cites.len()
        ),
        ReviewBid {
            paper,
            journal,
            fee,
        } => format!("paper={paper} journal={journal} fee={fee}"),
        ReviewAcceptVote { round, approvals, .. } => {
            format!("round={round} approvals={}", approvals.len())
        }
        ReviewerAssignment {
            round,
            nonce,
            reviewers,
            pseudonyms,
        } => format!(
            "round={round} nonce={nonce} reviewers={} pseudonyms={}",
            reviewers.len(),
            pseudonyms.len()
        ),
        ReviewSubmit { round, score, .. } => format!("round={round} score={score}"),
        PublicationDecision { round, outcome } => {
            format!("round={round} outcome={}", outcome.name())
        }
        FinalVersion { round, final_hash } => format!("round={round} final={final_hash}"),
        FinalVote { round, approve } => format!("round={round} approve={approve}"),
        FeeSettlement {
            round,
            reviewer_shares,
            journal_share,
            refund,
            published,
        } => {
            let total: u64 = reviewer_shares.iter().map(|(_, r)| r).sum();
            format!(
                "round={round} reviewers={total} journal={journal_share} refund={refund} published={published}"
            )
        }
        CitationDeclare { paper, cites } => format!("paper={paper} cites={}", cites.len()),
        MarketAsk {
            keywords,
            ask,
            capacity,
        } => format!("keywords={} ask={ask} capacity={capacity}", keywords.join(",")),
        MarketSubmit {
            paper,
            keywords,
            bid,
        } => format!("paper={paper} keywords={} bid={bid}", keywords.join(",")),
        MarketMatch {
            submission,
            reviewers,
        } => format!("submission={submission} reviewers={}", reviewers.len()),
        MarketReview {
            submission, score, ..
        } => format!("submission={submission} score={score}"),
        MarketReportScore { submission, scores } => {
            format!("submission={submission} scores={}", scores.len())
        }
        MarketSettlement {
            submission,
            paid,
            refund,
            accepted,
        } => {
            let total: u64 = paid.iter().map(|(_, a)| a).sum();
            format!("submission={submission} paid={total} refund={refund} accepted={accepted}")
        }
    }
}
