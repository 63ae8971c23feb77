//! Journals: board-governed, immutable, content-addressed snapshots.
//!
//! A journal is a set of member keys plus its operating parameters. Any
//! change — board or parameters — creates a *new* journal whose
//! `ancestor` points at the old one; the old snapshot is frozen and its
//! publications stay attached to it. Governance actions pass by
//! qualified majority: at least ⌈q·|board|⌉ distinct current members,
//! where q is the per-journal fraction for the action class. The one
//! quorum-free action is a member removing themself.

use std::collections::BTreeSet;
use std::fmt;

use crate::canonical::{Canon, Writer};
use crate::error::ProtocolError;
use crate::identity::{content_hash, ContentHash, PersonId};
use crate::money::Ppm;

/// Content hash of (board, params, ancestor); the journal's identity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JournalId(pub ContentHash);

impl JournalId {
    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }

    pub fn short(&self) -> String {
        self.to_hex()[..12].to_string()
    }
}

impl fmt::Display for JournalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for JournalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JournalId({}..)", self.short())
    }
}

impl Canon for JournalId {
    fn encode(&self, w: &mut Writer) {
        self.0.encode(w);
    }
}

/// The per-journal rule set.
///
/// * `fee_keep` — fraction of each review fee kept by the journal.
/// * `anonymous_reviewers` — publish pseudonym tokens instead of
///   reviewer identities.
/// * `review_days` — maximum days a reviewer has to submit.
/// * `reviewers_per_paper` — reviewers drawn per accepted paper.
/// * `accept_quorum` — fraction of the board needed to accept a paper
///   for review.
/// * `spend_quorum` — fraction needed to spend the journal balance.
/// * `modify_quorum` — fraction needed to modify the journal; must be
///   strictly higher than `spend_quorum`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JournalParams {
    pub fee_keep: Ppm,
    pub anonymous_reviewers: bool,
    pub review_days: u64,
    pub reviewers_per_paper: u32,
    pub accept_quorum: Ppm,
    pub spend_quorum: Ppm,
    pub modify_quorum: Ppm,
}

impl JournalParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let frac = |name: &str, q: Ppm| {
            if q.ppm() == 0 || q > Ppm::ONE {
                Err(ProtocolError::BadParams(format!(
                    "{name} must be in (0, 1]"
                )))
            } else {
                Ok(())
            }
        };
        frac("accept_quorum", self.accept_quorum)?;
        frac("spend_quorum", self.spend_quorum)?;
        frac("modify_quorum", self.modify_quorum)?;
        if self.modify_quorum <= self.spend_quorum {
            return Err(ProtocolError::BadParams(
                "modify_quorum must be higher than spend_quorum".into(),
            ));
        }
        if self.fee_keep > Ppm::ONE {
            return Err(ProtocolError::BadParams("fee_keep must be in [0, 1]".into()));
        }
        if self.reviewers_per_paper == 0 {
            return Err(ProtocolError::BadParams(
                "reviewers_per_paper must be at least 1".into(),
            ));
        }
        if self.review_days == 0 {
            return Err(ProtocolError::BadParams(
                "review_days must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Canon for JournalParams {
    fn encode(&self, w: &mut Writer) {
        self.fee_keep.encode(w);
        w.bool(self.anonymous_reviewers);
        w.u64(self.review_days);
        w.u32(self.reviewers_per_paper);
        self.accept_quorum.encode(w);
        self.spend_quorum.encode(w);
        self.modify_quorum.encode(w);
    }
}

/// An immutable journal snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Journal {
    pub id: JournalId,
    /// Sorted, deduplicated member fingerprints.
    pub board: Vec<PersonId>,
    pub ancestor: Option<JournalId>,
    pub params: JournalParams,
    pub created_at: u64,
    /// Set once a modification created a descendant; a superseded
    /// journal accepts no submissions and no further modifications.
    pub superseded_by: Option<JournalId>,
}

impl Journal {
    pub fn is_member(&self, person: &PersonId) -> bool {
        self.board.binary_search(person).is_ok()
    }

    pub fn is_frozen(&self) -> bool {
        self.superseded_by.is_some()
    }
}

impl Canon for Journal {
    fn encode(&self, w: &mut Writer) {
        self.id.encode(w);
        w.seq(self.board.len());
        for m in &self.board {
            m.encode(w);
        }
        w.opt(self.ancestor.as_ref(), |w, a| a.encode(w));
        self.params.encode(w);
        w.u64(self.created_at);
        w.opt(self.superseded_by.as_ref(), |w, d| d.encode(w));
    }
}

/// The identity preimage. Founders (or approving members, for a
/// modification) sign exactly these bytes, so a valid signature binds
/// the signer to the resulting journal id.
pub fn id_preimage(board: &[PersonId], params: &JournalParams, ancestor: Option<&JournalId>) -> Vec<u8> {
    let mut w = Writer::new();
    w.str("journal");
    w.seq(board.len());
    for m in board {
        m.encode(&mut w);
    }
    params.encode(&mut w);
    w.opt(ancestor, |w, a| a.encode(w));
    w.into_bytes()
}

pub fn journal_id(board: &[PersonId], params: &JournalParams, ancestor: Option<&JournalId>) -> JournalId {
    JournalId(content_hash(&id_preimage(board, params, ancestor)))
}

/// A requested change to a journal, applied by creating a descendant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JournalChange {
    Board {
        add: Vec<PersonId>,
        remove: Vec<PersonId>,
    },
    Params(JournalParams),
}

impl Canon for JournalChange {
    fn encode(&self, w: &mut Writer) {
        match self {
            JournalChange::Board { add, remove } => {
                w.u8(0);
                w.seq(add.len());
                for p in add {
                    p.encode(w);
                }
                w.seq(remove.len());
                for p in remove {
                    p.encode(w);
                }
            }
            JournalChange::Params(params) => {
                w.u8(1);
                params.encode(w);
            }
        }
    }
}

impl JournalChange {
    /// True when the change is exactly one member removing themself —
    /// the unique quorum-free modification.
    pub fn is_unilateral_leave_by(&self, who: &PersonId) -> bool {
        matches!(self, JournalChange::Board { add, remove }
            if add.is_empty() && remove.len() == 1 && remove[0] == *who)
    }

    /// Compute the descendant's (board, params) or explain why the
    /// change is ill-formed.
    pub fn apply_to(&self, journal: &Journal) -> Result<(Vec<PersonId>, JournalParams), ProtocolError> {
        match self {
            JournalChange::Board { add, remove } => {
                let mut board: BTreeSet<PersonId> = journal.board.iter().copied().collect();
                for p in remove {
                    if !board.remove(p) {
                        return Err(ProtocolError::BadBoardChange(format!(
                            "{} is not a member",
                            p.short()
                        )));
                    }
                }
                for p in add {
                    if !board.insert(*p) {
                        return Err(ProtocolError::BadBoardChange(format!(
                            "{} is already a member",
                            p.short()
                        )));
                    }
                }
                if board.is_empty() {
                    return Err(ProtocolError::EmptyBoardResult);
                }
                Ok((board.into_iter().collect(), journal.params))
            }
            JournalChange::Params(params) => {
                params.validate()?;
                Ok((journal.board.clone(), *params))
            }
        }
    }
}

/// Counts distinct board members among `signers` against the required
/// ⌈q·|board|⌉. Non-members and duplicates never count.
#[derive(Debug, Clone)]
pub struct QuorumCheck {
    pub required: usize,
    pub approvers: BTreeSet<PersonId>,
}

impl QuorumCheck {
    pub fn met(&self) -> bool {
        self.approvers.len() >= self.required
    }

    pub fn got(&self) -> usize {
        self.approvers.len()
    }

    pub fn require(&self) -> Result<(), ProtocolError> {
        if self.met() {
            Ok(())
        } else {
            Err(ProtocolError::QuorumNotMet {
                required: self.required,
                got: self.got(),
            })
        }
    }
}

pub fn quorum_check(
    quorum: Ppm,
    board: &[PersonId],
    signers: impl IntoIterator<Item = PersonId>,
) -> QuorumCheck {
    let members: BTreeSet<PersonId> = board.iter().copied().collect();
    let approvers = signers
        .into_iter()
        .filter(|p| members.contains(p))
        .collect();
    QuorumCheck {
        required: quorum.ceil_count(board.len()),
        approvers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(n: u8) -> PersonId {
        PersonId([n; 32])
    }

    pub(crate) fn params() -> JournalParams {
        JournalParams {
            fee_keep: Ppm::from_f64(0.2),
            anonymous_reviewers: false,
            review_days: 10,
            reviewers_per_paper: 3,
            accept_quorum: Ppm::from_f64(0.5),
            spend_quorum: Ppm::from_f64(0.5),
            modify_quorum: Ppm::from_f64(0.66),
        }
    }

    #[test]
    fn params_reject_modify_not_above_spend() {
        let mut p = params();
        p.modify_quorum = p.spend_quorum;
        assert!(matches!(p.validate(), Err(ProtocolError::BadParams(_))));
    }

    #[test]
    fn params_reject_zero_quorum_and_zero_reviewers() {
        let mut p = params();
        p.accept_quorum = Ppm::ZERO;
        assert!(p.validate().is_err());
        let mut p = params();
        p.reviewers_per_paper = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn id_depends_on_every_component() {
        let board = vec![person(1), person(2)];
        let base = journal_id(&board, &params(), None);
        let mut p2 = params();
        p2.fee_keep = Ppm::from_f64(0.3);
        assert_ne!(base, journal_id(&board, &p2, None));
        assert_ne!(base, journal_id(&[person(1)], &params(), None));
        let anc = JournalId(ContentHash([7; 32]));
        assert_ne!(base, journal_id(&board, &params(), Some(&anc)));
        assert_eq!(base, journal_id(&board, &params(), None));
    }

    #[test]
    fn quorum_counts_distinct_members_only() {
        let board = vec![person(1), person(2), person(3)];
        // 2 of 3 at 0.66: ceil(1.98) = 2 — met.
        let q = quorum_check(Ppm::from_f64(0.66), &board, vec![person(1), person(2)]);
        assert_eq!(q.required, 2);
        assert!(q.met());
        // Duplicates count once; outsiders never count.
        let q = quorum_check(
            Ppm::from_f64(0.66),
            &board,
            vec![person(1), person(1), person(9)],
        );
        assert_eq!(q.got(), 1);
        assert!(!q.met());
    }

    #[test]
    fn board_change_validates_membership() {
        let journal = Journal {
            id: journal_id(&[person(1), person(2)], &params(), None),
            board: vec![person(1), person(2)],
            ancestor: None,
            params: params(),
            created_at: 0,
            superseded_by: None,
        };
        let add_existing = JournalChange::Board {
            add: vec![person(1)],
            remove: vec![],
        };
        assert!(add_existing.apply_to(&journal).is_err());
        let remove_all = JournalChange::Board {
            add: vec![],
            remove: vec![person(1), person(2)],
        };
        assert_eq!(
            remove_all.apply_to(&journal),
            Err(ProtocolError::EmptyBoardResult)
        );
        let leave = JournalChange::Board {
            add: vec![],
            remove: vec![person(2)],
        };
        assert!(leave.is_unilateral_leave_by(&person(2)));
        assert!(!leave.is_unilateral_leave_by(&person(1)));
        let (board, _) = leave.apply_to(&journal).unwrap();
        assert_eq!(board, vec![person(1)]);
    }
}
