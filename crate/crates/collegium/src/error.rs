//! Protocol-level error vocabulary.
//!
//! Every rejected state transition maps to one variant here, and every
//! variant has a stable machine code so the CLI can emit
//! `ERROR <CODE>: message` lines that scripts can match on.

use thiserror::Error;

use crate::identity::IdentityError;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("actor is not a registered key")]
    UnknownActor,
    #[error("key already registered")]
    AlreadyRegistered,
    #[error("{0}")]
    Identity(#[from] IdentityError),

    // Journal governance
    #[error("non-canonical field: {0}")]
    NotCanonical(&'static str),
    #[error("journal parameters invalid: {0}")]
    BadParams(String),
    #[error("missing founder signature from {0}")]
    MissingFounderSignature(String),
    #[error("no such journal")]
    NoSuchJournal,
    #[error("journal already exists")]
    JournalExists,
    #[error("actor is not a board member")]
    NotBoardMember,
    #[error("quorum not met: got {got} of {required} required approvals")]
    QuorumNotMet { required: usize, got: usize },
    #[error("journal already superseded by a descendant")]
    AlreadySuperseded,
    #[error("change would leave the board empty")]
    EmptyBoardResult,
    #[error("invalid board change: {0}")]
    BadBoardChange(String),
    #[error("candidate is already a board member")]
    AlreadyMember,
    #[error("insufficient funds: need {needed}, have {available}")]
    InsufficientFunds { needed: u64, available: u64 },
    #[error("journals are not in an ancestor/descendant relation")]
    NotDescendant,
    #[error("a governance proposal is already pending for this journal")]
    ProposalPending,
    #[error("no such pending proposal")]
    NoSuchProposal,
    #[error("proposal expired")]
    ProposalExpired,

    // Papers and review rounds
    #[error("no such paper")]
    NoSuchPaper,
    #[error("paper already published")]
    PaperExists,
    #[error("actor is not an author of the paper")]
    NotAuthor,
    #[error("bad author signature from {0}")]
    BadAuthorSignature(String),
    #[error("journal is superseded; submit to its descendant")]
    JournalSuperseded,
    #[error("no such review round")]
    NoSuchRound,
    #[error("round is in state {got}, expected {expected}")]
    WrongStatus {
        expected: &'static str,
        got: &'static str,
    },
    #[error("not enough eligible reviewers: need {needed}, have {available}")]
    NotEnoughEligibleReviewers { needed: usize, available: usize },
    #[error("assignment does not match the deterministic draw")]
    AssignmentMismatch,
    #[error("reviewer is not assigned to this round")]
    NotAssigned,
    #[error("review deadline has passed")]
    PastDeadline,
    #[error("reviewer already submitted a review")]
    DuplicateReview,
    #[error("score {0} out of range 1..=5")]
    ScoreOutOfRange(u8),
    #[error("reviews still pending and deadline not reached")]
    ReviewsPending,
    #[error("too few reviews to decide")]
    TooFewReviews,
    #[error("vote from non-reviewer")]
    VoteFromNonReviewer,
    #[error("duplicate final vote")]
    DuplicateVote,
    #[error("recorded decision does not match the scores")]
    DecisionMismatch,
    #[error("recorded payout does not match the fee split")]
    PayoutMismatch,

    // Review market
    #[error("no market profile for actor")]
    NoProfile,
    #[error("no such market submission")]
    NoSuchSubmission,
    #[error("no feasible reviewer set for this bid")]
    NoFeasibleMatch,
    #[error("match does not equal the deterministic selection")]
    MatchMismatch,
    #[error("reviewer is not matched to this submission")]
    NotMatched,
    #[error("duplicate score")]
    DuplicateScore,
    #[error("reviewers cannot score their own report")]
    SelfScore,
    #[error("report scores must cover exactly the other reviewers")]
    IncompleteReportScores,
    #[error("not enough eligible reviewers in the market")]
    NotEnoughReviewers,
    #[error("recorded settlement does not match the rules")]
    SettlementMismatch,
}

impl ProtocolError {
    /// Stable machine-parseable code.
    pub fn code(&self) -> &'static str {
        use ProtocolError::*;
        match self {
            UnknownActor => "UNKNOWN_ACTOR",
            AlreadyRegistered => "ALREADY_REGISTERED",
            Identity(_) => "INVALID_KEY",
            NotCanonical(_) => "NOT_CANONICAL",
            BadParams(_) => "BAD_PARAMS",
            MissingFounderSignature(_) => "MISSING_FOUNDER_SIGNATURE",
            NoSuchJournal => "NO_SUCH_JOURNAL",
            JournalExists => "JOURNAL_EXISTS",
            NotBoardMember => "NOT_BOARD_MEMBER",
            QuorumNotMet { .. } => "QUORUM_NOT_MET",
            AlreadySuperseded => "ALREADY_SUPERSEDED",
            EmptyBoardResult => "EMPTY_BOARD_RESULT",
            BadBoardChange(_) => "BAD_BOARD_CHANGE",
            AlreadyMember => "ALREADY_MEMBER",
            InsufficientFunds { .. } => "INSUFFICIENT_FUNDS",
            NotDescendant => "NOT_DESCENDANT",
            ProposalPending => "PROPOSAL_PENDING",
            NoSuchProposal => "NO_SUCH_PROPOSAL",
            ProposalExpired => "PROPOSAL_EXPIRED",
            NoSuchPaper => "NO_SUCH_PAPER",
            PaperExists => "PAPER_EXISTS",
            NotAuthor => "NOT_AUTHOR",
            BadAuthorSignature(_) => "BAD_AUTHOR_SIGNATURE",
            JournalSuperseded => "JOURNAL_SUPERSEDED",
            NoSuchRound => "NO_SUCH_ROUND",
            WrongStatus { .. } => "WRONG_STATUS",
            NotEnoughEligibleReviewers { .. } => "NOT_ENOUGH_ELIGIBLE_REVIEWERS",
            AssignmentMismatch => "ASSIGNMENT_MISMATCH",
            NotAssigned => "NOT_ASSIGNED",
            PastDeadline => "PAST_DEADLINE",
            DuplicateReview => "DUPLICATE_REVIEW",
            ScoreOutOfRange(_) => "SCORE_OUT_OF_RANGE",
            ReviewsPending => "REVIEWS_PENDING",
            TooFewReviews => "TOO_FEW_REVIEWS",
            VoteFromNonReviewer => "VOTE_FROM_NON_REVIEWER",
            DuplicateVote => "DUPLICATE_VOTE",
            DecisionMismatch => "DECISION_MISMATCH",
            PayoutMismatch => "PAYOUT_MISMATCH",
            NoProfile => "NO_PROFILE",
            NoSuchSubmission => "NO_SUCH_SUBMISSION",
            NoFeasibleMatch => "NO_FEASIBLE_MATCH",
            MatchMismatch => "MATCH_MISMATCH",
            NotMatched => "NOT_MATCHED",
            DuplicateScore => "DUPLICATE_SCORE",
            SelfScore => "SELF_SCORE",
            IncompleteReportScores => "INCOMPLETE_REPORT_SCORES",
            NotEnoughReviewers => "NOT_ENOUGH_REVIEWERS",
            SettlementMismatch => "SETTLEMENT_MISMATCH",
        }
    }
}
