//! A deterministic peer-review market over a signed event ledger.
//!
//! Journals are board-governed, content-addressed snapshots; every
//! action — creating a journal, bidding a review fee, scoring a paper,
//! splitting the fee, settling the market — is a signed event on a
//! hash-chained log, and the entire protocol state is a deterministic
//! fold over that log. On top sit the reputation fixed point (journal,
//! user, and board scores over the citation graph), a journal-free
//! review market with budget matching, and a scenario-driven agent
//! simulator.
//!
//! The narrative guide lives in `book/`; its code blocks compile and
//! run as doc-tests, so the book cannot drift from the library.

pub mod blob;
pub mod canonical;
pub mod error;
pub mod events;
pub mod identity;
pub mod journal;
pub mod ledger;
pub mod market;
pub mod money;
pub mod reputation;
pub mod review;
pub mod sim;
pub mod state;
pub mod textdoc;

pub use error::ProtocolError;
pub use events::{Event, EventBody, EventKind};
pub use identity::{content_hash, keygen, ContentHash, KeyPair, PersonId, Scheme};
pub use journal::{Journal, JournalId, JournalParams};
pub use ledger::{Ledger, LedgerError};
pub use market::{MarketSubmission, ScientistProfile, SubmissionId};
pub use money::Ppm;
pub use reputation::{solve_fixed_point, ReputationState};
pub use review::{ReviewRound, RoundId};
pub use state::{ProtocolConfig, State};

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(unused)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(identity, "../../../book/src/identity.md");
    chapter!(ledger, "../../../book/src/ledger.md");
    chapter!(journals, "../../../book/src/journals.md");
    chapter!(review, "../../../book/src/review.md");
    chapter!(reputation, "../../../book/src/reputation.md");
    chapter!(market, "../../../book/src/market.md");
    chapter!(simulation, "../../../book/src/simulation.md");
    chapter!(cli, "../../../book/src/cli.md");
}
