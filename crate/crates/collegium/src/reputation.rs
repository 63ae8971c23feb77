//! The reputation system: three coupled scores over the citation graph.
//!
//! * **Journal score** — citations received by a journal's papers,
//!   each weighted by the *board score* of the journal that published
//!   the citing paper, divided by the journal's paper count. A journal
//!   with no papers scores 0.
//! * **User score** — the time-weighted mean of journal scores over the
//!   journals a person served on; 1.0 for people with no service yet.
//! * **Board score** — the plain mean of user scores over a journal's
//!   board; the headline quality signal for a journal.
//!
//! The three definitions are mutually recursive (a journal's score
//! depends on its citers' boards, boards depend on users, users depend
//! on journals), so the system is solved as a damped fixed point:
//!
//! ```text
//! x_{k+1} = α·f(x_k) + (1 − α)·x_k,    α = 0.5
//! ```
//!
//! iterated user → board → journal until the largest component change
//! falls below 1e-9 or an iteration cap is hit. Citation cycles can
//! make the map expansive; divergence is reported as
//! `converged = false`, never silently accepted. Starting from the
//! all-ones state keeps `board = mean(user over board)` exact at every
//! iterate, not just in the limit.

use std::collections::{BTreeMap, BTreeSet};

use crate::identity::{ContentHash, PersonId};
use crate::journal::JournalId;

/// Default score for a person who never served on a board.
pub const DEFAULT_USER_SCORE: f64 = 1.0;

/// A stint on an editorial board, in days. `to_day` is exclusive and
/// already closed at the evaluation day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceInterval {
    pub person: PersonId,
    pub journal: JournalId,
    pub from_day: u64,
    pub to_day: u64,
}

impl ServiceInterval {
    pub fn duration(&self) -> u64 {
        self.to_day.saturating_sub(self.from_day)
    }
}

/// Published papers and the citations between them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CitationGraph {
    /// paper hash → journal snapshot that published it.
    pub publishers: BTreeMap<ContentHash, JournalId>,
    /// (citing paper, cited paper). Citing papers must be published;
    /// citations to unpublished hashes are kept but carry weight 0.
    pub citations: Vec<(ContentHash, ContentHash)>,
}

impl CitationGraph {
    pub fn add_paper(&mut self, paper: ContentHash, journal: JournalId) {
        self.publishers.insert(paper, journal);
    }

    pub fn add_citation(&mut self, citing: ContentHash, cited: ContentHash) {
        self.citations.push((citing, cited));
    }

    pub fn paper_count(&self, journal: &JournalId) -> usize {
        self.publishers.values().filter(|j| *j == journal).count()
    }
}

/// Everything the solver needs: the graph, each journal's board, and
/// the service history.
#[derive(Debug, Clone, Default)]
pub struct ReputationInputs {
    pub graph: CitationGraph,
    pub boards: BTreeMap<JournalId, Vec<PersonId>>,
    pub intervals: Vec<ServiceInterval>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-9,
            max_iterations: 1000,
        }
    }
}

/// The solved (or last-iterate) state of the three score families.
#[derive(Debug, Clone)]
pub struct ReputationState {
    pub journal_score: BTreeMap<JournalId, f64>,
    pub user_score: BTreeMap<PersonId, f64>,
    pub board_score: BTreeMap<JournalId, f64>,
    pub iterations: u32,
    pub residual: f64,
    pub converged: bool,
}

/// Time-weighted mean of journal scores over one person's service.
pub fn user_score(
    intervals: &[&ServiceInterval],
    journal_scores: &BTreeMap<JournalId, f64>,
) -> f64 {
    let total: u64 = intervals.iter().map(|iv| iv.duration()).sum();
    if total == 0 {
        return DEFAULT_USER_SCORE;
    }
    intervals
        .iter()
        .map(|iv| {
            let score = journal_scores.get(&iv.journal).copied().unwrap_or(0.0);
            iv.duration() as f64 / total as f64 * score
        })
        .sum()
}

/// Plain mean of user scores over a board.
pub fn board_score(board: &[PersonId], user_scores: &BTreeMap<PersonId, f64>) -> f64 {
    if board.is_empty() {
        return 0.0;
    }
    board
        .iter()
        .map(|p| user_scores.get(p).copied().unwrap_or(DEFAULT_USER_SCORE))
        .sum::<f64>()
        / board.len() as f64
}

/// Citation-weighted score of one journal given current board scores.
pub fn journal_score(
    journal: &JournalId,
    graph: &CitationGraph,
    board_scores: &BTreeMap<JournalId, f64>,
) -> f64 {
    let papers = graph.paper_count(journal);
    if papers == 0 {
        return 0.0;
    }
    let weighted: f64 = graph
        .citations
        .iter()
        .filter(|(_, cited)| graph.publishers.get(cited) == Some(journal))
        .filter_map(|(citing, _)| graph.publishers.get(citing))
        .map(|citing_journal| board_scores.get(citing_journal).copied().unwrap_or(0.0))
        .sum();
    weighted / papers as f64
}

/// Solve the coupled system by damped fixed-point iteration.
pub fn solve_fixed_point(inputs: &ReputationInputs, opts: SolverOptions) -> ReputationState {
    let journals: Vec<JournalId> = inputs.boards.keys().copied().collect();
    let persons: BTreeSet<PersonId> = inputs
        .boards
        .values()
        .flatten()
        .copied()
        .chain(inputs.intervals.iter().map(|iv| iv.person))
        .collect();

    let mut by_person: BTreeMap<PersonId, Vec<&ServiceInterval>> = BTreeMap::new();
    for iv in &inputs.intervals {
        by_person.entry(iv.person).or_default().push(iv);
    }

    let mut users: BTreeMap<PersonId, f64> =
        persons.iter().map(|p| (*p, 1.0)).collect();
    let mut boards: BTreeMap<JournalId, f64> =
        journals.iter().map(|j| (*j, 1.0)).collect();
    let mut journals_score: BTreeMap<JournalId, f64> =
        journals.iter().map(|j| (*j, 1.0)).collect();

    let alpha = opts.damping;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut step = 0.0f64;

        let new_users: BTreeMap<PersonId, f64> = persons
            .iter()
            .map(|p| {
                let empty = Vec::new();
                let ivs = by_person.get(p).unwrap_or(&empty);
                (*p, user_score(ivs, &journals_score))
            })
            .collect();
        let damped_users: BTreeMap<PersonId, f64> = new_users
            .iter()
            .map(|(p, new)| {
                let old = users[p];
                step = step.max((new - old).abs());
                (*p, alpha * new + (1.0 - alpha) * old)
            })
            .collect();

        let new_boards: BTreeMap<JournalId, f64> = journals
            .iter()
            .map(|j| (*j, board_score(&inputs.boards[j], &damped_users)))
            .collect();
        let damped_boards: BTreeMap<JournalId, f64> = new_boards
            .iter()
            .map(|(j, new)| {
                step = step.max((new - boards[j]).abs());
                // Users were already damped; boards follow them exactly
                // so board = mean(user) stays an identity.
                (*j, *new)
            })
            .collect();

        let new_journals: BTreeMap<JournalId, f64> = journals
            .iter()
            .map(|j| (*j, journal_score(j, &inputs.graph, &damped_boards)))
            .collect();
        let damped_journals: BTreeMap<JournalId, f64> = new_journals
            .iter()
            .map(|(j, new)| {
                let old = journals_score[j];
                step = step.max((new - old).abs());
                (*j, alpha * new + (1.0 - alpha) * old)
            })
            .collect();

        users = damped_users;
        boards = damped_boards;
        journals_score = damped_journals;
        residual = step;

        if !residual.is_finite() {
            break;
        }
        if residual < opts.tolerance {
            return ReputationState {
                journal_score: journals_score,
                user_score: users,
                board_score: boards,
                iterations,
                residual,
                converged: true,
            };
        }
    }
    ReputationState {
        journal_score: journals_score,
        user_score: users,
        board_score: boards,
        iterations,
        residual,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(n: u8) -> PersonId {
        PersonId([n; 32])
    }

    fn jid(n: u8) -> JournalId {
        JournalId(ContentHash([n; 32]))
    }

    fn paper(n: u8) -> ContentHash {
        ContentHash([100 + n; 32])
    }

    #[test]
    fn user_score_reproduces_the_time_weighted_example() {
        // 6 units at score 10 plus 12 units at score 5 → 6.666…
        let scores: BTreeMap<JournalId, f64> = [(jid(1), 10.0), (jid(2), 5.0)].into();
        let a = ServiceInterval {
            person: person(1),
            journal: jid(1),
            from_day: 0,
            to_day: 6,
        };
        let b = ServiceInterval {
            person: person(1),
            journal: jid(2),
            from_day: 6,
            to_day: 18,
        };
        let got = user_score(&[&a, &b], &scores);
        assert!((got - 6.666_666_666_666_667).abs() < 1e-6);
    }

    #[test]
    fn user_score_single_interval_is_the_journal_score() {
        let scores: BTreeMap<JournalId, f64> = [(jid(1), 4.25)].into();
        let iv = ServiceInterval {
            person: person(1),
            journal: jid(1),
            from_day: 3,
            to_day: 33,
        };
        assert_eq!(user_score(&[&iv], &scores), 4.25);
    }

    #[test]
    fn user_score_defaults_without_service() {
        assert_eq!(user_score(&[], &BTreeMap::new()), DEFAULT_USER_SCORE);
    }

    #[test]
    fn user_score_is_invariant_under_interval_splitting() {
        let scores: BTreeMap<JournalId, f64> = [(jid(1), 7.0), (jid(2), 2.0)].into();
        let whole = ServiceInterval {
            person: person(1),
            journal: jid(1),
            from_day: 0,
            to_day: 10,
        };
        let left = ServiceInterval {
            from_day: 0,
            to_day: 4,
            ..whole.clone()
        };
        let right = ServiceInterval {
            from_day: 4,
            to_day: 10,
            ..whole.clone()
        };
        let other = ServiceInterval {
            person: person(1),
            journal: jid(2),
            from_day: 10,
            to_day: 15,
        };
        let a = user_score(&[&whole, &other], &scores);
        let b = user_score(&[&left, &right, &other], &scores);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn board_score_is_the_mean() {
        let users: BTreeMap<PersonId, f64> =
            [(person(1), 2.0), (person(2), 4.0)].into();
        assert_eq!(board_score(&[person(1), person(2)], &users), 3.0);
        let users: BTreeMap<PersonId, f64> =
            [(person(1), 0.0), (person(2), 0.0), (person(3), 6.0)].into();
        assert_eq!(
            board_score(&[person(1), person(2), person(3)], &users),
            2.0
        );
    }

    #[test]
    fn journal_score_weights_citations_by_citing_board() {
        let mut graph = CitationGraph::default();
        // Journal 1 published two papers; three citing papers come from
        // journals whose boards score 1.0.
        graph.add_paper(paper(1), jid(1));
        graph.add_paper(paper(2), jid(1));
        graph.add_paper(paper(3), jid(2));
        graph.add_paper(paper(4), jid(2));
        graph.add_paper(paper(5), jid(3));
        graph.add_citation(paper(3), paper(1));
        graph.add_citation(paper(4), paper(2));
        graph.add_citation(paper(5), paper(1));
        let boards: BTreeMap<JournalId, f64> =
            [(jid(1), 0.5), (jid(2), 1.0), (jid(3), 1.0)].into();
        assert_eq!(journal_score(&jid(1), &graph, &boards), 1.5);
    }

    #[test]
    fn zero_paper_journal_scores_zero() {
        let graph = CitationGraph::default();
        let boards: BTreeMap<JournalId, f64> = [(jid(1), 1.0)].into();
        assert_eq!(journal_score(&jid(1), &graph, &boards), 0.0);
    }

    #[test]
    fn citations_from_zero_score_boards_contribute_nothing() {
        let mut graph = CitationGraph::default();
        graph.add_paper(paper(1), jid(1));
        graph.add_paper(paper(2), jid(2));
        graph.add_citation(paper(2), paper(1));
        let boards: BTreeMap<JournalId, f64> = [(jid(1), 1.0), (jid(2), 0.0)].into();
        assert_eq!(journal_score(&jid(1), &graph, &boards), 0.0);
    }

    #[test]
    fn empty_system_converges_immediately() {
        let state = solve_fixed_point(&ReputationInputs::default(), SolverOptions::default());
        assert!(state.converged);
        assert!(state.journal_score.is_empty());
    }

    #[test]
    fn symmetric_journals_get_equal_scores() {
        // Two journals with distinct but symmetric boards, each
        // publishing one paper and citing the other's paper.
        let mut inputs = ReputationInputs::default();
        inputs.boards.insert(jid(1), vec![person(1)]);
        inputs.boards.insert(jid(2), vec![person(2)]);
        for (p, j) in [(person(1), jid(1)), (person(2), jid(2))] {
            inputs.intervals.push(ServiceInterval {
                person: p,
                journal: j,
                from_day: 0,
                to_day: 10,
            });
        }
        inputs.graph.add_paper(paper(1), jid(1));
        inputs.graph.add_paper(paper(2), jid(2));
        inputs.graph.add_citation(paper(1), paper(2));
        inputs.graph.add_citation(paper(2), paper(1));
        let state = solve_fixed_point(&inputs, SolverOptions::default());
        assert!(state.converged, "residual {}", state.residual);
        let a = state.journal_score[&jid(1)];
        let b = state.journal_score[&jid(2)];
        assert!((a - b).abs() < 1e-9);
        assert!((state.board_score[&jid(1)] - state.board_score[&jid(2)]).abs() < 1e-9);
    }

    #[test]
    fn board_consistency_holds_at_the_returned_state() {
        let mut inputs = ReputationInputs::default();
        inputs
            .boards
            .insert(jid(1), vec![person(1), person(2)]);
        inputs.boards.insert(jid(2), vec![person(3)]);
        inputs.intervals.push(ServiceInterval {
            person: person(1),
            journal: jid(1),
            from_day: 0,
            to_day: 20,
        });
        inputs.intervals.push(ServiceInterval {
            person: person(3),
            journal: jid(2),
            from_day: 0,
            to_day: 20,
        });
        inputs.graph.add_paper(paper(1), jid(1));
        inputs.graph.add_paper(paper(2), jid(2));
        inputs.graph.add_citation(paper(2), paper(1));
        let state = solve_fixed_point(&inputs, SolverOptions::default());
        assert!(state.converged);
        for (j, board) in &inputs.boards {
            let mean = board_score(board, &state.user_score);
            assert!((state.board_score[j] - mean).abs() < 1e-9);
        }
    }
}
