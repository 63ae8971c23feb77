//! The acceptance gate: ten externally checkable properties, each with
//! an oracle implemented independently of the code path it checks.
//! Run with `cargo test --test acceptance -- --nocapture` to see one
//! PASS line per criterion.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use collegium::identity::{ContentHash, PersonId};
use collegium::journal::{quorum_check, JournalId};
use collegium::ledger::Ledger;
use collegium::market::{
    match_reviewers, settle, FieldThresholds, MarketRules, MarketSubmission, RsUpdateMode,
    ScientistProfile, SubmissionId, SubmissionStatus,
};
use collegium::money::Ppm;
use collegium::reputation::{
    solve_fixed_point, CitationGraph, ReputationInputs, ServiceInterval, SolverOptions,
};
use collegium::review::{accept_by_mean, assign_reviewers, split_review_fee};
use collegium::sim::{self, AgentSpec, JournalSpec, Policy, Role, Scenario, Target};
use collegium::state::ProtocolConfig;
use collegium::EventKind;

fn person(n: u8) -> PersonId {
    PersonId([n; 32])
}

// ---------------------------------------------------------------------------
// 1. The time-weighted user-score example: 6 units at journal score 10
//    plus 12 units at score 5 give 6.666…

#[test]
fn criterion_01_worked_user_score_example() {
    let scores: BTreeMap<JournalId, f64> = [
        (JournalId(ContentHash([1; 32])), 10.0),
        (JournalId(ContentHash([2; 32])), 5.0),
    ]
    .into();
    let a = ServiceInterval {
        person: person(1),
        journal: JournalId(ContentHash([1; 32])),
        from_day: 0,
        to_day: 6,
    };
    let b = ServiceInterval {
        person: person(1),
        journal: JournalId(ContentHash([2; 32])),
        from_day: 6,
        to_day: 18,
    };
    let got = collegium::reputation::user_score(&[&a, &b], &scores);
    let expected = 6.0 / 18.0 * 10.0 + 12.0 / 18.0 * 5.0;
    assert!((got - expected).abs() < 1e-6, "got {got}");
    assert!((got - 6.666_666_666).abs() < 1e-6);
    println!("PASS  criterion 1: worked user-score example = {got:.9}");
}

// ---------------------------------------------------------------------------
// 2. Fee-split conservation on 10,000 random cases.

#[test]
fn criterion_02_fee_split_conservation() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0002);
    for case in 0..10_000 {
        let n = rng.random_range(1..=6);
        let scored: Vec<(PersonId, u8)> = (0..n)
            .map(|i| (person(i as u8 + 1), rng.random_range(1..=5)))
            .collect();
        let fee: u64 = rng.random_range(0..=1_000_000_000);
        let keep = Ppm::from_f64(rng.random_range(0.0..=1.0));
        let payout = split_review_fee(fee, keep, &scored);
        let total = payout.journal_share
            + payout.refund_to_authors
            + payout
                .reviewer_shares
                .iter()
                .map(|(_, r)| *r)
                .sum::<u64>();
        assert_eq!(total, fee, "case {case}: conservation broke");
        assert_eq!(payout.reviewer_shares.len(), n);
        // Shares are u64, hence ≥ 0 by construction; pin the count and
        // sanity of each share instead.
        for (_, share) in &payout.reviewer_shares {
            assert!(*share <= fee);
        }
    }
    println!("PASS  criterion 2: 10,000 fee splits conserve exactly");
}

// ---------------------------------------------------------------------------
// 3. Publication decision equals the brute-force mean rule on every
//    score vector with n ≤ 4.

#[test]
fn criterion_03_decision_matches_brute_force() {
    let mut cases = 0;
    for n in 1..=4usize {
        let mut vec = vec![1u8; n];
        loop {
            let mean: f64 = vec.iter().map(|&s| s as f64).sum::<f64>() / n as f64;
            let oracle = mean > 3.0;
            assert_eq!(accept_by_mean(&vec), oracle, "scores {vec:?}");
            cases += 1;
            let mut i = 0;
            while i < n && vec[i] == 5 {
                vec[i] = 1;
                i += 1;
            }
            if i == n {
                break;
            }
            vec[i] += 1;
        }
    }
    assert_eq!(cases, 5 + 25 + 125 + 625);
    println!("PASS  criterion 3: decision rule matches brute force on {cases} vectors");
}

// ---------------------------------------------------------------------------
// 4. Quorum arithmetic equals the ceiling oracle for every board size
//    and fraction on the grid.

#[test]
fn criterion_04_quorum_matches_ceiling_oracle() {
    let mut checked = 0;
    for n in 1..=12usize {
        let board: Vec<PersonId> = (1..=n as u8).map(person).collect();
        for q in [0.34, 0.5, 0.51, 0.66, 0.75, 1.0] {
            let required_oracle = (q * n as f64).ceil() as usize;
            for approvals in 0..=n {
                let signers: Vec<PersonId> = board[..approvals].to_vec();
                let check = quorum_check(Ppm::from_f64(q), &board, signers.clone());
                assert_eq!(
                    check.met(),
                    approvals >= required_oracle,
                    "n={n} q={q} approvals={approvals}"
                );
                // Outsiders and duplicates never move the count.
                let mut padded = signers;
                padded.push(person(200));
                padded.extend_from_slice(&board[..approvals]);
                let check = quorum_check(Ppm::from_f64(q), &board, padded);
                assert_eq!(check.got(), approvals);
                checked += 1;
            }
        }
    }
    println!("PASS  criterion 4: quorum thresholds match ceil(q·n) on {checked} cases");
}

// ---------------------------------------------------------------------------
// 5. Matching equals the exhaustive subset optimum on random pools.

/// Independent oracle: enumerate all size-3 index triples over the
/// fingerprint-sorted pool, apply the budget, the mixed-spread
/// preference, the ΣRS objective, and first-wins (lexicographic)
/// tie-breaking.
fn oracle_match(bid: u64, pool: &[&ScientistProfile]) -> Option<Vec<PersonId>> {
    let n = pool.len();
    if n < 3 {
        return None;
    }
    let mean = pool.iter().map(|p| p.rs).sum::<f64>() / n as f64;
    let var = pool.iter().map(|p| (p.rs - mean).powi(2)).sum::<f64>() / n as f64;
    let delta = var.sqrt();

    let mut best_any: Option<(f64, Vec<usize>)> = None;
    let mut best_mixed: Option<(f64, Vec<usize>)> = None;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let ask = pool[i].ask + pool[j].ask + pool[k].ask;
                if ask > bid {
                    continue;
                }
                let rs = pool[i].rs + pool[j].rs + pool[k].rs;
                let hi = pool[i].rs.max(pool[j].rs).max(pool[k].rs);
                let lo = pool[i].rs.min(pool[j].rs).min(pool[k].rs);
                if best_any.as_ref().map_or(true, |(b, _)| rs > *b) {
                    best_any = Some((rs, vec![i, j, k]));
                }
                if hi - lo >= delta && best_mixed.as_ref().map_or(true, |(b, _)| rs > *b) {
                    best_mixed = Some((rs, vec![i, j, k]));
                }
            }
        }
    }
    best_mixed
        .or(best_any)
        .map(|(_, combo)| combo.into_iter().map(|i| pool[i].person).collect())
}

#[test]
fn criterion_05_matching_equals_subset_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0005);
    let mut matched = 0;
    let mut infeasible = 0;
    for case in 0..200 {
        let n = rng.random_range(3..=10);
        let owned: Vec<ScientistProfile> = (0..n)
            .map(|_| {
                let mut id = [0u8; 32];
                rng.fill(&mut id);
                ScientistProfile {
                    person: PersonId(id),
                    keywords: ["field".to_string()].into(),
                    rs: (rng.random_range(5..=80) as f64) / 10.0,
                    ask: rng.random_range(1..=40),
                    capacity: 3,
                    active: 0,
                }
            })
            .collect();
        let mut pool: Vec<&ScientistProfile> = owned.iter().collect();
        pool.sort_by_key(|p| p.person);
        let bid = if case % 5 == 0 {
            rng.random_range(0..=5) // usually infeasible
        } else {
            rng.random_range(20..=120)
        };
        let got = match_reviewers(bid, &pool, 3).ok();
        let want = oracle_match(bid, &pool);
        assert_eq!(got, want, "case {case}: bid {bid}");
        match got {
            Some(_) => matched += 1,
            None => infeasible += 1,
        }
    }
    assert!(matched > 0 && infeasible > 0, "both outcomes exercised");
    println!(
        "PASS  criterion 5: matcher equals brute force on 200 pools ({matched} matched, {infeasible} infeasible)"
    );
}

// ---------------------------------------------------------------------------
// 6. The reputation fixed point agrees with bottom-up topological
//    evaluation on acyclic instances and terminates honestly on cyclic
//    ones.

struct AcyclicInstance {
    inputs: ReputationInputs,
    /// Journal ids in evaluation order (citers and services always
    /// point earlier in the order).
    order: Vec<JournalId>,
}

/// Random instance whose dependency structure is a DAG: journal k's
/// papers may cite only journals later in the order, and board members
/// of journal k may have served only journals earlier in the order, so
/// one ascending pass computes the exact fixed point.
fn random_acyclic(seed: u64) -> AcyclicInstance {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let journals = rng.random_range(2..=10usize);
    let order: Vec<JournalId> = (0..journals)
        .map(|k| JournalId(ContentHash([k as u8 + 1; 32])))
        .collect();

    let mut inputs = ReputationInputs::default();
    let mut next_person = 1u8;
    let mut next_paper = 1u8;
    let mut papers_of: Vec<Vec<ContentHash>> = vec![Vec::new(); journals];

    let mut total_papers = 0;
    for k in 0..journals {
        // Board: 1..=3 fresh persons, possibly with service strictly
        // earlier in the order.
        let board_size = rng.random_range(1..=3usize);
        let mut board = Vec::new();
        for _ in 0..board_size {
            let p = person(next_person);
            next_person += 1;
            board.push(p);
            if k > 0 && rng.random_bool(0.6) {
                let served = rng.random_range(0..k);
                inputs.intervals.push(ServiceInterval {
                    person: p,
                    journal: order[served],
                    from_day: 0,
                    to_day: rng.random_range(1..=30),
                });
            }
        }
        board.sort();
        inputs.boards.insert(order[k], board);

        let paper_count = rng.random_range(0..=4usize).min(40 - total_papers);
        for _ in 0..paper_count {
            let hash = ContentHash([next_paper; 32]);
            next_paper += 1;
            total_papers += 1;
            inputs.graph.add_paper(hash, order[k]);
            papers_of[k].push(hash);
        }
    }

    // Citations: journal k cites journals later in the order (whose
    // scores therefore never depend on k), plus the odd dangling hash.
    for k in 0..journals {
        for &citing in &papers_of[k] {
            for later in k + 1..journals {
                for &cited in &papers_of[later] {
                    if rng.random_bool(0.3) {
                        inputs.graph.add_citation(citing, cited);
                    }
                }
            }
            if rng.random_bool(0.1) {
                inputs.graph.add_citation(citing, ContentHash([250; 32]));
            }
        }
    }

    AcyclicInstance { inputs, order }
}

/// One interleaved bottom-up pass. At step k every dependency already
/// sits at an earlier index: board(k) needs the scores of journals its
/// members served (all < k), and score(k) needs the boards of its
/// citers (all < k, because papers cite later journals only).
fn topological_oracle(instance: &AcyclicInstance) -> BTreeMap<JournalId, f64> {
    let inputs = &instance.inputs;
    let mut journal_score: BTreeMap<JournalId, f64> = BTreeMap::new();
    let mut board_score: BTreeMap<JournalId, f64> = BTreeMap::new();
    for jid in &instance.order {
        let board = &inputs.boards[jid];
        let mut board_total = 0.0;
        for member in board {
            let intervals: Vec<&ServiceInterval> = inputs
                .intervals
                .iter()
                .filter(|iv| iv.person == *member)
                .collect();
            let total: u64 = intervals.iter().map(|iv| iv.to_day - iv.from_day).sum();
            let user = if total == 0 {
                1.0
            } else {
                intervals
                    .iter()
                    .map(|iv| {
                        (iv.to_day - iv.from_day) as f64 / total as f64
                            * journal_score.get(&iv.journal).copied().unwrap_or(0.0)
                    })
                    .sum()
            };
            board_total += user;
        }
        board_score.insert(*jid, board_total / board.len() as f64);

        let papers = inputs.graph.paper_count(jid);
        let score = if papers == 0 {
            0.0
        } else {
            inputs
                .graph
                .citations
                .iter()
                .filter(|(_, cited)| inputs.graph.publishers.get(cited) == Some(jid))
                .filter_map(|(citing, _)| inputs.graph.publishers.get(citing))
                .map(|cj| board_score.get(cj).copied().unwrap_or(0.0))
                .sum::<f64>()
                / papers as f64
        };
        journal_score.insert(*jid, score);
    }
    journal_score
}

#[test]
fn criterion_06_reputation_fixed_point_vs_topological_oracle() {
    // Acyclic: the solver must land on the bottom-up values.
    for seed in 0..50u64 {
        let instance = random_acyclic(0x5eed_0600 + seed);
        let solved = solve_fixed_point(&instance.inputs, SolverOptions::default());
        assert!(solved.converged, "acyclic instance {seed} did not converge");
        let oracle = topological_oracle(&instance);
        for (jid, want) in &oracle {
            let got = solved.journal_score[jid];
            assert!(
                (got - want).abs() < 1e-7,
                "instance {seed} journal {jid:?}: got {got}, want {want}"
            );
        }
    }

    // Cyclic: random tangles must either converge inside the iteration
    // budget or report non-convergence; consistency must hold whenever
    // convergence is claimed.
    let mut converged = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0650 + seed);
        let journals = rng.random_range(2..=6usize);
        let mut inputs = ReputationInputs::default();
        let ids: Vec<JournalId> = (0..journals)
            .map(|k| JournalId(ContentHash([k as u8 + 1; 32])))
            .collect();
        let mut next_paper = 1u8;
        let mut papers: Vec<Vec<ContentHash>> = vec![Vec::new(); journals];
        for (k, jid) in ids.iter().enumerate() {
            let mut board = Vec::new();
            for b in 0..rng.random_range(1..=2usize) {
                let p = person(k as u8 * 4 + b as u8 + 1);
                board.push(p);
                // Members serve their own journal: a guaranteed cycle.
                inputs.intervals.push(ServiceInterval {
                    person: p,
                    journal: *jid,
                    from_day: 0,
                    to_day: 10,
                });
            }
            board.sort();
            inputs.boards.insert(*jid, board);
            for _ in 0..rng.random_range(1..=3usize) {
                let h = ContentHash([next_paper; 32]);
                next_paper += 1;
                inputs.graph.add_paper(h, *jid);
                papers[k].push(h);
            }
        }
        for k in 0..journals {
            for other in 0..journals {
                if k == other {
                    continue;
                }
                if rng.random_bool(0.5) {
                    inputs
                        .graph
                        .add_citation(papers[k][0], papers[other][0]);
                }
            }
        }
        let solved = solve_fixed_point(&inputs, SolverOptions::default());
        assert!(solved.iterations <= 1000);
        if solved.converged {
            converged += 1;
            assert!(solved.residual < 1e-9);
            for (jid, board) in &inputs.boards {
                let mean = collegium::reputation::board_score(board, &solved.user_score);
                assert!((solved.board_score[jid] - mean).abs() < 1e-9);
            }
        }
    }
    println!(
        "PASS  criterion 6: 50 acyclic instances match the oracle within 1e-7; 50 cyclic instances terminated honestly ({converged} converged)"
    );
}

// ---------------------------------------------------------------------------
// Shared random-scenario generator for criteria 7 and 8.

fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let members = rng.random_range(2..=4usize);
    let authors = rng.random_range(1..=2usize);
    let reviewers = rng.random_range(0..=3usize);
    let with_journal = rng.random_bool(0.85);

    let mut agents = Vec::new();
    for m in 0..members {
        agents.push(AgentSpec {
            name: format!("m{m}"),
            role: Role::Member,
            target: Target::Market,
            wallet: rng.random_range(0..=2_000_000),
            keywords: vec!["field".into()],
            policy: Policy {
                approve_bias: rng.random_range(-0.1..0.4),
                miss_prob: rng.random_range(0.0..0.4),
                review_delay_max: rng.random_range(1..=4),
                ..Policy::default()
            },
            joins_day: 0,
            leaves_day: None,
        });
    }
    for a in 0..authors {
        let target = if with_journal && rng.random_bool(0.7) {
            Target::Journal("house".into())
        } else {
            Target::Market
        };
        agents.push(AgentSpec {
            name: format!("t{a}"),
            role: Role::Author,
            target,
            wallet: rng.random_range(10_000_000..=80_000_000),
            keywords: vec!["field".into()],
            policy: Policy {
                submit_every: rng.random_range(3..=9),
                quality_mean: rng.random_range(2.0..5.0),
                fee_base: rng.random_range(500_000..=3_000_000),
                bid_fraction: rng.random_range(0.8..1.5),
                cite_count: rng.random_range(0..=3),
                ..Policy::default()
            },
            joins_day: 0,
            leaves_day: None,
        });
    }
    for r in 0..reviewers {
        let join_target = if with_journal && rng.random_bool(0.4) {
            Some("house".to_string())
        } else {
            None
        };
        agents.push(AgentSpec {
            name: format!("r{r}"),
            role: Role::Reviewer,
            target: Target::Market,
            wallet: rng.random_range(0..=5_000_000),
            keywords: vec!["field".into()],
            policy: Policy {
                ask_markup: rng.random_range(0.8..1.6),
                price_unit: rng.random_range(5_000..=30_000),
                capacity: rng.random_range(1..=4),
                diligence: rng.random_range(2.0..5.0),
                join_bid: rng.random_range(0..=500_000),
                join_every: if join_target.is_some() {
                    rng.random_range(5..=12)
                } else {
                    0
                },
                join_target,
                ..Policy::default()
            },
            joins_day: 0,
            leaves_day: if rng.random_bool(0.2) {
                Some(rng.random_range(10..=25))
            } else {
                None
            },
        });
    }

    let journals = if with_journal {
        let spend = rng.random_range(0.3..0.7);
        vec![JournalSpec {
            name: "house".into(),
            founders: (0..members).map(|m| format!("m{m}")).collect(),
            params: collegium::journal::JournalParams {
                fee_keep: Ppm::from_f64(rng.random_range(0.0..0.5)),
                anonymous_reviewers: rng.random_bool(0.3),
                review_days: rng.random_range(3..=8),
                reviewers_per_paper: rng.random_range(1..=members as u32),
                accept_quorum: Ppm::from_f64(rng.random_range(0.3..1.0)),
                spend_quorum: Ppm::from_f64(spend),
                modify_quorum: Ppm::from_f64(rng.random_range(spend + 0.05..1.0)),
            },
        }]
    } else {
        Vec::new()
    };

    Scenario {
        seed: rng.random(),
        horizon_days: rng.random_range(15..=35),
        step_days: 1,
        sample_every: 1_000,
        config: ProtocolConfig::default(),
        journals,
        agents,
    }
}

// ---------------------------------------------------------------------------
// 7. Replay determinism and corruption detection.

#[test]
fn criterion_07_replay_determinism_and_corruption() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0007);
    let mut total_events = 0u64;
    for s in 0..100u64 {
        let scenario = random_scenario(0x5eed_0700 + s);
        let out = sim::run(&scenario).expect("run");
        let events = out.ledger.events().to_vec();
        total_events += events.len() as u64;

        // Folding the log one event at a time IS the replay of every
        // prefix; record the digest at each step.
        let mut incremental = Ledger::new(scenario.config.clone());
        let mut prefix_digests = Vec::with_capacity(events.len());
        for event in &events {
            incremental.append(event.clone()).expect("replay");
            prefix_digests.push(incremental.digest());
        }
        assert_eq!(
            incremental.digest(),
            out.ledger.digest(),
            "scenario {s}: live and replayed digests differ"
        );
        // Cold re-replays of sampled prefixes must land on the same
        // digests the fold recorded.
        let step = (events.len() / 7).max(1);
        for k in (0..events.len()).step_by(step).chain([events.len() - 1]) {
            let fresh = Ledger::replay(
                scenario.config.clone(),
                events[..=k].iter().cloned(),
            )
            .expect("prefix replay");
            assert_eq!(fresh.digest(), prefix_digests[k], "scenario {s} prefix {k}");
        }

        // A single flipped byte anywhere must be detected.
        let bytes = out.ledger.to_bytes();
        for _ in 0..3 {
            let pos = rng.random_range(8..bytes.len());
            let mut corrupt = bytes.clone();
            corrupt[pos] ^= 1 << rng.random_range(0..8);
            let outcome = Ledger::decode_records(&corrupt)
                .and_then(|evs| Ledger::replay(scenario.config.clone(), evs));
            assert!(
                outcome.is_err(),
                "scenario {s}: byte flip at {pos} went undetected"
            );
        }
    }
    println!(
        "PASS  criterion 7: 100 scenarios ({total_events} events) replay identically at every prefix; corruption always detected"
    );
}

// ---------------------------------------------------------------------------
// 8. Money conservation across 1,000 fuzzed scenarios.

#[test]
fn criterion_08_money_conservation_in_fuzzed_scenarios() {
    let mut checked_events = 0u64;
    for s in 0..1000u64 {
        let scenario = random_scenario(0x5eed_0800 + s);
        let out = sim::run(&scenario).expect("run");

        // Replay event by event, recomputing the full balance sheet
        // from scratch each time.
        let mut ledger = Ledger::new(scenario.config.clone());
        let mut minting_done = false;
        for event in out.ledger.events() {
            if event.kind() != EventKind::KeyRegister {
                minting_done = true;
            } else {
                assert!(
                    !minting_done,
                    "scenario {s}: mint after the genesis prelude"
                );
            }
            ledger.append(event.clone()).expect("replay");
            let state = ledger.state();
            let wallets: u64 = state.wallets.values().sum();
            let journal_wallets: u64 = state.journal_wallets.values().sum();
            let escrows: u64 = state.pending_joins.values().map(|p| p.bid).sum::<u64>()
                + state.rounds.values().map(|r| r.escrow).sum::<u64>()
                + state.submissions.values().map(|x| x.escrow).sum::<u64>();
            assert_eq!(
                wallets + journal_wallets + escrows,
                state.minted,
                "scenario {s} seq {}: balance sheet broke",
                event.seq
            );
            checked_events += 1;
        }
    }
    println!(
        "PASS  criterion 8: Σ wallets invariant post-genesis across 1,000 scenarios ({checked_events} events)"
    );
}

// ---------------------------------------------------------------------------
// 9. Reviewer selection is uniform: 6 eligible, 3 drawn, everyone
//    appears in 50% ± 3% of 10,000 seeded draws.

#[test]
fn criterion_09_reviewer_selection_uniformity() {
    let journal = JournalId(ContentHash([9; 32]));
    let paper = ContentHash([7; 32]);
    let board: Vec<PersonId> = (1..=6).map(person).collect();
    let mut counts: BTreeMap<PersonId, u32> = board.iter().map(|p| (*p, 0)).collect();
    for nonce in 0..10_000u64 {
        for picked in assign_reviewers(&journal, &paper, nonce, &board, 3).unwrap() {
            *counts.get_mut(&picked).unwrap() += 1;
        }
    }
    for (p, count) in &counts {
        assert!(
            (4_700..=5_300).contains(count),
            "member {p:?} drawn {count} times out of 10,000"
        );
    }
    println!(
        "PASS  criterion 9: inclusion frequencies {:?} all within 5000 ± 300",
        counts.values().collect::<Vec<_>>()
    );
}

// ---------------------------------------------------------------------------
// 10. Market settlement rules on 1,000 random settled submissions.

#[test]
fn criterion_10_market_settlement_rules() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0010);
    for case in 0..1000 {
        let n = rng.random_range(3..=5usize);
        let reviewers: Vec<PersonId> = (1..=n as u8).map(person).collect();
        let asks: Vec<u64> = (0..n).map(|_| rng.random_range(0..=100)).collect();
        let bid = asks.iter().sum::<u64>() + rng.random_range(0..=50);

        let mut paper_scores = BTreeMap::new();
        for r in &reviewers {
            paper_scores.insert(*r, rng.random_range(1..=5u8));
        }
        let mut report_scores = BTreeMap::new();
        for a in &reviewers {
            for b in &reviewers {
                if a != b {
                    report_scores.insert((*a, *b), rng.random_range(1..=5u8));
                }
            }
        }
        let keywords: BTreeSet<String> = ["field".to_string()].into();
        let submission = MarketSubmission {
            id: SubmissionId(ContentHash([1; 32])),
            paper: ContentHash([2; 32]),
            payer: person(99),
            keywords: keywords.clone(),
            bid,
            escrow: bid,
            status: SubmissionStatus::ReportScored,
            reviewers: reviewers.clone(),
            asks: asks.clone(),
            paper_scores: paper_scores.clone(),
            reports: BTreeMap::new(),
            report_scores: report_scores.clone(),
            accepted: None,
        };

        let tau = rng.random_range(2.0..4.5);
        let rules = MarketRules {
            group_size: 3,
            report_threshold_tenths: 30,
            rs_mode: RsUpdateMode::Additive,
            thresholds: FieldThresholds {
                default: tau,
                per_field: BTreeMap::new(),
            },
        };
        let rs_before: BTreeMap<PersonId, f64> = reviewers
            .iter()
            .map(|r| (*r, rng.random_range(1.0..20.0)))
            .collect();
        let outcome = settle(&submission, &rules, |p| rs_before[p]);

        let mut paid_total = 0u64;
        for (i, r) in reviewers.iter().enumerate() {
            let received: Vec<u64> = reviewers
                .iter()
                .filter(|s| *s != r)
                .map(|s| report_scores[&(*s, *r)] as u64)
                .collect();
            let mean = received.iter().sum::<u64>() as f64 / received.len() as f64;
            let slot = &outcome.reviewers[i];
            assert_eq!(slot.person, *r);
            // Payment iff the received report mean clears 3.0
            // (inclusive), refund otherwise.
            assert_eq!(slot.paid, mean >= 3.0, "case {case} reviewer {i}");
            if slot.paid {
                paid_total += asks[i];
            }
            // RS moves additively by exactly the report mean.
            assert_eq!(slot.rs_after, rs_before[r] + mean);
        }
        assert_eq!(paid_total + outcome.refund_to_authors, bid, "case {case}");

        let s_p = paper_scores.values().map(|&s| s as f64).sum::<f64>() / n as f64;
        assert_eq!(outcome.accepted, s_p > tau, "case {case}");
    }
    println!("PASS  criterion 10: 1,000 settlements follow payment, refund, RS, and acceptance rules exactly");
}
