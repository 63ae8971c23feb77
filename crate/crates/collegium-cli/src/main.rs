//! Command-line front end for the peer-review ledger.
//!
//! Every mutating subcommand appends at least one signed event to the
//! data directory's ledger (or, with `--dry-run`, validates the event
//! and appends nothing). Domain errors exit 1 with a stable
//! `ERROR <CODE>: message` line on stderr; usage errors exit 2.

mod store;

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use collegium::events::{self, DecisionOutcome, EventBody};
use collegium::identity::{keygen, ContentHash, PersonId, Scheme, SignatureRecord};
use collegium::journal::{JournalChange, JournalId, JournalParams};
use collegium::ledger::{Ledger, LedgerError};
use collegium::market::{eligible_pool, match_reviewers, settle, suggest_fair_bid, SubmissionId};
use collegium::money::Ppm;
use collegium::reputation::solve_fixed_point;
use collegium::review::{
    accept_by_mean, assign_reviewers, final_vote_passes, min_reviews, pseudonym,
    split_review_fee, RoundId, RoundStatus,
};
use collegium::sim::{self, Scenario};
use collegium::state::State;

use store::{default_data_dir, parse_seed, split_list, Store};

#[derive(Parser)]
#[command(
    name = "collegium",
    about = "Board-governed journals, reviewer markets, and reputation over a signed event ledger",
    version
)]
struct Cli {
    /// Data directory (env: COLLEGIUM_DATA_DIR).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Protocol config file (defaults to <data>/config.cfg when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Simulated day stamped on emitted events (defaults to the
    /// ledger's current day).
    #[arg(long, global = true)]
    day: Option<u64>,
    /// Validate and print the event(s) without appending anything.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key, store it locally, and register it on the ledger.
    Keygen(KeygenArgs),
    #[command(subcommand)]
    Journal(JournalCmd),
    #[command(subcommand)]
    Paper(PaperCmd),
    #[command(subcommand)]
    Review(ReviewCmd),
    #[command(subcommand)]
    Round(RoundCmd),
    #[command(subcommand)]
    Market(MarketCmd),
    #[command(subcommand)]
    Reputation(ReputationCmd),
    /// Run a scenario file and print its summary and ledger digest.
    Simulate(SimulateArgs),
    /// Re-fold the stored ledger and verify every link and signature.
    Replay {
        /// Exit nonzero on the first violation.
        #[arg(long)]
        verify: bool,
    },
    /// Dump the replayed state as tab-separated tables.
    Export {
        #[arg(long, default_value = "tabular")]
        format: String,
    },
}

#[derive(Args)]
struct KeygenArgs {
    /// Local label for the key.
    #[arg(long)]
    name: String,
    #[arg(long, default_value = "ed25519")]
    scheme: String,
    /// 64 hex chars; omit for a random seed.
    #[arg(long)]
    seed: Option<String>,
    /// Starting balance minted at registration, micro-credits.
    #[arg(long, default_value_t = 0)]
    balance: u64,
    /// Mark the key as institutionally validated.
    #[arg(long)]
    validated: bool,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, default_value_t = 0.2)]
    fee_keep: f64,
    #[arg(long)]
    anonymous: bool,
    #[arg(long, default_value_t = 10)]
    review_days: u64,
    #[arg(long, default_value_t = 3)]
    reviewers: u32,
    #[arg(long, default_value_t = 0.5)]
    accept_quorum: f64,
    #[arg(long, default_value_t = 0.5)]
    spend_quorum: f64,
    #[arg(long, default_value_t = 0.66)]
    modify_quorum: f64,
}

impl ParamArgs {
    fn to_params(&self) -> JournalParams {
        JournalParams {
            fee_keep: Ppm::from_f64(self.fee_keep),
            anonymous_reviewers: self.anonymous,
            review_days: self.review_days,
            reviewers_per_paper: self.reviewers,
            accept_quorum: Ppm::from_f64(self.accept_quorum),
            spend_quorum: Ppm::from_f64(self.spend_quorum),
            modify_quorum: Ppm::from_f64(self.modify_quorum),
        }
    }
}

#[derive(Subcommand)]
enum JournalCmd {
    /// Found a journal; all founders' local keys must be present.
    Create {
        /// Comma-separated founder key names.
        #[arg(long)]
        founders: String,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Modify board or parameters, creating the descendant journal.
    Modify {
        #[arg(long)]
        journal: String,
        /// Comma-separated key names or fingerprints to add.
        #[arg(long)]
        add: Option<String>,
        /// Comma-separated key names or fingerprints to remove.
        #[arg(long)]
        remove: Option<String>,
        /// Change the parameters instead of the board.
        #[arg(long)]
        set_params: bool,
        #[command(flatten)]
        params: ParamArgs,
        /// Approving member key names.
        #[arg(long, default_value = "")]
        approvers: String,
        /// Acting member key name.
        #[arg(long = "as")]
        actor: String,
    },
    /// Bid a joining fee.
    Join {
        #[arg(long)]
        journal: String,
        #[arg(long)]
        bid: u64,
        #[arg(long = "as")]
        actor: String,
        #[arg(long)]
        expires_day: Option<u64>,
    },
    /// Vote on a pending join proposal.
    Decide {
        #[arg(long)]
        journal: String,
        #[arg(long)]
        proposal: String,
        #[arg(long, default_value = "")]
        approvers: String,
        #[arg(long = "as")]
        actor: String,
    },
    /// Spend from the journal wallet.
    Spend {
        #[arg(long)]
        journal: String,
        #[arg(long)]
        amount: u64,
        #[arg(long)]
        recipient: String,
        #[arg(long, default_value = "")]
        approvers: String,
        #[arg(long = "as")]
        actor: String,
    },
    /// Move a superseded journal's whole balance to its descendant.
    Transfer {
        #[arg(long)]
        ancestor: String,
        #[arg(long)]
        descendant: String,
        #[arg(long, default_value = "")]
        approvers: String,
        #[arg(long = "as")]
        actor: String,
    },
    /// Print a journal and its lineage chain.
    Show { journal: String },
}

#[derive(Subcommand)]
enum PaperCmd {
    /// Hash a manuscript into the blob store and publish it.
    Publish {
        file: PathBuf,
        /// Comma-separated author key names (all must be local).
        #[arg(long)]
        authors: String,
        #[arg(long, default_value = "")]
        keywords: String,
        /// Comma-separated hex hashes of cited papers.
        #[arg(long, default_value = "")]
        cites: String,
    },
    /// Declare additional citations from an existing paper.
    Cite {
        #[arg(long)]
        paper: String,
        #[arg(long)]
        cites: String,
        #[arg(long = "as")]
        actor: String,
    },
    /// Bid a review fee to a journal.
    Bid {
        #[arg(long)]
        paper: String,
        #[arg(long)]
        journal: String,
        #[arg(long)]
        fee: u64,
        #[arg(long = "as")]
        actor: String,
    },
}

#[derive(Subcommand)]
enum ReviewCmd {
    /// Record the board's acceptance vote on a bid.
    Accept {
        #[arg(long)]
        round: String,
        #[arg(long, default_value = "")]
        approvers: String,
        /// Author key confirming they want to proceed.
        #[arg(long)]
        confirm: String,
        #[arg(long = "as")]
        actor: String,
    },
    /// Draw and record the reviewer assignment.
    Assign {
        #[arg(long)]
        round: String,
        #[arg(long, default_value_t = 0)]
        nonce: u64,
        #[arg(long = "as")]
        actor: String,
    },
    /// Submit a review score and report.
    Submit {
        #[arg(long)]
        round: String,
        #[arg(long)]
        score: u8,
        #[arg(long)]
        report: PathBuf,
        #[arg(long = "as")]
        actor: String,
    },
    /// Record the publication decision the scores dictate.
    Decide {
        #[arg(long)]
        round: String,
        #[arg(long = "as")]
        actor: String,
    },
    /// Publish the final version of an accepted paper.
    FinalVersion {
        #[arg(long)]
        round: String,
        file: PathBuf,
        #[arg(long = "as")]
        actor: String,
    },
    /// Cast a final acceptance vote.
    FinalVote {
        #[arg(long)]
        round: String,
        /// `--approve true` or `--approve false`.
        #[arg(long, action = clap::ArgAction::Set)]
        approve: bool,
        #[arg(long = "as")]
        actor: String,
    },
    /// Execute the fee split and close the round.
    Settle {
        #[arg(long)]
        round: String,
        #[arg(long = "as")]
        actor: String,
    },
}

#[derive(Subcommand)]
enum RoundCmd {
    /// Print a review round (pseudonymous when the journal demands it).
    Show { round: String },
}

#[derive(Subcommand)]
enum MarketCmd {
    /// Post or update a reviewer ask.
    Ask {
        #[arg(long)]
        fee: u64,
        #[arg(long)]
        keywords: String,
        #[arg(long, default_value_t = 3)]
        capacity: u32,
        #[arg(long = "as")]
        actor: String,
    },
    /// Offer a paper to the market with a budget bid.
    Submit {
        #[arg(long)]
        paper: String,
        #[arg(long)]
        keywords: String,
        #[arg(long)]
        bid: u64,
        #[arg(long = "as")]
        actor: String,
    },
    /// Match every queued submission that clears the market.
    Sweep {
        #[arg(long = "as")]
        actor: String,
    },
    /// Submit a step-1 paper review.
    Review {
        #[arg(long)]
        submission: String,
        #[arg(long)]
        score: u8,
        #[arg(long)]
        report: PathBuf,
        #[arg(long = "as")]
        actor: String,
    },
    /// Submit step-2 scores for the other reviewers' reports.
    ReportScores {
        #[arg(long)]
        submission: String,
        /// name=score or fingerprint=score, comma-separated.
        #[arg(long)]
        scores: String,
        #[arg(long = "as")]
        actor: String,
    },
    /// Settle a fully report-scored submission.
    Settle {
        #[arg(long)]
        submission: String,
        #[arg(long = "as")]
        actor: String,
    },
    Show {
        submission: String,
    },
    /// Suggest a fair budget for a keyword set.
    Suggest {
        #[arg(long)]
        keywords: String,
    },
}

#[derive(Subcommand)]
enum ReputationCmd {
    /// Solve the reputation fixed point and print the score tables.
    Report {
        #[arg(long)]
        at_day: Option<u64>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    scenario: PathBuf,
    /// Override the scenario's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write metrics rows to this file instead of stdout.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Also write the run's ledger (binary) to this path.
    #[arg(long)]
    save_ledger: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Die quietly when stdout is a closed pipe (e.g. `… | head`).
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::FAILURE
        }
    }
}

/// A rendered `ERROR <CODE>: message` line.
struct CliError(String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<LedgerError> for CliError {
    fn from(err: LedgerError) -> Self {
        let detail = match &err {
            LedgerError::ChainBreak { seq, reason } => format!("seq={seq} {reason}"),
            LedgerError::BadSignature { seq } => format!("seq={seq}"),
            other => other.to_string(),
        };
        CliError(format!("ERROR {}: {}", err.code(), detail))
    }
}

impl From<String> for CliError {
    fn from(msg: String) -> Self {
        CliError(format!("ERROR USAGE: {msg}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError(format!("ERROR IO: {err}"))
    }
}

/// Mutating-command context: the loaded ledger plus append/save
/// plumbing honoring `--dry-run`.
struct Ctx {
    store: Store,
    ledger: Ledger,
    day: u64,
    dry_run: bool,
    appended: usize,
    _lock: Option<store::LedgerLock>,
}

impl Ctx {
    fn open(
        cli_day: Option<u64>,
        dry_run: bool,
        store: Store,
        lock: bool,
    ) -> Result<Ctx, CliError> {
        let _lock = if lock && !dry_run {
            Some(store.lock()?)
        } else {
            None
        };
        let ledger = store.load_ledger()?;
        let day = cli_day
            .unwrap_or(ledger.current_day())
            .max(ledger.current_day());
        Ok(Ctx {
            store,
            ledger,
            day,
            dry_run,
            appended: 0,
            _lock,
        })
    }

    fn state(&self) -> &State {
        self.ledger.state()
    }

    fn submit(&mut self, key_name: &str, body: EventBody) -> Result<ContentHash, CliError> {
        let key = self.store.load_key(key_name)?;
        let event = self.ledger.build_event(&key, self.day, body)?;
        if self.dry_run {
            let mut probe = self.ledger.clone();
            let hash = probe.append(event)?;
            println!("dry-run: {}", probe.render_line(probe.len() as usize - 1));
            Ok(hash)
        } else {
            let hash = self.ledger.append(event)?;
            self.appended += 1;
            println!(
                "{}",
                self.ledger.render_line(self.ledger.len() as usize - 1)
            );
            Ok(hash)
        }
    }

    fn finish(self) -> Result<(), CliError> {
        if !self.dry_run && self.appended > 0 {
            self.store.save_ledger(&self.ledger)?;
            self.store.write_registry_file(&self.ledger)?;
        }
        Ok(())
    }

    fn approvals(
        &self,
        approvers: &str,
        message: &[u8],
    ) -> Result<Vec<SignatureRecord>, CliError> {
        let mut sigs = Vec::new();
        for name in split_list(approvers) {
            let key = self.store.load_key(&name)?;
            sigs.push(collegium::identity::sign(&key, message).map_err(|e| e.to_string())?);
        }
        Ok(sigs)
    }

    fn journal_id(&self, raw: &str) -> Result<JournalId, CliError> {
        let hash = ContentHash::from_hex(raw).map_err(|e| e.to_string())?;
        Ok(JournalId(hash))
    }

    fn round_id(&self, raw: &str) -> Result<RoundId, CliError> {
        Ok(RoundId(
            ContentHash::from_hex(raw).map_err(|e| e.to_string())?,
        ))
    }

    fn submission_id(&self, raw: &str) -> Result<SubmissionId, CliError> {
        Ok(SubmissionId(
            ContentHash::from_hex(raw).map_err(|e| e.to_string())?,
        ))
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let data_dir = cli.data_dir.clone().unwrap_or_else(default_data_dir);
    let store = Store::open(data_dir, cli.config.clone())?;

    match cli.command {
        Command::Keygen(args) => {
            let mut ctx = Ctx::open(cli.day, cli.dry_run, store, true)?;
            let scheme: Scheme = args.scheme.parse().map_err(|e| format!("{e}"))?;
            let seed = match &args.seed {
                Some(raw) => parse_seed(raw)?,
                None => rand::random::<[u8; 32]>(),
            };
            let key = keygen(scheme, seed);
            if !cli.dry_run {
                ctx.store.save_key(&args.name, &key)?;
            }
            let registered = ctx.submit(
                &args.name,
                EventBody::KeyRegister {
                    scheme,
                    public: key.public.clone(),
                    validated: args.validated,
                    initial_balance: args.balance,
                },
            );
            if registered.is_err() && !cli.dry_run {
                // Roll the key file back if registration failed.
                let _ = fs::remove_file(ctx.store.key_path(&args.name));
            }
            registered?;
            println!("fingerprint {}", key.person_id());
            ctx.finish()
        }
        Command::Journal(cmd) => journal_cmd(Ctx::open(cli.day, cli.dry_run, store, true)?, cmd),
        Command::Paper(cmd) => paper_cmd(Ctx::open(cli.day, cli.dry_run, store, true)?, cmd),
        Command::Review(cmd) => review_cmd(Ctx::open(cli.day, cli.dry_run, store, true)?, cmd),
        Command::Round(RoundCmd::Show { round }) => {
            let ctx = Ctx::open(cli.day, cli.dry_run, store, false)?;
            show_round(&ctx, &round)
        }
        Command::Market(cmd) => market_cmd(Ctx::open(cli.day, cli.dry_run, store, true)?, cmd),
        Command::Reputation(ReputationCmd::Report { at_day }) => {
            let ctx = Ctx::open(cli.day, cli.dry_run, store, false)?;
            reputation_report(&ctx, at_day)
        }
        Command::Simulate(args) => simulate(args),
        Command::Replay { verify: _ } => {
            let store_path = store.ledger_path();
            if !store_path.exists() {
                println!("empty ledger; nothing to verify");
                return Ok(());
            }
            let ledger = Ledger::load(&store_path, store.config.clone())?;
            println!("ok: {} events, digest {}", ledger.len(), ledger.digest());
            Ok(())
        }
        Command::Export { format } => {
            if format != "tabular" {
                return Err(format!("unknown export format `{format}`").into());
            }
            let ctx = Ctx::open(cli.day, cli.dry_run, store, false)?;
            export_tabular(&ctx);
            Ok(())
        }
    }
}

fn journal_cmd(mut ctx: Ctx, cmd: JournalCmd) -> Result<(), CliError> {
    match cmd {
        JournalCmd::Create { founders, params } => {
            let params = params.to_params();
            let names = split_list(&founders);
            if names.is_empty() {
                return Err("at least one founder required".to_string().into());
            }
            let mut ids = Vec::new();
            for name in &names {
                ids.push(ctx.store.load_key(name)?.person_id());
            }
            ids.sort();
            ids.dedup();
            let message = events::journal_create_message(&ids, &params);
            let mut signatures = Vec::new();
            for name in &names {
                let key = ctx.store.load_key(name)?;
                signatures
                    .push(collegium::identity::sign(&key, &message).map_err(|e| e.to_string())?);
            }
            ctx.submit(
                &names[0],
                EventBody::JournalCreate {
                    founders: ids.clone(),
                    params,
                    signatures,
                },
            )?;
            println!(
                "journal {}",
                collegium::journal::journal_id(&ids, &params, None)
            );
            ctx.finish()
        }
        JournalCmd::Modify {
            journal,
            add,
            remove,
            set_params,
            params,
            approvers,
            actor,
        } => {
            let journal = ctx.journal_id(&journal)?;
            let change = if set_params {
                JournalChange::Params(params.to_params())
            } else {
                let resolve = |raw: &Option<String>| -> Result<Vec<PersonId>, CliError> {
                    let mut out = Vec::new();
                    for name in raw.as_deref().map(split_list).unwrap_or_default() {
                        out.push(ctx.store.resolve_person(&name)?);
                    }
                    out.sort();
                    out.dedup();
                    Ok(out)
                };
                JournalChange::Board {
                    add: resolve(&add)?,
                    remove: resolve(&remove)?,
                }
            };
            let message = events::journal_modify_message(&journal, &change);
            let approvals = ctx.approvals(&approvers, &message)?;
            ctx.submit(
                &actor,
                EventBody::JournalModify {
                    journal,
                    change,
                    approvals,
                },
            )?;
            if let Some(d) = ctx
                .state()
                .journals
                .get(&journal)
                .and_then(|j| j.superseded_by)
            {
                println!("descendant {d}");
            }
            ctx.finish()
        }
        JournalCmd::Join {
            journal,
            bid,
            actor,
            expires_day,
        } => {
            let journal = ctx.journal_id(&journal)?;
            let expires = expires_day.unwrap_or(ctx.day + ctx.store.config.join_expiry_days);
            let hash = ctx.submit(
                &actor,
                EventBody::JoinBid {
                    journal,
                    bid,
                    expires_day: expires,
                },
            )?;
            println!("proposal {hash}");
            ctx.finish()
        }
        JournalCmd::Decide {
            journal,
            proposal,
            approvers,
            actor,
        } => {
            let journal = ctx.journal_id(&journal)?;
            let proposal = ContentHash::from_hex(&proposal).map_err(|e| e.to_string())?;
            let message = events::join_approval_message(&journal, &proposal);
            let approvals = ctx.approvals(&approvers, &message)?;
            ctx.submit(
                &actor,
                EventBody::JoinDecision {
                    journal,
                    proposal,
                    approvals,
                },
            )?;
            ctx.finish()
        }
        JournalCmd::Spend {
            journal,
            amount,
            recipient,
            approvers,
            actor,
        } => {
            let journal = ctx.journal_id(&journal)?;
            let recipient = ctx.store.resolve_person(&recipient)?;
            let message = events::spend_message(&journal, amount, &recipient);
            let approvals = ctx.approvals(&approvers, &message)?;
            ctx.submit(
                &actor,
                EventBody::BalanceSpend {
                    journal,
                    amount,
                    recipient,
                    approvals,
                },
            )?;
            ctx.finish()
        }
        JournalCmd::Transfer {
            ancestor,
            descendant,
            approvers,
            actor,
        } => {
            let ancestor = ctx.journal_id(&ancestor)?;
            let descendant = ctx.journal_id(&descendant)?;
            let message = events::transfer_message(&ancestor, &descendant);
            let approvals = ctx.approvals(&approvers, &message)?;
            ctx.submit(
                &actor,
                EventBody::BalanceTransfer {
                    ancestor,
                    descendant,
                    approvals,
                },
            )?;
            ctx.finish()
        }
        JournalCmd::Show { journal } => {
            let id = ctx.journal_id(&journal)?;
            let state = ctx.state();
            let mut cursor = Some(id);
            let mut chain = Vec::new();
            while let Some(jid) = cursor {
                let j = state
                    .journals
                    .get(&jid)
                    .ok_or_else(|| "no such journal".to_string())?;
                chain.push(j);
                cursor = j.ancestor;
            }
            chain.reverse();
            for j in chain {
                let marker = if j.id == id { "*" } else { " " };
                println!(
                    "{marker} {} created={} board={} balance={} superseded_by={}",
                    j.id,
                    j.created_at,
                    j.board.len(),
                    state.journal_balance(&j.id),
                    j.superseded_by
                        .map(|d| d.to_string())
                        .unwrap_or_else(|| "-".into()),
                );
                for m in &j.board {
                    println!("    member {m}");
                }
            }
            Ok(())
        }
    }
}

fn paper_cmd(mut ctx: Ctx, cmd: PaperCmd) -> Result<(), CliError> {
    match cmd {
        PaperCmd::Publish {
            file,
            authors,
            keywords,
            cites,
        } => {
            let paper = ctx.store.blobs().put_file(&file)?;
            let names = split_list(&authors);
            if names.is_empty() {
                return Err("at least one author required".to_string().into());
            }
            let mut ids = Vec::new();
            let mut signatures = Vec::new();
            for name in &names {
                let key = ctx.store.load_key(name)?;
                ids.push(key.person_id());
                signatures.push(
                    collegium::identity::sign(&key, paper.as_bytes())
                        .map_err(|e| e.to_string())?,
                );
            }
            ids.sort();
            ids.dedup();
            let mut kw = split_list(&keywords);
            kw.sort();
            kw.dedup();
            let mut cite_hashes = Vec::new();
            for raw in split_list(&cites) {
                cite_hashes.push(ContentHash::from_hex(&raw).map_err(|e| e.to_string())?);
            }
            cite_hashes.sort();
            cite_hashes.dedup();
            ctx.submit(
                &names[0],
                EventBody::PaperPublish {
                    paper,
                    authors: ids,
                    signatures,
                    keywords: kw,
                    cites: cite_hashes,
                },
            )?;
            println!("paper {paper}");
            ctx.finish()
        }
        PaperCmd::Cite {
            paper,
            cites,
            actor,
        } => {
            let paper = ContentHash::from_hex(&paper).map_err(|e| e.to_string())?;
            let mut cite_hashes = Vec::new();
            for raw in split_list(&cites) {
                cite_hashes.push(ContentHash::from_hex(&raw).map_err(|e| e.to_string())?);
            }
            cite_hashes.sort();
            cite_hashes.dedup();
            ctx.submit(
                &actor,
                EventBody::CitationDeclare {
                    paper,
                    cites: cite_hashes,
                },
            )?;
            ctx.finish()
        }
        PaperCmd::Bid {
            paper,
            journal,
            fee,
            actor,
        } => {
            let paper = ContentHash::from_hex(&paper).map_err(|e| e.to_string())?;
            let journal = ctx.journal_id(&journal)?;
            let hash = ctx.submit(
                &actor,
                EventBody::ReviewBid {
                    paper,
                    journal,
                    fee,
                },
            )?;
            println!("round {hash}");
            ctx.finish()
        }
    }
}

fn review_cmd(mut ctx: Ctx, cmd: ReviewCmd) -> Result<(), CliError> {
    match cmd {
        ReviewCmd::Accept {
            round,
            approvers,
            confirm,
            actor,
        } => {
            let round = ctx.round_id(&round)?;
            let message = events::review_accept_message(&round);
            let approvals = ctx.approvals(&approvers, &message)?;
            let confirm_key = ctx.store.load_key(&confirm)?;
            let confirmation = collegium::identity::sign(
                &confirm_key,
                &events::review_confirm_message(&round),
            )
            .map_err(|e| e.to_string())?;
            ctx.submit(
                &actor,
                EventBody::ReviewAcceptVote {
                    round,
                    approvals,
                    author_confirmation: Some(confirmation),
                },
            )?;
            ctx.finish()
        }
        ReviewCmd::Assign {
            round,
            nonce,
            actor,
        } => {
            let round_id = ctx.round_id(&round)?;
            let state = ctx.state();
            let round = state
                .rounds
                .get(&round_id)
                .ok_or_else(|| "no such round".to_string())?;
            let journal = state
                .journals
                .get(&round.journal)
                .ok_or_else(|| "no such journal".to_string())?;
            let paper = state
                .papers
                .get(&round.paper)
                .ok_or_else(|| "no such paper".to_string())?;
            let eligible: Vec<PersonId> = journal
                .board
                .iter()
                .filter(|m| !paper.is_author(m))
                .copied()
                .collect();
            let reviewers = assign_reviewers(
                &round.journal,
                &round.paper,
                nonce,
                &eligible,
                journal.params.reviewers_per_paper as usize,
            )
            .map_err(|e| CliError(format!("ERROR {}: {e}", e.code())))?;
            let (body_reviewers, pseudonyms) = if journal.params.anonymous_reviewers {
                let mut tokens: Vec<ContentHash> = reviewers
                    .iter()
                    .map(|r| pseudonym(r, &round.paper, &state.salt))
                    .collect();
                tokens.sort();
                (Vec::new(), tokens)
            } else {
                (reviewers, Vec::new())
            };
            ctx.submit(
                &actor,
                EventBody::ReviewerAssignment {
                    round: round_id,
                    nonce,
                    reviewers: body_reviewers,
                    pseudonyms,
                },
            )?;
            ctx.finish()
        }
        ReviewCmd::Submit {
            round,
            score,
            report,
            actor,
        } => {
            let round = ctx.round_id(&round)?;
            let report = ctx.store.blobs().put_file(&report)?;
            ctx.submit(
                &actor,
                EventBody::ReviewSubmit {
                    round,
                    score,
                    report,
                },
            )?;
            ctx.finish()
        }
        ReviewCmd::Decide { round, actor } => {
            let round_id = ctx.round_id(&round)?;
            let state = ctx.state();
            let round = state
                .rounds
                .get(&round_id)
                .ok_or_else(|| "no such round".to_string())?;
            let all_in = round.scores.len() == round.reviewers.len();
            let outcome =
                if !all_in && round.scores.len() < min_reviews(round.reviewers.len()) {
                    DecisionOutcome::Failed
                } else {
                    let scores: Vec<u8> = round.scores.values().copied().collect();
                    if accept_by_mean(&scores) {
                        DecisionOutcome::Accepted
                    } else {
                        DecisionOutcome::Rejected
                    }
                };
            ctx.submit(
                &actor,
                EventBody::PublicationDecision {
                    round: round_id,
                    outcome,
                },
            )?;
            println!("decision {}", outcome.name());
            ctx.finish()
        }
        ReviewCmd::FinalVersion { round, file, actor } => {
            let round = ctx.round_id(&round)?;
            let final_hash = ctx.store.blobs().put_file(&file)?;
            ctx.submit(&actor, EventBody::FinalVersion { round, final_hash })?;
            ctx.finish()
        }
        ReviewCmd::FinalVote {
            round,
            approve,
            actor,
        } => {
            let round = ctx.round_id(&round)?;
            ctx.submit(&actor, EventBody::FinalVote { round, approve })?;
            ctx.finish()
        }
        ReviewCmd::Settle { round, actor } => {
            let round_id = ctx.round_id(&round)?;
            let state = ctx.state();
            let round = state
                .rounds
                .get(&round_id)
                .ok_or_else(|| "no such round".to_string())?;
            let journal = state
                .journals
                .get(&round.journal)
                .ok_or_else(|| "no such journal".to_string())?;
            let published = match round.status {
                RoundStatus::FinalVote => {
                    let approvals = round.final_votes.values().filter(|v| **v).count();
                    final_vote_passes(approvals, round.reviewers.len())
                }
                _ => false,
            };
            let payout = split_review_fee(
                round.fee,
                journal.params.fee_keep,
                &round.submitted_scores(),
            );
            ctx.submit(
                &actor,
                EventBody::FeeSettlement {
                    round: round_id,
                    reviewer_shares: payout.reviewer_shares,
                    journal_share: payout.journal_share,
                    refund: payout.refund_to_authors,
                    published,
                },
            )?;
            ctx.finish()
        }
    }
}

fn show_round(ctx: &Ctx, raw: &str) -> Result<(), CliError> {
    let round_id = ctx.round_id(raw)?;
    let state = ctx.state();
    let round = state
        .rounds
        .get(&round_id)
        .ok_or_else(|| "no such round".to_string())?;
    let anonymous = state
        .journals
        .get(&round.journal)
        .map(|j| j.params.anonymous_reviewers)
        .unwrap_or(false);
    println!("round {}", round.id);
    println!("paper {}", round.paper);
    println!("journal {}", round.journal);
    println!("status {}", round.status.name());
    println!("fee {}", round.fee);
    if let Some(d) = round.deadline {
        println!("deadline {d}");
    }
    if let Some(d) = round.decision {
        println!("decision {}", if d { "accept" } else { "reject" });
    }
    // The public projection of an anonymous round names reviewers only
    // by their per-round tokens.
    if anonymous {
        for token in &round.pseudonyms {
            println!("reviewer token {token}");
        }
        let mut scores: Vec<(ContentHash, u8)> = round
            .scores
            .iter()
            .map(|(p, s)| (pseudonym(p, &round.paper, &state.salt), *s))
            .collect();
        scores.sort();
        for (token, score) in scores {
            println!("score {token} {score}");
        }
    } else {
        for r in &round.reviewers {
            println!("reviewer {r}");
        }
        for (p, s) in &round.scores {
            println!("score {p} {s}");
        }
    }
    Ok(())
}

fn market_cmd(mut ctx: Ctx, cmd: MarketCmd) -> Result<(), CliError> {
    match cmd {
        MarketCmd::Ask {
            fee,
            keywords,
            capacity,
            actor,
        } => {
            let mut kw = split_list(&keywords);
            kw.sort();
            kw.dedup();
            ctx.submit(
                &actor,
                EventBody::MarketAsk {
                    keywords: kw,
                    ask: fee,
                    capacity,
                },
            )?;
            ctx.finish()
        }
        MarketCmd::Submit {
            paper,
            keywords,
            bid,
            actor,
        } => {
            let paper = ContentHash::from_hex(&paper).map_err(|e| e.to_string())?;
            let mut kw = split_list(&keywords);
            kw.sort();
            kw.dedup();
            let hash = ctx.submit(
                &actor,
                EventBody::MarketSubmit {
                    paper,
                    keywords: kw,
                    bid,
                },
            )?;
            println!("submission {hash}");
            ctx.finish()
        }
        MarketCmd::Sweep { actor } => {
            let queued: Vec<SubmissionId> = ctx
                .state()
                .submissions
                .values()
                .filter(|s| s.status == collegium::market::SubmissionStatus::Submitted)
                .map(|s| s.id)
                .collect();
            let mut matched = 0;
            for sub_id in queued {
                let state = ctx.state();
                let sub = &state.submissions[&sub_id];
                let authors = state
                    .papers
                    .get(&sub.paper)
                    .map(|p| p.authors.clone())
                    .unwrap_or_default();
                let pool = eligible_pool(state.profiles.values(), &sub.keywords, &authors);
                let Ok(reviewers) =
                    match_reviewers(sub.bid, &pool, state.config.market.group_size)
                else {
                    println!("submission {sub_id} stays queued (no feasible match)");
                    continue;
                };
                ctx.submit(
                    &actor,
                    EventBody::MarketMatch {
                        submission: sub_id,
                        reviewers,
                    },
                )?;
                matched += 1;
            }
            println!("matched {matched}");
            ctx.finish()
        }
        MarketCmd::Review {
            submission,
            score,
            report,
            actor,
        } => {
            let submission = ctx.submission_id(&submission)?;
            let report = ctx.store.blobs().put_file(&report)?;
            ctx.submit(
                &actor,
                EventBody::MarketReview {
                    submission,
                    score,
                    report,
                },
            )?;
            ctx.finish()
        }
        MarketCmd::ReportScores {
            submission,
            scores,
            actor,
        } => {
            let submission = ctx.submission_id(&submission)?;
            let mut parsed = Vec::new();
            for pair in split_list(&scores) {
                let (who, score) = pair
                    .split_once('=')
                    .ok_or_else(|| format!("expected name=score, got `{pair}`"))?;
                let person = ctx.store.resolve_person(who.trim())?;
                let score: u8 = score
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad score in `{pair}`"))?;
                parsed.push((person, score));
            }
            parsed.sort_by_key(|(p, _)| *p);
            ctx.submit(
                &actor,
                EventBody::MarketReportScore {
                    submission,
                    scores: parsed,
                },
            )?;
            ctx.finish()
        }
        MarketCmd::Settle { submission, actor } => {
            let submission_id = ctx.submission_id(&submission)?;
            let state = ctx.state();
            let sub = state
                .submissions
                .get(&submission_id)
                .ok_or_else(|| "no such submission".to_string())?;
            let outcome = settle(sub, &state.config.market, |p| {
                state
                    .profiles
                    .get(p)
                    .map_or(collegium::market::INITIAL_RS, |pr| pr.rs)
            });
            let paid: Vec<(PersonId, u64)> = outcome
                .reviewers
                .iter()
                .filter(|r| r.paid)
                .map(|r| (r.person, r.ask))
                .collect();
            ctx.submit(
                &actor,
                EventBody::MarketSettlement {
                    submission: submission_id,
                    paid,
                    refund: outcome.refund_to_authors,
                    accepted: outcome.accepted,
                },
            )?;
            println!(
                "paper_score {:.4} tau {:.2} accepted {}",
                outcome.paper_score, outcome.tau, outcome.accepted
            );
            ctx.finish()
        }
        MarketCmd::Show { submission } => {
            let submission = ctx.submission_id(&submission)?;
            let state = ctx.state();
            let sub = state
                .submissions
                .get(&submission)
                .ok_or_else(|| "no such submission".to_string())?;
            println!("submission {}", sub.id);
            println!("paper {}", sub.paper);
            println!("status {}", sub.status.name());
            println!("bid {}", sub.bid);
            println!(
                "keywords {}",
                sub.keywords.iter().cloned().collect::<Vec<_>>().join(",")
            );
            for (i, r) in sub.reviewers.iter().enumerate() {
                println!("reviewer {r} ask={}", sub.asks.get(i).copied().unwrap_or(0));
            }
            for (p, s) in &sub.paper_scores {
                println!("paper_score {p} {s}");
            }
            for ((a, b), s) in &sub.report_scores {
                println!("report_score {a} -> {b}: {s}");
            }
            if let Some(a) = sub.accepted {
                println!("accepted {a}");
            }
            Ok(())
        }
        MarketCmd::Suggest { keywords } => {
            let kw: BTreeSet<String> = split_list(&keywords).into_iter().collect();
            let state = ctx.state();
            let pool = eligible_pool(state.profiles.values(), &kw, &[]);
            let suggestion = suggest_fair_bid(&pool)
                .map_err(|e| CliError(format!("ERROR {}: {e}", e.code())))?;
            println!("suggested_bid {suggestion}");
            Ok(())
        }
    }
}

fn reputation_report(ctx: &Ctx, at_day: Option<u64>) -> Result<(), CliError> {
    let state = ctx.state();
    let day = at_day.unwrap_or(state.day);
    let inputs = state.reputation_inputs(day);
    let solved = solve_fixed_point(&inputs, state.config.reputation);
    println!(
        "# fixed point: converged={} iterations={} residual={:.3e}",
        solved.converged, solved.iterations, solved.residual
    );
    println!("== journals");
    println!("journal\tpapers\tcitations\tjournal_score\tboard_score");
    for id in inputs.boards.keys() {
        let papers = inputs.graph.paper_count(id);
        let citations = inputs
            .graph
            .citations
            .iter()
            .filter(|(citing, cited)| {
                inputs.graph.publishers.get(cited) == Some(id)
                    && inputs.graph.publishers.contains_key(citing)
            })
            .count();
        println!(
            "{id}\t{papers}\t{citations}\t{:.6}\t{:.6}",
            solved.journal_score[id], solved.board_score[id]
        );
    }
    println!("== persons");
    println!("person\tuser_score");
    // Registered persons with no board service carry the default.
    for (person, _) in state.registry.iter() {
        let score = solved
            .user_score
            .get(person)
            .copied()
            .unwrap_or(collegium::reputation::DEFAULT_USER_SCORE);
        println!("{person}\t{score:.6}");
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.scenario)?;
    let mut scenario =
        Scenario::parse(&text).map_err(|e| CliError(format!("ERROR SCENARIO: {e}")))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let output = sim::run(&scenario).map_err(|e| match e {
        sim::SimError::Scenario(err) => CliError(format!("ERROR SCENARIO: {err}")),
        sim::SimError::Ledger(err) => err.into(),
    })?;

    print!("{}", output.summary);
    let mut metrics_text = String::from(sim::MetricsRow::header());
    metrics_text.push('\n');
    for row in &output.metrics {
        metrics_text.push_str(&row.to_tsv());
        metrics_text.push('\n');
    }
    match &args.metrics {
        Some(path) => fs::write(path, metrics_text)?,
        None => print!("{metrics_text}"),
    }
    if let Some(path) = &args.save_ledger {
        output.ledger.save(path)?;
        fs::write(path.with_extension("txt"), output.ledger.render_text())?;
    }
    println!("ledger_digest {}", output.ledger.digest());
    Ok(())
}

fn export_tabular(ctx: &Ctx) {
    let state = ctx.state();
    println!("== wallets");
    println!("person\tbalance");
    for (p, b) in &state.wallets {
        println!("{p}\t{b}");
    }
    println!("== journal_wallets");
    println!("journal\tbalance");
    for (j, b) in &state.journal_wallets {
        println!("{j}\t{b}");
    }
    println!("== journals");
    println!("journal\tcreated\tboard\tancestor\tsuperseded_by");
    for j in state.journals.values() {
        println!(
            "{}\t{}\t{}\t{}\t{}",
            j.id,
            j.created_at,
            j.board.len(),
            j.ancestor
                .map(|a| a.to_string())
                .unwrap_or_else(|| "-".into()),
            j.superseded_by
                .map(|d| d.to_string())
                .unwrap_or_else(|| "-".into()),
        );
    }
    println!("== papers");
    println!("paper\tauthors\tpublished_in\tmarket_accepted");
    for p in state.papers.values() {
        println!(
            "{}\t{}\t{}\t{}",
            p.hash,
            p.authors.len(),
            p.published_in
                .map(|j| j.to_string())
                .unwrap_or_else(|| "-".into()),
            p.market_accepted,
        );
    }
    println!("== rounds");
    println!("round\tpaper\tjournal\tstatus\tfee");
    for r in state.rounds.values() {
        println!(
            "{}\t{}\t{}\t{}\t{}",
            r.id,
            r.paper,
            r.journal,
            r.status.name(),
            r.fee
        );
    }
    println!("== submissions");
    println!("submission\tpaper\tstatus\tbid");
    for s in state.submissions.values() {
        println!("{}\t{}\t{}\t{}", s.id, s.paper, s.status.name(), s.bid);
    }
    println!("== profiles");
    println!("person\trs\task\tcapacity\tactive");
    for p in state.profiles.values() {
        println!(
            "{}\t{:.4}\t{}\t{}\t{}",
            p.person, p.rs, p.ask, p.capacity, p.active
        );
    }
    println!("== events");
    print!("{}", ctx.ledger.render_text());
}
