//! Scenario files: the declarative description of a simulation run.
//!
//! A scenario fixes the RNG seed, the horizon, the protocol knobs, the
//! initial journals, and a population of agents with simple parametric
//! policies. Together with the engine version it fully determines the
//! ledger: running the same scenario twice yields byte-identical logs.
//!
//! ```text
//! [scenario]
//! seed = 42
//! horizon_days = 90
//!
//! [protocol]
//! report_threshold = 3.0
//! default_tau = 3.0
//!
//! [threshold physics]
//! tau = 3.5
//!
//! [journal letters]
//! founders = ada grace edsger
//! fee_keep = 0.2
//! reviewers = 3
//!
//! [agent ada]
//! role = member
//! wallet = 1000000
//! keywords = physics
//!
//! [agent noah]
//! role = author
//! journal = letters
//! wallet = 20000000
//! keywords = physics
//! submit_every = 7
//! ```

use crate::journal::JournalParams;
use crate::market::RsUpdateMode;
use crate::money::Ppm;
use crate::state::ProtocolConfig;
use crate::textdoc::{Document, Section, TextDocError};

/// Where an author sends their papers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Market,
    Journal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Author,
    Reviewer,
    Member,
}

/// Per-agent behavioral knobs; knobs that don't apply to a role are
/// simply inert.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    /// Days between submissions (0 = never submits).
    pub submit_every: u64,
    /// Center of the papers' latent quality, 1..5.
    pub quality_mean: f64,
    /// Market bid as a multiple of the suggested fair bid.
    pub bid_fraction: f64,
    /// Flat review-fee bid for journal submissions, micro-credits.
    pub fee_base: u64,
    /// Citations drawn per new paper.
    pub cite_count: u64,
    /// Ask = max(1, round(RS · price_unit · ask_markup)).
    pub ask_markup: f64,
    pub price_unit: u64,
    pub capacity: u32,
    /// Center of the agent's report quality (drives the scores their
    /// reports receive), 1..5.
    pub diligence: f64,
    /// Added to quality/5 when a board member votes to accept.
    pub approve_bias: f64,
    /// Reviews land 1..=delay_max days after assignment.
    pub review_delay_max: u64,
    /// Probability of forfeiting an assigned review.
    pub miss_prob: f64,
    /// Joining-fee bid when courting a board seat.
    pub join_bid: u64,
    /// Try to join every N days (0 = never).
    pub join_every: u64,
    /// The journal courted by join bids.
    pub join_target: Option<String>,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            submit_every: 7,
            quality_mean: 3.5,
            bid_fraction: 1.0,
            fee_base: crate::money::MICRO_PER_CREDIT,
            cite_count: 2,
            ask_markup: 1.0,
            price_unit: 10_000,
            capacity: 3,
            diligence: 3.5,
            approve_bias: 0.1,
            review_delay_max: 5,
            miss_prob: 0.0,
            join_bid: 0,
            join_every: 0,
            join_target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub name: String,
    pub role: Role,
    pub target: Target,
    pub wallet: u64,
    pub keywords: Vec<String>,
    pub policy: Policy,
    /// First day the agent acts. Its key and wallet are still
    /// registered in the day-0 prelude, so all minting happens at
    /// genesis.
    pub joins_day: u64,
    /// Day the agent withdraws: stops acting, pulls its ask, leaves
    /// boards.
    pub leaves_day: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JournalSpec {
    pub name: String,
    pub founders: Vec<String>,
    pub params: JournalParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub horizon_days: u64,
    pub step_days: u64,
    pub sample_every: u64,
    pub config: ProtocolConfig,
    pub journals: Vec<JournalSpec>,
    pub agents: Vec<AgentSpec>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, TextDocError> {
        let doc = Document::parse(text)?;

        let scenario_section = doc.section("scenario").ok_or(TextDocError::Parse {
            line: 1,
            message: "missing [scenario] section".into(),
        })?;
        let seed = scenario_section.parse_or("seed", 0u64)?;
        let horizon_days = scenario_section.parse::<u64>("horizon_days")?;
        let step_days = scenario_section.parse_or("step_days", 1u64)?;
        let sample_every = scenario_section.parse_or("sample_every", 10u64)?;
        if step_days == 0 {
            return Err(scenario_section.error("step_days must be positive"));
        }
        if sample_every == 0 {
            return Err(scenario_section.error("sample_every must be positive"));
        }

        let config = parse_protocol_sections(&doc)?;

        let mut agents: Vec<AgentSpec> = Vec::new();
        for section in doc.sections_of("agent") {
            let agent = parse_agent(section)?;
            if agents.iter().any(|a| a.name == agent.name) {
                return Err(section.error(format!("duplicate agent `{}`", agent.name)));
            }
            agents.push(agent);
        }

        let mut journals: Vec<JournalSpec> = Vec::new();
        for section in doc.sections_of("journal") {
            let journal = parse_journal(section, &agents)?;
            if journals.iter().any(|j| j.name == journal.name) {
                return Err(section.error(format!("duplicate journal `{}`", journal.name)));
            }
            journals.push(journal);
        }

        for a in &agents {
            if let Target::Journal(name) = &a.target {
                if !journals.iter().any(|j| j.name == *name) {
                    return Err(TextDocError::Parse {
                        line: 1,
                        message: format!("agent `{}` targets unknown journal `{name}`", a.name),
                    });
                }
            }
            if let Some(name) = &a.policy.join_target {
                if !journals.iter().any(|j| j.name == *name) {
                    return Err(TextDocError::Parse {
                        line: 1,
                        message: format!(
                            "agent `{}` has unknown join_target `{name}`",
                            a.name
                        ),
                    });
                }
            }
        }

        Ok(Scenario {
            seed,
            horizon_days,
            step_days,
            sample_every,
            config,
            journals,
            agents,
        })
    }
}

/// Parse the shared `[protocol]` and `[threshold <field>]` sections.
/// Scenario files and the CLI config file use the same vocabulary.
pub fn parse_protocol_sections(doc: &Document) -> Result<ProtocolConfig, TextDocError> {
    let mut config = ProtocolConfig::default();
    if let Some(p) = doc.section("protocol") {
        config.join_expiry_days = p.parse_or("join_expiry_days", 14u64)?;
        let theta: f64 = p.parse_or("report_threshold", 3.0)?;
        config.market.report_threshold_tenths = (theta * 10.0).round() as u32;
        config.market.group_size = p.parse_or("group_size", 3usize)?;
        if config.market.group_size < 3 {
            return Err(p.error("group_size must be at least 3"));
        }
        config.market.thresholds.default = p.parse_or("default_tau", 3.0)?;
        config.reputation.damping = p.parse_or("damping", 0.5)?;
        config.market.rs_mode = match p.get("rs_mode").unwrap_or("additive") {
            "additive" => RsUpdateMode::Additive,
            "ema" => RsUpdateMode::Ema {
                weight: p.parse_or("rs_ema_weight", 0.5)?,
            },
            other => return Err(p.error(format!("unknown rs_mode `{other}`"))),
        };
    }
    for t in doc.sections_of("threshold") {
        let field = t
            .name
            .clone()
            .ok_or_else(|| t.error("threshold section needs a field name"))?;
        let tau: f64 = t.parse("tau")?;
        config.market.thresholds.per_field.insert(field, tau);
    }
    Ok(config)
}

fn parse_agent(s: &Section) -> Result<AgentSpec, TextDocError> {
    let name = s
        .name
        .clone()
        .ok_or_else(|| s.error("agent section needs a name"))?;
    let role = match s.require("role")? {
        "author" => Role::Author,
        "reviewer" => Role::Reviewer,
        "member" => Role::Member,
        other => return Err(s.error(format!("unknown role `{other}`"))),
    };
    let target = match s.get("journal") {
        Some(j) => Target::Journal(j.to_string()),
        None => Target::Market,
    };
    let defaults = Policy::default();
    let policy = Policy {
        submit_every: s.parse_or("submit_every", defaults.submit_every)?,
        quality_mean: s.parse_or("quality_mean", defaults.quality_mean)?,
        bid_fraction: s.parse_or("bid_fraction", defaults.bid_fraction)?,
        fee_base: s.parse_or("fee_base", defaults.fee_base)?,
        cite_count: s.parse_or("cite_count", defaults.cite_count)?,
        ask_markup: s.parse_or("ask_markup", defaults.ask_markup)?,
        price_unit: s.parse_or("price_unit", defaults.price_unit)?,
        capacity: s.parse_or("capacity", defaults.capacity)?,
        diligence: s.parse_or("diligence", defaults.diligence)?,
        approve_bias: s.parse_or("approve_bias", defaults.approve_bias)?,
        review_delay_max: s
            .parse_or("review_delay_max", defaults.review_delay_max)?
            .max(1),
        miss_prob: s.parse_or("miss_prob", defaults.miss_prob)?,
        join_bid: s.parse_or("join_bid", defaults.join_bid)?,
        join_every: s.parse_or("join_every", defaults.join_every)?,
        join_target: s.get("join_target").map(str::to_string),
    };
    let mut keywords = s.words("keywords");
    keywords.sort();
    keywords.dedup();
    Ok(AgentSpec {
        name,
        role,
        target,
        wallet: s.parse_or("wallet", 0u64)?,
        keywords,
        policy,
        joins_day: s.parse_or("joins_day", 0u64)?,
        leaves_day: match s.get("leaves_day") {
            None => None,
            Some(_) => Some(s.parse("leaves_day")?),
        },
    })
}

fn parse_journal(s: &Section, agents: &[AgentSpec]) -> Result<JournalSpec, TextDocError> {
    let name = s
        .name
        .clone()
        .ok_or_else(|| s.error("journal section needs a name"))?;
    let founders = s.words("founders");
    if founders.is_empty() {
        return Err(s.error("journal needs at least one founder"));
    }
    for f in &founders {
        if !agents.iter().any(|a| a.name == *f) {
            return Err(s.error(format!("founder `{f}` is not a declared agent")));
        }
    }
    let params = JournalParams {
        fee_keep: Ppm::from_f64(s.parse_or("fee_keep", 0.2)?),
        anonymous_reviewers: s.parse_or("anonymous", false)?,
        review_days: s.parse_or("review_days", 10u64)?,
        reviewers_per_paper: s.parse_or("reviewers", 3u32)?,
        accept_quorum: Ppm::from_f64(s.parse_or("accept_quorum", 0.5)?),
        spend_quorum: Ppm::from_f64(s.parse_or("spend_quorum", 0.5)?),
        modify_quorum: Ppm::from_f64(s.parse_or("modify_quorum", 0.66)?),
    };
    params
        .validate()
        .map_err(|e| s.error(format!("invalid journal parameters: {e}")))?;
    Ok(JournalSpec {
        name,
        founders,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = "\
[scenario]
seed = 7
horizon_days = 30

[protocol]
report_threshold = 3.0
default_tau = 3.0

[threshold physics]
tau = 3.5

[journal letters]
founders = ada grace
fee_keep = 0.25
reviewers = 2

[agent ada]
role = member
wallet = 1000
keywords = physics

[agent grace]
role = member
wallet = 1000
keywords = physics

[agent noah]
role = author
journal = letters
wallet = 100000
keywords = physics
submit_every = 5
";

    #[test]
    fn parses_a_full_scenario() {
        let s = Scenario::parse(DEMO).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.horizon_days, 30);
        assert_eq!(s.journals.len(), 1);
        assert_eq!(s.journals[0].founders, vec!["ada", "grace"]);
        assert_eq!(s.agents.len(), 3);
        assert_eq!(
            s.config.market.thresholds.per_field.get("physics"),
            Some(&3.5)
        );
        let noah = &s.agents[2];
        assert_eq!(noah.role, Role::Author);
        assert_eq!(noah.target, Target::Journal("letters".into()));
        assert_eq!(noah.policy.submit_every, 5);
    }

    #[test]
    fn unknown_founder_is_a_field_error() {
        let text = "[scenario]\nhorizon_days = 5\n[journal j]\nfounders = ghost\n";
        let err = Scenario::parse(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ghost"), "{msg}");
    }

    #[test]
    fn author_targeting_missing_journal_is_rejected() {
        let text = "[scenario]\nhorizon_days = 5\n[agent a]\nrole = author\njournal = nope\n";
        let err = Scenario::parse(text).unwrap_err();
        assert!(err.to_string().contains("unknown journal"));
    }

    #[test]
    fn bad_journal_params_are_rejected_at_parse() {
        let text = "\
[scenario]
horizon_days = 5
[agent a]
role = member
[journal j]
founders = a
spend_quorum = 0.7
modify_quorum = 0.6
";
        let err = Scenario::parse(text).unwrap_err();
        assert!(err.to_string().contains("invalid journal parameters"));
    }

    #[test]
    fn duplicate_agents_are_rejected() {
        let text = "[scenario]\nhorizon_days = 5\n[agent a]\nrole = member\n[agent a]\nrole = member\n";
        let err = Scenario::parse(text).unwrap_err();
        assert!(err.to_string().contains("duplicate agent"));
    }
}
