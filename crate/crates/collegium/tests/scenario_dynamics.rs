//! Directional market-dynamics check on a pinned seed: when the cheap
//! half of the reviewer pool withdraws mid-run, the mean matched fee in
//! the later window must be weakly higher than before. This is a
//! regression snapshot of engine behavior, not a ground-truth claim
//! about market equilibria.

use collegium::events::EventBody;
use collegium::market::SubmissionId;
use collegium::sim::{self, Scenario};

const SHOCK: &str = "\
[scenario]
seed = 2024
horizon_days = 100
sample_every = 25

[agent ana]
role = author
wallet = 900000000
keywords = field
submit_every = 4
bid_fraction = 1.3
quality_mean = 4.0

[agent bo]
role = author
wallet = 900000000
keywords = field
submit_every = 5
bid_fraction = 1.2
quality_mean = 3.5

[agent cheap1]
role = reviewer
keywords = field
price_unit = 5000
capacity = 4
leaves_day = 50

[agent cheap2]
role = reviewer
keywords = field
price_unit = 5000
capacity = 4
leaves_day = 50

[agent cheap3]
role = reviewer
keywords = field
price_unit = 6000
capacity = 4
leaves_day = 50

[agent dear1]
role = reviewer
keywords = field
price_unit = 30000
capacity = 4

[agent dear2]
role = reviewer
keywords = field
price_unit = 32000
capacity = 4

[agent dear3]
role = reviewer
keywords = field
price_unit = 35000
capacity = 4
";

#[test]
fn reviewer_supply_shock_raises_the_mean_matched_fee() {
    let scenario = Scenario::parse(SHOCK).unwrap();
    let out = sim::run(&scenario).unwrap();
    let state = out.ledger.state();

    let mut early = Vec::new();
    let mut late = Vec::new();
    for event in out.ledger.events() {
        if let EventBody::MarketMatch { submission, .. } = &event.body {
            let total_ask: u64 = state.submissions[&SubmissionId(submission.0)]
                .asks
                .iter()
                .sum();
            if event.timestamp <= 50 {
                early.push(total_ask);
            } else {
                late.push(total_ask);
            }
        }
    }
    assert!(!early.is_empty(), "matches happened before the shock");
    assert!(!late.is_empty(), "matches happened after the shock");
    let mean = |v: &[u64]| v.iter().sum::<u64>() as f64 / v.len() as f64;
    assert!(
        mean(&late) >= mean(&early),
        "mean matched fee fell after the supply shock: early {:.0}, late {:.0}",
        mean(&early),
        mean(&late)
    );
}
