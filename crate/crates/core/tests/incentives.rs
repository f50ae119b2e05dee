use vertiport_auction::gen::{generate, GeneratorConfig};
use vertiport_auction::mechanism::{AuctionOptions, PaymentRule};
use vertiport_auction::properties::{check_properties, PropertyConfig};

fn corpus_violations(rule: PaymentRule, instances: u64) -> (usize, usize) {
    let mut violations = 0;
    let mut checks = 0;
    for seed in 0..instances {
        let doc = generate(&GeneratorConfig {
            seed,
            ..Default::default()
        })
        .unwrap();
        let vals = doc.valuations.unwrap();
        let report = check_properties(
            &doc.instance,
            &vals,
            &PropertyConfig {
                seed,
                auction: AuctionOptions {
                    payment_rule: rule,
                    ..Default::default()
                },
                ..Default::default()
            },
        )
        .unwrap();
        violations += report.violations.len();
        checks += report.ic_checks;
    }
    (violations, checks)
}

#[test]
fn truthful_bidding_is_dominant_on_sampled_misreports() {
    let (violations, checks) = corpus_violations(PaymentRule::PseudoBid, 50);
    assert_eq!(violations, 0);
    assert!(checks >= 50 * 20);
}

#[test]
fn pay_your_bid_control_is_caught() {
    let (violations, _) = corpus_violations(PaymentRule::Unzeroed, 50);
    assert!(violations > 0);
}
