//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use vertiport_auction::gen::{generate, GeneratorConfig};
use vertiport_auction::io::InstanceDocument;
use vertiport_auction::mechanism::{run_auction, AuctionOptions, PaymentRule};
use vertiport_auction::oracle::{enumerate_feasible, oracle_auction, EnumerationBudget};
use vertiport_auction::properties::{check_properties, PropertyConfig};
use vertiport_auction::solver::{enumerate_deltas, solve_fixed_delta, solve_with, SolveOptions, Strategy};
use vertiport_auction::{
    build_graph, int, social_welfare, Aircraft, Allocation, BidProfile, Instance, Operator,
    RouteOption, Vertiport,
};

const CORPUS: u64 = 200;
const IC_INSTANCES: usize = 50;
const MISREPORTS: usize = 20;
const MINORS_PER_INSTANCE: usize = 10;

struct Case {
    seed: u64,
    instance: Instance,
    bids: BidProfile,
}

fn corpus_from(config: GeneratorConfig, count: u64) -> Vec<Case> {
    (0..count)
        .map(|seed| {
            let doc: InstanceDocument = generate(&GeneratorConfig {
                seed,
                ..config.clone()
            })
            .expect("generator");
            Case {
                seed,
                bids: doc.effective_bids(),
                instance: doc.instance,
            }
        })
        .collect()
}

fn within_corpus_limits(inst: &Instance) -> bool {
    inst.vertiports().len() <= 3
        && inst.aircraft_count() <= 4
        && inst.horizon() <= 4
        && inst
            .aircraft_refs()
            .iter()
            .all(|&at| inst.aircraft(at).menu.len() <= 3)
        && inst.candidate_space() <= 81
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn failing_seeds(seeds: &[u64]) -> String {
    let shown: Vec<String> = seeds.iter().take(10).map(|s| s.to_string()).collect();
    format!("failing seeds: {}", shown.join(", "))
}

fn objective_equivalence(corpus: &[Case]) -> Verdict {
    let start = Instant::now();
    let bad: Vec<u64> = corpus
        .par_iter()
        .filter(|c| {
            let graph = build_graph(&c.instance, &c.bids).expect("graph");
            let solved = solve_with(&graph, &SolveOptions::default()).expect("solve");
            let oracle = oracle_auction(&c.instance, &c.bids, EnumerationBudget::default()).expect("oracle");
            solved.objective != oracle.welfare
        })
        .map(|c| c.seed)
        .collect();
    let elapsed = start.elapsed();
    let limits = corpus.iter().all(|c| within_corpus_limits(&c.instance));
    let mut detail = format!(
        "{} instances, {} mismatches, {:.2}s",
        corpus.len(),
        bad.len(),
        elapsed.as_secs_f64()
    );
    if !bad.is_empty() {
        detail = format!("{detail}; {}", failing_seeds(&bad));
    }
    if !limits {
        detail.push_str("; corpus exceeds size limits");
    }
    verdict(
        bad.is_empty() && limits && corpus.len() >= 200 && elapsed.as_secs() < 60,
        detail,
    )
}

fn payment_cross_check(corpus: &[Case]) -> Verdict {
    let results: Vec<(u64, usize, bool)> = corpus
        .iter()
        .map(|c| {
            let outcome = run_auction(&c.instance, &c.bids).expect("auction");
            let oracle = oracle_auction(&c.instance, &c.bids, EnumerationBudget::default()).expect("oracle");
            let ours: Vec<_> = outcome.payments.values().cloned().collect();
            (c.seed, ours.len(), ours == oracle.payments)
        })
        .collect();
    let checked: usize = results.iter().map(|r| r.1).sum();
    let bad: Vec<u64> = results.iter().filter(|r| !r.2).map(|r| r.0).collect();
    let mut detail = format!("{checked} operator payments, {} instances disagree", bad.len());
    if !bad.is_empty() {
        detail = format!("{detail}; {}", failing_seeds(&bad));
    }
    verdict(bad.is_empty(), detail)
}

fn individual_rationality(corpus: &[Case]) -> Verdict {
    let mut checks = 0;
    let mut bad = Vec::new();
    for c in corpus {
        let outcome = run_auction(&c.instance, &c.bids).expect("auction");
        for op in c.instance.operators() {
            checks += 1;
            let u = outcome.utility(&c.instance, &op.id, &c.bids).expect("utility");
            if u < int(0) {
                bad.push(c.seed);
            }
        }
    }
    let mut detail = format!("{checks} utilities checked, {} negative", bad.len());
    if !bad.is_empty() {
        detail = format!("{detail}; {}", failing_seeds(&bad));
    }
    verdict(bad.is_empty(), detail)
}

fn ic_suite(corpus: &[Case], rule: PaymentRule) -> (usize, usize) {
    let config = |seed| PropertyConfig {
        misreports: MISREPORTS,
        seed,
        auction: AuctionOptions {
            payment_rule: rule,
            ..Default::default()
        },
    };
    corpus[..IC_INSTANCES]
        .par_iter()
        .map(|c| {
            let report = check_properties(&c.instance, &c.bids, &config(c.seed)).expect("properties");
            (report.ic_checks, report.violations.len())
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

fn incentive_compatibility(corpus: &[Case]) -> Verdict {
    let (checks, violations) = ic_suite(corpus, PaymentRule::PseudoBid);
    verdict(
        violations == 0 && checks >= IC_INSTANCES * MISREPORTS,
        format!("{IC_INSTANCES} instances x {MISREPORTS} misreports: {checks} comparisons, {violations} violations"),
    )
}

fn flow_bijection(corpus: &[Case]) -> Verdict {
    let results: Vec<(u64, usize, bool)> = corpus
        .par_iter()
        .map(|c| {
            let graph = build_graph(&c.instance, &c.bids).expect("graph");
            let feasible = enumerate_feasible(&c.instance, EnumerationBudget::default()).expect("enumerate");
            let ok = feasible.iter().all(|x| {
                let Ok(sol) = graph.allocation_to_flow(x) else {
                    return false;
                };
                graph.check_flow(&sol).is_ok()
                    && graph.flow_to_allocation(&sol).as_ref() == Ok(x)
                    && graph.objective(&sol.flow) == social_welfare(&c.instance, x, &c.bids)
            });
            (c.seed, feasible.len(), ok)
        })
        .collect();
    let total: usize = results.iter().map(|r| r.1).sum();
    let bad: Vec<u64> = results.iter().filter(|r| !r.2).map(|r| r.0).collect();
    let mut detail = format!("{total} feasible allocations round-tripped, {} instances fail", bad.len());
    if !bad.is_empty() {
        detail = format!("{detail}; {}", failing_seeds(&bad));
    }
    verdict(bad.is_empty(), detail)
}

fn integrality(corpus: &[Case]) -> Verdict {
    let mut solves = 0usize;
    let mut bad_solves = Vec::new();
    let mut minors = 0usize;
    let mut nonzero = 0usize;
    let mut bad_minors = Vec::new();
    for c in corpus {
        let graph = build_graph(&c.instance, &c.bids).expect("graph");
        for delta in enumerate_deltas(&c.instance) {
            solves += 1;
            match solve_fixed_delta(&graph, &delta) {
                // Flows are i64 by construction; also confirm they satisfy
                // every bound and conservation constraint at this δ.
                Ok(Some(sol)) => {
                    if sol.delta != delta || graph.check_flow(&sol).is_err() {
                        bad_solves.push(c.seed);
                    }
                }
                Ok(None) => {}
                Err(_) => bad_solves.push(c.seed),
            }
        }

        let m = graph.truncated_incidence();
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let cols: Vec<usize> = (0..m.cols).collect();
        for s in 0..MINORS_PER_INSTANCE {
            let max = m.rows.min(m.cols).min(12);
            if max == 0 {
                break;
            }
            let k = rng.gen_range(1..=max);
            let chosen_cols: Vec<usize> = cols.choose_multiple(&mut rng, k).copied().collect();
            // Half the samples draw rows from the support of the chosen
            // columns so that non-singular minors are common.
            let pool: Vec<usize> = if s % 2 == 0 {
                (0..m.rows)
                    .filter(|&r| chosen_cols.iter().any(|&col| m.get(r, col) != 0))
                    .collect()
            } else {
                (0..m.rows).collect()
            };
            if pool.len() < k {
                continue;
            }
            let chosen_rows: Vec<usize> = pool.choose_multiple(&mut rng, k).copied().collect();
            let det = m.minor(&chosen_rows, &chosen_cols);
            minors += 1;
            if det != 0 {
                nonzero += 1;
            }
            if !(-1..=1).contains(&det) {
                bad_minors.push(c.seed);
            }
        }
    }
    let mut detail = format!(
        "{solves} fixed-departure solves, {} bad; {minors} minors sampled ({nonzero} non-singular), {} outside {{-1,0,1}}",
        bad_solves.len(),
        bad_minors.len()
    );
    if !bad_solves.is_empty() || !bad_minors.is_empty() {
        let mut seeds = bad_solves.clone();
        seeds.extend(&bad_minors);
        detail = format!("{detail}; {}", failing_seeds(&seeds));
    }
    verdict(
        bad_solves.is_empty() && bad_minors.is_empty() && minors >= 1000,
        detail,
    )
}

fn strategy_equivalence(corpus: &[Case]) -> Verdict {
    let bad: Vec<u64> = corpus
        .par_iter()
        .filter(|c| {
            let graph = build_graph(&c.instance, &c.bids).expect("graph");
            let bnb = solve_with(&graph, &SolveOptions::with_strategy(Strategy::BranchAndBound)).expect("bnb");
            let en = solve_with(&graph, &SolveOptions::with_strategy(Strategy::Enumerate)).expect("enumerate");
            (bnb.objective, bnb.allocation) != (en.objective, en.allocation)
        })
        .map(|c| c.seed)
        .collect();
    let mut detail = format!("{} instances, {} differ", corpus.len(), bad.len());
    if !bad.is_empty() {
        detail = format!("{detail}; {}", failing_seeds(&bad));
    }
    verdict(bad.is_empty(), detail)
}

fn single_slot_config(horizon: u32) -> GeneratorConfig {
    GeneratorConfig {
        horizon: (horizon, horizon),
        operators: (2, 4),
        fleet_size: (1, 1),
        arrival_cap: (1000, 1000),
        departure_cap: (1000, 1000),
        ..Default::default()
    }
}

fn special_case(corpus: &[Case]) -> (usize, Vec<u64>) {
    let mut nontrivial = 0;
    let mut bad = Vec::new();
    for c in corpus {
        assert!(c
            .instance
            .operators()
            .iter()
            .all(|op| op.fleet.len() == 1));
        let outcome = run_auction(&c.instance, &c.bids).expect("auction");
        let oracle = oracle_auction(&c.instance, &c.bids, EnumerationBudget::default()).expect("oracle");
        let payments: Vec<_> = outcome.payments.values().cloned().collect();
        if payments.iter().any(|p| *p != int(0)) {
            nontrivial += 1;
        }
        if outcome.allocation != oracle.allocation
            || outcome.cleared_welfare != oracle.welfare
            || payments != oracle.payments
        {
            bad.push(c.seed);
        }
    }
    (nontrivial, bad)
}

fn single_slot_reduction() -> Verdict {
    let literal = corpus_from(single_slot_config(1), 50);
    let analogue = corpus_from(single_slot_config(2), 50);
    let (_, bad_literal) = special_case(&literal);
    let (nontrivial, bad_analogue) = special_case(&analogue);
    let mut detail = format!(
        "H=1: 50 instances, {} mismatches; H=2 analogue: 50 instances ({nontrivial} with non-zero payments), {} mismatches",
        bad_literal.len(),
        bad_analogue.len()
    );
    if !bad_literal.is_empty() || !bad_analogue.is_empty() {
        let mut seeds = bad_literal.clone();
        seeds.extend(&bad_analogue);
        detail = format!("{detail}; {}", failing_seeds(&seeds));
    }
    verdict(bad_literal.is_empty() && bad_analogue.is_empty(), detail)
}

fn swap_fixture() -> (Instance, BidProfile) {
    let port = |id: &str| Vertiport::uniform(id, 3, 1, 1, 1, |_| int(0));
    let aircraft = |origin: &str, dest: &str| Aircraft {
        id: "a0".into(),
        origin: origin.into(),
        menu: vec![RouteOption::stay(0), RouteOption::transit(1, 2, dest, 3)],
    };
    let inst = Instance::new(
        3,
        int(0),
        vec![port("A"), port("B")],
        vec![
            Operator {
                id: "east".into(),
                weight: int(1),
                fleet: vec![aircraft("A", "B")],
            },
            Operator {
                id: "west".into(),
                weight: int(1),
                fleet: vec![aircraft("B", "A")],
            },
        ],
    );
    let bids = BidProfile::from_fn(&inst, |_, _, opt| if opt.is_stay() { int(0) } else { int(10) });
    (inst, bids)
}

fn exchange_signature() -> Verdict {
    let (inst, bids) = swap_fixture();
    let graph = build_graph(&inst, &bids).expect("graph");
    let solved = solve_with(&graph, &SolveOptions::default()).expect("solve");
    let feasible = enumerate_feasible(&inst, EnumerationBudget::default()).expect("enumerate");
    let swap = Allocation::from_flat(&inst, &[1, 1]).expect("allocation");
    let stay = Allocation::all_stay(&inst);
    let one_sided_infeasible = feasible == vec![stay, swap.clone()];
    let outcome = run_auction(&inst, &bids).expect("auction");
    let pass = solved.allocation == swap
        && solved.objective == int(20)
        && one_sided_infeasible
        && outcome.payments.values().all(|p| *p == int(0));
    verdict(
        pass,
        format!(
            "solver grants {:?} with objective {}; oracle feasible set {:?}; payments {:?}",
            solved.allocation.flat(),
            solved.objective,
            feasible.iter().map(|x| x.flat()).collect::<Vec<_>>(),
            outcome.payments.values().map(|p| p.to_string()).collect::<Vec<_>>()
        ),
    )
}

fn negative_control(corpus: &[Case]) -> Verdict {
    let (checks, violations) = ic_suite(corpus, PaymentRule::Unzeroed);
    verdict(
        violations > 0,
        format!("pay-your-bid rule: {checks} comparisons, {violations} violations (criterion 4 must fail)"),
    )
}

fn main() -> ExitCode {
    let corpus = corpus_from(GeneratorConfig::default(), CORPUS);
    let criteria: [(&str, &dyn Fn() -> Verdict); 10] = [
        ("oracle objective equivalence", &|| objective_equivalence(&corpus)),
        ("payment cross-check", &|| payment_cross_check(&corpus)),
        ("individual rationality", &|| individual_rationality(&corpus)),
        ("sampled incentive compatibility", &|| incentive_compatibility(&corpus)),
        ("flow bijection", &|| flow_bijection(&corpus)),
        ("integrality", &|| integrality(&corpus)),
        ("strategy equivalence", &|| strategy_equivalence(&corpus)),
        ("single-slot reduction", &single_slot_reduction),
        ("exchange signature", &exchange_signature),
        ("negative control", &|| negative_control(&corpus)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<32} {}  ({}; {:.2}s)",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
