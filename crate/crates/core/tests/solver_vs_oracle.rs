use vertiport_auction::gen::{generate, GeneratorConfig};
use vertiport_auction::graph::build_graph;
use vertiport_auction::mechanism::run_auction;
use vertiport_auction::oracle::{oracle_auction, EnumerationBudget};
use vertiport_auction::solver::{solve_with, SolveOptions, Strategy};

#[test]
fn solver_matches_oracle_on_random_instances() {
    for seed in 0..200 {
        let doc = generate(&GeneratorConfig {
            seed,
            ..Default::default()
        })
        .unwrap();
        let bids = doc.effective_bids();
        let inst = &doc.instance;
        let graph = build_graph(inst, &bids).unwrap();
        let bnb = solve_with(&graph, &SolveOptions::with_strategy(Strategy::BranchAndBound)).unwrap();
        let en = solve_with(&graph, &SolveOptions::with_strategy(Strategy::Enumerate)).unwrap();
        let oracle = oracle_auction(inst, &bids, EnumerationBudget::default()).unwrap();
        assert_eq!(bnb.objective, oracle.welfare, "seed {seed}");
        assert_eq!(en.objective, oracle.welfare, "seed {seed}");
        assert_eq!(bnb.allocation, oracle.allocation, "seed {seed}");
        assert_eq!(en.allocation, oracle.allocation, "seed {seed}");
        let outcome = run_auction(inst, &bids).unwrap();
        let payments: Vec<_> = outcome.payments.values().cloned().collect();
        assert_eq!(payments, oracle.payments, "seed {seed}");
    }
}

