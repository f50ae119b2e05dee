#![allow(dead_code)]

use vertiport_auction::gen::{generate, GeneratorConfig};
use vertiport_auction::io::InstanceDocument;
use vertiport_auction::{int, Aircraft, BidProfile, Instance, Operator, Rational, RouteOption, Vertiport};

pub fn free_port(id: &str, horizon: u32, arrival: u32, departure: u32, parking: u32) -> Vertiport {
    Vertiport::uniform(id, horizon, arrival, departure, parking, |_| int(0))
}

pub fn single(op: &str, origin: &str, menu: Vec<RouteOption>) -> Operator {
    Operator {
        id: op.into(),
        weight: int(1),
        fleet: vec![Aircraft {
            id: "a0".into(),
            origin: origin.into(),
            menu,
        }],
    }
}

/// Two aircraft at A competing for the single arrival slot at B.
pub fn second_price(high: i64, low: i64) -> (Instance, BidProfile) {
    let route = || vec![RouteOption::stay(0), RouteOption::transit(1, 1, "B", 2)];
    let mut b = free_port("B", 2, 1, 2, 2);
    b.arrival_cap = vec![2, 1];
    let inst = Instance::new(
        2,
        int(0),
        vec![free_port("A", 2, 2, 2, 2), b],
        vec![single("hi", "A", route()), single("lo", "A", route())],
    );
    let bids = BidProfile::from_fn(&inst, |at, _, opt| match (at.operator, opt.is_stay()) {
        (_, true) => int(0),
        (0, false) => int(high),
        _ => int(low),
    });
    (inst, bids)
}

/// Two aircraft at full cap-1 vertiports that want to trade places.
pub fn swap(stay_bids: (i64, i64), b_arrival_cap: u32) -> (Instance, BidProfile) {
    let mut b = free_port("B", 3, 1, 1, 1);
    b.arrival_cap = vec![b_arrival_cap; 3];
    let inst = Instance::new(
        3,
        int(0),
        vec![free_port("A", 3, 1, 1, 1), b],
        vec![
            single("east", "A", vec![RouteOption::stay(0), RouteOption::transit(1, 2, "B", 3)]),
            single("west", "B", vec![RouteOption::stay(0), RouteOption::transit(1, 2, "A", 3)]),
        ],
    );
    let bids = BidProfile::from_fn(&inst, |at, _, opt| {
        if opt.is_stay() {
            int(if at.operator == 0 { stay_bids.0 } else { stay_bids.1 })
        } else {
            int(10)
        }
    });
    (inst, bids)
}

pub fn corpus(count: u64) -> Vec<InstanceDocument> {
    (0..count)
        .map(|seed| {
            generate(&GeneratorConfig {
                seed,
                ..Default::default()
            })
            .expect("generator")
        })
        .collect()
}

pub fn zero() -> Rational {
    int(0)
}
