//! Sampled incentive-compatibility and individual-rationality checks.
//!
//! For each operator the truthful utility is compared against the utility
//! obtained from seeded misreports, with every other operator truthful.

use std::fmt;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::graph::build_graph;
use crate::mechanism::{
    externality_baseline, remaining_welfare, run_auction_with, AuctionOptions, MechanismError,
    PaymentRule,
};
use crate::model::{operator_value, BidProfile, Instance, ValuationProfile};
use crate::rational::{int, ratio, render_rational, Rational};
use crate::solver::solve_with;

#[derive(Debug, Clone)]
pub struct PropertyConfig {
    pub misreports: usize,
    pub seed: u64,
    pub auction: AuctionOptions,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        PropertyConfig {
            misreports: 20,
            seed: 0,
            auction: AuctionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyViolation {
    IndividualRationality {
        operator: String,
        utility: Rational,
    },
    IncentiveCompatibility {
        operator: String,
        misreport: usize,
        truthful: Rational,
        deviating: Rational,
    },
}

impl fmt::Display for PropertyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyViolation::IndividualRationality { operator, utility } => write!(
                f,
                "IR violated for {operator}: truthful utility {}",
                render_rational(utility)
            ),
            PropertyViolation::IncentiveCompatibility {
                operator,
                misreport,
                truthful,
                deviating,
            } => write!(
                f,
                "IC violated for {operator}: misreport #{misreport} yields {} > truthful {}",
                render_rational(deviating),
                render_rational(truthful)
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyReport {
    pub ir_checks: usize,
    pub ic_checks: usize,
    pub violations: Vec<PropertyViolation>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: PropertyReport) {
        self.ir_checks += other.ir_checks;
        self.ic_checks += other.ic_checks;
        self.violations.extend(other.violations);
    }
}

/// Small additive perturbations, in quarters.
const NUDGES: [i64; 6] = [-2, -1, 1, 2, 4, 8];

/// A misreport of one operator's bids. The first few indices are fixed
/// patterns (zeroing, halving, doubling, swapping the extremes of each menu,
/// inflating the least valued entry); later ones perturb every entry
/// independently.
pub fn misreport(truth: &[Vec<Rational>], index: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Rational>> {
    let scale = |f: Rational| -> Vec<Vec<Rational>> {
        truth
            .iter()
            .map(|row| row.iter().map(|v| v * &f).collect())
            .collect()
    };
    match index {
        0 => scale(int(0)),
        1 => scale(ratio(1, 2)),
        2 => scale(int(2)),
        3 => truth
            .iter()
            .map(|row| {
                let mut row = row.clone();
                if let (Some(lo), Some(hi)) = (argmin(&row), argmax(&row)) {
                    row.swap(lo, hi);
                }
                row
            })
            .collect(),
        4 => truth
            .iter()
            .map(|row| {
                let mut row = row.clone();
                if let (Some(lo), Some(hi)) = (argmin(&row), argmax(&row)) {
                    row[lo] = &row[hi] + int(5);
                }
                row
            })
            .collect(),
        _ => truth
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| {
                        let factor = match rng.gen_range(0..4) {
                            0 => int(0),
                            1 => ratio(1, 2),
                            2 => int(1),
                            _ => int(2),
                        };
                        let mut out = v * factor;
                        if rng.gen_bool(0.5) {
                            out += ratio(NUDGES[rng.gen_range(0..NUDGES.len())], 4);
                        }
                        if out < Rational::zero() {
                            Rational::zero()
                        } else {
                            out
                        }
                    })
                    .collect()
            })
            .collect(),
    }
}

fn argmin(row: &[Rational]) -> Option<usize> {
    (0..row.len()).min_by(|&a, &b| row[a].cmp(&row[b]).then(a.cmp(&b)))
}

fn argmax(row: &[Rational]) -> Option<usize> {
    (0..row.len()).max_by(|&a, &b| row[a].cmp(&row[b]).then(b.cmp(&a)))
}

/// Checks IR for every operator under truthful bids and IC against
/// `config.misreports` sampled deviations per operator.
pub fn check_properties(
    instance: &Instance,
    valuations: &ValuationProfile,
    config: &PropertyConfig,
) -> Result<PropertyReport, MechanismError> {
    valuations.check(instance)?;
    let truthful = run_auction_with(instance, valuations, &config.auction)?;
    let ops = instance.operators();
    let mut report = PropertyReport::default();
    let mut truthful_utility = Vec::with_capacity(ops.len());
    for op in ops {
        let u = truthful.utility(instance, &op.id, valuations)?;
        report.ir_checks += 1;
        if u < Rational::zero() {
            report.violations.push(PropertyViolation::IndividualRationality {
                operator: op.id.clone(),
                utility: u.clone(),
            });
        }
        truthful_utility.push(u);
    }

    let per_operator: Vec<Result<PropertyReport, MechanismError>> = (0..ops.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let baseline = match config.auction.payment_rule {
                PaymentRule::PseudoBid => Some(externality_baseline(instance, valuations, &ops[i].id)?),
                PaymentRule::Unzeroed => None,
            };
            let mut local = PropertyReport::default();
            for m in 0..config.misreports {
                let fake = misreport(valuations.operator_values(i), m, &mut rng);
                let bids = valuations.with_operator(i, fake);
                let u = deviating_utility(instance, valuations, &bids, i, baseline.as_ref(), config)?;
                local.ic_checks += 1;
                if u > truthful_utility[i] {
                    local.violations.push(PropertyViolation::IncentiveCompatibility {
                        operator: ops[i].id.clone(),
                        misreport: m,
                        truthful: truthful_utility[i].clone(),
                        deviating: u,
                    });
                }
            }
            Ok(local)
        })
        .collect();
    for r in per_operator {
        report.merge(r?);
    }
    Ok(report)
}

/// Utility of operator `i` (valued truthfully) when it submits `bids`.
/// The inner payment maximum is independent of `i`'s own bids, so the
/// truthful-run value is reused when available.
fn deviating_utility(
    instance: &Instance,
    valuations: &ValuationProfile,
    bids: &BidProfile,
    i: usize,
    baseline: Option<&Rational>,
    config: &PropertyConfig,
) -> Result<Rational, MechanismError> {
    let cleared = solve_with(&build_graph(instance, bids)?, &config.auction.solve)?;
    let h = match baseline {
        Some(h) => h.clone(),
        None => cleared.objective.clone(),
    };
    let op = &instance.operators()[i];
    let others = remaining_welfare(instance, &cleared.allocation, bids, &op.id)?;
    let payment = (h - others) / &op.weight;
    Ok(operator_value(instance, &cleared.allocation, valuations, i) - payment)
}
