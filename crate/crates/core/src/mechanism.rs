//! The auction: welfare-maximizing allocation plus externality payments
//! priced with pseudo-bids.

use std::collections::BTreeMap;

use num_traits::Zero;
use rayon::prelude::*;

use crate::graph::build_graph;
use crate::model::{
    operator_value, social_welfare, utility, Allocation, BidProfile, Instance, ModelError,
    ValuationProfile,
};
use crate::rational::Rational;
use crate::solver::{solve_value, solve_with, SolveOptions, SolveResult, SolverError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MechanismError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<crate::graph::GraphError> for MechanismError {
    fn from(e: crate::graph::GraphError) -> Self {
        MechanismError::Solver(SolverError::Graph(e))
    }
}

/// How the inner optimization of the payment is posed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaymentRule {
    /// Operator `i`'s bids are zeroed in the inner optimization.
    #[default]
    PseudoBid,
    /// Deliberately broken: the inner optimization keeps `i`'s own bids,
    /// which collapses the rule to pay-your-bid. Only for negative controls.
    Unzeroed,
}

#[derive(Debug, Clone, Default)]
pub struct AuctionOptions {
    pub solve: SolveOptions,
    pub payment_rule: PaymentRule,
    /// Compute payments on the rayon pool instead of sequentially.
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismOutcome {
    pub allocation: Allocation,
    /// Keyed by operator id.
    pub payments: BTreeMap<String, Rational>,
    pub cleared_welfare: Rational,
}

impl MechanismOutcome {
    /// Utility of `operator` under `values`: unweighted value of its granted
    /// entries minus its payment.
    pub fn utility(
        &self,
        instance: &Instance,
        operator: &str,
        values: &ValuationProfile,
    ) -> Result<Rational, ModelError> {
        let p = self
            .payments
            .get(operator)
            .ok_or_else(|| ModelError::UnknownOperator(operator.to_string()))?;
        utility(instance, &self.allocation, p, operator, values)
    }
}

fn operator_index(instance: &Instance, id: &str) -> Result<usize, ModelError> {
    instance
        .operator_index(id)
        .ok_or_else(|| ModelError::UnknownOperator(id.to_string()))
}

/// `bids` with every entry of operator `ell` (stay included) set to zero.
pub fn pseudo_bids(
    instance: &Instance,
    ell: &str,
    bids: &BidProfile,
) -> Result<BidProfile, ModelError> {
    let i = operator_index(instance, ell)?;
    Ok(zeroed(bids, i))
}

fn zeroed(bids: &BidProfile, operator: usize) -> BidProfile {
    let rows = bids
        .operator_values(operator)
        .iter()
        .map(|row| vec![Rational::zero(); row.len()])
        .collect();
    bids.with_operator(operator, rows)
}

/// Welfare of `x` without operator `i`'s bid term; congestion still counts
/// `i`'s aircraft.
pub fn remaining_welfare(
    instance: &Instance,
    x: &Allocation,
    bids: &BidProfile,
    i: &str,
) -> Result<Rational, ModelError> {
    let idx = operator_index(instance, i)?;
    x.check(instance)?;
    Ok(remaining(instance, x, bids, idx))
}

fn remaining(instance: &Instance, x: &Allocation, bids: &BidProfile, i: usize) -> Rational {
    social_welfare(instance, x, bids)
        - &instance.operators()[i].weight * operator_value(instance, x, bids, i)
}

/// Payment of operator `i` given the cleared solve under `bids`.
pub fn payment(
    instance: &Instance,
    bids: &BidProfile,
    i: &str,
    cleared: &SolveResult,
) -> Result<Rational, MechanismError> {
    let idx = operator_index(instance, i)?;
    payment_at(
        instance,
        bids,
        idx,
        &cleared.allocation,
        PaymentRule::PseudoBid,
        &SolveOptions::default(),
    )
}

fn payment_at(
    instance: &Instance,
    bids: &BidProfile,
    i: usize,
    cleared: &Allocation,
    rule: PaymentRule,
    options: &SolveOptions,
) -> Result<Rational, MechanismError> {
    let inner_bids = match rule {
        PaymentRule::PseudoBid => zeroed(bids, i),
        PaymentRule::Unzeroed => bids.clone(),
    };
    let h = solve_value(&build_graph(instance, &inner_bids)?, options)?;
    let rho = &instance.operators()[i].weight;
    Ok((h - remaining(instance, cleared, bids, i)) / rho)
}

/// `h_i(B_{-i})`: the inner maximum of operator `i`'s payment. It does not
/// depend on `i`'s own bids.
pub fn externality_baseline(
    instance: &Instance,
    bids: &BidProfile,
    i: &str,
) -> Result<Rational, MechanismError> {
    let idx = operator_index(instance, i)?;
    Ok(solve_value(
        &build_graph(instance, &zeroed(bids, idx))?,
        &SolveOptions::default(),
    )?)
}

pub fn run_auction(instance: &Instance, bids: &BidProfile) -> Result<MechanismOutcome, MechanismError> {
    run_auction_with(
        instance,
        bids,
        &AuctionOptions {
            parallel: true,
            ..Default::default()
        },
    )
}

pub fn run_auction_with(
    instance: &Instance,
    bids: &BidProfile,
    options: &AuctionOptions,
) -> Result<MechanismOutcome, MechanismError> {
    let cleared = solve_with(&build_graph(instance, bids)?, &options.solve)?;
    let n = instance.operators().len();
    let compute = |i: usize| {
        payment_at(
            instance,
            bids,
            i,
            &cleared.allocation,
            options.payment_rule,
            &options.solve,
        )
    };
    let payments: Vec<Rational> = if options.parallel {
        (0..n).into_par_iter().map(compute).collect::<Result<_, _>>()?
    } else {
        (0..n).map(compute).collect::<Result<_, _>>()?
    };
    Ok(MechanismOutcome {
        payments: instance
            .operators()
            .iter()
            .map(|op| op.id.clone())
            .zip(payments)
            .collect(),
        cleared_welfare: cleared.objective,
        allocation: cleared.allocation,
    })
}
