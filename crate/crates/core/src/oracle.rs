//! Brute-force reference: enumerates every candidate allocation, filters by
//! feasibility and maximizes welfare directly. Uses only the domain model,
//! never the flow network or the solver.

use num_traits::Zero;

use crate::model::{
    is_feasible, social_welfare, Allocation, BidProfile, Instance, ModelError, Slot,
};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_allocations: u128,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_allocations: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("candidate space {space} exceeds budget {budget}")]
    BudgetExceeded { space: u128, budget: u128 },
    #[error("enumeration budget must be positive")]
    ZeroBudget,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_budget(instance: &Instance, budget: EnumerationBudget) -> Result<(), OracleError> {
    if budget.max_allocations == 0 {
        return Err(OracleError::ZeroBudget);
    }
    let space = instance.candidate_space();
    if space > budget.max_allocations {
        return Err(OracleError::BudgetExceeded {
            space,
            budget: budget.max_allocations,
        });
    }
    Ok(())
}

/// Feasible allocations in lexicographic order of their flat key vectors.
pub fn enumerate_feasible(
    instance: &Instance,
    budget: EnumerationBudget,
) -> Result<Vec<Allocation>, OracleError> {
    check_budget(instance, budget)?;
    let sizes: Vec<usize> = instance
        .aircraft_refs()
        .iter()
        .map(|&at| instance.aircraft(at).menu.len())
        .collect();
    let mut out = Vec::new();
    let mut keys = vec![0usize; sizes.len()];
    loop {
        let x = Allocation::from_flat(instance, &keys)?;
        if is_feasible(instance, &x).is_feasible() {
            out.push(x);
        }
        let mut pos = keys.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            keys[pos] += 1;
            if keys[pos] < sizes[pos] {
                break;
            }
            keys[pos] = 0;
        }
    }
}

fn departures(instance: &Instance, x: &Allocation) -> Vec<Slot> {
    instance
        .aircraft_refs()
        .iter()
        .map(|&at| x.route(instance, at).depart_time())
        .collect()
}

/// Welfare maximizer over `feasible`: highest welfare, then smallest
/// departure-slot vector, then smallest key vector.
fn argmax<'a>(
    instance: &Instance,
    feasible: &'a [Allocation],
    bids: &BidProfile,
) -> Option<(&'a Allocation, Rational)> {
    let mut best: Option<(&Allocation, Rational, Vec<Slot>)> = None;
    for x in feasible {
        let w = social_welfare(instance, x, bids);
        let better = match &best {
            None => true,
            Some((bx, bw, bd)) => {
                w > *bw || (w == *bw && {
                    let d = departures(instance, x);
                    (d, x.flat()) < (bd.clone(), bx.flat())
                })
            }
        };
        if better {
            let d = departures(instance, x);
            best = Some((x, w, d));
        }
    }
    best.map(|(x, w, _)| (x, w))
}

pub fn oracle_optimal(
    instance: &Instance,
    bids: &BidProfile,
    budget: EnumerationBudget,
) -> Result<(Allocation, Rational), OracleError> {
    bids.check(instance)?;
    let feasible = enumerate_feasible(instance, budget)?;
    let (x, w) = argmax(instance, &feasible, bids).expect("all-stay is feasible");
    Ok((x.clone(), w))
}

fn zero_operator(bids: &BidProfile, operator: usize) -> BidProfile {
    let zeros = bids.operator_values(operator)
        .iter()
        .map(|row| vec![Rational::zero(); row.len()])
        .collect();
    bids.with_operator(operator, zeros)
}

fn bid_term(instance: &Instance, x: &Allocation, bids: &BidProfile, operator: usize) -> Rational {
    (0..instance.operators()[operator].fleet.len())
        .map(|a| {
            let at = crate::model::AircraftRef {
                operator,
                aircraft: a,
            };
            bids.get(at, x.key(at)).clone()
        })
        .sum()
}

fn payment_from(
    instance: &Instance,
    feasible: &[Allocation],
    bids: &BidProfile,
    cleared: &Allocation,
    operator: usize,
) -> Rational {
    let rho = &instance.operators()[operator].weight;
    let zeroed = zero_operator(bids, operator);
    let (_, h) = argmax(instance, feasible, &zeroed).expect("all-stay is feasible");
    let others = social_welfare(instance, cleared, bids) - rho * bid_term(instance, cleared, bids, operator);
    (h - others) / rho
}

/// Payment of `operator` computed by exhaustion.
pub fn oracle_payment(
    instance: &Instance,
    bids: &BidProfile,
    operator: &str,
    budget: EnumerationBudget,
) -> Result<Rational, OracleError> {
    let i = instance
        .operator_index(operator)
        .ok_or_else(|| ModelError::UnknownOperator(operator.to_string()))?;
    bids.check(instance)?;
    let feasible = enumerate_feasible(instance, budget)?;
    let (cleared, _) = argmax(instance, &feasible, bids).expect("all-stay is feasible");
    Ok(payment_from(instance, &feasible, bids, cleared, i))
}

/// Full oracle outcome: allocation, welfare, and every operator's payment
/// (instance order), from a single enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub allocation: Allocation,
    pub welfare: Rational,
    pub payments: Vec<Rational>,
    pub feasible_count: usize,
}

pub fn oracle_auction(
    instance: &Instance,
    bids: &BidProfile,
    budget: EnumerationBudget,
) -> Result<OracleOutcome, OracleError> {
    bids.check(instance)?;
    let feasible = enumerate_feasible(instance, budget)?;
    let (cleared, welfare) = argmax(instance, &feasible, bids).expect("all-stay is feasible");
    let payments = (0..instance.operators().len())
        .map(|i| payment_from(instance, &feasible, bids, cleared, i))
        .collect();
    Ok(OracleOutcome {
        allocation: cleared.clone(),
        welfare,
        payments,
        feasible_count: feasible.len(),
    })
}
