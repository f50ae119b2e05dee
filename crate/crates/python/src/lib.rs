//! Python bindings. Documents are passed around as [`Document`] objects;
//! exact rationals come back as `fractions.Fraction`.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::vertiport_auction as core;
use core::gen::{generate as gen_document, CongestionShape, GeneratorConfig};
use core::io::{parse_document, read_document, render_document, write_document, DocumentError, InstanceDocument};
use core::mechanism::{run_auction_with, AuctionOptions, PaymentRule};
use core::oracle::{oracle_auction as oracle_run, EnumerationBudget};
use core::properties::{check_properties as check_props, PropertyConfig};
use core::solver::{solve_with, SolveOptions, Strategy};
use core::{build_graph, render_rational, validate_instance, Allocation, Instance, Rational};

fn doc_err(e: DocumentError) -> PyErr {
    if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fraction<'py>(py: Python<'py>, v: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((render_rational(v),))
}

fn allocation_dict<'py>(py: Python<'py>, inst: &Instance, x: &Allocation) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    for (o, op) in inst.operators().iter().enumerate() {
        let fleet = PyDict::new(py);
        for (a, ac) in op.fleet.iter().enumerate() {
            fleet.set_item(&ac.id, x.keys()[o][a])?;
        }
        out.set_item(&op.id, fleet)?;
    }
    Ok(out)
}

fn parse_strategy(name: &str) -> PyResult<Strategy> {
    match name {
        "bnb" => Ok(Strategy::BranchAndBound),
        "enumerate" => Ok(Strategy::Enumerate),
        other => Err(PyValueError::new_err(format!("unknown strategy {other:?}"))),
    }
}

/// An instance plus optional bids and valuations.
#[pyclass(name = "Document", module = "vertiport_auction")]
struct PyDocument {
    inner: InstanceDocument,
}

#[pymethods]
impl PyDocument {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_document(text).map(|inner| PyDocument { inner }).map_err(doc_err)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        read_document(&path).map(|inner| PyDocument { inner }).map_err(doc_err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, horizon=None, operators=None, fleet_size=None, menu_size=None))]
    fn generate(
        seed: u64,
        horizon: Option<(u32, u32)>,
        operators: Option<(usize, usize)>,
        fleet_size: Option<(usize, usize)>,
        menu_size: Option<(usize, usize)>,
    ) -> PyResult<Self> {
        let d = GeneratorConfig::default();
        let cfg = GeneratorConfig {
            seed,
            horizon: horizon.unwrap_or(d.horizon),
            operators: operators.unwrap_or(d.operators),
            fleet_size: fleet_size.unwrap_or(d.fleet_size),
            menu_size: menu_size.unwrap_or(d.menu_size),
            congestion: CongestionShape::Quadratic,
            ..d
        };
        gen_document(&cfg).map(|inner| PyDocument { inner }).map_err(value_err)
    }

    fn render(&self) -> String {
        render_document(&self.inner)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        write_document(&path, &self.inner).map_err(doc_err)
    }

    #[getter]
    fn horizon(&self) -> u32 {
        self.inner.instance.horizon()
    }

    #[getter]
    fn operators(&self) -> Vec<String> {
        self.inner.instance.operators().iter().map(|o| o.id.clone()).collect()
    }

    #[getter]
    fn aircraft_count(&self) -> usize {
        self.inner.instance.aircraft_count()
    }

    /// Validation issues; empty when the instance is valid.
    fn validate(&self) -> Vec<String> {
        validate_instance(&self.inner.instance)
            .issues
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    #[pyo3(signature = (strategy="bnb"))]
    fn solve<'py>(&self, py: Python<'py>, strategy: &str) -> PyResult<Bound<'py, PyDict>> {
        let inst = &self.inner.instance;
        let graph = build_graph(inst, &self.inner.effective_bids()).map_err(value_err)?;
        let result = solve_with(&graph, &SolveOptions::with_strategy(parse_strategy(strategy)?))
            .map_err(value_err)?;
        let out = PyDict::new(py);
        out.set_item("objective", fraction(py, &result.objective)?)?;
        out.set_item("allocation", allocation_dict(py, inst, &result.allocation)?)?;
        out.set_item("nodes", result.stats.nodes)?;
        Ok(out)
    }

    /// Allocation, payments and, when valuations are present, utilities.
    #[pyo3(signature = (payment_rule="pseudo-bid"))]
    fn auction<'py>(&self, py: Python<'py>, payment_rule: &str) -> PyResult<Bound<'py, PyDict>> {
        let inst = &self.inner.instance;
        let opts = AuctionOptions {
            payment_rule: parse_rule(payment_rule)?,
            parallel: true,
            ..Default::default()
        };
        let outcome = run_auction_with(inst, &self.inner.effective_bids(), &opts).map_err(value_err)?;
        let out = PyDict::new(py);
        out.set_item("welfare", fraction(py, &outcome.cleared_welfare)?)?;
        out.set_item("allocation", allocation_dict(py, inst, &outcome.allocation)?)?;
        let payments = PyDict::new(py);
        for (id, p) in &outcome.payments {
            payments.set_item(id, fraction(py, p)?)?;
        }
        out.set_item("payments", payments)?;
        if let Some(vals) = &self.inner.valuations {
            let utilities = PyDict::new(py);
            for op in inst.operators() {
                let u = outcome.utility(inst, &op.id, vals).map_err(value_err)?;
                utilities.set_item(&op.id, fraction(py, &u)?)?;
            }
            out.set_item("utilities", utilities)?;
        }
        Ok(out)
    }

    /// Brute-force reference outcome.
    #[pyo3(signature = (budget=2_000_000))]
    fn oracle<'py>(&self, py: Python<'py>, budget: u128) -> PyResult<Bound<'py, PyDict>> {
        let inst = &self.inner.instance;
        let o = oracle_run(
            inst,
            &self.inner.effective_bids(),
            EnumerationBudget {
                max_allocations: budget,
            },
        )
        .map_err(value_err)?;
        let out = PyDict::new(py);
        out.set_item("welfare", fraction(py, &o.welfare)?)?;
        out.set_item("allocation", allocation_dict(py, inst, &o.allocation)?)?;
        let payments = PyDict::new(py);
        for (op, p) in inst.operators().iter().zip(&o.payments) {
            payments.set_item(&op.id, fraction(py, p)?)?;
        }
        out.set_item("payments", payments)?;
        out.set_item("feasible_count", o.feasible_count)?;
        Ok(out)
    }

    /// Sampled IC/IR checks; returns the violation messages.
    #[pyo3(signature = (misreports=20, seed=0, payment_rule="pseudo-bid"))]
    fn check_properties(&self, misreports: usize, seed: u64, payment_rule: &str) -> PyResult<Vec<String>> {
        let vals = self
            .inner
            .valuations
            .clone()
            .unwrap_or_else(|| self.inner.effective_bids());
        let cfg = PropertyConfig {
            misreports,
            seed,
            auction: AuctionOptions {
                payment_rule: parse_rule(payment_rule)?,
                ..Default::default()
            },
        };
        let report = check_props(&self.inner.instance, &vals, &cfg).map_err(value_err)?;
        Ok(report.violations.iter().map(ToString::to_string).collect())
    }

    fn graph_dot(&self) -> PyResult<String> {
        let graph = build_graph(&self.inner.instance, &self.inner.effective_bids()).map_err(value_err)?;
        Ok(graph.to_dot())
    }

    fn __repr__(&self) -> String {
        let inst = &self.inner.instance;
        format!(
            "Document(horizon={}, vertiports={}, operators={}, aircraft={})",
            inst.horizon(),
            inst.vertiports().len(),
            inst.operators().len(),
            inst.aircraft_count()
        )
    }
}

fn parse_rule(name: &str) -> PyResult<PaymentRule> {
    match name {
        "pseudo-bid" => Ok(PaymentRule::PseudoBid),
        "unzeroed" => Ok(PaymentRule::Unzeroed),
        other => Err(PyValueError::new_err(format!("unknown payment rule {other:?}"))),
    }
}

#[pymodule]
fn vertiport_auction(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDocument>()?;
    m.add("SCHEMA_VERSION", core::io::SCHEMA_VERSION)?;
    Ok(())
}
