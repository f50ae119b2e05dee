use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use vertiport_auction::gen::{generate, CongestionShape, GeneratorConfig};
use vertiport_auction::graph::build_graph;
use vertiport_auction::io::{read_document, render_document, write_document, DocumentError, InstanceDocument};
use vertiport_auction::mechanism::{run_auction_with, AuctionOptions, MechanismOutcome, PaymentRule};
use vertiport_auction::model::{Allocation, AircraftRef, Instance, Route};
use vertiport_auction::oracle::{oracle_auction, EnumerationBudget};
use vertiport_auction::properties::{check_properties, PropertyConfig};
use vertiport_auction::rational::{render_approx, render_rational, Rational};
use vertiport_auction::solver::{solve_with, SolveOptions, Strategy};

const EXIT_VALIDATION: u8 = 1;
const EXIT_MISMATCH: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "vertiport-auction", version, about = "Vertiport reservation auction solver")]
struct Cli {
    /// Worker threads for payment and property computations.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Enumerate,
    Bnb,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    PseudoBid,
    Unzeroed,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Linear,
    Quadratic,
    Random,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value = "bnb")]
    strategy: StrategyArg,
    #[arg(long)]
    node_limit: Option<u64>,
    /// Time limit in milliseconds.
    #[arg(long)]
    time_limit_ms: Option<u64>,
}

impl SolveArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            strategy: match self.strategy {
                StrategyArg::Enumerate => Strategy::Enumerate,
                StrategyArg::Bnb => Strategy::BranchAndBound,
            },
            node_limit: self.node_limit,
            time_limit: self.time_limit_ms.map(Duration::from_millis),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance document.
    Validate { file: PathBuf },
    /// Welfare-maximizing allocation.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, value_enum, default_value = "text")]
        out: OutputFormat,
    },
    /// Allocation, payments, and utilities when valuations are present.
    Auction {
        file: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, value_enum, default_value = "text")]
        out: OutputFormat,
    },
    /// Compare solver and brute-force oracle.
    OracleCheck {
        file: PathBuf,
        #[arg(long, default_value_t = 2_000_000)]
        budget: u128,
    },
    /// Generate a random instance.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long, value_parser = parse_range::<u32>, default_value = "2..4")]
        horizon: (u32, u32),
        #[arg(long, value_parser = parse_range::<usize>, default_value = "2..3")]
        vertiports: (usize, usize),
        #[arg(long, value_parser = parse_range::<usize>, default_value = "2..4")]
        operators: (usize, usize),
        #[arg(long, value_parser = parse_range::<usize>, default_value = "1..2")]
        fleet_size: (usize, usize),
        #[arg(long, default_value_t = 4)]
        max_aircraft: usize,
        #[arg(long, value_parser = parse_range::<usize>, default_value = "2..3")]
        menu_size: (usize, usize),
        #[arg(long, value_parser = parse_range::<u32>, default_value = "1..2")]
        arrival_cap: (u32, u32),
        #[arg(long, value_parser = parse_range::<u32>, default_value = "1..2")]
        departure_cap: (u32, u32),
        #[arg(long, value_parser = parse_range::<u32>, default_value = "1..2")]
        parking_cap: (u32, u32),
        #[arg(long, value_enum, default_value = "quadratic")]
        congestion: ShapeArg,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled IC/IR checks under the document's valuations.
    Properties {
        file: PathBuf,
        #[arg(long, default_value_t = 20)]
        misreports: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "pseudo-bid")]
        payment_rule: RuleArg,
    },
    /// Auxiliary graph in Graphviz format.
    Graph { file: PathBuf },
}

fn parse_range<T: std::str::FromStr + PartialOrd + Copy>(s: &str) -> Result<(T, T), String> {
    let parse = |p: &str| p.trim().parse::<T>().map_err(|_| format!("bad number {p:?}"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        let code = if e.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        Failure::new(code, e.to_string())
    }
}

fn load(path: &Path) -> Result<InstanceDocument, Failure> {
    Ok(read_document(path)?)
}

fn solver_failure(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_MISMATCH, format!("solver failed: {e}"))
}

fn route_label(inst: &Instance, x: &Allocation, at: AircraftRef) -> String {
    match &x.route(inst, at).route {
        Route::Stay => "stay".into(),
        Route::Transit {
            depart,
            destination,
            arrive,
        } => format!(
            "{}@{depart} -> {destination}@{arrive}",
            inst.aircraft(at).origin
        ),
    }
}

fn exact(v: &Rational) -> String {
    format!("{} (~{})", render_rational(v), render_approx(v))
}

fn allocation_text(inst: &Instance, x: &Allocation) -> String {
    let mut out = String::from("allocation:\n");
    for &at in inst.aircraft_refs() {
        let op = &inst.operators()[at.operator];
        let _ = writeln!(
            out,
            "  {}/{}  key {}  {}",
            op.id,
            op.fleet[at.aircraft].id,
            x.key(at),
            route_label(inst, x, at)
        );
    }
    out
}

fn allocation_json(inst: &Instance, x: &Allocation) -> Value {
    let mut ops = Map::new();
    for (o, op) in inst.operators().iter().enumerate() {
        let mut fleet = Map::new();
        for (a, ac) in op.fleet.iter().enumerate() {
            fleet.insert(
                ac.id.clone(),
                json!(x.key(AircraftRef {
                    operator: o,
                    aircraft: a
                })),
            );
        }
        ops.insert(op.id.clone(), Value::Object(fleet));
    }
    Value::Object(ops)
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn cmd_validate(file: &Path) -> Result<(), Failure> {
    let doc = load(file)?;
    let inst = &doc.instance;
    println!(
        "valid: horizon {}, {} vertiports, {} operators, {} aircraft, {} candidate allocations",
        inst.horizon(),
        inst.vertiports().len(),
        inst.operators().len(),
        inst.aircraft_count(),
        inst.candidate_space()
    );
    Ok(())
}

fn cmd_solve(file: &Path, solve: &SolveArgs, out: OutputFormat) -> Result<(), Failure> {
    let doc = load(file)?;
    let graph = build_graph(&doc.instance, &doc.effective_bids()).map_err(solver_failure)?;
    let result = solve_with(&graph, &solve.options()).map_err(solver_failure)?;
    match out {
        OutputFormat::Json => print_json(&json!({
            "objective": render_rational(&result.objective),
            "allocation": allocation_json(&doc.instance, &result.allocation),
            "stats": {
                "nodes": result.stats.nodes,
                "fixed_delta_solves": result.stats.fixed_delta_solves,
            },
        })),
        OutputFormat::Text => {
            println!("objective: {}", exact(&result.objective));
            print!("{}", allocation_text(&doc.instance, &result.allocation));
            println!(
                "search: {} nodes, {} fixed-departure solves",
                result.stats.nodes, result.stats.fixed_delta_solves
            );
        }
    }
    Ok(())
}

fn auction_options(solve: SolveOptions, rule: PaymentRule) -> AuctionOptions {
    AuctionOptions {
        solve,
        payment_rule: rule,
        parallel: false,
    }
}

fn utilities(doc: &InstanceDocument, outcome: &MechanismOutcome) -> Option<Vec<(String, Rational)>> {
    let vals = doc.valuations.as_ref()?;
    Some(
        doc.instance
            .operators()
            .iter()
            .map(|op| {
                let u = outcome
                    .utility(&doc.instance, &op.id, vals)
                    .expect("operator from instance");
                (op.id.clone(), u)
            })
            .collect(),
    )
}

fn cmd_auction(file: &Path, solve: &SolveArgs, out: OutputFormat) -> Result<(), Failure> {
    let doc = load(file)?;
    let outcome = run_auction_with(
        &doc.instance,
        &doc.effective_bids(),
        &auction_options(solve.options(), PaymentRule::PseudoBid),
    )
    .map_err(solver_failure)?;
    let utils = utilities(&doc, &outcome);
    match out {
        OutputFormat::Json => {
            let mut v = json!({
                "cleared_welfare": render_rational(&outcome.cleared_welfare),
                "allocation": allocation_json(&doc.instance, &outcome.allocation),
                "payments": outcome
                    .payments
                    .iter()
                    .map(|(k, p)| (k.clone(), json!(render_rational(p))))
                    .collect::<Map<_, _>>(),
            });
            if let Some(u) = &utils {
                v["utilities"] = u
                    .iter()
                    .map(|(k, u)| (k.clone(), json!(render_rational(u))))
                    .collect::<Map<_, _>>()
                    .into();
            }
            print_json(&v);
        }
        OutputFormat::Text => {
            println!("cleared welfare: {}", exact(&outcome.cleared_welfare));
            print!("{}", allocation_text(&doc.instance, &outcome.allocation));
            println!("payments:");
            for (id, p) in &outcome.payments {
                println!("  {id}  {}", exact(p));
            }
            if let Some(u) = &utils {
                println!("utilities:");
                for (id, u) in u {
                    println!("  {id}  {}", exact(u));
                }
            }
        }
    }
    Ok(())
}

fn cmd_oracle_check(file: &Path, budget: u128) -> Result<(), Failure> {
    let doc = load(file)?;
    let bids = doc.effective_bids();
    let outcome = run_auction_with(
        &doc.instance,
        &bids,
        &auction_options(SolveOptions::default(), PaymentRule::PseudoBid),
    )
    .map_err(solver_failure)?;
    let oracle = oracle_auction(
        &doc.instance,
        &bids,
        EnumerationBudget {
            max_allocations: budget,
        },
    )
    .map_err(|e| Failure::new(EXIT_VALIDATION, format!("oracle refused: {e}")))?;

    let mut ok = true;
    let mut line = |label: &str, solver: &Rational, oracle: &Rational| {
        let same = solver == oracle;
        ok &= same;
        println!(
            "{label}: solver {} oracle {} {}",
            render_rational(solver),
            render_rational(oracle),
            if same { "ok" } else { "MISMATCH" }
        );
    };
    line("objective", &outcome.cleared_welfare, &oracle.welfare);
    for ((id, p), q) in outcome.payments.iter().zip(&oracle.payments) {
        line(&format!("payment {id}"), p, q);
    }
    let same_alloc = outcome.allocation == oracle.allocation;
    println!(
        "allocation: {}",
        if same_alloc { "ok" } else { "MISMATCH" }
    );
    println!("feasible allocations enumerated: {}", oracle.feasible_count);
    if ok && same_alloc {
        Ok(())
    } else {
        Err(Failure::new(EXIT_MISMATCH, "solver and oracle disagree"))
    }
}

fn cmd_properties(file: &Path, misreports: usize, seed: u64, rule: RuleArg) -> Result<(), Failure> {
    let doc = load(file)?;
    let vals = doc.valuations.clone().unwrap_or_else(|| doc.effective_bids());
    let rule = match rule {
        RuleArg::PseudoBid => PaymentRule::PseudoBid,
        RuleArg::Unzeroed => PaymentRule::Unzeroed,
    };
    let report = check_properties(
        &doc.instance,
        &vals,
        &PropertyConfig {
            misreports,
            seed,
            auction: auction_options(SolveOptions::default(), rule),
        },
    )
    .map_err(solver_failure)?;
    println!(
        "IR checks: {}, IC checks: {}, violations: {}",
        report.ir_checks,
        report.ic_checks,
        report.violations.len()
    );
    for v in &report.violations {
        println!("  {v}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_MISMATCH, "property violations found"))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_VALIDATION, e.to_string()))?;
    }
    match cli.command {
        Command::Validate { file } => cmd_validate(&file),
        Command::Solve { file, solve, out } => cmd_solve(&file, &solve, out),
        Command::Auction { file, solve, out } => cmd_auction(&file, &solve, out),
        Command::OracleCheck { file, budget } => cmd_oracle_check(&file, budget),
        Command::Gen {
            seed,
            horizon,
            vertiports,
            operators,
            fleet_size,
            max_aircraft,
            menu_size,
            arrival_cap,
            departure_cap,
            parking_cap,
            congestion,
            out,
        } => {
            let config = GeneratorConfig {
                seed,
                horizon,
                vertiports,
                operators,
                fleet_size,
                max_aircraft,
                menu_size,
                arrival_cap,
                departure_cap,
                parking_cap,
                congestion: match congestion {
                    ShapeArg::Linear => CongestionShape::Linear,
                    ShapeArg::Quadratic => CongestionShape::Quadratic,
                    ShapeArg::Random => CongestionShape::Random,
                },
                ..Default::default()
            };
            let doc = generate(&config).map_err(|e| Failure::new(EXIT_VALIDATION, e.to_string()))?;
            match out {
                Some(path) => write_document(&path, &doc)?,
                None => print!("{}", render_document(&doc)),
            }
            Ok(())
        }
        Command::Properties {
            file,
            misreports,
            seed,
            payment_rule,
        } => cmd_properties(&file, misreports, seed, payment_rule),
        Command::Graph { file } => {
            let doc = load(&file)?;
            let graph = build_graph(&doc.instance, &doc.effective_bids()).map_err(solver_failure)?;
            print!("{}", graph.to_dot());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
