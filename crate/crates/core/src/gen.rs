//! Seeded random instance generation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::{InstanceDocument, SCHEMA_VERSION};
use crate::model::{
    validate_instance, Aircraft, Instance, Operator, RouteOption, Slot, ValueProfile, Vertiport,
};
use crate::rational::{int, ratio, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CongestionShape {
    /// `g(q) = c q`.
    Linear,
    /// `g(q) = c q²`.
    #[default]
    Quadratic,
    /// Random non-decreasing marginal increments.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub horizon: (Slot, Slot),
    pub vertiports: (usize, usize),
    pub operators: (usize, usize),
    pub fleet_size: (usize, usize),
    /// Total aircraft cap across operators.
    pub max_aircraft: usize,
    /// Menu size including the stay entry.
    pub menu_size: (usize, usize),
    pub arrival_cap: (u32, u32),
    pub departure_cap: (u32, u32),
    pub parking_cap: (u32, u32),
    /// Valuations are `n/2` with `n` drawn from this range.
    pub value_halves: (u32, u32),
    pub congestion: CongestionShape,
    /// Congestion scale `c` is `n/2` with `n` drawn from this range.
    pub congestion_halves: (u32, u32),
    /// `λ = n/2`.
    pub lambda_halves: (u32, u32),
    /// `ρ = n/2`, `n >= 1`.
    pub weight_halves: (u32, u32),
    /// Probability that the stay entry gets a non-zero value.
    pub stay_value_prob: f64,
    pub max_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            horizon: (2, 4),
            vertiports: (2, 3),
            operators: (2, 4),
            fleet_size: (1, 2),
            max_aircraft: 4,
            menu_size: (2, 3),
            arrival_cap: (1, 2),
            departure_cap: (1, 2),
            parking_cap: (1, 2),
            value_halves: (0, 20),
            congestion: CongestionShape::Quadratic,
            congestion_halves: (0, 4),
            lambda_halves: (0, 4),
            weight_halves: (1, 4),
            stay_value_prob: 0.3,
            max_attempts: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("no valid instance after {0} attempts (slack condition unattainable?)")]
    Exhausted(usize),
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<(), GenerateError> {
        let ranges: [(&str, u64, u64); 11] = [
            ("horizon", self.horizon.0 as u64, self.horizon.1 as u64),
            ("vertiports", self.vertiports.0 as u64, self.vertiports.1 as u64),
            ("operators", self.operators.0 as u64, self.operators.1 as u64),
            ("fleet_size", self.fleet_size.0 as u64, self.fleet_size.1 as u64),
            ("menu_size", self.menu_size.0 as u64, self.menu_size.1 as u64),
            ("arrival_cap", self.arrival_cap.0 as u64, self.arrival_cap.1 as u64),
            ("departure_cap", self.departure_cap.0 as u64, self.departure_cap.1 as u64),
            ("parking_cap", self.parking_cap.0 as u64, self.parking_cap.1 as u64),
            ("value_halves", self.value_halves.0 as u64, self.value_halves.1 as u64),
            ("lambda_halves", self.lambda_halves.0 as u64, self.lambda_halves.1 as u64),
            ("weight_halves", self.weight_halves.0 as u64, self.weight_halves.1 as u64),
        ];
        for (name, lo, hi) in ranges {
            if lo > hi {
                return Err(GenerateError::Config(format!("{name} range is empty")));
            }
        }
        if self.congestion_halves.0 > self.congestion_halves.1 {
            return Err(GenerateError::Config("congestion_halves range is empty".into()));
        }
        if self.horizon.0 == 0 {
            return Err(GenerateError::Config("horizon must be at least 1".into()));
        }
        if self.vertiports.0 == 0 {
            return Err(GenerateError::Config("need at least one vertiport".into()));
        }
        if self.menu_size.0 == 0 {
            return Err(GenerateError::Config("menus need the stay entry".into()));
        }
        if self.weight_halves.0 == 0 {
            return Err(GenerateError::Config("weights must be positive".into()));
        }
        if self.max_attempts == 0 {
            return Err(GenerateError::Config("max_attempts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.stay_value_prob) {
            return Err(GenerateError::Config("stay_value_prob outside [0, 1]".into()));
        }
        Ok(())
    }
}

fn pick<T: rand::distributions::uniform::SampleUniform + PartialOrd + Copy>(
    rng: &mut ChaCha8Rng,
    range: (T, T),
) -> T {
    rng.gen_range(range.0..=range.1)
}

fn congestion_table(
    rng: &mut ChaCha8Rng,
    shape: CongestionShape,
    cap: u32,
    scale: &Rational,
) -> Vec<Rational> {
    let mut table = vec![int(0)];
    let mut marginal = int(0);
    for q in 1..=cap as i64 {
        let step = match shape {
            CongestionShape::Linear => scale.clone(),
            CongestionShape::Quadratic => scale * int(2 * q - 1),
            CongestionShape::Random => {
                marginal += ratio(rng.gen_range(0..=2), 2) * scale;
                marginal.clone()
            }
        };
        let next = table.last().expect("non-empty") + step;
        table.push(next);
    }
    table
}

fn attempt(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> (Instance, ValueProfile) {
    let h = pick(rng, config.horizon);
    let nv = pick(rng, config.vertiports);
    let ports: Vec<String> = (0..nv).map(|i| format!("v{i}")).collect();
    let congestion_scale = ratio(pick(rng, config.congestion_halves) as i64, 2);
    let vertiports: Vec<Vertiport> = ports
        .iter()
        .map(|id| {
            let per_slot = |rng: &mut ChaCha8Rng, r: (u32, u32)| -> Vec<u32> {
                (0..h).map(|_| pick(rng, r)).collect()
            };
            let arrival_cap = per_slot(rng, config.arrival_cap);
            let departure_cap = per_slot(rng, config.departure_cap);
            let parking_cap = per_slot(rng, config.parking_cap);
            let congestion_cost = parking_cap
                .iter()
                .map(|&c| congestion_table(rng, config.congestion, c, &congestion_scale))
                .collect();
            Vertiport {
                id: id.clone(),
                arrival_cap,
                departure_cap,
                parking_cap,
                congestion_cost,
            }
        })
        .collect();

    let mut remaining = config.max_aircraft;
    let n_ops = pick(rng, config.operators);
    let mut operators = Vec::with_capacity(n_ops);
    for o in 0..n_ops {
        let size = pick(rng, config.fleet_size).min(remaining);
        remaining -= size;
        let fleet = (0..size)
            .map(|a| {
                let origin = ports.choose(rng).expect("vertiports").clone();
                let m = if h == 1 { 1 } else { pick(rng, config.menu_size) };
                let stay_at = rng.gen_range(0..m);
                let menu = (0..m)
                    .map(|k| {
                        if k == stay_at {
                            RouteOption::stay(k)
                        } else {
                            let d = rng.gen_range(1..h);
                            let arr = rng.gen_range(d + 1..=h);
                            let dest = ports.choose(rng).expect("vertiports").clone();
                            RouteOption::transit(k, d, dest, arr)
                        }
                    })
                    .collect();
                Aircraft {
                    id: format!("a{a}"),
                    origin,
                    menu,
                }
            })
            .collect();
        operators.push(Operator {
            id: format!("op{o}"),
            weight: ratio(pick(rng, config.weight_halves) as i64, 2),
            fleet,
        });
    }
    let lambda = ratio(pick(rng, config.lambda_halves) as i64, 2);
    let instance = Instance::new(h, lambda, vertiports, operators);
    let values = ValueProfile::from_fn(&instance, |_, _, opt| {
        if opt.is_stay() && !rng.gen_bool(config.stay_value_prob) {
            int(0)
        } else {
            ratio(pick(rng, config.value_halves) as i64, 2)
        }
    });
    (instance, values)
}

/// Draws instances from `config.seed` until one passes validation.
pub fn generate(config: &GeneratorConfig) -> Result<InstanceDocument, GenerateError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.max_attempts {
        let (instance, values) = attempt(config, &mut rng);
        if validate_instance(&instance).is_valid() {
            return Ok(InstanceDocument {
                schema_version: SCHEMA_VERSION.to_string(),
                instance,
                bids: None,
                valuations: Some(values),
            });
        }
    }
    Err(GenerateError::Exhausted(config.max_attempts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_document() {
        let cfg = GeneratorConfig {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn neighbouring_seeds_differ() {
        let docs: Vec<_> = (0..5)
            .map(|s| {
                generate(&GeneratorConfig {
                    seed: s,
                    ..Default::default()
                })
                .unwrap()
            })
            .collect();
        assert!(docs.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn generated_instances_validate() {
        for seed in 0..100 {
            let doc = generate(&GeneratorConfig {
                seed,
                ..Default::default()
            })
            .unwrap();
            assert!(validate_instance(&doc.instance).is_valid());
            assert!(doc.instance.aircraft_count() <= 4);
            assert!(doc.instance.candidate_space() <= 81);
        }
    }

    #[test]
    fn unattainable_slack_exhausts() {
        let cfg = GeneratorConfig {
            parking_cap: (0, 0),
            operators: (1, 1),
            fleet_size: (1, 1),
            max_attempts: 5,
            ..Default::default()
        };
        assert_eq!(generate(&cfg), Err(GenerateError::Exhausted(5)));
    }

    #[test]
    fn empty_range_is_rejected() {
        let cfg = GeneratorConfig {
            horizon: (3, 2),
            ..Default::default()
        };
        assert!(matches!(generate(&cfg), Err(GenerateError::Config(_))));
    }

    #[test]
    fn congestion_shapes_are_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for shape in [
            CongestionShape::Linear,
            CongestionShape::Quadratic,
            CongestionShape::Random,
        ] {
            let t = congestion_table(&mut rng, shape, 5, &ratio(3, 2));
            assert_eq!(t[0], int(0));
            for q in 1..t.len() - 1 {
                assert!(&t[q + 1] - &t[q] >= &t[q] - &t[q - 1]);
            }
        }
    }
}
