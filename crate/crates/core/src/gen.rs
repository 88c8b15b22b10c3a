//! Seeded random instances. The stream comes from `ChaCha8Rng::seed_from_u64`,
//! so a seed reproduces the same instance with this crate on any platform.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{units, Instance, InstanceError, Units};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("mu must lie strictly between 0 and 1, got {0}")]
    BadMu(f64),
    #[error("orders draw from at least 2 products, got {0}")]
    TooFewProducts(usize),
    #[error("max_items must be between 1 and 4, got {0}")]
    BadMaxItems(usize),
    #[error("unit choices must be non-empty and positive")]
    BadUnitChoices,
    #[error("no instance with enough supply after {0} attempts; try more racks")]
    RejectionCapReached(usize),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub mu: f64,
    pub max_items: usize,
    /// Distinct products per rack, clamped to the product count.
    pub rack_slots: usize,
    pub unit_choices: Vec<u32>,
    pub rejection_cap: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            mu: 1.0 / 1.73,
            max_items: 4,
            rack_slots: 25,
            unit_choices: vec![1, 2, 3, 4],
            rejection_cap: 1000,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(GenError::BadMu(self.mu));
        }
        if !(1..=4).contains(&self.max_items) {
            return Err(GenError::BadMaxItems(self.max_items));
        }
        if self.unit_choices.is_empty() || self.unit_choices.contains(&0) {
            return Err(GenError::BadUnitChoices);
        }
        Ok(())
    }
}

/// `P(m)` for m = 1..=max_items under the truncated geometric law.
pub fn item_count_probabilities(mu: f64, max_items: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=max_items).map(|m| mu * (1.0 - mu).powi(m as i32 - 1)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

pub fn sample_order<R: Rng + ?Sized>(rng: &mut R, params: &GenParams, num_products: usize) -> Result<Units, GenError> {
    if num_products < 2 {
        return Err(GenError::TooFewProducts(num_products));
    }
    let weights = item_count_probabilities(params.mu, params.max_items);
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    let m = dist.sample(rng) + 1;
    let order = match m {
        1 => units([(sample(rng, num_products, 1).index(0), 1)]),
        2 => {
            let p = sample(rng, num_products, 2).into_vec();
            if rng.gen_bool(0.5) {
                units([(p[0], 1), (p[1], 1)])
            } else {
                units([(p[0], 2)])
            }
        }
        3 => {
            let p = sample(rng, num_products, 2).into_vec();
            units([(p[0], 1), (p[1], 2)])
        }
        _ => {
            let p = sample(rng, num_products, 2).into_vec();
            units([(p[0], 2), (p[1], 2)])
        }
    };
    Ok(order)
}

fn sample_rack<R: Rng + ?Sized>(rng: &mut R, params: &GenParams, num_products: usize) -> Units {
    let slots = params.rack_slots.min(num_products);
    let mut chosen = sample(rng, num_products, slots).into_vec();
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|i| (i, params.unit_choices[rng.gen_range(0..params.unit_choices.len())]))
        .collect()
}

/// Draws orders and racks until every product has at least as much supply as
/// demand, up to `rejection_cap` attempts.
pub fn generate_instance(
    seed: u64,
    num_products: usize,
    num_orders: usize,
    num_racks: usize,
    capacities: &[usize],
    params: &GenParams,
) -> Result<Instance, GenError> {
    params.validate()?;
    if num_products < 2 {
        return Err(GenError::TooFewProducts(num_products));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..params.rejection_cap.max(1) {
        let orders = (0..num_orders)
            .map(|_| sample_order(&mut rng, params, num_products))
            .collect::<Result<Vec<_>, _>>()?;
        let racks: Vec<Units> = (0..num_racks).map(|_| sample_rack(&mut rng, params, num_products)).collect();
        let inst = Instance {
            name: format!("n{num_products}-o{num_orders}-r{num_racks}-p{}-s{seed}", capacities.len()),
            num_products,
            orders,
            racks,
            capacities: capacities.to_vec(),
            face_groups: vec![],
        };
        inst.validate()?;
        let supply = inst.total_supply();
        if inst.total_demand().iter().zip(&supply).all(|(d, s)| d <= s) {
            return Ok(inst);
        }
    }
    Err(GenError::RejectionCapReached(params.rejection_cap))
}
