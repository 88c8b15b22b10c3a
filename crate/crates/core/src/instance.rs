use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// Units per product, positive entries only.
pub type Units = BTreeMap<usize, u32>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("instance needs at least one product")]
    NoProducts,
    #[error("{what} {index} refers to product {product} but there are only {num_products}")]
    UnknownProduct {
        what: &'static str,
        index: usize,
        product: usize,
        num_products: usize,
    },
    #[error("order {0} has no units")]
    EmptyOrder(usize),
    #[error("total picker capacity {capacity} exceeds the {orders} orders available")]
    CapacityExceedsOrders { capacity: usize, orders: usize },
    #[error("face group {group} refers to rack {rack} but there are only {racks}")]
    UnknownFaceRack { group: usize, rack: usize, racks: usize },
    #[error("rack {0} appears in more than one face group")]
    OverlappingFaces(usize),
}

/// Orders, racks and pickers of one allocation problem. All indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Instance {
    pub name: String,
    pub num_products: usize,
    pub orders: Vec<Units>,
    pub racks: Vec<Units>,
    /// Orders each picker must receive.
    pub capacities: Vec<usize>,
    /// Sets of racks that are faces of one physical rack.
    pub face_groups: Vec<Vec<usize>>,
}

impl Instance {
    pub fn num_orders(&self) -> usize {
        self.orders.len()
    }

    pub fn num_racks(&self) -> usize {
        self.racks.len()
    }

    pub fn num_pickers(&self) -> usize {
        self.capacities.len()
    }

    pub fn demand(&self, order: usize, product: usize) -> u32 {
        self.orders[order].get(&product).copied().unwrap_or(0)
    }

    pub fn supply(&self, rack: usize, product: usize) -> u32 {
        self.racks[rack].get(&product).copied().unwrap_or(0)
    }

    pub fn total_demand(&self) -> Vec<u64> {
        let mut total = vec![0u64; self.num_products];
        for order in &self.orders {
            for (&i, &q) in order {
                total[i] += q as u64;
            }
        }
        total
    }

    pub fn total_supply(&self) -> Vec<u64> {
        let mut total = vec![0u64; self.num_products];
        for rack in &self.racks {
            for (&i, &s) in rack {
                total[i] += s as u64;
            }
        }
        total
    }

    /// Products requested by at least one order.
    pub fn demanded_products(&self) -> BTreeSet<usize> {
        self.orders.iter().flat_map(|o| o.keys().copied()).collect()
    }

    /// True when the rack holds some product that some order asks for.
    pub fn rack_is_useful(&self, rack: usize, demanded: &BTreeSet<usize>) -> bool {
        self.racks[rack].keys().any(|i| demanded.contains(i))
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.num_products == 0 {
            return Err(InstanceError::NoProducts);
        }
        let n = self.num_products;
        for (what, maps) in [("order", &self.orders), ("rack", &self.racks)] {
            for (index, map) in maps.iter().enumerate() {
                if let Some(&product) = map.keys().find(|&&i| i >= n) {
                    return Err(InstanceError::UnknownProduct {
                        what,
                        index,
                        product,
                        num_products: n,
                    });
                }
            }
        }
        for (o, order) in self.orders.iter().enumerate() {
            if order.values().all(|&q| q == 0) {
                return Err(InstanceError::EmptyOrder(o));
            }
        }
        let capacity: usize = self.capacities.iter().sum();
        if capacity > self.orders.len() {
            return Err(InstanceError::CapacityExceedsOrders {
                capacity,
                orders: self.orders.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for (group, racks) in self.face_groups.iter().enumerate() {
            for &rack in racks {
                if rack >= self.racks.len() {
                    return Err(InstanceError::UnknownFaceRack {
                        group,
                        rack,
                        racks: self.racks.len(),
                    });
                }
                if !seen.insert(rack) {
                    return Err(InstanceError::OverlappingFaces(rack));
                }
            }
        }
        Ok(())
    }

    /// Sub-instance over the given orders, racks and pickers, in the given order.
    /// Face groups are kept for the racks that survive.
    pub fn restrict(&self, orders: &[usize], racks: &[usize], pickers: &[usize]) -> Instance {
        let position: BTreeMap<usize, usize> =
            racks.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let face_groups = self
            .face_groups
            .iter()
            .map(|g| g.iter().filter_map(|r| position.get(r).copied()).collect::<Vec<_>>())
            .filter(|g| g.len() > 1)
            .collect();
        Instance {
            name: self.name.clone(),
            num_products: self.num_products,
            orders: orders.iter().map(|&o| self.orders[o].clone()).collect(),
            racks: racks.iter().map(|&r| self.racks[r].clone()).collect(),
            capacities: pickers.iter().map(|&p| self.capacities[p]).collect(),
            face_groups,
        }
    }
}

/// Builds a unit map from `(product, units)` pairs, summing repeats and
/// dropping zeros.
pub fn units<I: IntoIterator<Item = (usize, u32)>>(pairs: I) -> Units {
    let mut map = Units::new();
    for (i, q) in pairs {
        if q > 0 {
            *map.entry(i).or_insert(0) += q;
        }
    }
    map
}
