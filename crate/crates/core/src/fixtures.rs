//! Small hand-made instances used by tests and examples.

use crate::instance::{units, Instance};
use crate::sequencing::SequencingInstance;

/// Three products, three small orders, four racks (the last one holds only
/// an undemanded product), one picker taking all three orders.
pub fn t1() -> Instance {
    Instance {
        name: "t1".into(),
        num_products: 3,
        orders: vec![units([(0, 1)]), units([(1, 1)]), units([(0, 1), (1, 1)])],
        racks: vec![
            units([(0, 1)]),
            units([(1, 1)]),
            units([(0, 1), (1, 1)]),
            units([(2, 4)]),
        ],
        capacities: vec![3],
        face_groups: vec![],
    }
}

/// Two orders each needing one unit of p0 and p1; r0 holds two p0, r1 two p1.
pub fn s1(bins: usize) -> SequencingInstance {
    SequencingInstance::new(
        vec![units([(0, 1), (1, 1)]), units([(0, 1), (1, 1)])],
        vec![units([(0, 2)]), units([(1, 2)])],
        bins,
    )
    .expect("s1 is well formed")
}
