//! Sparse mixed-integer linear models and a small deterministic
//! branch-and-bound solver built on a bounded revised simplex.
//!
//! The solver is tuned for determinism rather than speed: a dense explicit
//! basis inverse, Dantzig pricing with a Bland fallback on degenerate
//! stalls, dual simplex warm starts between tree nodes and best-bound node
//! selection with depth-first plunging.
//!
//! ```
//! use rmfs_milp::{MilpModel, ObjectiveSense, Sense, SolveParams, SolveStatus, Variable};
//!
//! let mut model = MilpModel::new(ObjectiveSense::Maximize);
//! let a = model.add_variable(Variable::binary("a")).unwrap();
//! let b = model.add_variable(Variable::binary("b")).unwrap();
//! model.add_constraint_terms("cap", vec![(a, 2.0), (b, 3.0)], Sense::Le, 4.0).unwrap();
//! model.set_objective(vec![(a, 3.0), (b, 4.0)]).unwrap();
//! let outcome = rmfs_milp::solve(&model, &SolveParams::default()).unwrap();
//! assert_eq!(outcome.status, SolveStatus::Optimal);
//! assert_eq!(outcome.objective(), Some(4.0));
//! ```

mod bnb;
mod error;
mod lp;
mod model;

pub use bnb::{lp_relaxation_bound, solve, Incumbent, SolveOutcome, SolveParams, SolveStatus};
pub use error::{ModelError, RelaxationError};
pub use model::{
    LinearConstraint, MilpModel, ObjectiveSense, Sense, VarKind, VarRef, Variable,
};
