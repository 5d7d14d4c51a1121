//! Operator algebra and the model's Hamiltonian terms.

pub mod algebra;
pub mod hamiltonians;
pub mod sparse;

pub use algebra::{Elem, Monomial, OpSum};
pub use hamiltonians::*;
pub use sparse::SparseOperator;
