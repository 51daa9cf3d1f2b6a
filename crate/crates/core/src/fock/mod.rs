//! Operators and superoperators on the truncated qubit ⊗ cavity ⊗ JPA space.

mod density;
mod layout;
mod operator;
mod sparse;
mod superop;

pub use density::{thermal_mode, DensityMatrix, ModeDensity};
pub use layout::{SpaceLayout, Subsystem, QUBIT_DIM};
pub use operator::{annihilation, embed, embed_at, number, qubit_ops, LadderSet, ModeOperator, Operator};
pub use sparse::{SparseMatrix, DROP_TOLERANCE};
pub use superop::{commutator_superop, dissipator_superop, vectorize_generator, CascadeCoupling, Channel, Superoperator};

