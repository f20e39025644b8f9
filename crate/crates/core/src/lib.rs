//! Conservative solutions of the Camassa–Holm equation with a linear forcing term
//!
//! ```text
//! u_t − u_txx + 3uu_x − 2u_x u_xx − uu_xxx = ku,
//! ```
//!
//! computed in characteristic coordinates. The solution is carried by the
//! semi-linear system for `(u, v, ξ)` on a fixed grid in the characteristic
//! variable `Y`, together with the particle positions `x(t, Y)`, so that wave
//! breaking (peakon collisions) is continued through without loss of energy.
//!
//! Pipeline: [`initmap`] builds the initial Lagrangian state, [`evolve`] marches
//! it in time using the [`nonlocal`] convolution terms, [`eulerian`] maps states
//! back to `(t, x)`, [`diagnostics`] checks energy laws and identities, and
//! [`characteristics`] traces generalized characteristics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod diagnostics;
pub mod error;
pub mod eulerian;
pub mod evolve;
pub mod initmap;
pub mod nonlocal;
pub mod numerics;
pub mod presets;

#[cfg(test)]
pub(crate) mod oracle;

pub use characteristics::{trace_characteristic, verify_along_path, CharacteristicPath};
pub use diagnostics::{BumpTestFunction, DiagnosticRecord};
pub use error::{Error, Result};
pub use eulerian::{to_eulerian, EulerianSnapshot};
pub use evolve::{integrate, rhs, step_rk4, StateDerivative, Trajectory};
pub use initmap::{build_initial_state, InitialData, LagrangianState, SolverConfig};
pub use nonlocal::{eval_nonlocal_fast, eval_nonlocal_naive, NonlocalTerms};
pub use presets::Preset;
