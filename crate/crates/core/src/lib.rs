//! Ground-state search for the frustrated J1-J2 Heisenberg model with
//! autoregressive neural tensor networks.

pub mod antn;
pub mod checkpoint;
pub mod arnn;
pub mod dmrg;
pub mod grad;
pub mod lattice;
pub mod model;
pub mod mps;
pub mod numerics;
pub mod oracle;
pub mod vmc;
pub mod wavefunction;
