//! Few-body lattice entanglement certification toolkit.
//!
//! Simulates one-dimensional multi-species Hubbard ground, thermal, dephased
//! and disordered states; synthesizes position- and momentum-basis
//! measurement shots; and certifies lower bounds on the entanglement
//! dimension from those shots via a two-basis fidelity-bound protocol.

pub mod bound;
pub mod envelope;
pub mod error;
pub mod fock;
pub mod hubbard;
pub mod measure;
pub mod modes;
pub mod pipeline;
pub mod project;
pub mod reference;
pub mod stats;
pub mod util;
