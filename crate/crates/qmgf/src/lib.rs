/*!
Compiler and solver toolkit that turns a distribution-network description
into a compact QUBO for microgrid formation, samples it classically, and
verifies decoded solutions against the original constraint semantics.

Pipeline:

```text
instance JSON --> NetworkModel --> BinaryProgram --> QuboModel / IsingModel
                      |                                  |
                      |                              samplers (exact, SA)
                      |                                  |
                      +--------- verify <---------- decoded Solution
```

All network quantities are exact rationals from the moment they are parsed;
nothing is rounded until a model is deliberately scaled to integers.
*/

pub mod analysis;
pub mod cli;
pub mod decimal;
pub mod formulation;
pub mod graphs;
pub mod lowering;
pub mod network;
pub mod solvers;
pub mod verify;

pub use network::{load_network, NetworkModel};

/// Exact rational scalar used throughout the modelling layers.
pub type Rat = num_rational::BigRational;
