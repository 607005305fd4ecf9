//! Bellman functions for sharp square-function inequalities on dyadic
//! martingales: the Davis `L^α` estimate and the Bollobás weak-type estimate.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases below fix
//! `f64`, which is what the command-line front end and the acceptance suite
//! use.

pub mod bollobas;
pub mod davis;
pub mod dyadic;
pub mod envelope;
pub mod error;
pub mod fd;
pub mod lattice;
pub mod mc;
pub mod poly;
pub mod quad;
pub mod reduced;
pub mod report;
pub mod scalar;
pub mod specfn;

pub use error::{Error, Result};
pub use report::VerificationReport;
pub use scalar::Scalar;

pub type Axis = lattice::Axis<f64>;
pub type Lattice3 = lattice::Lattice3<f64>;
pub type DavisConstant = specfn::DavisConstant<f64>;
pub type DavisBellman = davis::DavisBellman<f64>;
pub type BollobasBellman = bollobas::BollobasBellman<f64>;
pub type BollobasLattice = bollobas::BollobasLattice<f64>;
pub type TestFunction = dyadic::DyadicTestFunction<f64>;
pub type OracleGrid = dyadic::OracleGrid<f64>;
pub type Grid2D = envelope::Grid2D<f64>;
pub type ObstacleSpec = envelope::ObstacleSpec<f64>;
pub type SolverConfig = envelope::SolverConfig<f64>;
