//! Photoacoustic tomography in 2D with variable sound speed: a coupled
//! FEM/convolution-quadrature BEM wave solver, the forward operator and its
//! adjoint, Landweber and time-reversal reconstructions, and phantoms.
//!
//! Everything numeric is generic over [`scalar::Real`]; the aliases below fix
//! `f64`, which is what the CLI uses.

pub mod bessel;
pub mod cq;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod operators;
pub mod phantoms;
pub mod recon;
pub mod scalar;
pub mod trace;
pub mod wavesolver;

pub use error::{PatError, Result};

pub type Point = scalar::Point2<f64>;
pub type Mesh = geometry::TriMesh<f64>;
pub type Boundary = geometry::BoundaryGrid<f64>;
pub type Space = fem::FeSpace<f64>;
pub type Field = fem::NodalField<f64>;
pub type Trace = trace::BoundaryTrace<f64>;
pub type Grid = wavesolver::TimeGrid<f64>;
pub type System = wavesolver::WaveSystem<f64>;
pub type Weights = cq::CQWeightSet<f64>;
pub type Setup = operators::OperatorSetup<f64>;
pub type Report = recon::ReconReport<f64>;
