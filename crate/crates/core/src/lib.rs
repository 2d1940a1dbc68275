//! Spin-1/2 density-matrix dynamics under spin-locked, amplitude/phase
//! modulated RF and magic-angle spinning.
//!
//! Every numeric type is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod propagation;
pub mod scalar;
pub mod sequence;
pub mod spin;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Operator = spin::OperatorMatrix<f64>;
pub type Basis = spin::SpinBasis<f64>;
pub type Spectrum = spin::HermitianSpectrum<f64>;
pub type Density = propagation::DensityDeviation<f64>;
pub type Trajectory = propagation::TrajectoryRecord<f64>;
pub type Sequence = sequence::SequenceSpec<f64>;
pub type Zeta = sequence::ZetaChoice<f64>;
pub type Coupling = hamiltonian::DipolarCoupling<f64>;
pub type System = hamiltonian::SpinSystem<f64>;
pub type Program = waveform::PulseProgram<f64>;
pub type Sample = waveform::WaveformSample<f64>;
pub type Crystallite = experiment::Orientation<f64>;
pub type Powder = experiment::PowderScheme<f64>;
pub type Run = experiment::RunResult<f64>;
pub type Sweep = experiment::SweepResult<f64>;
