pub mod forward;
pub mod mcmc;
pub mod pipeline;
pub mod rng;
pub mod rom;
pub mod series;
pub mod vtk;
