//! Rotational transonic flows: the Beltrami decomposition of the velocity
//! into a transported vorticity ratio, a div-curl part and a potential part.

pub mod data;
pub mod fields;
pub mod transport;

pub use data::{FlatMode, TangentialDatum};
pub use fields::{Families, ModalVelocity};
pub use transport::{kappa_boundary, solve_transport, streamline_check, StreamlineReport};
pub mod divcurl;
pub use divcurl::{solve_divcurl, solve_pi, vector_potential, CurlSource, DivCurl, PiSolution, VectorPotential};
pub mod solver;
pub use solver::{beltrami_fixed_point, beltrami_step, BeltramiConfig, BeltramiProblem, BeltramiRecord, BeltramiResiduals, BeltramiState};
