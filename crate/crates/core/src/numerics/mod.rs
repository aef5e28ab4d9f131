//! Numerical kernels: Gaussian rectangle probabilities, small dense linear
//! algebra, finite differences, quadrature and a quasi-Newton minimizer.

pub mod bvn;
pub mod diff;
pub mod linalg;
pub mod mvn;
pub mod normal;
pub mod optim;
pub mod quad;

pub use bvn::phi2;
pub use diff::{num_gradient, num_hessian};
pub use linalg::{cholesky, conditional_34, nearest_pd, CondNormal};
pub use mvn::{phi4, Phi4Options, Phi4Result};
pub use optim::{minimize, MinimizeOptions, MinimizeResult};
