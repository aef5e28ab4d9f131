pub mod comparators;
pub mod error;
pub mod gof;
pub mod inference;
pub mod latent;
pub mod model;
pub mod numerics;
pub mod simulation;
