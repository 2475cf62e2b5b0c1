mod derivs;
mod family;
mod periodic;

pub use derivs::*;
pub use family::*;
pub use periodic::*;
