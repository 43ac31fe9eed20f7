//! Exact-arithmetic best-of-many-with-deletion solver for the metric s-t path TSP.

pub mod bomd;
pub mod certify;
pub mod cuts;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod graph;
pub mod instance;
pub mod joins;
pub mod rational;
pub mod reconnect;
pub mod ratlp;
pub mod subtour;
pub mod treedecomp;

pub use error::{Error, Result};
pub use instance::Instance;
pub use rational::Rational;
