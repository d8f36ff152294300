#![deny(unsafe_code)]
#![allow(clippy::needless_range_loop)]

//! Analysis toolkit for repeated discrete choice under consumption dependence.
//!
//! The central primitive is a *transition function*: a kernel mapping the pair
//! (consumed alternative, current preference order) to a distribution over
//! next-period preference orders. Fixing a menu turns the kernel into a Markov
//! chain over linear orders, and the long-run choice frequencies of that chain
//! are what an analyst observes as a random choice rule.
//!
//! The crate provides:
//!
//! - [`lattice`]: alternatives, menus as bitmasks, linear orders, and Möbius
//!   inversion on (products of) the menu lattice;
//! - [`dynamics`]: per-menu chains, stationary and invariant distributions,
//!   mean passage times, and the joint (preference, menu) chain driven by an
//!   arrival function;
//! - [`invariance`]: the two equivalent menu-invariance tests (local
//!   invariance and the no-investment linear program) together with
//!   closed-form expressions quantifying invariance failures;
//! - [`behaviors`]: persistent cravings and habit-formation logit in closed
//!   form, plus seeded generators for several behavioral kernel families;
//! - [`jointchoice`]: multi-period joint choice rules, the axioms
//!   characterizing consumption-dependent random utility, and the path-flow
//!   decomposition recovering a representation;
//! - [`hypotest`]: extreme-point and Möbius-constraint consistency tests for
//!   (possibly partially observed) joint choice data;
//! - [`lp`]: exact-rational LP feasibility with verified certificates.

pub mod behaviors;
pub mod dynamics;
pub mod error;
pub mod hypotest;
pub mod invariance;
pub mod jointchoice;
pub mod lattice;
pub mod lp;
pub mod mat;
pub mod num;

pub use error::{Error, Result};
pub use num::Scalar;
