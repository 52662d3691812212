//! Smoothing-spline ANOVA models in reproducing kernel Hilbert spaces.
//!
//! The crate builds tensor-sum model spaces from marginal kernels on the unit
//! interval, the plane, the sphere and ordered grids, and fits them under
//! Gaussian, Bernoulli, polychotomous and multivariate-Bernoulli likelihoods
//! as well as the multicategory support vector machine.
//!
//! It is `no_std` (with `alloc`) when the default `std` feature is disabled.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod anova;
pub mod error;
pub mod expfam;
pub mod gaussian;
pub mod kernels;
pub mod linalg;
pub mod math;
pub mod msvm;
pub mod mvb;
pub mod optim;
pub mod qp;

pub use anova::{
    build_model, empirical_anova, gram_matrices, AnovaGrid, Basis, Coefficients, ComponentRef, Design, Family,
    Flavor, GramSet, Model, ModelSpec, TermSpec, Variable,
};
pub use error::{Error, Result};
pub use kernels::{Domain, MarginalKernel, Measure, Part, Value};
