//! Numerical toolkit for dissipative integral operators of the form
//!
//! ```text
//! (Af)(x) = α(x) f(x) + ½ i μ({x}) k(x,x) f(x) + i ∫_[0,x) k(x,s) f(s) dμ(s)
//! ```
//!
//! on `L²(H, μ)` with `k(x,s) = c(x) c(s)*`. The crate builds such operators
//! from measure/multiplier/kernel data, computes their characteristic
//! function `S_A(z)` as the value at `t = 0` of a matrix Cauchy problem on
//! the mass coordinate `[0, M]`, and evaluates resolvent, trace and
//! geometric tests for similarity to a normal operator. Purely atomic
//! measures additionally have an exact dense-matrix oracle.
//!
//! Module map:
//!
//! * [`measure`] – the measure `μ`, the mass coordinate `φ`, its inverse `ψ`
//!   and the pulled-back segment structure ([`measure::StarGrid`]).
//! * [`operator_model`] – problem data ([`OperatorSpec`]), dense assembly of
//!   `A`, `A*`, `Im A` and the joint spectrum of `α(x)` and `k(x,x)`.
//! * [`cauchy`] – the backward sweep for `G(t,z)`, Picard iterates, the inverse
//!   path and the resolvent of `A*`.
//! * [`charfunc`] – `S_A`, its determinant, Blaschke factors, factorizations
//!   and kernel dimensions at eigenvalues.
//! * [`criteria`] – LRG/UTB/C3 constants, Carleson and sparseness geometry,
//!   the push-forward measures `ν_c`, `ν_{d,h}`, `ν_h` and the verdicts.
//! * [`oracle`] – dense ground truth on atomic specs and the diagonal
//!   normal-operator example family.

// `!(x > 0.0)` is how the input checks reject NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cauchy;
pub mod charfunc;
pub mod corpus;
pub mod criteria;
pub mod error;
pub mod linalg;
pub mod measure;
pub mod operator_model;
pub mod oracle;

pub use cauchy::{GPath, SolverOptions};
pub use charfunc::CharSample;
pub use criteria::{CriteriaConfig, CriteriaReport, GridParams, Verdict, VerdictReport, ZGrid};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use measure::{Atom, ContinuousSpec, Measure, StarGrid};
pub use operator_model::{CoefficientField, DiscreteOperator, NodeId, NodeSamples, OperatorSpec, SpectrumData};
pub use oracle::OracleResult;
