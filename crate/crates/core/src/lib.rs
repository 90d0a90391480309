//! Forward-gradient optimization for static and time-varying objectives
//! satisfying the Polyak-Lojasiewicz (PL) or proximal-PL condition.
//!
//! Gradients are replaced by forward gradients `<grad f(x), u> u` with
//! `u ~ N(0, I)`, where the directional derivative comes from a single
//! forward-mode pass over dual numbers. The crate contains the estimator,
//! the online iteration schemes, closed-form tracking bounds, a drifting
//! least-squares test family, and an experiment harness.
//!
//! ```
//! use fwdgrad::dual::{sq_norm, Dual, FnScalar};
//! use fwdgrad::fgrad::DirectionSampler;
//! use fwdgrad::optim::{run_static, StepSize};
//!
//! let f = FnScalar::new(4, |x: &[Dual]| Ok(sq_norm(x) * 0.5));
//! let step = StepSize::forward_gradient_default(1.0, 4).unwrap();
//! let mut sampler = DirectionSampler::new(7, 4);
//! let trace = run_static(&f, 0.0, &[1.0; 4], step, 200, &mut sampler).unwrap();
//! assert!(trace.rows.last().unwrap().loss_gap < trace.initial_gap);
//! ```

pub mod bounds;
pub mod dual;
pub mod fgrad;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod rng;
