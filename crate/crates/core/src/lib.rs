//! Computation fingerprints for verifiable delegated arithmetic.
//!
//! A delegator encodes verification bits (fingerprints) into the low-order
//! part of each encrypted word (or into a hidden slot of each SIMD vector),
//! computes the expected post-computation fingerprint once, and accepts a
//! server's result only when the returned fingerprint matches. A server
//! restricted to the trusted addition blackbox and encrypted lookup tables
//! either computes the requested arithmetic circuit correctly or gets caught
//! (or nullified); the adversary module reproduces the known attack
//! strategies and measures their success rates.
//!
//! The homomorphic backend is a functional simulator: ciphertexts hide their
//! plaintexts by API discipline, not cryptography. See [`he_backend`].
//!
//! # Quick tour
//!
//! ```
//! use fpdel_core::fingerprint::{FingerprintScheme, WordLayout};
//! use fpdel_core::log_mult::Circuit;
//! use fpdel_core::protocol::{self, ResponseVerdict};
//!
//! // F(x, y) = (2*x) + y + 3 over 6 computation and 6 fingerprint bits,
//! // with fingerprint values (3, 2) for the inputs and 3 for the constant.
//! let layout = WordLayout::new(6, 6).unwrap();
//! let scheme = FingerprintScheme::Integer { values: vec![3, 2, 3] };
//! let mut delegator = protocol::Delegator::new();
//! let prep = delegator
//!     .delegate(&Circuit::shift_example(), &[4, 7], &scheme, layout, None)
//!     .unwrap();
//! let response = protocol::serve_honest(&prep.request).unwrap();
//! let verified =
//!     protocol::verify_response(&prep.kp, &prep.request, &response, prep.expected_fp as i64)
//!         .unwrap();
//! assert_eq!(verified.verdict, ResponseVerdict::Accepted { comp_value: 18 });
//! ```

pub mod adversary;
pub mod blackbox_add;
pub mod blind_ops;
pub mod error;
pub mod fingerprint;
pub mod he_backend;
pub mod log_mult;
pub mod protocol;
pub mod simd_fp;

pub use error::{Error, Result};
