//! Evaluation of L-functions with large conductor in the band `|t| ≤ 1` of
//! the critical line.
//!
//! The pipeline for ideal class group characters of an imaginary quadratic
//! field of discriminant `-q`:
//!
//! 1. [`forms`]: reduced forms, the class group and discrete-log coordinates.
//! 2. [`theta`]: representation numbers `r_Q(n)` and the per-character
//!    coefficients `r_φ(n)` obtained with a DFT over the class group.
//! 3. [`gfun`]: the kernel `G(s, x) = x^{-s} Γ(s, x)` and its x-derivatives.
//! 4. [`engine`]: the exponentially spaced Taylor grid, the `s`-independent
//!    inner sums, and the Hardy function `Z(t, φ)`.
//! 5. [`zeros`]: sign-change scanning, bracketed refinement and low-lying
//!    zero statistics.
//!
//! [`generic`] runs the same Taylor machinery for an arbitrary integer
//! coefficient sequence (quadratic Dirichlet characters, user files).

pub mod cache;
pub mod engine;
pub mod error;
pub mod fft;
pub mod forms;
pub mod generic;
pub mod gfun;
pub mod mp;
pub mod theta;
pub mod zeros;

pub use error::{Error, Result};
pub use forms::{CharIndex, ClassGroup, Discriminant, QuadForm};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
