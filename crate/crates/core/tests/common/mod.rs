#![allow(dead_code)]
//! Reference implementations used only by tests. Nothing here shares code
//! with the library.

pub mod bessel_oracle;
pub mod fd_oracle;
pub mod t0_oracle;
