//! The guide in `book/src`, compiled so that every Rust snippet runs as a
//! doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/fock-space.md")]
pub mod fock_space {}

#[doc = include_str!("../../../book/src/device.md")]
pub mod device {}

#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}

#[doc = include_str!("../../../book/src/tomography.md")]
pub mod tomography {}

#[doc = include_str!("../../../book/src/backaction.md")]
pub mod backaction {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
