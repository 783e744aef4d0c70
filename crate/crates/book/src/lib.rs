//! The chapters of the guide in `book/src`, compiled so that every snippet
//! runs as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/ch01-potentials.md")]
pub mod chapter1 {}
#[doc = include_str!("../../../book/src/ch02-equilibrium.md")]
pub mod chapter2 {}
#[doc = include_str!("../../../book/src/ch03-fekete.md")]
pub mod chapter3 {}
#[doc = include_str!("../../../book/src/ch04-gas.md")]
pub mod chapter4 {}
#[doc = include_str!("../../../book/src/ch05-kernels.md")]
pub mod chapter5 {}
#[doc = include_str!("../../../book/src/ch06-limits.md")]
pub mod chapter6 {}
#[doc = include_str!("../../../book/src/ch07-density.md")]
pub mod chapter7 {}
#[doc = include_str!("../../../book/src/ch08-concentration.md")]
pub mod chapter8 {}
#[doc = include_str!("../../../book/src/ch09-cli.md")]
pub mod chapter9 {}
