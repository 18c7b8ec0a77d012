pub mod codegen;
pub mod expr;
pub mod format;
pub mod model;
pub mod patterns;
pub mod render;
pub mod simulator;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod validator;
