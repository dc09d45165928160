pub mod error;
pub mod gap;
pub mod kclass;
pub mod krylov;
pub mod operator;
pub mod scenario;
pub mod space;
pub mod weak;
pub mod zoo;

pub use error::{Error, Result};
pub use space::C64;
