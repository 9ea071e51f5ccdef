pub mod bhatta;
pub mod bounds;
pub mod cli;
pub mod enumerate;
pub mod error;
pub mod params;
pub mod pbin;
pub mod sum;
pub mod verify;
