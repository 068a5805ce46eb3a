pub mod continuum;
pub mod cylinder;
pub mod io;
pub mod lattice;
pub mod verify;
pub mod weylq;
