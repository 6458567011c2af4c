pub mod fusion;
pub mod graph;
pub mod harness;
pub mod net;
pub mod noise;
pub mod uf;
pub mod window;
