pub mod criterion;
pub mod dual;
pub mod heisenberg;
pub mod linalg;
pub mod matgroup;
pub mod meataxe;
pub mod pingpong;
pub mod poly;
pub mod sadic;
