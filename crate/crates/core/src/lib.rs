pub mod exact;
pub mod linalg;
pub mod ncpoly;
pub mod finite_cstar;
pub mod supernatural;
pub mod choquet;
pub mod aialg;
pub mod intertwine;
