//! Independent validators: finite differences in t, a pulled-back grid
//! eigensolver and a Lane–Emden ground-state solver.

pub mod fd;
pub mod grid;
pub mod lane_emden;
