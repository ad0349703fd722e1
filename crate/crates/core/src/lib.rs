//! Exact symbolic tools for polynomial positivity and feedback synthesis.

pub mod feedback;
pub mod formalfactor;
pub mod parser;
pub mod polyring;
pub mod positivity;
pub mod simulate;
