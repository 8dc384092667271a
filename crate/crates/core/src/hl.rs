//! Placeholder: high-level named-feature queries and binarization.
pub struct Placeholder;
