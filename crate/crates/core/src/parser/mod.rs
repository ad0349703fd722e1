//! Text input and output: expressions, system documents and certificates.

mod expr;
mod output;
mod system;

pub use expr::{
    declare_params, natural_cmp, parse_coefficient, parse_poly, ParseError, Span, SymbolTable,
};
pub use output::{
    certificate_json, certificate_text, factorization_json, no_certificate_json, synthesis_json,
    synthesis_text, SCHEMA_VERSION,
};
pub use system::{
    minted_symbol, parse_laws, parse_rational, parse_system, parse_template, SystemError,
    SystemSpec,
};
