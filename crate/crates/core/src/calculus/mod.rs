//! Chart-local symbolic calculus.

pub mod expr;
pub mod fields;
pub mod parse;

pub use expr::{
    arena_len, dag_size_many, eval, expr_by_id, Bindings, DomainError, DomainKind, Evaluator,
    Func, ScalarExpr, Symbol,
};
pub use fields::{
    christoffel, covariant, d_form_apply, exterior_d, fd_crosscheck, lie_bracket,
    lie_derivative_metric, symbolic_inverse, Chart, ChartError, LightlikeStructure, MetricField,
    OneForm, StructureResiduals, VectorField,
};
pub use parse::{parse_expr, ParseError};
