//! The implicit calculus λ⇒: type-directed resolution, elaboration to
//! System F, a direct interpreter, and a small source language on top.

pub mod ast;
pub mod checks;
pub mod elaborate;
pub mod error;
pub mod interp;
pub mod parse;
pub mod print;
pub mod source;
pub mod subst;
pub mod syntax;
pub mod systemf;
pub mod testing;
pub mod typecheck;
pub mod unify;

pub use subst::TypeSubst;
pub use syntax::{canonical_cmp, Context, Expr, Interface, Name, PrimOp, Program, RuleType, Type};
