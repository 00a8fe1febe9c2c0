//! Tagged container for dumping and reloading parsed programs.

use serde::{Deserialize, Serialize};

use crate::source::SourceProgram;
use crate::syntax::Program;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "language", content = "program", rename_all = "lowercase")]
pub enum Ast {
    Core(Program),
    Source(SourceProgram),
}
