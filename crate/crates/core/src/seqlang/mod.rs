//! `.ionseq` pulse-sequence language.
//!
//! ```text
//! experiment ramsey {
//!   kind ramsey_fringe
//!   prep S(-1/2) axial thermal 0
//!   pulse carrier pi/2
//!   wait 100us
//!   pulse carrier pi/2
//!   measure
//!   scan detuning -20kHz..20kHz step 250Hz
//!   shots 100
//!   trigger line delay 3ms
//! }
//! ```
//!
//! `;` may separate clauses and `#` starts a comment.

mod ast;
mod lexer;
mod number;
mod parser;
mod print;
mod validate;

use std::fmt;

pub use ast::*;
pub use lexer::{tokenize, Token, TokenKind};
pub use number::{Decimal, Number};
pub use parser::{parse, parse_str};
pub use print::pretty_print;
pub use validate::{validate, validate_block, Compiled, Warning};

/// Parse or validation error with its source position (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SeqError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        Self { line: pos.line, col: pos.col, message: message.into() }
    }
}

impl fmt::Display for SeqError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for SeqError {}
