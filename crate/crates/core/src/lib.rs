//! Case-based reasoning toolkit for FinQA-style numerical programs: the
//! program language and its executor, equivalence checking, program-score
//! similarity and gold-case mining, retrieval indexes, corpus handling and
//! evaluation metrics.

pub mod corpus;
pub mod dsl;
pub mod equivalence;
pub mod executor;
pub mod metrics;
pub mod retrieval;
pub mod similarity;
pub mod synth;

pub use corpus::{CaseRecord, CaseRepository, FieldMap};
pub use dsl::{parse_program, OpCode, Operand, ParseError, Program, Step};
pub use executor::{answers_match, execute, ExecError, ExecResult, TableData, Tolerance};
pub use similarity::{program_score, ProgramScore, ScoreWeights};
