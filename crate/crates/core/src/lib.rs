//! Composition of security protocol models.
//!
//! Protocols are described by participant models carrying preconditions,
//! effects, type declarations, generated terms and a chain of sent and
//! received messages. Two protocols compose when one's effects satisfy the
//! other's preconditions without destroying confidentiality, and when no
//! encrypted message of one can be replayed into the other. The replay check
//! works on a type-level abstraction of messages and is cross-checked by a
//! bounded Dolev-Yao search.

pub mod canonical;
pub mod corpus;
pub mod dsl;
pub mod engine;
pub mod model;
pub mod oracle;
pub mod pe;
pub mod term;
