//! Core of an interactive retrieval evaluation server: the evaluation model,
//! task lifecycle, relevance judgement, scoring and the event log.

pub mod clock;
pub mod collection;
pub mod ids;
pub mod judgement;
pub mod lifecycle;
pub mod model;
pub mod persistence;
pub mod scoring;

#[cfg(any(test, feature = "test-fixtures"))]
pub mod testutil;
