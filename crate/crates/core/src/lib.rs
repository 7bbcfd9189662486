//! Core of the flashcard ethics game: marker vision, the question-bank
//! session engine, and the event-sourced progress store.

pub mod emotion;
pub mod classroom;
pub mod game;
pub mod progress;
pub mod sim;
pub mod vision;

pub use emotion::{CardId, Emotion};
