pub mod ablate;
pub mod library;
pub mod optimize;
pub mod score;
pub mod search;
