pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;
pub mod acceptance;
