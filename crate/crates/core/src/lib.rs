pub mod balls;
pub mod error;
pub mod generators;
pub mod holes;
pub mod io;
mod line;
pub mod msdist;
pub mod muckenhoupt;
pub mod pipeline;
pub mod porosity;
pub mod report;
pub mod space;
pub mod whitney;
