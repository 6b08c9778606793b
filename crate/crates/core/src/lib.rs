pub mod analysis;
pub mod engine;
pub mod frontend;
pub mod ir;
pub mod lifting;
pub mod provenance;
pub mod store;
pub mod term;
pub mod pipeline;
pub mod select;
