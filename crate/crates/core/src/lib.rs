pub mod cipher;
pub mod template;
pub mod keys;
pub mod instance;
pub mod evaluation;
pub mod stats;
pub mod dataset;
