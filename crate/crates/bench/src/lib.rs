pub use qwk_core;
