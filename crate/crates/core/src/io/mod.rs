//! File formats and run configuration.

pub mod config;
pub mod expr;
pub mod fshape_file;
pub mod table;

pub use config::{RunConfig, SurfaceSpec};
pub use expr::Expr;
pub use fshape_file::{load_fshape, save_fshape, FShapeFile};
pub use table::{format_csv, save_csv, Cell};
