//! Natural-language PDE tasks to trained physics-informed networks: the
//! provider backends, file formats, agents and pipeline driver around
//! `pinnforge-core`.

pub mod bench;
pub mod config;
pub mod formats;
pub mod history;
pub mod localize;
pub mod pde_agent;
pub mod pipeline;
pub mod provider;
