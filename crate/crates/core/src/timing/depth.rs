use std::sync::Arc;

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Circuit depth, in reconfigurable columns, of an `M`-mode layer.
pub trait DepthModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn depth(&self, modes: usize) -> Result<usize>;
}

pub type DepthModelFactory = fn() -> Arc<dyn DepthModel>;

pub const DEFAULT_DEPTH_MODEL: &str = "fitted";

pub fn depth_models() -> Registry<DepthModelFactory> {
    Registry::<DepthModelFactory>::new("depth model")
        .with("fitted", || Arc::new(Fitted))
        .with("mesh", || Arc::new(MeshColumns))
}

pub fn depth_model(name: &str) -> Result<Arc<dyn DepthModel>> {
    Ok((depth_models().get(name)?)())
}

fn check(modes: usize) -> Result<()> {
    if modes < 2 {
        return Err(Error::Argument(format!(
            "circuit depth needs >= 2 modes, got {modes}"
        )));
    }
    Ok(())
}

/// `8M - 7`, through the reference points (9, 65) and (17, 129).
pub struct Fitted;

impl DepthModel for Fitted {
    fn name(&self) -> &'static str {
        "fitted"
    }

    fn depth(&self, modes: usize) -> Result<usize> {
        check(modes)?;
        Ok(8 * modes - 7)
    }
}

/// Two rectangular meshes of `M` columns around one phase column.
pub struct MeshColumns;

impl DepthModel for MeshColumns {
    fn name(&self) -> &'static str {
        "mesh"
    }

    fn depth(&self, modes: usize) -> Result<usize> {
        check(modes)?;
        Ok(2 * modes + 1)
    }
}
