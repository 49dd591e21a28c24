//! Pool checkpoints: the core parameter container with a JSON header that
//! records the pool configuration and every network's layer sizes.

use std::fs;
use std::path::Path;

use fercoh_core::model::{CnnSpec, ModelPool, PoolConfig};
use fercoh_core::tensor::checkpoint;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const KIND: &str = "fercoh-pool";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolHeader {
    kind: String,
    pool: PoolConfig,
    specs: Vec<CnnSpec>,
}

pub fn encode_pool(pool: &ModelPool) -> Result<Vec<u8>> {
    let header = PoolHeader {
        kind: KIND.into(),
        pool: pool.config,
        specs: pool.networks().iter().map(|n| n.spec.clone()).collect(),
    };
    let header = serde_json::to_string(&header).expect("plain header");
    let params: Vec<_> = pool.all_params().cloned().collect();
    Ok(checkpoint::encode(&header, &params)?)
}

pub fn decode_pool(bytes: &[u8]) -> Result<ModelPool> {
    let ck = checkpoint::decode(bytes)?;
    let header: PoolHeader = serde_json::from_str(&ck.header)
        .map_err(|e| CliError::Data(format!("checkpoint header: {e}")))?;
    if header.kind != KIND {
        return Err(CliError::Data(format!("checkpoint holds {:?}, not a model pool", header.kind)));
    }
    if header.specs != header.pool.specs() {
        return Err(CliError::Data("checkpoint layer sizes disagree with its pool configuration".into()));
    }
    ModelPool::from_params(header.pool, ck.params).map_err(|e| CliError::Data(format!("checkpoint: {e}")))
}

pub fn save_pool(path: &Path, pool: &ModelPool) -> Result<()> {
    fs::write(path, encode_pool(pool)?).map_err(|e| CliError::io(path, e))
}

pub fn load_pool(path: &Path) -> Result<ModelPool> {
    decode_pool(&fs::read(path).map_err(|e| CliError::io(path, e))?)
}
