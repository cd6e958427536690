//! Binary checkpoint container. All integers and floats are little-endian.
//!
//! ```text
//! offset  field
//! 0       magic  b"VSDNCKP1"                 8 bytes
//! 8       config length L                    u32
//! 12      config, TOML text (UTF-8)          L bytes
//!         optimizer step count               u64
//!         RNG state: master seed             u64
//!         RNG state: next epoch index        u64
//!         number of parameter blocks N       u32
//! N times:
//!         name length M                      u32
//!         name (UTF-8)                       M bytes
//!         rows R, cols C                     u32, u32
//!         values                             R*C f64, row-major
//!         Adam first moment                  R*C f64
//!         Adam second moment                 R*C f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::autodiff::{ParamBlock, ParamStore};
use crate::error::{Error, Result};
use crate::model::Vsdn;
use crate::train::Config;

pub const MAGIC: &[u8; 8] = b"VSDNCKP1";

/// A saved model with its configuration and optimizer state.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: Config,
    pub store: ParamStore,
    pub seed: u64,
    pub epoch: u64,
}

impl Checkpoint {
    pub fn from_model(config: &Config, model: &Vsdn, epoch: u64) -> Self {
        Checkpoint { config: config.clone(), store: model.store().clone(), seed: config.train.seed, epoch }
    }

    /// Rebuilds the model described by the stored configuration and loads
    /// the stored parameters into it.
    pub fn to_model(&self) -> Result<Vsdn> {
        let mut model = Vsdn::new(self.config.model.clone(), self.seed)?;
        model.load_store(self.store.clone())?;
        Ok(model)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        let cfg = self.config.to_toml();
        w.write_all(&(cfg.len() as u32).to_le_bytes())?;
        w.write_all(cfg.as_bytes())?;
        w.write_all(&self.store.step_count().to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.epoch.to_le_bytes())?;
        w.write_all(&(self.store.len() as u32).to_le_bytes())?;
        for (_, b) in self.store.iter() {
            w.write_all(&(b.name.len() as u32).to_le_bytes())?;
            w.write_all(b.name.as_bytes())?;
            w.write_all(&(b.value.nrows() as u32).to_le_bytes())?;
            w.write_all(&(b.value.ncols() as u32).to_le_bytes())?;
            for arr in [&b.value, &b.adam_m, &b.adam_v] {
                for v in arr.iter() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        w.flush()
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let len = read_u32(r)? as usize;
        let mut cfg = vec![0u8; len];
        read_exact(r, &mut cfg)?;
        let cfg = String::from_utf8(cfg).map_err(|_| Error::Checkpoint("config is not UTF-8".into()))?;
        let config = Config::from_toml(&cfg)?;
        let steps = read_u64(r)?;
        let seed = read_u64(r)?;
        let epoch = read_u64(r)?;
        let n = read_u32(r)?;
        let mut store = ParamStore::new();
        for _ in 0..n {
            let len = read_u32(r)? as usize;
            let mut name = vec![0u8; len];
            read_exact(r, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("block name is not UTF-8".into()))?;
            let rows = read_u32(r)? as usize;
            let cols = read_u32(r)? as usize;
            let mut arrays = Vec::with_capacity(3);
            for _ in 0..3 {
                let mut vals = Vec::with_capacity(rows * cols);
                for _ in 0..rows * cols {
                    vals.push(read_f64(r)?);
                }
                arrays.push(Array2::from_shape_vec((rows, cols), vals).unwrap());
            }
            let adam_v = arrays.pop().unwrap();
            let adam_m = arrays.pop().unwrap();
            let value = arrays.pop().unwrap();
            if store.id(&name).is_some() {
                return Err(Error::Checkpoint(format!("duplicate block `{name}`")));
            }
            store.push_block(ParamBlock { name, value, adam_m, adam_v });
        }
        store.set_step_count(steps);
        Ok(Checkpoint { config, store, seed, epoch })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut std::io::BufReader::new(file))
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VsdnConfig;

    #[test]
    fn round_trip_preserves_everything() {
        let config = Config { model: VsdnConfig { d1: 3, d_h: 4, mlp_hidden: 6, ..VsdnConfig::default() }, ..Config::default() };
        let mut model = Vsdn::new(config.model.clone(), 5).unwrap();
        model.store_mut().set_step_count(17);
        let ckpt = Checkpoint::from_model(&config, &model, 4);
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.config, config);
        assert_eq!(back.epoch, 4);
        assert_eq!(back.store.step_count(), 17);
        let rebuilt = back.to_model().unwrap();
        assert_eq!(rebuilt.store().flatten(), model.store().flatten());
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(matches!(Checkpoint::read_from(&mut &b"NOTACKPT"[..]), Err(Error::Checkpoint(_))));
        assert!(matches!(Checkpoint::read_from(&mut &MAGIC[..]), Err(Error::Checkpoint(_))));
    }
}
