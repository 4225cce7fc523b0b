//! Checkpoint file format (all integers and floats little-endian):
//!
//! ```text
//! magic            8 bytes  "DYHGCKPT"
//! version          u32      1
//! d                u32
//! hyperedges       u32
//! hidden           u32
//! classes          u32
//! leaky_slope      f64
//! temperature      f64
//! variant          u8       0 full, 1 no_gumbel, 2 no_gumbel_no_temp, 3 no_sampling
//! eval_noise       u8       0 or 1
//! tensor_count     u32      5
//! per tensor:
//!   name_len u32, name (UTF-8), rows u32, cols u32, rows*cols f32 row-major
//! ```
//!
//! Tensors are stored in the order W1, V, U, w, W. Only parameter values are
//! saved; gradients and optimizer moments are not.

use std::path::Path;

use crate::binio::{read_file, write_file, Reader, Writer};
use crate::dhcm::{DhcmConfig, Variant};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, TENSOR_NAMES};
use crate::numerics::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DYHGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode(cfg: &ModelConfig, params: &ModelParams<f32>) -> Result<Vec<u8>> {
    let mut w = Writer::new();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.len_u32(cfg.d)?;
    w.len_u32(cfg.num_hyperedges())?;
    w.len_u32(cfg.hidden)?;
    w.len_u32(cfg.classes)?;
    w.f64(cfg.leaky_slope);
    w.f64(cfg.dhcm.temperature);
    w.u8(cfg.dhcm.variant.code());
    w.u8(cfg.dhcm.eval_noise as u8);
    w.len_u32(TENSOR_NAMES.len())?;
    for (name, p) in TENSOR_NAMES.iter().zip(params.tensors()) {
        w.len_u32(name.len())?;
        w.bytes(name.as_bytes());
        w.len_u32(p.value.rows())?;
        w.len_u32(p.value.cols())?;
        for &v in p.value.as_slice() {
            w.f32(v);
        }
    }
    Ok(w.finish())
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<(ModelConfig, ModelParams<f32>)> {
    let mut r = Reader::new(path, bytes);
    let magic = r.take(8, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: String::from_utf8_lossy(CHECKPOINT_MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let d = r.u32("d")? as usize;
    let hyperedges = r.u32("hyperedges")? as usize;
    let hidden = r.u32("hidden")? as usize;
    let classes = r.u32("classes")? as usize;
    let leaky_slope = r.f64("leaky_slope")?;
    let temperature = r.f64("temperature")?;
    let code = r.u8("variant")?;
    let variant = Variant::from_code(code).ok_or_else(|| r.corrupt(format!("unknown variant code {code}")))?;
    let eval_noise = match r.u8("eval_noise")? {
        0 => false,
        1 => true,
        other => return Err(r.corrupt(format!("eval_noise flag {other}"))),
    };
    let cfg = ModelConfig {
        d,
        hidden,
        classes,
        leaky_slope,
        dhcm: DhcmConfig {
            num_hyperedges: hyperedges,
            temperature,
            variant,
            eval_noise,
        },
    };
    cfg.validate().map_err(|e| r.corrupt(format!("invalid config: {e}")))?;

    let count = r.u32("tensor_count")? as usize;
    if count != TENSOR_NAMES.len() {
        return Err(r.corrupt(format!("expected {} tensors, found {count}", TENSOR_NAMES.len())));
    }
    let shapes = ModelParams::<f32>::expected_shapes(&cfg);
    let mut values = Vec::with_capacity(count);
    for (name, (rows, cols)) in TENSOR_NAMES.iter().zip(shapes) {
        let found = r.string("tensor name")?;
        if found != *name {
            return Err(r.corrupt(format!("expected tensor {name}, found {found}")));
        }
        let (fr, fc) = (r.u32("rows")? as usize, r.u32("cols")? as usize);
        if (fr, fc) != (rows, cols) {
            return Err(r.corrupt(format!("tensor {name} is {fr}x{fc}, config implies {rows}x{cols}")));
        }
        let data = r.f32_vec(rows * cols, name)?;
        values.push(Matrix::from_vec(rows, cols, data)?);
    }
    r.expect_end()?;
    let values: [Matrix<f32>; 5] = values.try_into().expect("five tensors");
    Ok((cfg, ModelParams::from_values(values)))
}

pub fn save(path: &Path, cfg: &ModelConfig, params: &ModelParams<f32>) -> Result<()> {
    write_file(path, &encode(cfg, params)?)
}

pub fn load(path: &Path) -> Result<(ModelConfig, ModelParams<f32>)> {
    decode(path, &read_file(path)?)
}
