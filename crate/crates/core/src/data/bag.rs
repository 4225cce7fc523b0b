//! Feature-bag file format (little-endian):
//!
//! ```text
//! magic       8 bytes  "DYHGBAG" followed by the ASCII version digit ("DYHGBAG1")
//! id_len      u32, then id_len bytes of UTF-8 id
//! N           u32      patch count
//! d           u32      feature dimension
//! label       u32
//! has_coords  u8       0 or 1
//! coords      N × (row i32, col i32)        only when has_coords = 1
//! features    N × d f32, row-major
//! ```

use std::path::Path;

use crate::binio::{read_file, write_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC_PREFIX: &[u8; 7] = b"DYHGBAG";
pub const BAG_VERSION: u32 = 1;

/// One slide's patch embeddings and its label.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBag {
    pub id: String,
    /// N×d patch embeddings.
    pub features: Matrix<f32>,
    pub label: usize,
    /// Optional `(row, col)` grid position of each patch.
    pub coords: Option<Vec<(i32, i32)>>,
}

impl FeatureBag {
    pub fn num_patches(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if let Some(c) = &self.coords {
            if c.len() != self.num_patches() {
                return Err(Error::Data(format!(
                    "bag {}: {} coords for {} patches",
                    self.id,
                    c.len(),
                    self.num_patches()
                )));
            }
        }
        let mut w = Writer::new();
        w.bytes(MAGIC_PREFIX);
        w.u8(b'0' + BAG_VERSION as u8);
        w.len_u32(self.id.len())?;
        w.bytes(self.id.as_bytes());
        w.len_u32(self.num_patches())?;
        w.len_u32(self.dim())?;
        w.len_u32(self.label)?;
        match &self.coords {
            Some(coords) => {
                w.u8(1);
                for &(r, c) in coords {
                    w.i32(r);
                    w.i32(c);
                }
            }
            None => w.u8(0),
        }
        for &v in self.features.as_slice() {
            w.f32(v);
        }
        Ok(w.finish())
    }

    pub fn decode(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(path, bytes);
        let magic = r.take(8, "magic").map_err(|e| match e {
            // Too short to even hold a magic: report what is there.
            Error::Truncated { .. } if !bytes.starts_with(&MAGIC_PREFIX[..bytes.len().min(7)]) => Error::BadMagic {
                path: path.to_path_buf(),
                expected: "DYHGBAG1".into(),
                found: String::from_utf8_lossy(bytes).into_owned(),
            },
            other => other,
        })?;
        if &magic[..7] != MAGIC_PREFIX {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: "DYHGBAG1".into(),
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        let version = magic[7].wrapping_sub(b'0') as u32;
        if version != BAG_VERSION {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                expected: BAG_VERSION,
                found: version,
            });
        }
        let id = r.string("id")?;
        let n = r.u32("N")? as usize;
        let d = r.u32("d")? as usize;
        let label = r.u32("label")? as usize;
        let coords = match r.u8("has_coords")? {
            0 => None,
            1 => {
                let mut c = Vec::with_capacity(n.min(bytes.len() / 8));
                for _ in 0..n {
                    c.push((r.i32("coords")?, r.i32("coords")?));
                }
                Some(c)
            }
            other => return Err(r.corrupt(format!("has_coords flag {other}"))),
        };
        let count = n
            .checked_mul(d)
            .ok_or_else(|| r.corrupt(format!("N={n} d={d} overflows")))?;
        let data = r.f32_vec(count, "features")?;
        r.expect_end()?;
        Ok(Self {
            id,
            features: Matrix::from_vec(n, d, data)?,
            label,
            coords,
        })
    }
}

pub fn write_bag(path: &Path, bag: &FeatureBag) -> Result<()> {
    write_file(path, &bag.encode()?)
}

pub fn read_bag(path: &Path) -> Result<FeatureBag> {
    FeatureBag::decode(path, &read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn bag(coords: bool) -> FeatureBag {
        let mut rng = Rng::seed_from(3);
        FeatureBag {
            id: "slide-α".into(),
            features: rng.normal_matrix(5, 3, 1.0),
            label: 2,
            coords: coords.then(|| (0..5).map(|i| (i / 2, -(i % 2))).collect()),
        }
    }

    #[test]
    fn round_trip_with_and_without_coords() {
        for with in [false, true] {
            let b = bag(with);
            let bytes = b.encode().unwrap();
            let back = FeatureBag::decode(Path::new("x"), &bytes).unwrap();
            assert_eq!(back, b);
            assert_eq!(back.encode().unwrap(), bytes);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/b.bag");
        let b = bag(true);
        write_bag(&path, &b).unwrap();
        assert_eq!(read_bag(&path).unwrap(), b);
    }

    #[test]
    fn truncation_is_an_error() {
        let bytes = bag(true).encode().unwrap();
        for cut in [9, 20, bytes.len() - 1] {
            assert!(matches!(
                FeatureBag::decode(Path::new("t"), &bytes[..cut]),
                Err(Error::Truncated { .. })
            ));
        }
    }

    #[test]
    fn bad_magic_and_version() {
        assert!(matches!(
            FeatureBag::decode(Path::new("m"), b"XXXX"),
            Err(Error::BadMagic { .. })
        ));
        let mut bytes = bag(false).encode().unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            FeatureBag::decode(Path::new("m"), &bytes),
            Err(Error::BadMagic { .. })
        ));
        let mut bytes = bag(false).encode().unwrap();
        bytes[7] = b'2';
        assert!(matches!(
            FeatureBag::decode(Path::new("v"), &bytes),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_bag(Path::new("/nonexistent/none.bag")),
            Err(Error::Io { .. })
        ));
    }
}
