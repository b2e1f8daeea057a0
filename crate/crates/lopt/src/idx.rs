//! IDX files as distributed for MNIST and Fashion-MNIST: big-endian magic,
//! big-endian `u32` extents, raw `u8` payload.

use std::path::Path;

use lopt_core::tasks::{Dataset, Provenance};

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdxError {
    #[error("bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
}

/// Parsed IDX payload: extents and raw bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Idx {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn be_u32(bytes: &[u8], at: usize) -> std::result::Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            needed: at + 4,
            have: bytes.len(),
        })
}

/// Parses an in-memory IDX file with `ndims` extents after the magic.
pub fn parse_idx(bytes: &[u8], magic: u32, ndims: usize) -> std::result::Result<Idx, IdxError> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(IdxError::BadMagic { expected: magic, found });
    }
    let dims = (0..ndims)
        .map(|k| be_u32(bytes, 4 + 4 * k).map(|d| d as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let header = 4 + 4 * ndims;
    let needed = header + dims.iter().product::<usize>();
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            needed,
            have: bytes.len(),
        });
    }
    Ok(Idx {
        dims,
        data: bytes[header..needed].to_vec(),
    })
}

/// Image/label pair to a dataset with pixels scaled to `[0, 1]`.
pub fn dataset_from_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let img = parse_idx(images, IMAGES_MAGIC, 3)?;
    let lbl = parse_idx(labels, LABELS_MAGIC, 1)?;
    if img.dims[0] != lbl.dims[0] {
        return Err(IdxError::CountMismatch {
            images: img.dims[0],
            labels: lbl.dims[0],
        }
        .into());
    }
    let pixels = img.data.iter().map(|&b| b as f32 / 255.0).collect();
    let labels = lbl.data.iter().map(|&b| b as u32).collect();
    Ok(Dataset::new(
        pixels,
        vec![img.dims[1], img.dims[2]],
        Some(labels),
        Provenance::IdxFile,
    )?)
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let i = std::fs::read(images).map_err(Error::io(images))?;
    let l = std::fs::read(labels).map_err(Error::io(labels))?;
    dataset_from_idx(&i, &l)
}

/// Serializes an IDX file; the inverse of [`parse_idx`].
pub fn encode_idx(magic: u32, dims: &[usize], data: &[u8]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(n: usize) -> Vec<u8> {
        encode_idx(
            IMAGES_MAGIC,
            &[n, 2, 3],
            &(0..n * 6).map(|i| (i * 17 % 256) as u8).collect::<Vec<_>>(),
        )
    }

    #[test]
    fn round_trip_and_scaling() {
        let labels = encode_idx(LABELS_MAGIC, &[4], &[0, 9, 3, 9]);
        let ds = dataset_from_idx(&images(4), &labels).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.feature_dims(), &[2, 3]);
        assert_eq!(ds.labels().unwrap(), &[0, 9, 3, 9]);
        assert_eq!(ds.num_classes(), Some(10));
        assert_eq!(ds.example(1)[0], (6 * 17) as f32 / 255.0);
        assert!(ds.examples().iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(ds.provenance(), Provenance::IdxFile);
    }

    #[test]
    fn distinct_errors() {
        let labels = encode_idx(LABELS_MAGIC, &[4], &[0, 1, 2, 3]);
        let bad = encode_idx(0x0000_0999, &[4, 2, 3], &[0; 24]);
        let err = dataset_from_idx(&bad, &labels).unwrap_err();
        assert!(matches!(err, Error::Idx(IdxError::BadMagic { found: 0x999, .. })));
        assert!(err.to_string().contains("bad magic"));

        let mut short = images(4);
        short.truncate(short.len() - 1);
        assert!(matches!(
            dataset_from_idx(&short, &labels),
            Err(Error::Idx(IdxError::Truncated { .. }))
        ));
        assert!(matches!(
            parse_idx(&[0, 0, 8], IMAGES_MAGIC, 3),
            Err(IdxError::Truncated { needed: 4, have: 3 })
        ));

        assert!(matches!(
            dataset_from_idx(&images(5), &labels),
            Err(Error::Idx(IdxError::CountMismatch { images: 5, labels: 4 }))
        ));
    }
}
