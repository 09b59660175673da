//! PACF feature files.
//!
//! ```text
//! "PACF" | version u32 = 1 | count u64 | dim u32 | labeled u8
//! count × ( [label i32 if labeled] | dim × f32 )
//! ```
//!
//! Everything is little-endian. Unlabeled rows carry no label field at all.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"PACF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 21;

#[derive(Debug, Error)]
pub enum PacfError {
    #[error("bad magic {0:?}, expected \"PACF\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("labeled flag must be 0 or 1, found {0}")]
    BadLabelFlag(u8),
    #[error("file holds {got} bytes but the header promises {expected}")]
    TruncatedFile { expected: u64, got: u64 },
    #[error("{got} bytes follow the last of the declared records")]
    TrailingBytes { got: u64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("{labels} labels for {rows} rows")]
    LabelCount { rows: usize, labels: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub dim: usize,
    pub features: Vec<Vec<f32>>,
    pub labels: Option<Vec<i32>>,
}

impl FeatureFile {
    /// Builds a file from rows, checking every row has `dim` components.
    pub fn new(dim: usize, features: Vec<Vec<f32>>, labels: Option<Vec<i32>>) -> Result<Self, PacfError> {
        if let Some(bad) = features.iter().find(|r| r.len() != dim) {
            return Err(PacfError::DimMismatch { expected: dim, got: bad.len() });
        }
        if let Some(l) = &labels {
            if l.len() != features.len() {
                return Err(PacfError::LabelCount { rows: features.len(), labels: l.len() });
            }
        }
        Ok(Self { dim, features, labels })
    }

    /// Narrows `f64` rows to the on-disk precision.
    pub fn from_f64(dim: usize, rows: &[Vec<f64>], labels: Option<Vec<i32>>) -> Result<Self, PacfError> {
        let features = rows.iter().map(|r| r.iter().map(|&x| x as f32).collect()).collect();
        Self::new(dim, features, labels)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        self.features.iter().map(|r| r.iter().map(|&x| f64::from(x)).collect()).collect()
    }

    fn record_len(dim: usize, labeled: bool) -> u64 {
        4 * (labeled as u64) + 4 * dim as u64
    }

    pub fn encode(&self) -> Vec<u8> {
        let labeled = self.labels.is_some();
        let total = HEADER_LEN as u64 + self.len() as u64 * Self::record_len(self.dim, labeled);
        let mut out = Vec::with_capacity(total as usize);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(labeled as u8);
        for (i, row) in self.features.iter().enumerate() {
            if let Some(labels) = &self.labels {
                out.extend_from_slice(&labels[i].to_le_bytes());
            }
            for x in row {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PacfError> {
        if bytes.len() < HEADER_LEN {
            if bytes.len() >= 4 && bytes[..4] != MAGIC {
                return Err(PacfError::BadMagic(bytes[..4].try_into().unwrap()));
            }
            return Err(PacfError::TruncatedFile { expected: HEADER_LEN as u64, got: bytes.len() as u64 });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(PacfError::BadMagic(magic));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(PacfError::BadVersion(version));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let labeled = match bytes[20] {
            0 => false,
            1 => true,
            other => return Err(PacfError::BadLabelFlag(other)),
        };

        let record = Self::record_len(dim, labeled);
        let expected = count
            .checked_mul(record)
            .and_then(|b| b.checked_add(HEADER_LEN as u64))
            .unwrap_or(u64::MAX);
        let got = bytes.len() as u64;
        if got < expected {
            return Err(PacfError::TruncatedFile { expected, got });
        }
        if got > expected {
            return Err(PacfError::TrailingBytes { got: got - expected });
        }

        let mut features = Vec::with_capacity(count as usize);
        let mut labels = labeled.then(|| Vec::with_capacity(count as usize));
        let mut pos = HEADER_LEN;
        let take4 = |pos: &mut usize| -> [u8; 4] {
            let b = bytes[*pos..*pos + 4].try_into().unwrap();
            *pos += 4;
            b
        };
        for _ in 0..count {
            if let Some(l) = labels.as_mut() {
                l.push(i32::from_le_bytes(take4(&mut pos)));
            }
            features.push((0..dim).map(|_| f32::from_le_bytes(take4(&mut pos))).collect());
        }
        Ok(Self { dim, features, labels })
    }
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureFile, PacfError> {
    FeatureFile::decode(&fs::read(path)?)
}

pub fn write_feature_file(path: impl AsRef<Path>, file: &FeatureFile) -> Result<(), PacfError> {
    fs::write(path, file.encode())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(labeled: bool) -> FeatureFile {
        let features = vec![vec![1.0, -0.5, 0.25], vec![0.0, 3.5, -1e-7]];
        FeatureFile::new(3, features, labeled.then(|| vec![4, -1])).unwrap()
    }

    #[test]
    fn layout_is_exact() {
        let bytes = sample(true).encode();
        assert_eq!(bytes.len(), 21 + 2 * (4 + 12));
        assert_eq!(&bytes[..4], b"PACF");
        assert_eq!(bytes[4..8], 1u32.to_le_bytes());
        assert_eq!(bytes[8..16], 2u64.to_le_bytes());
        assert_eq!(bytes[16..20], 3u32.to_le_bytes());
        assert_eq!(bytes[20], 1);
        assert_eq!(bytes[21..25], 4i32.to_le_bytes());
        assert_eq!(bytes[25..29], 1.0f32.to_le_bytes());
        assert_eq!(sample(false).encode().len(), 21 + 2 * 12);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = sample(false).encode();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(FeatureFile::decode(&bytes), Err(PacfError::BadMagic(m)) if &m == b"XXXX"));
    }

    #[test]
    fn bad_version() {
        let mut bytes = sample(false).encode();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(FeatureFile::decode(&bytes), Err(PacfError::BadVersion(2))));
    }

    #[test]
    fn truncated_and_trailing() {
        let rows = vec![vec![0.5f32; 4]; 10];
        let bytes = FeatureFile::new(4, rows, None).unwrap().encode();
        // header says 10 records, only 9 present
        let short = &bytes[..bytes.len() - 16];
        assert!(matches!(
            FeatureFile::decode(short),
            Err(PacfError::TruncatedFile { expected: 181, got: 165 })
        ));
        assert!(matches!(FeatureFile::decode(&bytes[..7]), Err(PacfError::TruncatedFile { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(FeatureFile::decode(&long), Err(PacfError::TrailingBytes { got: 1 })));
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = FeatureFile::new(3, vec![vec![0.0; 3], vec![0.0; 2]], None).unwrap_err();
        assert!(matches!(err, PacfError::DimMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn empty_file_round_trips() {
        let f = FeatureFile::new(5, vec![], None).unwrap();
        assert_eq!(FeatureFile::decode(&f.encode()).unwrap(), f);
    }

    proptest! {
        #[test]
        fn round_trip_is_byte_exact(
            dim in 1usize..6,
            rows in prop::collection::vec(prop::collection::vec(any::<f32>().prop_filter("nan", |x| !x.is_nan()), 6), 0..12),
            labeled in any::<bool>(),
        ) {
            let features: Vec<Vec<f32>> = rows.into_iter().map(|r| r[..dim].to_vec()).collect();
            let labels = labeled.then(|| (0..features.len() as i32).collect());
            let f = FeatureFile::new(dim, features, labels).unwrap();
            let bytes = f.encode();
            let back = FeatureFile::decode(&bytes).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(back.encode(), bytes);
        }
    }
}
