//! Binary grid format.
//!
//! Little-endian: magic `HPTN`, `u32` version, `u32` width, `u32` height,
//! `f64` fill, then `width * height` `f64` values in row-major order.

use alloc::vec::Vec;

use super::grid::RasterGrid;
use crate::{Error, Result};

pub const TENSOR_MAGIC: [u8; 4] = *b"HPTN";
pub const TENSOR_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

pub fn encode_grid(grid: &RasterGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.values().len());
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    out.extend_from_slice(&grid.fill().to_le_bytes());
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_grid(bytes: &[u8]) -> Result<RasterGrid> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Tensor("truncated header".into()));
    }
    if bytes[..4] != TENSOR_MAGIC {
        return Err(Error::Tensor("bad magic".into()));
    }
    let version = u32_at(bytes, 4);
    if version != TENSOR_VERSION {
        return Err(Error::Tensor(alloc::format!(
            "unsupported version {version}"
        )));
    }
    let width = u32_at(bytes, 8) as usize;
    let height = u32_at(bytes, 12) as usize;
    let fill = f64_at(bytes, 16);
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Tensor("dimension overflow".into()))?;
    if bytes.len() != HEADER_LEN + 8 * count {
        return Err(Error::Tensor(alloc::format!(
            "expected {} payload bytes, found {}",
            8 * count,
            bytes.len() - HEADER_LEN
        )));
    }
    let values = (0..count)
        .map(|k| f64_at(bytes, HEADER_LEN + 8 * k))
        .collect();
    RasterGrid::new(width, height, values, fill)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip(w in 1usize..12, h in 1usize..12, seed in any::<u64>(), fill in any::<f64>()) {
            let grid = RasterGrid::from_fn(w, h, fill, |x, y| {
                f64::from_bits(seed.wrapping_mul(x as u64 + 1).wrapping_add(y as u64) | 1)
            }).unwrap();
            let back = decode_grid(&encode_grid(&grid)).unwrap();
            prop_assert_eq!(back.width(), w);
            prop_assert_eq!(back.fill().to_bits(), fill.to_bits());
            for (a, b) in grid.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_corruption() {
        let grid = RasterGrid::filled(3, 2, 1.0, 2.0).unwrap();
        let bytes = encode_grid(&grid);
        assert!(decode_grid(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_grid(&bad).is_err());
        let mut bad = bytes;
        bad[4] = 9;
        assert!(decode_grid(&bad).is_err());
    }
}
