//! DPTB binary tables.
//!
//! Little-endian. Each record is
//! `"DPTB" | version u32 | M u32 | n u64 | x0 f64 | h f64 | B u32 | payload`,
//! where the payload is the blocked coefficient array
//! `[interval][block][coefficient][lane]` as f64. A file holds one record per
//! neighbor species, back to back.

use std::fs;
use std::path::Path;

use crate::compress::CompressionTable;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DPTB";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 8 + 4;

pub fn encode_table(table: &CompressionTable, out: &mut Vec<u8>) {
    out.reserve(HEADER_LEN + 8 * table.raw_coefficients().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(table.outputs() as u32).to_le_bytes());
    out.extend_from_slice(&(table.n_intervals() as u64).to_le_bytes());
    out.extend_from_slice(&table.x0().to_le_bytes());
    out.extend_from_slice(&table.h().to_le_bytes());
    out.extend_from_slice(&(table.block() as u32).to_le_bytes());
    for c in table.raw_coefficients() {
        out.extend_from_slice(&c.to_le_bytes());
    }
}

pub fn encode_tables(tables: &[CompressionTable]) -> Vec<u8> {
    let mut out = Vec::new();
    for t in tables {
        encode_table(t, &mut out);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("table file truncated at byte {} (needed {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_tables(bytes: &[u8]) -> Result<Vec<CompressionTable>> {
    let mut r = Reader { bytes, pos: 0 };
    let mut tables = Vec::new();
    while r.pos < bytes.len() {
        let start = r.pos;
        if r.take(4)? != MAGIC {
            return Err(Error::Format(format!("missing DPTB magic at byte {start}")));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported DPTB version {version}")));
        }
        let m = r.u32()? as usize;
        let n = usize::try_from(r.u64()?).map_err(|_| Error::Format("interval count overflows".into()))?;
        let x0 = r.f64()?;
        let h = r.f64()?;
        let block = r.u32()? as usize;
        let count = n
            .checked_mul(m.div_ceil(block.max(1)))
            .and_then(|v| v.checked_mul(6 * block))
            .ok_or_else(|| Error::Format("table payload size overflows".into()))?;
        let payload = r.take(count.checked_mul(8).ok_or_else(|| Error::Format("payload too large".into()))?)?;
        let coeffs = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        tables.push(CompressionTable::from_parts(x0, h, n, m, block, coeffs)?);
    }
    if tables.is_empty() {
        return Err(Error::Format("table file is empty".into()));
    }
    Ok(tables)
}

pub fn write_tables(path: impl AsRef<Path>, tables: &[CompressionTable]) -> Result<()> {
    fs::write(path, encode_tables(tables))?;
    Ok(())
}

pub fn read_tables(path: impl AsRef<Path>) -> Result<Vec<CompressionTable>> {
    decode_tables(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::build_table_blocked;
    use crate::nn::EmbeddingNet;

    fn table(block: usize) -> CompressionTable {
        build_table_blocked(&EmbeddingNet::zeros(3), 0.0, 1.0, 0.25, block).unwrap()
    }

    #[test]
    fn header_layout() {
        let t = table(16);
        let bytes = encode_tables(std::slice::from_ref(&t));
        assert_eq!(&bytes[..4], b"DPTB");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 12);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 0.0);
        assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), 0.25);
        assert_eq!(u32::from_le_bytes(bytes[36..40].try_into().unwrap()), 16);
        // 4 intervals, one 16-lane block, 6 coefficients
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 4 * 16 * 6);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let tables = vec![table(16), table(5)];
        let bytes = encode_tables(&tables);
        let back = decode_tables(&bytes).unwrap();
        assert_eq!(back, tables);
        assert_eq!(encode_tables(&back), bytes);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let bytes = encode_tables(&[table(16)]);
        assert!(decode_tables(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_tables(&bad).is_err());
        assert!(decode_tables(&[]).is_err());
    }
}
