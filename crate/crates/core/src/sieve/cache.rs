//! On-disk block cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic       4 bytes   "CHLB"
//! version     u32       1
//! lo          u64
//! hi          u64
//! omega       len bytes, Ω(n) for n = lo..hi
//! lpf         len × u64, P⁺(n)
//! squarefree  ceil(len/64) × u64, bit i (LSB first) set iff lo+i is squarefree
//! liouville   ceil(len/64) × u64, bit i set iff λ(lo+i) = -1
//! ```
//!
//! Unused high bits of the last word of each bit array are zero.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use super::{sieve_block_capped, Bits, FactorBlock, PrimeTable, SieveError};

pub const CACHE_MAGIC: &[u8; 4] = b"CHLB";
pub const CACHE_VERSION: u32 = 1;

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn write_bits(w: &mut impl Write, bits: &Bits, len: usize) -> io::Result<()> {
    let words = len.div_ceil(64);
    let raw = bits.as_raw_slice();
    for (k, word) in raw.iter().take(words).enumerate() {
        let mut v = *word;
        let used = len - k * 64;
        if used < 64 {
            v &= (1u64 << used) - 1;
        }
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_bits(r: &mut impl Read, len: usize) -> io::Result<Bits> {
    let words = len.div_ceil(64);
    let mut raw = Vec::with_capacity(words);
    for _ in 0..words {
        raw.push(read_u64(r)?);
    }
    let mut bits = Bits::from_vec(raw);
    bits.truncate(len);
    Ok(bits)
}

/// Serialise a block in the cache format.
pub fn write_block(w: &mut impl Write, block: &FactorBlock) -> io::Result<()> {
    let len = block.len();
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&block.lo().to_le_bytes())?;
    w.write_all(&block.hi().to_le_bytes())?;
    w.write_all(block.omega_slice())?;
    for v in block.lpf_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    write_bits(w, &block.squarefree_bits().to_bitvec(), len)?;
    write_bits(w, &block.liouville_bits().to_bitvec(), len)?;
    Ok(())
}

/// Parse a block written by [`write_block`].
pub fn read_block(r: &mut impl Read) -> io::Result<FactorBlock> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(invalid("bad magic"));
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver)?;
    let version = u32::from_le_bytes(ver);
    if version != CACHE_VERSION {
        return Err(invalid(format!("unsupported cache version {version}")));
    }
    let lo = read_u64(r)?;
    let hi = read_u64(r)?;
    if lo < 1 || hi <= lo || hi - lo > (1 << 32) {
        return Err(invalid(format!("bad range [{lo}, {hi})")));
    }
    let len = (hi - lo) as usize;
    let mut omega = vec![0u8; len];
    r.read_exact(&mut omega)?;
    let mut lpf = Vec::with_capacity(len);
    for _ in 0..len {
        lpf.push(read_u64(r)?);
    }
    let squarefree = read_bits(r, len)?;
    let liouville = read_bits(r, len)?;
    Ok(FactorBlock::from_parts(lo, hi, omega, lpf, squarefree, liouville))
}

/// Directory of cached blocks, one file per `[lo, hi)`.
#[derive(Clone, Debug)]
pub struct BlockCache {
    dir: PathBuf,
}

impl BlockCache {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn path_for(&self, lo: u64, hi: u64) -> PathBuf {
        self.dir.join(format!("block_{lo}_{hi}.chlb"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Load `[lo, hi)` from disk, or sieve and store it.
    pub fn load_or_sieve(
        &self,
        lo: u64,
        hi: u64,
        base: &PrimeTable,
        cap: u64,
    ) -> Result<FactorBlock, CacheError> {
        let path = self.path_for(lo, hi);
        if path.exists() {
            let mut f = io::BufReader::new(fs::File::open(&path)?);
            let block = read_block(&mut f)?;
            if block.lo() == lo && block.hi() == hi {
                return Ok(block);
            }
            log::warn!("cache file {} has mismatched range, re-sieving", path.display());
        }
        let block = sieve_block_capped(lo, hi, base, cap)?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = io::BufWriter::new(fs::File::create(&tmp)?);
            write_block(&mut f, &block)?;
            f.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(block)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Sieve(#[from] SieveError),
}
