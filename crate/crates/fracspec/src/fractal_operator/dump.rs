//! Binary matrix dumps.
//!
//! Layout: the magic bytes `FRACSPEC`, a little-endian `u32` format version,
//! a little-endian `u64` header length, the JSON header, then the matrix in
//! row-major order as `(re, im)` pairs of little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Assembly, DiscretizedOperator, OperatorMatrix, SpaceDesc};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FRACSPEC";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    nrows: usize,
    ncols: usize,
    domain: SpaceDesc,
    codomain: SpaceDesc,
    assembly: Assembly,
    crate_version: String,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Writes `op` to `path`.
pub fn write_dump(op: &DiscretizedOperator, path: &Path) -> Result<()> {
    let header = Header {
        nrows: op.matrix().nrows(),
        ncols: op.matrix().ncols(),
        domain: op.domain().clone(),
        codomain: op.codomain().clone(),
        assembly: op.assembly().clone(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Config(e.to_string()))?;
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let mut write = |bytes: &[u8]| out.write_all(bytes).map_err(io_err(path));
    write(MAGIC)?;
    write(&VERSION.to_le_bytes())?;
    write(&(json.len() as u64).to_le_bytes())?;
    write(&json)?;
    for i in 0..header.nrows {
        for j in 0..header.ncols {
            let v = op.matrix().get(i, j);
            write(&v.re.to_le_bytes())?;
            write(&v.im.to_le_bytes())?;
        }
    }
    out.flush().map_err(io_err(path))
}

/// Reads a dump written by [`write_dump`].
pub fn read_dump(path: &Path) -> Result<DiscretizedOperator> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut input = BufReader::new(file);
    let mut read = |buf: &mut [u8]| input.read_exact(buf).map_err(io_err(path));
    let mut magic = [0u8; 8];
    read(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config(format!("{} is not a matrix dump", path.display())));
    }
    let mut word = [0u8; 4];
    read(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Config(format!("unsupported dump version {version}")));
    }
    let mut len = [0u8; 8];
    read(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    read(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| Error::Config(format!("dump header: {e}")))?;
    let mut data = vec![0u8; header.nrows * header.ncols * 16];
    read(&mut data)?;
    let value = |i: usize, j: usize| {
        let at = (i * header.ncols + j) * 16;
        let re = f64::from_le_bytes(data[at..at + 8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(data[at + 8..at + 16].try_into().expect("8 bytes"));
        Complex64::new(re, im)
    };
    let mat = Mat::from_fn(header.nrows, header.ncols, value);
    let matrix = OperatorMatrix::Complex(mat).compact(0.0);
    DiscretizedOperator::new(matrix, header.domain, header.codomain, header.assembly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mat = Mat::from_fn(3, 2, |i, j| Complex64::new(i as f64 - 0.25 * j as f64, (i * j) as f64 / 7.0));
        let mut op = DiscretizedOperator::from_matrix(OperatorMatrix::Complex(mat));
        op.assembly_mut().warnings.push("note".into());
        let dir = std::env::temp_dir().join(format!("fracspec-dump-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("op.bin");
        write_dump(&op, &path).unwrap();
        let back = read_dump(&path).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(back.matrix().get(i, j), op.matrix().get(i, j));
            }
        }
        assert_eq!(back.assembly(), op.assembly());
        assert_eq!(back.domain(), op.domain());
        std::fs::write(&path, b"NOTADUMP").unwrap();
        assert!(matches!(read_dump(&path), Err(Error::Config(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
