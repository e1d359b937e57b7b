//! Binary matrix dump.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! u64 rows
//! u64 cols
//! f64 * rows * cols        column-major
//! u64 label_count          0, or cols
//! label_count times:
//!     u64 word_len
//!     u8 * word_len        UTF-8
//!     u64 sense_a          original id
//!     u64 sense_b          original id
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use crate::diffmat::PairLabel;
use crate::error::{Error, Result};

pub fn write_matrix_to<W: Write>(w: &mut W, m: &DMatrix<f64>, labels: &[PairLabel]) -> Result<()> {
    if !labels.is_empty() && labels.len() != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} columns",
            labels.len(),
            m.ncols()
        )));
    }
    w.write_u64::<LittleEndian>(m.nrows() as u64)?;
    w.write_u64::<LittleEndian>(m.ncols() as u64)?;
    for &v in m.as_slice() {
        w.write_f64::<LittleEndian>(v)?;
    }
    w.write_u64::<LittleEndian>(labels.len() as u64)?;
    for l in labels {
        w.write_u64::<LittleEndian>(l.word.len() as u64)?;
        w.write_all(l.word.as_bytes())?;
        w.write_u64::<LittleEndian>(l.sense_a)?;
        w.write_u64::<LittleEndian>(l.sense_b)?;
    }
    Ok(())
}

pub fn read_matrix_from<R: Read>(r: &mut R) -> Result<(DMatrix<f64>, Vec<PairLabel>)> {
    let rows = r.read_u64::<LittleEndian>()? as usize;
    let cols = r.read_u64::<LittleEndian>()? as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(0, "matrix dimensions overflow"))?;
    let mut data = vec![0.0; len];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    let n_labels = r.read_u64::<LittleEndian>()? as usize;
    if n_labels != 0 && n_labels != cols {
        return Err(Error::format(0, format!("{n_labels} labels for {cols} columns")));
    }
    let mut labels = Vec::with_capacity(n_labels);
    for _ in 0..n_labels {
        let n = r.read_u64::<LittleEndian>()? as usize;
        let mut bytes = vec![0u8; n];
        r.read_exact(&mut bytes)?;
        let word = String::from_utf8(bytes).map_err(|_| Error::format(0, "label is not UTF-8"))?;
        let sense_a = r.read_u64::<LittleEndian>()?;
        let sense_b = r.read_u64::<LittleEndian>()?;
        labels.push(PairLabel {
            word,
            sense_a,
            sense_b,
        });
    }
    Ok((DMatrix::from_vec(rows, cols, data), labels))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>, labels: &[PairLabel]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(Error::at(path))?);
    write_matrix_to(&mut w, m, labels)?;
    w.flush().map_err(Error::at(path))?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<(DMatrix<f64>, Vec<PairLabel>)> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(Error::at(path))?);
    read_matrix_from(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_little_endian_column_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut buf = Vec::new();
        write_matrix_to(&mut buf, &m, &[]).unwrap();
        assert_eq!(&buf[0..8], &2u64.to_le_bytes());
        assert_eq!(&buf[8..16], &2u64.to_le_bytes());
        // first stored value is (0,0), second is (1,0)
        assert_eq!(&buf[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&buf[24..32], &3.0f64.to_le_bytes());
        assert_eq!(buf.len(), 16 + 32 + 8);
    }

    #[test]
    fn labels_round_trip() {
        let m = DMatrix::from_column_slice(1, 2, &[0.5, -0.5]);
        let labels = vec![
            PairLabel::new("naïve", 0, 6),
            PairLabel::new("naïve", 6, 0),
        ];
        let mut buf = Vec::new();
        write_matrix_to(&mut buf, &m, &labels).unwrap();
        let (back, back_labels) = read_matrix_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back_labels, labels);
    }

    #[test]
    fn label_count_must_match() {
        let m = DMatrix::<f64>::zeros(1, 2);
        let mut buf = Vec::new();
        assert!(write_matrix_to(&mut buf, &m, &[PairLabel::new("a", 0, 1)]).is_err());
    }

    #[test]
    fn truncated_input_is_error() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let mut buf = Vec::new();
        write_matrix_to(&mut buf, &m, &[]).unwrap();
        buf.truncate(40);
        assert!(read_matrix_from(&mut buf.as_slice()).is_err());
    }
}
