//! Snapshot and trajectory persistence: a small little-endian binary format
//! for velocity fields, CSV coefficient dumps, and SHA-256 digests for the
//! run manifest.

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, SpectralField};
use crate::trajectory::SGrid;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const FIELD_MAGIC: &[u8; 4] = b"DFL1";
const TRAJ_MAGIC: &[u8; 4] = b"DFT1";

fn write_f64(w: &mut impl Write, x: f64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn write_field_body(w: &mut impl Write, u: &SpectralField) -> Result<()> {
    for c in u.ux.iter().chain(u.uy.iter()) {
        write_f64(w, c.re)?;
        write_f64(w, c.im)?;
    }
    Ok(())
}

fn read_field_body(r: &mut impl Read, grid: GridSpec) -> Result<SpectralField> {
    let n = grid.resolution();
    let mut u = SpectralField::zeros(grid);
    for c in u.ux.iter_mut().take(n * n) {
        *c = Complex64::new(read_f64(r)?, read_f64(r)?);
    }
    for c in u.uy.iter_mut().take(n * n) {
        *c = Complex64::new(read_f64(r)?, read_f64(r)?);
    }
    u.validate()?;
    Ok(u)
}

fn write_grid(w: &mut impl Write, grid: &GridSpec) -> Result<()> {
    w.write_all(&(grid.resolution() as u32).to_le_bytes())?;
    write_f64(w, grid.box_length())?;
    write_f64(w, grid.dealias_fraction())?;
    Ok(())
}

fn read_grid(r: &mut impl Read) -> Result<GridSpec> {
    let res = read_u32(r)? as usize;
    let l = read_f64(r)?;
    let frac = read_f64(r)?;
    GridSpec::new(res, l, frac)
}

fn check_magic(r: &mut impl Read, magic: &[u8; 4], what: &str) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Format(format!(
            "not a {what} file (magic {:?})",
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

/// Writes a single velocity field snapshot.
pub fn write_field(path: &Path, u: &SpectralField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FIELD_MAGIC)?;
    write_grid(&mut w, u.grid())?;
    write_field_body(&mut w, u)?;
    w.flush()?;
    Ok(())
}

/// Reads a snapshot back; the field is re-validated (finite, divergence-free,
/// zero mean).
pub fn read_field(path: &Path) -> Result<SpectralField> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, FIELD_MAGIC, "field snapshot")?;
    let grid = read_grid(&mut r)?;
    read_field_body(&mut r, grid)
}

/// Writes nodewise states along an s-grid.
pub fn write_trajectory(path: &Path, sgrid: &SGrid, values: &[SpectralField]) -> Result<()> {
    if values.len() != sgrid.node_count() {
        return Err(Error::SGridMismatch(format!(
            "{} states for {} nodes",
            values.len(),
            sgrid.node_count()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TRAJ_MAGIC)?;
    match *sgrid {
        SGrid::Periodic { period, ds } => {
            w.write_all(&[0u8])?;
            write_f64(&mut w, period)?;
            write_f64(&mut w, ds)?;
            write_f64(&mut w, 0.0)?;
            write_f64(&mut w, 0.0)?;
        }
        SGrid::Windowed {
            s_lo,
            s_hi,
            ds,
            burn_in,
        } => {
            w.write_all(&[1u8])?;
            write_f64(&mut w, s_lo)?;
            write_f64(&mut w, s_hi)?;
            write_f64(&mut w, ds)?;
            write_f64(&mut w, burn_in)?;
        }
    }
    write_grid(&mut w, values[0].grid())?;
    for u in values {
        write_field_body(&mut w, u)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a trajectory file.
pub fn read_trajectory(path: &Path) -> Result<(SGrid, Vec<SpectralField>)> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, TRAJ_MAGIC, "trajectory")?;
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let (a, b, c, d) = (
        read_f64(&mut r)?,
        read_f64(&mut r)?,
        read_f64(&mut r)?,
        read_f64(&mut r)?,
    );
    let sgrid = match kind[0] {
        0 => SGrid::periodic(a, b)?,
        1 => SGrid::windowed(a, b, c, d)?,
        k => return Err(Error::Format(format!("unknown s-grid kind {k}"))),
    };
    let grid = read_grid(&mut r)?;
    let mut values = Vec::with_capacity(sgrid.node_count());
    for _ in 0..sgrid.node_count() {
        values.push(read_field_body(&mut r, grid)?);
    }
    Ok((sgrid, values))
}

/// Full-precision CSV dump of the coefficients inside the dealiasing radius.
pub fn coefficients_csv(u: &SpectralField) -> String {
    let mut out = String::from("k1,k2,ux_re,ux_im,uy_re,uy_im\n");
    let m = u.grid().dealias_max();
    for (k1, k2, idx) in u.modes() {
        if k1 * k1 + k2 * k2 > m * m {
            continue;
        }
        let (x, y) = (u.ux[idx], u.uy[idx]);
        out.push_str(&format!(
            "{k1},{k2},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            x.re, x.im, y.re, y.im
        ));
    }
    out
}

/// Hex SHA-256 of a file's contents.
pub fn file_digest(path: &Path) -> Result<String> {
    let mut r = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random_divfree_field;

    fn grid() -> GridSpec {
        GridSpec::standard(16, 2.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn field_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.dfl");
        let u = random_divfree_field(3, 1.5, grid(), None);
        write_field(&p, &u).unwrap();
        assert_eq!(read_field(&p).unwrap(), u);
        // digest is stable across rewrites
        let d1 = file_digest(&p).unwrap();
        write_field(&p, &u).unwrap();
        assert_eq!(file_digest(&p).unwrap(), d1);
    }

    #[test]
    fn trajectory_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.dft");
        let base = random_divfree_field(4, 1.5, grid(), None);
        for sg in [
            SGrid::periodic(1.0, 0.25).unwrap(),
            SGrid::windowed(0.0, 1.0, 0.25, 0.5).unwrap(),
        ] {
            let vals: Vec<_> = (0..sg.node_count())
                .map(|i| base.scaled(1.0 + i as f64))
                .collect();
            write_trajectory(&p, &sg, &vals).unwrap();
            let (sg2, vals2) = read_trajectory(&p).unwrap();
            sg.same_as(&sg2).unwrap();
            assert_eq!(vals, vals2);
        }
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        std::fs::write(&p, b"NOPEnope").unwrap();
        assert!(read_field(&p).is_err());
        assert!(read_trajectory(&p).is_err());
    }

    #[test]
    fn coefficient_csv_shape() {
        let u = crate::spectral::kolmogorov_force(grid(), 0, 2, 1.0);
        let csv = coefficients_csv(&u);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "k1,k2,ux_re,ux_im,uy_re,uy_im");
        // every listed mode is inside the dealiasing radius
        let m = u.grid().dealias_max();
        for l in &lines[1..] {
            let mut it = l.split(',');
            let k1: i64 = it.next().unwrap().parse().unwrap();
            let k2: i64 = it.next().unwrap().parse().unwrap();
            assert!(k1 * k1 + k2 * k2 <= m * m);
        }
    }
}
