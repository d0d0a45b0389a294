//! HGT1 raster format.
//!
//! ```text
//! HGT1
//! width W
//! height H
//! gsd G
//! origin X Y
//! bands name1 name2 ...
//! end
//! <band 1: H·W f32 LE, row-major, row 0 = max y> <band 2> ...
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Georef, HeightGrid};

pub fn encode_grid(grid: &HeightGrid) -> Vec<u8> {
    let g = &grid.georef;
    let mut out = Vec::with_capacity(64 + grid.bands.len() * g.len() * 4);
    let names: Vec<&str> = grid.bands.iter().map(|(n, _)| n.as_str()).collect();
    let _ = write!(
        out,
        "HGT1\nwidth {}\nheight {}\ngsd {}\norigin {} {}\nbands {}\nend\n",
        g.width,
        g.height,
        g.gsd,
        g.origin_x,
        g.origin_y,
        names.join(" ")
    );
    for (_, values) in &grid.bands {
        for v in values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn parse_grid(path: &Path, bytes: &[u8]) -> Result<HeightGrid> {
    let mut pos = 0usize;
    let mut lineno = 0usize;
    let mut width = None;
    let mut height = None;
    let mut gsd = None;
    let mut origin = None;
    let mut names: Option<Vec<String>> = None;
    let perr = |line, msg: String| Error::parse(path, Some(line), msg);
    loop {
        lineno += 1;
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| perr(lineno, "missing `end` line".into()))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| perr(lineno, "header is not UTF-8".into()))?
            .trim_end_matches('\r');
        pos += end + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| perr(lineno, format!("bad number {s:?}")))
        };
        let count = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| perr(lineno, format!("bad count {s:?}")))
        };
        if lineno == 1 {
            if line != "HGT1" {
                return Err(perr(1, format!("expected magic HGT1, found {line:?}")));
            }
            continue;
        }
        match toks.as_slice() {
            ["width", w] => width = Some(count(w)?),
            ["height", h] => height = Some(count(h)?),
            ["gsd", g] => gsd = Some(num(g)?),
            ["origin", x, y] => origin = Some((num(x)?, num(y)?)),
            ["bands", rest @ ..] if !rest.is_empty() => {
                names = Some(rest.iter().map(|s| s.to_string()).collect())
            }
            ["end"] => break,
            _ => return Err(perr(lineno, format!("malformed header line {line:?}"))),
        }
    }
    let missing = |what: &str| perr(lineno, format!("header lacks `{what}`"));
    let (w, h) = (width.ok_or_else(|| missing("width"))?, height.ok_or_else(|| missing("height"))?);
    let gsd = gsd.ok_or_else(|| missing("gsd"))?;
    let (ox, oy) = origin.ok_or_else(|| missing("origin"))?;
    let names = names.ok_or_else(|| missing("bands"))?;
    let georef = Georef::new(ox, oy, gsd, w, h).map_err(|e| perr(lineno, e.to_string()))?;
    if names.len() > 4 {
        return Err(perr(lineno, format!("{} bands, at most 4 allowed", names.len())));
    }
    let payload = &bytes[pos..];
    let expected = names.len() * georef.len() * 4;
    if payload.len() != expected {
        return Err(Error::parse(
            path,
            None,
            format!("payload size mismatch: expected {expected} bytes, got {}", payload.len()),
        ));
    }
    let mut bands = Vec::with_capacity(names.len());
    for (k, name) in names.into_iter().enumerate() {
        let chunk = &payload[k * georef.len() * 4..(k + 1) * georef.len() * 4];
        let values = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        bands.push((name, values));
    }
    Ok(HeightGrid { georef, bands })
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<HeightGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_grid(path, &bytes)
}

pub fn write_grid(grid: &HeightGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_grid(grid)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.hgt")
    }

    #[test]
    fn one_cell() {
        let g = Georef::new(0.0, 0.0, 1.0, 1, 1).unwrap();
        let grid = HeightGrid::filled(g, &["height"], 5.0).unwrap();
        let bytes = encode_grid(&grid);
        let header = "HGT1\nwidth 1\nheight 1\ngsd 1\norigin 0 0\nbands height\nend\n";
        assert_eq!(bytes.len(), header.len() + 4);
        assert_eq!(&bytes[..header.len()], header.as_bytes());
        assert_eq!(parse_grid(p(), &bytes).unwrap().band("height").unwrap(), &[5.0]);
    }

    #[test]
    fn random_roundtrip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Georef::new(123.25, -77.5, 0.5, 64, 64).unwrap();
        let mut grid = HeightGrid::new(g, &["height", "red"]).unwrap();
        for (_, band) in grid.bands.iter_mut() {
            for v in band.iter_mut() {
                *v = if rng.gen_bool(0.05) { f64::NAN } else { (rng.gen::<f32>() * 100.0) as f64 };
            }
        }
        let bytes = encode_grid(&grid);
        let back = parse_grid(p(), &bytes).unwrap();
        assert_eq!(back.georef, grid.georef);
        for ((na, a), (nb, b)) in grid.bands.iter().zip(&back.bands) {
            assert_eq!(na, nb);
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(encode_grid(&back), bytes);
    }

    #[test]
    fn band_count_mismatch() {
        let mut bytes = b"HGT1\nwidth 2\nheight 2\ngsd 1\norigin 0 0\nbands height red\nend\n".to_vec();
        bytes.extend_from_slice(&[0u8; 16]);
        let err = parse_grid(p(), &bytes).unwrap_err().to_string();
        assert!(err.contains("expected 32 bytes, got 16"), "{err}");
    }

    #[test]
    fn missing_end() {
        let text = "HGT1\nwidth 1\nheight 1\ngsd 1\norigin 0 0\nbands height\n";
        assert!(matches!(parse_grid(p(), text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn truncation_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Georef::new(1.0, 2.0, 0.25, 7, 5).unwrap();
        let grid = HeightGrid::filled(g, &["height", "nir"], 2.5).unwrap();
        let bytes = encode_grid(&grid);
        for _ in 0..100 {
            let cut = rng.gen_range(0..bytes.len());
            assert!(parse_grid(p(), &bytes[..cut]).is_err(), "accepted truncation at {cut}");
        }
    }
}
