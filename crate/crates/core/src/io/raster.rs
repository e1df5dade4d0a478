//! Binary PGM (P5) class rasters and PFM float rasters.

use super::ParseError;
use crate::raster::ProbabilityMap;
use crate::scalar::Scalar;

/// Reads whitespace-separated header tokens, skipping `#` comments. Returns
/// the tokens and the offset just past the single whitespace byte that ends
/// the header.
fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize), ParseError> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        if i >= bytes.len() {
            return Err(ParseError::at_byte(i, "header ends early"));
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(ParseError::at_byte(
            i,
            "header must end with one whitespace byte",
        ));
    }
    Ok((tokens, i + 1))
}

fn dim(tok: &str, offset: usize) -> Result<usize, ParseError> {
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(ParseError::at_byte(
            offset,
            format!("invalid dimension '{tok}'"),
        )),
    }
}

pub fn write_pgm(width: usize, height: usize, cells: &[u8]) -> Vec<u8> {
    assert_eq!(
        cells.len(),
        width * height,
        "cell count must match dimensions"
    );
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(cells);
    out
}

/// Parses a binary graymap with maxval 255. Trailing bytes are an error.
pub fn read_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), ParseError> {
    let (t, data_start) = header_tokens(bytes, 4)?;
    if t[0] != "P5" {
        return Err(ParseError::at_byte(
            0,
            format!("expected magic P5, found '{}'", t[0]),
        ));
    }
    let (w, h) = (dim(&t[1], 2)?, dim(&t[2], 2)?);
    if t[3] != "255" {
        return Err(ParseError::at_byte(
            0,
            format!("maxval must be 255, found '{}'", t[3]),
        ));
    }
    let n = w
        .checked_mul(h)
        .ok_or_else(|| ParseError::at_byte(2, "dimensions overflow"))?;
    let data = &bytes[data_start..];
    if data.len() < n {
        return Err(ParseError::at_byte(
            bytes.len(),
            format!("expected {n} data bytes, found {}", data.len()),
        ));
    }
    if data.len() > n {
        return Err(ParseError::at_byte(
            data_start + n,
            format!("{} trailing bytes", data.len() - n),
        ));
    }
    Ok((w, h, data.to_vec()))
}

/// Grayscale PFM, little-endian (scale -1.0). PFM stores rows bottom to top.
pub fn write_pfm<S: Scalar>(map: &ProbabilityMap<S>) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for row in (0..h).rev() {
        for v in &map.values()[row * w..(row + 1) * w] {
            out.extend_from_slice(&(v.f64() as f32).to_le_bytes());
        }
    }
    out
}

/// Reads a grayscale PFM into row-major, top-to-bottom order. Values are
/// renormalized after the f32 round trip.
pub fn read_pfm(bytes: &[u8]) -> Result<ProbabilityMap<f64>, ParseError> {
    let (t, data_start) = header_tokens(bytes, 4)?;
    if t[0] != "Pf" {
        return Err(ParseError::at_byte(
            0,
            format!("expected magic Pf, found '{}'", t[0]),
        ));
    }
    let (w, h) = (dim(&t[1], 2)?, dim(&t[2], 2)?);
    let scale: f64 = t[3]
        .parse()
        .map_err(|_| ParseError::at_byte(0, format!("invalid scale '{}'", t[3])))?;
    let little = scale < 0.0;
    let n = w * h;
    let data = &bytes[data_start..];
    if data.len() != 4 * n {
        return Err(ParseError::at_byte(
            data_start + data.len().min(4 * n),
            format!("expected {} data bytes, found {}", 4 * n, data.len()),
        ));
    }
    let mut values = vec![0.0f64; n];
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let b: [u8; 4] = chunk.try_into().expect("4 bytes");
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (file_row, col) = (i / w, i % w);
        values[(h - 1 - file_row) * w + col] = v as f64;
    }
    ProbabilityMap::from_weights(w, h, values)
        .map_err(|e| ParseError::at_byte(data_start, e.to_string()))
}
