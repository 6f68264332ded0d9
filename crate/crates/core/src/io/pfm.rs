//! Portable float map (grayscale `Pf` variant only).

use super::IoError;
use crate::depth_map::DepthMap;

/// Encodes a depth map as little-endian `Pf` with rows stored bottom-to-top.
/// Values are narrowed to `f32`.
pub fn write_pfm(map: &DepthMap) -> Vec<u8> {
    let header = format!("Pf\n{} {}\n-1.0\n", map.width(), map.height());
    let mut out = Vec::with_capacity(header.len() + 4 * map.len());
    out.extend_from_slice(header.as_bytes());
    for y in (0..map.height()).rev() {
        for x in 0..map.width() {
            out.extend_from_slice(&(map.get(x, y) as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(bytes: &[u8]) -> Result<DepthMap, IoError> {
    let mut cursor = 0usize;
    let magic = next_token(bytes, &mut cursor).ok_or_else(|| malformed("missing magic"))?;
    match magic {
        b"Pf" => {}
        b"PF" => return Err(IoError::PfmColor),
        other => {
            return Err(malformed(&format!("bad magic {:?}", String::from_utf8_lossy(other))));
        }
    }
    let width = parse_token::<usize>(bytes, &mut cursor, "width")?;
    let height = parse_token::<usize>(bytes, &mut cursor, "height")?;
    let scale = parse_token::<f64>(bytes, &mut cursor, "scale")?;
    if width == 0 || height == 0 {
        return Err(malformed("zero dimension"));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(malformed("scale must be a non-zero number"));
    }
    // exactly one whitespace byte separates the header from the payload
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        return Err(malformed("missing separator after scale"));
    }
    cursor += 1;
    let little_endian = scale < 0.0;
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| malformed("dimensions overflow"))?;
    let payload = &bytes[cursor..];
    if payload.len() < needed {
        return Err(IoError::PfmTruncated { expected: needed, actual: payload.len() });
    }
    let mut values = vec![0.0f64; width * height];
    for (i, chunk) in payload[..needed].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let row_from_bottom = i / width;
        let x = i % width;
        values[(height - 1 - row_from_bottom) * width + x] = v as f64;
    }
    Ok(DepthMap::new(width, height, values).expect("size checked above"))
}

fn malformed(msg: &str) -> IoError {
    IoError::PfmHeader(msg.to_string())
}

fn next_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Option<&'a [u8]> {
    while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    (start < *cursor).then(|| &bytes[start..*cursor])
}

fn parse_token<T: std::str::FromStr>(
    bytes: &[u8],
    cursor: &mut usize,
    what: &str,
) -> Result<T, IoError> {
    let tok = next_token(bytes, cursor).ok_or_else(|| malformed(&format!("missing {what}")))?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(&format!("unparsable {what}")))
}
