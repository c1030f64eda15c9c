use std::fs;
use std::path::Path;

use super::Raster;
use crate::error::{ensure, Error, Result};

/// Binary P6 bytes: `P6\n<w> <h>\n255\n` then the RGB triples.
pub fn encode_ppm(raster: &Raster) -> Result<Vec<u8>> {
    encode_ppm_annotated(raster, &[])
}

/// Like [`encode_ppm`] with `# comment` lines after the magic number.
pub fn encode_ppm_annotated(raster: &Raster, comments: &[String]) -> Result<Vec<u8>> {
    ensure(comments.iter().all(|c| !c.contains('\n')), || "PPM comments must be single lines".into())?;
    ensure(raster.width > 0 && raster.height > 0, || "cannot encode an empty raster".into())?;
    ensure(raster.pixels.len() == raster.width * raster.height, || {
        format!(
            "raster holds {} pixels, expected {}x{}",
            raster.pixels.len(),
            raster.width,
            raster.height
        )
    })?;
    let mut out = b"P6\n".to_vec();
    for c in comments {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    out.extend_from_slice(format!("{} {}\n255\n", raster.width, raster.height).as_bytes());
    out.reserve(3 * raster.pixels.len());
    for p in &raster.pixels {
        out.extend_from_slice(p);
    }
    Ok(out)
}

pub fn write_ppm(raster: &Raster, path: &Path) -> Result<()> {
    let bytes = encode_ppm(raster)?;
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_ppm(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    // four whitespace-separated header tokens, then exactly one whitespace byte
    let mut fields = Vec::with_capacity(4);
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad("non-ascii header"))?);
    }
    if fields[0] != "P6" {
        return Err(bad("not a binary PPM (P6)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("only 8-bit PPM is supported"));
    }
    let data = bytes.get(i + 1..).ok_or_else(|| bad("missing pixel data"))?;
    if width == 0 || height == 0 || data.len() != 3 * width * height {
        return Err(bad("pixel data does not match the header size"));
    }
    Ok(Raster {
        width,
        height,
        pixels: data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
    })
}
