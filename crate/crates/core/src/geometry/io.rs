//! On-disk mask video formats: the MVB1 binary container and a P5 PGM
//! frame directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::mask::{MaskFrame, MaskVideo};
use super::GeometryError;

const MVB1_MAGIC: &[u8; 4] = b"MVB1";

#[derive(Debug, Error)]
pub enum VideoIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes, expected MVB1")]
    BadMagic,
    #[error("byte {0} is not a valid mask value (0 or 1)")]
    BadValue(u8),
    #[error("file truncated: expected {expected} mask bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("invalid video: {0}")]
    Geometry(#[from] GeometryError),
}

/// Writes the MVB1 container: magic, u32 LE T/H/W, then T*H*W bytes (0 or 1),
/// frame-major, row-major.
pub fn save_mvb1(video: &MaskVideo, path: &Path) -> Result<(), VideoIoError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MVB1_MAGIC)?;
    out.write_all(&(video.len() as u32).to_le_bytes())?;
    out.write_all(&video.height().to_le_bytes())?;
    out.write_all(&video.width().to_le_bytes())?;
    for frame in video.frames() {
        out.write_all(frame.bits())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_mvb1(path: &Path) -> Result<MaskVideo, VideoIoError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MVB1_MAGIC {
        return Err(VideoIoError::BadMagic);
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let t = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let h = u32::from_le_bytes(word);
    input.read_exact(&mut word)?;
    let w = u32::from_le_bytes(word);

    let expected = t * (h as usize) * (w as usize);
    let mut bytes = Vec::with_capacity(expected);
    input.read_to_end(&mut bytes)?;
    if bytes.len() != expected {
        return Err(VideoIoError::Truncated { expected, found: bytes.len() });
    }
    if let Some(&bad) = bytes.iter().find(|&&b| b > 1) {
        return Err(VideoIoError::BadValue(bad));
    }
    let frame_len = (h as usize) * (w as usize);
    let frames = bytes
        .chunks_exact(frame_len)
        .map(|chunk| MaskFrame::from_bits(w, h, chunk))
        .collect();
    Ok(MaskVideo::new(frames)?)
}

/// Writes `frame_0000.pgm` ... (binary P5, maxval 255, foreground = 255) and
/// a `manifest.txt` holding `T H W` on one line.
pub fn save_pgm_dir(video: &MaskVideo, dir: &Path) -> Result<(), VideoIoError> {
    fs::create_dir_all(dir)?;
    for (i, frame) in video.frames().iter().enumerate() {
        let mut out = BufWriter::new(File::create(dir.join(format!("frame_{i:04}.pgm")))?);
        write!(out, "P5\n{} {}\n255\n", frame.width(), frame.height())?;
        let pixels: Vec<u8> = frame.bits().iter().map(|&b| if b != 0 { 255 } else { 0 }).collect();
        out.write_all(&pixels)?;
    }
    fs::write(
        dir.join("manifest.txt"),
        format!("{} {} {}\n", video.len(), video.height(), video.width()),
    )?;
    Ok(())
}

pub fn load_pgm_dir(dir: &Path) -> Result<MaskVideo, VideoIoError> {
    let manifest = fs::read_to_string(dir.join("manifest.txt"))
        .map_err(|e| VideoIoError::MalformedManifest(format!("manifest.txt: {e}")))?;
    let mut it = manifest.split_whitespace();
    let parse = |s: Option<&str>| -> Result<u32, VideoIoError> {
        s.ok_or_else(|| VideoIoError::MalformedManifest("expected `T H W`".into()))?
            .parse()
            .map_err(|e| VideoIoError::MalformedManifest(format!("bad integer: {e}")))
    };
    let t = parse(it.next())?;
    let h = parse(it.next())?;
    let w = parse(it.next())?;

    let mut frames = Vec::with_capacity(t as usize);
    for i in 0..t {
        let path = dir.join(format!("frame_{i:04}.pgm"));
        let bytes = fs::read(&path)?;
        let frame = parse_pgm(&bytes)
            .map_err(|e| VideoIoError::MalformedManifest(format!("{}: {e}", path.display())))?;
        if frame.width() != w || frame.height() != h {
            return Err(VideoIoError::InconsistentDimensions(format!(
                "{}: {}x{} vs manifest {}x{}",
                path.display(),
                frame.width(),
                frame.height(),
                w,
                h
            )));
        }
        frames.push(frame);
    }
    Ok(MaskVideo::new(frames)?)
}

fn parse_pgm(bytes: &[u8]) -> Result<MaskFrame, String> {
    let mut pos = 0usize;
    let mut token = || -> Result<String, String> {
        while pos < bytes.len() {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("unexpected end of header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err("not a binary PGM (P5)".into());
    }
    let w: u32 = token()?.parse().map_err(|e| format!("width: {e}"))?;
    let h: u32 = token()?.parse().map_err(|e| format!("height: {e}"))?;
    let maxval: u32 = token()?.parse().map_err(|e| format!("maxval: {e}"))?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    pos += 1; // single whitespace after maxval
    let expected = (w * h) as usize;
    if bytes.len() < pos + expected {
        return Err("pixel data truncated".into());
    }
    let data: Vec<u8> = bytes[pos..pos + expected].iter().map(|&b| u8::from(b != 0)).collect();
    Ok(MaskFrame::from_bits(w, h, &data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_video() -> MaskVideo {
        let mut frames = Vec::new();
        for t in 0..3u32 {
            let mut f = MaskFrame::new(12, 10);
            for y in 2..6 {
                for x in (2 + t)..(7 + t) {
                    f.set(x, y, true);
                }
            }
            frames.push(f);
        }
        MaskVideo::new(frames).unwrap()
    }

    #[test]
    fn mvb1_roundtrip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mvb");
        let video = sample_video();
        save_mvb1(&video, &path).unwrap();
        let loaded = load_mvb1(&path).unwrap();
        assert_eq!(video, loaded);

        let path2 = dir.path().join("v2.mvb");
        save_mvb1(&loaded, &path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn mvb1_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mvb");
        fs::write(&path, b"XXXX\x01\x00\x00\x00").unwrap();
        assert!(matches!(load_mvb1(&path), Err(VideoIoError::BadMagic)));
    }

    #[test]
    fn pgm_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let video = sample_video();
        save_pgm_dir(&video, dir.path()).unwrap();
        let loaded = load_pgm_dir(dir.path()).unwrap();
        assert_eq!(video, loaded);
    }
}
