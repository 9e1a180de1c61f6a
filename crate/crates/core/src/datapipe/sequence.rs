use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;
pub const MAGIC: &[u8; 7] = b"RCLSEQ1";
pub const VERSION: u8 = 1;

/// One subject's video as frame vectors with per-frame intensity labels.
///
/// Each frame holds `3 × width` values, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub subject_id: u32,
    width: usize,
    frames: Vec<Vec<f32>>,
    labels: Vec<f32>,
}

impl FrameSequence {
    pub fn new(subject_id: u32, width: usize, frames: Vec<Vec<f32>>, labels: Vec<f32>) -> Result<Self> {
        if frames.is_empty() || frames.len() != labels.len() {
            return Err(Error::config(format!(
                "sequence needs equal, non-zero frame and label counts (got {} and {})",
                frames.len(),
                labels.len()
            )));
        }
        if width == 0 {
            return Err(Error::config("frame width must be >= 1"));
        }
        if let Some(i) = frames.iter().position(|f| f.len() != CHANNELS * width) {
            return Err(Error::dim(
                "FrameSequence frame",
                CHANNELS * width,
                format!("{} values in frame {}", frames[i].len(), i + 1),
            ));
        }
        Ok(FrameSequence {
            subject_id,
            width,
            frames,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame `n`, 1-based.
    pub fn frame(&self, n: usize) -> &[f32] {
        &self.frames[n - 1]
    }

    pub fn frames(&self) -> &[Vec<f32>] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [Vec<f32>] {
        &mut self.frames
    }

    pub fn labels(&self) -> &[f32] {
        &self.labels
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.len() * (CHANNELS * self.width + 1) * 4);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        for v in [self.subject_id, self.len() as u32, CHANNELS as u32, self.width as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for (frame, label) in self.frames.iter().zip(&self.labels) {
            for v in frame {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&label.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::format(bytes.len(), "truncated header"));
        }
        if &bytes[..7] != MAGIC {
            return Err(Error::format(0, "bad magic, expected \"RCLSEQ1\""));
        }
        if bytes[7] != VERSION {
            return Err(Error::format(7, format!("unsupported version {}", bytes[7])));
        }
        let field = |i: usize| -> Result<u32> {
            let at = 8 + 4 * i;
            bytes
                .get(at..at + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| Error::format(bytes.len(), "truncated header"))
        };
        let subject_id = field(0)?;
        let n_frames = field(1)? as usize;
        let channels = field(2)? as usize;
        let width = field(3)? as usize;
        if channels != CHANNELS {
            return Err(Error::format(16, format!("channels must be 3, got {channels}")));
        }
        if n_frames == 0 || width == 0 {
            return Err(Error::format(12, "frame count and width must be >= 1"));
        }
        let record = (CHANNELS * width + 1) * 4;
        let body = n_frames
            .checked_mul(record)
            .ok_or_else(|| Error::format(12, "frame count overflows"))?;
        let expected = 24 + body;
        if bytes.len() < expected {
            let frame = (bytes.len() - 24) / record;
            return Err(Error::format(
                24 + frame * record,
                format!("truncated in frame {} of {n_frames}", frame + 1),
            ));
        }
        if bytes.len() > expected {
            return Err(Error::format(
                expected,
                "trailing bytes: frame width inconsistent with header",
            ));
        }
        let mut frames = Vec::with_capacity(n_frames);
        let mut labels = Vec::with_capacity(n_frames);
        for (f, rec) in bytes[24..].chunks_exact(record).enumerate() {
            let mut values = rec
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<_>>();
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::format(
                    24 + f * record + 4 * i,
                    format!("non-finite value in frame {}", f + 1),
                ));
            }
            labels.push(values.pop().unwrap());
            frames.push(values);
        }
        FrameSequence::new(subject_id, width, frames, labels)
    }
}

pub fn write_sequence(seq: &FrameSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, seq.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_sequence(path: impl AsRef<Path>) -> Result<FrameSequence> {
    let path = path.as_ref();
    FrameSequence::decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Sequence paths listed one per line; relative paths resolve against the
/// manifest's directory. Blank lines are skipped.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| base.join(l))
        .collect())
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[PathBuf]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for e in entries {
        text.push_str(&e.to_string_lossy());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(manifest: impl AsRef<Path>) -> Result<Vec<FrameSequence>> {
    read_manifest(manifest)?.iter().map(read_sequence).collect()
}

/// Splits an `h × w` RGB frame (pixel-interleaved, row-major) into three
/// row-major channel vectors of length `h·w`.
pub fn flatten_frame(pixels: &[f32], h: usize, w: usize) -> Result<[Vec<f32>; CHANNELS]> {
    if h == 0 || w == 0 {
        return Err(Error::config("cannot flatten an empty frame"));
    }
    if pixels.len() != h * w * CHANNELS {
        return Err(Error::dim("flatten_frame", h * w * CHANNELS, pixels.len()));
    }
    Ok(std::array::from_fn(|c| {
        pixels.iter().skip(c).step_by(CHANNELS).copied().collect()
    }))
}

/// Concatenates flattened channels into one channel-major frame vector.
pub fn frame_vector(channels: &[Vec<f32>; CHANNELS]) -> Vec<f32> {
    channels.concat()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FrameSequence {
        let frames = (0..5).map(|f| (0..12).map(|i| (f * 12 + i) as f32 * 0.5).collect()).collect();
        FrameSequence::new(3, 4, frames, vec![0.0, 1.0, 2.0, 15.0, 0.0]).unwrap()
    }

    #[test]
    fn flatten_examples() {
        let one = flatten_frame(&[0.1, 0.2, 0.3], 1, 1).unwrap();
        assert_eq!(one, [vec![0.1], vec![0.2], vec![0.3]]);
        // channel 0 laid out as [[1,2],[3,4]]
        let px: Vec<f32> = (1..=4).flat_map(|v| [v as f32, 0.0, 0.0]).collect();
        let ch = flatten_frame(&px, 2, 2).unwrap();
        assert_eq!(ch[0], vec![1.0, 2.0, 3.0, 4.0]);
        assert!(flatten_frame(&[], 0, 3).is_err());
    }

    #[test]
    fn flatten_round_trip() {
        let px: Vec<f32> = (0..2 * 3 * 3).map(|v| v as f32).collect();
        let ch = flatten_frame(&px, 2, 3).unwrap();
        let back: Vec<f32> = (0..6).flat_map(|p| (0..3).map(move |c| (c, p))).map(|(c, p)| ch[c][p]).collect();
        assert_eq!(back, px);
    }

    #[test]
    fn round_trip() {
        let s = sample();
        assert_eq!(FrameSequence::decode(&s.encode()).unwrap(), s);
    }

    #[test]
    fn format_errors() {
        let bytes = sample().encode();
        let mut bad = bytes.clone();
        bad[..7].copy_from_slice(b"NOTSEQ1");
        let err = FrameSequence::decode(&bad).unwrap_err();
        assert!(err.to_string().contains("RCLSEQ1"));
        assert!(matches!(
            FrameSequence::decode(&bytes[..bytes.len() - 1]),
            Err(Error::Format { .. })
        ));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(matches!(FrameSequence::decode(&long), Err(Error::Format { .. })));
    }

    #[test]
    fn header_layout_is_exact() {
        let bytes = sample().encode();
        assert_eq!(&bytes[..8], b"RCLSEQ1\x01");
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &5u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &3u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &4u32.to_le_bytes());
        assert_eq!(bytes.len(), 24 + 5 * 13 * 4);
    }

    #[test]
    fn frames_must_share_width() {
        assert!(FrameSequence::new(0, 2, vec![vec![0.0; 6], vec![0.0; 5]], vec![0.0, 0.0]).is_err());
        assert!(FrameSequence::new(0, 2, vec![], vec![]).is_err());
    }
}
