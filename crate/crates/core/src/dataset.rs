//! Flat binary persistence for labeled sample sets.
//!
//! Layout (all little-endian):
//!   magic "MMNOMADS" | u32 version | u32 beam_count | u32 width |
//!   u32 height | u32 sample_count, then one record per sample:
//!   u32 user_id | f64 x | f64 y | u32 label | width*height f32 pixels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, SimError};
use crate::scene::{LabeledSample, SceneImage};
use crate::types::Position;

const MAGIC: &[u8; 8] = b"MMNOMADS";
const VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Writes samples to `path`. All images must share one raster size and all
/// labels must lie in `[0, beam_count)`.
pub fn save_dataset(path: &Path, samples: &[LabeledSample], beam_count: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(SimError::Domain("save_dataset: no samples".into()));
    }
    let (w, h) = (samples[0].image.width, samples[0].image.height);
    for (i, s) in samples.iter().enumerate() {
        if s.image.width != w || s.image.height != h {
            return Err(SimError::Dimension(format!(
                "sample {i}: raster {}x{} differs from {}x{}",
                s.image.width, s.image.height, w, h
            )));
        }
        if s.label >= beam_count {
            return Err(SimError::Domain(format!(
                "sample {i}: label {} outside beam range {beam_count}",
                s.label
            )));
        }
    }

    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(beam_count as u32).to_le_bytes())?;
    out.write_all(&(w as u32).to_le_bytes())?;
    out.write_all(&(h as u32).to_le_bytes())?;
    out.write_all(&(samples.len() as u32).to_le_bytes())?;
    for s in samples {
        out.write_all(&s.user_id.to_le_bytes())?;
        out.write_all(&s.true_position.x.to_le_bytes())?;
        out.write_all(&s.true_position.y.to_le_bytes())?;
        out.write_all(&(s.label as u32).to_le_bytes())?;
        for &p in &s.image.pixels {
            out.write_all(&p.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset back; returns the samples and the beam count recorded in
/// the header.
pub fn load_dataset(path: &Path) -> Result<(Vec<LabeledSample>, usize)> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SimError::Format(format!("{}: not a dataset file", path.display())));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(SimError::Format(format!("unsupported dataset version {version}")));
    }
    let beam_count = read_u32(&mut input)? as usize;
    let width = read_u32(&mut input)? as usize;
    let height = read_u32(&mut input)? as usize;
    let count = read_u32(&mut input)? as usize;
    if beam_count == 0 || width == 0 || height == 0 {
        return Err(SimError::Format("dataset header has zero dimensions".into()));
    }

    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let user_id = read_u32(&mut input)?;
        let x = read_f64(&mut input)?;
        let y = read_f64(&mut input)?;
        let label = read_u32(&mut input)? as usize;
        if label >= beam_count {
            return Err(SimError::Format(format!(
                "record {i}: label {label} outside beam range {beam_count}"
            )));
        }
        let mut raw = vec![0u8; width * height * 4];
        input.read_exact(&mut raw)?;
        let pixels = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        samples.push(LabeledSample {
            image: SceneImage { width, height, pixels },
            label,
            user_id,
            true_position: Position::new(x, y),
        });
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(SimError::Format("dataset has trailing bytes".into()));
    }
    Ok((samples, beam_count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dft_codebook, ArrayGeometry, GainModel};
    use crate::rng::derive_rng;
    use crate::scene::{make_training_set, RenderConfig, SceneConfig};

    fn sample_set(n: usize) -> Vec<LabeledSample> {
        let geometry = ArrayGeometry { num_antennas: 16, element_spacing: 0.5 };
        let codebook = generate_dft_codebook(&geometry, 16).unwrap();
        let scene = SceneConfig { user_count: 6, ..Default::default() };
        let render = RenderConfig { width: 12, height: 12, ..Default::default() };
        make_training_set(
            &scene,
            &geometry,
            &GainModel::default(),
            &codebook,
            n,
            &render,
            &mut derive_rng(60, &[0]),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.bin");
        let samples = sample_set(9);
        save_dataset(&path, &samples, 16).unwrap();
        let (loaded, beam_count) = load_dataset(&path).unwrap();
        assert_eq!(beam_count, 16);
        assert_eq!(loaded, samples);
    }

    #[test]
    fn save_is_byte_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        let samples = sample_set(4);
        save_dataset(&a, &samples, 16).unwrap();
        save_dataset(&b, &samples, 16).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn bad_magic_and_truncation_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.bin");
        let samples = sample_set(3);
        save_dataset(&path, &samples, 16).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad.bin");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_dataset(&bad), Err(SimError::Format(_))));

        let trunc = dir.path().join("trunc.bin");
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&trunc, &full[..full.len() - 5]).unwrap();
        assert!(load_dataset(&trunc).is_err());
    }

    #[test]
    fn out_of_range_label_is_rejected_on_save() {
        let dir = tempfile::tempdir().unwrap();
        let samples = sample_set(2);
        let err = save_dataset(&dir.path().join("x.bin"), &samples, 1);
        assert!(matches!(err, Err(SimError::Domain(_))));
    }
}
