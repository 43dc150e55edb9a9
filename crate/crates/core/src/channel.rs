//! Array geometry, DFT beam codebook, single-path LoS channels and
//! CSI-based best-beam selection.
//!
//! The base station carries a uniform linear array facing the +y
//! direction (boresight). A user at angle `theta` from boresight sees the
//! steering vector `a(theta)` with entries
//! `(1/sqrt(M)) * exp(-i * 2*pi * d * m * sin(theta))`, `d` in carrier
//! wavelengths. The single-path channel is `h = g * a(theta)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::types::Position;

/// Uniform linear array description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayGeometry {
    /// Number of antenna elements M.
    pub num_antennas: usize,
    /// Element spacing in carrier wavelengths.
    pub element_spacing: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self { num_antennas: 64, element_spacing: 0.5 }
    }
}

impl ArrayGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(SimError::Domain("array.num_antennas: must be >= 1".into()));
        }
        if !(self.element_spacing > 0.0) {
            return Err(SimError::Domain("array.element_spacing: must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-user large-scale gain model.
///
/// Amplitude is `reference_gain * d^(-pathloss_exponent / 2)` with the
/// reference distance at 1 m, or a constant `reference_gain` when
/// `equal_gain` is set. An optional uniform random phase is applied to the
/// path gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainModel {
    pub reference_gain: f64,
    pub pathloss_exponent: f64,
    pub equal_gain: bool,
    pub random_phase: bool,
}

impl Default for GainModel {
    fn default() -> Self {
        Self { reference_gain: 1.0, pathloss_exponent: 2.0, equal_gain: false, random_phase: true }
    }
}

impl GainModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.reference_gain > 0.0) {
            return Err(SimError::Domain("gain.reference_gain: must be > 0".into()));
        }
        Ok(())
    }
}

/// The fixed set of candidate beamforming vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    beams: Vec<Vec<Complex64>>,
}

impl Codebook {
    /// Builds a codebook, checking that all beams share one length and
    /// have unit Euclidean norm (tolerance 1e-12).
    pub fn new(beams: Vec<Vec<Complex64>>) -> Result<Self> {
        if beams.is_empty() {
            return Err(SimError::Domain("codebook: must contain at least one beam".into()));
        }
        let m = beams[0].len();
        for (j, beam) in beams.iter().enumerate() {
            if beam.len() != m {
                return Err(SimError::Dimension(format!(
                    "codebook: beam {j} has length {} instead of {m}",
                    beam.len()
                )));
            }
            let norm = vec_norm(beam);
            if (norm - 1.0).abs() > 1e-12 {
                return Err(SimError::Domain(format!(
                    "codebook: beam {j} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self { beams })
    }

    pub fn beam_count(&self) -> usize {
        self.beams.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.beams[0].len()
    }

    pub fn beam(&self, index: usize) -> &[Complex64] {
        &self.beams[index]
    }

    pub fn beams(&self) -> &[Vec<Complex64>] {
        &self.beams
    }
}

/// Single-path channel of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub user_id: u32,
    /// `g * a(aoa)`, length M.
    pub coefficients: Vec<Complex64>,
    /// Complex path gain g.
    pub path_gain: Complex64,
    /// Angle of arrival from array boresight, radians.
    pub aoa: f64,
}

impl UserChannel {
    /// Recomputes `g * a(aoa)`; equals `coefficients` to 1e-12 by
    /// construction.
    pub fn reconstruct(&self, geometry: &ArrayGeometry) -> Result<Vec<Complex64>> {
        let a = steering_vector(geometry, self.aoa)?;
        Ok(a.into_iter().map(|e| e * self.path_gain).collect())
    }
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian inner product `x^H y`.
fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Effective beamforming gain `|h^H f|^2`.
pub fn effective_gain(h: &[Complex64], f: &[Complex64]) -> f64 {
    inner(h, f).norm_sqr()
}

/// ULA response toward `angle` radians from boresight; unit norm.
///
/// Entry m is `(1/sqrt(M)) * exp(-i * 2*pi * spacing * m * sin(angle))`.
pub fn steering_vector(geometry: &ArrayGeometry, angle: f64) -> Result<Vec<Complex64>> {
    geometry.validate()?;
    if !(angle.abs() <= PI / 2.0) {
        return Err(SimError::Domain(format!(
            "steering angle {angle} outside [-pi/2, pi/2]"
        )));
    }
    let m = geometry.num_antennas;
    let scale = 1.0 / (m as f64).sqrt();
    let step = -2.0 * PI * geometry.element_spacing * angle.sin();
    Ok((0..m)
        .map(|i| Complex64::from_polar(scale, step * i as f64))
        .collect())
}

/// DFT-style codebook: beam j points at `asin(-1 + (2j+1)/B)`, a uniform
/// grid in sin-space covering [-1, 1). With M = B the beams are an
/// orthonormal basis.
pub fn generate_dft_codebook(geometry: &ArrayGeometry, beam_count: usize) -> Result<Codebook> {
    if beam_count == 0 {
        return Err(SimError::Domain("codebook.beam_count: must be >= 1".into()));
    }
    let b = beam_count as f64;
    let beams = (0..beam_count)
        .map(|j| {
            let sin_theta = -1.0 + (2 * j + 1) as f64 / b;
            steering_vector(geometry, sin_theta.asin())
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(beams)
}

/// Draws the single-path channel for a user at `position` as seen from the
/// array at `bs_position` (boresight +y).
pub fn generate_channel<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    gain_model: &GainModel,
    user_id: u32,
    position: Position,
    bs_position: Position,
    rng: &mut R,
) -> Result<UserChannel> {
    gain_model.validate()?;
    let dx = position.x - bs_position.x;
    let dy = position.y - bs_position.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(SimError::Domain(format!(
            "user {user_id} is coincident with the base station"
        )));
    }
    let aoa = dx.atan2(dy);
    let distance = dx.hypot(dy);
    let amplitude = if gain_model.equal_gain {
        gain_model.reference_gain
    } else {
        gain_model.reference_gain * distance.powf(-gain_model.pathloss_exponent / 2.0)
    };
    let phase = if gain_model.random_phase { rng.gen::<f64>() * 2.0 * PI } else { 0.0 };
    let path_gain = Complex64::from_polar(amplitude, phase);
    let coefficients = steering_vector(geometry, aoa)?
        .into_iter()
        .map(|e| e * path_gain)
        .collect();
    Ok(UserChannel { user_id, coefficients, path_gain, aoa })
}

/// `|h^H f| / (||h|| * ||f||)`, in [0, 1].
pub fn cosine_similarity(h: &[Complex64], f: &[Complex64]) -> Result<f64> {
    if h.len() != f.len() {
        return Err(SimError::Dimension(format!(
            "cosine_similarity: lengths {} vs {}",
            h.len(),
            f.len()
        )));
    }
    let nh = vec_norm(h);
    let nf = vec_norm(f);
    if nh == 0.0 || nf == 0.0 {
        return Err(SimError::Domain("cosine_similarity: zero-norm input".into()));
    }
    Ok((inner(h, f).norm() / (nh * nf)).min(1.0))
}

/// Index of the beam maximizing `|h^H f_j|^2`; ties break to the lowest
/// index.
pub fn best_beam_csi(channel: &UserChannel, codebook: &Codebook) -> usize {
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    for (j, beam) in codebook.beams().iter().enumerate() {
        let gain = effective_gain(&channel.coefficients, beam);
        if gain > best_gain {
            best_gain = gain;
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn random_channel<R: Rng>(geometry: &ArrayGeometry, id: u32, rng: &mut R) -> UserChannel {
        // Any position in front of a BS at the origin.
        let x = rng.gen::<f64>() * 16.0 - 8.0;
        let y = rng.gen::<f64>() * 10.0 + 0.1;
        generate_channel(
            geometry,
            &GainModel::default(),
            id,
            Position::new(x, y),
            Position::new(0.0, 0.0),
            rng,
        )
        .unwrap()
    }

    #[test]
    fn steering_broadside_is_uniform() {
        let g = ArrayGeometry { num_antennas: 8, element_spacing: 0.5 };
        let a = steering_vector(&g, 0.0).unwrap();
        let expected = 1.0 / 8f64.sqrt();
        for e in &a {
            assert!((e.re - expected).abs() < 1e-15 && e.im.abs() < 1e-15);
        }
    }

    #[test]
    fn steering_phase_progression_at_30_degrees() {
        // -2*pi*0.5*m*sin(pi/6) = -pi*m/2: phases 0, -pi/2, -pi, -3pi/2.
        let g = ArrayGeometry { num_antennas: 4, element_spacing: 0.5 };
        let a = steering_vector(&g, PI / 6.0).unwrap();
        let expected = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, -0.5),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, 0.5),
        ];
        for (got, want) in a.iter().zip(expected) {
            assert!((got - want).norm() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn steering_is_unit_norm() {
        let g = ArrayGeometry { num_antennas: 48, element_spacing: 0.5 };
        let mut rng = derive_rng(2, &[0]);
        for _ in 0..64 {
            let angle = (rng.gen::<f64>() - 0.5) * PI;
            let a = steering_vector(&g, angle).unwrap();
            assert!((vec_norm(&a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_rejects_out_of_range_angles() {
        let g = ArrayGeometry::default();
        assert!(steering_vector(&g, 1.8).is_err());
        assert!(steering_vector(&g, -2.0).is_err());
        assert!(steering_vector(&g, f64::NAN).is_err());
    }

    #[test]
    fn dft_codebook_is_orthonormal_for_m_equals_b() {
        let g = ArrayGeometry { num_antennas: 64, element_spacing: 0.5 };
        let cb = generate_dft_codebook(&g, 64).unwrap();
        for i in 0..64 {
            assert!((vec_norm(cb.beam(i)) - 1.0).abs() < 1e-12);
            for j in 0..64 {
                if i != j {
                    let ip = inner(cb.beam(i), cb.beam(j)).norm();
                    assert!(ip < 1e-10, "beams {i},{j}: |f_i^H f_j| = {ip}");
                }
            }
        }
    }

    #[test]
    fn dft_codebook_degenerate_single_beam() {
        let g = ArrayGeometry { num_antennas: 1, element_spacing: 0.5 };
        let cb = generate_dft_codebook(&g, 1).unwrap();
        assert_eq!(cb.beam_count(), 1);
        assert!((cb.beam(0)[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn orthonormal_codebook_conserves_energy() {
        let g = ArrayGeometry { num_antennas: 64, element_spacing: 0.5 };
        let cb = generate_dft_codebook(&g, 64).unwrap();
        let mut rng = derive_rng(3, &[0]);
        for i in 0..32 {
            let h = random_channel(&g, i, &mut rng);
            let total: f64 = cb.beams().iter().map(|f| effective_gain(&h.coefficients, f)).sum();
            let norm_sq: f64 = h.coefficients.iter().map(|c| c.norm_sqr()).sum();
            assert!(
                (total - norm_sq).abs() <= 1e-9 * norm_sq,
                "sum {total} vs ||h||^2 {norm_sq}"
            );
        }
    }

    #[test]
    fn boresight_equal_gain_channel_matches_reference() {
        let g = ArrayGeometry { num_antennas: 8, element_spacing: 0.5 };
        let gm = GainModel {
            reference_gain: 2.5,
            pathloss_exponent: 2.0,
            equal_gain: true,
            random_phase: false,
        };
        let mut rng = derive_rng(4, &[0]);
        let ch = generate_channel(&g, &gm, 0, Position::new(0.0, 1.0), Position::new(0.0, 0.0), &mut rng)
            .unwrap();
        assert_eq!(ch.aoa, 0.0);
        let a = steering_vector(&g, 0.0).unwrap();
        for (c, e) in ch.coefficients.iter().zip(a) {
            assert!((c - e * 2.5).norm() < 1e-12);
        }
    }

    #[test]
    fn co_located_users_share_aoa_and_best_beam() {
        let g = ArrayGeometry { num_antennas: 32, element_spacing: 0.5 };
        let cb = generate_dft_codebook(&g, 32).unwrap();
        let mut rng = derive_rng(5, &[0]);
        let p = Position::new(3.2, 4.1);
        let bs = Position::new(5.0, 0.0);
        let a = generate_channel(&g, &GainModel::default(), 1, p, bs, &mut rng).unwrap();
        let b = generate_channel(&g, &GainModel::default(), 2, p, bs, &mut rng).unwrap();
        assert_eq!(a.aoa, b.aoa);
        assert_eq!(best_beam_csi(&a, &cb), best_beam_csi(&b, &cb));
    }

    #[test]
    fn channel_reconstructs_from_gain_and_aoa() {
        let g = ArrayGeometry { num_antennas: 64, element_spacing: 0.5 };
        let mut rng = derive_rng(6, &[0]);
        for i in 0..32 {
            let ch = random_channel(&g, i, &mut rng);
            let rebuilt = ch.reconstruct(&g).unwrap();
            for (c, r) in ch.coefficients.iter().zip(rebuilt) {
                assert!((c - r).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coincident_positions_are_rejected() {
        let g = ArrayGeometry::default();
        let mut rng = derive_rng(7, &[0]);
        let p = Position::new(1.0, 2.0);
        let err = generate_channel(&g, &GainModel::default(), 0, p, p, &mut rng);
        assert!(matches!(err, Err(SimError::Domain(_))));
    }

    #[test]
    fn cosine_similarity_basic_cases() {
        let mut rng = derive_rng(8, &[0]);
        let g = ArrayGeometry { num_antennas: 16, element_spacing: 0.5 };
        let h = random_channel(&g, 0, &mut rng).coefficients;
        let nh = vec_norm(&h);
        let unit: Vec<Complex64> = h.iter().map(|c| c / nh).collect();
        assert!((cosine_similarity(&h, &unit).unwrap() - 1.0).abs() < 1e-12);

        let e0 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e1 = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert_eq!(cosine_similarity(&e0, &e1).unwrap(), 0.0);

        let zero = vec![Complex64::new(0.0, 0.0); 2];
        assert!(cosine_similarity(&zero, &e0).is_err());
    }

    #[test]
    fn cosine_similarity_matches_direct_evaluation() {
        let g = ArrayGeometry { num_antennas: 24, element_spacing: 0.5 };
        let mut rng = derive_rng(9, &[0]);
        for i in 0..32 {
            let h = random_channel(&g, i, &mut rng).coefficients;
            let f = random_channel(&g, i + 100, &mut rng).coefficients;
            // Scalar re-evaluation of |h^H f| / (||h|| ||f||).
            let mut dot = Complex64::new(0.0, 0.0);
            let (mut sh, mut sf) = (0.0, 0.0);
            for (a, b) in h.iter().zip(&f) {
                dot += a.conj() * b;
                sh += a.norm_sqr();
                sf += b.norm_sqr();
            }
            let expected = dot.norm() / (sh.sqrt() * sf.sqrt());
            assert!((cosine_similarity(&h, &f).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn on_grid_channels_pick_their_own_beam() {
        let g = ArrayGeometry { num_antennas: 64, element_spacing: 0.5 };
        let cb = generate_dft_codebook(&g, 64).unwrap();
        for j in 0..64 {
            let sin_theta = -1.0 + (2 * j + 1) as f64 / 64.0;
            let a = steering_vector(&g, sin_theta.asin()).unwrap();
            let ch = UserChannel {
                user_id: j as u32,
                coefficients: a.iter().map(|e| e * 0.7).collect(),
                path_gain: Complex64::new(0.7, 0.0),
                aoa: sin_theta.asin(),
            };
            assert_eq!(best_beam_csi(&ch, &cb), j);
        }
    }

    #[test]
    fn best_beam_matches_exhaustive_scan() {
        let g = ArrayGeometry { num_antennas: 64, element_spacing: 0.5 };
        let cb = generate_dft_codebook(&g, 64).unwrap();
        let mut rng = derive_rng(10, &[0]);
        for i in 0..200 {
            let ch = random_channel(&g, i, &mut rng);
            // Brute-force oracle scan.
            let mut best = 0usize;
            let mut best_gain = -1.0;
            for j in 0..cb.beam_count() {
                let gain = inner(&ch.coefficients, cb.beam(j)).norm_sqr();
                if gain > best_gain {
                    best_gain = gain;
                    best = j;
                }
            }
            assert_eq!(best_beam_csi(&ch, &cb), best);
        }
    }

    #[test]
    fn best_beam_is_scale_invariant() {
        let g = ArrayGeometry { num_antennas: 64, element_spacing: 0.5 };
        let cb = generate_dft_codebook(&g, 64).unwrap();
        let mut rng = derive_rng(11, &[0]);
        for i in 0..50 {
            let ch = random_channel(&g, i, &mut rng);
            let base = best_beam_csi(&ch, &cb);
            let c = rng.gen::<f64>() * 9.9 + 0.1;
            let phi = rng.gen::<f64>() * 2.0 * PI;
            let factor = Complex64::from_polar(c, phi);
            let scaled = UserChannel {
                user_id: ch.user_id,
                coefficients: ch.coefficients.iter().map(|x| x * factor).collect(),
                path_gain: ch.path_gain * factor,
                aoa: ch.aoa,
            };
            assert_eq!(best_beam_csi(&scaled, &cb), base);
        }
    }

    #[test]
    fn best_beam_agrees_with_cosine_similarity_argmax() {
        let g = ArrayGeometry { num_antennas: 32, element_spacing: 0.5 };
        let cb = generate_dft_codebook(&g, 48).unwrap();
        let mut rng = derive_rng(12, &[0]);
        for i in 0..100 {
            let ch = random_channel(&g, i, &mut rng);
            let mut best = 0usize;
            let mut best_sim = -1.0;
            for j in 0..cb.beam_count() {
                let sim = cosine_similarity(&ch.coefficients, cb.beam(j)).unwrap();
                if sim > best_sim {
                    best_sim = sim;
                    best = j;
                }
            }
            assert_eq!(best_beam_csi(&ch, &cb), best);
        }
    }
}
