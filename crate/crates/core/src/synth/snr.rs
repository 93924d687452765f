//! Signal-to-noise measurement, noise rescaling and SNR binning.
//!
//! SNR is the mean signal over root voxels divided by the RMS of the noise
//! over non-root voxels.

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::volume::{BinaryMask3D, Volume3D};

pub fn measure_snr(signal: &Volume3D, noise: &Volume3D, mask: &BinaryMask3D) -> Result<f64, SynthError> {
    if signal.dims() != noise.dims() || signal.dims() != mask.dims() {
        return Err(SynthError::DimsMismatch(signal.dims(), if signal.dims() != noise.dims() {
            noise.dims()
        } else {
            mask.dims()
        }));
    }
    let (mut root_sum, mut roots) = (0.0f64, 0usize);
    let (mut noise_sq, mut background) = (0.0f64, 0usize);
    for ((&s, &n), &m) in signal.voxels().iter().zip(noise.voxels()).zip(mask.bits()) {
        if m {
            root_sum += s as f64;
            roots += 1;
        } else {
            noise_sq += n as f64 * n as f64;
            background += 1;
        }
    }
    if roots == 0 {
        return Err(SynthError::EmptyRoots);
    }
    if background == 0 {
        return Err(SynthError::EmptyBackground);
    }
    let rms = (noise_sq / background as f64).sqrt();
    if rms == 0.0 {
        return Err(SynthError::ZeroNoise);
    }
    Ok(root_sum / roots as f64 / rms)
}

/// A signal plus rescaled noise, normalized to [0, 1].
#[derive(Debug, Clone)]
pub struct Composite {
    pub volume: Volume3D,
    /// Factor applied to the raw noise field.
    pub noise_scale: f64,
    /// SNR measured on the signal and the rescaled noise.
    pub snr: f64,
    /// `normalized = (raw - offset) * scale`.
    pub offset: f64,
    pub scale: f64,
}

/// Rescales `noise` so the composite hits `target_snr`, adds it to `signal`
/// and min-max normalizes the sum.
pub fn compose_sample(
    signal: &Volume3D,
    noise: &Volume3D,
    mask: &BinaryMask3D,
    target_snr: f64,
) -> Result<Composite, SynthError> {
    if !(target_snr > 0.0) || !target_snr.is_finite() {
        return Err(SynthError::InvalidSnr(target_snr));
    }
    let current = measure_snr(signal, noise, mask)?;
    if current == 0.0 {
        return Err(SynthError::EmptyRoots);
    }
    let noise_scale = current / target_snr;
    let scaled: Vec<f32> = noise.voxels().iter().map(|&n| (n as f64 * noise_scale) as f32).collect();
    let scaled = Volume3D::from_vec(noise.dims(), scaled)?;
    let snr = measure_snr(signal, &scaled, mask)?;
    let raw: Vec<f32> = signal.voxels().iter().zip(scaled.voxels()).map(|(&s, &n)| s + n).collect();
    let (volume, offset, scale) = Volume3D::from_vec(signal.dims(), raw)?.normalize_unit();
    Ok(Composite { volume, noise_scale, snr, offset, scale })
}

/// Lower edges of the reporting bins; the last bin is closed at 100.
pub const SNR_EDGES: [f64; 5] = [1.0, 3.16, 10.0, 31.6, 100.0];
pub const SNR_BIN_LABELS: [&str; 4] = ["[1,3.16)", "[3.16,10)", "[10,31.6)", "[31.6,100]"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SnrBin {
    Below,
    Bin(usize),
    Above,
}

impl SnrBin {
    pub fn label(&self) -> &'static str {
        match self {
            SnrBin::Below => "<1",
            SnrBin::Bin(i) => SNR_BIN_LABELS[*i],
            SnrBin::Above => ">100",
        }
    }
}

pub fn snr_bin(snr: f64) -> Result<SnrBin, SynthError> {
    if snr.is_nan() || snr <= 0.0 {
        return Err(SynthError::InvalidSnr(snr));
    }
    if snr < SNR_EDGES[0] {
        return Ok(SnrBin::Below);
    }
    if snr > SNR_EDGES[4] {
        return Ok(SnrBin::Above);
    }
    let idx = SNR_EDGES[1..4].iter().take_while(|&&edge| snr >= edge).count();
    Ok(SnrBin::Bin(idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::noise::{gen_noise, NoiseSpec};
    use crate::volume::Dims;

    fn fixture() -> (Volume3D, BinaryMask3D) {
        let d = Dims::new(8, 8, 4).unwrap();
        let mask = BinaryMask3D::from_fn(d, |x, y, _| (2..5).contains(&x) && (3..6).contains(&y)).unwrap();
        let signal = mask.to_volume();
        (signal, mask)
    }

    #[test]
    fn constant_ratio() {
        let (mask_signal, mask) = fixture();
        let signal = Volume3D::from_vec(mask.dims(), mask_signal.voxels().iter().map(|v| v * 3.0).collect()).unwrap();
        let noise = Volume3D::filled(mask.dims(), 0.5).unwrap();
        assert!((measure_snr(&signal, &noise, &mask).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_and_empty_roots() {
        let (signal, mask) = fixture();
        let zeros = Volume3D::zeros(mask.dims()).unwrap();
        assert!(matches!(measure_snr(&signal, &zeros, &mask), Err(SynthError::ZeroNoise)));
        let empty = BinaryMask3D::empty(mask.dims()).unwrap();
        assert!(matches!(measure_snr(&signal, &signal, &empty), Err(SynthError::EmptyRoots)));
        assert!(matches!(
            compose_sample(&signal, &Volume3D::filled(mask.dims(), 1.0).unwrap(), &empty, 10.0),
            Err(SynthError::EmptyRoots)
        ));
    }

    #[test]
    fn doubling_noise_halves_snr() {
        let (signal, mask) = fixture();
        let noise = gen_noise(&NoiseSpec::gaussian(0.3, 1), mask.dims()).unwrap();
        let doubled = Volume3D::from_vec(mask.dims(), noise.voxels().iter().map(|v| v * 2.0).collect()).unwrap();
        let a = measure_snr(&signal, &noise, &mask).unwrap();
        let b = measure_snr(&signal, &doubled, &mask).unwrap();
        assert!((a / b - 2.0).abs() < 1e-9);
    }

    #[test]
    fn compose_hits_target() {
        let (signal, mask) = fixture();
        let noise = gen_noise(&NoiseSpec::perlin(1.0, 3.0, vec![1.0, 0.5], 7), mask.dims()).unwrap();
        let c = compose_sample(&signal, &noise, &mask, 10.0).unwrap();
        assert!((c.snr - 10.0).abs() <= 0.1);
        let (lo, hi) = c.volume.min_max();
        assert_eq!((lo, hi), (0.0, 1.0));

        let current = measure_snr(&signal, &noise, &mask).unwrap();
        let fixed = compose_sample(&signal, &noise, &mask, current).unwrap();
        assert!((fixed.noise_scale - 1.0).abs() <= 1e-6);

        let loud = compose_sample(&signal, &noise, &mask, 1.0).unwrap();
        assert!(loud.noise_scale > 1.0 || current < 1.0);
        assert!((loud.snr - 1.0).abs() <= 0.01);
    }

    #[test]
    fn bins() {
        assert_eq!(snr_bin(2.0).unwrap(), SnrBin::Bin(0));
        assert_eq!(snr_bin(3.16).unwrap(), SnrBin::Bin(1));
        assert_eq!(snr_bin(10.0).unwrap(), SnrBin::Bin(2));
        assert_eq!(snr_bin(31.6).unwrap(), SnrBin::Bin(3));
        assert_eq!(snr_bin(100.0).unwrap(), SnrBin::Bin(3));
        assert_eq!(snr_bin(100.5).unwrap(), SnrBin::Above);
        assert_eq!(snr_bin(0.5).unwrap(), SnrBin::Below);
        assert!(snr_bin(0.0).is_err());
        assert!(snr_bin(-3.0).is_err());
        assert_eq!(SnrBin::Bin(0).label(), "[1,3.16)");
    }
}
