//! Prosodic descriptors from audio: short-time energy, loudness and MFCCs,
//! aggregated to per-session statistics.
//!
//! Per frame the chain is: window → zero-pad to the next power of two → FFT
//! power spectrum → triangular mel filterbank. Loudness is the Stevens
//! power-law sum of the mel-band energies; MFCCs are the orthonormal DCT-II of
//! the floored log mel energies, keeping c1..cK.
//!
//! Session features (canonical order):
//! `energy_{mean,std}`, `loudness_{mean,std}`, `mfcc_k_{mean,std}` for k = 1..K,
//! `talk_ratio`, `n_frames`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{mean, population_std, Scalar};
use crate::session::{AudioTrack, Role, SessionRecord};

/// Stevens power-law exponent applied to mel-band energies.
pub const LOUDNESS_EXPONENT: f64 = 0.3;
pub const DEFAULT_LOG_FLOOR: f64 = 1e-10;
pub const DEFAULT_TALK_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_N_FILTERS: usize = 26;
pub const DEFAULT_N_COEFFS: usize = 13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProsodicError {
    #[error("empty signal")]
    EmptySignal,
    #[error("invalid frame spec: {0}")]
    InvalidFrameSpec(String),
    #[error("invalid filterbank: {0}")]
    InvalidFilterbank(String),
    #[error("requested {requested} coefficients from {available} mel filters")]
    TooManyCoefficients { requested: usize, available: usize },
    #[error("no {0} audio track in session")]
    MissingTrack(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hamming,
    Rectangular,
}

impl Window {
    pub fn coefficients<T: Scalar>(self, n: usize) -> Vec<T> {
        match self {
            Window::Rectangular => vec![T::one(); n],
            Window::Hamming if n == 1 => vec![T::one()],
            Window::Hamming => {
                let denom = T::of_usize(n - 1);
                (0..n)
                    .map(|i| {
                        T::of(0.54)
                            - T::of(0.46) * (T::TAU() * T::of_usize(i) / denom).cos()
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub window: Window,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            window: Window::Hamming,
        }
    }
}

impl FrameSpec {
    /// Frame length and hop in samples at the given rate.
    pub fn in_samples(&self, sample_rate_hz: u32) -> Result<(usize, usize), ProsodicError> {
        if !(self.hop_ms > 0.0 && self.hop_ms <= self.frame_len_ms) {
            return Err(ProsodicError::InvalidFrameSpec(format!(
                "need 0 < hop_ms <= frame_len_ms, got hop {} len {}",
                self.hop_ms, self.frame_len_ms
            )));
        }
        let sr = f64::from(sample_rate_hz);
        let len = (self.frame_len_ms * sr / 1000.0).round() as usize;
        let hop = (self.hop_ms * sr / 1000.0).round() as usize;
        if len == 0 || hop == 0 {
            return Err(ProsodicError::InvalidFrameSpec(format!(
                "frame of {len} samples with hop {hop} at {sample_rate_hz} Hz"
            )));
        }
        Ok((len, hop.min(len)))
    }

    /// FFT size used for frames of this spec.
    pub fn fft_size(&self, sample_rate_hz: u32) -> Result<usize, ProsodicError> {
        let (len, _) = self.in_samples(sample_rate_hz)?;
        Ok(len.next_power_of_two().max(2))
    }
}

/// Splits a signal into windowed frames starting every hop; the trailing
/// partial frames are zero-padded.
pub fn frame_signal<T: Scalar>(
    samples: &[T],
    sample_rate_hz: u32,
    spec: &FrameSpec,
) -> Result<Vec<Vec<T>>, ProsodicError> {
    if samples.is_empty() {
        return Err(ProsodicError::EmptySignal);
    }
    let (len, hop) = spec.in_samples(sample_rate_hz)?;
    let window = spec.window.coefficients::<T>(len);
    let frames = (0..samples.len())
        .step_by(hop)
        .map(|start| {
            let end = (start + len).min(samples.len());
            let mut frame = vec![T::zero(); len];
            frame[..end - start].copy_from_slice(&samples[start..end]);
            for (x, w) in frame.iter_mut().zip(&window) {
                *x *= *w;
            }
            frame
        })
        .collect();
    Ok(frames)
}

/// Mean squared amplitude of a frame.
pub fn short_time_energy<T: Scalar>(frame: &[T]) -> T {
    if frame.is_empty() {
        return T::zero();
    }
    frame.iter().map(|&x| x * x).sum::<T>() / T::of_usize(frame.len())
}

pub fn hz_to_mel<T: Scalar>(hz: T) -> T {
    T::of(2595.0) * (T::one() + hz / T::of(700.0)).log10()
}

pub fn mel_to_hz<T: Scalar>(mel: T) -> T {
    T::of(700.0) * (T::of(10.0).powf(mel / T::of(2595.0)) - T::one())
}

/// Triangular filters equally spaced on the mel scale, each normalized to a
/// peak weight of one, defined over the bins `0..=fft_size/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    n_filters: usize,
    f_low_hz: T,
    f_high_hz: T,
    sample_rate_hz: u32,
    fft_size: usize,
    centers_hz: Vec<T>,
    weights: Vec<Vec<T>>,
}

impl<T: Scalar> MelFilterbank<T> {
    pub fn new(
        n_filters: usize,
        f_low_hz: T,
        f_high_hz: T,
        sample_rate_hz: u32,
        fft_size: usize,
    ) -> Result<Self, ProsodicError> {
        let nyquist = T::of(f64::from(sample_rate_hz) / 2.0);
        if n_filters == 0 {
            return Err(ProsodicError::InvalidFilterbank("zero filters".into()));
        }
        if fft_size < 2 {
            return Err(ProsodicError::InvalidFilterbank(format!(
                "fft size {fft_size}"
            )));
        }
        if !(f_low_hz >= T::zero() && f_low_hz < f_high_hz && f_high_hz <= nyquist) {
            return Err(ProsodicError::InvalidFilterbank(format!(
                "need 0 <= f_low < f_high <= {nyquist}, got [{f_low_hz}, {f_high_hz}]"
            )));
        }

        let mel_low = hz_to_mel(f_low_hz);
        let mel_step = (hz_to_mel(f_high_hz) - mel_low) / T::of_usize(n_filters + 1);
        let edges: Vec<T> = (0..n_filters + 2)
            .map(|i| mel_to_hz(mel_low + mel_step * T::of_usize(i)))
            .collect();

        let n_bins = fft_size / 2 + 1;
        let bin_hz = T::of(f64::from(sample_rate_hz)) / T::of_usize(fft_size);
        let mut weights = Vec::with_capacity(n_filters);
        for m in 0..n_filters {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut row: Vec<T> = (0..n_bins)
                .map(|k| {
                    let f = bin_hz * T::of_usize(k);
                    if f > left && f <= center {
                        (f - left) / (center - left)
                    } else if f > center && f < right {
                        (right - f) / (right - center)
                    } else {
                        T::zero()
                    }
                })
                .collect();
            let peak = row.iter().copied().fold(T::zero(), T::max);
            if peak > T::zero() {
                row.iter_mut().for_each(|w| *w /= peak);
            } else {
                // Filter narrower than the bin spacing: fall back to the nearest bin.
                let k = (center / bin_hz).round().to_usize().unwrap_or(0).min(n_bins - 1);
                row[k] = T::one();
            }
            weights.push(row);
        }

        Ok(MelFilterbank {
            n_filters,
            f_low_hz,
            f_high_hz,
            sample_rate_hz,
            fft_size,
            centers_hz: edges[1..=n_filters].to_vec(),
            weights,
        })
    }

    /// Filterbank over `[0, sample_rate/2]` sized for the given frame spec.
    pub fn for_frames(
        spec: &FrameSpec,
        sample_rate_hz: u32,
        n_filters: usize,
    ) -> Result<Self, ProsodicError> {
        Self::new(
            n_filters,
            T::zero(),
            T::of(f64::from(sample_rate_hz) / 2.0),
            sample_rate_hz,
            spec.fft_size(sample_rate_hz)?,
        )
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn f_range_hz(&self) -> (T, T) {
        (self.f_low_hz, self.f_high_hz)
    }

    pub fn centers_hz(&self) -> &[T] {
        &self.centers_hz
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    /// Mel-band energies of a power spectrum with `n_bins()` entries.
    pub fn apply(&self, power: &[T]) -> Vec<T> {
        debug_assert_eq!(power.len(), self.n_bins());
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(&w, &p)| w * p).sum())
            .collect()
    }
}

/// FFT-backed power spectrum for a fixed transform size.
#[derive(Clone)]
pub struct PowerSpectrum<T: Scalar> {
    fft: Arc<dyn Fft<T>>,
    size: usize,
}

impl<T: Scalar> std::fmt::Debug for PowerSpectrum<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PowerSpectrum").field("size", &self.size).finish()
    }
}

impl<T: Scalar> PowerSpectrum<T> {
    pub fn new(size: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(size);
        PowerSpectrum { fft, size }
    }

    /// `|X_k|²` for `k = 0..=size/2`; the frame is zero-padded (or truncated) to `size`.
    pub fn compute(&self, frame: &[T]) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = (0..self.size)
            .map(|i| Complex::new(frame.get(i).copied().unwrap_or_else(T::zero), T::zero()))
            .collect();
        self.fft.process(&mut buf);
        buf[..=self.size / 2].iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Stevens-law loudness from mel-band energies.
pub fn loudness_from_bands<T: Scalar>(bands: &[T]) -> T {
    let exponent = T::of(LOUDNESS_EXPONENT);
    bands.iter().map(|&e| e.max(T::zero()).powf(exponent)).sum()
}

/// Loudness of a single (already windowed) frame.
pub fn loudness<T: Scalar>(frame: &[T], bank: &MelFilterbank<T>) -> T {
    let power = PowerSpectrum::new(bank.fft_size()).compute(frame);
    loudness_from_bands(&bank.apply(&power))
}

/// Orthonormal DCT-II rows `1..=n_coeffs` over `n_inputs` points.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstralTransform<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> CepstralTransform<T> {
    pub fn new(n_inputs: usize, n_coeffs: usize) -> Self {
        let m = T::of_usize(n_inputs);
        let scale = (T::of(2.0) / m).sqrt();
        let rows = (1..=n_coeffs)
            .map(|k| {
                (0..n_inputs)
                    .map(|i| {
                        let angle = T::PI() * T::of_usize(k) * (T::of_usize(i) + T::of(0.5)) / m;
                        scale * angle.cos()
                    })
                    .collect()
            })
            .collect();
        CepstralTransform { rows }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// Per-frame descriptor tracks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameDescriptors<T> {
    pub energy: Vec<T>,
    pub loudness: Vec<T>,
    /// `n_frames × n_coeffs`.
    pub mfcc: Vec<Vec<T>>,
}

impl<T: Scalar> FrameDescriptors<T> {
    pub fn n_frames(&self) -> usize {
        self.energy.len()
    }

    pub fn extend(&mut self, other: FrameDescriptors<T>) {
        self.energy.extend(other.energy);
        self.loudness.extend(other.loudness);
        self.mfcc.extend(other.mfcc);
    }
}

/// A configured analysis chain for one sample rate.
#[derive(Debug, Clone)]
pub struct FrontEnd<T: Scalar> {
    spec: FrameSpec,
    bank: MelFilterbank<T>,
    spectrum: PowerSpectrum<T>,
    dct: CepstralTransform<T>,
    log_floor: T,
}

impl<T: Scalar> FrontEnd<T> {
    pub fn new(
        spec: FrameSpec,
        bank: MelFilterbank<T>,
        n_coeffs: usize,
        log_floor: T,
    ) -> Result<Self, ProsodicError> {
        if n_coeffs > bank.n_filters() {
            return Err(ProsodicError::TooManyCoefficients {
                requested: n_coeffs,
                available: bank.n_filters(),
            });
        }
        let fft_size = spec.fft_size(bank.sample_rate_hz())?;
        if fft_size != bank.fft_size() {
            return Err(ProsodicError::InvalidFilterbank(format!(
                "filterbank built for fft size {} but frames need {fft_size}",
                bank.fft_size()
            )));
        }
        Ok(FrontEnd {
            spec,
            spectrum: PowerSpectrum::new(fft_size),
            dct: CepstralTransform::new(bank.n_filters(), n_coeffs),
            bank,
            log_floor,
        })
    }

    pub fn bank(&self) -> &MelFilterbank<T> {
        &self.bank
    }

    pub fn analyze(&self, samples: &[T]) -> Result<FrameDescriptors<T>, ProsodicError> {
        let frames = frame_signal(samples, self.bank.sample_rate_hz(), &self.spec)?;
        let mut out = FrameDescriptors {
            energy: Vec::with_capacity(frames.len()),
            loudness: Vec::with_capacity(frames.len()),
            mfcc: Vec::with_capacity(frames.len()),
        };
        for frame in &frames {
            let bands = self.bank.apply(&self.spectrum.compute(frame));
            let log_bands: Vec<T> = bands.iter().map(|&e| e.max(self.log_floor).ln()).collect();
            out.energy.push(short_time_energy(frame));
            out.loudness.push(loudness_from_bands(&bands));
            out.mfcc.push(self.dct.apply(&log_bands));
        }
        Ok(out)
    }
}

/// MFCC matrix (`n_frames × n_coeffs`, c0 excluded) with the default log floor.
pub fn mfcc<T: Scalar>(
    samples: &[T],
    spec: &FrameSpec,
    bank: &MelFilterbank<T>,
    n_coeffs: usize,
) -> Result<Vec<Vec<T>>, ProsodicError> {
    let front = FrontEnd::new(*spec, bank.clone(), n_coeffs, T::of(DEFAULT_LOG_FLOOR))?;
    Ok(front.analyze(samples)?.mfcc)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Scalar> Stat<T> {
    fn of(xs: &[T]) -> Self {
        Stat {
            mean: mean(xs),
            std: population_std(xs),
        }
    }
}

/// Session-level prosodic statistics in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodicFeatures<T> {
    pub energy: Stat<T>,
    pub loudness: Stat<T>,
    /// `mfcc[k - 1]` holds coefficient k.
    pub mfcc: Vec<Stat<T>>,
    pub talk_ratio: T,
    pub n_frames: usize,
}

impl<T: Scalar> ProsodicFeatures<T> {
    /// Canonical feature names for `n_coeffs` cepstral coefficients.
    pub fn schema(n_coeffs: usize) -> Vec<String> {
        let mut names = vec![
            "energy_mean".to_string(),
            "energy_std".to_string(),
            "loudness_mean".to_string(),
            "loudness_std".to_string(),
        ];
        for k in 1..=n_coeffs {
            names.push(format!("mfcc_{k}_mean"));
            names.push(format!("mfcc_{k}_std"));
        }
        names.push("talk_ratio".into());
        names.push("n_frames".into());
        names
    }

    pub fn names(&self) -> Vec<String> {
        Self::schema(self.mfcc.len())
    }

    pub fn values(&self) -> Vec<T> {
        let mut v = vec![self.energy.mean, self.energy.std, self.loudness.mean, self.loudness.std];
        for s in &self.mfcc {
            v.push(s.mean);
            v.push(s.std);
        }
        v.push(self.talk_ratio);
        v.push(T::of_usize(self.n_frames));
        v
    }
}

impl<T: Scalar> Serialize for ProsodicFeatures<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let names = self.names();
        let values = self.values();
        let mut map = serializer.serialize_map(Some(names.len()))?;
        for (name, value) in names.iter().zip(&values) {
            if name == "n_frames" {
                map.serialize_entry(name, &self.n_frames)?;
            } else {
                map.serialize_entry(name, value)?;
            }
        }
        map.end()
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ProsodicFeatures<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FlatVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Scalar> Visitor<'de> for FlatVisitor<T> {
            type Value = ProsodicFeatures<T>;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a flat map of prosodic features")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut entries: Vec<(String, f64)> = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    entries.push((k, v));
                }
                let n_coeffs = entries
                    .iter()
                    .filter(|(k, _)| k.starts_with("mfcc_") && k.ends_with("_mean"))
                    .count();
                let schema = ProsodicFeatures::<T>::schema(n_coeffs);
                if entries.len() != schema.len() {
                    return Err(de::Error::invalid_length(entries.len(), &"canonical schema"));
                }
                let lookup = |name: &str| -> Result<f64, A::Error> {
                    entries
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| de::Error::missing_field("prosodic feature"))
                };
                let stat = |base: &str| -> Result<Stat<T>, A::Error> {
                    Ok(Stat {
                        mean: T::of(lookup(&format!("{base}_mean"))?),
                        std: T::of(lookup(&format!("{base}_std"))?),
                    })
                };
                let n_frames = lookup("n_frames")?;
                if n_frames < 0.0 || n_frames.fract() != 0.0 {
                    return Err(de::Error::custom("n_frames must be a non-negative integer"));
                }
                Ok(ProsodicFeatures {
                    energy: stat("energy")?,
                    loudness: stat("loudness")?,
                    mfcc: (1..=n_coeffs)
                        .map(|k| stat(&format!("mfcc_{k}")))
                        .collect::<Result<_, _>>()?,
                    talk_ratio: T::of(lookup("talk_ratio")?),
                    n_frames: n_frames as usize,
                })
            }
        }

        deserializer.deserialize_map(FlatVisitor(std::marker::PhantomData))
    }
}

/// Mean/std of every descriptor plus the fraction of frames whose energy
/// exceeds `energy_threshold`.
pub fn aggregate<T: Scalar>(
    descriptors: &FrameDescriptors<T>,
    energy_threshold: T,
) -> Result<ProsodicFeatures<T>, ProsodicError> {
    let n = descriptors.n_frames();
    if n == 0 {
        return Err(ProsodicError::EmptySignal);
    }
    let n_coeffs = descriptors.mfcc.first().map_or(0, Vec::len);
    let mfcc = (0..n_coeffs)
        .map(|k| {
            let column: Vec<T> = descriptors.mfcc.iter().map(|row| row[k]).collect();
            Stat::of(&column)
        })
        .collect();
    let talking = descriptors
        .energy
        .iter()
        .filter(|&&e| e > energy_threshold)
        .count();
    Ok(ProsodicFeatures {
        energy: Stat::of(&descriptors.energy),
        loudness: Stat::of(&descriptors.loudness),
        mfcc,
        talk_ratio: T::of_usize(talking) / T::of_usize(n),
        n_frames: n,
    })
}

/// Which speaker tracks feed the prosodic features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackSelection {
    #[default]
    Instructor,
    Student,
    Both,
}

impl TrackSelection {
    fn roles(self) -> &'static [Role] {
        match self {
            TrackSelection::Instructor => &[Role::Instructor],
            TrackSelection::Student => &[Role::Student],
            TrackSelection::Both => &[Role::Instructor, Role::Student],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProsodicConfig {
    pub frame: FrameSpec,
    pub n_filters: usize,
    pub n_coeffs: usize,
    pub log_floor: f64,
    pub talk_threshold: f64,
    pub tracks: TrackSelection,
}

impl Default for ProsodicConfig {
    fn default() -> Self {
        ProsodicConfig {
            frame: FrameSpec::default(),
            n_filters: DEFAULT_N_FILTERS,
            n_coeffs: DEFAULT_N_COEFFS,
            log_floor: DEFAULT_LOG_FLOOR,
            talk_threshold: DEFAULT_TALK_THRESHOLD,
            tracks: TrackSelection::Instructor,
        }
    }
}

impl ProsodicConfig {
    pub fn front_end<T: Scalar>(&self, sample_rate_hz: u32) -> Result<FrontEnd<T>, ProsodicError> {
        let bank = MelFilterbank::for_frames(&self.frame, sample_rate_hz, self.n_filters)?;
        FrontEnd::new(self.frame, bank, self.n_coeffs, T::of(self.log_floor))
    }

    pub fn analyze_track<T: Scalar>(
        &self,
        track: &AudioTrack,
    ) -> Result<FrameDescriptors<T>, ProsodicError> {
        let samples: Vec<T> = track.samples.iter().map(|&s| T::of(s)).collect();
        self.front_end(track.sample_rate_hz)?.analyze(&samples)
    }
}

/// Prosodic features for the configured speaker tracks of a session.
pub fn extract_prosodic<T: Scalar>(
    record: &SessionRecord,
    config: &ProsodicConfig,
) -> Result<ProsodicFeatures<T>, ProsodicError> {
    let mut all = FrameDescriptors::default();
    for &role in config.tracks.roles() {
        let track = record
            .track(role)
            .ok_or_else(|| ProsodicError::MissingTrack(role.to_string()))?;
        all.extend(config.analyze_track(track)?);
    }
    aggregate(&all, T::of(config.talk_threshold))
}
