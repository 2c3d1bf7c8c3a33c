//! Recording-level preprocessing and window-to-image rendering shared by the
//! training cache, the CNN detector and the baseline detector.

use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioClip, DenoiseParams};
use crate::dsp::{self, FilterSpec, WhiteningCurve, WhiteningParams};
use crate::spectrogram::{self, SpectroImage, Spectrogram, StftParams, MODEL_INPUT_SIZE};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrder {
    #[default]
    BandpassThenWhiten,
    WhitenThenBandpass,
}

/// Channel averaging always runs first; every other stage can be disabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub remove_bias: bool,
    pub denoise: Option<DenoiseParams>,
    pub bandpass: Option<FilterSpec>,
    pub whitening: Option<WhiteningParams>,
    pub order: StageOrder,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            remove_bias: true,
            denoise: None,
            bandpass: Some(FilterSpec::default()),
            whitening: Some(WhiteningParams::default()),
            order: StageOrder::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn none() -> Self {
        Self { remove_bias: false, denoise: None, bandpass: None, whitening: None, order: StageOrder::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrogramConfig {
    pub stft: StftParams,
    pub floor_db: f64,
    pub crop_khz: (f64, f64),
    pub window_s: f64,
    pub shift_s: f64,
    pub image_size: usize,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            stft: StftParams::default(),
            floor_db: -120.0,
            crop_khz: (3.0, 20.0),
            window_s: 0.8,
            shift_s: 0.4,
            image_size: MODEL_INPUT_SIZE,
        }
    }
}

/// Runs the configured chain. A supplied whitening curve replaces estimation
/// from the clip itself; whitening is skipped only when neither is available.
pub fn preprocess(clip: &AudioClip, config: &PreprocessConfig, curve: Option<&WhiteningCurve>) -> Result<AudioClip, Error> {
    Ok(preprocess_with_curve(clip, config, curve)?.0)
}

/// [`preprocess`], also returning the whitening curve that was applied.
pub fn preprocess_with_curve(
    clip: &AudioClip,
    config: &PreprocessConfig,
    curve: Option<&WhiteningCurve>,
) -> Result<(AudioClip, Option<WhiteningCurve>), Error> {
    let mut x = audio::average_channels(clip);
    if config.remove_bias {
        x = audio::remove_dc_bias(&x);
    }
    if let Some(params) = config.denoise {
        x = audio::denoise_transients(&x, params)?;
    }
    let bandpass = |x: AudioClip| -> Result<AudioClip, Error> {
        match &config.bandpass {
            Some(spec) => {
                let filter = dsp::design_bandpass(spec, x.sample_rate() as f64)?;
                Ok(dsp::apply_filter_zero_phase(&x, &filter)?)
            }
            None => Ok(x),
        }
    };
    let whiten = |x: AudioClip| -> Result<(AudioClip, Option<WhiteningCurve>), Error> {
        let c = match (curve, &config.whitening) {
            (Some(c), _) => c.clone(),
            (None, Some(params)) => dsp::estimate_whitening(&x, params)?,
            (None, None) => return Ok((x, None)),
        };
        Ok((dsp::apply_whitening(&x, &c)?, Some(c)))
    };
    match config.order {
        StageOrder::BandpassThenWhiten => whiten(bandpass(x)?),
        StageOrder::WhitenThenBandpass => {
            let (w, c) = whiten(x)?;
            Ok((bandpass(w)?, c))
        }
    }
}

/// Power spectrogram in dB, cropped to the configured band.
pub fn cropped_db_spectrogram(clip: &AudioClip, config: &SpectrogramConfig) -> Result<Spectrogram, Error> {
    let spec = spectrogram::stft(clip, &config.stft)?;
    let db = spectrogram::power_to_db(&spec, config.floor_db);
    Ok(spectrogram::crop_frequency(&db, config.crop_khz.0, config.crop_khz.1)?)
}

/// Renders one model image per sliding window; `window_s` on each image is
/// absolute time within the clip.
pub fn window_images(clip: &AudioClip, config: &SpectrogramConfig) -> Result<Vec<SpectroImage>, Error> {
    spectrogram::slide_windows(clip, config.window_s, config.shift_s)
        .into_iter()
        .map(|(seg, start)| {
            let spec = cropped_db_spectrogram(&seg, config)?;
            let end = start + seg.duration_s();
            Ok(spectrogram::render_to_image(&spec, config.image_size, (start, end), clip.source_id()))
        })
        .collect()
}
