#![allow(dead_code)]

pub mod oracle;
pub mod reference;

use sovc_core::model::{CaptionModel, ImageF, ModelConfig, ModelInput, Vocabulary};

/// Overwrites every parameter with a smooth deterministic pattern that does
/// not depend on the random initializer.
pub fn fixture_weights(model: &mut CaptionModel) {
    let names: Vec<String> = model.params.names().to_vec();
    for (i, name) in names.iter().enumerate() {
        let m = model.params.get_mut(name);
        for (k, v) in m.data.iter_mut().enumerate() {
            let s = (1.3 * k as f64 + 0.7 * i as f64).sin();
            *v = if name.ends_with(".g") { 1.0 + 0.1 * s } else { 0.3 * s };
        }
    }
}

pub fn vocab() -> Vocabulary {
    Vocabulary::build(&["a red ball is moving left", "a blue box is moving right", "spare"], 1)
}

pub fn model(config: ModelConfig) -> CaptionModel {
    CaptionModel::new(config, vocab(), 11).unwrap()
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        patch_size: 4,
        d_model: 16,
        encoder_layers: 1,
        decoder_layers: 1,
        heads: 2,
        num_soft_tokens: 2,
        subject_grid: 2,
        frame_side: 8,
        max_caption_len: 8,
        num_frames: 2,
        soft_prompt_init_std: 0.02,
    }
}

/// Smooth colour ramp.
pub fn gradient_image(h: usize, w: usize, phase: f64) -> ImageF {
    let mut data = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            data.push(x as f64 / w as f64);
            data.push(y as f64 / h as f64);
            data.push(0.5 + 0.5 * (phase + 0.3 * (x + 2 * y) as f64).sin());
        }
    }
    ImageF::new(h, w, data)
}

pub fn input(config: &ModelConfig, phase: f64) -> ModelInput {
    let r = config.frame_side;
    ModelInput {
        frames: (0..config.num_frames).map(|t| gradient_image(r, r, phase + t as f64)).collect(),
        crop: gradient_image(5, 7, phase + 0.5),
    }
}
