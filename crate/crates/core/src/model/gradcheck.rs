use serde::{Deserialize, Serialize};

use super::network::CaptionModel;
use super::train::{batch_gradients, batch_loss, TrainExample};
use crate::Result;

/// Parameters whose gradients are checked by default: soft prompts, patch
/// embedding and subject encoder.
pub const CHECKED_PARAMS: [&str; 5] = ["soft_prompt", "patch.w", "patch.b", "subject.w", "subject.b"];

/// Denominator floor of the relative error, so that entries whose true
/// gradient is (near) zero are judged by absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub epsilon: f64,
    pub max_rel_error: f64,
    /// `‖analytic − numeric‖ / ‖analytic‖` over every checked entry.
    pub relative_l2_error: f64,
    pub params: Vec<ParamCheck>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Central-difference check of the mean token loss on `example` for the
/// [`CHECKED_PARAMS`] present in the model.
pub fn gradcheck(model: &CaptionModel, example: &TrainExample, epsilon: f64) -> Result<GradcheckReport> {
    let names: Vec<&str> = CHECKED_PARAMS
        .iter()
        .copied()
        .filter(|n| model.params.index_of(n).is_some())
        .collect();
    gradcheck_params(model, example, epsilon, &names, usize::MAX)
}

/// Checks at most `max_entries` evenly strided entries of each named
/// parameter.
pub fn gradcheck_params(
    model: &CaptionModel,
    example: &TrainExample,
    epsilon: f64,
    names: &[&str],
    max_entries: usize,
) -> Result<GradcheckReport> {
    let batch = std::slice::from_ref(example);
    let (_, grads) = batch_gradients(model, batch)?;
    let mut probe = model.clone();
    let mut params = Vec::new();
    let (mut diff2, mut norm2) = (0.0, 0.0);
    for name in names {
        let idx = model.params.id(name);
        let len = model.params.value(idx).len();
        let stride = len.div_ceil(max_entries.max(1)).max(1);
        let mut check = ParamCheck {
            name: name.to_string(),
            entries: 0,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
        };
        for k in (0..len).step_by(stride) {
            let original = model.params.value(idx).data[k];
            probe.params.value_mut(idx).data[k] = original + epsilon;
            let plus = batch_loss(&probe, batch)?;
            probe.params.value_mut(idx).data[k] = original - epsilon;
            let minus = batch_loss(&probe, batch)?;
            probe.params.value_mut(idx).data[k] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = grads[idx].as_ref().map_or(0.0, |g| g.data[k]);
            check.entries += 1;
            check.max_abs_error = check.max_abs_error.max((analytic - numeric).abs());
            check.max_rel_error = check.max_rel_error.max(relative_error(analytic, numeric));
            diff2 += (analytic - numeric).powi(2);
            norm2 += analytic * analytic;
        }
        params.push(check);
    }
    Ok(GradcheckReport {
        epsilon,
        max_rel_error: params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max),
        relative_l2_error: if norm2 > 0.0 { (diff2 / norm2).sqrt() } else { diff2.sqrt() },
        params,
    })
}
