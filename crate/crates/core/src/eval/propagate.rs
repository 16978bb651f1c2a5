use crate::baselines::DetectionMask;
use crate::error::{Error, Result};
use crate::imaging::LesionMask;
use crate::mil::Label;

/// Image label from a pixel detection: positive when the detected pixels inside the lesion number
/// at least one and at least `min_fraction` of the lesion area.
pub fn propagate_labels(det: &DetectionMask, lesion: &LesionMask, min_fraction: f64) -> Result<Label> {
    if det.width != lesion.width || det.height != lesion.height {
        return Err(Error::Dimension {
            expected: lesion.inside.len(),
            actual: det.detected.len(),
        });
    }
    let inside = det.detected.iter().zip(&lesion.inside).filter(|(&d, &l)| d && l).count();
    let positive = inside > 0 && inside as f64 >= min_fraction * lesion.lesion_area as f64;
    Ok(if positive { Label::Positive } else { Label::Negative })
}
