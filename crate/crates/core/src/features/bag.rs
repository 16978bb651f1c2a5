use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lab_histogram, lbp_histogram, mr8_histogram, mr8_responses, FeatureConfig, LabPixel, Mr8Responses};
use crate::color::image_to_lab;
use crate::error::{Error, Result};
use crate::imaging::{
    filter_regions, grid_regions, lesion_mask, meanshift_segment, to_gray, GrayImage, ImageRgb, LesionMask,
    MeanShiftParams, Region, RegionMap,
};
use crate::mil::{Bag, Instance, Label};

pub const BAG_FILE_VERSION: u32 = 1;

/// How the lesion is cut into instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentationMode {
    MeanShift(MeanShiftParams),
    Grid { cell: u32 },
}

impl Default for SegmentationMode {
    fn default() -> Self {
        SegmentationMode::MeanShift(MeanShiftParams::default())
    }
}

/// Per-image data shared by all regions: Lab pixels, grey plane and MR8 responses.
pub struct ImageFeatures<'a> {
    cfg: &'a FeatureConfig,
    lab: Vec<LabPixel>,
    gray: GrayImage,
    mr8: Option<Mr8Responses>,
}

impl<'a> ImageFeatures<'a> {
    pub fn new(img: &ImageRgb, cfg: &'a FeatureConfig) -> Result<ImageFeatures<'a>> {
        cfg.validate()?;
        let gray = to_gray(img);
        let mr8 = if cfg.include_texture {
            Some(mr8_responses(&gray, cfg.mr8_weber)?)
        } else {
            None
        };
        let lab = if cfg.include_color { image_to_lab(&img.pixels) } else { Vec::new() };
        Ok(ImageFeatures { cfg, lab, gray, mr8 })
    }

    /// `[lab | lbp | mr8]` over the enabled families. The flag reports an all-zero LBP block.
    pub fn region_vector(&self, region: &Region) -> Result<(Vec<f64>, bool)> {
        if region.pixels.is_empty() {
            return Err(Error::Contract(format!("region {} has no pixels", region.id)));
        }
        let mut out = Vec::with_capacity(self.cfg.dim());
        let mut degenerate = false;
        if self.cfg.include_color {
            let px: Vec<LabPixel> = region.pixels.iter().map(|&p| self.lab[p as usize]).collect();
            out.extend(lab_histogram(&px, self.cfg)?);
        }
        if let Some(mr8) = &self.mr8 {
            let lbp = lbp_histogram(&self.gray, &region.pixels, self.cfg);
            degenerate = lbp.degenerate;
            out.extend(lbp.values);
            out.extend(mr8_histogram(mr8, &region.pixels, self.cfg)?);
        }
        Ok((out, degenerate))
    }

    pub fn instance(&self, region: &Region) -> Result<Instance> {
        let (features, degenerate) = self.region_vector(region)?;
        if degenerate {
            log::warn!("region {} has no pixel with a full LBP neighbourhood", region.id);
        }
        Ok(Instance {
            features,
            region_id: Some(region.id),
        })
    }
}

/// A bag together with the segmentation that produced it.
#[derive(Debug, Clone)]
pub struct ImageBag {
    pub bag: Bag,
    /// All regions, with `in_lesion` marking the ones that became instances.
    pub regions: RegionMap,
    pub mask: LesionMask,
}

impl ImageBag {
    /// Pixel mask of the regions whose instance label is positive.
    pub fn positive_pixels(&self, instance_labels: &[Label]) -> Vec<bool> {
        let mut out = vec![false; self.regions.labels.len()];
        for (inst, &label) in self.bag.instances.iter().zip(instance_labels) {
            if label != Label::Positive {
                continue;
            }
            if let Some(region) = inst.region_id.and_then(|id| self.regions.region(id)) {
                for &p in &region.pixels {
                    out[p as usize] = true;
                }
            }
        }
        out
    }
}

/// Lesion mask, segmentation, lesion filtering and one instance per kept region (ascending id).
pub fn bag_from_image(
    img: &ImageRgb,
    bag_id: &str,
    label: Option<Label>,
    cfg: &FeatureConfig,
    mode: &SegmentationMode,
) -> Result<ImageBag> {
    let mask = match lesion_mask(img) {
        Ok(m) => m,
        Err(Error::EmptyLesion(why)) => return Err(Error::EmptyBag(format!("{bag_id}: {why}"))),
        Err(e) => return Err(e),
    };
    let regions = match mode {
        SegmentationMode::MeanShift(p) => meanshift_segment(img, p)?,
        SegmentationMode::Grid { cell } => grid_regions(img, &mask, *cell)?,
    };
    let regions = filter_regions(&regions, &mask)?;
    let kept: Vec<&Region> = regions.lesion_regions().collect();
    if kept.is_empty() {
        return Err(Error::EmptyBag(format!("{bag_id}: no region lies inside the lesion")));
    }
    let features = ImageFeatures::new(img, cfg)?;
    let instances = kept.par_iter().map(|r| features.instance(r)).collect::<Result<Vec<_>>>()?;
    Ok(ImageBag {
        bag: Bag::new(bag_id, instances, label)?,
        regions,
        mask,
    })
}

/// On-disk bag: instances with their region ids and the fingerprint of the extracting config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BagFile {
    pub version: u32,
    pub bag_id: String,
    pub label: Option<Label>,
    pub m: usize,
    #[serde(rename = "D")]
    pub dim: usize,
    pub fingerprint: String,
    pub instances: Vec<Instance>,
    /// Known instance labels, when the data is synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<Label>>,
}

impl BagFile {
    pub fn new(bag: &Bag, fingerprint: &str) -> BagFile {
        BagFile {
            version: BAG_FILE_VERSION,
            bag_id: bag.bag_id.clone(),
            label: bag.label,
            m: bag.len(),
            dim: bag.dim(),
            fingerprint: fingerprint.to_string(),
            instances: bag.instances.clone(),
            truth: None,
        }
    }

    pub fn to_bag(&self) -> Result<Bag> {
        Bag::new(self.bag_id.clone(), self.instances.clone(), self.label)
    }
}

pub fn write_bag_file(path: &Path, file: &BagFile) -> Result<()> {
    let text = serde_json::to_string(file).map_err(|e| Error::format(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_bag_file(path: &Path) -> Result<BagFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: BagFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    if file.version != BAG_FILE_VERSION {
        return Err(Error::format(path, format!("unsupported bag file version {}", file.version)));
    }
    if file.m != file.instances.len() {
        return Err(Error::format(path, format!("m = {} but {} instances", file.m, file.instances.len())));
    }
    if let Some(bad) = file.instances.iter().find(|i| i.dim() != file.dim) {
        return Err(Error::Dimension {
            expected: file.dim,
            actual: bad.dim(),
        });
    }
    if let Some(t) = &file.truth {
        if t.len() != file.m {
            return Err(Error::format(path, "truth length differs from m"));
        }
    }
    Ok(file)
}
