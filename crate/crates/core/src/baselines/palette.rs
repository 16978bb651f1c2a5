use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DetectionMask;
use crate::color::{image_to_lab, LabPixel};
use crate::error::{Error, Result};
use crate::imaging::{ImageRgb, RegionMap};

pub const PALETTE_FILE_VERSION: u32 = 1;

const DEFAULT_MATCH_THRESHOLD: f64 = 10.0;
const COVERAGE: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MunsellPatch {
    #[serde(rename = "L")]
    pub l: f64,
    pub a: f64,
    pub b: f64,
    pub id: String,
    pub is_bws: bool,
}

impl MunsellPatch {
    pub fn lab(&self) -> LabPixel {
        LabPixel::new(self.l, self.a, self.b)
    }
}

fn default_threshold() -> f64 {
    DEFAULT_MATCH_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MunsellPalette {
    #[serde(default = "palette_version")]
    pub version: u32,
    pub patches: Vec<MunsellPatch>,
    #[serde(default = "default_threshold")]
    pub match_threshold: f64,
}

fn palette_version() -> u32 {
    PALETTE_FILE_VERSION
}

/// Index and Euclidean distance of the nearest entry; ties go to the lower index.
fn nearest<'a>(points: impl Iterator<Item = LabPixel> + 'a, q: &LabPixel) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.enumerate() {
        let d = p.distance_sq(q);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, d)| (i, d.sqrt()))
}

impl MunsellPalette {
    pub fn new(patches: Vec<MunsellPatch>, match_threshold: f64) -> Result<MunsellPalette> {
        let p = MunsellPalette {
            version: PALETTE_FILE_VERSION,
            patches,
            match_threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.patches.iter().any(|p| p.is_bws) {
            return Err(Error::Config("palette has no blue-whitish patch".into()));
        }
        if let Some(p) = self.patches.iter().find(|p| !(p.l.is_finite() && p.a.is_finite() && p.b.is_finite())) {
            return Err(Error::Config(format!("palette patch {} has non-finite Lab values", p.id)));
        }
        if !(self.match_threshold >= 0.0) {
            return Err(Error::Config("match_threshold must be non-negative".into()));
        }
        Ok(())
    }

    pub fn nearest(&self, q: &LabPixel) -> Option<(usize, f64)> {
        nearest(self.patches.iter().map(MunsellPatch::lab), q)
    }

    /// Whether a colour falls on a blue-whitish patch within the match threshold.
    pub fn matches(&self, q: &LabPixel) -> bool {
        self.nearest(q)
            .is_some_and(|(i, d)| d <= self.match_threshold && self.patches[i].is_bws)
    }
}

/// Munsell patches with their Lab coordinates, used to quantize annotated pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct MunsellTable {
    pub ids: Vec<String>,
    pub colors: Vec<LabPixel>,
}

#[derive(Deserialize)]
struct TableRow {
    id: String,
    #[serde(rename = "L")]
    l: f64,
    a: f64,
    b: f64,
}

impl MunsellTable {
    pub fn new(rows: Vec<(String, LabPixel)>) -> Result<MunsellTable> {
        if rows.is_empty() {
            return Err(Error::Config("Munsell lookup table is empty".into()));
        }
        let (ids, colors) = rows.into_iter().unzip();
        Ok(MunsellTable { ids, colors })
    }

    /// Reads `id,L,a,b` rows from a CSV file with a header, or a JSON array of such objects.
    pub fn load(path: &Path) -> Result<MunsellTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let rows: Vec<TableRow> = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::format(path, e))?
        } else {
            csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes())
                .deserialize()
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, e))?
        };
        MunsellTable::new(rows.into_iter().map(|r| (r.id, LabPixel::new(r.l, r.a, r.b))).collect())
    }

    pub fn nearest(&self, q: &LabPixel) -> (usize, f64) {
        nearest(self.colors.iter().copied(), q).expect("table is non-empty")
    }
}

/// Quantizes annotated pixels to their nearest table patch, keeps the most frequent blue-whitish
/// patches up to 98% cumulative frequency, then removes any patch that also describes a pixel
/// annotated as not blue-whitish.
pub fn palette_build(annotated: &[(LabPixel, bool)], table: &MunsellTable, match_threshold: f64) -> Result<MunsellPalette> {
    let bws_total = annotated.iter().filter(|(_, bws)| *bws).count();
    if bws_total == 0 {
        return Err(Error::Contract("palette construction needs at least one blue-whitish pixel".into()));
    }
    let assigned: Vec<usize> = annotated.par_iter().map(|(lab, _)| table.nearest(lab).0).collect();
    let mut freq = vec![0usize; table.ids.len()];
    let mut shared = HashSet::new();
    for (&patch, &(_, bws)) in assigned.iter().zip(annotated) {
        if bws {
            freq[patch] += 1;
        } else {
            shared.insert(patch);
        }
    }
    let mut order: Vec<usize> = (0..freq.len()).filter(|&i| freq[i] > 0).collect();
    order.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(a.cmp(&b)));
    let mut covered = 0usize;
    let mut kept = Vec::new();
    for i in order {
        if covered as f64 >= COVERAGE * bws_total as f64 {
            break;
        }
        covered += freq[i];
        kept.push(i);
    }
    let patches: Vec<MunsellPatch> = kept
        .into_iter()
        .filter(|i| !shared.contains(i))
        .map(|i| {
            let c = table.colors[i];
            MunsellPatch {
                l: c.l,
                a: c.a,
                b: c.b,
                id: table.ids[i].clone(),
                is_bws: true,
            }
        })
        .collect();
    if patches.is_empty() {
        return Err(Error::Contract("every blue-whitish patch also describes non blue-whitish pixels".into()));
    }
    MunsellPalette::new(patches, match_threshold)
}

/// Marks every region whose mean Lab colour matches a blue-whitish palette patch.
pub fn palette_detect(img: &ImageRgb, regions: &RegionMap, palette: &MunsellPalette) -> Result<DetectionMask> {
    if img.width != regions.width || img.height != regions.height {
        return Err(Error::Dimension {
            expected: img.len(),
            actual: regions.labels.len(),
        });
    }
    if palette.patches.is_empty() {
        return Err(Error::Contract("empty palette".into()));
    }
    let lab = image_to_lab(&img.pixels);
    let marked: Vec<bool> = regions
        .regions
        .par_iter()
        .map(|r| {
            let n = r.pixels.len() as f64;
            let (l, a, b) = r.pixels.iter().fold((0.0, 0.0, 0.0), |(l, a, b), &p| {
                let c = lab[p as usize];
                (l + c.l, a + c.a, b + c.b)
            });
            palette.matches(&LabPixel::new(l / n, a / n, b / n))
        })
        .collect();
    let mut out = DetectionMask::empty(img.width, img.height);
    for (r, _) in regions.regions.iter().zip(&marked).filter(|(_, &m)| m) {
        for &p in &r.pixels {
            out.detected[p as usize] = true;
        }
    }
    Ok(out)
}

pub fn write_palette(path: &Path, palette: &MunsellPalette) -> Result<()> {
    let text = serde_json::to_string_pretty(palette).map_err(|e| Error::format(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_palette(path: &Path) -> Result<MunsellPalette> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("palette {}: {e}", path.display())))?;
    let palette: MunsellPalette = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    if palette.version != PALETTE_FILE_VERSION {
        return Err(Error::format(path, format!("unsupported palette version {}", palette.version)));
    }
    palette.validate()?;
    Ok(palette)
}
