use super::{ImageRgb, LesionMask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: u32,
    /// Row-major pixel indices in ascending order.
    pub pixels: Vec<u32>,
    pub centroid: (f64, f64),
    pub area: usize,
    pub in_lesion: bool,
}

/// Partition of an image into regions. Id 0 marks excluded pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    /// Sorted by ascending id.
    pub regions: Vec<Region>,
}

impl RegionMap {
    /// Builds region records from per-pixel ids. Ids need not be contiguous.
    pub fn from_labels(width: u32, height: u32, labels: Vec<u32>) -> Result<RegionMap> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::Dimension {
                expected: width as usize * height as usize,
                actual: labels.len(),
            });
        }
        let mut by_id: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
        for (i, &id) in labels.iter().enumerate() {
            if id != 0 {
                by_id.entry(id).or_default().push(i as u32);
            }
        }
        let w = width as usize;
        let regions = by_id
            .into_iter()
            .map(|(id, pixels)| {
                let area = pixels.len();
                let (sx, sy) = pixels.iter().fold((0.0, 0.0), |(sx, sy), &p| {
                    (sx + (p as usize % w) as f64, sy + (p as usize / w) as f64)
                });
                Region {
                    id,
                    centroid: (sx / area as f64, sy / area as f64),
                    area,
                    pixels,
                    in_lesion: true,
                }
            })
            .collect();
        Ok(RegionMap {
            width,
            height,
            labels,
            regions,
        })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn lesion_regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.in_lesion)
    }

    pub fn region(&self, id: u32) -> Option<&Region> {
        self.regions
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.regions[i])
    }
}

/// Marks a region as inside the lesion when at least half of its pixels are.
pub fn filter_regions(rm: &RegionMap, mask: &LesionMask) -> Result<RegionMap> {
    if rm.width != mask.width || rm.height != mask.height {
        return Err(Error::Dimension {
            expected: rm.labels.len(),
            actual: mask.inside.len(),
        });
    }
    let mut out = rm.clone();
    for region in &mut out.regions {
        let inside = region.pixels.iter().filter(|&&p| mask.inside[p as usize]).count();
        region.in_lesion = 2 * inside >= region.area;
    }
    Ok(out)
}

/// Regular `cell x cell` windows over the lesion's bounding box; windows with less than half of
/// their pixels in the lesion are excluded (id 0).
pub fn grid_regions(img: &ImageRgb, mask: &LesionMask, cell: u32) -> Result<RegionMap> {
    if cell < 4 {
        return Err(Error::Contract(format!("grid cell must be at least 4 pixels, got {cell}")));
    }
    if img.width != mask.width || img.height != mask.height {
        return Err(Error::Dimension {
            expected: img.len(),
            actual: mask.inside.len(),
        });
    }
    let Some((x0, y0, x1, y1)) = mask.bounding_box() else {
        return Err(Error::Contract("grid regions need a non-empty lesion mask".into()));
    };
    let w = img.width as usize;
    let mut labels = vec![0u32; img.len()];
    let mut next_id = 1u32;
    for wy in (y0..y1).step_by(cell as usize) {
        for wx in (x0..x1).step_by(cell as usize) {
            let (ex, ey) = ((wx + cell).min(x1), (wy + cell).min(y1));
            let total = ((ex - wx) * (ey - wy)) as usize;
            let inside = (wy..ey)
                .flat_map(|y| (wx..ex).map(move |x| (x, y)))
                .filter(|&(x, y)| mask.contains(x, y))
                .count();
            if 2 * inside < total {
                continue;
            }
            for y in wy..ey {
                for x in wx..ex {
                    labels[y as usize * w + x as usize] = next_id;
                }
            }
            next_id += 1;
        }
    }
    RegionMap::from_labels(img.width, img.height, labels)
}
