//! The 308-component handcrafted feature vector.
//!
//! Six transform families each feed the fourteen [`crate::stats`] measures:
//!
//! | group   | blocks                          | features |
//! |---------|---------------------------------|----------|
//! | texture | raw pixels                      | 14       |
//! | glcm    | 0°, 45°, 90°, 135° planes       | 56       |
//! | gldm    | 0°, 90°, 180°, 270° histograms  | 56       |
//! | fft     | floored magnitude spectrum      | 14       |
//! | wavelet | A1 H1 V1 D1 A2 H2 V2 D2         | 112      |
//! | lbp     | radii 2, 3, 5, 7                | 56       |

pub mod glcm;
pub mod gldm;
pub mod lbp;
pub mod spectrum;
pub mod wavelet;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use self::glcm::{glcm_features, glcm_matrix, GlcmDirection, GlcmMatrix};
pub use self::gldm::{gldm_features, gldm_histogram, GldmDirection, GldmHistogram};
pub use self::lbp::{lbp_codes, lbp_features, LBP_RADII};
pub use self::spectrum::{centered_magnitude_spectrum, fft_features};
pub use self::wavelet::{haar_dwt2, wavelet_features, Plane, Subbands};

use crate::error::{Error, Result};
use crate::preprocess::GrayImage;
use crate::stats::{compute_stats, NUM_STATS, STAT_NAMES};

pub const HANDCRAFTED_LEN: usize = 308;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Texture,
    Glcm,
    Gldm,
    Fft,
    Wavelet,
    Lbp,
}

impl FeatureGroup {
    /// Canonical layout order.
    pub const ALL: [FeatureGroup; 6] = [
        FeatureGroup::Texture,
        FeatureGroup::Glcm,
        FeatureGroup::Gldm,
        FeatureGroup::Fft,
        FeatureGroup::Wavelet,
        FeatureGroup::Lbp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Texture => "texture",
            FeatureGroup::Glcm => "glcm",
            FeatureGroup::Gldm => "gldm",
            FeatureGroup::Fft => "fft",
            FeatureGroup::Wavelet => "wavelet",
            FeatureGroup::Lbp => "lbp",
        }
    }

    /// Names of the statistic blocks within the group.
    pub fn blocks(self) -> Vec<String> {
        match self {
            FeatureGroup::Texture | FeatureGroup::Fft => vec![String::new()],
            FeatureGroup::Glcm => GlcmDirection::ALL
                .iter()
                .map(|d| format!("{}deg", d.degrees()))
                .collect(),
            FeatureGroup::Gldm => GldmDirection::ALL
                .iter()
                .map(|d| format!("{}deg", d.degrees()))
                .collect(),
            FeatureGroup::Wavelet => ["l1", "l2"]
                .iter()
                .flat_map(|l| ["a", "h", "v", "d"].map(|b| format!("{l}_{b}")))
                .collect(),
            FeatureGroup::Lbp => LBP_RADII.iter().map(|r| format!("r{r}")).collect(),
        }
    }

    pub fn len(self) -> usize {
        self.blocks().len() * NUM_STATS
    }

    /// Offset of the group inside the full 308-vector.
    pub fn offset(self) -> usize {
        Self::ALL
            .iter()
            .take_while(|g| **g != self)
            .map(|g| g.len())
            .sum()
    }

    /// Column names, `group[_block]_stat`.
    pub fn feature_names(self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        for block in self.blocks() {
            for stat in STAT_NAMES {
                if block.is_empty() {
                    out.push(format!("{}_{stat}", self.name()));
                } else {
                    out.push(format!("{}_{block}_{stat}", self.name()));
                }
            }
        }
        out
    }

    pub fn extract(self, img: &GrayImage) -> Result<Vec<f64>> {
        match self {
            FeatureGroup::Texture => texture_features(img),
            FeatureGroup::Glcm => glcm_features(img),
            FeatureGroup::Gldm => gldm_features(img),
            FeatureGroup::Fft => fft_features(img),
            FeatureGroup::Wavelet => wavelet_features(img),
            FeatureGroup::Lbp => lbp_features(img),
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown feature group `{s}`")))
    }
}

/// Parse a comma-separated group list; `all` selects every group. The result
/// is deduplicated and in canonical order.
pub fn parse_groups(spec: &str) -> Result<Vec<FeatureGroup>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(FeatureGroup::ALL.to_vec());
    }
    let mut groups = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<FeatureGroup>>>()?;
    normalize_groups(&mut groups);
    if groups.is_empty() {
        return Err(Error::Config("empty feature group list".into()));
    }
    Ok(groups)
}

pub fn normalize_groups(groups: &mut Vec<FeatureGroup>) {
    groups.sort();
    groups.dedup();
}

/// Statistics of the image viewed as one flat vector of intensities.
pub fn texture_features(img: &GrayImage) -> Result<Vec<f64>> {
    let v: Vec<f64> = img.data.iter().map(|&p| p as f64).collect();
    Ok(compute_stats(&v)?.to_array().to_vec())
}

/// Full 308-feature vector in canonical group order.
#[derive(Debug, Clone, PartialEq)]
pub struct HandcraftedVector(Vec<f64>);

impl HandcraftedVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn group(&self, g: FeatureGroup) -> &[f64] {
        let off = g.offset();
        &self.0[off..off + g.len()]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn extract_handcrafted(img: &GrayImage) -> Result<HandcraftedVector> {
    Ok(HandcraftedVector(extract_groups(img, &FeatureGroup::ALL)?))
}

/// Features of the selected groups, concatenated in the order given.
pub fn extract_groups(img: &GrayImage, groups: &[FeatureGroup]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(groups.iter().map(|g| g.len()).sum());
    for g in groups {
        out.extend(g.extract(img)?);
    }
    Ok(out)
}

/// Column names for a group selection.
pub fn feature_names(groups: &[FeatureGroup]) -> Vec<String> {
    groups.iter().flat_map(|g| g.feature_names()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let lens: Vec<usize> = FeatureGroup::ALL.iter().map(|g| g.len()).collect();
        assert_eq!(lens, vec![14, 56, 56, 14, 112, 56]);
        assert_eq!(lens.iter().sum::<usize>(), HANDCRAFTED_LEN);
        assert_eq!(FeatureGroup::Fft.offset(), 14 + 56 + 56);
        let names = feature_names(&FeatureGroup::ALL);
        assert_eq!(names.len(), 308);
        assert_eq!(names[0], "texture_area");
        assert_eq!(names[14], "glcm_0deg_area");
        assert_eq!(names[307], "lbp_r7_uniformity");
    }

    #[test]
    fn texture_examples() {
        let f = texture_features(&GrayImage::filled(224, 224, 0)).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[5], 0.0);
        assert_eq!(f[13], 1.0);
        let f = texture_features(&GrayImage::filled(224, 224, 200)).unwrap();
        assert_eq!(f[1], 200.0);
        assert_eq!(f[0], 200.0 * 50176.0);
        let checker = GrayImage::from_fn(224, 224, |r, c| if (r + c) % 2 == 0 { 0 } else { 255 });
        let f = texture_features(&checker).unwrap();
        assert_eq!(f[1], 127.5);
        assert_eq!(f[6], 1.0);
    }

    #[test]
    fn group_parsing() {
        assert_eq!(parse_groups("all").unwrap().len(), 6);
        assert_eq!(
            parse_groups("lbp, Wavelet,lbp").unwrap(),
            vec![FeatureGroup::Wavelet, FeatureGroup::Lbp]
        );
        assert!(parse_groups("gabor").is_err());
        assert!(parse_groups(" , ").is_err());
    }

    #[test]
    fn extraction_is_deterministic() {
        let img = GrayImage::from_fn(224, 224, |r, c| ((r * r + 3 * c) % 256) as u8);
        let a = extract_handcrafted(&img).unwrap();
        let b = extract_handcrafted(&img).unwrap();
        assert_eq!(a.as_slice().len(), 308);
        assert!(a.as_slice().iter().all(|v| v.is_finite()));
        assert!(a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.group(FeatureGroup::Lbp).len(), 56);
    }
}
