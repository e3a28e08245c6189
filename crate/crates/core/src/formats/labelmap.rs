//! Label maps as single-channel 16-bit PNG: 0 is background, `k >= 1` a
//! segment id.

use std::io::Cursor;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use super::FormatError;
use crate::geometry::Size;
use crate::rasterize::LabelMap;

pub const MAX_LABEL: u32 = u16::MAX as u32;

pub fn write_label_map(map: &LabelMap) -> Result<Vec<u8>, FormatError> {
    let max = map.max_label();
    if max > MAX_LABEL {
        return Err(FormatError::LabelMap(format!(
            "label {max} does not fit in 16 bits"
        )));
    }
    let size = map.size();
    let raw: Vec<u16> = map.labels().iter().map(|&l| l as u16).collect();
    let buffer: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(size.width, size.height, raw)
            .ok_or_else(|| FormatError::LabelMap("buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    buffer
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| FormatError::LabelMap(e.to_string()))?;
    Ok(out.into_inner())
}

/// Decodes a label map. 8-bit grayscale PNGs are accepted as well.
pub fn read_label_map(bytes: &[u8]) -> Result<LabelMap, FormatError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| FormatError::LabelMap(e.to_string()))?;
    let size = Size::new(img.width(), img.height())
        .map_err(|e| FormatError::LabelMap(e.to_string()))?;
    let labels: Vec<u32> = match img {
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(FormatError::LabelMap(format!(
                "expected a single-channel PNG, got {:?}",
                other.color()
            )))
        }
    };
    LabelMap::new(size, labels).map_err(|e| FormatError::LabelMap(e.to_string()))
}

/// [`read_label_map`] plus a dimension check.
pub fn read_label_map_sized(bytes: &[u8], expected: Size) -> Result<LabelMap, FormatError> {
    let map = read_label_map(bytes)?;
    if map.size() != expected {
        return Err(FormatError::LabelMap(format!(
            "dimensions {}x{} do not match page {}x{}",
            map.size().width,
            map.size().height,
            expected.width,
            expected.height
        )));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sz(w: u32, h: u32) -> Size {
        Size::new(w, h).unwrap()
    }

    #[test]
    fn small_map_round_trips() {
        let map = LabelMap::new(sz(2, 2), vec![0, 1, 1, 2]).unwrap();
        assert_eq!(read_label_map(&write_label_map(&map).unwrap()).unwrap(), map);
    }

    #[test]
    fn background_round_trips() {
        let map = LabelMap::background(sz(5, 3));
        let back = read_label_map(&write_label_map(&map).unwrap()).unwrap();
        assert_eq!(back.foreground_count(), 0);
        assert_eq!(back, map);
    }

    #[test]
    fn too_many_labels() {
        let labels: Vec<u32> = (1..=70_000).collect();
        let map = LabelMap::new(sz(700, 100), labels).unwrap();
        assert!(matches!(write_label_map(&map), Err(FormatError::LabelMap(_))));
    }

    #[test]
    fn wrong_dimensions() {
        let bytes = write_label_map(&LabelMap::background(sz(4, 4))).unwrap();
        assert!(read_label_map_sized(&bytes, sz(4, 5)).is_err());
        assert!(read_label_map_sized(&bytes, sz(4, 4)).is_ok());
    }

    #[test]
    fn garbage_is_an_error() {
        assert!(read_label_map(b"not a png").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip(w in 1u32..40, h in 1u32..40, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let labels = (0..w * h).map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(1..=MAX_LABEL) }).collect();
            let map = LabelMap::new(sz(w, h), labels).unwrap();
            let back = read_label_map(&write_label_map(&map).unwrap()).unwrap();
            prop_assert_eq!(crate::rasterize::foreground_census(&back), crate::rasterize::foreground_census(&map));
            prop_assert_eq!(back, map);
        }
    }
}
