use super::Tensor;
use crate::error::{Error, Result};

/// Per-channel RGB means of the ILSVRC-2012 training set, the usual input
/// centering for networks trained on it.
pub const DEFAULT_CHANNEL_MEANS: [f32; 3] = [123.68, 116.779, 103.939];

/// Interleaved (HWC) image with 1 (gray) or 3 (R, G, B) channels and pixel
/// values in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!("empty image {height}x{width}")));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::shape(format!(
                "{height}x{width}x{channels} image needs {} pixels, got {}",
                height * width * channels,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {bad} outside [0, 255]")));
        }
        Ok(Image {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn from_u8(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Image::new(
            height,
            width,
            channels,
            bytes.iter().map(|&b| f32::from(b)).collect(),
        )
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(height * width * 3).collect();
        Image::new(height, width, 3, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Luminance `0.299 R + 0.587 G + 0.114 B`; gray images are returned as is.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 255.0))
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            pixels,
        }
    }

    /// Gray images replicated to three channels; color images unchanged.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let pixels = self.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 3,
            pixels,
        }
    }
}

/// Bilinear resize sampling at pixel centers: source coordinate
/// `(i + 0.5) * scale - 0.5`, clamped to the image.
pub fn resize_bilinear(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(format!(
            "resize target must be non-empty, got {out_h}x{out_w}"
        )));
    }
    let (in_h, in_w, ch) = (img.height, img.width, img.channels);
    let ys = sample_positions(in_h, out_h);
    let xs = sample_positions(in_w, out_w);
    let mut pixels = Vec::with_capacity(out_h * out_w * ch);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let top = lerp(img.get(y0, x0, c), img.get(y0, x1, c), fx);
                let bottom = lerp(img.get(y1, x0, c), img.get(y1, x1, c), fx);
                pixels.push(lerp(top, bottom, fy).clamp(0.0, 255.0));
            }
        }
    }
    Image::new(out_h, out_w, ch, pixels)
}

fn sample_positions(in_len: usize, out_len: usize) -> Vec<(usize, usize, f32)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, (src - lo as f64) as f32)
        })
        .collect()
}

// a + (b - a) t keeps constant regions exact.
#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + (b - a) * t
}

/// Resize so that the shorter side equals `size`, keeping the aspect ratio.
pub fn resize_shorter_side(img: &Image, size: usize) -> Result<Image> {
    let (h, w) = (img.height, img.width);
    let (out_h, out_w) = if h <= w {
        (size, ((w * size) as f64 / h as f64).round().max(1.0) as usize)
    } else {
        (((h * size) as f64 / w as f64).round().max(1.0) as usize, size)
    };
    resize_bilinear(img, out_h, out_w)
}

/// Centered `size x size` window; offsets are `floor((dim - size) / 2)`.
pub fn center_crop(img: &Image, size: usize) -> Result<Image> {
    if size == 0 || size > img.height || size > img.width {
        return Err(Error::invalid(format!(
            "cannot crop {size}x{size} from a {}x{} image",
            img.height, img.width
        )));
    }
    let top = (img.height - size) / 2;
    let left = (img.width - size) / 2;
    let ch = img.channels;
    let mut pixels = Vec::with_capacity(size * size * ch);
    for y in top..top + size {
        let start = (y * img.width + left) * ch;
        pixels.extend_from_slice(&img.pixels[start..start + size * ch]);
    }
    Image::new(size, size, ch, pixels)
}

/// Channel-major `[3, H, W]` tensor of `pixel - mean[channel]`.
pub fn to_input_tensor(img: &Image, channel_means: [f32; 3]) -> Result<Tensor> {
    if img.channels != 3 {
        return Err(Error::invalid(
            "network input must be a 3-channel image".to_string(),
        ));
    }
    let plane = img.height * img.width;
    let mut data = vec![0.0f32; 3 * plane];
    for (i, px) in img.pixels.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] - channel_means[c];
        }
    }
    Tensor::new(vec![3, img.height, img.width], data)
}

/// Shorter side to 256, center crop 224, mean subtraction. Gray images are
/// replicated to RGB first.
pub fn preprocess(img: &Image, channel_means: [f32; 3]) -> Result<Tensor> {
    let rgb = img.to_rgb();
    let resized = resize_shorter_side(&rgb, 256)?;
    let cropped = center_crop(&resized, 224)?;
    to_input_tensor(&cropped, channel_means)
}

/// [`preprocess`] generalized to an arbitrary network input size. A square
/// input keeps the 256/224 resize-then-crop ratio; other shapes are resized
/// directly.
pub fn preprocess_to(img: &Image, height: usize, width: usize, channel_means: [f32; 3]) -> Result<Tensor> {
    if height == 224 && width == 224 {
        return preprocess(img, channel_means);
    }
    let rgb = img.to_rgb();
    let fitted = if height == width {
        let side = ((height as f64) * 256.0 / 224.0).round() as usize;
        center_crop(&resize_shorter_side(&rgb, side)?, height)?
    } else {
        resize_bilinear(&rgb, height, width)?
    };
    to_input_tensor(&fitted, channel_means)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(h: usize, w: usize, v: &[f32]) -> Image {
        Image::new(h, w, 1, v.to_vec()).unwrap()
    }

    #[test]
    fn preprocess_to_sizes() {
        let px: Vec<f32> = (0..30 * 40 * 3).map(|i| (i % 251) as f32).collect();
        let img = Image::new(30, 40, 3, px).unwrap();
        let m = [1.0, 2.0, 3.0];
        assert_eq!(preprocess_to(&img, 224, 224, m).unwrap(), preprocess(&img, m).unwrap());
        assert_eq!(preprocess_to(&img, 32, 32, m).unwrap().shape(), &[3, 32, 32]);
        assert_eq!(preprocess_to(&img, 20, 9, m).unwrap().shape(), &[3, 20, 9]);
    }

    #[test]
    fn resize_identity() {
        let px: Vec<f32> = (0..224 * 224 * 3).map(|i| (i % 256) as f32).collect();
        let img = Image::new(224, 224, 3, px).unwrap();
        assert_eq!(resize_bilinear(&img, 224, 224).unwrap(), img);
    }

    #[test]
    fn resize_constant() {
        let img = Image::filled(10, 10, [37.0, 37.0, 37.0]).unwrap();
        let out = resize_bilinear(&img, 3, 3).unwrap();
        assert_eq!((out.height(), out.width()), (3, 3));
        assert!(out.pixels().iter().all(|&v| v == 37.0));
    }

    #[test]
    fn resize_two_by_two_to_one() {
        let img = gray(2, 2, &[0.0, 0.0, 255.0, 255.0]);
        let out = resize_bilinear(&img, 1, 1).unwrap();
        assert_eq!(out.pixels(), &[127.5]);
    }

    #[test]
    fn resize_zero_target() {
        let img = gray(2, 2, &[0.0; 4]);
        assert!(matches!(
            resize_bilinear(&img, 0, 3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn crop_cases() {
        let px: Vec<f32> = (0..9).map(|v| v as f32).collect();
        let img = gray(3, 3, &px);
        assert_eq!(center_crop(&img, 1).unwrap().pixels(), &[4.0]);
        assert_eq!(center_crop(&img, 3).unwrap(), img);
        assert!(center_crop(&img, 4).is_err());

        let px: Vec<f32> = (0..256 * 256).map(|i| (i % 251) as f32).collect();
        let big = gray(256, 256, &px);
        let c = center_crop(&big, 224).unwrap();
        assert_eq!(c.get(0, 0, 0), big.get(16, 16, 0));
        assert_eq!(c.get(223, 223, 0), big.get(239, 239, 0));
    }

    #[test]
    fn input_tensor_values() {
        let img = Image::new(1, 2, 3, vec![10.0, 20.0, 30.0, 0.0, 0.0, 0.0]).unwrap();
        let t = to_input_tensor(&img, [1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.shape(), &[3, 1, 2]);
        assert_eq!(t.data(), &[9.0, -1.0, 18.0, -2.0, 27.0, -3.0]);

        let img = Image::filled(4, 5, [100.0; 3]).unwrap();
        let t = to_input_tensor(&img, [100.0; 3]).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));

        let g = gray(2, 2, &[0.0; 4]);
        assert!(matches!(
            to_input_tensor(&g, [0.0; 3]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn preprocess_shape() {
        let img = Image::filled(300, 400, [50.0, 60.0, 70.0]).unwrap();
        let t = preprocess(&img, [0.0; 3]).unwrap();
        assert_eq!(t.shape(), &[3, 224, 224]);
        assert_eq!(t.data()[0], 50.0);
        let g = gray(64, 64, &[9.0; 64 * 64]);
        assert_eq!(preprocess(&g, [0.0; 3]).unwrap().shape(), &[3, 224, 224]);
    }

    proptest! {
        #[test]
        fn resize_round_trip_constant(v in 0u8..=255, h in 1usize..20, w in 1usize..20, oh in 1usize..30, ow in 1usize..30) {
            let img = Image::filled(h, w, [v as f32; 3]).unwrap();
            let there = resize_bilinear(&img, oh, ow).unwrap();
            let back = resize_bilinear(&there, h, w).unwrap();
            prop_assert_eq!(back, img);
        }

        // Means on a 1/1024 grid keep `pixel - mean` exactly representable.
        #[test]
        fn input_tensor_invertible(px in proptest::collection::vec(0u8..=255, 3 * 6),
                                   means in proptest::array::uniform3(0u32..=255 * 1024)) {
            let img = Image::from_u8(2, 3, 3, &px).unwrap();
            let means = means.map(|m| m as f32 / 1024.0);
            let t = to_input_tensor(&img, means).unwrap();
            for (i, p) in img.pixels().chunks_exact(3).enumerate() {
                for c in 0..3 {
                    prop_assert_eq!(t.data()[c * 6 + i] + means[c], p[c]);
                }
            }
        }
    }
}
