use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::imaging::{colormap, normalize_values, BBox, Image, SaliencyMap};

pub const BOX_COLOR: [u8; 3] = [0, 255, 0];

/// Heatmap of the normalized saliency alpha-blended (0.5) over the grayscale
/// image, with one-pixel box outlines on top.
pub fn render_heatmap_overlay(image: &Image, s: &SaliencyMap, boxes: &[BBox]) -> Result<RgbImage> {
    let (h, w) = image.dims();
    if s.height != h || s.width != w {
        return Err(Error::invalid(format!(
            "saliency {}x{} does not match image {}x{}",
            s.height, s.width, h, w
        )));
    }
    let norm = normalize_values(&s.values);
    let gray = image.to_gray8();
    let mut out = RgbImage::new(w as u32, h as u32);
    for (i, (g, v)) in gray.iter().zip(&norm).enumerate() {
        let c = colormap::color(*v);
        let px = [0, 1, 2].map(|k| (*g as u16 + c[k] as u16).div_ceil(2) as u8);
        out.put_pixel((i % w) as u32, (i / w) as u32, Rgb(px));
    }
    for b in boxes {
        if !b.fits(h, w) {
            return Err(Error::invalid(format!("box {:?} outside image", b.to_array())));
        }
        draw_outline(&mut out, b);
    }
    Ok(out)
}

fn draw_outline(img: &mut RgbImage, b: &BBox) {
    let px = Rgb(BOX_COLOR);
    for x in b.x1..b.x2 {
        img.put_pixel(x as u32, b.y1 as u32, px);
        img.put_pixel(x as u32, (b.y2 - 1) as u32, px);
    }
    for y in b.y1..b.y2 {
        img.put_pixel(b.x1 as u32, y as u32, px);
        img.put_pixel((b.x2 - 1) as u32, y as u32, px);
    }
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| Error::Data(format!("png encoding failed: {e}")))?;
    Ok(buf.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(h: usize, w: usize) -> Image {
        Image::new(h, w, (0..h * w).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap()
    }

    #[test]
    fn zero_saliency_blends_with_coldest_colour() {
        let img = gray(4, 5);
        let s = SaliencyMap::zeros(4, 5, "z");
        let out = render_heatmap_overlay(&img, &s, &[]).unwrap();
        let c = colormap::COLORMAP[0];
        for (i, g) in img.to_gray8().iter().enumerate() {
            let p = out.get_pixel((i % 5) as u32, (i / 5) as u32);
            for k in 0..3 {
                assert_eq!(p[k] as u16, (*g as u16 + c[k] as u16).div_ceil(2));
            }
        }
    }

    #[test]
    fn single_hot_pixel_is_the_only_red_one() {
        let img = Image::filled(6, 6, 0.5).unwrap();
        let mut s = SaliencyMap::zeros(6, 6, "hot");
        s.values[14] = 3.0;
        let out = render_heatmap_overlay(&img, &s, &[]).unwrap();
        let red: Vec<usize> = (0..36)
            .filter(|i| {
                let p = out.get_pixel((i % 6) as u32, (i / 6) as u32);
                p[0] > p[1] && p[0] > p[2]
            })
            .collect();
        assert_eq!(red, vec![14]);
    }

    #[test]
    fn rendering_is_byte_identical() {
        let img = gray(8, 8);
        let mut s = SaliencyMap::zeros(8, 8, "x");
        s.values[9] = 1.0;
        s.values[20] = 0.4;
        let b = BBox::new(1, 1, 5, 6).unwrap();
        let a = encode_png(&render_heatmap_overlay(&img, &s, &[b]).unwrap()).unwrap();
        let c = encode_png(&render_heatmap_overlay(&img, &s, &[b]).unwrap()).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let img = gray(4, 4);
        let s = SaliencyMap::zeros(4, 5, "x");
        assert!(render_heatmap_overlay(&img, &s, &[]).is_err());
    }
}
