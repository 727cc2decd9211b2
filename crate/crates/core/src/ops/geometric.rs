//! Flips and affine warps. Warps sample bilinearly and fill with zero.

use crate::image::Image;

pub fn flip_horizontal(image: &Image) -> Image {
    let mut out = image.clone();
    let w = image.width();
    for row in out.pixels_mut().chunks_exact_mut(w) {
        row.reverse();
    }
    out
}

pub fn flip_vertical(image: &Image) -> Image {
    let (c, h, w) = image.shape();
    let mut out = image.clone();
    for ci in 0..c {
        let src = image.plane(ci);
        let dst = out.plane_mut(ci);
        for y in 0..h {
            let from = (h - 1 - y) * w;
            dst[y * w..(y + 1) * w].copy_from_slice(&src[from..from + w]);
        }
    }
    out
}

#[inline]
fn bilinear(plane: &[f32], h: usize, w: usize, sy: f64, sx: f64) -> f32 {
    let y0 = sy.floor();
    let x0 = sx.floor();
    let fy = sy - y0;
    let fx = sx - x0;
    let (y0, x0) = (y0 as isize, x0 as isize);
    let fetch = |y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            plane[y as usize * w + x as usize] as f64
        }
    };
    let top = fetch(y0, x0) * (1.0 - fx) + fetch(y0, x0 + 1) * fx;
    let bottom = fetch(y0 + 1, x0) * (1.0 - fx) + fetch(y0 + 1, x0 + 1) * fx;
    let v = top * (1.0 - fy) + bottom * fy;
    (v as f32).clamp(0.0, 1.0)
}

/// Resamples `image` where output pixel `(y, x)` reads source `map(y, x)`.
fn warp(image: &Image, map: impl Fn(f64, f64) -> (f64, f64)) -> Image {
    let (c, h, w) = image.shape();
    let mut pixels = Vec::with_capacity(c * h * w);
    for ci in 0..c {
        let plane = image.plane(ci);
        for y in 0..h {
            for x in 0..w {
                let (sy, sx) = map(y as f64, x as f64);
                pixels.push(bilinear(plane, h, w, sy, sx));
            }
        }
    }
    Image::from_raw(c, h, w, pixels)
}

/// Horizontal shear about the top-left corner: output `(y, x)` reads `(y, x + shear * y)`.
pub fn shear_x(image: &Image, shear: f64) -> Image {
    if shear == 0.0 {
        return image.clone();
    }
    warp(image, |y, x| (y, x + shear * y))
}

pub fn shear_y(image: &Image, shear: f64) -> Image {
    if shear == 0.0 {
        return image.clone();
    }
    warp(image, |y, x| (y + shear * x, x))
}

/// Shifts content right by `pixels` (left when negative).
pub fn translate_x(image: &Image, pixels: f64) -> Image {
    if pixels == 0.0 {
        return image.clone();
    }
    warp(image, |y, x| (y, x - pixels))
}

pub fn translate_y(image: &Image, pixels: f64) -> Image {
    if pixels == 0.0 {
        return image.clone();
    }
    warp(image, |y, x| (y - pixels, x))
}

/// Counter-clockwise rotation about the image centre.
pub fn rotate(image: &Image, degrees: f64) -> Image {
    if degrees == 0.0 {
        return image.clone();
    }
    let (_, h, w) = image.shape();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let (sin, cos) = degrees.to_radians().sin_cos();
    warp(image, move |y, x| {
        let dy = y - cy;
        let dx = x - cx;
        (cy + sin * dx + cos * dy, cx + cos * dx - sin * dy)
    })
}

/// Bilinear resize using half-pixel centres, edges clamped.
pub fn resize_bilinear(image: &Image, height: usize, width: usize) -> Image {
    let (c, h, w) = image.shape();
    if (h, w) == (height, width) {
        return image.clone();
    }
    let scale_y = h as f64 / height as f64;
    let scale_x = w as f64 / width as f64;
    let coords = |n: usize, scale: f64, limit: usize| -> Vec<(usize, usize, f64)> {
        (0..n)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
                let i0 = (s.floor() as usize).min(limit - 1);
                let i1 = (i0 + 1).min(limit - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let ys = coords(height, scale_y, h);
    let xs = coords(width, scale_x, w);
    let mut pixels = Vec::with_capacity(c * height * width);
    for ci in 0..c {
        let p = image.plane(ci);
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = p[y0 * w + x0] as f64 * (1.0 - fx) + p[y0 * w + x1] as f64 * fx;
                let bot = p[y1 * w + x0] as f64 * (1.0 - fx) + p[y1 * w + x1] as f64 * fx;
                pixels.push(((top * (1.0 - fy) + bot * fy) as f32).clamp(0.0, 1.0));
            }
        }
    }
    Image::from_raw(c, height, width, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rand_image(c: usize, h: usize, w: usize, seed: u64) -> Image {
        let mut s = crate::rng::RngStream::new(seed);
        Image::from_fn(c, h, w, |_, _, _| s.uniform() as f32).unwrap()
    }

    #[test]
    fn hflip_row() {
        let img = Image::new(1, 1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(flip_horizontal(&img).pixels(), &[0.3, 0.2, 0.1]);
    }

    #[test]
    fn vflip_column() {
        let img = Image::new(1, 3, 1, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(flip_vertical(&img).pixels(), &[0.3, 0.2, 0.1]);
    }

    #[test]
    fn flips_fix_symmetric_images() {
        let col_sym =
            Image::from_fn(2, 3, 4, |c, y, x| (c + y + x.min(3 - x)) as f32 / 10.0).unwrap();
        assert_eq!(flip_horizontal(&col_sym), col_sym);
        let row_sym =
            Image::from_fn(2, 5, 3, |c, y, x| (c + x + y.min(4 - y)) as f32 / 10.0).unwrap();
        assert_eq!(flip_vertical(&row_sym), row_sym);
    }

    #[test]
    fn zero_warps_are_identity() {
        let img = rand_image(3, 9, 7, 1);
        assert_eq!(rotate(&img, 0.0), img);
        assert_eq!(translate_x(&img, 0.0), img);
        assert_eq!(shear_y(&img, 0.0), img);
    }

    #[test]
    fn integer_translate_shifts_and_fills_zero() {
        let img = rand_image(1, 4, 5, 2);
        let out = translate_x(&img, 2.0);
        for y in 0..4 {
            assert_eq!(out.get(0, y, 0), 0.0);
            assert_eq!(out.get(0, y, 1), 0.0);
            for x in 2..5 {
                assert!((out.get(0, y, x) - img.get(0, y, x - 2)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rotate_quarter_turn_square() {
        let img = rand_image(1, 5, 5, 3);
        let out = rotate(&img, 90.0);
        // Counter-clockwise: the top row becomes the left column, read bottom-up.
        for i in 0..5 {
            assert!((out.get(0, 4 - i, 0) - img.get(0, 0, i)).abs() < 1e-5);
        }
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = Image::filled(3, 10, 20, 0.4).unwrap();
        let out = resize_bilinear(&img, 7, 33);
        assert_eq!(out.shape(), (3, 7, 33));
        assert!(out.pixels().iter().all(|v| (v - 0.4).abs() < 1e-6));
    }

    proptest! {
        #[test]
        fn flips_are_involutions(c in 1usize..4, h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
            let img = rand_image(c, h, w, seed);
            prop_assert_eq!(flip_horizontal(&flip_horizontal(&img)), img.clone());
            prop_assert_eq!(flip_vertical(&flip_vertical(&img)), img);
        }
    }
}
