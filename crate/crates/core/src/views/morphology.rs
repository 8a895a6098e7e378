//! Grayscale morphology with a city-block disk structuring element.
//!
//! Out-of-image neighbors are skipped, which is the same as padding with
//! `+inf` for erosion and `-inf` for dilation. With a symmetric element this
//! keeps the duality `closing(x) = -opening(-x)` exact.

/// Single-band raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    pub fn negate(&self) -> Image {
        Image::new(self.height, self.width, self.data.iter().map(|v| -v).collect())
    }
}

/// Offsets `(dr, dc)` with `|dr| + |dc| <= radius`.
pub fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dr in -r..=r {
        let span = r - dr.abs();
        for dc in -span..=span {
            out.push((dr, dc));
        }
    }
    out
}

fn rank_filter(img: &Image, radius: usize, pick: fn(f64, f64) -> f64, init: f64) -> Image {
    let offsets = disk_offsets(radius);
    let (h, w) = (img.height as isize, img.width as isize);
    let mut out = Vec::with_capacity(img.data.len());
    for r in 0..h {
        for c in 0..w {
            let mut acc = init;
            for &(dr, dc) in &offsets {
                let (rr, cc) = (r + dr, c + dc);
                if rr >= 0 && rr < h && cc >= 0 && cc < w {
                    acc = pick(acc, img.data[(rr * w + cc) as usize]);
                }
            }
            out.push(acc);
        }
    }
    Image::new(img.height, img.width, out)
}

pub fn erode(img: &Image, radius: usize) -> Image {
    rank_filter(img, radius, f64::min, f64::INFINITY)
}

pub fn dilate(img: &Image, radius: usize) -> Image {
    rank_filter(img, radius, f64::max, f64::NEG_INFINITY)
}

/// Erosion then dilation: removes bright details smaller than the element.
pub fn opening(img: &Image, radius: usize) -> Image {
    dilate(&erode(img, radius), radius)
}

/// Dilation then erosion: fills dark details smaller than the element.
pub fn closing(img: &Image, radius: usize) -> Image {
    erode(&dilate(img, radius), radius)
}
