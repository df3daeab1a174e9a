use crate::error::{Error, Result};

/// Row-major matrix of 8-bit pixels.
///
/// Used for plain and cipher images as well as the byte matrices derived
/// from the keystream (`D`, `C0`) and recovered masks.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Layout(format!(
                "image dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if pixels.len() != rows * cols {
            return Err(Error::Layout(format!(
                "{rows}x{cols} image needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        Ok(GrayImage { rows, cols, pixels })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "image dimensions must be positive");
        GrayImage {
            rows,
            cols,
            pixels: vec![0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut img = GrayImage::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                img.pixels[i * cols + j] = f(i, j);
            }
        }
        img
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Zero-based pixel access.
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.cols + col] = value;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Top-left `rows x cols` window; used to strip padding.
    pub fn crop(&self, rows: usize, cols: usize) -> Result<GrayImage> {
        if rows > self.rows || cols > self.cols {
            return Err(Error::Layout(format!(
                "cannot crop {}x{} image to {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        Ok(GrayImage::from_fn(rows, cols, |i, j| self.get(i, j)))
    }

    /// Element-wise `(self - other) mod 256`.
    pub fn wrapping_sub(&self, other: &GrayImage) -> Result<GrayImage> {
        if self.dims() != other.dims() {
            return Err(Error::Layout(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let pixels = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| a.wrapping_sub(*b))
            .collect();
        Ok(GrayImage {
            rows: self.rows,
            cols: self.cols,
            pixels,
        })
    }

    /// Number of differing pixels between two equally shaped images.
    pub fn hamming(&self, other: &GrayImage) -> Option<usize> {
        (self.dims() == other.dims()).then(|| {
            self.pixels
                .iter()
                .zip(&other.pixels)
                .filter(|(a, b)| a != b)
                .count()
        })
    }
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.pixels.len() <= 64 {
            let rows: Vec<&[u8]> = self.pixels.chunks(self.cols).collect();
            f.debug_struct("GrayImage")
                .field("rows", &self.rows)
                .field("cols", &self.cols)
                .field("pixels", &rows)
                .finish()
        } else {
            f.debug_struct("GrayImage")
                .field("rows", &self.rows)
                .field("cols", &self.cols)
                .finish_non_exhaustive()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![1, 2, 3]).is_err());
        assert!(GrayImage::new(2, 2, vec![1, 2, 3, 4]).is_ok());
    }

    #[test]
    fn crop_and_sub() {
        let a = GrayImage::from_fn(3, 4, |i, j| (i * 4 + j) as u8);
        let c = a.crop(2, 2).unwrap();
        assert_eq!(c.pixels(), &[0, 1, 4, 5]);
        assert!(a.crop(4, 1).is_err());
        let z = a.wrapping_sub(&a).unwrap();
        assert!(z.pixels().iter().all(|&p| p == 0));
        let one = GrayImage::new(1, 1, vec![1]).unwrap();
        let zero = GrayImage::zeros(1, 1);
        assert_eq!(zero.wrapping_sub(&one).unwrap().pixels(), &[255]);
        assert_eq!(a.hamming(&a), Some(0));
        assert_eq!(a.hamming(&c), None);
    }
}
