//! The cipher proper: key-driven block size selection, zero padding, the
//! plaintext-dependent index `μ3`, and the chained modular block addition
//!
//! ```text
//! C_k = (I_k + v·D_k + C_{k-1}) mod 256,   D_{r1·r2} ≡ 0,
//! ```
//!
//! repeated `R` times with the same `(D, v, C0)`.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::keystream::{self, build_c0, build_d, ByteSequence, ChaoticSeed, KeystreamSet};

/// Autoblocking look-up table, indexed `[q1][q2]`.
pub const BLOCK_TABLE: [[(usize, usize); 3]; 3] = [
    [(8, 8), (8, 16), (8, 32)],
    [(16, 8), (16, 16), (16, 32)],
    [(32, 8), (32, 16), (32, 32)],
];

/// Largest admissible one-based index into `x̄` for key components.
pub const MAX_KEY_INDEX: usize = 256;

/// Every block size in the table, row-major.
pub fn table_block_sizes() -> impl Iterator<Item = (usize, usize)> {
    BLOCK_TABLE.iter().flat_map(|row| row.iter().copied())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecretKey {
    pub omega1: usize,
    pub omega2: usize,
    pub mu1: usize,
    pub mu2: usize,
    /// Logistic control parameter in `[3.9, 4]`.
    pub mu: f64,
    pub a: u64,
    pub b: u64,
}

impl SecretKey {
    /// Reference key for the mask-transfer experiment.
    pub fn experiment() -> Self {
        SecretKey {
            omega1: 50,
            omega2: 50,
            mu1: 20,
            mu2: 15,
            mu: 3.999,
            a: 1,
            b: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
        ] {
            if !(1..=MAX_KEY_INDEX).contains(&value) {
                return Err(Error::KeyDomain(format!(
                    "{name}={value} outside [1, {MAX_KEY_INDEX}]"
                )));
            }
        }
        keystream::check_mu(self.mu)?;
        if self.a == 0 || self.b == 0 {
            return Err(Error::KeyDomain(format!(
                "Arnold parameters must be positive, got a={}, b={}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublicParams {
    rounds: u32,
}

impl PublicParams {
    pub fn new(rounds: u32) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::InvalidArgument(
                "round count must be at least 1".into(),
            ));
        }
        Ok(PublicParams { rounds })
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }
}

/// Block geometry of a padded image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockLayout {
    pub p1: usize,
    pub p2: usize,
    /// Block grid rows.
    pub r1: usize,
    /// Block grid columns.
    pub r2: usize,
    pub original_rows: usize,
    pub original_cols: usize,
}

impl BlockLayout {
    /// Layout for an image of the given size, padding up to block multiples.
    pub fn new(p1: usize, p2: usize, rows: usize, cols: usize) -> Result<Self> {
        if p1 == 0 || p2 == 0 {
            return Err(Error::Layout(format!(
                "block dimensions must be positive, got {p1}x{p2}"
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::Layout(format!(
                "image dimensions must be positive, got {rows}x{cols}"
            )));
        }
        Ok(BlockLayout {
            p1,
            p2,
            r1: rows.div_ceil(p1),
            r2: cols.div_ceil(p2),
            original_rows: rows,
            original_cols: cols,
        })
    }

    pub fn padded_rows(&self) -> usize {
        self.r1 * self.p1
    }

    pub fn padded_cols(&self) -> usize {
        self.r2 * self.p2
    }

    pub fn padded_dims(&self) -> (usize, usize) {
        (self.padded_rows(), self.padded_cols())
    }

    pub fn block_count(&self) -> usize {
        self.r1 * self.r2
    }

    pub fn block_len(&self) -> usize {
        self.p1 * self.p2
    }

    pub fn is_table_entry(&self) -> bool {
        table_block_sizes().any(|s| s == (self.p1, self.p2))
    }

    fn check_padded(&self, image: &GrayImage) -> Result<()> {
        if image.dims() != self.padded_dims() {
            return Err(Error::Layout(format!(
                "image is {}x{}, layout expects {}x{}",
                image.rows(),
                image.cols(),
                self.padded_rows(),
                self.padded_cols()
            )));
        }
        Ok(())
    }
}

/// `q = floor(x̄_ω · 10^14) mod 3` for both indices, then the table entry.
pub fn select_block_size(
    xbar: &ByteSequence,
    omega1: usize,
    omega2: usize,
) -> Result<(usize, usize)> {
    let q = |omega: usize| -> Result<usize> {
        let byte = xbar.at(omega, "block size index")?;
        Ok((u128::from(byte) * 10u128.pow(keystream::BYTE_SCALE_EXP) % 3) as usize)
    };
    Ok(BLOCK_TABLE[q(omega1)?][q(omega2)?])
}

/// `(Σ first p1×p2 block) mod 256 + 1`, with pixels outside the image
/// counting as padding zeros.
pub fn mu3(image: &GrayImage, p1: usize, p2: usize) -> u16 {
    let mut sum = 0u32;
    for i in 0..p1.min(image.rows()) {
        for j in 0..p2.min(image.cols()) {
            sum += u32::from(image.get(i, j));
        }
    }
    (sum % 256) as u16 + 1
}

/// Appends zero rows and columns up to multiples of the block size.
pub fn pad(image: &GrayImage, p1: usize, p2: usize) -> Result<(GrayImage, BlockLayout)> {
    let layout = BlockLayout::new(p1, p2, image.rows(), image.cols())?;
    Ok((pad_to(image, &layout)?, layout))
}

pub(crate) fn pad_to(image: &GrayImage, layout: &BlockLayout) -> Result<GrayImage> {
    let (rows, cols) = layout.padded_dims();
    if image.dims() == (rows, cols) {
        return Ok(image.clone());
    }
    if image.rows() > rows || image.cols() > cols {
        return Err(Error::Layout(format!(
            "{}x{} image exceeds padded size {rows}x{cols}",
            image.rows(),
            image.cols()
        )));
    }
    Ok(GrayImage::from_fn(rows, cols, |i, j| {
        if i < image.rows() && j < image.cols() {
            image.get(i, j)
        } else {
            0
        }
    }))
}

/// Equal-shaped blocks in raster order over the block grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStream {
    p1: usize,
    p2: usize,
    blocks: Vec<Vec<u8>>,
}

impl BlockStream {
    pub fn new(p1: usize, p2: usize, blocks: Vec<Vec<u8>>) -> Result<Self> {
        if p1 == 0 || p2 == 0 {
            return Err(Error::Layout(format!(
                "block dimensions must be positive, got {p1}x{p2}"
            )));
        }
        if let Some((k, b)) = blocks.iter().enumerate().find(|(_, b)| b.len() != p1 * p2) {
            return Err(Error::Layout(format!(
                "block {} has {} bytes, expected {}",
                k + 1,
                b.len(),
                p1 * p2
            )));
        }
        Ok(BlockStream { p1, p2, blocks })
    }

    pub fn block_dims(&self) -> (usize, usize) {
        (self.p1, self.p2)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Vec<u8>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Vec<u8>> {
        self.blocks
    }

    pub(crate) fn check_same_shape(&self, other: &BlockStream) -> Result<()> {
        if self.block_dims() != other.block_dims() || self.len() != other.len() {
            return Err(Error::Layout(format!(
                "block streams differ: {} blocks of {}x{} vs {} blocks of {}x{}",
                self.len(),
                self.p1,
                self.p2,
                other.len(),
                other.p1,
                other.p2
            )));
        }
        Ok(())
    }
}

pub fn split_blocks(image: &GrayImage, layout: &BlockLayout) -> Result<BlockStream> {
    layout.check_padded(image)?;
    let (p1, p2) = (layout.p1, layout.p2);
    let mut blocks = Vec::with_capacity(layout.block_count());
    for br in 0..layout.r1 {
        for bc in 0..layout.r2 {
            let mut block = Vec::with_capacity(p1 * p2);
            for i in 0..p1 {
                let start = (br * p1 + i) * image.cols() + bc * p2;
                block.extend_from_slice(&image.pixels()[start..start + p2]);
            }
            blocks.push(block);
        }
    }
    Ok(BlockStream { p1, p2, blocks })
}

pub fn join_blocks(stream: &BlockStream, layout: &BlockLayout) -> Result<GrayImage> {
    if stream.block_dims() != (layout.p1, layout.p2) || stream.len() != layout.block_count() {
        return Err(Error::Layout(format!(
            "{} blocks of {}x{} do not fit a {}x{} grid of {}x{} blocks",
            stream.len(),
            stream.p1,
            stream.p2,
            layout.r1,
            layout.r2,
            layout.p1,
            layout.p2
        )));
    }
    let (rows, cols) = layout.padded_dims();
    let (p1, p2) = (layout.p1, layout.p2);
    let mut image = GrayImage::zeros(rows, cols);
    for (k, block) in stream.blocks.iter().enumerate() {
        let (br, bc) = (k / layout.r2, k % layout.r2);
        for i in 0..p1 {
            let start = (br * p1 + i) * cols + bc * p2;
            image.pixels_mut()[start..start + p2].copy_from_slice(&block[i * p2..(i + 1) * p2]);
        }
    }
    Ok(image)
}

fn check_round_inputs(input: &BlockStream, d: &BlockStream, c0: &[u8]) -> Result<()> {
    input.check_same_shape(d)?;
    if c0.len() != input.p1 * input.p2 {
        return Err(Error::Layout(format!(
            "C0 has {} bytes, blocks have {}",
            c0.len(),
            input.p1 * input.p2
        )));
    }
    Ok(())
}

/// One encryption pass, `k` ascending. The last `D` block is ignored.
pub fn encrypt_round(
    plain: &BlockStream,
    d: &BlockStream,
    v: u8,
    c0: &[u8],
) -> Result<BlockStream> {
    check_round_inputs(plain, d, c0)?;
    let last = plain.len().saturating_sub(1);
    let mut prev = c0.to_vec();
    let mut out = Vec::with_capacity(plain.len());
    for (k, (ik, dk)) in plain.blocks.iter().zip(&d.blocks).enumerate() {
        let keyed = k < last;
        let ck: Vec<u8> = ik
            .iter()
            .zip(dk)
            .zip(&prev)
            .map(|((&i, &dd), &p)| {
                let m = if keyed { v.wrapping_mul(dd) } else { 0 };
                i.wrapping_add(m).wrapping_add(p)
            })
            .collect();
        prev.clone_from(&ck);
        out.push(ck);
    }
    Ok(BlockStream {
        p1: plain.p1,
        p2: plain.p2,
        blocks: out,
    })
}

/// Inverse of [`encrypt_round`], `k` descending.
pub fn decrypt_round(
    cipher: &BlockStream,
    d: &BlockStream,
    v: u8,
    c0: &[u8],
) -> Result<BlockStream> {
    check_round_inputs(cipher, d, c0)?;
    let n = cipher.len();
    let mut out = vec![Vec::new(); n];
    for k in (0..n).rev() {
        let prev: &[u8] = if k == 0 { c0 } else { &cipher.blocks[k - 1] };
        let keyed = k + 1 < n;
        out[k] = cipher.blocks[k]
            .iter()
            .zip(&d.blocks[k])
            .zip(prev)
            .map(|((&c, &dd), &p)| {
                let m = if keyed { v.wrapping_mul(dd) } else { 0 };
                c.wrapping_sub(m).wrapping_sub(p)
            })
            .collect();
    }
    Ok(BlockStream {
        p1: cipher.p1,
        p2: cipher.p2,
        blocks: out,
    })
}

/// Output of [`Ieae::encrypt`]: the padded cipher image and what the
/// receiver needs besides the key.
#[derive(Debug, Clone, PartialEq)]
pub struct Encrypted {
    pub image: GrayImage,
    pub mu3: u16,
    pub layout: BlockLayout,
}

/// A keyed cipher instance: `λ`-derived seed, `x̄`, block size, `r` and `v`.
#[derive(Debug, Clone)]
pub struct Ieae {
    key: SecretKey,
    params: PublicParams,
    seed: ChaoticSeed,
    xbar: ByteSequence,
    block: (usize, usize),
    r: u8,
    v: u8,
}

impl Ieae {
    pub fn new(key: SecretKey, params: PublicParams, lambda: f64) -> Result<Self> {
        Self::with_seed(key, params, ChaoticSeed::from_lambda(lambda)?)
    }

    pub fn with_seed(key: SecretKey, params: PublicParams, seed: ChaoticSeed) -> Result<Self> {
        key.validate()?;
        let mut xbar = ByteSequence::generate(&seed, key.mu, MAX_KEY_INDEX)?;
        let block = select_block_size(&xbar, key.omega1, key.omega2)?;
        // P = p1·p2 + 256 covers every C0 slice since μ3 <= 256
        xbar.extend_to(block.0 * block.1 + 256)?;
        let r = xbar.at(key.mu1, "μ1")?;
        let v = xbar.at(key.mu2, "μ2")?;
        Ok(Ieae {
            key,
            params,
            seed,
            xbar,
            block,
            r,
            v,
        })
    }

    pub fn key(&self) -> &SecretKey {
        &self.key
    }

    pub fn params(&self) -> PublicParams {
        self.params
    }

    pub fn seed(&self) -> &ChaoticSeed {
        &self.seed
    }

    pub fn xbar(&self) -> &ByteSequence {
        &self.xbar
    }

    pub fn block_size(&self) -> (usize, usize) {
        self.block
    }

    pub fn skip(&self) -> u8 {
        self.r
    }

    pub fn multiplier(&self) -> u8 {
        self.v
    }

    pub fn layout_for(&self, rows: usize, cols: usize) -> Result<BlockLayout> {
        BlockLayout::new(self.block.0, self.block.1, rows, cols)
    }

    /// Full keystream for one image with the given layout and `μ3`.
    pub fn keystream(&self, layout: &BlockLayout, mu3: u16) -> Result<KeystreamSet> {
        let (rows, cols) = layout.padded_dims();
        Ok(KeystreamSet {
            xbar: self.xbar.clone(),
            r: self.r,
            v: self.v,
            d: build_d(
                &self.seed,
                self.key.a,
                self.key.b,
                usize::from(self.r),
                rows,
                cols,
            )?,
            c0: build_c0(&self.xbar, usize::from(mu3), self.block.0, self.block.1)?,
        })
    }

    /// Precomputes `D` for one image size so many images can share it.
    pub fn prepare(&self, rows: usize, cols: usize) -> Result<PreparedCipher<'_>> {
        let layout = self.layout_for(rows, cols)?;
        let (pr, pc) = layout.padded_dims();
        let d = build_d(
            &self.seed,
            self.key.a,
            self.key.b,
            usize::from(self.r),
            pr,
            pc,
        )?;
        let d_blocks = split_blocks(&d, &layout)?;
        Ok(PreparedCipher {
            cipher: self,
            layout,
            d_blocks,
        })
    }

    pub fn encrypt(&self, image: &GrayImage) -> Result<Encrypted> {
        self.prepare(image.rows(), image.cols())?.encrypt(image)
    }

    /// Decrypts a padded cipher image; the result keeps the padding.
    pub fn decrypt(&self, cipher: &GrayImage, mu3: u16) -> Result<GrayImage> {
        let (p1, p2) = self.block;
        if !cipher.rows().is_multiple_of(p1) || !cipher.cols().is_multiple_of(p2) {
            return Err(Error::Layout(format!(
                "{}x{} cipher is not a multiple of the {p1}x{p2} block size",
                cipher.rows(),
                cipher.cols()
            )));
        }
        self.prepare(cipher.rows(), cipher.cols())?
            .decrypt(cipher, mu3)
    }
}

/// An [`Ieae`] instance bound to one padded image size.
#[derive(Debug, Clone)]
pub struct PreparedCipher<'a> {
    cipher: &'a Ieae,
    layout: BlockLayout,
    d_blocks: BlockStream,
}

impl PreparedCipher<'_> {
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn c0(&self, mu3: u16) -> Result<Vec<u8>> {
        if !(1..=256).contains(&mu3) {
            return Err(Error::InvalidArgument(format!("μ3={mu3} outside [1, 256]")));
        }
        let (p1, p2) = self.cipher.block;
        Ok(build_c0(&self.cipher.xbar, usize::from(mu3), p1, p2)?.into_pixels())
    }

    pub fn encrypt(&self, image: &GrayImage) -> Result<Encrypted> {
        let layout = BlockLayout::new(self.layout.p1, self.layout.p2, image.rows(), image.cols())?;
        if layout.padded_dims() != self.layout.padded_dims() {
            return Err(Error::Layout(format!(
                "{}x{} image does not pad to the prepared {}x{}",
                image.rows(),
                image.cols(),
                self.layout.padded_rows(),
                self.layout.padded_cols()
            )));
        }
        let padded = pad_to(image, &layout)?;
        let tag = mu3(&padded, layout.p1, layout.p2);
        let c0 = self.c0(tag)?;
        let mut blocks = split_blocks(&padded, &layout)?;
        for _ in 0..self.cipher.params.rounds() {
            blocks = encrypt_round(&blocks, &self.d_blocks, self.cipher.v, &c0)?;
        }
        Ok(Encrypted {
            image: join_blocks(&blocks, &layout)?,
            mu3: tag,
            layout,
        })
    }

    pub fn decrypt(&self, cipher: &GrayImage, mu3: u16) -> Result<GrayImage> {
        self.layout.check_padded(cipher)?;
        let c0 = self.c0(mu3)?;
        let mut blocks = split_blocks(cipher, &self.layout)?;
        for _ in 0..self.cipher.params.rounds() {
            blocks = decrypt_round(&blocks, &self.d_blocks, self.cipher.v, &c0)?;
        }
        join_blocks(&blocks, &self.layout)
    }
}

/// Seeds from `λ`, selects the layout, pads, and runs `R` rounds.
pub fn encrypt(
    image: &GrayImage,
    key: &SecretKey,
    params: &PublicParams,
    lambda: f64,
) -> Result<Encrypted> {
    Ieae::new(*key, *params, lambda)?.encrypt(image)
}

/// Inverse of [`encrypt`]; returns the padded plaintext.
pub fn decrypt(
    cipher: &GrayImage,
    key: &SecretKey,
    params: &PublicParams,
    lambda: f64,
    mu3: u16,
) -> Result<GrayImage> {
    Ieae::new(*key, *params, lambda)?.decrypt(cipher, mu3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_stream(values: &[u8]) -> BlockStream {
        BlockStream::new(1, 1, values.iter().map(|&v| vec![v]).collect()).unwrap()
    }

    fn random_image(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> GrayImage {
        GrayImage::from_fn(rows, cols, |_, _| rng.random())
    }

    #[test]
    fn table_lookup() {
        let by_q = |q1: u8, q2: u8| {
            // bytes 0, 1, 2 have residues 0, 1, 2 after the 10^14 scaling
            let mut bytes = vec![0u8; 256];
            bytes[0] = q1;
            bytes[1] = q2;
            select_block_size(&ByteSequence::from_bytes(bytes), 1, 2).unwrap()
        };
        assert_eq!(by_q(0, 1), (8, 16));
        assert_eq!(by_q(0, 0), (8, 8));
        assert_eq!(by_q(2, 2), (32, 32));
        assert_eq!(by_q(1, 2), (16, 32));
        assert_eq!(table_block_sizes().count(), 9);
    }

    #[test]
    fn mu3_examples() {
        assert_eq!(mu3(&GrayImage::zeros(8, 8), 8, 8), 1);
        let mut img = GrayImage::zeros(16, 16);
        img.set(3, 4, 255);
        assert_eq!(mu3(&img, 8, 8), 256);
        img.set(0, 0, 1);
        assert_eq!(mu3(&img, 8, 8), 1);
        // pixels outside the first block do not count
        img.set(8, 8, 77);
        assert_eq!(mu3(&img, 8, 8), 1);
        // small images are treated as zero-padded
        assert_eq!(mu3(&GrayImage::new(1, 1, vec![9]).unwrap(), 8, 8), 10);
    }

    #[test]
    fn pad_examples() {
        let (p, l) = pad(&GrayImage::zeros(256, 256), 8, 8).unwrap();
        assert_eq!((p.dims(), l.r1, l.r2), ((256, 256), 32, 32));
        let img = GrayImage::from_fn(10, 10, |i, j| (i + j) as u8 + 1);
        let (p, l) = pad(&img, 8, 8).unwrap();
        assert_eq!((p.dims(), l.r1, l.r2), ((16, 16), 2, 2));
        assert_eq!(p.crop(10, 10).unwrap(), img);
        assert_eq!(p.get(15, 15), 0);
        assert_eq!((l.original_rows, l.original_cols), (10, 10));
        let (p, l) = pad(&GrayImage::zeros(512, 512), 8, 16).unwrap();
        assert_eq!((p.dims(), l.r1, l.r2), ((512, 512), 64, 32));
    }

    #[test]
    fn split_examples() {
        let img = GrayImage::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        let layout = BlockLayout::new(1, 1, 2, 2).unwrap();
        let s = split_blocks(&img, &layout).unwrap();
        assert_eq!(s.blocks(), &[vec![1], vec![2], vec![3], vec![4]]);

        let img = GrayImage::from_fn(4, 4, |i, j| (i * 4 + j) as u8);
        let layout = BlockLayout::new(2, 2, 4, 4).unwrap();
        let s = split_blocks(&img, &layout).unwrap();
        assert_eq!(s.blocks()[1], vec![2, 3, 6, 7]);
        assert_eq!(join_blocks(&s, &layout).unwrap(), img);

        let wrong = BlockLayout::new(2, 2, 6, 4).unwrap();
        assert!(matches!(split_blocks(&img, &wrong), Err(Error::Layout(_))));
    }

    #[test]
    fn round_examples() {
        let c = encrypt_round(&unit_stream(&[1, 2]), &unit_stream(&[5, 99]), 3, &[7]).unwrap();
        assert_eq!(c, unit_stream(&[23, 25]));
        let c2 = encrypt_round(&c, &unit_stream(&[5, 99]), 3, &[7]).unwrap();
        assert_eq!(c2, unit_stream(&[45, 70]));
        assert_eq!(
            decrypt_round(&c2, &unit_stream(&[5, 99]), 3, &[7]).unwrap(),
            c
        );

        // degenerate keystream gives prefix sums
        let c = encrypt_round(
            &unit_stream(&[200, 100, 1]),
            &unit_stream(&[9, 9, 9]),
            0,
            &[0],
        )
        .unwrap();
        assert_eq!(c, unit_stream(&[200, 44, 45]));

        assert!(encrypt_round(&unit_stream(&[1, 2]), &unit_stream(&[1]), 1, &[0]).is_err());
        assert!(encrypt_round(&unit_stream(&[1]), &unit_stream(&[1]), 1, &[0, 0]).is_err());
    }

    #[test]
    fn key_validation() {
        assert!(SecretKey::experiment().validate().is_ok());
        let mut k = SecretKey::experiment();
        k.omega1 = 0;
        assert!(matches!(k.validate(), Err(Error::KeyDomain(_))));
        let mut k = SecretKey::experiment();
        k.mu2 = 257;
        assert!(k.validate().is_err());
        let mut k = SecretKey::experiment();
        k.mu = 4.01;
        assert!(k.validate().is_err());
        let mut k = SecretKey::experiment();
        k.b = 0;
        assert!(k.validate().is_err());
        assert!(PublicParams::new(0).is_err());
    }

    #[test]
    fn zero_image_tag() {
        let params = PublicParams::new(3).unwrap();
        let enc = encrypt(
            &GrayImage::zeros(8, 8),
            &SecretKey::experiment(),
            &params,
            0.4321,
        )
        .unwrap();
        assert_eq!(enc.mu3, 1);
    }

    #[test]
    fn round_trip_and_wrong_tag() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rounds in 1..=3 {
            let params = PublicParams::new(rounds).unwrap();
            let key = SecretKey::experiment();
            let lambda = rng.random_range(-3.0..3.0);
            let cipher = Ieae::new(key, params, lambda).unwrap();
            let img = random_image(&mut rng, 37, 45);
            let enc = cipher.encrypt(&img).unwrap();
            let (p1, p2) = cipher.block_size();
            assert_eq!(
                enc.image.dims(),
                (37usize.div_ceil(p1) * p1, 45usize.div_ceil(p2) * p2)
            );
            let dec = cipher.decrypt(&enc.image, enc.mu3).unwrap();
            assert_eq!(dec.crop(37, 45).unwrap(), img);
            let wrong = enc.mu3 % 256 + 1;
            assert_ne!(
                cipher
                    .decrypt(&enc.image, wrong)
                    .unwrap()
                    .crop(37, 45)
                    .unwrap(),
                img
            );
            assert!(cipher.decrypt(&enc.image, 0).is_err());
        }
    }

    #[test]
    fn decrypt_rejects_unaligned_cipher() {
        let cipher =
            Ieae::new(SecretKey::experiment(), PublicParams::new(1).unwrap(), 0.25).unwrap();
        assert!(matches!(
            cipher.decrypt(&GrayImage::zeros(9, 9), 1),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn free_functions_match_instance() {
        let params = PublicParams::new(2).unwrap();
        let key = SecretKey::experiment();
        let img = GrayImage::from_fn(20, 30, |i, j| (i * j) as u8);
        let enc = encrypt(&img, &key, &params, 1.75).unwrap();
        assert_eq!(
            enc,
            Ieae::new(key, params, 1.75).unwrap().encrypt(&img).unwrap()
        );
        let dec = decrypt(&enc.image, &key, &params, 1.75, enc.mu3).unwrap();
        assert_eq!(dec.crop(20, 30).unwrap(), img);
    }

    #[test]
    fn keystream_set_is_consistent() {
        let cipher =
            Ieae::new(SecretKey::experiment(), PublicParams::new(1).unwrap(), 0.9).unwrap();
        let layout = cipher.layout_for(40, 40).unwrap();
        let ks = cipher.keystream(&layout, 17).unwrap();
        assert_eq!(ks.d.dims(), layout.padded_dims());
        assert_eq!(ks.c0.dims(), cipher.block_size());
        assert_eq!(ks.r, cipher.xbar().get(20).unwrap());
        assert_eq!(ks.v, cipher.xbar().get(15).unwrap());
        assert_eq!(ks.c0.pixels()[0], cipher.xbar().get(17).unwrap());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn split_join_inverse(seed in 0u64..u64::MAX, br in 1usize..4, bc in 1usize..4, p1 in 1usize..5, p2 in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layout = BlockLayout::new(p1, p2, br * p1, bc * p2).unwrap();
            let img = random_image(&mut rng, br * p1, bc * p2);
            let s = split_blocks(&img, &layout).unwrap();
            proptest::prop_assert_eq!(s.len(), br * bc);
            proptest::prop_assert_eq!(join_blocks(&s, &layout).unwrap(), img);
        }
    }
}
