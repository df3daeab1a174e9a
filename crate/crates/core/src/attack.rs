//! Known-plaintext equivalent-key attack.
//!
//! Every round is `C = P(I) + w` block-wise, where `P` is the mod-256 block
//! prefix sum and `w` depends only on `(D, v, C0)`. After `R` rounds,
//! `C = P^R(I) + D'` with `D'` independent of the plaintext once `μ3` (and
//! hence `C0`) is fixed. One known pair therefore yields `D'`, which then
//! decrypts any cipher image of a plaintext with the same `μ3`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cipher::{
    self, join_blocks, split_blocks, table_block_sizes, BlockLayout, BlockStream, Ieae,
};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Equivalent key recovered from one known pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    pub mask: GrayImage,
    pub layout: BlockLayout,
    pub rounds: u32,
    /// `μ3` of the plaintext the mask came from, in `[1, 256]`.
    pub mu3_tag: u16,
}

fn require_non_empty(blocks: &BlockStream) -> Result<()> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("block stream is empty".into()));
    }
    Ok(())
}

/// `S_k = Σ_{i<=k} B_i mod 256`, element-wise.
pub fn block_prefix_sum(blocks: &BlockStream) -> Result<BlockStream> {
    require_non_empty(blocks)?;
    let (p1, p2) = blocks.block_dims();
    let mut acc = vec![0u8; p1 * p2];
    let out = blocks
        .blocks()
        .iter()
        .map(|b| {
            for (a, &x) in acc.iter_mut().zip(b) {
                *a = a.wrapping_add(x);
            }
            acc.clone()
        })
        .collect();
    BlockStream::new(p1, p2, out)
}

/// `T_k = S_k - S_{k-1} mod 256`; inverse of [`block_prefix_sum`].
pub fn block_prefix_diff(blocks: &BlockStream) -> Result<BlockStream> {
    require_non_empty(blocks)?;
    let (p1, p2) = blocks.block_dims();
    let bs = blocks.blocks();
    let out = bs
        .iter()
        .enumerate()
        .map(|(k, b)| match k {
            0 => b.clone(),
            _ => b
                .iter()
                .zip(&bs[k - 1])
                .map(|(x, y)| x.wrapping_sub(*y))
                .collect(),
        })
        .collect();
    BlockStream::new(p1, p2, out)
}

/// `R`-fold block prefix sum.
pub fn nested_sum(blocks: &BlockStream, rounds: u32) -> Result<BlockStream> {
    if rounds == 0 {
        return Err(Error::InvalidArgument(
            "round count must be at least 1".into(),
        ));
    }
    let mut s = block_prefix_sum(blocks)?;
    for _ in 1..rounds {
        s = block_prefix_sum(&s)?;
    }
    Ok(s)
}

/// `R`-fold block prefix difference; inverse of [`nested_sum`].
pub fn nested_diff(blocks: &BlockStream, rounds: u32) -> Result<BlockStream> {
    require_non_empty(blocks)?;
    let mut s = blocks.clone();
    for _ in 0..rounds {
        s = block_prefix_diff(&s)?;
    }
    Ok(s)
}

/// Literal evaluation of the closed-form nested summation with innermost
/// upper bound `k - h_{R-1} + 1`, for `R` in `{2, 3}`:
///
/// ```text
/// R = 2:  Σ_{h1=1}^{k} Σ_{i=1}^{k-h1+1} I_i
/// R = 3:  Σ_{h1=1}^{k} Σ_{h2=1}^{h1} Σ_{i=1}^{k-h2+1} I_i
/// ```
///
/// Kept only to compare against [`nested_sum`].
pub fn closed_form_nested_sum(blocks: &BlockStream, rounds: u32) -> Result<BlockStream> {
    require_non_empty(blocks)?;
    if !(2..=3).contains(&rounds) {
        return Err(Error::InvalidArgument(format!(
            "closed form is evaluated for R in {{2, 3}}, got {rounds}"
        )));
    }
    let (p1, p2) = blocks.block_dims();
    let bs = blocks.blocks();
    let len = p1 * p2;
    let add_prefix = |acc: &mut [u8], upto: usize| {
        for b in &bs[..upto] {
            for (a, &x) in acc.iter_mut().zip(b) {
                *a = a.wrapping_add(x);
            }
        }
    };
    let mut out = Vec::with_capacity(bs.len());
    for k in 1..=bs.len() {
        let mut acc = vec![0u8; len];
        for h1 in 1..=k {
            if rounds == 2 {
                add_prefix(&mut acc, k - h1 + 1);
            } else {
                for h2 in 1..=h1 {
                    add_prefix(&mut acc, k - h2 + 1);
                }
            }
        }
        out.push(acc);
    }
    BlockStream::new(p1, p2, out)
}

fn check_dims(a: &GrayImage, b: &GrayImage, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Layout(format!(
            "{what}: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// `D' = C - P^R(I) mod 256`, with `I` zero-padded to the layout.
pub fn extract_mask(
    plain: &GrayImage,
    cipher: &GrayImage,
    layout: &BlockLayout,
    rounds: u32,
) -> Result<MaskImage> {
    let padded = cipher::pad_to(plain, layout)?;
    check_dims(&padded, cipher, "padded plaintext and cipher differ")?;
    let summed = join_blocks(
        &nested_sum(&split_blocks(&padded, layout)?, rounds)?,
        layout,
    )?;
    Ok(MaskImage {
        mask: cipher.wrapping_sub(&summed)?,
        layout: *layout,
        rounds,
        mu3_tag: cipher::mu3(&padded, layout.p1, layout.p2),
    })
}

/// `P^{-R}(C - D')`. Exact whenever the target plaintext shares the mask's `μ3`.
pub fn decrypt_with_mask(cipher: &GrayImage, mask: &MaskImage) -> Result<GrayImage> {
    check_dims(cipher, &mask.mask, "cipher and mask differ")?;
    let unmasked = cipher.wrapping_sub(&mask.mask)?;
    let plain = nested_diff(&split_blocks(&unmasked, &mask.layout)?, mask.rounds)?;
    join_blocks(&plain, &mask.layout)
}

pub fn mu3_match(a: &GrayImage, b: &GrayImage, p1: usize, p2: usize) -> bool {
    cipher::mu3(a, p1, p2) == cipher::mu3(b, p1, p2)
}

/// Mean absolute difference between horizontally and vertically adjacent pixels.
pub fn roughness(image: &GrayImage) -> f64 {
    let (rows, cols) = image.dims();
    let mut total = 0u64;
    let mut count = 0u64;
    for i in 0..rows {
        for j in 0..cols {
            let p = i32::from(image.get(i, j));
            if j + 1 < cols {
                total += (p - i32::from(image.get(i, j + 1))).unsigned_abs() as u64;
                count += 1;
            }
            if i + 1 < rows {
                total += (p - i32::from(image.get(i + 1, j))).unsigned_abs() as u64;
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total as f64 / count as f64
    }
}

#[derive(Debug, Clone)]
pub struct LayoutCandidate {
    pub layout: BlockLayout,
    pub mask: MaskImage,
    /// Roughness of the second cipher decrypted with this mask; lower is
    /// more plausible. `None` when no second cipher was supplied.
    pub score: Option<f64>,
}

/// Extracts a mask under every table block size that tiles the cipher.
///
/// Every candidate reproduces the training pair by construction, so ranking
/// needs a second cipher image: candidates are then sorted by the roughness
/// of its trial decryption. Without one, candidates come back in table
/// order.
pub fn enumerate_layout_candidates(
    plain: &GrayImage,
    cipher: &GrayImage,
    rounds: u32,
    second: Option<&GrayImage>,
) -> Result<Vec<LayoutCandidate>> {
    let (rows, cols) = cipher.dims();
    let mut out = Vec::new();
    for (p1, p2) in table_block_sizes() {
        if rows % p1 != 0 || cols % p2 != 0 || plain.rows() > rows || plain.cols() > cols {
            continue;
        }
        let layout = BlockLayout {
            p1,
            p2,
            r1: rows / p1,
            r2: cols / p2,
            original_rows: plain.rows(),
            original_cols: plain.cols(),
        };
        let mask = extract_mask(plain, cipher, &layout, rounds)?;
        let score = match second {
            Some(c2) => Some(roughness(&decrypt_with_mask(c2, &mask)?)),
            None => None,
        };
        out.push(LayoutCandidate {
            layout,
            mask,
            score,
        });
    }
    if second.is_some() {
        out.sort_by(|a, b| a.score.partial_cmp(&b.score).expect("scores are finite"));
    }
    Ok(out)
}

/// Outcome of the mask-transfer experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub trials: usize,
    pub reference_mu3: u16,
    /// Trials whose plaintext shares the reference `μ3`.
    pub mu3_matches: usize,
    /// Trials recovered exactly by the reference mask.
    pub successes: usize,
    /// Trials where success and `μ3` match disagree; zero if the attack is sound.
    pub inconsistent: usize,
}

impl ExperimentReport {
    pub const EXPECTED_RATE: f64 = 1.0 / 256.0;

    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn expected_successes(&self) -> f64 {
        self.trials as f64 * Self::EXPECTED_RATE
    }

    /// Binomial standard deviation of the success count.
    pub fn sigma(&self) -> f64 {
        (self.trials as f64 * Self::EXPECTED_RATE * (1.0 - Self::EXPECTED_RATE)).sqrt()
    }

    pub fn within_sigmas(&self, k: f64) -> bool {
        (self.mu3_matches as f64 - self.expected_successes()).abs() <= k * self.sigma()
    }
}

impl std::fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "trials={}", self.trials)?;
        writeln!(f, "reference_mu3={}", self.reference_mu3)?;
        writeln!(f, "mu3_matches={}", self.mu3_matches)?;
        writeln!(f, "successes={}", self.successes)?;
        writeln!(f, "inconsistent={}", self.inconsistent)?;
        writeln!(f, "success_rate={:.6}", self.success_rate())?;
        writeln!(f, "expected_rate={:.6}", Self::EXPECTED_RATE)?;
        write!(
            f,
            "expected_successes={:.2} sigma={:.3}",
            self.expected_successes(),
            self.sigma()
        )
    }
}

/// Encrypts `reference`, extracts its mask, and applies it to `trials`
/// uniformly random plaintexts of the same size drawn from a ChaCha8 stream
/// seeded with `rng_seed`.
pub fn run_experiment(
    cipher: &Ieae,
    reference: &GrayImage,
    trials: usize,
    rng_seed: u64,
) -> Result<ExperimentReport> {
    let prepared = cipher.prepare(reference.rows(), reference.cols())?;
    let enc = prepared.encrypt(reference)?;
    let mask = extract_mask(reference, &enc.image, &enc.layout, cipher.params().rounds())?;
    let padded_ref = cipher::pad_to(reference, &enc.layout)?;

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut pixels = vec![0u8; reference.rows() * reference.cols()];
    let mut report = ExperimentReport {
        trials,
        reference_mu3: enc.mu3,
        mu3_matches: 0,
        successes: 0,
        inconsistent: 0,
    };
    for _ in 0..trials {
        rng.fill(&mut pixels[..]);
        let trial = GrayImage::new(reference.rows(), reference.cols(), pixels.clone())?;
        let target = prepared.encrypt(&trial)?;
        let recovered = decrypt_with_mask(&target.image, &mask)?;
        let padded = cipher::pad_to(&trial, &enc.layout)?;
        let matched = mu3_match(&padded, &padded_ref, enc.layout.p1, enc.layout.p2);
        let success = recovered == padded;
        report.mu3_matches += usize::from(matched);
        report.successes += usize::from(success);
        report.inconsistent += usize::from(matched != success);
    }
    Ok(report)
}
