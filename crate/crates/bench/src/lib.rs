//! Fixtures shared by the criterion benches.

use ieae_core::{GrayImage, Ieae, PublicParams, SecretKey};

/// Smooth synthetic test card: a diagonal ramp with a low-frequency ripple.
pub fn test_card(rows: usize, cols: usize) -> GrayImage {
    GrayImage::from_fn(rows, cols, |i, j| {
        let ripple = ((i / 16 + j / 16) % 4) as u8 * 8;
        ((i + j) as u8 / 2).wrapping_add(ripple)
    })
}

/// Logistic orbit at μ = 4, a chaotic series with known exponent ln 2.
pub fn logistic_series(x0: f64, n: usize) -> Vec<f64> {
    let mut x = x0;
    (0..n)
        .map(|_| {
            x = 4.0 * x * (1.0 - x);
            x
        })
        .collect()
}

/// The experiment key with a fixed λ and `rounds` rounds.
pub fn experiment_cipher(rounds: u32) -> Ieae {
    Ieae::new(
        SecretKey::experiment(),
        PublicParams::new(rounds).unwrap(),
        0.4321,
    )
    .unwrap()
}
