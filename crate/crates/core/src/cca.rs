//! SSVEP target recognition by canonical correlation against harmonic
//! sin/cos reference banks.
//!
//! The first canonical correlation ρ between the channel matrix `X` and a
//! reference matrix `Y` is the square root of the largest eigenvalue of
//! `Cxx⁻¹ Cxy Cyy⁻¹ Cyx`. Both sides are centred and scaled to unit variance
//! per row, ridged by `ε·trace(C)/dim` and whitened with a Cholesky factor;
//! ρ is then the top singular value of the whitened cross-covariance.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eeg::EegWindow;
use crate::error::{domain, Error, Result};

/// Relative ridge added to both covariance matrices before inversion.
pub const RIDGE_EPS: f64 = 1e-8;

pub const DEFAULT_HARMONICS: usize = 5;

/// Reference matrix for one frequency: rows `sin(2πnft), cos(2πnft)` for
/// `n = 1..=N`, `t = 1/F_s .. N_s/F_s`.
pub fn reference_matrix(freq: f64, sampling_rate: f64, n_samples: usize, n_harmonics: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n_harmonics, n_samples, |row, col| {
        let order = (row / 2 + 1) as f64;
        let t = (col + 1) as f64 / sampling_rate;
        let arg = TAU * order * freq * t;
        if row % 2 == 0 {
            arg.sin()
        } else {
            arg.cos()
        }
    })
}

/// Whitened view of one side of a CCA problem.
#[derive(Debug, Clone)]
struct Whitened {
    /// `N_s × d`, columns with identity (ridged) covariance.
    data: DMatrix<f64>,
}

impl Whitened {
    /// `rows` is `d × N_s`. Returns `None` when every row is constant.
    fn from_rows(rows: &DMatrix<f64>) -> Option<Self> {
        let n = rows.ncols();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(rows.nrows());
        for r in 0..rows.nrows() {
            let row = rows.row(r);
            let mean = row.sum() / n as f64;
            let centred: Vec<f64> = row.iter().map(|v| v - mean).collect();
            let ss: f64 = centred.iter().map(|v| v * v).sum();
            let sd = (ss / (n as f64 - 1.0).max(1.0)).sqrt();
            // constant rows carry no correlation; drop them
            if sd > 0.0 && sd.is_finite() && ss > f64::MIN_POSITIVE {
                cols.push(centred.into_iter().map(|v| v / sd).collect());
            }
        }
        if cols.is_empty() {
            return None;
        }
        let d = cols.len();
        let centred = DMatrix::from_fn(n, d, |i, j| cols[j][i]);
        let dof = (n as f64 - 1.0).max(1.0);
        let mut cov = centred.transpose() * &centred / dof;
        let ridge = RIDGE_EPS * cov.trace() / d as f64;
        for i in 0..d {
            cov[(i, i)] += ridge;
        }
        let chol = cov.cholesky()?;
        // data · L⁻ᵀ, i.e. solve L · Wᵀ = dataᵀ
        let wt = chol.l().solve_lower_triangular(&centred.transpose())?;
        Some(Self {
            data: wt.transpose(),
        })
    }

    fn correlation_with(&self, other: &Whitened) -> f64 {
        let n = self.data.nrows();
        let dof = (n as f64 - 1.0).max(1.0);
        let k = self.data.transpose() * &other.data / dof;
        let gram = if k.nrows() <= k.ncols() {
            &k * k.transpose()
        } else {
            k.transpose() * &k
        };
        let top = SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .copied()
            .fold(0.0_f64, f64::max);
        top.max(0.0).sqrt().clamp(0.0, 1.0)
    }
}

fn window_matrix(window: &EegWindow) -> DMatrix<f64> {
    DMatrix::from_fn(window.n_channels(), window.n_samples(), |r, c| window.samples[r][c])
}

/// First canonical correlation between `window` (channels × N_s) and a
/// reference matrix (rows × N_s). Zero for an all-constant window.
pub fn cca_correlation(window: &EegWindow, reference: &DMatrix<f64>) -> Result<f64> {
    window.validate()?;
    if window.n_channels() < 2 {
        return Err(domain("CCA needs at least two channels"));
    }
    if window.n_samples() != reference.ncols() {
        return Err(domain(format!(
            "window has {} samples, reference {}",
            window.n_samples(),
            reference.ncols()
        )));
    }
    let (Some(x), Some(y)) = (
        Whitened::from_rows(&window_matrix(window)),
        Whitened::from_rows(reference),
    ) else {
        return Ok(0.0);
    };
    Ok(x.correlation_with(&y))
}

/// Per-frequency reference matrices for one window geometry. Immutable and
/// shareable once built.
#[derive(Debug, Clone)]
pub struct ReferenceBank {
    pub frequencies: Vec<f64>,
    pub sampling_rate: f64,
    pub n_samples: usize,
    pub n_harmonics: usize,
    pub references: Vec<DMatrix<f64>>,
    whitened: Vec<Option<Whitened>>,
}

impl ReferenceBank {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

pub fn build_reference_bank(
    sampling_rate: f64,
    n_samples: usize,
    n_harmonics: usize,
    frequencies: &[f64],
) -> Result<ReferenceBank> {
    if n_harmonics == 0 || n_samples == 0 {
        return Err(domain("reference bank needs ≥ 1 harmonic and ≥ 1 sample"));
    }
    let nyquist = sampling_rate / 2.0;
    if let Some(f) = frequencies
        .iter()
        .find(|f| n_harmonics as f64 * **f >= nyquist)
    {
        return Err(Error::Config(format!(
            "harmonic {n_harmonics} of {f} Hz reaches Nyquist {nyquist} Hz"
        )));
    }
    let references: Vec<DMatrix<f64>> = frequencies
        .iter()
        .map(|f| reference_matrix(*f, sampling_rate, n_samples, n_harmonics))
        .collect();
    let whitened = references.iter().map(Whitened::from_rows).collect();
    Ok(ReferenceBank {
        frequencies: frequencies.to_vec(),
        sampling_rate,
        n_samples,
        n_harmonics,
        references,
        whitened,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    /// Canonical correlation per target, index `k-1`.
    pub scores: Vec<f64>,
    /// 1-based target index of the highest score; ties go to the lower index.
    pub best_k: usize,
    /// Best score minus second-best score.
    pub confidence: f64,
}

/// Scores every frequency in `bank` and picks the best. With
/// `min_confidence`, a margin below the threshold is [`Error::NoDecision`].
pub fn recognize(window: &EegWindow, bank: &ReferenceBank, min_confidence: Option<f64>) -> Result<RecognitionResult> {
    window.validate()?;
    if bank.is_empty() {
        return Err(domain("empty reference bank"));
    }
    if window.n_channels() < 2 {
        return Err(domain("CCA needs at least two channels"));
    }
    if window.n_samples() != bank.n_samples {
        return Err(domain(format!(
            "window has {} samples, bank expects {}",
            window.n_samples(),
            bank.n_samples
        )));
    }
    let x = Whitened::from_rows(&window_matrix(window));
    let scores: Vec<f64> = bank
        .whitened
        .par_iter()
        .map(|y| match (&x, y) {
            (Some(x), Some(y)) => x.correlation_with(y),
            _ => 0.0,
        })
        .collect();

    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    let second = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, s)| *s)
        .fold(0.0_f64, f64::max);
    let confidence = scores[best] - second;
    if let Some(threshold) = min_confidence {
        if confidence < threshold {
            return Err(Error::NoDecision {
                confidence,
                threshold,
            });
        }
    }
    Ok(RecognitionResult {
        scores,
        best_k: best + 1,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimulus::StimulusConfig;

    fn grid() -> Vec<f64> {
        StimulusConfig::default().frequencies()
    }

    #[test]
    fn bank_shape() {
        let bank = build_reference_bank(250.0, 250, 5, &grid()).unwrap();
        assert_eq!(bank.len(), 33);
        assert!(bank.references.iter().all(|r| r.nrows() == 10 && r.ncols() == 250));
        let expected = (TAU * 8.0 / 250.0).sin();
        assert!((bank.references[0][(0, 0)] - expected).abs() < 1e-15);
        assert!((bank.references[0][(1, 0)] - (TAU * 8.0 / 250.0).cos()).abs() < 1e-15);
    }

    #[test]
    fn nyquist_violation_is_config_error() {
        let err = build_reference_bank(100.0, 100, 5, &grid()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn self_correlation_is_one() {
        let r = reference_matrix(10.16, 250.0, 250, 5);
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|i| r.row(i).iter().copied().collect())
            .collect();
        let w = EegWindow::unlabeled(250.0, rows).unwrap();
        let rho = cca_correlation(&w, &r).unwrap();
        assert!((rho - 1.0).abs() < 1e-6, "rho {rho}");
    }

    #[test]
    fn constant_window_scores_zero() {
        let w = EegWindow::unlabeled(250.0, vec![vec![3.0; 250]; 9]).unwrap();
        let bank = build_reference_bank(250.0, 250, 5, &grid()).unwrap();
        let r = recognize(&w, &bank, None).unwrap();
        assert!(r.scores.iter().all(|s| *s == 0.0));
        assert_eq!(r.best_k, 1);
        let err = recognize(&w, &bank, Some(0.01)).unwrap_err();
        assert!(matches!(err, Error::NoDecision { .. }));
    }

    #[test]
    fn length_mismatch_rejected() {
        let w = EegWindow::unlabeled(250.0, vec![vec![0.0; 100]; 9]).unwrap();
        let bank = build_reference_bank(250.0, 250, 5, &grid()).unwrap();
        assert!(matches!(recognize(&w, &bank, None), Err(Error::Domain(_))));
        assert!(cca_correlation(&w, &bank.references[0]).is_err());
    }

    #[test]
    fn single_channel_rejected() {
        let w = EegWindow::unlabeled(250.0, vec![vec![1.0; 250]]).unwrap();
        let bank = build_reference_bank(250.0, 250, 5, &grid()).unwrap();
        assert!(recognize(&w, &bank, None).is_err());
    }
}
