//! Per-qubit readout bit-flip noise and its calibration-based inversion.
//!
//! The confusion matrix of a qubit maps true outcome columns to measured
//! rows: `[[1 - p01, p10], [p01, 1 - p10]]`, where `p01` is the probability
//! that a true 0 reads 1 and `p10` that a true 1 reads 0.

use crate::pauli::PauliSum;
use crate::prelude::*;
use crate::rng::SimRng;
use crate::statevec::Counts;
use crate::{Error, Result};

/// Bit-flip probabilities `(p01, p10)` per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutNoiseModel {
    flips: Vec<(f64, f64)>,
}

impl ReadoutNoiseModel {
    pub fn new(flips: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &flips {
            for p in [a, b] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidProbability(p));
                }
            }
        }
        Ok(Self { flips })
    }

    pub fn symmetric(n_qubits: usize, p: f64) -> Result<Self> {
        Self::new(vec![(p, p); n_qubits])
    }

    pub fn noiseless(n_qubits: usize) -> Self {
        Self { flips: vec![(0.0, 0.0); n_qubits] }
    }

    pub fn n_qubits(&self) -> usize {
        self.flips.len()
    }

    pub fn flips(&self) -> &[(f64, f64)] {
        &self.flips
    }

    /// The exact confusion matrices of the model.
    pub fn confusion(&self) -> CalibrationMatrix {
        CalibrationMatrix { flips: self.flips.clone() }
    }
}

/// Estimated per-qubit confusion matrices, stored as `(p01, p10)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationMatrix {
    flips: Vec<(f64, f64)>,
}

impl CalibrationMatrix {
    pub fn new(flips: Vec<(f64, f64)>) -> Result<Self> {
        Ok(ReadoutNoiseModel::new(flips)?.confusion())
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self { flips: vec![(0.0, 0.0); n_qubits] }
    }

    pub fn n_qubits(&self) -> usize {
        self.flips.len()
    }

    pub fn flips(&self) -> &[(f64, f64)] {
        &self.flips
    }

    /// Row-major confusion matrix of one qubit.
    pub fn matrix(&self, qubit: usize) -> [[f64; 2]; 2] {
        let (p01, p10) = self.flips[qubit];
        [[1.0 - p01, p10], [p01, 1.0 - p10]]
    }

    fn inverses(&self) -> Result<Vec<[[f64; 2]; 2]>> {
        (0..self.n_qubits())
            .map(|q| {
                let m = self.matrix(q);
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                if det.abs() < 1e-12 {
                    return Err(Error::SingularCalibration { qubit: q });
                }
                Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
            })
            .collect()
    }
}

/// Flips every recorded bit independently. Shot totals are preserved.
pub fn apply_readout_noise(counts: &Counts, model: &ReadoutNoiseModel, seed: u64) -> Result<Counts> {
    let n = counts.n_qubits();
    if model.n_qubits() != n {
        return Err(Error::QubitCountMismatch { expected: n, found: model.n_qubits() });
    }
    let mut rng = SimRng::new(seed);
    let mut out = Counts::new(n);
    for (idx, count) in counts.iter() {
        // Split the group qubit by qubit into flipped and kept shots.
        let mut groups = vec![(idx, count)];
        for (q, &(p01, p10)) in model.flips().iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            let mut next = Vec::with_capacity(groups.len() * 2);
            for (i, c) in groups {
                let p = if i & bit == 0 { p01 } else { p10 };
                let flipped = rng.binomial(c, p);
                if flipped > 0 {
                    next.push((i ^ bit, flipped));
                }
                if c > flipped {
                    next.push((i, c - flipped));
                }
            }
            groups = next;
        }
        for (i, c) in groups {
            out.add(i, c);
        }
    }
    Ok(out)
}

/// Runs the all-0 and all-1 preparations through the noise model and
/// estimates each qubit's flip probabilities from the marginals.
pub fn calibrate(model: &ReadoutNoiseModel, shots_per_circuit: u64, seed: u64) -> Result<CalibrationMatrix> {
    if shots_per_circuit == 0 {
        return Err(Error::NoShots);
    }
    let n = model.n_qubits();
    let all_ones = (1usize << n) - 1;
    let mut zeros = Counts::new(n);
    zeros.add(0, shots_per_circuit);
    let mut ones = Counts::new(n);
    ones.add(all_ones, shots_per_circuit);
    let noisy0 = apply_readout_noise(&zeros, model, seed)?;
    let noisy1 = apply_readout_noise(&ones, model, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?;
    let shots = shots_per_circuit as f64;
    let flips = (0..n)
        .map(|q| {
            let bit = 1usize << (n - 1 - q);
            let read1 = noisy0.iter().filter(|(i, _)| i & bit != 0).map(|(_, c)| c).sum::<u64>() as f64;
            let read0 = noisy1.iter().filter(|(i, _)| i & bit == 0).map(|(_, c)| c).sum::<u64>() as f64;
            (read1 / shots, read0 / shots)
        })
        .collect();
    Ok(CalibrationMatrix { flips })
}

/// Output of [`mitigate`].
#[derive(Clone, Debug, PartialEq)]
pub struct MitigatedDistribution {
    /// Inverse-corrected frequencies; may hold small negative entries.
    pub quasi_probabilities: Vec<f64>,
    /// Negative entries clipped to zero and renormalized.
    pub probabilities: Vec<f64>,
    /// Total weight removed by clipping.
    pub clip_magnitude: f64,
    raw: Vec<f64>,
    shots: u64,
    inverses: Vec<[[f64; 2]; 2]>,
}

/// Applies `M_0^{-1} (x) ... (x) M_{n-1}^{-1}` along each qubit axis.
fn apply_tensor(v: &mut [f64], mats: &[[[f64; 2]; 2]], transpose: bool) {
    let n = mats.len();
    for (q, m) in mats.iter().enumerate() {
        let bit = 1usize << (n - 1 - q);
        let m = if transpose { [[m[0][0], m[1][0]], [m[0][1], m[1][1]]] } else { *m };
        for i in 0..v.len() {
            if i & bit == 0 {
                let (a, b) = (v[i], v[i | bit]);
                v[i] = m[0][0] * a + m[0][1] * b;
                v[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }
}

/// Tensor-structured inverse of the calibration applied to the empirical
/// frequencies.
pub fn mitigate(counts: &Counts, calibration: &CalibrationMatrix) -> Result<MitigatedDistribution> {
    if calibration.n_qubits() != counts.n_qubits() {
        return Err(Error::QubitCountMismatch { expected: counts.n_qubits(), found: calibration.n_qubits() });
    }
    let shots = counts.total();
    if shots == 0 {
        return Err(Error::NoShots);
    }
    let inverses = calibration.inverses()?;
    let raw = counts.frequencies();
    let mut quasi = raw.clone();
    apply_tensor(&mut quasi, &inverses, false);
    let clip_magnitude: f64 = quasi.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
    let mut probabilities: Vec<f64> = quasi.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = probabilities.iter().sum();
    if total > 0.0 {
        for p in &mut probabilities {
            *p /= total;
        }
    }
    Ok(MitigatedDistribution { quasi_probabilities: quasi, probabilities, clip_magnitude, raw, shots, inverses })
}

/// Diagonal of an observable built from `I` and `Z` letters only.
pub fn diagonal_of(obs: &PauliSum) -> Result<Vec<f64>> {
    obs.require_hermitian()?;
    let dim = 1usize << obs.n_qubits();
    let mut d = vec![0.0; dim];
    for t in obs.terms() {
        if !t.word.is_diagonal() {
            return Err(Error::InvalidArgument(format!("observable term {} is not diagonal", t.word)));
        }
        for (i, x) in d.iter_mut().enumerate() {
            *x += (t.coeff * t.word.apply_to_index(i).0).re;
        }
    }
    Ok(d)
}

impl MitigatedDistribution {
    /// Expectation under the clipped, renormalized distribution.
    pub fn expectation(&self, obs: &PauliSum) -> Result<f64> {
        let d = diagonal_of(obs)?;
        if d.len() != self.probabilities.len() {
            return Err(Error::QubitCountMismatch {
                expected: self.probabilities.len().trailing_zeros() as usize,
                found: obs.n_qubits(),
            });
        }
        Ok(self.probabilities.iter().zip(&d).map(|(p, o)| p * o).sum())
    }

    /// Expectation under the unclipped quasi-distribution; unbiased under the
    /// calibrated model.
    pub fn quasi_expectation(&self, obs: &PauliSum) -> Result<f64> {
        let d = diagonal_of(obs)?;
        Ok(self.quasi_probabilities.iter().zip(&d).map(|(p, o)| p * o).sum())
    }

    /// Multinomial standard error of the quasi expectation: the estimator is
    /// linear in the raw frequencies with weights `(M^{-1})^T o`.
    pub fn standard_error(&self, obs: &PauliSum) -> Result<f64> {
        let mut w = diagonal_of(obs)?;
        apply_tensor(&mut w, &self.inverses, true);
        let mean: f64 = self.raw.iter().zip(&w).map(|(q, x)| q * x).sum();
        let second: f64 = self.raw.iter().zip(&w).map(|(q, x)| q * x * x).sum();
        Ok(((second - mean * mean).max(0.0) / self.shots as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::{sample_counts, StateVector};

    fn counts1(zero: u64, one: u64) -> Counts {
        let mut c = Counts::new(1);
        c.add(0, zero);
        c.add(1, one);
        c
    }

    #[test]
    fn noiseless_and_full_flip() {
        let s = StateVector::random(3, 1).unwrap();
        let counts = sample_counts(&s, 1000, 2).unwrap();
        assert_eq!(apply_readout_noise(&counts, &ReadoutNoiseModel::noiseless(3), 5).unwrap(), counts);
        let flipped = apply_readout_noise(&counts, &ReadoutNoiseModel::symmetric(3, 1.0).unwrap(), 5).unwrap();
        for (i, c) in counts.iter() {
            assert_eq!(flipped.get(i ^ 0b111), c);
        }
        assert_eq!(flipped.total(), 1000);
    }

    #[test]
    fn five_percent_flips() {
        let noisy = apply_readout_noise(&counts1(10_000, 0), &ReadoutNoiseModel::symmetric(1, 0.05).unwrap(), 3).unwrap();
        let sigma = (10_000.0f64 * 0.05 * 0.95).sqrt();
        assert!((noisy.get(1) as f64 - 500.0).abs() < 5.0 * sigma);
        assert_eq!(noisy.total(), 10_000);
    }

    #[test]
    fn calibration_estimates() {
        let cal = calibrate(&ReadoutNoiseModel::noiseless(2), 1000, 1).unwrap();
        assert_eq!(cal, CalibrationMatrix::identity(2));
        let cal = calibrate(&ReadoutNoiseModel::symmetric(2, 0.1).unwrap(), 1_000_000, 2).unwrap();
        for &(a, b) in cal.flips() {
            assert!((a - 0.1).abs() < 0.002 && (b - 0.1).abs() < 0.002);
        }
        let shots = 100_000u64;
        let cal = calibrate(&ReadoutNoiseModel::new(vec![(0.02, 0.08)]).unwrap(), shots, 3).unwrap();
        let se = |p: f64| (p * (1.0 - p) / shots as f64).sqrt();
        assert!((cal.flips()[0].0 - 0.02).abs() < 3.0 * se(0.02));
        assert!((cal.flips()[0].1 - 0.08).abs() < 3.0 * se(0.08));
        assert!(matches!(calibrate(&ReadoutNoiseModel::noiseless(1), 0, 1), Err(Error::NoShots)));
    }

    #[test]
    fn worked_single_qubit_inverse() {
        let cal = CalibrationMatrix::new(vec![(0.1, 0.1)]).unwrap();
        let m = mitigate(&counts1(8, 2), &cal).unwrap();
        assert!((m.quasi_probabilities[0] - 0.875).abs() < 1e-12);
        let m = mitigate(&counts1(5, 5), &cal).unwrap();
        assert!((m.quasi_probabilities[0] - 0.5).abs() < 1e-12);
        let m = mitigate(&counts1(8, 2), &CalibrationMatrix::identity(1)).unwrap();
        assert_eq!(m.quasi_probabilities, vec![0.8, 0.2]);
    }

    #[test]
    fn singular_calibration_is_rejected() {
        let cal = CalibrationMatrix::new(vec![(0.3, 0.7)]).unwrap();
        assert!(matches!(mitigate(&counts1(5, 5), &cal), Err(Error::SingularCalibration { qubit: 0 })));
    }

    #[test]
    fn negative_quasi_probabilities_are_clipped() {
        let cal = CalibrationMatrix::new(vec![(0.1, 0.1)]).unwrap();
        let m = mitigate(&counts1(97, 3), &cal).unwrap();
        assert!(m.quasi_probabilities[1] < 0.0);
        assert!(m.clip_magnitude > 0.0);
        assert_eq!(m.probabilities, vec![1.0, 0.0]);
    }

    #[test]
    fn infinite_shot_limit_is_unbiased() {
        // Feed the exact noisy distribution as (large) counts.
        let model = ReadoutNoiseModel::new(vec![(0.03, 0.07), (0.05, 0.05)]).unwrap();
        let ideal = [0.4, 0.1, 0.2, 0.3];
        let cal = model.confusion();
        let mut noisy = ideal.to_vec();
        let mats: Vec<_> = (0..2).map(|q| cal.matrix(q)).collect();
        apply_tensor(&mut noisy, &mats, false);
        let mut counts = Counts::new(2);
        for (i, p) in noisy.iter().enumerate() {
            counts.add(i, (p * 1e12).round() as u64);
        }
        let zz = PauliSum::from_strs(2, &[(C64::new(1.0, 0.0), "ZZ"), (C64::new(0.5, 0.0), "ZI")]).unwrap();
        let exact: f64 = diagonal_of(&zz).unwrap().iter().zip(&ideal).map(|(o, p)| o * p).sum();
        let m = mitigate(&counts, &cal).unwrap();
        assert!((m.quasi_expectation(&zz).unwrap() - exact).abs() < 1e-9);
    }
}
