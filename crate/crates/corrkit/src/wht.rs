//! Normalized fast Walsh–Hadamard transform.
//!
//! `H_N` is symmetric with entries `±1/√N`, so it is its own inverse and
//! preserves inner products. Applied to iid coordinates, every output
//! coordinate is a signed sum of all inputs and tends to Gaussian.

use crate::error::{Error, Result};
use crate::sampling::SampleBatch;

/// Zero-padded vector ready for the transform.
#[derive(Debug, Clone, PartialEq)]
pub struct WhtVector {
    data: Vec<f64>,
    original_len: usize,
}

impl WhtVector {
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Transforms in place and returns the coefficients.
    pub fn transform(mut self) -> Vec<f64> {
        butterflies(&mut self.data);
        self.data
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.data
    }
}

fn check_len(n: usize) -> Result<()> {
    if n.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "WHT length must be a power of two, got {n}"
        )))
    }
}

fn butterflies(data: &mut [f64]) {
    let n = data.len();
    let mut half = 1;
    while half < n {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        half *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    data.iter_mut().for_each(|v| *v *= scale);
}

/// In-place `v ← H_N v`.
pub fn fwht_in_place(data: &mut [f64]) -> Result<()> {
    check_len(data.len())?;
    butterflies(data);
    Ok(())
}

/// `H_N v` for a power-of-two length.
pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Zero-pads to the next power of two.
pub fn pad_pow2(v: &[f64]) -> Result<WhtVector> {
    if v.is_empty() {
        return Err(Error::Empty("vector to pad"));
    }
    let mut data = v.to_vec();
    data.resize(v.len().next_power_of_two(), 0.0);
    Ok(WhtVector {
        data,
        original_len: v.len(),
    })
}

/// Pads and transforms both sides of a batch. `original_len` is carried
/// over so scores can be normalized by the real pair count.
pub fn transform_batch(b: &SampleBatch) -> Result<SampleBatch> {
    crate::pwl::check_pair(&b.xs, &b.ys)?;
    let px = pad_pow2(&b.xs)?;
    let py = pad_pow2(&b.ys)?;
    let (xs, ys) = rayon::join(|| px.transform(), || py.transform());
    Ok(SampleBatch {
        xs,
        ys,
        family: b.family,
        true_r: b.true_r,
        seed: b.seed,
        original_len: b.original_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Sylvester construction, normalized.
    fn hadamard(n: usize) -> Vec<Vec<f64>> {
        let mut h = vec![vec![1.0]];
        while h.len() < n {
            let m = h.len();
            let mut next = vec![vec![0.0; 2 * m]; 2 * m];
            for i in 0..m {
                for j in 0..m {
                    next[i][j] = h[i][j];
                    next[i][j + m] = h[i][j];
                    next[i + m][j] = h[i][j];
                    next[i + m][j + m] = -h[i][j];
                }
            }
            h = next;
        }
        let s = 1.0 / (n as f64).sqrt();
        h.into_iter()
            .map(|r| r.into_iter().map(|v| v * s).collect())
            .collect()
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn four_point_examples() {
        assert_eq!(fwht(&[1.0, 1.0, 1.0, 1.0]).unwrap(), [2.0, 0.0, 0.0, 0.0]);
        assert_eq!(fwht(&[1.0, 0.0, 0.0, 0.0]).unwrap(), [0.5, 0.5, 0.5, 0.5]);
        // second row of H₄ is (1, −1, 1, −1)/2
        assert_eq!(fwht(&[0.0, 1.0, 0.0, 0.0]).unwrap(), [0.5, -0.5, 0.5, -0.5]);
    }

    #[test]
    fn matches_dense_matrix() {
        for k in 0..=6 {
            let n = 1 << k;
            let h = hadamard(n);
            let v = random(n, k as u64);
            let dense: Vec<f64> = h.iter().map(|row| dot(row, &v)).collect();
            let fast = fwht(&v).unwrap();
            for (a, b) in dense.iter().zip(&fast) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn involution_and_parseval() {
        for k in 0..=16 {
            let n = 1 << k;
            let v = random(n, 100 + k as u64);
            let t = fwht(&v).unwrap();
            let back = fwht(&t).unwrap();
            let err = v
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "n = {n}: {err}");
            assert!(
                (dot(&v, &v).sqrt() - dot(&t, &t).sqrt()).abs()
                    < 1e-12 * (n as f64).sqrt().max(1.0)
            );
        }
    }

    #[test]
    fn preserves_inner_products() {
        let x = random(256, 1);
        let y = random(256, 2);
        let (tx, ty) = (fwht(&x).unwrap(), fwht(&y).unwrap());
        assert!((dot(&tx, &ty) - dot(&x, &y)).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(fwht(&[1.0, 2.0, 3.0]).is_err());
        assert!(fwht(&[]).is_err());
        assert!(pad_pow2(&[]).is_err());
    }

    #[test]
    fn padding() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let p = pad_pow2(&v).unwrap();
        assert_eq!(p.data(), v);
        assert_eq!(p.original_len(), 4);
        let v5 = [1.0, -2.0, 3.0, 0.5, 2.0];
        let p = pad_pow2(&v5).unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(&p.data()[5..], [0.0; 3]);
        assert_eq!(p.original_len(), 5);
        assert_eq!(dot(p.data(), p.data()), dot(&v5, &v5));
    }
}
