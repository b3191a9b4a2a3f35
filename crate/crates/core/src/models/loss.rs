//! Distillation losses: feature regression and softened KL.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::math::Mat;

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let max = z.iter().cloned().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = z.iter().map(|v| (*v - max).exp()).collect();
    let sum: T = out.iter().fold(T::zero(), |a, b| a + *b);
    for v in &mut out {
        *v = *v / sum;
    }
    out
}

/// `z/temp` log-softmax, used to keep the KL stable for peaked logits.
fn log_softmax_scaled<T: Scalar>(z: &[T], inv_temp: T) -> Vec<T> {
    let scaled: Vec<T> = z.iter().map(|v| *v * inv_temp).collect();
    let max = scaled.iter().cloned().fold(T::neg_infinity(), T::max);
    let log_sum = scaled
        .iter()
        .map(|v| (*v - max).exp())
        .fold(T::zero(), |a, b| a + b)
        .ln()
        + max;
    scaled.into_iter().map(|v| v - log_sum).collect()
}

/// Mean squared feature-regression error over a batch:
/// `mean_i || w_p * h_d[i] - h_t[i] ||^2`.
pub fn loss_feat<T: Scalar>(h_d: &[Vec<T>], h_t: &[Vec<T>], w_p: &Mat<T>) -> Result<T> {
    if h_d.len() != h_t.len() || h_d.is_empty() {
        return Err(Error::Contract(format!(
            "feature batches must be non-empty and equal length ({} vs {})",
            h_d.len(),
            h_t.len()
        )));
    }
    let mut total = T::zero();
    for (d, t) in h_d.iter().zip(h_t) {
        if d.len() != w_p.cols() || t.len() != w_p.rows() {
            return Err(Error::Contract(format!(
                "feature dims {}->{} do not match projection {}x{}",
                d.len(),
                t.len(),
                w_p.rows(),
                w_p.cols()
            )));
        }
        let proj = w_p.matvec(d);
        for (p, q) in proj.iter().zip(t) {
            let e = *p - *q;
            total += e * e;
        }
    }
    Ok(total / T::cast(h_d.len() as f64))
}

/// Softened distillation loss for one logit pair:
/// `temp^2 * KL( softmax(z_t/temp) || softmax(z_d/temp) )`, teacher first.
pub fn kd_term<T: Scalar>(z_t: &[T], z_d: &[T], temperature: T) -> Result<T> {
    if z_t.len() != z_d.len() || z_t.is_empty() {
        return Err(Error::Contract(format!(
            "logit vectors must be non-empty and equal length ({} vs {})",
            z_t.len(),
            z_d.len()
        )));
    }
    if !(temperature > T::zero()) {
        return Err(Error::Domain(format!("temperature must be > 0, got {temperature}")));
    }
    if z_t.iter().chain(z_d.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite logits".into()));
    }
    let inv_temp = T::one() / temperature;
    let log_p = log_softmax_scaled(z_t, inv_temp);
    let log_s = log_softmax_scaled(z_d, inv_temp);
    let mut kl = T::zero();
    for (lp, ls) in log_p.iter().zip(&log_s) {
        let p = lp.exp();
        kl += p * (*lp - *ls);
    }
    // Gibbs: the sum is >= 0 exactly; clamp away the last-bit rounding.
    Ok((temperature * temperature * kl).max(T::zero()))
}

/// Mean softened KL over a batch of logit pairs.
pub fn loss_kd<T: Scalar>(z_t: &[Vec<T>], z_d: &[Vec<T>], temperature: T) -> Result<T> {
    if z_t.len() != z_d.len() || z_t.is_empty() {
        return Err(Error::Contract(format!(
            "logit batches must be non-empty and equal length ({} vs {})",
            z_t.len(),
            z_d.len()
        )));
    }
    let mut total = T::zero();
    for (t, d) in z_t.iter().zip(z_d) {
        total += kd_term(t, d, temperature)?;
    }
    Ok(total / T::cast(z_t.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn feat_zero_at_identity_fixed_point() {
        let h = vec![vec![0.3, -0.7], vec![1.0, 2.0]];
        let loss = loss_feat(&h, &h, &Mat::identity(2)).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn feat_hand_value() {
        // single pair, d=2: h_d=(1,0), h_t=(0,1), w_p=I -> 1 + 1 = 2
        let loss = loss_feat(&[vec![1.0, 0.0]], &[vec![0.0, 1.0]], &Mat::identity(2)).unwrap();
        assert_relative_eq!(loss, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn feat_quadratic_homogeneity() {
        let h_d = vec![vec![0.4, -0.2, 0.9]];
        let h_t = vec![vec![-0.1, 0.3, 0.5]];
        let base = loss_feat(&h_d, &h_t, &Mat::identity(3)).unwrap();
        let scale = |v: &Vec<f64>| v.iter().map(|x| 3.0 * x).collect::<Vec<_>>();
        let scaled = loss_feat(&[scale(&h_d[0])], &[scale(&h_t[0])], &Mat::identity(3)).unwrap();
        assert_relative_eq!(scaled, 9.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn feat_rejects_shape_mismatch() {
        assert!(loss_feat(&[vec![1.0, 0.0]], &[vec![0.0]], &Mat::identity(2)).is_err());
        assert!(loss_feat::<f64>(&[], &[], &Mat::identity(2)).is_err());
    }

    #[test]
    fn kd_zero_for_identical_logits() {
        let z = vec![0.5f64, -1.0, 2.0, 0.0];
        let loss = kd_term(&z, &z, 2.0).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn kd_hand_value() {
        // z_t = (0, ln 3) -> p = (0.25, 0.75); z_d = (0, 0) -> s = (0.5, 0.5)
        // KL = 0.25 ln 0.5 + 0.75 ln 1.5 = 0.13081...
        let loss = kd_term(&[0.0, 3.0f64.ln()], &[0.0, 0.0], 1.0).unwrap();
        assert_relative_eq!(loss, 0.25 * 0.5f64.ln() + 0.75 * 1.5f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(loss, 0.130812, max_relative = 1e-4);
    }

    #[test]
    fn kd_nonnegative_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let z_t: Vec<f64> = (0..16).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let z_d: Vec<f64> = (0..16).map(|_| rng.gen_range(-5.0..5.0)).collect();
            for temp in [0.5, 1.0, 4.0] {
                assert!(kd_term(&z_t, &z_d, temp).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn kd_zero_iff_equal_softened_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let z: Vec<f64> = (0..8).map(|_| rng.gen_range(-4.0..4.0)).collect();
            // Shifting logits by a constant leaves the distribution unchanged.
            let shifted: Vec<f64> = z.iter().map(|v| v + 1.7).collect();
            assert!(kd_term(&z, &shifted, 2.0).unwrap() < 1e-12);
            let bumped: Vec<f64> = z
                .iter()
                .enumerate()
                .map(|(i, v)| if i == 0 { v + 0.3 } else { *v })
                .collect();
            assert!(kd_term(&z, &bumped, 2.0).unwrap() > 1e-12);
        }
    }

    #[test]
    fn kd_rejects_nonfinite_logits() {
        assert!(kd_term(&[f64::NAN, 0.0], &[0.0, 0.0], 1.0).is_err());
        assert!(kd_term(&[0.0, 0.0], &[f64::INFINITY, 0.0], 1.0).is_err());
    }

    #[test]
    fn batch_losses_average() {
        let z_t = vec![vec![0.0, 1.0], vec![2.0, -1.0]];
        let z_d = vec![vec![0.3, 0.3], vec![0.0, 0.0]];
        let a = kd_term(&z_t[0], &z_d[0], 1.5).unwrap();
        let b = kd_term(&z_t[1], &z_d[1], 1.5).unwrap();
        assert_relative_eq!(loss_kd(&z_t, &z_d, 1.5).unwrap(), (a + b) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn softmax_sums_to_one() {
        let s = softmax(&[1.0, 2.0, 3.0, -100.0]);
        assert_relative_eq!(s.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        assert!(s[2] > s[1] && s[1] > s[0]);
    }
}
