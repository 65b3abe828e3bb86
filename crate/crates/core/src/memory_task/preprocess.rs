//! Step-aligned rate vectors: reaction-time normalization, concatenation,
//! and the causal exponential filter.

use super::spikes::{post_window_bins, SpikeTrace, POST_BINS, PRE_BINS, STEP_BINS};
use crate::error::{Error, Result};

pub const KERNEL_LEN: usize = 41;
const KERNEL_ZEROS: usize = 20;

/// 20 zeros followed by `exp(-0.5 x)` for `x = 0, 0.5, ..., 10`.
pub fn exp_kernel() -> [f64; KERNEL_LEN] {
    let mut k = [0.0; KERNEL_LEN];
    for (i, slot) in k[KERNEL_ZEROS..].iter_mut().enumerate() {
        let x = 0.5 * i as f64;
        *slot = (-0.5 * x).exp();
    }
    k
}

/// `out[t] = sum_k kernel[k] * input[t - k]`, zero before the start.
pub fn exp_filter(input: &[f64]) -> Vec<f64> {
    let kernel = exp_kernel();
    (0..input.len())
        .map(|t| {
            kernel
                .iter()
                .enumerate()
                .take(t + 1)
                .map(|(k, w)| w * input[t - k])
                .sum()
        })
        .collect()
}

/// Resamples the post-stimulus window `[0, RT]` onto exactly 100 bins.
///
/// Native bins are treated as a piecewise-constant rate; each output bin is
/// the mean rate over its share of the window. Constants therefore survive,
/// and `sum(out) * L / 100 == integral over [0, L]` where `L = RT / 10 ms`.
pub fn normalize_post(post: &[f64], reaction_time: f64) -> Result<Vec<f64>> {
    if !(reaction_time > 0.0) || !reaction_time.is_finite() {
        return Err(Error::Domain {
            op: "normalize_and_concat",
            index: 0,
            value: reaction_time,
        });
    }
    let window = post_window_bins(reaction_time);
    let needed = window.ceil() as usize;
    if post.len() < needed {
        return Err(Error::Shape {
            op: "normalize_and_concat",
            lhs: vec![post.len()],
            rhs: vec![needed],
        });
    }
    let width = window / POST_BINS as f64;
    let out = (0..POST_BINS)
        .map(|k| {
            let lo = k as f64 * width;
            let hi = if k + 1 == POST_BINS {
                window
            } else {
                (k + 1) as f64 * width
            };
            let first = lo.floor() as usize;
            let mut mass = 0.0;
            let mut j = first;
            while (j as f64) < hi && j < needed {
                let overlap = hi.min(j as f64 + 1.0) - lo.max(j as f64);
                if overlap > 0.0 {
                    mass += post[j] * overlap;
                }
                j += 1;
            }
            mass / (hi - lo)
        })
        .collect();
    Ok(out)
}

/// 100 pre-stimulus bins followed by the 100 normalized post-stimulus bins.
pub fn normalize_and_concat(pre: &[f64], post: &[f64], reaction_time: f64) -> Result<Vec<f64>> {
    if pre.len() != PRE_BINS {
        return Err(Error::Shape {
            op: "normalize_and_concat",
            lhs: vec![pre.len()],
            rhs: vec![PRE_BINS],
        });
    }
    let mut out = Vec::with_capacity(STEP_BINS);
    out.extend_from_slice(pre);
    out.extend(normalize_post(post, reaction_time)?);
    Ok(out)
}

/// Filtered 200-bin vectors, indexed `[step][neuron][bin]`.
pub fn preprocess_trace(trace: &SpikeTrace) -> Result<Vec<Vec<Vec<f64>>>> {
    trace
        .steps
        .iter()
        .map(|step| {
            step.pre
                .iter()
                .zip(&step.post)
                .map(|(pre, post)| {
                    Ok(exp_filter(&normalize_and_concat(
                        pre,
                        post,
                        step.reaction_time,
                    )?))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_taps() {
        let k = exp_kernel();
        assert!(k[..20].iter().all(|&v| v == 0.0));
        assert_eq!(k[20], 1.0);
        assert!((k[21] - 0.77880).abs() < 1e-5);
        assert!((k[40] - 0.0067379).abs() < 1e-7);
    }

    #[test]
    fn impulse_response_is_kernel() {
        let mut x = vec![0.0; KERNEL_LEN];
        x[0] = 1.0;
        assert_eq!(exp_filter(&x), exp_kernel().to_vec());
    }

    #[test]
    fn constant_input_settles_at_tap_sum() {
        // Direct summation of the 21 non-zero taps.
        let expected: f64 = (0..=20).map(|i| (-0.25 * i as f64).exp()).sum();
        let y = exp_filter(&vec![1.0; 100]);
        assert!((y[99] - expected).abs() < 1e-12);
        assert!((expected - 4.4971).abs() < 1e-4);
    }

    #[test]
    fn filter_is_causal() {
        let mut a = vec![0.3; 60];
        let y1 = exp_filter(&a);
        a[40] = 9.0;
        let y2 = exp_filter(&a);
        assert_eq!(y1[..40], y2[..40]);
    }

    #[test]
    fn one_second_is_identity() {
        let post: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let out = normalize_post(&post, 1.0).unwrap();
        for (a, b) in out.iter().zip(&post) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_survive_any_rt() {
        for rt in [0.3, 0.37, 0.5, 1.234, 2.0] {
            let n = post_window_bins(rt).ceil() as usize;
            let out = normalize_post(&vec![2.5; n], rt).unwrap();
            assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-12), "rt {rt}");
        }
    }

    #[test]
    fn half_second_conserves_mass() {
        let post: Vec<f64> = (0..50).map(|i| ((i * 13) % 5) as f64).collect();
        let out = normalize_post(&post, 0.5).unwrap();
        let mass_in: f64 = post.iter().sum();
        let mass_out: f64 = out.iter().sum::<f64>() * 50.0 / 100.0;
        assert!((mass_in - mass_out).abs() < 1e-9);
        // each native bin covers two output bins
        assert_eq!(out[0], post[0]);
        assert_eq!(out[1], post[0]);
    }

    #[test]
    fn rejects_bad_rt_and_short_windows() {
        assert!(normalize_post(&[1.0; 100], 0.0).is_err());
        assert!(normalize_post(&[1.0; 100], -1.0).is_err());
        assert!(normalize_post(&[1.0; 10], 1.0).is_err());
        assert!(normalize_and_concat(&[0.0; 99], &[1.0; 100], 1.0).is_err());
        assert_eq!(
            normalize_and_concat(&[0.0; 100], &[1.0; 100], 1.0)
                .unwrap()
                .len(),
            200
        );
    }
}
