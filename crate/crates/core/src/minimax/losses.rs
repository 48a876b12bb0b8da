//! Alignment and spread criteria over memory banks.
//!
//! Sign conventions are chosen so that plain minimization of
//! `simple + lambda_r * repr + lambda_d * div` pulls each predicted clean
//! embedding toward its least-similar stored real embedding and pushes it
//! away from its most-similar stored prediction.

use super::bank::MemoryBank;
use super::MinimaxConfig;
use crate::error::{DistillError, Result};
use crate::vecmath::{cosine_sim, cosine_sim_grad_wrt_a, mean_rows};

/// Value plus per-row gradients with respect to the predicted embeddings.
#[derive(Debug, Clone)]
pub struct TermEval {
    pub value: f64,
    pub grads: Vec<Vec<f64>>,
    /// Queue position selected per row; `None` when the bank was empty.
    pub picked: Vec<Option<usize>>,
    /// Rows that contributed nothing because their queue was empty.
    pub skipped: usize,
}

/// Least-similar entry for `z` among the bank entries visible to `label`.
pub fn min_sim_entry(bank: &MemoryBank, label: usize, z: &[f64]) -> Result<Option<(usize, f64)>> {
    extreme_entry(bank, label, z, false)
}

/// Most-similar entry for `z` among the bank entries visible to `label`.
pub fn max_sim_entry(bank: &MemoryBank, label: usize, z: &[f64]) -> Result<Option<(usize, f64)>> {
    extreme_entry(bank, label, z, true)
}

fn extreme_entry(
    bank: &MemoryBank,
    label: usize,
    z: &[f64],
    take_max: bool,
) -> Result<Option<(usize, f64)>> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, entry) in bank.entries(label).enumerate() {
        let s = cosine_sim(z, entry)?;
        let better = match best {
            None => true,
            Some((_, b)) => {
                if take_max {
                    s > b
                } else {
                    s < b
                }
            }
        };
        if better {
            best = Some((idx, s));
        }
    }
    Ok(best)
}

fn bank_term(
    z_hat: &[Vec<f64>],
    bank: &MemoryBank,
    labels: &[usize],
    take_max: bool,
) -> Result<TermEval> {
    if z_hat.len() != labels.len() {
        return Err(DistillError::invalid("batch/labels length mismatch"));
    }
    // Sign: -1 for the min term (pull close), +1 for the max term (push away).
    let sign = if take_max { 1.0 } else { -1.0 };
    let n = z_hat.len() as f64;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(z_hat.len());
    let mut picked = Vec::with_capacity(z_hat.len());
    let mut skipped = 0;
    for (z, &label) in z_hat.iter().zip(labels) {
        if label >= bank.class_count {
            return Err(DistillError::invalid(format!(
                "label {label} outside class set of size {}",
                bank.class_count
            )));
        }
        match extreme_entry(bank, label, z, take_max)? {
            Some((idx, s)) => {
                value += sign * s / n;
                let entry = bank.entries(label).nth(idx).expect("index from scan");
                let g = cosine_sim_grad_wrt_a(z, entry);
                grads.push(g.iter().map(|gi| sign * gi / n).collect());
                picked.push(Some(idx));
            }
            None => {
                grads.push(vec![0.0; z.len()]);
                picked.push(None);
                skipped += 1;
            }
        }
    }
    Ok(TermEval {
        value,
        grads,
        picked,
        skipped,
    })
}

/// Pull-to-least-similar criterion with gradients.
pub fn repr_term(z_hat: &[Vec<f64>], bank: &MemoryBank, labels: &[usize]) -> Result<TermEval> {
    bank_term(z_hat, bank, labels, false)
}

/// Push-from-most-similar criterion with gradients.
pub fn div_term(z_hat: &[Vec<f64>], bank: &MemoryBank, labels: &[usize]) -> Result<TermEval> {
    bank_term(z_hat, bank, labels, true)
}

/// Alignment with the real mini-batch mean, with gradients.
pub fn repr_naive_term(z_hat: &[Vec<f64>], real_batch: &[Vec<f64>]) -> Result<TermEval> {
    if real_batch.is_empty() {
        return Err(DistillError::EmptyInput("real batch must be nonempty".into()));
    }
    let center = mean_rows(real_batch)?;
    let n = z_hat.len() as f64;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(z_hat.len());
    for z in z_hat {
        value -= cosine_sim(z, &center)? / n;
        let g = cosine_sim_grad_wrt_a(z, &center);
        grads.push(g.iter().map(|gi| -gi / n).collect());
    }
    Ok(TermEval {
        value,
        grads,
        picked: vec![None; z_hat.len()],
        skipped: 0,
    })
}

/// Negative mean similarity to the real batch center.
pub fn repr_loss_naive(z_hat: &[Vec<f64>], real_batch: &[Vec<f64>]) -> Result<f64> {
    Ok(repr_naive_term(z_hat, real_batch)?.value)
}

/// Negative mean of the per-row minimum bank similarity.
pub fn repr_loss(z_hat: &[Vec<f64>], bank: &MemoryBank, labels: &[usize]) -> Result<f64> {
    Ok(repr_term(z_hat, bank, labels)?.value)
}

/// Mean of the per-row maximum bank similarity.
pub fn div_loss(z_hat: &[Vec<f64>], bank: &MemoryBank, labels: &[usize]) -> Result<f64> {
    Ok(div_term(z_hat, bank, labels)?.value)
}

/// Weighted combination of the three terms.
pub fn total_loss(simple: f64, lr_term: f64, ld_term: f64, cfg: &MinimaxConfig) -> Result<f64> {
    for (name, v) in [("simple", simple), ("repr", lr_term), ("div", ld_term)] {
        if !v.is_finite() {
            return Err(DistillError::numeric(format!("{name} term is not finite: {v}")));
        }
    }
    Ok(simple + cfg.lambda_r * lr_term + cfg.lambda_d * ld_term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimax::bank::Partitioning;
    use crate::minimax::MinimaxConfig;
    use crate::rng::{rng_from_seed, standard_normal_vec};

    fn single_class_bank(entries: &[Vec<f64>]) -> MemoryBank {
        let mut bank = MemoryBank::new(entries.len().max(1), 1, Partitioning::PerClass).unwrap();
        for e in entries {
            bank.enqueue(e.clone(), 0).unwrap();
        }
        bank
    }

    #[test]
    fn repr_naive_aligned_with_center() {
        let real = vec![vec![2.0, 0.0], vec![0.0, 0.0]]; // mean = [1, 0]
        let z = vec![vec![1.0, 0.0]];
        assert!((repr_loss_naive(&z, &real).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn repr_naive_orthogonal_center() {
        let real = vec![vec![1.0, 0.0]];
        let z = vec![vec![0.0, 1.0]];
        assert_eq!(repr_loss_naive(&z, &real).unwrap(), 0.0);
    }

    #[test]
    fn repr_naive_matches_two_pass_oracle() {
        let mut rng = rng_from_seed(10);
        let real: Vec<Vec<f64>> = (0..6).map(|_| standard_normal_vec(&mut rng, 4)).collect();
        let z: Vec<Vec<f64>> = (0..3).map(|_| standard_normal_vec(&mut rng, 4)).collect();
        // Two-pass oracle: explicit mean, then similarities.
        let mut center = vec![0.0; 4];
        for r in &real {
            for i in 0..4 {
                center[i] += r[i] / 6.0;
            }
        }
        let mut expect = 0.0;
        for row in &z {
            expect -= cosine_sim(row, &center).unwrap() / 3.0;
        }
        assert!((repr_loss_naive(&z, &real).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn repr_naive_rejects_empty_real_batch() {
        assert!(repr_loss_naive(&[vec![1.0]], &[]).is_err());
    }

    #[test]
    fn repr_single_identical_entry() {
        let bank = single_class_bank(&[vec![1.0, 0.0]]);
        let v = repr_loss(&[vec![1.0, 0.0]], &bank, &[0]).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn repr_min_selects_orthogonal_entry() {
        let bank = single_class_bank(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let v = repr_loss(&[vec![1.0, 0.0]], &bank, &[0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn empty_bank_contributes_zero() {
        let bank = MemoryBank::new(4, 1, Partitioning::PerClass).unwrap();
        let eval = repr_term(&[vec![1.0, 0.0]], &bank, &[0]).unwrap();
        assert_eq!(eval.value, 0.0);
        assert_eq!(eval.skipped, 1);
    }

    #[test]
    fn div_self_and_antipodal() {
        let z = vec![vec![0.6, -0.8]];
        let bank = single_class_bank(&[z[0].clone()]);
        assert!((div_loss(&z, &bank, &[0]).unwrap() - 1.0).abs() < 1e-12);
        let anti = single_class_bank(&[vec![-0.6, 0.8]]);
        assert!((div_loss(&z, &anti, &[0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_selection_matches_exhaustive_scan() {
        let mut rng = rng_from_seed(21);
        let entries: Vec<Vec<f64>> = (0..64).map(|_| standard_normal_vec(&mut rng, 8)).collect();
        let bank = single_class_bank(&entries);
        for _ in 0..50 {
            let z = standard_normal_vec(&mut rng, 8);
            let (mut best_min, mut best_max) = ((0usize, f64::INFINITY), (0usize, f64::NEG_INFINITY));
            for (i, e) in entries.iter().enumerate() {
                let s = cosine_sim(&z, e).unwrap();
                if s < best_min.1 {
                    best_min = (i, s);
                }
                if s > best_max.1 {
                    best_max = (i, s);
                }
            }
            assert_eq!(min_sim_entry(&bank, 0, &z).unwrap().unwrap(), best_min);
            assert_eq!(max_sim_entry(&bank, 0, &z).unwrap().unwrap(), best_max);
        }
    }

    #[test]
    fn bank_terms_invariant_to_entry_rescaling() {
        let mut rng = rng_from_seed(33);
        let entries: Vec<Vec<f64>> = (0..8).map(|_| standard_normal_vec(&mut rng, 4)).collect();
        let z = vec![standard_normal_vec(&mut rng, 4)];
        let before_r = repr_loss(&z, &single_class_bank(&entries), &[0]).unwrap();
        let before_d = div_loss(&z, &single_class_bank(&entries), &[0]).unwrap();
        let mut scaled = entries.clone();
        for v in &mut scaled[3] {
            *v *= 7.5;
        }
        let after_r = repr_loss(&z, &single_class_bank(&scaled), &[0]).unwrap();
        let after_d = div_loss(&z, &single_class_bank(&scaled), &[0]).unwrap();
        assert!((before_r - after_r).abs() < 1e-12);
        assert!((before_d - after_d).abs() < 1e-12);
    }

    #[test]
    fn total_loss_arithmetic() {
        let cfg = MinimaxConfig::default();
        assert!((total_loss(1.0, -1.0, 1.0, &cfg).unwrap() - 1.006).abs() < 1e-12);
        let mut off = cfg.clone();
        off.lambda_r = 0.0;
        off.lambda_d = 0.0;
        assert_eq!(total_loss(1.7, -0.3, 0.9, &off).unwrap(), 1.7);
        assert!(total_loss(f64::NAN, 0.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn total_loss_linear_in_each_term() {
        let mut rng = rng_from_seed(40);
        let cfg = MinimaxConfig::default();
        for _ in 0..20 {
            let s: f64 = standard_normal_vec(&mut rng, 1)[0];
            let r: f64 = standard_normal_vec(&mut rng, 1)[0];
            let d: f64 = standard_normal_vec(&mut rng, 1)[0];
            let direct = s + cfg.lambda_r * r + cfg.lambda_d * d;
            assert!((total_loss(s, r, d, &cfg).unwrap() - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn term_gradients_match_finite_differences() {
        let mut rng = rng_from_seed(55);
        let entries: Vec<Vec<f64>> = (0..6).map(|_| standard_normal_vec(&mut rng, 3)).collect();
        let bank = single_class_bank(&entries);
        let z: Vec<Vec<f64>> = (0..2).map(|_| standard_normal_vec(&mut rng, 3)).collect();
        let labels = [0, 0];
        let h = 1e-6;
        for term in ["repr", "div"] {
            let eval = match term {
                "repr" => repr_term(&z, &bank, &labels).unwrap(),
                _ => div_term(&z, &bank, &labels).unwrap(),
            };
            for row in 0..z.len() {
                for i in 0..3 {
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[row][i] += h;
                    zm[row][i] -= h;
                    let vp = match term {
                        "repr" => repr_loss(&zp, &bank, &labels).unwrap(),
                        _ => div_loss(&zp, &bank, &labels).unwrap(),
                    };
                    let vm = match term {
                        "repr" => repr_loss(&zm, &bank, &labels).unwrap(),
                        _ => div_loss(&zm, &bank, &labels).unwrap(),
                    };
                    let fd = (vp - vm) / (2.0 * h);
                    assert!(
                        (eval.grads[row][i] - fd).abs() < 1e-7,
                        "{term} row {row} coord {i}: {} vs {}",
                        eval.grads[row][i],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_ascent_on_repr_reaches_alignment() {
        // Free-vector optimization against a frozen single-entry bank: the
        // similarity must rise strictly every step until near 1.
        let m = vec![0.8, -0.6];
        let bank = single_class_bank(&[m.clone()]);
        let mut z = vec![vec![-0.3, -1.1]];
        let mut prev = cosine_sim(&z[0], &m).unwrap();
        let lr = 0.05;
        let mut steps = 0;
        while prev < 1.0 - 1e-3 {
            let eval = repr_term(&z, &bank, &[0]).unwrap();
            for i in 0..2 {
                z[0][i] -= lr * eval.grads[0][i];
            }
            let now = cosine_sim(&z[0], &m).unwrap();
            assert!(now > prev, "similarity did not increase: {prev} -> {now}");
            prev = now;
            steps += 1;
            assert!(steps < 10_000, "did not converge");
        }
    }
}
