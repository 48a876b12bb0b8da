//! Selection baselines: uniform random, herding and k-center.
//!
//! All selectors work per class on a `FeatureSet` and return ranked source
//! ids. Ties break toward the lowest source id so results are reproducible.

use crate::dataset::FeatureSet;
use crate::error::{DistillError, Result};
use crate::rng::derive_rng;
use crate::vecmath::{distance, squared_distance};
use rand::Rng;

/// Ranked source ids per class, `per_class[c][rank]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedIds {
    pub per_class: Vec<Vec<usize>>,
}

impl SelectedIds {
    /// Flattens to `(class, rank, source_id)` rows in class order.
    pub fn rows(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (class, ids) in self.per_class.iter().enumerate() {
            for (rank, &id) in ids.iter().enumerate() {
                out.push((class, rank, id));
            }
        }
        out
    }

    pub fn total(&self) -> usize {
        self.per_class.iter().map(Vec::len).sum()
    }
}

fn class_rows(fs: &FeatureSet, class: usize, ipc: usize) -> Result<Vec<usize>> {
    let rows = fs.class_indices(class);
    if rows.len() < ipc {
        return Err(DistillError::InsufficientData(format!(
            "class {class} has {} members, need {ipc}",
            rows.len()
        )));
    }
    Ok(rows)
}

/// Uniform per-class sample without replacement; deterministic per seed.
pub fn random_select(fs: &FeatureSet, ipc: usize, seed: u64) -> Result<SelectedIds> {
    if ipc == 0 {
        return Err(DistillError::invalid("ipc must be positive"));
    }
    let mut per_class = Vec::with_capacity(fs.class_count);
    for class in 0..fs.class_count {
        let rows = class_rows(fs, class, ipc)?;
        let mut rng = derive_rng(seed, class as u64);
        // Partial Fisher-Yates over the class rows.
        let mut pool = rows;
        let mut chosen = Vec::with_capacity(ipc);
        for _ in 0..ipc {
            let j = rng.gen_range(0..pool.len());
            chosen.push(fs.source_ids[pool.swap_remove(j)]);
        }
        per_class.push(chosen);
    }
    Ok(SelectedIds { per_class })
}

/// Greedy prefix-mean herding: at step k pick the point whose inclusion
/// brings the running selection mean closest to the class mean.
pub fn herding_select(fs: &FeatureSet, ipc: usize) -> Result<SelectedIds> {
    if ipc == 0 {
        return Err(DistillError::invalid("ipc must be positive"));
    }
    let dim = fs.dim();
    let mut per_class = Vec::with_capacity(fs.class_count);
    for class in 0..fs.class_count {
        let rows = class_rows(fs, class, ipc)?;
        let mut mean = vec![0.0; dim];
        for &r in &rows {
            for (m, v) in mean.iter_mut().zip(&fs.features[r]) {
                *m += v / rows.len() as f64;
            }
        }
        let mut selected_sum = vec![0.0; dim];
        let mut remaining = rows;
        let mut chosen = Vec::with_capacity(ipc);
        for k in 1..=ipc {
            let mut best: Option<(usize, f64, usize)> = None; // (pos, score, source id)
            for (pos, &r) in remaining.iter().enumerate() {
                let candidate_mean: Vec<f64> = selected_sum
                    .iter()
                    .zip(&fs.features[r])
                    .map(|(s, x)| (s + x) / k as f64)
                    .collect();
                let score = squared_distance(&mean, &candidate_mean);
                let id = fs.source_ids[r];
                let better = match best {
                    None => true,
                    Some((_, b, bid)) => score < b || (score == b && id < bid),
                };
                if better {
                    best = Some((pos, score, id));
                }
            }
            let (pos, _, id) = best.expect("nonempty remaining set");
            let r = remaining.swap_remove(pos);
            for (s, x) in selected_sum.iter_mut().zip(&fs.features[r]) {
                *s += x;
            }
            chosen.push(id);
        }
        per_class.push(chosen);
    }
    Ok(SelectedIds { per_class })
}

/// Greedy farthest-point traversal from a seeded start point.
pub fn kcenter_select(fs: &FeatureSet, ipc: usize, seed: u64) -> Result<SelectedIds> {
    if ipc == 0 {
        return Err(DistillError::invalid("ipc must be positive"));
    }
    let mut per_class = Vec::with_capacity(fs.class_count);
    for class in 0..fs.class_count {
        let rows = class_rows(fs, class, ipc)?;
        let mut rng = derive_rng(seed, class as u64);
        let start = rng.gen_range(0..rows.len());
        let mut chosen_rows = vec![rows[start]];
        // Distance of every class row to the nearest chosen point.
        let mut nearest: Vec<f64> = rows
            .iter()
            .map(|&r| distance(&fs.features[r], &fs.features[rows[start]]))
            .collect();
        while chosen_rows.len() < ipc {
            let mut best: Option<(usize, f64, usize)> = None;
            for (pos, &r) in rows.iter().enumerate() {
                if chosen_rows.contains(&r) {
                    continue;
                }
                let d = nearest[pos];
                let id = fs.source_ids[r];
                let better = match best {
                    None => true,
                    Some((_, b, bid)) => d > b || (d == b && id < bid),
                };
                if better {
                    best = Some((pos, d, id));
                }
            }
            let (pos, _, _) = best.expect("ipc <= class size");
            let new_row = rows[pos];
            chosen_rows.push(new_row);
            for (p, &r) in rows.iter().enumerate() {
                let d = distance(&fs.features[r], &fs.features[new_row]);
                if d < nearest[p] {
                    nearest[p] = d;
                }
            }
        }
        per_class.push(chosen_rows.iter().map(|&r| fs.source_ids[r]).collect());
    }
    Ok(SelectedIds { per_class })
}

/// Largest distance from any class member to its nearest selected point.
pub fn covering_radius(fs: &FeatureSet, class: usize, selected_source_ids: &[usize]) -> f64 {
    let rows = fs.class_indices(class);
    let centers: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&r| selected_source_ids.contains(&fs.source_ids[r]))
        .collect();
    rows.iter()
        .map(|&r| {
            centers
                .iter()
                .map(|&c| distance(&fs.features[r], &fs.features[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, standard_normal_vec};

    fn one_class(points: Vec<Vec<f64>>) -> FeatureSet {
        let n = points.len();
        FeatureSet::new(points, vec![0; n], (0..n).collect(), 1).unwrap()
    }

    #[test]
    fn random_selects_whole_class() {
        let fs = one_class(vec![vec![0.0], vec![1.0], vec![2.0]]);
        let mut ids = random_select(&fs, 3, 5).unwrap().per_class[0].clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn random_deterministic_per_seed() {
        let fs = one_class((0..10).map(|i| vec![i as f64]).collect());
        assert_eq!(
            random_select(&fs, 4, 9).unwrap(),
            random_select(&fs, 4, 9).unwrap()
        );
    }

    #[test]
    fn random_uniform_over_seeds() {
        let fs = one_class(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let mut counts = [0usize; 4];
        let trials = 10_000;
        for seed in 0..trials {
            let ids = random_select(&fs, 1, seed).unwrap();
            counts[ids.per_class[0][0]] += 1;
        }
        for c in counts {
            let frac = c as f64 / trials as f64;
            assert!((frac - 0.25).abs() < 0.02, "frequency {frac}");
        }
    }

    #[test]
    fn random_insufficient_class() {
        let fs = one_class(vec![vec![0.0]]);
        assert!(matches!(
            random_select(&fs, 2, 0),
            Err(DistillError::InsufficientData(_))
        ));
    }

    #[test]
    fn herding_picks_mean_nearest_first() {
        let fs = one_class(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 0.0]]);
        // Brute-force oracle over all size-1 subsets.
        let mean = [1.0, 0.0];
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in fs.features.iter().enumerate() {
            let d = squared_distance(&mean, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        let ids = herding_select(&fs, 1).unwrap();
        assert_eq!(ids.per_class[0], vec![best.0]);
        assert_eq!(best.0, 2);
    }

    #[test]
    fn herding_exhaustive_for_full_class() {
        let fs = one_class(vec![vec![0.0], vec![5.0], vec![1.0]]);
        let mut ids = herding_select(&fs, 3).unwrap().per_class[0].clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn herding_beats_random_median_prefix_distance() {
        let mut rng = rng_from_seed(77);
        let pts: Vec<Vec<f64>> = (0..8).map(|_| standard_normal_vec(&mut rng, 2)).collect();
        let fs = one_class(pts.clone());
        let mean: Vec<f64> = (0..2)
            .map(|d| pts.iter().map(|p| p[d]).sum::<f64>() / 8.0)
            .collect();
        let prefix_dist = |ids: &[usize]| {
            let mut s = vec![0.0; 2];
            for &i in ids {
                for d in 0..2 {
                    s[d] += pts[i][d];
                }
            }
            let m: Vec<f64> = s.iter().map(|v| v / ids.len() as f64).collect();
            distance(&mean, &m)
        };
        let herd = herding_select(&fs, 3).unwrap();
        let herd_d = prefix_dist(&herd.per_class[0]);
        let mut random_ds: Vec<f64> = (0..100)
            .map(|seed| prefix_dist(&random_select(&fs, 3, seed).unwrap().per_class[0]))
            .collect();
        random_ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = random_ds[50];
        assert!(herd_d <= median, "herding {herd_d} worse than median {median}");
    }

    #[test]
    fn kcenter_spreads_1d() {
        let fs = one_class(vec![vec![0.0], vec![1.0], vec![10.0]]);
        // Find a seed whose first draw is index 0.
        let seed = (0..100)
            .find(|&s| {
                let mut rng = derive_rng(s, 0);
                rng.gen_range(0..3usize) == 0
            })
            .unwrap();
        let ids = kcenter_select(&fs, 2, seed).unwrap();
        assert_eq!(ids.per_class[0], vec![0, 2]);
    }

    #[test]
    fn kcenter_single_point_is_seeded_start() {
        let fs = one_class(vec![vec![0.0], vec![3.0], vec![9.0]]);
        let ids = kcenter_select(&fs, 1, 4).unwrap();
        let mut rng = derive_rng(4, 0);
        let expect = rng.gen_range(0..3usize);
        assert_eq!(ids.per_class[0], vec![expect]);
    }

    #[test]
    fn kcenter_two_approximation_on_small_instances() {
        let mut rng = rng_from_seed(555);
        for trial in 0..20 {
            let n = 6 + (trial % 5);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| standard_normal_vec(&mut rng, 2)).collect();
            let fs = one_class(pts.clone());
            let ipc = 2;
            let greedy = kcenter_select(&fs, ipc, trial as u64).unwrap();
            let greedy_radius = covering_radius(&fs, 0, &greedy.per_class[0]);
            // Exhaustive optimum over all size-2 subsets.
            let mut opt = f64::INFINITY;
            for a in 0..n {
                for b in (a + 1)..n {
                    let r = covering_radius(&fs, 0, &[a, b]);
                    if r < opt {
                        opt = r;
                    }
                }
            }
            assert!(
                greedy_radius <= 2.0 * opt + 1e-12,
                "radius {greedy_radius} vs optimal {opt}"
            );
        }
    }

    #[test]
    fn selectors_return_distinct_valid_ids() {
        let mut rng = rng_from_seed(404);
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            for _ in 0..6 {
                let mut v = standard_normal_vec(&mut rng, 3);
                v[0] += c as f64 * 4.0;
                feats.push(v);
                labels.push(c);
            }
        }
        let n = feats.len();
        let fs = FeatureSet::new(feats, labels, (0..n).collect(), 3).unwrap();
        for sel in [
            random_select(&fs, 4, 3).unwrap(),
            herding_select(&fs, 4).unwrap(),
            kcenter_select(&fs, 4, 3).unwrap(),
        ] {
            for (class, ids) in sel.per_class.iter().enumerate() {
                assert_eq!(ids.len(), 4);
                let mut sorted = ids.clone();
                sorted.sort_unstable();
                sorted.dedup();
                assert_eq!(sorted.len(), 4, "duplicate ids");
                for &id in ids {
                    assert_eq!(fs.labels[id], class);
                }
            }
        }
    }

    #[test]
    fn herding_permutation_equivariant() {
        let pts = vec![
            vec![0.1, 0.4],
            vec![2.0, -0.3],
            vec![-1.0, 0.9],
            vec![0.7, 0.7],
            vec![1.4, -1.2],
        ];
        let fs = one_class(pts.clone());
        let base = herding_select(&fs, 3).unwrap();
        // Reverse the rows but keep the original source ids attached.
        let perm: Vec<usize> = (0..pts.len()).rev().collect();
        let fs2 = FeatureSet::new(
            perm.iter().map(|&i| pts[i].clone()).collect(),
            vec![0; pts.len()],
            perm.clone(),
            1,
        )
        .unwrap();
        let permuted = herding_select(&fs2, 3).unwrap();
        assert_eq!(base.per_class, permuted.per_class);
    }
}
