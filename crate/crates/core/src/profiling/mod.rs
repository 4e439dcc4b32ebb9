//! Post-estimation outputs: funnel-plot geometry, propensity-profile
//! distances and clustering, and positivity diagnostics.

mod cluster;
pub mod svg;

pub use cluster::{hierarchical_cluster, Dendrogram, Linkage, Merge};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_quantile, quantile_type7};

/// One player's point on a funnel plot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunnelPoint {
    pub label: String,
    pub estimate: f64,
    /// Inverse standard error.
    pub precision: f64,
    /// Control levels (e.g. 0.975) whose two-sided limit the point exceeds.
    pub flags: Vec<f64>,
}

/// A control-limit curve `y = ±z / precision` for one confidence level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlCurve {
    pub level: f64,
    pub z: f64,
    /// Sampled (precision, upper, lower) triples over the precision range.
    pub samples: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunnelGeometry {
    pub points: Vec<FunnelPoint>,
    pub curves: Vec<ControlCurve>,
}

/// Build funnel geometry for labelled (estimate, se) pairs at the given
/// two-sided control levels. A point exceeds a level when
/// `|estimate| * precision > z_{(1+level)/2}`; exceedances are nested by
/// construction.
pub fn funnel_geometry(
    points: &[(String, f64, f64)],
    levels: &[f64],
) -> Result<FunnelGeometry> {
    if points.iter().any(|&(_, _, se)| se <= 0.0 || !se.is_finite()) {
        return Err(Error::DegenerateSe);
    }
    let mut funnel_points = Vec::with_capacity(points.len());
    let mut max_precision = 0.0f64;
    for (label, estimate, se) in points {
        let precision = 1.0 / se;
        max_precision = max_precision.max(precision);
        let z_score = estimate.abs() * precision;
        let flags: Vec<f64> = levels
            .iter()
            .copied()
            .filter(|&level| z_score > normal_quantile(0.5 + level / 2.0))
            .collect();
        funnel_points.push(FunnelPoint {
            label: label.clone(),
            estimate: *estimate,
            precision,
            flags,
        });
    }
    let hi = if max_precision > 0.0 {
        max_precision * 1.05
    } else {
        1.0
    };
    let lo = hi / 200.0;
    let curves = levels
        .iter()
        .map(|&level| {
            let z = normal_quantile(0.5 + level / 2.0);
            let samples = (0..=200)
                .map(|s| {
                    let x = lo + (hi - lo) * s as f64 / 200.0;
                    (x, z / x, -z / x)
                })
                .collect();
            ControlCurve { level, z, samples }
        })
        .collect();
    Ok(FunnelGeometry {
        points: funnel_points,
        curves,
    })
}

/// Normalize a propensity matrix column-wise: each player's column is
/// scaled to sum to one over attempts.
pub fn normalize_propensities(pi: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = pi.to_owned();
    for mut col in out.columns_mut() {
        let total: f64 = col.sum();
        if total > 0.0 {
            col.mapv_inplace(|v| v / total);
        }
    }
    out
}

/// Symmetric player-by-player Euclidean distances between normalized
/// propensity columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub m: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.m + b]
    }

    pub fn from_values(m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * m {
            return Err(Error::InvalidConfig("distance matrix shape".into()));
        }
        let d = DistanceMatrix { m, values };
        for a in 0..m {
            if d.get(a, a) != 0.0 {
                return Err(Error::InvalidConfig("nonzero diagonal".into()));
            }
            for b in 0..m {
                if (d.get(a, b) - d.get(b, a)).abs() > 1e-12 || d.get(a, b) < 0.0 {
                    return Err(Error::InvalidConfig("asymmetric distance matrix".into()));
                }
            }
        }
        Ok(d)
    }
}

/// Pairwise distances `d(a, b) = sqrt(sum_i (pi[i,a] - pi[i,b])^2)` over a
/// column-normalized propensity matrix.
pub fn propensity_distance(pi_bar: ArrayView2<'_, f64>) -> DistanceMatrix {
    let m = pi_bar.ncols();
    let n = pi_bar.nrows();
    let mut values = vec![0.0; m * m];
    for a in 0..m {
        for b in (a + 1)..m {
            let mut s = 0.0;
            for i in 0..n {
                let d = pi_bar[[i, a]] - pi_bar[[i, b]];
                s += d * d;
            }
            let d = s.sqrt();
            values[a * m + b] = d;
            values[b * m + a] = d;
        }
    }
    DistanceMatrix { m, values }
}

/// Descriptive statistics over all propensity entries, with the fraction
/// below practical-positivity thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityReport {
    pub entries: usize,
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub fraction_below_1e3: f64,
    pub fraction_below_1e2: f64,
}

pub fn positivity_report(pi: ArrayView2<'_, f64>) -> PositivityReport {
    let flat: Vec<f64> = pi.iter().copied().collect();
    let n = flat.len();
    // Compensated summation: the mean of n identical entries is exact to
    // one rounding, not n of them.
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in &flat {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    let mean = sum / n as f64;
    let min = flat.iter().cloned().fold(f64::INFINITY, f64::min);
    let below = |t: f64| flat.iter().filter(|&&v| v < t).count() as f64 / n as f64;
    PositivityReport {
        entries: n,
        mean,
        min,
        q25: quantile_type7(&flat, 0.25),
        median: quantile_type7(&flat, 0.5),
        q75: quantile_type7(&flat, 0.75),
        fraction_below_1e3: below(1e-3),
        fraction_below_1e2: below(1e-2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn funnel_center_line_never_flags() {
        let pts = vec![("a".to_string(), 0.0, 0.1)];
        let g = funnel_geometry(&pts, &[0.975, 0.99, 0.999]).unwrap();
        assert!(g.points[0].flags.is_empty());
    }

    #[test]
    fn funnel_flags_match_z_thresholds() {
        // |z| = 3.0: beyond 2.2414 and 2.5758, not beyond 3.2905.
        let pts = vec![("a".to_string(), 0.3, 0.1)];
        let g = funnel_geometry(&pts, &[0.975, 0.99, 0.999]).unwrap();
        assert_eq!(g.points[0].flags, vec![0.975, 0.99]);
    }

    #[test]
    fn funnel_flags_are_nested_for_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let levels = [0.975, 0.99, 0.999];
        let pts: Vec<(String, f64, f64)> = (0..1000)
            .map(|i| {
                (
                    format!("p{i}"),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.01..0.5),
                )
            })
            .collect();
        let g = funnel_geometry(&pts, &levels).unwrap();
        for p in &g.points {
            // Flag sets must be a prefix of the level list.
            assert_eq!(p.flags.as_slice(), &levels[..p.flags.len()]);
        }
    }

    #[test]
    fn funnel_rejects_degenerate_se() {
        let pts = vec![("a".to_string(), 0.1, 0.0)];
        assert!(funnel_geometry(&pts, &[0.975]).is_err());
    }

    #[test]
    fn normalization_examples() {
        // Uniform matrix: every entry becomes 1/n.
        let pi = Array2::from_elem((4, 2), 0.5);
        let out = normalize_propensities(pi.view());
        assert!(out.iter().all(|&v| (v - 0.25).abs() < 1e-15));

        // Column scaling leaves the result unchanged.
        let mut a = Array2::<f64>::zeros((2, 1));
        a[[0, 0]] = 0.2;
        a[[1, 0]] = 0.6;
        let mut b = a.clone();
        b.mapv_inplace(|v| v * 7.0);
        let na = normalize_propensities(a.view());
        let nb = normalize_propensities(b.view());
        assert!((na[[0, 0]] - 0.25).abs() < 1e-15);
        assert!((na[[1, 0]] - 0.75).abs() < 1e-15);
        for (x, y) in na.iter().zip(nb.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn distance_matrix_examples() {
        // Identical columns -> zero distance.
        let pi = Array2::from_elem((3, 2), 0.5);
        let d = propensity_distance(normalize_propensities(pi.view()).view());
        assert_eq!(d.get(0, 1), 0.0);

        // Simplex corners over n = 2: distance sqrt(2).
        let mut corners = Array2::<f64>::zeros((2, 2));
        corners[[0, 0]] = 1.0;
        corners[[1, 1]] = 1.0;
        let d = propensity_distance(corners.view());
        assert!((d.get(0, 1) - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_is_a_metric_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.gen_range(3..12);
            let m = rng.gen_range(3..6);
            let mut pi = Array2::<f64>::zeros((n, m));
            for v in pi.iter_mut() {
                *v = rng.gen_range(0.01..1.0);
            }
            let d = propensity_distance(normalize_propensities(pi.view()).view());
            for a in 0..m {
                assert_eq!(d.get(a, a), 0.0);
                for b in 0..m {
                    assert!((d.get(a, b) - d.get(b, a)).abs() < 1e-12);
                    for c in 0..m {
                        assert!(d.get(a, b) <= d.get(a, c) + d.get(c, b) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn positivity_uniform_84_players() {
        let pi = Array2::from_elem((50, 84), 1.0 / 84.0);
        let r = positivity_report(pi.view());
        assert!((r.mean - 1.0 / 84.0).abs() < 1e-15);
        assert_eq!(r.q25, r.q75);
        assert_eq!(r.fraction_below_1e2, 0.0);
        assert_eq!(r.fraction_below_1e3, 0.0);
    }

    #[test]
    fn positivity_quantiles_use_type7() {
        let mut pi = Array2::<f64>::zeros((4, 1));
        for (i, v) in [0.1, 0.2, 0.3, 0.4].iter().enumerate() {
            pi[[i, 0]] = *v;
        }
        let r = positivity_report(pi.view());
        assert!((r.median - 0.25).abs() < 1e-15);
    }
}
