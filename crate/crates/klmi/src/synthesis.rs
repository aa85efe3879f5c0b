//! Synthetic datasets and the Monte Carlo oracles that verify the bias
//! formula and the unbiasedness of the corrected estimator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{
    bias_table, bias_table_with, naive_mi, same_label_counts, BiasTable, LabeledDataset,
    LogVariant,
};
use crate::metric::{DistanceMatrix, Metric, NeighborTable};
use crate::numeric::exact_sum;

/// Name of the generator backing every seeded stream in this module.
/// ChaCha output is specified by the algorithm, so replicate streams are
/// reproducible across platforms and schedules.
pub const RNG_ALGORITHM: &str = "chacha8";

/// One independent stream per (seed, stream index) pair.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How labels and geometry are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Labels i.i.d. from the class probabilities, points i.i.d. uniform
    /// on the unit cube; labels and geometry are independent.
    IndependentUniform,
    /// Labels i.i.d. from the class probabilities, point = class mean
    /// plus isotropic Gaussian noise; labels and geometry are dependent.
    GaussianClusters { means: Vec<Vec<f64>>, spread: f64 },
    /// Fixed label multiset (largest-remainder quotas of the class
    /// probabilities) assigned to uniform points by a random
    /// permutation; labels and geometry are independent.
    LabelPermutation,
}

impl Family {
    pub fn is_independent(&self) -> bool {
        !matches!(self, Family::GaussianClusters { .. })
    }
}

/// Recipe for a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n: usize,
    pub class_probs: Vec<f64>,
    pub family: Family,
    pub dim: usize,
    pub rng_seed: u64,
}

impl GeneratorSpec {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("generator needs n >= 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::Domain("generator needs dim >= 1".into()));
        }
        if self.class_probs.is_empty() {
            return Err(Error::Domain("class probabilities are empty".into()));
        }
        if self.class_probs.iter().any(|&p| p <= 0.0 || !p.is_finite()) {
            return Err(Error::Domain(
                "class probabilities must be positive and finite".into(),
            ));
        }
        let total = exact_sum(self.class_probs.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "class probabilities sum to {total}, expected 1"
            )));
        }
        if let Family::GaussianClusters { means, spread } = &self.family {
            if means.len() != self.class_probs.len() {
                return Err(Error::Domain(format!(
                    "{} cluster means for {} classes",
                    means.len(),
                    self.class_probs.len()
                )));
            }
            if means.iter().any(|m| m.len() != self.dim) {
                return Err(Error::Shape(format!(
                    "cluster means must have dimension {}",
                    self.dim
                )));
            }
            if *spread <= 0.0 || !spread.is_finite() {
                return Err(Error::Domain("cluster spread must be positive".into()));
            }
        }
        Ok(())
    }
}

fn sample_class(probs: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (idx, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return idx as u32;
        }
    }
    (probs.len() - 1) as u32
}

/// Largest-remainder quotas of `n * p_c`, summing to exactly `n`.
fn quota_counts(probs: &[f64], n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = probs.iter().map(|&p| (p * n as f64) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(f64, usize)> = probs
        .iter()
        .enumerate()
        .map(|(idx, &p)| (p * n as f64 - counts[idx] as f64, idx))
        .collect();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, idx) in remainders.iter().take(n - assigned) {
        counts[idx] += 1;
    }
    counts
}

fn generate_with_rng(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<LabeledDataset> {
    let labels: Vec<u32> = match &spec.family {
        Family::IndependentUniform | Family::GaussianClusters { .. } => (0..spec.n)
            .map(|_| sample_class(&spec.class_probs, rng))
            .collect(),
        Family::LabelPermutation => {
            let counts = quota_counts(&spec.class_probs, spec.n);
            let mut labels: Vec<u32> = counts
                .iter()
                .enumerate()
                .flat_map(|(c, &k)| std::iter::repeat_n(c as u32, k))
                .collect();
            labels.shuffle(rng);
            labels
        }
    };
    let points: Vec<Vec<f64>> = match &spec.family {
        Family::IndependentUniform | Family::LabelPermutation => (0..spec.n)
            .map(|_| (0..spec.dim).map(|_| rng.random::<f64>()).collect())
            .collect(),
        Family::GaussianClusters { means, spread } => labels
            .iter()
            .map(|&c| {
                means[c as usize]
                    .iter()
                    .map(|&m| m + spread * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect(),
    };
    LabeledDataset::from_points(labels, points, Metric::Euclidean)
}

/// Deterministic synthetic dataset: same spec and seed, same dataset.
pub fn generate(spec: &GeneratorSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = stream_rng(spec.rng_seed, 0);
    generate_with_rng(spec, &mut rng)
}

/// Outcome of a Monte Carlo check against the analytic bias table.
///
/// `empirical_p_r` pools the observed distribution of `h_y` over all
/// seeds and replicates; `analytic_p_r` is the closed-form mixture it is
/// compared with (total variation distance in `tv_distance`).
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub replicates: u64,
    pub empirical_p_r: Vec<f64>,
    pub analytic_p_r: Vec<f64>,
    pub tv_distance: f64,
    #[serde(rename = "mean_i0_bits")]
    pub mean_i0: f64,
    #[serde(rename = "mean_ie_bits")]
    pub mean_ie: f64,
    #[serde(rename = "stderr_i0_bits")]
    pub stderr_i0: f64,
    /// Standard error of the mean of the corrected estimate.
    #[serde(skip)]
    pub stderr_ie: f64,
    /// Analytic bias the replicate means are judged against (averaged
    /// over replicates when class counts vary).
    #[serde(skip)]
    pub analytic_ib: f64,
    #[serde(skip)]
    pub rng_algorithm: &'static str,
}

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = exact_sum(samples.iter().copied()) / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let ss = exact_sum(samples.iter().map(|&x| (x - mean) * (x - mean)));
    (mean, (ss / (n * (n - 1.0))).sqrt())
}

fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * exact_sum(a.iter().zip(b).map(|(&x, &y)| (x - y).abs()))
}

/// Shuffle a fixed label multiset over fixed geometry and compare the
/// observed `h_y` distribution and mean naive estimate against the
/// closed-form bias table.
///
/// The geometry enters only through each seed's resolved ball, so the
/// balls are computed once and shared by all replicates. Fractional
/// `h_y` values (possible when the geometry has draws) fall outside the
/// integer bins and simply shrink the empirical mass.
pub fn permutation_bias_oracle(
    geometry: &DistanceMatrix,
    class_counts: &[u64],
    h: usize,
    replicates: u64,
    rng_seed: u64,
) -> Result<OracleReport> {
    let n: u64 = class_counts.iter().sum();
    if n as usize != geometry.size() {
        return Err(Error::Shape(format!(
            "class counts sum to {n} but the geometry has {} points",
            geometry.size()
        )));
    }
    if replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    let bias = bias_table(class_counts, h)?;
    let n = n as usize;
    let n_x = class_counts.len() as f64;

    let table = NeighborTable::new(geometry);
    let balls: Vec<_> = (0..n)
        .map(|seed| table.ball(geometry, seed, h, 0.0))
        .collect::<Result<Vec<_>>>()?;

    let template: Vec<u32> = class_counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c as u32, k as usize))
        .collect();

    // log2(n_x * r / h) for integer r; fractional h_y falls back to a
    // direct evaluation.
    let h_f = h as f64;
    let log_term: Vec<f64> = (0..=h).map(|r| (n_x * r as f64 / h_f).log2()).collect();

    let per_replicate: Vec<(Vec<u64>, f64)> = (0..replicates)
        .into_par_iter()
        .map(|ridx| {
            let mut rng = stream_rng(rng_seed, ridx + 1);
            let mut labels = template.clone();
            labels.shuffle(&mut rng);
            let mut hist = vec![0u64; h];
            let mut terms = Vec::with_capacity(n);
            for ball in &balls {
                let same = labels[ball.seed];
                let inner = ball.inner.iter().filter(|&&j| labels[j] == same).count();
                let boundary = ball.boundary.iter().filter(|&&j| labels[j] == same).count();
                let hy = inner as f64 + ball.boundary_weight * boundary as f64;
                let rounded = hy.round();
                if (hy - rounded).abs() < 1e-9 && rounded >= 1.0 && rounded <= h_f {
                    hist[rounded as usize - 1] += 1;
                    terms.push(log_term[rounded as usize]);
                } else {
                    terms.push((n_x * hy / h_f).log2());
                }
            }
            (hist, exact_sum(terms) / n as f64)
        })
        .collect();

    let mut hist = vec![0u64; h];
    for (replicate_hist, _) in &per_replicate {
        for (slot, &count) in hist.iter_mut().zip(replicate_hist) {
            *slot += count;
        }
    }
    let i0_samples: Vec<f64> = per_replicate.iter().map(|&(_, i0)| i0).collect();
    let draws_total = (n as u64 * replicates) as f64;
    let empirical_p_r: Vec<f64> = hist.iter().map(|&c| c as f64 / draws_total).collect();

    let (mean_i0, stderr_i0) = mean_and_stderr(&i0_samples);
    Ok(OracleReport {
        replicates,
        tv_distance: tv_distance(&empirical_p_r, &bias.p_r),
        empirical_p_r,
        analytic_p_r: bias.p_r.clone(),
        mean_i0,
        mean_ie: mean_i0 - bias.i_b,
        stderr_i0,
        stderr_ie: stderr_i0,
        analytic_ib: bias.i_b,
        rng_algorithm: RNG_ALGORITHM,
    })
}

/// Generate a fresh dataset per replicate from an independent family and
/// measure the corrected estimator against zero.
///
/// Continuous geometry is draw-free almost surely; the rare replicate
/// with a boundary draw is regenerated from a fresh stream so every
/// `h_y` is an integer.
pub fn independence_suite(
    spec: &GeneratorSpec,
    h: usize,
    replicates: u64,
) -> Result<OracleReport> {
    independence_suite_with(spec, h, replicates, LogVariant::Nx)
}

/// [`independence_suite`] with a chosen bias log-variant. The default
/// variant cancels the bias exactly; the per-class-count variant is a
/// diagnostic whose mean stays visibly nonzero on unbalanced classes.
pub fn independence_suite_with(
    spec: &GeneratorSpec,
    h: usize,
    replicates: u64,
    variant: LogVariant,
) -> Result<OracleReport> {
    spec.validate()?;
    if !spec.family.is_independent() {
        return Err(Error::Domain(
            "independence suite requires an independent family".into(),
        ));
    }
    if replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    if h < 1 || h > spec.n {
        return Err(Error::Domain(format!(
            "h = {h} outside the valid range 1..={}",
            spec.n
        )));
    }

    struct ReplicateOutcome {
        hist: Vec<u64>,
        p_r: Vec<f64>,
        i0: f64,
        ie: f64,
        ib: f64,
    }

    let per_replicate: Vec<ReplicateOutcome> = (0..replicates)
        .into_par_iter()
        .map(|ridx| -> Result<ReplicateOutcome> {
            // Retries bump the high stream bits, keeping every attempt
            // on its own deterministic stream.
            for attempt in 0u64..64 {
                let mut rng = stream_rng(spec.rng_seed, (ridx + 1) | (attempt << 40));
                let ds = generate_with_rng(spec, &mut rng)?;
                let counts = same_label_counts(&ds, h)?;
                if !counts.draw_free {
                    continue;
                }
                let n_x = ds.n_classes();
                let i0 = naive_mi(&counts, n_x)?;
                let bias: BiasTable = bias_table_with(ds.class_counts(), h, variant, None)?;
                let mut hist = vec![0u64; h];
                for &v in &counts.values {
                    hist[v as usize - 1] += 1;
                }
                return Ok(ReplicateOutcome {
                    hist,
                    p_r: bias.p_r,
                    i0,
                    ie: i0 - bias.i_b,
                    ib: bias.i_b,
                });
            }
            Err(Error::Internal(
                "could not generate draw-free geometry in 64 attempts".into(),
            ))
        })
        .collect::<Result<_>>()?;

    let mut hist = vec![0u64; h];
    for outcome in &per_replicate {
        for (slot, &count) in hist.iter_mut().zip(&outcome.hist) {
            *slot += count;
        }
    }
    let total = exact_sum(hist.iter().map(|&c| c as f64));
    let empirical_p_r: Vec<f64> = hist.iter().map(|&c| c as f64 / total).collect();
    // Class counts vary across replicates; the comparable analytic law
    // is the average of the per-replicate mixtures.
    let analytic_p_r: Vec<f64> = (0..h)
        .map(|idx| exact_sum(per_replicate.iter().map(|o| o.p_r[idx])) / replicates as f64)
        .collect();

    let i0_samples: Vec<f64> = per_replicate.iter().map(|o| o.i0).collect();
    let ie_samples: Vec<f64> = per_replicate.iter().map(|o| o.ie).collect();
    let (mean_i0, stderr_i0) = mean_and_stderr(&i0_samples);
    let (mean_ie, stderr_ie) = mean_and_stderr(&ie_samples);
    let analytic_ib =
        exact_sum(per_replicate.iter().map(|o| o.ib)) / replicates as f64;

    Ok(OracleReport {
        replicates,
        tv_distance: tv_distance(&empirical_p_r, &analytic_p_r),
        empirical_p_r,
        analytic_p_r,
        mean_i0,
        mean_ie,
        stderr_i0,
        stderr_ie,
        analytic_ib,
        rng_algorithm: RNG_ALGORITHM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_spec(n: usize, probs: Vec<f64>, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            n,
            class_probs: probs,
            family: Family::IndependentUniform,
            dim: 2,
            rng_seed: seed,
        }
    }

    #[test]
    fn generate_single_class() {
        let ds = generate(&uniform_spec(10, vec![1.0], 7)).unwrap();
        assert_eq!(ds.n(), 10);
        assert_eq!(ds.n_classes(), 1);
        assert_eq!(ds.class_counts(), &[10]);
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = uniform_spec(50, vec![0.5, 0.3, 0.2], 1234);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.labels(), b.labels());
        let (da, db) = (a.distance_matrix(), b.distance_matrix());
        for i in 0..a.n() {
            assert_eq!(da.row(i), db.row(i));
        }
        let c = generate(&uniform_spec(50, vec![0.5, 0.3, 0.2], 1235)).unwrap();
        assert_ne!(da.row(0), c.distance_matrix().row(0));
    }

    #[test]
    fn generate_rejects_degenerate_specs() {
        assert!(generate(&uniform_spec(0, vec![1.0], 0)).is_err());
        assert!(generate(&uniform_spec(5, vec![], 0)).is_err());
        assert!(generate(&uniform_spec(5, vec![0.7, 0.7], 0)).is_err());
        assert!(generate(&uniform_spec(5, vec![1.5, -0.5], 0)).is_err());
    }

    #[test]
    fn gaussian_clusters_separate_cleanly() {
        let spec = GeneratorSpec {
            n: 1000,
            class_probs: vec![0.5, 0.5],
            family: Family::GaussianClusters {
                means: vec![vec![0.0], vec![1.0]],
                spread: 0.01,
            },
            dim: 1,
            rng_seed: 99,
        };
        let ds = generate(&spec).unwrap();
        let counts = same_label_counts(&ds, 2).unwrap();
        // Separation of 100 spreads: every 2-ball stays within its cluster.
        assert!(counts.values.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn label_permutation_uses_exact_quotas() {
        let spec = GeneratorSpec {
            n: 10,
            class_probs: vec![0.25, 0.35, 0.4],
            family: Family::LabelPermutation,
            dim: 1,
            rng_seed: 5,
        };
        let ds = generate(&spec).unwrap();
        let mut counts = ds.class_counts().to_vec();
        counts.sort_unstable();
        // Quotas of 2.5, 3.5, 4.0 resolve to 3, 3, 4 by largest remainder.
        assert_eq!(counts, vec![3, 3, 4]);
    }

    #[test]
    fn permutation_oracle_single_replicate_is_well_formed() {
        let ds = generate(&uniform_spec(12, vec![0.5, 0.5], 3)).unwrap();
        let report = permutation_bias_oracle(
            &ds.distance_matrix(),
            ds.class_counts(),
            3,
            1,
            42,
        )
        .unwrap();
        assert_eq!(report.replicates, 1);
        let total = exact_sum(report.empirical_p_r.iter().copied());
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(report.rng_algorithm, "chacha8");
    }

    #[test]
    fn permutation_oracle_matches_exact_small_case() {
        // Four points, counts [2, 2], h = 2: P(h_y) = [2/3, 1/3].
        let ds = generate(&uniform_spec(4, vec![0.5, 0.5], 11)).unwrap();
        let report =
            permutation_bias_oracle(&ds.distance_matrix(), &[2, 2], 2, 20_000, 7).unwrap();
        assert!((report.analytic_p_r[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(report.tv_distance < 0.01, "tv = {}", report.tv_distance);
    }

    #[test]
    fn permutation_oracle_single_class_degenerate() {
        let ds = generate(&uniform_spec(8, vec![1.0], 2)).unwrap();
        let report =
            permutation_bias_oracle(&ds.distance_matrix(), &[8], 3, 50, 1).unwrap();
        assert_eq!(report.empirical_p_r, vec![0.0, 0.0, 1.0]);
        assert_eq!(report.analytic_p_r[2], 1.0);
        assert_eq!(report.mean_i0, 0.0);
        assert_eq!(report.mean_ie, 0.0);
        assert_eq!(report.tv_distance, 0.0);
    }

    #[test]
    fn permutation_oracle_rejects_mismatched_counts() {
        let ds = generate(&uniform_spec(8, vec![1.0], 2)).unwrap();
        assert!(permutation_bias_oracle(&ds.distance_matrix(), &[9], 3, 5, 1).is_err());
        assert!(permutation_bias_oracle(&ds.distance_matrix(), &[8], 9, 5, 1).is_err());
        assert!(permutation_bias_oracle(&ds.distance_matrix(), &[8], 3, 0, 1).is_err());
    }

    #[test]
    fn suite_rejects_dependent_family() {
        let spec = GeneratorSpec {
            n: 20,
            class_probs: vec![0.5, 0.5],
            family: Family::GaussianClusters {
                means: vec![vec![0.0], vec![1.0]],
                spread: 0.1,
            },
            dim: 1,
            rng_seed: 0,
        };
        assert!(matches!(
            independence_suite(&spec, 2, 10),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn suite_single_class_is_exactly_zero() {
        let report = independence_suite(&uniform_spec(15, vec![1.0], 4), 4, 25).unwrap();
        assert_eq!(report.mean_ie, 0.0);
        assert_eq!(report.stderr_ie, 0.0);
        assert_eq!(report.mean_i0, 0.0);
    }

    #[test]
    fn suite_is_reproducible() {
        let spec = uniform_spec(30, vec![0.6, 0.4], 77);
        let a = independence_suite(&spec, 3, 40).unwrap();
        let b = independence_suite(&spec, 3, 40).unwrap();
        assert_eq!(a.mean_i0.to_bits(), b.mean_i0.to_bits());
        assert_eq!(a.mean_ie.to_bits(), b.mean_ie.to_bits());
        assert_eq!(a.empirical_p_r, b.empirical_p_r);
    }

    #[test]
    fn suite_mean_ie_near_zero_at_desk_scale() {
        let report = independence_suite(&uniform_spec(60, vec![0.5, 0.5], 21), 4, 400).unwrap();
        assert!(
            report.mean_ie.abs() <= 4.0 * report.stderr_ie,
            "mean_ie = {} stderr = {}",
            report.mean_ie,
            report.stderr_ie
        );
        // The naive estimate carries visible positive bias.
        assert!(report.mean_i0 > 4.0 * report.stderr_i0);
    }

    #[test]
    fn suite_nc_variant_diagnostic_runs() {
        // Diagnostic comparison, not a correctness assertion: with
        // unbalanced classes the per-class-count variant does not cancel
        // the bias. Its residual is printed for inspection.
        let spec = uniform_spec(50, vec![0.8, 0.2], 13);
        let nx = independence_suite_with(&spec, 4, 300, LogVariant::Nx).unwrap();
        let nc = independence_suite_with(&spec, 4, 300, LogVariant::Nc).unwrap();
        assert_eq!(nx.mean_i0.to_bits(), nc.mean_i0.to_bits());
        println!(
            "nc-variant residual: mean_ie = {} ({} stderr) vs nx {} ({} stderr)",
            nc.mean_ie,
            nc.mean_ie / nc.stderr_ie,
            nx.mean_ie,
            nx.mean_ie / nx.stderr_ie
        );
    }
}
