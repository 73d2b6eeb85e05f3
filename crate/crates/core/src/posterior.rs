//! Posterior summaries of a chain: means of `C` and `D`, main versus
//! miscellaneous groups, hard assignments, simplex projections, order
//! positions, and per-series diagnostics.
//!
//! Groups and positions are 0-based here; output files shift them to 1-based.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeMeta;
use crate::sampler::Chain;

/// Within-group citation probability below which a group is miscellaneous.
pub const DEFAULT_MISC_THRESHOLD: f64 = 0.1;

/// Number of autocorrelation lags reported by [`diagnostics`].
pub const ACF_MAX_LAG: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Main,
    Miscellaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub samples: usize,
    pub c_mean: Array2<f64>,
    /// Node-indexed posterior mean memberships.
    pub d_mean: Array2<f64>,
    pub alpha_mean: f64,
    pub alpha_sd: f64,
    pub threshold: f64,
    pub group_kind: Vec<GroupKind>,
    pub assignment: Vec<usize>,
    /// Row `r` is the empirical distribution of node `r` over positions.
    pub position_hist: Array2<f64>,
}

impl PosteriorSummary {
    /// Recomputes group kinds and assignments for another threshold.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.group_kind = classify_groups(&self.c_mean, threshold);
        self.assignment = assign_nodes(&self.d_mean, &self.group_kind);
        self
    }

    /// 1-based posterior mean position of every node.
    pub fn mean_positions(&self) -> Vec<f64> {
        self.position_hist
            .rows()
            .into_iter()
            .map(|row| row.iter().enumerate().map(|(p, w)| (p + 1) as f64 * w).sum())
            .collect()
    }

    pub fn main_groups(&self) -> Vec<usize> {
        (0..self.group_kind.len())
            .filter(|&g| self.group_kind[g] == GroupKind::Main)
            .collect()
    }
}

pub fn summarize(chain: &Chain) -> Result<PosteriorSummary> {
    summarize_with(chain, DEFAULT_MISC_THRESHOLD)
}

pub fn summarize_with(chain: &Chain, threshold: f64) -> Result<PosteriorSummary> {
    let first = chain.samples.first().ok_or(Error::EmptyChain)?;
    let (n, k) = (first.n(), first.k());
    let count = chain.samples.len() as f64;
    let mut c_mean = Array2::<f64>::zeros((k, k));
    let mut d_mean = Array2::<f64>::zeros((n, k));
    let mut hist = Array2::<f64>::zeros((n, n));
    let mut alphas = Vec::with_capacity(chain.samples.len());
    for s in &chain.samples {
        c_mean += &s.c;
        for (p, &node) in s.order.as_slice().iter().enumerate() {
            for i in 0..k {
                d_mean[[node, i]] += s.d_star[[p, i]];
            }
            hist[[node, p]] += 1.0;
        }
        alphas.push(s.alpha);
    }
    c_mean /= count;
    d_mean /= count;
    hist /= count;
    let alpha_mean = alphas.iter().sum::<f64>() / count;
    let alpha_sd = if alphas.len() > 1 {
        (alphas.iter().map(|a| (a - alpha_mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
    } else {
        0.0
    };
    let group_kind = classify_groups(&c_mean, threshold);
    let assignment = assign_nodes(&d_mean, &group_kind);
    Ok(PosteriorSummary {
        samples: chain.samples.len(),
        c_mean,
        d_mean,
        alpha_mean,
        alpha_sd,
        threshold,
        group_kind,
        assignment,
        position_hist: hist,
    })
}

/// A group is miscellaneous when its mean within-group citation
/// probability falls below `threshold`.
pub fn classify_groups(c_mean: &Array2<f64>, threshold: f64) -> Vec<GroupKind> {
    c_mean
        .diag()
        .iter()
        .map(|&v| {
            if v < threshold {
                GroupKind::Miscellaneous
            } else {
                GroupKind::Main
            }
        })
        .collect()
}

fn argmax_among(row: &[f64], groups: impl Iterator<Item = usize>) -> Option<usize> {
    // `>=` keeps the earlier group on ties
    groups.fold(None, |best: Option<usize>, g| match best {
        Some(b) if row[b] >= row[g] => Some(b),
        _ => Some(g),
    })
}

/// Hard assignment: the strongest main group if any main membership
/// exceeds `1/K`, otherwise the strongest miscellaneous group. Ties go to
/// the lowest index; with no miscellaneous group the strongest group
/// overall is used.
pub fn assign_nodes(d_mean: &Array2<f64>, kinds: &[GroupKind]) -> Vec<usize> {
    let k = kinds.len();
    let cutoff = 1.0 / k as f64;
    let of_kind = |kind: GroupKind| (0..k).filter(move |&g| kinds[g] == kind);
    d_mean
        .rows()
        .into_iter()
        .map(|row| {
            let row = row.to_vec();
            if of_kind(GroupKind::Main).any(|g| row[g] > cutoff) {
                return argmax_among(&row, of_kind(GroupKind::Main)).expect("non-empty");
            }
            argmax_among(&row, of_kind(GroupKind::Miscellaneous))
                .or_else(|| argmax_among(&row, 0..k))
                .expect("K >= 1")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexProjection {
    pub main_groups: Vec<usize>,
    /// `n x main_groups.len()` barycentric coordinates over the main groups.
    pub coords: Array2<f64>,
    /// Total membership on the main groups; 0 means a point at the centroid
    /// with no mass on the main surface.
    pub surface_distance: Vec<f64>,
}

pub fn project_simplex(d_mean: &Array2<f64>, main_groups: &[usize]) -> SimplexProjection {
    let n = d_mean.nrows();
    let m = main_groups.len();
    let mut coords = Array2::zeros((n, m));
    let mut surface = Vec::with_capacity(n);
    for r in 0..n {
        let mass: f64 = main_groups.iter().map(|&g| d_mean[[r, g]]).sum();
        for (c, &g) in main_groups.iter().enumerate() {
            coords[[r, c]] = if mass > 0.0 {
                d_mean[[r, g]] / mass
            } else {
                1.0 / m as f64
            };
        }
        surface.push(mass);
    }
    SimplexProjection {
        main_groups: main_groups.to_vec(),
        coords,
        surface_distance: surface,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionRow {
    pub node: usize,
    pub id: String,
    pub year: i32,
    pub mean_position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionTable {
    pub rows: Vec<PositionRow>,
    /// Ids of nodes without a year.
    pub excluded: Vec<String>,
}

pub fn position_vs_year(summary: &PosteriorSummary, nodes: &[NodeMeta]) -> Result<PositionTable> {
    if nodes.len() != summary.position_hist.nrows() {
        return Err(Error::dims(summary.position_hist.nrows(), nodes.len()));
    }
    let means = summary.mean_positions();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (r, node) in nodes.iter().enumerate() {
        match node.year {
            Some(year) => rows.push(PositionRow {
                node: r,
                id: node.id.to_string(),
                year,
                mean_position: means[r],
            }),
            None => excluded.push(node.id.to_string()),
        }
    }
    Ok(PositionTable { rows, excluded })
}

/// A scalar extracted from every retained sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Alpha,
    LogJoint,
    C(usize, usize),
    /// Membership of a node (by node index) in a group.
    D(usize, usize),
    /// 1-based position of a node.
    Position(usize),
}

impl std::str::FromStr for Series {
    type Err = Error;

    /// Accepts `alpha`, `log_joint`, `C_i_j`, `D_r_i` and `pos_r`, all 1-based.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownSeries(s.to_string());
        let nums = |rest: &str, count: usize| -> Result<Vec<usize>> {
            let parts: Vec<usize> = rest
                .split('_')
                .map(|p| p.parse::<usize>().ok().filter(|&v| v >= 1).map(|v| v - 1))
                .collect::<Option<_>>()
                .ok_or_else(unknown)?;
            if parts.len() == count {
                Ok(parts)
            } else {
                Err(unknown())
            }
        };
        match s {
            "alpha" => Ok(Series::Alpha),
            "log_joint" => Ok(Series::LogJoint),
            _ => {
                if let Some(rest) = s.strip_prefix("C_") {
                    let v = nums(rest, 2)?;
                    Ok(Series::C(v[0], v[1]))
                } else if let Some(rest) = s.strip_prefix("D_") {
                    let v = nums(rest, 2)?;
                    Ok(Series::D(v[0], v[1]))
                } else if let Some(rest) = s.strip_prefix("pos_") {
                    Ok(Series::Position(nums(rest, 1)?[0]))
                } else {
                    Err(unknown())
                }
            }
        }
    }
}

pub fn extract_series(chain: &Chain, series: Series) -> Result<Vec<f64>> {
    let first = chain.samples.first().ok_or(Error::EmptyChain)?;
    let (n, k) = (first.n(), first.k());
    let bad = || Error::UnknownSeries(format!("{series:?}"));
    match series {
        Series::Alpha => Ok(chain.samples.iter().map(|s| s.alpha).collect()),
        Series::LogJoint => Ok(chain.log_joint_trace.clone()),
        Series::C(i, j) if i < k && j < k => Ok(chain.samples.iter().map(|s| s.c[[i, j]]).collect()),
        Series::D(r, i) if r < n && i < k => Ok(chain
            .samples
            .iter()
            .map(|s| s.d_star[[s.order.positions()[r], i]])
            .collect()),
        Series::Position(r) if r < n => Ok(chain
            .samples
            .iter()
            .map(|s| (s.order.positions()[r] + 1) as f64)
            .collect()),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Sample autocorrelation at lags `0..=min(50, N - 1)`; empty for a
    /// constant series.
    pub acf: Vec<f64>,
    pub ess: f64,
    pub trace: Vec<f64>,
    /// Set for constant series, where the ACF is undefined and ESS is `N`.
    pub degenerate: bool,
}

pub fn diagnostics(chain: &Chain, series: Series) -> Result<Diagnostics> {
    Ok(series_diagnostics(&extract_series(chain, series)?))
}

/// Biased sample autocovariance at `lag`, divided by `N`.
fn autocovariance(centered: &[f64], lag: usize) -> f64 {
    let n = centered.len();
    centered[..n - lag]
        .iter()
        .zip(&centered[lag..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64
}

/// ACF to lag 50 and `ESS = N / (1 + 2 * sum of ACF)` over positive lags
/// up to (excluding) the first negative autocorrelation.
pub fn series_diagnostics(values: &[f64]) -> Diagnostics {
    let n = values.len();
    let trace = values.to_vec();
    if n == 0 {
        return Diagnostics {
            acf: Vec::new(),
            ess: 0.0,
            trace,
            degenerate: true,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var = autocovariance(&centered, 0);
    if var <= 0.0 || !var.is_finite() {
        return Diagnostics {
            acf: Vec::new(),
            ess: n as f64,
            trace,
            degenerate: true,
        };
    }
    let acf: Vec<f64> = (0..=ACF_MAX_LAG.min(n - 1))
        .map(|lag| autocovariance(&centered, lag) / var)
        .collect();
    let mut sum = 0.0;
    for lag in 1..n {
        let rho = acf
            .get(lag)
            .copied()
            .unwrap_or_else(|| autocovariance(&centered, lag) / var);
        if rho < 0.0 {
            break;
        }
        sum += rho;
    }
    Diagnostics {
        acf,
        ess: n as f64 / (1.0 + 2.0 * sum),
        trace,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Ordering;
    use crate::model::{ModelState, DIAG_SENTINEL};
    use crate::sampler::{ChainConfig, Tallies};
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(c11: f64, alpha: f64, order: Vec<usize>) -> ModelState {
        let n = order.len();
        ModelState {
            order: Ordering::new(order).unwrap(),
            alpha,
            c: arr2(&[[c11, 0.1], [0.2, 0.3]]),
            d_star: Array2::from_shape_fn((n, 2), |(p, i)| if i == 0 { 0.1 * (p + 1) as f64 } else { 1.0 - 0.1 * (p + 1) as f64 }),
            z_star: Array2::from_shape_fn((n, n), |(p, q)| if p == q { DIAG_SENTINEL } else { 0 }),
        }
    }

    fn chain(samples: Vec<ModelState>) -> Chain {
        let len = samples.len();
        Chain {
            samples,
            log_joint_trace: vec![0.0; len],
            iterations: (1..=len).collect(),
            config: ChainConfig::default(),
            tallies: Tallies::default(),
        }
    }

    #[test]
    fn empty_chain_errors() {
        assert!(matches!(summarize(&chain(vec![])), Err(Error::EmptyChain)));
    }

    #[test]
    fn single_sample_summary_equals_sample() {
        let s = sample(0.2, 1.3, vec![2, 0, 1]);
        let summary = summarize(&chain(vec![s.clone()])).unwrap();
        assert_eq!(summary.c_mean, s.c);
        assert_eq!(summary.d_mean, s.membership());
        assert_eq!(summary.alpha_mean, 1.3);
        assert_eq!(summary.alpha_sd, 0.0);
        assert_eq!(summary.mean_positions(), vec![2.0, 3.0, 1.0]);
    }

    #[test]
    fn two_sample_means() {
        let summary = summarize(&chain(vec![
            sample(0.2, 1.0, vec![0, 1, 2]),
            sample(0.4, 2.0, vec![1, 0, 2]),
        ]))
        .unwrap();
        assert!((summary.c_mean[[0, 0]] - 0.3).abs() < 1e-15);
        assert!((summary.alpha_sd - 0.5f64.sqrt()).abs() < 1e-12);
        for row in summary.position_hist.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        for row in summary.d_mean.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(summary.mean_positions(), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn classify_threshold_rule() {
        let c = Array2::from_diag(&ndarray::arr1(&[0.5, 0.4, 0.05]));
        use GroupKind::*;
        assert_eq!(classify_groups(&c, 0.1), vec![Main, Main, Miscellaneous]);
        let c = Array2::from_diag(&ndarray::arr1(&[0.5, 0.1]));
        assert_eq!(classify_groups(&c, 0.1), vec![Main, Main]);
        assert_eq!(classify_groups(&c, 1.01), vec![Miscellaneous, Miscellaneous]);
    }

    #[test]
    fn assignment_rule() {
        use GroupKind::*;
        let kinds = [Main, Main, Main, Miscellaneous];
        let d = arr2(&[[0.30, 0.20, 0.10, 0.40], [0.20, 0.20, 0.20, 0.40]]);
        assert_eq!(assign_nodes(&d, &kinds), vec![0, 3]);
        assert_eq!(assign_nodes(&arr2(&[[0.5, 0.5]]), &[Main, Main]), vec![0]);
        // Strongest main wins even if a miscellaneous group is larger.
        let d = arr2(&[[0.26, 0.30, 0.0, 0.44]]);
        assert_eq!(assign_nodes(&d, &kinds), vec![1]);
    }

    #[test]
    fn simplex_examples() {
        let d = arr2(&[[0.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0], [0.4, 0.4, 0.0, 0.2]]);
        let proj = project_simplex(&d, &[0, 1, 2]);
        let third = 1.0 / 3.0;
        assert_eq!(proj.coords.row(0).to_vec(), vec![third, third, third]);
        assert_eq!(proj.surface_distance[0], 0.0);
        assert_eq!(proj.coords.row(1).to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(proj.surface_distance[1], 1.0);
        assert_eq!(proj.coords.row(2).to_vec(), vec![0.5, 0.5, 0.0]);
        assert!((proj.surface_distance[2] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn positions_with_and_without_years() {
        use crate::graph::NodeId;
        let s = sample(0.2, 1.0, vec![1, 0]);
        let summary = summarize(&chain(vec![s.clone(), s])).unwrap();
        let nodes = vec![
            NodeMeta { id: NodeId::new("a").unwrap(), label: None, year: Some(2001), month: None },
            NodeMeta::bare(NodeId::new("b").unwrap()),
        ];
        let table = position_vs_year(&summary, &nodes).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].mean_position, 2.0);
        assert_eq!(table.excluded, vec!["b".to_string()]);
    }

    #[test]
    fn series_parsing() {
        assert_eq!("alpha".parse::<Series>().unwrap(), Series::Alpha);
        assert_eq!("C_1_2".parse::<Series>().unwrap(), Series::C(0, 1));
        assert_eq!("D_3_1".parse::<Series>().unwrap(), Series::D(2, 0));
        assert_eq!("pos_4".parse::<Series>().unwrap(), Series::Position(3));
        for bad in ["beta", "C_0_1", "C_1", "pos_x", "D_1_2_3"] {
            assert!(matches!(bad.parse::<Series>(), Err(Error::UnknownSeries(_))), "{bad}");
        }
        let ch = chain(vec![sample(0.2, 1.0, vec![0, 1])]);
        assert!(matches!(diagnostics(&ch, Series::C(5, 0)), Err(Error::UnknownSeries(_))));
        assert_eq!(extract_series(&ch, Series::Position(1)).unwrap(), vec![2.0]);
    }

    #[test]
    fn white_noise_acf() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let diag = series_diagnostics(&xs);
        assert_eq!(diag.acf[0], 1.0);
        assert_eq!(diag.acf.len(), ACF_MAX_LAG + 1);
        assert!(diag.acf[1].abs() < 3.0 / (n as f64).sqrt());
        assert!(diag.ess > 0.5 * n as f64);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let diag = series_diagnostics(&[2.0; 40]);
        assert!(diag.degenerate);
        assert_eq!(diag.ess, 40.0);
        assert!(diag.acf.is_empty());
    }

    #[test]
    fn ar1_lag_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let normal = rand_distr::StandardNormal;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..10_000)
            .map(|_| {
                let e: f64 = rand_distr::Distribution::sample(&normal, &mut rng);
                x = 0.5 * x + e;
                x
            })
            .collect();
        let diag = series_diagnostics(&xs);
        assert!((diag.acf[1] - 0.5).abs() < 0.05, "{}", diag.acf[1]);
        // ESS of AR(1) is about N (1 - rho) / (1 + rho) = N / 3.
        assert!((diag.ess / 10_000.0 - 1.0 / 3.0).abs() < 0.08, "{}", diag.ess);
    }
}
