//! Statistical-stability sweep over the coupling of the map family.
//!
//! Each row extracts physical measures at one coupling on the same jittered
//! grid. Rows run in parallel and are written to separate files, then merged
//! in parameter order. The merged result reports where the number of
//! measures `N` drops (semicontinuity candidates), where it jumps up
//! (numerical artifacts: the count can only drop under perturbation), and,
//! where `N` is constant, the largest distance between matched centroids of
//! adjacent rows.

use std::path::Path;

use anyhow::{Context, Result};
use mclab_core::measures::{extract_physical_measures, GridSpec, TestDictionary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, SweepConfig};
use crate::experiments::{Experiment, Outcome};
use crate::output::{to_json_bytes, write_atomic, write_csv, write_json, Cell, Envelope, SCHEMA};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub alpha: f64,
    /// `None` when the extraction failed; see `error`.
    pub n_measures: Option<usize>,
    pub basin_fractions: Vec<f64>,
    pub unresolved_fraction: Option<f64>,
    pub centroids: Vec<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    /// `N` is unchanged.
    Constant,
    /// `N` drops: a candidate discontinuity allowed by semicontinuity.
    Drop,
    /// `N` increases: a numerical artifact.
    JumpUp,
    /// One of the rows failed.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub kind: TransitionKind,
    /// Largest distance between matched centroids, for constant `N`.
    pub max_centroid_distance: Option<f64>,
    /// Matched centroids farther apart than the continuity tolerance.
    pub discontinuous: bool,
}

/// A maximal run of rows with the same `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub first: usize,
    pub last: usize,
    pub alpha_from: f64,
    pub alpha_to: f64,
    pub n_measures: usize,
    pub max_centroid_distance: f64,
    pub continuous: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub transitions: Vec<Transition>,
    pub regimes: Vec<Regime>,
    /// Rows whose unresolved fraction exceeds the threshold, or that failed.
    pub flagged_rows: Vec<usize>,
    pub drops: Vec<usize>,
    pub jumps_up: Vec<usize>,
    /// `N` is the same on every row.
    pub n_constant: bool,
    pub max_adjacent_distance: Option<f64>,
}

pub fn alphas(c: &SweepConfig) -> Vec<f64> {
    (0..c.steps)
        .map(|i| {
            if i + 1 == c.steps {
                c.alpha_max
            } else {
                c.alpha_min + (c.alpha_max - c.alpha_min) * i as f64 / (c.steps - 1) as f64
            }
        })
        .collect()
}

pub fn validate(c: &SweepConfig) -> Result<TestDictionary, ConfigError> {
    if c.steps < 2 {
        return Err(ConfigError("sweep.steps: need at least 2 steps".into()));
    }
    if !(c.alpha_min <= c.alpha_max) {
        return Err(ConfigError("sweep.alpha_min: must not exceed sweep.alpha_max".into()));
    }
    if c.grid == 0 || c.n < 2 {
        return Err(ConfigError("sweep: need grid ≥ 1 and n ≥ 2".into()));
    }
    if !(1..=mclab_core::measures::dictionary::MAX_ACC_DEGREE).contains(&c.degree) {
        return Err(ConfigError("sweep.degree: out of range".into()));
    }
    Ok(TestDictionary::new(c.degree))
}

/// Extraction at one parameter; failures are recorded, not raised.
pub fn sweep_row(cfg: &ExperimentConfig, index: usize, alpha: f64, dict: &TestDictionary) -> SweepRow {
    let c = &cfg.sweep;
    let mut row = SweepRow {
        index,
        alpha,
        n_measures: None,
        basin_fractions: Vec::new(),
        unresolved_fraction: None,
        centroids: Vec::new(),
        error: None,
    };
    let res = cfg.map.build_with_alpha(alpha).map_err(|e| e.0).and_then(|map| {
        // common grid for every row, so rows differ only through the map
        extract_physical_measures(
            &map,
            &GridSpec::new(c.grid, cfg.seed),
            c.n,
            c.tol_conv,
            c.delta_cluster,
            dict,
        )
        .map_err(|e| e.to_string())
    });
    match res {
        Ok(r) => {
            row.n_measures = Some(r.n_measures());
            row.unresolved_fraction = Some(r.unresolved_fraction);
            row.centroids = r.measures.iter().map(|m| m.moments().to_vec()).collect();
            row.basin_fractions = r.basin_fractions;
        }
        Err(e) => row.error = Some(e),
    }
    row
}

/// Greedy min-distance pairing of two equally long centroid lists; returns
/// the largest matched distance.
pub fn match_centroids(a: &[Vec<f64>], b: &[Vec<f64>], dict: &TestDictionary) -> f64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push((dict.distance(x, y), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let (mut used_a, mut used_b) = (vec![false; a.len()], vec![false; b.len()]);
    let mut worst: f64 = 0.0;
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

/// Flags and regimes of an ordered list of rows.
pub fn analyze(rows: Vec<SweepRow>, c: &SweepConfig, dict: &TestDictionary) -> SweepResult {
    let transitions: Vec<Transition> = rows
        .windows(2)
        .map(|w| {
            let (kind, dist) = match (w[0].n_measures, w[1].n_measures) {
                (Some(a), Some(b)) if a == b => (
                    TransitionKind::Constant,
                    Some(match_centroids(&w[0].centroids, &w[1].centroids, dict)),
                ),
                (Some(a), Some(b)) if b < a => (TransitionKind::Drop, None),
                (Some(_), Some(_)) => (TransitionKind::JumpUp, None),
                _ => (TransitionKind::Unknown, None),
            };
            Transition {
                from: w[0].index,
                to: w[1].index,
                kind,
                max_centroid_distance: dist,
                discontinuous: dist.is_some_and(|d| d > c.continuity_tol),
            }
        })
        .collect();

    let mut regimes = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let Some(n) = rows[start].n_measures else {
            start += 1;
            continue;
        };
        let mut end = start;
        while end < transitions.len() && transitions[end].kind == TransitionKind::Constant {
            end += 1;
        }
        let max_d = transitions[start..end]
            .iter()
            .filter_map(|t| t.max_centroid_distance)
            .fold(0.0, f64::max);
        regimes.push(Regime {
            first: rows[start].index,
            last: rows[end].index,
            alpha_from: rows[start].alpha,
            alpha_to: rows[end].alpha,
            n_measures: n,
            max_centroid_distance: max_d,
            continuous: max_d <= c.continuity_tol,
        });
        start = end + 1;
    }

    let flagged_rows = rows
        .iter()
        .filter(|r| r.error.is_some() || r.unresolved_fraction.is_some_and(|u| u > c.unresolved_threshold))
        .map(|r| r.index)
        .collect();
    let pick = |k: TransitionKind| {
        transitions
            .iter()
            .filter(|t| t.kind == k)
            .map(|t| t.from)
            .collect::<Vec<_>>()
    };
    let n_constant = transitions.iter().all(|t| t.kind == TransitionKind::Constant);
    let max_adjacent_distance = transitions
        .iter()
        .filter_map(|t| t.max_centroid_distance)
        .reduce(f64::max);
    SweepResult {
        drops: pick(TransitionKind::Drop),
        jumps_up: pick(TransitionKind::JumpUp),
        flagged_rows,
        n_constant,
        max_adjacent_distance,
        regimes,
        transitions,
        rows,
    }
}

/// Runs every row in parallel, each to `rows_dir/row_XXXX.json`, and merges
/// the row files in index order.
pub fn stability_sweep(cfg: &ExperimentConfig, rows_dir: &Path) -> Result<SweepResult> {
    let dict = validate(&cfg.sweep)?;
    let alphas = alphas(&cfg.sweep);
    alphas
        .par_iter()
        .enumerate()
        .try_for_each(|(i, &alpha)| -> Result<()> {
            let row = sweep_row(cfg, i, alpha, &dict);
            write_atomic(&row_path(rows_dir, i), &to_json_bytes(&row)?)
        })?;
    let rows = (0..alphas.len())
        .map(|i| {
            let p = row_path(rows_dir, i);
            let text = std::fs::read(&p).with_context(|| format!("cannot read {}", p.display()))?;
            Ok(serde_json::from_slice::<SweepRow>(&text)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(analyze(rows, &cfg.sweep, &dict))
}

fn row_path(dir: &Path, i: usize) -> std::path::PathBuf {
    dir.join(format!("row_{i:04}.json"))
}

pub(crate) fn run(cfg: &ExperimentConfig, out: &Path, o: &mut Outcome) -> Result<()> {
    let rows_dir = out.join("sweep-rows");
    let result = stability_sweep(cfg, &rows_dir)?;
    for i in 0..result.rows.len() {
        o.files.push(row_path(&rows_dir, i));
    }
    let csv = out.join("sweep.csv");
    write_csv(
        &csv,
        &[
            "index",
            "alpha",
            "n_measures",
            "unresolved_fraction",
            "basin_fractions",
            "error",
        ],
        result.rows.iter().map(|r| {
            vec![
                Cell::from(r.index),
                Cell::F(r.alpha),
                Cell::from(r.n_measures),
                Cell::from(r.unresolved_fraction),
                Cell::S(
                    r.basin_fractions
                        .iter()
                        .map(|&f| crate::output::fmt_f64(f))
                        .collect::<Vec<_>>()
                        .join(";"),
                ),
                Cell::S(r.error.clone().unwrap_or_default()),
            ]
        }),
    )?;
    o.files.push(csv);
    let family = cfg.map.build()?;
    let path = out.join("sweep.json");
    write_json(
        &path,
        &Envelope {
            schema: SCHEMA,
            experiment: Experiment::Sweep.name(),
            seed: cfg.seed,
            map: Some(&family),
            params: &cfg.sweep,
            result: &result,
        },
    )?;
    o.files.push(path);
    for r in &result.rows {
        o.summary.push(match (&r.error, r.n_measures) {
            (Some(e), _) => format!("sweep: alpha={:.4} FAILED: {e}", r.alpha),
            (None, n) => format!(
                "sweep: alpha={:.4} N={} unresolved={:.4}",
                r.alpha,
                n.unwrap_or(0),
                r.unresolved_fraction.unwrap_or(f64::NAN)
            ),
        });
    }
    o.summary.push(format!(
        "sweep: N constant={} max adjacent centroid distance={} drops={:?} jumps_up={:?} flagged={:?}",
        result.n_constant,
        result
            .max_adjacent_distance
            .map_or("n/a".into(), |d| format!("{d:.3e}")),
        result.drops,
        result.jumps_up,
        result.flagged_rows
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(index: usize, alpha: f64, n: Option<usize>, shift: f64, unresolved: f64) -> SweepRow {
        let d = TestDictionary::new(2);
        let n_val = n.unwrap_or(0);
        SweepRow {
            index,
            alpha,
            n_measures: n,
            basin_fractions: vec![1.0 / n_val.max(1) as f64; n_val],
            unresolved_fraction: n.map(|_| unresolved),
            centroids: (0..n_val)
                .map(|k| {
                    let mut m = d.circle_moments(k as f64 / n_val.max(1) as f64);
                    m[1] += shift;
                    m
                })
                .collect(),
            error: n.is_none().then(|| "boom".to_owned()),
        }
    }

    fn cfg() -> SweepConfig {
        SweepConfig {
            continuity_tol: 0.05,
            unresolved_threshold: 0.1,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn grid_of_parameters_hits_both_ends() {
        let a = alphas(&SweepConfig::default());
        assert_eq!(a.len(), 9);
        assert_eq!(a[0], 0.2);
        assert_eq!(a[8], 0.6);
        assert!((a[4] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn drops_jumps_and_discontinuities_are_flagged() {
        let d = TestDictionary::new(2);
        let rows = vec![
            row(0, 0.1, Some(2), 0.0, 0.0),
            row(1, 0.2, Some(2), 0.01, 0.0),
            row(2, 0.3, Some(2), 0.5, 0.3),
            row(3, 0.4, Some(1), 0.0, 0.0),
            row(4, 0.5, None, 0.0, 0.0),
            row(5, 0.6, Some(3), 0.0, 0.0),
            row(6, 0.7, Some(4), 0.0, 0.0),
        ];
        let r = analyze(rows, &cfg(), &d);
        assert_eq!(r.drops, vec![2]);
        assert_eq!(r.jumps_up, vec![5]);
        assert_eq!(r.flagged_rows, vec![2, 4]);
        assert!(!r.n_constant);
        assert!(!r.transitions[0].discontinuous);
        assert!(r.transitions[1].discontinuous);
        assert_eq!(r.regimes.len(), 4);
        assert_eq!(
            (r.regimes[0].first, r.regimes[0].last, r.regimes[0].continuous),
            (0, 2, false)
        );
        assert_eq!((r.regimes[1].first, r.regimes[1].last), (3, 3));
    }

    #[test]
    fn matching_is_permutation_invariant() {
        let d = TestDictionary::new(2);
        let a = vec![d.circle_moments(0.0), d.circle_moments(1.0)];
        let b = vec![a[1].clone(), a[0].clone()];
        assert_eq!(match_centroids(&a, &b, &d), 0.0);
    }
}
