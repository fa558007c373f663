//! Physical-measure extraction from Birkhoff averages on a grid of initial
//! conditions, basin maps and the intermingling statistic.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::dictionary::{OrbitAccumulator, TestDictionary};
use super::empirical::{birkhoff_moments_with, EmpiricalMeasure};
use crate::dynamics::{Point, SkewProductMap};
use crate::error::{invalid, Result};
use crate::seed::{self, stream};

/// A `size × size` grid of initial conditions covering the trapping region,
/// one point per cell, jittered inside its cell from `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub size: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(size: usize, seed: u64) -> Self {
        Self { size, seed }
    }

    pub fn len(&self) -> usize {
        self.size * self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Point of cell `(i, j)`: `i` indexes `θ`, `j` indexes `t`.
    pub fn point(&self, map: &SkewProductMap, i: usize, j: usize) -> Point {
        let g = self.size as f64;
        let mut rng = seed::derived_rng(self.seed, stream::GRID_JITTER, (i * self.size + j) as u64);
        let (u, v): (f64, f64) = (rng.gen(), rng.gen());
        let height = map.space().fiber_length();
        Point::new((i as f64 + u) / g, (j as f64 + v) / g * height)
    }

    /// All points in row-major order (`index = i·size + j`).
    pub fn points(&self, map: &SkewProductMap) -> Vec<Point> {
        (0..self.len())
            .map(|k| self.point(map, k / self.size, k % self.size))
            .collect()
    }
}

/// Outcome of one orbit of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSample {
    pub index: usize,
    pub start: Point,
    /// Moments at the full horizon.
    pub moments: Vec<f64>,
    /// Distance between the moments at `n` and at `n/2`.
    pub drift: f64,
    pub lambda_hat: f64,
}

/// Birkhoff moments of every grid orbit, in grid order.
pub fn sample_grid(map: &SkewProductMap, grid: &GridSpec, n: usize, dict: &TestDictionary) -> Result<Vec<GridSample>> {
    if grid.is_empty() {
        return Err(invalid("grid", "grid must have at least one point"));
    }
    if n < 2 {
        return Err(invalid("n", "horizon must be at least 2"));
    }
    let points = grid.points(map);
    points
        .par_iter()
        .enumerate()
        .map_init(
            || OrbitAccumulator::new(dict),
            |acc, (index, &start)| {
                let b = birkhoff_moments_with(map, start, n, dict, acc)?;
                Ok(GridSample {
                    index,
                    start,
                    drift: dict.distance(&b.full, &b.half),
                    moments: b.full,
                    lambda_hat: b.lambda_hat,
                })
            },
        )
        .collect()
}

/// Knobs of an extraction run, echoed into the report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtractParams {
    pub n: usize,
    pub grid: GridSpec,
    pub tol_conv: f64,
    pub delta_cluster: f64,
    pub degree: usize,
}

/// Centroids of the clusters of converged Birkhoff averages with their basin
/// fractions. `counts` and `unresolved_count` partition the grid exactly.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhysicalMeasureReport {
    pub measures: Vec<EmpiricalMeasure>,
    pub counts: Vec<usize>,
    pub basin_fractions: Vec<f64>,
    pub unresolved_count: usize,
    pub unresolved_fraction: f64,
    pub params: ExtractParams,
}

impl PhysicalMeasureReport {
    pub fn n_measures(&self) -> usize {
        self.measures.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.unresolved_count
    }

    /// Index of the centroid nearest to `moments`.
    pub fn nearest(&self, moments: &[f64], dict: &TestDictionary) -> Option<(usize, f64)> {
        self.measures
            .iter()
            .enumerate()
            .map(|(i, m)| (i, dict.distance(m.moments(), moments)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Label of a sample: nearest centroid when converged, else `None`.
    pub fn label(&self, sample: &GridSample, dict: &TestDictionary) -> Option<usize> {
        if sample.drift <= self.params.tol_conv {
            self.nearest(&sample.moments, dict).map(|(i, _)| i)
        } else {
            None
        }
    }
}

/// Runs the grid and clusters the converged averages.
pub fn extract_physical_measures(
    map: &SkewProductMap,
    grid: &GridSpec,
    n: usize,
    tol_conv: f64,
    delta_cluster: f64,
    dict: &TestDictionary,
) -> Result<PhysicalMeasureReport> {
    let samples = sample_grid(map, grid, n, dict)?;
    let params = ExtractParams {
        n,
        grid: *grid,
        tol_conv,
        delta_cluster,
        degree: dict.max_degree(),
    };
    cluster_samples(&samples, params, dict)
}

/// Clustering step of [`extract_physical_measures`] on precomputed samples.
///
/// Converged samples are visited in lexicographic order of their starting
/// points and joined to the first cluster whose seed (first member) lies
/// within `delta_cluster`, or open a new one. Clusters whose centroids are
/// within `delta_cluster` are then merged until the centroids are pairwise
/// separated. Finally every converged sample is counted for its nearest
/// centroid, so the fractions agree with [`basin_labels`].
pub fn cluster_samples(
    samples: &[GridSample],
    params: ExtractParams,
    dict: &TestDictionary,
) -> Result<PhysicalMeasureReport> {
    if !(params.tol_conv >= 0.0 && params.delta_cluster > 0.0) {
        return Err(invalid("tolerances", "need tol_conv ≥ 0 and delta_cluster > 0"));
    }
    if samples.is_empty() {
        return Err(invalid("samples", "no grid samples"));
    }
    let mut converged: Vec<&GridSample> = samples.iter().filter(|s| s.drift <= params.tol_conv).collect();
    converged.sort_by(|a, b| {
        a.start
            .theta
            .total_cmp(&b.start.theta)
            .then(a.start.t.total_cmp(&b.start.t))
            .then(a.index.cmp(&b.index))
    });

    // (seed moments, member sum, member count)
    let mut clusters: Vec<(Vec<f64>, Vec<f64>, usize)> = Vec::new();
    for s in &converged {
        match clusters
            .iter_mut()
            .find(|c| dict.distance(&c.0, &s.moments) <= params.delta_cluster)
        {
            Some(c) => {
                c.1.iter_mut().zip(&s.moments).for_each(|(a, b)| *a += b);
                c.2 += 1;
            }
            None => clusters.push((s.moments.clone(), s.moments.clone(), 1)),
        }
    }
    let mut groups: Vec<(Vec<f64>, usize)> = clusters.into_iter().map(|(_, sum, k)| (sum, k)).collect();
    let centroid = |g: &(Vec<f64>, usize)| g.0.iter().map(|v| v / g.1 as f64).collect::<Vec<f64>>();
    loop {
        let cs: Vec<Vec<f64>> = groups.iter().map(centroid).collect();
        let close = (0..cs.len())
            .flat_map(|i| (i + 1..cs.len()).map(move |j| (i, j)))
            .find(|&(i, j)| dict.distance(&cs[i], &cs[j]) <= params.delta_cluster);
        let Some((i, j)) = close else { break };
        let (sum, k) = groups.remove(j);
        groups[i].0.iter_mut().zip(&sum).for_each(|(a, b)| *a += b);
        groups[i].1 += k;
    }
    let measures = groups
        .iter()
        .map(|g| EmpiricalMeasure::from_moments(centroid(g), dict))
        .collect::<Result<Vec<_>>>()?;

    let mut report = PhysicalMeasureReport {
        counts: vec![0; measures.len()],
        measures,
        basin_fractions: Vec::new(),
        unresolved_count: samples.len() - converged.len(),
        unresolved_fraction: 0.0,
        params,
    };
    for s in &converged {
        if let Some((i, _)) = report.nearest(&s.moments, dict) {
            report.counts[i] += 1;
        }
    }
    let total = samples.len() as f64;
    report.basin_fractions = report.counts.iter().map(|&c| c as f64 / total).collect();
    report.unresolved_fraction = report.unresolved_count as f64 / total;
    Ok(report)
}

/// One row of a basin map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BasinCell {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    pub t: f64,
    /// `None` for unresolved points.
    pub label: Option<usize>,
    pub lambda_hat: f64,
    pub converged: bool,
}

/// Labels on the `size × size` grid, row-major in `(i, j)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasinMap {
    pub size: usize,
    pub cells: Vec<BasinCell>,
}

impl BasinMap {
    pub fn cell(&self, i: usize, j: usize) -> &BasinCell {
        &self.cells[i * self.size + j]
    }
}

/// Labels precomputed samples against a report.
pub fn basin_labels(
    samples: &[GridSample],
    grid: &GridSpec,
    report: &PhysicalMeasureReport,
    dict: &TestDictionary,
) -> BasinMap {
    let mut cells: Vec<BasinCell> = samples
        .iter()
        .map(|s| BasinCell {
            i: s.index / grid.size,
            j: s.index % grid.size,
            theta: s.start.theta,
            t: s.start.t,
            label: report.label(s, dict),
            lambda_hat: s.lambda_hat,
            converged: s.drift <= report.params.tol_conv,
        })
        .collect();
    cells.sort_by_key(|c| (c.i, c.j));
    BasinMap { size: grid.size, cells }
}

/// Re-runs the grid at the report's horizon and labels every point.
pub fn basin_map(
    map: &SkewProductMap,
    grid: &GridSpec,
    report: &PhysicalMeasureReport,
    dict: &TestDictionary,
) -> Result<BasinMap> {
    if report.measures.is_empty() {
        return Err(crate::error::Error::EmptyReport);
    }
    let samples = sample_grid(map, grid, report.params.n, dict)?;
    Ok(basin_labels(&samples, grid, report, dict))
}

/// Share of `block × block` sub-squares of the basin map carrying at least
/// two distinct labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntermingleReport {
    pub block: usize,
    pub blocks: usize,
    pub mixed: usize,
    pub fraction: f64,
}

pub fn intermingling(basins: &BasinMap, block: usize) -> Result<IntermingleReport> {
    if block == 0 || block > basins.size {
        return Err(invalid("block", format!("need 1 ≤ block ≤ {}", basins.size)));
    }
    let per_side = basins.size / block;
    let mut mixed = 0;
    for bi in 0..per_side {
        for bj in 0..per_side {
            let mut first: Option<usize> = None;
            let mut two = false;
            'scan: for i in bi * block..(bi + 1) * block {
                for j in bj * block..(bj + 1) * block {
                    if let Some(l) = basins.cell(i, j).label {
                        match first {
                            None => first = Some(l),
                            Some(f) if f != l => {
                                two = true;
                                break 'scan;
                            }
                            _ => {}
                        }
                    }
                }
            }
            mixed += usize::from(two);
        }
    }
    let blocks = per_side * per_side;
    Ok(IntermingleReport {
        block,
        blocks,
        mixed,
        fraction: mixed as f64 / blocks as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(index: usize, start: Point, moments: Vec<f64>, drift: f64) -> GridSample {
        GridSample {
            index,
            start,
            moments,
            drift,
            lambda_hat: 0.0,
        }
    }

    fn params(tol: f64, delta: f64) -> ExtractParams {
        ExtractParams {
            n: 2,
            grid: GridSpec::new(2, 0),
            tol_conv: tol,
            delta_cluster: delta,
            degree: 1,
        }
    }

    #[test]
    fn grid_is_jittered_inside_cells() {
        let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
        let g = GridSpec::new(7, 3);
        for (k, p) in g.points(&f).iter().enumerate() {
            let (i, j) = (k / 7, k % 7);
            assert!(p.theta >= i as f64 / 7.0 && p.theta < (i + 1) as f64 / 7.0);
            assert!(p.t >= j as f64 / 7.0 && p.t < (j + 1) as f64 / 7.0);
        }
        assert_eq!(g.points(&f), g.points(&f));
        assert_ne!(g.points(&f), GridSpec::new(7, 4).points(&f));
        let torus = f.torus_double().unwrap();
        assert!(g.points(&torus).iter().any(|p| p.t > 1.0));
    }

    #[test]
    fn clustering_is_order_free_and_partitions_the_grid() {
        let d = TestDictionary::new(1);
        let a = d.circle_moments(0.0);
        let b = d.circle_moments(1.0);
        let mut s = vec![
            sample(0, Point::new(0.1, 0.1), a.clone(), 0.0),
            sample(1, Point::new(0.1, 0.9), b.clone(), 0.0),
            sample(2, Point::new(0.6, 0.1), a.clone(), 0.001),
            sample(3, Point::new(0.6, 0.9), b.clone(), 0.5),
        ];
        let r = cluster_samples(&s, params(0.01, 0.2), &d).unwrap();
        assert_eq!(r.n_measures(), 2);
        assert_eq!(r.counts, vec![2, 1]);
        assert_eq!(r.unresolved_count, 1);
        assert_eq!(r.total(), 4);
        assert_eq!(r.basin_fractions.iter().sum::<f64>() + r.unresolved_fraction, 1.0);
        s.reverse();
        assert_eq!(cluster_samples(&s, params(0.01, 0.2), &d).unwrap(), r);
    }

    #[test]
    fn close_centroids_are_merged() {
        let d = TestDictionary::new(1);
        let base = d.circle_moments(0.0);
        // moment 1 has weight ½, so a shift e is at distance e/√2
        let shifted = |e: f64| {
            let mut m = base.clone();
            m[1] += e;
            m
        };
        // the third seed is too far from the first, but the two centroids are close
        let s = vec![
            sample(0, Point::new(0.1, 0.0), shifted(0.0), 0.0),
            sample(1, Point::new(0.2, 0.0), shifted(0.28), 0.0),
            sample(2, Point::new(0.3, 0.0), shifted(0.30), 0.0),
        ];
        let r = cluster_samples(&s, params(0.1, 0.2), &d).unwrap();
        assert_eq!(r.n_measures(), 1);
        assert_eq!(r.counts, vec![3]);
        let cs = r.measures[0].moments();
        assert!((cs[1] - base[1] - 0.58 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn intermingling_counts_mixed_blocks() {
        let cells = (0..16)
            .map(|k| BasinCell {
                i: k / 4,
                j: k % 4,
                theta: 0.0,
                t: 0.0,
                // top-left block mixed, others single-label or unresolved
                label: match (k / 4, k % 4) {
                    (0, 0) => Some(1),
                    (i, j) if i < 2 && j < 2 => Some(0),
                    (i, _) if i >= 2 => None,
                    _ => Some(0),
                },
                lambda_hat: 0.0,
                converged: true,
            })
            .collect();
        let m = BasinMap { size: 4, cells };
        let r = intermingling(&m, 2).unwrap();
        assert_eq!((r.blocks, r.mixed), (4, 1));
        assert!(intermingling(&m, 5).is_err());
    }
}
