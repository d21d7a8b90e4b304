//! Cross-validated grid search. Scores are lower-is-better.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::{rng_from_seed, Error, Result};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` and deals indices round-robin into `k` test folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 || n < k {
        return Err(Error::TooFewDocuments { docs: n, folds: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut tests = vec![Vec::with_capacity(n / k + 1); k];
    for (i, d) in order.into_iter().enumerate() {
        tests[i % k].push(d);
    }
    Ok(tests
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let mut test = test.clone();
            test.sort_unstable();
            let train = tests.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, t)| t.iter().copied());
            let mut train: Vec<usize> = train.collect();
            train.sort_unstable();
            Fold { train, test }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<GridAxis>,
}

/// One point of the grid: a value per axis, in axis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl Cell {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

impl Grid {
    pub fn new(axes: Vec<(&str, Vec<f64>)>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|(_, v)| v.is_empty()) {
            return Err(Error::InvalidConfig("grid axes must be nonempty".into()));
        }
        Ok(Self { axes: axes.into_iter().map(|(n, values)| GridAxis { name: n.to_string(), values }).collect() })
    }

    pub fn names(&self) -> Vec<String> {
        self.axes.iter().map(|a| a.name.clone()).collect()
    }

    /// Cartesian product, first axis varying slowest.
    pub fn cells(&self) -> Vec<Cell> {
        let names = self.names();
        let mut cells = vec![Vec::new()];
        for axis in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix: Vec<f64>| {
                    axis.values.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        cells.into_iter().map(|values| Cell { names: names.clone(), values }).collect()
    }
}

pub fn dmm_default_grid() -> Grid {
    Grid::new(vec![("alpha", vec![0.01, 0.025, 0.05, 0.1, 0.2]), ("beta", vec![0.06, 0.1, 0.24])])
        .expect("nonempty axes")
}

pub fn lda_default_grid() -> Grid {
    Grid::new(vec![("kappa", vec![0.6, 0.75, 0.9]), ("tau0", vec![1.0, 64.0, 256.0])]).expect("nonempty axes")
}

/// K = 5, 10, …, 50.
pub fn default_k_values() -> Vec<usize> {
    (1..=10).map(|i| 5 * i).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub axis_names: Vec<String>,
    pub cells: Vec<CellResult>,
    /// Index into `cells` of the lowest mean; the earliest on ties.
    pub best: usize,
    pub folds: usize,
    pub seed: u64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl GridResult {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }

    /// Rows `K,<axes>,fold,score` with `mean` and `std` summary rows per cell.
    pub fn write_csv<W: Write>(&self, mut w: W, k: usize, header: bool) -> Result<()> {
        if header {
            writeln!(w, "K,{},fold,score", self.axis_names.join(","))?;
        }
        for c in &self.cells {
            let params: Vec<String> = c.cell.values.iter().map(f64::to_string).collect();
            let params = params.join(",");
            for (f, s) in c.fold_scores.iter().enumerate() {
                writeln!(w, "{k},{params},{f},{s}")?;
            }
            writeln!(w, "{k},{params},mean,{}", c.mean)?;
            writeln!(w, "{k},{params},std,{}", c.std)?;
        }
        Ok(())
    }
}

/// Trains every cell on every training fold and scores it on the matching
/// test fold. Work runs in parallel; results are assembled in grid order, and
/// the first failure in that order is returned.
pub fn grid_search<M, T, S>(
    trainer: T,
    scorer: S,
    corpus: &Corpus,
    grid: &Grid,
    folds: usize,
    seed: u64,
) -> Result<GridResult>
where
    T: Fn(&Corpus, &Cell) -> Result<M> + Sync,
    S: Fn(&M, &[Document]) -> Result<f64> + Sync,
{
    let splits = kfold_split(corpus.num_docs(), folds, seed)?;
    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..folds).map(move |f| (c, f))).collect();
    let scores: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let split = &splits[f];
            let run = || {
                let model = trainer(&corpus.subset(&split.train), &cells[c])?;
                let test: Vec<Document> = split.test.iter().map(|&i| corpus.docs()[i].clone()).collect();
                scorer(&model, &test)
            };
            run().map_err(|e| Error::Grid { cell: c, fold: f, source: Box::new(e) })
        })
        .collect();
    let mut results = Vec::with_capacity(cells.len());
    let mut iter = scores.into_iter();
    for cell in cells {
        let fold_scores = iter.by_ref().take(folds).collect::<Result<Vec<f64>>>()?;
        let (mean, std) = mean_std(&fold_scores);
        results.push(CellResult { cell, fold_scores, mean, std });
    }
    let best = results.iter().enumerate().fold(0, |b, (i, r)| if r.mean < results[b].mean { i } else { b });
    Ok(GridResult { axis_names: grid.names(), cells: results, best, folds, seed })
}
