//! Datasets, model indexing and least-squares R² over the full model space.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{self, Backend};

/// Largest `m` for which the model space is enumerated.
pub const ENUMERATION_CAP: usize = 25;

/// Pivot tolerance of the Gram-matrix Cholesky factor, relative to the column's own norm².
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A response and covariates, all centered to mean zero.
///
/// Centering absorbs the intercept: with a flat prior on it the intercept can be
/// integrated out analytically, and the fit without intercept on centered data gives
/// the same R².
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    m: usize,
    y: Vec<f64>,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    response: String,
    low_dof: bool,
}

impl Dataset {
    /// Build a dataset from raw (uncentered) columns.
    pub fn from_columns(
        response: impl Into<String>,
        y: Vec<f64>,
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let response = response.into();
        let n = y.len();
        let m = columns.len();
        if n == 0 || m == 0 {
            return Err(Error::EmptyDataset);
        }
        if names.len() != m {
            return Err(Error::DimensionMismatch {
                left: names.len(),
                right: m,
            });
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                left: bad.len(),
                right: n,
            });
        }
        let y = center(y).ok_or_else(|| Error::ZeroVariance(response.clone()))?;
        let columns = columns
            .into_iter()
            .zip(&names)
            .map(|(c, name)| center(c).ok_or_else(|| Error::ZeroVariance(name.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            m,
            y,
            columns,
            names,
            response,
            low_dof: n <= m + 1,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn response_name(&self) -> &str {
        &self.response
    }

    /// Set when `n <= m + 1`; full-based scoring refuses such datasets.
    pub fn low_dof(&self) -> bool {
        self.low_dof
    }

    /// Re-center an already centered dataset. Kept public for the idempotence property.
    pub fn recentered(&self) -> Result<Self> {
        Self::from_columns(
            self.response.clone(),
            self.y.clone(),
            self.names.clone(),
            self.columns.clone(),
        )
    }

    /// Sufficient statistics `X'X`, `X'Y` and `Y'Y`.
    pub fn gram(&self) -> Gram {
        let m = self.m;
        let mut xtx = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let v = dot(&self.columns[i], &self.columns[j]);
                xtx[i * m + j] = v;
                xtx[j * m + i] = v;
            }
        }
        let xty = self.columns.iter().map(|c| dot(c, &self.y)).collect();
        Gram {
            m,
            xtx,
            xty,
            yty: dot(&self.y, &self.y),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Subtract the mean; `None` when nothing is left (a constant column).
fn center(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let raw_ss: f64 = v.iter().map(|x| x * x).sum();
    v.iter_mut().for_each(|x| *x -= mean);
    // a second pass removes the rounding residue of the first mean
    let residue = v.iter().sum::<f64>() / n;
    v.iter_mut().for_each(|x| *x -= residue);
    let ss: f64 = v.iter().map(|x| x * x).sum();
    if ss <= 1e-24 * raw_ss.max(f64::MIN_POSITIVE) || ss == 0.0 {
        None
    } else {
        Some(v)
    }
}

/// Load a header-first, comma-separated numeric file.
///
/// Every column other than `response` becomes a covariate, in file order.
pub fn load_csv(path: impl AsRef<Path>, response: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, response)
}

pub fn read_csv<R: std::io::Read>(reader: R, response: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let response_idx = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::MissingColumn(response.to_owned()))?;

    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = i + 2;
        if record.len() != headers.len() {
            return Err(Error::invalid(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: headers[j].clone(),
                value: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    row,
                    column: headers[j].clone(),
                    value: cell.to_owned(),
                });
            }
            cols[j].push(v);
        }
    }
    let y = cols.remove(response_idx);
    let mut names = headers;
    names.remove(response_idx);
    Dataset::from_columns(response, y, names, cols)
}

/// Bitmask over the candidate variables: bit `i` set means variable `i` is in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub u64);

impl ModelId {
    pub const NULL: ModelId = ModelId(0);

    pub fn full(m: usize) -> Self {
        ModelId(full_mask(m))
    }

    pub fn from_vars(vars: impl IntoIterator<Item = usize>) -> Self {
        ModelId(vars.into_iter().fold(0, |acc, i| acc | (1u64 << i)))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, var: usize) -> bool {
        self.0 >> var & 1 == 1
    }

    pub fn is_subset_of(self, other: ModelId) -> bool {
        self.0 & !other.0 == 0
    }

    /// Included variables in ascending order.
    pub fn vars(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

pub(crate) fn full_mask(m: usize) -> u64 {
    if m >= 64 {
        u64::MAX
    } else {
        (1u64 << m) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub model: ModelId,
    pub k: usize,
    pub r2: f64,
}

/// `X'X`, `X'Y`, `Y'Y` of a centered dataset.
#[derive(Debug, Clone)]
pub struct Gram {
    m: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
}

impl Gram {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.xtx[i * self.m + j]
    }
}

/// Cholesky factor of a Gram submatrix that grows and shrinks one variable at a time,
/// carrying the forward-solved `L⁻¹ X'Y` so the regression sum of squares of every
/// prefix is available for free.
struct GrowingFactor<'g> {
    gram: &'g Gram,
    order: Vec<usize>,
    // row r of L at offset r * m, columns 0..=r
    rows: Vec<f64>,
    z: Vec<f64>,
    ssr: Vec<f64>,
}

impl<'g> GrowingFactor<'g> {
    fn new(gram: &'g Gram) -> Self {
        let m = gram.m;
        Self {
            gram,
            order: Vec::with_capacity(m),
            rows: vec![0.0; m * m],
            z: Vec::with_capacity(m),
            ssr: Vec::with_capacity(m),
        }
    }

    fn ssr(&self) -> f64 {
        self.ssr.last().copied().unwrap_or(0.0)
    }

    /// Append variable `j`; `false` when the extended submatrix is numerically singular.
    fn push(&mut self, j: usize) -> bool {
        let m = self.gram.m;
        let r = self.order.len();
        let mut norm2 = 0.0;
        let mut proj = 0.0;
        for i in 0..r {
            let mut v = self.gram.at(j, self.order[i]);
            for t in 0..i {
                v -= self.rows[r * m + t] * self.rows[i * m + t];
            }
            v /= self.rows[i * m + i];
            self.rows[r * m + i] = v;
            norm2 += v * v;
            proj += v * self.z[i];
        }
        let djj = self.gram.at(j, j);
        let d2 = djj - norm2;
        if !(d2 > RANK_TOLERANCE * djj) {
            return false;
        }
        let d = d2.sqrt();
        self.rows[r * m + r] = d;
        let zr = (self.gram.xty[j] - proj) / d;
        self.order.push(j);
        self.z.push(zr);
        let prev = self.ssr();
        self.ssr.push(prev + zr * zr);
        true
    }

    fn pop(&mut self) {
        self.order.pop();
        self.z.pop();
        self.ssr.pop();
    }
}

fn r2_from_ssr(ssr: f64, sst: f64) -> f64 {
    (ssr / sst).clamp(0.0, 1.0)
}

/// Coefficient of determination `1 - SSE/SST` of one submodel.
pub fn r_squared(ds: &Dataset, model: ModelId) -> Result<RegressionSummary> {
    check_model(ds, model)?;
    let gram = ds.gram();
    let mut factor = GrowingFactor::new(&gram);
    for j in model.vars() {
        if !factor.push(j) {
            return Err(Error::RankDeficient { bits: model.0 });
        }
    }
    Ok(RegressionSummary {
        model,
        k: model.size(),
        r2: r2_from_ssr(factor.ssr(), gram.yty),
    })
}

fn check_model(ds: &Dataset, model: ModelId) -> Result<()> {
    if model.0 & !full_mask(ds.m) != 0 {
        return Err(Error::invalid(format!(
            "model {model} has bits beyond m = {}",
            ds.m
        )));
    }
    Ok(())
}

/// R² for all `2^m` models, ordered by ascending bitmask.
pub fn enumerate_scores(ds: &Dataset) -> Result<Vec<RegressionSummary>> {
    enumerate_scores_with(ds, Backend::default())
}

pub fn enumerate_scores_with(ds: &Dataset, backend: Backend) -> Result<Vec<RegressionSummary>> {
    let r2 = enumerate_r2(ds, backend)?;
    Ok(r2
        .into_iter()
        .enumerate()
        .map(|(bits, r2)| {
            let model = ModelId(bits as u64);
            RegressionSummary {
                model,
                k: model.size(),
                r2,
            }
        })
        .collect())
}

/// R² vector indexed by bitmask.
///
/// The model space is split by the pattern of the top variables: each chunk of
/// consecutive bitmasks shares those variables, which are factored first, and the
/// remaining low variables are appended depth-first so each model costs one row of
/// Cholesky update instead of a full solve.
pub fn enumerate_r2(ds: &Dataset, backend: Backend) -> Result<Vec<f64>> {
    let m = ds.m;
    if m > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            m,
            cap: ENUMERATION_CAP,
        });
    }
    let gram = ds.gram();
    let high = m.saturating_sub(10).min(8);
    let low = m - high;
    let mut out = vec![f64::NAN; 1usize << m];

    parallel::for_each_chunk(backend, &mut out, 1usize << low, |chunk_idx, chunk| {
        let mut factor = GrowingFactor::new(&gram);
        for h in 0..high {
            if chunk_idx >> h & 1 == 1 && !factor.push(low + h) {
                // whole chunk contains the singular prefix; leave NaN
                return;
            }
        }
        fill_subtree(&mut factor, chunk, 0, 0, low, gram.yty);
    });

    if let Some(bits) = out.iter().position(|v| v.is_nan()) {
        return Err(Error::RankDeficient { bits: bits as u64 });
    }
    Ok(out)
}

fn fill_subtree(
    factor: &mut GrowingFactor<'_>,
    chunk: &mut [f64],
    mask: usize,
    start: usize,
    low: usize,
    sst: f64,
) {
    chunk[mask] = r2_from_ssr(factor.ssr(), sst);
    for j in start..low {
        if factor.push(j) {
            fill_subtree(factor, chunk, mask | 1 << j, j + 1, low, sst);
            factor.pop();
        }
    }
}
