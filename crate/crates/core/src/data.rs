//! Ragged multivariate count data and the long-format CSV schema
//! `individual,time,series,count` (time and series are 1-based).

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of one individual, stored time-major: `counts[t * K + k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesCounts {
    pub id: String,
    k_series: usize,
    counts: Vec<u64>,
}

impl SeriesCounts {
    pub fn new(id: impl Into<String>, k_series: usize, counts: Vec<u64>) -> Result<Self> {
        if k_series == 0 || !counts.len().is_multiple_of(k_series) {
            return Err(Error::Config(format!(
                "{} counts do not split into {k_series} series",
                counts.len()
            )));
        }
        Ok(Self { id: id.into(), k_series, counts })
    }

    /// Build from per-series rows (`rows[k][t]`).
    pub fn from_series(id: impl Into<String>, rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        let t_len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t_len) {
            return Err(Error::Config("series of unequal length".into()));
        }
        let mut counts = Vec::with_capacity(k * t_len);
        for t in 0..t_len {
            counts.extend(rows.iter().map(|r| r[t]));
        }
        Self::new(id, k, counts)
    }

    #[inline]
    pub fn t_len(&self) -> usize {
        self.counts.len() / self.k_series
    }

    #[inline]
    pub fn k_series(&self) -> usize {
        self.k_series
    }

    /// The `K` counts observed at time `t` (0-based).
    #[inline]
    pub fn at(&self, t: usize) -> &[u64] {
        &self.counts[t * self.k_series..(t + 1) * self.k_series]
    }

    #[inline]
    pub fn get(&self, k: usize, t: usize) -> u64 {
        self.counts[t * self.k_series + k]
    }

    pub fn series(&self, k: usize) -> Vec<u64> {
        (0..self.t_len()).map(|t| self.get(k, t)).collect()
    }
}

/// Count series of `N` individuals sharing `K` variables; lengths may differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSet {
    k_series: usize,
    individuals: Vec<SeriesCounts>,
}

impl ObservationSet {
    pub fn new(individuals: Vec<SeriesCounts>) -> Result<Self> {
        let k_series = individuals
            .first()
            .map(SeriesCounts::k_series)
            .ok_or_else(|| Error::Config("observation set is empty".into()))?;
        if individuals.iter().any(|s| s.k_series() != k_series) {
            return Err(Error::Config("individuals disagree on the number of series".into()));
        }
        Ok(Self { k_series, individuals })
    }

    pub fn k_series(&self) -> usize {
        self.k_series
    }

    pub fn n_individuals(&self) -> usize {
        self.individuals.len()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.individuals.iter().map(SeriesCounts::t_len).collect()
    }

    pub fn individuals(&self) -> &[SeriesCounts] {
        &self.individuals
    }

    pub fn individual(&self, n: usize) -> &SeriesCounts {
        &self.individuals[n]
    }

    /// Mean count of each series over all individuals and occasions.
    pub fn series_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.k_series];
        let mut total = 0usize;
        for ind in &self.individuals {
            for t in 0..ind.t_len() {
                for (s, &q) in sums.iter_mut().zip(ind.at(t)) {
                    *s += q as f64;
                }
            }
            total += ind.t_len();
        }
        sums.into_iter().map(|s| s / total as f64).collect()
    }

    /// Write the long-format CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["individual", "time", "series", "count"])?;
        for ind in &self.individuals {
            for t in 0..ind.t_len() {
                for k in 0..self.k_series {
                    wtr.write_record([
                        ind.id.clone(),
                        (t + 1).to_string(),
                        (k + 1).to_string(),
                        ind.get(k, t).to_string(),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parse and validate the long-format CSV.
    ///
    /// Rows may come in any order. Every individual must cover times `1..=T_n`
    /// contiguously for every series. `expected_series`, when given, rejects
    /// series ids above it.
    pub fn read_csv<R: Read>(r: R, expected_series: Option<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        let want = ["individual", "time", "series", "count"];
        if headers.len() != 4 || headers.iter().zip(want).any(|(h, w)| h != w) {
            return Err(Error::Data {
                row: 1,
                msg: format!("header must be `individual,time,series,count`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }

        let mut order: Vec<String> = Vec::new();
        let mut cells: HashMap<String, HashMap<(usize, usize), u64>> = HashMap::new();
        let mut max_series = 0usize;
        for (i, rec) in rdr.records().enumerate() {
            // header is line 1
            let row = i + 2;
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::Data { row, msg: format!("expected 4 fields, got {}", rec.len()) });
            }
            let id = rec[0].to_string();
            if id.is_empty() {
                return Err(Error::Data { row, msg: "empty individual id".into() });
            }
            let time: usize = parse_field(&rec[1], row, "time")?;
            let series: usize = parse_field(&rec[2], row, "series")?;
            let count: i64 = rec[3]
                .parse()
                .map_err(|_| Error::Data { row, msg: format!("count `{}` is not an integer", &rec[3]) })?;
            if count < 0 {
                return Err(Error::Data { row, msg: format!("negative count {count}") });
            }
            if time == 0 {
                return Err(Error::Data { row, msg: "time indices are 1-based".into() });
            }
            if series == 0 || expected_series.is_some_and(|k| series > k) {
                return Err(Error::Data { row, msg: format!("unknown series id {series}") });
            }
            max_series = max_series.max(series);
            let entry = cells.entry(id.clone()).or_insert_with(|| {
                order.push(id.clone());
                HashMap::new()
            });
            if entry.insert((time, series), count as u64).is_some() {
                return Err(Error::Data { row, msg: format!("duplicate entry for {id} time {time} series {series}") });
            }
        }
        if order.is_empty() {
            return Err(Error::Data { row: 1, msg: "no observations".into() });
        }
        let k_series = expected_series.unwrap_or(max_series);

        let mut individuals = Vec::with_capacity(order.len());
        for id in order {
            let map = &cells[&id];
            let t_len = map.keys().map(|&(t, _)| t).max().unwrap_or(0);
            let mut counts = Vec::with_capacity(t_len * k_series);
            for t in 1..=t_len {
                for k in 1..=k_series {
                    let q = map.get(&(t, k)).ok_or_else(|| Error::Data {
                        row: 0,
                        msg: format!("individual {id}: missing time {t} for series {k} (times must be contiguous)"),
                    })?;
                    counts.push(*q);
                }
            }
            individuals.push(SeriesCounts::new(id, k_series, counts)?);
        }
        Self::new(individuals)
    }
}

fn parse_field(s: &str, row: usize, what: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Data { row, msg: format!("{what} `{s}` is not a non-negative integer") })
}
