//! Driver profiles: per-driver proportions of day clusters, grouped by a
//! Gaussian mixture.
//!
//! Frequency rows lie on the simplex, so the mixture is fitted on the first
//! C-1 columns (the last one is implied). Means are reported with all C
//! columns.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cluster::metrics::silhouette;
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::gmm::{self, EmOptions, GaussianMixture};

const ROW_SUM_TOL: f64 = 1e-9;

/// One clustered day of one driver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayAssignment {
    pub driver: String,
    pub week: u32,
    pub day: u32,
    /// Day category, e.g. "legal:3".
    pub category: String,
    pub legal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub drivers: Vec<String>,
    pub day_categories: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TableWarnings {
    pub dropped_drivers: Vec<String>,
}

impl FrequencyTable {
    /// Shape and simplex checks, plus the two categories a mixture fit needs.
    pub fn validate(&self) -> Result<()> {
        self.validate_rows()?;
        if self.day_categories.len() < 2 {
            return Err(Error::invalid(
                "frequency table needs at least 2 day categories",
            ));
        }
        Ok(())
    }

    /// Every row has one non-negative value per category and sums to 1.
    pub fn validate_rows(&self) -> Result<()> {
        if self.drivers.is_empty() {
            return Err(Error::invalid("frequency table has no drivers"));
        }
        if self.values.len() != self.drivers.len() {
            return Err(Error::invalid("frequency table rows do not match drivers"));
        }
        for (d, row) in self.drivers.iter().zip(&self.values) {
            if row.len() != self.day_categories.len() {
                return Err(Error::invalid(format!(
                    "row of {d} has {} values",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!(
                    "row of {d} has a negative or non-finite value"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("row of {d} sums to {s}, not 1")));
            }
        }
        Ok(())
    }

    /// Rows without the last column, which the others determine.
    fn reduced(&self) -> DMatrix<f64> {
        let c = self.day_categories.len() - 1;
        DMatrix::from_fn(self.drivers.len(), c, |i, j| self.values[i][j])
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["driver".to_owned()];
        header.extend(self.day_categories.iter().cloned());
        w.write_record(&header)?;
        for (d, row) in self.drivers.iter().zip(&self.values) {
            let mut rec = vec![d.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = r.headers()?.clone();
        let day_categories: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut drivers = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            drivers.push(rec.get(0).unwrap_or_default().to_owned());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        Error::validation(Some(i + 1), None, format!("bad value '{v}'"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
        }
        let t = FrequencyTable {
            drivers,
            day_categories,
            values,
        };
        t.validate()?;
        Ok(t)
    }
}

/// Proportions of day categories per driver. Illegal days are left out unless
/// `include_illegal`; drivers left with no days are dropped and reported.
pub fn build_frequency_table(
    days: &[DayAssignment],
    include_illegal: bool,
) -> Result<(FrequencyTable, TableWarnings)> {
    if days.is_empty() {
        return Err(Error::invalid("no day assignments to count"));
    }
    let counted = |d: &&DayAssignment| d.legal || include_illegal;
    let mut categories: Vec<String> = days
        .iter()
        .filter(counted)
        .map(|d| d.category.clone())
        .collect();
    categories.sort_unstable();
    categories.dedup();
    let mut counts: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for d in days {
        let row = counts
            .entry(&d.driver)
            .or_insert_with(|| vec![0; categories.len()]);
        if counted(&d) {
            let j = categories
                .binary_search(&d.category)
                .expect("known category");
            row[j] += 1;
        }
    }
    let mut warnings = TableWarnings::default();
    let mut drivers = Vec::new();
    let mut values = Vec::new();
    for (driver, row) in counts {
        let total: u64 = row.iter().sum();
        if total == 0 {
            warnings.dropped_drivers.push(driver.to_owned());
            continue;
        }
        drivers.push(driver.to_owned());
        values.push(row.iter().map(|&c| c as f64 / total as f64).collect());
    }
    if drivers.is_empty() {
        return Err(Error::invalid("no driver has a day left to count"));
    }
    Ok((
        FrequencyTable {
            drivers,
            day_categories: categories,
            values,
        },
        warnings,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub inner: GaussianMixture,
    /// K x C means, including the implied last column.
    pub means: Vec<Vec<f64>>,
    pub categories: Vec<String>,
}

impl MixtureModel {
    pub fn k(&self) -> usize {
        self.inner.k()
    }
}

pub fn fit_mixture(
    table: &FrequencyTable,
    k: usize,
    seed: u64,
    opts: &EmOptions,
) -> Result<MixtureModel> {
    table.validate()?;
    if k > table.drivers.len() {
        return Err(Error::invalid(format!(
            "{k} profiles requested for {} drivers",
            table.drivers.len()
        )));
    }
    let inner = gmm::fit(&table.reduced(), k, opts, seed)?;
    let means = (0..k)
        .map(|j| {
            let mut m: Vec<f64> = inner.means.row(j).iter().copied().collect();
            m.push(1.0 - m.iter().sum::<f64>());
            m
        })
        .collect();
    Ok(MixtureModel {
        inner,
        means,
        categories: table.day_categories.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    pub id: String,
    pub profile: usize,
    pub responsibilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub id: usize,
    pub interpretation: String,
    /// Share of drivers assigned to this profile, in percent.
    pub proportion: f64,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub profiles: Vec<ProfileSummary>,
    pub drivers: Vec<DriverProfile>,
}

pub fn assign_profiles(
    model: &MixtureModel,
    table: &FrequencyTable,
    interpretations: &BTreeMap<usize, String>,
) -> Result<ProfileReport> {
    if table.day_categories.len() != model.categories.len() {
        return Err(Error::invalid(format!(
            "table has {} day categories but the model was fitted on {}",
            table.day_categories.len(),
            model.categories.len()
        )));
    }
    let resp = model.inner.responsibilities(&table.reduced())?;
    let k = model.k();
    let mut counts = vec![0usize; k];
    let drivers: Vec<DriverProfile> = table
        .drivers
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let r: Vec<f64> = resp.row(i).iter().copied().collect();
            let mut best = 0;
            for j in 1..k {
                if r[j] > r[best] {
                    best = j;
                }
            }
            counts[best] += 1;
            DriverProfile {
                id: d.clone(),
                profile: best,
                responsibilities: r,
            }
        })
        .collect();
    let n = drivers.len() as f64;
    let profiles = (0..k)
        .map(|j| ProfileSummary {
            id: j,
            interpretation: interpretations
                .get(&j)
                .cloned()
                .unwrap_or_else(|| crate::cluster::UNDESCRIBED.to_owned()),
            proportion: 100.0 * counts[j] as f64 / n,
            mean: model.means[j].clone(),
        })
        .collect();
    Ok(ProfileReport { profiles, drivers })
}

/// Report with every driver in one profile, for tables no mixture can be
/// fitted to (a single driver or a single day category).
pub fn single_profile(
    table: &FrequencyTable,
    interpretations: &BTreeMap<usize, String>,
) -> Result<ProfileReport> {
    table.validate_rows()?;
    let n = table.drivers.len() as f64;
    let mean = (0..table.day_categories.len())
        .map(|j| table.values.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    Ok(ProfileReport {
        profiles: vec![ProfileSummary {
            id: 0,
            interpretation: interpretations
                .get(&0)
                .cloned()
                .unwrap_or_else(|| crate::cluster::UNDESCRIBED.to_owned()),
            proportion: 100.0,
            mean,
        }],
        drivers: table
            .drivers
            .iter()
            .map(|d| DriverProfile {
                id: d.clone(),
                profile: 0,
                responsibilities: vec![1.0],
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDiagnostics {
    pub k: usize,
    pub bic: f64,
    pub log_likelihood: f64,
    /// None when the hard assignment has fewer than two profiles.
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub recommended: usize,
    pub diagnostics: Vec<KDiagnostics>,
    /// Values of the range that could not be fitted (more profiles than drivers).
    pub skipped: Vec<usize>,
}

/// Fits each K and recommends the BIC minimiser (ties to the smaller K).
pub fn select_k(
    table: &FrequencyTable,
    k_range: &[usize],
    seed: u64,
    opts: &EmOptions,
    exec: Execution,
) -> Result<KSelection> {
    table.validate()?;
    let data = table.reduced();
    let (usable, skipped): (Vec<usize>, Vec<usize>) = k_range
        .iter()
        .copied()
        .partition(|&k| k >= 1 && k <= table.drivers.len());
    if usable.is_empty() {
        return Err(Error::invalid(
            "no value of the K range fits the number of drivers",
        ));
    }
    let fits = map_ordered(&usable, exec, |&k| -> Result<KDiagnostics> {
        let m = gmm::fit(&data, k, opts, seed)?;
        let labels: Vec<i64> = m.predict(&data)?.into_iter().map(|l| l as i64).collect();
        Ok(KDiagnostics {
            k,
            bic: m.bic(&data)?,
            log_likelihood: m.log_likelihood(&data)?,
            silhouette: silhouette(&data, &labels).ok(),
        })
    });
    let diagnostics = fits.into_iter().collect::<Result<Vec<_>>>()?;
    let recommended = diagnostics
        .iter()
        .fold(None, |best: Option<&KDiagnostics>, d| match best {
            Some(b) if b.bic <= d.bic => Some(b),
            _ => Some(d),
        })
        .map(|d| d.k)
        .expect("at least one fit");
    Ok(KSelection {
        recommended,
        diagnostics,
        skipped,
    })
}
