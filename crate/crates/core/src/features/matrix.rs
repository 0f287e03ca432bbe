use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    Rolling,
    Recency,
    Frequency,
    Activity,
    Census,
    Competition,
    /// Columns that did not come from the engineered families (synthetic or
    /// user-supplied tables).
    External,
}

/// Where an engineered column came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub family: FeatureFamily,
    /// Trailing window in months, when windowed.
    pub window: Option<u32>,
    pub statistic: String,
    /// `ALL`, `PL_<line>`, `BR_<brand>`, or a source name for non-grouped columns.
    pub grouping: String,
    pub measure: Option<String>,
}

impl FeatureDescriptor {
    pub fn external() -> Self {
        FeatureDescriptor {
            family: FeatureFamily::External,
            window: None,
            statistic: "value".into(),
            grouping: "external".into(),
            measure: None,
        }
    }
}

/// Dense client-by-feature table. Missing cells are stored as NaN and exposed
/// as `None` through [`FeatureMatrix::get`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    client_ids: Vec<String>,
    feature_names: Vec<String>,
    values: Vec<f64>,
    provenance: BTreeMap<String, FeatureDescriptor>,
}

impl FeatureMatrix {
    /// `values` is row-major. Non-finite entries other than NaN are rejected.
    pub fn new(
        client_ids: Vec<String>,
        feature_names: Vec<String>,
        values: Vec<f64>,
        provenance: BTreeMap<String, FeatureDescriptor>,
    ) -> Result<Self> {
        if values.len() != client_ids.len() * feature_names.len() {
            return Err(Error::input(format!(
                "feature grid has {} cells, expected {} x {}",
                values.len(),
                client_ids.len(),
                feature_names.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::input(format!("duplicate feature name {name:?}")));
            }
            if !provenance.contains_key(name) {
                return Err(Error::input(format!("feature {name:?} has no descriptor")));
            }
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::input("feature values must be finite or missing"));
        }
        let provenance = provenance
            .into_iter()
            .filter(|(k, _)| seen.contains(k.as_str()))
            .collect();
        Ok(FeatureMatrix {
            client_ids,
            feature_names,
            values,
            provenance,
        })
    }

    /// Builds a matrix whose columns all carry the external descriptor.
    pub fn from_rows(
        client_ids: Vec<String>,
        feature_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let provenance = feature_names
            .iter()
            .map(|n| (n.clone(), FeatureDescriptor::external()))
            .collect();
        Self::new(client_ids, feature_names, values, provenance)
    }

    pub fn n_rows(&self) -> usize {
        self.client_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn client_ids(&self) -> &[String] {
        &self.client_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn provenance(&self) -> &BTreeMap<String, FeatureDescriptor> {
        &self.provenance
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[row * self.n_cols() + col];
        (!v.is_nan()).then_some(v)
    }

    /// Raw cell value, NaN when missing.
    #[inline]
    pub fn raw(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.feature_names.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.n_cols();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.raw(r, col)).collect()
    }

    pub fn column_subset(&self, col: usize, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&r| self.raw(r, col)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let n = self.n_cols();
        self.values[row * n + col] = value;
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            client_ids: rows.iter().map(|&r| self.client_ids[r].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values,
            provenance: self.provenance.clone(),
        }
    }

    /// Keeps the named columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::MissingFeature(n.clone())))
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            values.extend(idx.iter().map(|&c| self.raw(r, c)));
        }
        Ok(FeatureMatrix {
            client_ids: self.client_ids.clone(),
            feature_names: names.to_vec(),
            values,
            provenance: names
                .iter()
                .map(|n| (n.clone(), self.provenance[n].clone()))
                .collect(),
        })
    }

    /// Reindexes columns to `names`; columns this matrix lacks come out fully
    /// missing. Used when scoring a population whose product mix differs from
    /// the training population.
    pub fn align_to(&self, names: &[String]) -> FeatureMatrix {
        let idx: Vec<Option<usize>> = names.iter().map(|n| self.column_index(n)).collect();
        let mut values = Vec::with_capacity(self.n_rows() * names.len());
        for r in 0..self.n_rows() {
            values.extend(idx.iter().map(|c| c.map_or(f64::NAN, |c| self.raw(r, c))));
        }
        let provenance = names
            .iter()
            .map(|n| {
                let d = self
                    .provenance
                    .get(n)
                    .cloned()
                    .unwrap_or_else(FeatureDescriptor::external);
                (n.clone(), d)
            })
            .collect();
        FeatureMatrix {
            client_ids: self.client_ids.clone(),
            feature_names: names.to_vec(),
            values,
            provenance,
        }
    }

    /// Column-wise concatenation; both sides must list the same clients in
    /// the same order.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.client_ids != other.client_ids {
            return Err(Error::input("hstack: client id lists differ"));
        }
        let mut names = self.feature_names.clone();
        names.extend(other.feature_names.iter().cloned());
        let mut values = Vec::with_capacity(self.n_rows() * names.len());
        for r in 0..self.n_rows() {
            values.extend_from_slice(self.row(r));
            values.extend_from_slice(other.row(r));
        }
        let mut provenance = self.provenance.clone();
        provenance.extend(other.provenance.clone());
        FeatureMatrix::new(self.client_ids.clone(), names, values, provenance)
    }

    /// Rows whose client id is in `ids`, in the order of `ids`.
    pub fn rows_for_clients(&self, ids: &[String]) -> Result<Vec<usize>> {
        let index: BTreeMap<&str, usize> = self
            .client_ids
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::input(format!("client {id:?} has no feature row")))
            })
            .collect()
    }

    /// Writes `features.csv`: `client_id` then one column per feature; empty
    /// cells are missing.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = Vec::with_capacity(self.n_cols() + 1);
        header.push("client_id");
        header.extend(self.feature_names.iter().map(String::as_str));
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(self.n_cols() + 1);
        for r in 0..self.n_rows() {
            row.clear();
            row.push(self.client_ids[r].clone());
            row.extend(
                self.row(r)
                    .iter()
                    .map(|v| if v.is_nan() { String::new() } else { v.to_string() }),
            );
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<features writer>", e))?;
        Ok(())
    }

    /// Reads `features.csv`. Descriptors come from `meta` when given,
    /// otherwise every column is marked external.
    pub fn read_csv<R: Read>(input: R, meta: Option<&[FeatureMeta]>) -> Result<FeatureMatrix> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("client_id") {
            return Err(Error::input("features.csv must start with a client_id column"));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            ids.push(rec[0].to_string());
            for cell in rec.iter().skip(1) {
                if cell.is_empty() {
                    values.push(f64::NAN);
                } else {
                    let v: f64 = cell.parse().map_err(|_| Error::Parse {
                        context: "features.csv".into(),
                        line,
                        message: format!("non-numeric cell {cell:?}"),
                    })?;
                    values.push(v);
                }
            }
        }
        let provenance = match meta {
            Some(meta) => meta
                .iter()
                .map(|m| (m.name.clone(), m.descriptor.clone()))
                .collect(),
            None => names
                .iter()
                .map(|n| (n.clone(), FeatureDescriptor::external()))
                .collect(),
        };
        FeatureMatrix::new(ids, names, values, provenance)
    }

    pub fn meta(&self) -> Vec<FeatureMeta> {
        self.feature_names
            .iter()
            .map(|n| FeatureMeta {
                name: n.clone(),
                descriptor: self.provenance[n].clone(),
            })
            .collect()
    }
}

/// One entry of `features_meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    #[serde(flatten)]
    pub descriptor: FeatureDescriptor,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FeatureMatrix {
        FeatureMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
            vec![1.0, f64::NAN, 3.5, -2.0],
        )
        .unwrap()
    }

    #[test]
    fn dimensions_are_checked() {
        assert!(FeatureMatrix::from_rows(vec!["a".into()], vec!["x".into()], vec![]).is_err());
        assert!(FeatureMatrix::from_rows(
            vec!["a".into()],
            vec!["x".into(), "x".into()],
            vec![1.0, 2.0]
        )
        .is_err());
    }

    #[test]
    fn csv_round_trip_keeps_missing() {
        let m = small();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "client_id,x,y\na,1,\nb,3.5,-2\n");
        let back = FeatureMatrix::read_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back.get(0, 1), None);
        assert_eq!(back.get(1, 0), Some(3.5));
        assert_eq!(back.client_ids(), m.client_ids());
    }

    #[test]
    fn align_fills_unknown_columns() {
        let m = small();
        let a = m.align_to(&["y".into(), "z".into()]);
        assert_eq!(a.get(1, 0), Some(-2.0));
        assert_eq!(a.get(0, 1), None);
        assert_eq!(a.get(1, 1), None);
        assert!(m.select_columns(&["z".into()]).is_err());
    }
}
