//! Combining frameworks: embedding concatenation (early/middle fusion) and
//! the product rule over predicted probabilities (late fusion).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::dataio::Label;
use crate::error::{Error, Result};
use crate::models::NUM_CLASSES;

/// `e1` followed by `e2`.
pub fn concat_embeddings(e1: &[f32], e2: &[f32]) -> Result<Vec<f32>> {
    if e1.iter().chain(e2).any(|v| !v.is_finite()) {
        return Err(Error::contract("embeddings must be finite"));
    }
    Ok(e1.iter().chain(e2).copied().collect())
}

/// Row-wise [`concat_embeddings`] for two aligned embedding matrices.
pub fn concat_embedding_rows(a: ArrayView2<f32>, b: ArrayView2<f32>) -> Result<Array2<f32>> {
    if a.nrows() != b.nrows() {
        return Err(Error::contract(format!("{} rows vs {} rows", a.nrows(), b.nrows())));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::contract("embeddings must be finite"));
    }
    Ok(concatenate(Axis(1), &[a, b]).expect("row counts checked"))
}

/// `fused[c] = (1/S)·Π_s p_s[c]`. The result is not renormalized.
pub fn prod_fusion(prob_sets: &[&[f64]]) -> Result<Vec<f64>> {
    let first = prob_sets.first().ok_or_else(|| Error::contract("nothing to fuse"))?;
    if prob_sets.iter().any(|p| p.len() != first.len()) {
        return Err(Error::contract("probability vectors differ in length"));
    }
    let scale = 1.0 / prob_sets.len() as f64;
    Ok((0..first.len())
        .map(|c| scale * prob_sets.iter().map(|p| p[c]).product::<f64>())
        .collect())
}

/// Index of the largest entry; the lowest index wins ties.
pub fn predict_label(fused: &[f64]) -> Result<usize> {
    if fused.is_empty() || fused.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("cannot take the argmax of an empty or non-finite vector"));
    }
    Ok((1..fused.len()).fold(0, |best, i| if fused[i] > fused[best] { i } else { best }))
}

const HEADER: [&str; 5] = ["cycle_id", "p_normal", "p_crackle", "p_wheeze", "p_both"];

/// Per-cycle class probabilities from one framework.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub framework_id: String,
    rows: BTreeMap<String, [f64; NUM_CLASSES]>,
}

fn check_simplex(id: &str, p: &[f64; NUM_CLASSES]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| v.is_nan() || *v < 0.0) || (sum - 1.0).abs() > 1e-5 {
        return Err(Error::contract(format!("{id}: {p:?} is not a probability vector")));
    }
    Ok(())
}

impl PredictionSet {
    pub fn new(framework_id: impl Into<String>) -> Self {
        Self {
            framework_id: framework_id.into(),
            rows: BTreeMap::new(),
        }
    }

    /// Adds a row; a duplicate cycle id is an integrity error.
    pub fn insert(&mut self, cycle_id: impl Into<String>, probs: [f64; NUM_CLASSES]) -> Result<()> {
        let id = cycle_id.into();
        check_simplex(&id, &probs)?;
        if self.rows.insert(id.clone(), probs).is_some() {
            return Err(Error::Integrity(format!("cycle {id} predicted twice")));
        }
        Ok(())
    }

    pub fn get(&self, cycle_id: &str) -> Option<&[f64; NUM_CLASSES]> {
        self.rows.get(cycle_id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64; NUM_CLASSES])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn labels(&self) -> BTreeMap<String, usize> {
        self.rows
            .iter()
            .map(|(k, v)| (k.clone(), predict_label(v).expect("validated rows")))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, self.rows.iter())
    }

    pub fn read_csv<R: Read>(framework_id: impl Into<String>, input: R) -> Result<Self> {
        let mut set = Self::new(framework_id);
        for (id, probs) in read_rows(input)? {
            set.insert(id, probs)?;
        }
        Ok(set)
    }
}

fn write_rows<'a, W: Write>(out: W, rows: impl Iterator<Item = (&'a String, &'a [f64; NUM_CLASSES])>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (id, p) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(p.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read>(input: R) -> Result<Vec<(String, [f64; NUM_CLASSES])>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 5 fields, found {}", rec.len()),
            });
        }
        let mut p = [0.0; NUM_CLASSES];
        for (c, v) in p.iter_mut().enumerate() {
            *v = rec[c + 1].trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{}` is not a number", &rec[c + 1]),
            })?;
        }
        out.push((rec[0].to_string(), p));
    }
    Ok(out)
}

/// Product-rule output per cycle (unnormalized) and the argmax labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedPredictions {
    pub frameworks: Vec<String>,
    rows: BTreeMap<String, [f64; NUM_CLASSES]>,
}

impl FusedPredictions {
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64; NUM_CLASSES])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> BTreeMap<String, usize> {
        self.rows
            .iter()
            .map(|(k, v)| (k.clone(), predict_label(v).expect("finite products")))
            .collect()
    }

    /// Fused scores in the prediction-file layout (values do not sum to 1).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, self.rows.iter())
    }

    /// Scores rescaled to sum to 1 per cycle, for display only.
    pub fn renormalized(&self) -> BTreeMap<String, [f64; NUM_CLASSES]> {
        self.rows
            .iter()
            .map(|(k, v)| {
                let s: f64 = v.iter().sum();
                let r = if s > 0.0 { v.map(|x| x / s) } else { [1.0 / NUM_CLASSES as f64; NUM_CLASSES] };
                (k.clone(), r)
            })
            .collect()
    }

    /// `cycle_id,label_index,label`.
    pub fn write_labels_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cycle_id", "label_index", "label"])?;
        for (id, l) in self.labels() {
            w.write_record([id, l.to_string(), Label::ALL[l].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Late fusion of two or more prediction sets over identical cycle ids.
pub fn fuse_prediction_sets(sets: &[PredictionSet]) -> Result<FusedPredictions> {
    let first = sets.first().ok_or_else(|| Error::contract("nothing to fuse"))?;
    for s in &sets[1..] {
        if s.rows.len() != first.rows.len() || s.rows.keys().zip(first.rows.keys()).any(|(a, b)| a != b) {
            let missing = first
                .rows
                .keys()
                .find(|k| !s.rows.contains_key(*k))
                .or_else(|| s.rows.keys().find(|k| !first.rows.contains_key(*k)));
            return Err(Error::Integrity(format!(
                "{} and {} cover different cycles (e.g. {})",
                first.framework_id,
                s.framework_id,
                missing.map(String::as_str).unwrap_or("?")
            )));
        }
    }
    let mut rows = BTreeMap::new();
    for id in first.rows.keys() {
        let probs: Vec<&[f64]> = sets.iter().map(|s| &s.rows[id][..]).collect();
        let fused = prod_fusion(&probs)?;
        rows.insert(id.clone(), fused.try_into().expect("four classes"));
    }
    Ok(FusedPredictions {
        frameworks: sets.iter().map(|s| s.framework_id.clone()).collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_examples() {
        let p = [0.4, 0.3, 0.2, 0.1];
        assert_eq!(prod_fusion(&[&p]).unwrap(), p);
        let u = [0.25; 4];
        let f = prod_fusion(&[&p, &u]).unwrap();
        for (a, b) in f.iter().zip([0.05, 0.0375, 0.025, 0.0125]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(predict_label(&f).unwrap(), 0);
        assert_eq!(predict_label(&u).unwrap(), 0);
        assert!(prod_fusion(&[]).is_err());
    }

    #[test]
    fn concatenation() {
        let a = vec![1.0f32; 2048];
        let b = vec![2.0f32; 512];
        let c = concat_embeddings(&a, &b).unwrap();
        assert_eq!(c.len(), 2560);
        assert_eq!(&c[..2048], &a[..]);
        assert_eq!(concat_embeddings(&a, &[]).unwrap(), a);
        assert!(concat_embeddings(&[f32::NAN], &[]).is_err());
    }

    fn set(id: &str, rows: &[(&str, [f64; 4])]) -> PredictionSet {
        let mut s = PredictionSet::new(id);
        for (k, p) in rows {
            s.insert(*k, *p).unwrap();
        }
        s
    }

    #[test]
    fn csv_round_trip_and_fusion_integrity() {
        let a = set("a", &[("r#000", [0.1, 0.6, 0.2, 0.1]), ("r#001", [0.7, 0.1, 0.1, 0.1])]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let back = PredictionSet::read_csv("a", &buf[..]).unwrap();
        assert_eq!(back, a);

        let self_fused = fuse_prediction_sets(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(self_fused.labels(), a.labels());

        let b = set("b", &[("x#000", [0.25; 4])]);
        assert!(matches!(fuse_prediction_sets(&[a, b]), Err(Error::Integrity(_))));
    }

    #[test]
    fn rejects_non_distributions() {
        let mut s = PredictionSet::new("a");
        assert!(s.insert("c", [0.5, 0.5, 0.5, 0.0]).is_err());
        assert!(PredictionSet::read_csv("a", "id,p\n".as_bytes()).is_err());
    }
}
