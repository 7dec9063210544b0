//! Observed data for the censored linear model on the log-time scale and the
//! per-`beta` residual view consumed by the self-consistent estimator.

use std::cmp::Ordering;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Right-censored sample: log observation times, failure indicators and an
/// `n x p` covariate matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    y: Vec<f64>,
    delta: Vec<bool>,
    x: Vec<f64>,
    p: usize,
}

impl CensoredSample {
    /// Builds a sample from log times, failure indicators and covariate rows.
    ///
    /// Shapes and finiteness are checked here. Constant covariate columns are
    /// allowed at construction (they are legitimate inputs to the estimating
    /// functions, which then vanish in that coordinate); fitting entry points
    /// reject them through [`CensoredSample::check_design`].
    pub fn new(y: Vec<f64>, delta: Vec<bool>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidSample(format!("need at least 2 observations, got {n}")));
        }
        if delta.len() != n || rows.len() != n {
            return Err(Error::InvalidSample(format!(
                "length mismatch: y={}, delta={}, x rows={}",
                n,
                delta.len(),
                rows.len()
            )));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::InvalidSample("covariate dimension must be at least 1".into()));
        }
        let mut x = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidSample(format!(
                    "row {i} has {} covariates, expected {p}",
                    row.len()
                )));
            }
            x.extend_from_slice(row);
        }
        Self::from_flat(y, delta, x, p)
    }

    /// Same as [`CensoredSample::new`] with the covariates already flattened row-major.
    pub fn from_flat(y: Vec<f64>, delta: Vec<bool>, x: Vec<f64>, p: usize) -> Result<Self> {
        let n = y.len();
        if n < 2 || p == 0 || delta.len() != n || x.len() != n * p {
            return Err(Error::InvalidSample(format!(
                "inconsistent shapes: n={n}, p={p}, delta={}, x={}",
                delta.len(),
                x.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("y[{i}] = {}", y[i])));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("x[{}, {}] = {}", k / p, k % p, x[k])));
        }
        Ok(Self { y, delta, x, p })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n()).map(move |i| self.x[i * self.p + j])
    }

    /// Column means of the covariate matrix.
    pub fn xbar(&self) -> Vec<f64> {
        let n = self.n() as f64;
        let mut m = vec![0.0; self.p];
        for i in 0..self.n() {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn censoring_rate(&self) -> f64 {
        self.delta.iter().filter(|d| !**d).count() as f64 / self.n() as f64
    }

    /// Rejects designs with a constant covariate column.
    pub fn check_design(&self) -> Result<()> {
        for j in 0..self.p {
            let first = self.x[j];
            if self.column(j).all(|v| v == first) {
                return Err(Error::ConstantCovariate { column: j });
            }
        }
        Ok(())
    }

    /// Returns a copy with `y` shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.y.iter_mut().for_each(|v| *v += c);
        out
    }

    /// Parses `time,status,x1,...,xp` CSV, taking logs of the (strictly positive) times.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 {
            return Err(Error::InvalidSample(
                "header must be time,status,x1,...,xp with at least one covariate".into(),
            ));
        }
        if !headers[0].eq_ignore_ascii_case("time") || !headers[1].eq_ignore_ascii_case("status") {
            return Err(Error::InvalidSample(format!(
                "first two columns must be `time,status`, got `{},{}`",
                &headers[0], &headers[1]
            )));
        }
        let p = headers.len() - 2;
        let mut y = Vec::new();
        let mut delta = Vec::new();
        let mut x = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record[k].parse::<f64>().map_err(|_| {
                    Error::InvalidSample(format!("row {}: cannot parse `{}`", row + 1, &record[k]))
                })
            };
            let time = parse(0)?;
            if !(time > 0.0) || !time.is_finite() {
                return Err(Error::NonpositiveTime { row: row + 1, value: time });
            }
            let status = match record[1].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::InvalidSample(format!(
                        "row {}: status must be 0 or 1, got `{other}`",
                        row + 1
                    )))
                }
            };
            y.push(time.ln());
            delta.push(status);
            for k in 0..p {
                x.push(parse(k + 2)?);
            }
        }
        Self::from_flat(y, delta, x, p)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    /// Writes the sample back out as `time,status,x1,...` (times exponentiated).
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "status".to_string()];
        header.extend((1..=self.p).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![format!("{:e}", self.y[i].exp()), (self.delta[i] as u8).to_string()];
            rec.extend(self.row(i).iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Residuals `y - x'beta` with their stable ascending order and the failure
/// indicators after forcing every residual tied at the maximum to be a failure.
#[derive(Debug, Clone)]
pub struct ResidualView {
    pub beta: Vec<f64>,
    pub e: Vec<f64>,
    pub order: Vec<usize>,
    pub delta_mod: Vec<bool>,
}

impl ResidualView {
    /// Iterates over contiguous tie groups of `order` as `(value, indices)`.
    pub fn tie_groups(&self) -> TieGroups<'_> {
        TieGroups { view: self, pos: 0 }
    }
}

pub struct TieGroups<'a> {
    view: &'a ResidualView,
    pos: usize,
}

impl<'a> Iterator for TieGroups<'a> {
    type Item = (f64, &'a [usize]);

    fn next(&mut self) -> Option<Self::Item> {
        let order = &self.view.order;
        if self.pos >= order.len() {
            return None;
        }
        let start = self.pos;
        let value = self.view.e[order[start]];
        let mut end = start + 1;
        while end < order.len() && self.view.e[order[end]] == value {
            end += 1;
        }
        self.pos = end;
        Some((value, &order[start..end]))
    }
}

/// Computes residuals at `beta`; ties are exact floating-point ties.
pub fn residuals(sample: &CensoredSample, beta: &[f64]) -> Result<ResidualView> {
    if beta.len() != sample.p() {
        return Err(Error::InvalidSample(format!(
            "beta has length {}, expected {}",
            beta.len(),
            sample.p()
        )));
    }
    if let Some(k) = beta.iter().position(|b| !b.is_finite()) {
        return Err(Error::NonFinite(format!("beta[{k}] = {}", beta[k])));
    }
    let n = sample.n();
    let mut e = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = sample.y()[i];
        for (xij, bj) in sample.row(i).iter().zip(beta) {
            r -= xij * bj;
        }
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("residual {i} overflowed")));
        }
        e.push(r);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| match e[a].partial_cmp(&e[b]) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    });
    let max = e[order[n - 1]];
    let delta_mod = (0..n).map(|i| sample.delta()[i] || e[i] == max).collect();
    Ok(ResidualView { beta: beta.to_vec(), e, order, delta_mod })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(y: &[f64], d: &[u8], x: &[f64]) -> CensoredSample {
        CensoredSample::new(
            y.to_vec(),
            d.iter().map(|&v| v == 1).collect(),
            x.iter().map(|&v| vec![v]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn last_observation_rule_flips_the_maximum() {
        let s = sample(&[0.0, 1.0, 2.0], &[1, 0, 0], &[0.0, 0.0, 0.0]);
        let v = residuals(&s, &[0.0]).unwrap();
        assert_eq!(v.e, vec![0.0, 1.0, 2.0]);
        assert_eq!(v.delta_mod, vec![true, false, true]);
    }

    #[test]
    fn common_covariate_shift() {
        let s = sample(&[3.0, 1.0, 2.0], &[0, 1, 1], &[1.0, 1.0, 1.0]);
        let v = residuals(&s, &[1.0]).unwrap();
        assert_eq!(v.e, vec![2.0, 0.0, 1.0]);
        assert_eq!(v.delta_mod, vec![true, true, true]);
        assert_eq!(v.order, vec![1, 2, 0]);
    }

    #[test]
    fn every_residual_tied_at_the_maximum_is_flipped() {
        let s = sample(&[1.0, 1.0, 0.0], &[0, 0, 1], &[0.0, 0.0, 0.0]);
        let v = residuals(&s, &[0.0]).unwrap();
        let max = v.e.iter().cloned().fold(f64::MIN, f64::max);
        let tied: Vec<usize> = (0..3).filter(|&i| v.e[i] == max).collect();
        assert_eq!(tied, vec![0, 1]);
        assert_eq!(v.delta_mod, vec![true, true, true]);
    }

    #[test]
    fn stable_order_groups_ties() {
        let s = sample(&[1.0, 0.0, 1.0, 0.0], &[1, 1, 0, 1], &[0.0, 1.0, 2.0, 3.0]);
        let v = residuals(&s, &[0.0]).unwrap();
        assert_eq!(v.order, vec![1, 3, 0, 2]);
        let groups: Vec<(f64, Vec<usize>)> = v.tie_groups().map(|(t, g)| (t, g.to_vec())).collect();
        assert_eq!(groups, vec![(0.0, vec![1, 3]), (1.0, vec![0, 2])]);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(CensoredSample::new(vec![1.0], vec![true], vec![vec![0.0]]).is_err());
        assert!(CensoredSample::new(vec![1.0, 2.0], vec![true], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(matches!(
            CensoredSample::new(vec![1.0, f64::NAN], vec![true, true], vec![vec![0.0], vec![1.0]]),
            Err(Error::NonFinite(_))
        ));
        let s = sample(&[1.0, 2.0], &[1, 1], &[3.0, 3.0]);
        assert!(matches!(s.check_design(), Err(Error::ConstantCovariate { column: 0 })));
        assert!(residuals(&s, &[f64::INFINITY]).is_err());
    }

    #[test]
    fn csv_ingestion_takes_logs_and_names_bad_rows() {
        let text = "time,status,x1,x2\n1.0,1,0.5,1\n2.0,0,-1,0\n";
        let s = CensoredSample::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.p(), 2);
        assert_eq!(s.y()[1], 2f64.ln());
        assert_eq!(s.delta(), &[true, false]);
        assert_eq!(s.row(1), &[-1.0, 0.0]);

        let bad = "time,status,x1\n1.0,1,0\n0,1,1\n";
        match CensoredSample::from_csv_reader(bad.as_bytes()) {
            Err(Error::NonpositiveTime { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let bad_status = "time,status,x1\n1.0,2,0\n1.5,1,1\n";
        assert!(CensoredSample::from_csv_reader(bad_status.as_bytes()).is_err());
    }
}
