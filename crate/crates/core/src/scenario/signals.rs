//! Reference trajectories and demand signals.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReferenceSpec {
    /// Logistic transition towards `target`, centred at `t_mid` with width `tau` [yr].
    Sigmoid {
        target: f64,
        t_mid: f64,
        tau: f64,
    },
    Constant {
        target: f64,
    },
}

impl ReferenceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReferenceSpec::Sigmoid { target, t_mid, tau } => {
                if !(tau > 0.0 && tau.is_finite()) {
                    return Err(Error::NonPositive("tau"));
                }
                if !target.is_finite() || !t_mid.is_finite() {
                    return Err(Error::InvalidParameter("non-finite sigmoid reference".into()));
                }
            }
            ReferenceSpec::Constant { target } => {
                if !target.is_finite() {
                    return Err(Error::InvalidParameter("non-finite constant reference".into()));
                }
            }
        }
        Ok(())
    }

    pub fn target(&self) -> f64 {
        match *self {
            ReferenceSpec::Sigmoid { target, .. } | ReferenceSpec::Constant { target } => target,
        }
    }

    /// Bounds on |ṙ| and |r̈| over t ≥ 0 given the starting value `y0`.
    pub fn derivative_bounds(&self, y0: f64) -> (f64, f64) {
        match *self {
            ReferenceSpec::Constant { .. } => (0.0, 0.0),
            ReferenceSpec::Sigmoid { target, t_mid, tau } => {
                let amp = (target - y0).abs() / (1.0 - logistic(-t_mid / tau));
                // max of s' is 1/4, of |s''| is 1/(6√3)
                (amp / (4.0 * tau), amp / (6.0 * 3f64.sqrt() * tau * tau))
            }
        }
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Sigmoid references are shifted so that r(0) = y0 exactly and r → target.
pub fn reference_at(spec: &ReferenceSpec, y0: f64, t: f64) -> Result<f64> {
    match *spec {
        ReferenceSpec::Constant { target } => Ok(target),
        ReferenceSpec::Sigmoid { target, t_mid, tau } => {
            if !(tau > 0.0) {
                return Err(Error::NonPositive("tau"));
            }
            let s0 = logistic(-t_mid / tau);
            let s = logistic((t - t_mid) / tau);
            Ok(y0 + (target - y0) * (s - s0) / (1.0 - s0))
        }
    }
}

/// Uniformly sampled or irregular `t_years,value` series, held constant
/// between samples and beyond the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    t: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    t_years: f64,
    value: f64,
}

impl Series {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::EmptySeries("demand"));
        }
        if t.len() != v.len() {
            return Err(Error::Dimension(format!("{} times for {} values", t.len(), v.len())));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "series times must be strictly increasing".into(),
            ));
        }
        crate::error::check_finite("series", &v)?;
        Ok(Series { t, v })
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let (mut t, mut v) = (Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: SeriesRow = row.map_err(|e| Error::csv(path, e))?;
            t.push(row.t_years);
            v.push(row.value);
        }
        Series::new(t, v)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["t_years", "value"]).map_err(|e| Error::csv(path, e))?;
        for (t, v) in self.t.iter().zip(&self.v) {
            w.write_record([t.to_string(), v.to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    /// Value of the last sample at or before `t`; the first sample before it.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.t.partition_point(|&s| s <= t);
        self.v[k.saturating_sub(1)]
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// D(t) = ratios · f(t), one entry per demand row.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSource {
    pub series: Series,
    pub ratios: Vec<f64>,
}

impl DemandSource {
    pub fn rows(&self) -> usize {
        self.ratios.len()
    }

    pub fn demand_at(&self, t: f64) -> Vec<f64> {
        let f = self.series.at(t);
        self.ratios.iter().map(|r| r * f).collect()
    }
}

pub fn demand_at(source: &DemandSource, t: f64) -> Vec<f64> {
    source.demand_at(t)
}
