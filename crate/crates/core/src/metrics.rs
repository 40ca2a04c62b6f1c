//! NMSD learning curves and their reductions.

use crate::error::{Error, Result};

/// Lower/upper clamp applied to every NMSD value in dB.
pub const NMSD_CLAMP_DB: f64 = 400.0;

/// Default steady-state averaging window, in blocks.
pub const STEADY_STATE_WINDOW: usize = 500;

/// Per-block NMSD values (dB) of one run, or an average of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct NmsdTrace {
    pub label: String,
    pub values_db: Vec<f64>,
    pub diverged: bool,
}

impl NmsdTrace {
    pub fn new(label: impl Into<String>, values_db: Vec<f64>, diverged: bool) -> Self {
        Self {
            label: label.into(),
            values_db,
            diverged,
        }
    }

    pub fn len(&self) -> usize {
        self.values_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_db.is_empty()
    }
}

fn clamp_db(v: f64) -> f64 {
    if v.is_nan() {
        NMSD_CLAMP_DB
    } else {
        v.clamp(-NMSD_CLAMP_DB, NMSD_CLAMP_DB)
    }
}

/// Linear deviation ratio `‖w_o − w‖² / ‖w_o‖²`.
pub fn deviation_ratio(w_o: &[f64], w: &[f64]) -> Result<f64> {
    if w_o.len() != w.len() {
        return Err(Error::param(format!(
            "weight lengths differ ({} vs {})",
            w_o.len(),
            w.len()
        )));
    }
    let reference: f64 = w_o.iter().map(|x| x * x).sum();
    if reference == 0.0 {
        return Err(Error::param("reference system has zero norm"));
    }
    let dev: f64 = w_o.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(dev / reference)
}

/// Converts a linear ratio to clamped dB.
pub fn ratio_to_db(ratio: f64) -> f64 {
    clamp_db(10.0 * ratio.log10())
}

/// `10·log10(‖w_o − w‖² / ‖w_o‖²)`, clamped to ±400 dB.
pub fn nmsd(w_o: &[f64], w: &[f64]) -> Result<f64> {
    deviation_ratio(w_o, w).map(ratio_to_db)
}

/// Mean (in dB) of the last `window` values.
pub fn steady_state(values_db: &[f64], window: usize) -> Result<f64> {
    if window == 0 || values_db.len() < window {
        return Err(Error::param(format!(
            "steady-state window of {window} needs at least that many values (trace has {})",
            values_db.len()
        )));
    }
    let tail = &values_db[values_db.len() - window..];
    Ok(tail.iter().sum::<f64>() / window as f64)
}

/// Running linear-domain sum of traces; runs are folded in the order added.
#[derive(Debug, Clone)]
pub struct LinearAccumulator {
    label: String,
    sum: Vec<f64>,
    count: usize,
    diverged: bool,
}

impl LinearAccumulator {
    pub fn new(label: impl Into<String>, len: usize) -> Self {
        Self {
            label: label.into(),
            sum: vec![0.0; len],
            count: 0,
            diverged: false,
        }
    }

    pub fn add_linear(&mut self, ratios: &[f64], diverged: bool) -> Result<()> {
        if ratios.len() != self.sum.len() {
            return Err(Error::param(format!(
                "trace length {} does not match {}",
                ratios.len(),
                self.sum.len()
            )));
        }
        for (s, r) in self.sum.iter_mut().zip(ratios) {
            *s += r;
        }
        self.count += 1;
        self.diverged |= diverged;
        Ok(())
    }

    pub fn add(&mut self, trace: &NmsdTrace) -> Result<()> {
        if trace.label != self.label {
            return Err(Error::param(format!(
                "cannot average trace `{}` into `{}`",
                trace.label, self.label
            )));
        }
        let ratios: Vec<f64> = trace
            .values_db
            .iter()
            .map(|v| 10f64.powf(v / 10.0))
            .collect();
        self.add_linear(&ratios, trace.diverged)
    }

    pub fn finish(self) -> Result<NmsdTrace> {
        if self.count == 0 {
            return Err(Error::param("no traces to average"));
        }
        let n = self.count as f64;
        let values_db = self.sum.iter().map(|s| ratio_to_db(s / n)).collect();
        Ok(NmsdTrace::new(self.label, values_db, self.diverged))
    }
}

/// Pointwise mean of traces in the linear deviation domain.
pub fn average_traces(traces: &[NmsdTrace]) -> Result<NmsdTrace> {
    let first = traces
        .first()
        .ok_or_else(|| Error::param("no traces to average"))?;
    if first.is_empty() {
        return Err(Error::param("traces must be non-empty"));
    }
    let mut acc = LinearAccumulator::new(first.label.clone(), first.len());
    for t in traces {
        acc.add(t)?;
    }
    acc.finish()
}

/// First block index at which a trace is at or below `level_db`.
pub fn first_crossing(values_db: &[f64], level_db: f64) -> Option<usize> {
    values_db.iter().position(|&v| v <= level_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmsd_values() {
        let w_o = [1.0, -2.0, 0.5];
        assert_eq!(nmsd(&w_o, &[0.0; 3]).unwrap(), 0.0);
        assert_eq!(nmsd(&w_o, &w_o).unwrap(), -400.0);
        // ‖w_o‖² = 5.25; deviation 0.525 on the first tap
        let w = [1.0 - 0.525f64.sqrt(), -2.0, 0.5];
        assert!((nmsd(&w_o, &w).unwrap() + 10.0).abs() < 1e-12);
        assert!(nmsd(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(nmsd(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn huge_deviation_clamps_high() {
        assert_eq!(nmsd(&[1e-100], &[1e100]).unwrap(), 400.0);
        assert_eq!(ratio_to_db(f64::NAN), 400.0);
    }

    #[test]
    fn steady_state_windows() {
        assert_eq!(steady_state(&[-25.0; 800], 500).unwrap(), -25.0);
        let mut t = vec![3.0; 100];
        t.extend(std::iter::repeat_n(-10.0, 500));
        assert_eq!(steady_state(&t, 500).unwrap(), -10.0);
        let ramp: Vec<f64> = (0..500).map(|i| -20.0 - 10.0 * i as f64 / 499.0).collect();
        assert!((steady_state(&ramp, 500).unwrap() + 25.0).abs() < 1e-12);
        assert!(steady_state(&[1.0; 10], 500).is_err());
        assert!(steady_state(&[1.0; 10], 0).is_err());
    }

    #[test]
    fn averaging_is_linear_domain() {
        let a = NmsdTrace::new("x", vec![-10.0], false);
        let b = NmsdTrace::new("x", vec![-20.0], true);
        let avg = average_traces(&[a.clone(), b]).unwrap();
        let expect = 10.0 * ((0.1 + 0.01) / 2.0f64).log10();
        assert!((avg.values_db[0] - expect).abs() < 1e-12);
        assert!((avg.values_db[0] + 12.596).abs() < 1e-3);
        assert!(avg.diverged);

        let single = average_traces(std::slice::from_ref(&a)).unwrap();
        assert!((single.values_db[0] + 10.0).abs() < 1e-9);
        assert!(!single.diverged);
    }

    #[test]
    fn averaging_rejects_mismatch() {
        let a = NmsdTrace::new("x", vec![-10.0, -11.0], false);
        let short = NmsdTrace::new("x", vec![-10.0], false);
        let other = NmsdTrace::new("y", vec![-10.0, -11.0], false);
        assert!(average_traces(&[a.clone(), short]).is_err());
        assert!(average_traces(&[a, other]).is_err());
        assert!(average_traces(&[]).is_err());
    }

    #[test]
    fn crossing() {
        assert_eq!(first_crossing(&[0.0, -5.0, -21.0, -19.0], -20.0), Some(2));
        assert_eq!(first_crossing(&[0.0], -20.0), None);
    }
}
