//! Sample path containers.

use std::io::Write;

use crate::error::{invalid, Result};

/// Event times of a point process observed on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProcessPath {
    rate: f64,
    horizon: f64,
    events: Vec<f64>,
}

impl PointProcessPath {
    pub fn new(rate: f64, horizon: f64, events: Vec<f64>) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid(format!("rate must be positive, got {rate}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        let mut prev = 0.0;
        for (i, &t) in events.iter().enumerate() {
            if !(t > prev) {
                return Err(invalid(format!(
                    "event {i} at {t} does not strictly follow {prev}"
                )));
            }
            prev = t;
        }
        if prev > horizon {
            return Err(invalid(format!("event at {prev} lies beyond horizon {horizon}")));
        }
        Ok(Self {
            rate,
            horizon,
            events,
        })
    }

    pub(crate) fn from_sorted(rate: f64, horizon: f64, events: Vec<f64>) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0] < w[1]));
        Self {
            rate,
            horizon,
            events,
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    /// `X_T`.
    pub fn count(&self) -> usize {
        self.events.len()
    }

    /// Right-continuous counting process `X_t = #{t_i <= t}`.
    pub fn count_at(&self, t: f64) -> usize {
        self.events.partition_point(|&e| e <= t)
    }

    /// CSV dump with columns `index,time`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,time")?;
        for (i, t) in self.events.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, t)?;
        }
        Ok(())
    }
}

fn write_grid_csv<W: Write>(values: &[f64], mut out: W) -> std::io::Result<()> {
    let n = (values.len() - 1) as f64;
    writeln!(out, "s,value")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(out, "{},{}", k as f64 / n, v)?;
    }
    Ok(())
}

/// Standard Wiener path on the uniform grid `s_k = k / n_steps` of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    values: Vec<f64>,
}

impl WienerPath {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(invalid("a grid path needs at least 2 steps"));
        }
        if values[0] != 0.0 {
            return Err(invalid(format!("path must start at 0, got {}", values[0])));
        }
        Ok(Self { values })
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn endpoint(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Value at grid point nearest to `s`.
    pub fn at(&self, s: f64) -> f64 {
        let k = (s.clamp(0.0, 1.0) * self.n_steps() as f64).round() as usize;
        self.values[k]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_grid_csv(&self.values, out)
    }
}

/// Ornstein-Uhlenbeck path `dY = −u·Y ds + dW`, `Y(0) = 0`, on the grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuPath {
    drift: f64,
    values: Vec<f64>,
}

impl OuPath {
    pub(crate) fn from_values(drift: f64, values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 3 && values[0] == 0.0);
        Self { drift, values }
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn endpoint(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_grid_csv(&self.values, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        assert!(PointProcessPath::new(1.0, 3.0, vec![1.0, 2.0]).is_ok());
        assert!(PointProcessPath::new(1.0, 3.0, vec![2.0, 1.0]).is_err());
        assert!(PointProcessPath::new(1.0, 3.0, vec![1.0, 1.0]).is_err());
        assert!(PointProcessPath::new(1.0, 3.0, vec![0.0]).is_err());
        assert!(PointProcessPath::new(1.0, 3.0, vec![3.5]).is_err());
        assert!(PointProcessPath::new(1.0, 0.0, vec![]).is_err());
        assert!(PointProcessPath::new(0.0, 1.0, vec![]).is_err());
    }

    #[test]
    fn counting_is_right_continuous() {
        let p = PointProcessPath::new(1.0, 3.0, vec![1.0, 2.0]).unwrap();
        assert_eq!(p.count_at(0.999), 0);
        assert_eq!(p.count_at(1.0), 1);
        assert_eq!(p.count_at(2.5), 2);
        assert_eq!(p.count(), 2);
    }

    #[test]
    fn csv_dumps() {
        let p = PointProcessPath::new(1.0, 3.0, vec![1.0, 2.5]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,time\n1,1\n2,2.5\n");

        let w = WienerPath::new(vec![0.0, 0.5, -0.25]).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,value\n0,0\n0.5,0.5\n1,-0.25\n");
        assert!(WienerPath::new(vec![0.0, 1.0]).is_err());
        assert!(WienerPath::new(vec![1.0, 1.0, 1.0]).is_err());
    }
}
