use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    /// Seconds.
    pub t: f64,
    /// Watts.
    pub watts: f64,
}

/// Power draw over time, strictly increasing in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSampleSeries {
    samples: Vec<PowerSample>,
}

impl PowerSampleSeries {
    pub fn new(samples: Vec<PowerSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.watts.is_finite()) {
                return Err(Error::Energy(format!("sample {i} is not finite")));
            }
            if s.watts < 0.0 {
                return Err(Error::Energy(format!(
                    "sample {i} has negative power {}",
                    s.watts
                )));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::Energy(format!(
                    "sample times must strictly increase (sample {i} at t={})",
                    s.t
                )));
            }
        }
        Ok(PowerSampleSeries { samples })
    }

    /// Samples from current and supply voltage: `p = i * v`.
    pub fn from_current_voltage(rows: &[(f64, f64, f64)]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|&(t, amps, volts)| PowerSample {
                    t,
                    watts: amps * volts,
                })
                .collect(),
        )
    }

    /// Constant draw of `watts` over `[0, seconds]`.
    pub fn constant(watts: f64, seconds: f64) -> Result<Self> {
        Self::new(vec![
            PowerSample { t: 0.0, watts },
            PowerSample { t: seconds, watts },
        ])
    }

    pub fn samples(&self) -> &[PowerSample] {
        &self.samples
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    /// Parses a CSV power log. Two columns are `(t, watts)`, three are
    /// `(t, amperes, volts)`; a non-numeric first row is taken as a header.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(r);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse).collect();
            match parsed {
                Ok(v) => rows.push(v),
                Err(_) if i == 0 => continue,
                Err(_) => {
                    return Err(Error::Energy(format!(
                        "power log row {}: not numeric",
                        i + 1
                    )))
                }
            }
        }
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Energy("power log rows differ in width".into()));
        }
        match width {
            2 => Self::new(
                rows.iter()
                    .map(|r| PowerSample {
                        t: r[0],
                        watts: r[1],
                    })
                    .collect(),
            ),
            3 => Self::from_current_voltage(
                &rows.iter().map(|r| (r[0], r[1], r[2])).collect::<Vec<_>>(),
            ),
            0 => Err(Error::Energy("power log has no samples".into())),
            w => Err(Error::Energy(format!(
                "power log has {w} columns, expected (t,p) or (t,i,v)"
            ))),
        }
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(f)
    }

    fn power_at(&self, t: f64) -> f64 {
        let i = self.samples.partition_point(|s| s.t <= t);
        if i == 0 {
            return self.samples[0].watts;
        }
        if i == self.samples.len() {
            return self.samples[i - 1].watts;
        }
        let (a, b) = (self.samples[i - 1], self.samples[i]);
        a.watts + (b.watts - a.watts) * (t - a.t) / (b.t - a.t)
    }
}

/// Trapezoidal integral of power over `[t0, t1]`, in joules. The series is
/// treated as piecewise linear, interpolating at the interval ends.
pub fn integrate_energy(series: &PowerSampleSeries, t0: f64, t1: f64) -> Result<f64> {
    let s = series.samples();
    if s.len() < 2 {
        return Err(Error::Energy(format!(
            "need at least 2 power samples, have {}",
            s.len()
        )));
    }
    if t1.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Energy(format!("empty interval [{t0}, {t1}]")));
    }
    let (first, last) = (s[0].t, s[s.len() - 1].t);
    if t0 < first || t1 > last {
        return Err(Error::Energy(format!(
            "interval [{t0}, {t1}] not covered by samples spanning [{first}, {last}]"
        )));
    }
    let mut points = vec![PowerSample {
        t: t0,
        watts: series.power_at(t0),
    }];
    points.extend(s.iter().copied().filter(|p| p.t > t0 && p.t < t1));
    points.push(PowerSample {
        t: t1,
        watts: series.power_at(t1),
    });
    Ok(points
        .windows(2)
        .map(|w| 0.5 * (w[0].watts + w[1].watts) * (w[1].t - w[0].t))
        .sum())
}

/// Energy per synaptic event in microjoules.
pub fn per_event_energy(joules: f64, events: u64) -> Result<f64> {
    if events == 0 {
        return Err(Error::Energy("no synaptic events to divide by".into()));
    }
    Ok(1e6 * joules / events as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub wall_seconds: f64,
    pub joules: f64,
    pub mean_watts: f64,
    pub synaptic_events: u64,
    pub microjoules_per_event: f64,
    /// Constant draw removed before integrating; zero reports the whole
    /// system's consumption.
    pub baseline_watts: f64,
}

/// Energy-to-solution over `[t0, t1]`, optionally net of a baseline draw.
pub fn energy_report(
    series: &PowerSampleSeries,
    t0: f64,
    t1: f64,
    synaptic_events: u64,
    baseline_watts: f64,
) -> Result<EnergyReport> {
    if !(baseline_watts.is_finite() && baseline_watts >= 0.0) {
        return Err(Error::Energy(format!("bad baseline {baseline_watts} W")));
    }
    let wall_seconds = t1 - t0;
    let joules = integrate_energy(series, t0, t1)? - baseline_watts * wall_seconds;
    Ok(EnergyReport {
        wall_seconds,
        joules,
        mean_watts: joules / wall_seconds,
        synaptic_events,
        microjoules_per_event: per_event_energy(joules, synaptic_events)?,
        baseline_watts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn server_constant_draw() {
        let s = PowerSampleSeries::constant(253.0, 9.1).unwrap();
        let j = integrate_energy(&s, 0.0, 9.1).unwrap();
        assert!((j - 2302.3).abs() < 1e-9);
    }

    #[test]
    fn embedded_constant_draw() {
        let s = PowerSampleSeries::constant(17.6, 30.0).unwrap();
        assert!((integrate_energy(&s, 0.0, 30.0).unwrap() - 528.0).abs() < 1e-9);
    }

    #[test]
    fn ramp_is_a_triangle() {
        let s = PowerSampleSeries::new(vec![
            PowerSample { t: 0.0, watts: 0.0 },
            PowerSample {
                t: 10.0,
                watts: 100.0,
            },
        ])
        .unwrap();
        assert!((integrate_energy(&s, 0.0, 10.0).unwrap() - 500.0).abs() < 1e-12);
        // Sub-interval with interpolated ends: 0.5*(20+60)*4.
        assert!((integrate_energy(&s, 2.0, 6.0).unwrap() - 160.0).abs() < 1e-12);
    }

    #[test]
    fn per_event_figures() {
        assert!((per_event_energy(528.0, 235_000_000).unwrap() - 2.2468).abs() < 1e-3);
        assert!((per_event_energy(2302.3, 235_000_000).unwrap() - 9.797).abs() < 1e-3);
        assert_eq!(per_event_energy(0.0, 10).unwrap(), 0.0);
        assert!(per_event_energy(1.0, 0).is_err());
    }

    #[test]
    fn integration_errors() {
        let one = PowerSampleSeries::new(vec![PowerSample { t: 0.0, watts: 1.0 }]).unwrap();
        assert!(integrate_energy(&one, 0.0, 1.0).is_err());
        let s = PowerSampleSeries::constant(1.0, 5.0).unwrap();
        assert!(integrate_energy(&s, 2.0, 2.0).is_err());
        assert!(integrate_energy(&s, 3.0, 1.0).is_err());
        assert!(integrate_energy(&s, -1.0, 1.0).is_err());
    }

    #[test]
    fn series_validation() {
        let bad_t = vec![
            PowerSample { t: 1.0, watts: 1.0 },
            PowerSample { t: 1.0, watts: 1.0 },
        ];
        assert!(PowerSampleSeries::new(bad_t).is_err());
        let bad_p = vec![PowerSample {
            t: 0.0,
            watts: -1.0,
        }];
        assert!(PowerSampleSeries::new(bad_p).is_err());
    }

    #[test]
    fn csv_schemas() {
        let tp = "t,p\n0,10\n1,10\n2,20\n";
        let s = PowerSampleSeries::from_csv(tp.as_bytes()).unwrap();
        assert_eq!(s.samples().len(), 3);
        assert!((integrate_energy(&s, 0.0, 2.0).unwrap() - 25.0).abs() < 1e-12);

        let tiv = "t,i,v\n0,1.15,220\n9.1,1.15,220\n";
        let s = PowerSampleSeries::from_csv(tiv.as_bytes()).unwrap();
        assert!((s.samples()[0].watts - 253.0).abs() < 1e-9);

        let headerless = "0,5\n4,5\n";
        let s = PowerSampleSeries::from_csv(headerless.as_bytes()).unwrap();
        assert!((integrate_energy(&s, 0.0, 4.0).unwrap() - 20.0).abs() < 1e-12);

        assert!(PowerSampleSeries::from_csv("t,a,b,c\n0,1,2,3\n".as_bytes()).is_err());
        assert!(PowerSampleSeries::from_csv("t,p\n".as_bytes()).is_err());
    }

    #[test]
    fn baseline_subtraction() {
        let s = PowerSampleSeries::constant(253.0, 9.1).unwrap();
        let r = energy_report(&s, 0.0, 9.1, 235_000_000, 126.5).unwrap();
        assert!((r.joules - 2302.3 / 2.0).abs() < 1e-9);
        assert!((r.mean_watts - 126.5).abs() < 1e-9);
        assert!((r.joules - r.mean_watts * r.wall_seconds).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn trapezoid_exact_on_piecewise_linear(
            knots in prop::collection::vec((0.01f64..5.0, 0.0f64..500.0), 2..30)
        ) {
            let mut t = 0.0;
            let samples: Vec<PowerSample> = knots
                .iter()
                .map(|&(dt, w)| { t += dt; PowerSample { t, watts: w } })
                .collect();
            let series = PowerSampleSeries::new(samples.clone()).unwrap();
            let (a, b) = series.span().unwrap();
            // Exact area of the polyline, segment by segment.
            let exact: f64 = samples
                .windows(2)
                .map(|w| (w[1].t - w[0].t) * (w[0].watts + w[1].watts) / 2.0)
                .sum();
            let got = integrate_energy(&series, a, b).unwrap();
            prop_assert!((got - exact).abs() <= 1e-9 * exact.abs().max(1.0));
        }
    }
}
