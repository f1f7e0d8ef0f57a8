//! Power-law deposition model: bead height as a function of torch speed.
//!
//! The model is `Δh = c · v_T^a` with `c = e^b`, fitted as a line in log-log
//! space. `a` is negative for any physical parameter set: driving the torch
//! faster spreads the same wire feed over more distance, so the bead gets
//! shorter. That monotonicity is what makes the inverse well defined and is
//! relied on throughout the planner and the solver.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the log-linear deposition model, `ln Δh = a ln v_T + b`.
///
/// Heights are in mm, speeds in mm/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCoefficients {
    /// Power-law exponent (slope in log-log space), negative for a physical fit.
    pub a: f64,
    /// Log-space intercept; `e^b` is the bead height at 1 mm/s.
    pub b: f64,
    /// Free-form tag, e.g. "cold" or "hot".
    pub label: String,
}

impl ModelCoefficients {
    pub fn new(a: f64, b: f64, label: impl Into<String>) -> Self {
        ModelCoefficients {
            a,
            b,
            label: label.into(),
        }
    }

    /// Checks the invariants required of a planning model: finite
    /// coefficients and a strictly decreasing height-speed relation.
    pub fn validated(self) -> Result<Self> {
        if !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::Domain(format!(
                "model '{}' has non-finite coefficients (a={}, b={})",
                self.label, self.a, self.b
            )));
        }
        if self.a >= 0.0 {
            return Err(Error::Domain(format!(
                "model '{}' must be decreasing in torch speed (a = {}, expected a < 0)",
                self.label, self.a
            )));
        }
        Ok(self)
    }

    /// Bead height deposited at torch speed `v_t` (mm/s).
    pub fn predict(&self, v_t: f64) -> Result<f64> {
        if !(v_t > 0.0) || !v_t.is_finite() {
            return Err(Error::Domain(format!(
                "torch speed must be positive and finite, got {v_t}"
            )));
        }
        Ok((self.b + self.a * v_t.ln()).exp())
    }

    /// Torch speed that deposits height `dh` (mm).
    pub fn invert(&self, dh: f64) -> Result<f64> {
        if !(dh > 0.0) || !dh.is_finite() {
            return Err(Error::Domain(format!(
                "deposition height must be positive and finite, got {dh}"
            )));
        }
        if self.a == 0.0 {
            return Err(Error::NonInvertible);
        }
        Ok(((dh.ln() - self.b) / self.a).exp())
    }

    /// Height and its derivative with respect to speed, `(f(v), f'(v))`.
    ///
    /// Caller guarantees `v > 0`; used on the solver hot path where the
    /// speed is already confined to the process box.
    pub(crate) fn eval_with_derivative(&self, v: f64) -> (f64, f64) {
        let f = (self.b + self.a * v.ln()).exp();
        (f, self.a * f / v)
    }
}

impl fmt::Display for ModelCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: a={:.6}, b={:.6}", self.label, self.a, self.b)
    }
}

/// One calibration observation: torch speed and the measured bead height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    /// Torch speed, mm/s.
    pub v_t: f64,
    /// Measured deposition height, mm.
    pub dh: f64,
}

impl CalibrationSample {
    pub fn new(v_t: f64, dh: f64) -> Result<Self> {
        if !(v_t > 0.0) || !v_t.is_finite() || !(dh > 0.0) || !dh.is_finite() {
            return Err(Error::Domain(format!(
                "calibration sample requires positive finite v_t and dh, got ({v_t}, {dh})"
            )));
        }
        Ok(CalibrationSample { v_t, dh })
    }
}

/// Result of fitting the log-linear model to calibration data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub coefficients: ModelCoefficients,
    /// Coefficient of determination of the log-space regression.
    pub r_squared: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual_norm: f64,
    pub n_samples: usize,
}

/// Ordinary least squares on `(ln v_t, ln Δh)` pairs.
///
/// Rejects non-positive samples outright rather than dropping them: a
/// silently filtered fit would be biased with no visible trace.
pub fn calibrate(samples: &[CalibrationSample], label: impl Into<String>) -> Result<CalibrationFit> {
    for (i, s) in samples.iter().enumerate() {
        if !(s.v_t > 0.0) || !s.v_t.is_finite() || !(s.dh > 0.0) || !s.dh.is_finite() {
            return Err(Error::Domain(format!(
                "sample {i} has non-positive or non-finite values (v_t={}, dh={})",
                s.v_t, s.dh
            )));
        }
    }
    if samples.len() < 2 {
        return Err(Error::RankDeficient(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.v_t.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.dh.ln()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    if sxx == 0.0 {
        return Err(Error::RankDeficient(
            "need at least 2 distinct torch speeds".into(),
        ));
    }
    let a = sxy / sxx;
    let b = y_mean - a * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (a * x + b)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        // All heights identical; a zero-residual fit is a perfect one.
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    };
    Ok(CalibrationFit {
        coefficients: ModelCoefficients::new(a, b, label),
        r_squared,
        residual_norm: ss_res.sqrt(),
        n_samples: samples.len(),
    })
}

/// Process envelope: torch speed bounds and the deposition heights they
/// admit.
///
/// Because the model is decreasing, the slow speed bound produces the
/// tallest bead: `dh_max = f(v_t_min)` and `dh_min = f(v_t_max)`. Both
/// pairs are stored explicitly and only the ordering is asserted, so an
/// envelope narrowed by more than one model remains representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessBounds {
    pub v_t_min: f64,
    pub v_t_max: f64,
    pub dh_min: f64,
    pub dh_max: f64,
}

impl ProcessBounds {
    /// Derives the height bounds from a model over a speed range.
    pub fn from_model(model: &ModelCoefficients, v_t_min: f64, v_t_max: f64) -> Result<Self> {
        let model = model.clone().validated()?;
        Self::with_heights(
            v_t_min,
            v_t_max,
            model.predict(v_t_max)?,
            model.predict(v_t_min)?,
        )
    }

    /// Builds bounds with explicit heights; validates ordering only.
    pub fn with_heights(v_t_min: f64, v_t_max: f64, dh_min: f64, dh_max: f64) -> Result<Self> {
        if !(v_t_min > 0.0) || !(v_t_max > v_t_min) || !v_t_max.is_finite() {
            return Err(Error::Config(format!(
                "torch speed bounds must satisfy 0 < v_t_min < v_t_max, got [{v_t_min}, {v_t_max}]"
            )));
        }
        if !(dh_min > 0.0) || !(dh_max > dh_min) || !dh_max.is_finite() {
            return Err(Error::Config(format!(
                "height bounds must satisfy 0 < dh_min < dh_max, got [{dh_min}, {dh_max}]"
            )));
        }
        Ok(ProcessBounds {
            v_t_min,
            v_t_max,
            dh_min,
            dh_max,
        })
    }

    /// Envelope admissible under both of two envelopes sharing a speed range.
    ///
    /// Used when one nominal plan must be manufacturable under two models.
    pub fn intersect(&self, other: &ProcessBounds) -> Result<Self> {
        if self.v_t_min != other.v_t_min || self.v_t_max != other.v_t_max {
            return Err(Error::Config(format!(
                "cannot intersect envelopes with different speed ranges: [{}, {}] vs [{}, {}]",
                self.v_t_min, self.v_t_max, other.v_t_min, other.v_t_max
            )));
        }
        let dh_min = self.dh_min.max(other.dh_min);
        let dh_max = self.dh_max.min(other.dh_max);
        if dh_min >= dh_max {
            return Err(Error::GeometryInfeasible(format!(
                "no deposition height is achievable under both models: \
                 [{:.4}, {:.4}] ∩ [{:.4}, {:.4}] is empty",
                self.dh_min, self.dh_max, other.dh_min, other.dh_max
            )));
        }
        ProcessBounds::with_heights(self.v_t_min, self.v_t_max, dh_min, dh_max)
    }

    pub fn clamp_speed(&self, v: f64) -> f64 {
        v.clamp(self.v_t_min, self.v_t_max)
    }

    pub fn clamp_height(&self, dh: f64) -> f64 {
        dh.clamp(self.dh_min, self.dh_max)
    }
}

/// Parses calibration samples from two-column CSV text with header `v_t,dh`.
///
/// `origin` names the source in error messages; line numbers are 1-based
/// and include the header.
pub fn parse_samples(reader: impl Read, origin: &str) -> Result<Vec<CalibrationSample>> {
    let reader = BufReader::new(reader);
    let mut samples = Vec::new();
    let mut lines = reader.lines().enumerate();

    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };

    match lines.next() {
        Some((_, Ok(header))) => {
            let cols: Vec<&str> = header.split(',').map(str::trim).collect();
            if cols != ["v_t", "dh"] {
                return Err(parse_err(
                    1,
                    format!("expected header 'v_t,dh', got '{}'", header.trim()),
                ));
            }
        }
        Some((_, Err(e))) => return Err(parse_err(1, e.to_string())),
        None => return Err(parse_err(1, "empty file".into())),
    }

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(parse_err(
                line_no,
                format!("expected 2 comma-separated fields, got {}", cols.len()),
            ));
        }
        let v_t: f64 = cols[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("'{}' is not a number", cols[0])))?;
        let dh: f64 = cols[1]
            .parse()
            .map_err(|_| parse_err(line_no, format!("'{}' is not a number", cols[1])))?;
        samples.push(
            CalibrationSample::new(v_t, dh)
                .map_err(|e| parse_err(line_no, e.to_string()))?,
        );
    }
    Ok(samples)
}

pub fn read_samples(path: &Path) -> Result<Vec<CalibrationSample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_samples(file, &path.display().to_string())
}

/// Fitted-coefficient document written by calibration and read back by runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientsDoc {
    pub a: f64,
    pub b: f64,
    pub label: String,
    pub r_squared: f64,
}

impl From<&CalibrationFit> for CoefficientsDoc {
    fn from(fit: &CalibrationFit) -> Self {
        CoefficientsDoc {
            a: fit.coefficients.a,
            b: fit.coefficients.b,
            label: fit.coefficients.label.clone(),
            r_squared: fit.r_squared,
        }
    }
}

pub fn write_coefficients(fit: &CalibrationFit, path: &Path) -> Result<()> {
    let doc = CoefficientsDoc::from(fit);
    let text = toml::to_string_pretty(&doc)
        .map_err(|e| Error::Config(format!("cannot serialize coefficients: {e}")))?;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_coefficients(path: &Path) -> Result<CoefficientsDoc> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn cold() -> ModelCoefficients {
        ModelCoefficients::new(-0.4619, 1.647, "cold")
    }

    pub(crate) fn hot() -> ModelCoefficients {
        ModelCoefficients::new(-0.3700, 1.215, "hot")
    }

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual} (|diff| = {})",
            (actual - expected).abs()
        );
    }

    #[test]
    fn predict_matches_scalar_formula() {
        // Frozen from direct evaluation of exp(b + a ln v).
        assert_close(cold().predict(1.0).unwrap(), 5.1913822956936855, 1e-12);
        assert_close(hot().predict(10.0).unwrap(), 1.437698420178175, 1e-12);
        // Zero exponent, zero intercept: unit height at any speed.
        let flat = ModelCoefficients::new(0.0, 0.0, "flat");
        assert_close(flat.predict(7.3).unwrap(), 1.0, 0.0);
    }

    #[test]
    fn predict_rejects_non_positive_speed() {
        assert!(matches!(cold().predict(0.0), Err(Error::Domain(_))));
        assert!(matches!(cold().predict(-3.0), Err(Error::Domain(_))));
        assert!(matches!(cold().predict(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn invert_matches_scalar_formula() {
        // Inverse of the unit-speed prediction.
        let dh = (1.647f64).exp();
        assert_close(cold().invert(dh).unwrap(), 1.0, 1e-12);
        // Frozen from exp((ln 2 - 1.647) / -0.4619), verified by roundtrip.
        let v = cold().invert(2.0).unwrap();
        assert_close(v, 7.885798438587435, 1e-12);
        assert_close(cold().predict(v).unwrap(), 2.0, 1e-12);
    }

    #[test]
    fn invert_error_paths() {
        assert!(matches!(cold().invert(0.0), Err(Error::Domain(_))));
        assert!(matches!(cold().invert(-1.0), Err(Error::Domain(_))));
        let flat = ModelCoefficients::new(0.0, 0.5, "flat");
        assert!(matches!(flat.invert(1.0), Err(Error::NonInvertible)));
    }

    #[test]
    fn roundtrip_identity_over_speed_grid() {
        let m = cold();
        for i in 0..100 {
            let v = 1.0 + 19.0 * (i as f64) / 99.0;
            let back = m.invert(m.predict(v).unwrap()).unwrap();
            assert!(
                (back - v).abs() <= 1e-10 * v,
                "roundtrip failed at v={v}: {back}"
            );
        }
    }

    #[test]
    fn log_linearity_three_point_collinearity() {
        let m = hot();
        let (v1, v2, v3) = (2.0f64, 5.0f64, 13.0f64);
        let p = |v: f64| m.predict(v).unwrap().ln();
        let (x1, x2, x3) = (v1.ln(), v2.ln(), v3.ln());
        let slope_12 = (p(v2) - p(v1)) / (x2 - x1);
        let slope_13 = (p(v3) - p(v1)) / (x3 - x1);
        assert_close(slope_12, slope_13, 1e-12);
        assert_close(slope_12, m.a, 1e-12);
    }

    #[test]
    fn calibrate_recovers_noiseless_coefficients() {
        let truth = cold();
        let samples: Vec<CalibrationSample> = (1..=20)
            .map(|v| {
                let v = v as f64;
                CalibrationSample::new(v, truth.predict(v).unwrap()).unwrap()
            })
            .collect();
        let fit = calibrate(&samples, "refit").unwrap();
        assert_close(fit.coefficients.a, truth.a, 1e-9);
        assert_close(fit.coefficients.b, truth.b, 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert!(fit.residual_norm < 1e-9);
    }

    #[test]
    fn calibrate_two_points_is_exact_line() {
        // Two points in log-log space determine the line exactly.
        let m = ModelCoefficients::new(-0.25, 0.8, "x");
        let samples = vec![
            CalibrationSample::new(2.0, m.predict(2.0).unwrap()).unwrap(),
            CalibrationSample::new(9.0, m.predict(9.0).unwrap()).unwrap(),
        ];
        let fit = calibrate(&samples, "two").unwrap();
        assert_close(fit.coefficients.a, -0.25, 1e-12);
        assert_close(fit.coefficients.b, 0.8, 1e-12);
    }

    #[test]
    fn calibrate_noisy_recovery_rate() {
        // Monte Carlo: log-space noise sigma = 0.05, slope recovered within
        // +/- 0.05 in at least 95 of 100 seeds. The OLS slope sd here is
        // ~0.014, so 0.05 is a 3.5-sigma band.
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let truth = cold();
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<CalibrationSample> = (1..=20)
                .map(|v| {
                    let v = v as f64;
                    let dh = (truth.predict(v).unwrap().ln() + noise.sample(&mut rng)).exp();
                    CalibrationSample::new(v, dh).unwrap()
                })
                .collect();
            let fit = calibrate(&samples, "mc").unwrap();
            if (fit.coefficients.a - truth.a).abs() <= 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "slope recovered in only {hits}/100 seeds");
    }

    #[test]
    fn calibrate_error_paths() {
        let one = vec![CalibrationSample::new(3.0, 2.0).unwrap()];
        assert!(matches!(calibrate(&one, "x"), Err(Error::RankDeficient(_))));

        // Same speed twice: no slope information.
        let same = vec![
            CalibrationSample::new(3.0, 2.0).unwrap(),
            CalibrationSample::new(3.0, 2.5).unwrap(),
        ];
        assert!(matches!(calibrate(&same, "x"), Err(Error::RankDeficient(_))));

        let bad = vec![
            CalibrationSample { v_t: 3.0, dh: 2.0 },
            CalibrationSample { v_t: -1.0, dh: 2.0 },
        ];
        assert!(matches!(calibrate(&bad, "x"), Err(Error::Domain(_))));
    }

    #[test]
    fn bounds_from_model_orders_heights() {
        let b = ProcessBounds::from_model(&cold(), 3.0, 17.0).unwrap();
        // Slow torch builds the tallest bead.
        assert_close(b.dh_max, 3.1253647108925753, 1e-12);
        assert_close(b.dh_min, 1.4026155679081365, 1e-12);
        assert!(b.dh_min < b.dh_max);
    }

    #[test]
    fn bounds_reject_bad_ranges() {
        assert!(ProcessBounds::with_heights(0.0, 17.0, 1.0, 3.0).is_err());
        assert!(ProcessBounds::with_heights(5.0, 5.0, 1.0, 3.0).is_err());
        assert!(ProcessBounds::with_heights(3.0, 17.0, 3.0, 1.0).is_err());
        let rising = ModelCoefficients::new(0.2, 0.0, "rising");
        assert!(ProcessBounds::from_model(&rising, 3.0, 17.0).is_err());
    }

    #[test]
    fn bounds_intersection() {
        let c = ProcessBounds::from_model(&cold(), 3.0, 17.0).unwrap();
        let h = ProcessBounds::from_model(&hot(), 3.0, 17.0).unwrap();
        let i = c.intersect(&h).unwrap();
        assert_close(i.dh_min, c.dh_min, 0.0); // cold's floor is higher
        assert_close(i.dh_max, h.dh_max, 0.0); // hot's ceiling is lower

        // Narrow speed window where the two images do not overlap.
        let c2 = ProcessBounds::from_model(&cold(), 3.0, 6.0).unwrap();
        let h2 = ProcessBounds::from_model(&hot(), 3.0, 6.0).unwrap();
        assert!(matches!(
            c2.intersect(&h2),
            Err(Error::GeometryInfeasible(_))
        ));
    }

    #[test]
    fn parse_samples_happy_path_and_errors() {
        let good = "v_t,dh\n1.0,5.19\n2.0,3.77\n";
        let parsed = parse_samples(good.as_bytes(), "mem").unwrap();
        assert_eq!(parsed.len(), 2);
        assert_close(parsed[1].v_t, 2.0, 0.0);

        let bad_header = "speed,height\n1.0,5.19\n";
        match parse_samples(bad_header.as_bytes(), "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }

        // Row 7 (header + 6 data rows) is malformed.
        let mut text = String::from("v_t,dh\n");
        for v in 1..=5 {
            text.push_str(&format!("{v}.0,2.0\n"));
        }
        text.push_str("6.0,not_a_number\n");
        match parse_samples(text.as_bytes(), "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }

        let negative = "v_t,dh\n-1.0,2.0\n";
        assert!(matches!(
            parse_samples(negative.as_bytes(), "mem"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn coefficients_doc_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coeffs.toml");
        let fit = CalibrationFit {
            coefficients: cold(),
            r_squared: 0.9987,
            residual_norm: 0.012,
            n_samples: 20,
        };
        write_coefficients(&fit, &path).unwrap();
        let doc = read_coefficients(&path).unwrap();
        assert_eq!(doc.a, fit.coefficients.a);
        assert_eq!(doc.b, fit.coefficients.b);
        assert_eq!(doc.label, "cold");
        assert_eq!(doc.r_squared, 0.9987);
    }

    proptest! {
        #[test]
        fn prop_inverse_identity_both_ways(
            a in -1.5f64..-0.05,
            b in -0.5f64..2.5,
            v in 0.5f64..40.0,
            dh in 0.2f64..8.0,
        ) {
            let m = ModelCoefficients::new(a, b, "p");
            let v_back = m.invert(m.predict(v)?)?;
            prop_assert!((v_back - v).abs() <= 1e-10 * v.max(1.0));
            let dh_back = m.predict(m.invert(dh)?)?;
            prop_assert!((dh_back - dh).abs() <= 1e-10 * dh.max(1.0));
        }

        #[test]
        fn prop_monotone_decreasing(
            a in -1.5f64..-0.05,
            b in -0.5f64..2.5,
            v1 in 0.5f64..40.0,
            gap in 0.01f64..10.0,
        ) {
            let m = ModelCoefficients::new(a, b, "p");
            let v2 = v1 + gap;
            prop_assert!(m.predict(v1)? > m.predict(v2)?);
        }

        #[test]
        fn prop_calibration_idempotent(
            a in -1.2f64..-0.1,
            b in 0.0f64..2.0,
        ) {
            let truth = ModelCoefficients::new(a, b, "t");
            let samples: Vec<CalibrationSample> = (1..=12)
                .map(|v| {
                    let v = v as f64 * 1.5;
                    CalibrationSample::new(v, truth.predict(v).unwrap()).unwrap()
                })
                .collect();
            let fit = calibrate(&samples, "refit")?;
            prop_assert!((fit.coefficients.a - a).abs() <= 1e-9);
            prop_assert!((fit.coefficients.b - b).abs() <= 1e-9);
        }
    }
}
