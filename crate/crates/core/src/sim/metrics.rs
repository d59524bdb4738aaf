use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{EpisodeLog, SimError};

/// Map units per real metre, per axis: `k_sh` along x, `k_sv` along z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration {
    pub k_sh: f64,
    pub k_sv: f64,
}

impl Default for ScaleCalibration {
    /// Factors measured on the desk-scale prototype.
    fn default() -> Self {
        ScaleCalibration {
            k_sh: 0.2921,
            k_sv: 0.2628,
        }
    }
}

/// Least-squares slope through the origin, `Σ mᵢdᵢ / Σ dᵢ²`, for pairs of
/// `(real distance d, measured distance m)`.
pub fn calibrate_scale(pairs: &[(f64, f64)]) -> Result<f64, SimError> {
    if pairs.is_empty() {
        return Err(SimError::Calibration("no calibration pairs".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(d, m) in pairs {
        if !(d >= 0.0 && d.is_finite() && m.is_finite()) {
            return Err(SimError::Calibration(format!("invalid pair ({d}, {m})")));
        }
        num += m * d;
        den += d * d;
    }
    if den == 0.0 {
        return Err(SimError::Calibration("all real distances are zero".into()));
    }
    Ok(num / den)
}

/// Reads `real,measured` rows; a non-numeric first line is taken as a header.
pub fn read_calibration_pairs(reader: impl BufRead) -> Result<Vec<(f64, f64)>, SimError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',').map(|s| s.trim().parse::<f64>());
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(d)), Some(Ok(m)), None) => out.push((d, m)),
            _ if i == 0 => continue,
            _ => return Err(SimError::Parse { line: i + 1, msg: format!("expected `real,measured`, got {line:?}") }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseTriple {
    pub x: f64,
    pub z: f64,
    pub track: f64,
}

impl RmseTriple {
    /// Converts camera-unit errors to metres, x by `k_sh` and z by `k_sv`.
    pub fn to_metric(&self, scale: &ScaleCalibration) -> RmseTriple {
        let x = self.x / scale.k_sh;
        let z = self.z / scale.k_sv;
        RmseTriple {
            x,
            z,
            track: x.hypot(z),
        }
    }
}

/// Root-mean-square error between real and expected positions.
pub fn rmse_of<I>(pairs: I) -> Result<RmseTriple, SimError>
where
    I: IntoIterator<Item = ([f64; 2], [f64; 2])>,
{
    let (mut sx, mut sz, mut st, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (real, expected) in pairs {
        let dx = real[0] - expected[0];
        let dz = real[1] - expected[1];
        sx += dx * dx;
        sz += dz * dz;
        st += dx * dx + dz * dz;
        n += 1;
    }
    if n == 0 {
        return Err(SimError::EmptyLog);
    }
    let n = n as f64;
    Ok(RmseTriple {
        x: (sx / n).sqrt(),
        z: (sz / n).sqrt(),
        track: (st / n).sqrt(),
    })
}

pub fn rmse(log: &EpisodeLog) -> Result<RmseTriple, SimError> {
    rmse_of(log.records.iter().map(|r| ([r.x_r, r.z_r], [r.x_e, r.z_e])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(k: f64) -> Vec<(f64, f64)> {
        (1..=7).map(|i| (0.2 * i as f64, k * 0.2 * i as f64)).collect()
    }

    #[test]
    fn exact_lines_recover_slope() {
        for k in [0.2628, 0.2921] {
            let got = calibrate_scale(&line(k)).unwrap();
            assert!((got - k).abs() <= 4.0 * f64::EPSILON * k, "{got} vs {k}");
        }
        assert_eq!(calibrate_scale(&[(1.0, 0.5)]).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(calibrate_scale(&[]).is_err());
        assert!(calibrate_scale(&[(0.0, 0.1), (0.0, 0.3)]).is_err());
        assert!(calibrate_scale(&[(-1.0, 0.1)]).is_err());
    }

    #[test]
    fn noisy_line_within_two_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = 0.2628;
        let pairs: Vec<_> = line(k)
            .into_iter()
            .map(|(d, m)| (d, m + 0.01 * 1.4 * k * (rng.random::<f64>() - 0.5)))
            .collect();
        let got = calibrate_scale(&pairs).unwrap();
        assert!((got / k - 1.0).abs() < 0.02);
    }

    #[test]
    fn pairs_csv_with_header() {
        let text = "real_m,measured\n0.2,0.05\n\n0.4,0.1\n";
        let pairs = read_calibration_pairs(text.as_bytes()).unwrap();
        assert_eq!(pairs, vec![(0.2, 0.05), (0.4, 0.1)]);
        assert!(read_calibration_pairs("0.2,0.05\nnope\n".as_bytes()).is_err());
    }

    #[test]
    fn rmse_trivia() {
        let same = rmse_of((0..5).map(|i| ([i as f64, 1.0], [i as f64, 1.0]))).unwrap();
        assert_eq!(same, RmseTriple { x: 0.0, z: 0.0, track: 0.0 });
        let offset = rmse_of((0..5).map(|i| ([i as f64 + 0.3, 1.0], [i as f64, 1.0]))).unwrap();
        assert!((offset.x - 0.3).abs() < 1e-15);
        assert_eq!(offset.z, 0.0);
        assert!((offset.track - 0.3).abs() < 1e-15);
        assert!(matches!(rmse_of(std::iter::empty()), Err(SimError::EmptyLog)));
    }

    #[test]
    fn metric_conversion_divides_per_axis() {
        let cam = RmseTriple { x: 0.02921, z: 0.02628, track: 0.0 };
        let m = cam.to_metric(&ScaleCalibration::default());
        assert!((m.x - 0.1).abs() < 1e-12);
        assert!((m.z - 0.1).abs() < 1e-12);
        assert!((m.track - 0.1 * 2f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn track_is_euclidean_combination(pts in prop::collection::vec(prop::array::uniform4(-3.0..3.0f64), 1..200)) {
            let r = rmse_of(pts.iter().map(|p| ([p[0], p[1]], [p[2], p[3]]))).unwrap();
            prop_assert!((r.track * r.track - (r.x * r.x + r.z * r.z)).abs() < 1e-12);
        }
    }
}
