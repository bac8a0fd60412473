//! JSON file formats: `cmjson` matrices, state files and group tables.
//!
//! Writers print every float as `{:.16e}` (17 significant digits) so a written file reads back
//! bit-for-bit. Readers reject non-finite entries and inconsistent shapes.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::matcore::ComplexMatrix;
use crate::scalar::C;
use crate::states::BipartitePureState;

type CMat = ComplexMatrix<f64>;

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct RawState {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
    dim_a: usize,
    dim_b: usize,
    #[serde(default = "default_true")]
    normalized: bool,
}

fn default_true() -> bool {
    true
}

/// Multiplication table as read from disk; validated by [`crate::grouprep::FiniteGroup`].
#[derive(Deserialize, Debug, Clone)]
pub struct RawGroup {
    pub order: usize,
    pub table: Vec<Vec<usize>>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

fn data_json(m: &CMat) -> String {
    let items: Vec<String> = m
        .as_slice()
        .iter()
        .map(|z| format!("[{},{}]", fmt_f64(z.re), fmt_f64(z.im)))
        .collect();
    format!("[{}]", items.join(","))
}

pub fn matrix_to_json(m: &CMat) -> String {
    format!(
        "{{\"rows\":{},\"cols\":{},\"data\":{}}}",
        m.rows(),
        m.cols(),
        data_json(m)
    )
}

pub fn state_to_json(s: &BipartitePureState<f64>) -> String {
    let m = s.coeffs();
    format!(
        "{{\"rows\":{},\"cols\":{},\"data\":{},\"dim_a\":{},\"dim_b\":{},\"normalized\":{}}}",
        m.rows(),
        m.cols(),
        data_json(m),
        s.dim_a(),
        s.dim_b(),
        s.is_normalized()
    )
}

fn build(rows: usize, cols: usize, data: Vec<[f64; 2]>) -> Result<CMat> {
    if data.len() != rows * cols {
        return Err(Error::InvalidFormat(format!(
            "expected {} entries for {}x{}, found {}",
            rows * cols,
            rows,
            cols,
            data.len()
        )));
    }
    if let Some(k) = data
        .iter()
        .position(|e| !e[0].is_finite() || !e[1].is_finite())
    {
        return Err(Error::NonFinite(format!("entry {}", k)));
    }
    CMat::from_vec(
        rows,
        cols,
        data.into_iter().map(|e| C::new(e[0], e[1])).collect(),
    )
}

pub fn matrix_from_json(text: &str) -> Result<CMat> {
    let raw: RawMatrix =
        serde_json::from_str(text).map_err(|e| Error::InvalidFormat(e.to_string()))?;
    build(raw.rows, raw.cols, raw.data)
}

pub fn state_from_json(text: &str) -> Result<BipartitePureState<f64>> {
    let raw: RawState =
        serde_json::from_str(text).map_err(|e| Error::InvalidFormat(e.to_string()))?;
    if (raw.rows, raw.cols) != (raw.dim_a, raw.dim_b) {
        return Err(Error::DimensionMismatch(format!(
            "coefficient grid {}x{} but dim_a={}, dim_b={}",
            raw.rows, raw.cols, raw.dim_a, raw.dim_b
        )));
    }
    let m = build(raw.rows, raw.cols, raw.data)?;
    if raw.normalized {
        BipartitePureState::new(m)
    } else {
        BipartitePureState::from_unnormalized(m)
    }
}

pub fn group_from_json(text: &str) -> Result<RawGroup> {
    serde_json::from_str(text).map_err(|e| Error::InvalidFormat(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_coeffs, seeded_rng};

    #[test]
    fn matrix_round_trip_is_exact() {
        let mut rng = seeded_rng(41, 0);
        let m = random_coeffs(3, 2, 2, &mut rng);
        let back = matrix_from_json(&matrix_to_json(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn state_round_trip_is_exact() {
        let mut rng = seeded_rng(42, 0);
        let s = BipartitePureState::new(random_coeffs(2, 3, 2, &mut rng)).unwrap();
        let back = state_from_json(&state_to_json(&s)).unwrap();
        assert_eq!(back.coeffs(), s.coeffs());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            matrix_from_json(r#"{"rows":1,"cols":2,"data":[[1,0]]}"#),
            Err(Error::InvalidFormat(_))
        ));
        assert!(matches!(
            matrix_from_json(r#"{"rows":1,"cols":1,"data":[[NaN,0]]}"#),
            Err(Error::InvalidFormat(_))
        ));
        assert!(matrix_from_json(r#"{"rows":1,"cols":1,"data":[[1e999,0]]}"#).is_err());
        assert!(matches!(
            state_from_json(r#"{"rows":1,"cols":1,"data":[[0.5,0]],"dim_a":1,"dim_b":1}"#),
            Err(Error::NotNormalized(_))
        ));
    }
}
