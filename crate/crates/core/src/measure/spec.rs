//! JSON form of a measure:
//! `{"atoms":[{"x":-0.5,"w":0.5}],"uniform":[{"lo":0.0,"hi":1.0,"w":0.5}]}`,
//! optionally with `"tails":[{"edge":1.0,"w":0.5}]` for `k/|x|^3` tails.

use serde::{Deserialize, Serialize};

use super::{Atom, Measure, TailPiece, UniformPiece};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub x: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformSpec {
    pub lo: f64,
    pub hi: f64,
    pub w: f64,
}

/// Tail of mass `w` with density proportional to `|x|^-3` beyond `edge`
/// (to `+∞` when `edge > 0`, to `-∞` when `edge < 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    pub edge: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub uniform: Vec<UniformSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tails: Vec<TailSpec>,
}

impl MeasureSpec {
    pub fn from_json(text: &str) -> std::result::Result<MeasureSpec, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_measure(&self) -> Result<Measure> {
        for t in &self.tails {
            if !(t.edge.is_finite() && t.edge != 0.0) {
                return Err(Error::InvalidMeasure(format!("tail edge {}", t.edge)));
            }
        }
        Measure::with_tails(
            self.atoms.iter().map(|a| Atom { x: a.x, w: a.w }).collect(),
            self.uniform
                .iter()
                .map(|u| UniformPiece { lo: u.lo, hi: u.hi, w: u.w })
                .collect(),
            self.tails.iter().map(|t| TailPiece::from_edge(t.edge, t.w)).collect(),
        )
    }
}

impl Measure {
    /// JSON form; fails for truncated inverse-cube pieces, which have no
    /// representation in the schema.
    pub fn to_spec(&self) -> Result<MeasureSpec> {
        let mut tails = Vec::new();
        for t in self.tails() {
            let edge = if t.lo.is_infinite() {
                t.hi
            } else if t.hi.is_infinite() {
                t.lo
            } else {
                return Err(Error::Unsupported(format!("bounded tail piece [{}, {}]", t.lo, t.hi)));
            };
            tails.push(TailSpec { edge, w: t.mass() });
        }
        Ok(MeasureSpec {
            atoms: self.atoms().iter().map(|a| AtomSpec { x: a.x, w: a.w }).collect(),
            uniform: self
                .pieces()
                .iter()
                .map(|p| UniformSpec { lo: p.lo, hi: p.hi, w: p.w })
                .collect(),
            tails,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example_schema() {
        let spec =
            MeasureSpec::from_json(r#"{"atoms":[{"x":-0.5,"w":0.5}],"uniform":[{"lo":0.0,"hi":1.0,"w":0.5}]}"#)
                .unwrap();
        let m = spec.to_measure().unwrap();
        assert_eq!(m.cdf(-0.5), 0.5);
        assert_eq!(m.to_spec().unwrap(), spec);
    }

    #[test]
    fn missing_lists_default_to_empty() {
        let m = MeasureSpec::from_json(r#"{"uniform":[{"lo":-1,"hi":1,"w":1}]}"#)
            .unwrap()
            .to_measure()
            .unwrap();
        assert!(m.is_probability());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(MeasureSpec::from_json(r#"{"atoms":[],"uniforms":[]}"#).is_err());
        assert!(MeasureSpec::from_json(r#"{"atoms":[{"x":0,"w":1,"y":2}]}"#).is_err());
    }

    #[test]
    fn tails_roundtrip() {
        let spec = MeasureSpec::from_json(r#"{"tails":[{"edge":-1,"w":0.5},{"edge":1,"w":0.5}]}"#).unwrap();
        let m = spec.to_measure().unwrap();
        assert!((m.mass() - 1.0).abs() < 1e-15);
        assert_eq!(m.to_spec().unwrap(), spec);
        assert!(MeasureSpec::from_json(r#"{"tails":[{"edge":0,"w":1}]}"#)
            .unwrap()
            .to_measure()
            .is_err());
    }
}
