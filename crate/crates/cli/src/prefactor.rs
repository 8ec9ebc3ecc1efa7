//! Prefactor specifications on the command line.
//!
//! ```text
//! identity
//! hole:X,Y[,M]               one hole of multiplicity M (default 1)
//! holes:X,Y,M;X,Y,M;...      several holes
//! ring:R,COUNT[,CX,CY]       COUNT unit holes on a circle
//! quadratic:RE[,IM]          exp(c sum z^2)
//! <label>                    an entry of the standard matrix
//! ```
//!
//! Locations are physical coordinates.

use laughlin_core::incompressibility::prefactor_matrix;
use laughlin_core::{Complex64, PlasmaParams, Prefactor, QuasiHole};

use crate::CliError;

fn numbers(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{what}: cannot parse '{t}' as a number")))
        })
        .collect()
}

fn count(v: f64, what: &str) -> Result<u32, CliError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(CliError::Usage(format!("{what}: {v} is not a non-negative integer")))
    }
}

pub fn parse_prefactor(spec: &str, params: PlasmaParams) -> Result<Prefactor, CliError> {
    let spec = spec.trim();
    let (head, body) = spec.split_once(':').unwrap_or((spec, ""));
    let pf = match head {
        "identity" if body.is_empty() => Prefactor::Identity,
        "hole" => {
            let v = numbers(body, "hole")?;
            let m = match v.len() {
                2 => 1,
                3 => count(v[2], "hole multiplicity")?,
                _ => return Err(CliError::Usage("hole expects X,Y[,M]".into())),
            };
            Prefactor::single_hole([v[0], v[1]], m)?
        }
        "holes" => {
            let mut holes = Vec::new();
            for part in body.split(';').filter(|p| !p.trim().is_empty()) {
                let v = numbers(part, "holes")?;
                if v.len() != 3 {
                    return Err(CliError::Usage("holes expects X,Y,M;X,Y,M;...".into()));
                }
                holes.push(QuasiHole {
                    location: [v[0], v[1]],
                    multiplicity: count(v[2], "hole multiplicity")?,
                });
            }
            Prefactor::quasi_holes(holes)?
        }
        "ring" => {
            let v = numbers(body, "ring")?;
            let center = match v.len() {
                2 => [0.0, 0.0],
                4 => [v[2], v[3]],
                _ => return Err(CliError::Usage("ring expects R,COUNT[,CX,CY]".into())),
            };
            Prefactor::hole_ring(center, v[0], count(v[1], "ring count")? as usize)?
        }
        "quadratic" => {
            let v = numbers(body, "quadratic")?;
            let c = match v.len() {
                1 => Complex64::new(v[0], 0.0),
                2 => Complex64::new(v[0], v[1]),
                _ => return Err(CliError::Usage("quadratic expects RE[,IM]".into())),
            };
            Prefactor::quadratic_exponential(c)?
        }
        _ if body.is_empty() => prefactor_matrix(params)?
            .into_iter()
            .find(|(label, _)| label == spec)
            .map(|(_, pf)| pf)
            .ok_or_else(|| CliError::Usage(format!("unknown prefactor '{spec}'")))?,
        _ => return Err(CliError::Usage(format!("unknown prefactor '{spec}'"))),
    };
    Ok(pf)
}

/// Expands `matrix` into the labelled standard set and parses the rest.
pub fn parse_prefactor_list(
    specs: &[String],
    params: PlasmaParams,
) -> Result<Vec<(String, Prefactor)>, CliError> {
    let mut out = Vec::new();
    for s in specs {
        if s.trim() == "matrix" {
            out.extend(prefactor_matrix(params)?);
        } else {
            out.push((s.trim().to_string(), parse_prefactor(s, params)?));
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no prefactors given".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PlasmaParams {
        PlasmaParams::new(20, 2).unwrap()
    }

    #[test]
    fn parses_every_form() {
        assert_eq!(parse_prefactor("identity", p()).unwrap(), Prefactor::Identity);
        assert_eq!(
            parse_prefactor("hole:1,2", p()).unwrap(),
            Prefactor::single_hole([1.0, 2.0], 1).unwrap()
        );
        assert_eq!(
            parse_prefactor("hole:1,2,3", p()).unwrap(),
            Prefactor::single_hole([1.0, 2.0], 3).unwrap()
        );
        match parse_prefactor("holes:0,0,1;1,0,2", p()).unwrap() {
            Prefactor::QuasiHoleProduct { holes } => {
                assert_eq!(holes.len(), 2);
                assert_eq!(holes[1].multiplicity, 2);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            parse_prefactor("ring:2,4", p()).unwrap(),
            Prefactor::hole_ring([0.0, 0.0], 2.0, 4).unwrap()
        );
        assert_eq!(
            parse_prefactor("quadratic:0.1", p()).unwrap(),
            Prefactor::quadratic_exponential(Complex64::new(0.1, 0.0)).unwrap()
        );
        let matrix = prefactor_matrix(p()).unwrap();
        assert_eq!(parse_prefactor("ring-4", p()).unwrap(), matrix[5].1);
    }

    #[test]
    fn rejects_malformed_specs() {
        for bad in ["hole:1", "hole:1,2,0.5", "ring:1", "quadratic:", "nonsense", "identity:3", "holes:1,2"] {
            assert!(parse_prefactor(bad, p()).is_err(), "{bad}");
        }
    }

    #[test]
    fn matrix_expands() {
        let list = parse_prefactor_list(&["matrix".into(), "hole:0,0".into()], p()).unwrap();
        assert_eq!(list.len(), 9);
        assert_eq!(list[0].0, "identity");
        assert_eq!(list[8].0, "hole:0,0");
    }
}
