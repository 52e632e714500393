//! The TSPLIB subset used for TSP instances: `NAME`, `TYPE: TSP`,
//! `DIMENSION`, `EDGE_WEIGHT_TYPE: EUC_2D`, a 1-based `NODE_COORD_SECTION`
//! and `EOF`. Reference optima live next to the instances in a JSON sidecar
//! keyed by instance fingerprint.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ceps_core::tsp::{Point, ReferenceOptimum, TspInstance};
use ceps_core::Fingerprint;

use crate::error::{Error, Result};
use crate::store::{read_json, read_text, write_json, write_text};

/// File name of the optimum sidecar inside an instance directory.
pub const OPTIMA_FILE: &str = "optima.json";

pub fn parse(text: &str) -> std::result::Result<TspInstance, (usize, String)> {
    let mut name = None;
    let mut dimension = None;
    let mut lines = text.lines().enumerate();
    let mut coords: Vec<Option<Point>> = Vec::new();
    let mut in_coords = false;
    while let Some((i, raw)) = lines.next() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if in_coords {
            let mut parts = line.split_whitespace();
            let (Some(idx), Some(x), Some(y), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err((line_no, format!("expected `index x y`, got {line:?}")));
            };
            let idx: usize = idx
                .parse()
                .map_err(|_| (line_no, format!("bad node index {idx:?}")))?;
            let x: f64 = x
                .parse()
                .map_err(|_| (line_no, format!("bad coordinate {x:?}")))?;
            let y: f64 = y
                .parse()
                .map_err(|_| (line_no, format!("bad coordinate {y:?}")))?;
            if idx == 0 || idx > coords.len() {
                return Err((
                    line_no,
                    format!("node index {idx} outside 1..={}", coords.len()),
                ));
            }
            if coords[idx - 1].replace(Point::new(x, y)).is_some() {
                return Err((line_no, format!("node {idx} listed twice")));
            }
            continue;
        }
        if line == "NODE_COORD_SECTION" {
            let n =
                dimension.ok_or((line_no, "NODE_COORD_SECTION before DIMENSION".to_string()))?;
            coords = vec![None; n];
            in_coords = true;
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err((line_no, format!("expected `KEY: value`, got {line:?}")));
        };
        let value = value.trim();
        match key.trim() {
            "NAME" => name = Some(value.to_string()),
            "TYPE" if value != "TSP" => return Err((line_no, format!("unsupported TYPE {value}"))),
            "EDGE_WEIGHT_TYPE" if value != "EUC_2D" => {
                return Err((line_no, format!("unsupported EDGE_WEIGHT_TYPE {value}")))
            }
            "DIMENSION" => {
                dimension = Some(
                    value
                        .parse()
                        .map_err(|_| (line_no, format!("bad DIMENSION {value:?}")))?,
                );
            }
            _ => {}
        }
    }
    if !in_coords {
        return Err((
            text.lines().count(),
            "missing NODE_COORD_SECTION".to_string(),
        ));
    }
    let missing = coords.iter().position(Option::is_none);
    if let Some(m) = missing {
        return Err((
            text.lines().count(),
            format!("node {} has no coordinates", m + 1),
        ));
    }
    let cities = coords.into_iter().map(|p| p.expect("checked")).collect();
    TspInstance::new(name.as_deref().unwrap_or("unnamed"), cities).map_err(|e| (0, e.to_string()))
}

/// Coordinates are written in shortest round-trip form, so reading a
/// written file gives back the same fingerprint.
pub fn write(instance: &TspInstance) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NAME : {}", instance.name);
    let _ = writeln!(s, "TYPE : TSP");
    let _ = writeln!(s, "DIMENSION : {}", instance.len());
    let _ = writeln!(s, "EDGE_WEIGHT_TYPE : EUC_2D");
    let _ = writeln!(s, "NODE_COORD_SECTION");
    for (i, p) in instance.cities.iter().enumerate() {
        let _ = writeln!(s, "{} {} {}", i + 1, p.x, p.y);
    }
    s.push_str("EOF\n");
    s
}

pub fn read_file(path: &Path) -> Result<TspInstance> {
    let text = read_text(path)?;
    parse(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

pub fn write_file(path: &Path, instance: &TspInstance) -> Result<()> {
    write_text(path, &write(instance))
}

pub type Optima = BTreeMap<Fingerprint, ReferenceOptimum>;

pub fn read_optima(dir: &Path) -> Result<Optima> {
    let path = dir.join(OPTIMA_FILE);
    if !path.exists() {
        return Ok(Optima::new());
    }
    read_json(&path)
}

/// Merges the instances' optima into the directory's sidecar.
pub fn record_optima<'a>(
    dir: &Path,
    instances: impl IntoIterator<Item = &'a TspInstance>,
) -> Result<()> {
    let mut optima = read_optima(dir)?;
    for inst in instances {
        if let Some(opt) = inst.reference_optimum {
            optima.insert(inst.fingerprint(), opt);
        }
    }
    write_json(&dir.join(OPTIMA_FILE), &optima)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ceps_core::tsp::Provenance;
    use proptest::prelude::*;

    #[test]
    fn reads_the_subset() {
        let text = "NAME : sq\nCOMMENT : four corners\nTYPE : TSP\nDIMENSION : 4\nEDGE_WEIGHT_TYPE : EUC_2D\n\
                    NODE_COORD_SECTION\n2 0 1\n1 0 0\n3 1 1\n4 1.5 0\nEOF\n";
        let inst = parse(text).unwrap();
        assert_eq!(inst.name, "sq");
        assert_eq!(inst.cities[0], Point::new(0.0, 0.0));
        assert_eq!(inst.cities[3], Point::new(1.5, 0.0));
    }

    #[test]
    fn rejects_malformed_files() {
        let head =
            "NAME: x\nTYPE: TSP\nDIMENSION: 3\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n";
        for body in [
            "1 0 0\n2 1 1\n",
            "1 0 0\n1 1 1\n3 2 2\n",
            "1 0 0\n2 1\n3 2 2\n",
            "0 0 0\n1 1 1\n2 2 2\n",
        ] {
            assert!(parse(&format!("{head}{body}EOF\n")).is_err(), "{body:?}");
        }
        assert!(parse("NAME: x\nTYPE: ATSP\n").is_err());
        assert!(parse(&head.replace("EUC_2D", "GEO")).is_err());
        assert_eq!(
            parse("NAME: x\nTYPE: TSP\n").unwrap_err().1,
            "missing NODE_COORD_SECTION"
        );
    }

    #[test]
    fn optima_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = TspInstance::new(
            "a",
            vec![
                Point::new(0.0, 0.0),
                Point::new(0.0, 1.0),
                Point::new(1.0, 1.0),
            ],
        )
        .unwrap()
        .with_optimum(3, Provenance::Exact);
        record_optima(dir.path(), [&a]).unwrap();
        let got = read_optima(dir.path()).unwrap();
        assert_eq!(got[&a.fingerprint()].value, 3);
    }

    proptest! {
        #[test]
        fn write_then_parse_is_lossless(
            pts in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 3..40),
        ) {
            let cities: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let inst = TspInstance::new("p", cities).unwrap();
            let back = parse(&write(&inst)).unwrap();
            prop_assert_eq!(back.fingerprint(), inst.fingerprint());
            prop_assert_eq!(back.cities, inst.cities);
        }
    }
}
