//! TSPLIB `.tsp` reader for coordinate-based instances.
//!
//! Distances inside an [`Instance`] are always planar Euclidean on the
//! normalized coordinates. The integer TSPLIB distance functions are exposed
//! separately through [`tsplib_distance`] for checking against published
//! optima.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tsp::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeWeightType {
    Euc2d,
    Ceil2d,
    Att,
    Geo,
}

impl EdgeWeightType {
    pub fn name(self) -> &'static str {
        match self {
            EdgeWeightType::Euc2d => "EUC_2D",
            EdgeWeightType::Ceil2d => "CEIL_2D",
            EdgeWeightType::Att => "ATT",
            EdgeWeightType::Geo => "GEO",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "EUC_2D" => Ok(EdgeWeightType::Euc2d),
            "CEIL_2D" => Ok(EdgeWeightType::Ceil2d),
            "ATT" => Ok(EdgeWeightType::Att),
            "GEO" => Ok(EdgeWeightType::Geo),
            other => Err(Error::UnsupportedFormat(format!("EDGE_WEIGHT_TYPE {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsplibHeader {
    pub name: String,
    pub dimension: usize,
    pub edge_weight_type: EdgeWeightType,
    pub comment: Option<String>,
}

/// A parsed file before normalization. `coords[k]` is node `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TsplibFile {
    pub header: TsplibHeader,
    pub coords: Vec<[f64; 2]>,
}

impl TsplibFile {
    /// Instance on coordinates translated to the origin and divided by the
    /// larger of the two spans, so they fit in `[0, 1]^2`.
    pub fn to_instance<T: Scalar>(&self) -> Result<Instance<T>> {
        let coords = normalize(&self.coords);
        Instance::new(
            self.header.name.clone(),
            coords.into_iter().map(|[x, y]| [T::of(x), T::of(y)]).collect(),
        )
    }

    /// TSPLIB integer distance between nodes `i` and `j` (0-based).
    pub fn distance(&self, i: usize, j: usize) -> i64 {
        tsplib_distance(self.header.edge_weight_type, self.coords[i], self.coords[j])
    }

    /// TSPLIB integer length of a tour given as 0-based node order.
    pub fn tour_cost(&self, order: &[usize]) -> i64 {
        let n = order.len();
        (0..n).map(|k| self.distance(order[k], order[(k + 1) % n])).sum()
    }
}

pub fn normalize(coords: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in coords {
        for a in 0..2 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let span = if span > 0.0 { span } else { 1.0 };
    coords
        .iter()
        .map(|c| [(c[0] - lo[0]) / span, (c[1] - lo[1]) / span])
        .collect()
}

fn nint(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Latitude or longitude in radians from TSPLIB's `DDD.MM` notation.
fn geo_radians(x: f64) -> f64 {
    // Truncated on purpose: the published GEO distances use this value.
    #[allow(clippy::approx_constant)]
    const PI: f64 = 3.141592;
    let deg = x.trunc();
    let min = x - deg;
    PI * (deg + 5.0 * min / 3.0) / 180.0
}

/// Canonical TSPLIB distance functions.
pub fn tsplib_distance(kind: EdgeWeightType, a: [f64; 2], b: [f64; 2]) -> i64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    match kind {
        EdgeWeightType::Euc2d => nint(dx.hypot(dy)),
        EdgeWeightType::Ceil2d => dx.hypot(dy).ceil() as i64,
        EdgeWeightType::Att => {
            let r = ((dx * dx + dy * dy) / 10.0).sqrt();
            let t = nint(r);
            if (t as f64) < r {
                t + 1
            } else {
                t
            }
        }
        EdgeWeightType::Geo => {
            const RRR: f64 = 6378.388;
            let (lat_a, lon_a) = (geo_radians(a[0]), geo_radians(a[1]));
            let (lat_b, lon_b) = (geo_radians(b[0]), geo_radians(b[1]));
            let q1 = (lon_a - lon_b).cos();
            let q2 = (lat_a - lat_b).cos();
            let q3 = (lat_a + lat_b).cos();
            (RRR * (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).acos() + 1.0) as i64
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Splits `KEY: value` or `KEY : value`; bare keywords have no value.
fn split_header(line: &str) -> (String, Option<&str>) {
    match line.split_once(':') {
        Some((k, v)) => (k.trim().to_ascii_uppercase(), Some(v.trim())),
        None => (line.trim().to_ascii_uppercase(), None),
    }
}

fn parse_number(tok: &str, line: usize, what: &str) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, format!("malformed {what} {tok:?}")))
}

/// Parses a `.tsp` file with a NODE_COORD_SECTION.
pub fn parse_tsplib_file(text: &str) -> Result<TsplibFile> {
    let mut name = None;
    let mut dimension: Option<usize> = None;
    let mut kind = None;
    let mut comment: Option<String> = None;
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let mut last_line = 0;
    let mut in_section = false;

    for (no, raw) in lines.by_ref() {
        last_line = no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = split_header(line);
        let need = |v: Option<&str>| -> Result<String> {
            v.map(str::to_string)
                .ok_or_else(|| parse_err(no, format!("{key} needs a value")))
        };
        match key.as_str() {
            "NAME" => name = Some(need(value)?),
            "COMMENT" => {
                let v = need(value)?;
                comment = Some(match comment {
                    Some(c) => format!("{c}\n{v}"),
                    None => v,
                });
            }
            "TYPE" => {
                let v = need(value)?;
                if v != "TSP" {
                    return Err(Error::UnsupportedFormat(format!("TYPE {v}")));
                }
            }
            "DIMENSION" => {
                let v = need(value)?;
                let d = v
                    .parse::<usize>()
                    .ok()
                    .filter(|&d| d > 0)
                    .ok_or_else(|| parse_err(no, format!("malformed DIMENSION {v:?}")))?;
                dimension = Some(d);
            }
            "EDGE_WEIGHT_TYPE" => kind = Some(EdgeWeightType::parse(&need(value)?)?),
            "NODE_COORD_SECTION" => {
                in_section = true;
                break;
            }
            "EOF" => break,
            k if k.ends_with("_SECTION") => {
                return Err(Error::UnsupportedFormat(format!("section {k}")));
            }
            _ => {}
        }
    }

    let missing = |what: &str| parse_err(last_line, format!("missing {what}"));
    let name = name.ok_or_else(|| missing("NAME"))?;
    let dimension = dimension.ok_or_else(|| missing("DIMENSION"))?;
    let edge_weight_type = kind.ok_or_else(|| missing("EDGE_WEIGHT_TYPE"))?;
    if !in_section {
        return Err(missing("NODE_COORD_SECTION"));
    }

    let mut coords: Vec<Option<[f64; 2]>> = vec![None; dimension];
    let mut count = 0;
    for (no, raw) in lines {
        last_line = no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.eq_ignore_ascii_case("EOF") {
            break;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0].chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            // Trailing sections such as DISPLAY_DATA_SECTION are not needed.
            break;
        }
        if toks.len() != 3 {
            return Err(parse_err(no, format!("expected 3 fields, found {}", toks.len())));
        }
        let idx = toks[0]
            .parse::<usize>()
            .map_err(|_| parse_err(no, format!("malformed node index {:?}", toks[0])))?;
        let x = parse_number(toks[1], no, "coordinate")?;
        let y = parse_number(toks[2], no, "coordinate")?;
        count += 1;
        if count > dimension {
            return Err(parse_err(
                no,
                format!("more coordinate rows than DIMENSION {dimension}"),
            ));
        }
        if idx == 0 || idx > dimension {
            return Err(parse_err(no, format!("node index {idx} outside 1..={dimension}")));
        }
        if coords[idx - 1].replace([x, y]).is_some() {
            return Err(parse_err(no, format!("duplicate node index {idx}")));
        }
    }
    if count != dimension {
        return Err(parse_err(
            last_line,
            format!("DIMENSION {dimension} but {count} coordinate rows"),
        ));
    }
    Ok(TsplibFile {
        header: TsplibHeader {
            name,
            dimension,
            edge_weight_type,
            comment,
        },
        coords: coords.into_iter().map(|c| c.expect("all rows seen")).collect(),
    })
}

/// Reads a TSPLIB stream into a normalized instance named after NAME.
pub fn parse_tsplib<T: Scalar, R: Read>(mut src: R) -> Result<Instance<T>> {
    let mut bytes = Vec::new();
    src.read_to_end(&mut bytes)?;
    let text = String::from_utf8_lossy(&bytes);
    parse_tsplib_file(&text)?.to_instance()
}

pub fn read_tsplib<T: Scalar>(path: impl AsRef<Path>) -> Result<Instance<T>> {
    parse_tsplib(std::fs::File::open(path)?)
}

/// Writes an instance as an EUC_2D file with its current coordinates.
pub fn write_tsplib<T: Scalar, W: std::io::Write>(instance: &Instance<T>, mut sink: W) -> Result<()> {
    writeln!(sink, "NAME : {}", instance.id())?;
    writeln!(sink, "TYPE : TSP")?;
    writeln!(sink, "DIMENSION : {}", instance.n())?;
    writeln!(sink, "EDGE_WEIGHT_TYPE : EUC_2D")?;
    writeln!(sink, "NODE_COORD_SECTION")?;
    for (k, c) in instance.coords().iter().enumerate() {
        writeln!(sink, "{} {} {}", k + 1, c[0].as_f64(), c[1].as_f64())?;
    }
    writeln!(sink, "EOF")?;
    Ok(())
}
