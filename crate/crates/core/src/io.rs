//! Text formats: phase-shift tables, pole records, model records and
//! two-column numeric tables. Degrees and MeV at the file boundary.

use serde::{Deserialize, Serialize};

use crate::erf::{ErfKind, ErfModel, PhaseShiftDataset, PhaseShiftPoint};
use crate::error::{Error, Result};
use crate::kinematics::PartialWave;
use crate::poles::{PoleSet, Provenance};

const NP_1S0: &str = include_str!("../data/np_1S0.csv");
const NP_1D2: &str = include_str!("../data/np_1D2.csv");

/// Approximate np phase-shift samples shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundledDataset {
    Np1S0,
    Np1D2,
}

impl BundledDataset {
    pub fn text(self) -> &'static str {
        match self {
            Self::Np1S0 => NP_1S0,
            Self::Np1D2 => NP_1D2,
        }
    }

    pub fn l(self) -> PartialWave {
        match self {
            Self::Np1S0 => PartialWave(0),
            Self::Np1D2 => PartialWave(2),
        }
    }

    pub fn load(self) -> Result<PhaseShiftDataset> {
        parse_dataset(self.text(), self.l())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Significant lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, s)| (i + 1, s.trim()))
        .filter(|(_, s)| !s.is_empty() && !s.starts_with('#'))
}

fn parse_number(line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{what}: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} is not finite")));
    }
    Ok(v)
}

/// Reads `E_lab_MeV,delta_deg[,error_deg]` tables.
pub fn parse_dataset(text: &str, l: PartialWave) -> Result<PhaseShiftDataset> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(0, "no header line"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_error = match cols.as_slice() {
        ["E_lab_MeV", "delta_deg"] => false,
        ["E_lab_MeV", "delta_deg", "error_deg"] => true,
        _ => {
            return Err(parse_err(
                hline,
                format!("expected header E_lab_MeV,delta_deg[,error_deg], found {header:?}"),
            ))
        }
    };
    let mut points = Vec::new();
    let mut first_line = None;
    for (ln, s) in lines {
        first_line.get_or_insert(ln);
        let f: Vec<&str> = s.split(',').collect();
        if f.len() != cols.len() {
            return Err(parse_err(ln, format!("expected {} fields, found {}", cols.len(), f.len())));
        }
        let e_lab = parse_number(ln, f[0], "E_lab_MeV")?;
        if e_lab <= 0.0 {
            return Err(parse_err(ln, "E_lab_MeV must be positive"));
        }
        let delta = parse_number(ln, f[1], "delta_deg")?.to_radians();
        let sigma = if with_error {
            let s = parse_number(ln, f[2], "error_deg")?;
            if s <= 0.0 {
                return Err(parse_err(ln, "error_deg must be positive"));
            }
            Some(s.to_radians())
        } else {
            None
        };
        if let Some(prev) = points.last().map(|p: &PhaseShiftPoint| p.e_lab) {
            if e_lab <= prev {
                return Err(parse_err(ln, "energies must be strictly increasing"));
            }
        }
        points.push(PhaseShiftPoint { e_lab, delta, sigma });
    }
    if points.is_empty() {
        return Err(parse_err(hline, "table has no data rows"));
    }
    PhaseShiftDataset::new(l, points).map_err(|e| parse_err(first_line.unwrap_or(hline), e.to_string()))
}

pub fn format_dataset(data: &PhaseShiftDataset) -> String {
    let with_error = data.has_sigmas();
    let mut out = String::from(if with_error {
        "E_lab_MeV,delta_deg,error_deg\n"
    } else {
        "E_lab_MeV,delta_deg\n"
    });
    for p in data.points() {
        out.push_str(&format!("{},{}", p.e_lab, p.delta.to_degrees()));
        if let (true, Some(s)) = (with_error, p.sigma) {
            out.push_str(&format!(",{}", s.to_degrees()));
        }
        out.push('\n');
    }
    out
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::ExtractedFromErf => "extracted-from-erf",
        Provenance::DirectFit => "direct-fit",
        Provenance::Manual => "manual",
    }
}

/// Pole record:
///
/// ```text
/// # comment
/// l = 0
/// provenance = manual
/// -0.0401
/// 0.8365
/// ```
///
/// One `kappa` (fm^-1) per line, written at round-trip precision.
pub fn format_pole_set(poles: &PoleSet) -> String {
    let mut out = String::from("# S-matrix poles k = i kappa, kappa in fm^-1\n");
    out.push_str(&format!("l = {}\n", poles.l().l()));
    out.push_str(&format!("provenance = {}\n", provenance_name(poles.provenance())));
    for k in poles.kappas() {
        out.push_str(&format!("{k:?}\n"));
    }
    out
}

/// Reads a pole record. `l` and `provenance` lines are optional; `default_l`
/// applies when the record has no `l` line.
pub fn parse_pole_set(text: &str, default_l: Option<PartialWave>) -> Result<PoleSet> {
    let mut l = None;
    let mut provenance = Provenance::Manual;
    let mut kappas = Vec::new();
    let mut last = 0;
    for (ln, s) in content_lines(text) {
        last = ln;
        if let Some((key, value)) = s.split_once('=') {
            let value = value.trim();
            match key.trim() {
                "l" => {
                    let v: u32 = value
                        .parse()
                        .map_err(|_| parse_err(ln, format!("l must be a non-negative integer, found {value:?}")))?;
                    l = Some(PartialWave(v));
                }
                "provenance" => {
                    provenance = match value {
                        "extracted-from-erf" => Provenance::ExtractedFromErf,
                        "direct-fit" => Provenance::DirectFit,
                        "manual" => Provenance::Manual,
                        _ => return Err(parse_err(ln, format!("unknown provenance {value:?}"))),
                    }
                }
                other => return Err(parse_err(ln, format!("unknown key {other:?}"))),
            }
            continue;
        }
        for tok in s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            kappas.push(parse_number(ln, tok, "kappa")?);
        }
    }
    let l = l
        .or(default_l)
        .ok_or_else(|| parse_err(last, "pole record has no `l = ...` line and no l was given"))?;
    if kappas.is_empty() {
        return Err(parse_err(last, "pole record lists no poles"));
    }
    PoleSet::new(l, kappas, provenance).map_err(|e| parse_err(last, e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    l: u32,
    kind: ErfKind,
    numerator: Vec<f64>,
    #[serde(default = "unit_denominator")]
    denominator: Vec<f64>,
}

fn unit_denominator() -> Vec<f64> {
    vec![1.0]
}

/// JSON model record `{"l", "kind", "numerator", "denominator"}`, coefficients
/// in ascending powers of `k^2` (fm units).
pub fn format_model(model: &ErfModel) -> String {
    let rec = ModelRecord {
        l: model.l.l(),
        kind: model.kind,
        numerator: model.numerator().to_vec(),
        denominator: model.denominator().to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&rec).expect("model record serializes");
    s.push('\n');
    s
}

pub fn parse_model(text: &str) -> Result<ErfModel> {
    let rec: ModelRecord = serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))?;
    let l = PartialWave(rec.l);
    let built = match rec.kind {
        ErfKind::Taylor => ErfModel::taylor(l, rec.numerator),
        ErfKind::Pade => ErfModel::pade(l, rec.numerator, rec.denominator),
    };
    built.map_err(|e| parse_err(1, e.to_string()))
}

/// Whitespace-separated numeric table. `meta` lines go first as `# ` comments,
/// then a `# name name ...` column line.
pub fn format_table(meta: &[String], columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for m in meta {
        out.push_str("# ");
        out.push_str(m);
        out.push('\n');
    }
    out.push_str("# ");
    out.push_str(&columns.join(" "));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Reads a table written by [`format_table`]: comment lines and numeric rows.
pub fn parse_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut comments = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if let Some(c) = s.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        if s.is_empty() {
            continue;
        }
        let row = s
            .split_whitespace()
            .map(|t| parse_number(i + 1, t, "table cell"))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(|r: &Vec<f64>| r.len()) {
            if row.len() != first {
                return Err(parse_err(i + 1, format!("expected {first} columns, found {}", row.len())));
            }
        }
        rows.push(row);
    }
    Ok((comments, rows))
}
