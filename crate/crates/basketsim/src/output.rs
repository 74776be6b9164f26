//! CSV files with a provenance header.

use std::io::{self, Read, Write};
use std::path::Path;

use serde::Deserialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance written as `#` comment lines at the top of every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub reps: u32,
    pub config_sha256: String,
}

impl Provenance {
    pub fn header(&self) -> String {
        format!(
            "# basketsim {VERSION}\n# command: {}\n# seed: {}\n# reps: {}\n# config_sha256: {}\n",
            self.command, self.seed, self.reps, self.config_sha256
        )
    }
}

pub fn fixed6(x: f64) -> String {
    format!("{x:.6}")
}

/// One basket of one (scenario, design) simulation.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct OcRow {
    pub scenario_id: u32,
    pub size_family: String,
    pub pattern: String,
    pub design: String,
    pub basket_index: usize,
    pub n: u32,
    pub true_p: f64,
    pub rejection_rate: f64,
    pub bias: f64,
    pub ecd_mean: f64,
    pub fwer: f64,
    pub lambda: f64,
    pub param_json: String,
}

pub const OC_COLUMNS: [&str; 13] = [
    "scenario_id",
    "size_family",
    "pattern",
    "design",
    "basket_index",
    "n",
    "true_p",
    "rejection_rate",
    "bias",
    "ecd_mean",
    "fwer",
    "lambda",
    "param_json",
];

impl OcRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.scenario_id.to_string(),
            self.size_family.clone(),
            self.pattern.clone(),
            self.design.clone(),
            self.basket_index.to_string(),
            self.n.to_string(),
            fixed6(self.true_p),
            fixed6(self.rejection_rate),
            fixed6(self.bias),
            fixed6(self.ecd_mean),
            fixed6(self.fwer),
            fixed6(self.lambda),
            self.param_json.clone(),
        ]
    }
}

/// A header comment followed by a CSV table.
pub fn write_table<I, R>(out: &mut impl Write, provenance: &Provenance, columns: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    out.write_all(provenance.header().as_bytes())?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(columns)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()
}

pub fn write_oc(out: &mut impl Write, provenance: &Provenance, rows: &[OcRow]) -> io::Result<()> {
    write_table(out, provenance, &OC_COLUMNS, rows.iter().map(OcRow::record))
}

pub fn read_oc(input: impl Read) -> csv::Result<Vec<OcRow>> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input).deserialize().collect()
}

pub fn read_oc_file(path: &Path) -> csv::Result<Vec<OcRow>> {
    read_oc(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> OcRow {
        OcRow {
            scenario_id: 5,
            size_family: "grouped".into(),
            pattern: "Alternative".into(),
            design: "CPP".into(),
            basket_index: 1,
            n: 10,
            true_p: 0.35,
            rejection_rate: 0.8861234,
            bias: -0.0061,
            ecd_mean: 4.6,
            fwer: 0.0,
            lambda: 0.992,
            param_json: r#"{"a":4.0,"b":4.5}"#.into(),
        }
    }

    #[test]
    fn round_trip_keeps_six_decimals() {
        let prov = Provenance { command: "simulate".into(), seed: 1, reps: 10, config_sha256: "00".into() };
        let mut buf = Vec::new();
        write_oc(&mut buf, &prov, &[row()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# basketsim "));
        assert!(text.contains("0.886123"));
        let back = read_oc(&buf[..]).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].param_json, row().param_json);
        assert!((back[0].rejection_rate - 0.886123).abs() < 1e-12);
    }
}
