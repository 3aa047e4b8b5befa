//! Rendering of measurement reports as a text table and as CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BenchError, MeasurementReport};
use crate::motion::ExecutionType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setup: String,
    pub etype: String,
    pub aet_ms: f64,
    pub mad_ms: f64,
    pub aet_i: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub setup: String,
    pub etype: String,
    pub rep: usize,
    pub elapsed_ms: f64,
}

impl From<&MeasurementReport> for SummaryRow {
    fn from(r: &MeasurementReport) -> Self {
        Self { setup: r.setup.clone(), etype: r.etype.name().into(), aet_ms: r.aet_ms, mad_ms: r.mad_ms, aet_i: r.aet_i }
    }
}

fn write_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV is UTF-8")
}

fn read_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, BenchError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| BenchError::InvalidScenario(format!("csv: {e}")))
}

/// `setup,etype,aet_ms,mad_ms,aet_i`; `aet_i` is empty where undefined.
pub fn summary_csv(reports: &[MeasurementReport]) -> String {
    write_csv(reports.iter().map(SummaryRow::from))
}

/// `setup,etype,rep,elapsed_ms`, one line per repetition.
pub fn raw_csv(reports: &[MeasurementReport]) -> String {
    write_csv(reports.iter().flat_map(|r| {
        r.elapsed_ms.iter().enumerate().map(|(rep, &elapsed_ms)| RawRow {
            setup: r.setup.clone(),
            etype: r.etype.name().into(),
            rep,
            elapsed_ms,
        })
    }))
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>, BenchError> {
    read_csv(text)
}

pub fn parse_raw_csv(text: &str) -> Result<Vec<RawRow>, BenchError> {
    read_csv(text)
}

/// One row per execution type, an AET/MAD column pair per setup, and the
/// improvement of CM over SM underneath.
pub fn render_table(reports: &[MeasurementReport]) -> String {
    let mut setups: Vec<&str> = Vec::new();
    for r in reports {
        if !setups.contains(&r.setup.as_str()) {
            setups.push(&r.setup);
        }
    }
    let find = |setup: &str, etype| reports.iter().find(|r| r.setup == setup && r.etype == etype);

    let mut out = String::new();
    let _ = write!(out, "{:<4}", "ET");
    for s in &setups {
        let _ = write!(out, " | {:>12} {:>10}", format!("{s}: AET ms"), "MAD ms");
    }
    out.push('\n');
    let width = 4 + setups.len() * 26;
    out.push_str(&"-".repeat(width));
    out.push('\n');
    for etype in ExecutionType::ALL {
        if !setups.iter().any(|s| find(s, etype).is_some()) {
            continue;
        }
        let _ = write!(out, "{:<4}", etype.name());
        for s in &setups {
            match find(s, etype) {
                Some(r) => {
                    let _ = write!(out, " | {:>12.0} {:>10.1}", r.aet_ms, r.mad_ms);
                }
                None => {
                    let _ = write!(out, " | {:>12} {:>10}", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    let improvements: Vec<String> = setups
        .iter()
        .filter_map(|s| find(s, ExecutionType::Cm).and_then(|r| r.aet_i).map(|i| format!("{s}: {:.1} %", i * 100.0)))
        .collect();
    if !improvements.is_empty() {
        let _ = writeln!(out, "AET_i (CM vs SM)  {}", improvements.join("   "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report(setup: &str, etype: ExecutionType, elapsed_ms: Vec<f64>, aet_i: Option<f64>) -> MeasurementReport {
        MeasurementReport {
            setup: setup.into(),
            etype,
            aet_ms: super::super::mean(&elapsed_ms).unwrap(),
            mad_ms: super::super::mad(&elapsed_ms).unwrap(),
            elapsed_ms,
            aet_i,
            handshakes: 1,
            starvation_stops: 0,
        }
    }

    #[test]
    fn table_has_a_row_per_execution_type() {
        let reports = vec![
            report("a", ExecutionType::Rc, vec![3700.0], None),
            report("a", ExecutionType::Sm, vec![6476.0, 6480.0], None),
            report("a", ExecutionType::Cm, vec![3729.0], Some(0.4243)),
        ];
        let table = render_table(&reports);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[2].starts_with("RC"));
        assert!(lines[3].starts_with("SM") && lines[3].contains("6478"));
        assert!(lines[4].starts_with("CM"));
        assert!(lines[5].contains("42.4 %"));
    }

    #[test]
    fn missing_cells_are_dashed() {
        let reports = vec![report("a", ExecutionType::Sm, vec![1.0], None), report("b", ExecutionType::Cm, vec![2.0], None)];
        let table = render_table(&reports);
        assert!(table.lines().nth(2).unwrap().contains('-'));
        assert!(!table.contains("AET_i"));
    }

    #[test]
    fn summary_leaves_undefined_improvement_empty() {
        let csv = summary_csv(&[report("b", ExecutionType::Rc, vec![2.5], None)]);
        assert_eq!(csv, "setup,etype,aet_ms,mad_ms,aet_i\nb,RC,2.5,0.0,\n");
    }

    proptest! {
        #[test]
        fn csv_round_trips(values in prop::collection::vec(0.001f64..1e6, 1..10), aet_i in prop::option::of(-1.0f64..1.0)) {
            let reports = vec![report("a", ExecutionType::Cm, values.clone(), aet_i), report("b", ExecutionType::Sm, values, None)];
            let summary = parse_summary_csv(&summary_csv(&reports)).unwrap();
            prop_assert_eq!(summary, reports.iter().map(SummaryRow::from).collect::<Vec<_>>());
            let raw = parse_raw_csv(&raw_csv(&reports)).unwrap();
            prop_assert_eq!(raw.len(), reports[0].elapsed_ms.len() * 2);
            for (row, v) in raw.iter().zip(reports[0].elapsed_ms.iter()) {
                prop_assert_eq!(row.elapsed_ms, *v);
            }
        }
    }
}
