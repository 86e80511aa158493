use std::fs;
use std::path::Path;

use super::{ResultRow, RowStatus, SweepStructure};
use crate::error::{Error, Result};
use crate::norm::Method;
use crate::renorm::StepCounts;

pub const CSV_HEADER: [&str; 16] = [
    "structure",
    "method",
    "N",
    "p",
    "b",
    "seed",
    "status",
    "steps_total",
    "steps_one_node_overflow",
    "steps_one_node_underflow",
    "steps_partial_nonfinite",
    "steps_partial_range",
    "steps_full_residual",
    "final_norm_log",
    "cumulative_log_scale",
    "wall_ms",
];

// `{:?}` on f64 prints the shortest decimal that parses back to the same bits.
fn float(x: f64) -> String {
    format!("{x:?}")
}

fn record(row: &ResultRow) -> [String; 16] {
    let c = &row.steps_by_cause;
    [
        row.structure.as_str().to_string(),
        row.method.as_str().to_string(),
        row.nodes.to_string(),
        row.phys.to_string(),
        row.bond.to_string(),
        row.seed.to_string(),
        row.status.as_str().to_string(),
        row.steps_total.to_string(),
        c.one_node_overflow.to_string(),
        c.one_node_underflow.to_string(),
        c.partial_nonfinite.to_string(),
        c.partial_range.to_string(),
        c.full_residual.to_string(),
        float(row.final_norm_log),
        float(row.cumulative_log_scale),
        float(row.wall_ms),
    ]
}

pub fn write_csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut writer = ::csv::Writer::from_writer(Vec::new());
    let to_err = |e: ::csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    writer.write_record(CSV_HEADER).map_err(to_err)?;
    for row in rows {
        writer.write_record(record(row)).map_err(to_err)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn write_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_csv_string(rows)?).map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(rec: &::csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Malformed(format!("line {line}: bad {} value {raw:?}", CSV_HEADER[i])))
}

pub fn read_csv_str(text: &str) -> Result<Vec<ResultRow>> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Malformed(format!("csv header: {e}")))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Malformed(format!(
            "unexpected csv header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Malformed(format!("line {line}: {e}")))?;
        let structure: SweepStructure = field(&rec, 0, line)?;
        let method: Method = field(&rec, 1, line)?;
        let status: RowStatus = field(&rec, 6, line)?;
        rows.push(ResultRow {
            structure,
            method,
            nodes: field(&rec, 2, line)?,
            phys: field(&rec, 3, line)?,
            bond: field(&rec, 4, line)?,
            seed: field(&rec, 5, line)?,
            status,
            steps_total: field(&rec, 7, line)?,
            steps_by_cause: StepCounts {
                one_node_overflow: field(&rec, 8, line)?,
                one_node_underflow: field(&rec, 9, line)?,
                partial_nonfinite: field(&rec, 10, line)?,
                partial_range: field(&rec, 11, line)?,
                full_residual: field(&rec, 12, line)?,
            },
            final_norm_log: field(&rec, 13, line)?,
            cumulative_log_scale: field(&rec, 14, line)?,
            wall_ms: field(&rec, 15, line)?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_csv_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_sweep, SweepSpec};

    fn rows() -> Vec<ResultRow> {
        let spec = SweepSpec::new(
            vec![SweepStructure::Tt],
            vec![Method::Frobenius],
            vec![2, 3],
            vec![2],
            vec![2],
            vec![0],
        );
        run_sweep(&spec).unwrap()
    }

    #[test]
    fn empty_rows_give_header_only() {
        let text = write_csv_string(&[]).unwrap();
        assert_eq!(text, format!("{}\n", CSV_HEADER.join(",")));
        assert!(read_csv_str(&text).unwrap().is_empty());
    }

    #[test]
    fn two_rows_three_lines() {
        let text = write_csv_string(&rows()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(
            "structure,method,N,p,b,seed,status,steps_total,steps_one_node_overflow,\
             steps_one_node_underflow,steps_partial_nonfinite,steps_partial_range,\
             steps_full_residual,final_norm_log,cumulative_log_scale,wall_ms\n"
        ));
    }

    #[test]
    fn round_trip() {
        let mut rows = rows();
        rows[1].final_norm_log = f64::INFINITY;
        rows[1].cumulative_log_scale = -0.1 - 0.2;
        rows[1].status = RowStatus::Failed;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_csv(&rows, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows);
    }

    #[test]
    fn wrong_header_is_malformed() {
        assert!(matches!(
            read_csv_str("a,b\n1,2\n"),
            Err(Error::Malformed(_))
        ));
    }
}
