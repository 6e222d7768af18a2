//! Triple-format label files and small per-item / per-worker tables.
//!
//! Labels: header `worker_id,item_id,label`, one observed cell per row, ids
//! arbitrary strings, label `0` or `1`. Truth: header `item_id,label`.
//! Ids are reindexed densely in order of first appearance.

use crate::error::{Error, Result};
use crate::model::{Abilities, GroundTruth, LabelMatrix, SoftLabels};
use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedLabels {
    pub matrix: LabelMatrix,
    pub truth: Option<GroundTruth>,
    /// Original id of each matrix row.
    pub worker_ids: Vec<String>,
    /// Original id of each matrix column.
    pub item_ids: Vec<String>,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_err)?;
    let got: Vec<&str> = header
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}'))
        .collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {}, found {}",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

/// Rows of a keyed table after the header check: `(line, fields)`.
fn records<R: Read>(input: R, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, header)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

fn parse_binary(s: &str, line: usize) -> Result<u8> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Parse {
            line,
            message: format!("label {other:?} is not 0 or 1"),
        }),
    }
}

fn intern(ids: &mut Vec<String>, index: &mut HashMap<String, usize>, id: &str) -> usize {
    *index.entry(id.to_string()).or_insert_with(|| {
        ids.push(id.to_string());
        ids.len() - 1
    })
}

/// Parse a label triple file.
pub fn parse_labels<R: Read>(input: R) -> Result<LoadedLabels> {
    let rows = records(input, &["worker_id", "item_id", "label"])?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("label file has no rows".into()));
    }
    let (mut worker_ids, mut item_ids) = (Vec::new(), Vec::new());
    let (mut worker_index, mut item_index) = (HashMap::new(), HashMap::new());
    let mut cells = Vec::with_capacity(rows.len());
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    for (line, f) in &rows {
        let label = parse_binary(&f[2], *line)?;
        let i = intern(&mut worker_ids, &mut worker_index, &f[0]);
        let j = intern(&mut item_ids, &mut item_index, &f[1]);
        if seen.insert((i, j), *line).is_some() {
            return Err(Error::DuplicateLabel {
                worker: f[0].clone(),
                item: f[1].clone(),
                line: *line,
            });
        }
        cells.push((i, j, label));
    }
    let (n, m) = (worker_ids.len(), item_ids.len());
    let mut entries = vec![0u8; n * m];
    let mut mask = vec![false; n * m];
    for (i, j, label) in cells {
        entries[i * m + j] = label;
        mask[i * m + j] = true;
    }
    let matrix = if mask.iter().all(|&b| b) {
        LabelMatrix::new(n, m, entries)?
    } else {
        LabelMatrix::with_mask(n, m, entries, mask)?
    };
    Ok(LoadedLabels {
        matrix,
        truth: None,
        worker_ids,
        item_ids,
    })
}

/// Parse a truth file against known item ids; every item needs a label.
pub fn parse_truth<R: Read>(input: R, item_ids: &[String]) -> Result<GroundTruth> {
    let index: HashMap<&str, usize> = item_ids
        .iter()
        .enumerate()
        .map(|(j, s)| (s.as_str(), j))
        .collect();
    let mut labels: Vec<Option<u8>> = vec![None; item_ids.len()];
    for (line, f) in records(input, &["item_id", "label"])? {
        let label = parse_binary(&f[1], line)?;
        let j = *index
            .get(f[0].as_str())
            .ok_or_else(|| Error::UnknownItemInTruth {
                item: f[0].clone(),
                line,
            })?;
        if labels[j].replace(label).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("item {:?} listed twice", f[0]),
            });
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(j, l)| {
            l.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "truth file has no label for item {:?}",
                    item_ids[j]
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GroundTruth::new(labels)
}

/// Load a label file and, optionally, its truth file.
pub fn load_labels(path: &Path, truth: Option<&Path>) -> Result<LoadedLabels> {
    let mut loaded = parse_labels(File::open(path)?)?;
    if let Some(t) = truth {
        loaded.truth = Some(parse_truth(File::open(t)?, &loaded.item_ids)?);
    }
    Ok(loaded)
}

/// Rows of an `id,value` table with numeric values, in file order.
pub fn parse_id_values<R: Read>(input: R, header: [&str; 2]) -> Result<Vec<(String, f64)>> {
    records(input, &header)?
        .into_iter()
        .map(|(line, f)| {
            let v: f64 = f[1].parse().map_err(|_| Error::Parse {
                line,
                message: format!("{:?} is not a number", f[1]),
            })?;
            Ok((f[0].clone(), v))
        })
        .collect()
}

/// Values of an `id,value` table arranged in the order of `ids`; every id needs a row.
pub fn parse_keyed_values<R: Read>(
    input: R,
    header: [&str; 2],
    ids: &[String],
) -> Result<Vec<f64>> {
    let index: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(j, s)| (s.as_str(), j))
        .collect();
    let mut values: Vec<Option<f64>> = vec![None; ids.len()];
    for (id, v) in parse_id_values(input, header)? {
        let j = *index
            .get(id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("unknown id {id:?}")))?;
        if values[j].replace(v).is_some() {
            return Err(Error::InvalidInput(format!("id {id:?} listed twice")));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| Error::InvalidInput(format!("no value for id {:?}", ids[j]))))
        .collect()
}

fn id_or_index(ids: Option<&[String]>, k: usize) -> String {
    ids.map_or_else(|| k.to_string(), |ids| ids[k].clone())
}

fn write_rows<W: Write>(
    out: W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Observed cells as triples; ids default to row/column indices.
pub fn write_labels_csv<W: Write>(
    out: W,
    x: &LabelMatrix,
    worker_ids: Option<&[String]>,
    item_ids: Option<&[String]>,
) -> Result<()> {
    let rows = (0..x.workers()).flat_map(move |i| {
        (0..x.items()).filter_map(move |j| {
            x.get(i, j).map(|v| {
                vec![
                    id_or_index(worker_ids, i),
                    id_or_index(item_ids, j),
                    v.to_string(),
                ]
            })
        })
    });
    write_rows(out, &["worker_id", "item_id", "label"], rows)
}

pub fn write_truth_csv<W: Write>(
    out: W,
    y: &GroundTruth,
    item_ids: Option<&[String]>,
) -> Result<()> {
    let rows = y
        .as_slice()
        .iter()
        .enumerate()
        .map(|(j, v)| vec![id_or_index(item_ids, j), v.to_string()]);
    write_rows(out, &["item_id", "label"], rows)
}

pub fn write_soft_labels_csv<W: Write>(
    out: W,
    y: &SoftLabels,
    item_ids: Option<&[String]>,
) -> Result<()> {
    let rows = y
        .as_slice()
        .iter()
        .enumerate()
        .map(|(j, v)| vec![id_or_index(item_ids, j), format!("{v:.16e}")]);
    write_rows(out, &["item_id", "label"], rows)
}

pub fn write_abilities_csv<W: Write>(
    out: W,
    p: &Abilities,
    worker_ids: Option<&[String]>,
) -> Result<()> {
    let rows = p
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![id_or_index(worker_ids, i), format!("{v:.16e}")]);
    write_rows(out, &["worker_id", "ability"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_has_no_mask() {
        let data = "worker_id,item_id,label\na,x,1\na,y,0\nb,x,0\nb,y,1\n";
        let l = parse_labels(data.as_bytes()).unwrap();
        assert!(l.matrix.mask().is_none());
        assert_eq!(l.matrix.row(0), &[1, 0]);
        assert_eq!(l.matrix.row(1), &[0, 1]);
        assert_eq!(l.worker_ids, vec!["a", "b"]);
        assert_eq!(l.item_ids, vec!["x", "y"]);
    }

    #[test]
    fn missing_cell_sets_mask() {
        let data = "worker_id,item_id,label\r\na,x,1\r\na,y,0\r\nb,x,0\r\n";
        let l = parse_labels(data.as_bytes()).unwrap();
        assert!(l.matrix.mask().is_some());
        assert!(!l.matrix.is_observed(1, 1));
        assert!(l.matrix.is_observed(1, 0));
    }

    #[test]
    fn non_binary_label_names_line() {
        let data = "worker_id,item_id,label\na,x,1\na,y,2\n";
        assert_eq!(
            parse_labels(data.as_bytes()).unwrap_err(),
            Error::Parse {
                line: 3,
                message: "label \"2\" is not 0 or 1".into()
            }
        );
    }

    #[test]
    fn duplicates_and_headers() {
        let dup = "worker_id,item_id,label\na,x,1\na,x,0\n";
        assert!(matches!(
            parse_labels(dup.as_bytes()),
            Err(Error::DuplicateLabel { line: 3, .. })
        ));
        let bad = "worker,item,label\na,x,1\n";
        assert!(matches!(
            parse_labels(bad.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn truth_join() {
        let ids = vec!["x".to_string(), "y".to_string()];
        let t = parse_truth("item_id,label\ny,1\nx,0\n".as_bytes(), &ids).unwrap();
        assert_eq!(t.as_slice(), &[0, 1]);
        assert!(matches!(
            parse_truth("item_id,label\nz,1\n".as_bytes(), &ids),
            Err(Error::UnknownItemInTruth { line: 2, .. })
        ));
        assert!(parse_truth("item_id,label\nx,1\n".as_bytes(), &ids).is_err());
    }

    #[test]
    fn write_then_parse_round_trip() {
        let x = LabelMatrix::with_mask(
            2,
            3,
            vec![1, 0, 1, 0, 0, 1],
            vec![true, true, true, false, true, true],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_labels_csv(&mut buf, &x, None, None).unwrap();
        let back = parse_labels(buf.as_slice()).unwrap();
        assert_eq!(back.matrix, x);
    }
}
